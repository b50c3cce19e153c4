use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, ValueEnum};
use deficiency_core::enclosure::Enclosure;
use deficiency_core::formats;
use deficiency_core::martingale::{
    doob_crossing_build, fatou_estimate, tree_validate, CrossingParams, Kind,
};
use deficiency_core::rational::pow;
use serde::Serialize;

use super::OBJECT_COLUMNS;
use crate::inputs::{self, verdict};
use crate::report::{self, exact, flag, write_atomic, RunReport, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Martingale,
    Supermartingale,
    Submartingale,
    Any,
}

impl Expect {
    fn accepts(self, kind: Kind) -> bool {
        match self {
            Expect::Any => true,
            Expect::Martingale => kind == Kind::Martingale,
            Expect::Supermartingale => matches!(kind, Kind::Martingale | Kind::Supermartingale),
            Expect::Submartingale => matches!(kind, Kind::Martingale | Kind::Submartingale),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateMartingale {
    /// Capital file with `stem value [hold]` lines.
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub measure: String,
    #[arg(long, value_enum, default_value = "supermartingale")]
    pub expect: Expect,
}

impl ValidateMartingale {
    pub fn run(&self, report: &mut RunReport) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let m = inputs::load(&self.tree, formats::parse_tree)?;
        let mut table = Table::new("slack", &OBJECT_COLUMNS);
        if let Some(c) = verdict(report, "capital function", tree_validate(&m, &mu))? {
            let pass = self.expect.accepts(c.kind);
            for (name, value, at) in [
                ("min_slack", &c.min_slack, &c.min_at),
                ("max_slack", &c.max_slack, &c.max_at),
            ] {
                let e = Enclosure::exact(value.clone());
                table.push(vec![
                    name.into(),
                    at.to_string(),
                    report::lo(&e),
                    report::hi(&e),
                    String::new(),
                    flag(pass),
                ]);
            }
            // A submartingale fails where slack is most positive, the others where it is most negative.
            let witness = if self.expect == Expect::Submartingale {
                &c.max_at
            } else {
                &c.min_at
            };
            report.check(
                &format!("kind is {:?}", self.expect).to_lowercase(),
                pass,
                Some(format!("stem {witness}")),
                format!("classified {:?} over {} nodes", c.kind, c.nodes_checked),
            );
            report.note("kind", format!("{:?}", c.kind));
            report.note("nodes", c.nodes_checked);
        }
        report.table(table);
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Doob {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub measure: String,
    /// Lower crossing level α.
    #[arg(long)]
    pub alpha: String,
    /// Upper crossing level β > α.
    #[arg(long)]
    pub beta: String,
    /// Traversal depth; defaults to the tree's depth.
    #[arg(long)]
    pub depth: Option<usize>,
}

impl Doob {
    pub fn run(&self, report: &mut RunReport, out: &Path) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let m = inputs::load(&self.tree, formats::parse_tree)?;
        let (alpha, beta) = (
            inputs::rational(&self.alpha)?,
            inputs::rational(&self.beta)?,
        );
        let params =
            CrossingParams::new(alpha.clone(), beta.clone(), self.depth.unwrap_or(m.depth))?;
        let mut table = Table::new("upcrosses", &OBJECT_COLUMNS);
        let Some(crossing) = verdict(
            report,
            "input is a supermartingale",
            doob_crossing_build(&m, &params, &mu),
        )?
        else {
            report.table(table);
            return Ok(());
        };
        let kind = tree_validate(&crossing.tree, &mu)?.kind;
        report.check(
            "crossing capital is a supermartingale",
            matches!(kind, Kind::Martingale | Kind::Supermartingale),
            None,
            format!("classified {kind:?}"),
        );

        // The i-th upcross on a path multiplies the capital by more than β/α.
        let gain = &beta / &alpha;
        let mut failure = None;
        for (i, u) in crossing.upcrosses.iter().enumerate() {
            let on_path = crossing
                .upcrosses
                .iter()
                .filter(|v| v.exit.is_prefix_of(&u.exit))
                .count();
            let bound = pow(&gain, on_path as u32);
            let pass = u.exit_value >= bound;
            if !pass && failure.is_none() {
                failure = Some(format!("stem {}", u.exit));
            }
            let e = Enclosure::exact(u.exit_value.clone());
            table.push(vec![
                format!("upcross {}", i + 1),
                u.exit.to_string(),
                report::lo(&e),
                report::hi(&e),
                exact(&bound),
                flag(pass),
            ]);
        }
        report.check(
            "capital after m upcrosses >= (beta/alpha)^m",
            failure.is_none(),
            failure,
            format!("{} upcrosses", crossing.upcrosses.len()),
        );
        let file = write_atomic(
            out,
            "doob.capital",
            formats::render_tree(&crossing.tree).as_bytes(),
        )?;
        report.note(
            "capital_file",
            file.file_name()
                .and_then(|f| f.to_str())
                .unwrap_or_default(),
        );
        report.note("upcrosses", crossing.upcrosses.len());
        report.table(table);
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Fatou {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub measure: String,
    /// Window start n0.
    #[arg(long, default_value_t = 0)]
    pub from: usize,
    /// Window end; defaults to the tree's depth.
    #[arg(long)]
    pub to: Option<usize>,
}

impl Fatou {
    pub fn run(&self, report: &mut RunReport) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let m = inputs::load(&self.tree, formats::parse_tree)?;
        let window = (self.from, self.to.unwrap_or(m.depth));
        let mut table = Table::new("integral", &OBJECT_COLUMNS);
        if let Some(r) = verdict(
            report,
            "input is a supermartingale",
            fatou_estimate(&m, &mu, window),
        )? {
            let e = Enclosure::exact(r.integral.clone());
            let at = format!("{}..{}", window.0, window.1);
            table.push(vec![
                "min_n M".into(),
                at,
                report::lo(&e),
                report::hi(&e),
                exact(&r.bound),
                flag(r.pass),
            ]);
            report.check(
                "integral of the window minimum <= min_n E[M_n]",
                r.pass,
                Some(format!("window {}..{}", window.0, window.1)),
                format!("{} <= {}", exact(&r.integral), exact(&r.bound)),
            );
        }
        report.table(table);
        Ok(())
    }
}
