use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use deficiency_core::deficiency::{
    apriori_deficiencies, chain_report, deficiency_from_test, gacs_deficiency,
    markov_prefixfree_audit, mltest_validate, universal_mix, MLTest,
};
use deficiency_core::effective::{validate_continuous, validate_discrete};
use deficiency_core::enclosure::{DeficiencyValue, Enclosure};
use deficiency_core::formats;
use deficiency_core::measure::Measure;
use deficiency_core::rational::{format_rational, pow2};
use serde::Serialize;
use serde_json::json;

use super::OBJECT_COLUMNS;
use crate::inputs::{self, verdict, SemimeasureSource};
use crate::report::{self, exact, flag, RunReport, Table};

/// Checks a test's level masses; rows go to `table` under `object`.
fn audit_test(
    report: &mut RunReport,
    table: &mut Table,
    object: &str,
    test: &MLTest,
    mu: &Measure,
) -> Result<bool> {
    let Some(masses) = verdict(
        report,
        &format!("{object} is a Martin-Löf test"),
        mltest_validate(test, mu),
    )?
    else {
        return Ok(false);
    };
    let mut first_bad = None;
    for (i, mass) in masses.iter().enumerate() {
        let n = i + 1;
        let bound = pow2(-(n as i64));
        let pass = *mass <= bound;
        if !pass && first_bad.is_none() {
            first_bad = Some(n);
        }
        let e = Enclosure::exact(mass.clone());
        table.push(vec![
            object.into(),
            n.to_string(),
            report::lo(&e),
            report::hi(&e),
            exact(&bound),
            flag(pass),
        ]);
    }
    report.check(
        &format!("{object}: mu(U_n) <= 2^-n"),
        first_bad.is_none(),
        first_bad.map(|n| format!("level {n}")),
        format!("{} levels, nested", masses.len()),
    );
    Ok(first_bad.is_none())
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateTest {
    #[arg(long)]
    pub measure: String,
    /// Test file with `level stem` lines.
    #[arg(long)]
    pub test: PathBuf,
}

impl ValidateTest {
    pub fn run(&self, report: &mut RunReport) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let test = inputs::load(&self.test, formats::parse_test)?;
        let mut table = Table::new("levels", &OBJECT_COLUMNS);
        audit_test(report, &mut table, "U", &test, &mu)?;
        report.note("depth", test.depth());
        report.table(table);
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MixTests {
    #[arg(long)]
    pub measure: String,
    /// Test files V_1, V_2, ... in order; repeat the flag for each.
    #[arg(long = "test", required = true)]
    pub tests: Vec<PathBuf>,
}

impl MixTests {
    pub fn run(&self, report: &mut RunReport) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let tests = self
            .tests
            .iter()
            .map(|p| inputs::load(p, formats::parse_test))
            .collect::<Result<Vec<_>>>()?;
        let mut table = Table::new("levels", &OBJECT_COLUMNS);
        let Some(u) = verdict(
            report,
            "members are Martin-Löf tests",
            universal_mix(&tests, &mu),
        )?
        else {
            report.table(table);
            return Ok(());
        };
        audit_test(report, &mut table, "U", &u, &mu)?;

        // x ∈ V_{j,n+j} puts x in U_n, so d_U(x) ≥ d_{V_j}(x) - j.
        let mut pairs = 0usize;
        let mut failure = None;
        for (i, v) in tests.iter().enumerate() {
            let j = i + 1;
            for x in v.levels().iter().flat_map(|l| l.iter()) {
                pairs += 1;
                let (du, dv) = (deficiency_from_test(&u, x), deficiency_from_test(v, x));
                if du + j < dv && failure.is_none() {
                    failure = Some(format!("test {j}, stem {x}: d_U = {du}, d_V = {dv}"));
                }
            }
        }
        report.check(
            "d_U >= d_Vj - j",
            failure.is_none(),
            failure,
            format!("{pairs} (j, stem) pairs from {} tests", tests.len()),
        );
        report.note("depth", u.depth());
        report.note("pairs", pairs);
        report.table(table);
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Gacs {
    /// Discrete semimeasure file with `stem p/q` lines.
    #[arg(long)]
    pub semimeasure: PathBuf,
    #[arg(long)]
    pub measure: String,
    /// Strings to evaluate; repeat the flag for each.
    #[arg(long = "x", required = true)]
    pub xs: Vec<String>,
}

impl Gacs {
    pub fn run(&self, report: &mut RunReport, bits: u32) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let m = inputs::load(&self.semimeasure, formats::parse_discrete)?;
        let mut table = Table::new("deficiencies", &OBJECT_COLUMNS);
        if let Some(total) = verdict(report, "discrete semimeasure", validate_discrete(&m))? {
            report.check(
                "discrete semimeasure",
                true,
                None,
                format!("total mass {}", format_rational(&total)),
            );
        }
        let mut values = Vec::new();
        for arg in &self.xs {
            let x = inputs::stem(arg)?;
            let v =
                gacs_deficiency(&m, &mu, &x, bits).with_context(|| format!("deficiency of {x}"))?;
            // The sup over prefixes never exceeds the sum.
            let pass = v.sup_form.certainly_le(&v.sum_form);
            let (l, h) = report::deficiency_bounds(&v.sup_form);
            let (_, bound) = report::deficiency_bounds(&v.sum_form);
            table.push(vec![
                x.to_string(),
                v.argmax.to_string(),
                l,
                h,
                bound,
                flag(pass),
            ]);
            report.check(
                &format!("sup form <= sum form at {x}"),
                pass,
                Some(format!("stem {x}")),
                "",
            );
            values.push(json!({"x": x.to_string(), "sup": report::deficiency(&v.sup_form), "sum": report::deficiency(&v.sum_form), "argmax": v.argmax}));
        }
        report.note("values", values);
        report.table(table);
        Ok(())
    }
}

fn window(path_len: usize, from: usize, to: Option<usize>) -> (usize, usize) {
    (from, to.unwrap_or(path_len))
}

#[derive(Debug, Args, Serialize)]
pub struct Apriori {
    #[command(flatten)]
    pub source: SemimeasureSource,
    #[arg(long)]
    pub measure: String,
    /// Path x whose prefixes are examined.
    #[arg(long)]
    pub path: String,
    /// Start n0 of the tail window.
    #[arg(long, default_value_t = 0)]
    pub from: usize,
    /// End of the window; defaults to the path length.
    #[arg(long)]
    pub to: Option<usize>,
}

fn order_check(
    report: &mut RunReport,
    liminf: &DeficiencyValue,
    limsup: &DeficiencyValue,
    d_a: &DeficiencyValue,
) -> bool {
    let pass = liminf.certainly_le(limsup) && limsup.certainly_le(d_a);
    report.check(
        "liminf <= limsup <= d_A",
        pass,
        None,
        "checked at enclosure endpoints",
    );
    pass
}

impl Apriori {
    pub fn run(&self, report: &mut RunReport, bits: u32) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let a = self.source.load()?;
        let path = inputs::stem(&self.path)?;
        let mut table = Table::new("deficiencies", &OBJECT_COLUMNS);
        if verdict(report, "continuous semimeasure", validate_continuous(&a))?.is_some() {
            report.check(
                "continuous semimeasure",
                true,
                None,
                "a(root) <= 1 and a(x) >= a(x0) + a(x1)",
            );
        }
        let w = window(path.len(), self.from, self.to);
        let r = apriori_deficiencies(&a, &mu, &path, w, bits)?;
        let pass = order_check(report, &r.liminf, &r.limsup, &r.d_a);
        for (name, v, at) in [
            ("d_A", &r.d_a, r.argmax.to_string()),
            ("limsup", &r.limsup, format!("{}..{}", w.0, w.1)),
            ("liminf", &r.liminf, format!("{}..{}", w.0, w.1)),
        ] {
            let (l, h) = report::deficiency_bounds(v);
            table.push(vec![name.into(), at, l, h, String::new(), flag(pass)]);
        }
        report.note("d_A", report::deficiency(&r.d_a));
        report.note("limsup", report::deficiency(&r.limsup));
        report.note("liminf", report::deficiency(&r.liminf));
        report.table(table);
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MarkovAudit {
    #[command(flatten)]
    pub source: SemimeasureSource,
    #[arg(long)]
    pub measure: String,
    /// Exponents c to audit, comma separated.
    #[arg(
        short = 'c',
        long = "c",
        value_delimiter = ',',
        default_value = "1,2,3,4,5,6,7,8"
    )]
    pub exponents: Vec<u32>,
}

impl MarkovAudit {
    pub fn run(&self, report: &mut RunReport) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let a = self.source.load()?;
        let mut table = Table::new("thresholds", &OBJECT_COLUMNS);
        for &c in &self.exponents {
            let r = markov_prefixfree_audit(&a, &mu, c)?;
            let bound = pow2(-(c as i64));
            let e = Enclosure::exact(r.mu_mass.clone());
            table.push(vec![
                format!("c={c}"),
                r.stems.len().to_string(),
                report::lo(&e),
                report::hi(&e),
                exact(&bound),
                flag(r.pass && r.prefix_free),
            ]);
            report.check(
                &format!("mu(S_{c}) <= 2^-{c}, S prefix-free"),
                r.pass && r.prefix_free,
                Some(format!("c = {c}")),
                format!(
                    "{} stems, mu(S) = {}, a(S) = {}",
                    r.stems.len(),
                    exact(&r.mu_mass),
                    exact(&r.a_mass)
                ),
            );
        }
        report.table(table);
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ChainReport {
    /// Discrete semimeasure m for the expectation-bounded deficiency.
    #[arg(long)]
    pub discrete: PathBuf,
    #[command(flatten)]
    pub source: SemimeasureSource,
    /// Martin-Löf test for the probability-bounded deficiency; empty if absent.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub measure: String,
    #[arg(long)]
    pub path: String,
    /// Depth of the a priori evaluation; defaults to the path length.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub from: usize,
    #[arg(long)]
    pub to: Option<usize>,
}

impl ChainReport {
    pub fn run(&self, report: &mut RunReport, bits: u32) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let m = inputs::load(&self.discrete, formats::parse_discrete)?;
        let a = self.source.load()?;
        let test = match &self.test {
            Some(p) => inputs::load(p, formats::parse_test)?,
            None => MLTest::empty(),
        };
        let path = inputs::stem(&self.path)?;
        let depth = self.depth.unwrap_or(path.len());
        let w = window(path.len(), self.from, self.to);
        let r = chain_report(&m, &a, &test, &mu, &path, depth, w, bits)?;
        report.check(
            "liminf <= limsup <= d_A",
            r.order_holds,
            None,
            "checked at enclosure endpoints",
        );
        let mut table = Table::new("deficiencies", &OBJECT_COLUMNS);
        for (name, v) in r.entries() {
            let (l, h) = report::deficiency_bounds(&v);
            table.push(vec![
                name.into(),
                path.to_string(),
                l,
                h,
                String::new(),
                flag(r.order_holds),
            ]);
        }
        let differences: Vec<_> = r
            .differences
            .iter()
            .map(|(a, b, d)| json!({"left": a, "right": b, "difference": d.as_ref().map(report::deficiency)}))
            .collect();
        report.note("differences", differences);
        report.table(table);
        Ok(())
    }
}
