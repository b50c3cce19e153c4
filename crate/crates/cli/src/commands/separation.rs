use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use deficiency_core::enclosure::Enclosure;
use deficiency_core::formats;
use deficiency_core::measure::Measure;
use deficiency_core::rational::Rational;
use deficiency_core::separation::{
    dk_construct, g_build_general, g_uniform_case, heavy_branch_run, heavy_integral_harness,
    order_by_measure, ratio_checks, sampled, series_divergence_audit, window_checks, witness_audit,
    DivergenceTrend, HeavyBranchTrace, LevelCheck, RarefiedFamily, SeriesSource,
};
use serde::Serialize;
use serde_json::json;

use super::{OBJECT_COLUMNS, SERIES_COLUMNS};
use crate::inputs::{self, verdict, SemimeasureSource};
use crate::report::{self, exact, flag, write_atomic, RunReport, Table};

fn series_row(
    k: usize,
    c: &Rational,
    b: Option<&Rational>,
    term: Option<&Enclosure>,
    partial: Option<&Enclosure>,
    pass: bool,
) -> Vec<String> {
    let cell = |e: Option<&Enclosure>, f: fn(&Enclosure) -> String| e.map(f).unwrap_or_default();
    vec![
        k.to_string(),
        exact(c),
        b.map(exact).unwrap_or_default(),
        cell(term, report::lo),
        cell(term, report::hi),
        cell(partial, report::lo),
        cell(partial, report::hi),
        flag(pass),
    ]
}

fn trend_check(report: &mut RunReport, t: &DivergenceTrend) {
    let margin = t
        .last_margin()
        .map(|m| format!(", last margin [{}, {}]", report::lo(m), report::hi(m)))
        .unwrap_or_default();
    report.check(
        &format!("{} keeps growing", t.name),
        t.pass,
        t.stall.map(|k| format!("k = {k}")),
        format!("{} checkpoints{margin}", t.checkpoints.len()),
    );
}

fn trace_checks(report: &mut RunReport, trace: &HeavyBranchTrace) {
    let v = trace.verify();
    let witness = |k: Option<usize>| k.map(|k| format!("k = {k}"));
    report.check(
        "step bound muB_{k-1} < 3 muB_k",
        v.step_bound_failure.is_none(),
        witness(v.step_bound_failure),
        "",
    );
    report.check(
        "split muB_{k-1} = muB_k + muC_k",
        v.split_failure.is_none(),
        witness(v.split_failure),
        "",
    );
    report.check(
        "tail identity",
        v.tail_failure.is_none(),
        witness(v.tail_failure),
        "",
    );
}

fn atom_threshold(arg: &Option<String>) -> Result<Option<Rational>> {
    arg.as_deref().map(inputs::rational).transpose()
}

#[derive(Debug, Args, Serialize)]
pub struct HeavyBranch {
    #[arg(long)]
    pub measure: String,
    #[arg(long)]
    pub depth: usize,
    /// Flag an atom when the branch mass stays above this value.
    #[arg(long = "atom-threshold")]
    pub atom_threshold: Option<String>,
    /// Tabulate every k instead of a sample.
    #[arg(long = "all-rows")]
    pub all_rows: bool,
}

impl HeavyBranch {
    pub fn run(&self, report: &mut RunReport) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let threshold = atom_threshold(&self.atom_threshold)?;
        let mut table = Table::new("trace", &SERIES_COLUMNS);
        let Some(trace) = verdict(
            report,
            "measure is non-atomic",
            heavy_branch_run(&mu, self.depth, threshold.as_ref()),
        )?
        else {
            report.table(table);
            return Ok(());
        };
        trace_checks(report, &trace);
        for k in (1..=trace.depth()).filter(|&k| self.all_rows || sampled(k, self.depth / 2)) {
            let pass = trace.b(k - 1) < &(trace.b(k) * Rational::from_integer(3.into()));
            table.push(series_row(
                k,
                trace.c(k),
                Some(trace.b(k)),
                None,
                None,
                pass,
            ));
        }
        let shown: String = trace
            .output
            .bits()
            .iter()
            .take(64)
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        report.note("output_prefix", shown);
        report.note("ties", trace.ties.iter().filter(|&&t| t).count());
        report.note("final_mass", exact(trace.b(trace.depth())));
        report.table(table);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Geometric,
    HarmonicTail,
    Custom,
}

#[derive(Debug, Args, Serialize)]
pub struct SeriesAudit {
    #[arg(long, value_enum)]
    pub preset: Preset,
    /// Series file with `c R` lines, for the custom preset.
    pub file: Option<PathBuf>,
    /// Ratio r of the geometric preset, c_k = (1-r) r^{k-1}.
    #[arg(long, default_value = "1/2")]
    pub ratio: String,
    /// K; the audit runs 2K terms.
    #[arg(long)]
    pub terms: usize,
}

impl SeriesAudit {
    fn source(&self) -> Result<SeriesSource> {
        match (self.preset, &self.file) {
            (Preset::Geometric, None) => Ok(SeriesSource::Geometric {
                ratio: inputs::rational(&self.ratio)?,
            }),
            (Preset::HarmonicTail, None) => Ok(SeriesSource::HarmonicTail),
            (Preset::Custom, Some(path)) => inputs::load(path, formats::parse_series),
            (Preset::Custom, None) => bail!("the custom preset needs a series file"),
            (_, Some(_)) => bail!("only the custom preset reads a series file"),
        }
    }

    pub fn run(&self, report: &mut RunReport, bits: u32) -> Result<()> {
        let source = self.source()?;
        let mut table = Table::new("series", &SERIES_COLUMNS);
        let Some(r) = verdict(
            report,
            "series is well formed",
            series_divergence_audit(&source, self.terms, bits),
        )?
        else {
            report.table(table);
            return Ok(());
        };
        for row in &r.rows {
            table.push(series_row(
                row.k,
                &row.c,
                Some(&row.r),
                Some(&row.term),
                Some(&row.partial),
                row.term.certainly_positive(),
            ));
        }
        report.check(
            "R_{k-1} = R_k + c_k",
            r.tail_failure.is_none(),
            r.tail_failure.map(|k| format!("k = {k}")),
            "",
        );
        for i in &r.identities {
            report.check(
                &format!("identities at k = {}", i.k),
                i.pass(),
                Some(format!("k = {}", i.k)),
                format!(
                    "product={} log-sum={} b-product={}",
                    i.product, i.log, i.b_product
                ),
            );
        }
        for t in r.trends() {
            trend_check(report, t);
        }
        report.note("label", r.label.clone());
        report.note(
            "trends",
            r.trends()
                .iter()
                .map(|t| report::trend(t))
                .collect::<Vec<_>>(),
        );
        report.table(table);
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct HeavyDivergence {
    #[arg(long)]
    pub measure: String,
    /// K; the trace runs to depth 2K + 1.
    #[arg(long)]
    pub terms: usize,
    #[arg(long = "atom-threshold")]
    pub atom_threshold: Option<String>,
}

impl HeavyDivergence {
    pub fn run(&self, report: &mut RunReport, bits: u32) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let threshold = atom_threshold(&self.atom_threshold)?;
        let mut table = Table::new("partials", &SERIES_COLUMNS);
        let trace = heavy_branch_run(&mu, 2 * self.terms + 1, threshold.as_ref());
        let Some(trace) = verdict(report, "measure is non-atomic", trace)? else {
            report.table(table);
            return Ok(());
        };
        trace_checks(report, &trace);
        let r = heavy_integral_harness(&trace, &mu, self.terms, bits)?;
        for row in &r.rows {
            let pass = row.term.certainly_positive();
            table.push(series_row(
                row.k,
                &row.mass_c,
                Some(&row.mass_b),
                Some(&row.term),
                Some(&row.partial),
                pass,
            ));
        }
        trend_check(report, &r.trend);
        let bad_cell = r
            .cells
            .iter()
            .find(|c| !c.pass)
            .map(|c| format!("k = {}", c.k));
        report.check(
            "t_f = 1/muB_k on C_{k+1}",
            bad_cell.is_none(),
            bad_cell,
            format!("{} cells", r.cells.len()),
        );
        report.note("partial_at_K", report::pair(r.partial_at_k()));
        report.note("trend", report::trend(&r.trend));
        report.note("dropped", r.dropped.clone());
        report.table(table);
        Ok(())
    }
}

fn family_checks(report: &mut RunReport, family: &RarefiedFamily) -> Result<()> {
    let windows = window_checks(family);
    let bad = windows
        .iter()
        .find(|w| !(w.upper && w.lower))
        .map(|w| format!("cell {}", w.index));
    report.check(
        "(1/3) muC^S < muD < muC^S",
        bad.is_none(),
        bad,
        format!("{} windows", windows.len()),
    );
    let ratios = ratio_checks(family)?;
    let bad = ratios
        .iter()
        .find(|r| !r.pass)
        .map(|r| format!("rank {}", r.rank));
    report.check(
        "muC_j^S_j / muC_{j+1}^S_{j+1} >= 8",
        bad.is_none(),
        bad,
        format!("{} ratios", ratios.len()),
    );
    Ok(())
}

fn family_measure(family: &RarefiedFamily, arg: &Option<String>) -> Result<Measure> {
    match (arg, &family.measure) {
        (Some(m), _) => inputs::measure(m),
        (None, Some(spec)) => Measure::from_spec(spec).context("the family's recorded measure"),
        (None, None) => bail!("the family records no measure; pass --measure"),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ConstructDk {
    #[arg(long)]
    pub measure: String,
    /// Number K of heavy-branch cells to process.
    #[arg(long)]
    pub count: usize,
    /// Largest extension depth explored for a single D_k.
    #[arg(long, default_value_t = 1 << 20)]
    pub budget: usize,
}

impl ConstructDk {
    pub fn run(&self, report: &mut RunReport, bits: u32, out: &Path) -> Result<()> {
        let mu = inputs::measure(&self.measure)?;
        let mut table = Table::new(
            "family",
            &[
                &SERIES_COLUMNS[..],
                &["index", "stem_D", "mu_D", "S_lo", "S_hi"],
            ]
            .concat(),
        );
        let Some(trace) = verdict(
            report,
            "measure is non-atomic",
            heavy_branch_run(&mu, self.count, None),
        )?
        else {
            report.table(table);
            return Ok(());
        };
        let mut family = order_by_measure(&trace, &mu, bits)?;
        if verdict(
            report,
            "D_k within the depth budget",
            dk_construct(&mut family, &mu, self.budget),
        )?
        .is_none()
        {
            report.table(table);
            return Ok(());
        }
        family_checks(report, &family)?;
        let windows = window_checks(&family);
        for j in 1..=family.len() {
            let cell = family.ranked(j);
            let d = cell.d.as_ref().context("constructed family lacks a D_k")?;
            let s = family.s_of(cell);
            let ok = windows
                .iter()
                .any(|w| w.index == cell.index && w.upper && w.lower);
            let mut row = series_row(j, &cell.mass, Some(trace.b(cell.index)), None, None, ok);
            row.extend([
                cell.index.to_string(),
                d.stem.to_string(),
                exact(&d.mass),
                report::lo(s),
                report::hi(s),
            ]);
            table.push(row);
        }
        let file = write_atomic(
            out,
            "family.json",
            formats::render_family(&family)?.as_bytes(),
        )?;
        report.note(
            "family_file",
            file.file_name()
                .and_then(|f| f.to_str())
                .unwrap_or_default(),
        );
        report.note("cells", family.len());
        report.note("dropped", family.dropped.clone());
        report.note("s_growth", report::trend(&family.s_growth()));
        report.table(table);
        Ok(())
    }
}

fn level_table(levels: &[LevelCheck]) -> Table {
    let mut table = Table::new("levels", &OBJECT_COLUMNS);
    for l in levels {
        let e = Enclosure::exact(l.mass_above.clone());
        table.push(vec![
            "g".into(),
            exact(&l.c),
            report::lo(&e),
            report::hi(&e),
            exact(&l.c.recip()),
            flag(l.pass),
        ]);
    }
    table
}

fn level_checks(report: &mut RunReport, levels: &[LevelCheck], left_limit: &Option<Rational>) {
    let bad = levels
        .iter()
        .find(|l| !l.pass)
        .map(|l| format!("c = {}", exact(&l.c)));
    report.check(
        "mu{g > c} <= 1/c on the grid",
        bad.is_none(),
        bad,
        format!("{} grid points", levels.len()),
    );
    report.check(
        "mu{g > c} <= 1/c just below each value",
        left_limit.is_none(),
        left_limit
            .as_ref()
            .map(|c| format!("c just below {}", exact(c))),
        "",
    );
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyG {
    /// Closed-form case g = 2^{2k-1} on 0^k 1^k under the uniform measure.
    #[arg(long = "uniform-case", requires = "kmax", conflicts_with = "family")]
    pub uniform_case: bool,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Family file written by construct-dk.
    #[arg(long, required_unless_present = "uniform_case")]
    pub family: Option<PathBuf>,
    /// Overrides the measure recorded in the family file.
    #[arg(long)]
    pub measure: Option<String>,
    /// K for the divergence trend of the uniform case.
    #[arg(long = "series-terms", default_value_t = 1024)]
    pub series_terms: usize,
}

impl VerifyG {
    pub fn run(&self, report: &mut RunReport, bits: u32) -> Result<()> {
        if self.uniform_case {
            let k_max = self.kmax.context("--uniform-case needs --kmax")?;
            let r = g_uniform_case(k_max, self.series_terms, bits)?;
            level_checks(report, &r.levels, &r.left_limit_violation);
            trend_check(report, &r.series);
            report.note("series", report::trend(&r.series));
            report.table(level_table(&r.levels));
            return Ok(());
        }
        let path = self.family.as_ref().context("--family is required")?;
        let family = inputs::load(path, formats::parse_family)?;
        let mu = family_measure(&family, &self.measure)?;
        let r = g_build_general(&family, &mu)?;
        level_checks(report, &r.levels, &r.left_limit_violation);
        report.check(
            "each muC_k dominates the smaller ones",
            r.dominance_failure.is_none(),
            r.dominance_failure.map(|k| format!("rank {k}")),
            "",
        );
        report.check(
            "ordering by mass matches the ranking",
            r.pi_matches_tau,
            None,
            "",
        );
        report.check("D_k lies inside C_k", r.d_in_c, None, "");
        let bad = r
            .windows
            .iter()
            .find(|w| !(w.upper && w.lower))
            .map(|w| format!("cell {}", w.index));
        report.check("(1/3) muC^S < muD < muC^S", bad.is_none(), bad, "");
        let bad = r
            .ratios
            .iter()
            .find(|x| !x.pass)
            .map(|x| format!("rank {}", x.rank));
        report.check("muC_j^S_j / muC_{j+1}^S_{j+1} >= 8", bad.is_none(), bad, "");
        report.note("pieces", r.g.len());
        report.table(level_table(&r.levels));
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct WitnessAudit {
    #[arg(long)]
    pub family: PathBuf,
    #[command(flatten)]
    pub source: SemimeasureSource,
    /// Domination constant: a ≥ 2^-c g/log2 g is sought.
    #[arg(short = 'c', long = "c")]
    pub c: u32,
    /// How many bits below D_k a cover may reach.
    #[arg(long, default_value_t = 4)]
    pub extension: usize,
    #[arg(long)]
    pub measure: Option<String>,
}

impl WitnessAudit {
    pub fn run(&self, report: &mut RunReport) -> Result<()> {
        let family = inputs::load(&self.family, formats::parse_family)?;
        let mu = family_measure(&family, &self.measure)?;
        let a = self.source.load()?;
        let r = witness_audit(&family, &mu, &|x| a.get(x), a.depth, self.c, self.extension)?;
        let mut table = Table::new(
            "witnesses",
            &[&SERIES_COLUMNS[..], &["cover", "mass_bound", "covered"]].concat(),
        );
        for e in &r.entries {
            let cell = family.ranked(e.rank);
            let mut row = series_row(
                e.rank,
                &cell.mass,
                None,
                Some(&e.required),
                None,
                e.factor_ok,
            );
            let cover = e.cover.as_ref().map(|ws| {
                ws.iter()
                    .map(|w| w.stem.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            });
            row.extend([
                cover.unwrap_or_else(|| "none".into()),
                e.mass_bound.to_string(),
                e.cover.is_some().to_string(),
            ]);
            table.push(row);
        }
        report.check("covers are prefix-free", r.prefix_free, None, "");
        let bad = r
            .entries
            .iter()
            .find(|e| !e.factor_ok)
            .map(|e| format!("rank {}", e.rank));
        report.check(
            "S log2(1/muC) / log2(1/muD) within its window",
            bad.is_none(),
            bad,
            "",
        );
        let bad = r
            .entries
            .iter()
            .find(|e| e.cover.is_some() && !e.mass_bound)
            .map(|e| format!("rank {}", e.rank));
        report.check(
            "found covers carry a-mass >= 2^{-c-1}/log2(1/muD)",
            bad.is_none(),
            bad,
            "",
        );
        trend_check(report, &r.lower_bound);
        trend_check(report, &r.comparison);
        report.note("covered", r.covered());
        report.note("contradiction_sum", exact(&r.contradiction_sum));
        report.note("crossing", r.crossing);
        report.note("lower_bound", report::trend(&r.lower_bound));
        report.note("comparison", report::trend(&r.comparison));
        report.note("summary", json!({"entries": r.entries.len(), "c": r.c}));
        report.table(table);
        Ok(())
    }
}
