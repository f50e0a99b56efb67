//! Monte Carlo studies: simulate, fit under each threshold prior, score the
//! posterior against the generating values, and aggregate per cell.
//!
//! Every (cell, replication) pair owns one dataset, shared by all priors.
//! Dataset and sampler seeds are derived from the plan's base seed and the
//! task indices through SHA-256, so a cell reproduces on its own and the
//! results do not depend on how many workers run the study.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{coverage_flag, summarize, ParamSummary, RHAT_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{DatasetMatrix, ModelSpec, OrdinalFactorModel, ParamClass, ParamInfo};
use crate::priors::{PriorConfig, StructuralPriors, ThresholdPriorConfig};
use crate::sampler::{run_chains, PosteriorDraws, SamplerConfig};
use crate::simgen::{generate_dataset, PopulationParams, SimCondition};

/// A posterior fit of one dataset.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub params: Vec<ParamInfo>,
    pub draws: PosteriorDraws,
    pub summaries: Vec<ParamSummary>,
}

/// Builds the model, runs the chains and summarizes the reported parameters.
pub fn fit_dataset(
    spec: &ModelSpec,
    data: &DatasetMatrix,
    priors: &PriorConfig,
    sampler: &SamplerConfig,
) -> Result<FitOutput> {
    let resolved = priors.resolve(&spec.items)?;
    let model = OrdinalFactorModel::new(spec.clone(), data.clone(), resolved, priors.structural.clone())?;
    let params = model.params().to_vec();
    let names = params.iter().map(|p| p.name.clone()).collect();
    let draws = run_chains(&model, names, |x| model.constrain(x), sampler, None)?;
    let summaries = summarize(&draws);
    Ok(FitOutput { params, draws, summaries })
}

/// A named threshold prior compared in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub label: String,
    pub thresholds: ThresholdPriorConfig,
}

impl PriorSpec {
    pub fn new(thresholds: ThresholdPriorConfig) -> Self {
        Self { label: thresholds.label(), thresholds }
    }
}

/// Unit-α induced-Dirichlet, sequential SD 1.5 and sequential SD 10⁵.
pub fn standard_priors() -> Vec<PriorSpec> {
    vec![
        PriorSpec::new(ThresholdPriorConfig::joint()),
        PriorSpec::new(ThresholdPriorConfig::sequential_sd(1.5)),
        PriorSpec::new(ThresholdPriorConfig::sequential_sd(1e5)),
    ]
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPlan {
    pub cells: Vec<SimCondition>,
    #[serde(default = "standard_priors")]
    pub priors: Vec<PriorSpec>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; 0 uses one per available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub structural: StructuralPriors,
}

impl StudyPlan {
    pub fn new(cells: Vec<SimCondition>, replications: usize, base_seed: u64) -> Self {
        Self {
            cells,
            priors: standard_priors(),
            replications,
            base_seed,
            workers: 0,
            sampler: SamplerConfig::default(),
            structural: StructuralPriors::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("a study plan needs at least one cell".into()));
        }
        if self.priors.is_empty() {
            return Err(Error::Config("a study plan needs at least one prior".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.priors {
            if !seen.insert(&p.label) {
                return Err(Error::Config(format!("duplicate prior label `{}`", p.label)));
            }
        }
        for (i, c) in self.cells.iter().enumerate() {
            c.validate().map_err(|e| Error::Config(format!("cell {}: {e}", i + 1)))?;
        }
        self.structural.validate()?;
        self.sampler.validate()
    }
}

/// Seed for task `indices` under `base`: the first eight bytes of
/// SHA-256 over the little-endian encodings.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Parameter families as reported in study tables. The first threshold of
/// an item with an empty lowest category is kept apart: its generating value
/// is a placeholder, so it enters width and convergence summaries but not
/// coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordClass {
    Loading,
    FactorVariance,
    FactorCovariance,
    Threshold,
    EmptyThreshold,
}

impl RecordClass {
    pub const ALL: [RecordClass; 5] =
        [Self::Loading, Self::FactorVariance, Self::FactorCovariance, Self::Threshold, Self::EmptyThreshold];

    pub fn label(self) -> &'static str {
        match self {
            Self::Loading => "Loading",
            Self::FactorVariance => "Factor Variance",
            Self::FactorCovariance => "Factor Covariance",
            Self::Threshold => "Thresholds",
            Self::EmptyThreshold => "Empty Category 1st Threshold",
        }
    }

    fn of(info: &ParamInfo, pop: &PopulationParams) -> Self {
        match info.class {
            ParamClass::Loading => Self::Loading,
            ParamClass::FactorVariance => Self::FactorVariance,
            ParamClass::FactorCovariance => Self::FactorCovariance,
            ParamClass::Threshold => {
                let item = info.item.expect("thresholds carry an item");
                if pop.sparse[item] && info.position == Some(1) {
                    Self::EmptyThreshold
                } else {
                    Self::Threshold
                }
            }
        }
    }
}

/// One parameter of one fit, scored against its generating value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub cell: usize,
    pub replication: usize,
    pub prior: String,
    pub parameter: String,
    pub class: RecordClass,
    pub truth: f64,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    pub ci_width: f64,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
    /// `None` for parameters excluded from coverage.
    pub covered: Option<bool>,
}

/// Outcome of one (cell, replication, prior) task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub cell: usize,
    pub replication: usize,
    pub prior: String,
    pub data_seed: u64,
    pub sampler_seed: u64,
    pub completed: bool,
    pub divergences: usize,
    pub message: String,
}

/// Averages for one parameter class within a cell and prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub n_records: usize,
    /// Percent of covered intervals; `None` when the class is excluded.
    pub coverage: Option<f64>,
    pub avg_ci_width: f64,
    /// Mean over defined R̂ values.
    pub avg_rhat: Option<f64>,
    /// Percent of records with R̂ < 1.1; undefined R̂ counts as not converged.
    pub pct_rhat_below: f64,
    pub avg_ess: Option<f64>,
}

impl ClassStats {
    fn from_records<'a>(records: impl IntoIterator<Item = &'a ParamRecord>) -> Option<Self> {
        let records: Vec<&ParamRecord> = records.into_iter().collect();
        if records.is_empty() {
            return None;
        }
        let n = records.len() as f64;
        let scored: Vec<bool> = records.iter().filter_map(|r| r.covered).collect();
        let coverage =
            (!scored.is_empty()).then(|| 100.0 * scored.iter().filter(|&&c| c).count() as f64 / scored.len() as f64);
        let mean_of = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Some(Self {
            n_records: records.len(),
            coverage,
            avg_ci_width: records.iter().map(|r| r.ci_width).sum::<f64>() / n,
            avg_rhat: mean_of(records.iter().filter_map(|r| r.rhat).collect()),
            pct_rhat_below: 100.0 * records.iter().filter(|r| r.rhat.is_some_and(|v| v < RHAT_THRESHOLD)).count() as f64
                / n,
            avg_ess: mean_of(records.iter().filter_map(|r| r.ess).collect()),
        })
    }
}

/// Aggregates for one cell under one prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: usize,
    pub condition: SimCondition,
    pub prior: String,
    pub completed: usize,
    pub skipped: usize,
    pub classes: BTreeMap<RecordClass, ClassStats>,
    /// Convergence over every threshold, the empty-category ones included.
    pub all_thresholds: Option<ClassStats>,
}

impl CellResult {
    pub fn class(&self, c: RecordClass) -> Option<&ClassStats> {
        self.classes.get(&c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResults {
    pub plan: StudyPlan,
    pub fits: Vec<FitRecord>,
    pub records: Vec<ParamRecord>,
    pub cells: Vec<CellResult>,
}

impl StudyResults {
    pub fn cell(&self, cell: usize, prior: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell == cell && c.prior == prior)
    }
}

struct Task {
    cell: usize,
    replication: usize,
    prior: usize,
}

fn run_task(plan: &StudyPlan, t: &Task) -> (FitRecord, Vec<ParamRecord>) {
    let cond = &plan.cells[t.cell];
    let prior = &plan.priors[t.prior];
    let data_seed = derive_seed(plan.base_seed, &[t.cell as u64, t.replication as u64, 0]);
    let sampler_seed = derive_seed(plan.base_seed, &[t.cell as u64, t.replication as u64, 1 + t.prior as u64]);
    let mut record = FitRecord {
        cell: t.cell,
        replication: t.replication,
        prior: prior.label.clone(),
        data_seed,
        sampler_seed,
        completed: false,
        divergences: 0,
        message: String::new(),
    };
    let outcome = (|| -> Result<(PopulationParams, FitOutput)> {
        let pop = cond.population()?;
        let spec = pop.model_spec()?;
        let data = generate_dataset(&pop, cond.n_respondents, data_seed)?;
        let priors = PriorConfig {
            thresholds: prior.thresholds.clone(),
            item_thresholds: BTreeMap::new(),
            structural: plan.structural.clone(),
        };
        let sampler = SamplerConfig { seed: sampler_seed, ..plan.sampler.clone() };
        let fit = fit_dataset(&spec, &data, &priors, &sampler)?;
        Ok((pop, fit))
    })();
    match outcome {
        Ok((pop, fit)) => {
            record.completed = true;
            record.divergences = fit.draws.n_divergent();
            let truth = pop.truth();
            let params = fit
                .params
                .iter()
                .zip(&fit.summaries)
                .map(|(info, s)| {
                    let class = RecordClass::of(info, &pop);
                    let value = truth[&info.name];
                    ParamRecord {
                        cell: t.cell,
                        replication: t.replication,
                        prior: prior.label.clone(),
                        parameter: info.name.clone(),
                        class,
                        truth: value,
                        mean: s.mean,
                        q025: s.q025,
                        q975: s.q975,
                        ci_width: s.ci_width,
                        rhat: s.rhat,
                        ess: s.ess,
                        covered: (class != RecordClass::EmptyThreshold).then(|| coverage_flag(s, value)),
                    }
                })
                .collect();
            (record, params)
        }
        Err(e) => {
            record.message = e.to_string();
            (record, Vec::new())
        }
    }
}

/// Runs every (cell, replication, prior) task of `plan` and aggregates.
/// Failed fits are recorded and skipped.
pub fn run_study(plan: &StudyPlan) -> Result<StudyResults> {
    run_study_with(plan, &|_| {})
}

/// [`run_study`] with a callback invoked as each fit finishes.
pub fn run_study_with(plan: &StudyPlan, progress: &(dyn Fn(&FitRecord) + Sync)) -> Result<StudyResults> {
    plan.validate()?;
    let mut tasks = Vec::new();
    for cell in 0..plan.cells.len() {
        for replication in 0..plan.replications {
            for prior in 0..plan.priors.len() {
                tasks.push(Task { cell, replication, prior });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<(FitRecord, Vec<ParamRecord>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let out = run_task(plan, t);
                progress(&out.0);
                out
            })
            .collect()
    });
    let mut fits = Vec::with_capacity(outputs.len());
    let mut records = Vec::new();
    for (f, r) in outputs {
        fits.push(f);
        records.extend(r);
    }
    let cells = aggregate(plan, &fits, &records);
    Ok(StudyResults { plan: plan.clone(), fits, records, cells })
}

/// Per-cell, per-prior aggregates over completed replications.
pub fn aggregate(plan: &StudyPlan, fits: &[FitRecord], records: &[ParamRecord]) -> Vec<CellResult> {
    let mut out = Vec::new();
    for (ci, cond) in plan.cells.iter().enumerate() {
        for prior in &plan.priors {
            let mine = |r: &&ParamRecord| r.cell == ci && r.prior == prior.label;
            let completed = fits.iter().filter(|f| f.cell == ci && f.prior == prior.label && f.completed).count();
            let skipped = fits.iter().filter(|f| f.cell == ci && f.prior == prior.label && !f.completed).count();
            let classes = RecordClass::ALL
                .iter()
                .filter_map(|&c| ClassStats::from_records(records.iter().filter(mine).filter(|r| r.class == c)).map(|s| (c, s)))
                .collect();
            let all_thresholds = ClassStats::from_records(
                records
                    .iter()
                    .filter(mine)
                    .filter(|r| matches!(r.class, RecordClass::Threshold | RecordClass::EmptyThreshold)),
            );
            out.push(CellResult {
                cell: ci,
                condition: cond.clone(),
                prior: prior.label.clone(),
                completed,
                skipped,
                classes,
                all_thresholds,
            });
        }
    }
    out
}

/// Row label for a cell, e.g. `Sparse (2), C=4, N=150`.
pub fn condition_label(c: &SimCondition) -> String {
    let mut shape = c.shape.label().to_string();
    shape[..1].make_ascii_uppercase();
    format!("{shape} ({}), C={}, N={}", c.n_sparse_items, c.n_categories, c.n_respondents)
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "*".to_string(), |x| format!("{x:.decimals$}"))
}

fn render(rows: &[Vec<String>]) -> String {
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..n_cols).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let pad = widths[j] - s.chars().count();
                if j < 2 { format!("{s}{}", " ".repeat(pad)) } else { format!("{}{s}", " ".repeat(pad)) }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * n_cols.saturating_sub(1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

/// Threshold convergence per cell and prior: average R̂, percent below 1.1
/// and average ESS over every threshold.
pub fn convergence_table(results: &StudyResults) -> String {
    let mut rows = vec![vec![
        "Condition".to_string(),
        "Prior".into(),
        "Avg. R-hat".into(),
        "% R-hat<1.1".into(),
        "Avg. ESS".into(),
        "Completed".into(),
    ]];
    for (ci, cond) in results.plan.cells.iter().enumerate() {
        for (pi, prior) in results.plan.priors.iter().enumerate() {
            let Some(cell) = results.cell(ci, &prior.label) else { continue };
            let s = cell.all_thresholds.as_ref();
            rows.push(vec![
                if pi == 0 { condition_label(cond) } else { String::new() },
                prior.label.clone(),
                fmt_opt(s.and_then(|s| s.avg_rhat), 2),
                fmt_opt(s.map(|s| s.pct_rhat_below), 1),
                fmt_opt(s.and_then(|s| s.avg_ess), 1),
                format!("{}/{}", cell.completed, cell.completed + cell.skipped),
            ]);
        }
    }
    render(&rows)
}

/// Coverage (percent) and average CI width per parameter class, with one
/// column per prior. `group` gives the row label used to split a class.
fn class_table(results: &StudyResults, group_header: &str, group: impl Fn(&SimCondition) -> String) -> String {
    let priors: Vec<&str> = results.plan.priors.iter().map(|p| p.label.as_str()).collect();
    let mut out = String::new();
    for (title, coverage) in [("Coverage Rate (%)", true), ("Avg. CI Width", false)] {
        let mut header = vec!["Parameter".to_string(), group_header.to_string()];
        header.extend(priors.iter().map(|p| p.to_string()));
        let mut rows = vec![header];
        for class in RecordClass::ALL {
            let mut groups: Vec<String> = Vec::new();
            for c in &results.plan.cells {
                let g = group(c);
                if !groups.contains(&g) {
                    groups.push(g);
                }
            }
            let mut first = true;
            for g in groups {
                let cells: Vec<usize> = (0..results.plan.cells.len()).filter(|&i| group(&results.plan.cells[i]) == g).collect();
                let mut row = vec![if first { class.label().to_string() } else { String::new() }, g];
                let mut any = false;
                for p in &priors {
                    let recs = results.records.iter().filter(|r| cells.contains(&r.cell) && r.prior == *p && r.class == class);
                    let stats = ClassStats::from_records(recs);
                    any |= stats.is_some();
                    row.push(match (&stats, coverage) {
                        (None, _) => "-".into(),
                        (Some(s), true) => fmt_opt(s.coverage, 1),
                        (Some(s), false) => format!("{:.2}", s.avg_ci_width),
                    });
                }
                if any {
                    rows.push(row);
                    first = false;
                }
            }
        }
        let _ = writeln!(out, "{title}");
        out.push_str(&render(&rows));
        out.push('\n');
    }
    out
}

/// Coverage and CI width by parameter class and condition.
pub fn coverage_table(results: &StudyResults) -> String {
    class_table(results, "Condition", condition_label)
}

/// Coverage and CI width by parameter class and reference indicator.
pub fn reference_table(results: &StudyResults) -> String {
    class_table(results, "Reference Indicator", |c| c.reference_indicator.label().to_string())
}

/// All text tables for a study; the reference-indicator split appears only
/// when the plan varies it.
pub fn format_tables(results: &StudyResults) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Threshold convergence\n");
    out.push_str(&convergence_table(results));
    let _ = writeln!(out, "\nCoverage and interval width by condition\n");
    out.push_str(&coverage_table(results));
    let refs: std::collections::BTreeSet<_> =
        results.plan.cells.iter().filter(|c| c.n_sparse_items > 0).map(|c| c.reference_indicator).collect();
    if refs.len() > 1 {
        let _ = writeln!(out, "Coverage and interval width by reference indicator\n");
        out.push_str(&reference_table(results));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Algorithm;
    use crate::simgen::Shape;

    fn toy_plan() -> StudyPlan {
        let mut cond = SimCondition::new(Shape::Sparse, 3, 40, 2);
        cond.n_factors = 2;
        cond.items_per_factor = 2;
        let mut plan = StudyPlan::new(vec![cond], 1, 7);
        plan.priors = vec![PriorSpec::new(ThresholdPriorConfig::joint())];
        plan.sampler = SamplerConfig {
            n_chains: 2,
            iterations: 200,
            warmup: 100,
            algorithm: Algorithm::Nuts { max_depth: 6 },
            ..SamplerConfig::default()
        };
        plan
    }

    #[test]
    fn seeds_depend_on_every_index() {
        let a = derive_seed(1, &[0, 0, 0]);
        assert_eq!(a, derive_seed(1, &[0, 0, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0, 0]));
        assert_ne!(a, derive_seed(1, &[1, 0, 0]));
        assert_ne!(a, derive_seed(1, &[0, 1, 0]));
        assert_ne!(a, derive_seed(1, &[0, 0, 1]));
    }

    #[test]
    fn smoke_study() {
        let plan = toy_plan();
        let res = run_study(&plan).unwrap();
        assert_eq!(res.fits.len(), 1);
        assert!(res.fits[0].completed, "{}", res.fits[0].message);
        assert_eq!(res.cells.len(), 1);
        let cell = &res.cells[0];
        assert_eq!(cell.completed, 1);
        for class in RecordClass::ALL {
            let s = cell.class(class).unwrap_or_else(|| panic!("{class:?} missing"));
            assert!(s.avg_ci_width >= 0.0);
            assert!((0.0..=100.0).contains(&s.pct_rhat_below));
            if class == RecordClass::EmptyThreshold {
                assert!(s.coverage.is_none());
                assert_eq!(s.n_records, 2);
            } else {
                let c = s.coverage.unwrap();
                assert!((0.0..=100.0).contains(&c));
            }
        }
        // a single replication: aggregates equal that replication's values
        let loads: Vec<&ParamRecord> = res.records.iter().filter(|r| r.class == RecordClass::Loading).collect();
        let w = loads.iter().map(|r| r.ci_width).sum::<f64>() / loads.len() as f64;
        assert!((cell.class(RecordClass::Loading).unwrap().avg_ci_width - w).abs() < 1e-12);

        let tables = format_tables(&res);
        assert!(tables.contains("Sparse (2), C=3, N=40"));
        assert!(tables.contains("Empty Category 1st Threshold"));
    }

    #[test]
    fn study_is_reproducible_across_widths() {
        let mut plan = toy_plan();
        plan.workers = 1;
        let a = run_study(&plan).unwrap();
        plan.workers = 2;
        let b = run_study(&plan).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut plan = toy_plan();
        plan.sampler.max_init_attempts = 1;
        plan.sampler.init_radius = 1e6;
        let res = run_study(&plan).unwrap();
        assert!(!res.fits[0].completed);
        assert!(!res.fits[0].message.is_empty());
        assert_eq!(res.cells[0].skipped, 1);
        assert_eq!(res.cells[0].completed, 0);
        assert!(res.cells[0].classes.is_empty());
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let mut plan = toy_plan();
        plan.replications = 0;
        assert!(plan.validate().is_err());
        let mut plan = toy_plan();
        plan.priors.clear();
        assert!(plan.validate().is_err());
        let mut plan = toy_plan();
        plan.priors.push(plan.priors[0].clone());
        assert!(plan.validate().is_err());
    }

    #[test]
    fn reference_split_table() {
        let mut plan = toy_plan();
        let mut other = plan.cells[0].clone();
        other.reference_indicator = crate::simgen::ReferenceIndicator::NonSparse;
        plan.cells.push(other);
        plan.sampler.iterations = 60;
        plan.sampler.warmup = 30;
        let res = run_study(&plan).unwrap();
        let t = format_tables(&res);
        assert!(t.contains("Reference Indicator"));
        assert!(t.contains("non-sparse"));
    }

    #[test]
    fn plan_parses_from_toml() {
        let text = r#"
            replications = 3
            base_seed = 11
            [sampler]
            iterations = 400
            warmup = 200
            [[cells]]
            shape = "sparse"
            n_categories = 4
            n_respondents = 150
            n_sparse_items = 2
            [[priors]]
            label = "joint"
            thresholds = { family = "induced-dirichlet" }
            [[priors]]
            label = "small"
            thresholds = { family = "sequential", dispersion = 1.5 }
        "#;
        let plan: StudyPlan = toml::from_str(text).unwrap();
        plan.validate().unwrap();
        assert_eq!(plan.priors.len(), 2);
        assert_eq!(plan.sampler.iterations, 400);
        let back: StudyPlan = toml::from_str(&toml::to_string(&plan).unwrap()).unwrap();
        assert_eq!(back, plan);
    }
}
