//! Configuration files, dataset ingestion and result persistence.
//!
//! Configs are TOML. Every CSV written here starts with one `#` comment line
//! recording the crate version, the seed and the SHA-256 of the config that
//! produced it; [`read_dataset`] skips `#` lines, so written datasets read
//! back unchanged.
//!
//! A run config has this shape (paths are relative to the config file):
//!
//! ```toml
//! data = "responses.csv"      # or one [[groups]] table per group
//! output = "fit-out"
//! seed = 42                   # optional, overrides sampler.seed
//!
//! [model]
//! n_factors = 2
//! identification = { scale = "reference-loading", residual_variance = 1.0 }
//! [[model.items]]
//! item_id = "item_1"
//! factor_indices = [0]        # zero-based
//! n_categories = 4
//! is_reference = true
//!
//! [priors]
//! thresholds = { family = "induced-dirichlet", alpha = 1.0 }
//! [priors.item_thresholds]
//! item_2 = { family = "sequential", dispersion = 1.5 }
//!
//! [sampler]
//! n_chains = 4
//! iterations = 2000
//! warmup = 1000
//! algorithm = { kind = "nuts", max_depth = 10 }
//! ```

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, Trim, WriterBuilder};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::ParamSummary;
use crate::error::{Error, Result};
use crate::harness::{PriorSpec, StudyResults};
use crate::model::{DatasetMatrix, ModelSpec};
use crate::priors::PriorConfig;
use crate::sampler::{chain_rng, PosteriorDraws, SamplerConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Origin of an output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(config_bytes: &[u8], seed: u64) -> Self {
        Self { version: VERSION.to_string(), seed, config_sha256: sha256_hex(config_bytes) }
    }

    /// The comment line placed at the top of every CSV.
    pub fn line(&self) -> String {
        format!("# ordfactor {} seed={} config_sha256={}", self.version, self.seed, self.config_sha256)
    }
}

/// One group of a multi-group run, fitted independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    pub data: PathBuf,
    /// Replaces the run's prior section for this group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<PriorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupConfig>,
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub model: ModelSpec,
    pub priors: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

/// A dataset to fit: its label, path and prior section.
#[derive(Debug, Clone, PartialEq)]
pub struct FitJob {
    pub group: Option<String>,
    pub data: PathBuf,
    pub priors: PriorConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates a config file, resolving relative paths
    /// against its directory. Returns the config with the raw bytes, which
    /// feed the provenance hash.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::Config(format!("{}: not UTF-8: {e}", path.display())))?;
        let mut cfg = Self::from_toml(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = cfg.data.as_mut() {
            resolve(d);
        }
        for g in &mut cfg.groups {
            resolve(&mut g.data);
        }
        resolve(&mut cfg.output);
        Ok((cfg, bytes))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        match (&self.data, self.groups.is_empty()) {
            (Some(_), false) => return Err(Error::Config("give either `data` or `[[groups]]`, not both".into())),
            (None, true) => return Err(Error::Config("no `data` path and no `[[groups]]`".into())),
            _ => {}
        }
        let mut names = std::collections::BTreeSet::new();
        for g in &self.groups {
            if g.name.is_empty() || !names.insert(g.name.as_str()) {
                return Err(Error::Config(format!("group names must be unique and non-empty (`{}`)", g.name)));
            }
            if let Some(p) = &g.priors {
                p.resolve(&self.model.items)?;
            }
        }
        self.priors.resolve(&self.model.items)?;
        self.sampler().validate()
    }

    /// Sampler settings with the top-level seed applied.
    pub fn sampler(&self) -> SamplerConfig {
        let mut s = self.sampler.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    pub fn jobs(&self) -> Vec<FitJob> {
        match &self.data {
            Some(d) => vec![FitJob { group: None, data: d.clone(), priors: self.priors.clone() }],
            None => self
                .groups
                .iter()
                .map(|g| FitJob {
                    group: Some(g.name.clone()),
                    data: g.data.clone(),
                    priors: g.priors.clone().unwrap_or_else(|| self.priors.clone()),
                })
                .collect(),
        }
    }
}

/// Reads and parses a TOML file, returning the raw bytes alongside.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::Config(format!("{}: not UTF-8: {e}", path.display())))?;
    let value = toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((value, bytes))
}

/// Threshold priors whose realized distributions are sampled side by side.
///
/// ```toml
/// n_categories = 4
/// seed = 7
/// [[priors]]
/// label = "joint"
/// thresholds = { family = "induced-dirichlet", alpha = [10, 50, 50, 10] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorPredictConfig {
    pub n_categories: usize,
    #[serde(default)]
    pub seed: u64,
    pub priors: Vec<PriorSpec>,
}

impl PriorPredictConfig {
    /// `n` threshold draws per prior, labelled, in prior order.
    pub fn sample(&self, n: usize) -> Result<Vec<(String, Vec<f64>)>> {
        if self.priors.is_empty() {
            return Err(Error::Config("no [[priors]] given".into()));
        }
        if self.n_categories < 2 {
            return Err(Error::Config("n_categories must be at least 2".into()));
        }
        let mut rows = Vec::with_capacity(n * self.priors.len());
        for (i, spec) in self.priors.iter().enumerate() {
            let prior = spec
                .thresholds
                .resolve(self.n_categories)
                .map_err(|e| Error::Config(format!("prior `{}`: {e}", spec.label)))?;
            let mut rng = chain_rng(self.seed, i);
            for _ in 0..n {
                rows.push((spec.label.clone(), prior.sample(&mut rng)?));
            }
        }
        Ok(rows)
    }
}

/// Target threshold moments for the informative sequential prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentTargets {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Loads a dataset whose header names the model's items. Codes must lie in
/// `1..=C` for the declared category count; lines starting with `#` are
/// skipped. Errors cite the data row (1-based, header excluded) and column.
pub fn read_dataset(path: &Path, spec: &ModelSpec) -> Result<DatasetMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = ReaderBuilder::new().comment(Some(b'#')).trim(Trim::All).from_reader(file);
    let data_err = |row: usize, column: &str, message: String| Error::Data {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };
    let headers = rdr.headers().map_err(|e| data_err(0, "", format!("unreadable header: {e}")))?.clone();
    for h in headers.iter() {
        if !spec.items.iter().any(|i| i.item_id == h) {
            return Err(data_err(0, h, "column is not an item of the model".into()));
        }
    }
    let columns: Vec<usize> = spec
        .items
        .iter()
        .map(|item| {
            headers
                .iter()
                .position(|h| h == item.item_id)
                .ok_or_else(|| data_err(0, &item.item_id, "item missing from header".into()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| data_err(row, "", e.to_string()))?;
        let codes = spec
            .items
            .iter()
            .zip(&columns)
            .map(|(item, &j)| {
                let cell = rec.get(j).unwrap_or("");
                let code: u16 =
                    cell.parse().map_err(|_| data_err(row, &item.item_id, format!("`{cell}` is not an integer code")))?;
                if code == 0 || code as usize > item.n_categories {
                    return Err(data_err(
                        row,
                        &item.item_id,
                        format!("code {code} outside 1..={}", item.n_categories),
                    ));
                }
                Ok(code)
            })
            .collect::<Result<Vec<u16>>>()?;
        rows.push(codes);
    }
    if rows.is_empty() {
        return Err(data_err(0, "", "no data rows".into()));
    }
    DatasetMatrix::new(rows, &spec.n_categories())
}

/// Per-item counts for every declared category, unobserved ones included.
pub fn category_table(spec: &ModelSpec, data: &DatasetMatrix) -> String {
    let max_c = spec.items.iter().map(|i| i.n_categories).max().unwrap_or(0);
    let width = spec.items.iter().map(|i| i.item_id.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:width$}", "item");
    for c in 1..=max_c {
        let _ = write!(out, " {:>6}", format!("cat{c}"));
    }
    out.push('\n');
    for (item, counts) in spec.items.iter().zip(data.category_counts()) {
        let _ = write!(out, "{:width$}", item.item_id);
        for c in 0..max_c {
            match counts.get(c) {
                Some(n) => {
                    let _ = write!(out, " {n:>6}");
                }
                None => {
                    let _ = write!(out, " {:>6}", "");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path, prov: &Provenance) -> Result<csv::Writer<File>> {
    let mut f = create(path)?;
    writeln!(f, "{}", prov.line()).map_err(|e| Error::io(path, e))?;
    Ok(WriterBuilder::new().from_writer(f))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

pub fn write_dataset(path: &Path, spec: &ModelSpec, data: &DatasetMatrix, prov: &Provenance) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(spec.items.iter().map(|i| i.item_id.as_str()))?;
    for row in data.rows() {
        w.write_record(row.iter().map(u16::to_string))?;
    }
    finish(path, w)
}

/// One row per (chain, iteration) with chain, iteration and divergence
/// columns ahead of the parameters.
pub fn write_draws(path: &Path, draws: &PosteriorDraws, prov: &Provenance) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    let mut header = vec!["chain".to_string(), "iteration".into(), "divergent".into()];
    header.extend(draws.names.iter().cloned());
    w.write_record(&header)?;
    for (c, chain) in draws.chains.iter().enumerate() {
        for (it, vals) in chain.values.chunks(draws.n_params().max(1)).enumerate() {
            let mut rec = vec![(c + 1).to_string(), (it + 1).to_string(), u8::from(chain.divergent[it]).to_string()];
            rec.extend(vals.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    finish(path, w)
}

pub fn write_summary(path: &Path, summaries: &[ParamSummary], prov: &Provenance) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(["parameter", "mean", "sd", "q2.5", "q50", "q97.5", "rhat", "ess", "ci_width"])?;
    for s in summaries {
        w.write_record([
            s.name.clone(),
            s.mean.to_string(),
            s.sd.to_string(),
            s.q025.to_string(),
            s.q50.to_string(),
            s.q975.to_string(),
            fmt_opt(s.rhat),
            fmt_opt(s.ess),
            s.ci_width.to_string(),
        ])?;
    }
    finish(path, w)
}

/// Pretty-printed JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|e| Error::io(path, e))
}

/// Rows of threshold draws labelled by prior.
pub fn write_prior_draws(
    path: &Path,
    n_thresholds: usize,
    rows: &[(String, Vec<f64>)],
    prov: &Provenance,
) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    let mut header = vec!["prior".to_string(), "draw".into()];
    header.extend((1..=n_thresholds).map(|c| format!("tau_{c}")));
    w.write_record(&header)?;
    let mut counter = std::collections::BTreeMap::<&str, usize>::new();
    for (label, tau) in rows {
        let k = counter.entry(label).or_default();
        *k += 1;
        let mut rec = vec![label.clone(), k.to_string()];
        rec.extend(tau.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    finish(path, w)
}

/// Writes `records.csv`, `fits.csv`, `cells.csv` and `tables.txt` into `dir`.
pub fn write_study(dir: &Path, results: &StudyResults, prov: &Provenance) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("records.csv");
    let mut w = csv_writer(&path, prov)?;
    w.write_record([
        "cell", "replication", "prior", "parameter", "class", "truth", "mean", "q2.5", "q97.5", "ci_width", "rhat",
        "ess", "covered",
    ])?;
    for r in &results.records {
        w.write_record([
            (r.cell + 1).to_string(),
            (r.replication + 1).to_string(),
            r.prior.clone(),
            r.parameter.clone(),
            r.class.label().to_string(),
            r.truth.to_string(),
            r.mean.to_string(),
            r.q025.to_string(),
            r.q975.to_string(),
            r.ci_width.to_string(),
            fmt_opt(r.rhat),
            fmt_opt(r.ess),
            r.covered.map_or_else(|| "NA".into(), |c| u8::from(c).to_string()),
        ])?;
    }
    finish(&path, w)?;

    let path = dir.join("fits.csv");
    let mut w = csv_writer(&path, prov)?;
    w.write_record(["cell", "replication", "prior", "data_seed", "sampler_seed", "completed", "divergences", "message"])?;
    for f in &results.fits {
        w.write_record([
            (f.cell + 1).to_string(),
            (f.replication + 1).to_string(),
            f.prior.clone(),
            f.data_seed.to_string(),
            f.sampler_seed.to_string(),
            u8::from(f.completed).to_string(),
            f.divergences.to_string(),
            f.message.clone(),
        ])?;
    }
    finish(&path, w)?;

    let path = dir.join("cells.csv");
    let mut w = csv_writer(&path, prov)?;
    w.write_record([
        "cell",
        "shape",
        "n_categories",
        "n_respondents",
        "n_sparse_items",
        "reference_indicator",
        "prior",
        "class",
        "completed",
        "skipped",
        "n_records",
        "coverage_pct",
        "avg_ci_width",
        "avg_rhat",
        "pct_rhat_below_1.1",
        "avg_ess",
    ])?;
    for cell in &results.cells {
        let c = &cell.condition;
        let classes = cell
            .classes
            .iter()
            .map(|(k, s)| (k.label(), s))
            .chain(cell.all_thresholds.as_ref().map(|s| ("All Thresholds", s)));
        for (label, s) in classes {
            w.write_record([
                (cell.cell + 1).to_string(),
                c.shape.label().to_string(),
                c.n_categories.to_string(),
                c.n_respondents.to_string(),
                c.n_sparse_items.to_string(),
                c.reference_indicator.label().to_string(),
                cell.prior.clone(),
                label.to_string(),
                cell.completed.to_string(),
                cell.skipped.to_string(),
                s.n_records.to_string(),
                fmt_opt(s.coverage),
                s.avg_ci_width.to_string(),
                fmt_opt(s.avg_rhat),
                s.pct_rhat_below.to_string(),
                fmt_opt(s.avg_ess),
            ])?;
        }
    }
    finish(&path, w)?;

    let path = dir.join("tables.txt");
    let mut f = create(&path)?;
    write!(f, "{}\n\n{}", prov.line(), crate::harness::format_tables(results)).map_err(|e| Error::io(&path, e))
}
