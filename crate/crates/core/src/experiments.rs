//! Seeded Monte Carlo sweeps that write one CSV per figure plus a manifest.
//!
//! Every (grid point, trial) pair is an independent job. Trial `t` draws
//! its snapshot seed, solver seed and random-geometry seeds from
//! `trial_rng(master_seed, t)`, so the same trial sees the same random
//! numbers at every grid point and the output does not depend on the
//! number of worker threads.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::admm::{admm_solve, AdmmConfig, Variant};
use crate::beamformer::{beampattern, optimal_sinr, BeamformerWeight};
use crate::config::{join, relative_to, write_kv, KvFile, ScenarioFile};
use crate::error::{Error, Result};
use crate::numerics::HermitianMatrix;
use crate::selection::{
    enumerate_all, fixed_geometry, solve_sparsity, tune_lambda, FixedGeometry, SupportScorer, DEFAULT_ENUMERATION_CAP,
};
use crate::signal_model::{
    data_covariance_true, db_to_linear, generate_snapshots, sample_covariance, trial_rng, Scenario,
};

pub const MANIFEST_NAME: &str = "manifest.kv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    ConvergenceTrace,
    SparsityVsLambda,
    CpuTimeVsT,
    CpuTimeVsM,
    CpuTimeVsL,
    BeampatternCompare,
    SinrVsDoa,
    SinrVsSnr,
    SinrVsT,
    SinrVsM,
    SinrVsL,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 11] = [
        ExperimentKind::ConvergenceTrace,
        ExperimentKind::SparsityVsLambda,
        ExperimentKind::CpuTimeVsT,
        ExperimentKind::CpuTimeVsM,
        ExperimentKind::CpuTimeVsL,
        ExperimentKind::BeampatternCompare,
        ExperimentKind::SinrVsDoa,
        ExperimentKind::SinrVsSnr,
        ExperimentKind::SinrVsT,
        ExperimentKind::SinrVsM,
        ExperimentKind::SinrVsL,
    ];

    fn name(self) -> &'static str {
        match self {
            ExperimentKind::ConvergenceTrace => "convergence_trace",
            ExperimentKind::SparsityVsLambda => "sparsity_vs_lambda",
            ExperimentKind::CpuTimeVsT => "cpu_time_vs_t",
            ExperimentKind::CpuTimeVsM => "cpu_time_vs_m",
            ExperimentKind::CpuTimeVsL => "cpu_time_vs_l",
            ExperimentKind::BeampatternCompare => "beampattern_compare",
            ExperimentKind::SinrVsDoa => "sinr_vs_doa",
            ExperimentKind::SinrVsSnr => "sinr_vs_snr",
            ExperimentKind::SinrVsT => "sinr_vs_t",
            ExperimentKind::SinrVsM => "sinr_vs_m",
            ExperimentKind::SinrVsL => "sinr_vs_l",
        }
    }

    /// Header of the first CSV column.
    pub fn axis_name(self) -> &'static str {
        match self {
            ExperimentKind::ConvergenceTrace | ExperimentKind::SparsityVsLambda => "lambda",
            ExperimentKind::CpuTimeVsT | ExperimentKind::SinrVsT => "snapshots",
            ExperimentKind::CpuTimeVsM | ExperimentKind::SinrVsM => "m",
            ExperimentKind::CpuTimeVsL | ExperimentKind::SinrVsL => "l",
            ExperimentKind::BeampatternCompare => "angle_deg",
            ExperimentKind::SinrVsDoa => "doa_deg",
            ExperimentKind::SinrVsSnr => "snr_db",
        }
    }

    fn integer_axis(self) -> bool {
        matches!(
            self,
            ExperimentKind::CpuTimeVsT
                | ExperimentKind::CpuTimeVsM
                | ExperimentKind::CpuTimeVsL
                | ExperimentKind::SinrVsT
                | ExperimentKind::SinrVsM
                | ExperimentKind::SinrVsL
        )
    }

    fn needs_select(self) -> bool {
        !matches!(
            self,
            ExperimentKind::ConvergenceTrace
                | ExperimentKind::SparsityVsLambda
                | ExperimentKind::CpuTimeVsL
                | ExperimentKind::SinrVsL
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown experiment kind '{s}'")))
    }
}

/// Sensor-selection strategies that can be compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Admm,
    BestEnum,
    WorstEnum,
    CompactUla,
    SparseUla,
    Nested,
    Coprime,
    Random,
    WholeUla,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Admm,
        Method::BestEnum,
        Method::WorstEnum,
        Method::CompactUla,
        Method::SparseUla,
        Method::Nested,
        Method::Coprime,
        Method::Random,
        Method::WholeUla,
    ];

    fn name(self) -> &'static str {
        match self {
            Method::Admm => "admm",
            Method::BestEnum => "best_enum",
            Method::WorstEnum => "worst_enum",
            Method::CompactUla => "compact_ula",
            Method::SparseUla => "sparse_ula",
            Method::Nested => "nested",
            Method::Coprime => "coprime",
            Method::Random => "random",
            Method::WholeUla => "whole_ula",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown method '{s}'")))
    }
}

/// Covariance used to design the beamformers. SINR is always scored
/// against the true model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceSource {
    True,
    Sample,
}

impl fmt::Display for CovarianceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceSource::True => "true",
            CovarianceSource::Sample => "sample",
        })
    }
}

impl FromStr for CovarianceSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "true" => Ok(CovarianceSource::True),
            "sample" => Ok(CovarianceSource::Sample),
            other => Err(Error::validation(format!("unknown covariance source '{other}'"))),
        }
    }
}

/// Parses `1,2,3`, `a:step:b` (inclusive) or a comma list mixing both.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let nums: Vec<f64> = part
            .split(':')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::validation(format!("bad grid value '{x}'")))
            })
            .collect::<Result<_>>()?;
        match nums[..] {
            [v] => out.push(v),
            [a, step, b] => {
                if step == 0.0 || (b - a) * step < 0.0 {
                    return Err(Error::validation(format!("grid range '{part}' never reaches its end")));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|i| a + i as f64 * step));
            }
            _ => {
                return Err(Error::validation(format!(
                    "grid item '{part}' is not 'v' or 'a:step:b'"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::validation("grid is empty"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: ScenarioFile,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub methods: Vec<Method>,
    pub covariance: CovarianceSource,
    /// Random subsets averaged per trial for [`Method::Random`].
    pub random_draws: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, scenario: ScenarioFile, grid: Vec<f64>, output_dir: PathBuf) -> Self {
        ExperimentSpec {
            kind,
            scenario,
            grid,
            trials: 1,
            master_seed: 0,
            output_dir,
            methods: Method::ALL.to_vec(),
            covariance: CovarianceSource::Sample,
            random_draws: 100,
        }
    }

    /// Reads an experiment file. Scenario keys are given inline or through
    /// `scenario = path` (relative to the experiment file), not both.
    pub fn load(path: &Path) -> Result<Self> {
        let mut kv = KvFile::load(path)?;
        let scenario = match kv.take_raw("scenario") {
            Some(p) => {
                let file = relative_to(path, &p);
                ScenarioFile::load(&file)?
            }
            None => ScenarioFile::from_kv(&mut kv)?,
        };
        let kind = kv.require("kind")?;
        let grid = parse_grid(
            &kv.take_raw("grid")
                .ok_or_else(|| Error::validation(format!("{}: missing required key 'grid'", kv.origin())))?,
        )?;
        let output_dir = relative_to(path, &kv.take_raw("output_dir").unwrap_or_else(|| "out".into()));
        let mut spec = ExperimentSpec::new(kind, scenario, grid, output_dir);
        if let Some(t) = kv.take("trials")? {
            spec.trials = t;
        }
        if let Some(s) = kv.take("master_seed")? {
            spec.master_seed = s;
        }
        if let Some(m) = kv.take_list("methods")? {
            spec.methods = m;
        }
        if let Some(c) = kv.take("covariance")? {
            spec.covariance = c;
        }
        if let Some(d) = kv.take("random_draws")? {
            spec.random_draws = d;
        }
        if let Some(key) = ["m", "soi_doa_deg", "snr_db"].iter().find(|k| kv.contains(k)) {
            return Err(Error::validation(format!(
                "{}: '{key}' given inline alongside 'scenario = ...'",
                kv.origin()
            )));
        }
        kv.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.grid.is_empty() {
            return Err(Error::validation("grid is empty"));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::validation("methods list is empty"));
        }
        if self.methods.contains(&Method::Random) && self.random_draws == 0 {
            return Err(Error::validation("random_draws must be at least 1"));
        }
        if self.kind.integer_axis() {
            if let Some(bad) = self.grid.iter().find(|&&x| !(x >= 1.0 && x.fract() == 0.0)) {
                return Err(Error::validation(format!(
                    "{} grid needs positive integers, got {bad}",
                    self.kind
                )));
            }
        }
        if matches!(
            self.kind,
            ExperimentKind::ConvergenceTrace | ExperimentKind::SparsityVsLambda
        ) {
            if let Some(bad) = self.grid.iter().find(|&&x| x.is_nan() || x <= 0.0) {
                return Err(Error::validation(format!(
                    "lambda grid needs positive values, got {bad}"
                )));
            }
        }
        if self.kind.needs_select() && self.scenario.select.is_none() {
            return Err(Error::validation(format!(
                "{} needs 'select' (subarray size L)",
                self.kind
            )));
        }
        Ok(())
    }

    /// Flat description that [`ExperimentSpec::load`] reads back to the same spec.
    pub fn manifest(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("kind".to_string(), self.kind.to_string()),
            ("grid".into(), join(&self.grid)),
            ("trials".into(), self.trials.to_string()),
            ("master_seed".into(), self.master_seed.to_string()),
            ("output_dir".into(), self.output_dir.display().to_string()),
            ("methods".into(), join(&self.methods)),
            ("covariance".into(), self.covariance.to_string()),
            ("random_draws".into(), self.random_draws.to_string()),
        ];
        out.extend(self.scenario.to_kv());
        out
    }

    fn csv_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.csv", self.kind))
    }
}

/// Seeds drawn from one trial's stream.
#[derive(Clone, Debug)]
struct TrialSeeds {
    snapshots: u64,
    init: u64,
    random: Vec<u64>,
}

fn trial_seeds(master: u64, trial: usize, draws: usize) -> TrialSeeds {
    let mut rng = trial_rng(master, trial as u64);
    TrialSeeds {
        snapshots: rng.random(),
        init: rng.random(),
        random: (0..draws).map(|_| rng.random()).collect(),
    }
}

fn design_covariance(s: &Scenario, source: CovarianceSource, t: usize, seed: u64) -> Result<HermitianMatrix> {
    match source {
        CovarianceSource::True => Ok(data_covariance_true(s)),
        CovarianceSource::Sample => Ok(sample_covariance(&generate_snapshots(s, t, seed)?)),
    }
}

/// One method's outcome. `sinr_db` is `None` when the method does not apply
/// (e.g. a geometry that does not fit the array).
#[derive(Clone, Debug)]
pub struct MethodRow {
    pub method: Method,
    pub sinr_db: Option<f64>,
    /// Representative weight; for [`Method::Random`] the first draw.
    pub weight: Option<BeamformerWeight>,
}

/// Per-call inputs to [`evaluate_methods`] beyond the scenario itself.
#[derive(Clone, Debug)]
pub struct MethodContext<'a> {
    pub file: &'a ScenarioFile,
    pub init_seed: u64,
    pub random_seeds: &'a [u64],
}

/// SINR of every method in `methods`, in that order.
pub fn evaluate_methods(
    s: &Scenario,
    rx: &HermitianMatrix,
    l: usize,
    methods: &[Method],
    ctx: &MethodContext<'_>,
) -> Result<Vec<MethodRow>> {
    let scorer = SupportScorer::new(s, rx)?;
    let m = s.m();
    if l == 0 || l > m {
        return Err(Error::validation(format!("cannot select {l} of {m} sensors")));
    }
    let needs_enum = methods
        .iter()
        .any(|x| matches!(x, Method::BestEnum | Method::WorstEnum));
    let enumeration = if needs_enum {
        match enumerate_all(s, rx, l, DEFAULT_ENUMERATION_CAP) {
            Ok(e) => Some(e),
            Err(Error::TooManyCandidates { count, cap }) => {
                log::warn!("skipping enumeration: {count} supports exceed cap {cap}");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let geometry = |g: FixedGeometry| -> Result<(Option<f64>, Option<BeamformerWeight>)> {
        match fixed_geometry(g, m, l) {
            Ok(sup) => {
                let r = scorer.report(&sup)?;
                Ok((Some(r.sinr_db), Some(r.weight)))
            }
            Err(Error::Validation(msg)) => {
                log::debug!("{g} not applicable: {msg}");
                Ok((None, None))
            }
            Err(e) => Err(e),
        }
    };

    methods
        .iter()
        .map(|&method| {
            let (sinr_db, weight) = match method {
                Method::Admm => {
                    let cfg = AdmmConfig {
                        init_seed: ctx.init_seed,
                        ..ctx.file.admm.clone()
                    };
                    let r = tune_lambda(l, Some(ctx.file.lambda_search_on(rx)?), &cfg, s, rx)?;
                    (Some(r.sinr_db), Some(r.weight))
                }
                Method::BestEnum => match &enumeration {
                    Some(e) => (Some(e.best.sinr_db), Some(e.best.weight.clone())),
                    None => (None, None),
                },
                Method::WorstEnum => match &enumeration {
                    Some(e) => (Some(e.worst.sinr_db), Some(e.worst.weight.clone())),
                    None => (None, None),
                },
                Method::CompactUla => geometry(FixedGeometry::CompactUla)?,
                Method::SparseUla => geometry(FixedGeometry::SparseUla)?,
                Method::Nested => geometry(FixedGeometry::Nested)?,
                Method::Coprime => geometry(FixedGeometry::Coprime)?,
                Method::Random => {
                    let mut total = 0.0;
                    let mut first = None;
                    for &seed in ctx.random_seeds {
                        let sup = fixed_geometry(FixedGeometry::Random(seed), m, l)?;
                        let r = scorer.report(&sup)?;
                        total += r.sinr_db;
                        first.get_or_insert(r.weight);
                    }
                    if ctx.random_seeds.is_empty() {
                        (None, None)
                    } else {
                        (Some(total / ctx.random_seeds.len() as f64), first)
                    }
                }
                Method::WholeUla => {
                    let all: Vec<usize> = (0..m).collect();
                    let r = scorer.report(&all)?;
                    (Some(r.sinr_db), Some(r.weight))
                }
            };
            Ok(MethodRow {
                method,
                sinr_db,
                weight,
            })
        })
        .collect()
}

/// Method comparison on one scenario.
#[derive(Clone, Debug)]
pub struct CompareTable {
    pub optimal_db: f64,
    /// Sorted by SINR, highest first; inapplicable methods last.
    pub rows: Vec<MethodRow>,
}

/// Compares `methods` at subarray size `l`. With sample covariance the
/// snapshots come from `file.seed`; random subsets use seeds
/// `file.seed, file.seed + 1, …` (`random_draws` of them).
pub fn compare_methods(
    file: &ScenarioFile,
    l: usize,
    methods: &[Method],
    covariance: CovarianceSource,
    random_draws: usize,
) -> Result<CompareTable> {
    let s = file.scenario()?;
    let rx = design_covariance(&s, covariance, file.snapshots, file.seed)?;
    let seeds: Vec<u64> = (0..random_draws as u64).map(|i| file.seed.wrapping_add(i)).collect();
    let ctx = MethodContext {
        file,
        init_seed: file.admm.init_seed,
        random_seeds: &seeds,
    };
    let mut rows = evaluate_methods(&s, &rx, l, methods, &ctx)?;
    rows.sort_by(|a, b| match (a.sinr_db, b.sinr_db) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.method.cmp(&b.method),
    });
    Ok(CompareTable {
        optimal_db: optimal_sinr(&s)?,
        rows,
    })
}

/// Files written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub jobs: usize,
}

/// Runs `spec` on a pool of `threads` workers (`None`: one per logical core).
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<RunSummary> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.output_dir).map_err(|e| Error::io(&spec.output_dir, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;

    let (header, rows) = pool.install(|| match spec.kind {
        ExperimentKind::ConvergenceTrace => convergence_rows(spec),
        ExperimentKind::SparsityVsLambda => sparsity_rows(spec),
        ExperimentKind::CpuTimeVsT | ExperimentKind::CpuTimeVsM | ExperimentKind::CpuTimeVsL => cpu_rows(spec),
        ExperimentKind::BeampatternCompare => beampattern_rows(spec),
        _ => sinr_rows(spec),
    })?;

    let csv_path = spec.csv_path();
    let mut out = csv::Writer::from_path(&csv_path)?;
    out.write_record(&header)?;
    for r in &rows {
        out.write_record(r)?;
    }
    out.flush().map_err(|e| Error::io(&csv_path, e))?;

    // absolute, so the manifest reruns into the same directory from anywhere
    let rerun = ExperimentSpec {
        output_dir: spec
            .output_dir
            .canonicalize()
            .map_err(|e| Error::io(&spec.output_dir, e))?,
        ..spec.clone()
    };
    let manifest = spec.output_dir.join(MANIFEST_NAME);
    let file = std::fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
    write_kv(std::io::BufWriter::new(file), &rerun.manifest()).map_err(|e| Error::io(&manifest, e))?;
    log::info!("wrote {} rows to {}", rows.len(), csv_path.display());
    Ok(RunSummary {
        csv: csv_path,
        manifest,
        jobs: spec.grid.len() * spec.trials,
    })
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Scenario and subarray size at one grid point.
fn point(spec: &ExperimentSpec, x: f64) -> Result<(Scenario, usize, usize)> {
    let base = spec.scenario.scenario()?;
    let l = spec.scenario.select.unwrap_or(0);
    let t = spec.scenario.snapshots;
    let xi = x as usize;
    Ok(match spec.kind {
        ExperimentKind::SinrVsDoa => (base.steered_to(x)?, l, t),
        ExperimentKind::SinrVsSnr => (base.with_soi_power(db_to_linear(x))?, l, t),
        ExperimentKind::SinrVsT | ExperimentKind::CpuTimeVsT => (base, l, xi),
        ExperimentKind::SinrVsM | ExperimentKind::CpuTimeVsM => (base.with_sensors(xi)?, l, t),
        ExperimentKind::SinrVsL | ExperimentKind::CpuTimeVsL => (base, xi, t),
        _ => (base, l, t),
    })
}

/// Runs `job(grid_index, trial)` for every pair and returns results grouped
/// by grid point, trials in order.
fn fan_out<T: Send>(spec: &ExperimentSpec, job: impl Fn(usize, usize) -> Result<T> + Sync) -> Result<Vec<Vec<T>>> {
    let jobs: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|g| (0..spec.trials).map(move |t| (g, t)))
        .collect();
    let flat: Vec<T> = jobs.par_iter().map(|&(g, t)| job(g, t)).collect::<Result<_>>()?;
    let mut grouped: Vec<Vec<T>> = (0..spec.grid.len()).map(|_| Vec::with_capacity(spec.trials)).collect();
    for ((g, _), r) in jobs.into_iter().zip(flat) {
        grouped[g].push(r);
    }
    Ok(grouped)
}

fn sinr_rows(spec: &ExperimentSpec) -> Result<Table> {
    let per_point = fan_out(spec, |g, trial| {
        let (s, l, t) = point(spec, spec.grid[g])?;
        let seeds = trial_seeds(spec.master_seed, trial, spec.random_draws);
        let rx = design_covariance(&s, spec.covariance, t, seeds.snapshots)?;
        let ctx = MethodContext {
            file: &spec.scenario,
            init_seed: seeds.init,
            random_seeds: &seeds.random,
        };
        let rows = evaluate_methods(&s, &rx, l, &spec.methods, &ctx)?;
        Ok(rows.into_iter().map(|r| r.sinr_db).collect::<Vec<_>>())
    })?;

    let mut header = vec![spec.kind.axis_name().to_string(), "optimal".to_string()];
    header.extend(spec.methods.iter().map(ToString::to_string));
    let mut rows = Vec::with_capacity(spec.grid.len());
    for (x, trials) in spec.grid.iter().zip(per_point) {
        let (s, _, _) = point(spec, *x)?;
        let mut row = vec![x.to_string(), optimal_sinr(&s)?.to_string()];
        for j in 0..spec.methods.len() {
            let vals: Option<Vec<f64>> = trials.iter().map(|t| t[j]).collect();
            row.push(cell(vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn convergence_rows(spec: &ExperimentSpec) -> Result<Table> {
    let variants = [Variant::PlainL1, Variant::Reweighted];
    let per_point = fan_out(spec, |g, trial| {
        let s = spec.scenario.scenario()?;
        let seeds = trial_seeds(spec.master_seed, trial, 0);
        let rx = design_covariance(&s, spec.covariance, spec.scenario.snapshots, seeds.snapshots)?;
        variants
            .iter()
            .map(|&variant| {
                let cfg = AdmmConfig {
                    lambda: spec.grid[g],
                    variant,
                    init_seed: seeds.init,
                    ..spec.scenario.admm.clone()
                };
                admm_solve(&cfg, &rx, &s.soi_steering())
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let header = [
        "trial",
        "lambda",
        "variant",
        "k",
        "lagrangian",
        "primal_residual",
        "feasibility_gap",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for (x, trials) in spec.grid.iter().zip(per_point) {
        for (trial, results) in trials.iter().enumerate() {
            for (variant, res) in variants.iter().zip(results) {
                for k in 0..res.iterations() {
                    rows.push(vec![
                        trial.to_string(),
                        x.to_string(),
                        variant.to_string(),
                        (k + 1).to_string(),
                        res.lagrangian_trace[k].to_string(),
                        res.residual_trace[k].to_string(),
                        res.feasibility_trace[k].to_string(),
                    ]);
                }
            }
        }
    }
    Ok((header, rows))
}

fn sparsity_rows(spec: &ExperimentSpec) -> Result<Table> {
    let variants = [Variant::PlainL1, Variant::Reweighted];
    let per_point = fan_out(spec, |g, trial| {
        let s = spec.scenario.scenario()?;
        let seeds = trial_seeds(spec.master_seed, trial, 0);
        let rx = design_covariance(&s, spec.covariance, spec.scenario.snapshots, seeds.snapshots)?;
        variants
            .iter()
            .map(|&variant| {
                let cfg = AdmmConfig {
                    lambda: spec.grid[g],
                    variant,
                    init_seed: seeds.init,
                    ..spec.scenario.admm.clone()
                };
                let res = admm_solve(&cfg, &rx, &s.soi_steering())?;
                solve_sparsity(&res, spec.scenario.alpha)
            })
            .collect::<Result<Vec<usize>>>()
    })?;

    let mut header = vec!["lambda".to_string()];
    for v in variants {
        header.extend(["mean", "min", "max"].map(|s| format!("{v}_{s}_active")));
    }
    let rows = spec
        .grid
        .iter()
        .zip(per_point)
        .map(|(x, trials)| {
            let mut row = vec![x.to_string()];
            for j in 0..variants.len() {
                let counts: Vec<usize> = trials.iter().map(|t| t[j]).collect();
                let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
                row.push(mean.to_string());
                row.push(counts.iter().min().copied().unwrap_or(0).to_string());
                row.push(counts.iter().max().copied().unwrap_or(0).to_string());
            }
            row
        })
        .collect();
    Ok((header, rows))
}

/// Mean and median of `xs` (not empty).
fn mean_median(xs: &mut [f64]) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    };
    (mean, median)
}

/// Wall-clock of the λ-tuned selection call. Timings are machine dependent;
/// run with one thread for clean numbers.
fn cpu_rows(spec: &ExperimentSpec) -> Result<Table> {
    let per_point = fan_out(spec, |g, trial| {
        let (s, l, t) = point(spec, spec.grid[g])?;
        if l > s.m() {
            return Err(Error::validation(format!("cannot select {l} of {} sensors", s.m())));
        }
        let seeds = trial_seeds(spec.master_seed, trial, 0);
        let rx = design_covariance(&s, spec.covariance, t, seeds.snapshots)?;
        let cfg = AdmmConfig {
            init_seed: seeds.init,
            ..spec.scenario.admm.clone()
        };
        let search = Some(spec.scenario.lambda_search_on(&rx)?);
        let start = Instant::now();
        let r = tune_lambda(l, search, &cfg, &s, &rx)?;
        Ok((start.elapsed().as_secs_f64(), r.search_iters))
    })?;

    let header = [spec.kind.axis_name(), "mean_s", "median_s", "mean_solves"]
        .map(String::from)
        .to_vec();
    let rows = spec
        .grid
        .iter()
        .zip(per_point)
        .map(|(x, trials)| {
            let mut secs: Vec<f64> = trials.iter().map(|t| t.0).collect();
            let (mean, median) = mean_median(&mut secs);
            let solves = trials.iter().map(|t| t.1).sum::<usize>() as f64 / trials.len() as f64;
            vec![x.to_string(), mean.to_string(), median.to_string(), solves.to_string()]
        })
        .collect();
    Ok((header, rows))
}

/// Patterns of each method's weight from trial 0; the grid holds angles.
fn beampattern_rows(spec: &ExperimentSpec) -> Result<Table> {
    let s = spec.scenario.scenario()?;
    let l = spec.scenario.select.unwrap_or(s.m());
    let seeds = trial_seeds(spec.master_seed, 0, spec.random_draws);
    let rx = design_covariance(&s, spec.covariance, spec.scenario.snapshots, seeds.snapshots)?;
    let ctx = MethodContext {
        file: &spec.scenario,
        init_seed: seeds.init,
        random_seeds: &seeds.random,
    };
    let methods = evaluate_methods(&s, &rx, l, &spec.methods, &ctx)?;
    let patterns: Vec<Option<Vec<f64>>> = methods
        .iter()
        .map(|r| r.weight.as_ref().map(|w| beampattern(w, &spec.grid, s.m())).transpose())
        .collect::<Result<_>>()?;

    let mut header = vec!["angle_deg".to_string()];
    header.extend(spec.methods.iter().map(ToString::to_string));
    let rows = spec
        .grid
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut row = vec![a.to_string()];
            row.extend(patterns.iter().map(|p| cell(p.as_ref().map(|v| v[i]))));
            row
        })
        .collect();
    Ok((header, rows))
}
