//! Flat `key = value` files for scenarios, experiments and run manifests.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Keys are `[a-z0-9_]+`. Values run to the end of the line and are
//! trimmed. Blank lines and lines starting with `#` are ignored. A key may
//! appear once. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::admm::{AdmmConfig, RhoChoice, Variant};
use crate::error::{Error, Result};
use crate::numerics::HermitianMatrix;
use crate::selection::{LambdaSearch, DEFAULT_ALPHA, DEFAULT_MAX_SEARCH_ITERS};
use crate::signal_model::{db_to_linear, Interferer, Scenario};

#[derive(Clone, Debug, Default)]
pub struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
    origin: String,
}

impl KvFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("{origin}:{lineno}: expected 'key = value'")))?;
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            {
                return Err(Error::validation(format!("{origin}:{lineno}: invalid key '{key}'")));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (lineno, value.trim().to_string())) {
                return Err(Error::validation(format!(
                    "{origin}:{lineno}: duplicate key '{key}' (first set on line {first})"
                )));
            }
        }
        Ok(KvFile {
            entries,
            origin: origin.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Removes and returns the raw value.
    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let Some((line, raw)) = self.entries.remove(key) else {
            return Ok(None);
        };
        raw.parse()
            .map(Some)
            .map_err(|_| Error::validation(format!("{}:{line}: cannot parse {key} = '{raw}'", self.origin)))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::validation(format!("{}: missing required key '{key}'", self.origin)))
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, raw)) = self.entries.remove(key) else {
            return Ok(None);
        };
        if raw.is_empty() {
            return Ok(Some(Vec::new()));
        }
        raw.split(',')
            .map(|item| {
                item.trim().parse().map_err(|_| {
                    Error::validation(format!(
                        "{}:{line}: bad list item '{}' in {key}",
                        self.origin,
                        item.trim()
                    ))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Errors if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(Error::validation(format!(
                "{}:{line}: unknown key '{key}'",
                self.origin
            )));
        }
        Ok(())
    }
}

/// Writes `key = value` lines in the given order.
pub fn write_kv<W: Write>(mut out: W, pairs: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in pairs {
        writeln!(out, "{k} = {v}")?;
    }
    Ok(())
}

pub(crate) fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// A scenario plus the solver and selection settings that go with it.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioFile {
    pub m: usize,
    pub soi_doa_deg: f64,
    pub snr_db: f64,
    pub interferer_doas_deg: Vec<f64>,
    /// One INR per interferer.
    pub interferer_inrs_db: Vec<f64>,
    pub snapshots: usize,
    pub seed: u64,
    pub admm: AdmmConfig,
    /// Target subarray size `L`.
    pub select: Option<usize>,
    pub alpha: f64,
    /// Explicit λ search interval; defaults to one scaled by ρ.
    pub lambda_bounds: Option<(f64, f64)>,
    pub max_search_iters: usize,
}

const SCENARIO_KEYS: &[&str] = &[
    "m",
    "soi_doa_deg",
    "snr_db",
    "inr_db",
    "interferer_doas_deg",
    "interferer_inrs_db",
    "snapshots",
    "seed",
    "lambda",
    "rho",
    "epsilon",
    "eta",
    "k_max",
    "variant",
    "init_seed",
    "select",
    "alpha",
    "lambda_lo",
    "lambda_hi",
    "max_search_iters",
];

impl ScenarioFile {
    /// Defaults: no interferers, 100 snapshots, seed 0, library solver defaults.
    pub fn new(m: usize, soi_doa_deg: f64, snr_db: f64) -> Self {
        ScenarioFile {
            m,
            soi_doa_deg,
            snr_db,
            interferer_doas_deg: Vec::new(),
            interferer_inrs_db: Vec::new(),
            snapshots: 100,
            seed: 0,
            admm: AdmmConfig::default(),
            select: None,
            alpha: DEFAULT_ALPHA,
            lambda_bounds: None,
            max_search_iters: DEFAULT_MAX_SEARCH_ITERS,
        }
    }

    pub fn is_scenario_key(key: &str) -> bool {
        SCENARIO_KEYS.contains(&key)
    }

    /// Consumes the scenario keys from `kv`, leaving any others in place.
    pub fn from_kv(kv: &mut KvFile) -> Result<Self> {
        let mut f = ScenarioFile::new(kv.require("m")?, kv.require("soi_doa_deg")?, kv.require("snr_db")?);
        f.interferer_doas_deg = kv.take_list("interferer_doas_deg")?.unwrap_or_default();
        let shared: Option<f64> = kv.take("inr_db")?;
        let per: Option<Vec<f64>> = kv.take_list("interferer_inrs_db")?;
        let k = f.interferer_doas_deg.len();
        f.interferer_inrs_db = match (per, shared) {
            (Some(list), _) if list.len() != k => {
                return Err(Error::validation(format!(
                    "{}: interferer_inrs_db has {} entries for {k} interferers",
                    kv.origin(),
                    list.len()
                )))
            }
            (Some(list), _) => list,
            (None, Some(inr)) => vec![inr; k],
            (None, None) if k == 0 => Vec::new(),
            (None, None) => {
                return Err(Error::validation(format!(
                    "{}: interferers need inr_db or interferer_inrs_db",
                    kv.origin()
                )))
            }
        };
        if let Some(t) = kv.take("snapshots")? {
            f.snapshots = t;
        }
        if let Some(s) = kv.take("seed")? {
            f.seed = s;
        }
        let a = &mut f.admm;
        if let Some(v) = kv.take("lambda")? {
            a.lambda = v;
        }
        if let Some(v) = kv.take::<RhoChoice>("rho")? {
            a.rho = v;
        }
        if let Some(v) = kv.take("epsilon")? {
            a.epsilon = v;
        }
        if let Some(v) = kv.take("eta")? {
            a.eta = v;
        }
        if let Some(v) = kv.take("k_max")? {
            a.k_max = v;
        }
        if let Some(v) = kv.take::<Variant>("variant")? {
            a.variant = v;
        }
        if let Some(v) = kv.take("init_seed")? {
            a.init_seed = v;
        }
        f.select = kv.take("select")?;
        if let Some(v) = kv.take("alpha")? {
            f.alpha = v;
        }
        f.lambda_bounds = match (kv.take::<f64>("lambda_lo")?, kv.take::<f64>("lambda_hi")?) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => {
                return Err(Error::validation(format!(
                    "{}: lambda_lo and lambda_hi must be given together",
                    kv.origin()
                )))
            }
        };
        if let Some(v) = kv.take("max_search_iters")? {
            f.max_search_iters = v;
        }
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut kv = KvFile::load(path)?;
        let f = Self::from_kv(&mut kv)?;
        kv.finish()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        self.admm.validate()?;
        if self.snapshots == 0 {
            return Err(Error::validation("snapshots must be at least 1"));
        }
        if let Some(l) = self.select {
            if l == 0 || l > self.m {
                return Err(Error::validation(format!("select = {l} outside [1, {}]", self.m)));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let interferers = self
            .interferer_doas_deg
            .iter()
            .zip(&self.interferer_inrs_db)
            .map(|(&doa, &inr)| Interferer {
                doa_deg: doa,
                power: db_to_linear(inr),
            })
            .collect();
        Scenario::new(self.m, self.soi_doa_deg, db_to_linear(self.snr_db), interferers, 1.0)
    }

    /// Explicit bounds when set, otherwise `None` (ρ-scaled default).
    pub fn lambda_search(&self) -> Option<LambdaSearch> {
        self.lambda_bounds.map(|(lo, hi)| LambdaSearch {
            lambda_lo: lo,
            lambda_hi: hi,
            max_iters: self.max_search_iters,
            alpha: self.alpha,
        })
    }

    /// Search settings with the ρ-scaled default filled in.
    pub fn lambda_search_for(&self, rho: f64) -> LambdaSearch {
        self.lambda_search().unwrap_or(LambdaSearch {
            max_iters: self.max_search_iters,
            alpha: self.alpha,
            ..LambdaSearch::for_rho(rho)
        })
    }

    /// [`Self::lambda_search_for`] with ρ resolved against the design covariance.
    pub fn lambda_search_on(&self, rx: &HermitianMatrix) -> Result<LambdaSearch> {
        Ok(self.lambda_search_for(self.admm.rho.resolve(rx)?))
    }

    /// Every field as `key = value` pairs, parseable by [`ScenarioFile::from_kv`].
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("m".to_string(), self.m.to_string()),
            ("soi_doa_deg".into(), self.soi_doa_deg.to_string()),
            ("snr_db".into(), self.snr_db.to_string()),
            ("interferer_doas_deg".into(), join(&self.interferer_doas_deg)),
            ("interferer_inrs_db".into(), join(&self.interferer_inrs_db)),
            ("snapshots".into(), self.snapshots.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("lambda".into(), self.admm.lambda.to_string()),
            ("rho".into(), self.admm.rho.to_string()),
            ("epsilon".into(), self.admm.epsilon.to_string()),
            ("eta".into(), self.admm.eta.to_string()),
            ("k_max".into(), self.admm.k_max.to_string()),
            ("variant".into(), self.admm.variant.to_string()),
            ("init_seed".into(), self.admm.init_seed.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("max_search_iters".into(), self.max_search_iters.to_string()),
        ];
        if let Some(l) = self.select {
            out.push(("select".into(), l.to_string()));
        }
        if let Some((lo, hi)) = self.lambda_bounds {
            out.push(("lambda_lo".into(), lo.to_string()));
            out.push(("lambda_hi".into(), hi.to_string()));
        }
        out
    }
}

/// Resolves `path` against the directory containing `base`.
pub(crate) fn relative_to(base: &Path, path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() {
        return p;
    }
    match base.parent() {
        Some(dir) => dir.join(p),
        None => p,
    }
}
