//! Turning solver weights into exact `L`-of-`M` sensor selections, plus the
//! exhaustive and fixed-geometry baselines they are compared against.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::admm::{admm_solve, AdmmConfig, AdmmResult};
use crate::beamformer::{reduced_mvdr, validate_support, BeamformerWeight, SinrEvaluator};
use crate::error::{Error, Result};
use crate::numerics::HermitianMatrix;
use crate::signal_model::{rng_from_seed, Scenario};

/// Relative magnitude threshold for counting a weight entry as active.
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_MAX_SEARCH_ITERS: usize = 40;
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Number of entries above `α · max|w|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveCount {
    pub count: usize,
    /// Set when `w` is identically zero (the count is then 0).
    pub all_zero: bool,
}

pub fn count_active(w: &[num_complex::Complex64], alpha: f64) -> Result<ActiveCount> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let peak = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(ActiveCount {
            count: 0,
            all_zero: true,
        });
    }
    let cut = alpha * peak;
    Ok(ActiveCount {
        count: w.iter().filter(|z| z.norm() > cut).count(),
        all_zero: false,
    })
}

/// Active count of a solve, with a collapsed solve (every entry thresholded
/// away) counted as 0 rather than by its uninformative weight.
pub fn solve_sparsity(res: &AdmmResult, alpha: f64) -> Result<usize> {
    let active = count_active(res.weight(), alpha)?;
    Ok(if res.collapsed { 0 } else { active.count })
}

/// Sorted indices of the `l` largest-modulus entries; ties go to the lower index.
pub fn select_support(w: &[num_complex::Complex64], l: usize) -> Result<Vec<usize>> {
    if l == 0 || l > w.len() {
        return Err(Error::validation(format!("cannot select {l} of {} sensors", w.len())));
    }
    let mut order: Vec<usize> = (0..w.len()).collect();
    // stable sort keeps lower indices first among equal moduli
    order.sort_by(|&i, &j| w[j].norm().total_cmp(&w[i].norm()));
    let mut picked = order[..l].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// A size-`L` subarray, its reduced MVDR weight and true-model SINR.
#[derive(Clone, Debug)]
pub struct SelectionReport {
    pub support: Vec<usize>,
    /// λ of the solve that produced the support; `None` for non-ADMM methods.
    pub lambda_used: Option<f64>,
    /// Number of ADMM solves spent searching λ.
    pub search_iters: usize,
    pub weight: BeamformerWeight,
    pub sinr_db: f64,
    /// True when no λ hit the target exactly and the support came from the
    /// closest-sparsity solve.
    pub fallback: bool,
}

/// Scores supports against one scenario and training covariance.
pub struct SupportScorer<'a> {
    scenario: &'a Scenario,
    rx: &'a HermitianMatrix,
    eval: SinrEvaluator,
}

impl<'a> SupportScorer<'a> {
    pub fn new(scenario: &'a Scenario, rx: &'a HermitianMatrix) -> Result<Self> {
        if rx.dim() != scenario.m() {
            return Err(Error::validation(format!(
                "covariance dimension {} does not match array size {}",
                rx.dim(),
                scenario.m()
            )));
        }
        Ok(SupportScorer {
            scenario,
            rx,
            eval: SinrEvaluator::new(scenario),
        })
    }

    /// Reduced MVDR from the training covariance, SINR from the true model.
    pub fn score(&self, support: &[usize]) -> Result<(BeamformerWeight, f64)> {
        let w = reduced_mvdr(support, self.scenario, self.rx)?;
        let sinr = self.eval.sinr_db(&w)?;
        if !sinr.is_finite() {
            return Err(Error::Singular(format!("non-finite SINR on support {support:?}")));
        }
        Ok((w, sinr))
    }

    pub fn report(&self, support: &[usize]) -> Result<SelectionReport> {
        let (weight, sinr_db) = self.score(support)?;
        Ok(SelectionReport {
            support: weight.support().map(<[usize]>::to_vec).unwrap_or_default(),
            lambda_used: None,
            search_iters: 0,
            weight,
            sinr_db,
            fallback: false,
        })
    }
}

/// Bisection interval and stopping rule for [`tune_lambda`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaSearch {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub max_iters: usize,
    pub alpha: f64,
}

impl LambdaSearch {
    /// `[1e-6·ρ, 10·ρ]`.
    pub fn for_rho(rho: f64) -> Self {
        LambdaSearch {
            lambda_lo: 1e-6 * rho,
            lambda_hi: 10.0 * rho,
            max_iters: DEFAULT_MAX_SEARCH_ITERS,
            alpha: DEFAULT_ALPHA,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_lo > 0.0 && self.lambda_lo < self.lambda_hi && self.lambda_hi.is_finite()) {
            return Err(Error::validation(format!(
                "lambda interval [{}, {}] must satisfy 0 < lo < hi",
                self.lambda_lo, self.lambda_hi
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max search iterations must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Bisects `log λ` until the solver's active count equals `target_l`.
///
/// `search = None` uses [`LambdaSearch::for_rho`] with the ρ that `cfg`
/// resolves to. The first λ that hits the target is accepted.
pub fn tune_lambda(
    target_l: usize,
    search: Option<LambdaSearch>,
    cfg: &AdmmConfig,
    scenario: &Scenario,
    rx: &HermitianMatrix,
) -> Result<SelectionReport> {
    let m = scenario.m();
    if target_l == 0 || target_l > m {
        return Err(Error::validation(format!("target L = {target_l} outside [1, {m}]")));
    }
    let search = match search {
        Some(s) => s,
        None => LambdaSearch::for_rho(cfg.rho.resolve(rx)?),
    };
    search.validate()?;
    let scorer = SupportScorer::new(scenario, rx)?;
    let a0 = scenario.soi_steering();
    let solve = |lambda: f64| admm_solve(&AdmmConfig { lambda, ..cfg.clone() }, rx, &a0);

    if target_l == m {
        // nothing to search: every sensor is kept whatever the solve returns
        solve(search.lambda_lo)?;
        let all: Vec<usize> = (0..m).collect();
        return Ok(SelectionReport {
            lambda_used: Some(search.lambda_lo),
            search_iters: 1,
            ..scorer.report(&all)?
        });
    }

    let (mut lo, mut hi) = (search.lambda_lo.ln(), search.lambda_hi.ln());
    // (distance to target, prefers over-count, λ, weight)
    let mut closest: Option<(usize, bool, f64, Vec<num_complex::Complex64>)> = None;
    for iter in 1..=search.max_iters {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        let res = solve(lambda)?;
        let active = solve_sparsity(&res, search.alpha)?;
        log::debug!("lambda search {iter}: lambda = {lambda:e}, active = {active}");
        if active == target_l {
            let support = select_support(res.weight(), target_l)?;
            return Ok(SelectionReport {
                lambda_used: Some(lambda),
                search_iters: iter,
                ..scorer.report(&support)?
            });
        }
        let gap = active.abs_diff(target_l);
        let over = active > target_l;
        let better = match &closest {
            None => true,
            Some((g, o, _, _)) => gap < *g || (gap == *g && over && !*o),
        };
        if better && active > 0 {
            closest = Some((gap, over, lambda, res.weight().to_vec()));
        }
        if over {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (_, _, lambda, w) =
        closest.ok_or_else(|| Error::validation("every solve in the lambda search thresholded all sensors away"))?;
    log::warn!(
        "no lambda in [{:e}, {:e}] gave exactly {target_l} active sensors; using the closest solve",
        search.lambda_lo,
        search.lambda_hi
    );
    let support = select_support(&w, target_l)?;
    Ok(SelectionReport {
        lambda_used: Some(lambda),
        search_iters: search.max_iters,
        fallback: true,
        ..scorer.report(&support)?
    })
}

/// `C(n, k)` without overflow for any realistic array.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Best and worst subarrays over every size-`L` support.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub best: SelectionReport,
    pub worst: SelectionReport,
    pub evaluated: usize,
}

/// Scores all `C(M, L)` supports in parallel. Ties go to the
/// lexicographically smaller support.
pub fn enumerate_all(scenario: &Scenario, rx: &HermitianMatrix, l: usize, cap: u128) -> Result<Enumeration> {
    let m = scenario.m();
    if l == 0 || l > m {
        return Err(Error::validation(format!("cannot select {l} of {m} sensors")));
    }
    let count = binomial(m, l);
    if count > cap {
        return Err(Error::TooManyCandidates { count, cap });
    }
    let scorer = SupportScorer::new(scenario, rx)?;
    let candidates: Vec<Vec<usize>> = (0..m).combinations(l).collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|sup| scorer.score(sup).map(|(_, s)| s))
        .collect::<Result<_>>()?;

    // candidates are in lexicographic order, so strict comparisons keep the
    // first (smallest) support on ties
    let mut best = 0;
    let mut worst = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
        if s < scores[worst] {
            worst = i;
        }
    }
    Ok(Enumeration {
        best: scorer.report(&candidates[best])?,
        worst: scorer.report(&candidates[worst])?,
        evaluated: candidates.len(),
    })
}

/// Fixed subarray layouts used as baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedGeometry {
    /// The first `L` sensors.
    CompactUla,
    /// Every other sensor, starting at 0.
    SparseUla,
    /// Two-level nested array.
    Nested,
    /// Coprime pair `p < q` with `p + q − 1 = L`.
    Coprime,
    /// Uniform random `L`-subset.
    Random(u64),
}

impl fmt::Display for FixedGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixedGeometry::CompactUla => f.write_str("compact"),
            FixedGeometry::SparseUla => f.write_str("sparse"),
            FixedGeometry::Nested => f.write_str("nested"),
            FixedGeometry::Coprime => f.write_str("coprime"),
            FixedGeometry::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for FixedGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "compact" | "compact_ula" => Ok(FixedGeometry::CompactUla),
            "sparse" | "sparse_ula" => Ok(FixedGeometry::SparseUla),
            "nested" => Ok(FixedGeometry::Nested),
            "coprime" => Ok(FixedGeometry::Coprime),
            "random" => Ok(FixedGeometry::Random(0)),
            other => match other.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(FixedGeometry::Random)
                    .map_err(|_| Error::validation(format!("invalid random seed '{seed}'"))),
                None => Err(Error::validation(format!("unknown geometry '{other}'"))),
            },
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Sensor indices of `kind` for an `M`-element array, sorted.
pub fn fixed_geometry(kind: FixedGeometry, m: usize, l: usize) -> Result<Vec<usize>> {
    if l == 0 || l > m {
        return Err(Error::validation(format!("cannot place {l} of {m} sensors")));
    }
    let mut idx: Vec<usize> = match kind {
        FixedGeometry::CompactUla => (0..l).collect(),
        FixedGeometry::SparseUla => (0..l).map(|i| 2 * i).collect(),
        FixedGeometry::Nested => {
            let n1 = l.div_ceil(2);
            let n2 = l - n1;
            (0..n1).chain((1..=n2).map(|k| (n1 + 1) * k - 1)).collect()
        }
        FixedGeometry::Coprime => {
            // most balanced pair wins when several exist
            let (p, q) = (2..)
                .map(|p| (p, l + 1 - p))
                .take_while(|&(p, q)| p < q)
                .filter(|&(p, q)| gcd(p, q) == 1)
                .last()
                .ok_or_else(|| Error::validation(format!("no coprime pair p < q with p + q - 1 = {l}")))?;
            (0..q).map(|n| p * n).chain((1..p).map(|k| q * k)).collect()
        }
        FixedGeometry::Random(seed) => {
            let mut rng = rng_from_seed(seed);
            sample(&mut rng, m, l).into_vec()
        }
    };
    idx.sort_unstable();
    if let Some(&last) = idx.last().filter(|&&i| i >= m) {
        return Err(Error::validation(format!(
            "{kind} geometry with {l} sensors needs index {last}, array has {m}"
        )));
    }
    validate_support(&idx, m)
}

/// Writes `method,support,lambda,sinr_db`; support indices are `;`-joined.
pub fn write_selection_csv<W: Write>(out: W, rows: &[(&str, &SelectionReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "support", "lambda", "sinr_db"])?;
    for (label, r) in rows {
        w.write_record([
            label.to_string(),
            r.support.iter().join(";"),
            r.lambda_used.map(|l| l.to_string()).unwrap_or_default(),
            r.sinr_db.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<selection csv>", e))?;
    Ok(())
}

pub fn save_selection_csv(path: &Path, rows: &[(&str, &SelectionReport)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_selection_csv(std::io::BufWriter::new(file), rows)
}
