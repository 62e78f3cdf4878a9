//! ADMM for the ℓ1-penalized (optionally reweighted) minimum-output-power
//! problem
//!
//! ```text
//! min_w  wᴴR_x w + λ‖w‖₁   s.t.  |wᴴa₀|² ≥ 1
//! ```
//!
//! split as `w = v`. Every iteration is closed form:
//!
//! 1. `w̄ = soft-threshold(v − u, τ)` with `τ = λ/ρ` (or `λ/(ρ(|v|+ε))`
//!    per entry for the reweighted penalty),
//! 2. `w = ` closest point to `w̄` with `|wᴴa₀| ≥ 1`,
//! 3. `v = ρ(2R_x + ρI)⁻¹(w + u)` using a factorization cached for the run,
//! 4. `u ← u + w − v`.
//!
//! The solver records the augmented Lagrangian and residuals per iteration
//! so convergence can be checked after the fact.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{distance, inner, norm_sqr, ComplexVector, HermitianMatrix, HpdFactor};
use crate::signal_model::{complex_gaussian, rng_from_seed};

/// Feasibility tolerance on `|wᴴa₀|² ≥ 1`.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Tolerance on KKT residuals at termination.
pub const KKT_TOL: f64 = 1e-6;

/// Penalty used in the `w`-step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Plain `λ‖w‖₁`.
    PlainL1,
    /// `λ‖w ⊘ (|g| + ε)‖₁` with `g` the previous `v` iterate.
    Reweighted,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::PlainL1 => "plain_l1",
            Variant::Reweighted => "reweighted",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" | "plain_l1" | "l1" => Ok(Variant::PlainL1),
            "reweighted" | "reweighted_l1" => Ok(Variant::Reweighted),
            other => Err(Error::validation(format!("unknown ADMM variant '{other}'"))),
        }
    }
}

/// How the augmented Lagrangian parameter is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoChoice {
    /// Exactly the convergence bound from [`rho_lower_bound`].
    Auto,
    /// The given value; a warning is logged when it is below the bound.
    Fixed(f64),
    /// `max(bound, value)`.
    AtLeast(f64),
}

impl RhoChoice {
    /// The ρ that [`admm_solve`] would use for this covariance.
    pub fn resolve(self, rx: &HermitianMatrix) -> Result<f64> {
        resolve_rho(self, rho_lower_bound(rx).ok())
    }
}

impl fmt::Display for RhoChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoChoice::Auto => f.write_str("auto"),
            RhoChoice::Fixed(v) => write!(f, "{v}"),
            RhoChoice::AtLeast(v) => write!(f, "atleast:{v}"),
        }
    }
}

impl FromStr for RhoChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RhoChoice::Auto);
        }
        let (ctor, num): (fn(f64) -> RhoChoice, &str) = match s.strip_prefix("atleast:") {
            Some(rest) => (RhoChoice::AtLeast, rest),
            None => (RhoChoice::Fixed, s),
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("invalid rho '{s}'")))?;
        Ok(ctor(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub kkt: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: FEASIBILITY_TOL,
            kkt: KKT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmConfig {
    /// Sparsity weight λ.
    pub lambda: f64,
    pub rho: RhoChoice,
    /// Reweighting stabilizer ε.
    pub epsilon: f64,
    /// Stop once `‖w − v‖₂ ≤ η`.
    pub eta: f64,
    pub k_max: usize,
    pub variant: Variant,
    /// Seed for the complex standard normal `v` initialization.
    pub init_seed: u64,
    /// Initial scaled dual; zero when `None`.
    pub u_init: Option<ComplexVector>,
    /// Keep every `(w, v, u)` iterate in the result (debugging only).
    pub keep_iterates: bool,
    pub tolerances: Tolerances,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            lambda: 1.0,
            rho: RhoChoice::Auto,
            epsilon: 1e-10,
            eta: 1e-12,
            k_max: 1000,
            variant: Variant::Reweighted,
            init_seed: 0,
            u_init: None,
            keep_iterates: false,
            tolerances: Tolerances::default(),
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive(self.lambda, "lambda")?;
        positive(self.epsilon, "epsilon")?;
        positive(self.eta, "eta")?;
        match self.rho {
            RhoChoice::Auto => {}
            RhoChoice::Fixed(v) | RhoChoice::AtLeast(v) => positive(v, "rho")?,
        }
        if self.k_max == 0 {
            return Err(Error::validation("k_max must be at least 1"));
        }
        Ok(())
    }
}

/// One `(w, v, u)` iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub w: ComplexVector,
    pub v: ComplexVector,
    pub u: ComplexVector,
    pub k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ResidualMet,
    IterCap,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ResidualMet => "residual_met",
            Termination::IterCap => "iter_cap",
        })
    }
}

/// Residuals of the stationarity system with `y = ρu`. The dual of the
/// inequality constraint is never formed by the algorithm and is not reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport {
    /// `‖2R_x v − ρu‖₂`.
    pub stationarity_residual: f64,
    /// `‖w − v‖₂`.
    pub primal_residual: f64,
    /// `(1 − |wᴴa₀|²)₊`.
    pub feasibility_gap: f64,
}

impl KktReport {
    pub fn satisfied(&self, tol: &Tolerances) -> bool {
        self.stationarity_residual <= tol.kkt
            && self.primal_residual <= tol.kkt
            && self.feasibility_gap <= tol.feasibility
    }
}

/// Norms of the last change in each variable.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepSizes {
    pub w: f64,
    pub v: f64,
    pub u: f64,
}

#[derive(Clone, Debug)]
pub struct AdmmResult {
    pub state: AdmmState,
    pub rho: f64,
    /// `None` when `R_x` is singular.
    pub rho_bound: Option<f64>,
    pub lagrangian_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub feasibility_trace: Vec<f64>,
    pub termination: Termination,
    pub kkt: KktReport,
    pub last_step: StepSizes,
    /// The last shrinkage step zeroed every entry, so `w` is just the
    /// minimum-norm feasible point `a₀/‖a₀‖²` and carries no support
    /// information. Happens when λ is large relative to ρ.
    pub collapsed: bool,
    /// Populated only with [`AdmmConfig::keep_iterates`].
    pub iterates: Option<Vec<AdmmState>>,
}

impl AdmmResult {
    pub fn iterations(&self) -> usize {
        self.lagrangian_trace.len()
    }

    pub fn weight(&self) -> &ComplexVector {
        &self.state.w
    }

    /// Writes `k,lagrangian,primal_residual,feasibility_gap` rows, `k` from 1.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["k", "lagrangian", "primal_residual", "feasibility_gap"])?;
        for (i, ((l, r), f)) in self
            .lagrangian_trace
            .iter()
            .zip(&self.residual_trace)
            .zip(&self.feasibility_trace)
            .enumerate()
        {
            wr.write_record([(i + 1).to_string(), l.to_string(), r.to_string(), f.to_string()])?;
        }
        wr.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }

    pub fn save_trace_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_trace_csv(std::io::BufWriter::new(file))
    }
}

#[inline]
fn shrink(d: Complex64, tau: f64) -> Complex64 {
    let r = d.norm();
    if r <= tau {
        Complex64::new(0.0, 0.0)
    } else {
        d * ((r - tau) / r)
    }
}

/// Entrywise complex soft threshold `sign(d) ⊙ (|d| − τ)₊`; phase is kept.
pub fn soft_threshold(d: &[Complex64], tau: f64) -> ComplexVector {
    assert!(tau >= 0.0, "threshold must be non-negative");
    ComplexVector::from_vec_unchecked(d.iter().map(|&z| shrink(z, tau)).collect())
}

/// Soft threshold with per-entry `τ_i = λ / (ρ(|g_i| + ε))`.
pub fn reweighted_threshold(d: &[Complex64], g: &[Complex64], lambda: f64, rho: f64, epsilon: f64) -> ComplexVector {
    assert_eq!(d.len(), g.len());
    assert!(epsilon > 0.0, "epsilon must be positive");
    ComplexVector::from_vec_unchecked(
        d.iter()
            .zip(g)
            .map(|(&z, gi)| shrink(z, lambda / (rho * (gi.norm() + epsilon))))
            .collect(),
    )
}

fn project_into(wbar: &[Complex64], a0: &[Complex64], a0_norm_sqr: f64, out: &mut [Complex64]) {
    let c = inner(wbar, a0);
    let mag = c.norm();
    out.copy_from_slice(wbar);
    if mag >= 1.0 {
        return;
    }
    // ŵ = w̄ + β a₀ with β chosen so that ŵᴴa₀ = c/|c|; the zero-response
    // case moves straight along a₀ to unit response.
    let beta = if mag == 0.0 {
        Complex64::new(1.0 / a0_norm_sqr, 0.0)
    } else {
        c.conj() * ((1.0 - mag) / (a0_norm_sqr * mag))
    };
    for (o, a) in out.iter_mut().zip(a0) {
        *o += beta * a;
    }
}

/// Closest point to `w̄` (in ℓ2) satisfying `|wᴴa₀| ≥ 1`.
///
/// Feasible inputs are returned unchanged. Infeasible ones move along `a₀`
/// onto the boundary `|wᴴa₀| = 1`, keeping the phase of `w̄ᴴa₀`; when that
/// inner product is exactly zero the result is `w̄ + a₀/‖a₀‖²`.
pub fn project_constraint(wbar: &[Complex64], a0: &[Complex64]) -> Result<ComplexVector> {
    if wbar.len() != a0.len() {
        return Err(Error::validation("projection: length mismatch"));
    }
    let a0_norm_sqr = norm_sqr(a0);
    if a0_norm_sqr == 0.0 {
        return Err(Error::validation("projection: steering vector is zero"));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a0.len()];
    project_into(wbar, a0, a0_norm_sqr, &mut out);
    Ok(ComplexVector::from_vec_unchecked(out))
}

/// Cached solver for the `v`-step: `v = ρ(2R_x + ρI)⁻¹(w + u)`.
#[derive(Clone, Debug)]
pub struct VUpdate {
    factor: HpdFactor,
    rho: f64,
    rhs: Vec<Complex64>,
}

impl VUpdate {
    pub fn new(rx: &HermitianMatrix, rho: f64) -> Result<Self> {
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::validation(format!("rho must be positive, got {rho}")));
        }
        let factor = HpdFactor::new(&rx.scale(2.0).add_identity(rho))?;
        Ok(VUpdate {
            rhs: vec![Complex64::new(0.0, 0.0); rx.dim()],
            factor,
            rho,
        })
    }

    pub fn apply_into(&mut self, w: &[Complex64], u: &[Complex64], out: &mut [Complex64]) {
        for ((r, a), b) in self.rhs.iter_mut().zip(w).zip(u) {
            *r = (a + b) * self.rho;
        }
        self.factor.solve_into(&self.rhs, out);
    }
}

/// One-shot `v`-step.
pub fn v_update(w: &[Complex64], u: &[Complex64], rx: &HermitianMatrix, rho: f64) -> Result<ComplexVector> {
    if w.len() != rx.dim() || u.len() != rx.dim() {
        return Err(Error::validation("v-update: length mismatch"));
    }
    let mut op = VUpdate::new(rx, rho)?;
    let mut out = vec![Complex64::new(0.0, 0.0); rx.dim()];
    op.apply_into(w, u, &mut out);
    Ok(ComplexVector::from_vec_unchecked(out))
}

/// Weighting of the ℓ1 term in the augmented Lagrangian.
#[derive(Clone, Copy, Debug)]
pub enum L1Weights<'a> {
    Uniform,
    /// `1 ⊘ (|g| + ε)`.
    Reweighted {
        g: &'a [Complex64],
        epsilon: f64,
    },
}

/// `λ‖w‖₁ + vᴴR_x v + (ρ/2)(‖w − v + u‖² − ‖u‖²)`, with the reweighted
/// ℓ1 term when requested.
pub fn augmented_lagrangian(
    w: &[Complex64],
    v: &[Complex64],
    u: &[Complex64],
    rx: &HermitianMatrix,
    lambda: f64,
    rho: f64,
    weights: L1Weights<'_>,
) -> f64 {
    let l1: f64 = match weights {
        L1Weights::Uniform => w.iter().map(|z| z.norm()).sum(),
        L1Weights::Reweighted { g, epsilon } => w.iter().zip(g).map(|(z, gi)| z.norm() / (gi.norm() + epsilon)).sum(),
    };
    // ‖w−v+u‖² − ‖u‖² expanded to avoid cancellation when u is large.
    let mut diff_sq = 0.0;
    let mut cross = 0.0;
    for ((wi, vi), ui) in w.iter().zip(v).zip(u) {
        let d = wi - vi;
        diff_sq += d.norm_sqr();
        cross += (ui.conj() * d).re;
    }
    lambda * l1 + rx.quad_form(v) + 0.5 * rho * (diff_sq + 2.0 * cross)
}

/// Smallest ρ for which the plain-ℓ1 iteration provably converges:
/// `max{2√2 λ_max, 2λ_max²/λ_min}` of `R_x`.
pub fn rho_lower_bound(rx: &HermitianMatrix) -> Result<f64> {
    if !rx.is_positive_definite() {
        return Err(Error::Singular(format!(
            "rho bound needs a positive-definite R_x (eigenvalues {:e} .. {:e})",
            rx.lambda_min(),
            rx.lambda_max()
        )));
    }
    let (lmin, lmax) = (rx.lambda_min(), rx.lambda_max());
    Ok((2.0 * std::f64::consts::SQRT_2 * lmax).max(2.0 * lmax * lmax / lmin))
}

/// Strong-convexity modulus of the Lagrangian in `v`: `2λ_min(R_x) + ρ`.
pub fn v_strong_convexity(rx: &HermitianMatrix, rho: f64) -> f64 {
    2.0 * rx.lambda_min() + rho
}

/// Coefficient `4λ_max²/ρ − λ_min − ρ/2` multiplying `‖Δv‖²` in the
/// per-iteration descent bound; negative means guaranteed decrease.
pub fn descent_coefficient(rx: &HermitianMatrix, rho: f64) -> f64 {
    let (lmin, lmax) = (rx.lambda_min(), rx.lambda_max());
    4.0 * lmax * lmax / rho - lmin - 0.5 * rho
}

/// KKT residuals of `state` (see [`KktReport`]).
pub fn kkt_residuals(state: &AdmmState, rx: &HermitianMatrix, rho: f64, a0: &[Complex64]) -> KktReport {
    let rv = rx.matvec(&state.v);
    let stationarity = rv
        .iter()
        .zip(state.u.iter())
        .map(|(r, u)| (r * 2.0 - u * rho).norm_sqr())
        .sum::<f64>()
        .sqrt();
    KktReport {
        stationarity_residual: stationarity,
        primal_residual: distance(&state.w, &state.v),
        feasibility_gap: (1.0 - inner(&state.w, a0).norm_sqr()).max(0.0),
    }
}

fn resolve_rho(choice: RhoChoice, bound: Option<f64>) -> Result<f64> {
    match (choice, bound) {
        (RhoChoice::Fixed(v), _) => Ok(v),
        (RhoChoice::Auto, Some(b)) => Ok(b),
        (RhoChoice::AtLeast(v), Some(b)) => Ok(v.max(b)),
        (RhoChoice::AtLeast(v), None) => Ok(v),
        (RhoChoice::Auto, None) => Err(Error::Singular(
            "cannot derive rho automatically from a singular R_x".into(),
        )),
    }
}

// warn about a sub-bound ρ once per process, not once per solve
static RHO_WARNED: AtomicBool = AtomicBool::new(false);

/// Runs the ADMM iteration to `‖w − v‖ ≤ η` or `k_max` iterations.
///
/// `v` starts from a complex standard normal draw seeded by
/// `cfg.init_seed`; `u` from `cfg.u_init` or zero. The result is a pure
/// function of `(cfg, rx, a0)`.
pub fn admm_solve(cfg: &AdmmConfig, rx: &HermitianMatrix, a0: &ComplexVector) -> Result<AdmmResult> {
    cfg.validate()?;
    let m = rx.dim();
    if a0.len() != m {
        return Err(Error::validation(format!(
            "steering vector length {} does not match covariance dimension {m}",
            a0.len()
        )));
    }
    let a0_norm_sqr = norm_sqr(a0);
    if a0_norm_sqr == 0.0 {
        return Err(Error::validation("steering vector is zero"));
    }

    let rho_bound = rho_lower_bound(rx).ok();
    let rho = resolve_rho(cfg.rho, rho_bound)?;
    if let Some(b) = rho_bound {
        if rho < b && !RHO_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("rho = {rho:e} is below the convergence bound {b:e}; monotone descent is not guaranteed");
        }
    }
    let mut v_step = VUpdate::new(rx, rho)?;

    let mut rng = rng_from_seed(cfg.init_seed);
    let mut v: Vec<Complex64> = (0..m).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let mut u: Vec<Complex64> = match &cfg.u_init {
        Some(u0) if u0.len() != m => {
            return Err(Error::validation("u_init length does not match covariance dimension"));
        }
        Some(u0) => u0.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); m],
    };
    let mut w = vec![Complex64::new(0.0, 0.0); m];
    let mut w_prev = w.clone();
    let mut wbar = vec![Complex64::new(0.0, 0.0); m];
    let mut v_next = vec![Complex64::new(0.0, 0.0); m];

    let cap = cfg.k_max.min(1 << 20);
    let mut lagrangian_trace = Vec::with_capacity(cap);
    let mut residual_trace = Vec::with_capacity(cap);
    let mut feasibility_trace = Vec::with_capacity(cap);
    let mut iterates = cfg.keep_iterates.then(Vec::new);
    let tau = cfg.lambda / rho;
    let mut last_step = StepSizes::default();
    let mut termination = Termination::IterCap;

    for k in 0..cfg.k_max {
        // w̄ from d = v − u
        match cfg.variant {
            Variant::PlainL1 => {
                for ((o, vi), ui) in wbar.iter_mut().zip(&v).zip(&u) {
                    *o = shrink(vi - ui, tau);
                }
            }
            Variant::Reweighted => {
                for ((o, vi), ui) in wbar.iter_mut().zip(&v).zip(&u) {
                    *o = shrink(vi - ui, tau / (vi.norm() + cfg.epsilon));
                }
            }
        }
        std::mem::swap(&mut w, &mut w_prev);
        project_into(&wbar, a0, a0_norm_sqr, &mut w);
        v_step.apply_into(&w, &u, &mut v_next);

        let mut du = 0.0;
        for ((ui, wi), vi) in u.iter_mut().zip(&w).zip(&v_next) {
            let step = wi - vi;
            du += step.norm_sqr();
            *ui += step;
        }
        let weights = match cfg.variant {
            Variant::PlainL1 => L1Weights::Uniform,
            Variant::Reweighted => L1Weights::Reweighted {
                g: &v,
                epsilon: cfg.epsilon,
            },
        };
        lagrangian_trace.push(augmented_lagrangian(&w, &v_next, &u, rx, cfg.lambda, rho, weights));
        last_step = StepSizes {
            w: if k == 0 { f64::NAN } else { distance(&w, &w_prev) },
            v: distance(&v_next, &v),
            u: du.sqrt(),
        };
        std::mem::swap(&mut v, &mut v_next);

        let residual = distance(&w, &v);
        residual_trace.push(residual);
        feasibility_trace.push((1.0 - inner(&w, a0).norm_sqr()).max(0.0));
        if let Some(store) = iterates.as_mut() {
            store.push(AdmmState {
                w: ComplexVector::from_vec_unchecked(w.clone()),
                v: ComplexVector::from_vec_unchecked(v.clone()),
                u: ComplexVector::from_vec_unchecked(u.clone()),
                k: k + 1,
            });
        }
        if residual <= cfg.eta {
            termination = Termination::ResidualMet;
            break;
        }
    }

    if w.iter()
        .chain(&v)
        .chain(&u)
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Singular("ADMM iterates diverged to non-finite values".into()));
    }
    let state = AdmmState {
        k: lagrangian_trace.len(),
        w: ComplexVector::from_vec_unchecked(w),
        v: ComplexVector::from_vec_unchecked(v),
        u: ComplexVector::from_vec_unchecked(u),
    };
    let kkt = kkt_residuals(&state, rx, rho, a0);
    let collapsed = wbar.iter().all(|z| z.re == 0.0 && z.im == 0.0);
    Ok(AdmmResult {
        state,
        rho,
        rho_bound,
        lagrangian_trace,
        residual_trace,
        feasibility_trace,
        termination,
        kkt,
        last_step,
        collapsed,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{norm, solve_hpd};
    use crate::signal_model::{data_covariance_true, generate_snapshots, sample_covariance, Scenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn first_example_rx() -> (Scenario, HermitianMatrix) {
        let s = Scenario::from_db(12, 0.0, 10.0, &[(-10.0, 20.0), (10.0, 20.0)]).unwrap();
        let rx = sample_covariance(&generate_snapshots(&s, 100, 1).unwrap());
        (s, rx)
    }

    #[test]
    fn soft_threshold_examples() {
        let out = soft_threshold(&[c(1.0, 0.0), c(0.1, 0.0)], 0.25);
        assert!((out[0] - c(0.75, 0.0)).norm() < 1e-15);
        assert_eq!(out[1], c(0.0, 0.0));
        let out = soft_threshold(&[c(3.0, 4.0)], 1.0);
        assert!((out[0] - c(2.4, 3.2)).norm() < 1e-15);
        let out = soft_threshold(&[c(-2.0, 0.0)], 0.0);
        assert_eq!(out[0], c(-2.0, 0.0));
    }

    #[test]
    fn reweighted_threshold_examples() {
        let out = reweighted_threshold(&[c(1.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)], 1.0, 1.0, 1.0);
        assert!((out[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(out[1], c(0.0, 0.0));

        // huge g → threshold vanishes
        let out = reweighted_threshold(&[c(0.3, -0.2)], &[c(1e12, 0.0)], 1.0, 1.0, 1e-10);
        assert!((out[0] - c(0.3, -0.2)).norm() < 1e-11);

        // g = 0 → uniform λ/(ρε)
        let d = [c(2.0, 0.0), c(0.0, -0.5)];
        let out = reweighted_threshold(&d, &[c(0.0, 0.0); 2], 0.5, 2.0, 0.5);
        let uni = soft_threshold(&d, 0.5);
        assert!(distance(&out, &uni) < 1e-15);
    }

    #[test]
    fn projection_scalar_golden_value() {
        let w = project_constraint(&[c(1.0, 0.0)], &[c(0.5, 0.0)]).unwrap();
        assert!((w[0] - c(2.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn projection_leaves_feasible_points() {
        let a0 = [c(1.0, 0.0), c(0.0, 1.0)];
        // w̄ᴴa₀ = 3
        let wbar = [c(3.0, 0.0), c(0.0, 0.0)];
        let w = project_constraint(&wbar, &a0).unwrap();
        assert_eq!(w.as_slice(), &wbar);
    }

    #[test]
    fn projection_degenerate_direction() {
        let a0 = [c(1.0, 0.0), c(1.0, 0.0)];
        let wbar = [c(1.0, 0.0), c(-1.0, 0.0)];
        let w = project_constraint(&wbar, &a0).unwrap();
        assert!((w[0] - c(1.5, 0.0)).norm() < 1e-15 && (w[1] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!((inner(&w, &a0).norm() - 1.0).abs() < 1e-15);
        assert!(project_constraint(&wbar, &[c(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn projection_matches_phase_search_oracle() {
        // Only the a₀ component of w̄ affects wᴴa₀, so the distance from w̄ to
        // {|wᴴa₀| = 1} is min_φ |e^{jφ} − w̄ᴴa₀| / ‖a₀‖.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a0: Vec<Complex64> = (0..6)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut wbar: Vec<Complex64> = (0..6)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let scale = 0.9 / inner(&wbar, &a0).norm().max(1.0);
            wbar.iter_mut().for_each(|z| *z *= scale);
            let cc = inner(&wbar, &a0);
            assert!(cc.norm() < 1.0);
            let an = norm(&a0);
            let n_grid = 200_000;
            let (best_d, best_phi) = (0..n_grid)
                .map(|i| {
                    let phi = 2.0 * std::f64::consts::PI * i as f64 / n_grid as f64;
                    ((Complex64::from_polar(1.0, phi) - cc).norm() / an, phi)
                })
                .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc });
            let w = project_constraint(&wbar, &a0).unwrap();
            assert!((distance(&w, &wbar) - best_d).abs() < 1e-8);
            let oracle_point: Vec<Complex64> = {
                let beta = (Complex64::from_polar(1.0, best_phi) - cc).conj() / (an * an);
                wbar.iter().zip(&a0).map(|(x, a)| x + beta * a).collect()
            };
            assert!(distance(&w, &oracle_point) < 1e-4);
            assert!((inner(&w, &a0).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn v_update_examples() {
        let w = [c(1.0, 2.0), c(-1.0, 0.5)];
        let u = [c(0.5, 0.0), c(0.0, -1.0)];
        let v = v_update(&w, &u, &HermitianMatrix::identity(2), 2.0).unwrap();
        assert!((v[0] - (w[0] + u[0]) * 0.5).norm() < 1e-15);
        assert!((v[1] - (w[1] + u[1]) * 0.5).norm() < 1e-15);

        let r = [3.0, 0.25];
        let rho = 1.7;
        let v = v_update(&w, &u, &HermitianMatrix::diagonal(&r), rho).unwrap();
        for i in 0..2 {
            assert!((v[i] - (w[i] + u[i]) * (rho / (2.0 * r[i] + rho))).norm() < 1e-15);
        }
    }

    #[test]
    fn v_update_agrees_with_direct_solve() {
        let (_, rx) = first_example_rx();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w: Vec<Complex64> = (0..12)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let u: Vec<Complex64> = (0..12)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let rho = 37.0;
        let v = v_update(&w, &u, &rx, rho).unwrap();
        let rhs = ComplexVector::new(w.iter().zip(&u).map(|(a, b)| (a + b) * rho).collect()).unwrap();
        let oracle = solve_hpd(&rx.scale(2.0).add_identity(rho), &rhs).unwrap();
        assert!(distance(&v, &oracle) <= 1e-10 * oracle.norm());
        let lhs = rx.scale(2.0).add_identity(rho).matvec(&v);
        assert!(distance(&lhs, &rhs) <= 1e-10 * rhs.norm());
    }

    #[test]
    fn lagrangian_simple_cases() {
        let rx = HermitianMatrix::diagonal(&[2.0, 1.0]);
        let w = [c(1.0, -1.0), c(0.0, 3.0)];
        let z = [c(0.0, 0.0); 2];
        let l = augmented_lagrangian(&w, &w, &z, &rx, 0.7, 5.0, L1Weights::Uniform);
        let expect = 0.7 * (2f64.sqrt() + 3.0) + (2.0 * 2.0 + 9.0);
        assert!((l - expect).abs() < 1e-12);
        assert_eq!(augmented_lagrangian(&z, &z, &z, &rx, 0.7, 5.0, L1Weights::Uniform), 0.0);
    }

    #[test]
    fn rho_bound_examples() {
        let b = rho_lower_bound(&HermitianMatrix::identity(3)).unwrap();
        assert!((b - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let b = rho_lower_bound(&HermitianMatrix::diagonal(&[1.0, 4.0])).unwrap();
        assert!((b - 32.0).abs() < 1e-12);
        assert!(rho_lower_bound(&HermitianMatrix::diagonal(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn descent_coefficient_negative_at_bound() {
        let (_, rx) = first_example_rx();
        let rho = rho_lower_bound(&rx).unwrap();
        assert!(descent_coefficient(&rx, rho) < 0.0);
        assert!((v_strong_convexity(&rx, rho) - (2.0 * rx.lambda_min() + rho)).abs() < 1e-9);
    }

    #[test]
    fn constructed_kkt_point() {
        let rx = HermitianMatrix::diagonal(&[2.0, 1.0, 3.0]);
        let a0 = [c(1.0, 0.0); 3];
        let w = ComplexVector::new(vec![c(0.5, 0.0), c(0.3, 0.0), c(0.4, 0.0)]).unwrap();
        let rho = 10.0;
        let u = rx.matvec(&w).scale(c(2.0 / rho, 0.0));
        let state = AdmmState {
            w: w.clone(),
            v: w,
            u,
            k: 0,
        };
        let rep = kkt_residuals(&state, &rx, rho, &a0);
        assert!(rep.stationarity_residual <= 1e-12);
        assert!(rep.primal_residual <= 1e-12);
        assert!(rep.feasibility_gap <= 1e-12);
    }

    #[test]
    fn iterates_respect_identities() {
        let (s, rx) = first_example_rx();
        let a0 = s.soi_steering();
        for variant in [Variant::PlainL1, Variant::Reweighted] {
            let cfg = AdmmConfig {
                lambda: 5.0,
                k_max: 60,
                variant,
                keep_iterates: true,
                init_seed: 4,
                ..Default::default()
            };
            let res = admm_solve(&cfg, &rx, &a0).unwrap();
            let its = res.iterates.as_ref().unwrap();
            assert_eq!(its.len(), res.iterations());
            assert_eq!(res.residual_trace.len(), res.iterations());
            for (st, r) in its.iter().zip(&res.residual_trace) {
                // feasibility after every w-step
                assert!(inner(&st.w, &a0).norm_sqr() >= 1.0 - 1e-9);
                // u = (2/ρ) R_x v
                let rv = rx.matvec(&st.v).scale(c(2.0 / res.rho, 0.0));
                assert!(distance(&rv, &st.u) <= 1e-9 * (1.0 + st.u.norm()));
                let rep = kkt_residuals(st, &rx, res.rho, &a0);
                assert_eq!(rep.primal_residual, *r);
            }
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let (s, rx) = first_example_rx();
        let cfg = AdmmConfig {
            lambda: 2.0,
            k_max: 200,
            ..Default::default()
        };
        let a = admm_solve(&cfg, &rx, &s.soi_steering()).unwrap();
        let b = admm_solve(&cfg, &rx, &s.soi_steering()).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.lagrangian_trace, b.lagrangian_trace);
        let other = admm_solve(&AdmmConfig { init_seed: 99, ..cfg }, &rx, &s.soi_steering()).unwrap();
        assert_ne!(a.lagrangian_trace[0], other.lagrangian_trace[0]);
    }

    #[test]
    fn small_lambda_keeps_constraint() {
        let s = Scenario::from_db(8, 20.0, 0.0, &[(-30.0, 20.0)]).unwrap();
        let rx = data_covariance_true(&s);
        let cfg = AdmmConfig {
            lambda: 1e-9,
            variant: Variant::PlainL1,
            k_max: 300,
            ..Default::default()
        };
        let res = admm_solve(&cfg, &rx, &s.soi_steering()).unwrap();
        assert!(inner(res.weight(), &s.soi_steering()).norm_sqr() >= 1.0 - 1e-9);
    }

    #[test]
    fn residual_stop_fixed_point() {
        let s = Scenario::from_db(6, 0.0, 0.0, &[(40.0, 10.0)]).unwrap();
        let rx = data_covariance_true(&s);
        let eta = 1e-8;
        let cfg = AdmmConfig {
            lambda: 0.05,
            eta,
            k_max: 100_000,
            variant: Variant::PlainL1,
            ..Default::default()
        };
        let res = admm_solve(&cfg, &rx, &s.soi_steering()).unwrap();
        assert_eq!(res.termination, Termination::ResidualMet);
        assert!(*res.residual_trace.last().unwrap() <= eta);
        // u changes by exactly w − v in the last step
        assert!(res.last_step.u <= 10.0 * eta);
    }

    #[test]
    fn reweighted_trace_settles() {
        let (s, rx) = first_example_rx();
        let cfg = AdmmConfig {
            lambda: 1.0,
            rho: RhoChoice::Fixed(1e3),
            ..Default::default()
        };
        let res = admm_solve(&cfg, &rx, &s.soi_steering()).unwrap();
        let tr = &res.lagrangian_trace;
        let (lo, hi) = tr
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
        let tail = &tr[tr.len().saturating_sub(10)..];
        let (tlo, thi) = tail
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
        assert!(
            thi - tlo <= 1e-6 * (hi - lo),
            "tail spread {} of range {}",
            thi - tlo,
            hi - lo
        );
    }

    #[test]
    fn config_validation_and_parsing() {
        assert!(AdmmConfig {
            lambda: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdmmConfig {
            k_max: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdmmConfig {
            rho: RhoChoice::Fixed(-1.0),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!("auto".parse::<RhoChoice>().unwrap(), RhoChoice::Auto);
        assert_eq!("1e3".parse::<RhoChoice>().unwrap(), RhoChoice::Fixed(1e3));
        assert_eq!("atleast:5".parse::<RhoChoice>().unwrap(), RhoChoice::AtLeast(5.0));
        assert_eq!("plain".parse::<Variant>().unwrap(), Variant::PlainL1);
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let (s, rx) = first_example_rx();
        let res = admm_solve(
            &AdmmConfig {
                k_max: 5,
                ..Default::default()
            },
            &rx,
            &s.soi_steering(),
        )
        .unwrap();
        let mut buf = Vec::new();
        res.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,lagrangian,primal_residual,feasibility_gap");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("1,"));
    }

    #[test]
    fn results_are_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<AdmmResult>();
        check::<AdmmConfig>();
        check::<HermitianMatrix>();
    }
}
