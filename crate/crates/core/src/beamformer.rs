//! MVDR weights, output SINR, beampatterns and reduced-size re-solves on a
//! selected subarray.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{inner, solve_hpd, ComplexVector, HermitianMatrix};
use crate::signal_model::{interference_noise_covariance, linear_to_db, steering_vector, Scenario};

/// Floor applied to beampattern gains so exact nulls stay finite in CSV output.
pub const PATTERN_FLOOR_DB: f64 = -300.0;

/// Beamformer weight, optionally living on a subset of the full array.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerWeight {
    w: ComplexVector,
    support: Option<Vec<usize>>,
}

impl BeamformerWeight {
    pub fn full(w: ComplexVector) -> Self {
        BeamformerWeight { w, support: None }
    }

    /// `support` must be strictly increasing and match `w` in length.
    pub fn on_support(w: ComplexVector, support: Vec<usize>) -> Result<Self> {
        if support.len() != w.len() {
            return Err(Error::validation(format!(
                "weight length {} does not match support size {}",
                w.len(),
                support.len()
            )));
        }
        if support.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::validation("support indices must be strictly increasing"));
        }
        Ok(BeamformerWeight {
            w,
            support: Some(support),
        })
    }

    pub fn weights(&self) -> &ComplexVector {
        &self.w
    }

    pub fn support(&self) -> Option<&[usize]> {
        self.support.as_deref()
    }

    /// Zero-filled weight over the full `m`-sensor array.
    pub fn expand(&self, m: usize) -> Result<ComplexVector> {
        match &self.support {
            None => {
                if self.w.len() != m {
                    return Err(Error::validation(format!(
                        "weight length {} does not match array size {m}",
                        self.w.len()
                    )));
                }
                Ok(self.w.clone())
            }
            Some(sup) => {
                if let Some(&bad) = sup.iter().find(|&&i| i >= m) {
                    return Err(Error::validation(format!("support index {bad} >= array size {m}")));
                }
                let mut full = vec![Complex64::new(0.0, 0.0); m];
                for (&i, &z) in sup.iter().zip(self.w.iter()) {
                    full[i] = z;
                }
                Ok(ComplexVector::from_vec_unchecked(full))
            }
        }
    }
}

/// `w = R⁻¹a₀ / (a₀ᴴR⁻¹a₀)`.
pub fn mvdr_weights(r: &HermitianMatrix, a0: &ComplexVector) -> Result<BeamformerWeight> {
    if a0.is_zero() {
        return Err(Error::validation("steering vector is zero"));
    }
    let x = solve_hpd(r, a0)?;
    let denom = inner(a0, &x).re;
    Ok(BeamformerWeight::full(x.scale(Complex64::new(1.0 / denom, 0.0))))
}

/// Evaluates output SINR against a scenario's true interference-plus-noise
/// covariance. Build once, evaluate many weights.
#[derive(Clone, Debug)]
pub struct SinrEvaluator {
    soi_power: f64,
    a0: ComplexVector,
    r_in: HermitianMatrix,
}

impl SinrEvaluator {
    pub fn new(s: &Scenario) -> Self {
        SinrEvaluator {
            soi_power: s.soi_power(),
            a0: s.soi_steering(),
            r_in: interference_noise_covariance(s),
        }
    }

    pub fn m(&self) -> usize {
        self.a0.len()
    }

    pub fn interference_noise(&self) -> &HermitianMatrix {
        &self.r_in
    }

    /// Linear SINR `σ_s²|wᴴa₀|² / (wᴴR_{i+n}w)` on the weight's support.
    pub fn sinr_linear(&self, w: &BeamformerWeight) -> Result<f64> {
        let (a0, r_in) = match w.support() {
            None => {
                if w.weights().len() != self.m() {
                    return Err(Error::validation(format!(
                        "weight length {} does not match array size {}",
                        w.weights().len(),
                        self.m()
                    )));
                }
                (self.a0.clone(), self.r_in.clone())
            }
            Some(sup) => (self.a0.restrict(sup), self.r_in.restrict(sup)?),
        };
        let ww = w.weights();
        let signal = self.soi_power * inner(ww, &a0).norm_sqr();
        let noise = r_in.quad_form(ww);
        if noise.is_nan() || noise <= 0.0 {
            return Err(Error::validation("weight has zero output power"));
        }
        Ok(signal / noise)
    }

    pub fn sinr_db(&self, w: &BeamformerWeight) -> Result<f64> {
        self.sinr_linear(w).map(linear_to_db)
    }

    /// `σ_s² a₀ᴴ R_{i+n}⁻¹ a₀` in dB.
    pub fn optimal_db(&self) -> Result<f64> {
        let x = solve_hpd(&self.r_in, &self.a0)?;
        Ok(linear_to_db(self.soi_power * inner(&self.a0, &x).re))
    }
}

/// Output SINR in dB, using the scenario's true `R_{i+n}` restricted to the
/// weight's support.
pub fn output_sinr(w: &BeamformerWeight, s: &Scenario) -> Result<f64> {
    SinrEvaluator::new(s).sinr_db(w)
}

/// Optimum whole-array output SINR in dB.
pub fn optimal_sinr(s: &Scenario) -> Result<f64> {
    SinrEvaluator::new(s).optimal_db()
}

/// Normalized magnitude response `20 log₁₀|wᴴa(θ)|`, peak at 0 dB.
/// Unselected sensors contribute zero weight.
pub fn beampattern(w: &BeamformerWeight, grid_deg: &[f64], m_full: usize) -> Result<Vec<f64>> {
    if grid_deg.is_empty() {
        return Err(Error::validation("beampattern grid is empty"));
    }
    let full = w.expand(m_full)?;
    if full.is_zero() {
        return Err(Error::validation("beampattern of an all-zero weight"));
    }
    let mags: Vec<f64> = grid_deg
        .iter()
        .map(|&theta| inner(&full, &steering_vector(theta, m_full)).norm())
        .collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::validation("weight has zero response over the whole grid"));
    }
    Ok(mags
        .iter()
        .map(|&m| (20.0 * (m / peak).log10()).max(PATTERN_FLOOR_DB))
        .collect())
}

/// Writes `angle_deg,gain_db` rows.
pub fn write_beampattern_csv(path: &Path, grid_deg: &[f64], gains_db: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["angle_deg", "gain_db"])?;
    for (a, g) in grid_deg.iter().zip(gains_db) {
        out.write_record([a.to_string(), g.to_string()])?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn validate_support(support: &[usize], m: usize) -> Result<Vec<usize>> {
    if support.is_empty() {
        return Err(Error::validation("support must not be empty"));
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::validation("support contains duplicate indices"));
    }
    if let Some(&bad) = sorted.last().filter(|&&i| i >= m) {
        return Err(Error::validation(format!("support index {bad} >= array size {m}")));
    }
    Ok(sorted)
}

/// MVDR re-solved on the rows/columns of `r` (and entries of `a₀`) selected
/// by `support`. The returned weight records its (sorted) support.
pub fn reduced_mvdr(support: &[usize], s: &Scenario, r: &HermitianMatrix) -> Result<BeamformerWeight> {
    if r.dim() != s.m() {
        return Err(Error::validation(format!(
            "covariance dimension {} does not match array size {}",
            r.dim(),
            s.m()
        )));
    }
    let support = validate_support(support, s.m())?;
    let a0 = s.soi_steering().restrict(&support);
    let r_sub = r.restrict(&support)?;
    let w = mvdr_weights(&r_sub, &a0)?;
    BeamformerWeight::on_support(w.weights().clone(), support)
}
