//! Narrowband far-field model for a half-wavelength uniform linear array:
//! steering vectors, true and sample covariances, synthetic snapshots.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{ComplexVector, HermitianMatrix};

/// One interfering plane-wave source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interferer {
    pub doa_deg: f64,
    /// Linear power σ_k².
    pub power: f64,
}

/// One signal of interest plus `K` uncorrelated interferers in white noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    m: usize,
    soi_doa_deg: f64,
    soi_power: f64,
    interferers: Vec<Interferer>,
    noise_power: f64,
}

fn check_doa(doa: f64, what: &str) -> Result<()> {
    if !(doa > -90.0 && doa < 90.0) {
        return Err(Error::validation(format!(
            "{what} DOA {doa} deg outside the open interval (-90, 90)"
        )));
    }
    Ok(())
}

fn check_power(p: f64, what: &str) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::validation(format!("{what} power must be positive, got {p}")));
    }
    Ok(())
}

impl Scenario {
    pub fn new(
        m: usize,
        soi_doa_deg: f64,
        soi_power: f64,
        interferers: Vec<Interferer>,
        noise_power: f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::validation("sensor count must be at least 1"));
        }
        check_doa(soi_doa_deg, "SOI")?;
        check_power(soi_power, "SOI")?;
        check_power(noise_power, "noise")?;
        for (k, i) in interferers.iter().enumerate() {
            check_doa(i.doa_deg, &format!("interferer {k}"))?;
            check_power(i.power, &format!("interferer {k}"))?;
        }
        Ok(Scenario {
            m,
            soi_doa_deg,
            soi_power,
            interferers,
            noise_power,
        })
    }

    /// Unit noise power; SNR and per-interferer INR in dB.
    pub fn from_db(m: usize, soi_doa_deg: f64, snr_db: f64, interferers_db: &[(f64, f64)]) -> Result<Self> {
        let interferers = interferers_db
            .iter()
            .map(|&(doa_deg, inr_db)| Interferer {
                doa_deg,
                power: db_to_linear(inr_db),
            })
            .collect();
        Self::new(m, soi_doa_deg, db_to_linear(snr_db), interferers, 1.0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn soi_doa_deg(&self) -> f64 {
        self.soi_doa_deg
    }

    pub fn soi_power(&self) -> f64 {
        self.soi_power
    }

    pub fn interferers(&self) -> &[Interferer] {
        &self.interferers
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn soi_steering(&self) -> ComplexVector {
        steering_vector(self.soi_doa_deg, self.m)
    }

    /// Same sources seen by an array of a different size.
    pub fn with_sensors(&self, m: usize) -> Result<Self> {
        Self::new(
            m,
            self.soi_doa_deg,
            self.soi_power,
            self.interferers.clone(),
            self.noise_power,
        )
    }

    /// Moves the SOI to `doa` and shifts every interferer by the same amount,
    /// keeping the relative geometry.
    pub fn steered_to(&self, doa: f64) -> Result<Self> {
        let shift = doa - self.soi_doa_deg;
        let interferers = self
            .interferers
            .iter()
            .map(|i| Interferer {
                doa_deg: i.doa_deg + shift,
                power: i.power,
            })
            .collect();
        Self::new(self.m, doa, self.soi_power, interferers, self.noise_power)
    }

    pub fn with_soi_power(&self, soi_power: f64) -> Result<Self> {
        Self::new(
            self.m,
            self.soi_doa_deg,
            soi_power,
            self.interferers.clone(),
            self.noise_power,
        )
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `a(θ)_m = exp(-jπ m sin θ)`, `m = 0..M-1`.
pub fn steering_vector(theta_deg: f64, m: usize) -> ComplexVector {
    let phase = -std::f64::consts::PI * theta_deg.to_radians().sin();
    let entries = (0..m).map(|k| Complex64::from_polar(1.0, phase * k as f64)).collect();
    ComplexVector::from_vec_unchecked(entries)
}

/// `R_{i+n} = Σ σ_k² a_k a_kᴴ + σ_n² I`.
pub fn interference_noise_covariance(s: &Scenario) -> HermitianMatrix {
    let mut r = HermitianMatrix::identity(s.m).scale(s.noise_power);
    for i in &s.interferers {
        let a = steering_vector(i.doa_deg, s.m);
        r = r
            .add(&HermitianMatrix::outer(&a, i.power))
            .expect("matching dimensions");
    }
    r
}

/// `R_x = σ_s² a₀a₀ᴴ + R_{i+n}`.
pub fn data_covariance_true(s: &Scenario) -> HermitianMatrix {
    let a0 = s.soi_steering();
    interference_noise_covariance(s)
        .add(&HermitianMatrix::outer(&a0, s.soi_power))
        .expect("matching dimensions")
}

/// `T` array snapshots stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    m: usize,
    columns: Vec<Complex64>,
    seed: u64,
}

impl SnapshotMatrix {
    pub fn new(m: usize, columns: Vec<Vec<Complex64>>, seed: u64) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::validation("at least one snapshot is required"));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::validation(format!(
                "snapshot of length {} does not match {m} sensors",
                bad.len()
            )));
        }
        Ok(SnapshotMatrix {
            m,
            columns: columns.into_iter().flatten().collect(),
            seed,
        })
    }

    pub fn sensors(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.columns.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn column(&self, t: usize) -> &[Complex64] {
        &self.columns[t * self.m..(t + 1) * self.m]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex64]> {
        self.columns.chunks_exact(self.m)
    }
}

/// Seedable generator used for every random draw in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for Monte Carlo trial `trial` under `master_seed`.
/// Streams depend only on the pair, never on scheduling order.
pub fn trial_rng(master_seed: u64, trial: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Circular complex Gaussian sample with `E|z|² = power`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws `T` snapshots `x(t) = a₀s₀(t) + Σ a_k s_k(t) + n(t)` with
/// independent circular Gaussian waveforms and noise.
pub fn generate_snapshots(s: &Scenario, t: usize, seed: u64) -> Result<SnapshotMatrix> {
    if t == 0 {
        return Err(Error::validation("snapshot count must be at least 1"));
    }
    let m = s.m;
    let a0 = s.soi_steering();
    let ak: Vec<ComplexVector> = s.interferers.iter().map(|i| steering_vector(i.doa_deg, m)).collect();
    let mut rng = rng_from_seed(seed);
    let mut columns = Vec::with_capacity(m * t);
    let mut x = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..t {
        let s0 = complex_gaussian(&mut rng, s.soi_power);
        for (xi, a) in x.iter_mut().zip(a0.iter()) {
            *xi = a * s0;
        }
        for (a, intf) in ak.iter().zip(&s.interferers) {
            let sk = complex_gaussian(&mut rng, intf.power);
            for (xi, ai) in x.iter_mut().zip(a.iter()) {
                *xi += ai * sk;
            }
        }
        for xi in x.iter_mut() {
            *xi += complex_gaussian(&mut rng, s.noise_power);
        }
        columns.extend_from_slice(&x);
    }
    Ok(SnapshotMatrix { m, columns, seed })
}

/// `(1/T) Σ x(t) x(t)ᴴ`.
pub fn sample_covariance(x: &SnapshotMatrix) -> HermitianMatrix {
    let m = x.m;
    let mut acc = vec![Complex64::new(0.0, 0.0); m * m];
    for col in x.columns() {
        for i in 0..m {
            for j in i..m {
                acc[i * m + j] += col[i] * col[j].conj();
            }
        }
    }
    let inv_t = 1.0 / x.len() as f64;
    for i in 0..m {
        for j in i..m {
            let v = acc[i * m + j] * inv_t;
            acc[i * m + j] = v;
            acc[j * m + i] = v.conj();
        }
        acc[i * m + i].im = 0.0;
    }
    HermitianMatrix::new(m, acc).expect("outer-product sum is Hermitian")
}
