//! Innovations filter for the hidden regime.
//!
//! The filter turns observed residual returns into innovations (whitened
//! prediction errors) and propagates the conditional regime probabilities
//! with an Euler step followed by clip-and-renormalise. The size of every
//! correction is recorded so its effect can be monitored.

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GeneratorMatrix, Model, RegimeTable};
use crate::simulate::{ObservedPath, TimeGrid};

/// Largest correlation accepted before the innovation whitening is
/// considered ill-posed.
pub const MAX_RHO: f64 = 1.0 - 1e-12;

/// Regime drifts and the gain coefficients of the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    regimes: RegimeTable,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    rho_bar: f64,
}

impl FilterCoefficients {
    pub fn new(model: &Model) -> Result<Self> {
        let c = model.consts();
        if c.rho.abs() >= MAX_RHO {
            return Err(Error::DegenerateCorrelation(c.rho));
        }
        Ok(Self::from_parts_unchecked(
            model.params().regimes.clone(),
            c.sigma1,
            c.sigma2,
            c.rho,
        ))
    }

    /// Skips the correlation guard; for tests of limiting cases.
    pub fn from_parts_unchecked(regimes: RegimeTable, sigma1: f64, sigma2: f64, rho: f64) -> Self {
        Self {
            regimes,
            sigma1,
            sigma2,
            rho,
            rho_bar: (1.0 - rho * rho).sqrt(),
        }
    }

    pub fn k(&self) -> usize {
        self.regimes.len()
    }

    pub fn mu1(&self, x: f64, i: usize) -> f64 {
        -self.regimes.lambda1[i] * (x - self.regimes.alpha1[i])
    }

    pub fn mu2(&self, x: f64, i: usize) -> f64 {
        self.regimes.lambda2[i] * (x - self.regimes.alpha2[i])
    }

    /// Drifts averaged under `p`.
    pub fn mean_drifts(&self, x: f64, p: &[f64]) -> (f64, f64) {
        p.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, &w)| {
            (a + w * self.mu1(x, i), b + w * self.mu2(x, i))
        })
    }

    /// Gains `(H^{i,1}, H^{i,2})` for every regime, written into `h1`, `h2`.
    pub fn gains_into(&self, x: f64, p: &[f64], h1: &mut [f64], h2: &mut [f64]) {
        let (m1, m2) = self.mean_drifts(x, p);
        let scale2 = self.sigma1 * self.sigma2 * self.rho_bar;
        for i in 0..p.len() {
            let d1 = self.mu1(x, i) - m1;
            let d2 = self.mu2(x, i) - m2;
            h1[i] = p[i] * d1 / self.sigma1;
            h2[i] = p[i] * (self.sigma1 * d2 - self.sigma2 * self.rho * d1) / scale2;
        }
    }

    pub fn gains(&self, x: f64, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut h1 = vec![0.0; p.len()];
        let mut h2 = vec![0.0; p.len()];
        self.gains_into(x, p, &mut h1, &mut h2);
        (h1, h2)
    }
}

/// Innovation increments for one step of residual returns.
pub fn innovations_step(dr1: f64, dr2: f64, x: f64, p: &[f64], dt: f64, coeffs: &FilterCoefficients) -> (f64, f64) {
    let (m1, m2) = coeffs.mean_drifts(x, p);
    let e1 = (dr1 - m1 * dt) / coeffs.sigma1;
    let e2 = (dr2 - m2 * dt) / coeffs.sigma2;
    (e1, (e2 - coeffs.rho * e1) / coeffs.rho_bar)
}

/// Result of one filter update.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub p: Vec<f64>,
    /// `|Σ raw p' - 1|` before projection.
    pub raw_mass_error: f64,
    /// L1 distance between the raw Euler update and its projection.
    pub correction: f64,
}

/// Euler step of the filter equation followed by projection onto the
/// simplex. `step` only labels errors.
#[allow(clippy::too_many_arguments)]
pub fn filter_step(
    p: &[f64],
    x: f64,
    di1: f64,
    di2: f64,
    dt: f64,
    gen: &GeneratorMatrix,
    coeffs: &FilterCoefficients,
    step: usize,
) -> Result<FilterStep> {
    let k = p.len();
    if k == 1 {
        return Ok(FilterStep {
            p: vec![1.0],
            raw_mass_error: 0.0,
            correction: 0.0,
        });
    }
    let (h1, h2) = coeffs.gains(x, p);
    let mut raw = vec![0.0; k];
    for i in 0..k {
        let inflow: f64 = (0..k).map(|j| gen.rate(j, i) * p[j]).sum();
        raw[i] = p[i] + inflow * dt + h1[i] * di1 + h2[i] * di2;
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "filter", step });
    }
    let raw_total: f64 = raw.iter().sum();
    let clipped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let mass: f64 = clipped.iter().sum();
    if mass <= 0.0 {
        return Err(Error::FilterCollapse { step });
    }
    let next: Vec<f64> = clipped.iter().map(|v| v / mass).collect();
    let correction = next.iter().zip(&raw).map(|(a, b)| (a - b).abs()).sum();
    Ok(FilterStep {
        p: next,
        raw_mass_error: (raw_total - 1.0).abs(),
        correction,
    })
}

/// Filter output along one observed path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterPath {
    pub grid: TimeGrid,
    pub k: usize,
    /// Row-major `n_points x k` probabilities.
    pub pi: Vec<f64>,
    pub di1: Vec<f64>,
    pub di2: Vec<f64>,
    /// Projection correction applied at each step.
    pub corrections: Vec<f64>,
    pub max_raw_mass_error: f64,
}

impl FilterPath {
    pub fn n_points(&self) -> usize {
        self.pi.len() / self.k
    }

    /// Probabilities at grid point `n`.
    pub fn pi(&self, n: usize) -> &[f64] {
        &self.pi[n * self.k..(n + 1) * self.k]
    }

    pub fn terminal(&self) -> &[f64] {
        self.pi(self.n_points() - 1)
    }

    /// Cumulative projection correction.
    pub fn projection_total(&self) -> f64 {
        self.corrections.iter().sum()
    }
}

fn check_simplex(p0: &[f64], k: usize) -> Result<()> {
    let total: f64 = p0.iter().sum();
    if p0.len() != k || p0.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "initial filter must be a probability vector of length {k}"
        )));
    }
    Ok(())
}

/// Runs the filter along an observed path, starting from `p0`.
pub fn run_filter(observed: &ObservedPath, p0: &[f64], model: &Model) -> Result<FilterPath> {
    let coeffs = FilterCoefficients::new(model)?;
    run_filter_with(observed, p0, &model.params().generator, &coeffs)
}

/// [`run_filter`] with explicit coefficients.
pub fn run_filter_with(
    observed: &ObservedPath,
    p0: &[f64],
    gen: &GeneratorMatrix,
    coeffs: &FilterCoefficients,
) -> Result<FilterPath> {
    let k = coeffs.k();
    check_simplex(p0, k)?;
    let grid = observed.grid;
    let dt = grid.dt();
    let mut out = FilterPath {
        grid,
        k,
        pi: Vec::with_capacity(grid.n_points() * k),
        di1: Vec::with_capacity(grid.n_steps),
        di2: Vec::with_capacity(grid.n_steps),
        corrections: Vec::with_capacity(grid.n_steps),
        max_raw_mass_error: 0.0,
    };
    let mut p = p0.to_vec();
    out.pi.extend_from_slice(&p);
    for n in 0..grid.n_steps {
        let x = observed.x[n];
        let (di1, di2) = innovations_step(observed.dr1(n), observed.dr2(n), x, &p, dt, coeffs);
        let s = filter_step(&p, x, di1, di2, dt, gen, coeffs, n + 1)?;
        out.di1.push(di1);
        out.di2.push(di2);
        out.corrections.push(s.correction);
        out.max_raw_mass_error = out.max_raw_mass_error.max(s.raw_mass_error);
        p = s.p;
        out.pi.extend_from_slice(&p);
    }
    Ok(out)
}

/// Marginal law of the chain at time `t`: `p0ᵀ exp(tQ)`.
pub fn kolmogorov_baseline(gen: &GeneratorMatrix, p0: &[f64], t: f64) -> Vec<f64> {
    let e = (gen.to_matrix() * t).exp();
    let row = DVector::from_column_slice(p0).transpose() * e;
    row.iter().copied().collect()
}

/// Writes `t,pi_1..pi_K,dI1,dI2,projection_correction`; the step columns
/// of the last row are empty.
pub fn write_filter_csv<W: Write>(out: W, fp: &FilterPath) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=fp.k).map(|i| format!("pi_{i}")));
    header.extend(["dI1", "dI2", "projection_correction"].map(String::from));
    w.write_record(&header)?;
    for n in 0..fp.n_points() {
        let mut row = vec![format!("{}", fp.grid.time(n))];
        row.extend(fp.pi(n).iter().map(|v| format!("{v}")));
        if n < fp.grid.n_steps {
            row.push(format!("{}", fp.di1[n]));
            row.push(format!("{}", fp.di2[n]));
            row.push(format!("{}", fp.corrections[n]));
        } else {
            row.extend([String::new(), String::new(), String::new()]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
