//! Full-information value coefficients.
//!
//! In time-to-go `τ = T - t` the coefficients solve the linear system
//!
//! ```text
//! m_τ = -2Λᵢ mᵢ + (Qm)ᵢ + c1ᵢ
//! n_τ =  -Λᵢ nᵢ + (Qn)ᵢ + 2 kᵢ mᵢ - c2ᵢ
//! u_τ =           (Qu)ᵢ + Γ₂ mᵢ + kᵢ nᵢ + c3ᵢ
//! ```
//!
//! with zero initial data, where `Λᵢ = λ₁ⁱ + λ₂ⁱ`, `kᵢ = Γ₁ + λ₁ⁱα₁ⁱ + λ₂ⁱα₂ⁱ`
//! and `(c1, c2, c3)` are the growth coefficients of the chosen variant.
//! The system is block lower-triangular, so one RK4 sweep over the stacked
//! state performs the `m`, then `n`, then `u` solves stage by stage.

use std::io::Write;

use serde::Serialize;

use super::{bracket, csv_writer, ValueVariant};
use crate::error::{Error, Result};
use crate::model::{DerivedConstants, Model, ModelParams};
use crate::simulate::TimeGrid;
use crate::strategy::{instantaneous_log_growth, optimal_full_variant};

/// Solved `m`, `n`, `u` on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueCoefficientsFull {
    pub grid: TimeGrid,
    pub k: usize,
    pub variant: ValueVariant,
    pub fingerprint: String,
    /// Row-major `(n_t + 1) x K`, row `j` at `t_j = j T / n_t`.
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    pub u: Vec<f64>,
}

impl ValueCoefficientsFull {
    pub fn node(&self, j: usize, i: usize) -> [f64; 3] {
        let idx = j * self.k + i;
        [self.m[idx], self.n[idx], self.u[idx]]
    }

    /// `(m, n, u)` at time `t` by linear interpolation between nodes.
    pub fn coefficients_at(&self, t: f64, i: usize) -> Result<[f64; 3]> {
        if i >= self.k {
            return Err(Error::Precondition(format!("regime {i} out of range")));
        }
        let (j, w) = bracket(t, self.grid.horizon, self.grid.n_steps)?;
        let a = self.node(j, i);
        let b = self.node(j + 1, i);
        Ok([0, 1, 2].map(|c| a[c] + w * (b[c] - a[c])))
    }

    /// `m x^2 + n x + u` at a grid node.
    pub fn quadratic_at_node(&self, j: usize, x: f64, i: usize) -> f64 {
        let [m, n, u] = self.node(j, i);
        m * x * x + n * x + u
    }
}

struct Rhs {
    k: usize,
    q: Vec<Vec<f64>>,
    lam: Vec<f64>,
    kappa: Vec<f64>,
    gamma2: f64,
    growth: [Vec<f64>; 3],
}

impl Rhs {
    fn new(p: &ModelParams, c: &DerivedConstants, variant: ValueVariant) -> Self {
        let r = &p.regimes;
        let k = r.len();
        let [g1, g2, g3] = variant.growth(c);
        Self {
            k,
            q: p.generator.q.clone(),
            lam: (0..k).map(|i| r.lambda1[i] + r.lambda2[i]).collect(),
            kappa: (0..k)
                .map(|i| c.gamma1 + r.lambda1[i] * r.alpha1[i] + r.lambda2[i] * r.alpha2[i])
                .collect(),
            gamma2: c.gamma2,
            growth: [g1.to_vec(), g2.to_vec(), g3.to_vec()],
        }
    }

    fn couple(&self, v: &[f64], i: usize) -> f64 {
        self.q[i].iter().zip(v).map(|(q, x)| q * x).sum()
    }

    /// Writes `dy/dτ` for `y = [m; n; u]`.
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let k = self.k;
        let (m, rest) = y.split_at(k);
        let (n, u) = rest.split_at(k);
        for i in 0..k {
            dy[i] = -2.0 * self.lam[i] * m[i] + self.couple(m, i) + self.growth[0][i];
            dy[k + i] = -self.lam[i] * n[i] + self.couple(n, i) + 2.0 * self.kappa[i] * m[i] - self.growth[1][i];
            dy[2 * k + i] = self.couple(u, i) + self.gamma2 * m[i] + self.kappa[i] * n[i] + self.growth[2][i];
        }
    }
}

/// Solves the coefficient ODEs with `n_t` RK4 steps.
pub fn solve_full_ode(model: &Model, n_t: usize, variant: ValueVariant) -> Result<ValueCoefficientsFull> {
    solve_full_ode_with(model.params(), model.consts(), n_t, variant)
}

/// [`solve_full_ode`] with explicitly supplied constants, so faulty
/// constants can be injected in tests.
pub fn solve_full_ode_with(
    params: &ModelParams,
    consts: &DerivedConstants,
    n_t: usize,
    variant: ValueVariant,
) -> Result<ValueCoefficientsFull> {
    if n_t < 10 {
        return Err(Error::invalid("grid.n_t", "must be at least 10"));
    }
    variant.check(params)?;
    let grid = TimeGrid::new(params.horizon, n_t)?;
    let rhs = Rhs::new(params, consts, variant);
    let k = rhs.k;
    let dim = 3 * k;
    let h = grid.dt();

    let mut out = ValueCoefficientsFull {
        grid,
        k,
        variant,
        fingerprint: params.fingerprint(),
        m: vec![0.0; (n_t + 1) * k],
        n: vec![0.0; (n_t + 1) * k],
        u: vec![0.0; (n_t + 1) * k],
    };
    let mut y = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for s in 0..n_t {
        rhs.eval(&y, &mut k1);
        stage
            .iter_mut()
            .zip(&y)
            .zip(&k1)
            .for_each(|((st, y), d)| *st = y + 0.5 * h * d);
        rhs.eval(&stage, &mut k2);
        stage
            .iter_mut()
            .zip(&y)
            .zip(&k2)
            .for_each(|((st, y), d)| *st = y + 0.5 * h * d);
        rhs.eval(&stage, &mut k3);
        stage
            .iter_mut()
            .zip(&y)
            .zip(&k3)
            .for_each(|((st, y), d)| *st = y + h * d);
        rhs.eval(&stage, &mut k4);
        for c in 0..dim {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "value ODE",
                step: s + 1,
            });
        }
        let j = n_t - s - 1;
        out.m[j * k..(j + 1) * k].copy_from_slice(&y[..k]);
        out.n[j * k..(j + 1) * k].copy_from_slice(&y[k..2 * k]);
        out.u[j * k..(j + 1) * k].copy_from_slice(&y[2 * k..]);
    }
    Ok(out)
}

/// `log w + m(t,i) x^2 + n(t,i) x + u(t,i)`.
pub fn value_full(t: f64, w: f64, x: f64, i: usize, coeffs: &ValueCoefficientsFull) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::Precondition(format!("wealth must be positive, got {w}")));
    }
    let [m, n, u] = coeffs.coefficients_at(t, i)?;
    Ok(w.ln() + m * x * x + n * x + u)
}

/// Residual of the full-information HJB equation for the solved ansatz at
/// grid node `j`, spread `x` and regime `i`.
///
/// The time derivative is a fourth-order central difference of the node
/// values; spatial derivatives are exact. The maximised Hamiltonian is
/// evaluated with the closed-form optimal weights and the instantaneous
/// growth rate, not with the growth coefficients used by the solver.
pub fn hjb_residual_full(model: &Model, coeffs: &ValueCoefficientsFull, j: usize, x: f64, i: usize) -> Result<f64> {
    let nt = coeffs.grid.n_steps;
    if j < 2 || j + 2 > nt {
        return Err(Error::Precondition(format!(
            "node {j} too close to the ends of the grid"
        )));
    }
    let h = coeffs.grid.dt();
    let v = |jj: usize| coeffs.quadratic_at_node(jj, x, i);
    let v_t = (-v(j + 2) + 8.0 * v(j + 1) - 8.0 * v(j - 1) + v(j - 2)) / (12.0 * h);
    let [m, n, _] = coeffs.node(j, i);
    let v_x = 2.0 * m * x + n;
    let v_xx = 2.0 * m;

    let p = model.params();
    let c = model.consts();
    let (mu1, mu2) = model.drifts(x, i);
    let w = optimal_full_variant(model, coeffs.variant.strategy(), x, i)?;
    let growth = instantaneous_log_growth(p, &w, mu1, mu2);
    let coupling: f64 = (0..coeffs.k)
        .map(|l| p.generator.rate(i, l) * coeffs.quadratic_at_node(j, x, l))
        .sum();
    Ok(v_t + growth + (c.gamma1 + mu1 - mu2) * v_x + 0.5 * c.gamma2 * v_xx + coupling)
}

/// Writes `t,regime,m,n,u` rows (regimes numbered from 1).
pub fn write_full_value_csv<W: Write>(out: W, coeffs: &ValueCoefficientsFull) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["t", "regime", "m", "n", "u"])?;
    for j in 0..coeffs.grid.n_points() {
        let t = coeffs.grid.time(j);
        for i in 0..coeffs.k {
            let [m, n, u] = coeffs.node(j, i);
            w.write_record([
                format!("{t}"),
                (i + 1).to_string(),
                format!("{m}"),
                format!("{n}"),
                format!("{u}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
