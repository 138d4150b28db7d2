//! Partial-information value coefficients for two regimes.
//!
//! With `p` the filter probability of the first regime and constant
//! intensities, `m̄` has a closed form and, in time-to-go `τ`,
//!
//! ```text
//! n̄_τ = -Λ n̄ + b n̄_p + ½ a n̄_pp + 2 κ(p) m̄ - c2(p)
//! ū_τ =          b ū_p + ½ a ū_pp + κ(p) n̄ + Γ₂ m̄ + c3(p) + C(p) n̄_p
//! ```
//!
//! where `b(p) = q²¹(1-p) - q¹²p` is the filter drift, `a(p)` its squared
//! diffusion, `C(p)` the spread-filter covariation rate and `κ`, `c2`, `c3`
//! are evaluated at the filter-averaged levels. Both `a` and `C` vanish at
//! `p ∈ {0, 1}` and the drift points inward there, so no boundary data is
//! needed: endpoint rows use one-sided transport only.
//!
//! The scheme is explicit Euler with upwind transport and central
//! diffusion, sub-stepped so every update is a convex combination.

use std::io::Write;

use serde::Serialize;

use super::{bracket, csv_writer, ValueVariant};
use crate::error::{Error, Result};
use crate::filter::FilterCoefficients;
use crate::model::Model;
use crate::simulate::TimeGrid;

/// Grid and stability settings for [`solve_partial_pde`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeSettings {
    pub n_t: usize,
    pub n_p: usize,
    /// Fraction of the explicit stability limit used per sub-step.
    pub safety: f64,
    /// Largest number of sub-steps allowed per outer step.
    pub max_substeps: usize,
}

impl Default for PdeSettings {
    fn default() -> Self {
        Self {
            n_t: 2000,
            n_p: 200,
            safety: 0.9,
            max_substeps: 100_000,
        }
    }
}

impl PdeSettings {
    pub fn new(n_t: usize, n_p: usize) -> Self {
        Self {
            n_t,
            n_p,
            ..Self::default()
        }
    }
}

/// Solved `m̄(t)`, `n̄(t,p)` and `ū(t,p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuePartialSolution {
    pub grid: TimeGrid,
    pub n_p: usize,
    pub variant: ValueVariant,
    pub fingerprint: String,
    pub mbar: Vec<f64>,
    /// Row-major `(n_t + 1) x (n_p + 1)`.
    pub nbar: Vec<f64>,
    pub ubar: Vec<f64>,
    /// Sub-steps taken per outer time step.
    pub substeps: usize,
}

impl ValuePartialSolution {
    pub fn p_node(&self, j: usize) -> f64 {
        j as f64 / self.n_p as f64
    }

    pub fn node(&self, k: usize, j: usize) -> [f64; 3] {
        let idx = k * (self.n_p + 1) + j;
        [self.mbar[k], self.nbar[idx], self.ubar[idx]]
    }

    /// `(m̄, n̄, ū)` at `(t, p)` by bilinear interpolation.
    pub fn coefficients_at(&self, t: f64, p: f64) -> Result<[f64; 3]> {
        let (k, wt) = bracket(t, self.grid.horizon, self.grid.n_steps)?;
        let (j, wp) = bracket(p, 1.0, self.n_p)?;
        let corner = |kk, jj| self.node(kk, jj);
        let (a, b, c, d) = (corner(k, j), corner(k, j + 1), corner(k + 1, j), corner(k + 1, j + 1));
        Ok([0, 1, 2].map(|s| {
            let lo = a[s] + wp * (b[s] - a[s]);
            let hi = c[s] + wp * (d[s] - c[s]);
            lo + wt * (hi - lo)
        }))
    }

    /// `log w + m̄ x^2 + n̄ x + ū`.
    pub fn value(&self, t: f64, w: f64, x: f64, p: f64) -> Result<f64> {
        if !(w > 0.0) {
            return Err(Error::Precondition(format!("wealth must be positive, got {w}")));
        }
        let [m, n, u] = self.coefficients_at(t, p)?;
        Ok(w.ln() + m * x * x + n * x + u)
    }
}

/// Quadratic coefficient of the partial-information value:
/// `c1 / (2Λ) (1 - exp(-2Λ(T - t)))`.
pub fn mbar_closed_form(t: f64, model: &Model, variant: ValueVariant) -> Result<f64> {
    let (l1, l2) = model.require_constant_lambda("the partial-information value")?;
    let lam = l1 + l2;
    if lam <= 0.0 {
        return Err(Error::Precondition("λ₁ + λ₂ must be positive".into()));
    }
    let c1 = variant.growth_at(model.params(), l1, l2, 0.0, 0.0)[0];
    let tau = model.params().horizon - t;
    Ok(c1 / (2.0 * lam) * (1.0 - (-2.0 * lam * tau).exp()))
}

struct Coeffs {
    lam: f64,
    c1: f64,
    gamma2: f64,
    drift: Vec<f64>,
    diff: Vec<f64>,
    cross: Vec<f64>,
    kappa: Vec<f64>,
    c2: Vec<f64>,
    c3: Vec<f64>,
}

impl Coeffs {
    fn new(model: &Model, n_p: usize, variant: ValueVariant) -> Result<Self> {
        let (l1, l2) = model.require_constant_lambda("the partial-information value")?;
        let p = model.params();
        let c = model.consts();
        let filt = FilterCoefficients::new(model)?;
        let (q12, q21) = (p.generator.rate(0, 1), p.generator.rate(1, 0));
        let det = p.b1 * p.b1 * p.b2 * p.b2 + p.sigma * p.sigma * (p.b1 * p.b1 + p.b2 * p.b2);
        let mut out = Self {
            lam: l1 + l2,
            c1: variant.growth_at(p, l1, l2, 0.0, 0.0)[0],
            gamma2: c.gamma2,
            drift: Vec::with_capacity(n_p + 1),
            diff: Vec::with_capacity(n_p + 1),
            cross: Vec::with_capacity(n_p + 1),
            kappa: Vec::with_capacity(n_p + 1),
            c2: Vec::with_capacity(n_p + 1),
            c3: Vec::with_capacity(n_p + 1),
        };
        for j in 0..=n_p {
            let pj = j as f64 / n_p as f64;
            let probs = [pj, 1.0 - pj];
            let (h1, h2) = filt.gains(0.0, &probs);
            let (a1, a2) = model.filtered_alpha(&probs);
            let g = variant.growth_at(p, l1, l2, a1, a2);
            out.drift.push(q21 * (1.0 - pj) - q12 * pj);
            out.diff.push(h1[0] * h1[0] + h2[0] * h2[0]);
            out.cross.push((p.b1 * p.b1 * h1[0] - det.sqrt() * h2[0]) / c.sigma1);
            out.kappa.push(c.gamma1 + l1 * a1 + l2 * a2);
            out.c2.push(g[1]);
            out.c3.push(g[2]);
        }
        Ok(out)
    }

    fn mbar(&self, tau: f64) -> f64 {
        self.c1 / (2.0 * self.lam) * (1.0 - (-2.0 * self.lam * tau).exp())
    }
}

fn upwind(v: &[f64], j: usize, b: f64, dp: f64) -> f64 {
    if b > 0.0 {
        (v[j + 1] - v[j]) / dp
    } else if b < 0.0 {
        (v[j] - v[j - 1]) / dp
    } else {
        0.0
    }
}

/// Solves the partial-information PDE system on a `(n_t, n_p)` grid.
pub fn solve_partial_pde(model: &Model, settings: PdeSettings, variant: ValueVariant) -> Result<ValuePartialSolution> {
    if model.k() != 2 {
        return Err(Error::Precondition(format!(
            "partial-information PDE needs exactly two regimes, got {}",
            model.k()
        )));
    }
    if settings.n_p < 50 {
        return Err(Error::invalid("grid.n_p", "must be at least 50"));
    }
    if settings.n_t < 10 {
        return Err(Error::invalid("grid.n_t", "must be at least 10"));
    }
    variant.check(model.params())?;
    let co = Coeffs::new(model, settings.n_p, variant)?;
    let np = settings.n_p;
    let grid = TimeGrid::new(model.params().horizon, settings.n_t)?;
    let dp = 1.0 / np as f64;
    let dtau = grid.dt();

    let max_rate = (0..=np)
        .map(|j| co.lam + co.drift[j].abs() / dp + co.diff[j] / (dp * dp))
        .fold(0.0, f64::max);
    let substeps = ((dtau * max_rate / settings.safety).ceil() as usize).max(1);
    if substeps > settings.max_substeps {
        return Err(Error::Stability(format!(
            "{substeps} sub-steps per step needed, budget is {}",
            settings.max_substeps
        )));
    }
    let h = dtau / substeps as f64;
    log::debug!("partial PDE: {substeps} sub-steps of {h:e} per step");

    let width = np + 1;
    let nodes = grid.n_points();
    let mut out = ValuePartialSolution {
        grid,
        n_p: np,
        variant,
        fingerprint: model.params().fingerprint(),
        mbar: vec![0.0; nodes],
        nbar: vec![0.0; nodes * width],
        ubar: vec![0.0; nodes * width],
        substeps,
    };
    let mut n = vec![0.0; width];
    let mut u = vec![0.0; width];
    let mut n_next = vec![0.0; width];
    let mut u_next = vec![0.0; width];
    let mut tau = 0.0;
    for s in 0..settings.n_t {
        for sub in 0..substeps {
            let mb = co.mbar(tau);
            for j in 0..width {
                let (b, a) = (co.drift[j], co.diff[j]);
                let interior = j > 0 && j < np;
                let (n_pp, u_pp, n_p) = if interior {
                    (
                        (n[j + 1] - 2.0 * n[j] + n[j - 1]) / (dp * dp),
                        (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (dp * dp),
                        (n[j + 1] - n[j - 1]) / (2.0 * dp),
                    )
                } else {
                    (0.0, 0.0, 0.0)
                };
                let dn = -co.lam * n[j] + b * upwind(&n, j, b, dp) + 0.5 * a * n_pp + 2.0 * co.kappa[j] * mb - co.c2[j];
                let du = b * upwind(&u, j, b, dp)
                    + 0.5 * a * u_pp
                    + co.kappa[j] * n[j]
                    + co.gamma2 * mb
                    + co.c3[j]
                    + co.cross[j] * n_p;
                n_next[j] = n[j] + h * dn;
                u_next[j] = u[j] + h * du;
            }
            std::mem::swap(&mut n, &mut n_next);
            std::mem::swap(&mut u, &mut u_next);
            tau = (s * substeps + sub + 1) as f64 * h;
        }
        if n.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "partial-information PDE",
                step: s + 1,
            });
        }
        let k = settings.n_t - s - 1;
        out.mbar[k] = co.mbar(tau);
        out.nbar[k * width..(k + 1) * width].copy_from_slice(&n);
        out.ubar[k * width..(k + 1) * width].copy_from_slice(&u);
    }
    Ok(out)
}

/// Writes `t,p,mbar,nbar,ubar` rows.
pub fn write_partial_value_csv<W: Write>(out: W, sol: &ValuePartialSolution) -> Result<()> {
    write_partial_value_csv_every(out, sol, 1, 1)
}

/// Like [`write_partial_value_csv`], keeping every `t_stride`-th time node
/// and every `p_stride`-th belief node. The last node in each direction is
/// always written.
pub fn write_partial_value_csv_every<W: Write>(
    out: W,
    sol: &ValuePartialSolution,
    t_stride: usize,
    p_stride: usize,
) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["t", "p", "mbar", "nbar", "ubar"])?;
    for k in strided(sol.grid.n_points(), t_stride) {
        let t = sol.grid.time(k);
        for j in strided(sol.n_p + 1, p_stride) {
            let [m, n, u] = sol.node(k, j);
            w.write_record([
                format!("{t}"),
                format!("{}", sol.p_node(j)),
                format!("{m}"),
                format!("{n}"),
                format!("{u}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Indices `0, s, 2s, ...` below `len`, plus `len - 1`.
pub fn strided(len: usize, stride: usize) -> impl Iterator<Item = usize> {
    let stride = stride.max(1);
    (0..len).filter(move |&i| i % stride == 0 || i + 1 == len)
}
