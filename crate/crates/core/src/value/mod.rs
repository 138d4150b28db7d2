//! Value functions of the log-utility trader.
//!
//! Under full information the value is `log w + m(t,i) x^2 + n(t,i) x +
//! u(t,i)` with coefficients from a linear backward ODE system ([`ode`]).
//! Under partial information with two regimes it is `log w + m̄(t) x^2 +
//! n̄(t,p) x + ū(t,p)`, where `p` is the filter probability of the first
//! regime and `n̄`, `ū` solve degenerate parabolic PDEs ([`pde`]).
//! [`mc`] estimates expected log utility of arbitrary policies by simulation.

pub mod mc;
pub mod ode;
pub mod pde;

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, DerivedConstants, ModelParams};

pub use mc::{mc_compare, mc_expected_log_utility, McEstimate, McSamples, McSettings, StartState};
pub use ode::{
    hjb_residual_full, solve_full_ode, solve_full_ode_with, value_full, write_full_value_csv, ValueCoefficientsFull,
};
pub use pde::{
    mbar_closed_form, solve_partial_pde, strided, write_partial_value_csv, write_partial_value_csv_every, PdeSettings,
    ValuePartialSolution,
};

/// Which optimal strategy the value function belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueVariant {
    Unrestricted,
    BetaNeutral,
}

impl ValueVariant {
    pub fn name(self) -> &'static str {
        match self {
            ValueVariant::Unrestricted => "unrestricted",
            ValueVariant::BetaNeutral => "beta-neutral",
        }
    }

    pub fn strategy(self) -> crate::strategy::Variant {
        match self {
            ValueVariant::Unrestricted => crate::strategy::Variant::Unrestricted,
            ValueVariant::BetaNeutral => crate::strategy::Variant::BetaNeutral,
        }
    }

    /// Per-regime growth coefficients `(c1, c2, c3)` of this variant.
    pub fn growth(self, c: &DerivedConstants) -> [&[f64]; 3] {
        match self {
            ValueVariant::Unrestricted => [&c.theta1, &c.theta2, &c.theta3],
            ValueVariant::BetaNeutral => [&c.phi1, &c.phi2, &c.phi3],
        }
    }

    /// Growth coefficients for explicit intensities and levels.
    pub(crate) fn growth_at(self, p: &ModelParams, l1: f64, l2: f64, a1: f64, a2: f64) -> [f64; 3] {
        match self {
            ValueVariant::Unrestricted => model::unrestricted_growth(p, l1, l2, a1, a2),
            ValueVariant::BetaNeutral => model::beta_neutral_growth(p, l1, l2, a1, a2),
        }
    }

    pub(crate) fn check(self, p: &ModelParams) -> Result<()> {
        if self == ValueVariant::BetaNeutral && p.beta2 == 0.0 {
            return Err(Error::Precondition("beta-neutral value requires beta2 != 0".into()));
        }
        Ok(())
    }
}

/// Linear-interpolation weights for `t` on a uniform grid of `n` steps
/// over `[0, horizon]`.
pub(crate) fn bracket(t: f64, horizon: f64, n: usize) -> Result<(usize, f64)> {
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::Precondition(format!("t = {t} outside [0, {horizon}]")));
    }
    let s = t / horizon * n as f64;
    let lo = (s.floor() as usize).min(n - 1);
    Ok((lo, s - lo as f64))
}

/// Information premium `l(t, x, p)`: full-information value averaged under
/// the filter minus the partial-information value.
pub fn loss_of_utility(
    t: f64,
    x: f64,
    p: f64,
    full: &ValueCoefficientsFull,
    partial: &ValuePartialSolution,
) -> Result<f64> {
    if full.fingerprint != partial.fingerprint {
        return Err(Error::FingerprintMismatch(
            full.fingerprint.clone(),
            partial.fingerprint.clone(),
        ));
    }
    if full.variant != partial.variant {
        return Err(Error::Precondition(
            "full and partial solutions use different variants".into(),
        ));
    }
    let [m1, n1, u1] = full.coefficients_at(t, 0)?;
    let [m2, n2, u2] = full.coefficients_at(t, 1)?;
    let [mb, nb, ub] = partial.coefficients_at(t, p)?;
    let q = 1.0 - p;
    Ok((p * m1 + q * m2 - mb) * x * x + (p * n1 + q * n2 - nb) * x + (p * u1 + q * u2 - ub))
}

/// Loss evaluated at every node of the partial solution's grid, as
/// `(t, p, l)` rows ordered by time then `p`.
pub fn loss_surface(
    x: f64,
    full: &ValueCoefficientsFull,
    partial: &ValuePartialSolution,
) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::with_capacity(partial.grid.n_points() * (partial.n_p + 1));
    for k in 0..partial.grid.n_points() {
        let t = partial.grid.time(k);
        for j in 0..=partial.n_p {
            let p = partial.p_node(j);
            rows.push((t, p, loss_of_utility(t, x, p, full, partial)?));
        }
    }
    Ok(rows)
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Writes `t,p,x,l` rows.
pub fn write_loss_csv<W: Write>(out: W, x: f64, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["t", "p", "x", "l"])?;
    for &(t, p, l) in rows {
        w.write_record([format!("{t}"), format!("{p}"), format!("{x}"), format!("{l}")])?;
    }
    w.flush()?;
    Ok(())
}
