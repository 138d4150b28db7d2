//! Optimal portfolio weights for a log-utility trader.
//!
//! Every strategy is myopic: it maximises the instantaneous log-growth rate
//! given the current expected excess returns. Under full information those
//! come from the observed regime; under partial information the regime
//! drifts are averaged with the filter probabilities (certainty
//! equivalence), which requires the mean-reversion intensities to be the
//! same in every regime.
//!
//! [`markowitz_oracle`] solves the same quadratic problems by brute-force
//! linear algebra and is used to cross-check the closed forms.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Model, ModelParams};
use crate::simulate::PolicyHandle;

const SIMPLEX_TOL: f64 = 1e-9;

/// Fractions of wealth in the first stock, second stock and market index.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PortfolioWeights {
    pub h1: f64,
    pub h2: f64,
    pub hm: f64,
}

impl PortfolioWeights {
    pub fn new(h1: f64, h2: f64, hm: f64) -> Self {
        Self { h1, h2, hm }
    }

    /// Fraction held in the riskless asset.
    pub fn cash(&self) -> f64 {
        1.0 - self.h1 - self.h2 - self.hm
    }

    pub fn is_finite(&self) -> bool {
        self.h1.is_finite() && self.h2.is_finite() && self.hm.is_finite()
    }

    /// Total exposure to the market factor.
    pub fn market_exposure(&self, p: &ModelParams) -> f64 {
        self.hm + p.beta1 * self.h1 + p.beta2 * self.h2
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.h1 - other.h1)
            .abs()
            .max((self.h2 - other.h2).abs())
            .max((self.hm - other.hm).abs())
    }
}

/// Constraint set a strategy is optimal over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Unrestricted,
    /// `beta1 h1 + beta2 h2 = 0`.
    BetaNeutral,
    /// `h1 + h2 = 0`.
    DeltaNeutral,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Unrestricted, Variant::BetaNeutral, Variant::DeltaNeutral];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Unrestricted => "unrestricted",
            Variant::BetaNeutral => "beta-neutral",
            Variant::DeltaNeutral => "delta-neutral",
        }
    }

    /// Linear constraint `a1 h1 + a2 h2 = 0`, if any.
    pub fn constraint(self, p: &ModelParams) -> Option<(f64, f64)> {
        match self {
            Variant::Unrestricted => None,
            Variant::BetaNeutral => Some((p.beta1, p.beta2)),
            Variant::DeltaNeutral => Some((1.0, 1.0)),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown strategy variant `{s}`"))
    }
}

fn sharpe_weight(p: &ModelParams) -> f64 {
    p.mu_m / (p.sigma_m * p.sigma_m)
}

// The closed forms below take the pricing-error drifts `mu1 = -λ₁(x-α₁)`
// and `mu2 = λ₂(x-α₂)`, either for one regime or filter-averaged.

fn unrestricted_from_drifts(model: &Model, mu1: f64, mu2: f64) -> PortfolioWeights {
    let p = model.params();
    let c = model.consts();
    let (b1s, b2s) = (p.b1 * p.b1, p.b2 * p.b2);
    let h1 = (mu1 - mu2 * c.varrho2) / (b1s + b2s * c.varrho2);
    let h2 = (mu2 - mu1 * c.varrho1) / (b2s + b1s * c.varrho1);
    PortfolioWeights::new(h1, h2, sharpe_weight(p) - p.beta1 * h1 - p.beta2 * h2)
}

fn beta_neutral_from_drifts(model: &Model, mu1: f64, mu2: f64) -> PortfolioWeights {
    let p = model.params();
    let ratio = p.beta1 / p.beta2;
    let den = p.b1 * p.b1 + ratio * ratio * p.b2 * p.b2 + p.sigma * p.sigma * (1.0 - ratio).powi(2);
    let h1 = (mu1 - ratio * mu2) / den;
    PortfolioWeights::new(h1, -ratio * h1, sharpe_weight(p))
}

// With beta1 != beta2 the stock legs keep a residual market exposure
// (beta1 - beta2) h1, which the index position offsets.
fn delta_neutral_from_drifts(model: &Model, mu1: f64, mu2: f64) -> PortfolioWeights {
    let p = model.params();
    let h1 = (mu1 - mu2) / (p.b1 * p.b1 + p.b2 * p.b2);
    PortfolioWeights::new(h1, -h1, sharpe_weight(p) - (p.beta1 - p.beta2) * h1)
}

fn from_drifts(model: &Model, variant: Variant, mu1: f64, mu2: f64) -> PortfolioWeights {
    match variant {
        Variant::Unrestricted => unrestricted_from_drifts(model, mu1, mu2),
        Variant::BetaNeutral => beta_neutral_from_drifts(model, mu1, mu2),
        Variant::DeltaNeutral => delta_neutral_from_drifts(model, mu1, mu2),
    }
}

fn check_regime(model: &Model, i: usize) -> Result<()> {
    if i >= model.k() {
        return Err(Error::Precondition(format!(
            "regime index {i} out of range for {} regimes",
            model.k()
        )));
    }
    Ok(())
}

fn check_beta2(model: &Model) -> Result<()> {
    if model.params().beta2 == 0.0 {
        return Err(Error::Precondition(
            "beta-neutral constraint degenerates when beta2 = 0".into(),
        ));
    }
    Ok(())
}

fn check_simplex(model: &Model, p: &[f64]) -> Result<()> {
    if p.len() != model.k() {
        return Err(Error::Precondition(format!(
            "filter vector has {} entries, expected {}",
            p.len(),
            model.k()
        )));
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= -SIMPLEX_TOL)) || (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Precondition("filter vector is not a probability vector".into()));
    }
    Ok(())
}

fn check_variant(model: &Model, variant: Variant) -> Result<()> {
    if variant == Variant::BetaNeutral {
        check_beta2(model)?;
    }
    Ok(())
}

/// Full-information optimum for any variant.
pub fn optimal_full_variant(model: &Model, variant: Variant, x: f64, i: usize) -> Result<PortfolioWeights> {
    check_regime(model, i)?;
    check_variant(model, variant)?;
    let (mu1, mu2) = model.drifts(x, i);
    Ok(from_drifts(model, variant, mu1, mu2))
}

/// Partial-information optimum for any variant.
pub fn optimal_partial_variant(model: &Model, variant: Variant, x: f64, p: &[f64]) -> Result<PortfolioWeights> {
    model.require_constant_lambda("the partial-information strategy")?;
    check_simplex(model, p)?;
    check_variant(model, variant)?;
    let (mu1, mu2) = model.filtered_drifts(x, p);
    Ok(from_drifts(model, variant, mu1, mu2))
}

pub fn optimal_full(model: &Model, x: f64, i: usize) -> PortfolioWeights {
    check_regime(model, i).expect("regime index in range");
    let (mu1, mu2) = model.drifts(x, i);
    unrestricted_from_drifts(model, mu1, mu2)
}

pub fn optimal_beta_neutral_full(model: &Model, x: f64, i: usize) -> Result<PortfolioWeights> {
    optimal_full_variant(model, Variant::BetaNeutral, x, i)
}

pub fn optimal_delta_neutral_full(model: &Model, x: f64, i: usize) -> PortfolioWeights {
    check_regime(model, i).expect("regime index in range");
    let (mu1, mu2) = model.drifts(x, i);
    delta_neutral_from_drifts(model, mu1, mu2)
}

pub fn optimal_partial(model: &Model, x: f64, p: &[f64]) -> Result<PortfolioWeights> {
    optimal_partial_variant(model, Variant::Unrestricted, x, p)
}

pub fn optimal_beta_neutral_partial(model: &Model, x: f64, p: &[f64]) -> Result<PortfolioWeights> {
    optimal_partial_variant(model, Variant::BetaNeutral, x, p)
}

pub fn optimal_delta_neutral_partial(model: &Model, x: f64, p: &[f64]) -> Result<PortfolioWeights> {
    optimal_partial_variant(model, Variant::DeltaNeutral, x, p)
}

/// Instantaneous covariance of (stock 1, stock 2, index) returns.
pub fn return_covariance(p: &ModelParams) -> Matrix3<f64> {
    let sm2 = p.sigma_m * p.sigma_m;
    let s2 = p.sigma * p.sigma;
    let c12 = p.beta1 * p.beta2 * sm2 + s2;
    Matrix3::new(
        p.beta1 * p.beta1 * sm2 + s2 + p.b1 * p.b1,
        c12,
        p.beta1 * sm2,
        c12,
        p.beta2 * p.beta2 * sm2 + s2 + p.b2 * p.b2,
        p.beta2 * sm2,
        p.beta1 * sm2,
        p.beta2 * sm2,
        sm2,
    )
}

/// Expected excess returns over the riskless rate of (stock 1, stock 2,
/// index) given the pricing-error drifts.
pub fn excess_returns(p: &ModelParams, mu1: f64, mu2: f64) -> [f64; 3] {
    [p.beta1 * p.mu_m + mu1, p.beta2 * p.mu_m + mu2, p.mu_m]
}

/// Maximises `μᵀh - ½ hᵀΣh`, optionally subject to `a1 h1 + a2 h2 = 0`,
/// by solving the first-order (KKT) system directly.
pub fn markowitz_oracle(
    excess: [f64; 3],
    params: &ModelParams,
    constraint: Option<(f64, f64)>,
) -> Result<PortfolioWeights> {
    let cov = return_covariance(params);
    let mu = Vector3::from(excess);
    let h = match constraint {
        None => cov
            .lu()
            .solve(&mu)
            .ok_or_else(|| Error::Singular("return covariance".into()))?,
        Some((a1, a2)) => {
            let mut kkt = Matrix4::zeros();
            kkt.fixed_view_mut::<3, 3>(0, 0).copy_from(&cov);
            let a = [a1, a2, 0.0];
            for (j, &aj) in a.iter().enumerate() {
                kkt[(3, j)] = aj;
                kkt[(j, 3)] = aj;
            }
            let rhs = Vector4::new(mu[0], mu[1], mu[2], 0.0);
            let sol = kkt
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("KKT system".into()))?;
            Vector3::new(sol[0], sol[1], sol[2])
        }
    };
    let w = PortfolioWeights::new(h[0], h[1], h[2]);
    if !w.is_finite() {
        return Err(Error::Singular("oracle produced non-finite weights".into()));
    }
    Ok(w)
}

/// Instantaneous expected log-growth rate of wealth under weights `h`.
pub fn instantaneous_log_growth(p: &ModelParams, h: &PortfolioWeights, mu1: f64, mu2: f64) -> f64 {
    let e = h.market_exposure(p);
    let idio = h.h1 + h.h2;
    p.r + e * p.mu_m + h.h1 * mu1 + h.h2 * mu2
        - 0.5
            * (p.sigma_m * p.sigma_m * e * e
                + p.sigma * p.sigma * idio * idio
                + p.b1 * p.b1 * h.h1 * h.h1
                + p.b2 * p.b2 * h.h2 * h.h2)
}

/// Policy that trades the full-information optimum of `variant`.
pub fn full_information_policy(model: &Model, variant: Variant) -> Result<PolicyHandle<'_>> {
    check_variant(model, variant)?;
    Ok(PolicyHandle::full(move |_t, x, i| {
        let (mu1, mu2) = model.drifts(x, i);
        from_drifts(model, variant, mu1, mu2)
    }))
}

/// Policy that trades the certainty-equivalent optimum of `variant` on the
/// filter probabilities.
pub fn partial_information_policy(model: &Model, variant: Variant) -> Result<PolicyHandle<'_>> {
    model.require_constant_lambda("the partial-information strategy")?;
    check_variant(model, variant)?;
    Ok(PolicyHandle::partial(move |_t, x, p| {
        let (mu1, mu2) = model.filtered_drifts(x, p);
        from_drifts(model, variant, mu1, mu2)
    }))
}
