//! Market and regime parameters, their validation, and every constant the
//! optimal strategies and value-function equations are built from.
//!
//! The market consists of a riskless asset, a market index and two
//! co-integrated stocks whose pricing errors mean-revert at regime-dependent
//! speeds towards regime-dependent levels. The regime is a continuous-time
//! Markov chain with generator `Q`.

mod config;

pub use config::{ChainSection, MarketSection, ParamsFile, RegimeSection};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const DIST_SUM_TOL: f64 = 1e-12;

/// Mean-reversion intensities and long-run pricing-error levels, one entry
/// per regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeTable {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
}

impl RegimeTable {
    pub fn len(&self) -> usize {
        self.lambda1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda1.is_empty()
    }

    /// True when both intensities are the same in every regime.
    pub fn has_constant_lambda(&self) -> bool {
        let same = |v: &[f64]| v.iter().all(|&l| l == v[0]);
        !self.is_empty() && same(&self.lambda1) && same(&self.lambda2)
    }
}

/// Transition intensities of the regime chain plus its initial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    /// Row-major `K x K` intensities; rows sum to zero.
    pub q: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn new(q: Vec<Vec<f64>>, initial: Vec<f64>) -> Self {
        Self { q, initial }
    }

    /// Two-state chain with `q12` = rate 1 -> 2 and `q21` = rate 2 -> 1.
    pub fn two_state(q12: f64, q21: f64, initial: [f64; 2]) -> Self {
        Self {
            q: vec![vec![-q12, q12], vec![q21, -q21]],
            initial: initial.to_vec(),
        }
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[i][j]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| self.q[i][j])
    }

    /// Checks the generator invariants. Zero off-diagonal rates are accepted
    /// with a warning so absorbing test chains can be simulated.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::invalid("chain.Q", "generator must have at least one state"));
        }
        for (i, row) in self.q.iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid(
                    format!("chain.Q[{i}]"),
                    format!("expected {k} entries, got {}", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("chain.Q[{i}]"), "non-finite rate"));
            }
            for (j, &v) in row.iter().enumerate() {
                if i != j && v < 0.0 {
                    return Err(Error::invalid(
                        format!("chain.Q[{i}][{j}]"),
                        format!("off-diagonal rate must be >= 0 (got {v})"),
                    ));
                }
                if i != j && v == 0.0 {
                    warn!("chain.Q[{i}][{j}] = 0: chain is not strictly positive off the diagonal");
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > ROW_SUM_TOL {
                return Err(Error::invalid(
                    format!("chain.Q[{i}]"),
                    format!("row sums to {sum:e}, expected 0"),
                ));
            }
        }
        if self.initial.len() != k {
            return Err(Error::invalid(
                "chain.initial",
                format!("expected {k} entries, got {}", self.initial.len()),
            ));
        }
        if self.initial.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("chain.initial", "entries must be >= 0"));
        }
        let total: f64 = self.initial.iter().sum();
        if (total - 1.0).abs() > DIST_SUM_TOL {
            return Err(Error::invalid(
                "chain.initial",
                format!("entries sum to {total}, expected 1"),
            ));
        }
        Ok(())
    }

    /// Strong connectivity of the transition graph.
    pub fn is_irreducible(&self) -> bool {
        let k = self.k();
        let reach = |forward: bool| {
            let mut seen = vec![false; k];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..k {
                    let rate = if forward { self.q[i][j] } else { self.q[j][i] };
                    if i != j && rate > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        k > 0 && reach(true) && reach(false)
    }
}

/// All market and regime parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub r: f64,
    pub mu_m: f64,
    pub sigma_m: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Common idiosyncratic volatility shared by both stocks.
    pub sigma: f64,
    pub b1: f64,
    pub b2: f64,
    /// Investment horizon `T` in years.
    pub horizon: f64,
    pub regimes: RegimeTable,
    pub generator: GeneratorMatrix,
}

impl ModelParams {
    pub fn k(&self) -> usize {
        self.regimes.len()
    }

    /// Stable hex digest of the parameter set, used to tie solutions that
    /// must come from the same model together.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let scalars = [
            self.r,
            self.mu_m,
            self.sigma_m,
            self.beta1,
            self.beta2,
            self.sigma,
            self.b1,
            self.b2,
            self.horizon,
        ];
        let vectors = [
            &self.regimes.lambda1,
            &self.regimes.lambda2,
            &self.regimes.alpha1,
            &self.regimes.alpha2,
            &self.generator.initial,
        ];
        for v in scalars.iter().chain(vectors.iter().flat_map(|v| v.iter())) {
            h.update(v.to_le_bytes());
        }
        for row in &self.generator.q {
            for v in row {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Copy with a replaced regime table.
    pub fn with_regimes(mut self, regimes: RegimeTable) -> Self {
        self.regimes = regimes;
        self
    }
}

/// Returns the input unchanged when every invariant holds.
pub fn validate_params(raw: ModelParams) -> Result<ModelParams> {
    let positive = [
        ("market.sigma_m", raw.sigma_m),
        ("market.sigma", raw.sigma),
        ("market.b1", raw.b1),
        ("market.b2", raw.b2),
        ("market.T", raw.horizon),
    ];
    for (field, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(field, format!("must be finite and > 0 (got {v})")));
        }
    }
    for (field, v) in [
        ("market.r", raw.r),
        ("market.mu_m", raw.mu_m),
        ("market.beta1", raw.beta1),
        ("market.beta2", raw.beta2),
    ] {
        if !v.is_finite() {
            return Err(Error::invalid(field, "must be finite"));
        }
    }

    let reg = &raw.regimes;
    let k = reg.len();
    if k == 0 {
        return Err(Error::invalid("regimes.lambda1", "at least one regime required"));
    }
    for (field, v) in [
        ("regimes.lambda2", &reg.lambda2),
        ("regimes.alpha1", &reg.alpha1),
        ("regimes.alpha2", &reg.alpha2),
    ] {
        if v.len() != k {
            return Err(Error::invalid(
                field,
                format!("expected {k} entries (one per regime), got {}", v.len()),
            ));
        }
    }
    for (field, v) in [
        ("regimes.lambda1", &reg.lambda1),
        ("regimes.lambda2", &reg.lambda2),
        ("regimes.alpha1", &reg.alpha1),
        ("regimes.alpha2", &reg.alpha2),
    ] {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(field, "non-finite entry"));
        }
    }
    for i in 0..k {
        let s = reg.lambda1[i] + reg.lambda2[i];
        if s <= 0.0 {
            return Err(Error::invalid(
                "regimes",
                format!(
                    "λ₁+λ₂ ≤ 0 in regime {} ({s}); the spread would not be stationary",
                    i + 1
                ),
            ));
        }
    }

    if raw.generator.k() != k {
        return Err(Error::invalid(
            "chain.Q",
            format!("generator has {} states but there are {k} regimes", raw.generator.k()),
        ));
    }
    raw.generator.validate()?;
    Ok(raw)
}

/// Constants shared by the optimal strategies and value-function equations,
/// computed once per model.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    /// Total idiosyncratic volatility of each stock.
    pub sigma1: f64,
    pub sigma2: f64,
    /// Correlation of the two idiosyncratic noises.
    pub rho: f64,
    /// Relative idiosyncratic variation of each stock.
    pub varrho1: f64,
    pub varrho2: f64,
    /// Constant part of the spread drift.
    pub gamma1: f64,
    /// Instantaneous variance of the spread.
    pub gamma2: f64,
    /// Unrestricted growth coefficients (`x^2`, `-x` and constant) per regime.
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub theta3: Vec<f64>,
    /// Beta-neutral growth coefficients per regime. NaN when both betas vanish.
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi3: Vec<f64>,
}

/// Coefficients of the maximal instantaneous log-growth
/// `c1 x^2 - c2 x + c3` for one set of intensities and levels.
pub(crate) fn unrestricted_growth(p: &ModelParams, l1: f64, l2: f64, a1: f64, a2: f64) -> [f64; 3] {
    let s2 = p.sigma * p.sigma;
    let b1s = p.b1 * p.b1;
    let b2s = p.b2 * p.b2;
    let det = b1s * b2s + s2 * (b1s + b2s);
    let base = p.r + p.mu_m * p.mu_m / (2.0 * p.sigma_m * p.sigma_m);
    let c1 = (b1s * l2 * l2 + b2s * l1 * l1 + s2 * (l1 + l2) * (l1 + l2)) / (2.0 * det);
    let c2 = (a1 * l1 * (l1 * (b2s + s2) + l2 * s2) + a2 * l2 * (l2 * (b1s + s2) + l1 * s2)) / det;
    let e1 = a1 * l1;
    let e2 = a2 * l2;
    let c3 = ((e1 * p.b2).powi(2) + (e2 * p.b1).powi(2) + s2 * (e1 + e2).powi(2)) / (2.0 * det) + base;
    [c1, c2, c3]
}

/// Same as [`unrestricted_growth`] under the beta-neutral constraint.
pub(crate) fn beta_neutral_growth(p: &ModelParams, l1: f64, l2: f64, a1: f64, a2: f64) -> [f64; 3] {
    let (be1, be2) = (p.beta1, p.beta2);
    let den = p.b1 * p.b1 * be2 * be2 + p.b2 * p.b2 * be1 * be1 + p.sigma * p.sigma * (be1 - be2).powi(2);
    if den == 0.0 {
        return [f64::NAN; 3];
    }
    let base = p.r + p.mu_m * p.mu_m / (2.0 * p.sigma_m * p.sigma_m);
    let slope = be2 * l1 + be1 * l2;
    let level = a1 * be2 * l1 + a2 * be1 * l2;
    [
        slope * slope / (2.0 * den),
        level * slope / den,
        level * level / (2.0 * den) + base,
    ]
}

/// Evaluates every derived constant from validated parameters.
pub fn derive_constants(p: &ModelParams) -> DerivedConstants {
    let s2 = p.sigma * p.sigma;
    let sigma1 = (s2 + p.b1 * p.b1).sqrt();
    let sigma2 = (s2 + p.b2 * p.b2).sqrt();
    let gamma1 = (p.beta1 - p.beta2) * p.mu_m
        - 0.5 * ((p.beta1 * p.beta1 - p.beta2 * p.beta2) * p.sigma_m * p.sigma_m + p.b1 * p.b1 - p.b2 * p.b2);
    let gamma2 = p.sigma_m * p.sigma_m * (p.beta1 - p.beta2).powi(2) + p.b1 * p.b1 + p.b2 * p.b2;

    let reg = &p.regimes;
    let k = reg.len();
    let mut theta = [Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k)];
    let mut phi = [Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k)];
    for i in 0..k {
        let args = (reg.lambda1[i], reg.lambda2[i], reg.alpha1[i], reg.alpha2[i]);
        let t = unrestricted_growth(p, args.0, args.1, args.2, args.3);
        let f = beta_neutral_growth(p, args.0, args.1, args.2, args.3);
        for c in 0..3 {
            theta[c].push(t[c]);
            phi[c].push(f[c]);
        }
    }
    let [theta1, theta2, theta3] = theta;
    let [phi1, phi2, phi3] = phi;

    DerivedConstants {
        sigma1,
        sigma2,
        rho: s2 / (sigma1 * sigma2),
        varrho1: s2 / (s2 + p.b1 * p.b1),
        varrho2: s2 / (s2 + p.b2 * p.b2),
        gamma1,
        gamma2,
        theta1,
        theta2,
        theta3,
        phi1,
        phi2,
        phi3,
    }
}

/// Validated parameters bundled with their derived constants.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    consts: DerivedConstants,
}

impl Model {
    pub fn new(raw: ModelParams) -> Result<Self> {
        let params = validate_params(raw)?;
        let consts = derive_constants(&params);
        Ok(Self { params, consts })
    }

    /// Pairs parameters with externally supplied constants without any
    /// validation. Intended for fault-injection in checks.
    pub fn from_parts(params: ModelParams, consts: DerivedConstants) -> Self {
        Self { params, consts }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn consts(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Long-run pricing-error drifts of the two stocks in regime `i` at spread `x`.
    #[inline]
    pub fn drifts(&self, x: f64, i: usize) -> (f64, f64) {
        let r = &self.params.regimes;
        (-r.lambda1[i] * (x - r.alpha1[i]), r.lambda2[i] * (x - r.alpha2[i]))
    }

    /// Drifts averaged under the regime probabilities `p`.
    #[inline]
    pub fn filtered_drifts(&self, x: f64, p: &[f64]) -> (f64, f64) {
        p.iter().enumerate().fold((0.0, 0.0), |(m1, m2), (i, &w)| {
            let (d1, d2) = self.drifts(x, i);
            (m1 + w * d1, m2 + w * d2)
        })
    }

    /// Regime levels averaged under `p`.
    pub fn filtered_alpha(&self, p: &[f64]) -> (f64, f64) {
        let r = &self.params.regimes;
        p.iter()
            .enumerate()
            .fold((0.0, 0.0), |(a, b), (i, &w)| (a + w * r.alpha1[i], b + w * r.alpha2[i]))
    }

    pub(crate) fn require_constant_lambda(&self, what: &str) -> Result<(f64, f64)> {
        let r = &self.params.regimes;
        if !r.has_constant_lambda() {
            return Err(Error::Precondition(format!(
                "{what} requires mean-reversion intensities that do not depend on the regime"
            )));
        }
        Ok((r.lambda1[0], r.lambda2[0]))
    }
}

/// Stationary law `ν` of an irreducible generator: `νᵀQ = 0`, `Σν = 1`.
///
/// Solved as the overdetermined system `[Qᵀ; 1ᵀ] ν = [0; 1]` in the
/// least-squares sense, which is exact for irreducible chains.
pub fn stationary_distribution(gen: &GeneratorMatrix) -> Result<Vec<f64>> {
    let k = gen.k();
    if k == 0 {
        return Err(Error::Precondition("empty generator".into()));
    }
    if !gen.is_irreducible() {
        return Err(Error::Reducible(
            "stationary distribution requires every state to communicate".into(),
        ));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let q = gen.to_matrix();
    let mut a = DMatrix::<f64>::zeros(k + 1, k);
    a.view_mut((0, 0), (k, k)).copy_from(&q.transpose());
    a.row_mut(k).fill(1.0);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;

    let svd = a.svd(true, true);
    if svd.singular_values.min() < 1e-14 * svd.singular_values.max() {
        return Err(Error::Singular("augmented generator system is rank deficient".into()));
    }
    let nu = svd.solve(&rhs, 1e-15).map_err(|e| Error::Singular(e.to_string()))?;
    // Clean roundoff-level negatives before renormalising.
    let mut nu: Vec<f64> = nu.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= total);
    Ok(nu)
}

/// Single-regime model whose intensities and levels are averaged under the
/// stationary law of the chain. All other parameters are copied.
pub fn averaged_params(p: &ModelParams) -> Result<ModelParams> {
    if p.k() < 2 {
        return Err(Error::Precondition("averaging needs at least two regimes".into()));
    }
    let nu = stationary_distribution(&p.generator)?;
    let avg = |v: &[f64]| v.iter().zip(&nu).map(|(a, w)| a * w).sum::<f64>();
    let r = &p.regimes;
    Ok(ModelParams {
        regimes: RegimeTable {
            lambda1: vec![avg(&r.lambda1)],
            lambda2: vec![avg(&r.lambda2)],
            alpha1: vec![avg(&r.alpha1)],
            alpha2: vec![avg(&r.alpha2)],
        },
        generator: GeneratorMatrix::new(vec![vec![0.0]], vec![1.0]),
        ..p.clone()
    })
}

/// Built-in two-regime parameter sets.
pub mod presets {
    use super::*;

    fn market(b1: f64, b2: f64, horizon: f64, regimes: RegimeTable, generator: GeneratorMatrix) -> ModelParams {
        ModelParams {
            r: 0.02,
            mu_m: 0.05,
            sigma_m: 0.35,
            beta1: 1.2,
            beta2: 1.05,
            sigma: 0.3,
            b1,
            b2,
            horizon,
            regimes,
            generator,
        }
    }

    /// Simulated strategy: regime-dependent intensities, zero levels.
    pub fn fig1() -> ModelParams {
        market(
            0.3,
            0.2,
            1.0,
            RegimeTable {
                lambda1: vec![0.5, -0.3],
                lambda2: vec![-0.2, 0.6],
                alpha1: vec![0.0, 0.0],
                alpha2: vec![0.0, 0.0],
            },
            GeneratorMatrix::two_state(0.01, 0.02, [1.0, 0.0]),
        )
    }

    /// Value-function comparison against the averaged-data model (`T - t = 2`).
    pub fn fig2() -> ModelParams {
        market(
            0.3,
            0.5,
            2.0,
            RegimeTable {
                lambda1: vec![0.5, -0.3],
                lambda2: vec![-0.1, 0.6],
                alpha1: vec![0.0, 0.0],
                alpha2: vec![0.0, 0.0],
            },
            GeneratorMatrix::two_state(0.7, 0.2, [1.0, 0.0]),
        )
    }

    /// Full versus partial information strategies. `b1`, `b2` are assumed
    /// equal to [`fig1`]'s.
    pub fn fig3() -> ModelParams {
        market(
            0.3,
            0.2,
            1.0,
            RegimeTable {
                lambda1: vec![0.2, 0.2],
                lambda2: vec![0.15, 0.15],
                alpha1: vec![-0.4, 0.1],
                alpha2: vec![0.5, -0.5],
            },
            GeneratorMatrix::two_state(0.01, 0.02, [0.0, 1.0]),
        )
    }

    /// Loss of utility from partial information. `b1`, `b2` defaulted as in [`fig3`].
    pub fn fig4() -> ModelParams {
        market(
            0.3,
            0.2,
            1.0,
            RegimeTable {
                lambda1: vec![0.3, 0.3],
                lambda2: vec![0.4, 0.4],
                alpha1: vec![0.5, -0.2],
                alpha2: vec![0.2, -0.3],
            },
            GeneratorMatrix::two_state(0.2, 0.5, [0.5, 0.5]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    #[test]
    fn fig1_parameters_are_accepted() {
        let p = validate_params(fig1()).unwrap();
        let r = &p.regimes;
        for i in 0..2 {
            assert!((r.lambda1[i] + r.lambda2[i] - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn stationarity_boundary_is_rejected() {
        let mut p = fig1();
        p.regimes.lambda1[0] = 0.1;
        p.regimes.lambda2[0] = -0.1;
        let err = validate_params(p).unwrap_err().to_string();
        assert!(err.contains("regime 1"), "{err}");
    }

    #[test]
    fn generator_row_sum_is_enforced() {
        let mut p = fig1();
        p.generator.q[0] = vec![-0.5, 0.4];
        let err = validate_params(p).unwrap_err().to_string();
        assert!(err.starts_with("chain.Q[0]"), "{err}");
    }

    #[test]
    fn bad_scalars_name_their_field() {
        let mut p = fig1();
        p.b2 = 0.0;
        assert!(validate_params(p).unwrap_err().to_string().starts_with("market.b2"));
        let mut p = fig1();
        p.regimes.alpha2.pop();
        assert!(validate_params(p)
            .unwrap_err()
            .to_string()
            .starts_with("regimes.alpha2"));
        let mut p = fig1();
        p.generator.initial = vec![0.7, 0.7];
        assert!(validate_params(p).unwrap_err().to_string().starts_with("chain.initial"));
    }

    #[test]
    fn zero_rates_are_accepted() {
        let mut p = fig1();
        p.generator = GeneratorMatrix::two_state(0.0, 0.0, [1.0, 0.0]);
        assert!(validate_params(p).is_ok());
    }

    #[test]
    fn hand_evaluated_constants() {
        let c = derive_constants(&fig1());
        assert!((c.varrho1 - 0.5).abs() < 1e-15);
        assert!((c.rho - 0.09 / (0.18f64.sqrt() * 0.13f64.sqrt())).abs() < 1e-15);
        assert!((c.rho - 0.58835).abs() < 5e-6);
        assert!((c.gamma1 - (-0.038171875)).abs() < 1e-15);
        assert!((c.gamma2 - 0.13275625).abs() < 1e-15);
    }

    #[test]
    fn symmetric_assets_have_zero_gamma1() {
        let mut p = fig1();
        p.beta2 = p.beta1;
        p.b2 = p.b1;
        assert_eq!(derive_constants(&p).gamma1, 0.0);
    }

    #[test]
    fn stationary_two_state() {
        let g = GeneratorMatrix::two_state(0.7, 0.2, [1.0, 0.0]);
        let nu = stationary_distribution(&g).unwrap();
        assert!((nu[0] - 2.0 / 9.0).abs() < 1e-14);
        assert!((nu[1] - 7.0 / 9.0).abs() < 1e-14);
        assert_eq!(format!("{:.2}", nu[0]), "0.22");

        let sym = stationary_distribution(&GeneratorMatrix::two_state(0.3, 0.3, [1.0, 0.0])).unwrap();
        assert!((sym[0] - 0.5).abs() < 1e-15 && (sym[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reducible_generator_is_refused() {
        let g = GeneratorMatrix::two_state(0.5, 0.0, [1.0, 0.0]);
        assert!(matches!(stationary_distribution(&g), Err(Error::Reducible(_))));
    }

    #[test]
    fn averaged_fig2_intensities() {
        let avg = averaged_params(&fig2()).unwrap();
        assert_eq!(avg.k(), 1);
        // Stationary weight of the first regime is exactly 2/9.
        assert!((avg.regimes.lambda1[0] - (2.0 * 0.5 - 7.0 * 0.3) / 9.0).abs() < 1e-14);
        assert!((avg.regimes.lambda2[0] - (-2.0 * 0.1 + 7.0 * 0.6) / 9.0).abs() < 1e-14);
        assert_eq!(format!("{:.2}", avg.regimes.lambda1[0]), "-0.12");
        assert_eq!(avg.generator.q, vec![vec![0.0]]);
        assert_eq!(avg.b2, 0.5);
    }

    #[test]
    fn averaging_identical_regimes_is_exact() {
        let mut p = fig2();
        p.regimes = RegimeTable {
            lambda1: vec![0.3, 0.3],
            lambda2: vec![0.1, 0.1],
            alpha1: vec![0.2, 0.2],
            alpha2: vec![-0.4, -0.4],
        };
        let avg = averaged_params(&p).unwrap();
        assert_eq!(avg.regimes.lambda1[0], 0.3);
        assert_eq!(avg.regimes.alpha2[0], -0.4);
    }

    #[test]
    fn symmetric_levels_average_to_zero() {
        let mut p = fig2();
        p.generator = GeneratorMatrix::two_state(0.4, 0.4, [1.0, 0.0]);
        p.regimes.alpha1 = vec![1.0, -1.0];
        assert!(averaged_params(&p).unwrap().regimes.alpha1[0].abs() < 1e-15);
    }

    #[test]
    fn averaging_needs_two_regimes() {
        let single = averaged_params(&fig2()).unwrap();
        assert!(averaged_params(&single).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = fig4();
        let mut b = fig4();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.regimes.alpha1[1] += 1e-9;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
