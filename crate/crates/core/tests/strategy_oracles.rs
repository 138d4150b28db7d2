//! Closed-form portfolios and growth coefficients against brute-force
//! quadratic optimisation.

use convlab_core::model::{GeneratorMatrix, Model, ModelParams, RegimeTable};
use convlab_core::strategy::{
    excess_returns, instantaneous_log_growth, markowitz_oracle, optimal_full_variant, optimal_partial_variant,
    return_covariance, PortfolioWeights, Variant,
};
use proptest::prelude::*;

fn params_from(v: &[f64], constant_lambda: bool) -> ModelParams {
    let (l1a, l2a) = (v[8], v[9]);
    let (l1b, l2b) = if constant_lambda { (l1a, l2a) } else { (v[10], v[11]) };
    ModelParams {
        r: v[0],
        mu_m: v[1],
        sigma_m: v[2],
        beta1: v[3],
        beta2: v[4],
        sigma: v[5],
        b1: v[6],
        b2: v[7],
        horizon: 1.0,
        regimes: RegimeTable {
            lambda1: vec![l1a, l1b],
            lambda2: vec![l2a, l2b],
            alpha1: vec![v[12], v[13]],
            alpha2: vec![v[14], v[15]],
        },
        generator: GeneratorMatrix::two_state(v[16], v[17], [0.5, 0.5]),
    }
}

fn param_vec() -> impl Strategy<Value = Vec<f64>> {
    (
        (
            0.0..0.06f64,
            -0.1..0.2f64,
            0.05..0.6f64,
            0.2..2.0f64,
            0.2..2.0f64,
            0.05..0.5f64,
        ),
        (
            0.05..0.6f64,
            0.05..0.6f64,
            0.05..1.0f64,
            0.05..1.0f64,
            0.05..1.0f64,
            0.05..1.0f64,
        ),
        (
            -1.0..1.0f64,
            -1.0..1.0f64,
            -1.0..1.0f64,
            -1.0..1.0f64,
            0.01..2.0f64,
            0.01..2.0f64,
        ),
    )
        .prop_map(|(a, b, c)| {
            vec![
                a.0, a.1, a.2, a.3, a.4, a.5, b.0, b.1, b.2, b.3, b.4, b.5, c.0, c.1, c.2, c.3, c.4, c.5,
            ]
        })
}

/// Cramer's rule, independent of any linear-algebra crate.
fn cramer3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *o = det(m) / d;
    }
    out
}

/// Growth coefficients transcribed term by term, for comparison with the
/// library's derived constants.
fn literal_theta(p: &ModelParams, i: usize) -> [f64; 3] {
    let (l1, l2, a1, a2) = (
        p.regimes.lambda1[i],
        p.regimes.lambda2[i],
        p.regimes.alpha1[i],
        p.regimes.alpha2[i],
    );
    let (s, b1, b2) = (p.sigma, p.b1, p.b2);
    let d = b1.powi(2) * b2.powi(2) + s.powi(2) * (b1.powi(2) + b2.powi(2));
    let t1 = (b1.powi(2) * l2.powi(2) + b2.powi(2) * l1.powi(2) + s.powi(2) * (l1 + l2).powi(2)) / (2.0 * d);
    let t2 = (a1 * l1 * (l1 * (b2.powi(2) + s.powi(2)) + l2 * s.powi(2))
        + a2 * l2 * (l2 * (b1.powi(2) + s.powi(2)) + l1 * s.powi(2)))
        / d;
    let t3 = ((a1 * l1 * b2).powi(2) + (a2 * l2 * b1).powi(2) + s.powi(2) * (a1 * l1 + a2 * l2).powi(2)) / (2.0 * d)
        + p.r
        + p.mu_m.powi(2) / (2.0 * p.sigma_m.powi(2));
    [t1, t2, t3]
}

fn literal_phi(p: &ModelParams, i: usize) -> [f64; 3] {
    let (l1, l2, a1, a2) = (
        p.regimes.lambda1[i],
        p.regimes.lambda2[i],
        p.regimes.alpha1[i],
        p.regimes.alpha2[i],
    );
    let (be1, be2) = (p.beta1, p.beta2);
    let d = p.b1.powi(2) * be2.powi(2) + p.b2.powi(2) * be1.powi(2) + p.sigma.powi(2) * (be1 - be2).powi(2);
    let f1 = (be2 * l1 + be1 * l2).powi(2) / (2.0 * d);
    let f2 = (a1 * be2 * l1 + a2 * be1 * l2) * (be1 * l2 + be2 * l1) / d;
    let f3 = (a1 * be2 * l1 + a2 * be1 * l2).powi(2) / (2.0 * d) + p.r + p.mu_m.powi(2) / (2.0 * p.sigma_m.powi(2));
    [f1, f2, f3]
}

/// Fits `c1 x^2 - c2 x + c3` through the oracle's maximal growth at three
/// spreads.
fn fitted_growth(m: &Model, i: usize, variant: Variant) -> [f64; 3] {
    let p = m.params();
    let g = |x: f64| {
        let (mu1, mu2) = m.drifts(x, i);
        let h = markowitz_oracle(excess_returns(p, mu1, mu2), p, variant.constraint(p)).unwrap();
        instantaneous_log_growth(p, &h, mu1, mu2)
    };
    let (gm, g0, gp) = (g(-1.0), g(0.0), g(1.0));
    [(gp + gm) / 2.0 - g0, -(gp - gm) / 2.0, g0]
}

#[test]
fn cramer_agrees_with_lu_oracle() {
    let p = convlab_core::model::presets::fig2();
    let cov = return_covariance(&p);
    let a = [0, 1, 2].map(|r| [0, 1, 2].map(|c| cov[(r, c)]));
    let mu = [0.07, -0.01, 0.05];
    let h = cramer3(a, mu);
    let o = markowitz_oracle(mu, &p, None).unwrap();
    assert!(o.max_abs_diff(&PortfolioWeights::new(h[0], h[1], h[2])) < 1e-12);
}

#[test]
fn literal_growth_coefficients_match_derived_constants() {
    for p in [
        convlab_core::model::presets::fig1(),
        convlab_core::model::presets::fig2(),
        convlab_core::model::presets::fig3(),
        convlab_core::model::presets::fig4(),
    ] {
        let m = Model::new(p.clone()).unwrap();
        let c = m.consts();
        for i in 0..2 {
            let t = literal_theta(&p, i);
            let f = literal_phi(&p, i);
            for (a, b) in t.iter().zip([c.theta1[i], c.theta2[i], c.theta3[i]]) {
                assert!((a - b).abs() < 1e-14);
            }
            for (a, b) in f.iter().zip([c.phi1[i], c.phi2[i], c.phi3[i]]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn full_information_closed_forms_solve_the_quadratic_program(v in param_vec(), x in -2.0..2.0f64, i in 0usize..2) {
        let p = params_from(&v, false);
        let m = Model::new(p.clone()).unwrap();
        let (mu1, mu2) = m.drifts(x, i);
        for variant in Variant::ALL {
            let w = optimal_full_variant(&m, variant, x, i).unwrap();
            let o = markowitz_oracle(excess_returns(&p, mu1, mu2), &p, variant.constraint(&p)).unwrap();
            prop_assert!(w.max_abs_diff(&o) < 1e-10 * (1.0 + o.h1.abs().max(o.h2.abs())), "{variant:?}");
        }
    }

    #[test]
    fn partial_information_closed_forms_solve_the_quadratic_program(
        v in param_vec(), x in -2.0..2.0f64, q in 0.0..1.0f64,
    ) {
        let p = params_from(&v, true);
        let m = Model::new(p.clone()).unwrap();
        let probs = [q, 1.0 - q];
        let (mu1, mu2) = m.filtered_drifts(x, &probs);
        for variant in Variant::ALL {
            let w = optimal_partial_variant(&m, variant, x, &probs).unwrap();
            let o = markowitz_oracle(excess_returns(&p, mu1, mu2), &p, variant.constraint(&p)).unwrap();
            prop_assert!(w.max_abs_diff(&o) < 1e-10 * (1.0 + o.h1.abs().max(o.h2.abs())), "{variant:?}");
        }
    }

    #[test]
    fn optimum_beats_perturbations(v in param_vec(), x in -1.0..1.0f64, d in prop::array::uniform3(-0.5..0.5f64)) {
        let p = params_from(&v, false);
        let m = Model::new(p.clone()).unwrap();
        let (mu1, mu2) = m.drifts(x, 0);
        let best = optimal_full_variant(&m, Variant::Unrestricted, x, 0).unwrap();
        let moved = PortfolioWeights::new(best.h1 + d[0], best.h2 + d[1], best.hm + d[2]);
        prop_assert!(instantaneous_log_growth(&p, &best, mu1, mu2) >= instantaneous_log_growth(&p, &moved, mu1, mu2) - 1e-12);
        // Constrained optima are feasible points of the unconstrained problem.
        for variant in [Variant::BetaNeutral, Variant::DeltaNeutral] {
            let w = optimal_full_variant(&m, variant, x, 0).unwrap();
            prop_assert!(instantaneous_log_growth(&p, &best, mu1, mu2) >= instantaneous_log_growth(&p, &w, mu1, mu2) - 1e-12);
        }
    }

    #[test]
    fn growth_coefficients_match_oracle_fit(v in param_vec()) {
        let p = params_from(&v, false);
        let m = Model::new(p).unwrap();
        let c = m.consts();
        for i in 0..2 {
            let t = fitted_growth(&m, i, Variant::Unrestricted);
            let f = fitted_growth(&m, i, Variant::BetaNeutral);
            let scale = 1.0 + t.iter().chain(&f).fold(0.0f64, |a, b| a.max(b.abs()));
            for (a, b) in t.iter().zip([c.theta1[i], c.theta2[i], c.theta3[i]]) {
                prop_assert!((a - b).abs() < 1e-9 * scale);
            }
            for (a, b) in f.iter().zip([c.phi1[i], c.phi2[i], c.phi3[i]]) {
                prop_assert!((a - b).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn certainty_equivalence_is_linear_in_the_filter(v in param_vec(), x in -1.0..1.0f64, q in 0.0..1.0f64) {
        let p = params_from(&v, true);
        let m = Model::new(p).unwrap();
        for variant in Variant::ALL {
            let w = optimal_partial_variant(&m, variant, x, &[q, 1.0 - q]).unwrap();
            let a = optimal_full_variant(&m, variant, x, 0).unwrap();
            let b = optimal_full_variant(&m, variant, x, 1).unwrap();
            let mix = PortfolioWeights::new(
                q * a.h1 + (1.0 - q) * b.h1,
                q * a.h2 + (1.0 - q) * b.h2,
                q * a.hm + (1.0 - q) * b.hm,
            );
            prop_assert!(w.max_abs_diff(&mix) < 1e-10 * (1.0 + mix.h1.abs().max(mix.h2.abs())));
        }
    }
}
