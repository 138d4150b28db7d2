//! Acceptance checks.
//!
//! Each check returns a [`CheckResult`] with the observed and expected
//! quantities written out, so a failure report can be read without
//! rerunning anything. A check passes only if its property holds and it
//! finished inside its runtime budget.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use convlab_core::filter::{kolmogorov_baseline, run_filter, run_filter_with, FilterCoefficients};
use convlab_core::model::{averaged_params, presets, stationary_distribution, DerivedConstants, Model, ModelParams};
use convlab_core::model::{GeneratorMatrix, RegimeTable};
use convlab_core::rng::path_rng;
use convlab_core::simulate::{simulate_scenario, PathInit, PolicyHandle, TimeGrid};
use convlab_core::strategy::{
    excess_returns, full_information_policy, instantaneous_log_growth, markowitz_oracle, optimal_full_variant,
    optimal_partial_variant, partial_information_policy, PortfolioWeights, Variant,
};
use convlab_core::value::{
    hjb_residual_full, loss_of_utility, mbar_closed_form, mc_compare, solve_full_ode, solve_partial_pde, value_full,
    McSettings, PdeSettings, StartState, ValueVariant,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::experiments::{linspace, run_experiment, ValueComparison};
use crate::Result;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CheckResult {
    /// One-line summary.
    pub fn line(&self) -> String {
        format!(
            "[{}] AC{:<2} {:<34} {:>7.2}s  observed: {}  expected: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.observed,
            self.expected
        )
    }
}

/// Machine-readable report of a full run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// What a check body reports back.
struct Outcome {
    passed: bool,
    observed: String,
    expected: String,
}

fn timed(id: u8, name: &'static str, budget_seconds: f64, body: impl FnOnce() -> Result<Outcome>) -> CheckResult {
    let start = Instant::now();
    let outcome = body();
    let seconds = start.elapsed().as_secs_f64();
    let (passed, observed, expected) = match outcome {
        Ok(o) => (o.passed, o.observed, o.expected),
        Err(e) => (false, format!("error: {e}"), "check completes".into()),
    };
    let within = seconds <= budget_seconds;
    let observed = if within {
        observed
    } else {
        format!("{observed}; runtime {seconds:.1}s over budget")
    };
    CheckResult {
        id,
        name,
        passed: passed && within,
        observed,
        expected: format!("{expected}; runtime < {budget_seconds}s"),
        seconds,
        budget_seconds,
    }
}

/// Signature of a check runner.
pub type CheckFn = fn() -> CheckResult;

/// All criteria in order.
pub const ALL: [CheckFn; 11] = [
    oracle_equivalence,
    averaged_parameters,
    mc_hjb_consistency,
    mc_pde_consistency,
    suboptimality,
    dominance,
    mbar_against_rk4,
    filter_correctness,
    loss_nonnegativity,
    hjb_residual,
    determinism,
];

/// Runs every check, calling `on_result` as each one finishes.
pub fn run_all(mut on_result: impl FnMut(&CheckResult)) -> Report {
    let checks: Vec<CheckResult> = ALL
        .iter()
        .map(|f| {
            let r = f();
            on_result(&r);
            r
        })
        .collect();
    Report {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

// ---------------------------------------------------------------- AC1

/// Random two-regime parameter set with regime-dependent intensities.
fn random_params<R: Rng>(rng: &mut R) -> ModelParams {
    let mut u = |a: f64, b: f64| rng.random_range(a..b);
    ModelParams {
        r: u(0.0, 0.06),
        mu_m: u(-0.1, 0.2),
        sigma_m: u(0.05, 0.6),
        beta1: u(0.2, 2.0),
        beta2: u(0.2, 2.0),
        sigma: u(0.05, 0.5),
        b1: u(0.05, 0.6),
        b2: u(0.05, 0.6),
        horizon: 1.0,
        regimes: RegimeTable {
            lambda1: vec![u(0.05, 1.0), u(0.05, 1.0)],
            lambda2: vec![u(0.05, 1.0), u(0.05, 1.0)],
            alpha1: vec![u(-1.0, 1.0), u(-1.0, 1.0)],
            alpha2: vec![u(-1.0, 1.0), u(-1.0, 1.0)],
        },
        generator: GeneratorMatrix::two_state(u(0.01, 2.0), u(0.01, 2.0), [0.5, 0.5]),
    }
}

fn with_constant_lambda(p: &ModelParams) -> ModelParams {
    let mut q = p.clone();
    q.regimes.lambda1[1] = q.regimes.lambda1[0];
    q.regimes.lambda2[1] = q.regimes.lambda2[0];
    q
}

/// Worst deviations found by [`oracle_deviations`].
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleDeviations {
    /// Max abs difference between closed-form and oracle weights.
    pub weights: f64,
    /// Max relative difference between growth coefficients and the
    /// oracle's quadratic fit.
    pub growth: f64,
}

/// Compares the six closed-form strategies with the quadratic-program
/// oracle on `draws` random parameter sets, and the growth coefficients
/// with a quadratic fit of the oracle's optimal growth rate. `mutate` lets
/// tests corrupt the derived constants.
pub fn oracle_deviations(
    draws: usize,
    seed: u64,
    mutate: Option<fn(&mut DerivedConstants)>,
) -> Result<OracleDeviations> {
    let mut rng = path_rng(seed, 0);
    let mut dev = OracleDeviations::default();
    let build = |p: ModelParams| -> Result<Model> {
        let m = Model::new(p)?;
        Ok(match mutate {
            Some(f) => {
                let mut c = m.consts().clone();
                f(&mut c);
                Model::from_parts(m.params().clone(), c)
            }
            None => m,
        })
    };
    for _ in 0..draws {
        let raw = random_params(&mut rng);
        let full = build(raw.clone())?;
        let partial = build(with_constant_lambda(&raw))?;
        let x: f64 = rng.random_range(-1.0..1.0);
        let i = rng.random_range(0..2usize);
        let q: f64 = rng.random_range(0.0..1.0);
        let belief = [q, 1.0 - q];
        for variant in Variant::ALL {
            let (mu1, mu2) = full.drifts(x, i);
            let oracle = markowitz_oracle(
                excess_returns(full.params(), mu1, mu2),
                full.params(),
                variant.constraint(full.params()),
            )?;
            dev.weights = dev
                .weights
                .max(optimal_full_variant(&full, variant, x, i)?.max_abs_diff(&oracle));

            let (mu1, mu2) = partial.filtered_drifts(x, &belief);
            let p = partial.params();
            let oracle = markowitz_oracle(excess_returns(p, mu1, mu2), p, variant.constraint(p))?;
            dev.weights = dev
                .weights
                .max(optimal_partial_variant(&partial, variant, x, &belief)?.max_abs_diff(&oracle));
        }
        for variant in [ValueVariant::Unrestricted, ValueVariant::BetaNeutral] {
            for regime in 0..2 {
                let fit = fitted_growth(&full, regime, variant.strategy())?;
                let [c1, c2, c3] = variant.growth(full.consts());
                for (a, b) in fit.iter().zip([c1[regime], c2[regime], c3[regime]]) {
                    dev.growth = dev.growth.max((a - b).abs() / a.abs().max(1.0));
                }
            }
        }
    }
    Ok(dev)
}

/// `(c1, c2, c3)` with `c1 x^2 - c2 x + c3` through the oracle's maximal
/// growth at `x = -1, 0, 1`.
fn fitted_growth(m: &Model, i: usize, variant: Variant) -> Result<[f64; 3]> {
    let p = m.params();
    let g = |x: f64| -> Result<f64> {
        let (mu1, mu2) = m.drifts(x, i);
        let h = markowitz_oracle(excess_returns(p, mu1, mu2), p, variant.constraint(p))?;
        Ok(instantaneous_log_growth(p, &h, mu1, mu2))
    };
    let (gm, g0, gp) = (g(-1.0)?, g(0.0)?, g(1.0)?);
    Ok([(gp + gm) / 2.0 - g0, -(gp - gm) / 2.0, g0])
}

pub const ORACLE_WEIGHT_TOL: f64 = 1e-10;
pub const ORACLE_GROWTH_TOL: f64 = 1e-9;

pub fn oracle_equivalence() -> CheckResult {
    timed(1, "oracle equivalence", 5.0, || {
        let d = oracle_deviations(1000, 20_241, None)?;
        Ok(Outcome {
            passed: d.weights < ORACLE_WEIGHT_TOL && d.growth < ORACLE_GROWTH_TOL,
            observed: format!(
                "max |h - h_oracle| = {:.2e}, max growth-coefficient rel. error = {:.2e}",
                d.weights, d.growth
            ),
            expected: format!("< {ORACLE_WEIGHT_TOL:e} and < {ORACLE_GROWTH_TOL:e} over 1000 draws x 6 strategies"),
        })
    })
}

// ---------------------------------------------------------------- AC2

pub fn averaged_parameters() -> CheckResult {
    timed(2, "averaged parameters", 1.0, || {
        let p = presets::fig2();
        let nu = stationary_distribution(&p.generator)?;
        let avg = averaged_params(&p)?;
        let (pbar, l1, l2) = (nu[0], avg.regimes.lambda1[0], avg.regimes.lambda2[0]);
        let got = [format!("{pbar:.2}"), format!("{l1:.2}"), format!("{l2:.2}")];
        let want = ["0.22", "-0.12", "0.45"];
        let matches: Vec<bool> = got.iter().zip(want).map(|(g, w)| g == w).collect();
        // Weighting with the rounded stationary probability instead.
        let l2_rounded = 0.22 * p.regimes.lambda2[0] + 0.78 * p.regimes.lambda2[1];
        Ok(Outcome {
            passed: matches.iter().all(|&m| m),
            observed: format!(
                "p = {pbar:.6} ({}), lambda1 = {l1:.6} ({}), lambda2 = {l2:.6} ({}); with p rounded to 0.22, lambda2 = {l2_rounded:.3}",
                got[0], got[1], got[2]
            ),
            expected: format!("p = {}, lambda1 = {}, lambda2 = {} to two decimals", want[0], want[1], want[2]),
        })
    })
}

// ---------------------------------------------------------------- AC3

/// Simulated mean log wealth against its value-function target.
#[derive(Debug, Clone, Copy)]
pub struct McCase {
    pub mean: f64,
    pub std_error: f64,
    pub target: f64,
}

impl McCase {
    pub fn z(&self) -> f64 {
        (self.mean - self.target) / self.std_error
    }
}

/// Parameters for the full-information consistency runs: the value
/// comparison set on a one-year horizon.
pub fn mc_hjb_model() -> Result<Model> {
    let mut p = presets::fig2();
    p.horizon = 1.0;
    Ok(Model::new(p)?)
}

/// Expected log utility of the full-information optimum from regime
/// `regime` and spread `x0`, by simulation and from the ODE.
pub fn mc_hjb_case(model: &Model, seed: u64, x0: f64, regime: usize, n_paths: usize) -> Result<McCase> {
    let coeffs = solve_full_ode(model, 2000, ValueVariant::Unrestricted)?;
    let policy = full_information_policy(model, Variant::Unrestricted)?;
    let mut s = McSettings::new(n_paths, seed);
    s.x0 = x0;
    let est = mc_compare(model, std::slice::from_ref(&policy), &StartState::Regime(regime), &s)?.estimate(0);
    Ok(McCase {
        mean: est.mean,
        std_error: est.std_error,
        target: value_full(0.0, s.w0, x0, regime, &coeffs)?,
    })
}

const MC_XS: [f64; 3] = [-0.5, 0.0, 0.5];

pub fn mc_hjb_consistency() -> CheckResult {
    timed(3, "MC vs HJB (full information)", 120.0, || {
        let model = mc_hjb_model()?;
        let mut worst: f64 = 0.0;
        let mut detail = vec![];
        for regime in 0..2 {
            for (c, &x0) in MC_XS.iter().enumerate() {
                let case = mc_hjb_case(&model, 3_000 + (regime * 3 + c) as u64, x0, regime, 20_000)?;
                worst = worst.max(case.z().abs());
                detail.push(format!("i={} x={x0}: {:+.2}", regime + 1, case.z()));
            }
        }
        Ok(Outcome {
            passed: worst <= 3.0,
            observed: format!("max |z| = {worst:.2} ({})", detail.join(", ")),
            expected: "|mean - V| <= 3 SE for all 6 cases".into(),
        })
    })
}

// ---------------------------------------------------------------- AC4

pub fn mc_pde_consistency() -> CheckResult {
    timed(4, "MC vs PDE (partial information)", 300.0, || {
        const BUDGET: f64 = 5e-3;
        let model = Model::new(presets::fig4())?;
        let sol = solve_partial_pde(&model, PdeSettings::default(), ValueVariant::Unrestricted)?;
        let policy = partial_information_policy(&model, Variant::Unrestricted)?;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut detail = vec![];
        for (a, &p0) in [0.2, 0.7].iter().enumerate() {
            for (b, &x0) in MC_XS.iter().enumerate() {
                let mut s = McSettings::new(20_000, 4_000 + (a * 3 + b) as u64);
                s.x0 = x0;
                let start = StartState::Belief(vec![p0, 1.0 - p0]);
                let est = mc_compare(&model, std::slice::from_ref(&policy), &start, &s)?.estimate(0);
                let target = sol.value(0.0, s.w0, x0, p0)?;
                let err = (est.mean - target).abs();
                worst_excess = worst_excess.max(err - 3.0 * est.std_error - BUDGET);
                detail.push(format!("p0={p0} x={x0}: {err:.4} (3SE {:.4})", 3.0 * est.std_error));
            }
        }
        Ok(Outcome {
            passed: worst_excess <= 0.0,
            observed: detail.join(", "),
            expected: format!("|mean - V| <= 3 SE + {BUDGET} for all 6 cases"),
        })
    })
}

// ---------------------------------------------------------------- AC5

type Perturbation = (&'static str, fn(PortfolioWeights) -> PortfolioWeights);

/// Structured departures from the optimal full-information weights.
pub const PERTURBATIONS: [Perturbation; 5] = [
    ("h1 + 0.5", |h| PortfolioWeights::new(h.h1 + 0.5, h.h2, h.hm)),
    ("h2 - 0.5", |h| PortfolioWeights::new(h.h1, h.h2 - 0.5, h.hm)),
    ("hm + 0.5", |h| PortfolioWeights::new(h.h1, h.h2, h.hm + 0.5)),
    ("1.5 h*", |h| PortfolioWeights::new(1.5 * h.h1, 1.5 * h.h2, 1.5 * h.hm)),
    ("(h1, h2) + 0.4 (1, -1)", |h| {
        PortfolioWeights::new(h.h1 + 0.4, h.h2 - 0.4, h.hm)
    }),
];

pub fn suboptimality() -> CheckResult {
    timed(5, "suboptimality of perturbations", 180.0, || {
        let model = mc_hjb_model()?;
        let m = &model;
        let mut policies = vec![full_information_policy(m, Variant::Unrestricted)?];
        for (_, perturb) in PERTURBATIONS {
            policies.push(PolicyHandle::full(move |_, x, i| {
                perturb(convlab_core::strategy::optimal_full(m, x, i))
            }));
        }
        let mut s = McSettings::new(20_000, 5_000);
        s.x0 = 0.5;
        let samples = mc_compare(m, &policies, &StartState::Regime(0), &s)?;
        let mut worst = f64::INFINITY;
        let mut detail = vec![];
        for (j, (name, _)) in PERTURBATIONS.iter().enumerate() {
            let d = samples.paired_difference(0, j + 1);
            let z = d.mean / d.std_error;
            worst = worst.min(z);
            detail.push(format!("{name}: {:.4} ({z:.1} SE)", d.mean));
        }
        Ok(Outcome {
            passed: worst >= 2.0,
            observed: detail.join(", "),
            expected: "each loss >= 2 paired SE".into(),
        })
    })
}

// ---------------------------------------------------------------- AC6

/// Violations found on the dominance grid.
#[derive(Debug, Clone, Default)]
pub struct DominanceReport {
    pub switching_below_averaged: usize,
    pub unrestricted_below_beta: usize,
    /// Gap decreases moving away from zero along `x`, per gap family, as
    /// `(name, on x >= 0, on x <= 0)`.
    pub x_monotonicity: Vec<(String, usize, usize)>,
    /// Gap decreases along time-to-go, per gap family.
    pub tau_monotonicity: Vec<(String, usize)>,
    /// Where the regime-switching minus averaged gap is smallest at the
    /// longest time-to-go.
    pub gap_minimiser: f64,
}

/// Evaluates the dominance claims on `xs` x `taus` for `model`, which must
/// allow both strategy variants.
pub fn dominance_report(model: &Model, xs: &[f64], taus: &[f64]) -> Result<DominanceReport> {
    const SLACK: f64 = 1e-12;
    let cmp = ValueComparison::new(model, 2000)?;
    if cmp.variants.len() != 2 {
        return Err(crate::CliError::Config("dominance needs both strategy variants".into()));
    }
    // vals[t][x] = [(rs_u, av_u), (rs_b, av_b)]
    let mut vals = vec![];
    for &tau in taus {
        let row: Result<Vec<_>> = xs.iter().map(|&x| cmp.values(tau, 1.0, x)).collect();
        vals.push(row?);
    }
    let mut rep = DominanceReport::default();
    type Gap = (&'static str, fn(&[(f64, f64)]) -> f64);
    let gaps: [Gap; 4] = [
        ("switching - averaged (unrestricted)", |v| v[0].0 - v[0].1),
        ("switching - averaged (beta-neutral)", |v| v[1].0 - v[1].1),
        ("unrestricted - beta-neutral (switching)", |v| v[0].0 - v[1].0),
        ("unrestricted - beta-neutral (averaged)", |v| v[0].1 - v[1].1),
    ];
    for row in &vals {
        for v in row {
            rep.switching_below_averaged += (0..2).filter(|&k| v[k].0 < v[k].1 - SLACK).count();
            rep.unrestricted_below_beta += [v[0].0 < v[1].0 - SLACK, v[0].1 < v[1].1 - SLACK]
                .iter()
                .filter(|&&b| b)
                .count();
        }
    }
    for (name, gap) in gaps {
        let g: Vec<Vec<f64>> = vals.iter().map(|row| row.iter().map(|v| gap(v)).collect()).collect();
        let (mut right, mut left) = (0, 0);
        for row in &g {
            for j in 0..xs.len() - 1 {
                let (a, b) = (xs[j], xs[j + 1]);
                // Moving away from zero must not shrink the gap.
                if a >= 0.0 && row[j + 1] < row[j] - SLACK {
                    right += 1;
                }
                if b <= 0.0 && row[j] < row[j + 1] - SLACK {
                    left += 1;
                }
            }
        }
        let mut t_bad = 0;
        for k in 0..taus.len() - 1 {
            for j in 0..xs.len() {
                if g[k + 1][j] < g[k][j] - SLACK {
                    t_bad += 1;
                }
            }
        }
        rep.x_monotonicity.push((name.to_string(), right, left));
        rep.tau_monotonicity.push((name.to_string(), t_bad));
    }
    let last = &vals[taus.len() - 1];
    let (j_min, _) = last
        .iter()
        .map(|v| v[0].0 - v[0].1)
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, g)| if g < acc.1 { (j, g) } else { acc });
    rep.gap_minimiser = xs[j_min];
    Ok(rep)
}

pub fn dominance() -> CheckResult {
    timed(6, "dominance inequalities", 30.0, || {
        let model = Model::new(presets::fig2())?;
        let xs = linspace(-1.0, 1.0, 50);
        let horizon = model.params().horizon;
        let taus: Vec<f64> = (1..=50).map(|k| horizon * k as f64 / 50.0).collect();
        let rep = dominance_report(&model, &xs, &taus)?;
        let fmt_counts = |v: &[(String, usize)]| {
            v.iter()
                .map(|(n, c)| format!("{n}: {c}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let x_counts: Vec<String> = rep
            .x_monotonicity
            .iter()
            .map(|(n, r, l)| format!("{n}: {r} on x>=0, {l} on x<=0"))
            .collect();
        let x_total: usize = rep.x_monotonicity.iter().map(|(_, r, l)| r + l).sum();
        let t_total: usize = rep.tau_monotonicity.iter().map(|(_, c)| c).sum();
        Ok(Outcome {
            passed: rep.switching_below_averaged == 0
                && rep.unrestricted_below_beta == 0
                && x_total == 0
                && t_total == 0,
            observed: format!(
                "dominance violations: switching<averaged {}, unrestricted<beta {}; |x|-monotonicity violations [{}]; \
                 T-t monotonicity violations [{}]; switching-averaged gap smallest at x = {:.3}",
                rep.switching_below_averaged,
                rep.unrestricted_below_beta,
                x_counts.join(", "),
                fmt_counts(&rep.tau_monotonicity),
                rep.gap_minimiser
            ),
            expected: "no violations on the 50 x 50 grid".into(),
        })
    })
}

// ---------------------------------------------------------------- AC7

/// Classical RK4 for `m' = c1 - 2 Λ m` in time-to-go, returned at every
/// step.
pub fn mbar_rk4(c1: f64, lam: f64, horizon: f64, n: usize) -> Vec<f64> {
    let h = horizon / n as f64;
    let rhs = |m: f64| c1 - 2.0 * lam * m;
    let mut m = 0.0;
    let mut out = Vec::with_capacity(n + 1);
    out.push(m);
    for _ in 0..n {
        let k1 = rhs(m);
        let k2 = rhs(m + 0.5 * h * k1);
        let k3 = rhs(m + 0.5 * h * k2);
        let k4 = rhs(m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(m);
    }
    out
}

pub fn mbar_against_rk4() -> CheckResult {
    timed(7, "closed-form mbar vs RK4", 1.0, || {
        let model = Model::new(presets::fig4())?;
        let p = model.params();
        let n = 10_000;
        let mut worst: f64 = 0.0;
        for variant in [ValueVariant::Unrestricted, ValueVariant::BetaNeutral] {
            let c1 = variant.growth(model.consts())[0][0];
            let lam = p.regimes.lambda1[0] + p.regimes.lambda2[0];
            let rk = mbar_rk4(c1, lam, p.horizon, n);
            for (s, m) in rk.iter().enumerate() {
                let tau = p.horizon * s as f64 / n as f64;
                worst = worst.max((mbar_closed_form(p.horizon - tau, &model, variant)? - m).abs());
            }
        }
        Ok(Outcome {
            passed: worst < 1e-8,
            observed: format!("max error {worst:.2e}"),
            expected: "< 1e-8 with N_t = 1e4".into(),
        })
    })
}

// ---------------------------------------------------------------- AC8

pub fn filter_correctness() -> CheckResult {
    timed(8, "filter correctness", 120.0, || {
        let model = Model::new(presets::fig4())?;
        let gen = &model.params().generator;
        let coeffs = FilterCoefficients::new(&model)?;
        let grid = TimeGrid::new(1.0, 1000)?;
        let dt = grid.dt();
        let p0 = [0.5, 0.5];
        let init = PathInit::from_spread(0.05);

        // (a) simplex invariants.
        let mut simplex_bad = 0usize;
        let mut worst_mass: f64 = 0.0;
        for path in 0..100 {
            let b = simulate_scenario(&model, &grid, init, &p0, 8_001, path)?;
            let f = run_filter_with(&b.observed, &p0, gen, &coeffs)?;
            worst_mass = worst_mass.max(f.max_raw_mass_error);
            for n in 0..f.n_points() {
                let pi = f.pi(n);
                if pi.iter().any(|&v| v < 0.0) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    simplex_bad += 1;
                }
            }
        }

        // (b) uninformative observations follow the forward equation.
        let mut flat = presets::fig4();
        flat.regimes.alpha1 = vec![0.1, 0.1];
        flat.regimes.alpha2 = vec![-0.2, -0.2];
        let flat = Model::new(flat)?;
        let start = [0.9, 0.1];
        let b = simulate_scenario(&flat, &grid, init, &start, 8_002, 0)?;
        let f = run_filter(&b.observed, &start, &flat)?;
        let mut sup: f64 = 0.0;
        for n in 0..grid.n_points() {
            let exact = kolmogorov_baseline(gen, &start, grid.time(n));
            sup = sup.max((f.pi(n)[0] - exact[0]).abs());
        }

        // (c) unbiasedness against the chain marginal.
        let n_paths = 10_000u64;
        let checkpoints = [250usize, 500, 1000];
        let mut sums = [[0.0f64; 2]; 3];
        for path in 0..n_paths {
            let b = simulate_scenario(&model, &grid, init, &p0, 8_003, path)?;
            let f = run_filter_with(&b.observed, &p0, gen, &coeffs)?;
            for (c, &n) in checkpoints.iter().enumerate() {
                let v = f.pi(n)[0];
                sums[c][0] += v;
                sums[c][1] += v * v;
            }
        }
        let mut worst_z: f64 = 0.0;
        let mut detail = vec![];
        for (c, &n) in checkpoints.iter().enumerate() {
            let nf = n_paths as f64;
            let mean = sums[c][0] / nf;
            let var = (sums[c][1] - nf * mean * mean) / (nf - 1.0);
            let se = (var / nf).sqrt();
            let exact = kolmogorov_baseline(gen, &p0, grid.time(n))[0];
            let z = (mean - exact) / se;
            worst_z = worst_z.max(z.abs());
            detail.push(format!("t={}: {z:+.2}", grid.time(n)));
        }
        Ok(Outcome {
            passed: simplex_bad == 0 && worst_mass < 1e-10 && sup <= 5.0 * dt && worst_z <= 3.0,
            observed: format!(
                "(a) {simplex_bad} off-simplex points, raw mass error {worst_mass:.1e}; (b) sup error {sup:.2e}; (c) z {}",
                detail.join(", ")
            ),
            expected: format!("(a) 0; (b) <= {:.0e}; (c) |z| <= 3", 5.0 * dt),
        })
    })
}

// ---------------------------------------------------------------- AC9

pub const LOSS_TOLERANCE: f64 = -1e-4;

pub fn loss_nonnegativity() -> CheckResult {
    timed(9, "loss of utility", 30.0, || {
        let model = Model::new(presets::fig4())?;
        let x = 0.05;
        let settings = PdeSettings::default();
        let full = solve_full_ode(&model, settings.n_t, ValueVariant::Unrestricted)?;
        let partial = solve_partial_pde(&model, settings, ValueVariant::Unrestricted)?;
        let mut min = f64::INFINITY;
        let mut terminal: f64 = 0.0;
        let mut edge_argmax = 0usize;
        let mut argmax_p0 = 0.0;
        let n_t = partial.grid.n_steps;
        for k in 0..=n_t {
            let t = partial.grid.time(k);
            let row: Result<Vec<f64>> = (0..=partial.n_p)
                .map(|j| Ok(loss_of_utility(t, x, partial.p_node(j), &full, &partial)?))
                .collect();
            let row = row?;
            min = row.iter().copied().fold(min, f64::min);
            if k == n_t {
                terminal = row.iter().fold(0.0, |a, v| a.max(v.abs()));
                continue;
            }
            let (j_max, _) = row.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc },
            );
            if j_max == 0 || j_max == partial.n_p {
                edge_argmax += 1;
            }
            if k == 0 {
                argmax_p0 = partial.p_node(j_max);
            }
        }
        Ok(Outcome {
            passed: min >= LOSS_TOLERANCE && terminal <= 1e-12 && edge_argmax == 0,
            observed: format!(
                "min l = {min:.3e}; max |l(T)| = {terminal:.1e}; {edge_argmax} time slices peak at p in {{0, 1}}; peak at t = 0 is p = {argmax_p0}"
            ),
            expected: format!("min >= {LOSS_TOLERANCE:e}; l(T) = 0; peak at interior p for every t < T"),
        })
    })
}

// ---------------------------------------------------------------- AC10

pub fn hjb_residual() -> CheckResult {
    timed(10, "HJB residual", 10.0, || {
        let n_t = 4000;
        let mut worst: f64 = 0.0;
        let mut points = 0usize;
        for (name, p) in [
            ("fig1", presets::fig1()),
            ("fig2", presets::fig2()),
            ("fig3", presets::fig3()),
            ("fig4", presets::fig4()),
        ] {
            let model = Model::new(p)?;
            for variant in [ValueVariant::Unrestricted, ValueVariant::BetaNeutral] {
                let sol = solve_full_ode(&model, n_t, variant)?;
                for j in (2..=n_t - 2).step_by(40) {
                    for x in linspace(-1.0, 1.0, 21) {
                        for i in 0..model.k() {
                            let r = hjb_residual_full(&model, &sol, j, x, i)?;
                            if !r.is_finite() {
                                return Err(crate::CliError::Config(format!("non-finite residual for {name}")));
                            }
                            worst = worst.max(r.abs());
                            points += 1;
                        }
                    }
                }
            }
        }
        Ok(Outcome {
            passed: worst <= 1e-6,
            observed: format!("max |residual| = {worst:.2e} over {points} points"),
            expected: "<= 1e-6".into(),
        })
    })
}

// ---------------------------------------------------------------- AC11

fn scratch_dir(tag: &str) -> Result<PathBuf> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("convlab-{tag}-{}-{n}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Names of files that differ between two run directories.
pub fn compare_runs(a: &Path, b: &Path, files: &[String]) -> Result<Vec<String>> {
    let mut differing = vec![];
    for f in files {
        if std::fs::read(a.join(f))? != std::fs::read(b.join(f))? {
            differing.push(f.clone());
        }
    }
    Ok(differing)
}

pub fn determinism() -> CheckResult {
    timed(11, "determinism", 60.0, || {
        let root = scratch_dir("determinism")?;
        let mut differing = vec![];
        let mut n_files = 0;
        for exp in Experiment::NAMED {
            let cfg = ExperimentConfig::named(exp)?;
            let a = run_experiment(&cfg, &root.join("a"))?;
            let b = run_experiment(&cfg, &root.join("b"))?;
            let replay = ExperimentConfig::from_path(exp, &a.dir.join("config.toml"))?;
            let c = run_experiment(&replay, &root.join("c"))?;
            n_files += a.files.len();
            for other in [&b.dir, &c.dir] {
                for f in compare_runs(&a.dir, other, &a.files)? {
                    differing.push(format!("{}/{f}", exp.name()));
                }
            }
        }
        std::fs::remove_dir_all(&root)?;
        Ok(Outcome {
            passed: differing.is_empty(),
            observed: if differing.is_empty() {
                format!("{n_files} files identical across repeat and config replay")
            } else {
                format!("differing: {}", differing.join(", "))
            },
            expected: "byte-identical outputs".into(),
        })
    })
}
