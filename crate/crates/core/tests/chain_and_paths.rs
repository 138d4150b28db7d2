//! Statistical checks of the regime chain and price simulator.

use convlab_core::model::{presets, stationary_distribution, GeneratorMatrix, Model, RegimeTable};
use convlab_core::rng::path_rng;
use convlab_core::simulate::{
    simulate_chain, simulate_paths_with_increments, simulate_scenario, BrownianIncrements, ChainPath, PathInit,
    TimeGrid,
};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Stationary law of a 3-state chain from the directed spanning-tree
/// formula.
fn tree_stationary(q: &[Vec<f64>]) -> [f64; 3] {
    let w = |i: usize| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        q[j][i] * q[k][i] + q[j][k] * q[k][i] + q[k][j] * q[j][i]
    };
    let raw = [w(0), w(1), w(2)];
    let s: f64 = raw.iter().sum();
    raw.map(|v| v / s)
}

#[test]
fn three_state_stationary_law_matches_tree_formula() {
    let q = vec![vec![-0.5, 0.2, 0.3], vec![0.1, -0.4, 0.3], vec![0.6, 0.05, -0.65]];
    let gen = GeneratorMatrix::new(q.clone(), vec![1.0, 0.0, 0.0]);
    let nu = stationary_distribution(&gen).unwrap();
    let tree = tree_stationary(&q);
    for i in 0..3 {
        assert!((nu[i] - tree[i]).abs() < 1e-12);
    }
}

#[test]
fn first_jump_probability() {
    let gen = presets::fig1().generator;
    let n = 200_000;
    let mut jumped = 0usize;
    for path in 0..n {
        let mut rng = path_rng(11, path);
        let c = simulate_chain(&gen, &[1.0, 0.0], 1.0, &mut rng).unwrap();
        if c.n_jumps() > 0 {
            jumped += 1;
        }
    }
    let expect = 1.0 - (-0.01f64).exp();
    let frac = jumped as f64 / n as f64;
    let se = (expect * (1.0 - expect) / n as f64).sqrt();
    assert!((frac - expect).abs() < 4.0 * se, "{frac} vs {expect}");
}

#[test]
fn long_run_occupation_matches_stationary_law() {
    let gen = GeneratorMatrix::two_state(0.7, 0.2, [1.0, 0.0]);
    let mut rng = path_rng(5, 0);
    let horizon = 20_000.0;
    let c = simulate_chain(&gen, &[1.0, 0.0], horizon, &mut rng).unwrap();
    let occ = c.occupation_times(2);
    assert!((occ[0] / horizon - 2.0 / 9.0).abs() < 0.01);
}

#[test]
fn spread_mean_matches_ornstein_uhlenbeck_mean() {
    // Fixed regime: the Euler mean of X is the exact OU mean up to O(dt).
    let mut p = presets::fig1();
    p.regimes = RegimeTable {
        lambda1: vec![0.8],
        lambda2: vec![0.7],
        alpha1: vec![0.2],
        alpha2: vec![-0.1],
    };
    p.generator = GeneratorMatrix::new(vec![vec![0.0]], vec![1.0]);
    let m = Model::new(p.clone()).unwrap();
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let x0 = 0.6;
    let xs: Vec<f64> = (0..8000)
        .map(|i| {
            simulate_scenario(&m, &grid, PathInit::from_spread(x0), &[1.0], 3, i)
                .unwrap()
                .observed
                .x[200]
        })
        .collect();
    let (mean, se) = mean_and_se(&xs);
    let lam = 1.5;
    let level = (m.consts().gamma1 + 0.8 * 0.2 + 0.7 * -0.1) / lam;
    let exact = level + (x0 - level) * (-lam).exp();
    let bias_budget = 0.5 * lam * lam * 0.005 * (x0 - level).abs();
    assert!(
        (mean - exact).abs() < 4.0 * se + bias_budget,
        "{mean} vs {exact} (se {se})"
    );

    // Terminal variance against the OU variance.
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    let ou_var = m.consts().gamma2 / (2.0 * lam) * (1.0 - (-2.0 * lam).exp());
    assert!((var / ou_var - 1.0).abs() < 0.06, "{var} vs {ou_var}");
}

#[test]
fn increments_have_brownian_moments() {
    let grid = TimeGrid::new(10.0, 100_000).unwrap();
    let mut rng = path_rng(2, 0);
    let inc = BrownianIncrements::sample(&grid, &mut rng);
    let dt = grid.dt();
    for series in [&inc.dbm, &inc.db0, &inc.db1, &inc.db2] {
        let (mean, se) = mean_and_se(series);
        assert!(mean.abs() < 4.0 * se);
        let var = series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64;
        // Relative error of a chi-square mean with 1e5 dof is about 0.0045.
        assert!((var / dt - 1.0).abs() < 0.02);
    }
    let cross = inc.dbm.iter().zip(&inc.db1).map(|(a, b)| a * b).sum::<f64>() / inc.len() as f64;
    assert!(cross.abs() / dt < 0.02);
}

#[test]
fn spread_and_residual_returns_are_consistent() {
    let m = Model::new(presets::fig2()).unwrap();
    let grid = TimeGrid::new(2.0, 2000).unwrap();
    let b = simulate_scenario(&m, &grid, PathInit::from_spread(0.5), &[0.5, 0.5], 8, 1).unwrap();
    assert!(b.observed.spread_gap() < 1e-9);
    let p = m.params();
    let dt = grid.dt();
    for k in 0..grid.n_steps {
        let (mu1, mu2) = m.drifts(b.observed.x[k], b.regimes[k]);
        let e1 = b.observed.dr1(k) - mu1 * dt - p.sigma * b.increments.db0[k] - p.b1 * b.increments.db1[k];
        let e2 = b.observed.dr2(k) - mu2 * dt - p.sigma * b.increments.db0[k] - p.b2 * b.increments.db2[k];
        assert!(e1.abs() < 1e-12 && e2.abs() < 1e-12);
    }
}

#[test]
fn regime_switch_changes_drift_from_next_step() {
    let m = Model::new(presets::fig1()).unwrap();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let chain = ChainPath {
        horizon: 1.0,
        initial_state: 0,
        jump_times: vec![0.45],
        states: vec![1],
    };
    let b = simulate_paths_with_increments(
        &m,
        chain,
        &grid,
        PathInit::from_spread(0.3),
        BrownianIncrements::zeros(10),
    )
    .unwrap();
    assert_eq!(b.regimes, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
}
