//! Path simulation: regime chain, asset prices, spread and wealth.
//!
//! The chain is simulated exactly (exponential holding times). Prices use a
//! log-Euler scheme on a uniform grid, with drifts frozen at the regime and
//! spread observed at the left endpoint of each step. The spread follows its
//! own Euler recursion, which coincides with `log S1 - log S2` up to
//! roundoff because both are driven by the same increments.
//!
//! What a trader observes ([`ObservedPath`]) is kept apart from the hidden
//! chain ([`ChainPath`]) so partial-information code cannot read the regime
//! by accident.

use std::io::Write;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::FilterPath;
use crate::model::{GeneratorMatrix, Model};
use crate::rng::path_rng;
use crate::strategy::PortfolioWeights;

/// Uniform time grid on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("grid.T", "must be positive and finite"));
        }
        if n_steps == 0 {
            return Err(Error::invalid("grid.n_steps", "must be at least 1"));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid with step as close to `dt` as an integer step count allows.
    pub fn with_dt(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("grid.dt", "must be positive and finite"));
        }
        Self::new(horizon, ((horizon / dt).round() as usize).max(1))
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }
}

/// Piecewise-constant regime path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainPath {
    pub horizon: f64,
    pub initial_state: usize,
    /// Increasing jump times in `(0, horizon]`.
    pub jump_times: Vec<f64>,
    /// State entered at each jump.
    pub states: Vec<usize>,
}

impl ChainPath {
    /// Path that never leaves `state`.
    pub fn constant(state: usize, horizon: f64) -> Self {
        Self {
            horizon,
            initial_state: state,
            jump_times: Vec::new(),
            states: Vec::new(),
        }
    }

    /// Regime in force at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let n = self.jump_times.partition_point(|&s| s <= t);
        if n == 0 {
            self.initial_state
        } else {
            self.states[n - 1]
        }
    }

    pub fn terminal_state(&self) -> usize {
        self.states.last().copied().unwrap_or(self.initial_state)
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// Time spent in each of `k` states.
    pub fn occupation_times(&self, k: usize) -> Vec<f64> {
        let mut occ = vec![0.0; k];
        let mut t = 0.0;
        let mut s = self.initial_state;
        for (&tj, &sj) in self.jump_times.iter().zip(&self.states) {
            occ[s] += tj - t;
            t = tj;
            s = sj;
        }
        occ[s] += self.horizon - t;
        occ
    }

    /// Regime at the left endpoint of every grid step.
    pub fn on_grid(&self, grid: &TimeGrid) -> Vec<usize> {
        (0..grid.n_steps).map(|k| self.state_at(grid.time(k))).collect()
    }
}

fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Exact simulation of the chain on `[0, horizon]`.
pub fn simulate_chain<R: Rng + ?Sized>(
    gen: &GeneratorMatrix,
    initial: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<ChainPath> {
    let k = gen.k();
    if initial.len() != k {
        return Err(Error::invalid(
            "chain.initial",
            format!("expected {k} entries, got {}", initial.len()),
        ));
    }
    if initial.iter().any(|&v| !(v >= 0.0)) || initial.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid(
            "chain.initial",
            "must be a non-negative, non-zero vector",
        ));
    }
    let mut state = sample_categorical(initial, rng);
    let mut path = ChainPath::constant(state, horizon);
    let mut t = 0.0;
    loop {
        let rate = -gen.rate(state, state);
        if rate <= 0.0 {
            break;
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
        t += hold;
        if t > horizon {
            break;
        }
        let exits: Vec<f64> = (0..k)
            .map(|j| if j == state { 0.0 } else { gen.rate(state, j) })
            .collect();
        state = sample_categorical(&exits, rng);
        path.jump_times.push(t);
        path.states.push(state);
    }
    Ok(path)
}

/// Brownian increments `(dB^m, dB^0, dB^1, dB^2)` for each grid step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrownianIncrements {
    pub dbm: Vec<f64>,
    pub db0: Vec<f64>,
    pub db1: Vec<f64>,
    pub db2: Vec<f64>,
}

impl BrownianIncrements {
    pub fn zeros(n_steps: usize) -> Self {
        Self {
            dbm: vec![0.0; n_steps],
            db0: vec![0.0; n_steps],
            db1: vec![0.0; n_steps],
            db2: vec![0.0; n_steps],
        }
    }

    /// Independent `N(0, dt)` draws, four per step in the order
    /// `(m, 0, 1, 2)`.
    pub fn sample<R: Rng + ?Sized>(grid: &TimeGrid, rng: &mut R) -> Self {
        let sd = grid.dt().sqrt();
        let mut inc = Self::zeros(grid.n_steps);
        for k in 0..grid.n_steps {
            inc.dbm[k] = sd * rng.sample::<f64, _>(StandardNormal);
            inc.db0[k] = sd * rng.sample::<f64, _>(StandardNormal);
            inc.db1[k] = sd * rng.sample::<f64, _>(StandardNormal);
            inc.db2[k] = sd * rng.sample::<f64, _>(StandardNormal);
        }
        inc
    }

    pub fn len(&self) -> usize {
        self.dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dbm.is_empty()
    }
}

/// Starting point of a price path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathInit {
    pub x0: f64,
    pub sm0: f64,
    pub s2_0: f64,
}

impl PathInit {
    /// Unit index and second-stock prices with spread `x0`.
    pub fn from_spread(x0: f64) -> Self {
        Self {
            x0,
            sm0: 1.0,
            s2_0: 1.0,
        }
    }
}

/// Everything a trader can see: prices, spread and cumulative returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedPath {
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    pub log_sm: Vec<f64>,
    pub log_s1: Vec<f64>,
    pub log_s2: Vec<f64>,
    /// Residual returns: stock returns net of the riskless rate and the
    /// market component, `dR_j = μ_j dt + σ dB^0 + b_j dB^j`. They carry the
    /// same information as the prices given the index.
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

impl ObservedPath {
    pub fn sm(&self, k: usize) -> f64 {
        self.log_sm[k].exp()
    }

    pub fn s1(&self, k: usize) -> f64 {
        self.log_s1[k].exp()
    }

    pub fn s2(&self, k: usize) -> f64 {
        self.log_s2[k].exp()
    }

    pub fn dr1(&self, k: usize) -> f64 {
        self.r1[k + 1] - self.r1[k]
    }

    pub fn dr2(&self, k: usize) -> f64 {
        self.r2[k + 1] - self.r2[k]
    }

    /// Largest `|X - (log S1 - log S2)|` over the grid.
    pub fn spread_gap(&self) -> f64 {
        self.x
            .iter()
            .zip(self.log_s1.iter().zip(&self.log_s2))
            .map(|(x, (a, b))| (x - (a - b)).abs())
            .fold(0.0, f64::max)
    }
}

/// One simulated scenario: the observed path, the hidden chain and the
/// noise that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBundle {
    pub observed: ObservedPath,
    pub chain: ChainPath,
    /// Regime at the left endpoint of each step.
    pub regimes: Vec<usize>,
    pub increments: BrownianIncrements,
}

/// Simulates prices for a given chain path, drawing fresh increments.
pub fn simulate_paths<R: Rng + ?Sized>(
    model: &Model,
    chain: ChainPath,
    grid: &TimeGrid,
    init: PathInit,
    rng: &mut R,
) -> Result<PathBundle> {
    let inc = BrownianIncrements::sample(grid, rng);
    simulate_paths_with_increments(model, chain, grid, init, inc)
}

/// Simulates prices for a given chain path and given increments.
pub fn simulate_paths_with_increments(
    model: &Model,
    chain: ChainPath,
    grid: &TimeGrid,
    init: PathInit,
    increments: BrownianIncrements,
) -> Result<PathBundle> {
    if increments.len() != grid.n_steps {
        return Err(Error::Precondition(format!(
            "{} increments for a grid of {} steps",
            increments.len(),
            grid.n_steps
        )));
    }
    if !(init.sm0 > 0.0 && init.s2_0 > 0.0) {
        return Err(Error::Precondition("initial prices must be positive".into()));
    }
    let p = model.params();
    let c = model.consts();
    let dt = grid.dt();
    let n = grid.n_points();
    let regimes = chain.on_grid(grid);
    if regimes.iter().any(|&i| i >= model.k()) {
        return Err(Error::Precondition("chain visits a state outside the model".into()));
    }

    let mut obs = ObservedPath {
        grid: *grid,
        x: Vec::with_capacity(n),
        log_sm: Vec::with_capacity(n),
        log_s1: Vec::with_capacity(n),
        log_s2: Vec::with_capacity(n),
        r1: Vec::with_capacity(n),
        r2: Vec::with_capacity(n),
    };
    let (mut x, mut lm, mut l2) = (init.x0, init.sm0.ln(), init.s2_0.ln());
    let mut l1 = l2 + x;
    let (mut r1, mut r2) = (0.0, 0.0);
    let push = |o: &mut ObservedPath, x, lm, l1, l2, r1, r2| {
        o.x.push(x);
        o.log_sm.push(lm);
        o.log_s1.push(l1);
        o.log_s2.push(l2);
        o.r1.push(r1);
        o.r2.push(r2);
    };
    push(&mut obs, x, lm, l1, l2, r1, r2);

    let sm2 = p.sigma_m * p.sigma_m;
    let var1 = p.beta1 * p.beta1 * sm2 + c.sigma1 * c.sigma1;
    let var2 = p.beta2 * p.beta2 * sm2 + c.sigma2 * c.sigma2;
    for k in 0..grid.n_steps {
        let (mu1, mu2) = model.drifts(x, regimes[k]);
        let (dbm, db0, db1, db2) = (
            increments.dbm[k],
            increments.db0[k],
            increments.db1[k],
            increments.db2[k],
        );
        let ret1 = (p.r + p.beta1 * p.mu_m + mu1) * dt + p.beta1 * p.sigma_m * dbm + p.sigma * db0 + p.b1 * db1;
        let ret2 = (p.r + p.beta2 * p.mu_m + mu2) * dt + p.beta2 * p.sigma_m * dbm + p.sigma * db0 + p.b2 * db2;
        lm += (p.r + p.mu_m - 0.5 * sm2) * dt + p.sigma_m * dbm;
        l1 += ret1 - 0.5 * var1 * dt;
        l2 += ret2 - 0.5 * var2 * dt;
        x += (c.gamma1 + mu1 - mu2) * dt + (p.beta1 - p.beta2) * p.sigma_m * dbm + p.b1 * db1 - p.b2 * db2;
        r1 += mu1 * dt + p.sigma * db0 + p.b1 * db1;
        r2 += mu2 * dt + p.sigma * db0 + p.b2 * db2;
        if !(x.is_finite() && lm.is_finite() && l1.is_finite() && l2.is_finite()) {
            return Err(Error::NonFinite {
                what: "price path",
                step: k + 1,
            });
        }
        push(&mut obs, x, lm, l1, l2, r1, r2);
    }
    Ok(PathBundle {
        observed: obs,
        chain,
        regimes,
        increments,
    })
}

/// Draws the chain (from `initial`) and the prices for path `path_index`
/// of the stream identified by `seed`.
pub fn simulate_scenario(
    model: &Model,
    grid: &TimeGrid,
    init: PathInit,
    initial: &[f64],
    seed: u64,
    path_index: u64,
) -> Result<PathBundle> {
    let mut rng = path_rng(seed, path_index);
    let chain = simulate_chain(&model.params().generator, initial, grid.horizon, &mut rng)?;
    simulate_paths(model, chain, grid, init, &mut rng)
}

type FullFn<'a> = dyn Fn(f64, f64, usize) -> PortfolioWeights + Send + Sync + 'a;
type PartialFn<'a> = dyn Fn(f64, f64, &[f64]) -> PortfolioWeights + Send + Sync + 'a;

/// A trading rule, either reading the true regime or a filter vector.
pub enum PolicyHandle<'a> {
    Full(Box<FullFn<'a>>),
    Partial(Box<PartialFn<'a>>),
}

impl<'a> PolicyHandle<'a> {
    pub fn full(f: impl Fn(f64, f64, usize) -> PortfolioWeights + Send + Sync + 'a) -> Self {
        Self::Full(Box::new(f))
    }

    pub fn partial(f: impl Fn(f64, f64, &[f64]) -> PortfolioWeights + Send + Sync + 'a) -> Self {
        Self::Partial(Box::new(f))
    }

    /// Fixed weights regardless of state.
    pub fn constant(w: PortfolioWeights) -> Self {
        Self::full(move |_, _, _| w)
    }

    pub fn needs_filter(&self) -> bool {
        matches!(self, Self::Partial(_))
    }
}

impl std::fmt::Debug for PolicyHandle<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Full(_) => f.write_str("PolicyHandle::Full"),
            Self::Partial(_) => f.write_str("PolicyHandle::Partial"),
        }
    }
}

/// Log-wealth along a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WealthPath {
    pub log_w: Vec<f64>,
}

impl WealthPath {
    pub fn terminal_log_wealth(&self) -> f64 {
        *self.log_w.last().expect("non-empty wealth path")
    }

    pub fn wealth(&self, k: usize) -> f64 {
        self.log_w[k].exp()
    }
}

/// Euler scheme for `log W` under `policy`, driven by the same increments
/// as the price path. Positions are rebalanced at the left endpoint of each
/// step; partial-information policies read the filter at that point.
pub fn simulate_wealth(
    model: &Model,
    bundle: &PathBundle,
    policy: &PolicyHandle<'_>,
    w0: f64,
    filter: Option<&FilterPath>,
) -> Result<WealthPath> {
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(Error::Precondition("initial wealth must be positive".into()));
    }
    let grid = &bundle.observed.grid;
    if let (PolicyHandle::Partial(_), None) = (policy, filter) {
        return Err(Error::Precondition(
            "a partial-information policy needs a filter path".into(),
        ));
    }
    if let Some(fp) = filter {
        if fp.n_points() != grid.n_points() || fp.k != model.k() {
            return Err(Error::Precondition("filter path does not match the price path".into()));
        }
    }
    let p = model.params();
    let dt = grid.dt();
    let inc = &bundle.increments;
    let mut lw = w0.ln();
    let mut log_w = Vec::with_capacity(grid.n_points());
    log_w.push(lw);
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let x = bundle.observed.x[k];
        let h = match policy {
            PolicyHandle::Full(f) => f(t, x, bundle.regimes[k]),
            PolicyHandle::Partial(f) => f(t, x, filter.expect("checked above").pi(k)),
        };
        // Wealth dynamics always use the true regime.
        let (mu1, mu2) = model.drifts(x, bundle.regimes[k]);
        let e = h.market_exposure(p);
        let drift = crate::strategy::instantaneous_log_growth(p, &h, mu1, mu2);
        let shock = e * p.sigma_m * inc.dbm[k]
            + p.sigma * (h.h1 + h.h2) * inc.db0[k]
            + p.b1 * h.h1 * inc.db1[k]
            + p.b2 * h.h2 * inc.db2[k];
        lw += drift * dt + shock;
        if !lw.is_finite() {
            return Err(Error::NonFinite {
                what: "log wealth",
                step: k + 1,
            });
        }
        log_w.push(lw);
    }
    Ok(WealthPath { log_w })
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes paths in long format: `path,t,state,Sm,S1,S2,X,R1,R2,W`.
/// The wealth column is left empty when no wealth path is supplied.
pub fn write_paths_csv<'a, W: Write>(
    out: W,
    paths: impl IntoIterator<Item = (usize, &'a PathBundle, Option<&'a WealthPath>)>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["path", "t", "state", "Sm", "S1", "S2", "X", "R1", "R2", "W"])?;
    for (id, b, wealth) in paths {
        let o = &b.observed;
        for k in 0..o.grid.n_points() {
            let t = o.grid.time(k);
            let state = b.chain.state_at(t);
            let wv = wealth.map(|wp| fmt(wp.wealth(k))).unwrap_or_default();
            w.write_record([
                id.to_string(),
                fmt(t),
                state.to_string(),
                fmt(o.sm(k)),
                fmt(o.s1(k)),
                fmt(o.s2(k)),
                fmt(o.x[k]),
                fmt(o.r1[k]),
                fmt(o.r2[k]),
                wv,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
