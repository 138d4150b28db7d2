//! Monte Carlo estimates of expected log terminal wealth.
//!
//! Each path draws its own stream from `(seed, path index)`. When several
//! policies are evaluated together they share the chain, the noise and the
//! filter on every path (common random numbers), so differences between
//! them have much smaller error than the individual estimates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::filter::{run_filter_with, FilterCoefficients};
use crate::model::Model;
use crate::simulate::{simulate_scenario, simulate_wealth, PathInit, PolicyHandle, TimeGrid};

/// How the regime is initialised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StartState {
    /// Known starting regime; a filter, if needed, starts at that vertex.
    Regime(usize),
    /// Regime drawn from `p0`; a filter, if needed, starts at `p0`.
    Belief(Vec<f64>),
}

impl StartState {
    fn law(&self, k: usize) -> Result<Vec<f64>> {
        match self {
            StartState::Regime(i) if *i < k => {
                let mut v = vec![0.0; k];
                v[*i] = 1.0;
                Ok(v)
            }
            StartState::Regime(i) => Err(Error::Precondition(format!("start regime {i} out of range"))),
            StartState::Belief(p) => Ok(p.clone()),
        }
    }
}

/// Simulation settings shared by every policy in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub w0: f64,
    pub x0: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl McSettings {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            dt: 1e-3,
            w0: 1.0,
            x0: 0.0,
            execution: Execution::default(),
        }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// Welford accumulation; a constant sample gives exactly zero error.
    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in xs {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self {
            mean,
            std_error: (var / n.max(1) as f64).sqrt(),
            n_paths: n,
        }
    }
}

/// Terminal log wealth per policy and path.
#[derive(Debug, Clone, PartialEq)]
pub struct McSamples {
    /// `samples[policy][path]`.
    pub samples: Vec<Vec<f64>>,
}

impl McSamples {
    pub fn estimate(&self, policy: usize) -> McEstimate {
        McEstimate::from_samples(self.samples[policy].iter().copied())
    }

    /// Estimate of `E[log W_T(a)] - E[log W_T(b)]` from paired samples.
    pub fn paired_difference(&self, a: usize, b: usize) -> McEstimate {
        McEstimate::from_samples(self.samples[a].iter().zip(&self.samples[b]).map(|(x, y)| x - y))
    }
}

/// Evaluates several policies on the same simulated paths.
pub fn mc_compare(
    model: &Model,
    policies: &[PolicyHandle<'_>],
    start: &StartState,
    settings: &McSettings,
) -> Result<McSamples> {
    if settings.n_paths < 100 {
        return Err(Error::invalid("mc.n_paths", "must be at least 100"));
    }
    let k = model.k();
    let law = start.law(k)?;
    let grid = TimeGrid::with_dt(model.params().horizon, settings.dt)?;
    let init = PathInit::from_spread(settings.x0);
    let needs_filter = policies.iter().any(PolicyHandle::needs_filter);
    let coeffs = if needs_filter {
        Some(FilterCoefficients::new(model)?)
    } else {
        None
    };

    let per_path = settings
        .execution
        .map_indexed(settings.n_paths, |path| -> Result<Vec<f64>> {
            let bundle = simulate_scenario(model, &grid, init, &law, settings.seed, path as u64)?;
            let filter = match &coeffs {
                Some(c) => Some(run_filter_with(&bundle.observed, &law, &model.params().generator, c)?),
                None => None,
            };
            policies
                .iter()
                .map(
                    |pol| Ok(simulate_wealth(model, &bundle, pol, settings.w0, filter.as_ref())?.terminal_log_wealth()),
                )
                .collect()
        });

    let mut samples = vec![Vec::with_capacity(settings.n_paths); policies.len()];
    for row in per_path {
        for (dst, v) in samples.iter_mut().zip(row?) {
            dst.push(v);
        }
    }
    Ok(McSamples { samples })
}

/// Mean and standard error of `log W_T` under one policy.
pub fn mc_expected_log_utility(
    model: &Model,
    policy: &PolicyHandle<'_>,
    start: &StartState,
    settings: &McSettings,
) -> Result<McEstimate> {
    let s = mc_compare(model, std::slice::from_ref(policy), start, settings)?;
    Ok(s.estimate(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 0.25];
        let e = McEstimate::from_samples(xs);
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((e.mean - mean).abs() < 1e-14);
        assert!((e.std_error - (var / 5.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let e = McEstimate::from_samples(std::iter::repeat_n(0.1234, 1000));
        assert_eq!(e.std_error, 0.0);
    }
}
