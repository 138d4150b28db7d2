//! Named experiments and their on-disk output.
//!
//! Every run writes into `<out>/<experiment>/`: the CSV tables, a
//! `config.toml` that reproduces the run byte for byte, and `meta.json`
//! describing seed, generator, parameters, grids and schemes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use convlab_core::filter::{run_filter, write_filter_csv, FilterPath};
use convlab_core::model::{averaged_params, stationary_distribution, Model, ParamsFile};
use convlab_core::rng::RNG_DESCRIPTION;
use convlab_core::simulate::{simulate_scenario, simulate_wealth, write_paths_csv, PathBundle, PathInit, TimeGrid};
use convlab_core::strategy::{
    full_information_policy, optimal_full_variant, optimal_partial_variant, PortfolioWeights, Variant,
};
use convlab_core::value::{
    loss_of_utility, solve_full_ode, solve_partial_pde, strided, value_full, write_full_value_csv, write_loss_csv,
    write_partial_value_csv_every, PdeSettings, ValueCoefficientsFull, ValueVariant,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::{CliError, Result};

/// Number of points on the value-curve grids.
pub const CURVE_POINTS: usize = 50;

/// Files written by one run, relative to its directory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    experiment: &'static str,
    version: &'static str,
    seed: u64,
    rng: &'static str,
    fingerprint: String,
    params: ParamsFile,
    dt: f64,
    n_t: usize,
    n_p: usize,
    n_paths: usize,
    x0: f64,
    w0: f64,
    p0: &'a [f64],
    schemes: Vec<&'static str>,
    assumptions: Vec<&'static str>,
    files: &'a [String],
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Parses `a:b:n` into [`linspace`] points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("grid `{spec}`: expected a:b:n with n >= 1"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok(linspace(a, b, n))
}

fn f(v: f64) -> String {
    format!("{v}")
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        let file = self.create(name)?;
        Ok(csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file))
    }
}

/// Runs `cfg` and writes its output under `out_root/<experiment>/`.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<RunOutput> {
    let dir = out_root.join(cfg.experiment.name());
    std::fs::create_dir_all(&dir)?;
    let mut out = Outputs { dir, files: vec![] };
    let model = Model::new(cfg.params.clone())?;
    let mut schemes = vec![];
    match cfg.experiment {
        Experiment::Fig1 => {
            schemes.extend(PATH_SCHEMES);
            strategy_path(cfg, &model, &mut out)?;
        }
        Experiment::Fig2 => {
            schemes.push(ODE_SCHEME);
            value_curves(cfg, &model, &mut out)?;
        }
        Experiment::Fig3 => {
            schemes.extend(PATH_SCHEMES);
            schemes.push(FILTER_SCHEME);
            information_path(cfg, &model, &mut out)?;
        }
        Experiment::Fig4 => {
            schemes.extend([ODE_SCHEME, PDE_SCHEME]);
            loss_surface(cfg, &model, &mut out)?;
        }
        Experiment::Custom => {
            schemes.extend(PATH_SCHEMES);
            schemes.push(ODE_SCHEME);
            strategy_path(cfg, &model, &mut out)?;
            for variant in value_variants(&model) {
                let coeffs = solve_full_ode(&model, cfg.n_t, variant)?;
                let name = format!("full_value_{}.csv", variant.name());
                write_full_value_csv(out.create(&name)?, &coeffs)?;
            }
            if model.k() == 2 && model.params().regimes.has_constant_lambda() {
                schemes.extend([FILTER_SCHEME, PDE_SCHEME]);
                information_path(cfg, &model, &mut out)?;
                loss_surface(cfg, &model, &mut out)?;
            } else {
                log::info!("skipping partial-information output (needs two regimes and constant intensities)");
            }
        }
    }

    std::fs::write(out.dir.join("config.toml"), cfg.to_toml_string()?)?;
    out.files.push("config.toml".into());
    out.files.push("meta.json".into());
    let meta = RunMeta {
        experiment: cfg.experiment.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        rng: RNG_DESCRIPTION,
        fingerprint: cfg.params.fingerprint(),
        params: ParamsFile::from(&cfg.params),
        dt: cfg.dt,
        n_t: cfg.n_t,
        n_p: cfg.n_p,
        n_paths: cfg.n_paths,
        x0: cfg.x0,
        w0: cfg.w0,
        p0: &cfg.p0,
        schemes,
        assumptions: cfg.experiment.assumptions(),
        files: &out.files,
    };
    let mut w = BufWriter::new(File::create(out.dir.join("meta.json"))?);
    serde_json::to_writer_pretty(&mut w, &meta)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(RunOutput {
        dir: out.dir,
        files: out.files,
    })
}

const PATH_SCHEMES: [&str; 2] = [
    "chain: exact simulation of jump times",
    "prices: Euler steps on log prices and the spread, one noise draw per step",
];
const FILTER_SCHEME: &str = "filter: Euler step of the innovations form, clipped and renormalised onto the simplex";
const ODE_SCHEME: &str = "full-information value: classical RK4 in time-to-go on n_t steps";
const PDE_SCHEME: &str =
    "partial-information value: explicit upwind finite differences in p, sub-stepped to the stability bound";

fn value_variants(model: &Model) -> Vec<ValueVariant> {
    if model.params().beta2 == 0.0 {
        vec![ValueVariant::Unrestricted]
    } else {
        vec![ValueVariant::Unrestricted, ValueVariant::BetaNeutral]
    }
}

fn simulate_one(cfg: &ExperimentConfig, model: &Model) -> Result<(TimeGrid, PathBundle)> {
    let grid = TimeGrid::with_dt(cfg.params.horizon, cfg.dt)?;
    let bundle = simulate_scenario(model, &grid, PathInit::from_spread(cfg.x0), &cfg.p0, cfg.seed, 0)?;
    Ok((grid, bundle))
}

fn push_weights(row: &mut Vec<String>, h: &PortfolioWeights) {
    row.extend([f(h.h1), f(h.h2), f(h.hm), f(h.cash())]);
}

/// One path traded with the full-information strategies.
fn strategy_path(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<()> {
    let (grid, bundle) = simulate_one(cfg, model)?;
    let policy = full_information_policy(model, Variant::Unrestricted)?;
    let wealth = simulate_wealth(model, &bundle, &policy, cfg.w0, None)?;
    write_paths_csv(out.create("path.csv")?, [(0, &bundle, Some(&wealth))])?;

    let variants: Vec<Variant> = value_variants(model).into_iter().map(ValueVariant::strategy).collect();
    let mut w = out.csv("weights.csv")?;
    let mut header = vec!["t".to_string(), "state".into(), "X".into()];
    for v in &variants {
        let tag = v.name().replace('-', "_");
        header.extend(["h1", "h2", "hm", "cash"].map(|c| format!("{c}_{tag}")));
    }
    w.write_record(&header)?;
    for k in 0..grid.n_points() {
        let t = grid.time(k);
        let i = bundle.chain.state_at(t);
        let x = bundle.observed.x[k];
        let mut row = vec![f(t), (i + 1).to_string(), f(x)];
        for &v in &variants {
            push_weights(&mut row, &optimal_full_variant(model, v, x, i)?);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Full- and partial-information weights on one shared path.
fn information_path(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<()> {
    let (grid, bundle) = simulate_one(cfg, model)?;
    let filter: FilterPath = run_filter(&bundle.observed, &cfg.p0, model)?;
    let full_policy = full_information_policy(model, Variant::Unrestricted)?;
    let partial_policy = convlab_core::strategy::partial_information_policy(model, Variant::Unrestricted)?;
    let w_full = simulate_wealth(model, &bundle, &full_policy, cfg.w0, None)?;
    let w_partial = simulate_wealth(model, &bundle, &partial_policy, cfg.w0, Some(&filter))?;

    write_paths_csv(out.create("information_path.csv")?, [(0, &bundle, None)])?;
    write_filter_csv(out.create("filter.csv")?, &filter)?;
    let mut w = out.csv("information_weights.csv")?;
    w.write_record([
        "t",
        "state",
        "X",
        "pi_1",
        "h1_full",
        "h2_full",
        "hm_full",
        "cash_full",
        "h1_partial",
        "h2_partial",
        "hm_partial",
        "cash_partial",
        "W_full",
        "W_partial",
    ])?;
    for k in 0..grid.n_points() {
        let t = grid.time(k);
        let i = bundle.chain.state_at(t);
        let x = bundle.observed.x[k];
        let pi = filter.pi(k);
        let mut row = vec![f(t), (i + 1).to_string(), f(x), f(pi[0])];
        push_weights(&mut row, &optimal_full_variant(model, Variant::Unrestricted, x, i)?);
        push_weights(&mut row, &optimal_partial_variant(model, Variant::Unrestricted, x, pi)?);
        row.extend([f(w_full.wealth(k)), f(w_partial.wealth(k))]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Regime-switching value averaged over the stationary law against the
/// averaged-parameter value, for both strategy variants.
pub struct ValueComparison {
    stationary: Vec<f64>,
    switching: Vec<ValueCoefficientsFull>,
    averaged: Vec<ValueCoefficientsFull>,
    pub variants: Vec<ValueVariant>,
    horizon: f64,
}

impl ValueComparison {
    pub fn new(model: &Model, n_t: usize) -> Result<Self> {
        let params = model.params();
        let stationary = stationary_distribution(&params.generator)?;
        let averaged_model = Model::new(averaged_params(params)?)?;
        let variants = value_variants(model);
        let mut switching = vec![];
        let mut averaged = vec![];
        for &v in &variants {
            switching.push(solve_full_ode(model, n_t, v)?);
            averaged.push(solve_full_ode(&averaged_model, n_t, v)?);
        }
        Ok(Self {
            stationary,
            switching,
            averaged,
            variants,
            horizon: params.horizon,
        })
    }

    /// `(switching, averaged)` values per variant at time-to-go `tau`.
    pub fn values(&self, tau: f64, w: f64, x: f64) -> Result<Vec<(f64, f64)>> {
        let t = (self.horizon - tau).max(0.0);
        self.switching
            .iter()
            .zip(&self.averaged)
            .map(|(rs, av)| {
                let mut v_rs = 0.0;
                for (i, nu) in self.stationary.iter().enumerate() {
                    v_rs += nu * value_full(t, w, x, i, rs)?;
                }
                Ok((v_rs, value_full(t, w, x, 0, av)?))
            })
            .collect()
    }

    fn header(&self, first: &str) -> Vec<String> {
        let mut h = vec![first.to_string()];
        for v in &self.variants {
            let tag = v.name().replace('-', "_");
            h.push(format!("switching_{tag}"));
            h.push(format!("averaged_{tag}"));
        }
        h
    }
}

fn value_curves(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<()> {
    let cmp = ValueComparison::new(model, cfg.n_t)?;
    let horizon = cfg.params.horizon;
    let mut w = out.csv("value_vs_x.csv")?;
    w.write_record(cmp.header("x"))?;
    for x in linspace(-1.0, 1.0, CURVE_POINTS) {
        let mut row = vec![f(x)];
        for (a, b) in cmp.values(horizon, cfg.w0, x)? {
            row.extend([f(a), f(b)]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = out.csv("value_vs_time_to_go.csv")?;
    w.write_record(cmp.header("tau"))?;
    for k in 1..=CURVE_POINTS {
        let tau = horizon * k as f64 / CURVE_POINTS as f64;
        let mut row = vec![f(tau)];
        for (a, b) in cmp.values(tau, cfg.w0, cfg.x0)? {
            row.extend([f(a), f(b)]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    write_full_value_csv(out.create("full_value.csv")?, &cmp.switching[0])?;
    Ok(())
}

/// Information premium on a thinned `(t, p)` grid at `x = x0`.
fn loss_surface(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<()> {
    let variant = ValueVariant::Unrestricted;
    let full = solve_full_ode(model, cfg.n_t, variant)?;
    let partial = solve_partial_pde(model, PdeSettings::new(cfg.n_t, cfg.n_p), variant)?;
    let t_stride = (cfg.n_t / 100).max(1);
    let p_stride = (cfg.n_p / 100).max(1);
    let mut rows = vec![];
    for k in strided(partial.grid.n_points(), t_stride) {
        let t = partial.grid.time(k);
        for j in strided(partial.n_p + 1, p_stride) {
            let p = partial.p_node(j);
            rows.push((t, p, loss_of_utility(t, cfg.x0, p, &full, &partial)?));
        }
    }
    write_full_value_csv(out.create("full_value.csv")?, &full)?;
    write_partial_value_csv_every(out.create("partial_value.csv")?, &partial, t_stride, p_stride)?;
    write_loss_csv(out.create("loss.csv")?, cfg.x0, &rows)?;
    Ok(())
}

/// Optimal weights over an `x` grid as CSV: one row per regime (full
/// information) and, when `p_grid` is given, per belief `p` in regime 1.
pub fn weights_table(model: &Model, variant: Variant, xs: &[f64], p_grid: Option<&[f64]>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    w.write_record(["information", "state", "x", "h1", "h2", "hm", "cash"])?;
    for i in 0..model.k() {
        for &x in xs {
            let mut row = vec!["full".to_string(), (i + 1).to_string(), f(x)];
            push_weights(&mut row, &optimal_full_variant(model, variant, x, i)?);
            w.write_record(&row)?;
        }
    }
    if let Some(ps) = p_grid {
        if model.k() != 2 {
            return Err(CliError::Config("--p-grid needs a two-regime model".into()));
        }
        for &p in ps {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Config(format!("--p-grid: {p} is not a probability")));
            }
            for &x in xs {
                let mut row = vec!["partial".to_string(), f(p), f(x)];
                push_weights(&mut row, &optimal_partial_variant(model, variant, x, &[p, 1.0 - p])?);
                w.write_record(&row)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_grid("0.5:2:1").unwrap(), vec![0.5]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a:1:3").is_err());
        let g = linspace(-1.0, 1.0, 50);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[49], 1.0);
    }

    #[test]
    fn weights_table_shape() {
        let model = Model::new(convlab_core::model::presets::fig3()).unwrap();
        let s = weights_table(&model, Variant::Unrestricted, &[-0.5, 0.5], Some(&[0.0, 1.0])).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 2 + 2 * 2);
        assert!(lines[1].starts_with("full,1,-0.5,"));
        // A vertex belief reproduces the full-information row.
        let full_row = lines[1].split_once(",-0.5,").unwrap().1;
        assert!(lines.contains(&format!("partial,1,-0.5,{full_row}").as_str()));
        assert!(weights_table(&model, Variant::Unrestricted, &[0.0], Some(&[1.5])).is_err());
    }
}
