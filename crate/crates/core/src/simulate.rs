//! Monte Carlo estimates of passage times and long-run averages.
//!
//! Every path draws from its own ChaCha stream `(seed, path index)`, so results
//! do not depend on how paths are spread over threads. Passages across an upper
//! level are detected with a Brownian-bridge test between steps.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::impulse::ImpulseSolution;
use crate::model::{DiffusionModel, EconomicParams};
use crate::{Error, Result};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    /// Euler on `ln(x - a)`.
    #[default]
    LogEuler,
}

/// Simulation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Distance above `a` below which the state is reflected.
    pub boundary_guard: f64,
    /// Step limit for passage-time paths.
    pub max_steps: u64,
    /// Fraction of the horizon discarded before averaging.
    pub burn_in: f64,
    /// Keep per-cycle records for [`write_cycles_csv`].
    #[serde(default)]
    pub record_cycles: bool,
}

impl PathConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            dt,
            horizon,
            n_paths,
            seed,
            scheme: Scheme::LogEuler,
            boundary_guard: 1e-12,
            max_steps: 50_000_000,
            burn_in: 0.2,
            record_cycles: false,
        }
    }

    /// Sets the guard to `1e-12` times the distance from `a` to `x0`.
    pub fn for_model(mut self, model: &DiffusionModel<f64>) -> Self {
        self.boundary_guard = 1e-12 * (model.x0() - model.a()).abs().max(1e-300);
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::InvalidParams(format!("need 0 < dt <= horizon, got dt = {}, horizon = {}", self.dt, self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParams("n_paths must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::InvalidParams("burn_in must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.horizon / self.dt).round().max(1.0) as u64
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// Wall-clock seconds.
    pub elapsed: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64], elapsed: f64) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { f64::NAN };
        Self { mean, stderr: (var / n as f64).sqrt(), n, elapsed }
    }

    /// `|mean - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.stderr
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target) <= n_se
    }
}

/// One stepping kernel shared by all simulations.
struct Stepper<'a> {
    model: &'a DiffusionModel<f64>,
    scheme: Scheme,
    dt: f64,
    sqdt: f64,
    floor: f64,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a DiffusionModel<f64>, cfg: &PathConfig) -> Result<Self> {
        if cfg.scheme == Scheme::LogEuler && !model.a().is_finite() {
            return Err(Error::Unsupported("log-Euler needs a finite left end".into()));
        }
        Ok(Self { model, scheme: cfg.scheme, dt: cfg.dt, sqdt: cfg.dt.sqrt(), floor: model.a() + cfg.boundary_guard })
    }

    fn to_z(&self, x: f64) -> f64 {
        match self.scheme {
            Scheme::Euler => x,
            Scheme::LogEuler => (x - self.model.a()).ln(),
        }
    }

    fn to_x(&self, z: f64) -> f64 {
        match self.scheme {
            Scheme::Euler => z,
            Scheme::LogEuler => self.model.a() + z.exp(),
        }
    }

    /// Drift and volatility of the working variable at state `x`.
    fn coeffs(&self, x: f64) -> (f64, f64) {
        let (mu, sig) = (self.model.mu(x), self.model.sigma(x));
        match self.scheme {
            Scheme::Euler => (mu, sig),
            Scheme::LogEuler => {
                let d = x - self.model.a();
                (mu / d - 0.5 * sig * sig / (d * d), sig / d)
            }
        }
    }

    /// One step from `(z, x)`; returns the new pair, the volatility used and whether the guard fired.
    fn step<R: Rng>(&self, z: f64, x: f64, rng: &mut R) -> (f64, f64, f64, bool) {
        let (b, v) = self.coeffs(x);
        let e: f64 = rng.sample(StandardNormal);
        let mut zn = z + b * self.dt + v * self.sqdt * e;
        let mut xn = self.to_x(zn);
        let mut guard = false;
        if self.scheme == Scheme::Euler && xn <= self.floor {
            xn = 2.0 * self.floor - xn;
            zn = xn;
            guard = true;
        } else if self.scheme == Scheme::LogEuler && xn <= self.floor {
            xn = self.floor;
            zn = self.to_z(xn);
            guard = true;
        }
        (zn, xn, v, guard)
    }

    /// Whether a path moving from `z0` to `z1` (both below `zb`) crossed `zb` in between.
    fn bridge_crossed<R: Rng>(&self, z0: f64, z1: f64, zb: f64, v: f64, rng: &mut R) -> bool {
        let p = (-2.0 * (zb - z0) * (zb - z1) / (v * v * self.dt)).exp();
        rng.gen::<f64>() < p
    }
}

impl Stepper<'_> {
    /// Maximum of the Brownian bridge from `z0` to `z1` over one step.
    fn bridge_max<R: Rng>(&self, z0: f64, z1: f64, v: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let d = z1 - z0;
        0.5 * (z0 + z1 + (d * d - 2.0 * v * v * self.dt * (1.0 - u).ln()).sqrt())
    }

    /// Push in state units for a push `dz` of the working variable at the barrier `x`.
    fn push_to_x(&self, x: f64, dz: f64) -> f64 {
        match self.scheme {
            Scheme::Euler => dz,
            Scheme::LogEuler => (x - self.model.a()) * dz,
        }
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Monte Carlo passage from `w` to `y`.
#[derive(Debug, Clone, Serialize)]
pub struct HittingEstimate {
    /// `E τ`.
    pub tau: Estimate,
    /// `E ∫ c`.
    pub c: Estimate,
    /// `E ∫ μ`.
    pub mu: Estimate,
    /// Range of states visited.
    pub range: (f64, f64),
    pub capped: usize,
    pub guard_hits: u64,
}

/// Runs the uncontrolled diffusion from `w` until it first reaches `y`.
pub fn estimate_hitting(model: &DiffusionModel<f64>, w: f64, y: f64, cfg: &PathConfig) -> Result<HittingEstimate> {
    cfg.validate()?;
    if !(model.a() < w && w < y && y < model.b()) {
        return Err(Error::Precondition(format!("need a < w < y < b, got w = {w}, y = {y}")));
    }
    let st = Stepper::new(model, cfg)?;
    let start = Instant::now();
    let zb = st.to_z(y);
    let per_path: Vec<(f64, f64, f64, f64, f64, bool, u64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let (mut z, mut x) = (st.to_z(w), w);
            let (mut t, mut ic, mut im) = (0.0, 0.0, 0.0);
            let (mut lo, mut hi) = (w, w);
            let mut guards = 0;
            let mut n = 0u64;
            loop {
                if n >= cfg.max_steps {
                    return (t, ic, im, lo, hi, true, guards);
                }
                n += 1;
                ic += model.c(x) * st.dt;
                im += model.mu(x) * st.dt;
                t += st.dt;
                let (zn, xn, v, g) = st.step(z, x, &mut rng);
                guards += g as u64;
                if zn >= zb || st.bridge_crossed(z, zn, zb, v, &mut rng) {
                    return (t, ic, im, lo, hi.max(y), false, guards);
                }
                z = zn;
                x = xn;
                lo = lo.min(x);
                hi = hi.max(x);
            }
        })
        .collect();
    let capped = per_path.iter().filter(|r| r.5).count();
    if capped * 100 > cfg.n_paths {
        return Err(Error::StepCap { capped, total: cfg.n_paths });
    }
    let ok: Vec<_> = per_path.iter().filter(|r| !r.5).collect();
    let el = start.elapsed().as_secs_f64();
    let col = |k: usize| -> Vec<f64> {
        ok.iter()
            .map(|r| match k {
                0 => r.0,
                1 => r.1,
                _ => r.2,
            })
            .collect()
    };
    Ok(HittingEstimate {
        tau: Estimate::from_samples(&col(0), el),
        c: Estimate::from_samples(&col(1), el),
        mu: Estimate::from_samples(&col(2), el),
        range: ok.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r.3), h.max(r.4))),
        capped,
        guard_hits: per_path.iter().map(|r| r.6).sum(),
    })
}

/// One renewal cycle of an impulse path.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CycleRecord {
    pub path: usize,
    pub length: f64,
    /// `γ ∫ c` over the cycle plus `p·jump - K`.
    pub reward: f64,
    pub jump: f64,
}

/// Long-run averages of a `(w, y)` policy.
#[derive(Debug, Clone, Serialize)]
pub struct ImpulseSimulation {
    pub reward_rate: Estimate,
    pub supply_rate: Estimate,
    pub intervention_rate: Estimate,
    /// Mean cycle reward over mean cycle length, from completed cycles.
    pub cycle_ratio: Estimate,
    pub cycles: usize,
    pub guard_hits: u64,
    #[serde(skip)]
    pub records: Vec<CycleRecord>,
}

struct ImpulsePath {
    reward: f64,
    supply: f64,
    count: f64,
    cycle_len: Vec<f64>,
    cycle_rew: Vec<f64>,
    jumps: Vec<f64>,
    guards: u64,
}

#[allow(clippy::too_many_arguments)]
fn run_impulse_path(
    st: &Stepper,
    prm: &EconomicParams<f64>,
    w: f64,
    y: f64,
    x0: f64,
    steps: u64,
    t_from: f64,
    checkpoints: &[f64],
    rng: &mut ChaCha8Rng,
    record: bool,
) -> (ImpulsePath, Vec<f64>) {
    let zb = st.to_z(y);
    let mut out = ImpulsePath {
        reward: 0.0,
        supply: 0.0,
        count: 0.0,
        cycle_len: Vec::new(),
        cycle_rew: Vec::new(),
        jumps: Vec::new(),
        guards: 0,
    };
    let mut totals = Vec::with_capacity(checkpoints.len());
    let mut total = 0.0;
    let mut x = x0;
    if x >= y {
        let jump = x - w;
        total += prm.p * jump - prm.k;
        x = w;
    }
    let mut z = st.to_z(x);
    let (mut cyc_t, mut cyc_r, mut in_cycle) = (0.0, 0.0, false);
    let mut next_cp = 0;
    for n in 0..steps {
        let t = n as f64 * st.dt;
        while next_cp < checkpoints.len() && checkpoints[next_cp] <= t + 0.5 * st.dt {
            totals.push(total);
            next_cp += 1;
        }
        let counting = t + 0.5 * st.dt >= t_from;
        let run = prm.gamma * st.model.c(x) * st.dt;
        total += run;
        if counting {
            out.reward += run;
        }
        cyc_t += st.dt;
        cyc_r += run;
        let (zn, xn, v, g) = st.step(z, x, rng);
        out.guards += g as u64;
        if zn >= zb || st.bridge_crossed(z, zn, zb, v, rng) {
            let jump = y - w;
            let income = prm.p * jump - prm.k;
            total += income;
            if counting {
                out.reward += income;
                out.supply += jump;
                out.count += 1.0;
                if in_cycle {
                    out.cycle_len.push(cyc_t);
                    out.cycle_rew.push(cyc_r + income);
                    if record {
                        out.jumps.push(jump);
                    }
                }
                in_cycle = true;
            }
            cyc_t = 0.0;
            cyc_r = 0.0;
            x = w;
            z = st.to_z(w);
        } else {
            x = xn;
            z = zn;
        }
    }
    while next_cp < checkpoints.len() {
        totals.push(total);
        next_cp += 1;
    }
    (out, totals)
}

/// Long-run reward, supply and intervention rates of the `(w, y)` policy from `x0`.
pub fn simulate_impulse(
    model: &DiffusionModel<f64>,
    params: &EconomicParams<f64>,
    w: f64,
    y: f64,
    cfg: &PathConfig,
) -> Result<ImpulseSimulation> {
    cfg.validate()?;
    if !(model.a() <= w && w < y && y < model.b()) {
        return Err(Error::Precondition(format!("need a <= w < y < b, got w = {w}, y = {y}")));
    }
    let mut st = Stepper::new(model, cfg)?;
    if w <= st.floor {
        st.floor = model.a() + cfg.boundary_guard.min(0.5 * (y - model.a()));
    }
    let w_eff = w.max(st.floor);
    let start = Instant::now();
    let steps = cfg.steps();
    let t_from = cfg.burn_in * cfg.horizon;
    let window = cfg.horizon - t_from;
    let paths: Vec<ImpulsePath> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            run_impulse_path(&st, params, w_eff, y, model.x0(), steps, t_from, &[], &mut rng, cfg.record_cycles).0
        })
        .collect();
    let el = start.elapsed().as_secs_f64();
    let rate = |f: &dyn Fn(&ImpulsePath) -> f64| -> Estimate {
        let xs: Vec<f64> = paths.iter().map(|p| f(p) / window).collect();
        Estimate::from_samples(&xs, el)
    };
    let (mut sl, mut sr, mut nc) = (0.0, 0.0, 0usize);
    for p in &paths {
        sl += p.cycle_len.iter().sum::<f64>();
        sr += p.cycle_rew.iter().sum::<f64>();
        nc += p.cycle_len.len();
    }
    let ratio = sr / sl;
    // Delta-method standard error from per-path cycle sums.
    let n = paths.len() as f64;
    let (ml, mr) = (sl / n, sr / n);
    let resid: Vec<f64> = paths
        .iter()
        .map(|p| (p.cycle_rew.iter().sum::<f64>() - ratio * p.cycle_len.iter().sum::<f64>()) / ml)
        .collect();
    let mut cycle_ratio = Estimate::from_samples(&resid, el);
    cycle_ratio.mean = mr / ml;
    let mut records = Vec::new();
    if cfg.record_cycles {
        for (i, p) in paths.iter().enumerate() {
            for k in 0..p.cycle_len.len() {
                records.push(CycleRecord { path: i, length: p.cycle_len[k], reward: p.cycle_rew[k], jump: p.jumps[k] });
            }
        }
    }
    Ok(ImpulseSimulation {
        reward_rate: rate(&|p| p.reward),
        supply_rate: rate(&|p| p.supply),
        intervention_rate: rate(&|p| p.count),
        cycle_ratio,
        cycles: nc,
        guard_hits: paths.iter().map(|p| p.guards).sum(),
        records,
    })
}

/// Writes `path, cycle_length, cycle_reward, jump` rows.
pub fn write_cycles_csv<W: Write>(sim: &ImpulseSimulation, mut out: W) -> std::io::Result<()> {
    writeln!(out, "path,cycle_length,cycle_reward,jump")?;
    for r in &sim.records {
        writeln!(out, "{},{},{},{}", r.path, r.length, r.reward, r.jump)?;
    }
    Ok(())
}

/// Long-run averages of reflection at `x`.
#[derive(Debug, Clone, Serialize)]
pub struct ReflectionSimulation {
    pub reward_rate: Estimate,
    /// Rate of the accumulated reflection push.
    pub push_rate: Estimate,
    pub guard_hits: u64,
}

/// Reflects the diffusion at `x`, clipping each step by the maximum of its Brownian bridge.
pub fn simulate_reflection(
    model: &DiffusionModel<f64>,
    params: &EconomicParams<f64>,
    x: f64,
    cfg: &PathConfig,
) -> Result<ReflectionSimulation> {
    cfg.validate()?;
    if !(model.a() < x && x < model.b()) {
        return Err(Error::Precondition(format!("reflection level {x} outside the state space")));
    }
    let st = Stepper::new(model, cfg)?;
    let start = Instant::now();
    let steps = cfg.steps();
    let t_from = cfg.burn_in * cfg.horizon;
    let window = cfg.horizon - t_from;
    let zb = st.to_z(x);
    let paths: Vec<(f64, f64, u64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let (mut reward, mut push, mut guards) = (0.0, 0.0, 0u64);
            let mut s = model.x0();
            if s > x {
                if t_from <= 0.0 {
                    reward += params.p * (s - x);
                    push += s - x;
                }
                s = x;
            }
            let mut z = st.to_z(s);
            for n in 0..steps {
                let counting = (n as f64 + 0.5) * st.dt >= t_from;
                if counting {
                    reward += params.gamma * model.c(s) * st.dt;
                }
                let (mut zn, mut xn, v, g) = st.step(z, s, &mut rng);
                guards += g as u64;
                let over = st.bridge_max(z, zn, v, &mut rng) - zb;
                if over > 0.0 {
                    let dx = st.push_to_x(x, over);
                    if counting {
                        reward += params.p * dx;
                        push += dx;
                    }
                    zn -= over;
                    xn = st.to_x(zn);
                }
                z = zn;
                s = xn;
            }
            (reward / window, push / window, guards)
        })
        .collect();
    let el = start.elapsed().as_secs_f64();
    let r: Vec<f64> = paths.iter().map(|p| p.0).collect();
    let u: Vec<f64> = paths.iter().map(|p| p.1).collect();
    Ok(ReflectionSimulation {
        reward_rate: Estimate::from_samples(&r, el),
        push_rate: Estimate::from_samples(&u, el),
        guard_hits: paths.iter().map(|p| p.2).sum(),
    })
}

/// `J_T(x) - F*·T` under the `(w, y)` policy at each horizon in `horizons`.
///
/// `f_ref` is the rate subtracted; passing the optimal value and a suboptimal
/// pair gives the comparison used for overtaking checks.
#[allow(clippy::too_many_arguments)]
pub fn simulate_relative_reward_policy(
    model: &DiffusionModel<f64>,
    params: &EconomicParams<f64>,
    w: f64,
    y: f64,
    f_ref: f64,
    x: f64,
    horizons: &[f64],
    cfg: &PathConfig,
) -> Result<Vec<(f64, Estimate)>> {
    cfg.validate()?;
    if !(model.a() <= w && w < y && model.a() < x) {
        return Err(Error::Precondition(format!("need a <= w < y and x > a, got w = {w}, y = {y}, x = {x}")));
    }
    let mut hs = horizons.to_vec();
    hs.sort_by(|a, b| a.partial_cmp(b).expect("finite horizons"));
    let t_max = *hs.last().ok_or_else(|| Error::InvalidParams("empty horizon list".into()))?;
    let mut st = Stepper::new(model, cfg)?;
    if w <= st.floor {
        st.floor = model.a() + cfg.boundary_guard.min(0.5 * (y - model.a()));
    }
    let w_eff = w.max(st.floor);
    let steps = (t_max / cfg.dt).round() as u64;
    let start = Instant::now();
    let totals: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            run_impulse_path(&st, params, w_eff, y, x, steps, f64::INFINITY, &hs, &mut rng, false).1
        })
        .collect();
    let el = start.elapsed().as_secs_f64();
    Ok(hs
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let xs: Vec<f64> = totals.iter().map(|v| v[k] - f_ref * t).collect();
            (*t, Estimate::from_samples(&xs, el))
        })
        .collect())
}

/// `J_T(x) - F*·T` under the optimal policy.
pub fn simulate_relative_reward(
    model: &DiffusionModel<f64>,
    params: &EconomicParams<f64>,
    solution: &ImpulseSolution<f64>,
    x: f64,
    horizons: &[f64],
    cfg: &PathConfig,
) -> Result<Vec<(f64, Estimate)>> {
    simulate_relative_reward_policy(model, params, solution.w_star, solution.y_star, solution.f_star, x, horizons, cfg)
}

/// Long-run average reward of never intervening.
pub fn simulate_nothing(model: &DiffusionModel<f64>, params: &EconomicParams<f64>, cfg: &PathConfig) -> Result<Estimate> {
    cfg.validate()?;
    let st = Stepper::new(model, cfg)?;
    let start = Instant::now();
    let steps = cfg.steps();
    let t_from = cfg.burn_in * cfg.horizon;
    let window = cfg.horizon - t_from;
    let rates: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut x = model.x0();
            let mut z = st.to_z(x);
            let mut acc = 0.0;
            for n in 0..steps {
                if (n as f64 + 0.5) * st.dt >= t_from {
                    acc += params.gamma * model.c(x) * st.dt;
                }
                let (zn, xn, _, _) = st.step(z, x, &mut rng);
                z = zn;
                x = xn;
            }
            acc / window
        })
        .collect();
    Ok(Estimate::from_samples(&rates, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{default_params, log_nat};

    fn cfg(n: usize) -> PathConfig {
        let mut c = PathConfig::new(1e-3, 5.0, n, 11);
        c.max_steps = 1_000_000;
        c
    }

    #[test]
    fn estimate_statistics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 0.0);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(e.within(2.6, 1.0));
    }

    #[test]
    fn hitting_is_reproducible() {
        let m = log_nat::<f64>();
        let a = estimate_hitting(&m, 0.3, 0.9, &cfg(64)).unwrap();
        let b = estimate_hitting(&m, 0.3, 0.9, &cfg(64)).unwrap();
        assert_eq!(a.tau.mean.to_bits(), b.tau.mean.to_bits());
        assert_eq!(a.c.mean.to_bits(), b.c.mean.to_bits());
    }

    #[test]
    fn worker_count_does_not_matter() {
        let m = log_nat::<f64>();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_impulse(&m, &default_params(), 0.3, 0.9, &cfg(16)).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.reward_rate.mean.to_bits(), b.reward_rate.mean.to_bits());
        assert_eq!(a.supply_rate.stderr.to_bits(), b.supply_rate.stderr.to_bits());
    }

    #[test]
    fn initial_jump_when_starting_above_y() {
        let m = log_nat::<f64>();
        let prm = default_params();
        let mut c = cfg(4);
        c.horizon = 2.0 * c.dt;
        let r = simulate_relative_reward_policy(&m, &prm, 0.2, 0.4, 0.0, 0.5, &[0.0], &c).unwrap();
        assert!((r[0].1.mean - (prm.p * 0.3 - prm.k)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let m = log_nat::<f64>();
        let mut c = cfg(4);
        c.dt = 10.0;
        assert!(estimate_hitting(&m, 0.3, 0.9, &c).is_err());
        assert!(estimate_hitting(&m, 0.9, 0.3, &cfg(4)).is_err());
    }

    #[test]
    fn step_cap_is_reported() {
        let m = log_nat::<f64>();
        let mut c = cfg(20);
        c.max_steps = 10;
        assert!(matches!(estimate_hitting(&m, 0.3, 0.9, &c), Err(Error::StepCap { .. })));
    }
}
