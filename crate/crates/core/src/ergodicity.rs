//! Monte Carlo audits of the long-time behaviour: energy balance, moment
//! bound, hitting-time tails, recurrence and independence of the initial
//! condition.
//!
//! Trajectories of an ensemble run in parallel with independent noise
//! streams keyed by `(base_seed, trajectory index)`; results are gathered in
//! index order so every report is a deterministic function of its spec.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{run_observed, Control, IntegratorConfig, Trajectory};
use crate::lattice::{ModeLattice, WaveVector};
use crate::noise::{Forcing, ForcingConfig, NoiseIntensity};
use crate::state::{SpectralState, StateSnapshot};

/// Standard errors in the pass criteria.
pub const SE_MULTIPLIER: f64 = 3.0;

/// Initial condition shared by every trajectory of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Zero,
    /// Divergence-free Gaussian state rescaled to `energy`, drawn once from
    /// `seed`.
    Random {
        energy: f64,
        seed: u64,
    },
    State {
        snapshot: StateSnapshot,
    },
}

impl InitSpec {
    pub fn build(&self, lattice: &ModeLattice) -> Result<SpectralState> {
        match self {
            InitSpec::Zero => Ok(SpectralState::zeros(lattice)),
            InitSpec::Random { energy, seed } => {
                if !(*energy >= 0.0 && energy.is_finite()) {
                    return Err(Error::Config(format!("initial energy must be nonnegative, got {energy}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(SpectralState::random(lattice, *energy, &mut rng))
            }
            InitSpec::State { snapshot } => snapshot.to_state(lattice),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(rename = "N")]
    pub n: u32,
    pub n_trajectories: usize,
    pub base_seed: u64,
    pub init: InitSpec,
    pub forcing: ForcingConfig,
    pub integrator: IntegratorConfig,
}

/// An ensemble spec resolved against its lattice.
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub lattice: ModeLattice,
    pub forcing: Forcing,
    pub init: SpectralState,
    config: IntegratorConfig,
}

impl Ensemble {
    pub fn new(spec: &EnsembleSpec) -> Result<Self> {
        if spec.n_trajectories == 0 {
            return Err(Error::Config("ensemble needs at least one trajectory".into()));
        }
        spec.integrator.validate()?;
        let lattice = ModeLattice::build(spec.n)?;
        let forcing = Forcing::new(&spec.forcing, &lattice)?;
        let init = spec.init.build(&lattice)?;
        let config = IntegratorConfig { seed: spec.base_seed, ..spec.integrator.clone() };
        Ok(Ensemble { spec: spec.clone(), lattice, forcing, init, config })
    }

    pub fn intensity(&self) -> NoiseIntensity {
        self.forcing.intensity()
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn n_steps(&self) -> usize {
        self.config.n_steps()
    }

    /// Runs trajectory `index` with a per-step observer.
    pub fn run_one(
        &self,
        index: u64,
        observe: impl FnMut(usize, f64, &SpectralState, &crate::integrator::StepBudget) -> Control,
    ) -> Result<usize> {
        run_observed(&self.init, &self.forcing, &self.config, &self.lattice, index, observe)
    }

    /// Maps `f` over trajectory indices `0..count` in parallel; results (and
    /// the first error, by index) come back in index order.
    pub fn map<T: Send>(&self, count: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        let results: Vec<Result<T>> = (0..count as u64).into_par_iter().map(f).collect();
        results.into_iter().collect()
    }
}

/// Sample mean and its standard error (zero for fewer than two samples).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Step indices recorded by the integrator's stride, always including the
/// first and last.
fn record_steps(config: &IntegratorConfig) -> Vec<usize> {
    let n = config.n_steps();
    let s = config.record_every.max(1);
    let mut v: Vec<usize> = (0..=n).step_by(s).collect();
    if *v.last().unwrap() != n {
        v.push(n);
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub t: f64,
    /// Ensemble mean of `E(t) + D(t) - E(0) - sigma^2 t`.
    pub residual: f64,
    pub se: f64,
    /// Same after subtracting the noise martingale of the scheme.
    pub residual_cv: f64,
    pub se_cv: f64,
    /// Mean predicted discretization bias.
    pub bias_estimate: f64,
    /// Mean bound on the discretization bias; the allowance in the test.
    pub allowance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyAuditReport {
    pub spec: EnsembleSpec,
    pub sigma_sq: f64,
    pub n_trajectories: usize,
    pub mean_initial_energy: f64,
    /// `allowance / dt` at the final time.
    pub bias_constant: f64,
    pub rows: Vec<AuditRow>,
    pub pass: bool,
}

impl EnergyAuditReport {
    pub fn final_row(&self) -> &AuditRow {
        self.rows.last().expect("audit has rows")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,residual,se,residual_cv,se_cv,bias_estimate,allowance,pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.t, r.residual, r.se, r.residual_cv, r.se_cv, r.bias_estimate, r.allowance, r.pass
            ));
        }
        s
    }
}

/// Ensemble check of the energy identity
/// `E[E(t)] + E[int_0^t 2 sum |k|^2 (|u_k|^2 + |b_k|^2)] = E[E(0)] + sigma^2 t`.
///
/// A row passes when both the raw residual and the control-variate residual
/// lie within `3 SE` plus the scheme's bias allowance. The allowance is the
/// accumulated one-step Taylor bound of the scheme (exact for Euler-Maruyama:
/// `dt^2 |F|^2` per step), so it is `O(dt)` over a fixed horizon.
pub fn energy_balance_audit(spec: &EnsembleSpec) -> Result<EnergyAuditReport> {
    let ens = Ensemble::new(spec)?;
    let steps = record_steps(&ens.config);
    let sigma_sq = ens.intensity().sigma_sq();
    let dt = ens.dt();
    // per trajectory, per recorded step: (raw, cv, bias, bound)
    let per_traj = ens.map(spec.n_trajectories, |j| {
        let mut rows = Vec::with_capacity(steps.len());
        let mut next = 0;
        let mut e0 = 0.0;
        ens.run_one(j, |i, t, s, acc| {
            if i == 0 {
                e0 = s.energy();
            }
            if next < steps.len() && steps[next] == i {
                let raw = s.energy() + acc.dissipation - e0 - sigma_sq * t;
                rows.push([raw, raw - acc.martingale, acc.bias, acc.bias_bound]);
                next += 1;
            }
            Control::Continue
        })?;
        Ok(rows)
    })?;
    let mut rows = Vec::with_capacity(steps.len());
    let col = |r: usize, c: usize| -> Vec<f64> { per_traj.iter().map(|v| v[r][c]).collect() };
    for (r, &i) in steps.iter().enumerate() {
        let (residual, se) = mean_se(&col(r, 0));
        let (residual_cv, se_cv) = mean_se(&col(r, 1));
        let (bias_estimate, _) = mean_se(&col(r, 2));
        let (allowance, _) = mean_se(&col(r, 3));
        let pass =
            residual.abs() <= SE_MULTIPLIER * se + allowance && residual_cv.abs() <= SE_MULTIPLIER * se_cv + allowance;
        rows.push(AuditRow { t: i as f64 * dt, residual, se, residual_cv, se_cv, bias_estimate, allowance, pass });
    }
    let pass = rows.iter().all(|r| r.pass);
    let bias_constant = rows.last().map_or(0.0, |r| r.allowance / dt);
    Ok(EnergyAuditReport {
        spec: spec.clone(),
        sigma_sq,
        n_trajectories: spec.n_trajectories,
        mean_initial_energy: ens.init.energy(),
        bias_constant,
        rows,
        pass,
    })
}

/// `E|x(t)|^2` when the nonlinearity is switched off: every mode is an
/// independent Ornstein-Uhlenbeck process with
/// `E|x_k(t)|^2 = e^{-2|k|^2 t} |x_k(0)|^2 + Tr_k (1 - e^{-2|k|^2 t}) / (2|k|^2)`.
pub fn ou_mean_energy(init: &SpectralState, forcing: &Forcing, lattice: &ModeLattice, t: f64) -> f64 {
    let traces = forcing.traces();
    lattice
        .representatives()
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let l = k.norm_sq();
            let x2 = crate::vec3::cnorm_sq(&init.u[i]) + crate::vec3::cnorm_sq(&init.b[i]);
            let tr = traces[i][0] + traces[i][1];
            (-2.0 * l * t).exp() * x2 - tr * (-2.0 * l * t).exp_m1() / (2.0 * l)
        })
        .sum()
}

/// Stationary energy of the linear (Ornstein-Uhlenbeck) system,
/// `sum_k Tr_k / (2|k|^2)`, never above `sigma^2 / 2`.
pub fn ou_stationary_energy(forcing: &Forcing, lattice: &ModeLattice) -> f64 {
    forcing.traces().iter().zip(lattice.representatives()).map(|(t, k)| (t[0] + t[1]) / (2.0 * k.norm_sq())).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub mean_energy: f64,
    pub se: f64,
    pub bound: f64,
    /// Closed-form mean of the linear system, when the nonlinearity is off.
    pub ou_mean: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub spec: EnsembleSpec,
    pub sigma_sq: f64,
    pub mean_initial_energy: f64,
    pub rows: Vec<MomentRow>,
    pub pass: bool,
}

impl MomentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mean_energy,se,bound,ou_mean,pass\n");
        for r in &self.rows {
            let ou = r.ou_mean.map_or(String::new(), |x| x.to_string());
            s.push_str(&format!("{},{},{},{},{},{}\n", r.t, r.mean_energy, r.se, r.bound, ou, r.pass));
        }
        s
    }
}

fn grid_steps(t_grid: &[f64], dt: f64, n_steps: usize) -> Result<Vec<usize>> {
    let mut v = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("grid time {t} must be nonnegative")));
        }
        let i = (t / dt).round() as usize;
        if i > n_steps {
            return Err(Error::Config(format!("grid time {t} beyond the horizon")));
        }
        v.push(i);
    }
    Ok(v)
}

/// Checks `E[E(t)] <= E[E(0)] + sigma^2 / 2 + 3 SE` on `t_grid`.
pub fn moment_bound_check(spec: &EnsembleSpec, t_grid: &[f64]) -> Result<MomentReport> {
    let ens = Ensemble::new(spec)?;
    let steps = grid_steps(t_grid, ens.dt(), ens.n_steps())?;
    let per_traj = ens.map(spec.n_trajectories, |j| {
        let mut e = vec![0.0; steps.len()];
        ens.run_one(j, |i, _, s, _| {
            for (slot, &gi) in steps.iter().enumerate() {
                if gi == i {
                    e[slot] = s.energy();
                }
            }
            Control::Continue
        })?;
        Ok(e)
    })?;
    let sigma_sq = ens.intensity().sigma_sq();
    let e0 = ens.init.energy();
    let bound = e0 + sigma_sq / 2.0;
    let rows: Vec<MomentRow> = steps
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let xs: Vec<f64> = per_traj.iter().map(|v| v[slot]).collect();
            let (m, se) = mean_se(&xs);
            let t = i as f64 * ens.dt();
            let ou_mean =
                (!spec.integrator.nonlinear).then(|| ou_mean_energy(&ens.init, &ens.forcing, &ens.lattice, t));
            MomentRow { t, mean_energy: m, se, bound, ou_mean, pass: m <= bound + SE_MULTIPLIER * se }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(MomentReport { spec: spec.clone(), sigma_sq, mean_initial_energy: e0, rows, pass })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingSample {
    pub threshold: f64,
    pub tau: f64,
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub t: f64,
    pub survival: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub spec: EnsembleSpec,
    /// Ball radius `C`; the ball is `energy <= C^2`.
    pub threshold: f64,
    pub eps0: f64,
    pub delta: f64,
    pub mean_initial_energy: f64,
    pub horizon: f64,
    pub n_censored: usize,
    pub samples: Vec<HittingSample>,
    pub rows: Vec<SurvivalRow>,
    pub pass: bool,
}

impl HittingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,survival,se,bound,pass\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.t, r.survival, r.se, r.bound, r.pass));
        }
        s
    }
}

/// `delta = 1 - eps0 / C^2`; rejects balls with `C^2 <= eps0`, for which the
/// tail bound is vacuous.
pub fn hitting_delta(eps0: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("ball radius must be positive, got {c}")));
    }
    if c * c <= eps0 {
        return Err(Error::Config(format!("hitting-time bound needs C^2 > eps0 (C^2 = {}, eps0 = {eps0})", c * c)));
    }
    Ok(1.0 - eps0 / (c * c))
}

/// First entrance times into `{energy <= C^2}`, checked after every step, and
/// the empirical survival `P(tau >= t)` at the positive times of the
/// recording grid against `(E[E(0)] / C^2) e^{-2 delta t}`. At `t = 0` the
/// survival is 1 by definition and the bound says nothing. Runs that never
/// enter count as `tau = horizon` and are flagged censored.
pub fn hitting_times(spec: &EnsembleSpec, c: f64) -> Result<HittingReport> {
    let ens = Ensemble::new(spec)?;
    let eps0 = ens.intensity().eps0();
    let delta = hitting_delta(eps0, c)?;
    let c2 = c * c;
    let dt = ens.dt();
    let n = ens.n_steps();
    let horizon = n as f64 * dt;
    let samples = ens.map(spec.n_trajectories, |j| {
        let mut hit = None;
        ens.run_one(j, |i, _, s, _| {
            if s.energy() <= c2 {
                hit = Some(i);
                Control::Stop
            } else {
                Control::Continue
            }
        })?;
        Ok(match hit {
            Some(i) => HittingSample { threshold: c, tau: i as f64 * dt, censored: false },
            None => HittingSample { threshold: c, tau: horizon, censored: true },
        })
    })?;
    let e0 = ens.init.energy();
    let m = samples.len() as f64;
    let rows: Vec<SurvivalRow> = record_steps(&ens.config)
        .into_iter()
        .filter(|&i| i > 0)
        .map(|i| {
            let t = i as f64 * dt;
            // censored samples survive the whole horizon
            let count = samples.iter().filter(|s| s.censored || s.tau >= t - 1e-12 * dt).count() as f64;
            let p = count / m;
            let se = (p * (1.0 - p) / m).sqrt();
            let bound = e0 / c2 * (-2.0 * delta * t).exp();
            SurvivalRow { t, survival: p, se, bound, pass: p <= bound + SE_MULTIPLIER * se }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(HittingReport {
        spec: spec.clone(),
        threshold: c,
        eps0,
        delta,
        mean_initial_energy: e0,
        horizon,
        n_censored: samples.iter().filter(|s| s.censored).count(),
        samples,
        rows,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCount {
    pub h: f64,
    pub radius: f64,
    pub horizon: f64,
    /// Number of `n = 1..=floor(horizon / h)` with `energy(n h) <= radius^2`.
    pub visits: usize,
    pub samples: usize,
    pub mean_gap: Option<f64>,
    pub max_gap: Option<f64>,
}

/// Counts returns to the energy ball of radius `radius` at the sampling
/// times `n h`. The trajectory must have been recorded at those times.
pub fn recurrence_count(traj: &Trajectory, radius: f64, h: f64) -> Result<RecurrenceCount> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("sampling interval must be positive, got {h}")));
    }
    let horizon = traj.times.last().copied().unwrap_or(0.0);
    let samples = ((horizon / h) + 1e-9).floor() as usize;
    let energies = traj.energies();
    let r2 = radius * radius;
    let mut hits = Vec::new();
    let mut j = 0;
    for n in 1..=samples {
        let t = n as f64 * h;
        while j + 1 < traj.times.len() && traj.times[j + 1] <= t + 1e-9 * h {
            j += 1;
        }
        if (traj.times[j] - t).abs() > 1e-6 * h.max(1.0) {
            return Err(Error::Config(format!("trajectory not recorded at t = {t}")));
        }
        if energies[j] <= r2 {
            hits.push(t);
        }
    }
    let gaps: Vec<f64> = hits.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(RecurrenceCount {
        h,
        radius,
        horizon,
        visits: hits.len(),
        samples,
        mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        max_gap: gaps.iter().copied().reduce(f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceStudy {
    pub spec: EnsembleSpec,
    pub counts: Vec<RecurrenceCount>,
    /// Least-squares slope of visits against horizon.
    pub slope: f64,
    pub pass: bool,
}

/// Independent runs (trajectory indices `0, 1, ...`) of the ensemble spec at each
/// horizon, counting ball visits with sampling interval `h`; passes when the
/// regression slope of visits on horizon is positive.
pub fn recurrence_study(spec: &EnsembleSpec, radius: f64, h: f64, horizons: &[f64]) -> Result<RecurrenceStudy> {
    if horizons.len() < 2 {
        return Err(Error::Config("recurrence study needs at least two horizons".into()));
    }
    let stride = (h / spec.integrator.dt).round() as usize;
    if stride == 0 || (stride as f64 * spec.integrator.dt - h).abs() > 1e-9 * h {
        return Err(Error::Config("sampling interval must be a multiple of dt".into()));
    }
    let base = Ensemble::new(spec)?;
    let counts = base.map(horizons.len(), |j| {
        let cfg = IntegratorConfig {
            t_end: horizons[j as usize],
            record_every: stride,
            seed: spec.base_seed,
            ..spec.integrator.clone()
        };
        let mut traj = Trajectory::default();
        let mut next_record = 0;
        run_observed(&base.init, &base.forcing, &cfg, &base.lattice, j, |i, t, s, acc| {
            if i == next_record {
                traj.record(t, s, acc);
                next_record += stride;
            }
            Control::Continue
        })?;
        recurrence_count(&traj, radius, h)
    })?;
    let xs: Vec<f64> = counts.iter().map(|c| c.horizon).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.visits as f64).collect();
    let slope = regression_slope(&xs, &ys);
    Ok(RecurrenceStudy { spec: spec.clone(), counts, slope, pass: slope > 0.0 })
}

pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Scalar functional sampled along trajectories.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    #[default]
    Energy,
    /// `Re` of component `component` (0..3) of `u_k` or `b_k`.
    ReComponent { mode: WaveVector, field: crate::state::Field, component: usize },
}

impl Observable {
    fn evaluator(&self, lattice: &ModeLattice) -> Result<impl Fn(&SpectralState) -> f64 + Sync + '_> {
        let slot = match self {
            Observable::Energy => None,
            Observable::ReComponent { mode, field, component } => {
                let i = lattice.index_of(mode).ok_or(Error::OutOfLattice(*mode, lattice.n()))?;
                if *component > 2 {
                    return Err(Error::Config(format!("component {component} out of range")));
                }
                Some((i, *field, *component))
            }
        };
        Ok(move |s: &SpectralState| match slot {
            None => s.energy(),
            Some((i, crate::state::Field::U, c)) => s.u[i][c].re,
            Some((i, crate::state::Field::B, c)) => s.b[i][c].re,
        })
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Latter-half samples of the observable along trajectory `index`.
fn latter_half(ens: &Ensemble, obs: &(impl Fn(&SpectralState) -> f64 + Sync), index: u64) -> Result<Vec<f64>> {
    let n = ens.n_steps();
    let stride = ens.config.record_every.max(1);
    let start = n / 2;
    let mut out = Vec::with_capacity((n - start) / stride + 1);
    ens.run_one(index, |i, _, s, _| {
        if i >= start && (i - start).is_multiple_of(stride) {
            out.push(obs(s));
        }
        Control::Continue
    })?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Fraction of samples per bin, averaged over replicates.
    pub density: Vec<f64>,
}

fn histogram(samples: &[Vec<f64>], lo: f64, hi: f64, bins: usize) -> Histogram {
    let w = (hi - lo) / bins as f64;
    let mut density = vec![0.0; bins];
    for s in samples {
        for &x in s {
            let b = if w > 0.0 { (((x - lo) / w) as usize).min(bins - 1) } else { 0 };
            density[b] += 1.0 / (s.len() as f64 * samples.len() as f64);
        }
    }
    Histogram { edges: (0..=bins).map(|i| lo + w * i as f64).collect(), density }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub spec_a: EnsembleSpec,
    pub spec_b: EnsembleSpec,
    pub observable: Observable,
    pub horizon: f64,
    pub replicates: usize,
    pub samples_per_replicate: usize,
    /// KS distance per replicate pair (trajectory `r` of each spec).
    pub ks: Vec<f64>,
    pub mean_ks: f64,
    pub se_ks: f64,
    /// Percentile bootstrap 95% interval of the mean over replicate pairs.
    pub bootstrap_ci: [f64; 2],
    pub histogram_a: Histogram,
    pub histogram_b: Histogram,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub histogram_bins: usize,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions { bootstrap_resamples: 1000, bootstrap_seed: 0, histogram_bins: 20 }
    }
}

fn check_comparable(a: &EnsembleSpec, b: &EnsembleSpec) -> Result<()> {
    if a.n != b.n || a.forcing != b.forcing || a.integrator != b.integrator || a.n_trajectories != b.n_trajectories {
        return Err(Error::Config(
            "measure comparison needs the same lattice, forcing, integrator and replicate count".into(),
        ));
    }
    Ok(())
}

fn bootstrap_ci(xs: &[f64], resamples: usize, seed: u64) -> [f64; 2] {
    if xs.len() < 2 || resamples == 0 {
        let m = mean_se(xs).0;
        return [m, m];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..xs.len()).map(|_| *xs.choose(&mut rng).unwrap()).sum::<f64>() / xs.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    [q(0.025), q(0.975)]
}

/// Compares the latter-half time-averaged distributions of `observable`
/// under two specs that differ only in initial condition and seed. Each of
/// the `n_trajectories` replicate pairs yields one KS distance; the report
/// gives their mean, standard error and a bootstrap interval.
pub fn empirical_measure_compare(
    spec_a: &EnsembleSpec,
    spec_b: &EnsembleSpec,
    observable: &Observable,
    options: &MeasureOptions,
) -> Result<MeasureReport> {
    check_comparable(spec_a, spec_b)?;
    let ea = Ensemble::new(spec_a)?;
    let eb = Ensemble::new(spec_b)?;
    let obs = observable.evaluator(&ea.lattice)?;
    let r = spec_a.n_trajectories;
    let pairs = ea.map(r, |j| Ok((latter_half(&ea, &obs, j)?, latter_half(&eb, &obs, j)?)))?;
    let ks: Vec<f64> = pairs.iter().map(|(a, b)| ks_distance(a, b)).collect();
    let (mean_ks, se_ks) = mean_se(&ks);
    let all = pairs.iter().flat_map(|(a, b)| a.iter().chain(b));
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let (sa, sb): (Vec<Vec<f64>>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
    Ok(MeasureReport {
        spec_a: spec_a.clone(),
        spec_b: spec_b.clone(),
        observable: observable.clone(),
        horizon: ea.n_steps() as f64 * ea.dt(),
        replicates: r,
        samples_per_replicate: sa.first().map_or(0, |s| s.len()),
        bootstrap_ci: bootstrap_ci(&ks, options.bootstrap_resamples, options.bootstrap_seed),
        ks,
        mean_ks,
        se_ks,
        histogram_a: histogram(&sa, lo, hi, options.histogram_bins),
        histogram_b: histogram(&sb, lo, hi, options.histogram_bins),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureStudy {
    pub horizons: Vec<f64>,
    pub reports: Vec<MeasureReport>,
    /// Same-spec comparison at the longest horizon: spec A against itself
    /// with the base seed shifted, giving the sampling-noise level of KS.
    pub noise_reference: MeasureReport,
    /// `mean + 3 SE` of the same-spec KS distances.
    pub noise_band: f64,
    pub monotone_decrease: bool,
    pub final_within_band: bool,
    pub pass: bool,
}

/// Runs [`empirical_measure_compare`] at each horizon and the same-spec
/// reference at the last one. Passes when the mean KS distance strictly
/// decreases along the horizons and the last value lies inside the noise
/// band.
pub fn measure_horizon_study(
    spec_a: &EnsembleSpec,
    spec_b: &EnsembleSpec,
    observable: &Observable,
    horizons: &[f64],
    options: &MeasureOptions,
) -> Result<MeasureStudy> {
    if horizons.is_empty() {
        return Err(Error::Config("measure study needs at least one horizon".into()));
    }
    let at = |s: &EnsembleSpec, t: f64| EnsembleSpec {
        integrator: IntegratorConfig { t_end: t, ..s.integrator.clone() },
        ..s.clone()
    };
    let mut reports = Vec::with_capacity(horizons.len());
    for &t in horizons {
        reports.push(empirical_measure_compare(&at(spec_a, t), &at(spec_b, t), observable, options)?);
    }
    let last = *horizons.last().unwrap();
    let a = at(spec_a, last);
    let shifted = EnsembleSpec { base_seed: a.base_seed ^ 0x9e37_79b9_7f4a_7c15, ..a.clone() };
    let noise_reference = empirical_measure_compare(&a, &shifted, observable, options)?;
    let noise_band = noise_reference.mean_ks + SE_MULTIPLIER * noise_reference.se_ks;
    let monotone_decrease = reports.windows(2).all(|w| w[1].mean_ks < w[0].mean_ks);
    let final_within_band = reports.last().unwrap().mean_ks <= noise_band;
    Ok(MeasureStudy {
        horizons: horizons.to_vec(),
        reports,
        noise_reference,
        noise_band,
        monotone_decrease,
        final_within_band,
        pass: monotone_decrease && final_within_band,
    })
}
