//! Fixed-step time stepping of the truncated stochastic system.
//!
//! Besides the state, each step reports the pieces of the discrete energy
//! budget: the martingale increment `2 Re<a, eta> + |eta|^2 - E|eta|^2`
//! (with `a` the deterministic update and `eta` the noise) and the one-step
//! bias of the scheme against the continuous identity with left-endpoint
//! dissipation. The ensemble audit uses the former as a control variate and
//! the latter as its bias allowance.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::nonlinear_into;
use crate::error::{Error, Result};
use crate::lattice::ModeLattice;
use crate::noise::{Forcing, NoiseStreams};
use crate::state::{SpectralState, StateSnapshot};
use crate::vec3::{self, CVec3, CZERO3};

/// Energy above which a run is declared blown up.
pub const BLOWUP_ENERGY: f64 = 1e12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    /// Exponential Euler: the linear part `e^{-|k|^2 dt}` is exact, the
    /// nonlinearity is frozen over the step and the noise is the exact
    /// Ornstein-Uhlenbeck convolution.
    #[default]
    Exponential,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler_maruyama" | "em" => Ok(Scheme::EulerMaruyama),
            "exponential" | "exp" => Ok(Scheme::Exponential),
            _ => Err(Error::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

fn default_record_every() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    /// `false` drops the nonlinear terms, leaving independent
    /// Ornstein-Uhlenbeck modes.
    #[serde(default = "default_true")]
    pub nonlinear: bool,
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64) -> Self {
        IntegratorConfig { scheme, dt, t_end, record_every: 1, seed: 0, nonlinear: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end ({}) must be at least dt ({})", self.t_end, self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps, `t_end / dt` rounded to the nearest integer.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Energy-budget pieces of a single step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepBudget {
    /// `h * sum 2|k|^2 (|u_k|^2 + |b_k|^2)` at the start of the step.
    pub dissipation: f64,
    /// Zero-mean part of the energy increment.
    pub martingale: f64,
    /// Conditional expectation of the energy increment minus its
    /// continuous-time counterpart.
    pub bias: f64,
    /// Upper bound on `|bias|` from the scheme's Taylor remainder.
    pub bias_bound: f64,
}

/// Reusable stepping machinery for one lattice and forcing.
pub struct Stepper<'a> {
    lattice: &'a ModeLattice,
    forcing: &'a Forcing,
    scheme: Scheme,
    dt: f64,
    nonlinear: bool,
    lambda: Vec<f64>,
    decay: Vec<f64>,
    phi: Vec<f64>,
    noise_scale: Vec<f64>,
    traces: Vec<f64>,
    nu: Vec<CVec3>,
    nb: Vec<CVec3>,
    eta_u: Vec<CVec3>,
    eta_b: Vec<CVec3>,
}

impl<'a> Stepper<'a> {
    pub fn new(lattice: &'a ModeLattice, forcing: &'a Forcing, config: &IntegratorConfig) -> Result<Self> {
        config.validate()?;
        if forcing.dim() != lattice.dim() {
            return Err(Error::Config("forcing built for a different lattice".into()));
        }
        let h = config.dt;
        let lambda: Vec<f64> = lattice.representatives().iter().map(|k| k.norm_sq()).collect();
        let decay: Vec<f64> = lambda.iter().map(|l| (-l * h).exp()).collect();
        // (1 - e^{-lh}) / l and sqrt((1 - e^{-2lh}) / 2l), via expm1 for accuracy
        let phi = lambda.iter().map(|l| -(-l * h).exp_m1() / l).collect();
        let noise_scale = lambda
            .iter()
            .map(|l| match config.scheme {
                Scheme::Exponential => (-(-2.0 * l * h).exp_m1() / (2.0 * l)).sqrt(),
                Scheme::EulerMaruyama => h.sqrt(),
            })
            .collect();
        let d = lattice.dim();
        Ok(Stepper {
            lattice,
            forcing,
            scheme: config.scheme,
            dt: h,
            nonlinear: config.nonlinear,
            lambda,
            decay,
            phi,
            noise_scale,
            traces: forcing.traces().iter().map(|t| t[0] + t[1]).collect(),
            nu: vec![CZERO3; d],
            nb: vec![CZERO3; d],
            eta_u: vec![CZERO3; d],
            eta_b: vec![CZERO3; d],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one step in place. `t` is the time at the start of
    /// the step and only labels errors.
    pub fn step(&mut self, state: &mut SpectralState, streams: &mut NoiseStreams, t: f64) -> Result<StepBudget> {
        let d = self.lattice.dim();
        let h = self.dt;
        if self.nonlinear {
            nonlinear_into(state, self.lattice, &mut self.nu, &mut self.nb);
        }
        for i in 0..d {
            self.eta_u[i] = CZERO3;
            self.eta_b[i] = CZERO3;
        }
        let scale = &self.noise_scale;
        self.forcing.add_noise(streams, |i| scale[i], &mut self.eta_u, &mut self.eta_b);

        let mut budget = StepBudget::default();
        for i in 0..d {
            let lam = self.lambda[i];
            let x2 = vec3::cnorm_sq(&state.u[i]) + vec3::cnorm_sq(&state.b[i]);
            let (n2, xn) = if self.nonlinear {
                (
                    vec3::cnorm_sq(&self.nu[i]) + vec3::cnorm_sq(&self.nb[i]),
                    (vec3::cinner(&state.u[i], &self.nu[i]) + vec3::cinner(&state.b[i], &self.nb[i])).re,
                )
            } else {
                (0.0, 0.0)
            };
            let tr = self.traces[i];
            let s2 = self.noise_scale[i] * self.noise_scale[i];
            budget.dissipation += h * 2.0 * lam * x2;
            // a = c_x x + c_n N; the continuous counterpart of |a|^2 - |x|^2
            // is h (2 Re<x, N> - 2 lam |x|^2) and of E|eta|^2 is h tr
            let (cx, cn) = match self.scheme {
                Scheme::Exponential => (self.decay[i], self.phi[i]),
                Scheme::EulerMaruyama => (1.0 - lam * h, h),
            };
            budget.bias +=
                (cx * cx - 1.0 + 2.0 * lam * h) * x2 + 2.0 * (cx * cn - h) * xn + cn * cn * n2 + (s2 - h) * tr;
            budget.bias_bound += h
                * h
                * match self.scheme {
                    Scheme::EulerMaruyama => {
                        // exact: |F|^2 with F = N - lam x
                        (n2 - 2.0 * lam * xn + lam * lam * x2).max(0.0)
                    }
                    Scheme::Exponential => 3.5 * lam * lam * x2 + 2.5 * n2 + lam * tr,
                };
            let cx = Complex64::new(cx, 0.0);
            let cn = Complex64::new(cn, 0.0);
            for (x, n, eta) in
                [(&mut state.u[i], &self.nu[i], &self.eta_u[i]), (&mut state.b[i], &self.nb[i], &self.eta_b[i])]
            {
                let mut a = vec3::cscale(x, cx);
                if self.nonlinear {
                    vec3::caxpy(&mut a, cn, n);
                }
                budget.martingale += 2.0 * vec3::cinner(&a, eta).re + vec3::cnorm_sq(eta);
                *x = vec3::cadd(&a, eta);
            }
            budget.martingale -= s2 * tr;
        }
        state.project(self.lattice);
        check_blowup(state, self.lattice, t + h)?;
        Ok(budget)
    }
}

fn check_blowup(state: &SpectralState, lattice: &ModeLattice, time: f64) -> Result<()> {
    let e = state.energy();
    if e.is_finite() && e <= BLOWUP_ENERGY {
        return Ok(());
    }
    let worst = (0..lattice.dim())
        .max_by(|&a, &b| {
            let ma = vec3::cnorm_sq(&state.u[a]) + vec3::cnorm_sq(&state.b[a]);
            let mb = vec3::cnorm_sq(&state.u[b]) + vec3::cnorm_sq(&state.b[b]);
            // NaN sorts last so a non-finite mode wins
            ma.total_cmp(&mb)
        })
        .unwrap_or(0);
    Err(Error::BlowUp { mode: lattice.rep(worst), time, energy: e })
}

/// One step without keeping the machinery around.
pub fn step(
    state: &SpectralState,
    lattice: &ModeLattice,
    forcing: &Forcing,
    config: &IntegratorConfig,
    streams: &mut NoiseStreams,
) -> Result<SpectralState> {
    let mut s = state.clone();
    Stepper::new(lattice, forcing, config)?.step(&mut s, streams, 0.0)?;
    Ok(s)
}

/// Recorded run. Budget columns are cumulative from `t = 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
    pub energy_u: Vec<f64>,
    pub energy_b: Vec<f64>,
    pub dissipation_integral: Vec<f64>,
    pub martingale: Vec<f64>,
    pub bias: Vec<f64>,
    pub bias_bound: Vec<f64>,
}

impl Trajectory {
    pub fn record(&mut self, t: f64, state: &SpectralState, acc: &StepBudget) {
        self.times.push(t);
        self.energy_u.push(state.energy_u());
        self.energy_b.push(state.energy_b());
        self.dissipation_integral.push(acc.dissipation);
        self.martingale.push(acc.martingale);
        self.bias.push(acc.bias);
        self.bias_bound.push(acc.bias_bound);
        self.states.push(state.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.energy_u.iter().zip(&self.energy_b).map(|(a, b)| a + b).collect()
    }

    /// CSV with `t, energy_u, energy_b` and, if requested, `|u_k|^2`,
    /// `|b_k|^2` per representative in lattice order (headers `u_k1_k2_k3`).
    pub fn to_csv(&self, lattice: &ModeLattice, per_mode: bool) -> String {
        let mut out = String::from("t,energy_u,energy_b");
        if per_mode {
            for p in ["u", "b"] {
                for k in lattice.representatives() {
                    let _ = write!(out, ",{p}_{}_{}_{}", k.k1, k.k2, k.k3);
                }
            }
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{},{},{}", self.times[i], self.energy_u[i], self.energy_b[i]);
            if per_mode {
                let s = &self.states[i];
                for v in s.u.iter().chain(&s.b) {
                    let _ = write!(out, ",{}", vec3::cnorm_sq(v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn snapshots(&self, lattice: &ModeLattice) -> Vec<(f64, StateSnapshot)> {
        self.times.iter().zip(&self.states).map(|(t, s)| (*t, s.snapshot(lattice))).collect()
    }
}

/// A run that stopped early; `partial` holds everything recorded before the
/// failing step.
#[derive(Clone, Debug)]
pub struct SimulationFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} recorded snapshots)", self.error, self.partial.len())
    }
}

impl std::error::Error for SimulationFailure {}

/// What an observer wants after seeing a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Runs trajectory number `trajectory` of an ensemble, calling `observe`
/// at `t = 0` and after every step with the step index, time, state and
/// cumulative budget. Returns the number of steps taken.
pub fn run_observed(
    init: &SpectralState,
    forcing: &Forcing,
    config: &IntegratorConfig,
    lattice: &ModeLattice,
    trajectory: u64,
    mut observe: impl FnMut(usize, f64, &SpectralState, &StepBudget) -> Control,
) -> Result<usize> {
    if init.n() != lattice.n() || init.len() != lattice.dim() {
        return Err(Error::InvalidState("initial state does not match lattice".into()));
    }
    let mut stepper = Stepper::new(lattice, forcing, config)?;
    let mut streams = NoiseStreams::new(forcing, config.seed, trajectory);
    let mut state = init.clone();
    let mut acc = StepBudget::default();
    if observe(0, 0.0, &state, &acc) == Control::Stop {
        return Ok(0);
    }
    let n = config.n_steps();
    for i in 0..n {
        let t = i as f64 * config.dt;
        let b = stepper.step(&mut state, &mut streams, t)?;
        acc.dissipation += b.dissipation;
        acc.martingale += b.martingale;
        acc.bias += b.bias;
        acc.bias_bound += b.bias_bound;
        if observe(i + 1, (i + 1) as f64 * config.dt, &state, &acc) == Control::Stop {
            return Ok(i + 1);
        }
    }
    Ok(n)
}

pub fn simulate(
    init: &SpectralState,
    forcing: &Forcing,
    config: &IntegratorConfig,
    lattice: &ModeLattice,
) -> std::result::Result<Trajectory, Box<SimulationFailure>> {
    let mut traj = Trajectory::default();
    let stride = config.record_every.max(1);
    let n = config.n_steps();
    let res = run_observed(init, forcing, config, lattice, 0, |i, t, s, acc| {
        if i % stride == 0 || i == n {
            traj.record(t, s, acc);
        }
        Control::Continue
    });
    match res {
        Ok(_) => Ok(traj),
        Err(error) => Err(Box::new(SimulationFailure { error, partial: traj })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::WaveVector;
    use crate::noise::{Channel, ForcingConfig, ForcingEntry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(Scheme::Exponential, 0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::new(Scheme::Exponential, 0.1, 0.05).validate().is_err());
        let mut c = IntegratorConfig::new(Scheme::Exponential, 0.1, 1.0);
        c.record_every = 0;
        assert!(c.validate().is_err());
        assert_eq!(IntegratorConfig::new(Scheme::Exponential, 0.1, 1.0).n_steps(), 10);
        assert_eq!("em".parse::<Scheme>().unwrap(), Scheme::EulerMaruyama);
        assert!("rk4".parse::<Scheme>().is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let lat = ModeLattice::build(2).unwrap();
        let f = Forcing::none(&lat);
        for scheme in [Scheme::EulerMaruyama, Scheme::Exponential] {
            let cfg = IntegratorConfig::new(scheme, 0.01, 0.1);
            let mut streams = NoiseStreams::new(&f, 0, 0);
            let z = SpectralState::zeros(&lat);
            assert_eq!(step(&z, &lat, &f, &cfg, &mut streams).unwrap(), z);
        }
    }

    #[test]
    fn single_mode_exponential_decay_is_exact() {
        let lat = ModeLattice::build(1).unwrap();
        let m = WaveVector::new(1, 0, 0);
        let mut st = SpectralState::zeros(&lat);
        let u = [c(0., 0.), c(0.3, 0.1), c(-0.2, 0.5)];
        st.set_mode(&lat, &m, u, CZERO3).unwrap();
        let f = Forcing::none(&lat);
        let dt = 0.05;
        let cfg = IntegratorConfig::new(Scheme::Exponential, dt, dt);
        let mut streams = NoiseStreams::new(&f, 0, 0);
        let next = step(&st, &lat, &f, &cfg, &mut streams).unwrap();
        let i = lat.index_of(&m).unwrap();
        let e = (-dt).exp();
        for (got, want) in next.u[i].iter().zip(&u) {
            assert!((got - want * e).norm() <= 1e-15);
        }
        assert!((0..lat.dim()).filter(|&k| k != i).all(|k| next.u[k] == CZERO3 && next.b[k] == CZERO3));
    }

    fn two_mode_state(lat: &ModeLattice) -> SpectralState {
        let mut st = SpectralState::zeros(lat);
        st.set_mode(
            lat,
            &WaveVector::new(1, 0, 0),
            [c(0., 0.), c(1.2, 0.3), c(0.4, -0.9)],
            [c(0., 0.), c(0.2, 0.7), c(-0.5, 0.1)],
        )
        .unwrap();
        st.set_mode(
            lat,
            &WaveVector::new(0, 1, 0),
            [c(0.8, -0.6), c(0., 0.), c(1.1, 0.2)],
            [c(-0.3, 0.4), c(0., 0.), c(0.9, 0.5)],
        )
        .unwrap();
        st
    }

    fn terminal(lat: &ModeLattice, init: &SpectralState, scheme: Scheme, dt: f64, t: f64) -> SpectralState {
        let f = Forcing::none(lat);
        let cfg = IntegratorConfig { record_every: usize::MAX, ..IntegratorConfig::new(scheme, dt, t) };
        simulate(init, &f, &cfg, lat).unwrap().states.pop().unwrap()
    }

    #[test]
    fn first_order_self_convergence() {
        let lat = ModeLattice::build(1).unwrap();
        let init = two_mode_state(&lat);
        for scheme in [Scheme::Exponential, Scheme::EulerMaruyama] {
            let h = 0.01;
            let reference = terminal(&lat, &init, scheme, h / 64.0, 1.0);
            let e1 = terminal(&lat, &init, scheme, h, 1.0).max_abs_diff(&reference);
            let e2 = terminal(&lat, &init, scheme, h / 2.0, 1.0).max_abs_diff(&reference);
            let ratio = e1 / e2;
            assert!((1.7..2.5).contains(&ratio), "{scheme:?}: ratio {ratio}");
        }
    }

    #[test]
    fn noise_free_energy_decays() {
        let lat = ModeLattice::build(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let init = SpectralState::random(&lat, 10.0, &mut rng);
        let f = Forcing::none(&lat);
        let cfg = IntegratorConfig { record_every: 10, ..IntegratorConfig::new(Scheme::Exponential, 1e-3, 2.0) };
        let traj = simulate(&init, &f, &cfg, &lat).unwrap();
        let e = traj.energies();
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
        for (t, en) in traj.times.iter().zip(&e) {
            assert!(*en <= 1.1 * e[0] * (-2.0 * t).exp(), "t={t}");
        }
        // divergence stays on the constraint
        let last = traj.states.last().unwrap();
        for (i, k) in lat.representatives().iter().enumerate() {
            assert!(vec3::cdot_real(&last.u[i], &k.as_vec3()).norm() <= 1e-12);
            assert!(vec3::cdot_real(&last.b[i], &k.as_vec3()).norm() <= 1e-12);
        }
    }

    #[test]
    fn recording_and_determinism() {
        let lat = ModeLattice::build(1).unwrap();
        let cfgf = ForcingConfig::new(vec![ForcingEntry::new(
            WaveVector::new(1, 0, 0),
            Channel::U,
            &[[c(0., 0.), c(1., 0.), c(0., 1.)]],
        )]);
        let f = Forcing::new(&cfgf, &lat).unwrap();
        let init = two_mode_state(&lat);
        let one = IntegratorConfig::new(Scheme::Exponential, 0.1, 0.1);
        assert_eq!(simulate(&init, &f, &one, &lat).unwrap().len(), 2);
        let cfg =
            IntegratorConfig { seed: 11, record_every: 3, ..IntegratorConfig::new(Scheme::Exponential, 0.01, 0.5) };
        let a = simulate(&init, &f, &cfg, &lat).unwrap();
        let b = simulate(&init, &f, &cfg, &lat).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(&lat, true), b.to_csv(&lat, true));
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*a.times.last().unwrap(), 0.5);
        let c2 = IntegratorConfig { seed: 12, ..cfg };
        assert_ne!(simulate(&init, &f, &c2, &lat).unwrap(), a);
        let header = a.to_csv(&lat, true).lines().next().unwrap().to_string();
        assert!(header.starts_with("t,energy_u,energy_b,u_"));
        assert!(header.contains(",u_0_0_1,") && header.ends_with(",b_1_1_1"));
        assert_eq!(header.split(',').count(), 3 + 2 * lat.dim());
    }

    #[test]
    fn blowup_reports_mode_and_partial_trajectory() {
        let lat = ModeLattice::build(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = SpectralState::random(&lat, 1e4, &mut rng);
        let f = Forcing::none(&lat);
        // explicit Euler far beyond its stability limit
        let cfg = IntegratorConfig::new(Scheme::EulerMaruyama, 1.0, 200.0);
        let err = simulate(&init, &f, &cfg, &lat).unwrap_err();
        assert!(matches!(err.error, Error::BlowUp { .. }));
        assert!(!err.partial.is_empty());
    }

    #[test]
    fn noise_free_budget_is_exact_per_step() {
        // with no noise the martingale vanishes and the recorded bias is the
        // exact discrepancy of the discrete energy identity
        let lat = ModeLattice::build(1).unwrap();
        let init = two_mode_state(&lat);
        let f = Forcing::none(&lat);
        for scheme in [Scheme::EulerMaruyama, Scheme::Exponential] {
            let cfg = IntegratorConfig::new(scheme, 0.01, 0.5);
            let tr = simulate(&init, &f, &cfg, &lat).unwrap();
            let e = tr.energies();
            for i in 0..tr.len() {
                let resid = e[i] + tr.dissipation_integral[i] - e[0];
                assert_eq!(tr.martingale[i], 0.0);
                assert!((resid - tr.bias[i]).abs() < 1e-10, "{scheme:?} {i}: {resid} vs {}", tr.bias[i]);
                assert!(tr.bias[i].abs() <= tr.bias_bound[i] * 1.05 + 1e-12);
            }
        }
    }
}
