use std::fs;
use std::path::PathBuf;

use galerkin_mhd::ergodicity::{
    energy_balance_audit, hitting_times, measure_horizon_study, moment_bound_check, recurrence_study, EnsembleSpec,
};
use galerkin_mhd::hormander::closure;
use galerkin_mhd::integrator::{simulate, Trajectory};
use galerkin_mhd::noise::{intensity, Forcing, ForcingConfig};
use galerkin_mhd::{Error, ModeLattice, WaveVector};
use serde_json::{json, Value};

use crate::config::{config_hash, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    BlowUp(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::BlowUp(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::BlowUp(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { .. } => Failure::BlowUp(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Config(s)
    }
}

type Outcome = Result<(), Failure>;

/// Shared context of one invocation. Every artifact carries the config hash
/// and the seed: JSON as top-level fields, CSV as leading `#` lines.
pub struct Run {
    pub command: &'static str,
    pub cfg: RunConfig,
    pub forcing: ForcingConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Run {
    pub fn new(command: &'static str, cfg: RunConfig) -> Result<Self, Failure> {
        let forcing = cfg.forcing()?;
        let hash = config_hash(command, &cfg, &forcing);
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).map_err(|e| format!("cannot create output directory {}: {e}", out.display()))?;
        Ok(Run { command, cfg, forcing, hash, out })
    }

    fn write(&self, name: &str, body: &str) -> Outcome {
        let path = self.out.join(name);
        fs::write(&path, body).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
    }

    /// Writes `value` (an object) with the provenance fields merged in and
    /// returns the text written.
    fn write_json(&self, name: &str, value: Value) -> Result<String, Failure> {
        let mut obj = match value {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        obj.insert("command".into(), json!(self.command));
        obj.insert("config_hash".into(), json!(self.hash));
        obj.insert("seed".into(), json!(self.cfg.seed));
        let text = serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values always serialize") + "\n";
        self.write(name, &text)?;
        Ok(text)
    }

    fn write_csv(&self, name: &str, body: &str) -> Outcome {
        self.write(name, &format!("# config_hash={}\n# seed={}\n{body}", self.hash, self.cfg.seed))
    }

    fn lattice(&self) -> Result<ModeLattice, Failure> {
        Ok(ModeLattice::build(self.cfg.n)?)
    }

    fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec {
            n: self.cfg.n,
            n_trajectories: self.cfg.trajectories,
            base_seed: self.cfg.seed,
            init: self.cfg.init.clone(),
            forcing: self.forcing.clone(),
            integrator: self.cfg.integrator(),
        }
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

pub fn lattice(run: &Run) -> Result<String, Failure> {
    let lat = run.lattice()?;
    let mut v = to_value(&lat.dump());
    v["D"] = json!(lat.dim());
    run.write_json("lattice.json", v)
}

fn trajectory_summary(traj: &Trajectory) -> Value {
    let last = |xs: &[f64]| xs.last().copied();
    json!({
        "records": traj.len(),
        "final_time": last(&traj.times),
        "final_energy_u": last(&traj.energy_u),
        "final_energy_b": last(&traj.energy_b),
        "dissipation_integral": last(&traj.dissipation_integral),
        "martingale": last(&traj.martingale),
        "bias": last(&traj.bias),
        "bias_bound": last(&traj.bias_bound),
    })
}

pub fn simulate_cmd(run: &Run) -> Result<String, Failure> {
    let lat = run.lattice()?;
    let forcing = Forcing::new(&run.forcing, &lat)?;
    let init = run.cfg.init.build(&lat)?;
    let per_mode = run.cfg.simulate.per_mode;
    match simulate(&init, &forcing, &run.cfg.integrator(), &lat) {
        Ok(traj) => {
            run.write_csv("trajectory.csv", &traj.to_csv(&lat, per_mode))?;
            run.write_json("simulate.json", trajectory_summary(&traj))
        }
        Err(failure) => {
            // keep what was computed before the failure
            run.write_csv("trajectory.csv", &failure.partial.to_csv(&lat, per_mode))?;
            let mut v = trajectory_summary(&failure.partial);
            v["error"] = json!(failure.error.to_string());
            run.write_json("simulate.json", v)?;
            Err(failure.error.into())
        }
    }
}

/// Forced modes for the closure: the explicit list, else the modes of the
/// forcing table (as representatives).
fn closure_modes(run: &Run, lat: &ModeLattice) -> Result<Vec<WaveVector>, Failure> {
    if let Some(modes) = run.cfg.forced_modes()? {
        return Ok(modes);
    }
    let mut modes = Vec::new();
    for e in &run.forcing.forcing {
        let (k, _) = lat.canonical(&e.mode)?;
        if !modes.contains(&k) {
            modes.push(k);
        }
    }
    Ok(modes)
}

pub fn hormander(run: &Run) -> Result<String, Failure> {
    let lat = run.lattice()?;
    let modes = closure_modes(run, &lat)?;
    let report = closure(&modes, &lat, run.cfg.hormander.method)?;
    run.write_json("hormander.json", to_value(&report))
}

pub fn audit(run: &Run) -> Result<String, Failure> {
    let spec = run.ensemble();
    let energy = energy_balance_audit(&spec)?;
    let grid = match &run.cfg.audit.moment_grid {
        Some(g) => g.clone(),
        None => {
            let t_end = spec.integrator.t_end;
            let mut g: Vec<f64> = (0..=t_end.floor() as usize).map(|t| t as f64).collect();
            if g.last() != Some(&t_end) {
                g.push(t_end);
            }
            g
        }
    };
    let moment = moment_bound_check(&spec, &grid)?;
    run.write_csv("audit.csv", &energy.to_csv())?;
    run.write_csv("moment.csv", &moment.to_csv())?;
    run.write_json(
        "audit.json",
        json!({ "energy_audit": energy, "moment_bound": moment, "pass": energy.pass && moment.pass }),
    )
}

pub fn hitting(run: &Run) -> Result<String, Failure> {
    let report = hitting_times(&run.ensemble(), run.cfg.hitting.c)?;
    run.write_csv("hitting.csv", &report.to_csv())?;
    run.write_json("hitting.json", to_value(&report))
}

pub fn recurrence(run: &Run) -> Result<String, Failure> {
    let spec = run.ensemble();
    let rc = &run.cfg.recurrence;
    let radius = rc.radius.unwrap_or_else(|| (intensity(&spec.forcing).sigma_sq() / 2.0).sqrt());
    let study = recurrence_study(&spec, radius, rc.h, &rc.horizons)?;
    let mut csv = String::from("horizon,visits,samples,mean_gap,max_gap\n");
    for c in &study.counts {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{},{}\n", c.horizon, c.visits, c.samples, opt(c.mean_gap), opt(c.max_gap)));
    }
    run.write_csv("recurrence.csv", &csv)?;
    run.write_json("recurrence.json", to_value(&study))
}

pub fn measure(run: &Run) -> Result<String, Failure> {
    let a = run.ensemble();
    let m = &run.cfg.measure;
    let b = EnsembleSpec {
        init: m.init_b.clone(),
        base_seed: m.seed_b.unwrap_or(run.cfg.seed.wrapping_add(1)),
        ..a.clone()
    };
    let study = measure_horizon_study(&a, &b, &m.observable, &m.horizons, &m.options())?;
    let mut csv = String::from("horizon,mean_ks,se_ks,ci_low,ci_high\n");
    for r in &study.reports {
        csv.push_str(&format!("{},{},{},{},{}\n", r.horizon, r.mean_ks, r.se_ks, r.bootstrap_ci[0], r.bootstrap_ci[1]));
    }
    run.write_csv("measure.csv", &csv)?;
    run.write_json("measure.json", to_value(&study))
}
