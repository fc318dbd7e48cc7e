//! Degenerate additive forcing.
//!
//! Each forced mode carries, per channel, a complex 3 x r matrix `q` given by
//! its columns; the increment over a step is `sum_j q_j xi_j sqrt(dt)` with
//! independent standard Gaussians `xi_j`. A single column is the
//! vector-valued reading of the forcing.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModeLattice, WaveVector};
use crate::vec3::{self, CVec3, CZERO3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    U,
    B,
}

impl Channel {
    fn index(self) -> usize {
        match self {
            Channel::U => 0,
            Channel::B => 1,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::U => "u",
            Channel::B => "b",
        })
    }
}

/// One forcing matrix as written in a config file. Columns are complex
/// 3-vectors stored as `[[re, im]; 3]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingEntry {
    pub mode: WaveVector,
    pub channel: Channel,
    pub columns: Vec<[[f64; 2]; 3]>,
}

impl ForcingEntry {
    pub fn new(mode: WaveVector, channel: Channel, columns: &[CVec3]) -> Self {
        ForcingEntry { mode, channel, columns: columns.iter().map(|c| c.map(|z| [z.re, z.im])).collect() }
    }

    pub fn complex_columns(&self) -> Vec<CVec3> {
        self.columns.iter().map(|c| c.map(|[re, im]| Complex64::new(re, im))).collect()
    }

    /// `Tr(q^T conj(q))`, the squared Frobenius norm.
    pub fn trace(&self) -> f64 {
        self.complex_columns().iter().map(vec3::cnorm_sq).sum()
    }
}

/// The forcing as supplied: a list of matrices, possibly at negated
/// representatives (folded by conjugation when resolved).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForcingConfig {
    #[serde(default)]
    pub forcing: Vec<ForcingEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ForcingFile {
    Table(ForcingConfig),
    List(Vec<ForcingEntry>),
}

impl ForcingConfig {
    pub fn new(entries: Vec<ForcingEntry>) -> Self {
        ForcingConfig { forcing: entries }
    }

    pub fn is_empty(&self) -> bool {
        self.forcing.is_empty()
    }

    /// Both channels of every listed mode forced by the real orthonormal pair
    /// spanning the plane orthogonal to the mode, scaled by `amplitude`.
    pub fn full_plane(modes: &[WaveVector], amplitude: f64) -> Self {
        let mut entries = Vec::new();
        for m in modes {
            let [e1, e2] = orthonormal_pair(m);
            let cols: Vec<CVec3> = [e1, e2].iter().map(|e| e.map(|x| Complex64::new(amplitude * x, 0.0))).collect();
            entries.push(ForcingEntry::new(*m, Channel::U, &cols));
            entries.push(ForcingEntry::new(*m, Channel::B, &cols));
        }
        ForcingConfig { forcing: entries }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        match serde_json::from_str::<ForcingFile>(s) {
            Ok(ForcingFile::Table(c)) => Ok(c),
            Ok(ForcingFile::List(v)) => Ok(ForcingConfig { forcing: v }),
            Err(e) => Err(Error::Config(format!("forcing JSON: {e}"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forcing serializes")
    }
}

/// Orthonormal basis of the plane orthogonal to a nonzero wavevector.
pub fn orthonormal_pair(m: &WaveVector) -> [[f64; 3]; 2] {
    let k = m.as_vec3();
    let kn = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let k = vec3::scale(&k, 1.0 / kn);
    // axis least aligned with k
    let mut axis = [0.0; 3];
    let j = (0..3).min_by(|&a, &b| k[a].abs().total_cmp(&k[b].abs())).unwrap();
    axis[j] = 1.0;
    let e1 = vec3::cross(&k, &axis);
    let e1 = vec3::scale(&e1, 1.0 / vec3::norm_sq(&e1).sqrt());
    let e2 = vec3::cross(&k, &e1);
    [e1, e2]
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForcingDiagnostic {
    OutOfLattice {
        mode: WaveVector,
    },
    NoColumns {
        mode: WaveVector,
        channel: Channel,
    },
    NonFinite {
        mode: WaveVector,
        channel: Channel,
    },
    /// Column `column` has a component along the mode.
    NotOrthogonal {
        mode: WaveVector,
        channel: Channel,
        column: usize,
        magnitude: f64,
    },
}

fn orth_tol(k: &WaveVector, c: &CVec3) -> f64 {
    1e-12 * (k.norm_sq() * vec3::cnorm_sq(c)).sqrt().max(1.0)
}

pub fn validate_forcing(config: &ForcingConfig, lattice: &ModeLattice) -> Vec<ForcingDiagnostic> {
    let mut out = Vec::new();
    for e in &config.forcing {
        if !lattice.contains(&e.mode) {
            out.push(ForcingDiagnostic::OutOfLattice { mode: e.mode });
            continue;
        }
        if e.columns.is_empty() {
            out.push(ForcingDiagnostic::NoColumns { mode: e.mode, channel: e.channel });
        }
        let kv = e.mode.as_vec3();
        for (j, c) in e.complex_columns().iter().enumerate() {
            if !c.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                out.push(ForcingDiagnostic::NonFinite { mode: e.mode, channel: e.channel });
                continue;
            }
            let mag = vec3::cdot_real(c, &kv).norm();
            if mag > orth_tol(&e.mode, c) {
                out.push(ForcingDiagnostic::NotOrthogonal {
                    mode: e.mode,
                    channel: e.channel,
                    column: j,
                    magnitude: mag,
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseIntensity {
    pub sigma_u_sq: f64,
    pub sigma_b_sq: f64,
    pub eps0_u: f64,
    pub eps0_b: f64,
}

impl NoiseIntensity {
    pub fn sigma_sq(&self) -> f64 {
        self.sigma_u_sq + self.sigma_b_sq
    }

    pub fn eps0(&self) -> f64 {
        self.eps0_u + self.eps0_b
    }
}

/// Noise intensities. With `q` a matrix, `|q_k|^2` is read as the Frobenius
/// norm, so `eps0` coincides with `sigma^2` channel by channel.
pub fn intensity(config: &ForcingConfig) -> NoiseIntensity {
    let mut out = NoiseIntensity::default();
    for e in &config.forcing {
        let t = e.trace();
        match e.channel {
            Channel::U => out.sigma_u_sq += t,
            Channel::B => out.sigma_b_sq += t,
        }
    }
    out.eps0_u = out.sigma_u_sq;
    out.eps0_b = out.sigma_b_sq;
    out
}

/// A validated forcing laid out on the lattice: per forced (mode, channel)
/// the columns, folded onto the representative.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    dim: usize,
    /// (representative index, channel, columns), sorted by index then channel.
    active: Vec<(usize, Channel, Vec<CVec3>)>,
    intensity: NoiseIntensity,
}

impl Forcing {
    pub fn new(config: &ForcingConfig, lattice: &ModeLattice) -> Result<Self> {
        if let Some(d) = validate_forcing(config, lattice).into_iter().next() {
            return Err(match d {
                ForcingDiagnostic::OutOfLattice { mode } => Error::OutOfLattice(mode, lattice.n()),
                ForcingDiagnostic::NotOrthogonal { mode, channel, column, magnitude } => Error::Constraint {
                    mode,
                    what: format!("forcing column {column} of channel {channel} not orthogonal to the mode"),
                    magnitude,
                },
                ForcingDiagnostic::NoColumns { mode, channel } => {
                    Error::Config(format!("forcing at {mode} channel {channel} has no columns"))
                }
                ForcingDiagnostic::NonFinite { mode, channel } => {
                    Error::Config(format!("forcing at {mode} channel {channel} is not finite"))
                }
            });
        }
        // a column c at -k drives u_k through conj(c); repeated entries for
        // the same slot append independent columns
        let mut slots: BTreeMap<(usize, Channel), Vec<CVec3>> = BTreeMap::new();
        for e in &config.forcing {
            let (idx, conj) = lattice.locate(&e.mode).expect("validated");
            let cols = e.complex_columns().into_iter().map(|c| if conj { vec3::cconj(&c) } else { c });
            slots.entry((idx, e.channel)).or_default().extend(cols);
        }
        Ok(Forcing {
            dim: lattice.dim(),
            active: slots.into_iter().map(|((i, ch), cols)| (i, ch, cols)).collect(),
            intensity: intensity(config),
        })
    }

    pub fn none(lattice: &ModeLattice) -> Self {
        Forcing { dim: lattice.dim(), active: Vec::new(), intensity: NoiseIntensity::default() }
    }

    pub fn intensity(&self) -> NoiseIntensity {
        self.intensity
    }

    pub fn is_zero(&self) -> bool {
        self.active.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Forced representatives in lattice order (either channel).
    pub fn forced_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.active.iter().map(|a| a.0).collect();
        v.dedup();
        v
    }

    /// `Tr(q^T conj(q))` per representative and channel.
    pub fn traces(&self) -> Vec<[f64; 2]> {
        let mut t = vec![[0.0; 2]; self.dim];
        for (i, ch, cols) in &self.active {
            t[*i][ch.index()] += cols.iter().map(vec3::cnorm_sq).sum::<f64>();
        }
        t
    }

    /// Adds `scale(k) * q_k xi` to `u`, `b` for every forced slot, drawing
    /// the Gaussians from `streams`.
    pub fn add_noise(
        &self,
        streams: &mut NoiseStreams,
        scale: impl Fn(usize) -> f64,
        u: &mut [CVec3],
        b: &mut [CVec3],
    ) {
        debug_assert_eq!(streams.rngs.len(), self.active.len());
        for ((i, ch, cols), rng) in self.active.iter().zip(streams.rngs.iter_mut()) {
            let s = scale(*i);
            let target = match ch {
                Channel::U => &mut u[*i],
                Channel::B => &mut b[*i],
            };
            for c in cols {
                let xi: f64 = rng.sample(StandardNormal);
                vec3::caxpy(target, Complex64::new(s * xi, 0.0), c);
            }
        }
    }
}

/// Independent ChaCha streams, one per (trajectory, forced mode, channel).
/// The 256-bit key encodes the base seed and trajectory number; the stream
/// id encodes mode and channel.
#[derive(Clone, Debug)]
pub struct NoiseStreams {
    rngs: Vec<ChaCha8Rng>,
}

impl NoiseStreams {
    pub fn new(forcing: &Forcing, base_seed: u64, trajectory: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&base_seed.to_le_bytes());
        key[8..16].copy_from_slice(&trajectory.to_le_bytes());
        key[16..24].copy_from_slice(b"galerkin");
        let rngs = forcing
            .active
            .iter()
            .map(|(i, ch, _)| {
                let mut r = ChaCha8Rng::from_seed(key);
                r.set_stream(2 * *i as u64 + ch.index() as u64);
                r
            })
            .collect();
        NoiseStreams { rngs }
    }
}

/// Wiener increments `q_k xi sqrt(dt)` on every representative (zero where
/// unforced).
#[derive(Clone, Debug, PartialEq)]
pub struct Increments {
    pub u: Vec<CVec3>,
    pub b: Vec<CVec3>,
}

pub fn sample_increments(forcing: &Forcing, dt: f64, streams: &mut NoiseStreams) -> Result<Increments> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut inc = Increments { u: vec![CZERO3; forcing.dim], b: vec![CZERO3; forcing.dim] };
    let s = dt.sqrt();
    forcing.add_noise(streams, |_| s, &mut inc.u, &mut inc.b);
    Ok(inc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn col_01i() -> CVec3 {
        [c(0., 0.), c(1., 0.), c(0., 1.)]
    }

    #[test]
    fn empty_config() {
        let lat = ModeLattice::build(1).unwrap();
        let cfg = ForcingConfig::default();
        assert!(validate_forcing(&cfg, &lat).is_empty());
        assert_eq!(intensity(&cfg), NoiseIntensity::default());
        let f = Forcing::new(&cfg, &lat).unwrap();
        let mut st = NoiseStreams::new(&f, 1, 0);
        let inc = sample_increments(&f, 0.1, &mut st).unwrap();
        assert!(inc.u.iter().chain(&inc.b).all(|v| *v == CZERO3));
    }

    #[test]
    fn orthogonality_diagnostics() {
        let lat = ModeLattice::build(1).unwrap();
        let m = WaveVector::new(1, 0, 0);
        let ok = ForcingConfig::new(vec![ForcingEntry::new(m, Channel::U, &[col_01i()])]);
        assert!(validate_forcing(&ok, &lat).is_empty());
        let bad = ForcingConfig::new(vec![ForcingEntry::new(m, Channel::B, &[[c(1., 0.), c(0., 0.), c(0., 0.)]])]);
        let d = validate_forcing(&bad, &lat);
        assert!(matches!(d[..], [ForcingDiagnostic::NotOrthogonal { column: 0, channel: Channel::B, .. }]));
        assert!(matches!(Forcing::new(&bad, &lat), Err(Error::Constraint { .. })));
        let out = ForcingConfig::new(vec![ForcingEntry::new(WaveVector::new(2, 0, 0), Channel::U, &[col_01i()])]);
        assert_eq!(
            validate_forcing(&out, &lat),
            vec![ForcingDiagnostic::OutOfLattice { mode: WaveVector::new(2, 0, 0) }]
        );
    }

    #[test]
    fn trace_and_additivity() {
        let m = WaveVector::new(1, 0, 0);
        let one = ForcingConfig::new(vec![ForcingEntry::new(m, Channel::U, &[col_01i()])]);
        let i1 = intensity(&one);
        assert_eq!(i1.sigma_u_sq, 2.0);
        assert_eq!(i1.sigma_b_sq, 0.0);
        assert_eq!(i1.eps0(), 2.0);
        let two = ForcingConfig::new(vec![
            ForcingEntry::new(m, Channel::U, &[col_01i()]),
            ForcingEntry::new(WaveVector::new(0, 1, 0), Channel::U, &[[c(0., 1.), c(0., 0.), c(1., 0.)]]),
        ]);
        assert_eq!(intensity(&two).sigma_sq(), 4.0);
        let full = ForcingConfig::full_plane(&[m, WaveVector::new(0, 1, 0), WaveVector::new(0, 0, 1)], 1.0);
        assert!((intensity(&full).sigma_sq() - 12.0).abs() < 1e-14);
    }

    #[test]
    fn full_plane_columns_are_orthonormal() {
        let lat = ModeLattice::build(2).unwrap();
        for k in lat.representatives() {
            let [e1, e2] = orthonormal_pair(k);
            assert!(vec3::dot(&e1, &k.as_vec3()).abs() < 1e-14);
            assert!(vec3::dot(&e2, &k.as_vec3()).abs() < 1e-14);
            assert!(vec3::dot(&e1, &e2).abs() < 1e-14);
            assert!((vec3::norm_sq(&e1) - 1.0).abs() < 1e-14);
            assert!((vec3::norm_sq(&e2) - 1.0).abs() < 1e-14);
        }
        assert!(validate_forcing(&ForcingConfig::full_plane(lat.representatives(), 0.3), &lat).is_empty());
    }

    #[test]
    fn negated_mode_folds_by_conjugation() {
        let lat = ModeLattice::build(1).unwrap();
        let cfg = ForcingConfig::new(vec![ForcingEntry::new(WaveVector::new(-1, 0, 0), Channel::U, &[col_01i()])]);
        let f = Forcing::new(&cfg, &lat).unwrap();
        let idx = lat.index_of(&WaveVector::new(1, 0, 0)).unwrap();
        assert_eq!(f.active, vec![(idx, Channel::U, vec![vec3::cconj(&col_01i())])]);
    }

    #[test]
    fn increments_variance_matches_trace() {
        let lat = ModeLattice::build(1).unwrap();
        let m = WaveVector::new(1, 0, 0);
        let cfg = ForcingConfig::new(vec![ForcingEntry::new(m, Channel::U, &[col_01i()])]);
        let f = Forcing::new(&cfg, &lat).unwrap();
        let idx = lat.index_of(&m).unwrap();
        let dt = 0.01;
        let mut st = NoiseStreams::new(&f, 42, 0);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let inc = sample_increments(&f, dt, &mut st).unwrap();
            assert!(vec3::cdot_real(&inc.u[idx], &m.as_vec3()).norm() == 0.0);
            let x = vec3::cnorm_sq(&inc.u[idx]);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 2.0 * dt).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn streams_are_deterministic_and_independent() {
        let lat = ModeLattice::build(1).unwrap();
        let cfg = ForcingConfig::full_plane(&[WaveVector::new(1, 0, 0), WaveVector::new(0, 1, 0)], 1.0);
        let f = Forcing::new(&cfg, &lat).unwrap();
        let draw = |seed, traj| {
            let mut st = NoiseStreams::new(&f, seed, traj);
            sample_increments(&f, 0.5, &mut st).unwrap()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
        let inc = draw(1, 0);
        let i = lat.index_of(&WaveVector::new(1, 0, 0)).unwrap();
        assert_ne!(inc.u[i], inc.b[i]);
    }

    #[test]
    fn nonpositive_dt_rejected() {
        let lat = ModeLattice::build(1).unwrap();
        let f = Forcing::none(&lat);
        let mut st = NoiseStreams::new(&f, 0, 0);
        assert!(matches!(sample_increments(&f, 0.0, &mut st), Err(Error::Config(_))));
        assert!(matches!(sample_increments(&f, -1.0, &mut st), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip_and_bare_list() {
        let cfg = ForcingConfig::new(vec![ForcingEntry::new(WaveVector::new(1, 0, 0), Channel::B, &[col_01i()])]);
        assert_eq!(ForcingConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let bare = r#"[{"mode":[1,0,0],"channel":"b","columns":[[[0,0],[1,0],[0,1]]]}]"#;
        assert_eq!(ForcingConfig::from_json(bare).unwrap(), cfg);
        assert!(ForcingConfig::from_json("{\"forcing\": 3}").is_err());
    }
}
