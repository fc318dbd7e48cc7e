//! Spectral and real-coordinate states on the representative half of the
//! lattice.
//!
//! Coefficients of the negated half are never stored: mode `-k` reads as the
//! conjugate of mode `k`, so the reality condition cannot be violated.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModeLattice, WaveVector};
use crate::vec3::{self, CVec3, Vec3, CZERO3, ZERO3};

/// Absolute per-mode tolerance on `|k . u_k|`, `|k . b_k|`.
pub const DIVERGENCE_TOL: f64 = 1e-12;

/// Leray projection of a single Fourier coefficient: removes the component of
/// `theta` along `k`.
pub fn leray_project(k: &WaveVector, theta: &CVec3) -> Result<CVec3> {
    if k.is_zero() {
        return Err(Error::ZeroWaveVector);
    }
    Ok(leray_unchecked(&k.as_vec3(), k.norm_sq(), theta))
}

#[inline]
pub(crate) fn leray_unchecked(k: &Vec3, k2: f64, theta: &CVec3) -> CVec3 {
    let c = vec3::cdot_real(theta, k) / k2;
    [theta[0] - c * k[0], theta[1] - c * k[1], theta[2] - c * k[2]]
}

/// Real projection `P_k(v) = v - (v.k / |k|^2) k`.
#[inline]
pub fn project_real(k: &WaveVector, v: &Vec3) -> Vec3 {
    let kv = k.as_vec3();
    let c = vec3::dot(v, &kv) / k.norm_sq();
    [v[0] - c * kv[0], v[1] - c * kv[1], v[2] - c * kv[2]]
}

/// Velocity and magnetic Fourier coefficients on the representatives, in the
/// lattice's lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    n: u32,
    pub u: Vec<CVec3>,
    pub b: Vec<CVec3>,
}

/// Real and imaginary parts `u_k = r_k + i s_k`, `b_k = rt_k + i st_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealState {
    n: u32,
    pub r: Vec<Vec3>,
    pub s: Vec<Vec3>,
    pub rt: Vec<Vec3>,
    pub st: Vec<Vec3>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    U,
    B,
}

/// One invariant violation found by [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Diagnostic {
    Divergence { mode: WaveVector, field: Field, magnitude: f64 },
    NonFinite { mode: WaveVector, field: Field },
    Structural { message: String },
}

impl SpectralState {
    pub fn zeros(lattice: &ModeLattice) -> Self {
        SpectralState { n: lattice.n(), u: vec![CZERO3; lattice.dim()], b: vec![CZERO3; lattice.dim()] }
    }

    /// Builds a state from explicit vectors; does not project.
    pub fn from_parts(lattice: &ModeLattice, u: Vec<CVec3>, b: Vec<CVec3>) -> Result<Self> {
        if u.len() != lattice.dim() || b.len() != lattice.dim() {
            return Err(Error::InvalidState(format!(
                "expected {} modes, got u: {}, b: {}",
                lattice.dim(),
                u.len(),
                b.len()
            )));
        }
        Ok(SpectralState { n: lattice.n(), u, b })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Velocity coefficient at any `k` in `K_N`; negated representatives are
    /// read through conjugation.
    pub fn velocity(&self, lattice: &ModeLattice, k: &WaveVector) -> Result<CVec3> {
        let (i, conj) = lattice.locate(k).ok_or(Error::OutOfLattice(*k, lattice.n()))?;
        Ok(if conj { vec3::cconj(&self.u[i]) } else { self.u[i] })
    }

    pub fn magnetic(&self, lattice: &ModeLattice, k: &WaveVector) -> Result<CVec3> {
        let (i, conj) = lattice.locate(k).ok_or(Error::OutOfLattice(*k, lattice.n()))?;
        Ok(if conj { vec3::cconj(&self.b[i]) } else { self.b[i] })
    }

    pub fn set_mode(&mut self, lattice: &ModeLattice, k: &WaveVector, u: CVec3, b: CVec3) -> Result<()> {
        let (i, conj) = lattice.locate(k).ok_or(Error::OutOfLattice(*k, lattice.n()))?;
        if conj {
            self.u[i] = vec3::cconj(&u);
            self.b[i] = vec3::cconj(&b);
        } else {
            self.u[i] = u;
            self.b[i] = b;
        }
        Ok(())
    }

    /// `sum_k |u_k|^2` over representatives.
    pub fn energy_u(&self) -> f64 {
        self.u.iter().map(vec3::cnorm_sq).sum()
    }

    pub fn energy_b(&self) -> f64 {
        self.b.iter().map(vec3::cnorm_sq).sum()
    }

    /// Total energy `sum_k |u_k|^2 + |b_k|^2` over representatives. This is the
    /// squared quantity that appears in the energy balance; no square root is
    /// taken anywhere.
    pub fn energy(&self) -> f64 {
        self.energy_u() + self.energy_b()
    }

    /// `sum_k 2 |k|^2 (|u_k|^2 + |b_k|^2)`.
    pub fn dissipation_rate(&self, lattice: &ModeLattice) -> f64 {
        lattice
            .representatives()
            .iter()
            .zip(self.u.iter().zip(&self.b))
            .map(|(k, (u, b))| 2.0 * k.norm_sq() * (vec3::cnorm_sq(u) + vec3::cnorm_sq(b)))
            .sum()
    }

    /// Projects every coefficient onto the plane orthogonal to its mode.
    pub fn project(&mut self, lattice: &ModeLattice) {
        for (i, k) in lattice.representatives().iter().enumerate() {
            let kv = k.as_vec3();
            let k2 = k.norm_sq();
            self.u[i] = leray_unchecked(&kv, k2, &self.u[i]);
            self.b[i] = leray_unchecked(&kv, k2, &self.b[i]);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = Complex64::new(s, 0.0);
        SpectralState {
            n: self.n,
            u: self.u.iter().map(|x| vec3::cscale(x, f)).collect(),
            b: self.b.iter().map(|x| vec3::cscale(x, f)).collect(),
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &SpectralState) {
        let f = Complex64::new(s, 0.0);
        for (a, o) in self.u.iter_mut().zip(&other.u) {
            vec3::caxpy(a, f, o);
        }
        for (a, o) in self.b.iter_mut().zip(&other.b) {
            vec3::caxpy(a, f, o);
        }
    }

    /// Largest coefficient-wise distance to another state.
    pub fn max_abs_diff(&self, other: &SpectralState) -> f64 {
        let diff = |a: &Vec<CVec3>, b: &Vec<CVec3>| {
            a.iter().zip(b).flat_map(|(x, y)| (0..3).map(move |i| (x[i] - y[i]).norm())).fold(0.0_f64, f64::max)
        };
        diff(&self.u, &other.u).max(diff(&self.b, &other.b))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.b).all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    /// Divergence-free state with i.i.d. complex Gaussian coefficients,
    /// rescaled to the requested total energy.
    pub fn random<R: Rng + ?Sized>(lattice: &ModeLattice, energy: f64, rng: &mut R) -> Self {
        let mut st = SpectralState::zeros(lattice);
        let mut gauss = || -> Complex64 { Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) };
        for i in 0..lattice.dim() {
            st.u[i] = [gauss(), gauss(), gauss()];
            st.b[i] = [gauss(), gauss(), gauss()];
        }
        st.project(lattice);
        let e = st.energy();
        if e > 0.0 {
            st = st.scaled((energy / e).sqrt());
        }
        st
    }

    /// Sparse keyed view used for JSON snapshots.
    pub fn snapshot(&self, lattice: &ModeLattice) -> StateSnapshot {
        StateSnapshot {
            n: self.n,
            modes: lattice
                .representatives()
                .iter()
                .enumerate()
                .map(|(i, k)| ModeEntry {
                    k: *k,
                    u: self.u[i].map(|c| [c.re, c.im]),
                    b: self.b[i].map(|c| [c.re, c.im]),
                })
                .collect(),
        }
    }
}

impl RealState {
    pub fn zeros(lattice: &ModeLattice) -> Self {
        let d = lattice.dim();
        RealState { n: lattice.n(), r: vec![ZERO3; d], s: vec![ZERO3; d], rt: vec![ZERO3; d], st: vec![ZERO3; d] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Flattened coordinates `(r, s, rt, st)` per mode, 12 numbers per mode.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(12 * self.len());
        for i in 0..self.len() {
            for block in [&self.r[i], &self.s[i], &self.rt[i], &self.st[i]] {
                out.extend_from_slice(block);
            }
        }
        out
    }

    pub fn from_flat(lattice: &ModeLattice, flat: &[f64]) -> Result<Self> {
        if flat.len() != 12 * lattice.dim() {
            return Err(Error::InvalidState(format!(
                "expected {} real coordinates, got {}",
                12 * lattice.dim(),
                flat.len()
            )));
        }
        let mut st = RealState::zeros(lattice);
        for (i, chunk) in flat.chunks_exact(12).enumerate() {
            st.r[i].copy_from_slice(&chunk[0..3]);
            st.s[i].copy_from_slice(&chunk[3..6]);
            st.rt[i].copy_from_slice(&chunk[6..9]);
            st.st[i].copy_from_slice(&chunk[9..12]);
        }
        Ok(st)
    }
}

/// Splits complex coefficients into real coordinates.
pub fn to_real(state: &SpectralState) -> RealState {
    RealState {
        n: state.n,
        r: state.u.iter().map(vec3::re).collect(),
        s: state.u.iter().map(vec3::im).collect(),
        rt: state.b.iter().map(vec3::re).collect(),
        st: state.b.iter().map(vec3::im).collect(),
    }
}

/// Inverse of [`to_real`].
pub fn to_complex(state: &RealState) -> SpectralState {
    SpectralState {
        n: state.n,
        u: state.r.iter().zip(&state.s).map(|(r, s)| vec3::from_parts(r, s)).collect(),
        b: state.rt.iter().zip(&state.st).map(|(r, s)| vec3::from_parts(r, s)).collect(),
    }
}

/// Lists every violated invariant of `state` on `lattice`.
pub fn validate(state: &SpectralState, lattice: &ModeLattice) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if state.n != lattice.n() {
        out.push(Diagnostic::Structural {
            message: format!("state built for N = {}, lattice has N = {}", state.n, lattice.n()),
        });
    }
    if state.u.len() != lattice.dim() || state.b.len() != lattice.dim() {
        out.push(Diagnostic::Structural {
            message: format!("state has {}/{} modes, lattice has {}", state.u.len(), state.b.len(), lattice.dim()),
        });
        return out;
    }
    for (i, k) in lattice.representatives().iter().enumerate() {
        let kv = k.as_vec3();
        for (field, v) in [(Field::U, &state.u[i]), (Field::B, &state.b[i])] {
            if !v.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                out.push(Diagnostic::NonFinite { mode: *k, field });
                continue;
            }
            let div = vec3::cdot_real(v, &kv).norm();
            if div > DIVERGENCE_TOL {
                out.push(Diagnostic::Divergence { mode: *k, field, magnitude: div });
            }
        }
    }
    out
}

/// Per-mode JSON record: coefficients as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub k: WaveVector,
    pub u: [[f64; 2]; 3],
    pub b: [[f64; 2]; 3],
}

/// Keyed, human-editable state snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    #[serde(rename = "N")]
    pub n: u32,
    pub modes: Vec<ModeEntry>,
}

fn pairs_to_c(p: &[[f64; 2]; 3]) -> CVec3 {
    p.map(|[re, im]| Complex64::new(re, im))
}

impl StateSnapshot {
    /// Structural and divergence diagnostics for a keyed snapshot.
    pub fn validate(&self, lattice: &ModeLattice) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut seen = vec![false; lattice.dim()];
        for entry in &self.modes {
            match lattice.locate(&entry.k) {
                None => out
                    .push(Diagnostic::Structural { message: format!("mode {} is outside K_{}", entry.k, lattice.n()) }),
                Some((i, _)) => {
                    if seen[i] {
                        out.push(Diagnostic::Structural {
                            message: format!("mode {} given more than once (up to sign)", entry.k),
                        });
                    }
                    seen[i] = true;
                    let kv = entry.k.as_vec3();
                    for (field, v) in [(Field::U, pairs_to_c(&entry.u)), (Field::B, pairs_to_c(&entry.b))] {
                        let div = vec3::cdot_real(&v, &kv).norm();
                        if !div.is_finite() {
                            out.push(Diagnostic::NonFinite { mode: entry.k, field });
                        } else if div > DIVERGENCE_TOL {
                            out.push(Diagnostic::Divergence { mode: entry.k, field, magnitude: div });
                        }
                    }
                }
            }
        }
        out
    }

    /// Converts to a dense state; omitted modes are zero and negated keys are
    /// conjugated onto their representative.
    pub fn to_state(&self, lattice: &ModeLattice) -> Result<SpectralState> {
        if self.n != lattice.n() {
            return Err(Error::InvalidState(format!(
                "snapshot built for N = {}, lattice has N = {}",
                self.n,
                lattice.n()
            )));
        }
        if let Some(d) = self.validate(lattice).into_iter().next() {
            return Err(Error::InvalidState(format!("{d:?}")));
        }
        let mut st = SpectralState::zeros(lattice);
        for e in &self.modes {
            st.set_mode(lattice, &e.k, pairs_to_c(&e.u), pairs_to_c(&e.b))?;
        }
        Ok(st)
    }
}
