//! Drift of the truncated system and its derivatives.
//!
//! For a representative `k` the nonlinear convolution over `h + l = k` in
//! `K_N` splits into three sums over representatives (`h + l = k`,
//! `h - l = k`, `l - h = k`); the fourth piece, both indices negated, is empty
//! because the representative half is closed under addition. The folded lists
//! live in [`ModeLattice::triads`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hormander::ConstantVectorField;
use crate::lattice::{ModeLattice, TriadKind};
use crate::state::{leray_unchecked, validate, Diagnostic, RealState, SpectralState};
use crate::vec3::{self, CVec3, Vec3, CZERO3, ZERO3};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Time derivative of the representative coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftOutput {
    pub du: Vec<CVec3>,
    pub db: Vec<CVec3>,
}

impl DriftOutput {
    pub fn zeros(d: usize) -> Self {
        DriftOutput { du: vec![CZERO3; d], db: vec![CZERO3; d] }
    }

    /// Views the drift as a state-shaped object (same layout).
    pub fn into_state(self, lattice: &ModeLattice) -> SpectralState {
        SpectralState::from_parts(lattice, self.du, self.db).expect("drift has lattice layout")
    }

    pub fn max_abs_diff(&self, other: &DriftOutput) -> f64 {
        let d = |a: &[CVec3], b: &[CVec3]| {
            a.iter().zip(b).flat_map(|(x, y)| (0..3).map(move |i| (x[i] - y[i]).norm())).fold(0.0_f64, f64::max)
        };
        d(&self.du, &other.du).max(d(&self.db, &other.db))
    }
}

/// The four nonlinear terms, each already projected onto the divergence-free
/// plane of its mode.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearBreakdown {
    /// `-P((u.grad)u)`
    pub advection: Vec<CVec3>,
    /// `+P((b.grad)b)`
    pub lorentz: Vec<CVec3>,
    /// `-(u.grad)b`
    pub transport: Vec<CVec3>,
    /// `+(b.grad)u`
    pub stretching: Vec<CVec3>,
}

fn check(state: &SpectralState, lattice: &ModeLattice) -> Result<()> {
    let diags = validate(state, lattice);
    // drift is evaluated on slightly-off states during finite differencing;
    // only structural damage is fatal here.
    if let Some(Diagnostic::Structural { message }) = diags.iter().find(|d| matches!(d, Diagnostic::Structural { .. }))
    {
        return Err(Error::InvalidState(message.clone()));
    }
    if diags.iter().any(|d| matches!(d, Diagnostic::NonFinite { .. })) {
        return Err(Error::InvalidState("non-finite coefficients".into()));
    }
    Ok(())
}

#[inline]
fn read(v: &CVec3, conj: bool) -> CVec3 {
    if conj {
        vec3::cconj(v)
    } else {
        *v
    }
}

/// Raw (unprojected, un-rotated) convolution sums for mode `ki`:
/// `sum (k.u_h) u_l`, `sum (k.b_h) b_l`, `sum (k.u_h) b_l`, `sum (k.b_h) u_l`.
#[inline]
fn convolution_sums(state: &SpectralState, lattice: &ModeLattice, ki: usize, kv: &Vec3) -> [CVec3; 4] {
    let mut acc = [CZERO3; 4];
    for t in lattice.triads(ki) {
        let (ch, cl) = match t.kind {
            TriadKind::Sum => (false, false),
            TriadKind::HMinusL => (false, true),
            TriadKind::LMinusH => (true, false),
        };
        let uh = read(&state.u[t.h], ch);
        let bh = read(&state.b[t.h], ch);
        let ul = read(&state.u[t.l], cl);
        let bl = read(&state.b[t.l], cl);
        let ku = vec3::cdot_real(&uh, kv);
        let kb = vec3::cdot_real(&bh, kv);
        vec3::caxpy(&mut acc[0], ku, &ul);
        vec3::caxpy(&mut acc[1], kb, &bl);
        vec3::caxpy(&mut acc[2], ku, &bl);
        vec3::caxpy(&mut acc[3], kb, &ul);
    }
    acc
}

/// Nonlinear part of the drift only, written into `du`, `db`. Hot path of the
/// integrator; performs no validation.
pub fn nonlinear_into(state: &SpectralState, lattice: &ModeLattice, du: &mut [CVec3], db: &mut [CVec3]) {
    for (ki, k) in lattice.representatives().iter().enumerate() {
        let kv = k.as_vec3();
        let k2 = k.norm_sq();
        let [uu, bb, ub, bu] = convolution_sums(state, lattice, ki, &kv);
        let mut vel = CZERO3;
        let mut mag = CZERO3;
        for i in 0..3 {
            vel[i] = I * (bb[i] - uu[i]);
            mag[i] = I * (bu[i] - ub[i]);
        }
        du[ki] = leray_unchecked(&kv, k2, &vel);
        // the magnetic sums are orthogonal to k in exact arithmetic; projecting
        // keeps rounding off the constraint
        db[ki] = leray_unchecked(&kv, k2, &mag);
    }
}

/// Full drift `-|k|^2 x_k + nonlinear terms`.
pub fn drift(state: &SpectralState, lattice: &ModeLattice) -> Result<DriftOutput> {
    check(state, lattice)?;
    let mut out = DriftOutput::zeros(lattice.dim());
    nonlinear_into(state, lattice, &mut out.du, &mut out.db);
    for (i, k) in lattice.representatives().iter().enumerate() {
        let k2 = Complex64::new(-k.norm_sq(), 0.0);
        vec3::caxpy(&mut out.du[i], k2, &state.u[i]);
        vec3::caxpy(&mut out.db[i], k2, &state.b[i]);
    }
    Ok(out)
}

pub fn nonlinear_breakdown(state: &SpectralState, lattice: &ModeLattice) -> Result<NonlinearBreakdown> {
    check(state, lattice)?;
    let d = lattice.dim();
    let mut out = NonlinearBreakdown {
        advection: vec![CZERO3; d],
        lorentz: vec![CZERO3; d],
        transport: vec![CZERO3; d],
        stretching: vec![CZERO3; d],
    };
    for (ki, k) in lattice.representatives().iter().enumerate() {
        let kv = k.as_vec3();
        let k2 = k.norm_sq();
        let [uu, bb, ub, bu] = convolution_sums(state, lattice, ki, &kv);
        out.advection[ki] = leray_unchecked(&kv, k2, &vec3::cscale(&uu, -I));
        out.lorentz[ki] = leray_unchecked(&kv, k2, &vec3::cscale(&bb, I));
        out.transport[ki] = leray_unchecked(&kv, k2, &vec3::cscale(&ub, -I));
        out.stretching[ki] = leray_unchecked(&kv, k2, &vec3::cscale(&bu, I));
    }
    Ok(out)
}

/// `2 Re sum_k [<N_u(k), u_k> + <N_b(k), b_k>]`: the rate at which the
/// nonlinear terms change the energy. Vanishes up to rounding.
pub fn energy_production(state: &SpectralState, lattice: &ModeLattice) -> Result<f64> {
    check(state, lattice)?;
    let d = lattice.dim();
    let mut du = vec![CZERO3; d];
    let mut db = vec![CZERO3; d];
    nonlinear_into(state, lattice, &mut du, &mut db);
    Ok(2.0 * (0..d).map(|i| (vec3::cinner(&du[i], &state.u[i]) + vec3::cinner(&db[i], &state.b[i])).re).sum::<f64>())
}

/// Contributions of one interaction pair in real coordinates, i.e. the real
/// and imaginary parts of `-i (k.a_h) c_l` with the pair's conjugation rule,
/// given `a_h = ar + i as` and `c_l = cr + i cs`.
#[inline]
fn real_pair(kind: TriadKind, kv: &Vec3, ar: &Vec3, as_: &Vec3, cr: &Vec3, cs: &Vec3) -> (Vec3, Vec3) {
    let kr = vec3::dot(kv, ar);
    let ks = vec3::dot(kv, as_);
    let mut re = ZERO3;
    let mut im = ZERO3;
    for i in 0..3 {
        match kind {
            TriadKind::Sum => {
                re[i] = kr * cs[i] + ks * cr[i];
                im[i] = -(kr * cr[i] - ks * cs[i]);
            }
            TriadKind::HMinusL => {
                re[i] = -(kr * cs[i] - ks * cr[i]);
                im[i] = -(kr * cr[i] + ks * cs[i]);
            }
            TriadKind::LMinusH => {
                re[i] = kr * cs[i] - ks * cr[i];
                im[i] = -(kr * cr[i] + ks * cs[i]);
            }
        }
    }
    (re, im)
}

fn project_vec(kv: &Vec3, k2: f64, v: &Vec3) -> Vec3 {
    let c = vec3::dot(v, kv) / k2;
    [v[0] - c * kv[0], v[1] - c * kv[1], v[2] - c * kv[2]]
}

/// The drift vector field in real coordinates `(r, s, rt, st)`, evaluated term
/// by term from the real-form sums. The magnetic rows carry no projection.
pub fn real_drift_f0(state: &RealState, lattice: &ModeLattice) -> Result<RealState> {
    if state.n() != lattice.n() || state.len() != lattice.dim() {
        return Err(Error::InvalidState("real state does not match lattice".into()));
    }
    let mut out = RealState::zeros(lattice);
    for (ki, k) in lattice.representatives().iter().enumerate() {
        let kv = k.as_vec3();
        let k2 = k.norm_sq();
        let (mut fr, mut fs, mut ftr, mut fts) = (ZERO3, ZERO3, ZERO3, ZERO3);
        for t in lattice.triads(ki) {
            let (h, l) = (t.h, t.l);
            // velocity self-advection, enters with +
            let (re, im) = real_pair(t.kind, &kv, &state.r[h], &state.s[h], &state.r[l], &state.s[l]);
            fr = vec3::add(&fr, &re);
            fs = vec3::add(&fs, &im);
            // Lorentz force, enters with -
            let (re, im) = real_pair(t.kind, &kv, &state.rt[h], &state.st[h], &state.rt[l], &state.st[l]);
            vec3::axpy(&mut fr, -1.0, &re);
            vec3::axpy(&mut fs, -1.0, &im);
            // transport of b by u
            let (re, im) = real_pair(t.kind, &kv, &state.r[h], &state.s[h], &state.rt[l], &state.st[l]);
            ftr = vec3::add(&ftr, &re);
            fts = vec3::add(&fts, &im);
            // stretching of u by b
            let (re, im) = real_pair(t.kind, &kv, &state.rt[h], &state.st[h], &state.r[l], &state.s[l]);
            vec3::axpy(&mut ftr, -1.0, &re);
            vec3::axpy(&mut fts, -1.0, &im);
        }
        let fr = project_vec(&kv, k2, &fr);
        let fs = project_vec(&kv, k2, &fs);
        out.r[ki] = vec3::add(&fr, &vec3::scale(&state.r[ki], -k2));
        out.s[ki] = vec3::add(&fs, &vec3::scale(&state.s[ki], -k2));
        out.rt[ki] = vec3::add(&ftr, &vec3::scale(&state.rt[ki], -k2));
        out.st[ki] = vec3::add(&fts, &vec3::scale(&state.st[ki], -k2));
    }
    Ok(out)
}

/// How [`hessian_bilinear`] evaluates the second derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HessianMethod {
    /// Polarization `F(V+W) - F(V) - F(W)`; exact for a quadratic field.
    #[default]
    Exact,
    /// Mixed central differences at the origin with steps `1e-3` and `5e-4`,
    /// combined by Richardson extrapolation.
    FiniteDifference,
}

pub const FD_STEP: f64 = 1e-3;

fn place(lattice: &ModeLattice, fields: &[(&ConstantVectorField, f64)]) -> Result<RealState> {
    let mut st = RealState::zeros(lattice);
    for (f, c) in fields {
        let i = lattice.index_of(&f.mode).ok_or(Error::OutOfLattice(f.mode, lattice.n()))?;
        vec3::axpy(&mut st.r[i], *c, &f.v_r);
        vec3::axpy(&mut st.s[i], *c, &f.v_s);
        vec3::axpy(&mut st.rt[i], *c, &f.v_tr);
        vec3::axpy(&mut st.st[i], *c, &f.v_ts);
    }
    Ok(st)
}

fn combine(terms: &[(f64, &RealState)], lattice: &ModeLattice) -> RealState {
    let mut out = RealState::zeros(lattice);
    for (c, s) in terms {
        for i in 0..lattice.dim() {
            vec3::axpy(&mut out.r[i], *c, &s.r[i]);
            vec3::axpy(&mut out.s[i], *c, &s.s[i]);
            vec3::axpy(&mut out.rt[i], *c, &s.rt[i]);
            vec3::axpy(&mut out.st[i], *c, &s.st[i]);
        }
    }
    out
}

/// Second directional derivative `D^2 F0 [V, W]` of the real drift. For
/// constant fields this equals the double bracket `[[F0, V], W]`.
pub fn hessian_bilinear(
    v: &ConstantVectorField,
    w: &ConstantVectorField,
    lattice: &ModeLattice,
    method: HessianMethod,
) -> Result<RealState> {
    v.check(lattice)?;
    w.check(lattice)?;
    let f = |fields: &[(&ConstantVectorField, f64)]| real_drift_f0(&place(lattice, fields)?, lattice);
    match method {
        HessianMethod::Exact => {
            let fvw = f(&[(v, 1.0), (w, 1.0)])?;
            let fv = f(&[(v, 1.0)])?;
            let fw = f(&[(w, 1.0)])?;
            Ok(combine(&[(1.0, &fvw), (-1.0, &fv), (-1.0, &fw)], lattice))
        }
        HessianMethod::FiniteDifference => {
            let mixed = |eps: f64| -> Result<RealState> {
                let pp = f(&[(v, eps), (w, eps)])?;
                let pm = f(&[(v, eps), (w, -eps)])?;
                let mp = f(&[(v, -eps), (w, eps)])?;
                let mm = f(&[(v, -eps), (w, -eps)])?;
                let c = 1.0 / (4.0 * eps * eps);
                Ok(combine(&[(c, &pp), (-c, &pm), (-c, &mp), (c, &mm)], lattice))
            };
            let coarse = mixed(FD_STEP)?;
            let fine = mixed(FD_STEP / 2.0)?;
            Ok(combine(&[(4.0 / 3.0, &fine), (-1.0 / 3.0, &coarse)], lattice))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::WaveVector;
    use crate::state::{to_complex, to_real};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force evaluation of the truncated equations: assemble every
    /// coefficient on K_N (negatives via conjugation) and sum all ordered
    /// pairs h + l = k directly.
    fn brute_force_drift(state: &SpectralState, lat: &ModeLattice) -> DriftOutput {
        let full = lat.full_set();
        let mut out = DriftOutput::zeros(lat.dim());
        for (ki, k) in lat.representatives().iter().enumerate() {
            let kv = k.as_vec3();
            let k2 = k.norm_sq();
            let mut du = CZERO3;
            let mut db = CZERO3;
            for h in &full {
                let l = *k - *h;
                if !lat.contains(&l) {
                    continue;
                }
                let uh = state.velocity(lat, h).unwrap();
                let ul = state.velocity(lat, &l).unwrap();
                let bh = state.magnetic(lat, h).unwrap();
                let bl = state.magnetic(lat, &l).unwrap();
                let ku = vec3::cdot_real(&uh, &kv);
                let kb = vec3::cdot_real(&bh, &kv);
                let kul = vec3::cdot_real(&ul, &kv) / k2;
                let kbl = vec3::cdot_real(&bl, &kv) / k2;
                for i in 0..3 {
                    du[i] += -I * ku * (ul[i] - kul * kv[i]) + I * kb * (bl[i] - kbl * kv[i]);
                    db[i] += -I * ku * bl[i] + I * kb * ul[i];
                }
            }
            for i in 0..3 {
                out.du[ki][i] = du[i] - k2 * state.u[ki][i];
                out.db[ki][i] = db[i] - k2 * state.b[ki][i];
            }
        }
        out
    }

    fn random_state(n: u32, seed: u64, energy: f64) -> (ModeLattice, SpectralState) {
        let lat = ModeLattice::build(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = SpectralState::random(&lat, energy, &mut rng);
        (lat, st)
    }

    #[test]
    fn zero_state_zero_drift() {
        let lat = ModeLattice::build(2).unwrap();
        let st = SpectralState::zeros(&lat);
        let d = drift(&st, &lat).unwrap();
        assert_eq!(d, DriftOutput::zeros(lat.dim()));
        let nb = nonlinear_breakdown(&st, &lat).unwrap();
        assert!(nb
            .advection
            .iter()
            .chain(&nb.lorentz)
            .chain(&nb.transport)
            .chain(&nb.stretching)
            .all(|v| *v == CZERO3));
        assert_eq!(energy_production(&st, &lat).unwrap(), 0.0);
    }

    #[test]
    fn single_mode_only_decays() {
        let lat = ModeLattice::build(1).unwrap();
        let m = WaveVector::new(1, 0, 0);
        let mut st = SpectralState::zeros(&lat);
        let u = [Complex64::new(0., 0.), Complex64::new(0.7, -0.2), Complex64::new(0.1, 0.4)];
        st.set_mode(&lat, &m, u, CZERO3).unwrap();
        let d = drift(&st, &lat).unwrap();
        let mi = lat.index_of(&m).unwrap();
        for i in 0..lat.dim() {
            let expect = if i == mi { vec3::cscale(&u, Complex64::new(-1.0, 0.0)) } else { CZERO3 };
            assert_eq!(d.du[i], expect);
            assert_eq!(d.db[i], CZERO3);
        }
    }

    #[test]
    fn drift_matches_brute_force() {
        // two active modes at N = 1
        let lat = ModeLattice::build(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let full = SpectralState::random(&lat, 2.0, &mut rng);
        let mut two = SpectralState::zeros(&lat);
        for k in [WaveVector::new(1, 0, 0), WaveVector::new(0, 1, 1)] {
            let i = lat.index_of(&k).unwrap();
            two.u[i] = full.u[i];
            two.b[i] = full.b[i];
        }
        for st in [&two, &full] {
            let fast = drift(st, &lat).unwrap();
            let slow = brute_force_drift(st, &lat);
            assert!(fast.max_abs_diff(&slow) <= 1e-12, "{}", fast.max_abs_diff(&slow));
        }
        for (n, seed) in [(2, 4), (3, 5)] {
            let (lat, st) = random_state(n, seed, 5.0);
            assert!(drift(&st, &lat).unwrap().max_abs_diff(&brute_force_drift(&st, &lat)) <= 1e-12);
        }
    }

    #[test]
    fn breakdown_reconstructs_drift() {
        let (lat, st) = random_state(2, 8, 3.0);
        let d = drift(&st, &lat).unwrap();
        let nb = nonlinear_breakdown(&st, &lat).unwrap();
        let mut err = 0.0_f64;
        for (i, k) in lat.representatives().iter().enumerate() {
            let k2 = k.norm_sq();
            let kv = k.as_vec3();
            for c in 0..3 {
                let du = -k2 * st.u[i][c] + nb.advection[i][c] + nb.lorentz[i][c];
                let db = -k2 * st.b[i][c] + nb.transport[i][c] + nb.stretching[i][c];
                err = err.max((du - d.du[i][c]).norm()).max((db - d.db[i][c]).norm());
            }
            for part in [&nb.advection, &nb.lorentz, &nb.transport, &nb.stretching] {
                assert!(vec3::cdot_real(&part[i], &kv).norm() < 1e-12);
            }
        }
        assert!(err <= 1e-12);
    }

    #[test]
    fn no_magnetic_field_reduces_to_navier_stokes() {
        let (lat, mut st) = random_state(2, 9, 3.0);
        st.b.iter_mut().for_each(|b| *b = CZERO3);
        let nb = nonlinear_breakdown(&st, &lat).unwrap();
        assert!(nb.lorentz.iter().chain(&nb.transport).chain(&nb.stretching).all(|v| *v == CZERO3));
        let d = drift(&st, &lat).unwrap();
        assert!(d.db.iter().all(|v| *v == CZERO3));
        let rs = real_drift_f0(&to_real(&st), &lat).unwrap();
        assert!(rs.rt.iter().chain(&rs.st).all(|v| *v == ZERO3));
    }

    #[test]
    fn nonlinear_part_is_quadratic() {
        let (lat, st) = random_state(2, 10, 2.0);
        let lam = 1.7;
        let a = nonlinear_breakdown(&st, &lat).unwrap();
        let b = nonlinear_breakdown(&st.scaled(lam), &lat).unwrap();
        for (x, y) in a.advection.iter().zip(&b.advection).chain(a.transport.iter().zip(&b.transport)) {
            for c in 0..3 {
                assert!((x[c] * lam * lam - y[c]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parity_equivariance() {
        // the point reflection u(y) -> -u(-y), b(y) -> -b(-y) maps the
        // coefficients x_k to -conj(x_k) and commutes with the drift
        let (lat, st) = random_state(2, 12, 2.0);
        let flip = |v: &Vec<CVec3>| -> Vec<CVec3> {
            v.iter().map(|x| vec3::cscale(&vec3::cconj(x), Complex64::new(-1.0, 0.0))).collect()
        };
        let reflected = SpectralState::from_parts(&lat, flip(&st.u), flip(&st.b)).unwrap();
        let d = drift(&st, &lat).unwrap();
        let dr = drift(&reflected, &lat).unwrap();
        let expect = DriftOutput { du: flip(&d.du), db: flip(&d.db) };
        assert!(dr.max_abs_diff(&expect) < 1e-12);
        // reading -k returns the conjugate coefficient
        for k in lat.representatives() {
            assert_eq!(st.velocity(&lat, &-*k).unwrap(), vec3::cconj(&st.velocity(&lat, k).unwrap()));
        }
    }

    #[test]
    fn energy_production_vanishes() {
        for n in 1..=2 {
            for seed in 0..20 {
                let (lat, st) = random_state(n, seed, 1.0 + seed as f64);
                let p = energy_production(&st, &lat).unwrap();
                assert!(p.abs() <= 1e-11 * st.energy().powf(1.5), "N={n} seed={seed}: {p}");
            }
        }
    }

    #[test]
    fn real_field_matches_complex_drift() {
        for n in 1..=2 {
            let (lat, st) = random_state(n, 30 + n as u64, 4.0);
            let f = real_drift_f0(&to_real(&st), &lat).unwrap();
            let d = to_complex(&f);
            let reference = drift(&st, &lat).unwrap();
            let got = DriftOutput { du: d.u, db: d.b };
            assert!(got.max_abs_diff(&reference) <= 1e-12);
        }
        let lat = ModeLattice::build(1).unwrap();
        assert_eq!(real_drift_f0(&RealState::zeros(&lat), &lat).unwrap(), RealState::zeros(&lat));
    }

    #[test]
    fn hessian_routes_agree_and_are_symmetric() {
        let lat = ModeLattice::build(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let m = WaveVector::new(1, 0, 0);
        let n = WaveVector::new(0, 1, 1);
        let v = ConstantVectorField::random(m, &mut rng);
        let w = ConstantVectorField::random(n, &mut rng);
        let exact = hessian_bilinear(&v, &w, &lat, HessianMethod::Exact).unwrap();
        let fd = hessian_bilinear(&v, &w, &lat, HessianMethod::FiniteDifference).unwrap();
        let swapped = hessian_bilinear(&w, &v, &lat, HessianMethod::Exact).unwrap();
        let (a, b, c) = (exact.to_flat(), fd.to_flat(), swapped.to_flat());
        for i in 0..a.len() {
            assert!((a[i] - b[i]).abs() < 1e-8, "fd mismatch at {i}: {} vs {}", a[i], b[i]);
            assert!((a[i] - c[i]).abs() < 1e-12);
        }
        let zero = ConstantVectorField::zero(m);
        assert!(hessian_bilinear(&zero, &w, &lat, HessianMethod::Exact)
            .unwrap()
            .to_flat()
            .iter()
            .all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn hessian_rejects_non_orthogonal_fields() {
        let lat = ModeLattice::build(1).unwrap();
        let m = WaveVector::new(1, 0, 0);
        let mut v = ConstantVectorField::zero(m);
        v.v_r = [1.0, 0.0, 0.0];
        let w = ConstantVectorField::zero(WaveVector::new(0, 1, 0));
        assert!(matches!(hessian_bilinear(&v, &w, &lat, HessianMethod::Exact), Err(Error::Constraint { .. })));
    }
}
