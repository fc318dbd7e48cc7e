//! Constant-field Lie brackets of the drift and the closure deciding which
//! modes are reachable from the forced ones.
//!
//! For constant fields `V` at `m` and `W` at `n` the double bracket
//! `[[F0, V], W]` is the second derivative of the drift and lives on the
//! modes `m + n` and `+-(n - m)`. [`double_bracket`] evaluates the closed form
//! term by term; [`crate::dynamics::hessian_bilinear`] is the independent
//! check.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModeLattice, WaveVector};
use crate::noise::orthonormal_pair;
use crate::state::RealState;
use crate::vec3::{self, Vec3, ZERO3};

/// Real 12-vector `(r, s, rt, st)` of one mode.
pub type Vec12 = [f64; 12];

/// Rank threshold relative to the largest vector in play.
pub const RANK_TOL: f64 = 1e-10;

/// Constant field `v_r d/dr_m + v_s d/ds_m + v_tr d/drt_m + v_ts d/dst_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantVectorField {
    pub mode: WaveVector,
    pub v_r: Vec3,
    pub v_s: Vec3,
    pub v_tr: Vec3,
    pub v_ts: Vec3,
}

impl ConstantVectorField {
    pub fn zero(mode: WaveVector) -> Self {
        ConstantVectorField { mode, v_r: ZERO3, v_s: ZERO3, v_tr: ZERO3, v_ts: ZERO3 }
    }

    /// Gaussian coefficients projected orthogonal to the mode.
    pub fn random<R: Rng + ?Sized>(mode: WaveVector, rng: &mut R) -> Self {
        let mut g = || -> Vec3 {
            let v = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            crate::state::project_real(&mode, &v)
        };
        ConstantVectorField { mode, v_r: g(), v_s: g(), v_tr: g(), v_ts: g() }
    }

    pub fn from_flat(mode: WaveVector, x: &Vec12) -> Self {
        let b = |i: usize| [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
        ConstantVectorField { mode, v_r: b(0), v_s: b(1), v_tr: b(2), v_ts: b(3) }
    }

    pub fn to_flat(&self) -> Vec12 {
        let mut x = [0.0; 12];
        for (i, v) in [self.v_r, self.v_s, self.v_tr, self.v_ts].iter().enumerate() {
            x[3 * i..3 * i + 3].copy_from_slice(v);
        }
        x
    }

    /// Mode must be a representative of the lattice and all four vectors
    /// orthogonal to it.
    pub fn check(&self, lattice: &ModeLattice) -> Result<()> {
        match lattice.locate(&self.mode) {
            None => return Err(Error::OutOfLattice(self.mode, lattice.n())),
            Some((_, true)) => {
                return Err(Error::Config(format!("constant field mode {} is not a representative", self.mode)))
            }
            Some(_) => {}
        }
        let k = self.mode.as_vec3();
        let kn = k.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (name, v) in [("v_r", self.v_r), ("v_s", self.v_s), ("v_tr", self.v_tr), ("v_ts", self.v_ts)] {
            let mag = vec3::dot(&k, &v).abs();
            if mag > 1e-12 * (kn * vec3::norm_sq(&v).sqrt()).max(1.0) {
                return Err(Error::Constraint {
                    mode: self.mode,
                    what: format!("{name} not orthogonal to the mode"),
                    magnitude: mag,
                });
            }
        }
        Ok(())
    }
}

/// Sparse constant field: per representative the coefficients on
/// `d/dr, d/ds, d/drt, d/dst`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BracketResult {
    pub terms: BTreeMap<WaveVector, [Vec3; 4]>,
}

impl BracketResult {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, k: &WaveVector) -> [Vec3; 4] {
        self.terms.get(k).copied().unwrap_or([ZERO3; 4])
    }

    pub fn get_flat(&self, k: &WaveVector) -> Vec12 {
        let b = self.get(k);
        let mut x = [0.0; 12];
        for i in 0..4 {
            x[3 * i..3 * i + 3].copy_from_slice(&b[i]);
        }
        x
    }

    pub fn add_scaled(&mut self, s: f64, other: &BracketResult) {
        for (k, b) in &other.terms {
            let e = self.terms.entry(*k).or_insert([ZERO3; 4]);
            for i in 0..4 {
                vec3::axpy(&mut e[i], s, &b[i]);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().flat_map(|b| b.iter().map(vec3::max_abs)).fold(0.0, f64::max)
    }

    /// Dense layout matching [`RealState`].
    pub fn to_real_state(&self, lattice: &ModeLattice) -> RealState {
        let mut st = RealState::zeros(lattice);
        for (k, b) in &self.terms {
            if let Some(i) = lattice.index_of(k) {
                st.r[i] = b[0];
                st.s[i] = b[1];
                st.rt[i] = b[2];
                st.st[i] = b[3];
            }
        }
        st
    }
}

struct Parts<'a> {
    vr: &'a Vec3,
    vs: &'a Vec3,
    tvr: &'a Vec3,
    tvs: &'a Vec3,
    wr: &'a Vec3,
    ws: &'a Vec3,
    twr: &'a Vec3,
    tws: &'a Vec3,
}

/// `sum c_i (a_i . t) b_i` over signed pairs.
fn lin(t: &Vec3, terms: &[(f64, &Vec3, &Vec3)]) -> Vec3 {
    let mut out = ZERO3;
    for (c, a, b) in terms {
        vec3::axpy(&mut out, c * vec3::dot(a, t), b);
    }
    out
}

fn project(t: &Vec3, v: Vec3) -> Vec3 {
    let c = vec3::dot(&v, t) / vec3::norm_sq(t);
    [v[0] - c * t[0], v[1] - c * t[1], v[2] - c * t[2]]
}

/// Coefficients at the sum mode `k = m + n`.
fn sum_block(k: &Vec3, p: &Parts) -> [Vec3; 4] {
    let Parts { vr, vs, tvr, tvs, wr, ws, twr, tws } = *p;
    let r = lin(
        k,
        &[
            (1., vs, wr),
            (1., wr, vs),
            (1., vr, ws),
            (1., ws, vr),
            (-1., tvs, twr),
            (-1., twr, tvs),
            (-1., tvr, tws),
            (-1., tws, tvr),
        ],
    );
    let s = lin(
        k,
        &[
            (-1., vr, wr),
            (-1., wr, vr),
            (1., vs, ws),
            (1., ws, vs),
            (1., tvr, twr),
            (1., twr, tvr),
            (-1., tvs, tws),
            (-1., tws, tvs),
        ],
    );
    let tr = lin(
        k,
        &[
            (-1., tvs, wr),
            (1., wr, tvs),
            (-1., tvr, ws),
            (1., ws, tvr),
            (1., vs, twr),
            (-1., twr, vs),
            (1., vr, tws),
            (-1., tws, vr),
        ],
    );
    let ts = lin(
        k,
        &[
            (1., tvr, wr),
            (-1., wr, tvr),
            (-1., tvs, ws),
            (1., ws, tvs),
            (-1., vr, twr),
            (1., twr, vr),
            (1., vs, tws),
            (-1., tws, vs),
        ],
    );
    [project(k, r), project(k, s), tr, ts]
}

/// Coefficients at `h = n - m`.
fn diff_block_nm(h: &Vec3, p: &Parts) -> [Vec3; 4] {
    let Parts { vr, vs, tvr, tvs, wr, ws, twr, tws } = *p;
    let r = lin(
        h,
        &[
            (-1., vs, wr),
            (-1., wr, vs),
            (1., vr, ws),
            (1., ws, vr),
            (1., tvs, twr),
            (1., twr, tvs),
            (-1., tvr, tws),
            (-1., tws, tvr),
        ],
    );
    let s = lin(
        h,
        &[
            (-1., vr, wr),
            (-1., wr, vr),
            (-1., vs, ws),
            (-1., ws, vs),
            (1., tvr, twr),
            (1., twr, tvr),
            (1., tvs, tws),
            (1., tws, tvs),
        ],
    );
    let tr = lin(
        h,
        &[
            (1., tvs, wr),
            (-1., wr, tvs),
            (-1., tvr, ws),
            (1., ws, tvr),
            (-1., vs, twr),
            (1., twr, vs),
            (1., vr, tws),
            (-1., tws, vr),
        ],
    );
    let ts = lin(
        h,
        &[
            (1., tvr, wr),
            (-1., wr, tvr),
            (1., tvs, ws),
            (-1., ws, tvs),
            (-1., vr, twr),
            (1., twr, vr),
            (-1., vs, tws),
            (1., tws, vs),
        ],
    );
    [project(h, r), project(h, s), tr, ts]
}

/// Coefficients at `g = m - n`.
fn diff_block_mn(g: &Vec3, p: &Parts) -> [Vec3; 4] {
    let Parts { vr, vs, tvr, tvs, wr, ws, twr, tws } = *p;
    let r = lin(
        g,
        &[
            (1., vs, wr),
            (1., wr, vs),
            (-1., vr, ws),
            (-1., ws, vr),
            (-1., tvs, twr),
            (-1., twr, tvs),
            (1., tvr, tws),
            (1., tws, tvr),
        ],
    );
    let s = lin(
        g,
        &[
            (-1., vr, wr),
            (-1., wr, vr),
            (-1., vs, ws),
            (-1., ws, vs),
            (1., tvr, twr),
            (1., twr, tvr),
            (1., tvs, tws),
            (1., tws, tvs),
        ],
    );
    let tr = lin(
        g,
        &[
            (-1., tvs, wr),
            (1., wr, tvs),
            (1., tvr, ws),
            (-1., ws, tvr),
            (1., vs, twr),
            (-1., twr, vs),
            (-1., vr, tws),
            (1., tws, vr),
        ],
    );
    let ts = lin(
        g,
        &[
            (1., tvr, wr),
            (-1., wr, tvr),
            (1., tvs, ws),
            (-1., ws, tvs),
            (-1., vr, twr),
            (1., twr, vr),
            (-1., vs, tws),
            (1., tws, vs),
        ],
    );
    [project(g, r), project(g, s), tr, ts]
}

/// `[[F0, V], W]` from the closed-form table. Targets outside the
/// representative half (or zero) are dropped; the two difference targets
/// are negatives of each other, so exactly one of them survives when it
/// lies in the lattice.
pub fn double_bracket(
    v: &ConstantVectorField,
    w: &ConstantVectorField,
    lattice: &ModeLattice,
) -> Result<BracketResult> {
    v.check(lattice)?;
    w.check(lattice)?;
    Ok(double_bracket_unchecked(v, w, lattice))
}

fn double_bracket_unchecked(v: &ConstantVectorField, w: &ConstantVectorField, lattice: &ModeLattice) -> BracketResult {
    let p = Parts {
        vr: &v.v_r,
        vs: &v.v_s,
        tvr: &v.v_tr,
        tvs: &v.v_ts,
        wr: &w.v_r,
        ws: &w.v_s,
        twr: &w.v_tr,
        tws: &w.v_ts,
    };
    let (m, n) = (v.mode, w.mode);
    let mut out = BracketResult::default();
    let k = m + n;
    if lattice.index_of(&k).is_some() {
        out.terms.insert(k, sum_block(&k.as_vec3(), &p));
    }
    let h = n - m;
    if lattice.index_of(&h).is_some() {
        out.terms.insert(h, diff_block_nm(&h.as_vec3(), &p));
    }
    let g = m - n;
    if lattice.index_of(&g).is_some() {
        out.terms.insert(g, diff_block_mn(&g.as_vec3(), &p));
    }
    out
}

/// The two combinations
/// `[[F0, V^r], W^s] + [[F0, V^s], W^r]` and `[[F0, V^r], W^r] - [[F0, V^s], W^s]`
/// where `V^r = v d/dr_m + vt d/drt_m`, `V^s = v d/ds_m + vt d/dst_m` and
/// likewise for `W` at `n`.
pub fn mixed_brackets(
    m: WaveVector,
    v: Vec3,
    vt: Vec3,
    n: WaveVector,
    w: Vec3,
    wt: Vec3,
    lattice: &ModeLattice,
) -> Result<(BracketResult, BracketResult)> {
    let r_field = |k, a, at| ConstantVectorField { v_r: a, v_tr: at, ..ConstantVectorField::zero(k) };
    let s_field = |k, a, at| ConstantVectorField { v_s: a, v_ts: at, ..ConstantVectorField::zero(k) };
    let (vr, vs) = (r_field(m, v, vt), s_field(m, v, vt));
    let (wr, ws) = (r_field(n, w, wt), s_field(n, w, wt));
    let mut first = double_bracket(&vr, &ws, lattice)?;
    first.add_scaled(1.0, &double_bracket(&vs, &wr, lattice)?);
    let mut second = double_bracket(&vr, &wr, lattice)?;
    second.add_scaled(-1.0, &double_bracket(&vs, &ws, lattice)?);
    Ok((first, second))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureMethod {
    /// Fixed point of the three sufficient fusion rules.
    Rules,
    /// Explicit per-mode bases of the bracket-generated subspaces.
    #[default]
    Span,
}

impl std::str::FromStr for ClosureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rules" => Ok(ClosureMethod::Rules),
            "span" => Ok(ClosureMethod::Span),
            _ => Err(Error::Config(format!("unknown closure method {s:?}"))),
        }
    }
}

/// Outcome of a closure run. Modes are listed by representative; each one
/// stands for itself and its negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub forced: Vec<WaveVector>,
    #[serde(rename = "N")]
    pub n: u32,
    pub method: ClosureMethod,
    /// Attained dimension (0..=8) of the constant fields at each mode, keyed
    /// by the mode in `(k1,k2,k3)` form.
    pub per_mode_dim: BTreeMap<String, usize>,
    #[serde(rename = "A")]
    pub attained: Vec<WaveVector>,
    pub hypoelliptic: bool,
    pub iterations: usize,
    /// Rules method only: modes reached through an equal-norm fusion (or
    /// from such a mode), which the rules alone cannot certify.
    pub provisional: Vec<WaveVector>,
}

impl ClosureReport {
    pub fn dim(&self, k: &WaveVector) -> usize {
        self.per_mode_dim.get(&k.to_string()).copied().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn canonical_forced(forced: &[WaveVector], lattice: &ModeLattice) -> Result<Vec<usize>> {
    let mut idx = BTreeSet::new();
    for k in forced {
        match lattice.locate(k) {
            Some((i, _)) => {
                idx.insert(i);
            }
            None => {
                return Err(Error::Config(format!("forced mode {k} is not in the lattice K_{}", lattice.n())));
            }
        }
    }
    Ok(idx.into_iter().collect())
}

pub fn closure(forced: &[WaveVector], lattice: &ModeLattice, method: ClosureMethod) -> Result<ClosureReport> {
    let f = canonical_forced(forced, lattice)?;
    match method {
        ClosureMethod::Span => Ok(span_closure(&f, lattice)),
        ClosureMethod::Rules => Ok(rules_closure(&f, lattice)),
    }
}

/// Span closure; hypoelliptic iff every mode attains dimension 8.
pub fn verdict(forced: &[WaveVector], lattice: &ModeLattice) -> Result<(bool, ClosureReport)> {
    let r = closure(forced, lattice, ClosureMethod::Span)?;
    Ok((r.hypoelliptic, r))
}

fn norm12(x: &Vec12) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot12(a: &Vec12, b: &Vec12) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy12(y: &mut Vec12, s: f64, x: &Vec12) {
    for i in 0..12 {
        y[i] += s * x[i];
    }
}

/// Removes the components of `x` along an orthonormal basis (two passes).
fn reduce(x: &mut Vec12, basis: &[Vec12]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot12(x, b);
            axpy12(x, -c, b);
        }
    }
}

fn project_mode12(k: &WaveVector, x: &mut Vec12) {
    let kv = k.as_vec3();
    let k2 = k.norm_sq();
    for blk in 0..4 {
        let v = [x[3 * blk], x[3 * blk + 1], x[3 * blk + 2]];
        let c = vec3::dot(&v, &kv) / k2;
        for i in 0..3 {
            x[3 * blk + i] -= c * kv[i];
        }
    }
}

/// Orthonormal basis of the 8-dimensional space of constant fields at `k`.
pub fn full_mode_basis(k: &WaveVector) -> Vec<Vec12> {
    let pair = orthonormal_pair(k);
    let mut out = Vec::with_capacity(8);
    for blk in 0..4 {
        for e in &pair {
            let mut x = [0.0; 12];
            x[3 * blk..3 * blk + 3].copy_from_slice(e);
            out.push(x);
        }
    }
    out
}

struct SpanState {
    basis: Vec<Vec<Vec12>>,
    version: Vec<u64>,
}

impl SpanState {
    /// Adds `x` to the basis at mode `i` if it is independent at tolerance
    /// `RANK_TOL * scale`.
    fn insert(&mut self, lattice: &ModeLattice, i: usize, mut x: Vec12, scale: f64) -> bool {
        if self.basis[i].len() >= 8 {
            return false;
        }
        project_mode12(&lattice.rep(i), &mut x);
        reduce(&mut x, &self.basis[i]);
        let nx = norm12(&x);
        if nx <= RANK_TOL * scale {
            return false;
        }
        x.iter_mut().for_each(|a| *a /= nx);
        self.basis[i].push(x);
        self.version[i] += 1;
        true
    }
}

/// Given bracket outputs `(x_j, y_j)` on a target and its partner mode,
/// returns the `x`-parts of the combinations whose `y`-part vanishes, by
/// Gram-Schmidt elimination on `y` with column pivoting.
fn eliminate(mut cols: Vec<(Vec12, Vec12)>, scale: f64) -> Vec<Vec12> {
    let tol = RANK_TOL * scale;
    let mut done = vec![false; cols.len()];
    loop {
        let pivot =
            (0..cols.len()).filter(|&j| !done[j]).map(|j| (j, norm12(&cols[j].1))).max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, ny)) = pivot else { break };
        if ny <= tol {
            break;
        }
        done[p] = true;
        let (px, py) = {
            let (x, y) = &cols[p];
            let mut x = *x;
            let mut y = *y;
            x.iter_mut().for_each(|a| *a /= ny);
            y.iter_mut().for_each(|a| *a /= ny);
            (x, y)
        };
        for (j, col) in cols.iter_mut().enumerate() {
            if done[j] {
                continue;
            }
            let c = dot12(&col.1, &py);
            axpy12(&mut col.1, -c, &py);
            axpy12(&mut col.0, -c, &px);
        }
    }
    cols.into_iter().zip(done).filter(|(_, d)| !d).map(|((x, _), _)| x).collect()
}

fn span_closure(forced: &[usize], lattice: &ModeLattice) -> ClosureReport {
    let d = lattice.dim();
    let mut st = SpanState { basis: vec![Vec::new(); d], version: vec![0; d] };
    for &i in forced {
        st.basis[i] = full_mode_basis(&lattice.rep(i));
        st.version[i] = 1;
    }
    let mut seen: BTreeMap<(usize, usize), [u64; 4]> = BTreeMap::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for i in 0..d {
            for j in i..d {
                if st.basis[i].is_empty() || st.basis[j].is_empty() {
                    continue;
                }
                let (m, n) = (lattice.rep(i), lattice.rep(j));
                let p = lattice.index_of(&(m + n));
                let q = lattice.locate(&(n - m)).map(|(x, _)| x);
                if p.is_none() && q.is_none() {
                    continue;
                }
                let ver = |x: Option<usize>| x.map_or(0, |x| st.version[x]);
                let key = [st.version[i], st.version[j], ver(p), ver(q)];
                if seen.get(&(i, j)) == Some(&key) {
                    continue;
                }
                seen.insert((i, j), key);
                if p.is_some_and(|p| st.basis[p].len() == 8) && q.is_none_or(|q| st.basis[q].len() == 8) {
                    continue;
                }
                changed |= process_pair(&mut st, lattice, i, j, p, q);
            }
        }
        if !changed {
            break;
        }
        iterations += 1;
    }
    let dims: Vec<usize> = st.basis.iter().map(|b| b.len()).collect();
    report(forced, lattice, ClosureMethod::Span, &dims, iterations, Vec::new())
}

fn process_pair(
    st: &mut SpanState,
    lattice: &ModeLattice,
    i: usize,
    j: usize,
    p: Option<usize>,
    q: Option<usize>,
) -> bool {
    let (m, n) = (lattice.rep(i), lattice.rep(j));
    let pk = p.map(|p| lattice.rep(p));
    let qk = q.map(|q| lattice.rep(q));
    let mut cols: Vec<(Vec12, Vec12)> = Vec::new();
    for (a, va) in st.basis[i].iter().enumerate() {
        let vf = ConstantVectorField::from_flat(m, va);
        let start = if i == j { a } else { 0 };
        for wb in &st.basis[j][start..] {
            let wf = ConstantVectorField::from_flat(n, wb);
            let br = double_bracket_unchecked(&vf, &wf, lattice);
            let x = pk.map_or([0.0; 12], |k| br.get_flat(&k));
            let y = qk.map_or([0.0; 12], |k| br.get_flat(&k));
            cols.push((x, y));
        }
    }
    let scale = cols.iter().map(|(x, y)| norm12(x).max(norm12(y))).fold(0.0, f64::max);
    if scale == 0.0 {
        return false;
    }
    let mut changed = false;
    // for each target, keep combinations whose partner part is already
    // attained and can be subtracted off
    for (target, other, swap) in [(p, q, false), (q, p, true)] {
        let Some(t) = target else { continue };
        if st.basis[t].len() == 8 {
            continue;
        }
        let candidates: Vec<Vec12> = match other {
            None => cols.iter().map(|(x, y)| if swap { *y } else { *x }).collect(),
            Some(o) => {
                let reduced = cols
                    .iter()
                    .map(|(x, y)| {
                        let (mut a, mut b) = if swap { (*y, *x) } else { (*x, *y) };
                        reduce(&mut b, &st.basis[o]);
                        project_mode12(&lattice.rep(t), &mut a);
                        (a, b)
                    })
                    .collect();
                eliminate(reduced, scale)
            }
        };
        for c in candidates {
            changed |= st.insert(lattice, t, c, scale);
        }
    }
    changed
}

fn report(
    forced: &[usize],
    lattice: &ModeLattice,
    method: ClosureMethod,
    dims: &[usize],
    iterations: usize,
    provisional: Vec<WaveVector>,
) -> ClosureReport {
    let reps = lattice.representatives();
    ClosureReport {
        forced: forced.iter().map(|&i| reps[i]).collect(),
        n: lattice.n(),
        method,
        per_mode_dim: reps.iter().zip(dims).map(|(k, d)| (k.to_string(), *d)).collect(),
        attained: reps.iter().zip(dims).filter(|(_, d)| **d == 8).map(|(k, _)| *k).collect(),
        hypoelliptic: !dims.is_empty() && dims.iter().all(|d| *d == 8),
        iterations,
        provisional,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum RuleStatus {
    Absent,
    Provisional,
    Confirmed,
}

/// Fixed point of: closure under negation; fusion `m + n` for linearly
/// independent `m`, `n` of different length (confirmed when both inputs
/// are); and fusion for independent `m`, `n` of equal length, which only
/// yields part of the target space and is therefore provisional.
fn rules_closure(forced: &[usize], lattice: &ModeLattice) -> ClosureReport {
    let d = lattice.dim();
    let mut status = vec![RuleStatus::Absent; d];
    for &i in forced {
        status[i] = RuleStatus::Confirmed;
    }
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let active: Vec<usize> = (0..d).filter(|&i| status[i] != RuleStatus::Absent).collect();
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a..] {
                let (m, n) = (lattice.rep(i), lattice.rep(j));
                if !m.independent_of(&n) {
                    continue;
                }
                let equal_norm = m.norm_sq_int() == n.norm_sq_int();
                let both = status[i].min(status[j]);
                let granted = if equal_norm { RuleStatus::Provisional } else { both };
                // -n is attained whenever n is
                for t in [m + n, m - n] {
                    if let Some((ti, _)) = lattice.locate(&t) {
                        if granted > status[ti] {
                            status[ti] = granted;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
        iterations += 1;
    }
    let dims: Vec<usize> = status.iter().map(|s| if *s == RuleStatus::Confirmed { 8 } else { 0 }).collect();
    let provisional = (0..d).filter(|&i| status[i] == RuleStatus::Provisional).map(|i| lattice.rep(i)).collect();
    report(forced, lattice, ClosureMethod::Rules, &dims, iterations, provisional)
}
