//! The truncated wavevector lattice `K_N = {k in Z^3 : 0 < |k|_inf <= N}` and
//! its split into a representative half and the negated half.
//!
//! Only representatives carry coefficients; the negated half is virtual and is
//! read through complex conjugation. The representative half is the set of
//! wavevectors whose last nonzero component (scanning k3, k2, k1) is positive,
//! which makes it closed under addition inside the lattice.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Integer Fourier index `k = (k1, k2, k3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct WaveVector {
    pub k1: i32,
    pub k2: i32,
    pub k3: i32,
}

impl From<[i32; 3]> for WaveVector {
    fn from(k: [i32; 3]) -> Self {
        WaveVector::new(k[0], k[1], k[2])
    }
}

impl From<WaveVector> for [i32; 3] {
    fn from(k: WaveVector) -> Self {
        [k.k1, k.k2, k.k3]
    }
}

impl WaveVector {
    pub const fn new(k1: i32, k2: i32, k3: i32) -> Self {
        WaveVector { k1, k2, k3 }
    }

    pub const ZERO: WaveVector = WaveVector::new(0, 0, 0);

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn sup_norm(&self) -> u32 {
        self.k1.unsigned_abs().max(self.k2.unsigned_abs()).max(self.k3.unsigned_abs())
    }

    /// `|k|^2`, also the decay rate of mode k under unit viscosity.
    pub fn norm_sq(&self) -> f64 {
        let (a, b, c) = (self.k1 as i64, self.k2 as i64, self.k3 as i64);
        (a * a + b * b + c * c) as f64
    }

    pub fn norm_sq_int(&self) -> i64 {
        let (a, b, c) = (self.k1 as i64, self.k2 as i64, self.k3 as i64);
        a * a + b * b + c * c
    }

    pub fn as_vec3(&self) -> Vec3 {
        [self.k1 as f64, self.k2 as f64, self.k3 as f64]
    }

    pub fn dot(&self, v: &Vec3) -> f64 {
        self.k1 as f64 * v[0] + self.k2 as f64 * v[1] + self.k3 as f64 * v[2]
    }

    /// Membership in the representative half (union of the three sign classes
    /// `k3 > 0`, `k3 = 0 & k2 > 0`, `k3 = k2 = 0 & k1 > 0`).
    pub fn is_representative(&self) -> bool {
        self.k3 > 0 || (self.k3 == 0 && (self.k2 > 0 || (self.k2 == 0 && self.k1 > 0)))
    }

    /// Which of the three sign classes the vector belongs to, if any.
    pub fn representative_class(&self) -> Option<u8> {
        if self.k3 > 0 {
            Some(1)
        } else if self.k3 == 0 && self.k2 > 0 {
            Some(2)
        } else if self.k3 == 0 && self.k2 == 0 && self.k1 > 0 {
            Some(3)
        } else {
            None
        }
    }

    /// Linear independence of two integer vectors (nonzero cross product).
    pub fn independent_of(&self, other: &WaveVector) -> bool {
        let (a, b) = (self, other);
        let c1 = a.k2 as i64 * b.k3 as i64 - a.k3 as i64 * b.k2 as i64;
        let c2 = a.k3 as i64 * b.k1 as i64 - a.k1 as i64 * b.k3 as i64;
        let c3 = a.k1 as i64 * b.k2 as i64 - a.k2 as i64 * b.k1 as i64;
        c1 != 0 || c2 != 0 || c3 != 0
    }
}

impl Add for WaveVector {
    type Output = WaveVector;
    fn add(self, o: WaveVector) -> WaveVector {
        WaveVector::new(self.k1 + o.k1, self.k2 + o.k2, self.k3 + o.k3)
    }
}

impl Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, o: WaveVector) -> WaveVector {
        WaveVector::new(self.k1 - o.k1, self.k2 - o.k2, self.k3 - o.k3)
    }
}

impl Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector::new(-self.k1, -self.k2, -self.k3)
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.k1, self.k2, self.k3)
    }
}

impl std::str::FromStr for WaveVector {
    type Err = Error;

    /// Parses `(a,b,c)` or `a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<_> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("cannot parse wavevector '{s}'")));
        }
        let mut k = [0i32; 3];
        for (slot, p) in k.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| Error::Config(format!("cannot parse wavevector '{s}'")))?;
        }
        Ok(k.into())
    }
}

/// Parses a list such as `"(1,0,0),(0,1,0),(0,0,1)"`.
pub fn parse_wavevector_list(s: &str) -> Result<Vec<WaveVector>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('(') {
        let close = rest[open..].find(')').ok_or_else(|| Error::Config(format!("unbalanced parentheses in '{s}'")))?;
        out.push(rest[open..open + close + 1].parse()?);
        rest = &rest[open + close + 1..];
    }
    if out.is_empty() {
        // bare "a,b,c"
        out.push(s.parse()?);
    }
    Ok(out)
}

/// How a nonlinear interaction pair `(h, l)` of representatives contributes to
/// mode `k` once the negated half is folded in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriadKind {
    /// `h + l = k`: coefficients `x_h`, `x_l`.
    Sum,
    /// `h - l = k`: coefficients `x_h`, `conj(x_l)`.
    HMinusL,
    /// `l - h = k`: coefficients `conj(x_h)`, `x_l`.
    LMinusH,
}

/// One term of the folded convolution sum for an output mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triad {
    pub h: usize,
    pub l: usize,
    pub kind: TriadKind,
}

/// The truncated lattice with its deterministic (lexicographic) ordering of
/// representatives and precomputed interaction lists.
#[derive(Clone, Debug)]
pub struct ModeLattice {
    n: u32,
    reps: Vec<WaveVector>,
    /// Index into `reps` for every point of the cube `[-N, N]^3`, tagged with
    /// whether the point is a negated representative.
    lookup: Vec<Option<(usize, bool)>>,
    triads: Vec<Vec<Triad>>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct LatticeDump {
    #[serde(rename = "N")]
    pub n: u32,
    pub representatives: Vec<[i32; 3]>,
}

impl ModeLattice {
    /// Builds `K_N` and its representative half.
    pub fn build(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("truncation radius N must be >= 1".into()));
        }
        if n > 64 {
            return Err(Error::Config(format!("truncation radius N = {n} is unreasonably large")));
        }
        let ni = n as i32;
        let mut reps = Vec::new();
        for k1 in -ni..=ni {
            for k2 in -ni..=ni {
                for k3 in -ni..=ni {
                    let k = WaveVector::new(k1, k2, k3);
                    if k.is_representative() {
                        reps.push(k);
                    }
                }
            }
        }
        let side = (2 * n + 1) as usize;
        let mut lookup = vec![None; side * side * side];
        let mut lattice = ModeLattice { n, reps, lookup: Vec::new(), triads: Vec::new() };
        for (i, k) in lattice.reps.iter().enumerate() {
            lookup[lattice.cube_index(k)] = Some((i, false));
            lookup[lattice.cube_index(&-*k)] = Some((i, true));
        }
        lattice.lookup = lookup;
        lattice.triads = lattice.build_triads();
        Ok(lattice)
    }

    fn cube_index(&self, k: &WaveVector) -> usize {
        let n = self.n as i32;
        let side = 2 * n + 1;
        (((k.k1 + n) * side + (k.k2 + n)) * side + (k.k3 + n)) as usize
    }

    fn build_triads(&self) -> Vec<Vec<Triad>> {
        let mut triads = vec![Vec::new(); self.reps.len()];
        for (hi, h) in self.reps.iter().enumerate() {
            for (li, l) in self.reps.iter().enumerate() {
                if let Some((ki, false)) = self.locate(&(*h + *l)) {
                    triads[ki].push(Triad { h: hi, l: li, kind: TriadKind::Sum });
                }
                match self.locate(&(*h - *l)) {
                    Some((ki, false)) => triads[ki].push(Triad { h: hi, l: li, kind: TriadKind::HMinusL }),
                    Some((ki, true)) => triads[ki].push(Triad { h: hi, l: li, kind: TriadKind::LMinusH }),
                    None => {}
                }
            }
        }
        triads
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number `D` of representatives.
    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn representatives(&self) -> &[WaveVector] {
        &self.reps
    }

    pub fn rep(&self, i: usize) -> WaveVector {
        self.reps[i]
    }

    /// All of `K_N`: representatives followed by their negatives.
    pub fn full_set(&self) -> Vec<WaveVector> {
        self.reps.iter().copied().chain(self.reps.iter().map(|k| -*k)).collect()
    }

    pub fn contains(&self, k: &WaveVector) -> bool {
        self.locate(k).is_some()
    }

    /// Index of the representative of `k` and whether `k` is a negated
    /// representative; `None` for zero or points outside the cube.
    pub fn locate(&self, k: &WaveVector) -> Option<(usize, bool)> {
        if k.sup_norm() > self.n {
            return None;
        }
        self.lookup[self.cube_index(k)]
    }

    pub fn index_of(&self, k: &WaveVector) -> Option<usize> {
        match self.locate(k) {
            Some((i, false)) => Some(i),
            _ => None,
        }
    }

    /// Representative of `k` and whether `k` had to be negated to reach it.
    pub fn canonical(&self, k: &WaveVector) -> Result<(WaveVector, bool)> {
        self.locate(k).map(|(i, conj)| (self.reps[i], conj)).ok_or(Error::OutOfLattice(*k, self.n))
    }

    /// Folded interaction list for representative `k`.
    pub fn triads(&self, k: usize) -> &[Triad] {
        &self.triads[k]
    }

    /// Sizes of the three sign classes.
    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for k in &self.reps {
            if let Some(cls) = k.representative_class() {
                c[cls as usize - 1] += 1;
            }
        }
        c
    }

    /// Closed form `((2N+1)^3 - 1) / 2`.
    pub fn expected_dim(n: u32) -> usize {
        let s = (2 * n as usize) + 1;
        (s * s * s - 1) / 2
    }

    pub fn dump(&self) -> LatticeDump {
        LatticeDump { n: self.n, representatives: self.reps.iter().map(|&k| k.into()).collect() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.dump()).expect("lattice dump serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinalities_match_closed_form() {
        for n in 1..=4 {
            let lat = ModeLattice::build(n).unwrap();
            let d = ModeLattice::expected_dim(n);
            assert_eq!(lat.dim(), d);
            let nn = n as usize;
            assert_eq!(lat.class_counts(), [(2 * nn + 1).pow(2) * nn, (2 * nn + 1) * nn, nn]);
            assert_eq!(lat.class_counts().iter().sum::<usize>(), d);
            assert_eq!(lat.full_set().len(), 2 * d);
        }
        assert_eq!(ModeLattice::build(1).unwrap().dim(), 13);
        assert_eq!(ModeLattice::build(2).unwrap().dim(), 62);
        assert_eq!(ModeLattice::build(3).unwrap().dim(), 171);
    }

    #[test]
    fn zero_radius_rejected() {
        assert!(matches!(ModeLattice::build(0), Err(Error::Config(_))));
    }

    #[test]
    fn partition_is_disjoint_and_covers() {
        let lat = ModeLattice::build(2).unwrap();
        let n = 2;
        let mut count = 0;
        for k1 in -n..=n {
            for k2 in -n..=n {
                for k3 in -n..=n {
                    let k = WaveVector::new(k1, k2, k3);
                    if k.is_zero() {
                        assert!(lat.locate(&k).is_none());
                        continue;
                    }
                    count += 1;
                    let rep = k.is_representative();
                    let neg = (-k).is_representative();
                    assert!(rep ^ neg, "{k} must be in exactly one half");
                }
            }
        }
        assert_eq!(count, 2 * lat.dim());
    }

    #[test]
    fn canonical_examples() {
        let lat = ModeLattice::build(1).unwrap();
        assert_eq!(lat.canonical(&WaveVector::new(0, 0, 1)).unwrap(), (WaveVector::new(0, 0, 1), false));
        assert_eq!(lat.canonical(&WaveVector::new(0, 0, -1)).unwrap(), (WaveVector::new(0, 0, 1), true));
        // k3 = 0, k2 = 1 > 0: second sign class
        let k = WaveVector::new(-1, 1, 0);
        assert_eq!(k.representative_class(), Some(2));
        assert_eq!(lat.canonical(&k).unwrap(), (k, false));
        assert!(matches!(lat.canonical(&WaveVector::new(2, 0, 0)), Err(Error::OutOfLattice(_, 1))));
        assert!(lat.canonical(&WaveVector::ZERO).is_err());
    }

    #[test]
    fn representatives_are_lexicographic() {
        let lat = ModeLattice::build(3).unwrap();
        assert!(lat.representatives().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dump_round_trips() {
        let lat = ModeLattice::build(1).unwrap();
        let json = lat.to_json();
        let back: LatticeDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n, 1);
        assert_eq!(back.representatives.len(), 13);
        assert!(json.starts_with("{\"N\":1,\"representatives\":[["));
    }

    #[test]
    fn parse_lists() {
        let v = parse_wavevector_list("(1,0,0),(0,1,0), (0,0,1)").unwrap();
        assert_eq!(v, vec![WaveVector::new(1, 0, 0), WaveVector::new(0, 1, 0), WaveVector::new(0, 0, 1)]);
        assert_eq!(parse_wavevector_list("1,-1,0").unwrap(), vec![WaveVector::new(1, -1, 0)]);
        assert!(parse_wavevector_list("").unwrap().is_empty());
        assert!(parse_wavevector_list("(1,0)").is_err());
    }

    #[test]
    fn triads_cover_full_convolution() {
        // every ordered pair (h, l) in K_N with h + l = k in the representative
        // half shows up exactly once in the folded list
        let lat = ModeLattice::build(2).unwrap();
        let full = lat.full_set();
        for (ki, k) in lat.representatives().iter().enumerate() {
            let brute = full.iter().filter(|h| lat.contains(&(*k - **h))).count();
            assert_eq!(lat.triads(ki).len(), brute, "mode {k}");
        }
    }
}
