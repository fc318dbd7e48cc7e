//! Global oracle for the span closure at N=1: the Lie algebra generated by
//! the forced constant fields is computed directly in the full real phase
//! space, with second derivatives of the drift obtained by polarization, and
//! its rank is compared with the per-mode dimensions of the closure report.
//! The last test measures the two-mode fusion subspaces at N=2.

use galerkin_mhd::dynamics::real_drift_f0;
use galerkin_mhd::hormander::{closure, double_bracket, full_mode_basis, ClosureMethod, ConstantVectorField};
use galerkin_mhd::{ModeLattice, RealState, WaveVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn drift(lat: &ModeLattice, x: &[f64]) -> Vec<f64> {
    real_drift_f0(&RealState::from_flat(lat, x).unwrap(), lat).unwrap().to_flat()
}

fn hessian(lat: &ModeLattice, a: &[f64], b: &[f64]) -> Vec<f64> {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let (fab, fa, fb) = (drift(lat, &ab), drift(lat, a), drift(lat, b));
    (0..fab.len()).map(|i| fab[i] - fa[i] - fb[i]).collect()
}

/// Orthogonalizes `x` against `basis` (twice, for stability) and appends the
/// normalized remainder if it is not negligible.
fn insert(basis: &mut Vec<Vec<f64>>, mut x: Vec<f64>) -> bool {
    let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for e in basis.iter() {
            let c: f64 = e.iter().zip(&x).map(|(p, q)| p * q).sum();
            x.iter_mut().zip(e).for_each(|(xi, ei)| *xi -= c * ei);
        }
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r <= TOL * scale.max(1.0) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= r);
    basis.push(x);
    true
}

fn global_rank(lat: &ModeLattice, forced: &[WaveVector]) -> usize {
    let d = lat.dim();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in forced {
        let i = lat.index_of(k).unwrap();
        for v in full_mode_basis(k) {
            let mut x = vec![0.0; 12 * d];
            x[12 * i..12 * i + 12].copy_from_slice(&v);
            insert(&mut basis, x);
        }
    }
    let mut done = 0;
    while done < basis.len() {
        let end = basis.len();
        for a in done..end {
            for b in 0..=a {
                let h = hessian(lat, &basis[a], &basis[b]);
                insert(&mut basis, h);
            }
        }
        done = end;
    }
    basis.len()
}

fn check(lat: &ModeLattice, forced: &[WaveVector]) {
    let report = closure(forced, lat, ClosureMethod::Span).unwrap();
    let per_mode: usize = report.per_mode_dim.values().sum();
    let rank = global_rank(lat, forced);
    assert_eq!(per_mode, rank, "forced {forced:?}");
    assert_eq!(report.hypoelliptic, rank == 8 * lat.dim(), "forced {forced:?}");
}

#[test]
fn axes_reach_full_rank() {
    let lat = ModeLattice::build(1).unwrap();
    let forced = [WaveVector::new(1, 0, 0), WaveVector::new(0, 1, 0), WaveVector::new(0, 0, 1)];
    assert_eq!(global_rank(&lat, &forced), 8 * 13);
    check(&lat, &forced);
}

#[test]
fn single_mode_stays_isolated() {
    let lat = ModeLattice::build(1).unwrap();
    for k in lat.representatives() {
        assert_eq!(global_rank(&lat, &[*k]), 8);
    }
}

#[test]
fn named_sets_match_global_span() {
    let lat = ModeLattice::build(1).unwrap();
    let w = |a, b, c| WaveVector::new(a, b, c);
    check(&lat, &[w(1, 0, 0), w(0, 1, 1), w(0, 0, 1)]);
    check(&lat, &[w(1, 0, 0), w(0, 1, 0)]);
    check(&lat, &[w(-1, 1, 0), w(1, 1, 0)]);
    check(&lat, &[w(1, 1, 1), w(0, 0, 1)]);
}

#[test]
fn random_sets_match_global_span() {
    let lat = ModeLattice::build(1).unwrap();
    let reps = lat.representatives();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..12 {
        let size = rng.random_range(1..=3);
        let forced: Vec<WaveVector> = (0..size).map(|_| reps[rng.random_range(0..reps.len())]).collect();
        check(&lat, &forced);
    }
}

/// Rank at `m + n` of all brackets between the constant fields at `m` and at
/// `n`: the whole 8-dimensional (4 complex) space when the norms differ, 6
/// when they agree.
#[test]
fn fusion_subspace_dimension() {
    let lat = ModeLattice::build(2).unwrap();
    let reps = lat.representatives();
    let (mut unequal, mut equal) = (0, 0);
    for m in reps {
        for n in reps {
            let k = *m + *n;
            if !m.independent_of(n) || lat.index_of(&k).is_none() {
                continue;
            }
            let mut basis = Vec::new();
            for a in full_mode_basis(m) {
                for b in full_mode_basis(n) {
                    let v = ConstantVectorField::from_flat(*m, &a);
                    let w = ConstantVectorField::from_flat(*n, &b);
                    insert(&mut basis, double_bracket(&v, &w, &lat).unwrap().get_flat(&k).to_vec());
                }
            }
            if m.norm_sq_int() == n.norm_sq_int() {
                assert_eq!(basis.len(), 6, "{m} + {n}");
                equal += 1;
            } else {
                assert_eq!(basis.len(), 8, "{m} + {n}");
                unequal += 1;
            }
        }
    }
    assert!(equal > 0 && unequal > 0);
}
