//! Small fixed-size vector helpers shared by the real and complex code paths.

use num_complex::Complex64;

pub type Vec3 = [f64; 3];
pub type CVec3 = [Complex64; 3];

pub const ZERO3: Vec3 = [0.0; 3];
pub const CZERO3: CVec3 = [Complex64::new(0.0, 0.0); 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sq(a: &Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a += s * b`
#[inline]
pub fn axpy(a: &mut Vec3, s: f64, b: &Vec3) {
    a[0] += s * b[0];
    a[1] += s * b[1];
    a[2] += s * b[2];
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Bilinear (non-conjugating) product of a complex vector with a real one.
#[inline]
pub fn cdot_real(a: &CVec3, k: &Vec3) -> Complex64 {
    a[0] * k[0] + a[1] * k[1] + a[2] * k[2]
}

/// Hermitian inner product `<a, b> = sum a_i conj(b_i)`.
#[inline]
pub fn cinner(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

#[inline]
pub fn cnorm_sq(a: &CVec3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

#[inline]
pub fn cconj(a: &CVec3) -> CVec3 {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

#[inline]
pub fn caxpy(a: &mut CVec3, s: Complex64, b: &CVec3) {
    a[0] += s * b[0];
    a[1] += s * b[1];
    a[2] += s * b[2];
}

#[inline]
pub fn cscale(a: &CVec3, s: Complex64) -> CVec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn cadd(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn re(a: &CVec3) -> Vec3 {
    [a[0].re, a[1].re, a[2].re]
}

#[inline]
pub fn im(a: &CVec3) -> Vec3 {
    [a[0].im, a[1].im, a[2].im]
}

#[inline]
pub fn from_parts(r: &Vec3, s: &Vec3) -> CVec3 {
    [Complex64::new(r[0], s[0]), Complex64::new(r[1], s[1]), Complex64::new(r[2], s[2])]
}

pub fn max_abs(a: &Vec3) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
