//! Scalar abstraction shared by every numerical module.
//!
//! All linear algebra is written against [`Real`], implemented for `f32`
//! and `f64`. Tolerances quoted throughout the crate assume `f64`.

use std::fmt;

use nalgebra::{Complex, DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the simulator.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Display + fmt::LowerExp + Default
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type Cx<T> = Complex<T>;

/// Dense complex matrix over `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in target scalar")
}

/// Converts `T` into `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn cre<T: Real>(re: T) -> Cx<T> {
    Complex::new(re, T::zero())
}

/// Modulus of a complex number.
#[inline]
pub fn cabs<T: Real>(z: Cx<T>) -> T {
    z.re.hypot(z.im)
}

/// Largest absolute entry of `m - m^†`.
pub fn hermiticity_error<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = cabs(m[(i, j)] - m[(j, i)].conj());
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Largest absolute entry of `m`.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| {
        let a = cabs(*z);
        if a > acc {
            a
        } else {
            acc
        }
    })
}

/// Replaces `m` by `(m + m^†) / 2`.
pub(crate) fn hermitize<T: Real>(m: &mut CMatrix<T>) {
    let n = m.nrows();
    let half = lit::<T>(0.5);
    for i in 0..n {
        m[(i, i)] = cre(m[(i, i)].re);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * half;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Real trace of a Hermitian matrix.
pub(crate) fn trace_re<T: Real>(m: &CMatrix<T>) -> T {
    (0..m.nrows()).fold(T::zero(), |acc, i| acc + m[(i, i)].re)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<T> = m.clone().symmetric_eigenvalues().iter().map(|z| *z).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}
