use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use super::blade;
use super::tables::{Term, GP_TERMS, JOIN_TERMS, PGA, WEDGE_TERMS};
use super::GaError;
use crate::Real;

pub const N_BLADES: usize = 16;

/// Grade of each stored blade.
pub const GRADE_OF: [usize; N_BLADES] = [0, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 4];

const REVERSE_SIGN: [i8; 5] = [1, 1, -1, -1, 1];
const INVOLUTION_SIGN: [i8; 5] = [1, -1, 1, -1, 1];

/// An element of G(3,0,1): 16 coefficients over the basis blades.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Multivector<T = f64>(pub [T; N_BLADES]);

impl<T: Real> Default for Multivector<T> {
    fn default() -> Self {
        Self::zero()
    }
}

#[inline]
pub(crate) fn bilinear<T: Real>(terms: &[Term], a: &[T], b: &[T], out: &mut [T]) {
    for t in terms {
        let v = a[t.i as usize] * b[t.j as usize];
        if t.sign > 0 {
            out[t.k as usize] += v;
        } else {
            out[t.k as usize] -= v;
        }
    }
}

impl<T: Real> Multivector<T> {
    pub fn zero() -> Self {
        Self([T::zero(); N_BLADES])
    }

    pub fn from_slice(s: &[T]) -> Self {
        let mut c = [T::zero(); N_BLADES];
        c.copy_from_slice(&s[..N_BLADES]);
        Self(c)
    }

    /// `coeff * blade[index]`.
    pub fn basis(index: usize, coeff: T) -> Self {
        let mut m = Self::zero();
        m.0[index] = coeff;
        m
    }

    pub fn scalar(s: T) -> Self {
        Self::basis(blade::SCALAR, s)
    }

    pub fn coeffs(&self) -> &[T; N_BLADES] {
        &self.0
    }

    pub fn cast<U: Real>(&self) -> Multivector<U> {
        Multivector(self.0.map(|x| U::from_f64(x.as_f64())))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, s: T) -> Self {
        Self(self.0.map(|x| x * s))
    }

    pub fn geometric_product(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        bilinear(&GP_TERMS, &self.0, &other.0, &mut out.0);
        out
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        bilinear(&WEDGE_TERMS, &self.0, &other.0, &mut out.0);
        out
    }

    /// `dual_inverse(dual(self) ^ dual(other))`, tabulated once.
    pub fn join(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        bilinear(&JOIN_TERMS, &self.0, &other.0, &mut out.0);
        out
    }

    /// Join scaled by the `e0123` coefficient of a reference multivector.
    pub fn equi_join(&self, other: &Self, reference: &Self) -> Self {
        self.join(other).scale(reference.0[blade::E0123])
    }

    /// Invariant inner product `<~x y>_0`; only the 8 blades without `e0` contribute.
    pub fn inner(&self, other: &Self) -> T {
        blade::EUCLIDEAN
            .iter()
            .map(|&b| self.0[b] * other.0[b])
            .fold(T::zero(), |a, b| a + b)
    }

    /// `sqrt(inner(x, x))`.
    pub fn norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn reverse(&self) -> Self {
        let mut out = *self;
        for (i, c) in out.0.iter_mut().enumerate() {
            if REVERSE_SIGN[GRADE_OF[i]] < 0 {
                *c = -*c;
            }
        }
        out
    }

    pub fn grade_involution(&self) -> Self {
        let mut out = *self;
        for (i, c) in out.0.iter_mut().enumerate() {
            if INVOLUTION_SIGN[GRADE_OF[i]] < 0 {
                *c = -*c;
            }
        }
        out
    }

    pub fn grade_projection(&self, k: usize) -> Result<Self, GaError> {
        if k > 4 {
            return Err(GaError::InvalidGrade(k));
        }
        let mut out = Self::zero();
        for i in 0..N_BLADES {
            if GRADE_OF[i] == k {
                out.0[i] = self.0[i];
            }
        }
        Ok(out)
    }

    /// Right complement: `blade ^ dual(blade) = e0123` for every basis blade.
    pub fn dual(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..N_BLADES {
            let e = PGA.dual(i);
            out.0[e.index as usize] = self.0[i] * T::from_f64(e.sign as f64);
        }
        out
    }

    pub fn dual_inverse(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..N_BLADES {
            let e = PGA.dual_inverse(i);
            out.0[e.index as usize] = self.0[i] * T::from_f64(e.sign as f64);
        }
        out
    }

    /// Left multiplication by `e0`.
    pub fn e0_mul(&self) -> Self {
        Self::basis(blade::E0, T::one()).geometric_product(self)
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Max-abs difference, divided by `max(1, max_abs(other))`.
    pub fn rel_diff(&self, other: &Self) -> T {
        let d = (*self - *other).max_abs();
        d / other.max_abs().max(T::one())
    }
}

impl<T> Index<usize> for Multivector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Multivector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Real> Add for Multivector<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real> AddAssign for Multivector<T> {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl<T: Real> Sub for Multivector<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Real> SubAssign for Multivector<T> {
    fn sub_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl<T: Real> Neg for Multivector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|x| -x))
    }
}

/// Geometric product.
impl<T: Real> Mul for Multivector<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.geometric_product(&rhs)
    }
}

impl<T: Real> Mul<T> for Multivector<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::blade::*;

    fn e(i: usize) -> Multivector {
        Multivector::basis(i, 1.0)
    }

    #[test]
    fn vector_squares_to_its_norm() {
        let v = e(E1) + e(E2);
        assert_eq!(v * v, Multivector::scalar(2.0));
    }

    #[test]
    fn e1_times_e23() {
        assert_eq!(e(E1) * e(E23), e(E123));
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(e(E1).wedge(&e(E2)), e(E12));
        assert_eq!(e(E1).wedge(&e(E1)), Multivector::zero());
    }

    #[test]
    fn inner_examples() {
        assert_eq!(e(E0).inner(&e(E0)), 0.0);
        let x = e(E1) + e(E12) * 2.0;
        assert_eq!(x.inner(&x), 5.0);
    }

    #[test]
    fn involutions_and_projection() {
        assert_eq!(e(E12).reverse(), -e(E12));
        assert_eq!(e(E123).grade_involution(), -e(E123));
        let x = Multivector::scalar(1.0) + e(E1) + e(E12);
        assert_eq!(x.grade_projection(1).unwrap(), e(E1));
        assert_eq!(x.grade_projection(5), Err(GaError::InvalidGrade(5)));
    }

    #[test]
    fn duals() {
        assert_eq!(e(E01).dual(), e(E23));
        assert_eq!(Multivector::<f64>::scalar(1.0).dual(), e(E0123));
        let x = Multivector((0..16).map(|i| i as f64 - 3.5).collect::<Vec<_>>().try_into().unwrap());
        assert_eq!(x.dual().dual_inverse(), x);
    }

    #[test]
    fn join_with_pseudoscalar_is_identity() {
        let x = Multivector((0..16).map(|i| (i * i) as f64 * 0.1).collect::<Vec<_>>().try_into().unwrap());
        assert_eq!(e(E0123).join(&x), x);
        let d = e(E1).dual_inverse();
        assert_eq!(d.join(&d), Multivector::zero());
    }

    #[test]
    fn equi_join_scales_by_pseudoscalar_coefficient() {
        let x = e(E123) + e(E023) * 2.0;
        let y = e(E123) - e(E012);
        assert_eq!(x.equi_join(&y, &e(E1)), Multivector::zero());
        assert_eq!(x.equi_join(&y, &(e(E0123) + e(E2))), x.join(&y));
    }

    #[test]
    fn e0_mul_of_trivector_is_pseudoscalar() {
        assert_eq!(e(E123).e0_mul(), e(E0123));
        assert_eq!(e(E0).e0_mul(), Multivector::zero());
    }
}
