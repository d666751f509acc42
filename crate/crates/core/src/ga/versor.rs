use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::multivector::{Multivector, GRADE_OF, N_BLADES};
use super::{embed, GaError};
use crate::Real;

const INVERTIBLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_count(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn compose(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// A product of grade-1 elements, acting on multivectors by the sandwich product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Versor<T = f64> {
    mv: Multivector<T>,
    parity: Parity,
}

impl<T: Real> Versor<T> {
    /// Wraps `mv` after checking that its grades agree with `parity`.
    pub fn new(mv: Multivector<T>, parity: Parity) -> Result<Self, GaError> {
        let scale = mv.max_abs().max(T::one());
        let tol = T::from_f64(1e-9) * scale;
        for i in 0..N_BLADES {
            let odd_blade = GRADE_OF[i] % 2 == 1;
            if odd_blade != (parity == Parity::Odd) && mv.0[i].abs() > tol {
                return Err(GaError::ParityMismatch);
            }
        }
        Ok(Self { mv, parity })
    }

    pub fn identity() -> Self {
        Self {
            mv: Multivector::scalar(T::one()),
            parity: Parity::Even,
        }
    }

    /// Product of the given grade-1 elements, renormalized.
    pub fn from_vectors(vectors: &[Multivector<T>]) -> Result<Self, GaError> {
        let mut mv = Multivector::scalar(T::one());
        for v in vectors {
            mv = mv * *v;
        }
        Self {
            mv,
            parity: Parity::of_count(vectors.len()),
        }
        .normalized()
    }

    pub fn mv(&self) -> &Multivector<T> {
        &self.mv
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// `<u ~u>_0`.
    pub fn norm_squared(&self) -> T {
        (self.mv * self.mv.reverse()).0[0]
    }

    pub fn normalized(&self) -> Result<Self, GaError> {
        let n2 = self.norm_squared();
        if !(n2.as_f64() > INVERTIBLE_TOL) {
            return Err(GaError::NonInvertible(n2.as_f64()));
        }
        Ok(Self {
            mv: self.mv.scale(T::one() / n2.sqrt()),
            parity: self.parity,
        })
    }

    pub fn inverse(&self) -> Result<Self, GaError> {
        let n2 = self.norm_squared();
        if !(n2.as_f64().abs() > INVERTIBLE_TOL) {
            return Err(GaError::NonInvertible(n2.as_f64()));
        }
        Ok(Self {
            mv: self.mv.reverse().scale(T::one() / n2),
            parity: self.parity,
        })
    }

    /// `self * other`; acting with the result equals acting with `other` first.
    pub fn compose(&self, other: &Self) -> Result<Self, GaError> {
        Self {
            mv: self.mv * other.mv,
            parity: self.parity.compose(other.parity),
        }
        .normalized()
    }

    /// `u x u^-1` for even `u`, `u x^ u^-1` for odd `u`.
    pub fn sandwich(&self, x: &Multivector<T>) -> Result<Multivector<T>, GaError> {
        let inv = self.inverse()?;
        Ok(self.apply_with_inverse(&inv.mv, x))
    }

    fn apply_with_inverse(&self, inv: &Multivector<T>, x: &Multivector<T>) -> Multivector<T> {
        let x = match self.parity {
            Parity::Even => *x,
            Parity::Odd => x.grade_involution(),
        };
        self.mv * x * *inv
    }

    /// The 16x16 matrix `R` with `sandwich(x) = R x`, row-major.
    pub fn action_matrix(&self) -> Result<[[T; N_BLADES]; N_BLADES], GaError> {
        let inv = self.inverse()?;
        let mut m = [[T::zero(); N_BLADES]; N_BLADES];
        for j in 0..N_BLADES {
            let col = self.apply_with_inverse(&inv.mv, &Multivector::basis(j, T::one()));
            for i in 0..N_BLADES {
                m[i][j] = col.0[i];
            }
        }
        Ok(m)
    }

    pub fn cast<U: Real>(&self) -> Versor<U> {
        Versor {
            mv: self.mv.cast(),
            parity: self.parity,
        }
    }
}

/// Applies `matrix` (from [`Versor::action_matrix`]) to a multivector.
pub fn apply_matrix<T: Real>(m: &[[T; N_BLADES]; N_BLADES], x: &[T]) -> [T; N_BLADES] {
    let mut out = [T::zero(); N_BLADES];
    for (i, row) in m.iter().enumerate() {
        let mut acc = T::zero();
        for j in 0..N_BLADES {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
    out
}

/// Product of `n_reflections` random planes: unit normal uniform on the
/// sphere, offset drawn from `Normal(0, translation_scale)`.
pub fn random_versor<R: Rng + ?Sized>(
    rng: &mut R,
    n_reflections: usize,
    translation_scale: f64,
) -> Result<Versor<f64>, GaError> {
    if n_reflections == 0 {
        return Err(GaError::Degenerate("random_versor needs at least one reflection"));
    }
    let planes: Vec<Multivector<f64>> = (0..n_reflections)
        .map(|_| {
            let n = random_unit_vector(rng);
            let z: f64 = StandardNormal.sample(rng);
            embed::embed_plane(n, z * translation_scale).expect("unit normal is nonzero")
        })
        .collect();
    Versor::from_vectors(&planes)
}

pub(crate) fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::{embed_plane, embed_point, extract_point, embed_translation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mv(rng: &mut ChaCha8Rng) -> Multivector {
        let mut m = Multivector::zero();
        for c in m.0.iter_mut() {
            *c = StandardNormal.sample(rng);
        }
        m
    }

    #[test]
    fn identity_versor_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_mv(&mut rng);
        assert_eq!(Versor::identity().sandwich(&x).unwrap(), x);
    }

    #[test]
    fn inverse_undoes_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=4 {
            let u = random_versor(&mut rng, n, 3.0).unwrap();
            let x = random_mv(&mut rng);
            let y = u.inverse().unwrap().sandwich(&u.sandwich(&x).unwrap()).unwrap();
            assert!(y.rel_diff(&x) < 1e-12, "{n}: {}", y.rel_diff(&x));
        }
    }

    #[test]
    fn non_invertible_is_rejected() {
        let u = Versor::new(Multivector::basis(crate::ga::blade::E0, 1.0), Parity::Odd).unwrap();
        assert!(matches!(u.sandwich(&Multivector::zero()), Err(GaError::NonInvertible(_))));
    }

    #[test]
    fn parity_is_checked() {
        let v = Multivector::basis(crate::ga::blade::E1, 1.0);
        assert_eq!(Versor::new(v, Parity::Even), Err(GaError::ParityMismatch));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_versor(&mut rng, 3, 1.0).unwrap().parity(), Parity::Odd);
        assert_eq!(random_versor(&mut rng, 2, 1.0).unwrap().parity(), Parity::Even);
    }

    #[test]
    fn same_plane_twice_is_identity() {
        let p = embed_plane([0.0, 0.6, 0.8], 1.5).unwrap();
        let u = Versor::from_vectors(&[p, p]).unwrap();
        let x = embed_point([0.3, -2.0, 4.0]);
        assert!(u.sandwich(&x).unwrap().rel_diff(&x) < 1e-14);
    }

    #[test]
    fn parallel_planes_translate_by_twice_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = random_unit_vector(&mut rng);
            let d0: f64 = StandardNormal.sample(&mut rng);
            let delta: f64 = StandardNormal.sample(&mut rng);
            // reflect in plane d0 first, then in plane d0 + delta
            let first = embed_plane(n, d0).unwrap();
            let second = embed_plane(n, d0 + delta).unwrap();
            let u = Versor::from_vectors(&[second, first]).unwrap();
            let p = [1.0, -0.5, 2.0];
            let q = extract_point(&u.sandwich(&embed_point(p)).unwrap()).unwrap();
            for i in 0..3 {
                assert!((q[i] - (p[i] + 2.0 * delta * n[i])).abs() < 1e-12);
            }
            // matches the translation embedding up to sign (double cover)
            let t = embed_translation([2.0 * delta * n[0], 2.0 * delta * n[1], 2.0 * delta * n[2]]);
            let same = u.mv().rel_diff(t.mv()) < 1e-12 || (-*u.mv()).rel_diff(t.mv()) < 1e-12;
            assert!(same);
        }
    }

    #[test]
    fn action_matrix_matches_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_versor(&mut rng, 3, 2.0).unwrap();
        let x = random_mv(&mut rng);
        let m = u.action_matrix().unwrap();
        let y = Multivector(apply_matrix(&m, &x.0));
        assert!(y.rel_diff(&u.sandwich(&x).unwrap()) < 1e-13);
    }
}
