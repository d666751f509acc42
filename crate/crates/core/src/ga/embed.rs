//! Embedding dictionary between Euclidean objects and multivectors.
//!
//! Sign conventions (fixed so that the sandwich action reproduces the
//! Euclidean action on embedded points):
//!
//! | object                      | nonzero coefficients                                   |
//! |-----------------------------|--------------------------------------------------------|
//! | scalar `l`                  | `1: l`                                                 |
//! | plane `n.x = d`             | `e1,e2,e3: n`, `e0: -d`                                |
//! | line dir `n` through `s`    | `e23: n1, e13: -n2, e12: n3`, `e01,e02,e03: s x n`     |
//! | point `p`                   | `e123: 1`, `e023: -p1, e013: p2, e012: -p3`            |
//! | pseudoscalar `m`            | `e0123: m`                                             |
//! | translation `t`             | `1: 1`, `e01,e02,e03: -t/2`                            |
//! | rotation `q` (unit quat.)   | `1: q0`, `e23: -q1, e13: q2, e12: -q3`                 |
//! | point reflection through `p`| same as the point `p` (odd versor)                     |

use super::blade::*;
use super::{GaError, Multivector, Parity, Versor};
use crate::Real;

/// `|e123|` below this marks an ideal point (point at infinity).
pub const POINT_AT_INFINITY_TOL: f64 = 1e-9;

pub fn embed_scalar<T: Real>(value: T) -> Multivector<T> {
    Multivector::scalar(value)
}

pub fn embed_pseudoscalar<T: Real>(value: T) -> Multivector<T> {
    Multivector::basis(E0123, value)
}

/// Plane `{x : n.x = d}`.
pub fn embed_plane<T: Real>(normal: [T; 3], offset: T) -> Result<Multivector<T>, GaError> {
    if normal.iter().all(|c| *c == T::zero()) {
        return Err(GaError::Degenerate("plane normal must be nonzero"));
    }
    let mut m = Multivector::zero();
    m[E0] = -offset;
    m[E1] = normal[0];
    m[E2] = normal[1];
    m[E3] = normal[2];
    Ok(m)
}

/// Line with direction `direction` passing through `shift`.
pub fn embed_line<T: Real>(direction: [T; 3], shift: [T; 3]) -> Multivector<T> {
    let [n1, n2, n3] = direction;
    let [s1, s2, s3] = shift;
    let mut m = Multivector::zero();
    m[E01] = s2 * n3 - s3 * n2;
    m[E02] = s3 * n1 - s1 * n3;
    m[E03] = s1 * n2 - s2 * n1;
    m[E12] = n3;
    m[E13] = -n2;
    m[E23] = n1;
    m
}

pub fn embed_point<T: Real>(p: [T; 3]) -> Multivector<T> {
    let mut m = Multivector::zero();
    m[E123] = T::one();
    m[E023] = -p[0];
    m[E013] = p[1];
    m[E012] = -p[2];
    m
}

/// Reflection through the plane `{x : n.x = d}`, as a unit odd versor.
pub fn embed_reflection<T: Real>(normal: [T; 3], offset: T) -> Result<Versor<T>, GaError> {
    let len = (normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]).sqrt();
    if len == T::zero() {
        return Err(GaError::Degenerate("plane normal must be nonzero"));
    }
    let n = normal.map(|c| c / len);
    Versor::new(embed_plane(n, offset / len)?, Parity::Odd)
}

pub fn embed_translation<T: Real>(t: [T; 3]) -> Versor<T> {
    let half = T::from_f64(0.5);
    let mut m = Multivector::scalar(T::one());
    m[E01] = -t[0] * half;
    m[E02] = -t[1] * half;
    m[E03] = -t[2] * half;
    Versor::new(m, Parity::Even).expect("translation is even")
}

/// Rotation given as a unit quaternion `(w, x, y, z)`, acting like `v -> q v q*`.
pub fn embed_rotation<T: Real>(q: [T; 4]) -> Result<Versor<T>, GaError> {
    let n2 = q.iter().fold(T::zero(), |a, c| a + *c * *c);
    if (n2 - T::one()).abs() > T::from_f64(1e-6) {
        return Err(GaError::Degenerate("rotation quaternion must have unit norm"));
    }
    let mut m = Multivector::scalar(q[0]);
    m[E23] = -q[1];
    m[E13] = q[2];
    m[E12] = -q[3];
    Versor::new(m, Parity::Even)
}

pub fn embed_point_reflection<T: Real>(p: [T; 3]) -> Versor<T> {
    Versor::new(embed_point(p), Parity::Odd).expect("point is odd")
}

/// Velocity (or any free vector) as an ideal bivector, oriented like the
/// `e0i` part of a translation but without the factor 1/2.
pub fn embed_velocity<T: Real>(v: [T; 3]) -> Multivector<T> {
    let mut m = Multivector::zero();
    m[E01] = -v[0];
    m[E02] = -v[1];
    m[E03] = -v[2];
    m
}

/// Inverse of [`embed_point`], dividing through by the `e123` weight.
pub fn extract_point<T: Real>(m: &Multivector<T>) -> Result<[T; 3], GaError> {
    let w = m[E123];
    if w.abs().as_f64() < POINT_AT_INFINITY_TOL {
        return Err(GaError::PointAtInfinity(w.abs().as_f64()));
    }
    Ok([-m[E023] / w, m[E013] / w, -m[E012] / w])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::random_versor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rand3(rng: &mut ChaCha8Rng) -> [f64; 3] {
        [0, 1, 2].map(|_| StandardNormal.sample(rng))
    }

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol * (1.0 + b[i].abs()))
    }

    fn act(u: &Versor, p: [f64; 3]) -> [f64; 3] {
        extract_point(&u.sandwich(&embed_point(p)).unwrap()).unwrap()
    }

    #[test]
    fn dictionary_zero_values() {
        assert_eq!(embed_point([0.0; 3]), Multivector::basis(E123, 1.0));
        assert_eq!(*embed_translation([0.0; 3]).mv(), Multivector::scalar(1.0));
    }

    #[test]
    fn point_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = rand3(&mut rng);
            assert_eq!(extract_point(&embed_point(p)).unwrap(), p);
            let scaled = embed_point(p).scale(-3.0);
            assert!(close(extract_point(&scaled).unwrap(), p, 1e-14));
        }
    }

    #[test]
    fn point_at_infinity() {
        let m = embed_velocity([1.0, 2.0, 3.0]).dual();
        assert!(matches!(extract_point(&m), Err(GaError::PointAtInfinity(_))));
    }

    #[test]
    fn translation_moves_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let (p, t) = (rand3(&mut rng), rand3(&mut rng));
            let q = act(&embed_translation(t), p);
            assert!(close(q, [p[0] + t[0], p[1] + t[1], p[2] + t[2]], 1e-13));
        }
    }

    #[test]
    fn reflection_mirrors_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (p, n) = (rand3(&mut rng), rand3(&mut rng));
            let d: f64 = StandardNormal.sample(&mut rng);
            let len2 = n.iter().map(|c| c * c).sum::<f64>();
            let s = 2.0 * ((0..3).map(|i| n[i] * p[i]).sum::<f64>() - d) / len2;
            let expected = [p[0] - s * n[0], p[1] - s * n[1], p[2] - s * n[2]];
            assert!(close(act(&embed_reflection(n, d).unwrap(), p), expected, 1e-12));
        }
    }

    #[test]
    fn rotation_matches_quaternion() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let mut q: [f64; 4] = [0, 1, 2, 3].map(|_| StandardNormal.sample(&mut rng));
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            q.iter_mut().for_each(|c| *c /= n);
            let [w, x, y, z] = q;
            let r = [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ];
            let p = rand3(&mut rng);
            let expected = [0, 1, 2].map(|i| (0..3).map(|j| r[i][j] * p[j]).sum::<f64>());
            assert!(close(act(&embed_rotation(q).unwrap(), p), expected, 1e-12));
        }
        assert!(embed_rotation([2.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn point_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (p, x) = (rand3(&mut rng), rand3(&mut rng));
        let q = act(&embed_point_reflection(p), x);
        assert!(close(q, [0, 1, 2].map(|i| 2.0 * p[i] - x[i]), 1e-12));
    }

    #[test]
    fn line_is_join_of_two_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let (s, n) = (rand3(&mut rng), rand3(&mut rng));
            let q = [s[0] + n[0], s[1] + n[1], s[2] + n[2]];
            let l = embed_point(s).join(&embed_point(q));
            assert!(l.rel_diff(&embed_line(n, s)) < 1e-12);
        }
    }

    #[test]
    fn plane_rejects_zero_normal() {
        assert!(embed_plane([0.0; 3], 1.0).is_err());
        assert!(embed_reflection([0.0; 3], 1.0).is_err());
    }

    #[test]
    fn velocity_is_translation_invariant_and_rotates() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = rand3(&mut rng);
        let t = embed_translation(rand3(&mut rng));
        let m = embed_velocity(v);
        assert!(t.sandwich(&m).unwrap().rel_diff(&m) < 1e-14);
        let u = random_versor(&mut rng, 2, 0.0).unwrap();
        // a rotation through the origin maps the velocity like the difference of two points
        let p0 = act(&u, [0.0; 3]);
        let p1 = act(&u, v);
        let rotated = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        assert!(u.sandwich(&m).unwrap().rel_diff(&embed_velocity(rotated)) < 1e-12);
    }
}
