use super::MultivectorBatch;
use crate::ga::N_BLADES;
use crate::Real;

/// `x * Phi(x)` with the exact normal CDF.
pub fn gelu<T: Real>(x: T) -> T {
    let half = T::from_f64(0.5);
    half * x * (T::one() + (x * T::FRAC_1_SQRT_2()).erf())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let half = T::from_f64(0.5);
    let cdf = half * (T::one() + (x * T::FRAC_1_SQRT_2()).erf());
    let pdf = (-half * x * x).exp() * T::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    cdf + x * pdf
}

/// Scales every multivector by GELU of its own scalar blade.
pub fn gated_gelu<T: Real>(x: &MultivectorBatch<T>) -> MultivectorBatch<T> {
    let mut out = x.clone();
    gated_gelu_forward(&x.data, &mut out.data);
    out
}

pub fn gated_gelu_forward<T: Real>(x: &[T], out: &mut [T]) {
    for (a, o) in x.chunks_exact(N_BLADES).zip(out.chunks_exact_mut(N_BLADES)) {
        let gate = gelu(a[0]);
        for (dst, v) in o.iter_mut().zip(a) {
            *dst = gate * *v;
        }
    }
}

pub fn gated_gelu_backward<T: Real>(x: &[T], g: &[T], gx: &mut [T]) {
    for ((a, gc), dst) in x
        .chunks_exact(N_BLADES)
        .zip(g.chunks_exact(N_BLADES))
        .zip(gx.chunks_exact_mut(N_BLADES))
    {
        let gate = gelu(a[0]);
        let mut proj = T::zero();
        for (gv, av) in gc.iter().zip(a) {
            proj += *gv * *av;
        }
        for (d, gv) in dst.iter_mut().zip(gc) {
            *d += gate * *gv;
        }
        dst[0] += proj * gelu_grad(a[0]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::Multivector;

    #[test]
    fn gelu_reference_values() {
        assert_eq!(gelu(0.0f64), 0.0);
        // Phi(1) = 0.841344746068543
        assert!((gelu(1.0f64) - 0.841344746068543).abs() < 1e-15);
        assert!((gelu(-1.0f64) + 0.158655253931457).abs() < 1e-15);
        let h = 1e-6;
        for x in [-2.0f64, -0.3, 0.0, 0.7, 3.0] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn gate_behaviour() {
        let mut m = Multivector::from_slice(&(0..16).map(|v| v as f64).collect::<Vec<_>>());
        let x = MultivectorBatch::from_multivectors(1, 1, &[m]).unwrap();
        assert_eq!(gated_gelu(&x).get(0, 0), Multivector::zero());
        m[0] = 40.0;
        let x = MultivectorBatch::from_multivectors(1, 1, &[m]).unwrap();
        assert!(gated_gelu(&x).get(0, 0).rel_diff(&m.scale(40.0)) < 1e-12);
    }
}
