use super::MultivectorBatch;
use crate::ga::{blade, N_BLADES};
use crate::Real;

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Divides each row by `sqrt(mean_c <x_c, x_c> + eps)`.
pub fn mv_layer_norm<T: Real>(x: &MultivectorBatch<T>, eps: T) -> MultivectorBatch<T> {
    let mut out = x.clone();
    mv_layer_norm_forward(&x.data, x.channels, eps, &mut out.data);
    out
}

fn row_scale<T: Real>(row: &[T], channels: usize, eps: T) -> T {
    let mut acc = T::zero();
    for c in 0..channels {
        for &b in &blade::EUCLIDEAN {
            let v = row[c * N_BLADES + b];
            acc += v * v;
        }
    }
    (acc / T::from_usize(channels) + eps).sqrt()
}

pub fn mv_layer_norm_forward<T: Real>(x: &[T], channels: usize, eps: T, out: &mut [T]) {
    let width = channels * N_BLADES;
    for (xr, or) in x.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        let inv = T::one() / row_scale(xr, channels, eps);
        for (o, v) in or.iter_mut().zip(xr) {
            *o = *v * inv;
        }
    }
}

pub fn mv_layer_norm_backward<T: Real>(x: &[T], channels: usize, eps: T, g: &[T], gx: &mut [T]) {
    let width = channels * N_BLADES;
    for ((xr, gr), dst) in x
        .chunks_exact(width)
        .zip(g.chunks_exact(width))
        .zip(gx.chunks_exact_mut(width))
    {
        let s = row_scale(xr, channels, eps);
        let inv = T::one() / s;
        let mut gx_dot = T::zero();
        for (a, b) in gr.iter().zip(xr) {
            gx_dot += *a * *b;
        }
        // d/dx of (ms + eps)^(-1/2), ms = mean of Euclidean squares.
        let coef = -gx_dot * inv * inv * inv / T::from_usize(channels);
        for (d, gv) in dst.iter_mut().zip(gr) {
            *d += *gv * inv;
        }
        for c in 0..channels {
            for &b in &blade::EUCLIDEAN {
                dst[c * N_BLADES + b] += coef * xr[c * N_BLADES + b];
            }
        }
    }
}

/// Standard layer norm over the last axis of width `n`, without affine.
pub fn layer_norm_forward<T: Real>(x: &[T], n: usize, eps: T, out: &mut [T]) {
    for (xr, or) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
        let (mean, inv) = moments(xr, eps);
        for (o, v) in or.iter_mut().zip(xr) {
            *o = (*v - mean) * inv;
        }
    }
}

fn moments<T: Real>(xr: &[T], eps: T) -> (T, T) {
    let n = T::from_usize(xr.len());
    let mean = xr.iter().copied().sum::<T>() / n;
    let var = xr.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / n;
    (mean, T::one() / (var + eps).sqrt())
}

pub fn layer_norm_backward<T: Real>(x: &[T], n: usize, eps: T, g: &[T], gx: &mut [T]) {
    let nf = T::from_usize(n);
    for ((xr, gr), dst) in x.chunks_exact(n).zip(g.chunks_exact(n)).zip(gx.chunks_exact_mut(n)) {
        let (mean, inv) = moments(xr, eps);
        let gmean = gr.iter().copied().sum::<T>() / nf;
        let mut gdot = T::zero();
        for (gv, xv) in gr.iter().zip(xr) {
            gdot += *gv * (*xv - mean) * inv;
        }
        gdot /= nf;
        for ((d, gv), xv) in dst.iter_mut().zip(gr).zip(xr) {
            *d += inv * (*gv - gmean - (*xv - mean) * inv * gdot);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::Multivector;

    #[test]
    fn unit_examples() {
        let m = Multivector::basis(blade::E1, 2.0);
        let x = MultivectorBatch::from_multivectors(1, 1, &[m]).unwrap();
        assert_eq!(mv_layer_norm(&x, 0.0).get(0, 0), Multivector::basis(blade::E1, 1.0));
        let ideal = Multivector::basis(blade::E01, 3.0) + Multivector::basis(blade::E0123, -1.0);
        let x = MultivectorBatch::from_multivectors(1, 1, &[ideal]).unwrap();
        let y = mv_layer_norm(&x, 1e-6).get(0, 0);
        assert!(y.rel_diff(&ideal.scale(1e3)) < 1e-12);
    }
}
