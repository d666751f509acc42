use super::error::shape_err;
use super::{EquiError, MultivectorBatch};
use crate::ga::tables::{Term, GP_TERMS, JOIN_TERMS};
use crate::ga::{blade, Multivector, N_BLADES};
use crate::Real;

/// Applies a table-driven product to aligned multivector arrays.
pub fn bilinear_forward<T: Real>(terms: &[Term], x: &[T], y: &[T], out: &mut [T]) {
    for ((a, b), o) in x
        .chunks_exact(N_BLADES)
        .zip(y.chunks_exact(N_BLADES))
        .zip(out.chunks_exact_mut(N_BLADES))
    {
        o.fill(T::zero());
        crate::ga::bilinear(terms, a, b, o);
    }
}

/// Transpose of [`bilinear_forward`] in each argument, accumulated.
pub fn bilinear_backward<T: Real>(
    terms: &[Term],
    x: &[T],
    y: &[T],
    g: &[T],
    mut gx: Option<&mut [T]>,
    mut gy: Option<&mut [T]>,
) {
    for (n, gc) in g.chunks_exact(N_BLADES).enumerate() {
        let a = &x[n * N_BLADES..(n + 1) * N_BLADES];
        let b = &y[n * N_BLADES..(n + 1) * N_BLADES];
        for t in terms {
            let gk = gc[t.k as usize];
            if gk == T::zero() {
                continue;
            }
            let s = if t.sign > 0 { gk } else { -gk };
            if let Some(gx) = gx.as_deref_mut() {
                gx[n * N_BLADES + t.i as usize] += s * b[t.j as usize];
            }
            if let Some(gy) = gy.as_deref_mut() {
                gy[n * N_BLADES + t.j as usize] += s * a[t.i as usize];
            }
        }
    }
}

/// Join scaled by the pseudoscalar coefficient of a per-group reference.
/// `x` and `y` hold `groups` equal blocks; `reference` is `[groups x 16]`.
pub fn equi_join_forward<T: Real>(x: &[T], y: &[T], reference: &[T], out: &mut [T]) {
    let groups = reference.len() / N_BLADES;
    let per = x.len() / groups.max(1);
    bilinear_forward(&JOIN_TERMS, x, y, out);
    for g in 0..groups {
        let s = reference[g * N_BLADES + blade::E0123];
        for v in out[g * per..(g + 1) * per].iter_mut() {
            *v *= s;
        }
    }
}

pub fn equi_join_backward<T: Real>(
    x: &[T],
    y: &[T],
    reference: &[T],
    g: &[T],
    gx: Option<&mut [T]>,
    gy: Option<&mut [T]>,
    gref: Option<&mut [T]>,
) {
    let groups = reference.len() / N_BLADES;
    let per = x.len() / groups.max(1);
    let mut scaled = g.to_vec();
    for gi in 0..groups {
        let s = reference[gi * N_BLADES + blade::E0123];
        for v in scaled[gi * per..(gi + 1) * per].iter_mut() {
            *v *= s;
        }
    }
    bilinear_backward(&JOIN_TERMS, x, y, &scaled, gx, gy);
    if let Some(gref) = gref {
        let mut j = vec![T::zero(); x.len()];
        bilinear_forward(&JOIN_TERMS, x, y, &mut j);
        for gi in 0..groups {
            let mut acc = T::zero();
            for (a, b) in j[gi * per..(gi + 1) * per].iter().zip(&g[gi * per..(gi + 1) * per]) {
                acc += *a * *b;
            }
            gref[gi * N_BLADES + blade::E0123] += acc;
        }
    }
}

/// Channel-wise concatenation of `x_c y_c` and `EquiJoin(x_c, y_c; ref)`.
pub fn geometric_bilinear<T: Real>(
    x: &MultivectorBatch<T>,
    y: &MultivectorBatch<T>,
    reference: &Multivector<T>,
) -> Result<MultivectorBatch<T>, EquiError> {
    if x.items != y.items || x.channels != y.channels || x.time != y.time {
        return Err(shape_err(format!(
            "bilinear operands differ: {}x{} vs {}x{}",
            x.rows(),
            x.channels,
            y.rows(),
            y.channels
        )));
    }
    let n = x.data.len();
    let mut gp = vec![T::zero(); n];
    let mut join = vec![T::zero(); n];
    bilinear_forward(&GP_TERMS, &x.data, &y.data, &mut gp);
    equi_join_forward(&x.data, &y.data, &reference.0, &mut join);
    let row = x.channels * N_BLADES;
    let mut data = Vec::with_capacity(2 * n);
    for r in 0..x.rows() {
        data.extend_from_slice(&gp[r * row..(r + 1) * row]);
        data.extend_from_slice(&join[r * row..(r + 1) * row]);
    }
    Ok(MultivectorBatch {
        time: x.time,
        items: x.items,
        channels: 2 * x.channels,
        data,
    })
}

/// Mean over all rows and channels.
pub fn reference_multivector<T: Real>(x: &MultivectorBatch<T>) -> Multivector<T> {
    let mut acc = Multivector::zero();
    let n = x.data.len() / N_BLADES;
    for chunk in x.data.chunks_exact(N_BLADES) {
        for (a, b) in acc.0.iter_mut().zip(chunk) {
            *a += *b;
        }
    }
    acc.scale(T::one() / T::from_usize(n.max(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(values: &[f64], channels: usize) -> MultivectorBatch {
        MultivectorBatch::new(values.len() / (16 * channels), channels, values.to_vec()).unwrap()
    }

    #[test]
    fn identity_operand_copies_first_half() {
        let x = batch(&(0..64).map(|v| v as f64 * 0.1).collect::<Vec<_>>(), 2);
        let ones = x.map(|_| Multivector::scalar(1.0));
        let out = geometric_bilinear(&x, &ones, &Multivector::basis(blade::E0123, 1.0)).unwrap();
        assert_eq!(out.channels, 4);
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(out.get(r, c), x.get(r, c));
            }
        }
    }

    #[test]
    fn zero_reference_kills_join_half() {
        let x = batch(&(0..32).map(|v| v as f64 + 1.0).collect::<Vec<_>>(), 1);
        let y = batch(&(0..32).map(|v| 3.0 - v as f64).collect::<Vec<_>>(), 1);
        let mut r = Multivector::scalar(2.0);
        r[blade::E123] = 5.0;
        let out = geometric_bilinear(&x, &y, &r).unwrap();
        for row in 0..2 {
            assert_eq!(out.get(row, 1), Multivector::zero());
        }
    }
}
