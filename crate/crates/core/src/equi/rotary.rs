use super::{EquiError, ScalarBatch};
use crate::Real;

/// Rotates channel pairs `(2j, 2j+1)` by `position * base^(-2j/dim)`.
///
/// `x` is `[groups x positions.len() x dim]`. With `inverse` the rotation is
/// transposed, which is also the backward pass.
pub fn rotary_apply<T: Real>(x: &[T], dim: usize, positions: &[f64], base: f64, inverse: bool, out: &mut [T]) {
    let n = positions.len();
    let half = dim / 2;
    let freqs: Vec<f64> = (0..half).map(|j| base.powf(-2.0 * j as f64 / dim as f64)).collect();
    let mut table = Vec::with_capacity(n * half);
    for &p in positions {
        for &f in &freqs {
            let (s, c) = (p * f).sin_cos();
            table.push((T::from_f64(c), T::from_f64(if inverse { -s } else { s })));
        }
    }
    for (row_idx, (xr, or)) in x.chunks_exact(dim).zip(out.chunks_exact_mut(dim)).enumerate() {
        let pos = row_idx % n;
        for j in 0..half {
            let (c, s) = table[pos * half + j];
            let (a, b) = (xr[2 * j], xr[2 * j + 1]);
            or[2 * j] = c * a - s * b;
            or[2 * j + 1] = s * a + c * b;
        }
    }
}

/// Rotary embedding of scalar queries or keys; `s.items` must equal
/// `positions.len()` (any time axis acts as a batch axis).
pub fn rotary_embed<T: Real>(s: &ScalarBatch<T>, positions: &[f64], base: f64) -> Result<ScalarBatch<T>, EquiError> {
    if !s.channels.is_multiple_of(2) {
        return Err(EquiError::OddChannels(s.channels));
    }
    if positions.len() != s.items {
        return Err(super::error::shape_err(format!(
            "{} positions for {} items",
            positions.len(),
            s.items
        )));
    }
    let mut out = s.clone();
    rotary_apply(&s.data, s.channels, positions, base, false, &mut out.data);
    Ok(out)
}
