use std::sync::LazyLock;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::error::shape_err;
use super::{EquiError, MultivectorBatch, ScalarBatch};
use crate::ga::{blade, Multivector, GRADE_OF, N_BLADES, PGA};
use crate::Real;

pub const N_BASIS_MAPS: usize = 9;

/// Number of output components each basis map can populate.
pub const BASIS_OUTPUT_COUNTS: [usize; N_BASIS_MAPS] = [1, 4, 6, 4, 1, 1, 3, 3, 1];

/// One of the nine equivariant linear maps: `<x>_k` for `k = 0..=4`
/// (indices 0-4) and `e0 <x>_k` for `k = 0..=3` (indices 5-8).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisMap(pub usize);

impl BasisMap {
    pub fn apply<T: Real>(&self, x: &Multivector<T>) -> Multivector<T> {
        let mut out = Multivector::zero();
        for t in LINEAR_TERMS.iter().filter(|t| t.basis == self.0) {
            out[t.out] += x[t.inp] * T::from_f64(t.sign as f64);
        }
        out
    }

    pub fn name(&self) -> String {
        if self.0 < 5 {
            format!("<x>_{}", self.0)
        } else {
            format!("e0 <x>_{}", self.0 - 5)
        }
    }
}

pub fn equi_linear_basis() -> [BasisMap; N_BASIS_MAPS] {
    std::array::from_fn(BasisMap)
}

/// `out[out] += sign * w[basis] * x[inp]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LinearTerm {
    pub out: usize,
    pub inp: usize,
    pub basis: usize,
    pub sign: i8,
}

pub(crate) static LINEAR_TERMS: LazyLock<Vec<LinearTerm>> = LazyLock::new(|| {
    let mut terms = Vec::new();
    for i in 0..N_BLADES {
        terms.push(LinearTerm {
            out: i,
            inp: i,
            basis: GRADE_OF[i],
            sign: 1,
        });
    }
    for i in 0..N_BLADES {
        let e = PGA.geometric(blade::E0, i);
        if e.sign != 0 {
            terms.push(LinearTerm {
                out: e.index as usize,
                inp: i,
                basis: 5 + GRADE_OF[i],
                sign: e.sign,
            });
        }
    }
    terms
});

#[derive(Clone, Debug, PartialEq)]
pub struct EquiLinearWeights<T = f64> {
    pub c_out: usize,
    pub c_in: usize,
    /// `[c_out x c_in x 9]`
    pub w: Vec<T>,
    /// `[c_out]`, added to the scalar blade.
    pub bias: Vec<T>,
}

impl<T: Real> EquiLinearWeights<T> {
    pub fn zeros(c_out: usize, c_in: usize) -> Self {
        Self {
            c_out,
            c_in,
            w: vec![T::zero(); c_out * c_in * N_BASIS_MAPS],
            bias: vec![T::zero(); c_out],
        }
    }

    /// Each coefficient of map `b` is drawn from `Normal(0, 1 / (c_in * g_b))`.
    pub fn init<R: Rng + ?Sized>(c_out: usize, c_in: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(c_out, c_in);
        let dists: Vec<Normal<f64>> = BASIS_OUTPUT_COUNTS
            .iter()
            .map(|&g| Normal::new(0.0, (1.0 / (c_in * g) as f64).sqrt()).unwrap())
            .collect();
        for (idx, w) in out.w.iter_mut().enumerate() {
            *w = T::from_f64(dists[idx % N_BASIS_MAPS].sample(rng));
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.bias.len()
    }

    fn check(&self) -> Result<(), EquiError> {
        if self.w.len() != self.c_out * self.c_in * N_BASIS_MAPS || self.bias.len() != self.c_out {
            return Err(shape_err(format!(
                "equi-linear weights for {}x{} have {} coefficients and {} biases",
                self.c_out,
                self.c_in,
                self.w.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

pub fn equi_linear<T: Real>(
    x: &MultivectorBatch<T>,
    weights: &EquiLinearWeights<T>,
) -> Result<MultivectorBatch<T>, EquiError> {
    weights.check()?;
    if x.channels != weights.c_in {
        return Err(shape_err(format!(
            "input has {} channels, weights expect {}",
            x.channels, weights.c_in
        )));
    }
    let mut data = vec![T::zero(); x.rows() * weights.c_out * N_BLADES];
    equi_linear_forward(
        &x.data,
        weights.c_in,
        &weights.w,
        Some(&weights.bias),
        weights.c_out,
        &mut data,
    );
    Ok(MultivectorBatch {
        time: x.time,
        items: x.items,
        channels: weights.c_out,
        data,
    })
}

/// Kernel over rows of `[c_in x 16]` inputs, writing `[c_out x 16]` outputs.
/// Each of the 24 signed terms is one strided matrix product over all rows.
pub fn equi_linear_forward<T: Real>(
    x: &[T],
    c_in: usize,
    w: &[T],
    bias: Option<&[T]>,
    c_out: usize,
    out: &mut [T],
) {
    let rows = x.len() / (c_in * N_BLADES).max(1);
    out.fill(T::zero());
    if rows == 0 {
        return;
    }
    for t in LINEAR_TERMS.iter() {
        T::gemm(
            rows,
            c_in,
            c_out,
            T::from_f64(t.sign as f64),
            &x[t.inp..],
            (c_in * N_BLADES, N_BLADES),
            &w[t.basis..],
            (N_BASIS_MAPS, c_in * N_BASIS_MAPS),
            T::one(),
            &mut out[t.out..],
            (c_out * N_BLADES, N_BLADES),
        );
    }
    if let Some(bias) = bias {
        for row in out.chunks_exact_mut(c_out * N_BLADES) {
            for (co, b) in bias.iter().enumerate() {
                row[co * N_BLADES] += *b;
            }
        }
    }
}

/// Accumulates gradients of [`equi_linear_forward`] into `gx`, `gw` and `gbias`.
#[allow(clippy::too_many_arguments)]
pub fn equi_linear_backward<T: Real>(
    x: &[T],
    c_in: usize,
    w: &[T],
    c_out: usize,
    g: &[T],
    gx: Option<&mut [T]>,
    gw: Option<&mut [T]>,
    gbias: Option<&mut [T]>,
) {
    let rows = g.len() / (c_out * N_BLADES).max(1);
    if rows == 0 {
        return;
    }
    if let Some(gbias) = gbias {
        for row in g.chunks_exact(c_out * N_BLADES) {
            for (co, b) in gbias.iter_mut().enumerate() {
                *b += row[co * N_BLADES];
            }
        }
    }
    if let Some(gx) = gx {
        for t in LINEAR_TERMS.iter() {
            T::gemm(
                rows,
                c_out,
                c_in,
                T::from_f64(t.sign as f64),
                &g[t.out..],
                (c_out * N_BLADES, N_BLADES),
                &w[t.basis..],
                (c_in * N_BASIS_MAPS, N_BASIS_MAPS),
                T::one(),
                &mut gx[t.inp..],
                (c_in * N_BLADES, N_BLADES),
            );
        }
    }
    if let Some(gw) = gw {
        for t in LINEAR_TERMS.iter() {
            T::gemm(
                c_out,
                rows,
                c_in,
                T::from_f64(t.sign as f64),
                &g[t.out..],
                (N_BLADES, c_out * N_BLADES),
                &x[t.inp..],
                (c_in * N_BLADES, N_BLADES),
                T::one(),
                &mut gw[t.basis..],
                (c_in * N_BASIS_MAPS, N_BASIS_MAPS),
            );
        }
    }
}

/// `y[r, o] = sum_i w[o, i] x[r, i] + b[o]`.
pub fn dense_forward<T: Real>(x: &[T], n_in: usize, w: &[T], b: Option<&[T]>, n_out: usize, y: &mut [T]) {
    if n_out == 0 {
        return;
    }
    let rows = y.len() / n_out;
    match b {
        Some(b) => y.chunks_exact_mut(n_out).for_each(|r| r.copy_from_slice(b)),
        None => y.fill(T::zero()),
    }
    if n_in == 0 || rows == 0 {
        return;
    }
    T::gemm(rows, n_in, n_out, T::one(), x, (n_in, 1), w, (1, n_in), T::one(), y, (n_out, 1));
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Real>(
    x: &[T],
    n_in: usize,
    w: &[T],
    n_out: usize,
    g: &[T],
    gx: Option<&mut [T]>,
    gw: Option<&mut [T]>,
    gb: Option<&mut [T]>,
) {
    if n_out == 0 {
        return;
    }
    let rows = g.len() / n_out;
    if let Some(gb) = gb {
        for r in g.chunks_exact(n_out) {
            for (d, v) in gb.iter_mut().zip(r) {
                *d += *v;
            }
        }
    }
    if n_in == 0 || rows == 0 {
        return;
    }
    if let Some(gx) = gx {
        T::gemm(rows, n_out, n_in, T::one(), g, (n_out, 1), w, (n_in, 1), T::one(), gx, (n_in, 1));
    }
    if let Some(gw) = gw {
        T::gemm(n_out, rows, n_in, T::one(), g, (1, n_out), x, (n_in, 1), T::one(), gw, (n_in, 1));
    }
}

/// Linear layer on the joint (multivector, scalar) stream. Scalars mix with
/// the scalar blade in both directions; all other blades only see the
/// equivariant map.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedLinearWeights<T = f64> {
    pub mv: EquiLinearWeights<T>,
    pub s_in: usize,
    pub s_out: usize,
    /// `[c_out x s_in]`, scalars into the scalar blade.
    pub s_to_mv: Vec<T>,
    /// `[s_out x c_in]`, scalar blades into scalars.
    pub mv_to_s: Vec<T>,
    /// `[s_out x s_in]`
    pub ss: Vec<T>,
    /// `[s_out]`
    pub s_bias: Vec<T>,
}

impl<T: Real> MixedLinearWeights<T> {
    pub fn zeros(c_out: usize, c_in: usize, s_out: usize, s_in: usize) -> Self {
        Self {
            mv: EquiLinearWeights::zeros(c_out, c_in),
            s_in,
            s_out,
            s_to_mv: vec![T::zero(); c_out * s_in],
            mv_to_s: vec![T::zero(); s_out * c_in],
            ss: vec![T::zero(); s_out * s_in],
            s_bias: vec![T::zero(); s_out],
        }
    }

    /// Scalar matrices use `Normal(0, 1 / fan_in)` with the fan-in counting
    /// both sources of the output.
    pub fn init<R: Rng + ?Sized>(c_out: usize, c_in: usize, s_out: usize, s_in: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(c_out, c_in, s_out, s_in);
        out.mv = EquiLinearWeights::init(c_out, c_in, rng);
        let to_mv = Normal::new(0.0, (1.0 / (c_in + s_in).max(1) as f64).sqrt()).unwrap();
        let to_s = Normal::new(0.0, (1.0 / (c_in + s_in).max(1) as f64).sqrt()).unwrap();
        for v in out.s_to_mv.iter_mut() {
            *v = T::from_f64(to_mv.sample(rng));
        }
        for v in out.mv_to_s.iter_mut().chain(out.ss.iter_mut()) {
            *v = T::from_f64(to_s.sample(rng));
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.mv.n_params() + self.s_to_mv.len() + self.mv_to_s.len() + self.ss.len() + self.s_bias.len()
    }

    pub fn apply(
        &self,
        x: &MultivectorBatch<T>,
        s: &ScalarBatch<T>,
    ) -> Result<(MultivectorBatch<T>, ScalarBatch<T>), EquiError> {
        if s.channels != self.s_in || s.rows() != x.rows() {
            return Err(shape_err(format!(
                "scalar input [{} x {}] does not match layer ({} rows, {} channels)",
                s.rows(),
                s.channels,
                x.rows(),
                self.s_in
            )));
        }
        let mut y = equi_linear(x, &self.mv)?;
        let rows = x.rows();
        let (c_in, c_out) = (self.mv.c_in, self.mv.c_out);
        let mut extra = vec![T::zero(); rows * c_out];
        dense_forward(&s.data, self.s_in, &self.s_to_mv, None, c_out, &mut extra);
        for (r, e) in extra.iter().enumerate() {
            y.data[r * N_BLADES] += *e;
        }
        let mut ys = vec![T::zero(); rows * self.s_out];
        dense_forward(&s.data, self.s_in, &self.ss, Some(&self.s_bias), self.s_out, &mut ys);
        let blades: Vec<T> = x.data.iter().step_by(N_BLADES).copied().collect();
        let mut from_mv = vec![T::zero(); rows * self.s_out];
        dense_forward(&blades, c_in, &self.mv_to_s, None, self.s_out, &mut from_mv);
        for (a, b) in ys.iter_mut().zip(&from_mv) {
            *a += *b;
        }
        Ok((
            y,
            ScalarBatch {
                time: s.time,
                items: s.items,
                channels: self.s_out,
                data: ys,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::blade::*;

    #[test]
    fn basis_maps_match_definitions() {
        let maps = equi_linear_basis();
        let x = Multivector::from_slice(&[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(maps[0].apply(&x), Multivector::scalar(1.0));
        assert_eq!(maps[5].apply(&Multivector::scalar(1.0)), Multivector::basis(E0, 1.0));
        let y: Multivector = Multivector::from_slice(&(1..=16).map(f64::from).collect::<Vec<_>>());
        for (k, m) in maps.iter().take(5).enumerate() {
            assert_eq!(m.apply(&y), y.grade_projection(k).unwrap());
        }
        for k in 0..4 {
            assert_eq!(maps[5 + k].apply(&y), y.grade_projection(k).unwrap().e0_mul());
        }
    }

    #[test]
    fn basis_maps_have_disjoint_matrix_supports() {
        let mut support = std::collections::HashSet::new();
        let mut counts = [0usize; N_BASIS_MAPS];
        for t in LINEAR_TERMS.iter() {
            assert!(support.insert((t.out, t.inp)), "entry ({}, {}) used twice", t.out, t.inp);
            counts[t.basis] += 1;
        }
        assert_eq!(counts, BASIS_OUTPUT_COUNTS);
    }

    #[test]
    fn one_hot_vector_projection() {
        let mut w = EquiLinearWeights::zeros(1, 1);
        w.w[1] = 1.0;
        let x: Multivector = Multivector::from_slice(&(1..=16).map(f64::from).collect::<Vec<_>>());
        let batch = MultivectorBatch::from_multivectors(1, 1, &[x]).unwrap();
        let y = equi_linear(&batch, &w).unwrap();
        assert_eq!(y.get(0, 0), x.grade_projection(1).unwrap());
    }

    #[test]
    fn bias_only_gives_constant() {
        let mut w = EquiLinearWeights::zeros(2, 3);
        w.bias = vec![1.5, -2.0];
        let batch = MultivectorBatch::new(2, 3, (0..96).map(|v| v as f64).collect()).unwrap();
        let y = equi_linear(&batch, &w).unwrap();
        for r in 0..2 {
            assert_eq!(y.get(r, 0), Multivector::scalar(1.5));
            assert_eq!(y.get(r, 1), Multivector::scalar(-2.0));
        }
    }

    #[test]
    fn kernel_matches_naive_sum() {
        let mut rng = rand::rng();
        let (ci, co) = (3, 2);
        let w = EquiLinearWeights::<f64>::init(co, ci, &mut rng);
        let xs: Vec<Multivector> = (0..ci)
            .map(|_| Multivector::from_slice(&(0..16).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>()))
            .collect();
        let batch = MultivectorBatch::from_multivectors(1, ci, &xs).unwrap();
        let y = equi_linear(&batch, &w).unwrap();
        let maps = equi_linear_basis();
        for o in 0..co {
            let mut expect = Multivector::zero();
            for (c, x) in xs.iter().enumerate() {
                for (b, m) in maps.iter().enumerate() {
                    expect = expect + m.apply(x).scale(w.w[(o * ci + c) * 9 + b]);
                }
            }
            assert!(y.get(0, o).rel_diff(&expect) < 1e-14);
        }
    }
}
