use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst};

/// Floating point scalar used throughout the crate (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
    fn erf(self) -> Self;

    /// `c <- alpha a b + beta c` for an `m x k` by `k x n` product; each
    /// operand is given by its slice (starting at element `[0, 0]`) and its
    /// `(row, column)` strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        sa: (usize, usize),
        b: &[Self],
        sb: (usize, usize),
        beta: Self,
        c: &mut [Self],
        sc: (usize, usize),
    );

    #[inline]
    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        sa: (usize, usize),
        b: &[Self],
        sb: (usize, usize),
        beta: Self,
        c: &mut [Self],
        sc: (usize, usize),
    ) {
        if m == 0 || n == 0 {
            return;
        }
        assert!(fits(m, n, sc, c.len()), "gemm: output out of bounds");
        if k > 0 {
            assert!(fits(m, k, sa, a.len()) && fits(k, n, sb, b.len()), "gemm: operand out of bounds");
        }
        // SAFETY: every addressed element lies inside its slice (checked
        // above) and `c` is a unique borrow, so it cannot alias `a` or `b`.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                sa.0 as isize,
                sa.1 as isize,
                b.as_ptr(),
                sb.0 as isize,
                sb.1 as isize,
                beta,
                c.as_mut_ptr(),
                sc.0 as isize,
                sc.1 as isize,
            )
        }
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        sa: (usize, usize),
        b: &[Self],
        sb: (usize, usize),
        beta: Self,
        c: &mut [Self],
        sc: (usize, usize),
    ) {
        if m == 0 || n == 0 {
            return;
        }
        assert!(fits(m, n, sc, c.len()), "gemm: output out of bounds");
        if k > 0 {
            assert!(fits(m, k, sa, a.len()) && fits(k, n, sb, b.len()), "gemm: operand out of bounds");
        }
        // SAFETY: every addressed element lies inside its slice (checked
        // above) and `c` is a unique borrow, so it cannot alias `a` or `b`.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                sa.0 as isize,
                sa.1 as isize,
                b.as_ptr(),
                sb.0 as isize,
                sb.1 as isize,
                beta,
                c.as_mut_ptr(),
                sc.0 as isize,
                sc.1 as isize,
            )
        }
    }
}

/// Whether an `rows x cols` view with `strides` stays inside `len` elements.
fn fits(rows: usize, cols: usize, strides: (usize, usize), len: usize) -> bool {
    (rows - 1) * strides.0 + (cols - 1) * strides.1 < len
}
