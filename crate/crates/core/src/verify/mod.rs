//! Property suites: algebraic identities, equivariance of every layer, and
//! reverse-mode gradients against finite differences.

mod algebra;
mod equivariance;
mod gradients;
mod nullspace;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub use algebra::{algebra_suite, reference_blade_product};
pub use equivariance::{equivariance_suite, test_versors};
pub use gradients::{block_gradient_check, gradient_equivariance, gradient_suite, op_gradient_check};
pub use nullspace::{equivariant_map_space, linear_basis_suite, NullSpace};

use crate::equi::MultivectorBatch;
use crate::ga::Versor;
use crate::Real;

/// Outcome of one property over all its trials.
#[derive(Clone, Debug, PartialEq)]
pub struct Property {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub trials: usize,
}

impl Property {
    pub fn new(name: impl Into<String>, max_error: f64, tolerance: f64, trials: usize) -> Self {
        Self {
            name: name.into(),
            max_error,
            tolerance,
            trials,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_error.is_finite() && self.max_error <= self.tolerance
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<58} max_error={:.3e} tol={:.1e} trials={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.max_error,
            self.tolerance,
            self.trials
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Equivariance,
    Gradients,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "algebra" => Ok(Suite::Algebra),
            "equivariance" => Ok(Suite::Equivariance),
            "gradients" => Ok(Suite::Gradients),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct VerifyOptions {
    /// Overrides the per-suite default number of random instances.
    pub trials: Option<usize>,
    /// Overrides every property's tolerance.
    pub tolerance: Option<f64>,
    pub seed: u64,
}


impl VerifyOptions {
    pub(crate) fn trials_or(&self, default: usize) -> usize {
        self.trials.unwrap_or(default).max(1)
    }

    pub(crate) fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: &'static str,
    pub properties: Vec<Property>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(Property::passed)
    }
}

/// Runs the selected suites in order.
pub fn run(suite: Suite, options: &VerifyOptions) -> Vec<SuiteReport> {
    let mut out = Vec::new();
    let mut timed = |name: &'static str, f: &dyn Fn(&VerifyOptions) -> Vec<Property>| {
        let start = Instant::now();
        let properties = f(options);
        out.push(SuiteReport {
            name,
            properties,
            elapsed: start.elapsed(),
        });
    };
    if matches!(suite, Suite::Algebra | Suite::All) {
        timed("algebra", &|o| {
            let mut p = algebra_suite(o);
            p.extend(linear_basis_suite(o));
            p
        });
    }
    if matches!(suite, Suite::Equivariance | Suite::All) {
        timed("equivariance", &equivariance_suite);
    }
    if matches!(suite, Suite::Gradients | Suite::All) {
        timed("gradients", &gradient_suite);
    }
    out
}

/// `max |a - b| / max(|a|, |b|)` over all entries.
pub fn rel_error<T: Real>(a: &[T], b: &[T]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        if !x.is_finite() || !y.is_finite() {
            return f64::INFINITY;
        }
        diff = diff.max((x - y).abs());
        scale = scale.max(x.abs()).max(y.abs());
    }
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

/// Applies `u` in double precision, then rounds back to `T`.
pub fn transform_batch<T: Real>(x: &MultivectorBatch<T>, u: &Versor<f64>) -> MultivectorBatch<T> {
    x.cast::<f64>().transform(u).cast()
}
