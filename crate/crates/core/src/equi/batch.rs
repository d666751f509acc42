use super::error::shape_err;
use super::EquiError;
use crate::ga::{Multivector, Versor, N_BLADES};
use crate::Real;

/// Activations of shape `[time? x items x channels x 16]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MultivectorBatch<T = f64> {
    pub time: Option<usize>,
    pub items: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

/// Auxiliary scalars of shape `[time? x items x channels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarBatch<T = f64> {
    pub time: Option<usize>,
    pub items: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Real> MultivectorBatch<T> {
    pub fn new(items: usize, channels: usize, data: Vec<T>) -> Result<Self, EquiError> {
        Self::with_time(None, items, channels, data)
    }

    pub fn with_time(
        time: Option<usize>,
        items: usize,
        channels: usize,
        data: Vec<T>,
    ) -> Result<Self, EquiError> {
        if channels == 0 {
            return Err(shape_err("multivector batch needs at least one channel"));
        }
        let rows = time.unwrap_or(1) * items;
        if data.len() != rows * channels * N_BLADES {
            return Err(shape_err(format!(
                "expected {} values for {rows} rows x {channels} channels x 16, got {}",
                rows * channels * N_BLADES,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(EquiError::NonFinite("multivector batch"));
        }
        Ok(Self {
            time,
            items,
            channels,
            data,
        })
    }

    pub fn zeros(items: usize, channels: usize) -> Self {
        Self {
            time: None,
            items,
            channels,
            data: vec![T::zero(); items * channels * N_BLADES],
        }
    }

    pub fn from_multivectors(items: usize, channels: usize, mvs: &[Multivector<T>]) -> Result<Self, EquiError> {
        let data = mvs.iter().flat_map(|m| m.0).collect();
        Self::new(items, channels, data)
    }

    /// Number of leading positions (`time * items`).
    pub fn rows(&self) -> usize {
        self.time.unwrap_or(1) * self.items
    }

    pub fn get(&self, row: usize, channel: usize) -> Multivector<T> {
        let o = (row * self.channels + channel) * N_BLADES;
        Multivector::from_slice(&self.data[o..o + N_BLADES])
    }

    pub fn set(&mut self, row: usize, channel: usize, m: &Multivector<T>) {
        let o = (row * self.channels + channel) * N_BLADES;
        self.data[o..o + N_BLADES].copy_from_slice(&m.0);
    }

    pub fn map(&self, f: impl Fn(&Multivector<T>) -> Multivector<T>) -> Self {
        let mut out = self.clone();
        for chunk in out.data.chunks_exact_mut(N_BLADES) {
            let m = f(&Multivector::from_slice(chunk));
            chunk.copy_from_slice(&m.0);
        }
        out
    }

    /// Sandwich action of `u` on every multivector.
    pub fn transform(&self, u: &Versor<T>) -> Self {
        let m = u.action_matrix().expect("versor must be invertible");
        let mut out = self.clone();
        for chunk in out.data.chunks_exact_mut(N_BLADES) {
            let y = crate::ga::versor_apply_matrix(&m, chunk);
            chunk.copy_from_slice(&y);
        }
        out
    }

    pub fn cast<U: Real>(&self) -> MultivectorBatch<U> {
        MultivectorBatch {
            time: self.time,
            items: self.items,
            channels: self.channels,
            data: self.data.iter().map(|x| U::from_f64(x.as_f64())).collect(),
        }
    }

    /// Max-abs difference divided by `max(1, max_abs(other))`.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        rel_diff(&self.data, &other.data)
    }
}

impl<T: Real> ScalarBatch<T> {
    pub fn new(items: usize, channels: usize, data: Vec<T>) -> Result<Self, EquiError> {
        Self::with_time(None, items, channels, data)
    }

    pub fn with_time(
        time: Option<usize>,
        items: usize,
        channels: usize,
        data: Vec<T>,
    ) -> Result<Self, EquiError> {
        let rows = time.unwrap_or(1) * items;
        if data.len() != rows * channels {
            return Err(shape_err(format!(
                "expected {} scalars for {rows} rows x {channels} channels, got {}",
                rows * channels,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(EquiError::NonFinite("scalar batch"));
        }
        Ok(Self {
            time,
            items,
            channels,
            data,
        })
    }

    pub fn zeros(items: usize, channels: usize) -> Self {
        Self {
            time: None,
            items,
            channels,
            data: vec![T::zero(); items * channels],
        }
    }

    pub fn rows(&self) -> usize {
        self.time.unwrap_or(1) * self.items
    }

    pub fn get(&self, row: usize, channel: usize) -> T {
        self.data[row * self.channels + channel]
    }

    pub fn cast<U: Real>(&self) -> ScalarBatch<U> {
        ScalarBatch {
            time: self.time,
            items: self.items,
            channels: self.channels,
            data: self.data.iter().map(|x| U::from_f64(x.as_f64())).collect(),
        }
    }

    pub fn rel_diff(&self, other: &Self) -> f64 {
        rel_diff(&self.data, &other.data)
    }
}

pub(crate) fn rel_diff<T: Real>(a: &[T], b: &[T]) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    for (x, y) in a.iter().zip(b) {
        diff = diff.max((x.as_f64() - y.as_f64()).abs());
        scale = scale.max(y.as_f64().abs());
    }
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    diff / scale
}
