use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("{what} ({count}) must be divisible by n_heads ({heads})")]
    Heads {
        what: &'static str,
        count: usize,
        heads: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Architecture of the network. Hidden MLP widths are
/// `mlp_expansion * n_mv_channels` multivectors and
/// `mlp_scalar_expansion * n_scalar_channels` scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatrConfig {
    pub n_blocks: usize,
    pub n_mv_channels: usize,
    pub n_scalar_channels: usize,
    pub n_heads: usize,
    pub mlp_expansion: usize,
    pub mlp_scalar_expansion: usize,
    pub axial: bool,
    pub rotary_base: f64,
    pub seed: u64,
    pub in_mv_channels: usize,
    pub in_scalar_channels: usize,
    pub out_mv_channels: usize,
    pub out_scalar_channels: usize,
}

impl Default for GatrConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl GatrConfig {
    /// Small model used for the desk-scale experiments.
    pub fn desk() -> Self {
        Self {
            n_blocks: 3,
            n_mv_channels: 8,
            n_scalar_channels: 32,
            n_heads: 8,
            mlp_expansion: 2,
            mlp_scalar_expansion: 2,
            axial: false,
            rotary_base: 10_000.0,
            seed: 0,
            in_mv_channels: 2,
            in_scalar_channels: 1,
            out_mv_channels: 1,
            out_scalar_channels: 1,
        }
    }

    /// Full-size n-body configuration (10 blocks, 16 + 128 channels, 8 heads).
    pub fn reference() -> Self {
        Self {
            n_blocks: 10,
            n_mv_channels: 16,
            n_scalar_channels: 128,
            ..Self::desk()
        }
    }

    pub fn hidden_mv(&self) -> usize {
        self.mlp_expansion * self.n_mv_channels
    }

    pub fn hidden_scalars(&self) -> usize {
        self.mlp_scalar_expansion * self.n_scalar_channels
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("n_mv_channels", self.n_mv_channels),
            ("n_scalar_channels", self.n_scalar_channels),
            ("n_heads", self.n_heads),
            ("mlp_expansion", self.mlp_expansion),
            ("mlp_scalar_expansion", self.mlp_scalar_expansion),
            ("in_mv_channels", self.in_mv_channels),
            ("in_scalar_channels", self.in_scalar_channels),
            ("out_mv_channels", self.out_mv_channels),
            ("out_scalar_channels", self.out_scalar_channels),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        for (what, count) in [
            ("n_mv_channels", self.n_mv_channels),
            ("n_scalar_channels", self.n_scalar_channels),
        ] {
            if count % self.n_heads != 0 {
                return Err(ConfigError::Heads {
                    what,
                    count,
                    heads: self.n_heads,
                });
            }
        }
        if !self.hidden_mv().is_multiple_of(2) {
            return Err(ConfigError::Invalid(format!(
                "hidden multivector width {} must be even",
                self.hidden_mv()
            )));
        }
        if self.axial && !(self.n_scalar_channels / self.n_heads).is_multiple_of(2) {
            return Err(ConfigError::Invalid(
                "rotary embeddings need an even number of scalar channels per head".into(),
            ));
        }
        if !(self.rotary_base > 1.0) {
            return Err(ConfigError::Invalid(format!("rotary_base {} must exceed 1", self.rotary_base)));
        }
        Ok(())
    }
}
