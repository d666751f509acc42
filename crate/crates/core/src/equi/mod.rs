//! E(3)-equivariant layers over batches of multivectors.
//!
//! Each layer is exposed twice: as a function over [`MultivectorBatch`] /
//! [`ScalarBatch`] and as a slice kernel (with its backward pass) that the
//! autodiff tape calls. Both share the same code path.

mod attention;
mod batch;
mod bilinear;
mod error;
mod linear;
mod nonlin;
mod norm;
mod rotary;

pub use attention::{
    attention_apply, attention_apply_backward, attention_weights, attention_weights_backward,
    multi_head_attention, mv_attention, AttentionParams, AttnShape,
};
pub use batch::{MultivectorBatch, ScalarBatch};
pub use bilinear::{
    bilinear_backward, bilinear_forward, equi_join_backward, equi_join_forward,
    geometric_bilinear, reference_multivector,
};
pub use error::EquiError;
pub use linear::{
    dense_backward, dense_forward, equi_linear, equi_linear_backward, equi_linear_basis,
    equi_linear_forward, BasisMap, EquiLinearWeights, MixedLinearWeights, BASIS_OUTPUT_COUNTS,
    N_BASIS_MAPS,
};
pub use nonlin::{gated_gelu, gated_gelu_backward, gated_gelu_forward, gelu, gelu_grad};
pub use norm::{
    layer_norm_backward, layer_norm_forward, mv_layer_norm, mv_layer_norm_backward,
    mv_layer_norm_forward, LAYER_NORM_EPS,
};
pub use rotary::{rotary_apply, rotary_embed};
