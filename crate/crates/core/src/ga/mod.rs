//! The projective geometric algebra G(3,0,1).

mod embed;
mod error;
mod multivector;
pub mod tables;
mod versor;

pub use embed::{
    embed_line, embed_plane, embed_point, embed_point_reflection, embed_pseudoscalar,
    embed_reflection, embed_rotation, embed_scalar, embed_translation, embed_velocity,
    extract_point, POINT_AT_INFINITY_TOL,
};
pub use error::GaError;
pub use multivector::{Multivector, GRADE_OF, N_BLADES};
pub(crate) use multivector::bilinear;
pub use tables::{build_cayley_tables, CayleyTable, Entry, Product, Term, PGA};
pub use versor::{apply_matrix as versor_apply_matrix, random_versor, Parity, Versor};

/// Storage indices of the basis blades.
pub mod blade {
    pub const SCALAR: usize = 0;
    pub const E0: usize = 1;
    pub const E1: usize = 2;
    pub const E2: usize = 3;
    pub const E3: usize = 4;
    pub const E01: usize = 5;
    pub const E02: usize = 6;
    pub const E03: usize = 7;
    pub const E12: usize = 8;
    pub const E13: usize = 9;
    pub const E23: usize = 10;
    pub const E012: usize = 11;
    pub const E013: usize = 12;
    pub const E023: usize = 13;
    pub const E123: usize = 14;
    pub const E0123: usize = 15;

    /// Blades without an `e0` factor; the invariant inner product only sees these.
    pub const EUCLIDEAN: [usize; 8] = [SCALAR, E1, E2, E3, E12, E13, E23, E123];
    pub const NAMES: [&str; 16] = [
        "1", "e0", "e1", "e2", "e3", "e01", "e02", "e03", "e12", "e13", "e23", "e012", "e013",
        "e023", "e123", "e0123",
    ];
}
