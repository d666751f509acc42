use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Property, VerifyOptions};
use crate::equi::equi_linear_basis;
use crate::ga::{build_cayley_tables, CayleyTable, Multivector};

/// Numerically recovered space of linear maps commuting with the versor action.
#[derive(Clone, Debug)]
pub struct NullSpace {
    pub dim: usize,
    /// Orthonormal columns spanning the space; column entries are the
    /// row-major `dim x dim` matrix of a map.
    pub basis: DMatrix<f64>,
    /// Largest eigenvalue counted as zero and smallest one counted as nonzero,
    /// relative to the largest eigenvalue.
    pub largest_null: f64,
    pub smallest_nonnull: f64,
}

fn gp(table: &CayleyTable, a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = table.dim();
    let mut out = vec![0.0; n];
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            let e = table.geometric(i, j);
            if e.sign != 0 {
                out[e.index as usize] += e.sign as f64 * a[i] * b[j];
            }
        }
    }
    out
}

fn reverse(table: &CayleyTable, a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .map(|(i, v)| if (table.grade(i) / 2) % 2 == 1 { -v } else { *v })
        .collect()
}

fn involute(table: &CayleyTable, a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .map(|(i, v)| if table.grade(i) % 2 == 1 { -v } else { *v })
        .collect()
}

/// Action matrix of a product of `k` random vectors in the algebra of `table`.
fn random_action<R: Rng>(table: &CayleyTable, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = table.dim();
    let mut u = vec![0.0; n];
    u[0] = 1.0;
    for _ in 0..k {
        let mut v = vec![0.0; n];
        let mut norm = 0.0;
        for b in 0..table.n_vectors() {
            let idx = table.index_of_mask(1 << b);
            let c: f64 = rng.sample(StandardNormal);
            v[idx] = c;
            norm += table.metric()[b] as f64 * c * c;
        }
        for (i, x) in v.iter_mut().enumerate() {
            if table.grade(i) == 1 {
                *x /= norm.abs().sqrt();
            }
        }
        u = gp(table, &u, &v);
    }
    let ur = reverse(table, &u);
    let s = gp(table, &u, &ur)[0];
    let inv: Vec<f64> = ur.iter().map(|x| x / s).collect();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if k % 2 == 1 {
            e = involute(table, &e);
        }
        let col = gp(table, &gp(table, &u, &e), &inv);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// Stacks `R phi - phi R = 0` for `n_versors` random versors (alternating
/// even and odd, 1-4 factors) and returns the null space.
pub fn equivariant_map_space(table: &CayleyTable, n_versors: usize, seed: u64) -> NullSpace {
    let n = table.dim();
    let nn = n * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gram = DMatrix::<f64>::zeros(nn, nn);
    for t in 0..n_versors {
        let r = random_action(table, 1 + t % 4, &mut rng);
        let mut a = DMatrix::<f64>::zeros(nn, nn);
        for i in 0..n {
            for j in 0..n {
                let row = i * n + j;
                for c in 0..n {
                    // (R phi)_ij picks phi_cj, (phi R)_ij picks phi_ic.
                    a[(row, c * n + j)] += r[(i, c)];
                    a[(row, i * n + c)] -= r[(c, j)];
                }
            }
        }
        gram += a.transpose() * &a;
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..nn).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let top = eig.eigenvalues[order[nn - 1]].max(f64::MIN_POSITIVE);
    let rel: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i] / top).collect();
    let dim = rel.iter().take_while(|&&v| v < 1e-10).count();
    let mut basis = DMatrix::zeros(nn, dim);
    for (col, &i) in order.iter().take(dim).enumerate() {
        basis.set_column(col, &eig.eigenvectors.column(i));
    }
    NullSpace {
        dim,
        basis,
        largest_null: if dim > 0 { rel[dim - 1].max(0.0) } else { 0.0 },
        smallest_nonnull: rel.get(dim).copied().unwrap_or(0.0),
    }
}

/// Sine of the largest principal angle between two subspaces with
/// orthonormal column bases.
fn subspace_sine(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    if q1.ncols() != q2.ncols() {
        return 1.0;
    }
    let residual = q2 - q1 * (q1.transpose() * q2);
    residual.singular_values().max()
}

/// Orthonormal basis of the nine declared maps.
fn declared_basis() -> DMatrix<f64> {
    let maps = equi_linear_basis();
    let mut q = DMatrix::zeros(256, maps.len());
    for (col, m) in maps.iter().enumerate() {
        for j in 0..16 {
            let image = m.apply(&Multivector::basis(j, 1.0));
            for i in 0..16 {
                q[(i * 16 + j, col)] = image[i];
            }
        }
        let norm = q.column(col).norm();
        q.column_mut(col).scale_mut(1.0 / norm);
    }
    q
}

pub fn linear_basis_suite(options: &VerifyOptions) -> Vec<Property> {
    let pga = equivariant_map_space(&build_cayley_tables(), 20, options.seed);
    let euclidean = equivariant_map_space(&CayleyTable::new(&[1, 1, 1]), 20, options.seed + 1);
    let sine = subspace_sine(&pga.basis, &declared_basis());
    vec![
        Property::new(
            "equivariant linear maps, null-space dim - 9 (PGA)",
            (pga.dim as f64 - 9.0).abs(),
            0.0,
            20,
        ),
        Property::new("null space vs declared basis maps (sin angle)", sine, options.tol(1e-8), 20),
        Property::new(
            "equivariant linear maps, null-space dim - 4 (Euclidean)",
            (euclidean.dim as f64 - 4.0).abs(),
            0.0,
            20,
        ),
    ]
}
