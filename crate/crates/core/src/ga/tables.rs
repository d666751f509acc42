//! Sign/index tables for the products of a (possibly degenerate) Clifford
//! algebra with an orthogonal basis.
//!
//! Basis blades are stored grade by grade and lexicographically within a
//! grade. For G(3,0,1) with basis vectors `e0, e1, e2, e3` this gives
//! `[1, e0, e1, e2, e3, e01, e02, e03, e12, e13, e23, e012, e013, e023, e123, e0123]`.
//! A blade's bitmask has bit `i` set when `e_i` is a factor; the positive
//! orientation is the one with ascending factor indices.

use std::fmt::Write as _;
use std::sync::LazyLock;

/// Result of multiplying two basis blades: `sign * blade[index]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub index: u8,
    pub sign: i8,
}

/// A nonzero term `out[k] += sign * a[i] * b[j]` of a bilinear product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Term {
    pub i: u8,
    pub j: u8,
    pub k: u8,
    pub sign: i8,
}

#[derive(Clone, Debug)]
pub struct CayleyTable {
    metric: Vec<i8>,
    masks: Vec<u8>,
    index_of_mask: Vec<u8>,
    geometric: Vec<Entry>,
    wedge: Vec<Entry>,
    join: Vec<Entry>,
    dual: Vec<Entry>,
    dual_inverse: Vec<Entry>,
}

/// Sign of reordering the concatenated factor list of `a` then `b` into
/// ascending order (before any contraction).
fn reorder_sign(a: u8, b: u8) -> i8 {
    let mut swaps = 0u32;
    let mut rest = a >> 1;
    while rest != 0 {
        swaps += (rest & b).count_ones();
        rest >>= 1;
    }
    if swaps.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

impl CayleyTable {
    /// Builds the tables for the algebra whose basis vectors square to
    /// `metric[i]` (each in {-1, 0, 1}).
    pub fn new(metric: &[i8]) -> Self {
        let n = metric.len();
        assert!(n <= 7, "at most 7 basis vectors are supported");
        let dim = 1usize << n;
        let mut masks: Vec<u8> = (0..dim as u8).collect();
        masks.sort_by_key(|&m| {
            let factors: Vec<u8> = (0..n as u8).filter(|b| m & (1 << b) != 0).collect();
            (m.count_ones(), factors)
        });
        let mut index_of_mask = vec![0u8; dim];
        for (idx, &m) in masks.iter().enumerate() {
            index_of_mask[m as usize] = idx as u8;
        }

        let mut geometric = Vec::with_capacity(dim * dim);
        let mut wedge = Vec::with_capacity(dim * dim);
        for &a in &masks {
            for &b in &masks {
                let index = index_of_mask[(a ^ b) as usize];
                let mut sign = reorder_sign(a, b);
                let common = a & b;
                for (bit, &sq) in metric.iter().enumerate() {
                    if common & (1 << bit) != 0 {
                        sign *= sq;
                    }
                }
                geometric.push(Entry { index, sign });
                let wsign = if common == 0 { reorder_sign(a, b) } else { 0 };
                wedge.push(Entry { index, sign: wsign });
            }
        }

        // Right complement: blade ^ dual(blade) = pseudoscalar.
        let full = (dim - 1) as u8;
        let mut dual = Vec::with_capacity(dim);
        let mut dual_inverse = vec![Entry { index: 0, sign: 0 }; dim];
        for (idx, &m) in masks.iter().enumerate() {
            let comp = full ^ m;
            let sign = reorder_sign(m, comp);
            let cidx = index_of_mask[comp as usize];
            dual.push(Entry { index: cidx, sign });
            dual_inverse[cidx as usize] = Entry {
                index: idx as u8,
                sign,
            };
        }

        let mut join = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let di = dual[i];
                let dj = dual[j];
                let w = wedge[di.index as usize * dim + dj.index as usize];
                let back = dual_inverse[w.index as usize];
                join.push(Entry {
                    index: back.index,
                    sign: di.sign * dj.sign * w.sign * back.sign,
                });
            }
        }

        Self {
            metric: metric.to_vec(),
            masks,
            index_of_mask,
            geometric,
            wedge,
            join,
            dual,
            dual_inverse,
        }
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn n_vectors(&self) -> usize {
        self.metric.len()
    }

    pub fn metric(&self) -> &[i8] {
        &self.metric
    }

    /// Bitmask of the blade stored at `index`.
    pub fn mask(&self, index: usize) -> u8 {
        self.masks[index]
    }

    pub fn index_of_mask(&self, mask: u8) -> usize {
        self.index_of_mask[mask as usize] as usize
    }

    pub fn grade(&self, index: usize) -> usize {
        self.masks[index].count_ones() as usize
    }

    pub fn geometric(&self, i: usize, j: usize) -> Entry {
        self.geometric[i * self.dim() + j]
    }

    pub fn wedge(&self, i: usize, j: usize) -> Entry {
        self.wedge[i * self.dim() + j]
    }

    pub fn join(&self, i: usize, j: usize) -> Entry {
        self.join[i * self.dim() + j]
    }

    pub fn dual(&self, i: usize) -> Entry {
        self.dual[i]
    }

    pub fn dual_inverse(&self, i: usize) -> Entry {
        self.dual_inverse[i]
    }

    /// Nonzero terms of a product table, ordered by output index.
    pub fn terms(&self, product: Product) -> Vec<Term> {
        let dim = self.dim();
        let table = match product {
            Product::Geometric => &self.geometric,
            Product::Wedge => &self.wedge,
            Product::Join => &self.join,
        };
        let mut terms: Vec<Term> = (0..dim * dim)
            .filter(|&p| table[p].sign != 0)
            .map(|p| Term {
                i: (p / dim) as u8,
                j: (p % dim) as u8,
                k: table[p].index,
                sign: table[p].sign,
            })
            .collect();
        terms.sort_by_key(|t| (t.k, t.i, t.j));
        terms
    }

    /// Golden-file rendering of a product table: one `i j k s` line per pair.
    pub fn render_product(&self, product: Product) -> String {
        let dim = self.dim();
        let mut out = String::new();
        for i in 0..dim {
            for j in 0..dim {
                let e = match product {
                    Product::Geometric => self.geometric(i, j),
                    Product::Wedge => self.wedge(i, j),
                    Product::Join => self.join(i, j),
                };
                let _ = writeln!(out, "{} {} {} {}", i, j, e.index, e.sign);
            }
        }
        out
    }

    /// Golden-file rendering of the dual: `i j k s` meaning
    /// `blade_i ^ (s * blade_k) = blade_j`, with `j` the pseudoscalar.
    pub fn render_dual(&self) -> String {
        let dim = self.dim();
        let mut out = String::new();
        for i in 0..dim {
            let e = self.dual(i);
            let _ = writeln!(out, "{} {} {} {}", i, dim - 1, e.index, e.sign);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Product {
    Geometric,
    Wedge,
    Join,
}

/// Metric diag(0, 1, 1, 1) of G(3,0,1).
pub const PGA_METRIC: [i8; 4] = [0, 1, 1, 1];

/// Tables of G(3,0,1), built once on first use and shared read-only.
pub static PGA: LazyLock<CayleyTable> = LazyLock::new(|| CayleyTable::new(&PGA_METRIC));

pub(crate) static GP_TERMS: LazyLock<Vec<Term>> = LazyLock::new(|| PGA.terms(Product::Geometric));
pub(crate) static WEDGE_TERMS: LazyLock<Vec<Term>> = LazyLock::new(|| PGA.terms(Product::Wedge));
pub(crate) static JOIN_TERMS: LazyLock<Vec<Term>> = LazyLock::new(|| PGA.terms(Product::Join));

/// Builds the PGA tables. Deterministic; equivalent to reading [`PGA`].
pub fn build_cayley_tables() -> CayleyTable {
    CayleyTable::new(&PGA_METRIC)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::blade;

    #[test]
    fn basis_order_matches_documented_layout() {
        let t = build_cayley_tables();
        let expected: [u8; 16] = [
            0b0000, 0b0001, 0b0010, 0b0100, 0b1000, 0b0011, 0b0101, 0b1001, 0b0110, 0b1010,
            0b1100, 0b0111, 0b1011, 0b1101, 0b1110, 0b1111,
        ];
        for (i, &m) in expected.iter().enumerate() {
            assert_eq!(t.mask(i), m, "blade {i}");
            assert_eq!(t.grade(i), m.count_ones() as usize);
        }
    }

    #[test]
    fn named_entries() {
        let t = build_cayley_tables();
        assert_eq!(t.geometric(blade::E1, blade::E1), Entry { index: 0, sign: 1 });
        assert_eq!(t.geometric(blade::E0, blade::E0).sign, 0);
        assert_eq!(
            t.geometric(blade::E1, blade::E2),
            Entry { index: blade::E12 as u8, sign: 1 }
        );
        assert_eq!(
            t.geometric(blade::E2, blade::E1),
            Entry { index: blade::E12 as u8, sign: -1 }
        );
        assert_eq!(
            t.geometric(blade::E1, blade::E23),
            Entry { index: blade::E123 as u8, sign: 1 }
        );
    }

    #[test]
    fn zero_sign_iff_shared_e0() {
        let t = build_cayley_tables();
        for i in 0..16 {
            for j in 0..16 {
                let shares_e0 = t.mask(i) & t.mask(j) & 1 != 0;
                assert_eq!(t.geometric(i, j).sign == 0, shares_e0, "({i},{j})");
                if t.mask(i) & t.mask(j) != 0 {
                    assert_eq!(t.wedge(i, j).sign, 0);
                }
            }
        }
    }

    #[test]
    fn associativity_is_exact_on_basis_triples() {
        let t = build_cayley_tables();
        for i in 0..16 {
            for j in 0..16 {
                for k in 0..16 {
                    let ij = t.geometric(i, j);
                    let left = t.geometric(ij.index as usize, k);
                    let jk = t.geometric(j, k);
                    let right = t.geometric(i, jk.index as usize);
                    assert_eq!(ij.sign * left.sign, jk.sign * right.sign);
                    if ij.sign * left.sign != 0 {
                        assert_eq!(left.index, right.index);
                    }
                }
            }
        }
    }

    #[test]
    fn dual_examples() {
        let t = build_cayley_tables();
        assert_eq!(t.dual(blade::E01), Entry { index: blade::E23 as u8, sign: 1 });
        assert_eq!(t.dual(blade::SCALAR), Entry { index: blade::E0123 as u8, sign: 1 });
        for i in 0..16 {
            let d = t.dual(i);
            let back = t.dual_inverse(d.index as usize);
            assert_eq!(back.index as usize, i);
            assert_eq!(back.sign * d.sign, 1);
            let w = t.wedge(i, d.index as usize);
            assert_eq!((w.index as usize, w.sign * d.sign), (blade::E0123, 1));
        }
    }

    #[test]
    fn euclidean_table_has_eight_blades() {
        let t = CayleyTable::new(&[1, 1, 1]);
        assert_eq!(t.dim(), 8);
        assert_eq!(t.geometric(1, 1), Entry { index: 0, sign: 1 });
        // e123 squares to -1
        assert_eq!(t.geometric(7, 7), Entry { index: 0, sign: -1 });
    }

    #[test]
    fn golden_files_match() {
        let t = build_cayley_tables();
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/golden");
        let read = |name: &str| std::fs::read_to_string(format!("{dir}/{name}")).unwrap();
        assert_eq!(read("cayley_geometric.txt"), t.render_product(Product::Geometric));
        assert_eq!(read("cayley_wedge.txt"), t.render_product(Product::Wedge));
        assert_eq!(read("dual_signs.txt"), t.render_dual());
    }
}
