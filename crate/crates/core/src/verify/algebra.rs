use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{rel_error, Property, VerifyOptions};
use crate::ga::{blade, random_versor, CayleyTable, Multivector, Parity, GRADE_OF, N_BLADES, PGA};

/// Product of two basis blades given as factor lists, computed by bubble
/// sorting the concatenation and contracting equal neighbours. Returns the
/// sorted factor list and the sign (0 when a null vector is squared).
pub fn reference_blade_product(a: &[u8], b: &[u8], metric: &[i8]) -> (Vec<u8>, i8) {
    let mut list: Vec<u8> = a.iter().chain(b).copied().collect();
    let mut sign = 1i8;
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < list.len() {
            if list[i] > list[i + 1] {
                list.swap(i, i + 1);
                sign = -sign;
                changed = true;
            } else if list[i] == list[i + 1] {
                sign *= metric[list[i] as usize];
                list.drain(i..i + 2);
                changed = true;
                continue;
            }
            i += 1;
        }
        if !changed {
            break;
        }
    }
    (list, sign)
}

fn factors(table: &CayleyTable, index: usize) -> Vec<u8> {
    let m = table.mask(index);
    (0..8u8).filter(|b| m & (1 << b) != 0).collect()
}

fn random_mv<R: Rng>(rng: &mut R) -> Multivector {
    Multivector(std::array::from_fn(|_| rng.sample(StandardNormal)))
}

fn random_vector<R: Rng>(rng: &mut R) -> Multivector {
    let mut v = Multivector::zero();
    for i in blade::E0..=blade::E3 {
        v[i] = rng.sample(StandardNormal);
    }
    v
}

/// Product of 1-4 random (non-unit) grade-1 elements.
fn random_unnormalized_versor<R: Rng>(rng: &mut R, n: usize) -> Multivector {
    let mut u = Multivector::scalar(1.0);
    for _ in 0..n {
        u = u * random_vector(rng);
    }
    u
}

fn euclidean_join(a: &Multivector, b: &Multivector) -> Multivector {
    let i3 = Multivector::basis(blade::E123, 1.0);
    let i3r = i3.reverse();
    (*a * i3r).wedge(&(*b * i3r)) * i3
}

/// Splits `x = t + e0 p` into Euclidean parts `t` and `p`.
fn split_ideal(x: &Multivector) -> (Multivector, Multivector) {
    let mut t = Multivector::zero();
    let mut p = Multivector::zero();
    for &i in &blade::EUCLIDEAN {
        t[i] = x[i];
        let e = PGA.geometric(blade::E0, i);
        if e.sign != 0 {
            p[i] = x[e.index as usize] * e.sign as f64;
        }
    }
    (t, p)
}

/// Right-hand side of the join expressed through Euclidean joins, for
/// homogeneous `x` of grade `k` and `y` of grade `l`.
fn join_via_euclidean(x: &Multivector, y: &Multivector, k: usize, l: usize) -> Multivector {
    let (tx, px) = split_ideal(x);
    let (ty, py) = split_ideal(y);
    let e0 = Multivector::basis(blade::E0, 1.0);
    // n = 3, so (-1)^n = -1.
    let rhs = euclidean_join(&tx, &py) - euclidean_join(&px.grade_involution(), &ty) + e0 * euclidean_join(&px, &py);
    if (k * l) % 2 == 1 {
        -rhs
    } else {
        rhs
    }
}

fn scales(i: usize) -> f64 {
    [0.0, 1.0, 10.0][i % 3]
}

pub fn algebra_suite(options: &VerifyOptions) -> Vec<Property> {
    let trials = options.trials_or(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut props = Vec::new();

    let mut failures = 0usize;
    for i in 0..N_BLADES {
        for j in 0..N_BLADES {
            for k in 0..N_BLADES {
                let ij = PGA.geometric(i, j);
                let jk = PGA.geometric(j, k);
                let left = PGA.geometric(ij.index as usize, k);
                let right = PGA.geometric(i, jk.index as usize);
                let ls = ij.sign * left.sign;
                let rs = jk.sign * right.sign;
                if ls != rs || (ls != 0 && left.index != right.index) {
                    failures += 1;
                }
            }
        }
    }
    props.push(Property::new("associativity on 16^3 basis triples (count)", failures as f64, 0.0, 4096));

    let mut mismatches = 0usize;
    for i in 0..N_BLADES {
        for j in 0..N_BLADES {
            let (list, sign) = reference_blade_product(&factors(&PGA, i), &factors(&PGA, j), PGA.metric());
            let mask = list.iter().fold(0u8, |m, b| m | (1 << b));
            let e = PGA.geometric(i, j);
            if e.sign != sign || (sign != 0 && e.index as usize != PGA.index_of_mask(mask)) {
                mismatches += 1;
            }
            let w = PGA.wedge(i, j);
            let disjoint = PGA.mask(i) & PGA.mask(j) == 0;
            let expect = if disjoint { sign } else { 0 };
            if w.sign != expect || (expect != 0 && w.index != e.index) {
                mismatches += 1;
            }
        }
    }
    props.push(Property::new("tables vs list-based blade products (count)", mismatches as f64, 0.0, 256));

    let mut errs = [0.0f64; 8];
    for t in 0..trials {
        let v = random_vector(&mut rng);
        let sq = v * v;
        errs[0] = errs[0].max(rel_error(&sq.0, &Multivector::scalar(v.inner(&v)).0));

        let x = random_unnormalized_versor(&mut rng, 1 + t % 4);
        let y = random_unnormalized_versor(&mut rng, 1 + (t / 4) % 4);
        let lhs = (x * y).norm();
        errs[1] = errs[1].max(rel_error(&[lhs], &[x.norm() * y.norm()]));

        let u = random_versor(&mut rng, 1 + t % 4, scales(t)).unwrap();
        let w = random_versor(&mut rng, 1 + (t + 1) % 4, scales(t + 1)).unwrap();
        let m = random_mv(&mut rng);
        let composed = u.compose(&w).unwrap().sandwich(&m).unwrap();
        let nested = u.sandwich(&w.sandwich(&m).unwrap()).unwrap();
        errs[2] = errs[2].max(rel_error(&composed.0, &nested.0));

        let um = u.sandwich(&m).unwrap();
        for k in 0..=4 {
            let a = u.sandwich(&m.grade_projection(k).unwrap()).unwrap();
            let b = um.grade_projection(k).unwrap();
            errs[3] = errs[3].max(rel_error(&a.0, &b.0));
        }
        let a = u.sandwich(&m.e0_mul()).unwrap();
        errs[4] = errs[4].max(rel_error(&a.0, &um.e0_mul().0));

        errs[5] = errs[5].max(rel_error(&m.dual().dual_inverse().0, &m.0));
        errs[5] = errs[5].max(rel_error(&m.dual_inverse().dual().0, &m.0));

        let n = random_mv(&mut rng);
        for k in 0..=4 {
            for l in 0..=4 {
                let xk = m.grade_projection(k).unwrap();
                let yl = n.grade_projection(l).unwrap();
                let direct = xk.join(&yl);
                let via = join_via_euclidean(&xk, &yl, k, l);
                if direct.max_abs() > 0.0 || via.max_abs() > 0.0 {
                    errs[6] = errs[6].max(rel_error(&direct.0, &via.0));
                }
            }
        }

        let un = u.sandwich(&n).unwrap();
        errs[7] = errs[7].max(rel_error(&[um.inner(&un)], &[m.inner(&n)]));
    }
    let names = [
        "fundamental relation v^2 = <v, v>",
        "norm multiplicativity on versors",
        "action homomorphism rho_uw = rho_u rho_w",
        "grade projection equivariance",
        "e0 multiplication equivariance",
        "dual bijectivity",
        "join decomposition via Euclidean joins",
        "inner product invariance",
    ];
    for (name, err) in names.iter().zip(errs) {
        props.push(Property::new(*name, err, options.tol(1e-10), trials));
    }

    let mut parity_err = 0.0f64;
    for t in 0..trials.min(200) {
        let u = random_versor(&mut rng, 1 + t % 4, scales(t)).unwrap();
        let expect = Parity::of_count(1 + t % 4);
        if u.parity() != expect {
            parity_err = f64::INFINITY;
        }
        for (i, c) in u.mv().0.iter().enumerate() {
            if (GRADE_OF[i] % 2 == 1) != (expect == Parity::Odd) {
                parity_err = parity_err.max(c.abs());
            }
        }
        parity_err = parity_err.max((u.norm_squared() - 1.0).abs());
    }
    props.push(Property::new("versor parity and unit norm", parity_err, options.tol(1e-10), trials.min(200)));
    props
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_product_examples() {
        let m = [0i8, 1, 1, 1];
        assert_eq!(reference_blade_product(&[1], &[2], &m), (vec![1, 2], 1));
        assert_eq!(reference_blade_product(&[2], &[1], &m), (vec![1, 2], -1));
        assert_eq!(reference_blade_product(&[0], &[0], &m).1, 0);
        assert_eq!(reference_blade_product(&[1, 2], &[1, 2], &m), (vec![], -1));
    }
}
