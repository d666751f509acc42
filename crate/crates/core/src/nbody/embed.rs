use super::data::NBodySample;
use super::sim::Vec3;
use crate::equi::{MultivectorBatch, ScalarBatch};
use crate::ga::{embed_point, embed_velocity, extract_point, N_BLADES};
use crate::Real;

/// Output channel that carries the predicted position.
pub const POSITION_CHANNEL: usize = 0;

/// One item per body: channel 0 holds the initial position as a point,
/// channel 1 the velocity as an ideal bivector; masses go to the scalars.
pub fn embed_nbody(sample: &NBodySample) -> (MultivectorBatch, ScalarBatch) {
    let n = sample.n_bodies();
    let mut mvs = Vec::with_capacity(2 * n);
    for (p, v) in sample.pos0.iter().zip(&sample.vel0) {
        mvs.push(embed_point(*p));
        mvs.push(embed_velocity(*v));
    }
    let mv = MultivectorBatch::from_multivectors(n, 2, &mvs).expect("two channels per body");
    let s = ScalarBatch::new(n, 1, sample.masses.clone()).expect("one mass per body");
    (mv, s)
}

/// Predicted positions from an output `[n, channels, 16]` buffer. Bodies whose
/// output is a point at infinity fall back to `fallback`; returns how many did.
pub fn extract_prediction<T: Real>(out: &[T], channels: usize, fallback: &[Vec3]) -> (Vec<Vec3>, usize) {
    let mut misses = 0;
    let preds = out
        .chunks_exact(channels * N_BLADES)
        .zip(fallback)
        .map(|(row, fb)| {
            let m = crate::Multivector::from_slice(&row[POSITION_CHANNEL * N_BLADES..(POSITION_CHANNEL + 1) * N_BLADES]);
            match extract_point(&m.cast::<f64>()) {
                Ok(p) => p,
                Err(_) => {
                    misses += 1;
                    *fb
                }
            }
        })
        .collect();
    (preds, misses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::embed_translation;

    fn sample() -> NBodySample {
        NBodySample {
            masses: vec![2.0, 0.05],
            pos0: vec![[1.0, -2.0, 0.5], [3.0, 0.25, -1.0]],
            vel0: vec![[0.0; 3], [0.1, 0.2, -0.3]],
            pos1: vec![[1.0, -2.0, 0.5], [3.0, 0.25, -1.0]],
        }
    }

    #[test]
    fn zero_velocity_is_the_zero_multivector() {
        let (mv, s) = embed_nbody(&sample());
        assert!(mv.get(0, 1).0.iter().all(|c| *c == 0.0));
        assert_eq!(s.data, vec![2.0, 0.05]);
    }

    #[test]
    fn extraction_inverts_embedding() {
        let s = sample();
        let (mv, _) = embed_nbody(&s);
        let (p, misses) = extract_prediction(&mv.data, 2, &s.pos0);
        assert_eq!(misses, 0);
        for (a, b) in p.iter().zip(&s.pos0) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn embedding_commutes_with_translation() {
        let s = sample();
        let t = [5.0, -7.0, 200.0];
        let (moved, _) = embed_nbody(&s.translated(t));
        let (mv, _) = embed_nbody(&s);
        let expect = mv.transform(&embed_translation(t));
        assert!(moved.rel_diff(&expect) < 1e-15);
    }

    #[test]
    fn points_at_infinity_fall_back() {
        let s = sample();
        let out = vec![0.0f64; 2 * N_BLADES];
        let (p, misses) = extract_prediction(&out, 1, &s.pos0);
        assert_eq!(misses, 2);
        assert_eq!(p, s.pos0);
    }
}
