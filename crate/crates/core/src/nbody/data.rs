use std::io::{Read, Write};

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{euler_integrate, Vec3};
use super::NBodyError;

pub const DATASET_MAGIC: &[u8; 8] = b"GATRNBD1";
pub const DATASET_VERSION: u32 = 1;

/// Largest displacement a body may travel before the sample is rejected.
pub const MAX_DISPLACEMENT: f64 = 2.0;
/// Attempts over which the rejection rate is measured.
pub const REJECTION_WINDOW: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct NBodySample {
    pub masses: Vec<f64>,
    pub pos0: Vec<Vec3>,
    pub vel0: Vec<Vec3>,
    pub pos1: Vec<Vec3>,
}

impl NBodySample {
    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    pub fn max_displacement(&self) -> f64 {
        self.pos0
            .iter()
            .zip(&self.pos1)
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    /// The same system shifted by `t`.
    pub fn translated(&self, t: Vec3) -> Self {
        let shift = |v: &Vec<Vec3>| v.iter().map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]]).collect();
        Self {
            masses: self.masses.clone(),
            pos0: shift(&self.pos0),
            vel0: self.vel0.clone(),
            pos1: shift(&self.pos1),
        }
    }

    pub fn validate(&self) -> Result<(), NBodyError> {
        let n = self.masses.len();
        if n == 0 || self.pos0.len() != n || self.vel0.len() != n || self.pos1.len() != n {
            return Err(NBodyError::Invalid("inconsistent body counts".into()));
        }
        if self.masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(NBodyError::Invalid("masses must be positive and finite".into()));
        }
        let finite = [&self.pos0, &self.vel0, &self.pos1]
            .iter()
            .all(|v| v.iter().flatten().all(|c| c.is_finite()));
        if !finite {
            return Err(NBodyError::Invalid("non-finite coordinates".into()));
        }
        Ok(())
    }
}

/// Knobs of the sampling procedure. The defaults are the training regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub n_planets: usize,
    pub star_mass: [f64; 2],
    pub planet_mass: [f64; 2],
    pub orbit_radius: [f64; 2],
    pub velocity_noise: f64,
    pub translation_mean: Vec3,
    pub translation_std: f64,
    pub rotate: bool,
    pub permute: bool,
    pub dt: f64,
    pub steps: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n_planets: 3,
            star_mass: [1.0, 10.0],
            planet_mass: [0.01, 0.1],
            orbit_radius: [0.1, 1.0],
            velocity_noise: 0.01,
            translation_mean: [0.0; 3],
            translation_std: 20.0,
            rotate: true,
            permute: true,
            dt: 1e-4,
            steps: 100,
        }
    }
}

fn log_uniform<R: Rng>(rng: &mut R, range: [f64; 2]) -> f64 {
    rng.random_range(range[0].ln()..=range[1].ln()).exp()
}

/// One attempt; `None` if the displacement rule rejects it.
fn attempt<R: Rng>(rng: &mut R, config: &SampleConfig) -> Result<Option<NBodySample>, NBodyError> {
    let n = config.n_planets + 1;
    let star = log_uniform(rng, config.star_mass);
    let mut masses = vec![star];
    let mut pos = vec![[0.0; 3]];
    let mut vel = vec![[0.0; 3]];
    let [r_lo, r_hi] = config.orbit_radius;
    for _ in 0..config.n_planets {
        masses.push(log_uniform(rng, config.planet_mass));
        let r = rng.random_range(r_lo * r_lo..=r_hi * r_hi).sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let (s, c) = phi.sin_cos();
        pos.push([r * c, r * s, 0.0]);
        let speed = (star / r).sqrt();
        let mut v = [-speed * s, speed * c, 0.0];
        if config.velocity_noise > 0.0 {
            for k in v.iter_mut() {
                *k += config.velocity_noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        vel.push(v);
    }

    let rotation = if config.rotate {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
    } else {
        UnitQuaternion::identity()
    };
    let shift: Vec3 = std::array::from_fn(|k| {
        if config.translation_std > 0.0 {
            Normal::new(config.translation_mean[k], config.translation_std)
                .expect("positive deviation")
                .sample(rng)
        } else {
            config.translation_mean[k]
        }
    });
    let rotate = |v: &Vec3| -> Vec3 {
        let r = rotation * Vector3::new(v[0], v[1], v[2]);
        [r.x, r.y, r.z]
    };
    let mut pos: Vec<Vec3> = pos
        .iter()
        .map(|p| {
            let r = rotate(p);
            [r[0] + shift[0], r[1] + shift[1], r[2] + shift[2]]
        })
        .collect();
    let mut vel: Vec<Vec3> = vel.iter().map(rotate).collect();

    if config.permute {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        masses = order.iter().map(|&i| masses[i]).collect();
        pos = order.iter().map(|&i| pos[i]).collect();
        vel = order.iter().map(|&i| vel[i]).collect();
    }

    let (pos1, _) = euler_integrate(&masses, &pos, &vel, config.dt, config.steps)?;
    let sample = NBodySample {
        masses,
        pos0: pos,
        vel0: vel,
        pos1,
    };
    Ok((sample.max_displacement() <= MAX_DISPLACEMENT).then_some(sample))
}

/// Draws samples until one passes the displacement rule.
pub fn generate_sample<R: Rng>(rng: &mut R, config: &SampleConfig) -> Result<NBodySample, NBodyError> {
    if config.n_planets == 0 {
        return Err(NBodyError::Invalid("need at least one planet".into()));
    }
    let mut rejected = 0;
    for _ in 0..REJECTION_WINDOW {
        match attempt(rng, config)? {
            Some(sample) => return Ok(sample),
            None => rejected += 1,
        }
    }
    Err(NBodyError::Rejection {
        rejected,
        attempts: REJECTION_WINDOW,
    })
}

/// Mixes a dataset seed and a sample index into an independent stream seed.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub version: u32,
    pub n_samples: u64,
    pub n_bodies: u64,
    pub seed: u64,
    pub translation_mean: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<NBodySample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_bodies(&self) -> usize {
        self.header.n_bodies as usize
    }
}

/// `n_samples` samples, each from its own seeded stream, so the result does
/// not depend on `parallel`.
pub fn generate_dataset(
    config: &SampleConfig,
    n_samples: usize,
    seed: u64,
    parallel: bool,
) -> Result<Dataset, NBodyError> {
    let one = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i as u64));
        generate_sample(&mut rng, config)
    };
    let samples: Result<Vec<_>, _> = if parallel {
        (0..n_samples).into_par_iter().map(one).collect()
    } else {
        (0..n_samples).map(one).collect()
    };
    Ok(Dataset {
        header: DatasetHeader {
            version: DATASET_VERSION,
            n_samples: n_samples as u64,
            n_bodies: (config.n_planets + 1) as u64,
            seed,
            translation_mean: config.translation_mean,
        },
        samples: samples?,
    })
}

pub fn write_dataset<W: Write>(w: &mut W, data: &Dataset) -> Result<(), NBodyError> {
    let h = &data.header;
    if h.n_samples as usize != data.samples.len() {
        return Err(NBodyError::Invalid("header count does not match samples".into()));
    }
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&h.version.to_le_bytes())?;
    w.write_all(&h.n_samples.to_le_bytes())?;
    w.write_all(&h.n_bodies.to_le_bytes())?;
    w.write_all(&h.seed.to_le_bytes())?;
    for c in h.translation_mean {
        w.write_all(&c.to_le_bytes())?;
    }
    for s in &data.samples {
        if s.n_bodies() as u64 != h.n_bodies {
            return Err(NBodyError::Invalid("sample body count differs from header".into()));
        }
        let values = s
            .masses
            .iter()
            .chain(s.pos0.iter().flatten())
            .chain(s.vel0.iter().flatten())
            .chain(s.pos1.iter().flatten());
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], NBodyError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Dataset, NBodyError> {
    let magic: [u8; 8] = read_array(r)?;
    if &magic != DATASET_MAGIC {
        return Err(NBodyError::Format("bad magic; not a dataset file".into()));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != DATASET_VERSION {
        return Err(NBodyError::Format(format!("unsupported dataset version {version}")));
    }
    let n_samples = u64::from_le_bytes(read_array(r)?);
    let n_bodies = u64::from_le_bytes(read_array(r)?);
    let seed = u64::from_le_bytes(read_array(r)?);
    let mut translation_mean = [0.0; 3];
    for c in translation_mean.iter_mut() {
        *c = f64::from_le_bytes(read_array(r)?);
    }
    let n = n_bodies as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let per = n * 10 * 8;
    if per == 0 || payload.len() != per * n_samples as usize {
        return Err(NBodyError::Format(format!(
            "payload of {} bytes does not hold {n_samples} samples of {n} bodies",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let vecs = |v: &[f64]| -> Vec<Vec3> { v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect() };
    let mut samples = Vec::with_capacity(n_samples as usize);
    for chunk in values.chunks_exact(n * 10) {
        let sample = NBodySample {
            masses: chunk[..n].to_vec(),
            pos0: vecs(&chunk[n..4 * n]),
            vel0: vecs(&chunk[4 * n..7 * n]),
            pos1: vecs(&chunk[7 * n..]),
        };
        sample.validate()?;
        samples.push(sample);
    }
    Ok(Dataset {
        header: DatasetHeader {
            version,
            n_samples,
            n_bodies,
            seed,
            translation_mean,
        },
        samples,
    })
}

/// One row per body, for inspection.
pub fn write_dataset_csv<W: Write>(w: &mut W, data: &Dataset) -> Result<(), NBodyError> {
    writeln!(w, "sample,body,mass,x0,y0,z0,vx0,vy0,vz0,x1,y1,z1")?;
    for (i, s) in data.samples.iter().enumerate() {
        for b in 0..s.n_bodies() {
            let (p, v, q) = (s.pos0[b], s.vel0[b], s.pos1[b]);
            writeln!(
                w,
                "{i},{b},{},{},{},{},{},{},{},{},{},{}",
                s.masses[b], p[0], p[1], p[2], v[0], v[1], v[2], q[0], q[1], q[2]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_orbit_keeps_its_radius() {
        let config = SampleConfig {
            n_planets: 1,
            velocity_noise: 0.0,
            translation_std: 0.0,
            rotate: false,
            permute: false,
            ..SampleConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = generate_sample(&mut rng, &config).unwrap();
            let radius = |p: &[Vec3]| {
                let d: Vec3 = std::array::from_fn(|k| p[1][k] - p[0][k]);
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            };
            let (r0, r1) = (radius(&s.pos0), radius(&s.pos1));
            assert!((r1 - r0).abs() / r0 < 0.01, "{r0} -> {r1}");
        }
    }

    #[test]
    fn every_sample_obeys_the_displacement_rule() {
        let data = generate_dataset(&SampleConfig::default(), 200, 5, true).unwrap();
        for s in &data.samples {
            assert!(s.max_displacement() <= MAX_DISPLACEMENT);
            assert_eq!(s.n_bodies(), 4);
            assert!(s.masses.iter().all(|m| *m > 0.0));
        }
    }

    #[test]
    fn parallel_generation_matches_sequential() {
        let c = SampleConfig::default();
        assert_eq!(generate_dataset(&c, 64, 9, true).unwrap(), generate_dataset(&c, 64, 9, false).unwrap());
    }

    #[test]
    fn binary_round_trip() {
        let data = generate_dataset(&SampleConfig::default(), 5, 2, false).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        assert_eq!(read_dataset(&mut buf.as_slice()).unwrap(), data);
        buf[0] = b'X';
        assert!(matches!(read_dataset(&mut buf.as_slice()), Err(NBodyError::Format(_))));
    }

    #[test]
    fn translated_split_is_centred_on_its_mean() {
        let c = SampleConfig {
            translation_mean: [200.0, 0.0, 0.0],
            ..SampleConfig::default()
        };
        let n = 400;
        let data = generate_dataset(&c, n, 11, true).unwrap();
        let bound = 3.0 * 20.0 / (n as f64).sqrt();
        for k in 0..3 {
            // The star sits within 1 of the frame origin and dominates the mass.
            let mean = data
                .samples
                .iter()
                .map(|s| {
                    let star = (0..s.n_bodies()).max_by(|&a, &b| s.masses[a].total_cmp(&s.masses[b])).unwrap();
                    s.pos0[star][k]
                })
                .sum::<f64>()
                / n as f64;
            assert!((mean - c.translation_mean[k]).abs() < bound, "axis {k}: {mean}");
        }
    }

    #[test]
    fn masses_are_exchangeable_across_slots() {
        // The star lands in each of the four slots about equally often.
        let data = generate_dataset(&SampleConfig::default(), 10_000, 4, true).unwrap();
        let mut counts = [0usize; 4];
        for s in &data.samples {
            let star = (0..4).max_by(|&a, &b| s.masses[a].total_cmp(&s.masses[b])).unwrap();
            counts[star] += 1;
        }
        let expected = 2500.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9th percentile of chi-squared with 3 degrees of freedom.
        assert!(chi2 < 16.27, "{counts:?}");
    }
}
