use super::NBodyError;

pub type Vec3 = [f64; 3];

/// Minimum pairwise separation below which bodies count as coincident.
pub const MIN_SEPARATION: f64 = 1e-9;

fn accelerations(masses: &[f64], pos: &[Vec3]) -> Result<Vec<Vec3>, NBodyError> {
    let n = masses.len();
    let mut force = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = [pos[j][0] - pos[i][0], pos[j][1] - pos[i][1], pos[j][2] - pos[i][2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            if r < MIN_SEPARATION {
                return Err(NBodyError::Coincident { i, j, distance: r });
            }
            let k = masses[i] * masses[j] / (r2 * r);
            for a in 0..3 {
                force[i][a] += k * d[a];
                force[j][a] -= k * d[a];
            }
        }
    }
    Ok(force
        .iter()
        .zip(masses)
        .map(|(f, m)| f.map(|c| c / m))
        .collect())
}

/// Explicit Euler under Newtonian gravity with G = 1.
pub fn euler_integrate(
    masses: &[f64],
    pos: &[Vec3],
    vel: &[Vec3],
    dt: f64,
    steps: usize,
) -> Result<(Vec<Vec3>, Vec<Vec3>), NBodyError> {
    if pos.len() != masses.len() || vel.len() != masses.len() {
        return Err(NBodyError::Invalid(format!(
            "{} masses, {} positions, {} velocities",
            masses.len(),
            pos.len(),
            vel.len()
        )));
    }
    let mut pos = pos.to_vec();
    let mut vel = vel.to_vec();
    for _ in 0..steps {
        let acc = accelerations(masses, &pos)?;
        for ((p, v), a) in pos.iter_mut().zip(vel.iter_mut()).zip(&acc) {
            for k in 0..3 {
                p[k] += v[k] * dt;
                v[k] += a[k] * dt;
            }
        }
    }
    Ok((pos, vel))
}
