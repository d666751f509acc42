use thiserror::Error;

use super::layers::{block, mixed_linear, Axis, Stream, VarMap};
use super::{ConfigError, GatrConfig, GatrParams};
use crate::autodiff::{AutodiffError, Tape, Var};
use crate::equi::{EquiError, MultivectorBatch, ScalarBatch};
use crate::ga::{Multivector, N_BLADES};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Equi(#[from] EquiError),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("axial attention needs inputs with a time axis")]
    AxialWithoutTime,
}

/// Reference multivector for the equivariant join: the mean `m` of the given
/// multivectors plus `e0 <m>_3`, so that point-like inputs yield a nonzero
/// pseudoscalar component.
pub fn join_reference<T: Real>(mvs: &[T]) -> Multivector<T> {
    let n = mvs.len() / N_BLADES;
    let mut m = Multivector::zero();
    for chunk in mvs.chunks_exact(N_BLADES) {
        for (a, b) in m.0.iter_mut().zip(chunk) {
            *a += *b;
        }
    }
    m = m.scale(T::one() / T::from_usize(n.max(1)));
    let lift = m.grade_projection(3).expect("grade 3 exists").e0_mul();
    m + lift
}

/// A recorded forward graph for a fixed batch shape, reusable across
/// batches and parameter updates.
pub struct GatrGraph<T: Real> {
    pub tape: Tape<T>,
    pub config: GatrConfig,
    pub param_vars: Vec<Var>,
    pub mv_in: Var,
    pub s_in: Var,
    pub reference: Var,
    pub out: Stream,
    pub batch: usize,
    pub time: Option<usize>,
    pub items: usize,
}

impl<T: Real> GatrGraph<T> {
    pub fn build(
        config: &GatrConfig,
        params: &GatrParams<T>,
        batch: usize,
        time: Option<usize>,
        items: usize,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if config.axial && time.is_none() {
            return Err(ModelError::AxialWithoutTime);
        }
        let mut tape = Tape::new();
        let (vars, param_vars) = VarMap::attach(&mut tape, params)?;
        let lead: Vec<usize> = match time {
            Some(t) => vec![batch, t, items],
            None => vec![batch, items],
        };
        let rows: usize = lead.iter().product();
        let mut mv_shape = lead.clone();
        mv_shape.extend([config.in_mv_channels, N_BLADES]);
        let mut s_shape = lead.clone();
        s_shape.push(config.in_scalar_channels);
        let mv_in = tape.input(&mv_shape, vec![T::zero(); rows * config.in_mv_channels * N_BLADES])?;
        let s_in = tape.input(&s_shape, vec![T::zero(); rows * config.in_scalar_channels])?;
        let reference = tape.input(&[batch, N_BLADES], vec![T::zero(); batch * N_BLADES])?;
        let mut x = mixed_linear(&mut tape, &vars, "input", Stream { mv: mv_in, s: s_in })?;
        for b in 0..config.n_blocks {
            let axis = if config.axial && b % 2 == 1 { Axis::Time } else { Axis::Items };
            x = block(
                &mut tape,
                &vars,
                &format!("block{b}"),
                x,
                reference,
                config.n_heads,
                axis,
                config.rotary_base,
            )?;
        }
        let out = mixed_linear(&mut tape, &vars, "output", x)?;
        Ok(Self {
            tape,
            config: config.clone(),
            param_vars,
            mv_in,
            s_in,
            reference,
            out,
            batch,
            time,
            items,
        })
    }

    /// Loads inputs (concatenated over the batch) and derives the per-sample
    /// join references from them.
    pub fn set_inputs(&mut self, mv: &[T], s: &[T]) -> Result<(), ModelError> {
        self.tape.set_leaf(self.mv_in, mv)?;
        self.tape.set_leaf(self.s_in, s)?;
        let per = mv.len() / self.batch;
        let refs: Vec<T> = mv.chunks_exact(per).flat_map(|c| join_reference(c).0).collect();
        self.tape.set_leaf(self.reference, &refs)?;
        Ok(())
    }

    pub fn set_params(&mut self, params: &GatrParams<T>) -> Result<(), ModelError> {
        params.sync(&mut self.tape, &self.param_vars)?;
        Ok(())
    }

    pub fn forward(&mut self) -> Result<(), ModelError> {
        self.tape.forward()?;
        Ok(())
    }

    pub fn outputs(&self) -> Result<(&[T], &[T]), ModelError> {
        Ok((self.tape.value(self.out.mv)?, self.tape.value(self.out.s)?))
    }
}

/// Runs the network on one sample. Axial configs need `mv.time`.
pub fn gatr_forward<T: Real>(
    config: &GatrConfig,
    params: &GatrParams<T>,
    mv: &MultivectorBatch<T>,
    s: &ScalarBatch<T>,
) -> Result<(MultivectorBatch<T>, ScalarBatch<T>), ModelError> {
    if mv.channels != config.in_mv_channels || s.channels != config.in_scalar_channels {
        return Err(ModelError::Shape(format!(
            "inputs have {}+{} channels, config expects {}+{}",
            mv.channels, s.channels, config.in_mv_channels, config.in_scalar_channels
        )));
    }
    if s.rows() != mv.rows() || s.time != mv.time {
        return Err(ModelError::Shape("scalar and multivector rows differ".into()));
    }
    if config.axial && mv.time.is_none() {
        return Err(ModelError::AxialWithoutTime);
    }
    let mut graph = GatrGraph::build(config, params, 1, mv.time, mv.items)?;
    graph.set_inputs(&mv.data, &s.data)?;
    graph.forward()?;
    let (om, os) = graph.outputs()?;
    Ok((
        MultivectorBatch {
            time: mv.time,
            items: mv.items,
            channels: config.out_mv_channels,
            data: om.to_vec(),
        },
        ScalarBatch {
            time: s.time,
            items: s.items,
            channels: config.out_scalar_channels,
            data: os.to_vec(),
        },
    ))
}

/// Applies block `index` of the network, attending over items, to hidden
/// states of width `n_mv_channels` / `n_scalar_channels`.
pub fn gatr_block<T: Real>(
    config: &GatrConfig,
    params: &GatrParams<T>,
    index: usize,
    x: &MultivectorBatch<T>,
    s: &ScalarBatch<T>,
    reference: &Multivector<T>,
) -> Result<(MultivectorBatch<T>, ScalarBatch<T>), ModelError> {
    config.validate()?;
    if x.channels != config.n_mv_channels || s.channels != config.n_scalar_channels || s.rows() != x.rows() {
        return Err(ModelError::Shape(format!(
            "block input {}x{} / {}x{} does not match config",
            x.rows(),
            x.channels,
            s.rows(),
            s.channels
        )));
    }
    let mut tape = Tape::new();
    let (vars, _) = VarMap::attach(&mut tape, params)?;
    let lead = match x.time {
        Some(t) => vec![1, t, x.items],
        None => vec![1, x.items],
    };
    let mv = tape.input(&[lead.as_slice(), &[x.channels, N_BLADES]].concat(), x.data.clone())?;
    let sv = tape.input(&[lead.as_slice(), &[s.channels]].concat(), s.data.clone())?;
    let r = tape.input(&[1, N_BLADES], reference.0.to_vec())?;
    let out = block(
        &mut tape,
        &vars,
        &format!("block{index}"),
        Stream { mv, s: sv },
        r,
        config.n_heads,
        Axis::Items,
        config.rotary_base,
    )?;
    tape.forward()?;
    Ok((
        MultivectorBatch {
            time: x.time,
            items: x.items,
            channels: x.channels,
            data: tape.value(out.mv)?.to_vec(),
        },
        ScalarBatch {
            time: s.time,
            items: s.items,
            channels: s.channels,
            data: tape.value(out.s)?.to_vec(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::{embed_point, embed_velocity, random_versor};
    use crate::model::{init_params, param_breakdown};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_inputs(rng: &mut ChaCha8Rng, items: usize) -> (MultivectorBatch, ScalarBatch) {
        let mut mvs = Vec::new();
        for _ in 0..items {
            let p = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>(), rng.random::<f64>() - 0.5];
            let v = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            mvs.push(embed_point(p));
            mvs.push(embed_velocity(v));
        }
        let mv = MultivectorBatch::from_multivectors(items, 2, &mvs).unwrap();
        let s = ScalarBatch::new(items, 1, (0..items).map(|_| rng.random::<f64>()).collect()).unwrap();
        (mv, s)
    }

    #[test]
    fn reference_config_parameter_count() {
        let config = GatrConfig::reference();
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(0));
        let total = params.n_values();
        let breakdown = param_breakdown(&params);
        assert!(breakdown.len() == 2 + 2 * config.n_blocks);
        assert!((total as f64 - 1.9e6).abs() <= 0.25 * 1.9e6, "{total}");
    }

    #[test]
    fn forward_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = GatrConfig::desk();
        let params = init_params(&config, &mut rng);
        let (mv, s) = sample_inputs(&mut rng, 4);
        let (y, ys) = gatr_forward(&config, &params, &mv, &s).unwrap();
        for n in 1..=4 {
            let u = random_versor(&mut rng, n, 5.0).unwrap();
            let (yt, yst) = gatr_forward(&config, &params, &mv.transform(&u), &s).unwrap();
            let err = yt.rel_diff(&y.transform(&u));
            assert!(err < 1e-10, "{n} reflections: {err}");
            assert!(yst.rel_diff(&ys) < 1e-10);
        }
    }
}
