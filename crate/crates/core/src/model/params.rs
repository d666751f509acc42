use rand::Rng;

use super::GatrConfig;
use crate::autodiff::ParamStore;
use crate::equi::{EquiLinearWeights, MixedLinearWeights, N_BASIS_MAPS};
use crate::Real;

/// Parameters are stored flat, named `<layer>.<array>`.
pub type GatrParams<T = f64> = ParamStore<T>;

#[derive(Clone, Copy, Debug)]
pub(crate) enum LayerShape {
    /// `(c_out, c_in, s_out, s_in)`
    Mixed(usize, usize, usize, usize),
    /// `(c_out, c_in)`
    Equi(usize, usize),
}

/// Every layer of the network in declaration order.
pub(crate) fn layer_shapes(config: &GatrConfig) -> Vec<(String, LayerShape)> {
    let (c, s) = (config.n_mv_channels, config.n_scalar_channels);
    let (hm, hs) = (config.hidden_mv(), config.hidden_scalars());
    let mut out = vec![(
        "input".to_string(),
        LayerShape::Mixed(c, config.in_mv_channels, s, config.in_scalar_channels),
    )];
    for b in 0..config.n_blocks {
        for proj in ["q", "k", "v", "out"] {
            out.push((format!("block{b}.attn.{proj}"), LayerShape::Mixed(c, c, s, s)));
        }
        out.push((format!("block{b}.mlp.in"), LayerShape::Mixed(hm, c, hs, s)));
        out.push((format!("block{b}.mlp.mix"), LayerShape::Equi(hm, hm)));
        out.push((format!("block{b}.mlp.out"), LayerShape::Mixed(c, hm, s, hs)));
    }
    out.push((
        "output".to_string(),
        LayerShape::Mixed(config.out_mv_channels, c, config.out_scalar_channels, s),
    ));
    out
}

pub fn mixed_into_store<T: Real>(store: &mut ParamStore<T>, prefix: &str, w: &MixedLinearWeights<T>) {
    let (co, ci) = (w.mv.c_out, w.mv.c_in);
    store.push(format!("{prefix}.mv_w"), &[co, ci, N_BASIS_MAPS], w.mv.w.clone());
    store.push(format!("{prefix}.mv_bias"), &[co], w.mv.bias.clone());
    store.push(format!("{prefix}.s_to_mv"), &[co, w.s_in], w.s_to_mv.clone());
    store.push(format!("{prefix}.mv_to_s"), &[w.s_out, ci], w.mv_to_s.clone());
    store.push(format!("{prefix}.ss"), &[w.s_out, w.s_in], w.ss.clone());
    store.push(format!("{prefix}.s_bias"), &[w.s_out], w.s_bias.clone());
}

/// Reassembles a mixed layer from its stored arrays.
pub fn mixed_from_store<T: Real>(store: &ParamStore<T>, prefix: &str) -> Option<MixedLinearWeights<T>> {
    let get = |n: &str| store.get(&format!("{prefix}.{n}"));
    let w = get("mv_w")?;
    let ss = get("ss")?;
    Some(MixedLinearWeights {
        mv: EquiLinearWeights {
            c_out: w.shape[0],
            c_in: w.shape[1],
            w: w.data.clone(),
            bias: get("mv_bias")?.data.clone(),
        },
        s_in: ss.shape[1],
        s_out: ss.shape[0],
        s_to_mv: get("s_to_mv")?.data.clone(),
        mv_to_s: get("mv_to_s")?.data.clone(),
        ss: ss.data.clone(),
        s_bias: get("s_bias")?.data.clone(),
    })
}

/// Draws all parameters from `rng`; identical seeds give identical stores.
pub fn init_params<R: Rng + ?Sized>(config: &GatrConfig, rng: &mut R) -> GatrParams<f64> {
    let mut store = ParamStore::new();
    for (prefix, shape) in layer_shapes(config) {
        match shape {
            LayerShape::Mixed(co, ci, so, si) => {
                let w = MixedLinearWeights::init(co, ci, so, si, rng);
                mixed_into_store(&mut store, &prefix, &w);
            }
            LayerShape::Equi(co, ci) => {
                let w = EquiLinearWeights::init(co, ci, rng);
                store.push(format!("{prefix}.mv_w"), &[co, ci, N_BASIS_MAPS], w.w);
                store.push(format!("{prefix}.mv_bias"), &[co], w.bias);
            }
        }
    }
    store
}

/// Parameter counts grouped by `input`, `blockN.attn`, `blockN.mlp`, `output`.
pub fn param_breakdown<T: Real>(params: &GatrParams<T>) -> Vec<(String, usize)> {
    let mut groups: Vec<(String, usize)> = Vec::new();
    for p in &params.params {
        let parts: Vec<&str> = p.name.split('.').collect();
        let group = if parts[0].starts_with("block") {
            format!("{}.{}", parts[0], parts[1])
        } else {
            parts[0].to_string()
        };
        match groups.last_mut() {
            Some((g, n)) if *g == group => *n += p.data.len(),
            _ => groups.push((group, p.data.len())),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_parameters() {
        let config = GatrConfig::desk();
        let a = init_params(&config, &mut ChaCha8Rng::seed_from_u64(7));
        let b = init_params(&config, &mut ChaCha8Rng::seed_from_u64(7));
        let c = init_params(&config, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
        let total: usize = param_breakdown(&a).iter().map(|(_, n)| n).sum();
        assert_eq!(total, a.n_values());
    }

    #[test]
    fn mixed_layer_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = MixedLinearWeights::<f64>::init(3, 2, 5, 4, &mut rng);
        let mut store = ParamStore::new();
        mixed_into_store(&mut store, "x", &w);
        assert_eq!(mixed_from_store(&store, "x").unwrap(), w);
        assert_eq!(store.n_values(), w.n_params());
    }
}
