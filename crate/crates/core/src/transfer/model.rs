//! Generator, discriminator and the adversarial, reconstruction and cycle losses.

use molxfer_nn::ndarray::Array2;
use molxfer_nn::{Activation, Graph, Mlp, ParamStore, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TransferError;
use crate::styleflow::{FlowChain, FlowConfig};

pub const GEN_STORE_TAG: u32 = 2;
pub const DISC_STORE_TAG: u32 = 3;

/// Discriminator classes.
pub const SOURCE_CLASS: usize = 0;
pub const TARGET_CLASS: usize = 1;
pub const FAKE_CLASS: usize = 2;
pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferConfig {
    /// Style instances per batch prior.
    pub k_instances: usize,
    /// Discriminator updates per generator update.
    pub disc_ratio: usize,
    pub lambda_gp: f64,
    pub w_style: f64,
    pub w_recon: f64,
    pub w_cycle: f64,
    pub generator_hidden: usize,
    pub disc_hidden: usize,
    pub flow: FlowConfig,
    pub learning_rate: f64,
    pub disc_learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    /// Decodes per input molecule at inference.
    pub decode_count: usize,
    pub pss_floor: f64,
    pub seed: u64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            k_instances: 10,
            disc_ratio: 5,
            lambda_gp: 10.0,
            w_style: 1.0,
            w_recon: 1.0,
            w_cycle: 1.0,
            generator_hidden: 128,
            disc_hidden: 64,
            flow: FlowConfig::default(),
            learning_rate: 1e-3,
            disc_learning_rate: 1e-3,
            batch_size: 64,
            iterations: 3000,
            decode_count: 10,
            pss_floor: 0.7,
            seed: 0,
        }
    }
}

impl TransferConfig {
    /// Settings tuned for the single-CPU desk corpus with the desk VAE.
    pub fn desk() -> Self {
        TransferConfig {
            w_style: 3.0,
            ..TransferConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), TransferError> {
        let bad = |m: &str| Err(TransferError::InvalidConfig(m.to_string()));
        if self.disc_ratio == 0 {
            return bad("disc_ratio must be at least 1");
        }
        if self.decode_count == 0 {
            return bad("decode_count must be at least 1");
        }
        if self.k_instances < 2 {
            return bad("k_instances must be at least 2");
        }
        if [self.w_style, self.w_recon, self.w_cycle, self.lambda_gp]
            .iter()
            .any(|w| !(*w >= 0.0))
        {
            return bad("loss weights must be non-negative");
        }
        if self.batch_size == 0 || self.generator_hidden == 0 || self.disc_hidden == 0 {
            return bad("batch_size and layer widths must be positive");
        }
        if !(self.learning_rate > 0.0 && self.disc_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }
}

/// Trainable networks of the transfer system. The generator and flow share
/// one store, the discriminator has its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferNets {
    pub dim: usize,
    pub generator: Mlp,
    pub flow: FlowChain,
    pub discriminator: Mlp,
    pub gen_store: ParamStore,
    pub disc_store: ParamStore,
}

impl TransferNets {
    pub fn new(dim: usize, config: &TransferConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut gen_store = ParamStore::new(GEN_STORE_TAG);
        let mut disc_store = ParamStore::new(DISC_STORE_TAG);
        let gh = config.generator_hidden;
        let generator = Mlp::new(
            &mut gen_store,
            "gen",
            &[2 * dim, gh, gh, dim],
            Activation::Tanh,
            &mut rng,
        );
        let flow = FlowChain::new(&mut gen_store, "flow", dim, config.flow, &mut rng);
        let dh = config.disc_hidden;
        let discriminator = Mlp::new(
            &mut disc_store,
            "disc",
            &[dim, dh, dh, N_CLASSES],
            Activation::Tanh,
            &mut rng,
        );
        TransferNets {
            dim,
            generator,
            flow,
            discriminator,
            gen_store,
            disc_store,
        }
    }

    pub fn generate_graph(&self, g: &mut Graph, z_c: Var, h_s: Var) -> Var {
        let x = g.concat_cols(&[z_c, h_s]);
        self.generator.forward(g, &self.gen_store, x)
    }

    pub fn disc_graph(&self, g: &mut Graph, z: Var) -> Var {
        self.discriminator.forward(g, &self.disc_store, z)
    }

    /// `z_g = G(z_c, h_s)` row by row.
    pub fn generate(
        &self,
        z_c: &Array2<f64>,
        h_s: &Array2<f64>,
    ) -> Result<Array2<f64>, TransferError> {
        for found in [z_c.ncols(), h_s.ncols()] {
            if found != self.dim {
                return Err(TransferError::DimensionMismatch {
                    expected: self.dim,
                    found,
                });
            }
        }
        if z_c.nrows() != h_s.nrows() {
            return Err(TransferError::DimensionMismatch {
                expected: z_c.nrows(),
                found: h_s.nrows(),
            });
        }
        let mut g = Graph::new();
        let a = g.constant(z_c.clone());
        let b = g.constant(h_s.clone());
        let out = self.generate_graph(&mut g, a, b);
        Ok(g.value(out).clone())
    }

    /// Class probabilities of latent rows.
    pub fn disc_probs(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut g = Graph::new();
        let zv = g.constant(z.clone());
        let logits = self.disc_graph(&mut g, zv);
        let p = g.softmax(logits);
        g.value(p).clone()
    }
}

/// Mean negative log-probability of class `class` over the rows of `logits`.
pub fn class_nll(g: &mut Graph, logits: Var, class: usize) -> Var {
    let b = g.shape(logits).0;
    let nll = g.nll(logits, &vec![Some(class); b]);
    g.scale(nll, 1.0 / b as f64)
}

/// Generator style loss: `-log p_D(j | z_g)`.
pub fn style_loss(g: &mut Graph, logits_zg: Var, target: usize) -> Var {
    class_nll(g, logits_zg, target)
}

/// Discriminator terms of one style `S`: `-[log p(S|z_c) + log p(S|ẑ_c)]`.
pub fn adversarial_style_term(
    g: &mut Graph,
    logits_zc: Var,
    logits_zhat: Var,
    style: usize,
) -> Var {
    let a = class_nll(g, logits_zc, style);
    let b = class_nll(g, logits_zhat, style);
    g.add(a, b)
}

/// Discriminator fake-class term: `-log p(fake | z_g)`.
pub fn adversarial_fake_term(g: &mut Graph, logits_zg: Var) -> Var {
    class_nll(g, logits_zg, FAKE_CLASS)
}

/// `½ ‖pred - target‖²` averaged over rows.
pub fn half_squared_error(g: &mut Graph, pred: Var, target: Var) -> Var {
    let b = g.shape(pred).0;
    let diff = g.sub(pred, target);
    let sq = g.square(diff);
    let s = g.sum(sq);
    g.scale(s, 0.5 / b as f64)
}

/// Self-reconstruction: `G(z_c, h_s^i)` against `z_c`.
pub fn recon_loss(nets: &TransferNets, g: &mut Graph, z_c: Var, h_s_source: Var) -> Var {
    let out = nets.generate_graph(g, z_c, h_s_source);
    half_squared_error(g, out, z_c)
}

/// Cycle consistency: `G(z_g, h_s^i)` against `z_c`.
pub fn cycle_loss(nets: &TransferNets, g: &mut Graph, z_g: Var, z_c: Var, h_s_source: Var) -> Var {
    let out = nets.generate_graph(g, z_g, h_s_source);
    half_squared_error(g, out, z_c)
}

/// Input gradient of `logsumexp` over the real-style logits of a tanh MLP,
/// expressed as graph nodes so that it can itself be differentiated.
pub fn real_score_input_gradient(mlp: &Mlp, store: &ParamStore, g: &mut Graph, x: Var) -> Var {
    assert_eq!(
        mlp.activation,
        Activation::Tanh,
        "penalty assumes tanh hidden layers"
    );
    let mut acts = Vec::with_capacity(mlp.layers.len());
    let mut h = x;
    for (i, layer) in mlp.layers.iter().enumerate() {
        h = layer.forward(g, store, h);
        if i + 1 < mlp.layers.len() {
            h = g.tanh(h);
            acts.push(h);
        }
    }
    let real = g.slice_cols(h, 0, FAKE_CLASS);
    let mut delta = g.softmax(real);
    let last = mlp.layers.len() - 1;
    let w_last = g.param(store, mlp.layers[last].w);
    let w_real = g.slice_cols(w_last, 0, FAKE_CLASS);
    let wt = g.transpose(w_real);
    delta = g.matmul(delta, wt);
    for i in (0..last).rev() {
        let a2 = g.square(acts[i]);
        let deriv = g.scale(a2, -1.0);
        let deriv = g.add_scalar(deriv, 1.0);
        delta = g.mul(delta, deriv);
        let w = g.param(store, mlp.layers[i].w);
        let wt = g.transpose(w);
        delta = g.matmul(delta, wt);
    }
    delta
}

/// Mean of `(‖∇ score(x̂)‖ - 1)²` over interpolates `x̂ = u·real + (1-u)·fake`
/// with one mixing weight per row in `u`.
pub fn gradient_penalty(
    nets: &TransferNets,
    g: &mut Graph,
    real: &Array2<f64>,
    fake: &Array2<f64>,
    u: &Array2<f64>,
) -> Var {
    let mix = Array2::from_shape_fn(real.dim(), |(i, j)| {
        u[[i, 0]] * real[[i, j]] + (1.0 - u[[i, 0]]) * fake[[i, j]]
    });
    let x = g.constant(mix);
    let grad = real_score_input_gradient(&nets.discriminator, &nets.disc_store, g, x);
    let sq = g.square(grad);
    let norm2 = g.row_sum(sq);
    let norm2 = g.add_scalar(norm2, 1e-12);
    let norm = g.sqrt(norm2);
    let dev = g.add_scalar(norm, -1.0);
    let dev2 = g.square(dev);
    g.mean(dev2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nets(dim: usize) -> TransferNets {
        let config = TransferConfig {
            generator_hidden: 6,
            disc_hidden: 5,
            flow: FlowConfig {
                steps: 2,
                hidden: 6,
                context_dim: 3,
                conditioner_hidden: 4,
                ..FlowConfig::default()
            },
            ..TransferConfig::default()
        };
        TransferNets::new(dim, &config)
    }

    fn zero_store(store: &mut ParamStore) {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let z = Array2::zeros(store.value(id).dim());
            store.set(id, z).unwrap();
        }
    }

    #[test]
    fn zero_generator_outputs_zero() {
        let mut n = nets(4);
        zero_store(&mut n.gen_store);
        let z = Array2::from_elem((2, 4), 0.7);
        assert_eq!(n.generate(&z, &z).unwrap(), Array2::<f64>::zeros((2, 4)));
        assert!(matches!(
            n.generate(&Array2::<f64>::zeros((2, 3)), &z),
            Err(TransferError::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn uniform_discriminator_losses_are_ln3() {
        let mut n = nets(4);
        zero_store(&mut n.disc_store);
        let mut g = Graph::new();
        let z = g.constant(Array2::from_elem((3, 4), 0.2));
        let logits = n.disc_graph(&mut g, z);
        let s = style_loss(&mut g, logits, TARGET_CLASS);
        let f = adversarial_fake_term(&mut g, logits);
        let a = adversarial_style_term(&mut g, logits, logits, SOURCE_CLASS);
        assert!((g.scalar(s) - 3f64.ln()).abs() < 1e-12);
        assert!((g.scalar(f) - 3f64.ln()).abs() < 1e-12);
        assert!((g.scalar(a) - 2.0 * 3f64.ln()).abs() < 1e-12);
        let p = n.disc_probs(&Array2::from_elem((2, 4), 1.0));
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_conventions() {
        let mut g = Graph::new();
        let z = Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f64);
        let mut shifted = z.clone();
        shifted.column_mut(0).mapv_inplace(|x| x + 1.0);
        let a = g.constant(shifted);
        let b = g.constant(z);
        let l = half_squared_error(&mut g, a, b);
        assert!((g.scalar(l) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_discriminator_penalty_is_one() {
        let mut n = nets(4);
        zero_store(&mut n.disc_store);
        let real = Array2::from_elem((3, 4), 1.0);
        let fake = Array2::zeros((3, 4));
        let u = Array2::from_elem((3, 1), 0.5);
        let mut g = Graph::new();
        let p = gradient_penalty(&n, &mut g, &real, &fake, &u);
        assert!((g.scalar(p) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn unit_slope_linear_discriminator_has_no_penalty() {
        let mut store = ParamStore::new(DISC_STORE_TAG);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::new(&mut store, "d", &[3, 3], Activation::Tanh, &mut rng);
        let w = Array2::from_shape_vec((3, 3), vec![0.6, 0.6, -2.0, 0.8, 0.8, 5.0, 0.0, 0.0, 1.0])
            .unwrap();
        store.set(mlp.layers[0].w, w).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Array2::from_shape_fn((4, 3), |(i, j)| {
            (i * 3 + j) as f64 * 0.1
        }));
        let grad = real_score_input_gradient(&mlp, &store, &mut g, x);
        for row in g.value(grad).rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}
