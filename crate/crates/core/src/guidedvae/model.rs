//! Sequence VAE over SMILES tokens with guided latent slots.

use molxfer_nn::ndarray::{s, Array2};
use molxfer_nn::{Activation, Graph, Gru, Linear, Mlp, ParamId, ParamStore, Var};
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::VaeError;
use crate::guidedvae::attributes::{AttributeKind, AttributeSpec, N_ATTRIBUTES};
use crate::guidedvae::grammar::DecodeGrammar;
use crate::guidedvae::vocab::{Vocabulary, BOS, EOS};

pub const VAE_STORE_TAG: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VAEConfig {
    pub token_embed_dim: usize,
    pub hidden_dim: usize,
    pub rnn_layers: usize,
    pub latent_dim: usize,
    pub kl_weight: f64,
    /// Fraction of all training steps over which the KL weight ramps up from 0.
    pub kl_warmup_fraction: f64,
    /// Scale of the reversed gradient reaching the encoder from the inhibition heads.
    pub inhibition_weight: f64,
    pub head_hidden: usize,
    pub max_decode_len: usize,
    /// Restricts decoding to tokens that keep the prefix closable and within valence.
    pub constrained_decoding: bool,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for VAEConfig {
    fn default() -> Self {
        VAEConfig {
            token_embed_dim: 512,
            hidden_dim: 512,
            rnn_layers: 3,
            latent_dim: 512,
            kl_weight: 0.05,
            kl_warmup_fraction: 0.1,
            inhibition_weight: 1.0,
            head_hidden: 32,
            max_decode_len: 64,
            constrained_decoding: true,
            batch_size: 64,
            epochs: 80,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl VAEConfig {
    /// Dimensions sized for single-core desk runs.
    pub fn desk() -> Self {
        VAEConfig {
            token_embed_dim: 32,
            hidden_dim: 128,
            rnn_layers: 1,
            latent_dim: 32,
            head_hidden: 16,
            epochs: 12,
            learning_rate: 2e-3,
            ..VAEConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), VaeError> {
        let bad = |m: &str| Err(VaeError::InvalidConfig(m.to_string()));
        if self.latent_dim <= N_ATTRIBUTES {
            return bad("latent_dim must exceed the attribute count");
        }
        if !(self.kl_weight >= 0.0) {
            return bad("kl_weight must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.kl_warmup_fraction) {
            return bad("kl_warmup_fraction must lie in [0, 1]");
        }
        if self.token_embed_dim == 0
            || self.hidden_dim == 0
            || self.rnn_layers == 0
            || self.head_hidden == 0
        {
            return bad("layer widths and counts must be positive");
        }
        if self.batch_size == 0 || self.max_decode_len == 0 {
            return bad("batch_size and max_decode_len must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeLayout {
    pub embed: ParamId,
    pub encoder: Vec<Gru>,
    pub mu: Linear,
    pub logvar: Linear,
    pub decoder_init: Vec<Linear>,
    /// Latent code projected into the first decoder layer's gates at every step.
    pub decoder_latent: ParamId,
    pub decoder: Vec<Gru>,
    pub output: Linear,
    pub excitation: Vec<Mlp>,
    pub inhibition: Vec<Mlp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VAEModel {
    pub config: VAEConfig,
    pub vocab: Vocabulary,
    pub attributes: Vec<AttributeSpec>,
    pub store: ParamStore,
    pub layout: VaeLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

/// Encoder outputs for a batch, one row per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub mu: Array2<f64>,
    pub logvar: Array2<f64>,
    pub z: Array2<f64>,
}

/// Graph nodes of every loss term for one batch.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub recon: Var,
    pub kl: Var,
    pub elbo: Var,
    pub excitation: Var,
    pub inhibition: Var,
    /// Quantity handed to the optimizer: the inhibition term enters through
    /// a reversed gradient, so heads minimize it while the encoder maximizes it.
    pub objective: Var,
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

impl VAEModel {
    pub fn new(
        config: VAEConfig,
        vocab: Vocabulary,
        attributes: Vec<AttributeSpec>,
    ) -> Result<Self, VaeError> {
        config.validate()?;
        if attributes.len() != N_ATTRIBUTES {
            return Err(VaeError::InvalidConfig(format!(
                "expected {N_ATTRIBUTES} attribute specs"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new(VAE_STORE_TAG);
        let (e, h, d, v) = (
            config.token_embed_dim,
            config.hidden_dim,
            config.latent_dim,
            vocab.len(),
        );
        let embed = store.glorot("embed", v, e, &mut rng);
        let encoder = (0..config.rnn_layers)
            .map(|l| {
                Gru::new(
                    &mut store,
                    &format!("enc{l}"),
                    if l == 0 { e } else { h },
                    h,
                    &mut rng,
                )
            })
            .collect();
        let mu = Linear::new(&mut store, "mu", h, d, &mut rng);
        let logvar = Linear::new(&mut store, "logvar", h, d, &mut rng);
        let decoder_init = (0..config.rnn_layers)
            .map(|l| Linear::new(&mut store, &format!("dec_init{l}"), d, h, &mut rng))
            .collect();
        let decoder_latent = store.glorot("dec_latent", d, 3 * h, &mut rng);
        let decoder = (0..config.rnn_layers)
            .map(|l| {
                Gru::new(
                    &mut store,
                    &format!("dec{l}"),
                    if l == 0 { e } else { h },
                    h,
                    &mut rng,
                )
            })
            .collect();
        let output = Linear::new(&mut store, "out", h, v, &mut rng);
        let k = config.head_hidden;
        let excitation = (0..N_ATTRIBUTES)
            .map(|t| {
                Mlp::new(
                    &mut store,
                    &format!("excite{t}"),
                    &[1, k, 1],
                    Activation::Tanh,
                    &mut rng,
                )
            })
            .collect();
        let inhibition = (0..N_ATTRIBUTES)
            .map(|t| {
                Mlp::new(
                    &mut store,
                    &format!("inhibit{t}"),
                    &[d - N_ATTRIBUTES, k, 1],
                    Activation::Tanh,
                    &mut rng,
                )
            })
            .collect();
        Ok(VAEModel {
            config,
            vocab,
            attributes,
            store,
            layout: VaeLayout {
                embed,
                encoder,
                mu,
                logvar,
                decoder_init,
                decoder_latent,
                decoder,
                output,
                excitation,
                inhibition,
            },
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn is_frozen(&self) -> bool {
        self.store.is_frozen()
    }

    pub fn freeze(&mut self) {
        self.store.freeze();
    }

    pub fn tokenize_all<S: AsRef<str>>(&self, smiles: &[S]) -> Result<Vec<Vec<usize>>, VaeError> {
        smiles
            .iter()
            .map(|s| self.vocab.encode(s.as_ref()))
            .collect()
    }

    /// Runs stacked recurrent layers over time-major rows (`t * B + b`) and
    /// returns each sequence's top-layer state at its last token.
    fn encoder_states(&self, g: &mut Graph, seqs: &[Vec<usize>]) -> Var {
        let b = seqs.len();
        let len = seqs.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let h = self.config.hidden_dim;
        let mut idx = Vec::with_capacity(len * b);
        for t in 0..len {
            for s in seqs {
                idx.push(s.get(t).copied().unwrap_or(EOS));
            }
        }
        let table = g.param(&self.store, self.layout.embed);
        let mut input = g.gather(table, &idx);
        let masks: Vec<Var> = (0..len)
            .map(|t| {
                let m = Array2::from_shape_fn(
                    (b, 1),
                    |(i, _)| if t < seqs[i].len() { 1.0 } else { 0.0 },
                );
                g.constant(m)
            })
            .collect();
        let mut state = g.constant(Array2::zeros((b, h)));
        for (l, gru) in self.layout.encoder.iter().enumerate() {
            let xp = gru.project_inputs(g, &self.store, input);
            let mut hs = g.constant(Array2::zeros((b, h)));
            let mut outputs = Vec::with_capacity(len);
            for (t, &mask) in masks.iter().enumerate() {
                let xt = g.slice_rows(xp, t * b, (t + 1) * b);
                let next = gru.step(g, &self.store, xt, hs);
                let delta = g.sub(next, hs);
                let delta = g.mul_col(delta, mask);
                hs = g.add(hs, delta);
                if l + 1 < self.layout.encoder.len() {
                    outputs.push(hs);
                }
            }
            if l + 1 < self.layout.encoder.len() {
                input = g.concat_rows(&outputs);
            }
            state = hs;
        }
        state
    }

    /// Mean and log-variance nodes for a batch.
    pub fn encoder_graph(&self, g: &mut Graph, seqs: &[Vec<usize>]) -> (Var, Var) {
        let state = self.encoder_states(g, seqs);
        let mu = self.layout.mu.forward(g, &self.store, state);
        let logvar = self.layout.logvar.forward(g, &self.store, state);
        (mu, logvar)
    }

    /// `z = mu + exp(logvar / 2) * eps`.
    pub fn reparameterize(g: &mut Graph, mu: Var, logvar: Var, eps: &Array2<f64>) -> Var {
        let half = g.scale(logvar, 0.5);
        let std = g.exp(half);
        let e = g.constant(eps.clone());
        let noise = g.mul(std, e);
        g.add(mu, noise)
    }

    pub fn encode(&self, seqs: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Encoded {
        let mut g = Graph::new();
        let (mu, logvar) = self.encoder_graph(&mut g, seqs);
        let eps = standard_normal(seqs.len(), self.latent_dim(), rng);
        let z = Self::reparameterize(&mut g, mu, logvar, &eps);
        Encoded {
            mu: g.value(mu).clone(),
            logvar: g.value(logvar).clone(),
            z: g.value(z).clone(),
        }
    }

    /// Posterior means of SMILES strings, in chunks of the training batch size.
    pub fn encode_means<S: AsRef<str>>(&self, smiles: &[S]) -> Result<Array2<f64>, VaeError> {
        let seqs = self.tokenize_all(smiles)?;
        let mut out = Array2::zeros((seqs.len(), self.latent_dim()));
        let step = self.config.batch_size.max(1) * 4;
        for start in (0..seqs.len()).step_by(step) {
            let end = (start + step).min(seqs.len());
            let mut g = Graph::new();
            let (mu, _) = self.encoder_graph(&mut g, &seqs[start..end]);
            out.slice_mut(s![start..end, ..]).assign(g.value(mu));
        }
        Ok(out)
    }

    fn decoder_init_states(&self, g: &mut Graph, z: Var) -> Vec<Var> {
        self.layout
            .decoder_init
            .iter()
            .map(|lin| {
                let h = lin.forward(g, &self.store, z);
                g.tanh(h)
            })
            .collect()
    }

    /// Summed token negative log-likelihood under teacher forcing; each target
    /// sequence is the tokens followed by the end symbol.
    pub fn reconstruction_nll(&self, g: &mut Graph, z: Var, seqs: &[Vec<usize>]) -> Var {
        let b = seqs.len();
        let steps = seqs.iter().map(Vec::len).max().unwrap_or(0) + 1;
        let mut inputs = Vec::with_capacity(steps * b);
        let mut targets = Vec::with_capacity(steps * b);
        let mut zrep = Vec::with_capacity(steps * b);
        for t in 0..steps {
            for (i, s) in seqs.iter().enumerate() {
                inputs.push(if t == 0 {
                    BOS
                } else {
                    s.get(t - 1).copied().unwrap_or(EOS)
                });
                targets.push(match t.cmp(&s.len()) {
                    std::cmp::Ordering::Less => Some(s[t]),
                    std::cmp::Ordering::Equal => Some(EOS),
                    std::cmp::Ordering::Greater => None,
                });
                zrep.push(i);
            }
        }
        let mut states = self.decoder_init_states(g, z);
        let table = g.param(&self.store, self.layout.embed);
        let mut input = g.gather(table, &inputs);
        let wz = g.param(&self.store, self.layout.decoder_latent);
        let zp = g.matmul(z, wz);
        let zp = g.gather(zp, &zrep);
        for (l, gru) in self.layout.decoder.iter().enumerate() {
            let mut xp = gru.project_inputs(g, &self.store, input);
            if l == 0 {
                xp = g.add(xp, zp);
            }
            let mut outputs = Vec::with_capacity(steps);
            for t in 0..steps {
                let xt = g.slice_rows(xp, t * b, (t + 1) * b);
                states[l] = gru.step(g, &self.store, xt, states[l]);
                outputs.push(states[l]);
            }
            input = g.concat_rows(&outputs);
        }
        let logits = self.layout.output.forward(g, &self.store, input);
        g.nll(logits, &targets)
    }

    /// Closed-form `KL(N(mu, exp(logvar)) || N(0, I))` summed over the batch.
    pub fn kl_divergence(g: &mut Graph, mu: Var, logvar: Var) -> Var {
        let mu2 = g.square(mu);
        let var = g.exp(logvar);
        let a = g.add_scalar(logvar, 1.0);
        let a = g.sub(a, mu2);
        let a = g.sub(a, var);
        let s = g.sum(a);
        g.scale(s, -0.5)
    }

    fn head_loss(&self, g: &mut Graph, pred: Var, labels: &Array2<f64>, t: usize) -> Var {
        let y = labels.slice(s![.., t..t + 1]).to_owned();
        match self.attributes[t].kind {
            AttributeKind::Continuous => {
                let yv = g.constant(y);
                let diff = g.sub(pred, yv);
                let sq = g.square(diff);
                let s = g.sum(sq);
                g.scale(s, 0.5)
            }
            AttributeKind::Binary => {
                let l = g.bce_logits(pred, y);
                g.sum(l)
            }
        }
    }

    /// Summed negative log-likelihood of every excitation head reading its own
    /// slot `z[:, t]`, divided by the batch size.
    pub fn excitation_loss(&self, g: &mut Graph, z: Var, labels: &Array2<f64>) -> Var {
        let b = g.shape(z).0 as f64;
        let mut total = g.scalar_constant(0.0);
        for t in 0..N_ATTRIBUTES {
            let zt = g.slice_cols(z, t, t + 1);
            let pred = self.layout.excitation[t].forward(g, &self.store, zt);
            let l = self.head_loss(g, pred, labels, t);
            total = g.add(total, l);
        }
        g.scale(total, 1.0 / b)
    }

    /// Same form over the inhibition heads reading `z[:, T..]` through a
    /// gradient-reversal connection.
    pub fn inhibition_loss(&self, g: &mut Graph, z: Var, labels: &Array2<f64>) -> Var {
        let (b, d) = g.shape(z);
        let rest = g.slice_cols(z, N_ATTRIBUTES, d);
        let rest = g.grad_reverse(rest, self.config.inhibition_weight);
        let mut total = g.scalar_constant(0.0);
        for t in 0..N_ATTRIBUTES {
            let pred = self.layout.inhibition[t].forward(g, &self.store, rest);
            let l = self.head_loss(g, pred, labels, t);
            total = g.add(total, l);
        }
        g.scale(total, 1.0 / b as f64)
    }

    /// All loss terms for one batch. `labels` holds normalized attributes.
    pub fn loss_terms(
        &self,
        g: &mut Graph,
        seqs: &[Vec<usize>],
        labels: &Array2<f64>,
        eps: &Array2<f64>,
        kl_weight: f64,
    ) -> LossTerms {
        let b = seqs.len() as f64;
        let (mu, logvar) = self.encoder_graph(g, seqs);
        let z = Self::reparameterize(g, mu, logvar, eps);
        let nll = self.reconstruction_nll(g, z, seqs);
        let recon = g.scale(nll, 1.0 / b);
        let kl_sum = Self::kl_divergence(g, mu, logvar);
        let kl = g.scale(kl_sum, 1.0 / b);
        let weighted = g.scale(kl, kl_weight);
        let elbo = g.add(recon, weighted);
        let excitation = self.excitation_loss(g, z, labels);
        let inhibition = self.inhibition_loss(g, z, labels);
        let objective = g.add(elbo, excitation);
        let objective = g.add(objective, inhibition);
        LossTerms {
            recon,
            kl,
            elbo,
            excitation,
            inhibition,
            objective,
        }
    }

    /// Autoregressive decoding from latent rows until the end symbol or the
    /// length bound.
    pub fn decode(
        &self,
        z: &Array2<f64>,
        mode: DecodeMode,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Vec<usize>> {
        let b = z.nrows();
        let mut g = Graph::new();
        let zv = g.constant(z.clone());
        let mut states = self.decoder_init_states(&mut g, zv);
        let wz = g.param(&self.store, self.layout.decoder_latent);
        let zp = g.matmul(zv, wz);
        let table = g.param(&self.store, self.layout.embed);
        let mut current = vec![BOS; b];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); b];
        let mut done = vec![false; b];
        let grammar = DecodeGrammar::new(&self.vocab);
        let mut prefixes = vec![grammar.start(); b];
        let max_len = self.config.max_decode_len;
        let constrained = self.config.constrained_decoding;
        for step in 0..max_len {
            let mut input = g.gather(table, &current);
            for (l, gru) in self.layout.decoder.iter().enumerate() {
                let mut xp = gru.project_inputs(&mut g, &self.store, input);
                if l == 0 {
                    xp = g.add(xp, zp);
                }
                states[l] = gru.step(&mut g, &self.store, xp, states[l]);
                input = states[l];
            }
            let logits = self.layout.output.forward(&mut g, &self.store, input);
            let values = g.value(logits);
            for i in 0..b {
                if done[i] {
                    continue;
                }
                let row = values.row(i);
                let mask = [max_len - step - 1, usize::MAX]
                    .iter()
                    .filter(|_| constrained)
                    .map(|&budget| {
                        (0..row.len())
                            .map(|j| grammar.allowed_within(&prefixes[i], j, budget))
                            .collect::<Vec<_>>()
                    })
                    .find(|mask| mask.iter().any(|&m| m))
                    .unwrap_or_else(|| vec![true; row.len()]);
                let next = match mode {
                    DecodeMode::Greedy => {
                        row.iter()
                            .enumerate()
                            .filter(|(j, _)| mask[*j])
                            .fold((0, f64::NEG_INFINITY), |best, (j, &x)| {
                                if x > best.1 {
                                    (j, x)
                                } else {
                                    best
                                }
                            })
                            .0
                    }
                    DecodeMode::Sample => {
                        let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                        let w: Vec<f64> = row
                            .iter()
                            .zip(&mask)
                            .map(|(&x, &keep)| if keep { (x - m).exp() } else { 0.0 })
                            .collect();
                        WeightedIndex::new(&w).expect("finite logits").sample(rng)
                    }
                };
                grammar.push(&mut prefixes[i], next);
                if next == EOS || next == BOS {
                    done[i] = true;
                } else {
                    out[i].push(next);
                }
                current[i] = next;
            }
            if done.iter().all(|&d| d) {
                break;
            }
        }
        out
    }

    pub fn decode_smiles(
        &self,
        z: &Array2<f64>,
        mode: DecodeMode,
        rng: &mut ChaCha8Rng,
    ) -> Vec<String> {
        self.decode(z, mode, rng)
            .iter()
            .map(|ids| self.vocab.decode(ids))
            .collect()
    }

    /// Excitation head prediction for slot `t` from latent rows.
    pub fn predict_excitation(&self, z: &Array2<f64>, t: usize) -> Vec<f64> {
        let mut g = Graph::new();
        let zv = g.constant(z.slice(s![.., t..t + 1]).to_owned());
        let p = self.layout.excitation[t].forward(&mut g, &self.store, zv);
        g.value(p).column(0).to_vec()
    }

    /// Inhibition head prediction for slot `t` from the remaining coordinates.
    pub fn predict_inhibition(&self, z: &Array2<f64>, t: usize) -> Vec<f64> {
        let mut g = Graph::new();
        let zv = g.constant(z.slice(s![.., N_ATTRIBUTES..]).to_owned());
        let p = self.layout.inhibition[t].forward(&mut g, &self.store, zv);
        g.value(p).column(0).to_vec()
    }
}
