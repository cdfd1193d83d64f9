//! Style latent space: a Gaussian prior estimated from style instances,
//! transformed by a conditioned inverse autoregressive flow.

use molxfer_nn::ndarray::{Array2, Axis};
use molxfer_nn::{sigmoid, Activation, Graph, Mlp, ParamId, ParamStore, Var};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::FlowError;
use crate::guidedvae::standard_normal;

pub const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylePrior {
    pub mu0: Vec<f64>,
    pub var0: Vec<f64>,
    pub k: usize,
}

impl StylePrior {
    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mean_row(&self) -> Array2<f64> {
        Array2::from_shape_vec((1, self.dim()), self.mu0.clone()).expect("row shape")
    }

    /// `n` rows drawn from the diagonal Gaussian.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        self.shift(&standard_normal(n, self.dim(), rng))
    }

    /// Maps standard normal noise to `mu0 + sqrt(var0) * eps`.
    pub fn shift(&self, eps: &Array2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(eps.dim(), |(i, j)| {
            self.mu0[j] + self.var0[j].sqrt() * eps[[i, j]]
        })
    }

    /// Diagonal Gaussian log-density of each row.
    pub fn log_density(&self, z: &Array2<f64>) -> Vec<f64> {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        z.rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        -0.5 * (ln2pi
                            + self.var0[j].ln()
                            + (x - self.mu0[j]).powi(2) / self.var0[j])
                    })
                    .sum()
            })
            .collect()
    }
}

/// Sample mean and floored unbiased variance of `K` latent rows.
pub fn batch_prior(latents: &Array2<f64>) -> Result<StylePrior, FlowError> {
    let k = latents.nrows();
    if k < 2 {
        return Err(FlowError::TooFewInstances(k));
    }
    let mu = latents.mean_axis(Axis(0)).expect("non-empty");
    let var0 = (0..latents.ncols())
        .map(|j| {
            let ss: f64 = latents.column(j).iter().map(|x| (x - mu[j]).powi(2)).sum();
            (ss / (k - 1) as f64).max(VARIANCE_FLOOR)
        })
        .collect();
    Ok(StylePrior {
        mu0: mu.to_vec(),
        var0,
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub steps: usize,
    pub hidden: usize,
    pub context_dim: usize,
    pub conditioner_hidden: usize,
    /// Initial bias of the gate pre-activations.
    pub gate_bias: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            steps: 6,
            hidden: 64,
            context_dim: 32,
            conditioner_hidden: 64,
            gate_bias: 2.0,
        }
    }
}

/// One masked autoregressive network emitting shift `ε` and gate logit `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IafStep {
    pub w1: ParamId,
    pub wc1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub wc2: ParamId,
    pub b2: ParamId,
    pub hidden_degrees: Vec<usize>,
}

impl IafStep {
    /// Input-to-hidden mask: unit `k` sees input `i` when `i + 1 <= degree(k)`.
    pub fn input_mask(&self, dim: usize) -> Array2<f64> {
        Array2::from_shape_fn((dim, self.hidden_degrees.len()), |(i, k)| {
            if i < self.hidden_degrees[k] {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Hidden-to-output mask over `[ε | φ]`: output `j` sees unit `k` when `degree(k) <= j`.
    pub fn output_mask(&self, dim: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.hidden_degrees.len(), 2 * dim), |(k, j)| {
            if self.hidden_degrees[k] <= j % dim {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Nodes produced by one flow step.
#[derive(Debug, Clone, Copy)]
pub struct StepNodes {
    pub z_next: Var,
    pub eps: Var,
    pub phi: Var,
    pub log_sigma: Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowChain {
    pub config: FlowConfig,
    pub dim: usize,
    pub conditioner: Mlp,
    pub steps: Vec<IafStep>,
}

/// Values of a full forward pass, kept for inspection and inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    /// `z_0 ... z_T`.
    pub states: Vec<Array2<f64>>,
    pub sigmas: Vec<Array2<f64>>,
    /// Per-row sum of `ln σ` over all steps and dimensions.
    pub logdet: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleCode {
    pub h_s: Array2<f64>,
    pub log_density: Vec<f64>,
    pub z0: Array2<f64>,
    pub sigmas: Vec<Array2<f64>>,
}

impl FlowChain {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        config: FlowConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let (h, dc) = (config.hidden, config.context_dim);
        let conditioner = Mlp::new(
            store,
            &format!("{name}.cond"),
            &[dim, config.conditioner_hidden, dc],
            Activation::Tanh,
            rng,
        );
        let degree_span = dim.saturating_sub(1).max(1);
        let steps = (0..config.steps)
            .map(|t| {
                let p = format!("{name}.step{t}");
                let hidden_degrees: Vec<usize> = (0..h).map(|k| 1 + k % degree_span).collect();
                let w1 = store.glorot(&format!("{p}.w1"), dim, h, rng);
                let wc1 = store.glorot(&format!("{p}.wc1"), dc, h, rng);
                let b1 = store.zeros(&format!("{p}.b1"), 1, h);
                let w2 = store.glorot(&format!("{p}.w2"), h, 2 * dim, rng);
                let wc2 = store.glorot(&format!("{p}.wc2"), dc, 2 * dim, rng);
                let b2 = store.add(
                    &format!("{p}.b2"),
                    Array2::from_shape_fn((1, 2 * dim), |(_, j)| {
                        if j < dim {
                            0.0
                        } else {
                            config.gate_bias
                        }
                    }),
                );
                let step = IafStep {
                    w1,
                    wc1,
                    b1,
                    w2,
                    wc2,
                    b2,
                    hidden_degrees,
                };
                let masked1 = store.value(w1) * &step.input_mask(dim);
                let masked2 = store.value(w2) * &step.output_mask(dim);
                store.set(w1, masked1).expect("fresh store");
                store.set(w2, masked2).expect("fresh store");
                step
            })
            .collect();
        FlowChain {
            config,
            dim,
            conditioner,
            steps,
        }
    }

    pub fn check_dim(&self, found: usize) -> Result<(), FlowError> {
        if found != self.dim {
            return Err(FlowError::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    /// Conditioning row `c` from a `1 x d` prior mean node.
    pub fn condition_graph(&self, g: &mut Graph, store: &ParamStore, mu0: Var) -> Var {
        self.conditioner.forward(g, store, mu0)
    }

    /// Applies step `t` to rows `z` with a shared `1 x context_dim` row `c`.
    pub fn step_graph(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        t: usize,
        z: Var,
        c: Var,
    ) -> StepNodes {
        let step = &self.steps[t];
        let d = self.dim;
        let m1 = g.constant(step.input_mask(d));
        let m2 = g.constant(step.output_mask(d));
        let w1 = g.param(store, step.w1);
        let w1 = g.mul(w1, m1);
        let w2 = g.param(store, step.w2);
        let w2 = g.mul(w2, m2);
        let wc1 = g.param(store, step.wc1);
        let wc2 = g.param(store, step.wc2);
        let b1 = g.param(store, step.b1);
        let b2 = g.param(store, step.b2);
        let ctx1 = g.matmul(c, wc1);
        let ctx1 = g.add(ctx1, b1);
        let ctx2 = g.matmul(c, wc2);
        let ctx2 = g.add(ctx2, b2);
        let a = g.matmul(z, w1);
        let a = g.add_row(a, ctx1);
        let hidden = g.tanh(a);
        let out = g.matmul(hidden, w2);
        let out = g.add_row(out, ctx2);
        let eps = g.slice_cols(out, 0, d);
        let phi = g.slice_cols(out, d, 2 * d);
        let sigma = g.sigmoid(phi);
        let log_sigma = g.log_sigmoid(phi);
        let kept = g.mul(sigma, z);
        let one_minus = g.scale(sigma, -1.0);
        let one_minus = g.add_scalar(one_minus, 1.0);
        let moved = g.mul(one_minus, eps);
        let z_next = g.add(kept, moved);
        StepNodes {
            z_next,
            eps,
            phi,
            log_sigma,
        }
    }

    /// All steps; returns `z_T` and the per-row accumulated `Σ ln σ` (`B x 1`).
    pub fn forward_graph(&self, g: &mut Graph, store: &ParamStore, z0: Var, c: Var) -> (Var, Var) {
        let mut z = z0;
        let mut logdet = None;
        for t in 0..self.steps.len() {
            let nodes = self.step_graph(g, store, t, z, c);
            let inc = g.row_sum(nodes.log_sigma);
            logdet = Some(match logdet {
                None => inc,
                Some(acc) => g.add(acc, inc),
            });
            z = nodes.z_next;
        }
        let logdet = logdet.unwrap_or_else(|| g.constant(Array2::zeros((g.shape(z0).0, 1))));
        (z, logdet)
    }

    /// Style codes as graph nodes for `eps.nrows()` draws from one prior.
    pub fn style_graph(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        prior: &StylePrior,
        eps: &Array2<f64>,
    ) -> Var {
        let mu0 = g.constant(prior.mean_row());
        let c = self.condition_graph(g, store, mu0);
        let z0 = g.constant(prior.shift(eps));
        self.forward_graph(g, store, z0, c).0
    }

    pub fn condition(&self, store: &ParamStore, prior: &StylePrior) -> Array2<f64> {
        let mut g = Graph::new();
        let mu0 = g.constant(prior.mean_row());
        let c = self.condition_graph(&mut g, store, mu0);
        g.value(c).clone()
    }

    /// `(ε, φ)` emitted by step `t` for rows `z`.
    pub fn step_outputs(
        &self,
        store: &ParamStore,
        t: usize,
        z: &Array2<f64>,
        c: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let mut g = Graph::new();
        let zv = g.constant(z.clone());
        let cv = g.constant(c.clone());
        let nodes = self.step_graph(&mut g, store, t, zv, cv);
        (g.value(nodes.eps).clone(), g.value(nodes.phi).clone())
    }

    /// One step: next rows and per-row log-determinant increment.
    pub fn iaf_step(
        &self,
        store: &ParamStore,
        t: usize,
        z: &Array2<f64>,
        c: &Array2<f64>,
    ) -> (Array2<f64>, Vec<f64>) {
        let mut g = Graph::new();
        let zv = g.constant(z.clone());
        let cv = g.constant(c.clone());
        let nodes = self.step_graph(&mut g, store, t, zv, cv);
        let inc = g.value(nodes.log_sigma).sum_axis(Axis(1)).to_vec();
        (g.value(nodes.z_next).clone(), inc)
    }

    pub fn transform(&self, store: &ParamStore, z0: &Array2<f64>, c: &Array2<f64>) -> FlowTrace {
        let mut states = vec![z0.clone()];
        let mut sigmas = Vec::with_capacity(self.steps.len());
        let mut logdet = vec![0.0; z0.nrows()];
        for t in 0..self.steps.len() {
            let z = &states[t];
            let (_, phi) = self.step_outputs(store, t, z, c);
            let (next, inc) = self.iaf_step(store, t, z, c);
            for (acc, x) in logdet.iter_mut().zip(inc) {
                *acc += x;
            }
            sigmas.push(phi.mapv(sigmoid));
            states.push(next);
        }
        FlowTrace {
            states,
            sigmas,
            logdet,
        }
    }

    /// Draws `n` style codes from the prior estimated on `instances`
    /// (encoded style-instance latents, one per row).
    pub fn sample_style(
        &self,
        store: &ParamStore,
        instances: &Array2<f64>,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<StyleCode, FlowError> {
        self.check_dim(instances.ncols())?;
        let prior = batch_prior(instances)?;
        Ok(self.sample_from_prior(store, &prior, n, rng))
    }

    pub fn sample_from_prior(
        &self,
        store: &ParamStore,
        prior: &StylePrior,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> StyleCode {
        let z0 = prior.sample(n, rng);
        let c = self.condition(store, prior);
        let trace = self.transform(store, &z0, &c);
        let log_density = prior
            .log_density(&z0)
            .into_iter()
            .zip(&trace.logdet)
            .map(|(base, ld)| base - ld)
            .collect();
        StyleCode {
            h_s: trace.states[trace.states.len() - 1].clone(),
            log_density,
            z0,
            sigmas: trace.sigmas,
        }
    }

    /// Inverts step `t` one dimension at a time: output `i` of the step
    /// network depends only on inputs `< i`, which are already recovered.
    pub fn invert_step(
        &self,
        store: &ParamStore,
        t: usize,
        z_next: &Array2<f64>,
        c: &Array2<f64>,
    ) -> Array2<f64> {
        let mut z = Array2::zeros(z_next.dim());
        for i in 0..self.dim {
            let (eps, phi) = self.step_outputs(store, t, &z, c);
            for r in 0..z.nrows() {
                let sigma = sigmoid(phi[[r, i]]);
                z[[r, i]] = (z_next[[r, i]] - (1.0 - sigma) * eps[[r, i]]) / sigma;
            }
        }
        z
    }

    pub fn invert(&self, store: &ParamStore, h_s: &Array2<f64>, c: &Array2<f64>) -> Array2<f64> {
        let mut z = h_s.clone();
        for t in (0..self.steps.len()).rev() {
            z = self.invert_step(store, t, &z, c);
        }
        z
    }

    /// Every parameter id owned by the chain.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self
            .conditioner
            .layers
            .iter()
            .flat_map(|l| [l.w, l.b])
            .collect();
        for s in &self.steps {
            ids.extend([s.w1, s.wc1, s.b1, s.w2, s.wc2, s.b2]);
        }
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn chain(dim: usize, steps: usize, seed: u64) -> (ParamStore, FlowChain) {
        let mut store = ParamStore::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = FlowConfig {
            steps,
            hidden: 12,
            context_dim: 5,
            conditioner_hidden: 7,
            ..FlowConfig::default()
        };
        let chain = FlowChain::new(&mut store, "flow", dim, config, &mut rng);
        (store, chain)
    }

    #[test]
    fn prior_of_identical_vectors_hits_the_floor() {
        let z = Array2::from_shape_fn((5, 3), |(_, j)| j as f64);
        let p = batch_prior(&z).unwrap();
        assert_eq!(p.mu0, vec![0.0, 1.0, 2.0]);
        assert_eq!(p.var0, vec![VARIANCE_FLOOR; 3]);
    }

    #[test]
    fn prior_of_two_points() {
        let z = Array2::from_shape_fn((2, 4), |(i, _)| 2.0 * i as f64);
        let p = batch_prior(&z).unwrap();
        assert_eq!(p.mu0, vec![1.0; 4]);
        assert_eq!(p.var0, vec![2.0; 4]);
        assert_eq!(p.k, 2);
    }

    #[test]
    fn prior_needs_two_instances() {
        let z = Array2::zeros((1, 4));
        assert_eq!(batch_prior(&z).unwrap_err(), FlowError::TooFewInstances(1));
    }

    #[test]
    fn constant_half_gate_logdet() {
        let (mut store, chain) = chain(4, 1, 3);
        for id in chain.param_ids() {
            let zeros = Array2::zeros(store.value(id).dim());
            store.set(id, zeros).unwrap();
        }
        let z = Array2::from_elem((1, 4), 0.7);
        let c = Array2::zeros((1, 5));
        let (next, inc) = chain.iaf_step(&store, 0, &z, &c);
        assert!((inc[0] - 4.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((inc[0] + 2.7726).abs() < 1e-4);
        assert!(next.iter().all(|&x| (x - 0.35).abs() < 1e-12));
    }

    #[test]
    fn saturated_gates_are_identity() {
        let (mut store, chain) = chain(3, 2, 4);
        for s in &chain.steps {
            for id in [s.w2, s.wc2] {
                let zeros = Array2::zeros(store.value(id).dim());
                store.set(id, zeros).unwrap();
            }
            let bias = Array2::from_shape_fn((1, 6), |(_, j)| if j < 3 { 0.3 } else { 800.0 });
            store.set(s.b2, bias).unwrap();
        }
        let z = Array2::from_shape_vec((1, 3), vec![0.2, -0.4, 1.1]).unwrap();
        let prior = batch_prior(&Array2::from_shape_fn((3, 3), |(i, j)| (i * j) as f64)).unwrap();
        let c = chain.condition(&store, &prior);
        let trace = chain.transform(&store, &z, &c);
        assert_eq!(trace.states[2], z);
        assert_eq!(trace.logdet[0], 0.0);
    }

    #[test]
    fn log_density_is_base_minus_logdet() {
        let (store, chain) = chain(4, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let instances = standard_normal(10, 4, &mut rng);
        let code = chain.sample_style(&store, &instances, 3, &mut rng).unwrap();
        let prior = batch_prior(&instances).unwrap();
        let base = prior.log_density(&code.z0);
        for r in 0..3 {
            let ld: f64 = code
                .sigmas
                .iter()
                .map(|s| s.row(r).iter().map(|x| x.ln()).sum::<f64>())
                .sum();
            assert!((code.log_density[r] - (base[r] - ld)).abs() < 1e-8);
            assert!(ld < 0.0);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let (store, chain) = chain(4, 2, 7);
        let instances = standard_normal(10, 4, &mut ChaCha8Rng::seed_from_u64(8));
        let a = chain
            .sample_style(&store, &instances, 2, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = chain
            .sample_style(&store, &instances, 2, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a.h_s, b.h_s);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let (store, chain) = chain(4, 2, 7);
        let instances = Array2::zeros((10, 3));
        let err = chain
            .sample_style(&store, &instances, 1, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap_err();
        assert_eq!(
            err,
            FlowError::DimensionMismatch {
                expected: 4,
                found: 3
            }
        );
    }
}
