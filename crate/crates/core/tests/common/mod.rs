//! Finite-difference and perturbation oracles shared by the integration tests.

#![allow(dead_code)]

use molxfer::guidedvae::attributes::{attributes_of, fit_specs, normalize_row};
use molxfer::guidedvae::{VAEConfig, VAEModel, Vocabulary};
use molxfer::styleflow::{batch_prior, FlowChain, FlowConfig, StylePrior};
use molxfer::transfer::{
    cycle_loss, gradient_penalty, recon_loss, style_loss, TransferConfig, TransferNets,
};
use molxfer_chem::smiles::parse_valid;
use molxfer_nn::gradcheck::{numeric_input_grad, numeric_param_grad, relative_error};
use molxfer_nn::ndarray::Array2;
use molxfer_nn::{Graph, ParamStore, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn random(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
}

/// Adds uniform noise to every parameter so masked and gated paths are all non-trivial.
pub fn jitter(store: &mut ParamStore, scale: f64, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let v = store.value(id);
        let noisy = v + &random(v.nrows(), v.ncols(), scale, rng);
        store.set(id, noisy).expect("unfrozen store");
    }
}

pub fn random_flow(dim: usize, steps: usize, seed: u64) -> (ParamStore, FlowChain, StylePrior) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new(7);
    let config = FlowConfig {
        steps,
        hidden: 3 * dim,
        context_dim: 4,
        conditioner_hidden: 6,
        ..FlowConfig::default()
    };
    let chain = FlowChain::new(&mut store, "flow", dim, config, &mut rng);
    jitter(&mut store, 0.5, &mut rng);
    let instances = random(10, dim, 1.5, &mut rng);
    let prior = batch_prior(&instances).expect("ten instances");
    (store, chain, prior)
}

/// Largest absolute error of sequential inversion over a batch of flow samples.
pub fn flow_inversion_error(dim: usize, steps: usize, seed: u64) -> f64 {
    let (store, chain, prior) = random_flow(dim, steps, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let code = chain.sample_from_prior(&store, &prior, 8, &mut rng);
    let c = chain.condition(&store, &prior);
    let back = chain.invert(&store, &code.h_s, &c);
    (&back - &code.z0).iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `ln |det A|` by Gaussian elimination with partial pivoting.
pub fn log_abs_det(mut a: Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .expect("non-empty");
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
            }
        }
        let p = a[[col, col]];
        total += p.abs().ln();
        for r in col + 1..n {
            let f = a[[r, col]] / p;
            for k in col..n {
                a[[r, k]] -= f * a[[col, k]];
            }
        }
    }
    total
}

/// Largest gap between the accumulated log-determinant and `ln |det J|` of a
/// central-difference Jacobian of the full chain, over several rows.
pub fn flow_logdet_error(dim: usize, steps: usize, seed: u64) -> f64 {
    let (store, chain, prior) = random_flow(dim, steps, seed);
    let c = chain.condition(&store, &prior);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let z0 = prior.sample(1, &mut rng);
        let trace = chain.transform(&store, &z0, &c);
        let h = 1e-6;
        let mut jac = Array2::zeros((dim, dim));
        for j in 0..dim {
            let mut plus = z0.clone();
            plus[[0, j]] += h;
            let mut minus = z0.clone();
            minus[[0, j]] -= h;
            let fp = chain.transform(&store, &plus, &c);
            let fm = chain.transform(&store, &minus, &c);
            let (fp, fm) = (&fp.states[steps], &fm.states[steps]);
            for i in 0..dim {
                jac[[i, j]] = (fp[[0, i]] - fm[[0, i]]) / (2.0 * h);
            }
        }
        worst = worst.max((log_abs_det(jac) - trace.logdet[0]).abs());
    }
    worst
}

/// Count of step outputs `(ε_j, φ_j)` that move when an input `z_i` with
/// `i >= j` is perturbed, over every step and every input dimension.
pub fn flow_mask_violations(dim: usize, steps: usize, seed: u64) -> usize {
    let (store, chain, prior) = random_flow(dim, steps, seed);
    let c = chain.condition(&store, &prior);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
    let z = prior.sample(3, &mut rng);
    let mut violations = 0;
    let mut moved_allowed = 0;
    for t in 0..steps {
        let (eps0, phi0) = chain.step_outputs(&store, t, &z, &c);
        for i in 0..dim {
            let mut probe = z.clone();
            probe.column_mut(i).mapv_inplace(|x| x + 0.7);
            let (eps1, phi1) = chain.step_outputs(&store, t, &probe, &c);
            for j in 0..dim {
                for r in 0..z.nrows() {
                    let changed = eps1[[r, j]] != eps0[[r, j]] || phi1[[r, j]] != phi0[[r, j]];
                    if j <= i && changed {
                        violations += 1;
                    }
                    if j > i && changed {
                        moved_allowed += 1;
                    }
                }
            }
        }
    }
    assert!(moved_allowed > 0, "perturbations never reach later outputs");
    violations
}

/// Relative error between analytic and central-difference gradients for every
/// parameter of `store`, reduced to the worst one.
pub fn worst_param_error<F, B>(store: &ParamStore, analytic: B, mut value: F) -> f64
where
    F: FnMut(&ParamStore) -> f64,
    B: Fn(&ParamStore) -> Vec<(molxfer_nn::ParamId, Array2<f64>)>,
{
    let mut worst: f64 = 0.0;
    for (id, grad) in analytic(store) {
        let numeric = numeric_param_grad(store, id, FD_STEP, &mut value);
        worst = worst.max(relative_error(&grad, &numeric));
    }
    worst
}

pub const TOY_SMILES: [&str; 4] = ["CCO", "c1ccccc1N", "CC(=O)OC", "C1CCNC1"];

pub fn toy_vae() -> (VAEModel, Vec<Vec<usize>>, Array2<f64>) {
    let config = VAEConfig {
        token_embed_dim: 4,
        hidden_dim: 5,
        rnn_layers: 2,
        latent_dim: 10,
        head_hidden: 3,
        ..VAEConfig::default()
    };
    let vocab = Vocabulary::build(&TOY_SMILES).expect("toy vocabulary");
    let raw: Vec<_> = TOY_SMILES
        .iter()
        .map(|s| attributes_of(&parse_valid(s).expect("toy molecule")).expect("attributes"))
        .collect();
    let specs = fit_specs(&raw).expect("specs");
    let mut model = VAEModel::new(config, vocab, specs).expect("toy model");
    jitter(&mut model.store, 0.2, &mut ChaCha8Rng::seed_from_u64(41));
    let seqs = model.tokenize_all(&TOY_SMILES).expect("in vocabulary");
    let rows: Vec<_> = raw
        .iter()
        .map(|r| normalize_row(&model.attributes, r))
        .collect();
    let labels = Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j]);
    (model, seqs, labels)
}

fn with_store(model: &VAEModel, store: &ParamStore) -> VAEModel {
    let mut m = model.clone();
    m.store = store.clone();
    m
}

fn all_param_grads(
    g: &Graph,
    loss: Var,
    store: &ParamStore,
) -> Vec<(molxfer_nn::ParamId, Array2<f64>)> {
    let grads = g.backward(loss);
    store
        .ids()
        .map(|id| {
            let grad = grads
                .param(id)
                .cloned()
                .unwrap_or_else(|| Array2::zeros(store.value(id).dim()));
            (id, grad)
        })
        .collect()
}

/// Worst parameter-gradient error of the weighted ELBO at a fixed noise draw.
pub fn elbo_gradient_error() -> f64 {
    let (model, seqs, labels) = toy_vae();
    let eps = random(seqs.len(), 10, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
    let build = |m: &VAEModel, g: &mut Graph| m.loss_terms(g, &seqs, &labels, &eps, 0.3).elbo;
    worst_param_error(
        &model.store,
        |s| {
            let m = with_store(&model, s);
            let mut g = Graph::new();
            let loss = build(&m, &mut g);
            all_param_grads(&g, loss, s)
        },
        |s| {
            let m = with_store(&model, s);
            let mut g = Graph::new();
            let loss = build(&m, &mut g);
            g.scalar(loss)
        },
    )
}

/// KL term gradient with respect to the posterior mean.
pub fn kl_mean_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mu = random(3, 6, 1.0, &mut rng);
    let logvar = random(3, 6, 0.5, &mut rng);
    let mut g = Graph::new();
    let mv = g.constant(mu.clone());
    let lv = g.constant(logvar.clone());
    let kl = VAEModel::kl_divergence(&mut g, mv, lv);
    let analytic = g.backward(kl).wrt(mv).cloned().expect("mu gradient");
    let numeric = numeric_input_grad(&mu, FD_STEP, |probe| {
        let mut g = Graph::new();
        let mv = g.constant(probe.clone());
        let lv = g.constant(logvar.clone());
        let kl = VAEModel::kl_divergence(&mut g, mv, lv);
        g.scalar(kl)
    });
    relative_error(&analytic, &numeric)
}

/// Head-parameter and latent gradients of one head loss. For the inhibition
/// heads the latent gradient is compared against the negated difference.
fn head_gradient_error(inhibition: bool) -> f64 {
    let (model, _, labels) = toy_vae();
    let z = random(labels.nrows(), 10, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
    let loss_of = |m: &VAEModel, g: &mut Graph, zv: Var| {
        if inhibition {
            m.inhibition_loss(g, zv, &labels)
        } else {
            m.excitation_loss(g, zv, &labels)
        }
    };
    let params = worst_param_error(
        &model.store,
        |s| {
            let m = with_store(&model, s);
            let mut g = Graph::new();
            let zv = g.constant(z.clone());
            let loss = loss_of(&m, &mut g, zv);
            all_param_grads(&g, loss, s)
        },
        |s| {
            let m = with_store(&model, s);
            let mut g = Graph::new();
            let zv = g.constant(z.clone());
            let loss = loss_of(&m, &mut g, zv);
            g.scalar(loss)
        },
    );
    let mut g = Graph::new();
    let zv = g.constant(z.clone());
    let loss = loss_of(&model, &mut g, zv);
    let analytic = g.backward(loss).wrt(zv).cloned().expect("latent gradient");
    let numeric = numeric_input_grad(&z, FD_STEP, |probe| {
        let mut g = Graph::new();
        let zv = g.constant(probe.clone());
        let loss = loss_of(&model, &mut g, zv);
        g.scalar(loss)
    });
    let sign = if inhibition {
        -model.config.inhibition_weight
    } else {
        1.0
    };
    params.max(relative_error(&analytic, &numeric.mapv(|x| sign * x)))
}

pub fn excitation_gradient_error() -> f64 {
    head_gradient_error(false)
}

pub fn inhibition_gradient_error() -> f64 {
    head_gradient_error(true)
}

pub fn toy_nets(seed: u64) -> TransferNets {
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
        seed,
        ..TransferConfig::default()
    };
    let mut nets = TransferNets::new(4, &config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    jitter(&mut nets.gen_store, 0.3, &mut rng);
    jitter(&mut nets.disc_store, 0.3, &mut rng);
    nets
}

struct TransferInputs {
    z_c: Array2<f64>,
    z_g: Array2<f64>,
    h_src: Array2<f64>,
    eps: Array2<f64>,
    prior: StylePrior,
}

fn transfer_inputs() -> TransferInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    TransferInputs {
        z_c: random(3, 4, 1.0, &mut rng),
        z_g: random(3, 4, 1.0, &mut rng),
        h_src: random(3, 4, 1.0, &mut rng),
        eps: random(3, 4, 1.0, &mut rng),
        prior: batch_prior(&random(6, 4, 1.0, &mut rng)).expect("six instances"),
    }
}

/// Worst generator-store gradient error of a transfer loss built from `build`.
fn generator_gradient_error<F>(build: F) -> f64
where
    F: Fn(&TransferNets, &mut Graph, &TransferInputs) -> Var,
{
    let nets = toy_nets(1);
    let inputs = transfer_inputs();
    let swap = |s: &ParamStore| {
        let mut n = nets.clone();
        n.gen_store = s.clone();
        n
    };
    worst_param_error(
        &nets.gen_store,
        |s| {
            let n = swap(s);
            let mut g = Graph::new();
            let loss = build(&n, &mut g, &inputs);
            all_param_grads(&g, loss, s)
        },
        |s| {
            let n = swap(s);
            let mut g = Graph::new();
            let loss = build(&n, &mut g, &inputs);
            g.scalar(loss)
        },
    )
}

/// Style loss through the flow and generator into the discriminator's target class.
pub fn style_gradient_error() -> f64 {
    generator_gradient_error(|n, g, x| {
        let h_s = n.flow.style_graph(g, &n.gen_store, &x.prior, &x.eps);
        let z_c = g.constant(x.z_c.clone());
        let z_g = n.generate_graph(g, z_c, h_s);
        let logits = n.disc_graph(g, z_g);
        style_loss(g, logits, 1)
    })
}

pub fn recon_gradient_error() -> f64 {
    generator_gradient_error(|n, g, x| {
        let z_c = g.constant(x.z_c.clone());
        let h = g.constant(x.h_src.clone());
        recon_loss(n, g, z_c, h)
    })
}

pub fn cycle_gradient_error() -> f64 {
    generator_gradient_error(|n, g, x| {
        let z_c = g.constant(x.z_c.clone());
        let z_g = g.constant(x.z_g.clone());
        let h = g.constant(x.h_src.clone());
        cycle_loss(n, g, z_g, z_c, h)
    })
}

/// Discriminator-parameter gradient of the penalty, which differentiates
/// through the discriminator's own input gradient.
pub fn gradient_penalty_error() -> f64 {
    let nets = toy_nets(2);
    let x = transfer_inputs();
    let u = Array2::from_shape_vec((3, 1), vec![0.2, 0.5, 0.9]).expect("three rows");
    let swap = |s: &ParamStore| {
        let mut n = nets.clone();
        n.disc_store = s.clone();
        n
    };
    worst_param_error(
        &nets.disc_store,
        |s| {
            let n = swap(s);
            let mut g = Graph::new();
            let loss = gradient_penalty(&n, &mut g, &x.z_c, &x.z_g, &u);
            all_param_grads(&g, loss, s)
        },
        |s| {
            let n = swap(s);
            let mut g = Graph::new();
            let loss = gradient_penalty(&n, &mut g, &x.z_c, &x.z_g, &u);
            g.scalar(loss)
        },
    )
}

/// Named gradient-check errors for every trained objective.
pub fn all_gradient_errors() -> Vec<(&'static str, f64)> {
    vec![
        ("elbo", elbo_gradient_error()),
        ("kl_mean", kl_mean_gradient_error()),
        ("excitation", excitation_gradient_error()),
        ("inhibition", inhibition_gradient_error()),
        ("style", style_gradient_error()),
        ("recon", recon_gradient_error()),
        ("cycle", cycle_gradient_error()),
        ("gradient_penalty", gradient_penalty_error()),
    ]
}

pub struct TinyTask {
    pub vae: VAEModel,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub test: Vec<String>,
    pub scorer: molxfer::metrics::StyleScorer,
    pub scales: molxfer::metrics::PssScales,
}

/// Small generated corpus split into two pools by SA score, with a one-epoch
/// VAE over all of it.
pub fn tiny_task(seed: u64) -> TinyTask {
    use molxfer::data::generator::{make_desk_corpus, GeneratorConfig};
    use molxfer::guidedvae::{pretrain, PretrainOptions};
    use molxfer::metrics::{PssScales, StyleScorer};
    use molxfer_chem::chemprops::{content_properties, reference_smiles, FragmentFreqTable};

    let reference: Vec<_> = reference_smiles()
        .into_iter()
        .filter_map(parse_valid)
        .collect();
    let table = FragmentFreqTable::build(&reference).expect("reference table");
    let scorer = StyleScorer::Synthesizability(table);
    let corpus = make_desk_corpus(
        &GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        },
        90,
    );
    let mut scored: Vec<(f64, String)> = corpus
        .iter()
        .map(|s| {
            (
                scorer.score_smiles(s).expect("generated molecule scores"),
                s.clone(),
            )
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target: Vec<String> = scored[..40].iter().map(|(_, s)| s.clone()).collect();
    let source: Vec<String> = scored[50..].iter().map(|(_, s)| s.clone()).collect();
    let test = source[..4].to_vec();
    let config = VAEConfig {
        token_embed_dim: 8,
        hidden_dim: 16,
        rnn_layers: 1,
        latent_dim: 12,
        head_hidden: 4,
        epochs: 1,
        batch_size: 16,
        max_decode_len: 40,
        seed,
        ..VAEConfig::default()
    };
    let (vae, _) = pretrain(&corpus, &config, &PretrainOptions::default()).expect("tiny pretrain");
    let props: Vec<_> = corpus
        .iter()
        .map(|s| content_properties(&parse_valid(s).expect("valid")).expect("properties"))
        .collect();
    let scales = PssScales::fit(&props).expect("scales");
    TinyTask {
        vae,
        source,
        target,
        test,
        scorer,
        scales,
    }
}

pub fn tiny_transfer_config(disc_ratio: usize, iterations: usize, seed: u64) -> TransferConfig {
    TransferConfig {
        k_instances: 5,
        disc_ratio,
        generator_hidden: 16,
        disc_hidden: 8,
        flow: FlowConfig {
            steps: 2,
            hidden: 24,
            context_dim: 4,
            conditioner_hidden: 8,
            ..FlowConfig::default()
        },
        batch_size: 8,
        iterations,
        decode_count: 3,
        seed,
        ..TransferConfig::default()
    }
}

/// Evaluation CSVs (scored pairs, per-input results) from a full run on the tiny task.
pub fn tiny_eval_csvs(seed: u64) -> (String, String) {
    use molxfer::metrics::{records_to_csv, TaskSpec};
    use molxfer::transfer::{results_to_csv, train, ModelBundle, TrainOptions, Transferer};

    let task = tiny_task(seed);
    let config = tiny_transfer_config(2, 6, seed);
    let (model, _) = train(
        &task.source,
        &task.target,
        &task.vae,
        &config,
        &TrainOptions::default(),
    )
    .expect("tiny transfer training");
    let bundle = ModelBundle {
        vae: &task.vae,
        model: &model,
        task: TaskSpec::synthesizability(),
        scorer: &task.scorer,
        scales: &task.scales,
    };
    let transferer = Transferer::new(bundle).expect("matching VAE");
    let (report, results) = transferer.evaluate(&task.test, seed).expect("evaluation");
    (records_to_csv(&report.records), results_to_csv(&results))
}
