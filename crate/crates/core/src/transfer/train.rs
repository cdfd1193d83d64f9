//! Alternating discriminator and generator/flow updates.

use std::path::PathBuf;

use log::info;
use molxfer_nn::ndarray::{Array2, Axis};
use molxfer_nn::{Adam, AdamConfig, Graph};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_json;
use crate::data::sample_style_instances;
use crate::error::TransferError;
use crate::guidedvae::{standard_normal, VAEModel};
use crate::styleflow::{batch_prior, StylePrior};
use crate::transfer::model::{
    adversarial_fake_term, adversarial_style_term, cycle_loss, gradient_penalty, recon_loss,
    style_loss, TransferConfig, TransferNets, FAKE_CLASS, SOURCE_CLASS, TARGET_CLASS,
};
use crate::transfer::TransferCheckpoint;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub checkpoint_dir: Option<PathBuf>,
    /// Iterations between checkpoints; 0 keeps only the final one.
    pub checkpoint_every: usize,
    pub log_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub adversarial: f64,
    pub penalty: f64,
    pub disc_total: f64,
    pub generator_step: bool,
    pub style: Option<f64>,
    pub recon: Option<f64>,
    pub cycle: Option<f64>,
    /// `w_style·style + w_recon·recon + w_cycle·cycle` on generator steps.
    pub generator_total: Option<f64>,
    /// Fraction of transferred latents the discriminator labels fake.
    pub fake_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub disc_updates: usize,
    pub gen_updates: usize,
    pub logs: Vec<IterationLog>,
    pub vae_hash_before: String,
    pub vae_hash_after: String,
}

/// Trained transfer system, pinned to the VAE it was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferModel {
    pub config: TransferConfig,
    pub vae_hash: String,
    pub nets: TransferNets,
    pub source_pool: Vec<String>,
    pub target_pool: Vec<String>,
}

fn rows(latents: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    latents.select(Axis(0), idx)
}

fn batch(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    sample(rng, n, size.min(n)).into_vec()
}

/// Prior over `k` instances of a pool, never drawing the current batch.
fn instance_prior(
    latents: &Array2<f64>,
    k: usize,
    exclude: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<StylePrior, TransferError> {
    let idx = sample_style_instances(latents.nrows(), k, exclude, rng)?;
    Ok(batch_prior(&rows(latents, &idx))?)
}

fn write_log(path: &PathBuf, logs: &[IterationLog]) -> Result<(), TransferError> {
    let io = |e: csv::Error| TransferError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for l in logs {
        w.serialize(l).map_err(io)?;
    }
    w.flush().map_err(|e| TransferError::Io(e.to_string()))
}

/// Runs the alternating schedule: the discriminator is updated at every
/// iteration, the generator and flow at every `disc_ratio`-th one.
pub fn train(
    source_pool: &[String],
    target_pool: &[String],
    vae: &VAEModel,
    config: &TransferConfig,
    options: &TrainOptions,
) -> Result<(TransferModel, TrainReport), TransferError> {
    config.validate()?;
    if source_pool.is_empty() {
        return Err(TransferError::EmptyPool("source"));
    }
    if target_pool.is_empty() {
        return Err(TransferError::EmptyPool("target"));
    }
    let vae_hash_before = vae.store.content_hash();
    let src = vae.encode_means(source_pool)?;
    let tgt = vae.encode_means(target_pool)?;
    let d = vae.latent_dim();
    let mut nets = TransferNets::new(d, config);
    let mut adam_g = Adam::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
        &nets.gen_store,
    );
    let mut adam_d = Adam::new(
        AdamConfig {
            learning_rate: config.disc_learning_rate,
            ..AdamConfig::default()
        },
        &nets.disc_store,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut logs = Vec::with_capacity(config.iterations);
    let (mut disc_updates, mut gen_updates) = (0, 0);
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| TransferError::Io(e.to_string()))?;
    }
    let save = |nets: &TransferNets, name: &str| -> Result<(), TransferError> {
        if let Some(dir) = &options.checkpoint_dir {
            let model = TransferModel {
                config: *config,
                vae_hash: vae_hash_before.clone(),
                nets: nets.clone(),
                source_pool: source_pool.to_vec(),
                target_pool: target_pool.to_vec(),
            };
            save_json(&dir.join(name), &TransferCheckpoint::new(model))
                .map_err(|e| TransferError::Io(e.to_string()))?;
        }
        Ok(())
    };

    for k in 0..config.iterations {
        let bi = batch(src.nrows(), config.batch_size, &mut rng);
        let bj = batch(tgt.nrows(), config.batch_size, &mut rng);
        let prior_i = instance_prior(&src, config.k_instances, &bi, &mut rng)?;
        let prior_j = instance_prior(&tgt, config.k_instances, &bj, &mut rng)?;
        let zc_i = rows(&src, &bi);
        let zc_j = rows(&tgt, &bj);
        let eps_i = standard_normal(bi.len(), d, &mut rng);
        let eps_j = standard_normal(bi.len(), d, &mut rng);
        let eps_jj = standard_normal(bj.len(), d, &mut rng);
        let u = Array2::from_shape_simple_fn((bi.len().min(bj.len()), 1), || rng.gen::<f64>());

        // Discriminator objective with generator outputs held constant.
        let (zhat_i, zhat_j, z_g) = {
            let mut g = Graph::new();
            let hs_i = nets
                .flow
                .style_graph(&mut g, &nets.gen_store, &prior_i, &eps_i);
            let hs_j = nets
                .flow
                .style_graph(&mut g, &nets.gen_store, &prior_j, &eps_j);
            let hs_jj = nets
                .flow
                .style_graph(&mut g, &nets.gen_store, &prior_j, &eps_jj);
            let a = g.constant(zc_i.clone());
            let b = g.constant(zc_j.clone());
            let zhat_i = nets.generate_graph(&mut g, a, hs_i);
            let zhat_j = nets.generate_graph(&mut g, b, hs_jj);
            let z_g = nets.generate_graph(&mut g, a, hs_j);
            (
                g.value(zhat_i).clone(),
                g.value(zhat_j).clone(),
                g.value(z_g).clone(),
            )
        };
        let mut gd = Graph::new();
        let logits = |g: &mut Graph, z: &Array2<f64>| {
            let v = g.constant(z.clone());
            nets.disc_graph(g, v)
        };
        let l_zc_i = logits(&mut gd, &zc_i);
        let l_zhat_i = logits(&mut gd, &zhat_i);
        let l_zc_j = logits(&mut gd, &zc_j);
        let l_zhat_j = logits(&mut gd, &zhat_j);
        let l_zg = logits(&mut gd, &z_g);
        let adv_i = adversarial_style_term(&mut gd, l_zc_i, l_zhat_i, SOURCE_CLASS);
        let adv_j = adversarial_style_term(&mut gd, l_zc_j, l_zhat_j, TARGET_CLASS);
        let fake = adversarial_fake_term(&mut gd, l_zg);
        let adv = gd.add(adv_i, adv_j);
        let adv = gd.add(adv, fake);
        let m = u.nrows();
        let real = zc_j.slice(molxfer_nn::ndarray::s![..m, ..]).to_owned();
        let fake_rows = z_g.slice(molxfer_nn::ndarray::s![..m, ..]).to_owned();
        let gp = gradient_penalty(&nets, &mut gd, &real, &fake_rows, &u);
        let gp_w = gd.scale(gp, config.lambda_gp);
        let d_total = gd.add(adv, gp_w);
        let fake_accuracy = {
            let v = gd.value(l_zg);
            v.rows()
                .into_iter()
                .filter(|r| (0..FAKE_CLASS).all(|c| r[FAKE_CLASS] > r[c]))
                .count() as f64
                / v.nrows() as f64
        };
        let mut log = IterationLog {
            iteration: k,
            adversarial: gd.scalar(adv),
            penalty: gd.scalar(gp),
            disc_total: gd.scalar(d_total),
            generator_step: false,
            style: None,
            recon: None,
            cycle: None,
            generator_total: None,
            fake_accuracy,
        };
        if !log.disc_total.is_finite() {
            return Err(TransferError::NonFiniteLoss(k));
        }
        let d_grads = gd.backward(d_total).for_store(&nets.disc_store);

        let g_grads = if k % config.disc_ratio == 0 {
            let mut g = Graph::new();
            let hs_i = nets
                .flow
                .style_graph(&mut g, &nets.gen_store, &prior_i, &eps_i);
            let hs_j = nets
                .flow
                .style_graph(&mut g, &nets.gen_store, &prior_j, &eps_j);
            let zc = g.constant(zc_i.clone());
            let z_g = nets.generate_graph(&mut g, zc, hs_j);
            let l = nets.disc_graph(&mut g, z_g);
            let style = style_loss(&mut g, l, TARGET_CLASS);
            let recon = recon_loss(&nets, &mut g, zc, hs_i);
            let cycle = cycle_loss(&nets, &mut g, z_g, zc, hs_i);
            let a = g.scale(style, config.w_style);
            let b = g.scale(recon, config.w_recon);
            let c = g.scale(cycle, config.w_cycle);
            let total = g.add(a, b);
            let total = g.add(total, c);
            log.generator_step = true;
            log.style = Some(g.scalar(style));
            log.recon = Some(g.scalar(recon));
            log.cycle = Some(g.scalar(cycle));
            log.generator_total = Some(g.scalar(total));
            if !g.scalar(total).is_finite() {
                return Err(TransferError::NonFiniteLoss(k));
            }
            Some(g.backward(total).for_store(&nets.gen_store))
        } else {
            None
        };

        adam_d.step(&mut nets.disc_store, d_grads)?;
        disc_updates += 1;
        if let Some(grads) = g_grads {
            adam_g.step(&mut nets.gen_store, grads)?;
            gen_updates += 1;
        }
        if !nets.gen_store.all_finite() || !nets.disc_store.all_finite() {
            return Err(TransferError::NonFiniteLoss(k));
        }
        logs.push(log);
        if (k + 1) % 200 == 0 {
            let recent = &logs[logs.len() - 200..];
            let mean = |f: &dyn Fn(&IterationLog) -> Option<f64>| {
                let xs: Vec<f64> = recent.iter().filter_map(f).collect();
                xs.iter().sum::<f64>() / xs.len().max(1) as f64
            };
            info!(
                "iteration {}: adv {:.4} gp {:.4} style {:.4} recon {:.4} cycle {:.4} fake-acc {:.3}",
                k + 1,
                mean(&|l| Some(l.adversarial)),
                mean(&|l| Some(l.penalty)),
                mean(&|l| l.style),
                mean(&|l| l.recon),
                mean(&|l| l.cycle),
                mean(&|l| Some(l.fake_accuracy)),
            );
        }
        if options.checkpoint_every > 0 && (k + 1) % options.checkpoint_every == 0 {
            save(&nets, &format!("transfer_iter{:06}.json", k + 1))?;
        }
    }
    if let Some(path) = &options.log_path {
        write_log(path, &logs)?;
    }
    let vae_hash_after = vae.store.content_hash();
    if vae_hash_after != vae_hash_before {
        return Err(TransferError::FrozenModelChanged);
    }
    save(&nets, "transfer_final.json")?;
    let model = TransferModel {
        config: *config,
        vae_hash: vae_hash_before.clone(),
        nets,
        source_pool: source_pool.to_vec(),
        target_pool: target_pool.to_vec(),
    };
    Ok((
        model,
        TrainReport {
            disc_updates,
            gen_updates,
            logs,
            vae_hash_before,
            vae_hash_after,
        },
    ))
}
