mod common;

use common::*;
use molxfer::metrics::TaskSpec;
use molxfer::transfer::{
    select_candidate, train, ModelBundle, TrainOptions, TransferCheckpoint, Transferer,
};
use molxfer::TransferError;

#[test]
fn discriminator_updates_every_iteration_and_generator_every_nth() {
    let task = tiny_task(3);
    for (ratio, iterations) in [(1, 7), (5, 12), (5, 10)] {
        let config = tiny_transfer_config(ratio, iterations, 1);
        let before = task.vae.store.content_hash();
        let (_, report) = train(
            &task.source,
            &task.target,
            &task.vae,
            &config,
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(report.disc_updates, iterations);
        assert_eq!(report.gen_updates, iterations.div_ceil(ratio));
        assert!(report.disc_updates.abs_diff(ratio * report.gen_updates) < ratio);
        assert_eq!(report.vae_hash_before, before);
        assert_eq!(report.vae_hash_after, before);
        assert_eq!(task.vae.store.content_hash(), before);
        let steps = report.logs.iter().filter(|l| l.generator_step).count();
        assert_eq!(steps, report.gen_updates);
        assert!(report.logs.iter().all(|l| l.disc_total.is_finite()));
    }
}

#[test]
fn evaluation_csvs_are_byte_identical_for_equal_seeds() {
    let a = tiny_eval_csvs(4);
    let b = tiny_eval_csvs(4);
    assert_eq!(a, b);
    assert!(a.0.lines().count() > 1);
}

#[test]
fn inference_picks_the_best_candidate_by_exhaustive_rescoring() {
    let task = tiny_task(5);
    let config = tiny_transfer_config(1, 4, 2);
    let (model, _) = train(
        &task.source,
        &task.target,
        &task.vae,
        &config,
        &TrainOptions::default(),
    )
    .unwrap();
    let spec = TaskSpec::synthesizability();
    let t = Transferer::new(ModelBundle {
        vae: &task.vae,
        model: &model,
        task: spec,
        scorer: &task.scorer,
        scales: &task.scales,
    })
    .unwrap();
    for (i, m) in task.test.iter().enumerate() {
        let r = t.transfer(m, 6, 0.5, i as u64).unwrap();
        assert_eq!(r.candidates.len(), 6);
        for c in &r.candidates {
            assert_eq!(c.valid, molxfer_chem::smiles::is_valid(&c.smiles));
            if c.valid {
                let prop = task.scorer.score_smiles(&c.smiles).unwrap();
                assert!((c.prop.unwrap() - prop).abs() < 1e-12);
                assert!((c.imp.unwrap() - (r.prop_before - prop)).abs() < 1e-12);
            }
        }
        let best = r
            .candidates
            .iter()
            .filter(|c| c.valid && c.pss.unwrap() > 0.5)
            .map(|c| c.imp.unwrap())
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        if let Some(best) = best {
            assert!(r.successful);
            assert_eq!(r.output().imp, Some(best));
        }
        assert_eq!(select_candidate(&r.candidates, 0.5), (r.best, r.successful));
    }
    assert!(matches!(
        t.transfer("C1CC", 2, 0.5, 0),
        Err(TransferError::InvalidInput(_))
    ));
}

#[test]
fn checkpoints_roundtrip_and_reject_a_different_vae() {
    let task = tiny_task(6);
    let config = tiny_transfer_config(2, 3, 0);
    let (model, _) = train(
        &task.source,
        &task.target,
        &task.vae,
        &config,
        &TrainOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transfer.json");
    TransferCheckpoint::new(model.clone()).save(&path).unwrap();
    let loaded = TransferCheckpoint::load(&path, &task.vae).unwrap();
    assert_eq!(loaded.model, model);
    let other = tiny_task(7).vae;
    assert!(matches!(
        TransferCheckpoint::load(&path, &other),
        Err(TransferError::VaeHashMismatch)
    ));
}

#[test]
fn training_rejects_empty_pools_and_bad_ratios() {
    let task = tiny_task(8);
    let config = tiny_transfer_config(0, 3, 0);
    assert!(train(
        &task.source,
        &task.target,
        &task.vae,
        &config,
        &TrainOptions::default()
    )
    .is_err());
    let config = tiny_transfer_config(1, 3, 0);
    assert!(matches!(
        train(
            &[],
            &task.target,
            &task.vae,
            &config,
            &TrainOptions::default()
        ),
        Err(TransferError::EmptyPool("source"))
    ));
}
