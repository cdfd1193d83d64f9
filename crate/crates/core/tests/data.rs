use std::collections::HashSet;

use molxfer::data::*;
use molxfer::metrics::{PoolLabel, TaskKind, TaskSpec};
use molxfer_chem::smiles::{is_valid, normalize, parse_valid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> DeskTaskConfig {
    DeskTaskConfig {
        per_pool: 40,
        sa_reference_generated: 300,
        tox_training_size: 400,
        ..DeskTaskConfig::default()
    }
}

#[test]
fn generated_corpus_is_valid_unique_and_seeded() {
    let config = GeneratorConfig::default();
    let a = make_desk_corpus(&config, 300);
    assert_eq!(a.len(), 300);
    assert!(a.iter().all(|s| is_valid(s)));
    let canon: HashSet<String> = a.iter().map(|s| normalize(s).unwrap()).collect();
    assert_eq!(canon.len(), 300);
    assert_eq!(a, make_desk_corpus(&config, 300));
    let other = make_desk_corpus(&GeneratorConfig { seed: 2, ..config }, 300);
    assert_ne!(a, other);
}

#[test]
fn pools_match_a_brute_force_relabeling() {
    let config = small_config();
    let scorers = build_scorers(&config).unwrap();
    for task in [TaskSpec::synthesizability(), TaskSpec::toxicity()] {
        let corpus = build_task_corpus(&task, &scorers, &config).unwrap();
        let mut counts = [0usize; 3];
        for r in &corpus.records {
            let again = score_record(&r.smiles, &task, &scorers).unwrap();
            assert_eq!(again, *r);
            let style = match task.kind {
                TaskKind::Toxicity => scorers.tox.predict(&parse_valid(&r.smiles).unwrap()),
                TaskKind::Synthesizability => {
                    scorers.sa.score(&parse_valid(&r.smiles).unwrap()).unwrap()
                }
            };
            let label = match task.kind {
                TaskKind::Toxicity if style > 0.9 => 0,
                TaskKind::Toxicity if style < 0.03 => 1,
                TaskKind::Synthesizability if (5.0..=8.0).contains(&style) => 0,
                TaskKind::Synthesizability if style <= 2.5 => 1,
                _ => 2,
            };
            counts[label] += 1;
        }
        assert_eq!(counts, [40, 40, 0]);
        assert_eq!(corpus.pool(PoolLabel::Source).len(), 40);
        assert_eq!(corpus.pool(PoolLabel::Target).len(), 40);
        let unique: HashSet<&str> = corpus.records.iter().map(|r| r.smiles.as_str()).collect();
        assert_eq!(unique.len(), 80);
    }
}

#[test]
fn corpus_files_roundtrip_with_sidecar() {
    let config = small_config();
    let scorers = build_scorers(&config).unwrap();
    let task = TaskSpec::synthesizability();
    let text = "smiles\nCCO\nnot-a-molecule\nc1ccccc1C(=O)O, extra\n\n# comment\nC1CC\n";
    let corpus = ingest_lines(text, &task, &scorers, 4).unwrap();
    assert_eq!(corpus.records.len(), 2);
    assert_eq!(corpus.metadata.n_invalid, 2);
    assert_eq!(corpus.records[1].smiles, "c1ccccc1C(=O)O");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.csv");
    write_corpus(&path, &corpus).unwrap();
    assert!(sidecar_path(&path).ends_with("pool.csv.meta.json"));
    let back = read_corpus(&path).unwrap();
    assert_eq!(back, corpus);
    assert_eq!(back.hash(), corpus.hash());
    std::fs::remove_file(sidecar_path(&path)).unwrap();
    assert!(matches!(
        read_corpus(&path),
        Err(molxfer::DataError::FileNotFound(_))
    ));
    let empty = dir.path().join("empty.smi");
    std::fs::write(&empty, "junk\n").unwrap();
    assert!(matches!(
        ingest(&empty, &task, &scorers, 0),
        Err(molxfer::DataError::AllInvalid(_))
    ));
}

#[test]
fn split_rejects_bad_fractions() {
    let items: Vec<u32> = (0..10).collect();
    for (train, dev, test) in [(0.5, 0.5, 0.5), (-0.1, 0.6, 0.5), (f64::NAN, 0.5, 0.5)] {
        let spec = SplitSpec {
            train,
            dev,
            test,
            seed: 0,
        };
        assert!(matches!(
            split(&items, &spec),
            Err(molxfer::DataError::BadSplit)
        ));
    }
}

proptest! {
    #[test]
    fn split_partitions_with_requested_proportions(n in 0usize..400, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (train, dev) = (a, (1.0 - a) * b);
        let spec = SplitSpec { train, dev, test: 1.0 - train - dev, seed };
        let items: Vec<usize> = (0..n).collect();
        let (tr, dv, te) = split(&items, &spec).unwrap();
        prop_assert_eq!(tr.len() + dv.len() + te.len(), n);
        prop_assert!((tr.len() as f64 - n as f64 * train).abs() <= 0.5 + 1e-9);
        prop_assert!(dv.len() as f64 <= (n as f64 * dev).round());
        let mut all: Vec<usize> = tr.iter().chain(&dv).chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, items.clone());
        prop_assert_eq!(split(&items, &spec).unwrap(), (tr, dv, te));
    }

    #[test]
    fn style_instances_are_distinct_and_avoid_exclusions(len in 1usize..60, k in 0usize..12, seed in any::<u64>(), ex in proptest::collection::vec(0usize..70, 0..5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let banned: HashSet<usize> = ex.iter().copied().filter(|&i| i < len).collect();
        match sample_style_instances(len, k, &ex, &mut rng) {
            Ok(idx) => {
                prop_assert_eq!(idx.len(), k);
                let set: HashSet<usize> = idx.iter().copied().collect();
                prop_assert_eq!(set.len(), k);
                prop_assert!(idx.iter().all(|i| *i < len && !banned.contains(i)));
            }
            Err(_) => prop_assert!(len - banned.len() < k),
        }
    }
}
