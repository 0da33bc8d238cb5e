use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ldprepr::config::{ExperimentConfig, Mode};
use ldprepr::formats::{load_embeddings, write_embeddings, Dataset};
use ldprepr::pipeline::{
    emit_probability_curves, run_experiment, run_on_dataset, split, split_indices,
};
use ldprepr::report::ReportFile;
use ldprepr::synth::{generate, SynthSpec};
use ldprepr_core::ldp::Protocol;
use ldprepr_core::{EmbeddingVector, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bundled() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_sentiment.emb")
}

fn quick(mode: Mode, runs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        mode,
        runs,
        base_seed: 5,
        input_path: bundled(),
        ..ExperimentConfig::default()
    };
    cfg.mlp.epochs = 3;
    cfg
}

fn small_data(n: usize, dim: usize) -> Dataset<EmbeddingVector> {
    generate(&SynthSpec {
        records: n,
        dim,
        ..SynthSpec::default()
    })
}

#[test]
fn bundled_file_matches_generator() {
    let on_disk = load_embeddings(bundled()).unwrap();
    assert_eq!(on_disk, generate(&SynthSpec::default()));
    assert_eq!(
        (on_disk.len(), on_disk.dim(), on_disk.classes),
        (1000, 50, 2)
    );
    let positives = on_disk.records.iter().filter(|r| r.label == 1).count();
    assert_eq!(positives, 500);
}

#[test]
fn split_is_a_partition() {
    for (n, ratio) in [(1000, 0.8), (3, 0.5), (17, 0.3), (2, 0.9)] {
        let (a, b) = split_indices(n, ratio, RngSeed::from_seed(11)).unwrap();
        assert_eq!(a.len(), (n as f64 * ratio).floor() as usize);
        assert_eq!(a.len() + b.len(), n);
        let all: HashSet<usize> = a.iter().chain(&b).copied().collect();
        assert_eq!(all.len(), n);
        assert!(all.iter().all(|&i| i < n));
    }
}

#[test]
fn split_is_seeded() {
    let items: Vec<u32> = (0..100).collect();
    let x = split(&items, 0.8, RngSeed::from_seed(3)).unwrap();
    assert_eq!(x, split(&items, 0.8, RngSeed::from_seed(3)).unwrap());
    assert_ne!(x, split(&items, 0.8, RngSeed::from_seed(4)).unwrap());
}

#[test]
fn report_lists_every_run_and_consistent_stats() {
    let report = run_experiment(&quick(Mode::Ldpnn, 20)).unwrap();
    assert_eq!(report.accuracies.len(), 20);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.report");
    report.write(&path).unwrap();
    let parsed = ReportFile::load(&path).unwrap();
    let accs = parsed.accuracies();
    assert_eq!(accs.len(), 20);
    let n = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / n;
    let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((parsed.get_f64("mean_accuracy").unwrap() - mean).abs() <= 1e-12);
    assert!((parsed.get_f64("std_accuracy").unwrap() - std).abs() <= 1e-12);
    for key in [
        "p1",
        "p2",
        "q",
        "mode",
        "protocol",
        "epsilon",
        "lambda",
        "runs",
        "base_seed",
    ] {
        assert!(parsed.get(key).is_some(), "missing {key}");
    }
    assert_eq!(parsed.get("bits"), Some("500"));
}

#[test]
fn same_config_gives_identical_report() {
    let cfg = quick(Mode::Ldpnn, 3);
    let strip = |text: String| -> String {
        text.lines()
            .filter(|l| !l.starts_with("wall_clock_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = strip(run_experiment(&cfg).unwrap().to_text());
    let b = strip(run_experiment(&cfg).unwrap().to_text());
    assert_eq!(a, b);

    let other = ExperimentConfig {
        base_seed: 6,
        ..cfg
    };
    assert_ne!(a, strip(run_experiment(&other).unwrap().to_text()));
}

#[test]
fn private_runs_only_hand_randomized_bits_to_the_model() {
    for protocol in [Protocol::Ome, Protocol::Sue, Protocol::Oue] {
        let cfg = ExperimentConfig {
            protocol,
            ..quick(Mode::Ldpnn, 2)
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.handoffs.len(), 4);
        let kind = format!("kind=perturbed-{protocol} ");
        for h in &report.handoffs {
            assert!(h.contains(&kind), "{h}");
        }
    }
    let report = run_experiment(&quick(Mode::Npnn, 1)).unwrap();
    assert!(report.handoffs.iter().all(|h| h.contains("kind=real ")));
    let report = run_experiment(&quick(Mode::NpnnBits, 1)).unwrap();
    assert!(report
        .handoffs
        .iter()
        .all(|h| h.contains("kind=clean-bits")));
}

#[test]
fn non_private_channel_fields_are_omitted() {
    let report = run_experiment(&quick(Mode::Npnn, 1)).unwrap();
    assert!(!report.resolved.iter().any(|(k, _)| k == "q"));
}

#[test]
fn runs_on_768_dim_embeddings() {
    let data = small_data(60, 768);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.emb");
    write_embeddings(&path, &data).unwrap();
    let mut cfg = quick(Mode::Ldpnn, 2);
    cfg.input_path = path;
    cfg.mlp.hidden_units = 768;
    cfg.mlp.epochs = 2;
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.accuracies.len(), 2);
    assert!(report.resolved.contains(&("bits".into(), "7680".into())));
}

#[test]
fn multi_class_and_custom_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let records = (0..70)
        .map(|i| {
            EmbeddingVector::new(
                i % 7,
                (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let data = Dataset {
        classes: 7,
        records,
    };
    let mut cfg = quick(Mode::Ldpnn, 1);
    cfg.integer_bits = 2;
    cfg.fraction_bits = 3;
    let report = run_on_dataset(&cfg, &data).unwrap();
    assert!(report.resolved.contains(&("bits".into(), "72".into())));
}

#[test]
fn run_failure_names_the_run() {
    let data = Dataset {
        classes: 2,
        records: vec![
            EmbeddingVector::new(0, vec![1.0]),
            EmbeddingVector::new(1, vec![2.0]),
        ],
    };
    let cfg = quick(Mode::Npnn, 2);
    let err = run_on_dataset(&cfg, &data).unwrap_err();
    assert!(err.to_string().starts_with("run "), "{err}");
    assert!(err.to_string().contains("at least 2"), "{err}");
}

#[test]
fn curves_file_reproduces_plotted_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.tsv");
    emit_probability_curves(
        &[Protocol::Ome, Protocol::Sue, Protocol::Oue],
        &[0.5, 1.0, 5.0, 10.0],
        &[1.0, 10.0, 50.0, 100.0],
        50,
        11,
        &path,
    )
    .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("protocol\tepsilon\tlambda\tp1\tp2\tq"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 16 + 4 + 4);
    let find = |proto: &str, eps: &str, lambda: &str| {
        rows.iter()
            .find(|r| r[0] == proto && r[1] == eps && r[2] == lambda)
            .unwrap_or_else(|| panic!("{proto} {eps} {lambda}"))
    };
    let q = |r: &Vec<&str>| r[5].parse::<f64>().unwrap();
    assert!((q(find("ome", "1", "100")) - 0.00988318240762078).abs() <= 1e-12);
    assert!((q(find("sue", "0.5", "-")) - 0.49875000260416).abs() <= 1e-12);
    for eps in ["0.5", "1", "5", "10"] {
        assert_eq!(find("oue", eps, "-")[3], "0.5");
    }
}

#[test]
fn config_file_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    write_embeddings(dir.path().join("d.emb"), &small_data(40, 10)).unwrap();
    std::fs::write(
        dir.path().join("e.cfg"),
        "# tiny\nmode = npnn\ninput_path = d.emb\noutput_path = out.report\nruns = 2\nepochs = 2\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(dir.path().join("e.cfg")).unwrap();
    assert_eq!(cfg.input_path, dir.path().join("d.emb"));
    assert_eq!(
        cfg.output_path.as_deref(),
        Some(Path::new(&dir.path().join("out.report")))
    );
    assert_eq!(run_experiment(&cfg).unwrap().accuracies.len(), 2);
}
