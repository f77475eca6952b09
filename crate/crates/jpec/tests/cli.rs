//! End-to-end tests of the `jpec` binary: pipeline composition, exit codes,
//! manifests, and byte-determinism of primary outputs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jpec"));
    cmd.env_remove("JPEC_THREADS");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn generate(dir: &Path, competitor_prob: f64) -> PathBuf {
    let data = dir.join("data");
    run_ok(bin().args([
        "generate",
        "--out-dir",
        data.to_str().unwrap(),
        "--nodes",
        "120",
        "--industries",
        "4",
        "--attr-dim",
        "8",
        "--competitor-prob",
        &competitor_prob.to_string(),
        "--supply-prob",
        "0.3",
        "--seed",
        "7",
    ]));
    data
}

fn graph_flags(data: &Path, competitors: &Path) -> Vec<String> {
    vec![
        "--nodes".into(),
        data.join("nodes.tsv").to_str().unwrap().into(),
        "--supply".into(),
        data.join("supply.tsv").to_str().unwrap().into(),
        "--competitors".into(),
        competitors.to_str().unwrap().into(),
    ]
}

fn metrics_map(path: &Path) -> HashMap<String, f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.split_once('\t')?;
            Some((k.to_string(), v.parse().ok()?))
        })
        .collect()
}

#[test]
fn full_pipeline_runs_and_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), 0.5);
    assert!(data.join("manifest.tsv").exists());

    let split = dir.path().join("split");
    run_ok(
        bin()
            .arg("split")
            .args(graph_flags(&data, &data.join("competitors.tsv")))
            .args([
                "--kind",
                "regular",
                "--fraction",
                "0.2",
                "--min-competitors",
                "3",
                "--seed",
                "1",
                "--out-dir",
                split.to_str().unwrap(),
            ]),
    );

    let model = dir.path().join("model.jpm");
    let report = dir.path().join("report.tsv");
    let emb = dir.path().join("emb.jpe");
    let emb_tsv = dir.path().join("emb.tsv");
    run_ok(
        bin()
            .arg("train")
            .args(graph_flags(&data, &split.join("train_competitors.tsv")))
            .args([
                "--encoder-dims",
                "8,32,16",
                "--epochs",
                "150",
                "--learning-rate",
                "0.05",
                "--seed",
                "3",
                "--model-out",
                model.to_str().unwrap(),
                "--report-out",
                report.to_str().unwrap(),
                "--embeddings-out",
                emb.to_str().unwrap(),
                "--embeddings-tsv-out",
                emb_tsv.to_str().unwrap(),
            ]),
    );
    assert!(model.exists() && report.exists() && emb.exists() && emb_tsv.exists());
    let manifest = fs::read_to_string(dir.path().join("model.jpm.manifest.tsv")).unwrap();
    assert!(manifest.contains("command\ttrain"));
    assert!(manifest.contains("config.encoder_dims\t8,32,16"));

    let metrics = dir.path().join("metrics.tsv");
    let out = run_ok(bin().args([
        "evaluate",
        "--model",
        model.to_str().unwrap(),
        "--nodes",
        data.join("nodes.tsv").to_str().unwrap(),
        "--supply",
        data.join("supply.tsv").to_str().unwrap(),
        "--train-competitors",
        split.join("train_competitors.tsv").to_str().unwrap(),
        "--queries",
        split.join("queries.tsv").to_str().unwrap(),
        "--ks",
        "1,10",
        "--out",
        metrics.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("hits@10"), "summary missing: {stdout}");
    let m = metrics_map(&metrics);
    assert!(
        m["hits@10"] > m["chance_hits@10"],
        "model no better than chance"
    );
    assert!(m["queries"] > 0.0);

    // same evaluation through the saved embeddings file is identical
    let metrics2 = dir.path().join("metrics2.tsv");
    run_ok(bin().args([
        "evaluate",
        "--embeddings",
        emb.to_str().unwrap(),
        "--nodes",
        data.join("nodes.tsv").to_str().unwrap(),
        "--supply",
        data.join("supply.tsv").to_str().unwrap(),
        "--train-competitors",
        split.join("train_competitors.tsv").to_str().unwrap(),
        "--queries",
        split.join("queries.tsv").to_str().unwrap(),
        "--ks",
        "1,10",
        "--out",
        metrics2.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&metrics).unwrap(), fs::read(&metrics2).unwrap());

    let ranks = dir.path().join("ranks.tsv");
    run_ok(
        bin()
            .arg("rank")
            .args(graph_flags(&data, &split.join("train_competitors.tsv")))
            .args([
                "--model",
                model.to_str().unwrap(),
                "--queries",
                "n0,n5",
                "--top-k",
                "5",
                "--exclude-known",
                "--out",
                ranks.to_str().unwrap(),
            ]),
    );
    let rank_text = fs::read_to_string(&ranks).unwrap();
    assert_eq!(rank_text.lines().count(), 10);
    assert!(rank_text.starts_with("n0\t1\t"));
}

#[test]
fn oracle_embeddings_score_perfect_hits() {
    // complete intra-industry competitor graph: with known industries, the
    // filtered candidate pool's same-industry members are exactly the
    // held-out competitors
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), 1.0);
    let split = dir.path().join("split");
    run_ok(
        bin()
            .arg("split")
            .args(graph_flags(&data, &data.join("competitors.tsv")))
            .args([
                "--kind",
                "regular",
                "--fraction",
                "0.2",
                "--min-competitors",
                "3",
                "--seed",
                "2",
                "--out-dir",
                split.to_str().unwrap(),
            ]),
    );

    // one-hot industry embeddings from the ground-truth file
    let industries: Vec<(String, usize)> = fs::read_to_string(data.join("industries.tsv"))
        .unwrap()
        .lines()
        .map(|l| {
            let (id, g) = l.split_once('\t').unwrap();
            (id.to_string(), g.parse().unwrap())
        })
        .collect();
    let n = industries.len();
    let mut y = jpec::linalg::DenseMatrix::zeros(n, 4);
    let ids: Vec<String> = industries.iter().map(|(id, _)| id.clone()).collect();
    for (i, (_, g)) in industries.iter().enumerate() {
        y.set(i, *g, 1.0);
    }
    let oracle = dir.path().join("oracle.jpe");
    jpec::io::save_embeddings(&y, Some(&ids), 0, &oracle).unwrap();

    let metrics = dir.path().join("metrics.tsv");
    let out = run_ok(bin().args([
        "evaluate",
        "--embeddings",
        oracle.to_str().unwrap(),
        "--nodes",
        data.join("nodes.tsv").to_str().unwrap(),
        "--supply",
        data.join("supply.tsv").to_str().unwrap(),
        "--train-competitors",
        split.join("train_competitors.tsv").to_str().unwrap(),
        "--queries",
        split.join("queries.tsv").to_str().unwrap(),
        "--ks",
        "10",
        "--out",
        metrics.to_str().unwrap(),
    ]));
    let m = metrics_map(&metrics);
    assert_eq!(m["hits@10"], 1.0, "oracle embeddings must be perfect");
    assert!(String::from_utf8_lossy(&out.stdout).contains("1.0000"));
}

#[test]
fn train_zero_epochs_writes_valid_model_and_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), 0.5);
    let model = dir.path().join("model.jpm");
    let report = dir.path().join("report.tsv");
    run_ok(
        bin()
            .arg("train")
            .args(graph_flags(&data, &data.join("competitors.tsv")))
            .args([
                "--encoder-dims",
                "8,16,4",
                "--epochs",
                "0",
                "--seed",
                "5",
                "--model-out",
                model.to_str().unwrap(),
                "--report-out",
                report.to_str().unwrap(),
            ]),
    );
    let loaded = jpec::io::load_model(&model).unwrap();
    assert_eq!(loaded.model.config.epochs, 0);
    // header comment only, no data rows
    let report_text = fs::read_to_string(&report).unwrap();
    assert!(report_text.lines().all(|l| l.starts_with('#')));
}

#[test]
fn error_paths_exit_nonzero_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), 0.5);

    // missing input file
    let model = dir.path().join("model.jpm");
    let out = bin()
        .args([
            "train",
            "--nodes",
            data.join("nodes.tsv").to_str().unwrap(),
            "--supply",
            dir.path().join("missing.tsv").to_str().unwrap(),
            "--competitors",
            data.join("competitors.tsv").to_str().unwrap(),
            "--model-out",
            model.to_str().unwrap(),
            "--report-out",
            dir.path().join("report.tsv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!model.exists(), "partial model written on error");
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.tsv"));

    // dangling node reference, named in the error
    let bad_supply = dir.path().join("bad_supply.tsv");
    fs::write(&bad_supply, "n0\tmystery\n").unwrap();
    let out = bin()
        .args([
            "train",
            "--nodes",
            data.join("nodes.tsv").to_str().unwrap(),
            "--supply",
            bad_supply.to_str().unwrap(),
            "--competitors",
            data.join("competitors.tsv").to_str().unwrap(),
            "--model-out",
            model.to_str().unwrap(),
            "--report-out",
            dir.path().join("report.tsv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("mystery") && stderr.contains("line 1"),
        "{stderr}"
    );

    // unknown flag is a usage error
    let out = bin().args(["train", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // unknown split kind
    let out = bin()
        .arg("split")
        .args(graph_flags(&data, &data.join("competitors.tsv")))
        .args([
            "--kind",
            "sideways",
            "--out-dir",
            dir.path().join("s").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_runs_produce_identical_primary_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data_a = generate(dir.path().join("a").as_path(), 0.5);
    let data_b = generate(dir.path().join("b").as_path(), 0.5);
    for name in [
        "nodes.tsv",
        "supply.tsv",
        "competitors.tsv",
        "industries.tsv",
    ] {
        assert_eq!(
            fs::read(data_a.join(name)).unwrap(),
            fs::read(data_b.join(name)).unwrap(),
            "{name} differs between identical generate runs"
        );
    }
    // manifests agree except for wall-clock
    let strip = |p: &Path| -> String {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| {
                !l.starts_with("wall_clock_ms") && !l.contains(dir.path().to_str().unwrap())
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(&data_a.join("manifest.tsv")),
        strip(&data_b.join("manifest.tsv"))
    );

    let split_args = |data: &Path, out: &Path| {
        let mut cmd = bin();
        cmd.arg("split")
            .args(graph_flags(data, &data.join("competitors.tsv")))
            .args([
                "--kind",
                "zero-shot",
                "--fraction",
                "0.25",
                "--min-competitors",
                "2",
                "--seed",
                "9",
                "--out-dir",
                out.to_str().unwrap(),
            ]);
        cmd
    };
    let split_a = dir.path().join("split_a");
    let split_b = dir.path().join("split_b");
    run_ok(&mut split_args(&data_a, &split_a));
    run_ok(&mut split_args(&data_b, &split_b));
    for name in ["train_competitors.tsv", "queries.tsv", "removed_edges.tsv"] {
        assert_eq!(
            fs::read(split_a.join(name)).unwrap(),
            fs::read(split_b.join(name)).unwrap(),
            "{name} differs between identical split runs"
        );
    }
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), 0.5);
    let cfg = dir.path().join("jpec.conf");
    fs::write(&cfg, "encoder_dims=8,16,4\nepochs=5\nseed=77\nmargin=3.5\n").unwrap();
    let model = dir.path().join("model.jpm");
    run_ok(
        bin()
            .arg("train")
            .args(graph_flags(&data, &data.join("competitors.tsv")))
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--epochs",
                "2",
                "--model-out",
                model.to_str().unwrap(),
                "--report-out",
                dir.path().join("report.tsv").to_str().unwrap(),
            ]),
    );
    let loaded = jpec::io::load_model(&model).unwrap();
    assert_eq!(loaded.model.config.epochs, 2, "flag must override file");
    assert_eq!(loaded.model.config.seed, 77, "file value must apply");
    assert_eq!(loaded.model.config.margin, 3.5);
    let manifest = fs::read_to_string(dir.path().join("model.jpm.manifest.tsv")).unwrap();
    assert!(manifest.contains("config.epochs\t2"));
    assert!(manifest.contains("config.margin\t3.5"));
}

#[test]
fn gradcheck_passes_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("gradcheck.manifest.tsv");
    let out = run_ok(bin().args([
        "gradcheck",
        "--seed",
        "42",
        "--manifest-out",
        manifest.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gradcheck PASS"), "{stdout}");
    assert!(stdout.contains("max relative error"));
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("config.pass\ttrue"));
}

#[test]
fn newer_minor_version_embedding_warns_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), 1.0);
    let split = dir.path().join("split");
    run_ok(
        bin()
            .arg("split")
            .args(graph_flags(&data, &data.join("competitors.tsv")))
            .args([
                "--kind",
                "regular",
                "--fraction",
                "0.2",
                "--min-competitors",
                "2",
                "--seed",
                "3",
                "--out-dir",
                split.to_str().unwrap(),
            ]),
    );
    let y = jpec::linalg::DenseMatrix::zeros(120, 2);
    let ids: Vec<String> = (0..120).map(|i| format!("n{i}")).collect();
    let emb = dir.path().join("emb.jpe");
    jpec::io::save_embeddings(&y, Some(&ids), 0, &emb).unwrap();
    // bump the minor version in the header
    let mut bytes = fs::read(&emb).unwrap();
    bytes[10..12].copy_from_slice(&3u16.to_le_bytes());
    fs::write(&emb, &bytes).unwrap();

    let metrics = dir.path().join("metrics.tsv");
    let manifest = dir.path().join("metrics.manifest.tsv");
    run_ok(bin().args([
        "evaluate",
        "--embeddings",
        emb.to_str().unwrap(),
        "--nodes",
        data.join("nodes.tsv").to_str().unwrap(),
        "--supply",
        data.join("supply.tsv").to_str().unwrap(),
        "--train-competitors",
        split.join("train_competitors.tsv").to_str().unwrap(),
        "--queries",
        split.join("queries.tsv").to_str().unwrap(),
        "--out",
        metrics.to_str().unwrap(),
        "--manifest-out",
        manifest.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(
        text.contains("warning") && text.contains("newer minor"),
        "expected version warning in manifest: {text}"
    );
}
