use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kfs::io::{self, ReportFormat};
use kfs::synth::SynthSpec;
use kfs::timeline::SimilarityProfile;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/three").join(name)
}

fn kfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfs")).args(args).output().unwrap()
}

fn kfs_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfs"))
        .args(args)
        .env("KFS_THREADS", threads)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Hand evaluation of the fixture: "balanced" has KFR 1/2 with one scene
/// fully covered, "miss" has no key frame, "skewed" puts counts (3, 1)
/// into scenes of 10 and 25 frames.
fn fixture_ukss() -> f64 {
    let eps: f64 = 0.01;
    let balanced = 0.5f64.cbrt();
    let bds_skewed = (0..=10)
        .map(|b| {
            let beta = b as f64 / 10.0;
            let (w0, w1) = (10f64.powf(beta), 25f64.powf(beta));
            let (p0, p1) = (w0 / (w0 + w1), w1 / (w0 + w1));
            (0.75 * p0 + 0.25 * p1) / ((0.75f64.powi(2) + 0.25f64.powi(2)).sqrt() * (p0 * p0 + p1 * p1).sqrt())
        })
        .fold(0.0, f64::max);
    let skewed = (1.0 * 0.5 * bds_skewed).cbrt();
    ((balanced.ln() + eps.ln() + skewed.ln()) / 3.0).exp()
}

#[test]
fn score_fixture_matches_hand_value() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let out = kfs(&[
        "score",
        "--annotations",
        s(&fixture("annotations.json")),
        "--samples",
        s(&fixture("samples.json")),
        "--out",
        s(&json),
    ]);
    ok(&out);
    let report = io::read_report(&json, ReportFormat::Json).unwrap();
    assert_eq!(report.n(), 3);
    assert!((report.ukss - fixture_ukss()).abs() < 1e-12, "{} vs {}", report.ukss, fixture_ukss());
    let ids: Vec<&str> = report.per_sample.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["balanced", "miss", "skewed"]);
    assert_eq!(report.per_sample[2].metrics.bsr, 0.5);
    assert!(dir.path().join("report.manifest.json").exists());

    let csv = dir.path().join("report.csv");
    ok(&kfs(&[
        "score",
        "--annotations",
        s(&fixture("annotations.json")),
        "--samples",
        s(&fixture("samples.json")),
        "--out",
        s(&csv),
    ]));
    assert_eq!(io::read_report(&csv, ReportFormat::Csv).unwrap(), report);
}

#[test]
fn exit_codes() {
    assert_eq!(kfs(&["--help"]).status.code(), Some(0));
    assert_eq!(kfs(&["--version"]).status.code(), Some(0));
    assert_eq!(kfs(&["score", "--bogus"]).status.code(), Some(2));
    assert_eq!(kfs(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kfs(&["sample", "--method", "nope", "--budget", "2"]).status.code(), Some(2));
    let out = kfs(&[
        "score",
        "--annotations",
        "/nonexistent/a.json",
        "--samples",
        "/nonexistent/s.json",
        "--out",
        "/tmp/never.json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
    let out = kfs_env(&["synth", "--out-dir", "/tmp/never"], "zero");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn score_errors_name_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets.json");
    fs::write(&sets, r#"{"budget":4,"samples":[{"id":"balanced","frames":[0,25]}]}"#).unwrap();
    let out = kfs(&[
        "score",
        "--annotations",
        s(&fixture("annotations.json")),
        "--samples",
        s(&sets),
        "--out",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("balanced") && err.contains("25"), "{err}");
}

fn small_corpus(dir: &Path, n: usize) -> SynthSpec {
    corpus_with(
        dir,
        SynthSpec {
            n_samples: n,
            min_s: 60,
            max_s: 160,
            ..SynthSpec::default()
        },
    )
}

fn corpus_with(dir: &Path, spec: SynthSpec) -> SynthSpec {
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    ok(&kfs(&["synth", "--spec", s(&spec_path), "--out-dir", s(&dir.join("corpus"))]));
    spec
}

fn sample_args<'a>(method: &'a str, corpus: &'a str, similarity: &'a str, out: &'a str) -> Vec<String> {
    [
        "sample",
        "--method",
        method,
        "--budget",
        "12",
        "--seed",
        "5",
        "--annotations",
        &format!("{corpus}/annotations.json"),
        "--similarity",
        similarity,
        "--features",
        &format!("{corpus}/features"),
        "--out",
        out,
    ]
    .iter()
    .map(|x| x.to_string())
    .collect()
}

fn run_owned(args: &[String], threads: &str) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    kfs_env(&refs, threads)
}

#[test]
fn ascs_with_constant_similarity_equals_icf_bytes() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path(), 8);
    let corpus = dir.path().join("corpus");
    let items = io::load_corpus(&corpus).unwrap();
    let flat: Vec<(String, SimilarityProfile)> = items
        .iter()
        .map(|i| (i.id().to_string(), SimilarityProfile::new(vec![0.27; i.annotation.n_frames()]).unwrap()))
        .collect();
    let flat_path = dir.path().join("flat.json");
    io::write_similarity(&flat_path, flat.iter().map(|(id, p)| (id.as_str(), p))).unwrap();

    let icf = dir.path().join("icf.json");
    let ascs = dir.path().join("ascs.json");
    ok(&run_owned(&sample_args("icf", s(&corpus), s(&flat_path), s(&icf)), "2"));
    ok(&run_owned(&sample_args("ascs", s(&corpus), s(&flat_path), s(&ascs)), "2"));
    assert_eq!(fs::read(&icf).unwrap(), fs::read(&ascs).unwrap());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path(), 10);
    let corpus = dir.path().join("corpus");
    let sim = corpus.join("similarity.json");
    let one = dir.path().join("one.json");
    let four = dir.path().join("four.json");
    ok(&run_owned(&sample_args("ascs", s(&corpus), s(&sim), s(&one)), "1"));
    ok(&run_owned(&sample_args("ascs", s(&corpus), s(&sim), s(&four)), "4"));
    assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap());
    let manifest = io::RunManifest::read(dir.path().join("one.manifest.json")).unwrap();
    assert_eq!(manifest.command, "sample");
    assert_eq!(manifest.configs.len(), 1);
}

#[test]
fn synth_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_corpus(a.path(), 5);
    small_corpus(b.path(), 5);
    for name in ["annotations.json", "similarity.json", "corpus.json", "features/synth-0003.kfsfeat"] {
        let fa = fs::read(a.path().join("corpus").join(name)).unwrap();
        let fb = fs::read(b.path().join("corpus").join(name)).unwrap();
        assert_eq!(fa, fb, "{name}");
    }
}

#[test]
fn controlled_then_score() {
    let dir = tempfile::tempdir().unwrap();
    // dense key frames so half of a 10-frame budget fits in the hit scenes
    let spec = corpus_with(
        dir.path(),
        SynthSpec {
            n_samples: 6,
            min_s: 60,
            max_s: 160,
            key_fraction: [0.2, 0.4],
            ..SynthSpec::default()
        },
    );
    let corpus = dir.path().join("corpus");
    let out = dir.path().join("ctl.json");
    ok(&kfs(&[
        "controlled",
        "--annotations",
        s(&corpus.join("annotations.json")),
        "--kfr",
        "0.5",
        "--shr",
        "1.0",
        "--c",
        "inf",
        "--beta",
        "1",
        "--budget",
        "10",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]));
    let details: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ctl.details.json")).unwrap()).unwrap();
    assert_eq!(details.as_array().unwrap().len(), spec.n_samples);
    let report_path = dir.path().join("ctl_report.json");
    ok(&kfs(&[
        "score",
        "--annotations",
        s(&corpus.join("annotations.json")),
        "--samples",
        s(&out),
        "--out",
        s(&report_path),
    ]));
    let report = io::read_report(&report_path, ReportFormat::Json).unwrap();
    for r in &report.per_sample {
        assert_eq!(r.metrics.kfr, 0.5, "{}", r.id);
        assert_eq!(r.metrics.shr, 1.0, "{}", r.id);
    }
}

#[test]
fn sweep_writes_reports_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path(), 6);
    let corpus = dir.path().join("corpus");
    let out_dir = dir.path().join("sweep");
    ok(&kfs(&[
        "sweep",
        "--method",
        "its",
        "--grid",
        "alpha=0.5:0.5:2.0",
        "--budget",
        "8",
        "--annotations",
        s(&corpus.join("annotations.json")),
        "--similarity",
        s(&corpus.join("similarity.json")),
        "--format",
        "csv",
        "--out-dir",
        s(&out_dir),
    ]));
    for i in 0..4 {
        assert!(out_dir.join(format!("report_{i:03}.csv")).exists());
    }
    let mut rdr = csv::Reader::from_path(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[2][3], "1.5");
    let manifest = io::RunManifest::read(out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.configs.len(), 4);
    assert_eq!(kfs(&["sweep", "--method", "its", "--grid", "alpha=oops", "--budget", "8"]).status.code(), Some(2));
}

#[test]
fn validate_reports_rho_and_applies_threshold() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path(), 60);
    let corpus = dir.path().join("corpus");
    let sweep = dir.path().join("sweep.json");
    fs::write(
        &sweep,
        r#"{"sweeps":[{"name":"its","base":{"method":"its","budget":12},"grid":"alpha=0.5:0.5:10.0"}]}"#,
    )
    .unwrap();
    let args = |min_rho: &'static str, out: &Path| {
        vec![
            "validate".to_string(),
            "--corpus".into(),
            s(&corpus).into(),
            "--sweep".into(),
            s(&sweep).into(),
            format!("--min-rho={min_rho}"),
            "--out".into(),
            s(out).into(),
        ]
    };
    let out_path = dir.path().join("v.json");
    let pass = run_owned(&args("-1", &out_path), "2");
    ok(&pass);
    assert!(String::from_utf8_lossy(&pass.stdout).contains("its: configs=20 rho="));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["sweeps"][0]["ukss"].as_array().unwrap().len(), 20);
    let fail = run_owned(&args("1.01", &out_path), "2");
    assert_eq!(fail.status.code(), Some(1));
}

#[test]
fn validate_default_study_passes() {
    let out = kfs(&["validate"]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("its-alpha: configs=200") && text.contains("ascs-tau: configs=20"), "{text}");
}
