//! The `kfs` command line.
//!
//! Exit codes: 0 success, 1 runtime failure (including a failed
//! `validate`), 2 usage error. `KFS_THREADS` bounds the worker pool.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::controlled::{controlled_frame_set, ClampEvent, ControlSpec};
use crate::error::{KfsError, Result};
use crate::io::{self, ReportFormat, RunManifest};
use crate::metrics::{scene_hit_rate, UkssReport, DEFAULT_EPSILON};
use crate::samplers::{
    sample_with_configs, Method, SampleInputs, SamplerConfig, DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_TAU,
};
use crate::sweep::{default_study_sweeps, Grid, Sweep};
use crate::synth::{correlation_study, synth_corpus, CorpusItem, OracleModel, SynthSpec};
use crate::timeline::{AnnotationSample, FeatureMatrix, SampleSet, SimilarityProfile};

pub const THREADS_ENV: &str = "KFS_THREADS";

#[derive(Parser)]
#[command(name = "kfs", version, about = "Keyframe sampling for long-video QA and UKSS evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select frames for every annotated sample.
    Sample(SampleArgs),
    /// Score sample sets against annotations (per-sample metrics and UKSS).
    Score(ScoreArgs),
    /// Generate frame sets with prescribed KFR, SHR and scene spread.
    Controlled(ControlledArgs),
    /// Run a sampler over a parameter grid; one report per config.
    Sweep(SweepArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
    /// Correlate UKSS with oracle QA accuracy across sampler sweeps.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SamplerFlags {
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InputFlags {
    #[arg(long)]
    annotations: PathBuf,
    /// Similarity profiles (JSON); needed by topk, its and ascs.
    #[arg(long)]
    similarity: Option<PathBuf>,
    /// Directory of `<id>.kfsfeat` files; needed by icf and ascs.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    sampler: SamplerFlags,
    #[command(flatten)]
    inputs: InputFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to csv for a `.csv` output path, json otherwise.
    #[arg(long, value_enum)]
    format: Option<ReportFormat>,
}

#[derive(Args)]
struct ControlledArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    kfr: f64,
    #[arg(long)]
    shr: f64,
    /// Dirichlet concentration; `inf` allocates exactly by duration^beta.
    #[arg(long = "c")]
    concentration: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// e.g. `alpha=0.05:0.05:10.0`, `tau=log:0.01:10:20`, `budget=8,16,32`.
    #[arg(long, value_parser = parse_grid)]
    grid: Grid,
    #[command(flatten)]
    sampler: SamplerFlags,
    #[command(flatten)]
    inputs: InputFlags,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: ReportFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic corpus spec (JSON); the default study corpus if omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus directory; the default synthetic corpus if omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// `{"sweeps": [...]}`; ITS over alpha and ASCS over tau if omitted.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    oracle_seed: u64,
    #[arg(long, default_value_t = 0.5)]
    min_rho: f64,
    /// Optional JSON with per-config UKSS and accuracy.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    Grid::parse(s).map_err(|e| e.to_string())
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    let pool = worker_pool()?;
    pool.install(|| match command {
        Command::Sample(a) => cmd_sample(a).map(|_| 0),
        Command::Score(a) => cmd_score(a).map(|_| 0),
        Command::Controlled(a) => cmd_controlled(a).map(|_| 0),
        Command::Sweep(a) => cmd_sweep(a).map(|_| 0),
        Command::Synth(a) => cmd_synth(a).map(|_| 0),
        Command::Validate(a) => cmd_validate(a),
    })
}

fn worker_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| anyhow::anyhow!("{THREADS_ENV}=`{v}` must be a positive integer"))?;
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// `dir/stem.<suffix>.json` next to `out`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.json"))
}

struct Dataset {
    annotations: Vec<AnnotationSample>,
    similarity: Option<BTreeMap<String, SimilarityProfile>>,
    features_dir: Option<PathBuf>,
}

impl Dataset {
    fn load(flags: &InputFlags, method: Method) -> Result<Self> {
        if method.needs_similarity() && flags.similarity.is_none() {
            return Err(KfsError::precondition(format!("method {method} needs --similarity")));
        }
        if method.needs_features() && flags.features.is_none() {
            return Err(KfsError::precondition(format!("method {method} needs --features")));
        }
        let annotations = io::load_annotations(&flags.annotations)?;
        let similarity = match (&flags.similarity, method.needs_similarity()) {
            (Some(p), true) => Some(io::load_similarity(p)?),
            _ => None,
        };
        Ok(Dataset {
            annotations,
            similarity,
            features_dir: flags.features.clone().filter(|_| method.needs_features()),
        })
    }

    fn manifest(&self, command: &str, flags: &InputFlags) -> RunManifest {
        let mut m = RunManifest::new(command).input("annotations", &flags.annotations);
        if let (Some(p), Some(_)) = (&flags.similarity, &self.similarity) {
            m = m.input("similarity", p);
        }
        if let Some(p) = &self.features_dir {
            m = m.input("features", p);
        }
        m
    }

    /// Samples every annotated item under `configs`; rows follow sample id order.
    fn sample_all(&self, configs: &[SamplerConfig]) -> Result<Vec<(String, Vec<SampleSet>)>> {
        let mut rows: Vec<(String, Vec<SampleSet>)> = self
            .annotations
            .par_iter()
            .map(|ann| {
                let id = ann.id();
                let run = || -> Result<Vec<SampleSet>> {
                    let similarity = match &self.similarity {
                        Some(map) => Some(map.get(id).ok_or_else(|| {
                            KfsError::precondition("no similarity profile for this sample")
                        })?),
                        None => None,
                    };
                    let features: Option<FeatureMatrix> = match &self.features_dir {
                        Some(dir) => Some(io::read_features(io::feature_file(dir, id)?)?),
                        None => None,
                    };
                    let inputs = SampleInputs {
                        n_frames: ann.n_frames(),
                        similarity,
                        features: features.as_ref(),
                    };
                    let per_sample: Vec<SamplerConfig> = configs.iter().map(|c| c.for_sample(id)).collect();
                    sample_with_configs(&per_sample, inputs)
                };
                run().map(|sets| (id.to_string(), sets)).map_err(|e| e.in_sample(id))
            })
            .collect::<Result<_>>()?;
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(rows)
    }

    fn report(&self, sets: &BTreeMap<String, SampleSet>, epsilon: f64) -> Result<UkssReport> {
        let by_id: BTreeMap<&str, &AnnotationSample> = self.annotations.iter().map(|a| (a.id(), a)).collect();
        score_sets(&by_id, sets, epsilon)
    }
}

fn score_sets(
    annotations: &BTreeMap<&str, &AnnotationSample>,
    sets: &BTreeMap<String, SampleSet>,
    epsilon: f64,
) -> Result<UkssReport> {
    let mut pairs = Vec::with_capacity(sets.len());
    for (id, set) in sets {
        let ann = annotations
            .get(id.as_str())
            .ok_or_else(|| KfsError::precondition("sample set has no annotation").in_sample(id))?;
        // re-validate against the annotated length
        let set = SampleSet::new(set.frames().to_vec(), set.budget(), ann.n_frames()).map_err(|e| e.in_sample(id))?;
        pairs.push((set, *ann));
    }
    UkssReport::evaluate(pairs.iter().map(|(s, a)| (s, *a)), epsilon)
}

fn sampler_config(method: Method, f: &SamplerFlags) -> Result<SamplerConfig> {
    let cfg = SamplerConfig {
        method,
        budget: f.budget,
        alpha: f.alpha,
        tau: f.tau,
        gamma: f.gamma,
        seed: f.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_sample(a: SampleArgs) -> anyhow::Result<()> {
    let cfg = sampler_config(a.method, &a.sampler)?;
    let data = Dataset::load(&a.inputs, a.method)?;
    let mut manifest = data.manifest("sample", &a.inputs);
    manifest.check_inputs()?;
    let sets: BTreeMap<String, SampleSet> = data
        .sample_all(&[cfg])?
        .into_iter()
        .map(|(id, mut v)| (id, v.remove(0)))
        .collect();
    io::write_sample_sets(&a.out, &sets)?;
    manifest.configs.push(cfg);
    manifest.outputs.push(a.out.clone());
    manifest.write(sidecar(&a.out, "manifest"))?;
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> anyhow::Result<()> {
    let format = a.format.unwrap_or_else(|| match a.out.extension() {
        Some(ext) if ext == "csv" => ReportFormat::Csv,
        _ => ReportFormat::Json,
    });
    let mut manifest = RunManifest::new("score")
        .input("annotations", &a.annotations)
        .input("samples", &a.samples)
        .param("epsilon", a.epsilon)
        .param("format", format);
    manifest.check_inputs()?;
    let annotations = io::load_annotations(&a.annotations)?;
    let by_id: BTreeMap<&str, &AnnotationSample> = annotations.iter().map(|s| (s.id(), s)).collect();
    let sets = io::load_sample_sets(&a.samples)?;
    let report = score_sets(&by_id, &sets, a.epsilon)?;
    io::write_report(&report, &a.out, format)?;
    println!("ukss={} n={}", report.ukss, report.n());
    manifest.outputs.push(a.out.clone());
    manifest.write(sidecar(&a.out, "manifest"))?;
    Ok(())
}

#[derive(Serialize)]
struct ControlledDetail {
    id: String,
    n_key: usize,
    nominal_shr: f64,
    measured_shr: f64,
    requested_hit_scenes: Vec<usize>,
    hit_scenes: Vec<usize>,
    scene_counts: Vec<usize>,
    clamps: Vec<ClampEvent>,
}

fn cmd_controlled(a: ControlledArgs) -> anyhow::Result<()> {
    let spec = ControlSpec {
        target_kfr: a.kfr,
        target_shr: a.shr,
        concentration: a.concentration,
        beta: a.beta,
        budget: a.budget,
        seed: a.seed,
    };
    spec.validate()?;
    let mut manifest = RunManifest::new("controlled")
        .input("annotations", &a.annotations)
        .param("control", spec);
    manifest.check_inputs()?;
    let annotations = io::load_annotations(&a.annotations)?;
    let results: Vec<(SampleSet, ControlledDetail)> = annotations
        .par_iter()
        .map(|ann| {
            let out = controlled_frame_set(ann, &spec).map_err(|e| e.in_sample(ann.id()))?;
            let detail = ControlledDetail {
                id: ann.id().to_string(),
                n_key: out.n_key,
                nominal_shr: out.nominal_shr,
                measured_shr: if ann.scene_count() > 0 {
                    scene_hit_rate(&out.frames, ann)?
                } else {
                    0.0
                },
                requested_hit_scenes: out.requested_hit_scenes,
                hit_scenes: out.hit_scenes,
                scene_counts: out.scene_counts,
                clamps: out.clamps,
            };
            Ok((out.frames, detail))
        })
        .collect::<Result<_>>()?;
    let mut sets = BTreeMap::new();
    let mut details = Vec::with_capacity(results.len());
    for (set, detail) in results {
        sets.insert(detail.id.clone(), set);
        details.push(detail);
    }
    details.sort_by(|a, b| a.id.cmp(&b.id));
    io::write_sample_sets(&a.out, &sets)?;
    let details_path = sidecar(&a.out, "details");
    io::write_json(&details_path, &details)?;
    manifest.outputs.extend([a.out.clone(), details_path]);
    manifest.write(sidecar(&a.out, "manifest"))?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    index: usize,
    method: Method,
    budget: usize,
    alpha: f64,
    tau: f64,
    gamma: f64,
    seed: u64,
    ukss: f64,
    mean_kfr: f64,
    mean_shr: f64,
    mean_bsr: f64,
    mean_bds: f64,
    report: String,
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let base = sampler_config(a.method, &a.sampler)?;
    let configs = a.grid.configs(&base)?;
    let data = Dataset::load(&a.inputs, a.method)?;
    let mut manifest = data
        .manifest("sweep", &a.inputs)
        .param("grid", a.grid.to_string())
        .param("epsilon", a.epsilon);
    manifest.check_inputs()?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| KfsError::io(&a.out_dir, e))?;

    let rows = data.sample_all(&configs)?;
    let ext = match a.format {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
    };
    let summary_path = a.out_dir.join("summary.csv");
    let mut summary = csv::Writer::from_path(&summary_path).map_err(|source| KfsError::Csv {
        path: summary_path.clone(),
        source,
    })?;
    for (ci, cfg) in configs.iter().enumerate() {
        let sets: BTreeMap<String, SampleSet> = rows.iter().map(|(id, v)| (id.clone(), v[ci].clone())).collect();
        let report = data.report(&sets, a.epsilon)?;
        let name = format!("report_{ci:03}.{ext}");
        let path = a.out_dir.join(&name);
        io::write_report(&report, &path, a.format)?;
        manifest.outputs.push(path);
        let means = report.means();
        summary
            .serialize(SummaryRow {
                index: ci,
                method: cfg.method,
                budget: cfg.budget,
                alpha: cfg.alpha,
                tau: cfg.tau,
                gamma: cfg.gamma,
                seed: cfg.seed,
                ukss: report.ukss,
                mean_kfr: means.kfr,
                mean_shr: means.shr,
                mean_bsr: means.bsr,
                mean_bds: means.bds,
                report: name,
            })
            .map_err(|source| KfsError::Csv {
                path: summary_path.clone(),
                source,
            })?;
    }
    summary.flush().map_err(|e| KfsError::io(&summary_path, e))?;
    manifest.configs = configs;
    manifest.outputs.push(summary_path);
    manifest.write(a.out_dir.join(io::MANIFEST_FILE))?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut manifest = RunManifest::new("synth");
    let spec: SynthSpec = match &a.spec {
        Some(p) => {
            manifest = manifest.input("spec", p);
            manifest.check_inputs()?;
            serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| KfsError::io(p, e))?).map_err(|source| {
                KfsError::Parse {
                    path: p.clone(),
                    source,
                }
            })?
        }
        None => SynthSpec::default(),
    };
    let items = synth_corpus(&spec)?;
    manifest.outputs = io::write_corpus(&a.out_dir, &items, Some(&spec))?;
    manifest = manifest.param("spec", &spec);
    manifest.write(a.out_dir.join(io::MANIFEST_FILE))?;
    println!("wrote {} samples to {}", items.len(), a.out_dir.display());
    Ok(())
}

#[derive(serde::Deserialize)]
struct SweepFile {
    sweeps: Vec<Sweep>,
}

#[derive(Serialize)]
struct ValidateSweep<'a> {
    name: &'a str,
    grid: String,
    rho: f64,
    passed: bool,
    configs: &'a [SamplerConfig],
    ukss: &'a [f64],
    accuracy: &'a [f64],
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    oracle_seed: u64,
    min_rho: f64,
    n_samples: usize,
    sweeps: Vec<ValidateSweep<'a>>,
}

fn cmd_validate(a: ValidateArgs) -> anyhow::Result<i32> {
    let corpus: Vec<CorpusItem> = match &a.corpus {
        Some(dir) => io::load_corpus(dir)?,
        None => synth_corpus(&SynthSpec::default())?,
    };
    let sweeps = match &a.sweep {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| KfsError::io(p, e))?;
            let file: SweepFile = serde_json::from_str(&text).map_err(|source| KfsError::Parse {
                path: p.clone(),
                source,
            })?;
            file.sweeps
        }
        None => default_study_sweeps(),
    };
    let model = OracleModel::calibrated(a.oracle_seed);
    let mut results = Vec::with_capacity(sweeps.len());
    for sweep in &sweeps {
        let configs = sweep.configs()?;
        let study = correlation_study(&corpus, &configs, &model).map_err(|e| anyhow::anyhow!("sweep `{}`: {e}", sweep.name))?;
        let passed = study.rho >= a.min_rho;
        println!(
            "{}: configs={} rho={:.4} {}",
            sweep.name,
            configs.len(),
            study.rho,
            if passed { "PASS" } else { "FAIL" }
        );
        results.push((sweep, study, passed));
    }
    let all_passed = results.iter().all(|r| r.2);
    if let Some(out) = &a.out {
        let doc = ValidateOutput {
            oracle_seed: a.oracle_seed,
            min_rho: a.min_rho,
            n_samples: corpus.len(),
            sweeps: results
                .iter()
                .map(|(sweep, study, passed)| ValidateSweep {
                    name: &sweep.name,
                    grid: sweep.grid.to_string(),
                    rho: study.rho,
                    passed: *passed,
                    configs: &study.configs,
                    ukss: &study.ukss,
                    accuracy: &study.accuracy,
                })
                .collect(),
        };
        io::write_json(out, &doc)?;
    }
    if !all_passed {
        eprintln!("spearman rho below {} for at least one sweep", a.min_rho);
        return Ok(1);
    }
    Ok(0)
}
