//! On-disk formats.
//!
//! Annotations, similarity profiles, sample sets, reports and manifests
//! are JSON; features are KFSFEAT binaries (see [`features`]). Collections
//! are written sorted by sample id so identical inputs give identical bytes.

mod features;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::samplers::SamplerConfig;
use crate::synth::{CorpusItem, SynthSpec};
use crate::timeline::{AnnotationSample, SampleSet, Scene, SimilarityProfile};

pub use features::{decode_features, encode_features, read_features, write_features, MAGIC};
pub use report::{read_report, write_report, ReportFormat, CSV_HEADER};

pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const SIMILARITY_FILE: &str = "similarity.json";
pub const FEATURES_DIR: &str = "features";
pub const FEATURES_EXT: &str = "kfsfeat";
pub const CORPUS_FILE: &str = "corpus.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| KfsError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| KfsError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| KfsError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| KfsError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| KfsError::io(path, e))
}

fn duplicate_id(path: &Path, id: &str) -> KfsError {
    KfsError::Format {
        path: path.to_path_buf(),
        reason: format!("duplicate sample id `{id}`"),
    }
}

#[derive(Deserialize)]
struct RawDoc {
    samples: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    id: String,
    duration_s: u32,
    scenes: Vec<Scene>,
}

#[derive(Serialize)]
struct AnnotationDoc<'a> {
    samples: Vec<&'a AnnotationSample>,
}

/// Loads and validates every sample; errors name the sample and field.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationSample>> {
    let path = path.as_ref();
    let doc: RawDoc = read_json(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(doc.samples.len());
    for (i, value) in doc.samples.into_iter().enumerate() {
        let label = value
            .get("id")
            .and_then(|v| v.as_str())
            .map_or_else(|| format!("#{i}"), str::to_string);
        let raw: RawAnnotation = serde_json::from_value(value).map_err(|e| KfsError::Annotation {
            sample: label.clone(),
            field: "schema".into(),
            reason: e.to_string(),
        })?;
        if !seen.insert(raw.id.clone()) {
            return Err(duplicate_id(path, &raw.id));
        }
        out.push(AnnotationSample::new(raw.id, raw.duration_s, raw.scenes)?);
    }
    Ok(out)
}

pub fn write_annotations(path: impl AsRef<Path>, samples: &[AnnotationSample]) -> Result<()> {
    let mut sorted: Vec<&AnnotationSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.id().cmp(b.id()));
    write_json(path.as_ref(), &AnnotationDoc { samples: sorted })
}

#[derive(Serialize, Deserialize)]
struct ProfileEntry {
    id: String,
    scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SimilarityDoc {
    profiles: Vec<ProfileEntry>,
}

pub fn load_similarity(path: impl AsRef<Path>) -> Result<BTreeMap<String, SimilarityProfile>> {
    let path = path.as_ref();
    let doc: SimilarityDoc = read_json(path)?;
    let mut out = BTreeMap::new();
    for entry in doc.profiles {
        if out.contains_key(&entry.id) {
            return Err(duplicate_id(path, &entry.id));
        }
        let profile = SimilarityProfile::new(entry.scores).map_err(|e| e.in_sample(&entry.id))?;
        out.insert(entry.id, profile);
    }
    Ok(out)
}

pub fn write_similarity<'a, I>(path: impl AsRef<Path>, profiles: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a SimilarityProfile)>,
{
    let mut profiles: Vec<ProfileEntry> = profiles
        .into_iter()
        .map(|(id, p)| ProfileEntry {
            id: id.to_string(),
            scores: p.scores().to_vec(),
        })
        .collect();
    profiles.sort_by(|a, b| a.id.cmp(&b.id));
    write_json(path.as_ref(), &SimilarityDoc { profiles })
}

#[derive(Serialize, Deserialize)]
struct SetEntry {
    id: String,
    frames: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SampleSetDoc {
    budget: usize,
    samples: Vec<SetEntry>,
}

/// Sample sets keyed by sample id.
///
/// Frames are checked for order, uniqueness and budget on load; the range
/// check needs the annotation and happens at scoring time.
pub fn load_sample_sets(path: impl AsRef<Path>) -> Result<BTreeMap<String, SampleSet>> {
    let path = path.as_ref();
    let doc: SampleSetDoc = read_json(path)?;
    let mut out = BTreeMap::new();
    for entry in doc.samples {
        if out.contains_key(&entry.id) {
            return Err(duplicate_id(path, &entry.id));
        }
        let set = SampleSet::new(entry.frames, doc.budget, usize::MAX).map_err(|e| e.in_sample(&entry.id))?;
        out.insert(entry.id, set);
    }
    Ok(out)
}

pub fn write_sample_sets(path: impl AsRef<Path>, sets: &BTreeMap<String, SampleSet>) -> Result<()> {
    let budgets: BTreeSet<usize> = sets.values().map(SampleSet::budget).collect();
    if budgets.len() > 1 {
        return Err(KfsError::precondition(format!("sample sets mix budgets {budgets:?}")));
    }
    let doc = SampleSetDoc {
        budget: budgets.into_iter().next().unwrap_or(0),
        samples: sets
            .iter()
            .map(|(id, s)| SetEntry {
                id: id.clone(),
                frames: s.frames().to_vec(),
            })
            .collect(),
    };
    write_json(path.as_ref(), &doc)
}

/// What a run read, how it was configured and what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub configs: Vec<SamplerConfig>,
    /// Remaining parameters and seeds not captured by `configs`.
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: BTreeMap::new(),
            configs: Vec::new(),
            parameters: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, name: &str, path: impl Into<PathBuf>) -> Self {
        self.inputs.insert(name.to_string(), path.into());
        self
    }

    pub fn param(mut self, name: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("parameters serialize to JSON");
        self.parameters.insert(name.to_string(), v);
        self
    }

    /// Fails on the first input that does not exist.
    pub fn check_inputs(&self) -> Result<()> {
        for (name, path) in &self.inputs {
            if !path.exists() {
                return Err(KfsError::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, format!("input `{name}` not found")),
                ));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

/// `features_dir/<id>.kfsfeat`; ids must be usable as file names.
pub fn feature_file(features_dir: &Path, id: &str) -> Result<PathBuf> {
    if id.is_empty() || id.starts_with('.') || id.contains(['/', '\\']) {
        return Err(KfsError::Format {
            path: features_dir.to_path_buf(),
            reason: format!("sample id `{id}` cannot name a feature file"),
        });
    }
    Ok(features_dir.join(format!("{id}.{FEATURES_EXT}")))
}

/// Feature file of `id` inside a corpus directory.
pub fn features_path(corpus_dir: &Path, id: &str) -> Result<PathBuf> {
    feature_file(&corpus_dir.join(FEATURES_DIR), id)
}

#[derive(Serialize, Deserialize)]
struct RelevanceEntry {
    id: String,
    relevance: f64,
}

#[derive(Serialize, Deserialize)]
struct CorpusDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec: Option<SynthSpec>,
    #[serde(default)]
    relevance: Vec<RelevanceEntry>,
}

/// Writes annotations, similarity, per-sample features and `corpus.json`.
pub fn write_corpus(dir: impl AsRef<Path>, items: &[CorpusItem], spec: Option<&SynthSpec>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let feat_dir = dir.join(FEATURES_DIR);
    fs::create_dir_all(&feat_dir).map_err(|e| KfsError::io(&feat_dir, e))?;
    let mut written = Vec::with_capacity(items.len() + 3);

    let annotations: Vec<AnnotationSample> = items.iter().map(|i| i.annotation.clone()).collect();
    let path = dir.join(ANNOTATIONS_FILE);
    write_annotations(&path, &annotations)?;
    written.push(path);

    let path = dir.join(SIMILARITY_FILE);
    write_similarity(&path, items.iter().map(|i| (i.id(), &i.similarity)))?;
    written.push(path);

    for item in items {
        let path = features_path(dir, item.id())?;
        write_features(&path, &item.features)?;
        written.push(path);
    }

    let mut relevance: Vec<RelevanceEntry> = items
        .iter()
        .filter_map(|i| {
            i.relevance.map(|relevance| RelevanceEntry {
                id: i.id().to_string(),
                relevance,
            })
        })
        .collect();
    relevance.sort_by(|a, b| a.id.cmp(&b.id));
    let path = dir.join(CORPUS_FILE);
    write_json(
        &path,
        &CorpusDoc {
            spec: spec.cloned(),
            relevance,
        },
    )?;
    written.push(path);
    Ok(written)
}

/// Loads a corpus directory, sorted by sample id. `corpus.json` is optional.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<CorpusItem>> {
    let dir = dir.as_ref();
    let annotations = load_annotations(dir.join(ANNOTATIONS_FILE))?;
    let similarity_path = dir.join(SIMILARITY_FILE);
    let mut similarity = load_similarity(&similarity_path)?;
    let corpus_path = dir.join(CORPUS_FILE);
    let relevance: BTreeMap<String, f64> = if corpus_path.exists() {
        let doc: CorpusDoc = read_json(&corpus_path)?;
        doc.relevance.into_iter().map(|r| (r.id, r.relevance)).collect()
    } else {
        BTreeMap::new()
    };

    let mut items = Vec::with_capacity(annotations.len());
    for annotation in annotations {
        let id = annotation.id().to_string();
        let similarity = similarity.remove(&id).ok_or_else(|| KfsError::Format {
            path: similarity_path.clone(),
            reason: format!("no similarity profile for sample `{id}`"),
        })?;
        let features = read_features(features_path(dir, &id)?)?;
        let n = annotation.n_frames();
        if similarity.len() != n || features.n_frames() != n {
            return Err(KfsError::precondition(format!(
                "{n} annotated frames, {} similarity scores, {} feature rows",
                similarity.len(),
                features.n_frames()
            ))
            .in_sample(&id));
        }
        items.push(CorpusItem {
            relevance: relevance.get(&id).copied(),
            annotation,
            similarity,
            features,
        });
    }
    items.sort_by(|a, b| a.id().cmp(b.id()));
    Ok(items)
}
