use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::metrics::{spearman_rho, ukss, SampleMetrics, DEFAULT_EPSILON};
use crate::random::{derive_seed, derive_seed_index};
use crate::samplers::{sample_with_configs, SampleInputs, SamplerConfig};

use super::oracle::{oracle_accuracy, OracleModel};
use super::CorpusItem;

pub const MIN_STUDY_CONFIGS: usize = 20;
pub const MIN_STUDY_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub configs: Vec<SamplerConfig>,
    pub ukss: Vec<f64>,
    /// Fraction of correct oracle answers per config.
    pub accuracy: Vec<f64>,
    pub rho: f64,
}

fn run_item(item: &CorpusItem, configs: &[SamplerConfig], model: &OracleModel) -> Result<Vec<(f64, bool)>> {
    let id = item.id();
    let inputs = SampleInputs {
        n_frames: item.annotation.n_frames(),
        similarity: Some(&item.similarity),
        features: Some(&item.features),
    };
    let per_sample: Vec<SamplerConfig> = configs.iter().map(|c| c.for_sample(id)).collect();
    let run = || -> Result<Vec<(f64, bool)>> {
        let sets = sample_with_configs(&per_sample, inputs)?;
        sets.iter()
            .enumerate()
            .map(|(ci, frames)| {
                let metrics = SampleMetrics::evaluate(frames, &item.annotation)?;
                let draw_seed = derive_seed(derive_seed_index(model.seed, ci as u64), id);
                Ok((metrics.score, oracle_accuracy(&metrics, model, draw_seed)))
            })
            .collect()
    };
    run().map_err(|e| e.in_sample(id))
}

/// UKSS and oracle accuracy per sampler config, and their rank correlation.
///
/// Oracle draws are independent per (config position, sample); sampler
/// seeds depend only on the config and sample id, so duplicated configs
/// score identically.
pub fn correlation_study(corpus: &[CorpusItem], configs: &[SamplerConfig], model: &OracleModel) -> Result<StudyResult> {
    if configs.len() < MIN_STUDY_CONFIGS {
        return Err(KfsError::UndefinedCorrelation(format!(
            "a study needs at least {MIN_STUDY_CONFIGS} sampler configs, got {}",
            configs.len()
        )));
    }
    if corpus.len() < MIN_STUDY_SAMPLES {
        return Err(KfsError::precondition(format!(
            "a study needs at least {MIN_STUDY_SAMPLES} samples, got {}",
            corpus.len()
        )));
    }
    for cfg in configs {
        cfg.validate()?;
    }
    model.validate()?;

    let per_item: Vec<Vec<(f64, bool)>> = corpus
        .par_iter()
        .map(|item| run_item(item, configs, model))
        .collect::<Result<_>>()?;

    let mut ukss_values = Vec::with_capacity(configs.len());
    let mut accuracy = Vec::with_capacity(configs.len());
    for ci in 0..configs.len() {
        let scores: Vec<f64> = per_item.iter().map(|r| r[ci].0).collect();
        let correct = per_item.iter().filter(|r| r[ci].1).count();
        ukss_values.push(ukss(&scores, DEFAULT_EPSILON)?);
        accuracy.push(correct as f64 / corpus.len() as f64);
    }
    let rho = spearman_rho(&ukss_values, &accuracy)?;
    Ok(StudyResult {
        configs: configs.to_vec(),
        ukss: ukss_values,
        accuracy,
        rho,
    })
}
