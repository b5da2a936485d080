use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::metrics::{MetricMeans, SampleRecord, UkssReport};

use super::{read_json, write_json};

pub const CSV_HEADER: [&str; 6] = ["id", "kfr", "shr", "bsr", "bds", "score"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    per_sample: Vec<SampleRecord>,
    ukss: f64,
    epsilon: f64,
    n: usize,
    means: MetricMeans,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    id: String,
    kfr: f64,
    shr: f64,
    bsr: f64,
    bds: f64,
    score: f64,
}

fn nonempty(report: &UkssReport) -> Result<()> {
    if report.n() == 0 {
        return Err(KfsError::precondition("a report needs at least one sample"));
    }
    Ok(())
}

/// Writes a report; floats use the shortest text that reads back bit-exactly.
pub fn write_report(report: &UkssReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    nonempty(report)?;
    let path = path.as_ref();
    match format {
        ReportFormat::Json => write_json(
            path,
            &ReportDoc {
                per_sample: report.per_sample.clone(),
                ukss: report.ukss,
                epsilon: report.epsilon,
                n: report.n(),
                means: report.means(),
            },
        ),
        ReportFormat::Csv => write_csv(report, path),
    }
}

fn write_csv(report: &UkssReport, path: &Path) -> Result<()> {
    let csv_err = |source| KfsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in &report.per_sample {
        let m = &r.metrics;
        w.serialize(CsvRow {
            id: r.id.clone(),
            kfr: m.kfr,
            shr: m.shr,
            bsr: m.bsr,
            bds: m.bds,
            score: m.score,
        })
        .map_err(csv_err)?;
    }
    let mut file = w.into_inner().map_err(|e| KfsError::io(path, e.into_error()))?;
    let means = report.means();
    let trailer = format!(
        "# ukss={}\n# epsilon={}\n# n={}\n# mean_kfr={}\n# mean_shr={}\n# mean_bsr={}\n# mean_bds={}\n# mean_score={}\n",
        report.ukss,
        report.epsilon,
        report.n(),
        means.kfr,
        means.shr,
        means.bsr,
        means.bds,
        means.score
    );
    file.write_all(trailer.as_bytes()).map_err(|e| KfsError::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>, format: ReportFormat) -> Result<UkssReport> {
    let path = path.as_ref();
    let report = match format {
        ReportFormat::Json => {
            let doc: ReportDoc = read_json(path)?;
            if doc.n != doc.per_sample.len() {
                return Err(KfsError::Format {
                    path: path.to_path_buf(),
                    reason: format!("n = {} but {} rows", doc.n, doc.per_sample.len()),
                });
            }
            UkssReport {
                per_sample: doc.per_sample,
                ukss: doc.ukss,
                epsilon: doc.epsilon,
            }
        }
        ReportFormat::Csv => read_csv(path)?,
    };
    nonempty(&report)?;
    Ok(report)
}

fn read_csv(path: &Path) -> Result<UkssReport> {
    let format = |reason: String| KfsError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let csv_err = |source| KfsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(format(format!("header {header:?}, expected {CSV_HEADER:?}")));
    }
    let mut per_sample = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let r = row.map_err(csv_err)?;
        per_sample.push(SampleRecord {
            id: r.id,
            metrics: crate::metrics::SampleMetrics {
                kfr: r.kfr,
                shr: r.shr,
                bsr: r.bsr,
                bds: r.bds,
                score: r.score,
            },
        });
    }

    let file = fs::File::open(path).map_err(|e| KfsError::io(path, e))?;
    let (mut ukss, mut epsilon) = (None, None);
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| KfsError::io(path, e))?;
        let Some(kv) = line.strip_prefix("# ") else { continue };
        let Some((key, value)) = kv.split_once('=') else { continue };
        let parse = |v: &str| v.parse::<f64>().map_err(|e| format(format!("bad `{key}` value `{v}`: {e}")));
        match key {
            "ukss" => ukss = Some(parse(value)?),
            "epsilon" => epsilon = Some(parse(value)?),
            "n" if value.parse::<usize>().ok() != Some(per_sample.len()) => {
                return Err(format(format!("n = {value} but {} rows", per_sample.len())));
            }
            _ => {}
        }
    }
    Ok(UkssReport {
        per_sample,
        ukss: ukss.ok_or_else(|| format("missing `# ukss=` line".into()))?,
        epsilon: epsilon.ok_or_else(|| format("missing `# epsilon=` line".into()))?,
    })
}
