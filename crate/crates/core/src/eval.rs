//! Detection and localization scoring, and the decomposition-level sweep.
//!
//! A prediction is scored two ways. Detection measures how well the
//! four-slot output matches the target as `1 - max_k |p_k - y_k|`,
//! clamped to `[0, 1]`; columns are grouped by the height rung nearest
//! their true encoded value, so interpolated heights count toward their
//! closest rung. Localization asks only whether the largest output slot
//! is the defect wheel, grouped by true position.
//!
//! The sweep runs the whole downstream pipeline (extract, augment,
//! train, score) once per decomposition level 0..6 on one set of
//! simulated records and tabulates both metrics per level. Levels are
//! independent and internally deterministic, so the sweep parallelizes
//! across them without changing a single bit of the output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;

use crate::augment::{augment_all, Dataset};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{extract_record, FeatureConfig};
use crate::flatgen::{height_label, height_ladder, AbaRecord, WheelPosition};
use crate::fnn::{height_bin, train, FnnModel, StopReason};
use crate::wpd::MAX_LEVEL;

// --- per-column scores ---------------------------------------------------------

/// Index of the largest slot; ties resolve to the lowest index.
pub fn localize(prediction: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in prediction.iter().enumerate().skip(1) {
        if v > prediction[best] {
            best = i;
        }
    }
    best
}

/// Detection score of one prediction: `1 - max_k |p_k - y_k|`, clamped
/// to `[0, 1]`. A perfect four-slot match scores 1.
pub fn detection_score(prediction: &[f64], label: &[f64]) -> f64 {
    let worst = prediction
        .iter()
        .zip(label)
        .map(|(p, y)| (p - y).abs())
        .fold(0.0, f64::max);
    (1.0 - worst).clamp(0.0, 1.0)
}

// --- grouped summaries -----------------------------------------------------------

/// Grouped accuracies of one model on one column set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    /// Mean detection score per height rung, ascending (1e-4 .. 1e-0 mm);
    /// `NaN` marks a rung with no columns.
    pub detection: [f64; 5],
    /// Mean of the five rung scores.
    pub detection_avg: f64,
    /// Correct-wheel fraction per true position (FL, FR, RL, RR).
    pub localization: [f64; 4],
    /// Mean of the four position fractions.
    pub localization_avg: f64,
    /// Columns scored.
    pub columns: usize,
}

/// Groups per-column scores of a prediction matrix against its labels.
/// Columns whose label is all zero carry no defect and are skipped.
pub fn summarize(predictions: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<EvalSummary> {
    if predictions.nrows() != 4 || labels.nrows() != 4 {
        return Err(Error::Shape(format!(
            "prediction and label matrices need 4 rows, found {} and {}",
            predictions.nrows(),
            labels.nrows()
        )));
    }
    if predictions.ncols() != labels.ncols() || predictions.ncols() == 0 {
        return Err(Error::Shape(format!(
            "column counts disagree: {} predictions, {} labels",
            predictions.ncols(),
            labels.ncols()
        )));
    }

    let mut det_sum = [0.0; 5];
    let mut det_n = [0usize; 5];
    let mut loc_hits = [0usize; 4];
    let mut loc_n = [0usize; 4];
    let mut columns = 0;
    for c in 0..labels.ncols() {
        let label: Vec<f64> = labels.column(c).to_vec();
        if label.iter().all(|&v| v == 0.0) {
            continue;
        }
        let prediction: Vec<f64> = predictions.column(c).to_vec();
        let pos = localize(&label);
        let bin = height_bin(label[pos]);
        debug_assert!(bin < 5, "non-zero label fell into the no-defect bin");

        det_sum[bin] += detection_score(&prediction, &label);
        det_n[bin] += 1;
        if localize(&prediction) == pos {
            loc_hits[pos] += 1;
        }
        loc_n[pos] += 1;
        columns += 1;
    }

    let mut detection = [f64::NAN; 5];
    for (slot, (sum, n)) in detection.iter_mut().zip(det_sum.iter().zip(det_n)) {
        if n > 0 {
            *slot = sum / n as f64;
        }
    }
    let mut localization = [f64::NAN; 4];
    for (slot, (hits, n)) in localization.iter_mut().zip(loc_hits.iter().zip(loc_n)) {
        if n > 0 {
            *slot = *hits as f64 / n as f64;
        }
    }
    Ok(EvalSummary {
        detection,
        detection_avg: detection.iter().sum::<f64>() / 5.0,
        localization,
        localization_avg: localization.iter().sum::<f64>() / 4.0,
        columns,
    })
}

/// Predicts a feature matrix with a model and groups the scores.
pub fn evaluate(
    model: &FnnModel,
    features: ArrayView2<f64>,
    labels: ArrayView2<f64>,
) -> Result<EvalSummary> {
    let predictions = model.forward_batch(features)?;
    summarize(predictions.view(), labels)
}

// --- metrics table ----------------------------------------------------------------

/// One level's accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMetrics {
    /// Decomposition level.
    pub level: usize,
    /// Grouped accuracies at that level.
    pub summary: EvalSummary,
}

/// Everything one sweep level produced, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutcome {
    /// Accuracies entering the metrics table.
    pub metrics: LevelMetrics,
    /// Final training loss.
    pub train_mse: f64,
    /// Optimizer passes used.
    pub iterations: usize,
    /// Why training stopped.
    pub stop_reason: StopReason,
    /// Wall-clock seconds for the level (diagnostic only; never written
    /// to the metrics files).
    pub seconds: f64,
}

/// Accuracy-per-level table in both output shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    /// One entry per level, ascending.
    pub rows: Vec<LevelMetrics>,
}

impl MetricsTable {
    /// Collects the metric rows out of sweep outcomes.
    pub fn from_outcomes(outcomes: &[LevelOutcome]) -> MetricsTable {
        MetricsTable {
            rows: outcomes.iter().map(|o| o.metrics.clone()).collect(),
        }
    }

    /// Writes the wide table: one column per level, a detection block
    /// (five rungs then their average) above a localization block (four
    /// positions then their average).
    pub fn write_table_csv(&self, path: &Path) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Shape("metrics table has no levels".into()));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            let mut header = vec!["block".to_string(), "group".to_string()];
            header.extend(self.rows.iter().map(|r| format!("L{}", r.level)));
            writeln!(w, "{}", header.join(","))?;

            for (rung, height_m) in height_ladder().into_iter().enumerate() {
                let mut fields = vec!["detection".to_string(), height_label(height_m)];
                fields.extend(self.rows.iter().map(|r| r.summary.detection[rung].to_string()));
                writeln!(w, "{}", fields.join(","))?;
            }
            let mut fields = vec!["detection".to_string(), "average".to_string()];
            fields.extend(self.rows.iter().map(|r| r.summary.detection_avg.to_string()));
            writeln!(w, "{}", fields.join(","))?;

            for position in WheelPosition::ALL {
                let mut fields = vec!["localization".to_string(), position.label().to_string()];
                fields.extend(
                    self.rows
                        .iter()
                        .map(|r| r.summary.localization[position.index()].to_string()),
                );
                writeln!(w, "{}", fields.join(","))?;
            }
            let mut fields = vec!["localization".to_string(), "average".to_string()];
            fields.extend(
                self.rows
                    .iter()
                    .map(|r| r.summary.localization_avg.to_string()),
            );
            writeln!(w, "{}", fields.join(","))?;
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }

    /// Writes the long form: `level,group,accuracy`, level-major, with
    /// groups like `detection/1e-4` and `localization/FL`; the averages
    /// are included as `detection/average` and `localization/average`.
    pub fn write_long_csv(&self, path: &Path) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Shape("metrics table has no levels".into()));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "level,group,accuracy")?;
            for row in &self.rows {
                for (rung, height_m) in height_ladder().into_iter().enumerate() {
                    writeln!(
                        w,
                        "{},detection/{},{}",
                        row.level,
                        height_label(height_m),
                        row.summary.detection[rung]
                    )?;
                }
                writeln!(w, "{},detection/average,{}", row.level, row.summary.detection_avg)?;
                for position in WheelPosition::ALL {
                    writeln!(
                        w,
                        "{},localization/{},{}",
                        row.level,
                        position.label(),
                        row.summary.localization[position.index()]
                    )?;
                }
                writeln!(
                    w,
                    "{},localization/average,{}",
                    row.level, row.summary.localization_avg
                )?;
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }
}

// --- level sweep --------------------------------------------------------------------

/// Runs extract, augment, train and score at one level.
fn run_level(records: &[AbaRecord], config: &RunConfig, level: usize) -> Result<LevelOutcome> {
    let started = Instant::now();
    let fcfg = FeatureConfig {
        level,
        segment_len_override: config.features.segment_len_override,
    };
    let mut rows = Vec::with_capacity(records.len() * crate::features::SEGMENTS_PER_CHANNEL);
    for record in records {
        rows.extend(extract_record(record, &fcfg)?);
    }
    let original = Dataset::from_feature_vectors(&rows)?;
    let dataset = if config.augment.enabled {
        augment_all(&original)?
    } else {
        original
    };

    let (model, report) = train(&dataset, &config.train)?;

    // Score the hold-out columns; with no hold-out, score everything.
    let summary = if report.val_indices.is_empty() {
        evaluate(&model, dataset.features.view(), dataset.labels.view())?
    } else {
        let features = dataset.features.select(Axis(1), &report.val_indices);
        let labels = dataset.labels.select(Axis(1), &report.val_indices);
        evaluate(&model, features.view(), labels.view())?
    };

    Ok(LevelOutcome {
        metrics: LevelMetrics { level, summary },
        train_mse: report.final_mse,
        iterations: report.iterations,
        stop_reason: report.stop_reason,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs the downstream pipeline at every decomposition level 0..6 on one
/// simulated record grid (20 records, height-major) and returns the
/// outcomes ascending by level. The configured feature level is ignored;
/// the sweep always covers all levels. Each level is internally
/// sequential and seeded, so the result does not depend on how the
/// levels are scheduled.
pub fn sweep_levels(records: &[AbaRecord], config: &RunConfig) -> Result<Vec<LevelOutcome>> {
    config.validate()?;
    if records.len() != 20 {
        return Err(Error::Shape(format!(
            "sweep expects the 20-record grid (5 heights x 4 positions), found {}",
            records.len()
        )));
    }
    (0..=MAX_LEVEL)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|level| run_level(records, config, level))
        .collect()
}
