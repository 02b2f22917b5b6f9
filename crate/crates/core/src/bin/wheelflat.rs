//! Command-line front end for the wheel-flat detection pipeline.
//!
//! Subcommands mirror the pipeline stages: `simulate` writes the
//! acceleration records of the height ladder, `extract` reduces them to
//! labelled feature vectors, `augment` densifies the feature set by
//! interpolation, `train` fits the regression network, `predict` and
//! `evaluate` apply a trained model, and `sweep` runs the whole chain at
//! every decomposition level and tabulates accuracy per level.
//!
//! Every run logs its version and the fully resolved configuration to
//! stderr, keeps stdout free of diagnostics, and is idempotent given an
//! identical configuration and seed: output files rewrite byte for
//! byte. Failures exit non-zero with a single `error: ...` line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndarray::Axis;

use wheelflat_core::augment::{augment_all, read_dataset_csv, write_dataset_csv, Dataset};
use wheelflat_core::config::RunConfig;
use wheelflat_core::error::{Error, Result};
use wheelflat_core::eval::{evaluate, sweep_levels, EvalSummary, MetricsTable};
use wheelflat_core::features::{extract_record, read_features_csv, write_features_csv};
use wheelflat_core::flatgen::{
    height_label, height_ladder, parse_height_label, read_record_grid, record_filename,
    synthesize, write_record_csv, WheelFlat, WheelPosition,
};
use wheelflat_core::fnn::{stratified_split, train, FnnModel};

// --- argument surface ----------------------------------------------------------

#[derive(Parser)]
#[command(name = "wheelflat", version, about = "Wheel-flat detection pipeline")]
struct Cli {
    /// TOML run configuration; omitted sections take the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the seed of both the signal generator and the trainer.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the wavelet packet decomposition level (0..6).
    #[arg(long, global = true, value_name = "J")]
    level: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesizes acceleration records for the flat-height ladder.
    Simulate {
        /// Directory receiving one CSV per (height, wheel).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Comma-separated subset of millimetre height labels
        /// (e.g. "1e-4,1e-0"); the default covers the whole ladder.
        #[arg(long, value_name = "LIST")]
        heights: Option<String>,
    },
    /// Reduces a simulated record grid to labelled feature vectors.
    Extract {
        /// Directory holding the simulated records.
        #[arg(long, value_name = "DIR")]
        signals: PathBuf,
        /// Output feature CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Expands a 500-row feature file by height interpolation.
    Augment {
        /// Feature CSV written by `extract`.
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Output dataset CSV (60000 rows, provenance-tagged).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Trains the regression network on a dataset.
    Train {
        /// Dataset CSV written by `augment` (or `extract` output reread
        /// as a dataset).
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Output model file; a `<out>.report.txt` summary sits next
        /// to it.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Applies a trained model to feature vectors.
    Predict {
        /// Model file written by `train`.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Feature CSV to predict.
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Output CSV of four-slot predictions.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Scores a trained model on a labelled dataset.
    Evaluate {
        /// Model file written by `train`.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Labelled dataset CSV.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Output CSV of grouped accuracies.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Runs the full pipeline at every level and tabulates accuracy.
    Sweep {
        /// Directory holding the simulated record grid.
        #[arg(long, value_name = "DIR")]
        signals: PathBuf,
        /// Directory receiving metrics.csv and metrics_long.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

// --- entry point -----------------------------------------------------------------

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                // Ignore write errors: a pager closing the pipe mid-help is benign.
                use std::io::Write;
                let _ = write!(std::io::stdout(), "{e}");
                return ExitCode::SUCCESS;
            }
            // Single-line failure contract, even for argument misuse.
            let rendered = e.render().to_string();
            let line = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("error: invalid arguments");
            eprintln!("{line}");
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(cli.seed, cli.level);
    config.validate()?;

    // Run log header: version, then the fully resolved configuration.
    eprintln!("wheelflat {}", env!("CARGO_PKG_VERSION"));
    for line in config.to_toml_string()?.lines() {
        eprintln!("{line}");
    }

    match cli.command {
        Command::Simulate { out, heights } => cmd_simulate(&config, &out, heights.as_deref()),
        Command::Extract { signals, out } => cmd_extract(&config, &signals, &out),
        Command::Augment { features, out } => cmd_augment(&features, &out),
        Command::Train { dataset, out } => cmd_train(&config, &dataset, &out),
        Command::Predict { model, features, out } => cmd_predict(&model, &features, &out),
        Command::Evaluate { model, dataset, out } => cmd_evaluate(&config, &model, &dataset, &out),
        Command::Sweep { signals, out } => cmd_sweep(&config, &signals, &out, cli.level.is_some()),
    }
}

// --- subcommands --------------------------------------------------------------------

fn cmd_simulate(config: &RunConfig, out: &Path, heights: Option<&str>) -> Result<()> {
    let heights: Vec<f64> = match heights {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(parse_height_label)
            .collect::<Result<_>>()?,
        None => height_ladder().to_vec(),
    };
    if heights.is_empty() {
        return Err(Error::Config("no heights requested".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for &height_m in &heights {
        for position in WheelPosition::ALL {
            let flat = WheelFlat::new(height_m, config.sim.wheel_radius_m, position)?;
            let record = synthesize(&flat, &config.sim)?;
            let path = out.join(record_filename(height_m, position));
            write_record_csv(&record, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_extract(config: &RunConfig, signals: &Path, out: &Path) -> Result<()> {
    let records = read_record_grid(signals, &config.sim)?;
    let mut rows = Vec::new();
    for record in &records {
        rows.extend(extract_record(record, &config.features)?);
    }
    write_features_csv(&rows, out)?;
    eprintln!(
        "wrote {} feature vectors at level {} to {}",
        rows.len(),
        config.features.level,
        out.display()
    );
    Ok(())
}

fn cmd_augment(features: &Path, out: &Path) -> Result<()> {
    let rows = read_features_csv(features)?;
    let original = Dataset::from_feature_vectors(&rows)?;
    let augmented = augment_all(&original)?;
    write_dataset_csv(&augmented, out, true)?;
    eprintln!(
        "wrote {} columns ({} original) to {}",
        augmented.n_columns(),
        augmented
            .provenance
            .iter()
            .filter(|p| **p == wheelflat_core::augment::Provenance::Original)
            .count(),
        out.display()
    );
    Ok(())
}

fn cmd_train(config: &RunConfig, dataset_path: &Path, out: &Path) -> Result<()> {
    let dataset = read_dataset_csv(dataset_path)?;
    let (model, report) = train(&dataset, &config.train)?;
    model.save(out)?;

    let mut report_name = out.as_os_str().to_owned();
    report_name.push(".report.txt");
    let report_path = PathBuf::from(report_name);
    let text = format!(
        "final_mse {}\niterations {}\nstop_reason {}\ntrain_columns {}\nval_columns {}\nseed {}\n",
        report.final_mse,
        report.iterations,
        report.stop_reason,
        report.train_indices.len(),
        report.val_indices.len(),
        report.seed
    );
    std::fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;

    eprintln!(
        "wrote {} after {} iterations (mse {:.3e}, stopped by {}); report in {}",
        out.display(),
        report.iterations,
        report.final_mse,
        report.stop_reason,
        report_path.display()
    );
    Ok(())
}

fn cmd_predict(model_path: &Path, features_path: &Path, out: &Path) -> Result<()> {
    let model = FnnModel::load(model_path)?;
    let rows = read_features_csv(features_path)?;
    let dataset = Dataset::from_feature_vectors(&rows)?;
    let predictions = model.forward_batch(dataset.features.view())?;

    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        use std::io::Write;
        writeln!(w, "FL,FR,RL,RR")?;
        for c in 0..predictions.ncols() {
            writeln!(
                w,
                "{},{},{},{}",
                predictions[[0, c]],
                predictions[[1, c]],
                predictions[[2, c]],
                predictions[[3, c]]
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(out, e))?;
    eprintln!("wrote {} predictions to {}", predictions.ncols(), out.display());
    Ok(())
}

fn write_summary_csv(summary: &EvalSummary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        use std::io::Write;
        writeln!(w, "group,accuracy")?;
        for (rung, height_m) in height_ladder().into_iter().enumerate() {
            writeln!(w, "detection/{},{}", height_label(height_m), summary.detection[rung])?;
        }
        writeln!(w, "detection/average,{}", summary.detection_avg)?;
        for position in WheelPosition::ALL {
            writeln!(
                w,
                "localization/{},{}",
                position.label(),
                summary.localization[position.index()]
            )?;
        }
        writeln!(w, "localization/average,{}", summary.localization_avg)?;
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

fn cmd_evaluate(config: &RunConfig, model_path: &Path, dataset_path: &Path, out: &Path) -> Result<()> {
    let model = FnnModel::load(model_path)?;
    let dataset = read_dataset_csv(dataset_path)?;

    // Re-derive the hold-out columns the model never trained on; the
    // split is pinned by the model's own seed and the configured
    // fraction. A zero fraction scores the whole dataset.
    let summary = if config.train.validation_fraction > 0.0 {
        let (_, val) = stratified_split(
            dataset.labels.view(),
            config.train.validation_fraction,
            model.seed,
        )?;
        if val.is_empty() {
            eprintln!("note: hold-out selection is empty; scoring all columns");
            evaluate(&model, dataset.features.view(), dataset.labels.view())?
        } else {
            let features = dataset.features.select(Axis(1), &val);
            let labels = dataset.labels.select(Axis(1), &val);
            evaluate(&model, features.view(), labels.view())?
        }
    } else {
        evaluate(&model, dataset.features.view(), dataset.labels.view())?
    };

    write_summary_csv(&summary, out)?;
    eprintln!(
        "scored {} columns: detection avg {:.4}, localization avg {:.4}; wrote {}",
        summary.columns,
        summary.detection_avg,
        summary.localization_avg,
        out.display()
    );
    Ok(())
}

fn cmd_sweep(config: &RunConfig, signals: &Path, out: &Path, level_flag: bool) -> Result<()> {
    if level_flag {
        eprintln!("note: --level is ignored by sweep; levels 0 through 6 all run");
    }
    let records = read_record_grid(signals, &config.sim)?;
    let outcomes = sweep_levels(&records, config)?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let table = MetricsTable::from_outcomes(&outcomes);
    let table_path = out.join("metrics.csv");
    let long_path = out.join("metrics_long.csv");
    table.write_table_csv(&table_path)?;
    table.write_long_csv(&long_path)?;

    for o in &outcomes {
        eprintln!(
            "level {}: {} iterations, train mse {:.3e}, stopped by {}, \
             detection avg {:.4}, localization avg {:.4}, {:.1}s",
            o.metrics.level,
            o.iterations,
            o.train_mse,
            o.stop_reason,
            o.metrics.summary.detection_avg,
            o.metrics.summary.localization_avg,
            o.seconds
        );
    }
    eprintln!("wrote {} and {}", table_path.display(), long_path.display());
    Ok(())
}
