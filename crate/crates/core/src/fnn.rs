//! Feedforward regression network trained by scaled conjugate gradients.
//!
//! The network maps a feature vector to the four-slot defect target
//! through two tanh hidden layers and a linear head, `D -> 32 -> 16 -> 4`.
//! Inputs are z-scored with statistics of the training split; the
//! statistics travel with the model so inference sees the same scale.
//!
//! Training minimizes `MSE = sum(e^2) / (4 n)` full-batch with Moller's
//! scaled conjugate gradient: a second-order step size from a finite
//! curvature probe along the search direction, a Levenberg-Marquardt
//! scale `lambda` raised on failed steps and lowered on very good ones,
//! and a restart to steepest descent every `P` iterations. Accepted
//! steps never increase the loss.
//!
//! Every reduction across dataset columns (normalization statistics,
//! loss, gradient) is summed over a fixed binary tree whose leaves span
//! at most [`COLUMN_BLOCK`] columns. Column blocks make the arithmetic
//! independent of the total column count, so concatenating a dataset
//! with itself reproduces the original training run bit for bit whenever
//! the doubled width exceeds one leaf.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::Dataset;
use crate::error::{Error, Result};

/// First hidden layer width.
pub const HIDDEN1: usize = 32;
/// Second hidden layer width.
pub const HIDDEN2: usize = 16;
/// Output slots, one per wheel.
pub const OUTPUTS: usize = 4;

/// Minimum dataset size accepted for training.
pub const MIN_TRAIN_COLUMNS: usize = 100;

/// Maximum columns per reduction leaf; see the module doc.
pub const COLUMN_BLOCK: usize = 512;

/// Magic line identifying a serialized model.
pub const MODEL_MAGIC: &str = "wheelflat-fnn v1";

// --- configuration -----------------------------------------------------------

/// Scaled-conjugate-gradient tuning constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScgConfig {
    /// Curvature probe step along the search direction.
    pub sigma: f64,
    /// Initial Levenberg-Marquardt scale.
    pub lambda_init: f64,
}

impl Default for ScgConfig {
    fn default() -> Self {
        ScgConfig {
            sigma: 1e-5,
            lambda_init: 1e-6,
        }
    }
}

/// Training run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Iteration budget; each optimizer pass counts, accepted or not.
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop once the loss falls below this; 0 disables the check.
    pub mse_tolerance: f64,
    /// Fraction of columns held out per stratum, in `[0, 1)`.
    pub validation_fraction: f64,
    /// Seed for weight initialization and the validation split.
    pub seed: u64,
    /// Optimizer constants.
    pub scg: ScgConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iterations: 150,
            gradient_tolerance: 1e-6,
            mse_tolerance: 0.0,
            validation_fraction: 0.2,
            seed: 42,
            scg: ScgConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Validates ranges.
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance.is_finite() && self.gradient_tolerance >= 0.0) {
            return Err(Error::Config("gradient_tolerance must be non-negative".into()));
        }
        if !(self.mse_tolerance.is_finite() && self.mse_tolerance >= 0.0) {
            return Err(Error::Config("mse_tolerance must be non-negative".into()));
        }
        if !(self.validation_fraction.is_finite()
            && (0.0..1.0).contains(&self.validation_fraction))
        {
            return Err(Error::Config(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        if !(self.scg.sigma.is_finite() && self.scg.sigma > 0.0) {
            return Err(Error::Config("scg.sigma must be positive".into()));
        }
        if !(self.scg.lambda_init.is_finite() && self.scg.lambda_init > 0.0) {
            return Err(Error::Config("scg.lambda_init must be positive".into()));
        }
        Ok(())
    }
}

// --- column-block reduction -----------------------------------------------------

/// Sums leaf vectors over a fixed binary tree of column ranges. The split
/// point depends only on the range width, so equal-width ranges of equal
/// data produce bitwise equal results.
fn reduce_columns<F>(lo: usize, hi: usize, leaf: &F) -> Vec<f64>
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    if hi - lo <= COLUMN_BLOCK {
        return leaf(lo, hi);
    }
    let mid = lo + (hi - lo) / 2;
    let mut left = reduce_columns(lo, mid, leaf);
    let right = reduce_columns(mid, hi, leaf);
    for (l, r) in left.iter_mut().zip(&right) {
        *l += *r;
    }
    left
}

// --- model ---------------------------------------------------------------------

/// The trained network together with its input normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    /// Layer widths `[D, 32, 16, 4]`.
    pub layer_sizes: [usize; 4],
    /// First-layer weights, `32 x D`.
    pub w1: Array2<f64>,
    /// First-layer bias.
    pub b1: Array1<f64>,
    /// Second-layer weights, `16 x 32`.
    pub w2: Array2<f64>,
    /// Second-layer bias.
    pub b2: Array1<f64>,
    /// Output weights, `4 x 16`.
    pub w3: Array2<f64>,
    /// Output bias.
    pub b3: Array1<f64>,
    /// Per-feature mean of the training split.
    pub mu: Array1<f64>,
    /// Per-feature standard deviation of the training split; exact zeros
    /// are replaced by 1 so constant features pass through unscaled.
    pub sigma: Array1<f64>,
    /// Seed the weights were drawn from.
    pub seed: u64,
}

impl FnnModel {
    /// Fresh model with uniform `+-1/sqrt(fan_in)` weights, zero biases,
    /// and identity normalization. Weights are drawn in a fixed order
    /// (w1, w2, w3, row-major), so a seed pins every parameter.
    pub fn new_random(input_dim: usize, seed: u64) -> Result<FnnModel> {
        if input_dim == 0 {
            return Err(Error::Shape("input dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            let values: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            Array2::from_shape_vec((rows, cols), values).expect("shape matches length")
        };
        let w1 = draw(HIDDEN1, input_dim);
        let w2 = draw(HIDDEN2, HIDDEN1);
        let w3 = draw(OUTPUTS, HIDDEN2);
        Ok(FnnModel {
            layer_sizes: [input_dim, HIDDEN1, HIDDEN2, OUTPUTS],
            w1,
            b1: Array1::zeros(HIDDEN1),
            w2,
            b2: Array1::zeros(HIDDEN2),
            w3,
            b3: Array1::zeros(OUTPUTS),
            mu: Array1::zeros(input_dim),
            sigma: Array1::ones(input_dim),
            seed,
        })
    }

    /// Input dimension `D`.
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of trainable parameters.
    pub fn param_count(&self) -> usize {
        let [d, h1, h2, out] = self.layer_sizes;
        d * h1 + h1 + h1 * h2 + h2 + h2 * out + out
    }

    /// All trainable parameters as one vector, order w1, b1, w2, b2,
    /// w3, b3, matrices row-major.
    pub fn params_flat(&self) -> Array1<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend(self.w1.iter());
        flat.extend(self.b1.iter());
        flat.extend(self.w2.iter());
        flat.extend(self.b2.iter());
        flat.extend(self.w3.iter());
        flat.extend(self.b3.iter());
        Array1::from_vec(flat)
    }

    /// Restores parameters from the layout of [`FnnModel::params_flat`].
    pub fn set_params_flat(&mut self, params: ArrayView1<f64>) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, expected {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut source = params.iter();
        for target in self
            .w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
            .chain(self.w3.iter_mut())
            .chain(self.b3.iter_mut())
        {
            *target = *source.next().expect("length verified above");
        }
        Ok(())
    }

    /// Normalized copy of a column range of the feature matrix.
    fn normalized_block(&self, features: ArrayView2<f64>, lo: usize, hi: usize) -> Array2<f64> {
        let mut block = features.slice(s![.., lo..hi]).to_owned();
        for (r, mut row) in block.rows_mut().into_iter().enumerate() {
            let mu = self.mu[r];
            let sd = self.sigma[r];
            row.mapv_inplace(|v| (v - mu) / sd);
        }
        block
    }

    /// Forward pass on an already-normalized block; returns activations.
    fn forward_normalized(&self, xn: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let mut a1 = self.w1.dot(xn);
        for mut col in a1.axis_iter_mut(Axis(1)) {
            col += &self.b1;
        }
        a1.mapv_inplace(f64::tanh);

        let mut a2 = self.w2.dot(&a1);
        for mut col in a2.axis_iter_mut(Axis(1)) {
            col += &self.b2;
        }
        a2.mapv_inplace(f64::tanh);

        let mut out = self.w3.dot(&a2);
        for mut col in out.axis_iter_mut(Axis(1)) {
            col += &self.b3;
        }
        (a1, a2, out)
    }

    /// Checks that a feature/label pair fits the model.
    fn check_shapes(&self, features: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<()> {
        if features.nrows() != self.input_dim() {
            return Err(Error::Shape(format!(
                "features have {} rows, model expects {}",
                features.nrows(),
                self.input_dim()
            )));
        }
        if labels.nrows() != OUTPUTS || labels.ncols() != features.ncols() {
            return Err(Error::Shape(format!(
                "labels are {} x {}, expected {} x {}",
                labels.nrows(),
                labels.ncols(),
                OUTPUTS,
                features.ncols()
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::Shape("no columns to evaluate".into()));
        }
        Ok(())
    }

    /// Mean squared error over all columns: `sum(e^2) / (4 n)`.
    pub fn loss(&self, features: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<f64> {
        self.check_shapes(features, labels)?;
        let n = features.ncols();
        let sse = reduce_columns(0, n, &|lo, hi| {
            let xn = self.normalized_block(features, lo, hi);
            let (_, _, out) = self.forward_normalized(&xn);
            let mut acc = 0.0;
            for (p, y) in out.iter().zip(labels.slice(s![.., lo..hi]).iter()) {
                let e = p - y;
                acc += e * e;
            }
            vec![acc]
        });
        Ok(sse[0] / (OUTPUTS as f64 * n as f64))
    }

    /// Gradient of [`FnnModel::loss`] in the layout of
    /// [`FnnModel::params_flat`].
    pub fn gradient(&self, features: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_shapes(features, labels)?;
        let n = features.ncols();
        let sums = reduce_columns(0, n, &|lo, hi| {
            let xn = self.normalized_block(features, lo, hi);
            let (a1, a2, out) = self.forward_normalized(&xn);
            let e = &out - &labels.slice(s![.., lo..hi]);

            let dw3 = e.dot(&a2.t());
            let db3 = e.sum_axis(Axis(1));
            let mut g2 = self.w3.t().dot(&e);
            g2.zip_mut_with(&a2, |g, &a| *g *= 1.0 - a * a);

            let dw2 = g2.dot(&a1.t());
            let db2 = g2.sum_axis(Axis(1));
            let mut g1 = self.w2.t().dot(&g2);
            g1.zip_mut_with(&a1, |g, &a| *g *= 1.0 - a * a);

            let dw1 = g1.dot(&xn.t());
            let db1 = g1.sum_axis(Axis(1));

            let mut flat = Vec::with_capacity(self.param_count());
            flat.extend(dw1.iter());
            flat.extend(db1.iter());
            flat.extend(dw2.iter());
            flat.extend(db2.iter());
            flat.extend(dw3.iter());
            flat.extend(db3.iter());
            flat
        });
        let scale = 2.0 * n as f64;
        Ok(Array1::from_iter(sums.into_iter().map(|v| v / scale)))
    }

    /// Predicts one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<[f64; 4]> {
        if features.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, model expects {}",
                features.len(),
                self.input_dim()
            )));
        }
        let column = Array2::from_shape_vec((features.len(), 1), features.to_vec())
            .expect("shape matches length");
        let out = self.forward_batch(column.view())?;
        Ok([out[[0, 0]], out[[1, 0]], out[[2, 0]], out[[3, 0]]])
    }

    /// Predicts every column of a feature matrix; returns `4 x N`.
    pub fn forward_batch(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.nrows() != self.input_dim() {
            return Err(Error::Shape(format!(
                "features have {} rows, model expects {}",
                features.nrows(),
                self.input_dim()
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::Shape("no columns to evaluate".into()));
        }
        let xn = self.normalized_block(features, 0, features.ncols());
        let (_, _, out) = self.forward_normalized(&xn);
        Ok(out)
    }

    // --- persistence --

    /// Writes the model as structured text: magic line, layer sizes,
    /// seed, normalization vectors, then each weight matrix row-major
    /// (one line per row) and each bias. Values use the shortest
    /// representation that parses back to the identical bits.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let join = |values: &mut dyn Iterator<Item = &f64>| {
            values
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "{MODEL_MAGIC}")?;
            writeln!(
                w,
                "layers {} {} {} {}",
                self.layer_sizes[0], self.layer_sizes[1], self.layer_sizes[2], self.layer_sizes[3]
            )?;
            writeln!(w, "seed {}", self.seed)?;
            writeln!(w, "mu {}", join(&mut self.mu.iter()))?;
            writeln!(w, "sigma {}", join(&mut self.sigma.iter()))?;
            for (tag, matrix) in [("w1", &self.w1), ("w2", &self.w2), ("w3", &self.w3)] {
                for row in matrix.rows() {
                    writeln!(w, "{tag} {}", join(&mut row.iter()))?;
                }
            }
            writeln!(w, "b1 {}", join(&mut self.b1.iter()))?;
            writeln!(w, "b2 {}", join(&mut self.b2.iter()))?;
            writeln!(w, "b3 {}", join(&mut self.b3.iter()))?;
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }

    /// Reads a model written by [`FnnModel::save`].
    pub fn load(path: &Path) -> Result<FnnModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, msg: String| Error::Parse {
            file: path.display().to_string(),
            line,
            msg,
        };
        let next_line = |lines: &mut std::iter::Enumerate<std::str::Lines>,
                         expected_tag: &str|
         -> Result<(usize, Vec<f64>)> {
            let (idx, line) = lines.next().ok_or_else(|| {
                parse_err(0, format!("unexpected end of file before {expected_tag}"))
            })?;
            let mut parts = line.split_whitespace();
            let tag = parts
                .next()
                .ok_or_else(|| parse_err(idx + 1, "empty line".into()))?;
            if tag != expected_tag {
                return Err(parse_err(
                    idx + 1,
                    format!("expected {expected_tag:?}, found {tag:?}"),
                ));
            }
            let mut values = Vec::new();
            for part in parts {
                let v: f64 = part
                    .parse()
                    .map_err(|_| parse_err(idx + 1, format!("bad number {part:?}")))?;
                values.push(v);
            }
            Ok((idx + 1, values))
        };

        let (_, magic) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        if magic != MODEL_MAGIC {
            return Err(Error::VersionMismatch {
                expected: MODEL_MAGIC.into(),
                found: magic.to_string(),
            });
        }

        let (line_no, sizes) = next_line(&mut lines, "layers")?;
        if sizes.len() != 4 || sizes.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return Err(parse_err(line_no, "layers line needs four positive sizes".into()));
        }
        let layer_sizes = [
            sizes[0] as usize,
            sizes[1] as usize,
            sizes[2] as usize,
            sizes[3] as usize,
        ];
        let (line_no, seed_values) = next_line(&mut lines, "seed")?;
        if seed_values.len() != 1 || seed_values[0] < 0.0 || seed_values[0].fract() != 0.0 {
            return Err(parse_err(line_no, "seed line needs one integer".into()));
        }
        let seed = seed_values[0] as u64;

        let expect_vector = |lines: &mut std::iter::Enumerate<std::str::Lines>,
                             tag: &str,
                             len: usize|
         -> Result<Array1<f64>> {
            let (line_no, values) = next_line(lines, tag)?;
            if values.len() != len {
                return Err(parse_err(
                    line_no,
                    format!("{tag} has {} values, expected {len}", values.len()),
                ));
            }
            Ok(Array1::from_vec(values))
        };
        let expect_matrix = |lines: &mut std::iter::Enumerate<std::str::Lines>,
                             tag: &str,
                             rows: usize,
                             cols: usize|
         -> Result<Array2<f64>> {
            let mut flat = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (line_no, values) = next_line(lines, tag)?;
                if values.len() != cols {
                    return Err(parse_err(
                        line_no,
                        format!("{tag} row has {} values, expected {cols}", values.len()),
                    ));
                }
                flat.extend(values);
            }
            Ok(Array2::from_shape_vec((rows, cols), flat).expect("shape matches length"))
        };

        let [d, h1, h2, out] = layer_sizes;
        let mu = expect_vector(&mut lines, "mu", d)?;
        let sigma = expect_vector(&mut lines, "sigma", d)?;
        let w1 = expect_matrix(&mut lines, "w1", h1, d)?;
        let w2 = expect_matrix(&mut lines, "w2", h2, h1)?;
        let w3 = expect_matrix(&mut lines, "w3", out, h2)?;
        let b1 = expect_vector(&mut lines, "b1", h1)?;
        let b2 = expect_vector(&mut lines, "b2", h2)?;
        let b3 = expect_vector(&mut lines, "b3", out)?;

        Ok(FnnModel {
            layer_sizes,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            mu,
            sigma,
            seed,
        })
    }
}

// --- validation split ---------------------------------------------------------

/// Height bin of an encoded label value: index of the nearest rung of
/// `{0.2, 0.4, 0.6, 0.8, 1.0}`, ties toward the lower rung; exact zeros
/// fall into bin 5 (no defect).
pub fn height_bin(encoded: f64) -> usize {
    if encoded == 0.0 {
        return 5;
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, rung) in [0.2, 0.4, 0.6, 0.8, 1.0].into_iter().enumerate() {
        let dist = (encoded - rung).abs();
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    best
}

fn stratum(label: ArrayView1<f64>) -> (usize, usize) {
    let mut pos = 4;
    let mut max = 0.0;
    for (i, &v) in label.iter().enumerate() {
        if v > max {
            max = v;
            pos = i;
        }
    }
    if pos == 4 {
        (5, 4)
    } else {
        (height_bin(max), pos)
    }
}

/// Splits column indices into train and validation sets, stratified by
/// (height bin, defect position) so every class keeps the requested
/// hold-out share. Each stratum is shuffled by its own seeded stream and
/// contributes `floor(fraction * size)` validation columns; both lists
/// come back sorted. Deterministic in (labels, fraction, seed).
pub fn stratified_split(
    labels: ArrayView2<f64>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction.is_finite() && (0.0..1.0).contains(&fraction)) {
        return Err(Error::Config(
            "validation fraction must lie in [0, 1)".into(),
        ));
    }
    if labels.nrows() != OUTPUTS {
        return Err(Error::Shape(format!(
            "label matrix has {} rows, expected {OUTPUTS}",
            labels.nrows()
        )));
    }
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
        std::collections::BTreeMap::new();
    for c in 0..labels.ncols() {
        groups
            .entry(stratum(labels.column(c)))
            .or_default()
            .push(c);
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    for ((bin, pos), mut indices) in groups {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((bin * 8 + pos) as u64);
        for i in (1..indices.len()).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
        let hold_out = (fraction * indices.len() as f64).floor() as usize;
        val.extend_from_slice(&indices[..hold_out]);
        train.extend_from_slice(&indices[hold_out..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    if train.is_empty() {
        return Err(Error::Shape("validation split leaves no training columns".into()));
    }
    Ok((train, val))
}

// --- training -------------------------------------------------------------------

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient norm fell below the tolerance.
    GradientTolerance,
    /// Loss fell below the tolerance.
    MseTolerance,
    /// Iteration budget exhausted.
    MaxIterations,
    /// Step scale collapsed; no further progress is possible.
    Stalled,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::GradientTolerance => "gradient-tolerance",
            StopReason::MseTolerance => "mse-tolerance",
            StopReason::MaxIterations => "max-iterations",
            StopReason::Stalled => "stalled",
        })
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Training loss at the final parameters.
    pub final_mse: f64,
    /// Optimizer passes executed.
    pub iterations: usize,
    /// Loss after initialization and after every accepted step;
    /// non-increasing.
    pub mse_trajectory: Vec<f64>,
    /// Columns trained on, ascending.
    pub train_indices: Vec<usize>,
    /// Columns held out, ascending.
    pub val_indices: Vec<usize>,
    /// Seed the run used.
    pub seed: u64,
    /// What ended the run.
    pub stop_reason: StopReason,
}

/// Trains a fresh network on a dataset.
///
/// Splits off the validation columns, z-scores the training split,
/// initializes from the seed, and runs scaled conjugate gradients until
/// a tolerance or the iteration budget stops it.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(FnnModel, TrainReport)> {
    dataset.validate()?;
    config.validate()?;
    if dataset.n_columns() < MIN_TRAIN_COLUMNS {
        return Err(Error::Shape(format!(
            "dataset has {} columns, training needs at least {MIN_TRAIN_COLUMNS}",
            dataset.n_columns()
        )));
    }

    let (train_indices, val_indices) =
        stratified_split(dataset.labels.view(), config.validation_fraction, config.seed)?;
    let x = dataset.features.select(Axis(1), &train_indices);
    let y = dataset.labels.select(Axis(1), &train_indices);
    let d = x.nrows();
    let n = x.ncols();

    // Normalization statistics over the training split, reduced with the
    // same column-block tree as the loss.
    let sums = reduce_columns(0, n, &|lo, hi| {
        let mut acc = vec![0.0; d];
        for c in lo..hi {
            for r in 0..d {
                acc[r] += x[[r, c]];
            }
        }
        acc
    });
    let mu: Array1<f64> = Array1::from_iter(sums.into_iter().map(|s| s / n as f64));
    let sq = reduce_columns(0, n, &|lo, hi| {
        let mut acc = vec![0.0; d];
        for c in lo..hi {
            for r in 0..d {
                let dev = x[[r, c]] - mu[r];
                acc[r] += dev * dev;
            }
        }
        acc
    });
    let sigma: Array1<f64> = Array1::from_iter(
        sq.into_iter()
            .map(|s| (s / n as f64).sqrt())
            .map(|s| if s == 0.0 { 1.0 } else { s }),
    );

    let mut model = FnnModel::new_random(d, config.seed)?;
    model.mu = mu;
    model.sigma = sigma;

    let report = scg_minimize(&mut model, x.view(), y.view(), config, train_indices, val_indices)?;
    Ok((model, report))
}

/// Moller's scaled conjugate gradient loop on the model parameters.
fn scg_minimize(
    model: &mut FnnModel,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    config: &TrainConfig,
    train_indices: Vec<usize>,
    val_indices: Vec<usize>,
) -> Result<TrainReport> {
    let scg = &config.scg;
    let restart_period = model.param_count();
    let diverged = || Error::Model("training diverged to non-finite values".into());

    let mut w = model.params_flat();
    let mut energy = model.loss(x, y)?;
    let mut grad = model.gradient(x, y)?;
    if !energy.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(diverged());
    }
    let mut r: Array1<f64> = -&grad;
    let mut p = r.clone();
    let mut trajectory = vec![energy];

    let finish = |model: &mut FnnModel,
                  w: &Array1<f64>,
                  energy: f64,
                  iterations: usize,
                  trajectory: Vec<f64>,
                  stop_reason: StopReason|
     -> Result<TrainReport> {
        model.set_params_flat(w.view())?;
        Ok(TrainReport {
            final_mse: energy,
            iterations,
            mse_trajectory: trajectory,
            train_indices,
            val_indices,
            seed: config.seed,
            stop_reason,
        })
    };

    let grad_norm = grad.dot(&grad).sqrt();
    if grad_norm <= config.gradient_tolerance {
        return finish(model, &w, energy, 0, trajectory, StopReason::GradientTolerance);
    }
    if config.mse_tolerance > 0.0 && energy <= config.mse_tolerance {
        return finish(model, &w, energy, 0, trajectory, StopReason::MseTolerance);
    }

    let mut lambda = scg.lambda_init;
    let mut lambda_bar = 0.0;
    let mut success = true;
    let mut delta = 0.0;

    for k in 1..=config.max_iterations {
        let p_norm2 = p.dot(&p);
        if p_norm2 == 0.0 {
            return finish(model, &w, energy, k, trajectory, StopReason::GradientTolerance);
        }

        // Descent can be lost after a conjugate update; fall back to
        // steepest descent and probe the new direction next pass.
        if p.dot(&r) <= 0.0 {
            p = r.clone();
            success = true;
            lambda_bar = 0.0;
            continue;
        }

        if success {
            // Curvature along p from a finite-difference probe.
            let sigma_k = scg.sigma / p_norm2.sqrt();
            let w_probe = &w + &p.mapv(|v| v * sigma_k);
            model.set_params_flat(w_probe.view())?;
            let grad_probe = model.gradient(x, y)?;
            if grad_probe.iter().any(|v| !v.is_finite()) {
                return Err(diverged());
            }
            let s = (&grad_probe - &grad).mapv(|v| v / sigma_k);
            delta = p.dot(&s);
        }

        delta += (lambda - lambda_bar) * p_norm2;
        if delta <= 0.0 {
            // Make the Hessian estimate positive definite.
            lambda_bar = 2.0 * (lambda - delta / p_norm2);
            delta = -delta + lambda * p_norm2;
            lambda = lambda_bar;
        }

        let mu = p.dot(&r);
        let alpha = mu / delta;
        let w_try = &w + &p.mapv(|v| v * alpha);
        model.set_params_flat(w_try.view())?;
        let energy_try = model.loss(x, y)?;

        // Comparison parameter: actual against predicted reduction.
        let comparison = if energy_try.is_finite() {
            2.0 * delta * (energy - energy_try) / (mu * mu)
        } else {
            -1.0
        };

        if comparison >= 0.0 {
            w = w_try;
            energy = energy_try;
            let grad_new = model.gradient(x, y)?;
            if grad_new.iter().any(|v| !v.is_finite()) {
                return Err(diverged());
            }
            let r_new: Array1<f64> = -&grad_new;
            lambda_bar = 0.0;
            success = true;
            if k % restart_period == 0 {
                p = r_new.clone();
            } else {
                let beta = (r_new.dot(&r_new) - r_new.dot(&r)) / mu;
                p = &r_new + &p.mapv(|v| v * beta);
            }
            r = r_new;
            grad = grad_new;
            if comparison >= 0.75 {
                lambda *= 0.25;
            }
            trajectory.push(energy);

            let grad_norm = grad.dot(&grad).sqrt();
            if grad_norm <= config.gradient_tolerance {
                return finish(model, &w, energy, k, trajectory, StopReason::GradientTolerance);
            }
            if config.mse_tolerance > 0.0 && energy <= config.mse_tolerance {
                return finish(model, &w, energy, k, trajectory, StopReason::MseTolerance);
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }

        if comparison < 0.25 {
            lambda += delta * (1.0 - comparison) / p_norm2;
        }
        if !lambda.is_finite() || lambda > 1e20 {
            return finish(model, &w, energy, k, trajectory, StopReason::Stalled);
        }
    }

    let iterations = config.max_iterations;
    finish(model, &w, energy, iterations, trajectory, StopReason::MaxIterations)
}
