//! Dataset assembly and interpolation-based augmentation.
//!
//! A simulation run yields 125 feature vectors per defect position: five
//! flat heights, 25 revolutions each. Heights a factor of ten apart leave
//! wide gaps on the encoded scale, so the set is densified by linear
//! interpolation between adjacent heights: for each of the four height
//! gaps, every vector of the lower height (set A) is paired with every
//! vector of the upper height (set B), and each of the 625 pairs is mixed
//! at six points `alpha in {0, 0.2, 0.4, 0.6, 0.8, 1.0}`. Features and
//! labels mix with the same weights, so an interpolated column carries
//! the encoded height `(1 - alpha) y_A + alpha y_B` at the defect wheel.
//!
//! Across four positions this expands 500 original columns to
//! `4 gaps * 6 alphas * 625 pairs * 4 positions = 60000`. The endpoint
//! mixes (`alpha` 0 or 1) reproduce original columns bit-exactly and are
//! marked as such.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{encode_height, feature_width, level_for_width, FeatureVector};
use crate::flatgen::{height_ladder, WheelPosition};

/// Interpolation weights applied per pair, ascending.
pub const INTERPOLATION_POINTS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Columns of one original simulation run: 5 heights x 4 positions x 25
/// revolutions.
pub const ORIGINAL_COLUMNS: usize = 500;

/// Columns after augmentation: 4 gaps x 6 alphas x 625 pairs x 4 positions.
pub const AUGMENTED_COLUMNS: usize = 60_000;

// --- configuration -----------------------------------------------------------

/// Augmentation switch; disabling it trains on original columns only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Apply interpolation augmentation before training.
    pub enabled: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { enabled: true }
    }
}

// --- dataset -------------------------------------------------------------------

/// Where a dataset column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Extracted directly from a synthesized record.
    Original,
    /// Produced by interpolation between two original columns.
    Augmented,
}

impl Provenance {
    /// Lower-case tag used in CSV files.
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Augmented => "augmented",
        }
    }

    /// Parses the CSV tag.
    pub fn parse(s: &str) -> Option<Provenance> {
        match s {
            "original" => Some(Provenance::Original),
            "augmented" => Some(Provenance::Augmented),
            _ => None,
        }
    }
}

/// A column-major feature dataset: one column per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Feature matrix, `D x N`.
    pub features: Array2<f64>,
    /// Target matrix, `4 x N`, one wheel per row.
    pub labels: Array2<f64>,
    /// Decomposition level of the features.
    pub level: usize,
    /// Per-column origin, length `N`.
    pub provenance: Vec<Provenance>,
}

impl Dataset {
    /// Number of examples.
    pub fn n_columns(&self) -> usize {
        self.features.ncols()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Collects extracted feature vectors into a dataset, one column per
    /// vector in order. All vectors must share one level.
    pub fn from_feature_vectors(rows: &[FeatureVector]) -> Result<Dataset> {
        let Some(first) = rows.first() else {
            return Err(Error::Shape("no feature vectors to collect".into()));
        };
        if rows.iter().any(|r| r.level != first.level) {
            return Err(Error::Shape("feature vectors mix levels".into()));
        }
        let d = feature_width(first.level);
        let n = rows.len();
        let mut features = Array2::zeros((d, n));
        let mut labels = Array2::zeros((4, n));
        for (c, row) in rows.iter().enumerate() {
            if row.values.len() != d {
                return Err(Error::Shape(format!(
                    "feature vector {c} has width {}, expected {d}",
                    row.values.len()
                )));
            }
            for (r, &v) in row.values.iter().enumerate() {
                features[[r, c]] = v;
            }
            for (r, &v) in row.label.iter().enumerate() {
                labels[[r, c]] = v;
            }
        }
        Ok(Dataset {
            features,
            labels,
            level: first.level,
            provenance: vec![Provenance::Original; n],
        })
    }

    /// Consistency check on the matrix shapes.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_columns();
        if self.labels.ncols() != n || self.provenance.len() != n {
            return Err(Error::Shape(format!(
                "dataset columns disagree: {} features, {} labels, {} provenance",
                n,
                self.labels.ncols(),
                self.provenance.len()
            )));
        }
        if self.labels.nrows() != 4 {
            return Err(Error::Shape(format!(
                "label matrix has {} rows, expected 4",
                self.labels.nrows()
            )));
        }
        if self.dim() != feature_width(self.level) {
            return Err(Error::Shape(format!(
                "feature dimension {} does not match level {}",
                self.dim(),
                self.level
            )));
        }
        Ok(())
    }
}

// --- interpolation ---------------------------------------------------------------

/// Mixes every column of `a` with every column of `b` at one weight:
/// output column `i * b.ncols() + j` is `(1 - alpha) a[:, i] + alpha b[:, j]`,
/// and the label mixes with the same weights.
pub fn augment_gap(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    label_a: [f64; 4],
    label_b: [f64; 4],
    alpha: f64,
) -> Result<(Array2<f64>, [f64; 4])> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "interpolation sets disagree in dimension: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "interpolation weight {alpha} lies outside [0, 1]"
        )));
    }
    let d = a.nrows();
    let n_out = a.ncols() * b.ncols();
    let mut out = Array2::zeros((d, n_out));
    for i in 0..a.ncols() {
        for j in 0..b.ncols() {
            let col = i * b.ncols() + j;
            for r in 0..d {
                out[[r, col]] = (1.0 - alpha) * a[[r, i]] + alpha * b[[r, j]];
            }
        }
    }
    let mut label = [0.0; 4];
    for (k, slot) in label.iter_mut().enumerate() {
        *slot = (1.0 - alpha) * label_a[k] + alpha * label_b[k];
    }
    Ok((out, label))
}

/// Expected label of an original column: the ladder height `h_idx`
/// encoded at position `pos`.
fn expected_label(h_idx: usize, pos: usize) -> Result<[f64; 4]> {
    let mut label = [0.0; 4];
    label[pos] = encode_height(height_ladder()[h_idx])?;
    Ok(label)
}

/// Expands a 500-column original dataset to the full 60000-column
/// augmented dataset.
///
/// The input must hold the columns of one simulation run in order
/// `(h_idx * 4 + pos) * 25 + rev`, verified against the labels. Output
/// columns are ordered `((gap * 6 + alpha_idx) * 625 + pair) * 4 + pos`
/// with `pair = i * 25 + j` over (lower, upper) revolution indices, so
/// the four positions of one mix sit adjacently.
pub fn augment_all(original: &Dataset) -> Result<Dataset> {
    original.validate()?;
    if original.n_columns() != ORIGINAL_COLUMNS {
        return Err(Error::Shape(format!(
            "augmentation expects {ORIGINAL_COLUMNS} original columns, found {}",
            original.n_columns()
        )));
    }

    let revs = ORIGINAL_COLUMNS / 20;
    let block = |h_idx: usize, pos: usize| {
        let start = (h_idx * 4 + pos) * revs;
        original
            .features
            .slice(ndarray::s![.., start..start + revs])
    };
    for h_idx in 0..5 {
        for pos in 0..4 {
            let expected = expected_label(h_idx, pos)?;
            for rev in 0..revs {
                let col = (h_idx * 4 + pos) * revs + rev;
                for k in 0..4 {
                    if (original.labels[[k, col]] - expected[k]).abs() > 1e-9 {
                        return Err(Error::Shape(format!(
                            "column {col} does not carry the expected label for \
                             height index {h_idx} at {}",
                            WheelPosition::ALL[pos].label()
                        )));
                    }
                }
            }
        }
    }

    let d = original.dim();
    let pairs = revs * revs;
    let mut features = Array2::zeros((d, AUGMENTED_COLUMNS));
    let mut labels = Array2::zeros((4, AUGMENTED_COLUMNS));
    let mut provenance = vec![Provenance::Augmented; AUGMENTED_COLUMNS];

    for gap in 0..4 {
        for (alpha_idx, &alpha) in INTERPOLATION_POINTS.iter().enumerate() {
            let endpoint = alpha == 0.0 || alpha == 1.0;
            for pos in 0..4 {
                let lower = block(gap, pos);
                let upper = block(gap + 1, pos);
                let (mixed, label) = augment_gap(
                    lower,
                    upper,
                    expected_label(gap, pos)?,
                    expected_label(gap + 1, pos)?,
                    alpha,
                )?;
                for pair in 0..pairs {
                    let col = ((gap * 6 + alpha_idx) * pairs + pair) * 4 + pos;
                    for r in 0..d {
                        features[[r, col]] = mixed[[r, pair]];
                    }
                    for k in 0..4 {
                        labels[[k, col]] = label[k];
                    }
                    if endpoint {
                        provenance[col] = Provenance::Original;
                    }
                }
            }
        }
    }

    Ok(Dataset {
        features,
        labels,
        level: original.level,
        provenance,
    })
}

// --- CSV -------------------------------------------------------------------------

/// Writes a dataset as CSV, one row per column: features, the four label
/// slots, and optionally a provenance tag.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path, with_provenance: bool) -> Result<()> {
    dataset.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let d = dataset.dim();
    let mut emit = || -> std::io::Result<()> {
        let mut header: Vec<String> = (0..d).map(|i| format!("s{i}")).collect();
        header.extend(WheelPosition::ALL.iter().map(|p| p.label().to_string()));
        if with_provenance {
            header.push("provenance".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for c in 0..dataset.n_columns() {
            let mut fields: Vec<String> = (0..d).map(|r| dataset.features[[r, c]].to_string()).collect();
            fields.extend((0..4).map(|k| dataset.labels[[k, c]].to_string()));
            if with_provenance {
                fields.push(dataset.provenance[c].tag().into());
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

/// Reads a dataset CSV. Files without a provenance column are treated as
/// original measurements.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, msg: String| Error::Parse {
        file: path.display().to_string(),
        line,
        msg,
    };

    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let columns: Vec<&str> = header.split(',').collect();
    let with_provenance = columns.last() == Some(&"provenance");
    let value_cols = columns.len() - usize::from(with_provenance);
    if value_cols < 5 {
        return Err(parse_err(1, format!("only {value_cols} value columns")));
    }
    let d = value_cols - 4;
    let level = level_for_width(d)
        .ok_or_else(|| parse_err(1, format!("{d} feature columns fit no level")))?;
    for (i, name) in columns.iter().take(d).enumerate() {
        if *name != format!("s{i}") {
            return Err(parse_err(1, format!("unexpected column {name:?}")));
        }
    }
    for (name, pos) in columns[d..d + 4].iter().zip(WheelPosition::ALL) {
        if *name != pos.label() {
            return Err(parse_err(1, format!("unexpected label column {name:?}")));
        }
    }

    let mut feature_rows: Vec<f64> = Vec::new();
    let mut label_rows: Vec<f64> = Vec::new();
    let mut provenance = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                idx + 1,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        for field in &fields[..d] {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad number {field:?}")))?;
            feature_rows.push(v);
        }
        for field in &fields[d..d + 4] {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad number {field:?}")))?;
            label_rows.push(v);
        }
        provenance.push(if with_provenance {
            Provenance::parse(fields[columns.len() - 1]).ok_or_else(|| {
                parse_err(
                    idx + 1,
                    format!("bad provenance tag {:?}", fields[columns.len() - 1]),
                )
            })?
        } else {
            Provenance::Original
        });
        n += 1;
    }
    if n == 0 {
        return Err(parse_err(1, "no data rows".into()));
    }

    // Rows in the file are examples; transpose into column-major matrices.
    let features = Array2::from_shape_vec((n, d), feature_rows)
        .expect("row count verified above")
        .reversed_axes()
        .to_owned();
    let labels = Array2::from_shape_vec((n, 4), label_rows)
        .expect("row count verified above")
        .reversed_axes()
        .to_owned();
    let dataset = Dataset {
        features,
        labels,
        level,
        provenance,
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Deterministic synthetic original dataset at level 0 (D = 4):
    /// distinct values per (height, position, revolution, row).
    fn synthetic_original() -> Dataset {
        let mut rows = Vec::with_capacity(ORIGINAL_COLUMNS);
        for h_idx in 0..5 {
            for pos in 0..4 {
                for rev in 0..25 {
                    let values: Vec<f64> = (0..4)
                        .map(|r| {
                            1000.0 * (h_idx + 1) as f64
                                + 100.0 * pos as f64
                                + rev as f64
                                + 0.001 * r as f64
                        })
                        .collect();
                    let mut label = [0.0; 4];
                    label[pos] = encode_height(height_ladder()[h_idx]).unwrap();
                    rows.push(FeatureVector {
                        values,
                        level: 0,
                        label,
                    });
                }
            }
        }
        Dataset::from_feature_vectors(&rows).unwrap()
    }

    #[test]
    fn interpolation_points_are_six_fifths() {
        assert_eq!(INTERPOLATION_POINTS.len(), 6);
        for (i, &alpha) in INTERPOLATION_POINTS.iter().enumerate() {
            assert_relative_eq!(alpha, i as f64 / 5.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn gap_mixing_is_convex_and_complete() {
        let original = synthetic_original();
        let a = original.features.slice(ndarray::s![.., 0..25]);
        let b = original.features.slice(ndarray::s![.., 100..125]);
        let la = [0.2, 0.0, 0.0, 0.0];
        let lb = [0.4, 0.0, 0.0, 0.0];
        let (mixed, label) = augment_gap(a, b, la, lb, 0.4).unwrap();

        assert_eq!(mixed.dim(), (4, 625));
        assert_relative_eq!(label[0], 0.28, max_relative = 1e-12);

        for i in 0..25 {
            for j in 0..25 {
                let col = i * 25 + j;
                for r in 0..4 {
                    let (u, v) = (a[[r, i]], b[[r, j]]);
                    let out = mixed[[r, col]];
                    assert!(out >= u.min(v) - 1e-12 && out <= u.max(v) + 1e-12);
                    assert_relative_eq!(out, 0.6 * u + 0.4 * v, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gap_mixing_rejects_bad_inputs() {
        let original = synthetic_original();
        let a = original.features.slice(ndarray::s![.., 0..25]);
        let b = original.features.slice(ndarray::s![0..2, 100..125]);
        assert!(augment_gap(a, b, [0.0; 4], [0.0; 4], 0.5).is_err());
        assert!(augment_gap(a, a, [0.0; 4], [0.0; 4], 1.5).is_err());
    }

    #[test]
    fn full_augmentation_has_the_documented_shape() {
        let augmented = augment_all(&synthetic_original()).unwrap();
        augmented.validate().unwrap();
        assert_eq!(augmented.n_columns(), AUGMENTED_COLUMNS);
        assert_eq!(augmented.dim(), 4);
        assert_eq!(augmented.level, 0);

        let originals = augmented
            .provenance
            .iter()
            .filter(|p| **p == Provenance::Original)
            .count();
        assert_eq!(originals, 20_000);
    }

    #[test]
    fn endpoint_mixes_reproduce_original_columns_bit_exactly() {
        let original = synthetic_original();
        let augmented = augment_all(&original).unwrap();
        for gap in 0..4 {
            for pos in 0..4 {
                for i in 0..25 {
                    for j in [0usize, 13, 24] {
                        // alpha = 0: the lower-height column i, any j.
                        let col = ((gap * 6) * 625 + (i * 25 + j)) * 4 + pos;
                        let src = (gap * 4 + pos) * 25 + i;
                        for r in 0..4 {
                            assert_eq!(
                                augmented.features[[r, col]],
                                original.features[[r, src]]
                            );
                        }
                        assert_eq!(augmented.provenance[col], Provenance::Original);

                        // alpha = 1: the upper-height column j, any i.
                        let col = ((gap * 6 + 5) * 625 + (i * 25 + j)) * 4 + pos;
                        let src = ((gap + 1) * 4 + pos) * 25 + j;
                        for r in 0..4 {
                            assert_eq!(
                                augmented.features[[r, col]],
                                original.features[[r, src]]
                            );
                        }
                        assert_eq!(augmented.provenance[col], Provenance::Original);
                    }
                }
            }
        }
    }

    #[test]
    fn interior_mixes_hit_the_fractional_height_labels() {
        // The interpolated encoded heights between ladder rungs: exponent
        // -3.4 mm sits at gap 0 alpha 0.6, -2.6 at gap 1 alpha 0.4,
        // -1.4 at gap 2 alpha 0.6, -0.6 at gap 3 alpha 0.4.
        let augmented = augment_all(&synthetic_original()).unwrap();
        let cases = [
            (0usize, 3usize, 0.32),
            (1, 2, 0.48),
            (2, 3, 0.72),
            (3, 2, 0.88),
        ];
        for (gap, alpha_idx, expected) in cases {
            for pos in 0..4 {
                let col = ((gap * 6 + alpha_idx) * 625 + 7 * 25 + 3) * 4 + pos;
                assert_relative_eq!(
                    augmented.labels[[pos, col]],
                    expected,
                    max_relative = 1e-12
                );
                for k in 0..4 {
                    if k != pos {
                        assert_eq!(augmented.labels[[k, col]], 0.0);
                    }
                }
                assert_eq!(augmented.provenance[col], Provenance::Augmented);
            }
        }
    }

    #[test]
    fn augmented_features_stay_non_negative() {
        let augmented = augment_all(&synthetic_original()).unwrap();
        assert!(augmented.features.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn augmentation_rejects_malformed_originals() {
        let mut truncated = synthetic_original();
        truncated.features = truncated
            .features
            .slice(ndarray::s![.., 0..100])
            .to_owned();
        truncated.labels = truncated.labels.slice(ndarray::s![.., 0..100]).to_owned();
        truncated.provenance.truncate(100);
        assert!(augment_all(&truncated).is_err());

        // Swapping two height blocks breaks the label layout.
        let mut shuffled = synthetic_original();
        for c in 0..25 {
            for r in 0..4 {
                let tmp = shuffled.labels[[r, c]];
                shuffled.labels[[r, c]] = shuffled.labels[[r, 100 + c]];
                shuffled.labels[[r, 100 + c]] = tmp;
            }
        }
        assert!(augment_all(&shuffled).is_err());
    }

    #[test]
    fn dataset_csv_round_trips_bit_exactly() {
        let original = synthetic_original();
        let dir = tempfile::tempdir().unwrap();

        let tagged = dir.path().join("tagged.csv");
        write_dataset_csv(&original, &tagged, true).unwrap();
        let text = std::fs::read_to_string(&tagged).unwrap();
        assert!(text.lines().next().unwrap().ends_with("FL,FR,RL,RR,provenance"));
        assert_eq!(read_dataset_csv(&tagged).unwrap(), original);

        let untagged = dir.path().join("untagged.csv");
        write_dataset_csv(&original, &untagged, false).unwrap();
        let back = read_dataset_csv(&untagged).unwrap();
        assert_eq!(back.features, original.features);
        assert!(back.provenance.iter().all(|p| *p == Provenance::Original));
    }

    #[test]
    fn dataset_csv_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "s0,s1,s2,s3,FL,FR,RL,RR\n1,2,3,4,0,0,0\n").unwrap();
        assert!(read_dataset_csv(&bad).is_err());

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "s0,s1,s2,s3,FL,FR,RL,RR\n").unwrap();
        assert!(read_dataset_csv(&empty).is_err());

        let bad_tag = dir.path().join("bad_tag.csv");
        std::fs::write(
            &bad_tag,
            "s0,s1,s2,s3,FL,FR,RL,RR,provenance\n1,2,3,4,0,0,0,0,mixed\n",
        )
        .unwrap();
        assert!(read_dataset_csv(&bad_tag).is_err());
    }
}
