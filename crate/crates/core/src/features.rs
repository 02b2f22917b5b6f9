//! Revolution-synchronous RMS feature extraction.
//!
//! Each acceleration channel is cut into segments of one wheel revolution
//! (`T = 2 π r_w / v`, about 377 samples at the reference speed and rate;
//! a fixed override of 378 keeps every segment the same length across
//! runs). Twenty-five revolutions per channel are kept, for 100 segments
//! per record.
//!
//! A segment is reduced to features in three steps: the analytic envelope
//! strips the ringing carrier, a wavelet packet tree splits the envelope
//! into `2^j` frequency subspaces, and each subspace collapses to its RMS.
//! Concatenating the four channels (FL, FR, RL, RR) yields a feature
//! vector of width `4 * 2^j`, so one record at one level becomes a block
//! of 25 vectors.
//!
//! The regression target is a four-element vector, one slot per wheel:
//! zero everywhere except the defect wheel, which carries the height
//! encoded as `y = (log10(h_mm) + 5) / 5`. The simulated height ladder
//! {1e-4 .. 1e-0 mm} maps to {0.2, 0.4, 0.6, 0.8, 1.0}, and 0 means no
//! defect.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatgen::{AbaRecord, SimConfig, WheelFlat, WheelPosition};
use crate::hilbert::analytic_amplitude;
use crate::wpd::{decompose, QmfPair, MAX_LEVEL};

/// Segments kept per channel; one record must cover at least this many
/// full revolutions.
pub const SEGMENTS_PER_CHANNEL: usize = 25;

// --- configuration -----------------------------------------------------------

/// Feature extraction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Wavelet packet decomposition level `j`; features are `4 * 2^j` wide.
    pub level: usize,
    /// Fixed segment length in samples. `None` derives the length from the
    /// revolution period; the default pins 378 so feature shapes do not
    /// drift with rounding of `T`.
    pub segment_len_override: Option<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            level: 6,
            segment_len_override: Some(378),
        }
    }
}

impl FeatureConfig {
    /// Validates the level and any override length.
    pub fn validate(&self) -> Result<()> {
        if self.level > MAX_LEVEL {
            return Err(Error::Config(format!(
                "feature level {} exceeds the maximum {MAX_LEVEL}",
                self.level
            )));
        }
        if let Some(len) = self.segment_len_override {
            if len < 2 {
                return Err(Error::Config(format!(
                    "segment_len_override {len} is too short"
                )));
            }
        }
        Ok(())
    }
}

/// Samples per segment: the override if set, otherwise the revolution
/// period rounded up to whole samples.
pub fn segment_len(sim: &SimConfig, features: &FeatureConfig) -> usize {
    features
        .segment_len_override
        .unwrap_or_else(|| (sim.revolution_period_s() * sim.sample_rate_hz).ceil() as usize)
}

/// Feature vector width at a decomposition level: four channels of `2^j`
/// subspace RMS values.
pub fn feature_width(level: usize) -> usize {
    4 * (1 << level)
}

/// Inverse of [`feature_width`]; `None` when the width fits no level.
pub fn level_for_width(width: usize) -> Option<usize> {
    (0..=MAX_LEVEL).find(|&j| feature_width(j) == width)
}

// --- segmentation ------------------------------------------------------------

/// One revolution of one channel, tagged with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSegment {
    /// Acceleration samples, m/s^2.
    pub samples: Vec<f64>,
    /// Channel the samples came from.
    pub channel: WheelPosition,
    /// Revolution index within the record, 0-based.
    pub revolution: usize,
    /// The flat that produced the record.
    pub flat: WheelFlat,
}

/// Cuts a record into 100 segments, channel-major: all FL revolutions,
/// then FR, RL, RR. Errors if the record covers fewer than 25 segments
/// per channel.
pub fn segment(record: &AbaRecord, features: &FeatureConfig) -> Result<Vec<SignalSegment>> {
    features.validate()?;
    let len = segment_len(&record.config, features);
    if len < 2 {
        return Err(Error::Config(format!("segment length {len} is too short")));
    }
    let available = record.len() / len;
    if available < SEGMENTS_PER_CHANNEL {
        return Err(Error::Shape(format!(
            "record holds {available} segments of {len} samples per channel, need {SEGMENTS_PER_CHANNEL}"
        )));
    }
    let mut segments = Vec::with_capacity(4 * SEGMENTS_PER_CHANNEL);
    for channel in WheelPosition::ALL {
        let samples = &record.channels[channel.index()];
        for revolution in 0..SEGMENTS_PER_CHANNEL {
            let start = revolution * len;
            segments.push(SignalSegment {
                samples: samples[start..start + len].to_vec(),
                channel,
                revolution,
                flat: record.flat,
            });
        }
    }
    Ok(segments)
}

// --- per-segment reduction -----------------------------------------------------

/// Root-mean-square of a sample block.
pub fn rms(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Shape("rms of an empty block".into()));
    }
    let mean_square = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
    Ok(mean_square.sqrt())
}

// --- labels --------------------------------------------------------------------

/// Encodes a flat height in metres to the regression scale:
/// `y = (log10(h * 1000) + 5) / 5`, with 0 m mapping to 0 (no defect).
/// Heights outside the simulated ladder span are rejected.
pub fn encode_height(height_m: f64) -> Result<f64> {
    if height_m == 0.0 {
        return Ok(0.0);
    }
    let ladder = crate::flatgen::height_ladder();
    let lo = ladder[0] * (1.0 - 1e-9);
    let hi = ladder[ladder.len() - 1] * (1.0 + 1e-9);
    if !(height_m.is_finite() && height_m >= lo && height_m <= hi) {
        return Err(Error::Domain(format!(
            "height {height_m} m lies outside the encodable span [{:e}, {:e}] m",
            ladder[0],
            ladder[ladder.len() - 1]
        )));
    }
    Ok(((height_m * 1000.0).log10() + 5.0) / 5.0)
}

/// Decodes a regression value back to metres; 0 means no defect.
pub fn decode_height(encoded: f64) -> f64 {
    if encoded == 0.0 {
        return 0.0;
    }
    10f64.powf(5.0 * encoded - 5.0) / 1000.0
}

/// Four-slot target for a flat: the encoded height at the defect wheel,
/// zero elsewhere.
pub fn encode_label(flat: &WheelFlat) -> Result<[f64; 4]> {
    let mut label = [0.0; 4];
    label[flat.location.index()] = encode_height(flat.height_m)?;
    Ok(label)
}

// --- feature vectors -------------------------------------------------------------

/// One labelled feature vector: subspace RMS values for all four channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// `4 * 2^level` RMS values, channel-major (FL block first).
    pub values: Vec<f64>,
    /// Decomposition level the features were taken at.
    pub level: usize,
    /// Regression target, one slot per wheel (FL, FR, RL, RR).
    pub label: [f64; 4],
}

/// Reduces four aligned segments (one per channel, same revolution) to a
/// feature vector at the given level.
pub fn extract(segments: [&SignalSegment; 4], level: usize) -> Result<FeatureVector> {
    if level > MAX_LEVEL {
        return Err(Error::Domain(format!(
            "feature level {level} exceeds the maximum {MAX_LEVEL}"
        )));
    }
    for (i, seg) in segments.iter().enumerate() {
        if seg.channel.index() != i {
            return Err(Error::Shape(format!(
                "segment {i} carries channel {}, expected {}",
                seg.channel.label(),
                WheelPosition::ALL[i].label()
            )));
        }
        if seg.revolution != segments[0].revolution {
            return Err(Error::Shape(format!(
                "segments mix revolutions {} and {}",
                segments[0].revolution, seg.revolution
            )));
        }
        if seg.flat != segments[0].flat {
            return Err(Error::Shape("segments mix source records".into()));
        }
    }

    let filters = QmfPair::daubechies4();
    let mut values = Vec::with_capacity(feature_width(level));
    for seg in segments {
        let envelope = analytic_amplitude(&seg.samples)?;
        let tree = decompose(&envelope, level, &filters)?;
        for leaf in &tree.subspaces {
            values.push(rms(leaf)?);
        }
    }
    Ok(FeatureVector {
        values,
        level,
        label: encode_label(&segments[0].flat)?,
    })
}

/// Extracts the full 25-vector block of one record.
pub fn extract_record(record: &AbaRecord, features: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    let segments = segment(record, features)?;
    let mut rows = Vec::with_capacity(SEGMENTS_PER_CHANNEL);
    for revolution in 0..SEGMENTS_PER_CHANNEL {
        let quad = [
            &segments[revolution],
            &segments[SEGMENTS_PER_CHANNEL + revolution],
            &segments[2 * SEGMENTS_PER_CHANNEL + revolution],
            &segments[3 * SEGMENTS_PER_CHANNEL + revolution],
        ];
        rows.push(extract(quad, features.level)?);
    }
    Ok(rows)
}

// --- CSV ----------------------------------------------------------------------

/// Writes feature vectors as CSV: header `s0..s{D-1},FL,FR,RL,RR`, one
/// row per vector. All vectors must share one level.
pub fn write_features_csv(rows: &[FeatureVector], path: &Path) -> Result<()> {
    let Some(first) = rows.first() else {
        return Err(Error::Shape("no feature vectors to write".into()));
    };
    if rows.iter().any(|r| r.level != first.level) {
        return Err(Error::Shape("feature vectors mix levels".into()));
    }
    let width = feature_width(first.level);

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        let mut header: Vec<String> = (0..width).map(|i| format!("s{i}")).collect();
        header.extend(WheelPosition::ALL.iter().map(|p| p.label().to_string()));
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let mut fields: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
            fields.extend(row.label.iter().map(|v| v.to_string()));
            writeln!(w, "{}", fields.join(","))?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

/// Reads a feature CSV written by [`write_features_csv`]; the level is
/// recovered from the column count.
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
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
    if columns.len() < 5 {
        return Err(parse_err(1, format!("only {} columns", columns.len())));
    }
    let width = columns.len() - 4;
    let level = level_for_width(width)
        .ok_or_else(|| parse_err(1, format!("{width} feature columns fit no level")))?;
    for (i, name) in columns.iter().take(width).enumerate() {
        if *name != format!("s{i}") {
            return Err(parse_err(1, format!("unexpected column {name:?}")));
        }
    }
    for (name, pos) in columns[width..].iter().zip(WheelPosition::ALL) {
        if *name != pos.label() {
            return Err(parse_err(1, format!("unexpected label column {name:?}")));
        }
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width + 4 {
            return Err(parse_err(
                idx + 1,
                format!("expected {} fields, found {}", width + 4, fields.len()),
            ));
        }
        let mut parsed = Vec::with_capacity(fields.len());
        for field in &fields {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad number {field:?}")))?;
            parsed.push(v);
        }
        let mut label = [0.0; 4];
        label.copy_from_slice(&parsed[width..]);
        parsed.truncate(width);
        rows.push(FeatureVector {
            values: parsed,
            level,
            label,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatgen::{height_ladder, synthesize};
    use approx::assert_relative_eq;

    fn reference_record(height_m: f64, location: WheelPosition) -> AbaRecord {
        let config = SimConfig::default();
        let flat = WheelFlat::new(height_m, config.wheel_radius_m, location).unwrap();
        synthesize(&flat, &config).unwrap()
    }

    // -- segment length --

    #[test]
    fn segment_length_follows_the_revolution_period() {
        let sim = SimConfig::default();
        let rotation_hz = 1.0 / sim.revolution_period_s();
        assert_relative_eq!(rotation_hz, 5.3053, max_relative = 1e-4);

        let derived = FeatureConfig {
            segment_len_override: None,
            ..FeatureConfig::default()
        };
        assert_eq!(segment_len(&sim, &derived), 377);
        assert_eq!(segment_len(&sim, &FeatureConfig::default()), 378);

        let double_speed = SimConfig {
            speed_m_per_s: 2.0 * sim.speed_m_per_s,
            ..sim
        };
        assert_eq!(segment_len(&double_speed, &derived), 189);
    }

    #[test]
    fn default_record_covers_25_segments_with_margin() {
        let sim = SimConfig::default();
        let len = segment_len(&sim, &FeatureConfig::default());
        assert!(sim.samples_per_record() / len >= SEGMENTS_PER_CHANNEL);
    }

    // -- segmentation --

    #[test]
    fn segmentation_is_channel_major_and_complete() {
        let record = reference_record(1e-4, WheelPosition::FrontRight);
        let segments = segment(&record, &FeatureConfig::default()).unwrap();
        assert_eq!(segments.len(), 100);
        for (i, seg) in segments.iter().enumerate() {
            assert_eq!(seg.channel.index(), i / SEGMENTS_PER_CHANNEL);
            assert_eq!(seg.revolution, i % SEGMENTS_PER_CHANNEL);
            assert_eq!(seg.samples.len(), 378);
            assert_eq!(seg.flat, record.flat);
        }
        // Segment samples are verbatim slices of the source channel.
        let seg = &segments[SEGMENTS_PER_CHANNEL + 3];
        assert_eq!(seg.samples[..], record.channels[1][3 * 378..4 * 378]);
    }

    #[test]
    fn short_records_are_rejected() {
        let config = SimConfig {
            duration_s: 1.0,
            ..SimConfig::default()
        };
        let flat = WheelFlat::new(1e-4, config.wheel_radius_m, WheelPosition::FrontLeft).unwrap();
        let record = synthesize(&flat, &config).unwrap();
        let err = segment(&record, &FeatureConfig::default()).unwrap_err();
        assert!(err.to_string().contains("segments"));
    }

    // -- rms --

    #[test]
    fn rms_matches_hand_values() {
        assert_relative_eq!(
            rms(&[3.0, 4.0]).unwrap(),
            3.5355339059327378,
            max_relative = 1e-15
        );
        assert_eq!(rms(&[0.0; 17]).unwrap(), 0.0);
        assert_relative_eq!(rms(&[-2.0; 9]).unwrap(), 2.0, max_relative = 1e-15);
        assert!(rms(&[]).is_err());
    }

    // -- labels --

    #[test]
    fn height_encoding_spans_the_ladder() {
        let expected = [0.2, 0.4, 0.6, 0.8, 1.0];
        for (h, y) in height_ladder().into_iter().zip(expected) {
            assert_relative_eq!(encode_height(h).unwrap(), y, max_relative = 1e-12);
        }
        assert_eq!(encode_height(0.0).unwrap(), 0.0);
        assert!(encode_height(2e-3).is_err());
        assert!(encode_height(5e-8).is_err());
        assert!(encode_height(f64::NAN).is_err());
    }

    #[test]
    fn height_decoding_inverts_the_encoding() {
        for h in height_ladder() {
            let y = encode_height(h).unwrap();
            assert_relative_eq!(decode_height(y), h, max_relative = 1e-12);
        }
        assert_eq!(decode_height(0.0), 0.0);
        // Mid-scale values round-trip too.
        for y in [0.3, 0.55, 0.72, 0.88] {
            let h = decode_height(y);
            assert_relative_eq!(encode_height(h).unwrap(), y, max_relative = 1e-12);
        }
    }

    #[test]
    fn labels_mark_only_the_defect_wheel() {
        let flat = WheelFlat::new(1e-5, 0.5, WheelPosition::RearLeft).unwrap();
        let label = encode_label(&flat).unwrap();
        assert_relative_eq!(label[2], 0.6, max_relative = 1e-12);
        assert_eq!(label[0], 0.0);
        assert_eq!(label[1], 0.0);
        assert_eq!(label[3], 0.0);
    }

    // -- extraction --

    #[test]
    fn feature_width_tracks_the_level() {
        let record = reference_record(1e-4, WheelPosition::FrontLeft);
        let segments = segment(&record, &FeatureConfig::default()).unwrap();
        let quad = [&segments[0], &segments[25], &segments[50], &segments[75]];
        for level in [0, 1, 3, 6] {
            let fv = extract(quad, level).unwrap();
            assert_eq!(fv.values.len(), feature_width(level));
            assert_eq!(fv.level, level);
            assert_eq!(fv.values.len(), 4 * (1 << level));
        }
        assert_eq!(feature_width(6), 256);
        assert_eq!(level_for_width(256), Some(6));
        assert_eq!(level_for_width(4), Some(0));
        assert_eq!(level_for_width(12), None);
    }

    #[test]
    fn extraction_rejects_misaligned_segments() {
        let record = reference_record(1e-4, WheelPosition::FrontLeft);
        let segments = segment(&record, &FeatureConfig::default()).unwrap();

        let wrong_channel = [&segments[25], &segments[0], &segments[50], &segments[75]];
        assert!(extract(wrong_channel, 2).is_err());

        let wrong_rev = [&segments[1], &segments[25], &segments[50], &segments[75]];
        assert!(extract(wrong_rev, 2).is_err());

        let quad = [&segments[0], &segments[25], &segments[50], &segments[75]];
        assert!(extract(quad, MAX_LEVEL + 1).is_err());
    }

    #[test]
    fn zero_segments_give_zero_features() {
        let flat = WheelFlat::new(0.0, 0.5, WheelPosition::FrontLeft).unwrap();
        let seg = |channel: WheelPosition| SignalSegment {
            samples: vec![0.0; 378],
            channel,
            revolution: 0,
            flat,
        };
        let segs: Vec<SignalSegment> = WheelPosition::ALL.iter().map(|&p| seg(p)).collect();
        let fv = extract([&segs[0], &segs[1], &segs[2], &segs[3]], 4).unwrap();
        assert!(fv.values.iter().all(|&v| v == 0.0));
        assert_eq!(fv.label, [0.0; 4]);
    }

    #[test]
    fn subspace_energies_sum_to_the_envelope_energy() {
        // len * rms^2 per leaf recovers the leaf energy, and the leaves
        // together conserve the envelope energy.
        let record = reference_record(1e-4, WheelPosition::FrontLeft);
        let segments = segment(&record, &FeatureConfig::default()).unwrap();
        let fv = extract(
            [&segments[0], &segments[25], &segments[50], &segments[75]],
            3,
        )
        .unwrap();

        let envelope = analytic_amplitude(&segments[0].samples).unwrap();
        let reference: f64 = envelope.iter().map(|v| v * v).sum();
        let filters = QmfPair::daubechies4();
        let tree = decompose(&envelope, 3, &filters).unwrap();
        let leaf_len = tree.leaf_len() as f64;
        let from_features: f64 = fv.values[..8].iter().map(|r| leaf_len * r * r).sum();
        assert_relative_eq!(from_features, reference, max_relative = 1e-9);
    }

    #[test]
    fn defect_block_mean_grows_with_height() {
        let mut means = Vec::new();
        for h in [1e-5, 1e-4, 1e-3] {
            let record = reference_record(h, WheelPosition::RearRight);
            let rows = extract_record(&record, &FeatureConfig::default()).unwrap();
            let width = 1 << 6;
            let block_mean: f64 = rows
                .iter()
                .map(|fv| fv.values[3 * width..].iter().sum::<f64>() / width as f64)
                .sum::<f64>()
                / rows.len() as f64;
            means.push(block_mean);
        }
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    }

    #[test]
    fn record_extraction_yields_25_labelled_rows() {
        let record = reference_record(1e-6, WheelPosition::FrontRight);
        let rows = extract_record(&record, &FeatureConfig::default()).unwrap();
        assert_eq!(rows.len(), 25);
        for fv in &rows {
            assert_eq!(fv.values.len(), 256);
            assert_relative_eq!(fv.label[1], 0.4, max_relative = 1e-12);
            assert!(fv.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    // -- CSV --

    #[test]
    fn features_csv_round_trips_bit_exactly() {
        let record = reference_record(1e-4, WheelPosition::FrontLeft);
        let rows = extract_record(
            &record,
            &FeatureConfig {
                level: 2,
                ..FeatureConfig::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        write_features_csv(&rows, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("s0,s1,"));
        assert!(text.lines().next().unwrap().ends_with("FL,FR,RL,RR"));
        assert_eq!(text.lines().count(), 26);

        let back = read_features_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn malformed_feature_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();

        let bad_header = dir.path().join("bad_header.csv");
        std::fs::write(&bad_header, "a,b,c,FL,FR,RL,RR\n").unwrap();
        assert!(read_features_csv(&bad_header).is_err());

        // 5 feature columns fit no level (widths are 4 * 2^j).
        let bad_width = dir.path().join("bad_width.csv");
        std::fs::write(&bad_width, "s0,s1,s2,s3,s4,FL,FR,RL,RR\n").unwrap();
        assert!(read_features_csv(&bad_width).is_err());

        let bad_row = dir.path().join("bad_row.csv");
        std::fs::write(&bad_row, "s0,s1,s2,s3,FL,FR,RL,RR\n1,2,3,oops,0,0,0,0\n").unwrap();
        let err = read_features_csv(&bad_row).unwrap_err();
        assert!(err.to_string().contains("line 2") || err.to_string().contains(":2"));
    }
}
