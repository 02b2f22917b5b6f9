//! Wheel-flat geometry and surrogate axle-box-acceleration synthesis.
//!
//! A wheel flat is a chord-shaped spot worn onto the tread when a wheel
//! slides instead of rolling. With flat height `h` and wheel radius `r_w`
//! the defect half-angle and skid (chord) length follow from circle
//! geometry:
//!
//! ```text
//! h = r_w (1 - cos θ)        =>  θ = acos(1 - h / r_w)
//! l = 2 r_w sin θ
//! ```
//!
//! Each wheel revolution the flat strikes the rail once, so an axle box
//! accelerometer sees a rotation-periodic train of impact transients. The
//! synthesizer models one impact as a half-sine contact pulse of duration
//! `l / v` exciting a bank of exponentially decaying structural modes, and
//! superposes the response over all revolutions. Wider pulses (taller
//! flats) excite the upper modes less, so the spectral balance shifts with
//! height while the peak amplitude scales proportionally.
//!
//! Cross-channel structure on the instrumented bogie: the wheel sharing the
//! defect wheelset sees the impact attenuated with no delay; the other
//! wheelset sees it attenuated further and delayed by one third of a
//! revolution. Channels are ordered (front-left, front-right, rear-left,
//! rear-right) throughout.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// --- constants ------------------------------------------------------------

/// Standard gravity, used to express calibration anchors given in g.
pub const STANDARD_GRAVITY_M_S2: f64 = 9.81;

/// Flat heights of the simulated ladder, metres, ascending.
/// Expressed in millimetres these are 1e-4, 1e-3, 1e-2, 1e-1 and 1e-0 mm.
const HEIGHT_LADDER_M: [f64; 5] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3];

/// Kernel tail is cut once every mode has decayed below this fraction of
/// its initial amplitude; keeps record synthesis O(modes * samples).
const KERNEL_DECAY_CUTOFF: f64 = 1e-4;

// --- wheel position -------------------------------------------------------

/// One of the four instrumented axle boxes of the leading bogie.
///
/// The defect is always placed on this bogie; transfer to the trailing
/// bogie is negligible and its channels are not generated. The index
/// encodes wheelset and side as `wheelset * 2 + side`, so XOR of two
/// indices classifies their relation (0 same wheel, 1 same wheelset,
/// 2 or 3 other wheelset).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WheelPosition {
    FrontLeft,
    FrontRight,
    RearLeft,
    RearRight,
}

impl WheelPosition {
    /// All positions in channel order (FL, FR, RL, RR).
    pub const ALL: [WheelPosition; 4] = [
        WheelPosition::FrontLeft,
        WheelPosition::FrontRight,
        WheelPosition::RearLeft,
        WheelPosition::RearRight,
    ];

    /// Channel index: FL = 0, FR = 1, RL = 2, RR = 3.
    pub fn index(self) -> usize {
        match self {
            WheelPosition::FrontLeft => 0,
            WheelPosition::FrontRight => 1,
            WheelPosition::RearLeft => 2,
            WheelPosition::RearRight => 3,
        }
    }

    /// Inverse of [`WheelPosition::index`].
    pub fn from_index(index: usize) -> Option<WheelPosition> {
        WheelPosition::ALL.get(index).copied()
    }

    /// Lower-case short name used in file names: "fl", "fr", "rl", "rr".
    pub fn short_name(self) -> &'static str {
        match self {
            WheelPosition::FrontLeft => "fl",
            WheelPosition::FrontRight => "fr",
            WheelPosition::RearLeft => "rl",
            WheelPosition::RearRight => "rr",
        }
    }

    /// Upper-case label used in CSV headers and metric tables.
    pub fn label(self) -> &'static str {
        match self {
            WheelPosition::FrontLeft => "FL",
            WheelPosition::FrontRight => "FR",
            WheelPosition::RearLeft => "RL",
            WheelPosition::RearRight => "RR",
        }
    }

    /// Parses either the short name or the label, case-insensitively.
    pub fn parse(s: &str) -> Option<WheelPosition> {
        WheelPosition::ALL
            .iter()
            .copied()
            .find(|p| s.eq_ignore_ascii_case(p.short_name()))
    }
}

impl fmt::Display for WheelPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

// --- flat geometry ----------------------------------------------------------

/// A single wheel flat: height, derived geometry, and which wheel carries it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelFlat {
    /// Flat height `h` in metres; 0 means no defect.
    pub height_m: f64,
    /// Defect half-angle `θ = acos(1 - h / r_w)`, radians, in `[0, π/2)`.
    pub angle_rad: f64,
    /// Skid (chord) length `l = 2 r_w sin θ`, metres.
    pub skid_length_m: f64,
    /// Wheel carrying the flat.
    pub location: WheelPosition,
}

impl WheelFlat {
    /// Builds a flat from height and wheel radius, deriving the geometry.
    pub fn new(height_m: f64, wheel_radius_m: f64, location: WheelPosition) -> Result<WheelFlat> {
        let (angle_rad, skid_length_m) = flat_geometry(height_m, wheel_radius_m)?;
        Ok(WheelFlat {
            height_m,
            angle_rad,
            skid_length_m,
            location,
        })
    }
}

/// Closed-form flat geometry: returns `(angle_rad, skid_length_m)`.
///
/// Errors if `height_m` is negative, not finite, or at least the wheel
/// radius (the chord construction degenerates there).
pub fn flat_geometry(height_m: f64, wheel_radius_m: f64) -> Result<(f64, f64)> {
    if !(wheel_radius_m.is_finite() && wheel_radius_m > 0.0) {
        return Err(Error::Domain(format!(
            "wheel radius must be positive and finite, got {wheel_radius_m}"
        )));
    }
    if !height_m.is_finite() || height_m < 0.0 || height_m >= wheel_radius_m {
        return Err(Error::Domain(format!(
            "flat height must lie in [0, wheel radius), got {height_m}"
        )));
    }
    let angle_rad = (1.0 - height_m / wheel_radius_m).acos();
    let skid_length_m = 2.0 * wheel_radius_m * angle_rad.sin();
    Ok((angle_rad, skid_length_m))
}

/// The five simulated flat heights in metres, ascending (1e-4 .. 1e-0 mm).
pub fn height_ladder() -> [f64; 5] {
    HEIGHT_LADDER_M
}

/// Short label for a ladder height, in millimetres: 1e-7 m -> "1e-4".
pub fn height_label(height_m: f64) -> String {
    let exponent = (height_m * 1000.0).log10().round() as i32;
    format!("1e-{}", -exponent)
}

/// Parses a millimetre height label ("1e-4" .. "1e-0") back to metres.
/// Only ladder members are accepted.
pub fn parse_height_label(label: &str) -> Result<f64> {
    let mm: f64 = label
        .parse()
        .map_err(|_| Error::Domain(format!("unrecognized height label {label:?}")))?;
    let height_m = mm * 1e-3;
    height_ladder()
        .into_iter()
        .find(|h| (h - height_m).abs() <= 1e-9 * h)
        .ok_or_else(|| Error::Domain(format!("height {label} is not on the simulated ladder")))
}

// --- simulation configuration -----------------------------------------------

/// One structural ringing mode excited by a flat impact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingingMode {
    /// Modal frequency in Hz.
    pub frequency_hz: f64,
    /// Viscous damping ratio, dimensionless, in (0, 1).
    pub damping_ratio: f64,
}

/// Parameters of the surrogate signal generator.
///
/// Defaults describe the reference scenario: 0.5 m wheels at 60 km/h
/// sampled at 2 kHz for 5 s, with seven ringing modes damped at 2 %.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Wheel radius `r_w` in metres.
    pub wheel_radius_m: f64,
    /// Vehicle speed `v` in m/s (16.667 m/s is 60 km/h).
    pub speed_m_per_s: f64,
    /// Sample rate in Hz; must cover the fastest ringing mode (Nyquist).
    pub sample_rate_hz: f64,
    /// Record duration in seconds.
    pub duration_s: f64,
    /// Structural modes rung by each impact.
    pub ringing_modes: Vec<RingingMode>,
    /// Defect-channel peak acceleration at `height_ref_m`, m/s^2.
    /// 981 m/s^2 is the 100 g calibration anchor.
    pub peak_accel_ref_m_s2: f64,
    /// Flat height producing `peak_accel_ref_m_s2` on the defect channel.
    pub height_ref_m: f64,
    /// Amplitude factor for the opposite wheel of the defect wheelset.
    /// Close to 1: the two wheels of a wheelset ride the same axle, so
    /// their axle-box responses differ only mildly.
    pub same_wheelset_factor: f64,
    /// Amplitude factor for both wheels of the other wheelset.
    pub other_wheelset_factor: f64,
    /// Impact delay on the other wheelset, as a fraction of one revolution.
    pub other_wheelset_delay_frac: f64,
    /// White-noise standard deviation as a fraction of the defect-channel
    /// peak amplitude. Noise scales with the defect, so a zero-height flat
    /// yields an exactly silent record.
    pub noise_frac: f64,
    /// Wheel angle at the start of the record, as the fraction of a
    /// revolution remaining until the first impact. The default 0.6 puts
    /// exactly `floor(duration / T)` impact onsets into a record of
    /// duration 5 s at the reference speed.
    pub impact_phase_frac: f64,
    /// Master seed for the noise streams.
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            wheel_radius_m: 0.5,
            speed_m_per_s: 16.667,
            sample_rate_hz: 2000.0,
            duration_s: 5.0,
            ringing_modes: [55.626, 76.292, 136.996, 279.376, 365.859, 445.490, 731.255]
                .iter()
                .map(|&frequency_hz| RingingMode {
                    frequency_hz,
                    damping_ratio: 0.02,
                })
                .collect(),
            peak_accel_ref_m_s2: 100.0 * STANDARD_GRAVITY_M_S2,
            height_ref_m: 1e-3,
            same_wheelset_factor: 0.9,
            other_wheelset_factor: 0.25,
            other_wheelset_delay_frac: 1.0 / 3.0,
            noise_frac: 0.01,
            impact_phase_frac: 0.6,
            rng_seed: 42,
        }
    }
}

impl SimConfig {
    /// Wheel revolution period `T = 2 π r_w / v` in seconds.
    pub fn revolution_period_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.wheel_radius_m / self.speed_m_per_s
    }

    /// Number of samples in one record.
    pub fn samples_per_record(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Defect-channel peak amplitude for a flat of the given height,
    /// m/s^2. Log-linear in height with unit slope through the anchors
    /// (100 g at 1e-3 m, 10 g at 1e-4 m), hence proportional.
    pub fn peak_amplitude_m_s2(&self, height_m: f64) -> f64 {
        self.peak_accel_ref_m_s2 * (height_m / self.height_ref_m)
    }

    /// Validates physical ranges and the Nyquist margin.
    pub fn validate(&self) -> Result<()> {
        if !(self.wheel_radius_m.is_finite() && self.wheel_radius_m > 0.0) {
            return Err(Error::Config("wheel_radius_m must be positive".into()));
        }
        if !(self.speed_m_per_s.is_finite() && self.speed_m_per_s > 0.0) {
            return Err(Error::Config("speed_m_per_s must be positive".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        if self.ringing_modes.is_empty() {
            return Err(Error::Config("ringing_modes must not be empty".into()));
        }
        for mode in &self.ringing_modes {
            if !(mode.frequency_hz.is_finite() && mode.frequency_hz > 0.0) {
                return Err(Error::Config("ringing mode frequency must be positive".into()));
            }
            if !(mode.damping_ratio > 0.0 && mode.damping_ratio < 1.0) {
                return Err(Error::Config("damping_ratio must lie in (0, 1)".into()));
            }
            if self.sample_rate_hz < 2.0 * mode.frequency_hz {
                return Err(Error::Config(format!(
                    "sample_rate_hz {} violates Nyquist for mode {} Hz",
                    self.sample_rate_hz, mode.frequency_hz
                )));
            }
        }
        if !(self.peak_accel_ref_m_s2.is_finite() && self.peak_accel_ref_m_s2 > 0.0) {
            return Err(Error::Config("peak_accel_ref_m_s2 must be positive".into()));
        }
        if !(self.height_ref_m.is_finite() && self.height_ref_m > 0.0) {
            return Err(Error::Config("height_ref_m must be positive".into()));
        }
        for (name, v) in [
            ("same_wheelset_factor", self.same_wheelset_factor),
            ("other_wheelset_factor", self.other_wheelset_factor),
            ("noise_frac", self.noise_frac),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.other_wheelset_delay_frac) {
            return Err(Error::Config("other_wheelset_delay_frac must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.impact_phase_frac) {
            return Err(Error::Config("impact_phase_frac must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

// --- record -----------------------------------------------------------------

/// One synthesized four-channel acceleration record.
#[derive(Debug, Clone, PartialEq)]
pub struct AbaRecord {
    /// Acceleration samples in m/s^2, channel order (FL, FR, RL, RR);
    /// all channels share the same length.
    pub channels: [Vec<f64>; 4],
    /// Sample rate in Hz.
    pub sample_rate_hz: f64,
    /// The flat that produced this record.
    pub flat: WheelFlat,
    /// Generator configuration snapshot.
    pub config: SimConfig,
}

impl AbaRecord {
    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    /// True when the record holds no samples.
    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }
}

/// Impact onset times within `[0, duration)`, seconds. One onset per
/// revolution at phase `impact_phase_frac`, so a 5 s record at the
/// reference speed carries `floor(duration / T) = 26` onsets bounding
/// 25 full revolutions.
pub fn impact_onsets(config: &SimConfig) -> Vec<f64> {
    let period = config.revolution_period_s();
    let mut onsets = Vec::new();
    let mut k = 0u32;
    loop {
        let t = (f64::from(k) + config.impact_phase_frac) * period;
        if t >= config.duration_s {
            return onsets;
        }
        onsets.push(t);
        k += 1;
    }
}

/// Relation of a measurement channel to the defect wheel, encoded as
/// `channel_index XOR defect_index`: 0 same wheel, 1 opposite wheel of the
/// same wheelset, 2 or 3 a wheel of the other wheelset.
fn channel_relation(channel: WheelPosition, defect: WheelPosition) -> usize {
    channel.index() ^ defect.index()
}

/// Half-sine contact pulse spectral weight at frequency `f` for pulse
/// duration `tau`, normalized to 1 at f = 0. Evaluates
/// `|cos(π f τ) / (1 - (2 f τ)²)|` with the removable singularity at
/// `2 f τ = 1` filled by its limit π/4.
fn pulse_weight(frequency_hz: f64, tau_s: f64) -> f64 {
    let x = 2.0 * frequency_hz * tau_s;
    let denom = 1.0 - x * x;
    if denom.abs() < 1e-9 {
        std::f64::consts::FRAC_PI_4
    } else {
        ((std::f64::consts::PI * frequency_hz * tau_s).cos() / denom).abs()
    }
}

/// Single-impact kernel: pulse-weighted superposition of decaying
/// sinusoids, evaluated at time `u >= 0` after the impact onset.
/// `weights[m]` is the pulse weight of mode `m`.
fn kernel_value(modes: &[RingingMode], weights: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for (mode, w) in modes.iter().zip(weights) {
        let omega = 2.0 * std::f64::consts::PI * mode.frequency_hz;
        acc += w * (-mode.damping_ratio * omega * u).exp() * (omega * u).sin();
    }
    acc
}

/// Synthesizes the four-channel record for one flat.
///
/// Deterministic: identical `(flat, config)` including `rng_seed` yield a
/// bit-identical record, and relocating the flat permutes the channels
/// exactly (amplitude factors, delays, and noise streams are keyed by the
/// channel-to-defect relation, not by absolute channel index).
pub fn synthesize(flat: &WheelFlat, config: &SimConfig) -> Result<AbaRecord> {
    config.validate()?;
    if !(flat.height_m.is_finite()
        && flat.height_m >= 0.0
        && flat.height_m < config.wheel_radius_m)
    {
        return Err(Error::Domain(format!(
            "flat height must lie in [0, wheel radius), got {}",
            flat.height_m
        )));
    }

    let n = config.samples_per_record();
    let mut record = AbaRecord {
        channels: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        sample_rate_hz: config.sample_rate_hz,
        flat: *flat,
        config: config.clone(),
    };

    let amp = config.peak_amplitude_m_s2(flat.height_m);
    if amp == 0.0 {
        // No defect: no impacts and, with noise proportional to the defect
        // peak, no noise floor either.
        return Ok(record);
    }

    let dt = 1.0 / config.sample_rate_hz;
    let period = config.revolution_period_s();
    let tau = flat.skid_length_m / config.speed_m_per_s;
    let modes = &config.ringing_modes;
    let weights: Vec<f64> = modes
        .iter()
        .map(|m| pulse_weight(m.frequency_hz, tau))
        .collect();

    // Kernel span: time for the slowest-decaying mode to fall below the
    // cutoff, capped at the record length.
    let min_decay_rate = modes
        .iter()
        .map(|m| m.damping_ratio * 2.0 * std::f64::consts::PI * m.frequency_hz)
        .fold(f64::INFINITY, f64::min);
    let span_s = (KERNEL_DECAY_CUTOFF.ln().abs() / min_decay_rate).min(config.duration_s);
    let span_samples = (span_s * config.sample_rate_hz).ceil() as usize;

    // Peak-normalize on a dense grid so the defect-channel peak equals
    // `amp` up to sampling; 8x oversampling resolves the fastest mode.
    let fine_steps = span_samples * 8;
    let fine_dt = span_s / fine_steps as f64;
    let mut peak = 0.0f64;
    for i in 0..=fine_steps {
        peak = peak.max(kernel_value(modes, &weights, i as f64 * fine_dt).abs());
    }
    if peak == 0.0 {
        return Err(Error::Domain("impact kernel is identically zero".into()));
    }
    let scale = amp / peak;

    let onsets = impact_onsets(config);
    for channel in WheelPosition::ALL {
        let rel = channel_relation(channel, flat.location);
        let factor = match rel {
            0 => 1.0,
            1 => config.same_wheelset_factor,
            _ => config.other_wheelset_factor,
        };
        let delay = if rel < 2 {
            0.0
        } else {
            config.other_wheelset_delay_frac * period
        };
        let samples = &mut record.channels[channel.index()];

        for &onset in &onsets {
            let start_t = onset + delay;
            // First sample index at or after the delayed onset; impacts
            // whose tail reaches past the record end are truncated, and
            // pre-record revolutions are irrelevant because every onset
            // lies inside the record.
            let first = (start_t / dt).ceil() as usize;
            if first >= n {
                continue;
            }
            let last = (first + span_samples).min(n - 1);
            // Decaying sinusoids advance by a constant complex rotation
            // per sample: z_{j+1} = z_j * q with q = exp((-ζω + iω) dt).
            // The recurrence replaces per-sample exp/sin calls and is
            // evaluated in a fixed order, keeping records bit-identical.
            for (mode, &w) in modes.iter().zip(&weights) {
                let omega = 2.0 * std::f64::consts::PI * mode.frequency_hz;
                let decay = mode.damping_ratio * omega;
                let u0 = first as f64 * dt - start_t;
                let (mut re, mut im) = {
                    let r = (-decay * u0).exp();
                    ((omega * u0).cos() * r, (omega * u0).sin() * r)
                };
                let (q_re, q_im) = {
                    let r = (-decay * dt).exp();
                    ((omega * dt).cos() * r, (omega * dt).sin() * r)
                };
                let gain = factor * scale * w;
                for sample in samples.iter_mut().take(last + 1).skip(first) {
                    *sample += gain * im;
                    let next_re = re * q_re - im * q_im;
                    im = re * q_im + im * q_re;
                    re = next_re;
                }
            }
        }

        // Noise stream keyed by the channel relation so that relocating
        // the defect permutes channels bit-exactly.
        let sigma = config.noise_frac * amp;
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(rel as u64);
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::Config(format!("invalid noise level: {e}")))?;
            for sample in samples.iter_mut() {
                *sample += normal.sample(&mut rng);
            }
        }
    }

    Ok(record)
}

// --- CSV interchange ---------------------------------------------------------

/// File name for one record: `aba_h{mm label}_{position}.csv`.
pub fn record_filename(height_m: f64, position: WheelPosition) -> String {
    format!("aba_h{}_{}.csv", height_label(height_m), position.short_name())
}

/// Writes the record as CSV with header `t,fl,fr,rl,rr`. Time carries
/// 11 significant digits; accelerations use the shortest representation
/// that round-trips exactly, so rewrites are byte-identical.
pub fn write_record_csv(record: &AbaRecord, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "t,fl,fr,rl,rr")?;
        let rate = record.sample_rate_hz;
        for i in 0..record.len() {
            let t = i as f64 / rate;
            writeln!(
                w,
                "{:.10e},{},{},{},{}",
                t,
                record.channels[0][i],
                record.channels[1][i],
                record.channels[2][i],
                record.channels[3][i]
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

/// Reads the four acceleration channels back from a record CSV.
/// The time column is not retained; callers reattach metadata from the
/// file name and configuration.
pub fn read_record_channels(path: &Path) -> Result<[Vec<f64>; 4]> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let file_name = path.display().to_string();
    let mut channels: [Vec<f64>; 4] = Default::default();

    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let display_line = line_no + 1;
        if line_no == 0 {
            if line.trim() != "t,fl,fr,rl,rr" {
                return Err(Error::Parse {
                    file: file_name,
                    line: display_line,
                    msg: format!("expected header t,fl,fr,rl,rr, found {line:?}"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                file: file_name,
                line: display_line,
                msg: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        for (c, field) in fields[1..].iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                file: file_name.clone(),
                line: display_line,
                msg: format!("invalid acceleration value {field:?}"),
            })?;
            channels[c].push(value);
        }
    }
    if channels[0].is_empty() {
        return Err(Error::Parse {
            file: file_name,
            line: 1,
            msg: "record holds no samples".into(),
        });
    }
    Ok(channels)
}

/// Loads the full simulated grid from a directory: one record per
/// (ladder height, wheel position), named by [`record_filename`].
/// Records come back height-major (all positions of 1e-4 mm first),
/// metadata reattached from the configuration.
pub fn read_record_grid(dir: &Path, config: &SimConfig) -> Result<Vec<AbaRecord>> {
    let mut records = Vec::with_capacity(20);
    for height_m in height_ladder() {
        for position in WheelPosition::ALL {
            let path = dir.join(record_filename(height_m, position));
            let channels = read_record_channels(&path)?;
            let flat = WheelFlat::new(height_m, config.wheel_radius_m, position)?;
            records.push(AbaRecord {
                channels,
                sample_rate_hz: config.sample_rate_hz,
                flat,
                config: config.clone(),
            });
        }
    }
    Ok(records)
}

// --- tests --------------------------------------------------------------------
