//! Analytic amplitude (envelope) extraction.
//!
//! A real segment `x[n]` is lifted to its discrete analytic signal by
//! zeroing the negative-frequency half of its DFT and doubling the
//! positive half (DC and Nyquist bins kept as they are). The imaginary
//! part of the result approximates the 90-degree phase-shifted signal,
//! and the per-sample magnitude
//!
//! ```text
//! A[n] = sqrt(x[n]^2 + H[x][n]^2)
//! ```
//!
//! is the envelope: it follows the amplitude modulation of the segment
//! while the carrier oscillation drops out. Construction is circular on
//! the finite segment, so a guard band near the segment edges is excluded
//! wherever envelope values are compared against a reference.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Shortest segment for which an envelope is meaningful.
const MIN_SEGMENT_LEN: usize = 8;

/// Computes the analytic amplitude of a real segment.
///
/// The output has the same length as the input and is non-negative;
/// it dominates the rectified input up to numerical round-off.
pub fn analytic_amplitude(segment: &[f64]) -> Result<Vec<f64>> {
    if segment.len() < MIN_SEGMENT_LEN {
        return Err(Error::Domain(format!(
            "segment too short for envelope extraction: {} < {MIN_SEGMENT_LEN}",
            segment.len()
        )));
    }
    if let Some(bad) = segment.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "segment contains a non-finite sample: {bad}"
        )));
    }

    let n = segment.len();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut spectrum: Vec<Complex<f64>> = segment
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    forward.process(&mut spectrum);

    // Analytic-signal gains: DC 1, positive frequencies 2, Nyquist (even
    // lengths only) 1, negative frequencies 0.
    let positive_end = if n % 2 == 0 { n / 2 } else { n.div_ceil(2) };
    for bin in spectrum.iter_mut().take(positive_end).skip(1) {
        *bin *= 2.0;
    }
    for bin in spectrum.iter_mut().skip(positive_end + (n % 2 == 0) as usize) {
        *bin = Complex::new(0.0, 0.0);
    }

    inverse.process(&mut spectrum);
    let scale = 1.0 / n as f64;
    Ok(spectrum.iter().map(|z| (z * scale).norm()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Guard band excluded from envelope comparisons: the circular
    /// construction rings near the wrap-around discontinuity, and the
    /// ringing decays below the test tolerances 20 % of the segment in
    /// from each edge.
    fn interior(n: usize) -> std::ops::Range<usize> {
        n / 5..n - n / 5
    }

    fn cosine(freq_hz: f64, rate_hz: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq_hz * i as f64 / rate_hz).cos())
            .collect()
    }

    #[test]
    fn pure_cosine_envelope_is_flat_inside() {
        let x = cosine(50.0, 2000.0, 378);
        let a = analytic_amplitude(&x).unwrap();
        let worst = interior(378)
            .map(|i| (a[i] - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 0.02, "interior deviation {worst}");
    }

    #[test]
    fn amplitude_modulation_is_recovered() {
        let n = 378;
        let envelope: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * 5.0 * i as f64 / 2000.0).cos())
            .collect();
        let x: Vec<f64> = (0..n)
            .map(|i| {
                envelope[i] * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / 2000.0).cos()
            })
            .collect();
        let a = analytic_amplitude(&x).unwrap();
        let worst = interior(n)
            .map(|i| (a[i] - envelope[i]).abs() / envelope[i])
            .fold(0.0f64, f64::max);
        assert!(worst < 0.03, "interior relative error {worst}");
    }

    #[test]
    fn zero_signal_has_zero_envelope() {
        let a = analytic_amplitude(&[0.0; 64]).unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn envelope_length_matches_input() {
        for n in [8, 9, 64, 377, 378] {
            let x = cosine(50.0, 2000.0, n);
            assert_eq!(analytic_amplitude(&x).unwrap().len(), n);
        }
    }

    #[test]
    fn imaginary_part_is_the_quarter_period_shift() {
        // For a pure interior tone the analytic signal's imaginary part
        // correlates with the sine counterpart above 0.99.
        let n = 378;
        let x = cosine(50.0, 2000.0, n);
        let rate = 2000.0;

        // Recompute the analytic signal inline to reach the imaginary part.
        let mut planner = FftPlanner::new();
        let mut z: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        planner.plan_fft_forward(n).process(&mut z);
        for bin in z.iter_mut().take(n / 2).skip(1) {
            *bin *= 2.0;
        }
        for bin in z.iter_mut().skip(n / 2 + 1) {
            *bin = Complex::new(0.0, 0.0);
        }
        planner.plan_fft_inverse(n).process(&mut z);

        let imag: Vec<f64> = z.iter().map(|v| v.im / n as f64).collect();
        let shifted: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 50.0 * i as f64 / rate).sin())
            .collect();

        let range = interior(n);
        let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
        let mean_a: f64 =
            range.clone().map(|i| imag[i]).sum::<f64>() / range.len() as f64;
        let mean_b: f64 =
            range.clone().map(|i| shifted[i]).sum::<f64>() / range.len() as f64;
        for i in range {
            let (u, v) = (imag[i] - mean_a, shifted[i] - mean_b);
            num += u * v;
            da += u * u;
            db += v * v;
        }
        let correlation = num / (da.sqrt() * db.sqrt());
        assert!(correlation > 0.99, "correlation {correlation}");
    }

    #[test]
    fn rejects_short_and_non_finite_segments() {
        assert!(analytic_amplitude(&[1.0; 7]).is_err());
        let mut x = vec![0.0; 64];
        x[10] = f64::NAN;
        assert!(analytic_amplitude(&x).is_err());
        x[10] = f64::INFINITY;
        assert!(analytic_amplitude(&x).is_err());
    }

    #[test]
    fn scaling_is_homogeneous() {
        let x = cosine(137.0, 2000.0, 200);
        let a = analytic_amplitude(&x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| 3.5 * v).collect();
        let b = analytic_amplitude(&scaled).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(3.5 * u, *v, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn envelope_dominates_the_signal(
            values in proptest::collection::vec(-1e3f64..1e3, 16..256)
        ) {
            let a = analytic_amplitude(&values).unwrap();
            for (envelope, sample) in a.iter().zip(&values) {
                prop_assert!(envelope + 1e-9 >= sample.abs());
                prop_assert!(*envelope >= 0.0);
            }
        }
    }
}
