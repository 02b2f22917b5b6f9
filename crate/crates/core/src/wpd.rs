//! Wavelet packet decomposition on a balanced binary tree.
//!
//! Each node of the tree is split by a quadrature-mirror filter pair
//! (Daubechies length-4): the child sequences are the zero-padded full
//! convolution of the parent with the low-pass and high-pass filters,
//! kept at odd output indices (the downsample-by-2 grid that retains
//! every non-zero coefficient of the infinite convolution). A parent of
//! length `n` therefore yields children of length `floor((n + 3) / 2)`,
//! and the reference segment length walks the chain
//! 378 -> 190 -> 96 -> 49 -> 26 -> 14 -> 8.
//!
//! Both children of every node are split again, so level `j` holds `2^j`
//! subspaces in natural (Paley) order: the even child of node `n` comes
//! from the low-pass filter, the odd child from the high-pass filter.
//! Because the shifted filter pair is an orthonormal system for the
//! zero-extended signal, the summed energy of any level equals the input
//! energy to machine precision.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Deepest decomposition level supported by the pipeline.
pub const MAX_LEVEL: usize = 6;

// --- filters -----------------------------------------------------------------

/// A quadrature-mirror analysis filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QmfPair {
    /// Low-pass (scaling) filter `g`.
    pub lowpass: [f64; 4],
    /// High-pass (wavelet) filter `h[k] = (-1)^k g[3 - k]`.
    pub highpass: [f64; 4],
}

impl QmfPair {
    /// The Daubechies length-4 pair (two vanishing moments) at full
    /// precision: `g = [(1+√3), (3+√3), (3-√3), (1-√3)] / (4√2)`.
    pub fn daubechies4() -> QmfPair {
        let sqrt3 = 3.0f64.sqrt();
        let norm = 4.0 * 2.0f64.sqrt();
        let lowpass = [
            (1.0 + sqrt3) / norm,
            (3.0 + sqrt3) / norm,
            (3.0 - sqrt3) / norm,
            (1.0 - sqrt3) / norm,
        ];
        let mut highpass = [0.0; 4];
        for (k, h) in highpass.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *h = sign * lowpass[3 - k];
        }
        QmfPair { lowpass, highpass }
    }
}

impl Default for QmfPair {
    fn default() -> Self {
        QmfPair::daubechies4()
    }
}

// --- single split ------------------------------------------------------------

/// Child length under zero-padded full convolution with a length-4 filter
/// followed by downsampling at odd indices.
pub fn child_len(parent_len: usize) -> usize {
    (parent_len + 3) / 2
}

/// Splits one node into its low-pass and high-pass children.
///
/// `out[i] = sum_k filter[k] * parent[2 i + 1 - k]`, indices outside the
/// parent reading as zero. Energy of the two children together equals the
/// parent energy to machine precision.
pub fn decompose_step(parent: &[f64], filters: &QmfPair) -> Result<(Vec<f64>, Vec<f64>)> {
    if parent.len() < 2 {
        return Err(Error::Domain(format!(
            "node too short to split: {} < 2",
            parent.len()
        )));
    }
    let out_len = child_len(parent.len());
    let mut approx = vec![0.0; out_len];
    let mut detail = vec![0.0; out_len];
    for i in 0..out_len {
        let center = 2 * i + 1;
        let mut low = 0.0;
        let mut high = 0.0;
        for k in 0..4 {
            if k <= center {
                let j = center - k;
                if j < parent.len() {
                    let v = parent[j];
                    low += filters.lowpass[k] * v;
                    high += filters.highpass[k] * v;
                }
            }
        }
        approx[i] = low;
        detail[i] = high;
    }
    Ok((approx, detail))
}

// --- full tree -----------------------------------------------------------------

/// All subspaces of one decomposition level, in natural (Paley) order.
#[derive(Debug, Clone, PartialEq)]
pub struct WpdTree {
    /// Decomposition level `j`; the tree holds `2^j` subspaces.
    pub level: usize,
    /// Coefficient series per subspace, each of equal length.
    pub subspaces: Vec<Vec<f64>>,
    /// Length of the decomposed input.
    pub input_len: usize,
}

impl WpdTree {
    /// Coefficient count in each leaf subspace.
    pub fn leaf_len(&self) -> usize {
        self.subspaces[0].len()
    }

    /// Writes the leaves as CSV, one row per subspace in natural order.
    pub fn write_leaves_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            for leaf in &self.subspaces {
                let row: Vec<String> = leaf.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }
}

/// Decomposes a signal down to the requested level.
///
/// Level 0 returns the input itself as the single subspace. Every deeper
/// level splits each node of the previous one, low-pass child first.
pub fn decompose(signal: &[f64], level: usize, filters: &QmfPair) -> Result<WpdTree> {
    if level > MAX_LEVEL {
        return Err(Error::Domain(format!(
            "decomposition level {level} exceeds the maximum {MAX_LEVEL}"
        )));
    }
    if signal.is_empty() || (level > 0 && signal.len() < 2) {
        return Err(Error::Domain(format!(
            "input too short for level {level}: {} samples",
            signal.len()
        )));
    }

    let mut nodes = vec![signal.to_vec()];
    for _ in 0..level {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for node in &nodes {
            let (approx, detail) = decompose_step(node, filters)?;
            next.push(approx);
            next.push(detail);
        }
        nodes = next;
    }
    Ok(WpdTree {
        level,
        subspaces: nodes,
        input_len: signal.len(),
    })
}

/// Sum of squared entries.
pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    // -- filter identities --

    #[test]
    fn daubechies4_identities() {
        let f = QmfPair::daubechies4();
        let g = f.lowpass;
        let h = f.highpass;

        let sum_g: f64 = g.iter().sum();
        assert!((sum_g - 2.0f64.sqrt()).abs() < 1e-14);

        let sum_h: f64 = h.iter().sum();
        assert!(sum_h.abs() < 1e-14);

        let norm_g: f64 = g.iter().map(|v| v * v).sum();
        assert!((norm_g - 1.0).abs() < 1e-14);

        // Orthogonality of even shifts: sum_k g[k] g[k-2] = 0.
        let shift2: f64 = g[0] * g[2] + g[1] * g[3];
        assert!(shift2.abs() < 1e-14);

        // Quadrature-mirror relation h[k] = (-1)^k g[3-k].
        for k in 0..4 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((h[k] - sign * g[3 - k]).abs() < 1e-15);
        }
    }

    // -- single split --

    #[test]
    fn child_length_formula() {
        assert_eq!(child_len(378), 190);
        assert_eq!(child_len(190), 96);
        assert_eq!(child_len(96), 49);
        assert_eq!(child_len(49), 26);
        assert_eq!(child_len(26), 14);
        assert_eq!(child_len(14), 8);
        assert_eq!(child_len(2), 2);
    }

    #[test]
    fn split_of_zeros_is_zeros() {
        let f = QmfPair::daubechies4();
        let (a, d) = decompose_step(&vec![0.0; 57], &f).unwrap();
        assert_eq!(a.len(), child_len(57));
        assert!(a.iter().chain(d.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn split_of_the_filter_itself_has_unit_energy() {
        let f = QmfPair::daubechies4();
        let (a, d) = decompose_step(&f.lowpass.to_vec(), &f).unwrap();
        let total = energy(&a) + energy(&d);
        assert!((total - 1.0).abs() < 1e-12, "energy {total}");
    }

    #[test]
    fn split_conserves_energy() {
        let f = QmfPair::daubechies4();
        let x = random_signal(378, 1);
        let (a, d) = decompose_step(&x, &f).unwrap();
        let total = energy(&a) + energy(&d);
        assert_relative_eq!(total, energy(&x), max_relative = 1e-12);
    }

    #[test]
    fn split_rejects_tiny_nodes() {
        let f = QmfPair::daubechies4();
        assert!(decompose_step(&[1.0], &f).is_err());
    }

    #[test]
    fn children_match_explicit_inner_products() {
        // Independent oracle: each child coefficient is the inner product
        // of the parent with the time-reversed filter at an odd shift.
        let f = QmfPair::daubechies4();
        let x = random_signal(41, 7);
        let (a, d) = decompose_step(&x, &f).unwrap();
        for i in 0..a.len() {
            let mut low = 0.0;
            let mut high = 0.0;
            for (j, &v) in x.iter().enumerate() {
                let shift = 2 * i + 1;
                if shift >= j && shift - j < 4 {
                    low += f.lowpass[shift - j] * v;
                    high += f.highpass[shift - j] * v;
                }
            }
            assert_relative_eq!(a[i], low, max_relative = 1e-14, epsilon = 1e-15);
            assert_relative_eq!(d[i], high, max_relative = 1e-14, epsilon = 1e-15);
        }
    }

    #[test]
    fn children_reconstruct_the_parent() {
        // Completeness oracle: the adjoint of the analysis step restores
        // the parent exactly, which pins both indexing and orthonormality.
        let f = QmfPair::daubechies4();
        let x = random_signal(53, 11);
        let (a, d) = decompose_step(&x, &f).unwrap();
        for (m, &v) in x.iter().enumerate() {
            let mut rebuilt = 0.0;
            for i in 0..a.len() {
                let shift = 2 * i + 1;
                if shift >= m && shift - m < 4 {
                    rebuilt += a[i] * f.lowpass[shift - m] + d[i] * f.highpass[shift - m];
                }
            }
            assert_relative_eq!(rebuilt, v, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    // -- full tree --

    #[test]
    fn reference_segment_reaches_64_by_8() {
        let f = QmfPair::daubechies4();
        let x = random_signal(378, 2);
        let tree = decompose(&x, 6, &f).unwrap();
        assert_eq!(tree.subspaces.len(), 64);
        assert!(tree.subspaces.iter().all(|s| s.len() == 8));

        // The whole length chain, asserted level by level.
        let mut len = 378;
        for level in 1..=6 {
            len = child_len(len);
            let t = decompose(&x, level, &f).unwrap();
            assert_eq!(t.subspaces.len(), 1 << level);
            assert!(t.subspaces.iter().all(|s| s.len() == len));
        }
        assert_eq!(len, 8);
    }

    #[test]
    fn level_zero_is_the_identity() {
        let f = QmfPair::daubechies4();
        let x = random_signal(100, 3);
        let tree = decompose(&x, 0, &f).unwrap();
        assert_eq!(tree.subspaces.len(), 1);
        assert_eq!(tree.subspaces[0], x);
    }

    #[test]
    fn every_level_conserves_energy() {
        let f = QmfPair::daubechies4();
        let x = random_signal(378, 4);
        let reference = energy(&x);
        for level in 1..=6 {
            let tree = decompose(&x, level, &f).unwrap();
            let total: f64 = tree.subspaces.iter().map(|s| energy(s)).sum();
            assert!(
                ((total - reference) / reference).abs() < 1e-9,
                "level {level}: {total} vs {reference}"
            );
        }
    }

    #[test]
    fn decomposition_is_linear() {
        let f = QmfPair::daubechies4();
        let x = random_signal(190, 5);
        let y = random_signal(190, 6);
        let (a, b) = (2.5, -1.25);
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();

        let tx = decompose(&x, 3, &f).unwrap();
        let ty = decompose(&y, 3, &f).unwrap();
        let tm = decompose(&mixed, 3, &f).unwrap();
        for s in 0..tm.subspaces.len() {
            for i in 0..tm.subspaces[s].len() {
                let expected = a * tx.subspaces[s][i] + b * ty.subspaces[s][i];
                assert_relative_eq!(
                    tm.subspaces[s][i],
                    expected,
                    max_relative = 1e-12,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn natural_order_marks_the_lowpass_child_even() {
        // A slow ramp keeps almost all energy in the low-pass branch, so
        // subspace 0 must dominate subspace 1 at level 1.
        let f = QmfPair::daubechies4();
        let x: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let tree = decompose(&x, 1, &f).unwrap();
        assert!(energy(&tree.subspaces[0]) > 100.0 * energy(&tree.subspaces[1]));
    }

    #[test]
    fn rejects_out_of_range_levels_and_short_inputs() {
        let f = QmfPair::daubechies4();
        let x = random_signal(64, 8);
        assert!(decompose(&x, 7, &f).is_err());
        assert!(decompose(&[], 0, &f).is_err());
        assert!(decompose(&[1.0], 1, &f).is_err());
    }

    #[test]
    fn leaves_csv_has_one_row_per_subspace() {
        let f = QmfPair::daubechies4();
        let x = random_signal(378, 9);
        let tree = decompose(&x, 6, &f).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("leaves.csv");
        tree.write_leaves_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 64);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tree_shape_and_energy_hold_for_arbitrary_lengths(
            len in 16usize..4096,
            seed in 0u64..1_000,
            level in 1usize..=6,
        ) {
            let f = QmfPair::daubechies4();
            let x = random_signal(len, seed);
            let tree = decompose(&x, level, &f).unwrap();

            prop_assert_eq!(tree.subspaces.len(), 1 << level);
            let mut expected = len;
            for _ in 0..level {
                expected = child_len(expected);
            }
            prop_assert!(tree.subspaces.iter().all(|s| s.len() == expected));

            let reference = energy(&x);
            let total: f64 = tree.subspaces.iter().map(|s| energy(s)).sum();
            prop_assert!(((total - reference) / reference).abs() < 1e-9);
        }
    }
}
