//! Onset (superflux) and spectral activation features derived from the
//! framed filterbank output.

use serde::{Deserialize, Serialize};

use crate::filterbank::Spectrogram;

/// Rows whose maximum does not exceed this are treated as silent.
pub const SILENT_BIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Frame lag of the superflux difference.
    pub onset_lag: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { onset_lag: 1 }
    }
}

/// Normalized onset and spectral activations of identical shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub onsets: Spectrogram,
    pub spec: Spectrogram,
}

impl FeaturePair {
    /// Panics if the two matrices differ in shape.
    pub fn new(onsets: Spectrogram, spec: Spectrogram) -> Self {
        assert!(onsets.same_shape(&spec), "onset and spectral features differ in shape");
        Self { onsets, spec }
    }

    pub fn num_frames(&self) -> usize {
        self.spec.num_frames()
    }

    pub fn frame_rate(&self) -> f64 {
        self.spec.frame_rate()
    }

    pub fn band_pitches(&self) -> &[u8] {
        self.spec.band_pitches()
    }
}

/// Divides each row by its maximum; silent rows stay zero.
pub fn normalize_bins(m: &Spectrogram) -> Spectrogram {
    let mut out = m.clone();
    for band in 0..out.num_bands() {
        let row = out.row_mut(band);
        let max = row.iter().copied().fold(0.0f64, f64::max);
        if max > SILENT_BIN_EPS {
            row.iter_mut().for_each(|v| *v /= max);
        } else {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    out
}

/// Maximum over each band and its two neighbours, per frame.
fn max_filter_bands(m: &Spectrogram) -> Vec<Vec<f64>> {
    let bands = m.num_bands();
    (0..bands)
        .map(|b| {
            let lo = b.saturating_sub(1);
            let hi = (b + 1).min(bands - 1);
            (0..m.num_frames())
                .map(|t| (lo..=hi).map(|r| m.get(r, t)).fold(0.0f64, f64::max))
                .collect()
        })
        .collect()
}

/// Half-wave rectified difference between a frame and the band-max-filtered
/// frame `lag` steps earlier, before normalization.
pub fn superflux_raw(raw: &Spectrogram, lag: usize) -> Spectrogram {
    assert!(lag >= 1, "onset lag must be at least one frame");
    let filtered = max_filter_bands(raw);
    let rows = (0..raw.num_bands())
        .map(|b| {
            let row = raw.row(b);
            (0..raw.num_frames())
                .map(|t| {
                    if t < lag {
                        0.0
                    } else {
                        (row[t] - filtered[b][t - lag]).max(0.0)
                    }
                })
                .collect()
        })
        .collect();
    Spectrogram::from_rows(rows, raw.frame_rate(), raw.band_pitches().to_vec())
}

/// Normalized superflux onset activation with the default lag of one frame.
pub fn superflux_onsets(raw: &Spectrogram) -> Spectrogram {
    superflux_onsets_with(raw, &FeatureConfig::default())
}

pub fn superflux_onsets_with(raw: &Spectrogram, config: &FeatureConfig) -> Spectrogram {
    normalize_bins(&superflux_raw(raw, config.onset_lag))
}

pub fn extract_features(raw: &Spectrogram) -> FeaturePair {
    extract_features_with(raw, &FeatureConfig::default())
}

pub fn extract_features_with(raw: &Spectrogram, config: &FeatureConfig) -> FeaturePair {
    FeaturePair::new(superflux_onsets_with(raw, config), normalize_bins(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(rows: Vec<Vec<f64>>) -> Spectrogram {
        let n = rows.len() as u8;
        Spectrogram::from_rows(rows, 50.0, (21..21 + n).collect())
    }

    #[test]
    fn normalize_examples() {
        let m = normalize_bins(&spec(vec![vec![0.2, 0.4, 0.1], vec![0.0; 3], vec![1.0, 0.5, 0.0]]));
        assert_eq!(m.row(0), &[0.5, 1.0, 0.25]);
        assert_eq!(m.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(m.row(2), &[1.0, 0.5, 0.0]);
    }

    #[test]
    fn sub_epsilon_rows_are_zeroed() {
        let m = normalize_bins(&spec(vec![vec![1e-13, 0.0]]));
        assert_eq!(m.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn constant_columns_have_no_onsets() {
        let col = [0.3, 0.9, 0.1, 0.5];
        let rows = col.iter().map(|&v| vec![v; 6]).collect();
        let on = superflux_onsets(&spec(rows));
        assert!(on.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_trace() {
        let mut rows = vec![vec![0.0; 20]; 88];
        rows[40][10] = 0.8;
        let raw = spec(rows);
        let pre = superflux_raw(&raw, 1);
        for b in 0..88 {
            for t in 0..20 {
                let expect = if (b, t) == (40, 10) { 0.8 } else { 0.0 };
                assert_eq!(pre.get(b, t), expect, "band {b} frame {t}");
            }
        }
        let on = superflux_onsets(&raw);
        assert_eq!(on.get(40, 10), 1.0);
    }

    #[test]
    fn neighbour_energy_suppresses_onset() {
        // band 1 rises from 0.5 to 0.7 but band 0 held 0.9 the frame before
        let raw = spec(vec![vec![0.9, 0.9], vec![0.5, 0.7], vec![0.0, 0.0]]);
        let pre = superflux_raw(&raw, 1);
        assert_eq!(pre.get(1, 1), 0.0);
        // band 2 has no neighbour above it; truncated window covers rows 1..=2
        let raw = spec(vec![vec![0.0, 0.0], vec![0.2, 0.0], vec![0.1, 0.5]]);
        assert!((superflux_raw(&raw, 1).get(2, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn decreasing_rows_have_no_onsets() {
        let rows = (0..5)
            .map(|b| (0..8).map(|t| (10 - t) as f64 * (b + 1) as f64).collect())
            .collect();
        assert!(superflux_onsets(&spec(rows)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_input_zero_features() {
        let raw = Spectrogram::zeros(10, 50.0, (21..=108).collect());
        let f = extract_features(&raw);
        assert!(f.onsets.values().iter().all(|&v| v == 0.0));
        assert!(f.spec.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn longer_lag() {
        let raw = spec(vec![vec![0.0, 0.0, 0.5, 1.0]]);
        let pre = superflux_raw(&raw, 2);
        assert_eq!(pre.row(0), &[0.0, 0.0, 0.5, 1.0]);
    }

    fn arb_matrix() -> impl Strategy<Value = Spectrogram> {
        (1usize..6, 1usize..12)
            .prop_flat_map(|(b, t)| prop::collection::vec(prop::collection::vec(0.0f64..10.0, t), b).prop_map(spec))
    }

    proptest! {
        #[test]
        fn onset_nonneg_first_column_zero(m in arb_matrix()) {
            let f = extract_features(&m);
            prop_assert!(f.onsets.same_shape(&m) && f.spec.same_shape(&m));
            for b in 0..m.num_bands() {
                prop_assert_eq!(f.onsets.get(b, 0), 0.0);
                prop_assert!(f.onsets.row(b).iter().all(|&v| (0.0..=1.0).contains(&v)));
                prop_assert!(f.spec.row(b).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }

        #[test]
        fn normalize_idempotent_and_scale_invariant(m in arb_matrix(), alpha in 0.01f64..100.0) {
            let once = normalize_bins(&m);
            prop_assert_eq!(&normalize_bins(&once), &once);
            let scaled = normalize_bins(&m.scaled(alpha));
            for (a, b) in scaled.values().iter().zip(once.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for (b, row) in once.rows().enumerate() {
                let max = row.iter().copied().fold(0.0, f64::max);
                let raw_max = m.row(b).iter().copied().fold(0.0, f64::max);
                if raw_max > SILENT_BIN_EPS { prop_assert_eq!(max, 1.0); } else { prop_assert_eq!(max, 0.0); }
            }
        }
    }
}
