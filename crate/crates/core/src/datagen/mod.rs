//! Simulators, loaders and the lagged-window datasets models train on.

mod dataset;
mod load;
mod scale;
mod simulate;

pub use dataset::{chronological_split, split_indices, train_val_split, LaggedDataset};
pub use load::{
    load_edge_list, load_replicated_panel, read_panel_csv, read_truth_csv, write_panel_csv, write_truth_csv,
};
pub use scale::{standard_scale, ScalerStats, SCALE_EPS};
pub use simulate::{
    companion_spectral_radius, lorenz96_derivative, lorenz96_truth, rk4_step, simulate_lorenz96, simulate_var,
    var_system, Lorenz96Config, VarConfig, VarSystem, MAX_STABILITY_TRIES, STABILITY_RADIUS,
};

use crate::error::{Error, Result};

/// A multivariate series, rows are time steps (oldest first), columns are
/// series. A panel can hold several independent replicates back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    data: Vec<Vec<f64>>,
    series_names: Vec<String>,
    /// `truth[i][j] = 1` iff series `j` Granger-causes series `i`.
    pub truth: Option<Vec<Vec<u8>>>,
    /// `truth_lags[i][k-1] = 1` iff lag `k` is active for target `i`.
    pub truth_lags: Option<Vec<Vec<u8>>>,
    replicates: Vec<usize>,
    /// Offset of the first row within the panel this one was cut from.
    pub start_sample: usize,
    pub start_seconds: Option<f64>,
}

impl TimeSeriesPanel {
    pub fn new(data: Vec<Vec<f64>>, series_names: Vec<String>) -> Result<Self> {
        let p = series_names.len();
        if p == 0 || data.is_empty() {
            return Err(Error::Usage("a panel needs at least one series and one time step".into()));
        }
        for (t, row) in data.iter().enumerate() {
            if row.len() != p {
                return Err(Error::dim("panel", format!("row {t} has {} values, expected {p}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    op: "panel",
                    detail: format!("row {t} holds non-finite value {v}"),
                });
            }
        }
        let len = data.len();
        Ok(Self {
            data,
            series_names,
            truth: None,
            truth_lags: None,
            replicates: vec![len],
            start_sample: 0,
            start_seconds: None,
        })
    }

    /// Names `X0..X{p-1}`.
    pub fn default_names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("X{i}")).collect()
    }

    pub fn with_truth(mut self, truth: Vec<Vec<u8>>) -> Result<Self> {
        let p = self.num_series();
        if truth.len() != p || truth.iter().any(|r| r.len() != p) {
            return Err(Error::dim("panel", format!("truth must be {p}x{p}")));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Declares the panel as consecutive replicates of the given lengths.
    pub fn with_replicates(mut self, lengths: Vec<usize>) -> Result<Self> {
        if lengths.contains(&0) || lengths.iter().sum::<usize>() != self.data.len() {
            return Err(Error::Usage(format!(
                "replicate lengths {lengths:?} do not cover {} rows",
                self.data.len()
            )));
        }
        self.replicates = lengths;
        Ok(self)
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn series_names(&self) -> &[String] {
        &self.series_names
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_series(&self) -> usize {
        self.series_names.len()
    }

    pub fn replicate_lengths(&self) -> &[usize] {
        &self.replicates
    }

    /// Row ranges of the replicates.
    pub fn replicate_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.replicates
            .iter()
            .map(|&len| {
                let r = start..start + len;
                start += len;
                r
            })
            .collect()
    }

    /// Overlapping windows of `window_len` rows every
    /// `floor(window_len * (1 - overlap))` rows; a trailing partial window is
    /// dropped. `sampling_rate` (Hz) fills in `start_seconds`.
    pub fn sliding_windows(&self, window_len: usize, overlap: f64, sampling_rate: Option<f64>) -> Result<Vec<Self>> {
        sliding_windows(self, window_len, overlap, sampling_rate)
    }
}

pub fn sliding_windows(
    panel: &TimeSeriesPanel,
    window_len: usize,
    overlap: f64,
    sampling_rate: Option<f64>,
) -> Result<Vec<TimeSeriesPanel>> {
    if window_len == 0 || window_len > panel.len() {
        return Err(Error::Usage(format!(
            "window length {window_len} must lie in 1..={} (panel length)",
            panel.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Usage(format!("overlap fraction must lie in [0, 1), got {overlap}")));
    }
    if let Some(rate) = sampling_rate {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Usage(format!("sampling rate must be positive, got {rate}")));
        }
    }
    let stride = ((window_len as f64 * (1.0 - overlap)).floor() as usize).max(1);
    let count = (panel.len() - window_len) / stride + 1;
    let ranges = panel.replicate_ranges();
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * stride;
        let end = start + window_len;
        let replicates: Vec<usize> = ranges
            .iter()
            .map(|r| r.end.min(end).saturating_sub(r.start.max(start)))
            .filter(|&len| len > 0)
            .collect();
        let start_sample = panel.start_sample + start;
        out.push(TimeSeriesPanel {
            data: panel.data[start..end].to_vec(),
            series_names: panel.series_names.clone(),
            truth: panel.truth.clone(),
            truth_lags: panel.truth_lags.clone(),
            replicates,
            start_sample,
            start_seconds: sampling_rate.map(|r| start_sample as f64 / r),
        });
    }
    Ok(out)
}
