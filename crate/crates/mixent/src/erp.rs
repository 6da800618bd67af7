//! Mutual information of a binary-input channel from labeled multichannel
//! recordings.
//!
//! The pipeline: group channels into regions of interest (ROIs), reduce each
//! block of samples to per-ROI time series, pool the per-label samples of a
//! trial into class-conditional Gaussian estimates `(C1, C2)`, and compute
//!
//! ```text
//! I(X; Y) = h(Y) - h(Y|X)        [bits]
//! h(Y|X)  = 1/4 [ log2((2 pi e)^n |C1|) + log2((2 pi e)^n |C2|) ]
//! ```
//!
//! where `h(Y)` is the entropy of the equal-weight two-component mixture of
//! the class conditionals, computed by a configurable estimator. With a
//! uniform binary input the MI can never exceed 1 bit; estimates are clamped
//! to `[0, 1]` and the raw value is kept for diagnostics.

use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapCi;
use crate::error::{Error, Result};
use crate::gmm::{CovarianceMatrix, GaussianComponent, GaussianMixture, TaylorOrder};
use crate::oracle::{entropy_monte_carlo, entropy_quadrature, McSpec, QuadratureSpec};
use crate::taylor::{entropy_taylor, entropy_with_splitting, gaussian_entropy_nats, SplitSchedule};

const LN_2: f64 = std::f64::consts::LN_2;

/// Ridge factor applied when a sample covariance is not positive definite.
const RIDGE_DELTA: f64 = 1e-8;

/// Class label of a block: `x1` is the reference class, `x2` the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    X1,
    X2,
}

impl Label {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "x1" => Ok(Label::X1),
            "x2" => Ok(Label::X2),
            other => Err(Error::Parse(format!(
                "label must be 'x1' or 'x2', got '{other}'"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::X1 => "x1",
            Label::X2 => "x2",
        }
    }
}

/// Ordered mapping from named regions of interest to channel indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoiMap {
    pub rois: Vec<Roi>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Roi {
    pub name: String,
    pub channels: Vec<usize>,
}

impl RoiMap {
    pub fn new(rois: Vec<Roi>) -> Result<Self> {
        if rois.is_empty() {
            return Err(Error::InvalidConfig("ROI map has no regions".into()));
        }
        let mut seen = HashSet::new();
        for roi in &rois {
            if roi.channels.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "ROI '{}' has no channels",
                    roi.name
                )));
            }
            for &ch in &roi.channels {
                if !seen.insert(ch) {
                    return Err(Error::InvalidConfig(format!(
                        "channel {ch} appears in more than one ROI"
                    )));
                }
            }
        }
        Ok(Self { rois })
    }

    /// Number of regions (the dimensionality of the joint vectors).
    pub fn len(&self) -> usize {
        self.rois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rois.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RoiMap =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("roi map json: {e}")))?;
        Self::new(raw.rois)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("roi map serialization")
    }
}

/// One stationary block of constant-label samples (rows are time samples,
/// columns are channels).
#[derive(Debug, Clone)]
pub struct Block {
    pub id: String,
    pub label: Label,
    pub samples: DMatrix<f64>,
    pub sample_rate_hz: f64,
}

/// All blocks recorded for one trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub id: String,
    pub blocks: Vec<Block>,
}

/// Labeled multichannel dataset.
#[derive(Debug, Clone)]
pub struct ErpDataset {
    pub trials: Vec<Trial>,
}

impl ErpDataset {
    /// Validates that every trial contains both labels and rectangular,
    /// consistently sized sample matrices.
    pub fn new(trials: Vec<Trial>) -> Result<Self> {
        for trial in &trials {
            let mut labels = HashSet::new();
            let mut channels: Option<usize> = None;
            for block in &trial.blocks {
                labels.insert(block.label);
                let c = block.samples.ncols();
                match channels {
                    None => channels = Some(c),
                    Some(expected) if expected != c => {
                        return Err(Error::DimensionMismatch {
                            expected,
                            got: c,
                        })
                    }
                    _ => {}
                }
            }
            if labels.len() != 2 {
                return Err(Error::Parse(format!(
                    "trial '{}' must contain both labels",
                    trial.id
                )));
            }
        }
        Ok(Self { trials })
    }

    pub fn channel_count(&self) -> usize {
        self.trials
            .first()
            .and_then(|t| t.blocks.first())
            .map(|b| b.samples.ncols())
            .unwrap_or(0)
    }
}

/// Class-conditional Gaussian estimates over the ROI vectors.
#[derive(Debug, Clone)]
pub struct ClassConditionals {
    pub c1: CovarianceMatrix,
    pub c2: CovarianceMatrix,
    pub mean1: DVector<f64>,
    pub mean2: DVector<f64>,
}

impl ClassConditionals {
    pub fn dim(&self) -> usize {
        self.c1.dim()
    }
}

/// Reduce a block to per-ROI time series: each ROI value is the arithmetic
/// mean over its channels at that time sample.
pub fn reduce_to_rois(block: &Block, map: &RoiMap) -> Result<DMatrix<f64>> {
    let channels = block.samples.ncols();
    let t = block.samples.nrows();
    let n = map.len();
    let mut out = DMatrix::<f64>::zeros(t, n);
    for (ri, roi) in map.rois.iter().enumerate() {
        for &ch in &roi.channels {
            if ch >= channels {
                return Err(Error::InvalidConfig(format!(
                    "ROI '{}' references channel {ch}, block has {channels}",
                    roi.name
                )));
            }
        }
        let inv = 1.0 / roi.channels.len() as f64;
        for row in 0..t {
            let mut acc = 0.0;
            for &ch in &roi.channels {
                acc += block.samples[(row, ch)];
            }
            out[(row, ri)] = acc * inv;
        }
    }
    Ok(out)
}

/// Options for [`estimate_class_conditionals`].
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// Force zero class means instead of estimating them.
    pub zero_mean: bool,
    /// Re-estimate the per-ROI variances (the covariance diagonal) by pooling
    /// all electrodes of a ROI as independent realizations, keeping the
    /// correlation structure of the ROI-mean estimate.
    pub pooled_electrode_variance: bool,
}

/// Pooled per-label sample means and unbiased covariances over a trial.
///
/// Requires at least two blocks per label and more pooled samples than the
/// ROI dimension. A covariance that fails the positive-definite check gets a
/// ridge `delta * trace(C)/n * I` with `delta = 1e-8`; if it still fails the
/// estimation reports a numeric error.
pub fn estimate_class_conditionals(
    trial: &Trial,
    map: &RoiMap,
    opts: EstimateOptions,
) -> Result<ClassConditionals> {
    let n = map.len();
    let mut pooled: [Vec<DMatrix<f64>>; 2] = [Vec::new(), Vec::new()];
    for block in &trial.blocks {
        let reduced = reduce_to_rois(block, map)?;
        let slot = match block.label {
            Label::X1 => 0,
            Label::X2 => 1,
        };
        pooled[slot].push(reduced);
    }
    for (slot, label) in [(0usize, "x1"), (1, "x2")] {
        if pooled[slot].len() < 2 {
            return Err(Error::InsufficientSamples(format!(
                "trial '{}' has {} block(s) with label {label}, need at least 2",
                trial.id,
                pooled[slot].len()
            )));
        }
    }

    let mut results: Vec<(DVector<f64>, CovarianceMatrix)> = Vec::with_capacity(2);
    for (slot, blocks) in pooled.iter().enumerate() {
        let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
        if rows <= n {
            return Err(Error::InsufficientSamples(format!(
                "trial '{}' label {} has {rows} samples for dimension {n}",
                trial.id,
                if slot == 0 { "x1" } else { "x2" },
            )));
        }
        let mut mean = DVector::<f64>::zeros(n);
        if !opts.zero_mean {
            for b in blocks {
                for r in 0..b.nrows() {
                    for c in 0..n {
                        mean[c] += b[(r, c)];
                    }
                }
            }
            mean /= rows as f64;
        }
        let mut cov = DMatrix::<f64>::zeros(n, n);
        for b in blocks {
            for r in 0..b.nrows() {
                for i in 0..n {
                    let di = b[(r, i)] - mean[i];
                    for j in i..n {
                        cov[(i, j)] += di * (b[(r, j)] - mean[j]);
                    }
                }
            }
        }
        // unbiased: divisor N-1 with estimated mean, N with the known zero mean
        let divisor = if opts.zero_mean { rows } else { rows - 1 } as f64;
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] /= divisor;
                cov[(j, i)] = cov[(i, j)];
            }
        }

        if opts.pooled_electrode_variance {
            apply_pooled_variances(&mut cov, trial, map, slot, opts.zero_mean)?;
        }

        let cov = regularize_spd(cov)?;
        results.push((mean, cov));
    }

    let (mean2, c2) = results.pop().unwrap();
    let (mean1, c1) = results.pop().unwrap();
    Ok(ClassConditionals {
        c1,
        c2,
        mean1,
        mean2,
    })
}

/// Replace the diagonal of `cov` with variances estimated by pooling each
/// ROI's electrodes as independent realizations, rescaling off-diagonals to
/// preserve the correlation structure.
fn apply_pooled_variances(
    cov: &mut DMatrix<f64>,
    trial: &Trial,
    map: &RoiMap,
    slot: usize,
    zero_mean: bool,
) -> Result<()> {
    let n = map.len();
    let want = if slot == 0 { Label::X1 } else { Label::X2 };
    let mut variances = vec![0.0f64; n];
    for (ri, roi) in map.rois.iter().enumerate() {
        let mut acc = 0.0;
        let mut sum = 0.0;
        let mut count = 0usize;
        for block in trial.blocks.iter().filter(|b| b.label == want) {
            for r in 0..block.samples.nrows() {
                for &ch in &roi.channels {
                    sum += block.samples[(r, ch)];
                    count += 1;
                }
            }
        }
        let mean = if zero_mean || count == 0 {
            0.0
        } else {
            sum / count as f64
        };
        for block in trial.blocks.iter().filter(|b| b.label == want) {
            for r in 0..block.samples.nrows() {
                for &ch in &roi.channels {
                    let d = block.samples[(r, ch)] - mean;
                    acc += d * d;
                }
            }
        }
        if count < 2 {
            return Err(Error::InsufficientSamples(
                "pooled variance needs at least 2 electrode samples".into(),
            ));
        }
        variances[ri] = acc / (count - 1) as f64;
    }
    let old_diag: Vec<f64> = (0..n).map(|i| cov[(i, i)]).collect();
    for i in 0..n {
        for j in 0..n {
            let scale = (variances[i] / old_diag[i]).sqrt() * (variances[j] / old_diag[j]).sqrt();
            cov[(i, j)] *= scale;
        }
    }
    Ok(())
}

fn regularize_spd(cov: DMatrix<f64>) -> Result<CovarianceMatrix> {
    match CovarianceMatrix::new(cov.clone()) {
        Ok(c) => Ok(c),
        Err(Error::NotPositiveDefinite) => {
            let n = cov.nrows();
            let ridge = RIDGE_DELTA * cov.trace() / n as f64;
            let patched = cov + DMatrix::<f64>::identity(n, n) * ridge;
            CovarianceMatrix::new(patched).map_err(|_| {
                Error::Numeric("covariance still singular after ridge regularization".into())
            })
        }
        Err(e) => Err(e),
    }
}

/// Estimator used for the mixture output entropy `h(Y)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MiEstimator {
    Taylor {
        order: TaylorOrder,
    },
    TaylorSplit {
        order: TaylorOrder,
        schedule: SplitSchedule,
    },
    Quadrature,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

/// Conditional entropy `h(Y|X)` in bits from the class conditionals.
pub fn conditional_entropy_bits(cc: &ClassConditionals) -> f64 {
    0.5 * (gaussian_entropy_nats(&cc.c1) + gaussian_entropy_nats(&cc.c2)) / LN_2
}

/// Equal-weight two-component mixture of the class conditionals.
pub fn output_mixture(cc: &ClassConditionals) -> Result<GaussianMixture> {
    GaussianMixture::new(vec![
        GaussianComponent::new(0.5, cc.mean1.clone(), cc.c1.clone())?,
        GaussianComponent::new(0.5, cc.mean2.clone(), cc.c2.clone())?,
    ])
}

/// Output entropy `h(Y)` in bits via the chosen estimator.
pub fn output_entropy_bits(cc: &ClassConditionals, estimator: &MiEstimator) -> Result<f64> {
    let gmm = output_mixture(cc)?;
    let nats = match estimator {
        MiEstimator::Taylor { order } => entropy_taylor(&gmm, *order)?.nats,
        MiEstimator::TaylorSplit { order, schedule } => {
            entropy_with_splitting(&gmm, *order, schedule)?.nats
        }
        MiEstimator::Quadrature => entropy_quadrature(&gmm, &QuadratureSpec::default())?.nats,
        MiEstimator::MonteCarlo { samples, seed } => entropy_monte_carlo(
            &gmm,
            &McSpec {
                samples: *samples,
                seed: *seed,
            },
        )?
        .nats,
    };
    Ok(nats / LN_2)
}

/// Mutual information in bits, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MiValue {
    pub bits: f64,
    /// Estimate before clamping, kept for diagnostics.
    pub raw_bits: f64,
}

/// `I(X;Y) = h(Y) - h(Y|X)` in bits for a binary equiprobable input.
pub fn mutual_information_bits(cc: &ClassConditionals, estimator: &MiEstimator) -> Result<MiValue> {
    let raw = output_entropy_bits(cc, estimator)? - conditional_entropy_bits(cc);
    Ok(MiValue {
        bits: raw.clamp(0.0, 1.0),
        raw_bits: raw,
    })
}

/// Per-trial MI outcome: either a value or the error message for that trial.
#[derive(Debug, Clone)]
pub struct TrialMi {
    pub trial_id: String,
    pub outcome: std::result::Result<MiValue, String>,
}

/// Independent MI estimate per trial, input order preserved. Per-trial
/// failures are reported without aborting the batch.
pub fn per_trial_mi(
    dataset: &ErpDataset,
    map: &RoiMap,
    estimator: &MiEstimator,
    opts: EstimateOptions,
) -> Vec<TrialMi> {
    dataset
        .trials
        .iter()
        .map(|trial| {
            let outcome = estimate_class_conditionals(trial, map, opts)
                .and_then(|cc| mutual_information_bits(&cc, estimator))
                .map_err(|e| e.to_string());
            TrialMi {
                trial_id: trial.id.clone(),
                outcome,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Report JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PerTrialJson {
    pub trial_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mi_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_mi_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CiJson {
    pub low_bits: f64,
    pub high_bits: f64,
    pub degenerate: bool,
}

/// Full MI report: per-trial values, median, optional bootstrap CI, and the
/// configuration that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct MiReport {
    pub version: String,
    pub estimator: MiEstimator,
    pub options: EstimateOptions,
    pub per_trial: Vec<PerTrialJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<CiJson>,
}

impl MiReport {
    pub fn assemble(
        results: &[TrialMi],
        estimator: &MiEstimator,
        opts: EstimateOptions,
        ci: Option<BootstrapCi>,
    ) -> Self {
        let per_trial = results
            .iter()
            .map(|r| match &r.outcome {
                Ok(v) => PerTrialJson {
                    trial_id: r.trial_id.clone(),
                    mi_bits: Some(v.bits),
                    raw_mi_bits: Some(v.raw_bits),
                    error: None,
                },
                Err(e) => PerTrialJson {
                    trial_id: r.trial_id.clone(),
                    mi_bits: None,
                    raw_mi_bits: None,
                    error: Some(e.clone()),
                },
            })
            .collect();
        let values: Vec<f64> = results
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|v| v.bits))
            .collect();
        let median_bits = crate::bootstrap::median(&values).ok();
        MiReport {
            version: crate::VERSION.to_string(),
            estimator: *estimator,
            options: opts,
            per_trial,
            median_bits,
            ci: ci.map(|c| CiJson {
                low_bits: c.ci_low,
                high_bits: c.ci_high,
                degenerate: c.degenerate,
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

// ---------------------------------------------------------------------------
// Dataset CSV format
// ---------------------------------------------------------------------------

/// Write the dataset as CSV with columns
/// `trial_id,block_id,label,t,ch_0,...,ch_{m-1}`; `t` is the time in seconds
/// (sample index over the block's sample rate).
pub fn write_dataset_csv<W: Write>(dataset: &ErpDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let channels = dataset.channel_count();
    let mut header = vec![
        "trial_id".to_string(),
        "block_id".to_string(),
        "label".to_string(),
        "t".to_string(),
    ];
    header.extend((0..channels).map(|i| format!("ch_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(channels + 4);
    for trial in &dataset.trials {
        for block in &trial.blocks {
            let dt = if block.sample_rate_hz > 0.0 {
                1.0 / block.sample_rate_hz
            } else {
                1.0
            };
            for r in 0..block.samples.nrows() {
                record.clear();
                record.push(trial.id.clone());
                record.push(block.id.clone());
                record.push(block.label.as_str().to_string());
                record.push(format_f64(r as f64 * dt));
                for c in 0..channels {
                    record.push(format_f64(block.samples[(r, c)]));
                }
                w.write_record(&record).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn format_f64(v: f64) -> String {
    // shortest round-trip formatting keeps the CSV bit-exact on re-ingestion
    let mut buf = ryu_like(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(v: f64) -> String {
    format!("{v}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Read a dataset written by [`write_dataset_csv`]. Rows of one block must be
/// contiguous; the sample rate is inferred from the `t` spacing.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<ErpDataset> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 5 {
        return Err(Error::Parse(
            "dataset csv needs trial_id,block_id,label,t,ch_* columns".into(),
        ));
    }
    for (i, expect) in ["trial_id", "block_id", "label", "t"].iter().enumerate() {
        if headers.get(i) != Some(expect) {
            return Err(Error::Parse(format!(
                "column {i} must be '{expect}', got '{}'",
                headers.get(i).unwrap_or("")
            )));
        }
    }
    let channels = headers.len() - 4;

    struct RawBlock {
        trial: String,
        id: String,
        label: Label,
        times: Vec<f64>,
        rows: Vec<Vec<f64>>,
    }
    let mut blocks: Vec<RawBlock> = Vec::new();
    let mut seen_blocks: HashSet<(String, String)> = HashSet::new();

    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != channels + 4 {
            return Err(Error::Parse(format!(
                "row {line}: expected {} fields, got {}",
                channels + 4,
                record.len()
            )));
        }
        let trial = record[0].to_string();
        let block_id = record[1].to_string();
        let label = Label::parse(&record[2])?;
        let t: f64 = record[3]
            .parse()
            .map_err(|_| Error::Parse(format!("row {line}: bad time '{}'", &record[3])))?;
        let mut row = Vec::with_capacity(channels);
        for c in 0..channels {
            let v: f64 = record[4 + c].parse().map_err(|_| {
                Error::Parse(format!("row {line}: bad sample '{}'", &record[4 + c]))
            })?;
            row.push(v);
        }

        let matches_last = blocks
            .last()
            .map(|b| b.trial == trial && b.id == block_id)
            .unwrap_or(false);
        if matches_last {
            let b = blocks.last_mut().unwrap();
            if b.label != label {
                return Err(Error::Parse(format!(
                    "block '{block_id}' of trial '{trial}' changes label mid-block"
                )));
            }
            b.times.push(t);
            b.rows.push(row);
        } else {
            if !seen_blocks.insert((trial.clone(), block_id.clone())) {
                return Err(Error::Parse(format!(
                    "rows of block '{block_id}' in trial '{trial}' are not contiguous"
                )));
            }
            blocks.push(RawBlock {
                trial,
                id: block_id,
                label,
                times: vec![t],
                rows: vec![row],
            });
        }
    }

    let mut trials: Vec<Trial> = Vec::new();
    for raw in blocks {
        let t = raw.rows.len();
        let rate = if raw.times.len() >= 2 && raw.times[1] > raw.times[0] {
            1.0 / (raw.times[1] - raw.times[0])
        } else {
            1.0
        };
        let samples = DMatrix::from_fn(t, channels, |r, c| raw.rows[r][c]);
        let block = Block {
            id: raw.id,
            label: raw.label,
            samples,
            sample_rate_hz: rate,
        };
        match trials.iter_mut().find(|tr| tr.id == raw.trial) {
            Some(tr) => tr.blocks.push(block),
            None => trials.push(Trial {
                id: raw.trial,
                blocks: vec![block],
            }),
        }
    }
    ErpDataset::new(trials)
}
