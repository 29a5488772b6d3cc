//! Supervised samples flattened from a snapshot, the seeded 70/15/15 split,
//! z-score normalization and the high-Reynolds focus filter.

use serde::{Deserialize, Serialize};

use crate::field::FlowSnapshot;
use crate::nsops::ScalarField;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// `(x, y, z, re, pr, T, p)`
pub const INPUT_DIM: usize = 7;
/// `(u, v, w)`
pub const TARGET_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Flat grid index of the node this sample came from.
    pub node: usize,
    pub input: [f64; INPUT_DIM],
    pub target: [f64; TARGET_DIM],
}

/// One sample per node in storage order (x fastest).
pub fn build_samples(s: &FlowSnapshot) -> Vec<Sample> {
    (0..s.grid.len())
        .map(|n| {
            let [x, y, z] = s.grid.position(n);
            Sample {
                node: n,
                input: [x, y, z, s.re, s.pr, s.t_field[n], s.p[n]],
                target: [s.u[n], s.v[n], s.w[n]],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    /// `(train, validation, test)` sizes: floor, floor, remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon absorbs ratios like 0.7 that sit just below their decimal value
        let take = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = take(self.train).min(n);
        let val = take(self.validation).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Shuffle `0..n` with the seeded SplitMix64 Fisher-Yates, then cut it into
/// train, validation and test blocks.
pub fn split(n: usize, seed: u64, ratios: SplitRatios) -> Result<Partition> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} samples into three non-empty partitions"
        )));
    }
    let parts = [ratios.train, ratios.validation, ratios.test];
    if parts.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {parts:?} must be non-negative and sum to 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let (n_train, n_val, _) = ratios.sizes(n);
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok(Partition {
        train: order,
        validation,
        test,
    })
}

/// Per-input-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; INPUT_DIM],
    pub std: [f64; INPUT_DIM],
}

impl Normalizer {
    /// Population statistics over `inputs`. A dimension whose deviation is
    /// zero (up to rounding) gets deviation 1 so it normalizes to zero.
    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a [f64; INPUT_DIM]>) -> Result<Self> {
        let rows: Vec<&[f64; INPUT_DIM]> = inputs.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::InvalidArgument("normalizer needs at least one sample".into()));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; INPUT_DIM];
        let mut std = [0.0; INPUT_DIM];
        for d in 0..INPUT_DIM {
            let first = rows[0][d];
            if rows.iter().all(|r| r[d] == first) {
                mean[d] = first;
                std[d] = 1.0;
                continue;
            }
            mean[d] = rows.iter().map(|r| r[d]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            std[d] = if sd <= 1e-12 * mean[d].abs().max(1.0) { 1.0 } else { sd };
        }
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, x: &[f64; INPUT_DIM]) -> [f64; INPUT_DIM] {
        std::array::from_fn(|d| (x[d] - self.mean[d]) / self.std[d])
    }

    pub fn denormalize(&self, z: &[f64; INPUT_DIM]) -> [f64; INPUT_DIM] {
        std::array::from_fn(|d| z[d] * self.std[d] + self.mean[d])
    }
}

/// Samples with their partition and, once fitted, the normalizer that was
/// applied to the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub partition: Partition,
    pub normalizer: Option<Normalizer>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>, seed: u64) -> Result<Self> {
        Self::with_ratios(samples, seed, SplitRatios::default())
    }

    pub fn with_ratios(samples: Vec<Sample>, seed: u64, ratios: SplitRatios) -> Result<Self> {
        if let Some(bad) = samples
            .iter()
            .position(|s| s.input.iter().chain(&s.target).any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidArgument(format!("sample {bad} has non-finite entries")));
        }
        let partition = split(samples.len(), seed, ratios)?;
        Ok(Self {
            samples,
            partition,
            normalizer: None,
            seed,
            ratios,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<Sample> {
        indices.iter().map(|&i| self.samples[i]).collect()
    }
}

/// Fit z-score statistics on the training partition only and apply them to
/// every sample's inputs. Targets are left untouched.
pub fn fit_and_apply_normalizer(set: &SampleSet) -> Result<SampleSet> {
    if set.normalizer.is_some() {
        return Err(Error::InvalidArgument("sample set is already normalized".into()));
    }
    let norm = Normalizer::fit(set.partition.train.iter().map(|&i| &set.samples[i].input))?;
    let samples = set
        .samples
        .iter()
        .map(|s| Sample {
            input: norm.normalize(&s.input),
            ..*s
        })
        .collect();
    Ok(SampleSet {
        samples,
        partition: set.partition.clone(),
        normalizer: Some(norm),
        seed: set.seed,
        ratios: set.ratios,
    })
}

/// Keep the `ceil(keep_fraction·n)` samples with the largest feature value at
/// their node, ties going to the lower sample index. Retained samples keep
/// their relative order and are re-split with the set's seed.
///
/// Must run before normalization.
pub fn filter_high_re(set: &SampleSet, feature: &ScalarField, keep_fraction: f64) -> Result<SampleSet> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep_fraction = {keep_fraction}, must lie in (0, 1]"
        )));
    }
    if set.normalizer.is_some() {
        return Err(Error::InvalidArgument(
            "filter_high_re must run before normalization".into(),
        ));
    }
    let value = |s: &Sample| -> Result<f64> {
        feature.data.get(s.node).copied().ok_or(Error::DimensionMismatch {
            expected: s.node + 1,
            got: feature.data.len(),
        })
    };
    let n = set.len();
    let keep = ((keep_fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let keep = keep.min(n);

    let mut ranked: Vec<(usize, f64)> = set
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| value(s).map(|v| (i, v)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<usize> = ranked[..keep].iter().map(|&(i, _)| i).collect();
    kept.sort_unstable();

    SampleSet::with_ratios(set.subset(&kept), set.seed, set.ratios)
}
