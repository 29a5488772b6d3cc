//! Tier-2 Kohonen self-organizing map on a rectangular lattice.
//!
//! Nodes are indexed row-major (`row·cols + col`). Training presents every
//! datum once per epoch in a seeded shuffled order and pulls every node
//! toward it with a Gaussian neighborhood around the best-matching unit.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SomLattice {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    /// `rows·cols` weight vectors, row-major.
    pub weights: Vec<Vec<f64>>,
}

impl SomLattice {
    pub fn new(rows: usize, cols: usize, weights: Vec<Vec<f64>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "lattice must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: weights.len(),
            });
        }
        let dim = weights[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("weight vectors must be non-empty".into()));
        }
        for w in &weights {
            if w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: w.len(),
                });
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite lattice weight".into()));
            }
        }
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn position(&self, node: usize) -> (usize, usize) {
        (node / self.cols, node % self.cols)
    }

    /// Euclidean distance between two nodes' lattice coordinates.
    pub fn lattice_distance(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.position(a);
        let (rb, cb) = self.position(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        (dr * dr + dc * dc).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub eta0: f64,
    pub eta_f: f64,
    /// Defaults to `max(rows, cols) / 2`.
    pub sigma0: Option<f64>,
    pub sigma_f: f64,
    pub seed: u64,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            epochs: 50,
            eta0: 0.5,
            eta_f: 0.01,
            sigma0: None,
            sigma_f: 0.5,
            seed: 0,
        }
    }
}

impl SomConfig {
    pub fn sigma0(&self) -> f64 {
        self.sigma0
            .unwrap_or(self.rows.max(self.cols) as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let s0 = self.sigma0();
        if self.rows == 0 || self.cols == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "som rows, cols and epochs must be at least 1".into(),
            ));
        }
        if !(1.0 >= self.eta0 && self.eta0 >= self.eta_f && self.eta_f > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need 1 >= eta0 >= eta_f > 0, got {} and {}",
                self.eta0, self.eta_f
            )));
        }
        if !(s0 >= self.sigma_f && self.sigma_f > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need sigma0 >= sigma_f > 0, got {s0} and {}",
                self.sigma_f
            )));
        }
        Ok(())
    }

    /// Learning rate and neighborhood radius at epoch `t` of `epochs`.
    pub fn schedule(&self, t: usize) -> (f64, f64) {
        let frac = t as f64 / self.epochs as f64;
        let eta = self.eta0 * (self.eta_f / self.eta0).powf(frac);
        let s0 = self.sigma0();
        let sigma = s0 * (self.sigma_f / s0).powf(frac);
        (eta, sigma)
    }
}

fn check_data(dim: usize, data: &[Vec<f64>]) -> Result<()> {
    for x in data {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
    }
    Ok(())
}

/// Weights uniform inside the per-dimension bounding box of `data`.
pub fn init_som(rows: usize, cols: usize, dim: usize, data: &[Vec<f64>], seed: u64) -> Result<SomLattice> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot initialize a SOM from empty data".into()));
    }
    check_data(dim, data)?;
    let lo: Vec<f64> = (0..dim)
        .map(|d| data.iter().map(|x| x[d]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|d| data.iter().map(|x| x[d]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut rng = SplitMix64::new(seed);
    let weights = (0..rows * cols)
        .map(|_| (0..dim).map(|d| rng.uniform(lo[d], hi[d])).collect())
        .collect();
    SomLattice::new(rows, cols, weights)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest node in squared Euclidean distance; ties go to the lowest index.
pub fn find_bmu(som: &SomLattice, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, w) in som.weights.iter().enumerate() {
        let d = sq_dist(w, x);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Gaussian kernel `exp(−d²/2σ²)`.
pub fn neighborhood_weight(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

pub fn train_som(som: &SomLattice, data: &[Vec<f64>], cfg: &SomConfig) -> Result<SomLattice> {
    cfg.validate()?;
    check_data(som.dim, data)?;
    let mut out = som.clone();
    let mut rng = SplitMix64::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    // lattice distances never change; tabulate them once
    let n = out.len();
    let dist: Vec<f64> = (0..n * n)
        .map(|k| out.lattice_distance(k / n, k % n))
        .collect();

    for t in 0..cfg.epochs {
        let (eta, sigma) = cfg.schedule(t);
        rng.shuffle(&mut order);
        for &s in &order {
            let x = &data[s];
            let bmu = find_bmu(&out, x);
            for (i, w) in out.weights.iter_mut().enumerate() {
                let rate = eta * neighborhood_weight(dist[bmu * n + i], sigma);
                for (wd, xd) in w.iter_mut().zip(x) {
                    *wd += rate * (xd - *wd);
                }
            }
        }
    }
    Ok(out)
}

/// Mean Euclidean distance from each datum to its BMU.
pub fn quantization_error(som: &SomLattice, data: &[Vec<f64>]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter()
        .map(|x| sq_dist(&som.weights[find_bmu(som, x)], x).sqrt())
        .sum::<f64>()
        / data.len() as f64
}

/// Count of data vectors per BMU, as a `rows × cols` matrix.
pub fn hit_map(som: &SomLattice, data: &[Vec<f64>]) -> Vec<Vec<u64>> {
    let mut hits = vec![vec![0u64; som.cols]; som.rows];
    for x in data {
        let (r, c) = som.position(find_bmu(som, x));
        hits[r][c] += 1;
    }
    hits
}

/// Weight component `c` of every node, as a `rows × cols` matrix.
pub fn component_plane(som: &SomLattice, c: usize) -> Result<Vec<Vec<f64>>> {
    if c >= som.dim {
        return Err(Error::InvalidArgument(format!(
            "component {c} out of range for dimension {}",
            som.dim
        )));
    }
    Ok((0..som.rows)
        .map(|r| (0..som.cols).map(|k| som.weights[som.node(r, k)][c]).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePeak {
    pub row: usize,
    pub col: usize,
    /// Sum of the feature values of all data mapped to this node.
    pub score: f64,
    pub hits: u64,
}

/// Top `k` nodes by summed feature value of the data they win, ties by
/// row-major index. Returns fewer than `k` when the lattice is smaller.
pub fn feature_peaks(som: &SomLattice, data: &[Vec<f64>], features: &[f64], k: usize) -> Result<Vec<FeaturePeak>> {
    if data.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: features.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut score = vec![0.0; som.len()];
    let mut hits = vec![0u64; som.len()];
    for (x, f) in data.iter().zip(features) {
        let b = find_bmu(som, x);
        score[b] += f;
        hits[b] += 1;
    }
    let mut nodes: Vec<usize> = (0..som.len()).collect();
    nodes.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    Ok(nodes
        .into_iter()
        .take(k)
        .map(|n| {
            let (row, col) = som.position(n);
            FeaturePeak {
                row,
                col,
                score: score[n],
                hits: hits[n],
            }
        })
        .collect())
}
