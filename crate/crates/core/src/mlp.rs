//! Tier-1 network: dense tanh layers with a linear output, trained by
//! Levenberg-Marquardt with Bayesian evidence regularization.
//!
//! The trainer minimizes `F = β·E_D + α·E_W`, with `E_D = ½Σe²` over all
//! output residuals and `E_W = ½Σw²` over every weight and bias. Each epoch
//! solves the damped normal equations
//!
//! ```text
//! (β·JᵀJ + (μ+α)·I)·Δ = β·Jᵀe − α·w
//! ```
//!
//! by Cholesky factorization, accepting the step only if `F` decreases and
//! otherwise raising `μ` and retrying. After each accepted step the evidence
//! hyperparameters are re-estimated from the Gauss-Newton Hessian:
//!
//! ```text
//! γ = N_w − 2α·tr(H⁻¹),  H = 2β·JᵀJ + 2α·I
//! α' = γ / 2E_W,         β' = (N − γ) / 2E_D
//! ```
//!
//! Once the fit can no longer be improved, every proposed step is rejected
//! and `μ` climbs until it passes `mu_max`, which ends training with
//! [`StopReason::MuExceeded`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Normalizer, SampleSet, INPUT_DIM, TARGET_DIM};
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Lower bound on the damping parameter after repeated decreases.
pub const MU_FLOOR: f64 = 1e-20;
pub const ALPHA_MAX: f64 = 1e10;
pub const BETA_MIN: f64 = 1e-10;
pub const BETA_MAX: f64 = 1e10;

/// Dense feed-forward network with all parameters in one flat vector.
///
/// Layer `l` stores its weight matrix (`fan_out × fan_in`, row-major)
/// followed by its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

impl MlpModel {
    /// All-zero model.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least input and output layer sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        let n = count_weights(layer_sizes);
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; n],
        })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(layer_sizes)?;
        m.set_params(params)?;
        Ok(m)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub fn num_weights(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Weight and bias slices of layer `l` (0-based over weight layers).
    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off = self.layer_offset(l);
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let w = &self.params[off..off + fan_in * fan_out];
        let b = &self.params[off + fan_in * fan_out..off + (fan_in + 1) * fan_out];
        (w, b)
    }

    fn layer_offset(&self, l: usize) -> usize {
        count_weights(&self.layer_sizes[..=l])
    }

    /// Activations of every layer, input first.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.num_layers() - 1;
        let mut acts = Vec::with_capacity(self.layer_sizes.len());
        acts.push(input.to_vec());
        for l in 0..=last {
            let (w, b) = self.layer(l);
            let prev = &acts[l];
            let fan_in = prev.len();
            let next: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(i, bi)| {
                    let z = bi + w[i * fan_in..(i + 1) * fan_in]
                        .iter()
                        .zip(prev)
                        .map(|(a, x)| a * x)
                        .sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(self.activations(input).pop().unwrap())
    }

    /// `Σ (fan_in+1)·fan_out` parameter derivatives of output `o`, written
    /// into `row` by reverse accumulation over cached activations.
    fn output_gradient(&self, acts: &[Vec<f64>], o: usize, row: &mut [f64]) {
        let mut delta = vec![0.0; self.output_dim()];
        delta[o] = 1.0;
        for l in (0..self.num_layers()).rev() {
            let off = self.layer_offset(l);
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let prev = &acts[l];
            for i in 0..fan_out {
                let d = delta[i];
                let wrow = &mut row[off + i * fan_in..off + (i + 1) * fan_in];
                for (g, x) in wrow.iter_mut().zip(prev) {
                    *g = d * x;
                }
                row[off + fan_in * fan_out + i] = d;
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                delta = (0..fan_in)
                    .map(|j| {
                        let back: f64 = (0..fan_out).map(|i| w[i * fan_in + j] * delta[i]).sum();
                        back * (1.0 - prev[j] * prev[j])
                    })
                    .collect();
            }
        }
    }
}

/// Total parameter count `Σ (fan_in+1)·fan_out`.
pub fn count_weights(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Weights uniform in `±1/√fan_in`, biases zero.
pub fn init_mlp(layer_sizes: &[usize], seed: u64) -> Result<MlpModel> {
    let mut m = MlpModel::zeros(layer_sizes)?;
    let mut rng = SplitMix64::new(seed);
    for l in 0..m.num_layers() {
        let off = m.layer_offset(l);
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        for p in &mut m.params[off..off + fan_in * fan_out] {
            *p = rng.uniform(-bound, bound);
        }
    }
    Ok(m)
}

fn check_batch(m: &MlpModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<()> {
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    for x in inputs {
        if x.len() != m.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: m.input_dim(),
                got: x.len(),
            });
        }
    }
    for t in targets {
        if t.len() != m.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: m.output_dim(),
                got: t.len(),
            });
        }
    }
    Ok(())
}

/// Jacobian `J[r][c] = ∂y_r/∂w_c` and residuals `e = target − output`, rows
/// ordered sample-major, output-component-minor.
pub fn batch_jacobian(
    m: &MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_batch(m, inputs, targets)?;
    let (nw, out) = (m.num_weights(), m.output_dim());
    let mut rows = vec![0.0; inputs.len() * out * nw];
    let mut resid = vec![0.0; inputs.len() * out];
    rows.par_chunks_mut(out * nw)
        .zip(resid.par_chunks_mut(out))
        .zip(inputs.par_iter().zip(targets))
        .for_each(|((jrows, e), (x, t))| {
            let acts = m.activations(x);
            let y = acts.last().unwrap();
            for o in 0..out {
                e[o] = t[o] - y[o];
                m.output_gradient(&acts, o, &mut jrows[o * nw..(o + 1) * nw]);
            }
        });
    Ok((
        DMatrix::from_row_slice(inputs.len() * out, nw, &rows),
        DVector::from_vec(resid),
    ))
}

/// Stacked residuals `target − output` in Jacobian row order.
pub fn residuals(m: &MlpModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_batch(m, inputs, targets)?;
    Ok(inputs
        .par_iter()
        .zip(targets)
        .flat_map_iter(|(x, t)| {
            let y = m.activations(x).pop().unwrap();
            t.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>()
        })
        .collect())
}

/// `½Σe²`
pub fn sum_sq_half(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|x| x * x).sum::<f64>()
}

/// `JᵀJ` and `Jᵀe`, formed once per epoch and reused across damping retries.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub jtj: DMatrix<f64>,
    pub jte: DVector<f64>,
}

impl NormalEquations {
    pub fn new(j: &DMatrix<f64>, e: &DVector<f64>) -> Self {
        Self {
            jtj: j.tr_mul(j),
            jte: j.tr_mul(e),
        }
    }
}

/// One damped, regularized Gauss-Newton proposal; returns the candidate
/// weights `w + Δ`.
///
/// Fails with [`Error::NotPositiveDefinite`] when the Cholesky factorization
/// breaks down, which the trainer answers by raising `mu`.
pub fn lm_br_step(
    weights: &DVector<f64>,
    normal: &NormalEquations,
    mu: f64,
    alpha: f64,
    beta: f64,
) -> Result<DVector<f64>> {
    let n = weights.len();
    if normal.jtj.nrows() != n || normal.jte.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: normal.jtj.nrows(),
        });
    }
    let mut a = &normal.jtj * beta;
    for i in 0..n {
        a[(i, i)] += mu + alpha;
    }
    let rhs = &normal.jte * beta - weights * alpha;
    let chol = Cholesky::new(a).ok_or(Error::NotPositiveDefinite("damped normal matrix"))?;
    let delta = chol.solve(&rhs);
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(Error::NotPositiveDefinite("damped normal matrix"));
    }
    Ok(weights + delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub alpha: f64,
    pub beta: f64,
    /// Effective number of well-determined parameters, in `[0, N_w]`.
    pub gamma: f64,
}

/// Re-estimate `(α, β)` from the Gauss-Newton Hessian at the current point.
///
/// `α' ≤ 1e10` and `β' ∈ [1e-10, 1e10]`; a zero `E_W` or `E_D` saturates the
/// corresponding clamp.
pub fn update_evidence_hyperparams(
    jtj: &DMatrix<f64>,
    e_d: f64,
    e_w: f64,
    alpha: f64,
    beta: f64,
    n_rows: usize,
) -> Result<Evidence> {
    let nw = jtj.nrows();
    if e_d < 0.0 || e_w < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "error terms must be non-negative (E_D = {e_d}, E_W = {e_w})"
        )));
    }
    let gamma = if alpha == 0.0 {
        nw as f64
    } else {
        let mut h = jtj * (2.0 * beta);
        for i in 0..nw {
            h[(i, i)] += 2.0 * alpha;
        }
        let chol = Cholesky::new(h).ok_or(Error::NotPositiveDefinite(
            "evidence Hessian; raise mu and retry",
        ))?;
        let trace = chol.inverse().trace();
        (nw as f64 - 2.0 * alpha * trace).clamp(0.0, nw as f64)
    };
    let alpha_new = if e_w > 0.0 {
        (gamma / (2.0 * e_w)).min(ALPHA_MAX)
    } else {
        ALPHA_MAX
    };
    let beta_new = if e_d > 0.0 {
        ((n_rows as f64 - gamma) / (2.0 * e_d)).clamp(BETA_MIN, BETA_MAX)
    } else {
        BETA_MAX
    };
    Ok(Evidence {
        alpha: alpha_new,
        beta: beta_new,
        gamma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden layer widths; input and output sizes come from the data.
    #[serde(rename = "layers")]
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub mu0: f64,
    pub mu_inc: f64,
    pub mu_dec: f64,
    pub mu_max: f64,
    pub grad_tol: f64,
    pub seed: u64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![10],
            max_epochs: 500,
            mu0: 1e-3,
            mu_inc: 10.0,
            mu_dec: 0.1,
            mu_max: 1e10,
            grad_tol: 1e-7,
            seed: 0,
            alpha0: 0.0,
            beta0: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.mu_inc > 1.0 && 1.0 > self.mu_dec && self.mu_dec > 0.0) {
            return bad(format!(
                "need mu_inc > 1 > mu_dec > 0, got mu_inc = {}, mu_dec = {}",
                self.mu_inc, self.mu_dec
            ));
        }
        if !(self.mu_max > self.mu0 && self.mu0 > 0.0) {
            return bad(format!(
                "need mu_max > mu0 > 0, got mu0 = {}, mu_max = {}",
                self.mu0, self.mu_max
            ));
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.hidden.len() > 10 || self.hidden.contains(&0) {
            return bad(format!(
                "hidden layers must be 0..=10 positive widths, got {:?}",
                self.hidden
            ));
        }
        if !(self.alpha0 >= 0.0 && self.beta0 > 0.0 && self.grad_tol >= 0.0) {
            return bad("need alpha0 >= 0, beta0 > 0, grad_tol >= 0".into());
        }
        Ok(())
    }

    pub fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(&self.hidden);
        sizes.push(output);
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    MuExceeded,
    GradientTol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Damping after this epoch's accept/reject sequence.
    pub mu: f64,
    pub data_error: f64,
    pub weight_error: f64,
    /// `F` at the start of the epoch.
    pub objective_before: f64,
    /// `F` at the end of the epoch, still under the epoch's `α, β`.
    pub objective: f64,
    /// Hyperparameters in force for the next epoch.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub grad_norm: f64,
    /// Mean squared validation residual, when a validation batch was given.
    pub val_mse: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    pub stop_reason: StopReason,
}

impl TrainTrace {
    pub fn epochs_run(&self) -> usize {
        self.records.len()
    }

    pub fn final_mu(&self) -> Option<f64> {
        self.records.last().map(|r| r.mu)
    }
}

/// Inputs and targets as row vectors.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Batch {
    pub fn from_set(set: &SampleSet, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| set.samples[i].input.to_vec()).collect(),
            targets: indices.iter().map(|&i| set.samples[i].target.to_vec()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Initialize a `(7, hidden…, 3)` network from `cfg.seed` and train it on the
/// set's training partition, tracking validation error alongside.
pub fn train_mlp(set: &SampleSet, cfg: &TrainConfig) -> Result<(MlpModel, TrainTrace)> {
    cfg.validate()?;
    if set.partition.train.is_empty() {
        return Err(Error::InvalidArgument("training partition is empty".into()));
    }
    let model = init_mlp(&cfg.layer_sizes(INPUT_DIM, TARGET_DIM), cfg.seed)?;
    let train = Batch::from_set(set, &set.partition.train);
    let val = Batch::from_set(set, &set.partition.validation);
    let val = (!val.is_empty()).then_some(&val);
    train_from(model, &train, val, cfg)
}

/// Levenberg-Marquardt with evidence regularization from a given model.
///
/// Validation error is recorded per epoch but never gates training.
pub fn train_from(
    mut model: MlpModel,
    train: &Batch,
    val: Option<&Batch>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainTrace)> {
    cfg.validate()?;
    check_batch(&model, &train.inputs, &train.targets)?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training batch is empty".into()));
    }
    if let Some(v) = val {
        check_batch(&model, &v.inputs, &v.targets)?;
    }

    let (mut mu, mut alpha, mut beta) = (cfg.mu0, cfg.alpha0, cfg.beta0);
    let mut gamma = model.num_weights() as f64;
    let mut records = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let (j, e) = batch_jacobian(&model, &train.inputs, &train.targets)?;
        let w = DVector::from_column_slice(model.params());
        let e_d = sum_sq_half(e.as_slice());
        let e_w = sum_sq_half(w.as_slice());
        let f_before = beta * e_d + alpha * e_w;
        if !f_before.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                trace: Box::new(TrainTrace {
                    records,
                    stop_reason,
                }),
            });
        }
        let normal = NormalEquations::new(&j, &e);
        let grad_norm = (&normal.jte * beta - &w * alpha).norm();
        if grad_norm < cfg.grad_tol {
            stop_reason = StopReason::GradientTol;
            break;
        }

        let mut accepted = None;
        while mu <= cfg.mu_max {
            if let Ok(cand) = lm_br_step(&w, &normal, mu, alpha, beta) {
                let cand = cand.as_slice().to_vec();
                let trial = MlpModel {
                    layer_sizes: model.layer_sizes.clone(),
                    params: cand,
                };
                let ed_new = sum_sq_half(&residuals(&trial, &train.inputs, &train.targets)?);
                let ew_new = sum_sq_half(trial.params());
                let f_new = beta * ed_new + alpha * ew_new;
                if f_new.is_finite() && f_new < f_before {
                    mu = (mu * cfg.mu_dec).max(MU_FLOOR);
                    accepted = Some((trial, ed_new, ew_new, f_new));
                    break;
                }
            }
            mu *= cfg.mu_inc;
        }

        let record = match accepted {
            Some((trial, ed_new, ew_new, f_new)) => {
                model = trial;
                match update_evidence_hyperparams(
                    &normal.jtj,
                    ed_new,
                    ew_new,
                    alpha,
                    beta,
                    e.len(),
                ) {
                    Ok(ev) => {
                        alpha = ev.alpha;
                        beta = ev.beta;
                        gamma = ev.gamma;
                    }
                    Err(Error::NotPositiveDefinite(_)) => {
                        mu = (mu * cfg.mu_inc).min(cfg.mu_max * cfg.mu_inc);
                    }
                    Err(err) => return Err(err),
                }
                EpochRecord {
                    epoch,
                    mu,
                    data_error: ed_new,
                    weight_error: ew_new,
                    objective_before: f_before,
                    objective: f_new,
                    alpha,
                    beta,
                    gamma,
                    grad_norm,
                    val_mse: None,
                    accepted: true,
                }
            }
            None => EpochRecord {
                epoch,
                mu,
                data_error: e_d,
                weight_error: e_w,
                objective_before: f_before,
                objective: f_before,
                alpha,
                beta,
                gamma,
                grad_norm,
                val_mse: None,
                accepted: false,
            },
        };
        let val_mse = match val {
            Some(v) if !v.is_empty() => {
                let r = residuals(&model, &v.inputs, &v.targets)?;
                Some(r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64)
            }
            _ => None,
        };
        records.push(EpochRecord { val_mse, ..record });
        if mu > cfg.mu_max {
            stop_reason = StopReason::MuExceeded;
            break;
        }
    }

    Ok((
        model,
        TrainTrace {
            records,
            stop_reason,
        },
    ))
}

/// Write the text model format: `#mlp 1`, the layer sizes, then one line per
/// weight matrix (row-major) and bias vector. A normalizer, when given, is
/// appended as `#norm_mean` and `#norm_std` lines.
pub fn save_model(m: &MlpModel, normalizer: Option<&Normalizer>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_model(m, normalizer)).map_err(|e| Error::io(path, e))
}

fn join17(vals: &[f64]) -> String {
    let mut s = String::with_capacity(vals.len() * 25);
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

pub fn format_model(m: &MlpModel, normalizer: Option<&Normalizer>) -> String {
    let mut out = String::from("#mlp 1\n");
    let sizes: Vec<String> = m.layer_sizes.iter().map(|s| s.to_string()).collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    for l in 0..m.num_layers() {
        let (w, b) = m.layer(l);
        out.push_str(&join17(w));
        out.push('\n');
        out.push_str(&join17(b));
        out.push('\n');
    }
    if let Some(n) = normalizer {
        let _ = writeln!(out, "#norm_mean {}", join17(&n.mean));
        let _ = writeln!(out, "#norm_std {}", join17(&n.std));
    }
    out
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(MlpModel, Option<Normalizer>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

pub fn parse_model(text: &str, origin: impl AsRef<Path>) -> Result<(MlpModel, Option<Normalizer>)> {
    let origin = origin.as_ref();
    let err = |line: usize, msg: String| Error::parse(origin, line, msg);
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    if lines.first() != Some(&"#mlp 1") {
        return Err(err(1, "expected `#mlp 1` header".into()));
    }
    let sizes: Vec<usize> = lines
        .get(1)
        .ok_or_else(|| err(2, "missing layer sizes line".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(2, format!("bad layer size `{t}`"))))
        .collect::<Result<_>>()?;
    let mut model = MlpModel::zeros(&sizes).map_err(|e| err(2, e.to_string()))?;

    let reals = |no: usize, line: &str| -> Result<Vec<f64>> {
        line.split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(no, format!("bad or non-finite value `{t}`")))
            })
            .collect()
    };

    let mut params = Vec::with_capacity(model.num_weights());
    let mut no = 2;
    for l in 0..model.num_layers() {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        for (what, want) in [("weights", fan_in * fan_out), ("biases", fan_out)] {
            let line = lines
                .get(no)
                .ok_or_else(|| err(no + 1, format!("missing layer {l} {what}")))?;
            let vals = reals(no + 1, line)?;
            if vals.len() != want {
                return Err(err(
                    no + 1,
                    format!("layer {l} {what}: expected {want} values, found {}", vals.len()),
                ));
            }
            params.extend(vals);
            no += 1;
        }
    }
    model.params = params;

    let mut mean = None;
    let mut std = None;
    for (i, line) in lines.iter().enumerate().skip(no) {
        let mut parts = line.splitn(2, ' ');
        let tag = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("");
        let slot = match tag {
            "#norm_mean" => &mut mean,
            "#norm_std" => &mut std,
            "" => continue,
            other => return Err(err(i + 1, format!("unexpected line `{other}`"))),
        };
        let vals = reals(i + 1, rest)?;
        let arr: [f64; INPUT_DIM] = vals
            .try_into()
            .map_err(|v: Vec<f64>| err(i + 1, format!("expected {INPUT_DIM} values, found {}", v.len())))?;
        *slot = Some(arr);
    }
    let normalizer = match (mean, std) {
        (Some(mean), Some(std)) => Some(Normalizer { mean, std }),
        (None, None) => None,
        _ => return Err(err(no + 1, "normalizer needs both #norm_mean and #norm_std".into())),
    };
    Ok((model, normalizer))
}
