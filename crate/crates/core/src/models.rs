//! Convex local models and their SGD training.
//!
//! Both models score a sample as `s = w·x + b` and map labels to `y ∈ {−1, +1}`
//! (label `> 0` is positive). The objective on a dataset of `n` rows is
//!
//! ```text
//! F(θ) = (1/n) Σ ℓ(y_i · s_i) + λ (‖w‖² + b²)
//! ```
//!
//! with `ℓ(m) = max(0, 1 − m)` (hinge) or `ℓ(m) = ln(1 + e^{−m})` (logistic).
//! The bias sits inside the penalty, so `F` is `2λ`-strongly convex in the
//! full parameter vector.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ClientDataset, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{TraceEntry, TrainingTrace};
use crate::rng;

/// Iteration cap for local-optimum searches.
pub const OPTIMUM_MAX_ITERATIONS: usize = 50_000;
/// Gradient-norm stopping threshold for the smooth (logistic) search.
pub const OPTIMUM_GRAD_TOL: f64 = 1e-8;
/// Projected-gradient stopping threshold for the hinge dual search.
const DUAL_KKT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SvmHinge,
    Logistic,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::SvmHinge => "svm_hinge",
            ModelKind::Logistic => "logistic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// λ
    pub l2_strength: f64,
    /// η, constant over training.
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl ModelSpec {
    /// Linear SVM defaults for min-max scaled tabular data.
    pub fn svm() -> Self {
        Self {
            kind: ModelKind::SvmHinge,
            l2_strength: 5e-4,
            learning_rate: 2e-3,
            batch_size: 1,
        }
    }

    /// Logistic regression defaults for min-max scaled tabular data.
    pub fn logistic() -> Self {
        Self {
            kind: ModelKind::Logistic,
            l2_strength: 5e-5,
            learning_rate: 1e-2,
            batch_size: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "l2 strength {} must be nonnegative",
                self.l2_strength
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidModel("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Linear model parameters `(w, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Squared norm over weights and bias.
    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias
    }

    pub fn distance_sq(&self, other: &ParamVector) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            + (self.bias - other.bias) * (self.bias - other.bias)
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += alpha * b;
        }
        self.bias += alpha * other.bias;
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.weights {
            *a *= alpha;
        }
        self.bias *= alpha;
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    /// Parameters as one flat vector, bias last.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let (w, b) = flat.split_at(flat.len() - 1);
        Self {
            weights: w.to_vec(),
            bias: b[0],
        }
    }

    pub(crate) fn check_dim(&self, d: &Dataset) -> Result<()> {
        if self.dim() != d.n_features() {
            return Err(Error::DimensionMismatch {
                expected: d.n_features(),
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

fn signed_label(label: i64) -> f64 {
    if label > 0 {
        1.0
    } else {
        -1.0
    }
}

fn margin_loss(kind: ModelKind, m: f64) -> f64 {
    match kind {
        ModelKind::SvmHinge => (1.0 - m).max(0.0),
        ModelKind::Logistic => {
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        }
    }
}

/// dℓ/dm; the hinge kink at `m = 1` takes the zero subgradient.
fn margin_slope(kind: ModelKind, m: f64) -> f64 {
    match kind {
        ModelKind::SvmHinge => {
            if m < 1.0 {
                -1.0
            } else {
                0.0
            }
        }
        ModelKind::Logistic => {
            if m >= 0.0 {
                let e = (-m).exp();
                -e / (1.0 + e)
            } else {
                -1.0 / (1.0 + m.exp())
            }
        }
    }
}

/// Mean data loss (no penalty) over `d`. `d` must be nonempty.
fn data_loss(kind: ModelKind, p: &ParamVector, d: &Dataset) -> f64 {
    let total: f64 = (0..d.len())
        .map(|i| margin_loss(kind, signed_label(d.label(i)) * p.score(d.row(i))))
        .sum();
    total / d.len() as f64
}

/// Adds `scale · Σ_{i ∈ rows} ∂ℓ_i/∂θ` into `grad`.
fn accumulate_data_gradient(
    kind: ModelKind,
    p: &ParamVector,
    d: &Dataset,
    rows: impl IntoIterator<Item = usize>,
    scale: f64,
    grad: &mut ParamVector,
) {
    for i in rows {
        let x = d.row(i);
        let y = signed_label(d.label(i));
        let c = margin_slope(kind, y * p.score(x)) * y * scale;
        if c != 0.0 {
            for (g, v) in grad.weights.iter_mut().zip(x) {
                *g += c * v;
            }
            grad.bias += c;
        }
    }
}

/// `F(θ)` on `d`.
pub fn loss(spec: &ModelSpec, p: &ParamVector, d: &Dataset) -> Result<f64> {
    p.check_dim(d)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset(d.name.clone()));
    }
    Ok(data_loss(spec.kind, p, d) + spec.l2_strength * p.norm_sq())
}

/// Gradient of `F` restricted to `batch`, penalty term included.
pub fn gradient(spec: &ModelSpec, p: &ParamVector, batch: &Dataset) -> Result<ParamVector> {
    p.check_dim(batch)?;
    if batch.is_empty() {
        return Err(Error::EmptyDataset(batch.name.clone()));
    }
    let mut g = p.clone();
    g.scale(2.0 * spec.l2_strength);
    accumulate_data_gradient(spec.kind, p, batch, 0..batch.len(), 1.0 / batch.len() as f64, &mut g);
    Ok(g)
}

/// Runs `epochs` passes of minibatch SGD over `cd.train`.
///
/// Each epoch visits the rows in a fresh order drawn from `seed`; train and
/// validation losses are recorded after every epoch. The returned trace uses
/// local epoch numbers starting at 0 and round 0.
pub fn train_local(
    spec: &ModelSpec,
    p0: &ParamVector,
    cd: &ClientDataset,
    epochs: usize,
    seed: u64,
) -> Result<(ParamVector, TrainingTrace)> {
    spec.validate()?;
    p0.check_dim(&cd.train)?;
    p0.check_dim(&cd.validation)?;
    let mut trace = TrainingTrace::default();
    if epochs == 0 {
        return Ok((p0.clone(), trace));
    }
    if cd.train.is_empty() {
        return Err(Error::EmptyDataset(cd.train.name.clone()));
    }
    if cd.validation.is_empty() {
        return Err(Error::EmptyDataset(cd.validation.name.clone()));
    }

    let mut rng = rng::stream(seed);
    let mut p = p0.clone();
    let mut grad = ParamVector::zeros(p.dim());
    let mut order: Vec<usize> = (0..cd.train.len()).collect();
    let decay = 2.0 * spec.l2_strength;
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            grad.clone_from(&p);
            grad.scale(decay);
            accumulate_data_gradient(
                spec.kind,
                &p,
                &cd.train,
                batch.iter().copied(),
                1.0 / batch.len() as f64,
                &mut grad,
            );
            p.axpy(-spec.learning_rate, &grad);
        }
        trace.entries.push(TraceEntry {
            global_epoch: epoch,
            train_loss: loss(spec, &p, &cd.train)?,
            val_loss: loss(spec, &p, &cd.validation)?,
            client: cd.client_id,
            round: 0,
        });
    }
    Ok((p, trace))
}

/// Fraction of rows whose predicted label (score > 0 ⇒ 1) matches.
pub fn predict(p: &ParamVector, d: &Dataset) -> Vec<i64> {
    (0..d.len()).map(|i| i64::from(p.score(d.row(i)) > 0.0)).collect()
}

/// Exact minimizer of `F` on `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub params: ParamVector,
    pub loss: f64,
    pub iterations: usize,
}

/// Largest curvature of the logistic data term over `d`: `max_i (‖x_i‖² + 1) / 4`.
fn logistic_curvature_bound(d: &Dataset) -> f64 {
    (0..d.len())
        .map(|i| (d.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0) / 4.0)
        .fold(0.0, f64::max)
}

/// Minimizes `F` on `d` to high precision.
///
/// Logistic: accelerated gradient descent with step `1/L` and gradient-based
/// restart, stopping at `‖∇F‖ < 1e-8`. Hinge: cyclic dual coordinate descent
/// on the box-constrained dual, which is exact for a piecewise-linear loss.
pub fn minimize(spec: &ModelSpec, d: &Dataset) -> Result<Optimum> {
    if d.is_empty() {
        return Err(Error::EmptyDataset(d.name.clone()));
    }
    if spec.l2_strength <= 0.0 {
        return Err(Error::InvalidModel("optimum search needs l2 strength > 0".into()));
    }
    match spec.kind {
        ModelKind::Logistic => minimize_smooth(spec, d),
        ModelKind::SvmHinge => minimize_hinge_dual(spec, d),
    }
}

fn minimize_smooth(spec: &ModelSpec, d: &Dataset) -> Result<Optimum> {
    let mu = 2.0 * spec.l2_strength;
    let smooth = mu + logistic_curvature_bound(d);
    let step = 1.0 / smooth;
    let momentum = (smooth.sqrt() - mu.sqrt()) / (smooth.sqrt() + mu.sqrt());
    let full = 0..d.len();
    let n_inv = 1.0 / d.len() as f64;

    let mut x = ParamVector::zeros(d.n_features());
    let mut y = x.clone();
    let mut residual = f64::INFINITY;
    for it in 0..OPTIMUM_MAX_ITERATIONS {
        let mut gx = x.clone();
        gx.scale(mu);
        accumulate_data_gradient(spec.kind, &x, d, full.clone(), n_inv, &mut gx);
        residual = gx.norm_sq().sqrt();
        if residual < OPTIMUM_GRAD_TOL {
            let loss = loss(spec, &x, d)?;
            return Ok(Optimum {
                params: x,
                loss,
                iterations: it,
            });
        }

        let mut g = y.clone();
        g.scale(mu);
        accumulate_data_gradient(spec.kind, &y, d, full.clone(), n_inv, &mut g);
        let mut next = y.clone();
        next.axpy(-step, &g);
        let mut delta = next.clone();
        delta.axpy(-1.0, &x);
        let ascent = g.weights.iter().zip(&delta.weights).map(|(a, b)| a * b).sum::<f64>() + g.bias * delta.bias;
        y = next.clone();
        // gradient restart: drop momentum when it points uphill
        if ascent <= 0.0 {
            y.axpy(momentum, &delta);
        }
        x = next;
    }
    Err(Error::NonConvergence {
        iterations: OPTIMUM_MAX_ITERATIONS,
        residual,
    })
}

/// Dual of `min ½‖θ‖² + C Σ max(0, 1 − y_i θ·x̃_i)` with `C = 1/(2λn)`,
/// where `x̃ = (x, 1)`; same minimizer as `F`.
fn minimize_hinge_dual(spec: &ModelSpec, d: &Dataset) -> Result<Optimum> {
    let n = d.len();
    let c = 1.0 / (2.0 * spec.l2_strength * n as f64);
    let q_diag: Vec<f64> = (0..n)
        .map(|i| d.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();
    let mut alpha = vec![0.0; n];
    let mut theta = ParamVector::zeros(d.n_features());
    let mut violation = f64::INFINITY;
    for pass in 0..OPTIMUM_MAX_ITERATIONS {
        violation = 0.0f64;
        for i in 0..n {
            let x = d.row(i);
            let y = signed_label(d.label(i));
            let g = y * theta.score(x) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            violation = violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y;
                if step != 0.0 {
                    for (w, v) in theta.weights.iter_mut().zip(x) {
                        *w += step * v;
                    }
                    theta.bias += step;
                }
            }
        }
        if violation < DUAL_KKT_TOL {
            let loss = loss(spec, &theta, d)?;
            return Ok(Optimum {
                params: theta,
                loss,
                iterations: pass + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: OPTIMUM_MAX_ITERATIONS,
        residual: violation,
    })
}

/// Sample-weighted objective `Σ_k (n_k / Σn) F_k(θ)` over a partition.
pub fn global_loss(spec: &ModelSpec, p: &ParamVector, partition: &[ClientDataset]) -> Result<f64> {
    let total: usize = partition.iter().map(|c| c.sample_count).sum();
    if total == 0 {
        return Err(Error::EmptyAggregation);
    }
    let mut acc = 0.0;
    for c in partition {
        acc += c.sample_count as f64 / total as f64 * loss(spec, p, &c.train)?;
    }
    Ok(acc)
}

/// Constants of the distributed objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveStats {
    /// Strong-convexity constant, exactly `2λ`.
    pub mu: f64,
    pub smooth_l: f64,
    /// Per-client standard deviation of a minibatch gradient at the local optimum.
    pub sigma_k: Vec<f64>,
    pub grad_bound_g: f64,
    /// `F_k^*`
    pub local_opt_loss: Vec<f64>,
    /// `F^* = (1/N) Σ F_k^*`
    pub global_opt_loss: f64,
    /// `F^* − F_k^*`
    pub z_per_client: Vec<f64>,
    /// `max_k (F^* − F_k^*)`
    pub z_scalar: f64,
    pub local_opt_params: Vec<ParamVector>,
    /// Minimizer `w*` of the sample-weighted objective.
    pub global_opt_params: ParamVector,
    /// `F(w*)`
    pub global_min_loss: f64,
    pub sample_counts: Vec<usize>,
}

/// Mean of `‖g_i − ḡ‖²` and of `‖g_i‖²` over per-sample gradients at `p`.
fn per_sample_gradient_moments(spec: &ModelSpec, p: &ParamVector, d: &Dataset) -> (f64, f64) {
    let n = d.len();
    let grads: Vec<ParamVector> = (0..n)
        .map(|i| {
            let mut g = p.clone();
            g.scale(2.0 * spec.l2_strength);
            accumulate_data_gradient(spec.kind, p, d, [i], 1.0, &mut g);
            g
        })
        .collect();
    let mut mean = ParamVector::zeros(p.dim());
    for g in &grads {
        mean.axpy(1.0 / n as f64, g);
    }
    let variance = grads.iter().map(|g| g.distance_sq(&mean)).sum::<f64>() / n as f64;
    let second = grads.iter().map(ParamVector::norm_sq).sum::<f64>() / n as f64;
    (variance, second)
}

/// Largest observed `‖∇F(u) − ∇F(v)‖ / ‖u − v‖` over random pairs near `center`.
fn empirical_lipschitz(spec: &ModelSpec, center: &ParamVector, d: &Dataset, seed: u64) -> Result<f64> {
    let mut rng = rng::stream(seed);
    let mut best = 0.0f64;
    let scale = 0.1 * (1.0 + center.norm_sq().sqrt());
    for _ in 0..32 {
        let mut jitter = |p: &ParamVector| {
            let mut q = p.clone();
            for w in &mut q.weights {
                *w += scale * (rng.gen::<f64>() - 0.5);
            }
            q.bias += scale * (rng.gen::<f64>() - 0.5);
            q
        };
        let u = jitter(center);
        let v = jitter(center);
        let gu = gradient(spec, &u, d)?;
        let gv = gradient(spec, &v, d)?;
        let dist = u.distance_sq(&v).sqrt();
        if dist > 0.0 {
            best = best.max(gu.distance_sq(&gv).sqrt() / dist);
        }
    }
    Ok(best)
}

/// Estimates `μ`, `L`, `σ_k`, `G`, the local and global optima and `Z`.
pub fn estimate_constants(spec: &ModelSpec, partition: &[ClientDataset]) -> Result<ObjectiveStats> {
    spec.validate()?;
    if partition.is_empty() {
        return Err(Error::EmptyAggregation);
    }
    if spec.l2_strength <= 0.0 {
        return Err(Error::InvalidModel("strong convexity requires l2 strength > 0".into()));
    }
    let mu = 2.0 * spec.l2_strength;

    let locals: Vec<Optimum> = partition
        .iter()
        .map(|c| minimize(spec, &c.train))
        .collect::<Result<_>>()?;
    let local_opt_loss: Vec<f64> = locals.iter().map(|o| o.loss).collect();
    let global_opt_loss = local_opt_loss.iter().sum::<f64>() / partition.len() as f64;
    let z_per_client: Vec<f64> = local_opt_loss.iter().map(|f| global_opt_loss - f).collect();
    let z_scalar = z_per_client.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let parts: Vec<&Dataset> = partition.iter().map(|c| &c.train).collect();
    let pooled = Dataset::concat("pooled", &parts)?;
    let global = minimize(spec, &pooled)?;

    let smooth_l = match spec.kind {
        ModelKind::Logistic => mu + logistic_curvature_bound(&pooled),
        ModelKind::SvmHinge => {
            let mut est = 0.0f64;
            for (k, (c, opt)) in partition.iter().zip(&locals).enumerate() {
                let seed = rng::derive_seed(k as u64, &[0x4c495053]);
                est = est.max(empirical_lipschitz(spec, &opt.params, &c.train, seed)?);
            }
            est.max(mu)
        }
    };

    let zero = ParamVector::zeros(pooled.n_features());
    let mut sigma_k = Vec::with_capacity(partition.len());
    let mut g_sq = 0.0f64;
    for (c, opt) in partition.iter().zip(&locals) {
        let (variance, second) = per_sample_gradient_moments(spec, &opt.params, &c.train);
        sigma_k.push((variance / spec.batch_size as f64).sqrt());
        g_sq = g_sq.max(second);
        for probe in [&zero, &global.params] {
            g_sq = g_sq.max(per_sample_gradient_moments(spec, probe, &c.train).1);
        }
    }

    Ok(ObjectiveStats {
        mu,
        smooth_l,
        sigma_k,
        grad_bound_g: g_sq.sqrt(),
        local_opt_loss,
        global_opt_loss,
        z_per_client,
        z_scalar,
        local_opt_params: locals.into_iter().map(|o| o.params).collect(),
        global_opt_params: global.params,
        global_min_loss: global.loss,
        sample_counts: partition.iter().map(|c| c.sample_count).collect(),
    })
}
