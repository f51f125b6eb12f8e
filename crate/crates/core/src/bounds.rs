//! Closed-form convergence upper bounds and their check against measured gaps.

use serde::{Deserialize, Serialize};

use crate::data::ClientDataset;
use crate::engine::{DeploymentKind, RunResult};
use crate::error::{Error, Result};
use crate::models::{self, ModelSpec, ObjectiveStats};
use crate::topology::{Strategy, TopologyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub smooth_l: f64,
    pub mu: f64,
    pub eta: f64,
    /// Scalar gradient-noise level, used where no per-client vector is given.
    pub sigma: f64,
    pub sigma_k: Option<Vec<f64>>,
    pub z: f64,
    /// `‖w⁰ − w*‖²`
    pub init_dist_sq: f64,
    pub grad_bound_g: f64,
    pub local_epochs_e: usize,
    pub rounds_t: usize,
    pub weights_p: Vec<f64>,
    /// `‖V_k − w*‖²`
    pub v_dist_sq: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl BoundInputs {
    /// Inputs for a run started from zeros: both distances are `‖w*‖²`, `p_k`
    /// are sample shares, `σ` is the largest `σ_k`, `κ = L/μ` and
    /// `γ = max(1, 8κ)`.
    pub fn from_stats(stats: &ObjectiveStats, eta: f64, local_epochs_e: usize, rounds_t: usize) -> Self {
        let total: usize = stats.sample_counts.iter().sum();
        let kappa = stats.smooth_l / stats.mu;
        let dist = stats.global_opt_params.norm_sq();
        Self {
            smooth_l: stats.smooth_l,
            mu: stats.mu,
            eta,
            sigma: stats.sigma_k.iter().copied().fold(0.0, f64::max),
            sigma_k: Some(stats.sigma_k.clone()),
            z: stats.z_scalar.max(0.0),
            init_dist_sq: dist,
            grad_bound_g: stats.grad_bound_g,
            local_epochs_e,
            rounds_t,
            weights_p: stats.sample_counts.iter().map(|&c| c as f64 / total as f64).collect(),
            v_dist_sq: dist,
            kappa,
            gamma: default_gamma(kappa),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("sigma", self.sigma),
            ("z", self.z),
            ("init_dist_sq", self.init_dist_sq),
            ("grad_bound_g", self.grad_bound_g),
            ("v_dist_sq", self.v_dist_sq),
            ("eta", self.eta),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        for (name, v) in [
            ("smooth_l", self.smooth_l),
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        if self.mu > self.smooth_l * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "mu {} exceeds L {}",
                self.mu, self.smooth_l
            )));
        }
        if self.local_epochs_e == 0 || self.rounds_t == 0 {
            return Err(Error::InvalidConfig("E and T must be at least 1".into()));
        }
        let sum: f64 = self.weights_p.iter().sum();
        if self.weights_p.is_empty() || self.weights_p.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "weights_p must be a probability vector, sums to {sum}"
            )));
        }
        if let Some(s) = &self.sigma_k {
            if s.len() != self.weights_p.len() || s.iter().any(|v| v.is_nan() || *v < 0.0) {
                return Err(Error::InvalidConfig(
                    "sigma_k must be nonnegative, one per client".into(),
                ));
            }
        }
        Ok(())
    }

    /// `ηL ≤ 1` and `μ ≤ L`.
    pub fn regime_ok(&self) -> bool {
        self.eta * self.smooth_l <= 1.0 && self.mu <= self.smooth_l
    }
}

pub fn default_gamma(kappa: f64) -> f64 {
    (8.0 * kappa).max(1.0)
}

/// `(L/2)·[(1 + μη + η²L²)·d₀ + 2ηz + η²σ²]`
pub fn bound_continuous(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let (l, eta) = (b.smooth_l, b.eta);
    let factor = 1.0 + b.mu * eta + eta * eta * l * l;
    Ok(l / 2.0 * (factor * b.init_dist_sq + 2.0 * eta * b.z + eta * eta * b.sigma * b.sigma))
}

/// `(L/2)·[(1 + μη)·v + 2ηz + η²L²·v + η²σ²]`
pub fn bound_aggregate_chain(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let (l, eta, v) = (b.smooth_l, b.eta, b.v_dist_sq);
    Ok(l / 2.0 * ((1.0 + b.mu * eta) * v + 2.0 * eta * b.z + eta * eta * l * l * v + eta * eta * b.sigma * b.sigma))
}

/// `(2κ/(γ+T))·(B/μ + 2L·d₀)` with `B = Σ p_k²σ_k² + 6LZ + 8(E−1)²G²`.
pub fn bound_star_mesh(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let noise: f64 = match &b.sigma_k {
        Some(s) => b.weights_p.iter().zip(s).map(|(p, s)| p * p * s * s).sum(),
        None => b.weights_p.iter().map(|p| p * p * b.sigma * b.sigma).sum(),
    };
    let drift = (b.local_epochs_e - 1) as f64;
    let big_b = noise + 6.0 * b.smooth_l * b.z + 8.0 * drift * drift * b.grad_bound_g * b.grad_bound_g;
    Ok(2.0 * b.kappa / (b.gamma + b.rounds_t as f64) * (big_b / b.mu + 2.0 * b.smooth_l * b.init_dist_sq))
}

/// The bound form that applies to `kind`.
pub fn bound_for(kind: DeploymentKind, b: &BoundInputs) -> Result<f64> {
    match (kind.topology(), kind.strategy()) {
        (TopologyKind::Star | TopologyKind::Mesh, _) => bound_star_mesh(b),
        (_, Strategy::Continuous) => bound_continuous(b),
        (_, Strategy::Aggregate) => bound_aggregate_chain(b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReportEntry {
    pub deployment: DeploymentKind,
    pub client: usize,
    pub measured_gap: f64,
    pub bound: f64,
    pub holds: bool,
    pub regime_ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub entries: Vec<BoundReportEntry>,
}

impl BoundReport {
    /// True when every entry inside the stability regime holds.
    pub fn all_hold(&self) -> bool {
        self.entries.iter().filter(|e| e.regime_ok).all(|e| e.holds)
    }
}

/// Compares `F(w_k) − F(w*)` for each client's final parameters against the
/// bound for the run's deployment, where `F` is the sample-weighted objective
/// over `partition` and `w*` its minimizer from `stats`.
///
/// Outside the stability regime the entry is still computed but flagged with
/// `regime_ok = false`.
pub fn verify_bound(
    run: &RunResult,
    stats: &ObjectiveStats,
    inputs: &BoundInputs,
    spec: &ModelSpec,
    partition: &[ClientDataset],
) -> Result<BoundReport> {
    if !stats.global_min_loss.is_finite()
        || stats.global_opt_params.dim() == 0 && run.final_params.iter().any(|p| p.dim() > 0)
    {
        return Err(Error::InvalidConfig("objective stats carry no optimum".into()));
    }
    let bound = bound_for(run.kind, inputs)?;
    let regime_ok = inputs.regime_ok();
    let entries = run
        .final_params
        .iter()
        .enumerate()
        .map(|(client, p)| {
            let measured_gap = models::global_loss(spec, p, partition)? - stats.global_min_loss;
            Ok(BoundReportEntry {
                deployment: run.kind,
                client,
                measured_gap,
                bound,
                holds: measured_gap <= bound,
                regime_ok,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundReport { entries })
}
