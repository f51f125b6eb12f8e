//! The six deployments as explicit event schedules, and their execution.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClientDataset, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{self, ConvergenceCriterion, TrainingTrace};
use crate::models::{self, ModelSpec, ParamVector};
use crate::rng;
use crate::topology::{build_topology, Strategy, TopologyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentKind {
    ContinuousLinear,
    ContinuousRing,
    AggregateLinear,
    AggregateRing,
    AggregateStar,
    AggregateMesh,
}

impl DeploymentKind {
    pub const ALL: [DeploymentKind; 6] = [
        DeploymentKind::ContinuousLinear,
        DeploymentKind::ContinuousRing,
        DeploymentKind::AggregateLinear,
        DeploymentKind::AggregateRing,
        DeploymentKind::AggregateStar,
        DeploymentKind::AggregateMesh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeploymentKind::ContinuousLinear => "continuous_linear",
            DeploymentKind::ContinuousRing => "continuous_ring",
            DeploymentKind::AggregateLinear => "aggregate_linear",
            DeploymentKind::AggregateRing => "aggregate_ring",
            DeploymentKind::AggregateStar => "aggregate_star",
            DeploymentKind::AggregateMesh => "aggregate_mesh",
        }
    }

    pub fn topology(self) -> TopologyKind {
        match self {
            DeploymentKind::ContinuousLinear | DeploymentKind::AggregateLinear => TopologyKind::Linear,
            DeploymentKind::ContinuousRing | DeploymentKind::AggregateRing => TopologyKind::Ring,
            DeploymentKind::AggregateStar => TopologyKind::Star,
            DeploymentKind::AggregateMesh => TopologyKind::Mesh,
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            DeploymentKind::ContinuousLinear | DeploymentKind::ContinuousRing => Strategy::Continuous,
            _ => Strategy::Aggregate,
        }
    }

    /// Parameters travel device to device rather than being trained concurrently.
    pub fn is_sequential(self) -> bool {
        !matches!(self, DeploymentKind::AggregateStar | DeploymentKind::AggregateMesh)
    }

    pub fn is_linear(self) -> bool {
        self.topology() == TopologyKind::Linear
    }

    pub fn default_rounds(self) -> usize {
        match self.topology() {
            TopologyKind::Linear => 1,
            TopologyKind::Ring => 2,
            TopologyKind::Star | TopologyKind::Mesh => 5,
        }
    }
}

impl fmt::Display for DeploymentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeploymentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DeploymentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown deployment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub kind: DeploymentKind,
    pub n_clients: usize,
    pub total_epochs: usize,
    /// Ignored by linear kinds, which always run one pass.
    pub n_rounds: usize,
    pub model: ModelSpec,
    pub seed: u64,
    pub convergence: ConvergenceCriterion,
}

impl DeploymentConfig {
    /// A config with the kind's default round count and the model's default
    /// convergence criterion.
    pub fn new(kind: DeploymentKind, n_clients: usize, total_epochs: usize, model: ModelSpec, seed: u64) -> Self {
        Self {
            kind,
            n_clients,
            total_epochs,
            n_rounds: kind.default_rounds(),
            model,
            seed,
            convergence: ConvergenceCriterion::for_model(model.kind),
        }
    }

    pub fn rounds(&self) -> usize {
        if self.kind.is_linear() {
            1
        } else {
            self.n_rounds
        }
    }

    pub fn epochs_per_event(&self) -> Result<usize> {
        epoch_budget(self.kind, self.total_epochs, self.n_clients, self.rounds())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.convergence.validate()?;
        build_topology(self.kind.topology(), self.n_clients, None)?.with_strategy(self.kind.strategy())?;
        self.epochs_per_event()?;
        Ok(())
    }
}

/// Epochs each train event runs for; the floor-division remainder is dropped.
pub fn epoch_budget(kind: DeploymentKind, total: usize, n_clients: usize, n_rounds: usize) -> Result<usize> {
    if total == 0 || n_clients == 0 || n_rounds == 0 {
        return Err(Error::InvalidConfig(format!(
            "epochs ({total}), clients ({n_clients}) and rounds ({n_rounds}) must all be at least 1"
        )));
    }
    let divisor = match kind.topology() {
        TopologyKind::Linear => n_clients,
        TopologyKind::Ring => n_clients * n_rounds,
        TopologyKind::Star | TopologyKind::Mesh => n_rounds,
    };
    match total / divisor {
        0 => Err(Error::InfeasibleBudget { total, divisor }),
        e => Ok(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationRule {
    /// Weighted pair of the two most recent outputs along a chain.
    Chain,
    FedAvg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    /// Train from the currently held parameters.
    Train {
        epochs: usize,
        round: usize,
    },
    /// Replace the held parameters by `Σ weights[i] · latest(sources[i])`.
    Aggregate {
        sources: Vec<usize>,
        weights: Vec<f64>,
        rule: AggregationRule,
    },
    Broadcast {
        targets: Vec<usize>,
    },
    /// Hand the actor's latest output (and, for chains, the one before it) to `target`.
    Forward {
        target: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub step: usize,
    pub actor: usize,
    pub action: Action,
}

/// Seed for the train event of `client` in `round`.
pub fn event_seed(seed: u64, round: usize, client: usize) -> u64 {
    rng::derive_seed(seed, &[rng::tag::TRAIN, round as u64, client as u64])
}

fn fedavg_weights(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// The full ordered event list for `config`; `sample_counts[k]` feeds the
/// aggregation weights.
pub fn build_schedule(config: &DeploymentConfig, sample_counts: &[usize]) -> Result<Vec<ScheduleEvent>> {
    config.validate()?;
    let n = config.n_clients;
    if sample_counts.len() != n {
        return Err(Error::Schedule(format!(
            "{} sample counts for {n} clients",
            sample_counts.len()
        )));
    }
    if let Some(k) = sample_counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClient(k));
    }
    let epochs = config.epochs_per_event()?;
    let rounds = config.rounds();
    let mut actions: Vec<(usize, Action)> = Vec::new();

    if config.kind.is_sequential() {
        let chain = config.kind.strategy() == Strategy::Aggregate;
        for round in 0..rounds {
            for k in 0..n {
                let position = round * n + k;
                if position > 0 {
                    let prev = (k + n - 1) % n;
                    actions.push((prev, Action::Forward { target: k }));
                }
                if chain && position >= 2 {
                    let a = (k + n - 2) % n;
                    let b = (k + n - 1) % n;
                    let (sa, sb) = (sample_counts[a], sample_counts[b]);
                    let denom = (sa + sb) as f64;
                    actions.push((
                        k,
                        Action::Aggregate {
                            sources: vec![a, b],
                            weights: vec![sa as f64 / denom, sb as f64 / denom],
                            rule: AggregationRule::Chain,
                        },
                    ));
                }
                actions.push((k, Action::Train { epochs, round }));
            }
        }
    } else {
        let everyone: Vec<usize> = (0..n).collect();
        let weights = fedavg_weights(sample_counts);
        let center = 0;
        for round in 0..rounds {
            match config.kind {
                DeploymentKind::AggregateStar => {
                    let targets = everyone.iter().copied().filter(|&i| i != center).collect();
                    actions.push((center, Action::Broadcast { targets }));
                    actions.extend(everyone.iter().map(|&k| (k, Action::Train { epochs, round })));
                    actions.push((
                        center,
                        Action::Aggregate {
                            sources: everyone.clone(),
                            weights: weights.clone(),
                            rule: AggregationRule::FedAvg,
                        },
                    ));
                }
                _ => {
                    actions.extend(everyone.iter().map(|&k| (k, Action::Train { epochs, round })));
                    for &k in &everyone {
                        let targets = everyone.iter().copied().filter(|&i| i != k).collect();
                        actions.push((k, Action::Broadcast { targets }));
                    }
                    for &k in &everyone {
                        actions.push((
                            k,
                            Action::Aggregate {
                                sources: everyone.clone(),
                                weights: weights.clone(),
                                rule: AggregationRule::FedAvg,
                            },
                        ));
                    }
                }
            }
        }
    }

    Ok(actions
        .into_iter()
        .enumerate()
        .map(|(step, (actor, action))| ScheduleEvent { step, actor, action })
        .collect())
}

/// `Σ weights[i] · params[i]`, accumulated in list order.
fn weighted_sum(params: &[&ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let first = params.first().ok_or(Error::EmptyAggregation)?;
    let mut out = ParamVector::zeros(first.dim());
    for (p, &w) in params.iter().zip(weights) {
        if p.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                expected: out.dim(),
                actual: p.dim(),
            });
        }
        out.axpy(w, p);
    }
    Ok(out)
}

/// `(s_prev · w_prev + s_curr · w_curr) / (s_prev + s_curr)`.
///
/// `cumulative` is the running sample total along the chain; it is checked but
/// does not enter the weights.
pub fn chain_aggregate(
    w_prev: &ParamVector,
    w_curr: &ParamVector,
    s_prev: usize,
    s_curr: usize,
    cumulative: usize,
) -> Result<ParamVector> {
    if s_prev == 0 || s_curr == 0 || cumulative < s_prev + s_curr {
        return Err(Error::InvalidConfig(format!(
            "chain counts ({s_prev}, {s_curr}) with cumulative {cumulative}"
        )));
    }
    let denom = (s_prev + s_curr) as f64;
    weighted_sum(&[w_prev, w_curr], &[s_prev as f64 / denom, s_curr as f64 / denom])
}

/// `Σ (n_k / Σ n_j) · w_k`, summed in list order.
pub fn fedavg_aggregate(params: &[ParamVector], counts: &[usize]) -> Result<ParamVector> {
    if params.is_empty() {
        return Err(Error::EmptyAggregation);
    }
    if params.len() != counts.len() {
        return Err(Error::InvalidConfig(format!(
            "{} parameter sets for {} counts",
            params.len(),
            counts.len()
        )));
    }
    if counts.contains(&0) {
        return Err(Error::InvalidConfig("aggregation counts must be positive".into()));
    }
    let refs: Vec<&ParamVector> = params.iter().collect();
    weighted_sum(&refs, &fedavg_weights(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub kind: DeploymentKind,
    pub epochs_per_event: usize,
    pub schedule: Vec<ScheduleEvent>,
    /// One trace per client, global epochs ascending.
    pub traces: Vec<TrainingTrace>,
    /// Parameters each client holds at the end: its last trained output, or
    /// for mesh its last aggregate.
    pub final_params: Vec<ParamVector>,
    /// Final aggregate for star and mesh.
    pub global_params: Option<ParamVector>,
    /// Per round, the post-aggregation parameters: star holds the single
    /// broadcast vector, mesh one vector per client.
    pub round_params: Vec<Vec<ParamVector>>,
    /// `None` is a non-converged ("NC") client.
    pub convergence: Vec<Option<usize>>,
    pub client_f1: Vec<f64>,
    pub client_accuracy: Vec<f64>,
    /// Test F1 of each round's aggregate (star and mesh).
    pub round_f1: Vec<f64>,
    pub round_accuracy: Vec<f64>,
    pub mean_f1: f64,
    pub mean_accuracy: f64,
}

impl RunResult {
    pub fn nc_count(&self) -> usize {
        self.convergence.iter().filter(|c| c.is_none()).count()
    }

    /// Sum of epochs over all train events.
    pub fn trained_epochs(&self) -> usize {
        self.schedule
            .iter()
            .map(|e| match e.action {
                Action::Train { epochs, .. } => epochs,
                _ => 0,
            })
            .sum()
    }
}

fn test_scores(p: &ParamVector, test: &Dataset) -> Result<(f64, f64)> {
    let pred = models::predict(p, test);
    Ok((
        metrics::f1_binary(&pred, test.labels())?,
        metrics::accuracy(&pred, test.labels())?,
    ))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Executes the schedule for `config` on `partition` and scores on `test`.
///
/// Sequential kinds start from zeros at client 0; concurrent kinds start every
/// client from zeros. Each train event in round `r` for client `k` uses
/// [`event_seed`]`(seed, r, k)`, so concurrent execution matches sequential.
pub fn run_deployment(config: &DeploymentConfig, partition: &[ClientDataset], test: &Dataset) -> Result<RunResult> {
    let n = config.n_clients;
    if partition.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{} client datasets for {n} clients",
            partition.len()
        )));
    }
    let dim = partition[0].train.n_features();
    for c in partition {
        for d in [&c.train, &c.validation] {
            if d.n_features() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: d.n_features(),
                });
            }
        }
    }
    if test.n_features() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: test.n_features(),
        });
    }
    let counts: Vec<usize> = partition.iter().map(|c| c.sample_count).collect();
    let schedule = build_schedule(config, &counts)?;
    let epochs = config.epochs_per_event()?;

    let mut traces = vec![TrainingTrace::default(); n];
    // latest trained output per client
    let mut latest: Vec<Option<ParamVector>> = vec![None; n];
    // parameters each client currently holds as its starting point
    let mut held: Vec<Option<ParamVector>> = vec![None; n];
    let mut round_params: Vec<Vec<ParamVector>> = Vec::new();
    let mut global: Option<ParamVector> = None;

    if config.kind.is_sequential() {
        held[0] = Some(ParamVector::zeros(dim));
        let mut cursor = 0;
        for ev in &schedule {
            let k = ev.actor;
            match &ev.action {
                Action::Forward { target } => {
                    held[*target] = latest[k].clone();
                }
                Action::Aggregate { sources, weights, .. } => {
                    let inputs: Vec<&ParamVector> = sources
                        .iter()
                        .map(|&s| {
                            latest[s]
                                .as_ref()
                                .ok_or_else(|| Error::Schedule(format!("client {s} has no output yet")))
                        })
                        .collect::<Result<_>>()?;
                    held[k] = Some(weighted_sum(&inputs, weights)?);
                }
                Action::Train { epochs, round } => {
                    let start = held[k]
                        .take()
                        .ok_or_else(|| Error::Schedule(format!("client {k} trains without parameters")))?;
                    let seed = event_seed(config.seed, *round, k);
                    let (p, seg) = models::train_local(&config.model, &start, &partition[k], *epochs, seed)?;
                    traces[k].append(seg.rebased(cursor, *round));
                    cursor += epochs;
                    latest[k] = Some(p);
                }
                Action::Broadcast { .. } => return Err(Error::Schedule("broadcast in a sequential schedule".into())),
            }
        }
    } else {
        held.iter_mut().for_each(|h| *h = Some(ParamVector::zeros(dim)));
        let mut i = 0;
        while i < schedule.len() {
            let ev = &schedule[i];
            match &ev.action {
                Action::Train { .. } => {
                    let mut j = i;
                    while j < schedule.len() && matches!(schedule[j].action, Action::Train { .. }) {
                        j += 1;
                    }
                    let batch = &schedule[i..j];
                    let outputs: Vec<Result<(ParamVector, TrainingTrace)>> = batch
                        .par_iter()
                        .map(|ev| {
                            let Action::Train { epochs, round } = ev.action else {
                                unreachable!()
                            };
                            let k = ev.actor;
                            let start = held[k]
                                .as_ref()
                                .ok_or_else(|| Error::Schedule(format!("client {k} trains without parameters")))?;
                            let seed = event_seed(config.seed, round, k);
                            let (p, seg) = models::train_local(&config.model, start, &partition[k], epochs, seed)?;
                            Ok((p, seg.rebased(round * epochs, round)))
                        })
                        .collect();
                    for (ev, out) in batch.iter().zip(outputs) {
                        let (p, seg) = out?;
                        traces[ev.actor].append(seg);
                        latest[ev.actor] = Some(p);
                    }
                    i = j;
                    continue;
                }
                Action::Broadcast { targets } => {
                    let k = ev.actor;
                    if config.kind == DeploymentKind::AggregateStar {
                        let p = held[k].clone();
                        for &t in targets {
                            held[t] = p.clone();
                        }
                    }
                }
                Action::Aggregate { sources, weights, .. } => {
                    let inputs: Vec<&ParamVector> = sources
                        .iter()
                        .map(|&s| {
                            latest[s]
                                .as_ref()
                                .ok_or_else(|| Error::Schedule(format!("client {s} has no output yet")))
                        })
                        .collect::<Result<_>>()?;
                    let agg = weighted_sum(&inputs, weights)?;
                    let k = ev.actor;
                    held[k] = Some(agg.clone());
                    match config.kind {
                        DeploymentKind::AggregateStar => round_params.push(vec![agg.clone()]),
                        _ => {
                            if k == 0 {
                                round_params.push(Vec::with_capacity(n));
                            }
                            round_params.last_mut().expect("round started").push(agg.clone());
                        }
                    }
                    global = Some(agg);
                }
                Action::Forward { .. } => return Err(Error::Schedule("forward in a concurrent schedule".into())),
            }
            i += 1;
        }
    }

    let final_params: Vec<ParamVector> = if config.kind == DeploymentKind::AggregateMesh {
        held.into_iter()
            .map(|h| h.expect("mesh clients hold aggregates"))
            .collect()
    } else {
        latest.into_iter().map(|l| l.expect("every client trains")).collect()
    };

    let convergence = traces
        .iter()
        .map(|t| config.convergence.detect(t))
        .collect::<Result<Vec<_>>>()?;
    let (client_f1, client_accuracy): (Vec<f64>, Vec<f64>) = final_params
        .iter()
        .map(|p| test_scores(p, test))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let (round_f1, round_accuracy): (Vec<f64>, Vec<f64>) = round_params
        .iter()
        .map(|r| test_scores(&r[0], test))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let (mean_f1, mean_accuracy) = if config.kind.is_sequential() {
        (mean(&client_f1), mean(&client_accuracy))
    } else {
        (mean(&round_f1), mean(&round_accuracy))
    };

    Ok(RunResult {
        kind: config.kind,
        epochs_per_event: epochs,
        schedule,
        traces,
        final_params,
        global_params: global,
        round_params,
        convergence,
        client_f1,
        client_accuracy,
        round_f1,
        round_accuracy,
        mean_f1,
        mean_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ParamVector {
        ParamVector {
            weights: vec![v],
            bias: v,
        }
    }

    #[test]
    fn budgets() {
        assert_eq!(epoch_budget(DeploymentKind::ContinuousLinear, 500, 5, 1).unwrap(), 100);
        assert_eq!(epoch_budget(DeploymentKind::ContinuousRing, 500, 5, 2).unwrap(), 50);
        assert_eq!(epoch_budget(DeploymentKind::AggregateStar, 500, 5, 5).unwrap(), 100);
        assert_eq!(epoch_budget(DeploymentKind::AggregateRing, 1000, 5, 2).unwrap(), 100);
        assert!(matches!(
            epoch_budget(DeploymentKind::ContinuousRing, 9, 5, 2),
            Err(Error::InfeasibleBudget { total: 9, divisor: 10 })
        ));
        assert!(epoch_budget(DeploymentKind::AggregateMesh, 0, 5, 2).is_err());
    }

    #[test]
    fn names_roundtrip() {
        for k in DeploymentKind::ALL {
            assert_eq!(k.name().parse::<DeploymentKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), k.name());
        }
        assert!("continuous_star".parse::<DeploymentKind>().is_err());
    }

    fn cfg(kind: DeploymentKind, n: usize) -> DeploymentConfig {
        DeploymentConfig::new(kind, n, 500, ModelSpec::svm(), 3)
    }

    #[test]
    fn star_event_counts() {
        let s = build_schedule(&cfg(DeploymentKind::AggregateStar, 5), &[10; 5]).unwrap();
        let count = |f: fn(&Action) -> bool| s.iter().filter(|e| f(&e.action)).count();
        assert_eq!(count(|a| matches!(a, Action::Broadcast { .. })), 5);
        assert_eq!(count(|a| matches!(a, Action::Train { .. })), 25);
        assert_eq!(count(|a| matches!(a, Action::Aggregate { .. })), 5);
    }

    #[test]
    fn first_chain_aggregate_precedes_client_two() {
        let s = build_schedule(&cfg(DeploymentKind::AggregateLinear, 5), &[1, 2, 3, 4, 5]).unwrap();
        let first = s
            .iter()
            .position(|e| matches!(e.action, Action::Aggregate { .. }))
            .unwrap();
        assert_eq!(s[first].actor, 2);
        let Action::Aggregate { sources, weights, .. } = &s[first].action else {
            unreachable!()
        };
        assert_eq!(sources, &vec![0, 1]);
        assert_eq!(weights, &vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(s[first + 1].action, Action::Train { epochs: 100, round: 0 });
        assert_eq!(s[first + 1].actor, 2);
    }

    #[test]
    fn ring_wraps_around() {
        let s = build_schedule(&cfg(DeploymentKind::ContinuousRing, 3), &[1; 3]).unwrap();
        let trains: Vec<(usize, usize)> = s
            .iter()
            .filter_map(|e| match e.action {
                Action::Train { round, .. } => Some((round, e.actor)),
                _ => None,
            })
            .collect();
        assert_eq!(trains, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
        assert!(s
            .iter()
            .any(|e| e.actor == 2 && e.action == Action::Forward { target: 0 }));
    }

    #[test]
    fn linear_ignores_rounds() {
        let mut c = cfg(DeploymentKind::ContinuousLinear, 5);
        c.n_rounds = 7;
        let s = build_schedule(&c, &[1; 5]).unwrap();
        assert_eq!(s.iter().filter(|e| matches!(e.action, Action::Train { .. })).count(), 5);
    }

    #[test]
    fn invalid_schedules() {
        assert!(build_schedule(&cfg(DeploymentKind::AggregateRing, 2), &[1; 2]).is_err());
        assert!(build_schedule(&cfg(DeploymentKind::AggregateMesh, 3), &[1; 2]).is_err());
        assert!(matches!(
            build_schedule(&cfg(DeploymentKind::AggregateMesh, 3), &[1, 0, 1]),
            Err(Error::EmptyClient(1))
        ));
    }

    #[test]
    fn chain_aggregate_examples() {
        let v = scalar(0.7);
        assert_eq!(chain_aggregate(&v, &v, 5, 5, 10).unwrap(), v);
        assert_eq!(
            chain_aggregate(&scalar(1.0), &scalar(2.0), 100, 300, 400).unwrap(),
            scalar(1.75)
        );
        let e1 = ParamVector {
            weights: vec![1.0, 0.0],
            bias: 0.0,
        };
        let e2 = ParamVector {
            weights: vec![0.0, 1.0],
            bias: 0.0,
        };
        let mid = chain_aggregate(&e1, &e2, 1, 1, 2).unwrap();
        assert_eq!(mid.weights, vec![0.5, 0.5]);
        assert!(chain_aggregate(&e1, &scalar(1.0), 1, 1, 2).is_err());
        assert!(chain_aggregate(&e1, &e2, 1, 1, 1).is_err());
    }

    #[test]
    fn fedavg_examples() {
        let v = scalar(-0.3);
        assert_eq!(
            fedavg_aggregate(&[v.clone(), v.clone(), v.clone()], &[1, 2, 3]).unwrap(),
            v
        );
        assert_eq!(
            fedavg_aggregate(&[scalar(0.0), scalar(4.0)], &[1, 3]).unwrap(),
            scalar(3.0)
        );
        assert!(matches!(fedavg_aggregate(&[], &[]), Err(Error::EmptyAggregation)));
        assert!(fedavg_aggregate(&[scalar(1.0), ParamVector::zeros(2)], &[1, 1]).is_err());
    }
}
