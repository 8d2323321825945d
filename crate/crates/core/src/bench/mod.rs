//! Synthetic Gaussian-mixture benchmark.
//!
//! Each trial draws two random mixing-weight vectors over the same Gaussian
//! components, draws one sample from each mixture, and asks every algorithm
//! for a clustering of the pooled points. Accuracy is the fraction of points
//! matched to their true component under the best cluster-to-component
//! assignment.

mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    accuracy_best_assignment, best_matching_exhaustive, best_matching_hungarian, sign_test_pvalue, EXHAUSTIVE_LIMIT,
};

use crate::baselines::{kmeans, pca_projection, random_projection, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use crate::data::{format_f64, Dataset};
use crate::dsc::{build_tree, DscConfig};
use crate::error::{Error, Result};
use crate::msp::{self, MspConfig, DEFAULT_RANK_TOL};
use crate::rng::RngHandle;
use crate::theory::compute_gap;

/// Accuracy differences at or below this are ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Kmeans,
    RandomProj,
    PcaProj,
    Msp,
    Dsc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Kmeans,
        Algorithm::RandomProj,
        Algorithm::PcaProj,
        Algorithm::Msp,
        Algorithm::Dsc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::RandomProj => "random_proj",
            Algorithm::PcaProj => "pca_proj",
            Algorithm::Msp => "msp",
            Algorithm::Dsc => "dsc",
        }
    }

    fn stream(self) -> u64 {
        16 + self as u64
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown algorithm '{s}' (expected one of kmeans, random_proj, pca_proj, msp, dsc)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One mean per component, in the signal dimensions.
    pub base_centers: Vec<Vec<f64>>,
    /// Standard deviation of every signal coordinate (0 puts points on the
    /// centers exactly).
    pub signal_sigma: f64,
    /// Number of pure-noise dimensions appended after the signal ones.
    pub noise_dims: usize,
    pub noise_sigma: f64,
    pub points_per_sample: usize,
    pub num_trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub projection_target_dim: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub dsc: DscConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            base_centers: vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![-3.0, 3.0]],
            signal_sigma: 1.0,
            noise_dims: 0,
            noise_sigma: 1.0,
            points_per_sample: 80,
            num_trials: 100,
            algorithms: Algorithm::ALL.to_vec(),
            projection_target_dim: 1,
            kmeans_restarts: DEFAULT_RESTARTS,
            kmeans_max_iter: DEFAULT_MAX_ITER,
            dsc: DscConfig::for_components(3),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn num_components(&self) -> usize {
        self.base_centers.len()
    }

    pub fn signal_dims(&self) -> usize {
        self.base_centers.first().map_or(0, Vec::len)
    }

    pub fn total_dims(&self) -> usize {
        self.signal_dims() + self.noise_dims
    }

    /// Set the total dimension, keeping the signal dimensions.
    pub fn with_total_dims(mut self, dims: usize) -> Result<Self> {
        self.noise_dims = dims
            .checked_sub(self.signal_dims())
            .ok_or_else(|| Error::Config(format!("dims must be at least {}", self.signal_dims())))?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_components();
        let bad = |m: String| Err(Error::Config(m));
        if k == 0 {
            return bad("base_centers is empty".into());
        }
        let sd = self.signal_dims();
        if sd == 0 || self.base_centers.iter().any(|c| c.len() != sd) {
            return bad("base_centers must be non-empty vectors of one dimension".into());
        }
        if self.base_centers.iter().flatten().any(|x| !x.is_finite()) {
            return bad("base_centers must be finite".into());
        }
        if !(self.signal_sigma >= 0.0 && self.signal_sigma.is_finite()) {
            return bad("signal_sigma must be finite and non-negative".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative".into());
        }
        if self.points_per_sample < k {
            return bad(format!("points_per_sample must be at least K = {k}"));
        }
        if self.num_trials == 0 {
            return bad("num_trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if self.projection_target_dim == 0 || self.projection_target_dim > self.total_dims() {
            return bad(format!("projection_target_dim must lie in 1..={}", self.total_dims()));
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be at least 1".into());
        }
        self.dsc.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a JSON or TOML config, chosen by file extension (`.toml` is TOML,
    /// everything else JSON). Missing fields take their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The two labelled samples of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub s1: Dataset,
    pub s2: Dataset,
    pub labels1: Vec<usize>,
    pub labels2: Vec<usize>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub rng: RngHandle,
}

impl Trial {
    pub fn pooled(&self) -> Result<(Dataset, Vec<usize>)> {
        let d = Dataset::concat(&[&self.s1, &self.s2])?.with_sample_id("pooled");
        let mut labels = self.labels1.clone();
        labels.extend(&self.labels2);
        Ok((d, labels))
    }
}

/// Uniform draws on `[0, 1)` normalised to sum to one.
fn random_weights(k: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            return raw.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Draw trial `trial`. Everything comes from the stream
/// `(cfg.seed, trial)`: weights from sub-stream 0, the signal coordinates
/// and labels of sample `j` from sub-stream `j`, and its noise coordinates
/// from sub-stream `2 + j`, so the signal does not depend on `noise_dims`.
pub fn generate_trial(cfg: &ExperimentConfig, trial: u64) -> Result<Trial> {
    cfg.validate()?;
    let handle = RngHandle::new(cfg.seed, trial);
    let k = cfg.num_components();
    let mut wrng = handle.split(0).rng();
    let phi1 = random_weights(k, &mut wrng);
    let phi2 = random_weights(k, &mut wrng);

    let sample = |phi: &[f64], j: u64| -> Result<(Dataset, Vec<usize>)> {
        let n = cfg.points_per_sample;
        let dim = cfg.total_dims();
        let sd = cfg.signal_dims();
        let pick = WeightedIndex::new(phi).map_err(|e| Error::InvalidWeights(e.to_string()))?;
        let mut srng = handle.split(j).rng();
        let mut nrng = handle.split(2 + j).rng();
        let mut coords = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = pick.sample(&mut srng);
            labels.push(c);
            for m in &cfg.base_centers[c] {
                let z: f64 = StandardNormal.sample(&mut srng);
                coords.push(m + cfg.signal_sigma * z);
            }
            for _ in sd..dim {
                let z: f64 = StandardNormal.sample(&mut nrng);
                coords.push(cfg.noise_sigma * z);
            }
        }
        Ok((Dataset::from_flat(dim, coords, j.to_string())?, labels))
    };
    let (s1, labels1) = sample(&phi1, 1)?;
    let (s2, labels2) = sample(&phi2, 2)?;
    Ok(Trial {
        s1,
        s2,
        labels1,
        labels2,
        phi1,
        phi2,
        rng: handle,
    })
}

/// Everything an algorithm needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Number of clusters for the k-means based methods.
    pub k: usize,
    pub projection_target_dim: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub dsc: DscConfig,
}

impl ClusterParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            projection_target_dim: 1,
            kmeans_restarts: DEFAULT_RESTARTS,
            kmeans_max_iter: DEFAULT_MAX_ITER,
            dsc: DscConfig::for_components(k),
        }
    }
}

impl ExperimentConfig {
    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            k: self.num_components(),
            projection_target_dim: self.projection_target_dim,
            kmeans_restarts: self.kmeans_restarts,
            kmeans_max_iter: self.kmeans_max_iter,
            dsc: self.dsc,
        }
    }
}

/// Cluster ids for the pooled points of `trial` under one algorithm.
pub fn cluster_trial(cfg: &ExperimentConfig, trial: &Trial, alg: Algorithm) -> Result<Vec<usize>> {
    let rng = trial.rng.split(alg.stream());
    let (pooled, _) = trial.pooled()?;
    cluster_samples(&cfg.cluster_params(), &trial.s1, &trial.s2, &pooled, alg, rng)
}

/// Run `alg` on two samples and label the points of `targets`.
///
/// The single-sample methods fit on `targets` themselves (the pooled data
/// in the benchmark); MSP and DSC fit on the two samples and then label
/// `targets`.
pub fn cluster_samples(
    params: &ClusterParams,
    s1: &Dataset,
    s2: &Dataset,
    targets: &Dataset,
    alg: Algorithm,
    rng: RngHandle,
) -> Result<Vec<usize>> {
    let k = params.k;
    let t = params.projection_target_dim;
    let km = |d: &Dataset, r: RngHandle| -> Result<Vec<usize>> {
        Ok(kmeans(d, k, params.kmeans_restarts, params.kmeans_max_iter, r)?.assignments)
    };
    match alg {
        Algorithm::Kmeans => km(targets, rng),
        Algorithm::RandomProj => km(&random_projection(targets, t, rng.split(0))?, rng.split(1)),
        Algorithm::PcaProj => km(&pca_projection(targets, t)?.data, rng.split(1)),
        Algorithm::Msp => {
            let cfg = MspConfig {
                rank_tol: DEFAULT_RANK_TOL,
                max_rank: Some(t.min(k.saturating_sub(1)).max(1)),
            };
            let basis = msp::fit(&[s1.clone(), s2.clone()], &cfg)?;
            km(&msp::project(&basis, targets)?, rng.split(1))
        }
        Algorithm::Dsc => build_tree(s1, s2, &params.dsc, rng)?.assign_all(targets),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: u64,
    /// Accuracy per algorithm, in the configured algorithm order.
    pub accuracies: Vec<(Algorithm, f64)>,
    pub mixing_weights_used: [Vec<f64>; 2],
    /// Gap between the two weight vectors actually drawn.
    pub realized_gap: f64,
    pub rng: RngHandle,
}

impl TrialResult {
    pub fn accuracy(&self, alg: Algorithm) -> Option<f64> {
        self.accuracies.iter().find(|(a, _)| *a == alg).map(|(_, v)| *v)
    }
}

/// Run every configured algorithm on trial `trial_index`.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: u64) -> Result<TrialResult> {
    let trial = generate_trial(cfg, trial_index)?;
    let (_, truth) = trial.pooled()?;
    let k = cfg.num_components();
    let accuracies = cfg
        .algorithms
        .iter()
        .map(|&alg| {
            let pred = cluster_trial(cfg, &trial, alg)?;
            Ok((alg, accuracy_best_assignment(&pred, &truth, k)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let realized_gap = if k >= 2 { compute_gap(&trial.phi1, &trial.phi2)?.gap } else { 0.0 };
    Ok(TrialResult {
        trial_index,
        accuracies,
        realized_gap,
        mixing_weights_used: [trial.phi1, trial.phi2],
        rng: trial.rng,
    })
}

/// Head-to-head record of `a` against `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Algorithm,
    pub b: Algorithm,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// `wins / (wins + losses)`, or 0 when every trial tied.
    pub win_rate: f64,
    /// One-sided sign test of `a` beating `b`, ties excluded.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub num_trials: u64,
    pub total_dims: usize,
    pub mean_accuracy: BTreeMap<Algorithm, f64>,
    /// Every ordered pair of distinct algorithms.
    pub comparisons: Vec<Comparison>,
}

impl ExperimentSummary {
    pub fn comparison(&self, a: Algorithm, b: Algorithm) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub summary: ExperimentSummary,
}

/// Run all trials in parallel; results are ordered by trial index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let trials = (0..cfg.num_trials as u64)
        .into_par_iter()
        .map(|t| {
            run_trial(cfg, t).map_err(|e| Error::Trial {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, &trials)?;
    Ok(ExperimentReport {
        config: cfg.clone(),
        trials,
        summary,
    })
}

pub fn summarize(cfg: &ExperimentConfig, trials: &[TrialResult]) -> Result<ExperimentSummary> {
    let acc = |t: &TrialResult, a: Algorithm| {
        t.accuracy(a)
            .ok_or_else(|| Error::invalid(format!("trial {} has no result for {a}", t.trial_index)))
    };
    let mut mean_accuracy = BTreeMap::new();
    for &a in &cfg.algorithms {
        let mut s = 0.0;
        for t in trials {
            s += acc(t, a)?;
        }
        mean_accuracy.insert(a, s / trials.len().max(1) as f64);
    }
    let mut comparisons = Vec::new();
    for &a in &cfg.algorithms {
        for &b in &cfg.algorithms {
            if a == b {
                continue;
            }
            let (mut wins, mut losses, mut ties) = (0, 0, 0);
            for t in trials {
                let d = acc(t, a)? - acc(t, b)?;
                if d.abs() <= TIE_TOL {
                    ties += 1;
                } else if d > 0.0 {
                    wins += 1;
                } else {
                    losses += 1;
                }
            }
            let decided = wins + losses;
            comparisons.push(Comparison {
                a,
                b,
                wins,
                losses,
                ties,
                win_rate: if decided > 0 { wins as f64 / decided as f64 } else { 0.0 },
                p_value: sign_test_pvalue(wins, decided)?,
            });
        }
    }
    Ok(ExperimentSummary {
        num_trials: trials.len() as u64,
        total_dims: cfg.total_dims(),
        mean_accuracy,
        comparisons,
    })
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(";")
}

/// One row per (trial, algorithm).
pub fn write_trials_csv(path: impl AsRef<Path>, trials: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "trial", "algorithm", "accuracy", "phi1", "phi2", "realized_gap", "seed", "stream_id",
    ])?;
    for t in trials {
        for (alg, a) in &t.accuracies {
            w.write_record([
                t.trial_index.to_string(),
                alg.to_string(),
                format_f64(*a),
                join(&t.mixing_weights_used[0]),
                join(&t.mixing_weights_used[1]),
                format_f64(t.realized_gap),
                t.rng.seed.to_string(),
                t.rng.stream_id.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: impl AsRef<Path>, summary: &ExperimentSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
