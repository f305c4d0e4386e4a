//! Empirical mean-square-error curves over many sampled realizations.
//!
//! Trial `r` samples its realization from `derive_seed(seed, r)`, so adding
//! trials never changes earlier ones. Trials are grouped into fixed blocks of
//! [`BLOCK_TRIALS`]; each block is reduced sequentially and blocks are merged
//! in index order, which makes the output independent of thread count.

use rayon::prelude::*;

use crate::analysis::{CurveKind, CurveParams, MseCurve};
use crate::error::{Error, Result};
use crate::problem::{derive_seed, ProblemSpec};
use crate::solver::{run_with, Algorithm, SolverConfig};

pub const BLOCK_TRIALS: usize = 64;
/// Upper limit on retained per-trial curves.
pub const MAX_RETAINED: usize = 20;

/// Per-`t` mean and standard error of `(1/N)‖x[t] - x̄‖²`.
///
/// `stderr` is `sqrt(s²/R)` with the unbiased sample variance `s²`; for a
/// single trial it is reported as 0 rather than undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCurve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: usize,
    pub realization_samples: Option<Vec<Vec<f64>>>,
}

impl EmpiricalCurve {
    pub fn horizon(&self) -> usize {
        self.mean.len() - 1
    }

    pub fn to_mse_curve(&self, params: CurveParams) -> MseCurve {
        MseCurve {
            values: self.mean.clone(),
            kind: CurveKind::Empirical,
            params,
        }
    }

    /// Index and value of the smallest mean (first one on ties).
    pub fn argmin(&self) -> (usize, f64) {
        self.mean
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (t, v)| if v < best.1 { (t, v) } else { best })
    }
}

/// Monte Carlo run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// Number of leading trials whose full curves are kept (at most [`MAX_RETAINED`]).
    pub retain: usize,
    /// Worker threads; the global rayon pool when unset.
    pub threads: Option<usize>,
}

impl MonteCarlo {
    pub fn new(horizon: usize, trials: usize, seed: u64) -> Self {
        Self {
            horizon,
            trials,
            seed,
            retain: 0,
            threads: None,
        }
    }

    pub fn retain(mut self, count: usize) -> Self {
        self.retain = count.min(MAX_RETAINED);
        self
    }

    pub fn threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    /// Empirical MSE of one algorithm.
    pub fn empirical_mse(
        &self,
        spec: &ProblemSpec,
        cfg: &SolverConfig,
        algorithm: Algorithm,
    ) -> Result<EmpiricalCurve> {
        let mut curves = self.simulate(spec, cfg, &[algorithm])?;
        Ok(curves.pop().unwrap())
    }

    /// Regularized and baseline curves over the same realizations.
    pub fn compare_algorithms(
        &self,
        spec: &ProblemSpec,
        cfg: &SolverConfig,
    ) -> Result<(EmpiricalCurve, EmpiricalCurve)> {
        let mut curves = self.simulate(spec, cfg, &[Algorithm::Regularized, Algorithm::Baseline])?;
        let baseline = curves.pop().unwrap();
        let regularized = curves.pop().unwrap();
        Ok((regularized, baseline))
    }

    fn simulate(
        &self,
        spec: &ProblemSpec,
        cfg: &SolverConfig,
        algorithms: &[Algorithm],
    ) -> Result<Vec<EmpiricalCurve>> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("at least one trial is required".into()));
        }
        for &a in algorithms {
            match a {
                Algorithm::Regularized => cfg.check(spec.graph())?,
                Algorithm::Baseline => cfg.check_baseline(spec.graph())?,
            }
        }
        let blocks = self.trials.div_ceil(BLOCK_TRIALS);
        let reduce = || -> Result<Vec<Block>> {
            (0..blocks)
                .into_par_iter()
                .map(|b| self.run_block(spec, cfg, algorithms, b))
                .collect()
        };
        let per_block = match self.threads {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
                .install(reduce)?,
            None => reduce()?,
        };

        let len = self.horizon + 1;
        let mut merged: Vec<Stats> = algorithms.iter().map(|_| Stats::new(len)).collect();
        let mut samples: Vec<Vec<Vec<f64>>> = algorithms.iter().map(|_| Vec::new()).collect();
        for block in per_block {
            for (k, stats) in block.stats.into_iter().enumerate() {
                merged[k].merge(&stats);
            }
            for (k, kept) in block.samples.into_iter().enumerate() {
                samples[k].extend(kept);
            }
        }
        Ok(merged
            .into_iter()
            .zip(samples)
            .map(|(stats, kept)| stats.finish(self.trials, (self.retain > 0).then_some(kept)))
            .collect())
    }

    fn run_block(
        &self,
        spec: &ProblemSpec,
        cfg: &SolverConfig,
        algorithms: &[Algorithm],
        block: usize,
    ) -> Result<Block> {
        let len = self.horizon + 1;
        let n = spec.graph().node_count() as f64;
        let first = block * BLOCK_TRIALS;
        let last = (first + BLOCK_TRIALS).min(self.trials);
        let mut stats: Vec<Stats> = algorithms.iter().map(|_| Stats::new(len)).collect();
        let mut samples: Vec<Vec<Vec<f64>>> = algorithms.iter().map(|_| Vec::new()).collect();
        let mut curve = vec![0.0; len];
        for r in first..last {
            let realization = spec.sample_realization(derive_seed(self.seed, r as u64));
            for (k, &algorithm) in algorithms.iter().enumerate() {
                run_with(spec, &realization, cfg, self.horizon, algorithm, |t, x| {
                    let sq: f64 = x
                        .iter()
                        .zip(&realization.x_bar)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    curve[t] = sq / n;
                })?;
                stats[k].push(&curve);
                if r < self.retain {
                    samples[k].push(curve.clone());
                }
            }
        }
        Ok(Block { stats, samples })
    }
}

/// Convenience wrapper for [`MonteCarlo::empirical_mse`].
pub fn empirical_mse(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalCurve> {
    MonteCarlo::new(horizon, trials, seed).empirical_mse(spec, cfg, algorithm)
}

/// Convenience wrapper for [`MonteCarlo::compare_algorithms`].
pub fn compare_algorithms(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<(EmpiricalCurve, EmpiricalCurve)> {
    MonteCarlo::new(horizon, trials, seed).compare_algorithms(spec, cfg)
}

struct Block {
    stats: Vec<Stats>,
    samples: Vec<Vec<Vec<f64>>>,
}

/// Per-`t` running mean and sum of squared deviations.
struct Stats {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Stats {
    fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / k;
            *s += d * (v - *m);
        }
    }

    fn merge(&mut self, other: &Stats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean.clone_from(&other.mean);
            self.m2.clone_from(&other.m2);
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for t in 0..self.mean.len() {
            let d = other.mean[t] - self.mean[t];
            self.mean[t] += d * nb / n;
            self.m2[t] += other.m2[t] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    fn finish(self, trials: usize, samples: Option<Vec<Vec<f64>>>) -> EmpiricalCurve {
        debug_assert_eq!(self.count, trials);
        let stderr = if trials > 1 {
            let r = trials as f64;
            self.m2.iter().map(|s| (s / (r - 1.0) / r).sqrt()).collect()
        } else {
            vec![0.0; self.mean.len()]
        };
        EmpiricalCurve {
            mean: self.mean,
            stderr,
            trials,
            realization_samples: samples,
        }
    }
}
