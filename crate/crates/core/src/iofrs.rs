//! Iterative orthogonal forward regression with simulation-based model
//! selection.
//!
//! Each iteration grows one path per pre-selected term, discards candidates
//! that fail the stability probe, and scores the rest by BIC on the free-run
//! error over the training record. The winner's terms seed the next
//! iteration until its term set repeats.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CandidateSummary, Error, Result};
use crate::ofr::{default_max_terms, ofr_select, Criterion, SelectionPath, StopRule};
use crate::regressors::{build_problem, IoData, RegressionProblem};
use crate::scalar::{sum_sq, Real};
use crate::sim::{simulate_free_run, stability_probe, Model, ProbeSettings, StabilityVerdict};
use crate::term::{Dictionary, LagSpec, Term};

/// Added to the simulated error before taking the logarithm.
const BIC_LOG_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IofrsConfig {
    pub max_iterations: usize,
    pub criterion: Criterion,
    /// Path length cap; `None` uses [`default_max_terms`].
    pub max_terms: Option<usize>,
    pub stop: StopRule,
    pub parallel_paths: bool,
    pub probe: ProbeSettings,
}

impl Default for IofrsConfig {
    fn default() -> Self {
        IofrsConfig {
            max_iterations: 10,
            criterion: Criterion::Press,
            max_terms: None,
            stop: StopRule::Default,
            parallel_paths: true,
            probe: ProbeSettings::default(),
        }
    }
}

impl IofrsConfig {
    pub fn epsilon(&self) -> f64 {
        self.probe.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.max_terms == Some(0) {
            return Err(Error::Config("max_terms must be at least 1".into()));
        }
        if self.probe.epsilon.is_nan() || self.probe.epsilon <= 0.0 {
            return Err(Error::Config("stability epsilon must be positive".into()));
        }
        if self.probe.n_sim <= self.probe.n_settle {
            return Err(Error::Config("n_sim must exceed n_settle".into()));
        }
        Ok(())
    }

    pub fn resolved_max_terms<T: Real>(&self, problem: &RegressionProblem<T>) -> usize {
        self.max_terms.unwrap_or_else(|| default_max_terms(problem.n_columns(), problem.n_rows()))
    }
}

/// `n ln(msse + 1e-300) + k ln n`.
pub fn bic_of<T: Real>(msse: T, n_samples: usize, n_params: usize) -> T {
    let n = T::from_usize_lossy(n_samples);
    n * (msse + T::lit(BIC_LOG_GUARD)).ln() + T::from_usize_lossy(n_params) * n.ln()
}

#[derive(Debug, Clone)]
pub struct PoolEntry<T> {
    pub iteration: usize,
    /// Forced first term of the path that produced this model.
    pub origin: Term,
    pub path: SelectionPath<T>,
    pub model: Model<T>,
    pub verdict: StabilityVerdict<T>,
    /// Free-run mean squared error on the training record; `None` when the
    /// model is unstable or its simulation diverged.
    pub msse: Option<T>,
    pub bic: Option<T>,
}

impl<T: Real> PoolEntry<T> {
    pub fn eligible(&self) -> bool {
        self.verdict.stable && self.bic.is_some()
    }

    fn summary(&self) -> CandidateSummary {
        CandidateSummary {
            origin: self.origin.to_string(),
            terms: self.model.term_set().iter().map(ToString::to_string).collect(),
            stable: self.verdict.stable,
            diverged: self.verdict.diverged,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelPool<T> {
    pub candidates: Vec<PoolEntry<T>>,
}

#[derive(Debug, Clone)]
pub struct IofrsResult<T> {
    /// Every candidate from every iteration, in (iteration, path) order.
    pub pool: ModelPool<T>,
    /// Index into `pool.candidates` of the lowest-BIC stable model.
    pub best: usize,
    pub iterations: usize,
    /// Candidate scorings across all paths.
    pub evaluations: usize,
    /// Best BIC after each iteration.
    pub bic_trace: Vec<T>,
}

impl<T: Real> IofrsResult<T> {
    pub fn best_entry(&self) -> &PoolEntry<T> {
        &self.pool.candidates[self.best]
    }

    pub fn model(&self) -> &Model<T> {
        &self.best_entry().model
    }

    pub fn bic(&self) -> T {
        self.best_entry().bic.expect("best entry is eligible")
    }

    pub fn msse(&self) -> T {
        self.best_entry().msse.expect("best entry is eligible")
    }
}

/// Free-run MSSE of `model` over the rows of `problem`, seeding the
/// simulation with the measured outputs preceding the first row.
pub fn training_msse<T: Real>(model: &Model<T>, data: &IoData<T>, offset: usize) -> Result<T> {
    let seed = offset.max(model.max_lag());
    let sim = simulate_free_run(model, data.u(), &data.y()[..seed])?;
    let n = data.len() - offset;
    let sse: T = data.y()[offset..].iter().zip(&sim[offset..]).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(sse / T::from_usize_lossy(n))
}

/// Scores a finished path: model, stability verdict, MSSE and BIC. The MSSE
/// entering the BIC is clamped at the working precision's round-off floor
/// so that near-exact fits are ranked by parsimony alone.
pub(crate) fn evaluate_path<T: Real>(
    problem: &RegressionProblem<T>,
    data: &IoData<T>,
    path: SelectionPath<T>,
    origin: Term,
    iteration: usize,
    lag_spec: LagSpec,
    cfg: &IofrsConfig,
) -> Result<PoolEntry<T>> {
    let model = Model::from_path(problem, &path, lag_spec, cfg.criterion)?;
    let verdict = stability_probe(&model, T::lit(cfg.probe.epsilon), cfg.probe.n_sim, cfg.probe.n_settle);
    let (msse, bic) = if verdict.stable {
        match training_msse(&model, data, problem.offset()) {
            Ok(m) => {
                let floor = T::MSSE_FLOOR * sum_sq(problem.target()) / T::from_usize_lossy(problem.n_rows());
                (Some(m), Some(bic_of(m.max(floor), problem.n_rows(), model.n_params())))
            }
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(PoolEntry { iteration, origin, path, model, verdict, msse, bic })
}

fn term_key(model: &Model<impl Real>) -> BTreeSet<Term> {
    model.term_set().into_iter().collect()
}

/// Runs iOFR_S over `dict` starting from the pre-selected terms.
///
/// `data` is the training record; the regression problem is built from it.
/// Pre-selected terms absent from `dict` are an error.
pub fn iofrs<T: Real>(
    dict: &Dictionary,
    preselect: &[Term],
    data: &IoData<T>,
    lag_spec: LagSpec,
    cfg: &IofrsConfig,
) -> Result<IofrsResult<T>> {
    let problem = build_problem(data, dict)?;
    iofrs_on(&problem, preselect, data, lag_spec, cfg)
}

/// [`iofrs`] over an already built problem.
pub fn iofrs_on<T: Real>(
    problem: &RegressionProblem<T>,
    preselect: &[Term],
    data: &IoData<T>,
    lag_spec: LagSpec,
    cfg: &IofrsConfig,
) -> Result<IofrsResult<T>> {
    cfg.validate()?;
    let dict = problem.dictionary();
    let mut seeds: Vec<usize> = preselect
        .iter()
        .map(|t| dict.index_of(t).ok_or_else(|| Error::Config(format!("pre-selected term {t} not in dictionary"))))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(Error::Config("pre-select set is empty".into()));
    }
    let max_terms = cfg.resolved_max_terms(problem);

    let mut pool = ModelPool::default();
    let mut best: Option<usize> = None;
    let mut seen: Vec<BTreeSet<Term>> = Vec::new();
    let mut evaluations = 0;
    let mut bic_trace = Vec::new();
    let mut iterations = 0;

    for iteration in 0..cfg.max_iterations {
        iterations = iteration + 1;
        let run = |&p: &usize| -> Result<PoolEntry<T>> {
            let path = ofr_select(problem, cfg.criterion, Some(p), max_terms, cfg.stop)?;
            evaluate_path(problem, data, path, dict.terms()[p].clone(), iteration, lag_spec, cfg)
        };
        let entries: Vec<PoolEntry<T>> = if cfg.parallel_paths {
            seeds.par_iter().map(run).collect::<Result<_>>()?
        } else {
            seeds.iter().map(run).collect::<Result<_>>()?
        };
        let first = pool.candidates.len();
        evaluations += entries.iter().map(|e| e.path.evaluations).sum::<usize>();
        pool.candidates.extend(entries);

        let mut iter_best: Option<usize> = None;
        for i in first..pool.candidates.len() {
            let e = &pool.candidates[i];
            if !e.eligible() || e.path.is_empty() {
                continue;
            }
            if iter_best.is_none_or(|b| e.bic < pool.candidates[b].bic) {
                iter_best = Some(i);
            }
        }
        let Some(ib) = iter_best else {
            if let Some(b) = best {
                bic_trace.push(pool.candidates[b].bic.unwrap());
            }
            log::debug!("iteration {iteration}: no stable candidate");
            break;
        };
        if best.is_none_or(|b| pool.candidates[ib].bic < pool.candidates[b].bic) {
            best = Some(ib);
        }
        bic_trace.push(pool.candidates[best.unwrap()].bic.unwrap());

        let key = term_key(&pool.candidates[ib].model);
        log::debug!(
            "iteration {iteration}: {} paths, best {:?}",
            pool.candidates.len() - first,
            key.iter().map(ToString::to_string).collect::<Vec<_>>()
        );
        if seen.contains(&key) {
            break;
        }
        seen.push(key);
        seeds = pool.candidates[ib].path.indices();
    }

    match best {
        Some(best) => Ok(IofrsResult { pool, best, iterations, evaluations, bic_trace }),
        None => Err(Error::NoStableModel { pool: pool.candidates.iter().map(PoolEntry::summary).collect() }),
    }
}
