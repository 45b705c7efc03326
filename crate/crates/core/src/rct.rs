//! End-to-end (N)ARX identification with optional candidate-reduction
//! ("RCT") strategies.
//!
//! An ARX model is always identified first over the linear dictionary. When a
//! NARX model is requested, the full expansion and the expansion of the ARX
//! terms are formed and iOFR_S runs under the selected method:
//!
//! | method | pre-select set                   | searched dictionary |
//! |--------|----------------------------------|---------------------|
//! | none   | full expansion                   | full expansion      |
//! | 1      | reduced expansion                | reduced expansion   |
//! | 2      | overfit OFR on full expansion    | full expansion      |
//! | 3      | overfit OFR on reduced expansion | reduced expansion   |
//! | 4      | overfit OFR on reduced expansion | full expansion      |
//!
//! The NARX model is kept only if its BIC is strictly lower than the ARX one.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CandidateSummary, Error, Result};
use crate::iofrs::{iofrs_on, IofrsConfig, IofrsResult};
use crate::ofr::{ofr_select, Criterion, StopRule};
use crate::regressors::{build_problem_with_offset, IoData, RegressionProblem};
use crate::scalar::Real;
use crate::sim::Model;
use crate::term::{build_linear_dictionary, expand_dictionary, reduce_dictionary, LagSpec, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RctMethod {
    None,
    M1,
    M2,
    M3,
    M4,
}

impl std::str::FromStr for RctMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "0" => Ok(RctMethod::None),
            "1" | "m1" => Ok(RctMethod::M1),
            "2" | "m2" => Ok(RctMethod::M2),
            "3" | "m3" => Ok(RctMethod::M3),
            "4" | "m4" => Ok(RctMethod::M4),
            other => Err(Error::Config(format!("unknown RCT method '{other}'"))),
        }
    }
}

impl RctMethod {
    pub const ALL: [RctMethod; 5] = [RctMethod::None, RctMethod::M1, RctMethod::M2, RctMethod::M3, RctMethod::M4];

    fn searches_reduced(self) -> bool {
        matches!(self, RctMethod::M1 | RctMethod::M3)
    }

    fn needs_reduction(self) -> bool {
        matches!(self, RctMethod::M1 | RctMethod::M3 | RctMethod::M4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Arx,
    Narx,
}

#[derive(Debug, Clone)]
pub struct StageReport<T> {
    pub dictionary_size: usize,
    pub preselect: Vec<Term>,
    pub result: IofrsResult<T>,
    /// Candidate scorings spent building the overfit pre-select model.
    pub overfit_evaluations: usize,
    pub seconds: f64,
}

impl<T: Real> StageReport<T> {
    pub fn model(&self) -> &Model<T> {
        self.result.model()
    }

    pub fn bic(&self) -> T {
        self.result.bic()
    }

    /// All candidate scorings in the stage.
    pub fn evaluations(&self) -> usize {
        self.result.evaluations + self.overfit_evaluations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRow<T> {
    pub term: String,
    pub ms_press: T,
    pub err: T,
    pub coefficient: T,
}

#[derive(Debug, Clone)]
pub struct IdentificationReport<T> {
    pub method: RctMethod,
    /// `None` when no stable ARX model exists and a NARX model was requested.
    pub arx: Option<StageReport<T>>,
    pub narx: Option<StageReport<T>>,
    /// The NARX search ran but every candidate was unstable.
    pub narx_failed: Option<Vec<CandidateSummary>>,
    pub chosen: ModelKind,
    /// Rows of the chosen model in dictionary order.
    pub table: Vec<TermRow<T>>,
}

impl<T: Real> IdentificationReport<T> {
    pub fn chosen_stage(&self) -> &StageReport<T> {
        match (self.chosen, &self.narx, &self.arx) {
            (ModelKind::Narx, Some(n), _) | (ModelKind::Arx, Some(n), None) => n,
            (_, _, Some(a)) => a,
            (_, None, None) => unreachable!("a report always holds at least one stage"),
        }
    }

    pub fn model(&self) -> &Model<T> {
        self.chosen_stage().model()
    }

    pub fn evaluations(&self) -> usize {
        self.arx.as_ref().map_or(0, StageReport::evaluations) + self.narx.as_ref().map_or(0, StageReport::evaluations)
    }
}

/// Terms of a single ERR-driven path of `size` steps over `problem`, used as
/// the initial pre-select set. Returns the terms and the scorings spent.
pub fn overfit_preselect<T: Real>(problem: &RegressionProblem<T>, size: usize) -> Result<(Vec<Term>, usize)> {
    if size == 0 || size > problem.n_columns() {
        return Err(Error::Config(format!("overfit size {size} outside 1..={} candidates", problem.n_columns())));
    }
    let path = ofr_select(problem, Criterion::Err, None, size, StopRule::MaxTerms)?;
    let dict = problem.dictionary();
    Ok((path.steps.iter().map(|s| dict.terms()[s.index].clone()).collect(), path.evaluations))
}

fn table_for<T: Real>(stage: &StageReport<T>) -> Vec<TermRow<T>> {
    let entry = stage.result.best_entry();
    let model = &entry.model;
    let mut rows: Vec<(Term, TermRow<T>)> = entry
        .path
        .steps
        .iter()
        .zip(&model.provenance.path)
        .map(|(step, name)| {
            let term: Term = name.parse().expect("rendered terms parse");
            let coefficient = if term.is_constant() {
                model.bias
            } else {
                model.terms.iter().position(|t| *t == term).map_or(T::zero(), |i| model.coefficients[i])
            };
            let row = TermRow { term: name.clone(), ms_press: step.ms_press, err: step.err, coefficient };
            (term, row)
        })
        .collect();
    rows.sort_by(|a, b| a.0.dictionary_cmp(&b.0));
    rows.into_iter().map(|(_, r)| r).collect()
}

/// Identifies an ARX model and, when `want_narx`, a NARX model under
/// `method`, keeping whichever has the lower BIC (ARX on ties).
pub fn identify<T: Real>(
    data: &IoData<T>,
    spec: &LagSpec,
    method: RctMethod,
    cfg: &IofrsConfig,
    want_narx: bool,
) -> Result<IdentificationReport<T>> {
    spec.validate()?;
    cfg.validate()?;
    let offset = spec.max_lag();

    let started = Instant::now();
    let linear = build_linear_dictionary(spec)?;
    let arx_problem = build_problem_with_offset(data, &linear, offset)?;
    let arx = match iofrs_on(&arx_problem, linear.terms(), data, *spec, cfg) {
        Ok(result) => Some(StageReport {
            dictionary_size: linear.len(),
            preselect: linear.terms().to_vec(),
            result,
            overfit_evaluations: 0,
            seconds: started.elapsed().as_secs_f64(),
        }),
        Err(Error::NoStableModel { .. }) if want_narx => {
            log::warn!("no stable ARX model; continuing with the NARX search only");
            None
        }
        Err(e) => return Err(e),
    };

    if !want_narx {
        let arx = arx.expect("ARX failures return early without NARX");
        let table = table_for(&arx);
        return Ok(IdentificationReport {
            method,
            arx: Some(arx),
            narx: None,
            narx_failed: None,
            chosen: ModelKind::Arx,
            table,
        });
    }

    let started = Instant::now();
    let full = expand_dictionary(&linear, spec.degree, spec.include_constant)?;
    let arx_linear: Vec<Term> = match &arx {
        Some(a) => a.model().terms.iter().filter(|t| t.is_linear()).cloned().collect(),
        None => Vec::new(),
    };
    if method.needs_reduction() && arx_linear.is_empty() {
        return Err(Error::Config(format!("RCT method {method:?} needs a stable ARX model with lagged terms")));
    }
    let reduced = if method.needs_reduction() {
        Some(reduce_dictionary(&arx_linear, spec.degree, spec.include_constant)?)
    } else {
        None
    };

    let search_dict = if method.searches_reduced() { reduced.as_ref().unwrap() } else { &full };
    let search = build_problem_with_offset(data, search_dict, offset)?;
    let max_terms = cfg.resolved_max_terms(&search);
    let arx_size = arx.as_ref().map_or(linear.len(), |a| a.model().term_set().len());
    let overfit_size = (2 * arx_size + 5).min(max_terms);

    let (preselect, overfit_evaluations) = match method {
        RctMethod::None | RctMethod::M1 => (search_dict.terms().to_vec(), 0),
        RctMethod::M2 | RctMethod::M3 => overfit_preselect(&search, overfit_size.min(search.n_columns()))?,
        RctMethod::M4 => {
            let red = build_problem_with_offset(data, reduced.as_ref().unwrap(), offset)?;
            overfit_preselect(&red, overfit_size.min(red.n_columns()))?
        }
    };
    let narx_result = match (iofrs_on(&search, &preselect, data, *spec, cfg), arx) {
        (Ok(r), arx) => (r, arx),
        (Err(Error::NoStableModel { pool }), Some(arx)) => {
            log::warn!("no stable NARX model among {} candidates; keeping the ARX model", pool.len());
            let table = table_for(&arx);
            return Ok(IdentificationReport {
                method,
                arx: Some(arx),
                narx: None,
                narx_failed: Some(pool),
                chosen: ModelKind::Arx,
                table,
            });
        }
        (Err(e), _) => return Err(e),
    };
    let (narx_result, arx) = narx_result;
    let narx = StageReport {
        dictionary_size: search_dict.len(),
        preselect,
        result: narx_result,
        overfit_evaluations,
        seconds: started.elapsed().as_secs_f64(),
    };

    let chosen = match &arx {
        Some(a) if a.bic() <= narx.bic() => ModelKind::Arx,
        _ => ModelKind::Narx,
    };
    let table = match (&arx, chosen) {
        (Some(a), ModelKind::Arx) => table_for(a),
        _ => table_for(&narx),
    };
    Ok(IdentificationReport { method, arx, narx: Some(narx), narx_failed: None, chosen, table })
}

/// Runs [`identify`] under every method in `methods`, logging a warning for
/// each converged method whose term set differs from that of
/// [`RctMethod::None`].
pub fn compare_methods<T: Real>(
    data: &IoData<T>,
    spec: &LagSpec,
    methods: &[RctMethod],
    cfg: &IofrsConfig,
) -> Vec<(RctMethod, Result<IdentificationReport<T>>)> {
    let runs: Vec<_> = methods.iter().map(|&m| (m, identify(data, spec, m, cfg, true))).collect();
    let reference = runs
        .iter()
        .find(|(m, _)| *m == RctMethod::None)
        .and_then(|(_, r)| r.as_ref().ok())
        .map(|r| r.model().term_set());
    if let Some(reference) = reference {
        for (m, r) in &runs {
            if let Ok(r) = r {
                if r.model().term_set() != reference {
                    log::warn!("RCT method {m:?} converged to a different term set than the unreduced search");
                }
            }
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::build_problem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy_linear(n: usize, seed: u64) -> IoData<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.5 * y[t - 1] + u[t - 1];
        }
        let y = y
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + 0.02 * e
            })
            .collect();
        IoData::new(u, y, 1.0).unwrap()
    }

    #[test]
    fn method_parsing() {
        assert_eq!("none".parse::<RctMethod>().unwrap(), RctMethod::None);
        assert_eq!("3".parse::<RctMethod>().unwrap(), RctMethod::M3);
        assert!("5".parse::<RctMethod>().is_err());
    }

    #[test]
    fn overfit_of_size_one_is_err_best() {
        let data = noisy_linear(100, 1);
        let spec = LagSpec::new(2, 2, 2, false);
        let dict = expand_dictionary(&build_linear_dictionary(&spec).unwrap(), 2, false).unwrap();
        let p = build_problem(&data, &dict).unwrap();
        let (terms, _) = overfit_preselect(&p, 1).unwrap();
        let best = (0..p.n_columns())
            .map(|j| (j, crate::ofr::err_of(p.column(j), p.target()).unwrap()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(terms, vec![dict.terms()[best.0].clone()]);
        let (all, _) = overfit_preselect(&p, p.n_columns()).unwrap();
        assert_eq!(all.len(), p.n_columns());
        assert!(overfit_preselect(&p, 0).is_err());
    }

    #[test]
    fn linear_truth_keeps_arx() {
        let data = noisy_linear(300, 2);
        let spec = LagSpec::new(2, 2, 2, false);
        let r = identify(&data, &spec, RctMethod::None, &IofrsConfig::default(), true).unwrap();
        assert_eq!(r.chosen, ModelKind::Arx);
        assert!(r.narx.is_some());
        assert!(r.arx.unwrap().bic() <= r.narx.as_ref().unwrap().bic());
    }

    #[test]
    fn arx_only_run() {
        let data = noisy_linear(200, 3);
        let spec = LagSpec::new(2, 2, 2, false);
        let r = identify(&data, &spec, RctMethod::M3, &IofrsConfig::default(), false).unwrap();
        assert!(r.narx.is_none());
        assert_eq!(r.chosen, ModelKind::Arx);
        assert_eq!(r.table.len(), r.model().term_set().len());
    }

    #[test]
    fn plain_multipath_equivalence() {
        let data = noisy_linear(150, 4);
        let spec = LagSpec::new(2, 2, 2, false);
        let cfg = IofrsConfig { max_iterations: 1, ..Default::default() };
        let r = identify(&data, &spec, RctMethod::None, &cfg, true).unwrap();
        let full = expand_dictionary(&build_linear_dictionary(&spec).unwrap(), 2, false).unwrap();
        let p = build_problem(&data, &full).unwrap();
        let direct = iofrs_on(&p, full.terms(), &data, spec, &cfg).unwrap();
        let narx = r.narx.unwrap();
        assert_eq!(narx.model(), direct.model());
        assert_eq!(narx.result.pool.candidates.len(), full.len());
    }

    #[test]
    fn single_precision_pipeline() {
        let d = noisy_linear(200, 5);
        let data =
            IoData::new(d.u().iter().map(|&v| v as f32).collect(), d.y().iter().map(|&v| v as f32).collect(), 1.0)
                .unwrap();
        let r = identify(&data, &LagSpec::new(2, 2, 2, false), RctMethod::None, &IofrsConfig::default(), true).unwrap();
        assert!(r.model().terms.contains(&Term::y(1)));
        assert!(r.model().terms.contains(&Term::u(1)));
    }
}
