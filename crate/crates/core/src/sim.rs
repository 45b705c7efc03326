//! Polynomial NARX models: free-run simulation, one-step-ahead prediction and
//! the zero/one input stability probe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofr::{back_substitute, Criterion, SelectionPath};
use crate::regressors::{IoData, RegressionProblem};
use crate::scalar::{mean, variance, Real};
use crate::term::{LagSpec, Signal, Term};

/// Magnitude beyond which a simulated output counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub criterion: Option<Criterion>,
    /// Terms in the order the orthogonalisation path selected them.
    pub path: Vec<String>,
    pub data_hash: String,
}

/// `y(t) = β + Σ θ_m φ_m(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    /// Non-constant terms in canonical order.
    pub terms: Vec<Term>,
    pub coefficients: Vec<T>,
    pub bias: T,
    pub lag_spec: LagSpec,
    pub provenance: Provenance,
}

impl<T: Real> Model<T> {
    /// Builds a model from `(term, coefficient)` pairs. A constant term is
    /// folded into the bias.
    pub fn new(pairs: impl IntoIterator<Item = (Term, T)>, lag_spec: LagSpec) -> Result<Self> {
        let mut bias = T::zero();
        let mut kept: Vec<(Term, T)> = Vec::new();
        for (term, c) in pairs {
            if !c.is_finite() {
                return Err(Error::Data(format!("non-finite coefficient for {term}")));
            }
            if term.max_lag_of(Signal::Output) > lag_spec.n_a || term.max_lag_of(Signal::Input) > lag_spec.n_b {
                return Err(Error::Config(format!("term {term} exceeds the model lag limits")));
            }
            if term.is_constant() {
                bias = bias + c;
            } else if let Some(slot) = kept.iter_mut().find(|(t, _)| *t == term) {
                slot.1 = slot.1 + c;
            } else {
                kept.push((term, c));
            }
        }
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        let (terms, coefficients) = kept.into_iter().unzip();
        Ok(Model { terms, coefficients, bias, lag_spec, provenance: Provenance::default() })
    }

    /// Model from a finished path over `problem`'s dictionary.
    pub fn from_path(
        problem: &RegressionProblem<T>,
        path: &SelectionPath<T>,
        lag_spec: LagSpec,
        criterion: Criterion,
    ) -> Result<Self> {
        let theta = back_substitute(path);
        let dict = problem.dictionary();
        let pairs = path.steps.iter().zip(theta).map(|(s, th)| (dict.terms()[s.index].clone(), th));
        let mut model = Model::new(pairs, lag_spec)?;
        model.provenance.criterion = Some(criterion);
        model.provenance.path = path.steps.iter().map(|s| dict.terms()[s.index].to_string()).collect();
        Ok(model)
    }

    pub fn max_lag(&self) -> usize {
        self.terms.iter().map(Term::max_lag).max().unwrap_or(0)
    }

    pub fn max_output_lag(&self) -> usize {
        self.terms.iter().map(|t| t.max_lag_of(Signal::Output)).max().unwrap_or(0)
    }

    /// Number of estimated parameters, counting the bias when present.
    pub fn n_params(&self) -> usize {
        self.terms.len() + usize::from(self.bias != T::zero())
    }

    /// Term set including the constant when the bias is nonzero.
    pub fn term_set(&self) -> Vec<Term> {
        let mut v = self.terms.clone();
        if self.bias != T::zero() {
            v.push(Term::constant());
        }
        v
    }

    #[inline]
    fn output_at(&self, y: &[T], u: &[T], t: usize) -> T {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .fold(self.bias, |acc, (term, &c)| acc + c * term.evaluate_unchecked(y, u, t))
    }
}

/// Recursive simulation driven by `u` and the model's own past outputs.
///
/// The first `y_init.len()` outputs are copied from `y_init`, which must
/// cover the model's largest lag. Returns [`Error::Diverged`] with the first
/// offending index when an output is non-finite or exceeds
/// [`DIVERGENCE_LIMIT`] in magnitude.
pub fn simulate_free_run<T: Real>(model: &Model<T>, u: &[T], y_init: &[T]) -> Result<Vec<T>> {
    let start = y_init.len();
    if start < model.max_lag() {
        return Err(Error::InsufficientData { len: start, required: model.max_lag() });
    }
    if start > u.len() {
        return Err(Error::InsufficientData { len: u.len(), required: start });
    }
    let limit = T::lit(DIVERGENCE_LIMIT);
    let mut y = Vec::with_capacity(u.len());
    y.extend_from_slice(y_init);
    for t in start..u.len() {
        let v = model.output_at(&y, u, t);
        if !v.is_finite() || v.abs() > limit {
            return Err(Error::Diverged { index: t });
        }
        y.push(v);
    }
    Ok(y)
}

/// One-step-ahead predictions from measured history, for `t = max_lag..L`.
pub fn predict_one_step<T: Real>(model: &Model<T>, data: &IoData<T>) -> Result<Vec<T>> {
    let lag = model.max_lag();
    if data.len() <= lag {
        return Err(Error::InsufficientData { len: data.len(), required: lag });
    }
    Ok((lag..data.len()).map(|t| model.output_at(data.y(), data.u(), t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict<T> {
    pub stable: bool,
    pub mean0: T,
    pub var0: T,
    pub mean1: T,
    pub var1: T,
    pub diverged: bool,
    /// Whether the settled response to `u ≡ 0` sits at the bias within `√ε`.
    pub mean0_at_bias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub epsilon: f64,
    pub n_sim: usize,
    pub n_settle: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings { epsilon: 1e-2, n_sim: 1000, n_settle: 200 }
    }
}

/// Free-runs the model from zero initial conditions under `u ≡ 0` and
/// `u ≡ 1`. Stable when both runs stay finite and their post-settle variance
/// is at most `epsilon`.
pub fn stability_probe<T: Real>(model: &Model<T>, epsilon: T, n_sim: usize, n_settle: usize) -> StabilityVerdict<T> {
    let lag = model.max_lag();
    let n_settle = n_settle.max(lag);
    let n_sim = n_sim.max(n_settle + 1);
    let run = |level: T| -> Option<(T, T)> {
        let u = vec![level; n_sim];
        let y = simulate_free_run(model, &u, &vec![T::zero(); lag]).ok()?;
        let tail = &y[n_settle..];
        Some((mean(tail), variance(tail)))
    };
    let nan = T::nan();
    match (run(T::zero()), run(T::one())) {
        (Some((m0, v0)), Some((m1, v1))) => StabilityVerdict {
            stable: v0 <= epsilon && v1 <= epsilon,
            mean0: m0,
            var0: v0,
            mean1: m1,
            var1: v1,
            diverged: false,
            mean0_at_bias: (m0 - model.bias).abs() <= epsilon.sqrt(),
        },
        (r0, r1) => StabilityVerdict {
            stable: false,
            mean0: r0.map_or(nan, |r| r.0),
            var0: r0.map_or(nan, |r| r.1),
            mean1: r1.map_or(nan, |r| r.0),
            var1: r1.map_or(nan, |r| r.1),
            diverged: true,
            mean0_at_bias: false,
        },
    }
}

/// Probe using [`ProbeSettings`].
pub fn stability_probe_with<T: Real>(model: &Model<T>, settings: &ProbeSettings) -> StabilityVerdict<T> {
    stability_probe(model, T::lit(settings.epsilon), settings.n_sim, settings.n_settle)
}
