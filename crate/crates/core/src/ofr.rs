//! Orthogonal forward regression along a single orthogonalisation path.
//!
//! Candidates are kept orthogonalised against the already selected regressors
//! with modified Gram-Schmidt, so scoring a candidate is a single pass over
//! its orthogonal component. Each step records both the error reduction
//! ratio and the mean squared PRESS (leave-one-out) error of the grown model,
//! whichever criterion drives the selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regressors::{RegressionProblem, RANK_TOL};
use crate::scalar::{dot, sum_sq, Real};

/// Candidates whose deleted-residual denominator `1 - h(t)` falls below this
/// are rejected.
pub const LEVERAGE_GUARD: f64 = 1e-8;

/// Squared-norm drop (relative to the last reference) that triggers a second
/// Gram-Schmidt pass.
const REORTH_DROP: f64 = 1e-8;

/// Default cumulative-ERR tolerance for ERR-driven selection.
pub const ERR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Maximise the error reduction ratio.
    Err,
    /// Minimise the mean squared PRESS error.
    Press,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "err" => Ok(Criterion::Err),
            "press" => Ok(Criterion::Press),
            other => Err(Error::Config(format!("unknown criterion '{other}'"))),
        }
    }
}

/// When a path stops growing. Every rule also stops at `max_terms` and when
/// the residual reaches the exact-fit floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// `PressFirstIncrease` for PRESS, `ErrThreshold(ERR_TOL)` for ERR.
    Default,
    /// Stop when the best achievable PRESS would exceed the current one.
    PressFirstIncrease,
    /// Stop once the cumulative ERR reaches `1 - tol`.
    ErrThreshold(f64),
    /// Grow to `max_terms` (or until candidates run out).
    MaxTerms,
}

impl StopRule {
    fn resolve(self, criterion: Criterion) -> StopRule {
        match (self, criterion) {
            (StopRule::Default, Criterion::Press) => StopRule::PressFirstIncrease,
            (StopRule::Default, Criterion::Err) => StopRule::ErrThreshold(ERR_TOL),
            (rule, _) => rule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxTerms,
    PressIncrease,
    ErrThreshold,
    ExactFit,
    /// No remaining candidate passed the rank and leverage guards.
    Exhausted,
    /// The forced first term was itself degenerate.
    ForcedRejected,
}

/// `min(M, L_eff / 4, 30)`, at least one.
pub fn default_max_terms(n_columns: usize, n_rows: usize) -> usize {
    n_columns.min(n_rows / 4).clamp(1, 30)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep<T> {
    /// Column index in the problem's dictionary.
    pub index: usize,
    pub err: T,
    pub ms_press: T,
    /// Coefficient on the orthogonalised regressor.
    pub g: T,
}

#[derive(Debug, Clone)]
pub struct SelectionPath<T> {
    pub steps: Vec<PathStep<T>>,
    /// `triangular[s][i]` is the coefficient of orthogonal vector `i < s` in
    /// the `s`-th selected column; the diagonal is implicitly one.
    pub triangular: Vec<Vec<T>>,
    pub residual_ss: T,
    pub target_ss: T,
    pub stop: StopReason,
    /// Number of candidate scorings performed.
    pub evaluations: usize,
    orthogonal: Vec<Vec<T>>,
}

impl<T: Real> SelectionPath<T> {
    pub fn indices(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.index).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn orthogonal_columns(&self) -> &[Vec<T>] {
        &self.orthogonal
    }

    pub fn total_err(&self) -> T {
        self.steps.iter().map(|s| s.err).sum()
    }
}

/// Why a candidate was excluded from scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    Degenerate,
    Leverage,
}

/// `(wᵀy)² / ((wᵀw)(yᵀy))`.
pub fn err_of<T: Real>(w: &[T], target: &[T]) -> std::result::Result<T, Rejection> {
    let ww = sum_sq(w);
    let yy = sum_sq(target);
    if ww <= T::zero() || yy <= T::zero() {
        return Err(Rejection::Degenerate);
    }
    let wy = dot(w, target);
    Ok(wy * wy / (ww * yy))
}

/// The part of a partially built path that PRESS scoring needs: the current
/// residual and the leverage `h(t) = Σ_j w_j(t)² / (w_jᵀw_j)`.
#[derive(Debug, Clone)]
pub struct PressState<T> {
    pub residual: Vec<T>,
    pub leverage: Vec<T>,
}

impl<T: Real> PressState<T> {
    pub fn empty(target: &[T]) -> Self {
        PressState { residual: target.to_vec(), leverage: vec![T::zero(); target.len()] }
    }

    /// Absorbs an orthogonal regressor into the state.
    pub fn push(&mut self, w: &[T]) {
        let ww = sum_sq(w);
        let g = dot(w, &self.residual) / ww;
        for ((r, h), &wt) in self.residual.iter_mut().zip(&mut self.leverage).zip(w) {
            *r = *r - g * wt;
            *h = *h + wt * wt / ww;
        }
    }
}

/// Mean squared deleted residual `e(t) / (1 - h(t))` after adding the
/// orthogonal candidate `w` to the path described by `state`.
pub fn press_of<T: Real>(state: &PressState<T>, w: &[T]) -> std::result::Result<T, Rejection> {
    let ww = sum_sq(w);
    if ww <= T::zero() {
        return Err(Rejection::Degenerate);
    }
    let g = dot(w, &state.residual) / ww;
    press_with(&state.residual, &state.leverage, w, ww, g)
}

fn press_with<T: Real>(r: &[T], h: &[T], w: &[T], ww: T, g: T) -> std::result::Result<T, Rejection> {
    let guard = T::lit(LEVERAGE_GUARD);
    let mut acc = T::zero();
    for ((&rt, &ht), &wt) in r.iter().zip(h).zip(w) {
        let denom = T::one() - (ht + wt * wt / ww);
        if denom < guard {
            return Err(Rejection::Leverage);
        }
        let e = (rt - g * wt) / denom;
        acc = acc + e * e;
    }
    Ok(acc / T::from_usize_lossy(r.len()))
}

struct Candidate<T> {
    q: Vec<T>,
    coeffs: Vec<T>,
    src_sq: T,
    ref_sq: T,
    alive: bool,
}

struct Score<T> {
    index: usize,
    err: T,
    press: T,
    g: T,
}

fn better<T: Real>(criterion: Criterion, a: &Score<T>, b: &Score<T>) -> bool {
    match criterion {
        Criterion::Err => a.err > b.err,
        Criterion::Press => a.press < b.press,
    }
}

/// Grows one orthogonal forward regression path.
///
/// The first step takes `forced_first` when given, otherwise the
/// criterion-best column. Ties go to the lowest dictionary index.
pub fn ofr_select<T: Real>(
    problem: &RegressionProblem<T>,
    criterion: Criterion,
    forced_first: Option<usize>,
    max_terms: usize,
    stop: StopRule,
) -> Result<SelectionPath<T>> {
    if max_terms == 0 {
        return Err(Error::Config("max_terms must be at least 1".into()));
    }
    if let Some(f) = forced_first {
        if f >= problem.n_columns() {
            return Err(Error::Config(format!(
                "forced first column {f} out of range for {} candidates",
                problem.n_columns()
            )));
        }
    }
    let rule = stop.resolve(criterion);
    let y = problem.target();
    let n = y.len();
    let yy = sum_sq(y);
    let rank_tol = T::lit(RANK_TOL);
    let reorth = T::lit(REORTH_DROP);

    let mut cands: Vec<Candidate<T>> = problem
        .columns()
        .iter()
        .map(|c| {
            let s = sum_sq(c);
            Candidate { q: c.clone(), coeffs: Vec::new(), src_sq: s, ref_sq: s, alive: s > T::zero() }
        })
        .collect();

    let mut path = SelectionPath {
        steps: Vec::new(),
        triangular: Vec::new(),
        residual_ss: yy,
        target_ss: yy,
        stop: StopReason::Exhausted,
        evaluations: 0,
        orthogonal: Vec::new(),
    };
    if yy <= T::zero() {
        path.stop = StopReason::ExactFit;
        return Ok(path);
    }

    let mut residual = y.to_vec();
    let mut leverage = vec![T::zero(); n];
    let mut current_press = T::zero();
    let mut cumulative_err = T::zero();

    loop {
        let first = path.steps.is_empty();
        let mut best: Option<Score<T>> = None;
        for (j, c) in cands.iter().enumerate() {
            if !c.alive || (first && forced_first.is_some_and(|f| f != j)) {
                continue;
            }
            path.evaluations += 1;
            let ww = sum_sq(&c.q);
            let wr = dot(&c.q, &residual);
            let g = wr / ww;
            let err = wr * wr / (ww * yy);
            let Ok(press) = press_with(&residual, &leverage, &c.q, ww, g) else {
                continue;
            };
            if !(err.is_finite() && press.is_finite()) {
                continue;
            }
            let s = Score { index: j, err, press, g };
            if best.as_ref().is_none_or(|b| better(criterion, &s, b)) {
                best = Some(s);
            }
        }
        let Some(best) = best else {
            path.stop =
                if first && forced_first.is_some() { StopReason::ForcedRejected } else { StopReason::Exhausted };
            break;
        };
        if !first && rule == StopRule::PressFirstIncrease && best.press > current_press {
            path.stop = StopReason::PressIncrease;
            break;
        }

        // accept
        let chosen = &mut cands[best.index];
        chosen.alive = false;
        let w = std::mem::take(&mut chosen.q);
        let coeffs = std::mem::take(&mut chosen.coeffs);
        let ww = sum_sq(&w);
        for ((r, h), &wt) in residual.iter_mut().zip(&mut leverage).zip(&w) {
            *r = *r - best.g * wt;
            *h = *h + wt * wt / ww;
        }
        path.residual_ss = sum_sq(&residual);
        current_press = best.press;
        cumulative_err = cumulative_err + best.err;
        path.steps.push(PathStep { index: best.index, err: best.err, ms_press: best.press, g: best.g });
        path.triangular.push(coeffs);

        for c in cands.iter_mut().filter(|c| c.alive) {
            let a = dot(&w, &c.q) / ww;
            for (qt, &wt) in c.q.iter_mut().zip(&w) {
                *qt = *qt - a * wt;
            }
            c.coeffs.push(a);
            let mut qq = sum_sq(&c.q);
            if qq < reorth * c.ref_sq {
                for (i, wi) in path.orthogonal.iter().chain(std::iter::once(&w)).enumerate() {
                    let d = dot(wi, &c.q) / sum_sq(wi);
                    for (qt, &wt) in c.q.iter_mut().zip(wi) {
                        *qt = *qt - d * wt;
                    }
                    c.coeffs[i] = c.coeffs[i] + d;
                }
                qq = sum_sq(&c.q);
                c.ref_sq = qq;
            }
            if qq < rank_tol * c.src_sq {
                c.alive = false;
            }
        }
        path.orthogonal.push(w);

        if path.residual_ss <= T::EXACT_FIT * yy {
            path.stop = StopReason::ExactFit;
            break;
        }
        if let StopRule::ErrThreshold(tol) = rule {
            if cumulative_err >= T::one() - T::lit(tol) {
                path.stop = StopReason::ErrThreshold;
                break;
            }
        }
        if path.steps.len() >= max_terms {
            path.stop = StopReason::MaxTerms;
            break;
        }
    }
    Ok(path)
}

/// Coefficients in the original term basis, in path order, by solving the
/// unit upper-triangular system `A θ = g`.
pub fn back_substitute<T: Real>(path: &SelectionPath<T>) -> Vec<T> {
    let k = path.steps.len();
    let mut theta: Vec<T> = path.steps.iter().map(|s| s.g).collect();
    for s in (0..k).rev() {
        let mut v = theta[s];
        for r in s + 1..k {
            v = v - path.triangular[r][s] * theta[r];
        }
        theta[s] = v;
    }
    theta
}
