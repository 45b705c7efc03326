//! Regression matrix construction and reference least squares.

use crate::error::{Error, Result};
use crate::scalar::{dot, sum_sq, Real};
use crate::term::Dictionary;

/// Single-input single-output record.
#[derive(Debug, Clone, PartialEq)]
pub struct IoData<T> {
    u: Vec<T>,
    y: Vec<T>,
    /// Seconds between samples; carried as metadata only.
    pub sample_period: f64,
}

impl<T: Real> IoData<T> {
    pub fn new(u: Vec<T>, y: Vec<T>, sample_period: f64) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Data(format!("input has {} samples but output has {}", u.len(), y.len())));
        }
        if let Some(i) = u.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample at position {}", i % u.len().max(1))));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::Data("sample period must be positive".into()));
        }
        Ok(IoData { u, y, sample_period })
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Samples `start..end` (0-based, end exclusive).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Config(format!("sample range {start}..{end} outside record of length {}", self.len())));
        }
        Ok(IoData { u: self.u[start..end].to_vec(), y: self.y[start..end].to_vec(), sample_period: self.sample_period })
    }
}

/// `Y = Φ Θ + Ξ` for one dictionary: column `m` holds the values of term `m`
/// at every usable time index.
#[derive(Debug, Clone)]
pub struct RegressionProblem<T> {
    columns: Vec<Vec<T>>,
    target: Vec<T>,
    dictionary: Dictionary,
    offset: usize,
}

impl<T: Real> RegressionProblem<T> {
    /// Assembles a problem from precomputed columns. Column `m` must hold the
    /// values of `dictionary.terms()[m]`.
    pub fn from_columns(columns: Vec<Vec<T>>, target: Vec<T>, dictionary: Dictionary, offset: usize) -> Result<Self> {
        if columns.len() != dictionary.len() {
            return Err(Error::Config(format!(
                "{} columns for a dictionary of {} terms",
                columns.len(),
                dictionary.len()
            )));
        }
        if columns.iter().any(|c| c.len() != target.len()) {
            return Err(Error::Data("column length differs from target length".into()));
        }
        Ok(RegressionProblem { columns, target, dictionary, offset })
    }

    /// Same columns, different target.
    pub fn with_target(&self, target: Vec<T>) -> Result<Self> {
        Self::from_columns(self.columns.clone(), target, self.dictionary.clone(), self.offset)
    }

    /// Column `m` of Φ.
    pub fn column(&self, m: usize) -> &[T] {
        &self.columns[m]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Index of the first row in the original record (the dictionary's maximum
    /// lag).
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }
}

/// Evaluates every dictionary term at `t = offset..L` (0-based), with the
/// offset equal to the dictionary's maximum lag.
pub fn build_problem<T: Real>(data: &IoData<T>, dict: &Dictionary) -> Result<RegressionProblem<T>> {
    build_problem_with_offset(data, dict, dict.max_lag())
}

/// [`build_problem`] starting at a fixed row offset, so that problems over
/// different dictionaries share the same rows. The offset must cover the
/// dictionary's maximum lag.
pub fn build_problem_with_offset<T: Real>(
    data: &IoData<T>,
    dict: &Dictionary,
    offset: usize,
) -> Result<RegressionProblem<T>> {
    if offset < dict.max_lag() {
        return Err(Error::Config(format!("offset {offset} below dictionary lag {}", dict.max_lag())));
    }
    let len = data.len();
    if len <= offset {
        return Err(Error::InsufficientData { len, required: offset });
    }
    let rows = len - offset;
    if rows <= dict.len() {
        log::warn!("only {rows} regression rows for {} candidate terms", dict.len());
    }
    let columns = dict
        .terms()
        .iter()
        .map(|term| (offset..len).map(|t| term.evaluate_unchecked(data.y(), data.u(), t)).collect::<Vec<T>>())
        .collect::<Vec<_>>();
    if let Some((m, _)) = columns.iter().enumerate().find(|(_, c)| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Data(format!("term {} evaluates to a non-finite value", dict.terms()[m])));
    }
    Ok(RegressionProblem { columns, target: data.y()[offset..].to_vec(), dictionary: dict.clone(), offset })
}

/// Rank tolerance on squared column norms after orthogonalisation.
pub const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares over the selected columns by Householder QR.
///
/// Returns coefficients aligned with `selected`. A column whose component
/// orthogonal to the preceding ones has squared norm below `RANK_TOL` times
/// its own is reported as [`Error::Singular`].
pub fn least_squares<T: Real>(problem: &RegressionProblem<T>, selected: &[usize]) -> Result<Vec<T>> {
    let cols: Vec<&[T]> = selected.iter().map(|&j| problem.column(j)).collect();
    solve_householder(&cols, problem.target()).map_err(|k| Error::Singular {
        column: selected[k],
        term: problem.dictionary().terms()[selected[k]].to_string(),
    })
}

/// Householder QR solve of `min ||A x - b||`; `Err(k)` names the first
/// dependent column.
pub(crate) fn solve_householder<T: Real>(cols: &[&[T]], b: &[T]) -> std::result::Result<Vec<T>, usize> {
    let n = b.len();
    let k = cols.len();
    let tol = T::lit(RANK_TOL);
    let mut a: Vec<Vec<T>> = cols.iter().map(|c| c.to_vec()).collect();
    let mut rhs = b.to_vec();
    let mut diag = vec![T::zero(); k];
    for j in 0..k {
        let orig = sum_sq(cols[j]);
        if j >= n {
            return Err(j);
        }
        let tail_sq = sum_sq(&a[j][j..]);
        if orig == T::zero() || tail_sq < tol * orig {
            return Err(j);
        }
        let alpha = if a[j][j] > T::zero() { -tail_sq.sqrt() } else { tail_sq.sqrt() };
        let mut v = a[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let vv = sum_sq(&v);
        diag[j] = alpha;
        let two = T::lit(2.0);
        for col in a.iter_mut().skip(j + 1) {
            let s = two * dot(&v, &col[j..]) / vv;
            for (c, &vi) in col[j..].iter_mut().zip(&v) {
                *c = *c - s * vi;
            }
        }
        let s = two * dot(&v, &rhs[j..]) / vv;
        for (r, &vi) in rhs[j..].iter_mut().zip(&v) {
            *r = *r - s * vi;
        }
        a[j][j] = alpha;
    }
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in i + 1..k {
            s = s - a[j][i] * x[j];
        }
        x[i] = s / diag[i];
    }
    Ok(x)
}
