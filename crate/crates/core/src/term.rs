//! Monomial model terms and candidate dictionaries.
//!
//! A [`Term`] is a product of lagged output and input samples raised to
//! positive integer powers, e.g. `y(t-2)^2*u(t-1)^3`. The empty product is
//! the constant (bias) term and renders as `1`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which signal a lagged factor reads from. `Output` sorts before `Input`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Signal {
    Output,
    Input,
}

impl Signal {
    fn symbol(self) -> char {
        match self {
            Signal::Output => 'y',
            Signal::Input => 'u',
        }
    }
}

/// A lagged sample `signal(t - lag)`, `lag >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lagged {
    pub signal: Signal,
    pub lag: usize,
}

impl Lagged {
    pub fn output(lag: usize) -> Self {
        Lagged { signal: Signal::Output, lag }
    }

    pub fn input(lag: usize) -> Self {
        Lagged { signal: Signal::Input, lag }
    }
}

/// Monomial over lagged samples, stored as an exponent map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Term {
    exponents: BTreeMap<Lagged, u32>,
}

impl Term {
    pub fn constant() -> Self {
        Term::default()
    }

    pub fn linear(var: Lagged) -> Self {
        Term::from_factors([(var, 1)])
    }

    pub fn y(lag: usize) -> Self {
        Term::linear(Lagged::output(lag))
    }

    pub fn u(lag: usize) -> Self {
        Term::linear(Lagged::input(lag))
    }

    /// Builds a term from `(variable, exponent)` pairs. Repeated variables have
    /// their exponents merged; zero exponents are dropped.
    pub fn from_factors<I: IntoIterator<Item = (Lagged, u32)>>(factors: I) -> Self {
        let mut exponents = BTreeMap::new();
        for (var, e) in factors {
            if e > 0 {
                *exponents.entry(var).or_insert(0) += e;
            }
        }
        Term { exponents }
    }

    /// Product of two monomials.
    pub fn mul(&self, other: &Term) -> Term {
        Term::from_factors(self.factors().chain(other.factors()))
    }

    pub fn factors(&self) -> impl Iterator<Item = (Lagged, u32)> + '_ {
        self.exponents.iter().map(|(&v, &e)| (v, e))
    }

    pub fn is_constant(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.exponents.values().sum()
    }

    pub fn is_linear(&self) -> bool {
        self.degree() == 1
    }

    /// For a degree-one term, the single variable it reads.
    pub fn as_variable(&self) -> Option<Lagged> {
        if self.is_linear() {
            self.exponents.keys().next().copied()
        } else {
            None
        }
    }

    pub fn max_lag(&self) -> usize {
        self.exponents.keys().map(|v| v.lag).max().unwrap_or(0)
    }

    pub fn max_lag_of(&self, signal: Signal) -> usize {
        self.exponents.keys().filter(|v| v.signal == signal).map(|v| v.lag).max().unwrap_or(0)
    }

    /// Value of the monomial at 0-based index `t`, reading `y[t - lag]` and
    /// `u[t - lag]`.
    pub fn evaluate<T: Real>(&self, y: &[T], u: &[T], t: usize) -> Result<T> {
        let mut acc = T::one();
        for (var, e) in self.factors() {
            let series = match var.signal {
                Signal::Output => y,
                Signal::Input => u,
            };
            let idx = t
                .checked_sub(var.lag)
                .filter(|&i| i < series.len())
                .ok_or_else(|| Error::OutOfRange { term: self.to_string(), index: t })?;
            acc = acc * series[idx].powi(e as i32);
        }
        Ok(acc)
    }

    /// Unchecked evaluation; caller guarantees `t >= max_lag` and bounds.
    #[inline]
    pub(crate) fn evaluate_unchecked<T: Real>(&self, y: &[T], u: &[T], t: usize) -> T {
        let mut acc = T::one();
        for (var, e) in self.factors() {
            let v = match var.signal {
                Signal::Output => y[t - var.lag],
                Signal::Input => u[t - var.lag],
            };
            acc = acc * if e == 1 { v } else { v.powi(e as i32) };
        }
        acc
    }
}

impl Term {
    /// Order used inside dictionaries: canonical order with the constant last.
    pub fn dictionary_cmp(&self, other: &Term) -> Ordering {
        match (self.is_constant(), other.is_constant()) {
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            _ => self.cmp(other),
        }
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.factors().cmp(other.factors()))
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return f.write_str("1");
        }
        for (i, (var, e)) in self.factors().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{}(t-{})", var.signal.symbol(), var.lag)?;
            if e != 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Term::constant());
        }
        let bad = || Error::TermParse(s.to_string());
        let mut factors = Vec::new();
        for part in s.split('*') {
            let part = part.trim();
            let (base, exp) = match part.split_once('^') {
                Some((b, e)) => (b, e.parse::<u32>().map_err(|_| bad())?),
                None => (part, 1),
            };
            let signal = match base.chars().next() {
                Some('y') => Signal::Output,
                Some('u') => Signal::Input,
                _ => return Err(bad()),
            };
            let lag = base[1..]
                .strip_prefix("(t-")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&l| l >= 1)
                .ok_or_else(bad)?;
            if exp == 0 {
                return Err(bad());
            }
            factors.push((Lagged { signal, lag }, exp));
        }
        Ok(Term::from_factors(factors))
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Maximum lags and polynomial degree of a model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    /// Maximum output lag.
    pub n_a: usize,
    /// Maximum input lag.
    pub n_b: usize,
    /// Maximum monomial degree.
    pub degree: u32,
    pub include_constant: bool,
}

impl LagSpec {
    pub fn new(n_a: usize, n_b: usize, degree: u32, include_constant: bool) -> Self {
        LagSpec { n_a, n_b, degree, include_constant }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a + self.n_b == 0 {
            return Err(Error::Config("n_a + n_b must be at least 1".into()));
        }
        if self.degree == 0 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_lag(&self) -> usize {
        self.n_a.max(self.n_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DictionaryOrigin {
    Linear,
    FullExpansion,
    Reduced,
}

/// Ordered, duplicate-free set of candidate terms.
///
/// Non-constant terms are sorted by [`Term`]'s canonical order; the constant,
/// when present, is always the last entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    terms: Vec<Term>,
    origin: DictionaryOrigin,
}

impl Dictionary {
    pub fn new(terms: impl IntoIterator<Item = Term>, origin: DictionaryOrigin) -> Self {
        let mut constant = false;
        let mut terms: Vec<Term> = terms
            .into_iter()
            .filter(|t| {
                if t.is_constant() {
                    constant = true;
                    false
                } else {
                    true
                }
            })
            .collect();
        terms.sort();
        terms.dedup();
        if constant {
            terms.push(Term::constant());
        }
        Dictionary { terms, origin }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn origin(&self) -> DictionaryOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Term> {
        self.terms.get(i)
    }

    pub fn index_of(&self, term: &Term) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn contains(&self, term: &Term) -> bool {
        self.index_of(term).is_some()
    }

    pub fn max_lag(&self) -> usize {
        self.terms.iter().map(Term::max_lag).max().unwrap_or(0)
    }

    pub fn has_constant(&self) -> bool {
        self.terms.last().is_some_and(Term::is_constant)
    }
}

/// `D' = Y ∪ U`: every degree-one output and input lag, plus the constant if
/// requested.
pub fn build_linear_dictionary(spec: &LagSpec) -> Result<Dictionary> {
    spec.validate()?;
    let mut terms: Vec<Term> = (1..=spec.n_a).map(Term::y).collect();
    terms.extend((1..=spec.n_b).map(Term::u));
    if spec.include_constant {
        terms.push(Term::constant());
    }
    Ok(Dictionary::new(terms, DictionaryOrigin::Linear))
}

fn expand_variables(vars: &[Lagged], degree: u32) -> Vec<Term> {
    // multisets of size 1..=degree, generated in non-decreasing index order
    fn rec(vars: &[Lagged], start: usize, left: u32, current: &mut Vec<Lagged>, out: &mut Vec<Term>) {
        if !current.is_empty() {
            out.push(Term::from_factors(current.iter().map(|&v| (v, 1))));
        }
        if left == 0 {
            return;
        }
        for i in start..vars.len() {
            current.push(vars[i]);
            rec(vars, i, left - 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(vars, 0, degree, &mut Vec::new(), &mut out);
    out
}

fn variables_of<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Result<Vec<Lagged>> {
    let mut vars = Vec::new();
    for t in terms {
        if t.is_constant() {
            continue;
        }
        let v = t.as_variable().ok_or_else(|| Error::Config(format!("expansion base contains nonlinear term {t}")))?;
        vars.push(v);
    }
    vars.sort();
    vars.dedup();
    Ok(vars)
}

/// All monomials of degree `1..=degree` over the variables of a linear
/// dictionary. `C(v + degree, degree) - 1` terms for `v` variables, plus the
/// constant when requested.
pub fn expand_dictionary(base: &Dictionary, degree: u32, include_constant: bool) -> Result<Dictionary> {
    if degree == 0 {
        return Err(Error::Config("polynomial degree must be at least 1".into()));
    }
    let vars = variables_of(base.terms())?;
    let mut terms = expand_variables(&vars, degree);
    if include_constant {
        terms.push(Term::constant());
    }
    Ok(Dictionary::new(terms, DictionaryOrigin::FullExpansion))
}

/// Expansion restricted to the linear terms of an identified ARX model.
pub fn reduce_dictionary(arx_terms: &[Term], degree: u32, include_constant: bool) -> Result<Dictionary> {
    if degree == 0 {
        return Err(Error::Config("polynomial degree must be at least 1".into()));
    }
    let vars = variables_of(arx_terms)?;
    if vars.is_empty() {
        return Err(Error::Config("ARX stage produced no lagged terms to expand".into()));
    }
    let mut terms = expand_variables(&vars, degree);
    if include_constant {
        terms.push(Term::constant());
    }
    Ok(Dictionary::new(terms, DictionaryOrigin::Reduced))
}

/// Value of `term` at 0-based index `t` of the given histories.
pub fn evaluate_term<T: Real>(term: &Term, y_hist: &[T], u_hist: &[T], t: usize) -> Result<T> {
    term.evaluate(y_hist, u_hist, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binom(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    #[test]
    fn linear_dictionary_sizes() {
        let d = build_linear_dictionary(&LagSpec::new(2, 2, 1, false)).unwrap();
        let names: Vec<_> = d.terms().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["y(t-1)", "y(t-2)", "u(t-1)", "u(t-2)"]);
        assert_eq!(build_linear_dictionary(&LagSpec::new(1, 0, 1, false)).unwrap().len(), 1);
        let d = build_linear_dictionary(&LagSpec::new(2, 2, 1, true)).unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.has_constant());
        assert!(matches!(build_linear_dictionary(&LagSpec::new(0, 0, 1, false)), Err(Error::Config(_))));
    }

    #[test]
    fn expansion_counts() {
        let d1 = build_linear_dictionary(&LagSpec::new(2, 2, 1, false)).unwrap();
        assert_eq!(expand_dictionary(&d1, 2, false).unwrap().len(), 14);
        assert_eq!(expand_dictionary(&d1, 3, false).unwrap().len(), 34);
        let one = build_linear_dictionary(&LagSpec::new(1, 0, 1, false)).unwrap();
        let e = expand_dictionary(&one, 1, false).unwrap();
        assert_eq!(e.terms(), one.terms());
    }

    #[test]
    fn reduction_counts() {
        assert_eq!(reduce_dictionary(&[Term::y(1), Term::u(1)], 2, false).unwrap().len(), 5);
        let full = build_linear_dictionary(&LagSpec::new(2, 2, 1, false)).unwrap();
        let r = reduce_dictionary(full.terms(), 2, false).unwrap();
        assert_eq!(r.terms(), expand_dictionary(&full, 2, false).unwrap().terms());
        assert!(matches!(reduce_dictionary(&[], 2, false), Err(Error::Config(_))));
    }

    #[test]
    fn reduction_three_of_six_cubic() {
        // enumerate both sides independently as exponent vectors
        fn count(vars: usize, deg: u32) -> usize {
            let mut n = 0;
            let mut e = vec![0u32; vars];
            loop {
                let s: u32 = e.iter().sum();
                if (1..=deg).contains(&s) {
                    n += 1;
                }
                let mut i = 0;
                loop {
                    if i == vars {
                        return n;
                    }
                    e[i] += 1;
                    if e[i] <= deg {
                        break;
                    }
                    e[i] = 0;
                    i += 1;
                }
            }
        }
        assert_eq!(count(3, 3), 19);
        assert_eq!(count(6, 3), 83);
        let full = build_linear_dictionary(&LagSpec::new(3, 3, 1, false)).unwrap();
        assert_eq!(expand_dictionary(&full, 3, false).unwrap().len(), 83);
        let r = reduce_dictionary(&[Term::y(1), Term::y(3), Term::u(2)], 3, false).unwrap();
        assert_eq!(r.len(), 19);
    }

    #[test]
    fn evaluation() {
        let t: Term = "y(t-2)^2*u(t-1)^3".parse().unwrap();
        let y = [0.0, 2.0, 0.0];
        let u = [0.0, 0.0, 3.0];
        assert_eq!(t.evaluate(&y, &u, 3).unwrap(), 108.0);
        assert_eq!(Term::constant().evaluate::<f64>(&[], &[], 0).unwrap(), 1.0);
        assert_eq!(Term::y(1).evaluate(&[-0.5], &[], 1).unwrap(), -0.5);
        assert!(matches!(t.evaluate(&y, &u, 1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn rendering_and_parsing() {
        let t = Term::from_factors([(Lagged::input(1), 3), (Lagged::output(2), 2)]);
        assert_eq!(t.to_string(), "y(t-2)^2*u(t-1)^3");
        assert_eq!(Term::constant().to_string(), "1");
        let p: Term = "u(t-1)*y(t-2)*y(t-2)".parse().unwrap();
        assert_eq!(p.to_string(), "y(t-2)^2*u(t-1)");
        for bad in ["", "x(t-1)", "y(t+1)", "y(t-0)", "y(t-1)^0", "y(t-1)^"] {
            assert!(bad.parse::<Term>().is_err(), "{bad}");
        }
    }

    #[test]
    fn constant_goes_last() {
        let d = expand_dictionary(&build_linear_dictionary(&LagSpec::new(1, 1, 1, false)).unwrap(), 2, true).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.terms().last().unwrap().is_constant());
        assert!(d.terms()[..5].windows(2).all(|w| w[0].degree() <= w[1].degree()));
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        proptest::collection::vec((any::<bool>(), 1usize..5, 1u32..4), 0..5).prop_map(|fs| {
            Term::from_factors(
                fs.into_iter().map(|(o, lag, e)| (if o { Lagged::output(lag) } else { Lagged::input(lag) }, e)),
            )
        })
    }

    proptest! {
        #[test]
        fn expansion_size_matches_multiset_count(n_a in 0usize..5, n_b in 0usize..5, deg in 1u32..6) {
            prop_assume!(n_a + n_b >= 1 && n_a + n_b <= 8);
            let base = build_linear_dictionary(&LagSpec::new(n_a, n_b, 1, false)).unwrap();
            let v = (n_a + n_b) as u64;
            let d = expand_dictionary(&base, deg, false).unwrap();
            prop_assert_eq!(d.len() as u64, binom(v + deg as u64, deg as u64) - 1);
            // deterministic construction
            prop_assert_eq!(d, expand_dictionary(&base, deg, false).unwrap());
        }

        #[test]
        fn reduction_is_subset(mask in proptest::collection::vec(any::<bool>(), 6), deg in 1u32..4) {
            let base = build_linear_dictionary(&LagSpec::new(3, 3, 1, false)).unwrap();
            let picked: Vec<Term> = base.terms().iter().zip(&mask).filter(|(_, &m)| m).map(|(t, _)| t.clone()).collect();
            prop_assume!(!picked.is_empty());
            let full = expand_dictionary(&base, deg, false).unwrap();
            let red = reduce_dictionary(&picked, deg, false).unwrap();
            prop_assert!(red.len() <= full.len());
            for t in red.terms() {
                prop_assert!(full.contains(t));
            }
            if picked.len() < base.len() {
                prop_assert!(red.len() < full.len());
            }
        }

        #[test]
        fn canonicalisation_is_idempotent(t in arb_term()) {
            let again = Term::from_factors(t.factors());
            prop_assert_eq!(&again, &t);
            let parsed: Term = t.to_string().parse().unwrap();
            prop_assert_eq!(parsed, t);
        }
    }
}
