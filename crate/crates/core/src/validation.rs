//! Correlation-based residual tests for nonlinear models.
//!
//! For an adequate model the residuals `ξ` satisfy
//!
//! | test     | function                        | lags            |
//! |----------|---------------------------------|-----------------|
//! | `acf`    | `φ_ξξ(τ) = δ(τ)`                | `0..=max`       |
//! | `ccf`    | `φ_uξ(τ) = 0`                   | `-max..=max`    |
//! | `e_eu`   | `φ_ξ(ξu)(τ) = 0`                | `0..=max`       |
//! | `u2_e`   | `φ_u²'ξ(τ) = 0`                 | `-max..=max`    |
//! | `u2_e2`  | `φ_u²'ξ²'(τ) = 0`               | `-max..=max`    |
//!
//! with `u²'` and `ξ²'` the mean-removed squares. All functions use biased
//! (`1/N`) estimators normalised by the full-record standard deviations and
//! are compared against `±1.96/√N`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, variance, Real};

/// Names of the five tests, in report order.
pub const TEST_NAMES: [&str; 5] = ["acf", "ccf", "e_eu", "u2_e", "u2_e2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTest<T> {
    pub name: String,
    pub lags: Vec<i64>,
    pub values: Vec<T>,
    pub bound: T,
    pub fraction_inside: T,
    pub pass: bool,
    /// One of the correlated series had zero variance; values are reported as
    /// zero.
    pub degenerate: bool,
}

impl<T: Real> CorrelationTest<T> {
    pub fn value_at(&self, lag: i64) -> Option<T> {
        self.lags.iter().position(|&l| l == lag).map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport<T> {
    pub tests: Vec<CorrelationTest<T>>,
    pub residual_variance: T,
    pub n_samples: usize,
}

impl<T: Real> ValidationReport<T> {
    pub fn test(&self, name: &str) -> Option<&CorrelationTest<T>> {
        self.tests.iter().find(|t| t.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.tests.iter().all(|t| t.pass)
    }

    /// Plot-ready CSV with header `test,lag,value,upper,lower`.
    pub fn to_csv(&self, only: Option<&[&str]>) -> String {
        let mut out = String::from("test,lag,value,upper,lower\n");
        for t in &self.tests {
            if only.is_some_and(|o| !o.contains(&t.name.as_str())) {
                continue;
            }
            for (lag, v) in t.lags.iter().zip(&t.values) {
                let _ =
                    writeln!(out, "{},{},{:e},{:e},{:e}", t.name, lag, v.as_f64(), t.bound.as_f64(), -t.bound.as_f64());
            }
        }
        out
    }
}

fn centred<T: Real>(a: &[T]) -> Vec<T> {
    let m = mean(a);
    a.iter().map(|&v| v - m).collect()
}

/// `Σ_t a(t) b(t + τ) / √(Σa² Σb²)` over the overlap; inputs already centred.
type Series<'a, T> = (&'a str, &'a [T], &'a [T], &'a [i64], &'a [i64]);

/// `None` when either series has zero energy.
fn normalised_xcorr<T: Real>(a: &[T], b: &[T], lags: &[i64]) -> Option<Vec<T>> {
    let norm = (a.iter().map(|&v| v * v).sum::<T>() * b.iter().map(|&v| v * v).sum::<T>()).sqrt();
    if norm.is_nan() || norm <= T::zero() {
        return None;
    }
    let n = a.len() as i64;
    Some(
        lags.iter()
            .map(|&tau| {
                let lo = 0.max(-tau);
                let hi = n.min(n - tau);
                let s: T = (lo..hi).map(|t| a[t as usize] * b[(t + tau) as usize]).sum();
                let v = s / norm;
                v.max(-T::one()).min(T::one())
            })
            .collect(),
    )
}

/// Runs the five correlation tests on aligned residuals and inputs.
pub fn residual_tests<T: Real>(residuals: &[T], u: &[T], max_lag: usize) -> Result<ValidationReport<T>> {
    let n = residuals.len();
    if n != u.len() {
        return Err(Error::Data(format!("{n} residuals but {} input samples", u.len())));
    }
    if n < 2 || max_lag == 0 || max_lag >= n {
        return Err(Error::Config(format!("cannot test {max_lag} lags on {n} samples")));
    }
    if n < 10 * max_lag {
        log::warn!("only {n} samples for {max_lag} correlation lags");
    }
    let bound = T::lit(1.96) / T::from_usize_lossy(n).sqrt();
    let m = max_lag as i64;
    let one_sided: Vec<i64> = (0..=m).collect();
    let two_sided: Vec<i64> = (-m..=m).collect();

    let e = centred(residuals);
    let uc = centred(u);
    let eu = centred(&residuals.iter().zip(u).map(|(&a, &b)| a * b).collect::<Vec<_>>());
    let u2 = centred(&u.iter().map(|&v| v * v).collect::<Vec<_>>());
    let e2 = centred(&residuals.iter().map(|&v| v * v).collect::<Vec<_>>());

    let shifted: Vec<i64> = one_sided.iter().map(|&t| t + 1).collect();
    let series: [Series<'_, T>; 5] = [
        ("acf", &e, &e, &one_sided, &one_sided),
        ("ccf", &uc, &e, &two_sided, &two_sided),
        // E[ξ(t) (ξu)(t-1-τ)] = xcorr((ξu), ξ) at lag 1 + τ
        ("e_eu", &eu, &e, &one_sided, &shifted),
        ("u2_e", &u2, &e, &two_sided, &two_sided),
        ("u2_e2", &u2, &e2, &two_sided, &two_sided),
    ];

    let tests = series
        .into_iter()
        .map(|(name, a, b, lags, shifts)| {
            let (values, degenerate) = match normalised_xcorr(a, b, shifts) {
                Some(v) => (v, false),
                None => (vec![T::zero(); lags.len()], true),
            };
            let checked: Vec<T> =
                lags.iter().zip(&values).filter(|(&l, _)| !(name == "acf" && l == 0)).map(|(_, &v)| v).collect();
            let inside = checked.iter().filter(|v| v.abs() <= bound).count();
            let fraction_inside = T::from_usize_lossy(inside) / T::from_usize_lossy(checked.len().max(1));
            CorrelationTest {
                name: name.to_string(),
                lags: lags.to_vec(),
                pass: inside == checked.len(),
                values,
                bound,
                fraction_inside,
                degenerate,
            }
        })
        .collect();
    Ok(ValidationReport { tests, residual_variance: variance(residuals), n_samples: n })
}

/// `min(25, n / 4)`, at least one.
pub fn default_max_lag(n: usize) -> usize {
    25.min(n / 4).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    // definition-based cross-correlation of x(t) and z(t + τ)
    fn naive(x: &[f64], z: &[f64], tau: i64) -> f64 {
        let n = x.len();
        let mx = x.iter().sum::<f64>() / n as f64;
        let mz = z.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        for t in 0..n {
            for s in 0..n {
                if s as i64 - t as i64 == tau {
                    num += (x[t] - mx) * (z[s] - mz);
                }
            }
        }
        let vx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
        let vz: f64 = z.iter().map(|v| (v - mz) * (v - mz)).sum();
        num / (vx * vz).sqrt()
    }

    #[test]
    fn acf_at_zero_is_one() {
        let r = residual_tests(&gaussian(300, 1), &gaussian(300, 2), 10).unwrap();
        assert!((r.test("acf").unwrap().values[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.test("acf").unwrap().lags.len(), 11);
        assert_eq!(r.test("ccf").unwrap().lags.len(), 21);
    }

    #[test]
    fn delayed_input_violates_cross_correlation() {
        let u = gaussian(500, 3);
        let mut e = vec![0.0; 500];
        e[3..].copy_from_slice(&u[..497]);
        let r = residual_tests(&e, &u, 10).unwrap();
        let ccf = r.test("ccf").unwrap();
        assert!(ccf.value_at(3).unwrap() > ccf.bound);
        assert!(!ccf.pass);
    }

    #[test]
    fn zero_residuals_are_degenerate_not_nan() {
        let r = residual_tests(&[0.0; 100], &gaussian(100, 4), 5).unwrap();
        assert!(r.test("acf").unwrap().degenerate);
        assert!(r.tests.iter().flat_map(|t| &t.values).all(|v| v.is_finite()));
    }

    #[test]
    fn nonlinear_tests_follow_definitions() {
        let u = gaussian(80, 5);
        let e = gaussian(80, 6);
        let r = residual_tests(&e, &u, 6).unwrap();
        let eu: Vec<f64> = e.iter().zip(&u).map(|(a, b)| a * b).collect();
        let u2: Vec<f64> = u.iter().map(|v| v * v).collect();
        let e2: Vec<f64> = e.iter().map(|v| v * v).collect();
        for tau in 0..=6i64 {
            assert!((r.test("e_eu").unwrap().value_at(tau).unwrap() - naive(&eu, &e, tau + 1)).abs() < 1e-12);
            assert!((r.test("acf").unwrap().value_at(tau).unwrap() - naive(&e, &e, tau)).abs() < 1e-12);
        }
        for tau in -6..=6i64 {
            assert!((r.test("u2_e").unwrap().value_at(tau).unwrap() - naive(&u2, &e, tau)).abs() < 1e-12);
            assert!((r.test("u2_e2").unwrap().value_at(tau).unwrap() - naive(&u2, &e2, tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let r = residual_tests(&gaussian(50, 7), &gaussian(50, 8), 3).unwrap();
        let csv = r.to_csv(Some(&["acf", "ccf"]));
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "test,lag,value,upper,lower");
        assert_eq!(lines.len(), 1 + 4 + 7);
    }

    #[test]
    fn bad_shapes() {
        assert!(residual_tests(&[1.0; 10], &[1.0; 9], 2).is_err());
        assert!(residual_tests(&[1.0; 10], &[1.0; 10], 10).is_err());
    }

    proptest! {
        #[test]
        fn ccf_matches_naive_and_is_bounded(seed in any::<u64>(), n in 20usize..60) {
            let u = gaussian(n, seed);
            let e: Vec<f64> = gaussian(n, seed ^ 0xabcd).iter().zip(&u).map(|(a, b)| a + 0.3 * b * b).collect();
            let r = residual_tests(&e, &u, 4).unwrap();
            let ccf = r.test("ccf").unwrap();
            for (&lag, &v) in ccf.lags.iter().zip(&ccf.values) {
                prop_assert!((v - naive(&u, &e, lag)).abs() < 1e-12);
            }
            for t in &r.tests {
                prop_assert!(t.values.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }
    }
}
