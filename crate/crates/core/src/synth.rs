//! Synthetic benchmark data: the DC-motor NARX reference system and
//! excitation signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::{Model, DIVERGENCE_LIMIT};
use crate::term::{LagSpec, Term};

/// Coefficients of the reference DC-motor model, in the order
/// `y1, y2, u1, u2, y1*u1, y1*u2, y2*u1, y2*u2, y2^2`.
pub const DC_MOTOR_COEFFICIENTS: [f64; 9] = [1.7813, -0.7962, 0.0339, 0.0338, -0.1597, -0.1396, 0.1297, 0.1086, 0.0085];

/// Term strings matching [`DC_MOTOR_COEFFICIENTS`].
pub const DC_MOTOR_TERMS: [&str; 9] = [
    "y(t-1)",
    "y(t-2)",
    "u(t-1)",
    "u(t-2)",
    "y(t-1)*u(t-1)",
    "y(t-1)*u(t-2)",
    "y(t-2)*u(t-1)",
    "y(t-2)*u(t-2)",
    "y(t-2)^2",
];

/// The DC-motor system driven by `u` from `y(1) = y(2) = 0`.
pub fn dc_motor_reference<T: Real>(u: &[T]) -> Result<Vec<T>> {
    if u.len() < 3 {
        return Err(Error::InsufficientData { len: u.len(), required: 2 });
    }
    let c: [T; 9] = DC_MOTOR_COEFFICIENTS.map(T::lit);
    let limit = T::lit(DIVERGENCE_LIMIT);
    let mut y = vec![T::zero(); u.len()];
    for t in 2..u.len() {
        let (y1, y2, u1, u2) = (y[t - 1], y[t - 2], u[t - 1], u[t - 2]);
        let v = c[0] * y1
            + c[1] * y2
            + c[2] * u1
            + c[3] * u2
            + c[4] * y1 * u1
            + c[5] * y1 * u2
            + c[6] * y2 * u1
            + c[7] * y2 * u2
            + c[8] * y2 * y2;
        if !v.is_finite() || v.abs() > limit {
            return Err(Error::Diverged { index: t });
        }
        y[t] = v;
    }
    Ok(y)
}

/// The DC-motor system as a [`Model`] over `n_a = n_b = 2`, degree 2.
pub fn dc_motor_model<T: Real>() -> Model<T> {
    let pairs = DC_MOTOR_TERMS
        .iter()
        .zip(DC_MOTOR_COEFFICIENTS)
        .map(|(s, c)| (s.parse::<Term>().expect("valid term"), T::lit(c)));
    Model::new(pairs, LagSpec::new(2, 2, 2, false)).expect("reference model is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    WhiteNoise {
        mean: f64,
        std: f64,
        seed: u64,
    },
    /// `scale · Σ aᵢ sin(ωᵢ k Δt)` for sample index `k = 0, 1, …`.
    Multitone {
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        scale: f64,
        sample_period: f64,
    },
    /// Two-level sequence that redraws its level every `hold` samples.
    Prbs {
        levels: (f64, f64),
        hold: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub length: usize,
}

impl SignalSpec {
    /// The four-tone excitation `0.2(4 sin πt + 1.2 sin 4πt + 1.5 sin 8πt + 0.5 sin 6πt)`.
    pub fn dc_motor_multitone(length: usize, sample_period: f64) -> Self {
        use std::f64::consts::PI;
        SignalSpec {
            kind: SignalKind::Multitone {
                amplitudes: vec![4.0, 1.2, 1.5, 0.5],
                frequencies: vec![PI, 4.0 * PI, 8.0 * PI, 6.0 * PI],
                scale: 0.2,
                sample_period,
            },
            length,
        }
    }

    pub fn white_noise(length: usize, seed: u64) -> Self {
        SignalSpec { kind: SignalKind::WhiteNoise { mean: 0.0, std: 1.0, seed }, length }
    }
}

/// True when every tone is sampled at integer multiples of π, i.e. the
/// sampled multitone is identically zero.
pub fn multitone_is_degenerate(frequencies: &[f64], sample_period: f64) -> bool {
    frequencies.iter().all(|&w| {
        let cycles = w * sample_period / std::f64::consts::PI;
        (cycles - cycles.round()).abs() < 1e-12
    })
}

pub fn generate_signal<T: Real>(spec: &SignalSpec) -> Result<Vec<T>> {
    if spec.length == 0 {
        return Err(Error::Config("signal length must be at least 1".into()));
    }
    let n = spec.length;
    let out: Vec<f64> = match &spec.kind {
        SignalKind::WhiteNoise { mean, std, seed } => {
            let dist = Normal::new(*mean, *std).map_err(|e| Error::Config(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        SignalKind::Multitone { amplitudes, frequencies, scale, sample_period } => {
            if amplitudes.len() != frequencies.len() {
                return Err(Error::Config("multitone needs one amplitude per frequency".into()));
            }
            if multitone_is_degenerate(frequencies, *sample_period) {
                log::warn!(
                    "multitone sampled at {sample_period} s hits only multiples of pi; the signal is identically zero"
                );
            }
            (0..n)
                .map(|k| {
                    let t = k as f64 * sample_period;
                    scale * amplitudes.iter().zip(frequencies).map(|(a, w)| a * (w * t).sin()).sum::<f64>()
                })
                .collect()
        }
        SignalKind::Prbs { levels, hold, seed } => {
            if *hold == 0 {
                return Err(Error::Config("PRBS hold must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let level = if rng.random::<bool>() { levels.1 } else { levels.0 };
                out.extend(std::iter::repeat_n(level, (*hold).min(n - out.len())));
            }
            out
        }
    };
    Ok(out.into_iter().map(T::lit).collect())
}

/// Adds seeded zero-mean Gaussian noise of standard deviation `std`.
pub fn add_noise<T: Real>(signal: &[T], std: f64, seed: u64) -> Result<Vec<T>> {
    let dist = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(signal.iter().map(|&v| v + T::lit(dist.sample(&mut rng))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate_free_run;

    #[test]
    fn zero_input_gives_zero_output() {
        assert!(dc_motor_reference(&[0.0f64; 100]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_first_sample() {
        let mut u = vec![0.0f64; 10];
        u[2] = 1.0; // t = 3, one-based
        let y = dc_motor_reference(&u).unwrap();
        assert_eq!(y[3], 0.0339);
        assert_eq!(y[2], 0.0);
    }

    #[test]
    fn reference_matches_generic_simulator() {
        let mut compared = 0;
        for seed in 0..20 {
            let u: Vec<f64> = generate_signal(&SignalSpec::white_noise(1000, seed)).unwrap();
            match (dc_motor_reference(&u), simulate_free_run(&dc_motor_model(), &u, &[0.0, 0.0])) {
                (Ok(y), Ok(sim)) => {
                    let worst = y.iter().zip(&sim).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(worst <= 1e-12, "seed {seed}: {worst}");
                    compared += 1;
                }
                (Err(Error::Diverged { index: a }), Err(Error::Diverged { index: b })) => assert_eq!(a, b),
                (a, b) => panic!("seed {seed}: implementations disagree: {a:?} vs {b:?}"),
            }
        }
        assert!(compared >= 5);
    }

    #[test]
    fn white_noise_is_seeded() {
        let a: Vec<f64> = generate_signal(&SignalSpec::white_noise(64, 7)).unwrap();
        let b: Vec<f64> = generate_signal(&SignalSpec::white_noise(64, 7)).unwrap();
        let c: Vec<f64> = generate_signal(&SignalSpec::white_noise(64, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn integer_sampling_degenerates_multitone() {
        let spec = SignalSpec::dc_motor_multitone(50, 1.0);
        let SignalKind::Multitone { frequencies, .. } = &spec.kind else { unreachable!() };
        assert!(multitone_is_degenerate(frequencies, 1.0));
        let u: Vec<f64> = generate_signal(&spec).unwrap();
        assert!(u.iter().all(|v| v.abs() < 1e-12));
        let u: Vec<f64> = generate_signal(&SignalSpec::dc_motor_multitone(50, 0.01)).unwrap();
        assert!(u.iter().any(|v| v.abs() > 0.1));
    }

    #[test]
    fn prbs_runs_are_multiples_of_hold() {
        let spec = SignalSpec { kind: SignalKind::Prbs { levels: (-1.0, 1.0), hold: 5, seed: 3 }, length: 500 };
        let u: Vec<f64> = generate_signal(&spec).unwrap();
        let mut run = 1;
        for w in u.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                assert_eq!(run % 5, 0);
                run = 1;
            }
        }
        assert!(u.iter().all(|&v| v == 1.0 || v == -1.0));
    }
}
