use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logical accuracy of a decoded memory experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalStats {
    pub shots: u64,
    pub errors: u64,
    pub cycles: usize,
    pub p_err: f64,
    /// Per-cycle logical error rate.
    pub eps_l: f64,
    pub lambda: Option<f64>,
}

/// Per-cycle rate from the logical error probability after `cycles`
/// rounds: `(1 - (1 - 2P)^(1/T)) / 2`. Saturates at one half.
pub fn per_cycle_rate(p_err: f64, cycles: usize) -> f64 {
    let base = (1.0 - 2.0 * p_err).max(0.0);
    0.5 * (1.0 - base.powf(1.0 / cycles as f64))
}

/// Inverse of [`per_cycle_rate`].
pub fn total_error_probability(eps_l: f64, cycles: usize) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * eps_l).powi(cycles as i32))
}

impl LogicalStats {
    pub fn from_counts(errors: u64, shots: u64, cycles: usize) -> Result<LogicalStats> {
        if shots == 0 {
            return Err(Error::InvalidArgument(
                "logical statistics need at least one shot".into(),
            ));
        }
        if cycles == 0 {
            return Err(Error::InvalidCycles(0));
        }
        let p_err = errors as f64 / shots as f64;
        if p_err > 0.5 {
            log::warn!("logical error probability {p_err} exceeds one half");
        }
        Ok(LogicalStats {
            shots,
            errors,
            cycles,
            p_err,
            eps_l: per_cycle_rate(p_err, cycles),
            lambda: None,
        })
    }

    /// Attaches a point estimate of Λ against a reference.
    pub fn with_reference(mut self, d: usize, lambda_star: f64, eps_star: f64) -> LogicalStats {
        self.lambda = Some(lambda_point_estimate(self.eps_l, d, lambda_star, eps_star));
        self
    }
}

pub fn logical_error_rate(
    predictions: &[bool],
    actual: &[bool],
    cycles: usize,
) -> Result<LogicalStats> {
    if predictions.len() != actual.len() {
        return Err(Error::LengthMismatch {
            expected: actual.len(),
            got: predictions.len(),
        });
    }
    let errors = predictions
        .iter()
        .zip(actual)
        .filter(|(p, a)| p != a)
        .count() as u64;
    LogicalStats::from_counts(errors, actual.len() as u64, cycles)
}

/// `Λ = Λ* (ε_L* / ε_L)^(2/(d+1))`.
pub fn lambda_point_estimate(eps_l: f64, d: usize, lambda_star: f64, eps_star: f64) -> f64 {
    lambda_star * (eps_star / eps_l).powf(2.0 / (d as f64 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inversion_identities() {
        assert_eq!(per_cycle_rate(0.0, 10), 0.0);
        assert_relative_eq!(per_cycle_rate(0.2, 1), 0.2, epsilon = 1e-15);
        let p = total_error_probability(0.01, 25);
        assert_relative_eq!(per_cycle_rate(p, 25), 0.01, epsilon = 1e-14);
        assert_eq!(per_cycle_rate(0.7, 5), 0.5);
    }

    #[test]
    fn lambda_examples() {
        assert_relative_eq!(lambda_point_estimate(1e-3, 5, 3.0, 1e-3), 3.0);
        assert_relative_eq!(
            lambda_point_estimate(4e-3, 3, 4.0, 1e-3),
            2.0,
            epsilon = 1e-12
        );
        // eps = C Λ^{-(d+1)/2} with C fixed by the reference
        let (ls, es, d) = (4.0f64, 1e-3, 5usize);
        let c = es * ls.powf((d as f64 + 1.0) / 2.0);
        let eps = 3.7e-3;
        let l = lambda_point_estimate(eps, d, ls, es);
        assert_relative_eq!(
            c * l.powf(-(d as f64 + 1.0) / 2.0),
            eps,
            max_relative = 1e-12
        );
    }

    #[test]
    fn stats_from_predictions() {
        let s = logical_error_rate(&[true, false, false, true], &[true, true, false, false], 1)
            .unwrap();
        assert_eq!((s.errors, s.shots), (2, 4));
        assert_eq!(s.eps_l, 0.5);
        assert!(logical_error_rate(&[], &[], 3).is_err());
        assert!(logical_error_rate(&[true], &[], 3).is_err());
    }
}
