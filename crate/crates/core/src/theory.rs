//! Closed-form constants and error bounds for the inexact online projected
//! gradient method. All norms are stacked norms over the `nN` vector.

use log::warn;

use crate::error::{Error, Result};

/// `max(|1 - alpha * lower|, |1 - alpha * upper|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionFactor {
    pub zeta: f64,
}

impl ContractionFactor {
    /// Whether `zeta` lies in `(0, 1)`, as the convergence bound requires.
    pub fn is_valid(&self) -> bool {
        self.zeta > 0.0 && self.zeta < 1.0
    }
}

pub fn contraction_factor(alpha: f64, lower: f64, upper: f64) -> Result<ContractionFactor> {
    if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
        return Err(Error::InvalidCurvature { lower, upper });
    }
    let zeta = (1.0 - alpha * lower).abs().max((1.0 - alpha * upper).abs());
    let out = ContractionFactor { zeta };
    if !out.is_valid() {
        warn!("contraction factor {zeta} outside (0, 1) for step {alpha} and curvature [{lower}, {upper}]");
    }
    Ok(out)
}

/// Worst-case stacked coordination error `2 * delta * sqrt(n * N)`.
pub fn coordination_bound(delta: f64, dim: usize, agents: usize) -> f64 {
    2.0 * delta * ((dim * agents) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    /// Drift between consecutive optima.
    pub sigma: f64,
    /// Coordination error.
    pub gamma: f64,
    /// Stochastic gradient error.
    pub tau: f64,
    pub initial_error: f64,
}

impl BoundParams {
    pub fn zeta(&self) -> Result<f64> {
        Ok(contraction_factor(self.alpha, self.lower, self.upper)?.zeta)
    }

    /// Per-iteration error injection `sigma + gamma + alpha * tau`.
    pub fn error_rate(&self) -> f64 {
        self.sigma + self.gamma + self.alpha * self.tau
    }

    fn checked_zeta(&self) -> Result<f64> {
        if [self.sigma, self.gamma, self.tau, self.initial_error]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::InvalidBoundParams(
                "sigma, gamma, tau and the initial error must be nonnegative".into(),
            ));
        }
        let zeta = self.zeta()?;
        if !(zeta < 1.0) {
            return Err(Error::InvalidBoundParams(format!(
                "step {} gives contraction factor {zeta}, outside (0, 1)",
                self.alpha
            )));
        }
        Ok(zeta)
    }
}

/// `zeta^k e0 + (sigma + gamma + alpha tau) (1 - zeta^(k+1)) / (1 - zeta)`.
pub fn mean_error_bound(k: usize, params: &BoundParams) -> Result<f64> {
    let zeta = params.checked_zeta()?;
    let decay = zeta.powi(k.min(i32::MAX as usize) as i32);
    Ok(decay * params.initial_error + params.error_rate() * (1.0 - decay * zeta) / (1.0 - zeta))
}

/// `(sigma + gamma + alpha tau) / (1 - zeta)`.
pub fn asymptotic_bound(params: &BoundParams) -> Result<f64> {
    let zeta = params.checked_zeta()?;
    Ok(params.error_rate() / (1.0 - zeta))
}

/// Maximum error over the last four fifths of a trace: records with index
/// `k >= ceil(K / 5)` where `K = errors.len() - 1` is the iteration count.
pub fn tail_error(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let start = (errors.len() - 1).div_ceil(5);
    Ok(errors[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Step size in `(0, 2 / upper)` minimizing [`asymptotic_bound`], found by
/// golden-section search (the bound is unimodal in the step).
pub fn bound_minimizing_step(sigma: f64, gamma: f64, tau: f64, lower: f64, upper: f64) -> Result<f64> {
    contraction_factor(1.0 / upper, lower, upper)?;
    let objective = |alpha: f64| {
        let zeta = (1.0 - alpha * lower).abs().max((1.0 - alpha * upper).abs());
        (sigma + gamma + alpha * tau) / (1.0 - zeta)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 2.0 / upper);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..200 {
        if objective(c) <= objective(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(zeta_half: bool) -> BoundParams {
        // alpha = 2 / (5 + 15) gives zeta = 0.5
        BoundParams {
            alpha: if zeta_half { 0.1 } else { 0.05 },
            lower: 5.0,
            upper: 15.0,
            sigma: 0.0,
            gamma: 0.0,
            tau: 0.0,
            initial_error: 0.0,
        }
    }

    #[test]
    fn contraction_hand_values() {
        assert!((contraction_factor(0.1, 5.0, 15.0).unwrap().zeta - 0.5).abs() < 1e-15);
        let z = contraction_factor(1.0 / 7.0, 7.0, 7.0).unwrap();
        assert_eq!(z.zeta, 0.0);
        assert!(!z.is_valid());
        let z = contraction_factor(0.3, 5.0, 15.0).unwrap();
        assert!((z.zeta - 3.5).abs() < 1e-12);
        assert!(!z.is_valid());
        assert!(contraction_factor(0.1, 0.0, 1.0).is_err());
        assert!(contraction_factor(0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn coordination_hand_values() {
        assert!((coordination_bound(0.01, 16, 10) - 0.252_982_212_813_470_5).abs() < 1e-12);
        assert_eq!(coordination_bound(0.3, 1, 1), 0.6);
        assert_eq!(coordination_bound(0.005, 16, 10) * 2.0, coordination_bound(0.01, 16, 10));
    }

    #[test]
    fn mean_bound_hand_value() {
        let p = BoundParams {
            initial_error: 1.0,
            gamma: 0.2,
            ..params(true)
        };
        assert!((mean_error_bound(1, &p).unwrap() - 0.8).abs() < 1e-12);
        let zero = params(true);
        for k in [0, 1, 10, 1000] {
            assert_eq!(mean_error_bound(k, &zero).unwrap(), 0.0);
        }
    }

    #[test]
    fn bound_limit_and_monotonicity() {
        let p = BoundParams {
            gamma: 0.253,
            ..params(true)
        };
        assert!((asymptotic_bound(&p).unwrap() - 0.506).abs() < 1e-12);
        assert!((mean_error_bound(5000, &p).unwrap() - asymptotic_bound(&p).unwrap()).abs() < 1e-12);
        assert_eq!(asymptotic_bound(&params(true)).unwrap(), 0.0);

        let base = asymptotic_bound(&p).unwrap();
        for bumped in [
            BoundParams { sigma: 0.1, ..p },
            BoundParams { gamma: 0.3, ..p },
            BoundParams { tau: 1.0, ..p },
            BoundParams { alpha: 0.05, ..p }, // larger zeta
        ] {
            assert!(asymptotic_bound(&bumped).unwrap() > base);
        }

        let decaying = BoundParams { initial_error: 10.0, ..p };
        let traj: Vec<f64> = (0..50).map(|k| mean_error_bound(k, &decaying).unwrap()).collect();
        assert!(traj.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bound_rejects_noncontractive_step() {
        let p = BoundParams { alpha: 0.3, ..params(true) };
        assert!(mean_error_bound(1, &p).is_err());
        let p = BoundParams { sigma: -1.0, ..params(true) };
        assert!(asymptotic_bound(&p).is_err());
    }

    #[test]
    fn tail_window() {
        assert_eq!(tail_error(&[5.0, 4.0, 3.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(tail_error(&[2.5; 7]).unwrap(), 2.5);
        assert_eq!(tail_error(&[4.0]).unwrap(), 4.0);
        assert!(matches!(tail_error(&[]), Err(Error::EmptyTrace)));
    }

    #[test]
    fn bound_minimizing_step_matches_contraction_optimum() {
        let alpha = bound_minimizing_step(0.0, 0.25, 0.0, 5.0, 85.0).unwrap();
        assert!((alpha - 2.0 / 90.0).abs() < 1e-9, "{alpha}");
        let alpha = bound_minimizing_step(0.1, 0.25, 3.0, 5.0, 85.0).unwrap();
        assert!((alpha - 2.0 / 90.0).abs() < 1e-9, "{alpha}");
    }
}
