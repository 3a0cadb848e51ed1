//! Thickness-loss growth laws.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub alpha: f64,
    /// Per minute.
    pub beta: f64,
    /// Upper cut-off, mm.
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawParams {
    /// Scaled rate, mm.
    pub alpha: f64,
    pub beta: f64,
    /// Initiation time, minutes.
    pub t0: f64,
    /// Length normalizer, minutes.
    pub dt_ts: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `gamma / (1 + exp(-(alpha + beta t)))`.
pub fn logistic_dtau(p: &LogisticParams, t: f64) -> f64 {
    p.gamma * sigmoid(p.alpha + p.beta * t)
}

/// `(alpha / dt_ts) (t - t0)^beta`, defined for `t >= t0`.
pub fn powerlaw_dtau(p: &PowerLawParams, t: f64) -> Result<f64> {
    if !(p.dt_ts > 0.0) {
        return Err(Error::Domain(format!("dt_ts must be > 0, got {}", p.dt_ts)));
    }
    if t < p.t0 {
        return Err(Error::Domain(format!("t = {t} precedes initiation time {}", p.t0)));
    }
    let elapsed = t - p.t0;
    if elapsed == 0.0 {
        if p.beta > 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Domain(format!(
            "power law singular at t = t0 for beta = {}",
            p.beta
        )));
    }
    Ok(p.alpha / p.dt_ts * elapsed.powf(p.beta))
}

/// Deterioration law selected for a prognosis task. The power law carries its
/// deterministic constants; the free parameters come from the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeteriorationModel {
    Logistic,
    #[serde(rename = "powerlaw")]
    PowerLaw {
        t0: f64,
        dt_ts: f64,
    },
}

impl DeteriorationModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Logistic => "logistic",
            Self::PowerLaw { .. } => "powerlaw",
        }
    }

    /// Number of free law parameters (excluding the noise scale).
    pub fn n_params(&self) -> usize {
        match self {
            Self::Logistic => 3,
            Self::PowerLaw { .. } => 2,
        }
    }

    /// Thickness loss at `t` for free parameters `theta`
    /// (`[alpha, beta, gamma]` or `[alpha, beta]`).
    pub fn dtau(&self, theta: &[f64], t: f64) -> Result<f64> {
        match *self {
            Self::Logistic => Ok(logistic_dtau(
                &LogisticParams {
                    alpha: theta[0],
                    beta: theta[1],
                    gamma: theta[2],
                },
                t,
            )),
            Self::PowerLaw { t0, dt_ts } => powerlaw_dtau(
                &PowerLawParams {
                    alpha: theta[0],
                    beta: theta[1],
                    t0,
                    dt_ts,
                },
                t,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn logistic_reference_values() {
        for beta in [-3.0, 0.0, 0.5] {
            let p = LogisticParams {
                alpha: 0.0,
                beta,
                gamma: 1.0,
            };
            assert_eq!(logistic_dtau(&p, 0.0), 0.5);
        }
        let p = LogisticParams {
            alpha: 0.1,
            beta: 0.01,
            gamma: 1.0,
        };
        assert_abs_diff_eq!(logistic_dtau(&p, 100.0), 1.0 / (1.0 + (-1.1f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(logistic_dtau(&p, 100.0), 0.75026, epsilon = 1e-5);
    }

    #[test]
    fn logistic_is_stable_at_extremes() {
        let p = LogisticParams {
            alpha: 0.0,
            beta: 1.0,
            gamma: 0.8,
        };
        assert_eq!(logistic_dtau(&p, 700.0), 0.8);
        assert_eq!(logistic_dtau(&p, 1e6), 0.8);
        let lo = logistic_dtau(&p, -700.0);
        assert!((0.0..1e-300).contains(&lo));
        assert_eq!(logistic_dtau(&p, -1e6), 0.0);
        for t in [-700.0, -50.0, 0.0, 50.0, 700.0] {
            let v = logistic_dtau(&p, t);
            assert!(v.is_finite() && (0.0..=0.8).contains(&v));
        }
    }

    #[test]
    fn logistic_midpoint() {
        let p = LogisticParams {
            alpha: -2.5,
            beta: 0.005,
            gamma: 1.3,
        };
        assert_eq!(logistic_dtau(&p, 500.0), 0.65);
    }

    #[test]
    fn powerlaw_reference_values() {
        let mut p = PowerLawParams {
            alpha: 0.6,
            beta: 1.0,
            t0: 200.0,
            dt_ts: 900.0,
        };
        assert_eq!(powerlaw_dtau(&p, 200.0).unwrap(), 0.0);
        assert_abs_diff_eq!(powerlaw_dtau(&p, 650.0).unwrap(), 0.3, epsilon = 1e-14);
        p.beta = 0.5;
        assert_abs_diff_eq!(powerlaw_dtau(&p, 1100.0).unwrap(), 0.02, epsilon = 1e-14);
    }

    #[test]
    fn powerlaw_domain_errors() {
        let mut p = PowerLawParams {
            alpha: 0.6,
            beta: 1.0,
            t0: 200.0,
            dt_ts: 900.0,
        };
        assert!(powerlaw_dtau(&p, 199.0).is_err());
        p.beta = -0.5;
        assert!(powerlaw_dtau(&p, 200.0).is_err());
        p.beta = 0.0;
        assert!(powerlaw_dtau(&p, 200.0).is_err());
        assert_eq!(powerlaw_dtau(&p, 300.0).unwrap(), 0.6 / 900.0);
    }

    #[test]
    fn powerlaw_linear_in_alpha() {
        let p = PowerLawParams {
            alpha: 0.37,
            beta: 1.3,
            t0: 200.0,
            dt_ts: 900.0,
        };
        let p2 = PowerLawParams { alpha: 0.74, ..p };
        for i in 0..1000 {
            let t = 200.0 + i as f64 * 1.1;
            assert_eq!(powerlaw_dtau(&p2, t).unwrap(), 2.0 * powerlaw_dtau(&p, t).unwrap());
        }
    }

    #[test]
    fn both_laws_nondecreasing_for_positive_beta() {
        let lg = LogisticParams {
            alpha: 0.05,
            beta: 0.003,
            gamma: 1.0,
        };
        let pl = PowerLawParams {
            alpha: 0.8,
            beta: 0.7,
            t0: 200.0,
            dt_ts: 900.0,
        };
        let (mut a, mut b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..1000 {
            let t = 200.0 + i as f64;
            let x = logistic_dtau(&lg, t);
            let y = powerlaw_dtau(&pl, t).unwrap();
            assert!(x >= a && y >= b);
            a = x;
            b = y;
        }
    }

    #[test]
    fn model_dispatch() {
        let m = DeteriorationModel::PowerLaw {
            t0: 200.0,
            dt_ts: 900.0,
        };
        assert_abs_diff_eq!(m.dtau(&[0.6, 1.0], 650.0).unwrap(), 0.3, epsilon = 1e-14);
        assert_eq!(DeteriorationModel::Logistic.dtau(&[0.0, 1.0, 2.0], 0.0).unwrap(), 1.0);
    }
}
