//! Task definitions, priors and the log-posterior target.

use serde::{Deserialize, Serialize};

use crate::deterioration::DeteriorationModel;
use crate::prob::{Distribution1D, LOG_ZERO};
use crate::structural::ModelCandidate;
use crate::study::StrainSeries;
use crate::{Error, Result};

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Inference task. The last parameter of every task is the prediction-error
/// standard deviation σ (microstrain).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Infer E with the thickness loss fixed at zero.
    SysId,
    /// Infer a constant thickness loss with E fixed at the candidate's MAP.
    Diagnosis,
    /// Infer deterioration-law parameters with E fixed at the candidate's MAP.
    Prognosis(DeteriorationModel),
}

impl TaskSpec {
    pub fn name(&self) -> String {
        match self {
            Self::SysId => "sysid".into(),
            Self::Diagnosis => "diagnosis".into(),
            Self::Prognosis(m) => format!("prognosis-{}", m.name()),
        }
    }

    fn needs_e_map(&self) -> bool {
        !matches!(self, Self::SysId)
    }
}

/// Ordered parameter names with one independent prior each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub names: Vec<String>,
    pub priors: Vec<Distribution1D>,
}

impl ParameterSpace {
    pub fn new(names: Vec<String>, priors: Vec<Distribution1D>) -> Result<Self> {
        if names.len() != priors.len() || names.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: priors.len(),
            });
        }
        for p in &priors {
            p.validate()?;
        }
        Ok(Self { names, priors })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        self.priors.iter().zip(theta).map(|(p, &x)| p.log_pdf(x)).sum()
    }

    /// Default priors for `task` on candidate `c`.
    pub fn for_task(task: &TaskSpec, c: &ModelCandidate) -> Result<Self> {
        let sigma = Distribution1D::uniform(0.0, 10.0)?;
        let (names, priors): (Vec<&str>, Vec<Distribution1D>) = match task {
            TaskSpec::SysId => (
                vec!["E", "sigma"],
                vec![Distribution1D::uniform(c.e_range.0, c.e_range.1)?, sigma],
            ),
            TaskSpec::Diagnosis => (
                vec!["dtau", "sigma"],
                vec![Distribution1D::uniform(0.0, c.dtau_max)?, sigma],
            ),
            TaskSpec::Prognosis(DeteriorationModel::Logistic) => (
                vec!["alpha", "beta", "gamma", "sigma"],
                vec![
                    Distribution1D::half_normal(0.1)?,
                    Distribution1D::normal(0.0, 1.0)?,
                    Distribution1D::uniform(0.0, c.dtau_max)?,
                    sigma,
                ],
            ),
            TaskSpec::Prognosis(DeteriorationModel::PowerLaw { .. }) => (
                vec!["alpha", "beta", "sigma"],
                vec![
                    Distribution1D::uniform(0.1, 1.5)?,
                    Distribution1D::uniform(-1.5, 1.5)?,
                    sigma,
                ],
            ),
        };
        Self::new(names.into_iter().map(String::from).collect(), priors)
    }
}

/// One model prediction; `clamped` records that the deterioration law left
/// the candidate's admissible thickness-loss range and was clamped into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub strain: f64,
    pub dtau: f64,
    pub clamped: bool,
}

fn fixed_modulus(task: &TaskSpec, c: &ModelCandidate) -> Result<f64> {
    c.e_map.ok_or_else(|| Error::MissingPrerequisite {
        what: format!("MAP modulus for candidate {} ({} task)", c.id, task.name()),
        command: "sysid".into(),
    })
}

/// Thickness loss implied by the structural parameters at time `t`, clamped
/// to `[0, dtau_max]`. `None` marks a point excluded from the likelihood
/// (power law with non-positive exponent at the initiation time).
pub fn dtau_at(task: &TaskSpec, c: &ModelCandidate, theta_model: &[f64], t: f64) -> Result<Option<(f64, bool)>> {
    match task {
        TaskSpec::SysId => Ok(Some((0.0, false))),
        TaskSpec::Diagnosis => Ok(Some((theta_model[0], false))),
        TaskSpec::Prognosis(law) => {
            if let DeteriorationModel::PowerLaw { t0, .. } = law {
                if t == *t0 && theta_model[1] <= 0.0 {
                    return Ok(None);
                }
            }
            let raw = law.dtau(theta_model, t)?;
            if !raw.is_finite() {
                return Err(Error::Domain(format!("deterioration law diverged at t = {t}")));
            }
            let clamped = raw.clamp(0.0, c.dtau_max);
            Ok(Some((clamped, clamped != raw)))
        }
    }
}

/// Strain prediction for structural parameters `theta_model` (σ excluded).
pub fn predict_point(task: &TaskSpec, c: &ModelCandidate, theta_model: &[f64], t: f64) -> Result<Option<Prediction>> {
    let Some((dtau, clamped)) = dtau_at(task, c, theta_model, t)? else {
        return Ok(None);
    };
    let e = match task {
        TaskSpec::SysId => theta_model[0],
        _ => fixed_modulus(task, c)?,
    };
    Ok(Some(Prediction {
        strain: c.predict_strain(e, dtau)?,
        dtau,
        clamped,
    }))
}

/// Peak demand (MPa) for structural parameters `theta_model` at time `t`
/// (ignored except for prognosis).
pub fn predict_demand(task: &TaskSpec, c: &ModelCandidate, theta_model: &[f64], t: f64) -> Result<(f64, bool)> {
    let (dtau, clamped) = dtau_at(task, c, theta_model, t)?
        .ok_or_else(|| Error::Domain(format!("thickness loss undefined at t = {t}")))?;
    Ok((c.predict_demand(dtau)?, clamped))
}

/// Gaussian log-likelihood plus independent log-priors for one candidate and task.
#[derive(Debug, Clone)]
pub struct LogPosterior<'a> {
    task: TaskSpec,
    candidate: &'a ModelCandidate,
    data: &'a StrainSeries,
    space: ParameterSpace,
}

impl<'a> LogPosterior<'a> {
    pub fn new(task: TaskSpec, candidate: &'a ModelCandidate, data: &'a StrainSeries) -> Result<Self> {
        let space = ParameterSpace::for_task(&task, candidate)?;
        Self::with_space(task, candidate, data, space)
    }

    pub fn with_space(
        task: TaskSpec,
        candidate: &'a ModelCandidate,
        data: &'a StrainSeries,
        space: ParameterSpace,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("empty strain series".into()));
        }
        if data.strains().iter().chain(data.times()).any(|x| x.is_nan()) {
            return Err(Error::Data("NaN in strain series".into()));
        }
        if task.needs_e_map() {
            fixed_modulus(&task, candidate)?;
        }
        Ok(Self {
            task,
            candidate,
            data,
            space,
        })
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    /// Log-posterior (up to the evidence) at `theta`; [`LOG_ZERO`] when a prior
    /// term vanishes or the model cannot be evaluated there.
    pub fn eval(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.space.dim());
        let lp = self.space.log_prior(theta);
        if lp == LOG_ZERO {
            return LOG_ZERO;
        }
        let (model, sigma) = theta.split_at(theta.len() - 1);
        let sigma = sigma[0];
        if !(sigma > 0.0) {
            return LOG_ZERO;
        }
        let inv_var = 1.0 / (sigma * sigma);
        let norm = -HALF_LN_TWO_PI - sigma.ln();
        let mut ll = 0.0;
        for (&t, &obs) in self.data.times().iter().zip(self.data.strains()) {
            match predict_point(&self.task, self.candidate, model, t) {
                Ok(Some(p)) => {
                    let r = obs - p.strain;
                    ll += norm - 0.5 * r * r * inv_var;
                }
                Ok(None) => {}
                Err(_) => return LOG_ZERO,
            }
        }
        if ll.is_nan() {
            return LOG_ZERO;
        }
        lp + ll
    }
}

/// Evaluates the task log-posterior once, validating dimensions and data.
pub fn log_posterior(task: &TaskSpec, c: &ModelCandidate, data: &StrainSeries, theta: &[f64]) -> Result<f64> {
    let target = LogPosterior::new(*task, c, data)?;
    if theta.len() != target.space().dim() {
        return Err(Error::DimensionMismatch {
            expected: target.space().dim(),
            got: theta.len(),
        });
    }
    Ok(target.eval(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::RngStream;
    use crate::structural::{beam_strain, Geometry, ObservationModel};
    use approx::assert_abs_diff_eq;

    fn analytical(e_map: Option<f64>) -> ModelCandidate {
        let mut c = ModelCandidate::new("M1", Geometry::default(), ObservationModel::Analytical, 1.4).unwrap();
        c.e_map = e_map;
        c
    }

    fn series(times: Vec<f64>, strains: Vec<f64>) -> StrainSeries {
        StrainSeries::new(times, strains).unwrap()
    }

    #[test]
    fn sigma_outside_support_is_rejected() {
        let c = analytical(None);
        let d = series(vec![0.0, 1.0], vec![-390.0, -391.0]);
        for s in [0.0, -1.0, 10.5] {
            assert_eq!(log_posterior(&TaskSpec::SysId, &c, &d, &[200.0, s]).unwrap(), LOG_ZERO);
        }
        assert!(log_posterior(&TaskSpec::SysId, &c, &d, &[200.0, 10.0])
            .unwrap()
            .is_finite());
    }

    #[test]
    fn single_perfect_observation() {
        let c = analytical(None);
        let pred = beam_strain(&c.geometry, 200.0, 0.0).unwrap();
        let d = series(vec![5.0], vec![pred]);
        let lp = log_posterior(&TaskSpec::SysId, &c, &d, &[200.0, 1.0]).unwrap();
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln() - (68.0f64).ln() - (10.0f64).ln();
        assert_abs_diff_eq!(lp, want, epsilon = 1e-12);
        assert_abs_diff_eq!(lp - (-(68.0f64).ln() - (10.0f64).ln()), -0.9189385, epsilon = 1e-7);
    }

    #[test]
    fn sysid_ignores_data_phase() {
        let c = analytical(None);
        let pred = beam_strain(&c.geometry, 210.0, 0.0).unwrap();
        let early = series(vec![10.0], vec![pred]);
        let late = series(vec![1250.0], vec![pred]);
        let a = log_posterior(&TaskSpec::SysId, &c, &early, &[210.0, 2.0]).unwrap();
        let b = log_posterior(&TaskSpec::SysId, &c, &late, &[210.0, 2.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_for_bad_inputs() {
        let c = analytical(None);
        let d = series(vec![0.0, 1.0], vec![-390.0, -391.0]);
        assert!(matches!(
            log_posterior(&TaskSpec::SysId, &c, &d, &[200.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            log_posterior(&TaskSpec::Diagnosis, &c, &d, &[0.5, 1.0]),
            Err(Error::MissingPrerequisite { .. })
        ));
        let empty = StrainSeries::default();
        assert!(log_posterior(&TaskSpec::SysId, &c, &empty, &[200.0, 1.0]).is_err());
    }

    #[test]
    fn priors_match_task_definitions() {
        let c = analytical(Some(200.0));
        let s = ParameterSpace::for_task(&TaskSpec::Prognosis(DeteriorationModel::Logistic), &c).unwrap();
        assert_eq!(s.names, ["alpha", "beta", "gamma", "sigma"]);
        assert_eq!(s.priors[0], Distribution1D::HalfNormal { scale: 0.1 });
        assert_eq!(s.priors[2], Distribution1D::Uniform { lo: 0.0, hi: 1.4 });
        let s = ParameterSpace::for_task(&TaskSpec::SysId, &c).unwrap();
        assert_eq!(s.priors[0], Distribution1D::Uniform { lo: 170.0, hi: 238.0 });
    }

    #[test]
    fn powerlaw_initiation_point_excluded_for_nonpositive_exponent() {
        let c = analytical(Some(200.0));
        let law = DeteriorationModel::PowerLaw {
            t0: 200.0,
            dt_ts: 900.0,
        };
        let task = TaskSpec::Prognosis(law);
        let d = series(vec![200.0, 300.0], vec![-390.0, -400.0]);
        let only_second = series(vec![300.0], vec![-400.0]);
        let a = log_posterior(&task, &c, &d, &[0.5, -0.5, 3.0]).unwrap();
        let b = log_posterior(&task, &c, &only_second, &[0.5, -0.5, 3.0]).unwrap();
        assert_eq!(a, b);
        let with_point = log_posterior(&task, &c, &d, &[0.5, 0.5, 3.0]).unwrap();
        assert!(with_point.is_finite() && with_point != a);
    }

    #[test]
    fn prognosis_clamps_into_candidate_range() {
        let c = analytical(Some(200.0));
        let task = TaskSpec::Prognosis(DeteriorationModel::PowerLaw {
            t0: 200.0,
            dt_ts: 900.0,
        });
        let p = predict_point(&task, &c, &[1.5, 1.5], 1300.0).unwrap().unwrap();
        assert!(p.clamped);
        assert_eq!(p.dtau, 1.4);
        assert_eq!(p.strain, beam_strain(&c.geometry, 200.0, 1.4).unwrap());
    }

    // Likelihood recomputed with an explicit loop over a hand-written
    // Gaussian density, independent of LogPosterior::eval.
    #[test]
    fn decomposes_into_prior_plus_likelihood() {
        let c = analytical(Some(205.0));
        let mut rng = RngStream::new(11, 0);
        let times: Vec<f64> = (0..40).map(|i| 200.0 + 15.0 * i as f64).collect();
        let strains: Vec<f64> = times
            .iter()
            .map(|t| -400.0 - 0.05 * (t - 200.0) + rng.standard_normal())
            .collect();
        let d = series(times.clone(), strains.clone());
        let tasks = [
            TaskSpec::SysId,
            TaskSpec::Diagnosis,
            TaskSpec::Prognosis(DeteriorationModel::Logistic),
            TaskSpec::Prognosis(DeteriorationModel::PowerLaw {
                t0: 200.0,
                dt_ts: 900.0,
            }),
        ];
        for case in 0..100 {
            let task = tasks[case % tasks.len()];
            let space = ParameterSpace::for_task(&task, &c).unwrap();
            let theta: Vec<f64> = loop {
                let th: Vec<f64> = space.priors.iter().map(|p| p.sample(&mut rng)).collect();
                if th.last().copied().unwrap() > 0.05
                    && (!matches!(task, TaskSpec::Prognosis(DeteriorationModel::PowerLaw { .. })) || th[1] > 0.0)
                {
                    break th;
                }
            };
            let sigma = *theta.last().unwrap();
            let mut brute = 0.0;
            for (t, y) in times.iter().zip(&strains) {
                let dtau = match task {
                    TaskSpec::SysId => 0.0,
                    TaskSpec::Diagnosis => theta[0],
                    TaskSpec::Prognosis(DeteriorationModel::Logistic) => {
                        theta[2] / (1.0 + (-(theta[0] + theta[1] * t)).exp())
                    }
                    TaskSpec::Prognosis(DeteriorationModel::PowerLaw { .. }) => {
                        (theta[0] / 900.0 * (t - 200.0).powf(theta[1])).min(1.4)
                    }
                };
                let e = if task == TaskSpec::SysId { theta[0] } else { 205.0 };
                let t_rem = 5.9 - dtau;
                let m = 3.0 * -1000.0 * 26.54 / (t_rem * t_rem * 29.32 * e * 1000.0) * 1e6;
                brute +=
                    -0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - (y - m).powi(2) / (2.0 * sigma * sigma);
            }
            let lp = log_posterior(&task, &c, &d, &theta).unwrap();
            let diff = lp - space.log_prior(&theta) - brute;
            assert!(diff.abs() <= 1e-10 * brute.abs().max(1.0), "case {case}: diff {diff}");
        }
    }
}
