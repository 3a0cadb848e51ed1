//! Failure probability and expected utilities of candidate models.
//!
//! Utilities are risk-neutral and bounded to [0, 1]. Data-based utilities
//! compare predictions with observations (NMSE or Gaussian log-likelihood);
//! the decision-support utility compares each candidate's failure
//! probability with that of a designated oracle, draw by draw, on a log10
//! scale. The two are blended linearly with weights summing to one.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inference::{predict_demand, predict_point, ConvergenceReport, PosteriorDraws, TaskSpec};
use crate::prob::{normal_cdf, Distribution1D};
use crate::structural::ModelCandidate;
use crate::study::StrainSeries;
use crate::{Error, Result};

/// Lower bound applied to failure probabilities before taking log10.
pub const PF_FLOOR: f64 = 1e-16;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Yield-type limit state `g = r - s` with Gaussian capacity `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitState {
    pub capacity: Distribution1D,
}

impl Default for LimitState {
    fn default() -> Self {
        Self {
            capacity: Distribution1D::Normal { mu: 284.5, sigma: 21.5 },
        }
    }
}

impl LimitState {
    pub fn new(capacity: Distribution1D) -> Result<Self> {
        match capacity.validate()? {
            Distribution1D::Normal { .. } => Ok(Self { capacity }),
            other => Err(Error::Config(format!(
                "capacity must be Gaussian for the closed-form limit state, got {other:?}"
            ))),
        }
    }
}

/// `P[r - s < 0]` for deterministic demand `s` (MPa), floored at [`PF_FLOOR`].
pub fn failure_probability(demand: f64, ls: &LimitState) -> f64 {
    let Distribution1D::Normal { mu, sigma } = ls.capacity else {
        unreachable!("LimitState::new admits only Gaussian capacity");
    };
    normal_cdf((demand - mu) / sigma).max(PF_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmseVariant {
    /// `100 / (N var) * sqrt(SSE)`.
    #[default]
    Verbatim,
    /// `100 * SSE / (N var)`; a constant mean predictor scores exactly 100.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataAttribute {
    Nmse,
    #[default]
    Loglik,
}

fn check_lengths(obs: &[f64], pred: &[f64]) -> Result<()> {
    if obs.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: pred.len(),
        });
    }
    Ok(())
}

/// Normalized mean square error of `pred` against `obs` (population variance
/// of `obs` in the denominator).
pub fn nmse(obs: &[f64], pred: &[f64], variant: NmseVariant) -> Result<f64> {
    check_lengths(obs, pred)?;
    let n = obs.len();
    if n < 2 {
        return Err(Error::Data(format!("NMSE needs >= 2 observations, got {n}")));
    }
    let mean = obs.iter().sum::<f64>() / n as f64;
    let var = obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::Data("observations have zero variance".into()));
    }
    let sse: f64 = obs.iter().zip(pred).map(|(o, p)| (o - p).powi(2)).sum();
    Ok(match variant {
        NmseVariant::Verbatim => 100.0 / (n as f64 * var) * sse.sqrt(),
        NmseVariant::Squared => 100.0 * sse / (n as f64 * var),
    })
}

pub fn u_nmse(nmse_value: f64) -> f64 {
    (1.0 - nmse_value / 100.0).clamp(0.0, 1.0)
}

/// Sum of Gaussian log-densities of the residuals with common σ.
pub fn loglik_attr(obs: &[f64], pred: &[f64], sigma: f64) -> Result<f64> {
    check_lengths(obs, pred)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    let inv = 1.0 / (sigma * sigma);
    let norm = -HALF_LN_TWO_PI - sigma.ln();
    Ok(obs
        .iter()
        .zip(pred)
        .map(|(o, p)| norm - 0.5 * (o - p).powi(2) * inv)
        .sum())
}

/// `1 - |a - b| / max(|a|, |b|)`, clamped to [0, 1]; 1 when both are zero.
fn relative_agreement(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom == 0.0 {
        return 1.0;
    }
    if !denom.is_finite() {
        return if a == b { 1.0 } else { 0.0 };
    }
    (1.0 - (a - b).abs() / denom).clamp(0.0, 1.0)
}

/// Log-likelihood utility of a draw relative to the reference value obtained
/// at the MAP draw with the observed standard deviation.
pub fn u_lik(l_draw: f64, l_ref: f64) -> f64 {
    relative_agreement(l_draw, l_ref)
}

/// Failure-probability utility of a candidate relative to the oracle, on a
/// log10 scale. Symmetric in its arguments.
pub fn u_pf(pf_oracle: f64, pf_cand: f64) -> f64 {
    relative_agreement(pf_oracle.max(PF_FLOOR).log10(), pf_cand.max(PF_FLOOR).log10())
}

/// Monte Carlo mean of per-draw utilities.
pub fn expected_utility(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Data("no utility values to average".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self { w1: 0.5, w2: 0.5 }
    }
}

impl UtilityWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        Self { w1, w2 }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&self.w1)
            && (0.0..=1.0).contains(&self.w2)
            && (self.w1 + self.w2 - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(Error::Config(format!(
                "weights must lie in [0, 1] and sum to 1, got ({}, {})",
                self.w1, self.w2
            )));
        }
        Ok(self)
    }
}

pub fn unified_utility(u_data: f64, u_pf: f64, w: &UtilityWeights) -> f64 {
    (w.w1 * u_data + w.w2 * u_pf).clamp(0.0, 1.0)
}

/// One candidate's posterior as handed to [`assess_candidates`].
#[derive(Debug, Clone, Copy)]
pub struct CandidatePosterior<'a> {
    pub candidate: &'a ModelCandidate,
    pub posterior: &'a PosteriorDraws,
    pub convergence: &'a ConvergenceReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSettings {
    pub weights: UtilityWeights,
    pub data_attribute: DataAttribute,
    pub nmse_variant: NmseVariant,
    pub limit_state: LimitState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateUtility {
    pub id: String,
    pub u_nmse: f64,
    pub u_lik: f64,
    pub u_pf: f64,
    pub u_unified: f64,
    pub n_pos: usize,
    pub clamped_draws: usize,
}

impl CandidateUtility {
    pub fn u_data(&self, attr: DataAttribute) -> f64 {
        match attr {
            DataAttribute::Nmse => self.u_nmse,
            DataAttribute::Loglik => self.u_lik,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub task: String,
    pub oracle: String,
    pub weights: UtilityWeights,
    pub data_attribute: DataAttribute,
    pub nmse_variant: NmseVariant,
    pub sigma_obs: f64,
    /// Time at which failure probabilities were evaluated (prognosis only).
    pub pf_time: Option<f64>,
    pub candidates: Vec<CandidateUtility>,
}

impl UtilityReport {
    pub fn candidate(&self, id: &str) -> Option<&CandidateUtility> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("id,u_nmse,u_lik,u_pf,u_unified,n_pos,clamped_draws\n");
        for c in &self.candidates {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.id, c.u_nmse, c.u_lik, c.u_pf, c.u_unified, c.n_pos, c.clamped_draws
            ));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

struct DrawOutcome {
    u_nmse: f64,
    u_lik: f64,
    pf: f64,
    clamped: bool,
}

fn predictions(task: &TaskSpec, c: &ModelCandidate, theta_model: &[f64], times: &[f64]) -> Result<(Vec<f64>, bool)> {
    let mut out = Vec::with_capacity(times.len());
    let mut clamped = false;
    for &t in times {
        let p = predict_point(task, c, theta_model, t)?
            .ok_or_else(|| Error::Domain(format!("{}: prediction undefined at t = {t}", c.id)))?;
        clamped |= p.clamped;
        out.push(p.strain);
    }
    Ok((out, clamped))
}

fn evaluate_draw(
    task: &TaskSpec,
    c: &ModelCandidate,
    row: &[f64],
    eval: &StrainSeries,
    l_ref: f64,
    pf_time: f64,
    settings: &AssessmentSettings,
) -> Result<DrawOutcome> {
    let (model, sigma) = row.split_at(row.len() - 1);
    let (pred, clamped) = predictions(task, c, model, eval.times())?;
    let obs = eval.strains();
    let u_n = u_nmse(nmse(obs, &pred, settings.nmse_variant)?);
    let l_draw = loglik_attr(obs, &pred, sigma[0]).unwrap_or(f64::NEG_INFINITY);
    let (demand, demand_clamped) = predict_demand(task, c, model, pf_time)?;
    Ok(DrawOutcome {
        u_nmse: u_n,
        u_lik: u_lik(l_draw, l_ref),
        pf: failure_probability(demand, &settings.limit_state),
        clamped: clamped || demand_clamped,
    })
}

/// Scores every candidate against the single oracle in `inputs`.
///
/// Each posterior draw is pushed through the candidate's model chain on the
/// evaluation series; draw `i` of a candidate is paired with draw
/// `i mod n_oracle` of the oracle for the failure-probability utility.
/// Refuses to run when any posterior failed its convergence gate.
pub fn assess_candidates(
    task: &TaskSpec,
    inputs: &[CandidatePosterior<'_>],
    eval: &StrainSeries,
    settings: &AssessmentSettings,
) -> Result<UtilityReport> {
    settings.weights.validated()?;
    let oracles: Vec<_> = inputs.iter().filter(|i| i.candidate.is_oracle).collect();
    let oracle = match oracles.as_slice() {
        [one] => **one,
        [] => return Err(Error::Config("no oracle among the assessed candidates".into())),
        _ => {
            return Err(Error::Config(
                "more than one oracle among the assessed candidates".into(),
            ))
        }
    };
    let failed: Vec<String> = inputs
        .iter()
        .filter(|i| !i.convergence.pass)
        .map(|i| format!("{} ({})", i.candidate.id, i.convergence.describe_failures()))
        .collect();
    if !failed.is_empty() {
        return Err(Error::ConvergenceGate(format!(
            "refusing to assess unconverged posteriors: {}",
            failed.join("; ")
        )));
    }
    if eval.len() < 2 {
        return Err(Error::Data(format!("evaluation series has {} points", eval.len())));
    }
    let (_, sigma_obs) = eval.strain_moments();
    if !(sigma_obs > 0.0) {
        return Err(Error::Data("evaluation observations have zero variance".into()));
    }
    let pf_time = eval.last_time().unwrap_or(0.0);

    let per_draw = |inp: &CandidatePosterior<'_>| -> Result<Vec<DrawOutcome>> {
        let map = inp.posterior.map_estimate()?;
        let (map_pred, _) = predictions(task, inp.candidate, &map[..map.len() - 1], eval.times())?;
        let l_ref = loglik_attr(eval.strains(), &map_pred, sigma_obs)?;
        inp.posterior
            .draws
            .par_iter()
            .map(|row| evaluate_draw(task, inp.candidate, row, eval, l_ref, pf_time, settings))
            .collect()
    };

    let oracle_pf: Vec<f64> = per_draw(&oracle)?.into_iter().map(|d| d.pf).collect();
    if oracle_pf.is_empty() {
        return Err(Error::Data("oracle posterior is empty".into()));
    }

    let mut rows = Vec::with_capacity(inputs.len());
    for inp in inputs {
        let outcomes = per_draw(inp)?;
        let n = outcomes.len();
        let nm: Vec<f64> = outcomes.iter().map(|d| d.u_nmse).collect();
        let lk: Vec<f64> = outcomes.iter().map(|d| d.u_lik).collect();
        let pf: Vec<f64> = outcomes
            .iter()
            .enumerate()
            .map(|(i, d)| u_pf(oracle_pf[i % oracle_pf.len()], d.pf))
            .collect();
        let mut row = CandidateUtility {
            id: inp.candidate.id.clone(),
            u_nmse: expected_utility(&nm)?,
            u_lik: expected_utility(&lk)?,
            u_pf: expected_utility(&pf)?,
            u_unified: 0.0,
            n_pos: n,
            clamped_draws: outcomes.iter().filter(|d| d.clamped).count(),
        };
        row.u_unified = unified_utility(row.u_data(settings.data_attribute), row.u_pf, &settings.weights);
        rows.push(row);
    }

    Ok(UtilityReport {
        task: task.name(),
        oracle: oracle.candidate.id.clone(),
        weights: settings.weights,
        data_attribute: settings.data_attribute,
        nmse_variant: settings.nmse_variant,
        sigma_obs,
        pf_time: matches!(task, TaskSpec::Prognosis(_)).then_some(pf_time),
        candidates: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::ParamRhat;
    use crate::prob::RngStream;
    use crate::structural::{Geometry, ObservationModel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn failure_probability_reference_values() {
        let ls = LimitState::default();
        assert_abs_diff_eq!(failure_probability(284.5, &ls), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(failure_probability(263.0, &ls), 0.158655, epsilon = 1e-6);
        assert_abs_diff_eq!(failure_probability(327.5, &ls), 0.977250, epsilon = 1e-6);
        assert_eq!(failure_probability(0.0, &ls), PF_FLOOR);
        let mut prev = 0.0;
        for i in 0..600 {
            let p = failure_probability(i as f64, &ls);
            assert!(p >= prev);
            prev = p;
        }
        assert!(LimitState::new(Distribution1D::uniform(0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn failure_probability_matches_monte_carlo() {
        let ls = LimitState::default();
        let mut rng = RngStream::new(77, 0);
        let n = 1_000_000;
        let yields: Vec<f64> = (0..n).map(|_| ls.capacity.sample(&mut rng)).collect();
        for demand in [235.0, 260.0, 284.5, 300.0, 330.0] {
            let p = failure_probability(demand, &ls);
            let mc = yields.iter().filter(|&&r| r < demand).count() as f64 / n as f64;
            let tol = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((p - mc).abs() <= tol, "demand {demand}: {p} vs {mc}");
        }
    }

    #[test]
    fn nmse_reference_values() {
        let obs = [0.0, 2.0];
        assert_eq!(nmse(&obs, &obs, NmseVariant::Verbatim).unwrap(), 0.0);
        assert_abs_diff_eq!(
            nmse(&obs, &[0.0, 0.0], NmseVariant::Verbatim).unwrap(),
            100.0,
            epsilon = 1e-12
        );
        assert!(nmse(&obs, &[0.0], NmseVariant::Verbatim).is_err());
        assert!(nmse(&[1.0, 1.0], &[0.0, 0.0], NmseVariant::Verbatim).is_err());
        // mean predictor gives exactly 100 under the squared form
        let obs = [1.0, 4.0, -2.0, 7.0];
        let mean = obs.iter().sum::<f64>() / 4.0;
        assert_abs_diff_eq!(
            nmse(&obs, &[mean; 4], NmseVariant::Squared).unwrap(),
            100.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn nmse_utility_clamps() {
        assert_eq!(u_nmse(0.0), 1.0);
        assert_eq!(u_nmse(100.0), 0.0);
        assert_eq!(u_nmse(150.0), 0.0);
    }

    #[test]
    fn loglik_reference_values() {
        assert_abs_diff_eq!(loglik_attr(&[3.0], &[3.0], 1.0).unwrap(), -0.9189385, epsilon = 1e-7);
        assert_abs_diff_eq!(
            loglik_attr(&[0.0; 10], &[0.0; 10], 1.0).unwrap(),
            -9.189385,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(loglik_attr(&[2.0], &[0.0], 1.0).unwrap(), -2.9189385, epsilon = 1e-7);
        assert!(loglik_attr(&[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn likelihood_utility_reference_values() {
        assert_eq!(u_lik(-42.0, -42.0), 1.0);
        assert_abs_diff_eq!(u_lik(-50.0, -100.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u_lik(-10000.0, -100.0), 0.01, epsilon = 1e-15);
        assert_eq!(u_lik(0.0, 0.0), 1.0);
        assert_eq!(u_lik(f64::NEG_INFINITY, -100.0), 0.0);
    }

    #[test]
    fn pf_utility_reference_values() {
        assert_eq!(u_pf(0.01, 0.01), 1.0);
        assert_abs_diff_eq!(u_pf(1e-4, 1e-2), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(u_pf(1e-6, 1e-3), 0.5, epsilon = 1e-12);
        assert_eq!(u_pf(1.0, 1.0), 1.0);
    }

    #[test]
    fn expected_and_unified() {
        assert_eq!(expected_utility(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(expected_utility(&[0.2, 0.4, 0.6]).unwrap(), 0.4, epsilon = 1e-15);
        assert_eq!(expected_utility(&[0.37]).unwrap(), 0.37);
        assert!(expected_utility(&[]).is_err());
        let w = UtilityWeights::new(1.0, 0.0).unwrap();
        assert_eq!(unified_utility(0.7, 0.1, &w), 0.7);
        let w = UtilityWeights::new(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(unified_utility(0.9, 0.5, &w), 0.7, epsilon = 1e-15);
        let w = UtilityWeights::new(0.0, 1.0).unwrap();
        assert_eq!(unified_utility(0.9, 0.3, &w), 0.3);
        assert!(UtilityWeights::new(0.6, 0.6).is_err());
        assert!(UtilityWeights::new(-0.1, 1.1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn utilities_stay_in_unit_interval(
            a in -1e6f64..0.0,
            b in -1e6f64..0.0,
            pa in 1e-300f64..=1.0,
            pb in 1e-300f64..=1.0,
            v in 0.0f64..1e4,
            ud in 0.0f64..=1.0,
            up in 0.0f64..=1.0,
            w1 in 0.0f64..=1.0,
        ) {
            let w = UtilityWeights { w1, w2: 1.0 - w1 };
            for u in [u_lik(a, b), u_pf(pa, pb), u_nmse(v), unified_utility(ud, up, &w)] {
                prop_assert!((0.0..=1.0).contains(&u));
            }
            prop_assert_eq!(u_pf(pa, pb), u_pf(pb, pa));
            prop_assert_eq!(u_pf(pa, pa), 1.0);
        }

        #[test]
        fn lik_utility_monotone_on_each_side(lref in -1e4f64..-1.0, d1 in 0.0f64..1e4, d2 in 0.0f64..1e4) {
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(u_lik(lref - near, lref) >= u_lik(lref - far, lref));
            let (near, far) = (near.min(-lref), far.min(-lref));
            prop_assert!(u_lik(lref + near, lref) >= u_lik(lref + far, lref));
        }

        #[test]
        fn unified_is_linear(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, w1 in 0.0f64..=1.0) {
            let w = UtilityWeights { w1, w2: 1.0 - w1 };
            let base = unified_utility(a, c, &w);
            prop_assert!((unified_utility(b, c, &w) - base - w.w1 * (b - a)).abs() < 1e-12);
            prop_assert!((unified_utility(a, b, &w) - base - w.w2 * (b - c)).abs() < 1e-12);
        }
    }

    fn diag_candidate(id: &str, model: ObservationModel, oracle: bool) -> ModelCandidate {
        let mut c = ModelCandidate::new(id, Geometry::default(), model, 1.4).unwrap();
        c.is_oracle = oracle;
        c.e_map = Some(200.0);
        c
    }

    fn passing() -> ConvergenceReport {
        ConvergenceReport {
            params: vec![ParamRhat {
                name: "dtau".into(),
                rhat: 1.0,
            }],
            n_chains: 1,
            n_draws: 3,
            threshold: 1.01,
            pass: true,
        }
    }

    fn eval_series(c: &ModelCandidate, dtau: f64, rng: &mut RngStream) -> StrainSeries {
        let times: Vec<f64> = (0..100).map(|i| 1100.0 + i as f64).collect();
        let base = c.predict_strain(200.0, dtau).unwrap();
        let strains = times.iter().map(|_| base + 2.0 * rng.standard_normal()).collect();
        StrainSeries::new(times, strains).unwrap()
    }

    fn draws(rows: Vec<Vec<f64>>) -> PosteriorDraws {
        let n = rows.len();
        PosteriorDraws::from_rows(vec!["dtau".into(), "sigma".into()], rows, vec![0.0; n]).unwrap()
    }

    #[test]
    fn oracle_alone_scores_perfect_pf_and_high_lik() {
        let oracle = diag_candidate(
            "M3",
            ObservationModel::Emulator {
                kappa_eps: 0.8,
                kappa_sig: 2.2,
            },
            true,
        );
        let data = eval_series(&oracle, 0.8, &mut RngStream::new(5, 0));
        let (_, sd) = data.strain_moments();
        let post = draws(vec![vec![0.8, sd], vec![0.8001, sd], vec![0.7999, sd]]);
        let conv = passing();
        let inputs = [CandidatePosterior {
            candidate: &oracle,
            posterior: &post,
            convergence: &conv,
        }];
        let r = assess_candidates(&TaskSpec::Diagnosis, &inputs, &data, &AssessmentSettings::default()).unwrap();
        let row = r.candidate("M3").unwrap();
        assert_eq!(row.u_pf, 1.0);
        assert!(row.u_lik >= 0.99, "{}", row.u_lik);
        assert_eq!(r.oracle, "M3");
    }

    #[test]
    fn identical_candidates_identical_rows_and_weight_collapse() {
        let oracle = diag_candidate(
            "M3",
            ObservationModel::Emulator {
                kappa_eps: 0.8,
                kappa_sig: 2.2,
            },
            true,
        );
        let a = diag_candidate("A", ObservationModel::Analytical, false);
        let b = diag_candidate("B", ObservationModel::Analytical, false);
        let data = eval_series(&oracle, 0.8, &mut RngStream::new(6, 0));
        let p_or = draws(vec![vec![0.8, 2.0], vec![0.81, 2.1]]);
        let p_c = draws(vec![vec![0.64, 2.0], vec![0.65, 2.2], vec![0.63, 1.9]]);
        let conv = passing();
        let inputs = [
            CandidatePosterior {
                candidate: &oracle,
                posterior: &p_or,
                convergence: &conv,
            },
            CandidatePosterior {
                candidate: &a,
                posterior: &p_c,
                convergence: &conv,
            },
            CandidatePosterior {
                candidate: &b,
                posterior: &p_c,
                convergence: &conv,
            },
        ];
        let mut settings = AssessmentSettings {
            weights: UtilityWeights::new(1.0, 0.0).unwrap(),
            ..Default::default()
        };
        let r = assess_candidates(&TaskSpec::Diagnosis, &inputs, &data, &settings).unwrap();
        let (ra, rb) = (r.candidate("A").unwrap(), r.candidate("B").unwrap());
        assert_eq!((ra.u_nmse, ra.u_lik, ra.u_pf), (rb.u_nmse, rb.u_lik, rb.u_pf));
        for c in &r.candidates {
            assert_eq!(c.u_unified, c.u_lik);
        }
        settings.data_attribute = DataAttribute::Nmse;
        let r = assess_candidates(&TaskSpec::Diagnosis, &inputs, &data, &settings).unwrap();
        for c in &r.candidates {
            assert_eq!(c.u_unified, c.u_nmse);
            assert!([c.u_nmse, c.u_lik, c.u_pf, c.u_unified]
                .iter()
                .all(|u| (0.0..=1.0).contains(u)));
        }
        assert_eq!(r.candidate("M3").unwrap().u_pf, 1.0);
    }

    #[test]
    fn refuses_without_oracle_or_convergence() {
        let a = diag_candidate("A", ObservationModel::Analytical, false);
        let data = eval_series(&a, 0.5, &mut RngStream::new(1, 0));
        let p = draws(vec![vec![0.5, 2.0]]);
        let conv = passing();
        let inputs = [CandidatePosterior {
            candidate: &a,
            posterior: &p,
            convergence: &conv,
        }];
        assert!(matches!(
            assess_candidates(&TaskSpec::Diagnosis, &inputs, &data, &AssessmentSettings::default()),
            Err(Error::Config(_))
        ));
        let o = diag_candidate("O", ObservationModel::Analytical, true);
        let mut bad = passing();
        bad.pass = false;
        bad.params[0].rhat = 1.2;
        let inputs = [CandidatePosterior {
            candidate: &o,
            posterior: &p,
            convergence: &bad,
        }];
        assert!(matches!(
            assess_candidates(&TaskSpec::Diagnosis, &inputs, &data, &AssessmentSettings::default()),
            Err(Error::ConvergenceGate(_))
        ));
    }
}
