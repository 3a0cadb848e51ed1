//! TOML study configuration. See `config/default.toml` for the annotated
//! schema; every table and key is optional and falls back to the defaults
//! below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assessment::{AssessmentSettings, DataAttribute, LimitState, NmseVariant, UtilityWeights};
use crate::deterioration::{logistic_dtau, powerlaw_dtau, DeteriorationModel, LogisticParams, PowerLawParams};
use crate::inference::SamplerSettings;
use crate::prob::Distribution1D;
use crate::structural::Geometry;
use crate::{Error, Result};

/// Ground-truth deterioration law of the synthetic record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TruthLaw {
    Logistic {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    #[serde(rename = "powerlaw")]
    PowerLaw {
        alpha: f64,
        beta: f64,
        t0: f64,
        dt_ts: f64,
    },
}

impl Default for TruthLaw {
    fn default() -> Self {
        TruthLaw::PowerLaw {
            alpha: 0.8,
            beta: 1.0,
            t0: 200.0,
            dt_ts: 900.0,
        }
    }
}

impl TruthLaw {
    pub fn dtau(&self, t: f64) -> Result<f64> {
        match *self {
            TruthLaw::Logistic { alpha, beta, gamma } => Ok(logistic_dtau(&LogisticParams { alpha, beta, gamma }, t)),
            TruthLaw::PowerLaw { alpha, beta, t0, dt_ts } => {
                powerlaw_dtau(&PowerLawParams { alpha, beta, t0, dt_ts }, t)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub e_gpa: f64,
    pub noise_sigma: f64,
    pub boundary1: f64,
    pub boundary2: f64,
    pub t_end: f64,
    pub dt: f64,
    pub kappa_eps: f64,
    pub kappa_sig: f64,
    pub deterioration: TruthLaw,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            e_gpa: 200.0,
            noise_sigma: 2.0,
            boundary1: 200.0,
            boundary2: 1100.0,
            t_end: 1300.0,
            dt: 1.0,
            kappa_eps: 0.8,
            kappa_sig: 2.2,
            deterioration: TruthLaw::default(),
        }
    }
}

impl TruthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("truth: {m}")));
        if !(0.0 < self.boundary1 && self.boundary1 < self.boundary2 && self.boundary2 <= self.t_end) {
            return bad(format!(
                "need 0 < boundary1 < boundary2 <= t_end, got {} / {} / {}",
                self.boundary1, self.boundary2, self.t_end
            ));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.e_gpa > 0.0) {
            return bad(format!("e_gpa must be > 0, got {}", self.e_gpa));
        }
        if !(self.kappa_eps > 0.0 && self.kappa_eps <= 1.0 && self.kappa_sig >= 1.0) {
            return bad("need 0 < kappa_eps <= 1 and kappa_sig >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub n_per_dim: usize,
    pub strain_degree: usize,
    pub demand_degree: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            n_per_dim: 6,
            strain_degree: 2,
            demand_degree: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssessmentConfig {
    pub oracle: String,
    pub w1: f64,
    pub w2: f64,
    pub data_attribute: DataAttribute,
    pub nmse_variant: NmseVariant,
    pub capacity_mu: f64,
    pub capacity_sd: f64,
    /// Pool all chains (true) or use chain 0 only.
    pub pooled: bool,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        Self {
            oracle: "M3".into(),
            w1: 0.5,
            w2: 0.5,
            data_attribute: DataAttribute::Loglik,
            nmse_variant: NmseVariant::Verbatim,
            capacity_mu: 284.5,
            capacity_sd: 21.5,
            pooled: true,
        }
    }
}

impl AssessmentConfig {
    pub fn settings(&self) -> Result<AssessmentSettings> {
        Ok(AssessmentSettings {
            weights: UtilityWeights::new(self.w1, self.w2)?,
            data_attribute: self.data_attribute,
            nmse_variant: self.nmse_variant,
            limit_state: LimitState::new(Distribution1D::normal(self.capacity_mu, self.capacity_sd)?)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrognosisConfig {
    pub t_start: f64,
    pub t_split: f64,
    pub t0: f64,
    pub dt_ts: f64,
    pub n_rep: usize,
    /// Train the oracle on every record from `t_start` on instead of the
    /// training window only.
    pub oracle_full_data: bool,
}

impl Default for PrognosisConfig {
    fn default() -> Self {
        Self {
            t_start: 200.0,
            t_split: 800.0,
            t0: 200.0,
            dt_ts: 900.0,
            n_rep: 1000,
            oracle_full_data: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Analytical,
    Emulator,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub id: String,
    pub kind: CandidateKind,
    pub dtau_max: f64,
    #[serde(default = "one")]
    pub kappa_eps: f64,
    #[serde(default = "one")]
    pub kappa_sig: f64,
}

fn one() -> f64 {
    1.0
}

fn default_candidates() -> Vec<CandidateConfig> {
    let c = |id: &str, kind, dtau_max, kappa_eps, kappa_sig| CandidateConfig {
        id: id.into(),
        kind,
        dtau_max,
        kappa_eps,
        kappa_sig,
    };
    vec![
        c("M1", CandidateKind::Analytical, 1.4, 1.0, 1.0),
        c("M2", CandidateKind::Surrogate, 1.0, 0.90, 1.6),
        c("M3", CandidateKind::Surrogate, 1.4, 0.80, 2.2),
        c("M4", CandidateKind::Surrogate, 1.0, 0.90, 1.3),
        c("M5", CandidateKind::Surrogate, 1.4, 0.80, 1.4),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Measured strain record; when unset the synthetic record written by
    /// `generate` to `<out_dir>/data.csv` is used.
    pub data: Option<PathBuf>,
    pub e_range: (f64, f64),
    pub geometry: Geometry,
    pub truth: TruthConfig,
    pub sampler: SamplerSettings,
    pub surrogate: SurrogateConfig,
    pub assessment: AssessmentConfig,
    pub prognosis: PrognosisConfig,
    pub candidates: Vec<CandidateConfig>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_917,
            out_dir: PathBuf::from("out"),
            data: None,
            e_range: (170.0, 238.0),
            geometry: Geometry::default(),
            truth: TruthConfig::default(),
            sampler: SamplerSettings::default(),
            surrogate: SurrogateConfig::default(),
            assessment: AssessmentConfig::default(),
            prognosis: PrognosisConfig::default(),
            candidates: default_candidates(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative `data` and `out_dir`
    /// paths are kept as written (resolved against the working directory).
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.truth.validate()?;
        self.sampler.validate()?;
        self.assessment.settings()?;
        if !(self.e_range.0 < self.e_range.1) {
            return Err(Error::Config(format!(
                "e_range must be increasing, got {:?}",
                self.e_range
            )));
        }
        let s = &self.surrogate;
        if s.n_per_dim < 2 || s.strain_degree == 0 || s.demand_degree == 0 {
            return Err(Error::Config("surrogate: need n_per_dim >= 2 and degrees >= 1".into()));
        }
        let p = &self.prognosis;
        if !(p.t_start < p.t_split) || !(p.dt_ts > 0.0) || p.t0 < 0.0 || p.n_rep < 100 {
            return Err(Error::Config(
                "prognosis: need t_start < t_split, dt_ts > 0, t0 >= 0 and n_rep >= 100".into(),
            ));
        }
        if self.candidates.is_empty() {
            return Err(Error::Config("candidate pool is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Config(format!("duplicate candidate id `{}`", c.id)));
            }
            if !(c.kappa_eps > 0.0 && c.kappa_eps <= 1.0 && c.kappa_sig >= 1.0 && c.dtau_max > 0.0) {
                return Err(Error::Config(format!(
                    "candidate {}: need 0 < kappa_eps <= 1, kappa_sig >= 1, dtau_max > 0",
                    c.id
                )));
            }
        }
        if !seen.contains(self.assessment.oracle.as_str()) {
            return Err(Error::Config(format!(
                "oracle `{}` is not in the candidate pool",
                self.assessment.oracle
            )));
        }
        if let Some(d) = &self.data {
            if !d.exists() {
                return Err(Error::Config(format!("data file {} does not exist", d.display())));
            }
        }
        Ok(())
    }

    pub fn data_path(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.out_dir.join("data.csv"))
    }

    pub fn prognosis_models(&self) -> [DeteriorationModel; 2] {
        let (t0, dt_ts) = (self.prognosis.t0, self.prognosis.dt_ts);
        [DeteriorationModel::Logistic, DeteriorationModel::PowerLaw { t0, dt_ts }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = StudyConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, StudyConfig::default());
        assert_eq!(cfg.candidates.len(), 5);
        assert_eq!(cfg.assessment.oracle, "M3");
        assert_eq!(cfg.prognosis.t_split, 800.0);
        assert_eq!((cfg.truth.boundary1, cfg.truth.boundary2), (200.0, 1100.0));
    }

    #[test]
    fn default_truth_reaches_target_loss_at_phase_end() {
        let t = TruthConfig::default();
        assert!((t.deterioration.dtau(t.boundary2).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn shipped_config_parses_to_defaults() {
        let text = include_str!("../../config/default.toml");
        assert_eq!(StudyConfig::from_toml_str(text).unwrap(), StudyConfig::default());
    }

    #[test]
    fn rejects_bad_documents() {
        for doc in [
            "bogus = 1",
            "[assessment]\noracle = \"M9\"",
            "[assessment]\nw1 = 0.7\nw2 = 0.7",
            "[truth]\nboundary1 = 1200.0",
            "[sampler]\nn_chains = 1",
            "[[candidates]]\nid = \"A\"\nkind = \"shell\"\ndtau_max = 1.0",
            "data = \"/nonexistent/strain.csv\"",
        ] {
            assert!(
                matches!(StudyConfig::from_toml_str(doc), Err(Error::Config(_))),
                "{doc}"
            );
        }
    }

    #[test]
    fn candidate_overrides() {
        let doc = r#"
            [assessment]
            oracle = "X"
            [[candidates]]
            id = "X"
            kind = "emulator"
            dtau_max = 1.2
            kappa_eps = 0.7
        "#;
        let cfg = StudyConfig::from_toml_str(doc).unwrap();
        assert_eq!(cfg.candidates.len(), 1);
        assert_eq!(cfg.candidates[0].kappa_sig, 1.0);
        assert_eq!(cfg.candidates[0].kind, CandidateKind::Emulator);
    }
}
