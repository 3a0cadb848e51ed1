//! End-to-end study: synthetic record, surrogates, the three inference tasks,
//! assessment and the summary report. Commands hand off through files under
//! the output directory:
//!
//! ```text
//! data.csv
//! surrogates/<id>.json
//! sysid/{<id>_posterior.csv, convergence.json, e_map.json, e_map.csv}
//! diagnosis/{<id>_posterior.csv, convergence.json}
//! prognosis-<law>/{<id>_posterior.csv, <id>_bands.csv, convergence.json, predictive.json}
//! <task>/{utility.json, utility.csv}
//! report.json
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assessment::{assess_candidates, CandidatePosterior, UtilityReport};
use crate::inference::{posterior_predictive, run_mcmc, ConvergenceReport, LogPosterior, PosteriorDraws, TaskSpec};
use crate::prob::RngStream;
use crate::structural::{
    doe_grid, emulator_strain, emulator_vm_stress, fit_surrogate, ModelCandidate, ObservationModel, PolySurrogate,
};
use crate::study::config::{CandidateKind, StudyConfig};
use crate::study::synthetic::generate_synthetic;
use crate::study::{split_phases, split_train_forecast, StrainSeries};
use crate::{Error, Result};

/// Strain and demand surrogates of one candidate, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePair {
    pub id: String,
    pub strain: PolySurrogate,
    pub demand: PolySurrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConvergence {
    pub id: String,
    pub acceptance_rate: Vec<f64>,
    pub report: ConvergenceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub id: String,
    pub e_map: f64,
    pub sigma_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub id: String,
    pub coverage: f64,
    pub n_forecast: usize,
    pub clamped_replicates: usize,
}

/// Everything the `report` command gathers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub e_map: Vec<MapEntry>,
    pub convergence: Vec<TaskConvergence>,
    pub predictive: Vec<TaskPredictive>,
    pub utilities: Vec<UtilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConvergence {
    pub task: String,
    pub candidates: Vec<CandidateConvergence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPredictive {
    pub task: String,
    pub candidates: Vec<PredictiveSummary>,
}

/// 64-bit FNV-1a of `tag` folded into `base`, then one splitmix64 round.
fn derive_seed(base: u64, tag: &str, index: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes().chain((index as u64).to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, command: &str) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingPrerequisite {
            what: path.display().to_string(),
            command: command.into(),
        });
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Which posteriors an `assess` invocation scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssessTarget {
    SysId,
    Diagnosis,
    /// Both deterioration laws.
    Prognosis,
}

impl std::str::FromStr for AssessTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sysid" => Ok(Self::SysId),
            "diagnosis" | "diagnose" => Ok(Self::Diagnosis),
            "prognosis" | "prognose" => Ok(Self::Prognosis),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (expected sysid, diagnosis or prognosis)"
            ))),
        }
    }
}

pub struct Study {
    cfg: StudyConfig,
}

impl Study {
    pub fn new(cfg: StudyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.cfg.out_dir.join(name);
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn task_dir(task: &TaskSpec) -> String {
        task.name()
    }

    fn tasks(&self, target: AssessTarget) -> Vec<TaskSpec> {
        match target {
            AssessTarget::SysId => vec![TaskSpec::SysId],
            AssessTarget::Diagnosis => vec![TaskSpec::Diagnosis],
            AssessTarget::Prognosis => self
                .cfg
                .prognosis_models()
                .into_iter()
                .map(TaskSpec::Prognosis)
                .collect(),
        }
    }

    /// Writes the synthetic record to `<out>/data.csv`.
    pub fn generate(&self) -> Result<StrainSeries> {
        let mut rng = RngStream::new(derive_seed(self.cfg.seed, "generate", 0), 0);
        let s = generate_synthetic(&self.cfg.geometry, &self.cfg.truth, &mut rng)?;
        std::fs::create_dir_all(&self.cfg.out_dir)?;
        StrainSeries::new(s.times().to_vec(), s.strains().to_vec())?.write_csv(&self.cfg.out_dir.join("data.csv"))?;
        Ok(s)
    }

    pub fn load_data(&self) -> Result<StrainSeries> {
        let path = self.cfg.data_path();
        if !path.exists() {
            return Err(Error::MissingPrerequisite {
                what: path.display().to_string(),
                command: "generate".into(),
            });
        }
        StrainSeries::load_csv(&path)
    }

    /// Fits strain and demand surrogates of every surrogate candidate to its
    /// emulator on a full-factorial design.
    pub fn fit_surrogates(&self) -> Result<Vec<SurrogatePair>> {
        let dir = self.dir("surrogates")?;
        let g = &self.cfg.geometry;
        let sc = &self.cfg.surrogate;
        let mut out = Vec::new();
        for c in self
            .cfg
            .candidates
            .iter()
            .filter(|c| c.kind == CandidateKind::Surrogate)
        {
            let grid = doe_grid(self.cfg.e_range, (0.0, c.dtau_max), sc.n_per_dim)?;
            let strain_pts = grid
                .iter()
                .map(|&(e, d)| Ok(((e, d), emulator_strain(g, c.kappa_eps, e, d)?)))
                .collect::<Result<Vec<_>>>()?;
            let demand_pts = grid
                .iter()
                .map(|&(e, d)| Ok(((e, d), emulator_vm_stress(g, c.kappa_sig, d)?)))
                .collect::<Result<Vec<_>>>()?;
            let pair = SurrogatePair {
                id: c.id.clone(),
                strain: fit_surrogate(&strain_pts, sc.strain_degree)?,
                demand: fit_surrogate(&demand_pts, sc.demand_degree)?,
            };
            write_json(&dir.join(format!("{}.json", c.id)), &pair)?;
            out.push(pair);
        }
        Ok(out)
    }

    /// Builds the candidate pool; `e_map` is filled from the sysid MAP table
    /// when `with_e_map` is set.
    pub fn candidates(&self, with_e_map: bool) -> Result<Vec<ModelCandidate>> {
        let maps: Vec<MapEntry> = if with_e_map {
            read_json(&self.cfg.out_dir.join("sysid").join("e_map.json"), "sysid")?
        } else {
            Vec::new()
        };
        let mut out = Vec::with_capacity(self.cfg.candidates.len());
        for cc in &self.cfg.candidates {
            let model = match cc.kind {
                CandidateKind::Analytical => ObservationModel::Analytical,
                CandidateKind::Emulator => ObservationModel::Emulator {
                    kappa_eps: cc.kappa_eps,
                    kappa_sig: cc.kappa_sig,
                },
                CandidateKind::Surrogate => {
                    let path = self.cfg.out_dir.join("surrogates").join(format!("{}.json", cc.id));
                    let pair: SurrogatePair = read_json(&path, "fit-surrogate")?;
                    ObservationModel::Surrogate {
                        strain: pair.strain,
                        demand: pair.demand,
                    }
                }
            };
            let mut c = ModelCandidate::new(cc.id.clone(), self.cfg.geometry, model, cc.dtau_max)?;
            c.e_range = self.cfg.e_range;
            c.is_oracle = cc.id == self.cfg.assessment.oracle;
            if with_e_map {
                let entry = maps
                    .iter()
                    .find(|m| m.id == cc.id)
                    .ok_or_else(|| Error::MissingPrerequisite {
                        what: format!("MAP modulus of {}", cc.id),
                        command: "sysid".into(),
                    })?;
                c.e_map = Some(entry.e_map);
            }
            c.validate()?;
            out.push(c);
        }
        Ok(out)
    }

    fn phases(&self, data: &StrainSeries) -> Result<(StrainSeries, StrainSeries, StrainSeries)> {
        split_phases(data, self.cfg.truth.boundary1, self.cfg.truth.boundary2)
    }

    /// Training record for `task`; the oracle gets the full post-initiation
    /// record in prognosis when configured so.
    fn training_data(&self, task: &TaskSpec, c: &ModelCandidate, data: &StrainSeries) -> Result<StrainSeries> {
        let non_empty = |s: StrainSeries, what: &str| {
            if s.len() < 2 {
                Err(Error::Data(format!("{what} has {} observations", s.len())))
            } else {
                Ok(s)
            }
        };
        match task {
            TaskSpec::SysId => non_empty(self.phases(data)?.0, "phase 1"),
            TaskSpec::Diagnosis => non_empty(self.phases(data)?.2, "phase 3"),
            TaskSpec::Prognosis(_) => {
                let p = &self.cfg.prognosis;
                if c.is_oracle && p.oracle_full_data {
                    non_empty(data.filter(|t| t >= p.t_start), "post-initiation record")
                } else {
                    non_empty(split_train_forecast(data, p.t_start, p.t_split)?.0, "training window")
                }
            }
        }
    }

    /// Records the utilities are computed on.
    fn evaluation_data(&self, task: &TaskSpec, data: &StrainSeries) -> Result<StrainSeries> {
        match task {
            TaskSpec::SysId => Ok(self.phases(data)?.0),
            TaskSpec::Diagnosis => Ok(self.phases(data)?.2),
            TaskSpec::Prognosis(_) => {
                let p = &self.cfg.prognosis;
                Ok(split_train_forecast(data, p.t_start, p.t_split)?.1)
            }
        }
    }

    fn sample(
        &self,
        task: &TaskSpec,
        candidates: &[ModelCandidate],
        data: &StrainSeries,
    ) -> Result<Vec<(PosteriorDraws, CandidateConvergence)>> {
        let dir = self.dir(&Self::task_dir(task))?;
        let mut out = Vec::with_capacity(candidates.len());
        for (k, c) in candidates.iter().enumerate() {
            let train = self.training_data(task, c, data)?;
            let target = LogPosterior::new(*task, c, &train)?;
            let seed = derive_seed(self.cfg.seed, &task.name(), k);
            let (post, report) = run_mcmc(&|th: &[f64]| target.eval(th), target.space(), &self.cfg.sampler, seed)?;
            post.write_csv(&dir.join(format!("{}_posterior.csv", c.id)))?;
            let acceptance_rate = post
                .record
                .as_ref()
                .map(|r| r.acceptance_rate.clone())
                .unwrap_or_default();
            out.push((
                post,
                CandidateConvergence {
                    id: c.id.clone(),
                    acceptance_rate,
                    report,
                },
            ));
        }
        let conv: Vec<_> = out.iter().map(|(_, c)| c.clone()).collect();
        write_json(&dir.join("convergence.json"), &conv)?;
        Ok(out)
    }

    fn gate(task: &TaskSpec, conv: &[CandidateConvergence]) -> Result<()> {
        let failed: Vec<String> = conv
            .iter()
            .filter(|c| !c.report.pass)
            .map(|c| format!("{} ({})", c.id, c.report.describe_failures()))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::ConvergenceGate(format!(
                "{}: {}",
                task.name(),
                failed.join("; ")
            )))
        }
    }

    /// Samples the system-identification posterior of every candidate and
    /// writes the MAP table used downstream.
    pub fn sysid(&self) -> Result<Vec<CandidateConvergence>> {
        let data = self.load_data()?;
        let candidates = self.candidates(false)?;
        let task = TaskSpec::SysId;
        let runs = self.sample(&task, &candidates, &data)?;
        let conv: Vec<_> = runs.iter().map(|(_, c)| c.clone()).collect();
        Self::gate(&task, &conv)?;
        let mut maps = Vec::with_capacity(runs.len());
        for (c, (post, _)) in candidates.iter().zip(&runs) {
            let m = post.map_estimate()?;
            maps.push(MapEntry {
                id: c.id.clone(),
                e_map: m[0],
                sigma_map: m[1],
            });
        }
        let dir = self.dir("sysid")?;
        write_json(&dir.join("e_map.json"), &maps)?;
        let mut csv = String::from("id,e_map_gpa,sigma_map_microeps\n");
        for m in &maps {
            csv.push_str(&format!("{},{},{}\n", m.id, m.e_map, m.sigma_map));
        }
        std::fs::write(dir.join("e_map.csv"), csv)?;
        Ok(conv)
    }

    pub fn diagnose(&self) -> Result<Vec<CandidateConvergence>> {
        let data = self.load_data()?;
        let candidates = self.candidates(true)?;
        let task = TaskSpec::Diagnosis;
        let conv: Vec<_> = self
            .sample(&task, &candidates, &data)?
            .into_iter()
            .map(|(_, c)| c)
            .collect();
        Self::gate(&task, &conv)?;
        Ok(conv)
    }

    /// Samples both deterioration laws for every candidate and writes
    /// posterior predictive bands over the forecast window.
    pub fn prognose(&self) -> Result<Vec<TaskConvergence>> {
        let data = self.load_data()?;
        let candidates = self.candidates(true)?;
        let p = self.cfg.prognosis;
        let (_, forecast) = split_train_forecast(&data, p.t_start, p.t_split)?;
        let mut all = Vec::new();
        let mut gate_err = None;
        for task in self.tasks(AssessTarget::Prognosis) {
            let runs = self.sample(&task, &candidates, &data)?;
            let dir = self.dir(&Self::task_dir(&task))?;
            let mut summaries = Vec::with_capacity(runs.len());
            for (k, (c, (post, _))) in candidates.iter().zip(&runs).enumerate() {
                let mut rng = RngStream::new(derive_seed(self.cfg.seed, &format!("{}-predictive", task.name()), k), 0);
                let pp = posterior_predictive(&task, c, post, forecast.times(), p.n_rep, &mut rng)?;
                pp.write_csv(&dir.join(format!("{}_bands.csv", c.id)))?;
                summaries.push(PredictiveSummary {
                    id: c.id.clone(),
                    coverage: pp.coverage(forecast.strains()),
                    n_forecast: forecast.len(),
                    clamped_replicates: pp.clamped_replicates,
                });
            }
            write_json(&dir.join("predictive.json"), &summaries)?;
            let conv: Vec<_> = runs.into_iter().map(|(_, c)| c).collect();
            if let Err(e) = Self::gate(&task, &conv) {
                gate_err.get_or_insert(e);
            }
            all.push(TaskConvergence {
                task: task.name(),
                candidates: conv,
            });
        }
        match gate_err {
            Some(e) => Err(e),
            None => Ok(all),
        }
    }

    /// Scores the stored posteriors of `target` and writes utility reports.
    pub fn assess(&self, target: AssessTarget) -> Result<Vec<UtilityReport>> {
        let data = self.load_data()?;
        let with_e_map = target != AssessTarget::SysId;
        let candidates = self.candidates(with_e_map)?;
        let settings = self.cfg.assessment.settings()?;
        let mut reports = Vec::new();
        for task in self.tasks(target) {
            let command = match task {
                TaskSpec::SysId => "sysid",
                TaskSpec::Diagnosis => "diagnose",
                TaskSpec::Prognosis(_) => "prognose",
            };
            let dir = self.cfg.out_dir.join(Self::task_dir(&task));
            let conv: Vec<CandidateConvergence> = read_json(&dir.join("convergence.json"), command)?;
            let mut posts = Vec::with_capacity(candidates.len());
            for c in &candidates {
                let path = dir.join(format!("{}_posterior.csv", c.id));
                if !path.exists() {
                    return Err(Error::MissingPrerequisite {
                        what: path.display().to_string(),
                        command: command.into(),
                    });
                }
                let post = PosteriorDraws::read_csv(&path)?;
                posts.push(if self.cfg.assessment.pooled {
                    post
                } else {
                    post.single_chain(0)?
                });
            }
            let mut inputs = Vec::with_capacity(candidates.len());
            for (c, post) in candidates.iter().zip(&posts) {
                let cc = conv
                    .iter()
                    .find(|x| x.id == c.id)
                    .ok_or_else(|| Error::MissingPrerequisite {
                        what: format!("convergence report of {}", c.id),
                        command: command.into(),
                    })?;
                inputs.push(CandidatePosterior {
                    candidate: c,
                    posterior: post,
                    convergence: &cc.report,
                });
            }
            let eval = self.evaluation_data(&task, &data)?;
            let report = assess_candidates(&task, &inputs, &eval, &settings)?;
            report.write_json(&dir.join("utility.json"))?;
            report.write_csv(&dir.join("utility.csv"))?;
            reports.push(report);
        }
        Ok(reports)
    }

    /// Collects every artifact present into `<out>/report.json`.
    pub fn report(&self) -> Result<StudyReport> {
        let out = &self.cfg.out_dir;
        let e_map = read_json(&out.join("sysid").join("e_map.json"), "sysid")?;
        let mut tasks = vec![TaskSpec::SysId, TaskSpec::Diagnosis];
        tasks.extend(self.tasks(AssessTarget::Prognosis));
        let (mut convergence, mut predictive, mut utilities) = (Vec::new(), Vec::new(), Vec::new());
        for task in &tasks {
            let dir = out.join(Self::task_dir(task));
            let conv = dir.join("convergence.json");
            if conv.exists() {
                convergence.push(TaskConvergence {
                    task: task.name(),
                    candidates: read_json(&conv, "")?,
                });
            }
            let pred = dir.join("predictive.json");
            if pred.exists() {
                predictive.push(TaskPredictive {
                    task: task.name(),
                    candidates: read_json(&pred, "")?,
                });
            }
            let util = dir.join("utility.json");
            if util.exists() {
                utilities.push(read_json(&util, "")?);
            }
        }
        if utilities.is_empty() {
            return Err(Error::MissingPrerequisite {
                what: "utility reports".into(),
                command: "assess".into(),
            });
        }
        let report = StudyReport {
            seed: self.cfg.seed,
            e_map,
            convergence,
            predictive,
            utilities,
        };
        write_json(&out.join("report.json"), &report)?;
        Ok(report)
    }

    /// generate, fit-surrogate, sysid, diagnose, prognose, assess (all tasks), report.
    pub fn run_all(&self) -> Result<StudyReport> {
        if self.cfg.data.is_none() {
            self.generate()?;
        }
        self.fit_surrogates()?;
        self.sysid()?;
        self.diagnose()?;
        self.prognose()?;
        for t in [AssessTarget::SysId, AssessTarget::Diagnosis, AssessTarget::Prognosis] {
            self.assess(t)?;
        }
        self.report()
    }
}
