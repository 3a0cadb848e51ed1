//! Observation models for the three-point-bending specimen.
//!
//! Units are N, mm and MPa internally. Young's modulus crosses the public
//! surface in GPa and strain in microstrain.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const GPA_TO_MPA: f64 = 1000.0;
const MICRO: f64 = 1e6;

/// Specimen geometry and load. Only `l`, `l2`, `b1`, `tau` and `p` enter
/// the formulas; the rest describe the corroded patch and are carried for
/// completeness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Support span, mm.
    pub l: f64,
    pub l1: f64,
    /// Gauge-to-support distance, mm.
    pub l2: f64,
    pub l3: f64,
    /// Section breadth, mm.
    pub b1: f64,
    /// Corroded patch breadth, mm.
    pub b2: f64,
    /// Intact thickness, mm.
    pub tau: f64,
    /// Applied load, N. Negative is downward.
    pub p: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            l: 77.86,
            l1: 21.27,
            l2: 26.54,
            l3: 32.24,
            b1: 29.32,
            b2: 25.56,
            tau: 5.9,
            p: -1000.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("l", self.l),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("b1", self.b1),
            ("b2", self.b2),
            ("tau", self.tau),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("geometry.{name} must be > 0, got {v}")));
            }
        }
        if !(self.p.is_finite() && self.p != 0.0) {
            return Err(Error::Config("geometry.p must be nonzero".into()));
        }
        Ok(())
    }

    fn remaining_thickness(&self, effective_loss: f64) -> Result<f64> {
        if !(effective_loss >= 0.0) {
            return Err(Error::Domain(format!(
                "thickness loss must be >= 0, got {effective_loss}"
            )));
        }
        let t = self.tau - effective_loss;
        if t <= 0.0 {
            return Err(Error::SingularSection {
                dtau: effective_loss,
                tau: self.tau,
            });
        }
        Ok(t)
    }
}

/// Euler-Bernoulli gauge strain (microstrain) for uniform thickness loss.
pub fn beam_strain(g: &Geometry, e_gpa: f64, dtau: f64) -> Result<f64> {
    emulator_strain(g, 1.0, e_gpa, dtau)
}

/// Beam strain with the thickness loss scaled by `kappa_eps` in (0, 1].
/// `kappa_eps = 1` is [`beam_strain`].
pub fn emulator_strain(g: &Geometry, kappa_eps: f64, e_gpa: f64, dtau: f64) -> Result<f64> {
    if !(kappa_eps > 0.0 && kappa_eps <= 1.0) {
        return Err(Error::Domain(format!("kappa_eps must lie in (0, 1], got {kappa_eps}")));
    }
    if !(e_gpa > 0.0) {
        return Err(Error::Domain(format!("E must be > 0, got {e_gpa}")));
    }
    if !(dtau >= 0.0) {
        return Err(Error::Domain(format!("thickness loss must be >= 0, got {dtau}")));
    }
    let t = g.remaining_thickness(kappa_eps * dtau)?;
    Ok(3.0 * g.p * g.l2 / (t * t * g.b1 * e_gpa * GPA_TO_MPA) * MICRO)
}

/// Peak midspan bending stress (MPa) amplified by a stress-concentration
/// factor `kappa_sig >= 1`. Independent of E.
pub fn emulator_vm_stress(g: &Geometry, kappa_sig: f64, dtau: f64) -> Result<f64> {
    if !(kappa_sig >= 1.0) {
        return Err(Error::Domain(format!("kappa_sig must be >= 1, got {kappa_sig}")));
    }
    let t = g.remaining_thickness(dtau)?;
    Ok(kappa_sig * 3.0 * g.p.abs() * g.l / (2.0 * g.b1 * t * t))
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i == n - 1 { hi } else { lo + step * i as f64 })
}

/// Full-factorial design over `(E, dtau)`, E-major, corners included.
pub fn doe_grid(e_range: (f64, f64), dtau_range: (f64, f64), n_per_dim: usize) -> Result<Vec<(f64, f64)>> {
    if n_per_dim < 2 {
        return Err(Error::Domain(format!("n_per_dim must be >= 2, got {n_per_dim}")));
    }
    for (name, (lo, hi)) in [("E", e_range), ("dtau", dtau_range)] {
        if !(lo < hi) {
            return Err(Error::Domain(format!("degenerate {name} range [{lo}, {hi}]")));
        }
    }
    let mut pts = Vec::with_capacity(n_per_dim * n_per_dim);
    for e in linspace(e_range.0, e_range.1, n_per_dim) {
        for d in linspace(dtau_range.0, dtau_range.1, n_per_dim) {
            pts.push((e, d));
        }
    }
    Ok(pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateRanges {
    pub e_gpa: [f64; 2],
    pub dtau_mm: [f64; 2],
}

/// Bivariate polynomial response surface in (E, dtau).
///
/// Inputs are mapped affinely onto [-1, 1]² using `ranges` before the
/// monomial basis is applied. Coefficients follow graded-lex order: by total
/// degree, then by descending power of E, i.e. `1, u, v, u², uv, v², u³, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySurrogate {
    pub degree: usize,
    pub ranges: SurrogateRanges,
    pub coefficients: Vec<f64>,
    pub r2: f64,
}

pub fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

fn normalize(x: f64, [lo, hi]: [f64; 2]) -> f64 {
    (2.0 * x - (lo + hi)) / (hi - lo)
}

fn basis_row(degree: usize, u: f64, v: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut up = [1.0; 16];
    let mut vp = [1.0; 16];
    for k in 1..=degree {
        up[k] = up[k - 1] * u;
        vp[k] = vp[k - 1] * v;
    }
    for k in 0..=degree {
        for a in (0..=k).rev() {
            out.push(up[a] * vp[k - a]);
        }
    }
}

const MAX_DEGREE: usize = 15;

/// Least-squares fit of a degree-`degree` surrogate to `((E, dtau), y)` samples.
/// Input ranges are taken from the extent of the training points.
pub fn fit_surrogate(points: &[((f64, f64), f64)], degree: usize) -> Result<PolySurrogate> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::Domain(format!(
            "degree must be in 1..={MAX_DEGREE}, got {degree}"
        )));
    }
    let m = monomial_count(degree);
    if points.len() < m {
        return Err(Error::RankDeficient(format!(
            "{} points cannot determine {m} coefficients of a degree-{degree} surface",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|((e, d), y)| !(e.is_finite() && d.is_finite() && y.is_finite()))
    {
        return Err(Error::Data("non-finite training point".into()));
    }

    for (name, pick) in [("E", 0usize), ("dtau", 1usize)] {
        let mut vals: Vec<f64> = points
            .iter()
            .map(|((e, d), _)| if pick == 0 { *e } else { *d })
            .collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        if vals.len() < degree + 1 {
            return Err(Error::RankDeficient(format!(
                "dimension {name} has {} distinct values, degree {degree} needs {}",
                vals.len(),
                degree + 1
            )));
        }
    }

    let range_of = |pick: usize| {
        points
            .iter()
            .fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], ((e, d), _)| {
                let x = if pick == 0 { *e } else { *d };
                [lo.min(x), hi.max(x)]
            })
    };
    let ranges = SurrogateRanges {
        e_gpa: range_of(0),
        dtau_mm: range_of(1),
    };

    let n = points.len();
    let mut a = DMatrix::<f64>::zeros(n, m);
    let mut row = Vec::with_capacity(m);
    for (i, ((e, d), _)) in points.iter().enumerate() {
        basis_row(
            degree,
            normalize(*e, ranges.e_gpa),
            normalize(*d, ranges.dtau_mm),
            &mut row,
        );
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let y = DVector::from_iterator(n, points.iter().map(|(_, y)| *y));

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!(
            "condition number {:.3e} of the normalized design matrix",
            smax / smin
        )));
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;

    let fitted = &a * &coef;
    let mean = y.mean();
    let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(o, f)| (o - f).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|o| (o - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(PolySurrogate {
        degree,
        ranges,
        coefficients: coef.iter().copied().collect(),
        r2: r2.min(1.0),
    })
}

impl PolySurrogate {
    pub fn contains(&self, e_gpa: f64, dtau: f64) -> bool {
        let inside = |x: f64, [lo, hi]: [f64; 2]| {
            let slack = 1e-12 * (hi - lo);
            x >= lo - slack && x <= hi + slack
        };
        inside(e_gpa, self.ranges.e_gpa) && inside(dtau, self.ranges.dtau_mm)
    }

    /// Evaluates the surface. Inputs outside the trained box are an error.
    pub fn eval(&self, e_gpa: f64, dtau: f64) -> Result<f64> {
        if !self.contains(e_gpa, dtau) {
            return Err(Error::OutOfRange {
                e: e_gpa,
                dtau,
                e_lo: self.ranges.e_gpa[0],
                e_hi: self.ranges.e_gpa[1],
                d_lo: self.ranges.dtau_mm[0],
                d_hi: self.ranges.dtau_mm[1],
            });
        }
        let u = normalize(e_gpa, self.ranges.e_gpa);
        let v = normalize(dtau, self.ranges.dtau_mm);
        let mut up = [1.0; MAX_DEGREE + 1];
        let mut vp = [1.0; MAX_DEGREE + 1];
        for k in 1..=self.degree {
            up[k] = up[k - 1] * u;
            vp[k] = vp[k - 1] * v;
        }
        let mut acc = 0.0;
        let mut idx = 0;
        for k in 0..=self.degree {
            for a in (0..=k).rev() {
                acc += self.coefficients[idx] * up[a] * vp[k - a];
                idx += 1;
            }
        }
        Ok(acc)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if s.coefficients.len() != monomial_count(s.degree) {
            return Err(Error::Data(format!(
                "{}: {} coefficients for degree {}",
                path.display(),
                s.coefficients.len(),
                s.degree
            )));
        }
        Ok(s)
    }
}

pub fn surrogate_eval(s: &PolySurrogate, e_gpa: f64, dtau: f64) -> Result<f64> {
    s.eval(e_gpa, dtau)
}

/// How a candidate turns parameters into predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationModel {
    /// Closed-form beam strain; demand is the unamplified bending stress.
    Analytical,
    Emulator {
        kappa_eps: f64,
        kappa_sig: f64,
    },
    Surrogate {
        strain: PolySurrogate,
        demand: PolySurrogate,
    },
}

impl ObservationModel {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Analytical => "analytical",
            Self::Emulator { .. } => "emulator",
            Self::Surrogate { .. } => "surrogate",
        }
    }
}

/// One candidate observation model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCandidate {
    pub id: String,
    pub geometry: Geometry,
    pub model: ObservationModel,
    /// Upper thickness-loss limit, mm.
    pub dtau_max: f64,
    /// Admissible Young's modulus range, GPa.
    pub e_range: (f64, f64),
    pub is_oracle: bool,
    /// MAP estimate of E from system identification, GPa.
    pub e_map: Option<f64>,
}

impl ModelCandidate {
    pub fn new(id: impl Into<String>, geometry: Geometry, model: ObservationModel, dtau_max: f64) -> Result<Self> {
        let c = Self {
            id: id.into(),
            geometry,
            model,
            dtau_max,
            e_range: (170.0, 238.0),
            is_oracle: false,
            e_map: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.dtau_max > 0.0 && self.dtau_max < self.geometry.tau) {
            return Err(Error::Config(format!(
                "{}: dtau_max must lie in (0, tau), got {}",
                self.id, self.dtau_max
            )));
        }
        if !(self.e_range.0 > 0.0 && self.e_range.0 < self.e_range.1) {
            return Err(Error::Config(format!(
                "{}: invalid E range {:?}",
                self.id, self.e_range
            )));
        }
        if let ObservationModel::Emulator { kappa_eps, kappa_sig } = self.model {
            if !(kappa_eps > 0.0 && kappa_eps <= 1.0) || !(kappa_sig >= 1.0) {
                return Err(Error::Config(format!(
                    "{}: need 0 < kappa_eps <= 1 and kappa_sig >= 1, got ({kappa_eps}, {kappa_sig})",
                    self.id
                )));
            }
        }
        Ok(())
    }

    fn check_dtau(&self, dtau: f64) -> Result<()> {
        if !(dtau >= 0.0 && dtau <= self.dtau_max) {
            return Err(Error::Domain(format!(
                "{}: thickness loss {dtau} outside [0, {}]",
                self.id, self.dtau_max
            )));
        }
        Ok(())
    }

    /// Gauge strain in microstrain.
    pub fn predict_strain(&self, e_gpa: f64, dtau: f64) -> Result<f64> {
        self.check_dtau(dtau)?;
        if !(e_gpa >= self.e_range.0 && e_gpa <= self.e_range.1) {
            return Err(Error::Domain(format!(
                "{}: E = {e_gpa} GPa outside [{}, {}]",
                self.id, self.e_range.0, self.e_range.1
            )));
        }
        match &self.model {
            ObservationModel::Analytical => beam_strain(&self.geometry, e_gpa, dtau),
            ObservationModel::Emulator { kappa_eps, .. } => emulator_strain(&self.geometry, *kappa_eps, e_gpa, dtau),
            ObservationModel::Surrogate { strain, .. } => strain.eval(e_gpa, dtau),
        }
    }

    /// Peak von Mises demand in MPa. Surrogates are evaluated at the MAP
    /// modulus when known, otherwise at the centre of the E range.
    pub fn predict_demand(&self, dtau: f64) -> Result<f64> {
        self.check_dtau(dtau)?;
        match &self.model {
            ObservationModel::Analytical => emulator_vm_stress(&self.geometry, 1.0, dtau),
            ObservationModel::Emulator { kappa_sig, .. } => emulator_vm_stress(&self.geometry, *kappa_sig, dtau),
            ObservationModel::Surrogate { demand, .. } => {
                let e = self.e_map.unwrap_or(0.5 * (self.e_range.0 + self.e_range.1));
                demand.eval(e, dtau)
            }
        }
    }
}
