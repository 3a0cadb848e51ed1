//! Three-phase synthetic strain record: intact, deteriorating, frozen.

use crate::prob::RngStream;
use crate::structural::{emulator_strain, Geometry};
use crate::study::config::TruthConfig;
use crate::study::StrainSeries;
use crate::{Error, Result};

/// Thickness loss of the ground truth at time `t`.
pub fn true_dtau(tc: &TruthConfig, t: f64) -> Result<f64> {
    if t < tc.boundary1 {
        Ok(0.0)
    } else if t < tc.boundary2 {
        tc.deterioration.dtau(t)
    } else {
        tc.deterioration.dtau(tc.boundary2)
    }
}

/// Samples `0, dt, 2 dt, ..` up to `t_end` inclusive.
pub fn generate_synthetic(geometry: &Geometry, tc: &TruthConfig, rng: &mut RngStream) -> Result<StrainSeries> {
    tc.validate()?;
    let n = (tc.t_end / tc.dt + 1e-9).floor() as usize + 1;
    let (mut times, mut strains, mut phases) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let t = i as f64 * tc.dt;
        let dtau = true_dtau(tc, t).map_err(|e| Error::Data(format!("truth deterioration at t = {t}: {e}")))?;
        if !(dtau >= 0.0) || tc.kappa_eps * dtau >= geometry.tau {
            return Err(Error::Data(format!(
                "truth deterioration {dtau} mm at t = {t} is infeasible for tau = {}",
                geometry.tau
            )));
        }
        let clean = emulator_strain(geometry, tc.kappa_eps, tc.e_gpa, dtau)?;
        times.push(t);
        strains.push(clean + tc.noise_sigma * rng.standard_normal());
        phases.push(if t < tc.boundary1 {
            1
        } else if t < tc.boundary2 {
            2
        } else {
            3
        });
    }
    StrainSeries::with_phases(times, strains, Some(phases))
}
