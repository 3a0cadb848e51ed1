//! Posterior predictive replicates and 95% bands.

use serde::Serialize;

use super::sampler::{quantile_sorted, PosteriorDraws};
use super::task::{predict_point, TaskSpec};
use crate::prob::RngStream;
use crate::structural::ModelCandidate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictiveBand {
    pub time: f64,
    pub mean: f64,
    pub lower95: f64,
    pub upper95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPredictive {
    pub bands: Vec<PredictiveBand>,
    /// `n_rep` rows, one column per requested time.
    pub samples: Vec<Vec<f64>>,
    /// Replicates whose thickness-loss path was clamped at any time.
    pub clamped_replicates: usize,
}

impl PosteriorPredictive {
    /// Fraction of `observed` values (aligned with the band times) inside the band.
    pub fn coverage(&self, observed: &[f64]) -> f64 {
        let inside = self
            .bands
            .iter()
            .zip(observed)
            .filter(|(b, &y)| y >= b.lower95 && y <= b.upper95)
            .count();
        inside as f64 / self.bands.len().min(observed.len()) as f64
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "time_min,mean,lower95,upper95")?;
        for b in &self.bands {
            writeln!(out, "{},{},{},{}", b.time, b.mean, b.lower95, b.upper95)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws `n_rep` replicate strain paths at `times`: each replicate picks a
/// posterior draw uniformly, propagates it through the task's model chain and
/// adds Gaussian noise with that draw's σ. Bands are the empirical 2.5% and
/// 97.5% quantiles per time.
pub fn posterior_predictive(
    task: &TaskSpec,
    c: &ModelCandidate,
    p: &PosteriorDraws,
    times: &[f64],
    n_rep: usize,
    rng: &mut RngStream,
) -> Result<PosteriorPredictive> {
    if n_rep < 100 {
        return Err(Error::Domain(format!("n_rep must be >= 100, got {n_rep}")));
    }
    if times.is_empty() {
        return Err(Error::Domain("no prediction times".into()));
    }
    if p.n_pos() == 0 {
        return Err(Error::Data("no posterior draws".into()));
    }
    let mut samples = Vec::with_capacity(n_rep);
    let mut clamped_replicates = 0;
    for _ in 0..n_rep {
        let row = &p.draws[rng.index(p.n_pos())];
        let (model, sigma) = row.split_at(row.len() - 1);
        let sigma = sigma[0];
        let mut rep = Vec::with_capacity(times.len());
        let mut clamped = false;
        for &t in times {
            let pred = predict_point(task, c, model, t)?
                .ok_or_else(|| Error::Domain(format!("prediction undefined at t = {t}")))?;
            clamped |= pred.clamped;
            rep.push(pred.strain + sigma * rng.standard_normal());
        }
        clamped_replicates += usize::from(clamped);
        samples.push(rep);
    }

    let mut bands = Vec::with_capacity(times.len());
    let mut col = vec![0.0; n_rep];
    for (j, &t) in times.iter().enumerate() {
        for (i, rep) in samples.iter().enumerate() {
            col[i] = rep[j];
        }
        let mean = col.iter().sum::<f64>() / n_rep as f64;
        col.sort_by(f64::total_cmp);
        bands.push(PredictiveBand {
            time: t,
            mean,
            lower95: quantile_sorted(&col, 0.025),
            upper95: quantile_sorted(&col, 0.975),
        });
    }
    Ok(PosteriorPredictive {
        bands,
        samples,
        clamped_replicates,
    })
}
