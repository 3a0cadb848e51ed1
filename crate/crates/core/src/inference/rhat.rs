//! Rank-normalized split-R̂.

use serde::{Deserialize, Serialize};

use crate::prob::normal_quantile;
use crate::{Error, Result};

pub const RHAT_THRESHOLD: f64 = 1.01;

/// Rank-normalized split-R̂ for one parameter.
///
/// Each chain is halved (the middle draw of an odd-length chain is dropped),
/// pooled draws are replaced by `Φ⁻¹((rank - 3/8) / (S + 1/4))` with average
/// ranks for ties, and the classic potential scale reduction is computed on
/// the transformed split chains. Chains are trimmed to the shortest length.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Domain(format!(
            "split-R̂ needs >= 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(Error::Domain(format!("split-R̂ needs >= 4 draws per chain, got {n}")));
    }
    let half = n / 2;
    let split: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[n - half..n]]).collect();

    let pooled: Vec<f64> = split.iter().flat_map(|c| c.iter().copied()).collect();
    let total = pooled.len();
    let mean = pooled.iter().sum::<f64>() / total as f64;
    if pooled.iter().all(|&x| x == mean) {
        return Ok(1.0);
    }

    let z = rank_normalize(&pooled);
    let m = split.len();
    let (mut means, mut vars) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for chunk in z.chunks(half) {
        let mu = chunk.iter().sum::<f64>() / half as f64;
        let v = chunk.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (half - 1) as f64;
        means.push(mu);
        vars.push(v);
    }
    let nf = half as f64;
    let grand = means.iter().sum::<f64>() / m as f64;
    let between = nf * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    let within = vars.iter().sum::<f64>() / m as f64;
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let pooled_var = ((nf - 1.0) / nf) * within + between / nf;
    Ok((pooled_var / within).sqrt())
}

fn rank_normalize(x: &[f64]) -> Vec<f64> {
    let s = x.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block i..=j
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
        .into_iter()
        .map(|r| normal_quantile((r - 0.375) / (s as f64 + 0.25)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRhat {
    pub name: String,
    pub rhat: f64,
}

/// Per-parameter R̂ over the retained draws and the resulting gate decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub params: Vec<ParamRhat>,
    pub n_chains: usize,
    pub n_draws: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    pub fn from_chains(names: &[String], per_param_chains: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut params = Vec::with_capacity(names.len());
        for (name, chains) in names.iter().zip(per_param_chains) {
            params.push(ParamRhat {
                name: name.clone(),
                rhat: split_rhat(chains)?,
            });
        }
        let first = per_param_chains.first().map(|c| c.as_slice()).unwrap_or(&[]);
        let pass = params.iter().all(|p| p.rhat < RHAT_THRESHOLD);
        Ok(Self {
            params,
            n_chains: first.len(),
            n_draws: first.iter().map(Vec::len).min().unwrap_or(0),
            threshold: RHAT_THRESHOLD,
            pass,
        })
    }

    pub fn max_rhat(&self) -> f64 {
        self.params.iter().map(|p| p.rhat).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn describe_failures(&self) -> String {
        self.params
            .iter()
            .filter(|p| !(p.rhat < self.threshold))
            .map(|p| format!("{} R̂={:.4}", p.name, p.rhat))
            .collect::<Vec<_>>()
            .join(", ")
    }
}
