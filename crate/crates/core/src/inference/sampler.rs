//! Seeded multi-chain adaptive random-walk Metropolis.
//!
//! Warm-up runs a Robbins-Monro recursion on the log of a global proposal
//! scale, targeting an acceptance rate of 0.30. The proposal shape starts as
//! the diagonal of the prior standard deviations and is re-estimated at the
//! end of each warm-up window from the within-chain covariance pooled over
//! all chains (windows double in length, with fixed initial and terminal
//! buffers). Each chain starts from a
//! prior draw moved uphill by Nelder-Mead. Chains that trail the
//! best chain badly at an early window boundary are restarted from it.
//! Everything is frozen once warm-up ends, so retained draws come from a
//! fixed Markov kernel.

use std::io::Write;
use std::path::Path;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rhat::ConvergenceReport;
use super::task::ParameterSpace;
use crate::prob::RngStream;
use crate::{Error, Result};

pub const TARGET_ACCEPTANCE: f64 = 0.30;
const MAX_INIT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_samples: usize,
    /// Transitions per retained post-warm-up draw.
    pub thin: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            n_chains: 8,
            n_warmup: 2000,
            n_samples: 2000,
            thin: 5,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains < 2 {
            return Err(Error::Config(format!("n_chains must be >= 2, got {}", self.n_chains)));
        }
        if self.n_warmup < 100 || self.n_samples < 100 {
            return Err(Error::Config(format!(
                "n_warmup and n_samples must be >= 100, got {} and {}",
                self.n_warmup, self.n_samples
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        Ok(())
    }
}

/// Provenance of a sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerRecord {
    pub settings: SamplerSettings,
    pub seed: u64,
    pub acceptance_rate: Vec<f64>,
}

/// Retained posterior draws, row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    pub log_posterior: Vec<f64>,
    pub chain: Vec<usize>,
    pub draw_index: Vec<usize>,
    pub record: Option<SamplerRecord>,
}

impl PosteriorDraws {
    /// Builds a draw set without chain structure (all draws in chain 0).
    pub fn from_rows(names: Vec<String>, draws: Vec<Vec<f64>>, log_posterior: Vec<f64>) -> Result<Self> {
        if draws.len() != log_posterior.len() {
            return Err(Error::DimensionMismatch {
                expected: draws.len(),
                got: log_posterior.len(),
            });
        }
        if let Some(row) = draws.iter().find(|r| r.len() != names.len()) {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: row.len(),
            });
        }
        let n = draws.len();
        Ok(Self {
            names,
            draws,
            log_posterior,
            chain: vec![0; n],
            draw_index: (0..n).collect(),
            record: None,
        })
    }

    pub fn n_pos(&self) -> usize {
        self.draws.len()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|r| r[k]).collect()
    }

    pub fn chain_ids(&self) -> Vec<usize> {
        let mut ids = self.chain.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Draws of parameter `k` grouped by chain, in chain-id order.
    pub fn chains_for(&self, k: usize) -> Vec<Vec<f64>> {
        self.chain_ids()
            .into_iter()
            .map(|c| {
                self.draws
                    .iter()
                    .zip(&self.chain)
                    .filter(|(_, &ch)| ch == c)
                    .map(|(r, _)| r[k])
                    .collect()
            })
            .collect()
    }

    pub fn single_chain(&self, chain: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..self.n_pos()).filter(|&i| self.chain[i] == chain).collect();
        if idx.is_empty() {
            return Err(Error::Data(format!("no draws for chain {chain}")));
        }
        Ok(Self {
            names: self.names.clone(),
            draws: idx.iter().map(|&i| self.draws[i].clone()).collect(),
            log_posterior: idx.iter().map(|&i| self.log_posterior[i]).collect(),
            chain: idx.iter().map(|&i| self.chain[i]).collect(),
            draw_index: idx.iter().map(|&i| self.draw_index[i]).collect(),
            record: self.record.clone(),
        })
    }

    /// Position of the draw with the highest log-posterior (first on ties).
    pub fn map_index(&self) -> Result<usize> {
        if self.draws.is_empty() {
            return Err(Error::Data("no posterior draws".into()));
        }
        let mut best = 0;
        for (i, &lp) in self.log_posterior.iter().enumerate().skip(1) {
            if lp > self.log_posterior[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn map_estimate(&self) -> Result<Vec<f64>> {
        Ok(self.draws[self.map_index()?].clone())
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.draws.iter().map(|r| r[k]).sum::<f64>() / self.n_pos() as f64
    }

    pub fn std_dev(&self, k: usize) -> f64 {
        let m = self.mean(k);
        let n = self.n_pos() as f64;
        (self.draws.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    /// Empirical quantile with linear interpolation between order statistics.
    pub fn quantile(&self, k: usize, q: f64) -> f64 {
        let mut col = self.column(k);
        col.sort_by(f64::total_cmp);
        quantile_sorted(&col, q)
    }

    pub fn convergence(&self) -> Result<ConvergenceReport> {
        let per_param: Vec<Vec<Vec<f64>>> = (0..self.dim()).map(|k| self.chains_for(k)).collect();
        ConvergenceReport::from_chains(&self.names, &per_param)
    }

    /// CSV with header `chain,draw,<names...>,log_posterior`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "chain,draw,{},log_posterior", self.names.join(","))?;
        for i in 0..self.n_pos() {
            write!(out, "{},{}", self.chain[i], self.draw_index[i])?;
            for v in &self.draws[i] {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", self.log_posterior[i])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let ctx = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        let mut rdr = csv::Reader::from_path(path).map_err(ctx)?;
        let headers = rdr.headers().map_err(ctx)?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 4 || cols[0] != "chain" || cols[1] != "draw" || cols[cols.len() - 1] != "log_posterior" {
            return Err(Error::Data(format!(
                "{}: expected header `chain,draw,<params...>,log_posterior`",
                path.display()
            )));
        }
        let names: Vec<String> = cols[2..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let (mut draws, mut lps, mut chain, mut idx) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(ctx)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let bad = || Error::Data(format!("{}:{line}: malformed posterior row", path.display()));
            chain.push(rec[0].parse::<usize>().map_err(|_| bad())?);
            idx.push(rec[1].parse::<usize>().map_err(|_| bad())?);
            let row: Vec<f64> = (2..2 + names.len())
                .map(|i| rec[i].parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            let lp: f64 = rec[cols.len() - 1].parse().map_err(|_| bad())?;
            if !lp.is_finite() {
                return Err(Error::Data(format!(
                    "{}:{line}: non-finite log-posterior",
                    path.display()
                )));
            }
            draws.push(row);
            lps.push(lp);
        }
        if draws.is_empty() {
            return Err(Error::Data(format!("{}: no draws", path.display())));
        }
        Ok(Self {
            names,
            draws,
            log_posterior: lps,
            chain,
            draw_index: idx,
            record: None,
        })
    }
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Warm-up window ends (exclusive iteration indices) after which the proposal
/// covariance is re-estimated.
fn adaptation_windows(n_warmup: usize) -> Vec<(usize, usize)> {
    let init = (n_warmup * 15) / 100;
    let term = n_warmup / 10;
    let end = n_warmup - term;
    let mut windows = Vec::new();
    let mut start = init;
    let mut width = 25.max(n_warmup / 40);
    while start < end {
        let mut stop = (start + width).min(end);
        if stop + 2 * width > end {
            stop = end;
        }
        windows.push((start, stop));
        start = stop;
        width *= 2;
    }
    windows
}

/// Warm-up fraction within which trailing chains may be restarted.
const RESET_HORIZON: f64 = 0.6;
const POLISH_ROUNDS: usize = 4;
const POLISH_ITERS: u64 = 1500;

struct NegLogPosterior<'a, F>(&'a F);

impl<F> CostFunction for NegLogPosterior<'_, F>
where
    F: Fn(&[f64]) -> f64,
{
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let lp = (self.0)(x);
        Ok(if lp.is_finite() { -lp } else { f64::INFINITY })
    }
}

/// Moves a prior draw uphill with restarted Nelder-Mead so warm-up starts
/// near a local mode. Never returns a worse point than `x0`.
fn polish_start<F>(target: &F, space: &ParameterSpace, x0: Vec<f64>, lp0: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let (mut best, mut best_lp) = (x0, lp0);
    for round in 0..POLISH_ROUNDS {
        let shrink = 0.1f64.powi(round as i32 + 1);
        let mut simplex = vec![best.clone()];
        for (i, prior) in space.priors.iter().enumerate() {
            let h = shrink * prior.std_dev();
            let mut v = best.clone();
            v[i] += h;
            if !target(&v).is_finite() {
                v[i] = best[i] - h;
            }
            simplex.push(v);
        }
        let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-10) else {
            break;
        };
        let run = Executor::new(NegLogPosterior(target), solver)
            .configure(|s| s.max_iters(POLISH_ITERS))
            .run();
        let Ok(res) = run else { break };
        let Some(x) = res.state().get_best_param().cloned() else {
            break;
        };
        let lp = target(&x);
        if !(lp > best_lp) {
            break;
        }
        best = x;
        best_lp = lp;
    }
    (best, best_lp)
}

fn initial_point<F>(target: &F, space: &ParameterSpace, rng: &mut RngStream) -> Option<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    for _ in 0..MAX_INIT_ATTEMPTS {
        let x: Vec<f64> = space.priors.iter().map(|p| p.sample(rng)).collect();
        let lp = target(&x);
        if lp.is_finite() {
            return Some((x, lp));
        }
    }
    None
}

/// Cholesky factor of the within-chain covariance of the current window,
/// pooled over chains.
fn pooled_factor(chains: &[Chain], d: usize) -> Option<DMatrix<f64>> {
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut dof = 0usize;
    for c in chains {
        let n = c.window_draws.len();
        if n < 2 {
            continue;
        }
        let mut mean = DVector::<f64>::zeros(d);
        for x in &c.window_draws {
            mean += DVector::from_column_slice(x);
        }
        mean /= n as f64;
        for x in &c.window_draws {
            let dx = DVector::from_column_slice(x) - &mean;
            cov += &dx * dx.transpose();
        }
        dof += n - 1;
    }
    if dof < 2 * d + 2 {
        return None;
    }
    cov /= dof as f64;
    if (0..d).any(|i| !(cov[(i, i)] > 0.0)) {
        return None;
    }
    // shrink toward the diagonal so short windows cannot produce a degenerate shape
    let w = dof as f64 / (dof as f64 + 5.0);
    let mut reg = cov.clone() * w;
    for i in 0..d {
        reg[(i, i)] += (1.0 - w) * cov[(i, i)];
    }
    reg.cholesky().map(|c| c.l())
}

fn adapt_shape(chains: &mut [Chain], d: usize) {
    if let Some(l) = pooled_factor(chains, d) {
        for c in chains.iter_mut() {
            c.factor = l.clone();
            c.log_scale = (2.38 / (d as f64).sqrt()).ln();
            c.rm_step = 0;
        }
    }
    for c in chains.iter_mut() {
        c.window_draws.clear();
    }
}

struct Chain {
    rng: RngStream,
    x: Vec<f64>,
    lp: f64,
    factor: DMatrix<f64>,
    log_scale: f64,
    rm_step: usize,
    window_draws: Vec<Vec<f64>>,
    segment_lp: f64,
    segment_len: usize,
    draws: Vec<Vec<f64>>,
    lps: Vec<f64>,
    accepted: usize,
}

impl Chain {
    fn new<F>(target: &F, space: &ParameterSpace, settings: &SamplerSettings, seed: u64, chain: usize) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let d = space.dim();
        let mut rng = RngStream::new(seed, chain as u64);
        let (x, lp) = initial_point(target, space, &mut rng).ok_or_else(|| {
            Error::Initialization(format!(
                "chain {chain}: no finite log-posterior in {MAX_INIT_ATTEMPTS} prior draws"
            ))
        })?;
        let (x, lp) = polish_start(target, space, x, lp);
        let factor =
            DMatrix::<f64>::from_diagonal(&DVector::from_iterator(d, space.priors.iter().map(|p| p.std_dev())));
        Ok(Self {
            rng,
            x,
            lp,
            factor,
            log_scale: (0.1f64).ln(),
            rm_step: 0,
            window_draws: Vec::new(),
            segment_lp: 0.0,
            segment_len: 0,
            draws: Vec::with_capacity(settings.n_samples),
            lps: Vec::with_capacity(settings.n_samples),
            accepted: 0,
        })
    }

    /// One Metropolis transition; returns the acceptance probability and decision.
    fn transition<F>(&mut self, target: &F) -> (f64, bool)
    where
        F: Fn(&[f64]) -> f64,
    {
        let d = self.x.len();
        let z: Vec<f64> = (0..d).map(|_| self.rng.standard_normal()).collect();
        let scale = self.log_scale.exp();
        let proposal: Vec<f64> = (0..d)
            .map(|i| self.x[i] + scale * (0..=i).map(|j| self.factor[(i, j)] * z[j]).sum::<f64>())
            .collect();
        let lp_new = target(&proposal);
        let log_ratio = lp_new - self.lp;
        let accept_prob = if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        };
        let accept = lp_new.is_finite() && self.rng.uniform01() < accept_prob;
        if accept {
            self.x = proposal;
            self.lp = lp_new;
        }
        (accept_prob, accept)
    }

    fn run<F>(
        &mut self,
        target: &F,
        iters: std::ops::Range<usize>,
        n_warmup: usize,
        thin: usize,
        windows: &[(usize, usize)],
    ) where
        F: Fn(&[f64]) -> f64,
    {
        for iter in iters {
            let (accept_prob, accept) = self.transition(target);
            if iter < n_warmup {
                self.rm_step += 1;
                self.log_scale += (accept_prob - TARGET_ACCEPTANCE) / (self.rm_step as f64).powf(0.6);
                self.log_scale = self.log_scale.clamp(-30.0, 5.0);
                self.segment_lp += self.lp;
                self.segment_len += 1;
                if windows.iter().any(|w| iter >= w.0 && iter < w.1) {
                    self.window_draws.push(self.x.clone());
                }
            } else {
                self.accepted += accept as usize;
                for _ in 1..thin {
                    self.accepted += self.transition(target).1 as usize;
                }
                self.draws.push(self.x.clone());
                self.lps.push(self.lp);
            }
        }
    }
}

/// Restarts chains whose mean log-posterior over the last warm-up segment
/// trails the best chain by more than `10 + d` nats from the best chain's
/// current state and adaptation. Each chain keeps its own random stream.
fn reset_trailing_chains(chains: &mut [Chain], d: usize) {
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c.segment_lp / c.segment_len.max(1) as f64)
        .collect();
    let best = (0..chains.len())
        .max_by(|&a, &b| means[a].total_cmp(&means[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let gap = 10.0 + d as f64;
    let (x, lp, factor, log_scale) = {
        let b = &chains[best];
        (b.x.clone(), b.lp, b.factor.clone(), b.log_scale)
    };
    for (c, m) in chains.iter_mut().zip(&means) {
        if *m < means[best] - gap {
            c.x = x.clone();
            c.lp = lp;
            c.factor = factor.clone();
            c.log_scale = log_scale;
            c.rm_step = 0;
            c.window_draws.clear();
        }
        c.segment_lp = 0.0;
        c.segment_len = 0;
    }
}

/// Samples `target` with `settings.n_chains` chains, chain `c` using random
/// stream `(seed, c)`. Chains advance in parallel between warm-up window
/// boundaries; early in warm-up, chains stranded in regions of much lower
/// posterior density are restarted from the best chain. The result is
/// independent of thread scheduling.
pub fn run_mcmc<F>(
    target: &F,
    space: &ParameterSpace,
    settings: &SamplerSettings,
    seed: u64,
) -> Result<(PosteriorDraws, ConvergenceReport)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    settings.validate()?;
    let d = space.dim();
    let mut chains = (0..settings.n_chains)
        .into_par_iter()
        .map(|c| Chain::new(target, space, settings, seed, c))
        .collect::<Result<Vec<_>>>()?;

    let windows = adaptation_windows(settings.n_warmup);
    let mut cuts: Vec<usize> = windows.iter().flat_map(|w| [w.0, w.1]).collect();
    cuts.extend([settings.n_warmup, settings.n_warmup + settings.n_samples]);
    cuts.sort_unstable();
    cuts.dedup();
    let horizon = (RESET_HORIZON * settings.n_warmup as f64) as usize;
    let mut from = 0;
    for &to in &cuts {
        chains
            .par_iter_mut()
            .for_each(|c| c.run(target, from..to, settings.n_warmup, settings.thin, &windows));
        if windows.iter().any(|w| w.1 == to) {
            adapt_shape(&mut chains, d);
        }
        if to <= horizon {
            reset_trailing_chains(&mut chains, d);
        }
        from = to;
    }

    let mut post = PosteriorDraws {
        names: space.names.clone(),
        draws: Vec::with_capacity(settings.n_chains * settings.n_samples),
        log_posterior: Vec::new(),
        chain: Vec::new(),
        draw_index: Vec::new(),
        record: None,
    };
    let mut acceptance = Vec::with_capacity(settings.n_chains);
    for (c, ch) in chains.into_iter().enumerate() {
        acceptance.push(ch.accepted as f64 / (settings.n_samples * settings.thin) as f64);
        for (i, (row, lp)) in ch.draws.into_iter().zip(ch.lps).enumerate() {
            post.draws.push(row);
            post.log_posterior.push(lp);
            post.chain.push(c);
            post.draw_index.push(i);
        }
    }
    post.record = Some(SamplerRecord {
        settings: *settings,
        seed,
        acceptance_rate: acceptance,
    });
    let report = post.convergence()?;
    Ok((post, report))
}
