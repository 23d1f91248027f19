//! Single-spin-flip Metropolis sampling with blocked jackknife errors.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{capacity, Error, Result};
use crate::gibbs::GibbsContext;

/// Sweeps between from-scratch recomputations of the cached local fields.
pub const RESYNC_SWEEPS: u64 = 10_000;
pub const BLOCKS_PER_CHAIN: usize = 20;
/// Chain means further apart than this many combined standard errors are
/// flagged as inconsistent.
pub const CONSISTENCY_SIGMAS: f64 = 4.0;
pub const HISTOGRAM_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub seed: u64,
    /// Total sweeps per chain, burn-in included. One sweep is `N` attempted flips.
    pub n_sweeps: u64,
    pub burn_in: u64,
    pub n_chains: usize,
    /// Sweeps between recorded samples.
    pub thinning: u64,
}

impl ChainConfig {
    /// Default burn-in `max(1000, 10 N)` sweeps on top of `measured` sweeps.
    pub fn for_size(n: usize, seed: u64, measured: u64, n_chains: usize) -> Self {
        let burn_in = default_burn_in(n);
        Self {
            seed,
            n_sweeps: burn_in + measured,
            burn_in,
            n_chains,
            thinning: 1,
        }
    }

    pub fn measured_sweeps(&self) -> u64 {
        self.n_sweeps.saturating_sub(self.burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sweeps == 0 {
            return Err(Error::InvalidChain("n_sweeps must be positive".into()));
        }
        if self.n_sweeps <= self.burn_in {
            return Err(Error::InvalidChain(format!(
                "n_sweeps ({}) must exceed burn_in ({})",
                self.n_sweeps, self.burn_in
            )));
        }
        if self.n_chains < 2 {
            return Err(Error::InvalidChain(
                "at least two chains are required".into(),
            ));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidChain("thinning must be positive".into()));
        }
        let samples = self.measured_sweeps() / self.thinning;
        if samples < BLOCKS_PER_CHAIN as u64 {
            return Err(Error::InvalidChain(format!(
                "{samples} samples per chain, need at least {BLOCKS_PER_CHAIN}"
            )));
        }
        Ok(())
    }
}

pub fn default_burn_in(n: usize) -> u64 {
    (10 * n as u64).max(1000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Exact,
    MC,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MC => "mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub method: Method,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_samples: 0,
            method: Method::Exact,
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Zero-based spin indices for two-point observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Observable {
    EnergyDensity,
    EnergyDensitySq,
    TwoPoint(usize, usize),
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::EnergyDensity => "h_mean".into(),
            Observable::EnergyDensitySq => "h_sq".into(),
            Observable::TwoPoint(i, j) => format!("two_point_{i}_{j}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub estimates: BTreeMap<Observable, Estimate>,
    /// `⟨h²⟩ − ⟨h⟩²` with a jackknife error.
    pub energy_variance: Estimate,
    /// Accepted over attempted flips, all chains, burn-in excluded.
    pub acceptance_rate: f64,
    /// Largest pairwise chain-mean separation in combined standard errors.
    pub max_chain_separation: f64,
    pub chains_consistent: bool,
    /// Largest `|cached − recomputed|` local field seen at a resync.
    pub max_field_drift: f64,
}

struct Chain<'a> {
    ctx: &'a GibbsContext,
    spins: Vec<f64>,
    fields: Vec<f64>,
    energy: f64,
    rng: ChaCha8Rng,
    max_drift: f64,
}

impl<'a> Chain<'a> {
    fn new(ctx: &'a GibbsContext, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let n = ctx.n();
        let spins: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let mut chain = Self {
            ctx,
            spins,
            fields: vec![0.0; n],
            energy: 0.0,
            rng,
            max_drift: 0.0,
        };
        chain.fields = chain.fresh_fields();
        chain.energy = chain.fresh_energy();
        chain
    }

    /// `f_k = Σ_{j≠k} J_kj σ_j`; the diagonal never enters a flip cost.
    fn fresh_fields(&self) -> Vec<f64> {
        let j = self.ctx.matrix();
        (0..self.spins.len())
            .map(|k| {
                let row = j.row(k);
                let mut f = 0.0;
                for (m, (&jkm, &s)) in row.iter().zip(&self.spins).enumerate() {
                    if m != k {
                        f += jkm * s;
                    }
                }
                f
            })
            .collect()
    }

    fn fresh_energy(&self) -> f64 {
        let pair: f64 = self
            .spins
            .iter()
            .zip(&self.fields)
            .map(|(s, f)| s * f)
            .sum();
        -0.5 * pair + self.ctx.matrix().diagonal_energy() + self.ctx.shift()
    }

    fn resync(&mut self) {
        let fresh = self.fresh_fields();
        let drift = fresh
            .iter()
            .zip(&self.fields)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.max_drift = self.max_drift.max(drift);
        self.fields = fresh;
        self.energy = self.fresh_energy();
    }

    fn sweep(&mut self) -> u64 {
        let n = self.spins.len();
        let beta = self.ctx.beta();
        let matrix = self.ctx.matrix();
        let mut accepted = 0;
        for _ in 0..n {
            let k = self.rng.random_range(0..n);
            let s = self.spins[k];
            let delta = 2.0 * s * self.fields[k];
            let u: f64 = self.rng.random();
            if delta <= 0.0 || u < (-beta * delta).exp() {
                accepted += 1;
                self.spins[k] = -s;
                self.energy += delta;
                let step = -2.0 * s;
                for (m, (f, &jmk)) in self.fields.iter_mut().zip(matrix.row(k)).enumerate() {
                    if m != k {
                        *f += jmk * step;
                    }
                }
            }
        }
        accepted
    }

    /// Runs `cfg.n_sweeps` sweeps, calling `record` after every measured
    /// sweep that falls on the thinning grid. Returns accepted flips after burn-in.
    fn run(&mut self, cfg: &ChainConfig, mut record: impl FnMut(&Self)) -> u64 {
        let mut accepted = 0;
        for t in 1..=cfg.n_sweeps {
            let a = self.sweep();
            if t % RESYNC_SWEEPS == 0 {
                self.resync();
            }
            if t > cfg.burn_in {
                accepted += a;
                if (t - cfg.burn_in).is_multiple_of(cfg.thinning) {
                    record(self);
                }
            }
        }
        self.resync();
        accepted
    }

    fn bits(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .fold(0, |b, (i, _)| b | (1u64 << i))
    }
}

struct ChainSamples {
    series: Vec<Vec<f64>>,
    accepted: u64,
    drift: f64,
}

pub fn run_chain(
    ctx: &GibbsContext,
    cfg: &ChainConfig,
    observables: &[Observable],
) -> Result<ChainReport> {
    let n = ctx.n();
    if n < 2 {
        return Err(Error::InvalidSize {
            n,
            reason: "sampling needs at least two spins",
        });
    }
    if observables.is_empty() {
        return Err(Error::InvalidChain("no observables requested".into()));
    }
    cfg.validate()?;
    for obs in observables {
        if let Observable::TwoPoint(i, j) = *obs {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
        }
    }
    let mut wanted: Vec<Observable> = observables.to_vec();
    wanted.sort();
    wanted.dedup();
    // Energy moments are always tracked so the variance can be reported.
    let mut tracked = wanted.clone();
    for o in [Observable::EnergyDensity, Observable::EnergyDensitySq] {
        if !tracked.contains(&o) {
            tracked.push(o);
        }
    }
    let nf = n as f64;

    let chains: Vec<ChainSamples> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut chain = Chain::new(ctx, cfg.seed, c as u64);
            let mut series = vec![Vec::new(); tracked.len()];
            let accepted = chain.run(cfg, |ch| {
                let h = ch.energy / nf;
                for (slot, obs) in series.iter_mut().zip(&tracked) {
                    slot.push(match *obs {
                        Observable::EnergyDensity => h,
                        Observable::EnergyDensitySq => h * h,
                        Observable::TwoPoint(i, j) => ch.spins[i] * ch.spins[j],
                    });
                }
            });
            ChainSamples {
                series,
                accepted,
                drift: chain.max_drift,
            }
        })
        .collect();

    let samples_per_chain = chains[0].series[0].len();
    let block_len = samples_per_chain / BLOCKS_PER_CHAIN;
    let used = (block_len * BLOCKS_PER_CHAIN) as u64;
    // block_means[obs][chain][block]
    let block_means: Vec<Vec<Vec<f64>>> = (0..tracked.len())
        .map(|o| {
            chains
                .iter()
                .map(|ch| {
                    ch.series[o][..block_len * BLOCKS_PER_CHAIN]
                        .chunks(block_len)
                        .map(mean)
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut estimates = BTreeMap::new();
    let mut max_sep: f64 = 0.0;
    for (o, obs) in tracked.iter().enumerate() {
        let pooled: Vec<f64> = block_means[o].iter().flatten().copied().collect();
        let (value, se) = jackknife(&[&pooled], |m| m[0]);
        if wanted.contains(obs) {
            estimates.insert(
                *obs,
                Estimate {
                    value,
                    std_error: se,
                    n_samples: used * cfg.n_chains as u64,
                    method: Method::MC,
                },
            );
        }
        let per_chain: Vec<(f64, f64)> = block_means[o]
            .iter()
            .map(|b| jackknife(&[b], |m| m[0]))
            .collect();
        for a in 0..per_chain.len() {
            for b in (a + 1)..per_chain.len() {
                let diff = (per_chain[a].0 - per_chain[b].0).abs();
                let combined = per_chain[a].1.hypot(per_chain[b].1);
                let sep = if combined > 0.0 {
                    diff / combined
                } else if diff > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                max_sep = max_sep.max(sep);
            }
        }
    }

    let ih = tracked
        .iter()
        .position(|o| *o == Observable::EnergyDensity)
        .unwrap_or(0);
    let ih2 = tracked
        .iter()
        .position(|o| *o == Observable::EnergyDensitySq)
        .unwrap_or(0);
    let h_blocks: Vec<f64> = block_means[ih].iter().flatten().copied().collect();
    let h2_blocks: Vec<f64> = block_means[ih2].iter().flatten().copied().collect();
    let (var, var_se) = jackknife(&[&h_blocks, &h2_blocks], |m| m[1] - m[0] * m[0]);

    let attempted = cfg.measured_sweeps() * n as u64 * cfg.n_chains as u64;
    let accepted: u64 = chains.iter().map(|c| c.accepted).sum();
    Ok(ChainReport {
        estimates,
        energy_variance: Estimate {
            value: var,
            std_error: var_se,
            n_samples: used * cfg.n_chains as u64,
            method: Method::MC,
        },
        acceptance_rate: accepted as f64 / attempted as f64,
        max_chain_separation: max_sep,
        chains_consistent: max_sep <= CONSISTENCY_SIGMAS,
        max_field_drift: chains.iter().map(|c| c.drift).fold(0.0, f64::max),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Leave-one-block-out jackknife of `f` applied to the means of aligned
/// block series. Returns the full-sample estimate and its standard error.
pub fn jackknife(blocks: &[&[f64]], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let b = blocks[0].len();
    let totals: Vec<f64> = blocks.iter().map(|s| s.iter().sum()).collect();
    let full: Vec<f64> = totals.iter().map(|t| t / b as f64).collect();
    let value = f(&full);
    if b < 2 {
        return (value, 0.0);
    }
    let leave_out: Vec<f64> = (0..b)
        .map(|k| {
            let m: Vec<f64> = blocks
                .iter()
                .zip(&totals)
                .map(|(s, t)| (t - s[k]) / (b - 1) as f64)
                .collect();
            f(&m)
        })
        .collect();
    let centre = mean(&leave_out);
    let ss: f64 = leave_out.iter().map(|x| (x - centre).powi(2)).sum();
    (value, ((b - 1) as f64 / b as f64 * ss).sqrt())
}

/// Empirical frequency of every configuration (indexed by its spin bits,
/// bit `i` set for `σ_i = +1`), sampled after each measured sweep and pooled
/// over chains.
pub fn state_histogram(ctx: &GibbsContext, cfg: &ChainConfig) -> Result<Vec<f64>> {
    let n = ctx.n();
    capacity("state histogram", n, HISTOGRAM_CAP)?;
    if n < 2 {
        return Err(Error::InvalidSize {
            n,
            reason: "sampling needs at least two spins",
        });
    }
    cfg.validate()?;
    let counts: Vec<Vec<u64>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut chain = Chain::new(ctx, cfg.seed, c as u64);
            let mut counts = vec![0u64; 1 << n];
            chain.run(cfg, |ch| counts[ch.bits() as usize] += 1);
            counts
        })
        .collect();
    let mut total = vec![0u64; 1 << n];
    for c in &counts {
        total.iter_mut().zip(c).for_each(|(t, x)| *t += x);
    }
    let sum: u64 = total.iter().sum();
    Ok(total.into_iter().map(|c| c as f64 / sum as f64).collect())
}

/// Energy-density trace of chain `chain` (one value per recorded sample).
pub fn energy_trace(ctx: &GibbsContext, cfg: &ChainConfig, chain: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut c = Chain::new(ctx, cfg.seed, chain as u64);
    let nf = ctx.n() as f64;
    let mut out = Vec::new();
    c.run(cfg, |ch| out.push(ch.energy / nf));
    Ok(out)
}
