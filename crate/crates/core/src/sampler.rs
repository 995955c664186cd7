//! Metropolis–Hastings sampling inside the zero-magnetisation sector.
//!
//! Each chain owns an independent ChaCha stream derived from the configured
//! seed and a `round` counter (the trainer passes the optimisation step), so a
//! batch is a pure function of `(ensemble, config, round)`.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{SectorBasis, SpinConfig};
use crate::nqs::EnsembleParameters;
use crate::{Error, Result};

/// Which density the chains target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// One set of chains per head, each targeting `|psi_k|^2`.
    PerHead,
    /// One set of chains targeting `(1/K) sum_m |psi_m|^2` with importance weights.
    Mixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub n_chains: usize,
    /// Sweeps between recorded samples; one sweep is `N` proposals.
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    /// Sweeps discarded at the start of every chain.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: SamplingMode,
}

fn default_sweeps() -> usize {
    5
}

fn default_burn_in() -> usize {
    100
}

fn default_mode() -> SamplingMode {
    SamplingMode::Mixture
}

impl SamplerConfig {
    pub fn new(n_samples: usize, n_chains: usize, seed: u64) -> Self {
        Self {
            n_samples,
            n_chains,
            sweeps: default_sweeps(),
            burn_in: default_burn_in(),
            seed,
            mode: default_mode(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_chains == 0 || self.sweeps == 0 {
            return Err(Error::Config("sampler counts must be positive".into()));
        }
        if !self.n_samples.is_multiple_of(self.n_chains) {
            return Err(Error::Config(format!(
                "n_samples ({}) must be divisible by n_chains ({})",
                self.n_samples, self.n_chains
            )));
        }
        Ok(())
    }

    pub fn samples_per_chain(&self) -> usize {
        self.n_samples / self.n_chains
    }
}

/// Configurations plus per-head normalised importance weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub configs: Vec<SpinConfig>,
    /// `K` rows of length `S`; row `k` sums to one.
    pub weights: Vec<Vec<f64>>,
    pub ess: Vec<f64>,
    /// Log of the unnormalised mixture density at each sample (mixture mode).
    pub log_mix: Option<Vec<f64>>,
    pub acceptance_rate: f64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn n_heads(&self) -> usize {
        self.weights.len()
    }

    /// Checks row normalisation and the ESS range.
    pub fn validate(&self) -> Result<()> {
        let s = self.len() as f64;
        for (row, &e) in self.weights.iter().zip(&self.ess) {
            if row.len() != self.len() {
                return Err(Error::Dimension {
                    expected: format!("{} weights", self.len()),
                    found: format!("{}", row.len()),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Unnormalised(sum));
            }
            if !(1.0 - 1e-9..=s + 1e-9).contains(&e) {
                return Err(Error::Sampler(format!("effective sample size {e} outside [1, {s}]")));
            }
        }
        Ok(())
    }

    /// Writes one bitstring (site 0 last, as in `SpinConfig::bitstring`) per line.
    pub fn write_bitstrings<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for x in &self.configs {
            writeln!(out, "{}", x.bitstring())?;
        }
        Ok(())
    }
}

/// Effective sample size `1 / sum w_i^2` of a normalised weight row.
pub fn ess(row: &[f64]) -> Result<f64> {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-10 || row.iter().any(|&w| w < 0.0) {
        return Err(Error::Unnormalised(sum));
    }
    Ok(1.0 / row.iter().map(|w| w * w).sum::<f64>())
}

/// Swaps a uniformly chosen up-spin with a uniformly chosen down-spin.
pub fn propose_exchange<R: Rng + ?Sized>(x: SpinConfig, rng: &mut R) -> SpinConfig {
    let up = x.up_sites().choose(rng).expect("sector states contain up spins");
    let down = x.down_sites().choose(rng).expect("sector states contain down spins");
    x.swapped(up, down)
}

/// Uniformly random sector configuration.
pub fn random_sector_config<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SpinConfig {
    let sites = rand::seq::index::sample(rng, n, n / 2);
    let bits = sites.iter().fold(0u32, |acc, i| acc | (1 << i));
    SpinConfig::from_bits(n, bits)
}

const MAX_INIT_RETRIES: usize = 10_000;

/// Output of one Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRun {
    pub samples: Vec<SpinConfig>,
    pub accepted: usize,
    pub proposed: usize,
}

impl ChainRun {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Runs one chain recording `n_records` samples, one every `sweeps` sweeps
/// after `burn_in` sweeps. `log_prob` may return `-inf` off the support.
pub fn metropolis_chain<R, F>(
    n_sites: usize,
    n_records: usize,
    sweeps: usize,
    burn_in: usize,
    mut log_prob: F,
    rng: &mut R,
) -> Result<ChainRun>
where
    R: Rng + ?Sized,
    F: FnMut(SpinConfig) -> f64,
{
    let mut x = random_sector_config(n_sites, rng);
    let mut lp = log_prob(x);
    let mut retries = 0;
    while lp == f64::NEG_INFINITY || lp.is_nan() {
        retries += 1;
        if retries > MAX_INIT_RETRIES {
            return Err(Error::Sampler(format!(
                "no supported initial state found after {MAX_INIT_RETRIES} draws"
            )));
        }
        x = random_sector_config(n_sites, rng);
        lp = log_prob(x);
    }

    let mut run = ChainRun { samples: Vec::with_capacity(n_records), accepted: 0, proposed: 0 };
    let mut step = |x: &mut SpinConfig, lp: &mut f64, run: &mut ChainRun| {
        for _ in 0..n_sites {
            let y = propose_exchange(*x, rng);
            let lq = log_prob(y);
            run.proposed += 1;
            let log_ratio = lq - *lp;
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                *x = y;
                *lp = lq;
                run.accepted += 1;
            }
        }
    };
    for _ in 0..burn_in {
        step(&mut x, &mut lp, &mut run);
    }
    for _ in 0..n_records {
        for _ in 0..sweeps {
            step(&mut x, &mut lp, &mut run);
        }
        run.samples.push(x);
    }
    Ok(run)
}

fn chain_rng(seed: u64, round: u64, chain: usize, n_chains: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round.wrapping_mul(n_chains as u64).wrapping_add(chain as u64));
    rng
}

/// Runs all chains for one target and merges them round-robin by chain index.
fn run_chains<F>(n_sites: usize, cfg: &SamplerConfig, round: u64, mut log_prob: F) -> Result<(Vec<SpinConfig>, f64)>
where
    F: FnMut(SpinConfig) -> f64,
{
    cfg.validate()?;
    let per_chain = cfg.samples_per_chain();
    let mut runs = Vec::with_capacity(cfg.n_chains);
    for c in 0..cfg.n_chains {
        let mut rng = chain_rng(cfg.seed, round, c, cfg.n_chains);
        runs.push(metropolis_chain(n_sites, per_chain, cfg.sweeps, cfg.burn_in, &mut log_prob, &mut rng)?);
    }
    let mut configs = Vec::with_capacity(cfg.n_samples);
    for i in 0..per_chain {
        configs.extend(runs.iter().map(|r| r.samples[i]));
    }
    let accepted: usize = runs.iter().map(|r| r.accepted).sum();
    let proposed: usize = runs.iter().map(|r| r.proposed).sum();
    Ok((configs, accepted as f64 / proposed.max(1) as f64))
}

/// Samples an arbitrary log-density with the configured chains.
pub fn sample_target<F>(n_sites: usize, cfg: &SamplerConfig, round: u64, log_prob: F) -> Result<Vec<SpinConfig>>
where
    F: FnMut(SpinConfig) -> f64,
{
    run_chains(n_sites, cfg, round, log_prob).map(|(c, _)| c)
}

fn memoised<F: Fn(SpinConfig) -> f64>(f: F) -> impl FnMut(SpinConfig) -> f64 {
    let mut cache: HashMap<u32, f64> = HashMap::new();
    move |x| *cache.entry(x.bits()).or_insert_with(|| f(x))
}

/// Chains targeting `|psi_k|^2`. The returned batch has a single uniform
/// weight row (the head's own), with `ess = S`.
pub fn sample_per_head(ens: &EnsembleParameters, k: usize, cfg: &SamplerConfig, round: u64) -> Result<SampleBatch> {
    if k >= ens.n_heads() {
        return Err(Error::Config(format!("head {k} out of range for {} heads", ens.n_heads())));
    }
    let (configs, acceptance_rate) =
        run_chains(ens.n_sites(), cfg, round, memoised(|x| 2.0 * ens.log_psi(k, x).re))?;
    let s = configs.len();
    Ok(SampleBatch {
        configs,
        weights: vec![vec![1.0 / s as f64; s]],
        ess: vec![s as f64],
        log_mix: None,
        acceptance_rate,
    })
}

/// Independent per-head chains combined into one batch: head `k`'s samples
/// occupy segment `k` and its weight row is uniform there and zero elsewhere.
pub fn sample_all_heads(ens: &EnsembleParameters, cfg: &SamplerConfig, round: u64) -> Result<SampleBatch> {
    let k_heads = ens.n_heads();
    let mut configs = Vec::with_capacity(k_heads * cfg.n_samples);
    let mut acc = 0.0;
    for k in 0..k_heads {
        let b = sample_per_head(ens, k, cfg, round.wrapping_mul(k_heads as u64).wrapping_add(k as u64))?;
        acc += b.acceptance_rate;
        configs.extend(b.configs);
    }
    let s = cfg.n_samples;
    let weights = (0..k_heads)
        .map(|k| {
            let mut row = vec![0.0; configs.len()];
            row[k * s..(k + 1) * s].iter_mut().for_each(|w| *w = 1.0 / s as f64);
            row
        })
        .collect();
    Ok(SampleBatch {
        configs,
        weights,
        ess: vec![s as f64; k_heads],
        log_mix: None,
        acceptance_rate: acc / k_heads as f64,
    })
}

/// `ln((1/K) sum_m |psi_m|^2)` via log-sum-exp.
pub fn log_mixture(log_psi: &[crate::C64]) -> f64 {
    let terms: Vec<f64> = log_psi.iter().map(|l| 2.0 * l.re).collect();
    log_sum_exp(&terms) - (terms.len() as f64).ln()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalises `exp(log_w)` with max subtraction.
pub fn normalise_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return Err(Error::Underflow);
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Builds the importance-weighted batch for given samples and log-amplitudes.
fn weighted_batch(
    configs: Vec<SpinConfig>,
    log_psi: &[Vec<crate::C64>],
    log_target: Vec<f64>,
    acceptance_rate: f64,
) -> Result<SampleBatch> {
    let k_heads = log_psi.first().map_or(0, Vec::len);
    let mut weights = Vec::with_capacity(k_heads);
    let mut ess_v = Vec::with_capacity(k_heads);
    for k in 0..k_heads {
        let lw: Vec<f64> = log_psi.iter().zip(&log_target).map(|(l, t)| 2.0 * l[k].re - t).collect();
        let row = normalise_log_weights(&lw)?;
        ess_v.push(ess(&row)?);
        weights.push(row);
    }
    Ok(SampleBatch { configs, weights, ess: ess_v, log_mix: Some(log_target), acceptance_rate })
}

/// Chains targeting the uniform mixture of all heads, with self-normalised
/// importance weights `w_k(x) ∝ |psi_k(x)|^2 / q_mix(x)`.
pub fn sample_mixture(ens: &EnsembleParameters, cfg: &SamplerConfig, round: u64) -> Result<SampleBatch> {
    let mut table: HashMap<u32, (Vec<crate::C64>, f64)> = HashMap::new();
    let (configs, acceptance_rate) = run_chains(ens.n_sites(), cfg, round, |x| {
        table
            .entry(x.bits())
            .or_insert_with(|| {
                let l = ens.log_psi_all(x);
                let m = log_mixture(&l);
                (l, m)
            })
            .1
    })?;
    let log_psi: Vec<Vec<crate::C64>> = configs.iter().map(|x| table[&x.bits()].0.clone()).collect();
    let log_mix: Vec<f64> = configs.iter().map(|x| table[&x.bits()].1).collect();
    weighted_batch(configs, &log_psi, log_mix, acceptance_rate)
}

/// Draws a batch in the configured mode.
pub fn sample(ens: &EnsembleParameters, cfg: &SamplerConfig, round: u64) -> Result<SampleBatch> {
    match cfg.mode {
        SamplingMode::Mixture => sample_mixture(ens, cfg, round),
        SamplingMode::PerHead => sample_all_heads(ens, cfg, round),
    }
}

/// The whole sector with exact Born weights `|psi_k(x)|^2 / sum |psi_k|^2`.
pub fn exact_batch(ens: &EnsembleParameters, basis: &SectorBasis) -> Result<SampleBatch> {
    let configs = basis.configs().to_vec();
    let log_psi: Vec<Vec<crate::C64>> = configs.iter().map(|&x| ens.log_psi_all(x)).collect();
    let mut batch = weighted_batch(configs, &log_psi, vec![0.0; basis.len()], 1.0)?;
    batch.log_mix = None;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExactGroundData;
    use crate::nqs::{EnsembleMode, HeadParameters, MlpTrunk, TableTrunk, Trunk};
    use std::collections::BTreeMap;

    fn born_ensemble(states: &[&nalgebra::DVector<f64>], basis: &SectorBasis) -> EnsembleParameters {
        // One table trunk per head with a single feature `ln|psi|` on the support.
        let trunks = states
            .iter()
            .map(|v| {
                let table: BTreeMap<u32, Vec<f64>> = basis
                    .configs()
                    .iter()
                    .zip(v.iter())
                    .filter(|(_, a)| a.abs() > 1e-12)
                    .map(|(x, a)| (x.bits(), vec![a.abs().ln()]))
                    .collect();
                Trunk::Table(TableTrunk::new(basis.n_sites(), 1, table).unwrap())
            })
            .collect();
        let heads = states
            .iter()
            .map(|_| HeadParameters { alpha: vec![1.0], phi: vec![0.0], beta: 0.0, gamma: 0.0 })
            .collect();
        EnsembleParameters::new(EnsembleMode::MultiTrunk, trunks, heads).unwrap()
    }

    #[test]
    fn exchange_reaches_exactly_the_swap_neighbours() {
        let x = SpinConfig::from_spins("↑↓↑↓").unwrap();
        let mut expected: Vec<u32> = x
            .up_sites()
            .flat_map(|u| x.down_sites().map(move |d| x.swapped(u, d).bits()))
            .collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(expected.len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen: Vec<u32> = (0..1000).map(|_| propose_exchange(x, &mut rng).bits()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, expected);
    }

    #[test]
    fn exchange_stays_in_sector() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = SpinConfig::from_spins("↑↑↑↓↓↓↑↓").unwrap();
        for _ in 0..100_000 {
            x = propose_exchange(x, &mut rng);
            assert!(x.in_sector());
        }
    }

    #[test]
    fn exchange_pairs_are_uniform() {
        // Chi-square over the (N/2)^2 swap pairs; N=6 gives 9 pairs, all with
        // distinct outcomes, so outcome counts identify the pair.
        let x = SpinConfig::from_spins("↑↑↑↓↓↓").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 90_000;
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for _ in 0..trials {
            *counts.entry(propose_exchange(x, &mut rng).bits()).or_default() += 1;
        }
        assert_eq!(counts.len(), 9);
        let e = trials as f64 / 9.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 99.9% quantile of chi-square with 8 degrees of freedom.
        assert!(chi2 < 26.12, "chi2 = {chi2}");
    }

    #[test]
    fn constant_target_accepts_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let run = metropolis_chain(6, 100, 5, 10, |_| 0.0, &mut rng).unwrap();
        assert_eq!(run.acceptance_rate(), 1.0);
        assert_eq!(run.samples.len(), 100);
    }

    #[test]
    fn unsupported_target_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(metropolis_chain(4, 10, 1, 1, |_| f64::NEG_INFINITY, &mut rng).is_err());
    }

    #[test]
    fn two_state_target_ratio() {
        let a = SpinConfig::from_spins("↑↓↑↓").unwrap();
        let b = a.swapped(0, 1);
        let lp = move |x: SpinConfig| {
            if x == a {
                0.9f64.ln()
            } else if x == b {
                0.1f64.ln()
            } else {
                f64::NEG_INFINITY
            }
        };
        let cfg = SamplerConfig { n_samples: 40_000, n_chains: 8, sweeps: 2, burn_in: 50, seed: 5, mode: SamplingMode::PerHead };
        let samples = sample_target(4, &cfg, 0, lp).unwrap();
        let na = samples.iter().filter(|&&x| x == a).count() as f64;
        let nb = samples.iter().filter(|&&x| x == b).count() as f64;
        let p = na / (na + nb);
        // Thinned samples are still mildly correlated; inflate the binomial sigma.
        let sigma = (0.9 * 0.1 / (na + nb)).sqrt() * 2.0;
        assert!((p - 0.9).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn born_probabilities_match_for_momentum_states() {
        let basis = SectorBasis::new(4).unwrap();
        let g = ExactGroundData::new(&basis, 1.0);
        for state in [&g.psi_plus, &g.psi_minus] {
            let ens = born_ensemble(&[state], &basis);
            let cfg = SamplerConfig::new(100_000, 8, 11);
            let batch = sample_per_head(&ens, 0, &cfg, 0).unwrap();
            let mut counts = vec![0usize; basis.len()];
            for &x in &batch.configs {
                counts[basis.index_of(x).unwrap()] += 1;
            }
            let tv: f64 = counts
                .iter()
                .zip(state.iter())
                .map(|(&c, a)| (c as f64 / 1e5 - a * a).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.02, "total variation {tv}");
            for &x in &batch.configs {
                assert!(state[basis.index_of(x).unwrap()].abs() > 1e-12);
            }
        }
    }

    #[test]
    fn uniform_ensemble_visits_every_state() {
        let trunk = Trunk::Mlp(MlpTrunk::zeros(6, 2));
        let ens = EnsembleParameters::new(EnsembleMode::SingleTrunk, vec![trunk], vec![HeadParameters::zeros(2)]).unwrap();
        let cfg = SamplerConfig::new(2048, 4, 3);
        let batch = sample_per_head(&ens, 0, &cfg, 0).unwrap();
        let basis = SectorBasis::new(6).unwrap();
        let mut seen: Vec<u32> = batch.configs.iter().map(|x| x.bits()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), basis.len());
        assert_eq!(batch.ess, vec![2048.0]);
        assert_eq!(batch.weights[0].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn single_head_mixture_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ens = EnsembleParameters::random(EnsembleMode::SingleTrunk, 6, 4, 1, &mut rng).unwrap();
        let batch = sample_mixture(&ens, &SamplerConfig::new(256, 8, 1), 0).unwrap();
        assert!(batch.weights[0].iter().all(|&w| (w - 1.0 / 256.0).abs() < 1e-15));
        assert!((batch.ess[0] - 256.0).abs() < 1e-9);
    }

    #[test]
    fn identical_heads_have_flat_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let single = EnsembleParameters::random(EnsembleMode::SingleTrunk, 6, 4, 1, &mut rng).unwrap();
        let head = single.heads()[0].clone();
        let ens = EnsembleParameters::new(EnsembleMode::SingleTrunk, single.trunks().to_vec(), vec![head.clone(), head]).unwrap();
        let batch = sample_mixture(&ens, &SamplerConfig::new(128, 4, 2), 0).unwrap();
        for k in 0..2 {
            assert!((batch.ess[k] - 128.0).abs() < 1e-9);
        }
        batch.validate().unwrap();
    }

    #[test]
    fn disjoint_supports_halve_the_ess() {
        let basis = SectorBasis::new(4).unwrap();
        let mut a = nalgebra::DVector::zeros(basis.len());
        let mut b = nalgebra::DVector::zeros(basis.len());
        for i in 0..basis.len() {
            if i < 3 {
                a[i] = 1.0 / 3f64.sqrt();
            } else {
                b[i] = 1.0 / 3f64.sqrt();
            }
        }
        let ens = born_ensemble(&[&a, &b], &basis);
        let batch = sample_mixture(&ens, &SamplerConfig::new(4000, 8, 9), 0).unwrap();
        batch.validate().unwrap();
        for (k, row) in batch.weights.iter().enumerate() {
            for (x, w) in batch.configs.iter().zip(row) {
                let on = if k == 0 { basis.index_of(*x).unwrap() < 3 } else { basis.index_of(*x).unwrap() >= 3 };
                if !on {
                    assert_eq!(*w, 0.0);
                }
            }
            assert!((batch.ess[k] / 4000.0 - 0.5).abs() < 0.05, "ess {}", batch.ess[k]);
        }
    }

    #[test]
    fn ess_examples() {
        assert!((ess(&vec![1.0 / 512.0; 512]).unwrap() - 512.0).abs() < 1e-9);
        assert_eq!(ess(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(ess(&[0.5, 0.5, 0.0, 0.0]).unwrap(), 2.0);
        assert!(ess(&[0.5, 0.4]).is_err());
    }

    #[test]
    fn batches_are_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ens = EnsembleParameters::random(EnsembleMode::MultiTrunk, 8, 4, 3, &mut rng).unwrap();
        let cfg = SamplerConfig::new(64, 8, 77);
        let a = sample_mixture(&ens, &cfg, 3).unwrap();
        let b = sample_mixture(&ens, &cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_mixture(&ens, &cfg, 4).unwrap();
        assert_ne!(a.configs, c.configs);
    }

    #[test]
    fn per_head_combination_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ens = EnsembleParameters::random(EnsembleMode::SingleTrunk, 4, 3, 2, &mut rng).unwrap();
        let batch = sample_all_heads(&ens, &SamplerConfig::new(40, 4, 1), 0).unwrap();
        assert_eq!(batch.len(), 80);
        batch.validate().unwrap();
        assert_eq!(batch.ess, vec![40.0, 40.0]);
    }

    #[test]
    fn rejects_indivisible_chain_count() {
        assert!(SamplerConfig::new(10, 3, 0).validate().is_err());
        assert!(SamplerConfig::new(0, 1, 0).validate().is_err());
    }

    #[test]
    fn bitstring_dump() {
        let x = SpinConfig::from_spins("↑↓↑↓").unwrap();
        let batch = SampleBatch { configs: vec![x], weights: vec![vec![1.0]], ess: vec![1.0], log_mix: None, acceptance_rate: 1.0 };
        let mut out = Vec::new();
        batch.write_bitstrings(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", x.bitstring()));
    }
}
