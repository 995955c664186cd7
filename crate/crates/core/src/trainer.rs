//! Estimators, penalised cost, gradient assembly and the Adam training loop.
//!
//! The cost for head weights `w` and penalty strength `lambda` is
//!
//! ```text
//! C = sum_k w_k E_k + lambda * P(sigma),   sigma_kl = sum_i w_{k,i} exp(ln psi_l(x_i) - ln psi_k(x_i))
//! ```
//!
//! with `P = ||sigma - I||_F^2` (the diagonal of `sigma` is identically one)
//! or, optionally, `P = 1/2 sum_{k != l} |sigma_kl|^2`.
//!
//! The gradient is assembled from per-sample real coefficients `(c_re, c_im)`
//! for every head: the derivative of the cost is `sum_i c_re Re O + c_im Im O`
//! with `O = d ln psi_k(x_i)`. Head parameters are updated directly, and each
//! trunk receives one vector-Jacobian product per sample with cotangent
//! `sum_k c_re alpha_k + c_im phi_k` over the heads it feeds.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::tolerance_band_from_log_psi;
use crate::model::{connected_elements, HamiltonianSpec, SectorBasis, SpinConfig};
use crate::nqs::EnsembleParameters;
use crate::sampler::{exact_batch, sample, SampleBatch, SamplerConfig};
use crate::{Error, Result, C64};

/// Log-ratios are clamped to this magnitude before exponentiation.
pub const LOG_RATIO_CLAMP: f64 = 50.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    #[default]
    MonteCarlo,
    /// Exact sums over the enumerated sector with Born weights.
    FullSum,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyForm {
    /// `||sigma - I||_F^2`.
    #[default]
    Frobenius,
    /// `1/2 sum_{k != l} |sigma_kl|^2`.
    OffDiagonalHalf,
}

impl PenaltyForm {
    fn scale(self) -> f64 {
        match self {
            PenaltyForm::Frobenius => 1.0,
            PenaltyForm::OffDiagonalHalf => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub lambda_start: f64,
    pub lambda_final: f64,
    pub anneal_steps: usize,
    /// Defaults to uniform `1/K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_weights: Option<Vec<f64>>,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub penalty: PenaltyForm,
}

impl TrainConfig {
    pub fn validate(&self, heads: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.lambda_start > 0.0 && self.lambda_start.is_finite()) {
            return Err(Error::Config("lambda_start must be positive".into()));
        }
        if !(self.lambda_final >= 0.0 && self.lambda_final.is_finite()) {
            return Err(Error::Config("lambda_final must be non-negative".into()));
        }
        if let Some(w) = &self.head_weights {
            if w.len() != heads {
                return Err(Error::Config(format!("{} head weights for {heads} heads", w.len())));
            }
            if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::Config("head weights must be non-negative and sum to 1".into()));
            }
        }
        if self.estimator == Estimator::MonteCarlo {
            self.sampler.validate()?;
        }
        Ok(())
    }

    pub fn weights(&self, heads: usize) -> Vec<f64> {
        self.head_weights.clone().unwrap_or_else(|| vec![1.0 / heads as f64; heads])
    }
}

/// Linear anneal from `lambda_start` to `lambda_final`, constant afterwards.
pub fn lambda_schedule(step: usize, cfg: &TrainConfig) -> f64 {
    if cfg.anneal_steps == 0 || step >= cfg.anneal_steps {
        return cfg.lambda_final;
    }
    let t = step as f64 / cfg.anneal_steps as f64;
    cfg.lambda_start + t * (cfg.lambda_final - cfg.lambda_start)
}

/// `exp(ll - lk)` with the real part of the exponent clamped; zero where
/// head `l` vanishes.
pub fn overlap_ratio(lk: C64, ll: C64, clamp_events: &mut usize) -> C64 {
    if ll.re == f64::NEG_INFINITY {
        return C64::new(0.0, 0.0);
    }
    let mut d = ll - lk;
    if d.re.abs() > LOG_RATIO_CLAMP {
        *clamp_events += 1;
        log::debug!("log-ratio {} clamped", d.re);
        d.re = d.re.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP);
    }
    d.exp()
}

/// `E_loc(x) = sum_y H_xy psi_k(y) / psi_k(x)`.
pub fn local_energy(ens: &EnsembleParameters, k: usize, x: SpinConfig, spec: &HamiltonianSpec) -> Result<C64> {
    let lx = ens.log_psi(k, x);
    if lx.re == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("head {k} vanishes at {x}")));
    }
    Ok(connected_elements(x, spec)?
        .into_iter()
        .map(|(y, h)| {
            let ly = ens.log_psi(k, y);
            if ly.re == f64::NEG_INFINITY {
                C64::new(0.0, 0.0)
            } else {
                h * (ly - lx).exp()
            }
        })
        .sum())
}

/// Log-amplitudes and local energies at every distinct configuration of a batch.
pub struct BatchEvaluation {
    heads: usize,
    slot: Vec<usize>,
    log_psi: Vec<Vec<C64>>,
    local_energy: Vec<Vec<C64>>,
    /// `(sample, head)` pairs where the head vanishes at the sample.
    pub vanishing_events: usize,
}

impl BatchEvaluation {
    pub fn new(ens: &EnsembleParameters, batch: &SampleBatch, spec: &HamiltonianSpec) -> Result<Self> {
        let heads = ens.n_heads();
        let mut amp: HashMap<u32, Vec<C64>> = HashMap::new();
        let mut index: HashMap<u32, usize> = HashMap::new();
        let mut log_psi = Vec::new();
        let mut local = Vec::new();
        let mut slot = Vec::with_capacity(batch.len());
        let mut vanishing_events = 0;
        for &x in &batch.configs {
            if let Some(&s) = index.get(&x.bits()) {
                slot.push(s);
                continue;
            }
            let lx = amp.entry(x.bits()).or_insert_with(|| ens.log_psi_all(x)).clone();
            let conn = connected_elements(x, spec)?;
            let mut e = vec![C64::new(0.0, 0.0); heads];
            for (y, h) in conn {
                let ly = amp.entry(y.bits()).or_insert_with(|| ens.log_psi_all(y));
                for k in 0..heads {
                    if ly[k].re != f64::NEG_INFINITY {
                        e[k] += h * (ly[k] - lx[k]).exp();
                    }
                }
            }
            for k in 0..heads {
                if lx[k].re == f64::NEG_INFINITY {
                    e[k] = C64::new(f64::NAN, f64::NAN);
                }
            }
            index.insert(x.bits(), log_psi.len());
            slot.push(log_psi.len());
            log_psi.push(lx);
            local.push(e);
        }
        for (i, &s) in slot.iter().enumerate() {
            for k in 0..heads.min(batch.n_heads()) {
                if log_psi[s][k].re == f64::NEG_INFINITY {
                    vanishing_events += 1;
                    if batch.weights[k][i] != 0.0 {
                        return Err(Error::Sampler(format!("nonzero weight on a zero of head {k}")));
                    }
                }
            }
        }
        if vanishing_events > 0 {
            log::debug!("{vanishing_events} samples fall outside a head's support");
        }
        Ok(Self { heads, slot, log_psi, local_energy: local, vanishing_events })
    }

    pub fn n_heads(&self) -> usize {
        self.heads
    }

    pub fn log_psi(&self, i: usize) -> &[C64] {
        &self.log_psi[self.slot[i]]
    }

    pub fn local_energies(&self, i: usize) -> &[C64] {
        &self.local_energy[self.slot[i]]
    }

    /// Per-sample log-amplitudes expanded to batch order.
    pub fn sample_log_psi(&self) -> Vec<Vec<C64>> {
        self.slot.iter().map(|&s| self.log_psi[s].clone()).collect()
    }
}

/// Weighted energy estimate of one head.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyEstimate {
    /// `sum_i w_i Re E_loc(x_i)`.
    pub energy: f64,
    /// `sum_i w_i Im E_loc(x_i)`; zero in expectation.
    pub imaginary: f64,
    /// `sum_i w_i |E_loc(x_i) - E|^2`.
    pub variance: f64,
}

/// Estimates shared by the cost and its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimates {
    pub energies: Vec<EnergyEstimate>,
    pub overlaps: DMatrix<C64>,
    pub clamp_events: usize,
}

impl Estimates {
    pub fn compute(eval: &BatchEvaluation, batch: &SampleBatch) -> Self {
        let k_heads = eval.n_heads();
        let mut energies = Vec::with_capacity(k_heads);
        for k in 0..k_heads {
            let row = &batch.weights[k];
            let mut e = C64::new(0.0, 0.0);
            for (i, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    e += w * eval.local_energies(i)[k];
                }
            }
            let mut var = 0.0;
            for (i, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    var += w * (eval.local_energies(i)[k] - e).norm_sqr();
                }
            }
            energies.push(EnergyEstimate { energy: e.re, imaginary: e.im, variance: var });
        }
        let mut clamp_events = 0;
        let mut overlaps = DMatrix::from_element(k_heads, k_heads, C64::new(0.0, 0.0));
        for k in 0..k_heads {
            overlaps[(k, k)] = C64::new(1.0, 0.0);
            for l in (0..k_heads).filter(|&l| l != k) {
                let mut s = C64::new(0.0, 0.0);
                for (i, &w) in batch.weights[k].iter().enumerate() {
                    if w != 0.0 {
                        let lp = eval.log_psi(i);
                        s += w * overlap_ratio(lp[k], lp[l], &mut clamp_events);
                    }
                }
                overlaps[(k, l)] = s;
            }
        }
        Self { energies, overlaps, clamp_events }
    }

    pub fn energy_values(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e.energy).collect()
    }
}

pub fn estimate_energy(
    ens: &EnsembleParameters,
    k: usize,
    batch: &SampleBatch,
    spec: &HamiltonianSpec,
) -> Result<EnergyEstimate> {
    let eval = BatchEvaluation::new(ens, batch, spec)?;
    Ok(Estimates::compute(&eval, batch).energies[k])
}

/// The overlap surrogate `sigma_kl = sum_i w_{k,i} psi_l(x_i)/psi_k(x_i)`.
pub fn estimate_overlaps(ens: &EnsembleParameters, batch: &SampleBatch) -> DMatrix<C64> {
    let k_heads = ens.n_heads();
    let mut events = 0;
    let logs: Vec<Vec<C64>> = batch.configs.iter().map(|&x| ens.log_psi_all(x)).collect();
    DMatrix::from_fn(k_heads, k_heads, |k, l| {
        if k == l {
            return C64::new(1.0, 0.0);
        }
        batch.weights[k]
            .iter()
            .zip(&logs)
            .filter(|(w, _)| **w != 0.0)
            .map(|(w, lp)| *w * overlap_ratio(lp[k], lp[l], &mut events))
            .sum()
    })
}

/// `||sigma - I||_F^2`.
pub fn penalty(sigma: &DMatrix<C64>) -> f64 {
    let mut p = 0.0;
    for k in 0..sigma.nrows() {
        for l in 0..sigma.ncols() {
            let target = if k == l { 1.0 } else { 0.0 };
            p += (sigma[(k, l)] - target).norm_sqr();
        }
    }
    p
}

pub fn penalty_with(sigma: &DMatrix<C64>, form: PenaltyForm) -> f64 {
    match form {
        PenaltyForm::Frobenius => penalty(sigma),
        PenaltyForm::OffDiagonalHalf => {
            let mut p = 0.0;
            for k in 0..sigma.nrows() {
                for l in (0..sigma.ncols()).filter(|&l| l != k) {
                    p += sigma[(k, l)].norm_sqr();
                }
            }
            0.5 * p
        }
    }
}

/// Gradient plus the quantities it was built from.
#[derive(Clone, Debug)]
pub struct GradientResult {
    pub grad: Vec<f64>,
    pub estimates: Estimates,
    pub penalty: f64,
    pub cost: f64,
}

/// Cost and gradient of the penalised objective on a batch.
pub fn assemble_gradient(
    ens: &EnsembleParameters,
    batch: &SampleBatch,
    eval: &BatchEvaluation,
    lambda: f64,
    head_weights: &[f64],
    form: PenaltyForm,
) -> Result<GradientResult> {
    let k_heads = ens.n_heads();
    if batch.n_heads() != k_heads || head_weights.len() != k_heads {
        return Err(Error::Dimension {
            expected: format!("{k_heads} heads"),
            found: format!("batch with {} rows, {} head weights", batch.n_heads(), head_weights.len()),
        });
    }
    let est = Estimates::compute(eval, batch);
    let sigma = &est.overlaps;
    let pen = penalty_with(sigma, form);
    let cost = head_weights.iter().zip(&est.energies).map(|(w, e)| w * e.energy).sum::<f64>() + lambda * pen;
    let pl = 2.0 * lambda * form.scale();

    let layout = ens.layout();
    let width = ens.width();
    let mut grad = vec![0.0; layout.total];
    let mut c_re = vec![0.0; k_heads];
    let mut c_im = vec![0.0; k_heads];
    let mut u = vec![0.0; width];
    let mut clamp_events = 0;

    for (i, &x) in batch.configs.iter().enumerate() {
        c_re.iter_mut().for_each(|c| *c = 0.0);
        c_im.iter_mut().for_each(|c| *c = 0.0);
        let lp = eval.log_psi(i);
        let el = eval.local_energies(i);
        let mut active = false;
        for k in 0..k_heads {
            let w = batch.weights[k][i];
            if w == 0.0 {
                continue;
            }
            active = true;
            let d = el[k] - est.energies[k].energy;
            c_re[k] += 2.0 * w * head_weights[k] * d.re;
            c_im[k] += 2.0 * w * head_weights[k] * d.im;
            if lambda == 0.0 {
                continue;
            }
            for l in (0..k_heads).filter(|&l| l != k) {
                let s = sigma[(k, l)];
                c_re[k] -= 2.0 * pl * w * s.norm_sqr();
                let r = overlap_ratio(lp[k], lp[l], &mut clamp_events);
                if r == C64::new(0.0, 0.0) {
                    continue;
                }
                let big_w = s.conj() * r;
                c_re[k] += pl * w * big_w.re;
                c_im[k] += pl * w * big_w.im;
                c_re[l] += pl * w * big_w.re;
                c_im[l] -= pl * w * big_w.im;
            }
        }
        if !active {
            continue;
        }
        let evald = ens.evaluate(x);
        for (t, cache) in evald.caches.iter().enumerate() {
            let Some(cache) = cache else { continue };
            let f = &cache.features;
            u.iter_mut().for_each(|v| *v = 0.0);
            let mut any = false;
            for k in (0..k_heads).filter(|&k| ens.trunk_of(k) == t) {
                if c_re[k] == 0.0 && c_im[k] == 0.0 {
                    continue;
                }
                any = true;
                let head = &ens.heads()[k];
                let at = layout.head_offsets[k];
                let g = &mut grad[at..at + layout.head_size];
                for j in 0..width {
                    g[j] += c_re[k] * f[j];
                    g[width + j] += c_im[k] * f[j];
                    u[j] += c_re[k] * head.alpha[j] + c_im[k] * head.phi[j];
                }
                g[2 * width] += c_re[k];
                g[2 * width + 1] += c_im[k];
            }
            if any {
                let at = layout.trunk_offsets[t];
                ens.trunks()[t].vjp_into(x, cache, &u, &mut grad[at..at + layout.trunk_sizes[t]]);
            }
        }
    }
    if let Some(p) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {p}")));
    }
    Ok(GradientResult { grad, estimates: est, penalty: pen, cost })
}

/// Exact cost on the enumerated sector.
pub fn full_sum_cost(
    ens: &EnsembleParameters,
    spec: &HamiltonianSpec,
    basis: &SectorBasis,
    lambda: f64,
    head_weights: &[f64],
    form: PenaltyForm,
) -> Result<f64> {
    let batch = exact_batch(ens, basis)?;
    let eval = BatchEvaluation::new(ens, &batch, spec)?;
    let est = Estimates::compute(&eval, &batch);
    Ok(head_weights.iter().zip(&est.energies).map(|(w, e)| w * e.energy).sum::<f64>()
        + lambda * penalty_with(&est.overlaps, form))
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub energies: Vec<f64>,
    pub frob_dev: f64,
    pub lambda: f64,
    pub ess: Vec<f64>,
    pub seconds: f64,
    /// ESS-based tolerance band `tau` for `frob_dev`.
    pub tau: f64,
    /// `frob_dev > 2 tau`.
    pub outside_band: bool,
    /// Some head had an effective sample size below 2.
    pub low_ess: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub heads: usize,
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn csv_header(heads: usize) -> String {
        let mut h = String::from("step");
        (1..=heads).for_each(|k| write!(h, ",E_{k}").unwrap());
        h.push_str(",frob_dev,lambda");
        (1..=heads).for_each(|k| write!(h, ",ess_{k}").unwrap());
        h.push_str(",seconds");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.heads);
        out.push('\n');
        for r in &self.records {
            write!(out, "{}", r.step).unwrap();
            r.energies.iter().for_each(|e| write!(out, ",{e}").unwrap());
            write!(out, ",{},{}", r.frob_dev, r.lambda).unwrap();
            r.ess.iter().for_each(|e| write!(out, ",{e}").unwrap());
            writeln!(out, ",{}", r.seconds).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: EnsembleParameters,
    pub trace: TrainTrace,
    /// Set when training stopped early; `params` are the last finite ones.
    pub aborted: Option<String>,
    pub clamp_events: usize,
}

pub fn train(cfg: &TrainConfig, spec: &HamiltonianSpec, init: EnsembleParameters) -> Result<TrainOutcome> {
    train_with(cfg, spec, init, |_| {})
}

/// Training loop; `observer` sees every trace record as it is produced.
pub fn train_with<F: FnMut(&TraceRecord)>(
    cfg: &TrainConfig,
    spec: &HamiltonianSpec,
    init: EnsembleParameters,
    mut observer: F,
) -> Result<TrainOutcome> {
    let k_heads = init.n_heads();
    cfg.validate(k_heads)?;
    if init.n_sites() != spec.n_sites {
        return Err(Error::Dimension {
            expected: format!("{} sites", spec.n_sites),
            found: format!("ensemble over {} sites", init.n_sites()),
        });
    }
    let weights = cfg.weights(k_heads);
    let basis = match cfg.estimator {
        Estimator::FullSum => Some(SectorBasis::new(spec.n_sites)?),
        Estimator::MonteCarlo => None,
    };
    let mut ens = init;
    let mut flat = ens.to_flat();
    let mut adam = Adam::new(flat.len());
    let mut trace = TrainTrace { heads: k_heads, records: Vec::with_capacity(cfg.steps) };
    let mut clamp_events = 0;
    let mut aborted = None;

    for step in 0..cfg.steps {
        let start = Instant::now();
        let lambda = lambda_schedule(step, cfg);
        let batch = match &basis {
            Some(b) => exact_batch(&ens, b)?,
            None => sample(&ens, &cfg.sampler, step as u64)?,
        };
        let eval = BatchEvaluation::new(&ens, &batch, spec)?;
        let result = match assemble_gradient(&ens, &batch, &eval, lambda, &weights, cfg.penalty) {
            Ok(r) if r.cost.is_finite() => r,
            Ok(r) => {
                aborted = Some(format!("non-finite cost {} at step {step}", r.cost));
                break;
            }
            Err(e) => {
                aborted = Some(format!("step {step}: {e}"));
                break;
            }
        };
        clamp_events += result.estimates.clamp_events;
        let frob_dev = penalty(&result.estimates.overlaps).sqrt();
        let tau = tolerance_band_from_log_psi(&batch, &eval.sample_log_psi(), &result.estimates.overlaps);
        adam.step(&mut flat, &result.grad, cfg.learning_rate);
        ens.set_flat(&flat)?;
        let record = TraceRecord {
            step,
            energies: result.estimates.energy_values(),
            frob_dev,
            lambda,
            ess: batch.ess.clone(),
            seconds: start.elapsed().as_secs_f64(),
            tau,
            outside_band: frob_dev > 2.0 * tau,
            low_ess: batch.ess.iter().any(|&e| e < 2.0),
        };
        observer(&record);
        trace.records.push(record);
    }
    if clamp_events > 0 {
        log::info!("{clamp_events} overlap log-ratios were clamped");
    }
    Ok(TrainOutcome { params: ens, trace, aborted, clamp_events })
}
