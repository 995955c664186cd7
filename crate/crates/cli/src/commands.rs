//! Subcommand implementations. Every command writes its artifacts below
//! `output.directory/output.run_id` and returns the JSON-serialisable result.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stmh::costmodel::{self, CostInputs, Flops};
use stmh::diagnostics::{
    construct_representing_ensemble, energy_and_variance, enumerate_state, ground_space_report, rank_analysis, GroundSpaceReport,
    RankReport,
};
use stmh::linalg::complexify;
use stmh::model::{
    dense_hamiltonian, exact_diagonalize, dimer_states, momentum_states, SectorBasis, DEFAULT_DEGENERACY_TOL,
};
use stmh::nqs::{exact_param_count, EnsembleMode, EnsembleParameters, ParamCount};
use stmh::sampler::SamplingMode;
use stmh::trainer::{train, train_with, Estimator, TrainOutcome};
use stmh::C64;

use crate::config::{RunConfig, SweepKind, TargetFamily};
use crate::CliError;

fn runtime<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(runtime(dir))?;
    }
    fs::write(path, text).map_err(runtime(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime(path))?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdReport {
    pub n_sites: usize,
    pub j1: f64,
    pub j2: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub g: usize,
    pub eigenvalues: Vec<f64>,
    /// Basis configurations as `u`/`d` strings, in vector order.
    pub basis: Vec<String>,
    pub ground_vectors: Vec<Vec<f64>>,
    /// `max |H psi - E0 psi|` over the two momentum states, at the dimer point only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum_residual: Option<f64>,
}

pub fn cmd_ed(cfg: &RunConfig) -> Result<EdReport, CliError> {
    let spec = cfg.spec()?;
    let basis = SectorBasis::new(spec.n_sites)?;
    let h = dense_hamiltonian(&spec, &basis)?;
    let spectrum = exact_diagonalize(&h, DEFAULT_DEGENERACY_TOL)?;
    let e0 = spectrum.ground_energy();
    let momentum_residual = spec.is_majumdar_ghosh().then(|| {
        let (p, m) = momentum_states(&basis);
        [p, m].iter().map(|v| (&h * v - v * e0).amax()).fold(0.0, f64::max)
    });
    let report = EdReport {
        n_sites: spec.n_sites,
        j1: spec.j1,
        j2: spec.j2,
        e0,
        g: spectrum.degeneracy,
        eigenvalues: spectrum.eigenvalues.clone(),
        basis: basis.configs().iter().map(|x| x.bitstring()).collect(),
        ground_vectors: spectrum.ground_block().column_iter().map(|c| c.iter().copied().collect()).collect(),
        momentum_residual,
    };
    write_json(&cfg.run_dir().join("ed.json"), &report)?;
    Ok(report)
}

pub fn initial_ensemble(cfg: &RunConfig, mode: EnsembleMode, heads: usize, width: usize, seed: u64) -> Result<EnsembleParameters, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(EnsembleParameters::random(mode, cfg.model.n_sites, width, heads, &mut rng)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub directory: PathBuf,
    pub aborted: Option<String>,
    pub clamp_events: usize,
    pub report: GroundSpaceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub run_id: String,
    pub mode: EnsembleMode,
    pub heads: usize,
    pub width: usize,
    pub num_params: usize,
    pub param_count: ParamCount,
    pub seeds: Vec<SeedSummary>,
    pub mean_e_bar: f64,
    pub worst_f_min: f64,
    pub worst_max_var: f64,
    pub worst_frob_dev: f64,
}

impl TrainSummary {
    pub fn aborted(&self) -> Vec<(u64, &str)> {
        self.seeds.iter().filter_map(|s| s.aborted.as_deref().map(|m| (s.seed, m))).collect()
    }
}

fn train_seed(cfg: &RunConfig, seed: u64) -> Result<SeedSummary, CliError> {
    let spec = cfg.spec()?;
    let e = &cfg.ensemble;
    let init = initial_ensemble(cfg, e.mode, e.heads, e.width, seed)?;
    let TrainOutcome { params, trace, aborted, clamp_events } = train(&cfg.train_config(seed), &spec, init)?;
    if let Some(msg) = &aborted {
        log::error!("seed {seed}: training aborted: {msg}");
    }
    let dir = cfg.run_dir().join(format!("seed-{seed}"));
    let mut seed_cfg = RunConfig { seeds: vec![seed], ..cfg.clone() };
    seed_cfg.sampler.seed = seed;
    write_json(&dir.join("config.json"), &seed_cfg)?;
    write_text(&dir.join("trace.csv"), &trace.to_csv())?;
    let ck = dir.join("checkpoint.json");
    fs::create_dir_all(&dir).map_err(runtime(&dir))?;
    params.save(&ck).map_err(runtime(&ck))?;
    let report = ground_space_report(&params, &spec)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(SeedSummary { seed, directory: dir, aborted, clamp_events, report })
}

/// Trains every seed concurrently, each into `run_dir/seed-<seed>`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let results: Vec<Result<SeedSummary, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg.seeds.iter().map(|&seed| s.spawn(move || train_seed(cfg, seed))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Runtime("training thread panicked".into()))))
            .collect()
    });
    let seeds = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let e = &cfg.ensemble;
    let n = seeds.len() as f64;
    let summary = TrainSummary {
        run_id: cfg.output.run_id.clone(),
        mode: e.mode,
        heads: e.heads,
        width: e.width,
        num_params: exact_param_count(cfg.model.n_sites, e.width, e.heads, e.mode).exact,
        param_count: exact_param_count(cfg.model.n_sites, e.width, e.heads, e.mode),
        mean_e_bar: seeds.iter().map(|s| s.report.e_bar).sum::<f64>() / n,
        worst_f_min: seeds.iter().map(|s| s.report.f_min).fold(f64::INFINITY, f64::min),
        worst_max_var: seeds.iter().map(|s| s.report.max_var).fold(f64::NEG_INFINITY, f64::max),
        worst_frob_dev: seeds.iter().map(|s| s.report.frob_dev).fold(f64::NEG_INFINITY, f64::max),
        seeds,
    };
    write_json(&cfg.run_dir().join("config.json"), cfg)?;
    write_json(&cfg.run_dir().join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_diagnose(cfg: &RunConfig, checkpoint: &Path) -> Result<GroundSpaceReport, CliError> {
    let spec = cfg.spec()?;
    let ens = EnsembleParameters::load(checkpoint).map_err(|e| match e {
        stmh::Error::Checkpoint(m) => CliError::Runtime(m),
        other => CliError::Validation(format!("{}: {other}", checkpoint.display())),
    })?;
    if ens.n_sites() != spec.n_sites {
        return Err(CliError::Validation(format!(
            "checkpoint {} has {} sites (width {}, {} heads) but the configuration has {} sites",
            checkpoint.display(),
            ens.n_sites(),
            ens.width(),
            ens.n_heads(),
            spec.n_sites
        )));
    }
    let report = ground_space_report(&ens, &spec)?;
    write_json(&cfg.run_dir().join("diagnose.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub sweep: SweepKind,
    pub mode: EnsembleMode,
    pub k: usize,
    pub h: usize,
    pub params_measured: usize,
    pub params_theory: usize,
    pub seconds_per_iter: f64,
    pub max_abs_energy_error: f64,
}

pub const BENCH_CSV_HEADER: &str =
    "sweep,mode,k,h,params_measured,params_theory,seconds_per_iter,max_abs_energy_error";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{BENCH_CSV_HEADER}\n");
    for r in rows {
        let sweep = match r.sweep {
            SweepKind::K => "k",
            SweepKind::H => "h",
        };
        writeln!(
            out,
            "{sweep},{},{},{},{},{},{},{}",
            r.mode.label(),
            r.k,
            r.h,
            r.params_measured,
            r.params_theory,
            r.seconds_per_iter,
            r.max_abs_energy_error
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSlope {
    pub mode: EnsembleMode,
    /// Least-squares slope of seconds per iteration against the swept value.
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub slopes: Vec<BenchSlope>,
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Seconds per iteration (mean over repeats, warmup discarded) and the
/// final exact energy error for one sweep point. Both modes draw from the
/// shared mixture sampler so the sampler cost is the same.
fn bench_point(cfg: &RunConfig, mode: EnsembleMode, k: usize, h: usize) -> Result<(f64, f64), CliError> {
    let b = cfg.bench.as_ref().expect("bench section checked by caller");
    let spec = cfg.spec()?;
    let basis = SectorBasis::new(spec.n_sites)?;
    let ham = dense_hamiltonian(&spec, &basis)?;
    let e0 = exact_diagonalize(&ham, DEFAULT_DEGENERACY_TOL)?.ground_energy();
    let mut times = Vec::new();
    let mut err = 0.0;
    for r in 0..b.repeats {
        let seed = cfg.seeds[0] + r as u64;
        let mut tc = cfg.train_config(seed);
        tc.steps = b.warmup + b.steps;
        tc.estimator = Estimator::MonteCarlo;
        tc.sampler.mode = SamplingMode::Mixture;
        tc.head_weights = None;
        let init = initial_ensemble(cfg, mode, k, h, seed)?;
        let mut step_times = Vec::with_capacity(b.steps);
        let out = train_with(&tc, &spec, init, |rec| {
            if rec.step >= b.warmup {
                step_times.push(rec.seconds);
            }
        })?;
        if let Some(msg) = out.aborted {
            return Err(CliError::Runtime(format!("bench run aborted: {msg}")));
        }
        times.push(step_times.iter().sum::<f64>() / step_times.len() as f64);
        err = (0..k)
            .map(|j| -> Result<f64, CliError> {
                let s = enumerate_state(&out.params, j, &basis)?;
                let (e, _) = energy_and_variance(&s, &ham);
                Ok((e - e0).abs())
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
    }
    Ok((times.iter().sum::<f64>() / times.len() as f64, err))
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchOutput, CliError> {
    let b = cfg.bench.as_ref().ok_or_else(|| CliError::Validation("bench needs a bench section".into()))?;
    let n = cfg.model.n_sites;
    let mut rows = Vec::new();
    for &v in &b.values {
        let (k, h) = match b.sweep {
            SweepKind::K => (v, cfg.ensemble.width),
            SweepKind::H => (cfg.ensemble.heads, v),
        };
        for &mode in &b.modes {
            let (seconds_per_iter, max_abs_energy_error) = bench_point(cfg, mode, k, h)?;
            let measured = initial_ensemble(cfg, mode, k, h, cfg.seeds[0])?.num_params();
            rows.push(BenchRow {
                sweep: b.sweep,
                mode,
                k,
                h,
                params_measured: measured,
                params_theory: exact_param_count(n, h, k, mode).theory,
                seconds_per_iter,
                max_abs_energy_error,
            });
            log::info!("bench {} k={k} h={h}: {seconds_per_iter:.3e} s/iter", mode.label());
        }
    }
    let slopes = b
        .modes
        .iter()
        .map(|&mode| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.mode == mode)
                .map(|r| (if b.sweep == SweepKind::K { r.k } else { r.h } as f64, r.seconds_per_iter))
                .unzip();
            BenchSlope { mode, slope: least_squares_slope(&x, &y) }
        })
        .collect();
    let out = BenchOutput { rows, slopes };
    write_text(&cfg.run_dir().join("bench.csv"), &bench_csv(&out.rows))?;
    write_json(&cfg.run_dir().join("bench_summary.json"), &out.slopes)?;
    Ok(out)
}

/// Target states for rank analysis, written as JSON arrays of `[re, im]`
/// pairs in basis order (ascending bit pattern, bit `i` set for an up spin
/// on site `i`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub n_sites: usize,
    pub states: Vec<Vec<[f64; 2]>>,
}

pub fn target_states(cfg: &RunConfig, family: TargetFamily, path: Option<&Path>) -> Result<Vec<DVector<C64>>, CliError> {
    let spec = cfg.spec()?;
    let basis = SectorBasis::new(spec.n_sites)?;
    Ok(match family {
        TargetFamily::MgMomentum => {
            let (p, m) = momentum_states(&basis);
            vec![complexify(&p), complexify(&m)]
        }
        TargetFamily::MgDimer => {
            let (a, b) = dimer_states(&basis);
            vec![complexify(&a), complexify(&b)]
        }
        TargetFamily::MgRotated => {
            let (p, m) = momentum_states(&basis);
            let (p, m) = (complexify(&p), complexify(&m));
            let i = C64::new(0.0, 1.0);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![(&p + &m * i) * C64::from(s), (&p - &m * i) * C64::from(s)]
        }
        TargetFamily::EdGround => {
            let spectrum = exact_diagonalize(&dense_hamiltonian(&spec, &basis)?, DEFAULT_DEGENERACY_TOL)?;
            spectrum.ground_block().column_iter().map(|c| complexify(&c.into_owned())).collect()
        }
        TargetFamily::File => {
            let path = path.ok_or_else(|| CliError::Validation("file family needs a path".into()))?;
            let text = fs::read_to_string(path).map_err(runtime(path))?;
            let file: StateFile =
                serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            if file.n_sites != spec.n_sites || file.states.iter().any(|s| s.len() != basis.len()) {
                return Err(CliError::Validation(format!(
                    "{}: expected states of length {} over {} sites",
                    path.display(),
                    basis.len(),
                    spec.n_sites
                )));
            }
            file.states
                .iter()
                .map(|s| DVector::from_iterator(s.len(), s.iter().map(|[re, im]| C64::new(*re, *im))))
                .collect()
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOutput {
    pub family: TargetFamily,
    pub n_sites: usize,
    pub report: RankReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

pub fn cmd_rank(cfg: &RunConfig) -> Result<RankOutput, CliError> {
    let r = cfg.rank.as_ref().ok_or_else(|| CliError::Validation("rank needs a rank section".into()))?;
    let basis = SectorBasis::new(cfg.model.n_sites)?;
    let targets = target_states(cfg, r.family, r.path.as_deref())?;
    let report = rank_analysis(&targets, &basis, r.rank_tol)?;
    let checkpoint = match r.construct_width {
        Some(width) => {
            let ens = construct_representing_ensemble(&targets, &basis, width)?;
            let path = cfg.run_dir().join("representation.json");
            fs::create_dir_all(cfg.run_dir()).map_err(runtime(&cfg.run_dir()))?;
            ens.save(&path).map_err(runtime(&path))?;
            Some(path)
        }
        None => None,
    };
    let out = RankOutput { family: r.family, n_sites: cfg.model.n_sites, report, checkpoint };
    write_json(&cfg.run_dir().join("rank.json"), &out)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostOutput {
    pub n: usize,
    pub k: usize,
    pub h_m: usize,
    pub n_mc: usize,
    pub penalty_constant: f64,
    pub h_s_star: f64,
    /// Slowdown at equal widths `h_s = h_m`.
    pub slowdown_equal_width: f64,
    pub trunk_dominated: bool,
    /// Per-step estimates at `h_s = h_m`.
    pub flops_equal_width: Flops,
    pub stmh_trunk_only: f64,
    pub mtmh_trunk_only: f64,
}

pub fn cmd_cost(cfg: &RunConfig) -> Result<CostOutput, CliError> {
    let n = cfg.model.n_sites;
    let k = cfg.ensemble.heads;
    let h_m = cfg.cost.as_ref().and_then(|c| c.h_m).unwrap_or(cfg.ensemble.width);
    let c = cfg.cost.as_ref().map_or(1.0, |c| c.penalty_constant);
    let widths: Vec<f64> = match &cfg.cost {
        Some(c) => c.h_s_values.clone(),
        None => (1..=2 * h_m).map(|h| h as f64).collect(),
    };
    let (nf, kf, hf) = (n as f64, k as f64, h_m as f64);
    let inputs = CostInputs { n: nf, k: kf, h_s: hf, h_m: hf, n_mc: cfg.sampler.n_samples as f64 };
    let out = CostOutput {
        n,
        k,
        h_m,
        n_mc: cfg.sampler.n_samples,
        penalty_constant: c,
        h_s_star: costmodel::threshold_width(nf, kf, hf),
        slowdown_equal_width: costmodel::slowdown(hf, nf, kf, hf),
        trunk_dominated: costmodel::trunk_dominates(nf, kf, hf),
        flops_equal_width: costmodel::flops(&inputs, c),
        stmh_trunk_only: costmodel::stmh_trunk_dominated(&inputs),
        mtmh_trunk_only: costmodel::mtmh_trunk_dominated(&inputs),
    };
    let mut csv = String::from("h_s,R\n");
    for p in costmodel::slowdown_sweep(nf, kf, hf, &widths) {
        writeln!(csv, "{},{}", p.h_s, p.r).unwrap();
    }
    write_text(&cfg.run_dir().join("cost.csv"), &csv)?;
    write_json(&cfg.run_dir().join("cost.json"), &out)?;
    Ok(out)
}
