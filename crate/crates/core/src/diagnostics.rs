//! Exact post-training analysis by full enumeration of the sector.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{cdot, numerical_rank, singular_values_complex, wrap_phase, DEFAULT_RANK_TOL};
use crate::model::{dense_hamiltonian, exact_diagonalize, HamiltonianSpec, SectorBasis, DEFAULT_DEGENERACY_TOL};
use crate::nqs::{EnsembleMode, EnsembleParameters, HeadParameters, TableTrunk, Trunk};
use crate::sampler::SampleBatch;
use crate::trainer::overlap_ratio;
use crate::{Error, Result, C64};

/// Amplitudes below this fraction of the largest one are treated as zero.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Singular values at or above this count towards the effective dimension.
pub const D_EFF_THRESHOLD: f64 = 0.99;

/// Normalised state vector of head `k` over the sector basis.
pub fn enumerate_state(ens: &EnsembleParameters, k: usize, basis: &SectorBasis) -> Result<DVector<C64>> {
    let logs: Vec<C64> = basis.configs().iter().map(|&x| ens.log_psi(k, x)).collect();
    let m = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Underflow);
    }
    let v = DVector::from_iterator(
        logs.len(),
        logs.iter().map(|l| {
            if l.re == f64::NEG_INFINITY {
                C64::new(0.0, 0.0)
            } else {
                C64::new(l.re - m, l.im).exp()
            }
        }),
    );
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Underflow);
    }
    Ok(v / C64::new(norm, 0.0))
}

/// `<psi|H|psi>` and `<psi|H^2|psi> - <psi|H|psi>^2` for a normalised state.
pub fn energy_and_variance(state: &DVector<C64>, h: &DMatrix<f64>) -> (f64, f64) {
    let hc = h.map(|x| C64::new(x, 0.0));
    let hpsi = &hc * state;
    let e = cdot(state, &hpsi).re;
    let h2 = hpsi.iter().map(|a| a.norm_sqr()).sum::<f64>();
    (e, h2 - e * e)
}

/// Multiplies by a phase that makes the largest-modulus entry real positive.
pub fn align_global_phase(v: &DVector<C64>) -> DVector<C64> {
    let Some((_, top)) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
    else {
        return v.clone();
    };
    if top.norm() == 0.0 {
        return v.clone();
    }
    let phase = top.conj() / top.norm();
    v.map(|a| a * phase)
}

/// Overlaps of trained states with the exact ground space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMetrics {
    /// `||V0^dagger psi_k||^2`.
    pub fidelities: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub sigma_min: f64,
    pub kappa: f64,
    pub d_eff: usize,
}

/// SVD of the `g x K` projection matrix `V0^dagger Psi`.
pub fn projection_metrics(v0: &DMatrix<f64>, psi: &[DVector<C64>]) -> Result<ProjectionMetrics> {
    if v0.ncols() == 0 {
        return Err(Error::Domain("empty ground space".into()));
    }
    if psi.iter().any(|p| p.len() != v0.nrows()) {
        return Err(Error::Dimension {
            expected: format!("states of length {}", v0.nrows()),
            found: "a state of another length".into(),
        });
    }
    let v0c = v0.map(|x| C64::new(x, 0.0));
    let c = DMatrix::from_fn(v0.ncols(), psi.len(), |i, k| cdot(&v0c.column(i).into_owned(), &psi[k]));
    let fidelities = (0..psi.len())
        .map(|k| c.column(k).iter().map(|a| a.norm_sqr()).sum::<f64>())
        .collect();
    let singular_values = singular_values_complex(&c);
    let rank = singular_values.iter().filter(|&&s| s > DEFAULT_RANK_TOL).count();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let sigma_min = singular_values.last().copied().unwrap_or(0.0);
    let kappa = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    let d_eff = singular_values.iter().filter(|&&s| s >= D_EFF_THRESHOLD).count();
    Ok(ProjectionMetrics { fidelities, singular_values, rank, sigma_min, kappa, d_eff })
}

/// `sigma_kl = <psi_k|psi_l>` and `||sigma - I||_F`.
pub fn exact_overlap_matrix(states: &[DVector<C64>]) -> (DMatrix<C64>, f64) {
    let k = states.len();
    let sigma = DMatrix::from_fn(k, k, |a, b| cdot(&states[a], &states[b]));
    let dev = (&sigma - DMatrix::<C64>::identity(k, k)).iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    (sigma, dev)
}

/// Exact ground-space diagnostics of a trained ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundSpaceReport {
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "Ebar")]
    pub e_bar: f64,
    #[serde(rename = "maxVar")]
    pub max_var: f64,
    #[serde(rename = "F_mean")]
    pub f_mean: f64,
    #[serde(rename = "F_min")]
    pub f_min: f64,
    pub rank: usize,
    pub g: usize,
    pub sigma_min: f64,
    pub kappa: f64,
    pub frob_dev: f64,
    pub d_eff: usize,
    #[serde(rename = "K")]
    pub heads: usize,
    pub energies: Vec<f64>,
    pub variances: Vec<f64>,
    pub fidelities: Vec<f64>,
    pub singular_values: Vec<f64>,
}

pub fn ground_space_report(ens: &EnsembleParameters, spec: &HamiltonianSpec) -> Result<GroundSpaceReport> {
    if ens.n_sites() != spec.n_sites {
        return Err(Error::Dimension {
            expected: format!("{} sites", spec.n_sites),
            found: format!("ensemble over {} sites", ens.n_sites()),
        });
    }
    let basis = SectorBasis::new(spec.n_sites)?;
    let h = dense_hamiltonian(spec, &basis)?;
    let spectrum = exact_diagonalize(&h, DEFAULT_DEGENERACY_TOL)?;
    let states = (0..ens.n_heads())
        .map(|k| enumerate_state(ens, k, &basis))
        .collect::<Result<Vec<_>>>()?;
    let (energies, variances): (Vec<f64>, Vec<f64>) = states.iter().map(|s| energy_and_variance(s, &h)).unzip();
    let proj = projection_metrics(&spectrum.ground_block(), &states)?;
    let (_, frob_dev) = exact_overlap_matrix(&states);
    let k = states.len() as f64;
    Ok(GroundSpaceReport {
        e0: spectrum.ground_energy(),
        e_bar: energies.iter().sum::<f64>() / k,
        max_var: variances.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        f_mean: proj.fidelities.iter().sum::<f64>() / k,
        f_min: proj.fidelities.iter().copied().fold(f64::INFINITY, f64::min),
        rank: proj.rank,
        g: spectrum.degeneracy,
        sigma_min: proj.sigma_min,
        kappa: proj.kappa,
        frob_dev,
        d_eff: proj.d_eff,
        heads: states.len(),
        energies,
        variances,
        fidelities: proj.fidelities,
        singular_values: proj.singular_values,
    })
}

/// Linear modulus/phase span ranks of a family of target states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankReport {
    /// Common support as configuration bit patterns, in basis order.
    pub support: Vec<u32>,
    pub support_size: usize,
    pub r_g: usize,
    pub r_omega: usize,
    pub r_both: usize,
    pub h_star: usize,
    pub rank_tol: String,
}

/// Indices of the basis states where every target is nonzero.
pub fn common_support(targets: &[DVector<C64>]) -> Vec<usize> {
    let Some(first) = targets.first() else { return Vec::new() };
    let thresholds: Vec<f64> = targets
        .iter()
        .map(|t| SUPPORT_TOL * t.iter().map(|a| a.norm()).fold(0.0, f64::max))
        .collect();
    (0..first.len())
        .filter(|&i| targets.iter().zip(&thresholds).all(|(t, &th)| t[i].norm() > th && th > 0.0))
        .collect()
}

fn span_columns(targets: &[DVector<C64>], support: &[usize]) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let g = targets
        .iter()
        .map(|t| DVector::from_iterator(support.len(), support.iter().map(|&i| t[i].norm().ln())))
        .collect();
    let omega = targets
        .iter()
        .map(|t| DVector::from_iterator(support.len(), support.iter().map(|&i| wrap_phase(t[i].arg()))))
        .collect();
    (g, omega)
}

fn with_ones(n: usize, cols: &[&DVector<f64>]) -> DMatrix<f64> {
    let mut all = vec![DVector::from_element(n, 1.0)];
    all.extend(cols.iter().map(|c| (*c).clone()));
    DMatrix::from_columns(&all)
}

pub fn rank_analysis(targets: &[DVector<C64>], basis: &SectorBasis, rank_tol: f64) -> Result<RankReport> {
    if targets.is_empty() {
        return Err(Error::Domain("no target states".into()));
    }
    if targets.iter().any(|t| t.len() != basis.len()) {
        return Err(Error::Dimension {
            expected: format!("states of length {}", basis.len()),
            found: "a state of another length".into(),
        });
    }
    let support = common_support(targets);
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let n = support.len();
    let (g, omega) = span_columns(targets, &support);
    let g_refs: Vec<&DVector<f64>> = g.iter().collect();
    let o_refs: Vec<&DVector<f64>> = omega.iter().collect();
    let both: Vec<&DVector<f64>> = g.iter().chain(omega.iter()).collect();
    let r_g = numerical_rank(&with_ones(n, &g_refs), rank_tol);
    let r_omega = numerical_rank(&with_ones(n, &o_refs), rank_tol);
    let r_both = numerical_rank(&with_ones(n, &both), rank_tol);
    Ok(RankReport {
        support: support.iter().map(|&i| basis.get(i).bits()).collect(),
        support_size: n,
        r_g,
        r_omega,
        r_both,
        h_star: r_both - 1,
        rank_tol: format!("{rank_tol:e}"),
    })
}

/// Single-trunk ensemble whose heads reproduce every target on the common
/// support. The trunk is a table over the support whose features are an
/// orthonormal basis of the modulus/phase span orthogonal to the constant
/// vector, padded with zero features up to `width`.
pub fn construct_representing_ensemble(
    targets: &[DVector<C64>],
    basis: &SectorBasis,
    width: usize,
) -> Result<EnsembleParameters> {
    let report = rank_analysis(targets, basis, DEFAULT_RANK_TOL)?;
    if width < report.h_star {
        return Err(Error::Representability { width, r_both: report.r_both });
    }
    let support = common_support(targets);
    let n = support.len();
    let (g, omega) = span_columns(targets, &support);
    let centred: Vec<DVector<f64>> = g.iter().chain(omega.iter()).map(|v| v.add_scalar(-v.mean())).collect();
    let basis_cols = orthonormal_span(&centred, DEFAULT_RANK_TOL);
    if basis_cols.len() != report.h_star {
        log::warn!(
            "span basis has {} columns but the rank analysis found {}",
            basis_cols.len(),
            report.h_star
        );
    }
    if width < basis_cols.len() {
        return Err(Error::Representability { width, r_both: basis_cols.len() + 1 });
    }
    let features = DMatrix::from_fn(n, width, |r, c| basis_cols.get(c).map_or(0.0, |b| b[r]));

    let table: BTreeMap<u32, Vec<f64>> = support
        .iter()
        .enumerate()
        .map(|(r, &i)| (basis.get(i).bits(), features.row(r).iter().copied().collect()))
        .collect();
    let trunk = Trunk::Table(TableTrunk::new(basis.n_sites(), width, table)?);
    let ft = features.transpose();
    let heads = g
        .iter()
        .zip(&omega)
        .map(|(gj, oj)| HeadParameters {
            alpha: (&ft * gj).iter().copied().collect(),
            phi: (&ft * oj).iter().copied().collect(),
            beta: gj.mean(),
            gamma: oj.mean(),
        })
        .collect();
    EnsembleParameters::new(EnsembleMode::SingleTrunk, vec![trunk], heads)
}

/// Orthonormal basis of the span of `cols` by twice-iterated modified
/// Gram-Schmidt; directions shorter than `rel_tol` times the longest input
/// column are dropped.
fn orthonormal_span(cols: &[DVector<f64>], rel_tol: f64) -> Vec<DVector<f64>> {
    let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut out: Vec<DVector<f64>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        for _ in 0..2 {
            for b in &out {
                let p = b.dot(&v);
                v.axpy(-p, b, 1.0);
            }
        }
        let norm = v.norm();
        if scale > 0.0 && norm > rel_tol * scale {
            out.push(v / norm);
        }
    }
    out
}

/// Outcome of the affine rank bound on realised head log-amplitudes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineRankCheck {
    pub rank_modulus: usize,
    pub rank_phase: usize,
    pub rank_both: usize,
    pub bound: usize,
    pub holds: bool,
}

/// Stacks `g_k - g_1` and `omega_k - omega_1` (unwrapped phases) over the
/// support for every head of a single-trunk ensemble and checks that the
/// combined rank is at most `width + 1`.
pub fn affine_rank_bound_check(ens: &EnsembleParameters, support: &[crate::model::SpinConfig]) -> Result<AffineRankCheck> {
    if ens.n_heads() < 2 {
        return Err(Error::Domain("the affine bound needs at least two heads".into()));
    }
    let logs: Vec<Vec<C64>> = support.iter().map(|&x| ens.log_psi_all(x)).collect();
    if logs.iter().flatten().any(|l| !l.re.is_finite()) {
        return Err(Error::Domain("a head vanishes on the given support".into()));
    }
    let n = support.len();
    let diff = |part: fn(&C64) -> f64, k: usize| DVector::from_iterator(n, logs.iter().map(|l| part(&l[k]) - part(&l[0])));
    let gm: Vec<DVector<f64>> = (1..ens.n_heads()).map(|k| diff(|c| c.re, k)).collect();
    let om: Vec<DVector<f64>> = (1..ens.n_heads()).map(|k| diff(|c| c.im, k)).collect();
    let rank_of = |cols: &[DVector<f64>]| numerical_rank(&DMatrix::from_columns(cols), DEFAULT_RANK_TOL);
    let both: Vec<DVector<f64>> = gm.iter().chain(om.iter()).cloned().collect();
    let (rank_modulus, rank_phase, rank_both) = (rank_of(&gm), rank_of(&om), rank_of(&both));
    let bound = ens.width() + 1;
    Ok(AffineRankCheck { rank_modulus, rank_phase, rank_both, bound, holds: rank_both <= bound })
}

/// `tau = sqrt(sum_{k != l} s2_kl / ESS_k)` with
/// `s2_kl = sum_i w_{k,i} |r_kl(x_i) - sigma_kl|^2`.
pub fn tolerance_band_from_log_psi(batch: &SampleBatch, log_psi: &[Vec<C64>], sigma: &DMatrix<C64>) -> f64 {
    let k_heads = batch.n_heads();
    let mut events = 0;
    let mut total = 0.0;
    for k in 0..k_heads {
        if batch.ess[k] <= 0.0 {
            continue;
        }
        for l in (0..k_heads).filter(|&l| l != k) {
            let s2: f64 = batch.weights[k]
                .iter()
                .zip(log_psi)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, lp)| w * (overlap_ratio(lp[k], lp[l], &mut events) - sigma[(k, l)]).norm_sqr())
                .sum();
            total += s2 / batch.ess[k];
        }
    }
    total.sqrt()
}

pub fn tolerance_band(ens: &EnsembleParameters, batch: &SampleBatch, sigma: &DMatrix<C64>) -> f64 {
    let logs: Vec<Vec<C64>> = batch.configs.iter().map(|&x| ens.log_psi_all(x)).collect();
    tolerance_band_from_log_psi(batch, &logs, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complexify;
    use crate::model::ExactGroundData;
    use crate::nqs::MlpTrunk;
    use crate::trainer::estimate_overlaps;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn mg(n: usize) -> (SectorBasis, Vec<DVector<C64>>) {
        let basis = SectorBasis::new(n).unwrap();
        let g = ExactGroundData::new(&basis, 1.0);
        (basis, vec![complexify(&g.psi_plus), complexify(&g.psi_minus)])
    }

    #[test]
    fn zero_network_enumerates_uniform_state() {
        let basis = SectorBasis::new(6).unwrap();
        let ens = EnsembleParameters::new(
            EnsembleMode::SingleTrunk,
            vec![Trunk::Mlp(MlpTrunk::zeros(6, 3))],
            vec![HeadParameters::zeros(3)],
        )
        .unwrap();
        let v = enumerate_state(&ens, 0, &basis).unwrap();
        let a = 1.0 / (basis.len() as f64).sqrt();
        assert!(v.iter().all(|z| (z.re - a).abs() < 1e-15 && z.im == 0.0));
    }

    #[test]
    fn momentum_states_have_exact_energy() {
        for (n, e0) in [(4, -1.5), (6, -2.25)] {
            let (basis, states) = mg(n);
            let h = dense_hamiltonian(&HamiltonianSpec::majumdar_ghosh(n, 1.0).unwrap(), &basis).unwrap();
            for s in &states {
                let (e, var) = energy_and_variance(s, &h);
                assert!((e - e0).abs() < 1e-12);
                assert!(var.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_level_mixture_energy_and_variance() {
        let basis = SectorBasis::new(6).unwrap();
        let h = dense_hamiltonian(&HamiltonianSpec::new(6, 1.0, 0.3).unwrap(), &basis).unwrap();
        let sp = exact_diagonalize(&h, DEFAULT_DEGENERACY_TOL).unwrap();
        let (a, b) = (0, 7);
        let (ea, eb) = (sp.eigenvalues[a], sp.eigenvalues[b]);
        let v = (sp.eigenvectors.column(a) + sp.eigenvectors.column(b)) / 2f64.sqrt();
        let (e, var) = energy_and_variance(&complexify(&v.into_owned()), &h);
        assert!((e - (ea + eb) / 2.0).abs() < 1e-12);
        assert!((var - (eb - ea).powi(2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_the_ground_space_itself() {
        let basis = SectorBasis::new(6).unwrap();
        let h = dense_hamiltonian(&HamiltonianSpec::majumdar_ghosh(6, 1.0).unwrap(), &basis).unwrap();
        let sp = exact_diagonalize(&h, DEFAULT_DEGENERACY_TOL).unwrap();
        let v0 = sp.ground_block();
        let psi: Vec<DVector<C64>> = (0..2).map(|i| complexify(&v0.column(i).into_owned())).collect();
        let m = projection_metrics(&v0, &psi).unwrap();
        assert!(m.fidelities.iter().all(|f| (f - 1.0).abs() < 1e-12));
        assert!(m.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!((m.kappa - 1.0).abs() < 1e-10);
        assert_eq!((m.rank, m.d_eff), (2, 2));

        let excited: Vec<DVector<C64>> = (2..4).map(|i| complexify(&sp.eigenvectors.column(i).into_owned())).collect();
        let m = projection_metrics(&v0, &excited).unwrap();
        assert!(m.fidelities.iter().all(|f| f.abs() < 1e-12));
        assert_eq!(m.rank, 0);
        assert!(projection_metrics(&DMatrix::zeros(20, 0), &excited).is_err());
    }

    #[test]
    fn fidelity_matches_direct_projector() {
        let basis = SectorBasis::new(6).unwrap();
        let h = dense_hamiltonian(&HamiltonianSpec::majumdar_ghosh(6, 1.0).unwrap(), &basis).unwrap();
        let v0 = exact_diagonalize(&h, DEFAULT_DEGENERACY_TOL).unwrap().ground_block();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ens = EnsembleParameters::random(EnsembleMode::MultiTrunk, 6, 5, 3, &mut rng).unwrap();
        let states: Vec<DVector<C64>> = (0..3).map(|k| enumerate_state(&ens, k, &basis).unwrap()).collect();
        let m = projection_metrics(&v0, &states).unwrap();
        let p = (&v0 * v0.transpose()).map(|x| C64::new(x, 0.0));
        for (s, f) in states.iter().zip(&m.fidelities) {
            let direct = cdot(s, &(&p * s)).re;
            assert!((direct - f).abs() < 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(f));
        }
        assert!(m.singular_values.iter().all(|&s| s <= 1.0 + 1e-10));
    }

    #[test]
    fn overlap_matrix_examples() {
        let (_, states) = mg(4);
        assert!(exact_overlap_matrix(&states).1 < 1e-12);
        let same = vec![states[0].clone(), states[0].clone()];
        assert!((exact_overlap_matrix(&same).1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn momentum_rank_structure() {
        for n in [6, 8, 10] {
            let (basis, states) = mg(n);
            let r = rank_analysis(&states, &basis, DEFAULT_RANK_TOL).unwrap();
            assert_eq!((r.r_g, r.r_omega, r.r_both, r.h_star), (1, 3, 3, 2), "N = {n}");
        }
        // At N=4 the common support is two spin-flip pairs, one per covering,
        // and the phases are constant on each pair: the spans collapse to two
        // dimensions.
        let (basis, states) = mg(4);
        let r = rank_analysis(&states, &basis, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((r.support_size, r.r_g, r.r_omega, r.r_both, r.h_star), (4, 1, 2, 2, 1));
    }

    #[test]
    fn constant_state_has_trivial_ranks() {
        let basis = SectorBasis::new(4).unwrap();
        let v = DVector::from_element(basis.len(), C64::new(0.5, 0.0));
        let r = rank_analysis(&[v.clone()], &basis, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((r.r_g, r.r_omega, r.r_both, r.h_star), (1, 1, 1, 0));
        let ens = construct_representing_ensemble(&[v.clone()], &basis, 0).unwrap();
        assert!(ens.heads()[0].alpha.is_empty());
        assert!((ens.heads()[0].beta - 0.5f64.ln()).abs() < 1e-14);
        let w = enumerate_state(&ens, 0, &basis).unwrap();
        assert!((&w - v.map(|a| a / (basis.len() as f64 * 0.25).sqrt())).norm() < 1e-12);
    }

    #[test]
    fn generic_states_fill_the_bound() {
        let basis = SectorBasis::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Normal::new(0.0, 1.0).unwrap();
        for dd in 1..=4 {
            let targets: Vec<DVector<C64>> = (0..dd)
                .map(|_| DVector::from_fn(basis.len(), |_, _| C64::new(d.sample(&mut rng), d.sample(&mut rng))))
                .collect();
            let r = rank_analysis(&targets, &basis, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(r.r_both, (2 * dd + 1).min(basis.len()));
            assert_eq!(r.r_g, dd + 1);
        }
    }

    #[test]
    fn empty_support_errors() {
        let basis = SectorBasis::new(4).unwrap();
        let mut a = DVector::zeros(basis.len());
        let mut b = DVector::zeros(basis.len());
        a[0] = C64::new(1.0, 0.0);
        b[1] = C64::new(1.0, 0.0);
        assert!(matches!(rank_analysis(&[a, b], &basis, DEFAULT_RANK_TOL), Err(Error::EmptySupport)));
    }

    fn reproduces(targets: &[DVector<C64>], basis: &SectorBasis, ens: &EnsembleParameters) -> f64 {
        let support = common_support(targets);
        let mut worst: f64 = 0.0;
        for (k, t) in targets.iter().enumerate() {
            // Compare on the support, both normalised there, with the phase
            // fixed at the target's largest entry.
            let restrict = |v: &DVector<C64>| {
                let r = DVector::from_iterator(support.len(), support.iter().map(|&i| v[i]));
                let nr = r.norm();
                r / C64::new(nr, 0.0)
            };
            let want = align_global_phase(&restrict(t));
            let got = restrict(&enumerate_state(ens, k, basis).unwrap());
            let top = restrict(t).iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
            let got = got.map(|a| a * got[top].conj() / got[top].norm());
            worst = worst.max((got - want).norm());
        }
        worst
    }

    #[test]
    fn construction_reproduces_momentum_states() {
        for n in [4, 6, 8] {
            let (basis, states) = mg(n);
            for h in [2, 3, 5] {
                let ens = construct_representing_ensemble(&states, &basis, h).unwrap();
                let e = reproduces(&states, &basis, &ens); assert!(e < 1e-10, "n={n} h={h} err={e}");
            }
            if n == 4 {
                let ens = construct_representing_ensemble(&states, &basis, 1).unwrap();
                assert!(reproduces(&states, &basis, &ens) < 1e-10);
                assert!(matches!(
                    construct_representing_ensemble(&states, &basis, 0),
                    Err(Error::Representability { width: 0, r_both: 2 })
                ));
            } else {
                assert!(matches!(
                    construct_representing_ensemble(&states, &basis, 1),
                    Err(Error::Representability { width: 1, r_both: 3 })
                ));
            }
        }
    }

    #[test]
    fn construction_roundtrip_on_random_families() {
        let basis = SectorBasis::new(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = Normal::new(0.0, 1.0).unwrap();
        for dd in 1..=3 {
            for _ in 0..5 {
                let targets: Vec<DVector<C64>> = (0..dd)
                    .map(|_| {
                        DVector::from_fn(basis.len(), |_, _| {
                            C64::from_polar(f64::exp(d.sample(&mut rng)), d.sample(&mut rng))
                        })
                    })
                    .collect();
                let r = rank_analysis(&targets, &basis, DEFAULT_RANK_TOL).unwrap();
                let ens = construct_representing_ensemble(&targets, &basis, r.h_star).unwrap();
                assert!(reproduces(&targets, &basis, &ens) < 1e-10);
            }
        }
    }

    #[test]
    fn sub_support_rank_never_grows() {
        let (basis, states) = mg(8);
        let full = rank_analysis(&states, &basis, DEFAULT_RANK_TOL).unwrap();
        let support = common_support(&states);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let keep = rand::seq::index::sample(&mut rng, support.len(), support.len() / 2 + 1);
            let keep: Vec<usize> = keep.iter().map(|i| support[i]).collect();
            let mask = |v: &DVector<C64>| DVector::from_fn(v.len(), |i, _| if keep.contains(&i) { v[i] } else { C64::new(0.0, 0.0) });
            let sub: Vec<DVector<C64>> = states.iter().map(mask).collect();
            let r = rank_analysis(&sub, &basis, DEFAULT_RANK_TOL).unwrap();
            assert!(r.r_both <= full.r_both);
        }
    }

    #[test]
    fn affine_bound_examples() {
        let basis = SectorBasis::new(4).unwrap();
        let support = basis.configs().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = EnsembleParameters::random(EnsembleMode::SingleTrunk, 4, 3, 1, &mut rng).unwrap();
        let head = base.heads()[0].clone();
        let same = EnsembleParameters::new(EnsembleMode::SingleTrunk, base.trunks().to_vec(), vec![head.clone(), head.clone()]).unwrap();
        assert_eq!(affine_rank_bound_check(&same, &support).unwrap().rank_both, 0);
        let mut shifted = head.clone();
        shifted.beta += 0.7;
        let ens = EnsembleParameters::new(EnsembleMode::SingleTrunk, base.trunks().to_vec(), vec![head, shifted]).unwrap();
        let c = affine_rank_bound_check(&ens, &support).unwrap();
        assert_eq!((c.rank_modulus, c.rank_both), (1, 1));
        assert!(c.holds);
    }

    #[test]
    fn tolerance_band_examples() {
        let basis = SectorBasis::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = EnsembleParameters::random(EnsembleMode::SingleTrunk, 4, 3, 1, &mut rng).unwrap();
        let head = base.heads()[0].clone();
        let same = EnsembleParameters::new(EnsembleMode::SingleTrunk, base.trunks().to_vec(), vec![head.clone(), head]).unwrap();
        let batch = crate::sampler::exact_batch(&same, &basis).unwrap();
        let sigma = estimate_overlaps(&same, &batch);
        assert!(tolerance_band(&same, &batch, &sigma).abs() < 1e-12);

        let ens = EnsembleParameters::random(EnsembleMode::MultiTrunk, 4, 3, 2, &mut rng).unwrap();
        let x = basis.get(2);
        let one = SampleBatch { configs: vec![x], weights: vec![vec![1.0], vec![1.0]], ess: vec![1.0, 1.0], log_mix: None, acceptance_rate: 1.0 };
        let sigma = estimate_overlaps(&ens, &one);
        assert!(tolerance_band(&ens, &one, &sigma).abs() < 1e-12);
    }

    #[test]
    fn tolerance_band_matches_double_sum() {
        let basis = SectorBasis::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ens = EnsembleParameters::random(EnsembleMode::MultiTrunk, 4, 3, 3, &mut rng).unwrap();
        let batch = crate::sampler::exact_batch(&ens, &basis).unwrap();
        let sigma = estimate_overlaps(&ens, &batch);
        let mut total = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                if k == l {
                    continue;
                }
                let mut s2 = 0.0;
                for (i, &x) in batch.configs.iter().enumerate() {
                    let r = (ens.log_psi(l, x) - ens.log_psi(k, x)).exp();
                    s2 += batch.weights[k][i] * (r - sigma[(k, l)]).norm_sqr();
                }
                total += s2 / batch.ess[k];
            }
        }
        assert!((tolerance_band(&ens, &batch, &sigma) - total.sqrt()).abs() < 1e-12);
    }
}
