//! The periodic J1-J2 Heisenberg ring restricted to the `S^z_tot = 0` sector.
//!
//! Spins are encoded as bits: bit `j` set means site `j` is up
//! (`sigma_j = +1`). Site indices wrap modulo the ring length. The
//! Hamiltonian uses `S = sigma / 2`, so a bond contributes `J sigma_i sigma_j / 4`
//! on the diagonal and `J / 2` for every antiparallel pair it flips.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest ring the sector enumeration supports.
pub const MAX_SITES: usize = 16;

/// An `S^z` product state of an `n`-site ring.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig {
    bits: u32,
    n: u8,
}

impl SpinConfig {
    /// Builds a configuration and checks that it lies in the zero-magnetisation sector.
    pub fn new(n: usize, bits: u32) -> Result<Self> {
        check_sites(n)?;
        let cfg = Self::from_bits(n, bits);
        if bits >> n != 0 || !cfg.in_sector() {
            return Err(Error::Domain(format!(
                "configuration {bits:#b} is outside the S^z = 0 sector of {n} sites"
            )));
        }
        Ok(cfg)
    }

    /// Builds a configuration without any sector check.
    pub fn from_bits(n: usize, bits: u32) -> Self {
        debug_assert!(n <= 32);
        Self { bits, n: n as u8 }
    }

    /// Parses a string of `u`/`d` (or arrows) with site 0 first.
    pub fn from_spins(spins: &str) -> Result<Self> {
        let mut bits = 0u32;
        let mut n = 0usize;
        for ch in spins.chars() {
            match ch {
                'u' | 'U' | '↑' | '1' => bits |= 1 << n,
                'd' | 'D' | '↓' | '0' => {}
                _ => return Err(Error::Domain(format!("unrecognised spin symbol {ch:?}"))),
            }
            n += 1;
        }
        Self::new(n, bits)
    }

    /// The two Néel strings: `↑↓↑↓...` (site 0 up) and `↓↑↓↑...`.
    pub fn neel(n: usize) -> [Self; 2] {
        let mut up_first = 0u32;
        for j in (0..n).step_by(2) {
            up_first |= 1 << j;
        }
        let mask = low_mask(n);
        [Self::from_bits(n, up_first), Self::from_bits(n, !up_first & mask)]
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn n_sites(self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn is_up(self, site: usize) -> bool {
        self.bits >> (site % self.n_sites()) & 1 == 1
    }

    /// `sigma_j^z` in `{-1, +1}`.
    #[inline]
    pub fn sigma(self, site: usize) -> f64 {
        if self.is_up(site) {
            1.0
        } else {
            -1.0
        }
    }

    /// The network input encoding, one `sigma_j^z` per site.
    pub fn sigmas(self) -> impl Iterator<Item = f64> {
        (0..self.n_sites()).map(move |j| self.sigma(j))
    }

    pub fn magnetisation(self) -> i32 {
        2 * self.bits.count_ones() as i32 - self.n as i32
    }

    pub fn in_sector(self) -> bool {
        self.bits >> self.n == 0 && self.bits.count_ones() as usize * 2 == self.n_sites()
    }

    /// Exchanges the spins on two sites.
    pub fn swapped(self, i: usize, j: usize) -> Self {
        let (i, j) = (i % self.n_sites(), j % self.n_sites());
        if self.is_up(i) == self.is_up(j) {
            self
        } else {
            Self { bits: self.bits ^ (1 << i) ^ (1 << j), n: self.n }
        }
    }

    /// One-site cyclic translation: the spin on site `j` moves to site `j + 1`.
    pub fn translate(self) -> Self {
        let n = self.n_sites();
        let bits = ((self.bits << 1) | (self.bits >> (n - 1))) & low_mask(n);
        Self { bits, n: self.n }
    }

    pub fn up_sites(self) -> impl Iterator<Item = usize> {
        (0..self.n_sites()).filter(move |&j| self.is_up(j))
    }

    pub fn down_sites(self) -> impl Iterator<Item = usize> {
        (0..self.n_sites()).filter(move |&j| !self.is_up(j))
    }

    /// Binary string, most significant site first (the integer's usual spelling).
    pub fn bitstring(self) -> String {
        format!("{:0width$b}", self.bits, width = self.n_sites())
    }
}

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfig({self})")
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.n_sites() {
            f.write_str(if self.is_up(j) { "↑" } else { "↓" })?;
        }
        Ok(())
    }
}

fn low_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn check_sites(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) || !(4..=MAX_SITES).contains(&n) {
        return Err(Error::Config(format!(
            "site count must be even with 4 <= N <= {MAX_SITES}, got {n}"
        )));
    }
    Ok(())
}

/// All configurations of the zero-magnetisation sector in ascending bit order.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    n: usize,
    configs: Vec<SpinConfig>,
    index: Vec<u32>,
}

impl SectorBasis {
    pub fn new(n: usize) -> Result<Self> {
        check_sites(n)?;
        let mut index = vec![u32::MAX; 1 << n];
        let mut configs = Vec::new();
        for bits in 0..(1u32 << n) {
            if bits.count_ones() as usize * 2 == n {
                index[bits as usize] = configs.len() as u32;
                configs.push(SpinConfig::from_bits(n, bits));
            }
        }
        Ok(Self { n, configs, index })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[SpinConfig] {
        &self.configs
    }

    pub fn get(&self, i: usize) -> SpinConfig {
        self.configs[i]
    }

    pub fn index_of(&self, x: SpinConfig) -> Option<usize> {
        if x.n_sites() != self.n {
            return None;
        }
        match self.index.get(x.bits() as usize) {
            Some(&i) if i != u32::MAX => Some(i as usize),
            _ => None,
        }
    }

    /// Applies the one-site translation to an amplitude vector:
    /// `(T v)(T x) = v(x)`.
    pub fn translate_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (i, &x) in self.configs.iter().enumerate() {
            out[self.index_of(x.translate()).expect("translation stays in sector")] = v[i];
        }
        out
    }
}

/// Couplings of the periodic J1-J2 ring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_sites: usize,
    pub j1: f64,
    pub j2: f64,
}

impl HamiltonianSpec {
    pub fn new(n_sites: usize, j1: f64, j2: f64) -> Result<Self> {
        check_sites(n_sites)?;
        if !j1.is_finite() || !j2.is_finite() {
            return Err(Error::Config("couplings must be finite".into()));
        }
        Ok(Self { n_sites, j1, j2 })
    }

    /// The Majumdar-Ghosh point `J2 = J1 / 2`.
    pub fn majumdar_ghosh(n_sites: usize, j1: f64) -> Result<Self> {
        Self::new(n_sites, j1, j1 / 2.0)
    }

    pub fn is_majumdar_ghosh(&self) -> bool {
        self.j2 == self.j1 / 2.0
    }

    /// Boundary conditions are always periodic.
    pub const fn periodic(&self) -> bool {
        true
    }

    /// Exact ground energy `-3 J1 N / 8` at the Majumdar-Ghosh point.
    pub fn mg_ground_energy(&self) -> f64 {
        -3.0 * self.j1 * self.n_sites as f64 / 8.0
    }

    fn bonds(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n_sites;
        [(1usize, self.j1), (2usize, self.j2)]
            .into_iter()
            .flat_map(move |(r, j)| (0..n).map(move |s| (s, (s + r) % n, j)))
    }
}

/// Nonzero row of the Hamiltonian at `x`: the diagonal entry first, then one
/// merged entry per distinct flipped configuration.
pub fn connected_elements(x: SpinConfig, spec: &HamiltonianSpec) -> Result<Vec<(SpinConfig, f64)>> {
    if x.n_sites() != spec.n_sites || !x.in_sector() {
        return Err(Error::Domain(format!(
            "{x} is not in the S^z = 0 sector of the {}-site ring",
            spec.n_sites
        )));
    }
    let mut out: Vec<(SpinConfig, f64)> = vec![(x, 0.0)];
    for (i, j, coupling) in spec.bonds() {
        let aligned = x.is_up(i) == x.is_up(j);
        out[0].1 += coupling * if aligned { 0.25 } else { -0.25 };
        if !aligned && coupling != 0.0 {
            let y = x.swapped(i, j);
            match out[1..].iter_mut().find(|(z, _)| *z == y) {
                Some(entry) => entry.1 += 0.5 * coupling,
                None => out.push((y, 0.5 * coupling)),
            }
        }
    }
    Ok(out)
}

/// Dense Hamiltonian over the sector, rows and columns in basis order.
pub fn dense_hamiltonian(spec: &HamiltonianSpec, basis: &SectorBasis) -> Result<DMatrix<f64>> {
    if basis.n_sites() != spec.n_sites {
        return Err(Error::Dimension {
            expected: format!("basis for {} sites", spec.n_sites),
            found: format!("basis for {} sites", basis.n_sites()),
        });
    }
    let dim = basis.len();
    let mut h = DMatrix::zeros(dim, dim);
    for (row, &x) in basis.configs().iter().enumerate() {
        for (y, value) in connected_elements(x, spec)? {
            let col = basis.index_of(y).expect("sector closure");
            h[(row, col)] += value;
        }
    }
    Ok(h)
}

/// Dense `S_i . S_j` on the sector.
pub fn exchange_operator(basis: &SectorBasis, i: usize, j: usize) -> DMatrix<f64> {
    let dim = basis.len();
    let mut op = DMatrix::zeros(dim, dim);
    for (row, &x) in basis.configs().iter().enumerate() {
        if i % basis.n_sites() == j % basis.n_sites() {
            op[(row, row)] += 0.75;
            continue;
        }
        if x.is_up(i) == x.is_up(j) {
            op[(row, row)] += 0.25;
        } else {
            op[(row, row)] -= 0.25;
            op[(row, basis.index_of(x.swapped(i, j)).unwrap())] += 0.5;
        }
    }
    op
}

/// Spectrum of a dense symmetric matrix, ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
    /// Number of eigenvalues within the degeneracy tolerance of the minimum.
    pub degeneracy: usize,
}

impl Spectrum {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// The `g` ground vectors as columns.
    pub fn ground_block(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.degeneracy).into_owned()
    }

    pub fn summary(&self) -> EdSummary {
        EdSummary { eigenvalues: self.eigenvalues.clone(), degeneracy: self.degeneracy }
    }
}

/// JSON export of a diagonalisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdSummary {
    pub eigenvalues: Vec<f64>,
    pub degeneracy: usize,
}

/// Default degeneracy tolerance, relative to the spectral range.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

/// Full dense diagonalisation. Eigenvalues closer than `degeneracy_tol`
/// times the spectral range to the minimum count towards the ground
/// degeneracy.
pub fn exact_diagonalize(h: &DMatrix<f64>, degeneracy_tol: f64) -> Result<Spectrum> {
    if !h.is_square() {
        return Err(Error::Dimension {
            expected: "square matrix".into(),
            found: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let asym = (h - h.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    let range = eigenvalues.last().unwrap() - eigenvalues[0];
    let cutoff = eigenvalues[0] + degeneracy_tol * range;
    let degeneracy = eigenvalues.iter().take_while(|&&e| e <= cutoff).count();
    Ok(Spectrum { eigenvalues, eigenvectors, degeneracy })
}

/// Sign of the singlet `(|↑_i ↓_j> - |↓_i ↑_j>)` component at `x`, or 0.
fn singlet_sign(x: SpinConfig, i: usize, j: usize) -> f64 {
    match (x.is_up(i), x.is_up(j)) {
        (true, false) => 1.0,
        (false, true) => -1.0,
        _ => 0.0,
    }
}

/// The two dimer coverings: `Phi_A` pairs bonds `(0,1), (2,3), ...` and
/// `Phi_B` pairs `(1,2), (3,4), ..., (N-1,0)`, each a product of normalised
/// singlets oriented from the first bond site.
pub fn dimer_states(basis: &SectorBasis) -> (DVector<f64>, DVector<f64>) {
    let n = basis.n_sites();
    let modulus = 2f64.powf(-(n as f64) / 4.0);
    let covering = |offset: usize| {
        DVector::from_iterator(
            basis.len(),
            basis.configs().iter().map(|&x| {
                (0..n / 2)
                    .map(|m| singlet_sign(x, 2 * m + offset, (2 * m + offset + 1) % n))
                    .product::<f64>()
                    * modulus
            }),
        )
    };
    (covering(0), covering(1))
}

/// `<Phi_B|Phi_A> = (-1)^{N/2} 2^{1 - N/2}`.
pub fn dimer_overlap(n: usize) -> f64 {
    let sign = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * 2f64.powf(1.0 - n as f64 / 2.0)
}

/// Translation eigenstates `(Phi_A +- Phi_B) / sqrt(2 (1 +- <Phi_B|Phi_A>))`
/// with momenta 0 and pi.
pub fn momentum_states(basis: &SectorBasis) -> (DVector<f64>, DVector<f64>) {
    let (a, b) = dimer_states(basis);
    let o = dimer_overlap(basis.n_sites());
    let plus = (&a + &b) / (2.0 * (1.0 + o)).sqrt();
    let minus = (&a - &b) / (2.0 * (1.0 - o)).sqrt();
    (plus, minus)
}

/// Exact Majumdar-Ghosh ground manifold.
#[derive(Clone, Debug)]
pub struct ExactGroundData {
    pub phi_a: DVector<f64>,
    pub phi_b: DVector<f64>,
    pub psi_plus: DVector<f64>,
    pub psi_minus: DVector<f64>,
    pub e0: f64,
}

impl ExactGroundData {
    pub fn new(basis: &SectorBasis, j1: f64) -> Self {
        let (phi_a, phi_b) = dimer_states(basis);
        let (psi_plus, psi_minus) = momentum_states(basis);
        let e0 = -3.0 * j1 * basis.n_sites() as f64 / 8.0;
        Self { phi_a, phi_b, psi_plus, psi_minus, e0 }
    }
}

/// Number of nonzero entries of a vector.
pub fn support_size(v: &DVector<f64>) -> usize {
    v.iter().filter(|a| **a != 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn sector_sizes() {
        for n in [4, 6, 8, 10] {
            assert_eq!(SectorBasis::new(n).unwrap().len(), binomial(n, n / 2));
        }
        assert_eq!(SectorBasis::new(4).unwrap().len(), 6);
        assert_eq!(SectorBasis::new(8).unwrap().len(), 70);
    }

    #[test]
    fn six_site_basis_starts_at_lowest_bitmask() {
        // Brute force: every 6-bit mask with three ones, sorted.
        let mut masks: Vec<u32> = (0..64u32).filter(|b| b.count_ones() == 3).collect();
        masks.sort();
        let basis = SectorBasis::new(6).unwrap();
        assert_eq!(basis.len(), 20);
        assert_eq!(basis.get(0).bitstring(), "000111");
        let bits: Vec<u32> = basis.configs().iter().map(|c| c.bits()).collect();
        assert_eq!(bits, masks);
    }

    #[test]
    fn invalid_site_counts() {
        for n in [0, 2, 3, 5, 18] {
            assert!(matches!(SectorBasis::new(n), Err(Error::Config(_))));
        }
    }

    #[test]
    fn index_roundtrip() {
        let basis = SectorBasis::new(8).unwrap();
        for (i, &x) in basis.configs().iter().enumerate() {
            assert_eq!(basis.index_of(x), Some(i));
        }
        assert_eq!(basis.index_of(SpinConfig::from_bits(8, 0b1)), None);
    }

    #[test]
    fn translation_examples() {
        let x = SpinConfig::from_spins("↑↓↑↓").unwrap();
        assert_eq!(x.translate(), SpinConfig::from_spins("↓↑↓↑").unwrap());
        let basis = SectorBasis::new(6).unwrap();
        for &x in basis.configs() {
            let mut y = x;
            for _ in 0..6 {
                y = y.translate();
            }
            assert_eq!(x, y);
        }
    }

    #[test]
    fn connected_elements_neel_mg() {
        let spec = HamiltonianSpec::majumdar_ghosh(4, 1.0).unwrap();
        let x = SpinConfig::from_spins("↑↓↑↓").unwrap();
        let row = connected_elements(x, &spec).unwrap();
        assert_eq!(row[0], (x, -0.5));
        assert_eq!(row.len(), 5);
        assert!(row[1..].iter().all(|&(_, v)| v == 0.5));
    }

    #[test]
    fn connected_elements_nearest_neighbour_only() {
        let spec = HamiltonianSpec::new(4, 1.0, 0.0).unwrap();
        let x = SpinConfig::from_spins("↑↑↓↓").unwrap();
        let row = connected_elements(x, &spec).unwrap();
        assert_eq!(row[0], (x, 0.0));
    }

    #[test]
    fn connected_elements_zero_hamiltonian() {
        let spec = HamiltonianSpec::new(6, 0.0, 0.0).unwrap();
        let basis = SectorBasis::new(6).unwrap();
        for &x in basis.configs() {
            assert_eq!(connected_elements(x, &spec).unwrap(), vec![(x, 0.0)]);
        }
    }

    #[test]
    fn connected_elements_rejects_outside_sector() {
        let spec = HamiltonianSpec::majumdar_ghosh(4, 1.0).unwrap();
        let x = SpinConfig::from_bits(4, 0b0111);
        assert!(matches!(connected_elements(x, &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn hamiltonian_is_exactly_symmetric_and_closed() {
        for n in [4, 6, 8] {
            let spec = HamiltonianSpec::new(n, 0.7, 0.3).unwrap();
            let basis = SectorBasis::new(n).unwrap();
            let h = dense_hamiltonian(&spec, &basis).unwrap();
            assert_eq!(h, h.transpose());
            for &x in basis.configs() {
                for (y, _) in connected_elements(x, &spec).unwrap() {
                    assert!(y.in_sector());
                }
            }
        }
    }

    #[test]
    fn hamiltonian_trace_and_zero() {
        let spec = HamiltonianSpec::majumdar_ghosh(4, 1.0).unwrap();
        let basis = SectorBasis::new(4).unwrap();
        let h = dense_hamiltonian(&spec, &basis).unwrap();
        let diag_sum: f64 =
            basis.configs().iter().map(|&x| connected_elements(x, &spec).unwrap()[0].1).sum();
        assert_eq!(h.trace(), diag_sum);

        let zero = HamiltonianSpec::new(4, 0.0, 0.0).unwrap();
        assert_eq!(dense_hamiltonian(&zero, &basis).unwrap().amax(), 0.0);

        let other = SectorBasis::new(6).unwrap();
        assert!(matches!(dense_hamiltonian(&spec, &other), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mg_spectrum() {
        for (n, e0) in [(4, -1.5), (6, -2.25), (8, -3.0)] {
            let spec = HamiltonianSpec::majumdar_ghosh(n, 1.0).unwrap();
            let basis = SectorBasis::new(n).unwrap();
            let h = dense_hamiltonian(&spec, &basis).unwrap();
            let ed = exact_diagonalize(&h, DEFAULT_DEGENERACY_TOL).unwrap();
            assert!((ed.ground_energy() - e0).abs() < 1e-12, "N={n}: {}", ed.ground_energy());
            assert_eq!(ed.degeneracy, 2);
            let v0 = ed.ground_block();
            let gram = v0.transpose() * &v0;
            assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-12);
            assert!(ed.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_nonsymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(exact_diagonalize(&m, 1e-8), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn dimer_supports_and_overlap() {
        for n in [4, 6, 8] {
            let basis = SectorBasis::new(n).unwrap();
            let (a, b) = dimer_states(&basis);
            assert_eq!(support_size(&a), 1 << (n / 2));
            assert_eq!(support_size(&b), 1 << (n / 2));
            let modulus = 2f64.powf(-(n as f64) / 4.0);
            assert!(a.iter().all(|&v| v == 0.0 || (v.abs() - modulus).abs() < 1e-15));
            assert!((a.dot(&b) - dimer_overlap(n)).abs() < 1e-14);
            assert!((a.norm() - 1.0).abs() < 1e-14);
            let both = a.iter().zip(b.iter()).filter(|(x, y)| **x != 0.0 && **y != 0.0).count();
            assert_eq!(both, 2);
            let union = a.iter().zip(b.iter()).filter(|(x, y)| **x != 0.0 || **y != 0.0).count();
            assert_eq!(union, (1 << (1 + n / 2)) - 2);
            for neel in SpinConfig::neel(n) {
                let i = basis.index_of(neel).unwrap();
                assert!(a[i] != 0.0 && b[i] != 0.0);
            }
        }
        let basis = SectorBasis::new(4).unwrap();
        let (a, _) = dimer_states(&basis);
        assert!(a.iter().all(|&v| v == 0.0 || v.abs() == 0.5));
        assert_eq!(dimer_overlap(4), 0.5);
    }

    #[test]
    fn translation_exchanges_coverings() {
        for n in [4, 6, 8] {
            let basis = SectorBasis::new(n).unwrap();
            let (a, b) = dimer_states(&basis);
            assert_eq!(basis.translate_vector(&a), b);
            assert_eq!(basis.translate_vector(&b), a);
            let (p, m) = momentum_states(&basis);
            assert!((basis.translate_vector(&p) - &p).amax() < 1e-15);
            assert!((basis.translate_vector(&m) + &m).amax() < 1e-15);
        }
    }

    #[test]
    fn momentum_states_are_eigenstates() {
        for n in [4, 6, 8] {
            let spec = HamiltonianSpec::majumdar_ghosh(n, 1.0).unwrap();
            let basis = SectorBasis::new(n).unwrap();
            let h = dense_hamiltonian(&spec, &basis).unwrap();
            let exact = ExactGroundData::new(&basis, 1.0);
            assert_eq!(exact.e0, spec.mg_ground_energy());
            for psi in [&exact.psi_plus, &exact.psi_minus] {
                assert!((psi.norm() - 1.0).abs() < 1e-14);
                let residual = &h * psi - psi * exact.e0;
                assert!(residual.amax() < 1e-12);
            }
            assert!(exact.psi_plus.dot(&exact.psi_minus).abs() < 1e-14);
        }
    }

    #[test]
    fn neel_nodes() {
        for n in [4, 6, 8] {
            let basis = SectorBasis::new(n).unwrap();
            let (p, m) = momentum_states(&basis);
            for neel in SpinConfig::neel(n) {
                let i = basis.index_of(neel).unwrap();
                if n % 4 == 0 {
                    assert_eq!(m[i], 0.0);
                    assert!(p[i] != 0.0);
                } else {
                    assert_eq!(p[i], 0.0);
                    assert!(m[i] != 0.0);
                }
            }
        }
    }

    #[test]
    fn projector_representation_matches_hamiltonian() {
        for n in [4, 6, 8] {
            let j1 = 1.3;
            let spec = HamiltonianSpec::majumdar_ghosh(n, j1).unwrap();
            let basis = SectorBasis::new(n).unwrap();
            let h = dense_hamiltonian(&spec, &basis).unwrap();
            let dim = basis.len();
            let mut rebuilt = DMatrix::identity(dim, dim) * (-3.0 * j1 * n as f64 / 8.0);
            for j in 0..n {
                let sites = [j, (j + 1) % n, (j + 2) % n];
                let mut tau2 = DMatrix::zeros(dim, dim);
                for a in sites {
                    for b in sites {
                        tau2 += exchange_operator(&basis, a, b);
                    }
                }
                let projector = (tau2 - DMatrix::identity(dim, dim) * 0.75) / 3.0;
                // A projector onto total spin 3/2 of the triple.
                assert!((&projector * &projector - &projector).amax() < 1e-12);
                rebuilt += projector * (0.75 * j1);
            }
            assert!((rebuilt - h).amax() < 1e-12);
        }
    }
}
