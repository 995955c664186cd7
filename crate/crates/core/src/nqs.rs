//! Neural-network quantum state ensembles.
//!
//! Every head `k` produces the log-amplitude
//!
//! ```text
//! ln psi_k(x) = (alpha_k . f(x) + beta_k) + i (phi_k . f(x) + gamma_k)
//! ```
//!
//! from real trunk features `f(x)`. In ST-MH mode all heads read one shared
//! trunk; in MT-MH mode head `k` owns trunk `k`. The trunk is either the
//! two-layer ReLU MLP used for training or a lookup table over a finite set of
//! configurations (used by exact constructions). A table trunk returns no
//! features off its table, which makes every head vanish there.
//!
//! Flattened parameter order: for each trunk `W1` (row-major), `b1`, `W2`
//! (row-major), `b2` (table trunks: feature rows in ascending configuration
//! order), followed by every head as `alpha, phi, beta, gamma`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::SpinConfig;
use crate::{Error, Result, C64};

/// How heads are attached to trunks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnsembleMode {
    /// One shared trunk, `K` heads.
    #[serde(rename = "st-mh")]
    SingleTrunk,
    /// One trunk per head.
    #[serde(rename = "mt-mh")]
    MultiTrunk,
}

impl EnsembleMode {
    pub fn n_trunks(self, heads: usize) -> usize {
        match self {
            EnsembleMode::SingleTrunk => 1,
            EnsembleMode::MultiTrunk => heads,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnsembleMode::SingleTrunk => "st-mh",
            EnsembleMode::MultiTrunk => "mt-mh",
        }
    }
}

/// Intermediate values of one trunk evaluation, reused by the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct TrunkActivationCache {
    pub pre1: Vec<f64>,
    pub act1: Vec<f64>,
    pub features: Vec<f64>,
}

/// Fully connected `N -> h -> h` trunk with a single ReLU between the layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpTrunk {
    n_inputs: usize,
    width: usize,
    /// `h x N`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `h x h`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpTrunk {
    pub fn zeros(n_inputs: usize, width: usize) -> Self {
        Self {
            n_inputs,
            width,
            w1: vec![0.0; width * n_inputs],
            b1: vec![0.0; width],
            w2: vec![0.0; width * width],
            b2: vec![0.0; width],
        }
    }

    /// Weights drawn from `N(0, 1/fan_in)`, zero biases.
    pub fn random<R: Rng + ?Sized>(n_inputs: usize, width: usize, rng: &mut R) -> Self {
        let mut trunk = Self::zeros(n_inputs, width);
        let d1 = Normal::new(0.0, 1.0 / (n_inputs as f64).sqrt()).unwrap();
        let d2 = Normal::new(0.0, 1.0 / (width.max(1) as f64).sqrt()).unwrap();
        trunk.w1.iter_mut().for_each(|w| *w = d1.sample(rng));
        trunk.w2.iter_mut().for_each(|w| *w = d2.sample(rng));
        trunk
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_params(&self) -> usize {
        self.width * self.n_inputs + self.width + self.width * self.width + self.width
    }

    /// `f = W2 relu(W1 sigma + b1) + b2`.
    pub fn forward(&self, x: SpinConfig) -> TrunkActivationCache {
        let (n, h) = (self.n_inputs, self.width);
        let sigma: Vec<f64> = x.sigmas().collect();
        let mut pre1 = self.b1.clone();
        for (i, p) in pre1.iter_mut().enumerate() {
            let row = &self.w1[i * n..(i + 1) * n];
            *p += row.iter().zip(&sigma).map(|(w, s)| w * s).sum::<f64>();
        }
        let act1: Vec<f64> = pre1.iter().map(|&p| if p > 0.0 { p } else { 0.0 }).collect();
        let mut features = self.b2.clone();
        for (i, f) in features.iter_mut().enumerate() {
            let row = &self.w2[i * h..(i + 1) * h];
            *f += row.iter().zip(&act1).map(|(w, a)| w * a).sum::<f64>();
        }
        TrunkActivationCache { pre1, act1, features }
    }

    /// Accumulates `d(u . f(x)) / d(W1, b1, W2, b2)` into `out`.
    /// The ReLU derivative at exactly zero is taken as zero.
    pub fn vjp_into(&self, x: SpinConfig, cache: &TrunkActivationCache, u: &[f64], out: &mut [f64]) {
        let (n, h) = (self.n_inputs, self.width);
        debug_assert_eq!(out.len(), self.n_params());
        let (g_w1, rest) = out.split_at_mut(h * n);
        let (g_b1, rest) = rest.split_at_mut(h);
        let (g_w2, g_b2) = rest.split_at_mut(h * h);

        let mut d_act = vec![0.0; h];
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            g_b2[i] += ui;
            let row = &self.w2[i * h..(i + 1) * h];
            let g_row = &mut g_w2[i * h..(i + 1) * h];
            for j in 0..h {
                g_row[j] += ui * cache.act1[j];
                d_act[j] += ui * row[j];
            }
        }
        for i in 0..h {
            if cache.pre1[i] <= 0.0 {
                continue;
            }
            let d = d_act[i];
            g_b1[i] += d;
            let g_row = &mut g_w1[i * n..(i + 1) * n];
            for (j, g) in g_row.iter_mut().enumerate() {
                *g += d * x.sigma(j);
            }
        }
    }

    pub fn vjp(&self, x: SpinConfig, cache: &TrunkActivationCache, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params()];
        self.vjp_into(x, cache, u, &mut out);
        out
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
    }

    fn read_flat(&mut self, flat: &[f64]) {
        let (n, h) = (self.n_inputs, self.width);
        let (a, rest) = flat.split_at(h * n);
        let (b, rest) = rest.split_at(h);
        let (c, d) = rest.split_at(h * h);
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }
}

/// Trunk defined by a lookup table of feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TableTrunk {
    n_inputs: usize,
    width: usize,
    table: BTreeMap<u32, Vec<f64>>,
}

impl TableTrunk {
    pub fn new(n_inputs: usize, width: usize, table: BTreeMap<u32, Vec<f64>>) -> Result<Self> {
        if let Some((bits, row)) = table.iter().find(|(_, row)| row.len() != width) {
            return Err(Error::Dimension {
                expected: format!("{width} features"),
                found: format!("{} features for configuration {bits:#b}", row.len()),
            });
        }
        Ok(Self { n_inputs, width, table })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_params(&self) -> usize {
        self.width * self.table.len()
    }

    pub fn configs(&self) -> impl Iterator<Item = u32> + '_ {
        self.table.keys().copied()
    }

    pub fn lookup(&self, x: SpinConfig) -> Option<&[f64]> {
        self.table.get(&x.bits()).map(Vec::as_slice)
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        for row in self.table.values() {
            out.extend_from_slice(row);
        }
    }

    fn read_flat(&mut self, flat: &[f64]) {
        let w = self.width;
        for (i, row) in self.table.values_mut().enumerate() {
            row.copy_from_slice(&flat[i * w..(i + 1) * w]);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trunk {
    Mlp(MlpTrunk),
    Table(TableTrunk),
}

impl Trunk {
    pub fn width(&self) -> usize {
        match self {
            Trunk::Mlp(t) => t.width(),
            Trunk::Table(t) => t.width(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            Trunk::Mlp(t) => t.n_inputs(),
            Trunk::Table(t) => t.n_inputs(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Trunk::Mlp(t) => t.n_params(),
            Trunk::Table(t) => t.n_params(),
        }
    }

    /// Forward pass; `None` where a table trunk is undefined.
    pub fn forward(&self, x: SpinConfig) -> Option<TrunkActivationCache> {
        match self {
            Trunk::Mlp(t) => Some(t.forward(x)),
            Trunk::Table(t) => t.lookup(x).map(|f| TrunkActivationCache {
                pre1: Vec::new(),
                act1: Vec::new(),
                features: f.to_vec(),
            }),
        }
    }

    /// Accumulates the vector-Jacobian product `d(u . f(x))/d(trunk)` into `out`.
    pub fn vjp_into(&self, x: SpinConfig, cache: &TrunkActivationCache, u: &[f64], out: &mut [f64]) {
        match self {
            Trunk::Mlp(t) => t.vjp_into(x, cache, u, out),
            Trunk::Table(t) => {
                if let Some(pos) = t.table.keys().position(|&b| b == x.bits()) {
                    let w = t.width;
                    for (g, ui) in out[pos * w..(pos + 1) * w].iter_mut().zip(u) {
                        *g += ui;
                    }
                }
            }
        }
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            Trunk::Mlp(t) => t.write_flat(out),
            Trunk::Table(t) => t.write_flat(out),
        }
    }

    fn read_flat(&mut self, flat: &[f64]) {
        match self {
            Trunk::Mlp(t) => t.read_flat(flat),
            Trunk::Table(t) => t.read_flat(flat),
        }
    }

    fn kind(&self) -> TrunkKind {
        match self {
            Trunk::Mlp(_) => TrunkKind::Mlp,
            Trunk::Table(_) => TrunkKind::Table,
        }
    }
}

/// Linear complex readout `chi = alpha + i phi`, `c = beta + i gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadParameters {
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
}

impl HeadParameters {
    pub fn zeros(width: usize) -> Self {
        Self { alpha: vec![0.0; width], phi: vec![0.0; width], beta: 0.0, gamma: 0.0 }
    }

    /// `alpha`, `phi` from `N(0, scale^2)`; zero offsets.
    pub fn random<R: Rng + ?Sized>(width: usize, scale: f64, rng: &mut R) -> Self {
        let d = Normal::new(0.0, scale).unwrap();
        let alpha = (0..width).map(|_| d.sample(rng)).collect();
        let phi = (0..width).map(|_| d.sample(rng)).collect();
        Self { alpha, phi, beta: 0.0, gamma: 0.0 }
    }

    pub fn width(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_params(&self) -> usize {
        2 * self.alpha.len() + 2
    }

    pub fn log_amplitude(&self, features: &[f64]) -> C64 {
        let re = self.alpha.iter().zip(features).map(|(a, f)| a * f).sum::<f64>() + self.beta;
        let im = self.phi.iter().zip(features).map(|(p, f)| p * f).sum::<f64>() + self.gamma;
        C64::new(re, im)
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.alpha);
        out.extend_from_slice(&self.phi);
        out.push(self.beta);
        out.push(self.gamma);
    }

    fn read_flat(&mut self, flat: &[f64]) {
        let h = self.alpha.len();
        self.alpha.copy_from_slice(&flat[..h]);
        self.phi.copy_from_slice(&flat[h..2 * h]);
        self.beta = flat[2 * h];
        self.gamma = flat[2 * h + 1];
    }
}

/// Initial head scale for `alpha` and `phi`.
pub const HEAD_INIT_SCALE: f64 = 0.01;

/// A trunk/head ensemble of `K` variational states.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleParameters {
    mode: EnsembleMode,
    trunks: Vec<Trunk>,
    heads: Vec<HeadParameters>,
}

impl EnsembleParameters {
    pub fn new(mode: EnsembleMode, trunks: Vec<Trunk>, heads: Vec<HeadParameters>) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::Config("an ensemble needs at least one head".into()));
        }
        let expected = mode.n_trunks(heads.len());
        if trunks.len() != expected {
            return Err(Error::Config(format!(
                "{} with {} heads needs {expected} trunk(s), got {}",
                mode.label(),
                heads.len(),
                trunks.len()
            )));
        }
        let width = trunks[0].width();
        let n = trunks[0].n_inputs();
        if trunks.iter().any(|t| t.width() != width || t.n_inputs() != n)
            || heads.iter().any(|hd| hd.alpha.len() != width || hd.phi.len() != width)
        {
            return Err(Error::Config("trunk and head widths disagree".into()));
        }
        let ens = Self { mode, trunks, heads };
        if ens.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ensemble parameters".into()));
        }
        Ok(ens)
    }

    /// Randomly initialised MLP ensemble. Trunks are drawn before heads, so
    /// with one head both modes produce identical parameters for a given RNG.
    pub fn random<R: Rng + ?Sized>(
        mode: EnsembleMode,
        n_sites: usize,
        width: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if width == 0 || heads == 0 || n_sites == 0 {
            return Err(Error::Config("ensemble dimensions must be positive".into()));
        }
        let trunks = (0..mode.n_trunks(heads))
            .map(|_| Trunk::Mlp(MlpTrunk::random(n_sites, width, rng)))
            .collect();
        let heads = (0..heads).map(|_| HeadParameters::random(width, HEAD_INIT_SCALE, rng)).collect();
        Self::new(mode, trunks, heads)
    }

    pub fn mode(&self) -> EnsembleMode {
        self.mode
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn width(&self) -> usize {
        self.trunks[0].width()
    }

    pub fn n_sites(&self) -> usize {
        self.trunks[0].n_inputs()
    }

    pub fn trunks(&self) -> &[Trunk] {
        &self.trunks
    }

    pub fn heads(&self) -> &[HeadParameters] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [HeadParameters] {
        &mut self.heads
    }

    pub fn trunks_mut(&mut self) -> &mut [Trunk] {
        &mut self.trunks
    }

    /// Index of the trunk read by head `k`.
    pub fn trunk_of(&self, k: usize) -> usize {
        match self.mode {
            EnsembleMode::SingleTrunk => 0,
            EnsembleMode::MultiTrunk => k,
        }
    }

    pub fn is_trainable_mlp(&self) -> bool {
        self.trunks.iter().all(|t| matches!(t, Trunk::Mlp(_)))
    }

    pub fn num_params(&self) -> usize {
        self.trunks.iter().map(Trunk::n_params).sum::<usize>()
            + self.heads.iter().map(HeadParameters::n_params).sum::<usize>()
    }

    /// Offsets of every trunk and head block in the flat vector.
    pub fn layout(&self) -> ParamLayout {
        let mut trunk_offsets = Vec::with_capacity(self.trunks.len());
        let mut at = 0;
        for t in &self.trunks {
            trunk_offsets.push(at);
            at += t.n_params();
        }
        let mut head_offsets = Vec::with_capacity(self.heads.len());
        for hd in &self.heads {
            head_offsets.push(at);
            at += hd.n_params();
        }
        ParamLayout {
            trunk_offsets,
            trunk_sizes: self.trunks.iter().map(Trunk::n_params).collect(),
            head_offsets,
            head_size: self.heads[0].n_params(),
            total: at,
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.trunks.iter().for_each(|t| t.write_flat(&mut out));
        self.heads.iter().for_each(|hd| hd.write_flat(&mut out));
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let layout = self.layout();
        if flat.len() != layout.total {
            return Err(Error::Dimension {
                expected: format!("{} parameters", layout.total),
                found: format!("{} parameters", flat.len()),
            });
        }
        for (t, trunk) in self.trunks.iter_mut().enumerate() {
            let at = layout.trunk_offsets[t];
            trunk.read_flat(&flat[at..at + layout.trunk_sizes[t]]);
        }
        for (k, head) in self.heads.iter_mut().enumerate() {
            let at = layout.head_offsets[k];
            head.read_flat(&flat[at..at + layout.head_size]);
        }
        Ok(())
    }

    /// Features of trunk `t` at `x`.
    pub fn trunk_forward(&self, t: usize, x: SpinConfig) -> Option<TrunkActivationCache> {
        self.trunks[t].forward(x)
    }

    /// `ln psi_k(x)`; the real part is `-inf` where the trunk is undefined.
    pub fn log_psi(&self, k: usize, x: SpinConfig) -> C64 {
        match self.trunks[self.trunk_of(k)].forward(x) {
            Some(cache) => self.heads[k].log_amplitude(&cache.features),
            None => C64::new(f64::NEG_INFINITY, 0.0),
        }
    }

    /// Log-amplitudes of every head, evaluating each trunk once.
    pub fn log_psi_all(&self, x: SpinConfig) -> Vec<C64> {
        self.evaluate(x).log_psi
    }

    /// Forward pass of every trunk plus all head log-amplitudes.
    pub fn evaluate(&self, x: SpinConfig) -> ConfigEval {
        let caches: Vec<Option<TrunkActivationCache>> =
            self.trunks.iter().map(|t| t.forward(x)).collect();
        let log_psi = self
            .heads
            .iter()
            .enumerate()
            .map(|(k, head)| match &caches[self.trunk_of(k)] {
                Some(c) => head.log_amplitude(&c.features),
                None => C64::new(f64::NEG_INFINITY, 0.0),
            })
            .collect();
        ConfigEval { caches, log_psi }
    }

    /// `d ln psi_k(x) / d(alpha, phi, beta, gamma)` in flattening order.
    /// Empty where head `k` vanishes.
    pub fn head_log_derivatives(&self, k: usize, x: SpinConfig) -> Vec<C64> {
        let Some(cache) = self.trunks[self.trunk_of(k)].forward(x) else {
            return Vec::new();
        };
        head_log_derivatives_from_features(&cache.features)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let tables = if self.trunks.iter().any(|t| matches!(t, Trunk::Table(_))) {
            Some(
                self.trunks
                    .iter()
                    .map(|t| match t {
                        Trunk::Table(tt) => tt.configs().collect(),
                        Trunk::Mlp(_) => Vec::new(),
                    })
                    .collect(),
            )
        } else {
            None
        };
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: 1,
            mode: self.mode,
            trunk_kind: self.trunks[0].kind(),
            n_sites: self.n_sites(),
            width: self.width(),
            heads: self.n_heads(),
            tables,
            num_params: self.num_params(),
            params: self.to_flat(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != 1 {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format {:?} version {}",
                ck.format, ck.version
            )));
        }
        let n_trunks = ck.mode.n_trunks(ck.heads);
        let trunks: Vec<Trunk> = match ck.trunk_kind {
            TrunkKind::Mlp => {
                (0..n_trunks).map(|_| Trunk::Mlp(MlpTrunk::zeros(ck.n_sites, ck.width))).collect()
            }
            TrunkKind::Table => {
                let tables = ck
                    .tables
                    .as_ref()
                    .ok_or_else(|| Error::Checkpoint("table trunk without table configurations".into()))?;
                if tables.len() != n_trunks {
                    return Err(Error::Checkpoint(format!(
                        "expected {n_trunks} tables, found {}",
                        tables.len()
                    )));
                }
                tables
                    .iter()
                    .map(|cfgs| {
                        let table = cfgs.iter().map(|&b| (b, vec![0.0; ck.width])).collect();
                        TableTrunk::new(ck.n_sites, ck.width, table).map(Trunk::Table)
                    })
                    .collect::<Result<_>>()?
            }
        };
        let heads = (0..ck.heads).map(|_| HeadParameters::zeros(ck.width)).collect();
        let mut ens = Self::new(ck.mode, trunks, heads)?;
        if ck.num_params != ens.num_params() {
            return Err(Error::Checkpoint(format!(
                "declared {} parameters but the shape implies {}",
                ck.num_params,
                ens.num_params()
            )));
        }
        ens.set_flat(&ck.params).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(ens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_checkpoint())?;
        fs::write(path, text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(&serde_json::from_str(&text)?)
    }
}

/// Head log-derivatives given the trunk features: `f` for `alpha`, `i f` for
/// `phi`, `1` for `beta` and `i` for `gamma`.
pub fn head_log_derivatives_from_features(features: &[f64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(2 * features.len() + 2);
    out.extend(features.iter().map(|&f| C64::new(f, 0.0)));
    out.extend(features.iter().map(|&f| C64::new(0.0, f)));
    out.push(C64::new(1.0, 0.0));
    out.push(C64::new(0.0, 1.0));
    out
}

/// All trunk activations and head log-amplitudes at one configuration.
#[derive(Clone, Debug)]
pub struct ConfigEval {
    pub caches: Vec<Option<TrunkActivationCache>>,
    pub log_psi: Vec<C64>,
}

/// Positions of parameter blocks in the flat vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub trunk_offsets: Vec<usize>,
    pub trunk_sizes: Vec<usize>,
    pub head_offsets: Vec<usize>,
    pub head_size: usize,
    pub total: usize,
}

/// Parameter counts of an MLP ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    /// Every weight and bias, including head offsets.
    pub exact: usize,
    /// The bias-free proportional estimate `(N+1)h + h^2 + 2Kh` (ST-MH)
    /// or `K((N+1)h + h^2 + 2h)` (MT-MH).
    pub theory: usize,
}

pub fn exact_param_count(n: usize, h: usize, k: usize, mode: EnsembleMode) -> ParamCount {
    let trunk = (n * h + h) + (h * h + h);
    let head = 2 * h + 2;
    match mode {
        EnsembleMode::SingleTrunk => ParamCount {
            exact: trunk + k * head,
            theory: (n + 1) * h + h * h + 2 * k * h,
        },
        EnsembleMode::MultiTrunk => ParamCount {
            exact: k * (trunk + head),
            theory: k * ((n + 1) * h + h * h + 2 * h),
        },
    }
}

pub const CHECKPOINT_FORMAT: &str = "stmh-checkpoint";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrunkKind {
    Mlp,
    Table,
}

/// On-disk parameter snapshot: shape metadata plus the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub mode: EnsembleMode,
    pub trunk_kind: TrunkKind,
    pub n_sites: usize,
    pub width: usize,
    pub heads: usize,
    /// Table configurations per trunk (table trunks only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<Vec<u32>>>,
    pub num_params: usize,
    pub params: Vec<f64>,
}
