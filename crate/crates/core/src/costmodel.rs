//! Polynomial cost model comparing a shared trunk against one trunk per head.
//!
//! A trunk forward pass costs `F_T = N h + h^2`, a head forward pass `2h`, and
//! a backward pass twice its forward pass.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    pub n: f64,
    pub k: f64,
    pub h_s: f64,
    pub h_m: f64,
    pub n_mc: f64,
}

/// Per-step FLOP estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flops {
    pub stmh: f64,
    pub mtmh: f64,
    pub penalty: f64,
}

pub fn trunk_forward(n: f64, h: f64) -> f64 {
    n * h + h * h
}

/// `C_ST = N_MC (3 F_T + 6 K h_s)`, `C_MT = K N_MC (3 F_T + 6 h_m)`,
/// `C_pen = c N_MC K (K - 1)`.
pub fn flops(inputs: &CostInputs, penalty_constant: f64) -> Flops {
    let CostInputs { n, k, h_s, h_m, n_mc } = *inputs;
    Flops {
        stmh: n_mc * (3.0 * trunk_forward(n, h_s) + 6.0 * k * h_s),
        mtmh: k * n_mc * (3.0 * trunk_forward(n, h_m) + 6.0 * h_m),
        penalty: penalty_constant * n_mc * k * (k - 1.0),
    }
}

/// Trunk-only approximation `3 N_MC F_T` of the shared-trunk cost.
pub fn stmh_trunk_dominated(inputs: &CostInputs) -> f64 {
    3.0 * inputs.n_mc * trunk_forward(inputs.n, inputs.h_s)
}

/// Trunk-only approximation `3 K N_MC F_T` of the per-head-trunk cost.
pub fn mtmh_trunk_dominated(inputs: &CostInputs) -> f64 {
    3.0 * inputs.k * inputs.n_mc * trunk_forward(inputs.n, inputs.h_m)
}

/// Per-update cost `N h + h^2 + 2 K h` of one shared trunk with `K` heads.
pub fn update_cost_st(n: f64, k: f64, h_s: f64) -> f64 {
    n * h_s + h_s * h_s + 2.0 * k * h_s
}

/// Per-update cost `K (N h + h^2 + 2 h)` of `K` single-head networks.
pub fn update_cost_mt(n: f64, k: f64, h_m: f64) -> f64 {
    k * (n * h_m + h_m * h_m + 2.0 * h_m)
}

/// Shared-trunk width at which both update costs are equal.
pub fn threshold_width(n: f64, k: f64, h_m: f64) -> f64 {
    let b = n + 2.0 * k;
    let c = update_cost_mt(n, k, h_m);
    // Equivalent to (-b + sqrt(b^2 + 4c)) / 2 without cancellation.
    2.0 * c / (b + (b * b + 4.0 * c).sqrt())
}

/// `R = C_ST(h_s) / C_MT(h_m)`.
pub fn slowdown(h_s: f64, n: f64, k: f64, h_m: f64) -> f64 {
    update_cost_st(n, k, h_s) / update_cost_mt(n, k, h_m)
}

/// The regime statement "K much smaller than (N + h)/2", read literally as `2K < N + h`.
pub fn trunk_dominates(n: f64, k: f64, h: f64) -> bool {
    2.0 * k < n + h
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h_s: f64,
    pub r: f64,
}

pub fn slowdown_sweep(n: f64, k: f64, h_m: f64, widths: &[f64]) -> Vec<SweepPoint> {
    widths.iter().map(|&h_s| SweepPoint { h_s, r: slowdown(h_s, n, k, h_m) }).collect()
}
