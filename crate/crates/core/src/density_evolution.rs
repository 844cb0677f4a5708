//! And-or tree evaluation of frameless ALOHA with capture.
//!
//! Messages carry the probability that an edge is still unresolved. The
//! user side is the usual "or" rule; the slot side weights each number of
//! still-unknown interferers by the capture probability for that count.
//! Starting from `r = 1` the two updates are alternated until `r` settles,
//! and the fixed point gives the asymptotic resolution probability and
//! throughput.

use rayon::prelude::*;
use serde::Serialize;

use crate::capture::CaptureTable;
use crate::error::{Error, Result};
use crate::model::{truncated_poisson, DEFAULT_TAIL_EPS};

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_CONVERGENCE_EPS: f64 = 1e-10;

/// Solver inputs for one `(beta, epsilon)` point.
#[derive(Debug, Clone)]
pub struct DeConfig<'a> {
    pub beta: f64,
    /// `M / N - 1`.
    pub epsilon: f64,
    pub capture_table: &'a CaptureTable,
    pub max_iters: usize,
    pub convergence_eps: f64,
    /// Largest slot degree kept in the edge distribution.
    pub l_truncation: usize,
    slot_edge: Vec<f64>,
}

impl<'a> DeConfig<'a> {
    pub fn new(beta: f64, epsilon: f64, capture_table: &'a CaptureTable) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid("beta", "must be a finite non-negative number"));
        }
        if !(epsilon > -1.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be greater than -1"));
        }
        let node_slot = truncated_poisson(beta, DEFAULT_TAIL_EPS);
        let l_truncation = node_slot.len() - 1;
        if l_truncation > capture_table.t_max + 1 {
            return Err(Error::TableCoverage {
                required: l_truncation - 1,
                available: capture_table.t_max,
            });
        }
        Ok(Self {
            beta,
            epsilon,
            capture_table,
            max_iters: DEFAULT_MAX_ITERS,
            convergence_eps: DEFAULT_CONVERGENCE_EPS,
            l_truncation,
            slot_edge: crate::model::edge_perspective(&node_slot),
        })
    }

    /// Config for an `M / N` ratio rather than `epsilon`.
    pub fn from_load(beta: f64, slots_per_user: f64, capture_table: &'a CaptureTable) -> Result<Self> {
        Self::new(beta, slots_per_user - 1.0, capture_table)
    }

    /// Edge-perspective slot degree distribution used by [`slot_update`].
    pub fn slot_edge(&self) -> &[f64] {
        &self.slot_edge
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeState {
    pub r: f64,
    pub q: f64,
    pub iteration: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeOutcome {
    pub state: DeState,
    /// Asymptotic probability of user resolution.
    pub p_r: f64,
    /// Expected throughput, `p_r / (1 + epsilon)`.
    pub throughput: f64,
}

/// User-side update for Poisson user degrees: `exp(-(1 + eps) * beta * (1 - q))`.
pub fn user_update(q: f64, beta: f64, epsilon: f64) -> f64 {
    (-(1.0 + epsilon) * beta * (1.0 - q)).exp()
}

/// User-side update for an arbitrary edge-perspective user degree
/// distribution: `sum_k lambda_k q^(k-1)`.
pub fn user_update_series(q: f64, edge_user: &[f64]) -> f64 {
    edge_user
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, lambda)| lambda * q.powi(k as i32 - 1))
        .sum()
}

/// Slot-side update over the truncated edge distribution:
///
/// `q = 1 - sum_l omega_l sum_{t<l} C(l-1, t) pi_t (1-r)^(l-1-t) r^t`.
pub fn slot_update(r: f64, config: &DeConfig<'_>) -> Result<f64> {
    let pi = &config.capture_table.pi;
    let mut recovered = 0.0;
    for (l, &omega) in config.slot_edge.iter().enumerate().skip(1) {
        if omega == 0.0 {
            continue;
        }
        let n = l - 1;
        if n >= pi.len() {
            return Err(Error::TableCoverage {
                required: n,
                available: config.capture_table.t_max,
            });
        }
        let mut binom = 1.0;
        let mut inner = 0.0;
        for (t, &p) in pi.iter().enumerate().take(n + 1) {
            inner += binom * p * (1.0 - r).powi((n - t) as i32) * r.powi(t as i32);
            binom *= (n - t) as f64 / (t + 1) as f64;
        }
        recovered += omega * inner;
    }
    Ok(1.0 - recovered)
}

/// Slot-side update written for Poisson slot degrees with the
/// interference-free terms summed in closed form:
///
/// `q = 1 - pi_0 e^(-beta r) - e^(-beta) sum_l beta^(l-1)
///      sum_{t=1}^{l-1} pi_t (1-r)^(l-1-t) r^t / ((l-1-t)! t!)`.
pub fn slot_update_split(r: f64, config: &DeConfig<'_>) -> Result<f64> {
    let pi = &config.capture_table.pi;
    let beta = config.beta;
    let mut tail = 0.0;
    for l in 2..=config.l_truncation {
        let n = l - 1;
        if n >= pi.len() {
            return Err(Error::TableCoverage {
                required: n,
                available: config.capture_table.t_max,
            });
        }
        let scale = beta.powi(n as i32);
        for (t, &p) in pi.iter().enumerate().take(n + 1).skip(1) {
            tail += p * scale * (1.0 - r).powi((n - t) as i32) * r.powi(t as i32) / (factorial(n - t) * factorial(t));
        }
    }
    Ok(1.0 - pi[0] * (-beta * r).exp() - (-beta).exp() * tail)
}

/// Slot-side update with the slot degree summed out: thinning a Poisson
/// slot degree leaves a Poisson number of unknown interferers, so
/// `q = 1 - e^(-beta r) sum_t pi_t (beta r)^t / t!`.
pub fn slot_update_thinned(r: f64, beta: f64, table: &CaptureTable) -> f64 {
    let lambda = beta * r;
    let mut weight = (-lambda).exp();
    let mut recovered = 0.0;
    for (t, &p) in table.pi.iter().enumerate() {
        recovered += p * weight;
        weight *= lambda / (t + 1) as f64;
    }
    1.0 - recovered
}

fn factorial(n: usize) -> f64 {
    (2..=n).map(|k| k as f64).product()
}

/// Iterates from `r_0 = 1` until successive `r` differ by less than
/// `convergence_eps` or `max_iters` is hit.
pub fn iterate_to_fixed_point(config: &DeConfig<'_>) -> DeOutcome {
    let mut state = DeState {
        r: 1.0,
        q: 1.0,
        iteration: 0,
        converged: false,
    };
    while state.iteration < config.max_iters {
        let q = slot_update_thinned(state.r, config.beta, config.capture_table);
        let r = user_update(q, config.beta, config.epsilon);
        let delta = (r - state.r).abs();
        state = DeState {
            r,
            q,
            iteration: state.iteration + 1,
            converged: false,
        };
        if delta < config.convergence_eps {
            state.converged = true;
            break;
        }
    }
    let p_r = 1.0 - state.r;
    DeOutcome {
        state,
        p_r,
        throughput: p_r / (1.0 + config.epsilon),
    }
}

/// The first `steps` iterates `r_1, r_2, ...` starting from `r_0 = 1`.
pub fn r_sequence(config: &DeConfig<'_>, steps: usize) -> Vec<f64> {
    let mut r = 1.0;
    (0..steps)
        .map(|_| {
            r = user_update(
                slot_update_thinned(r, config.beta, config.capture_table),
                config.beta,
                config.epsilon,
            );
            r
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaOptimum {
    pub beta: f64,
    pub p_r: f64,
    pub throughput: f64,
    pub converged: bool,
}

/// Throughput-maximizing `beta` for a fixed `epsilon`. Ties go to the
/// smaller `beta`.
pub fn optimize_beta(epsilon: f64, table: &CaptureTable, beta_grid: &[f64]) -> Result<BetaOptimum> {
    if beta_grid.is_empty() {
        return Err(Error::invalid("beta_grid", "must not be empty"));
    }
    let mut best: Option<BetaOptimum> = None;
    for &beta in beta_grid {
        let outcome = iterate_to_fixed_point(&DeConfig::new(beta, epsilon, table)?);
        let candidate = BetaOptimum {
            beta,
            p_r: outcome.p_r,
            throughput: outcome.throughput,
            converged: outcome.state.converged,
        };
        best = match best {
            Some(b)
                if b.throughput > candidate.throughput
                    || (b.throughput == candidate.throughput && b.beta <= candidate.beta) =>
            {
                Some(b)
            }
            _ => Some(candidate),
        };
    }
    Ok(best.expect("grid is non-empty"))
}

/// One row of a throughput-versus-load curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoadPoint {
    /// `M / N`.
    pub slots_per_user: f64,
    pub beta: f64,
    pub p_r: f64,
    pub throughput: f64,
    pub converged: bool,
}

/// Optimizes `beta` at every `M / N` in `load_grid`.
pub fn throughput_curve(table: &CaptureTable, load_grid: &[f64], beta_grid: &[f64]) -> Result<Vec<LoadPoint>> {
    load_grid
        .par_iter()
        .map(|&mn| {
            let best = optimize_beta(mn - 1.0, table, beta_grid)?;
            Ok(LoadPoint {
                slots_per_user: mn,
                beta: best.beta,
                p_r: best.p_r,
                throughput: best.throughput,
                converged: best.converged,
            })
        })
        .collect()
}

/// Highest-throughput row of a curve; ties go to the smaller load.
pub fn curve_maximum(curve: &[LoadPoint]) -> Option<LoadPoint> {
    curve
        .iter()
        .copied()
        .reduce(|best, p| if p.throughput > best.throughput { p } else { best })
}
