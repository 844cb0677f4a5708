//! System parameters, the slot-access rule and the Poisson degree
//! distributions shared by the simulator and the and-or tree solver.

use serde::{Deserialize, Serialize};

use crate::capture::ChannelParams;
use crate::error::{Error, Result};

/// Default tail mass below which a Poisson pmf is truncated.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// Whether a user's received SNR is fixed for the whole contention period
/// or redrawn for every transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnrMode {
    /// One SNR per user per run; every replica is received at that SNR.
    PerUserFixed,
    /// A fresh SNR for each transmission. Matches the independence the
    /// and-or tree analysis assumes.
    PerTransmission,
}

/// Protocol and channel knobs for one contention period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub n_users: usize,
    pub beta: f64,
    pub capture_ratio: f64,
    pub mean_snr: f64,
    pub threshold_v: f64,
    pub threshold_s: f64,
    pub max_slots: usize,
    pub base_seed: u64,
    pub snr_mode: SnrMode,
}

impl SystemParams {
    /// Builds parameters with the channel given as `(b, b/mean_snr)` and
    /// the slot cap defaulted to `20 * n_users`.
    pub fn new(
        n_users: usize,
        beta: f64,
        capture_ratio: f64,
        snr_ratio: f64,
        threshold_v: f64,
        threshold_s: f64,
    ) -> Result<Self> {
        let channel = ChannelParams::from_ratio(capture_ratio, snr_ratio)?;
        let params = Self {
            n_users,
            beta,
            capture_ratio,
            mean_snr: channel.mean_snr,
            threshold_v,
            threshold_s,
            max_slots: 20 * n_users,
            base_seed: 0,
            snr_mode: SnrMode::PerUserFixed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_snr_mode(mut self, mode: SnrMode) -> Self {
        self.snr_mode = mode;
        self
    }

    pub fn with_max_slots(mut self, max_slots: usize) -> Self {
        self.max_slots = max_slots;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::invalid("n_users", "must be at least 1"));
        }
        slot_access_probability(self.beta, self.n_users)?;
        self.channel()?;
        if !(0.0..=1.0).contains(&self.threshold_v) {
            return Err(Error::invalid("threshold_v", "must lie in [0, 1]"));
        }
        if !(self.threshold_s >= 0.0) {
            return Err(Error::invalid("threshold_s", "must be non-negative"));
        }
        if self.max_slots == 0 {
            return Err(Error::invalid("max_slots", "must be at least 1"));
        }
        Ok(())
    }

    pub fn access_probability(&self) -> f64 {
        self.beta / self.n_users as f64
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.capture_ratio, self.mean_snr)
    }
}

/// Probability that a user transmits in a given slot, `beta / n_users`.
///
/// `beta = 0` is accepted and yields a silent channel.
pub fn slot_access_probability(beta: f64, n_users: usize) -> Result<f64> {
    if n_users == 0 {
        return Err(Error::invalid("n_users", "must be at least 1"));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", "must be a finite non-negative number"));
    }
    if beta > n_users as f64 {
        return Err(Error::invalid(
            "beta",
            format!("{beta} exceeds n_users = {n_users}; access probability would exceed 1"),
        ));
    }
    Ok(beta / n_users as f64)
}

/// Node- and edge-perspective degree distributions of the contention graph.
///
/// Index `k` of each vector is the probability of degree `k`. Edge
/// distributions have zero mass at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistributions {
    pub node_user: Vec<f64>,
    pub node_slot: Vec<f64>,
    pub edge_user: Vec<f64>,
    pub edge_slot: Vec<f64>,
    /// Largest degree retained in either pmf.
    pub truncation: usize,
}

impl DegreeDistributions {
    /// Slot-side truncation index, i.e. the largest slot degree kept.
    pub fn slot_truncation(&self) -> usize {
        self.node_slot.len() - 1
    }

    pub fn user_truncation(&self) -> usize {
        self.node_user.len() - 1
    }
}

/// Poisson pmf with the given mean, truncated at the smallest index whose
/// upper tail mass is below `tail_eps`, then renormalized.
pub fn truncated_poisson(mean: f64, tail_eps: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    // Enough terms that the remaining tail is far below any admissible
    // tail_eps.
    let limit = (mean + 40.0 * mean.sqrt() + 60.0).ceil() as usize;
    let mut pmf = Vec::with_capacity(limit + 1);
    let mut log_term = -mean;
    pmf.push(log_term.exp());
    for k in 1..=limit {
        log_term += mean.ln() - (k as f64).ln();
        pmf.push(log_term.exp());
    }
    // tail[k] = P[X > k], accumulated from the far end for accuracy.
    let mut tail = vec![0.0; limit + 1];
    for k in (0..limit).rev() {
        tail[k] = tail[k + 1] + pmf[k + 1];
    }
    let cut = tail.iter().position(|&t| t < tail_eps).unwrap_or(limit);
    pmf.truncate(cut + 1);
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    pmf
}

/// Edge-perspective distribution `k * p_k / sum(v * p_v)`.
pub fn edge_perspective(node: &[f64]) -> Vec<f64> {
    let mean: f64 = node.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    if mean == 0.0 {
        return vec![0.0; node.len()];
    }
    node.iter().enumerate().map(|(k, p)| k as f64 * p / mean).collect()
}

/// Poisson approximations of the user degree (mean `(1 + epsilon) * beta`)
/// and slot degree (mean `beta`) distributions.
pub fn poisson_degree_pmfs(beta: f64, epsilon: f64, tail_eps: f64) -> Result<DegreeDistributions> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", "must be a finite non-negative number"));
    }
    if !(epsilon > -1.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "must be greater than -1"));
    }
    if !(tail_eps > 0.0 && tail_eps <= 1e-6) {
        return Err(Error::invalid("tail_eps", "must lie in (0, 1e-6]"));
    }
    let node_user = truncated_poisson((1.0 + epsilon) * beta, tail_eps);
    let node_slot = truncated_poisson(beta, tail_eps);
    let edge_user = edge_perspective(&node_user);
    let edge_slot = edge_perspective(&node_slot);
    let truncation = node_user.len().max(node_slot.len()) - 1;
    Ok(DegreeDistributions {
        node_user,
        node_slot,
        edge_user,
        edge_slot,
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(pmf: &[f64]) -> f64 {
        pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    #[test]
    fn access_probability_examples() {
        assert!((slot_access_probability(3.12, 100).unwrap() - 0.0312).abs() < 1e-15);
        assert!((slot_access_probability(7.2, 1000).unwrap() - 0.0072).abs() < 1e-15);
        assert!(slot_access_probability(101.0, 100).is_err());
        assert!(slot_access_probability(-1.0, 100).is_err());
        assert!(slot_access_probability(1.0, 0).is_err());
        assert_eq!(slot_access_probability(100.0, 100).unwrap(), 1.0);
    }

    #[test]
    fn slot_pmf_at_zero_is_exp_minus_beta() {
        let d = poisson_degree_pmfs(3.0, 0.0, DEFAULT_TAIL_EPS).unwrap();
        assert!((d.node_slot[0] - (-3.0f64).exp()).abs() < 1e-12);
        assert!((d.node_slot[0] - 0.049787).abs() < 1e-6);
    }

    #[test]
    fn edge_is_node_shifted_by_one() {
        for mu in [0.5, 3.0, 7.2] {
            let d = poisson_degree_pmfs(mu, 0.0, DEFAULT_TAIL_EPS).unwrap();
            assert_eq!(d.edge_slot[0], 0.0);
            for l in 1..d.edge_slot.len() {
                assert!((d.edge_slot[l] - d.node_slot[l - 1]).abs() < 1e-9, "mu={mu} l={l}");
            }
        }
    }

    #[test]
    fn pmfs_normalized_and_means_match() {
        for (beta, eps) in [(0.5, 0.0), (3.0, 0.07), (7.2, -0.64), (10.0, 2.0)] {
            let d = poisson_degree_pmfs(beta, eps, DEFAULT_TAIL_EPS).unwrap();
            for pmf in [&d.node_user, &d.node_slot, &d.edge_user, &d.edge_slot] {
                assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            assert!((mean(&d.node_slot) - beta).abs() < 1e-9);
            assert!((mean(&d.node_user) - (1.0 + eps) * beta).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_monotone_in_tail_eps() {
        let mut last = usize::MAX;
        for eps in [1e-15, 1e-12, 1e-9, 1e-7, 1e-6] {
            let k = truncated_poisson(7.2, eps).len();
            assert!(k <= last);
            last = k;
        }
    }

    #[test]
    fn rejects_bad_degree_inputs() {
        assert!(poisson_degree_pmfs(3.0, -1.0, 1e-12).is_err());
        assert!(poisson_degree_pmfs(3.0, 0.0, 1e-3).is_err());
        assert!(poisson_degree_pmfs(f64::NAN, 0.0, 1e-12).is_err());
    }

    #[test]
    fn params_json_rejects_unknown_keys() {
        let p = SystemParams::new(100, 3.0, 1.0, 0.1, 0.7, 2.0).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: SystemParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<SystemParams>(v).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(100, 3.0, 1.0, 0.1, 1.5, 2.0).is_err());
        assert!(SystemParams::new(100, 3.0, 0.5, 0.1, 0.5, 2.0).is_err());
        assert!(SystemParams::new(100, 300.0, 1.0, 0.1, 0.5, 2.0).is_err());
        let p = SystemParams::new(100, 3.0, 2.0, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(p.mean_snr, 2.0);
        assert_eq!(p.max_slots, 2000);
    }
}
