//! Rayleigh-fading capture channel.
//!
//! Received SNRs are exponential with mean `mean_snr` and noise power is
//! normalized to one. A transmission is decoded when its SINR against the
//! uncancelled transmissions in its slot reaches the capture ratio `b`.
//! Within a slot the receiver keeps decoding and cancelling the strongest
//! transmission until the capture condition fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::truncated_poisson;

/// Smallest admissible sample count for a Monte-Carlo table entry.
pub const MIN_TABLE_SAMPLES: u64 = 10_000;
pub const DEFAULT_TABLE_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Capture ratio `b`; only the narrowband regime `b >= 1` is modelled.
    pub capture_ratio: f64,
    /// Mean received SNR.
    pub mean_snr: f64,
}

impl ChannelParams {
    pub fn new(capture_ratio: f64, mean_snr: f64) -> Result<Self> {
        if !(capture_ratio >= 1.0) || !capture_ratio.is_finite() {
            return Err(Error::invalid("capture_ratio", "must be finite and at least 1"));
        }
        if !(mean_snr > 0.0) || !mean_snr.is_finite() {
            return Err(Error::invalid("mean_snr", "must be finite and positive"));
        }
        Ok(Self {
            capture_ratio,
            mean_snr,
        })
    }

    /// Channel given by the capture ratio and the ratio `b / mean_snr`.
    pub fn from_ratio(capture_ratio: f64, snr_ratio: f64) -> Result<Self> {
        if !(snr_ratio > 0.0) || !snr_ratio.is_finite() {
            return Err(Error::invalid("snr_ratio", "must be finite and positive"));
        }
        Self::new(capture_ratio, capture_ratio / snr_ratio)
    }

    /// `b / mean_snr`.
    pub fn snr_ratio(&self) -> f64 {
        self.capture_ratio / self.mean_snr
    }

    /// `b' = b / (b + 1)`, the threshold in the `X >= b' Y` form of the
    /// capture condition.
    pub fn b_prime(&self) -> f64 {
        self.capture_ratio / (self.capture_ratio + 1.0)
    }
}

/// Exponential SNR sampler with a fixed mean.
#[derive(Debug, Clone, Copy)]
pub struct SnrSampler {
    mean_snr: f64,
}

impl SnrSampler {
    pub fn new(mean_snr: f64) -> Result<Self> {
        if !(mean_snr > 0.0) || !mean_snr.is_finite() {
            return Err(Error::invalid("mean_snr", "must be finite and positive"));
        }
        Ok(Self { mean_snr })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = Exp1.sample(rng);
            if x > 0.0 {
                return x * self.mean_snr;
            }
        }
    }
}

/// Draws one strictly positive exponential SNR with mean `mean_snr`.
pub fn sample_snr<R: Rng + ?Sized>(mean_snr: f64, rng: &mut R) -> Result<f64> {
    Ok(SnrSampler::new(mean_snr)?.sample(rng))
}

/// SINR capture test with unit noise: `snr / (1 + interference) >= b`.
#[inline]
pub fn capture_check(tagged_snr: f64, residual_interference_sum: f64, b: f64) -> bool {
    tagged_snr >= b * (1.0 + residual_interference_sum)
}

/// The same test written against total received power:
/// `snr >= b' * (1 + snr + interference)` with `b' = b / (b + 1)`.
#[inline]
pub fn capture_check_total_power(tagged_snr: f64, residual_interference_sum: f64, b: f64) -> bool {
    let b_prime = b / (b + 1.0);
    tagged_snr >= b_prime * (1.0 + tagged_snr + residual_interference_sum)
}

/// Probability of decoding a transmission alone in its slot, `exp(-b / mean_snr)`.
pub fn singleton_capture_prob(b: f64, mean_snr: f64) -> f64 {
    (-b / mean_snr).exp()
}

/// Probability that a tagged transmission is the first one captured among
/// `t` interferers: `exp(-b / mean_snr) / (1 + b)^t`.
pub fn c1_closed_form(t: usize, b: f64, mean_snr: f64) -> f64 {
    singleton_capture_prob(b, mean_snr) / (1.0 + b).powi(t as i32)
}

/// Stage (1-based) at which intra-slot SIC captures `snrs[tagged_index]`,
/// or `None` if it is never captured.
///
/// Repeatedly tests the strongest uncancelled transmission against the
/// rest plus unit noise and cancels it on success. Ties go to the lower
/// index.
pub fn intra_slot_sic_stage(snrs: &[f64], tagged_index: usize, b: f64) -> Option<usize> {
    assert!(tagged_index < snrs.len(), "tagged index out of range");
    let mut order: Vec<usize> = (0..snrs.len()).collect();
    order.sort_by(|&i, &j| snrs[j].total_cmp(&snrs[i]).then(i.cmp(&j)));
    // residual[k] = sum of order[k+1..]; summed weakest-first so the value
    // does not depend on the input permutation.
    let mut residual = vec![0.0; order.len()];
    for k in (0..order.len().saturating_sub(1)).rev() {
        residual[k] = residual[k + 1] + snrs[order[k + 1]];
    }
    for (stage, (&idx, &interference)) in order.iter().zip(&residual).enumerate() {
        if !capture_check(snrs[idx], interference, b) {
            return None;
        }
        if idx == tagged_index {
            return Some(stage + 1);
        }
    }
    None
}

/// Whether intra-slot SIC eventually captures `snrs[tagged_index]`.
pub fn intra_slot_sic_oracle(snrs: &[f64], tagged_index: usize, b: f64) -> bool {
    intra_slot_sic_stage(snrs, tagged_index, b).is_some()
}

/// Per-stage capture counts of the tagged transmission over random draws.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFrequencies {
    pub samples: u64,
    /// `by_stage[h - 1]` counts draws where the tagged user was captured h-th.
    pub by_stage: Vec<u64>,
}

impl StageFrequencies {
    pub fn captured(&self) -> u64 {
        self.by_stage.iter().sum()
    }

    /// Estimate and standard error of the probability of capture at `stage`.
    pub fn stage_estimate(&self, stage: usize) -> (f64, f64) {
        proportion(self.by_stage[stage - 1], self.samples)
    }

    pub fn capture_estimate(&self) -> (f64, f64) {
        proportion(self.captured(), self.samples)
    }
}

fn proportion(hits: u64, n: u64) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Runs the intra-slot oracle on `samples` draws of `t + 1` exponential
/// SNRs, the first one tagged, and tallies the capture stage.
pub fn oracle_stage_frequencies<R: Rng + ?Sized>(
    channel: &ChannelParams,
    t: usize,
    samples: u64,
    rng: &mut R,
) -> StageFrequencies {
    let sampler = SnrSampler {
        mean_snr: channel.mean_snr,
    };
    let mut by_stage = vec![0u64; t + 1];
    let mut snrs = vec![0.0; t + 1];
    for _ in 0..samples {
        snrs.iter_mut().for_each(|x| *x = sampler.sample(rng));
        if let Some(h) = intra_slot_sic_stage(&snrs, 0, channel.capture_ratio) {
            by_stage[h - 1] += 1;
        }
    }
    StageFrequencies { samples, by_stage }
}

/// Probability over the tagged SNR that the tagged transmission is
/// captured at stage two or later, given the interferer SNRs.
///
/// Stage `h` needs the `h - 1` strongest interferers captured first with
/// the tagged signal still present, then the tagged signal captured
/// against the rest. Both are linear bounds on the tagged SNR, so each
/// stage contributes the exponential mass of an interval.
fn later_stage_mass(interferers: &mut [f64], b: f64, mean_snr: f64) -> f64 {
    let (max_idx, &max) = match interferers.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        Some(m) => m,
        None => return 0.0,
    };
    let total: f64 = interferers.iter().sum();
    // Every stage needs the tagged SNR >= b, so an upper bound at or
    // below b rules out all later stages.
    if max / b - 1.0 - (total - max) <= b {
        return 0.0;
    }
    interferers.swap(0, max_idx);
    interferers[1..].sort_unstable_by(|x, y| y.total_cmp(x));
    let mut upper = f64::INFINITY;
    let mut rest = total;
    let mut mass = 0.0;
    for &strongest in interferers.iter() {
        rest -= strongest;
        let rest = rest.max(0.0);
        upper = upper.min(strongest / b - 1.0 - rest);
        if upper <= b {
            break;
        }
        let lower = b * (1.0 + rest);
        if upper > lower {
            mass += (-lower / mean_snr).exp() - (-upper / mean_snr).exp();
        }
    }
    mass
}

/// Probabilities `pi[t]` that a tagged transmission is eventually captured
/// in a slot with `t` uncancelled interferers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureTable {
    /// `None` for the collision channel: singletons always decode and
    /// collisions never do.
    pub channel: Option<ChannelParams>,
    pub pi: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples_per_entry: u64,
    pub t_max: usize,
    pub seed: u64,
}

impl CaptureTable {
    /// Collision channel: `pi[0] = 1` and `pi[t] = 0` for `t >= 1`.
    pub fn no_capture(t_max: usize) -> Self {
        let mut pi = vec![0.0; t_max + 1];
        pi[0] = 1.0;
        Self {
            channel: None,
            pi,
            stderr: vec![0.0; t_max + 1],
            samples_per_entry: 0,
            t_max,
            seed: 0,
        }
    }

    /// Entry for `t` interferers, or a coverage error.
    pub fn get(&self, t: usize) -> Result<f64> {
        self.pi.get(t).copied().ok_or(Error::TableCoverage {
            required: t,
            available: self.t_max,
        })
    }

    /// Checks the structural invariants: exact `pi[0]`, entries in
    /// `[C1(t), 1]`, non-increasing in `t`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.pi.len() != self.t_max + 1 || self.stderr.len() != self.t_max + 1 {
            return Err("table length does not match t_max".into());
        }
        let Some(channel) = self.channel else {
            return Ok(());
        };
        let pi0 = singleton_capture_prob(channel.capture_ratio, channel.mean_snr);
        if self.pi[0] != pi0 {
            return Err(format!("pi[0] = {} but exp(-b/snr) = {pi0}", self.pi[0]));
        }
        for (t, &p) in self.pi.iter().enumerate() {
            let c1 = c1_closed_form(t, channel.capture_ratio, channel.mean_snr);
            if !(p >= c1 && p <= 1.0) {
                return Err(format!("pi[{t}] = {p} outside [C1 = {c1}, 1]"));
            }
            if t > 0 && p > self.pi[t - 1] {
                return Err(format!("pi[{t}] = {p} exceeds pi[{}]", t - 1));
            }
        }
        Ok(())
    }
}

/// Largest interferer count the and-or tree solver queries when `beta`
/// is at most `beta_max`: the slot-degree truncation index minus one.
pub fn default_t_max(beta_max: f64) -> usize {
    truncated_poisson(beta_max, crate::model::DEFAULT_TAIL_EPS)
        .len()
        .saturating_sub(2)
}

/// Builds `pi[0..=t_max]` for a Rayleigh capture channel.
///
/// `pi[0]` is exact. For `t >= 1` each entry is the closed-form first-capture
/// probability plus a Monte-Carlo estimate of the later-stage capture mass,
/// where the tagged SNR is integrated out analytically for every draw of
/// the `t` interferers. The sequence is then replaced by its running
/// minimum, which keeps every entry at or above the first-capture term.
/// Entry `t` uses its own stream of a ChaCha8 generator seeded by `seed`.
pub fn build_capture_table(channel: ChannelParams, t_max: usize, samples: u64, seed: u64) -> Result<CaptureTable> {
    if samples < MIN_TABLE_SAMPLES {
        return Err(Error::TooFewSamples {
            samples,
            floor: MIN_TABLE_SAMPLES,
        });
    }
    let b = channel.capture_ratio;
    let gamma = channel.mean_snr;
    let sampler = SnrSampler::new(gamma)?;
    let entries: Vec<(f64, f64)> = (0..=t_max)
        .into_par_iter()
        .map(|t| {
            let c1 = c1_closed_form(t, b, gamma);
            if t == 0 {
                return (c1, 0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut interferers = vec![0.0; t];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..samples {
                interferers.iter_mut().for_each(|x| *x = sampler.sample(&mut rng));
                let m = later_stage_mass(&mut interferers, b, gamma);
                sum += m;
                sum_sq += m * m;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0);
            ((c1 + mean).min(1.0), (var / (n - 1.0)).sqrt())
        })
        .collect();
    let mut pi: Vec<f64> = entries.iter().map(|e| e.0).collect();
    for t in 1..pi.len() {
        pi[t] = pi[t].min(pi[t - 1]);
    }
    Ok(CaptureTable {
        channel: Some(channel),
        pi,
        stderr: entries.iter().map(|e| e.1).collect(),
        samples_per_entry: samples,
        t_max,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capture_check_examples() {
        assert!(capture_check(5.0, 0.0, 1.0));
        assert!(!capture_check(2.0, 1.5, 1.0));
        assert!(capture_check(3.0, 1.0, 1.0));
        assert!(capture_check_total_power(3.0, 1.0, 1.0));
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelParams::new(0.5, 1.0).is_err());
        assert!(ChannelParams::new(1.0, 0.0).is_err());
        assert!(ChannelParams::from_ratio(1.0, 0.0).is_err());
        let c = ChannelParams::from_ratio(2.0, 0.1).unwrap();
        assert!((c.mean_snr - 20.0).abs() < 1e-12);
        assert!((c.b_prime() - 2.0 / 3.0).abs() < 1e-15);
        assert!(sample_snr(0.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn closed_forms() {
        assert!((singleton_capture_prob(1.0, 10.0) - 0.904837).abs() < 1e-6);
        assert!((singleton_capture_prob(1.0, 1.0) - 0.367879).abs() < 1e-6);
        assert!((singleton_capture_prob(1.0, 1e12) - 1.0).abs() < 1e-9);
        assert_eq!(c1_closed_form(0, 1.0, 10.0), singleton_capture_prob(1.0, 10.0));
        assert!((c1_closed_form(2, 1.0, 10.0) - 0.226209).abs() < 1e-6);
        assert!(c1_closed_form(200, 1.0, 10.0) < 1e-60);
    }

    #[test]
    fn oracle_hand_traces() {
        assert!(intra_slot_sic_oracle(&[5.0], 0, 1.0));
        assert!(!intra_slot_sic_oracle(&[0.5], 0, 1.0));
        // 10 / (1 + 0.5) >= 1 captures index 0, then 0.5 < 1 fails.
        assert_eq!(intra_slot_sic_stage(&[10.0, 0.5], 0, 1.0), Some(1));
        assert!(!intra_slot_sic_oracle(&[10.0, 0.5], 1, 1.0));
        assert_eq!(intra_slot_sic_stage(&[10.0, 3.0], 1, 1.0), Some(2));
        // strongest fails, so nothing below it is examined
        assert!(!intra_slot_sic_oracle(&[3.0, 2.5, 5.0], 0, 1.0));
    }

    #[test]
    fn later_stage_mass_matches_direct_integration() {
        // Midpoint rule over the tagged SNR as an independent check.
        let (b, gamma) = (1.0, 10.0);
        let interferers = [30.0, 2.0, 0.4];
        let mut scratch = interferers.to_vec();
        let got = later_stage_mass(&mut scratch, b, gamma);
        let dx = 1e-4;
        let mut integral = 0.0;
        let mut x = dx / 2.0;
        while x < 400.0 {
            let mut snrs = vec![x];
            snrs.extend_from_slice(&interferers);
            if matches!(intra_slot_sic_stage(&snrs, 0, b), Some(h) if h >= 2) {
                integral += (-x / gamma).exp() / gamma * dx;
            }
            x += dx;
        }
        assert!(got > 0.0);
        assert!((got - integral).abs() < 1e-4, "{got} vs {integral}");
    }

    #[test]
    fn table_rejects_few_samples() {
        let c = ChannelParams::from_ratio(1.0, 0.1).unwrap();
        assert!(matches!(
            build_capture_table(c, 3, 100, 0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn table_basics() {
        let c = ChannelParams::from_ratio(1.0, 0.1).unwrap();
        let table = build_capture_table(c, 6, 20_000, 7).unwrap();
        assert_eq!(table.pi[0], (-0.1f64).exp());
        assert!((table.pi[0] - 0.904837).abs() < 1e-6);
        table.check_invariants().unwrap();
        assert_eq!(table, build_capture_table(c, 6, 20_000, 7).unwrap());
        assert!(table.get(7).is_err());
    }

    #[test]
    fn no_capture_table() {
        let t = CaptureTable::no_capture(4);
        assert_eq!(t.pi, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        t.check_invariants().unwrap();
    }

    #[test]
    fn t_max_follows_slot_truncation() {
        let k = truncated_poisson(10.0, 1e-12).len() - 1;
        assert_eq!(default_t_max(10.0), k - 1);
    }
}
