//! Finite-N Monte-Carlo simulation of one frameless ALOHA contention period.
//!
//! Slots are appended one at a time. After each slot the receiver runs
//! SIC to a fixed point: inside a slot the strongest residual transmission
//! is decoded whenever its SINR reaches the capture ratio, and a decoded
//! user is cancelled from every slot holding one of its replicas.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capture::{capture_check, ChannelParams, SnrSampler};
use crate::error::{Error, Result};
use crate::model::{SnrMode, SystemParams};

/// Per-run random generator: ChaCha8 seeded with `base_seed + run_index`.
pub fn run_rng(base_seed: u64, run_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(run_index))
}

/// Decoding rule applied inside a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Receiver {
    /// SINR capture with unit noise.
    Capture(ChannelParams),
    /// No noise and no capture: exactly the singleton slots decode.
    Collision,
}

/// Serializable selector for [`Receiver`]; the channel itself comes from
/// [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reception {
    #[default]
    Capture,
    Collision,
}

impl Receiver {
    pub fn from_params(params: &SystemParams, reception: Reception) -> Result<Self> {
        Ok(match reception {
            Reception::Capture => Receiver::Capture(params.channel()?),
            Reception::Collision => Receiver::Collision,
        })
    }

    /// Capture ratio and `b / mean_snr`, or `None` for the collision channel.
    pub fn channel(&self) -> Option<ChannelParams> {
        match self {
            Receiver::Capture(c) => Some(*c),
            Receiver::Collision => None,
        }
    }

    #[inline]
    fn decodes(&self, strongest: f64, interference: f64, degree: usize) -> bool {
        match self {
            Receiver::Capture(c) => capture_check(strongest, interference, c.capture_ratio),
            Receiver::Collision => degree == 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub user: u32,
    pub snr: f64,
}

/// Bipartite user/slot graph with the residual (not yet cancelled)
/// transmissions of every slot.
#[derive(Debug, Clone)]
pub struct ContentionGraph {
    n_users: usize,
    snr_mode: SnrMode,
    sampler: SnrSampler,
    user_snr: Vec<f64>,
    user_slots: Vec<Vec<u32>>,
    slots: Vec<Vec<Transmission>>,
    degrees: Vec<u32>,
    resolved: Vec<bool>,
    resolved_count: usize,
    pending: Vec<usize>,
}

impl ContentionGraph {
    /// Empty graph. In [`SnrMode::PerUserFixed`] the per-user SNRs are
    /// drawn here.
    pub fn new<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Result<Self> {
        let sampler = SnrSampler::new(params.mean_snr)?;
        let user_snr = match params.snr_mode {
            SnrMode::PerUserFixed => (0..params.n_users).map(|_| sampler.sample(rng)).collect(),
            SnrMode::PerTransmission => Vec::new(),
        };
        Ok(Self::with_user_snrs(params.n_users, params.snr_mode, sampler, user_snr))
    }

    fn with_user_snrs(n_users: usize, snr_mode: SnrMode, sampler: SnrSampler, user_snr: Vec<f64>) -> Self {
        Self {
            n_users,
            snr_mode,
            sampler,
            user_snr,
            user_slots: vec![Vec::new(); n_users],
            slots: Vec::new(),
            degrees: Vec::new(),
            resolved: vec![false; n_users],
            resolved_count: 0,
            pending: Vec::new(),
        }
    }

    /// Graph with fixed per-user SNRs and no slots, for hand-built topologies.
    pub fn from_user_snrs(user_snr: Vec<f64>) -> Self {
        let n = user_snr.len();
        Self::with_user_snrs(n, SnrMode::PerUserFixed, SnrSampler::new(1.0).unwrap(), user_snr)
    }

    /// Appends a slot with the given participants, all received at their
    /// per-user SNR. Resolved participants are cancelled on arrival.
    pub fn push_slot(&mut self, users: &[usize]) {
        let j = self.slots.len();
        let mut slot = Vec::with_capacity(users.len());
        for &u in users {
            let snr = self.user_snr[u];
            self.user_slots[u].push(j as u32);
            if !self.resolved[u] {
                slot.push(Transmission { user: u as u32, snr });
            }
        }
        self.degrees.push(users.len() as u32);
        self.slots.push(slot);
        self.pending.push(j);
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn resolved_count(&self) -> usize {
        self.resolved_count
    }

    pub fn is_resolved(&self, user: usize) -> bool {
        self.resolved[user]
    }

    pub fn resolved_users(&self) -> Vec<usize> {
        (0..self.n_users).filter(|&u| self.resolved[u]).collect()
    }

    /// Residual transmissions of slot `j`.
    pub fn residual(&self, j: usize) -> &[Transmission] {
        &self.slots[j]
    }

    /// Number of transmissions originally received in slot `j`.
    pub fn slot_degree(&self, j: usize) -> usize {
        self.degrees[j] as usize
    }

    pub fn user_slots(&self, user: usize) -> &[u32] {
        &self.user_slots[user]
    }

    pub fn user_snr(&self, user: usize) -> Option<f64> {
        self.user_snr.get(user).copied()
    }

    /// True when no unresolved user can ever be decoded again: SNRs are
    /// fixed per user and every unresolved one is below the capture ratio,
    /// which even a singleton slot cannot overcome.
    pub fn is_stalled(&self, receiver: &Receiver) -> bool {
        match (receiver, self.snr_mode) {
            (Receiver::Capture(c), SnrMode::PerUserFixed) => {
                (0..self.n_users).all(|u| self.resolved[u] || self.user_snr[u] < c.capture_ratio)
            }
            _ => false,
        }
    }

    /// Appends one slot in which every user transmits independently with
    /// probability `beta / n_users`.
    ///
    /// Participation is drawn as a binomial count followed by a uniform
    /// subset of that size, which is the same joint law as independent
    /// per-user coin flips. Every user is eligible, resolved or not, so the
    /// random draws do not depend on decoding outcomes.
    pub fn extend_graph<R: Rng + ?Sized>(&mut self, params: &SystemParams, rng: &mut R) -> Result<()> {
        if self.slots.len() >= params.max_slots {
            return Err(Error::SlotCap(params.max_slots));
        }
        let p = crate::model::slot_access_probability(params.beta, self.n_users)?;
        let count = Binomial::new(self.n_users as u64, p)
            .map_err(|e| Error::invalid("beta", e.to_string()))?
            .sample(rng) as usize;
        let mut users = index::sample(rng, self.n_users, count).into_vec();
        users.sort_unstable();
        let j = self.slots.len();
        let mut slot = Vec::with_capacity(count);
        for u in users {
            let snr = match self.snr_mode {
                SnrMode::PerUserFixed => self.user_snr[u],
                SnrMode::PerTransmission => self.sampler.sample(rng),
            };
            self.user_slots[u].push(j as u32);
            if !self.resolved[u] {
                slot.push(Transmission { user: u as u32, snr });
            }
        }
        self.degrees.push(count as u32);
        self.slots.push(slot);
        self.pending.push(j);
        Ok(())
    }

    /// Runs SIC until no slot yields another decode. Returns the number of
    /// newly resolved users.
    pub fn sic_peel(&mut self, receiver: &Receiver) -> usize {
        let before = self.resolved_count;
        while let Some(j) = self.pending.pop() {
            self.drain_slot(j, receiver);
        }
        self.resolved_count - before
    }

    /// Runs SIC with every slot queued in the given scan order. The final
    /// resolved set does not depend on the order.
    pub fn sic_peel_in_order(&mut self, receiver: &Receiver, order: &[usize]) -> usize {
        self.pending.clear();
        self.pending.extend(order.iter().rev().copied());
        self.sic_peel(receiver)
    }

    fn drain_slot(&mut self, j: usize, receiver: &Receiver) {
        loop {
            let slot = &self.slots[j];
            let Some((pos, strongest)) = slot
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.snr.total_cmp(&b.1.snr).then(b.1.user.cmp(&a.1.user)))
            else {
                return;
            };
            let interference: f64 = slot
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != pos)
                .map(|(_, t)| t.snr)
                .sum();
            if !receiver.decodes(strongest.snr, interference, slot.len()) {
                return;
            }
            let user = strongest.user as usize;
            self.resolve(user, j);
        }
    }

    fn resolve(&mut self, user: usize, from_slot: usize) {
        self.resolved[user] = true;
        self.resolved_count += 1;
        for k in 0..self.user_slots[user].len() {
            let j = self.user_slots[user][k] as usize;
            let slot = &mut self.slots[j];
            if let Some(pos) = slot.iter().position(|t| t.user as usize == user) {
                slot.swap_remove(pos);
                if j != from_slot && !slot.is_empty() {
                    self.pending.push(j);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationCause {
    FractionThreshold,
    ThroughputThreshold,
    AllResolved,
    SlotCap,
}

impl TerminationCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationCause::FractionThreshold => "fraction_threshold",
            TerminationCause::ThroughputThreshold => "throughput_threshold",
            TerminationCause::AllResolved => "all_resolved",
            TerminationCause::SlotCap => "slot_cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub fraction_resolved: f64,
    pub throughput: f64,
}

/// Outcome of one contention period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    /// `M`, beacon excluded.
    pub slots_used: usize,
    /// `N_R`.
    pub resolved_count: usize,
    /// `N_R / N`.
    pub fraction_resolved: f64,
    /// `N_R / (M + 1)`; the extra slot is the beacon.
    pub throughput: f64,
    pub termination_cause: TerminationCause,
    /// `(F_R, T_I)` after each slot.
    pub trajectory: Vec<TrajectoryPoint>,
}

#[inline]
pub(crate) fn fraction_resolved(resolved: usize, n_users: usize) -> f64 {
    resolved as f64 / n_users as f64
}

#[inline]
pub(crate) fn instantaneous_throughput(resolved: usize, slots: usize) -> f64 {
    resolved as f64 / (slots + 1) as f64
}

/// Stop rule checked after SIC completes for slot `slots`.
pub(crate) fn stop_cause(params: &SystemParams, resolved: usize, slots: usize) -> Option<TerminationCause> {
    if fraction_resolved(resolved, params.n_users) >= params.threshold_v {
        Some(TerminationCause::FractionThreshold)
    } else if instantaneous_throughput(resolved, slots) >= params.threshold_s {
        Some(TerminationCause::ThroughputThreshold)
    } else if resolved == params.n_users {
        Some(TerminationCause::AllResolved)
    } else if slots >= params.max_slots {
        Some(TerminationCause::SlotCap)
    } else {
        None
    }
}

/// Simulates one contention period with the termination rule
/// `F_R >= V` or `T_I >= S`.
pub fn run_contention<R: Rng + ?Sized>(params: &SystemParams, receiver: &Receiver, rng: &mut R) -> Result<RunStats> {
    params.validate()?;
    let mut graph = ContentionGraph::new(params, rng)?;
    let mut trajectory = Vec::new();
    loop {
        graph.extend_graph(params, rng)?;
        graph.sic_peel(receiver);
        let slots = graph.slot_count();
        let resolved = graph.resolved_count();
        trajectory.push(TrajectoryPoint {
            fraction_resolved: fraction_resolved(resolved, params.n_users),
            throughput: instantaneous_throughput(resolved, slots),
        });
        if let Some(cause) = stop_cause(params, resolved, slots) {
            return Ok(RunStats {
                slots_used: slots,
                resolved_count: resolved,
                fraction_resolved: fraction_resolved(resolved, params.n_users),
                throughput: instantaneous_throughput(resolved, slots),
                termination_cause: cause,
                trajectory,
            });
        }
    }
}

/// Fraction of users resolved after exactly `slots` slots, ignoring the
/// termination thresholds.
pub fn run_fixed_length<R: Rng + ?Sized>(
    params: &SystemParams,
    receiver: &Receiver,
    slots: usize,
    rng: &mut R,
) -> Result<f64> {
    let params = SystemParams {
        max_slots: params.max_slots.max(slots),
        ..params.clone()
    };
    let mut graph = ContentionGraph::new(&params, rng)?;
    for _ in 0..slots {
        graph.extend_graph(&params, rng)?;
        graph.sic_peel(receiver);
    }
    Ok(fraction_resolved(graph.resolved_count(), params.n_users))
}

/// Resolved-user counts after every slot of a threshold-free run, used to
/// apply many `(V, S)` termination rules to the same random draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_users: usize,
    pub max_slots: usize,
    /// `resolved[j]` is `N_R` after slot `j + 1`.
    pub resolved: Vec<u32>,
    throughput_prefix_max: Vec<f64>,
}

impl Trajectory {
    /// Runs slots until every user is resolved, the slot cap is hit, or no
    /// further decoding is possible. In the last case the remaining slots
    /// would leave `N_R` unchanged and are not simulated.
    pub fn simulate<R: Rng + ?Sized>(params: &SystemParams, receiver: &Receiver, rng: &mut R) -> Result<Self> {
        let mut graph = ContentionGraph::new(params, rng)?;
        let mut resolved = Vec::new();
        while graph.slot_count() < params.max_slots && graph.resolved_count() < params.n_users {
            if graph.slot_count() > 0 && graph.is_stalled(receiver) {
                break;
            }
            graph.extend_graph(params, rng)?;
            graph.sic_peel(receiver);
            resolved.push(graph.resolved_count() as u32);
        }
        let mut running = f64::NEG_INFINITY;
        let throughput_prefix_max = resolved
            .iter()
            .enumerate()
            .map(|(j, &nr)| {
                running = running.max(instantaneous_throughput(nr as usize, j + 1));
                running
            })
            .collect();
        Ok(Self {
            n_users: params.n_users,
            max_slots: params.max_slots,
            resolved,
            throughput_prefix_max,
        })
    }

    /// Applies the termination rule with thresholds `(v, s)`.
    ///
    /// Gives the same `(M, N_R, cause)` as [`run_contention`] on the same
    /// random stream.
    pub fn terminate(&self, v: f64, s: f64) -> (usize, usize, TerminationCause) {
        let n = self.n_users;
        let len = self.resolved.len();
        let by_fraction = self
            .resolved
            .partition_point(|&nr| fraction_resolved(nr as usize, n) < v);
        let by_throughput = self.throughput_prefix_max.partition_point(|&t| t < s);
        let by_all = self.resolved.partition_point(|&nr| (nr as usize) < n);
        let first = by_fraction.min(by_throughput).min(by_all);
        if first < len {
            let slots = first + 1;
            let nr = self.resolved[first] as usize;
            let cause = if fraction_resolved(nr, n) >= v {
                TerminationCause::FractionThreshold
            } else if instantaneous_throughput(nr, slots) >= s {
                TerminationCause::ThroughputThreshold
            } else {
                TerminationCause::AllResolved
            };
            return (slots, nr, cause);
        }
        // Past the simulated prefix N_R is frozen, F_R stays below V and
        // T_I only falls, so the run ends at the cap.
        let nr = self.resolved.last().copied().unwrap_or(0) as usize;
        (self.max_slots, nr, TerminationCause::SlotCap)
    }
}

/// One CSV row of a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub beta: f64,
    pub threshold_v: f64,
    pub threshold_s: f64,
    /// Capture ratio, `None` on the collision channel.
    pub capture_ratio: Option<f64>,
    pub snr_ratio: Option<f64>,
    pub n_users: usize,
    pub slots_used: usize,
    pub resolved_count: usize,
    pub fraction_resolved: f64,
    pub throughput: f64,
    pub cause: TerminationCause,
}

/// Mean and standard error over a batch of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub mean_throughput: f64,
    pub se_throughput: f64,
    pub mean_fraction_resolved: f64,
    pub se_fraction_resolved: f64,
    /// Mean of `M / N`.
    pub mean_slots_per_user: f64,
    pub se_slots_per_user: f64,
}

/// Mean and standard error of a sample, summed in order.
pub(crate) fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
    for x in values {
        n += 1;
        sum += x;
        sum_sq += x * x;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n as f64 * mean * mean) / (n - 1) as f64).max(0.0);
    (mean, (var / n as f64).sqrt())
}

impl BatchSummary {
    /// Summary over `(slots_used, resolved_count)` pairs of runs with
    /// `n_users` users.
    pub fn from_outcomes(n_users: usize, outcomes: &[(usize, usize)]) -> Self {
        let (mean_throughput, se_throughput) = mean_se(outcomes.iter().map(|&(m, nr)| instantaneous_throughput(nr, m)));
        let (mean_fraction_resolved, se_fraction_resolved) =
            mean_se(outcomes.iter().map(|&(_, nr)| fraction_resolved(nr, n_users)));
        let (mean_slots_per_user, se_slots_per_user) =
            mean_se(outcomes.iter().map(|&(m, _)| m as f64 / n_users as f64));
        Self {
            runs: outcomes.len(),
            mean_throughput,
            se_throughput,
            mean_fraction_resolved,
            se_fraction_resolved,
            mean_slots_per_user,
            se_slots_per_user,
        }
    }

    pub fn from_records(records: &[RunRecord]) -> Self {
        let n = records.first().map_or(1, |r| r.n_users);
        let outcomes: Vec<_> = records.iter().map(|r| (r.slots_used, r.resolved_count)).collect();
        Self::from_outcomes(n, &outcomes)
    }
}

/// Runs `runs` independent contention periods, run `i` seeded with
/// `base_seed + i`.
pub fn run_batch(params: &SystemParams, receiver: &Receiver, runs: usize) -> Result<Vec<RunRecord>> {
    params.validate()?;
    let channel = receiver.channel();
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = params.base_seed.wrapping_add(i);
            let stats = run_contention(params, receiver, &mut run_rng(params.base_seed, i))?;
            Ok(RunRecord {
                seed,
                beta: params.beta,
                threshold_v: params.threshold_v,
                threshold_s: params.threshold_s,
                capture_ratio: channel.map(|c| c.capture_ratio),
                snr_ratio: channel.map(|c| c.snr_ratio()),
                n_users: params.n_users,
                slots_used: stats.slots_used,
                resolved_count: stats.resolved_count,
                fraction_resolved: stats.fraction_resolved,
                throughput: stats.throughput,
                cause: stats.termination_cause,
            })
        })
        .collect()
}
