//! Property checkers shared by the property suite and the acceptance run.
//!
//! Every checker draws its inputs from a seed and returns `Err` with a
//! description of the first violation it finds.

#![allow(dead_code)]

use std::sync::OnceLock;

use frameless::capture::{
    build_capture_table, capture_check, capture_check_total_power, intra_slot_sic_oracle, ChannelParams,
};
use frameless::density_evolution::{r_sequence, slot_update, slot_update_split, slot_update_thinned, DeConfig};
use frameless::simulator::{ContentionGraph, Receiver};
use frameless::{CaptureTable, SnrMode, SystemParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn exp(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let x: f64 = Exp1.sample(rng);
    mean * x
}

/// Per-user SNRs plus slot participant lists of a random graph.
#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub snrs: Vec<f64>,
    pub slots: Vec<Vec<usize>>,
}

impl RandomGraph {
    pub fn draw(seed: u64) -> Self {
        let mut rng = rng(seed);
        let n = rng.gen_range(2..=40);
        let beta = rng.gen_range(0.5..6.0f64).min(n as f64);
        let mean_snr = rng.gen_range(0.5..20.0);
        let m = rng.gen_range(1..=2 * n);
        let p = beta / n as f64;
        let snrs = (0..n).map(|_| exp(&mut rng, mean_snr)).collect();
        let slots = (0..m).map(|_| (0..n).filter(|_| rng.gen_bool(p)).collect()).collect();
        Self { snrs, slots }
    }

    pub fn build(&self) -> ContentionGraph {
        let mut g = ContentionGraph::from_user_snrs(self.snrs.clone());
        for s in &self.slots {
            g.push_slot(s);
        }
        g
    }

    pub fn peel(&self, receiver: &Receiver, order: &[usize]) -> Vec<usize> {
        let mut g = self.build();
        g.sic_peel_in_order(receiver, order);
        g.resolved_users()
    }
}

fn capture(b: f64) -> Receiver {
    Receiver::Capture(ChannelParams::new(b, 1.0).unwrap())
}

/// The resolved set after peeling does not depend on the slot scan order.
pub fn sic_order_independence(seed: u64) -> Result<(), String> {
    let graph = RandomGraph::draw(seed);
    let mut rng = rng(seed ^ 0x5eed);
    let b = rng.gen_range(1.0..3.0);
    let receiver = capture(b);
    let forward: Vec<usize> = (0..graph.slots.len()).collect();
    let reference = graph.peel(&receiver, &forward);
    for _ in 0..3 {
        let mut order = forward.clone();
        order.shuffle(&mut rng);
        let other = graph.peel(&receiver, &order);
        if other != reference {
            return Err(format!(
                "seed {seed}: order {order:?} gave {other:?}, forward gave {reference:?}"
            ));
        }
    }
    let mut reversed = forward;
    reversed.reverse();
    let other = graph.peel(&receiver, &reversed);
    if other != reference {
        return Err(format!(
            "seed {seed}: reverse order gave {other:?}, forward gave {reference:?}"
        ));
    }
    Ok(())
}

/// Lowering the capture ratio on the same graph never loses a user.
pub fn monotone_in_capture_ratio(seed: u64) -> Result<(), String> {
    let graph = RandomGraph::draw(seed);
    let mut rng = rng(seed ^ 0xb);
    let high = rng.gen_range(1.0..4.0);
    let low = rng.gen_range(1.0..=high);
    let order: Vec<usize> = (0..graph.slots.len()).collect();
    let strict = graph.peel(&capture(high), &order);
    let lenient = graph.peel(&capture(low), &order);
    match strict.iter().find(|u| !lenient.contains(u)) {
        Some(u) => Err(format!("seed {seed}: user {u} resolved with b={high} but not b={low}")),
        None => Ok(()),
    }
}

/// The resolved set after slot `j + 1` contains the one after slot `j`.
pub fn resolved_set_grows(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let n = rng.gen_range(2..=60);
    let beta = rng.gen_range(0.5..8.0f64).min(n as f64);
    let mode = if rng.gen_bool(0.5) {
        SnrMode::PerUserFixed
    } else {
        SnrMode::PerTransmission
    };
    let params = SystemParams::new(n, beta, rng.gen_range(1.0..3.0), rng.gen_range(0.05..2.0), 1.0, 100.0)
        .map_err(|e| e.to_string())?
        .with_snr_mode(mode);
    let receiver = Receiver::from_params(&params, frameless::Reception::Capture).map_err(|e| e.to_string())?;
    let mut graph = ContentionGraph::new(&params, &mut rng).map_err(|e| e.to_string())?;
    let mut previous = Vec::new();
    for j in 0..3 * n {
        graph.extend_graph(&params, &mut rng).map_err(|e| e.to_string())?;
        graph.sic_peel(&receiver);
        let now = graph.resolved_users();
        if let Some(u) = previous.iter().find(|u| !now.contains(u)) {
            return Err(format!("seed {seed}: user {u} lost after slot {}", j + 1));
        }
        previous = now;
    }
    Ok(())
}

/// The interference-plus-noise and total-power forms of the capture
/// condition agree on `samples` random draws.
pub fn capture_forms_agree(seed: u64, samples: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    for _ in 0..samples {
        let b = rng.gen_range(1.0..5.0);
        let mean = rng.gen_range(0.1..20.0);
        let x = exp(&mut rng, mean);
        let k = rng.gen_range(0..6);
        let interference: f64 = (0..k).map(|_| exp(&mut rng, mean)).sum();
        if capture_check(x, interference, b) != capture_check_total_power(x, interference, b) {
            return Err(format!("x={x}, interference={interference}, b={b}"));
        }
    }
    Ok(())
}

/// The oracle's verdict on the tagged user survives any relabeling of the
/// other participants.
pub fn oracle_permutation_invariant(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let k = rng.gen_range(1..=8);
    let b = rng.gen_range(1.0..3.0);
    let snrs: Vec<f64> = (0..k).map(|_| exp(&mut rng, 5.0)).collect();
    let tagged = rng.gen_range(0..k);
    let verdict = intra_slot_sic_oracle(&snrs, tagged, b);
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut rng);
    let permuted: Vec<f64> = perm.iter().map(|&i| snrs[i]).collect();
    let new_tagged = perm.iter().position(|&i| i == tagged).unwrap();
    if intra_slot_sic_oracle(&permuted, new_tagged, b) != verdict {
        return Err(format!("seed {seed}: {snrs:?} tagged {tagged} changed under {perm:?}"));
    }
    Ok(())
}

/// Small capture tables for a few channels, built once per process.
pub fn small_tables() -> &'static [CaptureTable] {
    static TABLES: OnceLock<Vec<CaptureTable>> = OnceLock::new();
    TABLES.get_or_init(|| {
        let t_max = frameless::capture::default_t_max(10.0);
        let mut tables: Vec<CaptureTable> = [(1.0, 0.1), (1.0, 1.0), (2.0, 0.1), (2.0, 1.0), (3.0, 0.5)]
            .iter()
            .enumerate()
            .map(|(i, &(b, ratio))| {
                let channel = ChannelParams::from_ratio(b, ratio).unwrap();
                build_capture_table(channel, t_max, 20_000, 100 + i as u64).unwrap()
            })
            .collect();
        tables.push(CaptureTable::no_capture(t_max));
        tables
    })
}

fn pick_table(rng: &mut ChaCha8Rng) -> &'static CaptureTable {
    let tables = small_tables();
    &tables[rng.gen_range(0..tables.len())]
}

/// `r_m` never increases along the iteration from `r_0 = 1`.
pub fn r_non_increasing(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let table = pick_table(&mut rng);
    let beta = rng.gen_range(0.5..10.0);
    let mn = rng.gen_range(0.05..3.0);
    let config = DeConfig::from_load(beta, mn, table).map_err(|e| e.to_string())?;
    let seq = r_sequence(&config, 200);
    let mut previous = 1.0;
    for (m, &r) in seq.iter().enumerate() {
        // At the fixed point successive values differ only by rounding of
        // the exponent, whose magnitude reaches about 30, so a relative
        // wobble of a few 1e-15 is noise rather than growth.
        if r > previous * (1.0 + 1e-13) {
            return Err(format!(
                "seed {seed}: beta={beta}, M/N={mn}: r_{} = {r} > r_{m} = {previous}",
                m + 1
            ));
        }
        previous = r;
    }
    Ok(())
}

/// The generic, split and thinned slot updates agree to `1e-9`.
pub fn slot_updates_agree(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let table = pick_table(&mut rng);
    let beta = rng.gen_range(0.5..10.0);
    let eps = rng.gen_range(-0.95..2.0);
    let r: f64 = rng.gen_range(0.0..=1.0);
    let config = DeConfig::new(beta, eps, table).map_err(|e| e.to_string())?;
    let generic = slot_update(r, &config).map_err(|e| e.to_string())?;
    let split = slot_update_split(r, &config).map_err(|e| e.to_string())?;
    let thinned = slot_update_thinned(r, beta, table);
    let spread = (generic - split).abs().max((generic - thinned).abs());
    if spread > 1e-9 {
        return Err(format!(
            "seed {seed}: beta={beta}, r={r}: generic {generic}, split {split}, thinned {thinned}"
        ));
    }
    Ok(())
}

/// Capture beyond the singleton term can only lower the slot-side
/// erasure probability.
pub fn capture_lowers_q(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let table = pick_table(&mut rng);
    let mut singleton_only = table.clone();
    singleton_only.pi[1..].iter_mut().for_each(|p| *p = 0.0);
    let beta = rng.gen_range(0.5..10.0);
    let r = rng.gen_range(0.0..=1.0);
    let full = slot_update_thinned(r, beta, table);
    let reduced = slot_update_thinned(r, beta, &singleton_only);
    if full > reduced + 1e-15 {
        return Err(format!("seed {seed}: q {full} with capture > {reduced} without"));
    }
    Ok(())
}

/// `pi_0` is exact, the sequence is non-increasing and bounded below by
/// the first-capture probability.
pub fn pi_table_invariants(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let b = rng.gen_range(1.0..4.0);
    let ratio = rng.gen_range(0.02..2.0);
    let channel = ChannelParams::from_ratio(b, ratio).map_err(|e| e.to_string())?;
    let t_max = rng.gen_range(1..=12);
    let table = build_capture_table(channel, t_max, 10_000, seed).map_err(|e| e.to_string())?;
    table.check_invariants().map_err(|e| format!("seed {seed}: {e}"))
}
