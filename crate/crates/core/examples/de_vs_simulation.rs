//! Fraction of users resolved after a fixed number of slots: the and-or
//! tree prediction against large simulated networks, across the decoding
//! threshold.
//!
//! cargo run --release --example de_vs_simulation

use frameless::capture::{build_capture_table, default_t_max, ChannelParams};
use frameless::density_evolution::{iterate_to_fixed_point, DeConfig};
use frameless::simulator::{run_fixed_length, run_rng, Receiver};
use frameless::{SnrMode, SystemParams};

fn main() -> frameless::Result<()> {
    let (b, ratio, beta, n, runs) = (1.0, 1.0, 6.37, 5000, 20);
    let channel = ChannelParams::from_ratio(b, ratio)?;
    let table = build_capture_table(channel, default_t_max(10.0), 200_000, 0)?;
    let receiver = Receiver::Capture(channel);
    println!("b = {b}, b/snr = {ratio}, beta = {beta}, N = {n}, {runs} runs per point");
    println!(
        "{:>5} {:>8} {:>10} {:>10} {:>10}",
        "M/N", "P_R", "sim mean", "decoded", "fixed SNR"
    );

    for mn in [1.2, 1.3, 1.34, 1.38, 1.45, 1.6] {
        let de = iterate_to_fixed_point(&DeConfig::from_load(beta, mn, &table)?);
        let slots = (mn * n as f64).round() as usize;
        let simulate = |mode| -> frameless::Result<Vec<f64>> {
            let params = SystemParams::new(n, beta, b, ratio, 1.0, 100.0)?.with_snr_mode(mode);
            (0..runs)
                .map(|i| run_fixed_length(&params, &receiver, slots, &mut run_rng(1, i)))
                .collect()
        };
        let fresh = simulate(SnrMode::PerTransmission)?;
        let fixed = simulate(SnrMode::PerUserFixed)?;
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let decoded = fresh.iter().filter(|&&f| f > 0.75).count();
        println!(
            "{mn:>5.2} {:>8.4} {:>10.4} {:>7}/{runs} {:>10.4}",
            de.p_r,
            mean(&fresh),
            decoded,
            mean(&fixed)
        );
    }
    Ok(())
}
