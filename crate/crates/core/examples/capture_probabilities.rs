//! Capture probabilities on a Rayleigh channel: the closed-form
//! first-capture term against the intra-slot SIC oracle, and the table of
//! eventual-capture probabilities the and-or tree solver consumes.
//!
//! cargo run --release --example capture_probabilities

use frameless::capture::{build_capture_table, c1_closed_form, oracle_stage_frequencies, ChannelParams};
use frameless::simulator::run_rng;

fn main() -> frameless::Result<()> {
    let channel = ChannelParams::from_ratio(1.0, 0.1)?;
    println!("b = {}, mean SNR = {}", channel.capture_ratio, channel.mean_snr);
    println!(
        "{:>3} {:>10} {:>10} {:>10} {:>10}",
        "t", "C1 exact", "C1 oracle", "any stage", "table"
    );

    let t_max = 8;
    let table = build_capture_table(channel, t_max, 200_000, 1)?;
    for t in 0..=t_max {
        let freq = oracle_stage_frequencies(&channel, t, 200_000, &mut run_rng(7, t as u64));
        let (first, _) = freq.stage_estimate(1);
        let (any, _) = freq.capture_estimate();
        println!(
            "{t:>3} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            c1_closed_form(t, channel.capture_ratio, channel.mean_snr),
            first,
            any,
            table.pi[t]
        );
    }
    Ok(())
}
