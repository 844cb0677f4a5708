//! Asymptotic throughput from the and-or tree: a single fixed point, then
//! the throughput-maximizing access rate and load for a channel.
//!
//! cargo run --release --example asymptotic_throughput

use frameless::capture::{build_capture_table, default_t_max, ChannelParams};
use frameless::density_evolution::{curve_maximum, iterate_to_fixed_point, r_sequence, throughput_curve, DeConfig};
use frameless::sweep::GridSpec;
use frameless::CaptureTable;

fn main() -> frameless::Result<()> {
    let t_max = default_t_max(10.0);
    let channel = ChannelParams::from_ratio(1.0, 0.1)?;
    let table = build_capture_table(channel, t_max, 200_000, 0)?;

    let config = DeConfig::from_load(7.2, 0.36, &table)?;
    let first: Vec<String> = r_sequence(&config, 6).iter().map(|r| format!("{r:.4}")).collect();
    let outcome = iterate_to_fixed_point(&config);
    println!("beta = 7.2, M/N = 0.36");
    println!("  r iterates: {} ...", first.join(" "));
    println!(
        "  P_R = {:.4}, T = {:.4} after {} iterations",
        outcome.p_r, outcome.throughput, outcome.state.iteration
    );

    let loads = GridSpec::new(0.05, 3.0, 0.01).values();
    let betas = GridSpec::new(0.5, 10.0, 0.1).values();
    for (label, table) in [
        ("capture b=1, b/snr=0.1", &table),
        ("collision channel", &CaptureTable::no_capture(t_max)),
    ] {
        let best = curve_maximum(&throughput_curve(table, &loads, &betas)?).expect("non-empty grid");
        println!(
            "{label}: T* = {:.3} at beta = {:.2}, M/N = {:.2} (P_R = {:.3})",
            best.throughput, best.beta, best.slots_per_user, best.p_r
        );
    }
    Ok(())
}
