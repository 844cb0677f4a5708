//! Finite-length contention periods: one run traced slot by slot, then a
//! batch of runs summarized.
//!
//! cargo run --release --example simulate_contention

use frameless::simulator::{run_batch, run_contention, run_rng, BatchSummary, Receiver};
use frameless::{Reception, SystemParams};

fn main() -> frameless::Result<()> {
    let params = SystemParams::new(100, 6.14, 1.0, 0.1, 0.7, 2.02)?;
    let receiver = Receiver::from_params(&params, Reception::Capture)?;

    let stats = run_contention(&params, &receiver, &mut run_rng(params.base_seed, 0))?;
    println!("run 0:");
    for (j, point) in stats.trajectory.iter().enumerate() {
        println!(
            "  slot {:>2}: F_R = {:.2}, T_I = {:.3}",
            j + 1,
            point.fraction_resolved,
            point.throughput
        );
    }
    println!(
        "  stopped after {} slots: {}",
        stats.slots_used,
        stats.termination_cause.as_str()
    );

    for (label, reception, params) in [
        ("capture b=1, b/snr=0.1", Reception::Capture, params.clone()),
        (
            "collision channel",
            Reception::Collision,
            SystemParams::new(100, 2.89, 1.0, 1.0, 0.88, 0.81)?,
        ),
    ] {
        let receiver = Receiver::from_params(&params, reception)?;
        let summary = BatchSummary::from_records(&run_batch(&params, &receiver, 1000)?);
        println!(
            "{label}: mean T = {:.3} +/- {:.3}, mean F_R = {:.3}, mean M/N = {:.3} over {} runs",
            summary.mean_throughput,
            summary.se_throughput,
            summary.mean_fraction_resolved,
            summary.mean_slots_per_user,
            summary.runs
        );
    }
    Ok(())
}
