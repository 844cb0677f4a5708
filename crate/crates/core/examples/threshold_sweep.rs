//! Grid search over the access rate and both termination thresholds for
//! a small network, writing the full grid as CSV.
//!
//! cargo run --release --example threshold_sweep [output.csv]

use std::path::PathBuf;

use frameless::io::{with_file, write_grid_csv};
use frameless::sweep::{grid_search, GridSpec, SweepConfig};
use frameless::{Reception, SystemParams};

fn main() -> frameless::Result<()> {
    let params = SystemParams::new(100, 1.0, 2.0, 1.0, 1.0, 0.0)?;
    let mut config = SweepConfig::desk_scale(params, Reception::Capture);
    config.beta = GridSpec::new(0.5, 4.0, 0.25);
    config.threshold_v = GridSpec::new(0.0, 0.5, 0.02);
    config.threshold_s = GridSpec::new(0.1, 0.6, 0.05);
    config.runs_per_point = 300;
    config.refine = true;
    config.keep_grid = true;

    let mut result = grid_search(&config)?;
    let best = result.best;
    println!(
        "best of {} points{}: beta = {:.2}, V = {:.2}, S = {:.2}",
        result.points_evaluated,
        if result.refined { " (refined)" } else { "" },
        best.point.beta,
        best.point.threshold_v,
        best.point.threshold_s
    );
    println!(
        "  mean T = {:.3} +/- {:.3}, mean F_R = {:.3}, mean M/N = {:.3}{}",
        best.summary.mean_throughput,
        best.summary.se_throughput,
        best.summary.mean_fraction_resolved,
        best.summary.mean_slots_per_user,
        if result.noisy { " (noisy)" } else { "" }
    );

    if let Some(path) = std::env::args().nth(1).map(PathBuf::from) {
        let grid = result.grid.take().unwrap_or_default();
        with_file(&path, |w| write_grid_csv(w, &grid))?;
        println!("wrote {} rows to {}", grid.len(), path.display());
    }
    Ok(())
}
