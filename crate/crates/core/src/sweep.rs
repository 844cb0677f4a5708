//! Exhaustive grid search over `(beta, V, S)` maximizing the mean
//! simulated throughput.
//!
//! Every grid point reuses the same per-run seeds, so all points see the
//! same random draws. The termination thresholds do not influence the
//! draws either, which lets one threshold-free trajectory per run and
//! `beta` be cut at every `(V, S)` pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::simulator::{run_contention, run_rng, BatchSummary, Receiver, Reception, Trajectory};

/// Mean-throughput standard error above which a result is flagged as too
/// noisy to resolve the second decimal.
pub const NOISY_SE_THRESHOLD: f64 = 0.005;

/// Inclusive arithmetic grid `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, value, 1.0)
    }

    pub fn validate(&self, field: &'static str) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::invalid(field, "grid step must be positive"));
        }
        if !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid(field, "grid needs finite min <= max"));
        }
        Ok(())
    }

    /// Grid values, rounded to 1e-9 so decimal steps land on decimal values.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| ((self.min + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub beta: GridSpec,
    pub threshold_v: GridSpec,
    pub threshold_s: GridSpec,
    pub runs_per_point: usize,
    /// Template; `beta`, `threshold_v` and `threshold_s` are overwritten
    /// per grid point.
    pub params: SystemParams,
    #[serde(default)]
    pub reception: Reception,
    /// Second pass around the coarse optimum with a five times finer step.
    #[serde(default)]
    pub refine: bool,
    /// Keep every evaluated point in the result.
    #[serde(default)]
    pub keep_grid: bool,
}

impl SweepConfig {
    /// Desk-scale defaults: `beta` in [0.5, 10] step 0.1, `V` in [0, 1]
    /// step 0.05, `S` in [0, 3] step 0.05, 1000 runs per point.
    pub fn desk_scale(params: SystemParams, reception: Reception) -> Self {
        Self {
            beta: GridSpec::new(0.5, 10.0, 0.1),
            threshold_v: GridSpec::new(0.0, 1.0, 0.05),
            threshold_s: GridSpec::new(0.0, 3.0, 0.05),
            runs_per_point: 1000,
            params,
            reception,
            refine: false,
            keep_grid: false,
        }
    }

    /// Step 0.01 on every axis and 10 000 runs per point.
    pub fn full_scale(mut self) -> Self {
        for g in [&mut self.beta, &mut self.threshold_v, &mut self.threshold_s] {
            g.step = 0.01;
        }
        self.runs_per_point = 10_000;
        self.refine = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.beta.validate("beta")?;
        self.threshold_v.validate("threshold_v")?;
        self.threshold_s.validate("threshold_s")?;
        if self.runs_per_point == 0 {
            return Err(Error::invalid("runs_per_point", "must be at least 1"));
        }
        let mut p = self.params.clone();
        p.beta = self.beta.max;
        p.threshold_v = self.threshold_v.max;
        p.threshold_s = self.threshold_s.max;
        p.validate()?;
        p.threshold_v = self.threshold_v.min;
        p.threshold_s = self.threshold_s.min;
        p.beta = self.beta.min;
        p.validate()
    }

    fn receiver(&self) -> Result<Receiver> {
        Receiver::from_params(&self.params, self.reception)
    }

    fn params_at(&self, point: GridPoint) -> SystemParams {
        SystemParams {
            beta: point.beta,
            threshold_v: point.threshold_v,
            threshold_s: point.threshold_s,
            ..self.params.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta: f64,
    pub threshold_v: f64,
    pub threshold_s: f64,
}

/// Aggregates over the runs of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointAggregate {
    pub point: GridPoint,
    pub summary: BatchSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub best: PointAggregate,
    pub points_evaluated: usize,
    pub refined: bool,
    /// Standard error of the best mean throughput exceeds
    /// [`NOISY_SE_THRESHOLD`].
    pub noisy: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<PointAggregate>>,
}

/// Runs `runs_per_point` contentions at one point, run `i` seeded with
/// `base_seed + i`.
pub fn evaluate_point(point: GridPoint, config: &SweepConfig) -> Result<PointAggregate> {
    if config.runs_per_point == 0 {
        return Err(Error::invalid("runs_per_point", "must be at least 1"));
    }
    let params = config.params_at(point);
    params.validate()?;
    let receiver = config.receiver()?;
    let outcomes = (0..config.runs_per_point as u64)
        .into_par_iter()
        .map(|i| {
            let stats = run_contention(&params, &receiver, &mut run_rng(params.base_seed, i))?;
            Ok((stats.slots_used, stats.resolved_count))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointAggregate {
        point,
        summary: BatchSummary::from_outcomes(params.n_users, &outcomes),
    })
}

/// All `(V, S)` aggregates for one `beta`, computed from shared
/// trajectories. Rows are ordered by `S`, then `V`.
fn evaluate_beta(
    beta: f64,
    v_values: &[f64],
    s_values: &[f64],
    config: &SweepConfig,
    receiver: &Receiver,
) -> Result<Vec<PointAggregate>> {
    let params = SystemParams {
        beta,
        ..config.params.clone()
    };
    let trajectories = (0..config.runs_per_point as u64)
        .into_par_iter()
        .map(|i| Trajectory::simulate(&params, receiver, &mut run_rng(params.base_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(v_values.len() * s_values.len());
    let mut outcomes = Vec::with_capacity(trajectories.len());
    for &s in s_values {
        for &v in v_values {
            outcomes.clear();
            outcomes.extend(trajectories.iter().map(|t| {
                let (m, nr, _) = t.terminate(v, s);
                (m, nr)
            }));
            rows.push(PointAggregate {
                point: GridPoint {
                    beta,
                    threshold_v: v,
                    threshold_s: s,
                },
                summary: BatchSummary::from_outcomes(params.n_users, &outcomes),
            });
        }
    }
    Ok(rows)
}

fn search(betas: &[f64], v_values: &[f64], s_values: &[f64], config: &SweepConfig) -> Result<Vec<PointAggregate>> {
    let receiver = config.receiver()?;
    let per_beta = betas
        .par_iter()
        .map(|&beta| evaluate_beta(beta, v_values, s_values, config, &receiver))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_beta.into_iter().flatten().collect())
}

/// Argmax of mean throughput; ties go to smaller `beta`, then smaller `S`,
/// then smaller `V`.
pub fn best_point(points: &[PointAggregate]) -> Option<PointAggregate> {
    points.iter().copied().reduce(|best, p| {
        let better = p.summary.mean_throughput > best.summary.mean_throughput
            || (p.summary.mean_throughput == best.summary.mean_throughput
                && (p.point.beta, p.point.threshold_s, p.point.threshold_v)
                    < (best.point.beta, best.point.threshold_s, best.point.threshold_v));
        if better {
            p
        } else {
            best
        }
    })
}

fn refine_axis(center: f64, grid: &GridSpec) -> GridSpec {
    let fine = grid.step / 5.0;
    GridSpec::new(
        (center - grid.step).max(grid.min),
        (center + grid.step).min(grid.max),
        fine,
    )
}

/// Exhaustive search over the configured grids.
pub fn grid_search(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let betas = config.beta.values();
    let vs = config.threshold_v.values();
    let ss = config.threshold_s.values();
    let mut evaluated = search(&betas, &vs, &ss, config)?;
    let mut best = best_point(&evaluated).expect("grids are non-empty");
    if config.refine {
        let fine = search(
            &refine_axis(best.point.beta, &config.beta).values(),
            &refine_axis(best.point.threshold_v, &config.threshold_v).values(),
            &refine_axis(best.point.threshold_s, &config.threshold_s).values(),
            config,
        )?;
        if let Some(candidate) = best_point(&fine) {
            best = best_point(&[best, candidate]).unwrap();
        }
        evaluated.extend(fine);
    }
    Ok(SweepResult {
        best,
        points_evaluated: evaluated.len(),
        refined: config.refine,
        noisy: best.summary.se_throughput > NOISY_SE_THRESHOLD,
        grid: config.keep_grid.then_some(evaluated),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(runs: usize) -> SweepConfig {
        let params = SystemParams::new(50, 3.0, 1.0, 0.1, 0.8, 1.0).unwrap().with_seed(11);
        SweepConfig {
            beta: GridSpec::new(2.0, 4.0, 1.0),
            threshold_v: GridSpec::new(0.5, 1.0, 0.25),
            threshold_s: GridSpec::new(0.5, 1.5, 0.5),
            runs_per_point: runs,
            params,
            reception: Reception::Capture,
            refine: false,
            keep_grid: true,
        }
    }

    #[test]
    fn grid_values() {
        assert_eq!(GridSpec::new(0.0, 1.0, 0.25).values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = GridSpec::new(0.5, 10.0, 0.05).values();
        assert_eq!(g.len(), 191);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert_eq!(g[2], 0.6);
        assert_eq!(GridSpec::single(2.89).values(), vec![2.89]);
        assert!(GridSpec::new(1.0, 0.0, 0.1).validate("x").is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0).validate("x").is_err());
    }

    #[test]
    fn single_run_point_equals_the_run() {
        let cfg = config(1);
        let point = GridPoint {
            beta: 3.0,
            threshold_v: 0.8,
            threshold_s: 1.0,
        };
        let agg = evaluate_point(point, &cfg).unwrap();
        let params = cfg.params_at(point);
        let receiver = cfg.receiver().unwrap();
        let run = run_contention(&params, &receiver, &mut run_rng(11, 0)).unwrap();
        assert_eq!(agg.summary.mean_throughput, run.throughput);
        assert_eq!(agg.summary.mean_fraction_resolved, run.fraction_resolved);
        assert_eq!(agg.summary.mean_slots_per_user, run.slots_used as f64 / 50.0);
        assert_eq!(agg.summary.se_throughput, 0.0);
    }

    #[test]
    fn trajectory_search_matches_direct_evaluation() {
        let cfg = config(40);
        let result = grid_search(&cfg).unwrap();
        let grid = result.grid.as_ref().unwrap();
        assert_eq!(grid.len(), 3 * 3 * 3);
        for row in grid {
            let direct = evaluate_point(row.point, &cfg).unwrap();
            assert_eq!(direct.summary, row.summary, "{:?}", row.point);
        }
        assert_eq!(best_point(grid).unwrap(), result.best);
    }

    #[test]
    fn one_point_grid() {
        let mut cfg = config(5);
        cfg.beta = GridSpec::single(3.0);
        cfg.threshold_v = GridSpec::single(0.8);
        cfg.threshold_s = GridSpec::single(1.0);
        let result = grid_search(&cfg).unwrap();
        assert_eq!(result.points_evaluated, 1);
        assert_eq!(result.best.point.beta, 3.0);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = config(5);
        cfg.runs_per_point = 0;
        assert!(grid_search(&cfg).is_err());
        let mut cfg = config(5);
        cfg.threshold_v = GridSpec::new(0.0, 1.5, 0.5);
        assert!(grid_search(&cfg).is_err());
    }
}
