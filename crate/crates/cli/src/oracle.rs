//! Engine versus exhaustive oracle on seeded random small instances.

use ecolayout_core::instances::random_small_instance;
use ecolayout_core::oracle::{exhaustive_oracle, OracleConfig};
use ecolayout_core::{EngineParams, LayoutEngine, LayoutResult};
use std::time::{Duration, Instant};

/// Largest tolerated relative shortfall of the engine.
pub const MAX_GAP: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct OracleCase {
    pub seed: u64,
    pub engine_q: Option<f64>,
    pub oracle_q: Option<f64>,
    /// `(oracle − engine) / oracle`, clamped at 0; 1 when only the oracle
    /// found a layout.
    pub gap: f64,
    pub engine_nodes: usize,
    pub oracle_nodes: u64,
    /// Expanded nodes whose bound fell below the final quality.
    pub bound_violations: usize,
    pub layout: Option<LayoutResult>,
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub seed: u64,
    pub cases: Vec<OracleCase>,
    pub elapsed: Duration,
}

impl OracleReport {
    pub fn max_gap(&self) -> f64 {
        self.cases.iter().map(|c| c.gap).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&OracleCase> {
        self.cases
            .iter()
            .filter(|c| c.gap > 0.0)
            .max_by(|a, b| a.gap.total_cmp(&b.gap))
    }

    pub fn bound_violations(&self) -> usize {
        self.cases.iter().map(|c| c.bound_violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.max_gap() <= MAX_GAP
    }

    pub fn summary(&self) -> String {
        let worst = self.worst().map_or("-".to_owned(), |c| c.seed.to_string());
        format!(
            "seed={} count={} max_gap={:.6} worst_seed={} bound_violations={} elapsed_s={:.1} {}",
            self.seed,
            self.cases.len(),
            self.max_gap(),
            worst,
            self.bound_violations(),
            self.elapsed.as_secs_f64(),
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

/// Runs one instance. The engine records its expanded nodes so the bound
/// can be checked against the final quality.
pub fn run_case(seed: u64, params: &EngineParams) -> OracleCase {
    let inst = random_small_instance(seed);
    let mut params = params.clone();
    params.trace = true;
    let engine = LayoutEngine::new(params).solve_step(&inst.input()).ok();
    let oracle = exhaustive_oracle(
        &inst.model,
        inst.step,
        &inst.ecology,
        inst.prev_placements(),
        &inst.weights,
        &OracleConfig::default(),
    )
    .ok()
    .flatten();
    let engine_q = engine.as_ref().map(|r| r.report.q_total);
    let oracle_q = oracle.as_ref().map(|o| o.quality);
    let gap = match (engine_q, oracle_q) {
        (Some(e), Some(o)) if o > 0.0 => ((o - e) / o).max(0.0),
        (None, Some(_)) => 1.0,
        _ => 0.0,
    };
    let bound_violations = engine.as_ref().map_or(0, |r| {
        r.trace
            .iter()
            .filter(|n| n.heuristic + 1e-9 < r.report.q_total)
            .count()
    });
    OracleCase {
        seed,
        engine_q,
        oracle_q,
        gap,
        engine_nodes: engine.as_ref().map_or(0, |r| r.stats.nodes_expanded),
        oracle_nodes: oracle.as_ref().map_or(0, |o| o.nodes),
        bound_violations,
        layout: engine,
    }
}

/// Instances `seed, seed + 1, …, seed + count − 1`, run one after another.
pub fn run(seed: u64, count: usize, params: &EngineParams, mut progress: impl FnMut(&OracleCase)) -> OracleReport {
    let start = Instant::now();
    let cases = (0..count as u64)
        .map(|k| {
            let c = run_case(seed + k, params);
            progress(&c);
            c
        })
        .collect();
    OracleReport {
        seed,
        cases,
        elapsed: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_count_passes() {
        let r = run(1, 0, &EngineParams::default(), |_| {});
        assert!(r.passed());
        assert_eq!(r.max_gap(), 0.0);
    }

    #[test]
    fn pruning_does_not_change_results() {
        let off = EngineParams {
            disable_pruning: true,
            ..EngineParams::default()
        };
        for seed in 1..12 {
            let inst = random_small_instance(seed);
            let a = LayoutEngine::default().solve_step(&inst.input()).unwrap();
            let b = LayoutEngine::new(off.clone()).solve_step(&inst.input()).unwrap();
            assert_eq!(a.placements, b.placements, "seed {seed}");
            assert!(b.stats.nodes_expanded >= a.stats.nodes_expanded);
        }
    }
}
