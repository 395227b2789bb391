//! Wall-time benchmark over synthetic configurations.

use ecolayout_core::instances::{bench_instance, canonical_benchmark, Instance};
use ecolayout_core::layout::LayoutError;
use ecolayout_core::{EngineParams, LayoutEngine};
use std::fmt::Write;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub label: String,
    pub views: usize,
    pub displays: usize,
    pub samples_ms: Vec<f64>,
    pub median_ms: f64,
    pub max_ms: f64,
    pub nodes: usize,
    pub lps: usize,
    pub q_total: f64,
}

/// `(views, displays)` configurations run besides the canonical one.
pub const DEFAULT_SIZES: [(usize, usize); 5] = [(1, 1), (4, 2), (8, 2), (16, 4), (20, 4)];

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

/// Solves `inst` `repetitions` times with a fresh engine each time.
pub fn time_instance(inst: &Instance, repetitions: usize, params: &EngineParams) -> Result<BenchRow, LayoutError> {
    let mut samples = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions.max(1) {
        let engine = LayoutEngine::new(params.clone());
        let start = Instant::now();
        let r = engine.solve_step(&inst.input())?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
        last = Some(r);
    }
    let r = last.expect("at least one repetition");
    let views = inst.model.layer(inst.step).map_or(0, <[_]>::len);
    let displays = inst.ecology.displays.iter().filter(|d| d.connected).count();
    Ok(BenchRow {
        label: inst.name.clone(),
        views,
        displays,
        median_ms: median(&samples),
        max_ms: samples.iter().copied().fold(0.0, f64::max),
        samples_ms: samples,
        nodes: r.stats.nodes_expanded,
        lps: r.stats.lps_solved,
        q_total: r.report.q_total,
    })
}

/// Spatial and temporal constraint counts scaled like the canonical
/// instance (half as many spatial, two thirds as many temporal as views).
pub fn sized_instance(views: usize, displays: usize) -> Instance {
    bench_instance(views, displays, views / 2, views * 2 / 3)
}

/// The canonical row first, then one row per size.
pub fn run(sizes: &[(usize, usize)], repetitions: usize, params: &EngineParams) -> Result<Vec<BenchRow>, LayoutError> {
    let mut rows = vec![time_instance(&canonical_benchmark(), repetitions, params)?];
    for &(v, d) in sizes {
        rows.push(time_instance(&sized_instance(v, d), repetitions, params)?);
    }
    Ok(rows)
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<36} {:>5} {:>8} {:>4} {:>11} {:>11} {:>7} {:>7} {:>9}\n",
        "configuration", "views", "displays", "reps", "median_ms", "max_ms", "nodes", "lps", "Q"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<36} {:>5} {:>8} {:>4} {:>11.2} {:>11.2} {:>7} {:>7} {:>9.4}",
            r.label,
            r.views,
            r.displays,
            r.samples_ms.len(),
            r.median_ms,
            r.max_ms,
            r.nodes,
            r.lps,
            r.q_total
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn single_view_expands_one_node() {
        let row = time_instance(&sized_instance(1, 1), 5, &EngineParams::default()).unwrap();
        assert_eq!(row.samples_ms.len(), 5);
        assert_eq!((row.views, row.displays), (1, 1));
        assert_eq!(row.nodes, 1);
        assert!(row.max_ms >= row.median_ms);
    }
}
