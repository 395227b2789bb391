mod common;

use common::{independent_quality, layout_problems, replacement_check, replacement_scenario};
use ecolayout_core::instances::{canonical_benchmark, demo_ecology, demo_session, random_small_instance};
use ecolayout_core::oracle::{exhaustive_oracle, OracleConfig};
use ecolayout_core::{EngineParams, LayoutEngine, LayoutResult, QualityWeights, StepInput};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn envelope_gaps(r: &LayoutResult, k: usize) -> Vec<(f64, f64)> {
    let per_view = (1.0 / (2.0 * k as f64)).powi(2);
    r.stats
        .per_display
        .iter()
        .filter_map(|d| {
            let lp = d.lp_value?;
            Some((lp - d.exact_value - d.anchor_bonus, d.views.len() as f64 * per_view))
        })
        .collect()
}

#[test]
fn demo_chain_is_valid_and_deterministic() {
    let (model, eco) = (demo_session(), demo_ecology());
    let w = QualityWeights::default();
    let solve_all = || {
        let engine = LayoutEngine::default();
        let mut out: Vec<LayoutResult> = Vec::new();
        for step in 1..=model.layer_count() {
            let input = StepInput::new(&model, step, &eco, &w).with_prev(out.last());
            let mut r = engine.solve_step(&input).unwrap();
            r.stats.wall_time_ms = None;
            out.push(r);
        }
        out
    };
    let a = solve_all();
    for (i, r) in a.iter().enumerate() {
        assert!(layout_problems(r, &model, &eco).is_empty(), "step {}", i + 1);
        let prev = if i == 0 { &[][..] } else { &a[i - 1].placements[..] };
        let q = independent_quality(&model, i + 1, &eco, &w, &r.placements, prev);
        assert!((q[3] - r.report.q_total).abs() < 1e-9);
    }
    let b = solve_all();
    assert_eq!(a.iter().map(|r| r.to_json(false)).collect::<Vec<_>>(), b.iter().map(|r| r.to_json(false)).collect::<Vec<_>>());
}

#[test]
fn canonical_benchmark_is_valid_and_tight() {
    let inst = canonical_benchmark();
    let r = LayoutEngine::default().solve_step(&inst.input()).unwrap();
    assert_eq!(r.placements.len(), 12);
    assert!(layout_problems(&r, &inst.model, &inst.ecology).is_empty());
    assert!(!r.stats.budget_exhausted);
    for (gap, limit) in envelope_gaps(&r, 16) {
        assert!(gap >= -1e-9 && gap <= limit + 1e-9, "{gap} > {limit}");
    }
}

#[test]
fn engine_matches_oracle_on_a_few_instances() {
    for seed in [0u64, 1, 2, 3, 5, 6, 7, 8] {
        let inst = random_small_instance(seed);
        let mut params = EngineParams::default();
        params.trace = true;
        let r = LayoutEngine::new(params).solve_step(&inst.input()).unwrap();
        let o = exhaustive_oracle(&inst.model, inst.step, &inst.ecology, inst.prev_placements(), &inst.weights, &OracleConfig::default())
            .unwrap()
            .unwrap();
        assert!(r.report.q_total >= 0.98 * o.quality, "seed {seed}: {} vs {}", r.report.q_total, o.quality);
        for node in &r.trace {
            assert!(node.heuristic + 1e-9 >= r.report.q_total, "seed {seed}: inadmissible bound");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_layouts_hold_invariants(seed in 0u64..100_000) {
        let inst = random_small_instance(seed);
        let r = LayoutEngine::default().solve_step(&inst.input()).unwrap();
        prop_assert!(layout_problems(&r, &inst.model, &inst.ecology).is_empty());
        for (gap, limit) in envelope_gaps(&r, 16) {
            prop_assert!(gap >= -1e-9 && gap <= limit + 1e-9);
        }
        let q = independent_quality(&inst.model, inst.step, &inst.ecology, &inst.weights, &r.placements, inst.prev_placements());
        prop_assert!((q[3] - r.report.q_total).abs() < 1e-9);
    }
}

#[test]
fn replacement_view_takes_predecessor_position() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..40 {
        let (m, eco) = replacement_scenario(&mut rng);
        let Some(r) = replacement_check(&m, &eco) else {
            continue;
        };
        checked += 1;
        assert!(r.distance_mm <= 1.0, "moved by {} mm", r.distance_mm);
        assert!(r.term >= 1.0 - 1.0 / r.extent_mm);
    }
    assert!(checked >= 10, "only {checked} scenarios had v alone on u's display");
}
