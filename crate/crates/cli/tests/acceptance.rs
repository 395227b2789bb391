//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run with `cargo test -p ecolayout-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use common::{
    check_log_ops, fuzz, independent_quality, layout_problems, log_ops_strategy, random_placements, replacement_check,
    replacement_scenario, selective_undo_scenario,
};
use ecolayout_cli::{bench, oracle};
use ecolayout_core::instances::{canonical_benchmark, demo_ecology, demo_session, random_small_instance};
use ecolayout_core::model::step_context;
use ecolayout_core::quality::total_quality;
use ecolayout_core::{
    DisplayEcology, EngineParams, LayoutEngine, LayoutResult, QualityWeights, SessionModel, SessionService, StepInput,
};
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

const PERF_LIMIT_MS: f64 = 2000.0;
const ORACLE_COUNT: usize = 200;
const ORACLE_LIMIT_S: f64 = 600.0;
const QUALITY_TOL: f64 = 1e-9;
const ENVELOPE_K: f64 = 16.0;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Every layout produced by the suite goes through here.
#[derive(Default)]
struct LayoutAudit {
    layouts: usize,
    problems: Vec<String>,
    displays: usize,
    worst_envelope_ratio: f64,
    envelope_failures: Vec<String>,
}

impl LayoutAudit {
    fn record(&mut self, origin: &str, layout: &LayoutResult, model: &SessionModel, ecology: &DisplayEcology) {
        self.layouts += 1;
        for p in layout_problems(layout, model, ecology) {
            self.problems.push(format!("{origin}: {p}"));
        }
        let per_view = (1.0 / (2.0 * ENVELOPE_K)).powi(2);
        for d in &layout.stats.per_display {
            let Some(lp) = d.lp_value else { continue };
            self.displays += 1;
            let gap = lp - d.exact_value - d.anchor_bonus;
            let limit = d.views.len() as f64 * per_view;
            self.worst_envelope_ratio = self.worst_envelope_ratio.max(gap / limit);
            if gap > limit + 1e-9 {
                self.envelope_failures.push(format!("{origin} {}: gap {gap:.3e} > {limit:.3e}", d.display));
            }
        }
    }
}

fn performance() -> Verdict {
    let row = bench::time_instance(&canonical_benchmark(), 5, &EngineParams::default()).expect("canonical solves");
    Verdict {
        name: "performance",
        pass: row.median_ms <= PERF_LIMIT_MS,
        detail: format!(
            "canonical 12 views / 3 displays: median {:.0} ms, max {:.0} ms over {} runs (limit {PERF_LIMIT_MS:.0} ms)",
            row.median_ms,
            row.max_ms,
            row.samples_ms.len()
        ),
    }
}

fn exactness_and_admissibility(audit: &mut LayoutAudit) -> (Verdict, Verdict) {
    let report = oracle::run(0, ORACLE_COUNT, &EngineParams::default(), |_| {});
    let secs = report.elapsed.as_secs_f64();
    for c in &report.cases {
        if let Some(l) = &c.layout {
            let inst = random_small_instance(c.seed);
            audit.record(&format!("oracle seed {}", c.seed), l, &inst.model, &inst.ecology);
        }
    }
    let worst = report.worst().map_or(String::new(), |c| format!(", worst seed {}", c.seed));
    let exact = Verdict {
        name: "exactness oracle",
        pass: report.max_gap() <= oracle::MAX_GAP && secs <= ORACLE_LIMIT_S,
        detail: format!(
            "{} instances: max relative gap {:.2e}{worst} (limit {}); suite {secs:.0} s (limit {ORACLE_LIMIT_S:.0} s)",
            report.cases.len(),
            report.max_gap(),
            oracle::MAX_GAP
        ),
    };
    let expanded: usize = report.cases.iter().filter_map(|c| c.layout.as_ref()).map(|l| l.trace.len()).sum();
    let admissible = Verdict {
        name: "admissibility",
        pass: report.bound_violations() == 0 && expanded > 0,
        detail: format!(
            "{} bound violations over {expanded} expanded nodes of {} instances",
            report.bound_violations(),
            report.cases.len()
        ),
    };
    (exact, admissible)
}

fn more_layouts(audit: &mut LayoutAudit) {
    let engine = LayoutEngine::default();
    let inst = canonical_benchmark();
    audit.record("canonical", &engine.solve_step(&inst.input()).unwrap(), &inst.model, &inst.ecology);
    for (v, d) in bench::DEFAULT_SIZES {
        let inst = bench::sized_instance(v, d);
        audit.record(&inst.name, &engine.solve_step(&inst.input()).unwrap(), &inst.model, &inst.ecology);
    }
    let (model, eco, w) = (demo_session(), demo_ecology(), QualityWeights::default());
    let mut prev: Option<LayoutResult> = None;
    for step in 1..=model.layer_count() {
        let r = engine
            .solve_step(&StepInput::new(&model, step, &eco, &w).with_prev(prev.as_ref()))
            .unwrap();
        audit.record(&format!("demo step {step}"), &r, &model, &eco);
        prev = Some(r);
    }
    for seed in 1000..1300 {
        let inst = random_small_instance(seed);
        if let Ok(r) = engine.solve_step(&inst.input()) {
            audit.record(&format!("random seed {seed}"), &r, &inst.model, &inst.ecology);
        }
    }
}

fn quality_formula() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for k in 0..1000u64 {
        let inst = random_small_instance(k);
        let w = QualityWeights::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.1..2.0));
        let now = random_placements(&mut rng, &inst.model, inst.step, &inst.ecology);
        let ctx = step_context(&inst.model, inst.step).unwrap();
        let got = total_quality(&now, inst.prev_placements(), &ctx, &inst.ecology, &w).unwrap();
        let want = independent_quality(&inst.model, inst.step, &inst.ecology, &w, &now, inst.prev_placements());
        let diffs = [
            got.q_spatial - want[0],
            got.q_temporal - want[1],
            got.q_visibility - want[2],
            got.q_total - want[3],
        ];
        worst = diffs.iter().fold(worst, |m, d| m.max(d.abs()));
        count += 1;
    }
    Verdict {
        name: "quality formula",
        pass: worst <= QUALITY_TOL,
        detail: format!("{count} random placements: max |difference| {worst:.2e} (limit {QUALITY_TOL:e})"),
    }
}

fn temporal_stability() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut checked, mut worst_dist, mut worst_term): (usize, f64, f64) = (0, 0.0, 1.0);
    let mut failures = 0;
    for _ in 0..200 {
        let (m, eco) = replacement_scenario(&mut rng);
        let Some(r) = replacement_check(&m, &eco) else { continue };
        checked += 1;
        worst_dist = worst_dist.max(r.distance_mm);
        worst_term = worst_term.min(r.term);
        if r.distance_mm > 1.0 || r.term < 1.0 - 1.0 / r.extent_mm {
            failures += 1;
        }
    }
    Verdict {
        name: "temporal stability",
        pass: failures == 0 && checked >= 50,
        detail: format!(
            "{checked} scenarios with v alone on u's display: max centre shift {worst_dist:.3} mm, min pair term {worst_term:.6} (limit 1 mm)"
        ),
    }
}

fn log_semantics(audit: &mut LayoutAudit) -> Verdict {
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 256,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let props = runner.run(&log_ops_strategy(80), |ops| check_log_ops(&ops).map_err(TestCaseError::fail));
    let scenario = selective_undo_scenario();

    let mut drift = Vec::new();
    let mut events = 0;
    let accepted = fuzz(1, 500, |s, ok, before| {
        events += 1;
        let st = s.state();
        if !s.is_consistent() {
            drift.push(format!("op {events}: live state differs from materialize(head)"));
        }
        if st.version != before + ok as u64 {
            drift.push(format!("op {events}: version {} after {before}", st.version));
        }
        if let Some(l) = st.current_layout() {
            audit.record(&format!("fuzz op {events}"), l, &st.live.session, &st.live.ecology);
        }
    });
    let mut parts = vec![match &props {
        Ok(()) => "256 property cases ok".to_owned(),
        Err(e) => format!("property failure: {e}"),
    }];
    parts.push(if scenario.ok() {
        format!(
            "12-event selective undo matches ({} dropped, {} conflict)",
            scenario.dropped.len(),
            scenario.conflicts.len()
        )
    } else {
        format!(
            "selective undo mismatch: dropped {:?} vs {:?}, conflicts {:?} vs {:?}",
            scenario.dropped, scenario.expected_dropped, scenario.conflicts, scenario.expected_conflicts
        )
    });
    parts.push(format!("{events}-op fuzz ({accepted} accepted): {} inconsistencies", drift.len()));
    Verdict {
        name: "log semantics",
        pass: props.is_ok() && scenario.ok() && drift.is_empty() && events == 500,
        detail: parts.join("; "),
    }
}

fn persistence() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.jsonl");
    let (mut compared, mut mismatches) = (0, Vec::new());
    fuzz(9, 400, |s, ok, _| {
        if !ok || s.state().version % 10 != 0 {
            return;
        }
        compared += 1;
        s.snapshot(&path).unwrap();
        let back = SessionService::restore(&path, EngineParams::default()).unwrap();
        let (a, b) = (s.state(), back.state());
        let layout = |st: &ecolayout_core::SessionState| st.current_layout().map(|l| l.placements.clone());
        let same = a.log == b.log
            && a.log.head() == b.log.head()
            && a.live == b.live
            && a.live.step == b.live.step
            && layout(a) == layout(b);
        if !same {
            mismatches.push(a.version);
        }
    });
    Verdict {
        name: "persistence round-trip",
        pass: mismatches.is_empty() && compared >= 10,
        detail: format!("{compared} snapshots restored, {} mismatches {mismatches:?}", mismatches.len()),
    }
}

fn determinism() -> Verdict {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut runs = 0;
    for step in 1..=3 {
        let outputs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
            .map(|k| {
                let svg = dir.path().join(format!("s{step}_{k}.svg"));
                let out = Command::new(env!("CARGO_BIN_EXE_ecolayout"))
                    .arg("solve")
                    .arg("--session")
                    .arg(fixtures.join("demo_session.json"))
                    .arg("--ecology")
                    .arg(fixtures.join("demo_ecology.json"))
                    .args(["--step", &step.to_string(), "--svg"])
                    .arg(&svg)
                    .output()
                    .expect("binary runs");
                assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
                runs += 1;
                (out.stdout, std::fs::read(&svg).unwrap())
            })
            .collect();
        if outputs[0] != outputs[1] || outputs[0].0.is_empty() {
            differing.push(step);
        }
    }
    Verdict {
        name: "determinism",
        pass: differing.is_empty(),
        detail: format!("{runs} `solve` runs on the demo (steps 1-3, JSON and SVG): differing steps {differing:?}"),
    }
}

fn main() {
    let start = Instant::now();
    let mut audit = LayoutAudit::default();
    let perf = performance();
    let (exact, admissible) = exactness_and_admissibility(&mut audit);
    more_layouts(&mut audit);
    let quality = quality_formula();
    let temporal = temporal_stability();
    let log = log_semantics(&mut audit);
    let persist = persistence();
    let determinism = determinism();

    let geometry = Verdict {
        name: "geometric invariants",
        pass: audit.problems.is_empty() && audit.layouts > 0,
        detail: format!(
            "{} layouts checked: {} overlap/bounds/aspect problems{}",
            audit.layouts,
            audit.problems.len(),
            audit.problems.first().map_or(String::new(), |p| format!(", first: {p}"))
        ),
    };
    let envelope = Verdict {
        name: "envelope bound",
        pass: audit.envelope_failures.is_empty() && audit.displays > 0,
        detail: format!(
            "{} display solves: worst gap at {:.1}% of views·(1/{})² ; {} over{}",
            audit.displays,
            100.0 * audit.worst_envelope_ratio,
            2.0 * ENVELOPE_K,
            audit.envelope_failures.len(),
            audit.envelope_failures.first().map_or(String::new(), |p| format!(", first: {p}"))
        ),
    };

    let verdicts = [perf, exact, admissible, geometry, quality, envelope, temporal, log, persist, determinism];
    println!();
    for v in &verdicts {
        println!("{} {:<24} {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "\n{} of {} criteria passed in {:.0} s",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
