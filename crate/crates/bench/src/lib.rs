//! Fixtures for the criterion benchmarks in `benches/`.

use ecolayout_core::instances::{bench_instance, Instance};
use ecolayout_core::{AnalysisLog, EventDraft, EventPayload, Materialized, QualityWeights};

/// `(views, displays)` configurations of the scaling group.
pub const SCALING: [(usize, usize); 5] = [(1, 1), (4, 2), (8, 2), (12, 3), (16, 4)];

/// Same constraint density as the canonical benchmark.
pub fn scaled(views: usize, displays: usize) -> Instance {
    bench_instance(views, displays, views / 2, views * 2 / 3)
}

/// A linear log of `n` cheap events on top of the canonical instance.
pub fn long_log(n: usize) -> AnalysisLog {
    let inst = ecolayout_core::instances::canonical_benchmark();
    let mut log = AnalysisLog::new(Materialized::new(inst.model, inst.ecology, QualityWeights::default()));
    for k in 0..n as u64 {
        let payload = match k % 3 {
            0 => EventPayload::StepGoto { step: 1 + (k as usize / 3) % 2 },
            1 => EventPayload::DoiChange {
                view: "v01".into(),
                doi: 0.1 + (k % 9) as f64 / 10.0,
            },
            _ => EventPayload::FindingAnnotated {
                text: format!("note {k}"),
                view: None,
                display: None,
            },
        };
        log.append(EventDraft::new("bench", payload).at(k));
    }
    log
}
