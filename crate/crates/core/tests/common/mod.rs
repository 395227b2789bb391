//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use ecolayout_core::environment::Display;
use ecolayout_core::layout::{check_layout_invariants, StepOverrides, ViewOverride};
use ecolayout_core::log::LogError;
use ecolayout_core::model::{EditOp, StepPair, View};
use ecolayout_core::{
    AnalysisLog, DisplayEcology, EventDraft, EventId, EventKind, EventPayload, LayoutResult, LogFilter, Materialized,
    Placement, QualityWeights, SessionModel, SessionService, UserPose, ViewId,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

// ---------------------------------------------------------------------------
// Quality, written out from the formulas without touching the crate's code.

fn visibility(d: &Display, users: &[UserPose]) -> f64 {
    if users.is_empty() {
        return 1.0;
    }
    let mut sum = 0.0;
    for u in users {
        let t = [u.eye_m[0] - d.center_m[0], u.eye_m[1] - d.center_m[1], u.eye_m[2] - d.center_m[2]];
        let len = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
        let t = [t[0] / len, t[1] / len, t[2] / len];
        let a = d.normal[0] * t[0] + d.normal[1] * t[1] + d.normal[2] * t[2];
        let b = -(u.gaze[0] * t[0] + u.gaze[1] * t[1] + u.gaze[2] * t[2]);
        sum += a.max(0.0) * b.max(0.0);
    }
    sum / users.len() as f64
}

/// `[Q_S, Q_T, Q_V, Q]` of `now` at `step`, with `before` the previous
/// step's placements.
pub fn independent_quality(
    model: &SessionModel,
    step: usize,
    ecology: &DisplayEcology,
    weights: &QualityWeights,
    now: &[Placement],
    before: &[Placement],
) -> [f64; 4] {
    assert!(!ecology.distance_attenuation);
    let find = |ps: &[Placement], id: &ViewId| ps.iter().find(|p| &p.view == id).cloned();
    let ext = |id: &ecolayout_core::DisplayId| {
        let d = ecology.displays.iter().find(|d| &d.id == id).unwrap();
        d.width_mm + d.height_mm
    };
    let closeness = |a: &Placement, b: &Placement| {
        if a.display != b.display {
            return 0.0;
        }
        1.0 - ((a.cx_mm - b.cx_mm).abs() + (a.cy_mm - b.cy_mm).abs()) / ext(&a.display)
    };

    let mut spatial = BTreeSet::new();
    for c in model.spatial_constraints.iter().filter(|c| c.step == step) {
        let (u, v) = if c.u <= c.v { (&c.u, &c.v) } else { (&c.v, &c.u) };
        spatial.insert((u.clone(), v.clone()));
    }
    let qs: f64 = spatial
        .iter()
        .map(|(u, v)| closeness(&find(now, u).unwrap(), &find(now, v).unwrap()))
        .sum();

    let mut temporal = BTreeSet::new();
    for c in model.temporal_constraints.iter().filter(|c| c.step + 1 == step) {
        temporal.insert((c.u.clone(), c.v.clone()));
    }
    let qt: f64 = temporal
        .iter()
        .map(|(u, v)| match (find(before, u), find(now, v)) {
            (Some(a), Some(b)) => closeness(&a, &b),
            _ => 0.0,
        })
        .sum();

    let qv: f64 = now
        .iter()
        .map(|p| {
            let d = ecology.displays.iter().find(|d| d.id == p.display).unwrap();
            let doi = model.pool.iter().find(|v| v.id == p.view).map_or(0.5, |v| v.doi);
            let x = (p.w_mm + p.h_mm) / (d.width_mm + d.height_mm);
            visibility(d, &ecology.users) * doi * (2.0 * x - x * x)
        })
        .sum();
    [qs, qt, qv, weights.alpha * qs + weights.beta * qt + weights.gamma * qv]
}

/// Random (possibly overlapping) placements of every view of `step` on
/// connected displays.
pub fn random_placements(
    rng: &mut impl Rng,
    model: &SessionModel,
    step: usize,
    ecology: &DisplayEcology,
) -> Vec<Placement> {
    let displays: Vec<&Display> = ecology.connected().collect();
    model
        .layer(step)
        .unwrap()
        .iter()
        .map(|id| {
            let d = displays.choose(rng).unwrap();
            let aspect = model.view(id).unwrap().preferred_aspect;
            let s_max = (d.width_mm * (1.0 + aspect) / aspect).min(d.height_mm * (1.0 + aspect));
            let s = rng.gen_range(0.05..=1.0) * s_max;
            let (w, h) = (s * aspect / (1.0 + aspect), s / (1.0 + aspect));
            let cx = rng.gen_range(w / 2.0..=d.width_mm - w / 2.0);
            let cy = rng.gen_range(h / 2.0..=d.height_mm - h / 2.0);
            Placement::from_size(id.clone(), d.id.clone(), [cx, cy], s, aspect)
        })
        .collect()
}

pub fn aspects(model: &SessionModel) -> BTreeMap<ViewId, f64> {
    model.pool.iter().map(|v| (v.id.clone(), v.preferred_aspect)).collect()
}

/// Overlaps, protrusions and aspect errors of one layout.
pub fn layout_problems(layout: &LayoutResult, model: &SessionModel, ecology: &DisplayEcology) -> Vec<String> {
    check_layout_invariants(&layout.placements, ecology, &aspects(model), 1e-6)
}

// ---------------------------------------------------------------------------
// The log against a naive tree that stores every node's state.

#[derive(Clone, Debug)]
pub enum LogOp {
    Append(u8, u8),
    Undo,
    Redo(Option<u8>),
    Checkout(u16),
}

pub fn log_base() -> Materialized {
    let mut s = SessionModel::default();
    for (id, a) in [("a", 1.0), ("b", 1.5), ("c", 2.0)] {
        s.pool.push(View::new(id, a));
    }
    s.layers = vec![vec!["a".into(), "b".into()], vec!["b".into(), "c".into()], vec!["a".into()]];
    let mut eco = DisplayEcology::default();
    eco.displays.push(Display::wall("d1", 2000.0, 1000.0, [0.0, 0.0, 1.5]));
    Materialized::new(s, eco, QualityWeights::default())
}

fn log_draft(kind: u8, arg: u8) -> EventDraft {
    let actor = ["red", "green", "blue"][arg as usize % 3];
    let view: ViewId = ["a", "b", "c", "zz"][arg as usize % 4].into();
    let payload = match kind % 7 {
        0 => EventPayload::DoiChange {
            view,
            doi: [0.0, 0.2, 0.5, 1.0, 1.5][arg as usize % 5],
        },
        1 => EventPayload::StepAdvance,
        2 => EventPayload::StepGoto { step: arg as usize % 5 },
        3 => EventPayload::ViewMove {
            view,
            display: if arg % 5 == 0 { "nope".into() } else { "d1".into() },
            center_mm: [arg as f64 * 10.0, 300.0],
            hard: arg % 2 == 0,
        },
        4 => EventPayload::ViewResize {
            view,
            size_mm: arg as f64 * 20.0,
            hard: false,
        },
        5 => EventPayload::FindingAnnotated {
            text: format!("note {arg}"),
            view: Some(view),
            display: None,
        },
        _ => EventPayload::ModelEdit {
            edit: if arg % 2 == 0 {
                EditOp::AssignLayer { view, step: 1 + arg as usize % 3 }
            } else {
                EditOp::UnassignLayer { view, step: 1 + arg as usize % 3 }
            },
        },
    };
    EventDraft::new(actor, payload).at(arg as u64)
}

/// Runs `ops` on a fresh log and on the reference tree, comparing them after
/// every operation.
pub fn check_log_ops(ops: &[LogOp]) -> Result<(), String> {
    let base = log_base();
    let mut log = AnalysisLog::new(base.clone());
    // (id, parent index, state after)
    let mut nodes: Vec<(EventId, usize, Materialized)> = vec![(EventId::ROOT, 0, base)];
    let mut head = 0usize;
    let kids = |nodes: &Vec<(EventId, usize, Materialized)>, at: usize| -> Vec<usize> {
        (1..nodes.len()).filter(|&k| nodes[k].1 == at).collect()
    };
    for (step, op) in ops.iter().enumerate() {
        match op {
            LogOp::Append(kind, arg) => {
                let draft = log_draft(*kind, *arg);
                let state = nodes[head].2.apply_payload(&draft.actor, &draft.payload);
                let state = state.unwrap_or_else(|_| nodes[head].2.clone());
                let id = log.append(draft);
                nodes.push((id, head, state));
                head = nodes.len() - 1;
            }
            LogOp::Undo => {
                let r = log.undo();
                if head == 0 {
                    if r != Err(LogError::AtRoot) {
                        return Err(format!("op {step}: undo at root gave {r:?}"));
                    }
                } else {
                    head = nodes[head].1;
                }
            }
            LogOp::Redo(i) => {
                let ks = kids(&nodes, head);
                let r = log.redo(i.map(usize::from));
                let expect = match (ks.len(), i) {
                    (0, _) => Err(LogError::NoRedoTarget),
                    (1, None) => Ok(ks[0]),
                    (n, None) => Err(LogError::AmbiguousRedo { children: n }),
                    (n, Some(i)) if (*i as usize) < n => Ok(ks[*i as usize]),
                    _ => Err(LogError::NoRedoTarget),
                };
                match (r, expect) {
                    (Ok(id), Ok(k)) if id == nodes[k].0 => head = k,
                    (Err(a), Err(b)) if a == b => {}
                    (r, e) => return Err(format!("op {step}: redo gave {r:?}, expected {e:?}")),
                }
            }
            LogOp::Checkout(k) => {
                let k = *k as usize % nodes.len();
                log.checkout(nodes[k].0).map_err(|e| e.to_string())?;
                head = k;
            }
        }
        if log.head() != nodes[head].0 {
            return Err(format!("op {step}: head {} expected {}", log.head(), nodes[head].0));
        }
        let live = log.materialize(log.head()).map_err(|e| e.to_string())?;
        if live != nodes[head].2 {
            return Err(format!("op {step}: materialized state differs from the reference"));
        }
        let mut path = Vec::new();
        let mut k = head;
        while k != 0 {
            path.push(nodes[k].0);
            k = nodes[k].1;
        }
        path.reverse();
        if log.path(log.head()).map_err(|e| e.to_string())? != path {
            return Err(format!("op {step}: path differs"));
        }
        if log.effective_sequence(log.head()).map_err(|e| e.to_string())? != path {
            return Err(format!("op {step}: effective sequence differs from the path"));
        }
        let expected_kids: Vec<EventId> = kids(&nodes, head).into_iter().map(|k| nodes[k].0).collect();
        if log.children(log.head()) != expected_kids.as_slice() {
            return Err(format!("op {step}: children differ"));
        }
    }
    if log.len() + 1 != nodes.len() {
        return Err("event count differs".into());
    }
    Ok(())
}

pub fn log_ops_strategy(max_len: usize) -> impl proptest::strategy::Strategy<Value = Vec<LogOp>> {
    use proptest::prelude::*;
    let op = prop_oneof![
        5 => (any::<u8>(), any::<u8>()).prop_map(|(k, a)| LogOp::Append(k, a)),
        2 => Just(LogOp::Undo),
        1 => proptest::option::of(0u8..3).prop_map(LogOp::Redo),
        1 => any::<u16>().prop_map(LogOp::Checkout),
    ];
    proptest::collection::vec(op, 0..max_len)
}

// ---------------------------------------------------------------------------
// Selective undo on a scripted session.

pub struct ScenarioOutcome {
    pub dropped: Vec<EventId>,
    pub conflicts: Vec<EventId>,
    pub expected_dropped: Vec<EventId>,
    pub expected_conflicts: Vec<EventId>,
    pub actual: Materialized,
    pub expected: Materialized,
}

impl ScenarioOutcome {
    pub fn ok(&self) -> bool {
        self.dropped == self.expected_dropped
            && self.conflicts == self.expected_conflicts
            && self.actual == self.expected
    }
}

/// Twelve events by two analysts; `red`'s are undone. `green` later raised
/// the interest of a view `red` had added, which is the one conflict.
pub fn selective_undo_scenario() -> ScenarioOutcome {
    let base = log_base();
    let mut log = AnalysisLog::new(base.clone());
    let red = |p: EventPayload| EventDraft::new("red", p);
    let green = |p: EventPayload| EventDraft::new("green", p);
    let edit = |op: EditOp| EventPayload::ModelEdit { edit: op };

    let e1 = log.append(red(edit(EditOp::AddView { view: View::new("d", 1.0) })));
    let e2 = log.append(green(EventPayload::DoiChange { view: "a".into(), doi: 0.9 }));
    let e3 = log.append(red(edit(EditOp::AssignLayer { view: "d".into(), step: 1 })));
    let e4 = log.append(green(edit(EditOp::AddSpatial { step: 1, u: "a".into(), v: "b".into() })));
    let e5 = log.append(green(EventPayload::StepAdvance));
    let e6 = log.append(red(EventPayload::DoiChange { view: "b".into(), doi: 0.3 }));
    let e7 = log.append(green(EventPayload::StepGoto { step: 1 }));
    let e8 = log.append(green(EventPayload::ViewMove {
        view: "a".into(),
        display: "d1".into(),
        center_mm: [400.0, 300.0],
        hard: false,
    }));
    let e9 = log.append(red(EventPayload::FindingAnnotated { text: "cluster".into(), view: None, display: None }));
    let e10 = log.append(green(EventPayload::DoiChange { view: "d".into(), doi: 0.6 }));
    let e11 = log.append(green(EventPayload::ViewResize { view: "b".into(), size_mm: 500.0, hard: true }));
    let e12 = log.append(red(edit(EditOp::AddTemporal { step: 1, u: "a".into(), v: "c".into() })));
    let _ = (e2, e4, e5, e7, e8, e11);
    let out = log.selective_undo(&LogFilter::actor("red"), "green");

    // Built by hand: green's surviving edits on the base state.
    let mut expected = base;
    expected.session.pool.iter_mut().find(|v| v.id.as_str() == "a").unwrap().doi = 0.9;
    expected.session.spatial_constraints.push(StepPair::new(1, "a", "b"));
    expected.session.normalize();
    expected.step = 1;
    let mut ov = StepOverrides::new();
    ov.insert(
        "a".into(),
        ViewOverride {
            display: Some("d1".into()),
            center_mm: Some([400.0, 300.0]),
            size_mm: None,
            hard: false,
        },
    );
    ov.insert(
        "b".into(),
        ViewOverride {
            display: None,
            center_mm: None,
            size_mm: Some(500.0),
            hard: true,
        },
    );
    expected.overrides.insert(1, ov);

    ScenarioOutcome {
        actual: log.materialize(out.event).unwrap(),
        dropped: out.dropped,
        conflicts: out.conflicts,
        expected_dropped: vec![e1, e3, e6, e9, e12],
        expected_conflicts: vec![e10],
        expected,
    }
}

// ---------------------------------------------------------------------------
// Session fuzzing.

/// Three short steps on two walls; small enough to re-solve on every event.
pub fn fuzz_fixture() -> (SessionModel, DisplayEcology) {
    let mut s = SessionModel::default();
    for (id, a, doi) in [("a", 1.5, 0.9), ("b", 1.0, 0.6), ("c", 16.0 / 9.0, 0.4), ("d", 0.75, 0.7), ("e", 2.0, 0.5)] {
        s.pool.push(View::new(id, a).with_doi(doi));
    }
    s.layers = vec![
        vec!["a".into(), "b".into()],
        vec!["b".into(), "c".into(), "d".into()],
        vec!["d".into(), "e".into()],
    ];
    s.spatial_constraints.push(StepPair::new(1, "a", "b"));
    s.spatial_constraints.push(StepPair::new(2, "c", "d"));
    s.temporal_constraints.push(StepPair::new(1, "a", "c"));
    s.temporal_constraints.push(StepPair::new(2, "c", "e"));
    s.normalize();
    let mut eco = DisplayEcology::default();
    eco.displays.push(Display::wall("wall", 2400.0, 1200.0, [0.0, 0.0, 1.5]));
    eco.displays.push(Display::wall("side", 1200.0, 800.0, [2.0, 0.0, 1.5]));
    (s, eco)
}

pub enum FuzzOp {
    Apply(EventDraft),
    Undo,
    Redo(Option<usize>),
    Checkout(EventId),
    SelectiveUndo(LogFilter, String),
}

const ACTORS: [&str; 3] = ["red", "green", "blue"];

fn random_view(rng: &mut impl Rng, live: &Materialized) -> ViewId {
    if rng.gen_bool(0.1) {
        return "ghost".into();
    }
    live.session.pool.choose(rng).map_or_else(|| "ghost".into(), |v| v.id.clone())
}

pub fn random_op(rng: &mut impl Rng, service: &SessionService, tick: u64) -> FuzzOp {
    let st = service.state();
    let live = &st.live;
    let actor = *ACTORS.choose(rng).unwrap();
    let roll = rng.gen_range(0..100);
    if roll < 8 {
        return FuzzOp::Undo;
    }
    if roll < 14 {
        return FuzzOp::Redo(rng.gen_bool(0.5).then(|| rng.gen_range(0..2)));
    }
    if roll < 18 {
        let ids: Vec<EventId> = st.log.events().map(|e| e.id).collect();
        return FuzzOp::Checkout(ids.choose(rng).copied().unwrap_or(EventId::ROOT));
    }
    if roll < 23 {
        let filter = match rng.gen_range(0..3) {
            0 => LogFilter::actor(*ACTORS.choose(rng).unwrap()),
            1 => LogFilter::kind(*[EventKind::DoiChange, EventKind::ViewMove, EventKind::ModelEdit].choose(rng).unwrap()),
            _ => LogFilter {
                views: Some([random_view(rng, live)].into()),
                ..LogFilter::default()
            },
        };
        return FuzzOp::SelectiveUndo(filter, actor.to_owned());
    }
    let displays: Vec<_> = live.ecology.displays.iter().map(|d| d.id.clone()).collect();
    let layers = live.session.layer_count();
    let payload = match rng.gen_range(0..10) {
        0 => EventPayload::DoiChange {
            view: random_view(rng, live),
            doi: *[0.0, 0.1, 0.35, 0.8, 1.0, 1.2].choose(rng).unwrap(),
        },
        1 => EventPayload::StepAdvance,
        2 => EventPayload::StepGoto { step: rng.gen_range(0..=layers + 1) },
        3 => EventPayload::ViewMove {
            view: random_view(rng, live),
            display: displays.choose(rng).unwrap().clone(),
            center_mm: [rng.gen_range(0.0..2400.0_f64).round(), rng.gen_range(0.0..1200.0_f64).round()],
            hard: rng.gen_bool(0.3),
        },
        4 => EventPayload::ViewResize {
            view: random_view(rng, live),
            size_mm: rng.gen_range(100.0..1500.0_f64).round(),
            hard: rng.gen_bool(0.3),
        },
        5 => EventPayload::FindingAnnotated {
            text: format!("finding {tick}"),
            view: Some(random_view(rng, live)),
            display: None,
        },
        6 => EventPayload::ContentUpdate {
            view: random_view(rng, live),
            uri: Some(format!("file:///render/{tick}.png")),
        },
        7 => {
            let mut eco = live.ecology.clone();
            let k = rng.gen_range(0..eco.displays.len());
            eco.displays[k].connected = !eco.displays[k].connected;
            EventPayload::EcologyReplace { ecology: eco }
        }
        _ => {
            let view = random_view(rng, live);
            let other = random_view(rng, live);
            let step = rng.gen_range(1..=layers.max(1));
            let edit = match rng.gen_range(0..6) {
                0 => EditOp::AssignLayer { view, step },
                1 => EditOp::UnassignLayer { view, step },
                2 => EditOp::AddSpatial { step, u: view, v: other },
                3 => EditOp::RemoveSpatial { step, u: view, v: other },
                4 => EditOp::AddTemporal { step, u: view, v: other },
                _ => EditOp::AddView {
                    view: View::new(format!("n{tick}").as_str(), 1.25).with_doi(0.5),
                },
            };
            EventPayload::ModelEdit { edit }
        }
    };
    FuzzOp::Apply(EventDraft::new(actor, payload).at(tick))
}

/// Outcome of applying one fuzz operation: whether it was accepted.
pub fn run_op(service: &mut SessionService, op: FuzzOp) -> bool {
    match op {
        FuzzOp::Apply(d) => service.apply(d).is_ok(),
        FuzzOp::Undo => service.undo().is_ok(),
        FuzzOp::Redo(i) => service.redo(i).is_ok(),
        FuzzOp::Checkout(id) => service.checkout(id).is_ok(),
        FuzzOp::SelectiveUndo(f, actor) => {
            service.selective_undo(&f, actor);
            true
        }
    }
}

pub fn fuzz_service() -> SessionService {
    let (s, e) = fuzz_fixture();
    SessionService::new(s, e, QualityWeights::default()).unwrap()
}

/// Drives `ops` random operations, calling `check` after each one with
/// whether it was accepted and the version before it. Returns the number of
/// accepted operations.
pub fn fuzz(seed: u64, ops: usize, mut check: impl FnMut(&SessionService, bool, u64)) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut service = fuzz_service();
    let mut accepted = 0;
    for tick in 0..ops as u64 {
        let op = random_op(&mut rng, &service, tick + 1);
        let before = service.state().version;
        let ok = run_op(&mut service, op);
        accepted += ok as usize;
        check(&service, ok, before);
    }
    accepted
}

/// Step 1 shows `u` (and maybe others), step 2 replaces `u` by `v`.
pub fn replacement_scenario(rng: &mut impl Rng) -> (SessionModel, DisplayEcology) {
    let mut eco = DisplayEcology::default();
    for k in 0..rng.gen_range(1..=2) {
        let (w, h) = (rng.gen_range(800.0..3000.0_f64).round(), rng.gen_range(600.0..1800.0_f64).round());
        eco.displays.push(Display::wall(format!("d{k}"), w, h, [3.0 * k as f64, 0.0, 1.5]));
    }
    let mut m = SessionModel::default();
    let mut first = vec!["u".into()];
    let mut second = vec!["v".into()];
    m.pool.push(View::new("u", rng.gen_range(0.5..2.5)).with_doi(rng.gen_range(0.2..1.0)));
    m.pool.push(View::new("v", rng.gen_range(0.5..2.5)).with_doi(rng.gen_range(0.2..1.0)));
    for k in 0..rng.gen_range(0..=2) {
        let id = format!("x{k}");
        m.pool.push(View::new(id.as_str(), rng.gen_range(0.5..2.5)).with_doi(rng.gen_range(0.2..1.0)));
        if rng.gen_bool(0.5) {
            first.push(id.as_str().into());
        }
        second.push(id.as_str().into());
    }
    m.layers = vec![first, second];
    m.temporal_constraints.push(StepPair::new(1, "u", "v"));
    m.normalize();
    (m, eco)
}

/// Outcome of one replacement scenario where `v` ended up alone on `u`'s
/// display: centre distance in mm and the temporal pair term.
pub struct Replacement {
    pub distance_mm: f64,
    pub term: f64,
    pub extent_mm: f64,
}

/// Solves both steps; `None` when `v` shares or changes display.
pub fn replacement_check(m: &SessionModel, eco: &DisplayEcology) -> Option<Replacement> {
    let w = QualityWeights::default();
    let engine = ecolayout_core::LayoutEngine::default();
    let r1 = engine.solve_step(&ecolayout_core::StepInput::new(m, 1, eco, &w)).unwrap();
    let r2 = engine
        .solve_step(&ecolayout_core::StepInput::new(m, 2, eco, &w).with_prev(Some(&r1)))
        .unwrap();
    let u = r1.placement(&"u".into()).unwrap();
    let v = r2.placement(&"v".into()).unwrap();
    let alone = r2.placements.iter().filter(|p| p.display == u.display).count() == 1;
    if v.display != u.display || !alone {
        return None;
    }
    let d = eco.display(&u.display).unwrap();
    Some(Replacement {
        distance_mm: (u.cx_mm - v.cx_mm).abs() + (u.cy_mm - v.cy_mm).abs(),
        term: r2.report.per_term.temporal[0].value,
        extent_mm: d.width_mm + d.height_mm,
    })
}
