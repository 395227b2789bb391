//! The analysis log: an append-only tree of session events.
//!
//! Every state the session has been in is reachable by folding the events on
//! a root-to-node path over the base state. Undo and redo only move the head;
//! appending below a node that already has children starts a new branch.
//! Selective undo replays the current path minus a filtered subset and
//! records the outcome as a marker event on a fresh branch.

use crate::environment::DisplayEcology;
use crate::ids::{DisplayId, UserId, ViewId};
use crate::layout::{StepOverrides, ViewOverride};
use crate::model::{apply_edit, validate_session, EditOp, ModelEdit, SessionModel};
use crate::quality::{Placement, QualityReport, QualityWeights};
use crate::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// A checkpoint of the materialized state is kept every this many events.
pub const CHECKPOINT_INTERVAL: u64 = 500;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u64);

impl EventId {
    pub const ROOT: EventId = EventId(0);

    pub fn is_root(self) -> bool {
        self == Self::ROOT
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ModelEdit,
    DoiChange,
    StepAdvance,
    StepGoto,
    ViewMove,
    ViewResize,
    ContentUpdate,
    LayoutComputed,
    FindingAnnotated,
    /// Whole-document replacement of the session.
    SessionReplace,
    /// Whole-document replacement of the display ecology.
    EcologyReplace,
    /// Head of a branch produced by selective undo.
    SelectiveUndo,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        EventKind::ModelEdit,
        EventKind::DoiChange,
        EventKind::StepAdvance,
        EventKind::StepGoto,
        EventKind::ViewMove,
        EventKind::ViewResize,
        EventKind::ContentUpdate,
        EventKind::LayoutComputed,
        EventKind::FindingAnnotated,
        EventKind::SessionReplace,
        EventKind::EcologyReplace,
        EventKind::SelectiveUndo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ModelEdit => "model_edit",
            EventKind::DoiChange => "doi_change",
            EventKind::StepAdvance => "step_advance",
            EventKind::StepGoto => "step_goto",
            EventKind::ViewMove => "view_move",
            EventKind::ViewResize => "view_resize",
            EventKind::ContentUpdate => "content_update",
            EventKind::LayoutComputed => "layout_computed",
            EventKind::FindingAnnotated => "finding_annotated",
            EventKind::SessionReplace => "session_replace",
            EventKind::EcologyReplace => "ecology_replace",
            EventKind::SelectiveUndo => "selective_undo",
        }
    }

    /// Whether events of this kind change the inputs of the layout engine.
    pub fn affects_layout(self) -> bool {
        !matches!(
            self,
            EventKind::ContentUpdate | EventKind::LayoutComputed | EventKind::FindingAnnotated
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

/// Kind-specific event content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    ModelEdit {
        edit: EditOp,
    },
    DoiChange {
        view: ViewId,
        doi: f64,
    },
    StepAdvance,
    StepGoto {
        step: usize,
    },
    /// Drag of a view to a position on a display at the current step.
    ViewMove {
        view: ViewId,
        display: DisplayId,
        center_mm: [f64; 2],
        #[serde(default)]
        hard: bool,
    },
    ViewResize {
        view: ViewId,
        size_mm: f64,
        #[serde(default)]
        hard: bool,
    },
    ContentUpdate {
        view: ViewId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uri: Option<String>,
    },
    /// Where every view of `step` was shown. `error` is set when the solve
    /// failed, in which case `placements` is empty.
    LayoutComputed {
        step: usize,
        placements: Vec<Placement>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quality: Option<QualityReport>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    FindingAnnotated {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        view: Option<ViewId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        display: Option<DisplayId>,
    },
    SessionReplace {
        session: SessionModel,
    },
    EcologyReplace {
        ecology: DisplayEcology,
    },
    /// State equals the base state with `replayed` applied in order.
    SelectiveUndo {
        filter: LogFilter,
        from: EventId,
        replayed: Vec<EventId>,
        dropped: Vec<EventId>,
        conflicts: Vec<EventId>,
    },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::ModelEdit { .. } => EventKind::ModelEdit,
            EventPayload::DoiChange { .. } => EventKind::DoiChange,
            EventPayload::StepAdvance => EventKind::StepAdvance,
            EventPayload::StepGoto { .. } => EventKind::StepGoto,
            EventPayload::ViewMove { .. } => EventKind::ViewMove,
            EventPayload::ViewResize { .. } => EventKind::ViewResize,
            EventPayload::ContentUpdate { .. } => EventKind::ContentUpdate,
            EventPayload::LayoutComputed { .. } => EventKind::LayoutComputed,
            EventPayload::FindingAnnotated { .. } => EventKind::FindingAnnotated,
            EventPayload::SessionReplace { .. } => EventKind::SessionReplace,
            EventPayload::EcologyReplace { .. } => EventKind::EcologyReplace,
            EventPayload::SelectiveUndo { .. } => EventKind::SelectiveUndo,
        }
    }

    fn touched_view(&self) -> Option<ViewId> {
        match self {
            EventPayload::ModelEdit { edit } => edit.touched_view().cloned(),
            EventPayload::DoiChange { view, .. }
            | EventPayload::ViewMove { view, .. }
            | EventPayload::ViewResize { view, .. }
            | EventPayload::ContentUpdate { view, .. } => Some(view.clone()),
            EventPayload::FindingAnnotated { view, .. } => view.clone(),
            _ => None,
        }
    }

    fn touched_display(&self) -> Option<DisplayId> {
        match self {
            EventPayload::ViewMove { display, .. } => Some(display.clone()),
            EventPayload::FindingAnnotated { display, .. } => display.clone(),
            _ => None,
        }
    }
}

/// An event before it enters the log. Touched view and display default to
/// what the payload names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventDraft {
    pub actor: UserId,
    pub payload: EventPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touched_view: Option<ViewId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touched_display: Option<DisplayId>,
    /// Milliseconds since the Unix epoch; the current time when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<u64>,
}

impl EventDraft {
    pub fn new(actor: impl Into<UserId>, payload: EventPayload) -> Self {
        Self {
            actor: actor.into(),
            payload,
            touched_view: None,
            touched_display: None,
            wall_time: None,
        }
    }

    pub fn system(payload: EventPayload) -> Self {
        Self::new(UserId::system(), payload)
    }

    pub fn edit(actor: impl Into<UserId>, edit: EditOp) -> Self {
        Self::new(actor, EventPayload::ModelEdit { edit })
    }

    pub fn at(mut self, wall_time: u64) -> Self {
        self.wall_time = Some(wall_time);
        self
    }

    pub fn on_display(mut self, display: impl Into<DisplayId>) -> Self {
        self.touched_display = Some(display.into());
        self
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub id: EventId,
    pub parent: EventId,
    pub actor: UserId,
    pub wall_time: u64,
    pub kind: EventKind,
    pub payload: EventPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touched_view: Option<ViewId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touched_display: Option<DisplayId>,
}

impl LogEvent {
    pub fn is_system(&self) -> bool {
        self.actor.is_system()
    }
}

/// Event filter. Every present criterion must match; an empty filter matches
/// every event in [`AnalysisLog::query`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actors: Option<BTreeSet<UserId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displays: Option<BTreeSet<DisplayId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<BTreeSet<EventKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub views: Option<BTreeSet<ViewId>>,
    /// Inclusive `[from, to]` in milliseconds since the epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_range: Option<(u64, u64)>,
    #[serde(default)]
    pub findings_only: bool,
}

impl LogFilter {
    pub fn actor(actor: impl Into<UserId>) -> Self {
        Self {
            actors: Some([actor.into()].into()),
            ..Self::default()
        }
    }

    pub fn kind(kind: EventKind) -> Self {
        Self {
            kinds: Some([kind].into()),
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn matches(&self, e: &LogEvent) -> bool {
        fn within<T: Ord>(set: &Option<BTreeSet<T>>, value: Option<&T>) -> bool {
            set.as_ref().is_none_or(|s| value.is_some_and(|v| s.contains(v)))
        }
        within(&self.actors, Some(&e.actor))
            && within(&self.displays, e.touched_display.as_ref())
            && within(&self.kinds, Some(&e.kind))
            && within(&self.views, e.touched_view.as_ref())
            && self
                .time_range
                .is_none_or(|(from, to)| (from..=to).contains(&e.wall_time))
            && (!self.findings_only || e.kind == EventKind::FindingAnnotated)
    }
}

/// Everything the log can reconstruct for a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Materialized {
    pub session: SessionModel,
    pub ecology: DisplayEcology,
    /// Current step, `0` only while the session has no layers.
    pub step: usize,
    /// Manual adjustments per step.
    #[serde(default)]
    pub overrides: BTreeMap<usize, StepOverrides>,
    #[serde(default)]
    pub weights: QualityWeights,
}

impl Materialized {
    pub fn new(session: SessionModel, ecology: DisplayEcology, weights: QualityWeights) -> Self {
        let mut s = Self {
            session,
            ecology,
            step: 1,
            overrides: BTreeMap::new(),
            weights,
        };
        s.clamp_step();
        s
    }

    pub fn step_overrides(&self) -> Option<&StepOverrides> {
        self.overrides.get(&self.step)
    }

    fn clamp_step(&mut self) {
        let n = self.session.layer_count();
        self.step = self.step.clamp(n.min(1), n);
    }

    fn prune_overrides(&mut self) {
        let session = &self.session;
        let ecology = &self.ecology;
        for (step, ov) in self.overrides.iter_mut() {
            ov.retain(|v, o| {
                session.in_layer(*step, v)
                    && o.display.as_ref().is_none_or(|d| ecology.display(d).is_some())
            });
        }
        self.overrides.retain(|_, ov| !ov.is_empty());
    }

    fn current_override(&mut self, view: &ViewId) -> Result<&mut ViewOverride, String> {
        if self.step == 0 || !self.session.in_layer(self.step, view) {
            return Err(format!("view {view} is not shown at step {}", self.step));
        }
        Ok(self
            .overrides
            .entry(self.step)
            .or_default()
            .entry(view.clone())
            .or_default())
    }

    /// Applies one event. Fails, leaving `self` untouched, when the event's
    /// preconditions do not hold in this state.
    pub fn apply(&self, event: &LogEvent) -> Result<Materialized, String> {
        self.apply_payload(&event.actor, &event.payload)
    }

    pub fn apply_payload(&self, actor: &UserId, payload: &EventPayload) -> Result<Materialized, String> {
        let mut next = self.clone();
        match payload {
            EventPayload::ModelEdit { edit } => {
                let edit = ModelEdit::new(actor.clone(), edit.clone());
                next.session = apply_edit(&self.session, &edit).map_err(|e| e.to_string())?;
            }
            EventPayload::DoiChange { view, doi } => {
                if !(*doi > 0.0 && *doi <= 1.0) {
                    return Err(format!("doi {doi} outside (0, 1]"));
                }
                let edit = ModelEdit::new(actor.clone(), EditOp::SetDoi { view: view.clone(), doi: *doi });
                next.session = apply_edit(&self.session, &edit).map_err(|e| e.to_string())?;
            }
            EventPayload::ContentUpdate { view, uri } => {
                let op = EditOp::UpdateContent { view: view.clone(), uri: uri.clone() };
                next.session = apply_edit(&self.session, &ModelEdit::new(actor.clone(), op))
                    .map_err(|e| e.to_string())?;
            }
            EventPayload::StepAdvance => {
                if self.step >= self.session.layer_count() {
                    return Err("last layer".into());
                }
                next.step += 1;
            }
            EventPayload::StepGoto { step } => {
                if *step == 0 || *step > self.session.layer_count() {
                    return Err(format!("step {step} out of range"));
                }
                next.step = *step;
            }
            EventPayload::ViewMove { view, display, center_mm, hard } => {
                let d = self
                    .ecology
                    .display(display)
                    .ok_or_else(|| format!("unknown display {display}"))?;
                if !d.connected {
                    return Err(format!("display {display} is disconnected"));
                }
                if !center_mm.iter().all(|c| c.is_finite()) {
                    return Err("non-finite position".into());
                }
                let o = next.current_override(view)?;
                o.display = Some(display.clone());
                o.center_mm = Some(*center_mm);
                o.hard = *hard;
            }
            EventPayload::ViewResize { view, size_mm, hard } => {
                if !(size_mm.is_finite() && *size_mm > 0.0) {
                    return Err(format!("size {size_mm} must be positive"));
                }
                let o = next.current_override(view)?;
                o.size_mm = Some(*size_mm);
                o.hard = *hard;
            }
            EventPayload::LayoutComputed { .. } | EventPayload::FindingAnnotated { .. } => {}
            EventPayload::SessionReplace { session } => {
                let report = validate_session(session);
                if !report.is_valid() {
                    return Err(report.to_string());
                }
                next.session = session.clone();
                next.session.normalize();
            }
            EventPayload::EcologyReplace { ecology } => {
                ecology.validate().map_err(|e| e.to_string())?;
                next.ecology = ecology.clone();
            }
            EventPayload::SelectiveUndo { .. } => {
                return Err("selective undo markers are resolved by the log".into());
            }
        }
        next.clamp_step();
        next.prune_overrides();
        Ok(next)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("already at the root")]
    AtRoot,
    #[error("nothing to redo")]
    NoRedoTarget,
    #[error("ambiguous redo: {children} branches, pass an index")]
    AmbiguousRedo { children: usize },
    #[error("unknown node {0}")]
    UnknownNode(EventId),
    #[error("corrupt log: {0}")]
    Corrupt(String),
}

/// Outcome of a selective undo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectiveUndo {
    /// The marker event heading the new branch.
    pub event: EventId,
    pub dropped: Vec<EventId>,
    pub conflicts: Vec<EventId>,
}

/// Node of the exported log graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: EventId,
    pub parent: Option<EventId>,
    pub children: Vec<EventId>,
    pub actor: UserId,
    pub kind: Option<EventKind>,
    pub wall_time: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touched_view: Option<ViewId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touched_display: Option<DisplayId>,
    pub on_path: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogGraph {
    pub root: EventId,
    pub head: EventId,
    pub nodes: Vec<GraphNode>,
}

/// One line of the persisted log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header { schema_version: u32, base: Box<Materialized> },
    Event(Box<LogEvent>),
    Head { head: EventId },
    Checkpoint { id: EventId, state: Box<Materialized> },
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("log records serialize");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisLog {
    base: Materialized,
    events: BTreeMap<EventId, LogEvent>,
    children: BTreeMap<EventId, Vec<EventId>>,
    head: EventId,
    next: u64,
    checkpoints: BTreeMap<EventId, Materialized>,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl AnalysisLog {
    pub fn new(base: Materialized) -> Self {
        Self {
            base,
            events: BTreeMap::new(),
            children: BTreeMap::from([(EventId::ROOT, Vec::new())]),
            head: EventId::ROOT,
            next: 1,
            checkpoints: BTreeMap::new(),
        }
    }

    pub fn base(&self) -> &Materialized {
        &self.base
    }

    pub fn head(&self) -> EventId {
        self.head
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event(&self, id: EventId) -> Option<&LogEvent> {
        self.events.get(&id)
    }

    pub fn events(&self) -> impl Iterator<Item = &LogEvent> {
        self.events.values()
    }

    pub fn checkpoint(&self, id: EventId) -> Option<&Materialized> {
        self.checkpoints.get(&id)
    }

    pub fn children(&self, id: EventId) -> &[EventId] {
        self.children.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, id: EventId) -> bool {
        id.is_root() || self.events.contains_key(&id)
    }

    pub fn parent(&self, id: EventId) -> Option<EventId> {
        self.events.get(&id).map(|e| e.parent)
    }

    /// Appends below the head and moves the head to the new event.
    pub fn append(&mut self, draft: EventDraft) -> EventId {
        let id = EventId(self.next);
        self.next += 1;
        let event = LogEvent {
            id,
            parent: self.head,
            kind: draft.payload.kind(),
            touched_view: draft.touched_view.or_else(|| draft.payload.touched_view()),
            touched_display: draft.touched_display.or_else(|| draft.payload.touched_display()),
            actor: draft.actor,
            wall_time: draft.wall_time.unwrap_or_else(now_ms),
            payload: draft.payload,
        };
        self.children.entry(self.head).or_default().push(id);
        self.children.insert(id, Vec::new());
        self.events.insert(id, event);
        self.head = id;
        if id.0 % CHECKPOINT_INTERVAL == 0 {
            let state = self.materialize(id).expect("fresh event is reachable");
            self.checkpoints.insert(id, state);
        }
        id
    }

    pub fn undo(&mut self) -> Result<EventId, LogError> {
        let parent = self.parent(self.head).ok_or(LogError::AtRoot)?;
        self.head = parent;
        Ok(parent)
    }

    /// Moves to a child of the head; `index` is required when there are
    /// several.
    pub fn redo(&mut self, index: Option<usize>) -> Result<EventId, LogError> {
        let kids = self.children(self.head);
        let target = match (kids.len(), index) {
            (0, _) => return Err(LogError::NoRedoTarget),
            (1, None) => kids[0],
            (n, None) => return Err(LogError::AmbiguousRedo { children: n }),
            (_, Some(i)) => *kids.get(i).ok_or(LogError::NoRedoTarget)?,
        };
        self.head = target;
        Ok(target)
    }

    /// Moves the head to any node.
    pub fn checkout(&mut self, id: EventId) -> Result<(), LogError> {
        if !self.contains(id) {
            return Err(LogError::UnknownNode(id));
        }
        self.head = id;
        Ok(())
    }

    /// Event ids from the root (exclusive) to `id` (inclusive).
    pub fn path(&self, id: EventId) -> Result<Vec<EventId>, LogError> {
        if !self.contains(id) {
            return Err(LogError::UnknownNode(id));
        }
        let mut path = Vec::new();
        let mut cur = id;
        while !cur.is_root() {
            path.push(cur);
            cur = self.events[&cur].parent;
        }
        path.reverse();
        Ok(path)
    }

    /// Matching events of the whole tree in id order.
    pub fn query(&self, filter: &LogFilter) -> Vec<&LogEvent> {
        self.events.values().filter(|e| filter.matches(e)).collect()
    }

    /// Applies `event` to `state`; markers reset to the base and replay.
    fn step(&self, state: Materialized, event: &LogEvent) -> Materialized {
        match &event.payload {
            EventPayload::SelectiveUndo { replayed, .. } => replayed
                .iter()
                .fold(self.base.clone(), |s, id| self.step(s, &self.events[id])),
            _ => state.apply(event).unwrap_or(state),
        }
    }

    /// Left fold of the root-to-`id` path over the base state. Events whose
    /// preconditions fail are skipped.
    pub fn materialize(&self, id: EventId) -> Result<Materialized, LogError> {
        let path = self.path(id)?;
        let start = path.iter().rposition(|e| self.checkpoints.contains_key(e));
        let (mut state, rest) = match start {
            Some(k) => (self.checkpoints[&path[k]].clone(), &path[k + 1..]),
            None => (self.base.clone(), &path[..]),
        };
        for e in rest {
            state = self.step(state, &self.events[e]);
        }
        Ok(state)
    }

    /// The primitive events whose fold gives the state at `id`: markers on
    /// the path are replaced by what they replayed.
    pub fn effective_sequence(&self, id: EventId) -> Result<Vec<EventId>, LogError> {
        let mut seq = Vec::new();
        for e in self.path(id)? {
            match &self.events[&e].payload {
                EventPayload::SelectiveUndo { replayed, .. } => seq = replayed.clone(),
                _ => seq.push(e),
            }
        }
        Ok(seq)
    }

    /// Replays the head's history without the events matching `filter` and
    /// appends the outcome as a new branch under the head. An empty filter
    /// drops nothing.
    pub fn selective_undo(&mut self, filter: &LogFilter, actor: impl Into<UserId>) -> SelectiveUndo {
        let from = self.head;
        let seq = self.effective_sequence(from).expect("head is reachable");
        let mut state = self.base.clone();
        let (mut replayed, mut dropped, mut conflicts) = (Vec::new(), Vec::new(), Vec::new());
        for id in seq {
            let e = &self.events[&id];
            if !filter.is_empty() && filter.matches(e) {
                dropped.push(id);
                continue;
            }
            match state.apply(e) {
                Ok(next) => {
                    state = next;
                    replayed.push(id);
                }
                Err(_) => conflicts.push(id),
            }
        }
        let event = self.append(EventDraft::new(
            actor,
            EventPayload::SelectiveUndo {
                filter: filter.clone(),
                from,
                replayed,
                dropped: dropped.clone(),
                conflicts: conflicts.clone(),
            },
        ));
        SelectiveUndo {
            event,
            dropped,
            conflicts,
        }
    }

    pub fn graph(&self) -> LogGraph {
        let on_path: BTreeSet<EventId> = self.path(self.head).unwrap_or_default().into_iter().collect();
        let root = GraphNode {
            id: EventId::ROOT,
            parent: None,
            children: self.children(EventId::ROOT).to_vec(),
            actor: UserId::system(),
            kind: None,
            wall_time: 0,
            touched_view: None,
            touched_display: None,
            on_path: true,
        };
        let nodes = std::iter::once(root)
            .chain(self.events.values().map(|e| GraphNode {
                id: e.id,
                parent: Some(e.parent),
                children: self.children(e.id).to_vec(),
                actor: e.actor.clone(),
                kind: Some(e.kind),
                wall_time: e.wall_time,
                touched_view: e.touched_view.clone(),
                touched_display: e.touched_display.clone(),
                on_path: on_path.contains(&e.id),
            }))
            .collect();
        LogGraph {
            root: EventId::ROOT,
            head: self.head,
            nodes,
        }
    }

    /// Line-delimited export: header, events in id order with checkpoints
    /// after the events they belong to, then the head.
    pub fn to_jsonl(&self) -> String {
        let mut out = LogRecord::Header {
            schema_version: SCHEMA_VERSION,
            base: Box::new(self.base.clone()),
        }
        .to_line();
        for e in self.events.values() {
            out.push_str(&LogRecord::Event(Box::new(e.clone())).to_line());
            if let Some(state) = self.checkpoints.get(&e.id) {
                out.push_str(
                    &LogRecord::Checkpoint {
                        id: e.id,
                        state: Box::new(state.clone()),
                    }
                    .to_line(),
                );
            }
        }
        out.push_str(&LogRecord::Head { head: self.head }.to_line());
        out
    }

    /// Rebuilds a log from its line-delimited form. The last head record
    /// wins. Any malformed or inconsistent line fails the whole load.
    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let corrupt = |line: usize, msg: String| LogError::Corrupt(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| LogError::Corrupt("empty log".into()))?;
        let header: LogRecord = serde_json::from_str(first).map_err(|e| corrupt(1, e.to_string()))?;
        let LogRecord::Header { schema_version, base } = header else {
            return Err(corrupt(1, "missing header".into()));
        };
        if schema_version != SCHEMA_VERSION {
            return Err(corrupt(1, format!("unsupported schema_version {schema_version}")));
        }
        let mut log = AnalysisLog::new(*base);
        let mut head = EventId::ROOT;
        for (k, line) in lines {
            let record: LogRecord = serde_json::from_str(line).map_err(|e| corrupt(k + 1, e.to_string()))?;
            match record {
                LogRecord::Header { .. } => return Err(corrupt(k + 1, "second header".into())),
                LogRecord::Event(e) => {
                    if e.id.0 < log.next {
                        return Err(corrupt(k + 1, format!("event id {} out of order", e.id)));
                    }
                    if !log.contains(e.parent) {
                        return Err(corrupt(k + 1, format!("unknown parent {}", e.parent)));
                    }
                    if e.kind != e.payload.kind() {
                        return Err(corrupt(k + 1, "kind does not match payload".into()));
                    }
                    if let EventPayload::SelectiveUndo { replayed, .. } = &e.payload {
                        if let Some(bad) = replayed.iter().find(|r| !log.events.contains_key(r)) {
                            return Err(corrupt(k + 1, format!("replay references unknown {bad}")));
                        }
                    }
                    log.next = e.id.0 + 1;
                    log.children.entry(e.parent).or_default().push(e.id);
                    log.children.insert(e.id, Vec::new());
                    log.events.insert(e.id, *e);
                }
                LogRecord::Head { head: h } => {
                    if !log.contains(h) {
                        return Err(corrupt(k + 1, format!("head {h} unknown")));
                    }
                    head = h;
                }
                LogRecord::Checkpoint { id, state } => {
                    if !log.events.contains_key(&id) {
                        return Err(corrupt(k + 1, format!("checkpoint for unknown {id}")));
                    }
                    log.checkpoints.insert(id, *state);
                }
            }
        }
        log.head = head;
        Ok(log)
    }
}
