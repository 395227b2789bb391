//! The session coordinator: one serialized applier over the live state.
//!
//! Every accepted mutation is logged, re-materialized, re-laid-out when it
//! touches layout inputs, and bumps the state version by exactly one. Layout
//! results are appended to the log as system `layout_computed` events so the
//! log records where every view was shown.

use crate::environment::DisplayEcology;
use crate::ids::UserId;
use crate::interaction::{map_interaction, InteractionError, MappedInteraction, RawInteraction};
use crate::layout::{EngineParams, LayoutEngine, LayoutError, LayoutResult, StepInput};
use crate::log::{
    AnalysisLog, EventDraft, EventId, EventKind, EventPayload, LogError, LogFilter, LogRecord, Materialized,
    SelectiveUndo,
};
use crate::model::{validate_session, SessionModel};
use crate::quality::QualityWeights;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("rejected: {0}")]
    RejectInvalid(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// What a mutation changed, for subscribers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Update {
    pub version: u64,
    pub changed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_event: Option<EventId>,
}

/// The live state. `live` always equals `log.materialize(log.head())`.
#[derive(Clone, Debug)]
pub struct SessionState {
    pub version: u64,
    pub live: Materialized,
    pub log: AnalysisLog,
    /// Layouts of steps `1..=live.step`, each anchored on its predecessor.
    pub layouts: BTreeMap<usize, LayoutResult>,
    /// Why the current step has no layout, if it has none.
    pub layout_error: Option<String>,
    /// Last failure to extend the journal file.
    pub persist_error: Option<String>,
}

impl SessionState {
    pub fn current_layout(&self) -> Option<&LayoutResult> {
        self.layouts.get(&self.live.step)
    }
}

/// Body of `GET /state`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub version: u64,
    pub step: usize,
    pub layers: usize,
    pub head: EventId,
    pub events: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_error: Option<String>,
}

pub struct SessionService {
    state: SessionState,
    engine: LayoutEngine,
    journal: Option<Journal>,
}

struct Journal {
    path: PathBuf,
    written: EventId,
}

impl SessionService {
    pub fn new(session: SessionModel, ecology: DisplayEcology, weights: QualityWeights) -> Result<Self, SessionError> {
        Self::with_params(session, ecology, weights, EngineParams::default())
    }

    pub fn with_params(
        session: SessionModel,
        ecology: DisplayEcology,
        weights: QualityWeights,
        params: EngineParams,
    ) -> Result<Self, SessionError> {
        let report = validate_session(&session);
        if !report.is_valid() {
            return Err(SessionError::RejectInvalid(report.to_string()));
        }
        ecology.validate().map_err(|e| SessionError::RejectInvalid(e.to_string()))?;
        weights.validate().map_err(|e| SessionError::RejectInvalid(e.to_string()))?;
        let mut session = session;
        session.normalize();
        let base = Materialized::new(session, ecology, weights);
        let mut service = Self::from_log(AnalysisLog::new(base), params);
        service.record_layout();
        Ok(service)
    }

    /// Resumes from an existing log without appending anything.
    pub fn from_log(log: AnalysisLog, params: EngineParams) -> Self {
        let live = log.materialize(log.head()).expect("head is reachable");
        let mut service = Self {
            state: SessionState {
                version: 0,
                live,
                log,
                layouts: BTreeMap::new(),
                layout_error: None,
                persist_error: None,
            },
            engine: LayoutEngine::new(params),
            journal: None,
        };
        let _ = service.relayout();
        service
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn engine(&self) -> &LayoutEngine {
        &self.engine
    }

    pub fn summary(&self) -> StateSummary {
        let s = &self.state;
        StateSummary {
            version: s.version,
            step: s.live.step,
            layers: s.live.session.layer_count(),
            head: s.log.head(),
            events: s.log.len(),
            layout_error: s.layout_error.clone(),
        }
    }

    /// Solves steps `1..=step` in order so each layout is anchored on the
    /// previous one.
    fn relayout(&mut self) -> Result<(), LayoutError> {
        let live = &self.state.live;
        let mut layouts: BTreeMap<usize, LayoutResult> = BTreeMap::new();
        let mut outcome = Ok(());
        for step in 1..=live.step {
            let input = StepInput::new(&live.session, step, &live.ecology, &live.weights)
                .with_prev(layouts.get(&(step - 1)))
                .with_overrides(live.overrides.get(&step));
            match self.engine.solve_step(&input) {
                Ok(mut r) => {
                    r.stats.wall_time_ms = None;
                    layouts.insert(step, r);
                }
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        self.state.layouts = layouts;
        self.state.layout_error = outcome.as_ref().err().map(ToString::to_string);
        outcome
    }

    /// Re-solves and logs the outcome for the current step.
    fn record_layout(&mut self) -> Option<EventId> {
        let outcome = self.relayout();
        let step = self.state.live.step;
        if step == 0 {
            return None;
        }
        let payload = match (outcome, self.state.layouts.get(&step)) {
            (Ok(()), Some(r)) => EventPayload::LayoutComputed {
                step,
                placements: r.placements.clone(),
                quality: Some(r.report.clone()),
                error: None,
            },
            (res, _) => EventPayload::LayoutComputed {
                step,
                placements: Vec::new(),
                quality: None,
                error: Some(res.err().map_or_else(|| "no layout".to_owned(), |e| e.to_string())),
            },
        };
        Some(self.state.log.append(EventDraft::system(payload)))
    }

    fn bump(&mut self, changed: &[&str], event: Option<EventId>, layout_event: Option<EventId>) -> Update {
        self.state.version += 1;
        debug_assert!(self.is_consistent(), "live state diverged from the log");
        self.state.persist_error = self.flush_journal().err().map(|e| e.to_string());
        Update {
            version: self.state.version,
            changed: changed.iter().map(|s| s.to_string()).collect(),
            event,
            layout_event,
        }
    }

    /// `materialize(head) == live`.
    pub fn is_consistent(&self) -> bool {
        self.state.log.materialize(self.state.log.head()).as_ref() == Ok(&self.state.live)
    }

    /// Validates, logs and applies one user event.
    pub fn apply(&mut self, draft: EventDraft) -> Result<Update, SessionError> {
        let kind = draft.kind();
        match kind {
            EventKind::LayoutComputed if !draft.actor.is_system() => {
                return Err(SessionError::RejectInvalid("layout_computed is reserved for the system".into()))
            }
            EventKind::SelectiveUndo => {
                return Err(SessionError::RejectInvalid("use the selective undo operation".into()))
            }
            _ => {}
        }
        let next = self
            .state
            .live
            .apply_payload(&draft.actor, &draft.payload)
            .map_err(SessionError::RejectInvalid)?;
        let event = self.state.log.append(draft);
        self.state.live = next;
        let mut changed = vec!["log"];
        changed.push(match kind {
            EventKind::EcologyReplace => "ecology",
            EventKind::StepAdvance | EventKind::StepGoto => "step",
            EventKind::FindingAnnotated | EventKind::LayoutComputed => "log",
            EventKind::ViewMove | EventKind::ViewResize => "overrides",
            _ => "session",
        });
        let layout_event = if kind.affects_layout() {
            changed.push("layout");
            self.record_layout()
        } else {
            None
        };
        changed.dedup();
        Ok(self.bump(&changed, Some(event), layout_event))
    }

    fn navigated(&mut self) -> Update {
        self.state.live = self.state.log.materialize(self.state.log.head()).expect("head is reachable");
        let _ = self.relayout();
        self.bump(&["log", "session", "ecology", "step", "layout"], None, None)
    }

    /// Steps back over the last user event; system events in between are
    /// skipped.
    pub fn undo(&mut self) -> Result<Update, SessionError> {
        let log = &self.state.log;
        let mut cur = log.head();
        while log.event(cur).is_some_and(|e| e.is_system()) {
            cur = log.parent(cur).expect("events have parents");
        }
        let target = log.parent(cur).ok_or(LogError::AtRoot)?;
        self.state.log.checkout(target)?;
        Ok(self.navigated())
    }

    /// Moves forward to a child of the head and on through the system events
    /// that followed it.
    pub fn redo(&mut self, index: Option<usize>) -> Result<Update, SessionError> {
        let log = &mut self.state.log;
        log.redo(index)?;
        while let Some(&next) = log
            .children(log.head())
            .iter()
            .find(|c| log.event(**c).is_some_and(|e| e.is_system()))
        {
            log.checkout(next)?;
        }
        Ok(self.navigated())
    }

    /// Moves the head to any node ("restore here").
    pub fn checkout(&mut self, id: EventId) -> Result<Update, SessionError> {
        self.state.log.checkout(id)?;
        Ok(self.navigated())
    }

    pub fn selective_undo(&mut self, filter: &LogFilter, actor: impl Into<UserId>) -> (Update, SelectiveUndo) {
        let outcome = self.state.log.selective_undo(filter, actor);
        self.state.live = self.state.log.materialize(outcome.event).expect("marker is reachable");
        let layout_event = self.record_layout();
        let update = self.bump(&["log", "session", "ecology", "step", "layout"], Some(outcome.event), layout_event);
        (update, outcome)
    }

    pub fn advance(&mut self, actor: impl Into<UserId>) -> Result<Update, SessionError> {
        self.apply(EventDraft::new(actor, EventPayload::StepAdvance))
    }

    pub fn goto(&mut self, actor: impl Into<UserId>, step: usize) -> Result<Update, SessionError> {
        self.apply(EventDraft::new(actor, EventPayload::StepGoto { step }))
    }

    /// Pure lookup of the display and view under a pointer.
    pub fn map_interaction(&self, raw: &RawInteraction) -> Result<Option<MappedInteraction>, SessionError> {
        let placements = self.state.current_layout().map_or(&[][..], |l| l.placements.as_slice());
        Ok(map_interaction(&self.state.live.ecology, placements, raw)?)
    }

    /// Writes the whole log to `path` (via a temporary file and rename).
    pub fn snapshot(&self, path: &Path) -> Result<(), SessionError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.state.log.to_jsonl())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a snapshot. Any unreadable or inconsistent content fails the
    /// whole restore.
    pub fn restore(path: &Path, params: EngineParams) -> Result<Self, SessionError> {
        let text = std::fs::read_to_string(path).map_err(|e| SessionError::CorruptSnapshot(e.to_string()))?;
        let log = AnalysisLog::from_jsonl(&text).map_err(|e| SessionError::CorruptSnapshot(e.to_string()))?;
        Ok(Self::from_log(log, params))
    }

    /// Keeps `path` in sync with the log: rewritten now, then extended by
    /// appended records after every mutation.
    pub fn attach_journal(&mut self, path: impl Into<PathBuf>) -> Result<(), SessionError> {
        let path = path.into();
        self.snapshot(&path)?;
        let written = self.state.log.events().last().map_or(EventId::ROOT, |e| e.id);
        self.journal = Some(Journal { path, written });
        Ok(())
    }

    fn flush_journal(&mut self) -> std::io::Result<()> {
        let Some(j) = &mut self.journal else {
            return Ok(());
        };
        let log = &self.state.log;
        let mut out = String::new();
        let since = j.written;
        for e in log.events().filter(|e| e.id > since) {
            out.push_str(&LogRecord::Event(Box::new(e.clone())).to_line());
            if let Some(state) = log.checkpoint(e.id) {
                out.push_str(
                    &LogRecord::Checkpoint {
                        id: e.id,
                        state: Box::new(state.clone()),
                    }
                    .to_line(),
                );
            }
            j.written = e.id;
        }
        out.push_str(&LogRecord::Head { head: log.head() }.to_line());
        let mut f = std::fs::OpenOptions::new().append(true).open(&j.path)?;
        f.write_all(out.as_bytes())
    }
}
