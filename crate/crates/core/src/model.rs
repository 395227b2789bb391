//! Session model: content pool, temporal layers and the two constraint
//! families, plus the edit vocabulary used by the interface.
//!
//! Steps are 1-based throughout: layer `i` is `layers[i - 1]`.

use crate::ids::{UserId, ViewId};
use crate::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub const DEFAULT_DOI: f64 = 0.5;
pub const DEFAULT_MIN_SIZE_FRACTION: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentKind {
    Static,
    Active,
}

/// Where a view's pixels come from. Active content remembers the tool that
/// generated it so it can be relaunched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentRef {
    pub kind: ContentKind,
    pub uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_hint: Option<String>,
    #[serde(default)]
    pub revision: u64,
}

impl ContentRef {
    pub fn image(uri: impl Into<String>) -> Self {
        Self {
            kind: ContentKind::Static,
            uri: uri.into(),
            tool_hint: None,
            revision: 0,
        }
    }
}

fn default_doi() -> f64 {
    DEFAULT_DOI
}

fn default_min_size_fraction() -> f64 {
    DEFAULT_MIN_SIZE_FRACTION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub id: ViewId,
    #[serde(default)]
    pub title: String,
    pub content: ContentRef,
    #[serde(default = "default_doi")]
    pub doi: f64,
    /// Width over height.
    pub preferred_aspect: f64,
    /// Lower bound on `s_v / ext(D)`.
    #[serde(default = "default_min_size_fraction")]
    pub min_size_fraction: f64,
}

impl View {
    pub fn new(id: impl Into<ViewId>, aspect: f64) -> Self {
        let id = id.into();
        Self {
            title: id.0.clone(),
            content: ContentRef::image(format!("content/{}.png", id.0)),
            id,
            doi: DEFAULT_DOI,
            preferred_aspect: aspect,
            min_size_fraction: DEFAULT_MIN_SIZE_FRACTION,
        }
    }

    pub fn with_doi(mut self, doi: f64) -> Self {
        self.doi = doi;
        self
    }
}

/// A constraint between two views attached to a step. For spatial
/// constraints both views live in layer `step`; for temporal constraints `u`
/// lives in layer `step` and `v` in layer `step + 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepPair {
    pub step: usize,
    pub u: ViewId,
    pub v: ViewId,
}

impl StepPair {
    pub fn new(step: usize, u: impl Into<ViewId>, v: impl Into<ViewId>) -> Self {
        Self {
            step,
            u: u.into(),
            v: v.into(),
        }
    }

    /// Spatial pairs are unordered; this is their canonical orientation.
    fn unordered(&self) -> Self {
        if self.u <= self.v {
            self.clone()
        } else {
            Self {
                step: self.step,
                u: self.v.clone(),
                v: self.u.clone(),
            }
        }
    }

    fn mentions(&self, id: &ViewId) -> bool {
        &self.u == id || &self.v == id
    }
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// The layered session graph. Field order and names double as the session
/// file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionModel {
    #[serde(rename = "views", default)]
    pub pool: Vec<View>,
    #[serde(default)]
    pub layers: Vec<Vec<ViewId>>,
    #[serde(default)]
    pub spatial_constraints: Vec<StepPair>,
    #[serde(default)]
    pub temporal_constraints: Vec<StepPair>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub authors: BTreeMap<ViewId, UserId>,
    #[serde(default = "schema_version")]
    pub schema_version: u32,
}

impl Default for SessionModel {
    fn default() -> Self {
        Self {
            pool: Vec::new(),
            layers: Vec::new(),
            spatial_constraints: Vec::new(),
            temporal_constraints: Vec::new(),
            authors: BTreeMap::new(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Violation {
    #[error("unsupported schema_version {0}")]
    UnsupportedSchema(u32),
    #[error("duplicate view id {0}")]
    DuplicateView(ViewId),
    #[error("view {view}: doi {doi} outside (0, 1]")]
    InvalidDoi { view: ViewId, doi: f64 },
    #[error("view {view}: preferred_aspect {aspect} must be positive")]
    InvalidAspect { view: ViewId, aspect: f64 },
    #[error("view {view}: min_size_fraction {value} outside [0, 1)")]
    InvalidMinSize { view: ViewId, value: f64 },
    #[error("view {0}: active content requires a tool_hint")]
    MissingToolHint(ViewId),
    #[error("layer {step} references unknown view {view}")]
    UnknownViewInLayer { step: usize, view: ViewId },
    #[error("layer {step} lists view {view} more than once")]
    DuplicateInLayer { step: usize, view: ViewId },
    #[error("spatial constraint ({u}, {v}) refers to missing step {step}")]
    SpatialStepOutOfRange { step: usize, u: ViewId, v: ViewId },
    #[error("spatial constraint crosses layers: ({u}, {v}) not both in layer {step}")]
    SpatialCrossesLayers { step: usize, u: ViewId, v: ViewId },
    #[error("spatial constraint at step {step} links view {view} to itself")]
    SpatialSelfPair { step: usize, view: ViewId },
    #[error("duplicate spatial constraint ({u}, {v}) at step {step}")]
    DuplicateSpatial { step: usize, u: ViewId, v: ViewId },
    #[error("temporal constraint ({u}, {v}) refers to missing steps {step}/{}", step + 1)]
    TemporalStepOutOfRange { step: usize, u: ViewId, v: ViewId },
    #[error("temporal constraint ({u}, {v}) does not link layer {step} to layer {}", step + 1)]
    TemporalCrossesLayers { step: usize, u: ViewId, v: ViewId },
    #[error("duplicate temporal constraint ({u}, {v}) at step {step}")]
    DuplicateTemporal { step: usize, u: ViewId, v: ViewId },
    #[error("author recorded for unknown view {0}")]
    UnknownAuthorView(ViewId),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ModelError {
    #[error("edit rejected: {0}")]
    RejectInvalid(String),
    #[error("step {step} out of range (session has {layers} layers)")]
    OutOfRange { step: usize, layers: usize },
}

/// The edit vocabulary. Serialized with a `kind` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    AddView { view: View },
    RemoveView { view: ViewId },
    /// Assigning to step `n + 1` appends a new layer.
    AssignLayer { view: ViewId, step: usize },
    UnassignLayer { view: ViewId, step: usize },
    AddSpatial { step: usize, u: ViewId, v: ViewId },
    RemoveSpatial { step: usize, u: ViewId, v: ViewId },
    AddTemporal { step: usize, u: ViewId, v: ViewId },
    RemoveTemporal { step: usize, u: ViewId, v: ViewId },
    SetDoi { view: ViewId, doi: f64 },
    UpdateContent {
        view: ViewId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uri: Option<String>,
    },
}

impl EditOp {
    /// The view this edit is primarily about, used for log filtering.
    pub fn touched_view(&self) -> Option<&ViewId> {
        match self {
            EditOp::AddView { view } => Some(&view.id),
            EditOp::RemoveView { view }
            | EditOp::AssignLayer { view, .. }
            | EditOp::UnassignLayer { view, .. }
            | EditOp::SetDoi { view, .. }
            | EditOp::UpdateContent { view, .. } => Some(view),
            EditOp::AddSpatial { u, .. }
            | EditOp::RemoveSpatial { u, .. }
            | EditOp::AddTemporal { u, .. }
            | EditOp::RemoveTemporal { u, .. } => Some(u),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEdit {
    pub actor: UserId,
    #[serde(flatten)]
    pub op: EditOp,
}

impl ModelEdit {
    pub fn new(actor: impl Into<UserId>, op: EditOp) -> Self {
        Self {
            actor: actor.into(),
            op,
        }
    }
}

/// Everything the layout engine needs to know about one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepContext {
    pub step: usize,
    /// Views of the layer, sorted by id.
    pub views: Vec<View>,
    /// Spatial pairs of the layer, each ordered `u < v`.
    pub spatial: Vec<(ViewId, ViewId)>,
    /// Temporal pairs arriving from the previous layer as
    /// `(previous view, current view)`.
    pub temporal_in: Vec<(ViewId, ViewId)>,
}

impl StepContext {
    pub fn view(&self, id: &ViewId) -> Option<&View> {
        self.views
            .binary_search_by(|v| v.id.cmp(id))
            .ok()
            .map(|i| &self.views[i])
    }
}

impl SessionModel {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn view(&self, id: &ViewId) -> Option<&View> {
        self.pool.iter().find(|v| &v.id == id)
    }

    fn view_mut(&mut self, id: &ViewId) -> Option<&mut View> {
        self.pool.iter_mut().find(|v| &v.id == id)
    }

    pub fn layer(&self, step: usize) -> Option<&[ViewId]> {
        step.checked_sub(1)
            .and_then(|i| self.layers.get(i))
            .map(Vec::as_slice)
    }

    pub fn in_layer(&self, step: usize, id: &ViewId) -> bool {
        self.layer(step).is_some_and(|l| l.contains(id))
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("session model serializes")
    }

    /// Sorts every collection into its canonical order so structurally equal
    /// models compare equal.
    pub fn normalize(&mut self) {
        self.pool.sort_by(|a, b| a.id.cmp(&b.id));
        for layer in &mut self.layers {
            layer.sort();
            layer.dedup();
        }
        for p in &mut self.spatial_constraints {
            *p = p.unordered();
        }
        self.spatial_constraints.sort();
        self.spatial_constraints.dedup();
        self.temporal_constraints.sort();
        self.temporal_constraints.dedup();
    }
}

/// Lists every violated invariant. Never fails.
pub fn validate_session(model: &SessionModel) -> ValidationReport {
    let mut out = Vec::new();
    if model.schema_version != SCHEMA_VERSION {
        out.push(Violation::UnsupportedSchema(model.schema_version));
    }

    let mut ids = BTreeSet::new();
    for v in &model.pool {
        if !ids.insert(&v.id) {
            out.push(Violation::DuplicateView(v.id.clone()));
        }
        if !(v.doi > 0.0 && v.doi <= 1.0) {
            out.push(Violation::InvalidDoi {
                view: v.id.clone(),
                doi: v.doi,
            });
        }
        if !(v.preferred_aspect > 0.0 && v.preferred_aspect.is_finite()) {
            out.push(Violation::InvalidAspect {
                view: v.id.clone(),
                aspect: v.preferred_aspect,
            });
        }
        if !(0.0..1.0).contains(&v.min_size_fraction) {
            out.push(Violation::InvalidMinSize {
                view: v.id.clone(),
                value: v.min_size_fraction,
            });
        }
        if v.content.kind == ContentKind::Active
            && v.content.tool_hint.as_deref().is_none_or(str::is_empty)
        {
            out.push(Violation::MissingToolHint(v.id.clone()));
        }
    }

    for (i, layer) in model.layers.iter().enumerate() {
        let step = i + 1;
        let mut seen = BTreeSet::new();
        for id in layer {
            if !ids.contains(id) {
                out.push(Violation::UnknownViewInLayer {
                    step,
                    view: id.clone(),
                });
            }
            if !seen.insert(id) {
                out.push(Violation::DuplicateInLayer {
                    step,
                    view: id.clone(),
                });
            }
        }
    }

    let n = model.layers.len();
    let mut seen = BTreeSet::new();
    for p in &model.spatial_constraints {
        let (step, u, v) = (p.step, p.u.clone(), p.v.clone());
        if step == 0 || step > n {
            out.push(Violation::SpatialStepOutOfRange { step, u, v });
            continue;
        }
        if p.u == p.v {
            out.push(Violation::SpatialSelfPair { step, view: u });
            continue;
        }
        if !model.in_layer(step, &p.u) || !model.in_layer(step, &p.v) {
            out.push(Violation::SpatialCrossesLayers { step, u, v });
            continue;
        }
        if !seen.insert(p.unordered()) {
            out.push(Violation::DuplicateSpatial { step, u, v });
        }
    }

    let mut seen = BTreeSet::new();
    for p in &model.temporal_constraints {
        let (step, u, v) = (p.step, p.u.clone(), p.v.clone());
        if step == 0 || step >= n {
            out.push(Violation::TemporalStepOutOfRange { step, u, v });
            continue;
        }
        if !model.in_layer(step, &p.u) || !model.in_layer(step + 1, &p.v) {
            out.push(Violation::TemporalCrossesLayers { step, u, v });
            continue;
        }
        if !seen.insert(p.clone()) {
            out.push(Violation::DuplicateTemporal { step, u, v });
        }
    }

    for id in model.authors.keys() {
        if !ids.contains(id) {
            out.push(Violation::UnknownAuthorView(id.clone()));
        }
    }

    ValidationReport { violations: out }
}

fn reject(msg: impl Into<String>) -> ModelError {
    ModelError::RejectInvalid(msg.into())
}

/// Applies one edit and returns the edited copy. The input is left untouched
/// and the result is always valid; edits that would break an invariant are
/// rejected.
pub fn apply_edit(model: &SessionModel, edit: &ModelEdit) -> Result<SessionModel, ModelError> {
    let mut m = model.clone();
    match &edit.op {
        EditOp::AddView { view } => {
            if m.view(&view.id).is_some() {
                return Err(reject(format!("view {} already exists", view.id)));
            }
            m.pool.push(view.clone());
            m.authors.insert(view.id.clone(), edit.actor.clone());
        }
        EditOp::RemoveView { view } => {
            let before = m.pool.len();
            m.pool.retain(|v| &v.id != view);
            if m.pool.len() == before {
                return Err(reject(format!("unknown view {view}")));
            }
            for layer in &mut m.layers {
                layer.retain(|id| id != view);
            }
            m.spatial_constraints.retain(|p| !p.mentions(view));
            m.temporal_constraints.retain(|p| !p.mentions(view));
            m.authors.remove(view);
        }
        EditOp::AssignLayer { view, step } => {
            if m.view(view).is_none() {
                return Err(reject(format!("unknown view {view}")));
            }
            let n = m.layers.len();
            if *step == 0 || *step > n + 1 {
                return Err(reject(format!("layer {step} does not exist")));
            }
            if *step == n + 1 {
                m.layers.push(Vec::new());
            }
            let layer = &mut m.layers[step - 1];
            if layer.contains(view) {
                return Err(reject(format!("view {view} already in layer {step}")));
            }
            layer.push(view.clone());
        }
        EditOp::UnassignLayer { view, step } => {
            if !m.in_layer(*step, view) {
                return Err(reject(format!("view {view} is not in layer {step}")));
            }
            m.layers[step - 1].retain(|id| id != view);
            // Constraints only make sense while the view is in the layer.
            m.spatial_constraints
                .retain(|p| !(p.step == *step && p.mentions(view)));
            m.temporal_constraints.retain(|p| {
                !((p.step == *step && &p.u == view) || (p.step + 1 == *step && &p.v == view))
            });
        }
        EditOp::AddSpatial { step, u, v } => {
            let pair = StepPair::new(*step, u.clone(), v.clone()).unordered();
            if m.spatial_constraints
                .iter()
                .any(|p| p.unordered() == pair)
            {
                return Err(reject(format!("duplicate spatial constraint ({u}, {v})")));
            }
            m.spatial_constraints.push(pair);
        }
        EditOp::RemoveSpatial { step, u, v } => {
            let pair = StepPair::new(*step, u.clone(), v.clone()).unordered();
            let before = m.spatial_constraints.len();
            m.spatial_constraints.retain(|p| p.unordered() != pair);
            if m.spatial_constraints.len() == before {
                return Err(reject(format!("no spatial constraint ({u}, {v}) at {step}")));
            }
        }
        EditOp::AddTemporal { step, u, v } => {
            let pair = StepPair::new(*step, u.clone(), v.clone());
            if m.temporal_constraints.contains(&pair) {
                return Err(reject(format!("duplicate temporal constraint ({u}, {v})")));
            }
            m.temporal_constraints.push(pair);
        }
        EditOp::RemoveTemporal { step, u, v } => {
            let pair = StepPair::new(*step, u.clone(), v.clone());
            let before = m.temporal_constraints.len();
            m.temporal_constraints.retain(|p| p != &pair);
            if m.temporal_constraints.len() == before {
                return Err(reject(format!("no temporal constraint ({u}, {v}) at {step}")));
            }
        }
        EditOp::SetDoi { view, doi } => {
            let v = m
                .view_mut(view)
                .ok_or_else(|| reject(format!("unknown view {view}")))?;
            v.doi = *doi;
        }
        EditOp::UpdateContent { view, uri } => {
            let v = m
                .view_mut(view)
                .ok_or_else(|| reject(format!("unknown view {view}")))?;
            if let Some(uri) = uri {
                v.content.uri = uri.clone();
            }
            v.content.revision += 1;
        }
    }

    let report = validate_session(&m);
    if let Some(first) = report.violations.first() {
        return Err(reject(first.to_string()));
    }
    m.normalize();
    Ok(m)
}

/// Projects the model onto step `step`.
pub fn step_context(model: &SessionModel, step: usize) -> Result<StepContext, ModelError> {
    let layer = model.layer(step).ok_or(ModelError::OutOfRange {
        step,
        layers: model.layers.len(),
    })?;
    let mut views: Vec<View> = layer
        .iter()
        .filter_map(|id| model.view(id).cloned())
        .collect();
    views.sort_by(|a, b| a.id.cmp(&b.id));
    views.dedup_by(|a, b| a.id == b.id);

    let mut spatial: Vec<(ViewId, ViewId)> = model
        .spatial_constraints
        .iter()
        .filter(|p| p.step == step)
        .map(|p| {
            let p = p.unordered();
            (p.u, p.v)
        })
        .collect();
    spatial.sort();
    spatial.dedup();

    let mut temporal_in: Vec<(ViewId, ViewId)> = model
        .temporal_constraints
        .iter()
        .filter(|p| p.step + 1 == step)
        .map(|p| (p.u.clone(), p.v.clone()))
        .collect();
    temporal_in.sort();
    temporal_in.dedup();

    Ok(StepContext {
        step,
        views,
        spatial,
        temporal_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edit(op: EditOp) -> ModelEdit {
        ModelEdit::new("alice", op)
    }

    /// Two layers: L1 = {a, b}, L2 = {a, c, d}.
    fn sample() -> SessionModel {
        let mut m = SessionModel::default();
        for id in ["a", "b", "c", "d"] {
            m.pool.push(View::new(id, 1.5));
        }
        m.layers = vec![
            vec!["a".into(), "b".into()],
            vec!["a".into(), "c".into(), "d".into()],
        ];
        m.spatial_constraints.push(StepPair::new(1, "a", "b"));
        m.temporal_constraints.push(StepPair::new(1, "b", "c"));
        m
    }

    #[test]
    fn empty_model_is_valid() {
        assert!(validate_session(&SessionModel::default()).is_valid());
    }

    #[test]
    fn spatial_constraint_across_layers_is_reported() {
        let mut m = sample();
        m.spatial_constraints.push(StepPair::new(1, "a", "c"));
        let report = validate_session(&m);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::SpatialCrossesLayers { step: 1, .. }
        ));
        assert!(report.to_string().contains("spatial constraint crosses layers"));
    }

    #[test]
    fn temporal_constraint_between_subsequent_layers_is_valid() {
        let m = sample();
        assert!(validate_session(&m).is_valid());
    }

    #[test]
    fn reversed_temporal_constraint_is_reported() {
        let mut m = sample();
        m.temporal_constraints.push(StepPair::new(1, "c", "b"));
        assert!(!validate_session(&m).is_valid());
    }

    #[test]
    fn unordered_spatial_duplicates_are_reported() {
        let mut m = sample();
        m.spatial_constraints.push(StepPair::new(1, "b", "a"));
        let report = validate_session(&m);
        assert!(matches!(
            report.violations[..],
            [Violation::DuplicateSpatial { .. }]
        ));
    }

    #[test]
    fn bad_view_attributes_are_reported() {
        let mut m = SessionModel::default();
        let mut v = View::new("x", 0.0);
        v.doi = 0.0;
        v.min_size_fraction = 1.0;
        v.content.kind = ContentKind::Active;
        m.pool.push(v);
        assert_eq!(validate_session(&m).violations.len(), 4);
    }

    #[test]
    fn add_then_assign() {
        let m = sample();
        let m = apply_edit(
            &m,
            &edit(EditOp::AddView {
                view: View::new("v9", 1.0),
            }),
        )
        .unwrap();
        let m = apply_edit(
            &m,
            &edit(EditOp::AssignLayer {
                view: "v9".into(),
                step: 2,
            }),
        )
        .unwrap();
        assert!(m.layer(2).unwrap().contains(&"v9".into()));
        assert_eq!(m.authors.get(&ViewId::from("v9")), Some(&UserId::from("alice")));
    }

    #[test]
    fn assign_to_next_step_appends_layer() {
        let m = apply_edit(
            &sample(),
            &edit(EditOp::AssignLayer {
                view: "b".into(),
                step: 3,
            }),
        )
        .unwrap();
        assert_eq!(m.layer_count(), 3);
        assert!(apply_edit(
            &m,
            &edit(EditOp::AssignLayer {
                view: "b".into(),
                step: 5
            })
        )
        .is_err());
    }

    #[test]
    fn remove_view_cascades() {
        let original = sample();
        let m = apply_edit(&original, &edit(EditOp::RemoveView { view: "b".into() })).unwrap();
        assert!(m.view(&"b".into()).is_none());
        assert!(m.layers.iter().all(|l| !l.contains(&"b".into())));
        assert!(m.spatial_constraints.is_empty());
        assert!(m.temporal_constraints.is_empty());
        assert!(validate_session(&m).is_valid());
        // value semantics
        assert!(original.view(&"b".into()).is_some());
    }

    #[test]
    fn add_spatial_outside_layer_is_rejected() {
        let err = apply_edit(
            &sample(),
            &edit(EditOp::AddSpatial {
                step: 1,
                u: "c".into(),
                v: "a".into(),
            }),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::RejectInvalid(_)));
    }

    #[test]
    fn duplicate_and_unknown_edits_are_rejected() {
        let m = sample();
        let dup = edit(EditOp::AddSpatial {
            step: 1,
            u: "b".into(),
            v: "a".into(),
        });
        assert!(apply_edit(&m, &dup).is_err());
        let unknown = edit(EditOp::SetDoi {
            view: "zz".into(),
            doi: 0.3,
        });
        assert!(apply_edit(&m, &unknown).is_err());
        let bad_doi = edit(EditOp::SetDoi {
            view: "a".into(),
            doi: 1.5,
        });
        assert!(apply_edit(&m, &bad_doi).is_err());
    }

    #[test]
    fn unassign_drops_dependent_constraints() {
        let m = apply_edit(
            &sample(),
            &edit(EditOp::UnassignLayer {
                view: "b".into(),
                step: 1,
            }),
        )
        .unwrap();
        assert!(m.spatial_constraints.is_empty());
        assert!(m.temporal_constraints.is_empty());
    }

    #[test]
    fn content_update_bumps_revision() {
        let m = apply_edit(
            &sample(),
            &edit(EditOp::UpdateContent {
                view: "a".into(),
                uri: None,
            }),
        )
        .unwrap();
        assert_eq!(m.view(&"a".into()).unwrap().content.revision, 1);
    }

    #[test]
    fn step_context_projects_layer() {
        let m = sample();
        let c1 = step_context(&m, 1).unwrap();
        assert!(c1.temporal_in.is_empty());
        assert_eq!(c1.spatial, vec![("a".into(), "b".into())]);
        let c2 = step_context(&m, 2).unwrap();
        assert_eq!(
            c2.views.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(),
            ["a", "c", "d"]
        );
        assert_eq!(c2.temporal_in, vec![("b".into(), "c".into())]);
        assert!(matches!(
            step_context(&m, 3),
            Err(ModelError::OutOfRange { step: 3, layers: 2 })
        ));
        assert!(step_context(&m, 0).is_err());
    }

    #[test]
    fn session_file_round_trips() {
        let m = sample();
        let text = m.to_json_pretty();
        assert!(text.contains("\"views\""));
        assert!(text.contains("\"schema_version\": 1"));
        assert_eq!(SessionModel::from_json(&text).unwrap(), m);
    }
}
