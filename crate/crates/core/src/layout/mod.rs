//! Automatic view layout for one step of a session.
//!
//! The search runs on two levels. [`search`] enumerates view-to-display
//! assignments best-first, ordered by an over-estimating bound, and sums
//! the exact per-display optima of complete assignments. [`display`]
//! computes such an optimum: a branch-and-bound over pairwise separation
//! relations whose nodes are LPs with tangent cuts for the size reward.
//! Per-display results are memoized across assignments and across calls.

mod bound;
mod cache;
mod display;
mod grid;
mod search;

pub use bound::{area_bound, heuristic_bound, max_single_size};
pub use cache::DisplayKey;
pub use display::{
    solve_display_layout, AnchorKind, DisplayLayout, DisplayProblem, DisplayView, PositionAnchor,
    SizeAnchor,
};
pub use search::{Assignment, ExpandedNode};

use display::{solve_display_with_cutoff, DisplayOutcome};

use crate::environment::DisplayEcology;
use crate::ids::{DisplayId, ViewId};
use crate::model::{ModelError, SessionModel};
use crate::quality::{Placement, QualityError, QualityReport, QualityWeights};
use crate::solver::LpError;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use thiserror::Error;

/// Relative weight of a manual move or resize anchor, as a multiple of β.
pub const MANUAL_ANCHOR_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub max_exact_views_per_display: usize,
    /// Tangent segments `k` for the size reward.
    pub size_cut_segments: usize,
    /// How often the minimum view sizes are halved before a display is
    /// declared infeasible.
    pub min_size_relax_rounds: usize,
    /// Assignment nodes expanded before the search returns its best-so-far.
    pub node_budget: usize,
    /// Separation nodes per display subproblem.
    pub display_node_budget: usize,
    /// Debug switch: expand every node regardless of bounds.
    #[serde(default)]
    pub disable_pruning: bool,
    /// Record every expanded assignment node in the result.
    #[serde(default)]
    pub trace: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            max_exact_views_per_display: 6,
            size_cut_segments: 16,
            min_size_relax_rounds: 3,
            node_budget: 200_000,
            display_node_budget: 50_000,
            disable_pruning: false,
            trace: false,
        }
    }
}

/// A manual adjustment of one view at one step. Soft overrides become
/// anchor terms with weight `10·β`; hard overrides pin the view.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<DisplayId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_mm: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_mm: Option<f64>,
    #[serde(default)]
    pub hard: bool,
}

pub type StepOverrides = BTreeMap<ViewId, ViewOverride>;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LayoutError {
    #[error("no connected display")]
    NoConnectedDisplay,
    #[error("no feasible layout for step {0}")]
    InfeasibleStep(usize),
    #[error("step too large: {views} views on {displays} displays")]
    TooLarge { views: usize, displays: usize },
    #[error("display {0}: no feasible placement")]
    InfeasibleDisplay(DisplayId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Solver(#[from] LpError),
}

/// Per-display outcome inside a step result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplaySummary {
    pub display: DisplayId,
    pub views: Vec<ViewId>,
    /// Display-restricted quality recomputed from the placements.
    pub exact_value: f64,
    /// Modeled LP objective (without tie-break terms); absent for the grid
    /// template.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_value: Option<f64>,
    /// Contribution of manual anchors, not part of `Q`.
    pub anchor_bonus: f64,
    pub template: bool,
    pub min_size_scale: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayoutStats {
    pub nodes_expanded: usize,
    pub lps_solved: usize,
    pub display_solves: usize,
    pub cache_hits: usize,
    pub budget_exhausted: bool,
    /// Search objective of the result (`Q` plus manual anchor terms).
    pub objective: f64,
    /// Smallest bound among expanded assignment nodes.
    pub min_expanded_bound: f64,
    pub per_display: Vec<DisplaySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub step: usize,
    pub placements: Vec<Placement>,
    #[serde(rename = "quality")]
    pub report: QualityReport,
    pub stats: LayoutStats,
    /// Expanded assignment nodes, recorded when `EngineParams::trace` is set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<ExpandedNode>,
}

impl LayoutResult {
    /// Wraps placements that did not come from the engine, e.g. a layout
    /// arranged by hand, so they can serve as the previous step.
    pub fn from_placements(step: usize, placements: Vec<Placement>) -> Self {
        Self {
            step,
            placements,
            report: QualityReport::default(),
            stats: LayoutStats::default(),
            trace: Vec::new(),
        }
    }

    pub fn placement(&self, view: &ViewId) -> Option<&Placement> {
        self.placements.iter().find(|p| &p.view == view)
    }

    /// Layout document; wall time is dropped unless requested so repeated
    /// runs produce identical bytes.
    pub fn to_json(&self, include_timing: bool) -> String {
        let mut copy = self.clone();
        if !include_timing {
            copy.stats.wall_time_ms = None;
        }
        copy.trace.clear();
        serde_json::to_string_pretty(&copy).expect("layout serializes")
    }
}

/// Everything needed to lay out one step.
#[derive(Clone, Copy, Debug)]
pub struct StepInput<'a> {
    pub model: &'a SessionModel,
    pub step: usize,
    pub ecology: &'a DisplayEcology,
    pub prev_layout: Option<&'a LayoutResult>,
    pub overrides: Option<&'a StepOverrides>,
    pub weights: &'a QualityWeights,
}

impl<'a> StepInput<'a> {
    pub fn new(
        model: &'a SessionModel,
        step: usize,
        ecology: &'a DisplayEcology,
        weights: &'a QualityWeights,
    ) -> Self {
        Self {
            model,
            step,
            ecology,
            prev_layout: None,
            overrides: None,
            weights,
        }
    }

    pub fn with_prev(mut self, prev: Option<&'a LayoutResult>) -> Self {
        self.prev_layout = prev;
        self
    }

    pub fn with_overrides(mut self, overrides: Option<&'a StepOverrides>) -> Self {
        self.overrides = overrides;
        self
    }
}

pub(crate) type CachedDisplay = Arc<Result<DisplayLayout, LayoutError>>;

/// Layout engine with a per-display memo that persists across calls.
pub struct LayoutEngine {
    params: EngineParams,
    cache: Mutex<HashMap<DisplayKey, CachedDisplay>>,
    bounds: Mutex<HashMap<DisplayKey, f64>>,
}

impl LayoutEngine {
    pub fn new(params: EngineParams) -> Self {
        Self {
            params,
            cache: Mutex::new(HashMap::new()),
            bounds: Mutex::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().len()
    }

    pub fn clear_cache(&self) {
        self.cache.lock().clear();
        self.bounds.lock().clear();
    }

    pub fn solve_step(&self, input: &StepInput<'_>) -> Result<LayoutResult, LayoutError> {
        search::solve(self, input)
    }

    /// Re-solves a step after its inputs changed. The contract is that of
    /// [`LayoutEngine::solve_step`]; the memo makes unchanged displays cheap.
    pub fn relayout(
        &self,
        input: &StepInput<'_>,
        _previous: &LayoutResult,
    ) -> Result<LayoutResult, LayoutError> {
        search::solve(self, input)
    }

    /// Memoized display solve. With a finite `cutoff` the result may be an
    /// upper bound below it instead of a layout; such bounds are memoized
    /// too and reused for lower or equal cutoffs.
    pub(crate) fn solve_display_cached(
        &self,
        problem: &DisplayProblem,
        weights: &QualityWeights,
        cutoff: f64,
    ) -> (Lookup, bool) {
        let key = DisplayKey::new(problem, weights, &self.params);
        if let Some(hit) = self.cache.lock().get(&key) {
            return (Lookup::Exact(hit.clone()), true);
        }
        if let Some(&upper) = self.bounds.lock().get(&key) {
            if upper < cutoff {
                return (Lookup::Below { lps: 0 }, true);
            }
        }
        let solved = match solve_display_with_cutoff(problem, weights, &self.params, cutoff) {
            Ok(DisplayOutcome::Below { upper, lps }) => {
                let mut bounds = self.bounds.lock();
                let entry = bounds.entry(key).or_insert(upper);
                *entry = entry.min(upper);
                return (Lookup::Below { lps }, false);
            }
            Ok(DisplayOutcome::Solved(l)) => Arc::new(Ok(l)),
            Err(e) => Arc::new(Err(e)),
        };
        let mut cache = self.cache.lock();
        let entry = cache.entry(key).or_insert(solved);
        (Lookup::Exact(entry.clone()), false)
    }
}

pub(crate) enum Lookup {
    Exact(CachedDisplay),
    Below { lps: usize },
}

impl Default for LayoutEngine {
    fn default() -> Self {
        Self::new(EngineParams::default())
    }
}

/// One-shot convenience wrapper around [`LayoutEngine::solve_step`].
pub fn solve_step(
    model: &SessionModel,
    step: usize,
    ecology: &DisplayEcology,
    prev_layout: Option<&LayoutResult>,
    weights: &QualityWeights,
    params: &EngineParams,
) -> Result<LayoutResult, LayoutError> {
    LayoutEngine::new(params.clone())
        .solve_step(&StepInput::new(model, step, ecology, weights).with_prev(prev_layout))
}

/// Geometric checks every produced layout must pass.
pub fn check_layout_invariants(
    placements: &[Placement],
    ecology: &DisplayEcology,
    aspects: &BTreeMap<ViewId, f64>,
    slack_mm: f64,
) -> Vec<String> {
    let mut problems = Vec::new();
    for p in placements {
        let Some(d) = ecology.display(&p.display) else {
            problems.push(format!("{} on unknown display {}", p.view, p.display));
            continue;
        };
        if p.left() < -slack_mm
            || p.top() < -slack_mm
            || p.right() > d.width_mm + slack_mm
            || p.bottom() > d.height_mm + slack_mm
        {
            problems.push(format!("{} protrudes beyond {}", p.view, p.display));
        }
        if p.w_mm < 0.0 || p.h_mm < 0.0 {
            problems.push(format!("{} has negative size", p.view));
        }
        if let Some(a) = aspects.get(&p.view) {
            let expected_w = p.h_mm * a;
            if p.h_mm > 0.0 && ((p.w_mm - expected_w) / expected_w).abs() > 1e-6 {
                problems.push(format!("{} aspect {} != {}", p.view, p.w_mm / p.h_mm, a));
            }
        }
    }
    for (i, a) in placements.iter().enumerate() {
        for b in &placements[i + 1..] {
            if a.overlaps(b, slack_mm) {
                problems.push(format!("{} overlaps {}", a.view, b.view));
            }
        }
    }
    problems
}
