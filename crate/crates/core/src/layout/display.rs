//! Exact placement of a fixed set of views on one display.
//!
//! Coordinates inside the LP are normalized by the display extent `E`, so
//! `x = s / E` lies in `[0, 1]` and the display spans `W/E × H/E`.
//! Per view the LP carries a center `(px, py)`, a size `x` and `t ≈ x²`
//! bounded below by tangent cuts. L1 distances use one auxiliary per axis.
//! Non-overlap is disjunctive; it is enforced by branching each conflicting
//! pair into one of four half-plane relations.

use super::grid::grid_template;
use super::{EngineParams, LayoutError};
use crate::environment::{display_extent, Display};
use crate::ids::ViewId;
use crate::quality::{Placement, QualityWeights};
use crate::solver::{LinearProgram, LpStatus, Relation, SimplexOptions, WarmSimplex};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const INF: f64 = f64::INFINITY;
/// Normalized slack when deciding whether two LP boxes are separated.
const SEPARATION_TOL: f64 = 1e-9;
const PRUNE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayView {
    pub id: ViewId,
    pub aspect: f64,
    pub doi: f64,
    pub min_size_fraction: f64,
    /// Hard pin of the center, display millimetres.
    pub pin_center: Option<[f64; 2]>,
    /// Hard pin of `s_v`, millimetres.
    pub pin_size: Option<f64>,
}

impl DisplayView {
    /// Half width and half height per unit of `x`.
    fn half_extents(&self) -> (f64, f64) {
        let a = self.aspect;
        (a / (2.0 * (1.0 + a)), 1.0 / (2.0 * (1.0 + a)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    /// From a temporal constraint; counts towards `Q_T`.
    Temporal,
    /// From a manual move; a search incentive outside `Q`.
    Manual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionAnchor {
    pub view: usize,
    pub target_mm: [f64; 2],
    pub weight: f64,
    pub kind: AnchorKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeAnchor {
    pub view: usize,
    pub size_mm: f64,
    pub weight: f64,
}

/// The display-restricted layout problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplayProblem {
    pub display: Display,
    pub vis: f64,
    /// Sorted by id.
    pub views: Vec<DisplayView>,
    /// Spatial pairs as indices into `views`.
    pub pairs: Vec<(usize, usize)>,
    pub anchors: Vec<PositionAnchor>,
    pub size_anchors: Vec<SizeAnchor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayLayout {
    /// Same order as the problem's views.
    pub placements: Vec<Placement>,
    /// Display-restricted `Q` recomputed from the placements.
    pub value: f64,
    /// Manual anchor terms, evaluated on the placements.
    pub bonus: f64,
    /// Modeled LP objective of the chosen leaf, without tie-break terms.
    pub lp_value: Option<f64>,
    pub nodes: usize,
    pub lps: usize,
    /// Factor applied to the minimum sizes (1, 1/2, 1/4, ...).
    pub min_size_scale: f64,
    pub template: bool,
    /// False if the node budget ran out before optimality was proven.
    pub proven: bool,
}

impl DisplayLayout {
    pub fn objective(&self) -> f64 {
        self.value + self.bonus
    }
}

/// Evaluates the display-restricted quality and the manual anchor bonus of
/// concrete placements (same order as `problem.views`).
pub(crate) fn evaluate(
    problem: &DisplayProblem,
    placements: &[Placement],
    weights: &QualityWeights,
) -> (f64, f64) {
    let e = display_extent(&problem.display);
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).abs() + (a[1] - b[1]).abs()) / e;
    let mut q = 0.0;
    for &(i, j) in &problem.pairs {
        q += weights.alpha * (1.0 - dist(placements[i].center(), placements[j].center()));
    }
    let mut bonus = 0.0;
    for a in &problem.anchors {
        let term = a.weight * (1.0 - dist(placements[a.view].center(), a.target_mm));
        match a.kind {
            AnchorKind::Temporal => q += term,
            AnchorKind::Manual => bonus += term,
        }
    }
    for a in &problem.size_anchors {
        bonus += a.weight * (1.0 - (placements[a.view].size_mm() - a.size_mm).abs() / e);
    }
    for (v, p) in problem.views.iter().zip(placements) {
        let x = p.size_mm() / e;
        q += weights.gamma * problem.vis * (-v.doi * x * x + 2.0 * v.doi * x);
    }
    (q, bonus)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Separation {
    /// `i` entirely left of `j`.
    LeftOf,
    RightOf,
    /// `i` entirely above `j` (smaller y).
    Above,
    Below,
}

const SEPARATIONS: [Separation; 4] = [
    Separation::LeftOf,
    Separation::RightOf,
    Separation::Above,
    Separation::Below,
];

/// Variable layout of the base LP.
struct LpModel {
    lp: LinearProgram,
    px: Vec<usize>,
    py: Vec<usize>,
    x: Vec<usize>,
    t: Vec<Option<usize>>,
    segments: usize,
    /// Tangent breakpoints present in `lp`, per view.
    cuts: Vec<Vec<bool>>,
    tie: Vec<usize>,
    /// Objective constant (pair and anchor `1`s).
    constant: f64,
    epsilon: f64,
    half: Vec<(f64, f64)>,
    extent: f64,
}

impl LpModel {
    fn build(
        problem: &DisplayProblem,
        weights: &QualityWeights,
        params: &EngineParams,
        min_scale: f64,
    ) -> Self {
        let d = &problem.display;
        let e = display_extent(d);
        let (wn, hn) = (d.width_mm / e, d.height_mm / e);
        let eps = weights.tie_break_epsilon;
        let mut lp = LinearProgram::new();
        let m = problem.views.len();
        let (mut px, mut py, mut x, mut tvars, mut tie) = (
            Vec::with_capacity(m),
            Vec::with_capacity(m),
            Vec::with_capacity(m),
            Vec::with_capacity(m),
            Vec::new(),
        );
        let half: Vec<(f64, f64)> = problem.views.iter().map(DisplayView::half_extents).collect();

        for (i, v) in problem.views.iter().enumerate() {
            let (cx_b, cy_b) = match v.pin_center {
                Some([cx, cy]) => ((cx / e, cx / e), (cy / e, cy / e)),
                None => ((0.0, wn), (0.0, hn)),
            };
            px.push(lp.add_var(format!("px_{}", v.id), cx_b.0, cx_b.1, 0.0));
            py.push(lp.add_var(format!("py_{}", v.id), cy_b.0, cy_b.1, 0.0));
            let c = weights.gamma * problem.vis * v.doi;
            let x_bounds = match v.pin_size {
                Some(s) => (s / e, s / e),
                None => (v.min_size_fraction * min_scale, INF),
            };
            x.push(lp.add_var(format!("x_{}", v.id), x_bounds.0, x_bounds.1, 2.0 * c + eps));
            if c > 0.0 {
                tvars.push(Some(lp.add_var(format!("t_{}", v.id), 0.0, INF, -c)));
            } else {
                tvars.push(None);
            }
            let (ha, hb) = half[i];
            lp.add_row(&[(px[i], 1.0), (x[i], -ha)], Relation::Ge, 0.0);
            lp.add_row(&[(px[i], 1.0), (x[i], ha)], Relation::Le, wn);
            lp.add_row(&[(py[i], 1.0), (x[i], -hb)], Relation::Ge, 0.0);
            lp.add_row(&[(py[i], 1.0), (x[i], hb)], Relation::Le, hn);
        }
        // Only the middle tangent up front; the rest are added on demand.
        let segments = params.size_cut_segments.max(1);
        let mut cuts = vec![vec![false; segments + 1]; m];
        for i in 0..m {
            if let Some(t) = tvars[i] {
                let j = segments / 2;
                let b = j as f64 / segments as f64;
                lp.add_row(&[(t, 1.0), (x[i], -2.0 * b)], Relation::Ge, -b * b);
                cuts[i][j] = true;
            }
        }
        // Total area of disjoint boxes cannot exceed the display area. With
        // t below x² this cut never removes a feasible layout.
        if m >= 2 {
            let terms: Vec<(usize, f64)> = problem
                .views
                .iter()
                .zip(&tvars)
                .filter_map(|(v, t)| t.map(|t| (t, v.aspect / (1.0 + v.aspect).powi(2))))
                .collect();
            if terms.len() >= 2 {
                lp.add_row(&terms, Relation::Le, wn * hn);
            }
        }

        let mut constant = 0.0;
        let abs_term = |lp: &mut LinearProgram, name: String, var: usize, target: Option<usize>, offset: f64, weight: f64| {
            // aux >= |var - target - offset|
            let aux = lp.add_var(name, 0.0, INF, -weight);
            let mut pos = vec![(aux, 1.0), (var, -1.0)];
            let mut neg = vec![(aux, 1.0), (var, 1.0)];
            if let Some(t) = target {
                pos.push((t, 1.0));
                neg.push((t, -1.0));
            }
            lp.add_row(&pos, Relation::Ge, -offset);
            lp.add_row(&neg, Relation::Ge, offset);
            aux
        };
        for &(i, j) in &problem.pairs {
            constant += weights.alpha;
            let dx = abs_term(&mut lp, format!("dx_{i}_{j}"), px[i], Some(px[j]), 0.0, weights.alpha);
            let dy = abs_term(&mut lp, format!("dy_{i}_{j}"), py[i], Some(py[j]), 0.0, weights.alpha);
            // Disjoint boxes are apart by at least the smaller half extent
            // of each along one axis.
            let (mi, mj) = (half[i].0.min(half[i].1), half[j].0.min(half[j].1));
            lp.add_row(&[(dx, 1.0), (dy, 1.0), (x[i], -mi), (x[j], -mj)], Relation::Ge, 0.0);
        }
        for (k, a) in problem.anchors.iter().enumerate() {
            constant += a.weight;
            let [ax, ay] = a.target_mm;
            abs_term(&mut lp, format!("ax_{k}"), px[a.view], None, ax / e, a.weight);
            abs_term(&mut lp, format!("ay_{k}"), py[a.view], None, ay / e, a.weight);
        }
        for (k, a) in problem.size_anchors.iter().enumerate() {
            constant += a.weight;
            abs_term(&mut lp, format!("as_{k}"), x[a.view], None, a.size_mm / e, a.weight);
        }
        for i in 0..m {
            tie.push(abs_term(&mut lp, format!("gx_{i}"), px[i], None, wn / 2.0, eps));
            tie.push(abs_term(&mut lp, format!("gy_{i}"), py[i], None, hn / 2.0, eps));
        }

        Self {
            lp,
            px,
            py,
            x,
            t: tvars,
            segments,
            cuts,
            tie,
            constant,
            epsilon: eps,
            half,
            extent: e,
        }
    }

    /// The base LP with every tangent cut, as the lazy loop converges to it.
    #[cfg(test)]
    fn full_lp(&self) -> LinearProgram {
        let mut lp = self.lp.clone();
        for (i, t) in self.t.iter().enumerate() {
            if let Some(t) = *t {
                let mut set = crate::solver::ConcaveCutSet::uniform(self.x[i], t, self.segments);
                let present = &self.cuts[i];
                set.breakpoints = set
                    .breakpoints
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !present[*j])
                    .map(|(_, b)| *b)
                    .collect();
                set.apply(&mut lp);
            }
        }
        lp
    }

    /// Adds the most violated missing tangent per view until `t ≥ x²`'s
    /// envelope holds everywhere. Returns `None` if the LP turns infeasible.
    fn separate_cuts(
        &self,
        state: &mut WarmSimplex,
        cuts: &mut [Vec<bool>],
        mut values: Vec<f64>,
        lps: &mut usize,
    ) -> Result<Option<(Vec<f64>, f64)>, LayoutError> {
        let k = self.segments as f64;
        loop {
            let mut added = false;
            for (i, t) in self.t.iter().enumerate() {
                let Some(t) = *t else { continue };
                let xv = values[self.x[i]];
                let j = (xv * k).round().clamp(0.0, k) as usize;
                let b = j as f64 / k;
                if cuts[i][j] || values[t] >= 2.0 * b * xv - b * b - 1e-12 {
                    continue;
                }
                state.add_row(&[(t, 1.0), (self.x[i], -2.0 * b)], Relation::Ge, -b * b)?;
                cuts[i][j] = true;
                added = true;
            }
            if !added {
                let obj = state
                    .lp()
                    .objective
                    .iter()
                    .zip(&values)
                    .map(|(c, v)| c * v)
                    .sum::<f64>();
                return Ok(Some((values, self.objective(obj))));
            }
            *lps += 1;
            let sol = state.reoptimize()?;
            if sol.status != LpStatus::Optimal {
                return Ok(None);
            }
            values = sol.values;
        }
    }

    fn separation_terms(&self, i: usize, j: usize, sep: Separation) -> [(usize, f64); 4] {
        let (a, b) = match sep {
            Separation::LeftOf | Separation::Above => (i, j),
            Separation::RightOf | Separation::Below => (j, i),
        };
        // a before b along the axis
        let (pos, h) = match sep {
            Separation::LeftOf | Separation::RightOf => (&self.px, (self.half[a].0, self.half[b].0)),
            Separation::Above | Separation::Below => (&self.py, (self.half[a].1, self.half[b].1)),
        };
        [(pos[a], 1.0), (pos[b], -1.0), (self.x[a], h.0), (self.x[b], h.1)]
    }

    /// Full objective including the constant.
    fn objective(&self, lp_objective: f64) -> f64 {
        self.constant + lp_objective
    }

    /// Objective without the tie-break terms.
    fn modeled(&self, values: &[f64], lp_objective: f64) -> f64 {
        let tie: f64 = self.tie.iter().map(|&k| values[k]).sum();
        let sizes: f64 = self.x.iter().map(|&k| values[k]).sum();
        self.constant + lp_objective + self.epsilon * tie - self.epsilon * sizes
    }

    /// Boxes `(left, right, top, bottom)` in normalized units.
    fn boxes(&self, values: &[f64]) -> Vec<[f64; 4]> {
        (0..self.x.len())
            .map(|i| {
                let (cx, cy, x) = (values[self.px[i]], values[self.py[i]], values[self.x[i]]);
                let (ha, hb) = self.half[i];
                [cx - ha * x, cx + ha * x, cy - hb * x, cy + hb * x]
            })
            .collect()
    }

    fn placements(&self, problem: &DisplayProblem, values: &[f64]) -> Vec<Placement> {
        let e = self.extent;
        let d = &problem.display;
        problem
            .views
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = values[self.x[i]].max(0.0) * e;
                let mut p = Placement::from_size(
                    v.id.clone(),
                    d.id.clone(),
                    [values[self.px[i]] * e, values[self.py[i]] * e],
                    s,
                    v.aspect,
                );
                // Clear rounding noise at the display border.
                p.cx_mm = p.cx_mm.clamp(p.w_mm / 2.0, (d.width_mm - p.w_mm / 2.0).max(p.w_mm / 2.0));
                p.cy_mm = p.cy_mm.clamp(p.h_mm / 2.0, (d.height_mm - p.h_mm / 2.0).max(p.h_mm / 2.0));
                p
            })
            .collect()
    }
}

/// Overlap area of two boxes, zero if they are separated within tolerance.
fn overlap(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let w = a[1].min(b[1]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[2].max(b[2]);
    if w <= SEPARATION_TOL || h <= SEPARATION_TOL {
        0.0
    } else {
        w * h
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    decided: Vec<usize>,
    state: WarmSimplex,
    cuts: Vec<Vec<bool>>,
    values: Vec<f64>,
    objective: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Leaf {
    values: Vec<f64>,
    objective: f64,
}

struct Outcome {
    best: Option<Leaf>,
    nodes: usize,
    lps: usize,
    proven: bool,
    /// Upper bound on the display objective when the search stopped at the
    /// cutoff.
    below: Option<f64>,
}

/// Result of a display solve under a cutoff.
#[derive(Clone, Debug)]
pub(crate) enum DisplayOutcome {
    Solved(DisplayLayout),
    /// The optimum is at most this value, which is below the cutoff.
    Below { upper: f64, lps: usize },
}

/// Best-first separation branching. Stops early, reporting an upper bound,
/// once no open node can reach `cutoff` and the round is known to be
/// feasible (a leaf was found or `witness` holds).
fn branch_and_bound(
    problem: &DisplayProblem,
    model: &LpModel,
    params: &EngineParams,
    cutoff: f64,
    witness: bool,
) -> Result<Outcome, LayoutError> {
    let m = problem.views.len();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let mut lps = 1usize;
    let mut nodes = 0usize;
    let mut seq = 0usize;
    let mut best: Option<Leaf> = None;
    let mut heap = BinaryHeap::new();

    let (root, state) = WarmSimplex::solve(model.lp.clone(), &SimplexOptions::default())?;
    if let (LpStatus::Optimal, Some(mut state)) = (root.status, state) {
        let mut cuts = model.cuts.clone();
        if let Some((values, obj)) = model.separate_cuts(&mut state, &mut cuts, root.values, &mut lps)? {
            heap.push(Node {
                bound: obj,
                depth: 0,
                seq,
                decided: Vec::new(),
                state,
                cuts,
                values,
                objective: obj,
            });
        }
    }

    // Tie-break terms may lower the LP objective below the modeled value
    // by at most ε/2 per view.
    let slack = model.epsilon * 0.5 * m as f64 + 1e-9;
    let mut proven = true;
    let mut below = None;
    while let Some(node) = heap.pop() {
        if let Some(b) = &best {
            if node.bound <= b.objective + PRUNE_TOL {
                break;
            }
        }
        if node.bound + slack < cutoff && (witness || best.is_some()) {
            let top = best.as_ref().map_or(node.bound, |b| b.objective.max(node.bound));
            below = Some(top + slack);
            break;
        }
        nodes += 1;
        if nodes > params.display_node_budget {
            proven = false;
            break;
        }
        let boxes = model.boxes(&node.values);
        let mut branch: Option<(usize, f64)> = None;
        for (p, &(i, j)) in pairs.iter().enumerate() {
            if node.decided.contains(&p) {
                continue;
            }
            let ov = overlap(&boxes[i], &boxes[j]);
            if ov > 0.0 && branch.is_none_or(|(_, b)| ov > b) {
                branch = Some((p, ov));
            }
        }
        let Some((p, _)) = branch else {
            // Every pair is separated: the relaxation optimum is a layout.
            if best.as_ref().is_none_or(|b| node.objective > b.objective) {
                best = Some(Leaf {
                    values: node.values,
                    objective: node.objective,
                });
            }
            continue;
        };
        let (i, j) = pairs[p];
        for sep in SEPARATIONS {
            let mut state = node.state.clone();
            let mut cuts = node.cuts.clone();
            state.add_row(&model.separation_terms(i, j, sep), Relation::Le, 0.0)?;
            lps += 1;
            let sol = state.reoptimize()?;
            if sol.status != LpStatus::Optimal {
                continue;
            }
            let Some((values, obj)) = model.separate_cuts(&mut state, &mut cuts, sol.values, &mut lps)? else {
                continue;
            };
            if best.as_ref().is_some_and(|b| obj <= b.objective + PRUNE_TOL) {
                continue;
            }
            let mut decided = node.decided.clone();
            decided.push(p);
            seq += 1;
            heap.push(Node {
                bound: obj.min(node.bound),
                depth: node.depth + 1,
                seq,
                decided,
                state,
                cuts,
                values,
                objective: obj,
            });
        }
    }
    Ok(Outcome {
        best,
        nodes,
        lps,
        proven,
        below,
    })
}

/// Maximizes the display-restricted quality for a fixed set of views.
///
/// Up to `max_exact_views_per_display` views are placed exactly; larger
/// sets use an equal-cell grid template. Minimum sizes are halved up to
/// `min_size_relax_rounds` times before the display is declared infeasible.
pub fn solve_display_layout(
    problem: &DisplayProblem,
    weights: &QualityWeights,
    params: &EngineParams,
) -> Result<DisplayLayout, LayoutError> {
    match solve_display_with_cutoff(problem, weights, params, f64::NEG_INFINITY)? {
        DisplayOutcome::Solved(l) => Ok(l),
        DisplayOutcome::Below { .. } => unreachable!("no cutoff"),
    }
}

/// [`solve_display_layout`] that may give up with an upper bound once the
/// objective provably stays below `cutoff`.
pub(crate) fn solve_display_with_cutoff(
    problem: &DisplayProblem,
    weights: &QualityWeights,
    params: &EngineParams,
    cutoff: f64,
) -> Result<DisplayOutcome, LayoutError> {
    if problem.views.is_empty() {
        return Ok(DisplayOutcome::Solved(DisplayLayout {
            placements: Vec::new(),
            value: 0.0,
            bonus: 0.0,
            lp_value: Some(0.0),
            nodes: 0,
            lps: 0,
            min_size_scale: 1.0,
            template: false,
            proven: true,
        }));
    }
    let pinned = problem.views.iter().any(|v| v.pin_center.is_some() || v.pin_size.is_some());
    let mut total_nodes = 0;
    let mut total_lps = 0;
    let mut scale = 1.0;
    for _round in 0..=params.min_size_relax_rounds {
        if problem.views.len() > params.max_exact_views_per_display {
            if let Some(placements) = grid_template(problem, scale) {
                let (value, bonus) = evaluate(problem, &placements, weights);
                return Ok(DisplayOutcome::Solved(DisplayLayout {
                    placements,
                    value,
                    bonus,
                    lp_value: None,
                    nodes: 0,
                    lps: 0,
                    min_size_scale: scale,
                    template: true,
                    proven: false,
                }));
            }
        } else {
            let model = LpModel::build(problem, weights, params, scale);
            // A feasible grid proves this round cannot end infeasible, which
            // would otherwise send us to a laxer round with a higher optimum.
            let witness = cutoff.is_finite() && !pinned && grid_template(problem, scale).is_some();
            let out = branch_and_bound(problem, &model, params, cutoff, witness)?;
            total_nodes += out.nodes;
            total_lps += out.lps;
            if let Some(upper) = out.below {
                return Ok(DisplayOutcome::Below { upper, lps: total_lps });
            }
            if let Some(leaf) = out.best {
                let placements = model.placements(problem, &leaf.values);
                let (value, bonus) = evaluate(problem, &placements, weights);
                return Ok(DisplayOutcome::Solved(DisplayLayout {
                    placements,
                    value,
                    bonus,
                    lp_value: Some(model.modeled(&leaf.values, leaf.objective - model.constant)),
                    nodes: total_nodes,
                    lps: total_lps,
                    min_size_scale: scale,
                    template: false,
                    proven: out.proven,
                }));
            }
        }
        scale *= 0.5;
    }
    Err(LayoutError::InfeasibleDisplay(problem.display.id.clone()))
}
