//! Best-first search over view-to-display assignments.

use super::bound::{area_bound, area_bound_with_penalty, heuristic_bound};
use super::display::{AnchorKind, DisplayLayout, DisplayProblem, DisplayView, PositionAnchor, SizeAnchor};
use super::{
    CachedDisplay, DisplaySummary, Lookup, LayoutEngine, LayoutError, LayoutResult, LayoutStats, StepInput,
    MANUAL_ANCHOR_FACTOR,
};
use crate::environment::Display;
use crate::ids::{DisplayId, ViewId};
use crate::model::step_context;
use crate::quality::{total_quality, Placement};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::time::Instant;

/// View-to-display map; partial while the search runs.
pub type Assignment = BTreeMap<ViewId, DisplayId>;

/// A node popped from the search queue, recorded when tracing is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandedNode {
    pub assignment: Assignment,
    /// Queue key: the refined bound, with exact values for displays that
    /// were already evaluated.
    pub key: f64,
    /// [`heuristic_bound`] of the assignment.
    pub heuristic: f64,
    pub complete: bool,
}

const UNASSIGNED: u8 = u8::MAX;
const TIE_TOL: f64 = 1e-9;
const MAX_VIEWS: usize = 128;
const MAX_DISPLAYS: usize = 254;

struct Node {
    key: f64,
    depth: usize,
    seq: usize,
    assign: Vec<u8>,
    /// Exact objective per display once evaluated.
    exact: Vec<Option<f64>>,
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
        self.key
            .total_cmp(&other.key)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct ViewAnchor {
    display: usize,
    target_mm: [f64; 2],
    weight: f64,
    kind: AnchorKind,
}

/// Everything about the step that does not change during the search.
struct Setup<'a> {
    displays: Vec<&'a Display>,
    vis: Vec<f64>,
    views: Vec<DisplayView>,
    /// Allowed displays per view.
    domains: Vec<Vec<usize>>,
    pairs: Vec<(usize, usize)>,
    anchors: Vec<Vec<ViewAnchor>>,
    size_anchors: Vec<Vec<(Option<usize>, f64, f64)>>,
    /// Sum of anchor weights of view `i` when placed on display `d`.
    anchor_cap: Vec<Vec<f64>>,
    /// Best single-display contribution of each view.
    view_cap: Vec<f64>,
    /// Decision order of views.
    order: Vec<usize>,
    /// Leading entries of `order` with a single candidate display.
    forced: usize,
    /// `min(w, h) / (2·s)` per view.
    min_half: Vec<f64>,
}

fn quantize(x: f64) -> f64 {
    x.round()
}

impl<'a> Setup<'a> {
    fn mask(&self, assign: &[u8], d: usize) -> u128 {
        assign
            .iter()
            .enumerate()
            .filter(|(_, &a)| a as usize == d)
            .fold(0u128, |m, (i, _)| m | (1u128 << i))
    }

    fn problem(&self, d: usize, mask: u128) -> DisplayProblem {
        let members: Vec<usize> = (0..self.views.len()).filter(|&i| mask & (1u128 << i) != 0).collect();
        let local = |i: usize| members.binary_search(&i).ok();
        let pairs = self
            .pairs
            .iter()
            .filter_map(|&(i, j)| Some((local(i)?, local(j)?)))
            .collect();
        let mut anchors = Vec::new();
        let mut size_anchors = Vec::new();
        for (k, &i) in members.iter().enumerate() {
            for a in self.anchors[i].iter().filter(|a| a.display == d) {
                anchors.push(PositionAnchor {
                    view: k,
                    target_mm: a.target_mm,
                    weight: a.weight,
                    kind: a.kind,
                });
            }
            for &(disp, size, weight) in &self.size_anchors[i] {
                if disp.is_none_or(|x| x == d) {
                    size_anchors.push(SizeAnchor {
                        view: k,
                        size_mm: size,
                        weight,
                    });
                }
            }
        }
        DisplayProblem {
            display: self.displays[d].clone(),
            vis: self.vis[d],
            views: members.iter().map(|&i| self.views[i].clone()).collect(),
            pairs,
            anchors,
            size_anchors,
        }
    }
}

/// Per-display bound part, memoized by view set.
struct Bounds<'s, 'a> {
    setup: &'s Setup<'a>,
    gamma: f64,
    alpha: f64,
    memo: HashMap<(usize, u128), f64>,
}

impl Bounds<'_, '_> {
    fn display_part(&mut self, d: usize, mask: u128) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        if let Some(&b) = self.memo.get(&(d, mask)) {
            return b;
        }
        let s = self.setup;
        let members: Vec<usize> = (0..s.views.len()).filter(|&i| mask & (1u128 << i) != 0).collect();
        let mut pairs = 0usize;
        let mut penalty = vec![0.0; s.views.len()];
        for &(i, j) in &s.pairs {
            if mask & (1u128 << i) != 0 && mask & (1u128 << j) != 0 {
                pairs += 1;
                penalty[i] += self.alpha * s.min_half[i];
                penalty[j] += self.alpha * s.min_half[j];
            }
        }
        let anchors: f64 = members.iter().map(|&i| s.anchor_cap[i][d]).sum();
        let views: Vec<DisplayView> = members.iter().map(|&i| s.views[i].clone()).collect();
        let penalty: Vec<f64> = members.iter().map(|&i| penalty[i]).collect();
        let b = self.alpha * pairs as f64
            + anchors
            + area_bound_with_penalty(s.displays[d], &views, s.vis[d], self.gamma, &penalty);
        self.memo.insert((d, mask), b);
        b
    }

    /// Search key for a node: exact values of evaluated displays, bounds
    /// for the rest, optimistic caps for unassigned views.
    fn key(&mut self, assign: &[u8], exact: &[Option<f64>]) -> f64 {
        let s = self.setup;
        let mut total = 0.0;
        for d in 0..s.displays.len() {
            total += match exact[d] {
                Some(v) => v,
                None => self.display_part(d, s.mask(assign, d)),
            };
        }
        for (i, &a) in assign.iter().enumerate() {
            if a == UNASSIGNED {
                total += s.view_cap[i];
            }
        }
        for &(i, j) in &s.pairs {
            let (a, b) = (assign[i], assign[j]);
            let open = match (a == UNASSIGNED, b == UNASSIGNED) {
                (false, false) => false,
                (true, false) => s.domains[i].contains(&(b as usize)),
                (false, true) => s.domains[j].contains(&(a as usize)),
                (true, true) => s.domains[i].iter().any(|d| s.domains[j].contains(d)),
            };
            if open {
                total += self.alpha;
            }
        }
        total
    }
}

fn build_setup<'a>(input: &StepInput<'a>, ctx: &crate::model::StepContext) -> Result<Setup<'a>, LayoutError> {
    let weights = input.weights;
    let mut displays: Vec<&Display> = input.ecology.connected().collect();
    displays.sort_by(|a, b| a.id.cmp(&b.id));
    if displays.is_empty() {
        return Err(LayoutError::NoConnectedDisplay);
    }
    if displays.len() > MAX_DISPLAYS || ctx.views.len() > MAX_VIEWS {
        return Err(LayoutError::TooLarge {
            views: ctx.views.len(),
            displays: displays.len(),
        });
    }
    let dindex: BTreeMap<&DisplayId, usize> = displays.iter().enumerate().map(|(k, d)| (&d.id, k)).collect();
    let vis: Vec<f64> = displays.iter().map(|d| input.ecology.visibility(d)).collect();
    let n = ctx.views.len();
    let vindex: BTreeMap<&ViewId, usize> = ctx.views.iter().enumerate().map(|(k, v)| (&v.id, k)).collect();

    let mut views: Vec<DisplayView> = ctx
        .views
        .iter()
        .map(|v| DisplayView {
            id: v.id.clone(),
            aspect: v.preferred_aspect,
            doi: v.doi,
            min_size_fraction: v.min_size_fraction,
            pin_center: None,
            pin_size: None,
        })
        .collect();
    let mut domains: Vec<Vec<usize>> = vec![(0..displays.len()).collect(); n];
    let mut anchors: Vec<Vec<ViewAnchor>> = (0..n).map(|_| Vec::new()).collect();
    let mut size_anchors: Vec<Vec<(Option<usize>, f64, f64)>> = vec![Vec::new(); n];

    let prev: &[Placement] = input.prev_layout.map_or(&[], |l| l.placements.as_slice());
    for (p, c) in &ctx.temporal_in {
        let (Some(pl), Some(&i)) = (prev.iter().find(|pl| &pl.view == p), vindex.get(c)) else {
            continue;
        };
        let Some(&d) = dindex.get(&pl.display) else {
            continue;
        };
        anchors[i].push(ViewAnchor {
            display: d,
            target_mm: [quantize(pl.cx_mm), quantize(pl.cy_mm)],
            weight: weights.beta,
            kind: AnchorKind::Temporal,
        });
    }

    let manual = MANUAL_ANCHOR_FACTOR * weights.beta;
    if let Some(overrides) = input.overrides {
        for (view, o) in overrides {
            let Some(&i) = vindex.get(view) else { continue };
            let target = o.display.as_ref().and_then(|d| dindex.get(d)).copied();
            if o.hard {
                if let Some(d) = target {
                    domains[i] = vec![d];
                }
                views[i].pin_center = o.center_mm.map(|c| [quantize(c[0]), quantize(c[1])]);
                views[i].pin_size = o.size_mm.map(quantize);
            } else {
                if let Some(c) = o.center_mm {
                    let on: Vec<usize> = match target {
                        Some(d) => vec![d],
                        None => (0..displays.len()).collect(),
                    };
                    for d in on {
                        anchors[i].push(ViewAnchor {
                            display: d,
                            target_mm: [quantize(c[0]), quantize(c[1])],
                            weight: manual,
                            kind: AnchorKind::Manual,
                        });
                    }
                }
                if let Some(s) = o.size_mm {
                    size_anchors[i].push((target, quantize(s), manual));
                }
            }
        }
    }

    let pairs: Vec<(usize, usize)> = ctx
        .spatial
        .iter()
        .filter_map(|(u, v)| {
            let (a, b) = (*vindex.get(u)?, *vindex.get(v)?);
            Some((a.min(b), a.max(b)))
        })
        .collect();

    let anchor_cap: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..displays.len())
                .map(|d| {
                    anchors[i].iter().filter(|a| a.display == d).map(|a| a.weight).sum::<f64>()
                        + size_anchors[i]
                            .iter()
                            .filter(|a| a.0.is_none_or(|x| x == d))
                            .map(|a| a.2)
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let view_cap = (0..n)
        .map(|i| {
            domains[i]
                .iter()
                .map(|&d| {
                    anchor_cap[i][d]
                        + area_bound(displays[d], std::slice::from_ref(&views[i]), vis[d], weights.gamma)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    let mut degree = vec![0usize; n];
    for &(i, j) in &pairs {
        degree[i] += 1;
        degree[j] += 1;
    }
    for (i, a) in anchors.iter().enumerate() {
        degree[i] += a.len();
    }
    // views with a single candidate display are decided at the root
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (domains[a].len() != 1)
            .cmp(&(domains[b].len() != 1))
            .then(degree[b].cmp(&degree[a]))
            .then(a.cmp(&b))
    });
    let forced = domains.iter().filter(|d| d.len() == 1).count();

    let min_half = views
        .iter()
        .map(|v| v.aspect.min(1.0) / (2.0 * (1.0 + v.aspect)))
        .collect();
    Ok(Setup {
        min_half,
        displays,
        vis,
        views,
        domains,
        pairs,
        anchors,
        size_anchors,
        anchor_cap,
        view_cap,
        order,
        forced,
    })
}

struct Incumbent {
    objective: f64,
    assign: Vec<u8>,
}

pub(crate) fn solve(engine: &LayoutEngine, input: &StepInput<'_>) -> Result<LayoutResult, LayoutError> {
    let started = Instant::now();
    input.weights.validate()?;
    let params = engine.params();
    let ctx = step_context(input.model, input.step)?;
    let setup = build_setup(input, &ctx)?;
    let n = setup.views.len();
    let nd = setup.displays.len();
    let prev: &[Placement] = input.prev_layout.map_or(&[], |l| l.placements.as_slice());

    let mut stats = LayoutStats {
        min_expanded_bound: f64::INFINITY,
        ..LayoutStats::default()
    };
    let mut trace = Vec::new();
    let mut bounds = Bounds {
        setup: &setup,
        gamma: input.weights.gamma,
        alpha: input.weights.alpha,
        memo: HashMap::new(),
    };
    let mut solved: HashMap<(usize, u128), CachedDisplay> = HashMap::new();
    // `None` means the display provably stays below `cutoff`.
    let mut evaluate_below = |d: usize, mask: u128, cutoff: f64, stats: &mut LayoutStats| -> Option<CachedDisplay> {
        if let Some(hit) = solved.get(&(d, mask)) {
            return Some(hit.clone());
        }
        let (res, hit) = engine.solve_display_cached(&setup.problem(d, mask), input.weights, cutoff);
        stats.display_solves += 1;
        if hit {
            stats.cache_hits += 1;
        }
        match res {
            Lookup::Exact(res) => {
                if let (false, Ok(l)) = (hit, res.as_ref()) {
                    stats.lps_solved += l.lps;
                }
                solved.insert((d, mask), res.clone());
                Some(res)
            }
            Lookup::Below { lps, .. } => {
                stats.lps_solved += lps;
                None
            }
        }
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut root_assign = vec![UNASSIGNED; n];
    for &i in &setup.order[..setup.forced] {
        root_assign[i] = setup.domains[i][0] as u8;
    }
    let root_exact = vec![None; nd];
    heap.push(Node {
        key: bounds.key(&root_assign, &root_exact),
        depth: setup.forced,
        seq,
        assign: root_assign,
        exact: root_exact,
    });

    let mut best: Option<Incumbent> = None;
    let mut last_popped: Option<Node> = None;
    while let Some(node) = heap.pop() {
        if let Some(inc) = &best {
            if node.key < inc.objective - TIE_TOL && !params.disable_pruning {
                break;
            }
        }
        if stats.nodes_expanded >= params.node_budget {
            stats.budget_exhausted = true;
            last_popped = Some(node);
            break;
        }
        // a complete node comes back once per lazily evaluated display;
        // only its first visit counts as an expansion
        let first_visit = node.exact.iter().all(Option::is_none);
        if first_visit {
            stats.nodes_expanded += 1;
        }
        stats.min_expanded_bound = stats.min_expanded_bound.min(node.key);
        if params.trace && first_visit {
            let assignment = to_assignment(&setup, &node.assign);
            trace.push(ExpandedNode {
                heuristic: heuristic_bound(&assignment, &ctx, input.ecology, prev, input.weights),
                assignment,
                key: node.key,
                complete: node.depth == n,
            });
        }

        if node.depth < n {
            let i = setup.order[node.depth];
            for &d in &setup.domains[i] {
                let mut assign = node.assign.clone();
                assign[i] = d as u8;
                let exact = vec![None; nd];
                let key = bounds.key(&assign, &exact);
                if let Some(inc) = &best {
                    if key < inc.objective - TIE_TOL && !params.disable_pruning {
                        continue;
                    }
                }
                seq += 1;
                heap.push(Node {
                    key,
                    depth: node.depth + 1,
                    seq,
                    assign,
                    exact,
                });
            }
            continue;
        }

        // Complete: evaluate the next display lazily, or accept.
        match (0..nd).find(|&d| node.exact[d].is_none()) {
            Some(d) => {
                let mask = setup.mask(&node.assign, d);
                // Below this the node loses to the incumbent.
                let cutoff = match &best {
                    Some(inc) if !params.disable_pruning => {
                        inc.objective - TIE_TOL - (node.key - bounds.display_part(d, mask))
                    }
                    _ => f64::NEG_INFINITY,
                };
                let value = if mask == 0 {
                    0.0
                } else {
                    let Some(res) = evaluate_below(d, mask, cutoff, &mut stats) else {
                        continue;
                    };
                    match res.as_ref() {
                        Ok(l) => l.objective(),
                        Err(LayoutError::InfeasibleDisplay(_)) => continue,
                        Err(e) => return Err(e.clone()),
                    }
                };
                let mut exact = node.exact;
                exact[d] = Some(value);
                let key = bounds.key(&node.assign, &exact);
                seq += 1;
                heap.push(Node {
                    key,
                    depth: node.depth,
                    seq,
                    assign: node.assign,
                    exact,
                });
            }
            None => {
                let better = match &best {
                    None => true,
                    Some(inc) => {
                        node.key > inc.objective + TIE_TOL
                            || (node.key >= inc.objective - TIE_TOL && node.assign < inc.assign)
                    }
                };
                if better {
                    best = Some(Incumbent {
                        objective: node.key,
                        assign: node.assign,
                    });
                }
            }
        }
    }

    let mut evaluate = |d: usize, mask: u128, stats: &mut LayoutStats| -> CachedDisplay {
        evaluate_below(d, mask, f64::NEG_INFINITY, stats).expect("no cutoff")
    };
    if best.is_none() && stats.budget_exhausted {
        if let Some(node) = last_popped {
            best = greedy_completion(&setup, node.assign, &mut |d, m, s| evaluate(d, m, s), &mut stats)?;
        }
    }
    let Some(best) = best else {
        return Err(LayoutError::InfeasibleStep(input.step));
    };

    let mut placements = Vec::with_capacity(n);
    let mut objective = 0.0;
    for d in 0..nd {
        let mask = setup.mask(&best.assign, d);
        if mask == 0 {
            continue;
        }
        let res = evaluate(d, mask, &mut stats);
        let layout: &DisplayLayout = res.as_ref().as_ref().map_err(Clone::clone)?;
        objective += layout.objective();
        placements.extend(layout.placements.iter().cloned());
        stats.per_display.push(DisplaySummary {
            display: setup.displays[d].id.clone(),
            views: layout.placements.iter().map(|p| p.view.clone()).collect(),
            exact_value: layout.value,
            lp_value: layout.lp_value,
            anchor_bonus: layout.bonus,
            template: layout.template,
            min_size_scale: layout.min_size_scale,
        });
    }
    placements.sort_by(|a, b| a.view.cmp(&b.view));
    let report = total_quality(&placements, prev, &ctx, input.ecology, input.weights)?;
    stats.objective = objective;
    if !stats.min_expanded_bound.is_finite() {
        stats.min_expanded_bound = objective;
    }
    stats.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    Ok(LayoutResult {
        step: input.step,
        placements,
        report,
        stats,
        trace,
    })
}

fn to_assignment(setup: &Setup<'_>, assign: &[u8]) -> Assignment {
    assign
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != UNASSIGNED)
        .map(|(i, &a)| (setup.views[i].id.clone(), setup.displays[a as usize].id.clone()))
        .collect()
}

/// Completes a partial assignment view by view, choosing the display with
/// the highest cap, and evaluates it. Used only when the node budget runs
/// out before any complete assignment was accepted.
fn greedy_completion(
    setup: &Setup<'_>,
    mut assign: Vec<u8>,
    evaluate: &mut dyn FnMut(usize, u128, &mut LayoutStats) -> CachedDisplay,
    stats: &mut LayoutStats,
) -> Result<Option<Incumbent>, LayoutError> {
    let mut load = vec![0usize; setup.displays.len()];
    for &a in &assign {
        if a != UNASSIGNED {
            load[a as usize] += 1;
        }
    }
    for &i in &setup.order {
        if assign[i] != UNASSIGNED {
            continue;
        }
        let d = *setup.domains[i]
            .iter()
            .max_by(|&&a, &&b| {
                let score = |d: usize| setup.anchor_cap[i][d] + setup.vis[d] / (1 + load[d]) as f64;
                score(a).total_cmp(&score(b)).then(b.cmp(&a))
            })
            .expect("non-empty domain");
        assign[i] = d as u8;
        load[d] += 1;
    }
    let mut objective = 0.0;
    for d in 0..setup.displays.len() {
        let mask = setup.mask(&assign, d);
        if mask == 0 {
            continue;
        }
        match evaluate(d, mask, stats).as_ref() {
            Ok(l) => objective += l.objective(),
            Err(LayoutError::InfeasibleDisplay(_)) => return Ok(None),
            Err(e) => return Err(e.clone()),
        }
    }
    Ok(Some(Incumbent { objective, assign }))
}
