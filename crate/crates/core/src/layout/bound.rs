use super::display::DisplayView;
use super::search::Assignment;
use crate::environment::{display_extent, Display, DisplayEcology};
use crate::ids::DisplayId;
use crate::model::StepContext;
use crate::quality::{Placement, QualityWeights};
use std::collections::BTreeMap;

/// Largest `s_v` (mm) a view of the given aspect reaches on an empty display.
pub fn max_single_size(display: &Display, aspect: f64) -> f64 {
    (display.width_mm * (1.0 + aspect) / aspect).min(display.height_mm * (1.0 + aspect))
}

/// Optimistic bound on `Q` for a (partial) assignment.
///
/// Counts every spatial pair that is co-assigned or could still be, every
/// temporal pair whose successor sits on (or may still move to) the
/// predecessor's display, and `doi·vis` per view, using the best connected
/// display for unassigned views.
pub fn heuristic_bound(
    partial: &Assignment,
    ctx: &StepContext,
    ecology: &DisplayEcology,
    prev_placements: &[Placement],
    weights: &QualityWeights,
) -> f64 {
    let connected: BTreeMap<&DisplayId, &Display> = ecology.connected().map(|d| (&d.id, d)).collect();
    if connected.is_empty() {
        return 0.0;
    }
    let target = |v| partial.get(v).filter(|d| connected.contains_key(d));

    let spatial = ctx
        .spatial
        .iter()
        .filter(|(u, v)| match (target(u), target(v)) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        })
        .count();

    let temporal = ctx
        .temporal_in
        .iter()
        .filter(|(p, c)| {
            let Some(prev) = prev_placements.iter().find(|pl| &pl.view == p) else {
                return false;
            };
            if !connected.contains_key(&prev.display) {
                return false;
            }
            target(c).is_none_or(|d| *d == prev.display)
        })
        .count();

    let best_vis = connected
        .values()
        .map(|d| ecology.visibility(d))
        .fold(0.0, f64::max);
    let visibility: f64 = ctx
        .views
        .iter()
        .map(|v| {
            let vis = target(&v.id).map_or(best_vis, |d| ecology.visibility(connected[d]));
            v.doi * vis
        })
        .sum();

    weights.alpha * spatial as f64 + weights.beta * temporal as f64 + weights.gamma * visibility
}

/// Upper bound on the `Q_V` contribution of `views` sharing `display`.
///
/// Disjoint boxes cannot cover more than the display area, so
/// `Σ r_v·x_v² ≤ W·H / ext²` with `r_v = a/(1+a)²`. The bound is the
/// Lagrangian dual of maximizing `Σ c_v·(2x_v − x_v²)` under that budget and
/// `x_v ≤ max_single_size / ext`; minimum sizes are dropped.
pub fn area_bound(display: &Display, views: &[DisplayView], vis: f64, gamma: f64) -> f64 {
    area_bound_with_penalty(display, views, vis, gamma, &vec![0.0; views.len()])
}

/// [`area_bound`] with an extra linear cost `penalty_v · x_v` per view.
///
/// Spatial pair terms are bounded by `α·(1 − m_u·x_u − m_v·x_v)` with
/// `m = min(w, h) / (2·s)`, since disjoint boxes keep at least that L1
/// distance; the size-dependent part enters here as a penalty.
pub(crate) fn area_bound_with_penalty(
    display: &Display,
    views: &[DisplayView],
    vis: f64,
    gamma: f64,
    penalty: &[f64],
) -> f64 {
    let e = display_extent(display);
    let budget = display.width_mm * display.height_mm / (e * e);
    let terms: Vec<(f64, f64, f64, f64, f64)> = views
        .iter()
        .zip(penalty)
        .map(|(v, &p)| {
            let c = gamma * vis * v.doi;
            let r = v.aspect / (1.0 + v.aspect).powi(2);
            let (lo, hi) = match v.pin_size {
                Some(s) => (s / e, s / e),
                None => (0.0, max_single_size(display, v.aspect) / e),
            };
            (c, r, lo, hi, p)
        })
        .collect();
    dual_area_bound(&terms, budget)
}

type AreaTerm = (f64, f64, f64, f64, f64);

/// `min_λ≥0 λ·A + Σ max_{x∈[lo,hi]} c(2x − x²) − p·x − λ·r·x²` for terms
/// `(c, r, lo, hi, p)`.
fn dual_area_bound(terms: &[AreaTerm], budget: f64) -> f64 {
    let argmax = |lambda: f64, &(c, r, lo, hi, p): &AreaTerm| {
        let denom = c + lambda * r;
        let x = if denom > 0.0 {
            (c - 0.5 * p) / denom
        } else if p > 0.0 {
            lo
        } else {
            hi
        };
        x.clamp(lo, hi)
    };
    let dual = |lambda: f64| {
        lambda * budget
            + terms
                .iter()
                .map(|t| {
                    let x = argmax(lambda, t);
                    t.0 * (2.0 * x - x * x) - t.4 * x - lambda * t.1 * x * x
                })
                .sum::<f64>()
    };
    let used = |lambda: f64| terms.iter().map(|t| t.1 * argmax(lambda, t).powi(2)).sum::<f64>();

    let mut best = dual(0.0);
    if used(0.0) <= budget {
        return best;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        best = best.min(dual(hi));
        if used(hi) <= budget {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        best = best.min(dual(mid));
        if used(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.min(dual(hi))
}
