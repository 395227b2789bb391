use super::display::{AnchorKind, DisplayProblem};
use super::EngineParams;
use crate::ids::{DisplayId, ViewId};
use crate::quality::QualityWeights;

/// Memo key of a per-display subproblem. Floats are compared bitwise;
/// anchor targets are already quantized to whole millimetres when the
/// problem is built, so jitter below that does not defeat the cache.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DisplayKey {
    display: DisplayId,
    geometry: [u64; 2],
    vis: u64,
    views: Vec<(ViewId, [u64; 3], Option<[u64; 2]>, Option<u64>)>,
    pairs: Vec<(usize, usize)>,
    anchors: Vec<(usize, [u64; 3], AnchorKind)>,
    size_anchors: Vec<(usize, [u64; 2])>,
    weights: [u64; 4],
    params: [usize; 4],
}

impl DisplayKey {
    pub fn new(problem: &DisplayProblem, weights: &QualityWeights, params: &EngineParams) -> Self {
        let d = &problem.display;
        Self {
            display: d.id.clone(),
            geometry: [d.width_mm.to_bits(), d.height_mm.to_bits()],
            vis: problem.vis.to_bits(),
            views: problem
                .views
                .iter()
                .map(|v| {
                    (
                        v.id.clone(),
                        [v.aspect.to_bits(), v.doi.to_bits(), v.min_size_fraction.to_bits()],
                        v.pin_center.map(|c| [c[0].to_bits(), c[1].to_bits()]),
                        v.pin_size.map(f64::to_bits),
                    )
                })
                .collect(),
            pairs: problem.pairs.clone(),
            anchors: problem
                .anchors
                .iter()
                .map(|a| {
                    (
                        a.view,
                        [a.target_mm[0].to_bits(), a.target_mm[1].to_bits(), a.weight.to_bits()],
                        a.kind,
                    )
                })
                .collect(),
            size_anchors: problem
                .size_anchors
                .iter()
                .map(|a| (a.view, [a.size_mm.to_bits(), a.weight.to_bits()]))
                .collect(),
            weights: [
                weights.alpha.to_bits(),
                weights.beta.to_bits(),
                weights.gamma.to_bits(),
                weights.tie_break_epsilon.to_bits(),
            ],
            params: [
                params.max_exact_views_per_display,
                params.size_cut_segments,
                params.min_size_relax_rounds,
                params.display_node_budget,
            ],
        }
    }
}
