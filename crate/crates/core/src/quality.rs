//! Layout quality `Q = α·Q_S + β·Q_T + γ·Q_V`.
//!
//! Distances are L1 (`|Δx| + |Δy|`) and normalized by the hosting display's
//! extent. Pairs whose views sit on different displays contribute zero.

use crate::environment::{display_extent, DisplayEcology};
use crate::ids::{DisplayId, ViewId};
use crate::model::{StepContext, View, DEFAULT_DOI};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// One view on one display. Coordinates are display-local millimetres with
/// the origin at the top-left corner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub view: ViewId,
    pub display: DisplayId,
    pub cx_mm: f64,
    pub cy_mm: f64,
    pub w_mm: f64,
    pub h_mm: f64,
}

impl Placement {
    /// Builds a placement from the scalar size `s = w + h` and the aspect
    /// ratio `w / h`.
    pub fn from_size(
        view: ViewId,
        display: DisplayId,
        center: [f64; 2],
        size_mm: f64,
        aspect: f64,
    ) -> Self {
        Self {
            view,
            display,
            cx_mm: center[0],
            cy_mm: center[1],
            w_mm: size_mm * aspect / (1.0 + aspect),
            h_mm: size_mm / (1.0 + aspect),
        }
    }

    /// `s_v`, the L1 size.
    pub fn size_mm(&self) -> f64 {
        self.w_mm + self.h_mm
    }

    pub fn center(&self) -> [f64; 2] {
        [self.cx_mm, self.cy_mm]
    }

    pub fn left(&self) -> f64 {
        self.cx_mm - self.w_mm / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx_mm + self.w_mm / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy_mm - self.h_mm / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy_mm + self.h_mm / 2.0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.left() && x <= self.right() && y >= self.top() && y <= self.bottom()
    }

    /// Interiors intersect by more than `slack` along both axes.
    pub fn overlaps(&self, other: &Placement, slack: f64) -> bool {
        self.display == other.display
            && self.left() < other.right() - slack
            && other.left() < self.right() - slack
            && self.top() < other.bottom() - slack
            && other.top() < self.bottom() - slack
    }
}

fn l1(a: &Placement, b: &Placement) -> f64 {
    (a.cx_mm - b.cx_mm).abs() + (a.cy_mm - b.cy_mm).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub tie_break_epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-6
}

impl Default for QualityWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            tie_break_epsilon: default_epsilon(),
        }
    }
}

impl QualityWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), QualityError> {
        let ok = [self.alpha, self.beta, self.gamma]
            .iter()
            .all(|w| *w >= 0.0 && w.is_finite())
            && self.alpha + self.beta + self.gamma > 0.0
            && self.tie_break_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(QualityError::InvalidWeights)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum QualityError {
    #[error("view {0} is part of a constraint but not placed")]
    UnplacedView(ViewId),
    #[error("placement refers to unknown display {0}")]
    UnknownDisplay(DisplayId),
    #[error("weights must be non-negative with a positive sum")]
    InvalidWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub u: ViewId,
    pub v: ViewId,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewTerm {
    pub view: ViewId,
    pub vis: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermBreakdown {
    pub spatial: Vec<PairTerm>,
    pub temporal: Vec<PairTerm>,
    pub visibility: Vec<ViewTerm>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub q_spatial: f64,
    pub q_temporal: f64,
    pub q_visibility: f64,
    pub q_total: f64,
    pub weights: QualityWeights,
    pub per_term: TermBreakdown,
}

fn index(placements: &[Placement]) -> BTreeMap<&ViewId, &Placement> {
    placements.iter().map(|p| (&p.view, p)).collect()
}

fn extent_of(ecology: &DisplayEcology, id: &DisplayId) -> Result<f64, QualityError> {
    ecology
        .display(id)
        .map(display_extent)
        .ok_or_else(|| QualityError::UnknownDisplay(id.clone()))
}

fn spatial_terms(
    placements: &[Placement],
    pairs: &[(ViewId, ViewId)],
    ecology: &DisplayEcology,
) -> Result<Vec<PairTerm>, QualityError> {
    let by_view = index(placements);
    pairs
        .iter()
        .map(|(u, v)| {
            let pu = by_view
                .get(u)
                .ok_or_else(|| QualityError::UnplacedView(u.clone()))?;
            let pv = by_view
                .get(v)
                .ok_or_else(|| QualityError::UnplacedView(v.clone()))?;
            let value = if pu.display == pv.display {
                1.0 - l1(pu, pv) / extent_of(ecology, &pu.display)?
            } else {
                0.0
            };
            Ok(PairTerm {
                u: u.clone(),
                v: v.clone(),
                value,
            })
        })
        .collect()
}

fn temporal_terms(
    placements: &[Placement],
    prev: &[Placement],
    pairs: &[(ViewId, ViewId)],
    ecology: &DisplayEcology,
) -> Result<Vec<PairTerm>, QualityError> {
    let now = index(placements);
    let before = index(prev);
    pairs
        .iter()
        .map(|(u, v)| {
            let value = match (before.get(u), now.get(v)) {
                (Some(pu), Some(pv)) if pu.display == pv.display => {
                    1.0 - l1(pu, pv) / extent_of(ecology, &pv.display)?
                }
                _ => 0.0,
            };
            Ok(PairTerm {
                u: u.clone(),
                v: v.clone(),
                value,
            })
        })
        .collect()
}

fn visibility_terms(
    placements: &[Placement],
    views: &[View],
    ecology: &DisplayEcology,
) -> Result<Vec<ViewTerm>, QualityError> {
    placements
        .iter()
        .map(|p| {
            let d = ecology
                .display(&p.display)
                .ok_or_else(|| QualityError::UnknownDisplay(p.display.clone()))?;
            let doi = views
                .iter()
                .find(|v| v.id == p.view)
                .map_or(DEFAULT_DOI, |v| v.doi);
            let vis = ecology.visibility(d);
            let x = p.size_mm() / display_extent(d);
            Ok(ViewTerm {
                view: p.view.clone(),
                vis,
                value: vis * (-doi * x * x + 2.0 * doi * x),
            })
        })
        .collect()
}

/// `Q_S`: sum over same-display pairs of `1 - |p_u - p_v|₁ / ext(D)`.
pub fn spatial_quality(
    placements: &[Placement],
    pairs: &[(ViewId, ViewId)],
    ecology: &DisplayEcology,
) -> Result<f64, QualityError> {
    Ok(spatial_terms(placements, pairs, ecology)?
        .iter()
        .map(|t| t.value)
        .sum())
}

/// `Q_T`: like `Q_S`, between a previous placement and its successor.
/// Predecessors that are missing or were shown elsewhere contribute zero.
pub fn temporal_quality(
    placements: &[Placement],
    prev_placements: &[Placement],
    pairs: &[(ViewId, ViewId)],
    ecology: &DisplayEcology,
) -> Result<f64, QualityError> {
    Ok(temporal_terms(placements, prev_placements, pairs, ecology)?
        .iter()
        .map(|t| t.value)
        .sum())
}

/// `Q_V`: sum over placed views of `vis · (-doi·x² + 2·doi·x)`, `x = s/ext(D)`.
pub fn visibility_quality(
    placements: &[Placement],
    views: &[View],
    ecology: &DisplayEcology,
) -> Result<f64, QualityError> {
    Ok(visibility_terms(placements, views, ecology)?
        .iter()
        .map(|t| t.value)
        .sum())
}

pub fn total_quality(
    placements: &[Placement],
    prev_placements: &[Placement],
    ctx: &StepContext,
    ecology: &DisplayEcology,
    weights: &QualityWeights,
) -> Result<QualityReport, QualityError> {
    let spatial = spatial_terms(placements, &ctx.spatial, ecology)?;
    let temporal = temporal_terms(placements, prev_placements, &ctx.temporal_in, ecology)?;
    let visibility = visibility_terms(placements, &ctx.views, ecology)?;
    let q_spatial: f64 = spatial.iter().map(|t| t.value).sum();
    let q_temporal: f64 = temporal.iter().map(|t| t.value).sum();
    let q_visibility: f64 = visibility.iter().map(|t| t.value).sum();
    Ok(QualityReport {
        q_spatial,
        q_temporal,
        q_visibility,
        q_total: weights.alpha * q_spatial + weights.beta * q_temporal + weights.gamma * q_visibility,
        weights: *weights,
        per_term: TermBreakdown {
            spatial,
            temporal,
            visibility,
        },
    })
}
