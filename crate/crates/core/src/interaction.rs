//! Mapping raw pointing input to a display, a local position and the view
//! under it.

use crate::environment::{dot, sub, Display, DisplayEcology, Vec3};
use crate::ids::{DisplayId, UserId, ViewId};
use crate::quality::Placement;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Point,
    Drag,
    Trigger,
}

/// A pointing ray in room coordinates (metres).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin_m: Vec3,
    pub dir: Vec3,
}

/// A position on a named display in `[0, 1]²`, origin top-left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub display: DisplayId,
    pub u: f64,
    pub v: f64,
}

/// Grabber output. Exactly one of `ray` and `screen` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInteraction {
    pub device: String,
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ray: Option<Ray>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenPoint>,
    pub actor: UserId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappedInteraction {
    pub display: DisplayId,
    /// Position in display millimetres, origin top-left, y down.
    pub local_mm: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<ViewId>,
    /// Ray parameter of the hit in metres; `None` for screen-space input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum InteractionError {
    #[error("interaction must carry exactly one of ray and screen coordinate")]
    Malformed,
}

/// Intersects `ray` with the display rectangle. Returns the ray parameter
/// and local millimetre coordinates. Only the front face counts.
pub fn ray_hit(display: &Display, ray: &Ray) -> Option<(f64, [f64; 2])> {
    let denom = dot(ray.dir, display.normal);
    if denom >= -1e-12 {
        return None;
    }
    let t = dot(sub(display.center_m, ray.origin_m), display.normal) / denom;
    if t < 0.0 {
        return None;
    }
    let p = [
        ray.origin_m[0] + t * ray.dir[0],
        ray.origin_m[1] + t * ray.dir[1],
        ray.origin_m[2] + t * ray.dir[2],
    ];
    let rel = sub(p, display.center_m);
    let x = dot(rel, display.right()) * 1000.0 + display.width_mm / 2.0;
    let y = display.height_mm / 2.0 - dot(rel, display.up) * 1000.0;
    let inside = (0.0..=display.width_mm).contains(&x) && (0.0..=display.height_mm).contains(&y);
    inside.then_some((t, [x, y]))
}

/// Resolves an interaction against the connected displays and the current
/// placements. The nearest ray hit wins; `None` when nothing is hit.
pub fn map_interaction(
    ecology: &DisplayEcology,
    placements: &[Placement],
    raw: &RawInteraction,
) -> Result<Option<MappedInteraction>, InteractionError> {
    let hit = match (&raw.ray, &raw.screen) {
        (Some(ray), None) => ecology
            .connected()
            .filter_map(|d| ray_hit(d, ray).map(|(t, p)| (t, d, p)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(t, d, p)| (d, p, Some(t))),
        (None, Some(sp)) => ecology
            .display(&sp.display)
            .filter(|d| d.connected && (0.0..=1.0).contains(&sp.u) && (0.0..=1.0).contains(&sp.v))
            .map(|d| (d, [sp.u * d.width_mm, sp.v * d.height_mm], None)),
        _ => return Err(InteractionError::Malformed),
    };
    Ok(hit.map(|(d, p, t)| MappedInteraction {
        display: d.id.clone(),
        local_mm: p,
        view: placements
            .iter()
            .find(|pl| pl.display == d.id && pl.contains(p[0], p[1]))
            .map(|pl| pl.view.clone()),
        distance_m: t,
    }))
}
