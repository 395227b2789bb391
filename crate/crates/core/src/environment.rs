//! The display ecology: physical displays, the users in front of them, and
//! the two quantities the quality function needs from it, `ext(D)` and
//! `vis(v)`.

use crate::ids::{DisplayId, UserId};
use crate::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Reference distance for the optional distance attenuation of visibility.
pub const ATTENUATION_REF_M: f64 = 2.0;

const UNIT_TOL: f64 = 1e-6;

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn default_connected() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Display {
    pub id: DisplayId,
    pub width_mm: f64,
    pub height_mm: f64,
    /// Center of the display surface in room coordinates.
    pub center_m: Vec3,
    /// Unit normal pointing towards the viewers.
    pub normal: Vec3,
    /// Unit vector along the display's vertical edge, pointing up.
    pub up: Vec3,
    #[serde(default = "default_connected")]
    pub connected: bool,
}

impl Display {
    /// Wall-mounted display facing `-y` (into a room that extends along
    /// `-y`), with `up = +z`.
    pub fn wall(id: impl Into<DisplayId>, width_mm: f64, height_mm: f64, center_m: Vec3) -> Self {
        Self {
            id: id.into(),
            width_mm,
            height_mm,
            center_m,
            normal: [0.0, -1.0, 0.0],
            up: [0.0, 0.0, 1.0],
            connected: true,
        }
    }

    /// Horizontal unit vector of the display surface, pointing to the
    /// viewer's right.
    pub fn right(&self) -> Vec3 {
        cross(self.up, self.normal)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRole {
    Moderator,
    #[default]
    Participant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserPose {
    pub id: UserId,
    pub eye_m: Vec3,
    pub gaze: Vec3,
    #[serde(default)]
    pub role: UserRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayEcology {
    #[serde(default)]
    pub displays: Vec<Display>,
    #[serde(default)]
    pub users: Vec<UserPose>,
    /// Scale visibility by `min(1, 2 m / distance)`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub distance_attenuation: bool,
    #[serde(default = "schema_version")]
    pub schema_version: u32,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl Default for DisplayEcology {
    fn default() -> Self {
        Self {
            displays: Vec::new(),
            users: Vec::new(),
            distance_attenuation: false,
            schema_version: SCHEMA_VERSION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EcologyError {
    #[error("unsupported schema_version {0}")]
    UnsupportedSchema(u32),
    #[error("duplicate display id {0}")]
    DuplicateDisplay(DisplayId),
    #[error("display {0}: width and height must be positive")]
    DegenerateDisplay(DisplayId),
    #[error("display {0}: normal and up must be orthonormal")]
    BadOrientation(DisplayId),
    #[error("user {0}: gaze must have unit length")]
    BadGaze(UserId),
}

impl DisplayEcology {
    pub fn display(&self, id: &DisplayId) -> Option<&Display> {
        self.displays.iter().find(|d| &d.id == id)
    }

    pub fn connected(&self) -> impl Iterator<Item = &Display> {
        self.displays.iter().filter(|d| d.connected)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ecology serializes")
    }

    /// Checks every structural invariant. An ecology without connected
    /// displays is valid here; the layout engine refuses it separately.
    pub fn validate(&self) -> Result<(), EcologyError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(EcologyError::UnsupportedSchema(self.schema_version));
        }
        for (i, d) in self.displays.iter().enumerate() {
            if self.displays[..i].iter().any(|o| o.id == d.id) {
                return Err(EcologyError::DuplicateDisplay(d.id.clone()));
            }
            if !(d.width_mm > 0.0 && d.height_mm > 0.0)
                || !d.width_mm.is_finite()
                || !d.height_mm.is_finite()
            {
                return Err(EcologyError::DegenerateDisplay(d.id.clone()));
            }
            let orthonormal = (norm(d.normal) - 1.0).abs() < UNIT_TOL
                && (norm(d.up) - 1.0).abs() < UNIT_TOL
                && dot(d.normal, d.up).abs() < UNIT_TOL;
            if !orthonormal {
                return Err(EcologyError::BadOrientation(d.id.clone()));
            }
        }
        for u in &self.users {
            if (norm(u.gaze) - 1.0).abs() >= UNIT_TOL {
                return Err(EcologyError::BadGaze(u.id.clone()));
            }
        }
        Ok(())
    }

    /// `vis` of the display hosting a view.
    pub fn visibility(&self, display: &Display) -> f64 {
        display_visibility_with(display, &self.users, self.distance_attenuation)
    }
}

/// `ext(D)`: the L1 diameter of the display, `width + height`.
pub fn display_extent(d: &Display) -> f64 {
    d.width_mm + d.height_mm
}

/// Mean over users of `max(0, n·dir(D→eye)) · max(0, gaze·dir(eye→D))`.
/// With no users every display is fully visible.
pub fn display_visibility(d: &Display, users: &[UserPose]) -> f64 {
    display_visibility_with(d, users, false)
}

pub fn display_visibility_with(d: &Display, users: &[UserPose], attenuate: bool) -> f64 {
    if users.is_empty() {
        return 1.0;
    }
    let total: f64 = users
        .iter()
        .map(|u| {
            let to_eye = sub(u.eye_m, d.center_m);
            let dist = norm(to_eye);
            if dist <= f64::EPSILON {
                return 0.0;
            }
            let dir = [to_eye[0] / dist, to_eye[1] / dist, to_eye[2] / dist];
            let facing = dot(d.normal, dir).max(0.0);
            let looking = (-dot(u.gaze, dir)).max(0.0);
            let mut f = facing * looking;
            if attenuate {
                f *= (ATTENUATION_REF_M / dist).min(1.0);
            }
            f
        })
        .sum();
    (total / users.len() as f64).clamp(0.0, 1.0)
}

/// `vis(v)` is the visibility of the display hosting `v`.
pub fn view_visibility(view_display: &Display, users: &[UserPose]) -> f64 {
    display_visibility(view_display, users)
}
