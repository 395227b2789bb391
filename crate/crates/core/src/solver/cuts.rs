use super::{LinearProgram, Relation};

/// Tangent cuts `t >= 2·b·x - b²` at breakpoints `b` of `[0, 1]`.
///
/// With `t` carrying a negative objective coefficient the LP settles `t` on
/// the upper envelope of the tangents, which touches `x²` at every
/// breakpoint and stays below it in between. The gap peaks at segment
/// midpoints with value `(h / 2)²` for segment length `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcaveCutSet {
    pub x: usize,
    pub t: usize,
    pub breakpoints: Vec<f64>,
}

impl ConcaveCutSet {
    /// `segments + 1` equally spaced breakpoints including 0 and 1.
    pub fn uniform(x: usize, t: usize, segments: usize) -> Self {
        let k = segments.max(1);
        Self {
            x,
            t,
            breakpoints: (0..=k).map(|j| j as f64 / k as f64).collect(),
        }
    }

    pub fn apply(&self, lp: &mut LinearProgram) {
        for &b in &self.breakpoints {
            lp.add_row(&[(self.t, 1.0), (self.x, -2.0 * b)], Relation::Ge, -b * b);
        }
    }
}

/// Appends the `k + 1` tangent cuts for `t ≈ x²` to a copy of `lp`.
pub fn add_concave_size_cuts(lp: &LinearProgram, x: usize, t: usize, k: usize) -> LinearProgram {
    let mut out = lp.clone();
    ConcaveCutSet::uniform(x, t, k).apply(&mut out);
    out
}

/// The value the LP assigns to `t` at `x`: the maximum over the tangents.
pub fn tangent_envelope(x: f64, k: usize) -> f64 {
    let k = k.max(1);
    (0..=k)
        .map(|j| {
            let b = j as f64 / k as f64;
            2.0 * b * x - b * b
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{simplex_maximize, LpStatus};

    /// max c·(2x - t) with x fixed at `x0`, returning the LP's size reward.
    fn lp_reward(x0: f64, k: usize) -> f64 {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", x0, x0, 2.0);
        let t = lp.add_var("t", 0.0, f64::INFINITY, -1.0);
        let lp = add_concave_size_cuts(&lp, x, t, k);
        assert_eq!(lp.constraints.len(), k + 1);
        let s = simplex_maximize(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        s.objective_value
    }

    #[test]
    fn single_segment_overestimates_midpoint_by_a_quarter() {
        let r = lp_reward(0.5, 1);
        assert!((r - 1.0).abs() < 1e-12);
        assert!((r - 0.75 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn breakpoints_are_exact() {
        for j in 0..=16 {
            let b = j as f64 / 16.0;
            assert!((lp_reward(b, 16) - (2.0 * b - b * b)).abs() < 1e-12);
            assert!((tangent_envelope(b, 16) - b * b).abs() < 1e-15);
        }
    }

    #[test]
    fn sixteen_segments_stay_within_bound() {
        let bound = (1.0f64 / 32.0).powi(2);
        let mut worst = 0.0f64;
        for i in 0..=32_000 {
            let x = i as f64 / 32_000.0;
            let gap = x * x - tangent_envelope(x, 16);
            assert!(gap >= -1e-15, "envelope above x² at {x}");
            worst = worst.max(gap);
        }
        assert!(worst <= bound + 1e-15);
        // the bound is attained at segment midpoints
        assert!(worst > bound * 0.999);
    }
}
