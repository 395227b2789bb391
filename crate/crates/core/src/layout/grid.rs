use super::display::DisplayProblem;
use crate::environment::display_extent;
use crate::quality::Placement;

/// Equal-cell grid with `⌈√m⌉` columns, filled row-major in view order.
/// Each view is centered in its cell at the largest size the cell allows.
/// A pinned size is used when it fits the cell; pinned centers are ignored.
/// Returns `None` if some view cannot reach its (scaled) minimum size.
pub(crate) fn grid_template(problem: &DisplayProblem, min_scale: f64) -> Option<Vec<Placement>> {
    let m = problem.views.len();
    if m == 0 {
        return Some(Vec::new());
    }
    let d = &problem.display;
    let e = display_extent(d);
    let cols = (m as f64).sqrt().ceil() as usize;
    let rows = m.div_ceil(cols);
    let cw = d.width_mm / cols as f64;
    let ch = d.height_mm / rows as f64;
    let mut out = Vec::with_capacity(m);
    for (k, v) in problem.views.iter().enumerate() {
        let (r, c) = (k / cols, k % cols);
        let a = v.aspect;
        let fit = (cw * (1.0 + a) / a).min(ch * (1.0 + a));
        let s = match v.pin_size {
            Some(p) if p <= fit => p,
            _ => fit,
        };
        if s + 1e-9 < v.min_size_fraction * min_scale * e {
            return None;
        }
        let center = [(c as f64 + 0.5) * cw, (r as f64 + 0.5) * ch];
        out.push(Placement::from_size(v.id.clone(), d.id.clone(), center, s, a));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Display;
    use crate::layout::DisplayView;

    fn problem(m: usize) -> DisplayProblem {
        DisplayProblem {
            display: Display::wall("d", 1200.0, 900.0, [0.0, 0.0, 1.5]),
            vis: 1.0,
            views: (0..m)
                .map(|i| DisplayView {
                    id: format!("v{i}").into(),
                    aspect: 1.0,
                    doi: 0.5,
                    min_size_fraction: 0.1,
                    pin_center: None,
                    pin_size: None,
                })
                .collect(),
            pairs: vec![],
            anchors: vec![],
            size_anchors: vec![],
        }
    }

    #[test]
    fn seven_views_use_three_columns() {
        let out = grid_template(&problem(7), 1.0).unwrap();
        assert_eq!(out.len(), 7);
        // 3 columns × 3 rows of 400 × 300 mm cells; square views are 300 mm
        assert!((out[0].w_mm - 300.0).abs() < 1e-9);
        assert!((out[0].cx_mm - 200.0).abs() < 1e-9 && (out[0].cy_mm - 150.0).abs() < 1e-9);
        assert!((out[6].cx_mm - 200.0).abs() < 1e-9 && (out[6].cy_mm - 750.0).abs() < 1e-9);
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                assert!(!a.overlaps(b, 1e-9));
            }
        }
    }

    #[test]
    fn too_small_cells_fail() {
        let mut p = problem(9);
        for v in &mut p.views {
            v.min_size_fraction = 0.5;
        }
        assert!(grid_template(&p, 1.0).is_none());
    }
}
