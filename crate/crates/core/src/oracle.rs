//! Exhaustive reference solver for small instances.
//!
//! Enumerates every view-to-display assignment and, per display, searches
//! all placements whose size `s = w + h` lies on a 25 mm grid (plus the
//! largest size that fits) and whose top-left corner lies on a 25 mm grid
//! (plus flush right/bottom positions and positions centred on the view's
//! temporal predecessor). Shares no code with the layout engine beyond the
//! quality function's inputs, so it can be used to check it.

use crate::environment::{display_extent, Display, DisplayEcology};
use crate::ids::{DisplayId, ViewId};
use crate::model::{step_context, ModelError, SessionModel};
use crate::quality::{Placement, QualityWeights};
use std::collections::BTreeMap;

/// Largest step the oracle accepts.
pub const MAX_VIEWS: usize = 10;

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub grid_mm: f64,
    /// How often minimum sizes are halved before a display is infeasible.
    pub relax_rounds: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_mm: 25.0,
            relax_rounds: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub quality: f64,
    pub placements: Vec<Placement>,
    /// Search nodes visited across all display subproblems.
    pub nodes: u64,
}

#[derive(Clone, Copy)]
struct Cand {
    w: f64,
    h: f64,
    left: f64,
    top: f64,
}

impl Cand {
    fn cx(&self) -> f64 {
        self.left + self.w / 2.0
    }

    fn cy(&self) -> f64 {
        self.top + self.h / 2.0
    }

    fn overlaps(&self, o: &Cand) -> bool {
        const EPS: f64 = 1e-9;
        self.left < o.left + o.w - EPS
            && o.left < self.left + self.w - EPS
            && self.top < o.top + o.h - EPS
            && o.top < self.top + self.h - EPS
    }
}

/// All grid positions of one view at one size.
struct Bucket {
    w: f64,
    h: f64,
    size_value: f64,
    lefts: Vec<f64>,
    tops: Vec<f64>,
}

impl Bucket {
    fn at(&self, left: f64, top: f64) -> Cand {
        Cand {
            w: self.w,
            h: self.h,
            left,
            top,
        }
    }
}

struct SubView {
    id: ViewId,
    aspect: f64,
    doi: f64,
    min_s: f64,
    /// Previous centre when the predecessor was shown on this display.
    anchors: Vec<[f64; 2]>,
    /// Most the anchor terms can add up to: the centre's distances to two
    /// anchors sum to at least their distance.
    anchor_cap: f64,
    /// Smallest candidate size, squared and in extent units.
    y_min: f64,
}

/// One (display, view subset) subproblem. Views are kept in search order.
struct Sub<'a> {
    display: &'a Display,
    ext: f64,
    vis: f64,
    weights: &'a QualityWeights,
    views: Vec<SubView>,
    /// Spatial pairs as indices into `views`, `i < j`.
    pairs: Vec<(usize, usize)>,
    cands: Vec<Vec<Bucket>>,
    best: f64,
    best_boxes: Option<Vec<Cand>>,
    nodes: u64,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0.0;
    while lo + k * step <= hi + 1e-9 {
        out.push(lo + k * step);
        k += 1.0;
    }
    out
}

impl Sub<'_> {
    fn max_size(&self, k: usize) -> f64 {
        let a = self.views[k].aspect;
        (self.display.width_mm * (1.0 + a) / a).min(self.display.height_mm * (1.0 + a))
    }

    fn size_value(&self, k: usize, s: f64) -> f64 {
        let x = s / self.ext;
        self.gain(k) * (2.0 * x - x * x)
    }

    fn gain(&self, k: usize) -> f64 {
        self.weights.gamma * self.vis * self.views[k].doi
    }

    /// Grid sizes admissible at minimum-size scale `scale`, ascending.
    fn sizes(&self, k: usize, step: f64, scale: f64) -> Vec<f64> {
        let s_max = self.max_size(k);
        let s_min = self.views[k].min_s * scale;
        let mut sizes: Vec<f64> = grid(step, s_max, step).into_iter().filter(|&s| s >= s_min - 1e-9).collect();
        if s_max >= s_min - 1e-9 && sizes.last().is_none_or(|&l| s_max - l > 1e-9) {
            sizes.push(s_max);
        }
        sizes
    }

    fn bucket(&self, k: usize, s: f64, step: f64) -> Bucket {
        let (dw, dh) = (self.display.width_mm, self.display.height_mm);
        let a = self.views[k].aspect;
        let (w, h) = ((s * a / (1.0 + a)).min(dw), (s / (1.0 + a)).min(dh));
        let mut lefts = grid(0.0, dw - w, step);
        let mut tops = grid(0.0, dh - h, step);
        lefts.push(dw - w);
        tops.push(dh - h);
        for an in &self.views[k].anchors {
            lefts.push((an[0] - w / 2.0).clamp(0.0, dw - w));
            tops.push((an[1] - h / 2.0).clamp(0.0, dh - h));
        }
        for list in [&mut lefts, &mut tops] {
            list.sort_by(f64::total_cmp);
            list.dedup_by(|p, q| (*p - *q).abs() < 1e-9);
        }
        Bucket {
            w,
            h,
            size_value: self.size_value(k, s),
            lefts,
            tops,
        }
    }

    /// Buckets by decreasing size.
    fn candidates(&self, k: usize, step: f64, scale: f64) -> Vec<Bucket> {
        self.sizes(k, step, scale)
            .into_iter()
            .rev()
            .map(|s| self.bucket(k, s, step))
            .collect()
    }

    /// Whether the views fit at their smallest admissible sizes. Shrinking a
    /// box in place keeps a packing valid, so this decides feasibility.
    fn packable(&self, step: f64, scale: f64) -> bool {
        let mut boxes = Vec::with_capacity(self.views.len());
        for k in 0..self.views.len() {
            match self.sizes(k, step, scale).first() {
                Some(&s) => {
                    let b = self.bucket(k, s, step);
                    let mut all = Vec::with_capacity(b.lefts.len() * b.tops.len());
                    for &l in &b.lefts {
                        all.extend(b.tops.iter().map(|&t| b.at(l, t)));
                    }
                    boxes.push(all);
                }
                None => return false,
            }
        }
        fn place(boxes: &[Vec<Cand>], placed: &mut Vec<Cand>) -> bool {
            let Some(next) = boxes.get(placed.len()) else {
                return true;
            };
            for c in next {
                if placed.iter().all(|p| !p.overlaps(c)) {
                    placed.push(*c);
                    if place(boxes, placed) {
                        return true;
                    }
                    placed.pop();
                }
            }
            false
        }
        place(&boxes, &mut Vec::new())
    }

    /// Upper bound on the size terms of views `from..` sharing `budget`
    /// square millimetres, less the part of their open spatial pairs that
    /// grows with their size. Centres of disjoint boxes are at least half
    /// the sum of their shorter sides apart, so each open pair end costs
    /// `α·μ·x/2` with `μ` the shorter side per unit size.
    ///
    /// Solved by Lagrangian relaxation of the area constraint: with `y = x²`
    /// each term `(2g − k)√y − g·y` is concave and the area is linear in `y`.
    fn area_bound(&self, from: usize, budget: f64) -> f64 {
        let n = self.views.len();
        if from >= n {
            return 0.0;
        }
        let budget = budget.max(0.0);
        let mut ends = [0usize; MAX_VIEWS];
        for &(i, j) in &self.pairs {
            if j >= from {
                ends[j] += 1;
                if i >= from {
                    ends[i] += 1;
                }
            }
        }
        let mut terms = [(0.0, 0.0, 0.0, 0.0, 0.0); MAX_VIEWS];
        for (slot, k) in terms.iter_mut().zip(from..n) {
            *slot = {
                let a = self.views[k].aspect;
                let c = self.ext * self.ext * a / ((1.0 + a) * (1.0 + a));
                let ymax = (self.max_size(k) / self.ext).powi(2);
                let mu = a.min(1.0) / (1.0 + a);
                let lin = self.weights.alpha * mu / 2.0 * ends[k] as f64;
                (self.gain(k), lin, c, ymax, self.views[k].y_min)
            };
        }
        let terms = &terms[..n - from];
        let y_at = |g: f64, lin: f64, c: f64, ymax: f64, ymin: f64, lambda: f64| {
            let num = 2.0 * g - lin;
            if num <= 0.0 {
                return ymin;
            }
            let r = num / (2.0 * (g + lambda * c));
            (r * r).clamp(ymin, ymax)
        };
        let usage = |lambda: f64| {
            terms
                .iter()
                .map(|&(g, lin, c, ym, y0)| c * y_at(g, lin, c, ym, y0, lambda))
                .sum::<f64>()
        };
        let dual = |lambda: f64| {
            lambda * budget
                + terms
                    .iter()
                    .map(|&(g, lin, c, ym, y0)| {
                        let y = y_at(g, lin, c, ym, y0, lambda);
                        (2.0 * g - lin) * y.sqrt() - g * y - lambda * c * y
                    })
                    .sum::<f64>()
        };
        if usage(0.0) <= budget {
            return dual(0.0);
        }
        let (mut lo, mut hi) = (0.0, 1e-6);
        while usage(hi) > budget && hi < 1e6 {
            lo = hi;
            hi *= 4.0;
        }
        for _ in 0..24 {
            let mid = 0.5 * (lo + hi);
            if usage(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // every λ ≥ 0 gives a valid bound; take the better end
        dual(lo).min(dual(hi))
    }

    /// Largest spatial term a partner of the placed box `p` can get: two
    /// disjoint boxes' centres are at least half of `p`'s shorter side apart.
    fn pair_cap(&self, p: &Cand) -> f64 {
        self.weights.alpha * (1.0 - p.w.min(p.h) / 2.0 / self.ext)
    }

    /// Optimistic value of pair and anchor terms not yet fixed once views
    /// `..upto` are placed, excluding the own terms of views `upto..`.
    fn open_terms(&self, placed: &[Cand], upto: usize) -> f64 {
        let mut t = 0.0;
        for &(i, j) in &self.pairs {
            if j >= upto {
                t += if i < placed.len() { self.pair_cap(&placed[i]) } else { self.weights.alpha };
            }
        }
        for r in upto..self.views.len() {
            t += self.views[r].anchor_cap;
        }
        t
    }

    fn root_bound(&self) -> f64 {
        self.area_bound(0, self.display.width_mm * self.display.height_mm) + self.open_terms(&[], 0)
    }

    fn dfs(&mut self, placed: &mut Vec<Cand>, value: f64, used_area: f64) {
        self.nodes += 1;
        let k = placed.len();
        let n = self.views.len();
        if k == n {
            if value > self.best {
                self.best = value;
                self.best_boxes = Some(placed.clone());
            }
            return;
        }
        let free = self.display.width_mm * self.display.height_mm - used_area;
        // children are checked before descending; only the root needs it here
        if k == 0 && value + self.area_bound(k, free) + self.open_terms(placed, k) <= self.best {
            return;
        }
        // Pair and anchor terms are sums of L1 distances to fixed points, so
        // they split into a column part and a row part. That lets whole
        // sizes and columns be dismissed before looking at single boxes.
        let mut points: Vec<(f64, [f64; 2])> = self.views[k]
            .anchors
            .iter()
            .map(|a| (self.weights.beta, *a))
            .collect();
        for &(i, j) in &self.pairs {
            if j == k {
                points.push((self.weights.alpha, [placed[i].cx(), placed[i].cy()]));
            }
        }
        let constant: f64 = points.iter().map(|p| p.0).sum();
        let open = self.open_terms(placed, k + 1);
        // (bound, bucket, column values, row values), best bound first
        let mut options = Vec::with_capacity(self.cands[k].len());
        for (b, bucket) in self.cands[k].iter().enumerate() {
            let (w, h) = (bucket.w, bucket.h);
            let base = value + bucket.size_value + constant + self.area_bound(k + 1, free - w * h) + open;
            if base <= self.best {
                continue;
            }
            let axis = |starts: &[f64], len: f64, c: usize| {
                let mut vals: Vec<(f64, f64)> = starts
                    .iter()
                    .map(|&t| {
                        let v: f64 = points.iter().map(|(wt, p)| -wt * (t + len / 2.0 - p[c]).abs()).sum();
                        (v / self.ext, t)
                    })
                    .collect();
                vals.sort_by(|p, q| q.0.total_cmp(&p.0));
                vals
            };
            let fx = axis(&bucket.lefts, w, 0);
            let gy = axis(&bucket.tops, h, 1);
            let bound = base + fx[0].0 + gy[0].0;
            if bound > self.best {
                options.push((bound, base, b, fx, gy));
            }
        }
        options.sort_by(|p, q| q.0.total_cmp(&p.0));
        for (bound, base, b, fx, gy) in options {
            if bound <= self.best {
                break;
            }
            let (w, h, size_value) = {
                let bucket = &self.cands[k][b];
                (bucket.w, bucket.h, bucket.size_value)
            };
            for &(fv, left) in &fx {
                if base + fv + gy[0].0 <= self.best {
                    break;
                }
                for &(gv, top) in &gy {
                    if base + fv + gv <= self.best {
                        break;
                    }
                    let cand = Cand { w, h, left, top };
                    if placed.iter().any(|p| p.overlaps(&cand)) {
                        continue;
                    }
                    let v = value + size_value + constant + fv + gv;
                    placed.push(cand);
                    self.dfs(placed, v, used_area + w * h);
                    placed.pop();
                }
            }
        }
    }
}

struct Entry<'a> {
    sub: Sub<'a>,
    ub: f64,
    /// Minimum-size scale at which the subset first packs.
    scale: Option<f64>,
    exact: Option<(f64, Vec<Placement>)>,
}

impl Entry<'_> {
    /// Looks for the best layout strictly better than `threshold`; on
    /// failure the entry's bound drops to `threshold`.
    fn search(&mut self, threshold: f64, cfg: &OracleConfig) -> bool {
        if self.scale.is_none() {
            let mut scale = 1.0;
            for _ in 0..=cfg.relax_rounds {
                if self.sub.packable(cfg.grid_mm, scale) {
                    self.scale = Some(scale);
                    break;
                }
                scale *= 0.5;
            }
            if self.scale.is_none() {
                self.ub = f64::NEG_INFINITY;
                return false;
            }
        }
        let scale = self.scale.expect("set above");
        let sub = &mut self.sub;
        if sub.cands.is_empty() {
            sub.cands = (0..sub.views.len()).map(|k| sub.candidates(k, cfg.grid_mm, scale)).collect();
            for (v, buckets) in sub.views.iter_mut().zip(&sub.cands) {
                if let Some(b) = buckets.last() {
                    v.y_min = ((b.w + b.h) / sub.ext).powi(2);
                }
            }
        }
        sub.best = threshold;
        sub.best_boxes = None;
        sub.dfs(&mut Vec::new(), 0.0, 0.0);
        match sub.best_boxes.take() {
            Some(boxes) => {
                let placements: Vec<Placement> = boxes
                    .iter()
                    .zip(&sub.views)
                    .map(|(c, v)| Placement {
                        view: v.id.clone(),
                        display: sub.display.id.clone(),
                        cx_mm: c.cx(),
                        cy_mm: c.cy(),
                        w_mm: c.w,
                        h_mm: c.h,
                    })
                    .collect();
                self.ub = sub.best;
                self.exact = Some((sub.best, placements));
                true
            }
            None => {
                self.ub = self.ub.min(threshold);
                false
            }
        }
    }
}

/// Maximum `Q` over all assignments and grid placements of step `step`.
/// Returns `None` when no assignment has a feasible layout.
pub fn exhaustive_oracle(
    model: &SessionModel,
    step: usize,
    ecology: &DisplayEcology,
    prev: &[Placement],
    weights: &QualityWeights,
    cfg: &OracleConfig,
) -> Result<Option<OracleSolution>, ModelError> {
    let ctx = step_context(model, step)?;
    let n = ctx.views.len();
    assert!(n <= MAX_VIEWS, "the oracle is exponential; {n} views is too many");
    let displays: Vec<&Display> = ecology.connected().collect();
    let nd = displays.len();
    if n == 0 {
        return Ok(Some(OracleSolution {
            quality: 0.0,
            placements: Vec::new(),
            nodes: 0,
        }));
    }
    if nd == 0 {
        return Ok(None);
    }
    let index: BTreeMap<&ViewId, usize> = ctx.views.iter().enumerate().map(|(k, v)| (&v.id, k)).collect();
    let prev_by_view: BTreeMap<&ViewId, &Placement> = prev.iter().map(|p| (&p.view, p)).collect();

    // table[d][mask]
    let mut table: Vec<Vec<Entry>> = Vec::with_capacity(nd);
    for d in &displays {
        let vis = ecology.visibility(d);
        let ext = display_extent(d);
        let mut row = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            // highest doi first so strong incumbents come early
            let mut members: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
            members.sort_by(|&a, &b| ctx.views[b].doi.total_cmp(&ctx.views[a].doi).then(a.cmp(&b)));
            let pos: BTreeMap<usize, usize> = members.iter().enumerate().map(|(p, &k)| (k, p)).collect();
            let views = members
                .iter()
                .map(|&k| {
                    let v = &ctx.views[k];
                    let anchors: Vec<[f64; 2]> = ctx
                        .temporal_in
                        .iter()
                        .filter(|(_, cur)| cur == &v.id)
                        .filter_map(|(p, _)| prev_by_view.get(p))
                        .filter(|p| p.display == d.id)
                        .map(|p| [p.cx_mm, p.cy_mm])
                        .collect();
                    let diameter = anchors
                        .iter()
                        .flat_map(|a| anchors.iter().map(move |b| (a[0] - b[0]).abs() + (a[1] - b[1]).abs()))
                        .fold(0.0, f64::max);
                    SubView {
                        id: v.id.clone(),
                        aspect: v.preferred_aspect,
                        doi: v.doi,
                        min_s: v.min_size_fraction * ext,
                        anchor_cap: weights.beta * (anchors.len() as f64 - diameter / ext),
                        anchors,
                        y_min: 0.0,
                    }
                })
                .collect();
            let pairs = ctx
                .spatial
                .iter()
                .filter_map(|(u, v)| {
                    let (a, b) = (pos.get(&index[u])?, pos.get(&index[v])?);
                    Some((*a.min(b), *a.max(b)))
                })
                .collect();
            let sub = Sub {
                display: d,
                ext,
                vis,
                weights,
                views,
                pairs,
                cands: Vec::new(),
                best: f64::NEG_INFINITY,
                best_boxes: None,
                nodes: 0,
            };
            let ub = sub.root_bound();
            let exact = (mask == 0).then(|| (0.0, Vec::new()));
            row.push(Entry {
                sub,
                ub,
                scale: (mask == 0).then_some(1.0),
                exact,
            });
        }
        table.push(row);
    }

    let decode = |code: usize| {
        let mut masks = vec![0usize; nd];
        let mut c = code;
        for k in 0..n {
            masks[c % nd] |= 1 << k;
            c /= nd;
        }
        masks
    };
    let mut order: Vec<(f64, usize)> = (0..nd.pow(n as u32))
        .map(|code| {
            let masks = decode(code);
            (masks.iter().enumerate().map(|(d, &m)| table[d][m].ub).sum(), code)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut incumbent: Option<(f64, Vec<usize>)> = None;
    for &(initial_ub, code) in &order {
        let best = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(q, _)| *q);
        if initial_ub == f64::NEG_INFINITY || initial_ub <= best {
            break;
        }
        let masks = decode(code);
        let mut complete = true;
        for d in 0..nd {
            if table[d][masks[d]].exact.is_some() {
                continue;
            }
            let others: f64 = (0..nd).filter(|&e| e != d).map(|e| table[e][masks[e]].ub).sum();
            if others + table[d][masks[d]].ub <= best || !table[d][masks[d]].search(best - others, cfg) {
                complete = false;
                break;
            }
        }
        if !complete {
            continue;
        }
        let q: f64 = (0..nd).map(|d| table[d][masks[d]].exact.as_ref().expect("complete").0).sum();
        if q > best {
            incumbent = Some((q, masks));
        }
    }

    let nodes = table.iter().flatten().map(|e| e.sub.nodes).sum();
    Ok(incumbent.map(|(quality, masks)| {
        let mut placements: Vec<Placement> = masks
            .iter()
            .enumerate()
            .flat_map(|(d, &m)| table[d][m].exact.as_ref().map(|(_, p)| p.clone()).unwrap_or_default())
            .collect();
        placements.sort_by(|a, b| a.view.cmp(&b.view));
        OracleSolution {
            quality,
            placements,
            nodes,
        }
    }))
}

/// Which display each view went to.
pub fn assignment_of(placements: &[Placement]) -> BTreeMap<ViewId, DisplayId> {
    placements.iter().map(|p| (p.view.clone(), p.display.clone())).collect()
}
