//! Bundled and generated problem instances: the demo session, the canonical
//! 12-view benchmark, scaled benchmark configurations and small random
//! instances for the exhaustive oracle.

use crate::environment::{Display, DisplayEcology, UserPose, UserRole};
use crate::layout::{LayoutResult, StepInput};
use crate::model::{SessionModel, StepPair, View};
use crate::quality::{Placement, QualityWeights};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEMO_SESSION_JSON: &str = include_str!("../fixtures/demo_session.json");
pub const DEMO_ECOLOGY_JSON: &str = include_str!("../fixtures/demo_ecology.json");

pub fn demo_session() -> SessionModel {
    SessionModel::from_json(DEMO_SESSION_JSON).expect("bundled session parses")
}

pub fn demo_ecology() -> DisplayEcology {
    DisplayEcology::from_json(DEMO_ECOLOGY_JSON).expect("bundled ecology parses")
}

/// A self-contained layout problem for one step.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub model: SessionModel,
    pub ecology: DisplayEcology,
    pub step: usize,
    pub prev: Option<LayoutResult>,
    pub weights: QualityWeights,
}

impl Instance {
    pub fn input(&self) -> StepInput<'_> {
        StepInput::new(&self.model, self.step, &self.ecology, &self.weights).with_prev(self.prev.as_ref())
    }

    pub fn prev_placements(&self) -> &[Placement] {
        self.prev.as_ref().map_or(&[], |l| l.placements.as_slice())
    }
}

const ASPECTS: [f64; 6] = [16.0 / 9.0, 4.0 / 3.0, 1.0, 2.0, 0.75, 1.5];
const DOIS: [f64; 6] = [1.0, 0.8, 0.6, 0.4, 0.3, 0.5];

fn bench_displays(count: usize) -> Vec<Display> {
    const SIZES: [(f64, f64); 4] = [(3000.0, 1700.0), (2400.0, 1350.0), (1800.0, 1000.0), (1200.0, 700.0)];
    (0..count)
        .map(|k| {
            let (w, h) = SIZES[k % SIZES.len()];
            Display::wall(format!("d{}", k + 1), w, h, [k as f64 * 3.4 - 3.4, 0.0, 1.6])
        })
        .collect()
}

/// Places `ids` row-major on an equal-cell grid, cycling over displays.
fn synthetic_layout(ids: &[String], displays: &[Display], aspect: f64) -> Vec<Placement> {
    let nd = displays.len();
    let per: Vec<usize> = (0..nd).map(|d| ids.iter().enumerate().filter(|(k, _)| k % nd == d).count()).collect();
    let mut slot = vec![0usize; nd];
    ids.iter()
        .enumerate()
        .map(|(k, id)| {
            let d = &displays[k % nd];
            let m = per[k % nd];
            let cols = (m as f64).sqrt().ceil() as usize;
            let rows = m.div_ceil(cols);
            let s = slot[k % nd];
            slot[k % nd] += 1;
            let (cw, ch) = (d.width_mm / cols as f64, d.height_mm / rows as f64);
            let size = 0.8 * (cw * (1.0 + aspect) / aspect).min(ch * (1.0 + aspect));
            let center = [((s % cols) as f64 + 0.5) * cw, ((s / cols) as f64 + 0.5) * ch];
            Placement::from_size(id.as_str().into(), d.id.clone(), center, size, aspect)
        })
        .collect()
}

/// `views` views on `displays` displays with `spatial` spatial and
/// `temporal` incoming temporal constraints. The previous step holds one
/// view per temporal constraint, placed on a fixed grid.
pub fn bench_instance(views: usize, displays: usize, spatial: usize, temporal: usize) -> Instance {
    let ds = bench_displays(displays.max(1));
    let ecology = DisplayEcology {
        displays: ds.clone(),
        users: vec![UserPose {
            id: "moderator".into(),
            eye_m: [0.0, -3.5, 1.5],
            gaze: [0.0, 1.0, 0.0],
            role: UserRole::Moderator,
        }],
        ..DisplayEcology::default()
    };
    let cur: Vec<String> = (1..=views).map(|k| format!("v{k:02}")).collect();
    let prev: Vec<String> = (1..=temporal.min(views)).map(|k| format!("p{k:02}")).collect();
    let mut model = SessionModel::default();
    for (k, id) in cur.iter().enumerate() {
        model
            .pool
            .push(View::new(id.as_str(), ASPECTS[k % ASPECTS.len()]).with_doi(DOIS[k % DOIS.len()]));
    }
    for id in &prev {
        model.pool.push(View::new(id.as_str(), 16.0 / 9.0));
    }
    model.layers = vec![
        prev.iter().map(|s| s.as_str().into()).collect(),
        cur.iter().map(|s| s.as_str().into()).collect(),
    ];
    // chains of two or three views: (1,2), (2,3), (4,5), (6,7), (8,9), ...
    let mut pairs = Vec::new();
    let mut k = 0;
    while pairs.len() < spatial && k + 1 < views {
        pairs.push((k, k + 1));
        if pairs.len() < spatial && k + 2 < views && pairs.len() % 4 == 1 {
            pairs.push((k + 1, k + 2));
            k += 3;
        } else {
            k += 2;
        }
    }
    model.spatial_constraints = pairs
        .into_iter()
        .map(|(a, b)| StepPair::new(2, cur[a].as_str(), cur[b].as_str()))
        .collect();
    model.temporal_constraints = prev
        .iter()
        .enumerate()
        .map(|(k, p)| StepPair::new(1, p.as_str(), cur[(k * 3 + 1) % views].as_str()))
        .collect();
    model.normalize();
    let prev_layout = LayoutResult::from_placements(1, synthetic_layout(&prev, &ds, 16.0 / 9.0));
    Instance {
        name: format!("{views} views / {displays} displays"),
        model,
        ecology,
        step: 2,
        prev: Some(prev_layout),
        weights: QualityWeights::default(),
    }
}

/// 12 views, 3 displays, 6 spatial and 8 temporal constraints, mixed doi.
pub fn canonical_benchmark() -> Instance {
    let mut inst = bench_instance(12, 3, 6, 8);
    inst.name = "canonical 12 views / 3 displays".into();
    inst
}

/// Small random instance: 1–2 displays whose sides are multiples of 25 mm,
/// 1–4 views, random spatial pairs and up to two temporal pairs.
pub fn random_small_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = rng.gen_range(1..=2);
    let displays: Vec<Display> = (0..nd)
        .map(|k| {
            let w = 25.0 * rng.gen_range(8..=16) as f64;
            let h = 25.0 * rng.gen_range(6..=12) as f64;
            Display::wall(format!("d{}", k + 1), w, h, [k as f64 * 1.5 - 0.75, 0.0, 1.5])
        })
        .collect();
    let users = (0..rng.gen_range(0..=2))
        .map(|k| {
            let eye: [f64; 3] = [rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..-1.0), 1.5];
            let target = [rng.gen_range(-1.0..1.0), 0.0, 1.5];
            let g = [target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]];
            let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            UserPose {
                id: format!("u{k}").into(),
                eye_m: eye,
                gaze: [g[0] / n, g[1] / n, g[2] / n],
                role: UserRole::Participant,
            }
        })
        .collect();
    let ecology = DisplayEcology {
        displays: displays.clone(),
        users,
        ..DisplayEcology::default()
    };

    const ORACLE_ASPECTS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 4.0 / 3.0];
    let nv = rng.gen_range(1..=4);
    let cur: Vec<String> = (1..=nv).map(|k| format!("v{k}")).collect();
    let np = rng.gen_range(0..=2usize);
    let prev: Vec<String> = (1..=np).map(|k| format!("p{k}")).collect();
    let mut model = SessionModel::default();
    for id in &cur {
        let aspect = *ORACLE_ASPECTS.choose(&mut rng).expect("non-empty");
        let doi = 0.05 * rng.gen_range(4..=20) as f64;
        model.pool.push(View::new(id.as_str(), aspect).with_doi(doi));
    }
    for id in &prev {
        model.pool.push(View::new(id.as_str(), 1.0));
    }
    model.layers = vec![
        prev.iter().map(|s| s.as_str().into()).collect(),
        cur.iter().map(|s| s.as_str().into()).collect(),
    ];
    for i in 0..nv {
        for j in i + 1..nv {
            if rng.gen_bool(0.4) {
                model
                    .spatial_constraints
                    .push(StepPair::new(2, cur[i].as_str(), cur[j].as_str()));
            }
        }
    }
    let mut prev_placements = Vec::new();
    for p in &prev {
        let d = &displays[rng.gen_range(0..nd)];
        let s = 25.0 * rng.gen_range(2..=6) as f64;
        let (w, h) = (s / 2.0, s / 2.0);
        let cx = rng.gen_range(w / 2.0..=d.width_mm - w / 2.0).round();
        let cy = rng.gen_range(h / 2.0..=d.height_mm - h / 2.0).round();
        prev_placements.push(Placement::from_size(p.as_str().into(), d.id.clone(), [cx, cy], s, 1.0));
        let succ = &cur[rng.gen_range(0..nv)];
        model
            .temporal_constraints
            .push(StepPair::new(1, p.as_str(), succ.as_str()));
    }
    model.normalize();
    Instance {
        name: format!("random #{seed}"),
        model,
        ecology,
        step: 2,
        prev: Some(LayoutResult::from_placements(1, prev_placements)),
        weights: QualityWeights::default(),
    }
}
