//! Brute-force reference implementations and random fixtures shared by the
//! integration tests. Nothing here calls into the code paths it checks.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use evrep::event::{Event, EventWindow, Polarity, SensorGeometry};
use evrep::ingest::LabelTrack;
use evrep::pose::JointSet;
use evrep::tensor::FeatureTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A sorted window of `n` events. Events cluster in a few hotspots so that
/// many land in the same cell; the span is padded past the last event.
pub fn random_window(rng: &mut impl Rng, n: usize, geometry: SensorGeometry) -> EventWindow {
    let (w, h) = (geometry.width(), geometry.height());
    let t_start: u64 = rng.gen_range(0..1_000_000);
    let span: u64 = rng.gen_range(1..200_000);
    let hotspots: Vec<(u16, u16)> = (0..rng.gen_range(1..6))
        .map(|_| (rng.gen_range(0..w), rng.gen_range(0..h)))
        .collect();
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            let (x, y) = if rng.gen_bool(0.7) {
                let (cx, cy) = hotspots[rng.gen_range(0..hotspots.len())];
                let dx: i32 = rng.gen_range(-3..=3);
                let dy: i32 = rng.gen_range(-3..=3);
                (
                    (cx as i32 + dx).clamp(0, w as i32 - 1) as u16,
                    (cy as i32 + dy).clamp(0, h as i32 - 1) as u16,
                )
            } else {
                (rng.gen_range(0..w), rng.gen_range(0..h))
            };
            let t = t_start + rng.gen_range(0..span);
            let p = if rng.gen_bool(0.5) {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            Event::new(x, y, t, p)
        })
        .collect();
    events.sort_by_key(|e| e.t);
    let pad = rng.gen_range(1..1000);
    let t_end = events.last().map_or(t_start + 1, |e| e.t + pad);
    EventWindow::new(geometry, events, t_start, t_end).unwrap()
}

pub fn random_geometry(rng: &mut impl Rng, max_w: u16, max_h: u16) -> SensorGeometry {
    SensorGeometry::new(rng.gen_range(1..=max_w), rng.gen_range(1..=max_h)).unwrap()
}

/// One reference cell: summed absolute time, polarity sum, count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleCell {
    pub t_sum: f64,
    pub p_acc: i64,
    pub e_cnt: u64,
}

/// Group-by `(x, y, slice)` with slices assigned by comparing each event
/// time against explicit slice boundaries.
pub fn raster_oracle(window: &EventWindow, k: usize) -> BTreeMap<(u16, u16, usize), OracleCell> {
    let start = window.t_start() as f64;
    let span = (window.t_end() - window.t_start()) as f64;
    let bounds: Vec<f64> = (1..k).map(|i| start + span * i as f64 / k as f64).collect();
    let mut cells: BTreeMap<(u16, u16, usize), OracleCell> = BTreeMap::new();
    for e in window.events() {
        let t = e.t as f64;
        let slice = bounds.iter().filter(|&&b| t >= b).count();
        let cell = cells.entry((e.x, e.y, slice)).or_default();
        cell.t_sum += t;
        cell.p_acc += if e.p == Polarity::Positive { 1 } else { -1 };
        cell.e_cnt += 1;
    }
    cells
}

/// Normalized mean time of an oracle cell.
pub fn oracle_t_avg(window: &EventWindow, cell: &OracleCell) -> f64 {
    let mean = cell.t_sum / cell.e_cnt as f64;
    (mean - window.t_start() as f64) / (window.t_end() - window.t_start()) as f64
}

/// Dense `[h][w][t][c]` accumulation with float binning.
pub fn dense_oracle(window: &EventWindow, (hn, wn, tn): (usize, usize, usize), mode: &str) -> Vec<Vec<Vec<Vec<f64>>>> {
    let c = if mode == "two_channel" { 2 } else { 1 };
    let mut grid = vec![vec![vec![vec![0.0; c]; tn]; wn]; hn];
    let g = window.geometry();
    let span = (window.t_end() - window.t_start()) as f64;
    for e in window.events() {
        let h = ((e.y as f64 * hn as f64 / g.height() as f64).floor() as usize).min(hn - 1);
        let w = ((e.x as f64 * wn as f64 / g.width() as f64).floor() as usize).min(wn - 1);
        let t = (((e.t - window.t_start()) as f64 * tn as f64 / span).floor() as usize).min(tn - 1);
        let positive = e.p == Polarity::Positive;
        let (ch, v) = match mode {
            "count" => (0, 1.0),
            "polarity_sum" => (0, if positive { 1.0 } else { -1.0 }),
            _ => (if positive { 0 } else { 1 }, 1.0),
        };
        grid[h][w][t][ch] += v;
    }
    grid
}

/// `(hw, th, wt)` axis sums of a dense oracle grid, each as `[c][a][b]`.
pub type Planes = (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>);

pub fn dense_axis_sums(grid: &[Vec<Vec<Vec<f64>>>]) -> Planes {
    let hn = grid.len();
    let wn = grid[0].len();
    let tn = grid[0][0].len();
    let c = grid[0][0][0].len();
    let mut hw = vec![vec![vec![0.0; wn]; hn]; c];
    let mut th = vec![vec![vec![0.0; hn]; tn]; c];
    let mut wt = vec![vec![vec![0.0; tn]; wn]; c];
    for h in 0..hn {
        for w in 0..wn {
            for t in 0..tn {
                for ch in 0..c {
                    let v = grid[h][w][t][ch];
                    hw[ch][h][w] += v;
                    th[ch][t][h] += v;
                    wt[ch][w][t] += v;
                }
            }
        }
    }
    (hw, th, wt)
}

/// Direct loop evaluation of pool-over-time, expand, channel dot product,
/// correlation weighting and concatenation, in `f64`.
pub fn dea_naive(hw: &FeatureTensor, th: &FeatureTensor, wt: &FeatureTensor, max_pool: bool) -> Vec<f64> {
    let [c, h, w] = hw.shape();
    let t = th.shape()[1];
    let pool = |vals: Vec<f64>| -> f64 {
        if max_pool {
            vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    // th_hat[c][h][w] and wt_hat[c][h][w]
    let mut th_hat = vec![vec![vec![0.0; w]; h]; c];
    let mut wt_hat = vec![vec![vec![0.0; w]; h]; c];
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                th_hat[ci][hi][wi] = pool((0..t).map(|k| th.get(ci, k, hi) as f64).collect());
                wt_hat[ci][hi][wi] = pool((0..t).map(|k| wt.get(ci, wi, k) as f64).collect());
            }
        }
    }
    let mut c_h = vec![vec![0.0; w]; h];
    let mut c_w = vec![vec![0.0; w]; h];
    for hi in 0..h {
        for wi in 0..w {
            for ci in 0..c {
                let f = hw.get(ci, hi, wi) as f64;
                c_h[hi][wi] += th_hat[ci][hi][wi] * f;
                c_w[hi][wi] += wt_hat[ci][hi][wi] * f;
            }
        }
    }
    let mut out = Vec::with_capacity(3 * c * h * w);
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                out.push(hw.get(ci, hi, wi) as f64);
            }
        }
    }
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                out.push(c_h[hi][wi] * th_hat[ci][hi][wi]);
            }
        }
    }
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                out.push(c_w[hi][wi] * wt_hat[ci][hi][wi]);
            }
        }
    }
    out
}

pub fn random_tensor(rng: &mut impl Rng, shape: [usize; 3]) -> FeatureTensor {
    FeatureTensor::from_fn(shape, |_, _, _| rng.gen_range(-2.0f32..2.0))
}

/// Labels with timestamps between the first and last event, by linear scan.
pub fn mean_label_scan(track: &LabelTrack, first: u64, last: u64) -> Option<Vec<f64>> {
    let inside: Vec<&JointSet> = (0..track.len())
        .filter(|&i| {
            let t = track.t0() + i as u64 * track.dt();
            first <= t && t <= last
        })
        .map(|i| &track.labels()[i])
        .collect();
    if inside.is_empty() {
        return None;
    }
    let n = inside[0].coords().len();
    let mut sum = vec![0.0; n];
    for l in &inside {
        for (s, c) in sum.iter_mut().zip(l.coords()) {
            *s += c;
        }
    }
    Some(sum.into_iter().map(|s| s / inside.len() as f64).collect())
}

/// Label minimizing `|T - last|`, earliest on ties, by linear scan.
pub fn last_label_scan(track: &LabelTrack, last: u64) -> Vec<f64> {
    let mut best = 0;
    let mut best_d = u64::MAX;
    for i in 0..track.len() {
        let t = track.t0() + i as u64 * track.dt();
        let d = t.abs_diff(last);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    track.labels()[best].coords().to_vec()
}

pub fn random_track(rng: &mut impl Rng, joints: usize, dim: usize) -> LabelTrack {
    let t0 = rng.gen_range(0..50_000);
    let dt = rng.gen_range(1..20_000);
    let n = rng.gen_range(1..40);
    let labels = (0..n)
        .map(|_| JointSet::new(dim, (0..joints * dim).map(|_| rng.gen_range(-500.0..500.0)).collect()).unwrap())
        .collect();
    LabelTrack::new(t0, dt, labels).unwrap()
}

pub fn random_joints(rng: &mut impl Rng, joints: usize, dim: usize, range: f64) -> JointSet {
    JointSet::new(dim, (0..joints * dim).map(|_| rng.gen_range(-range..range)).collect()).unwrap()
}
