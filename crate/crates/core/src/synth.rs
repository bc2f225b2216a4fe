//! Synthetic event streams from an animated stick figure.
//!
//! Frames are rendered as bright capsules (bones) on a dark background and
//! turned into events with a per-pixel log-intensity contrast threshold: a
//! pixel fires each time its log intensity moves a full threshold step away
//! from its reference level, and the reference follows in whole steps.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::event::{Event, EventError, EventWindow, Polarity, SensorGeometry};
use crate::ingest::{self, IngestError, LabelTrack};
use crate::pose::{JointSet, PoseError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("time {t} outside the track span [{start}, {end}]")]
    OutOfSpan { t: u64, start: u64, end: u64 },
    #[error("degenerate track: {0}")]
    DegenerateTrack(String),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthConfig {
    #[serde(skip)]
    pub geometry: SensorGeometry,
    pub frame_period_us: u64,
    /// Contrast threshold in log-intensity units.
    pub threshold: f64,
    pub foreground: f64,
    pub background: f64,
    /// Uniform background activity, events per pixel per second. Zero disables it.
    pub noise_rate_hz: f64,
    pub noise_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            geometry: SensorGeometry::DAVIS346,
            frame_period_us: 1000,
            threshold: 0.2,
            foreground: 1.0,
            background: 0.2,
            noise_rate_hz: 0.0,
            noise_seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.frame_period_us == 0 {
            return Err(SynthError::BadConfig("frame period must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(SynthError::BadConfig("threshold must be positive".into()));
        }
        if !(self.foreground > 0.0 && self.background > 0.0) {
            return Err(SynthError::BadConfig("intensities must be positive".into()));
        }
        if !(self.noise_rate_hz >= 0.0 && self.noise_rate_hz.is_finite()) {
            return Err(SynthError::BadConfig("noise rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Keyframed 2D joint positions plus the bones drawn between them.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTrack {
    keyframes: Vec<(u64, JointSet)>,
    bones: Vec<(usize, usize)>,
    thickness: f64,
}

impl SkeletonTrack {
    pub fn new(
        keyframes: Vec<(u64, JointSet)>,
        bones: Vec<(usize, usize)>,
        thickness: f64,
        geometry: SensorGeometry,
    ) -> Result<Self, SynthError> {
        let Some((_, first)) = keyframes.first() else {
            return Err(SynthError::DegenerateTrack("no keyframes".into()));
        };
        let joints = first.joint_count();
        for (i, (t, pose)) in keyframes.iter().enumerate() {
            if pose.dim() != 2 || pose.joint_count() != joints {
                return Err(SynthError::DegenerateTrack(format!(
                    "keyframe {i} has a different shape"
                )));
            }
            if i > 0 && *t <= keyframes[i - 1].0 {
                return Err(SynthError::DegenerateTrack(format!(
                    "keyframe {i} is not after its predecessor"
                )));
            }
            for j in pose.joints() {
                if !(j[0] >= 0.0 && j[0] < geometry.width() as f64 && j[1] >= 0.0 && j[1] < geometry.height() as f64) {
                    return Err(SynthError::DegenerateTrack(format!("keyframe {i} leaves the sensor")));
                }
            }
        }
        if let Some(&(a, b)) = bones.iter().find(|(a, b)| *a >= joints || *b >= joints) {
            return Err(SynthError::DegenerateTrack(format!(
                "bone ({a}, {b}) names a missing joint"
            )));
        }
        if !(thickness > 0.0 && thickness.is_finite()) {
            return Err(SynthError::DegenerateTrack("bone thickness must be positive".into()));
        }
        Ok(Self {
            keyframes,
            bones,
            thickness,
        })
    }

    pub fn keyframes(&self) -> &[(u64, JointSet)] {
        &self.keyframes
    }

    pub fn bones(&self) -> &[(usize, usize)] {
        &self.bones
    }

    pub fn t_start(&self) -> u64 {
        self.keyframes[0].0
    }

    pub fn t_end(&self) -> u64 {
        self.keyframes[self.keyframes.len() - 1].0
    }

    /// Pose at `t`, linearly interpolated between the surrounding keyframes.
    pub fn pose_at(&self, t: u64) -> Result<JointSet, SynthError> {
        let (start, end) = (self.t_start(), self.t_end());
        if t < start || t > end {
            return Err(SynthError::OutOfSpan { t, start, end });
        }
        let i = self.keyframes.partition_point(|(kt, _)| *kt <= t);
        let (t0, p0) = &self.keyframes[i - 1];
        if *t0 == t || i == self.keyframes.len() {
            return Ok(p0.clone());
        }
        let (t1, p1) = &self.keyframes[i];
        let alpha = (t - t0) as f64 / (t1 - t0) as f64;
        Ok(p0.lerp(p1, alpha))
    }
}

/// A rendered `height x width` frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl IntensityFrame {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

fn dist2_to_segment(px: f64, py: f64, a: &[f64], b: &[f64]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((px - a[0]) * dx + (py - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a[0] + s * dx - px, a[1] + s * dy - py);
    cx * cx + cy * cy
}

fn render_pose(pose: &JointSet, track: &SkeletonTrack, config: &SynthConfig) -> IntensityFrame {
    let (width, height) = (config.geometry.width() as usize, config.geometry.height() as usize);
    let mut data = vec![config.background; width * height];
    let r = track.thickness / 2.0;
    let r2 = r * r;
    for &(ja, jb) in &track.bones {
        let (a, b) = (pose.joint(ja), pose.joint(jb));
        let x0 = (a[0].min(b[0]) - r).floor().max(0.0) as usize;
        let x1 = ((a[0].max(b[0]) + r).ceil().max(0.0) as usize).min(width - 1);
        let y0 = (a[1].min(b[1]) - r).floor().max(0.0) as usize;
        let y1 = ((a[1].max(b[1]) + r).ceil().max(0.0) as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if dist2_to_segment(x as f64, y as f64, a, b) <= r2 {
                    data[y * width + x] = config.foreground;
                }
            }
        }
    }
    IntensityFrame { width, height, data }
}

/// Draws every bone as a capsule of the track's thickness around the
/// segment between its joints. Pixel `(x, y)` is foreground when its center
/// lies within half the thickness of a bone.
pub fn render_intensity(track: &SkeletonTrack, t: u64, config: &SynthConfig) -> Result<IntensityFrame, SynthError> {
    let pose = track.pose_at(t)?;
    Ok(render_pose(&pose, track, config))
}

/// Converts the animated track into an event window and a label track sampled
/// at the frame period.
pub fn gen_events(track: &SkeletonTrack, config: &SynthConfig) -> Result<(EventWindow, LabelTrack), SynthError> {
    config.validate()?;
    if track.keyframes.len() < 2 {
        return Err(SynthError::DegenerateTrack("need at least two keyframes".into()));
    }
    let start = track.t_start();
    let period = config.frame_period_us;
    let frames = ((track.t_end() - start) / period) as usize + 1;
    if frames < 2 {
        return Err(SynthError::DegenerateTrack(
            "track shorter than one frame period".into(),
        ));
    }
    let width = config.geometry.width() as usize;
    let theta = config.threshold;

    let mut labels = Vec::with_capacity(frames);
    let pose0 = track.pose_at(start)?;
    let mut prev_log: Vec<f64> = render_pose(&pose0, track, config).data.iter().map(|v| v.ln()).collect();
    labels.push(pose0);
    let base = prev_log.clone();
    let mut level = vec![0i64; prev_log.len()];
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
    let mut events = Vec::new();
    let mut batch = Vec::new();

    for k in 1..frames {
        let ta = start + (k as u64 - 1) * period;
        let tb = ta + period;
        let pose = track.pose_at(tb)?;
        let frame = render_pose(&pose, track, config);
        labels.push(pose);
        batch.clear();
        for (i, (&value, l0)) in frame.data.iter().zip(prev_log.iter_mut()).enumerate() {
            let l1 = value.ln();
            // the reference level always sits within one step of the last
            // log intensity, so an unchanged pixel cannot cross
            if l1 == *l0 {
                continue;
            }
            let rel = (l1 - base[i]) / theta;
            let cur = level[i];
            let (up, down) = (rel.floor() as i64, rel.ceil() as i64);
            let (x, y) = ((i % width) as u16, (i / width) as u16);
            let crossing = |j: i64| {
                let lj = base[i] + j as f64 * theta;
                let frac = ((lj - *l0) / (l1 - *l0)).clamp(0.0, 1.0);
                ta + ((frac * period as f64) as u64).min(period - 1)
            };
            if up > cur {
                for j in cur + 1..=up {
                    batch.push(Event::new(x, y, crossing(j), Polarity::Positive));
                }
                level[i] = up;
            } else if down < cur {
                for j in (down..cur).rev() {
                    batch.push(Event::new(x, y, crossing(j), Polarity::Negative));
                }
                level[i] = down;
            }
            *l0 = l1;
        }
        if config.noise_rate_hz > 0.0 {
            let expected = config.noise_rate_hz * config.geometry.pixel_count() as f64 * period as f64 / 1e6;
            let mut count = expected.floor() as usize;
            if noise_rng.gen::<f64>() < expected.fract() {
                count += 1;
            }
            for _ in 0..count {
                let x = noise_rng.gen_range(0..config.geometry.width());
                let y = noise_rng.gen_range(0..config.geometry.height());
                let t = ta + noise_rng.gen_range(0..period);
                let p = if noise_rng.gen::<bool>() {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                };
                batch.push(Event::new(x, y, t, p));
            }
        }
        batch.sort_by_key(|e| e.t);
        events.append(&mut batch);
    }
    let t_last_frame = start + (frames as u64 - 1) * period;
    let window = EventWindow::new(config.geometry, events, start, t_last_frame + 1)?;
    let labels = LabelTrack::new(start, period, labels)?;
    Ok((window, labels))
}

/// Thirteen-joint stick figure: head, shoulders, elbows, wrists, hips, knees, ankles.
pub const FIGURE_BONES: [(usize, usize); 12] = [
    (0, 1),
    (0, 2),
    (1, 3),
    (3, 5),
    (2, 4),
    (4, 6),
    (1, 7),
    (2, 8),
    (7, 9),
    (9, 11),
    (8, 10),
    (10, 12),
];

/// A seeded walking stick figure: limbs swing sinusoidally while the body drifts sideways.
pub fn random_figure(
    rng: &mut impl Rng,
    geometry: SensorGeometry,
    duration_us: u64,
    keyframe_period_us: u64,
) -> Result<SkeletonTrack, SynthError> {
    let (w, h) = (geometry.width() as f64, geometry.height() as f64);
    let scale = h * rng.gen_range(0.18..0.26);
    let cx0 = w * rng.gen_range(0.35..0.65);
    let cy = h * rng.gen_range(0.45..0.55);
    let drift = w * rng.gen_range(-0.15..0.15);
    let freq = rng.gen_range(1.0..3.0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let arm_amp = rng.gen_range(0.4..1.0);
    let leg_amp = rng.gen_range(0.3..0.6);
    let thickness = rng.gen_range(2.0..4.0);

    let steps = (duration_us / keyframe_period_us).max(1);
    let mut keyframes = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let t = k * keyframe_period_us;
        let s = t as f64 / 1e6;
        let swing = (2.0 * PI * freq * s + phase).sin();
        let cx = cx0 + drift * s / (duration_us as f64 / 1e6);
        let limb = |ox: f64, oy: f64, len: f64, angle: f64| (ox + len * angle.sin(), oy + len * angle.cos());
        let head = (cx, cy - 1.6 * scale);
        let ls = (cx - 0.4 * scale, cy - 1.2 * scale);
        let rs = (cx + 0.4 * scale, cy - 1.2 * scale);
        let le = limb(ls.0, ls.1, 0.6 * scale, arm_amp * swing);
        let re = limb(rs.0, rs.1, 0.6 * scale, -arm_amp * swing);
        let lw = limb(le.0, le.1, 0.5 * scale, arm_amp * swing * 1.3);
        let rw = limb(re.0, re.1, 0.5 * scale, -arm_amp * swing * 1.3);
        let lh = (cx - 0.25 * scale, cy);
        let rh = (cx + 0.25 * scale, cy);
        let lk = limb(lh.0, lh.1, 0.7 * scale, -leg_amp * swing);
        let rk = limb(rh.0, rh.1, 0.7 * scale, leg_amp * swing);
        let la = limb(lk.0, lk.1, 0.7 * scale, -leg_amp * swing * 0.5);
        let ra = limb(rk.0, rk.1, 0.7 * scale, leg_amp * swing * 0.5);
        let pts = [head, ls, rs, le, re, lw, rw, lh, rh, lk, rk, la, ra];
        let coords = pts
            .iter()
            .flat_map(|&(x, y)| [x.clamp(0.0, w - 1.0), y.clamp(0.0, h - 1.0)])
            .collect();
        keyframes.push((t, JointSet::new(2, coords)?));
    }
    SkeletonTrack::new(keyframes, FIGURE_BONES.to_vec(), thickness, geometry)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceEntry {
    pub name: String,
    pub seed: u64,
    pub events: usize,
    pub labels: usize,
    pub evt1: String,
    pub labels_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub seed: u64,
    pub width: u16,
    pub height: u16,
    pub duration_us: u64,
    pub config: SynthConfig,
    pub sequences: Vec<SequenceEntry>,
}

/// Sequence length used by [`gen_corpus`].
pub const CORPUS_DURATION_US: u64 = 200_000;

/// Writes `n` sequences (`seq_###.evt1` + `seq_###_labels.csv`) and a
/// `manifest.json` into `dir`. Output is a pure function of `seed` and `config`.
pub fn gen_corpus(
    n: usize,
    seed: u64,
    config: &SynthConfig,
    dir: impl AsRef<Path>,
) -> Result<CorpusManifest, SynthError> {
    if n == 0 {
        return Err(SynthError::BadConfig("need at least one sequence".into()));
    }
    config.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut sequences = Vec::with_capacity(n);
    for i in 0..n {
        let seq_seed: u64 = master.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(seq_seed);
        let track = random_figure(&mut rng, config.geometry, CORPUS_DURATION_US, 10_000)?;
        let cfg = SynthConfig {
            noise_seed: seq_seed,
            ..*config
        };
        let (window, labels) = gen_events(&track, &cfg)?;
        let name = format!("seq_{i:03}");
        let evt1 = format!("{name}.evt1");
        let labels_csv = format!("{name}_labels.csv");
        ingest::write_evt1(dir.join(&evt1), window.geometry(), window.events())?;
        let mut csv = Vec::new();
        labels.write_csv(&mut csv)?;
        fs::write(dir.join(&labels_csv), csv)?;
        sequences.push(SequenceEntry {
            name,
            seed: seq_seed,
            events: window.len(),
            labels: labels.len(),
            evt1,
            labels_csv,
        });
    }
    let manifest = CorpusManifest {
        format_version: 1,
        seed,
        width: config.geometry.width(),
        height: config.geometry.height(),
        duration_us: CORPUS_DURATION_US,
        config: *config,
        sequences,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Paths of one corpus sequence.
pub fn sequence_paths(dir: impl AsRef<Path>, entry: &SequenceEntry) -> (PathBuf, PathBuf) {
    (dir.as_ref().join(&entry.evt1), dir.as_ref().join(&entry.labels_csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            geometry: SensorGeometry::new(32, 24).unwrap(),
            frame_period_us: 100,
            ..SynthConfig::default()
        }
    }

    fn track(points: &[(u64, [[f64; 2]; 2])], thickness: f64) -> SkeletonTrack {
        let keyframes = points
            .iter()
            .map(|(t, p)| (*t, JointSet::from_points(p).unwrap()))
            .collect();
        SkeletonTrack::new(keyframes, vec![(0, 1)], thickness, small().geometry).unwrap()
    }

    #[test]
    fn empty_bone_list_is_background() {
        let kf = vec![(0, JointSet::from_points(&[[1.0, 1.0]]).unwrap())];
        let t = SkeletonTrack::new(kf, vec![], 1.0, small().geometry).unwrap();
        let f = render_intensity(&t, 0, &small()).unwrap();
        assert!(f.data.iter().all(|&v| v == small().background));
    }

    #[test]
    fn vertical_bone_is_a_column() {
        let t = track(&[(0, [[10.0, 5.0], [10.0, 20.0]])], 3.0);
        let f = render_intensity(&t, 0, &small()).unwrap();
        let fg = small().foreground;
        for y in 5..=20 {
            let row: Vec<usize> = (0..32).filter(|&x| f.get(x, y) == fg).collect();
            assert_eq!(row, vec![9, 10, 11], "row {y}");
        }
        assert!((0..32).all(|x| f.get(x, 2) != fg));
    }

    #[test]
    fn interpolation_hits_keyframes() {
        let t = track(&[(0, [[1.0, 1.0], [1.0, 5.0]]), (100, [[9.0, 1.0], [9.0, 5.0]])], 1.0);
        assert_eq!(t.pose_at(100).unwrap(), t.keyframes()[1].1);
        assert_eq!(t.pose_at(50).unwrap().joint(0), &[5.0, 1.0]);
        assert!(matches!(t.pose_at(101), Err(SynthError::OutOfSpan { .. })));
    }

    #[test]
    fn static_pose_emits_nothing() {
        let t = track(
            &[(0, [[5.0, 5.0], [20.0, 15.0]]), (1000, [[5.0, 5.0], [20.0, 15.0]])],
            3.0,
        );
        let (w, labels) = gen_events(&t, &small()).unwrap();
        assert!(w.is_empty());
        assert_eq!(labels.len(), 11);
        assert_eq!(labels.dt(), 100);
    }

    #[test]
    fn moving_dot_fires_on_entry_and_exit() {
        // a dot moving one pixel per frame along a row
        let keyframes = (0..6)
            .map(|k| (k * 100, JointSet::from_points(&[[4.0 + k as f64, 7.0]]).unwrap()))
            .collect();
        let t = SkeletonTrack::new(keyframes, vec![(0, 0)], 1.0, small().geometry).unwrap();
        let cfg = small();
        let (w, _) = gen_events(&t, &cfg).unwrap();
        let per_step = ((cfg.foreground / cfg.background).ln() / cfg.threshold).floor() as usize;
        assert_eq!(w.len(), 5 * 2 * per_step);
        for e in w.events() {
            assert_eq!(e.y, 7);
            let step = (e.t / 100) as u16; // frame interval index
            match e.p {
                Polarity::Positive => assert_eq!(e.x, 5 + step.min(4)),
                Polarity::Negative => assert_eq!(e.x, 4 + step.min(4)),
            }
        }
        let pos = w.events().iter().filter(|e| e.p == Polarity::Positive).count();
        assert_eq!(pos * 2, w.len());
    }

    #[test]
    fn degenerate_tracks() {
        let one = track(&[(0, [[1.0, 1.0], [2.0, 2.0]])], 1.0);
        assert!(matches!(
            gen_events(&one, &small()),
            Err(SynthError::DegenerateTrack(_))
        ));
        let short = track(&[(0, [[1.0, 1.0], [2.0, 2.0]]), (50, [[1.0, 1.0], [2.0, 2.0]])], 1.0);
        assert!(matches!(
            gen_events(&short, &small()),
            Err(SynthError::DegenerateTrack(_))
        ));
        let kf = vec![(0, JointSet::from_points(&[[40.0, 1.0]]).unwrap())];
        assert!(SkeletonTrack::new(kf, vec![], 1.0, small().geometry).is_err());
    }

    #[test]
    fn noise_adds_events_deterministically() {
        let t = track(
            &[(0, [[5.0, 5.0], [20.0, 15.0]]), (1000, [[5.0, 5.0], [20.0, 15.0]])],
            3.0,
        );
        let cfg = SynthConfig {
            noise_rate_hz: 2000.0,
            noise_seed: 3,
            ..small()
        };
        let (a, _) = gen_events(&t, &cfg).unwrap();
        let (b, _) = gen_events(&t, &cfg).unwrap();
        assert_eq!(a, b);
        // 2000 Hz * 768 px * 1 ms ~ 1536 events
        assert!((1400..1700).contains(&a.len()), "{}", a.len());
    }

    #[test]
    fn random_figure_stays_on_sensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = SensorGeometry::DAVIS346;
        let t = random_figure(&mut rng, g, 100_000, 10_000).unwrap();
        assert_eq!(t.keyframes().len(), 11);
        assert_eq!(t.keyframes()[0].1.joint_count(), 13);
    }
}
