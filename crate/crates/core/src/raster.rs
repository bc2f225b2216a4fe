//! Rasterized event point clouds.
//!
//! A window's span is cut into `K` equal half-open slices. All events that
//! share a pixel and a slice collapse into one point carrying their mean
//! timestamp, polarity sum and count. Mean timestamps are mapped from the
//! window span `[t_start, t_end)` onto `[0, 1)`.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::event::{Event, EventWindow, SensorGeometry};

/// Time slices per window.
pub const DEFAULT_SLICES: usize = 4;
/// Points per sampled cloud.
pub const DEFAULT_SAMPLE_POINTS: usize = 2048;

pub const RPC1_MAGIC: &[u8; 4] = b"RPC1";
const RPC1_HEADER_LEN: usize = 14;
const RPC1_POINT_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot rasterize an empty window")]
    EmptyWindow,
    #[error("slice count must be in 1..=65535, got {0}")]
    InvalidK(usize),
    #[error("cannot sample from an empty cloud")]
    EmptyCloud,
    #[error("sample size must be positive")]
    InvalidN,
    #[error("event ({x}, {y}) outside the sensor")]
    OutOfBounds { x: u16, y: u16 },
    #[error("event time {t} outside the buffered span [{start}, {end})")]
    OutOfSpan { t: u64, start: u64, end: u64 },
    #[error("bad magic {0:?}, expected RPC1")]
    BadMagic([u8; 4]),
    #[error("truncated RPC1 file")]
    Truncated,
    #[error("invalid RPC1 header")]
    BadHeader,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One condensed `(pixel, slice)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterPoint {
    pub x: u16,
    pub y: u16,
    /// Mean event time, normalized over the window span.
    pub t_avg: f32,
    /// Sum of polarities.
    pub p_acc: i32,
    /// Number of events.
    pub e_cnt: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterCloud {
    geometry: SensorGeometry,
    slices: usize,
    points: Vec<RasterPoint>,
}

impl RasterCloud {
    pub fn new(geometry: SensorGeometry, slices: usize, points: Vec<RasterPoint>) -> Result<Self, RasterError> {
        check_slices(slices)?;
        Ok(Self {
            geometry,
            slices,
            points,
        })
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn points(&self) -> &[RasterPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total number of events represented.
    pub fn event_count(&self) -> u64 {
        self.points.iter().map(|p| p.e_cnt as u64).sum()
    }

    /// `M x 5` row-major `(x, y, t_avg, p_acc, e_cnt)`.
    pub fn to_rows(&self) -> Vec<[f32; 5]> {
        self.points
            .iter()
            .map(|p| [p.x as f32, p.y as f32, p.t_avg, p.p_acc as f32, p.e_cnt as f32])
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let count = u32::try_from(self.points.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "too many points"))?;
        let mut buf = Vec::with_capacity(RPC1_HEADER_LEN + RPC1_POINT_LEN * self.points.len());
        buf.extend_from_slice(RPC1_MAGIC);
        buf.extend_from_slice(&self.geometry.width().to_le_bytes());
        buf.extend_from_slice(&self.geometry.height().to_le_bytes());
        buf.extend_from_slice(&(self.slices as u16).to_le_bytes());
        buf.extend_from_slice(&count.to_le_bytes());
        for p in &self.points {
            buf.extend_from_slice(&p.x.to_le_bytes());
            buf.extend_from_slice(&p.y.to_le_bytes());
            buf.extend_from_slice(&p.t_avg.to_le_bytes());
            buf.extend_from_slice(&p.p_acc.to_le_bytes());
            buf.extend_from_slice(&p.e_cnt.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, RasterError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RasterError> {
        if bytes.len() < RPC1_HEADER_LEN {
            return Err(RasterError::Truncated);
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != RPC1_MAGIC {
            return Err(RasterError::BadMagic(magic));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let geometry = SensorGeometry::new(u16_at(4), u16_at(6)).map_err(|_| RasterError::BadHeader)?;
        let slices = u16_at(8) as usize;
        let count = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let payload = &bytes[RPC1_HEADER_LEN..];
        if payload.len() != count * RPC1_POINT_LEN {
            return Err(RasterError::Truncated);
        }
        let points = payload
            .chunks_exact(RPC1_POINT_LEN)
            .map(|c| RasterPoint {
                x: u16::from_le_bytes([c[0], c[1]]),
                y: u16::from_le_bytes([c[2], c[3]]),
                t_avg: f32::from_le_bytes(c[4..8].try_into().unwrap()),
                p_acc: i32::from_le_bytes(c[8..12].try_into().unwrap()),
                e_cnt: u32::from_le_bytes(c[12..16].try_into().unwrap()),
            })
            .collect();
        Self::new(geometry, slices, points)
    }
}

fn check_slices(k: usize) -> Result<(), RasterError> {
    if k == 0 || k > u16::MAX as usize {
        Err(RasterError::InvalidK(k))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CellAcc {
    sum_t: u128,
    sum_p: i64,
    count: u32,
}

impl CellAcc {
    #[inline]
    fn push(&mut self, t_rel: u64, p: i32) {
        self.sum_t += t_rel as u128;
        self.sum_p += p as i64;
        self.count += 1;
    }

    fn merge(&mut self, other: &CellAcc) {
        self.sum_t += other.sum_t;
        self.sum_p += other.sum_p;
        self.count += other.count;
    }
}

/// Maps cells to keys ordered by `(slice, y, x)`.
#[derive(Debug, Clone, Copy)]
struct CellLayout {
    width: u64,
    height: u64,
    slices: u64,
    t_start: u64,
    span: u64,
}

impl CellLayout {
    #[inline]
    fn slice_of(&self, t: u64) -> u64 {
        let rel = (t - self.t_start) as u128;
        ((rel * self.slices as u128 / self.span as u128) as u64).min(self.slices - 1)
    }

    #[inline]
    fn key(&self, e: &Event) -> u64 {
        (self.slice_of(e.t) * self.height + e.y as u64) * self.width + e.x as u64
    }

    fn point(&self, key: u64, acc: &CellAcc) -> RasterPoint {
        let x = (key % self.width) as u16;
        let y = (key / self.width % self.height) as u16;
        let mean_rel = acc.sum_t as f64 / acc.count as f64;
        RasterPoint {
            x,
            y,
            t_avg: (mean_rel / self.span as f64) as f32,
            p_acc: acc.sum_p as i32,
            e_cnt: acc.count,
        }
    }
}

/// Condenses a window into one point per active `(pixel, slice)` cell.
///
/// Points come out ordered by slice, then row, then column.
pub fn rasterize(window: &EventWindow, slices: usize) -> Result<RasterCloud, RasterError> {
    check_slices(slices)?;
    if window.is_empty() {
        return Err(RasterError::EmptyWindow);
    }
    let geometry = window.geometry();
    let layout = CellLayout {
        width: geometry.width() as u64,
        height: geometry.height() as u64,
        slices: slices as u64,
        t_start: window.t_start(),
        span: window.duration().max(1),
    };
    let mut keyed: Vec<(u64, u64, i32)> = window
        .events()
        .iter()
        .map(|e| (layout.key(e), e.t - layout.t_start, e.p.sign()))
        .collect();
    keyed.sort_unstable_by_key(|k| k.0);

    let mut points = Vec::new();
    let mut iter = keyed.iter().peekable();
    while let Some(&(key, t_rel, p)) = iter.next() {
        let mut acc = CellAcc::default();
        acc.push(t_rel, p);
        while let Some(&&(k, t_rel, p)) = iter.peek() {
            if k != key {
                break;
            }
            acc.push(t_rel, p);
            iter.next();
        }
        points.push(layout.point(key, &acc));
    }
    RasterCloud::new(geometry, slices, points)
}

/// Incremental rasterizer over a fixed span `[t_start, t_start + duration)`.
///
/// Per-cell sums are updated in time proportional to the new events, and a
/// snapshot equals [`rasterize`] over the same events and span.
#[derive(Debug, Clone)]
pub struct RasterStream {
    geometry: SensorGeometry,
    layout: CellLayout,
    cells: HashMap<u64, CellAcc>,
    events: u64,
}

impl RasterStream {
    pub fn new(geometry: SensorGeometry, slices: usize, t_start: u64, duration: u64) -> Result<Self, RasterError> {
        check_slices(slices)?;
        if duration == 0 {
            return Err(RasterError::OutOfSpan {
                t: t_start,
                start: t_start,
                end: t_start,
            });
        }
        Ok(Self {
            geometry,
            layout: CellLayout {
                width: geometry.width() as u64,
                height: geometry.height() as u64,
                slices: slices as u64,
                t_start,
                span: duration,
            },
            cells: HashMap::new(),
            events: 0,
        })
    }

    pub fn t_start(&self) -> u64 {
        self.layout.t_start
    }

    pub fn t_end(&self) -> u64 {
        self.layout.t_start + self.layout.span
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    /// Adds a batch. The batch is checked first and rejected as a whole.
    pub fn update(&mut self, events: &[Event]) -> Result<(), RasterError> {
        let (start, end) = (self.t_start(), self.t_end());
        for e in events {
            if !self.geometry.contains(e.x as u32, e.y as u32) {
                return Err(RasterError::OutOfBounds { x: e.x, y: e.y });
            }
            if e.t < start || e.t >= end {
                return Err(RasterError::OutOfSpan { t: e.t, start, end });
            }
        }
        for e in events {
            self.cells
                .entry(self.layout.key(e))
                .or_default()
                .push(e.t - start, e.p.sign());
        }
        self.events += events.len() as u64;
        Ok(())
    }

    /// Folds another stream over the same span into this one.
    pub fn merge(&mut self, other: &RasterStream) {
        debug_assert_eq!(self.t_start(), other.t_start());
        for (k, acc) in &other.cells {
            self.cells.entry(*k).or_default().merge(acc);
        }
        self.events += other.events;
    }

    /// Clears the buffer and moves it to a new span of the same length.
    pub fn reset(&mut self, t_start: u64) {
        self.cells.clear();
        self.events = 0;
        self.layout.t_start = t_start;
    }

    pub fn snapshot(&self) -> RasterCloud {
        let mut keys: Vec<u64> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        let points = keys
            .into_iter()
            .map(|k| self.layout.point(k, &self.cells[&k]))
            .collect();
        RasterCloud {
            geometry: self.geometry,
            slices: self.layout.slices as usize,
            points,
        }
    }
}

/// Draws exactly `n` points, deterministically for a given seed.
///
/// Clouds with at least `n` points are subsampled without replacement.
/// Smaller clouds keep every point and are topped up with uniform draws
/// with replacement, then shuffled.
pub fn sample_fixed(cloud: &RasterCloud, n: usize, seed: u64) -> Result<RasterCloud, RasterError> {
    if cloud.is_empty() {
        return Err(RasterError::EmptyCloud);
    }
    if n == 0 {
        return Err(RasterError::InvalidN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = cloud.points.len();
    let points = if len >= n {
        index::sample(&mut rng, len, n)
            .into_iter()
            .map(|i| cloud.points[i])
            .collect()
    } else {
        let mut out = cloud.points.clone();
        out.extend((len..n).map(|_| cloud.points[rng.gen_range(0..len)]));
        out.shuffle(&mut rng);
        out
    };
    Ok(RasterCloud {
        geometry: cloud.geometry,
        slices: cloud.slices,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Polarity;
    use proptest::prelude::*;

    fn ev(x: u16, y: u16, t: u64, p: i64) -> Event {
        Event::new(x, y, t, Polarity::from_signed(p).unwrap())
    }

    fn geom() -> SensorGeometry {
        SensorGeometry::new(8, 8).unwrap()
    }

    #[test]
    fn worked_example() {
        let events = vec![ev(3, 4, 50, 1), ev(3, 4, 80, -1), ev(3, 4, 99, 1), ev(5, 5, 350, 1)];
        let w = EventWindow::new(geom(), events, 0, 400).unwrap();
        let cloud = rasterize(&w, 4).unwrap();
        assert_eq!(cloud.len(), 2);
        let a = cloud.points()[0];
        assert_eq!((a.x, a.y, a.p_acc, a.e_cnt), (3, 4, 1, 3));
        assert!((a.t_avg as f64 - 229.0 / 3.0 / 400.0).abs() < 1e-7);
        assert!((a.t_avg - 0.1908).abs() < 1e-4);
        let b = cloud.points()[1];
        assert_eq!((b.x, b.y, b.t_avg, b.p_acc, b.e_cnt), (5, 5, 0.875, 1, 1));
    }

    #[test]
    fn single_event() {
        let w = EventWindow::spanning(geom(), vec![ev(0, 0, 7, 1)]).unwrap();
        let cloud = rasterize(&w, DEFAULT_SLICES).unwrap();
        assert_eq!(
            cloud.points(),
            &[RasterPoint {
                x: 0,
                y: 0,
                t_avg: 0.0,
                p_acc: 1,
                e_cnt: 1
            }]
        );
    }

    #[test]
    fn defaults() {
        assert_eq!(DEFAULT_SLICES, 4);
        assert_eq!(DEFAULT_SAMPLE_POINTS, 2048);
    }

    #[test]
    fn errors() {
        let empty = EventWindow::new(geom(), vec![], 0, 10).unwrap();
        assert!(matches!(rasterize(&empty, 4), Err(RasterError::EmptyWindow)));
        let w = EventWindow::spanning(geom(), vec![ev(0, 0, 7, 1)]).unwrap();
        assert!(matches!(rasterize(&w, 0), Err(RasterError::InvalidK(0))));
        let cloud = rasterize(&w, 1).unwrap();
        assert!(matches!(sample_fixed(&cloud, 0, 1), Err(RasterError::InvalidN)));
        let none = RasterCloud::new(geom(), 1, vec![]).unwrap();
        assert!(matches!(sample_fixed(&none, 3, 1), Err(RasterError::EmptyCloud)));
    }

    #[test]
    fn same_pixel_different_slices_stay_separate() {
        let events = vec![ev(1, 1, 0, 1), ev(1, 1, 99, -1), ev(1, 1, 100, -1), ev(1, 1, 399, 1)];
        let w = EventWindow::new(geom(), events, 0, 400).unwrap();
        let cloud = rasterize(&w, 4).unwrap();
        let counts: Vec<_> = cloud.points().iter().map(|p| (p.e_cnt, p.p_acc)).collect();
        assert_eq!(counts, vec![(2, 0), (1, -1), (1, 1)]);
        assert!(cloud.points().windows(2).all(|w| w[0].t_avg <= w[1].t_avg));
    }

    fn sample_cloud(n: usize) -> RasterCloud {
        let points = (0..n)
            .map(|i| RasterPoint {
                x: i as u16,
                y: 0,
                t_avg: 0.0,
                p_acc: 1,
                e_cnt: 1,
            })
            .collect();
        RasterCloud::new(SensorGeometry::new(64, 1).unwrap(), 1, points).unwrap()
    }

    #[test]
    fn sampling_identity_multiset() {
        let cloud = sample_cloud(10);
        let s = sample_fixed(&cloud, 10, 3).unwrap();
        let mut xs: Vec<_> = s.points().iter().map(|p| p.x).collect();
        xs.sort_unstable();
        assert_eq!(xs, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_pads_with_duplicates() {
        let cloud = sample_cloud(3);
        let s = sample_fixed(&cloud, 5, 11).unwrap();
        assert_eq!(s.len(), 5);
        let mut counts = [0usize; 3];
        for p in s.points() {
            counts[p.x as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c >= 1));
        assert_eq!(counts.iter().map(|c| c - 1).sum::<usize>(), 2);
    }

    #[test]
    fn sampling_without_replacement_has_no_duplicates() {
        let cloud = sample_cloud(50);
        let s = sample_fixed(&cloud, 20, 5).unwrap();
        let mut xs: Vec<_> = s.points().iter().map(|p| p.x).collect();
        xs.sort_unstable();
        xs.dedup();
        assert_eq!(xs.len(), 20);
    }

    #[test]
    fn sampling_is_seeded() {
        let cloud = sample_cloud(50);
        assert_eq!(
            sample_fixed(&cloud, 20, 9).unwrap(),
            sample_fixed(&cloud, 20, 9).unwrap()
        );
        assert_ne!(
            sample_fixed(&cloud, 20, 9).unwrap(),
            sample_fixed(&cloud, 20, 10).unwrap()
        );
    }

    #[test]
    fn rpc1_layout_and_errors() {
        let w = EventWindow::new(geom(), vec![ev(3, 4, 50, -1)], 0, 100).unwrap();
        let bytes = rasterize(&w, 4).unwrap().to_bytes();
        assert_eq!(&bytes[..14], b"RPC1\x08\x00\x08\x00\x04\x00\x01\x00\x00\x00");
        assert_eq!(bytes.len(), 14 + 16);
        assert_eq!(&bytes[14..18], &[3, 0, 4, 0]);
        assert_eq!(&bytes[18..22], &0.5f32.to_le_bytes());
        assert_eq!(&bytes[22..26], &(-1i32).to_le_bytes());
        assert_eq!(&bytes[26..30], &1u32.to_le_bytes());

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(RasterCloud::from_bytes(&bad), Err(RasterError::BadMagic(_))));
        assert!(matches!(
            RasterCloud::from_bytes(&bytes[..20]),
            Err(RasterError::Truncated)
        ));
    }

    #[test]
    fn stream_rejects_and_keeps_state() {
        let mut s = RasterStream::new(geom(), 4, 100, 100).unwrap();
        s.update(&[ev(1, 1, 150, 1)]).unwrap();
        let before = s.snapshot();
        assert!(matches!(
            s.update(&[ev(2, 2, 160, 1), ev(9, 0, 170, 1)]),
            Err(RasterError::OutOfBounds { x: 9, .. })
        ));
        assert!(matches!(
            s.update(&[ev(1, 1, 200, 1)]),
            Err(RasterError::OutOfSpan { .. })
        ));
        assert!(matches!(
            s.update(&[ev(1, 1, 99, 1)]),
            Err(RasterError::OutOfSpan { .. })
        ));
        s.update(&[]).unwrap();
        assert_eq!(s.snapshot(), before);
        assert_eq!(s.event_count(), 1);
        s.reset(200);
        assert!(s.snapshot().is_empty());
        s.update(&[ev(1, 1, 299, 1)]).unwrap();
        assert_eq!(s.snapshot().points()[0].t_avg, 0.99);
    }

    #[test]
    fn stream_merge_matches_single_stream() {
        let events: Vec<Event> = (0..200)
            .map(|i| {
                ev(
                    (i % 8) as u16,
                    (i / 8 % 8) as u16,
                    i * 3,
                    if i % 3 == 0 { 1 } else { -1 },
                )
            })
            .collect();
        let mut whole = RasterStream::new(geom(), 4, 0, 600).unwrap();
        whole.update(&events).unwrap();
        let mut a = RasterStream::new(geom(), 4, 0, 600).unwrap();
        let mut b = a.clone();
        a.update(&events[..77]).unwrap();
        b.update(&events[77..]).unwrap();
        a.merge(&b);
        assert_eq!(a.snapshot(), whole.snapshot());
    }

    fn window_strategy() -> impl Strategy<Value = EventWindow> {
        (
            1u64..5000,
            prop::collection::vec((0u16..8, 0u16..8, 0u64..5000, any::<bool>()), 1..300),
        )
            .prop_map(|(extra, raw)| {
                let mut events: Vec<Event> = raw
                    .into_iter()
                    .map(|(x, y, t, p)| ev(x, y, t, if p { 1 } else { -1 }))
                    .collect();
                events.sort_by_key(|e| e.t);
                let last = events.last().unwrap().t;
                EventWindow::new(geom(), events, 0, last + extra).unwrap()
            })
    }

    proptest! {
        #[test]
        fn conservation_and_bounds(w in window_strategy(), k in 1usize..9) {
            let cloud = rasterize(&w, k).unwrap();
            prop_assert_eq!(cloud.event_count(), w.len() as u64);
            let mut pixels: Vec<_> = w.events().iter().map(|e| (e.x, e.y)).collect();
            pixels.sort_unstable();
            pixels.dedup();
            prop_assert!(cloud.len() <= w.len().min(k * pixels.len()));
            for p in cloud.points() {
                prop_assert!(p.e_cnt >= 1);
                prop_assert!(p.p_acc.unsigned_abs() <= p.e_cnt);
                prop_assert_eq!((p.p_acc - p.e_cnt as i32).rem_euclid(2), 0);
                prop_assert!((0.0..=1.0).contains(&p.t_avg));
            }
        }

        #[test]
        fn rpc1_round_trip(w in window_strategy(), k in 1usize..6) {
            let cloud = rasterize(&w, k).unwrap();
            prop_assert_eq!(RasterCloud::from_bytes(&cloud.to_bytes()).unwrap(), cloud);
        }

        #[test]
        fn streaming_equals_batch(w in window_strategy(), k in 1usize..6, cut in any::<prop::sample::Index>()) {
            let mut s = RasterStream::new(w.geometry(), k, w.t_start(), w.duration()).unwrap();
            let split = cut.index(w.len() + 1);
            s.update(&w.events()[..split]).unwrap();
            s.update(&w.events()[split..]).unwrap();
            prop_assert_eq!(s.snapshot(), rasterize(&w, k).unwrap());
        }

        #[test]
        fn sample_size_is_exact(n_points in 1usize..64, n in 1usize..128, seed in any::<u64>()) {
            let s = sample_fixed(&sample_cloud(n_points), n, seed).unwrap();
            prop_assert_eq!(s.len(), n);
        }
    }
}
