//! Decoupled event voxels: the event stream is binned into an `H x W x T`
//! grid and only its three axis projections are kept.
//!
//! * `hw`: `C x H x W` (summed over time; the classic event frame)
//! * `th`: `C x T x H` (summed over columns)
//! * `wt`: `C x W x T` (summed over rows)
//!
//! Storage is `C(HW + TH + WT)` instead of `C*H*W*T`. [`voxelize_dense`]
//! builds the full grid and exists to check the projections.

use std::fmt;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::event::{Event, EventWindow, SensorGeometry};
use crate::tensor::{FeatureTensor, Ten1, TensorError};

/// Default bins per axis.
pub const DEFAULT_BINS: usize = 64;
/// Cell budget for [`voxelize_dense`].
pub const DEFAULT_DENSE_CAP: usize = 1 << 24;

pub const DEV1_MAGIC: &[u8; 4] = b"DEV1";

#[derive(Debug, Error)]
pub enum DevoxError {
    #[error("cannot project an empty window")]
    EmptyWindow,
    #[error("bad voxel dims {0:?}")]
    BadDims([usize; 3]),
    #[error("time {t} outside span [{start}, {end})")]
    OutOfSpan { t: f64, start: u64, end: u64 },
    #[error("position ({x}, {y}) outside the sensor")]
    OutOfBounds { x: f64, y: f64 },
    #[error("dense grid of {cells} cells exceeds the cap of {cap}")]
    CapExceeded { cells: usize, cap: usize },
    #[error("unknown DEV mode code {0}")]
    BadMode(u8),
    #[error("bad magic {0:?}, expected DEV1")]
    BadMagic([u8; 4]),
    #[error("malformed DEV1 container: {0}")]
    Malformed(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Grid resolution as `(H, W, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VoxelDims {
    pub h: usize,
    pub w: usize,
    pub t: usize,
}

impl VoxelDims {
    pub fn new(h: usize, w: usize, t: usize) -> Result<Self, DevoxError> {
        if h == 0 || w == 0 || t == 0 || h > u32::MAX as usize || w > u32::MAX as usize || t > u32::MAX as usize {
            return Err(DevoxError::BadDims([h, w, t]));
        }
        Ok(Self { h, w, t })
    }

    /// `T = H = W = n`.
    pub fn cube(n: usize) -> Result<Self, DevoxError> {
        Self::new(n, n, n)
    }

    pub fn cells(&self) -> usize {
        self.h * self.w * self.t
    }
}

impl fmt::Display for VoxelDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.t)
    }
}

impl Default for VoxelDims {
    fn default() -> Self {
        Self {
            h: DEFAULT_BINS,
            w: DEFAULT_BINS,
            t: DEFAULT_BINS,
        }
    }
}

/// What each event adds to the planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DevMode {
    /// `+1` to a single channel.
    Count,
    /// `+p` to a single channel.
    PolaritySum,
    /// `+1` to channel 0 for positive events, channel 1 for negative.
    #[default]
    TwoChannel,
}

impl DevMode {
    pub fn channels(self) -> usize {
        match self {
            DevMode::Count | DevMode::PolaritySum => 1,
            DevMode::TwoChannel => 2,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DevMode::Count => 0,
            DevMode::PolaritySum => 1,
            DevMode::TwoChannel => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, DevoxError> {
        match code {
            0 => Ok(DevMode::Count),
            1 => Ok(DevMode::PolaritySum),
            2 => Ok(DevMode::TwoChannel),
            other => Err(DevoxError::BadMode(other)),
        }
    }

    /// `(channel, value)` contributed by one event.
    #[inline]
    fn contribution(self, e: &Event) -> (usize, f32) {
        match self {
            DevMode::Count => (0, 1.0),
            DevMode::PolaritySum => (0, e.p.sign() as f32),
            DevMode::TwoChannel => (usize::from(!e.p.is_positive()), 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelCoord {
    pub h: usize,
    pub w: usize,
    pub t: usize,
}

/// Maps an event onto its voxel. Bins are `floor(value * bins / extent)`.
pub fn quantize(
    event: &Event,
    geometry: SensorGeometry,
    dims: VoxelDims,
    t_start: u64,
    t_end: u64,
) -> Result<VoxelCoord, DevoxError> {
    if event.t < t_start || event.t >= t_end {
        return Err(DevoxError::OutOfSpan {
            t: event.t as f64,
            start: t_start,
            end: t_end,
        });
    }
    if !geometry.contains(event.x as u32, event.y as u32) {
        return Err(DevoxError::OutOfBounds {
            x: event.x as f64,
            y: event.y as f64,
        });
    }
    Ok(Binner::new(geometry, dims, t_start, t_end).coord(event))
}

#[derive(Debug, Clone, Copy)]
struct Binner {
    dims: VoxelDims,
    width: u64,
    height: u64,
    t_start: u64,
    span: u64,
}

impl Binner {
    fn new(geometry: SensorGeometry, dims: VoxelDims, t_start: u64, t_end: u64) -> Self {
        Self {
            dims,
            width: geometry.width() as u64,
            height: geometry.height() as u64,
            t_start,
            span: (t_end - t_start).max(1),
        }
    }

    #[inline]
    fn coord(&self, e: &Event) -> VoxelCoord {
        let h = (e.y as u64 * self.dims.h as u64 / self.height) as usize;
        let w = (e.x as u64 * self.dims.w as u64 / self.width) as usize;
        let rel = (e.t - self.t_start) as u128;
        let t = (rel * self.dims.t as u128 / self.span as u128) as usize;
        VoxelCoord {
            h: h.min(self.dims.h - 1),
            w: w.min(self.dims.w - 1),
            t: t.min(self.dims.t - 1),
        }
    }
}

/// The three orthogonal projections of an event voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DevPlanes {
    pub mode: DevMode,
    /// `C x H x W`
    pub hw: FeatureTensor,
    /// `C x T x H`
    pub th: FeatureTensor,
    /// `C x W x T`
    pub wt: FeatureTensor,
}

impl DevPlanes {
    pub fn dims(&self) -> VoxelDims {
        let [_, h, w] = self.hw.shape();
        VoxelDims {
            h,
            w,
            t: self.th.shape()[1],
        }
    }

    pub fn channels(&self) -> usize {
        self.hw.channels()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), DevoxError> {
        w.write_all(DEV1_MAGIC)?;
        w.write_all(&[self.mode.code()])?;
        for plane in [&self.hw, &self.th, &self.wt] {
            let blob = plane.to_ten1().to_bytes();
            let len = u32::try_from(blob.len()).map_err(|_| DevoxError::Malformed("plane exceeds 4 GiB".into()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(&blob)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, DevoxError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DevoxError> {
        if bytes.len() < 5 {
            return Err(DevoxError::Malformed("short header".into()));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != DEV1_MAGIC {
            return Err(DevoxError::BadMagic(magic));
        }
        let mode = DevMode::from_code(bytes[4])?;
        let mut rest = &bytes[5..];
        let mut planes = Vec::with_capacity(3);
        for name in ["hw", "th", "wt"] {
            if rest.len() < 4 {
                return Err(DevoxError::Malformed(format!("missing {name} length")));
            }
            let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(DevoxError::Malformed(format!("truncated {name} plane")));
            }
            planes.push(Ten1::from_bytes(&rest[..len])?.into_feature()?);
            rest = &rest[len..];
        }
        if !rest.is_empty() {
            return Err(DevoxError::Malformed("trailing bytes".into()));
        }
        let wt = planes.pop().unwrap();
        let th = planes.pop().unwrap();
        let hw = planes.pop().unwrap();
        let [c, h, w] = hw.shape();
        let t = th.shape()[1];
        if c != mode.channels() || th.shape() != [c, t, h] || wt.shape() != [c, w, t] {
            return Err(DevoxError::Malformed(format!(
                "inconsistent plane shapes {:?} {:?} {:?}",
                hw.shape(),
                th.shape(),
                wt.shape()
            )));
        }
        Ok(Self { mode, hw, th, wt })
    }
}

/// Projects a window onto the three planes without building the voxel grid.
pub fn project_dev(window: &EventWindow, dims: VoxelDims, mode: DevMode) -> Result<DevPlanes, DevoxError> {
    if window.is_empty() {
        return Err(DevoxError::EmptyWindow);
    }
    let c = mode.channels();
    let binner = Binner::new(window.geometry(), dims, window.t_start(), window.t_end());
    let mut hw = FeatureTensor::zeros(c, dims.h, dims.w);
    let mut th = FeatureTensor::zeros(c, dims.t, dims.h);
    let mut wt = FeatureTensor::zeros(c, dims.w, dims.t);
    for e in window.events() {
        let v = binner.coord(e);
        let (ch, val) = mode.contribution(e);
        hw.add(ch, v.h, v.w, val);
        th.add(ch, v.t, v.h, val);
        wt.add(ch, v.w, v.t, val);
    }
    Ok(DevPlanes { mode, hw, th, wt })
}

/// Dense `H x W x T x C` accumulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: VoxelDims,
    channels: usize,
    data: Vec<f32>,
}

impl VoxelGrid {
    pub fn dims(&self) -> VoxelDims {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    fn index(&self, h: usize, w: usize, t: usize, c: usize) -> usize {
        ((h * self.dims.w + w) * self.dims.t + t) * self.channels + c
    }

    pub fn get(&self, h: usize, w: usize, t: usize, c: usize) -> f32 {
        self.data[self.index(h, w, t, c)]
    }

    /// Sums the grid along each axis, yielding planes laid out like [`DevPlanes`].
    pub fn axis_sums(&self, mode: DevMode) -> DevPlanes {
        let VoxelDims { h: hn, w: wn, t: tn } = self.dims;
        let c = self.channels;
        let mut hw = FeatureTensor::zeros(c, hn, wn);
        let mut th = FeatureTensor::zeros(c, tn, hn);
        let mut wt = FeatureTensor::zeros(c, wn, tn);
        for h in 0..hn {
            for w in 0..wn {
                for t in 0..tn {
                    for ch in 0..c {
                        let v = self.get(h, w, t, ch);
                        if v != 0.0 {
                            hw.add(ch, h, w, v);
                            th.add(ch, t, h, v);
                            wt.add(ch, w, t, v);
                        }
                    }
                }
            }
        }
        DevPlanes { mode, hw, th, wt }
    }
}

/// Builds the full voxel grid, refusing grids larger than `cap` cells.
pub fn voxelize_dense(
    window: &EventWindow,
    dims: VoxelDims,
    mode: DevMode,
    cap: usize,
) -> Result<VoxelGrid, DevoxError> {
    let channels = mode.channels();
    let cells = dims
        .h
        .checked_mul(dims.w)
        .and_then(|v| v.checked_mul(dims.t))
        .and_then(|v| v.checked_mul(channels))
        .unwrap_or(usize::MAX);
    if cells > cap {
        return Err(DevoxError::CapExceeded { cells, cap });
    }
    let mut grid = VoxelGrid {
        dims,
        channels,
        data: vec![0.0; cells],
    };
    let binner = Binner::new(window.geometry(), dims, window.t_start(), window.t_end());
    for e in window.events() {
        let v = binner.coord(e);
        let (ch, val) = mode.contribution(e);
        let i = grid.index(v.h, v.w, v.t, ch);
        grid.data[i] += val;
    }
    Ok(grid)
}

/// Features read from the three planes for one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct TriPlaneSample {
    pub hw: Vec<f32>,
    pub th: Vec<f32>,
    pub wt: Vec<f32>,
}

/// Index of the bin whose center is nearest to `pos`, where bin `i` covers
/// `[i, i + 1) * extent / bins`. Equidistant positions pick the lower bin.
fn nearest_bin(pos: f64, extent: f64, bins: usize) -> usize {
    let u = pos * bins as f64 / extent;
    let i = (u - 1.0).ceil();
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(bins - 1)
    }
}

/// Nearest-neighbour lookup of a continuous `(x, y, tau)` query in all three
/// planes. `x`, `y` are sensor pixels and `tau` is in microseconds.
pub fn sample_dev(
    planes: &DevPlanes,
    query: (f64, f64, f64),
    geometry: SensorGeometry,
    span: (u64, u64),
) -> Result<TriPlaneSample, DevoxError> {
    let (x, y, tau) = query;
    let (t_start, t_end) = span;
    let (width, height) = (geometry.width() as f64, geometry.height() as f64);
    if !(0.0..=width).contains(&x) || !(0.0..=height).contains(&y) {
        return Err(DevoxError::OutOfBounds { x, y });
    }
    if !(tau >= t_start as f64 && tau <= t_end as f64) || t_end <= t_start {
        return Err(DevoxError::OutOfSpan {
            t: tau,
            start: t_start,
            end: t_end,
        });
    }
    let dims = planes.dims();
    let h = nearest_bin(y, height, dims.h);
    let w = nearest_bin(x, width, dims.w);
    let t = nearest_bin(tau - t_start as f64, (t_end - t_start) as f64, dims.t);
    let c = planes.channels();
    Ok(TriPlaneSample {
        hw: (0..c).map(|ch| planes.hw.get(ch, h, w)).collect(),
        th: (0..c).map(|ch| planes.th.get(ch, t, h)).collect(),
        wt: (0..c).map(|ch| planes.wt.get(ch, w, t)).collect(),
    })
}

/// Cell counts of the plane and full-grid representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageCost {
    pub dev_cells: u64,
    pub voxel_cells: u64,
    pub ratio: f64,
}

pub fn storage_cost(dims: VoxelDims, channels: usize) -> StorageCost {
    let (h, w, t, c) = (dims.h as u64, dims.w as u64, dims.t as u64, channels as u64);
    let dev_cells = c * (h * w + t * h + w * t);
    let voxel_cells = c * h * w * t;
    StorageCost {
        dev_cells,
        voxel_cells,
        ratio: dev_cells as f64 / voxel_cells as f64,
    }
}
