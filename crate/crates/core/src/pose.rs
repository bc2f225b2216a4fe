//! Joint label codecs and the MPJPE metric.
//!
//! Two label representations are provided: a pair of 1D Gaussian heat-vectors
//! over the sensor axes (decoded by per-axis argmax), and a 2D Gaussian
//! heatmap (decoded by argmax over the grid).

use std::io::Read;

use thiserror::Error;

/// Default heat-vector Gaussian width, in sensor pixels.
pub const SIMDR_SIGMA: f64 = 8.0;
/// Default heatmap Gaussian width, in heatmap pixels.
pub const HEATMAP_SIGMA: f64 = 2.0;
/// Default heatmap side length.
pub const HEATMAP_SIZE: usize = 64;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("axis length {0} is too short, need at least 2")]
    BadAxisLength(usize),
    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("coordinate {value} outside [0, {limit})")]
    OutOfRange { value: f64, limit: usize },
    #[error("cannot decode an empty vector")]
    EmptyVector,
    #[error("joint set shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid joint set: {0}")]
    Invalid(String),
    #[error("joint csv header must be `joint_id,u,v[,w]`, got `{0}`")]
    BadHeader(String),
    #[error("joint csv line {line}: {msg}")]
    ParseError { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `J` joints with `dim` (2 or 3) coordinates each, stored joint-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl JointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self, PoseError> {
        if dim != 2 && dim != 3 {
            return Err(PoseError::Invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(PoseError::Invalid(format!(
                "{} coordinates cannot form {dim}D joints",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(PoseError::Invalid("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self, PoseError> {
        Self::new(D, points.iter().flatten().copied().collect())
    }

    pub fn joint_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn joint(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn joints(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn same_shape(&self, other: &JointSet) -> bool {
        self.dim == other.dim && self.coords.len() == other.coords.len()
    }

    /// Applies `f` to every coordinate.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> JointSet {
        JointSet {
            dim: self.dim,
            coords: self.coords.iter().map(|&c| f(c)).collect(),
        }
    }

    /// Coordinate-wise arithmetic mean of equally shaped sets.
    pub fn mean<'a>(sets: impl IntoIterator<Item = &'a JointSet>) -> Option<JointSet> {
        let mut iter = sets.into_iter();
        let first = iter.next()?;
        let mut sum = first.coords.clone();
        let mut n = 1usize;
        for s in iter {
            debug_assert!(s.same_shape(first));
            for (acc, c) in sum.iter_mut().zip(&s.coords) {
                *acc += c;
            }
            n += 1;
        }
        for acc in &mut sum {
            *acc /= n as f64;
        }
        Some(JointSet {
            dim: first.dim,
            coords: sum,
        })
    }

    /// Linear interpolation `self + (other - self) * alpha`.
    pub fn lerp(&self, other: &JointSet, alpha: f64) -> JointSet {
        JointSet {
            dim: self.dim,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + (b - a) * alpha)
                .collect(),
        }
    }

    /// Parses a `joint_id,u,v[,w]` CSV; rows may come in any joint order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, PoseError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| PoseError::BadHeader(e.to_string()))?.clone();
        let names: Vec<&str> = header.iter().collect();
        let dim = match names[..] {
            ["joint_id", "u", "v"] => 2,
            ["joint_id", "u", "v", "w"] => 3,
            _ => return Err(PoseError::BadHeader(names.join(","))),
        };
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| PoseError::ParseError {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let err = |msg: String| PoseError::ParseError { line, msg };
            if record.len() != dim + 1 {
                return Err(err(format!("expected {} fields, got {}", dim + 1, record.len())));
            }
            let id: usize = record[0].parse().map_err(|e| err(format!("joint_id: {e}")))?;
            let mut c = Vec::with_capacity(dim);
            for field in record.iter().skip(1) {
                c.push(field.parse::<f64>().map_err(|e| err(format!("{field}: {e}")))?);
            }
            rows.push((id, c));
        }
        rows.sort_by_key(|r| r.0);
        for (expect, (id, _)) in rows.iter().enumerate() {
            if *id != expect {
                return Err(PoseError::Invalid(format!(
                    "joint ids must be 0..J without gaps, found {id} at position {expect}"
                )));
            }
        }
        Self::new(dim, rows.into_iter().flat_map(|r| r.1).collect())
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{}",
            if self.dim == 2 {
                "joint_id,u,v"
            } else {
                "joint_id,u,v,w"
            }
        )?;
        for (j, c) in self.joints().enumerate() {
            write!(w, "{j}")?;
            for v in c {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<(), PoseError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(PoseError::BadSigma(sigma))
    }
}

/// Encodes one coordinate as a min-max normalized Gaussian heat-vector of length `len`.
///
/// The Gaussian is evaluated at integer positions. Its constant prefactor is
/// dropped because min-max normalization cancels it.
pub fn simdr_encode(coord: f64, len: usize, sigma: f64) -> Result<Vec<f32>, PoseError> {
    if len < 2 {
        return Err(PoseError::BadAxisLength(len));
    }
    check_sigma(sigma)?;
    if !(coord >= 0.0 && coord < len as f64) {
        return Err(PoseError::OutOfRange {
            value: coord,
            limit: len,
        });
    }
    let denom = 2.0 * sigma * sigma;
    let g: Vec<f64> = (0..len)
        .map(|i| {
            let d = i as f64 - coord;
            (-d * d / denom).exp()
        })
        .collect();
    let (min, max) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = max - min;
    if range <= 0.0 || !range.is_finite() {
        // Underflow or a flat profile: fall back to a one-hot at the nearest bin.
        let peak = (coord.round() as usize).min(len - 1);
        let mut out = vec![0.0; len];
        out[peak] = 1.0;
        return Ok(out);
    }
    Ok(g.iter().map(|&v| ((v - min) / range) as f32).collect())
}

/// Index of the maximum entry; ties go to the lowest index.
pub fn simdr_decode(vector: &[f32]) -> Result<usize, PoseError> {
    argmax(vector).ok_or(PoseError::EmptyVector)
}

fn argmax(values: &[f32]) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Heat-vectors for both axes of a 2D joint on a `width x height` sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatVectorPair {
    pub px: Vec<f32>,
    pub py: Vec<f32>,
}

impl HeatVectorPair {
    pub fn encode(x: f64, y: f64, width: usize, height: usize, sigma: f64) -> Result<Self, PoseError> {
        Ok(Self {
            px: simdr_encode(x, width, sigma)?,
            py: simdr_encode(y, height, sigma)?,
        })
    }

    pub fn decode(&self) -> Result<(usize, usize), PoseError> {
        Ok((simdr_decode(&self.px)?, simdr_decode(&self.py)?))
    }
}

/// A Gaussian joint heatmap, stored row-major as `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap2D {
    width: usize,
    height: usize,
    sigma: f64,
    grid: Vec<f32>,
}

impl Heatmap2D {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn grid(&self) -> &[f32] {
        &self.grid
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.grid[y * self.width + x]
    }
}

/// Renders `exp(-|v - joint|^2 / (2 sigma^2))` over a `height x width` grid.
pub fn heatmap_encode(joint: (f64, f64), size: (usize, usize), sigma: f64) -> Result<Heatmap2D, PoseError> {
    let (height, width) = size;
    check_sigma(sigma)?;
    let (x, y) = joint;
    if !(x >= 0.0 && x < width as f64) {
        return Err(PoseError::OutOfRange { value: x, limit: width });
    }
    if !(y >= 0.0 && y < height as f64) {
        return Err(PoseError::OutOfRange {
            value: y,
            limit: height,
        });
    }
    let denom = 2.0 * sigma * sigma;
    let mut grid = Vec::with_capacity(width * height);
    for r in 0..height {
        let dy = r as f64 - y;
        for c in 0..width {
            let dx = c as f64 - x;
            grid.push((-(dx * dx + dy * dy) / denom).exp() as f32);
        }
    }
    Ok(Heatmap2D {
        width,
        height,
        sigma,
        grid,
    })
}

/// Returns the `(x, y)` of the maximum; ties go to the first in row-major order.
pub fn heatmap_decode(map: &Heatmap2D) -> Result<(usize, usize), PoseError> {
    let i = argmax(&map.grid).ok_or(PoseError::EmptyVector)?;
    Ok((i % map.width, i / map.width))
}

/// Mean per-joint Euclidean distance.
pub fn mpjpe(pred: &JointSet, gt: &JointSet) -> Result<f64, PoseError> {
    let per_joint = per_joint_error(pred, gt)?;
    Ok(per_joint.iter().sum::<f64>() / per_joint.len() as f64)
}

/// Euclidean distance for every joint.
pub fn per_joint_error(pred: &JointSet, gt: &JointSet) -> Result<Vec<f64>, PoseError> {
    if !pred.same_shape(gt) {
        return Err(PoseError::ShapeMismatch(format!(
            "{} joints x {}D vs {} joints x {}D",
            pred.joint_count(),
            pred.dim(),
            gt.joint_count(),
            gt.dim()
        )));
    }
    Ok(pred
        .joints()
        .zip(gt.joints())
        .map(|(p, g)| p.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simdr_peak_is_one() {
        for &(v, s, sigma) in &[(2.0, 5, 1.0), (0.0, 64, 8.0), (37.4, 64, 3.0), (479.0, 480, 8.0)] {
            let out = simdr_encode(v, s, sigma).unwrap();
            assert_eq!(out[v.round() as usize], 1.0);
            assert!(out.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn simdr_matches_closed_form_profile() {
        let out = simdr_encode(2.0, 5, 1.0).unwrap();
        let e2 = (-2.0f64).exp();
        let e05 = (-0.5f64).exp();
        let raw = [e2, e05, 1.0, e05, e2];
        for (o, r) in out.iter().zip(raw) {
            let expected = (r - e2) / (1.0 - e2);
            assert!((*o as f64 - expected).abs() < 1e-6, "{o} vs {expected}");
        }
        assert_eq!(out[0], 0.0);
        assert_eq!(out[4], 0.0);
    }

    #[test]
    fn simdr_rejects_bad_arguments() {
        assert!(matches!(simdr_encode(0.0, 1, 1.0), Err(PoseError::BadAxisLength(1))));
        assert!(matches!(simdr_encode(0.0, 4, 0.0), Err(PoseError::BadSigma(_))));
        assert!(matches!(simdr_encode(4.0, 4, 1.0), Err(PoseError::OutOfRange { .. })));
        assert!(matches!(simdr_encode(-0.1, 4, 1.0), Err(PoseError::OutOfRange { .. })));
    }

    #[test]
    fn simdr_tiny_sigma_is_one_hot() {
        let out = simdr_encode(3.0, 8, 1e-6).unwrap();
        assert_eq!(simdr_decode(&out).unwrap(), 3);
        assert_eq!(out.iter().filter(|&&v| v == 1.0).count(), 1);
    }

    #[test]
    fn decode_ties_and_empty() {
        assert_eq!(simdr_decode(&[0.0, 0.0, 1.0, 0.0]).unwrap(), 2);
        assert_eq!(simdr_decode(&[1.0, 1.0, 0.0]).unwrap(), 0);
        assert!(matches!(simdr_decode(&[]), Err(PoseError::EmptyVector)));
    }

    #[test]
    fn default_sigmas() {
        assert_eq!(SIMDR_SIGMA, 8.0);
        assert_eq!(HEATMAP_SIGMA, 2.0);
        assert_eq!(HEATMAP_SIZE, 64);
    }

    #[test]
    fn heatmap_neighbours() {
        let map = heatmap_encode((10.0, 20.0), (64, 64), 2.0).unwrap();
        assert_eq!(map.get(10, 20), 1.0);
        let expected = (-1.0f64 / 8.0).exp() as f32;
        for (x, y) in [(9, 20), (11, 20), (10, 19), (10, 21)] {
            assert_eq!(map.get(x, y), expected);
        }
        assert!((expected - 0.8825).abs() < 1e-4);
        assert_eq!(heatmap_decode(&map).unwrap(), (10, 20));
    }

    #[test]
    fn heatmap_rejects_out_of_grid() {
        assert!(matches!(
            heatmap_encode((64.0, 0.0), (64, 64), 2.0),
            Err(PoseError::OutOfRange { .. })
        ));
        assert!(matches!(
            heatmap_encode((0.0, 0.0), (64, 64), -1.0),
            Err(PoseError::BadSigma(_))
        ));
    }

    #[test]
    fn heatmap_is_not_square_only() {
        let map = heatmap_encode((30.0, 5.0), (8, 32), 1.5).unwrap();
        assert_eq!((map.width(), map.height()), (32, 8));
        assert_eq!(heatmap_decode(&map).unwrap(), (30, 5));
    }

    #[test]
    fn mpjpe_examples() {
        let gt = JointSet::from_points(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(mpjpe(&gt, &gt).unwrap(), 0.0);
        let pred = JointSet::from_points(&[[3.0, 4.0], [1.0, 1.0]]).unwrap();
        assert_eq!(mpjpe(&pred, &gt).unwrap(), 2.5);
        let three = JointSet::from_points(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(mpjpe(&three, &gt), Err(PoseError::ShapeMismatch(_))));
    }

    #[test]
    fn joint_csv_round_trip() {
        let set = JointSet::from_points(&[[1.5, 2.0, -3.0], [0.0, 10.0, 7.25]]).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert_eq!(JointSet::read_csv(&buf[..]).unwrap(), set);
    }

    #[test]
    fn joint_csv_errors() {
        assert!(matches!(
            JointSet::read_csv(&b"id,u,v\n0,1,2\n"[..]),
            Err(PoseError::BadHeader(_))
        ));
        assert!(matches!(
            JointSet::read_csv(&b"joint_id,u,v\n0,1,2\n1,x,2\n"[..]),
            Err(PoseError::ParseError { line: 3, .. })
        ));
        assert!(matches!(
            JointSet::read_csv(&b"joint_id,u,v\n0,1,2\n2,1,2\n"[..]),
            Err(PoseError::Invalid(_))
        ));
        let shuffled = JointSet::read_csv(&b"joint_id,u,v\n1,5,6\n0,1,2\n"[..]).unwrap();
        assert_eq!(shuffled.coords(), &[1.0, 2.0, 5.0, 6.0]);
    }

    proptest! {
        #[test]
        fn simdr_round_trip_on_integers(len in 2usize..300, frac in 0.0f64..1.0, sigma in 0.5f64..16.0) {
            let v = ((len as f64) * frac).floor().min(len as f64 - 1.0);
            let out = simdr_encode(v, len, sigma).unwrap();
            prop_assert_eq!(simdr_decode(&out).unwrap(), v as usize);
            prop_assert_eq!(out.iter().filter(|&&x| x == 1.0).count(), 1);
        }
    }
}
