//! Browser bindings for the static demo page in `www/`.
//!
//! Everything crosses the boundary as plain numbers, flat `f32` arrays or
//! RGBA byte buffers, so the same functions run in native tests.

use evrep::dea::{dea_fuse, Pooling};
use evrep::devox::{project_dev, storage_cost, DevMode, VoxelDims};
use evrep::event::{EventWindow, SensorGeometry};
use evrep::ingest::LabelTrack;
use evrep::pose::{heatmap_decode, heatmap_encode, simdr_decode, HeatVectorPair};
use evrep::raster::{rasterize, sample_fixed};
use evrep::synth::{gen_events, random_figure, SynthConfig, FIGURE_BONES};
use evrep::tensor::FeatureTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const SCENE_DURATION_US: u64 = 100_000;
const KEYFRAME_PERIOD_US: u64 = 10_000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Grayscale RGBA of `|v|`, scaled to the largest magnitude.
fn gray_rgba(values: &[f32]) -> Vec<u8> {
    let max = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        let g = if max > 0.0 {
            ((v.abs() / max).sqrt() * 255.0).round() as u8
        } else {
            0
        };
        out.extend_from_slice(&[g, g, g, 255]);
    }
    out
}

/// Red for the first channel, blue for the second, sharing one scale.
fn two_channel_rgba(pos: &[f32], neg: &[f32]) -> Vec<u8> {
    let max = pos.iter().chain(neg).fold(0.0f32, |m, v| m.max(v.abs()));
    let scale = |v: f32| {
        if max > 0.0 {
            ((v / max).sqrt() * 255.0).round() as u8
        } else {
            0
        }
    };
    pos.iter()
        .zip(neg)
        .flat_map(|(&p, &n)| [scale(p), scale(p.min(n)), scale(n), 255])
        .collect()
}

fn channel_sum(t: &FeatureTensor, channels: std::ops::Range<usize>) -> Vec<f32> {
    let [_, a, b] = t.shape();
    let mut out = vec![0.0f32; a * b];
    for c in channels {
        for (o, v) in out.iter_mut().zip(t.channel(c)) {
            *o += v.abs();
        }
    }
    out
}

/// A synthetic stick figure moving for 100 ms, with its events and labels.
#[wasm_bindgen]
pub struct Scene {
    window: EventWindow,
    labels: LabelTrack,
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(width: u16, height: u16, seed: u32, threshold: f64) -> Result<Scene, String> {
        let geometry = SensorGeometry::new(width, height).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let track = random_figure(&mut rng, geometry, SCENE_DURATION_US, KEYFRAME_PERIOD_US).map_err(err)?;
        let config = SynthConfig {
            geometry,
            threshold,
            ..SynthConfig::default()
        };
        let (window, labels) = gen_events(&track, &config).map_err(err)?;
        if window.is_empty() {
            return Err("the figure produced no events; lower the threshold".into());
        }
        Ok(Scene { window, labels })
    }

    pub fn width(&self) -> u16 {
        self.window.geometry().width()
    }

    pub fn height(&self) -> u16 {
        self.window.geometry().height()
    }

    pub fn event_count(&self) -> usize {
        self.window.len()
    }

    /// `[x, y, tau, p]` per event with `tau` normalized to `[0, 1)`.
    pub fn events(&self) -> Vec<f32> {
        let start = self.window.t_start();
        let span = self.window.duration() as f64;
        self.window
            .events()
            .iter()
            .flat_map(|e| {
                let tau = ((e.t - start) as f64 / span) as f32;
                [e.x as f32, e.y as f32, tau, e.p.sign() as f32]
            })
            .collect()
    }

    /// Rasterized cloud as `[x, y, t_avg, p_acc, e_cnt]` rows; `sample_n = 0` keeps every point.
    pub fn raster_points(&self, k: usize, sample_n: usize, seed: u32) -> Result<Vec<f32>, String> {
        let cloud = rasterize(&self.window, k).map_err(err)?;
        let cloud = if sample_n == 0 {
            cloud
        } else {
            sample_fixed(&cloud, sample_n, seed as u64).map_err(err)?
        };
        Ok(cloud.to_rows().concat())
    }

    /// One two-channel DEV plane (`hw`, `th` or `wt`) of a `bins`-cube as RGBA.
    /// `hw` is `bins` rows of `bins`; `th` rows are time bins; `wt` rows are x bins.
    pub fn dev_plane_rgba(&self, bins: usize, plane: &str) -> Result<Vec<u8>, String> {
        let dims = VoxelDims::cube(bins).map_err(err)?;
        let planes = project_dev(&self.window, dims, DevMode::TwoChannel).map_err(err)?;
        let t = match plane {
            "hw" => &planes.hw,
            "th" => &planes.th,
            "wt" => &planes.wt,
            other => return Err(format!("unknown plane {other:?}")),
        };
        Ok(two_channel_rgba(t.channel(0), t.channel(1)))
    }

    /// Fused DEA output on the raw DEV planes, shown as three `bins x bins`
    /// panels side by side: `hw`, weighted `th` branch, weighted `wt` branch.
    pub fn dea_rgba(&self, bins: usize, pooling: &str) -> Result<Vec<u8>, String> {
        let pooling = match pooling {
            "avg" => Pooling::Avg,
            "max" => Pooling::Max,
            other => return Err(format!("unknown pooling {other:?}")),
        };
        let dims = VoxelDims::cube(bins).map_err(err)?;
        let planes = project_dev(&self.window, dims, DevMode::TwoChannel).map_err(err)?;
        let fused = dea_fuse(&planes.hw, &planes.th, &planes.wt, pooling).map_err(err)?;
        let c = planes.channels();
        let panels: Vec<Vec<u8>> = (0..3)
            .map(|g| gray_rgba(&channel_sum(&fused, g * c..(g + 1) * c)))
            .collect();
        let row = bins * 4;
        let mut out = Vec::with_capacity(3 * bins * row);
        for r in 0..bins {
            for p in &panels {
                out.extend_from_slice(&p[r * row..(r + 1) * row]);
            }
        }
        Ok(out)
    }

    /// Label joints `[u0, v0, u1, v1, ...]` nearest to the normalized time `tau`.
    pub fn label_at(&self, tau: f64) -> Vec<f64> {
        let t = self.window.t_start() + (tau.clamp(0.0, 1.0) * self.window.duration() as f64) as u64;
        self.labels.labels()[self.labels.nearest_index(t)].coords().to_vec()
    }
}

/// Joint index pairs of the synthetic figure, flattened.
#[wasm_bindgen]
pub fn figure_bones() -> Vec<u32> {
    FIGURE_BONES.iter().flat_map(|&(a, b)| [a as u32, b as u32]).collect()
}

/// A `size x size` Gaussian heatmap around `(x, y)` as RGBA.
#[wasm_bindgen]
pub fn heatmap_rgba(x: f64, y: f64, size: usize, sigma: f64) -> Result<Vec<u8>, String> {
    let map = heatmap_encode((x, y), (size, size), sigma).map_err(err)?;
    Ok(gray_rgba(map.grid()))
}

/// Argmax `[x, y]` of the heatmap for `(x, y)`.
#[wasm_bindgen]
pub fn heatmap_argmax(x: f64, y: f64, size: usize, sigma: f64) -> Result<Vec<u32>, String> {
    let map = heatmap_encode((x, y), (size, size), sigma).map_err(err)?;
    let (dx, dy) = heatmap_decode(&map).map_err(err)?;
    Ok(vec![dx as u32, dy as u32])
}

/// The SimDR x and y vectors for `(x, y)`, concatenated (`width + height` values).
#[wasm_bindgen]
pub fn simdr_vectors(x: f64, y: f64, width: usize, height: usize, sigma: f64) -> Result<Vec<f32>, String> {
    let pair = HeatVectorPair::encode(x, y, width, height, sigma).map_err(err)?;
    Ok([pair.px, pair.py].concat())
}

/// Argmax `[x, y]` of concatenated SimDR vectors.
#[wasm_bindgen]
pub fn simdr_argmax(vectors: &[f32], width: usize) -> Result<Vec<u32>, String> {
    if width == 0 || width >= vectors.len() {
        return Err("width must split the vector in two".into());
    }
    let (px, py) = vectors.split_at(width);
    Ok(vec![
        simdr_decode(px).map_err(err)? as u32,
        simdr_decode(py).map_err(err)? as u32,
    ])
}

/// Tri-plane over full-grid cell ratio for a `bins`-cube.
#[wasm_bindgen]
pub fn storage_ratio(bins: usize) -> Result<f64, String> {
    Ok(storage_cost(VoxelDims::cube(bins).map_err(err)?, 1).ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Scene {
        Scene::new(96, 72, 1, 0.2).unwrap()
    }

    #[test]
    fn scene_is_seeded() {
        let (a, b) = (scene(), scene());
        assert!(a.event_count() > 0);
        assert_eq!(a.events(), b.events());
        assert_ne!(a.events(), Scene::new(96, 72, 2, 0.2).unwrap().events());
        assert!(a.events().chunks(4).all(|e| (0.0..1.0).contains(&e[2])));
    }

    #[test]
    fn raster_rows_conserve_events() {
        let s = scene();
        let rows = s.raster_points(4, 0, 0).unwrap();
        let total: f32 = rows.chunks(5).map(|r| r[4]).sum();
        assert_eq!(total as usize, s.event_count());
        assert_eq!(s.raster_points(4, 300, 9).unwrap().len(), 300 * 5);
        assert!(s.raster_points(0, 0, 0).is_err());
    }

    #[test]
    fn plane_images_have_expected_size() {
        let s = scene();
        for plane in ["hw", "th", "wt"] {
            let img = s.dev_plane_rgba(16, plane).unwrap();
            assert_eq!(img.len(), 16 * 16 * 4);
            assert!(img.chunks(4).any(|px| px[0] > 0 || px[2] > 0));
        }
        assert!(s.dev_plane_rgba(16, "xy").is_err());
        assert_eq!(s.dea_rgba(8, "avg").unwrap().len(), 3 * 8 * 8 * 4);
        assert!(s.dea_rgba(8, "min").is_err());
    }

    #[test]
    fn labels_follow_the_figure() {
        let s = scene();
        assert_eq!(s.label_at(0.0).len(), 26);
        assert_eq!(figure_bones().len() % 2, 0);
        assert!(figure_bones().iter().all(|&j| j < 13));
    }

    #[test]
    fn codecs_round_trip() {
        assert_eq!(heatmap_argmax(17.0, 40.0, 64, 2.0).unwrap(), vec![17, 40]);
        assert_eq!(heatmap_rgba(3.0, 3.0, 64, 2.0).unwrap().len(), 64 * 64 * 4);
        let v = simdr_vectors(100.0, 33.0, 346, 260, 8.0).unwrap();
        assert_eq!(v.len(), 606);
        assert_eq!(simdr_argmax(&v, 346).unwrap(), vec![100, 33]);
        assert!(simdr_argmax(&v, 0).is_err());
        assert_eq!(storage_ratio(64).unwrap(), 0.046875);
    }

    #[test]
    fn image_helpers_scale_to_peak() {
        assert_eq!(
            gray_rgba(&[0.0, -2.0, 2.0]),
            vec![0, 0, 0, 255, 255, 255, 255, 255, 255, 255, 255, 255]
        );
        assert_eq!(gray_rgba(&[0.0]), vec![0, 0, 0, 255]);
        assert_eq!(two_channel_rgba(&[4.0], &[0.0]), vec![255, 0, 0, 255]);
    }
}
