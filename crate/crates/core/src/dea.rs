//! Decoupled event attention: fuses the `th` and `wt` plane features into the
//! `hw` plane.
//!
//! 1. Pool `th` (`C x T x H`) and `wt` (`C x W x T`) over time and broadcast
//!    the results to `C x H x W`.
//! 2. Correlate each expanded map with `hw` by a dot product over channels,
//!    giving two `H x W` maps.
//! 3. Scale each expanded map by its correlation (shared across channels) and
//!    concatenate `[hw, th-branch, wt-branch]` into `3C x H x W`.
//!
//! There are no learned parameters, no normalization and no nonlinearity.

use thiserror::Error;

use crate::tensor::FeatureTensor;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeaError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// How the time axis is collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    #[default]
    Avg,
    Max,
}

/// How the three planes are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fusion {
    /// Correlation-weighted concatenation, `3C x H x W`.
    #[default]
    Dea,
    /// `hw + expanded th + expanded wt`, `C x H x W`.
    Add,
    /// `[hw, expanded th, expanded wt]` without weighting, `3C x H x W`.
    Concat,
}

/// An `H x W` correlation map.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl CorrelationMap {
    pub fn get(&self, h: usize, w: usize) -> f32 {
        self.data[h * self.width + w]
    }
}

fn mismatch(msg: String) -> DeaError {
    DeaError::ShapeMismatch(msg)
}

fn pool(values: impl Iterator<Item = f32>, len: usize, pooling: Pooling) -> f32 {
    match pooling {
        Pooling::Avg => values.sum::<f32>() / len as f32,
        Pooling::Max => values.fold(f32::NEG_INFINITY, f32::max),
    }
}

/// Collapses time in `th` and `wt` and expands both to `C x H x W`.
///
/// `th_hat(c, h, w) = pool_t th(c, t, h)` and `wt_hat(c, h, w) = pool_t wt(c, w, t)`.
pub fn pool_expand(
    f_th: &FeatureTensor,
    f_wt: &FeatureTensor,
    target: (usize, usize),
    pooling: Pooling,
) -> Result<(FeatureTensor, FeatureTensor), DeaError> {
    let (h, w) = target;
    let [c, t, th_h] = f_th.shape();
    let [wt_c, wt_w, wt_t] = f_wt.shape();
    if th_h != h || wt_w != w || wt_t != t || wt_c != c {
        return Err(mismatch(format!(
            "th {:?} and wt {:?} do not fit target {h}x{w}",
            f_th.shape(),
            f_wt.shape()
        )));
    }
    if t == 0 {
        return Err(mismatch("time axis has length 0".into()));
    }
    let mut th_hat = FeatureTensor::zeros(c, h, w);
    let mut wt_hat = FeatureTensor::zeros(c, h, w);
    for ci in 0..c {
        let th_rows: Vec<f32> = (0..h)
            .map(|hi| pool((0..t).map(|ti| f_th.get(ci, ti, hi)), t, pooling))
            .collect();
        let wt_cols: Vec<f32> = (0..w)
            .map(|wi| pool((0..t).map(|ti| f_wt.get(ci, wi, ti)), t, pooling))
            .collect();
        for (hi, &row) in th_rows.iter().enumerate() {
            for (wi, &col) in wt_cols.iter().enumerate() {
                th_hat.set(ci, hi, wi, row);
                wt_hat.set(ci, hi, wi, col);
            }
        }
    }
    Ok((th_hat, wt_hat))
}

/// Channel-wise dot product at every `(h, w)`.
pub fn correlate(expanded: &FeatureTensor, f_hw: &FeatureTensor) -> Result<CorrelationMap, DeaError> {
    if expanded.shape() != f_hw.shape() {
        return Err(mismatch(format!(
            "cannot correlate {:?} with {:?}",
            expanded.shape(),
            f_hw.shape()
        )));
    }
    let [c, h, w] = f_hw.shape();
    let mut data = vec![0.0f32; h * w];
    for ci in 0..c {
        for ((acc, a), b) in data.iter_mut().zip(expanded.channel(ci)).zip(f_hw.channel(ci)) {
            *acc += a * b;
        }
    }
    Ok(CorrelationMap {
        height: h,
        width: w,
        data,
    })
}

fn weight(expanded: &FeatureTensor, corr: &CorrelationMap) -> FeatureTensor {
    let [c, h, w] = expanded.shape();
    let plane = h * w;
    let mut out = expanded.clone();
    for ci in 0..c {
        for (v, k) in out.data_mut()[ci * plane..(ci + 1) * plane].iter_mut().zip(&corr.data) {
            *v *= k;
        }
    }
    out
}

fn check_hw(f_hw: &FeatureTensor, f_th: &FeatureTensor) -> Result<(usize, usize), DeaError> {
    let [c, h, w] = f_hw.shape();
    if c != f_th.channels() {
        return Err(mismatch(format!("hw has {c} channels but th has {}", f_th.channels())));
    }
    if h == 0 || w == 0 {
        return Err(mismatch(format!("empty hw plane {:?}", f_hw.shape())));
    }
    Ok((h, w))
}

/// Fuses the three plane features into one `3C x H x W` map in the order
/// `[hw, C_h * th_hat, C_w * wt_hat]`.
pub fn dea_fuse(
    f_hw: &FeatureTensor,
    f_th: &FeatureTensor,
    f_wt: &FeatureTensor,
    pooling: Pooling,
) -> Result<FeatureTensor, DeaError> {
    fuse(f_hw, f_th, f_wt, pooling, Fusion::Dea)
}

/// [`dea_fuse`] with a selectable combination rule for comparisons.
pub fn fuse(
    f_hw: &FeatureTensor,
    f_th: &FeatureTensor,
    f_wt: &FeatureTensor,
    pooling: Pooling,
    fusion: Fusion,
) -> Result<FeatureTensor, DeaError> {
    let target = check_hw(f_hw, f_th)?;
    let (th_hat, wt_hat) = pool_expand(f_th, f_wt, target, pooling)?;
    let concat = |parts: &[&FeatureTensor]| FeatureTensor::concat_channels(parts).map_err(|e| mismatch(e.to_string()));
    match fusion {
        Fusion::Dea => {
            let c_h = correlate(&th_hat, f_hw)?;
            let c_w = correlate(&wt_hat, f_hw)?;
            concat(&[f_hw, &weight(&th_hat, &c_h), &weight(&wt_hat, &c_w)])
        }
        Fusion::Concat => concat(&[f_hw, &th_hat, &wt_hat]),
        Fusion::Add => {
            let mut out = f_hw.clone();
            for ((o, a), b) in out.data_mut().iter_mut().zip(th_hat.data()).zip(wt_hat.data()) {
                *o += a + b;
            }
            Ok(out)
        }
    }
}
