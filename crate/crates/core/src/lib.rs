//! Event-camera stream representations for pose estimation.
//!
//! * [`event`]: the canonical `(x, y, t, p)` model and window invariants
//! * [`ingest`]: `EVT1`/CSV readers, fixed-count windowing, window labels
//! * [`raster`]: rasterized event point clouds and fixed-size sampling
//! * [`devox`]: tri-plane projections of the event voxel grid
//! * [`dea`]: correlation-weighted fusion of plane features
//! * [`pose`]: heat-vector and heatmap codecs, MPJPE
//! * [`synth`]: deterministic synthetic event streams with joint labels
//! * [`tensor`]: dense feature tensors and the `TEN1` container

pub mod dea;
pub mod devox;
pub mod event;
pub mod ingest;
pub mod pose;
pub mod raster;
pub mod synth;
pub mod tensor;

pub use dea::{dea_fuse, Fusion, Pooling};
pub use devox::{project_dev, DevMode, DevPlanes, VoxelDims};
pub use event::{canonicalize, validate_window, Event, EventWindow, Polarity, RawEvent, SensorGeometry};
pub use ingest::{last_label, mean_label, window_by_count, LabelMode, LabelTrack};
pub use pose::{mpjpe, JointSet};
pub use raster::{rasterize, sample_fixed, RasterCloud, RasterPoint, RasterStream};
pub use tensor::{FeatureTensor, Ten1};
