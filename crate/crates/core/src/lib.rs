//! Reconstruction of compact 3D wireframes of Manhattan scenes from 2.5D
//! junction/line/depth heatmaps.
//!
//! Pipeline stages, each in its own module:
//!
//! 1. [`synth`] generates block scenes with exact visible-line ground truth.
//! 2. [`heatmap`] encodes a wireframe into stride-4 heatmaps (and reads/writes
//!    the `WFHM` tensor container).
//! 3. [`vectorize`] turns heatmaps back into a 2.5D wireframe.
//! 4. [`lift`] calibrates the camera from vanishing points and refines depths
//!    with a convex program, producing a 3D wireframe.
//! 5. [`metrics`] and [`loss`] score predictions against ground truth.
//!
//! [`export`] writes lifted wireframes as OBJ or SVG.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod export;
pub mod geom;
pub mod heatmap;
pub mod lift;
pub mod loss;
pub mod metrics;
pub mod raster;
pub mod synth;
pub mod vectorize;
pub mod wireframe;

pub use camera::{calibrated_ray, normalize_vp, vp_from_pose, CameraModel, Pose, VanishingPoints};
pub use error::{Error, Result};
pub use heatmap::{encode, read_tensor, write_tensor, HeatmapBundle, Plane};
pub use lift::{calibrate_from_vps, lift, refine_depths, LiftParams, LiftProblem, LiftSolution};
pub use metrics::{aggregate, evaluate_sample, EvalParams, EvalReport, SampleReport};
pub use synth::{generate, project_gt, Cuboid, GroundTruth, Scene3D, SceneParams};
pub use vectorize::{vectorize, VectorizeParams};
pub use wireframe::{validate, JunctionType, Rule, Vertex, Violation, Wireframe};
