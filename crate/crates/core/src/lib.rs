//! Player positioning and pose clean-up for broadcast sports video.
//!
//! Takes per-frame person detections and lifted 3D skeletons produced by
//! external networks and turns them into:
//!
//! - court-plane trajectories for the two players of a singles match, via a
//!   camera-to-court homography ([`geometry`]) and tracking-by-detection
//!   ([`tracker`]);
//! - gap-free skeleton sequences, by flagging improbable keypoint jumps and
//!   refilling those frames from trusted keyframes ([`pose`]);
//! - error reports against ground truth ([`eval`]).
//!
//! [`synth`] generates complete scenes with known ground truth so every stage
//! can be checked end to end.
//!
//! All geometry is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to one precision.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod pose;
mod scalar;
pub mod synth;
pub mod tracker;

pub use scalar::{Scalar, Tolerances, EPS_COLLINEAR, EPS_DET, EPS_EXACT, EPS_W, TOLERANCES};

pub type Real = f64;

pub type Point2d = geometry::Point2<f64>;
pub type Point2f = geometry::Point2<f32>;
pub type Correspondenced = geometry::Correspondence<f64>;
pub type Correspondencef = geometry::Correspondence<f32>;
pub type Homographyd = geometry::Homography<f64>;
pub type Homographyf = geometry::Homography<f32>;
pub type BBoxd = model::BBox<f64>;
pub type FrameDetectionsd = model::FrameDetections<f64>;
pub type Pose3Dd = model::Pose3D<f64>;
pub type Trackd = tracker::Track<f64>;
pub type Trackf = tracker::Track<f32>;
pub type PoseSequenced = pose::PoseSequence<f64>;
pub type ErrorReportd = eval::ErrorReport<f64>;
