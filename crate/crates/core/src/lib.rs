//! Long-term single-object tracking.
//!
//! A short-term correlation-filter localizer is wrapped in a state machine
//! that detects target loss and re-detects with a penalized random tile
//! search. Erased-copy consensus checks over-confident predictions and
//! background compositing adds discriminative training samples. The crate
//! also carries the long-term evaluation metrics and a synthetic sequence
//! generator.

pub mod augment;
pub mod config;
pub mod consensus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod fft2;
pub mod geom;
pub mod orchestrator;
pub mod pgm;
pub mod redetect;
pub mod ridge;
pub mod synth;
pub mod texture;
pub mod tracker;

pub use error::{Error, Result};
pub use geom::{iou, BBox, Frame, Patch, Point, Rect};
pub use tracker::{DcfTracker, Localizer, TrackState, TrackerConfig};
