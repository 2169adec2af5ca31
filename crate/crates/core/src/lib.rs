//! Real-time unknown-word detection from reading gaze.
//!
//! A gaze stream is cut into one-second windows ([`gaze`]); each accepted
//! window's region of interest selects candidate words on the page
//! ([`text`]); a multimodal transformer ([`model`]) scores every token of
//! those words from the gaze trace, the surrounding text and word-level
//! knowledge features. [`synth`] generates reading data with a planted
//! dwell signal, [`dataset`] turns it into labeled samples and
//! [`train`]/[`eval`] fit and score the detector against the
//! [`baselines`]. [`session`] is the streaming state machine behind the
//! network service.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gaze;
pub mod model;
pub mod geometry;
pub mod synth;
pub mod session;
pub mod text;
pub mod train;

pub use error::{CoreError, Result};
pub use geometry::BoundingBox;
