//! Key-frame learning from demonstration for driving past occluding
//! road-side hazards.
//!
//! Demonstrations are moved into a hazard-centric frame, reduced to
//! key-frames by iterative spline fitting, aligned with DTW and clustered
//! into per-scenario models of mean and deviation. Models are turned into
//! lateral and speed envelopes for single hazards, and for sequences of
//! hazards by stitching models at an adapted onset point.

pub mod analysis;
pub mod config;
pub mod constraints;
pub mod demogen;
pub mod geometry;
pub mod io;
pub mod keyframe;
pub mod numerics;
pub mod plot;
