//! Object-graph manipulation plans from annotated demonstrations, and
//! end-effector action synthesis for new scene layouts.
//!
//! The crate is organized bottom-up:
//!
//! * [`geom`]: rotations, poses, point clouds, plane fitting, rigid alignment
//! * [`tracks`]: velocity signals and kernel changepoint detection
//! * [`oog`]: object graphs, contact relations, plan construction
//! * [`register`]: normals, FPFH descriptors, RANSAC global registration
//! * [`warp`]: translation and rotation trajectory warping
//! * [`policy`]: plan retrieval, endpoint prediction, SE(3) optimization
//! * [`sim`]: kinematic tabletop simulator and demonstration synthesis
//! * [`io`]: versioned file formats and bundle validation
//!
//! Data-parallel inner loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod geom;
pub mod io;
pub mod oog;
pub mod par;
pub mod policy;
pub mod register;
pub mod sim;
pub mod spatial;
pub mod tracks;
pub mod warp;
