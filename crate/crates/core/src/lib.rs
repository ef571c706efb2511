pub mod diagnostics;
pub mod engine;
pub mod feasibility;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod samplers;
pub mod special;
