//! Non-Abelian gauge fields of degenerate eigenspaces and their holonomies.
//!
//! For a block of right/left frames (φᵃ, φ̃ᵃ) over chart coordinates λ, the
//! gauge field is (A_μ)^{ba} = i⟨φ̃ᵇ|(∂_μ − K_μ)|φᵃ⟩ with the metric
//! connection K_μ = −η⁻¹∂_μη/2. Holonomies are path-ordered exponentials
//! with later segments multiplied on the left.

mod family;
mod field;
mod frames;
mod holonomy;

pub use family::{metric_at, Discretization, FnFamily, HamiltonianFamily, LoopSpec, ParamLoop, RandomDegenerateFamily};
pub use field::{
    antihermiticity_residual, directional_gauge_field, gauge_field_components, gauge_field_sample, gauge_transform,
    kinetic_connection, swapped_gauge_field_components, GaugeFieldSample, DEFAULT_FD_STEP, PSEUDO_UNITARY_TOL,
    RICHARDSON_TOL,
};
pub use frames::{
    project_onto_block, select_block, smooth_frame_along_path, smooth_frame_along_path_from, AnalyticFrames,
    BlockFrame, FrameField, ProjectedFrames, RotatedFrames,
};
pub use holonomy::{
    dynamical_phase, holonomy_in_frames, holonomy_of_loop, line_integral, ordered_exponential,
    path_ordered_exponential, HolonomyOptions, HolonomyResult, PathSegment, SegmentRule, CLOSURE_TOL,
};
