//! Bifurcation analysis for the two-dimensional border-collision normal form
//! and the one-dimensional discontinuous maps that approximate it near
//! subsumed homoclinic connections.
//!
//! The crate provides the planar map and its saddle geometry ([`maps`]), the
//! reduced one-dimensional family and its analytic apparatus ([`oned`]), the
//! parameter reduction and codimension-two search ([`reduction`]), the first
//! return to the third quadrant with an empirical check of the approximation
//! bounds ([`return_map`]), symbolic-itinerary cycle solving ([`cycles`]),
//! attractor classification ([`classify`]), and parallel parameter-plane
//! scans with file output ([`atlas`]).

pub mod atlas;
pub mod classify;
pub mod cycles;
pub mod error;
pub mod maps;
pub mod oned;
pub mod reduction;
pub mod return_map;
pub mod rng;

pub use atlas::{
    basin_scan, extract_boundaries, scan, slice_diagram, FamilySpec, ScanAxis, ScanBudgets,
    ScanConfig, ScanParam, ScanResult, SliceConfig, SliceLine, SliceResult,
};
pub use classify::{
    boxcount_bands_1d, classify_1d, classify_1d_full, classify_2d, eckstein_gcd,
    merging_condition_scan, merging_residual, rotation_number, AttractorClass, Budgets1d,
    Budgets2d, Endpoint, GcdConfig, MergingHit, RotationNumber,
};
pub use cycles::{
    candidate_itineraries, candidate_itineraries_with_cells, grow_region, solve_cycle,
    CycleSolution, Itinerary, ParamAxis, ParamGrid, RegionMask, Symbol,
};
pub use error::{Error, Result};
pub use maps::{
    apply, in_q3, iterate_orbit, region, saddle_data, NormalFormParams, Orbit, ParamCoord,
    PlanarPoint, Region, SaddleData,
};
pub use oned::{
    absorbing_interval, branch_count, branch_index, delta_invertibility, eval_h, fixed_point,
    power, triangle_pk, triangles_intersect, FixedPointInfo, HMap, Interval, ReducedParams,
    Triangle,
};
pub use reduction::{
    closed_form_m2, closed_form_m3_delta_l_zero, locate_codim2, locate_reduced_target,
    period3_saddle_frame, reduced_params_generic, EpsilonRecord, NewtonOptions, Period3Frame,
    ReductionSpec,
};
pub use return_map::{
    first_return, geometric_ray, sample_psi, verify_theorem1_scaling, NotReturned, Psi0Stats,
    ReturnMap, ReturnRecord, ScalingFit,
};
