//! Straight-segment scans, barrier detection, and loss surfaces on the plane
//! through three points.

mod plane;
mod segment;
mod surface;

pub use plane::{
    build_plane, project_iterate, project_linear, LinearProjection, Plane, ProjectedIterate,
    Projection,
};
pub use segment::{
    barrier_from_losses, detect_barrier, scan_segment, scan_segment_with, BarrierReport,
    SegmentScan,
};
pub use surface::{
    eval_surface, AnchorPoint, SurfaceGrid, SurfaceRanges, ANCHOR_NAMES, DEFAULT_MARGIN,
};

/// Default number of λ points for barrier scans.
pub const DEFAULT_BARRIER_POINTS: usize = 25;
