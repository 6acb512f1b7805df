//! Screen understanding: turns a flat list of widget detections into a
//! hierarchical, reading-ordered [`ScreenDocument`] and renders it in the
//! HTML-like text form consumed by the agent.
//!
//! Pipeline, in order:
//!
//! 1. [`normalize_detections`]: clip, deduplicate, order.
//! 2. [`cluster_lists`]: DBSCAN over per-class layout features; repairs
//!    list items that were missed or mis-sized by the detector.
//! 3. icon captioning through an [`IconCaptioner`](crate::clients::IconCaptioner).
//! 4. [`build_hierarchy`]: containment-based parent assignment.
//! 5. [`xy_cut_order`] on every sibling set, then [`assign_ids`].

mod dbscan;
mod document;
mod elements;
mod hierarchy;
mod lists;
mod xycut;

use thiserror::Error;

pub use dbscan::{dbscan, Label};
pub use document::{
    assign_ids, build_document, parse_document, render_document, render_outline, BuildReport,
    DocumentOutline, OutlineNode, ScreenDocument,
};
pub use elements::{
    normalize_detections, to_detections, Detection, DetectionFile, ElementClass, GuiElement, ImageSize,
};
pub use hierarchy::{build_hierarchy, GuiNode, GuiTree};
pub use lists::{cluster_lists, Axis, ListGroup};
pub use xycut::{xy_cut_order, xy_cut_permutation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("unknown element class {0:?}")]
    UnknownClass(String),
    #[error("feature vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("detection json: {0}")]
    Json(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { id: usize, line: usize },
}

/// Tunables for the perception pipeline. Defaults are the pinned values
/// used throughout the test suite.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionConfig {
    /// DBSCAN radius in normalized feature space.
    pub list_eps: f64,
    pub list_min_pts: usize,
    /// Relative width/height deviation from the cluster median above which
    /// a list member is treated as a misdetection.
    pub size_outlier: f64,
    /// Relative tolerance around twice the pitch for inserting a missing
    /// list item.
    pub gap_tolerance: f64,
    /// Minimum intersection-over-child-area for a parent edge.
    pub containment: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self { list_eps: 0.08, list_min_pts: 2, size_outlier: 0.5, gap_tolerance: 0.1, containment: 0.9 }
    }
}
