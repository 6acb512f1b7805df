use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PerceptionError;
use crate::geometry::{iou, BBox};

/// Widget categories understood by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementClass {
    Text,
    Icon,
    Image,
    Button,
    CheckBox,
    EditText,
    Modal,
    Drawer,
    PageIndicator,
    Switch,
    Other,
}

impl ElementClass {
    pub const ALL: [ElementClass; 11] = [
        ElementClass::Text,
        ElementClass::Icon,
        ElementClass::Image,
        ElementClass::Button,
        ElementClass::CheckBox,
        ElementClass::EditText,
        ElementClass::Modal,
        ElementClass::Drawer,
        ElementClass::PageIndicator,
        ElementClass::Switch,
        ElementClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementClass::Text => "Text",
            ElementClass::Icon => "Icon",
            ElementClass::Image => "Image",
            ElementClass::Button => "Button",
            ElementClass::CheckBox => "CheckBox",
            ElementClass::EditText => "EditText",
            ElementClass::Modal => "Modal",
            ElementClass::Drawer => "Drawer",
            ElementClass::PageIndicator => "PageIndicator",
            ElementClass::Switch => "Switch",
            ElementClass::Other => "Other",
        }
    }

    /// Icons and images carry their content as an `alt` attribute.
    pub fn is_pictorial(self) -> bool {
        matches!(self, ElementClass::Icon | ElementClass::Image)
    }
}

impl fmt::Display for ElementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ElementClass {
    type Err = PerceptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "CheckedTextView" {
            return Ok(ElementClass::CheckBox);
        }
        ElementClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| PerceptionError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuiElement {
    pub id: usize,
    pub cls: ElementClass,
    pub bbox: BBox,
    /// OCR text or icon caption; may be empty.
    pub content: String,
    pub confidence: f64,
    /// Synthesized by list rectification rather than detected.
    pub inferred: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }
}

/// One detector hit in the JSON wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub class: String,
    pub bbox: BBox,
    pub confidence: f64,
    #[serde(default)]
    pub text: Option<String>,
}

impl Detection {
    pub fn new(class: impl Into<String>, bbox: BBox, confidence: f64, text: Option<&str>) -> Self {
        Self { class: class.into(), bbox, confidence, text: text.map(str::to_string) }
    }
}

/// `{"image": {"width", "height"}, "elements": [...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    pub image: ImageSize,
    #[serde(default)]
    pub elements: Vec<Detection>,
}

impl DetectionFile {
    pub fn from_json(text: &str) -> Result<Self, PerceptionError> {
        serde_json::from_str(text).map_err(|e| PerceptionError::Json(e.to_string()))
    }
}

const DUPLICATE_IOU: f64 = 0.5;

/// Clips, deduplicates and orders raw detections.
///
/// Same-class pairs overlapping with IoU above 0.5 keep only the more
/// confident box. Output is sorted by `(y_min, x_min, confidence desc)` and
/// ids follow that order.
pub fn normalize_detections(raw: &[Detection], size: ImageSize) -> Result<Vec<GuiElement>, PerceptionError> {
    let (w, h) = (size.width as f64, size.height as f64);
    let mut parsed = Vec::with_capacity(raw.len());
    for d in raw {
        let cls: ElementClass = d.class.parse()?;
        let confidence = if d.confidence.is_finite() { d.confidence.clamp(0.0, 1.0) } else { 0.0 };
        parsed.push(GuiElement {
            id: 0,
            cls,
            bbox: d.bbox.clip(w, h),
            content: d.text.clone().unwrap_or_default(),
            confidence,
            inferred: false,
        });
    }

    let mut by_conf: Vec<usize> = (0..parsed.len()).collect();
    by_conf.sort_by(|&a, &b| parsed[b].confidence.total_cmp(&parsed[a].confidence).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in by_conf {
        let dup = kept
            .iter()
            .any(|&k| parsed[k].cls == parsed[i].cls && iou(&parsed[k].bbox, &parsed[i].bbox) > DUPLICATE_IOU);
        if !dup {
            kept.push(i);
        }
    }
    kept.sort_by(|&a, &b| {
        let (ea, eb) = (&parsed[a], &parsed[b]);
        ea.bbox
            .y_min
            .total_cmp(&eb.bbox.y_min)
            .then(ea.bbox.x_min.total_cmp(&eb.bbox.x_min))
            .then(eb.confidence.total_cmp(&ea.confidence))
            .then(a.cmp(&b))
    });
    Ok(kept
        .into_iter()
        .enumerate()
        .map(|(id, i)| GuiElement { id, ..parsed[i].clone() })
        .collect())
}

/// Converts elements back into wire detections (used to re-run the
/// pipeline on its own output).
pub fn to_detections(elements: &[GuiElement]) -> Vec<Detection> {
    elements
        .iter()
        .map(|e| Detection {
            class: e.cls.as_str().to_string(),
            bbox: e.bbox,
            confidence: e.confidence,
            text: (!e.content.is_empty()).then(|| e.content.clone()),
        })
        .collect()
}
