use std::fmt;
use std::str::FromStr;

use super::dbscan::dbscan;
use super::elements::{ElementClass, GuiElement, ImageSize};
use super::PerceptionConfig;
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Vertical,
    Horizontal,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Vertical => "vertical",
            Axis::Horizontal => "horizontal",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vertical" => Ok(Axis::Vertical),
            "horizontal" => Ok(Axis::Horizontal),
            other => Err(format!("unknown axis {other:?}")),
        }
    }
}

/// A run of same-class, aligned, evenly spaced elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ListGroup {
    /// Ordered along `axis`.
    pub member_ids: Vec<usize>,
    pub axis: Axis,
    /// Median center-to-center spacing in pixels.
    pub pitch: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn features(e: &GuiElement, size: ImageSize) -> Vec<f64> {
    let (w, h) = (size.width.max(1) as f64, size.height.max(1) as f64);
    let c = e.bbox.center();
    vec![c.x / w, c.y / h, e.bbox.area().max(0.0).sqrt() / (w * h).sqrt()]
}

/// Finds list structures and repairs them.
///
/// Elements are clustered per class on `(center_x/W, center_y/H,
/// sqrt(area)/sqrt(W·H))`. A cluster becomes a [`ListGroup`] when at least
/// two members remain aligned along one axis after size outliers are
/// dropped. Outliers are reclassified as [`ElementClass::Other`]; a gap of
/// twice the pitch (within tolerance) gets a synthesized `inferred` member.
///
/// Returns the groups and the element list extended with inferred members,
/// whose ids continue after the existing ones.
pub fn cluster_lists(
    elements: &[GuiElement],
    size: ImageSize,
    cfg: &PerceptionConfig,
) -> (Vec<ListGroup>, Vec<GuiElement>) {
    let mut out: Vec<GuiElement> = elements.to_vec();
    let mut groups = Vec::new();
    let mut next_id = elements.iter().map(|e| e.id + 1).max().unwrap_or(0);

    for cls in ElementClass::ALL {
        if cls == ElementClass::Other {
            continue;
        }
        let members: Vec<usize> = (0..elements.len()).filter(|&i| elements[i].cls == cls).collect();
        if members.len() < 2 {
            continue;
        }
        let points: Vec<Vec<f64>> = members.iter().map(|&i| features(&elements[i], size)).collect();
        let Ok(labels) = dbscan(&points, cfg.list_eps, cfg.list_min_pts) else {
            continue;
        };
        let n_clusters = labels.iter().filter_map(|l| l.cluster()).max().map_or(0, |m| m + 1);
        for c in 0..n_clusters {
            let cluster: Vec<usize> = members
                .iter()
                .zip(&labels)
                .filter(|(_, l)| l.cluster() == Some(c))
                .map(|(&i, _)| i)
                .collect();
            if cluster.len() < 2 {
                continue;
            }
            if let Some(group) = rectify(&cluster, &mut out, size, cfg, cls, &mut next_id) {
                groups.push(group);
            }
        }
    }
    (groups, out)
}

fn rectify(
    cluster: &[usize],
    out: &mut Vec<GuiElement>,
    size: ImageSize,
    cfg: &PerceptionConfig,
    cls: ElementClass,
    next_id: &mut usize,
) -> Option<ListGroup> {
    let med_w = median(&mut cluster.iter().map(|&i| out[i].bbox.width()).collect::<Vec<_>>());
    let med_h = median(&mut cluster.iter().map(|&i| out[i].bbox.height()).collect::<Vec<_>>());
    let deviates = |v: f64, m: f64| (v - m).abs() > cfg.size_outlier * m;

    let mut kept = Vec::new();
    for &i in cluster {
        let b = out[i].bbox;
        if deviates(b.width(), med_w) || deviates(b.height(), med_h) {
            out[i].cls = ElementClass::Other;
        } else {
            kept.push(i);
        }
    }
    if kept.len() < 2 {
        return None;
    }

    let centers: Vec<_> = kept.iter().map(|&i| out[i].bbox.center()).collect();
    let span = |f: fn(&crate::geometry::Point) -> f64| {
        let vs = centers.iter().map(f);
        vs.clone().fold(f64::NEG_INFINITY, f64::max) - vs.fold(f64::INFINITY, f64::min)
    };
    let (x_span, y_span) = (span(|p| p.x), span(|p| p.y));
    let axis = if x_span <= 0.5 * med_w && y_span > 0.0 {
        Axis::Vertical
    } else if y_span <= 0.5 * med_h && x_span > 0.0 {
        Axis::Horizontal
    } else {
        return None;
    };
    let along = |e: &GuiElement| match axis {
        Axis::Vertical => e.bbox.center().y,
        Axis::Horizontal => e.bbox.center().x,
    };
    let across = |e: &GuiElement| match axis {
        Axis::Vertical => e.bbox.center().x,
        Axis::Horizontal => e.bbox.center().y,
    };

    kept.sort_by(|&a, &b| along(&out[a]).total_cmp(&along(&out[b])).then(a.cmp(&b)));
    let positions: Vec<f64> = kept.iter().map(|&i| along(&out[i])).collect();
    let mut gaps: Vec<f64> = positions.windows(2).map(|w| w[1] - w[0]).collect();
    let pitch = median(&mut gaps.clone());
    if pitch.is_nan() || pitch <= 0.0 {
        return None;
    }
    let cross = median(&mut kept.iter().map(|&i| across(&out[i])).collect::<Vec<_>>());

    let mut member_ids = vec![out[kept[0]].id];
    for (k, gap) in gaps.drain(..).enumerate() {
        if (gap - 2.0 * pitch).abs() <= cfg.gap_tolerance * 2.0 * pitch {
            let mid = positions[k] + gap / 2.0;
            let (cx, cy) = match axis {
                Axis::Vertical => (cross, mid),
                Axis::Horizontal => (mid, cross),
            };
            let bbox = BBox {
                x_min: cx - med_w / 2.0,
                y_min: cy - med_h / 2.0,
                x_max: cx + med_w / 2.0,
                y_max: cy + med_h / 2.0,
            }
            .clip(size.width as f64, size.height as f64);
            let id = *next_id;
            *next_id += 1;
            out.push(GuiElement { id, cls, bbox, content: String::new(), confidence: 0.0, inferred: true });
            member_ids.push(id);
        }
        member_ids.push(out[kept[k + 1]].id);
    }
    Some(ListGroup { member_ids, axis, pitch })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHONE: ImageSize = ImageSize { width: 1080, height: 2400 };

    fn el(id: usize, cls: ElementClass, b: [f64; 4]) -> GuiElement {
        GuiElement {
            id,
            cls,
            bbox: BBox::from_array(b).unwrap(),
            content: String::new(),
            confidence: 0.9,
            inferred: false,
        }
    }

    fn stack(cls: ElementClass, ys: &[f64]) -> Vec<GuiElement> {
        ys.iter().enumerate().map(|(i, &y)| el(i, cls, [100., y, 500., y + 80.])).collect()
    }

    #[test]
    fn stacked_buttons_form_vertical_list() {
        let els = stack(ElementClass::Button, &[0., 100., 200.]);
        let (groups, out) = cluster_lists(&els, PHONE, &PerceptionConfig::default());
        assert_eq!(groups, [ListGroup { member_ids: vec![0, 1, 2], axis: Axis::Vertical, pitch: 100.0 }]);
        assert_eq!(out, els);
    }

    #[test]
    fn missing_item_is_inferred() {
        // The doubled gap must stay within eps in normalized feature space:
        // 200 / 2800 < 0.08.
        let tall = ImageSize::new(1080, 2800);
        let els = stack(ElementClass::Text, &[0., 100., 300., 400.]);
        let (groups, out) = cluster_lists(&els, tall, &PerceptionConfig::default());
        assert_eq!(groups.len(), 1);
        let g = &groups[0];
        assert_eq!(g.member_ids, [0, 1, 4, 2, 3]);
        assert_eq!(g.pitch, 100.0);
        let inferred = &out[4];
        assert!(inferred.inferred);
        assert_eq!(inferred.cls, ElementClass::Text);
        assert_eq!(inferred.confidence, 0.0);
        assert_eq!(inferred.bbox.to_array(), [100., 200., 500., 280.]);
    }

    #[test]
    fn horizontal_row_of_icons() {
        let els: Vec<_> =
            (0..4).map(|i| el(i, ElementClass::Icon, [100. + 80. * i as f64, 50., 160. + 80. * i as f64, 110.])).collect();
        let (groups, _) = cluster_lists(&els, PHONE, &PerceptionConfig::default());
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].axis, Axis::Horizontal);
        assert_eq!(groups[0].pitch, 80.0);
    }

    #[test]
    fn far_apart_elements_are_not_a_list() {
        let els = vec![el(0, ElementClass::Button, [0., 0., 100., 50.]), el(1, ElementClass::Button, [900., 2000., 1000., 2050.])];
        let (groups, out) = cluster_lists(&els, PHONE, &PerceptionConfig::default());
        assert!(groups.is_empty());
        assert_eq!(out, els);
    }

    #[test]
    fn oversized_member_becomes_other() {
        let mut els = stack(ElementClass::Button, &[0., 100., 200., 300.]);
        // Twice as tall as its siblings but still close in feature space.
        els[3].bbox = BBox::from_array([100., 300., 500., 450.]).unwrap();
        let (groups, out) = cluster_lists(&els, PHONE, &PerceptionConfig::default());
        assert_eq!(out[3].cls, ElementClass::Other);
        assert_eq!(out.len(), 4);
        assert_eq!(groups[0].member_ids, [0, 1, 2]);
    }

    #[test]
    fn different_classes_do_not_mix() {
        let mut els = stack(ElementClass::Button, &[0., 100.]);
        els[1].cls = ElementClass::Text;
        assert!(cluster_lists(&els, PHONE, &PerceptionConfig::default()).0.is_empty());
    }
}
