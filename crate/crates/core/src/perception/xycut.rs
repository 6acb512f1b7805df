use super::elements::GuiElement;
use crate::geometry::BBox;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cut {
    /// Split into bands stacked top to bottom.
    Horizontal,
    /// Split into columns left to right.
    Vertical,
}

/// Merged-projection gaps along one axis: `(start, end)` of each empty run
/// between occupied intervals.
fn gaps(intervals: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = intervals.collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = Vec::new();
    let mut reach = match iv.first() {
        Some(&(_, end)) => end,
        None => return out,
    };
    for &(start, end) in &iv[1..] {
        if start > reach {
            out.push((reach, start));
        }
        reach = reach.max(end);
    }
    out
}

fn threshold(extent: f64) -> f64 {
    (0.01 * extent).max(2.0)
}

fn qualifying(boxes: &[BBox], idx: &[usize], cut: Cut) -> Vec<(f64, f64)> {
    let span = |b: &BBox| match cut {
        Cut::Horizontal => (b.y_min, b.y_max),
        Cut::Vertical => (b.x_min, b.x_max),
    };
    let lo = idx.iter().map(|&i| span(&boxes[i]).0).fold(f64::INFINITY, f64::min);
    let hi = idx.iter().map(|&i| span(&boxes[i]).1).fold(f64::NEG_INFINITY, f64::max);
    let min_gap = threshold(hi - lo);
    gaps(idx.iter().map(|&i| span(&boxes[i])))
        .into_iter()
        .filter(|(a, b)| b - a >= min_gap)
        .collect()
}

fn order(boxes: &[BBox], keys: &[usize], idx: Vec<usize>, out: &mut Vec<usize>) {
    if idx.len() <= 1 {
        out.extend(idx);
        return;
    }
    let h = qualifying(boxes, &idx, Cut::Horizontal);
    let v = qualifying(boxes, &idx, Cut::Vertical);
    let widest = |g: &[(f64, f64)]| g.iter().map(|(a, b)| b - a).fold(0.0_f64, f64::max);
    let (cut, cuts) = match (h.is_empty(), v.is_empty()) {
        (true, true) => {
            let mut idx = idx;
            idx.sort_by(|&a, &b| {
                boxes[a]
                    .y_min
                    .total_cmp(&boxes[b].y_min)
                    .then(boxes[a].x_min.total_cmp(&boxes[b].x_min))
                    .then(keys[a].cmp(&keys[b]))
            });
            out.extend(idx);
            return;
        }
        _ if widest(&h) >= widest(&v) => (Cut::Horizontal, h),
        _ => (Cut::Vertical, v),
    };

    // Every box lies entirely on one side of each gap.
    let mut bands: Vec<Vec<usize>> = vec![Vec::new(); cuts.len() + 1];
    for i in idx {
        let start = match cut {
            Cut::Horizontal => boxes[i].y_min,
            Cut::Vertical => boxes[i].x_min,
        };
        let band = cuts.iter().take_while(|(_, end)| start >= *end).count();
        bands[band].push(i);
    }
    for band in bands {
        order(boxes, keys, band, out);
    }
}

/// Recursive XY-cut ordering of the positions in `boxes`.
///
/// Projects the boxes on both axes and cuts at every empty gap of at least
/// 1% of the extent (minimum 2 px) along the axis holding the widest gap;
/// ties cut horizontally. Bands are visited top to bottom or left to right.
/// Sets with no qualifying gap are sorted by `(y_min, x_min, key)`.
pub fn xy_cut_permutation(boxes: &[BBox], keys: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(boxes.len());
    order(boxes, keys, (0..boxes.len()).collect(), &mut out);
    out
}

/// Sorts sibling elements into reading order.
pub fn xy_cut_order(siblings: Vec<GuiElement>) -> Vec<GuiElement> {
    let boxes: Vec<BBox> = siblings.iter().map(|e| e.bbox).collect();
    let keys: Vec<usize> = siblings.iter().map(|e| e.id).collect();
    let perm = xy_cut_permutation(&boxes, &keys);
    let mut slots: Vec<Option<GuiElement>> = siblings.into_iter().map(Some).collect();
    perm.into_iter().filter_map(|i| slots[i].take()).collect()
}
