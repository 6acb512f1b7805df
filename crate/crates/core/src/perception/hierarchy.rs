use super::elements::GuiElement;
use crate::geometry::containment_ratio;

#[derive(Debug, Clone, PartialEq)]
pub struct GuiNode {
    pub element: GuiElement,
    pub children: Vec<GuiNode>,
}

impl GuiNode {
    pub fn leaf(element: GuiElement) -> Self {
        Self { element, children: Vec::new() }
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(GuiNode::size).sum::<usize>()
    }
}

/// Forest of GUI elements; each node's children are visually contained in it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GuiTree {
    pub roots: Vec<GuiNode>,
}

impl GuiTree {
    pub fn len(&self) -> usize {
        self.roots.iter().map(GuiNode::size).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Pre-order walk yielding `(depth, node)`.
    pub fn walk(&self) -> impl Iterator<Item = (usize, &GuiNode)> {
        let mut stack: Vec<(usize, &GuiNode)> = self.roots.iter().rev().map(|n| (0, n)).collect();
        std::iter::from_fn(move || {
            let (depth, node) = stack.pop()?;
            stack.extend(node.children.iter().rev().map(|c| (depth + 1, c)));
            Some((depth, node))
        })
    }

    /// Elements in pre-order.
    pub fn elements(&self) -> impl Iterator<Item = &GuiElement> {
        self.walk().map(|(_, n)| &n.element)
    }
}

/// Index of the parent chosen for each element, `None` for roots.
///
/// The parent of `e` is the smallest-area element `p ≠ e` that is strictly
/// larger than `e` and covers at least `threshold` of `e`'s area. Equal
/// areas resolve to the lower index.
pub fn parent_indices(elements: &[GuiElement], threshold: f64) -> Vec<Option<usize>> {
    elements
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let area = e.bbox.area();
            let mut best: Option<(f64, usize)> = None;
            for (j, p) in elements.iter().enumerate() {
                let pa = p.bbox.area();
                if j == i || pa <= area || containment_ratio(&e.bbox, &p.bbox) < threshold {
                    continue;
                }
                if best.is_none_or(|(ba, _)| pa < ba) {
                    best = Some((pa, j));
                }
            }
            best.map(|(_, j)| j)
        })
        .collect()
}

/// Builds the containment forest. Children keep the input order; reading
/// order is applied separately.
pub fn build_hierarchy(elements: &[GuiElement], threshold: f64) -> GuiTree {
    let parents = parent_indices(elements, threshold);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); elements.len()];
    let mut roots = Vec::new();
    for (i, p) in parents.iter().enumerate() {
        match p {
            Some(p) => children[*p].push(i),
            None => roots.push(i),
        }
    }
    // Parents are strictly larger than their children, so recursion depth
    // is bounded and there are no cycles.
    fn node(i: usize, elements: &[GuiElement], children: &[Vec<usize>]) -> GuiNode {
        GuiNode {
            element: elements[i].clone(),
            children: children[i].iter().map(|&c| node(c, elements, children)).collect(),
        }
    }
    GuiTree { roots: roots.into_iter().map(|r| node(r, elements, &children)).collect() }
}
