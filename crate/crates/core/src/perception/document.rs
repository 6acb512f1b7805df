use std::collections::HashMap;
use std::fmt::Write as _;

use super::elements::{normalize_detections, Detection, ElementClass, GuiElement, ImageSize};
use super::hierarchy::{build_hierarchy, GuiNode, GuiTree};
use super::lists::{cluster_lists, Axis, ListGroup};
use super::xycut::xy_cut_order;
use super::{PerceptionConfig, PerceptionError};
use crate::clients::{CaptionQuery, IconCaptioner};

/// Parsed screen: hierarchy in reading order, detected lists and the
/// screen size. Element ids run `0..n` in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenDocument {
    pub tree: GuiTree,
    pub lists: Vec<ListGroup>,
    pub image_size: ImageSize,
}

impl ScreenDocument {
    pub fn empty(image_size: ImageSize) -> Self {
        Self { tree: GuiTree::default(), lists: Vec::new(), image_size }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = &GuiElement> {
        self.tree.elements()
    }

    pub fn element(&self, id: usize) -> Option<&GuiElement> {
        self.elements().find(|e| e.id == id)
    }

    /// The document without geometry, as it appears in rendered text.
    pub fn outline(&self) -> DocumentOutline {
        fn convert(n: &GuiNode) -> OutlineNode {
            OutlineNode {
                id: n.element.id,
                cls: n.element.cls,
                content: n.element.content.clone(),
                inferred: n.element.inferred,
                children: n.children.iter().map(convert).collect(),
            }
        }
        DocumentOutline {
            image_size: self.image_size,
            roots: self.tree.roots.iter().map(convert).collect(),
            lists: self.lists.clone(),
        }
    }
}

/// Bounding-box-free view of a document; what [`parse_document`] recovers.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentOutline {
    pub image_size: ImageSize,
    pub roots: Vec<OutlineNode>,
    pub lists: Vec<ListGroup>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlineNode {
    pub id: usize,
    pub cls: ElementClass,
    pub content: String,
    pub inferred: bool,
    pub children: Vec<OutlineNode>,
}

/// Result of [`build_document`]; captioner failures end up in `warnings`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub document: ScreenDocument,
    pub warnings: Vec<String>,
}

/// Renumbers the tree in pre-order, siblings in their current order.
pub fn assign_ids(tree: GuiTree) -> GuiTree {
    assign_ids_mapped(tree).0
}

fn assign_ids_mapped(mut tree: GuiTree) -> (GuiTree, HashMap<usize, usize>) {
    fn visit(node: &mut GuiNode, next: &mut usize, map: &mut HashMap<usize, usize>) {
        map.insert(node.element.id, *next);
        node.element.id = *next;
        *next += 1;
        for c in &mut node.children {
            visit(c, next, map);
        }
    }
    let mut map = HashMap::new();
    let mut next = 0;
    for r in &mut tree.roots {
        visit(r, &mut next, &mut map);
    }
    (tree, map)
}

fn reading_order(nodes: Vec<GuiNode>) -> Vec<GuiNode> {
    let mut by_id: HashMap<usize, Vec<GuiNode>> = HashMap::new();
    let elements: Vec<GuiElement> = nodes.iter().map(|n| n.element.clone()).collect();
    for n in nodes {
        by_id.entry(n.element.id).or_default().push(n);
    }
    xy_cut_order(elements)
        .into_iter()
        .filter_map(|e| by_id.get_mut(&e.id).and_then(Vec::pop))
        .map(|mut n| {
            n.children = reading_order(std::mem::take(&mut n.children));
            n
        })
        .collect()
}

/// Runs the full perception pipeline on one screen.
///
/// normalize → list clustering → icon captioning → hierarchy → XY-cut at
/// every level → pre-order ids. Icons with empty content are sent to
/// `captioner`; a captioner error leaves the content empty and adds a
/// warning instead of failing the build.
pub fn build_document(
    detections: &[Detection],
    image_size: ImageSize,
    captioner: &dyn IconCaptioner,
    cfg: &PerceptionConfig,
) -> Result<BuildReport, PerceptionError> {
    let normalized = normalize_detections(detections, image_size)?;
    let (lists, mut elements) = cluster_lists(&normalized, image_size, cfg);

    let mut warnings = Vec::new();
    for e in elements.iter_mut().filter(|e| e.cls == ElementClass::Icon && e.content.is_empty()) {
        match captioner.caption(&CaptionQuery::for_bbox(e.bbox)) {
            Ok(text) => e.content = text,
            Err(err) => {
                log::warn!("icon caption failed for element {}: {err}", e.id);
                warnings.push(format!("icon caption failed for element {}: {err}", e.id));
            }
        }
    }

    let tree = build_hierarchy(&elements, cfg.containment);
    let tree = GuiTree { roots: reading_order(tree.roots) };
    let (tree, map) = assign_ids_mapped(tree);
    let lists = lists
        .into_iter()
        .map(|g| ListGroup { member_ids: g.member_ids.iter().map(|id| map[id]).collect(), ..g })
        .collect();
    Ok(BuildReport { document: ScreenDocument { tree, lists, image_size }, warnings })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    const ENTITIES: [(&str, char); 6] =
        [("&lt;", '<'), ("&gt;", '>'), ("&amp;", '&'), ("&quot;", '"'), ("&#10;", '\n'), ("&#13;", '\r')];
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        match ENTITIES.iter().find(|(name, _)| rest.starts_with(name)) {
            Some((name, ch)) => {
                out.push(*ch);
                rest = &rest[name.len()..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn render_node(node: &OutlineNode, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let mut attrs = format!("id={}", node.id);
    if node.inferred {
        attrs.push_str(" inferred=true");
    }
    let cls = node.cls.as_str();
    let has_content = !node.content.is_empty();
    if node.cls.is_pictorial() && has_content {
        let _ = write!(attrs, " alt=\"{}\"", escape(&node.content));
    }
    if node.children.is_empty() {
        if has_content && !node.cls.is_pictorial() {
            let _ = writeln!(out, "{indent}<{cls} {attrs}>{}</{cls}>", escape(&node.content));
        } else {
            let _ = writeln!(out, "{indent}<{cls} {attrs}/>");
        }
    } else {
        if has_content && !node.cls.is_pictorial() {
            let _ = write!(attrs, " text=\"{}\"", escape(&node.content));
        }
        let _ = writeln!(out, "{indent}<{cls} {attrs}>");
        for c in &node.children {
            render_node(c, depth + 1, out);
        }
        let _ = writeln!(out, "{indent}</{cls}>");
    }
}

/// Renders an outline in the HTML-like screen format.
pub fn render_outline(doc: &DocumentOutline) -> String {
    let mut out = format!("<screen w={} h={}>\n", doc.image_size.width, doc.image_size.height);
    for r in &doc.roots {
        render_node(r, 1, &mut out);
    }
    for g in &doc.lists {
        let ids: Vec<String> = g.member_ids.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "  <!-- list: ids=[{}] axis={} pitch={} -->", ids.join(","), g.axis, g.pitch);
    }
    out.push_str("</screen>");
    out
}

/// Renders a document in the HTML-like screen format fed to the LLM.
///
/// ```text
/// <screen w=1080 h=2400>
///   <Modal id=0>
///     <Text id=1>Delete file?</Text>
///     <Icon id=2 alt="close"/>
///     <Button id=3/>
///   </Modal>
///   <!-- list: ids=[1,2] axis=vertical pitch=100 -->
/// </screen>
/// ```
pub fn render_document(doc: &ScreenDocument) -> String {
    render_outline(&doc.outline())
}

struct Tag {
    name: String,
    attrs: Vec<(String, String)>,
    self_closing: bool,
    /// Text following the opening tag on the same line.
    rest: String,
}

fn syntax(line: usize, message: impl Into<String>) -> PerceptionError {
    PerceptionError::Syntax { line, message: message.into() }
}

fn parse_tag(s: &str, line: usize) -> Result<Tag, PerceptionError> {
    let body = s.strip_prefix('<').ok_or_else(|| syntax(line, "expected '<'"))?;
    let name_end = body
        .find(|c: char| c.is_whitespace() || c == '>' || c == '/')
        .ok_or_else(|| syntax(line, "unterminated tag"))?;
    let name = &body[..name_end];
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(syntax(line, format!("bad tag name {name:?}")));
    }
    let mut rest = &body[name_end..];
    let mut attrs = Vec::new();
    loop {
        rest = rest.trim_start();
        if let Some(r) = rest.strip_prefix("/>") {
            return Ok(Tag { name: name.to_string(), attrs, self_closing: true, rest: r.to_string() });
        }
        if let Some(r) = rest.strip_prefix('>') {
            return Ok(Tag { name: name.to_string(), attrs, self_closing: false, rest: r.to_string() });
        }
        let eq = rest.find('=').ok_or_else(|| syntax(line, "expected attribute"))?;
        let key = &rest[..eq];
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(syntax(line, format!("bad attribute name {key:?}")));
        }
        rest = &rest[eq + 1..];
        let value = if let Some(r) = rest.strip_prefix('"') {
            let close = r.find('"').ok_or_else(|| syntax(line, "unterminated attribute value"))?;
            let v = unescape(&r[..close]);
            rest = &r[close + 1..];
            v
        } else {
            let end = rest
                .find(|c: char| c.is_whitespace() || c == '>' || c == '/')
                .ok_or_else(|| syntax(line, "unterminated tag"))?;
            let v = rest[..end].to_string();
            rest = &rest[end..];
            v
        };
        if attrs.iter().any(|(k, _)| k == key) {
            return Err(syntax(line, format!("repeated attribute {key}")));
        }
        attrs.push((key.to_string(), value));
    }
}

fn parse_screen(line_text: &str) -> Result<ImageSize, PerceptionError> {
    let tag = parse_tag(line_text, 1)?;
    if tag.name != "screen" || tag.self_closing || !tag.rest.is_empty() {
        return Err(syntax(1, "expected <screen w=.. h=..>"));
    }
    let get = |k: &str| -> Result<u32, PerceptionError> {
        tag.attrs
            .iter()
            .find(|(key, _)| key == k)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| syntax(1, format!("screen needs numeric {k}")))
    };
    if tag.attrs.len() != 2 {
        return Err(syntax(1, "screen takes exactly w and h"));
    }
    Ok(ImageSize::new(get("w")?, get("h")?))
}

fn parse_list(text: &str, line: usize) -> Result<ListGroup, PerceptionError> {
    let body = text
        .strip_prefix("<!-- list:")
        .and_then(|t| t.strip_suffix("-->"))
        .ok_or_else(|| syntax(line, "malformed list comment"))?;
    let mut ids = None;
    let mut axis = None;
    let mut pitch = None;
    for part in body.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| syntax(line, format!("bad list field {part:?}")))?;
        match k {
            "ids" => {
                let inner = v
                    .strip_prefix('[')
                    .and_then(|v| v.strip_suffix(']'))
                    .ok_or_else(|| syntax(line, "ids must be [..]"))?;
                let parsed: Result<Vec<usize>, _> =
                    inner.split(',').filter(|s| !s.is_empty()).map(str::parse).collect();
                ids = Some(parsed.map_err(|_| syntax(line, "bad list id"))?);
            }
            "axis" => axis = Some(v.parse::<Axis>().map_err(|e| syntax(line, e))?),
            "pitch" => pitch = Some(v.parse::<f64>().map_err(|_| syntax(line, "bad pitch"))?),
            _ => return Err(syntax(line, format!("unknown list field {k}"))),
        }
    }
    match (ids, axis, pitch) {
        (Some(member_ids), Some(axis), Some(pitch)) => Ok(ListGroup { member_ids, axis, pitch }),
        _ => Err(syntax(line, "list comment needs ids, axis and pitch")),
    }
}

fn node_from_tag(tag: &Tag, line: usize) -> Result<(OutlineNode, ElementClass), PerceptionError> {
    let cls: ElementClass = tag
        .name
        .parse()
        .ok()
        .filter(|c: &ElementClass| c.as_str() == tag.name)
        .ok_or_else(|| syntax(line, format!("unknown element {:?}", tag.name)))?;
    let mut id = None;
    let mut inferred = false;
    let mut content = String::new();
    for (k, v) in &tag.attrs {
        match k.as_str() {
            "id" => id = Some(v.parse::<usize>().map_err(|_| syntax(line, format!("bad id {v:?}")))?),
            "inferred" => {
                inferred = match v.as_str() {
                    "true" => true,
                    "false" => false,
                    _ => return Err(syntax(line, format!("bad inferred value {v:?}"))),
                }
            }
            "alt" | "text" => content = v.clone(),
            _ => return Err(syntax(line, format!("unknown attribute {k}"))),
        }
    }
    let id = id.ok_or_else(|| syntax(line, "missing id"))?;
    Ok((OutlineNode { id, cls, content, inferred, children: Vec::new() }, cls))
}

/// Parses the text produced by [`render_document`] back into an outline.
pub fn parse_document(text: &str) -> Result<DocumentOutline, PerceptionError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let first = lines.by_ref().find(|(_, l)| !l.is_empty());
    let Some((1, first)) = first else {
        return Err(syntax(1, "expected <screen w=.. h=..>"));
    };
    let image_size = parse_screen(first)?;

    // Open containers: (node, opening line).
    let mut stack: Vec<(OutlineNode, usize)> = Vec::new();
    let mut roots = Vec::new();
    let mut lists = Vec::new();
    let mut seen: HashMap<usize, usize> = HashMap::new();
    let mut closed = false;

    let attach = |node: OutlineNode, stack: &mut Vec<(OutlineNode, usize)>, roots: &mut Vec<OutlineNode>| {
        match stack.last_mut() {
            Some((parent, _)) => parent.children.push(node),
            None => roots.push(node),
        }
    };

    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if closed {
            return Err(syntax(n, "content after </screen>"));
        }
        if line.starts_with("<!--") {
            if !stack.is_empty() {
                return Err(syntax(n, "list comment inside an element"));
            }
            lists.push(parse_list(line, n)?);
            continue;
        }
        if let Some(name) = line.strip_prefix("</").and_then(|l| l.strip_suffix('>')) {
            if name == "screen" {
                if let Some((_, open)) = stack.last() {
                    return Err(syntax(*open, "unclosed element"));
                }
                closed = true;
                continue;
            }
            let (node, open) = stack.pop().ok_or_else(|| syntax(n, format!("unexpected </{name}>")))?;
            if node.cls.as_str() != name {
                return Err(syntax(n, format!("</{name}> closes <{}> from line {open}", node.cls)));
            }
            attach(node, &mut stack, &mut roots);
            continue;
        }
        let tag = parse_tag(line, n)?;
        let (mut node, cls) = node_from_tag(&tag, n)?;
        if let Some(_first) = seen.insert(node.id, n) {
            return Err(PerceptionError::DuplicateId { id: node.id, line: n });
        }
        if tag.self_closing {
            if !tag.rest.is_empty() {
                return Err(syntax(n, "text after self-closing tag"));
            }
            attach(node, &mut stack, &mut roots);
        } else if tag.rest.is_empty() {
            stack.push((node, n));
        } else {
            let close = format!("</{}>", cls.as_str());
            let content = tag.rest.strip_suffix(&close).ok_or_else(|| syntax(n, "unclosed element"))?;
            if content.contains('<') {
                return Err(syntax(n, "unescaped '<' in content"));
            }
            node.content = unescape(content);
            attach(node, &mut stack, &mut roots);
        }
    }
    if let Some((_, open)) = stack.first() {
        return Err(syntax(*open, "unclosed element"));
    }
    if !closed {
        return Err(syntax(1, "missing </screen>"));
    }
    Ok(DocumentOutline { image_size, roots, lists })
}
