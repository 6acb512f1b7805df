//! Turns a detection file into the screen document the agent reads.
//!
//! cargo run --example parse_screen [detections.json]

use std::path::PathBuf;

use guis::clients::TableCaptioner;
use guis::perception::{build_document, render_document, DetectionFile, PerceptionConfig};

fn main() -> anyhow::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/screens/dialog.json"));
    let file = DetectionFile::from_json(&std::fs::read_to_string(&path)?)?;
    let report = build_document(&file.elements, file.image, &TableCaptioner::default(), &PerceptionConfig::default())?;

    println!("{}", render_document(&report.document));
    println!();
    println!("{} detections -> {} elements", file.elements.len(), report.document.len());
    for (depth, node) in report.document.tree.walk() {
        let e = &node.element;
        println!("{:indent$}#{} {} at {:?}", "", e.id, e.cls.as_str(), e.bbox.to_array(), indent = depth * 2);
    }
    for list in &report.document.lists {
        println!("list {:?} along {} every {:.0} px", list.member_ids, list.axis, list.pitch);
    }
    Ok(())
}
