//! Augments a small batch of generated screenshots and prints the drawn
//! parameters. Results depend only on the seed and the image's index.
//!
//! cargo run --example augment_batch [out_dir]

use guis::augmentation::{augment, AugmentConfig, AugmentOp};
use guis::raster::Image;

fn screenshot(i: u32) -> Image {
    Image::from_fn(120, 200, move |x, y| {
        let band = (y / 25 + i) % 3;
        match band {
            0 => [250, 250, 250],
            1 => [(x * 2) as u8, 120, 180],
            _ => [40, 40, (y as u8).wrapping_mul(3)],
        }
    })
}

fn main() -> anyhow::Result<()> {
    let out_dir = std::env::args_os().nth(1);
    let cfg = AugmentConfig { seed: 42, ..Default::default() };
    println!("ops in order: {:?}", AugmentOp::ORDER);
    for i in 0..4u32 {
        let img = screenshot(i);
        let (aug, rec) = augment(&img, &cfg, i as u64)?;
        let changed = img.data().iter().zip(aug.data()).filter(|(a, b)| a != b).count();
        println!(
            "image {i}: light {:?}, noise sigma {:.2}, rotation {:+.2} deg, {:.1}% samples changed",
            rec.light.map(|(s, _, _)| format!("{s:+.2}")),
            rec.noise_sigma.unwrap_or(0.0),
            rec.rotation_deg.unwrap_or(0.0),
            100.0 * changed as f64 / img.data().len() as f64
        );
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
            aug.save_png(std::path::Path::new(dir).join(format!("aug_{i}.png")))?;
        }
    }

    // Only color ops: useful when annotation boxes must stay put.
    let color = AugmentConfig { ops: vec![AugmentOp::Light, AugmentOp::Noise], ..cfg };
    let (_, rec) = augment(&screenshot(0), &color, 0)?;
    println!("color-only geometry is identity: {}", rec.geometry.is_identity());
    Ok(())
}
