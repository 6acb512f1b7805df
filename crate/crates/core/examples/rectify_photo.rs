//! Straightens a skewed screen in a synthetic "camera photo".
//!
//! cargo run --example rectify_photo [out.png]

use guis::geometry::{homography_from_quad, rectify, warp_perspective, Point};
use guis::raster::Image;

fn main() -> anyhow::Result<()> {
    // A 90x160 "screen" with a checker pattern and a dark status bar.
    let screen = Image::from_fn(90, 160, |x, y| {
        if y < 12 {
            [30, 30, 30]
        } else if (x / 15 + y / 20) % 2 == 0 {
            [240, 240, 240]
        } else {
            [70, 130, 200]
        }
    });

    // Photograph it: place the screen as a tilted quad in a 200x240 frame.
    let quad = [Point::new(48.0, 30.0), Point::new(150.0, 40.0), Point::new(160.0, 210.0), Point::new(35.0, 200.0)];
    let corners = [Point::new(0.0, 0.0), Point::new(89.0, 0.0), Point::new(89.0, 159.0), Point::new(0.0, 159.0)];
    let to_photo = homography_from_quad(&corners, &quad)?;
    let photo = warp_perspective(&screen, &to_photo, 200, 240)?;

    let recovered = rectify(&photo, &quad, 90, 160)?;
    let mut worst = 0u8;
    for y in 0..160 {
        for x in 0..90 {
            for (a, b) in screen.pixel(x, y).iter().zip(recovered.pixel(x, y)) {
                worst = worst.max(a.abs_diff(b));
            }
        }
    }
    let interior_err = (20..140)
        .flat_map(|y| (10..80).map(move |x| (x, y)))
        .map(|(x, y)| screen.pixel(x, y)[0].abs_diff(recovered.pixel(x, y)[0]) as f64)
        .sum::<f64>()
        / (120.0 * 70.0);
    println!("photo {}x{}, rectified {}x{}", photo.width(), photo.height(), recovered.width(), recovered.height());
    println!("max channel error {worst}, mean interior red error {interior_err:.2}");

    if let Some(out) = std::env::args_os().nth(1) {
        recovered.save_png(&out)?;
        photo.save_png(std::path::Path::new(&out).with_extension("photo.png"))?;
        println!("wrote {}", out.to_string_lossy());
    }
    Ok(())
}
