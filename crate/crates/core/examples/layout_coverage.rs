//! Builds the padded icosahedron layout and reports how many tangent images
//! see each ERP pixel.
//!
//!     cargo run --release --example layout_coverage -- 0.3 1024

use anyhow::Result;
use panodepth::geometry::{build_icosahedron_layout, coverage_map};

pub fn run(padding: f64, erp_width: usize) -> Result<[usize; 8]> {
    let layout = build_icosahedron_layout(padding, 400, 346)?;
    let coverage = coverage_map(&layout, erp_width, erp_width / 2)?;
    let mut histogram = [0usize; 8];
    for c in coverage {
        histogram[(c as usize).min(7)] += 1;
    }
    Ok(histogram)
}

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let padding: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.3);
    let width: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1024);

    let layout = build_icosahedron_layout(padding, 400, 346)?;
    println!("layout hash {}", layout.hash());
    for cam in &layout.cameras {
        let r = cam.rect();
        println!(
            "face {:2}: lon {:7.2} lat {:6.2}  plane x [{:+.3}, {:+.3}] y [{:+.3}, {:+.3}]  radius {:.1} deg",
            cam.face_index,
            cam.tangent_point.lon.to_degrees(),
            cam.tangent_point.lat.to_degrees(),
            r.x_min,
            r.x_max,
            r.y_min,
            r.y_max,
            cam.max_angular_radius().to_degrees(),
        );
    }

    let histogram = run(padding, width)?;
    let total: usize = histogram.iter().sum();
    println!("coverage at {}x{} (p = {padding}):", width, width / 2);
    for (k, &n) in histogram.iter().enumerate().filter(|(_, &n)| n > 0) {
        println!(
            "  {k} views: {:6.3}% of pixels",
            100.0 * n as f64 / total as f64
        );
    }
    Ok(())
}
