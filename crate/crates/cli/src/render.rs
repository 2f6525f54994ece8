use std::path::Path;

use anyhow::{Context, Result};
use image::{Rgb, RgbImage};
use pcv_core::{CellTable, Heatmap, InstanceMask, PanopticMap, PeakRegion};

/// Stable pseudo-random color for a label; 0 stays black.
pub fn label_color(label: u64) -> Rgb<u8> {
    if label == 0 {
        return Rgb([0, 0, 0]);
    }
    let mut z = label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z ^= z >> 29;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 32;
    let b = z.to_le_bytes();
    Rgb([64 | b[0], 64 | b[1], 64 | b[2]])
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", path.display()))
}

/// Grayscale heatmap scaled to its maximum.
pub fn heatmap(h: &Heatmap, path: &Path) -> Result<()> {
    let (rows, cols) = h.dim();
    let max = h.max();
    let img = RgbImage::from_fn(cols as u32, rows as u32, |x, y| {
        let v = h.votes[(y as usize, x as usize)];
        let g = if max > 0.0 {
            (v / max * 255.0).round() as u8
        } else {
            0
        };
        Rgb([g, g, g])
    });
    save(&img, path)
}

/// Heatmap in gray with each peak region in its own color.
pub fn peaks(h: &Heatmap, regions: &[PeakRegion], path: &Path) -> Result<()> {
    let (rows, cols) = h.dim();
    let max = h.max();
    let mut img = RgbImage::from_fn(cols as u32, rows as u32, |x, y| {
        let v = h.votes[(y as usize, x as usize)];
        let g = if max > 0.0 {
            (v / max * 128.0).round() as u8
        } else {
            0
        };
        Rgb([g, g, g])
    });
    for (i, region) in regions.iter().enumerate() {
        let color = label_color(i as u64 + 1);
        for &(r, c) in &region.pixels {
            img.put_pixel(c as u32, r as u32, color);
        }
    }
    save(&img, path)
}

pub fn masks(dim: (usize, usize), masks: &[InstanceMask], path: &Path) -> Result<()> {
    let mut img = RgbImage::new(dim.1 as u32, dim.0 as u32);
    for m in masks {
        let color = label_color(m.peak as u64 + 1);
        for &(r, c) in &m.pixels {
            img.put_pixel(c as u32, r as u32, color);
        }
    }
    save(&img, path)
}

pub fn panoptic(map: &PanopticMap, path: &Path) -> Result<()> {
    let (rows, cols) = map.dim();
    let img = RgbImage::from_fn(cols as u32, rows as u32, |x, y| {
        label_color(map.segment_ids[(y as usize, x as usize)] as u64)
    });
    save(&img, path)
}

/// The voting filter with each cell in its own color and the center cell white.
pub fn grid(table: &CellTable, path: &Path) -> Result<()> {
    let side = table.side() as u32;
    let radius = table.radius() as i64;
    let center = table.lookup((0, 0));
    let img = RgbImage::from_fn(side, side, |x, y| {
        match table.lookup((y as i64 - radius, x as i64 - radius)) {
            Some(cell) if Some(cell) == center => Rgb([255, 255, 255]),
            Some(cell) => label_color(cell as u64 + 1),
            None => Rgb([0, 0, 0]),
        }
    });
    save(&img, path)
}
