//! Deterministic 64x64 synthetic test images and the scenes built from them.

use crate::image::GrayImage;

pub const SIZE: usize = 64;

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn gaussian(x: f64, y: f64, cx: f64, cy: f64, s: f64) -> f64 {
    (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
}

fn make(f: impl Fn(f64, f64) -> f64) -> GrayImage {
    GrayImage::from_fn(SIZE, SIZE, |x, y| clamp_u8(f(x as f64, y as f64))).expect("corpus size is nonzero")
}

/// Horizontal ramp with a gentle vertical tilt.
pub fn gradient() -> GrayImage {
    make(|x, y| 16.0 + 3.0 * x + 0.5 * y)
}

/// 8x8-pixel checkerboard between two mid-range levels.
pub fn checkerboard() -> GrayImage {
    make(|x, y| {
        if ((x as usize / 8) + (y as usize / 8)) % 2 == 0 {
            56.0
        } else {
            200.0
        }
    })
}

/// Three overlapping Gaussian blobs on a dark floor.
pub fn blobs() -> GrayImage {
    make(|x, y| {
        30.0 + 200.0 * gaussian(x, y, 18.0, 20.0, 9.0)
            + 150.0 * gaussian(x, y, 44.0, 40.0, 12.0)
            + 120.0 * gaussian(x, y, 30.0, 52.0, 6.0)
    })
}

/// Concentric rings around the image centre.
pub fn rings() -> GrayImage {
    make(|x, y| {
        let r = ((x - 31.5).powi(2) + (y - 31.5).powi(2)).sqrt();
        128.0 + 90.0 * (r / 3.0).cos()
    })
}

/// Soft elliptical matte, opaque in the middle.
pub fn alpha_soft() -> GrayImage {
    make(|x, y| 255.0 * (1.4 * gaussian(x, y * 1.3, 32.0, 40.0, 14.0)).min(1.0))
}

/// Diagonal alpha ramp from transparent to opaque.
pub fn alpha_ramp() -> GrayImage {
    make(|x, y| (x + y) * 255.0 / 126.0)
}

/// Every corpus image with its name, in a fixed order.
pub fn all() -> Vec<(&'static str, GrayImage)> {
    vec![
        ("gradient", gradient()),
        ("checkerboard", checkerboard()),
        ("blobs", blobs()),
        ("rings", rings()),
        ("alpha_soft", alpha_soft()),
        ("alpha_ramp", alpha_ramp()),
    ]
}

/// Foreground, background and alpha for the compositing and matting scenes.
pub struct MatteScene {
    pub name: &'static str,
    pub fg: GrayImage,
    pub bg: GrayImage,
    pub alpha: GrayImage,
}

pub fn matte_scenes() -> Vec<MatteScene> {
    vec![
        MatteScene {
            name: "blobs_over_checkerboard",
            fg: blobs(),
            bg: checkerboard(),
            alpha: alpha_soft(),
        },
        MatteScene {
            name: "rings_over_gradient",
            fg: rings(),
            bg: gradient(),
            alpha: alpha_ramp(),
        },
    ]
}

/// Inputs for the bilinear upscaling scenes.
pub fn upscale_scenes() -> Vec<(&'static str, GrayImage)> {
    vec![("blobs", blobs()), ("rings", rings())]
}
