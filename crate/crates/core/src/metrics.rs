//! Image quality metrics on 8-bit intensities.

use crate::error::Result;
use crate::image::GrayImage;

const WINDOW: usize = 8;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const L: f64 = 255.0;

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.check_same_dims(b)?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.pixels().len() as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (L * L / m).log10())
}

/// Mean SSIM over all 8x8 windows (stride 1) with uniform weights and
/// sample (n - 1) variances. Images smaller than the window use one window
/// covering the whole image.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.check_same_dims(b)?;
    let (w, h) = (a.width(), a.height());
    let (ww, wh) = (WINDOW.min(w), WINDOW.min(h));
    let c1 = (K1 * L).powi(2);
    let c2 = (K2 * L).powi(2);
    let n = (ww * wh) as f64;
    let norm = if ww * wh > 1 { n - 1.0 } else { 1.0 };

    // Summed-area tables of x, y, x^2, y^2, xy.
    let stride = w + 1;
    let mut sat = vec![[0f64; 5]; stride * (h + 1)];
    for y in 0..h {
        let mut row = [0f64; 5];
        for x in 0..w {
            let p = a.get(x, y) as f64;
            let q = b.get(x, y) as f64;
            for (acc, v) in row.iter_mut().zip([p, q, p * p, q * q, p * q]) {
                *acc += v;
            }
            let above = sat[y * stride + x + 1];
            let cell = &mut sat[(y + 1) * stride + x + 1];
            for k in 0..5 {
                cell[k] = above[k] + row[k];
            }
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - wh {
        for x0 in 0..=w - ww {
            let (x1, y1) = (x0 + ww, y0 + wh);
            let mut s = [0f64; 5];
            for k in 0..5 {
                s[k] = sat[y1 * stride + x1][k] - sat[y0 * stride + x1][k] - sat[y1 * stride + x0][k]
                    + sat[y0 * stride + x0][k];
            }
            let (mx, my) = (s[0] / n, s[1] / n);
            let vx = (s[2] - n * mx * mx) / norm;
            let vy = (s[3] - n * my * my) / norm;
            let cov = (s[4] - n * mx * my) / norm;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ssim_direct(a: &GrayImage, b: &GrayImage) -> f64 {
        let mut total = 0.0;
        let mut count = 0;
        for y0 in 0..=a.height() - 8 {
            for x0 in 0..=a.width() - 8 {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for y in y0..y0 + 8 {
                    for x in x0..x0 + 8 {
                        xs.push(a.get(x, y) as f64);
                        ys.push(b.get(x, y) as f64);
                    }
                }
                let mx = xs.iter().sum::<f64>() / 64.0;
                let my = ys.iter().sum::<f64>() / 64.0;
                let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / 63.0;
                let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / 63.0;
                let c = xs.iter().zip(&ys).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / 63.0;
                let (c1, c2) = (2.55f64.powi(2), 7.65f64.powi(2));
                total += ((2.0 * mx * my + c1) * (2.0 * c + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn identical_images() {
        let img = GrayImage::from_fn(16, 16, |x, y| (x * 13 + y * 7) as u8).unwrap();
        assert_eq!(mse(&img, &img).unwrap(), 0.0);
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_offset_psnr() {
        let a = GrayImage::from_fn(10, 10, |x, y| (x + y) as u8).unwrap();
        let b = GrayImage::from_fn(10, 10, |x, y| (x + y + 1) as u8).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        assert!((psnr(&a, &b).unwrap() - 10.0 * 65025f64.log10()).abs() < 1e-9);
        assert!((psnr(&a, &b).unwrap() - 48.13).abs() < 0.01);
    }

    #[test]
    fn checkerboard_against_inverse() {
        let a = GrayImage::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { 255 } else { 0 }).unwrap();
        let b = GrayImage::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 }).unwrap();
        let s = ssim(&a, &b).unwrap();
        assert!((s - ssim_direct(&a, &b)).abs() < 1e-9);
        assert!(s < -0.99, "{s}");
    }

    #[test]
    fn matches_direct_formula_on_textured_images() {
        let a = GrayImage::from_fn(20, 13, |x, y| ((x * x + 3 * y) % 251) as u8).unwrap();
        let b = GrayImage::from_fn(20, 13, |x, y| ((x * 7 + y * y) % 241) as u8).unwrap();
        assert!((ssim(&a, &b).unwrap() - ssim_direct(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let a = GrayImage::filled(4, 4, 0).unwrap();
        let b = GrayImage::filled(4, 5, 0).unwrap();
        assert!(mse(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }
}
