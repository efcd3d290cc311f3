//! Fixtures shared by the criterion benches.

use screamsim::apps::{self, App, Scene};
use screamsim::GrayImage;

/// Top-left `size`x`size` crop of the first corpus scene for `app`.
pub fn scene(app: App, size: usize) -> Scene {
    let crop = |img: &GrayImage| GrayImage::from_fn(size, size, |x, y| img.get(x, y)).expect("size is nonzero");
    match &apps::corpus_scenes(app)[0].1 {
        Scene::Matte { fg, bg, alpha } => Scene::Matte {
            fg: crop(fg),
            bg: crop(bg),
            alpha: crop(alpha),
        },
        Scene::Upscale(img) => Scene::Upscale(crop(img)),
    }
}
