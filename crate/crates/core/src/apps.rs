//! Image compositing, bilinear 2x upscaling and alpha matting, run three
//! ways: through the stochastic pipeline (software gates or CIM), through the
//! bit-serial binary CIM baseline, and exactly in integer arithmetic.
//!
//! Pixels map to stochastic values `p = pixel / 256` (`M = 8`) and come back
//! through the 8-bit ADC as `round(255 p)`.
//!
//! Blends use 3-input majority in the CIM backend and a 2-to-1 multiplexer in
//! the software backend. In the default steered mode both data streams come
//! from one shared random plane, so one of them covers the other bit for
//! bit; feeding the select (or its complement, chosen per pixel so the
//! weight lands on the right operand) then makes MAJ equal to MUX exactly.
//! The plain mode uses independent planes and the raw select, exposing the
//! majority approximation error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::{constant, BinaryCim, Bit, Word};
use crate::bitstream::BitStream;
use crate::crossbar::{CostLedger, FaultModel};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::imsng::{self, SngVariant};
use crate::metrics;
use crate::ops::{sc_abs_sub, sc_div_cordiv, sc_mux, sc_not, sc_scaled_add, Backend};
use crate::sng::{compare_words, SngConfig};
use crate::source::{derive_seed, SourceSpec};
use crate::stob::{stob_adc, AdcConfig};

const M: u32 = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    #[default]
    Steered,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum App {
    Composite,
    Bilinear,
    Matting,
}

impl App {
    pub const ALL: [App; 3] = [App::Composite, App::Bilinear, App::Matting];

    pub fn name(self) -> &'static str {
        match self {
            App::Composite => "composite",
            App::Bilinear => "bilinear",
            App::Matting => "matting",
        }
    }

    pub fn from_name(s: &str) -> Result<App> {
        App::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown application {s:?}")))
    }
}

/// Settings shared by the stochastic pipelines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    /// Stream length.
    pub n: usize,
    pub source: SourceSpec,
    pub variant: SngVariant,
    pub seed: u64,
    /// Symmetric per-sensed-bit flip probability.
    pub p_f: f64,
    pub select: SelectMode,
    pub adc: AdcConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            n: 256,
            source: SourceSpec::trng(),
            variant: SngVariant::Opt,
            seed: 0,
            p_f: 0.0,
            select: SelectMode::Steered,
            adc: AdcConfig::default(),
        }
    }
}

impl AppConfig {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_p_f(mut self, p_f: f64) -> Self {
        self.p_f = p_f;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("stream length N must be positive"));
        }
        FaultModel::new(self.p_f, 0).map(|_| ())
    }
}

/// Per-pixel stochastic engine with its own seeds, faults and ledger.
struct Pixel<'c> {
    cfg: &'c AppConfig,
    backend: Backend,
    seed: u64,
    fault: FaultModel,
    ledger: CostLedger,
}

impl<'c> Pixel<'c> {
    fn new(cfg: &'c AppConfig, backend: Backend, index: u64) -> Result<Self> {
        let seed = derive_seed(cfg.seed, index);
        Ok(Pixel {
            cfg,
            backend,
            seed,
            fault: FaultModel::new(cfg.p_f, derive_seed(seed, u64::MAX))?,
            ledger: CostLedger::new(),
        })
    }

    /// Streams for `values`, all compared against one shared plane.
    fn streams(&mut self, values: &[u8], group: u64) -> Result<Vec<BitStream>> {
        let sng = SngConfig::new(M, self.cfg.n, self.cfg.source.clone(), self.seed).with_group(group);
        match self.backend {
            Backend::Cim => {
                let mut array = imsng::array_for(&sng)?;
                // Plane loads are left out of the ledger, as in the per-operation
                // cost rows the unit costs are fitted to.
                let plane = imsng::load_block(&mut array, 0, sng.draw()?, &mut CostLedger::new())?;
                values
                    .iter()
                    .map(|&v| {
                        imsng::generate_on_plane(
                            &mut array,
                            v as u64,
                            &plane,
                            self.cfg.variant,
                            &mut self.fault,
                            &mut self.ledger,
                        )
                    })
                    .collect()
            }
            Backend::Software => {
                let words = sng.draw()?.into_words();
                values.iter().map(|&v| compare_words(v as u64, &words)).collect()
            }
        }
    }

    fn stream(&mut self, value: u8, group: u64) -> Result<BitStream> {
        Ok(self.streams(&[value], group)?.pop().expect("one stream requested"))
    }

    /// `s * a + (1 - s) * b` where `s` is the select's value.
    fn blend(&mut self, a: &BitStream, b: &BitStream, a_covers_b: bool, s: &BitStream) -> Result<BitStream> {
        match self.backend {
            Backend::Software => sc_mux(a, b, s),
            Backend::Cim => {
                if a_covers_b || self.cfg.select == SelectMode::Plain {
                    sc_scaled_add(a, b, s, Backend::Cim, &mut self.fault, &mut self.ledger)
                } else {
                    let ns = sc_not(s, Backend::Cim, &mut self.fault, &mut self.ledger)?;
                    sc_scaled_add(a, b, &ns, Backend::Cim, &mut self.fault, &mut self.ledger)
                }
            }
        }
    }

    /// Two data streams: one shared plane when steered, two planes when plain.
    fn pair(&mut self, a: u8, b: u8) -> Result<(BitStream, BitStream)> {
        if self.cfg.select == SelectMode::Plain {
            Ok((self.stream(a, 0)?, self.stream(b, 1)?))
        } else {
            let mut v = self.streams(&[a, b], 0)?;
            let sb = v.pop().expect("two streams");
            Ok((v.pop().expect("two streams"), sb))
        }
    }

    fn read_out(&mut self, s: &BitStream) -> u8 {
        let code = match self.backend {
            Backend::Cim => stob_adc(s, &self.cfg.adc, &mut self.ledger),
            Backend::Software => stob_adc(s, &self.cfg.adc, &mut CostLedger::new()),
        };
        code.min(255) as u8
    }

    fn composite(&mut self, f: u8, b: u8, alpha: u8) -> Result<u8> {
        let (sf, sb) = self.pair(f, b)?;
        let sel = self.stream(alpha, 2)?;
        let out = self.blend(&sf, &sb, f >= b, &sel)?;
        Ok(self.read_out(&out))
    }

    /// One output pixel of the 2x upscale. `taps` are the neighbours with
    /// nonzero weight: one (grid point), two (edge midpoint) or four (cell
    /// centre).
    fn bilinear(&mut self, taps: &[u8]) -> Result<u8> {
        let half = 128u8;
        let out = match *taps {
            [v] => self.stream(v, 0)?,
            [a, b] => {
                let (sa, sb) = self.pair(a, b)?;
                let sel = self.stream(half, 2)?;
                self.blend(&sa, &sb, a >= b, &sel)?
            }
            [..] => {
                let mut v = taps.to_vec();
                if self.cfg.select == SelectMode::Steered {
                    // Pair the two smallest and the two largest so the second
                    // stage also sees nested streams.
                    v.sort_unstable();
                }
                let (lo, hi) = match self.cfg.select {
                    SelectMode::Steered => {
                        let s = self.streams(&v, 0)?;
                        let sel = self.stream(half, 2)?;
                        let lo = self.blend(&s[1], &s[0], true, &sel)?;
                        let hi = self.blend(&s[3], &s[2], true, &sel)?;
                        (lo, hi)
                    }
                    SelectMode::Plain => {
                        let s: Vec<BitStream> = (0..4).map(|k| self.stream(v[k], k as u64)).collect::<Result<_>>()?;
                        let s1 = self.stream(half, 4)?;
                        let s2 = self.stream(half, 5)?;
                        (
                            self.blend(&s[0], &s[1], true, &s1)?,
                            self.blend(&s[2], &s[3], true, &s2)?,
                        )
                    }
                };
                let sel = self.stream(half, 6)?;
                self.blend(&hi, &lo, true, &sel)?
            }
        };
        Ok(self.read_out(&out))
    }

    fn matting(&mut self, i: u8, f: u8, b: u8) -> Result<u8> {
        if f == b {
            return Ok(0);
        }
        let i = i.clamp(f.min(b), f.max(b));
        let s = self.streams(&[i, f, b], 0)?;
        let k = self.backend;
        let num = sc_abs_sub(&s[0], &s[2], k, &mut self.fault, &mut self.ledger)?;
        let den = sc_abs_sub(&s[1], &s[2], k, &mut self.fault, &mut self.ledger)?;
        let q = sc_div_cordiv(&num, &den, k, &mut self.fault, &mut self.ledger)?;
        Ok(self.read_out(&q))
    }
}

/// Runs `f` for every pixel of a `w x h` output in parallel rows and merges
/// the per-pixel ledgers. Results do not depend on the thread count.
fn per_pixel<F>(
    w: usize,
    h: usize,
    cfg: &AppConfig,
    backend: Backend,
    ledger: &mut CostLedger,
    f: F,
) -> Result<GrayImage>
where
    F: Fn(&mut Pixel, usize, usize) -> Result<u8> + Sync,
{
    cfg.validate()?;
    let rows: Vec<(Vec<u8>, CostLedger)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w);
            let mut led = CostLedger::new();
            for x in 0..w {
                let mut px = Pixel::new(cfg, backend, (y * w + x) as u64)?;
                row.push(f(&mut px, x, y)?);
                led.merge(&px.ledger);
            }
            Ok((row, led))
        })
        .collect::<Result<_>>()?;
    let mut pixels = Vec::with_capacity(w * h);
    for (row, led) in rows {
        pixels.extend(row);
        ledger.merge(&led);
    }
    GrayImage::new(w, h, pixels)
}

fn check3(a: &GrayImage, b: &GrayImage, c: &GrayImage) -> Result<()> {
    a.check_same_dims(b)?;
    a.check_same_dims(c)
}

fn check_upscalable(img: &GrayImage) -> Result<()> {
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::invalid(format!(
            "bilinear upscaling needs at least 2x2 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Neighbour values with nonzero weight for output pixel `(ox, oy)`.
fn bilinear_taps(img: &GrayImage, ox: usize, oy: usize) -> Vec<u8> {
    let (x0, y0) = ((ox / 2) as isize, (oy / 2) as isize);
    match (ox % 2, oy % 2) {
        (0, 0) => vec![img.get_clamped(x0, y0)],
        (1, 0) => vec![img.get_clamped(x0, y0), img.get_clamped(x0 + 1, y0)],
        (0, 1) => vec![img.get_clamped(x0, y0), img.get_clamped(x0, y0 + 1)],
        _ => vec![
            img.get_clamped(x0, y0),
            img.get_clamped(x0 + 1, y0),
            img.get_clamped(x0, y0 + 1),
            img.get_clamped(x0 + 1, y0 + 1),
        ],
    }
}

/// `C = F * alpha + B * (1 - alpha)` per pixel, alpha as the select stream.
pub fn composite(
    fg: &GrayImage,
    bg: &GrayImage,
    alpha: &GrayImage,
    cfg: &AppConfig,
    backend: Backend,
    ledger: &mut CostLedger,
) -> Result<GrayImage> {
    check3(fg, bg, alpha)?;
    per_pixel(fg.width(), fg.height(), cfg, backend, ledger, |px, x, y| {
        px.composite(fg.get(x, y), bg.get(x, y), alpha.get(x, y))
    })
}

/// 2x bilinear upscale; sample `(ox, oy)` sits at source position
/// `(ox / 2, oy / 2)` with the far neighbours clamped at the border.
pub fn bilinear_upscale(
    img: &GrayImage,
    cfg: &AppConfig,
    backend: Backend,
    ledger: &mut CostLedger,
) -> Result<GrayImage> {
    check_upscalable(img)?;
    per_pixel(2 * img.width(), 2 * img.height(), cfg, backend, ledger, |px, x, y| {
        px.bilinear(&bilinear_taps(img, x, y))
    })
}

/// Estimated alpha `|I - B| / |F - B|` per pixel via XOR subtraction on one
/// shared plane and CORDIV. `I` is first clamped between `F` and `B`; pixels
/// with `F == B` get alpha 0.
pub fn matting(
    i: &GrayImage,
    fg: &GrayImage,
    bg: &GrayImage,
    cfg: &AppConfig,
    backend: Backend,
    ledger: &mut CostLedger,
) -> Result<GrayImage> {
    check3(i, fg, bg)?;
    per_pixel(i.width(), i.height(), cfg, backend, ledger, |px, x, y| {
        px.matting(i.get(x, y), fg.get(x, y), bg.get(x, y))
    })
}

/// Number of pixels where `F == B`, for which alpha is undefined.
pub fn undefined_alpha_pixels(fg: &GrayImage, bg: &GrayImage) -> Result<usize> {
    fg.check_same_dims(bg)?;
    Ok(fg.pixels().iter().zip(bg.pixels()).filter(|(a, b)| a == b).count())
}

pub fn composite_exact(fg: &GrayImage, bg: &GrayImage, alpha: &GrayImage) -> Result<GrayImage> {
    check3(fg, bg, alpha)?;
    GrayImage::from_fn(fg.width(), fg.height(), |x, y| {
        let (f, b, a) = (fg.get(x, y) as u32, bg.get(x, y) as u32, alpha.get(x, y) as u32);
        ((f * a + b * (255 - a) + 127) / 255) as u8
    })
}

/// `(1-dx)(1-dy) I11 + dx (1-dy) I12 + (1-dx) dy I21 + dx dy I22`, rounded
/// half up.
pub fn bilinear_exact(img: &GrayImage) -> Result<GrayImage> {
    check_upscalable(img)?;
    GrayImage::from_fn(2 * img.width(), 2 * img.height(), |ox, oy| {
        let (dx, dy) = ((ox % 2) as f64 * 0.5, (oy % 2) as f64 * 0.5);
        let (x0, y0) = ((ox / 2) as isize, (oy / 2) as isize);
        let i11 = img.get_clamped(x0, y0) as f64;
        let i12 = img.get_clamped(x0 + 1, y0) as f64;
        let i21 = img.get_clamped(x0, y0 + 1) as f64;
        let i22 = img.get_clamped(x0 + 1, y0 + 1) as f64;
        let v = (1.0 - dx) * (1.0 - dy) * i11 + dx * (1.0 - dy) * i12 + (1.0 - dx) * dy * i21 + dx * dy * i22;
        (v + 0.5).floor() as u8
    })
}

/// Matting scene input: `I = composite_exact(F, B, alpha)`.
pub fn matting_input(fg: &GrayImage, bg: &GrayImage, alpha: &GrayImage) -> Result<GrayImage> {
    composite_exact(fg, bg, alpha)
}

fn read_lanes(cim: &BinaryCim, word: &[Bit], fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<Vec<u8>> {
    Ok(cim.read(word, fault, ledger)?.into_iter().map(|v| v as u8).collect())
}

fn zero_extend(w: &[Bit], width: usize) -> Word {
    let mut out = w.to_vec();
    out.resize(width, Bit::Const(false));
    out
}

/// Binary-CIM compositing: `(F * alpha + B * (255 - alpha) + 127) / 255`, one
/// lane per pixel.
pub fn composite_binary(
    fg: &GrayImage,
    bg: &GrayImage,
    alpha: &GrayImage,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<GrayImage> {
    check3(fg, bg, alpha)?;
    let lanes = fg.pixels().len();
    let mut cim = BinaryCim::new(lanes)?;
    let widen = |img: &GrayImage| img.pixels().iter().map(|&p| p as u64).collect::<Vec<_>>();
    let f = cim.load(&widen(fg), 8, ledger)?;
    let b = cim.load(&widen(bg), 8, ledger)?;
    let a = cim.load(&widen(alpha), 8, ledger)?;
    let na = cim.not(&a, fault, ledger)?;
    let fa = cim.mul(&f, &a, fault, ledger)?;
    let bna = cim.mul(&b, &na, fault, ledger)?;
    let (sum, carry) = cim.add(&fa, &bna, Bit::Const(false), fault, ledger)?;
    let mut sum = sum;
    sum.push(carry);
    let (biased, _) = cim.add(&sum, &constant(127, 17), Bit::Const(false), fault, ledger)?;
    let (q, _) = cim.div(&biased, &constant(255, 8), fault, ledger)?;
    let pixels = read_lanes(&cim, &q[..8], fault, ledger)?;
    GrayImage::new(fg.width(), fg.height(), pixels)
}

/// Binary-CIM bilinear upscale: `(a + b + c + d + 2) >> 2` where the four
/// lane operands repeat neighbours so every output class shares one datapath.
pub fn bilinear_binary(img: &GrayImage, fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<GrayImage> {
    check_upscalable(img)?;
    let (w, h) = (2 * img.width(), 2 * img.height());
    let mut ops: [Vec<u64>; 4] = Default::default();
    for oy in 0..h {
        for ox in 0..w {
            let t = bilinear_taps(img, ox, oy);
            let four = match t.len() {
                1 => [t[0]; 4],
                2 => [t[0], t[1], t[0], t[1]],
                _ => [t[0], t[1], t[2], t[3]],
            };
            for k in 0..4 {
                ops[k].push(four[k] as u64);
            }
        }
    }
    let mut cim = BinaryCim::new(w * h)?;
    let words: Vec<Word> = ops
        .iter()
        .map(|v| cim.load(v, 8, ledger).map(|wd| zero_extend(&wd, 10)))
        .collect::<Result<_>>()?;
    let (s1, _) = cim.add(&words[0], &words[1], Bit::Const(false), fault, ledger)?;
    let (s2, _) = cim.add(&words[2], &words[3], Bit::Const(false), fault, ledger)?;
    let (s, _) = cim.add(&s1, &s2, Bit::Const(false), fault, ledger)?;
    let (r, _) = cim.add(&s, &constant(2, 10), Bit::Const(false), fault, ledger)?;
    let pixels = read_lanes(&cim, &r[2..10], fault, ledger)?;
    GrayImage::new(w, h, pixels)
}

/// Binary-CIM matting: `(255 |I' - B| + |F - B| / 2) / |F - B|`.
pub fn matting_binary(
    i: &GrayImage,
    fg: &GrayImage,
    bg: &GrayImage,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<GrayImage> {
    check3(i, fg, bg)?;
    let lanes = i.pixels().len();
    let clamped: Vec<u64> = (0..lanes)
        .map(|k| {
            let (f, b) = (fg.pixels()[k], bg.pixels()[k]);
            i.pixels()[k].clamp(f.min(b), f.max(b)) as u64
        })
        .collect();
    let widen = |img: &GrayImage| img.pixels().iter().map(|&p| p as u64).collect::<Vec<_>>();
    let mut cim = BinaryCim::new(lanes)?;
    let iw = cim.load(&clamped, 8, ledger)?;
    let f = cim.load(&widen(fg), 8, ledger)?;
    let b = cim.load(&widen(bg), 8, ledger)?;
    let abs_diff =
        |x: &[Bit], y: &[Bit], cim: &mut BinaryCim, fault: &mut FaultModel, ledger: &mut CostLedger| -> Result<Word> {
            let (d1, ge) = cim.sub(x, y, fault, ledger)?;
            let (d2, _) = cim.sub(y, x, fault, ledger)?;
            cim.select(ge, &d1, &d2, fault, ledger)
        };
    let num = abs_diff(&iw, &b, &mut cim, fault, ledger)?;
    let den = abs_diff(&f, &b, &mut cim, fault, ledger)?;
    let mut shifted = constant(0, 8);
    shifted.extend_from_slice(&num);
    let (scaled, _) = cim.sub(&shifted, &zero_extend(&num, 16), fault, ledger)?;
    let (x, _) = cim.add(&scaled, &zero_extend(&den[1..], 16), Bit::Const(false), fault, ledger)?;
    let (q, _) = cim.div(&x, &den, fault, ledger)?;
    let mut pixels = read_lanes(&cim, &q[..8], fault, ledger)?;
    for (k, p) in pixels.iter_mut().enumerate() {
        if fg.pixels()[k] == bg.pixels()[k] {
            *p = 0;
        }
    }
    GrayImage::new(i.width(), i.height(), pixels)
}

/// Output quality against the exact reference, SSIM in [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub ssim: f64,
    #[serde(with = "crate::apps::psnr_serde")]
    pub psnr: f64,
}

/// JSON has no infinity or NaN; identical images serialize PSNR as `"inf"`,
/// and a spread over infinite values as `"nan"`.
pub mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Finite(*v).serialize(s)
        } else if v.is_nan() {
            Repr::Text("nan".into()).serialize(s)
        } else if *v > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Text("-inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) if t == "nan" => Ok(f64::NAN),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad PSNR value {t:?}"))),
        }
    }
}

impl Quality {
    pub fn measure(reference: &GrayImage, output: &GrayImage) -> Result<Quality> {
        Ok(Quality {
            ssim: metrics::ssim(reference, output)?,
            psnr: metrics::psnr(reference, output)?,
        })
    }
}

/// Which implementation runs an application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Stochastic(Backend),
    Binary,
}

/// Input images for one application run.
#[derive(Clone, Debug)]
pub enum Scene {
    Matte {
        fg: GrayImage,
        bg: GrayImage,
        alpha: GrayImage,
    },
    Upscale(GrayImage),
}

/// Output image and its quality. For matting the output is the alpha
/// estimate and quality compares re-composites made with the true and the
/// estimated alpha.
#[derive(Clone, Debug)]
pub struct AppResult {
    pub output: GrayImage,
    pub quality: Quality,
    pub ledger: CostLedger,
}

/// Runs `app` on `scene`. The binary pipeline uses `cfg.p_f` and `cfg.seed`
/// for its fault model.
pub fn run(app: App, scene: &Scene, cfg: &AppConfig, pipeline: Pipeline) -> Result<AppResult> {
    let mut ledger = CostLedger::new();
    let mut fault = FaultModel::new(cfg.p_f, derive_seed(cfg.seed, 0xB1))?;
    let (output, reference, compare) = match (app, scene) {
        (App::Composite, Scene::Matte { fg, bg, alpha }) => {
            let out = match pipeline {
                Pipeline::Stochastic(k) => composite(fg, bg, alpha, cfg, k, &mut ledger)?,
                Pipeline::Binary => composite_binary(fg, bg, alpha, &mut fault, &mut ledger)?,
            };
            (out.clone(), composite_exact(fg, bg, alpha)?, out)
        }
        (App::Bilinear, Scene::Upscale(img)) => {
            let out = match pipeline {
                Pipeline::Stochastic(k) => bilinear_upscale(img, cfg, k, &mut ledger)?,
                Pipeline::Binary => bilinear_binary(img, &mut fault, &mut ledger)?,
            };
            (out.clone(), bilinear_exact(img)?, out)
        }
        (App::Matting, Scene::Matte { fg, bg, alpha }) => {
            let i = matting_input(fg, bg, alpha)?;
            let est = match pipeline {
                Pipeline::Stochastic(k) => matting(&i, fg, bg, cfg, k, &mut ledger)?,
                Pipeline::Binary => matting_binary(&i, fg, bg, &mut fault, &mut ledger)?,
            };
            let recomposite = composite_exact(fg, bg, &est)?;
            (est, composite_exact(fg, bg, alpha)?, recomposite)
        }
        (app, _) => {
            return Err(Error::invalid(format!("scene kind does not fit {}", app.name())));
        }
    };
    Ok(AppResult {
        quality: Quality::measure(&reference, &compare)?,
        output,
        ledger,
    })
}

/// Corpus scenes for `app`, with names.
pub fn corpus_scenes(app: App) -> Vec<(&'static str, Scene)> {
    match app {
        App::Bilinear => crate::corpus::upscale_scenes()
            .into_iter()
            .map(|(n, img)| (n, Scene::Upscale(img)))
            .collect(),
        App::Composite | App::Matting => crate::corpus::matte_scenes()
            .into_iter()
            .map(|s| {
                (
                    s.name,
                    Scene::Matte {
                        fg: s.fg,
                        bg: s.bg,
                        alpha: s.alpha,
                    },
                )
            })
            .collect(),
    }
}

/// Mean quality of `app` over the corpus scenes.
pub fn corpus_quality(app: App, cfg: &AppConfig, pipeline: Pipeline) -> Result<Quality> {
    let scenes = corpus_scenes(app);
    let mut ssim = 0.0;
    let mut psnr = 0.0;
    for (k, (_, scene)) in scenes.iter().enumerate() {
        let c = cfg.clone().with_seed(derive_seed(cfg.seed, k as u64));
        let q = run(app, scene, &c, pipeline)?.quality;
        ssim += q.ssim;
        psnr += q.psnr;
    }
    let n = scenes.len() as f64;
    Ok(Quality {
        ssim: ssim / n,
        psnr: psnr / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(f: impl Fn(usize, usize) -> u8) -> GrayImage {
        GrayImage::from_fn(12, 10, f).unwrap()
    }

    fn cfg(n: usize) -> AppConfig {
        AppConfig::default().with_n(n).with_seed(3)
    }

    #[test]
    fn opaque_and_transparent_alpha() {
        let f = img(|x, y| (x * 20 + y) as u8);
        let b = img(|x, y| (200 - x * 10 - y) as u8);
        let mut l = CostLedger::new();
        let c = composite(
            &f,
            &b,
            &GrayImage::filled(12, 10, 255).unwrap(),
            &cfg(256),
            Backend::Cim,
            &mut l,
        )
        .unwrap();
        assert!(metrics::psnr(&f, &c).unwrap() > 25.0);
        let c = composite(
            &f,
            &b,
            &GrayImage::filled(12, 10, 0).unwrap(),
            &cfg(256),
            Backend::Cim,
            &mut l,
        )
        .unwrap();
        assert!(metrics::psnr(&b, &c).unwrap() > 25.0);
    }

    #[test]
    fn constant_image_upscales_to_constant() {
        let src = GrayImage::filled(6, 5, 128).unwrap();
        let exact = bilinear_exact(&src).unwrap();
        assert!(exact.pixels().iter().all(|&p| p == 128));
        let mut f = FaultModel::none();
        let bin = bilinear_binary(&src, &mut f, &mut CostLedger::new()).unwrap();
        assert_eq!(bin, exact);
    }

    #[test]
    fn software_and_cim_agree_without_faults() {
        let f = img(|x, y| (x * 20 + y * 3) as u8);
        let b = img(|x, y| (250 - x * 13 - y * 7) as u8);
        let a = img(|x, y| ((x * 31 + y * 17) % 256) as u8);
        let c = cfg(64);
        let scene = Scene::Matte {
            fg: f.clone(),
            bg: b.clone(),
            alpha: a.clone(),
        };
        for app in [App::Composite, App::Matting] {
            let sw = run(app, &scene, &c, Pipeline::Stochastic(Backend::Software)).unwrap();
            let cim = run(app, &scene, &c, Pipeline::Stochastic(Backend::Cim)).unwrap();
            assert_eq!(sw.output, cim.output, "{}", app.name());
            assert!(sw.ledger.is_empty());
            assert!(!cim.ledger.is_empty());
        }
        let up = Scene::Upscale(f);
        let sw = run(App::Bilinear, &up, &c, Pipeline::Stochastic(Backend::Software)).unwrap();
        let cim = run(App::Bilinear, &up, &c, Pipeline::Stochastic(Backend::Cim)).unwrap();
        assert_eq!(sw.output, cim.output);
    }

    #[test]
    fn binary_pipelines_are_exact_without_faults() {
        let f = img(|x, y| (x * 20 + y * 3) as u8);
        let b = img(|x, y| (250 - x * 13 - y * 7) as u8);
        let a = img(|x, y| ((x * 31 + y * 17) % 256) as u8);
        let mut fault = FaultModel::none();
        let mut l = CostLedger::new();
        assert_eq!(
            composite_binary(&f, &b, &a, &mut fault, &mut l).unwrap(),
            composite_exact(&f, &b, &a).unwrap()
        );
        assert_eq!(
            bilinear_binary(&f, &mut fault, &mut l).unwrap(),
            bilinear_exact(&f).unwrap()
        );
        let i = matting_input(&f, &b, &a).unwrap();
        let est = matting_binary(&i, &f, &b, &mut fault, &mut l).unwrap();
        for k in 0..est.pixels().len() {
            let (fv, bv, iv) = (f.pixels()[k] as u32, b.pixels()[k] as u32, i.pixels()[k] as u32);
            let expect = if fv == bv {
                0
            } else {
                (255 * iv.abs_diff(bv) + fv.abs_diff(bv) / 2) / fv.abs_diff(bv)
            };
            assert_eq!(est.pixels()[k] as u32, expect);
        }
    }

    #[test]
    fn matting_corner_cases() {
        let f = img(|x, _| (40 + x * 15) as u8);
        let b = img(|_, y| (10 + y) as u8);
        let mut l = CostLedger::new();
        let zero = matting(&b, &f, &b, &cfg(256), Backend::Cim, &mut l).unwrap();
        assert!(zero.pixels().iter().all(|&p| p == 0));
        let one = matting(&f, &f, &b, &cfg(1024), Backend::Cim, &mut l).unwrap();
        assert!(one.pixels().iter().all(|&p| p >= 240), "{:?}", one.pixels());
        let same = matting(&f, &f, &f, &cfg(32), Backend::Cim, &mut l).unwrap();
        assert!(same.pixels().iter().all(|&p| p == 0));
        assert_eq!(undefined_alpha_pixels(&f, &f).unwrap(), 120);
    }

    #[test]
    fn dimension_errors() {
        let a = GrayImage::filled(4, 4, 1).unwrap();
        let b = GrayImage::filled(4, 3, 1).unwrap();
        let mut l = CostLedger::new();
        assert!(composite(&a, &b, &a, &cfg(32), Backend::Cim, &mut l).is_err());
        assert!(bilinear_upscale(&GrayImage::filled(1, 4, 0).unwrap(), &cfg(32), Backend::Cim, &mut l).is_err());
    }

    #[test]
    fn psnr_serializes_infinity() {
        let q = Quality {
            ssim: 1.0,
            psnr: f64::INFINITY,
        };
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"ssim":1.0,"psnr":"inf"}"#);
        let back: Quality = serde_json::from_str(&s).unwrap();
        assert_eq!(back.psnr, f64::INFINITY);
    }
}
