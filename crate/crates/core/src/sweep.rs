//! Monte Carlo sweeps: generator error, arithmetic error and fault studies.
//!
//! Every sample draws its operands and random words from a seed derived from
//! the sweep seed, the cell and the sample index, so results do not depend on
//! how samples are spread over threads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apps::{self, App, AppConfig, Pipeline};
use crate::bitstream::BitStream;
use crate::crossbar::{CostLedger, FaultModel};
use crate::error::{Error, Result};
use crate::imsng::{self, SngVariant};
use crate::ops::{self, Backend};
use crate::sng::{compare_words, SngConfig};
use crate::source::{derive_seed, Lfsr, SourceSpec, WordMode};

const OPERAND_SLOT: u64 = 0x0FE7_A7D5;

/// Generator families as configured for the error tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepSource {
    /// In-memory generation through the crossbar comparator.
    Imsng,
    Sw,
    Lfsr,
    Sobol,
}

impl SweepSource {
    pub const ALL: [SweepSource; 4] = [
        SweepSource::Imsng,
        SweepSource::Sw,
        SweepSource::Lfsr,
        SweepSource::Sobol,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepSource::Imsng => "imsng",
            SweepSource::Sw => "sw",
            SweepSource::Lfsr => "lfsr",
            SweepSource::Sobol => "sobol",
        }
    }

    pub fn from_name(s: &str) -> Result<SweepSource> {
        SweepSource::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown source {s:?}")))
    }

    /// Source and word width used for a requested `m`.
    ///
    /// The TRNG bias per width is the device profile fitted to measured
    /// generator error. The LFSR is a 16-bit maximal register whose low `m`
    /// bits form the word after each shift. Sobol words are 16 bits wide.
    pub fn profile(self, m: u32) -> (SourceSpec, u32) {
        match self {
            SweepSource::Imsng => (SourceSpec::Trng { bias: trng_bias(m) }, m),
            SweepSource::Sw => (SourceSpec::Software, m),
            SweepSource::Lfsr => (
                SourceSpec::Lfsr {
                    width: 16,
                    taps: Lfsr::TAPS_PRIMITIVE_16.to_vec(),
                    mode: WordMode::Register,
                },
                m,
            ),
            SweepSource::Sobol => (SourceSpec::Sobol, 16),
        }
    }
}

/// Per-bit probability of a 1 in the modelled TRNG, by word width.
pub fn trng_bias(m: u32) -> f64 {
    match m {
        5 => 0.52534,
        6 => 0.52144,
        7 => 0.51656,
        8 => 0.51952,
        9 => 0.51548,
        _ => 0.5,
    }
}

fn sample_seed(seed: u64, cell: u64, sample: u64) -> u64 {
    derive_seed(derive_seed(seed, cell), sample)
}

fn cell_key(tag: u64, m: u32, n: usize) -> u64 {
    (tag << 48) ^ ((m as u64) << 32) ^ n as u64
}

fn operand_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, OPERAND_SLOT))
}

/// Generates streams for `(x, group)` requests. Requests in the same group
/// share one random plane.
fn streams(
    source: SweepSource,
    spec: &SourceSpec,
    m: u32,
    n: usize,
    seed: u64,
    req: &[(u64, u64)],
) -> Result<Vec<BitStream>> {
    let mut planes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (k, &(_, g)) in req.iter().enumerate() {
        planes.entry(g).or_default().push(k);
    }
    let mut out = vec![None; req.len()];
    for (g, idx) in planes {
        let cfg = SngConfig::new(m, n, spec.clone(), seed).with_group(g);
        let block = cfg.draw()?;
        if source == SweepSource::Imsng {
            let mut array = imsng::array_for(&cfg)?;
            let mut ledger = CostLedger::new();
            let plane = imsng::load_block(&mut array, 0, block, &mut ledger)?;
            for k in idx {
                let s = imsng::generate_on_plane(
                    &mut array,
                    req[k].0,
                    &plane,
                    SngVariant::Opt,
                    &mut FaultModel::none(),
                    &mut ledger,
                )?;
                out[k] = Some(s);
            }
        } else {
            let words = block.into_words();
            for k in idx {
                out[k] = Some(compare_words(req[k].0, &words)?);
            }
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every request is served")).collect())
}

fn check_sweep(samples: usize, ns: &[usize]) -> Result<()> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::invalid("stream lengths must be positive"));
    }
    Ok(())
}

/// Mean of per-sample values, summed in sample order.
fn mean_in_order(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One cell of the generator-error table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SngRow {
    pub source: String,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub mse_pct: f64,
}

/// Mean squared error (in percent) of single generated streams against
/// `X / 2^M`, with `X` uniform over all `M`-bit values.
pub fn sng_cell(source: SweepSource, m: u32, n: usize, samples: usize, seed: u64) -> Result<f64> {
    check_sweep(samples, &[n])?;
    let (spec, bits) = source.profile(m);
    crate::source::check_width(bits)?;
    let key = cell_key(1, m, n);
    let scale = (1u64 << bits) as f64;
    let errs = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let seed = sample_seed(seed, key, s);
            let x = operand_rng(seed).random_range(0..1u64 << bits);
            let bs = streams(source, &spec, bits, n, seed, &[(x, 0)])?;
            let e = bs[0].value() - x as f64 / scale;
            Ok(e * e)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(100.0 * mean_in_order(&errs))
}

/// All `(M, N)` cells for one source, rows ordered by `M` then `N`.
pub fn sng_sweep(source: SweepSource, ms: &[u32], ns: &[usize], samples: usize, seed: u64) -> Result<Vec<SngRow>> {
    check_sweep(samples, ns)?;
    let mut ms = ms.to_vec();
    let mut ns = ns.to_vec();
    ms.sort_unstable();
    ms.dedup();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::new();
    for &m in &ms {
        for &n in &ns {
            rows.push(SngRow {
                source: source.name().into(),
                m,
                n,
                samples,
                mse_pct: sng_cell(source, m, n, samples, seed)?,
            });
        }
    }
    Ok(rows)
}

/// Arithmetic operations swept for the op-error table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOp {
    Mul,
    Sadd,
    Aadd,
    Asub,
    Div,
    Min,
    Max,
}

impl SweepOp {
    pub const ALL: [SweepOp; 7] = [
        SweepOp::Mul,
        SweepOp::Sadd,
        SweepOp::Aadd,
        SweepOp::Asub,
        SweepOp::Div,
        SweepOp::Min,
        SweepOp::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepOp::Mul => "mul",
            SweepOp::Sadd => "sadd",
            SweepOp::Aadd => "aadd",
            SweepOp::Asub => "asub",
            SweepOp::Div => "div",
            SweepOp::Min => "min",
            SweepOp::Max => "max",
        }
    }

    pub fn from_name(s: &str) -> Result<SweepOp> {
        SweepOp::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown op {s:?}")))
    }

    /// Ops whose operands share one random plane.
    pub fn correlated(self) -> bool {
        matches!(self, SweepOp::Asub | SweepOp::Div | SweepOp::Min | SweepOp::Max)
    }
}

/// One cell of the op-error table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpRow {
    pub op: String,
    pub source: String,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub mse_pct: f64,
}

fn op_sample(op: SweepOp, source: SweepSource, spec: &SourceSpec, bits: u32, n: usize, seed: u64) -> Result<f64> {
    let mut rng = operand_rng(seed);
    let top = 1u64 << bits;
    let scale = top as f64;
    let (mut x, mut y) = match op {
        SweepOp::Aadd => (rng.random_range(0..top / 2), rng.random_range(0..top / 2)),
        _ => (rng.random_range(0..top), rng.random_range(0..top)),
    };
    if op == SweepOp::Div {
        if x > y {
            std::mem::swap(&mut x, &mut y);
        }
        if y == 0 {
            y = 1;
        }
    }
    let (px, py) = (x as f64 / scale, y as f64 / scale);
    let groups = if op.correlated() { (0, 0) } else { (0, 1) };
    let mut req = vec![(x, groups.0), (y, groups.1)];
    if op == SweepOp::Sadd {
        req.push((top / 2, 2));
    }
    let s = streams(source, spec, bits, n, seed, &req)?;
    let (a, b) = (&s[0], &s[1]);
    let sw = Backend::Software;
    let mut f = FaultModel::none();
    let mut l = CostLedger::new();
    let (out, target) = match op {
        SweepOp::Mul => (ops::sc_mul(a, b, sw, &mut f, &mut l)?, px * py),
        SweepOp::Sadd => (ops::sc_scaled_add(a, b, &s[2], sw, &mut f, &mut l)?, (px + py) / 2.0),
        SweepOp::Aadd => (ops::sc_approx_add(a, b, sw, &mut f, &mut l)?, px + py),
        SweepOp::Asub => (ops::sc_abs_sub(a, b, sw, &mut f, &mut l)?, (px - py).abs()),
        SweepOp::Div => (ops::sc_div_cordiv(a, b, sw, &mut f, &mut l)?, px / py),
        SweepOp::Min => (ops::sc_min(a, b, sw, &mut f, &mut l)?, px.min(py)),
        SweepOp::Max => (ops::sc_max(a, b, sw, &mut f, &mut l)?, px.max(py)),
    };
    let e = out.value() - target;
    Ok(e * e)
}

/// Mean squared error (in percent) of one op against its exact value.
///
/// Operands are uniform `M`-bit integers (below `2^(M-1)` for the OR adder);
/// division orders them so the quotient is at most 1. Scaled addition selects
/// with an independent half-probability stream.
pub fn op_cell(op: SweepOp, source: SweepSource, m: u32, n: usize, samples: usize, seed: u64) -> Result<f64> {
    check_sweep(samples, &[n])?;
    let (spec, bits) = source.profile(m);
    crate::source::check_width(bits)?;
    let key = cell_key(2 + op as u64, m, n);
    let errs = (0..samples as u64)
        .into_par_iter()
        .map(|s| op_sample(op, source, &spec, bits, n, sample_seed(seed, key, s)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(100.0 * mean_in_order(&errs))
}

/// All cells for `ops` × `n`, rows ordered by op then `N`.
pub fn op_sweep(
    ops: &[SweepOp],
    source: SweepSource,
    m: u32,
    ns: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<OpRow>> {
    check_sweep(samples, ns)?;
    let mut ops = ops.to_vec();
    ops.sort_unstable();
    ops.dedup();
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::new();
    for &op in &ops {
        for &n in &ns {
            rows.push(OpRow {
                op: op.name().into(),
                source: source.name().into(),
                m,
                n,
                samples,
                mse_pct: op_cell(op, source, m, n, samples, seed)?,
            });
        }
    }
    Ok(rows)
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    #[serde(with = "crate::apps::psnr_serde")]
    pub mean: f64,
    #[serde(with = "crate::apps::psnr_serde")]
    pub std: f64,
}

impl Stat {
    pub fn of(v: &[f64]) -> Stat {
        let mean = mean_in_order(v);
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

/// Quality of one pipeline for one app, with and without faults. SSIM is in
/// points (percent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRow {
    pub app: String,
    pub pipeline: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub p_f: f64,
    pub runs: usize,
    pub ssim_clean: f64,
    pub ssim: Stat,
    pub psnr: Stat,
    /// Fault-free SSIM minus mean faulty SSIM.
    pub ssim_drop: f64,
}

/// Corpus SSIM (points) and PSNR of `app` for each run seed.
fn corpus_runs(app: App, cfg: &AppConfig, pipeline: Pipeline, runs: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = (0..runs as u64)
        .into_par_iter()
        .map(|r| apps::corpus_quality(app, &cfg.clone().with_seed(derive_seed(cfg.seed, r)), pipeline))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        q.iter().map(|q| 100.0 * q.ssim).collect(),
        q.iter().map(|q| q.psnr).collect(),
    ))
}

fn fault_row(app: App, cfg: &AppConfig, pipeline: Pipeline, runs: usize) -> Result<FaultRow> {
    let clean_runs = match pipeline {
        Pipeline::Binary => 1,
        Pipeline::Stochastic(_) => runs,
    };
    let (clean, _) = corpus_runs(app, &cfg.clone().with_p_f(0.0), pipeline, clean_runs)?;
    let (ssim, psnr) = corpus_runs(app, cfg, pipeline, runs)?;
    let ssim_clean = mean_in_order(&clean);
    let ssim = Stat::of(&ssim);
    Ok(FaultRow {
        app: app.name().into(),
        pipeline: match pipeline {
            Pipeline::Binary => "binary".into(),
            Pipeline::Stochastic(_) => "sc".into(),
        },
        n: cfg.n,
        p_f: cfg.p_f,
        runs,
        ssim_clean,
        ssim_drop: ssim_clean - ssim.mean,
        ssim,
        psnr: Stat::of(&psnr),
    })
}

/// SC and binary rows for every app in `apps`, in app order.
pub fn fault_study(apps: &[App], cfg: &AppConfig, runs: usize) -> Result<Vec<FaultRow>> {
    if runs == 0 {
        return Err(Error::invalid("run count must be positive"));
    }
    let mut rows = Vec::new();
    for &app in apps {
        rows.push(fault_row(app, cfg, Pipeline::Stochastic(Backend::Cim), runs)?);
        rows.push(fault_row(app, cfg, Pipeline::Binary, runs)?);
    }
    Ok(rows)
}

/// Mean SC SSIM drop (points) over all apps at `cfg.p_f`. The same seeds are
/// used for the clean and faulty runs.
pub fn sc_mean_drop(cfg: &AppConfig, runs: usize) -> Result<f64> {
    let mut total = 0.0;
    for app in App::ALL {
        total += fault_row(app, cfg, Pipeline::Stochastic(Backend::Cim), runs)?.ssim_drop;
    }
    Ok(total / App::ALL.len() as f64)
}

/// Outcome of the fault-rate search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfCalibration {
    pub p_f: f64,
    pub target_drop: f64,
    pub achieved_drop: f64,
    pub n: usize,
    pub runs: usize,
    pub iterations: usize,
}

/// Bisects `log10(p_f)` in `[1e-6, 0.5]` until the mean SC SSIM drop is
/// within `tol` points of `target_drop`, or the iteration budget runs out.
pub fn calibrate_pf(
    cfg: &AppConfig,
    target_drop: f64,
    tol: f64,
    runs: usize,
    max_iter: usize,
) -> Result<PfCalibration> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(target_drop) || !positive(tol) || runs == 0 {
        return Err(Error::invalid("target drop, tolerance and runs must be positive"));
    }
    let (mut lo, mut hi) = (-6.0f64, 0.5f64.log10());
    let hi_drop = sc_mean_drop(&cfg.clone().with_p_f(10f64.powf(hi)), runs)?;
    if hi_drop < target_drop {
        return Err(Error::invalid(format!(
            "even p_f = 0.5 only drops SSIM by {hi_drop:.2} points"
        )));
    }
    let mut best = (10f64.powf(hi), hi_drop);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let p = 10f64.powf(mid);
        let drop = sc_mean_drop(&cfg.clone().with_p_f(p), runs)?;
        if (drop - target_drop).abs() < (best.1 - target_drop).abs() {
            best = (p, drop);
        }
        if (drop - target_drop).abs() <= tol {
            break;
        }
        if drop < target_drop {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PfCalibration {
        p_f: best.0,
        target_drop,
        achieved_drop: best.1,
        n: cfg.n,
        runs,
        iterations,
    })
}
