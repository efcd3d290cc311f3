//! Latency and energy from ledger events, unit-cost calibration against
//! published aggregates, and design comparisons.
//!
//! Latency is charged per event: row-parallel senses take one step no matter
//! how many columns they touch. Energy is charged per bitline, so it scales
//! with the stream length.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::apps::{self, App};
use crate::crossbar::{CostLedger, Event, FaultModel};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::imsng::{self, SngVariant};
use crate::ops::{sc_div_cordiv, sc_mul, Backend};
use crate::sng::SngConfig;
use crate::source::SourceSpec;
use crate::stob::{stob_adc, AdcConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Stream length and width at which the reference rows were measured.
pub const REFERENCE_N: usize = 256;
pub const REFERENCE_M: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitCost {
    /// Per event.
    pub ns: f64,
    /// Per bitline.
    pub nj: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitCostTable {
    costs: BTreeMap<Event, UnitCost>,
}

#[derive(Serialize, Deserialize)]
struct UnitCostFile {
    schema_version: u32,
    costs: BTreeMap<String, UnitCost>,
}

impl UnitCostTable {
    /// Builds a table; every event needs an entry.
    pub fn new(costs: BTreeMap<Event, UnitCost>) -> Result<Self> {
        for e in Event::ALL {
            let c = costs
                .get(&e)
                .ok_or_else(|| Error::invalid(format!("unit cost table lacks `{e}`")))?;
            if !(c.ns >= 0.0 && c.nj >= 0.0 && c.ns.is_finite() && c.nj.is_finite()) {
                return Err(Error::invalid(format!("negative or non-finite cost for `{e}`")));
            }
        }
        let (s, w) = (costs[&Event::SlSense], costs[&Event::RowWrite]);
        if w.ns <= s.ns || w.nj <= s.nj {
            return Err(Error::invalid("row writes must cost more than senses"));
        }
        Ok(UnitCostTable { costs })
    }

    /// Uncalibrated starting point for the fit.
    pub fn priors() -> Self {
        let c = |ns, nj| UnitCost { ns, nj };
        let costs = BTreeMap::from([
            (Event::SlSense, c(1.2, 2.6e-4)),
            (Event::RowWrite, c(19.0, 1.6e-3)),
            (Event::LatchOp, c(0.3, 5e-5)),
            (Event::AdcConversion, c(1.4, 1.2e-2)),
            (Event::SequentialCycle, c(48.4, 2.6e-3)),
        ]);
        UnitCostTable { costs }
    }

    /// Priors fitted to the built-in reference rows.
    pub fn calibrated() -> Result<Self> {
        Ok(calibrate(&BaselineTable::published(), &Self::priors())?.table)
    }

    pub fn get(&self, e: Event) -> UnitCost {
        self.costs[&e]
    }

    /// Every unit latency and energy multiplied by the given factors.
    pub fn scaled(&self, ns_factor: f64, nj_factor: f64) -> Result<Self> {
        Self::new(
            self.costs
                .iter()
                .map(|(&e, c)| {
                    (
                        e,
                        UnitCost {
                            ns: c.ns * ns_factor,
                            nj: c.nj * nj_factor,
                        },
                    )
                })
                .collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let file = UnitCostFile {
            schema_version: SCHEMA_VERSION,
            costs: self.costs.iter().map(|(e, c)| (e.name().to_string(), *c)).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: UnitCostFile = serde_json::from_str(s)?;
        check_schema(file.schema_version)?;
        let costs = file
            .costs
            .into_iter()
            .map(|(k, v)| Ok((Event::from_name(&k)?, v)))
            .collect::<Result<_>>()?;
        Self::new(costs)
    }
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Aggregate cost of one operation on one design, N = 256.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub design: String,
    pub operation: String,
    pub latency_ns: f64,
    pub energy_nj: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub schema_version: u32,
    pub rows: Vec<BaselineRow>,
}

pub const CMOS_LFSR: &str = "cmos_lfsr";
pub const CMOS_SOBOL: &str = "cmos_sobol";
pub const RERAM: &str = "reram";
pub const IMSNG_NAIVE: &str = "imsng_naive";
pub const IMSNG_OPT: &str = "imsng_opt";

pub const OPERATIONS: [&str; 4] = ["multiplication", "addition", "subtraction", "division"];

impl BaselineTable {
    /// Reported totals (critical-path latency times N, N = 256).
    pub fn published() -> Self {
        let mut rows = Vec::new();
        let mut push = |design: &str, op: &str, ns: f64, nj: f64, note: &str| {
            rows.push(BaselineRow {
                design: design.into(),
                operation: op.into(),
                latency_ns: ns,
                energy_nj: nj,
                note: note.into(),
            })
        };
        let blocks: [(&str, [(f64, f64); 4], &str); 3] = [
            (
                CMOS_LFSR,
                [(122.88, 0.23), (130.56, 0.26), (133.12, 0.16), (133.12, 0.18)],
                "CMOS, LFSR + comparator SNG, log2(N)-bit counter",
            ),
            (
                CMOS_SOBOL,
                [(125.44, 0.30), (130.56, 0.30), (133.12, 0.12), (130.56, 0.14)],
                "CMOS, Sobol + comparator SNG, log2(N)-bit counter",
            ),
            (
                RERAM,
                [(80.8, 3.50), (80.8, 3.50), (81.6, 3.51), (12544.0, 4.48)],
                "ReRAM, IMSNG-opt SNG, 8-bit ADC",
            ),
        ];
        for (design, vals, note) in blocks {
            for (op, (ns, nj)) in OPERATIONS.iter().zip(vals) {
                push(design, op, ns, nj, note);
            }
        }
        push(IMSNG_NAIVE, "generation", 395.4, 10.23, "one M=8 conversion");
        push(IMSNG_OPT, "generation", 78.2, 3.42, "one M=8 conversion");
        BaselineTable {
            schema_version: SCHEMA_VERSION,
            rows,
        }
    }

    pub fn get(&self, design: &str, operation: &str) -> Result<&BaselineRow> {
        self.rows
            .iter()
            .find(|r| r.design == design && r.operation == operation)
            .ok_or_else(|| Error::MissingBaseline(format!("{design}/{operation}")))
    }

    /// Only the rows for the given keys, in that order.
    pub fn subset(&self, keys: &[(&str, &str)]) -> Result<Self> {
        Ok(BaselineTable {
            schema_version: self.schema_version,
            rows: keys
                .iter()
                .map(|(d, o)| self.get(d, o).cloned())
                .collect::<Result<_>>()?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: BaselineTable = serde_json::from_str(s)?;
        check_schema(t.schema_version)?;
        Ok(t)
    }
}

/// One line of a cost report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub event: Event,
    pub count: u64,
    pub bitlines: u64,
    pub ns: f64,
    pub nj: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub latency_ns: f64,
    pub energy_nj: f64,
    pub lines: Vec<ReportLine>,
}

impl CostReport {
    /// `event,count,ns,nJ` rows plus a `total` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("event,count,ns,nJ\n");
        for l in &self.lines {
            let _ = writeln!(s, "{},{},{},{}", l.event, l.count, l.ns, l.nj);
        }
        let total: u64 = self.lines.iter().map(|l| l.count).sum();
        let _ = writeln!(s, "total,{},{},{}", total, self.latency_ns, self.energy_nj);
        s
    }
}

pub fn report(ledger: &CostLedger, costs: &UnitCostTable) -> CostReport {
    let lines: Vec<ReportLine> = ledger
        .entries()
        .map(|(event, count, bitlines)| {
            let c = costs.get(event);
            ReportLine {
                event,
                count,
                bitlines,
                ns: count as f64 * c.ns,
                nj: bitlines as f64 * c.nj,
            }
        })
        .collect();
    CostReport {
        latency_ns: lines.iter().map(|l| l.ns).sum(),
        energy_nj: lines.iter().map(|l| l.nj).sum(),
        lines,
    }
}

/// Event tallies keyed by event name, the on-disk form of a ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub count: u64,
    pub bitlines: u64,
}

pub type LedgerRecord = BTreeMap<String, Tally>;

pub fn ledger_record(ledger: &CostLedger) -> LedgerRecord {
    ledger
        .entries()
        .map(|(e, count, bitlines)| (e.name().to_string(), Tally { count, bitlines }))
        .collect()
}

/// Rejects unknown event names.
pub fn ledger_from_record(record: &LedgerRecord) -> Result<CostLedger> {
    let mut ledger = CostLedger::new();
    for (name, t) in record {
        ledger.record_n(Event::from_name(name)?, t.count, t.bitlines);
    }
    Ok(ledger)
}

/// Events of one reference row, measured on the simulator at M = 8,
/// N = 256, excluding the random-plane load.
pub fn reference_mix(design: &str, operation: &str) -> Result<CostLedger> {
    let cfg = SngConfig::new(REFERENCE_M, REFERENCE_N, SourceSpec::Software, 1);
    let variant = match design {
        IMSNG_NAIVE => SngVariant::Naive,
        IMSNG_OPT | RERAM => SngVariant::Opt,
        _ => return Err(Error::MissingBaseline(format!("no event mix for {design}/{operation}"))),
    };
    let mut array = imsng::array_for(&cfg)?;
    let plane = imsng::load_block(&mut array, 0, cfg.draw()?, &mut CostLedger::new())?;
    let mut fault = FaultModel::none();
    let mut ledger = CostLedger::new();
    let a = imsng::generate_on_plane(&mut array, 100, &plane, variant, &mut fault, &mut ledger)?;
    let adc = AdcConfig::default();
    match (design, operation) {
        (IMSNG_NAIVE | IMSNG_OPT, "generation") => {}
        (RERAM, "multiplication" | "addition" | "subtraction") => {
            let out = sc_mul(&a, &a, Backend::Cim, &mut fault, &mut ledger)?;
            stob_adc(&out, &adc, &mut ledger);
        }
        (RERAM, "division") => {
            let out = sc_div_cordiv(&a, &a, Backend::Cim, &mut fault, &mut ledger)?;
            stob_adc(&out, &adc, &mut ledger);
        }
        _ => return Err(Error::MissingBaseline(format!("no event mix for {design}/{operation}"))),
    }
    Ok(ledger)
}

/// Target versus fitted totals for one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub design: String,
    pub operation: String,
    pub target_ns: f64,
    pub fitted_ns: f64,
    pub target_nj: f64,
    pub fitted_nj: f64,
}

impl Residual {
    pub fn rel_ns(&self) -> f64 {
        (self.fitted_ns - self.target_ns) / self.target_ns
    }

    pub fn rel_nj(&self) -> f64 {
        (self.fitted_nj - self.target_nj) / self.target_nj
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub table: UnitCostTable,
    pub residuals: Vec<Residual>,
}

pub const CALIBRATION_KEYS: [(&str, &str); 4] = [
    (IMSNG_NAIVE, "generation"),
    (IMSNG_OPT, "generation"),
    (RERAM, "multiplication"),
    (RERAM, "division"),
];

/// Smallest change `u` to `p` in relative terms, `min sum ((u - p) / p)^2`,
/// subject to `A u = t`.
fn fit(a: &DMatrix<f64>, t: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
    let w_inv = DMatrix::from_diagonal(&p.map(|v| v * v));
    let gram = a * &w_inv * a.transpose();
    let lambda = gram
        .lu()
        .solve(&(t - a * p))
        .ok_or_else(|| Error::Calibration("target rows are linearly dependent".into()))?;
    Ok(p + w_inv * a.transpose() * lambda)
}

/// Fits unit costs so the reference event mixes reproduce the target rows.
/// The four required rows pin four degrees of freedom per quantity; the
/// remaining one stays as close to `prior` as the constraints allow.
pub fn calibrate(targets: &BaselineTable, prior: &UnitCostTable) -> Result<Calibration> {
    let rows = targets.subset(&CALIBRATION_KEYS)?.rows;
    let mixes: Vec<CostLedger> = rows
        .iter()
        .map(|r| reference_mix(&r.design, &r.operation))
        .collect::<Result<_>>()?;
    let k = Event::ALL.len();
    let counts = DMatrix::from_fn(rows.len(), k, |i, j| mixes[i].count(Event::ALL[j]) as f64);
    let bitlines = DMatrix::from_fn(rows.len(), k, |i, j| mixes[i].bitlines(Event::ALL[j]) as f64);
    let t_ns = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.latency_ns));
    let t_nj = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.energy_nj));
    let p_ns = DVector::from_iterator(k, Event::ALL.iter().map(|&e| prior.get(e).ns));
    let p_nj = DVector::from_iterator(k, Event::ALL.iter().map(|&e| prior.get(e).nj));
    let u_ns = fit(&counts, &t_ns, &p_ns)?;
    let u_nj = fit(&bitlines, &t_nj, &p_nj)?;

    let costs: BTreeMap<Event, UnitCost> = Event::ALL
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            (
                e,
                UnitCost {
                    ns: u_ns[j],
                    nj: u_nj[j],
                },
            )
        })
        .collect();
    let fitted_ns = &counts * &u_ns;
    let fitted_nj = &bitlines * &u_nj;
    let residuals: Vec<Residual> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| Residual {
            design: r.design.clone(),
            operation: r.operation.clone(),
            target_ns: r.latency_ns,
            fitted_ns: fitted_ns[i],
            target_nj: r.energy_nj,
            fitted_nj: fitted_nj[i],
        })
        .collect();
    let table = UnitCostTable::new(costs.clone()).map_err(|e| {
        let mut msg = format!("{e}; fitted costs:");
        for (ev, c) in &costs {
            let _ = write!(msg, " {ev}={:.4}ns/{:.3e}nJ", c.ns, c.nj);
        }
        msg.push_str("; residuals:");
        for r in &residuals {
            let _ = write!(
                msg,
                " {}/{} {:+.2e}ns {:+.2e}nJ",
                r.design,
                r.operation,
                r.fitted_ns - r.target_ns,
                r.fitted_nj - r.target_nj
            );
        }
        Error::Calibration(msg)
    })?;
    Ok(Calibration { table, residuals })
}

/// Free parameters of a design comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareParams {
    /// Columns working in parallel on the ReRAM side.
    pub columns: usize,
    /// Off-chip transfer cost per bit moved to and from the CMOS SC logic.
    pub transfer_ns_per_bit: f64,
    pub transfer_nj_per_bit: f64,
    pub cmos_design: String,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams {
            columns: 4096,
            transfer_ns_per_bit: 0.1,
            transfer_nj_per_bit: 0.12,
            cmos_design: CMOS_LFSR.into(),
        }
    }
}

/// Per-output-pixel cost of one design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignCost {
    pub latency_ns: f64,
    pub energy_nj: f64,
    /// Output pixels per second.
    pub throughput: f64,
}

/// Ratios are `other / reram` for energy and `reram / other` for
/// throughput; above 1 favours the ReRAM SC design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub app: App,
    pub n: usize,
    pub reram: DesignCost,
    pub cmos: DesignCost,
    pub binary: DesignCost,
    pub energy_ratio_cmos: f64,
    pub throughput_ratio_cmos: f64,
    pub energy_ratio_binary: f64,
    pub throughput_ratio_binary: f64,
}

/// CMOS operations per output pixel and bits moved per output pixel.
fn cmos_mix(app: App) -> (Vec<(&'static str, f64)>, f64) {
    match app {
        App::Composite => (vec![("addition", 1.0)], 32.0),
        // Of four output pixels one copies, two average a pair and one
        // averages four (three additions).
        App::Bilinear => (vec![("addition", 1.25)], 10.0),
        App::Matting => (vec![("subtraction", 2.0), ("division", 1.0)], 32.0),
    }
}

const PROBE: usize = 8;

fn crop(img: &GrayImage, w: usize, h: usize) -> Result<GrayImage> {
    GrayImage::from_fn(w, h, |x, y| img.get(x + 24, y + 24))
}

/// Small fixed scene the per-pixel costs are measured on.
fn probe_scene(app: App) -> Result<apps::Scene> {
    let scene = apps::corpus_scenes(app).swap_remove(0).1;
    Ok(match scene {
        apps::Scene::Matte { fg, bg, alpha } => apps::Scene::Matte {
            fg: crop(&fg, PROBE, PROBE)?,
            bg: crop(&bg, PROBE, PROBE)?,
            alpha: crop(&alpha, PROBE, PROBE)?,
        },
        apps::Scene::Upscale(img) => apps::Scene::Upscale(crop(&img, PROBE / 2, PROBE / 2)?),
    })
}

/// `(energy ratio, throughput ratio)` of `design` against `other`.
pub fn ratios(design: &DesignCost, other: &DesignCost) -> (f64, f64) {
    (other.energy_nj / design.energy_nj, design.throughput / other.throughput)
}

/// Compares the ReRAM SC pipeline at stream length `n` with the CMOS SC and
/// binary CIM designs on a per-output-pixel basis.
pub fn compare(
    app: App,
    n: usize,
    costs: &UnitCostTable,
    baselines: &BaselineTable,
    params: &CompareParams,
) -> Result<Comparison> {
    if n == 0 || params.columns == 0 {
        return Err(Error::invalid("stream length and column count must be positive"));
    }
    let (ops, bits) = cmos_mix(app);
    let mut cmos_ns = bits * params.transfer_ns_per_bit;
    let mut cmos_nj = bits * params.transfer_nj_per_bit;
    let scale = n as f64 / REFERENCE_N as f64;
    for (op, k) in ops {
        let row = baselines.get(&params.cmos_design, op)?;
        cmos_ns += k * row.latency_ns * scale;
        cmos_nj += k * row.energy_nj * scale;
    }
    let cmos = DesignCost {
        latency_ns: cmos_ns,
        energy_nj: cmos_nj,
        throughput: 1e9 / cmos_ns,
    };

    let scene = probe_scene(app)?;
    let cfg = apps::AppConfig::default().with_n(n);
    let sc = apps::run(app, &scene, &cfg, apps::Pipeline::Stochastic(Backend::Cim))?;
    let pixels = sc.output.pixels().len() as f64;
    let r = report(&sc.ledger, costs);
    let lanes_per_array = (params.columns / n).max(1) as f64;
    let reram_ns = r.latency_ns / pixels;
    let reram = DesignCost {
        latency_ns: reram_ns,
        energy_nj: r.energy_nj / pixels,
        throughput: 1e9 * lanes_per_array / reram_ns,
    };

    let bin = apps::run(app, &scene, &apps::AppConfig::default(), apps::Pipeline::Binary)?;
    let b = report(&bin.ledger, costs);
    let binary = DesignCost {
        latency_ns: b.latency_ns,
        energy_nj: b.energy_nj / pixels,
        throughput: 1e9 * params.columns as f64 / b.latency_ns,
    };

    Ok(Comparison {
        app,
        n,
        reram,
        cmos,
        binary,
        energy_ratio_cmos: ratios(&reram, &cmos).0,
        throughput_ratio_cmos: ratios(&reram, &cmos).1,
        energy_ratio_binary: ratios(&reram, &binary).0,
        throughput_ratio_binary: ratios(&reram, &binary).1,
    })
}
