use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use screamsim::apps::{self, App, AppConfig, Pipeline, Quality, Scene, SelectMode};
use screamsim::corpus;
use screamsim::costmodel::{self, BaselineTable, CompareParams, LedgerRecord, UnitCostTable};
use screamsim::imsng::SngVariant;
use screamsim::ops::Backend;
use screamsim::sweep::{self, FaultRow, PfCalibration, Stat, SweepOp, SweepSource};
use screamsim::{derive_seed, GrayImage, SourceSpec};

use crate::{AppOpts, CorpusArgs, CostArgs, FaultStudyArgs, OpSweepArgs, SngSweepArgs, UsageError};

const DEFAULT_NS: [usize; 5] = [32, 64, 128, 256, 512];

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

fn json_bytes<T: Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn positive(name: &str, v: usize) -> anyhow::Result<usize> {
    if v == 0 {
        return Err(usage(format!("--{name} must be positive")));
    }
    Ok(v)
}

fn sources(names: Option<Vec<String>>) -> anyhow::Result<Vec<SweepSource>> {
    let names = names.unwrap_or_else(|| vec!["imsng".into()]);
    let mut v = names
        .iter()
        .map(|s| SweepSource::from_name(s).map_err(|e| usage(e.to_string())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

fn variant(name: Option<&str>) -> anyhow::Result<SngVariant> {
    match name.unwrap_or("opt") {
        "opt" => Ok(SngVariant::Opt),
        "naive" => Ok(SngVariant::Naive),
        other => Err(usage(format!("unknown variant {other:?} (expected opt or naive)"))),
    }
}

pub fn sng_sweep(a: SngSweepArgs) -> anyhow::Result<()> {
    let samples = positive("samples", a.samples.unwrap_or(100_000))?;
    let ms = a.m.unwrap_or_else(|| vec![8]);
    let ns = a.n.unwrap_or_else(|| DEFAULT_NS.to_vec());
    let seed = a.seed.unwrap_or(1);
    let mut rows = Vec::new();
    for s in sources(a.source)? {
        rows.extend(sweep::sng_sweep(s, &ms, &ns, samples, seed)?);
    }
    write_out(a.out.as_deref(), &csv_bytes(&rows)?)
}

pub fn op_sweep(a: OpSweepArgs) -> anyhow::Result<()> {
    let samples = positive("samples", a.samples.unwrap_or(10_000))?;
    let ops = match a.ops {
        None => SweepOp::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|s| SweepOp::from_name(s).map_err(|e| usage(e.to_string())))
            .collect::<anyhow::Result<_>>()?,
    };
    let ns = a.n.unwrap_or_else(|| DEFAULT_NS.to_vec());
    let m = a.m.unwrap_or(8);
    let seed = a.seed.unwrap_or(1);
    let mut rows = Vec::new();
    for s in sources(a.source)? {
        rows.extend(sweep::op_sweep(&ops, s, m, &ns, samples, seed)?);
    }
    // Rows sorted by op, then source, then N.
    rows.sort_by(|x, y| {
        let key = |r: &sweep::OpRow| {
            (
                SweepOp::from_name(&r.op).ok(),
                SweepSource::from_name(&r.source).ok(),
                r.n,
            )
        };
        key(x).cmp(&key(y))
    });
    write_out(a.out.as_deref(), &csv_bytes(&rows)?)
}

#[derive(Serialize, Deserialize)]
struct AppMetrics {
    ssim: Stat,
    psnr: Stat,
    per_run: Vec<Quality>,
    undefined_alpha_pixels: usize,
}

#[derive(Serialize, Deserialize)]
struct AppManifest {
    command: String,
    app: App,
    backend: String,
    inputs: Vec<String>,
    scene: Option<String>,
    config: AppConfig,
    runs: usize,
    /// Run `r` uses seed `derive_seed(config.seed, r)`.
    run_seeds: Vec<u64>,
    output: Option<String>,
    metrics: AppMetrics,
    /// Events of the first run.
    ledger: LedgerRecord,
}

fn load_scene(app: App, inputs: &[PathBuf]) -> anyhow::Result<Scene> {
    let need = if app == App::Bilinear { 1 } else { 3 };
    if inputs.len() != need {
        return Err(usage(format!(
            "{} takes {need} input image(s), got {}",
            app.name(),
            inputs.len()
        )));
    }
    let imgs = inputs
        .iter()
        .map(|p| GrayImage::load(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut it = imgs.into_iter();
    Ok(match app {
        App::Bilinear => Scene::Upscale(it.next().expect("one input")),
        _ => Scene::Matte {
            fg: it.next().expect("three inputs"),
            bg: it.next().expect("three inputs"),
            alpha: it.next().expect("three inputs"),
        },
    })
}

pub fn app(name: &str, o: AppOpts) -> anyhow::Result<()> {
    let app = App::from_name(name).map_err(|e| usage(e.to_string()))?;
    let runs = positive("runs", o.runs.unwrap_or(1))?;
    let backend = o.backend.clone().unwrap_or_else(|| "cim".into());
    let pipeline = match backend.as_str() {
        "cim" => Pipeline::Stochastic(Backend::Cim),
        "sw" => Pipeline::Stochastic(Backend::Software),
        "binary" => Pipeline::Binary,
        other => return Err(usage(format!("unknown backend {other:?} (expected cim, sw or binary)"))),
    };
    let select = match o.select.as_deref().unwrap_or("steered") {
        "steered" => SelectMode::Steered,
        "plain" => SelectMode::Plain,
        other => {
            return Err(usage(format!(
                "unknown select mode {other:?} (expected steered or plain)"
            )))
        }
    };
    let cfg = AppConfig {
        n: positive("N", o.n.unwrap_or(256))?,
        source: SourceSpec::trng(),
        variant: variant(o.variant.as_deref())?,
        seed: o.seed.unwrap_or(1),
        p_f: o.pf.unwrap_or(0.0),
        select,
        adc: Default::default(),
    };
    let (scene_name, scene, inputs) = match &o.inputs {
        Some(paths) => (
            None,
            load_scene(app, paths)?,
            paths.iter().map(|p| p.display().to_string()).collect(),
        ),
        None => {
            let scenes = apps::corpus_scenes(app);
            let (name, scene) = match &o.scene {
                None => scenes.into_iter().next().expect("every app has a scene"),
                Some(want) => scenes
                    .into_iter()
                    .find(|(n, _)| n == want)
                    .ok_or_else(|| usage(format!("unknown scene {want:?} for {}", app.name())))?,
            };
            (Some(name.to_string()), scene, Vec::new())
        }
    };
    let undefined = match (&scene, app) {
        (Scene::Matte { fg, bg, .. }, App::Matting) => apps::undefined_alpha_pixels(fg, bg)?,
        _ => 0,
    };
    if undefined > 0 {
        eprintln!("warning: {undefined} pixel(s) have F == B; their alpha is set to 0");
    }
    let run_seeds: Vec<u64> = (0..runs as u64).map(|r| derive_seed(cfg.seed, r)).collect();
    let results = run_seeds
        .par_iter()
        .map(|&s| apps::run(app, &scene, &cfg.clone().with_seed(s), pipeline))
        .collect::<screamsim::Result<Vec<_>>>()?;
    let per_run: Vec<Quality> = results.iter().map(|r| r.quality).collect();
    let ssim: Vec<f64> = per_run.iter().map(|q| 100.0 * q.ssim).collect();
    let psnr: Vec<f64> = per_run.iter().map(|q| q.psnr).collect();
    if let Some(p) = &o.out {
        results[0]
            .output
            .save(p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let manifest = AppManifest {
        command: "app".into(),
        app,
        backend,
        inputs,
        scene: scene_name,
        config: cfg,
        runs,
        run_seeds,
        output: o.out.as_ref().map(|p| p.display().to_string()),
        metrics: AppMetrics {
            ssim: Stat::of(&ssim),
            psnr: Stat::of(&psnr),
            per_run,
            undefined_alpha_pixels: undefined,
        },
        ledger: costmodel::ledger_record(&results[0].ledger),
    };
    let dest = o
        .manifest
        .clone()
        .or_else(|| o.out.as_ref().map(|p| p.with_extension("json")));
    write_out(dest.as_deref(), &json_bytes(&manifest)?)
}

fn read_text(p: &Path) -> anyhow::Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

#[derive(Serialize)]
struct ResidualRow<'a> {
    design: &'a str,
    operation: &'a str,
    target_ns: f64,
    fitted_ns: f64,
    rel_ns: f64,
    target_nj: f64,
    fitted_nj: f64,
    rel_nj: f64,
}

#[derive(Serialize)]
struct CompareRow {
    app: &'static str,
    #[serde(rename = "N")]
    n: usize,
    reram_ns: f64,
    reram_nj: f64,
    reram_throughput: f64,
    cmos_ns: f64,
    cmos_nj: f64,
    cmos_throughput: f64,
    binary_ns: f64,
    binary_nj: f64,
    binary_throughput: f64,
    energy_ratio_cmos: f64,
    throughput_ratio_cmos: f64,
    energy_ratio_binary: f64,
    throughput_ratio_binary: f64,
}

pub fn cost(a: CostArgs) -> anyhow::Result<()> {
    let modes = a.calibrate as usize + a.report.is_some() as usize + a.compare.is_some() as usize;
    if modes != 1 {
        return Err(usage("cost needs exactly one of --calibrate, --report or --compare"));
    }
    let baselines = match &a.baselines {
        Some(p) => BaselineTable::from_json(&read_text(p)?)?,
        None => BaselineTable::published(),
    };
    if a.calibrate {
        let cal = costmodel::calibrate(&baselines, &UnitCostTable::priors())?;
        if let Some(p) = &a.out {
            fs::write(p, cal.table.to_json()? + "\n").with_context(|| format!("writing {}", p.display()))?;
        }
        let rows: Vec<ResidualRow> = cal
            .residuals
            .iter()
            .map(|r| ResidualRow {
                design: &r.design,
                operation: &r.operation,
                target_ns: r.target_ns,
                fitted_ns: r.fitted_ns,
                rel_ns: r.rel_ns(),
                target_nj: r.target_nj,
                fitted_nj: r.fitted_nj,
                rel_nj: r.rel_nj(),
            })
            .collect();
        return write_out(None, &csv_bytes(&rows)?);
    }
    let costs = match &a.costs {
        Some(p) => UnitCostTable::from_json(&read_text(p)?)?,
        None => UnitCostTable::calibrated()?,
    };
    if let Some(p) = &a.report {
        let manifest: serde_json::Value = serde_json::from_str(&read_text(p)?)?;
        let ledger = manifest
            .get("ledger")
            .ok_or_else(|| anyhow!("{} has no ledger section", p.display()))?;
        let record: LedgerRecord = serde_json::from_value(ledger.clone())?;
        let ledger = costmodel::ledger_from_record(&record)?;
        return write_out(None, costmodel::report(&ledger, &costs).to_csv().as_bytes());
    }
    let which = a.compare.as_deref().expect("one mode is set");
    let apps = if which == "all" {
        App::ALL.to_vec()
    } else {
        vec![App::from_name(which).map_err(|e| usage(e.to_string()))?]
    };
    let defaults = CompareParams::default();
    let params = CompareParams {
        columns: positive("columns", a.columns.unwrap_or(defaults.columns))?,
        transfer_ns_per_bit: a.transfer_ns.unwrap_or(defaults.transfer_ns_per_bit),
        transfer_nj_per_bit: a.transfer_nj.unwrap_or(defaults.transfer_nj_per_bit),
        cmos_design: defaults.cmos_design,
    };
    let mut ns = a.n.unwrap_or_else(|| vec![32, 64, 128, 256]);
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::new();
    for app in apps {
        for &n in &ns {
            let c = costmodel::compare(app, positive("N", n)?, &costs, &baselines, &params)?;
            rows.push(CompareRow {
                app: app.name(),
                n,
                reram_ns: c.reram.latency_ns,
                reram_nj: c.reram.energy_nj,
                reram_throughput: c.reram.throughput,
                cmos_ns: c.cmos.latency_ns,
                cmos_nj: c.cmos.energy_nj,
                cmos_throughput: c.cmos.throughput,
                binary_ns: c.binary.latency_ns,
                binary_nj: c.binary.energy_nj,
                binary_throughput: c.binary.throughput,
                energy_ratio_cmos: c.energy_ratio_cmos,
                throughput_ratio_cmos: c.throughput_ratio_cmos,
                energy_ratio_binary: c.energy_ratio_binary,
                throughput_ratio_binary: c.throughput_ratio_binary,
            });
        }
    }
    write_out(None, &csv_bytes(&rows)?)
}

#[derive(Serialize, Deserialize)]
struct FaultManifest {
    command: String,
    config: AppConfig,
    runs: usize,
    calibration: Option<PfCalibration>,
    p_f: f64,
    rows: Vec<FaultRow>,
}

#[derive(Serialize)]
struct FaultCsvRow<'a> {
    app: &'a str,
    pipeline: &'a str,
    #[serde(rename = "N")]
    n: usize,
    p_f: f64,
    runs: usize,
    ssim_clean: f64,
    ssim_mean: f64,
    ssim_std: f64,
    ssim_drop: f64,
    psnr_mean: f64,
    psnr_std: f64,
}

pub fn fault_study(a: FaultStudyArgs) -> anyhow::Result<()> {
    let apps = match &a.apps {
        None => App::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|s| App::from_name(s).map_err(|e| usage(e.to_string())))
            .collect::<anyhow::Result<_>>()?,
    };
    let runs = positive("runs", a.runs.unwrap_or(1))?;
    let base = AppConfig {
        n: positive("N", a.n.unwrap_or(128))?,
        variant: variant(a.variant.as_deref())?,
        seed: a.seed.unwrap_or(1),
        ..AppConfig::default()
    };
    let calibration = match a.pf {
        Some(_) => None,
        None => Some(sweep::calibrate_pf(
            &base,
            a.target_drop.unwrap_or(5.0),
            a.tolerance.unwrap_or(0.25),
            positive("calibration-runs", a.calibration_runs.unwrap_or(1))?,
            40,
        )?),
    };
    let p_f =
        a.pf.or(calibration.as_ref().map(|c| c.p_f))
            .expect("p_f is given or calibrated");
    let cfg = base.with_p_f(p_f);
    let rows = sweep::fault_study(&apps, &cfg, runs)?;
    if let Some(p) = &a.csv {
        let flat: Vec<FaultCsvRow> = rows
            .iter()
            .map(|r| FaultCsvRow {
                app: &r.app,
                pipeline: &r.pipeline,
                n: r.n,
                p_f: r.p_f,
                runs: r.runs,
                ssim_clean: r.ssim_clean,
                ssim_mean: r.ssim.mean,
                ssim_std: r.ssim.std,
                ssim_drop: r.ssim_drop,
                psnr_mean: r.psnr.mean,
                psnr_std: r.psnr.std,
            })
            .collect();
        write_out(Some(p), &csv_bytes(&flat)?)?;
    }
    let manifest = FaultManifest {
        command: "fault-study".into(),
        config: cfg,
        runs,
        calibration,
        p_f,
        rows,
    };
    write_out(a.out.as_deref(), &json_bytes(&manifest)?)
}

pub fn corpus(a: CorpusArgs) -> anyhow::Result<()> {
    let dir = a.out.unwrap_or_else(|| PathBuf::from("corpus"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, img) in corpus::all() {
        let p = dir.join(format!("{name}.pgm"));
        img.save(&p).with_context(|| format!("writing {}", p.display()))?;
        println!("{}", p.display());
    }
    Ok(())
}
