use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use tracing::{info, warn};
use wireframe3d::export::{to_obj, to_svg, SvgView};
use wireframe3d::heatmap::HeatmapBundle;
use wireframe3d::lift::lift;
use wireframe3d::loss::loss_total;
use wireframe3d::{
    aggregate, encode, evaluate_sample, generate, project_gt, read_tensor, validate, vectorize, CameraModel,
    Error, SampleReport, VanishingPoints, Wireframe,
};

use crate::config::PipelineConfig;
use crate::io::{read_json, write_atomic, write_json};
use crate::{Batch, Cli, Command};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(b) => gen(&cfg, &b),
        Command::Encode { wireframe, out } => {
            let wf =
                Wireframe::read(&wireframe).with_context(|| format!("reading {}", wireframe.display()))?;
            let vps = wf
                .vps
                .ok_or_else(|| Error::InvalidWireframe("no vanishing points in the wireframe".into()))?;
            let bundle = encode(&wf, &vps)?;
            write_atomic(&out, &bundle.to_bytes())
        }
        Command::Loss { pred, gt, out } => {
            let r = loss_total(&read_bundle(&pred)?, &read_bundle(&gt)?, &cfg.loss)?;
            match out {
                Some(p) => write_json(&p, &r),
                None => {
                    println!("{}", serde_json::to_string_pretty(&r)?);
                    Ok(())
                }
            }
        }
        Command::Vectorize { input, params, out } => {
            let params = match params {
                Some(p) => read_json(&p)?,
                None => cfg.vectorize,
            };
            params.check()?;
            let wf = vectorize(&read_bundle(&input)?, &params)?;
            info!(vertices = wf.vertices.len(), edges = wf.edges.len(), "vectorized");
            write_atomic(&out, wf.to_json()?.as_bytes())
        }
        Command::Lift {
            input,
            heatmaps,
            camera,
            lambda_r,
            out,
        } => {
            let wf = read_wireframe(&input)?;
            let vps: VanishingPoints = match (&heatmaps, wf.vps) {
                (Some(h), _) => read_bundle(h)?.vps,
                (None, Some(v)) => v,
                (None, None) => {
                    return Err(Error::InvalidParams(
                        "no vanishing points: pass --heatmaps or a wireframe with vps".into(),
                    )
                    .into())
                }
            };
            let camera: Option<CameraModel> = camera.map(|p| read_json(&p)).transpose()?;
            let mut params = cfg.lift;
            if let Some(l) = lambda_r {
                params.lambda_r = l;
            }
            let lifted = lift(&wf, &vps, camera, &params)?;
            check_valid(&lifted.wireframe)?;
            info!(
                objective = lifted.solution.objective,
                iterations = lifted.solution.iterations,
                converged = lifted.solution.converged,
                "lifted"
            );
            write_atomic(&out, lifted.wireframe.to_json()?.as_bytes())
        }
        Command::Eval { pred, gt, out } => eval(&cfg, &pred, &gt, &out),
        Command::ExportObj { input, out } => {
            let wf = read_wireframe(&input)?;
            write_atomic(&out, to_obj(&wf)?.as_bytes())
        }
        Command::RenderSvg {
            input,
            out,
            azimuth,
            elevation,
            size,
        } => {
            let wf = read_wireframe(&input)?;
            let mut view = SvgView::default();
            if let Some(a) = azimuth {
                view.azimuth_deg = a;
            }
            if let Some(e) = elevation {
                view.elevation_deg = e;
            }
            if let Some(s) = size {
                view.size = s;
            }
            write_atomic(&out, to_svg(&wf, &view)?.as_bytes())
        }
        Command::Pipeline(b) => pipeline(&cfg, &b),
    }
}

fn read_bundle(p: &Path) -> anyhow::Result<HeatmapBundle> {
    read_tensor(p).with_context(|| format!("reading {}", p.display()))
}

fn read_wireframe(p: &Path) -> anyhow::Result<Wireframe> {
    Wireframe::read(p).with_context(|| format!("reading {}", p.display()))
}

fn check_valid(wf: &Wireframe) -> anyhow::Result<()> {
    let v = validate(wf);
    if let Some(first) = v.first() {
        return Err(Error::InvalidWireframe(format!("{} violation(s), first: {first}", v.len())).into());
    }
    Ok(())
}

fn sample_name(seed: u64) -> String {
    format!("{seed:06}")
}

struct Resolved {
    cfg: PipelineConfig,
    seeds: Vec<u64>,
}

fn resolve(cfg: &PipelineConfig, b: &Batch) -> anyhow::Result<Resolved> {
    let mut cfg = cfg.clone();
    if let Some(s) = b.seed {
        cfg.seed = s;
    }
    if let Some(g) = b.grid {
        cfg.grid = g;
    }
    cfg.scene.check()?;
    cfg.vectorize.check()?;
    let seeds = (0..b.count)
        .map(|i| cfg.seed.checked_add(i).context("seed range overflows u64"))
        .collect::<anyhow::Result<_>>()?;
    Ok(Resolved { cfg, seeds })
}

/// Runs `f` on every seed with `jobs` workers; results come back in seed order.
fn par_map<T: Send>(
    jobs: Option<usize>,
    seeds: &[u64],
    f: impl Fn(u64) -> anyhow::Result<T> + Sync + Send,
) -> anyhow::Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("starting worker threads")?;
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

fn gen(cfg: &PipelineConfig, b: &Batch) -> anyhow::Result<()> {
    let r = resolve(cfg, b)?;
    par_map(b.jobs, &r.seeds, |seed| {
        let scene = generate(seed, r.cfg.grid, &r.cfg.scene)?;
        let gt = project_gt(&scene)?;
        let name = sample_name(seed);
        write_json(&b.out.join("scene").join(format!("{name}.json")), &scene)?;
        write_atomic(
            &b.out.join("gt").join(format!("{name}.json")),
            gt.wireframe.to_json()?.as_bytes(),
        )?;
        info!(seed, vertices = gt.wireframe.vertices.len(), "generated");
        Ok(())
    })?;
    Ok(())
}

fn json_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "json") && p.is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn eval(cfg: &PipelineConfig, pred: &Path, gt: &Path, out: &Path) -> anyhow::Result<()> {
    let files = json_files(gt)?;
    if files.is_empty() {
        bail!(Error::InvalidParams(format!(
            "no ground-truth files in {}",
            gt.display()
        )));
    }
    let mut samples = Vec::with_capacity(files.len());
    for g in files {
        let name = g.file_stem().unwrap().to_string_lossy().into_owned();
        let gwf = read_wireframe(&g)?;
        let p = pred.join(g.file_name().unwrap());
        let pwf = if p.exists() {
            read_wireframe(&p)?
        } else {
            warn!(sample = name, "no prediction; scoring an empty wireframe");
            Wireframe::new(gwf.image_size)
        };
        samples.push(evaluate_sample(&name, &pwf, &gwf, &cfg.eval)?);
    }
    let report = aggregate(samples);
    info!(
        count = report.count,
        ap_c = report.ap_c,
        ap_t = report.ap_t,
        "evaluated"
    );
    write_json(out, &report)
}

fn pipeline(cfg: &PipelineConfig, b: &Batch) -> anyhow::Result<()> {
    let r = resolve(cfg, b)?;
    let samples: Vec<SampleReport> = par_map(b.jobs, &r.seeds, |seed| {
        let cfg = &r.cfg;
        let name = sample_name(seed);
        let dir = b.out.join("samples").join(&name);
        let scene = generate(seed, cfg.grid, &cfg.scene)?;
        let gt = project_gt(&scene)?;
        let bundle = encode(&gt.wireframe, &gt.vps)?;
        let wf = vectorize(&bundle, &cfg.vectorize)?;
        let mut lp = cfg.lift;
        lp.solver.seed = seed;
        let lifted = lift(&wf, &bundle.vps, None, &lp).with_context(|| format!("lifting sample {name}"))?;
        check_valid(&lifted.wireframe)?;
        let report = evaluate_sample(&name, &lifted.wireframe, &gt.wireframe, &cfg.eval)?;
        write_atomic(&dir.join("gt.json"), gt.wireframe.to_json()?.as_bytes())?;
        write_atomic(&dir.join("heatmaps.wfhm"), &bundle.to_bytes())?;
        write_atomic(&dir.join("wf.json"), wf.to_json()?.as_bytes())?;
        write_atomic(&dir.join("wf3d.json"), lifted.wireframe.to_json()?.as_bytes())?;
        write_atomic(&dir.join("wf3d.obj"), to_obj(&lifted.wireframe)?.as_bytes())?;
        info!(seed, ap_c = report.ap_c, ap_t = report.ap_t, "sample done");
        Ok(report)
    })?;
    let report = aggregate(samples);
    write_atomic(&b.out.join("config.json"), r.cfg.to_canonical_json().as_bytes())?;
    write_json(&b.out.join("report.json"), &report)?;
    info!(
        count = report.count,
        ap_c = report.ap_c,
        ap_t = report.ap_t,
        iou_e = report.iou_e,
        "pipeline done"
    );
    Ok(())
}
