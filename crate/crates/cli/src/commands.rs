use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mpmqir_core::ansatz::{layers_within_budget, param_count, qubits_for_pixels, AnsatzKind};
use mpmqir_core::codec::{compress, Compressed};
use mpmqir_core::dataio::{
    decode_checkpoint, decode_checkpoint_to_image, downsample_area, encode_checkpoint, read_pnm,
    write_pnm, DatasetRef,
};
use mpmqir_core::metrics::{evaluate, pcr, QualityReport};
use mpmqir_core::optimize::TrainConfig;
use mpmqir_core::postproc::{normalize, ImageTensor};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    BatchSource, CompareArgs, CompressArgs, DecompressArgs, EvaluateArgs, InfoArgs, Size,
    SweepArgs,
};
use crate::error::{CliError, CliResult};
use crate::manifest::{sibling, Geometry, RunManifest};

fn load_image(dataset: &DatasetRef, resize: Option<Size>) -> CliResult<ImageTensor> {
    let image = dataset.load()?;
    Ok(match resize {
        Some(size) => downsample_area(&image, size.width, size.height)?,
        None => image,
    })
}

fn geometry(ansatz: AnsatzKind, layers: usize, image: &ImageTensor) -> CliResult<Geometry> {
    let num_qubits = qubits_for_pixels(image.pixel_count());
    Ok(Geometry {
        ansatz,
        num_qubits,
        layers,
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        n_theta: param_count(ansatz, num_qubits, layers)?,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

#[derive(Serialize)]
struct CompressReport<'a> {
    input: &'a Path,
    geometry: &'a Geometry,
    pcr: f64,
    pcr_display: String,
    checkpoint_bytes: usize,
    steps_run: Vec<usize>,
    stopped_early: Vec<bool>,
    final_loss: Vec<f64>,
    /// Unit-domain reconstruction straight from the circuit.
    quality: &'a QualityReport,
    /// After byte quantization, as produced by `decompress`.
    quality_quantized: &'a QualityReport,
}

pub fn cmd_compress(args: &CompressArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let dataset = DatasetRef {
        kind: args.dataset.into(),
        path: args.input.clone(),
        index: args.index,
    };
    let ansatz: AnsatzKind = args.ansatz.into();
    let layers = args.layers as usize;
    let config = args.train.to_config(args.seed);
    config.validate()?;
    let image = load_image(&dataset, args.resize)?;
    let geometry = geometry(ansatz, layers, &image)?;

    let Compressed {
        checkpoint,
        traces,
        quality,
        quality_quantized,
    } = compress(&image, ansatz, layers, &config)?;
    let bytes = encode_checkpoint(&checkpoint)?;
    fs::write(&args.output, &bytes)?;

    let report_path = sibling(&args.output, "report.json");
    let report = CompressReport {
        input: &args.input,
        geometry: &geometry,
        pcr: pcr(geometry.n_theta, geometry.width, geometry.height),
        pcr_display: format!("{:.4}", pcr(geometry.n_theta, geometry.width, geometry.height)),
        checkpoint_bytes: bytes.len(),
        steps_run: traces.iter().map(|t| t.steps_run).collect(),
        stopped_early: traces.iter().map(|t| t.stopped_early).collect(),
        final_loss: traces.iter().map(|t| t.final_loss).collect(),
        quality: &quality,
        quality_quantized: &quality_quantized,
    };
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;

    let mut outputs = vec![args.output.clone(), report_path];
    for (c, trace) in traces.iter().enumerate() {
        let path = if traces.len() == 1 {
            sibling(&args.output, "trace.csv")
        } else {
            sibling(&args.output, &format!("trace.c{c}.csv"))
        };
        fs::write(&path, trace.to_csv())?;
        outputs.push(path);
    }
    let trace_json = sibling(&args.output, "trace.json");
    fs::write(&trace_json, serde_json::to_string_pretty(&traces)? + "\n")?;
    outputs.push(trace_json);

    let manifest_path = sibling(&args.output, "manifest.json");
    outputs.push(manifest_path.clone());
    let mut manifest = RunManifest::new("compress", argv);
    manifest.train_config = Some(config.clone());
    manifest.seed = Some(config.seed);
    manifest.inputs = vec![args.input.clone()];
    manifest.dataset = Some(serde_json::to_value(&dataset)?);
    manifest.geometry = Some(geometry.clone());
    manifest.outputs = outputs;
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    manifest.write(&manifest_path)?;

    println!(
        "ansatz={} m={} layers={} params={} pcr={:.4} psnr={} ssim={} bytes={} -> {}",
        geometry.ansatz,
        geometry.num_qubits,
        geometry.layers,
        geometry.n_theta,
        report.pcr,
        quality
            .psnr_mean_db
            .map_or_else(|| "inf".to_string(), |p| format!("{p:.2}")),
        quality
            .ssim_mean
            .map_or_else(|| "n/a".to_string(), |s| format!("{s:.4}")),
        bytes.len(),
        args.output.display()
    );
    Ok(())
}

pub fn cmd_decompress(args: &DecompressArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let checkpoint = decode_checkpoint(&fs::read(&args.model)?)?;
    let image = decode_checkpoint_to_image(&checkpoint)?;
    write_pnm(&args.output, &image)?;
    let manifest_path = sibling(&args.output, "manifest.json");
    let mut manifest = RunManifest::new("decompress", argv);
    manifest.inputs = vec![args.model.clone()];
    manifest.outputs = vec![args.output.clone(), manifest_path.clone()];
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    manifest.write(&manifest_path)?;
    println!(
        "{}x{}x{} -> {}",
        image.width(),
        image.height(),
        image.channels(),
        args.output.display()
    );
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let original = normalize(&read_pnm(&args.original)?)?;
    let recon = normalize(&read_pnm(&args.recon)?)?;
    let n_theta = match &args.model {
        Some(path) => Some(decode_checkpoint(&fs::read(path)?)?.param_count()?),
        None => None,
    };
    let report = evaluate(&original, &recon, n_theta)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    print!("{json}");
    if let Some(out) = &args.output {
        fs::write(out, &json)?;
        let manifest_path = sibling(out, "manifest.json");
        let mut manifest = RunManifest::new("evaluate", argv);
        manifest.inputs = vec![args.original.clone(), args.recon.clone()];
        manifest.outputs = vec![out.clone(), manifest_path.clone()];
        manifest.wall_clock_s = started.elapsed().as_secs_f64();
        manifest.write(&manifest_path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InfoJson<'a> {
    geometry: &'a Geometry,
    pcr: f64,
    bytes: usize,
    stats: &'a [mpmqir_core::postproc::ChannelStats],
}

pub fn cmd_info(args: &InfoArgs) -> CliResult<()> {
    let bytes = fs::read(&args.model)?;
    let ck = decode_checkpoint(&bytes)?;
    let geometry = Geometry {
        ansatz: ck.ansatz,
        num_qubits: ck.num_qubits,
        layers: ck.layers,
        width: ck.width,
        height: ck.height,
        channels: ck.channels(),
        n_theta: ck.param_count()?,
    };
    let ratio = ck.pcr()?;
    if args.json {
        let info = InfoJson {
            geometry: &geometry,
            pcr: ratio,
            bytes: bytes.len(),
            stats: &ck.stats,
        };
        println!("{}", serde_json::to_string_pretty(&info)?);
    } else {
        println!(
            "ansatz={} m={} layers={} params={} pcr={:.4}",
            geometry.ansatz, geometry.num_qubits, geometry.layers, geometry.n_theta, ratio
        );
        println!(
            "width={} height={} channels={} bytes={}",
            geometry.width,
            geometry.height,
            geometry.channels,
            bytes.len()
        );
    }
    Ok(())
}

/// One training job of a sweep or comparison.
#[derive(Clone, Debug)]
struct Cell {
    image_index: usize,
    ansatz: AnsatzKind,
    layers: Option<usize>,
    seed: u64,
}

#[derive(Clone, Debug)]
struct CellResult {
    cell: Cell,
    n_theta: Option<usize>,
    pcr: Option<f64>,
    psnr_db: Option<f64>,
    ssim: Option<f64>,
    final_mse: Option<f64>,
    steps: Option<usize>,
    wall_clock_s: f64,
    error: Option<String>,
}

fn load_batch(source: &BatchSource) -> Vec<(usize, CliResult<ImageTensor>)> {
    source
        .indices
        .iter()
        .map(|&index| {
            let dataset = DatasetRef {
                kind: source.dataset.into(),
                path: source.data.clone(),
                index,
            };
            (index, load_image(&dataset, source.resize))
        })
        .collect()
}

fn run_cell(cell: Cell, image: &CliResult<ImageTensor>, config: &TrainConfig) -> CellResult {
    let started = Instant::now();
    let mut result = CellResult {
        cell: cell.clone(),
        n_theta: None,
        pcr: None,
        psnr_db: None,
        ssim: None,
        final_mse: None,
        steps: None,
        wall_clock_s: 0.0,
        error: None,
    };
    let outcome = (|| -> CliResult<()> {
        let image = image.as_ref().map_err(|e| CliError::Usage(e.to_string()))?;
        let layers = cell.layers.ok_or_else(|| {
            CliError::Usage("parameter budget too small for a single layer".into())
        })?;
        let config = TrainConfig {
            seed: cell.seed,
            ..config.clone()
        };
        let out = compress(image, cell.ansatz, layers, &config)?;
        let n_theta = out.checkpoint.param_count()?;
        result.n_theta = Some(n_theta);
        result.pcr = Some(pcr(n_theta, image.width(), image.height()));
        result.psnr_db = Some(out.quality.psnr_mean());
        result.ssim = out.quality.ssim_mean;
        result.final_mse =
            Some(out.traces.iter().map(|t| t.final_loss).sum::<f64>() / out.traces.len() as f64);
        result.steps = out.traces.iter().map(|t| t.steps_run).max();
        Ok(())
    })();
    if let Err(e) = outcome {
        result.error = Some(e.to_string().replace([',', '\n'], ";"));
    }
    result.wall_clock_s = started.elapsed().as_secs_f64();
    result
}

fn run_cells(
    cells: Vec<Cell>,
    images: &[(usize, CliResult<ImageTensor>)],
    config: &TrainConfig,
) -> Vec<CellResult> {
    cells
        .into_par_iter()
        .map(|cell| {
            let image = &images
                .iter()
                .find(|(i, _)| *i == cell.image_index)
                .expect("cell built from the batch")
                .1;
            run_cell(cell, image, config)
        })
        .collect()
}

fn check_seeds(source: &BatchSource) -> CliResult<()> {
    if source.indices.is_empty() {
        return Err(CliError::Usage("--indices must list at least one record".into()));
    }
    if source.seeds.is_empty() {
        return Err(CliError::Usage("--seeds must list at least one seed".into()));
    }
    Ok(())
}

fn row_prefix(r: &CellResult) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.cell.image_index,
        r.cell.ansatz,
        r.cell.layers.map_or_else(String::new, |l| l.to_string()),
        r.cell.seed,
        r.n_theta.map_or_else(String::new, |n| n.to_string()),
        r.pcr.map_or_else(String::new, |p| format!("{p:.4}")),
    )
}

fn status(r: &CellResult) -> String {
    r.error.clone().map_or_else(|| "ok".to_string(), |e| format!("error: {e}"))
}

fn write_batch_manifest(
    command: &str,
    argv: &[String],
    source: &BatchSource,
    config: &TrainConfig,
    outputs: Vec<PathBuf>,
    started: Instant,
    csv: &Path,
) -> CliResult<()> {
    let manifest_path = sibling(csv, "manifest.json");
    let mut manifest = RunManifest::new(command, argv);
    manifest.train_config = Some(config.clone());
    manifest.inputs = vec![source.data.clone()];
    manifest.dataset = Some(serde_json::json!({
        "kind": mpmqir_core::dataio::DatasetKind::from(source.dataset),
        "path": source.data,
        "indices": source.indices,
        "seeds": source.seeds,
    }));
    manifest.outputs = outputs;
    manifest.outputs.push(manifest_path.clone());
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    manifest.write(&manifest_path)
}

pub fn cmd_sweep(args: &SweepArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    check_seeds(&args.source)?;
    if let Some(bad) = args.layers_list.iter().find(|&&l| l == 0 || l > usize::from(u16::MAX)) {
        return Err(CliError::Usage(format!("layer count {bad} out of range")));
    }
    let config = args.train.to_config(args.source.seeds[0]);
    config.validate()?;
    let ansatz: AnsatzKind = args.ansatz.into();
    let images = load_batch(&args.source);
    let mut cells = Vec::new();
    for &image_index in &args.source.indices {
        for &layers in &args.layers_list {
            for &seed in &args.source.seeds {
                cells.push(Cell {
                    image_index,
                    ansatz,
                    layers: Some(layers),
                    seed,
                });
            }
        }
    }
    let results = run_cells(cells, &images, &config);

    let mut csv = String::from("image_index,ansatz,layers,seed,n_theta,pcr,psnr_db,ssim,steps,wall_clock_s,status\n");
    for r in &results {
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.3},{}",
            row_prefix(r),
            fmt_opt(r.psnr_db),
            fmt_opt(r.ssim),
            r.steps.map_or_else(String::new, |s| s.to_string()),
            r.wall_clock_s,
            status(r)
        );
    }
    fs::write(&args.output, &csv)?;
    write_batch_manifest(
        "sweep",
        argv,
        &args.source,
        &config,
        vec![args.output.clone()],
        started,
        &args.output,
    )?;
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} rows ({failed} failed) -> {}",
        results.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MethodSummary {
    method: AnsatzKind,
    layers: Option<usize>,
    n_theta: Option<usize>,
    pcr: Option<f64>,
    runs: usize,
    failed: usize,
    mean_psnr_db: Option<f64>,
    mean_ssim: Option<f64>,
    median_final_mse: Option<f64>,
    best_psnr: bool,
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    dataset: mpmqir_core::dataio::DatasetKind,
    match_pcr: f64,
    train_config: &'a TrainConfig,
    methods: Vec<MethodSummary>,
    best_method: Option<AnsatzKind>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Parameter budget for a target PCR: the largest count not above `pcr·pixels`.
pub fn param_budget(target_pcr: f64, pixels: usize) -> usize {
    (target_pcr * pixels as f64 + 1e-9).floor() as usize
}

pub fn cmd_compare(args: &CompareArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    check_seeds(&args.source)?;
    if !(args.match_pcr > 0.0 && args.match_pcr.is_finite()) {
        return Err(CliError::Usage(format!(
            "--match-pcr must be positive, got {}",
            args.match_pcr
        )));
    }
    let mut methods: Vec<AnsatzKind> = Vec::new();
    for m in &args.methods {
        let kind = AnsatzKind::from(*m);
        if !methods.contains(&kind) {
            methods.push(kind);
        }
    }
    let config = args.train.to_config(args.source.seeds[0]);
    config.validate()?;
    let images = load_batch(&args.source);

    let mut cells = Vec::new();
    for (image_index, image) in &images {
        for &ansatz in &methods {
            let layers = image.as_ref().ok().and_then(|img| {
                let m = qubits_for_pixels(img.pixel_count());
                layers_within_budget(ansatz, m, param_budget(args.match_pcr, img.pixel_count()))
            });
            for &seed in &args.source.seeds {
                cells.push(Cell {
                    image_index: *image_index,
                    ansatz,
                    layers,
                    seed,
                });
            }
        }
    }
    let results = run_cells(cells, &images, &config);

    let mut csv = String::from(
        "image_index,method,layers,seed,n_theta,pcr,psnr_db,ssim,final_mse,steps,wall_clock_s,status\n",
    );
    for r in &results {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.3},{}",
            row_prefix(r),
            fmt_opt(r.psnr_db),
            fmt_opt(r.ssim),
            fmt_opt(r.final_mse),
            r.steps.map_or_else(String::new, |s| s.to_string()),
            r.wall_clock_s,
            status(r)
        );
    }
    fs::write(&args.output, &csv)?;

    let mut summaries: Vec<MethodSummary> = methods
        .iter()
        .map(|&method| {
            let rows: Vec<&CellResult> = results.iter().filter(|r| r.cell.ansatz == method).collect();
            let ok: Vec<&&CellResult> = rows.iter().filter(|r| r.error.is_none()).collect();
            let psnrs: Vec<f64> = ok.iter().filter_map(|r| r.psnr_db).collect();
            let ssims: Vec<f64> = ok.iter().filter_map(|r| r.ssim).collect();
            let mses: Vec<f64> = ok.iter().filter_map(|r| r.final_mse).collect();
            let first = ok.first();
            MethodSummary {
                method,
                layers: first.and_then(|r| r.cell.layers),
                n_theta: first.and_then(|r| r.n_theta),
                pcr: first.and_then(|r| r.pcr),
                runs: rows.len(),
                failed: rows.len() - ok.len(),
                mean_psnr_db: mean(&psnrs),
                mean_ssim: mean(&ssims),
                median_final_mse: median(&mses),
                best_psnr: false,
            }
        })
        .collect();
    let best = summaries
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.mean_psnr_db.map(|p| (i, p)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    if let Some(i) = best {
        summaries[i].best_psnr = true;
    }
    let summary = CompareSummary {
        dataset: args.source.dataset.into(),
        match_pcr: args.match_pcr,
        train_config: &config,
        best_method: best.map(|i| summaries[i].method),
        methods: summaries,
    };
    let summary_path = sibling(&args.output, "summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    write_batch_manifest(
        "compare",
        argv,
        &args.source,
        &config,
        vec![args.output.clone(), summary_path.clone()],
        started,
        &args.output,
    )?;
    for s in &summary.methods {
        println!(
            "{:<5} layers={} params={} pcr={} psnr={} ssim={}{}",
            s.method,
            s.layers.map_or_else(|| "-".into(), |l| l.to_string()),
            s.n_theta.map_or_else(|| "-".into(), |n| n.to_string()),
            s.pcr.map_or_else(|| "-".into(), |p| format!("{p:.4}")),
            s.mean_psnr_db.map_or_else(|| "-".into(), |p| format!("{p:.2}")),
            s.mean_ssim.map_or_else(|| "-".into(), |p| format!("{p:.4}")),
            if s.best_psnr { "  *best" } else { "" }
        );
    }
    Ok(())
}
