use std::fs;
use std::path::{Path, PathBuf};

use egostitch::ingest::{save_pointcloud, save_poses, EvalMaskKind, SequenceManifest};
use egostitch::metrics::{chunk_clouds, evaluate, reports_csv, MetricParams, MetricReport};
use egostitch::model::BinaryMask;
use egostitch::prior::{
    load_prior_series, prior_file_name, save_prior_series, suppression_masks, NearHandParams,
    ObjectFilter, SuppressionMode,
};
use egostitch::sequence::ChunkedSequence;
use egostitch::stitch::{fuse, plan_chunks, stitch};
use egostitch::synth::{generate, SynthConfig};
use egostitch::token::{attention_bias, encode_bias, pool_to_tokens, transfer_mask, GeomTransform};
use egostitch::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{
    Cli, Command, EvalSet, MaskArgs, MaskMode, MetricsArgs, PlanArgs, ReportArgs, StitchArgs,
    SynthArgs, TokenArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Plan(a) => plan(a),
        Command::Mask(a) => mask(a),
        Command::Tokenmask(a) => tokenmask(a),
        Command::Stitch(a) => stitch_cmd(a),
        Command::Metrics(a) => metrics(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("--{flag} is required (flag or config key)")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn parse_pair<T: std::str::FromStr, U: std::str::FromStr>(s: &str, flag: &str) -> Result<(T, U)> {
    let bad = || Error::Config(format!("--{flag} expects two comma-separated values, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Frame size shared by every frame of the manifest.
fn uniform_dims(m: &SequenceManifest) -> Result<(usize, usize)> {
    let dims = m.frame_dims(0);
    if let Some(f) = (0..m.frame_count()).find(|&f| m.frame_dims(f) != dims) {
        return Err(Error::Consistency(format!(
            "frame {f} is {:?}, frame 0 is {dims:?}; mixed frame sizes are not supported",
            m.frame_dims(f)
        )));
    }
    Ok(dims)
}

fn load_suppression(dir: Option<&Path>, m: &SequenceManifest) -> Result<Option<Vec<BinaryMask>>> {
    dir.map(|d| load_prior_series(d, m.frame_count(), uniform_dims(m)?))
        .transpose()
}

#[derive(Serialize)]
struct PlanDoc {
    frame_count: usize,
    chunk_length: usize,
    overlap: usize,
    chunks: Vec<egostitch::model::ChunkPlan>,
}

fn plan(a: PlanArgs) -> Result<()> {
    let cfg: PlanArgs = read_config(a.config.as_deref())?;
    let frames = required(a.frames.or(cfg.frames), "frames")?;
    let chunk = required(a.chunk.or(cfg.chunk), "chunk")?;
    let overlap = required(a.overlap.or(cfg.overlap), "overlap")?;
    let doc = PlanDoc {
        frame_count: frames,
        chunk_length: chunk,
        overlap,
        chunks: plan_chunks(frames, chunk, overlap)?,
    };
    match a.out.or(cfg.out) {
        Some(dir) => {
            create_dir(&dir)?;
            write_json(&doc, &dir.join("plan.json"))
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("plan serializes"));
            Ok(())
        }
    }
}

fn mask(a: MaskArgs) -> Result<()> {
    let cfg: MaskArgs = read_config(a.config.as_deref())?;
    let manifest = required(a.manifest.or(cfg.manifest), "manifest")?;
    let mode = required(a.mode.or(cfg.mode), "mode")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let filter = match a.near_hand.or(cfg.near_hand) {
        Some(s) => {
            let (r, tau) = parse_pair::<usize, f64>(&s, "near-hand")?;
            ObjectFilter::NearHand(NearHandParams::new(r, tau)?)
        }
        None => ObjectFilter::None,
    };
    let mode = match mode {
        MaskMode::DynamicOnly => SuppressionMode::DynamicOnly,
        MaskMode::Cumulative => SuppressionMode::Cumulative,
    };

    let m = SequenceManifest::load(&manifest)?;
    let dims = uniform_dims(&m)?;
    let series = suppression_masks(mode, m.tracks(), &m.mask_files(), m.frame_count(), dims, filter)?;
    create_dir(&out)?;
    save_prior_series(&series, &out)
}

/// Number of priors in `dir`, which must be named contiguously from frame 0.
fn prior_count(dir: &Path) -> Result<usize> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut n = 0;
    for e in entries {
        let e = e.map_err(|e| Error::io(dir, e))?;
        let name = e.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("D_") && name.ends_with(".pgm") {
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Consistency(format!("{}: no prior files", dir.display())));
    }
    if let Some(t) = (0..n).find(|&t| !dir.join(prior_file_name(t)).is_file()) {
        return Err(Error::Consistency(format!(
            "{}: prior series is not contiguous, frame {t} is missing",
            dir.display()
        )));
    }
    Ok(n)
}

fn tokenmask(a: TokenArgs) -> Result<()> {
    let cfg: TokenArgs = read_config(a.config.as_deref())?;
    let masks = required(a.masks.or(cfg.masks), "masks")?;
    let (h, w) = parse_pair::<usize, usize>(&required(a.input_size.or(cfg.input_size), "input-size")?, "input-size")?;
    let patch = required(a.patch.or(cfg.patch), "patch")?;
    let bias = a.bias || cfg.bias;
    let out = required(a.out.or(cfg.out), "out")?;
    if h == 0 || w == 0 {
        return Err(Error::Config("--input-size must be positive".into()));
    }

    let n = prior_count(&masks)?;
    let first = egostitch::ingest::load_mask(masks.join(prior_file_name(0)))?;
    let series = load_prior_series(&masks, n, first.dims())?;
    let tf = GeomTransform::resize(h, w);
    let tokens = series
        .iter()
        .map(|m| pool_to_tokens(&transfer_mask(m, &tf)?, patch))
        .collect::<Result<Vec<_>>>()?;

    create_dir(&out)?;
    for (t, tok) in tokens.iter().enumerate() {
        tok.save(out.join(format!("T_{t:06}.pgm")), out.join(format!("T_{t:06}.json")))?;
        if bias {
            let p = out.join(format!("B_{t:06}.txt"));
            fs::write(&p, encode_bias(&attention_bias(tok))).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

fn stitch_cmd(a: StitchArgs) -> Result<()> {
    let cfg: StitchArgs = read_config(a.config.as_deref())?;
    let manifest = required(a.manifest.or(cfg.manifest), "manifest")?;
    let voxel = a.voxel.or(cfg.voxel).unwrap_or(0.0);
    let suppress = a.suppress.or(cfg.suppress);
    let out = required(a.out.or(cfg.out), "out")?;

    let m = SequenceManifest::load(&manifest)?;
    let suppress = load_suppression(suppress.as_deref(), &m)?;
    let result = stitch(m.all_chunk_poses(), m.plans())?;
    let clouds = chunk_clouds(&m, suppress.as_deref(), 0.0)?;
    let fused = fuse(&clouds, &result, voxel)?;

    create_dir(&out)?;
    result.save(out.join("stitch.json"))?;
    save_poses(&result.global_trajectory(), out.join("trajectory.jsonl"))?;
    save_pointcloud(&fused, out.join("fused.ply"))
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let cfg: MetricsArgs = read_config(a.config.as_deref())?;
    let manifest = required(a.manifest.or(cfg.manifest), "manifest")?;
    let eval = required(a.eval.or(cfg.eval), "eval")?;
    let suppress = a.suppress.or(cfg.suppress);
    let variant = a.variant.or(cfg.variant).unwrap_or_else(|| "baseline".into());
    let out = required(a.out.or(cfg.out), "out")?;
    let mut params = MetricParams::default();
    if let Some(v) = a.voxel.or(cfg.voxel) {
        params.cloud_voxel = v;
    }
    if let Some(n) = a.max_points.or(cfg.max_points) {
        params.max_points_per_frame = n;
    }
    params.kinds = match eval {
        EvalSet::Dynamics => vec![EvalMaskKind::Instantaneous],
        EvalSet::Fulltime => vec![EvalMaskKind::Footprint],
        EvalSet::Both => vec![EvalMaskKind::Instantaneous, EvalMaskKind::Footprint],
    };

    let m = SequenceManifest::load(&manifest)?;
    if !m.has_eval_masks() {
        return Err(Error::Config("manifest lists no evaluation masks".into()));
    }
    let suppress = load_suppression(suppress.as_deref(), &m)?;
    let result = stitch(m.all_chunk_poses(), m.plans())?;
    let report = evaluate(&m as &dyn ChunkedSequence, &result, &params, suppress.as_deref(), &variant)?;

    create_dir(&out)?;
    report.save(out.join("metrics.json"), out.join("metrics.csv"))
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = read_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.frames {
        cfg.frame_count = t;
    }
    if let Some(k) = a.chunk {
        cfg.chunk_length = k;
    }
    if let Some(o) = a.overlap {
        cfg.overlap = o;
    }
    if let Some(n) = a.noise {
        cfg.depth_noise = n;
    }
    let data = generate(&cfg)?;
    create_dir(&a.out)?;
    data.write(&a.out)
}

/// Markdown rendering of the CSV table.
fn markdown_table(csv: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        let cells: Vec<&str> = line.split(',').map(|c| if c.is_empty() { "-" } else { c }).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
        if i == 0 {
            out.push_str(&format!("|{}\n", "---|".repeat(cells.len())));
        }
    }
    out
}

fn report(a: ReportArgs) -> Result<()> {
    let cfg: ReportArgs = read_config(a.config.as_deref())?;
    let inputs: Vec<PathBuf> = if a.inputs.is_empty() { cfg.inputs } else { a.inputs };
    if inputs.is_empty() {
        return Err(Error::Config("--inputs needs at least one metric report".into()));
    }
    let reports = inputs
        .iter()
        .map(MetricReport::load)
        .collect::<Result<Vec<_>>>()?;
    let csv = reports_csv(&reports);
    let md = markdown_table(&csv);
    match a.out.or(cfg.out) {
        Some(dir) => {
            create_dir(&dir)?;
            let p = dir.join("variants.csv");
            fs::write(&p, &csv).map_err(|e| Error::io(&p, e))?;
            let p = dir.join("variants.md");
            fs::write(&p, &md).map_err(|e| Error::io(&p, e))
        }
        None => {
            print!("{md}");
            Ok(())
        }
    }
}
