use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use evrep::dea::fuse;
use evrep::devox::{project_dev, DevMode, DevPlanes};
use evrep::event::{EventWindow, SensorGeometry};
use evrep::ingest::{
    decode_evt1, evt1_bytes, label_window, parse_events_csv, window_by_count, write_events_csv, IngestError,
    LabelTrack, PolarityFormat, EVT1_MAGIC,
};
use evrep::pose::{
    heatmap_encode, mpjpe, per_joint_error, simdr_encode, JointSet, HEATMAP_SIGMA, HEATMAP_SIZE, SIMDR_SIGMA,
};
use evrep::raster::{self, sample_fixed};
use evrep::synth::{gen_corpus, SynthConfig};
use evrep::tensor::Ten1;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::run::{is_stdio, Run};
use crate::{
    CodecArg, ConvertArgs, DeaArgs, EncodeLabelsArgs, EvalArgs, LabelModeArg, RasterizeArgs, SynthArgs, UsageError,
    VoxelizeArgs, WindowArgs,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

pub(crate) fn load_window(bytes: &[u8]) -> Result<EventWindow> {
    let (geometry, events) = decode_evt1(bytes)?;
    Ok(EventWindow::spanning(geometry, events)?)
}

/// Prints `report` plus the run manifest on stdout, and writes the bare
/// report to `output` if given.
pub(crate) fn emit_report(mut run: Run, mut report: Value, output: Option<&Path>) -> Result<()> {
    if let Some(path) = output {
        let bytes = serde_json::to_vec_pretty(&report)?;
        run.write_output(path, &bytes)?;
    }
    report["manifest"] = serde_json::to_value(run.finish())?;
    let mut out = io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(&report)?) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other.context("writing stdout")?),
    }
}

pub fn convert(args: ConvertArgs) -> Result<()> {
    let format = PolarityFormat::from(args.polarity);
    let polarity = match format {
        PolarityFormat::ZeroOne => "zero-one",
        PolarityFormat::Signed => "signed",
    };
    let mut run = Run::new("convert", Value::Null, None);
    let bytes = run.read_input(&args.input)?;
    let (direction, out) = if bytes.starts_with(EVT1_MAGIC) {
        let (_, events) = decode_evt1(&bytes).context("decoding EVT1 input")?;
        let mut csv = Vec::new();
        write_events_csv(&mut csv, &events, format)?;
        ("evt1-to-csv", csv)
    } else {
        let geometry = SensorGeometry::new(args.width, args.height).map_err(|e| usage(e.to_string()))?;
        let mut events = parse_events_csv(bytes.as_slice(), format).context("parsing event CSV")?;
        if args.sort {
            events.sort_by_key(|e| e.t);
        }
        if let Some((i, e)) = events
            .iter()
            .enumerate()
            .find(|(_, e)| !geometry.contains(e.x as u32, e.y as u32))
        {
            bail!(
                "event {i} at ({}, {}) lies outside the {}x{} sensor",
                e.x,
                e.y,
                args.width,
                args.height
            );
        }
        ("csv-to-evt1", evt1_bytes(geometry, &events))
    };
    run.set_config(
        json!({"direction": direction, "polarity": polarity, "width": args.width, "height": args.height, "sort": args.sort}),
    );
    run.write_output(&args.output, &out)?;
    run.emit(&args.output)
}

#[derive(Serialize)]
struct WindowEntry {
    index: usize,
    file: String,
    label_file: String,
    events: usize,
    t_start: u64,
    t_end: u64,
}

pub fn window(args: WindowArgs) -> Result<()> {
    let mode = match args.label_mode {
        LabelModeArg::Mean => "mean",
        LabelModeArg::Last => "last",
    };
    let mut run = Run::new(
        "window",
        json!({"count": args.count, "label_mode": mode, "min_points": args.min_points}),
        None,
    );
    let (geometry, stream) = decode_evt1(&run.read_input(&args.events)?).context("decoding event stream")?;
    let track = LabelTrack::read_csv(run.read_input(&args.labels)?.as_slice()).context("parsing label track")?;
    let windows = window_by_count(&stream, geometry, args.count, args.min_points, None)?;

    fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    let mut entries = Vec::new();
    let mut combined = String::new();
    let mut skipped = 0usize;
    for window in windows {
        let labelled = match label_window(window, &track, args.label_mode.into()) {
            Ok(l) => l,
            Err(IngestError::NoLabelInWindow { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let index = entries.len();
        let w = &labelled.window;
        let file = format!("window_{index:04}.evt1");
        let label_file = format!("window_{index:04}_label.csv");
        run.write_output(&args.output.join(&file), &evt1_bytes(w.geometry(), w.events()))?;
        let mut label_csv = Vec::new();
        labelled.label.write_csv(&mut label_csv)?;
        run.write_output(&args.output.join(&label_file), &label_csv)?;
        for (j, joint) in labelled.label.joints().enumerate() {
            let coords: Vec<String> = joint.iter().map(|c| c.to_string()).collect();
            combined.push_str(&format!("{index},{j},{}\n", coords.join(",")));
        }
        entries.push(WindowEntry {
            index,
            file,
            label_file,
            events: w.len(),
            t_start: w.t_start(),
            t_end: w.t_end(),
        });
    }
    let header = if track.labels()[0].dim() == 3 {
        "window,joint_id,u,v,w\n"
    } else {
        "window,joint_id,u,v\n"
    };
    run.write_output(
        &args.output.join("labels.csv"),
        format!("{header}{combined}").as_bytes(),
    )?;
    let summary = json!({
        "count": args.count,
        "label_mode": mode,
        "min_points": args.min_points,
        "source_events": stream.len(),
        "skipped_without_label": skipped,
        "windows": entries,
    });
    run.write_output(&args.output.join("windows.json"), &serde_json::to_vec_pretty(&summary)?)?;
    run.emit(&args.output)
}

/// Applies `f` to one window file or to every `*.evt1` in a directory,
/// writing `<stem>.<ext>` files into the output directory in the latter case.
fn map_windows(
    run: &mut Run,
    input: &Path,
    output: &Path,
    ext: &str,
    f: impl Fn(&EventWindow) -> Result<Vec<u8>>,
) -> Result<()> {
    if is_stdio(input) || !input.is_dir() {
        let window = load_window(&run.read_input(input)?).with_context(|| input.display().to_string())?;
        let bytes = f(&window)?;
        return run.write_output(output, &bytes);
    }
    if is_stdio(output) {
        return Err(usage("directory input needs a directory output, not stdout"));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("listing {}", input.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "evt1"));
    files.sort();
    if files.is_empty() {
        bail!("no .evt1 files in {}", input.display());
    }
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    for path in files {
        let window = load_window(&run.read_input(&path)?).with_context(|| path.display().to_string())?;
        let bytes = f(&window).with_context(|| path.display().to_string())?;
        let stem = path.file_stem().expect("listed files have names");
        let mut name = stem.to_os_string();
        name.push(".");
        name.push(ext);
        run.write_output(&output.join(name), &bytes)?;
    }
    Ok(())
}

pub fn rasterize_window(window: &EventWindow, k: usize, sample_n: Option<usize>, seed: u64) -> Result<Vec<u8>> {
    let cloud = raster::rasterize(window, k)?;
    let cloud = match sample_n {
        Some(n) => sample_fixed(&cloud, n, seed)?,
        None => cloud,
    };
    Ok(cloud.to_bytes())
}

pub fn rasterize(args: RasterizeArgs) -> Result<()> {
    let sample_n = (!args.no_sample).then_some(args.sample_n);
    let mut run = Run::new(
        "rasterize",
        json!({"k": args.k, "sample_n": sample_n, "seed": args.seed}),
        Some(args.seed),
    );
    map_windows(&mut run, &args.input, &args.output, "rpc1", |w| {
        rasterize_window(w, args.k as usize, sample_n, args.seed)
    })?;
    run.emit(&args.output)
}

pub fn voxelize(args: VoxelizeArgs) -> Result<()> {
    let mode = DevMode::from(args.mode);
    let mode_name = match mode {
        DevMode::Count => "count",
        DevMode::PolaritySum => "polarity-sum",
        DevMode::TwoChannel => "two-channel",
    };
    let mut run = Run::new(
        "voxelize",
        json!({"dims": args.dims.to_string(), "mode": mode_name}),
        None,
    );
    map_windows(&mut run, &args.input, &args.output, "dev1", |w| {
        Ok(project_dev(w, args.dims, mode)?.to_bytes())
    })?;
    run.emit(&args.output)
}

pub fn dea(args: DeaArgs) -> Result<()> {
    let (pooling, fusion) = (args.pooling(), args.fusion());
    let mut run = Run::new(
        "dea",
        json!({"pooling": format!("{pooling:?}").to_lowercase(), "fusion": format!("{fusion:?}").to_lowercase()}),
        None,
    );
    let (hw, th, wt) = match args.inputs.as_slice() {
        [dev] => {
            let planes = DevPlanes::from_bytes(&run.read_input(dev)?).with_context(|| dev.display().to_string())?;
            (planes.hw, planes.th, planes.wt)
        }
        [a, b, c] => {
            let mut load = |p: &PathBuf| -> Result<_> {
                let t = Ten1::from_bytes(&run.read_input(p)?).with_context(|| p.display().to_string())?;
                t.into_feature().with_context(|| p.display().to_string())
            };
            (load(a)?, load(b)?, load(c)?)
        }
        _ => return Err(usage("dea takes three TEN1 files (hw th wt) or one DEV1 file")),
    };
    let fused = fuse(&hw, &th, &wt, pooling, fusion)?;
    run.write_output(&args.output, &fused.to_ten1().to_bytes())?;
    run.emit(&args.output)
}

pub fn encode_labels(args: EncodeLabelsArgs) -> Result<()> {
    let simdr = args.codec == CodecArg::Simdr;
    let (default_w, default_h, default_sigma) = if simdr {
        let g = SensorGeometry::DAVIS346;
        (g.width() as usize, g.height() as usize, SIMDR_SIGMA)
    } else {
        (HEATMAP_SIZE, HEATMAP_SIZE, HEATMAP_SIGMA)
    };
    let width = args.width.unwrap_or(default_w);
    let height = args.height.unwrap_or(default_h);
    let sigma = args.sigma.unwrap_or(default_sigma);
    let codec = if simdr { "simdr" } else { "heatmap" };
    let scale = match args.source {
        Some((sw, sh)) => (width as f64 / sw as f64, height as f64 / sh as f64),
        None => (1.0, 1.0),
    };
    let mut run = Run::new(
        "encode-labels",
        json!({"codec": codec, "sigma": sigma, "width": width, "height": height, "source": args.source}),
        None,
    );
    let joints = JointSet::read_csv(run.read_input(&args.input)?.as_slice()).context("parsing joints CSV")?;
    if joints.dim() != 2 {
        bail!("label codecs take 2D joints, got {}D", joints.dim());
    }
    let j = joints.joint_count();
    let mut data = Vec::new();
    for (i, joint) in joints.joints().enumerate() {
        let (u, v) = (joint[0] * scale.0, joint[1] * scale.1);
        if simdr {
            data.extend(simdr_encode(u, width, sigma).with_context(|| format!("joint {i} u"))?);
            data.extend(simdr_encode(v, height, sigma).with_context(|| format!("joint {i} v"))?);
        } else {
            let map = heatmap_encode((u, v), (height, width), sigma).with_context(|| format!("joint {i}"))?;
            data.extend_from_slice(map.grid());
        }
    }
    let dims = if simdr {
        vec![j, width + height]
    } else {
        vec![j, height, width]
    };
    let tensor = Ten1::new(dims, data)?;
    run.write_output(&args.output, &tensor.to_bytes())?;
    run.emit(&args.output)
}

pub fn eval_mpjpe(args: EvalArgs) -> Result<()> {
    let mut run = Run::new("eval-mpjpe", json!({}), None);
    let pred = JointSet::read_csv(run.read_input(&args.pred)?.as_slice()).context("parsing predicted joints")?;
    let gt = JointSet::read_csv(run.read_input(&args.gt)?.as_slice()).context("parsing ground-truth joints")?;
    let mean = mpjpe(&pred, &gt)?;
    let per_joint = per_joint_error(&pred, &gt)?;
    let report = json!({
        "mpjpe": mean,
        "per_joint": per_joint,
        "joints": gt.joint_count(),
        "dim": gt.dim(),
    });
    emit_report(run, report, args.output.as_deref())
}

/// Corpus settings as read from `--config`; missing keys take defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CorpusSpec {
    sequences: usize,
    width: u16,
    height: u16,
    frame_period_us: u64,
    threshold: f64,
    foreground: f64,
    background: f64,
    noise_rate_hz: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        let c = SynthConfig::default();
        Self {
            sequences: 4,
            width: c.geometry.width(),
            height: c.geometry.height(),
            frame_period_us: c.frame_period_us,
            threshold: c.threshold,
            foreground: c.foreground,
            background: c.background,
            noise_rate_hz: c.noise_rate_hz,
        }
    }
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut run = Run::new("synth", Value::Null, Some(args.seed));
    let mut spec: CorpusSpec = match &args.config {
        Some(path) => {
            serde_json::from_slice(&run.read_input(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
        None => CorpusSpec::default(),
    };
    spec.sequences = args.sequences.unwrap_or(spec.sequences);
    spec.width = args.width.unwrap_or(spec.width);
    spec.height = args.height.unwrap_or(spec.height);
    spec.threshold = args.threshold.unwrap_or(spec.threshold);
    spec.frame_period_us = args.frame_period_us.unwrap_or(spec.frame_period_us);
    spec.noise_rate_hz = args.noise_rate_hz.unwrap_or(spec.noise_rate_hz);
    let config = SynthConfig {
        geometry: SensorGeometry::new(spec.width, spec.height).map_err(|e| usage(e.to_string()))?,
        frame_period_us: spec.frame_period_us,
        threshold: spec.threshold,
        foreground: spec.foreground,
        background: spec.background,
        noise_rate_hz: spec.noise_rate_hz,
        noise_seed: 0,
    };
    run.set_config(serde_json::to_value(&spec)?);

    // generate beside the target, then move each file into place
    let parent = match args.output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let staging = tempfile::tempdir_in(&parent).with_context(|| format!("staging in {}", parent.display()))?;
    let manifest = gen_corpus(spec.sequences, args.seed, &config, staging.path()).map_err(|e| match e {
        evrep::synth::SynthError::BadConfig(msg) => usage(msg),
        other => anyhow!(other),
    })?;
    fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    let mut names: Vec<String> = manifest
        .sequences
        .iter()
        .flat_map(|s| [s.evt1.clone(), s.labels_csv.clone()])
        .collect();
    names.push("manifest.json".into());
    for name in names {
        let target = args.output.join(&name);
        fs::rename(staging.path().join(&name), &target).with_context(|| format!("moving {}", target.display()))?;
        run.record_output(&target)?;
    }
    run.emit(&args.output)
}
