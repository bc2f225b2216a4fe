//! Per-stage timing of representation construction on one window. Model
//! inference is not part of any stage.

use std::hint::black_box;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use evrep::dea::{dea_fuse, Pooling};
use evrep::devox::{project_dev, DevMode};
use evrep::event::{Event, EventWindow, Polarity, SensorGeometry};
use evrep::ingest::{decode_evt1, evt1_bytes, window_by_count};
use evrep::raster::{rasterize, sample_fixed, RasterStream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::commands::emit_report;
use crate::run::Run;
use crate::BenchArgs;

const WARMUP: usize = 2;

#[derive(Debug, Serialize)]
struct StageReport {
    stage: &'static str,
    events: usize,
    iterations: usize,
    p50_ms: f64,
    p99_ms: f64,
    mean_ms: f64,
    events_per_sec: f64,
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn time_stage(
    stage: &'static str,
    events: usize,
    iterations: usize,
    mut f: impl FnMut() -> Result<()>,
) -> Result<StageReport> {
    for _ in 0..WARMUP {
        f()?;
    }
    let mut ms = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        f()?;
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    ms.sort_by(f64::total_cmp);
    let p50 = percentile(&ms, 0.50);
    Ok(StageReport {
        stage,
        events,
        iterations,
        p50_ms: p50,
        p99_ms: percentile(&ms, 0.99),
        mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
        events_per_sec: if p50 > 0.0 {
            events as f64 / (p50 / 1e3)
        } else {
            f64::INFINITY
        },
    })
}

/// `count` uniformly placed events over a 50 ms span on a DAVIS346 sensor.
fn random_window(count: usize, seed: u64) -> EventWindow {
    let g = SensorGeometry::DAVIS346;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times: Vec<u64> = (0..count).map(|_| rng.gen_range(0..50_000)).collect();
    times.sort_unstable();
    let events = times
        .into_iter()
        .map(|t| {
            let p = if rng.gen_bool(0.5) {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            Event::new(rng.gen_range(0..g.width()), rng.gen_range(0..g.height()), t, p)
        })
        .collect();
    EventWindow::spanning(g, events).expect("sorted in-bounds events")
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let k = args.k as usize;
    let mut run = Run::new(
        "bench",
        json!({
            "count": args.count,
            "iterations": args.iterations,
            "k": args.k,
            "sample_n": args.sample_n,
            "dims": args.dims.to_string(),
            "seed": args.seed,
        }),
        Some(args.seed),
    );
    let window = match &args.input {
        Some(path) => {
            let (g, stream) = decode_evt1(&run.read_input(path)?).context("decoding benchmark input")?;
            match window_by_count(&stream, g, args.count, 0, None)?.into_iter().next() {
                Some(w) => w,
                None => bail!(
                    "{} holds {} events, fewer than --count {}",
                    path.display(),
                    stream.len(),
                    args.count
                ),
            }
        }
        None => random_window(args.count, args.seed),
    };
    let n = window.len();
    let bytes = evt1_bytes(window.geometry(), window.events());
    let cloud = rasterize(&window, k)?;
    let planes = project_dev(&window, args.dims, DevMode::TwoChannel)?;

    let it = args.iterations;
    let stages = vec![
        time_stage("decode_evt1", n, it, || {
            black_box(decode_evt1(black_box(&bytes))?);
            Ok(())
        })?,
        time_stage("rasterize", n, it, || {
            black_box(rasterize(black_box(&window), k)?);
            Ok(())
        })?,
        time_stage("raster_stream_update", n, it, || {
            let mut s = RasterStream::new(window.geometry(), k, window.t_start(), window.duration())?;
            for chunk in window.events().chunks(1024) {
                s.update(chunk)?;
            }
            black_box(s.snapshot());
            Ok(())
        })?,
        time_stage("sample_fixed", n, it, || {
            black_box(sample_fixed(black_box(&cloud), args.sample_n, args.seed)?);
            Ok(())
        })?,
        time_stage("project_dev", n, it, || {
            black_box(project_dev(black_box(&window), args.dims, DevMode::TwoChannel)?);
            Ok(())
        })?,
        time_stage("dea_fuse", n, it, || {
            black_box(dea_fuse(&planes.hw, &planes.th, &planes.wt, Pooling::Avg)?);
            Ok(())
        })?,
    ];
    let report = json!({
        "events": n,
        "window_us": window.duration(),
        "profile": if cfg!(debug_assertions) { "debug" } else { "release" },
        "stages": stages,
    });
    emit_report(run, report, args.output.as_deref())
}
