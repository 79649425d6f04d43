use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use chromashift::adaptation::{AdaptationParams, Trajectory, TriphasicSchedule};
use chromashift::colorimetry::{ClipPolicy, JND};
use chromashift::optimizer::{
    feasible_velocity, optimal_velocity, pareto_sweep, select_trajectory, sensitivity_heatmap,
    write_heatmap_csv, write_pareto_csv, Candidate, Heatmap, OptimizationConfig,
};
use chromashift::pipeline::{process_sequence, sequence_energy, write_frame_reports, DeploymentSchedule};
use chromashift::power::{
    build_histogram, power_landscape, savings_boundary, ColorHistogram, GridSpec, PowerModel,
};
use chromashift::psychophysics::{
    fit_adaptation, fit_psychometric, group_records, read_records, sdt_analysis, simulate_calibration,
    simulate_observer, DetectionRecord, ObserverConfig, ParamGrid, PsychometricParams, Record,
    ScheduleRecord, PLACEMENT_SIGMA, SCHEMA_VERSION,
};
use chromashift_study::{SessionStore, StudyError, SystemClock};

use crate::values::{self, read_json};
use crate::Command;

/// Short machine-readable name for the root cause of `e`.
pub fn error_code(e: &anyhow::Error) -> &'static str {
    use chromashift::Error as E;
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<E>() {
            return match c {
                E::DegenerateChromaticity(_) => "degenerate_chromaticity",
                E::SingularWhite(_) => "singular_white",
                E::TimeOutOfRange { .. } => "time_out_of_range",
                E::DaylightOutOfRange { .. } => "daylight_out_of_range",
                E::NonFinite(_) => "non_finite",
                E::InvalidParameter(_) => "invalid_parameter",
                E::EmptyCorpus(_) => "empty_corpus",
                E::MissingFrames(_) => "missing_frames",
                E::Image { .. } => "image",
                E::Record { .. } => "record",
                E::Format { .. } => "format",
                E::Io(_) => "io",
                E::Json(_) => "json",
            };
        }
        if let Some(s) = cause.downcast_ref::<StudyError>() {
            return s.code();
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<serde_json::Error>() {
            return "json";
        }
    }
    "invalid_input"
}

fn print<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn model(hist: &Path, display: &str, clip: ClipPolicy) -> Result<PowerModel> {
    let params = values::display_params(display)?;
    let h = ColorHistogram::read_csv(hist)?;
    Ok(PowerModel::new(&h, params, clip)?)
}

fn fitted_params(t: &Trajectory) -> Option<AdaptationParams> {
    Trajectory::study_set().into_iter().find(|(s, _)| s == t).map(|(_, p)| p)
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Histogram { corpus, out, bins } => {
            let h = build_histogram(&corpus, bins)?;
            h.write_csv(&out)?;
            print(&json!({
                "out": out,
                "bins_per_channel": h.bins_per_channel(),
                "occupied_bins": h.len(),
                "total_weight": h.total_weight(),
            }))
        }
        Command::Landscape { hist, params, out, grid, clip } => {
            let m = model(&hist, &params, clip.into())?;
            let grid: GridSpec = match grid {
                Some(p) => read_json(&p)?,
                None => GridSpec::default(),
            };
            let l = power_landscape(&grid, &m)?;
            fs::create_dir_all(&out)?;
            l.write_csv(&out.join("landscape.csv"))?;
            l.write_png(&out.join("landscape.png"))?;
            let boundary = savings_boundary(&l);
            let mut s = String::from("contour,u,v\n");
            for (i, line) in boundary.iter().enumerate() {
                for c in line {
                    writeln!(s, "{i},{},{}", c.u, c.v)?;
                }
            }
            fs::write(out.join("boundary.csv"), s)?;
            let mut min: Option<f64> = None;
            for j in 0..l.vs().len() {
                for i in 0..l.us().len() {
                    if let Some(v) = l.value(i, j) {
                        min = Some(min.map_or(v, |m: f64| m.min(v)));
                    }
                }
            }
            print(&json!({
                "out": out,
                "d65_relative_power": l.nearest(chromashift::colorimetry::ChromaticityUv::d65()),
                "min_relative_power": min,
                "boundary_lines": boundary.len(),
            }))
        }
        Command::FitCalibration { jsonl } => {
            let (cal, _) = group_records(&read_records(&jsonl)?, None)?;
            print(&fit_psychometric(&cal)?)
        }
        Command::FitAdaptation { jsonl, schedule, k, x0, grid } => {
            let fallback: Option<TriphasicSchedule> = match schedule {
                Some(p) => Some(read_json(&p)?),
                None => None,
            };
            let (cal, sessions) = group_records(&read_records(&jsonl)?, fallback)?;
            if sessions.is_empty() {
                bail!("no measurement records in {}", jsonl.display());
            }
            let pp = match (k, x0) {
                (Some(k), Some(x0)) => PsychometricParams { k, x0 },
                _ if cal.len() >= 2 => fit_psychometric(&cal)?.params,
                _ => bail!("fewer than 2 calibration records; pass --k and --x0"),
            };
            let grid: ParamGrid = match grid {
                Some(p) => read_json(&p)?,
                None => ParamGrid::default(),
            };
            let fit = fit_adaptation(&sessions, &pp, &grid)?;
            print(&json!({ "psychometric": pp, "fit": fit }))
        }
        Command::Simulate { truth, schedule, seed, blocks, calibration, k, x0, prior, out } => {
            let truth = values::adaptation_params(&truth)?;
            let s: TriphasicSchedule = read_json(&schedule)?;
            s.validate()?;
            let pp = PsychometricParams { k, x0 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut records: Vec<Record> = simulate_calibration(&pp, calibration, PLACEMENT_SIGMA, &mut rng)
                .into_iter()
                .map(Record::Calibration)
                .collect();
            let mut cfg = ObserverConfig { prior: values::adaptation_params(&prior)?, ..ObserverConfig::default() };
            for block in 0..blocks {
                cfg.block = block;
                records.push(Record::Schedule(ScheduleRecord { schema: SCHEMA_VERSION, block, schedule: s }));
                records.extend(simulate_observer(&truth, &pp, &s, &cfg, &mut rng)?.into_iter().map(Record::Measurement));
            }
            let mut text = String::new();
            for r in &records {
                text.push_str(&r.to_line()?);
                text.push('\n');
            }
            match out {
                Some(p) => {
                    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
                    print(&json!({ "out": p, "records": records.len() }))
                }
                None => Ok(std::io::stdout().write_all(text.as_bytes())?),
            }
        }
        Command::Optimize { params, delta_t, t_max, trajectory, out } => {
            let p = values::adaptation_params(&params)?;
            let dt = values::distance(&delta_t)?;
            let c = Candidate { trajectory: values::trajectory(&trajectory)?, params: p };
            let v_opt = optimal_velocity(&p, dt, t_max)?;
            let (v, d, truncated) = feasible_velocity(&c, dt, t_max)?;
            let schedule = DeploymentSchedule { trajectory: c.trajectory, v, t_max };
            schedule.validate()?;
            if let Some(path) = &out {
                schedule.write_json(path)?;
            }
            print(&json!({
                "params": p,
                "delta_t": dt,
                "delta_t_jnd": dt / JND,
                "t_max": t_max,
                "v_optimal": v_opt,
                "v": v,
                "terminal_distance": d,
                "terminal": schedule.terminal()?,
                "truncated": truncated,
                "schedule": schedule,
            }))
        }
        Command::Pareto { hist, out, display, config, delta_t, clip } => {
            let m = model(&hist, &display, clip.into())?;
            let cfg: OptimizationConfig = match config {
                Some(p) => read_json(&p)?,
                None => OptimizationConfig::default(),
            };
            let curves = pareto_sweep(&cfg, &values::distances(&delta_t)?, &m)?;
            write_pareto_csv(&out, &curves)?;
            let sel = select_trajectory(&cfg, &m)?;
            print(&json!({
                "out": out,
                "selected": sel.candidate.trajectory.label(),
                "point": sel.point,
                "schedule": sel.schedule(cfg.t_max),
            }))
        }
        Command::Heatmap { hist, out, display, trajectory, params, delta_t, t_max, png, clip } => {
            let m = model(&hist, &display, clip.into())?;
            let t = values::trajectory(&trajectory)?;
            let p = match params {
                Some(s) => values::adaptation_params(&s)?,
                None => fitted_params(&t)
                    .with_context(|| format!("no fitted constants for {}; pass --params", t.label()))?,
            };
            let h = sensitivity_heatmap(
                &Candidate { trajectory: t, params: p },
                &values::distances(&delta_t)?,
                &values::numbers(&t_max)?,
                &m,
            )?;
            write_heatmap_csv(&out, &h)?;
            if let Some(path) = &png {
                heatmap_image(&h).save(path).with_context(|| format!("writing {}", path.display()))?;
            }
            print(&json!({ "out": out, "rows": h.delta_t.len(), "columns": h.t_max.len() }))
        }
        Command::Shift { input, output, schedule, fps, display, clip, report } => {
            let s = DeploymentSchedule::from_json_file(&schedule)?;
            let dp = values::display_params(&display)?;
            let reports = process_sequence(&input, &output, &s, fps, &dp, clip.into())?;
            let report = report.unwrap_or_else(|| output.join("report.csv"));
            write_frame_reports(&report, &reports)?;
            let energy = sequence_energy(&reports, fps);
            let d65: f64 = reports.iter().map(|r| r.d65_power).sum::<f64>() / fps;
            print(&json!({
                "frames": reports.len(),
                "report": report,
                "energy": energy,
                "d65_energy": d65,
                "saving": 1.0 - energy / d65,
            }))
        }
        Command::Serve { addr, data } => {
            let clock = Arc::new(SystemClock);
            let store = match data {
                Some(dir) => SessionStore::open(dir, clock)?,
                None => SessionStore::in_memory(clock),
            };
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            eprintln!("listening on {addr}");
            rt.block_on(chromashift_study::serve(addr, Arc::new(store)))?;
            Ok(())
        }
        Command::Sdt { jsonl, roc } => {
            let text = fs::read_to_string(&jsonl).with_context(|| format!("reading {}", jsonl.display()))?;
            let mut recs = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let r: DetectionRecord = serde_json::from_str(line)
                    .with_context(|| format!("{}:{}", jsonl.display(), i + 1))?;
                recs.push(r);
            }
            let results = sdt_analysis(&recs);
            if results.is_empty() {
                bail!("no condition has both signal and noise trials");
            }
            if let Some(path) = &roc {
                let mut s = String::from("condition,fa_rate,hit_rate\n");
                for r in &results {
                    for (f, h) in &r.roc {
                        writeln!(s, "{},{f},{h}", r.condition)?;
                    }
                }
                fs::write(path, s)?;
            }
            print(&results)
        }
    }
}

/// Savings as gray levels scaled to the map's own range, 16 px per cell,
/// smallest allowance on the bottom row.
fn heatmap_image(h: &Heatmap) -> image::GrayImage {
    const CELL: u32 = 16;
    let (rows, cols) = (h.delta_t.len(), h.t_max.len());
    let all: Vec<f64> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| h.saving(i, j)).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    image::GrayImage::from_fn(cols as u32 * CELL, rows as u32 * CELL, |x, y| {
        let i = rows - 1 - (y / CELL) as usize;
        let j = (x / CELL) as usize;
        image::Luma([((h.saving(i, j) - lo) / span * 255.0).round() as u8])
    })
}
