//! CSV, JSON and SVG writers. All files are rendered in memory first; if any
//! write fails, the files already written by this call are removed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Method, Stabilizer};
use crate::run::RunRecord;
use crate::stats::band;
use crate::HarnessError;

pub const CURVES_FILE: &str = "curves.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TABLE_FILE: &str = "table.csv";
pub const RUNS_FILE: &str = "runs.json";

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>, HarnessError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

/// `method,stabilizer,seed,episode,return`, episodes numbered from 1.
pub fn render_curves(records: &[RunRecord]) -> Result<Vec<u8>, HarnessError> {
    csv_bytes(&["method", "stabilizer", "seed", "episode", "return"], |w| {
        for r in records {
            for s in &r.seeds {
                for (e, ret) in s.returns.iter().enumerate() {
                    w.write_record([
                        r.method.to_string(),
                        r.stabilizer.to_string(),
                        s.seed.to_string(),
                        (e + 1).to_string(),
                        ret.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

/// Per-trajectory axis: every collected trajectory, numbered from 1.
pub fn render_trajectories(records: &[RunRecord]) -> Result<Vec<u8>, HarnessError> {
    csv_bytes(&["method", "stabilizer", "seed", "trajectory", "return"], |w| {
        for r in records {
            for s in &r.seeds {
                for (i, ret) in s.trajectory_returns.iter().enumerate() {
                    w.write_record([
                        r.method.to_string(),
                        r.stabilizer.to_string(),
                        s.seed.to_string(),
                        (i + 1).to_string(),
                        ret.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn render_summary(records: &[RunRecord]) -> Result<Vec<u8>, HarnessError> {
    csv_bytes(&["method", "stabilizer", "final_mean", "final_std", "episodes_to_200"], |w| {
        for r in records {
            w.write_record([
                r.method.to_string(),
                r.stabilizer.to_string(),
                r.final_mean.to_string(),
                r.final_std.to_string(),
                opt(r.episodes_to_200),
            ])?;
        }
        Ok(())
    })
}

/// `model,mean,std` rows of final-episode return.
pub fn render_table(records: &[RunRecord]) -> Result<Vec<u8>, HarnessError> {
    csv_bytes(&["model", "mean", "std"], |w| {
        for r in records {
            w.write_record([r.model(), r.final_mean.to_string(), r.final_std.to_string()])?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct RunMeta<'a> {
    method: Method,
    stabilizer: Stabilizer,
    lr: f64,
    episodes: usize,
    final_mean: f64,
    final_std: f64,
    episodes_to_200: Option<f64>,
    episodes_to_400: Option<f64>,
    diverged: bool,
    seeds: Vec<SeedMeta<'a>>,
}

#[derive(Serialize)]
struct SeedMeta<'a> {
    seed: u64,
    diverged_at: Option<usize>,
    updates: u64,
    trajectories: u64,
    grad_passes: u64,
    hess_passes: u64,
    wall_clock_seconds: f64,
    episode_seconds: &'a [f64],
}

/// Divergence flags, counters and timings (not part of the deterministic CSVs).
pub fn render_runs(records: &[RunRecord]) -> Result<Vec<u8>, HarnessError> {
    let meta: Vec<RunMeta> = records
        .iter()
        .map(|r| RunMeta {
            method: r.method,
            stabilizer: r.stabilizer,
            lr: r.lr,
            episodes: r.episodes,
            final_mean: r.final_mean,
            final_std: r.final_std,
            episodes_to_200: r.episodes_to_200,
            episodes_to_400: r.episodes_to_400,
            diverged: r.any_diverged(),
            seeds: r
                .seeds
                .iter()
                .map(|s| SeedMeta {
                    seed: s.seed,
                    diverged_at: s.diverged_at,
                    updates: s.updates,
                    trajectories: s.trajectories,
                    grad_passes: s.grad_passes,
                    hess_passes: s.hess_passes,
                    wall_clock_seconds: s.episode_seconds.iter().sum(),
                    episode_seconds: &s.episode_seconds,
                })
                .collect(),
        })
        .collect();
    Ok(serde_json::to_vec_pretty(&meta)?)
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Learning curves of one method: mean across seeds with a ±1 std band per stabilizer.
pub fn render_plot(method: Method, records: &[&RunRecord]) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (60.0, 150.0, 30.0, 45.0);
    let bands: Vec<(String, Vec<(f64, f64)>)> = records
        .iter()
        .map(|r| {
            let curves: Vec<&[f64]> = r.seeds.iter().map(|s| s.returns.as_slice()).collect();
            (r.stabilizer.to_string(), band(&curves))
        })
        .collect();
    let n = bands.iter().map(|b| b.1.len()).max().unwrap_or(1).max(2);
    let y_max = bands
        .iter()
        .flat_map(|b| b.1.iter().map(|(m, s)| m + s))
        .filter(|v| v.is_finite())
        .fold(1.0_f64, f64::max);
    let y_max = (y_max / 50.0).ceil() * 50.0;
    let px = |e: usize| left + (w - left - right) * e as f64 / (n - 1) as f64;
    let py = |v: f64| top + (h - top - bottom) * (1.0 - (v / y_max).clamp(0.0, 1.0));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle">{method}: mean ± 1 std over seeds</text>"#, (w - right + left) / 2.0);
    for k in 0..=5 {
        let v = y_max * k as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"##,
            w - right,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">episode</text><text x="{left}" y="{:.2}" text-anchor="middle">1</text><text x="{:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#,
        (w - right + left) / 2.0,
        h - 8.0,
        h - bottom + 16.0,
        w - right,
        h - bottom + 16.0
    );
    for (i, (label, b)) in bands.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = b.iter().enumerate().map(|(e, (m, s))| format!("{:.2},{:.2}", px(e), py(m + s))).collect();
        let lower: Vec<String> = b.iter().enumerate().rev().map(|(e, (m, s))| format!("{:.2},{:.2}", px(e), py(m - s))).collect();
        let mean: Vec<String> = b.iter().enumerate().map(|(e, (m, _))| format!("{:.2},{:.2}", px(e), py(*m))).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, mean.join(" "));
        let ly = top + 20.0 * i as f64 + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            w - right + 15.0,
            w - right + 40.0,
            w - right + 46.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn plot_file_name(method: Method) -> String {
    format!("curves_{method}.svg")
}

/// Writes every output file for `records` into `out_dir` and returns their paths.
pub fn emit_outputs(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let mut files: Vec<(String, Vec<u8>)> = vec![
        (CURVES_FILE.into(), render_curves(records)?),
        (TRAJECTORIES_FILE.into(), render_trajectories(records)?),
        (SUMMARY_FILE.into(), render_summary(records)?),
        (TABLE_FILE.into(), render_table(records)?),
        (RUNS_FILE.into(), render_runs(records)?),
    ];
    for m in Method::ALL {
        let of_method: Vec<&RunRecord> = records.iter().filter(|r| r.method == m).collect();
        if !of_method.is_empty() {
            files.push((plot_file_name(m), render_plot(m, &of_method).into_bytes()));
        }
    }

    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = out_dir.join(name);
        if let Err(e) = fs::write(&path, bytes).map_err(io(&path)) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}
