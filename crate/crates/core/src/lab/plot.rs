use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_file, LabError, MOVING_AVERAGE_WINDOW};
use crate::ppo::moving_average;

pub const PLOT_SERIES_HEADER: &str = "series,kind,episode,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotResult {
    pub images: Vec<PathBuf>,
    pub csvs: Vec<PathBuf>,
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn schema(file: &Path, message: impl Into<String>) -> LabError {
    LabError::Schema { file: file.to_path_buf(), message: message.into() }
}

fn read_table(path: &Path) -> Result<Table, LabError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| schema(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| schema(path, e.to_string()))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| schema(path, e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(Table { headers, rows })
}

impl Table {
    fn column(&self, path: &Path, name: &str) -> Result<Vec<f64>, LabError> {
        let i = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| schema(path, format!("missing column {name}")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| schema(path, format!("column {name}: {e}"))))
            .collect()
    }
}

/// One plotted line.
struct Series {
    name: String,
    kind: &'static str,
    values: Vec<f64>,
}

fn learning_series(dir: &Path) -> Result<Vec<Series>, LabError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(super::io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("learning_curve_") && n.ends_with(".csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(schema(dir, "no learning_curve_*.csv files"));
    }
    let mut out = Vec::new();
    for f in files {
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().trim_start_matches("learning_curve_").to_string();
        let table = read_table(&f)?;
        let nu = table.column(&f, "mean_nu")?;
        let unlearning = table.column(&f, "unlearning")?.iter().any(|&u| u != 0.0);
        let averaged = stem == "mean";
        if !averaged || !unlearning {
            out.push(Series { name: stem.clone(), kind: "moving_average", values: moving_average(&nu, MOVING_AVERAGE_WINDOW) });
        }
        out.push(Series { name: stem, kind: "instantaneous", values: nu });
    }
    Ok(out)
}

fn series_csv(series: &[Series]) -> String {
    let mut out = format!("{PLOT_SERIES_HEADER}\n");
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            writeln!(out, "{},{},{},{}", s.name, s.kind, i + 1, v).expect("string write");
        }
    }
    out
}

fn bounds(series: &[Series]) -> (usize, f64, f64) {
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(1).max(2);
    let (lo, hi) = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return (len, 0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (len, lo - pad, hi + pad)
}

fn plot_err(e: impl std::fmt::Display) -> LabError {
    LabError::Plot(e.to_string())
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Averaged moving average solid, single-run moving averages dashed,
/// instantaneous values translucent.
fn render_learning(series: &[Series], title: &str, path: &Path) -> Result<(), LabError> {
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (len, lo, hi) = bounds(series);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(1f64..len as f64, lo..hi)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("episode").y_desc("Nu").draw().map_err(plot_err)?;
    for (k, s) in series.iter().enumerate() {
        let colour = if s.name == "mean" { BLACK } else { PALETTE[k / 2 % PALETTE.len()] };
        let points: Vec<(f64, f64)> = s.values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect();
        match (s.kind, s.name == "mean") {
            ("instantaneous", _) => {
                chart.draw_series(LineSeries::new(points, colour.mix(0.25).stroke_width(1))).map_err(plot_err)?;
            }
            (_, true) => {
                chart
                    .draw_series(LineSeries::new(points, colour.stroke_width(3)))
                    .map_err(plot_err)?
                    .label(format!("{} moving average", s.name))
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], colour.stroke_width(3)));
            }
            _ => {
                chart
                    .draw_series(DashedLineSeries::new(points, 3, 4, colour.stroke_width(2)))
                    .map_err(plot_err)?
                    .label(s.name.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], colour.stroke_width(2)));
            }
        }
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn action_series(path: &Path) -> Result<Vec<Series>, LabError> {
    let table = read_table(path)?;
    let mut out = vec![Series { name: "nu_global".into(), kind: "nusselt", values: table.column(path, "nu_global")? }];
    for h in table.headers.iter().filter(|h| h.starts_with("action_")) {
        out.push(Series { name: h.clone(), kind: "action", values: table.column(path, h)? });
    }
    if out.len() == 1 {
        return Err(schema(path, "missing action_* columns"));
    }
    Ok(out)
}

fn render_actions(series: &[Series], title: &str, path: &Path) -> Result<(), LabError> {
    let root = SVGBackend::new(path, (900, 720)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (top, bottom) = root.split_vertically(240);
    let nu: Vec<&Series> = series.iter().filter(|s| s.kind == "nusselt").collect();
    let (len, lo, hi) = bounds(&series[..1]);
    let mut chart = ChartBuilder::on(&top)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(60)
        .build_cartesian_2d(1f64..len as f64, lo..hi)
        .map_err(plot_err)?;
    chart.configure_mesh().y_desc("Nu").draw().map_err(plot_err)?;
    for s in nu {
        let pts: Vec<(f64, f64)> = s.values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect();
        chart.draw_series(LineSeries::new(pts, BLACK.stroke_width(2))).map_err(plot_err)?;
    }
    let actions: Vec<&Series> = series.iter().filter(|s| s.kind == "action").collect();
    let panels = bottom.split_evenly((actions.len().div_ceil(2), 2));
    for (panel, s) in panels.iter().zip(&actions) {
        let mut c = ChartBuilder::on(panel)
            .caption(&s.name, ("sans-serif", 12))
            .margin(4)
            .y_label_area_size(30)
            .build_cartesian_2d(1f64..len as f64, -0.8f64..0.8f64)
            .map_err(plot_err)?;
        c.configure_mesh().disable_x_mesh().disable_y_mesh().draw().map_err(plot_err)?;
        let pts: Vec<(f64, f64)> = s.values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect();
        c.draw_series(LineSeries::new(pts, PALETTE[0].stroke_width(1))).map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

/// Render learning curves (and action histories when an evaluation exists)
/// for each run directory, alongside CSVs of exactly the plotted values.
pub fn cmd_plot(run_dirs: &[PathBuf], out: &Path) -> Result<PlotResult, LabError> {
    if run_dirs.is_empty() {
        return Err(LabError::Usage("no run directories given".into()));
    }
    if let Some(missing) = run_dirs.iter().find(|d| !d.is_dir()) {
        return Err(LabError::Usage(format!("run directory {} does not exist", missing.display())));
    }
    std::fs::create_dir_all(out).map_err(super::io_err(out))?;
    let mut result = PlotResult { images: Vec::new(), csvs: Vec::new() };
    for (k, dir) in run_dirs.iter().enumerate() {
        let base = dir.file_name().and_then(|n| n.to_str()).filter(|n| !n.is_empty() && *n != "." && *n != "..");
        let name = match base {
            Some(n) if run_dirs.len() == 1 => n.to_string(),
            Some(n) => format!("{k}_{n}"),
            None => format!("run{k}"),
        };
        let series = learning_series(dir)?;
        let svg = out.join(format!("{name}_learning_curve.svg"));
        render_learning(&series, &format!("{name}: Nusselt number"), &svg)?;
        let csv = out.join(format!("{name}_learning_curve.csv"));
        write_file(&csv, series_csv(&series))?;
        result.images.push(svg);
        result.csvs.push(csv);

        let eval = dir.join("eval_deterministic").join("evaluation.csv");
        if eval.exists() {
            let series = action_series(&eval)?;
            let svg = out.join(format!("{name}_actions.svg"));
            render_actions(&series, &format!("{name}: deterministic evaluation"), &svg)?;
            let csv = out.join(format!("{name}_actions.csv"));
            write_file(&csv, series_csv(&series))?;
            result.images.push(svg);
            result.csvs.push(csv);
        }
    }
    Ok(result)
}
