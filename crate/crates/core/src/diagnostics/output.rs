//! CSV, JSON and SVG writers for recorded diagnostics.
//!
//! Numbers are printed with a fixed format so repeated runs produce
//! byte-identical files.

use std::io::Write;
use std::path::Path;

use plotters::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `header` and `rows` as CSV to any sink.
pub fn write_csv_to<W: Write>(sink: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| format_value(v))).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    write_csv_to(std::fs::File::create(path)?, header, rows)
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(io_err)?;
    let header = r.headers().map_err(io_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        rows.push(rec.iter().map(|s| s.parse::<f64>().map_err(io_err)).collect::<Result<Vec<_>>>()?);
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io_err)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Log-log plot of the named columns against `t`, using samples with `t > 0`
/// and positive values.
pub fn write_loglog_svg(path: &Path, title: &str, header: &[String], rows: &[Vec<f64>], columns: &[&str]) -> Result<()> {
    let mut series = Vec::new();
    for &name in columns {
        let c = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("no column named {name}")))?;
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[c])).filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
        series.push((name, pts));
    }
    let all = series.iter().flat_map(|s| s.1.iter());
    let (mut t0, mut t1, mut y0, mut y1) = (f64::INFINITY, 0.0_f64, f64::INFINITY, 0.0_f64);
    for &(t, y) in all {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(t1 > t0) {
        (t0, t1) = (1.0, 10.0);
    }
    if !(y1 > y0) {
        (y0, y1) = if y1 > 0.0 { (0.5 * y1, 2.0 * y1) } else { (1e-3, 1.0) };
    }
    let root = SVGBackend::new(path, (800, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(io_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((t0..t1).log_scale(), (y0..y1).log_scale())
        .map_err(io_err)?;
    chart.configure_mesh().x_desc("t").draw().map_err(io_err)?;
    for (k, (name, pts)) in series.into_iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(io_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(io_err)?;
    root.present().map_err(io_err)?;
    Ok(())
}
