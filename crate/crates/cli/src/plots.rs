use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::sweep::SweepRow;
use crate::CliError;

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

fn series_label(r: &SweepRow) -> String {
    if r.witness == "ft_morelli" {
        format!("{} m={}", r.witness, r.m)
    } else {
        r.witness.clone()
    }
}

/// Padded axis range that is never degenerate.
fn span(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = ((hi - lo) * 0.05).max(1.0);
    (lo - pad)..(hi + pad)
}

fn line_chart(
    path: &Path,
    caption: &str,
    x_desc: &str,
    series: &BTreeMap<String, Vec<(f64, f64)>>,
) -> Result<(), CliError> {
    let points = series.values().flatten();
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 1.0f64);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(55)
        .build_cartesian_2d(span(x0, x1), 0.0..y1 * 1.08 + 1.0)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(x_desc).y_desc("certified dimension n").draw().map_err(plot_err)?;
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 4, color.filled()))).map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Renders certified dimension against subspace dimension, one series per
/// witness and MUB count, plus certified dimension against `m` when more
/// than one MUB count is present.
pub fn emit_plots(rows: &[SweepRow], output_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if rows.is_empty() {
        return Err(CliError::InvalidArgument("no rows to plot".into()));
    }
    fs::create_dir_all(output_dir)?;
    let length = rows[0].fiber_length_m;
    let mut files = Vec::new();

    let mut by_witness: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        by_witness.entry(series_label(r)).or_default().push((r.d as f64, r.certified_n as f64));
    }
    let path = output_dir.join("certified_vs_d.svg");
    line_chart(&path, &format!("Certified dimension, {length} m fiber"), "subspace dimension d", &by_witness)?;
    files.push(path);

    let morelli: Vec<&SweepRow> = rows.iter().filter(|r| r.witness == "ft_morelli").collect();
    let distinct_m: std::collections::BTreeSet<usize> = morelli.iter().map(|r| r.m).collect();
    if distinct_m.len() > 1 {
        let mut by_d: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &morelli {
            by_d.entry(r.d).or_default().push((r.m as f64, r.certified_n as f64));
        }
        let labeled = by_d.into_iter().map(|(d, pts)| (format!("d={d:>3}"), pts)).collect();
        let path = output_dir.join("certified_vs_m.svg");
        line_chart(
            &path,
            &format!("Certified dimension against MUB count, {length} m fiber"),
            "number of MUBs m",
            &labeled,
        )?;
        files.push(path);
    }
    Ok(files)
}
