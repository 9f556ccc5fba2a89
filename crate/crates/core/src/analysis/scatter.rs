//! Deterministic SVG scatter of projected timbre groups, with a companion
//! CSV of coordinates. No timestamps, fixed float formatting, so re-runs are
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{AnalysisError, PcaModel};
use crate::codec::TimbreVector;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Clone, Copy)]
enum Marker {
    Circle,
    Square,
    Triangle,
    Diamond,
}

const MARKERS: [Marker; 4] = [
    Marker::Circle,
    Marker::Square,
    Marker::Triangle,
    Marker::Diamond,
];

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn marker_svg(marker: Marker, x: f64, y: f64, color: &str) -> String {
    match marker {
        Marker::Circle => format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\" fill-opacity=\"0.8\"/>",
            fmt(x),
            fmt(y)
        ),
        Marker::Square => format!(
            "<rect x=\"{}\" y=\"{}\" width=\"7\" height=\"7\" fill=\"{color}\" fill-opacity=\"0.8\"/>",
            fmt(x - 3.5),
            fmt(y - 3.5)
        ),
        Marker::Triangle => format!(
            "<path d=\"M {} {} L {} {} L {} {} Z\" fill=\"{color}\" fill-opacity=\"0.8\"/>",
            fmt(x),
            fmt(y - 4.5),
            fmt(x - 4.0),
            fmt(y + 3.5),
            fmt(x + 4.0),
            fmt(y + 3.5)
        ),
        Marker::Diamond => format!(
            "<path d=\"M {} {} L {} {} L {} {} L {} {} Z\" fill=\"{color}\" fill-opacity=\"0.8\"/>",
            fmt(x),
            fmt(y - 5.0),
            fmt(x + 4.0),
            fmt(y),
            fmt(x),
            fmt(y + 5.0),
            fmt(x - 4.0),
            fmt(y)
        ),
    }
}

/// Writes `<prefix>.svg` and `<prefix>.csv` for the projected groups.
pub fn emit_scatter(
    model: &PcaModel,
    groups: &[(String, Vec<TimbreVector>)],
    out_prefix: &Path,
) -> Result<(), AnalysisError> {
    if groups.is_empty() || groups.iter().all(|(_, v)| v.is_empty()) {
        return Err(AnalysisError::EmptyGroups);
    }

    let mut projected: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (name, vectors) in groups {
        let coords = model.project_all(vectors)?;
        projected.push((
            name.clone(),
            coords.iter().map(|c| (c[0], c[1])).collect(),
        ));
    }

    let all: Vec<(f64, f64)> = projected.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let pad_x = (max_x - min_x).max(1e-9) * 0.05;
    let pad_y = (max_y - min_y).max(1e-9) * 0.05;
    min_x -= pad_x;
    max_x += pad_x;
    min_y -= pad_y;
    max_y += pad_y;

    let sx = |x: f64| MARGIN + (x - min_x) / (max_x - min_x) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - min_y) / (max_y - min_y) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">PC1 ({:.1}%)</text>",
        WIDTH / 2.0,
        HEIGHT - 14.0,
        100.0 * model.explained_variance_ratio(0)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">PC2 ({:.1}%)</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        100.0 * model.explained_variance_ratio(1)
    );

    for (gi, (_, points)) in projected.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let marker = MARKERS[gi % MARKERS.len()];
        for &(x, y) in points {
            let _ = writeln!(svg, "{}", marker_svg(marker, sx(x), sy(y), color));
        }
    }
    // Legend.
    for (gi, (name, _)) in projected.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let marker = MARKERS[gi % MARKERS.len()];
        let y = MARGIN + 18.0 * gi as f64;
        let _ = writeln!(svg, "{}", marker_svg(marker, WIDTH - MARGIN - 110.0, y, color));
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            WIDTH - MARGIN - 100.0,
            y + 4.0,
            name
        );
    }
    let _ = writeln!(svg, "</svg>");

    let mut csv = String::from("group,pc1,pc2\n");
    for (name, points) in &projected {
        for &(x, y) in points {
            let _ = writeln!(csv, "{name},{},{}", fmt(x), fmt(y));
        }
    }

    let svg_path = out_prefix.with_extension("svg");
    let csv_path = out_prefix.with_extension("csv");
    std::fs::write(&svg_path, svg).map_err(|e| AnalysisError::UnwritablePath {
        path: svg_path.display().to_string(),
        source: e,
    })?;
    std::fs::write(&csv_path, csv).map_err(|e| AnalysisError::UnwritablePath {
        path: csv_path.display().to_string(),
        source: e,
    })?;
    Ok(())
}
