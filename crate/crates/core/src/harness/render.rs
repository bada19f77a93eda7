//! Plot and map rendering. Plots are hand-written SVG; maps are the PGM
//! snapshot with the trajectory burned in, plus an SVG overlay.

use std::fmt::Write as _;
use std::path::Path;

use super::eval::{trial_stem, EvalReport};
use super::write_text;
use crate::env::EpisodeRecord;
use crate::error::{Error, Result};
use crate::mapping::MapSnapshot;

/// Gray level of trajectory pixels in overlay PGMs.
pub const PGM_TRAJECTORY: u8 = 64;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

/// Plot frame in SVG user units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Frame {
    pub fn to_svg(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let w = self.width - 2.0 * self.margin;
        let h = self.height - 2.0 * self.margin;
        (
            self.margin + (x - x0) / (x1 - x0) * w,
            self.height - self.margin - (y - y0) / (y1 - y0) * h,
        )
    }
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) || !v.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * mag)
}

fn range_of(series: &[Series], pick: fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let vals = series.iter().flat_map(|s| s.points.iter().map(pick));
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo >= 0.0 {
        (0.0, nice_max(hi))
    } else if hi <= 0.0 {
        (-nice_max(-lo), 0.0)
    } else {
        (-nice_max(-lo), nice_max(hi))
    }
}

/// Line plot with one polyline per series. `y_range` fixes the vertical
/// axis (e.g. `(0, 1)` for coverage); `None` fits the data.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], y_range: Option<(f64, f64)>) -> String {
    let frame = Frame {
        width: 720.0,
        height: 440.0,
        margin: 60.0,
        x_range: range_of(series, |p| p.0),
        y_range: y_range.unwrap_or_else(|| range_of(series, |p| p.1)),
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = frame.width,
        h = frame.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        frame.width / 2.0,
        escape(title)
    );
    // axes and ticks
    let (ax0, ay0) = frame.to_svg(frame.x_range.0, frame.y_range.0);
    let (ax1, ay1) = frame.to_svg(frame.x_range.1, frame.y_range.1);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{ax0:.2},{ay1:.2} L{ax0:.2},{ay0:.2} L{ax1:.2},{ay0:.2}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let xv = frame.x_range.0 + f * (frame.x_range.1 - frame.x_range.0);
        let yv = frame.y_range.0 + f * (frame.y_range.1 - frame.y_range.0);
        let (tx, _) = frame.to_svg(xv, frame.y_range.0);
        let (_, ty) = frame.to_svg(frame.x_range.0, yv);
        let _ = writeln!(
            s,
            r#"<line x1="{tx:.2}" y1="{ay0:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ay0 + 5.0,
            ay0 + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{ax0:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ax0 - 5.0,
            ax0 - 8.0,
            ty + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        frame.height - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (ay0 + ay1) / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = frame.to_svg(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&ser.label),
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            ax1 - 150.0,
            ay1 + 16.0 + 14.0 * i as f64,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// World coordinates to image pixel coordinates: x to the right, rows
/// downward from the top of the map (largest y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldToImage {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub height: usize,
}

impl WorldToImage {
    pub fn for_map(map: &MapSnapshot) -> Self {
        Self {
            origin: map.origin,
            resolution: map.resolution,
            height: map.height,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin[0]) / self.resolution,
            self.height as f64 - (y - self.origin[1]) / self.resolution,
        )
    }
}

/// Map as run-length rectangles with the trajectory polyline on top, in
/// pixel units.
pub fn trajectory_svg(map: &MapSnapshot, trajectory: &[(f64, f64)]) -> String {
    let tf = WorldToImage::for_map(map);
    let (w, h) = (map.width, map.height);
    let scale = (900.0 / w as f64).clamp(1.0, 8.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#,
        w as f64 * scale,
        h as f64 * scale
    );
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#cdcdcd"/>"##);
    let cells = map.cells.as_bytes();
    for row in 0..h {
        let y = h - 1 - row;
        let line = &cells[y * w..(y + 1) * w];
        let mut col = 0;
        while col < w {
            let c = line[col];
            let mut end = col + 1;
            while end < w && line[end] == c {
                end += 1;
            }
            let fill = match c {
                b'f' => Some("#fefefe"),
                b'o' => Some("#000000"),
                _ => None,
            };
            if let Some(fill) = fill {
                let _ = writeln!(s, r#"<rect x="{col}" y="{row}" width="{}" height="1" fill="{fill}"/>"#, end - col);
            }
            col = end;
        }
    }
    let pts: Vec<String> = trajectory
        .iter()
        .map(|&(x, y)| {
            let (px, py) = tf.apply(x, y);
            format!("{px:.3},{py:.3}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline class="trajectory" fill="none" stroke="#d62728" stroke-width="{:.3}" points="{}"/>"##,
        2.0 / scale,
        pts.join(" ")
    );
    if let Some(&(x, y)) = trajectory.first() {
        let (px, py) = tf.apply(x, y);
        let _ = writeln!(s, r##"<circle class="start" cx="{px:.3}" cy="{py:.3}" r="2" fill="#2ca02c"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

/// PGM bytes of `map` with trajectory segments drawn at [`PGM_TRAJECTORY`].
pub fn overlay_pgm(map: &MapSnapshot, trajectory: &[(f64, f64)]) -> Vec<u8> {
    let mut bytes = map.to_pgm();
    let header = bytes.len() - map.width * map.height;
    let tf = WorldToImage::for_map(map);
    let mut mark = |px: f64, py: f64| {
        if px >= 0.0 && py >= 0.0 && (px as usize) < map.width && (py as usize) < map.height {
            bytes[header + py as usize * map.width + px as usize] = PGM_TRAJECTORY;
        }
    };
    for pair in trajectory.windows(2) {
        let (a, b) = (tf.apply(pair[0].0, pair[0].1), tf.apply(pair[1].0, pair[1].1));
        let n = ((b.0 - a.0).hypot(b.1 - a.1) * 4.0).ceil().max(1.0) as usize;
        for k in 0..=n {
            let f = k as f64 / n as f64;
            mark(a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        }
    }
    if let [only] = trajectory {
        let p = tf.apply(only.0, only.1);
        mark(p.0, p.1);
    }
    bytes
}

/// Writes per-episode artifacts under `dir`: coverage curves and trajectory
/// SVG in `plots/`, map PGM/YAML and overlay PGM in `maps/`.
pub fn render_record(rec: &EpisodeRecord, dir: &Path, stem: &str) -> Result<()> {
    if rec.steps.is_empty() {
        return Err(Error::Precondition("cannot render an episode without steps".into()));
    }
    let plots = dir.join("plots");
    let maps = dir.join("maps");
    write_text(
        &plots.join(format!("{stem}_coverage_time.svg")),
        &line_plot_svg(
            "Coverage vs. time",
            "time (s)",
            "coverage",
            &[Series::new(stem, rec.coverage_vs_time())],
            Some((0.0, 1.0)),
        ),
    )?;
    write_text(
        &plots.join(format!("{stem}_coverage_path.svg")),
        &line_plot_svg(
            "Coverage vs. path length",
            "path length (m)",
            "coverage",
            &[Series::new(stem, rec.coverage_vs_path())],
            Some((0.0, 1.0)),
        ),
    )?;
    if let Some(map) = &rec.final_map {
        let traj = rec.trajectory();
        write_text(&plots.join(format!("{stem}_trajectory.svg")), &trajectory_svg(map, &traj))?;
        map.write_map(&maps, stem)?;
        let path = maps.join(format!("{stem}_overlay.pgm"));
        std::fs::write(&path, overlay_pgm(map, &traj)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// All-trial coverage curves of an evaluation.
pub fn render_trials(report: &EvalReport, records: &[EpisodeRecord], plots: &Path) -> Result<()> {
    let pick = |f: fn(&EpisodeRecord) -> Vec<(f64, f64)>| -> Vec<Series> {
        report
            .trials
            .iter()
            .zip(records)
            .map(|(t, r)| Series::new(trial_stem(t), f(r)))
            .collect()
    };
    let title = format!("{} on {}", report.method.as_str(), report.world);
    write_text(
        &plots.join("coverage_time.svg"),
        &line_plot_svg(&title, "time (s)", "coverage", &pick(|r| r.coverage_vs_time()), Some((0.0, 1.0))),
    )?;
    write_text(
        &plots.join("coverage_path.svg"),
        &line_plot_svg(&title, "path length (m)", "coverage", &pick(|r| r.coverage_vs_path()), Some((0.0, 1.0))),
    )
}
