//! Alignment-versus-support scatter plots, written by hand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sgpca::AlignmentReport;

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, write_lines};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

/// Rounds `x` up to 1, 2 or 5 times a power of ten.
fn nice_ceil(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let base = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * base)
        .find(|&v| v >= x)
        .unwrap_or(10.0 * base)
}

fn px(support: f64, xmax: f64) -> f64 {
    LEFT + support / xmax * (WIDTH - LEFT - RIGHT)
}

fn py(align: f64) -> f64 {
    HEIGHT - BOTTOM - align.clamp(0.0, 1.0) * (HEIGHT - TOP - BOTTOM)
}

/// Companion CSV path: the SVG path with a `.csv` extension.
pub fn companion_path(svg: &Path) -> PathBuf {
    svg.with_extension("csv")
}

/// Writes the plot for one component to `path` and the plotted pairs to
/// [`companion_path`]. Returns the companion path.
pub fn emit_diagnostic_svg(report: &AlignmentReport, path: &Path) -> CliResult<PathBuf> {
    if report.rows.is_empty() {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            message: "cannot plot an empty alignment report".into(),
        });
    }
    let xmax = nice_ceil(
        report
            .rows
            .iter()
            .map(|r| r.mean_support)
            .fold(1.0, f64::max),
    );

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">Component {}: alignment vs mean support</text>"#,
        WIDTH / 2.0,
        report.component + 1
    );

    // axes and ticks
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    for k in 0..=5 {
        let v = xmax * k as f64 / 5.0;
        let x = px(v, xmax);
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 20.0,
            v
        );
        let a = k as f64 / 5.0;
        let y = py(a);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{a:.1}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">mean support size</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="22" y="{}" text-anchor="middle" transform="rotate(-90 22 {})">alignment</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    // one marker per cell, the selected one drawn last
    let order: Vec<usize> = (0..report.rows.len())
        .filter(|&i| i != report.selected)
        .chain(std::iter::once(report.selected))
        .collect();
    for &i in &order {
        let row = &report.rows[i];
        let (cx, cy) = (px(row.mean_support, xmax), py(row.align));
        if i == report.selected {
            let _ = writeln!(
                s,
                r##"<circle class="cell selected" cx="{cx:.3}" cy="{cy:.3}" r="8" fill="#d62728" stroke="black" data-eta="{}" data-tau="{}"/>"##,
                row.eta, row.tau
            );
        } else {
            let _ = writeln!(
                s,
                r##"<circle class="cell" cx="{cx:.3}" cy="{cy:.3}" r="5" fill="#1f77b4" fill-opacity="0.7" data-eta="{}" data-tau="{}"/>"##,
                row.eta, row.tau
            );
        }
    }
    s.push_str("</svg>\n");

    write_lines(path, |w| w.write_all(s.as_bytes()))?;

    let csv = companion_path(path);
    write_lines(&csv, |w| {
        writeln!(w, "eta,tau,mean_support,align,selected")?;
        for &i in &order {
            let row = &report.rows[i];
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(row.eta),
                fmt_f64(row.tau),
                fmt_f64(row.mean_support),
                fmt_f64(row.align),
                u8::from(i == report.selected)
            )?;
        }
        Ok(())
    })?;
    Ok(csv)
}
