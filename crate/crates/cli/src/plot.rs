//! Self-contained SVG line and step charts for the CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{CliError, CliResult};
use crate::output::{Schema, Table};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Draw as a right-continuous step function.
    pub step: bool,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Round step of roughly `span / 5`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let nice = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = tick_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    ((first..=last).map(|i| i as f64 * step).collect(), decimals)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render(chart: &Chart) -> String {
    let (x0, x1) = bounds(
        chart
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0)),
    );
    let (y0, y1) = bounds(
        chart
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1)),
    );
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        escape(&chart.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    let (xt, xd) = ticks(x0, x1);
    for x in xt {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{MARGIN_TOP}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{x:.xd$}</text>"##,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 16.0
        );
    }
    let (yt, yd) = ticks(y0, y1);
    for y in yt {
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.yd$}</text>"##,
            MARGIN_LEFT + pw,
            MARGIN_LEFT - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        escape(&chart.y_label)
    );

    for (i, s) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        let mut last_y = None;
        for (j, &(x, y)) in s.points.iter().enumerate() {
            let (px, py) = (sx(x), sy(y));
            if j == 0 {
                let _ = write!(path, "M{px:.1},{py:.1}");
            } else {
                if s.step {
                    if let Some(ly) = last_y {
                        let _ = write!(path, " L{px:.1},{ly:.1}");
                    }
                }
                let _ = write!(path, " L{px:.1},{py:.1}");
            }
            last_y = Some(py);
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#
        );
        let ly = MARGIN_TOP + 12.0 + i as f64 * 18.0;
        let lx = MARGIN_LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.8"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn parse_cell(t: &Table, row: &[String], col: usize) -> CliResult<f64> {
    row[col].parse().map_err(|_| {
        CliError::config(format!(
            "column `{}`: `{}` is not a number",
            t.header[col], row[col]
        ))
    })
}

/// Groups `(x, y)` pairs by a key column, keeping first-appearance order.
fn grouped(
    t: &Table,
    key: usize,
    x: usize,
    y: usize,
    suffix: &str,
    step: bool,
    dashed: bool,
) -> CliResult<Vec<Series>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, row) in t.rows.iter().enumerate() {
        let k = row[key].clone();
        let xv = if x == usize::MAX {
            i as f64
        } else {
            parse_cell(t, row, x)?
        };
        let yv = parse_cell(t, row, y)?;
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push((xv, yv));
    }
    Ok(order
        .into_iter()
        .map(|k| Series {
            points: groups.remove(&k).unwrap_or_default(),
            name: format!("{k}{suffix}"),
            step,
            dashed,
        })
        .collect())
}

/// Builds the chart matching a table's schema.
pub fn chart_for(t: &Table) -> CliResult<Chart> {
    let has = |c: &str| t.header.iter().any(|h| h == c);
    match t.schema {
        Schema::CoverageSweep => {
            let parameter = t.rows[0][t.column("parameter")?].clone();
            let key = t.column("density_row")?;
            let x = if parameter == "density_row" {
                usize::MAX
            } else {
                t.column("value")?
            };
            let mut series = Vec::new();
            if has("expected_receivers") {
                series.extend(grouped(
                    t,
                    key,
                    x,
                    t.column("expected_receivers")?,
                    " (analytic)",
                    false,
                    false,
                )?);
            }
            if has("sim_mean") {
                series.extend(grouped(
                    t,
                    key,
                    x,
                    t.column("sim_mean")?,
                    " (simulated)",
                    false,
                    true,
                )?);
            }
            Ok(Chart {
                title: "Receivers above the SINR threshold".into(),
                x_label: parameter,
                y_label: "covered receivers".into(),
                series,
            })
        }
        Schema::SinrCdf => Ok(Chart {
            title: "Top receiver SINR, empirical CDF".into(),
            x_label: "SINR (dB)".into(),
            y_label: "CDF".into(),
            series: grouped(
                t,
                t.column("beamwidth_deg")?,
                t.column("sinr_db")?,
                t.column("cdf")?,
                " deg",
                true,
                false,
            )?,
        }),
        Schema::CsSweep => {
            let key = t.column("density_row")?;
            let x = t.column("carrier_sense_range_m")?;
            let mut series = Vec::new();
            if has("analytic_per_meter") {
                series.extend(grouped(
                    t,
                    key,
                    x,
                    t.column("analytic_per_meter")?,
                    " (analytic)",
                    false,
                    false,
                )?);
            }
            if has("sim_per_meter") {
                series.extend(grouped(
                    t,
                    key,
                    x,
                    t.column("sim_per_meter")?,
                    " (simulated)",
                    false,
                    true,
                )?);
            }
            Ok(Chart {
                title: "Covered receivers per meter of road".into(),
                x_label: "carrier-sense range (m)".into(),
                y_label: "receivers / m".into(),
                series,
            })
        }
        Schema::BlockageCurve => {
            let x = t.column("distance_m")?;
            let mut series = Vec::new();
            for (col, name) in [
                ("delta_k1_db", "one blocker"),
                ("delta_k2_db", "two blockers"),
            ] {
                let y = t.column(col)?;
                let points = t
                    .rows
                    .iter()
                    .map(|r| Ok((parse_cell(t, r, x)?, parse_cell(t, r, y)?)))
                    .collect::<CliResult<Vec<_>>>()?;
                series.push(Series {
                    name: name.into(),
                    points,
                    step: false,
                    dashed: false,
                });
            }
            Ok(Chart {
                title: "Extra path loss from blockers".into(),
                x_label: "distance (m)".into(),
                y_label: "extra loss (dB)".into(),
                series,
            })
        }
        Schema::Simulate => Err(CliError::config(
            "simulate tables hold a single summary row; nothing to plot",
        )),
    }
}

pub fn plot_csv(text: &str) -> CliResult<String> {
    let table = Table::parse(text)?;
    Ok(render(&chart_for(&table)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(100.0), 20.0);
        assert_eq!(tick_step(1.0), 0.2);
        assert_eq!(tick_step(350.0), 100.0);
        let (t, d) = ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert_eq!(d, 1);
    }

    #[test]
    fn empty_and_unknown_inputs() {
        assert_eq!(plot_csv("").unwrap_err().exit_code(), 2);
        assert!(plot_csv("# schema: mmv2v/other/1\na\n1\n").is_err());
    }

    #[test]
    fn deterministic_svg() {
        let text = "# schema: mmv2v/sinr-cdf/1\n# scenario:\nbeamwidth_deg,sinr_db,cdf\n20,0,0\n20,10,0.5\n20,20,1\n30,0,0.2\n30,10,1\n30,20,1\n";
        let a = plot_csv(text).unwrap();
        assert_eq!(a, plot_csv(text).unwrap());
        assert!(a.starts_with("<svg"));
        assert!(a.contains("20 deg") && a.contains("30 deg"));
        assert_eq!(a.matches("<path").count(), 2);
    }
}
