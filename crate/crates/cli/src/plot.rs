//! Static SVG line charts for report series.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::report::{write_atomic, Report, Series};
use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"];

struct Line {
    label: String,
    xs: Vec<f64>,
    ys: Vec<f64>,
    dashed: bool,
    markers: bool,
}

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    lines: Vec<Line>,
}

impl Chart {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self
            .lines
            .iter()
            .flat_map(|l| l.xs.iter().zip(&l.ys))
            .filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for (&x, &y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x0 < x1) {
            (x0, x1) = (x0 - 1.0, x0 + 1.0);
        }
        if !(y0 < y1) {
            (y0, y1) = (y0 - 1.0, y0 + 1.0);
        }
        let pad = 0.05 * (y1 - y0);
        (x0, x1, y0 - pad, y1 + pad)
    }

    fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{l:.1} {t:.1} L{l:.1} {b:.1} L{r:.1} {b:.1}" stroke="black" fill="none"/>"#
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                px(fx),
                b + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                l - 6.0,
                py(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (k, line) in self.lines.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<String> = line
                .xs
                .iter()
                .zip(&line.ys)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let dash = if line.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"{dash}/>"#,
                pts.join(" ")
            );
            if line.markers {
                for p in &pts {
                    let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                    let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
                }
            }
            let ly = t + 14.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                r - 150.0,
                ly,
                r - 130.0,
                ly,
                r - 125.0,
                ly + 4.0,
                escape(&line.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn chart_for(series: &Series) -> (String, Chart) {
    match series {
        Series::Moments {
            n,
            p,
            tau,
            exact,
            lower,
            upper,
        } => (
            format!("moments_p{p}"),
            Chart {
                title: format!("ln E (tr G)^{p}, n = {n}"),
                x_label: "tau".into(),
                y_label: format!("ln E (tr G)^{p}"),
                lines: vec![
                    Line {
                        label: "exact".into(),
                        xs: tau.clone(),
                        ys: exact.clone(),
                        dashed: false,
                        markers: false,
                    },
                    Line {
                        label: "lower bound".into(),
                        xs: tau.clone(),
                        ys: lower.clone(),
                        dashed: true,
                        markers: false,
                    },
                    Line {
                        label: "upper bound".into(),
                        xs: tau.clone(),
                        ys: upper.clone(),
                        dashed: true,
                        markers: false,
                    },
                ],
            },
        ),
        Series::Nontight {
            n,
            tau_star,
            mean,
            stderr: _,
        } => {
            let lo = tau_star.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = tau_star.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if lo < hi {
                (lo, hi)
            } else {
                (lo - 1.0, lo + 1.0)
            };
            (
                "nontight".into(),
                Chart {
                    title: format!("truncated mean vs tau*, n = {n}"),
                    x_label: "tau*".into(),
                    y_label: "E R I(R <= R*)".into(),
                    lines: vec![
                        Line {
                            label: "estimate".into(),
                            xs: tau_star.clone(),
                            ys: mean.clone(),
                            dashed: false,
                            markers: true,
                        },
                        Line {
                            label: "1/2".into(),
                            xs: vec![lo, hi],
                            ys: vec![0.5, 0.5],
                            dashed: true,
                            markers: false,
                        },
                    ],
                },
            )
        }
        Series::Histogram {
            n,
            tau,
            edges,
            density,
            reference_mean,
            reference_var,
        } => {
            let mut xs = Vec::with_capacity(2 * density.len());
            let mut ys = Vec::with_capacity(2 * density.len());
            for (k, &d) in density.iter().enumerate() {
                xs.extend([edges[k], edges[k + 1]]);
                ys.extend([d, d]);
            }
            let (a, b) = (edges[0], edges[edges.len() - 1]);
            let grid: Vec<f64> = (0..=200).map(|k| a + (b - a) * k as f64 / 200.0).collect();
            let sd = reference_var.sqrt();
            let gauss: Vec<f64> = grid
                .iter()
                .map(|x| {
                    let z = (x - reference_mean) / sd;
                    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
                })
                .collect();
            (
                format!("lognormal_tau{tau}"),
                Chart {
                    title: format!("ln |F|^2 at tau = {tau}, n = {n}"),
                    x_label: "ln |F|^2".into(),
                    y_label: "density".into(),
                    lines: vec![
                        Line {
                            label: "empirical".into(),
                            xs,
                            ys,
                            dashed: false,
                            markers: false,
                        },
                        Line {
                            label: "reference".into(),
                            xs: grid,
                            ys: gauss,
                            dashed: true,
                            markers: false,
                        },
                    ],
                },
            )
        }
    }
}

/// Writes one SVG per series into `dir`, named `<command>_<chart>.svg`.
/// A report without series produces no files and a warning on stderr.
pub fn emit_plots(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if report.series.is_empty() {
        eprintln!("warning: report has no series, no plots written");
        return Ok(Vec::new());
    }
    let mut files = Vec::with_capacity(report.series.len());
    for series in &report.series {
        let (stem, chart) = chart_for(series);
        let path = dir.join(format!("{}_{stem}.svg", report.provenance.command));
        write_atomic(&path, &chart.render())?;
        files.push(path);
    }
    Ok(files)
}

/// SVG text for every series, in order.
pub fn render_all(report: &Report) -> Vec<String> {
    report
        .series
        .iter()
        .map(|s| chart_for(s).1.render())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_chart_renders() {
        let s = Series::Nontight {
            n: 3,
            tau_star: vec![20.0],
            mean: vec![0.4],
            stderr: vec![0.02],
        };
        let (_, chart) = chart_for(&s);
        let svg = chart.render();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("<circle"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = Series::Moments {
            n: 3,
            p: 2,
            tau: vec![0.0, 0.5, 1.0],
            exact: vec![2.2, 3.3, 4.5],
            lower: vec![1.1, 2.3, 3.9],
            upper: vec![2.2, 3.4, 5.0],
        };
        assert_eq!(chart_for(&s).1.render(), chart_for(&s).1.render());
    }
}
