//! Minimal SVG plots: line charts (linear or log axes) and field slices.

use std::fmt::Write;

use crate::flowfield::FieldGrid;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Default)]
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

#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl LinePlot {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn map(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { p.0.log10() } else { p.0 };
        let y = if self.log_y { p.1.log10() } else { p.1 };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    pub fn render(&self) -> String {
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| s.points.iter().filter_map(|p| self.map(*p)).collect())
            .collect();
        let all = pts.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for (x, y) in all {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 <= 0.0 {
            let pad = if y0 == 0.0 { 0.5 } else { 0.05 * y0.abs() };
            y0 -= pad;
            y1 += pad;
        }
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 1.5 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 1.5 * MARGIN);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{MARGIN}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            MARGIN / 2.0,
            WIDTH - 1.5 * MARGIN,
            HEIGHT - 1.5 * MARGIN
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let lx = if self.log_x {
                format!("1e{fx:.1}")
            } else {
                format!("{fx:.3}")
            };
            let ly = if self.log_y {
                format!("1e{fy:.1}")
            } else {
                format!("{fy:.3e}")
            };
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{lx}</text>"#,
                sx(fx),
                HEIGHT - MARGIN + 16.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ly}</text>"#,
                MARGIN - 4.0,
                sy(fy) + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (i, (s, p)) in self.series.iter().zip(&pts).enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = p
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
            if path.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            } else if let Some((x, y)) = p.first() {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(*x),
                    sy(*y)
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
                MARGIN + 8.0,
                MARGIN / 2.0 + 16.0 + 14.0 * i as f64,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn heat_color(t: f64) -> String {
    // blue → yellow → red
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (s, s, 1.0 - s)
    } else {
        let s = (t - 0.5) / 0.5;
        (1.0, 1.0 - s, 0.0)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        (r * 255.0) as u8,
        (g * 255.0) as u8,
        (b * 255.0) as u8
    )
}

/// Heat map of `|u|` on the plane `k = slice` with in-plane arrows.
pub fn field_slice(grid: &FieldGrid, slice: usize, title: &str) -> Result<String> {
    let speed = grid.slice_speed(slice)?;
    let [nx, ny, _] = grid.dims;
    if nx == 0 || ny == 0 {
        return Err(Error::DegenerateInput("empty grid".into()));
    }
    let vmax = speed
        .iter()
        .flatten()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    let cell = ((WIDTH - 2.0 * MARGIN) / nx as f64).min((HEIGHT - 2.0 * MARGIN) / ny as f64);
    let spec = grid.spec();
    let mut out = String::new();
    let w = 2.0 * MARGIN + cell * nx as f64;
    let h = 2.0 * MARGIN + cell * ny as f64;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{} (max |u| = {vmax:.3e})</text>"#,
        w / 2.0,
        escape(title)
    );
    for (j, row) in speed.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let x = MARGIN + cell * i as f64;
            let y = h - MARGIN - cell * (j + 1) as f64;
            let fill = match v {
                Some(s) if vmax > 0.0 => heat_color(s / vmax),
                Some(_) => heat_color(0.0),
                None => "#808080".into(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                cell + 0.3,
                cell + 0.3
            );
        }
    }
    let stride = (nx.max(ny) / 16).max(1);
    for j in (0..ny).step_by(stride) {
        for i in (0..nx).step_by(stride) {
            let idx = spec.index(i, j, slice);
            if grid.mask[idx] || vmax == 0.0 {
                continue;
            }
            let u = grid.velocity[idx];
            let len = (u.x * u.x + u.y * u.y).sqrt();
            if len == 0.0 {
                continue;
            }
            let scale = 0.9 * cell * stride as f64 / vmax;
            let cx = MARGIN + cell * (i as f64 + 0.5);
            let cy = h - MARGIN - cell * (j as f64 + 0.5);
            let _ = writeln!(
                out,
                r#"<line x1="{cx:.2}" y1="{cy:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
                cx + u.x * scale,
                cy - u.y * scale
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
