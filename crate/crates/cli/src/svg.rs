//! Minimal static SVG figures.

use std::fmt::Write as _;

use perispec::interval::IntervalUnion;
use perispec::report::fmt_num;
use perispec::symbol::DispersionCurves;
use perispec::C64;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 110.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Affine map from data range [lo, hi] to pixels [a, b].
struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        };
        let pad = 0.05 * (hi - lo);
        Scale {
            lo: lo - pad,
            hi: hi + pad,
            a,
            b,
        }
    }

    fn at(&self, x: f64) -> f64 {
        self.a + (x - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn open(out: &mut String, height: f64) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
}

fn x_axis(out: &mut String, s: &Scale, y: f64) {
    writeln!(
        out,
        r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
        s.a, s.b
    )
    .unwrap();
    for k in 0..=4 {
        let v = s.lo + (s.hi - s.lo) * k as f64 / 4.0;
        let x = s.at(v);
        writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y + 5.0,
            y + 18.0,
            fmt_num((v * 1e4).round() / 1e4)
        )
        .unwrap();
    }
}

/// One horizontal row of intervals per labelled union; `window` fixes the
/// axis range and is drawn dashed.
pub fn intervals(rows: &[(&str, &IntervalUnion)], window: Option<(f64, f64)>) -> String {
    let (lo, hi) = window.unwrap_or_else(|| {
        rows.iter()
            .filter_map(|(_, u)| Some((u.min()?, u.max()?)))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| {
                (a.min(c), b.max(d))
            })
    });
    let (lo, hi) = if lo.is_finite() {
        (lo, hi)
    } else {
        (-1.0, 1.0)
    };
    let s = Scale::new(lo, hi, MARGIN, WIDTH - 20.0);
    let height = 40.0 + 30.0 * rows.len() as f64 + 30.0;
    let mut out = String::new();
    open(&mut out, height);
    if let Some((a, b)) = window {
        for v in [a, b] {
            writeln!(
                out,
                r##"<line x1="{x:.2}" y1="20" x2="{x:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                height - 30.0,
                x = s.at(v)
            )
            .unwrap();
        }
    }
    for (i, (label, u)) in rows.iter().enumerate() {
        let y = 40.0 + 30.0 * i as f64;
        writeln!(out, r#"<text x="10" y="{:.2}">{label}</text>"#, y + 4.0).unwrap();
        for p in u.parts() {
            let (x0, x1) = (s.at(p.lo), s.at(p.hi));
            writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="12" fill="{}"/>"#,
                y - 6.0,
                (x1 - x0).max(1.0),
                PALETTE[i % PALETTE.len()]
            )
            .unwrap();
        }
    }
    x_axis(&mut out, &s, height - 30.0);
    out.push_str("</svg>\n");
    out
}

fn scatter(out: &mut String, xs: &Scale, ys: &Scale, pts: impl Iterator<Item = (f64, f64, usize)>) {
    for (x, y, branch) in pts {
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{}"/>"#,
            xs.at(x),
            ys.at(y),
            PALETTE[branch % PALETTE.len()]
        )
        .unwrap();
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    })
}

/// Self-adjoint curves: eigenvalue against the first angle. Otherwise the
/// eigenvalues in the complex plane.
pub fn curves(c: &DispersionCurves) -> String {
    let height = 500.0;
    let mut out = String::new();
    open(&mut out, height);
    let pts: Vec<(f64, C64, usize)> = c
        .points()
        .flat_map(|(angles, values)| {
            let phi = angles[0];
            values
                .iter()
                .enumerate()
                .map(move |(j, z)| (phi, *z, j))
                .collect::<Vec<_>>()
        })
        .collect();
    let xs;
    let ys;
    if c.is_hermitian() {
        xs = Scale::new(0.0, 2.0 * std::f64::consts::PI, MARGIN, WIDTH - 20.0);
        let (lo, hi) = bounds(pts.iter().map(|p| p.1.re));
        ys = Scale::new(lo, hi, height - 40.0, 20.0);
        scatter(
            &mut out,
            &xs,
            &ys,
            pts.iter().map(|&(phi, z, j)| (phi, z.re, j)),
        );
        writeln!(out, r#"<text x="10" y="20">eigenvalue vs phi1</text>"#).unwrap();
    } else {
        let (xlo, xhi) = bounds(pts.iter().map(|p| p.1.re));
        let (ylo, yhi) = bounds(pts.iter().map(|p| p.1.im));
        xs = Scale::new(xlo, xhi, MARGIN, WIDTH - 20.0);
        ys = Scale::new(ylo, yhi, height - 40.0, 20.0);
        scatter(
            &mut out,
            &xs,
            &ys,
            pts.iter().map(|&(_, z, j)| (z.re, z.im, j)),
        );
        writeln!(
            out,
            r#"<text x="10" y="20">eigenvalues in the complex plane</text>"#
        )
        .unwrap();
    }
    x_axis(&mut out, &xs, height - 40.0);
    out.push_str("</svg>\n");
    out
}

/// Eigenvalues in the complex plane.
pub fn points(values: &[C64]) -> String {
    let height = 400.0;
    let mut out = String::new();
    open(&mut out, height);
    let (xlo, xhi) = bounds(values.iter().map(|z| z.re));
    let (ylo, yhi) = bounds(values.iter().map(|z| z.im));
    let xs = Scale::new(xlo.min(xhi), xhi.max(xlo), MARGIN, WIDTH - 20.0);
    let ys = Scale::new(ylo.min(yhi), yhi.max(ylo), height - 40.0, 20.0);
    if !values.is_empty() {
        scatter(&mut out, &xs, &ys, values.iter().map(|z| (z.re, z.im, 0)));
        x_axis(&mut out, &xs, height - 40.0);
    }
    out.push_str("</svg>\n");
    out
}
