//! Minimal deterministic SVG output: embedding scatters and sweep line plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::embed::Embedding;
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 48.0;
const LEGEND_W: f64 = 150.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        (W - LEGEND_W) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        W - LEGEND_W - MARGIN * 1.5,
        H - MARGIN * 2.0
    );
}

fn legend_entry(out: &mut String, i: usize, label: &str) {
    let x = W - LEGEND_W + 8.0;
    let y = MARGIN + 18.0 * i as f64;
    let _ = writeln!(
        out,
        "<g class=\"legend\"><rect x=\"{x}\" y=\"{y}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text></g>",
        color(i),
        x + 16.0,
        y + 9.0,
        escape(label)
    );
}

/// Scatter of the first two embedding columns, colored by label.
pub fn scatter_2d(embedding: &Embedding, labels: Option<&[i64]>) -> Result<String> {
    if embedding.is_empty() {
        return Err(Error::Validation("cannot plot an empty embedding".into()));
    }
    if embedding.dims() < 2 {
        return Err(Error::Validation("scatter needs at least 2 embedding columns".into()));
    }
    if let Some(l) = labels {
        if l.len() != embedding.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                l.len(),
                embedding.len()
            )));
        }
    }
    let c = &embedding.coords;
    let sx = Scale::new(c.column(0).iter().copied(), MARGIN + 6.0, W - LEGEND_W - MARGIN * 0.5 - 6.0);
    let sy = Scale::new(c.column(1).iter().copied(), H - MARGIN - 6.0, MARGIN + 6.0);

    let classes: BTreeMap<i64, usize> = labels
        .map(|l| {
            let mut m: BTreeMap<i64, usize> = l.iter().map(|v| (*v, 0)).collect();
            for (i, v) in m.values_mut().enumerate() {
                *v = i;
            }
            m
        })
        .unwrap_or_default();

    let mut out = String::new();
    header(&mut out, "diffusion map");
    for (i, row) in c.outer_iter().enumerate() {
        let fill = labels.map_or(color(0), |l| color(classes[&l[i]]));
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{fill}\" fill-opacity=\"0.8\"/>",
            sx.map(row[0]),
            sy.map(row[1])
        );
    }
    for (label, i) in &classes {
        legend_entry(&mut out, *i, &label.to_string());
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One polyline per series; points are `(x, y)` pairs.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let sx = Scale::new(xs, MARGIN + 6.0, W - LEGEND_W - MARGIN * 0.5 - 6.0);
    let sy = Scale::new(ys, H - MARGIN - 6.0, MARGIN + 6.0);
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        (W - LEGEND_W) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (tick, v) in [(sy.lo, H - MARGIN - 6.0), (sy.hi, MARGIN + 6.0)] {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{tick:.3}</text>",
            MARGIN - 4.0,
            v + 3.0
        );
    }
    for (tick, v) in [(sx.lo, MARGIN + 6.0), (sx.hi, W - LEGEND_W - MARGIN * 0.5 - 6.0)] {
        let _ = writeln!(
            out,
            "<text x=\"{v:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{tick}</text>",
            H - MARGIN + 14.0
        );
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx.map(*x), sy.map(*y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            color(i),
            coords.join(" ")
        );
        legend_entry(&mut out, i, name);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn emb(coords: ndarray::Array2<f64>) -> Embedding {
        let n = coords.nrows();
        Embedding {
            eigenvalues_used: vec![(1.0, 0.0); coords.ncols()],
            coords,
            trivial_dropped: true,
            complex_pairs: 0,
            svd_fallback: false,
            row_ids: (0..n as u64).collect(),
        }
    }

    #[test]
    fn three_points_three_circles() {
        let svg = scatter_2d(&emb(array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]), None).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("class=\"legend\"").count(), 0);
    }

    #[test]
    fn one_legend_entry_per_label() {
        let e = emb(array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]]);
        let svg = scatter_2d(&e, Some(&[4, 1, 4, 9])).unwrap();
        assert_eq!(svg.matches("class=\"legend\"").count(), 3);
    }

    #[test]
    fn empty_is_rejected() {
        let e = emb(ndarray::Array2::zeros((0, 2)));
        assert!(matches!(scatter_2d(&e, None), Err(Error::Validation(_))));
    }

    #[test]
    fn polyline_per_series() {
        let s = vec![
            ("a".to_string(), vec![(0.0, 1.0), (1.0, 2.0)]),
            ("b".to_string(), vec![(0.0, 0.5), (1.0, 0.7)]),
        ];
        let svg = line_plot("t", "x", "y", &s);
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
