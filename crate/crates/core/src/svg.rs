//! Minimal standalone SVG line charts with deterministic bytes.

/// One named series of (x, y) points.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Renders a line chart: axes, tick labels, one polyline (with point
/// markers) per series, and a small legend. Output bytes depend only on the
/// input.
pub fn line_chart(title: &str, series: &[Series]) -> Result<String, String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err("cannot plot an empty series".into());
    }
    let (width, height) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (width - ml - mr, height - mt - mb);

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if xmin == xmax {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if ymin == ymax {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin) * pw;
    let sy = |y: f64| mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph;

    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        escape(title)
    ));
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw,
        mt + ph
    ));
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    // Ticks: 5 per axis.
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let px = sx(fx);
        out.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            mt + ph,
            mt + ph + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            mt + ph + 18.0,
            tick(fx)
        ));
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let py = sy(fy);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{ml}\" y2=\"{py}\" stroke=\"black\"/>\n",
            ml - 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            ml - 8.0,
            py + 4.0,
            tick(fy)
        ));
    }
    for (si, s) in series.iter().enumerate() {
        let color = colors[si % colors.len()];
        if s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y)))
                .collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
        }
        for &(x, y) in &s.points {
            out.push_str(&format!(
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
             fill=\"{color}\">{}</text>\n",
            ml + pw - 150.0,
            mt + 16.0 * (si as f64 + 1.0),
            escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 0.01 && v.abs() < 10000.0 {
        format!("{v:.4}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_is_an_error() {
        assert!(line_chart("t", &[]).is_err());
        assert!(line_chart(
            "t",
            &[Series {
                label: "a".into(),
                points: vec![]
            }]
        )
        .is_err());
    }

    #[test]
    fn single_point_renders_marker() {
        let svg = line_chart(
            "single",
            &[Series {
                label: "pt".into(),
                points: vec![(1.0, 2.0)],
            }],
        )
        .unwrap();
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("<polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn deterministic_bytes() {
        let mk = || {
            line_chart(
                "lambda vs n",
                &[Series {
                    label: "lambda1".into(),
                    points: vec![(2.0, 0.1), (4.0, 0.2), (8.0, 0.25)],
                }],
            )
            .unwrap()
        };
        assert_eq!(mk(), mk());
    }
}
