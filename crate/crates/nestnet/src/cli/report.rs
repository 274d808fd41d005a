use std::fmt::Write as _;

use super::CliError;

pub const CSV_HEADER: &str = "experiment,n,s,d,K,delta,params,bound,sup_err,l1_err,l2_err,seed,wall_ms";

/// One line of a results table. Missing values are written as empty fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub n: Option<u32>,
    pub s: Option<u32>,
    pub d: Option<usize>,
    pub k: Option<u64>,
    /// Written verbatim, `p/q` for exact values.
    pub delta: Option<String>,
    pub params: Option<usize>,
    pub bound: Option<f64>,
    pub sup_err: Option<f64>,
    pub l1_err: Option<f64>,
    pub l2_err: Option<f64>,
    pub seed: Option<u64>,
    pub wall_ms: Option<u128>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl ResultRow {
    pub fn validate(&self) -> Result<(), CliError> {
        for v in [self.bound, self.sup_err, self.l1_err, self.l2_err].into_iter().flatten() {
            if v.is_nan() || v < 0.0 {
                return Err(CliError::Csv(format!("negative or NaN value {v} in row {}", self.experiment)));
            }
        }
        if self.experiment.contains([',', '\n']) {
            return Err(CliError::Csv("experiment id may not contain commas or newlines".into()));
        }
        Ok(())
    }

    pub fn to_csv_line(&self) -> String {
        [
            self.experiment.clone(),
            opt(&self.n),
            opt(&self.s),
            opt(&self.d),
            opt(&self.k),
            opt(&self.delta),
            opt(&self.params),
            opt(&self.bound),
            opt(&self.sup_err),
            opt(&self.l1_err),
            opt(&self.l2_err),
            opt(&self.seed),
            opt(&self.wall_ms),
        ]
        .join(",")
    }

    pub fn from_csv_line(line: &str) -> Result<Self, CliError> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 13 {
            return Err(CliError::Csv(format!("expected 13 fields, found {}", f.len())));
        }
        fn p<T: std::str::FromStr>(s: &str) -> Result<Option<T>, CliError> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| CliError::Csv(format!("bad field {s:?}")))
        }
        Ok(ResultRow {
            experiment: f[0].to_string(),
            n: p(f[1])?,
            s: p(f[2])?,
            d: p(f[3])?,
            k: p(f[4])?,
            delta: (!f[5].is_empty()).then(|| f[5].to_string()),
            params: p(f[6])?,
            bound: p(f[7])?,
            sup_err: p(f[8])?,
            l1_err: p(f[9])?,
            l2_err: p(f[10])?,
            seed: p(f[11])?,
            wall_ms: p(f[12])?,
        })
    }
}

pub fn write_csv(rows: &[ResultRow]) -> Result<String, CliError> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        r.validate()?;
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    Ok(out)
}

pub fn read_csv(text: &str) -> Result<Vec<ResultRow>, CliError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(CSV_HEADER) {
        return Err(CliError::Csv("missing or unexpected header".into()));
    }
    lines.filter(|l| !l.trim().is_empty()).map(ResultRow::from_csv_line).collect()
}

/// Log-log plot of sup error and bound against parameter count, built from CSV text alone.
pub fn svg_from_csv(text: &str) -> Result<String, CliError> {
    let rows = read_csv(text)?;
    let series = |pick: fn(&ResultRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter_map(|r| Some((r.params? as f64, pick(r)?)))
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .map(|(x, y)| (x.log10(), y.log10()))
            .collect()
    };
    let err = series(|r| r.sup_err);
    let bound = series(|r| r.bound);
    let all: Vec<&(f64, f64)> = err.iter().chain(&bound).collect();
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if all.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="14">no positive data</text>"#, pad, h / 2.0);
        svg.push_str("</svg>\n");
        return Ok(svg);
    }
    let fold = |f: fn(&(f64, f64)) -> f64| {
        all.iter().map(|p| f(p)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (x0, x1) = fold(|p| p.0);
    let (y0, y1) = fold(|p| p.1);
    let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">log10 params</text>"#, w / 2.0 - 30.0, h - 15.0);
    let _ = writeln!(svg, r#"<text x="10" y="{}" font-size="12">log10 error</text>"#, pad - 15.0);
    for (pts, color, label) in [(&err, "steelblue", "sup error"), (&bound, "firebrick", "bound")] {
        if pts.is_empty() {
            continue;
        }
        let mut sorted = pts.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = sorted.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, path.join(" "));
        for (x, y) in &sorted {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(*x), py(*y));
        }
        let (lx, ly) = sorted[0];
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{label}</text>"#,
            px(lx) + 5.0,
            py(ly) - 6.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: u32, params: usize, sup: f64) -> ResultRow {
        ResultRow {
            experiment: "scale".into(),
            n: Some(n),
            s: Some(1),
            d: Some(1),
            k: Some(4),
            delta: Some("1/64".into()),
            params: Some(params),
            bound: Some(0.5),
            sup_err: Some(sup),
            ..Default::default()
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(2, 100, 0.1), row(3, 300, 0.01)];
        let text = write_csv(&rows).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(read_csv(&text).unwrap(), rows);
        assert!(write_csv(&[ResultRow { bound: Some(-1.0), ..row(2, 1, 0.0) }]).is_err());
        assert!(read_csv("a,b\n").is_err());
    }

    #[test]
    fn svg_depends_only_on_csv() {
        let text = write_csv(&[row(2, 100, 0.1), row(3, 300, 0.01)]).unwrap();
        let a = svg_from_csv(&text).unwrap();
        assert_eq!(a, svg_from_csv(&text).unwrap());
        assert!(a.starts_with("<svg") && a.contains("polyline"));
        let empty = svg_from_csv(&write_csv(&[]).unwrap()).unwrap();
        assert!(empty.contains("no positive data"));
    }
}
