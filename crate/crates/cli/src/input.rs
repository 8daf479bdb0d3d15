//! Text inputs of the command line: boxes, points, test functions, metric and
//! field files.
//!
//! Metric file:
//!
//! ```text
//! coords u v x y
//! chart -4:4, -50:50, -10:10, -10:10
//! compact -2:2, -2:2, -2:2, -2:2        ; optional, defaults to the chart
//! g 0 0 = (* (- (* x x) (* y y)) (kernel 0 1 0 u) ...)
//! g 0 1 = -0.5
//! ```
//!
//! Entries not given are zero; `g j i` defaults to `g i j`. A field file has
//! the same layout with `xi i = expr` lines, and `chart torus` selects the
//! flat torus.

use colombeau::expr::parse_with_names;
use colombeau::{ChartDomain, CompactBox, Error, Expr, Result};

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Reads `@path` as the file contents, anything else verbatim.
pub fn text_or_file(arg: &str) -> Result<String> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}"))),
        None => Ok(arg.to_string()),
    }
}

fn number(s: &str) -> Result<f64> {
    let s = s.trim();
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "pi" => Ok(std::f64::consts::PI),
        "2pi" => Ok(std::f64::consts::TAU),
        _ => s.parse().map_err(|_| bad(format!("invalid number '{s}'"))),
    }
}

pub fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(number).collect()
}

/// `a:b, c:d, …`.
pub fn bounds(s: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part.split_once(':').ok_or_else(|| bad(format!("expected a:b, got '{}'", part.trim())))?;
        lo.push(number(a)?);
        hi.push(number(b)?);
    }
    Ok((lo, hi))
}

pub fn compact(s: &str) -> Result<CompactBox> {
    let (lo, hi) = bounds(s)?;
    CompactBox::new(lo, hi)
}

/// `c,r[,tilt]`.
pub fn test_function(s: &str) -> Result<colombeau::association::TestFunction> {
    let v = numbers(s)?;
    match v.as_slice() {
        [c, r] => colombeau::association::TestFunction::bump(*c, *r, 0.0),
        [c, r, t] => colombeau::association::TestFunction::bump(*c, *r, *t),
        _ => Err(bad(format!("test function needs c,r[,tilt], got '{s}'"))),
    }
}

/// A chart with its coordinate names, a compact box for the checks and the
/// indexed expressions of a metric or field file.
#[derive(Debug, Clone)]
pub struct ChartFile {
    pub chart: ChartDomain,
    pub compact: CompactBox,
    pub entries: Vec<(Vec<usize>, Expr)>,
}

pub fn chart_file(text: &str, key: &str, arity: usize) -> Result<ChartFile> {
    let mut names: Option<Vec<String>> = None;
    let mut chart: Option<ChartDomain> = None;
    let mut compact_box: Option<CompactBox> = None;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |e: Error| match e {
            Error::Config(m) => bad(format!("line {}: {m}", lineno + 1)),
            Error::Parse { offset, message } => bad(format!("line {}, offset {offset}: {message}", lineno + 1)),
            other => other,
        };
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match head {
            "coords" => names = Some(rest.split_whitespace().map(str::to_string).collect()),
            "chart" if rest.trim() == "torus" => chart = Some(ChartDomain::torus()),
            "chart" => {
                let (lo, hi) = bounds(rest).map_err(at)?;
                chart = Some(ChartDomain::boxed(lo, hi).map_err(at)?);
            }
            "compact" => compact_box = Some(compact(rest).map_err(at)?),
            h if h == key => {
                let (idx, src) = rest.split_once('=').ok_or_else(|| at(bad(format!("expected '{key} i.. = expr'"))))?;
                let idx: Vec<usize> = idx
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| at(bad(format!("bad index '{s}'")))))
                    .collect::<Result<_>>()?;
                if idx.len() != arity {
                    return Err(at(bad(format!("'{key}' takes {arity} indices"))));
                }
                let nm = names.clone().unwrap_or_default();
                let refs: Vec<&str> = nm.iter().map(String::as_str).collect();
                entries.push((idx, parse_with_names(src.trim(), &refs).map_err(at)?));
            }
            other => return Err(at(bad(format!("unknown directive '{other}'")))),
        }
    }
    let mut chart = chart.ok_or_else(|| bad("missing 'chart' line"))?;
    if let Some(nm) = &names {
        let refs: Vec<&str> = nm.iter().map(String::as_str).collect();
        chart = chart.with_names(&refs)?;
    }
    let n = chart.dim();
    if entries.iter().any(|(idx, _)| idx.iter().any(|&i| i >= n)) {
        return Err(bad(format!("index out of range for a {n}-dimensional chart")));
    }
    let compact_box = match compact_box {
        Some(k) => k,
        None => default_compact(&chart)?,
    };
    Ok(ChartFile { chart, compact: compact_box, entries })
}

/// The chart itself when bounded, `[0, 2π]²` on the torus.
pub fn default_compact(chart: &ChartDomain) -> Result<CompactBox> {
    match chart.kind() {
        colombeau::domain::ChartKind::Torus => CompactBox::cube(2, 0.0, std::f64::consts::TAU),
        colombeau::domain::ChartKind::Box { lower, upper } => {
            if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                return Err(bad("unbounded chart needs a 'compact' line"));
            }
            // stay strictly inside the open chart
            let lo = lower.iter().zip(upper).map(|(a, b)| a + 0.01 * (b - a)).collect();
            let hi = lower.iter().zip(upper).map(|(a, b)| b - 0.01 * (b - a)).collect();
            CompactBox::new(lo, hi)
        }
    }
}

/// Row-major `n × n` metric components from `g i j` entries.
pub fn metric_components(f: &ChartFile) -> Result<Vec<Expr>> {
    let n = f.chart.dim();
    let mut g: Vec<Option<Expr>> = vec![None; n * n];
    for (idx, e) in &f.entries {
        let slot = &mut g[idx[0] * n + idx[1]];
        if slot.is_some() {
            return Err(bad(format!("g {} {} given twice", idx[0], idx[1])));
        }
        *slot = Some(e.clone());
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let e = g[i * n + j].clone().or_else(|| g[j * n + i].clone()).unwrap_or_else(Expr::zero);
            out.push(e);
        }
    }
    Ok(out)
}

pub fn field_components(f: &ChartFile) -> Result<Vec<Expr>> {
    let n = f.chart.dim();
    let mut xi = vec![Expr::zero(); n];
    for (idx, e) in &f.entries {
        xi[idx[0]] = e.clone();
    }
    Ok(xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bounds_and_points() {
        assert_eq!(bounds("-1:1, 0:2pi").unwrap(), (vec![-1.0, 0.0], vec![1.0, std::f64::consts::TAU]));
        assert_eq!(numbers("0, 0.3,-0.3").unwrap(), vec![0.0, 0.3, -0.3]);
        assert!(bounds("-1,1").is_err());
    }

    #[test]
    fn metric_file_fills_symmetric_entries() {
        let text = "coords t x\nchart -1:1, -1:1\ng 0 0 = -1\ng 0 1 = (* 0.5 x)\ng 1 1 = 1 ; comment\n";
        let f = chart_file(text, "g", 2).unwrap();
        let g = metric_components(&f).unwrap();
        assert_eq!(g[1], g[2]);
        assert_eq!(g[1].to_string(), Expr::var(1).scale(0.5).to_string());
        assert!((f.compact.upper[0] - 0.98).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_directives() {
        assert!(chart_file("chart -1:1\nfoo 1\n", "g", 2).is_err());
        assert!(chart_file("g 0 0 = 1\n", "g", 2).is_err());
    }
}
