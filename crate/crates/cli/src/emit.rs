//! CSV and SVG artifacts.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use ssf_core::C64;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Field {
    Real(f64),
    Int(i64),
    Flag(bool),
    Complex(C64),
}

/// Column header; complex columns expand to `name_re,name_im`.
#[derive(Clone, Debug)]
pub struct Column {
    pub name: Cow<'static, str>,
    pub complex: bool,
}

impl Column {
    pub const fn real(name: &'static str) -> Self {
        Column { name: Cow::Borrowed(name), complex: false }
    }

    pub const fn complex(name: &'static str) -> Self {
        Column { name: Cow::Borrowed(name), complex: true }
    }

    pub fn complex_owned(name: String) -> Self {
        Column { name: Cow::Owned(name), complex: true }
    }
}

/// 17 significant digits: enough to recover every f64 exactly.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(columns: &[Column]) -> Vec<String> {
    let mut h = Vec::new();
    for c in columns {
        if c.complex {
            h.push(format!("{}_re", c.name));
            h.push(format!("{}_im", c.name));
        } else {
            h.push(c.name.to_string());
        }
    }
    h
}

fn record(row: &[Field]) -> Vec<String> {
    let mut out = Vec::with_capacity(row.len());
    for f in row {
        match *f {
            Field::Real(x) => out.push(fmt_real(x)),
            Field::Int(i) => out.push(i.to_string()),
            Field::Flag(b) => out.push(b.to_string()),
            Field::Complex(z) => {
                out.push(fmt_real(z.re));
                out.push(fmt_real(z.im));
            }
        }
    }
    out
}

pub fn csv_string(columns: &[Column], rows: &[Vec<Field>]) -> CliResult<String> {
    let width = header(columns).len();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fmt_err = |e: csv::Error| CliError::Format(e.to_string());
    w.write_record(header(columns)).map_err(fmt_err)?;
    for row in rows {
        let rec = record(row);
        if rec.len() != width {
            return Err(CliError::Format(format!("row has {} fields, header has {width}", rec.len())));
        }
        w.write_record(rec).map_err(fmt_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Format(e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn emit_csv(columns: &[Column], rows: &[Vec<Field>], path: &Path) -> CliResult<()> {
    write_text(path, &csv_string(columns, rows)?)
}

/// Header and rows of a CSV document, all fields as strings.
pub fn parse_csv(text: &str) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let head = r.headers().map_err(|e| CliError::Format(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| CliError::Format(e.to_string()))?.iter().map(String::from).collect());
    }
    Ok((head, rows))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn numeric_column(rows: &[Vec<String>], idx: usize, name: &str) -> CliResult<Vec<f64>> {
    rows.iter()
        .map(|r| r[idx].parse::<f64>().map_err(|_| CliError::Format(format!("column `{name}` is not numeric: {:?}", r[idx]))))
        .collect()
}

/// Polyline plot of `y_cols` against `x_col`.
pub fn svg_string(csv_text: &str, x_col: &str, y_cols: &[&str]) -> CliResult<String> {
    let (head, rows) = parse_csv(csv_text)?;
    let find = |n: &str| head.iter().position(|h| h == n).ok_or_else(|| CliError::Format(format!("no column `{n}`")));
    let xs = numeric_column(&rows, find(x_col)?, x_col)?;
    let mut series = Vec::new();
    for &c in y_cols {
        series.push((c, numeric_column(&rows, find(c)?, c)?));
    }
    let finite = |v: &&f64| v.is_finite();
    let span = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-300 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&mut xs.iter().filter(finite).copied());
    let (y0, y1) = span(&mut series.iter().flat_map(|(_, v)| v.iter().filter(finite).copied()));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{l}" y="{}" font-size="11" text-anchor="middle">{x0:.4}</text>"#, b + 15.0);
    let _ = writeln!(s, r#"<text x="{r}" y="{}" font-size="11" text-anchor="middle">{x1:.4}</text>"#, b + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{x_col}</text>"#, 0.5 * (l + r), b + 30.0);
    let _ = writeln!(s, r#"<text x="{}" y="{b}" font-size="11" text-anchor="end">{y0:.4}</text>"#, l - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{y1:.4}</text>"#, l - 4.0, t + 4.0);
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.3},{:.3}", px(x), py(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        }
        let ly = t + 14.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, r - 90.0, r - 70.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11">{name}</text>"#, r - 65.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg(csv_text: &str, x_col: &str, y_cols: &[&str], path: &Path) -> CliResult<()> {
    write_text(path, &svg_string(csv_text, x_col, y_cols)?)
}

/// Plots every numeric column against the first one.
pub fn svg_all_numeric(csv_text: &str) -> CliResult<String> {
    let (head, rows) = parse_csv(csv_text)?;
    if head.is_empty() {
        return Err(CliError::Format("empty CSV header".into()));
    }
    let ys: Vec<&str> = head[1..]
        .iter()
        .enumerate()
        .filter(|(i, _)| rows.iter().all(|r| r[i + 1].parse::<f64>().is_ok()))
        .map(|(_, h)| h.as_str())
        .collect();
    svg_string(csv_text, &head[0], &ys)
}
