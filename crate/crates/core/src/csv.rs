//! Minimal CSV rendering shared by every report.
//!
//! Reals are written with 15 significant digits, '.' as the decimal point
//! and no grouping; undefined values are written as an empty field.

pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Formats a real with 15 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(s)
    } else {
        let s = format!("{x:.14e}");
        match s.split_once('e') {
            Some((m, e)) => format!("{}e{}", trim_zeros(m.to_string()), e),
            None => s,
        }
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

/// Renders rows under a header line, preceded by `# key=value` comment lines.
pub fn render<R: CsvRow>(comments: &[(String, String)], rows: &[R]) -> String {
    let mut out = String::new();
    for (k, v) in comments {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&R::HEADER.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.fields().join(","));
        out.push('\n');
    }
    out
}
