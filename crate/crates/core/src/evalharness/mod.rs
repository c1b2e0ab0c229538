//! Synthetic fields with known truth, interval metrics and method comparison.

mod compare;
mod metrics;
mod synthetic;

pub use compare::{compare_methods, default_neighborhood, method_intervals, Method, MethodConfig};
pub use metrics::{coverage, infinite_width_count, mean_width, EvalReport};
pub use synthetic::{
    generate, generate_tiles, true_field, write_tiles, FieldKind, SyntheticSpec, TileRow, DOMAIN_HALF_WIDTH,
    SYNTHETIC_ORIGIN,
};

/// Formats `x` with six significant digits, without exponent for
/// magnitudes in `[1e-4, 1e15)`.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&exp) {
        return trim_exp(format!("{x:.5e}"));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(format!("{x:.decimals$}"))
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.to_string() }
    } else {
        s
    }
}

fn trim_exp(s: String) -> String {
    match s.split_once('e') {
        Some((m, e)) => format!("{}e{e}", trim_zeros(m.to_string())),
        None => s,
    }
}

/// Aligned text table: one row per metric, one column per method.
pub fn format_table_text(reports: &[EvalReport], alpha: f64) -> String {
    let mut rows: Vec<Vec<String>> = vec![
        std::iter::once(format!("alpha={}", format_sig(alpha)))
            .chain(reports.iter().map(|r| r.method.clone()))
            .collect(),
    ];
    let metric = |name: &str, f: &dyn Fn(&EvalReport) -> String| -> Vec<String> {
        std::iter::once(name.to_string()).chain(reports.iter().map(f)).collect()
    };
    rows.push(metric("Coverage", &|r| format_sig(r.coverage)));
    rows.push(metric("Width", &|r| format_sig(r.mean_width)));
    rows.push(metric("Median width", &|r| format_sig(r.median_width)));
    rows.push(metric("Infinite", &|r| r.infinite_width_count.to_string()));
    rows.push(metric("n_test", &|r| r.n_test.to_string()));

    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| if c == 0 { format!("{cell:<w$}", w = widths[c]) } else { format!("{cell:>w$}", w = widths[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub const CSV_HEADER: &str = "method,coverage,mean_width,median_width,n_test,infinite_count";

/// CSV table, one row per method.
pub fn format_table_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            format_sig(r.coverage),
            format_sig(r.mean_width),
            format_sig(r.median_width),
            r.n_test,
            r.infinite_width_count
        ));
    }
    out
}
