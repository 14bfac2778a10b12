//! CSV emission for sweep rows: RFC 4180 quoting, LF line endings, floats
//! at six significant digits.

use std::io::Write;
use std::path::Path;

use crate::bench::sweep::SweepRow;
use crate::error::Result;

pub(crate) const CSV_HEADER: &str =
    "kernel,L,median_latency_ms,throughput_tok_per_s,ttft_ms,tpot_ms,bytes_state";

fn quote_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

/// Formats with `sig` significant digits, plain decimal notation.
pub(crate) fn format_sig(value: f64, sig: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - magnitude).max(0) as usize;
    let mut s = format!("{value:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Writes the fixed header plus one line per row.
pub fn emit_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    write_csv(rows, &mut out)?;
    std::fs::write(path, out)?;
    Ok(())
}

/// Same output as [`emit_csv`], into any writer.
pub fn write_csv(rows: &[SweepRow], out: &mut impl Write) -> Result<()> {
    out.write_all(CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for r in rows {
        let line = [
            quote_field(&r.kernel),
            r.seq_len.to_string(),
            format_sig(r.median_latency_ms, 6),
            format_sig(r.throughput_tok_per_s, 6),
            format_sig(r.ttft_ms, 6),
            format_sig(r.tpot_ms, 6),
            r.bytes_state.to_string(),
        ]
        .join(",");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
