//! Log-log slope extraction from sweep rows.

use crate::bench::sweep::SweepRow;
use crate::error::{Error, Result};

/// Least-squares fit of `log(latency)` against `log(length)` per kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub kernel: String,
    /// Fitted exponent alpha in `latency ~ c * L^alpha`.
    pub exponent: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
}

/// Groups rows by kernel and fits each group. Every kernel needs at least
/// three lengths.
pub fn slope_fit(rows: &[SweepRow]) -> Result<Vec<SlopeFit>> {
    let mut kernels: Vec<&str> = Vec::new();
    for r in rows {
        if !kernels.contains(&r.kernel.as_str()) {
            kernels.push(&r.kernel);
        }
    }
    let mut fits = Vec::with_capacity(kernels.len());
    for kernel in kernels {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.kernel == kernel)
            .map(|r| ((r.seq_len as f64).ln(), r.median_latency_ms.max(1e-9).ln()))
            .collect();
        if pts.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "kernel {kernel} has {} lengths, slope fit needs >= 3",
                pts.len()
            )));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let alpha = sxy / sxx;
        let intercept = my - alpha * mx;
        let sse: f64 = pts
            .iter()
            .map(|p| {
                let e = p.1 - (alpha * p.0 + intercept);
                e * e
            })
            .sum();
        fits.push(SlopeFit {
            kernel: kernel.to_string(),
            exponent: alpha,
            residual: (sse / n).sqrt(),
        });
    }
    Ok(fits)
}
