use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

/// Equal-width bins over `[0, 1]`. The last bin is closed on the right and
/// out-of-range values are clamped into the end bins.
pub fn histogram_bins(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("NaN in histogram input".into()));
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (v.clamp(0.0, 1.0) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            start: i as f64 / bins as f64,
            end: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect())
}

pub fn write_histogram<W: Write>(bins: &[HistogramBin], mut out: W) -> std::io::Result<()> {
    writeln!(out, "bin_start,bin_end,count")?;
    for b in bins {
        writeln!(out, "{},{},{}", b.start, b.end, b.count)?;
    }
    out.flush()
}

pub fn export_histogram(values: &[f64], bins: usize, path: impl AsRef<Path>) -> Result<Vec<HistogramBin>> {
    let path = path.as_ref();
    let hist = histogram_bins(values, bins)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_histogram(&hist, BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
    Ok(hist)
}
