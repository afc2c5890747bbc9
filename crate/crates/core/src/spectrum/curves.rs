use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Scalar;

use super::SingularSpectrum;

/// One row of a singular-decay / cumulative-energy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub index: usize,
    pub sigma: f64,
    pub energy_fraction: f64,
    pub cumulative_energy: f64,
}

/// Curve rows for a spectrum; `index` starts at 1. A zero spectrum yields
/// zero fractions throughout.
pub fn curve_rows<T: Scalar>(spectrum: &SingularSpectrum<T>) -> Vec<CurveRow> {
    let total = spectrum.total_energy().to_f64_lossy();
    let mut running = 0.0;
    spectrum
        .values()
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let s = s.to_f64_lossy();
            let frac = if total > 0.0 { s * s / total } else { 0.0 };
            running += frac;
            CurveRow {
                index: j + 1,
                sigma: s,
                energy_fraction: frac,
                cumulative_energy: running.min(1.0),
            }
        })
        .collect()
}

/// CSV with header `spectrum,index,sigma,energy_fraction,cumulative_energy`;
/// `spectrum` is the label given for each curve.
pub fn write_spectrum_curves<T: Scalar, W: Write>(
    spectra: &[(String, SingularSpectrum<T>)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "spectrum,index,sigma,energy_fraction,cumulative_energy")?;
    for (label, spectrum) in spectra {
        for row in curve_rows(spectrum) {
            writeln!(
                out,
                "{},{},{},{},{}",
                label, row.index, row.sigma, row.energy_fraction, row.cumulative_energy
            )?;
        }
    }
    out.flush()
}

/// Writes curves for an unlabeled list; labels are list positions.
pub fn export_spectrum_curves<T: Scalar>(
    spectra: &[SingularSpectrum<T>],
    path: impl AsRef<Path>,
) -> Result<()> {
    if spectra.is_empty() {
        return Err(Error::Parameter("no spectra to export".into()));
    }
    let labeled: Vec<(String, SingularSpectrum<T>)> = spectra
        .iter()
        .enumerate()
        .map(|(i, s)| (i.to_string(), s.clone()))
        .collect();
    export_labeled_curves(&labeled, path.as_ref())
}

pub fn export_labeled_curves<T: Scalar>(
    spectra: &[(String, SingularSpectrum<T>)],
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_spectrum_curves(spectra, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
