//! Plot-ready CSV files derived from a run log.

use std::path::{Path, PathBuf};

use crate::bandit::{BanditContext, ValueCatalog};
use crate::error::{Error, Result};
use crate::experiment::{cumulative_shift_series, mean_shift_matrix, read_log, TrialRecord};
use crate::stats::{discretize, per_intervention_means, valid_samples, Domain, BIN_WIDTH};

pub const CUMULATIVE_SHIFT_FILE: &str = "cumulative_shift.csv";
pub const MEAN_SHIFT_MATRIX_FILE: &str = "mean_shift_matrix.csv";
pub const INTERVENTION_MEANS_FILE: &str = "intervention_means.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// The four files as `(name, contents)`.
pub fn render_plots(records: &[TrialRecord]) -> Result<Vec<(&'static str, String)>> {
    if records.is_empty() {
        return Err(Error::InsufficientData("log has no trials".into()));
    }

    let mut cumulative = String::from("step,cumulative_shift\n");
    for (step, total) in cumulative_shift_series(records) {
        cumulative.push_str(&format!("{step},{total}\n"));
    }

    let values = ValueCatalog::standard();
    let matrix = mean_shift_matrix(records);
    let mut matrix_csv = String::from("context,value_index,value,mean_shift,count\n");
    for context in BanditContext::all() {
        for (i, label) in values.labels().enumerate() {
            let cell = matrix.get(context, i as u8 + 1);
            matrix_csv.push_str(&format!(
                "{context},{},{label},{},{}\n",
                i + 1,
                opt(cell.map(|c| c.mean_shift)),
                cell.map_or(0, |c| c.count)
            ));
        }
    }

    let mut interventions = String::from("index,mean_shift,count\n");
    for (i, cell) in per_intervention_means(records).iter().enumerate() {
        interventions.push_str(&format!(
            "{},{},{}\n",
            i + 1,
            opt(cell.map(|c| c.mean_shift)),
            cell.map_or(0, |c| c.count)
        ));
    }

    let (pre, shift) = valid_samples(records);
    let mut histograms = String::from("domain,bin_lo,bin_hi,count\n");
    for (domain, samples) in [(Domain::Preference, &pre), (Domain::Shift, &shift)] {
        let h = discretize(samples, domain)?;
        for (i, c) in h.counts().iter().enumerate() {
            let lo = h.bin_lo(i);
            histograms.push_str(&format!("{domain},{lo},{},{c}\n", lo + BIN_WIDTH));
        }
    }

    Ok(vec![
        (CUMULATIVE_SHIFT_FILE, cumulative),
        (MEAN_SHIFT_MATRIX_FILE, matrix_csv),
        (INTERVENTION_MEANS_FILE, interventions),
        (HISTOGRAMS_FILE, histograms),
    ])
}

/// Writes the plot files for `log` into `out_dir`. Nothing is written
/// unless every file could be computed.
pub fn export_plots(log: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let log = read_log(log)?;
    let files = render_plots(&log.records)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}
