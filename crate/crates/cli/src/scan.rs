//! Classical quantities along a noise grid; no training.
//!
//! Columns per preset (qubits numbered from 1, `|` separates the cut):
//! - werner: `p,neg_1|2,concurrence,bures_R_half`
//! - cluster: `p,neg_1|23,neg_2|13,neg_3|12`
//! - smolin: `p,neg_1|234,neg_2|134,neg_3|124,neg_4|123,neg_12|34,neg_13|24,neg_14|23`

use std::path::PathBuf;

use bures_core::oracle::{concurrence, negativity, werner_bures_reference, Bipartition};

use crate::{create_file, CliError, Preset, Result, RunOptions};

/// Parses `a:b:step` into the inclusive grid `a, a + step, …, b`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| CliError::Grid(spec.to_string(), why.to_string());
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("expected numbers a:b:step")))
        .collect::<Result<_>>()?;
    let [a, b, step] = parts[..] else {
        return Err(bad("expected exactly three fields a:b:step"));
    };
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(bad("step must be positive and bounds finite"));
    }
    if b < a {
        return Ok(Vec::new());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    // Rounding keeps printed values like 0.83 free of accumulation noise.
    Ok((0..count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn cuts(preset: Preset) -> Vec<(String, Vec<usize>)> {
    let n = preset.num_qubits();
    let label = |side: &[usize]| {
        let a: String = side.iter().map(|q| (q + 1).to_string()).collect();
        let b: String = (0..n).filter(|q| !side.contains(q)).map(|q| (q + 1).to_string()).collect();
        format!("neg_{a}|{b}")
    };
    let mut sides: Vec<Vec<usize>> = (0..n).map(|q| vec![q]).collect();
    if preset == Preset::Smolin {
        sides.extend([vec![0, 1], vec![0, 2], vec![0, 3]]);
    }
    if preset == Preset::Werner {
        sides.truncate(1);
    }
    sides.into_iter().map(|s| (label(&s), s)).collect()
}

/// Header of the scan CSV for `preset`.
pub fn scan_header(preset: Preset) -> Vec<String> {
    let mut header = vec!["p".to_string()];
    header.extend(cuts(preset).into_iter().map(|(name, _)| name));
    if preset == Preset::Werner {
        header.extend(["concurrence".to_string(), "bures_R_half".to_string()]);
    }
    header
}

/// One row of values, in header order after `p`.
pub fn scan_row(preset: Preset, p: f64) -> Result<Vec<f64>> {
    let rho = preset.state(p)?;
    let n = preset.num_qubits();
    let mut row = Vec::new();
    for (_, side) in cuts(preset) {
        row.push(negativity(&rho, &Bipartition::split_off(side, n)?)?);
    }
    if preset == Preset::Werner {
        row.push(concurrence(&rho)?);
        row.push(werner_bures_reference(p)?);
    }
    Ok(row)
}

/// Writes `<out>/oracle_<preset>.csv` and returns its path.
pub fn run_oracle_scan(preset: Preset, grid: &[f64], opts: &RunOptions) -> Result<PathBuf> {
    let path = opts.out_dir.join(format!("oracle_{preset}.csv"));
    let mut writer = csv::Writer::from_writer(create_file(&path)?);
    writer.write_record(scan_header(preset))?;
    for &p in grid {
        let values = scan_row(preset, p)?;
        let mut record = vec![p.to_string()];
        record.extend(values.iter().map(f64::to_string));
        writer.write_record(record)?;
    }
    writer.flush()?;
    Ok(path)
}
