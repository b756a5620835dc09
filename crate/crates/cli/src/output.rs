//! CSV and JSON artifacts.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so equal
//! results always produce equal bytes.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use relaynet::deepopt::HistoryRow;
use relaynet::linopt::SweepRecord;
use relaynet::modem::{BerReport, ModulationSpec};
use relaynet::netgen::Placement;

use crate::error::Result;

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn csv(&self, name: &str) -> Result<csv::Writer<File>> {
        Ok(csv::Writer::from_path(self.path(name))?)
    }

    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        relaynet::io::write_json(&self.path(name), value)?;
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// One evaluated grid point of a BER sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub optimizer: String,
    pub receiver: String,
    pub snr_db: f64,
    pub sigma2: f64,
    /// `None` when the optimizer produced no parameters for this point.
    pub report: Option<BerReport>,
    pub status: String,
}

pub fn sweep_header(spec: &ModulationSpec) -> Vec<String> {
    let mut h: Vec<String> = [
        "seed",
        "optimizer",
        "receiver",
        "snr_db",
        "inv_sigma2_db",
        "sigma2",
        "ber_worst",
        "ci_low",
        "ci_high",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in 1..=spec.users {
        for b in 1..=spec.bits {
            h.push(format!("ber_m{m}_b{b}"));
        }
    }
    h.push("symbols".into());
    h.push("status".into());
    h
}

pub fn write_sweep(out: &OutputDir, name: &str, spec: &ModulationSpec, rows: &[SweepRow]) -> Result<()> {
    let mut w = out.csv(name)?;
    w.write_record(sweep_header(spec))?;
    let bits = spec.total_bits();
    for r in rows {
        let mut rec = vec![
            r.seed.to_string(),
            r.optimizer.clone(),
            r.receiver.clone(),
            num(r.snr_db),
            num(-10.0 * r.sigma2.log10()),
            num(r.sigma2),
        ];
        match &r.report {
            Some(rep) => {
                rec.extend([num(rep.worst.rate), num(rep.worst.ci_low), num(rep.worst.ci_high)]);
                rec.extend(rep.per_bit.iter().map(|e| num(e.rate)));
                rec.push(rep.worst.trials.to_string());
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 4 + bits)),
        }
        rec.push(r.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_train_log(out: &OutputDir, name: &str, history: &[HistoryRow]) -> Result<()> {
    let mut w = out.csv(name)?;
    w.write_record(["stage", "sigma2", "iter", "loss", "ber_worst"])?;
    for h in history {
        w.write_record([
            h.stage.to_string(),
            num(h.sigma2),
            h.iter.to_string(),
            num(h.loss),
            num(h.ber_worst),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Convergence log of the linear design, one row per layer update.
pub fn write_linear_log(out: &OutputDir, name: &str, rows: &[(f64, SweepRecord)]) -> Result<()> {
    let mut w = out.csv(name)?;
    w.write_record(["snr_db", "round", "sweep", "layer", "eta", "max_power"])?;
    for (snr_db, r) in rows {
        w.write_record([
            num(*snr_db),
            r.round.to_string(),
            r.sweep.to_string(),
            r.layer.to_string(),
            num(r.eta),
            num(r.max_power),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Node positions: `bs` (empty layer column), relays `r1..` in placement
/// order, receivers `rx1..`.
pub fn write_placement(out: &OutputDir, name: &str, placement: &Placement, layer_of: &[usize]) -> Result<()> {
    let mut w = out.csv(name)?;
    w.write_record(["id", "x", "y", "layer"])?;
    w.write_record(["bs", &num(placement.bs[0]), &num(placement.bs[1]), ""])?;
    for (j, p) in placement.relays.iter().enumerate() {
        let layer = layer_of.get(j).map(|l| l.to_string()).unwrap_or_default();
        w.write_record([format!("r{}", j + 1), num(p[0]), num(p[1]), layer])?;
    }
    for (m, p) in placement.receivers.iter().enumerate() {
        w.write_record([format!("rx{}", m + 1), num(p[0]), num(p[1]), String::new()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_transfer(out: &OutputDir, name: &str, grid: &[f64], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = out.csv(name)?;
    let users = rows.first().map_or(0, Vec::len);
    let mut header = vec!["s".to_string()];
    header.extend((1..=users).map(|m| format!("rbar_{m}")));
    w.write_record(&header)?;
    for (s, row) in grid.iter().zip(rows) {
        let mut rec = vec![num(*s)];
        rec.extend(row.iter().map(|&x| num(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
