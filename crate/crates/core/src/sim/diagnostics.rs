//! Per-step conservation diagnostics and their summary.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One CSV row per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub frame: usize,
    pub vof_vol: f64,
    pub particle_vol: f64,
    pub grid_vol: f64,
    /// Volume entering the VOF+particle subsystem from the grid this step.
    pub ledger_in: f64,
    /// Volume leaving it for the grid this step.
    pub ledger_out: f64,
    /// |(after − before) − (in − out)| / after for the VOF+particle volume.
    pub cons_err_rel: f64,
    pub mom_x: f64,
    pub mom_y: f64,
    pub mom_z: f64,
    pub ms_advect: f64,
    pub ms_conserve: f64,
    pub ms_project: f64,
}

pub const CSV_HEADER: &str =
    "frame,vof_vol,particle_vol,grid_vol,ledger_in,ledger_out,cons_err_rel,mom_x,mom_y,mom_z,ms_advect,ms_conserve,ms_project";

/// Relative conservation error of the VOF+particle subsystem over one step.
pub fn conservation_error(before: f64, after: f64, ledger_in: f64, ledger_out: f64) -> f64 {
    let residual = (after - before) - (ledger_in - ledger_out);
    let scale = after.abs().max(before.abs());
    if scale > 0.0 {
        residual.abs() / scale
    } else {
        residual.abs()
    }
}

pub fn write_csv<W: Write>(w: W, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    if rows.is_empty() {
        wr.write_record(CSV_HEADER.split(','))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<DiagnosticsRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Diagnostics(format!("unexpected header `{}`", header.join(","))));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Summary over a diagnostics file.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub mean_cons_err: f64,
    pub max_cons_err: f64,
    pub max_err_frame: usize,
    pub mean_ms_advect: f64,
    pub mean_ms_conserve: f64,
    pub mean_ms_project: f64,
    pub final_vof_vol: f64,
    pub final_particle_vol: f64,
    pub final_grid_vol: f64,
}

pub fn summarize(rows: &[DiagnosticsRow]) -> Summary {
    let n = rows.len();
    if n == 0 {
        return Summary::default();
    }
    let mean = |f: fn(&DiagnosticsRow) -> f64| rows.iter().map(f).sum::<f64>() / n as f64;
    let (max_err_frame, max_cons_err) = rows
        .iter()
        .map(|r| (r.frame, r.cons_err_rel))
        .fold((rows[0].frame, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let last = &rows[n - 1];
    Summary {
        rows: n,
        mean_cons_err: mean(|r| r.cons_err_rel),
        max_cons_err,
        max_err_frame,
        mean_ms_advect: mean(|r| r.ms_advect),
        mean_ms_conserve: mean(|r| r.ms_conserve),
        mean_ms_project: mean(|r| r.ms_project),
        final_vof_vol: last.vof_vol,
        final_particle_vol: last.particle_vol,
        final_grid_vol: last.grid_vol,
    }
}

/// The summary as a one-row CSV.
pub fn write_summary<W: Write>(w: W, s: &Summary) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.serialize(s)?;
    wr.flush()?;
    Ok(())
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "steps:              {}", self.rows)?;
        writeln!(f, "mean cons. error:   {:.6}%", self.mean_cons_err * 100.0)?;
        writeln!(
            f,
            "max cons. error:    {:.6}% (step {})",
            self.max_cons_err * 100.0,
            self.max_err_frame
        )?;
        writeln!(
            f,
            "mean ms/step:       advect {:.2}, conserve {:.2}, project {:.2}",
            self.mean_ms_advect, self.mean_ms_conserve, self.mean_ms_project
        )?;
        write!(
            f,
            "final volumes:      vof {:.6e}, particles {:.6e}, grid {:.6e}",
            self.final_vof_vol, self.final_particle_vol, self.final_grid_vol
        )
    }
}
