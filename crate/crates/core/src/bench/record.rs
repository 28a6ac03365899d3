use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Per-parameter telemetry of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ParamTelemetry {
    pub grad_norm: f64,
    pub rank: Option<usize>,
    pub xi: Option<f64>,
    pub clipped: bool,
}

/// Telemetry of one training step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub step: u64,
    /// Loss at the weights the step started from, on the step's batch.
    pub loss: f64,
    pub params: Vec<ParamTelemetry>,
    /// Wall-clock time of the step; zero unless timing was requested.
    pub micros: u64,
}

impl TrainRecord {
    /// Frobenius norm of the full gradient.
    pub fn grad_norm(&self) -> f64 {
        self.params.iter().map(|p| p.grad_norm * p.grad_norm).sum::<f64>().sqrt()
    }
}

/// One CSV row: a (step, parameter) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub param: usize,
    pub rank: Option<usize>,
    pub xi: Option<f64>,
    pub clipped: bool,
    pub us: u64,
}

/// Writes `step,loss,grad_norm,param,rank,xi,clipped,us` rows with LF line
/// endings. Empty `rank`/`xi` cells mean "not applicable".
pub fn write_csv<W: Write>(records: &[TrainRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut wrote = false;
    for r in records {
        for (param, p) in r.params.iter().enumerate() {
            w.serialize(CsvRow {
                step: r.step,
                loss: r.loss,
                grad_norm: p.grad_norm,
                param,
                rank: p.rank,
                xi: p.xi,
                clipped: p.clipped,
                us: r.micros,
            })?;
            wrote = true;
        }
    }
    if !wrote {
        w.write_record(["step", "loss", "grad_norm", "param", "rank", "xi", "clipped", "us"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?;
    Ok(rows)
}
