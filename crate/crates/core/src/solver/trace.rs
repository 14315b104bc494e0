use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::cones::Zone;
use crate::error::Result;
use crate::{Scalar, Vector};

/// State of the iteration at step `k`, before the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord<T> {
    pub k: usize,
    pub x: Vector<T>,
    /// `theta_k` as applied (after any rescaling).
    pub step: T,
    /// `||f^k||` of the operator actually iterated.
    pub f_norm: T,
    pub zone: Zone,
    pub residual: T,
    /// `||x - x*||^2` when `x*` is known.
    pub merit: Option<T>,
    /// The step from `x` was replaced by a restart at `x0`.
    pub restarted: bool,
}

/// Receives trace records as they are produced.
pub trait TraceSink<T> {
    fn record(&mut self, record: &TraceRecord<T>) -> Result<()>;
    /// Called after every restart record and at the end of the run.
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl<T> TraceSink<T> for NullSink {
    fn record(&mut self, _record: &TraceRecord<T>) -> Result<()> {
        Ok(())
    }
}

pub fn csv_header(dim: usize) -> String {
    let mut h = String::from("k,step,f_norm,zone,residual,merit,restarted");
    for i in 0..dim {
        h.push_str(&format!(",x_{i}"));
    }
    h
}

pub fn csv_row<T: Scalar>(r: &TraceRecord<T>) -> String {
    let merit = r.merit.map(|m| m.to_string()).unwrap_or_default();
    let mut row = format!(
        "{},{},{},{},{},{},{}",
        r.k, r.step, r.f_norm, r.zone, r.residual, merit, r.restarted
    );
    for v in r.x.iter() {
        row.push(',');
        row.push_str(&v.to_string());
    }
    row
}

/// Buffered CSV trace; the header is written with the first record.
pub struct CsvTraceWriter<W: Write> {
    out: io::BufWriter<W>,
    header_written: bool,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W) -> Self {
        CsvTraceWriter {
            out: io::BufWriter::new(out),
            header_written: false,
        }
    }

    pub fn into_inner(self) -> Result<W> {
        self.out.into_inner().map_err(|e| e.into_error().into())
    }
}

impl<T: Scalar, W: Write> TraceSink<T> for CsvTraceWriter<W> {
    fn record(&mut self, r: &TraceRecord<T>) -> Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", csv_header(r.x.dim()))?;
            self.header_written = true;
        }
        writeln!(self.out, "{}", csv_row(r))?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Trace as a sequence of `[[record]]` tables.
pub struct TextTraceWriter<W: Write> {
    out: io::BufWriter<W>,
}

impl<W: Write> TextTraceWriter<W> {
    pub fn new(out: W) -> Self {
        TextTraceWriter {
            out: io::BufWriter::new(out),
        }
    }
}

impl<T: Scalar, W: Write> TraceSink<T> for TextTraceWriter<W> {
    fn record(&mut self, r: &TraceRecord<T>) -> Result<()> {
        writeln!(self.out, "[[record]]")?;
        writeln!(self.out, "k = {}", r.k)?;
        writeln!(self.out, "step = {}", toml_float(r.step))?;
        writeln!(self.out, "f_norm = {}", toml_float(r.f_norm))?;
        writeln!(self.out, "zone = \"{}\"", r.zone)?;
        writeln!(self.out, "residual = {}", toml_float(r.residual))?;
        if let Some(m) = r.merit {
            writeln!(self.out, "merit = {}", toml_float(m))?;
        }
        writeln!(self.out, "restarted = {}", r.restarted)?;
        let xs: Vec<String> = r.x.iter().map(|v| toml_float(*v)).collect();
        writeln!(self.out, "x = [{}]\n", xs.join(", "))?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Float literal that stays a float when parsed back.
pub fn toml_float<T: Scalar>(v: T) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > T::zero() { "inf".into() } else { "-inf".into() }
    } else {
        let s = v.to_string();
        if s.contains(['.', 'e', 'E']) {
            s
        } else {
            format!("{s}.0")
        }
    }
}
