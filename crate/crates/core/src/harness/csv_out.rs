use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{DelayResult, ErrorCurve, HarnessError, ManipulationRun};

/// Formats like C's `%.9g`: nine significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-5, 1e9)`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Anything with a fixed column layout.
pub trait CsvRecord {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

impl CsvRecord for [DelayResult] {
    fn header(&self) -> Vec<String> {
        ["n", "t_msg_ms", "method", "tau_ms", "tau_pred_ms", "replicates"]
            .map(String::from)
            .to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.t_msg_ms.to_string(),
                    r.method.to_string(),
                    fmt_sig(r.tau_measured_ms),
                    fmt_sig(r.tau_predicted_ms),
                    r.replicates.to_string(),
                ]
            })
            .collect()
    }
}

impl CsvRecord for [ErrorCurve] {
    fn header(&self) -> Vec<String> {
        [
            "shape",
            "method",
            "quantized",
            "terms_used",
            "rel_error",
            "commanded_error",
        ]
        .map(String::from)
        .to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .flat_map(|c| {
                c.points.iter().map(move |p| {
                    vec![
                        c.shape.name().to_string(),
                        c.method.to_string(),
                        c.quantized.to_string(),
                        p.terms_used.to_string(),
                        fmt_sig(p.rel_error),
                        fmt_sig(p.commanded_error),
                    ]
                })
            })
            .collect()
    }
}

impl CsvRecord for ManipulationRun {
    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["tick", "time_s", "center_x", "center_y", "frames"]
            .map(String::from)
            .to_vec();
        h.extend((0..self.rows * self.cols).map(|m| format!("f{m}")));
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.ticks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut row = vec![
                    (i + 1).to_string(),
                    fmt_sig(t.time_s),
                    fmt_sig(t.center.0),
                    fmt_sig(t.center.1),
                    t.frames.to_string(),
                ];
                row.extend(t.targets.iter().map(|v| fmt_sig(*v)));
                row
            })
            .collect()
    }
}

fn write_record<W: Write, R: CsvRecord + ?Sized>(out: W, record: &R) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(record.header())?;
    for row in record.rows() {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn to_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

pub fn write_delay_csv<W: Write>(out: W, results: &[DelayResult]) -> std::io::Result<()> {
    write_record(out, results).map_err(to_io)
}

pub fn write_error_curve_csv<W: Write>(out: W, curves: &[ErrorCurve]) -> std::io::Result<()> {
    write_record(out, curves).map_err(to_io)
}

pub fn write_manipulation_csv<W: Write>(out: W, run: &ManipulationRun) -> std::io::Result<()> {
    write_record(out, run).map_err(to_io)
}

/// Writes `record` to `path`, creating or truncating the file.
pub fn emit_csv<R: CsvRecord + ?Sized>(record: &R, path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_record(BufWriter::new(file), record)
        .map_err(to_io)
        .map_err(io)
}
