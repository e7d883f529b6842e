//! Trajectory logs as CSV: one header row, then one row per control cycle.

use std::io::{Read, Write};

use lexdyn::control::Mode;
use lexdyn::sim::{LogRow, TrajectoryLog};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed log: {0}")]
    Format(String),
}

pub fn header(dof: usize, levels: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "qd", "qdd", "tau"] {
        h.extend((0..dof).map(|j| format!("{prefix}_{j}")));
    }
    h.extend((1..=levels).map(|l| format!("wnorm_L{l}")));
    h.extend((1..=levels).map(|l| format!("mode_L{l}")));
    h.push("asiter".into());
    h.push("solve_us".into());
    h
}

/// Twelve significant digits.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn write_log<W: Write>(out: W, log: &TrajectoryLog<f64>) -> Result<(), CsvError> {
    write_log_shaped(out, log, log.dof(), log.levels())
}

/// Like [`write_log`] but with the column layout given, so an empty log
/// still gets a full header.
pub fn write_log_shaped<W: Write>(out: W, log: &TrajectoryLog<f64>, dof: usize, levels: usize) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header(dof, levels))?;
    for r in &log.rows {
        let mut rec = vec![num(r.t)];
        for v in [&r.q, &r.qd, &r.qdd, &r.tau] {
            rec.extend(v.iter().map(|&x| num(x)));
        }
        rec.extend(r.wnorm.iter().map(|&x| num(x)));
        rec.extend(r.mode.iter().map(|m| if *m == Mode::Newton { "1" } else { "0" }.to_string()));
        rec.push(r.asiter.to_string());
        rec.push(r.solve_us.to_string());
        w.write_record(rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_string(log: &TrajectoryLog<f64>) -> String {
    let mut buf = Vec::new();
    write_log(&mut buf, log).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

fn count(header: &csv::StringRecord, prefix: &str) -> usize {
    header.iter().filter(|h| h.starts_with(prefix)).count()
}

pub fn read_log<R: Read>(input: R) -> Result<TrajectoryLog<f64>, CsvError> {
    let mut rd = csv::ReaderBuilder::new().from_reader(input);
    let head = rd.headers()?.clone();
    let dof = count(&head, "q_");
    let levels = count(&head, "wnorm_L");
    let expected = header(dof, levels);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CsvError::Format("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CsvError::Format(format!("row {}: {what}", line + 1));
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(&format!("column {} is not a number", expected[i])));
        let vec_at = |start: usize, len: usize| -> Result<DVector<f64>, CsvError> {
            (start..start + len).map(f).collect::<Result<Vec<_>, _>>().map(DVector::from_vec)
        };
        let mut c = 1;
        let q = vec_at(c, dof)?;
        c += dof;
        let qd = vec_at(c, dof)?;
        c += dof;
        let qdd = vec_at(c, dof)?;
        c += dof;
        let tau = vec_at(c, dof)?;
        c += dof;
        let wnorm = vec_at(c, levels)?.as_slice().to_vec();
        c += levels;
        let mode = (c..c + levels)
            .map(|i| match &rec[i] {
                "0" => Ok(Mode::Gn),
                "1" => Ok(Mode::Newton),
                _ => Err(bad("mode must be 0 or 1")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        c += levels;
        let asiter = rec[c].parse().map_err(|_| bad("asiter"))?;
        let solve_us = rec[c + 1].parse().map_err(|_| bad("solve_us"))?;
        rows.push(LogRow { t: f(0)?, q, qd, qdd, tau, wnorm, mode, asiter, solve_us });
    }
    Ok(TrajectoryLog { rows })
}
