//! CSV schemas written by the command-line tool, with readers for each.
//!
//! All files are UTF-8, comma separated, with a mandatory header row. Reals
//! are printed with 12 significant digits, independent of locale.
//!
//! | file        | columns                                                          |
//! |-------------|------------------------------------------------------------------|
//! | trace.csv   | `step,steps_as_resident,self_coop_rate,is_partner,strategy`      |
//! | summary.csv | `avg_coop_rate,partner_abundance,most_abundant_strategy`         |
//! | sweep csv   | `axis_value,run_index,avg_coop_rate,partner_abundance`           |

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::evolution::{ResidentRecord, RunSummary};
use crate::strategy::{parse_strategy, Strategy};

pub const TRACE_HEADER: [&str; 5] = ["step", "steps_as_resident", "self_coop_rate", "is_partner", "strategy"];
pub const SUMMARY_HEADER: [&str; 3] = ["avg_coop_rate", "partner_abundance", "most_abundant_strategy"];
pub const SWEEP_HEADER: [&str; 4] = ["axis_value", "run_index", "avg_coop_rate", "partner_abundance"];

/// Formats `x` with 12 significant digits, trailing zeros removed (like C's `%.12g`).
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (DIGITS - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn record_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { pos: line, msg: msg.into() }
}

fn check_header(headers: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if headers.iter().ne(want.iter().copied()) {
        return Err(record_err(0, format!("expected header {}", want.join(","))));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| record_err(line, format!("bad value in column {i}")))
}

fn strategy_field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<Strategy> {
    parse_strategy(rec.get(i).ok_or_else(|| record_err(line, "missing strategy"))?)
}

pub fn write_trace<W: Write>(out: W, trace: &[ResidentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.step.to_string(),
            r.steps_as_resident.to_string(),
            fmt_sig(r.self_coop_rate),
            r.is_partner.to_string(),
            r.strategy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<ResidentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, &TRACE_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        out.push(ResidentRecord {
            step: field(&rec, 0, line)?,
            steps_as_resident: field(&rec, 1, line)?,
            self_coop_rate: field(&rec, 2, line)?,
            is_partner: field(&rec, 3, line)?,
            strategy: strategy_field(&rec, 4, line)?,
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(out: W, summary: &RunSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    w.write_record([
        fmt_sig(summary.avg_coop_rate),
        fmt_sig(summary.partner_abundance),
        summary.most_abundant_strategy.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Summary fields as written: `(avg_coop_rate, partner_abundance, most_abundant_strategy)`.
pub fn read_summary<R: Read>(input: R) -> Result<(f64, f64, Strategy)> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, &SUMMARY_HEADER)?;
    let rec = rdr.records().next().ok_or_else(|| record_err(2, "missing summary row"))??;
    Ok((field(&rec, 0, 2)?, field(&rec, 1, 2)?, strategy_field(&rec, 2, 2)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub run_index: usize,
    pub avg_coop_rate: f64,
    pub partner_abundance: f64,
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_sig(r.axis_value),
            r.run_index.to_string(),
            fmt_sig(r.avg_coop_rate),
            fmt_sig(r.partner_abundance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, &SWEEP_HEADER)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            Ok(SweepRow {
                axis_value: field(&rec, 0, line)?,
                run_index: field(&rec, 1, line)?,
                avg_coop_rate: field(&rec, 2, line)?,
                partner_abundance: field(&rec, 3, line)?,
            })
        })
        .collect()
}
