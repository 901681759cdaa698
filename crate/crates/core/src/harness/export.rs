//! Table export formats.
//!
//! CSV (`structure.csv`), one row per `(p, l)` in table order, header
//!
//! ```text
//! p,l,signed_mean,signed_stderr,abs_mean,abs_stderr,count
//! ```
//!
//! Floats use the shortest decimal that parses back to the same bits; `NaN`
//! marks an undefined value and empty fields mark signed moments that do not
//! exist (non-integer `p`). `count` is the number of trajectories.
//!
//! Structured text (`records.jsonl`), one JSON object per line:
//!
//! ```text
//! {"record":"structure","kind":"absolute"|"signed"|"positive_cubic","p":3.0,"l":0.01,"count":64,"mean":…,"m2":…}
//! {"record":"scalar","name":"dissipation","count":64,"mean":…,"m2":…}
//! {"record":"khm","l":0.01,"residual":…,"stderr":…,"terms":[…]}
//! {"record":"budget","t":1.0,"energy":{…},"dissipated":{…},"pathwise":{…}}
//! ```
//!
//! `m2` is the centred sum of squares, so importing the stream rebuilds the
//! accumulators exactly.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{load_run, RunStatistics};
use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::laws::khm_stationary_residual;
use crate::statistics::{MomentAccumulator, StructureTable, SCALAR_NAMES};

pub const CSV_HEADER: [&str; 7] = ["p", "l", "signed_mean", "signed_stderr", "abs_mean", "abs_stderr", "count"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" | "structured-text" => Ok(ExportFormat::Jsonl),
            other => Err(Error::UnknownFormat(other.into())),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_table_csv<W: Write>(table: &StructureTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (ip, &p) in table.p_list.iter().enumerate() {
        for (il, &l) in table.l.iter().enumerate() {
            let a = &table.absolute[ip][il];
            let (sm, ss) = match &table.signed[ip] {
                Some(col) => (num(col[il].mean()), num(col[il].stderr())),
                None => (String::new(), String::new()),
            };
            w.write_record([num(p), num(l), sm, ss, num(a.mean()), num(a.stderr()), a.count().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a table from CSV; means and counts are exact, the second
/// moment is recovered from the standard error.
pub fn read_table_csv<R: Read>(input: R) -> Result<StructureTable> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::SnapshotFormat(format!("unexpected CSV header {header:?}")));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| Error::SnapshotFormat(format!("bad number `{s}`")))
    };
    let acc = |mean: f64, stderr: f64, count: u64| {
        let m2 = if count > 1 {
            stderr * stderr * count as f64 * (count - 1) as f64
        } else {
            0.0
        };
        MomentAccumulator::from_parts(count, if count == 0 { 0.0 } else { mean }, m2)
    };
    let mut rows: Vec<(f64, f64, Option<MomentAccumulator>, MomentAccumulator)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let count: u64 = rec[6]
            .parse()
            .map_err(|_| Error::SnapshotFormat(format!("bad count `{}`", &rec[6])))?;
        let signed = if rec[2].is_empty() {
            None
        } else {
            Some(acc(parse(&rec[2])?, parse(&rec[3])?, count))
        };
        rows.push((parse(&rec[0])?, parse(&rec[1])?, signed, acc(parse(&rec[4])?, parse(&rec[5])?, count)));
    }
    let mut p_list: Vec<f64> = Vec::new();
    let mut l: Vec<f64> = Vec::new();
    for (p, x, _, _) in &rows {
        if !p_list.contains(p) {
            p_list.push(*p);
        }
        if p_list.len() == 1 {
            l.push(*x);
        }
    }
    if rows.len() != p_list.len() * l.len() {
        return Err(Error::SnapshotFormat("CSV rows do not form a (p, l) grid".into()));
    }
    let mut table = StructureTable::new(l.clone(), p_list.clone());
    for (i, (_, _, signed, abs)) in rows.into_iter().enumerate() {
        let (ip, il) = (i / l.len(), i % l.len());
        table.absolute[ip][il] = abs;
        if let (Some(col), Some(s)) = (table.signed[ip].as_mut(), signed) {
            col[il] = s;
        }
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Structure {
        kind: String,
        p: f64,
        l: f64,
        #[serde(flatten)]
        acc: MomentAccumulator,
    },
    Scalar {
        name: String,
        #[serde(flatten)]
        acc: MomentAccumulator,
    },
    Khm {
        l: f64,
        residual: f64,
        stderr: f64,
        terms: Vec<f64>,
    },
    Budget {
        t: f64,
        energy: MomentAccumulator,
        dissipated: MomentAccumulator,
        pathwise: MomentAccumulator,
    },
}

pub fn table_records(table: &StructureTable) -> Vec<Record> {
    let mut out = Vec::new();
    for (ip, &p) in table.p_list.iter().enumerate() {
        for (il, &l) in table.l.iter().enumerate() {
            out.push(Record::Structure {
                kind: "absolute".into(),
                p,
                l,
                acc: table.absolute[ip][il],
            });
        }
        if let Some(col) = &table.signed[ip] {
            for (il, &l) in table.l.iter().enumerate() {
                out.push(Record::Structure {
                    kind: "signed".into(),
                    p,
                    l,
                    acc: col[il],
                });
            }
        }
    }
    for (il, &l) in table.l.iter().enumerate() {
        out.push(Record::Structure {
            kind: "positive_cubic".into(),
            p: 3.0,
            l,
            acc: table.positive_cubic[il],
        });
    }
    out
}

pub fn write_jsonl<W: Write>(records: &[Record], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Rebuilds the structure table from `structure` records.
pub fn table_from_records(records: &[Record]) -> Result<StructureTable> {
    let mut p_list: Vec<f64> = Vec::new();
    let mut l: Vec<f64> = Vec::new();
    for r in records {
        if let Record::Structure { kind, p, l: x, .. } = r {
            if kind == "absolute" {
                if !p_list.contains(p) {
                    p_list.push(*p);
                }
                if !l.contains(x) {
                    l.push(*x);
                }
            }
        }
    }
    let mut table = StructureTable::new(l.clone(), p_list.clone());
    for r in records {
        if let Record::Structure { kind, p, l: x, acc } = r {
            let il = l.iter().position(|v| v == x);
            let ip = p_list.iter().position(|v| v == p);
            let (Some(il), Some(ip)) = (il, ip) else {
                return Err(Error::SnapshotFormat(format!("record at p = {p}, l = {x} is off the table grid")));
            };
            match kind.as_str() {
                "absolute" => table.absolute[ip][il] = *acc,
                "signed" => match table.signed[ip].as_mut() {
                    Some(col) => col[il] = *acc,
                    None => return Err(Error::SnapshotFormat(format!("signed record for non-integer p = {p}"))),
                },
                "positive_cubic" => table.positive_cubic[il] = *acc,
                other => return Err(Error::SnapshotFormat(format!("unknown structure kind `{other}`"))),
            }
        }
    }
    Ok(table)
}

/// All records for a run: tables, scalars, KHM residuals and budget.
pub fn run_records(cfg: &ExperimentConfig, stats: &RunStatistics) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    if let Some(w) = &stats.observables {
        out.extend(table_records(&w.table()));
        for name in SCALAR_NAMES {
            out.push(Record::Scalar {
                name: name.into(),
                acc: *w.scalar(name).expect("fixed names"),
            });
        }
        if w.count() > 0 {
            let khm = khm_stationary_residual(w, &cfg.forcing.build()?);
            for (i, &l) in khm.l.iter().enumerate() {
                out.push(Record::Khm {
                    l,
                    residual: khm.residual[i],
                    stderr: khm.stderr[i],
                    terms: khm.terms.iter().map(|t| t[i]).collect(),
                });
            }
        }
    }
    let b = &stats.budget;
    for (i, &t) in b.times.iter().enumerate() {
        out.push(Record::Budget {
            t,
            energy: b.energy[i],
            dissipated: b.dissipated[i],
            pathwise: b.pathwise[i],
        });
    }
    Ok(out)
}

/// Writes the export for the run in `dir` into `dir/export/` and returns
/// the files written.
pub fn export(dir: &Path, format: ExportFormat) -> Result<Vec<PathBuf>> {
    let run = load_run(dir)?;
    let out_dir = dir.join("export");
    fs::create_dir_all(&out_dir).map_err(|e| Error::file(&out_dir, e))?;
    match format {
        ExportFormat::Csv => {
            let path = out_dir.join("structure.csv");
            let table = match &run.statistics.observables {
                Some(w) => w.table(),
                None => StructureTable::new(Vec::new(), Vec::new()),
            };
            let mut buf = Vec::new();
            write_table_csv(&table, &mut buf)?;
            fs::write(&path, buf).map_err(|e| Error::file(&path, e))?;
            Ok(vec![path])
        }
        ExportFormat::Jsonl => {
            let path = out_dir.join("records.jsonl");
            let mut buf = Vec::new();
            write_jsonl(&run_records(&run.config, &run.statistics)?, &mut buf)?;
            fs::write(&path, buf).map_err(|e| Error::file(&path, e))?;
            Ok(vec![path])
        }
    }
}
