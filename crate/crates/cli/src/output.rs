use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::Context;
use serde_json::{Map, Value};

use crate::commands::Outcome;
use crate::{Command, Common, Format};

/// The parsed flags, echoed into every output.
fn config(command: &Command, common: &Common) -> anyhow::Result<Map<String, Value>> {
    let mut cfg = match serde_json::to_value(command)? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Value::Object(m) = serde_json::to_value(common)? {
        cfg.extend(m);
    }
    // unset optional flags add nothing
    cfg.retain(|_, v| !v.is_null());
    Ok(cfg)
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write_csv(out: impl Write, cfg: &Map<String, Value>, rows: &[Map<String, Value>]) -> anyhow::Result<()> {
    let mut header: Vec<String> = cfg.keys().map(|k| format!("config_{k}")).collect();
    let fields: Vec<String> = rows
        .iter()
        .flat_map(|r| r.keys().cloned())
        .fold(Vec::new(), |mut acc, k| {
            if !acc.contains(&k) {
                acc.push(k);
            }
            acc
        });
    header.extend(fields.iter().cloned());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in rows {
        let record = cfg
            .values()
            .map(cell)
            .chain(fields.iter().map(|k| r.get(k).map(cell).unwrap_or_default()));
        w.write_record(record)?;
    }
    w.flush()?;
    Ok(())
}

fn table(rows: &[Map<String, Value>]) {
    let Some(first) = rows.first() else { return };
    let keys: Vec<&String> = first.keys().collect();
    let widths: Vec<usize> = keys
        .iter()
        .map(|k| rows.iter().map(|r| r.get(*k).map_or(0, |v| cell(v).len())).max().unwrap_or(0).max(k.len()))
        .collect();
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    eprintln!("{}", line(keys.iter().map(|k| k.to_string()).collect()));
    for r in rows {
        eprintln!("{}", line(keys.iter().map(|k| r.get(*k).map(cell).unwrap_or_default()).collect()));
    }
}

pub fn emit(command: &Command, common: &Common, outcome: &Outcome) -> anyhow::Result<()> {
    let cfg = config(command, common)?;
    let sink: Box<dyn Write> = match &common.output {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match common.format {
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("config".into(), Value::Object(cfg));
            doc.extend(outcome.result.clone());
            serde_json::to_writer_pretty(&mut sink, &doc)?;
            writeln!(sink)?;
        }
        Format::Csv => write_csv(&mut sink, &cfg, &outcome.rows)?,
    }
    sink.flush()?;
    table(&outcome.rows);
    eprintln!("{}", if outcome.pass { "all checks passed" } else { "some checks FAILED" });
    Ok(())
}
