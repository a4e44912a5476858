//! Table rendering: CSV with a self-describing `#` header, and a JSON mirror.

use std::fmt::Write as _;

use hg_compton_core::{PhysicalConstants, VERSION};
use serde::Serialize;

use crate::config::RunConfig;

/// Opening and closing markers of the echoed configuration block.
pub const CONFIG_BEGIN: &str = "# --- config ---";
pub const CONFIG_END: &str = "# --- end config ---";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Num(_) => "nan".into(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(v) => {
                serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into)
            }
            Cell::Int(i) => (*i).into(),
            Cell::Text(s) => s.clone().into(),
        }
    }
}

/// A rendered result: column names, rows, and extra `key = value` header lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: Vec<(String, String)>,
}

fn value_unit(cfg: &RunConfig, kn: bool) -> &'static str {
    use crate::config::Units;
    match (cfg.output.units, kn) {
        (Units::Natural, false) => "keV^-3 sr^-1",
        (Units::Natural, true) => "keV^-2 sr^-1",
        (Units::Barn, false) => "barn keV^-1 sr^-1",
        (Units::Barn, true) => "barn sr^-1",
    }
}

fn constants_line(c: &PhysicalConstants) -> String {
    format!(
        "m_e_keV = {:?}, alpha = {:?}, hbar_c_keV_pm = {:?}",
        c.m_e(),
        c.alpha(),
        c.hbar_c()
    )
}

/// CSV text. Numbers carry 17 significant digits.
pub fn render_csv(cfg: &RunConfig, c: &PhysicalConstants, table: &Table) -> String {
    let kn = cfg.scan.mode == crate::config::Mode::KnReference;
    let mut s = String::new();
    let _ = writeln!(s, "# hg-compton {VERSION}");
    let _ = writeln!(s, "# mode = {}", cfg.scan.mode.as_str());
    let _ = writeln!(s, "# value_unit = {}", value_unit(cfg, kn));
    let _ = writeln!(s, "# constants: {}", constants_line(c));
    for (k, v) in &table.meta {
        let _ = writeln!(s, "# {k} = {v}");
    }
    let _ = writeln!(s, "{CONFIG_BEGIN}");
    for line in cfg.to_document(false).lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "{CONFIG_END}");
    let _ = writeln!(s, "{}", table.columns.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    version: &'static str,
    mode: &'static str,
    value_unit: &'static str,
    constants: serde_json::Value,
    meta: serde_json::Map<String, serde_json::Value>,
    config: String,
    columns: &'a [&'static str],
    rows: Vec<serde_json::Map<String, serde_json::Value>>,
}

pub fn render_json(cfg: &RunConfig, c: &PhysicalConstants, table: &Table) -> String {
    let kn = cfg.scan.mode == crate::config::Mode::KnReference;
    let doc = JsonDoc {
        version: VERSION,
        mode: cfg.scan.mode.as_str(),
        value_unit: value_unit(cfg, kn),
        constants: serde_json::json!({
            "m_e_keV": c.m_e(),
            "alpha": c.alpha(),
            "hbar_c_keV_pm": c.hbar_c(),
        }),
        meta: table
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), v.clone().into()))
            .collect(),
        config: cfg.to_document(false),
        columns: &table.columns,
        rows: table
            .rows
            .iter()
            .map(|r| {
                table
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(k, v)| (k.to_string(), v.json()))
                    .collect()
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("table serialises");
    s.push('\n');
    s
}

/// Recovers the configuration document echoed in a CSV header.
pub fn config_from_header(csv: &str) -> Option<String> {
    let mut lines = csv.lines().skip_while(|l| *l != CONFIG_BEGIN);
    lines.next()?;
    let mut doc = String::new();
    for l in lines {
        if l == CONFIG_END {
            return Some(doc);
        }
        doc.push_str(l.strip_prefix("# ")?);
        doc.push('\n');
    }
    None
}
