//! Result rows and their CSV / JSON encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Theory,
    Simulation,
}

/// Value columns shared by the estimate and its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub m: Option<f64>,
    pub q: Option<f64>,
    pub v: Option<f64>,
    pub p: Option<f64>,
    pub a: Option<f64>,
    pub f: Option<f64>,
    pub n: Option<f64>,
    pub egen: Option<f64>,
    pub ebnd: Option<f64>,
    pub eadv: Option<f64>,
    pub etrain: Option<f64>,
    pub ltrain: Option<f64>,
    pub ecp: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub egen: Option<f64>,
    pub ebnd: Option<f64>,
    pub eadv: Option<f64>,
    pub etrain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: String,
    pub provenance: Provenance,
    pub preset: Option<String>,
    pub alpha: f64,
    pub lambda: f64,
    pub tau: f64,
    pub eps_t: f64,
    pub eps_g: f64,
    pub d: Option<usize>,
    pub seeds: Option<usize>,
    pub values: Metrics,
    pub sem: Metrics,
    pub z: ZScores,
    pub iterations: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

const METRIC_NAMES: [&str; 13] = ["m", "q", "V", "P", "A", "F", "N", "Egen", "Ebnd", "Eadv", "Etrain", "Ltrain", "Ecp"];

fn metric_cells(m: &Metrics) -> [Option<f64>; 13] {
    [m.m, m.q, m.v, m.p, m.a, m.f, m.n, m.egen, m.ebnd, m.eadv, m.etrain, m.ltrain, m.ecp]
}

fn metrics_from(c: &[Option<f64>]) -> Metrics {
    Metrics {
        m: c[0],
        q: c[1],
        v: c[2],
        p: c[3],
        a: c[4],
        f: c[5],
        n: c[6],
        egen: c[7],
        ebnd: c[8],
        eadv: c[9],
        etrain: c[10],
        ltrain: c[11],
        ecp: c[12],
    }
}

/// Column order of the CSV output.
pub fn header() -> Vec<String> {
    let mut h: Vec<String> = ["mode", "provenance", "preset", "alpha", "lambda", "tau", "eps_t", "eps_g", "d", "seeds"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(METRIC_NAMES.iter().map(|s| s.to_string()));
    h.extend(METRIC_NAMES.iter().map(|s| format!("sem_{s}")));
    h.extend(["z_Egen", "z_Ebnd", "z_Eadv", "z_Etrain", "iterations", "residual", "error"].iter().map(|s| s.to_string()));
    h
}

/// 17 significant digits, enough to round-trip any f64.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn record(r: &ResultRow) -> Vec<String> {
    let prov = match r.provenance {
        Provenance::Theory => "theory",
        Provenance::Simulation => "simulation",
    };
    let mut c = vec![
        r.mode.clone(),
        prov.to_string(),
        r.preset.clone().unwrap_or_default(),
        num(r.alpha),
        num(r.lambda),
        num(r.tau),
        num(r.eps_t),
        num(r.eps_g),
        r.d.map(|d| d.to_string()).unwrap_or_default(),
        r.seeds.map(|s| s.to_string()).unwrap_or_default(),
    ];
    c.extend(metric_cells(&r.values).into_iter().map(opt));
    c.extend(metric_cells(&r.sem).into_iter().map(opt));
    c.extend([r.z.egen, r.z.ebnd, r.z.eadv, r.z.etrain, r.iterations, r.residual].into_iter().map(opt));
    c.push(r.error.clone().unwrap_or_default());
    c
}

pub fn write_csv<W: Write>(w: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header())?;
    for r in rows {
        out.write_record(record(r))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_opt(s: &str) -> Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| format!("bad number '{s}'"))
    }
}

fn parse_usize(s: &str) -> Result<Option<usize>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| format!("bad integer '{s}'"))
    }
}

fn non_empty(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_string())
}

/// Inverse of [`write_csv`].
pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>, String> {
    let mut rd = csv::Reader::from_reader(r);
    let h: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if h != header() {
        return Err("unexpected CSV header".into());
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let f: Vec<&str> = rec.iter().collect();
        let req = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number '{s}'"));
        let provenance = match f[1] {
            "theory" => Provenance::Theory,
            "simulation" => Provenance::Simulation,
            other => return Err(format!("bad provenance '{other}'")),
        };
        let cells = |from: usize| -> Result<Vec<Option<f64>>, String> { f[from..from + 13].iter().map(|s| parse_opt(s)).collect() };
        let tail: Vec<Option<f64>> = f[36..42].iter().map(|s| parse_opt(s)).collect::<Result<_, _>>()?;
        rows.push(ResultRow {
            mode: f[0].to_string(),
            provenance,
            preset: non_empty(f[2]),
            alpha: req(f[3])?,
            lambda: req(f[4])?,
            tau: req(f[5])?,
            eps_t: req(f[6])?,
            eps_g: req(f[7])?,
            d: parse_usize(f[8])?,
            seeds: parse_usize(f[9])?,
            values: metrics_from(&cells(10)?),
            sem: metrics_from(&cells(23)?),
            z: ZScores { egen: tail[0], ebnd: tail[1], eadv: tail[2], etrain: tail[3] },
            iterations: tail[4],
            residual: tail[5],
            error: non_empty(f[42]),
        });
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(mut w: W, rows: &[ResultRow], format: Format) -> std::io::Result<()> {
    match format {
        Format::Csv => write_csv(w, rows).map_err(std::io::Error::other),
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(std::io::Error::other)?;
            w.write_all(b"\n")
        }
    }
}
