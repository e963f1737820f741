use std::path::Path;

use levymlmc::harness::TestReport;
use serde::Serialize;

use crate::error::CliError;

/// Provenance line that opens every output file.
#[derive(Clone, Debug)]
pub struct Header {
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn line(&self) -> String {
        format!(
            "# levymlmc {} config_hash={} seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// CSV with the provenance header; values are written with shortest
/// round-trip formatting.
pub fn csv(name: &str, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> Artifact {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    Artifact {
        name: name.to_string(),
        contents: header.line() + &body,
    }
}

/// One JSON object per line after the provenance header.
pub fn json_lines<T: Serialize>(name: &str, header: &Header, records: &[T]) -> Artifact {
    let mut contents = header.line();
    for r in records {
        contents.push_str(&serde_json::to_string(r).expect("serialisable record"));
        contents.push('\n');
    }
    Artifact {
        name: name.to_string(),
        contents,
    }
}

pub fn reports(header: &Header, reports: &[TestReport]) -> Artifact {
    json_lines("reports.jsonl", header, reports)
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

pub fn num(x: f64) -> String {
    format!("{x}")
}
