use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const TOOL: &str = "behalign";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub fn digest(role: &str, path: &Path) -> Result<FileDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
    Missing,
}

impl Cell {
    fn render(&self, format: Format) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) if format == Format::Markdown => format!("{v:.4}"),
            Cell::Num(v) => v.to_string(),
            Cell::Missing if format == Format::Markdown => "n/a".into(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Long per-item listings are left out of markdown output.
    pub detail: bool,
}

impl Table {
    pub fn new(title: &str, headers: &[&str]) -> Self {
        Table {
            title: title.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            detail: false,
        }
    }

    pub fn detail(mut self) -> Self {
        self.detail = true;
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.headers.len());
        self.rows.push(cells);
    }
}

/// What a command hands back: a JSON result plus a tabular view of it.
pub struct Outcome {
    pub result: serde_json::Value,
    pub tables: Vec<Table>,
    /// Files written by the command.
    pub outputs: Vec<FileDigest>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    inputs: &'a [FileDigest],
    #[serde(skip_serializing_if = "<[FileDigest]>::is_empty")]
    outputs: &'a [FileDigest],
    result: &'a serde_json::Value,
}

pub fn render(
    command: &str,
    config: &RunConfig,
    inputs: &[FileDigest],
    outcome: &Outcome,
) -> Result<String, CliError> {
    match config.format {
        Format::Json => {
            let env = Envelope {
                tool: TOOL,
                version: VERSION,
                command,
                config,
                inputs,
                outputs: &outcome.outputs,
                result: &outcome.result,
            };
            let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => render_csv(command, config, inputs, outcome),
        Format::Markdown => Ok(render_markdown(command, config, inputs, outcome)),
    }
}

fn render_csv(
    command: &str,
    config: &RunConfig,
    inputs: &[FileDigest],
    outcome: &Outcome,
) -> Result<String, CliError> {
    let mut s = format!("# {TOOL} {VERSION} {command}\n");
    let cfg = serde_json::to_string(config).expect("config serializes");
    writeln!(s, "# config {cfg}").unwrap();
    for d in inputs {
        writeln!(s, "# input {} {} sha256={}", d.role, d.path, d.sha256).unwrap();
    }
    for d in &outcome.outputs {
        writeln!(s, "# output {} {} sha256={}", d.role, d.path, d.sha256).unwrap();
    }
    for (i, t) in outcome.tables.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        writeln!(s, "# table {}", t.title).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Data(format!("csv output: {e}"));
        w.write_record(&t.headers).map_err(err)?;
        for r in &t.rows {
            w.write_record(r.iter().map(|c| c.render(Format::Csv))).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(format!("csv output: {e}")))?;
        s.push_str(&String::from_utf8(bytes).expect("csv is utf-8"));
    }
    Ok(s)
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

fn render_markdown(command: &str, config: &RunConfig, inputs: &[FileDigest], outcome: &Outcome) -> String {
    let mut s = format!("# {TOOL} {command}\n\nVersion {VERSION}, seed {}.\n", config.seed);
    if !inputs.is_empty() || !outcome.outputs.is_empty() {
        s.push_str("\n| role | path | sha256 |\n|---|---|---|\n");
        for d in inputs.iter().chain(&outcome.outputs) {
            writeln!(s, "| {} | {} | `{}` |", d.role, md_escape(&d.path), d.sha256).unwrap();
        }
    }
    for t in outcome.tables.iter().filter(|t| !t.detail) {
        writeln!(s, "\n## {}\n", t.title).unwrap();
        writeln!(s, "| {} |", t.headers.join(" | ")).unwrap();
        writeln!(s, "|{}", "---|".repeat(t.headers.len())).unwrap();
        for r in &t.rows {
            let cells: Vec<String> = r.iter().map(|c| md_escape(&c.render(Format::Markdown))).collect();
            writeln!(s, "| {} |", cells.join(" | ")).unwrap();
        }
    }
    s.push_str("\n<details><summary>Resolved config</summary>\n\n```toml\n");
    s.push_str(&config.to_toml());
    s.push_str("```\n\n</details>\n");
    s
}
