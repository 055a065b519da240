use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

pub fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

pub fn open(path: &Path) -> Result<Box<dyn Write>> {
    if is_stdout(path) {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

pub fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut out = open(path)?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Summary text goes to stdout unless stdout carries JSONL.
pub fn summary_sink(jsonl: Option<&Path>) -> Box<dyn Write> {
    if jsonl.is_some_and(is_stdout) {
        Box::new(io::stderr())
    } else {
        Box::new(io::stdout())
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}
