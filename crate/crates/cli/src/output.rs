use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// In-memory CSV table. Floats use `Display`, so the text is '.'-separated
/// and identical across platforms for identical values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn csv(name: &str, table: &Table) -> Self {
        Artifact {
            name: format!("{name}.csv"),
            contents: table.to_csv(),
        }
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        let mut contents = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("serialising {name}: {e}")))?;
        contents.push('\n');
        Ok(Artifact {
            name: format!("{name}.json"),
            contents,
        })
    }
}

/// Writes every artifact to a temporary file in `dir`, then renames them all
/// into place. Temporaries are removed if any write fails.
pub fn commit(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(artifacts.len());
    let result = (|| {
        for a in artifacts {
            let tmp = dir.join(format!(".{}.tmp-{}", a.name, std::process::id()));
            let mut f = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
            staged.push((tmp.clone(), dir.join(&a.name)));
            f.write_all(a.contents.as_bytes())
                .and_then(|_| f.sync_all())
                .map_err(|e| CliError::io(&tmp, e))?;
        }
        for (tmp, dest) in &staged {
            fs::rename(tmp, dest).map_err(|e| CliError::io(dest, e))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    Ok(staged.into_iter().map(|(_, dest)| dest).collect())
}
