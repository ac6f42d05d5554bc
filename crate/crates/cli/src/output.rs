use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Metadata written as `#` lines at the top of every CSV.
#[derive(Debug, Clone)]
pub struct Header {
    pub scenario: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub extra: Vec<(String, String)>,
}

impl Header {
    fn render(&self) -> String {
        let mut s = format!(
            "# bae {} {}\n# config_sha256 = {}\n# seed = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.scenario,
            self.config_hash,
            self.seed
        );
        for (k, v) in &self.extra {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s
    }
}

/// Rows are buffered and written in one go, so a failed run leaves no
/// partial file behind.
pub struct Csv {
    path: PathBuf,
    buf: String,
}

impl Csv {
    pub fn new(dir: &Path, name: &str, header: &Header, columns: &[&str]) -> Self {
        let mut buf = header.render();
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Self {
            path: dir.join(name),
            buf,
        }
    }

    pub fn row(&mut self, fields: &[&dyn Display]) {
        let line: Vec<String> = fields.iter().map(|f| f.to_string()).collect();
        self.buf.push_str(&line.join(","));
        self.buf.push('\n');
    }

    pub fn write(self) -> Result<PathBuf, CliError> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        let mut f = fs::File::create(&self.path).map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))?;
        f.write_all(self.buf.as_bytes())
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))?;
        log::info!("wrote {}", self.path.display());
        Ok(self.path)
    }
}

/// Shortest round-trip float formatting, so reruns are byte-identical and
/// nothing is lost.
pub struct F(pub f64);

impl Display for F {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:e}", self.0)
    }
}
