use std::path::{Path, PathBuf};

use serde::Serialize;
use si_forge_core::io::{file_digest, write_atomic};

use crate::error::{CliError, CliResult};

pub const TOOL_NAME: &str = "si-forge";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Attached to every report so a result can be traced to exact inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, inputs: &[&Path]) -> CliResult<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: file_digest(p).map_err(|e| CliError::data("io", format!("{}: {e}", p.display())))?,
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(Self {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            command: command.to_string(),
            seed,
            inputs,
        })
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a trailing newline, provenance first.
pub fn report_json<T: Serialize>(provenance: &Provenance, body: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(&Report { provenance, body })
        .map_err(|e| CliError::internal(format!("serializing report: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

pub fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::data("io", format!("{}: {e}", parent.display())))?;
    }
    write_atomic(path, bytes).map_err(|e| CliError::data("io", format!("{}: {e}", path.display())))
}

/// Writes to `out` if given, otherwise to stdout.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => write(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::internal(format!("stdout: {e}")))
        }
    }
}

pub fn require_file(path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::data("io", format!("{}: no such file", path.display())))
    }
}

pub fn require_dir(path: &Path) -> CliResult<PathBuf> {
    if path.is_dir() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::data("io", format!("{}: no such directory", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_leads_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, b"abc").unwrap();
        let p = Provenance::new("test", Some(7), &[&input]).unwrap();
        assert_eq!(
            p.inputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        #[derive(Serialize)]
        struct Body {
            value: f64,
        }
        let json = String::from_utf8(report_json(&p, &Body { value: 0.5 }).unwrap()).unwrap();
        assert!(json.find("provenance").unwrap() < json.find("value").unwrap());
        assert!(json.ends_with("}\n"));
    }

    #[test]
    fn missing_inputs_are_data_errors() {
        let e = Provenance::new("x", None, &[Path::new("/nonexistent/file")]).unwrap_err();
        assert_eq!(e.category.exit_code(), 2);
    }
}
