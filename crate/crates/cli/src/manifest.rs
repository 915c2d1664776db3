//! Run manifests: what was run, on which system, with which seed.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;
use crate::{Common, Format};

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemIdentity {
    Builtin { name: String },
    File { path: String, sha256: String },
}

impl SystemIdentity {
    pub fn file(path: &Path, bytes: &[u8]) -> Self {
        SystemIdentity::File {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(bytes)),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    command_line: Vec<String>,
    system: Option<SystemIdentity>,
    master_seed: u64,
    toolkit_version: &'static str,
    format: Format,
    jobs: Option<usize>,
    started_unix_seconds: f64,
    wall_time_seconds: f64,
    checks_passed: bool,
    #[serde(skip)]
    out: Option<PathBuf>,
}

impl RunManifest {
    pub fn start(argv: &[String], common: &Common) -> Self {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Self {
            command_line: argv.to_vec(),
            system: None,
            master_seed: common.seed,
            toolkit_version: env!("CARGO_PKG_VERSION"),
            format: common.format,
            jobs: common.jobs,
            started_unix_seconds: started,
            wall_time_seconds: 0.0,
            checks_passed: false,
            out: common.out.clone(),
        }
    }

    pub fn finish(&mut self, system: Option<SystemIdentity>, wall_time: f64, passed: bool) {
        self.system = system;
        self.wall_time_seconds = wall_time;
        self.checks_passed = passed;
    }

    /// File name of the sidecar, relative to the payload's directory.
    pub fn sidecar_name(&self) -> Option<String> {
        let out = self.out.as_ref()?;
        let name = out.file_name()?.to_string_lossy();
        Some(format!("{name}.manifest.json"))
    }

    pub fn write_sidecar(&self, out: &Path) -> Result<(), CliError> {
        let mut path = out.as_os_str().to_owned();
        path.push(".manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", Path::new(&path).display())))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}
