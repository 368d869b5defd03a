use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use charweb::connection::ConnectionError;
use charweb::generator::GeneratorError;
use charweb::hopf::HopfError;
use charweb::io::{to_json, IoError};
use charweb::system::SystemError;
use charweb::web::WebError;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Format, RunConfig};

pub const SPEC: u8 = 2;
pub const INSUFFICIENT_SAMPLES: u8 = 3;
pub const BREAKDOWN: u8 = 4;
pub const THREE_WEB: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn spec(message: impl Into<String>) -> Self {
        Self {
            code: SPEC,
            message: message.into(),
        }
    }
}

impl From<SystemError> for Failure {
    fn from(e: SystemError) -> Self {
        let code = match e {
            SystemError::InsufficientSamples { .. } => INSUFFICIENT_SAMPLES,
            _ => SPEC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<HopfError> for Failure {
    fn from(e: HopfError) -> Self {
        let code = match e {
            HopfError::BreakdownDetected { .. } => BREAKDOWN,
            _ => SPEC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::System(s) => s.into(),
            IoError::Hopf(h) => h.into(),
            IoError::Web(w) => w.into(),
            e => Failure::spec(e.to_string()),
        }
    }
}

impl From<WebError> for Failure {
    fn from(e: WebError) -> Self {
        let code = match e {
            WebError::Underdetermined { .. } => THREE_WEB,
            _ => SPEC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::System(s) => s.into(),
            e => Failure::spec(e.to_string()),
        }
    }
}

impl From<ConnectionError> for Failure {
    fn from(e: ConnectionError) -> Self {
        match e {
            ConnectionError::System(s) => s.into(),
            e => Failure::spec(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::spec(e.to_string())
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::spec(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::spec(format!("{}: {e}", path.display())))
}

/// Prints the report and, with `--out` and the json format, saves it as
/// `name`.
pub fn emit_report<T: Serialize>(
    config: &RunConfig,
    name: &str,
    report: &T,
) -> Result<(), Failure> {
    let text = to_json(report).map_err(|e| Failure::spec(e.to_string()))?;
    print!("{text}");
    if config.options.wants(Format::Json) {
        save(config, name, |w| Ok(w.write_all(text.as_bytes())?))?;
    }
    Ok(())
}

/// Writes `name` in the output directory, if there is one.
pub fn save(
    config: &RunConfig,
    name: &str,
    write: impl FnOnce(&mut BufWriter<File>) -> Result<(), IoError>,
) -> Result<(), Failure> {
    let Some(dir) = &config.options.out else {
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}
