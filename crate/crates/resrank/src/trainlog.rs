//! Training logs as JSON lines: a header line with the seed and configuration,
//! then one line per epoch.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use resrank_core::training::TrainLog;
use resrank_core::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    seed: u64,
    config: TrainConfig,
}

fn write_line<W: Write, T: Serialize>(w: &mut W, kind: &str, body: &T) -> std::io::Result<()> {
    let mut value = serde_json::to_value(body)?;
    if let Value::Object(map) = &mut value {
        map.insert("kind".into(), Value::from(kind));
    }
    serde_json::to_writer(&mut *w, &value)?;
    w.write_all(b"\n")
}

pub fn write_train_log<W: Write>(mut w: W, log: &TrainLog) -> std::io::Result<()> {
    let header = Header { seed: log.seed, config: log.config.clone() };
    write_line(&mut w, "config", &header)?;
    for e in &log.epochs {
        write_line(&mut w, "epoch", e)?;
    }
    w.flush()
}

pub fn save_train_log(path: impl AsRef<Path>, log: &TrainLog) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    write_train_log(BufWriter::new(File::create(path).map_err(io)?), log).map_err(io)
}

pub fn load_train_log(path: impl AsRef<Path>) -> Result<TrainLog> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut header = None;
    let mut epochs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let mut value: Value = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let kind = value.as_object_mut().and_then(|m| m.remove("kind"));
        match kind.as_ref().and_then(Value::as_str) {
            Some("config") => {
                let h: Header = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
                header = Some((h.seed, h.config));
            }
            Some("epoch") => epochs.push(serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?),
            _ => return Err(parse_err("missing or unknown \"kind\"".into())),
        }
    }
    let (seed, config) = header.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "missing config header".into(),
    })?;
    Ok(TrainLog { seed, config, epochs })
}
