//! Versioned JSON and CSV writers. Everything except the wall-clock entry is a
//! function of the configuration, so reruns differ only on that line.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CUSPFLOW_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub elapsed_s: f64,
}

pub struct Clock {
    started: SystemTime,
    t0: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Clock { started: SystemTime::now(), t0: Instant::now() }
    }

    pub fn read(&self) -> WallClock {
        WallClock {
            started_unix_s: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            elapsed_s: self.t0.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: String,
    version: &'a str,
    config: &'a RunConfig,
    gate: &'a Gate,
    result: &'a T,
    wall_clock: WallClock,
}

pub fn schema(command: &str) -> String {
    format!("cuspflow.{command}/1")
}

fn target(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.join(&cfg.output))
}

pub fn write_json<T: Serialize>(cfg: &RunConfig, gate: &Gate, result: &T, clock: &Clock) -> Result<PathBuf, CliError> {
    let path = target(cfg)?;
    let env = Envelope {
        schema: schema(&cfg.command),
        version: VERSION,
        config: cfg,
        gate,
        result,
        wall_clock: clock.read(),
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Comment header followed by a CSV table with the given header row.
pub fn write_csv<R: Serialize>(
    cfg: &RunConfig,
    gate: &Gate,
    header: &[&str],
    rows: &[R],
    clock: &Clock,
) -> Result<PathBuf, CliError> {
    let path = target(cfg)?;
    let mut buf: Vec<u8> = Vec::new();
    writeln!(buf, "# schema: {}", schema(&cfg.command))?;
    writeln!(buf, "# version: {VERSION}")?;
    writeln!(buf, "# config: {}", serde_json::to_string(cfg)?)?;
    writeln!(buf, "# gate: {}", serde_json::to_string(gate)?)?;
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    let wc = clock.read();
    writeln!(buf, "# wall_clock: started_unix_s={:.3} elapsed_s={:.3}", wc.started_unix_s, wc.elapsed_s)?;
    fs::write(&path, buf)?;
    Ok(path)
}
