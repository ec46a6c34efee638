//! `manifest.txt`: a configuration file that reproduces the run, plus a
//! `[run]` section of metadata.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Settings;
use crate::failure::Failure;

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

pub fn render(info: &RunInfo<'_>, settings: &Settings) -> String {
    let join = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
    let mut text = String::new();
    text.push_str("# phaseret run manifest; reproduce with --config manifest.txt\n[run]\n");
    let _ = writeln!(text, "subcommand = {}", info.command);
    let _ = writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "threads = {}", info.threads);
    let _ = writeln!(text, "inputs = {}", join(&info.inputs));
    let _ = writeln!(text, "outputs = {}", join(&info.outputs));
    let _ = writeln!(text, "wall_time_s = {:.3}", info.wall_time_s);
    let _ = writeln!(text, "\n[{}]", info.command);
    for (k, v) in settings.snapshot() {
        let _ = writeln!(text, "{k} = {v}");
    }
    text
}

pub fn write(dir: &Path, info: &RunInfo<'_>, settings: &Settings) -> Result<PathBuf, Failure> {
    let path = dir.join("manifest.txt");
    std::fs::write(&path, render(info, settings))?;
    Ok(path)
}
