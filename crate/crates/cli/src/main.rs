//! `phaseret` command-line entry point.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{Key, Settings, COMMON, SUBCOMMANDS};
use failure::Failure;

fn arg_for(key: &Key) -> Arg {
    let arg = Arg::new(key.name).long(key.name).help(key.help);
    if key.switch {
        arg.action(ArgAction::SetTrue)
    } else {
        arg.value_name("VALUE").action(ArgAction::Set)
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("phaseret")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Phase retrieval from eroded autocorrelations: HIO and a curriculum-trained network")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about, keys) in SUBCOMMANDS {
        let mut sub = Command::new(*name).about(*about).arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("key = value configuration file; flags override it"),
        );
        for key in COMMON.iter().chain(keys.iter()) {
            sub = sub.arg(arg_for(key));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn settings(name: &'static str, keys: &[Key], m: &ArgMatches) -> Result<Settings, Failure> {
    let mut s = Settings::new(name);
    if let Some(path) = m.get_one::<String>("config") {
        s.load_file(&PathBuf::from(path))?;
    }
    for key in COMMON.iter().chain(keys) {
        if key.switch {
            if m.get_flag(key.name) {
                s.set_flag(key.name, "true".into());
            }
        } else if let Some(v) = m.get_one::<String>(key.name) {
            s.set_flag(key.name, v.clone());
        }
    }
    Ok(s)
}

fn run(m: &ArgMatches) -> Result<(), Failure> {
    let (sub, sm) = m.subcommand().expect("subcommand is required");
    let (name, _, keys) = SUBCOMMANDS
        .iter()
        .find(|(n, _, _)| *n == sub)
        .expect("registered subcommand");
    let s = settings(name, keys, sm)?;
    let default_threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = s.get("threads", default_threads)?;
    if threads == 0 {
        return Err(Failure::Config("threads must be at least 1".into()));
    }
    let ctx = commands::Context::resolve(&s)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let report = match *name {
        "synth" => commands::synth(&s, &ctx),
        "autocorr" => commands::autocorr(&s, &ctx),
        "mask" => commands::mask(&s, &ctx),
        "hio" => commands::hio(&s, &ctx),
        "train" => commands::train(&s, &ctx),
        "eval" => commands::eval(&s, &ctx),
        _ => unreachable!("unregistered subcommand {name}"),
    }?;
    let info = manifest::RunInfo {
        command: name,
        threads,
        inputs: report.inputs,
        outputs: report.outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let path = manifest::write(&ctx.out, &info, &s)?;
    eprintln!("wrote {} files and {}", info.outputs.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("phaseret: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        cli().debug_assert();
    }
}
