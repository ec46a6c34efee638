//! `key = value` configuration files with `[section]` headers.
//!
//! Keys before any header or under `[common]` apply to every subcommand;
//! keys under `[<subcommand>]` apply to that subcommand only and win over
//! common ones. `[run]` holds manifest metadata and is ignored. Command-line
//! flags override everything read from files.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::failure::Failure;

/// One configurable key, mirrored by the `--<name>` flag.
#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    /// Presence flag on the command line (`--name` means `true`).
    pub switch: bool,
}

const fn key(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        switch: false,
    }
}

const fn switch(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        switch: true,
    }
}

pub const COMMON: &[Key] = &[
    key("seed", "Master seed (u64)"),
    key("threads", "Worker threads (default: available cores)"),
    key("out", "Output directory"),
    key("profile", "Default set: desk or large"),
];

pub const SYNTH: &[Key] = &[
    key("mnist-dir", "Directory holding the four MNIST IDX files"),
    key("n-train", "Training samples"),
    key("n-val", "Validation samples"),
    key("pair-fraction", "Fraction of two-digit samples"),
    key("canvas", "Canvas side in pixels"),
    key("margin", "Placement margin inside the centered half-size box"),
    key("glyph-scale", "Glyph magnification"),
    key("ood-letters", "Letters rendered into ood.prds (empty: none)"),
    key("preview", "Validation samples shown in preview.pgm"),
];

pub const AUTOCORR: &[Key] = &[
    key("image", "Input image (.pgm or .prgf)"),
    key("dataset", "Dataset file to take the image from"),
    key("sample", "Sample index within --dataset"),
];

pub const MASK: &[Key] = &[
    key("input", "Autocorrelation grid (.prgf)"),
    key("dataset", "Dataset file to take the autocorrelation from"),
    key("sample", "Sample index within --dataset"),
    key("radius", "Mask radius in pixels"),
];

pub const HIO: &[Key] = &[
    key("dataset", "Dataset file"),
    key("samples", "Number of leading samples to process"),
    key("radii", "Comma-separated mask radii, `full` for none"),
    key("iterations", "HIO iterations per trial"),
    key("trials", "Random restarts"),
    key("beta", "HIO feedback parameter"),
    key("support-box", "Side of the centered support box"),
    key("polish", "Error-reduction iterations after HIO"),
    switch("traces", "Write per-iteration Fourier errors"),
];

pub const TRAIN: &[Key] = &[
    key("train", "Training dataset file"),
    key("val", "Validation dataset file"),
    key("train-limit", "Use only the first N training samples"),
    key("val-limit", "Use only the first N validation samples"),
    key("width", "Base channel width of the network"),
    key("loss-target", "masked or full"),
    key("batch-size", "Mini-batch size"),
    key("momentum", "SGD momentum"),
    key("stage1-epochs", "Unmasked epochs"),
    key("stage1-lr", "Initial unmasked learning rate"),
    key("stage1-lr-final", "Learning rate after the drop"),
    key("stage1-lr-drop", "Epoch of the learning-rate drop"),
    key("stage2-epochs", "Shrinking-mask epochs"),
    key("r-start", "First mask radius"),
    key("r-end", "Last mask radius"),
    key("epochs-per-decrement", "Epochs per one-pixel radius decrement"),
    key("stage2-lr", "Learning rate at the first radius"),
    key("stage2-lr-final", "Learning rate at the last radius"),
    key("stage3-epochs", "Fixed-radius epochs"),
    key("stage3-lr", "Fixed-radius learning rate"),
    key("checkpoint-radii", "Comma-separated radii that get a checkpoint"),
];

pub const EVAL: &[Key] = &[
    key("dataset", "Dataset file"),
    key("samples", "Number of leading samples to evaluate"),
    key("ood", "Optional out-of-distribution dataset appended to the rows"),
    key("checkpoints", "Directory holding ckpt_*.prck files"),
    key("methods", "Comma-separated methods: hio, neural"),
    key("radii", "Comma-separated mask radii, `full` for none"),
    key("iterations", "HIO iterations per trial"),
    key("trials", "HIO random restarts"),
    key("beta", "HIO feedback parameter"),
    key("support-box", "Side of the centered HIO support box"),
    key("polish", "HIO error-reduction iterations"),
    switch("timed", "Record wall-clock times in the CSV"),
];

pub const SUBCOMMANDS: &[(&str, &str, &[Key])] = &[
    ("synth", "Render the MNIST-based training and validation sets", SYNTH),
    ("autocorr", "Autocorrelation of one image", AUTOCORR),
    ("mask", "Apply a disk mask to an autocorrelation", MASK),
    ("hio", "HIO reconstructions over a radius sweep", HIO),
    ("train", "Curriculum training of the network", TRAIN),
    ("eval", "HIO versus network comparison", EVAL),
];

pub fn keys_of(section: &str) -> Option<&'static [Key]> {
    if section == "common" {
        return Some(COMMON);
    }
    SUBCOMMANDS.iter().find(|(n, _, _)| *n == section).map(|(_, _, k)| *k)
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    origin: String,
}

/// Resolved settings of one subcommand; remembers every value it handed out
/// so the manifest can record the complete configuration.
#[derive(Debug)]
pub struct Settings {
    command: &'static str,
    entries: BTreeMap<String, Entry>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Settings {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            entries: BTreeMap::new(),
            resolved: RefCell::new(BTreeMap::new()),
        }
    }

    fn is_known(&self, name: &str) -> bool {
        COMMON.iter().chain(keys_of(self.command).unwrap_or(&[])).any(|k| k.name == name)
    }

    /// Reads a configuration file; every section and key is checked, even
    /// those belonging to other subcommands.
    pub fn load_file(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        self.load_str(&text, &path.display().to_string())
    }

    pub fn load_str(&mut self, text: &str, name: &str) -> Result<(), Failure> {
        let mut section = String::from("common");
        let mut common: BTreeMap<String, Entry> = BTreeMap::new();
        let mut own: BTreeMap<String, Entry> = BTreeMap::new();
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let at = |msg: String| Failure::Config(format!("{name}:{line_no}: {msg}"));
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let inner = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("unterminated section header {line:?}")))?
                    .trim();
                if inner != "run" && keys_of(inner).is_none() {
                    return Err(at(format!("unknown section [{inner}]")));
                }
                section = inner.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if section == "run" {
                continue;
            }
            let allowed = COMMON.iter().chain(keys_of(&section).unwrap_or(&[]));
            if !allowed.clone().any(|key| key.name == k) {
                return Err(at(format!("unknown key {k:?} in [{section}]")));
            }
            if let Some(prev) = seen.insert((section.clone(), k.to_string()), line_no) {
                return Err(at(format!("duplicate key {k:?} (first set on line {prev})")));
            }
            let entry = Entry {
                value: v.to_string(),
                origin: format!("{name}:{line_no}"),
            };
            if section == "common" {
                common.insert(k.to_string(), entry);
            } else if section == self.command {
                own.insert(k.to_string(), entry);
            }
        }
        self.entries.extend(common);
        self.entries.extend(own);
        Ok(())
    }

    /// Command-line value, overriding anything from files.
    pub fn set_flag(&mut self, name: &str, value: String) {
        debug_assert!(self.is_known(name), "flag {name} is not a key of {}", self.command);
        self.entries.insert(
            name.to_string(),
            Entry {
                value,
                origin: format!("--{name}"),
            },
        );
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.entries.get(name).map(|e| e.value.as_str())
    }

    fn record(&self, name: &str, value: &str) {
        self.resolved.borrow_mut().insert(name.to_string(), value.to_string());
    }

    fn parse<T: FromStr>(&self, name: &str) -> Result<Option<T>, Failure>
    where
        T::Err: Display,
    {
        match self.entries.get(name) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| {
                Failure::Config(format!("{}: bad value {:?} for {name}: {err}", e.origin, e.value))
            }),
        }
    }

    pub fn get<T: FromStr + Display>(&self, name: &str, default: T) -> Result<T, Failure>
    where
        T::Err: Display,
    {
        let v = self.parse(name)?.unwrap_or(default);
        self.record(name, &v.to_string());
        Ok(v)
    }

    pub fn get_opt<T: FromStr + Display>(&self, name: &str) -> Result<Option<T>, Failure>
    where
        T::Err: Display,
    {
        let v = self.parse::<T>(name)?;
        if let Some(v) = &v {
            self.record(name, &v.to_string());
        }
        Ok(v)
    }

    pub fn require<T: FromStr + Display>(&self, name: &str) -> Result<T, Failure>
    where
        T::Err: Display,
    {
        self.get_opt(name)?
            .ok_or_else(|| Failure::Config(format!("missing required setting {name} (flag --{name})")))
    }

    /// Comma-separated list; `default` is used when the key is absent.
    pub fn list<T, F>(&self, name: &str, default: &str, parse: F) -> Result<Vec<T>, Failure>
    where
        F: Fn(&str) -> Result<T, String>,
    {
        let (value, origin) = match self.entries.get(name) {
            Some(e) => (e.value.clone(), e.origin.clone()),
            None => (default.to_string(), "default".to_string()),
        };
        let items = value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse(s).map_err(|e| Failure::Config(format!("{origin}: {name}: {e}"))))
            .collect::<Result<Vec<T>, Failure>>()?;
        self.record(name, &value);
        Ok(items)
    }

    /// Every value handed out so far, in key order.
    pub fn snapshot(&self) -> Vec<(String, String)> {
        self.resolved.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_precedence() {
        let mut s = Settings::new("hio");
        s.load_str(
            "# comment\nseed = 3\n[hio]\ntrials = 5\nseed = 4\n[synth]\nn-train = 9\n[run]\nanything = goes\n",
            "cfg",
        )
        .unwrap();
        assert_eq!(s.get::<u64>("seed", 0).unwrap(), 4);
        assert_eq!(s.get::<usize>("trials", 20).unwrap(), 5);
        assert_eq!(s.get::<usize>("iterations", 400).unwrap(), 400);
        s.set_flag("trials", "7".into());
        assert_eq!(s.get::<usize>("trials", 20).unwrap(), 7);
        let snap = s.snapshot();
        assert!(snap.contains(&("iterations".into(), "400".into())));
    }

    #[test]
    fn errors_carry_file_and_line() {
        let mut s = Settings::new("hio");
        let err = s.load_str("seed = 1\n[hio]\nbogus = 2\n", "x.cfg").unwrap_err();
        assert!(err.to_string().contains("x.cfg:3"), "{err}");
        let err = Settings::new("hio").load_str("[nope]\n", "x.cfg").unwrap_err();
        assert!(err.to_string().contains("x.cfg:1"));
        let err = Settings::new("hio").load_str("[hio]\ntrials\n", "x.cfg").unwrap_err();
        assert!(err.to_string().contains("x.cfg:2"));
        let err = Settings::new("hio").load_str("[hio]\ntrials=1\ntrials=2\n", "x.cfg").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let err = Settings::new("hio").load_str("[synth]\ntrials=1\n", "x.cfg").unwrap_err();
        assert!(err.to_string().contains("unknown key"));

        let mut s = Settings::new("hio");
        s.load_str("[hio]\ntrials = many\n", "x.cfg").unwrap();
        let err = s.get::<usize>("trials", 20).unwrap_err();
        assert!(err.to_string().contains("x.cfg:2"), "{err}");
    }

    #[test]
    fn lists() {
        let mut s = Settings::new("hio");
        s.set_flag("radii", "full, 28,23".into());
        let r = s
            .list("radii", "full", |t| {
                phaseret::eval::parse_radius(t).map_err(|e| e.to_string())
            })
            .unwrap();
        assert_eq!(r, vec![None, Some(28), Some(23)]);
    }
}
