//! Option tables, config-file merging and the config hash.
//!
//! Every option is a `--key value` flag and may also appear as `key=value` in
//! the file passed with `--config`. Flags win over the file, the file wins
//! over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use sha2::{Digest, Sha256};

use crate::CliError;

pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    pub default: Option<&'static str>,
    /// Paths and parallelism do not change results and stay out of the hash.
    pub hashed: bool,
}

const fn key(name: &'static str, help: &'static str, default: Option<&'static str>) -> Key {
    Key { name, help, default, hashed: true }
}

const fn unhashed(name: &'static str, help: &'static str, default: Option<&'static str>) -> Key {
    Key { name, help, default, hashed: false }
}

static COMMON: &[Key] = &[
    unhashed("out", "Output directory", Some("out")),
    unhashed("workers", "Worker threads (default: all cores)", None),
    key("format", "Report format: json, csv or both", Some("both")),
];

const EVENTS: Key = unhashed("events", "Event log (CSV, or TSV by extension)", None);
const DELIMITER: Key = key("delimiter", "Field delimiter: auto, comma or tab", Some("auto"));
const DENOMINATOR: Key =
    key("rate-denominator", "Contagion-rate denominator: shared-cascades or at-risk", Some("shared-cascades"));
const PERIOD_MODE: Key = key("period-mode", "Period boundaries: equal-duration or equal-count", Some("equal-duration"));
const SEED: Key = key("seed", "RNG seed (generated and recorded when omitted)", None);

static SOLVER: [Key; 4] = [
    key("initial", "Initial score value", Some("1")),
    key("damping", "Damping factor in (0, 1]", Some("0.5")),
    key("tolerance", "Convergence tolerance on the relative residual", Some("1e-8")),
    key("max-iter", "Iteration cap", Some("100000")),
];

static SIMULATION: [Key; 5] = [
    key("nodes", "Number of nodes", Some("1000")),
    key("mean-degree", "Mean out-degree of the random digraph", Some("10")),
    key("cascades-per-seed", "Cascades started from each node", Some("100")),
    key("max-steps", "Step cap per cascade", None),
    key("remove-fraction", "Fraction of reshare events removed afterwards", Some("0")),
];

pub struct Options {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: Vec<&'static Key>,
}

fn options(name: &'static str, about: &'static str, groups: &[&'static [Key]]) -> Options {
    let keys = groups.iter().flat_map(|g| g.iter()).chain(COMMON).collect();
    Options { name, about, keys }
}

static INGEST: [Key; 4] = [EVENTS, DELIMITER, DENOMINATOR, key("min-count", "Minimum reshare rows per edge", Some("1"))];
static SOLVE: [Key; 7] = [
    EVENTS,
    DELIMITER,
    DENOMINATOR,
    unhashed("edges", "Weighted edge list (src,dst,omega) instead of events", None),
    key("min-count", "Minimum reshare rows per edge", Some("1")),
    key("spectral", "Also report the Jacobian spectral radius: true or false", Some("false")),
    key("spectral-damping", "Damping used for the spectral radius", Some("0.5")),
];
static PREDICT: [Key; 7] = [
    EVENTS,
    DELIMITER,
    DENOMINATOR,
    PERIOD_MODE,
    key("periods", "Number of time periods; each predicts the next", Some("2")),
    key("min-count", "Minimum reshare rows for an edge to be predicted", Some("3")),
    key("direction", "Neighbourhood for similarity indices: in or out", Some("in")),
];
static SUPERSPREAD: [Key; 7] = [
    EVENTS,
    DELIMITER,
    DENOMINATOR,
    key("train-fraction", "Share of cascades (earliest first) used for training", Some("0.8")),
    key("fraction", "Top fraction compared by precision", Some("0.1")),
    key("aggregate", "Per-seed size aggregate: mean or median", Some("mean")),
    key("min-count", "Minimum reshare rows per edge", Some("1")),
];
static STATS: [Key; 6] = [
    EVENTS,
    DELIMITER,
    DENOMINATOR,
    PERIOD_MODE,
    key("periods", "Number of time periods", Some("6")),
    key("quantile", "Top share counted as high in the stylized facts", Some("0.2")),
];
static NULLTEST: [Key; 7] = [
    EVENTS,
    DELIMITER,
    DENOMINATOR,
    SEED,
    key("model", "Null model: weights, rewire or both", Some("both")),
    key("realizations", "Null realizations per statistic", Some("20")),
    key("statistics", "Semicolon-separated statistics such as spearman(I,S); default: all", None),
];
static PIPELINE: [Key; 6] = [
    SEED,
    key("train-fraction", "Share of cascades used for training", Some("0.8")),
    key("fraction", "Top fraction compared by precision", Some("0.1")),
    key("min-count", "Minimum reshare rows for an edge to be predicted", Some("3")),
    key("quantile", "Top share counted as high in the stylized facts", Some("0.2")),
    DENOMINATOR,
];
static SIMULATE_EXTRA: [Key; 1] = [SEED];

pub fn subcommands() -> Vec<Options> {
    vec![
        options("ingest", "Parse an event log and write the diffusion network", &[&INGEST]),
        options("simulate", "Generate ground truth and a synthetic cascade corpus", &[&SIMULATION, &SIMULATE_EXTRA]),
        options("solve", "Reconstruct influence and susceptibility scores", &[&SOLVE, &SOLVER]),
        options("predict", "Compare contagion-rate predictors across time periods", &[&PREDICT, &SOLVER]),
        options("superspread", "Rank seeds and measure precision against realized cascade sizes", &[&SUPERSPREAD, &SOLVER]),
        options("stats", "Per-period correlations, assortativity and stylized facts", &[&STATS, &SOLVER]),
        options("nulltest", "Null-model p-values for node-level statistics", &[&NULLTEST, &SOLVER]),
        options("pipeline", "Simulate, reconstruct and evaluate in one run", &[&SIMULATION, &PIPELINE, &SOLVER]),
    ]
}

pub fn command() -> Command {
    let mut cmd = Command::new("contagion")
        .about("Influence and susceptibility reconstruction from cascade data")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for s in subcommands() {
        let mut sub = Command::new(s.name).about(s.about).arg(
            Arg::new("config").long("config").value_name("FILE").help("key=value file; flags override it"),
        );
        for k in &s.keys {
            let mut arg = Arg::new(k.name).long(k.name).value_name("VALUE").help(k.help);
            if let Some(d) = k.default {
                arg = arg.default_value(d);
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Fully resolved options of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: String,
    pub values: BTreeMap<String, String>,
    hashed: Vec<String>,
}

fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(subcommand: &str, matches: &ArgMatches) -> Result<Self, CliError> {
        let opts = subcommands().into_iter().find(|s| s.name == subcommand).expect("registered subcommand");
        let file = match matches.get_one::<String>("config") {
            Some(p) => parse_file(Path::new(p))?,
            None => BTreeMap::new(),
        };
        if let Some(unknown) = file.keys().find(|k| !opts.keys.iter().any(|s| s.name == k.as_str())) {
            return Err(CliError::config(format!("unknown key `{unknown}` for `{subcommand}`")));
        }
        let mut values = BTreeMap::new();
        for k in &opts.keys {
            let flag = matches.get_one::<String>(k.name);
            let from_cli = matches.value_source(k.name) == Some(ValueSource::CommandLine);
            let value = match (from_cli, file.get(k.name)) {
                (true, _) => flag.cloned(),
                (false, Some(v)) => Some(v.clone()),
                (false, None) => flag.cloned(),
            };
            if let Some(v) = value {
                values.insert(k.name.to_owned(), v);
            }
        }
        let hashed = opts.keys.iter().filter(|k| k.hashed).map(|k| k.name.to_owned()).collect();
        Ok(RunConfig { subcommand: subcommand.to_owned(), values, hashed })
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::config(format!("invalid value `{v}` for {key}: {e}"))))
            .transpose()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(key)?.ok_or_else(|| CliError::config(format!("missing required option --{key}")))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.get::<String>(key).map(PathBuf::from)
    }

    /// Returns the seed, drawing and recording one when none was given.
    pub fn seed(&mut self) -> Result<u64, CliError> {
        if let Some(s) = self.opt::<u64>("seed")? {
            return Ok(s);
        }
        let s: u64 = rand::random();
        log::warn!("no seed given; using generated seed {s}");
        self.values.insert("seed".into(), s.to_string());
        Ok(s)
    }

    /// SHA-256 over the sorted `key=value` lines that affect results.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("subcommand={}\n", self.subcommand));
        for (k, v) in &self.values {
            if self.hashed.contains(k) {
                h.update(format!("{k}={v}\n"));
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
