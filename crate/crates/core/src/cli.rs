//! Command-line front end.
//!
//! Settings come from a flat `key = value` file (`--config`), then
//! `GELATO_<KEY>` environment variables, then command flags, each layer
//! overriding the previous one. All problems with the merged settings are
//! reported together before any work starts. Every command that writes
//! files also writes `manifest.txt` beside them; the manifest is itself a
//! valid configuration file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{GelatoError, Result};
use crate::graph::{load_graph, pair_count, AttributedGraph, NodePair};
use crate::heuristics::{score_pairs, with_isolated_self_loops, Metric};
use crate::metrics::{auc_and_curves, inflation_demo, rank_metrics, InflationSetup};
use crate::partition::{balance_cap, modularity, partition, PartitionConfig, Partitioning};
use crate::sbm::{
    biased_expected_accuracy, expected_accuracy, expected_autocov_t1, pair_census, sample_sbm, theorem1_default_grid,
    theorem1_table, verify_lemma1, verify_lemma2, AttrMode, ClassifierSpec, PairKind, SbmParams,
};
use crate::splits::{
    biased_split, load_split, negative_pair_count, partitioned_split, read_pair_file, save_split, unbiased_split, Regime,
    DEFAULT_RATIOS,
};
use crate::trainer::{grid_search, history_tsv, train, Grid, ModelState, TrainConfig};

#[derive(Clone, Copy, Debug)]
enum Kind {
    InPath,
    OutDir,
    Int,
    Seed,
    Real,
    Unit,
    Choice(&'static [&'static str]),
    IntList,
    Ratios,
    Bool,
}

const KEYS: &[(&str, Kind)] = &[
    ("edges", Kind::InPath),
    ("attrs", Kind::InPath),
    ("partition", Kind::InPath),
    ("split", Kind::InPath),
    ("model", Kind::InPath),
    ("pairs", Kind::InPath),
    ("out", Kind::OutDir),
    ("seed", Kind::Seed),
    ("threads", Kind::Int),
    ("k", Kind::Int),
    ("n", Kind::Int),
    ("p", Kind::Unit),
    ("q", Kind::Unit),
    ("sigma", Kind::Real),
    ("regime", Kind::Choice(&["unbiased", "biased", "partitioned"])),
    ("ratios", Kind::Ratios),
    ("neg_per_pos", Kind::Real),
    ("metric", Kind::Choice(&["cn", "aa", "ac"])),
    ("t", Kind::Int),
    ("block_size", Kind::Int),
    ("epochs", Kind::Int),
    ("batch_size", Kind::Int),
    ("contrast", Kind::Int),
    ("hidden", Kind::Int),
    ("lr", Kind::Real),
    ("dropout", Kind::Unit),
    ("alpha", Kind::Unit),
    ("beta", Kind::Unit),
    ("eta", Kind::Real),
    ("mode", Kind::Choice(&["undirected", "directed"])),
    ("grid", Kind::Bool),
    ("k_list", Kind::IntList),
    ("k_sequence", Kind::IntList),
    ("runs", Kind::Int),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

fn check_value(key: &str, kind: Kind, v: &str) -> std::result::Result<(), String> {
    let list = |v: &str| -> std::result::Result<Vec<f64>, String> {
        v.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("{key}: {x:?} is not a number")))
            .collect()
    };
    match kind {
        Kind::InPath => {
            if !Path::new(v).exists() {
                return Err(format!("{key}: {v} does not exist"));
            }
        }
        Kind::OutDir => {
            if Path::new(v).is_file() {
                return Err(format!("{key}: {v} is a file, expected a directory"));
            }
        }
        Kind::Int => {
            v.parse::<usize>().map_err(|_| format!("{key}: expected a non-negative integer, got {v:?}"))?;
        }
        Kind::Seed => {
            v.parse::<u64>().map_err(|_| format!("{key}: expected an unsigned integer, got {v:?}"))?;
        }
        Kind::Real => {
            let x = v.parse::<f64>().map_err(|_| format!("{key}: expected a number, got {v:?}"))?;
            if !x.is_finite() || x < 0.0 {
                return Err(format!("{key}: expected a finite non-negative number, got {v}"));
            }
        }
        Kind::Unit => {
            let x = v.parse::<f64>().map_err(|_| format!("{key}: expected a number, got {v:?}"))?;
            if !(0.0..=1.0).contains(&x) {
                return Err(format!("{key}: expected a value in [0, 1], got {v}"));
            }
        }
        Kind::Choice(options) => {
            if !options.contains(&v) {
                return Err(format!("{key}: expected one of {}, got {v:?}", options.join("|")));
            }
        }
        Kind::IntList => {
            for x in v.split(',') {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("{key}: {x:?} is not a non-negative integer"))?;
            }
        }
        Kind::Ratios => {
            let r = list(v)?;
            if r.len() != 3 || r.iter().any(|x| *x < 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(format!("{key}: expected three non-negative ratios summing to 1, got {v:?}"));
            }
        }
        Kind::Bool => {
            if !matches!(v, "true" | "false") {
                return Err(format!("{key}: expected true or false, got {v:?}"));
            }
        }
    }
    Ok(())
}

/// Merged, validated settings for one command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Merge the layers and validate. `required` keys must be present after merging.
    pub fn resolve(
        file: Option<&Path>,
        env: &[(String, String)],
        flags: &[(String, String)],
        required: &[&str],
    ) -> Result<Self> {
        let mut problems = Vec::new();
        let mut values = BTreeMap::new();
        if let Some(path) = file {
            match fs::read_to_string(path) {
                Ok(text) => {
                    for (i, raw) in text.lines().enumerate() {
                        let line = raw.trim();
                        if line.is_empty() || line.starts_with('#') {
                            continue;
                        }
                        match line.split_once('=') {
                            Some((k, v)) => {
                                values.insert(k.trim().to_string(), v.trim().to_string());
                            }
                            None => problems.push(format!("{}:{}: expected key = value", path.display(), i + 1)),
                        }
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", path.display())),
            }
        }
        for (k, v) in env {
            if let Some(key) = k.strip_prefix("GELATO_") {
                values.insert(key.to_ascii_lowercase(), v.clone());
            }
        }
        for (k, v) in flags {
            values.insert(k.clone(), v.clone());
        }
        for (k, v) in &values {
            match kind_of(k) {
                None => problems.push(format!("unknown key {k:?}")),
                Some(kind) => {
                    if let Err(p) = check_value(k, kind, v) {
                        problems.push(p);
                    }
                }
            }
        }
        for key in required {
            if !values.contains_key(*key) {
                problems.push(format!("missing required key {key:?}"));
            }
        }
        if problems.is_empty() {
            Ok(RunConfig { values })
        } else {
            Err(GelatoError::Config(problems))
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    fn required_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| GelatoError::Config(vec![format!("missing required key {key:?}")]))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> usize {
        self.get(key).map_or(default, |v| v.parse().expect("validated"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).map_or(default, |v| v.parse().expect("validated"))
    }

    pub fn seed(&self) -> u64 {
        self.get("seed").map_or(0, |v| v.parse().expect("validated"))
    }

    pub fn list(&self, key: &str) -> Option<Vec<usize>> {
        self.get(key)
            .map(|v| v.split(',').map(|x| x.trim().parse().expect("validated")).collect())
    }

    pub fn flag(&self, key: &str) -> bool {
        self.get(key) == Some("true")
    }

    pub fn ratios(&self) -> [f64; 3] {
        match self.get("ratios") {
            None => DEFAULT_RATIOS,
            Some(v) => {
                let r: Vec<f64> = v.split(',').map(|x| x.trim().parse().expect("validated")).collect();
                [r[0], r[1], r[2]]
            }
        }
    }

    /// `key = value` lines in key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn set_default(&mut self, key: &str, value: impl ToString) {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }
}

#[derive(Parser, Debug)]
#[command(name = "gelato", version, about = "Attribute-enhanced Autocovariance link prediction")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override any configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct GraphArgs {
    /// Edge list: `u v [w]` per line.
    #[arg(long)]
    pub edges: Option<String>,
    /// Attribute matrix with an `n r` header.
    #[arg(long)]
    pub attrs: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SbmArgs {
    /// Number of blocks.
    #[arg(long)]
    pub k: Option<String>,
    /// Nodes per block.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Partition a graph into k balanced blocks.
    Partition {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        k: Option<String>,
    },
    /// Split edges into train/validation/test pair sets.
    Split {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        regime: Option<String>,
        /// Number of blocks for the partitioned regime.
        #[arg(long)]
        k: Option<String>,
        /// Existing partition file for the partitioned regime.
        #[arg(long)]
        partition: Option<String>,
        /// Comma-separated train,valid,test ratios.
        #[arg(long)]
        ratios: Option<String>,
        #[arg(long)]
        neg_per_pos: Option<String>,
    },
    /// Score pairs with a topological heuristic.
    Heuristic {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        t: Option<String>,
        /// Pair list to score on the full graph.
        #[arg(long)]
        pairs: Option<String>,
        /// Split file: score its test pairs with test positives hidden.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        block_size: Option<String>,
    },
    /// Train the edge-weight network.
    Train {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        epochs: Option<String>,
        #[arg(long)]
        batch_size: Option<String>,
        #[arg(long)]
        contrast: Option<String>,
        #[arg(long)]
        hidden: Option<String>,
        #[arg(long)]
        lr: Option<String>,
        #[arg(long)]
        dropout: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        beta: Option<String>,
        #[arg(long)]
        eta: Option<String>,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        /// Search the default alpha/beta/eta grid.
        #[arg(long)]
        grid: bool,
        #[arg(long)]
        block_size: Option<String>,
    },
    /// Evaluate a model or heuristic on the test split.
    Eval {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        model: Option<String>,
        /// Heuristic to evaluate when no model is given.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        t: Option<String>,
        /// Comma-separated k values for hits@k and prec@k.
        #[arg(long = "k")]
        k_list: Option<String>,
        #[arg(long)]
        block_size: Option<String>,
    },
    /// Stochastic block model utilities.
    Sbm {
        #[command(subcommand)]
        command: SbmCommand,
    },
    /// Numeric checks of the analysis.
    Verify {
        #[command(subcommand)]
        command: VerifyCommand,
    },
}

#[derive(Subcommand, Debug)]
pub enum SbmCommand {
    /// Sample an attributed SBM graph.
    Sample {
        #[command(flatten)]
        params: SbmArgs,
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Expected pair counts and classifier accuracies.
    Census {
        #[command(flatten)]
        params: SbmArgs,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum VerifyCommand {
    /// All-negative versus within-block classifier accuracy over a grid.
    Theorem1 {
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Metric inflation under biased testing.
    Inflation {
        #[arg(long)]
        out: Option<String>,
    },
    /// Pair census of a large SBM.
    Census {
        #[command(flatten)]
        params: SbmArgs,
        #[arg(long)]
        out: Option<String>,
    },
    /// Intra- versus inter-block Autocovariance on sampled SBMs.
    Lemma1 {
        #[command(flatten)]
        params: SbmArgs,
        #[arg(long)]
        runs: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Within-block density as the partition count grows.
    Lemma2 {
        #[command(flatten)]
        params: SbmArgs,
        #[arg(long)]
        edges: Option<String>,
        #[arg(long)]
        k_sequence: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
}

macro_rules! flags {
    ($v:ident; $($src:expr => $key:literal),* $(,)?) => {
        $( if let Some(x) = &$src { $v.push(($key.to_string(), x.clone())); } )*
    };
}

fn graph_flags(v: &mut Vec<(String, String)>, g: &GraphArgs) {
    flags!(v; g.edges => "edges", g.attrs => "attrs", g.out => "out", g.seed => "seed");
}

fn sbm_flags(v: &mut Vec<(String, String)>, s: &SbmArgs) {
    flags!(v; s.k => "k", s.n => "n", s.p => "p", s.q => "q");
}

/// Configuration keys set by flags, and the keys the command requires.
fn command_flags(cmd: &Command) -> (&'static str, Vec<(String, String)>, Vec<&'static str>) {
    let mut v = Vec::new();
    match cmd {
        Command::Partition { graph, k } => {
            graph_flags(&mut v, graph);
            flags!(v; k => "k");
            ("partition", v, vec!["edges", "k", "out"])
        }
        Command::Split {
            graph,
            regime,
            k,
            partition,
            ratios,
            neg_per_pos,
        } => {
            graph_flags(&mut v, graph);
            flags!(v; regime => "regime", k => "k", partition => "partition", ratios => "ratios", neg_per_pos => "neg_per_pos");
            ("split", v, vec!["edges", "regime", "out"])
        }
        Command::Heuristic {
            graph,
            metric,
            t,
            pairs,
            split,
            block_size,
        } => {
            graph_flags(&mut v, graph);
            flags!(v; metric => "metric", t => "t", pairs => "pairs", split => "split", block_size => "block_size");
            ("heuristic", v, vec!["edges", "out"])
        }
        Command::Train {
            graph,
            split,
            epochs,
            batch_size,
            contrast,
            hidden,
            lr,
            dropout,
            alpha,
            beta,
            eta,
            t,
            mode,
            grid,
            block_size,
        } => {
            graph_flags(&mut v, graph);
            flags!(v; split => "split", epochs => "epochs", batch_size => "batch_size", contrast => "contrast",
                hidden => "hidden", lr => "lr", dropout => "dropout", alpha => "alpha", beta => "beta", eta => "eta",
                t => "t", mode => "mode", block_size => "block_size");
            if *grid {
                v.push(("grid".to_string(), "true".to_string()));
            }
            ("train", v, vec!["edges", "split", "out"])
        }
        Command::Eval {
            graph,
            split,
            model,
            metric,
            t,
            k_list,
            block_size,
        } => {
            graph_flags(&mut v, graph);
            flags!(v; split => "split", model => "model", metric => "metric", t => "t", k_list => "k_list", block_size => "block_size");
            ("eval", v, vec!["edges", "split", "out"])
        }
        Command::Sbm { command } => match command {
            SbmCommand::Sample { params, sigma, seed, out } => {
                sbm_flags(&mut v, params);
                flags!(v; sigma => "sigma", seed => "seed", out => "out");
                ("sbm sample", v, vec!["k", "n", "p", "q", "out"])
            }
            SbmCommand::Census { params, out } => {
                sbm_flags(&mut v, params);
                flags!(v; out => "out");
                ("sbm census", v, vec!["k", "n", "p", "q"])
            }
        },
        Command::Verify { command } => match command {
            VerifyCommand::Theorem1 { out, .. } => {
                flags!(v; out => "out");
                ("verify theorem1", v, vec![])
            }
            VerifyCommand::Inflation { out } => {
                flags!(v; out => "out");
                ("verify inflation", v, vec![])
            }
            VerifyCommand::Census { params, out } => {
                sbm_flags(&mut v, params);
                flags!(v; out => "out");
                ("verify census", v, vec![])
            }
            VerifyCommand::Lemma1 { params, runs, seed, out } => {
                sbm_flags(&mut v, params);
                flags!(v; runs => "runs", seed => "seed", out => "out");
                ("verify lemma1", v, vec![])
            }
            VerifyCommand::Lemma2 {
                params,
                edges,
                k_sequence,
                seed,
                out,
            } => {
                sbm_flags(&mut v, params);
                flags!(v; edges => "edges", k_sequence => "k_sequence", seed => "seed", out => "out");
                ("verify lemma2", v, vec![])
            }
        },
    }
}

/// Run a parsed command line. `env` holds the `GELATO_*` variables in effect;
/// tables meant for the terminal go to `stdout`.
pub fn run(cli: Cli, env: &[(String, String)], stdout: &mut dyn Write) -> Result<()> {
    let (name, mut flags, required) = command_flags(&cli.command);
    let mut problems = Vec::new();
    for s in &cli.set {
        match s.split_once('=') {
            Some((k, v)) => flags.push((k.trim().to_string(), v.trim().to_string())),
            None => problems.push(format!("--set expects KEY=VALUE, got {s:?}")),
        }
    }
    let resolved = RunConfig::resolve(cli.config.as_deref(), env, &flags, &required);
    let mut cfg = match (resolved, problems.is_empty()) {
        (Ok(cfg), true) => cfg,
        (Ok(_), false) => return Err(GelatoError::Config(problems)),
        (Err(GelatoError::Config(mut more)), _) => {
            problems.append(&mut more);
            return Err(GelatoError::Config(problems));
        }
        (Err(e), _) => return Err(e),
    };
    if let VerifyCommand::Theorem1 { grid, .. } = match &cli.command {
        Command::Verify { command } => command,
        _ => &VerifyCommand::Inflation { out: None },
    } {
        if grid != "default" {
            return Err(GelatoError::Config(vec![format!("unknown grid {grid:?} (only \"default\")")]));
        }
    }
    if let Some(threads) = cfg.get("threads") {
        let threads: usize = threads.parse().expect("validated");
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    cfg.set_default("seed", 0);
    if let Some(out) = cfg.path("out") {
        fs::create_dir_all(&out).map_err(|e| GelatoError::io(&out, e))?;
    }
    match &cli.command {
        Command::Partition { .. } => cmd_partition(&cfg)?,
        Command::Split { .. } => cmd_split(&cfg)?,
        Command::Heuristic { .. } => cmd_heuristic(&cfg)?,
        Command::Train { .. } => cmd_train(&cfg)?,
        Command::Eval { .. } => cmd_eval(&cfg)?,
        Command::Sbm { command } => match command {
            SbmCommand::Sample { .. } => cmd_sbm_sample(&cfg)?,
            SbmCommand::Census { .. } => emit(&cfg, stdout, "census.tsv", &census_table(sbm_params(&cfg, None)?))?,
        },
        Command::Verify { command } => match command {
            VerifyCommand::Theorem1 { .. } => emit(&cfg, stdout, "theorem1.tsv", &verify_theorem1()?)?,
            VerifyCommand::Inflation { .. } => emit(&cfg, stdout, "inflation.tsv", &verify_inflation()?)?,
            VerifyCommand::Census { .. } => emit(&cfg, stdout, "census.tsv", &verify_census(&cfg)?)?,
            VerifyCommand::Lemma1 { .. } => emit(&cfg, stdout, "lemma1.tsv", &cmd_lemma1(&cfg)?)?,
            VerifyCommand::Lemma2 { .. } => emit(&cfg, stdout, "lemma2.tsv", &cmd_lemma2(&cfg)?)?,
        },
    }
    if let Some(out) = cfg.path("out") {
        write_manifest(&out, name, &cfg)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| GelatoError::io(path, e))
}

fn emit(cfg: &RunConfig, stdout: &mut dyn Write, file: &str, text: &str) -> Result<()> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| GelatoError::io("<stdout>", e))?;
    if let Some(out) = cfg.path("out") {
        write_file(&out.join(file), text)?;
    }
    Ok(())
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let text = format!(
        "# gelato manifest\n# command: {command}\n# version: {}\n# created: {created}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    );
    write_file(&out.join("manifest.txt"), &text)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.required_path("out")
}

fn load_input_graph(cfg: &RunConfig) -> Result<AttributedGraph> {
    let edges = cfg.required_path("edges")?;
    load_graph(&edges, cfg.path("attrs").as_deref())
}

fn cmd_partition(cfg: &RunConfig) -> Result<()> {
    let g = load_input_graph(cfg)?;
    let k = cfg.usize_or("k", 1);
    let config = PartitionConfig::default();
    let part = partition(&g, k, cfg.seed(), &config)?;
    let out = out_dir(cfg)?;
    part.save(&out.join("partition.tsv"))?;
    let mut s = String::from("quantity\tvalue\n");
    let _ = writeln!(s, "k\t{}", part.k());
    let _ = writeln!(s, "edge_cut\t{}", part.edge_cut(&g));
    match modularity(&g, &part) {
        Ok(q) => {
            let _ = writeln!(s, "modularity\t{q}");
        }
        Err(_) => s.push_str("modularity\tundefined\n"),
    }
    let _ = writeln!(s, "balance_cap\t{}", balance_cap(g.n(), part.k(), config.imbalance));
    let _ = writeln!(s, "max_block\t{}", part.max_block_size());
    for (b, (size, edges)) in part.block_sizes().iter().zip(part.intra_edge_counts()).enumerate() {
        let _ = writeln!(s, "block_{b}\t{size}\t{edges}");
    }
    write_file(&out.join("partition_summary.tsv"), &s)
}

fn cmd_split(cfg: &RunConfig) -> Result<()> {
    let g = load_input_graph(cfg)?;
    let out = out_dir(cfg)?;
    let seed = cfg.seed();
    let ratios = cfg.ratios();
    let regime = Regime::parse(cfg.get("regime").unwrap_or("unbiased"))?;
    let mut extra = String::new();
    let split = match regime {
        Regime::Unbiased => unbiased_split(&g, ratios, seed)?,
        Regime::Biased => biased_split(&g, ratios, cfg.f64_or("neg_per_pos", 1.0), seed)?,
        Regime::Partitioned => {
            let part = match cfg.path("partition") {
                Some(p) => Partitioning::load(&p, &g)?,
                None => {
                    let k = cfg
                        .get("k")
                        .ok_or_else(|| GelatoError::Config(vec!["partitioned regime needs k or partition".into()]))?
                        .parse()
                        .expect("validated");
                    let part = partition(&g, k, seed, &PartitionConfig::default())?;
                    part.save(&out.join("partition.tsv"))?;
                    part
                }
            };
            let count = negative_pair_count(&part, &g)?;
            let _ = writeln!(extra, "negative_pairs\t{}", count.exact);
            let _ = writeln!(extra, "negative_pairs_literal\t{}", count.literal);
            let _ = writeln!(extra, "unbiased_negative_pairs\t{}", pair_count(g.n()) - g.m());
            partitioned_split(&g, &part, ratios, seed)?
        }
    };
    save_split(&split, &out.join("split.txt"))?;
    let mut s = String::from("section\tcount\n");
    for (name, c) in split.counts() {
        let _ = writeln!(s, "{name}\t{c}");
    }
    s.push_str(&extra);
    write_file(&out.join("counts.tsv"), &s)
}

fn scores_tsv(pairs: &[NodePair], scores: &[f64]) -> String {
    let mut s = String::from("u\tv\tscore\n");
    for (p, x) in pairs.iter().zip(scores) {
        let _ = writeln!(s, "{}\t{}\t{x}", p.u, p.v);
    }
    s
}

fn heuristic_scores(cfg: &RunConfig, structure: &AttributedGraph, pairs: &[NodePair]) -> Result<Vec<f64>> {
    let metric = Metric::parse(cfg.get("metric").unwrap_or("ac"))?;
    let adj = match metric {
        Metric::Autocovariance => with_isolated_self_loops(structure.adjacency()),
        _ => structure.adjacency().clone(),
    };
    score_pairs(&adj, metric, cfg.usize_or("t", 3), pairs, cfg.usize_or("block_size", 512))
}

/// Test pairs of a split (positives first) and the structure they are scored on.
fn test_pairs(g: &AttributedGraph, split_path: &Path) -> Result<(AttributedGraph, Vec<NodePair>, usize, String)> {
    let split = load_split(split_path)?;
    if split.n != g.n() {
        return Err(GelatoError::Dimension {
            expected: g.n(),
            got: split.n,
        });
    }
    let structure = g.with_edges(&split.evaluation_edges(g))?;
    let mut pairs = split.test_pos.clone();
    pairs.extend(split.test_neg.iter());
    Ok((structure, pairs, split.test_pos.len(), split.regime.tag().to_string()))
}

fn cmd_heuristic(cfg: &RunConfig) -> Result<()> {
    let g = load_input_graph(cfg)?;
    let (structure, pairs) = match (cfg.path("pairs"), cfg.path("split")) {
        (Some(p), _) => (g.clone(), read_pair_file(&p)?),
        (None, Some(s)) => {
            let (structure, pairs, _, _) = test_pairs(&g, &s)?;
            (structure, pairs)
        }
        (None, None) => return Err(GelatoError::Config(vec!["heuristic needs pairs or split".into()])),
    };
    let scores = heuristic_scores(cfg, &structure, &pairs)?;
    write_file(&out_dir(cfg)?.join("scores.tsv"), &scores_tsv(&pairs, &scores))
}

fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        lr: cfg.f64_or("lr", d.lr),
        dropout: cfg.f64_or("dropout", d.dropout),
        t: cfg.usize_or("t", d.t),
        epochs: cfg.usize_or("epochs", d.epochs),
        batch_size: cfg.usize_or("batch_size", d.batch_size),
        contrast: cfg.usize_or("contrast", d.contrast),
        seed: cfg.seed(),
        alpha: cfg.f64_or("alpha", d.alpha),
        beta: cfg.f64_or("beta", d.beta),
        eta: cfg.f64_or("eta", d.eta),
        hidden: cfg.usize_or("hidden", d.hidden),
        mode: crate::enhancer::PairMode::parse(cfg.get("mode").unwrap_or("undirected"))?,
        block_size: cfg.usize_or("block_size", d.block_size),
    })
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let g = load_input_graph(cfg)?;
    let split = load_split(&cfg.required_path("split")?)?;
    if split.n != g.n() {
        return Err(GelatoError::Dimension {
            expected: g.n(),
            got: split.n,
        });
    }
    let config = train_config(cfg)?;
    config.validate()?;
    let out = out_dir(cfg)?;
    let outcome = if cfg.flag("grid") {
        let (cells, best) = grid_search(&g, &split, &config, &Grid::default())?;
        let mut s = String::from("alpha\tbeta\teta\tbest_val\tbest_epoch\n");
        for c in cells {
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", c.alpha, c.beta, c.eta, c.best_val, c.best_epoch);
        }
        write_file(&out.join("grid.tsv"), &s)?;
        best
    } else {
        train(&g, &split, &config)?
    };
    outcome.model.save(&out.join("model.txt"), outcome.best_val)?;
    write_file(&out.join("history.tsv"), &history_tsv(&outcome.history))
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let g = load_input_graph(cfg)?;
    let (structure, pairs, n_pos, regime) = test_pairs(&g, &cfg.required_path("split")?)?;
    let scores = match cfg.path("model") {
        Some(path) => {
            let (model, _) = ModelState::load(&path)?;
            if model.net.r != g.attr_dim() && g.attr_dim() > 0 {
                return Err(GelatoError::Dimension {
                    expected: model.net.r,
                    got: g.attr_dim(),
                });
            }
            model.score_pairs(&structure, &pairs, cfg.usize_or("block_size", 512))?
        }
        None => heuristic_scores(cfg, &structure, &pairs)?,
    };
    let (pos, neg) = scores.split_at(n_pos);
    let k_list = cfg
        .list("k_list")
        .unwrap_or_else(|| [10, 50, 100].into_iter().filter(|&k| k <= neg.len()).collect());
    let mut report = rank_metrics(pos, neg, &k_list)?;
    report.regime = regime;
    let out = out_dir(cfg)?;
    report.save(&out.join("report.tsv"))?;
    if !neg.is_empty() {
        let curves = auc_and_curves(pos, neg)?;
        write_file(&out.join("roc.tsv"), &curves.roc_tsv())?;
        write_file(&out.join("pr.tsv"), &curves.pr_tsv())?;
    }
    Ok(())
}

fn sbm_params(cfg: &RunConfig, default: Option<SbmParams>) -> Result<SbmParams> {
    let d = default.unwrap_or(SbmParams {
        k: 4,
        n: 50,
        p: 0.3,
        q: 0.05,
    });
    SbmParams::new(cfg.usize_or("k", d.k), cfg.usize_or("n", d.n), cfg.f64_or("p", d.p), cfg.f64_or("q", d.q))
}

fn cmd_sbm_sample(cfg: &RunConfig) -> Result<()> {
    let params = sbm_params(cfg, None)?;
    let mode = AttrMode::BlockOneHot {
        sigma: cfg.f64_or("sigma", 0.1),
    };
    let g = sample_sbm(params, cfg.seed(), Some(mode))?;
    let out = out_dir(cfg)?;
    g.save(&out.join("edges.txt"), Some(&out.join("attrs.txt")))
}

fn census_table(params: SbmParams) -> String {
    let c = pair_census(params);
    let mut s = String::from("quantity\tvalue\n");
    let rows = [
        ("intra_pos", c.intra_pos),
        ("intra_neg", c.intra_neg),
        ("inter_pos", c.inter_pos),
        ("inter_neg", c.inter_neg),
        ("positives", c.positives()),
        ("negatives", c.negatives()),
        ("unbiased_random_precision", c.unbiased_random_precision()),
        ("biased_random_precision", c.biased_random_precision()),
        ("hard_negative_share", c.hard_negative_share()),
        ("acc_predict_all", expected_accuracy(params, ClassifierSpec::PredictAll)),
        ("acc_predict_none", expected_accuracy(params, ClassifierSpec::PredictNone)),
        ("acc_predict_within", expected_accuracy(params, ClassifierSpec::PredictWithinBlock)),
        ("biased_acc_predict_none", biased_expected_accuracy(params, ClassifierSpec::PredictNone)),
        ("biased_acc_predict_within", biased_expected_accuracy(params, ClassifierSpec::PredictWithinBlock)),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k}\t{v}");
    }
    s
}

fn verify_theorem1() -> Result<String> {
    let rows = theorem1_table(&theorem1_default_grid());
    let mut s = String::from("p\tq\tk\tn\tacc2\tacc3\twinner\n");
    let mut bad = 0;
    for r in &rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.params.p,
            r.params.q,
            r.params.k,
            r.params.n,
            r.acc_none,
            r.acc_within,
            r.winner()
        );
        if !r.consistent() {
            bad += 1;
        }
    }
    if bad > 0 {
        return Err(GelatoError::param(format!(
            "all-negative classifier wins off the p < 0.5 boundary in {bad} cells"
        )));
    }
    let _ = writeln!(
        s,
        "# boundary holds: all-negative wins exactly when p < 0.5 ({} cells)",
        rows.len()
    );
    Ok(s)
}

fn verify_inflation() -> Result<String> {
    let r = inflation_demo(InflationSetup::default())?;
    let mut s = String::from("quantity\tvalue\n");
    let _ = writeln!(s, "biased_auc\t{}", r.biased_auc);
    let _ = writeln!(s, "biased_ap\t{}", r.biased_ap);
    let _ = writeln!(s, "unbiased_auc\t{}", r.unbiased_auc);
    let _ = writeln!(s, "unbiased_ap\t{}", r.unbiased_ap);
    let _ = writeln!(s, "unbiased_precision_full_recall\t{}", r.unbiased_precision_full_recall);
    Ok(s)
}

fn verify_census(cfg: &RunConfig) -> Result<String> {
    let reference = SbmParams {
        k: 10,
        n: 1000,
        p: 0.9,
        q: 0.1,
    };
    let params = sbm_params(cfg, Some(reference))?;
    let mut s = census_table(params);
    if params == reference {
        let c = pair_census(params);
        let ok = (c.inter_neg / 40.5e6 - 1.0).abs() <= 0.005
            && (c.intra_neg / 0.5e6 - 1.0).abs() <= 0.005
            && c.unbiased_random_precision() < 0.22;
        if !ok {
            return Err(GelatoError::param("census disagrees with the reference counts"));
        }
        s.push_str("# reference counts reproduced: 40.5M inter-block and 0.5M intra-block negatives\n");
    }
    Ok(s)
}

fn cmd_lemma1(cfg: &RunConfig) -> Result<String> {
    let params = sbm_params(cfg, None)?;
    let runs = cfg.usize_or("runs", 100);
    let report = verify_lemma1(params, runs, &[1, 3], cfg.seed())?;
    let mut s = String::from("t\twins\truns\n");
    for (t, w) in &report.wins {
        let _ = writeln!(s, "{t}\t{w}\t{runs}");
    }
    let m = pair_census(params).positives();
    let d = 2.0 * m / (params.k * params.n) as f64;
    let gap = expected_autocov_t1(params, PairKind::Intra, d, d, m)? - expected_autocov_t1(params, PairKind::Inter, d, d, m)?;
    let _ = writeln!(s, "# closed-form t=1 gap {gap} = (p - q) / 2m = {}", (params.p - params.q) / (2.0 * m));
    Ok(s)
}

fn cmd_lemma2(cfg: &RunConfig) -> Result<String> {
    let g = match cfg.path("edges") {
        Some(e) => load_graph(&e, None)?,
        None => {
            let params = sbm_params(
                cfg,
                Some(SbmParams {
                    k: 4,
                    n: 50,
                    p: 0.3,
                    q: 0.02,
                }),
            )?;
            sample_sbm(params, cfg.seed(), None)?
        }
    };
    let ks = cfg.list("k_sequence").unwrap_or_else(|| vec![1, 2, 4, 8]);
    let report = verify_lemma2(&g, &ks, cfg.seed())?;
    let mut s = String::from("k\tp_hat_literal\tp_hat_exact\tintra_autocov\n");
    for e in &report.entries {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", e.k, e.p_hat_literal, e.p_hat_exact, e.intra_autocov);
    }
    let _ = writeln!(s, "# monotone\t{}", report.monotone);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn layers_override_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        fs::write(&file, "# comment\nseed = 1\nlr = 0.1\nt = 2\n").unwrap();
        let cfg = RunConfig::resolve(
            Some(&file),
            &kv(&[("GELATO_SEED", "2"), ("GELATO_T", "4")]),
            &kv(&[("t", "5")]),
            &[],
        )
        .unwrap();
        assert_eq!(cfg.seed(), 2);
        assert_eq!(cfg.usize_or("t", 0), 5);
        assert_eq!(cfg.f64_or("lr", 0.0), 0.1);
    }

    #[test]
    fn all_problems_reported_at_once() {
        let err = RunConfig::resolve(
            None,
            &[],
            &kv(&[("bogus", "1"), ("alpha", "2"), ("edges", "/no/such/file"), ("t", "x")]),
            &["out"],
        )
        .unwrap_err();
        match err {
            GelatoError::Config(p) => assert_eq!(p.len(), 5, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_is_a_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::resolve(None, &[], &kv(&[("seed", "7"), ("k", "3")]), &[]).unwrap();
        write_manifest(dir.path(), "partition", &cfg).unwrap();
        let back = RunConfig::resolve(Some(&dir.path().join("manifest.txt")), &[], &[], &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn theorem1_and_inflation_tables() {
        let t = verify_theorem1().unwrap();
        assert!(t.starts_with("p\tq\tk\tn\tacc2\tacc3\twinner\n"));
        assert!(t.lines().last().unwrap().starts_with("# boundary holds"));
        assert!(t.contains("\ttie\n"));
        let i = verify_inflation().unwrap();
        assert_eq!(i.lines().count(), 6);
    }
}
