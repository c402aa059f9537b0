//! Command-line front end: `group`, `tune`, `eval`, `gen` and `explain`.
//!
//! Every output file is written to a temporary file in the output directory
//! and renamed into place.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::warn;
use sha2::{Digest, Sha256};

use crate::catalog::{load_catalog, load_gold, write_jsonl, CategoryConfigs, GoldLabel, Product};
use crate::editdist::{levenshtein, normalize_model_number};
use crate::evaluation::{evaluate, render_report, DEFAULT_PRECISION_GATE};
use crate::grouping::{block_key, group_catalog, GroupingOptions, VariantGroup, DEFAULT_THRESHOLD};
use crate::normalize::{family_name_trace, NormalizationRules};
use crate::synthgen::{generate, GeneratorSpec};
use crate::tuning::{apply_tuning, parse_grid, tune_all, tuning_json, TuningOutcome, DEFAULT_GRID};

pub const GROUPS_FILE: &str = "groups.jsonl";
pub const SKIPPED_FILE: &str = "skipped.jsonl";
pub const TUNING_FILE: &str = "tuning.json";
pub const TUNED_CONFIGS_FILE: &str = "tuned_configs.json";
pub const REPORT_FILE: &str = "report.json";
pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const GOLD_FILE: &str = "gold.jsonl";
pub const RULES_FILE: &str = "rules.json";
pub const CONFIGS_FILE: &str = "category_configs.json";

#[derive(Debug, Parser)]
#[command(name = "variant-grouping", version, about = "Group product variants in a retail catalog")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group the catalog into variant families.
    Group(CommonArgs),
    /// Grid-search the model-number threshold per category.
    Tune(CommonArgs),
    /// Score groups against gold labels.
    Eval(CommonArgs),
    /// Generate a synthetic labeled catalog.
    Gen(GenArgs),
    /// Show why a product was or was not grouped.
    Explain {
        product_id: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub configs: Option<PathBuf>,
    /// Groups file to evaluate or explain instead of `<out>/groups.jsonl`.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PRECISION_GATE)]
    pub precision_gate: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub default_threshold: u32,
    /// Comma-separated thresholds, e.g. `0,1,2`.
    #[arg(long, value_parser = grid_arg)]
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Generator spec (JSON); defaults are used for missing keys.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parsed `--grid` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid(pub Vec<u32>);

fn grid_arg(text: &str) -> std::result::Result<Grid, String> {
    parse_grid(text).map(Grid).map_err(|e| e.to_string())
}

/// Paths and knobs shared by the batch commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub catalog: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub configs: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub out: PathBuf,
    pub precision_gate: f64,
    pub default_threshold: u32,
    pub grid: Vec<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            catalog: None,
            gold: None,
            rules: None,
            configs: None,
            groups: None,
            out: PathBuf::from("."),
            precision_gate: DEFAULT_PRECISION_GATE,
            default_threshold: DEFAULT_THRESHOLD,
            grid: DEFAULT_GRID.to_vec(),
        }
    }
}

impl From<CommonArgs> for RunConfig {
    fn from(args: CommonArgs) -> Self {
        Self {
            catalog: args.catalog,
            gold: args.gold,
            rules: args.rules,
            configs: args.configs,
            groups: args.groups,
            out: args.out,
            precision_gate: args.precision_gate,
            default_threshold: args.default_threshold,
            grid: args.grid.map_or_else(|| DEFAULT_GRID.to_vec(), |g| g.0),
        }
    }
}

impl RunConfig {
    fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        let path = path
            .as_deref()
            .ok_or_else(|| anyhow!("missing required flag {flag}"))?;
        if !path.exists() {
            bail!("input {} does not exist", path.display());
        }
        Ok(path)
    }

    /// Checks every given input path exists before any work starts.
    fn check_inputs(&self) -> Result<()> {
        for path in [&self.catalog, &self.gold, &self.rules, &self.configs, &self.groups]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                bail!("input {} does not exist", path.display());
            }
        }
        if !(0.0..=1.0).contains(&self.precision_gate) {
            bail!("--precision-gate {} is outside [0, 1]", self.precision_gate);
        }
        Ok(())
    }

    fn options(&self) -> GroupingOptions {
        GroupingOptions {
            default_threshold: self.default_threshold,
            ..Default::default()
        }
    }

    fn load_catalog(&self) -> Result<Vec<Product>> {
        let path = Self::require(&self.catalog, "--catalog")?;
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        load_catalog(BufReader::new(file)).with_context(|| format!("loading {}", path.display()))
    }

    fn load_gold(&self) -> Result<(Vec<GoldLabel>, String)> {
        let path = Self::require(&self.gold, "--gold")?;
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let labels = load_gold(bytes.as_slice()).with_context(|| format!("loading {}", path.display()))?;
        Ok((labels, format!("{:x}", Sha256::digest(&bytes))))
    }

    fn load_rules(&self) -> Result<NormalizationRules> {
        let path = Self::require(&self.rules, "--rules")?;
        let text = read_text(path)?;
        NormalizationRules::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    fn load_configs(&self) -> Result<CategoryConfigs> {
        match &self.configs {
            None => Ok(CategoryConfigs::new()),
            Some(path) => {
                let text = read_text(path)?;
                CategoryConfigs::from_json(&text).with_context(|| format!("loading {}", path.display()))
            }
        }
    }

    fn groups_path(&self) -> PathBuf {
        self.groups.clone().unwrap_or_else(|| self.out.join(GROUPS_FILE))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes `bytes` to `dir/name` through a temporary file and rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target)
        .with_context(|| format!("writing {}", target.display()))?;
    Ok(())
}

fn jsonl_bytes<T: serde::Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_jsonl(&mut out, records)?;
    Ok(out)
}

fn with_newline(mut text: String) -> Vec<u8> {
    text.push('\n');
    text.into_bytes()
}

fn load_groups(path: &Path) -> Result<Vec<VariantGroup>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}: line {}", path.display(), i + 1))
        })
        .collect()
}

pub fn cmd_group(config: &RunConfig) -> Result<()> {
    config.check_inputs()?;
    let products = config.load_catalog()?;
    let rules = config.load_rules()?;
    let configs = config.load_configs()?;
    let output = group_catalog(&products, &rules, &configs, &config.options())?;
    write_atomic(&config.out, GROUPS_FILE, &jsonl_bytes(&output.groups)?)?;
    write_atomic(&config.out, SKIPPED_FILE, &jsonl_bytes(&output.skipped)?)?;
    Ok(())
}

pub fn cmd_tune(config: &RunConfig) -> Result<()> {
    config.check_inputs()?;
    let products = config.load_catalog()?;
    let (gold, digest) = config.load_gold()?;
    let rules = config.load_rules()?;
    let mut configs = config.load_configs()?;
    let outcomes = tune_all(&products, &gold, &rules, &configs, &config.grid, &config.options())?;
    for outcome in outcomes.values() {
        if let TuningOutcome::Untunable { category, default_threshold } = outcome {
            warn!("category {category:?} has no labeled pairs; keeping threshold {default_threshold}");
        }
    }
    apply_tuning(&mut configs, &outcomes, Some(&digest));
    write_atomic(&config.out, TUNING_FILE, &with_newline(tuning_json(&outcomes)?))?;
    write_atomic(&config.out, TUNED_CONFIGS_FILE, &with_newline(configs.to_json()?))?;
    Ok(())
}

pub fn cmd_eval(config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    config.check_inputs()?;
    let products = config.load_catalog()?;
    let (gold, digest) = config.load_gold()?;
    let groups = match &config.groups {
        Some(path) => load_groups(path)?,
        None => {
            let rules = config.load_rules()?;
            let configs = config.load_configs()?;
            if configs.iter().any(|c| c.tuned_on_gold.as_deref() == Some(digest.as_str())) {
                warn!("thresholds were tuned on these gold labels; scores are optimistic");
            }
            group_catalog(&products, &rules, &configs, &config.options())?.groups
        }
    };
    let report = evaluate(&groups, &gold, &products, config.precision_gate)?;
    let (table, json) = render_report(&report)?;
    write_atomic(&config.out, REPORT_FILE, &with_newline(json))?;
    stdout.write_all(table.as_bytes())?;
    Ok(())
}

pub fn cmd_gen(spec_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut spec = match spec_path {
        Some(path) => GeneratorSpec::from_json(&read_text(path)?)
            .with_context(|| format!("loading {}", path.display()))?,
        None => GeneratorSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let data = generate(&spec)?;
    if !data.separable {
        warn!(
            "spec is inseparable: model gap {} does not exceed {} suffix edits",
            spec.cross_family_model_gap,
            spec.max_suffix_edits()
        );
    }
    write_atomic(out, CATALOG_FILE, &jsonl_bytes(&data.catalog)?)?;
    write_atomic(out, GOLD_FILE, &jsonl_bytes(&data.gold)?)?;
    write_atomic(out, RULES_FILE, &with_newline(data.rules.to_json()?))?;
    write_atomic(out, CONFIGS_FILE, &with_newline(data.configs.to_json()?))?;
    Ok(())
}

pub fn cmd_explain(config: &RunConfig, product_id: &str, stdout: &mut dyn Write) -> Result<()> {
    config.check_inputs()?;
    let products = config.load_catalog()?;
    let rules = config.load_rules()?;
    let configs = config.load_configs()?;
    let groups_path = config.groups_path();
    if !groups_path.exists() {
        bail!("no grouping output at {}; run `group` first", groups_path.display());
    }
    let groups = load_groups(&groups_path)?;
    let product = products
        .iter()
        .find(|p| p.id == product_id)
        .ok_or_else(|| anyhow!("unknown product id {product_id:?}"))?;

    let category_config = configs.get(&product.category);
    let (family, trace) = family_name_trace(product, &rules, category_config);
    let c = configs.threshold_for(&product.category, config.default_threshold);
    let key = normalize_model_number(&product.model_number);

    let mut out = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(out, "product {}", product.id);
    let _ = writeln!(out, "title: {}", product.title);
    let _ = writeln!(out, "brand: {:?}  category: {:?}", product.brand, product.category);
    let _ = writeln!(out, "family name derivation:");
    for (stage, tokens) in &trace {
        let _ = writeln!(out, "  {:<20} [{}]", stage.name(), tokens.join(", "));
    }
    let _ = writeln!(out, "family name: {family}");
    let _ = writeln!(out, "model number: {:?} -> {}", product.model_number, key);
    let _ = writeln!(out, "threshold: c={c}");

    let Some(block) = block_key(product, &rules, &configs, true) else {
        let _ = writeln!(out, "skipped: empty family name");
        stdout.write_all(out.as_bytes())?;
        return Ok(());
    };

    let mut neighbors: Vec<(usize, &str, &str)> = products
        .iter()
        .filter(|q| q.id != product.id)
        .filter(|q| block_key(q, &rules, &configs, true).as_ref() == Some(&block))
        .map(|q| {
            let d = levenshtein(&key, &normalize_model_number(&q.model_number));
            (d, q.id.as_str(), q.model_number.as_str())
        })
        .collect();
    neighbors.sort();
    let _ = writeln!(
        out,
        "block: brand={:?} category={:?} family={} ({} other products)",
        block.brand,
        block.category,
        block.family,
        neighbors.len()
    );
    for (d, id, model) in neighbors.iter().take(10) {
        let _ = writeln!(out, "  {id:<12} {model:<20} distance {d}");
    }

    match groups.iter().find(|g| g.member_ids.iter().any(|m| m == product_id)) {
        Some(group) => {
            let nearest: BTreeMap<_, _> = group.justification.nearest_neighbor_distances.iter().collect();
            let _ = writeln!(out, "members: {}", group.member_ids.join(", "));
            if let Some(d) = nearest.get(&product.id) {
                let _ = writeln!(out, "nearest partner distance: {d}");
            }
            let _ = writeln!(out, "group: {}", group.group_id);
        }
        None => {
            let _ = writeln!(out, "no partner within threshold c={c}");
        }
    }
    stdout.write_all(out.as_bytes())?;
    Ok(())
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Group(args) => cmd_group(&args.into()),
        Command::Tune(args) => cmd_tune(&args.into()),
        Command::Eval(args) => cmd_eval(&args.into(), stdout),
        Command::Gen(args) => cmd_gen(args.spec.as_deref(), args.seed, &args.out),
        Command::Explain { product_id, common } => cmd_explain(&common.into(), &product_id, stdout),
    }
}
