//! Command-line front end: one subcommand per pipeline stage, plus `pipeline`
//! for the whole chain, `synth` for benchmark data, and `plot` for SVG output.
//!
//! Exit codes: 0 success, 1 stage failure, 2 usage error. Every run with the
//! same flags and seed writes byte-identical CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use clusterlasso::data::{parse_dataset, standardize, Dataset};
use clusterlasso::gmm::EmConfig;
use clusterlasso::lasso::{
    grid_path_with, lars_path, CdConfig, LambdaGrid, LassoProblem,
};
use clusterlasso::modelsel::scan_k;
use clusterlasso::pca::{fit_pca, project};
use clusterlasso::pipeline::{
    cluster_dataset, generate_synth, run_pipeline, Axis, ClusterConfig, Link, PipelineConfig,
    SynthSpec, DEFAULT_THRESHOLDS,
};
use clusterlasso::plot::{render_svg, PlotConfig, PlotError, Series};

#[derive(Parser)]
#[command(name = "clusterlasso", version, about = "Cluster a dataset and rank features by penalized regression paths")]
struct Cli {
    /// Input CSV file.
    #[arg(long, global = true, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Directory output files are written into (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Name of the label column (default: state).
    #[arg(long, global = true, value_name = "NAME")]
    label_col: Option<String>,
    /// Master random seed (default: 0).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Standardize columns to mean 0, sample sd 1 (default: true).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", require_equals = true, value_name = "BOOL")]
    standardize: Option<bool>,
    /// Natural-log transform every matrix entry first (default: false).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", require_equals = true, value_name = "BOOL")]
    log_transform: Option<bool>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Project the data onto leading principal components.
    Pca {
        /// How many components to keep.
        #[arg(long, default_value_t = 3)]
        components: usize,
    },
    /// Scan cluster counts and write the BIC table.
    Scan(ScanArgs),
    /// Scan cluster counts, fit the winner, and write assignments.
    Cluster {
        #[command(flatten)]
        scan: ScanArgs,
        /// Refit the winning K on the raw matrix instead of the scan scores
        /// (default: true).
        #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true, value_name = "BOOL")]
        final_fit_on_raw: Option<bool>,
    },
    /// Trace coefficient trajectories over a descending penalty grid.
    Path(PathArgs),
    /// Cluster, then trace one penalty path per cluster.
    Pipeline(PipelineArgs),
    /// Generate a synthetic dataset with a planted sparse direction.
    Synth(SynthArgs),
    /// Render a path CSV or BIC CSV as an SVG line plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ScanArgs {
    /// Smallest cluster count tried.
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    /// Largest cluster count tried.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Which axis to cluster.
    #[arg(long, value_enum, default_value_t = AxisArg::Features)]
    axis: AxisArg,
    /// Principal components the scan runs on; 0 scans the raw matrix.
    #[arg(long, default_value_t = 3)]
    scan_components: usize,
    /// Random restarts per cluster count.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// EM iteration cap.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Relative log-likelihood change declared converged.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Covariance ridge; omitted picks a data-scaled default.
    #[arg(long)]
    reg: Option<f64>,
}

#[derive(Args)]
struct PathArgs {
    /// Largest penalty on the grid.
    #[arg(long, default_value_t = 0.1)]
    lambda_start: f64,
    /// Smallest penalty kept on the grid.
    #[arg(long, default_value_t = 0.03)]
    lambda_end: f64,
    /// Grid decrement.
    #[arg(long, default_value_t = 0.001)]
    lambda_step: f64,
    /// Coordinate-descent sweep cap.
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Coordinate-update size declared converged.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Emit exact homotopy breakpoints instead of the grid.
    #[arg(long)]
    lars: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// Flat key=value settings file; command-line flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Which axis to cluster.
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    /// Smallest cluster count tried.
    #[arg(long)]
    k_min: Option<usize>,
    /// Largest cluster count tried.
    #[arg(long)]
    k_max: Option<usize>,
    /// Principal components the scan runs on; 0 scans the raw matrix.
    #[arg(long)]
    scan_components: Option<usize>,
    /// Refit the winning K on the raw matrix instead of the scan scores.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true, value_name = "BOOL")]
    final_fit_on_raw: Option<bool>,
    /// Random restarts per cluster count.
    #[arg(long)]
    restarts: Option<usize>,
    /// EM iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Relative log-likelihood change declared converged.
    #[arg(long)]
    tol: Option<f64>,
    /// Covariance ridge; omitted picks a data-scaled default.
    #[arg(long)]
    reg: Option<f64>,
    /// Largest penalty on the grid.
    #[arg(long)]
    lambda_start: Option<f64>,
    /// Smallest penalty kept on the grid.
    #[arg(long)]
    lambda_end: Option<f64>,
    /// Grid decrement.
    #[arg(long)]
    lambda_step: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Rows.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Feature columns.
    #[arg(long, default_value_t = 34)]
    p: usize,
    /// Nonzero entries of the planted direction.
    #[arg(long, default_value_t = 5)]
    s: usize,
    /// Link applied to the latent index.
    #[arg(long, value_enum, default_value_t = LinkArg::Ordinal4)]
    link: LinkArg,
    /// Standard deviation of the latent noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Three strictly increasing ordinal cut points, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "T1,T2,T3")]
    thresholds: Option<Vec<f64>>,
}

#[derive(Args)]
struct PlotArgs {
    /// Output SVG file (default: <output-dir>/plot.svg).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Canvas width in pixels.
    #[arg(long, default_value_t = 800)]
    width: u32,
    /// Canvas height in pixels.
    #[arg(long, default_value_t = 500)]
    height: u32,
    /// Horizontal axis label; defaults to the input kind's natural label.
    #[arg(long)]
    x_label: Option<String>,
    /// Vertical axis label; defaults to the input kind's natural label.
    #[arg(long)]
    y_label: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    /// Cluster the rows.
    Samples,
    /// Cluster the feature columns.
    Features,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Axis {
        match a {
            AxisArg::Samples => Axis::Samples,
            AxisArg::Features => Axis::Features,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LinkArg {
    /// Response is the latent index itself.
    Linear,
    /// Four ordered levels split by the three thresholds.
    Ordinal4,
    /// Two levels by the sign of the latent index.
    Sign,
}

impl From<LinkArg> for Link {
    fn from(l: LinkArg) -> Link {
        match l {
            LinkArg::Linear => Link::Linear,
            LinkArg::Ordinal4 => Link::Ordinal4,
            LinkArg::Sign => Link::Sign,
        }
    }
}

/// Failures carry their exit code: flag and config problems exit 2, anything
/// that goes wrong while running a stage exits 1.
enum CliError {
    Usage(String),
    Stage(String),
}

/// Diagnostics are one line; library errors may embed newlines.
fn flat(s: &str) -> String {
    s.replace('\n', " ")
}

fn stage_msg(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Stage(format!("{what}: {}", flat(&e.to_string())))
}

/// Effective global settings after defaults.
struct Common {
    input: Option<PathBuf>,
    output_dir: PathBuf,
    label_col: String,
    seed: u64,
    standardize: bool,
    log_transform: bool,
}

impl Cli {
    fn common(&self) -> Common {
        Common {
            input: self.input.clone(),
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            label_col: self.label_col.clone().unwrap_or_else(|| "state".to_string()),
            seed: self.seed.unwrap_or(0),
            standardize: self.standardize.unwrap_or(true),
            log_transform: self.log_transform.unwrap_or(false),
        }
    }
}

fn require_input(c: &Common) -> Result<&Path, CliError> {
    c.input
        .as_deref()
        .ok_or_else(|| CliError::Usage("--input is required".to_string()))
}

/// Read the input CSV and apply the shared transform stage: optional ln,
/// then optional standardization, in that order.
fn load_dataset(c: &Common) -> Result<Dataset, CliError> {
    let input = require_input(c)?;
    let text = std::fs::read_to_string(input)
        .map_err(|e| stage_msg(&format!("read {}", input.display()), e))?;
    let mut d = parse_dataset(&text, &c.label_col).map_err(|e| stage_msg("parse", e))?;
    if c.log_transform {
        if d.x.iter().any(|&v| v <= 0.0) {
            return Err(CliError::Stage(
                "transform: log transform requires strictly positive values".to_string(),
            ));
        }
        d.x = d.x.map(f64::ln);
    }
    if c.standardize {
        let (xs, _) = standardize(&d.x).map_err(|e| stage_msg("transform", e))?;
        d.x = xs;
    }
    Ok(d)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| stage_msg(&format!("write {}", dir.display()), e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| stage_msg(&format!("write {}", path.display()), e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(2),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let c = cli.common();
    match &cli.cmd {
        Cmd::Pca { components } => cmd_pca(&c, *components),
        Cmd::Scan(a) => cmd_scan(&c, a),
        Cmd::Cluster {
            scan,
            final_fit_on_raw,
        } => cmd_cluster(&c, scan, *final_fit_on_raw),
        Cmd::Path(a) => cmd_path(&c, a),
        Cmd::Pipeline(p) => cmd_pipeline(cli, p),
        Cmd::Synth(a) => cmd_synth(&c, a),
        Cmd::Plot(a) => cmd_plot(&c, a),
    }
}

fn cmd_pca(c: &Common, components: usize) -> Result<(), CliError> {
    if components < 1 {
        return Err(CliError::Usage("need --components >= 1".to_string()));
    }
    let d = load_dataset(c)?;
    if d.n() < 2 {
        return Err(CliError::Stage("pca: need at least two rows".to_string()));
    }
    let model = fit_pca(&d.x, components).map_err(|e| stage_msg("pca", e))?;
    let scores = project(&model, &d.x).map_err(|e| stage_msg("pca", e))?;
    let mut csv = String::from("row_id");
    for j in 1..=components {
        let _ = write!(csv, ",pc{j}");
    }
    csv.push('\n');
    for i in 0..scores.nrows() {
        let _ = write!(csv, "{}", i + 1);
        for j in 0..scores.ncols() {
            let _ = write!(csv, ",{}", scores[(i, j)]);
        }
        csv.push('\n');
    }
    write_file(&c.output_dir, "projection.csv", &csv)
}

impl ScanArgs {
    /// Checks mirror the library's fit preconditions so bad flags come back
    /// as usage errors instead of panics.
    fn em_config(&self, seed: u64) -> Result<EmConfig, CliError> {
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(CliError::Usage(format!(
                "need 1 <= k-min <= k-max, got {} and {}",
                self.k_min, self.k_max
            )));
        }
        check_em_values(self.restarts, self.max_iter, self.tol, self.reg)?;
        Ok(EmConfig {
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
            reg: self.reg,
            seed,
        })
    }
}

fn check_em_values(
    restarts: usize,
    max_iter: usize,
    tol: f64,
    reg: Option<f64>,
) -> Result<(), CliError> {
    if restarts < 1 {
        return Err(CliError::Usage("need --restarts >= 1".to_string()));
    }
    if max_iter < 1 {
        return Err(CliError::Usage("need --max-iter >= 1".to_string()));
    }
    if !(tol > 0.0) {
        return Err(CliError::Usage("need --tol > 0".to_string()));
    }
    if let Some(r) = reg {
        if !(r > 0.0) {
            return Err(CliError::Usage("need --reg > 0".to_string()));
        }
    }
    Ok(())
}

fn cmd_scan(c: &Common, a: &ScanArgs) -> Result<(), CliError> {
    let em = a.em_config(c.seed)?;
    let d = load_dataset(c)?;
    let raw = match a.axis.into() {
        Axis::Samples => d.x.clone(),
        Axis::Features => d.x.transpose(),
    };
    if raw.nrows() <= a.k_max {
        return Err(CliError::Stage(format!(
            "scan: {} items on the {} axis cannot support K up to {}",
            raw.nrows(),
            Axis::from(a.axis),
            a.k_max
        )));
    }
    let scan_matrix = if a.scan_components == 0 {
        raw
    } else {
        let model = fit_pca(&raw, a.scan_components).map_err(|e| stage_msg("scan", e))?;
        project(&model, &raw).map_err(|e| stage_msg("scan", e))?
    };
    let table = scan_k(&scan_matrix, a.k_min, a.k_max, &em).map_err(|e| stage_msg("scan", e))?;
    println!("best_k = {}", table.best_k);
    write_file(&c.output_dir, "bic.csv", &table.to_csv())
}

fn cmd_cluster(c: &Common, a: &ScanArgs, final_fit_on_raw: Option<bool>) -> Result<(), CliError> {
    let em = a.em_config(c.seed)?;
    let d = load_dataset(c)?;
    let cc = ClusterConfig {
        scan_components: (a.scan_components > 0).then_some(a.scan_components),
        final_fit_on_raw: final_fit_on_raw.unwrap_or(true),
        em,
    };
    let run = cluster_dataset(&d, a.axis.into(), a.k_min, a.k_max, &cc)
        .map_err(|e| stage_msg("cluster", e))?;
    println!("best_k = {}", run.k());
    write_file(&c.output_dir, "bic.csv", &run.bic_table.to_csv())?;
    write_file(&c.output_dir, "assignments.csv", &run.assignments_csv(&d))
}

fn cmd_path(c: &Common, a: &PathArgs) -> Result<(), CliError> {
    let grid = LambdaGrid::new(a.lambda_start, a.lambda_end, a.lambda_step)
        .map_err(|e| CliError::Usage(flat(&e.to_string())))?;
    if a.max_iter < 1 {
        return Err(CliError::Usage("need --max-iter >= 1".to_string()));
    }
    if !(a.tol > 0.0) {
        return Err(CliError::Usage("need --tol > 0".to_string()));
    }
    let d = load_dataset(c)?;
    let y = DVector::from_vec(d.labels_f64());
    let (prob, _, _) = LassoProblem::from_raw(&d.x, &y).map_err(|e| stage_msg("path", e))?;
    let path = if a.lars {
        lars_path(&prob).map_err(|e| stage_msg("path", e))?
    } else {
        let cd = CdConfig {
            max_iter: a.max_iter,
            tol: a.tol,
            warm_start: None,
        };
        grid_path_with(&prob, grid, &cd).map_err(|e| stage_msg("path", e))?
    };
    write_file(&c.output_dir, "path.csv", &path.to_csv(&d.feature_names))
}

/// Every settable key of the pipeline configuration; anything else in a
/// config file is rejected as a usage error.
const CONFIG_KEYS: [&str; 18] = [
    "input",
    "output_dir",
    "label_col",
    "standardize",
    "log_transform",
    "seed",
    "axis",
    "k_min",
    "k_max",
    "scan_components",
    "final_fit_on_raw",
    "restarts",
    "max_iter",
    "tol",
    "reg",
    "lambda_start",
    "lambda_end",
    "lambda_step",
];

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), flat(&e.to_string()))))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected key=value, got {raw:?}",
                i + 1
            )));
        };
        let key = key.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key {key:?}",
                i + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn cfg_get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
            CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {e}"))
        }),
    }
}

fn cmd_pipeline(cli: &Cli, p: &PipelineArgs) -> Result<(), CliError> {
    let file = match &p.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };

    // precedence: flag, then config file, then the built-in default
    let input: PathBuf = cli
        .input
        .clone()
        .or(cfg_get(&file, "input")?)
        .ok_or_else(|| CliError::Usage("--input (or config input=) is required".to_string()))?;
    let output_dir: PathBuf = cli
        .output_dir
        .clone()
        .or(cfg_get(&file, "output_dir")?)
        .unwrap_or_else(|| PathBuf::from("."));
    let label_col = cli
        .label_col
        .clone()
        .or(cfg_get(&file, "label_col")?)
        .unwrap_or_else(|| "state".to_string());
    let standardize = cli.standardize.or(cfg_get(&file, "standardize")?).unwrap_or(true);
    let log_transform = cli
        .log_transform
        .or(cfg_get(&file, "log_transform")?)
        .unwrap_or(false);
    let seed = cli.seed.or(cfg_get(&file, "seed")?).unwrap_or(0);
    let axis = match (p.axis, file.get("axis").map(String::as_str)) {
        (Some(a), _) => a.into(),
        (None, None) => Axis::Features,
        (None, Some("samples")) => Axis::Samples,
        (None, Some("features")) => Axis::Features,
        (None, Some(other)) => {
            return Err(CliError::Usage(format!(
                "config key axis: expected samples or features, got {other:?}"
            )))
        }
    };
    let k_min = p.k_min.or(cfg_get(&file, "k_min")?).unwrap_or(1);
    let k_max = p.k_max.or(cfg_get(&file, "k_max")?).unwrap_or(10);
    let scan_components = p
        .scan_components
        .or(cfg_get(&file, "scan_components")?)
        .unwrap_or(3);
    let final_fit_on_raw = p
        .final_fit_on_raw
        .or(cfg_get(&file, "final_fit_on_raw")?)
        .unwrap_or(true);
    let restarts = p.restarts.or(cfg_get(&file, "restarts")?).unwrap_or(10);
    let max_iter = p.max_iter.or(cfg_get(&file, "max_iter")?).unwrap_or(500);
    let tol = p.tol.or(cfg_get(&file, "tol")?).unwrap_or(1e-8);
    let reg = match p.reg {
        Some(r) => Some(r),
        None => cfg_get(&file, "reg")?,
    };
    let lambda_start = p
        .lambda_start
        .or(cfg_get(&file, "lambda_start")?)
        .unwrap_or(0.1);
    let lambda_end = p.lambda_end.or(cfg_get(&file, "lambda_end")?).unwrap_or(0.03);
    let lambda_step = p
        .lambda_step
        .or(cfg_get(&file, "lambda_step")?)
        .unwrap_or(0.001);

    if k_min < 1 || k_min > k_max {
        return Err(CliError::Usage(format!(
            "need 1 <= k-min <= k-max, got {k_min} and {k_max}"
        )));
    }
    check_em_values(restarts, max_iter, tol, reg)?;
    let grid = LambdaGrid::new(lambda_start, lambda_end, lambda_step)
        .map_err(|e| CliError::Usage(flat(&e.to_string())))?;

    let cfg = PipelineConfig {
        input,
        output_dir,
        label_col,
        standardize,
        log_transform,
        axis,
        k_min,
        k_max,
        cluster: ClusterConfig {
            scan_components: (scan_components > 0).then_some(scan_components),
            final_fit_on_raw,
            em: EmConfig {
                restarts,
                max_iter,
                tol,
                reg,
                seed,
            },
        },
        grid,
    };
    let out = run_pipeline(&cfg).map_err(|e| stage_msg("pipeline", e))?;
    println!("best_k = {}", out.run.k());
    for artifact in &out.artifacts {
        println!("wrote {}", artifact.display());
    }
    Ok(())
}

fn cmd_synth(c: &Common, a: &SynthArgs) -> Result<(), CliError> {
    let thresholds = match &a.thresholds {
        None => DEFAULT_THRESHOLDS,
        Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
        Some(v) => {
            return Err(CliError::Usage(format!(
                "--thresholds takes exactly 3 values, got {}",
                v.len()
            )))
        }
    };
    let spec = SynthSpec {
        n: a.n,
        p: a.p,
        s: a.s,
        link: a.link.into(),
        thresholds,
        noise_sd: a.noise_sd,
        seed: c.seed,
    };
    spec.validate()
        .map_err(|e| CliError::Usage(flat(&e.to_string())))?;
    let data = generate_synth(&spec).map_err(|e| stage_msg("synth", e))?;
    write_file(&c.output_dir, "synth.csv", &data.dataset.to_csv(&c.label_col))?;
    let mut truth = String::from("feature,direction\n");
    for (j, name) in data.dataset.feature_names.iter().enumerate() {
        let _ = writeln!(truth, "{},{}", name, data.direction[j]);
    }
    write_file(&c.output_dir, "synth_truth.csv", &truth)
}

const PATH_HEADER: &str = "lambda,feature,coefficient";
const BIC_HEADER: &str = "K,loglik,n_params,bic,display";

fn malformed(row: usize, what: &str) -> CliError {
    CliError::Stage(format!("plot: malformed input row {row}: {what}"))
}

fn parse_plot_number(field: &str, row: usize, what: &str) -> Result<f64, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| malformed(row, &format!("{what} is not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(malformed(row, &format!("{what} is not finite: {field:?}")));
    }
    Ok(v)
}

/// Long-format path rows become one series per feature, in first-appearance
/// order. `rows` are (0-based line index, text) with the header already taken.
fn parse_path_rows<'a>(
    rows: impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<Series>, CliError> {
    let mut series: Vec<Series> = Vec::new();
    let mut any = false;
    for (i, raw) in rows {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        let [lambda, feature, coefficient] = fields.as_slice() else {
            return Err(malformed(row, "expected lambda,feature,coefficient"));
        };
        let x = parse_plot_number(lambda, row, "lambda")?;
        let y = parse_plot_number(coefficient, row, "coefficient")?;
        let name = feature.trim();
        if name.is_empty() {
            return Err(malformed(row, "empty feature name"));
        }
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((x, y)),
            None => series.push(Series {
                name: name.to_string(),
                points: vec![(x, y)],
            }),
        }
        any = true;
    }
    if !any {
        return Err(CliError::Stage(
            "plot: malformed input: no data rows".to_string(),
        ));
    }
    Ok(series)
}

fn parse_bic_rows<'a>(
    rows: impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<Series>, CliError> {
    let mut points = Vec::new();
    for (i, raw) in rows {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        let [k, loglik, n_params, bic, display] = fields.as_slice() else {
            return Err(malformed(row, "expected K,loglik,n_params,bic,display"));
        };
        let x = parse_plot_number(k, row, "K")?;
        parse_plot_number(loglik, row, "loglik")?;
        parse_plot_number(n_params, row, "n_params")?;
        parse_plot_number(bic, row, "bic")?;
        let y = parse_plot_number(display, row, "display")?;
        points.push((x, y));
    }
    if points.is_empty() {
        return Err(CliError::Stage(
            "plot: malformed input: no data rows".to_string(),
        ));
    }
    Ok(vec![Series {
        name: "BIC".to_string(),
        points,
    }])
}

fn cmd_plot(c: &Common, a: &PlotArgs) -> Result<(), CliError> {
    let input = require_input(c)?;
    let text = std::fs::read_to_string(input)
        .map_err(|e| stage_msg(&format!("read {}", input.display()), e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(CliError::Stage(
            "plot: malformed input: empty file".to_string(),
        ));
    };
    let (series, x_descending, x_default, y_default) = match header.trim() {
        PATH_HEADER => (parse_path_rows(lines)?, true, "lambda", "coefficient"),
        BIC_HEADER => (parse_bic_rows(lines)?, false, "K", "log(bic - min + 1)"),
        other => {
            return Err(malformed(1, &format!("unrecognized header {other:?}")));
        }
    };
    let cfg = PlotConfig {
        width: a.width,
        height: a.height,
        x_label: a.x_label.clone().unwrap_or_else(|| x_default.to_string()),
        y_label: a.y_label.clone().unwrap_or_else(|| y_default.to_string()),
        x_descending,
    };
    let svg = match render_svg(&series, &cfg) {
        Ok(svg) => svg,
        Err(PlotError::InvalidSize { width, height }) => {
            return Err(CliError::Usage(format!(
                "plot area {width}x{height} is too small to draw in"
            )))
        }
        Err(e) => return Err(stage_msg("plot", e)),
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| c.output_dir.join("plot.svg"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| stage_msg(&format!("write {}", parent.display()), e))?;
        }
    }
    std::fs::write(&out, &svg).map_err(|e| stage_msg(&format!("write {}", out.display()), e))?;
    println!("wrote {}", out.display());
    Ok(())
}
