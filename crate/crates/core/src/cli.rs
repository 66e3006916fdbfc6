//! Command-line surface: `simulate`, `fit`, `export-graphon`, `labels`.
//!
//! Every run is reproducible from its seed: rerunning a command with the
//! same configuration produces byte-identical outputs, and `fit` writes a
//! `config.echo` file with every resolved setting.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graphon::{
    intensity_grid, write_grid_csv, write_grid_pgm, GridMode, Partition, SegmentDistribution,
    SmoothingParameter,
};
use crate::inference::{
    posterior_mean_grid, posterior_predictive, run_isg_sampler, run_lfsg_sampler,
    run_mmsb_sampler, run_sbm_sampler, SamplerConfig,
};
use crate::metrics::{
    auc_roc, average_precision, node_order, precision_at_k, write_metrics, ScoredCells,
};
use crate::models::{
    generate_isg, generate_lfsg, generate_mmsb, generate_sbm, read_state, sample_mmsb_prior,
    sample_prior, write_state, Hyperparameters, ModelKind, StateSnapshot,
};
use crate::relational::RelationalMatrix;
use crate::rng::{phase, substream};

#[derive(Debug, Parser)]
#[command(name = "smoothgraph", version, about = "Smoothing-graphon relational models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Sbm,
    Isg,
    Lfsg,
    Mmsb,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::Sbm => ModelKind::Sbm,
            ModelArg::Isg => ModelKind::Isg,
            ModelArg::Lfsg => ModelKind::Lfsg,
            ModelArg::Mmsb => ModelKind::Mmsb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridModeArg {
    Smooth,
    Piecewise,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a model from the prior and generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Split, fit and evaluate a model on relational data.
    Fit(FitArgs),
    /// Export an intensity grid from a state snapshot or a fitted run.
    ExportGraphon(ExportArgs),
    /// Export posterior label proportions from a fitted run.
    Labels(LabelsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: ModelArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta0: f64,
    /// Fix the smoothing parameter instead of drawing it from Gamma(1, 1).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub model: ModelArg,
    /// Edge list, or a dense 0/1 CSV when the path ends in `.csv`.
    #[arg(long)]
    pub data: PathBuf,
    /// Node count; required for edge-list data.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 0.9)]
    pub train_ratio: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    /// Beta prior shape for block intensities; derived from the training
    /// sparsity when unset.
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta_u: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma_b: f64,
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
    /// Keep diagonal cells observable.
    #[arg(long)]
    pub self_loops: bool,
    /// Also report precision at k = number of positive test cells.
    #[arg(long)]
    pub precision_at_k: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// State snapshot produced by `simulate`.
    #[arg(long, conflicts_with = "run")]
    pub state: Option<PathBuf>,
    /// Run directory produced by `fit` (posterior-mean grid).
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GridModeArg::Smooth)]
    pub mode: GridModeArg,
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    /// Run directory produced by `fit`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse the process arguments, execute, and map errors to exit codes
/// (0 success, 2 usage, 3 data, 4 numerical).
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::ExportGraphon(args) => cmd_export_graphon(&args),
        Command::Labels(args) => cmd_labels(&args),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_to(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let h = Hyperparameters::new(args.alpha0, args.beta0, vec![1.0; args.k], 1.0, 1.0)?;
    create_out_dir(&args.out)?;
    let mut prior_rng = substream(args.seed, &[phase::PRIOR]);
    let mut gen_rng = substream(args.seed, &[phase::GENERATE]);
    let model = ModelKind::from(args.model);

    if model == ModelKind::Mmsb {
        let mut state = sample_mmsb_prior(&h, args.n, &mut prior_rng)?;
        let m = generate_mmsb(&mut state, &mut gen_rng)?;
        write_to(&args.out.join("edges.tsv"), |w| m.write_edge_list(w))?;
        state.labels_s = None;
        state.labels_r = None;
        write_to(&args.out.join("state.txt"), |w| {
            write_state(&StateSnapshot::Mmsb(state.clone()), w)
        })?;
        return Ok(());
    }

    let mut state = sample_prior(&h, args.n, model, &mut prior_rng)?;
    if let Some(lambda) = args.lambda {
        state.lambda = SmoothingParameter::new(lambda)?;
    }
    let m = match model {
        ModelKind::Sbm => generate_sbm(&mut state, &mut gen_rng)?,
        ModelKind::Isg => generate_isg(&mut state, &mut gen_rng)?,
        ModelKind::Lfsg => generate_lfsg(&mut state, &mut gen_rng)?,
        ModelKind::Mmsb => unreachable!(),
    };
    write_to(&args.out.join("edges.tsv"), |w| m.write_edge_list(w))?;

    let mut snapshot = state.clone();
    snapshot.z1 = None;
    snapshot.z2 = None;
    snapshot.labels_s = None;
    snapshot.labels_r = None;
    write_to(&args.out.join("state.txt"), |w| {
        write_state(&StateSnapshot::Latent(snapshot), w)
    })?;

    let mode = if model == ModelKind::Sbm {
        GridMode::Piecewise
    } else {
        GridMode::Smooth
    };
    let grid = intensity_grid(&state.partition, &state.b, state.lambda, args.resolution, mode)?;
    write_to(&args.out.join("graphon.csv"), |w| write_grid_csv(&grid, w))?;
    Ok(())
}

fn load_data(args: &FitArgs) -> Result<RelationalMatrix> {
    let file = fs::File::open(&args.data).map_err(|e| Error::io(&args.data, e))?;
    let reader = BufReader::new(file);
    let is_dense = args
        .data
        .extension()
        .map(|ext| ext.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    if is_dense {
        RelationalMatrix::load_dense_csv(reader, args.self_loops)
    } else {
        let n = args.n.ok_or_else(|| {
            Error::invalid("n", "required when loading edge-list data".to_string())
        })?;
        RelationalMatrix::load_edge_list(reader, n, args.self_loops)
    }
}

/// Default block prior from the training data: alpha0 = S, beta0 = 1 - S
/// with S the positive fraction of the training cells.
fn derive_block_prior(split: &RelationalMatrix) -> Result<(f64, f64)> {
    let train = split.train_pairs();
    let positives: u64 = train.iter().map(|&(i, j)| split.entry(i, j) as u64).sum();
    if train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let s = positives as f64 / train.len() as f64;
    if s <= 0.0 || s >= 1.0 {
        return Err(Error::Data(format!(
            "training sparsity {s} is degenerate; set --alpha0 and --beta0 explicitly"
        )));
    }
    Ok((s, 1.0 - s))
}

fn write_config_echo(path: &Path, args: &FitArgs, n: usize, alpha0: f64, beta0: f64) -> Result<()> {
    write_to(path, |w| {
        writeln!(w, "alpha0 {alpha0}")?;
        writeln!(w, "alpha_u {}", args.alpha_u)?;
        writeln!(w, "beta0 {beta0}")?;
        writeln!(w, "beta_u {}", args.beta_u)?;
        writeln!(w, "burnin {}", args.burnin)?;
        writeln!(w, "data {}", args.data.display())?;
        writeln!(w, "iters {}", args.iters)?;
        writeln!(w, "k {}", args.k)?;
        writeln!(w, "model {}", ModelKind::from(args.model))?;
        writeln!(w, "n {n}")?;
        writeln!(w, "precision_at_k {}", args.precision_at_k)?;
        writeln!(w, "resolution {}", args.resolution)?;
        writeln!(w, "seed {}", args.seed)?;
        writeln!(w, "self_loops {}", args.self_loops)?;
        writeln!(w, "sigma_b {}", args.sigma_b)?;
        writeln!(w, "thin {}", args.thin)?;
        writeln!(w, "train_ratio {}", args.train_ratio)
    })
}

fn write_counts_csv(path: &Path, counts: &Array2<u64>) -> Result<()> {
    write_to(path, |w| {
        for row in counts.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let model = ModelKind::from(args.model);
    let data = load_data(args)?;
    let n = data.n();
    let split = data.row_wise_split(args.train_ratio, &mut substream(args.seed, &[phase::SPLIT]))?;

    let (alpha0, beta0) = match (args.alpha0, args.beta0) {
        (Some(a), Some(b)) => (a, b),
        (None, None) => derive_block_prior(&split)?,
        _ => {
            return Err(Error::invalid(
                "alpha0",
                "set both --alpha0 and --beta0, or neither",
            ))
        }
    };
    let h = Hyperparameters::new(alpha0, beta0, vec![1.0; args.k], 1.0, 1.0)?;
    let cfg = SamplerConfig {
        model,
        iterations: args.iters,
        burn_in: args.burnin,
        thin: args.thin,
        seed: args.seed,
        alpha_u: args.alpha_u,
        beta_u: args.beta_u,
        sigma_b: args.sigma_b,
        ..SamplerConfig::new(model, args.seed)
    };
    cfg.validate()?;

    create_out_dir(&args.out)?;
    write_config_echo(&args.out.join("config.echo"), args, n, alpha0, beta0)?;
    write_to(&args.out.join("mask.csv"), |w| split.write_mask_csv(w))?;

    let trace = match model {
        ModelKind::Sbm => run_sbm_sampler(&split, &h, &cfg)?,
        ModelKind::Isg => run_isg_sampler(&split, &h, &cfg)?,
        ModelKind::Lfsg => run_lfsg_sampler(&split, &h, &cfg)?,
        ModelKind::Mmsb => run_mmsb_sampler(&split, &h, &cfg)?,
    };

    write_to(&args.out.join("trace.csv"), |w| trace.write_csv(w))?;
    write_to(&args.out.join("accept.txt"), |w| trace.acceptance.write_summary(w))?;

    // held-out evaluation
    let scores = posterior_predictive(&trace, &trace.test_pairs)?;
    let truths: Vec<u8> = trace.test_pairs.iter().map(|&(i, j)| split.entry(i, j)).collect();
    let n_test = truths.len();
    let n_pos = truths.iter().filter(|&&t| t == 1).count();
    let cells = ScoredCells::new(scores, truths)?;
    let auc = auc_roc(&cells)?;
    let ap = average_precision(&cells)?;
    let p_at_k = if args.precision_at_k {
        Some(precision_at_k(&cells, n_pos)?)
    } else {
        None
    };
    write_to(&args.out.join("metrics.txt"), |w| {
        write_metrics(w, auc, ap, n_test, n_pos, p_at_k)
    })?;

    if matches!(model, ModelKind::Isg | ModelKind::Lfsg) {
        let grid = posterior_mean_grid(&trace, args.resolution)?;
        write_to(&args.out.join("graphon.csv"), |w| write_grid_csv(&grid, w))?;
        write_to(&args.out.join("graphon.pgm"), |w| write_grid_pgm(&grid, w))?;
        write_to(&args.out.join("coords.csv"), |w| trace.write_coordinates_csv(w))?;
    }
    if let (Some(s), Some(r)) = (&trace.label_counts_s, &trace.label_counts_r) {
        write_counts_csv(&args.out.join("label_counts_s.csv"), s)?;
        write_counts_csv(&args.out.join("label_counts_r.csv"), r)?;
    }
    Ok(())
}

fn read_kv_file(path: &Path) -> Result<std::collections::BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = std::collections::BTreeMap::new();
    for line in text.lines() {
        if let Some((key, value)) = line.split_once(' ') {
            map.insert(key.to_owned(), value.to_owned());
        }
    }
    Ok(map)
}

/// Minimal trace reader for export: lambda, theta1, theta2 and B per
/// retained sample, using the written header for layout.
fn read_trace_csv(path: &Path) -> Result<Vec<(f64, Vec<f64>, Vec<f64>, Array2<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{} is empty", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let k = columns.iter().filter(|c| c.starts_with("theta1_")).count();
    if k == 0 {
        return Err(Error::Data(format!("{} has no theta columns", path.display())));
    }
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::DataLine {
                line: idx + 2,
                msg: format!("expected {} fields, got {}", columns.len(), fields.len()),
            });
        }
        let parse = |tok: &str| -> Result<f64> {
            tok.parse()
                .map_err(|_| Error::Data(format!("bad number {tok:?} in {}", path.display())))
        };
        let lambda = parse(fields[1])?;
        let theta1: Vec<f64> = fields[2..2 + k].iter().map(|t| parse(t)).collect::<Result<_>>()?;
        let theta2: Vec<f64> = fields[2 + k..2 + 2 * k].iter().map(|t| parse(t)).collect::<Result<_>>()?;
        let b_vals: Vec<f64> = fields[2 + 2 * k..2 + 2 * k + k * k]
            .iter()
            .map(|t| parse(t))
            .collect::<Result<_>>()?;
        out.push((lambda, theta1, theta2, Array2::from_shape_vec((k, k), b_vals).unwrap()));
    }
    Ok(out)
}

pub fn cmd_export_graphon(args: &ExportArgs) -> Result<()> {
    create_out_dir(&args.out)?;
    let grid = match (&args.state, &args.run) {
        (Some(state_path), None) => {
            let file = fs::File::open(state_path).map_err(|e| Error::io(state_path, e))?;
            let snapshot = read_state(BufReader::new(file))?;
            let state = match snapshot {
                StateSnapshot::Latent(state) => state,
                StateSnapshot::Mmsb(_) => {
                    return Err(Error::Data(
                        "mmsb snapshots carry no graphon to export".into(),
                    ))
                }
            };
            let mode = match args.mode {
                GridModeArg::Smooth => GridMode::Smooth,
                GridModeArg::Piecewise => GridMode::Piecewise,
            };
            intensity_grid(&state.partition, &state.b, state.lambda, args.resolution, mode)?
        }
        (None, Some(run_dir)) => {
            let config = read_kv_file(&run_dir.join("config.echo"))?;
            match config.get("model").map(String::as_str) {
                Some("isg") | Some("lfsg") => {}
                Some(other) => {
                    return Err(Error::Data(format!(
                        "run of model {other} has no smoothing graphon to export"
                    )))
                }
                None => return Err(Error::Data("config.echo lacks a model entry".into())),
            }
            let samples = read_trace_csv(&run_dir.join("trace.csv"))?;
            if samples.is_empty() {
                return Err(Error::Data("trace.csv holds no samples".into()));
            }
            let mut acc: Option<Array2<f64>> = None;
            let count = samples.len() as f64;
            for (lambda, theta1, theta2, b) in samples {
                let partition = Partition::new(
                    SegmentDistribution::new(theta1)?,
                    SegmentDistribution::new(theta2)?,
                )?;
                let b = crate::graphon::BlockIntensities::new(b)?;
                let grid = intensity_grid(
                    &partition,
                    &b,
                    SmoothingParameter::new(lambda)?,
                    args.resolution,
                    GridMode::Smooth,
                )?;
                acc = Some(match acc {
                    None => grid,
                    Some(mut a) => {
                        a += &grid;
                        a
                    }
                });
            }
            let mut grid = acc.unwrap();
            grid /= count;
            grid
        }
        _ => {
            return Err(Error::invalid(
                "state",
                "provide exactly one of --state or --run",
            ))
        }
    };
    write_to(&args.out.join("graphon.csv"), |w| write_grid_csv(&grid, w))?;
    write_to(&args.out.join("graphon.pgm"), |w| write_grid_pgm(&grid, w))?;
    Ok(())
}

fn read_counts_csv(path: &Path, kind_hint: &str) -> Result<Array2<u64>> {
    let text = fs::read_to_string(path).map_err(|_| {
        Error::Data(format!(
            "run of model {kind_hint} does not retain hidden labels ({} missing)",
            path.display()
        ))
    })?;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row: Result<Vec<u64>> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<u64>().map_err(|_| Error::DataLine {
                    line: idx + 1,
                    msg: format!("bad count {tok:?}"),
                })
            })
            .collect();
        rows.push(row?);
    }
    let n = rows.len();
    let k = rows.first().map(|r| r.len()).unwrap_or(0);
    if n == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Data(format!("{} is malformed", path.display())));
    }
    let flat: Vec<u64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, k), flat).unwrap())
}

pub fn cmd_labels(args: &LabelsArgs) -> Result<()> {
    let config = read_kv_file(&args.run.join("config.echo"))?;
    let model = config
        .get("model")
        .cloned()
        .unwrap_or_else(|| "unknown".to_owned());
    let counts_s = read_counts_csv(&args.run.join("label_counts_s.csv"), &model)?;
    let counts_r = read_counts_csv(&args.run.join("label_counts_r.csv"), &model)?;

    let props_s = crate::metrics::proportions_from_counts(&counts_s);
    let props_r = crate::metrics::proportions_from_counts(&counts_r);
    let order = node_order(&props_s);

    create_out_dir(&args.out)?;
    let write_props = |path: &Path, props: &Array2<f64>| -> Result<()> {
        write_to(path, |w| {
            for row in props.outer_iter() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            Ok(())
        })
    };
    write_props(&args.out.join("labels_sender.csv"), &props_s)?;
    write_props(&args.out.join("labels_receiver.csv"), &props_r)?;
    write_to(&args.out.join("node_order.txt"), |w| {
        for id in &order {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })?;
    Ok(())
}
