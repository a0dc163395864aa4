mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use log::info;
use serde::{Deserialize, Serialize};
use skewcwm::em::{select_model, FitConfig};
use skewcwm::eval::ari;
use skewcwm::funbasis::{FunctionalDataset, Series};
use skewcwm::io;
use skewcwm::model::FitResult;
use skewcwm::sim::{benchmark, builtin_scenario, simulate, BenchConfig};
use skewcwm::{Error, Result};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "skewcwm", version, about = "Cluster paired functional data with skewed regression mixtures")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log every EM iteration to standard error
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Smooth curves, select a model by BIC and write the fitted partition
    Fit {
        /// Long-format curve CSV (curve_id,variable,role,t,value)
        curves: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed of the config file
        #[arg(long)]
        seed: Option<u64>,
        /// Known labels (curve_id,cluster); the ARI is reported when given
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Draw a data set from a built-in scenario (NIG-VG, NIG-NIG, ST-ST, VG-VG)
    Simulate {
        scenario: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Simulate-and-fit replicates of a scenario; summarizes ARI and regression errors
    Benchmark {
        scenario: String,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Selection grid; defaults to the true K and families
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Per-cluster mean curves of a fitted result, for plotting
    Plotdata {
        result: PathBuf,
        #[arg(long, default_value_t = 101)]
        grid_len: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// ARI between two label files (curve_id,label in the first two columns)
    Score { truth: PathBuf, labels: PathBuf },
}

/// Contents of result.json.
#[derive(Serialize, Deserialize)]
struct FitReport {
    config: FitConfig,
    data: FunctionalDataset,
    result: FitResult,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn column(side: &[Vec<Series>], j: usize) -> Vec<&Series> {
    side.iter().map(|c| &c[j]).collect()
}

fn cmd_fit(curves: &Path, config: Option<&Path>, seed: Option<u64>, truth: Option<&Path>, out: &Path) -> Result<()> {
    let mut cfg = match config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let curves = io::read_curves_file(curves)?;
    let xs: Vec<_> = (0..curves.x_names.len()).map(|j| column(&curves.x, j)).collect();
    let ys: Vec<_> = (0..curves.y_names.len()).map(|j| column(&curves.y, j)).collect();
    let x_bases = RunConfig::bases(&cfg.x_basis, &xs)?;
    let y_bases = RunConfig::bases(&cfg.y_basis, &ys)?;
    let data = FunctionalDataset::fit(&curves, &x_bases, &y_bases)?;
    info!("{} curves, R^X = {}, R^Y = {}", data.n(), data.rx(), data.ry());
    let sel = select_model(&data, &cfg.grid(), &cfg.base(), cfg.n_starts, cfg.seed)?;
    let best = &sel.best;
    eprintln!(
        "selected K = {}, {} / {}, {}-{}, BIC = {:.4}",
        best.model.k,
        best.model.parsimony.flm_variant,
        best.model.parsimony.sigma_y_family,
        sel.best_config.family_x.name(),
        sel.best_config.family_y.name(),
        best.bic
    );
    io::write_labels(create(out, "labels.csv")?, &data.ids, &best.labels, &best.t)?;
    io::write_bic_table(create(out, "bic_table.csv")?, &sel.table)?;
    if let Some(p) = truth {
        let labels = io::read_truth(io::open(p)?, &data.ids)?;
        println!("ARI = {}", ari(&labels, &best.labels)?);
    }
    let report = FitReport { config: sel.best_config, data, result: sel.best };
    std::fs::create_dir_all(out)?;
    io::write_json(&out.join("result.json"), &report)
}

fn cmd_simulate(name: &str, n: Option<usize>, seed: u64, out: &Path) -> Result<()> {
    let mut sc = builtin_scenario(name)?;
    if let Some(n) = n {
        sc.n = n;
    }
    let sim = simulate(&sc, seed)?;
    io::write_curves(create(out, "curves.csv")?, &sim.curves)?;
    io::write_truth(create(out, "truth.csv")?, &sim.curves.ids, &sim.labels)?;
    eprintln!("wrote {} curves of scenario {}", sc.n, sc.name);
    Ok(())
}

fn cmd_benchmark(name: &str, reps: usize, n: Option<usize>, seed: u64, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut sc = builtin_scenario(name)?;
    if let Some(n) = n {
        sc.n = n;
    }
    let bench = match config {
        Some(p) => {
            let cfg = RunConfig::from_file(p)?;
            BenchConfig { grid: cfg.grid(), base: cfg.base(), n_starts: cfg.n_starts }
        }
        None => BenchConfig::for_scenario(&sc),
    };
    let report = benchmark(&sc, reps, seed, &bench)?;
    let mut w = csv::Writer::from_writer(create(out, "ari_summary.csv")?);
    let err = |e: csv::Error| Error::Domain(e.to_string());
    w.write_record(["scenario", "reps", "mean", "sd", "median"]).map_err(err)?;
    w.write_record([
        report.scenario.clone(),
        reps.to_string(),
        io::fmt_f64(report.ari_mean),
        io::fmt_f64(report.ari_sd),
        io::fmt_f64(report.ari_median),
    ])
    .map_err(err)?;
    w.flush()?;
    let mut w = csv::Writer::from_writer(create(out, "gamma_mse.csv")?);
    w.write_record(["cluster", "row", "col", "mse"]).map_err(err)?;
    for (k, m) in report.gamma_mse.iter().enumerate() {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                w.write_record([(k + 1).to_string(), (r + 1).to_string(), (c + 1).to_string(), io::fmt_f64(m[(r, c)])])
                    .map_err(err)?;
            }
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(create(out, "replicates.csv")?);
    w.write_record(["replicate", "seed", "ari", "k", "bic", "n_iter", "converged"]).map_err(err)?;
    for (i, r) in report.replicates.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.seed.to_string(),
            io::fmt_f64(r.ari),
            r.fit.model.k.to_string(),
            io::fmt_f64(r.fit.bic),
            r.fit.n_iter.to_string(),
            r.fit.converged.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    println!(
        "{}: mean ARI {:.4} (sd {:.4}, median {:.4}) over {reps} replicates",
        report.scenario, report.ari_mean, report.ari_sd, report.ari_median
    );
    Ok(())
}

fn cmd_plotdata(result: &Path, grid_len: usize, out: &Path) -> Result<()> {
    if grid_len < 2 {
        return Err(Error::Domain("grid length must be at least 2".into()));
    }
    let report: FitReport = io::read_json(result)?;
    let data = &report.data;
    let k = report.result.model.k;
    let labels = &report.result.labels;
    if data.x_bases.is_empty() || labels.len() != data.n() {
        return Err(Error::Domain("result file carries no curve bases".into()));
    }
    let members: Vec<Vec<usize>> = (0..k).map(|c| (0..data.n()).filter(|&i| labels[i] == c).collect()).collect();
    let mut w = csv::Writer::from_writer(create(out, "mean_curves.csv")?);
    let err = |e: csv::Error| Error::Domain(e.to_string());
    let mut header = vec!["t".to_string(), "variable".into(), "role".into()];
    header.extend((1..=k).map(|c| format!("cluster_{c}")));
    w.write_record(&header).map_err(err)?;
    for (role, bases, names, coef) in [
        ("X", &data.x_bases, &data.x_names, &data.c_x),
        ("Y", &data.y_bases, &data.y_names, &data.c_y),
    ] {
        let mut off = 0;
        for (basis, name) in bases.iter().zip(names) {
            let nb = basis.n_basis();
            let (lo, hi) = basis.domain;
            let t: Vec<f64> = (0..grid_len).map(|g| lo + (hi - lo) * g as f64 / (grid_len - 1) as f64).collect();
            let e = basis.eval_basis(&t)?;
            let means: Vec<Option<nalgebra::DVector<f64>>> = members
                .iter()
                .map(|m| {
                    (!m.is_empty()).then(|| {
                        let sum = m.iter().fold(nalgebra::DVector::zeros(nb), |acc, &i| {
                            acc + coef.view((i, off), (1, nb)).transpose()
                        });
                        &e * (sum / m.len() as f64)
                    })
                })
                .collect();
            for (g, tg) in t.iter().enumerate() {
                let mut row = vec![io::fmt_f64(*tg), name.clone(), role.to_string()];
                row.extend(means.iter().map(|m| m.as_ref().map_or(String::new(), |v| io::fmt_f64(v[g]))));
                w.write_record(&row).map_err(err)?;
            }
            off += nb;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_score(truth: &Path, labels: &Path) -> Result<()> {
    let mut rdr = csv::Reader::from_reader(io::open(truth)?);
    let ids = rdr
        .records()
        .map(|r| r.map(|r| r[0].to_string()).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let a = io::read_truth(io::open(truth)?, &ids)?;
    let b = io::read_truth(io::open(labels)?, &ids)?;
    println!("ARI = {}", ari(&a, &b)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    }
    match cli.cmd {
        Cmd::Fit { curves, config, seed, truth, out_dir } => {
            cmd_fit(&curves, config.as_deref(), seed, truth.as_deref(), &out_dir)
        }
        Cmd::Simulate { scenario, n, seed, out_dir } => cmd_simulate(&scenario, n, seed, &out_dir),
        Cmd::Benchmark { scenario, reps, n, seed, config, out_dir } => {
            cmd_benchmark(&scenario, reps, n, seed, config.as_deref(), &out_dir)
        }
        Cmd::Plotdata { result, grid_len, out_dir } => cmd_plotdata(&result, grid_len, &out_dir),
        Cmd::Score { truth, labels } => cmd_score(&truth, &labels),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
