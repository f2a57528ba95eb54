//! Command-line driver: `simulate`, `estimate` and `validate`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fcs_mpc::ingest::{parse_orders, write_orders, write_quarantine, write_rejects, ParsedOrders};
use fcs_mpc::pipeline::{run_estimation, EstimationReport};
use fcs_mpc::preprocess::write_exclusions;
use fcs_mpc::report::{write_json, write_summary_csv};
use fcs_mpc::sim::{read_ground_truth, score_verdicts, simulate, write_ground_truth, SimScenario};
use fcs_mpc::{Error, ModelConfig, Result};

#[derive(Parser)]
#[command(name = "mpc", version, about = "Estimate DC fast-charger metering errors from EV charging records")]
struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known station errors.
    Simulate(SimulateArgs),
    /// Estimate station errors from a charging-order CSV.
    Estimate(EstimateArgs),
    /// Estimate and score the verdicts against a ground-truth CSV.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (`key = value`); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fcs: Option<usize>,
    #[arg(long)]
    ev: Option<usize>,
    #[arg(long)]
    orders: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for `orders.csv` and `ground_truth.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model configuration file; defaults apply to absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the estimation outputs and `validation.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io { path, source: e })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn model_config(path: Option<&Path>) -> Result<ModelConfig> {
    path.map_or_else(|| Ok(ModelConfig::default()), ModelConfig::from_file)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut scenario = match &a.config {
        Some(p) => SimScenario::from_file(p)?,
        None => SimScenario::default(),
    };
    if let Some(v) = a.fcs {
        scenario.n_fcs = v;
    }
    if let Some(v) = a.ev {
        scenario.n_ev = v;
    }
    if let Some(v) = a.orders {
        scenario.n_orders = Some(v);
    }
    if let Some(v) = a.seed {
        scenario.seed = v;
    }
    scenario.validate()?;
    let data = simulate(&scenario)?;
    ensure_dir(&a.out)?;
    write_orders(create(&a.out, "orders.csv")?, &data.orders)?;
    write_ground_truth(create(&a.out, "ground_truth.csv")?, &data.fleet.fcs)?;
    let samples: usize = data.orders.iter().map(|o| o.points.len()).sum();
    let defective = data
        .fleet
        .fcs
        .iter()
        .filter(|f| f.gamma_true.abs() > scenario.gamma_t)
        .count();
    println!(
        "stations {}  evs {}  orders {}  samples {}  defective stations {}",
        data.fleet.fcs.len(),
        data.fleet.evs.len(),
        data.orders.len(),
        samples,
        defective
    );
    Ok(())
}

fn write_estimation(out: &Path, parsed: &ParsedOrders, report: &EstimationReport) -> Result<()> {
    ensure_dir(out)?;
    write_json(create(out, "verdicts.json")?, &report.verdicts)?;
    write_summary_csv(create(out, "summary.csv")?, &report.verdicts)?;
    write_json(create(out, "report.json")?, report)?;
    write_exclusions(create(out, "exclusions.csv")?, &report.exclusions)?;
    write_rejects(create(out, "rejects.csv")?, &parsed.header, &parsed.rejects)?;
    write_quarantine(create(out, "quarantine.csv")?, &parsed.quarantined)?;
    Ok(())
}

fn estimate(input: &Path, config: Option<&Path>) -> Result<(ParsedOrders, EstimationReport, ModelConfig)> {
    let cfg = model_config(config)?;
    let parsed = parse_orders(input)?;
    let report = run_estimation(&parsed.orders, &cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok((parsed, report, cfg))
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let (parsed, report, _) = estimate(&a.input, a.config.as_deref())?;
    write_estimation(&a.out, &parsed, &report)?;
    println!(
        "stations {}  estimated {}  reference clusters {}  chains {}  rejected rows {}  quarantined orders {}",
        report.counts.fcs_total,
        report.counts.fcs_estimated,
        report.counts.rcs_clusters,
        report.counts.chains,
        parsed.rejects.len(),
        parsed.quarantined.len()
    );
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let gt = File::open(&a.ground_truth).map_err(|e| Error::Io {
        path: a.ground_truth.clone(),
        source: e,
    })?;
    let truth = read_ground_truth(gt)?;
    let (parsed, report, cfg) = estimate(&a.input, a.config.as_deref())?;
    let v = score_verdicts(&report, &truth, cfg.acceptable_gamma_t);
    if let Some(out) = &a.out {
        write_estimation(out, &parsed, &report)?;
        write_json(create(out, "validation.json")?, &v)?;
    }
    let pct = |x: Option<f64>| x.map_or("n/a".to_string(), |x| format!("{:.1}%", 100.0 * x));
    println!(
        "accuracy {}  coverage {}  estimated {}/{}  unreliable {}  reference clusters {}  chains {}{}",
        pct(v.accuracy),
        pct(v.coverage),
        v.fcs_estimated,
        v.fcs_total,
        v.unreliable,
        v.rcs_clusters,
        v.chains,
        if v.insufficient_data { "  (insufficient data)" } else { "" }
    );
    let c = v.confusion;
    println!(
        "truth acceptable:   {} judged acceptable, {} judged unacceptable",
        c.acceptable_as_acceptable, c.acceptable_as_unacceptable
    );
    println!(
        "truth unacceptable: {} judged acceptable, {} judged unacceptable",
        c.unacceptable_as_acceptable, c.unacceptable_as_unacceptable
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = std::panic::catch_unwind(|| match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Validate(a) => cmd_validate(a),
    });
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e @ Error::Numerical(_))) => {
            eprintln!("internal error: {e}");
            ExitCode::from(3)
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(3),
    }
}
