use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heaplab::bdp::SolverConfig;
use heaplab::datagen::{simulate_panel, Mechanism, SimConfig};
use heaplab::error::HeapError;
use heaplab::fitstats::{dic, sspe, summarize, FitReport};
use heaplab::io::{
    config_hash, ingest_csv, read_chain, read_hyperparams, write_chain_csv, write_chain_meta,
    write_chain_ndjson, write_panel_csv, RunManifest,
};
use heaplab::model::{Hyperparams, Variant};
use heaplab::report::{reporting_pmf, HeapParams, RegimeModel};
use heaplab::sampler::{run_chains, Chain, SamplerConfig};

#[derive(Parser)]
#[command(
    name = "heapctl",
    about = "Heaped-count reporting distributions and Bayesian panel fits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a heaped longitudinal panel and write it with ground truth.
    Simulate(SimulateArgs),
    /// Fit a model variant to a panel CSV by MCMC.
    Fit(FitArgs),
    /// Recompute fit statistics and traces from persisted chains.
    Diagnose(DiagnoseArgs),
    /// Print the reporting pmf g(y|x) as CSV rows.
    Pmf(PmfArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n_subjects: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.21)]
    sigma2_beta: f64,
    #[arg(long, default_value_t = 0.5)]
    theta_disp: f64,
    #[arg(long, default_value_t = 2.0)]
    theta_heap: f64,
    /// Comma-separated regime parameters gamma_0,...,gamma_J.
    #[arg(long, default_value = "0.5,-5,-10,-20", value_delimiter = ',', allow_hyphen_values = true)]
    gamma: Vec<f64>,
    /// Comma-separated heaping grids.
    #[arg(long, default_value = "5,10,50", value_delimiter = ',')]
    grids: Vec<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Reporting mechanism: bdp, wh08 or none.
    #[arg(long, default_value = "bdp")]
    mechanism: String,
    /// Output directory (panel.csv + truth.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Panel CSV with subject_id, time_index, y and optional covariates.
    #[arg(long)]
    data: PathBuf,
    /// Hyperparameter JSON; omitted fields keep the application defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Variant,
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    #[arg(long, default_value_t = 5_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory holding chain_*.ndjson and chain_*.meta.json.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the report (defaults to the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PmfArgs {
    #[arg(long)]
    theta_disp: f64,
    #[arg(long)]
    theta_heap: f64,
    /// Regime parameters; omit for the single-grid always-heap model.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gamma: Option<Vec<f64>>,
    #[arg(long, default_value = "5,10,50", value_delimiter = ',')]
    grids: Vec<u32>,
    /// True count.
    #[arg(long)]
    x: u32,
    /// Largest report to print (defaults to the full computed support).
    #[arg(long)]
    max_y: Option<u32>,
    /// Elapsed time of the reporting process (model layer uses 1).
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Pmf(a) => cmd_pmf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Cap worker threads via HEAPLAB_THREADS (defaults to the core count).
fn init_threads() {
    if let Ok(v) = std::env::var("HEAPLAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), HeapError> {
    let mechanism = match a.mechanism.as_str() {
        "bdp" => Mechanism::Bdp,
        "wh08" => Mechanism::Wh08,
        "none" => Mechanism::None,
        other => {
            return Err(HeapError::Domain(format!(
                "unknown mechanism `{other}` (expected bdp, wh08 or none)"
            )))
        }
    };
    let cfg = SimConfig {
        n_subjects: a.n_subjects,
        repeats: a.repeats,
        alpha: a.alpha,
        sigma2_beta: a.sigma2_beta,
        theta_disp: a.theta_disp,
        theta_heap: a.theta_heap,
        gamma: a.gamma,
        grids: a.grids,
        seed: a.seed,
        mechanism,
    };
    let (panel, truth) = simulate_panel(&cfg)?;
    std::fs::create_dir_all(&a.out)?;
    write_panel_csv(&panel, &a.out.join("panel.csv"))?;
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(std::fs::File::create(a.out.join("truth.json"))?),
        &truth,
    )?;
    println!(
        "wrote {} observations for {} subjects to {}",
        panel.n_obs(),
        panel.n_subjects(),
        a.out.display()
    );
    Ok(())
}

fn load_hyper(path: &Option<PathBuf>) -> Result<Hyperparams, HeapError> {
    match path {
        Some(p) => read_hyperparams(p),
        None => Ok(Hyperparams::default()),
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), HeapError> {
    let started = std::time::Instant::now();
    let panel = ingest_csv(&a.data)?;
    let hyper = load_hyper(&a.config)?;
    let cfg = SamplerConfig {
        iterations: a.iterations,
        burn_in: a.burn_in,
        thin: a.thin,
        seed: a.seed,
        chains: a.chains,
        ..SamplerConfig::default()
    };
    cfg.validate()?;

    std::fs::create_dir_all(&a.out)?;
    let hash = fit_hash(&a, &hyper);
    let manifest_path = a.out.join("manifest.json");
    RunManifest::check_resume(&manifest_path, &hash)?;

    let chains = match run_chains(&panel, &hyper, a.variant, &cfg) {
        Ok(c) => c,
        Err(e) => {
            let dump = a.out.join("diagnostic.json");
            let payload = serde_json::json!({
                "error": e.to_string(),
                "variant": a.variant.name(),
                "seed": a.seed,
                "data": a.data.display().to_string(),
            });
            std::fs::write(&dump, serde_json::to_string_pretty(&payload)?)?;
            eprintln!("sampler aborted; diagnostics written to {}", dump.display());
            return Err(e);
        }
    };

    for (k, chain) in chains.iter().enumerate() {
        write_chain_ndjson(chain, &a.out.join(format!("chain_{k}.ndjson")))?;
        write_chain_meta(chain, &a.out.join(format!("chain_{k}.meta.json")))?;
        write_chain_csv(chain, &panel, &a.out.join(format!("chain_{k}.csv")))?;
    }

    let pooled = pool_chains(&chains);
    let mut report = summarize(&pooled, &panel)?;
    report.dic = Some(dic(&pooled, &panel, &hyper, &SolverConfig::default())?);
    report.sspe = Some(sspe(&pooled, &panel, &hyper, &SolverConfig::default(), a.seed)?);
    write_report(&report, &a.out.join("fit_report.json"))?;
    print!("{}", report.render());

    RunManifest {
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        variant: a.variant.name().into(),
        seed: a.seed,
        chains: a.chains,
        iterations: a.iterations,
        burn_in: a.burn_in,
        thin: a.thin,
        data_path: a.data.display().to_string(),
        config_hash: hash,
        wall_secs: started.elapsed().as_secs_f64(),
    }
    .write(&manifest_path)?;
    println!("run manifest: {}", manifest_path.display());
    Ok(())
}

fn fit_hash(a: &FitArgs, hyper: &Hyperparams) -> String {
    let canonical = format!(
        "data={} variant={} iterations={} burn_in={} thin={} seed={} chains={} hyper={}",
        a.data.display(),
        a.variant.name(),
        a.iterations,
        a.burn_in,
        a.thin,
        a.seed,
        a.chains,
        serde_json::to_string(hyper).unwrap_or_default()
    );
    config_hash(canonical.as_bytes())
}

/// Concatenate kept samples across chains for pooled summaries.
fn pool_chains(chains: &[Chain]) -> Chain {
    let mut pooled = chains[0].clone();
    for c in &chains[1..] {
        pooled.samples.extend(c.samples.iter().cloned());
    }
    pooled
}

fn write_report(report: &FitReport, path: &PathBuf) -> Result<(), HeapError> {
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(std::fs::File::create(path)?),
        report,
    )?;
    Ok(())
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<(), HeapError> {
    let panel = ingest_csv(&a.data)?;
    let hyper = load_hyper(&a.config)?;
    let out = a.out.clone().unwrap_or_else(|| a.run.clone());
    std::fs::create_dir_all(&out)?;

    let mut chains = Vec::new();
    for k in 0.. {
        let samples = a.run.join(format!("chain_{k}.ndjson"));
        let meta = a.run.join(format!("chain_{k}.meta.json"));
        if !samples.exists() {
            break;
        }
        chains.push(read_chain(&samples, &meta)?);
    }
    if chains.is_empty() {
        return Err(HeapError::Domain(format!(
            "no chain_*.ndjson found under {}",
            a.run.display()
        )));
    }

    for (k, chain) in chains.iter().enumerate() {
        write_chain_csv(chain, &panel, &out.join(format!("trace_{k}.csv")))?;
    }
    let pooled = pool_chains(&chains);
    let mut report = summarize(&pooled, &panel)?;
    report.dic = Some(dic(&pooled, &panel, &hyper, &SolverConfig::default())?);
    report.sspe = Some(sspe(
        &pooled,
        &panel,
        &hyper,
        &SolverConfig::default(),
        pooled.seed,
    )?);
    write_report(&report, &out.join("fit_report.json"))?;
    print!("{}", report.render());
    Ok(())
}

fn cmd_pmf(a: PmfArgs) -> Result<(), HeapError> {
    let params = match a.gamma {
        Some(gamma) => HeapParams {
            theta_disp: a.theta_disp,
            theta_heap: a.theta_heap,
            grids: a.grids,
            regimes: RegimeModel::Logistic(gamma),
        },
        None => {
            if a.grids.len() != 1 && a.theta_heap > 0.0 {
                return Err(HeapError::Domain(
                    "without --gamma, pass exactly one grid (always-heap model)".into(),
                ));
            }
            if a.theta_heap == 0.0 {
                HeapParams::dispersion_only(a.theta_disp)
            } else {
                HeapParams::single_grid(a.theta_disp, a.theta_heap, a.grids[0])
            }
        }
    };
    let mut cfg = SolverConfig::default();
    if let Some(max_y) = a.max_y {
        cfg.truncation_cap = cfg.truncation_cap.max(max_y as usize + 3);
    }
    let row = if a.t == 1.0 {
        reporting_pmf(&params, a.x, &cfg)?
    } else {
        // General elapsed time for engine inspection.
        let rates = heaplab::report::heap_rates(&params, a.x)?;
        let cfg = heaplab::report::reporting_solver_config(&params, a.x, &cfg);
        heaplab::bdp::transition_row(&rates, a.x, a.t, &cfg)?
    };
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let limit = a.max_y.map(|m| m as usize).unwrap_or(row.len() - 1);
    let mut emit = || -> std::io::Result<()> {
        writeln!(out, "y,probability")?;
        for (y, &p) in row.iter().enumerate().take(limit + 1) {
            writeln!(out, "{y},{p:.12e}")?;
        }
        out.flush()
    };
    match emit() {
        Ok(()) => Ok(()),
        // A closed pipe (e.g. piping into `head`) is not an error.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(e.into()),
    }
}
