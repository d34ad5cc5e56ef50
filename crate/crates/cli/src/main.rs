use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chaosq::bench::{
    ablate_window, ablation_decreasing, check_bands, run, run_bench, run_qpinn_traced, write_ablation_csv,
    write_aggregate_csv, BandCheck, Method, RunConfig, RunReport, SeedOutcome, SeedReport, SystemChoice,
};
use chaosq::dynamics::reference_trajectory;
use chaosq::qrc::QrcModel;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chaosq", version, about = "Quantum reservoir, QPINN and ESN benchmarks on chaotic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a system and write its trajectory as CSV.
    Generate(GenerateArgs),
    /// Quantum reservoir computing run.
    Qrc(QrcArgs),
    /// Quantum physics-informed network run.
    Qpinn(QpinnArgs),
    /// Echo state network run.
    Esn(EsnArgs),
    /// QRC train MSE against temporal window size.
    Ablate(AblateArgs),
    /// Method comparison on Lorenz plus QRC on every system.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "lorenz")]
    system: String,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 4.0)]
    t_end: f64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<String>,
    /// Single seed; replaces the configured seed list.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    workers: Option<usize>,
    /// Per-seed JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Aggregate CSV.
    #[arg(long)]
    aggregate: Option<PathBuf>,
    /// Exit nonzero when an acceptance band is violated.
    #[arg(long)]
    check: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.system {
            c.system = SystemChoice::named(s);
        }
        if let Some(s) = self.seed {
            c.seeds = vec![s];
        }
        if let Some(s) = &self.seeds {
            c.seeds = s.clone();
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(p) = &self.report {
            c.output.reports = Some(p.clone());
        }
        if let Some(p) = &self.aggregate {
            c.output.aggregate = Some(p.clone());
        }
        Ok(c)
    }
}

#[derive(Args)]
struct QrcFlags {
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Use exact bitstring probabilities instead of sampled shots.
    #[arg(long)]
    exact_probs: bool,
}

impl QrcFlags {
    fn apply(&self, c: &mut RunConfig) {
        let q = &mut c.qrc;
        set(&mut q.qubits, self.qubits);
        set(&mut q.layers, self.layers);
        set(&mut q.window, self.window);
        set(&mut q.shots, self.shots);
        set(&mut q.alpha, self.alpha);
        if self.exact_probs {
            q.exact_probs = true;
        }
    }
}

#[derive(Args)]
struct QrcArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    qrc: QrcFlags,
    /// Save the model fitted on the first seed as JSON.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct QpinnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    /// Boundary loss weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Data loss weight.
    #[arg(long)]
    mu: Option<f64>,
    /// Run 200 iterations instead of the 50-iteration desk budget.
    #[arg(long)]
    paper_budget: bool,
    /// Per-iteration trace CSV for the first seed.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EsnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    neurons: Option<usize>,
    #[arg(long)]
    spectral_radius: Option<f64>,
    #[arg(long)]
    input_scaling: Option<f64>,
    #[arg(long)]
    leak: Option<f64>,
    #[arg(long)]
    connectivity: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    windows: Vec<usize>,
    /// Sample this many shots instead of using exact probabilities.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Exit nonzero unless train MSE strictly decreases with the window.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Run QPINN for 200 iterations instead of 50.
    #[arg(long)]
    paper_budget: bool,
    /// Directory for per-run JSON reports, the aggregate CSV and the comparison.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Exit nonzero when an acceptance band is violated.
    #[arg(long)]
    check: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_seed(r: &SeedReport) {
    match &r.outcome {
        SeedOutcome::Ok {
            train_mse,
            test_mse,
            diagnostics,
        } => {
            let mut extra = String::new();
            if let Some(d) = diagnostics.feature_dim {
                extra.push_str(&format!(" feature_dim={d}"));
            }
            if let Some(g) = diagnostics.final_grad_norm {
                extra.push_str(&format!(" final_grad_norm={g:.4e}"));
            }
            println!(
                "{} {} seed {}: train_mse={train_mse:.6} test_mse={test_mse:.6} time={:.3}s{extra}",
                r.system, r.method, r.seed, r.train_time_s
            );
        }
        SeedOutcome::Failed { error } => {
            println!("{} {} seed {}: FAILED {error}", r.system, r.method, r.seed);
        }
    }
}

fn print_checks(checks: &[BandCheck]) -> bool {
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        if c.lo == f64::NEG_INFINITY {
            println!("{status} {}: {:.6} < {:.6}", c.name, c.value, c.hi);
        } else {
            println!("{status} {}: {:.6} in [{}, {}]", c.name, c.value, c.lo, c.hi);
        }
    }
    checks.iter().all(|c| c.passed)
}

/// Prints, stores and optionally checks one run. Returns false on a failed check.
fn finish_run(report: &RunReport, check: bool) -> Result<bool> {
    for r in &report.reports {
        print_seed(r);
    }
    let Some(agg) = &report.aggregate else {
        println!("every seed failed");
        return Ok(!check);
    };
    println!(
        "{} {} over {} seeds: train_mse={:.6} ± {:.6} test_mse={:.6} ± {:.6} time={:.3}s",
        agg.system,
        agg.method,
        agg.seeds.len(),
        agg.train_mse_mean,
        agg.train_mse_std,
        agg.test_mse_mean,
        agg.test_mse_std,
        agg.train_time_s
    );
    if let Some(path) = &report.config.output.reports {
        write_file(path, &report.to_json()?)?;
    }
    if let Some(path) = &report.config.output.aggregate {
        let mut out = create(path)?;
        write_aggregate_csv(std::slice::from_ref(agg), &mut out)?;
        out.flush()?;
    }
    if !check {
        return Ok(true);
    }
    let checks = check_bands(std::slice::from_ref(agg));
    if checks.is_empty() {
        println!("no acceptance band applies to {} {}", agg.system, agg.method);
    }
    Ok(print_checks(&checks))
}

fn cmd_generate(a: GenerateArgs) -> Result<bool> {
    let system = SystemChoice::named(&a.system).resolve()?;
    let traj = reference_trajectory(&system, a.dt, a.t_end)?;
    let mut out = output(a.output.as_deref())?;
    traj.write_csv(&mut out)?;
    out.flush()?;
    Ok(true)
}

fn cmd_qrc(a: QrcArgs) -> Result<bool> {
    let mut c = a.common.load()?;
    c.method = Method::Qrc;
    a.qrc.apply(&mut c);
    let report = run(&c)?;
    if let Some(path) = &a.model {
        let (system, split) = chaosq::bench::prepare_split(&c)?;
        let q = &c.qrc;
        let seed = c.seeds[0];
        let (model, _) = QrcModel::fit(
            &split,
            chaosq::qrc::ReservoirSpec::build(q.qubits, q.layers, seed),
            chaosq::qrc::EncodingSpec::for_system(&system, &split.train, q.qubits)?,
            q.window,
            q.shot_mode(),
            q.alpha,
            seed,
        )?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        model.save(path).with_context(|| format!("saving model to {}", path.display()))?;
    }
    finish_run(&report, a.common.check)
}

fn cmd_qpinn(a: QpinnArgs) -> Result<bool> {
    let mut c = a.common.load()?;
    c.method = Method::Qpinn;
    if a.paper_budget {
        c = c.with_full_qpinn_budget();
    }
    let q = &mut c.qpinn;
    set(&mut q.iterations, a.iterations);
    set(&mut q.lr, a.lr);
    set(&mut q.decay, a.decay);
    set(&mut q.clip, a.clip);
    set(&mut q.patience, a.patience);
    set(&mut q.lambda, a.lambda);
    set(&mut q.mu, a.mu);
    if let Some(path) = a.trace.as_ref().or(c.output.trace.as_ref()) {
        let (_, trace) = run_qpinn_traced(&c)?;
        let mut out = create(path)?;
        trace.write_csv(&mut out)?;
        out.flush()?;
    }
    let report = run(&c)?;
    finish_run(&report, a.common.check)
}

fn cmd_esn(a: EsnArgs) -> Result<bool> {
    let mut c = a.common.load()?;
    c.method = Method::Esn;
    let e = &mut c.esn;
    set(&mut e.neurons, a.neurons);
    set(&mut e.spectral_radius, a.spectral_radius);
    set(&mut e.input_scaling, a.input_scaling);
    set(&mut e.leak, a.leak);
    set(&mut e.connectivity, a.connectivity);
    set(&mut e.window, a.window);
    set(&mut e.alpha, a.alpha);
    let report = run(&c)?;
    finish_run(&report, a.common.check)
}

fn cmd_ablate(a: AblateArgs) -> Result<bool> {
    let mut c = match &a.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &a.system {
        c.system = SystemChoice::named(s);
    }
    c.seeds = vec![a.seed];
    match a.shots {
        Some(n) => {
            c.qrc.shots = n;
            c.qrc.exact_probs = false;
        }
        None => c.qrc.exact_probs = true,
    }
    set(&mut c.qrc.qubits, a.qubits);
    set(&mut c.qrc.layers, a.layers);
    set(&mut c.qrc.alpha, a.alpha);
    let rows = ablate_window(&c, &a.windows)?;
    let mut out = output(a.output.as_deref())?;
    write_ablation_csv(&rows, &mut out)?;
    out.flush()?;
    drop(out);
    if !a.check {
        return Ok(true);
    }
    let ok = ablation_decreasing(&rows);
    println!("{} train mse strictly decreasing with window", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn cmd_bench(a: BenchArgs) -> Result<bool> {
    let mut c = match &a.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if a.paper_budget {
        c = c.with_full_qpinn_budget();
    }
    set(&mut c.workers, a.workers);
    let outcome = run_bench(&c)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (group, runs) in [("compare", &outcome.comparison_runs), ("systems", &outcome.system_runs)] {
        for r in runs.iter() {
            for s in &r.reports {
                print_seed(s);
            }
            let name = format!("{group}_{}_{}.json", r.config.system.name, r.config.method);
            write_file(&a.out_dir.join(name), &r.to_json()?)?;
        }
    }
    let aggregates = outcome.aggregates();
    let mut csv = create(&a.out_dir.join("aggregate.csv"))?;
    write_aggregate_csv(&aggregates, &mut csv)?;
    csv.flush()?;
    let mut stdout = io::stdout().lock();
    write_aggregate_csv(&aggregates, &mut stdout)?;
    drop(stdout);
    write_file(&a.out_dir.join("comparison.json"), &serde_json::to_string_pretty(&outcome.comparisons)?)?;
    for cmp in &outcome.comparisons {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |p| format!("{p:.1}%"));
        println!(
            "{}: {} vs {} train {} test {} speedup {}",
            cmp.system,
            cmp.candidate,
            cmp.baseline,
            pct(cmp.train_mse_reduction_pct),
            pct(cmp.test_mse_reduction_pct),
            cmp.speedup.map_or("n/a".to_string(), |s| format!("{s:.3}x"))
        );
    }
    if !a.check {
        return Ok(true);
    }
    let bands_ok = print_checks(&outcome.checks);
    Ok(bands_ok && outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Qrc(a) => cmd_qrc(a),
        Command::Qpinn(a) => cmd_qpinn(a),
        Command::Esn(a) => cmd_esn(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
