use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, RunConfig, SystemChoice};
use super::report::{AggregateReport, Diagnostics, RunReport, SeedOutcome, SeedReport};
use crate::dynamics::{make_split, reference_trajectory, SampleSplit, SystemSpec};
use crate::error::{invalid_arg, Error, Result};
use crate::esn::{esn_fit, EsnSpec};
use crate::qpinn::{qpinn_mse, train, AnsatzSpec, ObservableMap, TrainTrace};
use crate::qrc::{qrc_evaluate, qrc_fit, EncodingSpec, ReservoirSpec};

/// Reference trajectory sampled on the configured train/test grid.
pub fn prepare_split(config: &RunConfig) -> Result<(SystemSpec, SampleSplit)> {
    let system = config.system.resolve()?;
    let p = &config.protocol;
    let traj = reference_trajectory(&system, p.dt, p.test_end)?;
    let split = make_split(&traj, p.n_train, p.train_end, p.n_test, p.test_end)?;
    Ok((system, split))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))
}

/// Runs every seed of `config`, concurrently up to `config.workers`. A seed
/// that fails is reported as failed; the others still run.
pub fn run_seeds(config: &RunConfig) -> Result<Vec<SeedReport>> {
    config.validate()?;
    let (system, split) = prepare_split(config)?;
    let reports = pool(config.workers)?.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| run_seed(config, &system, &split, seed))
            .collect()
    });
    Ok(reports)
}

/// Runs the seeds and bundles them with the config and aggregate.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    Ok(RunReport::new(config.clone(), run_seeds(config)?))
}

fn run_seed(config: &RunConfig, system: &SystemSpec, split: &SampleSplit, seed: u64) -> SeedReport {
    let start = Instant::now();
    let result = match config.method {
        Method::Qrc => run_qrc(config, system, split, seed, start),
        Method::Esn => run_esn(config, split, seed, start),
        Method::Qpinn => run_qpinn(config, system, split, seed, start).map(|(r, _)| r),
    };
    let (outcome, train_time_s) = match result {
        Ok((outcome, secs)) => (outcome, secs),
        Err(e) => (SeedOutcome::Failed { error: e.to_string() }, 0.0),
    };
    SeedReport {
        system: system.name().to_string(),
        method: config.method,
        seed,
        train_time_s,
        outcome,
    }
}

fn ok(train_mse: f64, test_mse: f64, diagnostics: Diagnostics) -> SeedOutcome {
    SeedOutcome::Ok {
        train_mse,
        test_mse,
        diagnostics,
    }
}

fn run_qrc(
    config: &RunConfig,
    system: &SystemSpec,
    split: &SampleSplit,
    seed: u64,
    start: Instant,
) -> Result<(SeedOutcome, f64)> {
    let q = &config.qrc;
    let enc = EncodingSpec::for_system(system, &split.train, q.qubits)?;
    let spec = ReservoirSpec::build(q.qubits, q.layers, seed);
    let (readout, train_mse) = qrc_fit(split, &spec, &enc, q.window, q.shot_mode(), q.alpha, seed)?;
    let secs = start.elapsed().as_secs_f64();
    let test_mse = qrc_evaluate(&readout, split, &spec, &enc, q.window, q.shot_mode(), seed)?;
    let diagnostics = Diagnostics {
        feature_dim: Some(q.window * spec.feature_dim()),
        ..Diagnostics::default()
    };
    Ok((ok(train_mse, test_mse, diagnostics), secs))
}

fn run_esn(config: &RunConfig, split: &SampleSplit, seed: u64, start: Instant) -> Result<(SeedOutcome, f64)> {
    let e = &config.esn;
    let spec = EsnSpec {
        n_neurons: e.neurons,
        spectral_radius: e.spectral_radius,
        input_scaling: e.input_scaling,
        leak_rate: e.leak,
        connectivity: e.connectivity,
        seed,
    };
    let (model, train_mse) = esn_fit(&spec, split, e.window, e.alpha)?;
    let secs = start.elapsed().as_secs_f64();
    let test_mse = model.evaluate(split)?;
    let diagnostics = Diagnostics {
        feature_dim: Some(e.window * e.neurons),
        ..Diagnostics::default()
    };
    Ok((ok(train_mse, test_mse, diagnostics), secs))
}

/// Output map for a QPINN run: the fixed Lorenz box, otherwise the training
/// range of each variable widened by 10%.
pub fn qpinn_output_map(system: &SystemSpec, split: &SampleSplit) -> Result<ObservableMap> {
    match system {
        SystemSpec::Lorenz { .. } => Ok(ObservableMap::lorenz()),
        _ => ObservableMap::new(EncodingSpec::from_points(&split.train, 0.1, 1)?.ranges),
    }
}

fn run_qpinn(
    config: &RunConfig,
    system: &SystemSpec,
    split: &SampleSplit,
    seed: u64,
    start: Instant,
) -> Result<((SeedOutcome, f64), TrainTrace)> {
    let q = &config.qpinn;
    let spec = AnsatzSpec {
        n_qubits: q.qubits,
        n_layers: q.layers,
        output_qubits: (0..system.dim()).collect(),
        t_max: config.protocol.test_end,
    };
    let map = qpinn_output_map(system, split)?;
    let (theta, trace) = train(&spec, &map, system, &q.loss_weights(), &q.train_config(seed), split)?;
    let secs = start.elapsed().as_secs_f64();
    if trace.failed() {
        return Err(Error::TrainingDiverged {
            iterations: trace.records.len(),
        });
    }
    let train_mse = qpinn_mse(&spec, &theta, &map, &split.train)?;
    let test_mse = qpinn_mse(&spec, &theta, &map, &split.test)?;
    let diagnostics = Diagnostics {
        final_grad_norm: trace.records.last().map(|r| r.grad_norm),
        min_grad_norm: trace.records.iter().map(|r| r.grad_norm).reduce(f64::min),
        initial_loss: trace.initial_loss(),
        final_loss: trace.final_loss.map(|l| l.total),
        iterations: Some(trace.records.len()),
        stop_reason: Some(trace.stop_reason),
        ..Diagnostics::default()
    };
    Ok(((ok(train_mse, test_mse, diagnostics), secs), trace))
}

/// A single QPINN run on the first configured seed, returning the full
/// per-iteration trace alongside the report.
pub fn run_qpinn_traced(config: &RunConfig) -> Result<(SeedReport, TrainTrace)> {
    let mut config = config.clone();
    config.method = Method::Qpinn;
    config.validate()?;
    let (system, split) = prepare_split(&config)?;
    let seed = config.seeds[0];
    let ((outcome, train_time_s), trace) = run_qpinn(&config, &system, &split, seed, Instant::now())?;
    let report = SeedReport {
        system: system.name().to_string(),
        method: Method::Qpinn,
        seed,
        train_time_s,
        outcome,
    };
    Ok((report, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub window: usize,
    pub feature_dim: usize,
    pub train_mse: f64,
}

/// Train MSE of the QRC pipeline for each window size with the reservoir and
/// shot seed fixed to the first configured seed.
pub fn ablate_window(config: &RunConfig, windows: &[usize]) -> Result<Vec<AblationRow>> {
    if windows.is_empty() {
        return Err(invalid_arg("window list is empty"));
    }
    if windows.contains(&0) {
        return Err(invalid_arg("window sizes must be at least 1"));
    }
    let mut base = config.clone();
    base.method = Method::Qrc;
    base.qrc.window = 1;
    base.validate()?;
    let (system, split) = prepare_split(&base)?;
    let q = &base.qrc;
    let seed = base.seeds[0];
    let enc = EncodingSpec::for_system(&system, &split.train, q.qubits)?;
    let spec = ReservoirSpec::build(q.qubits, q.layers, seed);
    windows
        .iter()
        .map(|&w| {
            let (_, train_mse) = qrc_fit(&split, &spec, &enc, w, q.shot_mode(), q.alpha, seed)?;
            Ok(AblationRow {
                window: w,
                feature_dim: w * spec.feature_dim(),
                train_mse,
            })
        })
        .collect()
}

pub fn write_ablation_csv<W: std::io::Write>(rows: &[AblationRow], mut out: W) -> Result<()> {
    writeln!(out, "window,feature_dim,train_mse")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.window, r.feature_dim, r.train_mse)?;
    }
    Ok(())
}

/// Percentage by which `candidate` lowers `baseline`; `None` for a zero baseline.
pub fn reduction_pct(baseline: f64, candidate: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (baseline - candidate) / baseline)
}

/// How many times faster `candidate` trains than `baseline`; `None` when the
/// candidate time is zero.
pub fn time_ratio(baseline_s: f64, candidate_s: f64) -> Option<f64> {
    (candidate_s != 0.0).then(|| baseline_s / candidate_s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub system: String,
    pub baseline: Method,
    pub candidate: Method,
    pub train_mse_reduction_pct: Option<f64>,
    pub test_mse_reduction_pct: Option<f64>,
    pub speedup: Option<f64>,
}

/// Every ordered pair of distinct methods evaluated on the same system.
pub fn compare(aggregates: &[AggregateReport]) -> Result<Vec<Comparison>> {
    let mut methods: Vec<Method> = aggregates.iter().map(|a| a.method).collect();
    methods.sort();
    methods.dedup();
    if methods.len() < 2 {
        return Err(invalid_arg("comparison needs at least two methods"));
    }
    let mut out = Vec::new();
    for base in aggregates {
        for cand in aggregates {
            if base.system != cand.system || base.method == cand.method {
                continue;
            }
            out.push(Comparison {
                system: base.system.clone(),
                baseline: base.method,
                candidate: cand.method,
                train_mse_reduction_pct: reduction_pct(base.train_mse_mean, cand.train_mse_mean),
                test_mse_reduction_pct: reduction_pct(base.test_mse_mean, cand.test_mse_mean),
                speedup: time_ratio(base.train_time_s, cand.train_time_s),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandCheck {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub passed: bool,
}

impl BandCheck {
    fn new(name: String, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            passed: value >= lo && value <= hi,
            name,
            value,
            lo,
            hi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Metric {
    Train,
    Test,
}

/// Acceptance bands on mean MSE: (system, method, metric, lo, hi).
const BANDS: [(&str, Method, Metric, f64, f64); 6] = [
    ("lorenz", Method::Qrc, Metric::Train, 9.8, 39.2),
    ("lorenz", Method::Qrc, Metric::Test, 1.0, 6.0),
    ("rossler", Method::Qrc, Metric::Test, 0.5, 4.0),
    ("lorenz96", Method::Qrc, Metric::Test, 5.0, 25.0),
    ("lorenz", Method::Esn, Metric::Train, 0.0, 1.0),
    ("lorenz", Method::Esn, Metric::Test, 0.5, 5.0),
];

/// Checks every aggregate that has a band, plus the train-MSE ordering
/// ESN < QRC < QPINN on Lorenz when all three are present.
pub fn check_bands(aggregates: &[AggregateReport]) -> Vec<BandCheck> {
    let mut checks = Vec::new();
    for a in aggregates {
        for &(system, method, metric, lo, hi) in &BANDS {
            if a.system != system || a.method != method {
                continue;
            }
            let (label, value) = match metric {
                Metric::Train => ("train", a.train_mse_mean),
                Metric::Test => ("test", a.test_mse_mean),
            };
            checks.push(BandCheck::new(
                format!("{system} {method} {label} mse ({} seeds)", a.seeds.len()),
                value,
                lo,
                hi,
            ));
        }
    }
    let train = |m: Method| {
        aggregates
            .iter()
            .find(|a| a.system == "lorenz" && a.method == m)
            .map(|a| a.train_mse_mean)
    };
    if let (Some(esn), Some(qrc), Some(qpinn)) = (train(Method::Esn), train(Method::Qrc), train(Method::Qpinn)) {
        checks.push(BandCheck::new("lorenz train mse: esn below qrc".into(), esn, f64::NEG_INFINITY, qrc));
        checks.push(BandCheck::new("lorenz train mse: qrc below qpinn".into(), qrc, f64::NEG_INFINITY, qpinn));
    }
    checks
}

/// Strict decrease of train MSE along the rows.
pub fn ablation_decreasing(rows: &[AblationRow]) -> bool {
    rows.windows(2).all(|p| p[1].train_mse < p[0].train_mse)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    /// All methods on Lorenz.
    pub comparison_runs: Vec<RunReport>,
    /// QRC on every configured system.
    pub system_runs: Vec<RunReport>,
    pub comparisons: Vec<Comparison>,
    pub checks: Vec<BandCheck>,
}

impl BenchOutcome {
    pub fn aggregates(&self) -> Vec<AggregateReport> {
        self.comparison_runs
            .iter()
            .chain(&self.system_runs)
            .filter_map(|r| r.aggregate.clone())
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
            && self.comparison_runs.iter().chain(&self.system_runs).all(|r| r.aggregate.is_some())
    }
}

/// The full benchmark: every method on Lorenz with the comparison seeds, then
/// QRC on each configured system with the system seeds.
pub fn run_bench(base: &RunConfig) -> Result<BenchOutcome> {
    let mut comparison_runs = Vec::new();
    for method in Method::ALL {
        let mut c = base.clone();
        c.method = method;
        c.system = SystemChoice::named("lorenz");
        c.seeds = base.bench.comparison_seeds.clone();
        comparison_runs.push(run(&c)?);
    }
    let mut system_runs = Vec::new();
    for name in &base.bench.systems {
        let mut c = base.clone();
        c.method = Method::Qrc;
        c.system = SystemChoice::named(name);
        c.seeds = base.bench.systems_seeds.clone();
        system_runs.push(run(&c)?);
    }
    let comparison_aggs: Vec<AggregateReport> = comparison_runs.iter().filter_map(|r| r.aggregate.clone()).collect();
    let comparisons = compare(&comparison_aggs).unwrap_or_default();
    let mut checks = check_bands(&comparison_aggs);
    let system_aggs: Vec<AggregateReport> = system_runs.iter().filter_map(|r| r.aggregate.clone()).collect();
    checks.extend(check_bands(&system_aggs));
    Ok(BenchOutcome {
        comparison_runs,
        system_runs,
        comparisons,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::report::aggregate;

    fn agg(method: Method, train: f64, test: f64, time: f64) -> AggregateReport {
        AggregateReport {
            system: "lorenz".into(),
            method,
            seeds: vec![0],
            failed_seeds: vec![],
            train_mse_mean: train,
            train_mse_std: 0.0,
            test_mse_mean: test,
            test_mse_std: 0.0,
            train_time_s: time,
            std_undefined: true,
        }
    }

    #[test]
    fn reduction_and_speedup_arithmetic() {
        assert!((reduction_pct(91.3, 17.1).unwrap() - 81.270_536_692_223_44).abs() < 1e-9);
        assert_eq!(reduction_pct(5.0, 5.0), Some(0.0));
        assert_eq!(reduction_pct(0.0, 1.0), None);
        assert!((time_ratio(8640.0, 0.2).unwrap() - 43_200.0).abs() < 1e-6);
        assert_eq!(time_ratio(1.0, 0.0), None);
    }

    #[test]
    fn compare_pairs() {
        let aggs = [agg(Method::Qpinn, 91.3, 10.0, 8640.0), agg(Method::Qrc, 17.1, 3.0, 0.2)];
        let cmp = compare(&aggs).unwrap();
        assert_eq!(cmp.len(), 2);
        let c = cmp.iter().find(|c| c.baseline == Method::Qpinn).unwrap();
        assert!((c.train_mse_reduction_pct.unwrap() - 81.27).abs() < 0.01);
        assert!((c.speedup.unwrap() - 43_200.0).abs() < 1e-6);
        assert!(compare(&aggs[..1]).is_err());

        let same = [agg(Method::Esn, 2.0, 2.0, 1.0), agg(Method::Qrc, 2.0, 2.0, 1.0)];
        assert!(compare(&same).unwrap().iter().all(|c| c.train_mse_reduction_pct == Some(0.0)));
        let zero = [agg(Method::Esn, 0.0, 0.0, 1.0), agg(Method::Qrc, 2.0, 2.0, 1.0)];
        let z = compare(&zero).unwrap();
        assert_eq!(z.iter().find(|c| c.baseline == Method::Esn).unwrap().train_mse_reduction_pct, None);
    }

    #[test]
    fn band_checks_and_ordering() {
        let aggs = [
            agg(Method::Qrc, 17.0, 3.0, 1.0),
            agg(Method::Esn, 0.1, 2.0, 1.0),
            agg(Method::Qpinn, 90.0, 50.0, 1.0),
        ];
        let checks = check_bands(&aggs);
        assert_eq!(checks.len(), 6);
        assert!(checks.iter().all(|c| c.passed));

        let bad = [agg(Method::Qrc, 50.0, 3.0, 1.0), agg(Method::Esn, 0.1, 2.0, 1.0), agg(Method::Qpinn, 40.0, 1.0, 1.0)];
        let failed: Vec<_> = check_bands(&bad).into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(failed.len(), 2);
    }

    fn small(method: Method) -> RunConfig {
        let mut c = RunConfig {
            method,
            seeds: vec![0, 1],
            workers: 2,
            ..RunConfig::default()
        };
        c.qrc.exact_probs = true;
        c.esn.neurons = 40;
        c.qpinn.iterations = 2;
        c
    }

    #[test]
    fn run_seeds_is_reproducible() {
        for method in Method::ALL {
            let a = run_seeds(&small(method)).unwrap();
            let b = run_seeds(&small(method)).unwrap();
            assert_eq!(a.len(), 2);
            assert!(a.iter().all(|r| r.is_ok() && r.train_time_s >= 0.0), "{a:?}");
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.seed, y.seed);
                assert_eq!(x.train_mse().unwrap().to_bits(), y.train_mse().unwrap().to_bits());
                assert_eq!(x.test_mse().unwrap().to_bits(), y.test_mse().unwrap().to_bits());
            }
        }
    }

    #[test]
    fn empty_seed_list_is_config_error() {
        let mut c = small(Method::Qrc);
        c.seeds.clear();
        assert!(matches!(run_seeds(&c), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn failing_seed_does_not_stop_others() {
        let mut c = small(Method::Esn);
        c.esn.connectivity = 0.0;
        let reports = run_seeds(&c).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| !r.is_ok()));
        assert!(matches!(aggregate(&reports), Err(Error::Aggregation(_))));
    }

    #[test]
    fn ablation_rows() {
        let mut c = small(Method::Qrc);
        c.seeds = vec![0];
        let rows = ablate_window(&c, &[1, 3, 5]).unwrap();
        assert_eq!(rows.iter().map(|r| r.feature_dim).collect::<Vec<_>>(), vec![32, 96, 160]);
        assert!(ablation_decreasing(&rows));
        assert_eq!(ablate_window(&c, &[1]).unwrap().len(), 1);
        assert!(ablate_window(&c, &[]).is_err());
        assert!(ablate_window(&c, &[0]).is_err());
    }

    #[test]
    fn qpinn_on_rossler_uses_training_ranges() {
        let mut c = small(Method::Qpinn);
        c.system = SystemChoice::named("rossler");
        c.seeds = vec![0];
        let reports = run_seeds(&c).unwrap();
        let d = reports[0].diagnostics().unwrap();
        assert_eq!(d.iterations, Some(2));
        assert!(d.final_grad_norm.unwrap() > 0.0);
    }
}
