use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;
use spmvlab::advisor::{
    advise, evaluate_recommendation, render_table, EvaluationReport, Recommendation, Thresholds,
};
use spmvlab::exec::{
    partition, run_benchmark, BenchSpec, Format, Operand, PartitionPlan, PartitionScheme,
    Placement, TimingConfig, WallTimer,
};
use spmvlab::features::{
    build_feature_vector, compute_job_var, read_samples_csv, write_samples_csv, CounterImport,
    CounterSources, LabelSource, Precedence, Sample,
};
use spmvlab::io::{read_matrix_market, write_matrix_market_to, DatasetManifest};
use spmvlab::matrix::{example_matrix, Csr5Matrix, CsrMatrix};
use spmvlab::model::{
    export_tree, feature_importance, train_holdout, Dataset, Forest, TrainConfig,
};
use spmvlab::sim::{simulate_spmv, single_thread, ScalingRun, SimResult, Topology};
use spmvlab::synth::{
    default_reorder_window, gen_banded, gen_clustered, gen_poor_locality, locality_reorder,
    LocalityPattern,
};

use crate::output::{self, render_csr, render_csr5};
use crate::{
    Cli, Command, Common, ConvertTarget, ExecArgs, GenerateKind, Inputs, Mode, EXIT_PARTIAL,
};

pub enum Failure {
    Usage(String),
    Runtime(spmvlab::Error),
}

impl From<spmvlab::Error> for Failure {
    fn from(e: spmvlab::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(spmvlab::Error::Io {
            path: PathBuf::from("<output>"),
            source: e,
        })
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load_topology(common: &Common) -> Result<Topology, Failure> {
    match &common.topology {
        Some(path) => Ok(Topology::load(path)?),
        None => Ok(Topology::ft2000plus()),
    }
}

fn load_csr(path: &Path) -> spmvlab::Result<CsrMatrix> {
    Ok(read_matrix_market(path)?.to_csr())
}

fn resolve_inputs(inputs: &Inputs) -> Result<Vec<(String, PathBuf)>, Failure> {
    if let Some(manifest) = &inputs.manifest {
        let m = DatasetManifest::load(manifest)?;
        return Ok(m.entries.into_iter().map(|e| (e.name, e.path)).collect());
    }
    if inputs.matrices.is_empty() {
        return Err(usage("give matrix files or --manifest"));
    }
    Ok(inputs
        .matrices
        .iter()
        .map(|p| {
            let name = p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            (name, p.clone())
        })
        .collect())
}

struct ExecChoice {
    format: Format,
    placement: Placement,
    scheme: Option<PartitionScheme>,
    omega: usize,
    sigma: usize,
}

fn exec_choice(exec: &ExecArgs) -> Result<ExecChoice, Failure> {
    let format: Format = exec.format.into();
    let placement: Placement = exec
        .placement
        .parse()
        .map_err(|e: spmvlab::Error| usage(e.to_string()))?;
    let scheme = match &exec.scheme {
        Some(s) => Some(
            s.parse::<PartitionScheme>()
                .map_err(|e| usage(e.to_string()))?,
        ),
        None => None,
    };
    let fits = match (format, scheme) {
        (_, None) => true,
        (Format::Csr, Some(s)) => s != PartitionScheme::Csr5Tiles,
        (Format::Csr5, Some(s)) => s == PartitionScheme::Csr5Tiles,
    };
    if !fits {
        return Err(usage(format!(
            "scheme {} does not apply to {format}",
            scheme.expect("checked above")
        )));
    }
    Ok(ExecChoice {
        format,
        placement,
        scheme,
        omega: exec.omega,
        sigma: exec.sigma,
    })
}

enum Stored {
    Csr(CsrMatrix),
    Csr5(Csr5Matrix),
}

impl Stored {
    fn new(m: CsrMatrix, choice: &ExecChoice) -> spmvlab::Result<Self> {
        Ok(match choice.format {
            Format::Csr => Stored::Csr(m),
            Format::Csr5 => Stored::Csr5(m.to_csr5(choice.omega, choice.sigma)?),
        })
    }

    fn op(&self) -> Operand<'_> {
        match self {
            Stored::Csr(m) => Operand::Csr(m),
            Stored::Csr5(m) => Operand::Csr5(m),
        }
    }
}

fn write_line(w: &mut dyn Write, value: &impl Serialize) -> Result<(), Failure> {
    let line = serde_json::to_string(value).map_err(spmvlab::Error::from)?;
    writeln!(w, "{line}")?;
    Ok(())
}

pub fn run(cli: Cli) -> CmdResult {
    let common = cli.common;
    match cli.command {
        Command::Convert {
            input,
            to,
            omega,
            sigma,
        } => convert(&common, &input, to, omega, sigma),
        Command::Bench {
            inputs,
            threads,
            exec,
            min_reps,
            max_reps,
        } => bench(&common, &inputs, &threads, &exec, min_reps, max_reps),
        Command::Simulate {
            input,
            threads,
            exec,
        } => simulate(&common, &input, threads, &exec),
        Command::Features {
            inputs,
            threads,
            exec,
            counters,
            precedence,
        } => features(
            &common,
            &inputs,
            threads,
            &exec,
            counters.as_deref(),
            precedence.as_deref(),
        ),
        Command::Train {
            features,
            train_frac,
            max_depth,
            min_leaf,
            trees,
            no_bootstrap,
            report,
        } => {
            let cfg = TrainConfig {
                train_fraction: train_frac,
                max_depth,
                min_samples_leaf: min_leaf,
                n_trees: trees,
                seed: common.seed,
                bootstrap: !no_bootstrap,
            };
            train(&common, &features, cfg, report.as_deref())
        }
        Command::Importance { model, tree } => importance(&common, &model, tree),
        Command::Advise {
            features,
            matrix,
            json,
            job_var,
            l2_change,
            nnz_avg,
            nnz_var,
        } => {
            let th = Thresholds {
                job_var,
                l2_dcmr_change: l2_change,
                nnz_avg,
                nnz_var,
                ..Thresholds::default()
            };
            match (features, matrix) {
                (Some(f), None) => advise_features(&common, &f, &th, json),
                (None, Some(m)) => advise_matrix(&common, &m, &th, json),
                _ => Err(usage("give a feature CSV or --matrix")),
            }
        }
        Command::Generate { kind } => generate(&common, kind),
        Command::Reorder {
            input,
            window,
            perm,
        } => reorder(&common, &input, window, perm.as_deref()),
    }
}

fn convert(
    common: &Common,
    input: &Path,
    to: ConvertTarget,
    omega: usize,
    sigma: usize,
) -> CmdResult {
    let coo = read_matrix_market(input)?;
    let mut w = output::open(common.out.as_deref())?;
    match to {
        ConvertTarget::Csr => w.write_all(render_csr(&coo.to_csr()).as_bytes())?,
        ConvertTarget::Csr5 => {
            w.write_all(render_csr5(&coo.to_csr().to_csr5(omega, sigma)?).as_bytes())?
        }
        ConvertTarget::Mtx => write_matrix_market_to(&coo.normalized(), &mut w)?,
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SimRecord<'a> {
    matrix: &'a str,
    format: Format,
    scheme: PartitionScheme,
    n_threads: usize,
    placement: &'a Placement,
    nnz: usize,
    job_var: f64,
    l1_dca: u64,
    l1_dcm: u64,
    l2_dca: u64,
    l2_dcm: u64,
    slowest_thread: usize,
    max_cost: f64,
    modeled_speedup: f64,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    matrix: &'a str,
    error: String,
}

fn bench(
    common: &Common,
    inputs: &Inputs,
    threads: &[usize],
    exec: &ExecArgs,
    min_reps: usize,
    max_reps: usize,
) -> CmdResult {
    if threads.is_empty() || threads.contains(&0) {
        return Err(usage("thread counts must be at least 1"));
    }
    if min_reps == 0 || max_reps < min_reps {
        return Err(usage("need 1 <= --min-reps <= --max-reps"));
    }
    let choice = exec_choice(exec)?;
    let topo = load_topology(common)?;
    let entries = resolve_inputs(inputs)?;
    let mut w = output::open(common.out.as_deref())?;
    let mut failed = 0;
    for (name, path) in &entries {
        let result = match common.mode {
            Mode::Simulate => bench_simulated(name, path, threads, &choice, &topo, &mut *w),
            Mode::Measure => bench_measured(
                name, path, threads, &choice, &topo, min_reps, max_reps, &mut *w,
            ),
        };
        match result {
            Ok(()) => {}
            Err(Failure::Runtime(e)) => {
                failed += 1;
                eprintln!("{name}: {e}");
                write_line(
                    &mut *w,
                    &ErrorRecord {
                        matrix: name,
                        error: e.to_string(),
                    },
                )?;
            }
            Err(other) => return Err(other),
        }
    }
    w.flush()?;
    Ok(if failed > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    })
}

fn bench_simulated(
    name: &str,
    path: &Path,
    threads: &[usize],
    choice: &ExecChoice,
    topo: &Topology,
    w: &mut dyn Write,
) -> Result<(), Failure> {
    let stored = Stored::new(load_csr(path)?, choice)?;
    let op = stored.op();
    let scheme = choice.scheme.unwrap_or_else(|| op.default_scheme());
    let base_plan = partition(op, scheme, 1)?;
    let base = simulate_spmv(op, &base_plan, topo, &single_thread(&choice.placement))?;
    for &t in threads {
        let plan = partition(op, scheme, t)?;
        let sim = simulate_spmv(op, &plan, topo, &choice.placement)?;
        write_line(
            w,
            &sim_record(name, op, &plan, &choice.placement, &sim, base.max_cost())?,
        )?;
    }
    Ok(())
}

fn sim_record<'a>(
    name: &'a str,
    op: Operand<'_>,
    plan: &PartitionPlan,
    placement: &'a Placement,
    sim: &SimResult,
    base_cost: f64,
) -> spmvlab::Result<SimRecord<'a>> {
    Ok(SimRecord {
        matrix: name,
        format: op.format(),
        scheme: plan.scheme,
        n_threads: plan.n_threads,
        placement,
        nnz: op.nnz(),
        job_var: compute_job_var(plan)?,
        l1_dca: sim.totals.l1_dca,
        l1_dcm: sim.totals.l1_dcm,
        l2_dca: sim.totals.l2_dca,
        l2_dcm: sim.totals.l2_dcm,
        slowest_thread: sim.slowest_thread,
        max_cost: sim.max_cost(),
        modeled_speedup: base_cost / sim.max_cost(),
    })
}

#[allow(clippy::too_many_arguments)]
fn bench_measured(
    name: &str,
    path: &Path,
    threads: &[usize],
    choice: &ExecChoice,
    topo: &Topology,
    min_reps: usize,
    max_reps: usize,
    w: &mut dyn Write,
) -> Result<(), Failure> {
    let stored = Stored::new(load_csr(path)?, choice)?;
    let op = stored.op();
    let mut spec = BenchSpec {
        matrix: name.to_string(),
        n_threads: 1,
        scheme: choice.scheme,
        placement: choice.placement.clone(),
        cores: topo.cores,
        group_size: topo.group_size,
        timing: TimingConfig {
            min_reps,
            max_reps,
            ..TimingConfig::default()
        },
        baseline: None,
    };
    let mut order: Vec<usize> = threads.to_vec();
    // the 1-thread run goes first so the others can report speedup
    order.sort_by_key(|&t| t != 1);
    for t in order {
        spec.n_threads = t;
        let record = run_benchmark(op, &spec, &mut WallTimer)?;
        if t == 1 {
            spec.baseline = Some(record.mean_time);
        }
        write_line(w, &record)?;
    }
    Ok(())
}

fn simulate(common: &Common, input: &Path, threads: usize, exec: &ExecArgs) -> CmdResult {
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let choice = exec_choice(exec)?;
    let topo = load_topology(common)?;
    let stored = Stored::new(load_csr(input)?, &choice)?;
    let op = stored.op();
    let plan = partition(
        op,
        choice.scheme.unwrap_or_else(|| op.default_scheme()),
        threads,
    )?;
    let sim = simulate_spmv(op, &plan, &topo, &choice.placement)?;
    let mut w = output::open(common.out.as_deref())?;
    let text = serde_json::to_string_pretty(&sim).map_err(spmvlab::Error::from)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn features(
    common: &Common,
    inputs: &Inputs,
    threads: usize,
    exec: &ExecArgs,
    counters: Option<&Path>,
    precedence: Option<&str>,
) -> CmdResult {
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    if precedence.is_some() && counters.is_none() {
        return Err(usage("--precedence needs --counters"));
    }
    let precedence = precedence
        .map(|p| p.parse::<Precedence>())
        .transpose()
        .map_err(|e| usage(e.to_string()))?;
    let choice = exec_choice(exec)?;
    if choice.scheme.is_some() {
        return Err(usage("features always use the format's default scheme"));
    }
    let topo = load_topology(common)?;
    let import = counters.map(CounterImport::load).transpose()?;
    let entries = resolve_inputs(inputs)?;

    let mut samples = Vec::new();
    let mut failed = 0;
    for (name, path) in &entries {
        let result = (|| -> spmvlab::Result<Sample> {
            let m = load_csr(path)?;
            let stored = Stored::new(m.clone(), &choice)?;
            let run = ScalingRun::new(stored.op(), &topo, &choice.placement, threads)?;
            let sources = CounterSources {
                simulated: Some((&run.single, &run.parallel)),
                imported: import.as_ref(),
                precedence,
            };
            let fv = build_feature_vector(name, &m, &run.plan, &sources)?;
            match common.mode {
                Mode::Simulate => Sample::new(
                    name.as_str(),
                    fv,
                    run.modeled_speedup(),
                    LabelSource::Modeled,
                ),
                Mode::Measure => {
                    let speedup = measured_speedup(name, stored.op(), &choice, &topo, threads)?;
                    Sample::new(name.as_str(), fv, speedup, LabelSource::Measured)
                }
            }
        })();
        match result {
            Ok(s) => samples.push(s),
            Err(e) => {
                failed += 1;
                eprintln!("{name}: {e}");
            }
        }
    }
    let mut w = output::open(common.out.as_deref())?;
    write_samples_csv(&samples, &mut w)?;
    w.flush()?;
    Ok(if failed > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    })
}

fn measured_speedup(
    name: &str,
    op: Operand<'_>,
    choice: &ExecChoice,
    topo: &Topology,
    threads: usize,
) -> spmvlab::Result<f64> {
    let mut spec = BenchSpec {
        matrix: name.to_string(),
        n_threads: 1,
        scheme: None,
        placement: single_thread(&choice.placement),
        cores: topo.cores,
        group_size: topo.group_size,
        timing: TimingConfig::default(),
        baseline: None,
    };
    let base = run_benchmark(op, &spec, &mut WallTimer)?;
    spec.n_threads = threads;
    spec.placement = choice.placement.clone();
    spec.baseline = Some(base.mean_time);
    let run = run_benchmark(op, &spec, &mut WallTimer)?;
    Ok(run.speedup.unwrap_or(1.0))
}

fn read_samples(path: &Path) -> Result<Vec<Sample>, Failure> {
    let file = std::fs::File::open(path).map_err(|e| spmvlab::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(read_samples_csv(file)?)
}

fn train(common: &Common, features: &Path, cfg: TrainConfig, report: Option<&Path>) -> CmdResult {
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let samples = read_samples(features)?;
    let data = Dataset::from_samples(&samples)?;
    let (model, holdout) = train_holdout(&data, &cfg)?;
    let mut w = output::open(common.out.as_deref())?;
    writeln!(w, "{}", model.to_json()?)?;
    w.flush()?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "trained {} trees on {} samples; holdout {}: MAE {} R2 {}",
        model.trees.len(),
        holdout.n_train,
        holdout.n_holdout,
        fmt(holdout.mae),
        fmt(holdout.r2)
    );
    if let Some(path) = report {
        let text = serde_json::to_string_pretty(&holdout).map_err(spmvlab::Error::from)?;
        std::fs::write(path, text + "\n").map_err(|e| spmvlab::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    Ok(ExitCode::SUCCESS)
}

fn importance(common: &Common, model: &Path, tree: Option<usize>) -> CmdResult {
    let model = Forest::load(model)?;
    let mut w = output::open(common.out.as_deref())?;
    match tree {
        Some(i) => w.write_all(export_tree(&model, i)?.as_bytes())?,
        None => {
            for (name, weight) in feature_importance(&model) {
                writeln!(w, "{name}\t{weight:.6}")?;
            }
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Advice<'a> {
    matrix: &'a str,
    recommendations: Vec<Recommendation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    evaluations: Vec<EvaluationReport>,
}

fn emit_advice(common: &Common, advice: &[Advice<'_>], json: bool) -> CmdResult {
    let mut w = output::open(common.out.as_deref())?;
    if json {
        let text = serde_json::to_string_pretty(advice).map_err(spmvlab::Error::from)?;
        writeln!(w, "{text}")?;
    } else {
        for a in advice {
            writeln!(w, "{}", a.matrix)?;
            w.write_all(render_table(&a.recommendations).as_bytes())?;
            for e in &a.evaluations {
                writeln!(
                    w,
                    "  {}: job_var {:.3} -> {:.3}, L2_DCM {} -> {}, modeled speedup {:.3} -> {:.3}",
                    e.rule,
                    e.before.job_var,
                    e.after.job_var,
                    e.before.l2_dcm,
                    e.after.l2_dcm,
                    e.before.modeled_speedup,
                    e.after.modeled_speedup
                )?;
            }
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn advise_features(common: &Common, features: &Path, th: &Thresholds, json: bool) -> CmdResult {
    let samples = read_samples(features)?;
    let advice = samples
        .iter()
        .map(|s| {
            Ok(Advice {
                matrix: &s.matrix,
                recommendations: advise(&s.features, th)?,
                evaluations: Vec::new(),
            })
        })
        .collect::<spmvlab::Result<Vec<_>>>()?;
    emit_advice(common, &advice, json)
}

fn advise_matrix(common: &Common, path: &Path, th: &Thresholds, json: bool) -> CmdResult {
    let topo = load_topology(common)?;
    let m = load_csr(path)?;
    let name = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let run = ScalingRun::new(
        Operand::Csr(&m),
        &topo,
        &Placement::Compact,
        topo.group_size,
    )?;
    let sources = CounterSources {
        simulated: Some((&run.single, &run.parallel)),
        ..Default::default()
    };
    let fv = build_feature_vector(&name, &m, &run.plan, &sources)?;
    let recommendations = advise(&fv, th)?;
    let evaluations = recommendations
        .iter()
        .map(|r| evaluate_recommendation(&m, r.rule, &topo))
        .collect::<spmvlab::Result<Vec<_>>>()?;
    let advice = [Advice {
        matrix: &name,
        recommendations,
        evaluations,
    }];
    emit_advice(common, &advice, json)
}

fn generate(common: &Common, kind: GenerateKind) -> CmdResult {
    let seed = common.seed;
    let coo = match kind {
        GenerateKind::Example => example_matrix().to_coo(),
        GenerateKind::Clustered {
            rows,
            hot_rows,
            nnz_hot,
            nnz_cold,
        } => gen_clustered(rows, hot_rows, nnz_hot, nnz_cold, seed)?,
        GenerateKind::Locality {
            groups,
            rows_per_group,
            cols,
            nnz_per_row,
        } => gen_poor_locality(&LocalityPattern {
            n_groups: groups,
            rows_per_group,
            cols,
            nnz_per_row,
            seed,
        })?,
        GenerateKind::Banded {
            rows,
            half_band,
            nnz_per_row,
        } => gen_banded(rows, half_band, nnz_per_row, seed)?,
    };
    let mut w = output::open(common.out.as_deref())?;
    write_matrix_market_to(&coo.normalized(), &mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn reorder(
    common: &Common,
    input: &Path,
    window: Option<usize>,
    perm_out: Option<&Path>,
) -> CmdResult {
    if window == Some(0) {
        return Err(usage("--window must be at least 1"));
    }
    let topo = load_topology(common)?;
    let m = load_csr(input)?;
    let window = window.unwrap_or_else(|| default_reorder_window(&topo));
    let (reordered, perm) = locality_reorder(&m, window)?;
    let mut w = output::open(common.out.as_deref())?;
    write_matrix_market_to(&reordered.to_coo(), &mut w)?;
    w.flush()?;
    if let Some(path) = perm_out {
        let text: String = perm.perm().iter().map(|p| format!("{p}\n")).collect();
        std::fs::write(path, text).map_err(|e| spmvlab::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    Ok(ExitCode::SUCCESS)
}
