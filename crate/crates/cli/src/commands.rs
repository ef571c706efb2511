use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use corrgress::diagnostics::{
    fitted_class_probs, fitted_correlations, render_class_probs, render_correlations, render_summary, summarize as posterior_summary,
    ClassProbRow, CorrelationRow, DiagnosticsError, PosteriorSummary, Profile,
};
use corrgress::engine::{run_chains, DrawStore, EngineError, RunMetadata};
use corrgress::feasibility::{infeasible_points, TestSetStrategy};
use corrgress::io::{read_dataset_path, write_dataset, IoError};
use corrgress::linalg::Matrix;
use corrgress::measurement::{fit_measurement as fit_side, FitReport, SideData, Step1Params};
use corrgress::model::{mask_missing, simulate_dataset, Dataset, MeasurementParams, ModelSpec, StructuralParams};
use corrgress::samplers::{derive_stream_id, RandomStream};
use serde::Serialize;

use crate::config::{
    load, read_json, CheckFeasibleConfig, Loaded, CovariateDist, FitConfig, FitMeasurementConfig, SimulateConfig,
};
use crate::{output_paths, CliError, IoArgs, RunArgs};

const COVARIATE_BLOCK: u64 = 202;
/// Convergence flags in the summary report.
const RHAT_LIMIT: f64 = 1.1;
const ESS_LIMIT: f64 = 100.0;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::runtime)
}

/// Stdout writes that tolerate a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn read_data(spec: &ModelSpec, path: &Path) -> Result<Dataset, CliError> {
    read_dataset_path(spec, path).map_err(|e| match e {
        IoError::Csv(_) => CliError::invalid(e),
        _ => CliError::invalid(format!("{}: {e}", path.display())),
    })
}

/// Structural parameters from a name → value map over the flattened names.
fn params_from_names(
    spec: &ModelSpec,
    values: &BTreeMap<String, f64>,
    prefix: &str,
) -> Result<StructuralParams, CliError> {
    let names = StructuralParams::names(spec);
    let mut flat = StructuralParams::initial(spec).flatten(spec);
    for (name, &v) in values {
        let j = names
            .iter()
            .position(|n| n == name && n.starts_with(prefix))
            .ok_or_else(|| CliError::invalid(format!("unknown parameter {name:?}")))?;
        if !v.is_finite() {
            return Err(CliError::invalid(format!("parameter {name:?} is not finite")));
        }
        flat[j] = v;
    }
    let p = StructuralParams::unflatten(spec, &flat).map_err(CliError::invalid)?;
    p.validate(spec).map_err(CliError::invalid)?;
    Ok(p)
}

/// Base covariates with the constant first; each unit has its own stream.
fn simulate_covariates(spec: &ModelSpec, dists: &BTreeMap<String, CovariateDist>, n: usize, seed: u64) -> Matrix {
    let base = spec.base_names();
    let p = base.len() + 1;
    let mut z = Vec::with_capacity(n * p);
    for i in 0..n {
        let mut st = RandomStream::new(seed, derive_stream_id(0, COVARIATE_BLOCK, i as u64));
        z.push(1.0);
        for name in base {
            z.push(match dists[name] {
                CovariateDist::Bernoulli { p } => (st.uniform() < p) as u8 as f64,
                CovariateDist::Uniform { lo, hi } => lo + (hi - lo) * st.uniform(),
                CovariateDist::Normal { mean, sd } => mean + sd * st.normal(),
            });
        }
    }
    Matrix::from_row_major(n, p, z)
}

#[derive(Serialize)]
struct Truth {
    seed: u64,
    n: usize,
    params: BTreeMap<String, f64>,
    measurement: MeasurementParams,
}

/// What `simulate` writes, before it is written.
pub struct Simulated {
    pub spec: ModelSpec,
    pub data: Dataset,
    pub params: StructuralParams,
    pub phi: MeasurementParams,
    pub seed: u64,
}

pub fn simulated_dataset(cfg: &Loaded<SimulateConfig>, seed: Option<u64>) -> Result<Simulated, CliError> {
    let c = &cfg.config;
    let spec = cfg.model(&c.model)?;
    c.validate(&spec)?;
    let phi = cfg.measurement(&c.measurement)?;
    let params = params_from_names(&spec, &c.truth, "")?;
    let seed = seed.unwrap_or(c.seed);
    let z = simulate_covariates(&spec, &c.covariates, c.n, seed);
    let (data, _) = simulate_dataset(&spec, &phi, &params, &z, seed).map_err(CliError::invalid)?;
    let data = mask_missing(&spec, &data, c.missing_rate, seed).map_err(CliError::invalid)?;
    Ok(Simulated {
        spec,
        data,
        params,
        phi,
        seed,
    })
}

pub fn simulate(io: &IoArgs, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = load::<SimulateConfig>(&io.config)?;
    let out = cfg.out_dir(io.out.as_deref(), cfg.config.out.as_deref())?;
    // validate fully before touching the output directory
    let sim = simulated_dataset(&cfg, seed)?;
    let paths = output_paths(&out, &["data.csv", "truth.json"], io.force)?;

    let mut w = create(&paths[0])?;
    write_dataset(&sim.spec, &sim.data, &mut w).map_err(CliError::runtime)?;
    w.flush().map_err(CliError::runtime)?;
    let truth = Truth {
        seed: sim.seed,
        n: sim.data.n(),
        params: StructuralParams::names(&sim.spec).into_iter().zip(sim.params.flatten(&sim.spec)).collect(),
        measurement: sim.phi,
    };
    write_json(&paths[1], &truth)?;
    emit(&format!("simulated {} units into {}\n", sim.data.n(), out.display()));
    Ok(())
}

#[derive(Serialize)]
struct SideFit {
    side: String,
    dim: String,
    params: Step1Params,
    report: FitReport,
}

pub fn fit_measurement(io: &IoArgs) -> Result<(), CliError> {
    let cfg = load::<FitMeasurementConfig>(&io.config)?;
    let c = &cfg.config;
    c.validate()?;
    let spec = cfg.model(&c.model)?;
    let data = read_data(&spec, &cfg.resolve(&c.data))?;
    let out = cfg.out_dir(io.out.as_deref(), c.out.as_deref())?;
    let paths = output_paths(&out, &["measurement.json", "measurement_report.json"], io.force)?;

    let mut phi = MeasurementParams::default();
    let mut fits = Vec::new();
    for side in 0..2 {
        let Some(&dim) = spec.side_dims(side).iter().find(|&&d| spec.dims()[d].is_multi_item()) else {
            continue;
        };
        let sd = SideData::from_dataset(&spec, &data, side).map_err(CliError::invalid)?;
        let (params, report) = fit_side(&sd, None, c.quadrature_nodes, c.tolerance).map_err(CliError::runtime)?;
        let name = spec.dims()[dim].name.clone();
        if !report.converged || report.ill_conditioned || !report.hessian_negative_definite {
            eprintln!(
                "warning: side {}: converged={} condition={:e} negative_definite={}",
                spec.side_name(side),
                report.converged,
                report.condition_number,
                report.hessian_negative_definite
            );
        }
        phi.dims.insert(name.clone(), params.phi.clone());
        fits.push(SideFit {
            side: spec.side_name(side).to_string(),
            dim: name,
            params,
            report,
        });
    }
    write_json(&paths[0], &phi)?;
    write_json(&paths[1], &fits)?;
    emit(&format!("fitted {} measurement blocks into {}\n", fits.len(), out.display()));
    Ok(())
}

fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::Config(_) | EngineError::Model(_) => CliError::invalid(e),
        _ => CliError::runtime(e),
    }
}

pub fn fit(io: &IoArgs, run: &RunArgs) -> Result<(), CliError> {
    let cfg = load::<FitConfig>(&io.config)?;
    let c = &cfg.config;
    let spec = cfg.model(&c.model)?;
    let data = read_data(&spec, &cfg.resolve(&c.data))?;
    let out = cfg.out_dir(io.out.as_deref(), c.out.as_deref())?;
    let phi = match &c.measurement {
        Some(m) => cfg.measurement(m)?,
        None => {
            let p = out.join("measurement.json");
            if !p.exists() {
                return Err(CliError::invalid(format!(
                    "no measurement parameters: set \"measurement\" or run fit-measurement into {}",
                    out.display()
                )));
            }
            read_json(&p)?
        }
    };
    phi.per_dim(&spec).map_err(CliError::invalid)?;

    let mut effective = c.clone();
    let s = &mut effective.sampler;
    s.seed = run.seed.unwrap_or(s.seed);
    s.chains = run.chains.unwrap_or(s.chains);
    s.iterations = run.iterations.unwrap_or(s.iterations);
    s.burn_in = run.burn_in.unwrap_or(s.burn_in);
    s.thin = run.thin.unwrap_or(s.thin);
    s.validate().map_err(CliError::invalid)?;
    effective.priors.validate().map_err(CliError::invalid)?;
    let test_set = spec.corr_test_set(data.z(), &c.test_set).map_err(CliError::invalid)?;
    let paths = output_paths(&out, &["draws.csv", "draws.meta.json"], io.force)?;

    let start = Instant::now();
    let store = run_chains(&spec, &phi, &data, &test_set, &effective.priors, &effective.sampler).map_err(engine_error)?;
    let wall = start.elapsed().as_secs_f64();

    let mut w = create(&paths[0])?;
    store.write_csv(&mut w).map_err(CliError::runtime)?;
    w.flush().map_err(CliError::runtime)?;
    let config = serde_json::to_value(&effective).map_err(CliError::runtime)?;
    let meta = RunMetadata::new(config, effective.sampler.seed, store.stats().to_vec(), wall);
    write_json(&paths[1], &meta)?;
    emit(&format!(
        "{} draws from {} chains in {wall:.1} s into {}\n",
        store.len(),
        store.n_chains(),
        out.display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceReport {
    max_rhat: f64,
    min_ess: f64,
    /// Parameters with R-hat above the limit or ESS below it.
    flagged: Vec<String>,
}

#[derive(Serialize)]
struct Summary {
    posterior: PosteriorSummary,
    convergence: ConvergenceReport,
    correlations: Vec<CorrelationRow>,
    class_probs: Vec<ClassProbRow>,
}

fn diagnostics_error(e: DiagnosticsError) -> CliError {
    match e {
        DiagnosticsError::OutOfRange { .. } => CliError::runtime(e),
        _ => CliError::invalid(e),
    }
}

fn convergence_report(s: &PosteriorSummary) -> ConvergenceReport {
    let flagged = s
        .params
        .iter()
        .filter(|p| p.rhat > RHAT_LIMIT || p.ess < ESS_LIMIT)
        .map(|p| p.name.clone())
        .collect();
    ConvergenceReport {
        max_rhat: s.params.iter().map(|p| p.rhat).fold(f64::NAN, f64::max),
        min_ess: s.params.iter().map(|p| p.ess).fold(f64::NAN, f64::min),
        flagged,
    }
}

pub fn summarize(io: &IoArgs) -> Result<(), CliError> {
    let cfg = load::<FitConfig>(&io.config)?;
    let c = &cfg.config;
    let spec = cfg.model(&c.model)?;
    let data = read_data(&spec, &cfg.resolve(&c.data))?;
    let out = cfg.out_dir(io.out.as_deref(), c.out.as_deref())?;
    let draws = out.join("draws.csv");
    let f = File::open(&draws)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}; run fit first", draws.display())))?;
    let mut store = DrawStore::read_csv(BufReader::new(f)).map_err(CliError::invalid)?;
    let meta = out.join("draws.meta.json");
    if meta.exists() {
        store.set_stats(read_json::<RunMetadata>(&meta)?.chains);
    }
    let paths = output_paths(&out, &["summary.json", "summary.txt"], io.force)?;

    let posterior = posterior_summary(&store).map_err(diagnostics_error)?;
    let profiles = if c.profiles.is_empty() {
        vec![Profile::overall()]
    } else {
        c.profiles.clone()
    };
    let correlations = fitted_correlations(&store, &spec, &data, &profiles).map_err(diagnostics_error)?;
    let class_probs = fitted_class_probs(&store, &spec, &data, &profiles).map_err(diagnostics_error)?;
    let convergence = convergence_report(&posterior);

    let mut text = render_summary(&posterior);
    text.push_str(&format!(
        "\nmax rhat {:.3}, min ess {:.0}; flagged: {}\n",
        convergence.max_rhat,
        convergence.min_ess,
        if convergence.flagged.is_empty() {
            "none".to_string()
        } else {
            convergence.flagged.join(", ")
        }
    ));
    text.push_str("\nfitted correlations\n");
    text.push_str(&render_correlations(&correlations));
    text.push_str("\nclass probabilities\n");
    text.push_str(&render_class_probs(&class_probs));

    let mut w = create(&paths[1])?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(CliError::runtime)?;
    write_json(
        &paths[0],
        &Summary {
            posterior,
            convergence,
            correlations,
            class_probs,
        },
    )?;
    emit(&text);
    Ok(())
}

#[derive(Serialize)]
struct Violation {
    index: usize,
    point: Vec<f64>,
}

#[derive(Serialize)]
struct FeasibilityReport {
    feasible: bool,
    covariates: Vec<String>,
    test_points: usize,
    violations: Vec<Violation>,
}

/// Prints a JSON report. An infeasible matrix is a finding, not an error,
/// so the exit code is 0 either way.
pub fn check_feasible(config: &Path) -> Result<(), CliError> {
    let cfg = load::<CheckFeasibleConfig>(config)?;
    let c = &cfg.config;
    let spec = cfg.model(&c.model)?;
    let z = match (&c.data, &c.test_set) {
        (Some(p), _) => read_data(&spec, &cfg.resolve(p))?.z().clone(),
        (None, TestSetStrategy::ObservedDistinct) => {
            return Err(CliError::invalid("the observed_distinct test set needs \"data\""))
        }
        (None, _) => Matrix::zeros(0, spec.base_names().len() + 1),
    };
    let test_set = spec.corr_test_set(&z, &c.test_set).map_err(CliError::invalid)?;
    let params = params_from_names(&spec, &c.alpha, "alpha.")?;
    let bad = infeasible_points(&params.alpha, &test_set);
    let report = FeasibilityReport {
        feasible: bad.is_empty(),
        covariates: spec.corr_cov().iter().map(|&m| spec.covariate_names()[m].clone()).collect(),
        test_points: test_set.len(),
        violations: bad
            .into_iter()
            .map(|index| Violation {
                index,
                point: test_set.points().row(index).to_vec(),
            })
            .collect(),
    };
    emit(&(serde_json::to_string_pretty(&report).map_err(CliError::runtime)? + "\n"));
    Ok(())
}
