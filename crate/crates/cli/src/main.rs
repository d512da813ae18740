//! Command-line front end: deterministic experiment runs over measure files,
//! JSON/CSV reports.
//!
//! Exit codes: 0 success, 2 config error, 3 numeric failure.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use swot_core::calculus::{check_first_bound, check_second_bound, grad_measure, hess_x_measure};
use swot_core::gauge::{
    bp_solve, phi_derivative_bounds, verify_conclusions, GaugeParams, SearchSpace,
};
use swot_core::sliced::sw2_sigma_squared_with_order;
use swot_core::{
    DiscreteMeasure, Result as CoreResult, RuleMethod, SmoothingLevel, SphereRule, TimedMeasure,
};

use config::{
    load_bp_config, load_measure, BoundPair, DirectionValue, DistReport, GradReport, HessReport,
    ObjectiveSpec, CONVENTION,
};

#[derive(Parser)]
#[command(
    name = "swot",
    about = "Sliced Wasserstein distances, measure derivatives, and a smooth variational principle solver",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Pick the exact rule for the dimension (pair for k=1, circle for k=2,
    /// antithetic Monte Carlo above).
    Auto,
    ExactPair,
    UniformCircle,
    MonteCarlo,
}

#[derive(Args)]
struct RuleArgs {
    /// Number of sphere-rule nodes (ignored for k = 1).
    #[arg(long, default_value_t = 64)]
    rule_nodes: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    rule_method: MethodArg,
    /// Seed for Monte Carlo rules; recorded in every report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RuleArgs {
    fn build(&self, k: usize) -> CoreResult<SphereRule> {
        match self.rule_method {
            MethodArg::Auto => SphereRule::default_for(k, self.rule_nodes, self.seed),
            MethodArg::ExactPair => SphereRule::build(k, 2, RuleMethod::ExactPair, self.seed),
            MethodArg::UniformCircle => {
                SphereRule::build(k, self.rule_nodes, RuleMethod::UniformCircle, self.seed)
            }
            MethodArg::MonteCarlo => {
                SphereRule::build(k, self.rule_nodes, RuleMethod::MonteCarlo, self.seed)
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Squared sliced Wasserstein distance between two measure files.
    Dist {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Gaussian smoothing level; 0 means the unregularized distance.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[command(flatten)]
        rule: RuleArgs,
        /// Quadrature budget for each 1D distance.
        #[arg(long, default_value_t = 128)]
        quad_order: usize,
        /// Also report the square root of the squared distance.
        #[arg(long)]
        sqrt: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure derivative of the squared regularized distance at mu's atoms.
    Grad {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[command(flatten)]
        rule: RuleArgs,
        /// Gauss-Hermite order for the smoothing expectation.
        #[arg(long, default_value_t = 64)]
        hermite: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mixed second derivative at mu's atoms.
    Hess {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, default_value_t = 64)]
        hermite: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the variational principle solver from a config file.
    BpSolve {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's delta.
        #[arg(long)]
        delta: Option<f64>,
        /// Override the config's lambda.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV iteration log (defaults to <out>.iterations.csv).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Parameter sweeps emitting CSV for convergence studies.
    Sweep {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Comma-separated parameter values for the sweep.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, default_value_t = 64)]
        hermite: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    /// Sphere-rule node counts vs distance value.
    Nodes,
    /// Hermite orders vs gradient error against a finite-difference probe.
    Hermite,
    /// Smoothing levels vs distance value.
    Sigma,
}

enum CliError {
    Config(String),
    Numeric(String),
}

impl From<swot_core::Error> for CliError {
    fn from(e: swot_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Numeric(format!("cannot serialize report: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_pair(mu: &Path, nu: &Path) -> Result<(DiscreteMeasure, DiscreteMeasure), CliError> {
    let a = load_measure(mu).map_err(CliError::Config)?;
    let b = load_measure(nu).map_err(CliError::Config)?;
    if a.dim() != b.dim() {
        return Err(CliError::Config(format!(
            "dimension mismatch: {} is {}-dimensional, {} is {}-dimensional",
            mu.display(),
            a.dim(),
            nu.display(),
            b.dim()
        )));
    }
    Ok((a, b))
}

fn smoothing(sigma: f64) -> Result<SmoothingLevel, CliError> {
    SmoothingLevel::new(sigma).map_err(|e| CliError::Config(e.to_string()))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Dist {
            mu,
            nu,
            sigma,
            rule,
            quad_order,
            sqrt,
            out,
        } => {
            let (a, b) = load_pair(&mu, &nu)?;
            let s = smoothing(sigma)?;
            let sphere = rule
                .build(a.dim())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = sw2_sigma_squared_with_order(&a, &b, s, &sphere, quad_order)?;
            let report = DistReport {
                command: "dist",
                convention: CONVENTION,
                mu: mu.display().to_string(),
                nu: nu.display().to_string(),
                sigma,
                rule: r.rule.clone(),
                quad_order,
                value: r.value,
                sqrt_value: sqrt.then(|| r.value.sqrt()),
                per_direction: r
                    .per_direction
                    .iter()
                    .map(|(d, v)| DirectionValue {
                        direction: d.components().to_vec(),
                        w2_squared: *v,
                    })
                    .collect(),
            };
            emit(&report, out.as_deref())
        }
        Command::Grad {
            mu,
            nu,
            sigma,
            rule,
            hermite,
            out,
        } => {
            let (a, b) = load_pair(&mu, &nu)?;
            let s = smoothing(sigma)?;
            let sphere = rule
                .build(a.dim())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let field = grad_measure(&a, &b, s, &sphere, hermite)?;
            let (lhs, rhs) = check_first_bound(&a, &b, s, &sphere, hermite)?;
            let report = GradReport {
                command: "grad",
                convention: CONVENTION,
                mu: mu.display().to_string(),
                nu: nu.display().to_string(),
                sigma,
                rule: sphere.spec().clone(),
                hermite_order: hermite,
                per_atom_gradients: field.per_atom().to_vec(),
                first_bound: BoundPair {
                    lhs,
                    rhs,
                    ok: lhs <= rhs,
                },
                saturations: field.saturation_count(),
            };
            emit(&report, out.as_deref())
        }
        Command::Hess {
            mu,
            nu,
            sigma,
            rule,
            hermite,
            out,
        } => {
            let (a, b) = load_pair(&mu, &nu)?;
            let s = smoothing(sigma)?;
            let sphere = rule
                .build(a.dim())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let field = hess_x_measure(&a, &b, s, &sphere, hermite)?;
            let (lhs, rhs) = check_second_bound(&a, &b, s, &sphere, hermite)?;
            let report = HessReport {
                command: "hess",
                convention: CONVENTION,
                mu: mu.display().to_string(),
                nu: nu.display().to_string(),
                sigma,
                rule: sphere.spec().clone(),
                hermite_order: hermite,
                per_atom_hessians: field.per_atom().to_vec(),
                second_bound: BoundPair {
                    lhs,
                    rhs,
                    ok: lhs <= rhs,
                },
                saturations: field.saturation_count(),
            };
            emit(&report, out.as_deref())
        }
        Command::BpSolve {
            config,
            delta,
            lambda,
            out,
            log,
        } => run_bp(&config, delta, lambda, out.as_deref(), log.as_deref()),
        Command::Sweep {
            mu,
            nu,
            kind,
            values,
            sigma,
            rule,
            hermite,
            out,
        } => run_sweep(
            &mu,
            &nu,
            kind,
            &values,
            sigma,
            &rule,
            hermite,
            out.as_deref(),
        ),
    }
}

#[derive(Serialize)]
struct BpOutput {
    command: &'static str,
    convention: &'static str,
    delta: f64,
    sigma: f64,
    lambda: f64,
    horizon: f64,
    rule: swot_core::RuleSpec,
    hermite_order: usize,
    sequence: Vec<usize>,
    selected: usize,
    selected_t: f64,
    selected_measure: String,
    objective_values: Vec<f64>,
    phi_values: Vec<f64>,
    conclusions: swot_core::gauge::ConclusionReport,
    conclusions_fresh: swot_core::gauge::ConclusionReport,
    all_conclusions_pass: bool,
    derivative_bounds: Vec<swot_core::gauge::DerivativeBoundsReport>,
}

fn run_bp(
    config_path: &Path,
    delta_override: Option<f64>,
    lambda_override: Option<f64>,
    out: Option<&Path>,
    log: Option<&Path>,
) -> Result<(), CliError> {
    let (cfg, base) = load_bp_config(config_path).map_err(CliError::Config)?;
    let delta = delta_override.unwrap_or(cfg.delta);
    let lambda = lambda_override.unwrap_or(cfg.lambda);
    let params =
        GaugeParams::new(delta, cfg.horizon).map_err(|e| CliError::Config(e.to_string()))?;
    let rule = SphereRule::from_spec(&cfg.rule).map_err(|e| CliError::Config(e.to_string()))?;

    let candidates: Vec<TimedMeasure> = cfg
        .candidates
        .iter()
        .map(|c| c.load(&base, cfg.horizon))
        .collect::<Result<_, _>>()
        .map_err(CliError::Config)?;
    if cfg.start_index >= candidates.len() {
        return Err(CliError::Config(format!(
            "start_index {} out of range for {} candidates",
            cfg.start_index,
            candidates.len()
        )));
    }
    let space = SearchSpace::new(candidates).map_err(|e| CliError::Config(e.to_string()))?;

    let target = match &cfg.objective {
        ObjectiveSpec::NegSw2ToTarget { target, .. } => {
            Some(load_measure(&base.join(target)).map_err(CliError::Config)?)
        }
        _ => None,
    };
    let s = params.smoothing();
    let objective = |tm: &TimedMeasure| -> CoreResult<f64> {
        match &cfg.objective {
            ObjectiveSpec::NegSecondMoment { time_weight } => {
                Ok(-tm.measure().second_moment() + time_weight * tm.t())
            }
            ObjectiveSpec::NegSw2ToTarget { time_weight, .. } => {
                let t = target.as_ref().expect("target loaded above");
                let d = sw2_sigma_squared_with_order(tm.measure(), t, s, &rule, 128)?;
                Ok(-d.value + time_weight * tm.t())
            }
            ObjectiveSpec::LinearMoments {
                coeffs,
                time_weight,
            } => {
                let mean = tm.measure().mean();
                if coeffs.len() != mean.len() {
                    return Err(swot_core::Error::DimensionMismatch {
                        expected: mean.len(),
                        found: coeffs.len(),
                    });
                }
                let dot: f64 = coeffs.iter().zip(&mean).map(|(c, m)| c * m).sum();
                Ok(dot + time_weight * tm.t())
            }
        }
    };

    let result = bp_solve(objective, &space, cfg.start_index, lambda, &params, &rule)?;
    let fresh = verify_conclusions(&result, objective, &space, lambda, &params, &rule)?;

    let probes: Vec<TimedMeasure> = if cfg.probes.is_empty() {
        vec![space.candidates()[result.selected].clone()]
    } else {
        cfg.probes
            .iter()
            .take(cfg.max_probes)
            .map(|p| p.load(&base, cfg.horizon))
            .collect::<Result<_, _>>()
            .map_err(CliError::Config)?
    };
    let derivative_bounds: Vec<_> = probes
        .iter()
        .map(|p| phi_derivative_bounds(p, &result, &space, &params, &rule, cfg.hermite_order))
        .collect::<CoreResult<_>>()?;

    if let Some(log_path) = log
        .map(Path::to_path_buf)
        .or_else(|| out.map(|o| o.with_extension("iterations.csv")))
    {
        let mut csv = String::from("step,chosen,objective,perturbed_value,rho_to_previous\n");
        for it in &result.iterations {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                it.step, it.chosen, it.objective, it.perturbed_value, it.rho_to_previous
            ));
        }
        std::fs::write(&log_path, csv)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", log_path.display())))?;
    }

    let all_pass = result.conclusions.all_pass()
        && fresh.all_pass()
        && derivative_bounds.iter().all(|d| d.all_pass());
    let output = BpOutput {
        command: "bp-solve",
        convention: CONVENTION,
        delta,
        sigma: params.sigma(),
        lambda,
        horizon: cfg.horizon,
        rule: cfg.rule.clone(),
        hermite_order: cfg.hermite_order,
        sequence: result.sequence.clone(),
        selected: result.selected,
        selected_t: space.candidates()[result.selected].t(),
        selected_measure: cfg.candidates[result.selected].measure.clone(),
        objective_values: result.objective_values.clone(),
        phi_values: result.phi_values.clone(),
        conclusions: result.conclusions.clone(),
        conclusions_fresh: fresh,
        all_conclusions_pass: all_pass,
        derivative_bounds,
    };
    emit(&output, out)
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    mu_path: &Path,
    nu_path: &Path,
    kind: SweepKind,
    values: &[f64],
    sigma: f64,
    rule_args: &RuleArgs,
    hermite: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let (mu, nu) = load_pair(mu_path, nu_path)?;
    let s = smoothing(sigma)?;
    let mut csv = String::new();
    match kind {
        SweepKind::Nodes => {
            csv.push_str("n_nodes,sw2_sigma_squared\n");
            for &v in values {
                let n = v as usize;
                if n == 0 {
                    return Err(CliError::Config("node counts must be >= 1".into()));
                }
                let rule = RuleArgs {
                    rule_nodes: n,
                    ..*rule_args
                }
                .build(mu.dim())
                .map_err(|e| CliError::Config(e.to_string()))?;
                let d = sw2_sigma_squared_with_order(&mu, &nu, s, &rule, 128)?;
                csv.push_str(&format!("{n},{}\n", d.value));
            }
        }
        SweepKind::Sigma => {
            csv.push_str("sigma,sw2_sigma_squared\n");
            let rule = rule_args
                .build(mu.dim())
                .map_err(|e| CliError::Config(e.to_string()))?;
            for &v in values {
                let sv = smoothing(v)?;
                let d = sw2_sigma_squared_with_order(&mu, &nu, sv, &rule, 128)?;
                csv.push_str(&format!("{v},{}\n", d.value));
            }
        }
        SweepKind::Hermite => {
            // gradient error against a central finite difference of the
            // objective, at the first atom's first coordinate
            csv.push_str("hermite_order,max_abs_gradient_error\n");
            let rule = rule_args
                .build(mu.dim())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let h = 1e-5;
            let fd: Vec<Vec<f64>> = (0..mu.len())
                .map(|j| {
                    (0..mu.dim())
                        .map(|d| {
                            let mut plus = mu.atoms()[j].clone();
                            plus[d] += h;
                            let mut minus = mu.atoms()[j].clone();
                            minus[d] -= h;
                            let up = sw2_sigma_squared_with_order(
                                &mu.with_atom(j, plus)?,
                                &nu,
                                s,
                                &rule,
                                256,
                            )?
                            .value;
                            let down = sw2_sigma_squared_with_order(
                                &mu.with_atom(j, minus)?,
                                &nu,
                                s,
                                &rule,
                                256,
                            )?
                            .value;
                            Ok((up - down) / (2.0 * h) / mu.weights()[j])
                        })
                        .collect::<CoreResult<Vec<f64>>>()
                })
                .collect::<CoreResult<_>>()?;
            for &v in values {
                let order = v as usize;
                let field = grad_measure(&mu, &nu, s, &rule, order)?;
                let mut err: f64 = 0.0;
                for (g, f) in field.per_atom().iter().zip(&fd) {
                    for (gi, fi) in g.iter().zip(f) {
                        err = err.max((gi - fi).abs());
                    }
                }
                csv.push_str(&format!("{order},{err:e}\n"));
            }
            let _ = hermite;
        }
    }
    match out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{csv}");
            std::io::stdout()
                .flush()
                .map_err(|e| CliError::Numeric(e.to_string()))
        }
    }
}
