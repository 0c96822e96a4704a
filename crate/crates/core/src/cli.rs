//! Command-line front end: argument parsing, run manifests and report files.
//!
//! Every report is a JSON document `{"manifest": ..., "result": ...}`; the
//! manifest records the subcommand, its parameters, the tool version, seeds
//! and a UTC timestamp. Only the timestamp varies between identical runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bracket::{
    build_bracket, empirical_bracket_count, realization_count_bound, remainder_bounds_check,
    BracketConfig,
};
use crate::error::{Error, Result};
use crate::linalg::bigfloat::{ExactValue, DEFAULT_PRECISION_BITS};
use crate::linalg::rational::det_exact;
use crate::measure::{random_measure, BaseMeasure, MixingMeasure};
use crate::sim::{
    build_grid, read_csv, scaling_fit, simulate_delta_probability, simulate_refinement,
    simulate_sup_probability, write_csv, SimConfig,
};
use crate::smallball::{
    cauchy_det_product, cauchy_matrix, delta_sequence, det_sigma_lower, det_sigma_threshold,
    kernel_x, kernel_y, lemma1_trials, lemma2_verify, optimal_m, ratio_bound_check,
    smallball_log_upper, Provenance, MAX_COMPUTED_M, MAX_M,
};

pub const PRECISION_ENV: &str = "LAPLACE_ENTROPY_PRECISION_BITS";

#[derive(Debug, Parser)]
#[command(name = "laplace-entropy", version, about = "Brackets, small-ball bounds and simulations for completely monotone functions")]
pub struct Cli {
    /// Print the full JSON report on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Working precision for high-precision determinants.
    #[arg(long, global = true, env = PRECISION_ENV, default_value_t = DEFAULT_PRECISION_BITS)]
    pub precision_bits: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and verify an epsilon-bracket for a mixing measure.
    Bracket(BracketArgs),
    /// Determinant, permanent and small-ball bounds.
    #[command(subcommand)]
    Smallball(SmallballCommand),
    /// Monte Carlo small-ball estimates.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Run the built-in consistency checks.
    VerifyAll(VerifyAllArgs),
}

#[derive(Debug, Args)]
pub struct BracketArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Mixing measure JSON: {"atoms": [[location, weight], ...]}.
    #[arg(long)]
    pub measure: PathBuf,
    /// `lebesgue01` or `atomic:<file>`.
    #[arg(long, default_value = "lebesgue01")]
    pub nu: String,
    /// Number of points for the containment check.
    #[arg(long, default_value_t = 10_000)]
    pub verify_grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Analytic,
    Computed,
}

#[derive(Debug, Subcommand)]
pub enum SmallballCommand {
    /// Upper bound on log P(sup |Y| < eps).
    Bound {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, value_enum, default_value = "analytic")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ratio bound, determinant/permanent checks and det Sigma lower bound.
    Verify {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random trials of the difference-determinant inequality.
    Lemma1 {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// P(max over a grid of |Y(t)| < eps) for a list of eps.
    Sup {
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 256)]
        grid_count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also run the doubled grid on common random numbers.
        #[arg(long)]
        refine: bool,
        /// CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// P(max_i |Y(delta_i)| < eps) on the design points.
    Delta {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit log(-log p) against log|log eps| from a `sim sup` CSV.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Two-column series file; defaults to the report path with `.series.csv`.
        #[arg(long)]
        series: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct VerifyAllArgs {
    /// Skip the slower checks.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: Value, seeds: Vec<u64>) -> Self {
        let parameters = match parameters {
            Value::Object(map) => map.into_iter().collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        Self {
            subcommand: subcommand.to_string(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

/// Writes `{"manifest": ..., "result": ...}` as pretty JSON.
pub fn emit_report(path: &Path, manifest: &RunManifest, result: &impl Serialize) -> Result<()> {
    let doc = json!({ "manifest": manifest, "result": result });
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// What a subcommand hands back for printing.
struct Outcome {
    manifest: RunManifest,
    result: Value,
    summary: String,
    /// False when a verification inside the report did not hold.
    passed: bool,
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns 0 on success, 1 on verification or runtime failure and 2 on usage
/// errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            if cli.json {
                let doc = json!({ "manifest": out.manifest, "result": out.result });
                println!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
            } else {
                println!("{}", out.summary);
            }
            if out.passed {
                0
            } else {
                eprintln!("verification failed");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::InvalidMeasure(_) => 2,
                _ => 1,
            }
        }
    }
}

/// Entry point for the binary.
pub fn run() -> i32 {
    dispatch(std::env::args_os())
}

fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Bracket(args) => run_bracket(args),
        Command::Smallball(cmd) => run_smallball(cmd, cli.precision_bits),
        Command::Sim(cmd) => run_sim(cmd),
        Command::VerifyAll(args) => run_verify_all(args, cli.precision_bits),
    }
}

fn finish(
    manifest: RunManifest,
    result: impl Serialize,
    out: Option<&PathBuf>,
    summary: String,
    passed: bool,
) -> Result<Outcome> {
    if let Some(path) = out {
        emit_report(path, &manifest, &result)?;
    }
    Ok(Outcome {
        manifest,
        result: serde_json::to_value(&result)?,
        summary,
        passed,
    })
}

fn parse_nu(spec: &str) -> Result<BaseMeasure> {
    if spec == "lebesgue01" {
        return Ok(BaseMeasure::LebesgueUnitInterval);
    }
    match spec.strip_prefix("atomic:") {
        Some(path) => BaseMeasure::load_atomic(path),
        None => Err(Error::InvalidArgument(format!(
            "--nu must be `lebesgue01` or `atomic:<file>`, got `{spec}`"
        ))),
    }
}

fn run_bracket(args: &BracketArgs) -> Result<Outcome> {
    let mu = MixingMeasure::load(&args.measure)?;
    let nu = parse_nu(&args.nu)?;
    let config = match nu {
        BaseMeasure::LebesgueUnitInterval => BracketConfig::lebesgue_default(args.epsilon, args.p)?,
        BaseMeasure::Atomic(_) => BracketConfig::atomic_default(args.epsilon, args.p, &nu)?,
    };
    let pair = build_bracket(&mu, &config, &nu)?;
    let containment = pair.verify_containment(&mu, args.verify_grid);
    let result = json!({
        "config": config,
        "slack_lower": pair.slack_lower,
        "slack_upper": pair.slack_upper,
        "float_slack": pair.float_slack,
        "width": pair.width,
        "fingerprint": pair.fingerprint(),
        "id_length": pair.id().len(),
        "containment": containment,
        "log_realization_count_bound": realization_count_bound(&config),
    });
    let manifest = RunManifest::new(
        "bracket",
        json!({
            "epsilon": args.epsilon,
            "p": args.p,
            "measure": args.measure.display().to_string(),
            "nu": args.nu,
            "verify_grid": args.verify_grid,
        }),
        vec![],
    );
    let summary = format!(
        "bracket: width {:.6e} <= {} (gamma {:.3e}, m {}, N {}), containment {} / {} points, fingerprint {}",
        pair.width.value,
        args.epsilon,
        config.gamma,
        config.m,
        config.taylor_degree,
        containment.points - containment.violations,
        containment.points,
        pair.fingerprint()
    );
    let passed = containment.passed();
    finish(manifest, result, args.out.as_ref(), summary, passed)
}

fn run_smallball(cmd: &SmallballCommand, precision_bits: usize) -> Result<Outcome> {
    match cmd {
        SmallballCommand::Bound {
            epsilon,
            m,
            mode,
            out,
        } => {
            let manifest = RunManifest::new(
                "smallball bound",
                json!({
                    "epsilon": epsilon,
                    "m": m,
                    "mode": format!("{mode:?}").to_lowercase(),
                    "precision_bits": precision_bits,
                }),
                vec![],
            );
            let (result, summary) = match (mode, m) {
                (Mode::Analytic, None) => {
                    let o = optimal_m(*epsilon)?;
                    let s = format!(
                        "optimal m = {}, log bound = {} (continuous value {})",
                        o.m, o.log_bound, o.continuous_bound
                    );
                    (json!({ "m": o.m, "bound": o.log_bound, "optimum": o }), s)
                }
                (mode, Some(m)) => {
                    let prov = match mode {
                        Mode::Analytic => Provenance::AnalyticDet,
                        Mode::Computed => Provenance::ComputedDet,
                    };
                    let b = smallball_log_upper(*epsilon, *m, prov, precision_bits)?;
                    let s = format!("m = {}, log bound = {}", b.m, b.log_prob_bound);
                    (json!({ "m": b.m, "bound": b.log_prob_bound, "detail": b }), s)
                }
                (Mode::Computed, None) => {
                    let all = (1..=MAX_COMPUTED_M)
                        .map(|m| smallball_log_upper(*epsilon, m, Provenance::ComputedDet, precision_bits))
                        .collect::<Result<Vec<_>>>()?;
                    let best = all
                        .iter()
                        .min_by(|a, b| a.log_prob_bound.total_cmp(&b.log_prob_bound))
                        .expect("nonempty");
                    let s = format!("best m = {}, log bound = {}", best.m, best.log_prob_bound);
                    (json!({ "m": best.m, "bound": best.log_prob_bound, "candidates": all }), s)
                }
            };
            finish(manifest, result, out.as_ref(), summary, true)
        }
        SmallballCommand::Verify { m, out } => {
            let manifest = RunManifest::new("smallball verify", json!({ "m": m }), vec![]);
            let d = delta_sequence(*m)?;
            let ratio = ratio_bound_check(&d);
            let lemma2 = if *m <= MAX_COMPUTED_M {
                Some(lemma2_verify(*m)?)
            } else {
                None
            };
            let lower = det_sigma_lower(*m)?;
            let threshold = det_sigma_threshold(MAX_M)?;
            let passed = ratio.symbolic_holds
                && ratio.high_precision_holds
                && lemma2.as_ref().is_none_or(|r| r.passed());
            let summary = format!(
                "m = {m}: ratio bound {}, lemma checks {}, det Sigma lower bound {} (>= exp(-16 m^3): {}), threshold m* = {}",
                ok(ratio.symbolic_holds && ratio.high_precision_holds),
                lemma2.as_ref().map_or("skipped (m > 3)".to_string(), |r| ok(r.passed()).to_string()),
                lower.value,
                lower.ge_target,
                threshold.map_or("none".to_string(), |t| t.to_string()),
            );
            let result = json!({
                "delta": d,
                "ratio_bound": ratio,
                "lemma2": lemma2,
                "det_sigma_lower": lower,
                "det_sigma_threshold_m": threshold,
            });
            finish(manifest, result, out.as_ref(), summary, passed)
        }
        SmallballCommand::Lemma1 {
            trials,
            dim,
            seed,
            out,
        } => {
            let manifest = RunManifest::new(
                "smallball lemma1",
                json!({ "trials": trials, "dim": dim, "seed": seed }),
                vec![*seed],
            );
            let r = lemma1_trials(*trials, *dim, *seed)?;
            let summary = format!(
                "lemma1: {} / {} trials hold (dim {}, min gap {:e})",
                r.holds, r.trials, r.dim, r.min_gap
            );
            let passed = r.passed();
            finish(manifest, r, out.as_ref(), summary, passed)
        }
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn run_sim(cmd: &SimCommand) -> Result<Outcome> {
    match cmd {
        SimCommand::Sup {
            eps,
            samples,
            grid_count,
            seed,
            workers,
            refine,
            out,
        } => {
            let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
            let grid = build_grid(eps_min.min(0.999), *grid_count)?;
            let config = SimConfig {
                epsilons: eps.clone(),
                samples: *samples,
                seed: *seed,
                grid,
                workers: *workers,
            };
            let manifest = RunManifest::new(
                "sim sup",
                json!({
                    "eps": eps,
                    "samples": samples,
                    "grid_count": grid_count,
                    "seed": seed,
                    "workers": workers,
                    "refine": refine,
                }),
                vec![*seed],
            );
            let (rows, result) = if *refine {
                let r = simulate_refinement(&config)?;
                (r.coarse.rows.clone(), serde_json::to_value(&r)?)
            } else {
                let r = simulate_sup_probability(&config)?;
                (r.rows.clone(), serde_json::to_value(&r)?)
            };
            if let Some(path) = out {
                write_csv(path, &serde_json::to_string(&manifest)?, &rows)?;
            }
            let summary = rows
                .iter()
                .map(|r| format!("eps {}: p_hat {:.6} [{:.6}, {:.6}] ({} hits)", r.epsilon, r.p_hat, r.ci_lo, r.ci_hi, r.hits))
                .collect::<Vec<_>>()
                .join("\n");
            finish(manifest, result, None, summary, true)
        }
        SimCommand::Delta {
            m,
            eps,
            samples,
            seed,
            workers,
            out,
        } => {
            let manifest = RunManifest::new(
                "sim delta",
                json!({ "m": m, "eps": eps, "samples": samples, "seed": seed, "workers": workers }),
                vec![*seed],
            );
            let r = simulate_delta_probability(*m, *eps, *samples, *seed, *workers)?;
            let row = &r.result.rows[0];
            let summary = format!(
                "m = {m}, eps = {eps}: p_hat {:.6} [{:.6}, {:.6}], bound {:.6e}, consistent {}",
                row.p_hat, row.ci_lo, row.ci_hi, r.analytic_bound, r.consistent
            );
            let passed = r.consistent;
            finish(manifest, r, out.as_ref(), summary, passed)
        }
        SimCommand::Fit { input, out, series } => {
            let rows = read_csv(input)?;
            let fit = scaling_fit(&rows)?;
            let manifest = RunManifest::new(
                "sim fit",
                json!({ "in": input.display().to_string() }),
                vec![],
            );
            let series_path = series.clone().or_else(|| {
                out.as_ref().map(|p| p.with_extension("series.csv"))
            });
            if let Some(path) = &series_path {
                let mut text = String::from("log_abs_log_eps,log_neg_log_p\n");
                for p in &fit.points {
                    text.push_str(&format!("{},{}\n", p.x, p.y));
                }
                fs::write(path, text)?;
            }
            let summary = format!(
                "slope {:.4} (95% CI {:.4} .. {:.4}) over {} points",
                fit.slope,
                fit.slope_ci.0,
                fit.slope_ci.1,
                fit.points.len()
            );
            finish(manifest, fit, out.as_ref(), summary, true)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail: detail.into(),
    }
}

fn run_verify_all(args: &VerifyAllArgs, precision_bits: usize) -> Result<Outcome> {
    let mut checks = Vec::new();
    let top_m = if args.quick { 2 } else { MAX_COMPUTED_M };

    for m in 1..=top_m {
        let r = lemma2_verify(m)?;
        checks.push(check(
            &format!("lemma2 m={m}"),
            r.passed(),
            format!("per {} det {}", r.permanent.decimal, r.determinant.decimal),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sequences = if args.quick { 10 } else { 50 };
    let mut cauchy_ok = true;
    for m in 1..=top_m {
        let d = delta_sequence(m)?;
        cauchy_ok &= cauchy_det_product(&d.values)? == det_exact(&cauchy_matrix(&d.values))?;
    }
    for _ in 0..sequences {
        let len = rng.gen_range(1..=7);
        let mut d: Vec<u64> = Vec::new();
        while d.len() < len {
            let x = rng.gen_range(1..=1000);
            if !d.contains(&x) {
                d.push(x);
            }
        }
        cauchy_ok &= cauchy_det_product(&d)? == det_exact(&cauchy_matrix(&d))?;
    }
    checks.push(check("cauchy identity", cauchy_ok, format!("{sequences} random sequences")));

    let (trials, max_dim) = if args.quick { (10, 4) } else { (34, 6) };
    let mut held = 0;
    let mut total = 0;
    for dim in 1..=max_dim {
        let r = lemma1_trials(trials, dim, dim as u64)?;
        held += r.holds;
        total += r.trials;
    }
    checks.push(check("lemma1 trials", held == total, format!("{held} / {total}")));

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s: f64 = rng.gen_range(0.0..50.0);
        let t: f64 = rng.gen_range(0.0..50.0);
        worst = worst.max((kernel_x((-s).exp(), (-t).exp()) - kernel_y(s, t)).abs());
    }
    checks.push(check(
        "kernel consistency",
        worst <= 1e-14 && kernel_y(0.0, 0.0) == 1.0,
        format!("max difference {worst:e}"),
    ));

    let mut ratio_ok = true;
    for m in 1..=MAX_M {
        let r = ratio_bound_check(&delta_sequence(m)?);
        ratio_ok &= r.symbolic_holds && r.high_precision_holds;
    }
    checks.push(check("ratio bound", ratio_ok, format!("m = 1..={MAX_M}")));

    let mut opt_ok = true;
    for k in 2..=10 {
        let o = crate::smallball::optimal_m_log(-12.0 * k as f64)?;
        opt_ok &= o.m == k && o.log_bound == o.continuous_bound;
    }
    checks.push(check("optimal m", opt_ok, "eps = exp(-12k), k = 2..=10"));

    if !args.quick {
        let b = smallball_log_upper(0.1, MAX_COMPUTED_M, Provenance::ComputedDet, precision_bits)?;
        checks.push(check(
            "computed det Sigma",
            b.log_det_sigma.is_some(),
            format!("log det Sigma = {:?}", b.log_det_sigma),
        ));
        let nu = BaseMeasure::LebesgueUnitInterval;
        let config = BracketConfig::lebesgue_default(0.1, 2.0)?;
        let mut bracket_ok = true;
        let mut measures = Vec::new();
        for seed in 0..10 {
            let mu = random_measure(seed, 5, 1.0)?;
            let pair = build_bracket(&mu, &config, &nu)?;
            bracket_ok &= pair.verify_containment(&mu, 10_000).passed();
            bracket_ok &= remainder_bounds_check(&mu, &config, 16).is_ok();
            measures.push(mu);
        }
        let count = empirical_bracket_count(&measures, &config, &nu)?;
        bracket_ok &= (count as f64).ln() <= realization_count_bound(&config);
        checks.push(check("bracket containment and remainders", bracket_ok, "10 random measures, eps = 0.1, p = 2"));
    }

    let passed = checks.iter().all(|c| c.passed);
    let summary = checks
        .iter()
        .map(|c| format!("{:<36} {}  {}", c.name, ok(c.passed), c.detail))
        .collect::<Vec<_>>()
        .join("\n");
    let manifest = RunManifest::new("verify-all", json!({ "quick": args.quick }), vec![1]);
    let result = json!({ "passed": passed, "checks": checks });
    finish(manifest, result, args.out.as_ref(), summary, passed)
}

/// Decimal and exact text for a rational; re-exported for report consumers.
pub fn exact_value(q: &num_rational::BigRational) -> ExactValue {
    ExactValue::new(q)
}
