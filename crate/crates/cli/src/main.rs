//! Command-line harness for the polyreg toolkit.
//!
//! Subcommands mirror the library pipelines one to one: `estimate` for
//! bias, Gowers norms and value distributions; `bv` for the derivative
//! approximation; `refine` and `check` for the three regularity notions;
//! `decode-rm` for decoding under structured noise; `reduce` for the three
//! structure-from-promise reductions; and `gen` for seeded fixtures.
//!
//! Every command writes a JSON report with input/output hashes, the
//! resolved seed and the full configuration. Exit codes: 0 on success (for
//! `check`, a passing verdict), 1 for named pipeline errors or a failing
//! verdict, 2 for usage errors. Seeds resolve flag over `POLYREG_SEED`
//! over 0, so scripted reruns reproduce reports byte for byte apart from
//! timestamps and stage wall times.

mod gen;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use polyreg::algebra::{Polynomial, PrimeField};
use polyreg::apps::{bias_to_factor, decode_rm, gowers_to_factor, worst_to_average, BiasMode};
use polyreg::bv::bv_approximate;
use polyreg::estimators::{
    derivative_distribution, estimate_bias, estimate_gowers, hoeffding_samples, l1_distance,
    EstimatorMode, EstimatorPlan, DEFAULT_EXACT_BUDGET,
};
use polyreg::factor::{measurability_check, Factor, GammaSchedule, MeasurabilityOutcome};
use polyreg::io::{parse_factor, parse_poly, write_factor, write_poly};
use polyreg::refine::{
    check_regularity, refine_strongly_unbiased, refine_unbiased, refine_uniform, RegularityNotion,
};
use polyreg::{Error, Result};

use report::ReportSink;

#[derive(Parser)]
#[command(name = "polyreg", version, about = "Polynomial regularity toolkit over prime fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a statistic of a polynomial
    Estimate {
        #[command(subcommand)]
        which: EstimateCmd,
    },
    /// Approximate a biased polynomial by a function of its derivatives
    Bv(BvArgs),
    /// Refine a factor until a regularity notion certifies
    Refine {
        #[command(subcommand)]
        which: RefineCmd,
    },
    /// Check a regularity notion without refining (exit 1 on a failing verdict)
    Check(CheckArgs),
    /// Decode a low-degree codeword under structured polynomial noise
    DecodeRm(DecodeArgs),
    /// Run a structure-from-promise reduction
    Reduce {
        #[command(subcommand)]
        which: ReduceCmd,
    },
    /// Generate seeded fixtures
    Gen {
        #[command(subcommand)]
        which: GenCmd,
    },
}

#[derive(Subcommand)]
enum EstimateCmd {
    /// bias(P) = |E e_F(P(x))|
    Bias(PolyArgs),
    /// The U^k Gowers norm of e_F(P)
    Gowers(GowersArgs),
    /// The value distribution mu_a(t) = Pr[P(x) = a + t]
    Mu(MuArgs),
}

#[derive(Subcommand)]
enum RefineCmd {
    /// Every nonzero combination has small bias
    Unbiased(RefineArgs),
    /// Every nonzero combination has small U^deg norm
    Uniform(RefineArgs),
    /// Shifted combinations under degree bounds have small bias
    Strong(RefineArgs),
}

#[derive(Subcommand)]
enum ReduceCmd {
    /// Factor computing a polynomial promised to be biased
    Bias(ReduceBiasArgs),
    /// Factor computing a polynomial promised a large Gowers norm
    Gowers(ReduceGowersArgs),
    /// Worst-case to average-case reduction over a given factor
    W2a(ReduceW2aArgs),
}

#[derive(Subcommand)]
enum GenCmd {
    /// Planted instance P = Q + E with known codeword and structured noise
    PlantedRm(GenPlantedArgs),
    /// Random sum of square-free monomials
    RandomPoly(GenPolyArgs),
    /// Random factor with degrees cycling up to a bound
    RandomFactor(GenFactorArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Copy, Clone, ValueEnum)]
enum NotionArg {
    Unbiased,
    Uniform,
    Strong,
}

#[derive(Copy, Clone, ValueEnum)]
enum CharArg {
    Auto,
    High,
    Low,
}

#[derive(Args)]
struct CommonArgs {
    /// Seed; overrides POLYREG_SEED; defaults to 0
    #[arg(long)]
    seed: Option<u64>,
    /// Estimation mode for the statistics this command computes
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Monte Carlo sample count; 0 lets each stage derive its own
    #[arg(long, default_value_t = 0)]
    samples: usize,
    /// Failure probability budget for sampled estimates
    #[arg(long, default_value_t = 0.05)]
    rho: f64,
    /// Point budget for exact enumerations
    #[arg(long, default_value_t = DEFAULT_EXACT_BUDGET)]
    budget: f64,
    /// Report path; defaults to <command>.report.json
    #[arg(long)]
    report: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve_seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("POLYREG_SEED") {
            Ok(v) => v.parse().map_err(|_| {
                Error::Parse(format!("POLYREG_SEED must be an unsigned integer, got {v:?}"))
            }),
            Err(_) => Ok(0),
        }
    }

    fn plan(&self, seed: u64) -> EstimatorPlan {
        match self.mode {
            ModeArg::Exact => EstimatorPlan {
                mode: EstimatorMode::Exact,
                samples: 0,
                failure_prob: 0.0,
                seed,
                exact_budget: self.budget,
            },
            ModeArg::Mc => EstimatorPlan {
                mode: EstimatorMode::MonteCarlo,
                samples: self.samples,
                failure_prob: self.rho,
                seed,
                exact_budget: self.budget,
            },
        }
    }

    fn config(&self, seed: u64) -> Value {
        json!({
            "mode": match self.mode { ModeArg::Exact => "exact", ModeArg::Mc => "mc" },
            "samples": self.samples,
            "rho": self.rho,
            "budget": self.budget,
            "seed": seed,
        })
    }
}

#[derive(Args)]
struct PolyArgs {
    /// Input .poly file
    #[arg(long)]
    poly: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GowersArgs {
    #[arg(long)]
    poly: PathBuf,
    /// Gowers norm order
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct MuArgs {
    #[arg(long)]
    poly: PathBuf,
    /// Base point a of mu_a(t) = Pr[P(x) = a + t]
    #[arg(long, default_value_t = 0)]
    base: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BvArgs {
    #[arg(long)]
    poly: PathBuf,
    /// Promised bias lower bound
    #[arg(long)]
    delta: f64,
    /// Target disagreement of the approximation
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Failure probability
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Write the derived factor here
    #[arg(long)]
    fac_out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RefineArgs {
    /// Input .fac file
    #[arg(long)]
    factor: PathBuf,
    /// Gamma schedule: gamma(m) = min(A, A p^(-B m))
    #[arg(long = "gammaA", default_value_t = 0.5)]
    gamma_a: f64,
    #[arg(long = "gammaB", default_value_t = 1.0)]
    gamma_b: f64,
    /// Closeness of the refinement (unbiased and strong notions)
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Failure probability
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Output factor path
    #[arg(long, default_value = "refined.fac")]
    fac_out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    factor: PathBuf,
    /// Which regularity notion to check
    #[arg(long, value_enum)]
    notion: NotionArg,
    #[arg(long = "gammaA", default_value_t = 0.5)]
    gamma_a: f64,
    #[arg(long = "gammaB", default_value_t = 1.0)]
    gamma_b: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    poly: PathBuf,
    /// Target codeword degree
    #[arg(long)]
    k: usize,
    /// Promised agreement margin above 1/|F|
    #[arg(long)]
    eps: f64,
    /// Failure probability
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Where to write the decoded polynomial
    #[arg(long, default_value = "q.poly")]
    q_out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ReduceBiasArgs {
    #[arg(long)]
    poly: PathBuf,
    /// Promised bias lower bound
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Characteristic regime; auto picks high iff |F| > deg P
    #[arg(long = "char", value_enum, default_value = "auto")]
    char_mode: CharArg,
    #[arg(long, default_value = "reduced.fac")]
    fac_out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ReduceGowersArgs {
    #[arg(long)]
    poly: PathBuf,
    /// Promised U^deg norm lower bound
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value = "reduced.fac")]
    fac_out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ReduceW2aArgs {
    #[arg(long)]
    poly: PathBuf,
    /// Factor whose atoms carry the promised approximation
    #[arg(long)]
    factor: PathBuf,
    /// Promised agreement margin above 1/|F|
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value = "reduced.fac")]
    fac_out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GenPlantedArgs {
    /// Field order (prime)
    #[arg(long)]
    p: u64,
    /// Variable count
    #[arg(long)]
    n: usize,
    /// Codeword degree
    #[arg(long)]
    k: usize,
    /// Noise monomial degree (must exceed k)
    #[arg(long)]
    noise_degree: usize,
    #[arg(long, default_value = "planted.poly")]
    out: PathBuf,
    #[arg(long, default_value = "codeword.poly")]
    codeword_out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GenPolyArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    degree: usize,
    #[arg(long, default_value_t = 2)]
    terms: usize,
    #[arg(long, default_value = "random.poly")]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GenFactorArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    degree: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value = "random.fac")]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Estimate { which } => match which {
            EstimateCmd::Bias(a) => cmd_estimate_bias(a),
            EstimateCmd::Gowers(a) => cmd_estimate_gowers(a),
            EstimateCmd::Mu(a) => cmd_estimate_mu(a),
        },
        Command::Bv(a) => cmd_bv(a),
        Command::Refine { which } => match which {
            RefineCmd::Unbiased(a) => cmd_refine(a, RegularityNotion::Unbiased),
            RefineCmd::Uniform(a) => cmd_refine(a, RegularityNotion::Uniform),
            RefineCmd::Strong(a) => cmd_refine(a, RegularityNotion::Strong),
        },
        Command::Check(a) => cmd_check(a),
        Command::DecodeRm(a) => cmd_decode(a),
        Command::Reduce { which } => match which {
            ReduceCmd::Bias(a) => cmd_reduce_bias(a),
            ReduceCmd::Gowers(a) => cmd_reduce_gowers(a),
            ReduceCmd::W2a(a) => cmd_reduce_w2a(a),
        },
        Command::Gen { which } => match which {
            GenCmd::PlantedRm(a) => cmd_gen_planted(a),
            GenCmd::RandomPoly(a) => cmd_gen_poly(a),
            GenCmd::RandomFactor(a) => cmd_gen_factor(a),
        },
    }
}

/// Effective sampled plan for the estimate commands: an unspecified count
/// buys +-0.02 accuracy at the configured failure probability.
fn estimate_plan(common: &CommonArgs, seed: u64) -> EstimatorPlan {
    let mut plan = common.plan(seed);
    if plan.mode == EstimatorMode::MonteCarlo && plan.samples == 0 {
        plan.samples = hoeffding_samples(0.02, plan.failure_prob.clamp(1e-12, 0.5));
    }
    plan
}

fn load_poly(sink: &mut ReportSink, path: &Path) -> Result<Polynomial> {
    parse_poly(&sink.read_input(path)?)
}

fn load_factor(sink: &mut ReportSink, path: &Path) -> Result<Factor> {
    parse_factor(&sink.read_input(path)?)
}

fn cmd_estimate_bias(a: PolyArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("estimate bias", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let plan = estimate_plan(&a.common, seed);
    let value = estimate_bias(&p, &plan)?;
    let verification = match plan.mode {
        EstimatorMode::Exact => json!({ "exact": true }),
        EstimatorMode::MonteCarlo => {
            let exact = EstimatorPlan { mode: EstimatorMode::Exact, ..plan };
            match estimate_bias(&p, &exact) {
                Ok(ev) => {
                    let diff = (value.magnitude - ev.magnitude).abs();
                    json!({
                        "exact_magnitude": ev.magnitude,
                        "difference": diff,
                        "planned_epsilon": plan.planned_epsilon(),
                        "within": plan.planned_epsilon().map(|e| diff <= e),
                    })
                }
                Err(Error::BudgetExceeded { .. }) => json!({ "exact": "budget exceeded" }),
                Err(e) => return Err(e),
            }
        }
    };
    let mut config = a.common.config(seed);
    config["samples_effective"] = json!(plan.samples);
    println!("bias magnitude {:.6}", value.magnitude);
    let path = sink.finish(config, serde_json::to_value(value).unwrap(), verification)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_estimate_gowers(a: GowersArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("estimate gowers", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let plan = estimate_plan(&a.common, seed);
    let value = estimate_gowers(&p, a.k, &plan)?;
    let verification = match plan.mode {
        EstimatorMode::Exact => json!({ "exact": true }),
        EstimatorMode::MonteCarlo => {
            let exact = EstimatorPlan { mode: EstimatorMode::Exact, ..plan };
            match estimate_gowers(&p, a.k, &exact) {
                Ok(ev) => {
                    let diff = (value.power_mean - ev.power_mean).abs();
                    json!({
                        "exact_power_mean": ev.power_mean,
                        "exact_norm": ev.norm,
                        "difference": diff,
                        "planned_epsilon": plan.planned_epsilon(),
                        "within": plan.planned_epsilon().map(|e| diff <= e),
                    })
                }
                Err(Error::BudgetExceeded { .. }) => json!({ "exact": "budget exceeded" }),
                Err(e) => return Err(e),
            }
        }
    };
    let mut config = a.common.config(seed);
    config["k"] = json!(a.k);
    config["samples_effective"] = json!(plan.samples);
    println!("U^{} norm {:.6}", a.k, value.norm);
    let path = sink.finish(config, serde_json::to_value(value).unwrap(), verification)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_estimate_mu(a: MuArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("estimate mu", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let field = p.field();
    let base = field.elem(a.base);
    let plan = estimate_plan(&a.common, seed);
    let mu = derivative_distribution(&p, base, &plan)?;
    let verification = match plan.mode {
        EstimatorMode::Exact => json!({ "exact": true }),
        EstimatorMode::MonteCarlo => {
            let exact = EstimatorPlan { mode: EstimatorMode::Exact, ..plan };
            match derivative_distribution(&p, base, &exact) {
                Ok(em) => json!({ "exact_mu": em, "l1_distance": l1_distance(&mu, &em) }),
                Err(Error::BudgetExceeded { .. }) => json!({ "exact": "budget exceeded" }),
                Err(e) => return Err(e),
            }
        }
    };
    let mut config = a.common.config(seed);
    config["base"] = json!(base.value());
    config["samples_effective"] = json!(plan.samples);
    println!("mu({}) over {} values, mass at 0: {:.6}", base.value(), mu.len(), mu[0]);
    let path =
        sink.finish(config, json!({ "base": base.value(), "mu": mu }), verification)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_bv(a: BvArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("bv", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let approx = bv_approximate(&p, a.delta, a.sigma, a.beta, seed)?;
    let derived = approx.derived_factor()?;
    if let Some(out) = &a.fac_out {
        sink.write_output(out, &write_factor(&derived))?;
    }
    let verification = match approx.exact_disagreement(a.common.budget) {
        Ok(d) => json!({ "exact_disagreement": d, "within_sigma": d <= a.sigma }),
        Err(Error::BudgetExceeded { .. }) => json!({ "exact": "budget exceeded" }),
        Err(e) => return Err(e),
    };
    let mut config = a.common.config(seed);
    config["delta"] = json!(a.delta);
    config["sigma"] = json!(a.sigma);
    config["beta"] = json!(a.beta);
    let results = json!({
        "directions": approx.c(),
        "capped": approx.was_capped(),
        "derived_dim": derived.dim(),
        "derived_dims": derived.dim_vector(),
    });
    println!("{} directions, derived factor dim {}", approx.c(), derived.dim());
    let path = sink.finish(config, results, verification)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_refine(a: RefineArgs, notion: RegularityNotion) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let name = match notion {
        RegularityNotion::Unbiased => "refine unbiased",
        RegularityNotion::Uniform => "refine uniform",
        RegularityNotion::Strong => "refine strong",
    };
    let mut sink = ReportSink::new(name, seed, a.common.report.as_deref());
    let f = load_factor(&mut sink, &a.factor)?;
    let schedule = GammaSchedule::new(a.gamma_a, a.gamma_b)?;
    let plan = a.common.plan(seed);
    let (out, rep) = match notion {
        RegularityNotion::Unbiased => refine_unbiased(&f, schedule, a.sigma, a.beta, &plan)?,
        RegularityNotion::Uniform => refine_uniform(&f, schedule, a.beta, &plan)?,
        RegularityNotion::Strong => {
            refine_strongly_unbiased(&f, schedule, a.sigma, a.beta, &plan)?
        }
    };
    sink.write_output(&a.fac_out, &write_factor(&out))?;
    let mut config = a.common.config(seed);
    config["gammaA"] = json!(a.gamma_a);
    config["gammaB"] = json!(a.gamma_b);
    config["sigma"] = json!(a.sigma);
    config["beta"] = json!(a.beta);
    let verification = json!({
        "success": rep.success,
        "verdict_exact": rep.final_verdict.as_ref().map(|v| v.exact),
        "closeness_exact": rep.closeness.as_ref().map(|c| c.exact),
    });
    println!(
        "dims {:?} -> {:?} in {} steps",
        rep.input_dims,
        rep.output_dims,
        rep.steps.len()
    );
    let path = sink.finish(config, serde_json::to_value(&rep).unwrap(), verification)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_check(a: CheckArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("check", seed, a.common.report.as_deref());
    let mut f = load_factor(&mut sink, &a.factor)?;
    let notion = match a.notion {
        NotionArg::Unbiased => RegularityNotion::Unbiased,
        NotionArg::Uniform => RegularityNotion::Uniform,
        NotionArg::Strong => RegularityNotion::Strong,
    };
    let mut delta_defaulted = false;
    if notion == RegularityNotion::Strong && f.delta().is_none() && f.dim() > 0 {
        let bounds = f.polys().iter().map(|q| q.degree() as u16).collect();
        f = f.with_delta(bounds)?;
        delta_defaulted = true;
    }
    let schedule = GammaSchedule::new(a.gamma_a, a.gamma_b)?;
    let plan = a.common.plan(seed);
    let verdict = check_regularity(&f, notion, schedule, &plan)?;
    let mut config = a.common.config(seed);
    config["gammaA"] = json!(a.gamma_a);
    config["gammaB"] = json!(a.gamma_b);
    config["delta_defaulted"] = json!(delta_defaulted);
    let pass = verdict.pass;
    if pass {
        println!("pass: max statistic {:.6} <= {:.6}", verdict.measured, verdict.threshold);
    } else {
        println!("fail: statistic {:.6} > {:.6}", verdict.measured, verdict.threshold);
    }
    let verification = json!({ "exact": verdict.exact, "structural": verdict.structural });
    let path = sink.finish(config, serde_json::to_value(&verdict).unwrap(), verification)?;
    println!("report: {}", path.display());
    Ok(if pass { 0 } else { 1 })
}

fn cmd_decode(a: DecodeArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("decode-rm", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let plan = a.common.plan(seed);
    let r = decode_rm(&p, a.k, a.eps, a.beta, &plan)?;
    sink.write_output(&a.q_out, &write_poly(&r.q_tilde))?;
    let mut config = a.common.config(seed);
    config["k"] = json!(a.k);
    config["eps"] = json!(a.eps);
    config["beta"] = json!(a.beta);
    let results = json!({
        "t": r.t.value(),
        "q_degree": r.q_tilde.degree(),
        "agreement": r.agreement,
        "agreement_exact": r.agreement_exact,
        "factor_dim": r.factor.dim(),
        "trace": serde_json::to_value(&r.trace).unwrap(),
    });
    let verification = json!({
        "degree_within_k": r.q_tilde.degree() <= a.k,
        "agreement": r.agreement,
        "agreement_exact": r.agreement_exact,
    });
    println!(
        "decoded degree {} with agreement {:.6} ({})",
        r.q_tilde.degree(),
        r.agreement,
        if r.agreement_exact { "exact" } else { "sampled" }
    );
    let path = sink.finish(config, results, verification)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn witness_verification(atoms: usize, exact: bool) -> Value {
    json!({ "measurable": true, "witness_exact": exact, "atoms": atoms })
}

fn cmd_reduce_bias(a: ReduceBiasArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("reduce bias", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let mode = match a.char_mode {
        CharArg::High => BiasMode::HighChar,
        CharArg::Low => BiasMode::LowChar,
        CharArg::Auto => {
            if p.field().order() > p.degree() as u64 {
                BiasMode::HighChar
            } else {
                BiasMode::LowChar
            }
        }
    };
    let plan = a.common.plan(seed);
    let (factor, witness) = bias_to_factor(&p, a.delta, a.beta, mode, &plan)?;
    sink.write_output(&a.fac_out, &write_factor(&factor))?;
    let mut config = a.common.config(seed);
    config["delta"] = json!(a.delta);
    config["beta"] = json!(a.beta);
    config["char"] = json!(match mode { BiasMode::HighChar => "high", BiasMode::LowChar => "low" });
    let results = json!({
        "dim": factor.dim(),
        "dims": factor.dim_vector(),
        "degree": factor.degree(),
        "atoms": witness.table().len(),
    });
    println!("factor dim {} ({} atoms)", factor.dim(), witness.table().len());
    let path = sink.finish(
        config,
        results,
        witness_verification(witness.table().len(), witness.is_exact()),
    )?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_reduce_gowers(a: ReduceGowersArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("reduce gowers", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let plan = a.common.plan(seed);
    let (factor, witness) = gowers_to_factor(&p, a.delta, a.beta, &plan)?;
    sink.write_output(&a.fac_out, &write_factor(&factor))?;
    let mut config = a.common.config(seed);
    config["delta"] = json!(a.delta);
    config["beta"] = json!(a.beta);
    let results = json!({
        "dim": factor.dim(),
        "dims": factor.dim_vector(),
        "degree": factor.degree(),
        "atoms": witness.table().len(),
    });
    println!("factor dim {} ({} atoms)", factor.dim(), witness.table().len());
    let path = sink.finish(
        config,
        results,
        witness_verification(witness.table().len(), witness.is_exact()),
    )?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_reduce_w2a(a: ReduceW2aArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("reduce w2a", seed, a.common.report.as_deref());
    let p = load_poly(&mut sink, &a.poly)?;
    let f = load_factor(&mut sink, &a.factor)?;
    if f.dim() == 0 {
        return Err(Error::DimensionMismatch(
            "the reduction needs a nonempty factor to scan".into(),
        ));
    }
    let plan = a.common.plan(seed);
    // The promise witness only fixes the atom space; its values are never
    // evaluated by the scan, so the identity witness of the factor's first
    // polynomial stands in for the promised approximation.
    let lambda = match measurability_check(&f.polys()[0], &f, &plan)? {
        MeasurabilityOutcome::Measurable(w) => w,
        MeasurabilityOutcome::Counterexample { .. } => unreachable!("identity is measurable"),
    };
    let (factor, witness) = worst_to_average(&p, &f, &lambda, a.delta, a.beta, &plan)?;
    sink.write_output(&a.fac_out, &write_factor(&factor))?;
    let mut config = a.common.config(seed);
    config["delta"] = json!(a.delta);
    config["beta"] = json!(a.beta);
    let results = json!({
        "dim": factor.dim(),
        "dims": factor.dim_vector(),
        "degree": factor.degree(),
        "atoms": witness.table().len(),
    });
    println!("factor dim {} ({} atoms)", factor.dim(), witness.table().len());
    let path = sink.finish(
        config,
        results,
        witness_verification(witness.table().len(), witness.is_exact()),
    )?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_gen_planted(a: GenPlantedArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("gen planted-rm", seed, a.common.report.as_deref());
    let field = PrimeField::new(a.p)?;
    let planted = gen::planted_rm(field, a.n, a.k, a.noise_degree, seed)?;
    sink.write_output(&a.out, &write_poly(&planted.poly))?;
    sink.write_output(&a.codeword_out, &write_poly(&planted.codeword))?;
    // The declared agreement is Pr[E = 0], enumerated over the noise
    // monomial's variables.
    let exact = EstimatorPlan { exact_budget: a.common.budget, ..EstimatorPlan::exact() };
    let agreement = derivative_distribution(&planted.noise, field.zero(), &exact)?[0];
    let mut config = a.common.config(seed);
    config["p"] = json!(a.p);
    config["n"] = json!(a.n);
    config["k"] = json!(a.k);
    config["noise_degree"] = json!(a.noise_degree);
    let results = json!({
        "poly": a.out.display().to_string(),
        "codeword": a.codeword_out.display().to_string(),
        "codeword_degree": planted.codeword.degree(),
        "noise_degree": planted.noise.degree(),
        "planted_agreement": agreement,
    });
    let verification = json!({ "planted_agreement_by_enumeration": agreement });
    println!("planted agreement {:.6}", agreement);
    let path = sink.finish(config, results, verification)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_gen_poly(a: GenPolyArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("gen random-poly", seed, a.common.report.as_deref());
    let field = PrimeField::new(a.p)?;
    let q = gen::random_poly(field, a.n, a.degree, a.terms, seed)?;
    let text = write_poly(&q);
    sink.write_output(&a.out, &text)?;
    let round_trip = parse_poly(&text)? == q;
    let mut config = a.common.config(seed);
    config["p"] = json!(a.p);
    config["n"] = json!(a.n);
    config["degree"] = json!(a.degree);
    config["terms"] = json!(a.terms);
    let results = json!({
        "poly": a.out.display().to_string(),
        "degree": q.degree(),
        "terms": q.num_terms(),
    });
    println!("wrote {} (degree {}, {} terms)", a.out.display(), q.degree(), q.num_terms());
    let path = sink.finish(config, results, json!({ "round_trip": round_trip }))?;
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_gen_factor(a: GenFactorArgs) -> Result<u8> {
    let seed = a.common.resolve_seed()?;
    let mut sink = ReportSink::new("gen random-factor", seed, a.common.report.as_deref());
    let field = PrimeField::new(a.p)?;
    let f = gen::random_factor(field, a.n, a.degree, a.dim, seed)?;
    let text = write_factor(&f);
    sink.write_output(&a.out, &text)?;
    let round_trip = parse_factor(&text)?.polys() == f.polys();
    let mut config = a.common.config(seed);
    config["p"] = json!(a.p);
    config["n"] = json!(a.n);
    config["degree"] = json!(a.degree);
    config["dim"] = json!(a.dim);
    let results = json!({
        "factor": a.out.display().to_string(),
        "dim": f.dim(),
        "dims": f.dim_vector(),
        "degree": f.degree(),
    });
    println!("wrote {} (dim {}, degree {})", a.out.display(), f.dim(), f.degree());
    let path = sink.finish(config, results, json!({ "round_trip": round_trip }))?;
    println!("report: {}", path.display());
    Ok(0)
}
