//! `nofl`: command-line driver for the learning pipelines.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use nof_learn::boolfn::TruthTable;
use nof_learn::boost::{boost, trace_csv, BoostParams};
use nof_learn::compress::{compress, verify_exact, CompressConfig};
use nof_learn::concepts::{plant, savings_params, ClassParams, TouchstoneClass};
use nof_learn::distrib::{DistributionConfig, Permutation};
use nof_learn::exact::{exact_learn, pac_di_learn, ExplicitDistribution, PipelineConfig};
use nof_learn::harness::{output_dir, prepare_concept, DerivedParams, Prepared, RecordSink, RunRecord};
use nof_learn::learner::{measure_advantage, Amplifier, LearnerParams};
use nof_learn::norm::{exact_cost_log2, norm_estimate, norm_exact, norm_weighted, NormResult};
use nof_learn::oracle::{ConceptConfig, ConceptSource, CounterexamplePolicy, EqOracle, LabelOracle, MqOracle};
use nof_learn::Error;

/// Largest `log2` of the work an exact norm computation may take under `--method auto`.
const AUTO_EXACT_LIMIT: u32 = 34;

#[derive(Parser)]
#[command(name = "nofl", version, about = "Agnostic membership-query learning over product distributions")]
struct Cli {
    /// Append records to this JSON-lines file instead of printing them.
    #[arg(long, global = true)]
    records: Option<PathBuf>,
    /// Exit with status 2 when the command's acceptance predicate fails.
    #[arg(long, global = true)]
    assert: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute or estimate the k-party norm of a concept.
    Norm(NormArgs),
    /// Measure the advantage of single weak-learner runs.
    Weaklearn(WeakArgs),
    /// Boost the amplified weak learner and write the round trace.
    Boost(BoostArgs),
    /// Draw a random instance of a touchstone class.
    Plant(PlantArgs),
    /// Evaluate the savings formulas of a touchstone class.
    Savings(SavingsArgs),
    /// Compress a truth table into an ensemble plus patches.
    Compress(CompressArgs),
    /// Learn exactly with membership and equivalence queries.
    Exactlearn(ExactArgs),
    /// PAC-learn under a planted non-product distribution.
    Pacdi(PacArgs),
}

#[derive(Args, Serialize, Clone)]
struct ConceptArgs {
    /// Named function family: XOR, MAJ, IP, DICT:i, GIP:k.
    #[arg(long = "fn")]
    family: Option<String>,
    /// Arity for --fn.
    #[arg(long)]
    n: Option<u32>,
    /// Truth-table file.
    #[arg(long, conflicts_with = "family")]
    table: Option<PathBuf>,
    /// JSON concept description (source, noise, distribution).
    #[arg(long, conflicts_with_all = ["family", "table"])]
    concept: Option<PathBuf>,
    /// Independent label flip rate.
    #[arg(long)]
    noise: Option<f64>,
    /// JSON product-distribution file.
    #[arg(long)]
    dist: Option<PathBuf>,
}

impl ConceptArgs {
    fn config(&self) -> Result<(ConceptConfig, Option<PathBuf>), Error> {
        let mut base = None;
        let mut cfg = if let Some(p) = &self.concept {
            base = p.parent().map(Path::to_path_buf);
            ConceptConfig::parse(&std::fs::read_to_string(p)?)?
        } else if let Some(t) = &self.table {
            let src = ConceptSource::Table(t.to_string_lossy().into_owned());
            ConceptConfig { source: src, noise: None, distribution: None }
        } else {
            let family = self.family.clone().ok_or_else(|| cli_error("one of --fn, --table or --concept is required"))?;
            let n = self.n.ok_or_else(|| cli_error("--fn needs --n"))?;
            ConceptConfig { source: ConceptSource::Named { family, n }, noise: None, distribution: None }
        };
        if self.noise.is_some() {
            cfg.noise = self.noise;
        }
        if let Some(d) = &self.dist {
            let text = std::fs::read_to_string(d)?;
            cfg.distribution = Some(serde_json::from_str::<DistributionConfig>(&text)?);
        }
        Ok((cfg, base))
    }

    fn prepare(&self, k: u32) -> Result<Prepared, Error> {
        let (cfg, base) = self.config()?;
        prepare_concept(&cfg, k, base.as_deref())
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NormChoice {
    Auto,
    Exact,
    Estimate,
}

#[derive(Args, Serialize)]
struct NormArgs {
    #[command(flatten)]
    concept: ConceptArgs,
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Zero-based permutation `i,j,...`; defaults to the distribution's, else the identity.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, value_enum, default_value_t = NormChoice::Auto)]
    method: NormChoice,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Expected value checked by --assert.
    #[arg(long)]
    expect: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct WeakArgs {
    #[command(flatten)]
    concept: ConceptArgs,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    /// Examples each hypothesis is scored on.
    #[arg(long, default_value_t = 1)]
    points: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize, Clone)]
struct LearnArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Advantage handed to the amplifier and booster.
    #[arg(long, default_value_t = 0.125)]
    alpha: f64,
    /// Assumed optimum of the touchstone class (for the logged worst-case advantage).
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Protocol cost of the touchstone class (for the logged worst-case advantage).
    #[arg(long, default_value_t = 1)]
    cost: u32,
    #[arg(long)]
    rounds_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LearnArgs {
    fn params(&self) -> LearnerParams {
        LearnerParams { gamma: self.gamma, c: self.cost, ..LearnerParams::new(self.k).with_alpha(self.alpha) }
    }
}

#[derive(Args, Serialize)]
struct BoostArgs {
    #[command(flatten)]
    concept: ConceptArgs,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Round trace CSV; defaults to `boost_trace.csv` in the output directory.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final hypothesis as a truth-table file.
    #[arg(long)]
    hypothesis: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ClassChoice {
    Ptf,
    PtfCircuit,
    PtfTree,
    SymPlus,
    SymCircuit,
    SymTree,
}

#[derive(Args, Serialize)]
struct PlantArgs {
    #[arg(long, value_enum)]
    class: ClassChoice,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 1)]
    degree: u32,
    #[arg(long, default_value_t = 1)]
    gates: u32,
    #[arg(long, default_value_t = 1)]
    depth: u32,
    /// Coefficient bound of SYM+ gates.
    #[arg(long, default_value_t = 4)]
    size: u64,
    /// Instance JSON; defaults to `instance.json` in the output directory.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Truth table; defaults to `instance.tt` in the output directory.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct SavingsArgs {
    #[arg(long, value_enum)]
    class: ClassChoice,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Gate count (circuits) or depth (trees).
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long, default_value_t = 2)]
    size: u64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Multiplier for every hidden constant.
    #[arg(long, default_value_t = 1.0)]
    constant: f64,
}

#[derive(Args, Serialize)]
struct CompressArgs {
    #[command(flatten)]
    concept: ConceptArgs,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 0.125)]
    alpha: f64,
    /// Booster target; defaults to max(2^-ceil(n^0.99), 2^-n).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    rounds_cap: Option<usize>,
    /// Compressed-circuit JSON; defaults to `compressed.json` in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyChoice {
    Lowest,
    Random,
}

#[derive(Args, Serialize)]
struct ExactArgs {
    #[command(flatten)]
    concept: ConceptArgs,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = PolicyChoice::Lowest)]
    policy: PolicyChoice,
    /// Seed of the random counterexample policy.
    #[arg(long, default_value_t = 0)]
    cx_seed: u64,
    /// Patch trace CSV; defaults to `exact_trace.csv` in the output directory.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PacArgs {
    #[command(flatten)]
    concept: ConceptArgs,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Booster target of the inner learner.
    #[arg(long, default_value_t = 0.05)]
    learner_epsilon: f64,
    /// Seed of the planted example distribution.
    #[arg(long, default_value_t = 1)]
    dist_seed: u64,
    /// Round trace CSV; defaults to `pacdi_trace.csv` in the output directory.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn cli_error(msg: &str) -> Error {
    Error::Parameter(msg.to_owned())
}

fn out_path(explicit: &Option<PathBuf>, default_name: &str) -> Result<PathBuf, Error> {
    let p = explicit.clone().unwrap_or_else(|| output_dir().join(default_name));
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(p)
}

fn parse_sigma(text: &str) -> Result<Permutation, Error> {
    let map = text
        .split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|_| cli_error(&format!("bad permutation entry `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Permutation::new(map)
}

fn deterministic_table(p: &Prepared) -> Result<TruthTable, Error> {
    p.concept.table().cloned().ok_or_else(|| cli_error("this command needs a deterministic concept"))
}

fn derived(p: &Prepared, params: &LearnerParams) -> Result<DerivedParams, Error> {
    let padded = p.concept.arity();
    let n = p.padding.map_or(padded, |pad| pad.original_n);
    DerivedParams::compute(n, padded, params)
}

/// A finished record and whether its acceptance predicate held.
type Outcome = (RunRecord, bool);

fn run_norm(a: &NormArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let p = a.concept.prepare(a.k)?;
    let rho = p.concept.marginal().clone();
    let n = p.concept.arity();
    let sigma = match &a.sigma {
        Some(s) => parse_sigma(s)?,
        None => rho.sigma().clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let table = p.concept.table();
    let exact = match a.method {
        NormChoice::Exact => true,
        NormChoice::Estimate => false,
        NormChoice::Auto => table.is_some() && exact_cost_log2(n, a.k) <= AUTO_EXACT_LIMIT,
    };
    let result: NormResult = match (exact, table) {
        (true, Some(t)) if rho.is_uniform() || a.sigma.is_some() => norm_exact(t, a.k, &sigma)?,
        (true, Some(t)) => norm_weighted(t, &rho)?,
        (true, None) => return Err(cli_error("exact norms need a deterministic concept")),
        (false, _) => {
            let mut o = MqOracle::without_cache(&p.concept);
            norm_estimate(&mut o, a.k, &sigma, a.samples, &mut rng)?
        }
    };
    let mut rec = RunRecord::new("norm", a, a.seed)?;
    rec.metric("norm", result)?.metric("value", result.value)?.metric("padded_n", n)?;
    let ok = a.expect.is_none_or(|e| (result.value - e).abs() <= result.halfwidth() + 1e-12);
    rec.finish(started);
    Ok((rec, ok))
}

fn run_weak(a: &WeakArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let p = a.concept.prepare(a.k)?;
    let report = measure_advantage(&p.concept, a.k, a.runs, a.points, a.seed)?;
    let mut rec = RunRecord::new("weaklearn", a, a.seed)?;
    rec.metric("agreement", report.agreement)?
        .metric("halfwidth", report.halfwidth)?
        .metric("draws", report.draws)?
        .metric("total_queries", report.total_queries)?
        .metric("max_queries_per_run", report.max_queries_per_run)?
        .metric("max_distinct_per_run", report.max_distinct_per_run)?
        .metric("query_bound", report.query_bound)?;
    let mut ok = report.max_distinct_per_run <= report.query_bound;
    if let Some(t) = p.concept.table() {
        let norm = norm_weighted(t, p.concept.marginal())?.value;
        let bound = 0.5 + norm / f64::from(1u32 << (a.k + 1));
        rec.metric("norm", norm)?.metric("bound", bound)?;
        ok &= report.agreement >= bound - 4.0 * report.halfwidth;
    }
    rec.derived(derived(&p, &LearnerParams::new(a.k))?)?;
    rec.finish(started);
    Ok((rec, ok))
}

fn run_boost(a: &BoostArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let p = a.concept.prepare(a.learn.k)?;
    let params = a.learn.params();
    let weak = Amplifier { rho: p.concept.marginal().clone(), params };
    let bp = BoostParams { rounds_cap: a.learn.rounds_cap, ..BoostParams::new(a.learn.alpha, a.epsilon) };
    let mut rng = ChaCha8Rng::seed_from_u64(a.learn.seed);
    let mut o = MqOracle::new(&p.concept);
    let out = boost(&weak, &mut o, &bp, &mut rng)?;
    let trace_path = out_path(&a.trace, "boost_trace.csv")?;
    std::fs::write(&trace_path, trace_csv(&out.trace))?;
    if let Some(h) = &a.hypothesis {
        out.table.write_file(h)?;
    }
    let corr = p.concept.correlation_with(&out.table)?;
    let mut rec = RunRecord::new("boost", a, a.learn.seed)?;
    rec.metric("correlation", corr)?
        .metric("rounds", out.trace.len())?
        .metric("members", out.members.len())?
        .metric("stop", out.stop)?
        .metric("mq_queries", o.mq_count())?
        .metric("warnings", &out.warnings)?
        .metric("trace", trace_path.display().to_string())?;
    rec.derived(derived(&p, &params)?)?;
    rec.finish(started);
    let ok = corr >= 1.0 - a.epsilon - 2.0 * out.holdout_halfwidth;
    Ok((rec, ok))
}

fn class_params(class: ClassChoice, degree: u32, gates: u32, depth: u32, size: u64) -> ClassParams {
    match class {
        ClassChoice::Ptf => ClassParams::Ptf { degree },
        ClassChoice::PtfCircuit => ClassParams::PtfCircuit { degree, gates },
        ClassChoice::PtfTree => ClassParams::PtfTree { degree, depth },
        ClassChoice::SymPlus => ClassParams::SymPlus { degree, size },
        ClassChoice::SymCircuit => ClassParams::SymCircuit { degree, size, gates },
        ClassChoice::SymTree => ClassParams::SymTree { degree, size, depth },
    }
}

fn run_plant(a: &PlantArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let params = class_params(a.class, a.degree, a.gates, a.depth, a.size);
    let (inst, table) = plant(params, a.n, &mut rng)?;
    let inst_path = out_path(&a.instance, "instance.json")?;
    let table_path = out_path(&a.table, "instance.tt")?;
    std::fs::write(&inst_path, serde_json::to_string_pretty(&inst)?)?;
    table.write_file(&table_path)?;
    let mut rec = RunRecord::new("plant", a, a.seed)?;
    rec.metric("instance", inst_path.display().to_string())?
        .metric("table", table_path.display().to_string())?
        .metric("minus_count", table.count_minus())?;
    rec.finish(started);
    Ok((rec, true))
}

fn run_savings(a: &SavingsArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let class = match a.class {
        ClassChoice::PtfCircuit => TouchstoneClass::PtfCircuit { degree: a.degree, gates: a.m },
        ClassChoice::PtfTree => TouchstoneClass::PtfTree { degree: a.degree, depth: a.m },
        ClassChoice::SymCircuit => TouchstoneClass::SymCircuit { degree: a.degree, size: a.size, gates: a.m },
        ClassChoice::SymTree => TouchstoneClass::SymTree { degree: a.degree, size: a.size, depth: a.m },
        _ => return Err(cli_error("savings formulas exist for circuits and decision trees only")),
    };
    let r = savings_params(class, a.n, a.gamma, a.constant)?;
    let mut rec = RunRecord::new("savings", a, 0)?;
    rec.metric("savings", r)?;
    rec.finish(started);
    Ok((rec, !r.trivial))
}

fn run_compress(a: &CompressArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let p = a.concept.prepare(a.k)?;
    let table = deterministic_table(&p)?;
    let config = CompressConfig { k: a.k, alpha: a.alpha, epsilon: a.epsilon, rounds_cap: a.rounds_cap };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (circuit, stats) = compress(&table, &config, &mut rng)?;
    let exact = verify_exact(&circuit, &table)?;
    let path = out_path(&a.output, "compressed.json")?;
    circuit.write_file(&path)?;
    let size = circuit.size_report();
    let mut rec = RunRecord::new("compress", a, a.seed)?;
    rec.metric("size", size)?.metric("stats", &stats)?.metric("exact", exact)?.metric("output", path.display().to_string())?;
    rec.finish(started);
    Ok((rec, exact))
}

fn pipeline(learn: &LearnArgs, epsilon: f64) -> PipelineConfig {
    PipelineConfig { k: learn.k, alpha: learn.alpha, epsilon, rounds_cap: learn.rounds_cap }
}

fn run_exact(a: &ExactArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let p = a.concept.prepare(a.learn.k)?;
    let table = deterministic_table(&p)?;
    let policy = match a.policy {
        PolicyChoice::Lowest => CounterexamplePolicy::LowestIndex,
        PolicyChoice::Random => CounterexamplePolicy::Random { seed: a.cx_seed },
    };
    let mut eq = EqOracle::new(table.clone(), policy);
    let mut o = MqOracle::new(&p.concept);
    let mut rng = ChaCha8Rng::seed_from_u64(a.learn.seed);
    let (h, trace) = exact_learn(&mut o, &mut eq, &pipeline(&a.learn, a.epsilon), &mut rng)?;
    let path = out_path(&a.trace, "exact_trace.csv")?;
    let mut csv = String::from("step,idx\n");
    for (i, idx) in trace.patches.iter().enumerate() {
        csv.push_str(&format!("{},{idx}\n", i + 1));
    }
    std::fs::write(&path, csv)?;
    let exact = h == table;
    let mut rec = RunRecord::new("exactlearn", a, a.learn.seed)?;
    rec.metric("eq_calls", trace.eq_calls)?
        .metric("mq_calls", trace.mq_calls)?
        .metric("initial_mistakes", trace.patches.len())?
        .metric("terminated", trace.terminated)?
        .metric("exact", exact)?
        .metric("trace", path.display().to_string())?;
    rec.derived(derived(&p, &a.learn.params())?)?;
    rec.finish(started);
    Ok((rec, exact && trace.eq_calls <= trace.patches.len() as u64 + 1))
}

fn run_pac(a: &PacArgs) -> Result<Outcome, Error> {
    let started = Instant::now();
    let p = a.concept.prepare(a.learn.k)?;
    let table = deterministic_table(&p)?;
    let d = ExplicitDistribution::planted(table.arity(), &mut ChaCha8Rng::seed_from_u64(a.dist_seed))?;
    let mut o = MqOracle::new(&p.concept);
    let mut ex = |r: &mut dyn RngCore| {
        let x = d.sample(r);
        (x, table.get(x.index()))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.learn.seed);
    let (h, trace) = pac_di_learn(&mut o, &mut ex, a.epsilon, a.delta, &pipeline(&a.learn, a.learner_epsilon), &mut rng)?;
    let error = d.error(&h, &table)?;
    let path = out_path(&a.trace, "pacdi_trace.csv")?;
    std::fs::write(&path, trace.to_csv())?;
    let mut rec = RunRecord::new("pacdi", a, a.learn.seed)?;
    rec.metric("error", error)?
        .metric("rounds", trace.rounds.len())?
        .metric("examples", trace.examples)?
        .metric("mq_calls", trace.mq_calls)?
        .metric("trace", path.display().to_string())?;
    rec.finish(started);
    Ok((rec, error <= a.epsilon))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Norm(a) => run_norm(a),
        Command::Weaklearn(a) => run_weak(a),
        Command::Boost(a) => run_boost(a),
        Command::Plant(a) => run_plant(a),
        Command::Savings(a) => run_savings(a),
        Command::Compress(a) => run_compress(a),
        Command::Exactlearn(a) => run_exact(a),
        Command::Pacdi(a) => run_pac(a),
    };
    let (record, ok) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let emitted = RecordSink::open(cli.records.as_deref()).and_then(|mut s| s.emit(&record));
    if let Err(e) = emitted {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    if cli.assert && !ok {
        eprintln!("assertion failed for `{}`", record.command);
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
