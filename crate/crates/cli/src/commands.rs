use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use moodkappa::corpus::{
    generate_synthetic, load_raw, preprocess, read_matrix, read_matrix_with_categories, write_matrix,
    write_matrix_to,
};
use moodkappa::dispersion::run_variation;
use moodkappa::formats::{
    fmt6, interval_rows, read_runs_as_stats, read_stats, read_variation, write_intervals, write_minima,
    write_preprocess_report, write_runs, write_stats, write_variation,
};
use moodkappa::mc::{run_experiment, summarize};
use moodkappa::minfit::{eval_min_model, extract_minima, fit};
use moodkappa::{
    fleiss_kappa, AnnotationMatrix, ColumnMapping, Error, ExperimentConfig, Regressors, Stage, TeamSelection,
    VariationConfig,
};
use serde_json::json;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(Error),
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) | Failure::Numeric(msg) => f.write_str(msg),
            Failure::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "moodkappa", version, about = "Interrater agreement of sentiment annotations across team subsets")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter a raw survey export and write the annotation matrix.
    Preprocess(PreprocessArgs),
    /// Generate a synthetic annotation matrix.
    Synth(SynthArgs),
    /// Fleiss' kappa of a matrix.
    Kappa(KappaArgs),
    /// Run the Monte Carlo subset experiment.
    Simulate(SimulateArgs),
    /// Fit the minimum-agreement model to per-n minima.
    Fit(FitArgs),
    /// Evaluate the closed-form minimum-agreement model.
    Minmodel(MinmodelArgs),
    /// Coefficient of variation of kappa_n across random teams.
    Variation(VariationArgs),
    /// Empirical-rule intervals from a variation file.
    Intervals(IntervalsArgs),
}

#[derive(Debug, Args)]
struct MatrixInput {
    /// Matrix file (`rater,item,label`).
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated category tokens (default: positive,neutral,negative).
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
}

impl MatrixInput {
    fn load(&self) -> Result<AnnotationMatrix, Failure> {
        Ok(match &self.categories {
            Some(c) => read_matrix_with_categories(&self.input, c)?,
            None => read_matrix(&self.input)?,
        })
    }
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    raw: PathBuf,
    /// Column mapping (TOML).
    #[arg(long)]
    mapping: PathBuf,
    /// Matrix output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Filter report output; standard output when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    raters: usize,
    #[arg(long)]
    items: usize,
    #[arg(long, default_value_t = 3)]
    categories: usize,
    /// Probability that a rater replaces the true label by a uniform draw.
    #[arg(long, value_parser = parse_probability)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KappaArgs {
    #[command(flatten)]
    matrix: MatrixInput,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    matrix: MatrixInput,
    /// Team size; defaults to every rater in the matrix.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed team as comma-separated rater ids instead of a random draw.
    #[arg(long, value_delimiter = ',')]
    team: Option<Vec<String>>,
    #[arg(long)]
    runs_out: Option<PathBuf>,
    #[arg(long)]
    stats_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["stats", "runs"])))]
struct FitArgs {
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    runs: Option<PathBuf>,
    #[arg(long, value_parser = parse_stage)]
    stage: Stage,
    /// Team size; defaults to the largest n in the input.
    #[arg(long)]
    k: Option<usize>,
    /// Whole-team agreement; defaults to the minimum recorded at n = k.
    #[arg(long, allow_hyphen_values = true)]
    kappa_hat: Option<f64>,
    /// Initial regressors `a,b,c,d`.
    #[arg(long, value_delimiter = ',', num_args = 4, allow_hyphen_values = true)]
    initial: Option<Vec<f64>>,
    /// Leave the pinned n = k point out of the fit.
    #[arg(long)]
    drop_last: bool,
    /// Exit with status 3 if the optimiser does not converge.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    minima_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MinmodelArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, allow_hyphen_values = true)]
    kappa_hat: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Anchor {
    /// Agreement of the whole matrix.
    Full,
    /// Mean agreement of the sampled teams.
    TeamMean,
}

#[derive(Debug, Args)]
struct VariationArgs {
    #[command(flatten)]
    matrix: MatrixInput,
    #[arg(long, default_value_t = 7)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    j: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    intervals_out: Option<PathBuf>,
    /// Which kappa_hat anchors the interval estimates.
    #[arg(long, value_enum, default_value_t = Anchor::Full)]
    anchor: Anchor,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct IntervalsArgs {
    /// Variation file (`n,mu_bar,sigma_bar,cv,cv_percent`).
    #[arg(long)]
    variation: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    kappa_hat: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn finish(mut w: Box<dyn Write>) -> CmdResult {
    w.flush()
        .map_err(|e| Failure::Data(Error::Io { path: "<output>".into(), source: e }))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialise"));
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Kappa(a) => cmd_kappa(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Minmodel(a) => cmd_minmodel(a),
        Command::Variation(a) => cmd_variation(a),
        Command::Intervals(a) => cmd_intervals(a),
    }
}

fn cmd_preprocess(a: PreprocessArgs) -> CmdResult {
    let mapping = ColumnMapping::load(&a.mapping)?;
    let raw = load_raw(&a.raw, &mapping)?;
    let (matrix, report) = preprocess(&raw)?;
    match &a.out {
        Some(p) => write_matrix(&matrix, p)?,
        None => write_matrix_to(&matrix, io::stdout().lock())?,
    }
    if a.json {
        let w = output(a.report.as_deref())?;
        serde_json::to_writer_pretty(w, &report).map_err(|e| Failure::Numeric(e.to_string()))?;
        if a.report.is_none() {
            println!();
        }
        return Ok(());
    }
    let mut w = output(a.report.as_deref())?;
    write_preprocess_report(&report, &mut w)?;
    finish(w)
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let matrix = generate_synthetic(a.raters, a.items, a.categories, a.noise, a.seed)?;
    match &a.out {
        Some(p) => write_matrix(&matrix, p)?,
        None => write_matrix_to(&matrix, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_kappa(a: KappaArgs) -> CmdResult {
    let matrix = a.matrix.load()?;
    let k = fleiss_kappa(&matrix);
    if a.json {
        print_json(&json!({
            "kappa": k.kappa,
            "observed_agreement": k.observed_agreement,
            "expected_agreement": k.expected_agreement,
            "degenerate": k.degenerate,
            "raters": matrix.n_raters(),
            "items": matrix.n_items(),
        }));
    } else {
        println!("kappa={}", fmt6(k.kappa));
        println!("observed_agreement={}", fmt6(k.observed_agreement));
        println!("expected_agreement={}", fmt6(k.expected_agreement));
        println!("degenerate={}", k.degenerate);
        println!("raters={}", matrix.n_raters());
        println!("items={}", matrix.n_items());
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let matrix = a.matrix.load()?;
    let (k, team_selection) = match a.team {
        Some(ids) => (a.k.unwrap_or(ids.len()), TeamSelection::Fixed(ids)),
        None => (a.k.unwrap_or(matrix.n_raters()), TeamSelection::Sample),
    };
    let config = ExperimentConfig {
        k,
        m: a.m,
        seed: a.seed,
        team_selection,
    };
    eprintln!("simulating k={k} m={} seed={}", a.m, a.seed);
    let runs = run_experiment(&matrix, &config)?;
    let stats = summarize(&runs)?;
    if let Some(p) = &a.runs_out {
        let mut w = output(Some(p))?;
        write_runs(&runs, &mut w)?;
        finish(w)?;
    }
    if a.json {
        print_json(&json!({ "kappa_hat": runs.kappa_hat, "team": runs.team_ids }));
    } else {
        println!("kappa_hat={}", fmt6(runs.kappa_hat));
        println!("team={}", runs.team_ids.join(","));
    }
    let mut w = output(a.stats_out.as_deref())?;
    write_stats(&stats, &mut w)?;
    finish(w)
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    let stats = match (&a.stats, &a.runs) {
        (Some(p), _) => read_stats(File::open(p).map_err(|e| Error::Io { path: p.clone(), source: e })?)?,
        (None, Some(p)) => {
            read_runs_as_stats(File::open(p).map_err(|e| Error::Io { path: p.clone(), source: e })?)?
        }
        (None, None) => unreachable!("clap enforces the source group"),
    };
    let k = a.k.unwrap_or(stats.k);
    let kappa_hat = match a.kappa_hat {
        Some(v) => v,
        None => {
            stats
                .row(k)
                .ok_or_else(|| Error::out_of_range("k", k, "no stats row at n = k"))?
                .summary
                .min
        }
    };
    let mut points = extract_minima(&stats, kappa_hat, k)?;
    if a.drop_last {
        points = points.without_last();
    }
    if let Some(p) = &a.minima_out {
        let mut w = output(Some(p))?;
        write_minima(&points, &mut w)?;
        finish(w)?;
    }
    let initial = a.initial.map(|v| Regressors { a: v[0], b: v[1], c: v[2], d: v[3] });
    let model = fit(&points, a.stage, initial)?;
    let mut w = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &model).map_err(|e| Failure::Numeric(e.to_string()))?;
    writeln!(w).map_err(|e| Failure::Data(Error::Io { path: "<output>".into(), source: e }))?;
    finish(w)?;
    if a.strict && !model.converged {
        return Err(Failure::Numeric(format!(
            "fit did not converge after {} iterations",
            model.iterations
        )));
    }
    Ok(())
}

fn cmd_minmodel(a: MinmodelArgs) -> CmdResult {
    let v = eval_min_model(a.n, a.k, a.kappa_hat).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("{}", fmt6(v));
    Ok(())
}

fn cmd_variation(a: VariationArgs) -> CmdResult {
    let matrix = a.matrix.load()?;
    let config = VariationConfig {
        k: a.k,
        m: a.m,
        j: a.j,
        seed: a.seed,
    };
    eprintln!("variation k={} m={} j={} seed={}", a.k, a.m, a.j, a.seed);
    let table = run_variation(&matrix, &config)?;
    let anchor = match a.anchor {
        Anchor::Full => table.full_kappa,
        Anchor::TeamMean => table.mean_team_kappa,
    };
    if a.json {
        print_json(&json!({
            "full_kappa": table.full_kappa,
            "mean_team_kappa": table.mean_team_kappa,
            "team_kappas": table.team_kappas,
        }));
    } else {
        println!("full_kappa={}", fmt6(table.full_kappa));
        println!("mean_team_kappa={}", fmt6(table.mean_team_kappa));
    }
    let mut w = output(a.out.as_deref())?;
    write_variation(&table, &mut w)?;
    finish(w)?;
    if let Some(p) = &a.intervals_out {
        let rows = interval_rows(&table.rows, anchor)?;
        let mut w = output(Some(p))?;
        write_intervals(&rows, &mut w)?;
        finish(w)?;
    }
    Ok(())
}

fn cmd_intervals(a: IntervalsArgs) -> CmdResult {
    let file = File::open(&a.variation).map_err(|e| Error::Io { path: a.variation.clone(), source: e })?;
    let rows = read_variation(file)?;
    let intervals = interval_rows(&rows, a.kappa_hat)?;
    let mut w = output(a.out.as_deref())?;
    write_intervals(&intervals, &mut w)?;
    finish(w)
}
