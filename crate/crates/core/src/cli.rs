//! Command-line front end. Every subcommand is a thin adapter over the
//! library; numbers are printed with shortest round-trip formatting so the
//! output parses back to the exact library values.
//!
//! Exit codes: 0 success, 2 input error, 3 computation error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::capacity::{solve_capacity, SolverConfig};
use crate::detector::{detect, score_record};
use crate::error::Error;
use crate::io::{self, ScoreFormat, SyntheticConfig};
use crate::losses::{evaluate_loss, ClassDistribution};
use crate::mead::{evaluate, DetectorReport, EvaluateOptions, EvaluationReport};
use crate::types::{validate_channel, AttackGroup, Loss, Role};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "capmix",
    version,
    about = "Capacity-weighted aggregation of adversarial-example detectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal detector weights and capacity for one channel.
    Capacity(CapacityArgs),
    /// Aggregate detector scores for one input or a whole score file.
    Aggregate(AggregateArgs),
    /// Multi-armed evaluation of a score file against attack groups.
    Evaluate(EvaluateArgs),
    /// Evaluate attacker objectives on two class-probability vectors.
    Losses(LossesArgs),
    /// Generate a synthetic score file.
    Synth(SynthArgs),
    /// Expand an attack-group config and print its census.
    GroupsCheck(GroupsCheckArgs),
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Duality-gap tolerance in nats.
    #[arg(long = "tol", default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iterations: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            initial_weights: None,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["channel", "rows"])))]
pub struct CapacityArgs {
    /// File with one `p0,p1` row per line (or `;`-separated rows).
    #[arg(long)]
    pub channel: Option<PathBuf>,
    /// Inline rows, e.g. "0.9,0.1;0.1,0.9".
    #[arg(long, allow_hyphen_values = true)]
    pub rows: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Report capacity and gap in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["scores", "input"])))]
pub struct AggregateArgs {
    /// Inline per-detector P(adversarial), e.g. "0.9,0.2,0.3".
    #[arg(long, allow_hyphen_values = true)]
    pub scores: Option<String>,
    /// Score file; every record is aggregated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<ScoreFormat>,
    /// Decision threshold; 0.5 is an arbitrary default.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Group config file, or `builtin` for the shipped attack table.
    #[arg(long)]
    pub groups: PathBuf,
    #[arg(long)]
    pub format: Option<ScoreFormat>,
    /// Machine-readable JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-group ROC point CSVs.
    #[arg(long = "roc-dump")]
    pub roc_dump: Option<PathBuf>,
    /// Also evaluate each detector alone.
    #[arg(long)]
    pub baselines: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    /// ace, kl, fr, gini or all.
    #[arg(long, default_value = "all")]
    pub loss: String,
    /// Clean (or ground-truth) class probabilities, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub clean: Option<String>,
    /// Adversarial class probabilities, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub adv: Option<String>,
    /// File whose first two non-empty lines are the clean and adversarial vectors.
    #[arg(long, conflicts_with_all = ["clean", "adv"])]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scenario TOML; the shipped default scenario when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<ScoreFormat>,
}

#[derive(Debug, Args)]
pub struct GroupsCheckArgs {
    /// Group config file; the shipped attack table when absent.
    #[arg(long)]
    pub groups: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: e.to_string(),
    }
}

fn compute(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_COMPUTE,
        message: e.to_string(),
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Capacity(a) => run_capacity(a, out),
        Command::Aggregate(a) => run_aggregate(a, out),
        Command::Evaluate(a) => run_evaluate(a, out),
        Command::Losses(a) => run_losses(a, out),
        Command::Synth(a) => run_synth(a, out),
        Command::GroupsCheck(a) => run_groups_check(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_text(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes()).map_err(compute)
}

fn run_capacity(args: &CapacityArgs, out: &mut dyn Write) -> CliResult {
    let text = match (&args.rows, &args.channel) {
        (Some(rows), _) => rows.clone(),
        (None, Some(path)) => read_text(path)?,
        (None, None) => unreachable!("clap enforces one channel source"),
    };
    let channel = validate_channel(&io::parse_rows(&text).map_err(input)?).map_err(input)?;
    let config = args.solver.config();
    config.validate().map_err(input)?;
    let result = solve_capacity(&channel, &config).map_err(compute)?;
    let scale = if args.bits {
        std::f64::consts::LOG2_E
    } else {
        1.0
    };
    let value = json!({
        "weights": result.weights.as_slice(),
        "capacity": result.capacity * scale,
        "units": if args.bits { "bits" } else { "nats" },
        "iterations": result.iterations,
        "converged": result.converged,
        "gap": result.final_gap * scale,
    });
    emit(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&value).expect("json")),
    )
}

fn score_format(explicit: Option<ScoreFormat>, path: &Path) -> ScoreFormat {
    explicit.unwrap_or_else(|| ScoreFormat::from_path(path))
}

fn run_aggregate(args: &AggregateArgs, out: &mut dyn Write) -> CliResult {
    if !(0.0..=1.0).contains(&args.gamma) {
        return Err(input(Error::GammaOutOfRange(args.gamma)));
    }
    let config = args.solver.config();
    config.validate().map_err(input)?;

    if let Some(inline) = &args.scores {
        let scores = io::parse_vector(inline).map_err(input)?;
        let record = crate::types::ScoreRecord {
            sample_id: "inline".into(),
            role: Role::Natural,
            attack: None,
            fooled: false,
            scores,
        };
        record.validate().map_err(input)?;
        let mix = score_record(&record, &config).map_err(compute)?;
        let detected = detect(&mix, args.gamma).map_err(input)?;
        let value = json!({
            "p_adversarial": mix.p_adversarial,
            "weights": mix.weights.as_slice(),
            "capacity": mix.capacity,
            "gamma": args.gamma,
            "detected": detected,
        });
        let text = format!("{}\n", serde_json::to_string_pretty(&value).expect("json"));
        return match &args.out {
            Some(path) => fs::write(path, text).map_err(compute),
            None => emit(out, &text),
        };
    }

    let path = args.input.as_ref().expect("clap enforces one score source");
    let records = io::read_scores(path, score_format(args.format, path)).map_err(input)?;
    let scores = crate::mead::score_all(&records, &crate::detector::Scorer::Mixture(config))
        .map_err(compute)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| compute(e);
    writer
        .write_record([
            "sample_id",
            "role",
            "attack",
            "fooled",
            "p_adversarial",
            "capacity",
            "detected",
        ])
        .map_err(csv_err)?;
    for (r, s) in records.iter().zip(&scores) {
        let detected = detect(s, args.gamma).map_err(input)?;
        writer
            .write_record([
                r.sample_id.clone(),
                r.role.as_str().to_string(),
                r.attack.as_ref().map(|k| k.to_string()).unwrap_or_default(),
                if r.role == Role::Adversarial {
                    r.fooled.to_string()
                } else {
                    String::new()
                },
                s.p_adversarial.to_string(),
                s.capacity.to_string(),
                detected.to_string(),
            ])
            .map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| compute(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("utf-8");
    match &args.out {
        Some(path) => fs::write(path, text).map_err(compute),
        None => emit(out, &text),
    }
}

fn load_groups(path: &Path) -> std::result::Result<Vec<AttackGroup>, Failure> {
    if path.as_os_str() == "builtin" {
        return Ok(io::default_groups());
    }
    io::read_groups(path).map_err(input)
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn run_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> CliResult {
    let groups = load_groups(&args.groups)?;
    let records =
        io::read_scores(&args.scores, score_format(args.format, &args.scores)).map_err(input)?;
    let config = args.solver.config();
    config.validate().map_err(input)?;
    let options = EvaluateOptions {
        baselines: args.baselines,
        roc: args.roc_dump.is_some(),
    };
    let report = evaluate(&records, &groups, &config, &options).map_err(|e| match e {
        Error::InvalidRecord(_) | Error::LengthMismatch { .. } => input(e),
        other => compute(other),
    })?;

    if let Some(path) = &args.out {
        io::write_report(path, &report).map_err(compute)?;
    }
    if let Some(dir) = &args.roc_dump {
        fs::create_dir_all(dir).map_err(compute)?;
        for det in std::iter::once(&report.mixture).chain(&report.baselines) {
            for g in &det.groups {
                if let Some(points) = &g.roc {
                    let name = format!("{}_{}.csv", det.detector, file_safe(&g.group));
                    fs::write(dir.join(name), io::roc_csv(points)).map_err(compute)?;
                }
            }
        }
    }
    emit(out, &render_report(&report))
}

fn render_detector(det: &DetectorReport, text: &mut String) {
    text.push_str(&format!("[{}]\n", det.detector));
    text.push_str(&format!(
        "{:<14} {:>7} {:>6} {:>6} {:>8} {:>8} {:>10}\n",
        "group", "members", "pos", "neg", "AUROC%", "FPR95%", "capacity"
    ));
    for g in &det.groups {
        let cap = g
            .mean_capacity
            .map(|c| format!("{c:.4}"))
            .unwrap_or_else(|| "-".into());
        text.push_str(&format!(
            "{:<14} {:>7} {:>6} {:>6} {:>8.1} {:>8.1} {:>10}\n",
            g.group,
            g.n_members,
            g.n_positives,
            g.n_negatives,
            100.0 * g.auroc,
            100.0 * g.fpr_at_95_tpr,
            cap
        ));
    }
    text.push_str(&format!(
        "{:<14} {:>7} {:>6} {:>6} {:>8.1} {:>8.1}\n",
        "mean",
        "",
        "",
        "",
        100.0 * det.mean_auroc,
        100.0 * det.mean_fpr_at_95_tpr
    ));
}

/// Plain-text table of a report.
pub fn render_report(report: &EvaluationReport) -> String {
    let mut text = format!(
        "records: {}  detectors: {}\n",
        report.n_records, report.n_detectors
    );
    render_detector(&report.mixture, &mut text);
    for b in &report.baselines {
        render_detector(b, &mut text);
    }
    if !report.skipped_groups.is_empty() {
        text.push_str(&format!(
            "skipped (no records): {}\n",
            report.skipped_groups.join(", ")
        ));
    }
    text
}

fn run_losses(args: &LossesArgs, out: &mut dyn Write) -> CliResult {
    let (clean, adv) = match &args.file {
        Some(path) => {
            let text = read_text(path)?;
            let mut lines = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'));
            match (lines.next(), lines.next()) {
                (Some(c), Some(a)) => (c.to_string(), a.to_string()),
                _ => {
                    return Err(input(
                        "loss file needs two lines: clean and adversarial probabilities",
                    ))
                }
            }
        }
        None => match (&args.clean, &args.adv) {
            (Some(c), Some(a)) => (c.clone(), a.clone()),
            _ => return Err(input("give --clean and --adv, or --file")),
        },
    };
    let clean = ClassDistribution::new(io::parse_vector(&clean).map_err(input)?).map_err(input)?;
    let adv = ClassDistribution::new(io::parse_vector(&adv).map_err(input)?).map_err(input)?;
    let losses: Vec<Loss> = if args.loss.eq_ignore_ascii_case("all") {
        Loss::ALL.to_vec()
    } else {
        vec![args.loss.parse().map_err(input)?]
    };
    let mut map = serde_json::Map::new();
    for loss in losses {
        let v = evaluate_loss(loss, &clean, &adv).map_err(input)?;
        map.insert(loss.to_string(), json!(v));
    }
    emit(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&map).expect("json")),
    )
}

fn run_synth(args: &SynthArgs, out: &mut dyn Write) -> CliResult {
    let mut config = match &args.config {
        Some(path) => io::read_synthetic_config(path).map_err(input)?,
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let records = io::generate_synthetic(&config).map_err(input)?;
    let format = score_format(args.format, &args.out);
    let comments = vec![
        format!("capmix synthetic scores; seed = {}", config.seed),
        io::PRNG_DESCRIPTION.to_string(),
    ];
    io::write_scores(&args.out, &records, format, &comments).map_err(compute)?;
    emit(
        out,
        &format!(
            "wrote {} records to {}\n",
            records.len(),
            args.out.display()
        ),
    )
}

fn run_groups_check(args: &GroupsCheckArgs, out: &mut dyn Write) -> CliResult {
    let groups = match &args.groups {
        Some(path) => load_groups(path)?,
        None => io::default_groups(),
    };
    let mut text = String::new();
    for g in &groups {
        let algos: Vec<String> = g.members.iter().map(|m| m.to_string()).collect();
        text.push_str(&format!(
            "{:<14} {:>3}  {}\n",
            g.label(),
            g.members.len(),
            algos.join(" ")
        ));
    }
    let total: usize = groups.iter().map(|g| g.members.len()).sum();
    text.push_str(&format!("cells: {}  variants: {}\n", groups.len(), total));
    emit(out, &text)
}
