//! `lerchkit` command-line front end.

mod output;
mod reproduce;

use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lerchkit::data::{builtin, load_table_file, to_csv_string, FrequencyTable, BUILTIN_NAMES};
use lerchkit::estimate::{fit_with, FitConfig, FitResult, Method};
use lerchkit::gof::{self, pearson_chi2, pearson_statistic, GroupCell, GroupingSpec};
use lerchkit::phi::set_term_budget;
use lerchkit::sampler::SamplerState;
use lerchkit::{LerchDist, LerchError, LerchParams, Truncation};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use output::{fmt6, round_json, text_table, Format};

const TERM_BUDGET_VAR: &str = "LERCHKIT_TERM_BUDGET";

#[derive(Parser)]
#[command(name = "lerchkit", version, about = "Lerch distributions: evaluate, sample, fit, score")]
struct Cli {
    /// Output format; defaults to `table` on a terminal and `json` otherwise.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one distribution function.
    Eval(EvalArgs),
    /// Draw random variates, one per line.
    Sample(SampleArgs),
    /// Fit a frequency table.
    Fit(FitArgs),
    /// Pearson X² and SSD of given parameters against a table.
    Gof(GofArgs),
    /// Compare against the published tables.
    Reproduce(ReproduceArgs),
    /// Write every builtin dataset as CSV and JSON.
    ExportDatasets(ExportArgs),
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    z: f64,
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    #[arg(long, allow_hyphen_values = true)]
    v: f64,
    /// Lower truncation point.
    #[arg(long, default_value_t = 0)]
    a: u64,
    /// Upper truncation point.
    #[arg(long)]
    b: Option<u64>,
}

impl ParamArgs {
    fn dist(&self) -> Result<LerchDist, CliError> {
        let t = Truncation::new(self.a, self.b)?;
        Ok(LerchDist::new(LerchParams::new(self.z, self.s, self.v), t)?)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// pmf, cdf, survival, hazard, quantile, mean, variance, mode or moment:r
    #[arg(long = "fn")]
    function: String,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<i64>,
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SourceArgs {
    /// CSV or JSON frequency table.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    data: Option<PathBuf>,
    /// Builtin dataset name.
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "minchi2")]
    method: MethodArg,
    #[arg(long)]
    a: Option<u64>,
    #[arg(long)]
    b: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    starts: usize,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Mm,
    Ml,
    Minchi2,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mm => Method::Mm,
            MethodArg::Ml => Method::Ml,
            MethodArg::Minchi2 => Method::MinChi2,
        }
    }
}

#[derive(Args)]
struct GofArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Defaults to the published parameters of a builtin dataset.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v: Option<f64>,
    #[arg(long)]
    a: Option<u64>,
    #[arg(long)]
    b: Option<u64>,
    /// Parameters estimated from the data, subtracted from the d.o.f.
    #[arg(long, default_value_t = 3)]
    fitted: u32,
}

#[derive(Args)]
struct ReproduceArgs {
    /// sowbugs, death, beans, yunoko, urchin40 or urchin180; all six when absent.
    #[arg(long)]
    table: Option<String>,
    /// Refit by minimum X² instead of using the published parameters.
    #[arg(long)]
    refit: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, default_value = "datasets")]
    dir: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Lerch(#[from] LerchError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lerch(LerchError::NoConvergence(_) | LerchError::NoSolution(_)) => 3,
            _ => 2,
        }
    }
}

/// Rendered result with its exit status.
struct Output {
    json: Value,
    text: String,
    code: u8,
}

impl Output {
    fn ok(json: Value, text: String) -> Self {
        Self { json, text, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(raw) = std::env::var(TERM_BUDGET_VAR) {
        match raw.trim().parse::<u64>() {
            Ok(n) if n > 0 => set_term_budget(n),
            _ => {
                eprintln!("error: {TERM_BUDGET_VAR} must be a positive integer, got `{raw}`");
                return ExitCode::from(2);
            }
        }
    }
    let format = cli.format.unwrap_or(if io::stdout().is_terminal() {
        Format::Table
    } else {
        Format::Json
    });
    let result = match cli.command {
        Command::Eval(args) => cmd_eval(&args),
        Command::Sample(args) => return cmd_sample(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Gof(args) => cmd_gof(&args),
        Command::Reproduce(args) => reproduce::run(&args),
        Command::ExportDatasets(args) => cmd_export(&args),
    };
    match result {
        Ok(mut out) => {
            let mut stdout = io::stdout().lock();
            let written = match format {
                Format::Json => {
                    round_json(&mut out.json);
                    writeln!(stdout, "{}", serde_json::to_string_pretty(&out.json).expect("json"))
                }
                Format::Table => write!(stdout, "{}", out.text),
            };
            if written.is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn need<T>(v: Option<T>, flag: &str, func: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--fn {func} needs --{flag}")))
}

fn cmd_eval(args: &EvalArgs) -> Result<Output, CliError> {
    let d = args.params.dist()?;
    let func = args.function.as_str();
    let value: Value = match func {
        "pmf" => json!(d.pmf(need(args.x, "x", func)?)),
        "cdf" => json!(d.cdf(need(args.x, "x", func)?)?),
        "survival" => json!(d.survival(need(args.x, "x", func)?)?),
        "hazard" => json!(d.hazard(need(args.x, "x", func)?)?),
        "quantile" => json!(d.quantile(need(args.q, "q", func)?)?),
        "mean" => json!(d.mean()?),
        "variance" => json!(d.variance()?),
        "mode" => json!(d.mode()),
        _ => match func.strip_prefix("moment:").map(str::parse::<u32>) {
            Some(Ok(r)) => json!(d.moment_uncorrected(r)?),
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown function `{func}`; expected pmf, cdf, survival, hazard, quantile, mean, variance, mode or moment:r"
                )))
            }
        },
    };
    let p = &args.params;
    let json = json!({
        "fn": func,
        "args": {"z": p.z, "s": p.s, "v": p.v, "a": p.a, "b": p.b, "x": args.x, "q": args.q},
        "value": value,
    });
    let shown = match value.as_f64() {
        Some(x) if !value.is_i64() => fmt6(x),
        _ => value.to_string(),
    };
    let at = match (args.x, args.q) {
        (Some(x), _) if needs_x(func) => format!("(x = {x})"),
        (_, Some(q)) if func == "quantile" => format!("(q = {})", fmt6(q)),
        _ => String::new(),
    };
    Ok(Output::ok(json, format!("{func}{at} = {shown}\n")))
}

fn needs_x(func: &str) -> bool {
    matches!(func, "pmf" | "cdf" | "survival" | "hazard")
}

fn cmd_sample(args: &SampleArgs) -> ExitCode {
    let d = match args.params.dist() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let mut st = SamplerState::seeded(d, args.seed);
    let mut out = BufWriter::new(io::stdout().lock());
    for _ in 0..args.n {
        match st.sample() {
            Ok(x) => {
                if writeln!(out, "{x}").is_err() {
                    return ExitCode::from(2);
                }
            }
            Err(e) => {
                let _ = out.flush();
                eprintln!("error: {e}");
                return ExitCode::from(CliError::from(e).exit_code());
            }
        }
    }
    if out.flush().is_err() {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

/// A table with the grouping and truncation that travel with it.
struct Source {
    table: FrequencyTable,
    grouping: Option<GroupingSpec>,
    truncation: Truncation,
    published: Option<LerchParams>,
}

fn load_source(src: &SourceArgs) -> Result<Source, CliError> {
    if let Some(name) = &src.builtin {
        let ds = builtin(name)?;
        return Ok(Source {
            table: ds.table,
            grouping: Some(ds.grouping),
            truncation: ds.truncation,
            published: Some(ds.published.params),
        });
    }
    let path = src.data.as_ref().expect("clap requires --data or --builtin");
    let file = load_table_file(path)?;
    let grouping = file.grouping.clone();
    let truncation = file.truncation.unwrap_or(Truncation::NONE);
    Ok(Source {
        table: file.into_table()?,
        grouping,
        truncation,
        published: None,
    })
}

fn truncation_override(base: Truncation, a: Option<u64>, b: Option<u64>) -> Result<Truncation, CliError> {
    if a.is_none() && b.is_none() {
        return Ok(base);
    }
    Ok(Truncation::new(a.unwrap_or(0), b)?)
}

#[derive(Serialize)]
struct GofOut {
    x2: f64,
    dof: u32,
    p_value: Option<f64>,
    groups: Vec<GroupCell>,
}

/// X² with its p-value, or with `dof = 0` and no p-value when the grouping
/// leaves no degrees of freedom.
fn gof_report(
    table: &FrequencyTable,
    d: &LerchDist,
    grouping: &GroupingSpec,
    fitted: u32,
) -> Result<GofOut, CliError> {
    match pearson_chi2(table, d, grouping, fitted) {
        Ok(r) => Ok(GofOut {
            x2: r.x2,
            dof: r.dof,
            p_value: Some(r.p_value),
            groups: r.groups,
        }),
        Err(LerchError::Domain(_)) if grouping.len() as i64 - 1 - (fitted as i64) < 1 => {
            let (x2, groups) = pearson_statistic(table, d, grouping)?;
            Ok(GofOut {
                x2,
                dof: 0,
                p_value: None,
                groups,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn default_grouping(table: &FrequencyTable) -> GroupingSpec {
    GroupingSpec::singletons(table.min_class(), table.max_class(), true)
}

#[derive(Serialize)]
struct Predicted {
    count: u64,
    observed: f64,
    expected: f64,
}

fn predicted(table: &FrequencyTable, d: &LerchDist) -> Vec<Predicted> {
    table
        .classes()
        .iter()
        .map(|c| Predicted {
            count: c.count,
            observed: c.observed,
            expected: table.n_total() * d.pmf(c.count as i64),
        })
        .collect()
}

fn gof_text(g: &GofOut, ssd: f64) -> String {
    let p = g.p_value.map_or("n/a".to_string(), fmt6);
    format!("X² = {}  dof = {}  p = {}  SSD = {}\n", fmt6(g.x2), g.dof, p, fmt6(ssd))
}

fn predicted_text(rows: &[Predicted]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.count.to_string(), fmt6(r.observed), fmt6(r.expected)])
        .collect();
    text_table(&["count", "observed", "expected"], &body)
}

fn cmd_fit(args: &FitArgs) -> Result<Output, CliError> {
    let src = load_source(&args.source)?;
    let truncation = truncation_override(src.truncation, args.a, args.b)?;
    let mut cfg = FitConfig::new(args.method.into())
        .with_truncation(truncation)
        .with_seed(args.seed)
        .with_starts(args.starts.max(1));
    if std::env::var(TERM_BUDGET_VAR).is_ok() {
        cfg.term_budget = lerchkit::phi::term_budget();
    }
    if let Some(g) = &src.grouping {
        cfg = cfg.with_grouping(g.clone());
    }
    let r: FitResult = fit_with(&src.table, &cfg)?;
    let d = LerchDist::new(r.params, truncation)?;
    let grouping = src.grouping.unwrap_or_else(|| default_grouping(&src.table));
    let report = gof_report(&src.table, &d, &grouping, 3)?;
    let ssd = gof::ssd(&src.table, &d);
    let rows = predicted(&src.table, &d);

    let mut text = format!(
        "{}  method = {}  converged = {}{}\nz = {}  s = {}  v = {}  a = {}  b = {}\nobjective = {}\n",
        src.table.label(),
        serde_json::to_value(r.method).expect("method").as_str().unwrap_or(""),
        r.converged,
        if r.at_boundary { "  (at boundary)" } else { "" },
        fmt6(r.params.z),
        fmt6(r.params.s),
        fmt6(r.params.v),
        truncation.lower,
        truncation.upper.map_or("inf".to_string(), |b| b.to_string()),
        fmt6(r.objective),
    );
    if let Some(c) = &r.covariance {
        text.push_str(&format!(
            "standard errors: z {}  s {}  v {}\n",
            fmt6(c[0][0].sqrt()),
            fmt6(c[1][1].sqrt()),
            fmt6(c[2][2].sqrt())
        ));
    }
    text.push_str(&gof_text(&report, ssd));
    text.push_str(&predicted_text(&rows));

    let json = json!({
        "label": src.table.label(),
        "fit": r,
        "gof": report,
        "ssd": ssd,
        "predicted": rows,
    });
    Ok(Output {
        json,
        text,
        code: if r.converged { 0 } else { 3 },
    })
}

fn cmd_gof(args: &GofArgs) -> Result<Output, CliError> {
    let src = load_source(&args.source)?;
    let params = match (args.z, args.s, args.v, src.published) {
        (Some(z), Some(s), Some(v), _) => LerchParams::new(z, s, v),
        (None, None, None, Some(p)) => p,
        _ => return Err(CliError::Usage("give all of --z, --s and --v".into())),
    };
    let truncation = truncation_override(src.truncation, args.a, args.b)?;
    let d = LerchDist::new(params, truncation)?;
    let grouping = src.grouping.unwrap_or_else(|| default_grouping(&src.table));
    let report = gof_report(&src.table, &d, &grouping, args.fitted)?;
    let ssd = gof::ssd(&src.table, &d);
    let rows = predicted(&src.table, &d);
    let text = format!(
        "{}  z = {}  s = {}  v = {}\n{}{}",
        src.table.label(),
        fmt6(params.z),
        fmt6(params.s),
        fmt6(params.v),
        gof_text(&report, ssd),
        predicted_text(&rows)
    );
    let json = json!({
        "label": src.table.label(),
        "params": params,
        "truncation": truncation,
        "gof": report,
        "ssd": ssd,
        "predicted": rows,
    });
    Ok(Output::ok(json, text))
}

fn cmd_export(args: &ExportArgs) -> Result<Output, CliError> {
    std::fs::create_dir_all(&args.dir)?;
    let mut files = Vec::new();
    for name in BUILTIN_NAMES {
        let ds = builtin(name)?;
        let csv = args.dir.join(format!("{name}.csv"));
        std::fs::write(&csv, to_csv_string(&ds.table))?;
        let json = args.dir.join(format!("{name}.json"));
        let body = serde_json::to_string_pretty(&ds.to_table_file()).expect("table serializes");
        std::fs::write(&json, body + "\n")?;
        files.push(csv.display().to_string());
        files.push(json.display().to_string());
    }
    let text = files.iter().map(|f| format!("wrote {f}\n")).collect();
    Ok(Output::ok(json!({ "files": files }), text))
}
