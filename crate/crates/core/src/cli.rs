//! The `cpdcond` command line.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage or configuration,
//! 3 I/O, 4 insufficient data.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use cpd_condition::condition::condition_report;
use cpd_condition::exec::default_workers;
use cpd_condition::experiments::{
    bf_probability, default_kappa0, empirical_ccdf, fit_tail, split_infinite, truncated_mean, FitReport, TruncatedMean,
    Which,
};
use cpd_condition::numfmt::{fmt_f64, parse_f64};
use cpd_condition::sampler::{run_campaign, write_samples_csv, CampaignConfig};
use cpd_condition::segre::kruskal_certify;
use cpd_condition::tensor::{CpDecomposition, Rank1Term, Shape};
use cpd_condition::verify::{run_suite, OracleReport};
use cpd_condition::Error;

pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DATA: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "cpdcond",
    version,
    about = "Condition numbers of CPDs and Gaussian identifiable tensor sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample Gaussian identifiable tensors until enough real decompositions are found.
    Sample(SampleArgs),
    /// Fit a power-law tail to the condition numbers of a sample CSV.
    Fit(FitArgs),
    /// Condition numbers of a given decomposition.
    Condition(ConditionArgs),
    /// Real-rank probabilities of n x n x 2 Gaussian tensors.
    BfTable(BfArgs),
    /// Run the numerical oracle suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    /// Tensor shape, e.g. 2x2x2.
    #[arg(long)]
    shape: String,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    target_real: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "CPDCOND_WORKERS")]
    workers: Option<usize>,
    /// Stop after this many samples even if the target was not reached.
    #[arg(long)]
    max_samples: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum WhichArg {
    Regular,
    Angular,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    which: WhichArg,
    #[arg(long)]
    out: PathBuf,
    /// CCDF export; defaults to `<out stem>.ccdf.csv`.
    #[arg(long)]
    ccdf: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ConditionArgs {
    /// JSON file holding a decomposition.
    #[arg(long, conflicts_with = "factors", required_unless_present = "factors")]
    cpd: Option<PathBuf>,
    /// Inline terms: `[scale:]v1;v2;...` with comma-separated entries,
    /// terms separated by `/`.
    #[arg(long)]
    factors: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct BfArgs {
    #[arg(long, default_value_t = 5)]
    n_max: u32,
    /// Empirical fractions to show alongside, as `n=fraction`.
    #[arg(long, value_name = "N=FRACTION")]
    empirical: Vec<String>,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    only: Option<String>,
    /// Write the reports as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Value,
    master_seed: Option<u64>,
    tool_version: &'static str,
    started_at: String,
    finished_at: String,
    outputs: Vec<String>,
    exit_code: u8,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Csv(c) if c.is_io_error() => EXIT_IO,
            Error::InsufficientData { .. } => EXIT_DATA,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Bookkeeping for one command run; the manifest is written next to the
/// outputs on success and on every failure with exit code ≥ 3.
struct Run {
    command: &'static str,
    config: Value,
    master_seed: Option<u64>,
    started_at: String,
    outputs: Vec<String>,
    manifest: Option<PathBuf>,
}

impl Run {
    fn new<T: Serialize>(command: &'static str, args: &T, master_seed: Option<u64>, manifest: Option<PathBuf>) -> Self {
        Run {
            command,
            config: serde_json::to_value(args).unwrap_or(Value::Null),
            master_seed,
            started_at: now(),
            outputs: Vec::new(),
            manifest,
        }
    }

    fn finish(self, result: Result<u8, Failure>) -> ExitCode {
        let code = match &result {
            Ok(c) => *c,
            Err(f) => f.code,
        };
        if let Err(f) = &result {
            eprintln!("error: {}", f.message);
        }
        if let Some(path) = &self.manifest {
            if code == 0 || code == EXIT_VERIFY || code >= EXIT_IO {
                let m = RunManifest {
                    command: self.command.to_string(),
                    config: self.config,
                    master_seed: self.master_seed,
                    tool_version: env!("CARGO_PKG_VERSION"),
                    started_at: self.started_at,
                    finished_at: now(),
                    outputs: self.outputs,
                    exit_code: code,
                };
                if let Err(e) = write_json(path, &m) {
                    eprintln!("error: cannot write manifest {}: {}", display(path), e.message);
                    return ExitCode::from(code.max(EXIT_IO));
                }
            }
        }
        ExitCode::from(code)
    }
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}.manifest.json"))
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match cli.command {
        Command::Sample(a) => {
            let mut run = Run::new("sample", &a, Some(a.seed), Some(a.out.join("manifest.json")));
            let res = cmd_sample(&a, &mut run);
            if matches!(&res, Err(f) if f.code == EXIT_USAGE) {
                run.manifest = None;
            }
            run.finish(res)
        }
        Command::Fit(a) => {
            let mut run = Run::new("fit", &a, None, Some(sibling_manifest(&a.out)));
            let res = cmd_fit(&a, &mut run);
            run.finish(res)
        }
        Command::Condition(a) => {
            let run = Run::new("condition", &a, None, None);
            let res = cmd_condition(&a);
            run.finish(res)
        }
        Command::BfTable(a) => {
            let run = Run::new("bf-table", &a, None, None);
            let res = cmd_bf_table(&a);
            run.finish(res)
        }
        Command::Verify(a) => {
            let mut run = Run::new("verify", &a, Some(a.seed), a.json.as_deref().map(sibling_manifest));
            let res = cmd_verify(&a, &mut run);
            run.finish(res)
        }
    }
}

fn cmd_sample(a: &SampleArgs, run: &mut Run) -> Result<u8, Failure> {
    let shape: Shape = a.shape.parse()?;
    let mut cfg = CampaignConfig::new(shape, a.rank, a.target_real, a.seed);
    cfg.workers = a.workers.unwrap_or_else(default_workers).max(1);
    cfg.max_samples = a.max_samples;
    cfg.validate()?;
    run.config["workers"] = json!(cfg.workers);

    fs::create_dir_all(&a.out)?;
    let result = run_campaign(&cfg)?;

    let csv_path = a.out.join("samples.csv");
    let mut buf = Vec::new();
    write_samples_csv(&result, &mut buf)?;
    write_atomic(&csv_path, &buf)?;
    run.outputs.push(display(&csv_path));

    let summary_path = a.out.join("summary.json");
    let summary = result.summary();
    write_json(&summary_path, &summary)?;
    run.outputs.push(display(&summary_path));

    println!(
        "{}: {} samples, real {} complex {} failed {}, real fraction {:.4}, {:.1}s",
        summary.shape,
        summary.samples,
        summary.real,
        summary.complex,
        summary.failed,
        summary.real_fraction,
        summary.wall_time_seconds
    );
    if !summary.reached_target {
        eprintln!("warning: sample limit reached before {} real samples", a.target_real);
    }
    Ok(0)
}

struct KappaColumn {
    shape: String,
    r: usize,
    values: Vec<f64>,
}

fn read_kappas(path: &Path, which: Which) -> Result<KappaColumn, Failure> {
    let mut rdr = csv::Reader::from_path(path).map_err(Error::from)?;
    let headers = rdr.headers().map_err(Error::from)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| usage(format!("{}: missing column '{name}'", display(path))))
    };
    let (shape_i, r_i, kind_i) = (col("shape")?, col("r")?, col("kind")?);
    let k_i = col(match which {
        Which::Regular => "kappa",
        Which::Angular => "kappa_ang",
    })?;
    let mut out = KappaColumn {
        shape: String::new(),
        r: 0,
        values: Vec::new(),
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        if out.shape.is_empty() {
            out.shape = rec.get(shape_i).unwrap_or_default().to_string();
            out.r = rec.get(r_i).and_then(|s| s.parse().ok()).unwrap_or(0);
        }
        if rec.get(kind_i) != Some("real") {
            continue;
        }
        let field = rec.get(k_i).unwrap_or_default();
        let v = parse_f64(field)
            .ok_or_else(|| usage(format!("{}: record {}: bad value {field:?}", display(path), line + 1)))?;
        out.values.push(v);
    }
    Ok(out)
}

fn cmd_fit(a: &FitArgs, run: &mut Run) -> Result<u8, Failure> {
    let which = match a.which {
        WhichArg::Regular => Which::Regular,
        WhichArg::Angular => Which::Angular,
    };
    let data = read_kappas(&a.input, which)?;
    let (finite, excluded) = split_infinite(&data.values);
    if finite.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 }.into());
    }
    let ccdf = empirical_ccdf(&finite)?;
    let ccdf_path = a.ccdf.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("fit");
        a.out.with_file_name(format!("{stem}.ccdf.csv"))
    });
    let mut text = String::from("x,ccdf\n");
    for (x, c) in ccdf.points() {
        text.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(c)));
    }
    write_atomic(&ccdf_path, text.as_bytes())?;
    run.outputs.push(display(&ccdf_path));

    let fit = fit_tail(&ccdf)?;
    let kappa0 = default_kappa0(&ccdf);
    let mean = truncated_mean(&finite, &fit, kappa0);
    let report = FitReport {
        shape: data.shape,
        r: data.r,
        which,
        a: fit.a,
        b: fit.b,
        r2: fit.r_squared,
        points_used: fit.points_used,
        excluded_inf: excluded,
        samples: data.values.len(),
        kappa0,
        truncated_mean: match mean {
            TruncatedMean::Finite(m) => m,
            TruncatedMean::Infinite => f64::INFINITY,
        },
    };
    write_json(&a.out, &report)?;
    run.outputs.push(display(&a.out));

    println!(
        "b = {:.4}  a = {:.4}  R^2 = {:.5}  points = {}  excluded inf = {}",
        report.b, report.a, report.r2, report.points_used, report.excluded_inf
    );
    match mean {
        TruncatedMean::Finite(m) => println!("tail-truncated mean: {m:.6} (kappa0 = {kappa0:.6})"),
        TruncatedMean::Infinite => println!("tail-truncated mean: infinite (b <= 1)"),
    }
    Ok(0)
}

fn parse_vector(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| usage(format!("bad number {x:?}"))))
        .collect()
}

/// Parses `[scale:]v1;v2;.../[scale:]...`.
fn parse_factors(s: &str) -> Result<CpDecomposition, Failure> {
    let terms = s
        .split('/')
        .map(|t| {
            let (scale, body) = match t.split_once(':') {
                Some((sc, body)) => (
                    sc.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("bad scale {sc:?}")))?,
                    body,
                ),
                None => (1.0, t),
            };
            let vectors = body.split(';').map(parse_vector).collect::<Result<Vec<_>, _>>()?;
            let term = Rank1Term::from_vectors(vectors)?;
            Ok(Rank1Term::new(term.scale() * scale, term.factors().to_vec())?)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let shape = terms[0].shape();
    Ok(CpDecomposition::new(shape, terms)?)
}

fn cmd_condition(a: &ConditionArgs) -> Result<u8, Failure> {
    let cpd = match (&a.cpd, &a.factors) {
        (Some(path), _) => CpDecomposition::from_json(&fs::read_to_string(path)?)?,
        (None, Some(f)) => parse_factors(f)?,
        (None, None) => return Err(usage("either --cpd or --factors is required")),
    };
    let rep = condition_report(&cpd);
    let kruskal = kruskal_certify(&cpd).ok();
    let out = json!({
        "shape": cpd.shape().to_string(),
        "rank": cpd.rank(),
        "kappa": fmt_json(rep.kappa),
        "kappa_angular": fmt_json(rep.kappa_angular),
        "sigma_min_regular": rep.sigma_min_regular,
        "sigma_min_angular": rep.sigma_min_angular,
        "kruskal_identifiable": kruskal,
    });
    println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
    Ok(0)
}

fn fmt_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_f64(x))
    }
}

fn cmd_bf_table(a: &BfArgs) -> Result<u8, Failure> {
    if a.n_max < 2 {
        return Err(usage("--n-max must be at least 2"));
    }
    let mut empirical = std::collections::BTreeMap::new();
    for e in &a.empirical {
        let (n, f) = e
            .split_once('=')
            .ok_or_else(|| usage(format!("expected N=FRACTION, got {e:?}")))?;
        let n: u32 = n.trim().parse().map_err(|_| usage(format!("bad n in {e:?}")))?;
        let f: f64 = f.trim().parse().map_err(|_| usage(format!("bad fraction in {e:?}")))?;
        empirical.insert(n, f);
    }
    println!("{:>3}  {:<22}  empirical", "n", "p_n");
    for n in 2..=a.n_max {
        let p = bf_probability(n)?;
        let emp = empirical.get(&n).map(|f| format!("{f}")).unwrap_or_default();
        println!("{n:>3}  {:<22}  {emp}", fmt_f64(p));
    }
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, run: &mut Run) -> Result<u8, Failure> {
    let reports: Vec<OracleReport> = run_suite(a.trials, a.seed, a.only.as_deref())?;
    for r in &reports {
        println!("{}", r.line());
    }
    if let Some(path) = &a.json {
        write_json(path, &reports)?;
        run.outputs.push(display(path));
    }
    Ok(if reports.iter().all(|r| r.passed) {
        0
    } else {
        EXIT_VERIFY
    })
}
