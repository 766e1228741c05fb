use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psr_core::arcs::{
    default_delta_grid, ft_at_zero_check, major_arc_report, minor_arc_report, FtAtZeroReport,
    MajorArcRow, MinorArcParams, MinorArcRow,
};
use psr_core::csv::{fmt_real, render, CsvRow};
use psr_core::increment::{best_translate, iterate_to_primes, IterationParams, Progression};
use psr_core::prime_core::{gcd, psi, sieve_primes, ExceptionalContext};
use psr_core::regularity::{
    bootstrap_run, random_restarts, rp_threshold, schur_oracle, BootstrapParams, BootstrapTerminal,
    Colouring, SearchConfig, Threshold, ThresholdReport, ValueOrder,
};
use psr_core::{IntSet, LabError};
use serde::Serialize;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exponential sums over primes, density increments and monochromatic
/// solutions of p1 - p2 = p3 - 1.
///
/// Exit codes: 0 success, 1 other failure, 2 usage or configuration error,
/// 3 search budget exhausted (partial output written), 4 internal invariant
/// violation.
#[derive(Parser)]
#[command(name = "psr", version)]
struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Primes up to a limit, or a table of psi(limit; q, a) over residues a.
    Sieve(SieveArgs),
    /// The value at zero, major-arc and minor-arc reports for the weighted
    /// primes of the form d n + 1.
    Arcs(ArcsArgs),
    /// Smallest N forcing a monochromatic solution, for integers
    /// (x + y = z) or shifted primes (p1 - p2 = p3 - 1).
    Schur(SchurArgs),
    /// Runs the colour-reduction loop on a colouring file; writes a JSON-lines
    /// trace.
    Bootstrap(BootstrapArgs),
    /// Iterates density increments on a set file until its differences meet
    /// shifted primes; writes a JSON-lines trace.
    Increment(IncrementArgs),
    /// The translate of Y meeting X most often.
    Translate(TranslateArgs),
    /// Writes a colouring file by residue class or at random.
    Colouring(ColouringArgs),
}

#[derive(Args, Serialize)]
struct SieveArgs {
    #[arg(long)]
    limit: u64,
    /// Write psi(limit; q, a) for each a coprime to q instead of the primes.
    #[arg(long)]
    psi_modulus: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ArcsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: u64,
    /// Exceptional modulus; values above 1 need --exceptional.
    #[arg(long, default_value_t = 1)]
    dbar: u64,
    #[arg(long)]
    exceptional: bool,
    /// Largest denominator in the major-arc report.
    #[arg(long, default_value_t = 10)]
    q_max: u64,
    /// Arc width parameter Q of the minor-arc report [default: floor(sqrt N)].
    #[arg(long)]
    big_q: Option<u64>,
    /// Minor-arc samples must have denominator above this [default: min(10, Q - 1)].
    #[arg(long)]
    q_threshold: Option<u64>,
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SchurKind {
    Integers,
    ShiftedPrimes,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum OrderArg {
    Ascending,
    Descending,
}

#[derive(Args, Serialize)]
struct SchurArgs {
    #[arg(long, value_enum)]
    kind: SchurKind,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 200)]
    n_max: u64,
    /// Node budget of each top-level search branch.
    #[arg(long, default_value_t = 50_000_000)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = OrderArg::Ascending)]
    order: OrderArg,
    /// Randomized restarts used to cross-check the result; 0 skips them.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    /// Node budget of each restart.
    #[arg(long, default_value_t = 100_000)]
    restart_budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Avoiding colouring at the largest certified N [default: <out>.colouring].
    #[arg(long)]
    colouring_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BootstrapArgs {
    #[arg(long)]
    colouring: PathBuf,
    /// Exceptional modulus injected at each step, comma separated; later steps use 1.
    #[arg(long, value_delimiter = ',')]
    dbar_schedule: Vec<u64>,
    /// Refine onto progressions of the minimal admissible length.
    #[arg(long)]
    minimal_refinement: bool,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 1.0 / 32.0)]
    c1: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct IncrementArgs {
    /// Set file, one integer per line, inside [1, N].
    #[arg(long)]
    set: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: u64,
    #[arg(long, default_value_t = 1)]
    dbar: u64,
    #[arg(long)]
    exceptional: bool,
    #[arg(long, default_value_t = 1.0 / 8.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0 / 32.0)]
    c1: f64,
    /// Largest arc denominator searched for increments [default: ceil(alpha^-3)].
    #[arg(long)]
    q1: Option<u64>,
    /// Shortest progression accepted as an increment [default: ceil(1/(c alpha))].
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TranslateArgs {
    #[arg(long)]
    x: PathBuf,
    /// Ambient progression of X as start,step,length.
    #[arg(long)]
    x_prog: String,
    #[arg(long)]
    y: PathBuf,
    /// Ambient progression of Y as start,step,length.
    #[arg(long)]
    y_prog: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Scheme {
    Residue,
    Random,
}

#[derive(Args, Serialize)]
struct ColouringArgs {
    #[arg(long)]
    n0: u64,
    #[arg(long)]
    k: u32,
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// Residue scheme: colour 1 + ((p mod m) mod k).
    #[arg(long, default_value_t = 4)]
    modulus: u64,
    /// Random scheme seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Lab(LabError),
    Io(PathBuf, std::io::Error),
    /// Output was written but the run did not reach a definite answer.
    Budget(String),
    Violation(String),
    Other(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lab(e) => match e {
                LabError::Domain(_)
                | LabError::Parse { .. }
                | LabError::Range { .. }
                | LabError::Resource { .. }
                | LabError::TableTooSmall { .. } => 2,
                LabError::BudgetExhausted { .. } => 3,
                LabError::Invariant(_) => 4,
                LabError::Aliasing { .. }
                | LabError::Degenerate(_)
                | LabError::NoCertificate(_) => 1,
            },
            Failure::Io(..) | Failure::Other(_) => 1,
            Failure::Budget(_) => 3,
            Failure::Violation(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lab(e) => e.to_string(),
            Failure::Io(path, e) => format!("{}: {e}", path.display()),
            Failure::Budget(m) | Failure::Violation(m) | Failure::Other(m) => m.clone(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Sieve(a) => sieve(a),
        Command::Arcs(a) => arcs(a),
        Command::Schur(a) => schur(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Increment(a) => increment(a),
        Command::Translate(a) => translate(a),
        Command::Colouring(a) => colouring(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// The echoed configuration: command, version, then the arguments in key
/// order. Thread count is excluded since outputs do not depend on it.
fn config_pairs(command: &str, args: &impl Serialize) -> Vec<(String, String)> {
    let mut pairs = vec![
        ("command".to_string(), command.to_string()),
        ("version".to_string(), VERSION.to_string()),
    ];
    if let Ok(Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            let v = match v {
                Value::Null => String::new(),
                Value::String(s) => s,
                other => other.to_string(),
            };
            pairs.push((k, v));
        }
    }
    pairs
}

fn config_json(command: &str, args: &impl Serialize) -> Value {
    json!({
        "config": {
            "command": command,
            "version": VERSION,
            "args": serde_json::to_value(args).unwrap_or(Value::Null),
        }
    })
}

fn comment_block(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn jsonl(lines: &[Value]) -> String {
    lines.iter().map(|v| format!("{v}\n")).collect()
}

fn to_json(x: &impl Serialize) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

struct PrimeRow {
    index: usize,
    p: u32,
}

impl CsvRow for PrimeRow {
    const HEADER: &'static [&'static str] = &["index", "p"];
    fn fields(&self) -> Vec<String> {
        vec![self.index.to_string(), self.p.to_string()]
    }
}

struct PsiRow {
    a: u64,
    psi: f64,
}

impl CsvRow for PsiRow {
    const HEADER: &'static [&'static str] = &["a", "psi"];
    fn fields(&self) -> Vec<String> {
        vec![self.a.to_string(), fmt_real(self.psi)]
    }
}

fn sieve(a: &SieveArgs) -> Outcome {
    let table = sieve_primes(a.limit)?;
    let config = config_pairs("sieve", a);
    let text = match a.psi_modulus {
        None => {
            let rows: Vec<PrimeRow> = table
                .primes()
                .iter()
                .enumerate()
                .map(|(i, &p)| PrimeRow { index: i + 1, p })
                .collect();
            render(&config, &rows)
        }
        Some(q) => {
            if q == 0 {
                return Err(LabError::Domain("psi modulus must be >= 1".into()).into());
            }
            let mut rows = Vec::new();
            for r in (0..q).filter(|&r| gcd(r, q) == 1) {
                rows.push(PsiRow {
                    a: r,
                    psi: psi(a.limit, q, r, &table)?,
                });
            }
            render(&config, &rows)
        }
    };
    write(&a.out, &text)
}

fn arcs(a: &ArcsArgs) -> Outcome {
    let ctx = ExceptionalContext::new(a.dbar, a.exceptional)?;
    if a.d == 0 {
        return Err(LabError::Domain("d must be >= 1".into()).into());
    }
    let big_q = a
        .big_q
        .unwrap_or(((a.n as f64).sqrt().floor() as u64).max(1));
    let q_threshold = a.q_threshold.unwrap_or(10.min(big_q.saturating_sub(1)));
    let mut config = config_pairs("arcs", a);
    config.push(("resolved_big_q".into(), big_q.to_string()));
    config.push(("resolved_q_threshold".into(), q_threshold.to_string()));
    let (zero, major, minor) = if a.n == 0 {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        let limit = ctx
            .dbar()
            .checked_mul(a.d)
            .and_then(|dd| dd.checked_mul(a.n as u64))
            .and_then(|x| x.checked_add(1))
            .ok_or_else(|| LabError::Domain("dbar d N + 1 overflows".into()))?;
        let table = sieve_primes(limit)?;
        let zero: Vec<FtAtZeroReport> = vec![ft_at_zero_check(a.n, a.d, ctx, &table)?];
        let major: Vec<MajorArcRow> =
            major_arc_report(a.n, a.d, ctx, a.q_max, &default_delta_grid(a.n), &table)?;
        let params = MinorArcParams {
            big_q,
            q_threshold,
            sample_count: a.samples,
            seed: a.seed,
        };
        let minor: Vec<MinorArcRow> = minor_arc_report(a.n, a.d, ctx, params, &table)?;
        (zero, major, minor)
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::Io(a.out_dir.clone(), e))?;
    write(&a.out_dir.join("ft_at_zero.csv"), &render(&config, &zero))?;
    write(&a.out_dir.join("major_arcs.csv"), &render(&config, &major))?;
    write(&a.out_dir.join("minor_arcs.csv"), &render(&config, &minor))
}

struct SchurRow<'a> {
    kind: &'a str,
    report: &'a ThresholdReport,
    n_max: u64,
    restarts_below: Option<bool>,
    restarts_at: Option<bool>,
}

impl CsvRow for SchurRow<'_> {
    const HEADER: &'static [&'static str] = &[
        "kind",
        "k",
        "n_max",
        "result",
        "value",
        "certified_n",
        "indeterminate_at",
        "nodes",
        "restart_avoider_at_certified",
        "restart_avoider_at_value",
    ];

    fn fields(&self) -> Vec<String> {
        let (result, value) = match self.report.threshold {
            Threshold::Value(v) => ("exact", v),
            Threshold::LowerBound { avoids_up_to } => ("lower_bound", avoids_up_to),
        };
        let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        let flag = |x: Option<bool>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.kind.to_string(),
            self.report.k.to_string(),
            self.n_max.to_string(),
            result.to_string(),
            value.to_string(),
            opt(self.report.certified_n),
            opt(self.report.indeterminate_at),
            self.report.nodes.to_string(),
            flag(self.restarts_below),
            flag(self.restarts_at),
        ]
    }
}

fn schur_values(kind: SchurKind, n: u64) -> std::result::Result<Vec<u64>, Failure> {
    Ok(match kind {
        SchurKind::Integers => (1..=n).collect(),
        SchurKind::ShiftedPrimes => sieve_primes(n)?
            .primes()
            .iter()
            .map(|&p| p as u64 - 1)
            .collect(),
    })
}

fn schur(a: &SchurArgs) -> Outcome {
    let cfg = SearchConfig {
        budget: a.budget,
        order: match a.order {
            OrderArg::Ascending => ValueOrder::Ascending,
            OrderArg::Descending => ValueOrder::Descending,
        },
    };
    let report = match a.kind {
        SchurKind::Integers => schur_oracle(a.k, a.n_max, cfg)?,
        SchurKind::ShiftedPrimes => rp_threshold(a.k, a.n_max, cfg)?,
    };
    let restart = |n: u64| -> std::result::Result<bool, Failure> {
        let values = schur_values(a.kind, n)?;
        Ok(random_restarts(&values, a.k, a.restarts, a.restart_budget, a.seed)?.is_some())
    };
    let (mut below, mut at) = (None, None);
    if a.restarts > 0 {
        if let Some(n) = report.certified_n {
            below = Some(restart(n)?);
        }
        if let Threshold::Value(n) = report.threshold {
            at = Some(restart(n)?);
        }
    }
    let config = config_pairs("schur", a);
    let kind = match a.kind {
        SchurKind::Integers => "integers",
        SchurKind::ShiftedPrimes => "shifted-primes",
    };
    let row = SchurRow {
        kind,
        report: &report,
        n_max: a.n_max,
        restarts_below: below,
        restarts_at: at,
    };
    write(&a.out, &render(&config, &[row]))?;

    let colouring_path = a.colouring_out.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".colouring");
        PathBuf::from(p)
    });
    let mut text = comment_block(&config);
    match (report.certified_n, &report.avoider) {
        (Some(n), Some(colours)) => match a.kind {
            SchurKind::ShiftedPrimes => {
                text.push_str(&Colouring::new(n, a.k, colours.clone())?.to_text());
            }
            SchurKind::Integers => {
                text.push_str(&format!("k={} N={n}\n", a.k));
                for (x, c) in (1..=n).zip(colours) {
                    text.push_str(&format!("{x} {c}\n"));
                }
            }
        },
        _ => text.push_str("# no avoiding colouring was found\n"),
    }
    write(&colouring_path, &text)?;

    if let Some(n) = report.indeterminate_at {
        return Err(Failure::Budget(format!(
            "search budget exhausted at N = {n}; wrote the certified lower bound"
        )));
    }
    if below == Some(false) {
        return Err(Failure::Violation(
            "restarts found no avoider below the certified bound".into(),
        ));
    }
    if at == Some(true) {
        return Err(Failure::Violation(
            "restarts found an avoider at the forced value".into(),
        ));
    }
    Ok(())
}

fn bootstrap(a: &BootstrapArgs) -> Outcome {
    let c = Colouring::parse(&read(&a.colouring)?)?;
    let params = BootstrapParams {
        iteration: IterationParams {
            c: a.c,
            c1: a.c1,
            ..IterationParams::default()
        },
        dbar_schedule: a.dbar_schedule.clone(),
        full_length_refinement: !a.minimal_refinement,
    };
    let trace = bootstrap_run(&c, &params)?;
    let mut lines = vec![
        config_json("bootstrap", a),
        json!({ "run": {
            "n0": trace.n0,
            "k": trace.k,
            "guaranteed_alpha": trace.guaranteed_alpha,
            "log3_n0": trace.log3_n0,
        }}),
    ];
    lines.extend(trace.steps.iter().map(|s| json!({ "step": to_json(s) })));
    lines.push(json!({ "terminal": to_json(&trace.terminal) }));
    let checked = match &trace.terminal {
        BootstrapTerminal::Witness { witness } => witness
            .verify(&c)
            .map_err(|e| Failure::Violation(format!("witness failed to verify: {e}"))),
        BootstrapTerminal::Violation { message } => Err(Failure::Violation(message.clone())),
        BootstrapTerminal::Stalled { message } => Err(Failure::Other(message.clone())),
    };
    write(&a.out, &jsonl(&lines))?;
    checked
}

fn parse_set(path: &Path) -> std::result::Result<IntSet, Failure> {
    let text = read(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: i64 = t.parse().map_err(|_| LabError::Parse {
            line: i + 1,
            message: format!("`{t}` is not an integer"),
        })?;
        values.push(v);
    }
    Ok(values.into_iter().collect())
}

fn parse_progression(s: &str) -> std::result::Result<Progression, Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || LabError::Domain(format!("progression `{s}` is not start,step,length"));
    let [start, step, length] = parts[..] else {
        return Err(bad().into());
    };
    Ok(Progression::new(
        start.parse().map_err(|_| bad())?,
        step.parse().map_err(|_| bad())?,
        length.parse().map_err(|_| bad())?,
    )?)
}

fn increment(a: &IncrementArgs) -> Outcome {
    let ctx = ExceptionalContext::new(a.dbar, a.exceptional)?;
    let set = parse_set(&a.set)?;
    let params = IterationParams {
        c: a.c,
        c1: a.c1,
        q1: a.q1,
        min_len: a.min_len,
    };
    let limit = 2 * ctx.dbar() * a.d * a.n as u64 + 2;
    let table = sieve_primes(limit)?;
    let mut lines = vec![config_json("increment", a)];
    match iterate_to_primes(&set, a.n, a.d, ctx, &params, &table) {
        Ok(it) => {
            lines.extend(it.log.iter().map(|s| json!({ "step": to_json(s) })));
            lines.push(json!({ "result": {
                "a_prime": to_json(&it.a_prime),
                "progression": to_json(&it.progression),
                "steps": it.steps,
                "offset": it.offset,
                "scale": it.scale,
                "d_final": it.d_final,
            }}));
            write(&a.out, &jsonl(&lines))
        }
        Err(e) => {
            lines.push(json!({ "error": e.to_string() }));
            write(&a.out, &jsonl(&lines))?;
            Err(e.into())
        }
    }
}

struct TranslateRow {
    n: i64,
    size: usize,
    bound: f64,
}

impl CsvRow for TranslateRow {
    const HEADER: &'static [&'static str] = &["n", "size", "bound"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.size.to_string(),
            fmt_real(self.bound),
        ]
    }
}

fn translate(a: &TranslateArgs) -> Outcome {
    let x = parse_set(&a.x)?;
    let y = parse_set(&a.y)?;
    let xp = parse_progression(&a.x_prog)?;
    let yp = parse_progression(&a.y_prog)?;
    let t = best_translate(&x, &xp, &y, &yp)?;
    let row = TranslateRow {
        n: t.n,
        size: t.size,
        bound: t.bound,
    };
    write(&a.out, &render(&config_pairs("translate", a), &[row]))
}

fn colouring(a: &ColouringArgs) -> Outcome {
    let c = match a.scheme {
        Scheme::Residue => Colouring::by_residue(a.n0, a.k, a.modulus)?,
        Scheme::Random => Colouring::random(a.n0, a.k, a.seed)?,
    };
    let text = comment_block(&config_pairs("colouring", a)) + &c.to_text();
    write(&a.out, &text)
}
