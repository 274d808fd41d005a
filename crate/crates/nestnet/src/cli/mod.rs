//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when a verification fails or a command cannot complete, 2 on
//! usage errors. Rationals are written `p/q`; decimals are rejected for exact flags.

mod doc;
mod report;

pub use doc::{
    deserialize_net, from_document, serialize_net, to_document, ActEntry, ChainDoc, Encoding, LayerDoc, NetDocument,
    Number, FORMAT_VERSION,
};
pub use report::{read_csv, svg_from_csv, write_csv, ResultRow, CSV_HEADER};

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::constructive::{
    approximator_full, approximator_interior, bit_extract_net, floor_nested, point_fit_net, step_function_net,
    ConstructError, PNorm, TargetFunction,
};
use crate::ir::{IrError, NestNet};
use crate::numerics::{parse_rational, Backend, Q};
use crate::train::{
    build_experiment_nets, evaluate_accuracy, spiral_dataset, train, NetKind, SpiralConfig, TrainConfig, TrainError,
};
use crate::verify::{
    budget_for, check_floor_contract, check_param_bound, check_point_fit, exhaustive_bit_check, random_walk,
    scaling_study, BoundId, VerifyError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Failed(String),
    #[error("malformed network document: {0}")]
    Document(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Ir(#[from] IrError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Construct(ConstructError::InvalidParameter(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "nestnet", version, about = "Build, verify, measure and train nested ReLU networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build a network and write it as JSON.
    #[command(subcommand)]
    Construct(Construct),
    /// Check a construction against its oracle.
    #[command(subcommand)]
    Verify(Verify),
    /// Error-versus-size table for the full approximator.
    Scale(ScaleArgs),
    /// Standard versus nested classifier on the two-spiral data.
    TrainSpiral(TrainArgs),
    /// Re-encode a stored network, optionally expanded to height 1 or converted to f64.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct OutArg {
    /// Where to write the network document.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Construct {
    Step {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        delta: String,
        #[arg(long = "J")]
        j: u64,
        #[command(flatten)]
        out: OutArg,
    },
    Floor {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        out: OutArg,
    },
    Bits {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        s: u32,
        #[command(flatten)]
        out: OutArg,
    },
    Pointfit {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        s: u32,
        #[arg(long)]
        eps: String,
        /// Comma-separated `p/q` values; a seeded random walk of length n^(s+1) when absent.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    Approx {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        s: u32,
        /// `inf` or a positive integer.
        #[arg(long, default_value = "inf")]
        p: String,
        /// Build only the interior part with this band width.
        #[arg(long)]
        interior_delta: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand, Debug)]
enum Verify {
    Bits {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        s: u32,
    },
    Floor {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        delta: String,
    },
    Pointfit {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        s: u32,
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 1000)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Bounds {
        /// Network document to check.
        #[arg(long = "net")]
        net: PathBuf,
        /// One of step, floor_nested, bit_extract_base, bit_extract, indexed_bit_sum, point_fit,
        /// interior, full_p_finite, full_p_infty.
        #[arg(long)]
        bound: String,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        s: u32,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
}

#[derive(Args, Debug)]
struct ScaleArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    s: u32,
    #[arg(long, default_value = "inf")]
    p: String,
    #[arg(long)]
    target: String,
    /// Comma-separated ascending list.
    #[arg(long)]
    n: String,
    #[arg(long, default_value_t = 2001)]
    points: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    width: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Training samples (split evenly between the classes).
    #[arg(long, default_value_t = 10_000)]
    train_samples: usize,
    #[arg(long, default_value_t = 2_000)]
    test_samples: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    expand: bool,
    #[arg(long)]
    float: bool,
}

fn rational(flag: &str, text: &str) -> Result<Q, CliError> {
    parse_rational(text).map_err(|_| CliError::Usage(format!("--{flag}: expected p/q, got {text:?}")))
}

fn pnorm(text: &str) -> Result<PNorm, CliError> {
    match text {
        "inf" => Ok(PNorm::Infinity),
        t => match t.parse::<u32>() {
            Ok(p) if p >= 1 => Ok(PNorm::Finite(p)),
            _ => Err(CliError::Usage(format!("--p: expected inf or a positive integer, got {t:?}"))),
        },
    }
}

/// `abs-shift:c`, `hinge2` or `const:c`.
pub fn parse_target(text: &str, d: usize) -> Result<TargetFunction, CliError> {
    let (name, arg) = text.split_once(':').unwrap_or((text, ""));
    let t = match (name, d) {
        ("abs-shift", 1) => TargetFunction::abs_shift(rational("target", arg)?),
        ("hinge2", 2) => TargetFunction::hinge2(),
        ("const", d) if d >= 1 => TargetFunction::constant(d, rational("target", arg)?),
        ("abs-shift" | "hinge2", _) => {
            return Err(CliError::Usage(format!("target {name} does not take --d {d}")));
        }
        _ => return Err(CliError::Usage(format!("unknown target {text:?}"))),
    };
    Ok(t)
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn read_file(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn emit_net(net: &NestNet, out: &OutArg, bound: Option<(BoundId, u128)>, w: &mut dyn Write) -> Result<(), CliError> {
    let count = net.param_count()?;
    let _ = writeln!(w, "param_count {count}");
    let _ = writeln!(w, "height {} depth {} width {}", net.height()?, net.depth(), net.width());
    if let Some((id, b)) = bound {
        let _ = writeln!(w, "bound {id} {b} {}", if count as u128 <= b { "ok" } else { "EXCEEDED" });
    }
    if let Some(path) = &out.out {
        write_file(path, &serialize_net(net)?)?;
        let _ = writeln!(w, "wrote {}", path.display());
    }
    match bound {
        Some((id, b)) if count as u128 > b => Err(CliError::Failed(format!("{id}: {count} > {b}"))),
        _ => Ok(()),
    }
}

fn construct(c: Construct, w: &mut dyn Write) -> Result<(), CliError> {
    match c {
        Construct::Step { n, r, delta, j, out } => {
            let net = step_function_net(n, r, &rational("delta", &delta)?, j)?;
            emit_net(&net, &out, Some((BoundId::Step, budget_for(BoundId::Step, n, r, 1))), w)
        }
        Construct::Floor { n, r, delta, out } => {
            let net = floor_nested(n, r, &rational("delta", &delta)?)?;
            emit_net(&net, &out, Some((BoundId::FloorNested, budget_for(BoundId::FloorNested, n, r, 1))), w)
        }
        Construct::Bits { n, s, out } => {
            let net = bit_extract_net(n, s)?;
            emit_net(&net, &out, Some((BoundId::BitExtract, budget_for(BoundId::BitExtract, n, s, 1))), w)
        }
        Construct::Pointfit { n, s, eps, values, seed, out } => {
            let eps = rational("eps", &eps)?;
            let y = match values {
                Some(v) => v.split(',').map(|t| rational("values", t)).collect::<Result<Vec<_>, _>>()?,
                None => random_walk((n as usize).pow(s + 1), &eps, seed),
            };
            let net = point_fit_net(&y, &eps, n, s)?;
            emit_net(&net, &out, Some((BoundId::PointFit, budget_for(BoundId::PointFit, n, s, 1))), w)
        }
        Construct::Approx { target, d, n, s, p, interior_delta, out } => {
            let f = parse_target(&target, d)?;
            let p = pnorm(&p)?;
            let (a, id) = match interior_delta {
                Some(delta) => {
                    (approximator_interior(&f, n, s, &rational("interior-delta", &delta)?)?, BoundId::Interior)
                }
                None => {
                    let id = if p == PNorm::Infinity { BoundId::FullPInfty } else { BoundId::FullPFinite };
                    (approximator_full(&f, n, s, p)?, id)
                }
            };
            let _ = writeln!(w, "K {} delta {}", a.k, a.delta);
            emit_net(&a.net, &out, Some((id, budget_for(id, n, s, d))), w)
        }
    }
}

fn verify(v: Verify, w: &mut dyn Write) -> Result<(), CliError> {
    match v {
        Verify::Bits { n, s } => {
            let r = exhaustive_bit_check(n, s)?;
            let _ = writeln!(w, "{r}");
            let bound = budget_for(BoundId::BitExtract, n, s, 1);
            let _ = writeln!(w, "params {} <= {}", r.param_count, bound);
            if !r.passed() || r.param_count as u128 > bound {
                return Err(CliError::Failed(format!("bit extraction n={n} s={s}")));
            }
            Ok(())
        }
        Verify::Floor { n, r, delta } => {
            let rep = check_floor_contract(n, r, &rational("delta", &delta)?)?;
            let _ = writeln!(w, "{rep}");
            if rep.passed() {
                Ok(())
            } else {
                Err(CliError::Failed(format!("floor n={n} r={r}")))
            }
        }
        Verify::Pointfit { n, s, eps, trials, probes, seed } => {
            let eps = rational("eps", &eps)?;
            let len = (n as usize).pow(s + 1);
            let mut failed = 0;
            for t in 0..trials {
                let y = random_walk(len, &eps, seed.wrapping_add(t));
                let rep = check_point_fit(&y, &eps, n, s, probes, seed.wrapping_add(t))?;
                let _ = writeln!(w, "trial {t}: {rep}");
                failed += (!rep.passed()) as u64;
            }
            let _ = writeln!(w, "{}/{} trials passed", trials - failed, trials);
            if failed > 0 {
                return Err(CliError::Failed(format!("{failed} point-fit trials")));
            }
            Ok(())
        }
        Verify::Bounds { net, bound, n, s, d } => {
            let net = deserialize_net(&read_file(&net)?)?;
            let c = check_param_bound(&net, &bound, n, s, d).map_err(|e| match e {
                VerifyError::UnknownBound(b) => CliError::Usage(format!("unknown bound id {b:?}")),
                e => e.into(),
            })?;
            let _ = writeln!(w, "{c}");
            if c.pass {
                Ok(())
            } else {
                Err(CliError::Failed(c.to_string()))
            }
        }
    }
}

fn parse_n_list(text: &str) -> Result<Vec<u32>, CliError> {
    text.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|_| CliError::Usage(format!("--n: bad entry {t:?}"))))
        .collect()
}

fn scale(a: ScaleArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let f = parse_target(&a.target, a.d)?;
    let p = pnorm(&a.p)?;
    let ns = parse_n_list(&a.n)?;
    let study = scaling_study(&f, a.s, p, &ns, a.points).map_err(|e| match e {
        VerifyError::BadNList => CliError::Usage("--n must be nonempty and strictly ascending".into()),
        e => e.into(),
    })?;
    let rows: Vec<ResultRow> = study
        .rows
        .iter()
        .map(|r| ResultRow {
            experiment: format!("scale-{}-p{}", f.name(), p),
            n: Some(r.n),
            s: Some(a.s),
            d: Some(a.d),
            k: Some(r.k),
            delta: Some(r.delta.to_string()),
            params: Some(r.params),
            bound: r.bound.to_f64(),
            sup_err: Some(r.sup_error),
            l1_err: r.report.lp(PNorm::Finite(1)),
            l2_err: r.report.lp(PNorm::Finite(2)),
            seed: None,
            wall_ms: Some(r.wall_ms),
        })
        .collect();
    let csv = write_csv(&rows)?;
    let _ = write!(w, "{csv}");
    if let Some(slope) = study.slope {
        let _ = writeln!(w, "log-log slope {slope:.4}");
    }
    if let Some(path) = &a.csv {
        write_file(path, csv.as_bytes())?;
    }
    if let Some(path) = &a.svg {
        write_file(path, svg_from_csv(&csv)?.as_bytes())?;
    }
    if !study.all_within_bound() {
        return Err(CliError::Failed("a measured error exceeds its bound".into()));
    }
    Ok(())
}

fn train_spiral(a: TrainArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let train_cfg = SpiralConfig { samples_per_class: a.train_samples / 2, seed: a.seed, ..Default::default() };
    let test_cfg = SpiralConfig { samples_per_class: a.test_samples / 2, seed: a.seed ^ 0x5eed, ..Default::default() };
    let raw_train = spiral_dataset(&train_cfg)?;
    let raw_test = spiral_dataset(&test_cfg)?;
    let (mean, std) = raw_train.moments();
    let train_set = raw_train.standardized_with(&mean, &std);
    let test_set = raw_test.standardized_with(&mean, &std);
    let cfg = TrainConfig { epochs: a.epochs, batch_size: a.batch, seed: a.seed, ..Default::default() };
    let mut rows = Vec::new();
    for kind in [NetKind::Standard, NetKind::Nested] {
        let start = Instant::now();
        let mut net = build_experiment_nets(a.width, a.depth, kind, a.seed)?;
        let history = train(&mut net, &train_set, &test_set, &cfg)?;
        let acc = match history.last() {
            Some(h) => h.test_accuracy,
            None => evaluate_accuracy(&net, &test_set)?,
        };
        let name = match kind {
            NetKind::Standard => "standard",
            NetKind::Nested => "nested",
        };
        let _ = writeln!(w, "{name}: params {} test accuracy {acc:.4}", net.param_count());
        for h in &history {
            let _ = writeln!(w, "  epoch {} loss {:.5} acc {:.4}", h.epoch, h.train_loss, h.test_accuracy);
        }
        rows.push(ResultRow {
            experiment: format!("spiral-{name}-w{}", a.width),
            params: Some(net.param_count()),
            sup_err: Some(1.0 - acc),
            seed: Some(a.seed),
            wall_ms: Some(start.elapsed().as_millis()),
            ..Default::default()
        });
    }
    if let Some(path) = &a.csv {
        write_file(path, write_csv(&rows)?.as_bytes())?;
    }
    Ok(())
}

fn export(a: ExportArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let mut net = deserialize_net(&read_file(&a.input)?)?;
    if a.expand {
        net = net.expand()?;
    }
    if a.float {
        net = net.to_backend(Backend::Float)?;
    }
    write_file(&a.out, &serialize_net(&net)?)?;
    let _ = writeln!(w, "param_count {} height {}", net.param_count()?, net.height()?);
    Ok(())
}

/// Run with explicit output streams; returns the exit status.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Construct(c) => construct(c, out),
        Cmd::Verify(v) => verify(v, out),
        Cmd::Scale(a) => scale(a, out),
        Cmd::TrainSpiral(a) => train_spiral(a, out),
        Cmd::Export(a) => export(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
