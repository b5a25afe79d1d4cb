//! `curious`: command-line driver for the curious-squares pipeline.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use curious_squares::certificate::{build_certificate, verify_certificate, Strategy, TheoremCertificate};
use curious_squares::mordell::{
    bounded_point_search, curve_for, filter_l, prove_family_via_curves, verify_appendix, Appendix, CurveProof,
    DEFAULT_X_MAX,
};
use curious_squares::prover::{prove_family_with, ModularOutcome, SearchCaps};
use curious_squares::sieve::{
    candidate_set, candidates_from_intersection, residue_intersection, MAX_EXPONENT, MIN_CANDIDATE_EXPONENT,
};
use curious_squares::{enumerate_curious, FamilyKey};
use serde_json::json;

#[derive(Parser)]
#[command(name = "curious", version, about = "Find and certify the curious numbers a…ab…ba…a that are perfect squares")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Modular,
    Elliptic,
    Both,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Modular => Strategy::Modular,
            StrategyArg::Elliptic => Strategy::Elliptic,
            StrategyArg::Both => Strategy::Both,
        }
    }
}

#[derive(clap::Args)]
struct FamilyArgs {
    /// Outer digit (1-9).
    #[arg(long)]
    a: u8,
    /// Inner digit (0-9).
    #[arg(long)]
    b: u8,
    /// Length of each outer run (≥ 1).
    #[arg(long)]
    m: u32,
}

impl FamilyArgs {
    fn key(&self) -> Result<FamilyKey> {
        FamilyKey::new(self.a, self.b, self.m).map_err(|e| usage(e.to_string()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// List every curious number with at most D digits.
    Enumerate {
        #[arg(long, default_value_t = 19)]
        max_digits: u32,
    },
    /// Print the residue intersection and the candidate set modulo 10^k.
    Sieve {
        #[arg(long, default_value_t = 7)]
        k: u32,
    },
    /// Prove a single family square-free (or report why not).
    ProveFamily {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum, default_value_t = StrategyArg::Both)]
        strategy: StrategyArg,
        /// Largest modulus tried by the witness search.
        #[arg(long, default_value_t = SearchCaps::default().max_modulus)]
        max_modulus: u64,
        /// Largest period accepted by the witness search.
        #[arg(long, default_value_t = SearchCaps::default().max_period)]
        max_period: u64,
    },
    /// Show the curve of one family and index j, its integral points up to x_max and their L-forms.
    Curves {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
        j: u8,
        #[arg(long, default_value_t = DEFAULT_X_MAX)]
        x_max: i64,
    },
    /// Check the integral-point data file.
    VerifyAppendix {
        /// Data file (default: $CURIOUS_APPENDIX_PATH, else the bundled table).
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_X_MAX)]
        x_max: i64,
    },
    /// Run the whole proof and print the curious squares.
    Theorem {
        #[arg(long, default_value_t = 7)]
        k: u32,
        #[arg(long, value_enum, default_value_t = StrategyArg::Both)]
        strategy: StrategyArg,
        /// Write the certificate to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a certificate file.
    VerifyCert {
        #[arg(long)]
        file: PathBuf,
    },
}

/// A flag value rejected before any computation.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn check_k(k: u32) -> Result<()> {
    if k < MIN_CANDIDATE_EXPONENT {
        return Err(usage(format!("k ≥ {MIN_CANDIDATE_EXPONENT} required (got k = {k})")));
    }
    if k > MAX_EXPONENT {
        return Err(usage(format!("k ≤ {MAX_EXPONENT} required (got k = {k})")));
    }
    Ok(())
}

fn check_x_max(x_max: i64) -> Result<()> {
    if x_max < 0 {
        return Err(usage(format!("--x-max must be non-negative (got {x_max})")));
    }
    Ok(())
}

fn appendix(file: Option<&PathBuf>) -> Result<Appendix> {
    Ok(match file {
        Some(path) => Appendix::load(path)?,
        None => Appendix::from_env()?,
    })
}

fn json_text(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn describe(f: &FamilyKey) -> String {
    format!("{f} (a={}, b={}, m={})", f.a(), f.b(), f.m())
}

fn curve_text(proof: &CurveProof) -> String {
    let mut s = String::new();
    for row in &proof.rows {
        let _ = writeln!(s, "  j = {}: y² = x³ + {}, {} listed point(s)", row.j, row.constant, row.points.len());
        for l in filter_l(&proof.family, row.j, &row.points) {
            let _ = writeln!(s, "    L-form point k = {} → n = {}", l.k, l.index(row.j));
        }
    }
    match proof.squares.is_empty() {
        true => s.push_str("  no squares (Q = ∅)\n"),
        false => {
            let _ = writeln!(s, "  squares at n = {}", join(proof.squares.iter().map(|q| q.n)));
        }
    }
    s
}

/// Returns the text to print and whether the command succeeded.
fn run(cli: &Cli) -> Result<(String, bool)> {
    let structured = cli.format == Format::Structured;
    match &cli.command {
        Command::Enumerate { max_digits } => {
            if *max_digits == 0 {
                return Err(usage("--max-digits must be at least 1"));
            }
            let all = enumerate_curious(*max_digits)?;
            let out = if structured {
                let items: Vec<_> = all
                    .iter()
                    .map(|(p, v)| json!({"a": p.a(), "b": p.b(), "m": p.m(), "n": p.n(), "value": v.to_string()}))
                    .collect();
                json_text(&items.into())
            } else {
                all.iter().map(|(_, v)| format!("{v}\n")).collect()
            };
            Ok((out, true))
        }
        Command::Sieve { k } => {
            check_k(*k)?;
            let intersection = residue_intersection(*k)?;
            let candidates = candidates_from_intersection(&intersection)?;
            let out = if structured {
                json_text(&json!({"exponent": k, "intersection": intersection.to_vec(), "candidates": candidates}))
            } else {
                let mut s = format!(
                    "k = {k}\nintersection ({} residues):\n{}\n",
                    intersection.len(),
                    join(intersection.iter())
                );
                let _ = writeln!(s, "sporadic squares: {}", join(&candidates.sporadic_squares));
                let _ = writeln!(s, "families ({}):", candidates.families.len());
                for f in &candidates.families {
                    let _ = writeln!(s, "  {}", describe(f));
                }
                s
            };
            Ok((out, true))
        }
        Command::ProveFamily { family, strategy, max_modulus, max_period } => {
            let f = family.key()?;
            let strategy = Strategy::from(*strategy);
            let caps = SearchCaps { max_modulus: *max_modulus, max_period: *max_period };
            let data = match strategy.uses_elliptic() {
                true => Some(appendix(None)?),
                false => None,
            };
            let modular = strategy.uses_modular().then(|| prove_family_with(&f, caps));
            let elliptic = data.as_ref().map(|d| match d.rows_for(&f) {
                Some(rows) => prove_family_via_curves(&f, &rows).map_err(|e| e.to_string()),
                None => Err(format!("no integral-point rows for {f}")),
            });
            let ok = !matches!(modular, Some(ModularOutcome::Unproven(_))) && !matches!(elliptic, Some(Err(_)));
            let out = if structured {
                let modular = modular.as_ref().map(|m| match m {
                    ModularOutcome::Proven(w) => json!({"witness": w}),
                    ModularOutcome::Unproven(r) => json!({"failure": r}),
                });
                let elliptic = elliptic.as_ref().map(|e| match e {
                    Ok(p) => json!({"proof": p}),
                    Err(msg) => json!({"failure": msg}),
                });
                json_text(
                    &json!({"family": f, "strategy": strategy, "proved": ok, "modular": modular, "elliptic": elliptic}),
                )
            } else {
                let mut s = format!("family {}\n", describe(&f));
                match &modular {
                    Some(ModularOutcome::Proven(w)) => {
                        let _ = writeln!(s, "modular ({}): {w}", w.kind());
                    }
                    Some(ModularOutcome::Unproven(r)) => {
                        let _ = writeln!(
                            s,
                            "modular: no witness with q ≤ {} and period ≤ {}",
                            r.caps.max_modulus, r.caps.max_period
                        );
                        if !r.squares.is_empty() {
                            let _ = writeln!(
                                s,
                                "  squares among the first members: {}",
                                join(r.squares.iter().map(|q| format!("n={} ({}²)", q.n, q.root)))
                            );
                        }
                    }
                    None => {}
                }
                match &elliptic {
                    Some(Ok(p)) => {
                        s.push_str("elliptic:\n");
                        s.push_str(&curve_text(p));
                    }
                    Some(Err(msg)) => {
                        let _ = writeln!(s, "elliptic: {msg}");
                    }
                    None => {}
                }
                let _ = writeln!(s, "{}", if ok { "proved" } else { "not proved" });
                s
            };
            Ok((out, ok))
        }
        Command::Curves { family, j, x_max } => {
            let f = family.key()?;
            check_x_max(*x_max)?;
            let curve = curve_for(&f, *j)?;
            let points = bounded_point_search(&curve, *x_max);
            let lform = filter_l(&f, *j, &points);
            let out = if structured {
                let l: Vec<_> =
                    lform.iter().map(|p| json!({"k": p.k, "n": p.index(*j), "point": p.to_point(&f, *j)})).collect();
                json_text(&json!({
                    "family": f,
                    "j": j,
                    "constant": curve.constant().to_string(),
                    "discriminant": curve.discriminant().to_string(),
                    "x_max": x_max,
                    "points": points,
                    "l_form": l,
                }))
            } else {
                let mut s = format!("family {}, j = {j}\ncurve: y² = x³ + {}\n", describe(&f), curve.constant());
                let _ = writeln!(s, "discriminant: {}", curve.discriminant());
                let _ = writeln!(s, "integral points with x ≤ {x_max} (y ≥ 0): {}", points.len());
                for p in &points {
                    let _ = writeln!(s, "  ({}, {})", p.x, p.y);
                }
                let _ = writeln!(s, "L-form points: {}", lform.len());
                for l in &lform {
                    let p = l.to_point(&f, *j);
                    let _ = writeln!(s, "  ({}, {}) → n = {}, value = {}²", p.x, p.y, l.index(*j), l.root);
                }
                s
            };
            Ok((out, true))
        }
        Command::VerifyAppendix { file, x_max } => {
            check_x_max(*x_max)?;
            let data = appendix(file.as_ref())?;
            let families = candidate_set(7)?.families;
            let report = verify_appendix(&data.rows, &families, *x_max);
            let out = if structured {
                json_text(&serde_json::to_value(&report).expect("serializable"))
            } else {
                let mut s = format!(
                    "rows: {}\nx_max: {}\nlargest tabulated x: {}\n",
                    report.rows, report.x_max, report.max_tabulated_x
                );
                for r in &report.searches {
                    let _ = writeln!(s, "  {} j={}: {} listed, {} found", r.family, r.j, r.tabulated, r.found);
                }
                for fail in &report.failures {
                    let row = fail.row.map(|(f, j)| format!(" ({f}, j={j})")).unwrap_or_default();
                    let _ = writeln!(s, "FAIL {:?}{row}: {}", fail.check, fail.detail);
                }
                let _ = writeln!(s, "{}", if report.passed() { "all checks passed" } else { "verification failed" });
                s
            };
            Ok((out, report.passed()))
        }
        Command::Theorem { k, strategy, out } => {
            check_k(*k)?;
            let strategy = Strategy::from(*strategy);
            let data = match strategy.uses_elliptic() {
                true => Some(appendix(None)?),
                false => None,
            };
            let cert = build_certificate(*k, strategy, data.as_ref())?;
            if let Some(path) = out {
                std::fs::write(path, cert.to_text()).with_context(|| format!("writing {}", path.display()))?;
                log::info!("certificate written to {}", path.display());
            }
            let text = match (structured, out) {
                (true, None) => cert.to_text(),
                _ => format!("{}\n", join(&cert.conclusion)),
            };
            Ok((text, true))
        }
        Command::VerifyCert { file } => {
            let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let cert = TheoremCertificate::from_text(&text).map_err(|e| anyhow!("malformed certificate: {e}"))?;
            let data = match cert.strategy.uses_elliptic() {
                true => Some(appendix(None)?),
                false => None,
            };
            let result = verify_certificate(&cert, data.as_ref());
            let out = match (&result, structured) {
                (Ok(()), true) => json_text(&json!({"verified": true, "conclusion": join(&cert.conclusion)})),
                (Err(e), true) => json_text(&json!({"verified": false, "error": e.to_string()})),
                (Ok(()), false) => format!("certificate verified\n{}\n", join(&cert.conclusion)),
                (Err(e), false) => format!("certificate rejected: {e}\n"),
            };
            Ok((out, result.is_ok()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok((out, ok)) => {
            print!("{out}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
