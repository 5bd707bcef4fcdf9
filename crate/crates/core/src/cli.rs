//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when a verification fails or cannot be
//! certified, 2 for malformed input, 3 when a computation exceeds its
//! budget. Every failure writes a line starting with `FAIL:` to stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::error_lab::{check_holder, verify_many, write_reports, BoundConfig, Case};
use crate::functions::{parse_function, parse_manifest, test_suite, FunctionHandle, Integrand};
use crate::lemmas::{lemma_suite, write_summaries};
use crate::merit::{
    merit_new, search_random, subset_label, wafom_brute_force, wafom_fast, write_trace, MeritConfig, MeritRoute,
    SubsetWeights,
};
use crate::net::{generate_points, DualEnumerator, GeneratorSet, DEFAULT_DUAL_BUDGET};
use crate::weights::Order;

#[derive(Parser, Debug)]
#[command(name = "walsh-merit", version, about = "Walsh-coefficient error bounds for base-2 digital nets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the points of a net as CSV.
    Points {
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the dual net with every k_i < 2^cap.
    Dual {
        matrix: PathBuf,
        /// Truncation level (default: n).
        #[arg(long)]
        cap: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_DUAL_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncated merit with a certified tail bound.
    Merit {
        matrix: PathBuf,
        #[command(flatten)]
        merit: MeritArgs,
        /// Per-subset sums as CSV.
        #[arg(long)]
        subsets: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// WAFOM by the product formula, optionally against the dual sum.
    Wafom {
        matrix: PathBuf,
        #[arg(long)]
        brute: bool,
        #[arg(long, default_value_t = DEFAULT_DUAL_BUDGET)]
        budget: u64,
    },
    /// Check the error bound for functions on a net.
    Verify {
        matrix: PathBuf,
        #[command(flatten)]
        merit: MeritArgs,
        #[arg(long, value_parser = parse_real, default_value = "inf")]
        p: f64,
        /// Conjugate of q (default: derived from q).
        #[arg(long = "qprime", value_parser = parse_real)]
        q_prime: Option<f64>,
        /// Function spec; repeatable.
        #[arg(long = "fn")]
        functions: Vec<String>,
        /// File of function specs, one per line.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random search for a net of small merit.
    Search {
        #[arg(long)]
        s: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[command(flatten)]
        merit: MeritArgs,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Trace CSV, one row per trial.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Matrix file for the best net.
        #[arg(long)]
        best: Option<PathBuf>,
    },
    /// Kernel properties and coefficient identities.
    Lemmas {
        #[arg(long = "max-k", default_value_t = 256)]
        max_k: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct MeritArgs {
    #[arg(long, value_parser = parse_alpha, default_value = "2")]
    pub alpha: Order,
    /// `uniform`, `product:g1,g2,...` or `file:<path>`.
    #[arg(long, default_value = "uniform")]
    pub gamma: String,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub q: f64,
    /// Truncation level L (default: n + 8).
    #[arg(long)]
    pub cap: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_DUAL_BUDGET)]
    pub budget: u64,
    #[arg(long, value_parser = parse_route, default_value = "auto")]
    pub route: MeritRoute,
}

impl MeritArgs {
    fn config(&self, n: usize) -> Result<MeritConfig> {
        let mut cfg = MeritConfig::new(self.alpha, self.cap.unwrap_or(n as u32 + 8));
        cfg.gamma = SubsetWeights::parse_spec(&self.gamma)?;
        cfg.q = self.q;
        cfg.budget = self.budget;
        cfg.route = self.route;
        Ok(cfg)
    }
}

/// A real number in `[1, ∞]`; `inf` for infinity.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v = match s.trim() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        t => t.parse::<f64>().map_err(|e| e.to_string())?,
    };
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("{s} is not in [1, inf]"))
    }
}

/// A smoothness order `α ≥ 2` or `inf`.
pub fn parse_alpha(s: &str) -> std::result::Result<Order, String> {
    s.parse::<Order>()
        .and_then(Order::require_smoothness)
        .map_err(|e| e.to_string())
}

fn parse_route(s: &str) -> std::result::Result<MeritRoute, String> {
    match s {
        "auto" => Ok(MeritRoute::Auto),
        "enumerate" => Ok(MeritRoute::Enumerate),
        "charsum" => Ok(MeritRoute::CharacterSum),
        _ => Err(format!("unknown route {s:?} (auto, enumerate, charsum)")),
    }
}

/// The conjugate exponent `q/(q-1)`.
pub fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Pass,
    Failed(Vec<String>),
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } => 3,
        Error::Divergence { .. } | Error::Uncertified { .. } => 1,
        _ => 2,
    }
}

/// Runs the command line `args` (program name first), returning the exit
/// status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = writeln!(stderr, "FAIL: {}", e.kind());
                let _ = write!(stderr, "{e}");
            }
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Failed(lines)) => {
            for l in lines {
                let _ = writeln!(stderr, "{l}");
            }
            1
        }
        Err(e) => {
            let _ = writeln!(stderr, "FAIL: {e}");
            exit_code(&e)
        }
    }
}

fn with_output<F>(path: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<Outcome> {
    match cmd {
        Command::Points { matrix, out } => {
            let g = GeneratorSet::read(&matrix)?;
            let csv = generate_points(&g).to_csv();
            with_output(out.as_deref(), stdout, |w| Ok(w.write_all(csv.as_bytes())?))?;
            Ok(Outcome::Pass)
        }
        Command::Dual { matrix, cap, budget, out } => {
            let g = GeneratorSet::read(&matrix)?;
            let e = DualEnumerator::new(&g, cap.unwrap_or(g.n() as u32), budget)?;
            with_output(out.as_deref(), stdout, |w| {
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record((1..=g.s()).map(|i| format!("k{i}")))?;
                for k in e.iter() {
                    csv.write_record(k.values().iter().map(u64::to_string))?;
                }
                csv.flush()?;
                Ok(())
            })?;
            Ok(Outcome::Pass)
        }
        Command::Merit {
            matrix,
            merit,
            subsets,
            out,
        } => {
            let g = GeneratorSet::read(&matrix)?;
            let cfg = merit.config(g.n())?;
            let v = merit_new(&g, &cfg)?;
            with_output(out.as_deref(), stdout, |w| {
                writeln!(w, "truncated,tail_bound,upper")?;
                writeln!(w, "{},{},{}", v.truncated, v.tail_bound, v.upper())?;
                Ok(())
            })?;
            if let Some(path) = subsets {
                let mut csv = csv::Writer::from_path(path)?;
                csv.write_record(["subset", "gamma", "sum"])?;
                for (mask, sum) in &v.per_subset {
                    let gamma = cfg.gamma.gamma(*mask, g.s())?;
                    csv.write_record([subset_label(*mask), gamma.to_string(), sum.to_string()])?;
                }
                csv.flush()?;
            }
            Ok(Outcome::Pass)
        }
        Command::Wafom { matrix, brute, budget } => {
            let g = GeneratorSet::read(&matrix)?;
            let fast = wafom_fast(&g);
            if brute {
                let slow = wafom_brute_force(&g, budget)?;
                writeln!(stdout, "wafom,dual_sum,diff")?;
                writeln!(stdout, "{fast},{slow},{}", (fast - slow).abs())?;
                if (fast - slow).abs() > 1e-12 {
                    return Ok(Outcome::Failed(vec![format!(
                        "FAIL: wafom {fast} differs from dual sum {slow}"
                    )]));
                }
            } else {
                writeln!(stdout, "wafom")?;
                writeln!(stdout, "{fast}")?;
            }
            Ok(Outcome::Pass)
        }
        Command::Verify {
            matrix,
            merit,
            p,
            q_prime,
            functions,
            manifest,
            jobs,
            out,
        } => {
            let g = GeneratorSet::read(&matrix)?;
            let q_prime = q_prime.unwrap_or_else(|| conjugate(merit.q));
            check_holder(merit.q, q_prime)?;
            let mc = merit.config(g.n())?;
            let cfg = BoundConfig::new(merit.alpha, p, merit.q, q_prime, mc.cap_level)?
                .with_gamma(mc.gamma.clone(), merit.gamma.clone());
            let named = collect_functions(&functions, manifest.as_deref(), g.s())?;
            let net_id = matrix.file_name().map_or_else(|| "net".into(), |n| n.to_string_lossy().into_owned());
            let cases: Vec<Case> = named
                .iter()
                .map(|f| Case {
                    function: f.as_ref(),
                    net: &g,
                    net_id: net_id.clone(),
                    config: &cfg,
                })
                .collect();
            let reports = verify_many(&cases, jobs)?;
            with_output(out.as_deref(), stdout, |w| write_reports(&reports, w))?;
            let fails: Vec<String> = reports
                .iter()
                .filter(|r| !r.pass)
                .map(|r| {
                    format!(
                        "FAIL: {} on {}: |err| = {} exceeds bound {} (alpha={} p={} q={})",
                        r.function,
                        r.net,
                        r.err.abs(),
                        r.bound,
                        r.alpha,
                        r.p,
                        r.q
                    )
                })
                .collect();
            Ok(if fails.is_empty() { Outcome::Pass } else { Outcome::Failed(fails) })
        }
        Command::Search {
            s,
            n,
            m,
            merit,
            trials,
            seed,
            jobs,
            out,
            best,
        } => {
            let cfg = merit.config(n)?;
            let r = search_random(s, n, m, &cfg, trials, seed, jobs)?;
            with_output(out.as_deref(), stdout, |w| write_trace(&r.trace, w))?;
            if let Some(path) = best {
                r.best.write(&path)?;
            }
            Ok(Outcome::Pass)
        }
        Command::Lemmas { max_k, jobs, out } => {
            if max_k < 2 {
                return Err(Error::InvalidParameter("--max-k must be at least 2".into()));
            }
            let rows = lemma_suite(max_k, jobs)?;
            // timings are left out so output is reproducible
            let rows: Vec<_> = rows
                .into_iter()
                .map(|mut r| {
                    r.seconds = 0.0;
                    r
                })
                .collect();
            with_output(out.as_deref(), stdout, |w| write_summaries(&rows, w))?;
            let fails: Vec<String> = rows.iter().filter_map(|r| r.fail_line()).collect();
            Ok(if fails.is_empty() { Outcome::Pass } else { Outcome::Failed(fails) })
        }
    }
}

/// Functions from `--fn` and `--manifest`, or the built-in suite when
/// neither is given. Product functions with fewer variables than the net are
/// extended by constant factors.
fn collect_functions(specs: &[String], manifest: Option<&Path>, s: usize) -> Result<Vec<FunctionHandle>> {
    let mut out: Vec<FunctionHandle> = Vec::new();
    for spec in specs {
        out.push(parse_function(spec)?);
    }
    if let Some(path) = manifest {
        let text = std::fs::read_to_string(path)?;
        out.extend(parse_manifest(&text)?.into_iter().map(|n| n.function));
    }
    if specs.is_empty() && manifest.is_none() {
        out.extend(
            test_suite()
                .into_iter()
                .filter(|(_, f)| f.dim() <= s)
                .map(|(_, f)| std::sync::Arc::new(f) as FunctionHandle),
        );
    }
    out.into_iter().map(|f| pad(f, s)).collect()
}

fn pad(f: FunctionHandle, s: usize) -> Result<FunctionHandle> {
    if f.dim() == s {
        return Ok(f);
    }
    match f.as_product() {
        Some(p) if p.dim() < s => Ok(std::sync::Arc::new(p.padded(s)?)),
        _ => Err(Error::DimensionMismatch {
            expected: s,
            got: f.dim(),
        }),
    }
}
