//! Command-line front end: builds the connection-set families, runs the
//! verification pipelines, emits certificates, and exports graph instances.
//!
//! Exit codes: 0 for a passing check, 1 for a failing check, 2 when a
//! pipeline is inconclusive by design, 64 for usage errors.

use cayley_ci::certificate::{self, Payload, RunCertificate};
use cayley_ci::cioracle::{self, OracleError};
use cayley_ci::export::{self, ExportError, GraphFormat};
use cayley_ci::families::{build_family, undirected_closure, Family};
use cayley_ci::isomap::{self, Budget};
use cayley_ci::polyring;
use cayley_ci::refuter::{self, RefuterError};
use chrono::{SecondsFormat, Utc};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::fmt;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "cayley-ci", version, about = "Cayley graph CI-property verification toolkit")]
struct Cli {
    /// Worker threads for the parallel loops (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the polynomial identities behind the constructions.
    Lemmas {
        #[arg(long)]
        p: u64,
        /// Write the certificate here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write S.json, T.json and phi.json for one family.
    Build {
        #[arg(long)]
        family: String,
        #[arg(long)]
        p: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify that the polynomial map is a graph isomorphism.
    VerifyIso {
        #[arg(long)]
        family: String,
        #[arg(long)]
        p: u64,
        /// symbolic, pointwise, or both.
        #[arg(long, default_value = "both")]
        mode: String,
        /// Base-point sample size when exhaustive enumeration is too large.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Seed for the sampled verifier.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the linear-nonequivalence refutation pipeline.
    Refute {
        #[arg(long)]
        family: String,
        #[arg(long)]
        p: u64,
        /// directed or undirected.
        #[arg(long, default_value = "directed")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a graph instance in a standard format.
    Export {
        #[arg(long)]
        family: String,
        #[arg(long)]
        p: u64,
        /// S, T, Sbar or Tbar.
        #[arg(long)]
        which: String,
        /// edges, digraph6, graph6 or dimacs.
        #[arg(long)]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brute-force CI scan of a tiny group.
    Oracle {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify the evidence embedded in a certificate.
    Recheck {
        #[arg(long)]
        cert: PathBuf,
    },
}

struct CmdError {
    message: String,
    code: i32,
}

impl CmdError {
    fn usage(message: impl Into<String>) -> Self {
        CmdError {
            message: message.into(),
            code: 64,
        }
    }

    fn failed(message: impl Into<String>) -> Self {
        CmdError {
            message: message.into(),
            code: 1,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::failed(format!("i/o error: {e}"))
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
        }
    };
    // 0 lets rayon pick the core count.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CmdError> {
    match command {
        Command::Lemmas { p, out } => cmd_lemmas(p, out),
        Command::Build { family, p, out } => cmd_build(&family, p, out),
        Command::VerifyIso {
            family,
            p,
            mode,
            samples,
            seed,
            out,
        } => cmd_verify_iso(&family, p, &mode, samples, seed, out),
        Command::Refute {
            family,
            p,
            mode,
            out,
        } => cmd_refute(&family, p, &mode, out),
        Command::Export {
            family,
            p,
            which,
            format,
            out,
        } => cmd_export(&family, p, &which, &format, out),
        Command::Oracle { n, p, out } => cmd_oracle(n, p, out),
        Command::Recheck { cert } => cmd_recheck(cert),
    }
}

fn parse_family(name: &str) -> Result<Family, CmdError> {
    name.parse::<Family>().map_err(|e| CmdError::usage(e.to_string()))
}

fn build(family: &str, p: u64) -> Result<(cayley_ci::families::ConnectionSet, cayley_ci::families::ConnectionSet, cayley_ci::families::PolyMap), CmdError> {
    build_family(parse_family(family)?, p).map_err(|e| CmdError::usage(e.to_string()))
}

fn emit_certificate(cert: &RunCertificate, out: Option<PathBuf>) -> Result<i32, CmdError> {
    let json = serde_json::to_string_pretty(cert)
        .map_err(|e| CmdError::failed(format!("serialization failed: {e}")))?;
    match out {
        Some(path) => fs::write(&path, json.as_bytes())?,
        None => println!("{json}"),
    }
    eprintln!("verdict: {}", cert.verdict);
    Ok(cert.exit_code())
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn cmd_lemmas(p: u64, out: Option<PathBuf>) -> Result<i32, CmdError> {
    if p > 13 {
        return Err(CmdError::usage(format!(
            "p = {p} is over the lemma-suite bound 13 (the monomial family has ~C(2p, p) members)"
        )));
    }
    cayley_ci::PrimeField::new(p).map_err(|e| CmdError::usage(e.to_string()))?;
    let verdicts = polyring::run_all_lemma_checks(p);
    for v in &verdicts {
        eprintln!(
            "{}: {} ({})",
            v.check,
            if v.pass { "pass" } else { "FAIL" },
            v.detail
        );
    }
    let cert = RunCertificate::new(
        format!("lemmas --p {p}"),
        None,
        Some(p),
        timestamp(),
        Payload::Lemmas { verdicts },
    );
    emit_certificate(&cert, out)
}

fn cmd_build(family: &str, p: u64, out: PathBuf) -> Result<i32, CmdError> {
    let (s, t, phi) = build(family, p)?;
    fs::create_dir_all(&out)?;
    let write = |name: &str, json: String| -> Result<(), CmdError> {
        let path = out.join(name);
        fs::write(&path, json.as_bytes())?;
        eprintln!("wrote {}", path.display());
        Ok(())
    };
    write("S.json", serde_json::to_string_pretty(&s.to_doc()).unwrap())?;
    write("T.json", serde_json::to_string_pretty(&t.to_doc()).unwrap())?;
    write("phi.json", serde_json::to_string_pretty(&phi.to_doc()).unwrap())?;
    Ok(0)
}

fn cmd_verify_iso(
    family: &str,
    p: u64,
    mode: &str,
    samples: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<i32, CmdError> {
    let (s, t, phi) = build(family, p)?;
    let mut reports = Vec::new();
    if mode != "symbolic" && mode != "pointwise" && mode != "both" {
        return Err(CmdError::usage(format!(
            "mode must be symbolic, pointwise or both (got {mode:?})"
        )));
    }
    if mode == "symbolic" || mode == "both" {
        let report = isomap::verify_polymap_symbolic(&s, &t, &phi)
            .map_err(|e| CmdError::failed(e.to_string()))?;
        eprintln!("symbolic: {}", if report.pass { "pass" } else { "FAIL" });
        reports.push(report);
    }
    if mode == "pointwise" || mode == "both" {
        let exhaustive_points = (p as u128).pow(s.du() as u32);
        let budget = if exhaustive_points <= isomap::EXHAUSTIVE_POINT_CAP {
            Budget::Exhaustive
        } else {
            Budget::Sampled(samples)
        };
        let report = isomap::verify_polymap_pointwise(&s, &t, &phi, budget, seed)
            .map_err(|e| CmdError::failed(e.to_string()))?;
        eprintln!("pointwise: {}", if report.pass { "pass" } else { "FAIL" });
        reports.push(report);
    }
    let cert = RunCertificate::new(
        format!("verify-iso --family {family} --p {p} --mode {mode} --seed {seed}"),
        Some(family.to_string()),
        Some(p),
        timestamp(),
        Payload::Iso { reports },
    );
    emit_certificate(&cert, out)
}

fn cmd_refute(family: &str, p: u64, mode: &str, out: Option<PathBuf>) -> Result<i32, CmdError> {
    let (s, t, _) = build(family, p)?;
    let certificate = match mode {
        "directed" => refuter::refute_directed(&s, &t),
        "undirected" => {
            let sbar = undirected_closure(&s).map_err(|e| CmdError::failed(e.to_string()))?;
            let tbar = undirected_closure(&t).map_err(|e| CmdError::failed(e.to_string()))?;
            match refuter::refute_undirected(&sbar, &tbar, &s, &t) {
                Ok(cert) => cert,
                Err(e @ RefuterError::HypothesisNotMet(_)) => {
                    eprintln!("inconclusive: {e}");
                    return Ok(2);
                }
                Err(e) => return Err(CmdError::failed(e.to_string())),
            }
        }
        other => {
            return Err(CmdError::usage(format!(
                "mode must be directed or undirected (got {other:?})"
            )))
        }
    };
    for step in &certificate.steps {
        eprintln!(
            "{}: {}",
            step.name,
            if step.pass { "pass" } else { "FAIL" }
        );
    }
    let cert = RunCertificate::new(
        format!("refute --family {family} --p {p} --mode {mode}"),
        Some(family.to_string()),
        Some(p),
        timestamp(),
        Payload::Refutation { certificate },
    );
    emit_certificate(&cert, out)
}

fn cmd_export(
    family: &str,
    p: u64,
    which: &str,
    format: &str,
    out: PathBuf,
) -> Result<i32, CmdError> {
    let (s, t, _) = build(family, p)?;
    let set = match which {
        "S" => s,
        "T" => t,
        "Sbar" => undirected_closure(&s).map_err(|e| CmdError::failed(e.to_string()))?,
        "Tbar" => undirected_closure(&t).map_err(|e| CmdError::failed(e.to_string()))?,
        other => {
            return Err(CmdError::usage(format!(
                "which must be S, T, Sbar or Tbar (got {other:?})"
            )))
        }
    };
    let format: GraphFormat = format.parse().map_err(CmdError::usage)?;
    let file = fs::File::create(&out)?;
    let stats = export::export(&set, format, file).map_err(|e| match e {
        ExportError::Io(io) => io.into(),
        other => CmdError::usage(other.to_string()),
    })?;
    eprintln!(
        "wrote {}: {} vertices, {} arcs",
        out.display(),
        stats.vertices,
        stats.arcs
    );
    Ok(0)
}

fn cmd_oracle(n: usize, p: u64, out: Option<PathBuf>) -> Result<i32, CmdError> {
    let report = cioracle::ci_scan(n, p).map_err(|e| match e {
        OracleError::Definitional { .. } => CmdError::failed(e.to_string()),
        other => CmdError::usage(other.to_string()),
    })?;
    eprintln!(
        "scanned {} subsets in {} orbits: {}",
        report.subsets_scanned,
        report.orbit_count,
        if report.pass {
            "no counterexamples"
        } else {
            "COUNTEREXAMPLES FOUND"
        }
    );
    let cert = RunCertificate::new(
        format!("oracle --n {n} --p {p}"),
        None,
        Some(p),
        timestamp(),
        Payload::Oracle { report },
    );
    emit_certificate(&cert, out)
}

fn cmd_recheck(path: PathBuf) -> Result<i32, CmdError> {
    let data = fs::read_to_string(&path)?;
    let cert: RunCertificate = serde_json::from_str(&data)
        .map_err(|e| CmdError::failed(format!("not a certificate: {e}")))?;
    certificate::recheck(&cert).map_err(CmdError::failed)?;
    eprintln!(
        "certificate evidence verified; recorded verdict: {}",
        cert.verdict
    );
    Ok(0)
}
