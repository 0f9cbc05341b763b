//! `coxcheck`: exact verification of conditional belief functions.
//!
//! Exit codes: 0 when the expected verdict is reached (for user files, when
//! the run completes), 1 when a checked claim fails, 2 on usage or input
//! errors.

mod render;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use coxcheck_core::appendix::verify_appendix;
use coxcheck_core::cox::{enumerate_constrained, PairTable};
use coxcheck_core::domain::constructions::{build_fine13, build_halpern, build_halpern_with_delta};
use coxcheck_core::domain::file::parse_structure;
use coxcheck_core::fine::verify_fine;
use coxcheck_core::functional_eq::enumerate_r_constrained;
use coxcheck_core::harness::{run_pipeline, search, shrink, PipelineOptions, PipelineVerdict, SearchConfig};
use coxcheck_core::rescaling::{build_system, solve, Verdict};
use coxcheck_core::{DomainError, Rational, Scalar, Structure, ValueIndex, ValueKind};

#[derive(Parser)]
#[command(name = "coxcheck", version, about = "Exact checks of conditional belief functions against Cox-style axioms")]
struct Cli {
    /// Report format; text is a rendering of the JSON report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "COXCHECK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Listing {
    Pairs,
    Triples,
    Rtriples,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline on the twelve-world counterexample.
    VerifyHalpern {
        /// Perturbation size instead of the minimum probability gap.
        #[arg(long)]
        delta: Option<String>,
        /// Also run the 5^n constrained-triple and R-constrained sweeps.
        #[arg(long)]
        exhaustive_triples: bool,
    },
    /// Order axioms and the agreeing-function obstruction.
    VerifyFine {
        /// Thirteen-world variant with every conditioning set containing w0.
        #[arg(long)]
        restricted: bool,
        /// Exhaustive associativity search over the table (slow when restricted).
        #[arg(long)]
        search_witnesses: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Closeness, good-triple and trichotomy checks on the twelve-world domain.
    VerifyAppendix,
    /// Rescaling feasibility for a domain file.
    RescaleCheck { file: PathBuf },
    /// Lists constrained pairs, constrained triples or R-constrained triples.
    Enumerate {
        #[arg(value_enum)]
        kind: Listing,
        file: PathBuf,
    },
    /// Full pipeline on a domain file.
    Check {
        file: PathBuf,
        #[arg(long)]
        exhaustive_triples: bool,
        /// Order axioms and obstruction (twelve-world labels only).
        #[arg(long)]
        fine: bool,
        /// Appendix checks (needs declared blocks).
        #[arg(long)]
        appendix: bool,
    },
    /// Random structure search with the fast pipeline.
    Search {
        #[arg(long)]
        worlds: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// Decimal exponents of the weight blocks, lightest first.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        tiers: Option<Vec<i32>>,
        /// Generate probability structures only.
        #[arg(long)]
        unperturbed: bool,
        /// Shrink every finding greedily.
        #[arg(long)]
        shrink: bool,
    },
}

enum Failure {
    Usage(String),
    Domain(DomainError),
}

impl From<DomainError> for Failure {
    fn from(e: DomainError) -> Self {
        Failure::Domain(e)
    }
}

struct Outcome {
    report: Value,
    expected: bool,
}

fn outcome(report: impl Serialize, expected: bool) -> Outcome {
    Outcome { report: serde_json::to_value(report).expect("reports serialize"), expected }
}

fn load(path: &Path) -> Result<Structure, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(parse_structure(&text)?)
}

fn run(command: Command) -> Result<Outcome, Failure> {
    match command {
        Command::VerifyHalpern { delta, exhaustive_triples } => {
            let s = match delta {
                None => build_halpern(),
                Some(d) => {
                    let d = Rational::parse_exact(&d).map_err(|e| Failure::Usage(format!("--delta: {e}")))?;
                    build_halpern_with_delta(d)?
                }
            };
            let opts = PipelineOptions { exhaustive: exhaustive_triples, ..PipelineOptions::default() };
            let r = run_pipeline(&s, &opts)?;
            let ok = r.verdict == PipelineVerdict::CounterexampleConfirmed;
            Ok(outcome(r, ok))
        }
        Command::VerifyFine { restricted, search_witnesses, seed } => {
            let (s, anchor) = if restricted { (build_fine13(), Some("w0")) } else { (build_halpern(), None) };
            let idx = ValueIndex::build(&s, ValueKind::Belief)?;
            let r = verify_fine(&s, &idx, anchor, seed, search_witnesses)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let ok = r.confirmed();
            Ok(outcome(r, ok))
        }
        Command::VerifyAppendix => {
            let r = verify_appendix(&build_halpern())?;
            let ok = r.holds();
            Ok(outcome(r, ok))
        }
        Command::RescaleCheck { file } => {
            let s = load(&file)?;
            let idx = ValueIndex::build(&s, ValueKind::Belief)?;
            let system = build_system(&idx);
            let r = solve(&idx, &system, &[], 1);
            let mut v = serde_json::to_value(&r).expect("report serializes");
            if let Verdict::Infeasible { certificate, .. } = &r.verdict {
                v["forced_values"] = json!([idx.value(certificate.v).to_string(), idx.value(certificate.w).to_string()]);
                v["certificate_replays"] = json!(certificate.replays());
            }
            v["feasible"] = json!(r.feasible());
            Ok(Outcome { report: v, expected: true })
        }
        Command::Enumerate { kind, file } => {
            let s = load(&file)?;
            let idx = ValueIndex::build(&s, ValueKind::Belief)?;
            let val = |id: u32| idx.value(id).to_string();
            let report = match kind {
                Listing::Pairs => match PairTable::build(&idx, s.trigger()) {
                    Err(c) => json!({ "conflict": c, "values": [val(c.x), val(c.y), val(c.w1), val(c.w2)] }),
                    Ok(t) => {
                        let rows: Vec<Value> = t
                            .sorted()
                            .iter()
                            .map(|(x, y, e)| {
                                let c = e.witness();
                                json!({ "x": val(*x), "y": val(*y), "f": val(e.w), "chain": [c.u1, c.u2, c.u3] })
                            })
                            .collect();
                        json!({ "count": rows.len(), "pairs": rows })
                    }
                },
                Listing::Triples => {
                    let rows: Vec<Value> = enumerate_constrained(&idx)
                        .iter()
                        .map(|((x, y, z), c)| json!({ "x": val(*x), "y": val(*y), "z": val(*z), "chain": [c.u1, c.u2, c.u3, c.u4] }))
                        .collect();
                    json!({ "count": rows.len(), "triples": rows })
                }
                Listing::Rtriples => {
                    let rows: Vec<Value> = enumerate_r_constrained(&idx)
                        .iter()
                        .map(|t| {
                            let w = &t.witness;
                            json!({ "x": val(t.x), "y": val(t.y), "z": val(t.z), "witness": [w.u, w.a, w.b1, w.b2] })
                        })
                        .collect();
                    json!({ "count": rows.len(), "triples": rows })
                }
            };
            Ok(Outcome { report, expected: true })
        }
        Command::Check { file, exhaustive_triples, fine, appendix } => {
            let s = load(&file)?;
            let opts = PipelineOptions { exhaustive: exhaustive_triples, fine, appendix, ..PipelineOptions::default() };
            Ok(outcome(run_pipeline(&s, &opts)?, true))
        }
        Command::Search { worlds, trials, seed, tiers, unperturbed, shrink: do_shrink } => {
            if worlds == 0 || worlds > 16 {
                return Err(Failure::Usage("--worlds must be between 1 and 16".into()));
            }
            let mut config = SearchConfig::new(worlds, trials, seed);
            if let Some(t) = tiers {
                if t.is_empty() {
                    return Err(Failure::Usage("--tiers needs at least one exponent".into()));
                }
                config.tiers = t;
            }
            config.perturb = !unperturbed;
            let r = search::<Rational>(&config);
            let mut v = serde_json::to_value(&r).expect("report serializes");
            if do_shrink {
                let shrunk: Vec<Value> = r
                    .findings
                    .iter()
                    .map(|f| {
                        let s = parse_structure::<Rational>(&f.structure).expect("generated files parse");
                        match shrink(&s, seed) {
                            Ok(sr) => json!({ "trial": f.trial, "shrink": sr }),
                            Err(e) => json!({ "trial": f.trial, "error": e.to_string() }),
                        }
                    })
                    .collect();
                v["shrunk"] = json!(shrunk);
            }
            Ok(Outcome { report: v, expected: true })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(o) => {
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&o.report).expect("json renders"),
                Format::Text => render::text(&o.report),
            };
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = writeln!(io::stdout().lock(), "{text}");
            if o.expected {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
