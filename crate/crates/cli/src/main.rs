use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use listcolour::greedy::GreedyError;
use listcolour::solver::{BudgetExceeded, ChoosabilityError, DEFAULT_BRUTE_FORCE_BUDGET};
use listcolour::transforms::TransformError;
use listcolour::verifier::canonical::EnumerationError;
use listcolour::verifier::{
    search_non_choosable, search_non_choosable_with, SearchError, VerifyError,
};
use listcolour::{
    audit_ledger, brute_force_decide, convert_near_acceptable, decide, list_chromatic_number,
    parse_instance, saturate, three_phase, verify_ohba, verify_structures, AuditError, Colouring,
    GreedyMode, Instance, PartStructure, VerdictCache, VerificationConfig,
};

const EXIT_OK: u8 = 0;
/// The mathematics said no: uncolourable, witness found, hypothesis failed.
const EXIT_NEGATIVE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "listcolour", version)]
#[command(about = "Exact list colouring of complete multipartite graphs")]
struct Cli {
    /// Output format; only json is stable.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether an instance has an acceptable colouring (exit 1 if not)
    Decide {
        /// Instance JSON file, or - for stdin
        instance: PathBuf,
        /// Use exhaustive search instead of the solver
        #[arg(long)]
        brute_force: bool,
        /// Maximum assignments tried by --brute-force
        #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_BUDGET)]
        budget: u128,
    },
    /// Compute the list chromatic number of a part structure
    ChiList {
        /// Part sizes, e.g. 3,3
        #[arg(value_parser = parse_parts)]
        parts: PartStructure,
        /// Largest k tried (defaults to the number of vertices)
        #[arg(long)]
        max_k: Option<usize>,
    },
    /// Exhaustively verify k-choosability of k-partite graphs on at most 2k+1 vertices
    VerifyOhba {
        #[arg(long)]
        k: usize,
        /// Verify only these structures (repeatable), e.g. --structure 2,2,3
        #[arg(long = "structure", value_parser = parse_parts)]
        structures: Vec<PartStructure>,
        /// Cap on the number of colours
        #[arg(long)]
        colour_budget: Option<usize>,
        /// Disable every pruning rule
        #[arg(long)]
        no_pruning: bool,
        /// Enumerate only structures with exactly 2k+1 vertices
        #[arg(long)]
        maximal_order: bool,
        /// Colour each pruned assignment through the reduction as a check
        #[arg(long)]
        audit_pruned: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Seconds before stopping with a partial report
        #[arg(long)]
        time_budget: Option<f64>,
        /// JSON-lines verdict cache
        #[arg(long, env = "LISTCOLOUR_CACHE")]
        cache: Option<PathBuf>,
        /// Write the report here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Find every uncolourable canonical k-list assignment (exit 1 if any)
    SearchTight {
        #[arg(long, value_parser = parse_parts)]
        parts: PartStructure,
        #[arg(long)]
        k: usize,
        /// Cap on the number of colours (defaults to vertices - 1)
        #[arg(long)]
        colour_budget: Option<usize>,
    },
    /// Turn a near-acceptable colouring into an acceptable one
    Convert {
        instance: PathBuf,
        /// Colouring JSON file: array of colours, one per vertex
        colouring: PathBuf,
    },
    /// Run the three-phase frequent-colour construction and print its trace
    Greedy {
        instance: PathBuf,
        /// Attempt inputs outside the supported shape
        #[arg(long)]
        best_effort: bool,
    },
    /// Enlarge lists while the instance stays uncolourable
    Saturate { instance: PathBuf },
    /// Evaluate the counting ledger on an instance
    Audit { instance: PathBuf },
    /// Generate a seeded random instance
    RandomInstance {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = parse_parts)]
        parts: PartStructure,
        /// Colours are drawn from 1..=colours
        #[arg(long)]
        colours: u32,
        #[arg(long)]
        min_list: usize,
        /// Defaults to --min-list
        #[arg(long)]
        max_list: Option<usize>,
    },
}

fn parse_parts(s: &str) -> Result<PartStructure, String> {
    let sizes = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad part size {p:?}: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    PartStructure::new(sizes).map_err(|e| e.to_string())
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = read_input(path)?;
    parse_instance(&text).with_context(|| format!("parsing instance {}", path.display()))
}

fn print_json(value: &impl Serialize) {
    print_line(&serde_json::to_string_pretty(value).expect("output serializes"));
}

/// Writes a line of data to stdout; a closed pipe ends output silently.
fn print_line(text: &str) {
    let mut out = io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    let budget = err.chain().any(|e| {
        matches!(e.downcast_ref(), Some(EnumerationError::Infeasible { .. }))
            || e.downcast_ref::<BudgetExceeded>().is_some()
            || matches!(e.downcast_ref(), Some(GreedyError::Phase1Budget { .. }))
            || matches!(
                e.downcast_ref(),
                Some(ChoosabilityError::MaxKExhausted { .. })
                    | Some(ChoosabilityError::Enumeration(
                        EnumerationError::Infeasible { .. }
                    ))
            )
            || matches!(
                e.downcast_ref(),
                Some(VerifyError::Enumeration(
                    EnumerationError::Infeasible { .. }
                ))
            )
            || matches!(
                e.downcast_ref(),
                Some(SearchError::Enumeration(
                    EnumerationError::Infeasible { .. }
                )) | Some(SearchError::BruteForce(_))
            )
    });
    if budget {
        EXIT_BUDGET
    } else {
        EXIT_INPUT
    }
}

fn run(cli: Cli) -> Result<u8> {
    let format = cli.format;
    match cli.command {
        Command::Decide {
            instance,
            brute_force,
            budget,
        } => {
            let inst = load_instance(&instance)?;
            let result = if brute_force {
                brute_force_decide(&inst, budget)?
            } else {
                decide(&inst)
            };
            let verdict = serde_json::to_value(result.verdict)?;
            if format == Format::Text {
                print_line(verdict.as_str().unwrap_or_default());
                if let Some(w) = &result.witness {
                    print_line(&w.to_json());
                }
            } else {
                let mut out = json!({ "verdict": verdict });
                if let Some(w) = &result.witness {
                    out["witness"] = serde_json::to_value(w)?;
                }
                print_json(&out);
            }
            Ok(if result.is_colourable() {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            })
        }
        Command::ChiList { parts, max_k } => {
            let max_k = max_k.unwrap_or(parts.n());
            let chi = list_chromatic_number(&parts, max_k)?;
            if format == Format::Text {
                print_line(&chi.to_string());
            } else {
                print_json(&json!({ "parts": parts.sizes(), "chi_list": chi }));
            }
            Ok(EXIT_OK)
        }
        Command::VerifyOhba {
            k,
            structures,
            colour_budget,
            no_pruning,
            maximal_order,
            audit_pruned,
            workers,
            time_budget,
            cache,
            output,
        } => {
            let mut config = if no_pruning {
                VerificationConfig::without_pruning()
            } else {
                VerificationConfig {
                    maximal_order_rule: maximal_order,
                    ..VerificationConfig::default()
                }
            };
            config.colour_budget = colour_budget;
            config.audit_pruned = audit_pruned;
            config.workers = workers;
            if let Some(secs) = time_budget {
                if !(secs.is_finite() && secs >= 0.0) {
                    bail!("--time-budget must be a non-negative number of seconds");
                }
                config.time_budget = Some(Duration::from_secs_f64(secs));
            }
            let mut cache = match &cache {
                Some(path) => VerdictCache::open(path)?,
                None => VerdictCache::in_memory(),
            };
            let report = if structures.is_empty() {
                verify_ohba(k, &config, &mut cache)?
            } else {
                if let Some(ps) = structures.iter().find(|ps| ps.k() > k) {
                    bail!("structure {:?} has more than {k} parts", ps.sizes());
                }
                verify_structures(k, &structures, &config, &mut cache)?
            };
            let decided: usize = report.structures.iter().map(|s| s.decided).sum();
            let pruned: usize = report
                .structures
                .iter()
                .map(|s| s.pruned_common_colour)
                .sum();
            eprintln!(
                "k={}: {} structures, {} decided, {} pruned, {} failures, {} cache hits, {} ms{}",
                report.k,
                report.structures.len(),
                decided,
                pruned,
                report.failures.len(),
                report.run.cache_hits,
                report.run.wall_time_ms,
                if report.partial { " (PARTIAL)" } else { "" }
            );
            let text = serde_json::to_string_pretty(&report)?;
            match &output {
                Some(path) => fs::write(path, text + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print_line(&text),
            }
            Ok(
                if !report.failures.is_empty() || !report.pruned_audit_failures.is_empty() {
                    EXIT_NEGATIVE
                } else if report.partial {
                    EXIT_BUDGET
                } else {
                    EXIT_OK
                },
            )
        }
        Command::SearchTight {
            parts,
            k,
            colour_budget,
        } => {
            let budget = colour_budget.unwrap_or(parts.n().saturating_sub(1));
            let witnesses = match colour_budget {
                Some(b) => search_non_choosable_with(&parts, k, b)?,
                None => search_non_choosable(&parts, k)?,
            };
            eprintln!("{} witnesses", witnesses.len());
            let files: Vec<_> = witnesses.iter().map(Instance::to_file).collect();
            if format == Format::Text {
                for w in &witnesses {
                    print_line(&w.to_json());
                }
            } else {
                print_json(&json!({
                    "parts": parts.sizes(),
                    "k": k,
                    "colour_budget": budget,
                    "witnesses": files,
                }));
            }
            Ok(if witnesses.is_empty() {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            })
        }
        Command::Convert {
            instance,
            colouring,
        } => {
            let inst = load_instance(&instance)?;
            let text = read_input(&colouring)?;
            let f = Colouring::parse(&text, inst.n())
                .with_context(|| format!("parsing colouring {}", colouring.display()))?;
            match convert_near_acceptable(&inst, &f) {
                Ok(conversion) => {
                    print_json(&conversion);
                    Ok(EXIT_OK)
                }
                Err(e @ TransformError::NotNearAcceptable { .. }) => {
                    eprintln!("{e}");
                    Ok(EXIT_NEGATIVE)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Greedy {
            instance,
            best_effort,
        } => {
            let inst = load_instance(&instance)?;
            let mode = if best_effort {
                GreedyMode::BestEffort
            } else {
                GreedyMode::Strict
            };
            match three_phase(&inst, mode) {
                Ok(trace) => {
                    print_json(&trace);
                    Ok(if trace.colouring.is_some() {
                        EXIT_OK
                    } else {
                        EXIT_NEGATIVE
                    })
                }
                Err(
                    e @ (GreedyError::TooFewFrequent { .. } | GreedyError::NotProofShaped { .. }),
                ) => {
                    eprintln!("{e}");
                    Ok(EXIT_NEGATIVE)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Saturate { instance } => {
            let inst = load_instance(&instance)?;
            match saturate(&inst) {
                Ok(s) => {
                    print_json(&s.to_file());
                    Ok(EXIT_OK)
                }
                Err(AuditError::Colourable) => {
                    eprintln!("instance is colourable; nothing to saturate");
                    Ok(EXIT_NEGATIVE)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Audit { instance } => {
            let inst = load_instance(&instance)?;
            let ledger = audit_ledger(&inst);
            if !ledger.failed.is_empty() {
                eprintln!("failed: {}", ledger.failed.join("; "));
            }
            print_json(&ledger);
            Ok(if ledger.is_counterexample_candidate() {
                EXIT_NEGATIVE
            } else {
                EXIT_OK
            })
        }
        Command::RandomInstance {
            seed,
            parts,
            colours,
            min_list,
            max_list,
        } => {
            let max_list = max_list.unwrap_or(min_list);
            if min_list == 0 || min_list > max_list || max_list > colours as usize {
                bail!("need 1 <= --min-list <= --max-list <= --colours");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lists: Vec<Vec<u32>> = (0..parts.n())
                .map(|_| {
                    let len = rng.gen_range(min_list..=max_list);
                    let mut l: Vec<u32> = sample(&mut rng, colours as usize, len)
                        .into_iter()
                        .map(|i| i as u32 + 1)
                        .collect();
                    l.sort_unstable();
                    l
                })
                .collect();
            let inst = Instance::from_parts(parts.sizes(), &lists)?;
            print_json(&inst.to_file());
            Ok(EXIT_OK)
        }
    }
}
