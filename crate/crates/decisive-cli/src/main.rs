//! Command-line front end: parse a model file, dispatch an analysis, and
//! emit human-readable plus optional JSON reports.
//!
//! Exit codes: 0 success; 1 internal error; 2 model or flag validation
//! failure; 3 refusal because the system is not cycle-reset; 4 a
//! refinement or quadrature cap was exceeded.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::Digest;

use decisive::abstraction::{build_abstraction, to_doc, to_dot, AbstractionError};
use decisive::analysis::{
    approx_quantitative, decide_qualitative, simulate, AnalysisError, QuantConfig,
};
use decisive::formula::{decide_sentence, interior_nonempty_formula, Formula, Rel, Term};
use decisive::shs::{
    cycle_reset_witness, longest_nonstrong_path, parse_model, validate, Compiled, HybridSystem,
    TargetSpec, TAU,
};

use report::{DelayClassDoc, ErrorDoc, InfoDoc, ReportDoc};

#[derive(Parser)]
#[command(
    name = "decisive",
    version,
    about = "Reachability analysis for cycle-reset stochastic hybrid systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Path to the model file.
    model: PathBuf,
    /// Write the JSON report to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check well-formedness of a model.
    Validate(ModelArgs),
    /// Model summary: sizes, cycle-reset status, delay classes.
    Info(ModelArgs),
    /// Build the finite abstraction for a target by partition refinement.
    Abstract {
        #[command(flatten)]
        model: ModelArgs,
        /// Target name from the model's target sections.
        #[arg(long)]
        target: String,
        /// Refinement pass cap.
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        /// Write a DOT rendering of the abstraction.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Decide qualitative reachability (almost-sure / zero / in between).
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Approximate the reachability probability with a certified interval.
    Approx {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        target: String,
        /// Target interval width.
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Step cap for the approximation scheme.
        #[arg(long, default_value_t = 200)]
        cap: usize,
    },
    /// Estimate reachability by Monte Carlo simulation.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("DECISIVE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

struct Loaded {
    h: HybridSystem,
    hash: String,
}

fn load(args: &ModelArgs) -> Result<Loaded, (u8, String)> {
    let bytes = std::fs::read(&args.model)
        .map_err(|e| (2u8, format!("cannot read {}: {e}", args.model.display())))?;
    let hash = hex_digest(&bytes);
    let text = String::from_utf8(bytes).map_err(|_| (2u8, "model is not UTF-8".to_string()))?;
    let h = parse_model(&text).map_err(|e| (2u8, e.to_string()))?;
    Ok(Loaded { h, hash })
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = sha2::Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn target_of<'a>(h: &'a HybridSystem, name: &str) -> Result<&'a TargetSpec, (u8, String)> {
    h.targets.get(name).ok_or_else(|| {
        (
            2u8,
            format!(
                "unknown target '{name}' (available: {})",
                h.targets.keys().cloned().collect::<Vec<_>>().join(", ")
            ),
        )
    })
}

fn emit(doc: &ReportDoc, json: &Option<PathBuf>) -> Result<(), (u8, String)> {
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(doc)
            .map_err(|e| (1u8, format!("serialize report: {e}")))?;
        std::fs::write(path, text)
            .map_err(|e| (1u8, format!("write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn fail(
    doc: &mut ReportDoc,
    json: &Option<PathBuf>,
    code: u8,
    kind: &str,
    message: String,
    witness: Option<Vec<String>>,
) -> ExitCode {
    doc.error = Some(ErrorDoc {
        kind: kind.to_string(),
        message: message.clone(),
        witness_cycle: witness.clone(),
    });
    let _ = emit(doc, json);
    eprintln!("error: {message}");
    if let Some(w) = witness {
        eprintln!("witness cycle: {}", w.join(" -> "));
    }
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Validate(args) => {
            let mut doc = ReportDoc::new("validate", "");
            let loaded = match load(&args) {
                Ok(l) => l,
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &args.json, code, "model-error", msg, None))
                }
            };
            doc.model_hash = loaded.hash.clone();
            let diags = validate(&loaded.h).map_err(|e| e.to_string())?;
            let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            doc.validation = Some(lines.clone());
            if lines.is_empty() {
                println!("model is well formed");
                emit(&doc, &args.json).map_err(|(_, m)| m)?;
                Ok(ExitCode::SUCCESS)
            } else {
                for line in &lines {
                    println!("violation: {line}");
                }
                doc.error = Some(ErrorDoc {
                    kind: "validation-failed".into(),
                    message: format!("{} violation(s)", lines.len()),
                    witness_cycle: None,
                });
                emit(&doc, &args.json).map_err(|(_, m)| m)?;
                Ok(ExitCode::from(2))
            }
        }

        Command::Info(args) => {
            let mut doc = ReportDoc::new("info", "");
            let loaded = match load(&args) {
                Ok(l) => l,
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &args.json, code, "model-error", msg, None))
                }
            };
            doc.model_hash = loaded.hash.clone();
            let h = &loaded.h;
            let witness = cycle_reset_witness(h);
            let info = InfoDoc {
                variables: h.vars.len(),
                locations: h.locations.len(),
                edges: h.edges.len(),
                strong_edges: h.edges.iter().filter(|e| e.strong).count(),
                targets: h.targets.keys().cloned().collect(),
                cycle_reset: witness.is_none(),
                witness_cycle: witness.clone(),
                segment_bound: longest_nonstrong_path(h),
                delay_classes: delay_classes(h)?,
            };
            println!(
                "variables: {}  locations: {}  edges: {} ({} strong)",
                info.variables, info.locations, info.edges, info.strong_edges
            );
            println!(
                "cycle-reset: {}{}",
                info.cycle_reset,
                match &info.witness_cycle {
                    Some(w) => format!("  (witness: {})", w.join(" -> ")),
                    None => String::new(),
                }
            );
            if let Some(b) = info.segment_bound {
                println!("longest path without a strong reset: {b}");
            }
            for dc in &info.delay_classes {
                println!("delay law at {}: {}", dc.location, dc.classes.join(", "));
            }
            println!("targets: {}", info.targets.join(", "));
            doc.info = Some(info);
            emit(&doc, &args.json).map_err(|(_, m)| m)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Abstract {
            model,
            target,
            max_iter,
            dot,
        } => {
            let mut doc = ReportDoc::new("abstract", "");
            let loaded = match load(&model) {
                Ok(l) => l,
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "model-error", msg, None))
                }
            };
            doc.model_hash = loaded.hash.clone();
            let spec = match target_of(&loaded.h, &target) {
                Ok(t) => t.clone(),
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "flag-error", msg, None))
                }
            };
            match build_abstraction(&loaded.h, &spec, max_iter) {
                Ok(abs) => {
                    println!(
                        "abstraction stabilized after {} iteration(s): {} blocks",
                        abs.iterations,
                        abs.blocks.len()
                    );
                    for (i, b) in abs.blocks.iter().enumerate() {
                        let marks = format!(
                            "{}{}",
                            if b.target { " [target]" } else { "" },
                            if abs.initial_support.contains(&i) {
                                " [initial]"
                            } else {
                                ""
                            }
                        );
                        println!(
                            "  block {i}: {}: {}{marks}",
                            loaded.h.locations[b.location].name, b.formula
                        );
                    }
                    if let Some(path) = &dot {
                        std::fs::write(path, to_dot(&loaded.h, &abs))
                            .map_err(|e| format!("write {}: {e}", path.display()))?;
                    }
                    doc.abstraction_export = Some(to_doc(&loaded.h, &abs));
                    emit(&doc, &model.json).map_err(|(_, m)| m)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(AbstractionError::CapExceeded {
                    max_iter,
                    partition,
                    trace,
                }) => {
                    println!(
                        "refinement did not stabilize within {max_iter} iterations; {} blocks so far",
                        partition.blocks.len()
                    );
                    for (i, b) in partition.blocks.iter().enumerate() {
                        println!(
                            "  block {i}: {}: {}",
                            loaded.h.locations[b.location].name, b.formula
                        );
                    }
                    // Export the partial partition so the divergence pattern
                    // stays inspectable.
                    doc.abstraction_export = Some(decisive::abstraction::AbstractionDoc {
                        blocks: partition
                            .blocks
                            .iter()
                            .enumerate()
                            .map(|(i, b)| decisive::abstraction::BlockDoc {
                                index: i,
                                location: loaded.h.locations[b.location].name.clone(),
                                formula: b.formula.to_string(),
                                target: b.target,
                                initial: false,
                            })
                            .collect(),
                        edges: Vec::new(),
                        iterations: trace.len(),
                        trace,
                    });
                    Ok(fail(
                        &mut doc,
                        &model.json,
                        4,
                        "cap-exceeded",
                        format!("refinement cap of {max_iter} iterations exceeded"),
                        None,
                    ))
                }
                Err(e) => Ok(fail(
                    &mut doc,
                    &model.json,
                    1,
                    "internal",
                    e.to_string(),
                    None,
                )),
            }
        }

        Command::Check {
            model,
            target,
            max_iter,
        } => {
            let mut doc = ReportDoc::new("check", "");
            let loaded = match load(&model) {
                Ok(l) => l,
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "model-error", msg, None))
                }
            };
            doc.model_hash = loaded.hash.clone();
            let spec = match target_of(&loaded.h, &target) {
                Ok(t) => t.clone(),
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "flag-error", msg, None))
                }
            };
            match decide_qualitative(&loaded.h, &spec, max_iter) {
                Ok(report) => {
                    doc.fill_from_reach(&report, 0.0);
                    println!("verdict: {}", report.verdict.as_str());
                    if let Some(a) = &report.diagnostics.abstraction {
                        println!(
                            "abstraction: {} blocks, {} iteration(s)",
                            a.blocks, a.iterations
                        );
                    }
                    emit(&doc, &model.json).map_err(|(_, m)| m)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(analysis_failure(&mut doc, &model.json, e)),
            }
        }

        Command::Approx {
            model,
            target,
            eps,
            cap,
        } => {
            let mut doc = ReportDoc::new("approx", "");
            if eps <= 0.0 {
                return Ok(fail(
                    &mut doc,
                    &model.json,
                    2,
                    "flag-error",
                    "--eps must be positive".into(),
                    None,
                ));
            }
            let loaded = match load(&model) {
                Ok(l) => l,
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "model-error", msg, None))
                }
            };
            doc.model_hash = loaded.hash.clone();
            let spec = match target_of(&loaded.h, &target) {
                Ok(t) => t.clone(),
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "flag-error", msg, None))
                }
            };
            let cfg = QuantConfig {
                eps,
                n_cap: cap,
                ..QuantConfig::default()
            };
            match approx_quantitative(&loaded.h, &spec, &cfg) {
                Ok(report) => {
                    doc.fill_from_reach(&report, eps);
                    let iv = report.prob_interval.as_ref().expect("interval");
                    println!("verdict: {}", report.verdict.as_str());
                    println!(
                        "probability in [{:.6}, {:.6}] after {} step(s){}",
                        decisive::finite::rational_to_f64(&iv.lo),
                        decisive::finite::rational_to_f64(&iv.hi),
                        iv.steps_used,
                        if iv.converged { "" } else { "  (cap reached)" }
                    );
                    let code = if iv.converged {
                        ExitCode::SUCCESS
                    } else {
                        doc.error = Some(ErrorDoc {
                            kind: "cap-exceeded".into(),
                            message: format!("scheme did not converge within {cap} steps"),
                            witness_cycle: None,
                        });
                        ExitCode::from(4)
                    };
                    emit(&doc, &model.json).map_err(|(_, m)| m)?;
                    Ok(code)
                }
                Err(e) => Ok(analysis_failure(&mut doc, &model.json, e)),
            }
        }

        Command::Simulate {
            model,
            target,
            horizon,
            samples,
            seed,
        } => {
            let mut doc = ReportDoc::new("simulate", "");
            if horizon == 0 || samples == 0 {
                return Ok(fail(
                    &mut doc,
                    &model.json,
                    2,
                    "flag-error",
                    "--horizon and --samples must be at least 1".into(),
                    None,
                ));
            }
            let loaded = match load(&model) {
                Ok(l) => l,
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "model-error", msg, None))
                }
            };
            doc.model_hash = loaded.hash.clone();
            let spec = match target_of(&loaded.h, &target) {
                Ok(t) => t.clone(),
                Err((code, msg)) => {
                    return Ok(fail(&mut doc, &model.json, code, "flag-error", msg, None))
                }
            };
            match simulate(&loaded.h, &spec, horizon, samples, seed) {
                Ok(res) => {
                    println!(
                        "hits: {}/{} (estimate {:.4}, 95% Wilson [{:.4}, {:.4}])",
                        res.hits, res.samples, res.estimate, res.wilson_lo, res.wilson_hi
                    );
                    doc.diagnostics.simulation = Some(report::SimulationDoc {
                        samples: res.samples,
                        hits: res.hits,
                        wilson: [res.wilson_lo, res.wilson_hi],
                        seed: res.seed,
                    });
                    doc.diagnostics.cycle_reset = cycle_reset_witness(&loaded.h).is_none();
                    emit(&doc, &model.json).map_err(|(_, m)| m)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(analysis_failure(&mut doc, &model.json, e)),
            }
        }
    }
}

fn analysis_failure(doc: &mut ReportDoc, json: &Option<PathBuf>, e: AnalysisError) -> ExitCode {
    match e {
        AnalysisError::NotCycleReset { witness } => {
            doc.diagnostics.cycle_reset = false;
            doc.diagnostics.witness_cycle = Some(witness.clone());
            fail(
                doc,
                json,
                3,
                "not-cycle-reset",
                "the system is not cycle-reset; no verdict is claimed".into(),
                Some(witness),
            )
        }
        AnalysisError::CapExceeded { max_iter, .. } => fail(
            doc,
            json,
            4,
            "cap-exceeded",
            format!("abstraction refinement cap of {max_iter} iterations exceeded"),
            None,
        ),
        AnalysisError::QuadratureBudgetExceeded { evals } => fail(
            doc,
            json,
            4,
            "quadrature-budget-exceeded",
            format!("quadrature budget exhausted after {evals} evaluations"),
            None,
        ),
        AnalysisError::QuantModeViolation { edge, reason } => fail(
            doc,
            json,
            2,
            "quant-mode-violation",
            format!("edge '{edge}': {reason}"),
            None,
        ),
        AnalysisError::UnsupportedInit => fail(
            doc,
            json,
            2,
            "quant-mode-violation",
            "continuous initial support is not a box".into(),
            None,
        ),
        other => fail(doc, json, 1, "internal", other.to_string(), None),
    }
}

/// Which delay laws can arise per location, decided symbolically: the delay
/// set can be finite (discrete uniform), bounded with interior (uniform),
/// or unbounded (exponential restricted).
fn delay_classes(h: &HybridSystem) -> Result<Vec<DelayClassDoc>, String> {
    let compiled = Compiled::new(h).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (li, loc) in h.locations.iter().enumerate() {
        let union = Formula::or(
            h.edges_from(li)
                .map(|(ei, _)| compiled.delay_formula[ei].clone())
                .collect(),
        );
        let tau_names = vec![TAU.to_string()];
        let interior =
            interior_nonempty_formula(&union, &tau_names).map_err(|e| e.to_string())?;
        // bounded: ∃u ∀τ (I(x̄, τ) → τ ≤ u)
        let bound_var = "u_bound".to_string();
        let bounded = Formula::exists(
            bound_var.clone(),
            Formula::forall(
                TAU,
                Formula::implies(
                    union.clone(),
                    Formula::cmp(Term::var(TAU), Rel::Le, Term::var(bound_var.clone())),
                ),
            ),
        );
        let mut classes = Vec::new();
        let exists_inv = |f: Formula| -> Result<bool, String> {
            let mut sentence = Formula::and(vec![loc.invariant.clone(), f]);
            for v in h.vars.iter().rev() {
                sentence = Formula::exists(v.clone(), sentence);
            }
            decide_sentence(&sentence).map_err(|e| e.to_string())
        };
        if exists_inv(Formula::not(interior.clone()))? {
            classes.push("dirac/discrete".to_string());
        }
        if exists_inv(Formula::and(vec![interior.clone(), bounded.clone()]))? {
            classes.push("uniform".to_string());
        }
        if exists_inv(Formula::not(bounded).normalized())? {
            classes.push(format!("exponential (rate {})", loc.delay.exp_rate));
        }
        out.push(DelayClassDoc {
            location: loc.name.clone(),
            classes,
        });
    }
    Ok(out)
}
