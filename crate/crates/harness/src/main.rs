//! `ofuc`: property suites, schedule exploration, offline linearizability
//! checking, netsim scenarios, and the convoy benchmark.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use ofuc_core::record::level;
use ofuc_core::serial::OpCall;
use ofuc_core::universal::Budget;
use ofuc_core::value::V;
use ofuc_core::History;

use ofuc_harness::check::lin::{check_linearizable, Verdict};
use ofuc_harness::explore::{explore, Bounds};
use ofuc_harness::suites::universal::{univ_program, Kind};
use ofuc_harness::suites::{run_suite, SuiteCfg, SUITE_NAMES};

use ofuc_netsim::convoy::{convoy_mean_latency, ConvoyCfg};
use ofuc_netsim::scenario::{run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "ofuc", about = "obstruction-free universal construction harness", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a property suite; exit code 0 iff every check passes.
    Check {
        /// One of: splitter, grafarius, racing, consensus, runiv, buniv,
        /// abd, registers, complexity, checkers, convoy, or "all".
        suite: String,
        #[arg(long, default_value_t = 3)]
        procs: usize,
        #[arg(long, default_value_t = 24)]
        steps: u64,
        #[arg(long, default_value_t = 3)]
        laps: u64,
        #[arg(long, default_value_t = 2000)]
        seeds: u64,
    },
    /// Exhaustively explore a replicated-object program and dump each
    /// history to its own JSONL file (suffix .NNNNN inserted when several).
    Explore {
        #[arg(long, default_value = "cas")]
        object: String,
        #[arg(long, default_value_t = 2)]
        procs: usize,
        /// Operations per process.
        #[arg(long, default_value_t = 1)]
        ops: usize,
        #[arg(long, default_value_t = 24)]
        steps: u64,
        #[arg(long)]
        out: PathBuf,
        /// Keep at most this many histories.
        #[arg(long, default_value_t = 100)]
        limit: usize,
    },
    /// Offline linearizability check of a history file against a built-in
    /// type; checks every object in the file.
    Lin {
        file: PathBuf,
        #[arg(long)]
        spec: String,
    },
    /// Run a netsim scenario file and dump its history.
    Sim {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmarks over the simulated substrate.
    Bench {
        #[command(subcommand)]
        which: BenchCmd,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Convoy-effect latency sweep (CSV: m,clients,latency,approx).
    Convoy {
        /// Comma-separated interval sizes.
        #[arg(long, default_value = "10,20,40")]
        m: String,
        /// Client range, e.g. 1..20.
        #[arg(long, default_value = "1..20")]
        clients: String,
        #[arg(long, default_value_t = 40.0)]
        lambda_s: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_f: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("bad range: {s}"))?;
    let lo = a.parse().map_err(|e| format!("bad range {s}: {e}"))?;
    let hi = b.parse().map_err(|e| format!("bad range {s}: {e}"))?;
    if lo == 0 || hi < lo {
        return Err(format!("bad range: {s}"));
    }
    Ok((lo, hi))
}

fn object_ops(object: &str, ops: usize, pid: usize) -> Vec<OpCall> {
    (0..ops)
        .map(|i| match object {
            "cas" => OpCall::new("cas", V::List(vec![V::Nat(i as u64), V::Nat(pid as u64 + 1)])),
            "counter" => OpCall::new("inc", V::None),
            "register" => OpCall::new("write", V::Nat(pid as u64 + 1)),
            "queue" => OpCall::new("enq", V::Nat(pid as u64 + 1)),
            other => panic!("unknown object {other}"),
        })
        .collect()
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<std::process::ExitCode, String> {
    match cli.cmd {
        Cmd::Check { suite, procs, steps, laps, seeds } => {
            let cfg = SuiteCfg { procs, max_steps: steps, laps, seeds };
            let names: Vec<&str> = if suite == "all" {
                SUITE_NAMES.to_vec()
            } else {
                vec![suite.as_str()]
            };
            let mut all_ok = true;
            for name in names {
                let report = run_suite(name, &cfg)
                    .ok_or_else(|| format!("unknown suite {name}; try one of {SUITE_NAMES:?}"))?;
                print!("{}", report.render());
                all_ok &= report.pass();
            }
            Ok(if all_ok { std::process::ExitCode::SUCCESS } else { std::process::ExitCode::FAILURE })
        }
        Cmd::Explore { object, procs, ops, steps, out, limit } => {
            let obj_static: &'static str = match object.as_str() {
                "cas" => "cas",
                "counter" => "counter",
                "register" => "register",
                "queue" => "queue",
                other => return Err(format!("unknown object {other}")),
            };
            let per_proc: Vec<Vec<OpCall>> =
                (0..procs).map(|p| object_ops(obj_static, ops, p)).collect();
            let prog = univ_program(Kind::Runiv, obj_static, per_proc, Budget::default(), false);
            let mut kept: Vec<History> = Vec::new();
            let mut seen = BTreeSet::new();
            let stats = explore(&prog, &Bounds::steps(steps), |h, complete| {
                if complete && kept.len() < limit {
                    let text = h.to_jsonl();
                    if seen.insert(text) {
                        kept.push(h.clone());
                    }
                }
            });
            let many = kept.len() > 1;
            for (i, h) in kept.iter().enumerate() {
                let path = if many {
                    let stem = out.display().to_string();
                    PathBuf::from(match stem.strip_suffix(".jsonl") {
                        Some(base) => format!("{base}.{i:05}.jsonl"),
                        None => format!("{stem}.{i:05}"),
                    })
                } else {
                    out.clone()
                };
                std::fs::write(&path, h.to_jsonl()).map_err(|e| e.to_string())?;
            }
            println!(
                "explored {} schedules ({} complete, {} truncated, {} pruned); wrote {} histories",
                stats.runs, stats.complete, stats.truncated, stats.pruned, kept.len()
            );
            Ok(std::process::ExitCode::SUCCESS)
        }
        Cmd::Lin { file, spec } => {
            let text = std::fs::read_to_string(&file).map_err(|e| e.to_string())?;
            let h = History::from_jsonl(&text).map_err(|e| e.to_string())?;
            let ser = ofuc_core::serial::builtin(&spec).ok_or(format!("unknown spec {spec}"))?;
            let mut ok = true;
            let all_ops = h.ops();
            for obj in h.objects() {
                let ops: Vec<_> = all_ops.iter().filter(|o| o.obj == obj).cloned().collect();
                if ops.is_empty() {
                    continue;
                }
                match check_linearizable(&ops, ser.as_ref(), 10_000_000) {
                    Verdict::Ok(witness) => {
                        println!("{obj}: linearizable (witness {witness:?})");
                    }
                    Verdict::Violation { prefix, blocked } => {
                        println!("{obj}: NOT linearizable (prefix {prefix:?}, blocked {blocked:?})");
                        ok = false;
                    }
                    Verdict::Unknown { prefix } => {
                        println!("{obj}: unknown (budget exhausted at prefix {prefix:?})");
                        ok = false;
                    }
                }
            }
            let _ = level::ALL;
            Ok(if ok { std::process::ExitCode::SUCCESS } else { std::process::ExitCode::FAILURE })
        }
        Cmd::Sim { scenario, out } => {
            let text = std::fs::read_to_string(&scenario).map_err(|e| e.to_string())?;
            let sc = Scenario::from_json(&text).map_err(|e| e.to_string())?;
            let (history, report) = run_scenario(&sc);
            std::fs::write(&out, history.to_jsonl()).map_err(|e| e.to_string())?;
            println!(
                "netsim: {} events, end time {}, {} messages, stuck clients {:?}",
                history.0.len(),
                report.end_time,
                report.messages_delivered,
                report.stuck_clients
            );
            Ok(if report.all_complete() {
                std::process::ExitCode::SUCCESS
            } else {
                std::process::ExitCode::FAILURE
            })
        }
        Cmd::Bench { which } => match which {
            BenchCmd::Convoy { m, clients, lambda_s, lambda_f, seed, out } => {
                let ms: Vec<u64> = m
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|e| format!("bad M {x}: {e}")))
                    .collect::<Result<_, _>>()?;
                let (lo, hi) = parse_range(&clients)?;
                let mut csv = String::from("m,clients,latency,approx\n");
                for &m in &ms {
                    for n in lo..=hi {
                        let cfg = ConvoyCfg {
                            clients: n,
                            m,
                            lambda_s,
                            lambda_f,
                            ops_per_client: 4000,
                            seed,
                        };
                        let lat = convoy_mean_latency(&cfg);
                        csv.push_str(&format!("{m},{n},{lat:.4},{:.4}\n", cfg.approx()));
                    }
                }
                match out {
                    Some(path) => std::fs::write(&path, csv).map_err(|e| e.to_string())?,
                    None => print!("{csv}"),
                }
                Ok(std::process::ExitCode::SUCCESS)
            }
        },
    }
}
