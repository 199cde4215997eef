use clap::{Parser, Subcommand};
use cpcheck::cli::gen::{self, StaticMode};
use cpcheck::cli::run::{self, Prepared, RunError, RunFlags};
use cpcheck::netmodel::{Prefix, Protocol};
use cpcheck::spvp_oracle::OracleOptions;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cpcheck",
    version,
    about = "Exhaustively check control-plane configurations against forwarding policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every policy in the spec; exit 0 on pass, 2 on a violation.
    Run {
        spec: PathBuf,
        /// Directory for verdicts.json, stats.json and trails/.
        #[arg(long, short, default_value = "cpcheck-out")]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Show packet equivalence classes.
    Pec {
        #[command(subcommand)]
        what: DumpCmd,
    },
    /// Show one converged forwarding graph per class.
    Fib {
        #[command(subcommand)]
        what: DumpCmd,
    },
    /// Enumerate message-level executions for one prefix.
    Oracle {
        spec: PathBuf,
        #[arg(long)]
        prefix: Prefix,
        #[arg(long, value_enum, default_value = "bgp")]
        protocol: ProtoArg,
        /// Failed links as `a-b`.
        #[arg(long)]
        fail: Vec<String>,
        /// Inject the failures during the run instead of before it.
        #[arg(long)]
        mid_run: bool,
    },
    /// Print a generated network spec.
    Gen {
        #[command(subcommand)]
        family: GenCmd,
    },
}

#[derive(Subcommand)]
enum DumpCmd {
    Dump {
        spec: PathBuf,
        /// Only this class.
        #[arg(long)]
        pec: Option<usize>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProtoArg {
    Bgp,
    Ospf,
}

#[derive(Subcommand)]
enum GenCmd {
    FatTree {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, value_enum, default_value = "none")]
        statics: StaticMode,
    },
    Ring {
        #[arg(long)]
        n: usize,
    },
    Line {
        #[arg(long)]
        n: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<u8, RunError> {
    match cli.command {
        Command::Run { spec, out, flags } => {
            let prepared = Prepared::load(&spec)?;
            let outcome = run::check(&prepared, &flags)?;
            for n in &outcome.notices {
                log::warn!("{n}");
            }
            run::write_outputs(&outcome, &out)?;
            println!("{}", outcome.verdicts["verdict"].as_str().unwrap_or("unknown"));
            if let Some(v) = outcome.verdicts.get("violation") {
                println!("{}", serde_json::to_string_pretty(v).expect("json"));
            }
            Ok(outcome.exit_code() as u8)
        }
        Command::Pec { what: DumpCmd::Dump { spec, pec } } => {
            let prepared = Prepared::load(&spec)?;
            for row in prepared.pecs.dump_rows() {
                if pec.map_or(true, |p| p == row.id) {
                    println!("{}", serde_json::to_string(&row).expect("json"));
                }
            }
            Ok(0)
        }
        Command::Fib { what: DumpCmd::Dump { spec, pec } } => {
            let prepared = Prepared::load(&spec)?;
            if let Some(p) = pec {
                if p >= prepared.pecs.len() {
                    return Err(RunError::UnknownPec(p));
                }
            }
            for g in run::first_forwarding(&prepared)? {
                if pec.map_or(true, |p| p == g.pec) {
                    let v = run::forwarding_json(&prepared.net.topo, &prepared.pecs, &g);
                    println!("{}", serde_json::to_string(&v).expect("json"));
                }
            }
            Ok(0)
        }
        Command::Oracle { spec, prefix, protocol, fail, mid_run } => {
            let prepared = Prepared::load(&spec)?;
            let protocol = match protocol {
                ProtoArg::Bgp => Protocol::Bgp,
                ProtoArg::Ospf => Protocol::Ospf,
            };
            let opts = OracleOptions { failures_mid_run: mid_run, ..Default::default() };
            let report = run::oracle(&prepared, prefix, protocol, &fail, opts)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
            Ok(0)
        }
        Command::Gen { family } => {
            let spec = match family {
                GenCmd::FatTree { k, statics } => {
                    if k < 2 || k % 2 != 0 {
                        return Err(RunError::Usage("fat tree k must be even and at least 2".into()));
                    }
                    gen::fat_tree(k, statics)
                }
                GenCmd::Ring { n } => gen::ring(n),
                GenCmd::Line { n } => gen::line(n),
            };
            println!("{}", serde_json::to_string_pretty(&spec).expect("json"));
            Ok(0)
        }
    }
}
