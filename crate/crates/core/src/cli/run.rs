//! The `run`, `pec dump`, `fib dump` and `oracle` pipelines.

use super::input::{read_spec, InputError, LoadedNetwork};
use crate::checker::search::Reductions;
use crate::checker::verify::{
    verify_network, CheckError, CheckStats, CheckerOptions, Network, NetworkReport, Verdict,
};
use crate::depgraph::{
    build_dependency_graph, compute_schedule, DependencyGraph, OutcomeStore, Schedule, StoreError,
};
use crate::fib::{ForwardingGraph, FwdAction};
use crate::netmodel::{LinkId, NodeId, Prefix, Protocol, ProtocolInstance, Topology};
use crate::pec::PecTable;
use crate::spvp_oracle::{enumerate_converged, OracleOptions, OracleReport};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("no class with id {0}")]
    UnknownPec(usize),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("{0}")]
    Usage(String),
}

/// Command-line switches shared by the checking subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunFlags {
    /// Maximum simultaneous link failures (overrides the spec's environment).
    #[arg(long)]
    pub max_failures: Option<usize>,
    /// Worker threads across failure scenarios.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long)]
    pub no_det_nodes: bool,
    #[arg(long)]
    pub no_consistent_prune: bool,
    #[arg(long)]
    pub no_independence: bool,
    #[arg(long)]
    pub no_policy_prune: bool,
    /// Fail every link instead of one per link equivalence class.
    #[arg(long)]
    pub no_dec_opt: bool,
    /// Use a Bloom filter of this many bits for visited states.
    #[arg(long, value_name = "BITS")]
    pub bitstate: Option<u64>,
    /// Directory for converged outcomes; a temporary one when absent.
    #[arg(long, value_name = "PATH")]
    pub outcome_store: Option<PathBuf>,
    /// Fixed branch order (always on; accepted for compatibility).
    #[arg(long, default_value_t = true)]
    pub seedless: bool,
}

/// A loaded network with its classes and schedule.
pub struct Prepared {
    pub net: LoadedNetwork,
    pub pecs: PecTable,
    pub deps: DependencyGraph,
    pub schedule: Schedule,
}

impl Prepared {
    pub fn new(net: LoadedNetwork) -> Self {
        let pecs = PecTable::from_config(&net.topo, &net.config);
        let deps = build_dependency_graph(&pecs, &net.topo, &net.config);
        let schedule = compute_schedule(&deps);
        Prepared { net, pecs, deps, schedule }
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        Ok(Self::new(read_spec(path)?.load()?))
    }

    pub fn network(&self) -> Network<'_> {
        Network { topo: &self.net.topo, config: &self.net.config, pecs: &self.pecs, schedule: &self.schedule }
    }
}

/// Checker options from flags; the returned notices explain adjustments.
pub fn options_from(flags: &RunFlags, prepared: &Prepared) -> (CheckerOptions, Vec<String>) {
    let mut notices = Vec::new();
    let max_failures = flags.max_failures.unwrap_or(prepared.net.environment.max_failures);
    let mut dec = !flags.no_dec_opt;
    if dec && max_failures > 0 && !prepared.deps.is_edgeless() {
        notices.push("device equivalence disabled: classes depend on each other".to_string());
        dec = false;
    }
    let opts = CheckerOptions {
        max_failures,
        reductions: Reductions {
            consistent: !flags.no_consistent_prune,
            det_nodes: !flags.no_det_nodes,
            independence: !flags.no_independence,
        },
        policy_prune: !flags.no_policy_prune,
        dec,
        bitstate: flags.bitstate,
        parallel: flags.parallel.max(1),
        ospf_multipath: true,
        keep_all: false,
    };
    (opts, notices)
}

fn names(topo: &Topology, nodes: &[NodeId]) -> Vec<String> {
    nodes.iter().map(|n| topo.name(*n).to_string()).collect()
}

fn link_name(topo: &Topology, l: LinkId) -> String {
    let link = topo.link(l);
    format!("{}-{}", topo.name(link.a), topo.name(link.b))
}

pub struct RunOutcome {
    pub report: NetworkReport,
    pub verdicts: Value,
    pub stats: Value,
    pub notices: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.verdict.is_pass() {
            0
        } else {
            2
        }
    }
}

/// Checks every policy and builds the report documents.
pub fn check(prepared: &Prepared, flags: &RunFlags) -> Result<RunOutcome, RunError> {
    let (opts, notices) = options_from(flags, prepared);
    let tmp;
    let store = match &flags.outcome_store {
        Some(p) => OutcomeStore::new(p),
        None => {
            tmp = tempfile::tempdir()
                .map_err(|source| RunError::Output { path: std::env::temp_dir(), source })?;
            OutcomeStore::new(tmp.path())
        }
    };
    let report = verify_network(&prepared.network(), &prepared.net.policies, &opts, &store)?;
    let verdicts = verdicts_document(prepared, &report);
    let stats = stats_document(prepared, &report, &notices);
    Ok(RunOutcome { report, verdicts, stats, notices })
}

fn trail_file(group: usize) -> String {
    format!("trails/trail-{group}.json")
}

pub fn verdicts_document(prepared: &Prepared, report: &NetworkReport) -> Value {
    let topo = &prepared.net.topo;
    let groups: Vec<Value> = report
        .groups
        .iter()
        .map(|g| {
            let ranges: Vec<String> = g
                .pecs
                .iter()
                .flat_map(|p| prepared.pecs.get(*p).ranges.iter().map(|r| r.to_string()))
                .collect();
            let mut v = json!({
                "group": g.group,
                "pecs": g.pecs,
                "ranges": ranges,
                "verdict": if g.verdict.is_pass() { "pass" } else { "violation" },
                "scenarios": g.scenarios.len(),
            });
            if let Some(t) = g.verdict.trail() {
                v["policy"] = json!(t.policy);
                v["trail"] = json!(trail_file(g.group));
            }
            v
        })
        .collect();
    let mut doc = json!({
        "verdict": if report.verdict.is_pass() { "pass" } else { "violation" },
        "policies": prepared.net.policies.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
        "groups": groups,
    });
    if let Some(t) = report.verdict.trail() {
        doc["violation"] = json!({
            "policy": t.policy,
            "group": t.group,
            "pec": t.pec,
            "failures": t.failures.iter().map(|l| link_name(topo, *l)).collect::<Vec<_>>(),
            "source": t.witness.source.map(|s| topo.name(s).to_string()),
            "path": names(topo, &t.witness.path),
            "detail": t.witness.detail,
            "trail": trail_file(t.group),
        });
    }
    doc
}

#[derive(Serialize)]
struct GroupStats<'a> {
    group: usize,
    stats: &'a CheckStats,
}

pub fn stats_document(prepared: &Prepared, report: &NetworkReport, notices: &[String]) -> Value {
    let groups: Vec<GroupStats> =
        report.groups.iter().map(|g| GroupStats { group: g.group, stats: &g.stats }).collect();
    json!({
        "pecs": prepared.pecs.len(),
        "groups": prepared.schedule.groups.len(),
        "dependency_edges": prepared.deps.edges.len(),
        "total": report.stats,
        "per_group": groups,
        "diagnostics": report.groups.iter().flat_map(|g| g.diagnostics.iter().cloned()).collect::<Vec<_>>(),
        "notices": notices,
    })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), RunError> {
    let out = |source| RunError::Output { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(out)?;
    }
    let mut text = serde_json::to_string_pretty(v).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(out)
}

/// Writes verdicts.json, stats.json and one trail file per violation.
pub fn write_outputs(outcome: &RunOutcome, out_dir: &Path) -> Result<(), RunError> {
    write_json(&out_dir.join("verdicts.json"), &outcome.verdicts)?;
    write_json(&out_dir.join("stats.json"), &outcome.stats)?;
    for g in &outcome.report.groups {
        if let Verdict::Violation(t) = &g.verdict {
            write_json(&out_dir.join(trail_file(g.group)), &t.events)?;
        }
    }
    Ok(())
}

/// One converged forwarding graph per class, without failures.
pub fn first_forwarding(prepared: &Prepared) -> Result<Vec<ForwardingGraph>, RunError> {
    let opts = CheckerOptions { keep_all: true, ..Default::default() };
    let dir =
        tempfile::tempdir().map_err(|source| RunError::Output { path: std::env::temp_dir(), source })?;
    let store = OutcomeStore::new(dir.path());
    verify_network(&prepared.network(), &[], &opts, &store)?;
    let mut out = Vec::new();
    for pec in &prepared.pecs.pecs {
        let g = prepared.schedule.group(pec.id).id;
        let outcomes = store.load_matching(g, &[])?;
        match outcomes.iter().find_map(|o| o.forwarding.get(&pec.id)) {
            Some(f) => out.push(f.clone()),
            None => out.push(ForwardingGraph { pec: pec.id, entries: vec![] }),
        }
    }
    Ok(out)
}

/// A forwarding graph as JSON with node names:
/// `{pec, ranges, nodes: {name: {action, next_hops?, prefix?, source?}}}`.
pub fn forwarding_json(topo: &Topology, pecs: &PecTable, g: &ForwardingGraph) -> Value {
    let ranges: Vec<String> = pecs.get(g.pec).ranges.iter().map(|r| r.to_string()).collect();
    let mut nodes = serde_json::Map::new();
    for (i, e) in g.entries.iter().enumerate() {
        let mut v = match &e.action {
            FwdAction::Forward(h) => json!({"action": "forward", "next_hops": names(topo, h)}),
            FwdAction::Local => json!({"action": "local"}),
            FwdAction::Drop => json!({"action": "drop"}),
        };
        if let Some(p) = e.prefix {
            v["prefix"] = json!(p);
        }
        if let Some(src) = e.source {
            v["source"] = json!(src);
        }
        nodes.insert(topo.name(NodeId(i as u32)).to_string(), v);
    }
    json!({"pec": g.pec, "ranges": ranges, "converged": !g.entries.is_empty(), "nodes": nodes})
}

/// Enumerates message-passing executions for one prefix.
pub fn oracle(
    prepared: &Prepared,
    prefix: Prefix,
    protocol: Protocol,
    failures: &[String],
    opts: OracleOptions,
) -> Result<OracleReport, RunError> {
    let topo = &prepared.net.topo;
    let mut failed = Vec::new();
    for f in failures {
        let (a, b) = f.split_once('-').ok_or_else(|| RunError::UnknownLink(f.clone()))?;
        let l = match (topo.node_by_name(a), topo.node_by_name(b)) {
            (Some(a), Some(b)) => topo.link_between(a, b),
            _ => None,
        };
        failed.push(l.ok_or_else(|| RunError::UnknownLink(f.clone()))?);
    }
    failed.sort();
    let inst = match protocol {
        Protocol::Bgp => {
            // loopback iBGP sessions come up only between adjacent routers here
            let cost = |a: NodeId, b: NodeId| topo.link_between(a, b).map(|l| topo.link(l).cost);
            ProtocolInstance::bgp(topo, &prepared.net.config, prefix, &cost)
        }
        Protocol::Ospf => ProtocolInstance::ospf(topo, &prepared.net.config, prefix, false),
        Protocol::Static => return Err(RunError::Usage("static routes have no protocol run".into())),
    };
    let r = enumerate_converged(&inst, &failed, opts);
    Ok(OracleReport::from(&r))
}
