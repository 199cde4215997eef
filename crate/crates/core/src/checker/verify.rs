//! Checking whole classes: failure scenarios, dependency outcomes, runs per
//! routed prefix, forwarding composition and policies.

use super::failures::{enumerate_failures, node_signatures};
use super::search::{Emitted, Reductions, Search, SearchConfig, SearchStats, SourcePrune};
use super::trail::{RunSteps, Trail};
use crate::depgraph::{ChoiceLog, ConvergedOutcome, OutcomeStore, Pick, SccGroup, Schedule, StoreError};
use crate::fib::{ConvergedRun, FibBuilder, FibDiagnostic, ForwardingGraph};
use crate::netmodel::{LinkId, NetworkConfig, NodeId, Prefix, Protocol, ProtocolInstance, Topology};
use crate::pec::PecTable;
use crate::policy::{check, equivalence_key, CheckInput, CheckResult, EquivalenceKey, Policy};
use crate::rpvp::Best;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("device-class failure reduction cannot be used for group {0}: it has cross-class dependencies")]
    DecWithDependencies(usize),
    #[error("replaying a trail failed: {0}")]
    Replay(#[from] crate::rpvp::RpvpError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct CheckerOptions {
    pub max_failures: usize,
    pub reductions: Reductions,
    pub policy_prune: bool,
    /// One representative link per link class when picking failures.
    pub dec: bool,
    /// Bloom filter bits; None for exact state sets.
    pub bitstate: Option<u64>,
    pub parallel: usize,
    /// Equal-cost OSPF next hops are all installed.
    pub ospf_multipath: bool,
    /// Store outcomes of every group, not only those something depends on.
    pub keep_all: bool,
}

impl Default for CheckerOptions {
    fn default() -> Self {
        CheckerOptions {
            max_failures: 0,
            reductions: Reductions::ALL,
            policy_prune: true,
            dec: false,
            bitstate: None,
            parallel: 1,
            ospf_multipath: true,
            keep_all: false,
        }
    }
}

/// The parsed network and its class structure.
pub struct Network<'a> {
    pub topo: &'a Topology,
    pub config: &'a NetworkConfig,
    pub pecs: &'a PecTable,
    pub schedule: &'a Schedule,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Pass,
    Violation(Box<Trail>),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn trail(&self) -> Option<&Trail> {
        match self {
            Verdict::Violation(t) => Some(t),
            Verdict::Pass => None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CheckStats {
    pub scenarios: u64,
    pub combinations: u64,
    pub policy_checks: u64,
    pub policy_cache_hits: u64,
    pub outcomes_stored: u64,
    pub search: SearchStats,
    pub wall_ms: u128,
}

impl CheckStats {
    fn add(&mut self, o: &CheckStats) {
        self.scenarios += o.scenarios;
        self.combinations += o.combinations;
        self.policy_checks += o.policy_checks;
        self.policy_cache_hits += o.policy_cache_hits;
        self.outcomes_stored += o.outcomes_stored;
        self.search.add(&o.search);
    }
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub group: usize,
    pub pecs: Vec<usize>,
    pub verdict: Verdict,
    pub stats: CheckStats,
    pub diagnostics: BTreeSet<FibDiagnostic>,
    /// Scenarios checked (or skipped by an earlier violation).
    pub scenarios: Vec<Vec<LinkId>>,
}

/// One run: a (prefix, protocol) pair of some class in the group.
struct RunSpec {
    pec: usize,
    prefix: Prefix,
    protocol: Protocol,
}

fn run_specs(net: &Network, group: &SccGroup) -> Vec<RunSpec> {
    let mut out = Vec::new();
    for &pec in &group.pecs {
        for (prefix, obj) in net.pecs.get(pec).config.routed_prefixes() {
            for proto in obj.originators.keys() {
                if matches!(proto, Protocol::Ospf | Protocol::Bgp) {
                    out.push(RunSpec { pec, prefix, protocol: *proto });
                }
            }
        }
    }
    out
}

fn applicable<'p>(policies: &'p [Policy], net: &Network, group: &SccGroup) -> Vec<(usize, &'p Policy)> {
    policies
        .iter()
        .enumerate()
        .filter(|(_, p)| group.pecs.iter().any(|c| p.applies_to(net.pecs.get(*c))))
        .collect()
}

/// Failure scenarios for a group under the options.
pub fn scenarios_for(
    net: &Network,
    group: &SccGroup,
    policies: &[Policy],
    opts: &CheckerOptions,
) -> Result<Vec<Vec<LinkId>>, CheckError> {
    if !opts.dec || opts.max_failures == 0 {
        return Ok(enumerate_failures::<u8>(net.topo, opts.max_failures, None));
    }
    if group.recursive
        || !group.deps.is_empty()
        || net.schedule.has_dependents(group.id)
        || group.pecs.len() != 1
    {
        return Err(CheckError::DecWithDependencies(group.id));
    }
    let interesting: BTreeSet<NodeId> =
        applicable(policies, net, group).iter().flat_map(|(_, p)| p.referenced_nodes()).collect();
    let sig = node_signatures(net.topo, net.config, net.pecs.get(group.pecs[0]), &interesting);
    Ok(enumerate_failures(net.topo, opts.max_failures, Some(&sig[..])))
}

struct Ctx<'a> {
    net: &'a Network<'a>,
    group: &'a SccGroup,
    policies: Vec<(usize, &'a Policy)>,
    opts: &'a CheckerOptions,
    store: &'a OutcomeStore,
    keep: bool,
}

struct ScenarioResult {
    violation: Option<Box<Trail>>,
    stats: CheckStats,
    diagnostics: BTreeSet<FibDiagnostic>,
}

/// Checks one group in every scenario. Dependency groups must already be
/// in `store`.
pub fn verify_group(
    net: &Network,
    group: &SccGroup,
    policies: &[Policy],
    opts: &CheckerOptions,
    store: &OutcomeStore,
) -> Result<GroupReport, CheckError> {
    let start = Instant::now();
    let scenarios = scenarios_for(net, group, policies, opts)?;
    let keep = opts.keep_all || net.schedule.has_dependents(group.id);
    if keep {
        store.open_group(group.id)?;
    }
    let ctx = Ctx { net, group, policies: applicable(policies, net, group), opts, store, keep };
    let first_bad = AtomicUsize::new(usize::MAX);
    let work = |i: usize, failures: &Vec<LinkId>| -> Option<Result<ScenarioResult, CheckError>> {
        if i > first_bad.load(Ordering::SeqCst) {
            return None;
        }
        let r = check_scenario(&ctx, failures);
        if let Ok(ScenarioResult { violation: Some(_), .. }) = &r {
            first_bad.fetch_min(i, Ordering::SeqCst);
        }
        Some(r)
    };
    let results: Vec<Option<Result<ScenarioResult, CheckError>>> = if opts.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel)
            .build()
            .map_err(|e| CheckError::Pool(e.to_string()))?;
        pool.install(|| scenarios.par_iter().enumerate().map(|(i, f)| work(i, f)).collect())
    } else {
        let mut out = Vec::new();
        for (i, f) in scenarios.iter().enumerate() {
            let r = work(i, f);
            let stop = matches!(&r, Some(Ok(ScenarioResult { violation: Some(_), .. })) | Some(Err(_)));
            out.push(r);
            if stop {
                break;
            }
        }
        out
    };
    let mut stats = CheckStats::default();
    let mut diagnostics = BTreeSet::new();
    let mut verdict = Verdict::Pass;
    for r in results.into_iter().flatten() {
        let r = r?;
        stats.add(&r.stats);
        diagnostics.extend(r.diagnostics);
        if let (Verdict::Pass, Some(t)) = (&verdict, r.violation) {
            verdict = Verdict::Violation(t);
        }
    }
    stats.wall_ms = start.elapsed().as_millis();
    Ok(GroupReport { group: group.id, pecs: group.pecs.clone(), verdict, stats, diagnostics, scenarios })
}

fn check_scenario(ctx: &Ctx, failures: &[LinkId]) -> Result<ScenarioResult, CheckError> {
    let net = ctx.net;
    let mut stats = CheckStats { scenarios: 1, ..Default::default() };
    let mut diagnostics = BTreeSet::new();

    // every combination of one outcome per dependency group
    let mut combos: Vec<Vec<ConvergedOutcome>> = vec![vec![]];
    for d in &ctx.group.deps {
        let outs = ctx.store.load_matching(*d, failures)?;
        combos = combos
            .into_iter()
            .flat_map(|c| {
                outs.iter().map(move |o| {
                    let mut c = c.clone();
                    c.push(o.clone());
                    c
                })
            })
            .collect();
    }

    let specs = run_specs(net, ctx.group);
    let failed: BTreeSet<LinkId> = failures.iter().copied().collect();
    let mut seen_keys: HashSet<(usize, usize, EquivalenceKey)> = HashSet::new();
    let mut stored: HashSet<String> = HashSet::new();

    for combo in combos {
        let external: BTreeMap<usize, ForwardingGraph> =
            combo.iter().flat_map(|o| o.forwarding.iter().map(|(k, v)| (*k, v.clone()))).collect();
        let dependencies: Vec<String> = combo.iter().map(|o| o.id()).collect();
        let insts: Vec<ProtocolInstance> =
            specs.iter().map(|s| instance(net, ctx.opts, s, &external, failures)).collect();

        let prune = source_prune(ctx, &specs);
        let mut per_run: Vec<Vec<Emitted>> = Vec::new();
        for inst in &insts {
            let cfg = SearchConfig {
                reductions: ctx.opts.reductions,
                prune: prune.clone(),
                bitstate: ctx.opts.bitstate,
                failed: failures.to_vec(),
            };
            let mut found: Vec<Emitted> = Vec::new();
            let mut distinct: HashSet<Vec<Best>> = HashSet::new();
            let s = Search::new(inst, &cfg).run(&mut |e| {
                if distinct.insert(e.best.clone()) {
                    found.push(e.clone());
                }
                ControlFlow::Continue(())
            });
            stats.search.add(&s);
            per_run.push(found);
        }

        // walk the cross product of run outcomes
        let mut idx = vec![0usize; per_run.len()];
        if per_run.iter().any(|r| r.is_empty()) {
            continue;
        }
        loop {
            stats.combinations += 1;
            let mut runs: BTreeMap<usize, Vec<ConvergedRun>> = BTreeMap::new();
            for (r, s) in specs.iter().enumerate() {
                runs.entry(s.pec).or_default().push(ConvergedRun {
                    prefix: s.prefix,
                    protocol: s.protocol,
                    best: per_run[r][idx[r]].best.clone(),
                });
            }
            for &pec in &ctx.group.pecs {
                runs.entry(pec).or_default();
            }
            let builder = FibBuilder {
                table: net.pecs,
                topo: net.topo,
                config: net.config,
                failed: &failed,
                runs: &runs,
                external: &external,
            };
            let mut forwarding = BTreeMap::new();
            for &pec in &ctx.group.pecs {
                let (g, d) = builder.build(pec);
                diagnostics.extend(d);
                forwarding.insert(pec, g);
            }
            for &pec in &ctx.group.pecs {
                let class = net.pecs.get(pec);
                let graph = &forwarding[&pec];
                let input =
                    CheckInput { topo: net.topo, pec: class, graph, runs: &runs[&pec], deps: &external };
                for &(pi, p) in &ctx.policies {
                    if !p.applies_to(class) {
                        continue;
                    }
                    if !seen_keys.insert((pi, pec, equivalence_key(p, &input))) {
                        stats.policy_cache_hits += 1;
                        continue;
                    }
                    stats.policy_checks += 1;
                    if let CheckResult::Fail(witness) = check(p, &input) {
                        let steps: Vec<(RunSteps, &ProtocolInstance)> = specs
                            .iter()
                            .enumerate()
                            .map(|(r, s)| {
                                let st = RunSteps {
                                    prefix: s.prefix,
                                    protocol: s.protocol,
                                    steps: per_run[r][idx[r]].steps.clone(),
                                };
                                (st, &insts[r])
                            })
                            .collect();
                        let events = Trail::events_for(failures, &steps)?;
                        let trail = Trail {
                            policy: p.name.clone(),
                            group: ctx.group.id,
                            pec,
                            failures: failures.to_vec(),
                            witness,
                            events,
                            data_plane: graph.clone(),
                            dependencies: dependencies.clone(),
                            runs: steps.into_iter().map(|(s, _)| s).collect(),
                        };
                        return Ok(ScenarioResult { violation: Some(Box::new(trail)), stats, diagnostics });
                    }
                }
            }
            if ctx.keep {
                let fp = serde_json::to_string(&(&dependencies, &forwarding)).expect("graphs serialize");
                if stored.insert(fp) {
                    let picks = specs
                        .iter()
                        .enumerate()
                        .flat_map(|(r, _)| {
                            per_run[r][idx[r]].steps.iter().map(move |s| Pick {
                                run: r,
                                node: s.node,
                                choice: s.choice,
                            })
                        })
                        .collect();
                    let choices =
                        ChoiceLog { failures: failures.to_vec(), dependencies: dependencies.clone(), picks };
                    ctx.store.store(&ConvergedOutcome { scc: ctx.group.id, choices, runs, forwarding })?;
                    stats.outcomes_stored += 1;
                }
            }
            // next combination
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < per_run[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    Ok(ScenarioResult { violation: None, stats, diagnostics })
}

fn instance(
    net: &Network,
    opts: &CheckerOptions,
    s: &RunSpec,
    external: &BTreeMap<usize, ForwardingGraph>,
    failures: &[LinkId],
) -> ProtocolInstance {
    let inst = match s.protocol {
        Protocol::Bgp => {
            let cost = |a: NodeId, b: NodeId| {
                let lb = net.topo.node(b).loopback?;
                external.get(&net.pecs.lookup(lb).id)?.path_cost(net.topo, a)
            };
            ProtocolInstance::bgp(net.topo, net.config, s.prefix, &cost)
        }
        _ => ProtocolInstance::ospf(net.topo, net.config, s.prefix, opts.ospf_multipath),
    };
    inst.with_failures(failures)
}

/// Source-based early finish applies to a single run with no statics and
/// nothing depending on the result, when every policy names its sources.
fn source_prune(ctx: &Ctx, specs: &[RunSpec]) -> Option<SourcePrune> {
    if !ctx.opts.policy_prune || specs.len() != 1 || ctx.keep || ctx.policies.is_empty() {
        return None;
    }
    let pec = ctx.net.pecs.get(specs[0].pec);
    if ctx.group.pecs.len() != 1 || pec.config.routed_prefixes().any(|(_, o)| !o.statics.is_empty()) {
        return None;
    }
    if ctx.opts.ospf_multipath && specs[0].protocol == Protocol::Ospf {
        return None;
    }
    let mut sources = BTreeSet::new();
    for (_, p) in &ctx.policies {
        match (&p.kind, &p.sources) {
            (crate::policy::PolicyKind::PathConsistency { devices }, _) => sources.extend(devices),
            (_, Some(s)) => sources.extend(s),
            (_, None) => return None,
        }
    }
    Some(SourcePrune { sources, restrict: true })
}

/// Result of checking every group in schedule order.
#[derive(Debug, Clone)]
pub struct NetworkReport {
    pub groups: Vec<GroupReport>,
    pub verdict: Verdict,
    pub stats: CheckStats,
}

/// Checks groups level by level, stopping after the first level with a
/// violation. Outcomes of groups with dependents go to `store`.
pub fn verify_network(
    net: &Network,
    policies: &[Policy],
    opts: &CheckerOptions,
    store: &OutcomeStore,
) -> Result<NetworkReport, CheckError> {
    let start = Instant::now();
    let mut groups = Vec::new();
    let mut stats = CheckStats::default();
    let mut verdict = Verdict::Pass;
    let max_level = net.schedule.groups.iter().map(|g| g.level).max().unwrap_or(0);
    for level in 0..=max_level {
        for g in net.schedule.groups.iter().filter(|g| g.level == level) {
            let r = verify_group(net, g, policies, opts, store)?;
            stats.add(&r.stats);
            if let (Verdict::Pass, Verdict::Violation(t)) = (&verdict, &r.verdict) {
                verdict = Verdict::Violation(t.clone());
            }
            groups.push(r);
        }
        if !verdict.is_pass() {
            break;
        }
    }
    stats.wall_ms = start.elapsed().as_millis();
    Ok(NetworkReport { groups, verdict, stats })
}
