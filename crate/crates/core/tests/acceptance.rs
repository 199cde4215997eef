//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

mod common;

use cpcheck::checker::intern::key_of_slots;
use cpcheck::checker::trail::replay;
use cpcheck::checker::{converged_set, Reductions, RouteEntryTable, SearchConfig, Verdict, VisitedSet};
use cpcheck::cli::gen::{fat_tree, StaticMode};
use cpcheck::cli::input::{parse_spec, NetworkSpecFile};
use cpcheck::cli::run::{check, first_forwarding, Prepared, RunFlags};
use cpcheck::fib::{ConvergedRun, FibBuilder, FwdAction, TraceEnd};
use cpcheck::gadgets::disagree;
use cpcheck::netmodel::{parse_address, LinkId, NodeId, Protocol, ProtocolInstance, RouteEntry, SessionKind};
use cpcheck::pec::PecTable;
use cpcheck::policy::{check as check_policy, CheckInput, CheckResult};
use cpcheck::rpvp::{analyze, apply_step, Best, ProtocolState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn data(name: &str) -> NetworkSpecFile {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    let text = std::fs::read_to_string(&path).expect("fixture");
    parse_spec(&text, &path).expect("fixture parses")
}

fn prepared(spec: &NetworkSpecFile) -> Prepared {
    Prepared::new(spec.load().expect("spec loads"))
}

fn flags(k: usize, dec: bool) -> RunFlags {
    RunFlags { max_failures: Some(k), parallel: 1, no_dec_opt: !dec, ..RunFlags::default() }
}

fn set(v: Vec<Vec<Best>>) -> HashSet<Vec<Best>> {
    v.into_iter().collect()
}

fn pec_ranges(table: &PecTable) -> BTreeSet<String> {
    table.pecs.iter().flat_map(|p| p.ranges.iter().map(|r| r.to_string())).collect()
}

// 1: two overlapping OSPF prefixes split the space into three classes.
fn prefix_classes() -> Outcome {
    let spec = parse_spec(
        r#"{
            "nodes": [{"id": "a"}, {"id": "b"}, {"id": "c"}],
            "links": [{"a": "a", "b": "b"}, {"a": "b", "b": "c"}],
            "ospf": {"a": {"prefixes": ["128.0.0.0/1"]}, "b": {"prefixes": ["192.0.0.0/2"]}, "c": {}}
        }"#,
        Path::new("inline"),
    )
    .map_err(|e| e.to_string())?;
    let net = spec.load().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let table = PecTable::from_config(&net.topo, &net.config);
    let elapsed = start.elapsed();
    let expected: BTreeSet<String> =
        ["[0.0.0.0, 127.255.255.255]", "[128.0.0.0, 191.255.255.255]", "[192.0.0.0, 255.255.255.255]"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    ensure!(table.len() == 3, "{} classes", table.len());
    ensure!(pec_ranges(&table) == expected, "ranges {:?}", pec_ranges(&table));
    let mut origins = Vec::new();
    for p in &table.pecs {
        let nodes: BTreeSet<NodeId> = p
            .config
            .routed_prefixes()
            .flat_map(|(_, o)| o.originators.values().flatten().copied().collect::<Vec<_>>())
            .collect();
        origins.push((p.ranges[0].to_string(), nodes.len()));
    }
    origins.sort();
    let counts: Vec<usize> = origins.iter().map(|o| o.1).collect();
    ensure!(counts == vec![0, 1, 2], "origins per class {:?}", origins);
    ensure!(elapsed < Duration::from_secs(1), "took {:?}", elapsed);
    Ok(format!("3 classes, origins 0/1/2, {:?}", elapsed))
}

struct Corpus {
    cases: Vec<common::Case>,
    truncated: usize,
    oracle_sets: Vec<HashSet<Vec<Best>>>,
    oracle_time: Duration,
}

fn corpus() -> Corpus {
    let start = Instant::now();
    let mut c = Corpus { cases: vec![], truncated: 0, oracle_sets: vec![], oracle_time: Duration::ZERO };
    for seed in 0..300 {
        for case in common::random_cases(seed) {
            let r = case.oracle(false);
            if r.truncated {
                c.truncated += 1;
                continue;
            }
            c.oracle_sets.push(r.converged);
            c.cases.push(case);
        }
    }
    c.oracle_time = start.elapsed();
    c
}

// 2: the checker's converged sets equal the message-level oracle's.
fn oracle_equivalence(c: &Corpus) -> Outcome {
    let start = Instant::now();
    ensure!(c.cases.len() >= 200, "only {} usable instances", c.cases.len());
    let mut several = 0;
    for (case, want) in c.cases.iter().zip(&c.oracle_sets) {
        let got = case.checker_set(Reductions::ALL);
        ensure!(&got == want, "seed {}: checker {} states, oracle {}", case.seed, got.len(), want.len());
        several += (got.len() > 1) as usize;
    }
    let total = c.oracle_time + start.elapsed();
    ensure!(total < Duration::from_secs(300), "took {:?}", total);
    Ok(format!(
        "{} instances equal ({} with several converged states, {} skipped as truncated), {:?}",
        c.cases.len(),
        several,
        c.truncated,
        total
    ))
}

// 3: failing links mid-run reaches the same converged states as failing them first.
fn mid_run_failures(c: &Corpus) -> Outcome {
    let mut n = 0;
    for (case, at_start) in c.cases.iter().zip(&c.oracle_sets) {
        if case.failures.is_empty() {
            continue;
        }
        let mid = case.oracle(true);
        if mid.truncated {
            continue;
        }
        ensure!(
            &mid.converged == at_start,
            "seed {}: {} vs {}",
            case.seed,
            mid.converged.len(),
            at_start.len()
        );
        n += 1;
    }
    ensure!(n >= 50, "only {n} instances with a failure");
    Ok(format!("{n} instances with one failure agree"))
}

fn ospf_ring(n: usize) -> ProtocolInstance {
    let mut b =
        ProtocolInstance::builder(Protocol::Ospf, "10.0.0.0/24".parse().unwrap(), n).origin(NodeId(0));
    for i in 0..n {
        b = b.session(NodeId(i as u32), NodeId(((i + 1) % n) as u32), None, 1, Some(LinkId(i as u32)));
    }
    b.build()
}

// 4: each reduction preserves the converged set and never explores more.
fn reductions_sound(c: &Corpus) -> Outcome {
    let variants = [
        ("no consistent pruning", Reductions { consistent: false, ..Reductions::ALL }),
        ("no deterministic nodes", Reductions { det_nodes: false, ..Reductions::ALL }),
        ("no independence", Reductions { independence: false, ..Reductions::ALL }),
        ("none", Reductions::NONE),
    ];
    for case in &c.cases {
        let inst = case.failed_instance();
        let (all, st) = converged_set(&inst, &case.config(Reductions::ALL));
        let all = set(all);
        for (name, red) in variants {
            let (other, st2) = converged_set(&inst, &case.config(red));
            ensure!(set(other) == all, "seed {}: {name} changes the converged set", case.seed);
            ensure!(
                st.states_explored <= st2.states_explored,
                "seed {}: {} states with all reductions, {} with {name}",
                case.seed,
                st.states_explored,
                st2.states_explored
            );
        }
    }
    let ring = ospf_ring(16);
    let (mut on, mut off) = (0, 0);
    for l in 0..16 {
        let failed = vec![LinkId(l)];
        let inst = ring.with_failures(&failed);
        let mut sets = Vec::new();
        for (red, total) in [(Reductions::ALL, &mut on), (Reductions::NONE, &mut off)] {
            let mut cfg = SearchConfig::new(red);
            cfg.failed = failed.clone();
            let (s, st) = converged_set(&inst, &cfg);
            *total += st.states_explored;
            sets.push(set(s));
        }
        ensure!(sets[0] == sets[1], "ring with link {l} failed: sets differ");
    }
    let ratio = off as f64 / on as f64;
    ensure!(ratio >= 2.0, "16-node ring, one failure: {off} vs {on} states ({ratio:.2}x)");
    Ok(format!(
        "{} instances x 4 variants; 16-node ring over all single failures {off} -> {on} states ({ratio:.2}x)",
        c.cases.len()
    ))
}

// 5: DISAGREE has two stable states; the wedgie splits a waypoint policy.
fn gadgets() -> Outcome {
    let inst = disagree();
    for red in [Reductions::ALL, Reductions::NONE] {
        let (s, _) = converged_set(&inst, &SearchConfig::new(red));
        ensure!(set(s).len() == 2, "DISAGREE does not have 2 converged states");
    }

    let p = prepared(&data("wedgie.json"));
    let topo = &p.net.topo;
    let (a, b, o) =
        (topo.node_by_name("a").unwrap(), topo.node_by_name("b").unwrap(), topo.node_by_name("o").unwrap());
    let policy = &p.net.policies[0];
    let prefix = policy.prefix.unwrap();
    let class = p.pecs.lookup(prefix.addr());
    let bgp = ProtocolInstance::bgp(topo, &p.net.config, prefix, &|_, _| None);
    let (states, _) = converged_set(&bgp, &SearchConfig::new(Reductions::ALL));
    let mut verdicts = BTreeSet::new();
    let none = BTreeMap::new();
    for best in &states {
        let runs = BTreeMap::from([(
            class.id,
            vec![ConvergedRun { prefix, protocol: Protocol::Bgp, best: best.clone() }],
        )]);
        let failed = BTreeSet::new();
        let fib = FibBuilder {
            table: &p.pecs,
            topo,
            config: &p.net.config,
            failed: &failed,
            runs: &runs,
            external: &none,
        };
        let (graph, _) = fib.build(class.id);
        let r = check_policy(
            policy,
            &CheckInput { topo, pec: class, graph: &graph, runs: &runs[&class.id], deps: &none },
        );
        verdicts.insert(matches!(r, CheckResult::Pass));
    }
    ensure!(states.len() == 2, "wedgie has {} converged states", states.len());
    ensure!(verdicts.len() == 2, "waypoint verdict is the same in every converged state");

    let out = check(&p, &flags(0, false)).map_err(|e| e.to_string())?;
    let Verdict::Violation(trail) = &out.report.verdict else {
        return Err("wedgie reported as passing".into());
    };
    ensure!(trail.witness.source == Some(b), "witness source {:?}", trail.witness.source);
    ensure!(!trail.witness.path.contains(&a), "witness path {:?} passes the waypoint", trail.witness.path);
    ensure!(!trail.events.is_empty() && trail.runs.len() == 1, "empty trail");
    let run = &trail.runs[0];
    let inst = ProtocolInstance::bgp(topo, &p.net.config, run.prefix, &|_, _| None);
    let end = replay(&inst, &run.steps).map_err(|e| e.to_string())?;
    let hop = end.get(b).primary().and_then(|r| r.head());
    ensure!(hop == Some(o), "replayed trail leaves b with next hop {hop:?}");
    Ok(format!(
        "DISAGREE 2 states; wedgie 2 states, waypoint pass/fail split, trail of {} events replays to b -> o",
        trail.events.len()
    ))
}

// 6: fat tree with static routes, correct and corrupted.
fn fat_tree_statics() -> Outcome {
    let start = Instant::now();
    let good =
        check(&prepared(&fat_tree(4, StaticMode::Correct)), &flags(1, true)).map_err(|e| e.to_string())?;
    ensure!(good.report.verdict.is_pass(), "correct fat tree reported a violation");
    let bad_net = prepared(&fat_tree(4, StaticMode::Corrupt));
    ensure!(bad_net.net.topo.node_count() == 20, "{} nodes", bad_net.net.topo.node_count());
    let bad = check(&bad_net, &flags(1, true)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let Verdict::Violation(t) = &bad.report.verdict else {
        return Err("corrupted fat tree passes".into());
    };
    let path = &t.witness.path;
    let last = *path.last().ok_or("empty witness")?;
    ensure!(path[..path.len() - 1].contains(&last), "witness {:?} is not a cycle", path);
    let src = t.witness.source.ok_or("no source")?;
    let cycle = t.data_plane.traces(src).into_iter().find(|tr| tr.end == TraceEnd::Loop);
    ensure!(cycle.is_some(), "trail data plane has no loop from the source");
    ensure!(elapsed < Duration::from_secs(10), "took {:?}", elapsed);
    let names: Vec<&str> = path.iter().map(|n| bad_net.net.topo.name(*n)).collect();
    Ok(format!("correct: pass; corrupted: loop {} ; both with K=1 in {:?}", names.join("->"), elapsed))
}

// 7: iBGP over OSPF on four routers.
fn ibgp_over_ospf() -> Outcome {
    let spec = data("ibgp4.json");
    let p = prepared(&spec);
    let topo = &p.net.topo;
    let node = |s: &str| topo.node_by_name(s).unwrap();
    let addr = |s: &str| parse_address(s).unwrap();
    let loop_pecs: BTreeSet<usize> =
        (1..=4).map(|i| p.pecs.lookup(addr(&format!("192.168.0.{i}"))).id).collect();
    let bgp_pecs: BTreeSet<usize> =
        ["100.0.0.1", "200.0.0.1"].iter().map(|a| p.pecs.lookup(addr(a)).id).collect();
    let level = |pec: usize| p.schedule.group(pec).level;
    let lo_max = loop_pecs.iter().map(|c| level(*c)).max().unwrap();
    let bgp_min = bgp_pecs.iter().map(|c| level(*c)).min().unwrap();
    ensure!(lo_max < bgp_min, "loopback level {lo_max} not before BGP level {bgp_min}");
    for c in &bgp_pecs {
        let deps: BTreeSet<usize> = p.deps.depends_on(*c).collect();
        ensure!(!deps.is_empty() && deps.is_subset(&loop_pecs), "class {c} depends on {:?}", deps);
    }

    let out = check(&p, &flags(1, true)).map_err(|e| e.to_string())?;
    ensure!(out.report.verdict.is_pass(), "ring with iBGP reported a violation");
    let order: Vec<usize> = out.report.groups.iter().map(|g| g.pecs[0]).collect();
    let first_bgp = order.iter().position(|c| bgp_pecs.contains(c)).unwrap();
    let last_lo = order.iter().rposition(|c| loop_pecs.contains(c)).unwrap();
    ensure!(last_lo < first_bgp, "check order {:?}", order);
    let stored: u64 = out
        .report
        .groups
        .iter()
        .filter(|g| loop_pecs.contains(&g.pecs[0]))
        .map(|g| g.stats.outcomes_stored)
        .sum();
    ensure!(stored > 0, "no loopback outcomes stored");

    // r1 without OSPF: its loopback is unrouted, so its iBGP sessions stay down
    let mut broken = spec.clone();
    broken.ospf.remove("r1");
    let bp = prepared(&broken);
    let bad = check(&bp, &flags(0, true)).map_err(|e| e.to_string())?;
    let Verdict::Violation(t) = &bad.report.verdict else {
        return Err("r1 without OSPF still passes".into());
    };
    ensure!(t.policy == "reach-100", "violated {}", t.policy);
    ensure!(t.witness.source.map_or(false, |s| s != node("r1")), "witness source {:?}", t.witness.source);

    // recursive next hops follow OSPF paths to the BGP next hop's loopback
    let fwd = first_forwarding(&p).map_err(|e| e.to_string())?;
    let hop = |pfx: &str, at: &str| -> Option<Vec<NodeId>> {
        let g = &fwd[p.pecs.lookup(addr(pfx)).id];
        match g.action(node(at)) {
            FwdAction::Forward(h) => Some(h.clone()),
            _ => None,
        }
    };
    let expect = [
        ("100.0.0.1", "r2", "r1"),
        ("100.0.0.1", "r3", "r2"),
        ("100.0.0.1", "r4", "r1"),
        ("200.0.0.1", "r1", "r4"),
        ("200.0.0.1", "r2", "r1"),
        ("200.0.0.1", "r3", "r2"),
    ];
    for (pfx, at, via) in expect {
        ensure!(hop(pfx, at) == Some(vec![node(via)]), "{pfx} at {at}: {:?}, expected {via}", hop(pfx, at));
    }
    Ok(format!(
        "loopbacks at levels <= {lo_max}, BGP at {bgp_min}; pass under K=1; r1 without OSPF violates reach-100; {} recursive hops match",
        expect.len()
    ))
}

/// Colour refinement by neighbour multisets, written independently of the
/// checker's partition code. Returns the number of unordered class pairs
/// joined by a link.
fn independent_link_classes(spec: &NetworkSpecFile, pec_addr: u32) -> usize {
    let names: Vec<&str> = spec.nodes.iter().map(|n| n.id.as_str()).collect();
    let idx: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut adj = vec![Vec::new(); names.len()];
    for l in &spec.links {
        let (a, b) = (idx[l.a.as_str()], idx[l.b.as_str()]);
        adj[a].push((b, l.cost));
        adj[b].push((a, l.cost));
    }
    let mut colour: Vec<usize> = names
        .iter()
        .map(|n| {
            let ospf = spec.ospf.get(*n);
            let originates = ospf.map_or(false, |o| o.prefixes.iter().any(|p| p.contains_addr(pec_addr)));
            (ospf.is_some() as usize) * 2 + originates as usize
        })
        .collect();
    loop {
        let sigs: Vec<(usize, Vec<(usize, u32)>)> = (0..names.len())
            .map(|i| {
                let mut m: Vec<(usize, u32)> = adj[i].iter().map(|(j, c)| (colour[*j], *c)).collect();
                m.sort();
                (colour[i], m)
            })
            .collect();
        let mut ids: BTreeMap<&(usize, Vec<(usize, u32)>), usize> = BTreeMap::new();
        for s in &sigs {
            let next = ids.len();
            ids.entry(s).or_insert(next);
        }
        let before = colour.iter().collect::<BTreeSet<_>>().len();
        let next: Vec<usize> = sigs.iter().map(|s| ids[s]).collect();
        let after = next.iter().collect::<BTreeSet<_>>().len();
        colour = next;
        if after == before {
            break;
        }
    }
    let pairs: BTreeSet<(usize, usize)> = spec
        .links
        .iter()
        .map(|l| {
            let (a, b) = (colour[idx[l.a.as_str()]], colour[idx[l.b.as_str()]]);
            (a.min(b), a.max(b))
        })
        .collect();
    pairs.len()
}

// 8: device equivalence keeps verdicts and cuts scenarios to one per link class.
fn device_equivalence() -> Outcome {
    let mut notes = Vec::new();
    for mode in [StaticMode::None, StaticMode::Correct, StaticMode::Corrupt] {
        let spec = fat_tree(4, mode);
        let p = prepared(&spec);
        let on = check(&p, &flags(1, true)).map_err(|e| e.to_string())?;
        let off = check(&p, &flags(1, false)).map_err(|e| e.to_string())?;
        ensure!(on.report.verdict.is_pass() == off.report.verdict.is_pass(), "{mode:?}: verdicts differ");
        let count =
            |r: &cpcheck::checker::NetworkReport| r.groups.iter().map(|g| g.scenarios.len()).sum::<usize>();
        let (n_on, n_off) = (count(&on.report), count(&off.report));
        ensure!(n_on < n_off, "{mode:?}: {n_on} scenarios with equivalence, {n_off} without");
        if mode == StaticMode::None {
            let expected: usize =
                p.pecs.pecs.iter().map(|c| 1 + independent_link_classes(&spec, c.representative())).sum();
            ensure!(n_on == expected, "{n_on} scenarios, independent refinement gives {expected}");
            notes.push(format!("plain {n_on} (expected {expected}) vs {n_off}"));
        } else {
            notes.push(format!("{mode:?} {n_on} vs {n_off}"));
        }
    }
    Ok(notes.join("; "))
}

fn bgp_grid(side: usize) -> ProtocolInstance {
    let n = side * side;
    let mut b = ProtocolInstance::builder(Protocol::Bgp, "10.0.0.0/8".parse().unwrap(), n).origin(NodeId(0));
    let mut link = 0;
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            b = b.asn(NodeId(i as u32), 100 + i as u32);
            for j in [(c + 1 < side).then(|| i + 1), (r + 1 < side).then(|| i + side)].into_iter().flatten() {
                b = b.session(
                    NodeId(i as u32),
                    NodeId(j as u32),
                    Some(SessionKind::Ebgp),
                    0,
                    Some(LinkId(link)),
                );
                link += 1;
            }
        }
    }
    b.build()
}

// 9: interning over a long scripted walk.
fn interning() -> Outcome {
    const STATES: usize = 1_000_000;
    let inst = bgp_grid(6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut table = RouteEntryTable::new();
    let mut visited = VisitedSet::exact();
    let mut distinct: HashSet<RouteEntry> = HashSet::new();
    let init = ProtocolState::initial(&inst);
    let mut state = init.clone();
    let mut full_bytes = 0usize;
    let mut steps = 0;
    while visited.len().unwrap_or(0) < STATES && steps < 10 * STATES {
        steps += 1;
        let status = analyze(&inst, &state);
        let enabled: Vec<usize> = (0..status.len()).filter(|i| status[*i].enabled()).collect();
        if enabled.is_empty() {
            state = init.clone();
        } else {
            let n = enabled[rng.gen_range(0..enabled.len())];
            let choices = status[n].choices(inst.multipath);
            let ch = choices[rng.gen_range(0..choices.len())];
            state = apply_step(&inst, &state, NodeId(n as u32), ch).map_err(|e| e.to_string())?;
            distinct.extend(state.get(NodeId(n as u32)).routes().iter().filter(|r| !r.is_epsilon()).cloned());
        }
        let slots = table.slots(&state);
        if !visited.insert(key_of_slots(&slots, &[])) {
            continue;
        }
        full_bytes += state
            .best
            .iter()
            .map(|b| b.routes().iter().map(|r| r.path.len() * 4 + 32).sum::<usize>())
            .sum::<usize>();
    }
    let stats = table.stats();
    let keys = visited.len().unwrap_or(0);
    ensure!(keys == STATES, "only {keys} distinct states in {steps} steps");
    ensure!(
        stats.entries == distinct.len(),
        "table holds {} entries, counted {}",
        stats.entries,
        distinct.len()
    );
    let per_state = visited.bytes() as f64 / keys as f64;
    ensure!(per_state <= 48.0, "{per_state:.1} bytes of key storage per state");
    ensure!(stats.entry_bytes < visited.bytes(), "entry storage {} exceeds key storage", stats.entry_bytes);
    Ok(format!(
        "{keys} distinct states in {steps} steps, {} entries = independent count, {per_state:.1} key bytes/state, entries {} KiB vs {} MiB uninterned",
        stats.entries,
        stats.entry_bytes / 1024,
        full_bytes >> 20
    ))
}

// 10: a Bloom-filter visited set under-approximates and rarely loses states.
fn bitstate(c: &Corpus) -> Outcome {
    let (mut equal, mut n) = (0, 0);
    for case in &c.cases {
        let inst = case.failed_instance();
        let exact = set(converged_set(&inst, &case.config(Reductions::ALL)).0);
        let mut cfg = case.config(Reductions::ALL);
        cfg.bitstate = Some(1 << 20);
        let approx = set(converged_set(&inst, &cfg).0);
        ensure!(
            approx.is_subset(&exact),
            "seed {}: bitstate found a state the exact search did not",
            case.seed
        );
        equal += (approx == exact) as usize;
        n += 1;
    }
    ensure!(equal * 100 >= n * 99, "equal on {equal} of {n}");
    Ok(format!("subset on {n}, equal on {equal} with 2^20 bits"))
}

fn main() {
    let corpus = corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("prefix classes", Box::new(prefix_classes)),
        ("oracle equivalence", Box::new(|| oracle_equivalence(&corpus))),
        ("mid-run failures", Box::new(|| mid_run_failures(&corpus))),
        ("reduction soundness", Box::new(|| reductions_sound(&corpus))),
        ("gadgets", Box::new(gadgets)),
        ("fat tree statics", Box::new(fat_tree_statics)),
        ("iBGP over OSPF", Box::new(ibgp_over_ospf)),
        ("device equivalence", Box::new(device_equivalence)),
        ("route interning", Box::new(interning)),
        ("bitstate", Box::new(|| bitstate(&corpus))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match r {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
