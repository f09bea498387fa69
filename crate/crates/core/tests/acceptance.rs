//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use oblivio_core::corpus;
use oblivio_core::ct::{safe_concat, safe_eq, safe_select_str, CtCounters, CtString};
use oblivio_core::frontend::{ChannelRef, Command};
use oblivio_core::harness::{ni_differential_test, overhead_check, random_extension, NiConfig};
use oblivio_core::interp::{step_command, time_of, CmdConfig, History, LocalEnv, Store, Trigger};
use oblivio_core::netsim::{log_to_jsonl, run_simulation, Outcome, Scheduler, Semantics, SimConfig};
use oblivio_core::typing::{check_system, handler_potentials, ChannelEnv};
use oblivio_core::value::{BaseType, SizedValue};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SWEEP_LIMIT: Duration = Duration::from_secs(1);
const CT_LIMIT: Duration = Duration::from_secs(5);
const NI_LIMIT: Duration = Duration::from_secs(60);
const NI_TRIALS: u64 = 100;
const CONTENT_PAIRS: usize = 1000;
const OVERHEAD_SCHEDULES: usize = 10;
const AUCTION_Q_MAX: u64 = 4;
const PHANTOM_RUNS: usize = 100;
const WATCHDOG: u64 = 1_000_000;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Verdict {
    let auction = corpus::auction().programs();
    let lambda = check_system(&auction).map_err(|e| format!("auction rejected: {e:?}"))?;
    for (ch, t) in &lambda.channels {
        let want = match ch.name.as_str() {
            "TO_LEAD" => 1,
            "TICK" => 4,
            _ => 0,
        };
        ensure(t.potential == want, || format!("{ch} has potential {} (want {want})", t.potential))?;
    }
    let house = auction.iter().find(|p| p.node == "AUCTIONHOUSE").ok_or("no house")?;
    let tick = handler_potentials(house, &lambda).into_iter().find(|h| h.name == "TICK").ok_or("no TICK")?;
    ensure(tick.inferred == Some(4), || format!("TICK minimum {:?}", tick.inferred))?;

    let start = Instant::now();
    for a in 0..=10 {
        for b in 0..=10 {
            ensure(check_system(&corpus::ping_pong(a, b)).is_err(), || format!("PING/PONG accepted at ({a},{b})"))?;
        }
    }
    let sweep = start.elapsed();
    ensure(sweep < SWEEP_LIMIT, || format!("sweep took {sweep:?}"))?;

    let chat = corpus::chat().programs();
    let lambda = check_system(&chat).map_err(|e| format!("chat rejected: {e:?}"))?;
    ensure(lambda.channels.values().all(|t| t.potential == 0), || "chat handler with nonzero potential".into())?;
    Ok(format!("TICK min 4, 121 PING/PONG pairs rejected in {sweep:?}, chat at q=0"))
}

fn strings(alphabet: &[u8], max_len: usize) -> Vec<String> {
    let mut all = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| alphabet.iter().map(move |c| format!("{s}{}", *c as char)))
            .collect();
        all.extend(layer.iter().cloned());
    }
    all
}

fn padded(s: &str, z: usize) -> CtString {
    CtString::new(s.as_bytes(), z).expect("fits")
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let words = strings(b"abc", 3);
    let mut cases = 0u64;
    let mut c = CtCounters::default();
    for s1 in &words {
        for s2 in &words {
            for z1 in s1.len()..=5 {
                for z2 in s2.len()..=5 {
                    let (a, b) = (padded(s1, z1), padded(s2, z2));
                    let eq = safe_eq(&a, &b, &mut c);
                    ensure(eq == (s1 == s2) as u64, || format!("safe_eq({s1:?}|{z1}, {s2:?}|{z2}) = {eq}"))?;
                    for bit in [0u64, 1] {
                        let r = safe_select_str(bit, &a, &b, &mut c);
                        let want = if bit == 0 { s1 } else { s2 };
                        ensure(r.to_string_lossy() == *want && r.size() == z1.max(z2), || {
                            format!("safe_select({bit}, {s1:?}|{z1}, {s2:?}|{z2}) = {r:?}|{}", r.size())
                        })?;
                    }
                    let r = safe_concat(&a, &b, &mut c);
                    ensure(r.to_string_lossy() == format!("{s1}{s2}") && r.size() == z1 + z2, || {
                        format!("safe_concat({s1:?}|{z1}, {s2:?}|{z2}) = {r:?}|{}", r.size())
                    })?;
                    cases += 1;
                }
            }
        }
    }
    let took = start.elapsed();
    ensure(took < CT_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{cases} operand pairs exact in {took:?}"))
}

fn random_string(rng: &mut impl Rng, max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| rng.gen_range(b'!'..=b'~') as char).collect()
}

fn counters(f: impl FnOnce(&mut CtCounters)) -> CtCounters {
    let mut c = CtCounters::default();
    f(&mut c);
    c
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..CONTENT_PAIRS {
        let (z1, z2) = (rng.gen_range(0..24), rng.gen_range(0..24));
        let ops = |rng: &mut ChaCha8Rng| {
            let a = padded(&random_string(rng, z1), z1);
            let b = padded(&random_string(rng, z2), z2);
            let bit = rng.gen_range(0..2);
            let grow = z1.max(z2) + 3;
            [
                counters(|c| {
                    safe_eq(&a, &b, c);
                }),
                counters(|c| {
                    safe_select_str(bit, &a, &b, c);
                }),
                counters(|c| {
                    safe_concat(&a, &b, c);
                }),
                counters(|c| a.clone().pad_to(grow, c)),
            ]
        };
        let first = ops(&mut rng);
        let second = ops(&mut rng);
        ensure(first == second, || format!("pair {i} at sizes ({z1},{z2}): {first:?} vs {second:?}"))?;
    }
    Ok(format!("{CONTENT_PAIRS} pairs, counters identical for eq/select/concat/pad"))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut runs = 0;
    for s in corpus::scenarios() {
        let lat = s.nodes[0].program.lattice.clone();
        for adv in ["L", "H"] {
            let mut cfg = NiConfig::new(lat.level(adv).ok_or("no level")?, NI_TRIALS, 0x5eed);
            cfg.sim.budget = s.budget;
            let rep = ni_differential_test(&s.nodes, &cfg).map_err(|e| format!("{}: {e}", s.name))?;
            ensure(rep.passed() && rep.trials.len() as u64 == NI_TRIALS, || format!("{} at {adv}:\n{rep}", s.name))?;
            runs += 1;
        }
    }
    let bank = corpus::leaky_bank();
    let lat = bank.nodes[0].program.lattice.clone();
    let mut cfg = NiConfig::new(lat.level("L").ok_or("no level")?, NI_TRIALS, 0x5eed);
    cfg.sim.check_types = false;
    let rep = ni_differential_test(&bank.nodes, &cfg).map_err(|e| e.to_string())?;
    let found = rep.counterexample.as_ref().map(|c| c.trial);
    ensure(found.is_some(), || "no counterexample for the leaky bank".into())?;
    let took = start.elapsed();
    ensure(took < NI_LIMIT, || format!("took {took:?}"))?;
    Ok(format!(
        "{runs} program/level pairs x {NI_TRIALS} trials equivalent, bank leak at trial {}, {took:?}",
        found.unwrap_or(0)
    ))
}

fn criterion_5() -> Verdict {
    let s = corpus::auction();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut injected = 0;
    for i in 0..OVERHEAD_SCHEDULES {
        let ext = random_extension(&s.nodes, 6, s.budget, &mut rng).map_err(|e| e.to_string())?;
        let rep = overhead_check(&s.nodes, &ext, s.budget).map_err(|e| e.to_string())?;
        ensure(rep.q_max == AUCTION_Q_MAX, || format!("q_max {}", rep.q_max))?;
        ensure(rep.passed(), || format!("schedule {i}:\n{rep}"))?;
        worst = worst.max(rep.max_ratio());
        injected += rep.injected;
    }
    ensure(injected > 0, || "no schedule injected a dummy".into())?;
    Ok(format!(
        "{OVERHEAD_SCHEDULES} schedules ({injected} injected dummies), max ratio {worst:.3} <= {}",
        1 + AUCTION_Q_MAX
    ))
}

fn random_like(rng: &mut impl Rng, ty: BaseType, size: usize) -> SizedValue {
    match ty {
        BaseType::Int => SizedValue::int(rng.gen_range(-500..=500)),
        BaseType::Str => {
            let z = size.max(rng.gen_range(0..12));
            SizedValue::string(&random_string(rng, z)).pad(z).expect("fits")
        }
    }
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut targets = Vec::new();
    for s in corpus::scenarios() {
        let lambda = ChannelEnv::build(&s.programs()).map_err(|e| e.to_string())?;
        for spec in &s.nodes {
            for h in &spec.program.handlers {
                if !lambda.lattice.is_bottom(h.mode) {
                    targets.push((spec.clone(), h.clone(), lambda.clone()));
                }
            }
        }
    }
    ensure(!targets.is_empty(), || "no secret-mode handlers".into())?;
    let mut total_steps = 0u64;
    for run in 0..PHANTOM_RUNS {
        let (spec, h, lambda) = &targets[rng.gen_range(0..targets.len())];
        let p = &spec.program;
        let store: Store = p
            .globals
            .iter()
            .map(|g| (g.name.clone(), random_like(&mut rng, g.ty, 0)))
            .collect();
        let local: LocalEnv = p
            .locals
            .iter()
            .map(|l| {
                let stream = (0..3).map(|_| rng.gen_bool(0.5).then(|| random_like(&mut rng, l.ty, 4))).collect();
                (l.name.clone(), stream)
            })
            .collect();
        let trigger = Trigger {
            ch: ChannelRef::new(p.node.clone(), h.name.clone()),
            t: rng.gen_range(0..1000),
            bit: false,
            value: random_like(&mut rng, h.param_ty, 0),
        };
        let mut cfg = CmdConfig::enter(&trigger, &h.body, &h.param, store.clone(), local.clone(), History::default());
        let mem = cfg.mem.clone();
        let mut sizes: BTreeMap<String, usize> = store.iter().map(|(k, v)| (k.clone(), v.size())).collect();
        let mut steps = 0u64;
        let tag = format!("run {run} ({}/{})", p.node, h.name);
        while !matches!(cfg.cmd, Command::Stop) {
            ensure(steps < WATCHDOG, || format!("{tag}: no termination within {WATCHDOG} steps"))?;
            let out = step_command(&mut cfg, None).map_err(|e| format!("{tag}: {e}"))?;
            steps += 1;
            if let Some(ev) = out {
                let mode = lambda.get(&ev.ch).map(|t| t.mode);
                ensure(!ev.bit && mode.is_some_and(|m| !lambda.lattice.is_bottom(m)), || {
                    format!("{tag}: emitted {}({}) on {}", ev.value, ev.bit as u8, ev.ch)
                })?;
            }
            ensure(cfg.mem == mem, || format!("{tag}: memory changed"))?;
            ensure(cfg.local == local, || format!("{tag}: local channels changed"))?;
            for (x, v) in &cfg.store {
                ensure(v.same_base(&store[x]), || format!("{tag}: {x} changed to {v}"))?;
                let before = sizes.insert(x.clone(), v.size()).unwrap_or(0);
                ensure(v.size() >= before, || format!("{tag}: {x} shrank"))?;
            }
            ensure(cfg.outputs.is_empty(), || format!("{tag}: local output in phantom mode"))?;
        }
        let events = cfg.history.events();
        for i in 0..events.len() {
            ensure(time_of(&events[..i]) < time_of(&events[..=i]), || format!("{tag}: clock not increasing"))?;
        }
        total_steps += steps;
    }
    Ok(format!(
        "{PHANTOM_RUNS} dummy-triggered runs over {} handlers, {total_steps} steps, frames intact",
        targets.len()
    ))
}

fn configs(budget: u64) -> Vec<SimConfig> {
    let mut v = Vec::new();
    for semantics in [Semantics::Safe, Semantics::Unsafe] {
        for scheduler in [Scheduler::RoundRobin, Scheduler::GenuinePaced] {
            v.push(SimConfig {
                semantics,
                scheduler,
                budget,
                ..SimConfig::default()
            });
        }
    }
    v
}

fn criterion_7() -> Verdict {
    let mut runs = 0;
    for s in corpus::scenarios() {
        for cfg in configs(s.budget) {
            let a = run_simulation(&s.nodes, &cfg).map_err(|e| format!("{}: {e}", s.name))?;
            let b = run_simulation(&s.nodes, &cfg).map_err(|e| format!("{}: {e}", s.name))?;
            ensure(log_to_jsonl(&a.log) == log_to_jsonl(&b.log), || format!("{}: logs differ", s.name))?;
            ensure(a.clock_violations() == 0, || format!("{}: {} clock violations", s.name, a.clock_violations()))?;
            runs += 2;
        }
    }
    Ok(format!("{runs} runs, identical logs, zero clock violations"))
}

fn criterion_8() -> Verdict {
    let mut runs = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in corpus::scenarios() {
        let mut systems = vec![(s.nodes.clone(), Scheduler::RoundRobin)];
        if s.name == "auction" {
            // Injected dummies are only well-formed under the schedule they
            // were drawn for.
            for _ in 0..3 {
                let ext = random_extension(&s.nodes, 6, s.budget, &mut rng).map_err(|e| e.to_string())?;
                systems.push((ext, Scheduler::GenuinePaced));
            }
        }
        for (nodes, scheduler) in systems {
            let cfg = SimConfig {
                monitor: true,
                scheduler,
                budget: s.budget,
                ..SimConfig::default()
            };
            let r = run_simulation(&nodes, &cfg).map_err(|e| format!("{}: {e}", s.name))?;
            ensure(r.monitor_violations.is_empty(), || format!("{}: {:?}", s.name, r.monitor_violations))?;
            ensure(r.outcome != Outcome::Blocked, || format!("{}: blocked", s.name))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} monitored simulations, zero stack violations"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("type checker corpus", criterion_1),
        ("constant-time oracle equivalence", criterion_2),
        ("content independence", criterion_3),
        ("noninterference", criterion_4),
        ("overhead bound", criterion_5),
        ("phantom frame invariants", criterion_6),
        ("determinism and clock", criterion_7),
        ("pc-stack and bit-stack monitor", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = f();
        let took = start.elapsed();
        match verdict {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
