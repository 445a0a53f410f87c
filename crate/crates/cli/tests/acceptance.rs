//! Acceptance suite. Prints one PASS/FAIL line per criterion with its
//! runtime and bound, and exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use geosim::arm::{
    elect_goals, record_history, refresh_goals, select_intentions, ActionIntent, AgentInternalState, Commitment,
    CommitmentId, DesireRule, Goal, GoalId, GoalKind, PossibilisticState, World,
};
use geosim::conformance::TABLE1_CSV;
use geosim::devs::{Payload, Scheduler, Target};
use geosim::dsl::{compile_with_seed, format, parse, validate};
use geosim::engine::{Outputs, RunOptions, Simulation};
use geosim::gas::{step, Location};
use geosim::rule::Expr;
use geosim::{EntityId, SeedStreams, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn corpus() -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "gsc"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn quiet() -> RunOptions {
    RunOptions {
        outputs: Some(Outputs::default()),
        ..RunOptions::default()
    }
}

// Table rows in concept order; `d` marks the GAIA dagger cell.
const TABLE: [(&str, &str); 17] = [
    ("beliefs", "XdXXXXXXX"),
    ("goals", "X.X.XXXXX"),
    ("goals.maintenance", "........."),
    ("goals.achievement", ".X..X...."),
    ("intention", "X.XXXXXXX"),
    ("preference", "....X.XX."),
    ("commitments", ".X.X.XXX."),
    ("plan", "X.XX.XX.."),
    ("plan.maintenance", "........."),
    ("history", ".....X.X."),
    ("dynamics.update", ".......X."),
    ("dynamics.activation", ".......X."),
    ("dynamics.planning", "......XX."),
    ("roles", "XXXXXXXXX"),
    ("use_case", "XXXXXX.XX"),
    ("skills.abilities", ".X......."),
    ("skills.capabilities", ".X.X..X.."),
];
const METHODOLOGIES: [&str; 9] = [
    "AAII",
    "GAIA",
    "MASE",
    "Prometheus",
    "MESSAGE/UML",
    "INGENIAS",
    "Tropos",
    "MAS-CommonsKADS",
    "O-MaSE",
];
const GAIA_NOTE: &str = "GAIA does not provide details on its internal architecture.";

fn geosim(args: &[&str]) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_geosim")).args(args).output().unwrap();
    assert!(o.status.success(), "geosim {args:?} exited {:?}", o.status.code());
    String::from_utf8(o.stdout).unwrap()
}

fn table1_fidelity() -> Outcome {
    let csv = geosim(&["conformance", "--format", "csv"]);
    ensure(csv == TABLE1_CSV, || {
        "csv output differs from the checked-in transcription".into()
    })?;
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    ensure(header[2..] == METHODOLOGIES, || format!("columns {header:?}"))?;
    let rows: Vec<&str> = lines.clone().filter(|l| !l.starts_with('#')).collect();
    ensure(rows.len() == 17, || format!("{} rows", rows.len()))?;
    let mut cells = 0;
    for (row, (concept, expected)) in rows.iter().zip(TABLE) {
        let fields: Vec<&str> = row.split(',').collect();
        ensure(fields[1] == concept, || format!("row {} is not {concept}", fields[1]))?;
        for (cell, want) in fields[2..].iter().zip(expected.chars()) {
            let want = match want {
                'X' => "X",
                'd' => "†",
                _ => "",
            };
            ensure(*cell == want, || format!("{concept}: `{cell}` != `{want}`"))?;
            cells += 1;
        }
    }
    ensure(csv.ends_with(&format!("# † {GAIA_NOTE}\n")), || {
        "footnote missing from csv".into()
    })?;
    let text = geosim(&["conformance"]);
    ensure(text.ends_with(&format!("\n† {GAIA_NOTE}\n")), || {
        "footnote missing from text".into()
    })?;
    let head = text.lines().next().unwrap();
    let gaia = head[..head.find("GAIA").unwrap()].chars().count();
    let beliefs = text.lines().find(|l| l.trim_start().starts_with("Beliefs")).unwrap();
    ensure(beliefs.chars().nth(gaia) == Some('†'), || {
        "dagger not under GAIA".into()
    })?;
    Ok(format!("{cells} cells, 9 methodologies x 17 concepts"))
}

fn majority_oracle(bits: u32) -> u32 {
    let mut next = 0;
    for i in 0..9 {
        let own = (bits >> i) & 1;
        let ones = (0..9).filter(|&j| j != i && (bits >> j) & 1 == 1).count();
        let s = match (2 * ones).cmp(&8) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => own,
        };
        next |= s << i;
    }
    next
}

fn gas_oracle() -> Outcome {
    let src = std::fs::read_to_string(scenarios_dir().join("majority.gsc")).unwrap();
    let compiled = compile_with_seed(&parse(&src).unwrap(), 0).unwrap();
    let base = compiled.env.gas_snapshot(0);
    ensure(base.automata.len() == 9, || "expected nine cells".into())?;
    let index = |loc: &Location| match loc {
        Location::Cell(x, y) => (x + 3 * y) as u32,
        other => panic!("unexpected location {other:?}"),
    };
    let mut changed = 0;
    for bits in 0u32..512 {
        let mut snap = base.clone();
        for a in &mut snap.automata {
            a.state
                .insert("s".into(), Value::Num(f64::from((bits >> index(&a.location)) & 1)));
        }
        let next = step(&compiled.env.model, &snap, SeedStreams::new(0), &compiled.env).map_err(|e| e.to_string())?;
        let mut got = 0;
        for a in &next.automata {
            if a.state["s"] == Value::Num(1.0) {
                got |= 1 << index(&a.location);
            }
        }
        let want = majority_oracle(bits);
        ensure(got == want, || {
            format!("state {bits:09b}: kernel {got:09b}, oracle {want:09b}")
        })?;
        changed += u32::from(got != bits);
    }
    Ok(format!("512 initial states agree ({changed} change)"))
}

fn random_scenario(rng: &mut ChaCha8Rng) -> (String, bool) {
    let (w, h) = (rng.gen_range(3..=10), rng.gen_range(3..=10));
    let boundary = if rng.gen_bool(0.5) { "torus" } else { "clamp" };
    let neighborhood = ["moore 1", "von_neumann 1", "moore 2"].choose(rng).unwrap();
    let k = rng.gen_range(1..=4);
    let p = rng.gen_range(1..10) as f64 / 10.0;
    let (rule, noisy) = match rng.gen_range(0..4) {
        0 => ("s = if 2 * count(neighbors, other.s == 1) > count(neighbors, true) then 1 else if 2 * count(neighbors, other.s == 1) < count(neighbors, true) then 0 else self.s".to_string(), false),
        1 => (format!("s = if random(flip) < {p} then 1 - self.s else self.s"), true),
        2 => (format!("s = if count(neighbors, other.s == 1) >= {k} then 1 else 0"), false),
        _ => ("s = self.s".to_string(), false),
    };
    let moving = rng.gen_bool(0.5);
    let cells = w * h;
    let placement = if moving {
        format!("populate {} cell vacant", rng.gen_range(1..cells))
    } else {
        "fill cell".to_string()
    };
    let density = rng.gen_range(1..10) as f64 / 10.0;
    let mut src = format!("grid lattice {w} {h} {boundary}\n\ntransition t {{\n    {rule}\n}}\n\n");
    if moving {
        src.push_str(&format!(
            "movement wander = if random(go) < {p} then random_vacant(hop) else stay\n\nneighbors regroup = geometric\n\n"
        ));
    }
    src.push_str(&format!("object_type cell {{\n    state {{\n        s: num = 0\n    }}\n    neighborhood {neighborhood}\n    transition t\n"));
    if moving {
        src.push_str("    movement wander\n    neighbors regroup\n");
    }
    src.push_str(&format!(
        "}}\n\nlayer board {{\n    {placement} state s = if random(init) < {density} then 1 else 0\n}}\n\nrun {{\n    ticks {}\n}}\n",
        rng.gen_range(2..=8)
    ));
    (src, noisy || moving || density < 1.0)
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut differing = 0;
    let mut nontrivial = 0;
    for n in 0..100 {
        let (src, random) = random_scenario(&mut rng);
        let seed = rng.gen::<u64>() % 1000;
        let doc = parse(&src).map_err(|e| format!("scenario {n}: {e:?}\n{src}"))?;
        ensure(!validate(&doc).has_errors(), || {
            format!("scenario {n} invalid: {:?}\n{src}", validate(&doc))
        })?;
        let compiled = compile_with_seed(&doc, seed).map_err(|e| format!("scenario {n}: {e}"))?;
        let streams = SeedStreams::new(seed);
        let mut a = compiled.env.gas_snapshot(0);
        let mut b = a.clone();
        for _ in 0..3 {
            b.automata.shuffle(&mut rng);
            a = step(&compiled.env.model, &a, streams, &compiled.env).map_err(|e| e.to_string())?;
            b = step(&compiled.env.model, &b, streams, &compiled.env).map_err(|e| e.to_string())?;
            ensure(a.to_records() == b.to_records(), || {
                format!("scenario {n}: storage order changed the step\n{src}")
            })?;
        }
        let options = |s: u64| RunOptions {
            seed: Some(s),
            outputs: Some(Outputs {
                trajectory: true,
                summary: true,
                ..Outputs::default()
            }),
            ..RunOptions::default()
        };
        let run = |s: u64| {
            Simulation::from_source(&src, &options(s))
                .and_then(Simulation::run)
                .map_err(|e| e.to_string())
        };
        let first = run(seed)?;
        let again = run(seed)?;
        ensure(
            first.trajectory == again.trajectory && first.summary == again.summary,
            || format!("scenario {n}: rerun differs"),
        )?;
        if random {
            nontrivial += 1;
            let other = run(seed + 1)?;
            differing += usize::from(other.summary.trajectory_sha256 != first.summary.trajectory_sha256);
        }
    }
    ensure(differing > 0, || "no scenario changed with the seed".into())?;
    Ok(format!(
        "100 scenarios; seed changes {differing}/{nontrivial} random ones"
    ))
}

/// Same-group fraction per resident with at least one neighbour, and the
/// number of unsatisfied residents (no neighbours counts as unsatisfied).
fn schelling_measure(sim: &Simulation) -> (f64, usize) {
    let cells: BTreeMap<(i64, i64), Value> = sim
        .env()
        .entities()
        .map(|e| match e.location {
            Location::Cell(x, y) => ((x, y), e.state["group"].clone()),
            _ => unreachable!(),
        })
        .collect();
    let (mut total, mut counted, mut unhappy) = (0.0, 0, 0);
    for (&(x, y), group) in &cells {
        let (mut same, mut occupied) = (0, 0);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if (dx, dy) == (0, 0) {
                    continue;
                }
                if let Some(g) = cells.get(&((x + dx).rem_euclid(20), (y + dy).rem_euclid(20))) {
                    occupied += 1;
                    same += usize::from(g == group);
                }
            }
        }
        if occupied == 0 {
            unhappy += 1;
            continue;
        }
        let f = same as f64 / occupied as f64;
        total += f;
        counted += 1;
        unhappy += usize::from(f < 0.3);
    }
    (total / counted as f64, unhappy)
}

fn schelling() -> Outcome {
    let src = std::fs::read_to_string(scenarios_dir().join("schelling.gsc")).unwrap();
    let (mut improved, mut settled) = (0, 0);
    let (mut initial_sum, mut final_sum) = (0.0, 0.0);
    let mut report = Vec::new();
    for seed in 0..10 {
        let mut sim = Simulation::from_source(
            &src,
            &RunOptions {
                seed: Some(seed),
                ..quiet()
            },
        )
        .map_err(|e| e.to_string())?;
        ensure(sim.env().entities().count() == 340, || "expected 340 residents".into())?;
        let (initial, mut unhappy) = schelling_measure(&sim);
        let mut last = initial;
        while unhappy > 0 && sim.tick() < 500 {
            sim.step().map_err(|e| e.to_string())?;
            (last, unhappy) = schelling_measure(&sim);
        }
        settled += usize::from(unhappy == 0);
        improved += usize::from(last > initial);
        initial_sum += initial;
        final_sum += last;
        report.push(format!("{seed}:{:.2}->{:.2}@{}", initial, last, sim.tick()));
    }
    ensure(improved >= 9, || format!("only {improved}/10 improved: {report:?}"))?;
    ensure(final_sum > initial_sum, || "mean fraction did not increase".into())?;
    Ok(format!(
        "mean same-group fraction {:.3} -> {:.3}, improved {improved}/10, all satisfied in {settled}/10 [{}]",
        initial_sum / 10.0,
        final_sum / 10.0,
        report.join(" ")
    ))
}

struct Instance {
    ps: PossibilisticState,
    candidates: BTreeSet<GoalId>,
    fires: Vec<bool>,
    sat: BTreeMap<(GoalId, String), bool>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n_worlds = rng.gen_range(1..=5);
    let n_goals = rng.gen_range(1..=8);
    let goals: Vec<GoalId> = (0..n_goals).map(|i| GoalId::new(format!("g{i}"))).collect();
    let levels = [0.0, 0.2, 0.5, 0.5, 0.8, 1.0];
    let mut worlds = BTreeMap::new();
    let top = rng.gen_range(0..n_worlds);
    for w in 0..n_worlds {
        let pi = if w == top { 1.0 } else { *levels.choose(rng).unwrap() };
        worlds.insert(
            format!("w{w}"),
            World {
                pi,
                facts: BTreeMap::new(),
            },
        );
    }
    let mut desire_rules = Vec::new();
    let mut fires = Vec::new();
    for _ in 0..rng.gen_range(0..=2 * n_goals) {
        desire_rules.push(DesireRule {
            guard: Expr::boolean(true),
            goal: goals.choose(rng).unwrap().clone(),
        });
        fires.push(rng.gen_bool(0.7));
    }
    let candidates = goals.iter().filter(|_| rng.gen_bool(0.8)).cloned().collect();
    let mut sat = BTreeMap::new();
    for g in &goals {
        for w in worlds.keys() {
            sat.insert((g.clone(), w.clone()), rng.gen_bool(0.5));
        }
    }
    Instance {
        ps: PossibilisticState {
            worlds,
            desire_rules,
            last_info: None,
        },
        candidates,
        fires,
        sat,
    }
}

/// Exhaustive: every non-empty subset of the justified desires, scored by
/// the best world satisfying all of it.
fn election_oracle(inst: &Instance) -> (BTreeSet<GoalId>, BTreeSet<GoalId>, f64) {
    let justified: BTreeSet<GoalId> = inst
        .ps
        .desire_rules
        .iter()
        .zip(&inst.fires)
        .filter(|(r, f)| **f && inst.candidates.contains(&r.goal))
        .map(|(r, _)| r.goal.clone())
        .collect();
    let j: Vec<GoalId> = justified.iter().cloned().collect();
    let mut best: Option<(f64, Vec<GoalId>)> = None;
    for mask in 1u32..(1 << j.len()) {
        let subset: Vec<GoalId> = (0..j.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| j[i].clone())
            .collect();
        let pi = inst
            .ps
            .worlds
            .iter()
            .filter(|(name, w)| w.pi > 0.0 && subset.iter().all(|g| inst.sat[&(g.clone(), (*name).clone())]))
            .map(|(_, w)| w.pi)
            .fold(0.0, f64::max);
        if pi == 0.0 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bp, bs)) => {
                pi > *bp || (pi == *bp && (subset.len() > bs.len() || (subset.len() == bs.len() && subset < *bs)))
            }
        };
        if better {
            best = Some((pi, subset));
        }
    }
    let (pi, elected) = best.unwrap_or((1.0, Vec::new()));
    (justified, elected.into_iter().collect(), pi)
}

fn possibilistic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe1ec7);
    let mut nonempty = 0;
    for n in 0..200 {
        let inst = random_instance(&mut rng);
        let mut calls = 0;
        let fires = |r: &DesireRule| {
            let i = inst.ps.desire_rules.iter().position(|x| std::ptr::eq(x, r)).unwrap();
            calls += 1;
            Ok(inst.fires[i])
        };
        let satisfies = |g: &GoalId, w: &World| {
            let name = inst.ps.worlds.iter().find(|(_, x)| std::ptr::eq(*x, w)).unwrap().0;
            Ok(inst.sat[&(g.clone(), name.clone())])
        };
        let e = elect_goals(&inst.ps, &inst.candidates, fires, satisfies).map_err(|e| e.to_string())?;
        let (justified, elected, pi) = election_oracle(&inst);
        ensure(
            e.justified == justified && e.elected == elected && e.pi_value == pi,
            || {
                format!(
                    "instance {n}: got {:?}/{:?}/{}, oracle {justified:?}/{elected:?}/{pi}",
                    e.justified, e.elected, e.pi_value
                )
            },
        )?;
        nonempty += usize::from(!elected.is_empty());
    }
    Ok(format!("200 instances agree ({nonempty} with a non-empty election)"))
}

fn scheduler() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xde75);
    let mut s = Scheduler::new();
    let mut scheduled = BTreeSet::new();
    let mut time_of = BTreeMap::new();
    let push = |s: &mut Scheduler,
                rng: &mut ChaCha8Rng,
                base: f64,
                scheduled: &mut BTreeSet<u64>,
                time_of: &mut BTreeMap<u64, (f64, i32)>| {
        let t = base + f64::from(rng.gen_range(0..50u32)) * 0.5;
        let p = rng.gen_range(-3..=3);
        let seq = s
            .schedule(t, p, Target::Global, Payload::Custom { label: String::new() })
            .unwrap();
        scheduled.insert(seq);
        time_of.insert(seq, (t, p));
    };
    for _ in 0..5_000 {
        push(&mut s, &mut rng, 0.0, &mut scheduled, &mut time_of);
    }
    let mut seen = BTreeSet::new();
    let mut last: Option<(f64, i32, u64)> = None;
    while let Some(e) = s.pop() {
        let key = (e.time, e.priority, e.seq);
        ensure(time_of.get(&e.seq) == Some(&(e.time, e.priority)), || {
            format!("event {} altered", e.seq)
        })?;
        if let Some(prev) = last {
            ensure(prev <= key, || format!("{prev:?} popped before {key:?}"))?;
        }
        ensure(seen.insert(e.seq), || format!("event {} popped twice", e.seq))?;
        last = Some(key);
        if scheduled.len() < 10_000 && rng.gen_bool(0.6) {
            push(&mut s, &mut rng, e.time + 0.5, &mut scheduled, &mut time_of);
        }
    }
    while scheduled.len() < 10_000 {
        let later = s.now() + 0.5;
        push(&mut s, &mut rng, later, &mut scheduled, &mut time_of);
        let e = s.pop().unwrap();
        ensure(seen.insert(e.seq), || "duplicate".into())?;
    }
    ensure(seen == scheduled && seen.len() == 10_000, || {
        format!("{} scheduled, {} processed", scheduled.len(), seen.len())
    })?;
    Ok("10000 events, nondecreasing (time, priority, seq), none lost or repeated".into())
}

fn mutate(rng: &mut ChaCha8Rng, src: &str) -> String {
    const TOKENS: [&str; 16] = [
        "{", "}", "(", ")", "=", "if", "then", "else", "\"", "#", "-1e999", "0.5", "self.", ",", "\n", "random(",
    ];
    let mut chars: Vec<char> = src.chars().collect();
    for _ in 0..rng.gen_range(1..=4) {
        if chars.is_empty() {
            break;
        }
        let i = rng.gen_range(0..chars.len());
        match rng.gen_range(0..5) {
            0 => {
                let end = (i + rng.gen_range(1..20)).min(chars.len());
                chars.drain(i..end);
            }
            1 => {
                let t = TOKENS.choose(rng).unwrap();
                chars.splice(i..i, t.chars());
            }
            2 => {
                let j = rng.gen_range(0..chars.len());
                chars.swap(i, j);
            }
            3 => chars.truncate(i),
            _ => chars[i] = char::from(rng.gen_range(b' '..=b'~')),
        }
    }
    chars.into_iter().collect()
}

fn dsl_round_trip() -> Outcome {
    let files = corpus();
    for (name, src) in &files {
        let doc = parse(src).map_err(|e| format!("{name}: {e:?}"))?;
        let printed = format(&doc);
        let again = parse(&printed).map_err(|e| format!("{name} reprinted: {e:?}"))?;
        ensure(again == doc, || format!("{name}: parse(format(parse)) differs"))?;
        ensure(format(&again) == printed, || {
            format!("{name}: format is not a fixpoint")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xf022);
    let mut parsed = 0;
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crash = None;
    for n in 0..10_000 {
        let (_, base) = files.choose(&mut rng).unwrap();
        let input = mutate(&mut rng, base);
        let r = catch_unwind(|| match parse(&input) {
            Ok(doc) => {
                let _ = validate(&doc);
                let printed = format(&doc);
                assert_eq!(parse(&printed).as_ref(), Ok(&doc), "reprint differs");
                true
            }
            Err(_) => false,
        });
        match r {
            Ok(ok) => parsed += usize::from(ok),
            Err(_) => {
                crash = Some(format!("input {n} crashed:\n{input}"));
                break;
            }
        }
    }
    std::panic::set_hook(hook);
    if let Some(c) = crash {
        return Err(c);
    }
    Ok(format!(
        "{} corpus files round-trip; 10000 mutants, {parsed} still parse, no crash",
        files.len()
    ))
}

const MIND_SCENARIO: &str = r#"
grid lattice 5 5 torus

movement drift = if random(go) < 0.5 then random_vacant(hop) else stay

neighbors regroup = geometric

agent_type bot {
    state {
        work: num = 0
        naps: num = 0
    }
    neighborhood moore 1
    transition identity
    movement drift
    neighbors regroup
    action toil {
        work = self.work + 1
    }
    action nap {
        naps = self.naps + 1
    }
    goal maintain busy when self.work > tick
    mind {
        backend BACKEND
    }
}

layer floor {
    populate 4 bot vacant
}

run {
    seed 9
    ticks 12
    outputs trajectory, transcript, summary
}
"#;

const RECORDED_MIND: &str = r#"external "i=0; while read l; do i=$((i+1)); case $((i % 4)) in 0) echo '{\"text\":\"nap\"}';; 3) echo '{\"text\":\"fly\"}';; *) echo '{\"text\":\"toil\"}';; esac; done""#;

fn mind_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let recorded = Simulation::from_source(&MIND_SCENARIO.replace("BACKEND", RECORDED_MIND), &RunOptions::default())
        .and_then(Simulation::run)
        .map_err(|e| e.to_string())?;
    let transcript = recorded.transcript.clone().unwrap();
    ensure(!transcript.is_empty(), || "external session recorded nothing".into())?;
    std::fs::write(dir.path().join("session.jsonl"), &transcript).map_err(|e| e.to_string())?;
    let replayed = Simulation::from_source(
        &MIND_SCENARIO.replace("BACKEND", r#"scripted "session.jsonl""#),
        &RunOptions {
            base_dir: dir.path().to_path_buf(),
            ..RunOptions::default()
        },
    )
    .and_then(Simulation::run)
    .map_err(|e| e.to_string())?;
    let (a, b) = (&recorded.summary, &replayed.summary);
    ensure(a.means["bot"]["work"] > 0.0 && a.means["bot"]["naps"] > 0.0, || {
        "the session did not drive the agents".into()
    })?;
    ensure(a.trajectory_sha256 == b.trajectory_sha256, || {
        format!("digests differ: {} vs {}", a.trajectory_sha256, b.trajectory_sha256)
    })?;
    ensure(
        a.skipped_agent_ticks == b.skipped_agent_ticks && a.means == b.means,
        || "summaries differ".into(),
    )?;
    Ok(format!(
        "{} exchanges replayed, trajectory {}",
        transcript.lines().count(),
        &a.trajectory_sha256[..16]
    ))
}

fn random_state(rng: &mut ChaCha8Rng) -> AgentInternalState {
    let n = rng.gen_range(1..=8);
    let goals: Vec<Goal> = (0..n)
        .map(|i| {
            let kind = if rng.gen_bool(0.5) {
                GoalKind::Maintenance
            } else {
                GoalKind::Achievement
            };
            let mut g = Goal::new(&format!("g{i}"), kind, Expr::boolean(true));
            g.active = rng.gen_bool(0.7);
            g
        })
        .collect();
    let mut preferences = BTreeMap::new();
    for g in &goals {
        if rng.gen_bool(0.8) {
            preferences.insert(g.id.clone(), f64::from(rng.gen_range(-10..=10)));
        }
    }
    let mut s = AgentInternalState::new(goals, preferences);
    s.commitment_bonus = f64::from(rng.gen_range(0..=5));
    for (i, g) in s.goals.clone().iter().enumerate() {
        if g.active && rng.gen_bool(0.3) {
            s.commitments.push(Commitment {
                id: CommitmentId(i as u64),
                members: BTreeSet::from([EntityId(0), EntityId(1)]),
                goal: g.id.clone(),
                origin_tick: 0,
            });
        }
        if g.active && rng.gen_bool(0.5) {
            s.add_plan(g.id.clone(), vec!["a".into(), "b".into()]);
        }
    }
    s
}

fn random_conditions(rng: &mut ChaCha8Rng, s: &AgentInternalState) -> BTreeMap<GoalId, bool> {
    s.goals.iter().map(|g| (g.id.clone(), rng.gen_bool(0.5))).collect()
}

fn arm_invariants() -> Outcome {
    const CASES: usize = 2_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xa2);
    for n in 0..CASES {
        let mut s = random_state(&mut rng);
        let k = rng.gen_range(0..=s.goals.len() + 1);
        s = refresh_goals(&s, &random_conditions(&mut rng, &s));
        s.intentions = select_intentions(&s, k);
        let active: BTreeSet<&GoalId> = s.goals.iter().filter(|g| g.active).map(|g| &g.id).collect();
        ensure(
            s.intentions.len() <= k && s.intentions.iter().all(|i| active.contains(i)),
            || format!("case {n}: intentions {:?} not within active {active:?}", s.intentions),
        )?;
        ensure(s.intentions.len() == k.min(active.len()), || {
            format!("case {n}: too few intentions")
        })?;
        s.check().map_err(|e| format!("case {n}: {e}"))?;
    }
    for n in 0..CASES {
        let mut s = random_state(&mut rng);
        let maintenance: Vec<(GoalId, bool)> = s
            .goals
            .iter()
            .filter(|g| g.kind == GoalKind::Maintenance)
            .map(|g| (g.id.clone(), g.active))
            .collect();
        for _ in 0..5 {
            let conditions = random_conditions(&mut rng, &s);
            let next = refresh_goals(&s, &conditions);
            for (id, was) in &maintenance {
                ensure(next.goal(id).map(|g| g.active) == Some(*was), || {
                    format!("case {n}: maintenance goal {id} changed")
                })?;
            }
            for g in &s.goals {
                if g.kind == GoalKind::Achievement && g.active && conditions[&g.id] {
                    ensure(
                        !next.goal(&g.id).unwrap().active && next.plan_for(&g.id).is_none(),
                        || format!("case {n}: achieved goal {} kept", g.id),
                    )?;
                }
            }
            s = next;
        }
    }
    for n in 0..CASES {
        let s = random_state(&mut rng);
        let c = if rng.gen_bool(0.5) {
            f64::from(rng.gen_range(1..=1000))
        } else {
            2f64.powi(rng.gen_range(-10..=10))
        };
        let mut scaled = s.clone();
        for v in scaled.preferences.values_mut() {
            *v *= c;
        }
        scaled.commitment_bonus *= c;
        for k in 1..=s.goals.len() {
            ensure(select_intentions(&s, k) == select_intentions(&scaled, k), || {
                format!("case {n}: scaling by {c} changed the top {k}")
            })?;
        }
    }
    for n in 0..CASES {
        let mut s = random_state(&mut rng);
        let mut tick = 0;
        for _ in 0..rng.gen_range(1..10) {
            if rng.gen_bool(0.2) && !s.history.is_empty() {
                let stale = tick - rng.gen_range(0..=1).min(tick);
                ensure(record_history(&s, vec![], vec![], stale).is_err(), || {
                    format!("case {n}: stale tick accepted")
                })?;
                continue;
            }
            tick += rng.gen_range(1..4);
            let next = record_history(&s, vec![], vec![ActionIntent::new("a")], tick).map_err(|e| e.to_string())?;
            ensure(
                next.history.len() == s.history.len() + 1 && next.history[..s.history.len()] == s.history[..],
                || format!("case {n}: history rewritten"),
            )?;
            s = next;
        }
    }
    Ok(format!(
        "{CASES} random states per invariant (intention subset, maintenance persistence, scaling, append-only history)"
    ))
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("table1-fidelity", Some(Duration::from_secs(1)), table1_fidelity),
        ("gas-oracle-equivalence", Some(Duration::from_secs(10)), gas_oracle),
        ("synchrony-determinism", Some(Duration::from_secs(60)), determinism),
        ("schelling-convergence", Some(Duration::from_secs(30)), schelling),
        (
            "possibilistic-election-oracle",
            Some(Duration::from_secs(10)),
            possibilistic,
        ),
        ("scheduler-total-order", Some(Duration::from_secs(5)), scheduler),
        ("dsl-round-trip-and-fuzz", Some(Duration::from_secs(60)), dsl_round_trip),
        ("mind-pipeline-replay", None, mind_replay),
        ("arm-invariants", None, arm_invariants),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, bound, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = started.elapsed();
        let timing = match bound {
            Some(b) => format!("{:.2}s < {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        let outcome = match (outcome, bound) {
            (Ok(_), Some(b)) if elapsed > b => {
                Err(format!("took {:.2}s, bound {}s", elapsed.as_secs_f64(), b.as_secs()))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} [{timing}] {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} [{timing}] {reason}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
