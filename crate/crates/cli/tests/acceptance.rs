//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::panic;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ehnet_cli::period::random_config;
use ehnet_core::duty::Duty;
use ehnet_core::engine::{self, replicate_with_threads, RunOutput};
use ehnet_core::network::TaskStatus;
use ehnet_core::scenario::{Mode, Scenario};
use ehnet_core::sds::{self, ScheduleTimeline, SegmentKind, SuperframeConfig, TxTask, Verdict};
use ehnet_core::seed::source_seed;
use ehnet_core::sources::{
    resultant_cycle, DurationDist, OnOffSource, PeriodicSawtoothSource, PowerState, SourceKind, SourceSpec,
    StorageAugmentedSource,
};
use ehnet_core::trace::write_jsonl;
use ehnet_core::window::{self, AvailabilityWindow};
use ehnet_oracle::{Part, Retrieval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, Check); 8] = [
        ("resultant-period bracket", ac1),
        ("oracle equivalence", ac2),
        ("on-off stationarity", ac3),
        ("truncation conservation and alignment", ac4),
        ("EDF verdict optimality", ac5),
        ("dependency contrast", ac6),
        ("determinism", ac7),
        ("storage dominance", ac8),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (verdict, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "AC-{} {verdict} {name}: {detail} [{:.1}s]",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pairs(ws: &[AvailabilityWindow]) -> Vec<(u64, u64)> {
    ws.iter().map(|w| (w.start, w.end)).collect()
}

fn ticks(ws: &[AvailabilityWindow], horizon: u64) -> Vec<bool> {
    ehnet_oracle::pairs_to_ticks(&pairs(ws), horizon)
}

// ---------------------------------------------------------------- generators

fn random_dist(rng: &mut ChaCha8Rng) -> DurationDist {
    match rng.random_range(0..3) {
        0 => DurationDist::Exponential {
            mean: rng.random_range(1.0..30.0),
        },
        1 => DurationDist::Fixed {
            value: rng.random_range(1..30),
        },
        _ => {
            let min = rng.random_range(1..15);
            DurationDist::Uniform {
                min,
                max: min + rng.random_range(0..15),
            }
        }
    }
}

fn random_sawtooth(rng: &mut ChaCha8Rng) -> PeriodicSawtoothSource {
    let period = rng.random_range(1..200);
    let den = rng.random_range(1..=16);
    PeriodicSawtoothSource::new(
        period,
        Duty::new(rng.random_range(0..=den), den),
        rng.random_range(0..period),
    )
}

fn random_onoff(rng: &mut ChaCha8Rng) -> OnOffSource {
    OnOffSource {
        on_dist: random_dist(rng),
        off_dist: random_dist(rng),
        initial_state: if rng.random() { PowerState::On } else { PowerState::Off },
    }
}

/// 0 sawtooth, 1 on-off, 2 battery, 3 storage around one of the others.
fn random_kind(rng: &mut ChaCha8Rng, which: usize) -> SourceKind {
    match which {
        0 => SourceKind::PeriodicSawtooth(random_sawtooth(rng)),
        1 => SourceKind::OnOff(random_onoff(rng)),
        2 => SourceKind::Battery,
        _ => {
            let which = rng.random_range(0..3);
            let inner = random_kind(rng, which);
            let capacity = rng.random_range(1..50);
            SourceKind::StorageAugmented(StorageAugmentedSource {
                inner: Box::new(inner),
                capacity,
                charge_rate: rng.random_range(0..5),
                drain_rate: rng.random_range(0..5),
                initial_charge: rng.random_range(0..=capacity),
            })
        }
    }
}

fn random_windows(rng: &mut ChaCha8Rng, horizon: u64, count: usize, max_len: u64) -> Vec<AvailabilityWindow> {
    let raw: Vec<(u64, u64)> = (0..count)
        .map(|_| {
            let s = rng.random_range(0..horizon);
            (s, (s + rng.random_range(1..=max_len)).min(horizon))
        })
        .collect();
    window::normalize(raw)
}

/// Random star network with sources of every kind, retrievals, a
/// superframe with tx tasks, in baseline or truncated mode.
fn random_scenario(rng: &mut ChaCha8Rng, max_horizon: u64) -> Scenario {
    let horizon = rng.random_range(100..=max_horizon);
    let n_src = rng.random_range(1..=3);
    let sources: Vec<_> = (0..n_src)
        .map(|i| {
            let which = rng.random_range(0..4);
            serde_json::to_value(SourceSpec {
                id: format!("E{i}"),
                disabled: false,
                kind: random_kind(rng, which),
            })
            .expect("source serializes")
        })
        .collect();
    let sensors = rng.random_range(0..=2);
    let names: Vec<String> = ["G".to_string(), "S".to_string()]
        .into_iter()
        .chain((0..sensors).map(|i| format!("T{i}")))
        .collect();
    let nodes: Vec<_> = names
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let mut powered: Vec<String> = (0..rng.random_range(0..=2))
                .map(|_| format!("E{}", rng.random_range(0..n_src)))
                .collect();
            powered.sort();
            powered.dedup();
            let role = ["gateway", "sensor_node"].get(k).copied().unwrap_or("sensor");
            json!({"id": id, "role": role, "powered_by": powered})
        })
        .collect();
    let mut links =
        vec![json!({"id": "up", "endpoint_a": "S", "endpoint_b": "G", "hop_time": rng.random_range(1..=8)})];
    for i in 0..sensors {
        links.push(
            json!({"id": format!("L{i}"), "endpoint_a": "S", "endpoint_b": format!("T{i}"),
                          "hop_time": rng.random_range(1..=8)}),
        );
    }
    let retrievals: Vec<_> = (0..rng.random_range(1..=3))
        .map(|i| {
            let release = rng.random_range(0..horizon);
            let deadline = rng.random_range(release + 1..=horizon.min(release + 600));
            json!({"id": format!("r{i}"), "initiator": "G", "target": "S", "sensors": names[2..],
                   "release": release, "deadline": deadline})
        })
        .collect();
    let beacon = rng.random_range(1..=3);
    let active = rng.random_range(1..=10);
    let coords = rng.random_range(1..=2);
    let period = (beacon + active) * coords + rng.random_range(0..10);
    let slot_lens: Vec<u64> = (0..coords).map(|_| rng.random_range(1..=3)).collect();
    let tx: Vec<_> = (0..rng.random_range(1..=4))
        .map(|i| {
            let c = i % coords as usize;
            let release = rng.random_range(0..horizon);
            let deadline = rng.random_range(release + 1..=horizon.min(release + 300));
            json!({"id": format!("t{i}"), "slots_needed": rng.random_range(1..=5), "slot_len": slot_lens[c],
                   "release": release, "deadline": deadline, "coordinator": format!("C{c}")})
        })
        .collect();
    let doc = json!({
        "seed": rng.random::<u64>(),
        "horizon": horizon,
        "mode": if rng.random() { "truncated" } else { "baseline" },
        "sources": sources,
        "nodes": nodes,
        "links": links,
        "retrieval_tasks": retrievals,
        "superframe": {"beacon_len": beacon, "active_len": active, "period": period,
                       "coordinators": (0..coords).map(|k| format!("C{k}")).collect::<Vec<_>>()},
        "tx_tasks": tx,
    });
    Scenario::from_json(&doc.to_string()).unwrap_or_else(|e| panic!("generated scenario rejected: {e}"))
}

// ------------------------------------------------------------------ oracles

/// Checks sampled on-off segments against their laws: alternating states
/// from the initial one, every length admissible, and the horizon covered.
fn segments_lawful(src: &OnOffSource, horizon: u64, seed: u64) -> Result<Vec<(bool, u64)>, String> {
    let segs = src.sample_segments(horizon, seed).map_err(|e| e.to_string())?;
    let mut on = src.initial_state == PowerState::On;
    let mut total = 0;
    for g in &segs {
        ensure((g.state == PowerState::On) == on, || "segments do not alternate".into())?;
        let dist = if on { &src.on_dist } else { &src.off_dist };
        let ok = match *dist {
            DurationDist::Exponential { .. } => g.len >= 1,
            DurationDist::Fixed { value } => g.len == value,
            DurationDist::Uniform { min, max } => (min..=max).contains(&g.len),
        };
        ensure(ok, || format!("segment length {} outside its law {dist:?}", g.len))?;
        total += g.len;
        on = !on;
    }
    ensure(total >= horizon, || {
        format!("segments cover {total} of {horizon} ticks")
    })?;
    Ok(segs.iter().map(|g| (g.state == PowerState::On, g.len)).collect())
}

fn oracle_ticks(kind: &SourceKind, horizon: u64, seed: u64) -> Result<Vec<bool>, String> {
    Ok(match kind {
        SourceKind::PeriodicSawtooth(s) => {
            ehnet_oracle::sawtooth_ticks(s.period, s.duty.numer(), s.duty.denom(), s.phase, horizon)
        }
        SourceKind::OnOff(s) => ehnet_oracle::segment_ticks(&segments_lawful(s, horizon, seed)?, horizon),
        SourceKind::Battery => vec![true; horizon as usize],
        SourceKind::StorageAugmented(s) => ehnet_oracle::storage_ticks(
            &oracle_ticks(&s.inner, horizon, seed)?,
            s.capacity,
            s.charge_rate,
            s.drain_rate,
            s.initial_charge,
        ),
    })
}

fn parts_of(tl: &ScheduleTimeline, k: usize) -> Vec<Part> {
    let mut out = vec![Part::Idle; tl.horizon as usize];
    for s in &tl.coordinators[k].segments {
        let p = match s.kind {
            SegmentKind::Beacon => Part::Beacon,
            SegmentKind::Active => Part::Active,
            _ => continue,
        };
        out[s.start as usize..s.end as usize].fill(p);
    }
    out
}

fn oracle_parts(cfg: &SuperframeConfig, k: usize, horizon: u64) -> Vec<Part> {
    let origin = k as u64 * (cfg.beacon_len + cfg.active_len);
    (0..horizon)
        .map(|t| ehnet_oracle::superframe_part(t, origin, cfg.period, cfg.beacon_len, cfg.active_len))
        .collect()
}

// ----------------------------------------------------------------------- AC1

fn ac1() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC1);
    let (mut inside, mut single, mut redrawn) = (0, 0, 0);
    let n = 1000;
    for k in 0..n {
        let (sources, r) = random_config(&mut rng);
        redrawn += r;
        let est = resultant_cycle(&sources).map_err(|e| format!("config {k}: {e}"))?;
        let saws: Vec<_> = sources.iter().map(|s| (s.period, s.on_ticks(), s.phase)).collect();
        let lengths = ehnet_oracle::switcher_cycles(&saws);
        let (total, count) = (lengths.iter().sum::<u64>(), lengths.len() as u64);
        ensure(
            total * est.mean_cycle.denom() == *est.mean_cycle.numer() * count,
            || {
                format!(
                    "config {k} {saws:?}: mean {} but oracle {total}/{count}",
                    est.mean_cycle
                )
            },
        )?;
        let lo = saws.iter().map(|s| s.0).max().unwrap();
        let hi: u64 = saws.iter().map(|s| s.0).sum();
        let bracketed = lo * count <= total && total <= hi * count;
        ensure(bracketed == est.mean_within_bounds(), || {
            format!("config {k}: verdicts disagree")
        })?;
        inside += usize::from(bracketed);
        if saws.len() == 1 {
            ensure(total == saws[0].0 * count, || {
                format!("config {k}: single source mean {total}/{count}")
            })?;
            single += 1;
        }
    }
    ensure(inside == n, || format!("{inside}/{n} means inside [max T, sum T]"))?;
    Ok(format!(
        "{inside}/{n} means inside [max T, sum T], {single}/{single} single-source means equal T, \
         exact agreement with switcher simulation, {redrawn} zero-window sources redrawn"
    ))
}

// ----------------------------------------------------------------------- AC2

fn ac2() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC2);
    let names = ["periodic_sawtooth", "on_off", "battery", "storage_augmented"];
    let mut per_kind = Vec::new();
    for (which, name) in names.iter().enumerate() {
        let n = 200;
        for case in 0..n {
            let kind = random_kind(&mut rng, which);
            let horizon = rng.random_range(1..=10_000);
            let seed = rng.random();
            let ws = kind
                .windows(horizon, seed)
                .map_err(|e| format!("{name} case {case}: {e}"))?;
            let expected = ehnet_oracle::ticks_to_pairs(&oracle_ticks(&kind, horizon, seed)?);
            ensure(pairs(&ws) == expected, || {
                format!("{name} case {case}: windows differ from tick oracle")
            })?;
        }
        per_kind.push(format!("{name} {n}"));
    }

    let n = 200;
    let (mut retrievals, mut verdicts, mut kinds) = (0, 0, [0usize; 4]);
    for case in 0..n {
        let sc = random_scenario(&mut rng, 10_000);
        for s in &sc.sources {
            kinds[match s.kind {
                SourceKind::PeriodicSawtooth(_) => 0,
                SourceKind::OnOff(_) => 1,
                SourceKind::Battery => 2,
                SourceKind::StorageAugmented(_) => 3,
            }] += 1;
        }
        let out = engine::run(&sc).map_err(|e| format!("scenario {case}: {e}"))?;
        let (r, v) = compare_scenario(&sc, &out).map_err(|e| format!("scenario {case}: {e}"))?;
        retrievals += r;
        verdicts += v;
    }
    Ok(format!(
        "source windows: {}; {n} end-to-end scenarios (source kinds {kinds:?}), {retrievals} retrievals and \
         {verdicts} coordinator verdicts, zero discrepancies",
        per_kind.join(", ")
    ))
}

/// Recomputes a run tick by tick. Returns the number of retrievals and
/// coordinator verdicts compared.
fn compare_scenario(sc: &Scenario, out: &RunOutput) -> Result<(usize, usize), String> {
    let h = sc.horizon;
    let mut src_ticks = BTreeMap::new();
    for (i, s) in sc.sources.iter().enumerate() {
        let t = oracle_ticks(&s.kind, h, source_seed(sc.seed, i))?;
        let got = &out.summary.windows[i];
        ensure(
            got.0 == s.id && pairs(&got.1) == ehnet_oracle::ticks_to_pairs(&t),
            || format!("source {}", s.id),
        )?;
        src_ticks.insert(s.id.clone(), t);
    }

    let node = |id: &str| -> Vec<bool> {
        let n = sc.nodes.iter().find(|n| n.id == id).expect("node exists");
        if n.powered_by.is_empty() {
            vec![true; h as usize]
        } else {
            let lists: Vec<Vec<bool>> = n.powered_by.iter().map(|s| src_ticks[s].clone()).collect();
            ehnet_oracle::or_ticks(&lists, h)
        }
    };
    let link = |a: &str, b: &str| {
        let l = sc.links.iter().find(|l| l.joins(a, b)).expect("link exists");
        (l.hop_time, ehnet_oracle::and_ticks(&node(a), &node(b)))
    };
    for (t, got) in sc.retrieval_tasks.iter().zip(&out.summary.retrievals) {
        let mut hops = vec![link(&t.initiator, &t.target)];
        hops.extend(t.sensors.iter().map(|s| link(&t.target, s)));
        hops.push(link(&t.target, &t.initiator));
        let starts: Vec<u64> = got.hops.iter().map(|x| x.start).collect();
        let ok = match ehnet_oracle::retrieval(&hops, t.release, t.deadline) {
            Retrieval::Completed { completion, starts: s } => {
                got.status == TaskStatus::Completed && got.completion == Some(completion) && starts == s
            }
            Retrieval::Missed { starts: s } => got.status == TaskStatus::DeadlineMissed && starts == s,
        };
        ensure(ok, || format!("retrieval {}", t.id))?;
        let waits_ok = got
            .hops
            .iter()
            .zip(&got.waits)
            .all(|(x, w)| w.wait == x.start - x.ready);
        ensure(waits_ok, || format!("retrieval {} waits", t.id))?;
    }

    let spec = sc.superframe.as_ref().expect("generated with a superframe");
    let sf = out.summary.superframe.as_ref().expect("superframe run");
    let cfg = spec.config();
    let eh = ehnet_oracle::or_ticks(&src_ticks.values().cloned().collect::<Vec<_>>(), h);
    let mut all_ok = true;
    for (k, c) in spec.coordinators.iter().enumerate() {
        let parts = oracle_parts(&cfg, k, h);
        if sc.mode == Mode::Truncated {
            let (kept, b, a) = ehnet_oracle::truncation(&parts, &eh);
            let loss = &sf.truncation.as_ref().expect("truncated").coordinators[k];
            ensure(
                (loss.surviving_busy, loss.beacon_lost, loss.active_lost) == (kept, b, a),
                || format!("truncation of {c}"),
            )?;
        }
        let usable: Vec<bool> = parts
            .iter()
            .zip(&eh)
            .map(|(p, &on)| *p == Part::Active && (on || sc.mode == Mode::Baseline))
            .collect();
        let mine: Vec<&TxTask> = sc.tx_tasks.iter().filter(|t| t.coordinator == *c).collect();
        let Some(len) = mine.first().map(|t| t.slot_len) else {
            continue;
        };
        let slots = ehnet_oracle::grid_slots(&usable, k as u64 * cfg.busy_len(), len);
        let demands: Vec<_> = mine
            .iter()
            .map(|t| (t.slots_needed as u64, t.release, t.deadline))
            .collect();
        let assigned: Vec<Vec<(u64, u64)>> = mine
            .iter()
            .map(|t| {
                let a = sf
                    .schedule
                    .assignments
                    .iter()
                    .find(|a| a.task_id == t.id)
                    .expect("assignment");
                a.slots.iter().map(|s| (s.start, s.end)).collect()
            })
            .collect();
        ensure(ehnet_oracle::assignment_legal(&slots, &demands, &assigned), || {
            format!("illegal slots on {c}")
        })?;
        all_ok &= ehnet_oracle::feasible_hall(&slots, &demands);
    }
    ensure((sf.schedule.verdict == Verdict::Schedulable) == all_ok, || {
        "schedulability verdict".into()
    })?;
    Ok((sc.retrieval_tasks.len(), spec.coordinators.len()))
}

// ----------------------------------------------------------------------- AC3

fn ac3() -> Result<String, String> {
    let src = OnOffSource {
        on_dist: DurationDist::Exponential { mean: 4.0 },
        off_dist: DurationDist::Exponential { mean: 6.0 },
        initial_state: PowerState::On,
    };
    let renewal = 4.0 / (4.0 + 6.0);
    ensure((src.stationary_availability() - renewal).abs() < 1e-12, || {
        "stationary value".into()
    })?;
    let horizon = 1_000_000;
    let mut seen = Vec::new();
    for seed in 0..10u64 {
        let ws = SourceKind::OnOff(src.clone())
            .windows(horizon, seed)
            .map_err(|e| e.to_string())?;
        let a = window::covered_ticks(&ws) as f64 / horizon as f64;
        ensure((a - renewal).abs() <= 0.008, || {
            format!("seed {seed}: availability {a:.4}")
        })?;
        seen.push(a);
    }
    let lo = seen.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = seen.iter().copied().fold(0.0, f64::max);
    Ok(format!(
        "10 seeds at 10^6 ticks, availability in [{lo:.4}, {hi:.4}], target 0.400 +/- 0.008"
    ))
}

// ----------------------------------------------------------------------- AC4

fn ac4() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC4);
    let n = 100;
    let mut lost = 0;
    for case in 0..n {
        let beacon_len = rng.random_range(1..4);
        let active_len = rng.random_range(1..10);
        let coords: Vec<String> = (0..rng.random_range(1..=3)).map(|k| format!("C{k}")).collect();
        let period = (beacon_len + active_len) * coords.len() as u64 + rng.random_range(0..10);
        let cfg = SuperframeConfig {
            beacon_len,
            active_len,
            period,
        };
        let horizon = rng.random_range(100..=2000);
        let count = rng.random_range(0..40);
        let eh = random_windows(&mut rng, horizon, count, 80);
        let tl = sds::baseline_sds(&cfg, &coords, horizon).map_err(|e| e.to_string())?;
        let (cut, report) = sds::eh_truncate(&tl, &eh);
        let eh_ticks = ticks(&eh, horizon);
        for (k, loss) in report.coordinators.iter().enumerate() {
            let parts = oracle_parts(&cfg, k, horizon);
            ensure(parts_of(&tl, k) == parts, || format!("case {case}: timeline of C{k}"))?;
            let original = parts.iter().filter(|p| **p != Part::Idle).count() as u64;
            let (kept, b, a) = ehnet_oracle::truncation(&parts, &eh_ticks);
            ensure(loss.original_busy == original, || format!("case {case}: original busy"))?;
            ensure(
                loss.surviving_busy + loss.beacon_lost + loss.active_lost == original,
                || {
                    format!(
                        "case {case}: {} + {} + {} != {original}",
                        loss.surviving_busy, loss.beacon_lost, loss.active_lost
                    )
                },
            )?;
            ensure(
                (loss.surviving_busy, loss.beacon_lost, loss.active_lost) == (kept, b, a),
                || format!("case {case}: loss split differs from tick count"),
            )?;
            ensure(cut.coordinators[k].busy_ticks() == kept, || {
                format!("case {case}: cut timeline")
            })?;
            lost += b + a;
        }
    }

    let mut aligned = 0;
    while aligned < n {
        let period = rng.random_range(2..60);
        let phase = rng.random_range(0..period);
        let sources: Vec<_> = (0..rng.random_range(1..=4))
            .map(|_| PeriodicSawtoothSource::new(period, Duty::new(rng.random_range(1..10), 10), phase))
            .collect();
        let smallest = sources.iter().map(|s| s.on_ticks()).min().unwrap();
        if smallest < 2 {
            continue;
        }
        let budget = rng.random_range(1..smallest);
        let horizon = period * 30;
        let (cfg, tl) = sds::aligned_sds(&sources, budget, &["C0".to_string()], horizon).map_err(|e| e.to_string())?;
        let lists: Vec<_> = sources.iter().map(|s| s.windows(horizon).unwrap()).collect();
        let eh = window::union_windows(&lists).map_err(|e| e.to_string())?;
        let (_, report) = sds::eh_truncate(&tl, &eh);
        ensure(report.total_beacon_lost + report.total_active_lost == 0, || {
            format!("aligned {cfg:?} over period {period}: {report:?}")
        })?;
        aligned += 1;
    }
    Ok(format!(
        "{n} random pairs conserve beacon+active ticks exactly ({lost} ticks lost in total); \
         {aligned} in-phase equal-period sets align with zero truncation"
    ))
}

// ----------------------------------------------------------------------- AC5

struct Instance {
    cfg: SuperframeConfig,
    coords: usize,
    horizon: u64,
    eh: Vec<AvailabilityWindow>,
    slot_len: u64,
    tasks: Vec<(u32, u64, u64, usize)>,
}

/// Returns whether the instance was schedulable.
fn check_instance(inst: &Instance, search: bool) -> Result<bool, String> {
    let names: Vec<String> = (0..inst.coords).map(|k| format!("C{k}")).collect();
    let tl = sds::baseline_sds(&inst.cfg, &names, inst.horizon).map_err(|e| e.to_string())?;
    let (cut, _) = sds::eh_truncate(&tl, &inst.eh);
    let tasks: Vec<TxTask> = inst
        .tasks
        .iter()
        .enumerate()
        .map(|(i, &(n, r, d, c))| TxTask {
            id: format!("t{i}"),
            slots_needed: n,
            slot_len: inst.slot_len,
            release: r,
            deadline: d,
            coordinator: names[c].clone(),
        })
        .collect();
    let res = sds::schedulability_check(&tasks, &cut, &inst.eh).map_err(|e| e.to_string())?;
    let eh_ticks = ticks(&inst.eh, inst.horizon);
    let mut feasible = true;
    for (k, c) in names.iter().enumerate() {
        let usable: Vec<bool> = oracle_parts(&inst.cfg, k, inst.horizon)
            .iter()
            .zip(&eh_ticks)
            .map(|(p, &on)| *p == Part::Active && on)
            .collect();
        let slots = ehnet_oracle::grid_slots(&usable, k as u64 * inst.cfg.busy_len(), inst.slot_len);
        let mine: Vec<usize> = (0..tasks.len()).filter(|&i| tasks[i].coordinator == *c).collect();
        let demands: Vec<_> = mine
            .iter()
            .map(|&i| (tasks[i].slots_needed as u64, tasks[i].release, tasks[i].deadline))
            .collect();
        let assigned: Vec<Vec<(u64, u64)>> = mine
            .iter()
            .map(|&i| res.assignments[i].slots.iter().map(|s| (s.start, s.end)).collect())
            .collect();
        ensure(ehnet_oracle::assignment_legal(&slots, &demands, &assigned), || {
            "illegal assignment".into()
        })?;
        let hall = ehnet_oracle::feasible_hall(&slots, &demands);
        if search {
            ensure(hall == ehnet_oracle::feasible_search(&slots, &demands), || {
                "oracles disagree".into()
            })?;
        }
        feasible &= hall;
    }
    ensure((res.verdict == Verdict::Schedulable) == feasible, || {
        "verdict differs from brute force".into()
    })?;
    ensure(res.failed.is_empty() == feasible, || {
        "failed list inconsistent with verdict".into()
    })?;
    Ok(feasible)
}

fn ac5() -> Result<String, String> {
    // every multiset of up to four tasks from a fixed palette, on a few layouts
    let windows = [(0, 8), (0, 16), (4, 16), (8, 24), (0, 24)];
    let palette: Vec<(u32, u64, u64)> = (1..=3)
        .flat_map(|n| windows.iter().map(move |&(r, d)| (n, r, d)))
        .collect();
    let mut multisets: Vec<Vec<usize>> = vec![];
    fn extend(from: usize, cur: &mut Vec<usize>, p: usize, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == 4 {
            return;
        }
        for i in from..p {
            cur.push(i);
            extend(i, cur, p, out);
            cur.pop();
        }
    }
    extend(0, &mut Vec::new(), palette.len(), &mut multisets);
    let ehs = [vec![(0, 24)], vec![(0, 8), (16, 24)], vec![(0, 3), (9, 20)]];
    let cfg = SuperframeConfig {
        beacon_len: 1,
        active_len: 4,
        period: 8,
    };
    let (mut enumerated, mut schedulable) = (0, 0);
    for eh in &ehs {
        let eh: Vec<_> = eh
            .iter()
            .map(|&(s, e)| AvailabilityWindow::new(s, e).unwrap())
            .collect();
        for slot_len in [1, 2] {
            for set in &multisets {
                let inst = Instance {
                    cfg,
                    coords: 1,
                    horizon: 24,
                    eh: eh.clone(),
                    slot_len,
                    tasks: set
                        .iter()
                        .map(|&i| (palette[i].0, palette[i].1, palette[i].2, 0))
                        .collect(),
                };
                schedulable += usize::from(check_instance(&inst, true).map_err(|e| format!("{e}: {set:?}"))?);
                enumerated += 1;
            }
        }
    }

    // random instances up to horizon 200 with two coordinators
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC5);
    let random = 3000;
    for case in 0..random {
        let beacon_len = rng.random_range(1..3);
        let active_len = rng.random_range(1..8);
        let coords = rng.random_range(1..=2);
        let period = (beacon_len + active_len) * coords as u64 + rng.random_range(0..6);
        let horizon = rng.random_range(20..=200);
        let count = rng.random_range(0..10);
        let eh = random_windows(&mut rng, horizon, count, 60);
        let tasks = (0..rng.random_range(1..=4))
            .map(|_| {
                let r = rng.random_range(0..horizon);
                (
                    rng.random_range(1..=4),
                    r,
                    rng.random_range(r + 1..=horizon),
                    rng.random_range(0..coords),
                )
            })
            .collect();
        let inst = Instance {
            cfg: SuperframeConfig {
                beacon_len,
                active_len,
                period,
            },
            coords,
            horizon,
            eh,
            slot_len: rng.random_range(1..=3),
            tasks,
        };
        schedulable += usize::from(check_instance(&inst, true).map_err(|e| format!("random {case}: {e}"))?);
    }
    Ok(format!(
        "{enumerated} enumerated and {random} random instances (<= 4 tasks, horizon <= 200), verdict equals \
         Hall condition and exhaustive search on all, {schedulable} schedulable, every assignment legal"
    ))
}

// ----------------------------------------------------------------------- AC6

fn scenario_file(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    ehnet_core::scenario::parse_scenario(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ac6() -> Result<String, String> {
    let gated = scenario_file("fig2b.json");
    let mut always = gated.clone();
    for n in &mut always.nodes {
        n.powered_by.clear();
    }
    let g = engine::run(&gated).map_err(|e| e.to_string())?;
    let a = engine::run(&always).map_err(|e| e.to_string())?;
    let (rg, ra) = (&g.summary.retrievals[0], &a.summary.retrievals[0]);
    ensure(rg.completion == Some(10), || {
        format!("gated completion {:?}, expected 10", rg.completion)
    })?;
    ensure(ra.completion == Some(4), || {
        format!("always-on completion {:?}, expected 4", ra.completion)
    })?;
    ensure(ra.waits.iter().all(|w| w.wait == 0), || "always-on run waited".into())?;

    // each wait runs from readiness through the EH gap to the next window start
    let e = &g.summary.windows.iter().find(|(id, _)| id == "E").expect("source E").1;
    let powered = ticks(e, gated.horizon);
    for (hop, w) in rg.hops.iter().zip(&rg.waits) {
        ensure(w.wait == hop.start - hop.ready, || {
            format!("{}: wait bookkeeping", hop.link)
        })?;
        if w.wait > 0 {
            ensure(e.iter().any(|x| x.start == hop.start), || {
                format!("{}: start {} is no window start", hop.link, hop.start)
            })?;
            ensure((hop.ready..hop.start).all(|t| !powered[t as usize]), || {
                format!("{}: waited through power", hop.link)
            })?;
        } else {
            ensure(powered[hop.ready as usize], || {
                format!("{}: started unpowered", hop.link)
            })?;
        }
    }
    let waits: Vec<u64> = rg.waits.iter().map(|w| w.wait).collect();
    ensure(waits == [6, 0, 0, 0], || format!("waits {waits:?}"))?;
    Ok(format!(
        "E-gated retrieval completes at tick 10 with waits {waits:?} (gap [0,6) before window [6,10)), \
         always-on completes at tick 4"
    ))
}

// ----------------------------------------------------------------------- AC7

fn trace_bytes(sc: &Scenario) -> Result<Vec<u8>, String> {
    let out = engine::run(sc).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_jsonl(&out.trace, &mut buf).map_err(|e| e.to_string())?;
    Ok(buf)
}

fn ac7() -> Result<String, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    for f in &files {
        let sc = scenario_file(f);
        ensure(trace_bytes(&sc)? == trace_bytes(&sc)?, || format!("{f}: traces differ"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC7);
    let random = 100;
    for case in 0..random {
        let sc = random_scenario(&mut rng, 3000);
        ensure(trace_bytes(&sc)? == trace_bytes(&sc)?, || {
            format!("random scenario {case}: traces differ")
        })?;
    }

    let sc = scenario_file("onoff.json");
    let reps = 200;
    let render = |threads| -> Result<String, String> {
        let runs = replicate_with_threads(&sc, reps, sc.seed, threads).map_err(|e| e.to_string())?;
        serde_json::to_string(&runs).map_err(|e| e.to_string())
    };
    let one = render(1)?;
    for threads in [2, 4, 8] {
        ensure(render(threads)? == one, || format!("{threads} threads differ from 1"))?;
    }
    Ok(format!(
        "{} scenario files and {random} random scenarios give byte-identical traces; \
         {reps} replications identical on 1, 2, 4 and 8 threads",
        files.len()
    ))
}

// ----------------------------------------------------------------------- AC8

fn ac8() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC8);
    let sweeps = 200;
    let horizon = 5000;
    let mut steps = 0;
    for case in 0..sweeps {
        let which = rng.random_range(0..2);
        let inner = random_kind(&mut rng, which);
        let charge_rate = rng.random_range(0..5);
        let drain_rate = rng.random_range(0..5);
        let seed = rng.random();
        let inner_ws = inner.windows(horizon, seed).map_err(|e| e.to_string())?;
        let inner_ticks = ticks(&inner_ws, horizon);
        let mut prev = f64::NEG_INFINITY;
        for capacity in 1..=40 {
            let src = StorageAugmentedSource {
                inner: Box::new(inner.clone()),
                capacity,
                charge_rate,
                drain_rate,
                initial_charge: 0,
            };
            let ws = src.windows(horizon, seed).map_err(|e| e.to_string())?;
            let got = ticks(&ws, horizon);
            ensure(inner_ticks.iter().zip(&got).all(|(i, o)| !i || *o), || {
                format!("case {case} capacity {capacity}: inner tick lost")
            })?;
            let mean = window::mean_duration(&ws);
            ensure(mean >= prev, || {
                format!("case {case}: mean {mean} at capacity {capacity} below {prev}")
            })?;
            prev = mean;
            steps += 1;
        }
    }
    Ok(format!(
        "{sweeps} capacity sweeps (1..40, {steps} steps): mean window length never decreases, \
         every inner availability tick kept"
    ))
}
