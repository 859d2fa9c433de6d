//! Naive per-tick reference interpreters.
//!
//! Everything here works on plain integers and boolean tick vectors and is
//! written for obviousness, not speed. Test suites compare the event-driven
//! implementation against these.

/// Availability of tick `t` for a sawtooth source with duty `num/den`.
///
/// The period grid has boundaries at `phase + k * period` for every integer
/// `k`; the usable part of each period is its last `floor(duty * period)`
/// ticks.
pub fn sawtooth_on(period: u64, num: u64, den: u64, phase: u64, t: u64) -> bool {
    let on = on_ticks(period, num, den);
    if on == 0 {
        return false;
    }
    let pos = (t % period + period - phase % period) % period;
    pos >= period - on
}

pub fn on_ticks(period: u64, num: u64, den: u64) -> u64 {
    (num as u128 * period as u128 / den as u128) as u64
}

pub fn sawtooth_ticks(period: u64, num: u64, den: u64, phase: u64, horizon: u64) -> Vec<bool> {
    (0..horizon).map(|t| sawtooth_on(period, num, den, phase, t)).collect()
}

/// Expands alternating `(on, len)` segments into ticks, cut at `horizon`.
pub fn segment_ticks(segments: &[(bool, u64)], horizon: u64) -> Vec<bool> {
    let mut out = Vec::new();
    for &(on, len) in segments {
        for _ in 0..len {
            if out.len() as u64 == horizon {
                return out;
            }
            out.push(on);
        }
    }
    out.resize(horizon as usize, false);
    out
}

/// Storage wrapper evaluated tick by tick: an off tick is supplied while
/// any energy is left.
pub fn storage_ticks(inner: &[bool], capacity: u64, charge: u64, drain: u64, initial: u64) -> Vec<bool> {
    let mut energy = initial;
    inner
        .iter()
        .map(|&on| {
            if on {
                energy = (energy + charge).min(capacity);
                true
            } else if energy > 0 {
                energy = energy.saturating_sub(drain);
                true
            } else {
                false
            }
        })
        .collect()
}

/// Converts half-open `(start, end)` pairs into ticks over `[0, horizon)`.
pub fn pairs_to_ticks(pairs: &[(u64, u64)], horizon: u64) -> Vec<bool> {
    let mut out = vec![false; horizon as usize];
    for &(s, e) in pairs {
        for t in s..e.min(horizon) {
            out[t as usize] = true;
        }
    }
    out
}

/// Maximal runs of `true`, as half-open pairs.
pub fn ticks_to_pairs(ticks: &[bool]) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &on) in ticks.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(t as u64),
            (false, Some(s)) => {
                out.push((s, t as u64));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, ticks.len() as u64));
    }
    out
}

pub fn and_ticks(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

pub fn or_ticks(lists: &[Vec<bool>], horizon: u64) -> Vec<bool> {
    (0..horizon as usize)
        .map(|t| lists.iter().any(|l| l.get(t).copied().unwrap_or(false)))
        .collect()
}

pub fn count_on(ticks: &[bool]) -> u64 {
    ticks.iter().filter(|&&b| b).count() as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Retrieval {
    Completed { completion: u64, starts: Vec<u64> },
    Missed { starts: Vec<u64> },
}

/// Walks a hop sequence tick by tick. Hop `i` takes `hops[i].0` ticks and
/// needs `hops[i].1[t]` for every tick it occupies; it must end by
/// `deadline`. Ticks past the end of a power vector are unpowered.
pub fn retrieval(hops: &[(u64, Vec<bool>)], release: u64, deadline: u64) -> Retrieval {
    let mut t = release;
    let mut starts = Vec::new();
    for (len, power) in hops {
        let mut s = t;
        loop {
            if s + len > deadline {
                return Retrieval::Missed { starts };
            }
            if (s..s + len).all(|x| power.get(x as usize).copied().unwrap_or(false)) {
                break;
            }
            s += 1;
        }
        starts.push(s);
        t = s + len;
    }
    Retrieval::Completed { completion: t, starts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Idle,
    Beacon,
    Active,
}

/// Superframe part of tick `t` for a coordinator tiled from `origin`.
pub fn superframe_part(t: u64, origin: u64, period: u64, beacon: u64, active: u64) -> Part {
    if t < origin {
        return Part::Idle;
    }
    let off = (t - origin) % period;
    if off < beacon {
        Part::Beacon
    } else if off < beacon + active {
        Part::Active
    } else {
        Part::Idle
    }
}

/// `(surviving busy, beacon lost, active lost)` ticks after cutting `parts`
/// down to `eh`.
pub fn truncation(parts: &[Part], eh: &[bool]) -> (u64, u64, u64) {
    let mut kept = 0;
    let mut beacon_lost = 0;
    let mut active_lost = 0;
    for (p, &on) in parts.iter().zip(eh) {
        match (p, on) {
            (Part::Idle, _) => {}
            (_, true) => kept += 1,
            (Part::Beacon, false) => beacon_lost += 1,
            (Part::Active, false) => active_lost += 1,
        }
    }
    (kept, beacon_lost, active_lost)
}

/// Slots `[g, g + len)` with `g = origin (mod len)` whose every tick is usable.
pub fn grid_slots(usable: &[bool], origin: u64, len: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut g = origin % len;
    while g + len <= usable.len() as u64 {
        if (g..g + len).all(|t| usable[t as usize]) {
            out.push((g, g + len));
        }
        g += len;
    }
    out
}

/// `(slots_needed, release, deadline)`.
pub type Demand = (u64, u64, u64);

fn eligible(slot: (u64, u64), d: &Demand) -> bool {
    slot.0 >= d.1 && slot.1 <= d.2
}

/// Feasibility by the generalized Hall condition: every subset of tasks must
/// see at least as many eligible slots as it needs in total.
pub fn feasible_hall(slots: &[(u64, u64)], tasks: &[Demand]) -> bool {
    let n = tasks.len();
    assert!(n < 20, "subset enumeration");
    (1u32..(1 << n)).all(|mask| {
        let members: Vec<&Demand> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &tasks[i]).collect();
        let need: u64 = members.iter().map(|d| d.0).sum();
        let have = slots
            .iter()
            .filter(|s| members.iter().any(|d| eligible(**s, d)))
            .count() as u64;
        have >= need
    })
}

/// Feasibility by exhaustive search over slot-to-task assignments. A branch
/// is cut only when some task has fewer eligible slots left than it needs.
pub fn feasible_search(slots: &[(u64, u64)], tasks: &[Demand]) -> bool {
    fn go(k: usize, slots: &[(u64, u64)], tasks: &[Demand], left: &mut Vec<u64>) -> bool {
        if left.iter().all(|&l| l == 0) {
            return true;
        }
        let rest = &slots[k..];
        if (left.iter().sum::<u64>() as usize) > rest.len()
            || tasks
                .iter()
                .zip(left.iter())
                .any(|(d, &l)| rest.iter().filter(|s| eligible(**s, d)).count() < l as usize)
        {
            return false;
        }
        for i in 0..tasks.len() {
            if left[i] > 0 && eligible(slots[k], &tasks[i]) {
                left[i] -= 1;
                let ok = go(k + 1, slots, tasks, left);
                left[i] += 1;
                if ok {
                    return true;
                }
            }
        }
        go(k + 1, slots, tasks, left)
    }
    let mut left: Vec<u64> = tasks.iter().map(|d| d.0).collect();
    go(0, slots, tasks, &mut left)
}

/// Checks an assignment: every slot is one of `slots`, lies in its task's
/// `[release, deadline)`, no slot is used twice, and each task holds either
/// exactly its demand or nothing.
pub fn assignment_legal(slots: &[(u64, u64)], tasks: &[Demand], assigned: &[Vec<(u64, u64)>]) -> bool {
    let mut used = Vec::new();
    for (d, a) in tasks.iter().zip(assigned) {
        if !a.is_empty() && a.len() as u64 != d.0 {
            return false;
        }
        for s in a {
            if !slots.contains(s) || !eligible(*s, d) || used.contains(s) {
                return false;
            }
            used.push(*s);
        }
    }
    true
}

/// `(period, on ticks, phase)` of a sawtooth source.
pub type Saw = (u64, u64, u64);

fn is_start(src: &Saw, t: u64) -> bool {
    let (p, on, phase) = *src;
    (t % p + p - phase % p) % p == p - on
}

fn scan_start(src: &Saw, from: u64) -> u64 {
    (from..).find(|&t| is_start(src, t)).expect("periodic")
}

/// Round-robin switcher cycles, simulated from explicit window starts until
/// the full state repeats modulo the hyperperiod. Returns the cycle lengths
/// of the repeating part, which may be several turns of the minimal orbit.
pub fn switcher_cycles(sources: &[Saw]) -> Vec<u64> {
    let h = sources.iter().fold(1u64, |acc, s| acc / gcd(acc, s.0) * s.0);
    let m = sources.len();
    let mut last: Vec<Option<u64>> = vec![None; m];
    let mut c = scan_start(&sources[0], 0);
    last[0] = Some(c);
    let mut starts = vec![c];
    let mut states: std::collections::HashMap<(u64, Vec<Option<u64>>), usize> = Default::default();
    loop {
        // how far each source's last consumed start lies behind c
        let key = (c % h, last.iter().map(|l| l.map(|x| c - x)).collect());
        if let Some(&i) = states.get(&key) {
            return starts[i..].windows(2).map(|w| w[1] - w[0]).collect();
        }
        states.insert(key, starts.len() - 1);
        let mut s = c;
        for j in 1..m {
            let from = if last[j].is_some_and(|l| l >= s) {
                last[j].unwrap() + 1
            } else {
                s
            };
            s = scan_start(&sources[j], from);
            last[j] = Some(s);
        }
        let from = if last[0].is_some_and(|l| l >= s) {
            last[0].unwrap() + 1
        } else {
            s
        };
        c = scan_start(&sources[0], from);
        last[0] = Some(c);
        starts.push(c);
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
