//! EH source models and the availability-window processes they generate.
//!
//! Every generator returns a sorted, pairwise-disjoint list of windows
//! confined to `[0, horizon)`. Periodic sawtooth sources are regulated into
//! square waves: the usable part of each period is the tail of the charge
//! ramp, `floor(duty * period)` ticks long. On-off sources alternate i.i.d.
//! positive on and off durations. Storage wraps any source and stretches its
//! windows with stored energy.

use std::collections::HashMap;

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::duty::Duty;
use crate::window::{self, AvailabilityWindow, Tick};

pub type SourceId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("invalid source: {field}: {reason}")]
    InvalidSource { field: &'static str, reason: String },
    #[error("source {index} produces no windows (zero on-time per period)")]
    NoWindows { index: usize },
    #[error("no periodic sources given")]
    NoSources,
    #[error("hyperperiod of the given periods overflows")]
    HyperperiodOverflow,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SourceError {
    SourceError::InvalidSource {
        field,
        reason: reason.into(),
    }
}

/// Periodic sawtooth output regulated into a square wave.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicSawtoothSource {
    pub period: Tick,
    pub duty: Duty,
    #[serde(default)]
    pub phase: Tick,
}

impl PeriodicSawtoothSource {
    pub fn new(period: Tick, duty: Duty, phase: Tick) -> Self {
        Self { period, duty, phase }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.period == 0 {
            return Err(invalid("period", "must be at least 1 tick"));
        }
        if !self.duty.is_valid() {
            return Err(invalid("duty", format!("{} is outside [0, 1]", self.duty)));
        }
        if self.phase >= self.period {
            return Err(invalid(
                "phase",
                format!("{} must be below the period {}", self.phase, self.period),
            ));
        }
        Ok(())
    }

    /// Usable ticks per period.
    pub fn on_ticks(&self) -> Tick {
        self.duty.on_ticks(self.period)
    }

    /// Offset of the window start within its period.
    fn start_offset(&self) -> Tick {
        self.period - self.on_ticks()
    }

    /// Start of the first per-period window (unclipped) at or after `t`.
    /// Only meaningful when `on_ticks() > 0`.
    pub fn next_start_at_or_after(&self, t: Tick) -> Tick {
        let residue = (self.phase + self.start_offset()) % self.period;
        t + (residue + self.period - t % self.period) % self.period
    }

    /// Windows over `[0, horizon)`. The period grid extends before `phase`,
    /// so a source with a non-zero phase starts with the clipped tail of the
    /// preceding period.
    pub fn windows(&self, horizon: Tick) -> Result<Vec<AvailabilityWindow>, SourceError> {
        self.validate()?;
        let on = self.on_ticks();
        let mut out: Vec<AvailabilityWindow> = Vec::new();
        if on == 0 {
            return Ok(out);
        }
        let mut end = if self.phase > 0 { self.phase } else { self.period };
        while end - on.min(end) < horizon {
            let start = end.saturating_sub(on);
            let clipped = end.min(horizon);
            match out.last_mut() {
                Some(last) if last.end == start => last.end = clipped,
                _ => out.extend(AvailabilityWindow::new(start, clipped)),
            }
            end += self.period;
        }
        Ok(out)
    }
}

/// Per-period windows of a sawtooth source over `[0, horizon)`.
pub fn sawtooth_windows(
    source: &PeriodicSawtoothSource,
    horizon: Tick,
) -> Result<Vec<AvailabilityWindow>, SourceError> {
    source.windows(horizon)
}

/// Duration distribution of on or off periods, parameters in ticks.
///
/// Durations are whole ticks. The exponential case is realized by its
/// discrete memoryless counterpart, a geometric law on `{1, 2, ...}` with the
/// requested mean, so the mean is exact and must be at least one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationDist {
    Exponential { mean: f64 },
    Fixed { value: Tick },
    Uniform { min: Tick, max: Tick },
}

impl DurationDist {
    pub fn validate(&self, field: &'static str) -> Result<(), SourceError> {
        match *self {
            DurationDist::Exponential { mean } if !(mean.is_finite() && mean >= 1.0) => Err(invalid(
                field,
                format!("exponential mean {mean} must be a finite number of ticks >= 1"),
            )),
            DurationDist::Fixed { value: 0 } => Err(invalid(field, "fixed duration must be >= 1")),
            DurationDist::Uniform { min, max } if min == 0 || min > max => Err(invalid(
                field,
                format!("uniform range [{min}, {max}] must satisfy 1 <= min <= max"),
            )),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DurationDist::Exponential { mean } => mean,
            DurationDist::Fixed { value } => value as f64,
            DurationDist::Uniform { min, max } => (min + max) as f64 / 2.0,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Tick {
        match *self {
            DurationDist::Exponential { mean } => {
                // validated: 1/mean lies in (0, 1]
                let geo = Geometric::new(1.0 / mean).expect("validated mean");
                geo.sample(rng).saturating_add(1)
            }
            DurationDist::Fixed { value } => value,
            DurationDist::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerState {
    On,
    Off,
}

impl PowerState {
    pub fn flip(self) -> Self {
        match self {
            PowerState::On => PowerState::Off,
            PowerState::Off => PowerState::On,
        }
    }
}

/// Alternating renewal process with i.i.d. on and off durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnOffSource {
    pub on_dist: DurationDist,
    pub off_dist: DurationDist,
    #[serde(default = "default_initial_state")]
    pub initial_state: PowerState,
}

fn default_initial_state() -> PowerState {
    PowerState::On
}

/// One sampled on or off period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub state: PowerState,
    pub len: Tick,
}

impl OnOffSource {
    pub fn validate(&self) -> Result<(), SourceError> {
        self.on_dist.validate("on_dist")?;
        self.off_dist.validate("off_dist")
    }

    /// Long-run available fraction `E[on] / (E[on] + E[off])`.
    pub fn stationary_availability(&self) -> f64 {
        let on = self.on_dist.mean();
        on / (on + self.off_dist.mean())
    }

    /// Samples alternating segments until their total reaches `horizon`. The
    /// last segment is not clipped.
    pub fn sample_segments(&self, horizon: Tick, seed: u64) -> Result<Vec<Segment>, SourceError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.initial_state;
        let mut elapsed: Tick = 0;
        let mut out = Vec::new();
        while elapsed < horizon {
            let dist = match state {
                PowerState::On => &self.on_dist,
                PowerState::Off => &self.off_dist,
            };
            let len = dist.sample(&mut rng);
            out.push(Segment { state, len });
            elapsed = elapsed.saturating_add(len);
            state = state.flip();
        }
        Ok(out)
    }

    pub fn windows(&self, horizon: Tick, seed: u64) -> Result<Vec<AvailabilityWindow>, SourceError> {
        let mut t: Tick = 0;
        let mut out = Vec::new();
        for seg in self.sample_segments(horizon, seed)? {
            let end = t.saturating_add(seg.len);
            if seg.state == PowerState::On {
                out.extend(AvailabilityWindow::new(t, end.min(horizon)));
            }
            t = end;
        }
        Ok(out)
    }
}

/// On-off windows over `[0, horizon)`; segments straddling the horizon are
/// clipped.
pub fn onoff_windows(source: &OnOffSource, horizon: Tick, seed: u64) -> Result<Vec<AvailabilityWindow>, SourceError> {
    source.windows(horizon, seed)
}

/// Any source with an energy store attached. Stored energy is counted in
/// abstract integer units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageAugmentedSource {
    pub inner: Box<SourceKind>,
    pub capacity: u64,
    pub charge_rate: u64,
    pub drain_rate: u64,
    #[serde(default)]
    pub initial_charge: u64,
}

impl StorageAugmentedSource {
    pub fn validate(&self) -> Result<(), SourceError> {
        if self.capacity == 0 {
            return Err(invalid("capacity", "must be positive"));
        }
        if self.initial_charge > self.capacity {
            return Err(invalid(
                "initial_charge",
                format!("{} exceeds capacity {}", self.initial_charge, self.capacity),
            ));
        }
        self.inner.validate()
    }

    /// Windows of the augmented source given the inner source's windows.
    ///
    /// Energy is added at `charge_rate` per inner-on tick (capped at
    /// `capacity`) and spent at `drain_rate` per inner-off tick supplied. An
    /// inner-off tick is supplied while the store is non-empty; the last one
    /// may drain less than `drain_rate`. Every step is monotone in the stored
    /// amount, so a larger store never loses a tick a smaller one supplies.
    pub fn extend_windows(&self, inner: &[AvailabilityWindow], horizon: Tick) -> Vec<AvailabilityWindow> {
        let mut energy = self.initial_charge;
        let mut pairs: Vec<(Tick, Tick)> = Vec::with_capacity(inner.len() * 2 + 1);
        let supply = |from: Tick, to: Tick, energy: &mut u64, pairs: &mut Vec<(Tick, Tick)>| {
            if from >= to || *energy == 0 {
                return;
            }
            let gap = to - from;
            let ticks = match self.drain_rate {
                0 => gap,
                d => gap.min(energy.div_ceil(d)),
            };
            *energy = energy.saturating_sub(ticks.saturating_mul(self.drain_rate));
            pairs.push((from, from + ticks));
        };
        let mut cursor: Tick = 0;
        for w in window::clip(inner, 0, horizon) {
            supply(cursor, w.start, &mut energy, &mut pairs);
            pairs.push((w.start, w.end));
            energy = energy
                .saturating_add(self.charge_rate.saturating_mul(w.duration()))
                .min(self.capacity);
            cursor = w.end;
        }
        supply(cursor, horizon, &mut energy, &mut pairs);
        window::normalize(pairs)
    }

    pub fn windows(&self, horizon: Tick, seed: u64) -> Result<Vec<AvailabilityWindow>, SourceError> {
        self.validate()?;
        let inner = self.inner.windows(horizon, seed)?;
        Ok(self.extend_windows(&inner, horizon))
    }
}

/// Storage-augmented windows; `seed` feeds a stochastic inner source.
pub fn storage_windows(
    source: &StorageAugmentedSource,
    horizon: Tick,
    seed: u64,
) -> Result<Vec<AvailabilityWindow>, SourceError> {
    source.windows(horizon, seed)
}

/// Parametric description of one EH source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    PeriodicSawtooth(PeriodicSawtoothSource),
    OnOff(OnOffSource),
    /// Always available; the non-harvested share of a partially EH-powered
    /// device.
    Battery,
    StorageAugmented(StorageAugmentedSource),
}

impl SourceKind {
    pub fn validate(&self) -> Result<(), SourceError> {
        match self {
            SourceKind::PeriodicSawtooth(s) => s.validate(),
            SourceKind::OnOff(s) => s.validate(),
            SourceKind::Battery => Ok(()),
            SourceKind::StorageAugmented(s) => s.validate(),
        }
    }

    pub fn windows(&self, horizon: Tick, seed: u64) -> Result<Vec<AvailabilityWindow>, SourceError> {
        match self {
            SourceKind::PeriodicSawtooth(s) => s.windows(horizon),
            SourceKind::OnOff(s) => s.windows(horizon, seed),
            SourceKind::Battery => Ok(AvailabilityWindow::new(0, horizon).into_iter().collect()),
            SourceKind::StorageAugmented(s) => s.windows(horizon, seed),
        }
    }

    /// True for sources whose energy is harvested (anything not a bare
    /// battery; storage counts as harvested when its inner source is).
    pub fn is_harvested(&self) -> bool {
        match self {
            SourceKind::Battery => false,
            SourceKind::StorageAugmented(s) => s.inner.is_harvested(),
            _ => true,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        match self {
            SourceKind::OnOff(_) => true,
            SourceKind::StorageAugmented(s) => s.inner.is_stochastic(),
            _ => false,
        }
    }

    pub fn as_periodic(&self) -> Option<&PeriodicSawtoothSource> {
        match self {
            SourceKind::PeriodicSawtooth(s) => Some(s),
            _ => None,
        }
    }
}

/// A named source as registered in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub id: SourceId,
    #[serde(default)]
    pub disabled: bool,
    #[serde(flatten)]
    pub kind: SourceKind,
}

/// Statistics of the round-robin switcher cycle over several periodic
/// sources, together with the `[max T_i, sum T_i]` bracket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultantPeriodEstimate {
    #[serde(serialize_with = "serialize_ratio")]
    pub mean_cycle: Ratio<u64>,
    pub min_cycle: Tick,
    pub max_cycle: Tick,
    pub lower_bound: Tick,
    pub upper_bound: Tick,
    pub cycles_observed: usize,
    /// Individual cycles shorter than `lower_bound`. The bracket holds for
    /// the mean; single cycles may undershoot it.
    pub cycles_below_lower: usize,
    pub hyperperiod: Tick,
}

impl ResultantPeriodEstimate {
    pub fn mean_f64(&self) -> f64 {
        *self.mean_cycle.numer() as f64 / *self.mean_cycle.denom() as f64
    }

    pub fn mean_within_bounds(&self) -> bool {
        Ratio::from_integer(self.lower_bound) <= self.mean_cycle
            && self.mean_cycle <= Ratio::from_integer(self.upper_bound)
    }

    /// Mean cycle rounded to the nearest tick, halves rounding up.
    pub fn rounded_mean(&self) -> Tick {
        let (n, d) = (*self.mean_cycle.numer(), *self.mean_cycle.denom());
        (2 * n + d) / (2 * d)
    }
}

fn serialize_ratio<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Ratio", 3)?;
    st.serialize_field("num", r.numer())?;
    st.serialize_field("den", r.denom())?;
    st.serialize_field("value", &(*r.numer() as f64 / *r.denom() as f64))?;
    st.end()
}

pub fn hyperperiod(periods: impl IntoIterator<Item = Tick>) -> Result<Tick, SourceError> {
    periods.into_iter().try_fold(1u64, |acc, p| {
        let g = acc.gcd(&p);
        (acc / g).checked_mul(p).ok_or(SourceError::HyperperiodOverflow)
    })
}

/// Round-robin switcher cycle over periodic sources.
///
/// A cycle starts at a window of the first source, then takes the next
/// unconsumed window of each following source that starts at or after the
/// previously taken window's start, ending with source `m`. The next cycle
/// starts at the next unconsumed window of the first source at or after the
/// last taken start. The process state is periodic in the hyperperiod, so
/// the statistics are taken over its recurrent orbit, which makes the mean
/// exact.
pub fn resultant_cycle(sources: &[PeriodicSawtoothSource]) -> Result<ResultantPeriodEstimate, SourceError> {
    if sources.is_empty() {
        return Err(SourceError::NoSources);
    }
    for (index, s) in sources.iter().enumerate() {
        s.validate()?;
        if s.on_ticks() == 0 {
            return Err(SourceError::NoWindows { index });
        }
    }
    let hyper = hyperperiod(sources.iter().map(|s| s.period))?;
    let m = sources.len();

    // last consumed start per source
    let mut consumed: Vec<Option<Tick>> = vec![None; m];
    let first = sources[0].next_start_at_or_after(0);
    consumed[0] = Some(first);
    let mut starts: Vec<Tick> = vec![first];
    let mut seen: HashMap<(Tick, u64), usize> = HashMap::new();

    let next_unconsumed = |src: &PeriodicSawtoothSource, prev: Option<Tick>, from: Tick| {
        let from = match prev {
            Some(p) if p >= from => p + 1,
            _ => from,
        };
        src.next_start_at_or_after(from)
    };

    let orbit_start = loop {
        let c = *starts.last().expect("non-empty");
        // Only sources whose last consumed window starts at c influence the
        // future beyond c's residue.
        let mask = consumed
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == Some(c))
            .fold(0u64, |acc, (j, _)| acc | (1 << j.min(63)));
        if let Some(&i) = seen.get(&(c % hyper, mask)) {
            break i;
        }
        seen.insert((c % hyper, mask), starts.len() - 1);

        let mut s = c;
        for (j, src) in sources.iter().enumerate().skip(1) {
            s = next_unconsumed(src, consumed[j], s);
            consumed[j] = Some(s);
        }
        let next = next_unconsumed(&sources[0], consumed[0], s);
        consumed[0] = Some(next);
        starts.push(next);
    };

    let orbit = &starts[orbit_start..];
    let lengths: Vec<Tick> = orbit.windows(2).map(|p| p[1] - p[0]).collect();
    let lower = sources.iter().map(|s| s.period).max().unwrap_or(0);
    let upper = sources.iter().map(|s| s.period).sum();
    let total = orbit[orbit.len() - 1] - orbit[0];
    Ok(ResultantPeriodEstimate {
        mean_cycle: Ratio::new(total, lengths.len() as u64),
        min_cycle: lengths.iter().copied().min().unwrap_or(0),
        max_cycle: lengths.iter().copied().max().unwrap_or(0),
        lower_bound: lower,
        upper_bound: upper,
        cycles_observed: lengths.len(),
        cycles_below_lower: lengths.iter().filter(|&&l| l < lower).count(),
        hyperperiod: hyper,
    })
}
