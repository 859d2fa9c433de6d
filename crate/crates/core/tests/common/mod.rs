#![allow(dead_code)]

use ehnet_core::duty::Duty;
use ehnet_core::sources::{
    DurationDist, OnOffSource, PeriodicSawtoothSource, PowerState, SourceKind, StorageAugmentedSource,
};
use ehnet_core::window::AvailabilityWindow;
use proptest::prelude::*;

pub fn pairs(ws: &[AvailabilityWindow]) -> Vec<(u64, u64)> {
    ws.iter().map(|w| (w.start, w.end)).collect()
}

pub fn ticks(ws: &[AvailabilityWindow], horizon: u64) -> Vec<bool> {
    ehnet_oracle::pairs_to_ticks(&pairs(ws), horizon)
}

pub fn windows(pairs: &[(u64, u64)]) -> Vec<AvailabilityWindow> {
    pairs
        .iter()
        .map(|&(s, e)| AvailabilityWindow::new(s, e).unwrap())
        .collect()
}

/// Sorted, non-empty, and separated by at least one tick.
pub fn is_canonical(ws: &[AvailabilityWindow]) -> bool {
    ws.iter().all(|w| w.start < w.end) && ws.windows(2).all(|p| p[0].end < p[1].start)
}

pub fn sawtooth() -> impl Strategy<Value = PeriodicSawtoothSource> {
    (1u64..80, 1u64..=16)
        .prop_flat_map(|(period, den)| (Just(period), 0..=den, Just(den), 0..period))
        .prop_map(|(period, num, den, phase)| PeriodicSawtoothSource::new(period, Duty::new(num, den), phase))
}

pub fn dist() -> impl Strategy<Value = DurationDist> {
    prop_oneof![
        (1.0f64..30.0).prop_map(|mean| DurationDist::Exponential { mean }),
        (1u64..30).prop_map(|value| DurationDist::Fixed { value }),
        (1u64..15, 0u64..15).prop_map(|(min, extra)| DurationDist::Uniform { min, max: min + extra }),
    ]
}

pub fn onoff() -> impl Strategy<Value = OnOffSource> {
    (dist(), dist(), any::<bool>()).prop_map(|(on_dist, off_dist, on)| OnOffSource {
        on_dist,
        off_dist,
        initial_state: if on { PowerState::On } else { PowerState::Off },
    })
}

pub fn base_kind() -> impl Strategy<Value = SourceKind> {
    prop_oneof![
        sawtooth().prop_map(SourceKind::PeriodicSawtooth),
        onoff().prop_map(SourceKind::OnOff),
        Just(SourceKind::Battery),
    ]
}

pub fn storage() -> impl Strategy<Value = StorageAugmentedSource> {
    (base_kind(), 1u64..50, 0u64..5, 0u64..5)
        .prop_flat_map(|(inner, capacity, charge, drain)| {
            (Just(inner), Just(capacity), Just(charge), Just(drain), 0..=capacity)
        })
        .prop_map(
            |(inner, capacity, charge_rate, drain_rate, initial_charge)| StorageAugmentedSource {
                inner: Box::new(inner),
                capacity,
                charge_rate,
                drain_rate,
                initial_charge,
            },
        )
}

pub fn any_kind() -> impl Strategy<Value = SourceKind> {
    prop_oneof![3 => base_kind(), 1 => storage().prop_map(SourceKind::StorageAugmented)]
}

/// Per-tick reference availability of `kind`. On-off sources contribute
/// their sampled segments; everything else is recomputed from parameters.
pub fn oracle_ticks(kind: &SourceKind, horizon: u64, seed: u64) -> Vec<bool> {
    match kind {
        SourceKind::PeriodicSawtooth(s) => {
            ehnet_oracle::sawtooth_ticks(s.period, s.duty.numer(), s.duty.denom(), s.phase, horizon)
        }
        SourceKind::OnOff(s) => {
            let segs: Vec<(bool, u64)> = s
                .sample_segments(horizon, seed)
                .unwrap()
                .iter()
                .map(|g| (g.state == PowerState::On, g.len))
                .collect();
            ehnet_oracle::segment_ticks(&segs, horizon)
        }
        SourceKind::Battery => vec![true; horizon as usize],
        SourceKind::StorageAugmented(s) => ehnet_oracle::storage_ticks(
            &oracle_ticks(&s.inner, horizon, seed),
            s.capacity,
            s.charge_rate,
            s.drain_rate,
            s.initial_charge,
        ),
    }
}
