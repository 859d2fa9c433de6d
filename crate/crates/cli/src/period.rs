//! `analyze-period`: resultant-cycle statistics against the
//! `[max T_i, sum T_i]` bracket.

use std::io::Write;

use ehnet_core::duty::Duty;
use ehnet_core::sources::{resultant_cycle, PeriodicSawtoothSource, ResultantPeriodEstimate};
use ehnet_core::window::{self, Tick};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::outputs::{self, pretty};
use crate::{load, say, AnalyzeArgs, CliError, Outcome};

/// Mean inside the bracket, and equal to the period for a single source.
pub fn verdict(sources: &[PeriodicSawtoothSource], est: &ResultantPeriodEstimate) -> bool {
    est.mean_within_bounds() && (sources.len() != 1 || est.mean_cycle == sources[0].period.into())
}

/// Largest spacing between consecutive starts of the union's windows,
/// taken over one steady-state hyperperiod. Zero when the union never
/// breaks.
pub fn union_max_gap(sources: &[PeriodicSawtoothSource], hyperperiod: Tick) -> Tick {
    let h = hyperperiod;
    let lists: Vec<_> = sources
        .iter()
        .map(|s| s.windows(3 * h).expect("validated source"))
        .collect();
    let union = window::union_windows(&lists).expect("generated windows are sorted");
    let starts: Vec<Tick> = union.iter().map(|w| w.start).filter(|&s| s >= h).collect();
    starts
        .windows(2)
        .take_while(|p| p[0] < 2 * h)
        .map(|p| p[1] - p[0])
        .max()
        .unwrap_or(0)
}

pub fn cmd_analyze_period(args: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    if let Some(n) = args.sweep {
        let report = sweep(n, args.seed.unwrap_or(0));
        let doc = serde_json::to_value(&report.summary).expect("summary serializes");
        let text = pretty(&doc);
        if let Some(dir) = &args.out {
            let rows = sweep_csv(&report.rows)?;
            outputs::write_files(
                dir,
                &[
                    ("period_sweep.json".into(), text.clone().into_bytes()),
                    ("period_sweep.csv".into(), rows),
                ],
            )?;
        }
        say(stdout, &text)?;
        let s = &report.summary;
        return Ok(if s.passed == s.configs {
            Outcome::Success
        } else {
            Outcome::CheckFailed
        });
    }

    let path = args
        .scenario
        .as_ref()
        .expect("clap requires --scenario without --sweep");
    let scenario = load(path, args.seed, None)?;
    let ids: Vec<&str> = scenario
        .sources
        .iter()
        .filter(|s| !s.disabled && s.kind.as_periodic().is_some())
        .map(|s| s.id.as_str())
        .collect();
    let sources = scenario.periodic_sources();
    if sources.is_empty() {
        return Err(CliError::NotApplicable(
            "the scenario has no enabled periodic sources".into(),
        ));
    }
    let est = resultant_cycle(&sources).map_err(|e| CliError::NotApplicable(e.to_string()))?;
    let pass = verdict(&sources, &est);
    let doc = json!({
        "scenario": scenario,
        "seed": scenario.seed,
        "sources": ids.iter().zip(&sources).map(|(id, s)| json!({
            "id": id, "period": s.period, "duty": s.duty, "phase": s.phase, "on_ticks": s.on_ticks()
        })).collect::<Vec<_>>(),
        "mean_cycle": est.mean_f64(),
        "estimate": est,
        "bounds": [est.lower_bound, est.upper_bound],
        "verdict": if pass { "pass" } else { "fail" },
        "union_max_gap": union_max_gap(&sources, est.hyperperiod),
    });
    let text = pretty(&doc);
    if let Some(dir) = &args.out {
        outputs::write_files(dir, &[("period.json".into(), text.clone().into_bytes())])?;
    }
    say(stdout, &text)?;
    Ok(if pass { Outcome::Success } else { Outcome::CheckFailed })
}

/// One random configuration: 1 to 4 sources, periods 2..=60, duties
/// 0.10..=0.90 in steps of 0.01, phases within the period. A source whose
/// duty leaves no whole tick on is redrawn; the count is returned.
pub fn random_config(rng: &mut ChaCha8Rng) -> (Vec<PeriodicSawtoothSource>, usize) {
    let m = rng.random_range(1..=4);
    let mut redrawn = 0;
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let period = rng.random_range(2..=60);
        let duty = Duty::new(rng.random_range(10..=90), 100);
        let phase = rng.random_range(0..period);
        let s = PeriodicSawtoothSource::new(period, duty, phase);
        if s.on_ticks() == 0 {
            redrawn += 1;
        } else {
            out.push(s);
        }
    }
    (out, redrawn)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub config: usize,
    pub sources: usize,
    pub periods: String,
    pub mean_cycle: f64,
    pub min_cycle: Tick,
    pub max_cycle: Tick,
    pub lower_bound: Tick,
    pub upper_bound: Tick,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub seed: u64,
    pub configs: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub single_source_configs: usize,
    pub single_source_exact: usize,
    pub redrawn_sources: usize,
    /// Individual cycles below `max T_i`; the bracket is on the mean.
    pub cycles_below_lower: usize,
    pub cycles_observed: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub summary: SweepSummary,
    pub rows: Vec<SweepRow>,
}

pub fn sweep(n: usize, seed: u64) -> SweepReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut s = SweepSummary {
        seed,
        configs: n,
        passed: 0,
        pass_rate: 0.0,
        single_source_configs: 0,
        single_source_exact: 0,
        redrawn_sources: 0,
        cycles_below_lower: 0,
        cycles_observed: 0,
    };
    for config in 0..n {
        let (sources, redrawn) = random_config(&mut rng);
        s.redrawn_sources += redrawn;
        let est = resultant_cycle(&sources).expect("generated sources have windows");
        let pass = verdict(&sources, &est);
        s.passed += usize::from(pass);
        if sources.len() == 1 {
            s.single_source_configs += 1;
            s.single_source_exact += usize::from(est.mean_cycle == sources[0].period.into());
        }
        s.cycles_below_lower += est.cycles_below_lower;
        s.cycles_observed += est.cycles_observed;
        rows.push(SweepRow {
            config,
            sources: sources.len(),
            periods: sources
                .iter()
                .map(|x| x.period.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            mean_cycle: est.mean_f64(),
            min_cycle: est.min_cycle,
            max_cycle: est.max_cycle,
            lower_bound: est.lower_bound,
            upper_bound: est.upper_bound,
            pass,
        });
    }
    s.pass_rate = if n == 0 { 1.0 } else { s.passed as f64 / n as f64 };
    SweepReport { summary: s, rows }
}

fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io {
            path: "period_sweep.csv".into(),
            source: e.into(),
        })?;
    }
    w.into_inner().map_err(|e| CliError::Io {
        path: "period_sweep.csv".into(),
        source: e.into_error(),
    })
}
