use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chromashift::adaptation::AdaptationParams;
use chromashift::colorimetry::ChromaticityUv;
use chromashift::psychophysics::{
    fit_adaptation, fit_psychometric, psychometric, signed_offset, CalibrationRecord, Choice,
    PsychometricParams, Record, SessionTrials,
};
use chromashift_study::{ManualClock, Phase, Response, SessionConfig, SessionStore, TrialOutcome};

const TRUTH: AdaptationParams = AdaptationParams { k1: 0.05, k2: 0.8 };
const OBSERVER: PsychometricParams = PsychometricParams { k: 400.0, x0: 0.0 };

/// Answers like an observer whose state follows the model with `TRUTH`.
/// Returns the response times of every answer, in seconds.
fn run_participant(store: &SessionStore, clock: &ManualClock, id: &str, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = store.snapshot(id).unwrap().config;
    let dir = cfg.schedule.direction().unwrap();
    let mut timings = Vec::new();
    loop {
        match store.next_trial(id).unwrap() {
            TrialOutcome::Notice { phase: Phase::Done, .. } => break,
            TrialOutcome::Notice { remaining, .. } => clock.advance(remaining.unwrap_or(0.0)),
            TrialOutcome::Trial(t) => {
                let a = match t.phase {
                    Phase::Measurement => cfg.schedule.adaptation_closed_form(&TRUTH, t.t).unwrap(),
                    _ => ChromaticityUv::d65(),
                };
                let p = psychometric(signed_offset(t.midpoint, a, dir), &OBSERVER);
                let choice = if rng.random::<f64>() < p { Choice::Lagging } else { Choice::Further };
                clock.advance(t.display_duration + 0.6);
                let start = Instant::now();
                store
                    .respond(id, &Response { trial_id: t.trial_id, choice, latency: Some(0.6) })
                    .unwrap();
                timings.push(start.elapsed().as_secs_f64());
                clock.advance(3.75 - t.display_duration - 0.6);
            }
        }
    }
    timings
}

fn offline_fit(export: &str, cfg: &SessionConfig) -> chromashift::psychophysics::FitResult {
    let records: Vec<Record> = export
        .lines()
        .enumerate()
        .map(|(i, l)| Record::from_line(l, i + 1).unwrap())
        .collect();
    let calib: Vec<CalibrationRecord> = records
        .iter()
        .filter_map(|r| match r {
            Record::Calibration(c) => Some(c.clone()),
            _ => None,
        })
        .collect();
    let mut sessions: Vec<SessionTrials> = Vec::new();
    for r in records {
        match r {
            Record::Schedule(s) => sessions.push(SessionTrials { schedule: s.schedule, trials: vec![] }),
            Record::Measurement(m) => sessions.last_mut().unwrap().trials.push(m),
            Record::Calibration(_) => {}
        }
    }
    let pp = fit_psychometric(&calib).unwrap().params;
    fit_adaptation(&sessions, &pp, &cfg.grid).unwrap()
}

#[test]
fn full_session_matches_offline_fit() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(1.7e9));
    let store = SessionStore::open(dir.path(), clock.clone()).unwrap();
    let cfg = SessionConfig { seed: 11, ..SessionConfig::default() };
    let id = store.create(cfg.clone()).unwrap().id;
    let timings = run_participant(&store, &clock, &id, 3);

    let status = store.status(&id).unwrap();
    assert_eq!(status.phase, Phase::Done);
    assert_eq!(status.calibration_done, 70);
    assert!(status.measurement_done > 30);
    assert_eq!(status.flags.late_responses, 0);
    assert!(status.flags.interruptions.is_empty());

    let results = store.results(&id).unwrap();
    let export = store.export(&id).unwrap();
    assert_eq!(results.records, export);
    let offline = offline_fit(&export, &cfg);
    assert_eq!(results.fit.as_ref(), Some(&offline));
    let fit = offline;
    eprintln!("fit {:?}, ci k1 {:?}, ci k2 {:?}", fit.params, fit.ci_k1, fit.ci_k2);
    assert!(fit.ci_k2[0] <= TRUTH.k2 && TRUTH.k2 <= fit.ci_k2[1]);

    // The running estimate after the last answer is the final point estimate.
    let s = store.snapshot(&id).unwrap();
    assert_eq!(s.estimate().unwrap().params, fit.params);

    let mut sorted = timings.clone();
    sorted.sort_by(f64::total_cmp);
    eprintln!(
        "response handling: median {:.1} ms, max {:.1} ms over {}",
        1e3 * sorted[sorted.len() / 2],
        1e3 * sorted[sorted.len() - 1],
        sorted.len()
    );
    assert!(sorted[sorted.len() - 1] < 0.1);

    // Records survive a trip through their own serialization.
    let again: String = export
        .lines()
        .map(|l| Record::from_line(l, 1).unwrap().to_line().unwrap() + "\n")
        .collect();
    assert_eq!(again, export);
}

#[test]
fn reset_blocks_pool_into_one_fit() {
    let clock = Arc::new(ManualClock::new(0.0));
    let store = SessionStore::in_memory(clock.clone());
    let cfg = SessionConfig { calibration_trials: 30, warmup: 10.0, ..SessionConfig::default() };
    let id = store.create(cfg.clone()).unwrap().id;
    // Measure for a while, take a break, start over.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut answered = 0;
    while answered < 50 {
        match store.next_trial(&id).unwrap() {
            TrialOutcome::Notice { remaining, .. } => clock.advance(remaining.unwrap_or(0.0)),
            TrialOutcome::Trial(t) => {
                clock.advance(1.0);
                let choice = if rng.random::<bool>() { Choice::Lagging } else { Choice::Further };
                store.respond(&id, &Response { trial_id: t.trial_id, choice, latency: None }).unwrap();
                clock.advance(2.75);
                answered += 1;
            }
        }
    }
    clock.advance(120.0);
    let st = store.reset(&id).unwrap();
    assert_eq!((st.phase, st.block), (Phase::WarmUp, 1));
    run_participant(&store, &clock, &id, 4);
    let export = store.export(&id).unwrap();
    let schedules = export.lines().filter(|l| l.contains("\"kind\":\"schedule\"")).count();
    assert_eq!(schedules, 2);
    // Calibration is not repeated after a reset.
    assert_eq!(store.status(&id).unwrap().calibration_done, 30);
    let results = store.results(&id).unwrap();
    assert_eq!(results.fit.as_ref(), Some(&offline_fit(&export, &cfg)));
}
