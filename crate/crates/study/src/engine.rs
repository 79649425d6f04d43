//! The session state machine.
//!
//! Every operation first computes the events it would cause without touching
//! the session, the caller persists them, and only then are they applied.
//! Replaying a session's event log through [`Session::apply`] therefore
//! rebuilds exactly the state it had when the last event was written.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use chromashift::adaptation::AdaptationParams;
use chromashift::colorimetry::{srgb_encode, uv_xyz, xyz_rgb, ChromaticityUv, ClipPolicy};
use chromashift::psychophysics::{
    fit_adaptation, fit_adaptation_point, fit_psychometric, place_stimuli, signed_offset,
    CalibrationRecord, Choice, FitResult, PsychometricFit, PsychometricParams, Record,
    ScheduleRecord, SessionTrials, TrialRecord, SCHEMA_VERSION,
};

use crate::config::{PatchGeometry, SessionConfig};
use crate::StudyError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    WarmUp,
    Calibration,
    Measurement,
    Done,
}

/// What the client shows for one 2AFC trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub session: String,
    pub trial_id: u32,
    pub phase: Phase,
    pub block: u32,
    /// Server time the trial was issued.
    pub issued_at: f64,
    /// Seconds into the current phase; schedule time during measurement.
    pub t: f64,
    pub display_duration: f64,
    pub response_window: f64,
    pub background: ChromaticityUv,
    pub background_rgb: [u8; 3],
    pub further: ChromaticityUv,
    pub lagging: ChromaticityUv,
    pub midpoint: ChromaticityUv,
    pub further_rgb: [u8; 3],
    pub lagging_rgb: [u8; 3],
    /// The pair had to be pulled toward D65 to fit the display.
    pub clamped: bool,
    /// Seed for the client's background noise.
    pub noise_seed: u64,
    pub patch: PatchGeometry,
}

/// Reply to a trial request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrialOutcome {
    Trial(TrialSpec),
    Notice {
        phase: Phase,
        message: String,
        /// Seconds until a trial can be issued, when that is known.
        remaining: Option<f64>,
        background: ChromaticityUv,
    },
}

/// A submitted answer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub trial_id: u32,
    pub choice: Choice,
    /// Client-measured reaction time, stored for audit only.
    #[serde(default)]
    pub latency: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningEstimate {
    pub params: AdaptationParams,
    pub log_likelihood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub trial_id: u32,
    pub late: bool,
    pub phase: Phase,
    pub psychometric: Option<PsychometricFit>,
    pub estimate: Option<RunningEstimate>,
}

/// A measurement pause longer than the allowed gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interruption {
    pub at: f64,
    pub idle: f64,
    pub block: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionFlags {
    pub late_responses: u32,
    pub interruptions: Vec<Interruption>,
    pub resets: u32,
    /// Trial requests refused by the rest timer.
    pub rests: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Phase { at: f64, phase: Phase },
    Issued { at: f64, trial: TrialSpec },
    Responded { at: f64, trial_id: u32, record: Record },
    Gap { at: f64, idle: f64 },
    Rest { at: f64 },
    Reset { at: f64 },
    Finalized { at: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub id: String,
    pub phase: Phase,
    pub block: u32,
    pub calibration_done: u32,
    pub measurement_done: u32,
    pub pending: Option<u32>,
    pub flags: SessionFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResults {
    pub id: String,
    pub phase: Phase,
    pub psychometric: Option<PsychometricFit>,
    /// The psychometric function the fit used.
    pub psychometric_used: PsychometricParams,
    pub fit: Option<FitResult>,
    /// No measurement responses: nothing to fit.
    pub no_fit: bool,
    pub flags: SessionFlags,
    /// Records as JSON lines, the same text the export endpoint serves.
    pub records: String,
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    pub created_at: f64,
    phase: Phase,
    phase_start: f64,
    block: u32,
    next_id: u32,
    calibration: Vec<CalibrationRecord>,
    /// Measurement responses of each block, in block order.
    blocks: Vec<SessionTrials>,
    pending: Option<TrialSpec>,
    last_activity: f64,
    last_response: Option<f64>,
    flags: SessionFlags,
    psychometric: Option<PsychometricFit>,
    estimate: Option<RunningEstimate>,
}

fn display_rgb(c: ChromaticityUv, luminance: f64) -> [u8; 3] {
    match uv_xyz(c, luminance) {
        Ok(xyz) => srgb_encode(ClipPolicy::Clamp.apply(xyz_rgb(xyz))),
        Err(_) => [0, 0, 0],
    }
}

impl Session {
    /// A fresh session and the events that start it.
    pub fn create(id: String, config: SessionConfig, now: f64) -> Result<(Self, Vec<Event>), StudyError> {
        config.validate()?;
        let s = Self {
            id,
            created_at: now,
            phase: Phase::WarmUp,
            phase_start: now,
            block: 0,
            next_id: 0,
            calibration: Vec::new(),
            blocks: Vec::new(),
            pending: None,
            last_activity: now,
            last_response: None,
            flags: SessionFlags::default(),
            psychometric: None,
            estimate: None,
            config,
        };
        let mut events = Vec::new();
        if s.config.warmup <= 0.0 {
            events.push(Event::Phase {
                at: now,
                phase: s.after_warmup(),
            });
        }
        Ok((s, events))
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pending(&self) -> Option<&TrialSpec> {
        self.pending.as_ref()
    }

    pub fn estimate(&self) -> Option<RunningEstimate> {
        self.estimate
    }

    pub fn psychometric(&self) -> Option<&PsychometricFit> {
        self.psychometric.as_ref()
    }

    pub fn status(&self) -> Status {
        Status {
            id: self.id.clone(),
            phase: self.phase,
            block: self.block,
            calibration_done: self.calibration.len() as u32,
            measurement_done: self.blocks.iter().map(|b| b.trials.len() as u32).sum(),
            pending: self.pending.as_ref().map(|p| p.trial_id),
            flags: self.flags.clone(),
        }
    }

    fn after_warmup(&self) -> Phase {
        if (self.calibration.len() as u32) < self.config.calibration_trials {
            Phase::Calibration
        } else {
            Phase::Measurement
        }
    }

    /// Receipt times never run backwards within a session.
    fn clamp_time(&self, now: f64) -> f64 {
        now.max(self.last_activity)
    }

    fn notice(&self, phase: Phase, message: &str, remaining: Option<f64>, background: ChromaticityUv) -> TrialOutcome {
        TrialOutcome::Notice {
            phase,
            message: message.to_string(),
            remaining,
            background,
        }
    }

    /// The pending trial if there is one, otherwise the next trial or a
    /// notice explaining why there is none yet.
    pub fn next_trial(&self, now: f64) -> Result<(TrialOutcome, Vec<Event>), StudyError> {
        let now = self.clamp_time(now);
        let d65 = ChromaticityUv::d65();
        if self.phase == Phase::Done {
            return Ok((self.notice(Phase::Done, "session finished", None, d65), vec![]));
        }
        if let Some(p) = &self.pending {
            return Ok((TrialOutcome::Trial(p.clone()), vec![]));
        }
        let mut events = Vec::new();
        let mut phase = self.phase;
        let mut phase_start = self.phase_start;
        if phase == Phase::Measurement && now - self.last_activity > self.config.max_gap {
            events.push(Event::Gap {
                at: now,
                idle: now - self.last_activity,
            });
        }
        if phase == Phase::WarmUp {
            let left = self.config.warmup - (now - phase_start);
            if left > 0.0 {
                return Ok((self.notice(Phase::WarmUp, "adapting to D65", Some(left), d65), events));
            }
            phase = self.after_warmup();
            phase_start = now;
            events.push(Event::Phase { at: now, phase });
        }
        if phase == Phase::Calibration && self.calibration.len() as u32 >= self.config.calibration_trials {
            events.push(Event::Phase {
                at: now,
                phase: Phase::Measurement,
            });
            return Ok((
                self.notice(Phase::Measurement, "calibration complete, measurement begins", None, d65),
                events,
            ));
        }
        if let Some(r) = self.last_response {
            let left = self.config.rest - (now - r);
            if left > 0.0 && phase != Phase::WarmUp {
                events.push(Event::Rest { at: now });
                return Ok((self.notice(phase, "rest", Some(left), self.background(phase, now - phase_start)?), events));
            }
        }
        let t = now - phase_start;
        if phase == Phase::Measurement && t > self.config.schedule.end() {
            events.push(Event::Phase {
                at: now,
                phase: Phase::Done,
            });
            return Ok((self.notice(Phase::Done, "schedule complete", None, d65), events));
        }
        let trial = self.make_trial(phase, t, now)?;
        events.push(Event::Issued {
            at: now,
            trial: trial.clone(),
        });
        Ok((TrialOutcome::Trial(trial), events))
    }

    fn background(&self, phase: Phase, t: f64) -> Result<ChromaticityUv, StudyError> {
        Ok(match phase {
            Phase::Measurement => self.config.schedule.illuminant_at(t.min(self.config.schedule.end()))?,
            _ => ChromaticityUv::d65(),
        })
    }

    fn make_trial(&self, phase: Phase, t: f64, now: f64) -> Result<TrialSpec, StudyError> {
        let c = &self.config;
        let dir = c.schedule.direction()?;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        rng.set_stream(self.next_id as u64);
        let (center, sigma) = match phase {
            Phase::Calibration => (ChromaticityUv::d65(), c.calibration_sigma),
            _ => {
                let p = self.estimate.map_or(c.prior, |e| e.params);
                (c.schedule.adaptation_closed_form(&p, t)?, c.sigma_place)
            }
        };
        let placed = place_stimuli(center, dir, sigma, &mut rng);
        let background = self.background(phase, t)?;
        Ok(TrialSpec {
            session: self.id.clone(),
            trial_id: self.next_id,
            phase,
            block: self.block,
            issued_at: now,
            t,
            display_duration: c.display_duration,
            response_window: c.response_window,
            background,
            background_rgb: display_rgb(background, c.patch_luminance),
            further: placed.further,
            lagging: placed.lagging,
            midpoint: placed.midpoint,
            further_rgb: display_rgb(placed.further, c.patch_luminance),
            lagging_rgb: display_rgb(placed.lagging, c.patch_luminance),
            clamped: placed.clamped,
            noise_seed: rng.next_u64(),
            patch: c.patch,
        })
    }

    /// Record an answer to the pending trial.
    pub fn submit(&self, now: f64, r: &Response) -> Result<Vec<Event>, StudyError> {
        let now = self.clamp_time(now);
        let p = self.pending.as_ref().ok_or(StudyError::UnknownTrial {
            expected: None,
            got: r.trial_id,
        })?;
        if p.trial_id != r.trial_id {
            return Err(StudyError::UnknownTrial {
                expected: Some(p.trial_id),
                got: r.trial_id,
            });
        }
        if let Some(l) = r.latency {
            if !l.is_finite() {
                return Err(StudyError::InvalidRequest("latency must be finite".into()));
            }
        }
        let late = now - p.issued_at > p.display_duration + p.response_window;
        let record = match p.phase {
            Phase::Calibration => Record::Calibration(CalibrationRecord {
                schema: SCHEMA_VERSION,
                index: p.trial_id,
                t: p.t,
                m_offset: signed_offset(p.midpoint, ChromaticityUv::d65(), self.config.schedule.direction()?),
                choice: r.choice,
                latency: r.latency,
                late,
            }),
            _ => Record::Measurement(TrialRecord {
                schema: SCHEMA_VERSION,
                block: p.block,
                index: p.trial_id,
                t: p.t,
                further: p.further,
                lagging: p.lagging,
                midpoint: p.midpoint,
                choice: r.choice,
                latency: r.latency,
                late,
                clamped: p.clamped,
            }),
        };
        Ok(vec![Event::Responded {
            at: now,
            trial_id: r.trial_id,
            record,
        }])
    }

    pub fn finalize(&self, now: f64) -> Vec<Event> {
        if self.phase == Phase::Done {
            return vec![];
        }
        vec![Event::Finalized {
            at: self.clamp_time(now),
        }]
    }

    /// Back to warm-up in a new block, for a participant who took a break.
    pub fn reset(&self, now: f64) -> Result<Vec<Event>, StudyError> {
        if self.phase == Phase::Done {
            return Err(StudyError::Finished);
        }
        Ok(vec![Event::Reset {
            at: self.clamp_time(now),
        }])
    }

    /// Apply one persisted event. Fits are not refreshed here; see
    /// [`Session::refit`].
    pub fn apply(&mut self, e: &Event) {
        match e {
            Event::Phase { at, phase } => {
                self.phase = *phase;
                self.phase_start = *at;
                self.last_activity = *at;
            }
            Event::Issued { at, trial } => {
                self.pending = Some(trial.clone());
                self.next_id = trial.trial_id + 1;
                self.last_activity = *at;
            }
            Event::Responded { at, record, .. } => {
                match record {
                    Record::Calibration(c) => {
                        self.flags.late_responses += c.late as u32;
                        self.calibration.push(c.clone());
                    }
                    Record::Measurement(m) => {
                        self.flags.late_responses += m.late as u32;
                        match self.blocks.last_mut() {
                            Some(b) if b.trials.first().is_some_and(|t| t.block == m.block) => {
                                b.trials.push(m.clone())
                            }
                            _ => self.blocks.push(SessionTrials {
                                schedule: self.config.schedule,
                                trials: vec![m.clone()],
                            }),
                        }
                    }
                    Record::Schedule(_) => {}
                }
                self.pending = None;
                self.last_response = Some(*at);
                self.last_activity = *at;
            }
            Event::Gap { at, idle } => {
                self.flags.interruptions.push(Interruption {
                    at: *at,
                    idle: *idle,
                    block: self.block,
                });
            }
            Event::Rest { .. } => self.flags.rests += 1,
            Event::Reset { at } => {
                self.pending = None;
                self.block += 1;
                self.phase = Phase::WarmUp;
                self.phase_start = *at;
                self.last_activity = *at;
                self.last_response = None;
                self.flags.resets += 1;
            }
            Event::Finalized { at } => {
                self.pending = None;
                self.phase = Phase::Done;
                self.last_activity = *at;
            }
        }
    }

    /// Psychometric function used for measurement fits.
    pub fn psychometric_params(&self) -> PsychometricParams {
        self.psychometric
            .as_ref()
            .map_or(self.config.fallback_psychometric, |f| f.params)
    }

    /// Refresh the running fits after a response. `incremental` warm-starts
    /// the adaptation fit from the previous estimate, which only affects
    /// speed.
    pub fn refit(&mut self, incremental: bool) -> Result<(), StudyError> {
        if self.calibration.len() >= 2 {
            self.psychometric = Some(fit_psychometric(&self.calibration)?);
        }
        if self.blocks.is_empty() {
            self.estimate = None;
            return Ok(());
        }
        let warm = if incremental { self.estimate.map(|e| e.params) } else { None };
        let (params, log_likelihood) =
            fit_adaptation_point(&self.blocks, &self.psychometric_params(), &self.config.grid, warm)?;
        self.estimate = Some(RunningEstimate {
            params,
            log_likelihood,
        });
        Ok(())
    }

    /// Records in export order: calibration, then each measured block
    /// after its schedule.
    pub fn records(&self) -> Vec<Record> {
        let mut out: Vec<Record> = self.calibration.iter().cloned().map(Record::Calibration).collect();
        for b in &self.blocks {
            out.push(Record::Schedule(ScheduleRecord {
                schema: SCHEMA_VERSION,
                block: b.trials[0].block,
                schedule: b.schedule,
            }));
            out.extend(b.trials.iter().cloned().map(Record::Measurement));
        }
        out
    }

    pub fn export(&self) -> Result<String, StudyError> {
        let mut s = String::new();
        for r in self.records() {
            s.push_str(&r.to_line()?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn results(&self) -> Result<SessionResults, StudyError> {
        if self.phase != Phase::Done {
            return Err(StudyError::NotFinished(self.phase));
        }
        let pp = self.psychometric_params();
        let fit = if self.blocks.is_empty() {
            None
        } else {
            Some(fit_adaptation(&self.blocks, &pp, &self.config.grid)?)
        };
        Ok(SessionResults {
            id: self.id.clone(),
            phase: self.phase,
            psychometric: self.psychometric.clone(),
            psychometric_used: pp,
            no_fit: fit.is_none(),
            fit,
            flags: self.flags.clone(),
            records: self.export()?,
        })
    }
}
