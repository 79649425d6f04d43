//! Durable sessions.
//!
//! Each session lives in its own directory: `manifest.json` holds the id,
//! creation time and config and is written once, atomically. `events.jsonl`
//! is append-only, one [`Event`] per line, synced to disk before the request
//! that caused it is answered. Opening a store replays every log, so a
//! restarted server carries on where it stopped.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::config::SessionConfig;
use crate::engine::{Ack, Event, Response, Session, SessionResults, Status, TrialOutcome};
use crate::StudyError;

const MANIFEST: &str = "manifest.json";
const EVENTS: &str = "events.jsonl";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    id: String,
    created_at: f64,
    config: SessionConfig,
}

struct Entry {
    session: Session,
    log: Option<File>,
}

impl Entry {
    /// Persist, then apply. Nothing is applied unless every line reached
    /// the disk.
    fn commit(&mut self, events: &[Event]) -> Result<(), StudyError> {
        if events.is_empty() {
            return Ok(());
        }
        if let Some(f) = &mut self.log {
            let mut buf = String::new();
            for e in events {
                buf.push_str(&serde_json::to_string(e)?);
                buf.push('\n');
            }
            f.write_all(buf.as_bytes())?;
            f.sync_data()?;
        }
        for e in events {
            self.session.apply(e);
        }
        Ok(())
    }
}

pub struct SessionStore {
    root: Option<PathBuf>,
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // Make the rename itself durable.
        File::open(dir)?.sync_all()?;
    }
    Ok(())
}

/// Rebuild one session from its directory. A last line cut short by a crash
/// is dropped and truncated away; damage anywhere else is an error.
fn load(dir: &Path) -> Result<Entry, StudyError> {
    let m: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
    // The events `create` returns were logged when the session was made.
    let (mut session, _) = Session::create(m.id, m.config, m.created_at)?;
    let path = dir.join(EVENTS);
    let mut log = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
    let mut good = 0u64;
    let mut lines = Vec::new();
    {
        let mut reader = BufReader::new(&log);
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            if !line.ends_with('\n') {
                log::warn!("{}: dropping a torn final line", path.display());
                break;
            }
            lines.push((good, line.clone()));
            good += n as u64;
        }
    }
    let count = lines.len();
    let mut end = good;
    for (i, (offset, line)) in lines.into_iter().enumerate() {
        match serde_json::from_str::<Event>(&line) {
            Ok(e) => session.apply(&e),
            Err(err) if i + 1 == count => {
                log::warn!("{}: dropping an unreadable final line: {err}", path.display());
                end = offset;
            }
            Err(err) => {
                return Err(StudyError::Corrupt {
                    path,
                    line: i + 1,
                    message: err.to_string(),
                })
            }
        }
    }
    if end < log.metadata()?.len() {
        log.set_len(end)?;
        log.sync_all()?;
    }
    log.seek(SeekFrom::End(0))?;
    session.refit(false)?;
    Ok(Entry {
        session,
        log: Some(log),
    })
}

impl SessionStore {
    /// Sessions persisted under `root`, which is created if missing. Every
    /// session found there is loaded.
    pub fn open(root: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Result<Self, StudyError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if !dir.join(MANIFEST).is_file() {
                continue;
            }
            let e = load(&dir)?;
            sessions.insert(e.session.id.clone(), Arc::new(Mutex::new(e)));
        }
        log::info!("loaded {} sessions from {}", sessions.len(), root.display());
        Ok(Self {
            root: Some(root),
            clock,
            sessions: Mutex::new(sessions),
        })
    }

    /// Sessions kept only in memory.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            root: None,
            clock,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        let mut v: Vec<String> = self.sessions.lock().unwrap().keys().cloned().collect();
        v.sort();
        v
    }

    pub fn create(&self, config: SessionConfig) -> Result<Status, StudyError> {
        let id = uuid::Uuid::new_v4().to_string();
        let now = self.clock.now();
        let (session, events) = Session::create(id.clone(), config.clone(), now)?;
        let log = match &self.root {
            Some(root) => {
                let dir = root.join(&id);
                fs::create_dir_all(&dir)?;
                let log = OpenOptions::new().append(true).create(true).open(dir.join(EVENTS))?;
                let m = Manifest { id: id.clone(), created_at: now, config };
                write_atomic(&dir.join(MANIFEST), &serde_json::to_vec_pretty(&m)?)?;
                Some(log)
            }
            None => None,
        };
        let mut entry = Entry { session, log };
        entry.commit(&events)?;
        let status = entry.session.status();
        self.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(entry)));
        Ok(status)
    }

    /// Run `f` with the session locked; requests on one session are
    /// serialized, different sessions proceed in parallel.
    fn with<T>(&self, id: &str, f: impl FnOnce(&mut Entry, f64) -> Result<T, StudyError>) -> Result<T, StudyError> {
        let entry = self
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| StudyError::NotFound(id.to_string()))?;
        let mut guard = entry.lock().unwrap_or_else(|p| p.into_inner());
        // Read the clock under the lock so receipt times follow the order
        // in which requests are handled.
        let now = self.clock.now();
        f(&mut guard, now)
    }

    pub fn status(&self, id: &str) -> Result<Status, StudyError> {
        self.with(id, |e, _| Ok(e.session.status()))
    }

    pub fn next_trial(&self, id: &str) -> Result<TrialOutcome, StudyError> {
        self.with(id, |e, now| {
            let (out, events) = e.session.next_trial(now)?;
            e.commit(&events)?;
            Ok(out)
        })
    }

    pub fn respond(&self, id: &str, r: &Response) -> Result<Ack, StudyError> {
        self.with(id, |e, now| {
            let events = e.session.submit(now, r)?;
            e.commit(&events)?;
            e.session.refit(true)?;
            let late = events.iter().any(|ev| match ev {
                Event::Responded { record, .. } => match record {
                    chromashift::psychophysics::Record::Calibration(c) => c.late,
                    chromashift::psychophysics::Record::Measurement(m) => m.late,
                    _ => false,
                },
                _ => false,
            });
            Ok(Ack {
                trial_id: r.trial_id,
                late,
                phase: e.session.phase(),
                psychometric: e.session.psychometric().cloned(),
                estimate: e.session.estimate(),
            })
        })
    }

    pub fn finalize(&self, id: &str) -> Result<Status, StudyError> {
        self.with(id, |e, now| {
            let events = e.session.finalize(now);
            e.commit(&events)?;
            Ok(e.session.status())
        })
    }

    pub fn reset(&self, id: &str) -> Result<Status, StudyError> {
        self.with(id, |e, now| {
            let events = e.session.reset(now)?;
            e.commit(&events)?;
            Ok(e.session.status())
        })
    }

    pub fn results(&self, id: &str) -> Result<SessionResults, StudyError> {
        self.with(id, |e, _| e.session.results())
    }

    pub fn export(&self, id: &str) -> Result<String, StudyError> {
        self.with(id, |e, _| e.session.export())
    }

    /// A copy of the session as it stands.
    pub fn snapshot(&self, id: &str) -> Result<Session, StudyError> {
        self.with(id, |e, _| Ok(e.session.clone()))
    }
}
