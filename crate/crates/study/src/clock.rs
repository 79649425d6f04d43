use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

/// Source of server receipt times, in seconds.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

/// Wall clock, seconds since the Unix epoch. Survives restarts, which
/// session resumption relies on.
#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    }
}

/// Clock moved by hand, for tests and scripted clients.
#[derive(Debug, Default)]
pub struct ManualClock(Mutex<f64>);

impl ManualClock {
    pub fn new(start: f64) -> Self {
        Self(Mutex::new(start))
    }

    pub fn advance(&self, dt: f64) {
        *self.0.lock().unwrap() += dt;
    }

    pub fn set(&self, t: f64) {
        *self.0.lock().unwrap() = t;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}
