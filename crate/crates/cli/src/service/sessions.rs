//! Work queue and session leases.
//!
//! Every unlabelled instance is either in the pending queue or leased to exactly one session.
//! A lease ends when the instance is labelled or its session is closed or expires; in the
//! latter two cases the instance goes back to the front of the queue.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Serialize;

/// Source of time for lease expiry and label timestamps.
pub trait Clock: Send + Sync + 'static {
    fn now(&self) -> Instant;
    fn utc(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn utc(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Clone)]
pub struct ManualClock {
    inner: Arc<Mutex<(Instant, DateTime<Utc>)>>,
}

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            inner: Arc::new(Mutex::new((Instant::now(), start))),
        }
    }

    pub fn advance(&self, by: Duration) {
        let mut g = self.inner.lock().unwrap();
        g.0 += by;
        g.1 += chrono::Duration::from_std(by).expect("duration in range");
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.inner.lock().unwrap().0
    }

    fn utc(&self) -> DateTime<Utc> {
        self.inner.lock().unwrap().1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Progress {
    pub served: usize,
    pub labelled: usize,
}

#[derive(Debug)]
struct Session {
    labeler_id: String,
    last_seen: Instant,
    leases: BTreeSet<usize>,
    progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub labeler_id: String,
    pub leased: Vec<usize>,
    pub progress: Progress,
}

/// Lease bookkeeping over instance indices `0..n`.
#[derive(Debug)]
pub struct Assignments {
    pending: VecDeque<usize>,
    done: Vec<bool>,
    owner: Vec<Option<String>>,
    sessions: HashMap<String, Session>,
    ttl: Duration,
    next_id: u64,
}

impl Assignments {
    /// `labelled[i]` marks instances that need no further work.
    pub fn new(labelled: Vec<bool>, ttl: Duration) -> Self {
        let pending = labelled
            .iter()
            .enumerate()
            .filter(|(_, &d)| !d)
            .map(|(i, _)| i)
            .collect();
        Self {
            pending,
            owner: vec![None; labelled.len()],
            done: labelled,
            sessions: HashMap::new(),
            ttl,
            next_id: 0,
        }
    }

    pub fn open_session(&mut self, labeler_id: &str, now: Instant) -> String {
        self.expire(now);
        self.next_id += 1;
        let id = format!("s{:06}", self.next_id);
        self.sessions.insert(
            id.clone(),
            Session {
                labeler_id: labeler_id.to_string(),
                last_seen: now,
                leases: BTreeSet::new(),
                progress: Progress::default(),
            },
        );
        id
    }

    /// Leases the next pending instance. `None` for an unknown session, `Some(None)` when
    /// nothing is left to serve.
    pub fn next(&mut self, session_id: &str, now: Instant) -> Option<Option<usize>> {
        self.expire(now);
        let session = self.sessions.get_mut(session_id)?;
        session.last_seen = now;
        let Some(i) = self.pending.pop_front() else {
            return Some(None);
        };
        session.leases.insert(i);
        session.progress.served += 1;
        self.owner[i] = Some(session_id.to_string());
        Some(Some(i))
    }

    /// Records that instance `i` has been labelled by `labeler_id`.
    pub fn complete(&mut self, i: usize, labeler_id: &str, now: Instant) {
        self.expire(now);
        if let Some(owner) = self.owner[i].take() {
            if let Some(s) = self.sessions.get_mut(&owner) {
                s.leases.remove(&i);
            }
        } else if !self.done[i] {
            self.pending.retain(|&p| p != i);
        }
        self.done[i] = true;
        // Credit the most recently active session of this labeler.
        if let Some(s) = self
            .sessions
            .values_mut()
            .filter(|s| s.labeler_id == labeler_id)
            .max_by_key(|s| s.last_seen)
        {
            s.progress.labelled += 1;
            s.last_seen = now;
        }
    }

    pub fn close_session(&mut self, session_id: &str, now: Instant) -> bool {
        self.expire(now);
        match self.sessions.remove(session_id) {
            Some(s) => {
                self.release(s.leases);
                true
            }
            None => false,
        }
    }

    pub fn session(&mut self, session_id: &str, now: Instant) -> Option<SessionInfo> {
        self.expire(now);
        self.sessions.get(session_id).map(|s| SessionInfo {
            session_id: session_id.to_string(),
            labeler_id: s.labeler_id.clone(),
            leased: s.leases.iter().copied().collect(),
            progress: s.progress,
        })
    }

    pub fn remaining(&self) -> usize {
        self.done.iter().filter(|&&d| !d).count()
    }

    fn release(&mut self, leases: BTreeSet<usize>) {
        for &i in leases.iter().rev() {
            self.owner[i] = None;
            self.pending.push_front(i);
        }
    }

    fn expire(&mut self, now: Instant) {
        let ttl = self.ttl;
        let expired: Vec<String> = self
            .sessions
            .iter()
            .filter(|(_, s)| now.saturating_duration_since(s.last_seen) > ttl)
            .map(|(id, _)| id.clone())
            .collect();
        for id in expired {
            if let Some(s) = self.sessions.remove(&id) {
                self.release(s.leases);
            }
        }
    }

    /// Checks that every unfinished instance is pending or leased exactly once.
    pub fn check_invariant(&self) -> bool {
        let mut seen = vec![0u32; self.done.len()];
        for &i in &self.pending {
            seen[i] += 1;
        }
        for s in self.sessions.values() {
            for &i in &s.leases {
                seen[i] += 1;
            }
        }
        seen.iter()
            .zip(&self.done)
            .all(|(&c, &d)| if d { c == 0 } else { c == 1 })
    }
}
