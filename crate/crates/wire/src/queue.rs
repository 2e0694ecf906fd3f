//! Per-client outbound queue with latest-wins snapshot dropping.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

/// An encoded frame shared between every client it goes to.
pub type Bytes = Arc<[u8]>;

#[derive(Debug)]
struct Entry {
    snapshot: bool,
    bytes: Bytes,
}

#[derive(Debug, Default)]
struct State {
    items: VecDeque<Entry>,
    snapshots: usize,
    dropped: u64,
    closed: bool,
}

/// Frames waiting to be written to one client.
///
/// Holds at most `cap` snapshots; pushing another drops the oldest queued
/// snapshot. Other frames (events, control) are never dropped.
#[derive(Debug)]
pub struct ClientQueue {
    cap: usize,
    state: Mutex<State>,
    ready: Condvar,
}

impl ClientQueue {
    pub fn new(cap: usize) -> Self {
        assert!(cap > 0);
        ClientQueue { cap, state: Mutex::new(State::default()), ready: Condvar::new() }
    }

    pub fn push_snapshot(&self, bytes: Bytes) {
        let mut s = self.state.lock().expect("queue lock");
        if s.closed {
            return;
        }
        if s.snapshots == self.cap {
            let oldest = s.items.iter().position(|e| e.snapshot).expect("counted snapshot");
            s.items.remove(oldest);
            s.snapshots -= 1;
            s.dropped += 1;
        }
        s.items.push_back(Entry { snapshot: true, bytes });
        s.snapshots += 1;
        self.ready.notify_one();
    }

    pub fn push_other(&self, bytes: Bytes) {
        let mut s = self.state.lock().expect("queue lock");
        if !s.closed {
            s.items.push_back(Entry { snapshot: false, bytes });
            self.ready.notify_one();
        }
    }

    /// Next frame, waiting up to `timeout`. `None` on timeout or once closed and drained.
    pub fn pop_timeout(&self, timeout: Duration) -> Option<Bytes> {
        let s = self.state.lock().expect("queue lock");
        let (mut s, _) = self
            .ready
            .wait_timeout_while(s, timeout, |s| s.items.is_empty() && !s.closed)
            .expect("queue lock");
        let e = s.items.pop_front()?;
        if e.snapshot {
            s.snapshots -= 1;
        }
        Some(e.bytes)
    }

    pub fn try_pop(&self) -> Option<Bytes> {
        self.pop_timeout(Duration::ZERO)
    }

    /// Stops accepting frames and wakes any waiting writer.
    pub fn close(&self) {
        let mut s = self.state.lock().expect("queue lock");
        s.closed = true;
        s.items.clear();
        s.snapshots = 0;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().expect("queue lock").closed
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("queue lock").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshots discarded so far.
    pub fn dropped(&self) -> u64 {
        self.state.lock().expect("queue lock").dropped
    }
}
