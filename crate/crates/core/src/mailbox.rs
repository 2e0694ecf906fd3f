//! One-slot latest-wins mailbox.
//!
//! A publisher never blocks: a value that has not been taken yet is replaced
//! and counted as dropped.

use std::sync::mpsc::RecvTimeoutError;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

struct Slot<T> {
    value: Option<T>,
    dropped: u64,
    senders_closed: bool,
    receiver_closed: bool,
}

struct Shared<T> {
    slot: Mutex<Slot<T>>,
    ready: Condvar,
}

/// Creates a connected sender/receiver pair.
pub fn mailbox<T>() -> (MailboxSender<T>, MailboxReceiver<T>) {
    let shared = Arc::new(Shared {
        slot: Mutex::new(Slot { value: None, dropped: 0, senders_closed: false, receiver_closed: false }),
        ready: Condvar::new(),
    });
    (MailboxSender { shared: shared.clone() }, MailboxReceiver { shared })
}

pub struct MailboxSender<T> {
    shared: Arc<Shared<T>>,
}

impl<T> MailboxSender<T> {
    /// Stores `value`, replacing any value not yet taken. Returns `false` if
    /// the receiver is gone.
    pub fn publish(&self, value: T) -> bool {
        let mut slot = self.shared.slot.lock().unwrap_or_else(|e| e.into_inner());
        if slot.receiver_closed {
            return false;
        }
        if slot.value.replace(value).is_some() {
            slot.dropped += 1;
        }
        drop(slot);
        self.shared.ready.notify_one();
        true
    }

    /// Total values replaced before being taken.
    pub fn dropped(&self) -> u64 {
        self.shared.slot.lock().unwrap_or_else(|e| e.into_inner()).dropped
    }
}

impl<T> Drop for MailboxSender<T> {
    fn drop(&mut self) {
        let mut slot = self.shared.slot.lock().unwrap_or_else(|e| e.into_inner());
        slot.senders_closed = true;
        drop(slot);
        self.shared.ready.notify_all();
    }
}

pub struct MailboxReceiver<T> {
    shared: Arc<Shared<T>>,
}

/// A value taken from the mailbox with the running drop count.
#[derive(Debug)]
pub struct Delivery<T> {
    pub value: T,
    pub dropped_total: u64,
}

impl<T> MailboxReceiver<T> {
    /// Blocks until a value is available. Returns `None` once the sender is
    /// dropped and the slot is empty.
    pub fn recv(&self) -> Option<Delivery<T>> {
        let mut slot = self.shared.slot.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if let Some(value) = slot.value.take() {
                return Some(Delivery { value, dropped_total: slot.dropped });
            }
            if slot.senders_closed {
                return None;
            }
            slot = self.shared.ready.wait(slot).unwrap_or_else(|e| e.into_inner());
        }
    }

    /// Like [`recv`](Self::recv) with a deadline.
    pub fn recv_timeout(&self, timeout: Duration) -> Result<Delivery<T>, RecvTimeoutError> {
        let slot = self.shared.slot.lock().unwrap_or_else(|e| e.into_inner());
        let (mut slot, res) = self
            .shared
            .ready
            .wait_timeout_while(slot, timeout, |s| s.value.is_none() && !s.senders_closed)
            .unwrap_or_else(|e| e.into_inner());
        if let Some(value) = slot.value.take() {
            return Ok(Delivery { value, dropped_total: slot.dropped });
        }
        if slot.senders_closed {
            return Err(RecvTimeoutError::Disconnected);
        }
        debug_assert!(res.timed_out());
        Err(RecvTimeoutError::Timeout)
    }

    pub fn try_recv(&self) -> Option<Delivery<T>> {
        let mut slot = self.shared.slot.lock().unwrap_or_else(|e| e.into_inner());
        slot.value.take().map(|value| Delivery { value, dropped_total: slot.dropped })
    }
}

impl<T> Drop for MailboxReceiver<T> {
    fn drop(&mut self) {
        let mut slot = self.shared.slot.lock().unwrap_or_else(|e| e.into_inner());
        slot.receiver_closed = true;
        slot.value = None;
    }
}
