use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::{detect, CollisionConfig, CollisionReport};
use crate::exec::Parallelism;
use crate::mailbox::{mailbox, MailboxReceiver, MailboxSender};
use crate::state::WorldSnapshot;

/// One report from the asynchronous detector.
#[derive(Debug, Clone)]
pub struct DetectorOutput {
    pub report: CollisionReport,
    /// Snapshots skipped so far because a newer one arrived first.
    pub dropped_total: u64,
    /// Wall time spent in detection for this report.
    pub latency: Duration,
}

/// Consumes snapshots latest-wins and emits one report per snapshot taken.
///
/// Returns when the snapshot sender is dropped or the report receiver hangs up.
pub fn run_detector<F>(
    input: MailboxReceiver<Arc<WorldSnapshot>>,
    output: mpsc::Sender<DetectorOutput>,
    mut detect_fn: F,
) where
    F: FnMut(&WorldSnapshot) -> CollisionReport,
{
    while let Some(delivery) = input.recv() {
        let start = Instant::now();
        let report = detect_fn(&delivery.value);
        let out = DetectorOutput {
            report,
            dropped_total: delivery.dropped_total,
            latency: start.elapsed(),
        };
        if output.send(out).is_err() {
            break;
        }
    }
    log::debug!("collision detector stopped");
}

/// A detector running on its own thread.
pub struct DetectorHandle {
    snapshots: Option<MailboxSender<Arc<WorldSnapshot>>>,
    reports: mpsc::Receiver<DetectorOutput>,
    thread: Option<thread::JoinHandle<()>>,
}

impl DetectorHandle {
    pub fn spawn(config: CollisionConfig, par: Parallelism) -> std::io::Result<Self> {
        Self::spawn_with(move |snap| detect(snap, &config, par))
    }

    pub fn spawn_with<F>(detect_fn: F) -> std::io::Result<Self>
    where
        F: FnMut(&WorldSnapshot) -> CollisionReport + Send + 'static,
    {
        let (tx, rx) = mailbox();
        let (out_tx, out_rx) = mpsc::channel();
        let thread = thread::Builder::new()
            .name("collision".into())
            .spawn(move || run_detector(rx, out_tx, detect_fn))?;
        Ok(DetectorHandle { snapshots: Some(tx), reports: out_rx, thread: Some(thread) })
    }

    /// Hands a snapshot to the detector without blocking.
    pub fn submit(&self, snapshot: Arc<WorldSnapshot>) {
        if let Some(tx) = &self.snapshots {
            tx.publish(snapshot);
        }
    }

    /// All reports finished since the last call.
    pub fn drain(&self) -> Vec<DetectorOutput> {
        self.reports.try_iter().collect()
    }

    /// Blocks for the next report, up to `timeout`.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<DetectorOutput> {
        self.reports.recv_timeout(timeout).ok()
    }

    pub fn dropped(&self) -> u64 {
        self.snapshots.as_ref().map_or(0, MailboxSender::dropped)
    }

    /// Closes the input and joins the thread.
    pub fn shutdown(mut self) {
        self.close();
    }

    fn close(&mut self) {
        self.snapshots.take();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for DetectorHandle {
    fn drop(&mut self) {
        self.close();
    }
}
