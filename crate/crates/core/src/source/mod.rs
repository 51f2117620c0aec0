//! Event producers: recorded replays, seeded scenario simulation, and the
//! probe plan a kernel backend would attach.

pub mod plan;
pub mod replay;
pub mod scenario;

use std::collections::VecDeque;
use std::io;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::{self, JoinHandle};

use thiserror::Error;

use crate::event::EventRecord;

pub use plan::{emit_probe_plan, PlanUprobe, ProbePlan};
pub use replay::{open_replay, write_replay, ReplayReader, ReplayWriter, REPLAY_MAGIC};
pub use scenario::{
    generate_load, scenario_events, simulate_scenario, LoadGenerator, Scenario, ScenarioName, UserProbeTargets,
};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad replay data at byte {offset}: {reason}")]
    FormatError { offset: u64, reason: String },
}

/// A single-consumer stream of events in non-decreasing timestamp order.
pub trait EventSource {
    /// The next batch of events, or `None` at end of stream. Batches are
    /// never empty.
    fn next_batch(&mut self) -> Result<Option<Vec<EventRecord>>, SourceError>;
}

impl<S: EventSource + ?Sized> EventSource for Box<S> {
    fn next_batch(&mut self) -> Result<Option<Vec<EventRecord>>, SourceError> {
        (**self).next_batch()
    }
}

/// In-memory events, handed out in fixed-size batches.
#[derive(Debug, Clone)]
pub struct VecSource {
    events: VecDeque<EventRecord>,
    batch: usize,
}

impl VecSource {
    pub fn new(events: Vec<EventRecord>) -> Self {
        VecSource { events: events.into(), batch: 256 }
    }

    pub fn with_batch_size(mut self, batch: usize) -> Self {
        self.batch = batch.max(1);
        self
    }
}

impl EventSource for VecSource {
    fn next_batch(&mut self) -> Result<Option<Vec<EventRecord>>, SourceError> {
        if self.events.is_empty() {
            return Ok(None);
        }
        let n = self.batch.min(self.events.len());
        Ok(Some(self.events.drain(..n).collect()))
    }
}

/// Reads a source to the end.
pub fn collect_events(src: &mut dyn EventSource) -> Result<Vec<EventRecord>, SourceError> {
    let mut out = Vec::new();
    while let Some(batch) = src.next_batch()? {
        out.extend(batch);
    }
    Ok(out)
}

/// Runs a source on its own thread, handing batches over through a bounded
/// queue; order is preserved.
pub struct ThreadedSource {
    rx: Receiver<Result<Option<Vec<EventRecord>>, SourceError>>,
    handle: Option<JoinHandle<()>>,
    done: bool,
}

impl ThreadedSource {
    pub fn spawn<S: EventSource + Send + 'static>(mut src: S, capacity: usize) -> Self {
        let (tx, rx) = sync_channel(capacity.max(1));
        let handle = thread::spawn(move || loop {
            let item = src.next_batch();
            let last = !matches!(item, Ok(Some(_)));
            if tx.send(item).is_err() || last {
                break;
            }
        });
        ThreadedSource { rx, handle: Some(handle), done: false }
    }
}

impl EventSource for ThreadedSource {
    fn next_batch(&mut self) -> Result<Option<Vec<EventRecord>>, SourceError> {
        if self.done {
            return Ok(None);
        }
        let item = self.rx.recv().unwrap_or(Ok(None));
        if !matches!(item, Ok(Some(_))) {
            self.done = true;
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
        item
    }
}
