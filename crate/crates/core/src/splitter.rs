//! Splits a batch-oriented case's event stream into product-oriented part
//! traces at signal events.
//!
//! Industrial processes are commonly modeled around batches, so one instance
//! carries the data of several produced parts and a deviation in a single
//! part barely moves case-level conformance. A signal step marks the start of
//! a new part: every signal occurrence opens a new part trace (ordinal 1, 2,
//! …) and the signal's own events belong to the part it opens. Events before
//! the first signal form the case-level preamble. Cases without signals are
//! legal: everything stays in the preamble.

use std::collections::{BTreeSet, HashMap};

use crate::model::ModelSet;
use crate::stream::{Event, Lifecycle, StreamItem};

/// The events of one produced part within a batch case.
#[derive(Clone, Debug, PartialEq)]
pub struct PartTrace {
    /// `<case id>#<ordinal>`.
    pub part_id: String,
    pub ordinal: u32,
    pub parent_case: String,
    pub events: Vec<Event>,
}

fn part_id(case: &str, ordinal: u32) -> String {
    format!("{case}#{ordinal}")
}

fn signal_ids(set: &ModelSet) -> BTreeSet<String> {
    let main_id = set.main().model_id.clone();
    set.task_index(&main_id)
        .map(|index| {
            index
                .into_iter()
                .filter(|(_, info)| info.is_signal)
                .map(|(id, _)| id)
                .collect()
        })
        .unwrap_or_default()
}

/// Incremental splitter for a single case. Push events in stream order; a
/// completed part is returned as soon as the next signal arrives, and
/// [`Splitter::finish`] flushes the rest at end of case.
#[derive(Debug)]
pub struct Splitter {
    case: String,
    signals: BTreeSet<String>,
    ordinal: u32,
    preamble: Vec<Event>,
    current: Option<PartTrace>,
}

impl Splitter {
    pub fn new(case: impl Into<String>, set: &ModelSet) -> Self {
        Splitter {
            case: case.into(),
            signals: signal_ids(set),
            ordinal: 0,
            preamble: Vec::new(),
            current: None,
        }
    }

    fn is_signal_start(&self, event: &Event) -> bool {
        event.lifecycle == Lifecycle::Start && self.signals.contains(event.task_id())
    }

    /// Consumes one event; returns the part that the event just closed, if
    /// any. The pushed event gets its `part` field assigned.
    pub fn push(&mut self, event: &mut Event) -> Option<PartTrace> {
        let mut closed = None;
        if self.is_signal_start(event) {
            self.ordinal += 1;
            closed = self.current.take();
            self.current = Some(PartTrace {
                part_id: part_id(&self.case, self.ordinal),
                ordinal: self.ordinal,
                parent_case: self.case.clone(),
                events: Vec::new(),
            });
        }
        match &mut self.current {
            Some(part) => {
                event.part = Some(part.part_id.clone());
                part.events.push(event.clone());
            }
            None => {
                event.part = None;
                self.preamble.push(event.clone());
            }
        }
        closed
    }

    /// End of case: the preamble and the still-open last part.
    pub fn finish(self) -> (Vec<Event>, Option<PartTrace>) {
        (self.preamble, self.current)
    }
}

/// Batch form of the splitter: partitions one case's ordered events into the
/// preamble and the part traces.
pub fn split(events: &[Event], set: &ModelSet) -> (Vec<Event>, Vec<PartTrace>) {
    let Some(first) = events.first() else {
        return (Vec::new(), Vec::new());
    };
    let mut splitter = Splitter::new(&first.case, set);
    let mut parts = Vec::new();
    for event in events {
        let mut event = event.clone();
        if let Some(done) = splitter.push(&mut event) {
            parts.push(done);
        }
    }
    let (preamble, last) = splitter.finish();
    parts.extend(last);
    (preamble, parts)
}

/// Stream-level splitter: annotates every event of every case with its part
/// id, learning signal steps from the model control records in the stream.
#[derive(Debug, Default)]
pub struct StreamSplitter {
    cases: HashMap<String, Splitter>,
}

impl StreamSplitter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Processes one stream item in place, assigning `part` on events.
    /// Model updates pass through (they are case-level) and refresh the
    /// case's signal set.
    pub fn process(&mut self, item: &mut StreamItem) {
        match item {
            StreamItem::ModelUpdate(update) => {
                if let Ok(set) = ModelSet::parse(&update.model_description) {
                    match self.cases.get_mut(&update.case) {
                        Some(splitter) => splitter.signals = signal_ids(&set),
                        None => {
                            self.cases
                                .insert(update.case.clone(), Splitter::new(&update.case, &set));
                        }
                    }
                }
            }
            StreamItem::Event(event) => {
                if let Some(splitter) = self.cases.get_mut(&event.case) {
                    splitter.push(event);
                } else {
                    event.part = None;
                }
            }
        }
    }
}
