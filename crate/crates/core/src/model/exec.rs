//! Execution-state machinery behind `allowed_next` and the checker's order
//! tracking.
//!
//! Models are compiled into an [`Exec`] tree with subprocess calls inlined
//! and loops expanded to their static repetition count. Because task ids are
//! unique across a model's call closure, advancing the state by an observed
//! task id is deterministic: at most one step can consume it.

use std::collections::{BTreeMap, BTreeSet};

use super::{ModelSet, Node};

#[derive(Clone, Debug)]
pub(crate) enum Exec {
    Step { id: String, done: bool },
    Seq { children: Vec<Exec>, pos: usize },
    Par { children: Vec<Exec> },
}

impl Exec {
    fn build(node: &Node, set: &ModelSet) -> Exec {
        match node {
            Node::Task(t) => Exec::Step {
                id: t.task_id.clone(),
                done: false,
            },
            Node::Signal { task_id, .. } => Exec::Step {
                id: task_id.clone(),
                done: false,
            },
            Node::Sequence(children) => Exec::Seq {
                children: children.iter().map(|c| Exec::build(c, set)).collect(),
                pos: 0,
            },
            Node::Parallel(children) => Exec::Par {
                children: children.iter().map(|c| Exec::build(c, set)).collect(),
            },
            Node::Loop { count, body } => Exec::Seq {
                children: (0..*count).map(|_| Exec::build(body, set)).collect(),
                pos: 0,
            },
            Node::SubprocessCall { model_id, .. } => {
                let model = set.get(model_id).expect("validated set resolves calls");
                Exec::build(&model.root, set)
            }
        }
    }

    pub(crate) fn for_model(set: &ModelSet, model_id: &str) -> Exec {
        let model = set.get(model_id).expect("model id resolves");
        Exec::build(&model.root, set)
    }

    pub(crate) fn complete(&self) -> bool {
        match self {
            Exec::Step { done, .. } => *done,
            Exec::Seq { children, pos } => *pos >= children.len(),
            Exec::Par { children } => children.iter().all(Exec::complete),
        }
    }

    pub(crate) fn allowed_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Exec::Step { id, done } => {
                if !done {
                    out.insert(id.clone());
                }
            }
            Exec::Seq { children, pos } => {
                if let Some(child) = children.get(*pos) {
                    child.allowed_into(out);
                }
            }
            Exec::Par { children } => {
                for child in children {
                    if !child.complete() {
                        child.allowed_into(out);
                    }
                }
            }
        }
    }

    pub(crate) fn allowed(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.allowed_into(&mut out);
        out
    }

    /// Consumes `id` if it may start next; leaves the state untouched
    /// otherwise.
    pub(crate) fn advance(&mut self, id: &str) -> bool {
        match self {
            Exec::Step { id: step, done } => {
                if !*done && step == id {
                    *done = true;
                    true
                } else {
                    false
                }
            }
            Exec::Seq { children, pos } => {
                let Some(child) = children.get_mut(*pos) else {
                    return false;
                };
                let ok = child.advance(id);
                if ok {
                    while *pos < children.len() && children[*pos].complete() {
                        *pos += 1;
                    }
                }
                ok
            }
            Exec::Par { children } => children.iter_mut().any(|c| c.advance(id)),
        }
    }
}

/// The exact set of task ids that may start next after `prefix` under the
/// model's semantics: sequence order, any interleaving for parallels, and
/// count-bounded loop repetition. Signal steps participate with their ids.
/// Returns the empty set if the prefix is already non-conforming (including
/// unknown task ids) or the instance is complete.
pub fn allowed_next<S: AsRef<str>>(
    set: &ModelSet,
    model_id: &str,
    prefix: &[S],
) -> BTreeSet<String> {
    if set.get(model_id).is_none() {
        return BTreeSet::new();
    }
    let mut exec = Exec::for_model(set, model_id);
    for id in prefix {
        if !exec.advance(id.as_ref()) {
            return BTreeSet::new();
        }
    }
    exec.allowed()
}

/// Outcome of observing one start event.
#[derive(Clone, Debug, PartialEq)]
pub struct StartOutcome {
    pub conforming: bool,
    /// What the tracker would have accepted instead; captured before the
    /// advance for use in explanations.
    pub allowed_before: BTreeSet<String>,
}

/// Tolerant incremental order tracking over one case's start events.
///
/// A conforming start advances the execution state. A non-conforming start is
/// reported and remembered: when the state later reaches the position where
/// that task belonged, the remembered out-of-order start is consumed silently
/// instead of blocking the rest of the case.
#[derive(Clone, Debug)]
pub struct OrderTracker {
    exec: Exec,
    out_of_order: BTreeMap<String, u32>,
}

impl OrderTracker {
    pub fn new(set: &ModelSet, model_id: &str) -> Self {
        OrderTracker {
            exec: Exec::for_model(set, model_id),
            out_of_order: BTreeMap::new(),
        }
    }

    fn drain(&mut self) {
        loop {
            let allowed = self.exec.allowed();
            let Some(id) = allowed
                .into_iter()
                .find(|a| self.out_of_order.contains_key(a))
            else {
                return;
            };
            let consumed = self.exec.advance(&id);
            debug_assert!(consumed);
            match self.out_of_order.get_mut(&id) {
                Some(n) if *n > 1 => *n -= 1,
                _ => {
                    self.out_of_order.remove(&id);
                }
            }
        }
    }

    pub fn observe_start(&mut self, task_id: &str) -> StartOutcome {
        self.drain();
        let allowed_before = self.exec.allowed();
        if self.exec.advance(task_id) {
            self.drain();
            StartOutcome {
                conforming: true,
                allowed_before,
            }
        } else {
            *self.out_of_order.entry(task_id.to_string()).or_insert(0) += 1;
            StartOutcome {
                conforming: false,
                allowed_before,
            }
        }
    }

    /// The post-drain allowed set; what `observe_start` would currently
    /// accept.
    pub fn allowed(&mut self) -> BTreeSet<String> {
        self.drain();
        self.exec.allowed()
    }

    /// Rebuilds the tracker against a new model, silently replaying an
    /// already-observed start history (used after model evolution).
    pub fn rebuild<S: AsRef<str>>(set: &ModelSet, model_id: &str, history: &[S]) -> Self {
        let mut tracker = OrderTracker::new(set, model_id);
        for id in history {
            tracker.observe_start(id.as_ref());
        }
        tracker
    }
}

#[cfg(test)]
mod tests {
    use super::super::ModelSet;
    use super::*;

    fn set(doc: &str) -> ModelSet {
        ModelSet::parse(doc).unwrap()
    }

    fn allowed(set: &ModelSet, prefix: &[&str]) -> BTreeSet<String> {
        allowed_next(set, &set.main().model_id, prefix)
    }

    fn names(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sequence_start() {
        let s = set("model m v1 { seq { task a; task b; task c } }");
        assert_eq!(allowed(&s, &[]), names(&["a"]));
        assert_eq!(allowed(&s, &["a"]), names(&["b"]));
        assert_eq!(allowed(&s, &["a", "b", "c"]), names(&[]));
    }

    #[test]
    fn parallel_then_task() {
        let s = set("model m v1 { seq { par { task a; task b }; task c } }");
        assert_eq!(allowed(&s, &[]), names(&["a", "b"]));
        assert_eq!(allowed(&s, &["a"]), names(&["b"]));
        assert_eq!(allowed(&s, &["b"]), names(&["a"]));
        assert_eq!(allowed(&s, &["a", "b"]), names(&["c"]));
    }

    #[test]
    fn loop_completion() {
        let s = set("model m v1 { loop 2 { task a } }");
        assert_eq!(allowed(&s, &["a"]), names(&["a"]));
        assert_eq!(allowed(&s, &["a", "a"]), names(&[]));
        assert_eq!(allowed(&s, &["a", "a", "a"]), names(&[]));
    }

    #[test]
    fn non_conforming_prefix_yields_empty() {
        let s = set("model m v1 { seq { task a; task b } }");
        assert_eq!(allowed(&s, &["b"]), names(&[]));
        assert_eq!(allowed(&s, &["ghost"]), names(&[]));
    }

    #[test]
    fn subprocess_calls_are_inlined() {
        let s = set("model m v1 { seq { task a; call sub; task z } } model sub v1 { task s }");
        assert_eq!(allowed(&s, &["a"]), names(&["s"]));
        assert_eq!(allowed(&s, &["a", "s"]), names(&["z"]));
    }

    #[test]
    fn tracker_skips_unexpected_and_recovers() {
        let s = set("model m v1 { seq { task a; task b; task c; task d } }");
        let mut t = OrderTracker::new(&s, "m");
        // b starts too early, then the rest in order: only b is flagged.
        assert!(!t.observe_start("b").conforming);
        assert!(t.observe_start("a").conforming);
        assert!(t.observe_start("c").conforming);
        assert!(t.observe_start("d").conforming);
    }

    #[test]
    fn tracker_determinism() {
        let s = set("model m v1 { seq { par { task a; task b }; task c } }");
        let runs: Vec<Vec<bool>> = (0..3)
            .map(|_| {
                let mut t = OrderTracker::new(&s, "m");
                ["c", "a", "b"]
                    .iter()
                    .map(|id| t.observe_start(id).conforming)
                    .collect()
            })
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[1], runs[2]);
    }
}
