//! Annotated process models: the node tree, the model repository, parsing,
//! canonical text serialization, and control-flow queries.
//!
//! A model is written in a small structured text format, one or more `model`
//! blocks per document:
//!
//! ```text
//! model daily_batch v1 {
//!   seq {
//!     task check "Check Machine" dur=5;
//!     loop 5 {
//!       seq { signal "part" id=__sig1; call produce_part }
//!     }
//!   }
//! }
//! model produce_part v1 {
//!   seq { task cut "Cut Part" dur=30 gap=2; task unload "Unload" dur=10 }
//! }
//! ```
//!
//! Node constructors: `seq { ... }`, `par { ... }`, `loop N { ... }`,
//! `task <id> ["label"] [dur=SECONDS] [gap=SECONDS] [series=ID]`,
//! `call <model_id> [correlate=true|false]`, `signal "label" [id=ID]`.
//! Statements are separated by `;`; a loop body with several statements is an
//! implicit sequence; `#` starts a line comment. The parser rejects unknown
//! keys. A `task` without `dur` is never checked for duration deviations.

mod exec;
mod parse;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use exec::{allowed_next, OrderTracker, StartOutcome};
pub use parse::parse_document;

pub(crate) use exec::Exec;

/// Crate-internal: compiled execution state for a model within a set.
pub(crate) fn exec_for(set: &ModelSet, model_id: &str) -> Exec {
    Exec::for_model(set, model_id)
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("duplicate task id '{0}'")]
    DuplicateTaskId(String),
    #[error("unresolved subprocess reference '{0}'")]
    UnresolvedReference(String),
    #[error("recursive subprocess reference involving '{0}'")]
    RecursiveReference(String),
    #[error("duplicate model id '{0}'")]
    DuplicateModelId(String),
    #[error("negative duration on task '{0}'")]
    NegativeDuration(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty parallel")]
    EmptyParallel,
    #[error("loop count must be between 1 and {max}, got {got}", max = MAX_LOOP_COUNT)]
    BadLoopCount { got: u64 },
    #[error("document contains no model block")]
    NoModels,
    #[error("unknown model '{0}'")]
    UnknownModel(String),
}

/// Upper bound on static loop repetition; keeps expanded execution state at
/// desk scale.
pub const MAX_LOOP_COUNT: u32 = 10_000;

/// A task node: the unit of work the engine enacts and the checker judges.
/// `expected_duration` is the average duration annotation in seconds; absent
/// means a deviation in this task is treated as harmless. `expected_gap_after`
/// is the expected idle time between this task's completion and the next
/// task's start. `reference_series_id` names the golden sensor series the
/// task's measured series is compared against.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskNode {
    pub task_id: String,
    pub label: String,
    pub expected_duration: Option<f64>,
    pub expected_gap_after: Option<f64>,
    pub reference_series_id: Option<String>,
}

impl TaskNode {
    pub fn new(task_id: impl Into<String>) -> Self {
        let task_id = task_id.into();
        TaskNode {
            label: task_id.clone(),
            task_id,
            expected_duration: None,
            expected_gap_after: None,
            reference_series_id: None,
        }
    }

    pub fn with_duration(mut self, seconds: f64) -> Self {
        self.expected_duration = Some(seconds);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Task(TaskNode),
    Sequence(Vec<Node>),
    Parallel(Vec<Node>),
    Loop {
        count: u32,
        body: Box<Node>,
    },
    SubprocessCall {
        model_id: String,
        correlate_to_root: bool,
    },
    /// Marks the start of a new product-oriented trace within a batch case.
    Signal {
        task_id: String,
        label: String,
    },
}

/// An annotated process model: an identifier, a monotonically increasing
/// version, and the root node. Models are immutable after construction and
/// safe to share across concurrent readers.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessModel {
    pub model_id: String,
    pub version: u64,
    pub root: Node,
}

impl ProcessModel {
    pub fn new(model_id: impl Into<String>, version: u64, root: Node) -> Self {
        ProcessModel {
            model_id: model_id.into(),
            version,
            root,
        }
    }

    /// Validates the model-local invariants: unique task ids (signals
    /// included), non-empty sequences/parallels, loop counts in range, and
    /// non-negative duration annotations.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        validate_node(&self.root, &mut seen)
    }

    /// All task and signal ids in this model, in document order.
    pub fn step_ids(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect_step_ids(&self.root, &mut out);
        out
    }

    /// Ids of model blocks this model calls directly.
    pub fn called_models(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect_calls(&self.root, &mut out);
        out
    }
}

fn validate_node(node: &Node, seen: &mut BTreeSet<String>) -> Result<(), ModelError> {
    match node {
        Node::Task(t) => {
            if !seen.insert(t.task_id.clone()) {
                return Err(ModelError::DuplicateTaskId(t.task_id.clone()));
            }
            if t.expected_duration.is_some_and(|d| d < 0.0)
                || t.expected_gap_after.is_some_and(|g| g < 0.0)
            {
                return Err(ModelError::NegativeDuration(t.task_id.clone()));
            }
            Ok(())
        }
        Node::Signal { task_id, .. } => {
            if !seen.insert(task_id.clone()) {
                return Err(ModelError::DuplicateTaskId(task_id.clone()));
            }
            Ok(())
        }
        Node::Sequence(children) => {
            if children.is_empty() {
                return Err(ModelError::EmptySequence);
            }
            children.iter().try_for_each(|c| validate_node(c, seen))
        }
        Node::Parallel(children) => {
            if children.is_empty() {
                return Err(ModelError::EmptyParallel);
            }
            children.iter().try_for_each(|c| validate_node(c, seen))
        }
        Node::Loop { count, body } => {
            if *count == 0 || *count > MAX_LOOP_COUNT {
                return Err(ModelError::BadLoopCount {
                    got: u64::from(*count),
                });
            }
            validate_node(body, seen)
        }
        Node::SubprocessCall { .. } => Ok(()),
    }
}

fn collect_step_ids(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::Task(t) => out.push(t.task_id.clone()),
        Node::Signal { task_id, .. } => out.push(task_id.clone()),
        Node::Sequence(c) | Node::Parallel(c) => c.iter().for_each(|n| collect_step_ids(n, out)),
        Node::Loop { body, .. } => collect_step_ids(body, out),
        Node::SubprocessCall { .. } => {}
    }
}

fn collect_calls(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::SubprocessCall { model_id, .. } => out.push(model_id.clone()),
        Node::Sequence(c) | Node::Parallel(c) => c.iter().for_each(|n| collect_calls(n, out)),
        Node::Loop { body, .. } => collect_calls(body, out),
        Node::Task(_) | Node::Signal { .. } => {}
    }
}

/// A validated set of models: the repository unit subprocess calls resolve
/// against. The first model of a parsed document is the main model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSet {
    models: BTreeMap<String, ProcessModel>,
    order: Vec<String>,
}

impl ModelSet {
    /// Builds and validates a set: unique model ids, all subprocess
    /// references resolvable, no call cycles, and task ids unique across each
    /// model's call closure (required for unambiguous conformance over the
    /// merged case stream).
    pub fn new(models: Vec<ProcessModel>) -> Result<Self, ModelError> {
        if models.is_empty() {
            return Err(ModelError::NoModels);
        }
        let mut map = BTreeMap::new();
        let mut order = Vec::new();
        for m in models {
            m.validate()?;
            if map.contains_key(&m.model_id) {
                return Err(ModelError::DuplicateModelId(m.model_id));
            }
            order.push(m.model_id.clone());
            map.insert(m.model_id.clone(), m);
        }
        let set = ModelSet { models: map, order };
        for id in &set.order {
            set.check_closure(id)?;
        }
        Ok(set)
    }

    pub fn from_model(model: ProcessModel) -> Result<Self, ModelError> {
        Self::new(vec![model])
    }

    /// Parses a model document (one or more `model` blocks) into a validated
    /// set. The first block is the main model.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        Self::new(parse_document(text)?)
    }

    pub fn main(&self) -> &ProcessModel {
        &self.models[&self.order[0]]
    }

    pub fn get(&self, model_id: &str) -> Option<&ProcessModel> {
        self.models.get(model_id)
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    /// The model plus everything it transitively calls, in depth-first
    /// discovery order starting at `model_id`.
    pub fn closure(&self, model_id: &str) -> Result<Vec<&ProcessModel>, ModelError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.closure_inner(model_id, &mut seen, &mut out)?;
        Ok(out)
    }

    fn closure_inner<'a>(
        &'a self,
        model_id: &str,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<&'a ProcessModel>,
    ) -> Result<(), ModelError> {
        if !seen.insert(model_id.to_string()) {
            return Ok(());
        }
        let model = self
            .models
            .get(model_id)
            .ok_or_else(|| ModelError::UnresolvedReference(model_id.to_string()))?;
        out.push(model);
        for called in model.called_models() {
            self.closure_inner(&called, seen, out)?;
        }
        Ok(())
    }

    fn check_closure(&self, model_id: &str) -> Result<(), ModelError> {
        // Cycle detection over the call graph.
        let mut on_stack = Vec::new();
        self.check_cycles(model_id, &mut on_stack)?;
        // Task ids must be unique across the closure so an observed task id
        // maps to exactly one step of the merged case execution.
        let mut seen = BTreeSet::new();
        for model in self.closure(model_id)? {
            for id in model.step_ids() {
                if !seen.insert(id.clone()) {
                    return Err(ModelError::DuplicateTaskId(id));
                }
            }
        }
        Ok(())
    }

    fn check_cycles(&self, model_id: &str, on_stack: &mut Vec<String>) -> Result<(), ModelError> {
        if on_stack.iter().any(|m| m == model_id) {
            return Err(ModelError::RecursiveReference(model_id.to_string()));
        }
        let model = self
            .models
            .get(model_id)
            .ok_or_else(|| ModelError::UnresolvedReference(model_id.to_string()))?;
        on_stack.push(model_id.to_string());
        for called in model.called_models() {
            self.check_cycles(&called, on_stack)?;
        }
        on_stack.pop();
        Ok(())
    }

    /// Task metadata indexed by step id over the closure of `model_id`.
    pub fn task_index(&self, model_id: &str) -> Result<BTreeMap<String, StepInfo>, ModelError> {
        let mut out = BTreeMap::new();
        for model in self.closure(model_id)? {
            index_node(&model.root, &mut out);
        }
        Ok(out)
    }
}

/// Per-step metadata the logger and checker need: label, annotations, and
/// whether the step is a signal.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub label: String,
    pub expected_duration: Option<f64>,
    pub expected_gap_after: Option<f64>,
    pub reference_series_id: Option<String>,
    pub is_signal: bool,
}

fn index_node(node: &Node, out: &mut BTreeMap<String, StepInfo>) {
    match node {
        Node::Task(t) => {
            out.insert(
                t.task_id.clone(),
                StepInfo {
                    label: t.label.clone(),
                    expected_duration: t.expected_duration,
                    expected_gap_after: t.expected_gap_after,
                    reference_series_id: t.reference_series_id.clone(),
                    is_signal: false,
                },
            );
        }
        Node::Signal { task_id, label } => {
            out.insert(
                task_id.clone(),
                StepInfo {
                    label: label.clone(),
                    expected_duration: None,
                    expected_gap_after: None,
                    reference_series_id: None,
                    is_signal: true,
                },
            );
        }
        Node::Sequence(c) | Node::Parallel(c) => c.iter().for_each(|n| index_node(n, out)),
        Node::Loop { body, .. } => index_node(body, out),
        Node::SubprocessCall { .. } => {}
    }
}

/// Parses a self-contained model document and returns its main model.
pub fn parse_model(text: &str) -> Result<ProcessModel, ModelError> {
    Ok(ModelSet::parse(text)?.main().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_task_document() {
        let m = parse_model(r#"model demo v1 { task a "Collect Data" dur=30 }"#).unwrap();
        assert_eq!(m.model_id, "demo");
        assert_eq!(m.version, 1);
        match &m.root {
            Node::Task(t) => {
                assert_eq!(t.task_id, "a");
                assert_eq!(t.label, "Collect Data");
                assert_eq!(t.expected_duration, Some(30.0));
            }
            other => panic!("expected task, got {other:?}"),
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let err = parse_model("model demo v1 { seq { } }").unwrap_err();
        assert_eq!(err, ModelError::EmptySequence);
    }

    #[test]
    fn duplicate_task_id_rejected() {
        let err = parse_model("model demo v1 { seq { task a; task a } }").unwrap_err();
        assert_eq!(err, ModelError::DuplicateTaskId("a".into()));
    }

    #[test]
    fn duplicate_task_id_across_closure_rejected() {
        let err =
            ModelSet::parse("model main v1 { seq { task a; call sub } } model sub v1 { task a }")
                .unwrap_err();
        assert_eq!(err, ModelError::DuplicateTaskId("a".into()));
    }

    #[test]
    fn unresolved_reference_rejected() {
        let err = ModelSet::parse("model main v1 { call ghost }").unwrap_err();
        assert_eq!(err, ModelError::UnresolvedReference("ghost".into()));
    }

    #[test]
    fn recursive_reference_rejected() {
        let err = ModelSet::parse("model a v1 { call b } model b v1 { call a }").unwrap_err();
        assert!(matches!(err, ModelError::RecursiveReference(_)));
    }

    #[test]
    fn negative_duration_rejected() {
        let err = parse_model("model demo v1 { task a dur=-3 }").unwrap_err();
        assert!(matches!(
            err,
            ModelError::Syntax { .. } | ModelError::NegativeDuration(_)
        ));
    }

    #[test]
    fn closure_discovery_order() {
        let set = ModelSet::parse(
            "model main v1 { seq { call b; call c } } \
             model c v1 { task tc } \
             model b v1 { task tb }",
        )
        .unwrap();
        let ids: Vec<_> = set
            .closure("main")
            .unwrap()
            .iter()
            .map(|m| m.model_id.clone())
            .collect();
        assert_eq!(ids, vec!["main", "b", "c"]);
    }
}
