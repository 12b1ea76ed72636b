//! Converts engine notifications into the event stream.
//!
//! The logger resolves every instance to its root via the parent chain, so
//! all events spawned by sub-processes are related to the main process. It
//! also stores the model descriptions travelling with instance-created and
//! model-changed notifications: they supply task labels and are forwarded to
//! the checker as case-level control records. The logger never rejects task
//! data — undeliverable notifications are quarantined with a diagnostic, not
//! silently dropped.

use std::collections::HashMap;

use crate::engine::{EngineNotification, NotificationKind};
use crate::model::{ModelSet, StepInfo};

use super::{AttrValue, Event, Lifecycle, ModelUpdate, StreamItem, TASK_ID_ATTR};

/// Data key the logger maps to the event's `org:resource` field.
const RESOURCE_DATA_KEY: &str = "resource";

#[derive(Clone, Debug)]
pub struct Quarantined {
    pub notification: EngineNotification,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct Logger {
    /// instance id -> root instance id (identity for root instances).
    correlation: HashMap<String, String>,
    /// case id -> step metadata from every model description seen.
    steps: HashMap<String, HashMap<String, StepInfo>>,
    quarantine: Vec<Quarantined>,
}

impl Logger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn quarantined(&self) -> &[Quarantined] {
        &self.quarantine
    }

    fn quarantine(&mut self, n: &EngineNotification, reason: impl Into<String>) {
        self.quarantine.push(Quarantined {
            notification: n.clone(),
            reason: reason.into(),
        });
    }

    fn learn_model(&mut self, case: &str, description: &str) {
        match ModelSet::parse(description) {
            Ok(set) => {
                let main_id = set.main().model_id.clone();
                if let Ok(index) = set.task_index(&main_id) {
                    self.steps
                        .entry(case.to_string())
                        .or_default()
                        .extend(index);
                }
            }
            Err(_) => {
                // Labels degrade to task ids; the checker reports its own
                // diagnostic when it meets the same description.
            }
        }
    }

    /// Processes one notification, returning the stream items it produces:
    /// exactly one event for task notifications, a model control record for
    /// root instance-created/model-changed notifications, nothing otherwise.
    pub fn ingest(&mut self, n: &EngineNotification) -> Vec<StreamItem> {
        match n.kind {
            NotificationKind::InstanceCreated => {
                let root = match &n.parent {
                    None => n.instance.clone(),
                    Some(parent) => match self.correlation.get(parent) {
                        Some(root) => root.clone(),
                        None => {
                            self.quarantine(n, format!("unknown parent instance '{parent}'"));
                            return Vec::new();
                        }
                    },
                };
                self.correlation.insert(n.instance.clone(), root.clone());
                if let Some(desc) = &n.model_description {
                    self.learn_model(&root, desc);
                    if n.parent.is_none() {
                        return vec![StreamItem::ModelUpdate(ModelUpdate::new(
                            root, &n.model, n.version, n.ts, desc,
                        ))];
                    }
                } else if n.parent.is_none() {
                    self.quarantine(n, "instance created without model description");
                }
                Vec::new()
            }
            NotificationKind::ModelChanged => {
                let Some(root) = self.correlation.get(&n.instance).cloned() else {
                    self.quarantine(n, "model change for unknown instance");
                    return Vec::new();
                };
                if root != n.instance {
                    self.quarantine(n, "model change on a sub-process instance is unsupported");
                    return Vec::new();
                }
                let Some(desc) = &n.model_description else {
                    self.quarantine(n, "model change without model description");
                    return Vec::new();
                };
                self.learn_model(&root, desc);
                vec![StreamItem::ModelUpdate(ModelUpdate::new(
                    root, &n.model, n.version, n.ts, desc,
                ))]
            }
            NotificationKind::TaskEnacted | NotificationKind::TaskFinished => {
                let Some(task_id) = &n.task else {
                    self.quarantine(n, "task notification without task id");
                    return Vec::new();
                };
                let root = match self.correlation.get(&n.instance) {
                    Some(root) => root.clone(),
                    None => {
                        if n.parent.is_some() {
                            self.quarantine(n, "orphan sub-process notification");
                            return Vec::new();
                        }
                        // A root instance we never saw created: correlate to
                        // itself so logging stays lossless.
                        self.correlation
                            .insert(n.instance.clone(), n.instance.clone());
                        n.instance.clone()
                    }
                };
                let label = self
                    .steps
                    .get(&root)
                    .and_then(|steps| steps.get(task_id))
                    .map(|info| info.label.clone())
                    .unwrap_or_else(|| task_id.clone());

                let mut attrs = n.data.clone();
                let resource = match attrs.remove(RESOURCE_DATA_KEY) {
                    Some(AttrValue::Str(s)) => Some(s),
                    Some(other) => {
                        attrs.insert(RESOURCE_DATA_KEY.to_string(), other);
                        None
                    }
                    None => None,
                };
                attrs.insert(TASK_ID_ATTR.to_string(), AttrValue::Str(task_id.clone()));

                vec![StreamItem::Event(Event {
                    case: root,
                    source_instance: n.instance.clone(),
                    name: label,
                    lifecycle: match n.kind {
                        NotificationKind::TaskEnacted => Lifecycle::Start,
                        _ => Lifecycle::Complete,
                    },
                    ts: n.ts,
                    resource,
                    attrs,
                    part: None,
                })]
            }
        }
    }

    /// The events produced by a notification (0 or 1); control records are
    /// filtered out.
    pub fn notification_to_events(&mut self, n: &EngineNotification) -> Vec<Event> {
        self.ingest(n)
            .into_iter()
            .filter_map(|item| match item {
                StreamItem::Event(e) => Some(e),
                StreamItem::ModelUpdate(_) => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::engine::{run_instance, FaultPlan, SimClock};
    use crate::model::ModelSet;

    fn notif(kind: NotificationKind, instance: &str, parent: Option<&str>) -> EngineNotification {
        EngineNotification {
            kind,
            instance: instance.into(),
            parent: parent.map(String::from),
            model: "m".into(),
            version: 1,
            task: None,
            ts: 0,
            data: BTreeMap::new(),
            model_description: Some("model m v1 { task a }".into()),
        }
    }

    #[test]
    fn instance_created_yields_no_event_but_correlates() {
        let mut logger = Logger::new();
        let items = logger.ingest(&notif(NotificationKind::InstanceCreated, "i1", None));
        assert_eq!(items.len(), 1);
        assert!(matches!(items[0], StreamItem::ModelUpdate(_)));
        assert_eq!(
            logger
                .notification_to_events(&notif(NotificationKind::InstanceCreated, "i2", Some("i1")))
                .len(),
            0
        );
        assert_eq!(logger.correlation.get("i2"), Some(&"i1".to_string()));
    }

    #[test]
    fn child_events_carry_root_case() {
        let set = ModelSet::parse(
            "model main v1 { seq { task a; call sub } } \
             model sub v1 { seq { task s; call subsub } } \
             model subsub v1 { task deep }",
        )
        .unwrap();
        let ns = run_instance(
            &set,
            "main",
            &SimClock::default(),
            &BTreeMap::new(),
            &FaultPlan::none(),
            0,
        )
        .unwrap();
        let mut logger = Logger::new();
        let mut events = Vec::new();
        for n in &ns {
            events.extend(logger.notification_to_events(n));
        }
        // Transitive correlation: even the doubly nested task maps to the root.
        assert!(events.iter().all(|e| e.case == "i0001"));
        let deep = events.iter().find(|e| e.task_id() == "deep").unwrap();
        assert_eq!(deep.source_instance, "i0003");
        assert!(logger.quarantined().is_empty());
    }

    #[test]
    fn orphan_subprocess_is_quarantined() {
        let mut logger = Logger::new();
        let mut n = notif(NotificationKind::TaskEnacted, "i9", Some("ghost"));
        n.task = Some("a".into());
        assert!(logger.ingest(&n).is_empty());
        assert_eq!(logger.quarantined().len(), 1);
        assert!(logger.quarantined()[0].reason.contains("orphan"));
    }

    #[test]
    fn event_count_matches_task_occurrences() {
        let set = ModelSet::parse(
            "model m v1 { seq { task a; loop 3 { task b }; par { task c; task d } } }",
        )
        .unwrap();
        let ns = run_instance(
            &set,
            "m",
            &SimClock::default(),
            &BTreeMap::new(),
            &FaultPlan::none(),
            1,
        )
        .unwrap();
        let mut logger = Logger::new();
        let events: Vec<Event> = ns
            .iter()
            .flat_map(|n| logger.notification_to_events(n))
            .collect();
        // 1 + 3 + 2 = 6 task occurrences, two events each.
        assert_eq!(events.len(), 12);
    }

    #[test]
    fn labels_resolved_from_model_description() {
        let mut logger = Logger::new();
        let mut created = notif(NotificationKind::InstanceCreated, "i1", None);
        created.model_description = Some(r#"model m v1 { task a "Collect Data" dur=30 }"#.into());
        logger.ingest(&created);
        let mut enact = notif(NotificationKind::TaskEnacted, "i1", None);
        enact.task = Some("a".into());
        let events = logger.notification_to_events(&enact);
        assert_eq!(events[0].name, "Collect Data");
        assert_eq!(events[0].task_id(), "a");
    }
}
