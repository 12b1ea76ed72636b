//! The deterministic simulator: plans one legal execution order, applies the
//! fault plan, then walks the plan on the virtual clock emitting
//! notifications.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ModelSet, Node, TaskNode};
use crate::series::{reference_curve, SensorSeries};

use super::{
    AttrValue, EngineNotification, Fault, FaultPlan, NotificationKind, SimClock, SimError,
    WhichEvent,
};

/// Data key under which a sensor series is attached to a finish notification.
pub const SERIES_DATA_KEY: &str = "series";
/// Data key carrying a signal step's label.
pub const SIGNAL_DATA_KEY: &str = "signal";

/// Stores `series` under [`SERIES_DATA_KEY`] on a task-finished notification;
/// the notification is otherwise unchanged.
pub fn attach_series(
    mut notification: EngineNotification,
    series: SensorSeries,
) -> Result<EngineNotification, SimError> {
    if notification.kind != NotificationKind::TaskFinished {
        return Err(SimError::NotTaskFinished(notification.kind));
    }
    notification
        .data
        .insert(SERIES_DATA_KEY.to_string(), AttrValue::Series(series));
    Ok(notification)
}

#[derive(Clone, Debug)]
enum PlannedStep {
    Task(TaskNode),
    Signal { id: String, label: String },
}

impl PlannedStep {
    fn id(&self) -> &str {
        match self {
            PlannedStep::Task(t) => &t.task_id,
            PlannedStep::Signal { id, .. } => id,
        }
    }
}

#[derive(Clone, Debug)]
enum PlanItem {
    Instance {
        instance: String,
        parent: Option<String>,
        model_id: String,
        version: u64,
        description: String,
    },
    Run {
        instance: String,
        model_id: String,
        version: u64,
        step: PlannedStep,
    },
    ModelSwitch {
        instance: String,
        model_id: String,
        version: u64,
        description: String,
    },
}

/// Deterministic engine over a validated model set. Reusable across
/// instances: the clock and instance counter carry over, so a sequence of
/// runs forms one consistent timeline.
pub struct Simulator<'a> {
    set: &'a ModelSet,
    references: &'a BTreeMap<String, SensorSeries>,
    clock: SimClock,
    now_ms: u64,
    rng: ChaCha8Rng,
    next_instance: u64,
    /// Idle time inserted between consecutive instances.
    pub inter_instance_gap_s: f64,
}

/// Runs a single instance of `model_id` and returns its notification list.
/// Pure: identical inputs produce identical output.
pub fn run_instance(
    set: &ModelSet,
    model_id: &str,
    clock: &SimClock,
    references: &BTreeMap<String, SensorSeries>,
    plan: &FaultPlan,
    seed: u64,
) -> Result<Vec<EngineNotification>, SimError> {
    Simulator::new(set, clock.clone(), references, seed)?.run(model_id, plan)
}

impl<'a> Simulator<'a> {
    pub fn new(
        set: &'a ModelSet,
        clock: SimClock,
        references: &'a BTreeMap<String, SensorSeries>,
        seed: u64,
    ) -> Result<Self, SimError> {
        clock.validate()?;
        Ok(Simulator {
            set,
            references,
            now_ms: clock.start_ms,
            clock,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_instance: 1,
            inter_instance_gap_s: 5.0,
        })
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    fn fresh_instance_id(&mut self) -> String {
        let id = format!("i{:04}", self.next_instance);
        self.next_instance += 1;
        id
    }

    /// Runs one instance of `model_id` under `plan`, advancing the shared
    /// clock past the instance's end.
    pub fn run(
        &mut self,
        model_id: &str,
        plan: &FaultPlan,
    ) -> Result<Vec<EngineNotification>, SimError> {
        plan.validate().map_err(SimError::InapplicableFault)?;
        let model = self
            .set
            .get(model_id)
            .ok_or_else(|| SimError::UnknownModel(model_id.into()))?;
        let root_instance = self.fresh_instance_id();

        let mut items = vec![PlanItem::Instance {
            instance: root_instance.clone(),
            parent: None,
            model_id: model.model_id.clone(),
            version: model.version,
            description: self.set.closure_document(model_id)?,
        }];
        self.plan_node(
            &model.root,
            &root_instance,
            model_id,
            model.version,
            &mut items,
        )?;

        self.check_applicable(&items, plan)?;
        self.apply_swaps(&mut items, plan)?;
        if let Some(mc) = &plan.model_change {
            self.apply_model_change(&mut items, mc, &root_instance, model_id)?;
        }

        let notifications = self.emit(&items, plan)?;
        self.now_ms += to_ms(self.inter_instance_gap_s);
        Ok(notifications)
    }

    fn plan_node(
        &mut self,
        node: &Node,
        instance: &str,
        model_id: &str,
        version: u64,
        out: &mut Vec<PlanItem>,
    ) -> Result<(), SimError> {
        match node {
            Node::Task(t) => out.push(PlanItem::Run {
                instance: instance.to_string(),
                model_id: model_id.to_string(),
                version,
                step: PlannedStep::Task(t.clone()),
            }),
            Node::Signal { task_id, label } => out.push(PlanItem::Run {
                instance: instance.to_string(),
                model_id: model_id.to_string(),
                version,
                step: PlannedStep::Signal {
                    id: task_id.clone(),
                    label: label.clone(),
                },
            }),
            Node::Sequence(children) => {
                for child in children {
                    self.plan_node(child, instance, model_id, version, out)?;
                }
            }
            Node::Parallel(children) => {
                let mut branches: Vec<std::collections::VecDeque<PlanItem>> = Vec::new();
                for child in children {
                    let mut branch = Vec::new();
                    self.plan_node(child, instance, model_id, version, &mut branch)?;
                    branches.push(branch.into());
                }
                // Random merge preserving each branch's internal order: any
                // such merge is a legal interleaving.
                while branches.iter().any(|b| !b.is_empty()) {
                    let live: Vec<usize> = branches
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| !b.is_empty())
                        .map(|(i, _)| i)
                        .collect();
                    let pick = live[self.rng.gen_range(0..live.len())];
                    out.push(branches[pick].pop_front().expect("branch non-empty"));
                }
            }
            Node::Loop { count, body } => {
                for _ in 0..*count {
                    self.plan_node(body, instance, model_id, version, out)?;
                }
            }
            Node::SubprocessCall {
                model_id: callee,
                correlate_to_root,
            } => {
                let child_model = self
                    .set
                    .get(callee)
                    .ok_or_else(|| SimError::UnknownModel(callee.clone()))?;
                let child_instance = self.fresh_instance_id();
                out.push(PlanItem::Instance {
                    instance: child_instance.clone(),
                    parent: correlate_to_root.then(|| instance.to_string()),
                    model_id: child_model.model_id.clone(),
                    version: child_model.version,
                    description: self.set.closure_document(callee)?,
                });
                self.plan_node(
                    &child_model.root,
                    &child_instance,
                    callee,
                    child_model.version,
                    out,
                )?;
            }
        }
        Ok(())
    }

    fn occurrence_index(items: &[PlanItem], task: &str, occurrence: u32) -> Option<usize> {
        let mut seen = 0;
        for (i, item) in items.iter().enumerate() {
            if let PlanItem::Run { step, .. } = item {
                if step.id() == task {
                    seen += 1;
                    if seen == occurrence {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    fn check_applicable(&self, items: &[PlanItem], plan: &FaultPlan) -> Result<(), SimError> {
        for fault in &plan.faults {
            match fault {
                Fault::ZeroDuration { task, occurrence }
                | Fault::Delay {
                    task, occurrence, ..
                }
                | Fault::DropEvent {
                    task, occurrence, ..
                } => {
                    if Self::occurrence_index(items, task, *occurrence).is_none() {
                        return Err(SimError::InapplicableFault(format!(
                            "task '{task}' occurrence {occurrence} never executes"
                        )));
                    }
                }
                Fault::TamperSeries {
                    task, occurrence, ..
                } => {
                    let idx =
                        Self::occurrence_index(items, task, *occurrence).ok_or_else(|| {
                            SimError::InapplicableFault(format!(
                                "task '{task}' occurrence {occurrence} never executes"
                            ))
                        })?;
                    let has_series = matches!(
                        &items[idx],
                        PlanItem::Run { step: PlannedStep::Task(t), .. }
                            if t.reference_series_id.is_some()
                    );
                    if !has_series {
                        return Err(SimError::InapplicableFault(format!(
                            "task '{task}' carries no sensor series to tamper with"
                        )));
                    }
                }
                Fault::SwapOrder {
                    task_a,
                    task_b,
                    occurrence,
                } => {
                    if task_a == task_b {
                        return Err(SimError::InapplicableFault(
                            "swap requires two distinct tasks".into(),
                        ));
                    }
                    for task in [task_a, task_b] {
                        if Self::occurrence_index(items, task, *occurrence).is_none() {
                            return Err(SimError::InapplicableFault(format!(
                                "task '{task}' occurrence {occurrence} never executes"
                            )));
                        }
                    }
                }
            }
        }
        if let Some(mc) = &plan.model_change {
            if Self::occurrence_index(items, &mc.after_task, mc.occurrence).is_none() {
                return Err(SimError::InapplicableModelChange(format!(
                    "task '{}' occurrence {} never executes",
                    mc.after_task, mc.occurrence
                )));
            }
        }
        Ok(())
    }

    fn apply_swaps(&self, items: &mut [PlanItem], plan: &FaultPlan) -> Result<(), SimError> {
        for fault in &plan.faults {
            if let Fault::SwapOrder {
                task_a,
                task_b,
                occurrence,
            } = fault
            {
                let i =
                    Self::occurrence_index(items, task_a, *occurrence).expect("checked applicable");
                let j =
                    Self::occurrence_index(items, task_b, *occurrence).expect("checked applicable");
                items.swap(i, j);
            }
        }
        Ok(())
    }

    fn apply_model_change(
        &mut self,
        items: &mut Vec<PlanItem>,
        mc: &super::ModelChangeSpec,
        root_instance: &str,
        old_model_id: &str,
    ) -> Result<(), SimError> {
        if items
            .iter()
            .filter(|i| matches!(i, PlanItem::Instance { .. }))
            .count()
            > 1
        {
            return Err(SimError::InapplicableModelChange(
                "subprocess calls are not supported together with a model change".into(),
            ));
        }
        let new_set = ModelSet::parse(&mc.model_text)?;
        let new_model = new_set.main();
        if !new_model.called_models().is_empty() {
            return Err(SimError::InapplicableModelChange(
                "the new model must be call-free".into(),
            ));
        }
        let old_version = self.set.get(old_model_id).expect("validated").version;
        if new_model.model_id != old_model_id {
            return Err(SimError::InapplicableModelChange(format!(
                "model id must stay '{old_model_id}', got '{}'",
                new_model.model_id
            )));
        }
        if new_model.version <= old_version {
            return Err(SimError::InapplicableModelChange(format!(
                "version must increase beyond {old_version}, got {}",
                new_model.version
            )));
        }

        let split = Self::occurrence_index(items, &mc.after_task, mc.occurrence)
            .expect("checked applicable");
        let mut exec = crate::model::exec_for(&new_set, &new_model.model_id);
        for item in &items[..=split] {
            if let PlanItem::Run { step, .. } = item {
                if !exec.advance(step.id()) {
                    return Err(SimError::InapplicableModelChange(format!(
                        "executed prefix is not legal under the new model (at '{}')",
                        step.id()
                    )));
                }
            }
        }

        let step_templates = planned_steps(&new_model.root);
        let mut tail = Vec::new();
        while !exec.complete() {
            let allowed: Vec<String> = exec.allowed().into_iter().collect();
            let pick = allowed[self.rng.gen_range(0..allowed.len())].clone();
            exec.advance(&pick);
            let step = step_templates
                .get(&pick)
                .cloned()
                .expect("allowed step exists in new model");
            tail.push(PlanItem::Run {
                instance: root_instance.to_string(),
                model_id: new_model.model_id.clone(),
                version: new_model.version,
                step,
            });
        }

        items.truncate(split + 1);
        items.push(PlanItem::ModelSwitch {
            instance: root_instance.to_string(),
            model_id: new_model.model_id.clone(),
            version: new_model.version,
            description: new_model.to_text(),
        });
        items.extend(tail);
        Ok(())
    }

    fn emit(
        &mut self,
        items: &[PlanItem],
        plan: &FaultPlan,
    ) -> Result<Vec<EngineNotification>, SimError> {
        let mut notifications = Vec::new();
        let mut occurrences: BTreeMap<String, u32> = BTreeMap::new();
        let mut parents: BTreeMap<String, Option<String>> = BTreeMap::new();

        for item in items {
            match item {
                PlanItem::Instance {
                    instance,
                    parent,
                    model_id,
                    version,
                    description,
                } => {
                    parents.insert(instance.clone(), parent.clone());
                    notifications.push(EngineNotification {
                        kind: NotificationKind::InstanceCreated,
                        instance: instance.clone(),
                        parent: parent.clone(),
                        model: model_id.clone(),
                        version: *version,
                        task: None,
                        ts: self.now_ms,
                        data: BTreeMap::new(),
                        model_description: Some(description.clone()),
                    });
                }
                PlanItem::ModelSwitch {
                    instance,
                    model_id,
                    version,
                    description,
                } => {
                    notifications.push(EngineNotification {
                        kind: NotificationKind::ModelChanged,
                        instance: instance.clone(),
                        parent: parents.get(instance).cloned().flatten(),
                        model: model_id.clone(),
                        version: *version,
                        task: None,
                        ts: self.now_ms,
                        data: BTreeMap::new(),
                        model_description: Some(description.clone()),
                    });
                }
                PlanItem::Run {
                    instance,
                    model_id,
                    version,
                    step,
                } => {
                    let occ = occurrences.entry(step.id().to_string()).or_insert(0);
                    *occ += 1;
                    let occ = *occ;
                    let parent = parents.get(instance).cloned().flatten();
                    self.emit_step(
                        &mut notifications,
                        plan,
                        instance,
                        parent,
                        model_id,
                        *version,
                        step,
                        occ,
                    )?;
                }
            }
        }
        Ok(notifications)
    }

    #[allow(clippy::too_many_arguments)]
    fn emit_step(
        &mut self,
        out: &mut Vec<EngineNotification>,
        plan: &FaultPlan,
        instance: &str,
        parent: Option<String>,
        model_id: &str,
        version: u64,
        step: &PlannedStep,
        occ: u32,
    ) -> Result<(), SimError> {
        let task_id = step.id().to_string();
        let matches = |t: &str, o: u32| t == task_id && o == occ;

        let zeroed = plan.faults.iter().any(
            |f| matches!(f, Fault::ZeroDuration { task, occurrence } if matches(task, *occurrence)),
        );
        let extra: f64 = plan
            .faults
            .iter()
            .filter_map(|f| match f {
                Fault::Delay {
                    task,
                    occurrence,
                    extra_seconds,
                } if matches(task, *occurrence) => Some(*extra_seconds),
                _ => None,
            })
            .sum();
        let dropped = |which: WhichEvent| {
            plan.faults.iter().any(|f| {
                matches!(f, Fault::DropEvent { task, occurrence, which: w }
                    if matches(task, *occurrence) && *w == which)
            })
        };

        let (duration_s, mut finish_data) = match step {
            PlannedStep::Signal { label, .. } => {
                let mut data = BTreeMap::new();
                data.insert(SIGNAL_DATA_KEY.to_string(), AttrValue::Str(label.clone()));
                (0.0, data)
            }
            PlannedStep::Task(t) => {
                let duration = if zeroed {
                    0.0
                } else {
                    self.sample_duration(t) + extra
                };
                let mut data = BTreeMap::new();
                if let Some(series_id) = &t.reference_series_id {
                    if !zeroed {
                        let series = self.measure_series(series_id, plan, &task_id, occ);
                        data.insert(SERIES_DATA_KEY.to_string(), AttrValue::Series(series));
                    }
                }
                (duration, data)
            }
        };

        let enact_ts = self.now_ms;
        let finish_ts = enact_ts + to_ms(duration_s);
        let enact_data = match step {
            PlannedStep::Signal { label, .. } => {
                let mut data = BTreeMap::new();
                data.insert(SIGNAL_DATA_KEY.to_string(), AttrValue::Str(label.clone()));
                data
            }
            PlannedStep::Task(_) => BTreeMap::new(),
        };

        if !dropped(WhichEvent::Enact) {
            out.push(EngineNotification {
                kind: NotificationKind::TaskEnacted,
                instance: instance.to_string(),
                parent: parent.clone(),
                model: model_id.to_string(),
                version,
                task: Some(task_id.clone()),
                ts: enact_ts,
                data: enact_data,
                model_description: None,
            });
        }
        if !dropped(WhichEvent::Finish) {
            let series = finish_data.remove(SERIES_DATA_KEY);
            let mut n = EngineNotification {
                kind: NotificationKind::TaskFinished,
                instance: instance.to_string(),
                parent,
                model: model_id.to_string(),
                version,
                task: Some(task_id),
                ts: finish_ts,
                data: finish_data,
                model_description: None,
            };
            if let Some(AttrValue::Series(s)) = series {
                n = attach_series(n, s).expect("finish notification");
            }
            out.push(n);
        }

        self.now_ms = finish_ts;
        if let PlannedStep::Task(t) = step {
            let gap = t.expected_gap_after.unwrap_or(0.0);
            if gap > 0.0 {
                self.now_ms += to_ms(self.sample_around(gap));
            }
        }
        Ok(())
    }

    fn sample_duration(&mut self, task: &TaskNode) -> f64 {
        let baseline = self
            .clock
            .baselines
            .get(&task.task_id)
            .copied()
            .or(task.expected_duration)
            .unwrap_or(self.clock.default_duration_s);
        self.sample_around(baseline)
    }

    /// Lognormal sample with mean `baseline` and relative standard deviation
    /// `jitter`; exact baseline when jitter is zero.
    fn sample_around(&mut self, baseline: f64) -> f64 {
        if baseline <= 0.0 || self.clock.jitter <= 0.0 {
            return baseline.max(0.0);
        }
        let j2 = self.clock.jitter * self.clock.jitter;
        let sigma2 = (1.0 + j2).ln();
        let mu = baseline.ln() - sigma2 / 2.0;
        (mu + sigma2.sqrt() * self.standard_normal()).exp()
    }

    fn standard_normal(&mut self) -> f64 {
        // Box-Muller; the uniform draw is shifted off zero.
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn measure_series(
        &mut self,
        series_id: &str,
        plan: &FaultPlan,
        task_id: &str,
        occ: u32,
    ) -> SensorSeries {
        let golden = self
            .references
            .get(series_id)
            .cloned()
            .unwrap_or_else(|| reference_curve(100, 10.0, 12.5, 100, "unit"));
        let tamper = plan.faults.iter().find_map(|f| match f {
            Fault::TamperSeries {
                task,
                occurrence,
                offset,
                noise_amplitude,
            } if task == task_id && *occurrence == occ => Some((*offset, *noise_amplitude)),
            _ => None,
        });
        let points = golden
            .points
            .iter()
            .map(|&(off, v)| {
                let mut value = v;
                if self.clock.series_noise > 0.0 {
                    value += self.standard_normal() * self.clock.series_noise;
                }
                if let Some((offset, amp)) = tamper {
                    value += offset;
                    if amp > 0.0 {
                        value += self.standard_normal() * amp;
                    }
                }
                (off, value)
            })
            .collect();
        SensorSeries::new(golden.unit.clone(), points).expect("offsets preserved")
    }
}

fn to_ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round() as u64
}

fn planned_steps(node: &Node) -> BTreeMap<String, PlannedStep> {
    fn walk(node: &Node, out: &mut BTreeMap<String, PlannedStep>) {
        match node {
            Node::Task(t) => {
                out.insert(t.task_id.clone(), PlannedStep::Task(t.clone()));
            }
            Node::Signal { task_id, label } => {
                out.insert(
                    task_id.clone(),
                    PlannedStep::Signal {
                        id: task_id.clone(),
                        label: label.clone(),
                    },
                );
            }
            Node::Sequence(c) | Node::Parallel(c) => c.iter().for_each(|n| walk(n, out)),
            Node::Loop { body, .. } => walk(body, out),
            Node::SubprocessCall { .. } => {}
        }
    }
    let mut out = BTreeMap::new();
    walk(node, &mut out);
    out
}
