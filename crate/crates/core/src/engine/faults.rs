//! Fault plans: configurable incident injections applied during simulation.
//!
//! Occurrences are 1-based and count executions of a task id within one case
//! (subprocess executions included). Every fault must match a (task,
//! occurrence) that actually executes; the simulator fails fast otherwise so
//! test fixtures cannot silently rot.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhichEvent {
    Enact,
    Finish,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    /// The occurrence completes immediately: enact and finish share one
    /// timestamp and no sensor series is attached (the external software
    /// returned without measuring).
    ZeroDuration { task: String, occurrence: u32 },
    /// The occurrence takes `extra_seconds` longer than sampled.
    Delay {
        task: String,
        occurrence: u32,
        extra_seconds: f64,
    },
    /// The attached sensor series is perturbed by a constant offset plus
    /// seeded noise of the given amplitude; timestamps, data elements, and
    /// event order stay correct.
    TamperSeries {
        task: String,
        occurrence: u32,
        offset: f64,
        noise_amplitude: f64,
    },
    /// The given occurrences of two tasks execute in swapped order; the
    /// timeline is recomputed so timestamps stay consistent.
    SwapOrder {
        task_a: String,
        task_b: String,
        occurrence: u32,
    },
    /// The enact or finish notification of the occurrence is not emitted.
    DropEvent {
        task: String,
        occurrence: u32,
        which: WhichEvent,
    },
}

/// Replaces the instance's model after a task occurrence completes: a
/// `ModelChanged` notification carrying the new description is emitted and
/// the remainder of the run follows the new model. Supported for call-free
/// models whose executed prefix is legal under the new version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelChangeSpec {
    pub after_task: String,
    #[serde(default = "one")]
    pub occurrence: u32,
    /// New model document (single `model` block, higher version).
    pub model_text: String,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultPlan {
    #[serde(default)]
    pub faults: Vec<Fault>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_change: Option<ModelChangeSpec>,
    /// Which simulated instance (1-based) the plan applies to when a command
    /// runs several instances; single-instance runs ignore it.
    #[serde(default = "one")]
    pub instance: u32,
}

impl FaultPlan {
    pub fn none() -> Self {
        FaultPlan {
            faults: Vec::new(),
            model_change: None,
            instance: 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty() && self.model_change.is_none()
    }

    pub fn validate(&self) -> Result<(), String> {
        for fault in &self.faults {
            let occ = match fault {
                Fault::ZeroDuration { occurrence, .. }
                | Fault::Delay { occurrence, .. }
                | Fault::TamperSeries { occurrence, .. }
                | Fault::SwapOrder { occurrence, .. }
                | Fault::DropEvent { occurrence, .. } => *occurrence,
            };
            if occ == 0 {
                return Err(format!("occurrence must be >= 1 in {fault:?}"));
            }
            if let Fault::TamperSeries {
                noise_amplitude, ..
            } = fault
            {
                if *noise_amplitude < 0.0 {
                    return Err(format!("noise amplitude must be >= 0 in {fault:?}"));
                }
            }
            if let Fault::Delay { extra_seconds, .. } = fault {
                if *extra_seconds < 0.0 || !extra_seconds.is_finite() {
                    return Err(format!(
                        "extra_seconds must be finite and >= 0 in {fault:?}"
                    ));
                }
            }
        }
        if let Some(mc) = &self.model_change {
            if mc.occurrence == 0 {
                return Err("model change occurrence must be >= 1".into());
            }
        }
        Ok(())
    }
}
