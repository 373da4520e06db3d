//! FREE/ACQUIRED arbiters for the shared pipe and the mixer power budget.
//!
//! Two implementations of the same contract. The check variant is a plain
//! availability test meant for logic that all runs on the scan thread. The
//! monitor variant takes a lock around the same state so concurrent callers
//! get atomic grants: of two simultaneous acquirers exactly one wins.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::sync::Mutex;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResourceVariant {
    Check,
    Monitor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AcquireOutcome {
    Granted,
    /// Someone else holds the resource; there is no queue, callers retry.
    Denied { holder: String },
}

impl AcquireOutcome {
    pub fn granted(&self) -> bool {
        matches!(self, AcquireOutcome::Granted)
    }
}

impl fmt::Display for AcquireOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcquireOutcome::Granted => f.write_str("Granted"),
            AcquireOutcome::Denied { .. } => f.write_str("Denied"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("`{requester}` does not hold resource `{resource}`")]
pub struct NotHolder {
    pub resource: String,
    pub requester: String,
}

/// The arbitration contract shared by both variants. FREE means no holder;
/// ACQUIRED means exactly one.
pub trait CommonResource {
    fn name(&self) -> &str;

    fn variant(&self) -> ResourceVariant;

    /// FREE -> ACQUIRED by `requester`; ACQUIRED -> denied, no queuing.
    fn try_acquire(&self, requester: &str) -> AcquireOutcome;

    /// ACQUIRED by `requester` -> FREE. Anyone else (or FREE) is an error.
    fn release(&self, requester: &str) -> Result<(), NotHolder>;

    fn holder(&self) -> Option<String>;
}

fn acquire_slot(slot: &mut Option<String>, requester: &str) -> AcquireOutcome {
    debug_assert!(!requester.is_empty(), "requester id must be non-empty");
    match slot {
        Some(holder) => AcquireOutcome::Denied {
            holder: holder.clone(),
        },
        None => {
            *slot = Some(requester.to_string());
            AcquireOutcome::Granted
        }
    }
}

fn release_slot(name: &str, slot: &mut Option<String>, requester: &str) -> Result<(), NotHolder> {
    match slot {
        Some(holder) if holder == requester => {
            *slot = None;
            Ok(())
        }
        _ => Err(NotHolder {
            resource: name.to_string(),
            requester: requester.to_string(),
        }),
    }
}

/// Availability-check implementation for single-threaded use. Not `Sync`;
/// the type system keeps it on the scan thread.
pub struct CheckResource {
    name: String,
    holder: RefCell<Option<String>>,
}

impl CheckResource {
    pub fn new(name: &str) -> CheckResource {
        CheckResource {
            name: name.to_string(),
            holder: RefCell::new(None),
        }
    }
}

impl CommonResource for CheckResource {
    fn name(&self) -> &str {
        &self.name
    }

    fn variant(&self) -> ResourceVariant {
        ResourceVariant::Check
    }

    fn try_acquire(&self, requester: &str) -> AcquireOutcome {
        acquire_slot(&mut self.holder.borrow_mut(), requester)
    }

    fn release(&self, requester: &str) -> Result<(), NotHolder> {
        release_slot(&self.name, &mut self.holder.borrow_mut(), requester)
    }

    fn holder(&self) -> Option<String> {
        self.holder.borrow().clone()
    }
}

/// Monitor implementation: the grant decision happens under a lock, so it is
/// atomic for concurrent callers.
pub struct MonitorResource {
    name: String,
    holder: Mutex<Option<String>>,
}

impl MonitorResource {
    pub fn new(name: &str) -> MonitorResource {
        MonitorResource {
            name: name.to_string(),
            holder: Mutex::new(None),
        }
    }
}

impl CommonResource for MonitorResource {
    fn name(&self) -> &str {
        &self.name
    }

    fn variant(&self) -> ResourceVariant {
        ResourceVariant::Monitor
    }

    fn try_acquire(&self, requester: &str) -> AcquireOutcome {
        acquire_slot(&mut self.holder.lock().unwrap(), requester)
    }

    fn release(&self, requester: &str) -> Result<(), NotHolder> {
        release_slot(&self.name, &mut self.holder.lock().unwrap(), requester)
    }

    fn holder(&self) -> Option<String> {
        self.holder.lock().unwrap().clone()
    }
}

/// Builds the requested variant behind the shared trait.
pub fn make_resource(name: &str, variant: ResourceVariant) -> Rc<dyn CommonResource> {
    match variant {
        ResourceVariant::Check => Rc::new(CheckResource::new(name)),
        ResourceVariant::Monitor => Rc::new(MonitorResource::new(name)),
    }
}
