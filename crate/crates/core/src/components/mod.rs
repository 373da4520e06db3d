//! Component library: silo drivers and controllers, resource arbiters,
//! process controllers and the DFB/OFB comparison variant.

pub mod driver;
pub mod ofb;
pub mod process;
pub mod resource;
pub mod silo;

use crate::runtime::{RuntimeError, ScanCtx};
use crate::statechart::{Dispatch, Event, Machine};
use crate::trace::RecordKind;

/// Offers an event to a machine and traces the outcome: one EVT record per
/// dispatch (fired or ignored) plus a STATE record per transition taken.
pub(crate) fn dispatch_traced<C>(
    machine: &mut Machine<C>,
    event: &Event,
    ctx: &mut C,
    sc: &mut ScanCtx,
) -> Result<Dispatch, RuntimeError> {
    let outcome = machine
        .dispatch(event, ctx)
        .map_err(|source| RuntimeError::Livelock {
            instance: sc.instance.to_string(),
            tick: sc.tick,
            source,
        })?;
    match &outcome {
        Dispatch::Fired { steps } => {
            sc.emit(RecordKind::Evt, format!("{event} dispatched"));
            for s in steps {
                sc.emit(RecordKind::State, format!("{}->{}", s.from, s.to));
            }
        }
        Dispatch::Ignored => sc.emit(RecordKind::Evt, format!("{event} ignored")),
    }
    Ok(outcome)
}
