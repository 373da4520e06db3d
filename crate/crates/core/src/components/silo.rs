//! The silo controller: the cyber half of the smart silo.
//!
//! One object captures both the state and the dynamic behavior of the silo.
//! The machine has the four states Empty, Filling, Full and Emptying plus a
//! transitory initial pseudo-state that picks the starting state from the
//! physical level. Fill and empty arrive as events from the environment and
//! are consumed only in the state that defines them; everything else is
//! ignored. The controller talks to the plant exclusively through its
//! driver and publishes filled/emptied to its subscribed process controller.

use std::rc::Rc;

use crate::bus::{NotificationProxy, Operation, Outbox};
use crate::components::driver::{DriverNotice, SiloDriver};
use crate::components::dispatch_traced;
use crate::plant::SiloId;
use crate::runtime::{FbLogic, RuntimeError, ScanCtx};
use crate::statechart::{Event, Machine, StatechartDef};
use crate::trace::{fmt_float, RecordKind};

/// Everything the silo machine's guards and actions can touch.
pub struct SiloCtx {
    /// E_i from this scan's snapshot.
    pub e: bool,
    /// F_i from this scan's snapshot.
    pub f: bool,
    pub driver: SiloDriver,
    notify: Option<NotificationProxy>,
    out: Outbox,
}

impl SiloCtx {
    /// A free-standing context with the given sensor values and no
    /// notification wiring, for driving the machine directly.
    pub fn unwired(silo: SiloId, e: bool, f: bool) -> SiloCtx {
        SiloCtx {
            e,
            f,
            driver: SiloDriver::new(silo),
            notify: None,
            out: Outbox::default(),
        }
    }

    fn notify_filled(&mut self) {
        let silo = self.driver.silo();
        if let Some(n) = &self.notify {
            n.filled(silo, &mut self.out);
        }
    }

    fn notify_emptied(&mut self) {
        let silo = self.driver.silo();
        if let Some(n) = &self.notify {
            n.emptied(silo, &mut self.out);
        }
    }
}

/// The silo statechart. The initial pseudo-state treats any silo with
/// liquid above the low-level sensor as Full (never refill a non-empty
/// silo); only a silo reading E false starts Empty.
pub fn silo_statechart() -> StatechartDef<SiloCtx> {
    StatechartDef::builder("Silo")
        .states(&["Empty", "Filling", "Full", "Emptying"])
        .initial_if(|c: &SiloCtx, _| c.e, "Full")
        .initial_else("Empty")
        .transition("Empty", "fill", "Filling")
        .action("openINValve", |c, _| c.driver.open_in_valve())
        .done()
        .transition("Filling", "levelHighReached", "Full")
        .action("closeINValve", |c, _| c.driver.close_in_valve())
        .action("notifyFilled", |c, _| c.notify_filled())
        .done()
        .transition("Filling", "mark_full", "Full")
        .action("closeINValve", |c, _| c.driver.close_in_valve())
        .action("notifyFilled", |c, _| c.notify_filled())
        .done()
        .transition("Full", "empty", "Emptying")
        .action("openOUTValve", |c, _| c.driver.open_out_valve())
        .done()
        .transition("Emptying", "levelLowCleared", "Empty")
        .action("closeOUTValve", |c, _| c.driver.close_out_valve())
        .action("notifyEmptied", |c, _| c.notify_emptied())
        .done()
        .transition("Emptying", "mark_empty", "Empty")
        .action("closeOUTValve", |c, _| c.driver.close_out_valve())
        .action("notifyEmptied", |c, _| c.notify_emptied())
        .done()
        .build()
        .expect("silo statechart definition is well-formed")
}

/// The schedulable silo controller instance.
pub struct SiloControllerFb {
    silo: SiloId,
    def: Rc<StatechartDef<SiloCtx>>,
    machine: Option<Machine<SiloCtx>>,
    ctx: SiloCtx,
}

impl SiloControllerFb {
    /// `notify` is the proxy toward the process controller subscribed to
    /// this silo's completion events, when there is one.
    pub fn new(silo: SiloId, notify: Option<NotificationProxy>) -> SiloControllerFb {
        SiloControllerFb {
            silo,
            def: Rc::new(silo_statechart()),
            machine: None,
            ctx: SiloCtx {
                e: false,
                f: false,
                driver: SiloDriver::new(silo),
                notify,
                out: Outbox::default(),
            },
        }
    }

    fn flush(&mut self, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        for cmd in self.ctx.driver.take_commands() {
            sc.command(cmd);
        }
        for (target, op) in self.ctx.out.pending.drain(..) {
            sc.send(&target, op)?;
        }
        Ok(())
    }

    fn dispatch(&mut self, event: &Event, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        let machine = self.machine.as_mut().expect("initialized before dispatch");
        dispatch_traced(machine, event, &mut self.ctx, sc)?;
        self.flush(sc)
    }
}

fn event_for_request(op: &Operation) -> Event {
    match op {
        Operation::Fill => Event::new("fill"),
        Operation::Empty => Event::new("empty"),
        Operation::MarkFull => Event::new("mark_full"),
        Operation::MarkEmpty => Event::new("mark_empty"),
        // A notification landing on a silo has no transition anywhere; it
        // will be traced as ignored.
        other => Event::new(&other.to_string()),
    }
}

fn event_for_notice(notice: &DriverNotice) -> Event {
    match notice {
        DriverNotice::LevelHighReached => Event::new("levelHighReached"),
        DriverNotice::LevelLowCleared => Event::new("levelLowCleared"),
        DriverNotice::TemperatureReached(t) => {
            Event::with_payload("temperatureReached", fmt_float(*t))
        }
    }
}

impl FbLogic for SiloControllerFb {
    fn scan(&mut self, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        self.ctx.e = sc.sensors.e(self.silo);
        self.ctx.f = sc.sensors.f(self.silo);

        if self.machine.is_none() {
            let (machine, steps) =
                Machine::init(self.def.clone(), &mut self.ctx).map_err(|source| {
                    RuntimeError::Livelock {
                        instance: sc.instance.to_string(),
                        tick: sc.tick,
                        source,
                    }
                })?;
            for s in &steps {
                sc.emit(RecordKind::State, format!("{}->{}", s.from, s.to));
            }
            self.machine = Some(machine);
            self.flush(sc)?;
        }

        for msg in std::mem::take(&mut sc.inbox) {
            if msg.operation == Operation::Status {
                let state = self
                    .machine
                    .as_ref()
                    .map(|m| m.current().to_string())
                    .unwrap_or_default();
                sc.emit(RecordKind::Evt, "status dispatched".to_string());
                self.ctx.out.push(&msg.sender, Operation::StatusIs(state));
                self.flush(sc)?;
                continue;
            }
            let event = event_for_request(&msg.operation);
            self.dispatch(&event, sc)?;
        }

        let notices = self.ctx.driver.observe(sc.sensors);
        for notice in notices {
            let event = event_for_notice(&notice);
            self.dispatch(&event, sc)?;
        }
        Ok(())
    }

    fn state_name(&self) -> Option<&str> {
        self.machine.as_ref().map(|m| m.current())
    }
}
