//! The DFB/OFB silo decomposition, for comparison with the controller-class
//! design.
//!
//! A SILO device block owns the field access: valve commands, sensor edges
//! and the status fields. FILLING and EMPTYING operation blocks each hold a
//! link to their device block and implement one working cycle (open the
//! valve, watch the sensor, close and report). The silo's dynamics end up
//! spread across the three blocks, but the externally visible behavior —
//! command timing, accept/ignore decisions, completion notifications — is
//! exactly that of the single controller object, which is what the strategy
//! comparison measures.

use std::cell::RefCell;
use std::rc::Rc;

use crate::bus::{NotificationProxy, Operation, Outbox};
use crate::components::driver::{DriverNotice, SiloDriver};
use crate::plant::SiloId;
use crate::runtime::{FbLogic, RuntimeError, ScanCtx};
use crate::trace::RecordKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cycle {
    Filling,
    Emptying,
}

/// The SILO device block: field-signal access plus the silo status fields
/// the operation blocks share.
pub struct SiloDfb {
    driver: SiloDriver,
    is_full: bool,
    busy: Option<Cycle>,
}

impl SiloDfb {
    pub fn new(silo: SiloId) -> SiloDfb {
        SiloDfb {
            driver: SiloDriver::new(silo),
            is_full: false,
            busy: None,
        }
    }

    pub fn silo(&self) -> SiloId {
        self.driver.silo()
    }

    /// Status in the controller vocabulary, for status queries and stop
    /// predicates.
    pub fn state_name(&self) -> &'static str {
        match (self.busy, self.is_full) {
            (Some(Cycle::Filling), _) => "Filling",
            (Some(Cycle::Emptying), _) => "Emptying",
            (None, true) => "Full",
            (None, false) => "Empty",
        }
    }
}

/// The FILLING operation block: one silo-filling working cycle, acting only
/// through its linked device block.
pub struct FillingOfb {
    dfb: Rc<RefCell<SiloDfb>>,
}

impl FillingOfb {
    pub fn new(dfb: Rc<RefCell<SiloDfb>>) -> FillingOfb {
        FillingOfb { dfb }
    }

    /// Starts the cycle when the silo is empty and idle.
    pub fn start(&self) -> bool {
        let mut d = self.dfb.borrow_mut();
        if d.is_full || d.busy.is_some() {
            return false;
        }
        d.busy = Some(Cycle::Filling);
        d.driver.open_in_valve();
        true
    }

    /// Completes the cycle on the high-level edge.
    pub fn poll(&self, notices: &[DriverNotice]) -> bool {
        let mut d = self.dfb.borrow_mut();
        if d.busy != Some(Cycle::Filling)
            || !notices.contains(&DriverNotice::LevelHighReached)
        {
            return false;
        }
        d.driver.close_in_valve();
        d.busy = None;
        d.is_full = true;
        true
    }

    /// Force-completion for the transfer handshake (the local sensor never
    /// trips when the source ran out first).
    pub fn force_complete(&self) -> bool {
        let mut d = self.dfb.borrow_mut();
        if d.busy != Some(Cycle::Filling) {
            return false;
        }
        d.driver.close_in_valve();
        d.busy = None;
        d.is_full = true;
        true
    }
}

/// The EMPTYING operation block, mirroring FILLING on the out valve and the
/// low-level sensor.
pub struct EmptyingOfb {
    dfb: Rc<RefCell<SiloDfb>>,
}

impl EmptyingOfb {
    pub fn new(dfb: Rc<RefCell<SiloDfb>>) -> EmptyingOfb {
        EmptyingOfb { dfb }
    }

    pub fn start(&self) -> bool {
        let mut d = self.dfb.borrow_mut();
        if !d.is_full || d.busy.is_some() {
            return false;
        }
        d.busy = Some(Cycle::Emptying);
        d.driver.open_out_valve();
        true
    }

    pub fn poll(&self, notices: &[DriverNotice]) -> bool {
        let mut d = self.dfb.borrow_mut();
        if d.busy != Some(Cycle::Emptying)
            || !notices.contains(&DriverNotice::LevelLowCleared)
        {
            return false;
        }
        d.driver.close_out_valve();
        d.busy = None;
        d.is_full = false;
        true
    }

    pub fn force_complete(&self) -> bool {
        let mut d = self.dfb.borrow_mut();
        if d.busy != Some(Cycle::Emptying) {
            return false;
        }
        d.driver.close_out_valve();
        d.busy = None;
        d.is_full = false;
        true
    }
}

/// The schedulable OFB-style silo: SILO device block plus the two operation
/// blocks, answering the same request surface as the controller variant.
pub struct OfbSiloFb {
    silo: SiloId,
    dfb: Rc<RefCell<SiloDfb>>,
    filling: FillingOfb,
    emptying: EmptyingOfb,
    notify: Option<NotificationProxy>,
    out: Outbox,
    inited: bool,
}

impl OfbSiloFb {
    pub fn new(silo: SiloId, notify: Option<NotificationProxy>) -> OfbSiloFb {
        let dfb = Rc::new(RefCell::new(SiloDfb::new(silo)));
        OfbSiloFb {
            silo,
            filling: FillingOfb::new(dfb.clone()),
            emptying: EmptyingOfb::new(dfb.clone()),
            dfb,
            notify,
            out: Outbox::default(),
            inited: false,
        }
    }

    fn notify_filled(&mut self) {
        if let Some(n) = &self.notify {
            n.filled(self.silo, &mut self.out);
        }
    }

    fn notify_emptied(&mut self) {
        if let Some(n) = &self.notify {
            n.emptied(self.silo, &mut self.out);
        }
    }

    fn flush(&mut self, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        for cmd in self.dfb.borrow_mut().driver.take_commands() {
            sc.command(cmd);
        }
        for (target, op) in self.out.pending.drain(..) {
            sc.send(&target, op)?;
        }
        Ok(())
    }

    fn trace_request(sc: &mut ScanCtx, op: &Operation, accepted: bool) {
        let verdict = if accepted { "dispatched" } else { "ignored" };
        sc.emit(RecordKind::Evt, format!("{op} {verdict}"));
    }
}

impl FbLogic for OfbSiloFb {
    fn scan(&mut self, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        if !self.inited {
            // Same initial-status rule as the controller variant: liquid
            // above the low-level sensor counts as full.
            self.dfb.borrow_mut().is_full = sc.sensors.e(self.silo);
            self.inited = true;
        }

        for msg in std::mem::take(&mut sc.inbox) {
            match &msg.operation {
                Operation::Fill => {
                    let ok = self.filling.start();
                    Self::trace_request(sc, &msg.operation, ok);
                }
                Operation::Empty => {
                    let ok = self.emptying.start();
                    Self::trace_request(sc, &msg.operation, ok);
                }
                Operation::MarkFull => {
                    let ok = self.filling.force_complete();
                    Self::trace_request(sc, &msg.operation, ok);
                    if ok {
                        self.notify_filled();
                    }
                }
                Operation::MarkEmpty => {
                    let ok = self.emptying.force_complete();
                    Self::trace_request(sc, &msg.operation, ok);
                    if ok {
                        self.notify_emptied();
                    }
                }
                Operation::Status => {
                    sc.emit(RecordKind::Evt, "status dispatched".to_string());
                    let state = self.dfb.borrow().state_name().to_string();
                    self.out.push(&msg.sender, Operation::StatusIs(state));
                }
                other => {
                    sc.emit(RecordKind::Evt, format!("{other} ignored"));
                }
            }
            self.flush(sc)?;
        }

        let notices = self.dfb.borrow_mut().driver.observe(sc.sensors);
        for notice in &notices {
            match notice {
                DriverNotice::LevelHighReached => {
                    let done = self.filling.poll(&notices);
                    let verdict = if done { "dispatched" } else { "ignored" };
                    sc.emit(RecordKind::Evt, format!("levelHighReached {verdict}"));
                    if done {
                        self.notify_filled();
                    }
                }
                DriverNotice::LevelLowCleared => {
                    let done = self.emptying.poll(&notices);
                    let verdict = if done { "dispatched" } else { "ignored" };
                    sc.emit(RecordKind::Evt, format!("levelLowCleared {verdict}"));
                    if done {
                        self.notify_emptied();
                    }
                }
                DriverNotice::TemperatureReached(_) => {}
            }
            self.flush(sc)?;
        }
        Ok(())
    }

    fn state_name(&self) -> Option<&str> {
        if !self.inited {
            return None;
        }
        Some(self.dfb.borrow().state_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{make_remote_pair, Bus};
    use crate::components::silo::SiloControllerFb;
    use crate::plant::{Plant, PlantConfig, S1};
    use crate::runtime::{FbInstance, Program, Runtime};
    use crate::trace::TraceRecord;

    fn cfg() -> PlantConfig<f64> {
        PlantConfig {
            dt: 0.1,
            fill_rate: 10.0,
            pipe_rate: 10.0,
            drain_rate: 10.0,
            heat_rate: 2.0,
            ambient_temp: 20.0,
            e_threshold: 2.0,
            f_threshold: 95.0,
            capacity: 100.0,
        }
    }

    fn harness(ofb: bool) -> Runtime {
        let bus = Bus::new(0);
        bus.register("test", 0).unwrap();
        bus.register("Silo1", 1).unwrap();
        let (_, notify) = make_remote_pair(&bus, "Silo1", "test").unwrap();
        let logic: Box<dyn FbLogic> = if ofb {
            Box::new(OfbSiloFb::new(S1, Some(notify)))
        } else {
            Box::new(SiloControllerFb::new(S1, Some(notify)))
        };
        let mut program = Program::new();
        program
            .add_instance(FbInstance {
                id: "Silo1".into(),
                priority: 1,
                logic,
            })
            .unwrap();
        let c = cfg();
        Runtime::new(program, Plant::new(&c), c, bus, false)
    }

    /// Runs the same request script against both variants and returns the
    /// ACT records of each.
    fn act_records(ofb: bool, script: &[(u64, Operation)]) -> Vec<TraceRecord> {
        let mut rt = harness(ofb);
        for _ in 0..120 {
            for (tick, op) in script {
                if *tick == rt.scan_count() {
                    rt.bus().send("test", "Silo1", op.clone(), *tick).unwrap();
                }
            }
            rt.run_scan().unwrap();
        }
        rt.trace()
            .filtered(&[RecordKind::Act])
            .into_iter()
            .cloned()
            .collect()
    }

    #[test]
    fn single_fill_matches_controller_variant_exactly() {
        let script = [(0u64, Operation::Fill)];
        let cp = act_records(false, &script);
        let ofb = act_records(true, &script);
        assert_eq!(cp, ofb);
        assert_eq!(cp.len(), 2);
        assert_eq!(cp[0].tick, 0);
        assert_eq!(cp[0].detail, "openINValve S1");
        assert_eq!(cp[1].tick, 95);
        assert_eq!(cp[1].detail, "closeINValve S1");
    }

    #[test]
    fn fill_while_filling_is_ignored_like_controller() {
        let script = [(0u64, Operation::Fill), (5, Operation::Fill)];
        let cp = act_records(false, &script);
        let ofb = act_records(true, &script);
        assert_eq!(cp, ofb);
        assert_eq!(cp.len(), 2);
    }

    #[test]
    fn mark_full_mid_fill_matches_controller() {
        let script = [(0u64, Operation::Fill), (10, Operation::MarkFull)];
        let cp = act_records(false, &script);
        let ofb = act_records(true, &script);
        assert_eq!(cp, ofb);
        assert_eq!(cp[1].tick, 10);
        assert_eq!(cp[1].detail, "closeINValve S1");
    }

    #[test]
    fn completion_notifications_match() {
        let mut rt = harness(true);
        rt.bus().send("test", "Silo1", Operation::Fill, 0).unwrap();
        rt.run_until(
            |rt| rt.program().instance_state("Silo1") == Some("Full"),
            500,
        )
        .unwrap();
        let due = rt.bus().poll("test", rt.scan_count()).unwrap();
        assert_eq!(due.len(), 1);
        assert_eq!(due[0].operation, Operation::Filled(S1));
    }

    #[test]
    fn status_reports_derived_state() {
        let mut rt = harness(true);
        rt.run_scan().unwrap();
        rt.bus().send("test", "Silo1", Operation::Status, 1).unwrap();
        rt.run_scan().unwrap();
        let due = rt.bus().poll("test", rt.scan_count()).unwrap();
        assert_eq!(due[0].operation, Operation::StatusIs("Empty".into()));
    }
}
