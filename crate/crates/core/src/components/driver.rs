//! The silo driver: proxy of the physical silo in the software domain.
//!
//! The driver owns the raw command surface (valves, mixer, heater) and turns
//! level/temperature readings into edge-triggered notifications for its
//! controller: each crossing is reported exactly once, derived from two
//! consecutive sensor snapshots.

use crate::plant::{Actuator, SiloId};
use crate::runtime::Command;
use crate::SensorReadings;

/// Callbacks the driver raises toward its controller.
#[derive(Clone, Debug, PartialEq)]
pub enum DriverNotice {
    /// F_i went false -> true.
    LevelHighReached,
    /// E_i went true -> false.
    LevelLowCleared,
    /// An armed temperature watch crossed its threshold (upward).
    TemperatureReached(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Snapshot {
    e: bool,
    f: bool,
    t: Option<f64>,
}

pub struct SiloDriver {
    silo: SiloId,
    prev: Option<Snapshot>,
    temp_watch: Option<f64>,
    pending: Vec<Command>,
}

impl SiloDriver {
    pub fn new(silo: SiloId) -> SiloDriver {
        SiloDriver {
            silo,
            prev: None,
            temp_watch: None,
            pending: Vec::new(),
        }
    }

    pub fn silo(&self) -> SiloId {
        self.silo
    }

    /// Arms a one-shot temperature watch; the next upward crossing raises
    /// `TemperatureReached` and disarms.
    pub fn watch_temperature(&mut self, threshold: f64) {
        self.temp_watch = Some(threshold);
    }

    /// Feeds this scan's snapshot to the driver and returns the edges since
    /// the previous scan. The first observation never produces an edge; the
    /// standing plant condition is the controller's initial-state problem.
    pub fn observe(&mut self, readings: &SensorReadings) -> Vec<DriverNotice> {
        let cur = Snapshot {
            e: readings.e(self.silo),
            f: readings.f(self.silo),
            t: readings.temperature(self.silo),
        };
        let mut notices = Vec::new();
        if let Some(prev) = self.prev {
            if !prev.f && cur.f {
                notices.push(DriverNotice::LevelHighReached);
            }
            if prev.e && !cur.e {
                notices.push(DriverNotice::LevelLowCleared);
            }
            if let (Some(threshold), Some(pt), Some(ct)) = (self.temp_watch, prev.t, cur.t) {
                if pt < threshold && ct >= threshold {
                    self.temp_watch = None;
                    notices.push(DriverNotice::TemperatureReached(threshold));
                }
            }
        }
        self.prev = Some(cur);
        notices
    }

    fn push(&mut self, actuator: Actuator, on: bool) {
        self.pending.push(Command {
            silo: self.silo,
            actuator,
            on,
        });
    }

    pub fn open_in_valve(&mut self) {
        self.push(Actuator::InValve, true);
    }

    pub fn close_in_valve(&mut self) {
        self.push(Actuator::InValve, false);
    }

    pub fn open_out_valve(&mut self) {
        self.push(Actuator::OutValve, true);
    }

    pub fn close_out_valve(&mut self) {
        self.push(Actuator::OutValve, false);
    }

    pub fn start_mixer(&mut self) {
        self.push(Actuator::Mixer, true);
    }

    pub fn stop_mixer(&mut self) {
        self.push(Actuator::Mixer, false);
    }

    pub fn start_heater(&mut self) {
        self.push(Actuator::Heater, true);
    }

    pub fn stop_heater(&mut self) {
        self.push(Actuator::Heater, false);
    }

    /// Hands the queued commands to the caller in issue order.
    pub fn take_commands(&mut self) -> Vec<Command> {
        std::mem::take(&mut self.pending)
    }
}
