//! Priority-ordered scan-cycle executor.
//!
//! A program is a set of function-block instances, each with a unique
//! priority. Every scan: the sensors are snapshotted once, every instance
//! runs in ascending priority against that same snapshot, the collected
//! actuator commands are applied as an output image (last writer wins), and
//! the plant advances one step. One scan equals one plant tick.
//!
//! Instances never block; anything that waits across scans is encoded in
//! machine state. Given the same program, plant and configuration, two runs
//! produce identical traces byte for byte.

use std::fmt;

use crate::bus::{Bus, BusError, Operation, ServiceMessage};
use crate::plant::{Actuator, PlantError, SiloId};
use crate::statechart::LivelockDetected;
use crate::trace::{RecordKind, Trace};
use crate::{Plant, PlantConfig, SensorReadings};

/// One actuator write, expressed with the driver's command vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Command {
    pub silo: SiloId,
    pub actuator: Actuator,
    pub on: bool,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = match (self.actuator, self.on) {
            (Actuator::InValve, true) => "openINValve",
            (Actuator::InValve, false) => "closeINValve",
            (Actuator::OutValve, true) => "openOUTValve",
            (Actuator::OutValve, false) => "closeOUTValve",
            (Actuator::Mixer, true) => "startMixer",
            (Actuator::Mixer, false) => "stopMixer",
            (Actuator::Heater, true) => "startHeater",
            (Actuator::Heater, false) => "stopHeater",
        };
        write!(f, "{} {}", verb, self.silo)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("tick limit of {0} scans exceeded")]
    TickLimitExceeded(u64),
    #[error("instance `{instance}` at tick {tick}: {source}")]
    Livelock {
        instance: String,
        tick: u64,
        source: LivelockDetected,
    },
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("command rejected: {0}")]
    BadCommand(#[from] PlantError),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("priority {0} already taken")]
    DuplicatePriority(u32),
    #[error("instance id `{0}` already taken")]
    DuplicateId(String),
}

/// Everything an instance can see and do during its slot of one scan.
pub struct ScanCtx<'a> {
    pub tick: u64,
    pub instance: &'a str,
    pub sensors: &'a SensorReadings,
    /// Messages due this scan, already in deterministic delivery order.
    pub inbox: Vec<ServiceMessage>,
    trace: &'a mut Trace,
    pending: &'a mut Vec<Command>,
    bus: &'a Bus,
    record_msgs: bool,
}

impl ScanCtx<'_> {
    /// Issues an actuator command: traced immediately, applied after every
    /// instance has run.
    pub fn command(&mut self, cmd: Command) {
        self.trace
            .push(self.tick, self.instance, RecordKind::Act, cmd.to_string());
        self.pending.push(cmd);
    }

    /// Sends an operation to another endpoint through the bus.
    pub fn send(&mut self, target: &str, op: Operation) -> Result<(), BusError> {
        let msg = self.bus.send(self.instance, target, op, self.tick)?;
        if self.record_msgs {
            self.trace
                .push(self.tick, "bus", RecordKind::Msg, msg.trace_detail());
        }
        Ok(())
    }

    /// Emits a trace record attributed to this instance.
    pub fn emit(&mut self, kind: RecordKind, detail: String) {
        self.trace.push(self.tick, self.instance, kind, detail);
    }
}

/// Behavior invoked once per scan: read inputs, dispatch machines, write
/// commands.
pub trait FbLogic {
    fn scan(&mut self, ctx: &mut ScanCtx) -> Result<(), RuntimeError>;

    /// Machine state for stop predicates and diagnostics, when there is one.
    fn state_name(&self) -> Option<&str> {
        None
    }
}

/// A schedulable function-block instance.
pub struct FbInstance {
    pub id: String,
    pub priority: u32,
    pub logic: Box<dyn FbLogic>,
}

/// The PLC program: instances kept in strictly ascending priority.
#[derive(Default)]
pub struct Program {
    instances: Vec<FbInstance>,
}

impl Program {
    pub fn new() -> Program {
        Program::default()
    }

    pub fn add_instance(&mut self, instance: FbInstance) -> Result<(), ProgramError> {
        if self.instances.iter().any(|i| i.priority == instance.priority) {
            return Err(ProgramError::DuplicatePriority(instance.priority));
        }
        if self.instances.iter().any(|i| i.id == instance.id) {
            return Err(ProgramError::DuplicateId(instance.id.clone()));
        }
        self.instances.push(instance);
        self.instances.sort_by_key(|i| i.priority);
        Ok(())
    }

    pub fn remove_instance(&mut self, id: &str) -> Option<FbInstance> {
        let idx = self.instances.iter().position(|i| i.id == id)?;
        Some(self.instances.remove(idx))
    }

    /// Instance ids in execution order.
    pub fn execution_order(&self) -> Vec<&str> {
        self.instances.iter().map(|i| i.id.as_str()).collect()
    }

    pub fn instance_state(&self, id: &str) -> Option<&str> {
        self.instances
            .iter()
            .find(|i| i.id == id)
            .and_then(|i| i.logic.state_name())
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Owns the program, the plant and the bus, and advances them in lockstep.
pub struct Runtime {
    program: Program,
    plant: Plant,
    cfg: PlantConfig,
    bus: Bus,
    trace: Trace,
    scan_count: u64,
    record_msgs: bool,
}

impl Runtime {
    pub fn new(program: Program, plant: Plant, cfg: PlantConfig, bus: Bus, record_msgs: bool) -> Runtime {
        // Every instance is an endpoint; scenario assembly may have
        // registered some already (proxies need them before the program
        // exists).
        for inst in &program.instances {
            if !bus.is_registered(&inst.id) {
                bus.register(&inst.id, inst.priority)
                    .expect("fresh endpoint registration");
            }
        }
        Runtime {
            program,
            plant,
            cfg,
            bus,
            trace: Trace::default(),
            scan_count: 0,
            record_msgs,
        }
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn scan_count(&self) -> u64 {
        self.scan_count
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn trace_mut(&mut self) -> &mut Trace {
        &mut self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Runs one scan: snapshot, execute instances by priority, apply the
    /// output image, step the plant.
    pub fn run_scan(&mut self) -> Result<(), RuntimeError> {
        let tick = self.scan_count;
        let readings = self.plant.read_sensors(&self.cfg);
        let mut pending: Vec<Command> = Vec::new();

        for inst in &mut self.program.instances {
            let inbox = self.bus.poll(&inst.id, tick)?;
            let mut ctx = ScanCtx {
                tick,
                instance: &inst.id,
                sensors: &readings,
                inbox,
                trace: &mut self.trace,
                pending: &mut pending,
                bus: &self.bus,
                record_msgs: self.record_msgs,
            };
            inst.logic.scan(&mut ctx)?;
        }

        for cmd in pending {
            self.plant.set_actuator(cmd.silo, cmd.actuator, cmd.on)?;
        }

        for fault in self.plant.step(&self.cfg, tick) {
            self.trace
                .push(tick, "plant", RecordKind::Fault, fault.to_string());
        }

        self.scan_count += 1;
        Ok(())
    }

    /// Repeats `run_scan` until the predicate holds or `max_ticks` scans
    /// have run. On tick exhaustion the partial trace stays available on the
    /// runtime.
    pub fn run_until(
        &mut self,
        stop: impl Fn(&Runtime) -> bool,
        max_ticks: u64,
    ) -> Result<(), RuntimeError> {
        loop {
            if stop(self) {
                return Ok(());
            }
            if self.scan_count >= max_ticks {
                return Err(RuntimeError::TickLimitExceeded(max_ticks));
            }
            self.run_scan()?;
        }
    }
}
