//! Discrete-time physics of the four-silo plant.
//!
//! Silos 1 and 2 are filled from the raw-liquid supply, silos 3 and 4 drain
//! to the product outlet, and a single shared pipe connects silo 1 to silo 4
//! and silo 2 to silo 3. Each silo has low/high level sensors; silos 2 and 4
//! carry a heater and temperature sensor, silos 3 and 4 a mixer.
//!
//! All quantities are generic over a floating-point scalar. The crate root
//! pins `f64` aliases for the shipped simulator.

use std::fmt;

use num_traits::Float;

/// Index of one of the four silos.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiloId(u8);

pub const S1: SiloId = SiloId(1);
pub const S2: SiloId = SiloId(2);
pub const S3: SiloId = SiloId(3);
pub const S4: SiloId = SiloId(4);

pub const ALL_SILOS: [SiloId; 4] = [S1, S2, S3, S4];

impl SiloId {
    pub fn new(n: u8) -> Option<SiloId> {
        (1..=4).contains(&n).then_some(SiloId(n))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    /// Zero-based array index of this silo.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn has_mixer(self) -> bool {
        self.0 == 3 || self.0 == 4
    }

    pub fn has_heater(self) -> bool {
        self.0 == 2 || self.0 == 4
    }
}

impl fmt::Display for SiloId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

/// One actuator on a silo. Mixers exist only on silos 3 and 4, heaters only
/// on silos 2 and 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Actuator {
    InValve,
    OutValve,
    Mixer,
    Heater,
}

/// Continuous physical state of one silo.
#[derive(Clone, Debug, PartialEq)]
pub struct SiloState<S> {
    pub id: SiloId,
    pub level: S,
    pub temperature: S,
    pub in_valve: bool,
    pub out_valve: bool,
    pub mixer_on: bool,
    pub heater_on: bool,
    pub capacity: S,
}

/// Rates, thresholds and the scan period of the plant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantConfig<S> {
    /// Seconds of physical time per scan.
    pub dt: S,
    /// L/s from the raw supply into silos 1 and 2.
    pub fill_rate: S,
    /// L/s through the shared pipe.
    pub pipe_rate: S,
    /// L/s from silos 3 and 4 to the product outlet.
    pub drain_rate: S,
    /// Degrees C per second while a heater runs.
    pub heat_rate: S,
    /// Initial liquid temperature.
    pub ambient_temp: S,
    /// Low-level sensor: E_i is true iff level > e_threshold.
    pub e_threshold: S,
    /// High-level sensor: F_i is true iff level >= f_threshold.
    pub f_threshold: S,
    pub capacity: S,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlantError {
    #[error("invalid plant config: {0}")]
    InvalidConfig(String),
    #[error("silo {silo} has no {actuator:?}")]
    NoSuchActuator { silo: SiloId, actuator: Actuator },
}

impl<S: Float> PlantConfig<S> {
    /// Rejects non-positive dt/rates and threshold orderings that would make
    /// the sensors meaningless (requires 0 < e < f <= capacity).
    pub fn validate(&self) -> Result<(), PlantError> {
        // `positive` rejects NaN along with zero and negatives.
        let positive = |v: S| v > S::zero();
        if !positive(self.dt) {
            return Err(PlantError::InvalidConfig("dt must be > 0".into()));
        }
        for (name, v) in [
            ("fill_rate", self.fill_rate),
            ("pipe_rate", self.pipe_rate),
            ("drain_rate", self.drain_rate),
            ("heat_rate", self.heat_rate),
        ] {
            if !positive(v) {
                return Err(PlantError::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        let ordered = positive(self.e_threshold)
            && self.e_threshold < self.f_threshold
            && self.f_threshold <= self.capacity;
        if !ordered {
            return Err(PlantError::InvalidConfig(
                "thresholds must satisfy 0 < e < f <= capacity".into(),
            ));
        }
        Ok(())
    }
}

/// Boolean level sensors plus the temperature probes of silos 2 and 4,
/// captured once per scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorReadings<S> {
    e: [bool; 4],
    f: [bool; 4],
    t: [Option<S>; 4],
}

impl<S: Copy> SensorReadings<S> {
    /// Low-level sensor E_i: level above the heel threshold.
    pub fn e(&self, silo: SiloId) -> bool {
        self.e[silo.index()]
    }

    /// High-level sensor F_i: level at or above the full threshold.
    pub fn f(&self, silo: SiloId) -> bool {
        self.f[silo.index()]
    }

    /// Temperature T_i, present only for silos 2 and 4.
    pub fn temperature(&self, silo: SiloId) -> Option<S> {
        self.t[silo.index()]
    }
}

/// One pipe use detected from the valve image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// No source/destination valve pair is open.
    None,
    /// Exactly one transfer route is open (source, destination).
    Transfer(SiloId, SiloId),
    /// Both routes are open at once; the pipe moves nothing.
    Conflict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlantFaultKind {
    PipeConflict,
    Overflow,
    PowerViolation,
}

impl fmt::Display for PlantFaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PlantFaultKind::PipeConflict => "PipeConflict",
            PlantFaultKind::Overflow => "Overflow",
            PlantFaultKind::PowerViolation => "PowerViolation",
        };
        f.write_str(s)
    }
}

/// A physical constraint violation observed during a step. Faults are data:
/// the plant keeps running so the checker can see what the controllers did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlantFault {
    pub kind: PlantFaultKind,
    pub tick: u64,
    pub silos: Vec<SiloId>,
}

impl fmt::Display for PlantFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.kind)?;
        for (i, s) in self.silos.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// The whole physical plant: four silos and the shared pipe.
#[derive(Clone, Debug, PartialEq)]
pub struct Plant<S> {
    silos: [SiloState<S>; 4],
}

impl<S: Float> Plant<S> {
    /// All silos empty, at ambient temperature, with every actuator off.
    pub fn new(cfg: &PlantConfig<S>) -> Plant<S> {
        let silo = |id: SiloId| SiloState {
            id,
            level: S::zero(),
            temperature: cfg.ambient_temp,
            in_valve: false,
            out_valve: false,
            mixer_on: false,
            heater_on: false,
            capacity: cfg.capacity,
        };
        Plant {
            silos: [silo(S1), silo(S2), silo(S3), silo(S4)],
        }
    }

    pub fn silo(&self, id: SiloId) -> &SiloState<S> {
        &self.silos[id.index()]
    }

    pub fn silo_mut(&mut self, id: SiloId) -> &mut SiloState<S> {
        &mut self.silos[id.index()]
    }

    pub fn silos(&self) -> &[SiloState<S>; 4] {
        &self.silos
    }

    /// Sets one actuator. Idempotent; rejects actuators the silo does not
    /// carry (mixer on silos 1/2, heater on silos 1/3).
    pub fn set_actuator(
        &mut self,
        silo: SiloId,
        actuator: Actuator,
        on: bool,
    ) -> Result<(), PlantError> {
        match actuator {
            Actuator::Mixer if !silo.has_mixer() => {
                return Err(PlantError::NoSuchActuator { silo, actuator })
            }
            Actuator::Heater if !silo.has_heater() => {
                return Err(PlantError::NoSuchActuator { silo, actuator })
            }
            _ => {}
        }
        let s = self.silo_mut(silo);
        match actuator {
            Actuator::InValve => s.in_valve = on,
            Actuator::OutValve => s.out_valve = on,
            Actuator::Mixer => s.mixer_on = on,
            Actuator::Heater => s.heater_on = on,
        }
        Ok(())
    }

    /// Pure function of the current valve image: which pipe route is open.
    pub fn active_route(&self) -> Route {
        let a = self.silo(S1).out_valve && self.silo(S4).in_valve;
        let b = self.silo(S2).out_valve && self.silo(S3).in_valve;
        match (a, b) {
            (true, true) => Route::Conflict,
            (true, false) => Route::Transfer(S1, S4),
            (false, true) => Route::Transfer(S2, S3),
            (false, false) => Route::None,
        }
    }

    /// Evaluates the level and temperature sensors against the thresholds.
    pub fn read_sensors(&self, cfg: &PlantConfig<S>) -> SensorReadings<S> {
        let mut r = SensorReadings {
            e: [false; 4],
            f: [false; 4],
            t: [None; 4],
        };
        for silo in ALL_SILOS {
            let s = self.silo(silo);
            r.e[silo.index()] = s.level > cfg.e_threshold;
            r.f[silo.index()] = s.level >= cfg.f_threshold;
            if silo.has_heater() {
                r.t[silo.index()] = Some(s.temperature);
            }
        }
        r
    }

    /// Advances the plant by one tick of `cfg.dt` seconds.
    ///
    /// Flows are applied in a fixed order: supply fill into silos 1/2, pipe
    /// transfer, drain from silos 3/4, then heating. An open pair of
    /// conflicting route valves moves no pipe liquid and reports
    /// `PipeConflict`; filling past capacity clamps and reports `Overflow`;
    /// both mixers running reports `PowerViolation` (the mixers keep
    /// running — prevention is the controllers' job).
    pub fn step(&mut self, cfg: &PlantConfig<S>, tick: u64) -> Vec<PlantFault> {
        let mut faults = Vec::new();

        // Supply fill.
        for silo in [S1, S2] {
            if self.silo(silo).in_valve {
                let cap = self.silo(silo).capacity;
                let s = self.silo_mut(silo);
                s.level = s.level + cfg.fill_rate * cfg.dt;
                if s.level > cap {
                    s.level = cap;
                    faults.push(PlantFault {
                        kind: PlantFaultKind::Overflow,
                        tick,
                        silos: vec![silo],
                    });
                }
            }
        }

        // Pipe transfer.
        match self.active_route() {
            Route::Conflict => faults.push(PlantFault {
                kind: PlantFaultKind::PipeConflict,
                tick,
                silos: vec![S1, S2, S3, S4],
            }),
            Route::Transfer(src, dst) => {
                let moved = (cfg.pipe_rate * cfg.dt).min(self.silo(src).level);
                let cap = self.silo(dst).capacity;
                self.silo_mut(src).level = self.silo(src).level - moved;
                let d = self.silo_mut(dst);
                d.level = d.level + moved;
                if d.level > cap {
                    d.level = cap;
                    faults.push(PlantFault {
                        kind: PlantFaultKind::Overflow,
                        tick,
                        silos: vec![dst],
                    });
                }
            }
            Route::None => {}
        }

        // Drain to the product outlet.
        for silo in [S3, S4] {
            if self.silo(silo).out_valve {
                let s = self.silo_mut(silo);
                s.level = (s.level - cfg.drain_rate * cfg.dt).max(S::zero());
            }
        }

        // Heating; no cooling when off.
        for silo in [S2, S4] {
            if self.silo(silo).heater_on {
                let s = self.silo_mut(silo);
                s.temperature = s.temperature + cfg.heat_rate * cfg.dt;
            }
        }

        // Power constraint over the mixers.
        if self.silo(S3).mixer_on && self.silo(S4).mixer_on {
            faults.push(PlantFault {
                kind: PlantFaultKind::PowerViolation,
                tick,
                silos: vec![S3, S4],
            });
        }

        faults
    }
}
