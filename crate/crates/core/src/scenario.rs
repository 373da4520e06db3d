//! Scenario configuration, assembly and execution.
//!
//! A scenario is a flat `key = value` file with dotted keys and full-line
//! `#` comments. Every key has a default; the file (and any command-line
//! overrides) only states deviations. The effective configuration is
//! canonicalized and hashed into the trace header, so identical
//! configurations are guaranteed to produce byte-identical trace files.

use std::collections::BTreeMap;
use std::rc::Rc;

use sha2::{Digest, Sha256};

use crate::bus::{make_remote_pair, Bus, CommandProxy, NotificationProxy};
use crate::components::ofb::OfbSiloFb;
use crate::components::process::{ProcessControllerFb, Recipe, RecipeParams};
use crate::components::resource::{make_resource, ResourceVariant};
use crate::components::silo::SiloControllerFb;
use crate::plant::{SiloId, ALL_SILOS};
use crate::runtime::{FbInstance, FbLogic, Program, Runtime, RuntimeError};
use crate::trace::{fmt_float, Trace};
use crate::{Plant, PlantConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Silo behavior as one controller class per silo.
    CpController,
    /// Silo behavior as device block plus operation blocks.
    Ofb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Everything on one PLC; messages route instantly along the scan order.
    Local,
    /// Process controllers deployed remotely: bus traffic is traced and
    /// delayed by the configured latency.
    Distributed,
}

/// Scan priorities per instance. Lower runs earlier; the canonical layout
/// puts the processes before the silos.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Priorities {
    pub process_a: u32,
    pub process_b: u32,
    pub silos: [u32; 4],
}

impl Default for Priorities {
    fn default() -> Priorities {
        Priorities {
            process_a: 1,
            process_b: 2,
            silos: [3, 4, 5, 6],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub plant: PlantConfig,
    pub enabled_a: bool,
    pub enabled_b: bool,
    pub recipe_a: RecipeParams,
    pub recipe_b: RecipeParams,
    pub strategy: Strategy,
    pub resource_variant: ResourceVariant,
    pub mode: Mode,
    pub latency: u64,
    pub priorities: Priorities,
    pub max_ticks: u64,
    pub cycles: u64,
}

impl Default for ScenarioConfig {
    fn default() -> ScenarioConfig {
        ScenarioConfig {
            plant: PlantConfig {
                dt: 0.1,
                fill_rate: 10.0,
                pipe_rate: 10.0,
                drain_rate: 10.0,
                heat_rate: 2.0,
                ambient_temp: 20.0,
                e_threshold: 2.0,
                f_threshold: 95.0,
                capacity: 100.0,
            },
            enabled_a: true,
            enabled_b: true,
            recipe_a: RecipeParams::default_a(),
            recipe_b: RecipeParams::default_b(),
            strategy: Strategy::CpController,
            resource_variant: ResourceVariant::Check,
            mode: Mode::Local,
            latency: 0,
            priorities: Priorities::default(),
            max_ticks: 2000,
            cycles: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ScenarioConfig {
    /// Parses a scenario file on top of the defaults.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            cfg.apply(key.trim(), value.trim(), line)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |k: &str, v: &str| ConfigError::BadValue {
            line,
            key: k.to_string(),
            value: v.to_string(),
        };
        macro_rules! num {
            ($slot:expr) => {
                $slot = value.parse().map_err(|_| bad(key, value))?
            };
        }
        match key {
            "plant.dt" => num!(self.plant.dt),
            "plant.fill_rate" => num!(self.plant.fill_rate),
            "plant.pipe_rate" => num!(self.plant.pipe_rate),
            "plant.drain_rate" => num!(self.plant.drain_rate),
            "plant.heat_rate" => num!(self.plant.heat_rate),
            "plant.ambient_temp" => num!(self.plant.ambient_temp),
            "plant.e_threshold" => num!(self.plant.e_threshold),
            "plant.f_threshold" => num!(self.plant.f_threshold),
            "plant.capacity" => num!(self.plant.capacity),
            "recipes.enabled" => {
                self.enabled_a = false;
                self.enabled_b = false;
                if !value.is_empty() && value != "none" {
                    for part in value.split(',') {
                        match part.trim() {
                            "A" => self.enabled_a = true,
                            "B" => self.enabled_b = true,
                            other => return Err(bad(key, other)),
                        }
                    }
                }
            }
            "recipe.a.process_ticks" => num!(self.recipe_a.process_ticks),
            "recipe.a.heat_target" => num!(self.recipe_a.heat_target),
            "recipe.a.mix_ticks" => num!(self.recipe_a.mix_ticks),
            "recipe.b.process_ticks" => num!(self.recipe_b.process_ticks),
            "recipe.b.heat_target" => num!(self.recipe_b.heat_target),
            "recipe.b.mix_ticks" => num!(self.recipe_b.mix_ticks),
            "strategy" => {
                self.strategy = match value {
                    "cp" => Strategy::CpController,
                    "ofb" => Strategy::Ofb,
                    _ => return Err(bad(key, value)),
                }
            }
            "resource_variant" => {
                self.resource_variant = match value {
                    "check" => ResourceVariant::Check,
                    "monitor" => ResourceVariant::Monitor,
                    _ => return Err(bad(key, value)),
                }
            }
            "mode" => {
                self.mode = match value {
                    "local" => Mode::Local,
                    "distributed" => Mode::Distributed,
                    _ => return Err(bad(key, value)),
                }
            }
            "latency" => num!(self.latency),
            "max_ticks" => num!(self.max_ticks),
            "cycles" => num!(self.cycles),
            "priorities.GenLiqueurA" => num!(self.priorities.process_a),
            "priorities.GenLiqueurB" => num!(self.priorities.process_b),
            "priorities.Silo1" => num!(self.priorities.silos[0]),
            "priorities.Silo2" => num!(self.priorities.silos[1]),
            "priorities.Silo3" => num!(self.priorities.silos[2]),
            "priorities.Silo4" => num!(self.priorities.silos[3]),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.plant
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_ticks == 0 {
            return Err(ConfigError::Invalid("max_ticks must be > 0".into()));
        }
        if self.cycles == 0 {
            return Err(ConfigError::Invalid("cycles must be >= 1".into()));
        }
        if self.mode == Mode::Local && self.latency != 0 {
            return Err(ConfigError::Invalid(
                "latency only applies to distributed mode".into(),
            ));
        }
        let mut prios = vec![
            self.priorities.process_a,
            self.priorities.process_b,
        ];
        prios.extend(self.priorities.silos);
        let mut sorted = prios.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != prios.len() {
            return Err(ConfigError::Invalid("priorities must be unique".into()));
        }
        if self.enabled_a && self.recipe_a.process_ticks == 0 {
            return Err(ConfigError::Invalid(
                "recipe.a.process_ticks must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Every key with its effective value, sorted — the hashed identity of
    /// a run.
    pub fn canonical_string(&self) -> String {
        let f = fmt_float;
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("plant.dt", f(self.plant.dt));
        kv.insert("plant.fill_rate", f(self.plant.fill_rate));
        kv.insert("plant.pipe_rate", f(self.plant.pipe_rate));
        kv.insert("plant.drain_rate", f(self.plant.drain_rate));
        kv.insert("plant.heat_rate", f(self.plant.heat_rate));
        kv.insert("plant.ambient_temp", f(self.plant.ambient_temp));
        kv.insert("plant.e_threshold", f(self.plant.e_threshold));
        kv.insert("plant.f_threshold", f(self.plant.f_threshold));
        kv.insert("plant.capacity", f(self.plant.capacity));
        kv.insert(
            "recipes.enabled",
            match (self.enabled_a, self.enabled_b) {
                (true, true) => "A,B".into(),
                (true, false) => "A".into(),
                (false, true) => "B".into(),
                (false, false) => "none".into(),
            },
        );
        kv.insert(
            "recipe.a.process_ticks",
            self.recipe_a.process_ticks.to_string(),
        );
        kv.insert("recipe.a.heat_target", f(self.recipe_a.heat_target));
        kv.insert("recipe.a.mix_ticks", self.recipe_a.mix_ticks.to_string());
        kv.insert(
            "recipe.b.process_ticks",
            self.recipe_b.process_ticks.to_string(),
        );
        kv.insert("recipe.b.heat_target", f(self.recipe_b.heat_target));
        kv.insert("recipe.b.mix_ticks", self.recipe_b.mix_ticks.to_string());
        kv.insert(
            "strategy",
            match self.strategy {
                Strategy::CpController => "cp".into(),
                Strategy::Ofb => "ofb".into(),
            },
        );
        kv.insert(
            "resource_variant",
            match self.resource_variant {
                ResourceVariant::Check => "check".into(),
                ResourceVariant::Monitor => "monitor".into(),
            },
        );
        kv.insert(
            "mode",
            match self.mode {
                Mode::Local => "local".into(),
                Mode::Distributed => "distributed".into(),
            },
        );
        kv.insert("latency", self.latency.to_string());
        kv.insert("max_ticks", self.max_ticks.to_string());
        kv.insert("cycles", self.cycles.to_string());
        kv.insert("priorities.GenLiqueurA", self.priorities.process_a.to_string());
        kv.insert("priorities.GenLiqueurB", self.priorities.process_b.to_string());
        kv.insert("priorities.Silo1", self.priorities.silos[0].to_string());
        kv.insert("priorities.Silo2", self.priorities.silos[1].to_string());
        kv.insert("priorities.Silo3", self.priorities.silos[2].to_string());
        kv.insert("priorities.Silo4", self.priorities.silos[3].to_string());

        let mut out = String::new();
        for (k, v) in kv {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn silo_instance_id(silo: SiloId) -> String {
    format!("Silo{}", silo.number())
}

struct SiloWiring {
    silo: SiloId,
    priority: u32,
    command: Option<CommandProxy>,
    notify: Option<NotificationProxy>,
}

/// Builds the plant, bus, resources and program an executable scenario
/// needs, fully wired.
pub fn build_runtime(cfg: &ScenarioConfig) -> Result<Runtime, ConfigError> {
    cfg.validate()?;

    let plant = Plant::new(&cfg.plant);
    let latency = match cfg.mode {
        Mode::Local => 0,
        Mode::Distributed => cfg.latency,
    };
    let bus = Bus::new(latency);

    let mut enabled_processes = Vec::new();
    if cfg.enabled_a {
        enabled_processes.push((Recipe::GenLiqueurA, cfg.recipe_a, cfg.priorities.process_a));
    }
    if cfg.enabled_b {
        enabled_processes.push((Recipe::GenLiqueurB, cfg.recipe_b, cfg.priorities.process_b));
    }

    for (recipe, _, priority) in &enabled_processes {
        bus.register(recipe.instance_id(), *priority)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    let mut silo_wiring: Vec<SiloWiring> = ALL_SILOS
        .iter()
        .map(|&silo| SiloWiring {
            silo,
            priority: cfg.priorities.silos[silo.index()],
            command: None,
            notify: None,
        })
        .collect();
    for w in &silo_wiring {
        bus.register(&silo_instance_id(w.silo), w.priority)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }

    // Wire each enabled process to its two silos: the command proxy on the
    // process side, the notification proxy on the silo side.
    let mut process_proxies = Vec::new();
    for (recipe, params, priority) in &enabled_processes {
        let mut pair_for = |silo: SiloId| -> Result<CommandProxy, ConfigError> {
            let (cmd, notify) = make_remote_pair(
                &bus,
                &silo_instance_id(silo),
                recipe.instance_id(),
            )
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            silo_wiring[silo.index()].notify = Some(notify);
            silo_wiring[silo.index()].command = Some(cmd.clone());
            Ok(cmd)
        };
        let src = pair_for(recipe.source())?;
        let dst = pair_for(recipe.destination())?;
        process_proxies.push((*recipe, *params, *priority, src, dst));
    }

    let pipe = make_resource("pipe", cfg.resource_variant);
    let power = make_resource("power", cfg.resource_variant);

    let mut program = Program::new();
    for w in silo_wiring {
        let logic: Box<dyn FbLogic> = match cfg.strategy {
            Strategy::CpController => Box::new(SiloControllerFb::new(w.silo, w.notify)),
            Strategy::Ofb => Box::new(OfbSiloFb::new(w.silo, w.notify)),
        };
        program
            .add_instance(FbInstance {
                id: silo_instance_id(w.silo),
                priority: w.priority,
                logic,
            })
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    for (recipe, params, priority, src, dst) in process_proxies {
        program
            .add_instance(FbInstance {
                id: recipe.instance_id().to_string(),
                priority,
                logic: Box::new(ProcessControllerFb::new(
                    recipe,
                    params,
                    src,
                    dst,
                    Rc::clone(&pipe),
                    Rc::clone(&power),
                    cfg.cycles,
                )),
            })
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }

    Ok(Runtime::new(
        program,
        plant,
        cfg.plant,
        bus,
        cfg.mode == Mode::Distributed,
    ))
}

/// Stop predicate of a scenario run: every enabled recipe is Done.
pub fn recipes_done(rt: &Runtime, cfg: &ScenarioConfig) -> bool {
    let done = |id: &str| rt.program().instance_state(id) == Some("Done");
    (!cfg.enabled_a || done(Recipe::GenLiqueurA.instance_id()))
        && (!cfg.enabled_b || done(Recipe::GenLiqueurB.instance_id()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    /// Every enabled recipe reached Done.
    Completed,
    /// The tick budget ran out first; the trace is still complete up to
    /// that point.
    TickLimit,
}

pub struct ScenarioRun {
    pub outcome: RunOutcome,
    pub ticks: u64,
    pub trace: Trace,
}

/// Runs a scenario to completion (or its tick budget) and returns the trace
/// with the config hash stamped into it.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, RuntimeError> {
    let mut rt = build_runtime(cfg).map_err(|e| RuntimeError::BadCommand(
        // Config errors are caught by the CLI before this point; reaching
        // here with an invalid config is a caller bug surfaced verbatim.
        crate::plant::PlantError::InvalidConfig(e.to_string()),
    ))?;
    let outcome = match rt.run_until(|rt| recipes_done(rt, cfg), cfg.max_ticks) {
        Ok(()) => RunOutcome::Completed,
        Err(RuntimeError::TickLimitExceeded(_)) => RunOutcome::TickLimit,
        Err(e) => return Err(e),
    };
    let ticks = rt.scan_count();
    let mut trace = rt.into_trace();
    trace.config_hash = Some(cfg.config_hash());
    Ok(ScenarioRun {
        outcome,
        ticks,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_parse() {
        let cfg = ScenarioConfig::default();
        let parsed = ScenarioConfig::parse(&cfg.canonical_string()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn parse_rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ScenarioConfig::parse("nonsense = 1\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            ScenarioConfig::parse("plant.dt = fast\n"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ScenarioConfig::parse("plant.dt\n"),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let cfg = ScenarioConfig::parse("# a comment\n\nplant.dt = 0.2\n").unwrap();
        assert_eq!(cfg.plant.dt, 0.2);
    }

    #[test]
    fn duplicate_priorities_fail_validation() {
        let mut cfg = ScenarioConfig::default();
        cfg.priorities.process_b = cfg.priorities.process_a;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn local_mode_with_latency_fails_validation() {
        let mut cfg = ScenarioConfig {
            latency: 3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.mode = Mode::Distributed;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn hash_tracks_every_effective_value() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.recipe_b.mix_ticks = 301;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn default_scenario_completes_both_recipes() {
        let cfg = ScenarioConfig::default();
        let run = run_scenario(&cfg).unwrap();
        assert_eq!(run.outcome, RunOutcome::Completed);
        assert!(run.ticks < 2000, "took {}", run.ticks);
        assert!(!run.trace.has_fault());
    }

    #[test]
    fn tiny_tick_budget_reports_tick_limit() {
        let cfg = ScenarioConfig {
            max_ticks: 10,
            ..Default::default()
        };
        let run = run_scenario(&cfg).unwrap();
        assert_eq!(run.outcome, RunOutcome::TickLimit);
        assert_eq!(run.ticks, 10);
        assert!(!run.trace.records.is_empty());
    }
}
