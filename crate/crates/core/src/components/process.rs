//! The two plant process controllers.
//!
//! Liqueur A: raw liquid gets a basic timed process in silo 1, is poured
//! into silo 4 through the shared pipe, then heated and mixed there, and
//! finally drained. Liqueur B: raw liquid is heated in silo 2 until its
//! target temperature, transferred to silo 3 and mixed there for a fixed
//! time, then drained. The processes run in parallel and synchronize on the
//! pipe and on mixer power through the resource arbiters; a denied acquire
//! leaves the machine in its waiting phase and retries next scan.
//!
//! Transfers terminate on the source's emptied event: the destination's
//! high-level sensor cannot be relied on (a sensor heel remains in the
//! source), so the controller force-completes the destination with
//! mark_full once the source reports empty.

use std::rc::Rc;

use crate::bus::{CommandProxy, Operation, OpSink};
use crate::components::dispatch_traced;
use crate::components::resource::CommonResource;
use crate::plant::{Actuator, SiloId, S1, S2, S3, S4};
use crate::runtime::{Command, FbLogic, RuntimeError, ScanCtx};
use crate::statechart::{action, Event, Machine, StatechartDef};
use crate::trace::{fmt_float, RecordKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    GenLiqueurA,
    GenLiqueurB,
}

impl Recipe {
    pub fn instance_id(self) -> &'static str {
        match self {
            Recipe::GenLiqueurA => "GenLiqueurA",
            Recipe::GenLiqueurB => "GenLiqueurB",
        }
    }

    pub fn source(self) -> SiloId {
        match self {
            Recipe::GenLiqueurA => S1,
            Recipe::GenLiqueurB => S2,
        }
    }

    pub fn destination(self) -> SiloId {
        match self {
            Recipe::GenLiqueurA => S4,
            Recipe::GenLiqueurB => S3,
        }
    }
}

/// Durations and targets of the recipe phases, in scans and degrees C.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecipeParams {
    /// Length of the raw processing phase in the source silo (recipe A).
    pub process_ticks: u64,
    /// Heating target: source silo for recipe B, destination for recipe A.
    pub heat_target: f64,
    /// Length of the mixing phase in the destination silo.
    pub mix_ticks: u64,
}

impl RecipeParams {
    pub fn default_a() -> RecipeParams {
        RecipeParams {
            process_ticks: 150,
            heat_target: 50.0,
            mix_ticks: 200,
        }
    }

    pub fn default_b() -> RecipeParams {
        RecipeParams {
            process_ticks: 0,
            heat_target: 60.0,
            mix_ticks: 300,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResourceKind {
    Pipe,
    Power,
}

/// Effects accumulate in execution order during dispatches and are flushed
/// to the scan context afterwards, so the trace mirrors what the actions
/// actually did, in the order they did it.
enum Effect {
    Cmd(Command),
    Send(String, Operation),
    Res(String),
}

#[derive(Default)]
struct Effects {
    items: Vec<Effect>,
}

impl OpSink for Effects {
    fn push_op(&mut self, target: &str, op: Operation) {
        self.items.push(Effect::Send(target.to_string(), op));
    }
}

/// Context the recipe machine's actions operate on.
pub struct ProcessCtx {
    me: String,
    src_proxy: CommandProxy,
    dst_proxy: CommandProxy,
    pipe: Rc<dyn CommonResource>,
    power: Rc<dyn CommonResource>,
    effects: Effects,
    timer: Option<u64>,
    temp_watch: Option<(SiloId, f64)>,
    waiting: Option<ResourceKind>,
}

impl ProcessCtx {
    fn fill_src(&mut self) {
        let p = self.src_proxy.clone();
        p.fill(&mut self.effects);
    }

    fn empty_src(&mut self) {
        let p = self.src_proxy.clone();
        p.empty(&mut self.effects);
    }

    fn fill_dst(&mut self) {
        let p = self.dst_proxy.clone();
        p.fill(&mut self.effects);
    }

    fn mark_full_dst(&mut self) {
        let p = self.dst_proxy.clone();
        p.mark_full(&mut self.effects);
    }

    fn empty_dst(&mut self) {
        let p = self.dst_proxy.clone();
        p.empty(&mut self.effects);
    }

    fn set_timer(&mut self, ticks: u64) {
        self.timer = Some(ticks);
    }

    fn arm_temp(&mut self, silo: SiloId, target: f64) {
        self.temp_watch = Some((silo, target));
    }

    fn wait_for(&mut self, kind: ResourceKind) {
        self.waiting = Some(kind);
    }

    fn actuator(&mut self, silo: SiloId, actuator: Actuator, on: bool) {
        self.effects.items.push(Effect::Cmd(Command { silo, actuator, on }));
    }

    fn resource(&self, kind: ResourceKind) -> Rc<dyn CommonResource> {
        match kind {
            ResourceKind::Pipe => self.pipe.clone(),
            ResourceKind::Power => self.power.clone(),
        }
    }

    /// Releases a held resource as soon as it is no longer required; part of
    /// the statechart's actions, per the exclusive-use design.
    fn release(&mut self, kind: ResourceKind) {
        let r = self.resource(kind);
        r.release(&self.me)
            .expect("recipe releases only resources it holds");
        self.effects
            .items
            .push(Effect::Res(format!("Released {} {}", r.name(), self.me)));
    }
}

fn payload_is(silo: SiloId) -> impl Fn(&ProcessCtx, Option<&str>) -> bool {
    let name = silo.to_string();
    move |_, payload| payload == Some(name.as_str())
}

/// Recipe A phases: FillS1, ProcessS1 (timed), AwaitPipe, Transfer,
/// ReleasePipe, HeatS4 (to target), AwaitPower, MixS4 (timed),
/// ReleasePower, EmptyS4, Done.
fn gen_liqueur_a(params: RecipeParams) -> StatechartDef<ProcessCtx> {
    let (src, dst) = (S1, S4);
    let fill = format!("Fill{src}");
    let process = format!("Process{src}");
    let heat = format!("Heat{dst}");
    let mix = format!("Mix{dst}");
    let empty = format!("Empty{dst}");

    StatechartDef::builder(Recipe::GenLiqueurA.instance_id())
        .states(&[
            &fill,
            &process,
            "AwaitPipe",
            "Transfer",
            "ReleasePipe",
            &heat,
            "AwaitPower",
            &mix,
            "ReleasePower",
            &empty,
            "Done",
        ])
        .initial_else_with(&fill, vec![action("requestFill", |c: &mut ProcessCtx, _| c.fill_src())])
        .transition(&fill, "filled", &process)
        .guard(payload_is(src))
        .action("setProcessTimer", move |c, _| c.set_timer(params.process_ticks))
        .done()
        .transition(&process, "timeout", "AwaitPipe")
        .action("requestPipe", |c, _| c.wait_for(ResourceKind::Pipe))
        .done()
        .transition("AwaitPipe", "pipeGranted", "Transfer")
        .action("emptySource", |c, _| c.empty_src())
        .action("fillDestination", |c, _| c.fill_dst())
        .done()
        .transition("Transfer", "emptied", "ReleasePipe")
        .guard(payload_is(src))
        .action("markFullDestination", |c, _| c.mark_full_dst())
        .done()
        .auto("ReleasePipe", &heat)
        .action("releasePipe", |c, _| c.release(ResourceKind::Pipe))
        .action("startHeater", move |c, _| c.actuator(dst, Actuator::Heater, true))
        .action("armTemperature", move |c, _| c.arm_temp(dst, params.heat_target))
        .done()
        .transition(&heat, "tempReached", "AwaitPower")
        .action("stopHeater", move |c, _| c.actuator(dst, Actuator::Heater, false))
        .action("requestPower", |c, _| c.wait_for(ResourceKind::Power))
        .done()
        .transition("AwaitPower", "powerGranted", &mix)
        .action("startMixer", move |c, _| c.actuator(dst, Actuator::Mixer, true))
        .action("setMixTimer", move |c, _| c.set_timer(params.mix_ticks))
        .done()
        .transition(&mix, "timeout", "ReleasePower")
        .action("stopMixer", move |c, _| c.actuator(dst, Actuator::Mixer, false))
        .action("releasePower", |c, _| c.release(ResourceKind::Power))
        .done()
        .auto("ReleasePower", &empty)
        .action("emptyDestination", |c, _| c.empty_dst())
        .done()
        .transition(&empty, "emptied", "Done")
        .guard(payload_is(dst))
        .done()
        .build()
        .expect("recipe A statechart definition is well-formed")
}

/// Recipe B phases: FillS2, HeatS2 (to target), AwaitPipe, Transfer,
/// ReleasePipe, AwaitPower, MixS3 (timed), ReleasePower, EmptyS3, Done.
fn gen_liqueur_b(params: RecipeParams) -> StatechartDef<ProcessCtx> {
    let (src, dst) = (S2, S3);
    let fill = format!("Fill{src}");
    let heat = format!("Heat{src}");
    let mix = format!("Mix{dst}");
    let empty = format!("Empty{dst}");

    StatechartDef::builder(Recipe::GenLiqueurB.instance_id())
        .states(&[
            &fill,
            &heat,
            "AwaitPipe",
            "Transfer",
            "ReleasePipe",
            "AwaitPower",
            &mix,
            "ReleasePower",
            &empty,
            "Done",
        ])
        .initial_else_with(&fill, vec![action("requestFill", |c: &mut ProcessCtx, _| c.fill_src())])
        .transition(&fill, "filled", &heat)
        .guard(payload_is(src))
        .action("startHeater", move |c, _| c.actuator(src, Actuator::Heater, true))
        .action("armTemperature", move |c, _| c.arm_temp(src, params.heat_target))
        .done()
        .transition(&heat, "tempReached", "AwaitPipe")
        .action("stopHeater", move |c, _| c.actuator(src, Actuator::Heater, false))
        .action("requestPipe", |c, _| c.wait_for(ResourceKind::Pipe))
        .done()
        .transition("AwaitPipe", "pipeGranted", "Transfer")
        .action("emptySource", |c, _| c.empty_src())
        .action("fillDestination", |c, _| c.fill_dst())
        .done()
        .transition("Transfer", "emptied", "ReleasePipe")
        .guard(payload_is(src))
        .action("markFullDestination", |c, _| c.mark_full_dst())
        .done()
        .auto("ReleasePipe", "AwaitPower")
        .action("releasePipe", |c, _| c.release(ResourceKind::Pipe))
        .action("requestPower", |c, _| c.wait_for(ResourceKind::Power))
        .done()
        .transition("AwaitPower", "powerGranted", &mix)
        .action("startMixer", move |c, _| c.actuator(dst, Actuator::Mixer, true))
        .action("setMixTimer", move |c, _| c.set_timer(params.mix_ticks))
        .done()
        .transition(&mix, "timeout", "ReleasePower")
        .action("stopMixer", move |c, _| c.actuator(dst, Actuator::Mixer, false))
        .action("releasePower", |c, _| c.release(ResourceKind::Power))
        .done()
        .auto("ReleasePower", &empty)
        .action("emptyDestination", |c, _| c.empty_dst())
        .done()
        .transition(&empty, "emptied", "Done")
        .guard(payload_is(dst))
        .done()
        .build()
        .expect("recipe B statechart definition is well-formed")
}

pub fn recipe_statechart(recipe: Recipe, params: RecipeParams) -> StatechartDef<ProcessCtx> {
    match recipe {
        Recipe::GenLiqueurA => gen_liqueur_a(params),
        Recipe::GenLiqueurB => gen_liqueur_b(params),
    }
}

/// The schedulable process controller instance. Each scan it consumes silo
/// notifications, ticks its phase timer, watches its armed temperature
/// target, and retries a pending resource acquisition.
pub struct ProcessControllerFb {
    def: Rc<StatechartDef<ProcessCtx>>,
    machine: Option<Machine<ProcessCtx>>,
    ctx: ProcessCtx,
    cycles: u64,
    cycles_done: u64,
    finished: bool,
}

impl ProcessControllerFb {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        recipe: Recipe,
        params: RecipeParams,
        src_proxy: CommandProxy,
        dst_proxy: CommandProxy,
        pipe: Rc<dyn CommonResource>,
        power: Rc<dyn CommonResource>,
        cycles: u64,
    ) -> ProcessControllerFb {
        ProcessControllerFb {
            def: Rc::new(recipe_statechart(recipe, params)),
            machine: None,
            ctx: ProcessCtx {
                me: recipe.instance_id().to_string(),
                src_proxy,
                dst_proxy,
                pipe,
                power,
                effects: Effects::default(),
                timer: None,
                temp_watch: None,
                waiting: None,
            },
            cycles: cycles.max(1),
            cycles_done: 0,
            finished: false,
        }
    }

    fn flush(&mut self, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        for effect in self.ctx.effects.items.drain(..) {
            match effect {
                Effect::Cmd(cmd) => sc.command(cmd),
                Effect::Send(target, op) => sc.send(&target, op)?,
                Effect::Res(detail) => sc.emit(RecordKind::Res, detail),
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, event: &Event, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        let machine = self.machine.as_mut().expect("initialized before dispatch");
        dispatch_traced(machine, event, &mut self.ctx, sc)?;
        self.flush(sc)
    }

    fn ensure_init(&mut self, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        if self.machine.is_some() {
            return Ok(());
        }
        self.ctx.timer = None;
        self.ctx.temp_watch = None;
        self.ctx.waiting = None;
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
        self.flush(sc)
    }
}

impl FbLogic for ProcessControllerFb {
    fn scan(&mut self, sc: &mut ScanCtx) -> Result<(), RuntimeError> {
        self.ensure_init(sc)?;

        // Phase timer. A timer set during this scan's dispatches starts
        // counting next scan.
        if let Some(t) = self.ctx.timer {
            let t = t - 1;
            if t == 0 {
                self.ctx.timer = None;
                self.dispatch(&Event::new("timeout"), sc)?;
            } else {
                self.ctx.timer = Some(t);
            }
        }

        // Silo notifications.
        for msg in std::mem::take(&mut sc.inbox) {
            let event = match &msg.operation {
                Operation::Filled(s) => Event::with_payload("filled", s.to_string()),
                Operation::Emptied(s) => Event::with_payload("emptied", s.to_string()),
                Operation::StatusIs(state) => Event::with_payload("statusIs", state.clone()),
                other => Event::new(&other.to_string()),
            };
            self.dispatch(&event, sc)?;
        }

        // Heating target.
        if let Some((silo, target)) = self.ctx.temp_watch {
            if let Some(t) = sc.sensors.temperature(silo) {
                if t >= target {
                    self.ctx.temp_watch = None;
                    self.dispatch(&Event::with_payload("tempReached", fmt_float(target)), sc)?;
                }
            }
        }

        // Pending resource acquisition; denied means retry next scan.
        if let Some(kind) = self.ctx.waiting {
            let r = self.ctx.resource(kind);
            let outcome = r.try_acquire(&self.ctx.me);
            sc.emit(
                RecordKind::Res,
                format!("{} {} {}", outcome, r.name(), self.ctx.me),
            );
            if outcome.granted() {
                self.ctx.waiting = None;
                let event = match kind {
                    ResourceKind::Pipe => Event::new("pipeGranted"),
                    ResourceKind::Power => Event::new("powerGranted"),
                };
                self.dispatch(&event, sc)?;
            }
        }

        // Batch cycling: restart the recipe until the configured number of
        // batches is done.
        if !self.finished
            && self.machine.as_ref().map(|m| m.current()) == Some("Done")
        {
            self.cycles_done += 1;
            if self.cycles_done < self.cycles {
                self.machine = None;
                self.ensure_init(sc)?;
            } else {
                self.finished = true;
            }
        }
        Ok(())
    }

    fn state_name(&self) -> Option<&str> {
        self.machine.as_ref().map(|m| m.current())
    }
}
