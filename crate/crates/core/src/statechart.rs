//! Flat run-to-completion state machine engine.
//!
//! A definition holds a set of named states, a transitory initial
//! pseudo-state (an ordered list of guarded, eventless arms, the last of
//! which must be a catch-all), and a list of transitions. At most one
//! transition fires per dispatched event: the first declared transition out
//! of the current state whose trigger matches and whose guard passes. Its
//! actions run in declaration order, then eventless transitions from the new
//! state are chained until none is enabled. Unmatched events are ignored.
//!
//! Guards are pure predicates over the machine context plus the event
//! payload; actions mutate the context. The engine is single-threaded per
//! instance and fully deterministic.

use std::fmt;
use std::rc::Rc;

/// Upper bound on the eventless chain per dispatch; exceeding it means the
/// definition livelocks.
pub const CHAIN_LIMIT: usize = 64;

/// An event offered to a machine: a name plus an optional small payload
/// (a silo id, a requester id, a formatted threshold).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub name: String,
    pub payload: Option<String>,
}

impl Event {
    pub fn new(name: &str) -> Event {
        Event {
            name: name.to_string(),
            payload: None,
        }
    }

    pub fn with_payload(name: &str, payload: impl Into<String>) -> Event {
        Event {
            name: name.to_string(),
            payload: Some(payload.into()),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Some(p) => write!(f, "{}({})", self.name, p),
            None => f.write_str(&self.name),
        }
    }
}

pub type Guard<C> = Box<dyn Fn(&C, Option<&str>) -> bool>;
pub type ActionFn<C> = Box<dyn Fn(&mut C, Option<&str>)>;

/// A named effect on the context. The name is what shows up in traces.
pub struct ActionDef<C> {
    pub name: String,
    pub effect: ActionFn<C>,
}

/// Shorthand constructor for an [`ActionDef`].
pub fn action<C>(name: &str, effect: impl Fn(&mut C, Option<&str>) + 'static) -> ActionDef<C> {
    ActionDef {
        name: name.to_string(),
        effect: Box::new(effect) as ActionFn<C>,
    }
}

pub struct InitialArm<C> {
    /// `None` marks the catch-all arm.
    pub guard: Option<Guard<C>>,
    pub actions: Vec<ActionDef<C>>,
    pub target: String,
}

pub struct Transition<C> {
    pub source: String,
    /// `None` makes the transition eventless (chained after any fire).
    pub trigger: Option<String>,
    pub guard: Option<Guard<C>>,
    pub actions: Vec<ActionDef<C>>,
    pub target: String,
}

/// A declarative state machine shared by every instance that runs it.
pub struct StatechartDef<C> {
    pub name: String,
    states: Vec<String>,
    initial: Vec<InitialArm<C>>,
    transitions: Vec<Transition<C>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DefError {
    #[error("unknown state `{state}` referenced by {place}")]
    UnknownState { state: String, place: String },
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("initial pseudo-state has no catch-all arm")]
    NoInitialFallback,
    #[error("transition {index} from `{state}` has an empty trigger name")]
    EmptyEventName { index: usize, state: String },
    #[error(
        "transition {index} from `{state}` on `{trigger}` is unreachable: an \
         earlier unguarded transition handles the same event"
    )]
    ShadowedTransition {
        index: usize,
        state: String,
        trigger: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("machine `{machine}`: eventless chain exceeded {CHAIN_LIMIT} steps at state `{state}`")]
pub struct LivelockDetected {
    pub machine: String,
    pub state: String,
}

/// One fired transition, reported back to the caller for tracing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiredStep {
    pub from: String,
    pub to: String,
    pub actions: Vec<String>,
}

/// Result of offering an event to a machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dispatch {
    Fired { steps: Vec<FiredStep> },
    Ignored,
}

impl<C> StatechartDef<C> {
    pub fn builder(name: &str) -> DefBuilder<C> {
        DefBuilder {
            def: StatechartDef {
                name: name.to_string(),
                states: Vec::new(),
                initial: Vec::new(),
                transitions: Vec::new(),
            },
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    fn has_state(&self, name: &str) -> bool {
        self.states.iter().any(|s| s == name)
    }

    /// Structural validation. Returns every problem found, never a partial
    /// acceptance.
    pub fn validate(&self) -> Result<(), Vec<DefError>> {
        let mut errors = Vec::new();

        let mut seen: Vec<&str> = Vec::new();
        for s in &self.states {
            if seen.contains(&s.as_str()) {
                errors.push(DefError::DuplicateState(s.clone()));
            }
            seen.push(s);
        }

        if !self.initial.iter().any(|arm| arm.guard.is_none()) {
            errors.push(DefError::NoInitialFallback);
        }
        for (i, arm) in self.initial.iter().enumerate() {
            if !self.has_state(&arm.target) {
                errors.push(DefError::UnknownState {
                    state: arm.target.clone(),
                    place: format!("initial arm {i}"),
                });
            }
        }

        for (i, t) in self.transitions.iter().enumerate() {
            for (state, role) in [(&t.source, "source"), (&t.target, "target")] {
                if !self.has_state(state) {
                    errors.push(DefError::UnknownState {
                        state: state.clone(),
                        place: format!("transition {i} {role}"),
                    });
                }
            }
            if let Some(trigger) = &t.trigger {
                if trigger.is_empty() {
                    errors.push(DefError::EmptyEventName {
                        index: i,
                        state: t.source.clone(),
                    });
                }
                // An earlier unguarded transition on the same (state, event)
                // consumes every occurrence, making this one dead.
                let shadowed = self.transitions[..i].iter().any(|e| {
                    e.source == t.source && e.trigger.as_deref() == Some(trigger) && e.guard.is_none()
                });
                if shadowed {
                    errors.push(DefError::ShadowedTransition {
                        index: i,
                        state: t.source.clone(),
                        trigger: trigger.clone(),
                    });
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Fluent construction of a definition; `build` validates.
pub struct DefBuilder<C> {
    def: StatechartDef<C>,
}

impl<C> DefBuilder<C> {
    pub fn state(mut self, name: &str) -> Self {
        self.def.states.push(name.to_string());
        self
    }

    pub fn states(mut self, names: &[&str]) -> Self {
        for n in names {
            self.def.states.push(n.to_string());
        }
        self
    }

    /// Adds a guarded initial arm; arms are evaluated in declaration order.
    pub fn initial_if(
        mut self,
        guard: impl Fn(&C, Option<&str>) -> bool + 'static,
        target: &str,
    ) -> Self {
        self.def.initial.push(InitialArm {
            guard: Some(Box::new(guard)),
            actions: Vec::new(),
            target: target.to_string(),
        });
        self
    }

    /// Adds the catch-all initial arm.
    pub fn initial_else(mut self, target: &str) -> Self {
        self.def.initial.push(InitialArm {
            guard: None,
            actions: Vec::new(),
            target: target.to_string(),
        });
        self
    }

    /// Catch-all initial arm with entry actions.
    pub fn initial_else_with(mut self, target: &str, actions: Vec<ActionDef<C>>) -> Self {
        self.def.initial.push(InitialArm {
            guard: None,
            actions,
            target: target.to_string(),
        });
        self
    }

    pub fn transition(self, source: &str, trigger: &str, target: &str) -> TransitionBuilder<C> {
        TransitionBuilder {
            builder: self,
            t: Transition {
                source: source.to_string(),
                trigger: Some(trigger.to_string()),
                guard: None,
                actions: Vec::new(),
                target: target.to_string(),
            },
        }
    }

    /// An eventless transition, chained during run-to-completion.
    pub fn auto(self, source: &str, target: &str) -> TransitionBuilder<C> {
        TransitionBuilder {
            builder: self,
            t: Transition {
                source: source.to_string(),
                trigger: None,
                guard: None,
                actions: Vec::new(),
                target: target.to_string(),
            },
        }
    }

    pub fn build(self) -> Result<StatechartDef<C>, Vec<DefError>> {
        self.def.validate()?;
        Ok(self.def)
    }
}

pub struct TransitionBuilder<C> {
    builder: DefBuilder<C>,
    t: Transition<C>,
}

impl<C> TransitionBuilder<C> {
    pub fn guard(mut self, g: impl Fn(&C, Option<&str>) -> bool + 'static) -> Self {
        self.t.guard = Some(Box::new(g));
        self
    }

    pub fn action(mut self, name: &str, effect: impl Fn(&mut C, Option<&str>) + 'static) -> Self {
        self.t.actions.push(ActionDef {
            name: name.to_string(),
            effect: Box::new(effect),
        });
        self
    }

    pub fn done(mut self) -> DefBuilder<C> {
        self.builder.def.transitions.push(self.t);
        self.builder
    }
}

/// A running instance of a definition. The context lives with the caller and
/// is passed into `init`/`dispatch` so guards and actions can reach sensors,
/// driver commands and timers.
pub struct Machine<C> {
    def: Rc<StatechartDef<C>>,
    current: String,
}

impl<C> Machine<C> {
    /// Evaluates the transitory initial arms in order against the context and
    /// enters the first matching target, firing its actions, then chains any
    /// eventless transitions. The definition must have validated.
    pub fn init(def: Rc<StatechartDef<C>>, ctx: &mut C) -> Result<(Machine<C>, Vec<FiredStep>), LivelockDetected> {
        let arm = def
            .initial
            .iter()
            .find(|arm| match &arm.guard {
                Some(g) => g(ctx, None),
                None => true,
            })
            .expect("validated definition has a catch-all initial arm");

        let mut steps = Vec::new();
        let mut fired_actions = Vec::new();
        for a in &arm.actions {
            (a.effect)(ctx, None);
            fired_actions.push(a.name.clone());
        }
        steps.push(FiredStep {
            from: "init".to_string(),
            to: arm.target.clone(),
            actions: fired_actions,
        });

        let mut machine = Machine {
            current: arm.target.clone(),
            def,
        };
        machine.run_to_completion(ctx, &mut steps)?;
        Ok((machine, steps))
    }

    pub fn current(&self) -> &str {
        &self.current
    }

    pub fn def(&self) -> &StatechartDef<C> {
        &self.def
    }

    /// True when an eventless transition out of the current state is
    /// enabled. After a successful dispatch this is always false.
    pub fn eventless_enabled(&self, ctx: &C) -> bool {
        self.def.transitions.iter().any(|t| {
            t.source == self.current
                && t.trigger.is_none()
                && t.guard.as_ref().is_none_or(|g| g(ctx, None))
        })
    }

    /// Offers an event. At most one triggered transition fires; eventless
    /// transitions are then chained until quiescent. An event no transition
    /// accepts returns `Ignored` and changes nothing.
    pub fn dispatch(&mut self, event: &Event, ctx: &mut C) -> Result<Dispatch, LivelockDetected> {
        let payload = event.payload.as_deref();
        let idx = self.def.transitions.iter().position(|t| {
            t.source == self.current
                && t.trigger.as_deref() == Some(event.name.as_str())
                && t.guard.as_ref().is_none_or(|g| g(ctx, payload))
        });
        let Some(idx) = idx else {
            return Ok(Dispatch::Ignored);
        };

        let mut steps = Vec::new();
        self.fire(idx, payload, ctx, &mut steps);
        self.run_to_completion(ctx, &mut steps)?;
        Ok(Dispatch::Fired { steps })
    }

    fn fire(&mut self, idx: usize, payload: Option<&str>, ctx: &mut C, steps: &mut Vec<FiredStep>) {
        let def = self.def.clone();
        let t = &def.transitions[idx];
        let mut fired_actions = Vec::new();
        for a in &t.actions {
            (a.effect)(ctx, payload);
            fired_actions.push(a.name.clone());
        }
        steps.push(FiredStep {
            from: t.source.clone(),
            to: t.target.clone(),
            actions: fired_actions,
        });
        self.current = t.target.clone();
    }

    fn run_to_completion(&mut self, ctx: &mut C, steps: &mut Vec<FiredStep>) -> Result<(), LivelockDetected> {
        for _ in 0..CHAIN_LIMIT {
            let idx = self.def.transitions.iter().position(|t| {
                t.source == self.current
                    && t.trigger.is_none()
                    && t.guard.as_ref().is_none_or(|g| g(ctx, None))
            });
            match idx {
                Some(idx) => self.fire(idx, None, ctx, steps),
                None => return Ok(()),
            }
        }
        Err(LivelockDetected {
            machine: self.def.name.clone(),
            state: self.current.clone(),
        })
    }
}
