//! Trace verification and comparison.
//!
//! The verifier replays a trace's ACT and RES records into a model of the
//! valve/mixer image and the resource holders, and checks the plant's
//! safety rules independently of the simulation that produced the trace:
//! pipe exclusion, power exclusion, per-silo valve-pair safety, and
//! resource honesty (a transfer route may only be open while its process
//! holds the pipe, a mixer may only run while power is held, grants only go
//! to a free resource, releases only come from the holder).

use crate::trace::{RecordKind, Trace, TraceRecord};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("tick {tick}: unparseable {kind} detail `{detail}`")]
    MalformedDetail {
        tick: u64,
        kind: RecordKind,
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// First violation, when failed.
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const CHECK_NAMES: [&str; 5] = [
    "sortedness",
    "pipe-exclusion",
    "power-exclusion",
    "valve-pair-safety",
    "resource-honesty",
];

#[derive(Default)]
struct Failures {
    sortedness: Option<String>,
    pipe: Option<String>,
    power: Option<String>,
    valve_pair: Option<String>,
    honesty: Option<String>,
}

struct Image {
    in_valve: [bool; 4],
    out_valve: [bool; 4],
    mixer: [bool; 4],
    pipe_holder: Option<String>,
    power_holder: Option<String>,
}

impl Image {
    fn new() -> Image {
        Image {
            in_valve: [false; 4],
            out_valve: [false; 4],
            mixer: [false; 4],
            pipe_holder: None,
            power_holder: None,
        }
    }

    fn route_a(&self) -> bool {
        self.out_valve[0] && self.in_valve[3]
    }

    fn route_b(&self) -> bool {
        self.out_valve[1] && self.in_valve[2]
    }
}

fn parse_silo(token: &str) -> Option<usize> {
    match token {
        "S1" => Some(0),
        "S2" => Some(1),
        "S3" => Some(2),
        "S4" => Some(3),
        _ => None,
    }
}

fn apply_act(image: &mut Image, r: &TraceRecord) -> Result<(), VerifyError> {
    let malformed = || VerifyError::MalformedDetail {
        tick: r.tick,
        kind: r.kind,
        detail: r.detail.clone(),
    };
    let (verb, silo) = r.detail.split_once(' ').ok_or_else(malformed)?;
    let i = parse_silo(silo).ok_or_else(malformed)?;
    match verb {
        "openINValve" => image.in_valve[i] = true,
        "closeINValve" => image.in_valve[i] = false,
        "openOUTValve" => image.out_valve[i] = true,
        "closeOUTValve" => image.out_valve[i] = false,
        "startMixer" => image.mixer[i] = true,
        "stopMixer" => image.mixer[i] = false,
        "startHeater" | "stopHeater" => {}
        _ => return Err(malformed()),
    }
    Ok(())
}

fn apply_res(image: &mut Image, r: &TraceRecord, failures: &mut Failures) -> Result<(), VerifyError> {
    let malformed = || VerifyError::MalformedDetail {
        tick: r.tick,
        kind: r.kind,
        detail: r.detail.clone(),
    };
    let mut parts = r.detail.split(' ');
    let verdict = parts.next().ok_or_else(malformed)?;
    let resource = parts.next().ok_or_else(malformed)?;
    let requester = parts.next().ok_or_else(malformed)?.to_string();
    if parts.next().is_some() {
        return Err(malformed());
    }
    let holder = match resource {
        "pipe" => &mut image.pipe_holder,
        "power" => &mut image.power_holder,
        _ => return Err(malformed()),
    };
    match verdict {
        "Granted" => {
            if let Some(h) = holder {
                failures.honesty.get_or_insert(format!(
                    "tick {}: {} granted to {} while held by {}",
                    r.tick, resource, requester, h
                ));
            }
            *holder = Some(requester);
        }
        "Denied" => {}
        "Released" => {
            if holder.as_deref() != Some(requester.as_str()) {
                failures.honesty.get_or_insert(format!(
                    "tick {}: {} released by {} who does not hold it",
                    r.tick, resource, requester
                ));
            }
            *holder = None;
        }
        _ => return Err(malformed()),
    }
    Ok(())
}

fn end_of_tick(image: &Image, tick: u64, failures: &mut Failures) {
    if image.route_a() && image.route_b() {
        failures
            .pipe
            .get_or_insert(format!("tick {tick}: both transfer routes open"));
    }
    if (image.route_a() || image.route_b()) && image.pipe_holder.is_none() {
        failures
            .honesty
            .get_or_insert(format!("tick {tick}: transfer route open with pipe FREE"));
    }
    if image.mixer[2] && image.mixer[3] {
        failures
            .power
            .get_or_insert(format!("tick {tick}: both mixers running"));
    }
    if (image.mixer[2] || image.mixer[3]) && image.power_holder.is_none() {
        failures
            .honesty
            .get_or_insert(format!("tick {tick}: mixer running with power FREE"));
    }
    for i in 0..4 {
        if image.in_valve[i] && image.out_valve[i] {
            failures.valve_pair.get_or_insert(format!(
                "tick {tick}: S{} has IN and OUT open together",
                i + 1
            ));
        }
    }
}

/// Replays a parsed trace and reports one pass/fail result per safety rule.
pub fn verify_trace(trace: &Trace) -> Result<CheckReport, VerifyError> {
    let mut failures = Failures::default();
    let mut image = Image::new();
    let mut prev_tick: Option<u64> = None;

    for r in &trace.records {
        if let Some(p) = prev_tick {
            if r.tick < p {
                failures
                    .sortedness
                    .get_or_insert(format!("tick {} after tick {}", r.tick, p));
            }
            if r.tick != p {
                end_of_tick(&image, p, &mut failures);
            }
        }
        prev_tick = Some(r.tick);
        match r.kind {
            RecordKind::Act => apply_act(&mut image, r)?,
            RecordKind::Res => apply_res(&mut image, r, &mut failures)?,
            RecordKind::Fault => {
                let kind = r.detail.split(' ').next().unwrap_or_default();
                match kind {
                    "PipeConflict" => {
                        failures
                            .pipe
                            .get_or_insert(format!("tick {}: PipeConflict fault", r.tick));
                    }
                    "PowerViolation" => {
                        failures
                            .power
                            .get_or_insert(format!("tick {}: PowerViolation fault", r.tick));
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    if let Some(p) = prev_tick {
        end_of_tick(&image, p, &mut failures);
    }

    let slots = [
        failures.sortedness,
        failures.pipe,
        failures.power,
        failures.valve_pair,
        failures.honesty,
    ];
    Ok(CheckReport {
        checks: CHECK_NAMES
            .iter()
            .zip(slots)
            .map(|(name, detail)| CheckResult {
                name,
                passed: detail.is_none(),
                detail,
            })
            .collect(),
    })
}

/// Outcome of comparing the filtered record streams of two traces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Comparison {
    Identical {
        compared: usize,
    },
    Divergence {
        index: usize,
        left: Option<TraceRecord>,
        right: Option<TraceRecord>,
    },
}

/// Compares the subsequences of the given kinds record by record.
pub fn compare_traces(a: &Trace, b: &Trace, kinds: &[RecordKind]) -> Comparison {
    let left = a.filtered(kinds);
    let right = b.filtered(kinds);
    let n = left.len().max(right.len());
    for i in 0..n {
        let l = left.get(i).copied();
        let r = right.get(i).copied();
        if l != r {
            return Comparison::Divergence {
                index: i,
                left: l.cloned(),
                right: r.cloned(),
            };
        }
    }
    Comparison::Identical {
        compared: left.len(),
    }
}
