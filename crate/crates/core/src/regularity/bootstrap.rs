//! The colour bootstrap: a monochromatic set of shifted primes either has a
//! difference of its own colour, or its difference set holds many shifted
//! primes of the remaining colours, one class of which is translated back
//! into the set to give a smaller set avoiding one more colour.

use serde::{Deserialize, Serialize};

use super::{Colouring, SolutionWitness};
use crate::error::{LabError, Result};
use crate::increment::{
    best_translate, iterate_to_primes, refine_to_modulus, refine_with_length, IterationParams,
    Progression, Refinement, Translate,
};
use crate::prime_core::{sieve_primes, ExceptionalContext, PrimeTable};
use crate::set::IntSet;
use crate::spectral::DifferenceCounts;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub iteration: IterationParams,
    /// Exceptional modulus injected at step `i`; missing entries mean 1.
    pub dbar_schedule: Vec<u64>,
    /// Refine onto the longest progression of step `d dbar` that fits,
    /// rather than one of the minimal length `alpha N / dbar`.
    pub full_length_refinement: bool,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        Self {
            iteration: IterationParams {
                c: 0.5,
                ..IterationParams::default()
            },
            dbar_schedule: Vec::new(),
            full_length_refinement: true,
        }
    }
}

impl BootstrapParams {
    fn dbar_at(&self, i: usize) -> u64 {
        self.dbar_schedule.get(i).copied().unwrap_or(1)
    }
}

/// A monochromatic set of shifted primes inside a progression, with the
/// colours its shifted-prime differences may still take.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapState {
    pub set: IntSet,
    pub progression: Progression,
    pub dbar: u64,
    pub colour: u32,
    /// Sorted; always contains `colour`.
    pub allowed: Vec<u32>,
}

impl BootstrapState {
    pub fn colours_remaining(&self) -> usize {
        self.allowed.len()
    }

    pub fn alpha(&self) -> f64 {
        self.set.len() as f64 / self.progression.length as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepOutcome {
    Witness {
        witness: SolutionWitness,
    },
    Shrink {
        refinement: Option<Refinement>,
        inner_steps: usize,
        /// Common difference `D_k` of the shifted primes found.
        prime_step: i64,
        shifted_primes: usize,
        class_colour: u32,
        class_size: usize,
        /// `ceil(|A'| / (colours_remaining - 1))`
        pigeonhole_bound: usize,
        translate: Translate,
        next_size: usize,
        measured_colours: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub i: usize,
    pub n: usize,
    pub alpha: f64,
    pub d: i64,
    pub dbar: u64,
    pub colours_remaining: usize,
    pub colour: u32,
    pub size: usize,
    pub outcome: StepOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BootstrapStep {
    Witness(SolutionWitness, BootstrapRecord),
    Next(BootstrapState, BootstrapRecord),
}

/// Smallest same-coloured shifted prime `z` in `A - A`, as a witness.
fn own_colour_difference(c: &Colouring, state: &BootstrapState) -> Option<SolutionWitness> {
    let counts = DifferenceCounts::of(&state.set);
    let z = counts
        .positive_differences()
        .find(|&z| c.colour_of_shifted(z) == Some(state.colour))?;
    let x = state.set.iter().find(|&x| state.set.contains(x - z))?;
    Some(SolutionWitness {
        p1: x as u64 + 1,
        p2: (x - z) as u64 + 1,
        p3: z as u64 + 1,
        colour: state.colour,
    })
}

fn shifted_prime_colours(c: &Colouring, set: &IntSet) -> Vec<u32> {
    let counts = DifferenceCounts::of(set);
    let mut colours: Vec<u32> = counts
        .positive_differences()
        .filter_map(|z| c.colour_of_shifted(z))
        .collect();
    colours.sort_unstable();
    colours.dedup();
    colours
}

/// One bootstrap step on a monochromatic set of shifted primes.
pub fn bootstrap_step(
    c: &Colouring,
    state: &BootstrapState,
    i: usize,
    params: &BootstrapParams,
    table: &PrimeTable,
) -> Result<BootstrapStep> {
    if state.set.is_empty() {
        return Err(LabError::Degenerate(format!(
            "step {i} starts from an empty set"
        )));
    }
    if !state.progression.contains_set(&state.set) {
        return Err(LabError::Invariant(format!(
            "step {i}: set leaves its progression {:?}",
            state.progression
        )));
    }
    if state
        .set
        .iter()
        .any(|a| c.colour_of_shifted(a) != Some(state.colour))
    {
        return Err(LabError::Invariant(format!(
            "step {i}: set is not a monochromatic set of shifted primes"
        )));
    }
    let record = |outcome| BootstrapRecord {
        i,
        n: state.progression.length,
        alpha: state.alpha(),
        d: state.progression.step,
        dbar: state.dbar,
        colours_remaining: state.colours_remaining(),
        colour: state.colour,
        size: state.set.len(),
        outcome,
    };

    if let Some(witness) = own_colour_difference(c, state) {
        witness.verify(c)?;
        return Ok(BootstrapStep::Witness(
            witness,
            record(StepOutcome::Witness { witness }),
        ));
    }
    let allowed_after: Vec<u32> = state
        .allowed
        .iter()
        .copied()
        .filter(|&col| col != state.colour)
        .collect();
    if allowed_after.is_empty() {
        return Err(LabError::Invariant(format!(
            "step {i}: no colours remain and no monochromatic solution was found"
        )));
    }

    // pass to a progression of step d * dbar when an exceptional modulus is injected
    let (work, work_prog, refinement, ctx) = if state.dbar > 1 {
        let r = if params.full_length_refinement {
            let len = state.progression.length / state.dbar as usize;
            refine_with_length(&state.set, &state.progression, state.dbar, len)?
        } else {
            refine_to_modulus(&state.set, &state.progression, state.dbar)?
        };
        let work: IntSet = state
            .set
            .iter()
            .filter(|&a| r.progression.contains(a))
            .collect();
        (
            work,
            r.progression,
            Some(r),
            ExceptionalContext::exceptional(state.dbar)?,
        )
    } else {
        (
            state.set.clone(),
            state.progression,
            None,
            ExceptionalContext::default(),
        )
    };
    let normalized: IntSet = work
        .iter()
        .map(|a| (a - work_prog.start) / work_prog.step + 1)
        .collect();
    let d = (work_prog.step as u64) / state.dbar;
    let inner = iterate_to_primes(
        &normalized,
        work_prog.length,
        d,
        ctx,
        &params.iteration,
        table,
    )?;
    let prime_step = inner.progression.step;
    if prime_step != work_prog.step * inner.scale {
        return Err(LabError::Invariant(format!(
            "step {i}: prime step {prime_step} is not the lifted step {} * {}",
            work_prog.step, inner.scale
        )));
    }
    let shifted: IntSet = inner.a_prime.iter().map(|n| prime_step * n).collect();
    let diffs = DifferenceCounts::of(&work);
    for z in &shifted {
        if diffs.at(z) == 0 || c.colour_of_shifted(z).is_none() {
            return Err(LabError::Invariant(format!(
                "step {i}: {z} is not a shifted-prime difference of the set"
            )));
        }
    }

    let measured = shifted_prime_colours(c, &state.set);
    if measured.iter().any(|col| !allowed_after.contains(col)) {
        return Err(LabError::Invariant(format!(
            "step {i}: difference colours {measured:?} escape the allowed {allowed_after:?}"
        )));
    }
    let mut class_counts = vec![0usize; c.k() as usize + 1];
    for z in &shifted {
        class_counts[c.colour_of_shifted(z).expect("checked above") as usize] += 1;
    }
    let class_colour = (1..=c.k())
        .max_by_key(|&col| (class_counts[col as usize], std::cmp::Reverse(col)))
        .expect("k >= 1");
    let class: IntSet = shifted
        .iter()
        .filter(|&z| c.colour_of_shifted(z) == Some(class_colour))
        .collect();
    let pigeonhole_bound = shifted.len().div_ceil(allowed_after.len());
    if class.len() < pigeonhole_bound {
        return Err(LabError::Invariant(format!(
            "step {i}: largest class {} below pigeonhole bound {pigeonhole_bound}",
            class.len()
        )));
    }
    if class.is_empty() {
        return Err(LabError::Degenerate(format!(
            "step {i}: no shifted primes to classify"
        )));
    }

    let class_prog = inner.progression;
    let translate = best_translate(&work, &work_prog, &class, &class_prog)?;
    let next: IntSet = class
        .iter()
        .filter(|&b| work.contains(b + translate.n))
        .collect();
    if next.len() != translate.size
        || !next.is_subset(&class)
        || !next.iter().all(|b| work.contains(b + translate.n))
    {
        return Err(LabError::Invariant(format!(
            "step {i}: translated class fails recount"
        )));
    }
    let next_state = BootstrapState {
        set: next,
        progression: class_prog,
        dbar: params.dbar_at(i + 1),
        colour: class_colour,
        allowed: allowed_after,
    };
    let measured_next = shifted_prime_colours(c, &next_state.set);
    if measured_next.len() > next_state.colours_remaining() {
        return Err(LabError::Invariant(format!(
            "step {i}: next set shows {} colours, more than the {} remaining",
            measured_next.len(),
            next_state.colours_remaining()
        )));
    }
    let outcome = StepOutcome::Shrink {
        refinement,
        inner_steps: inner.steps,
        prime_step,
        shifted_primes: shifted.len(),
        class_colour,
        class_size: class.len(),
        pigeonhole_bound,
        translate,
        next_size: next_state.set.len(),
        measured_colours: measured.len(),
    };
    Ok(BootstrapStep::Next(next_state, record(outcome)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BootstrapTerminal {
    Witness {
        witness: SolutionWitness,
    },
    /// An internal invariant failed, including running out of colours.
    Violation {
        message: String,
    },
    /// A constituent lemma could not be applied at this scale.
    Stalled {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapTrace {
    pub n0: u64,
    pub k: u32,
    /// `(2 k log N0)^-1`, the density the largest class is guaranteed.
    pub guaranteed_alpha: f64,
    /// `log log log N0`, against which `k` should be small; advisory.
    pub log3_n0: Option<f64>,
    pub steps: Vec<BootstrapRecord>,
    pub terminal: BootstrapTerminal,
}

/// Runs the bootstrap from the largest colour class of the shifted primes.
pub fn bootstrap_run(c: &Colouring, params: &BootstrapParams) -> Result<BootstrapTrace> {
    if c.primes().is_empty() {
        return Err(LabError::Domain(format!("no primes up to N0 = {}", c.n0())));
    }
    let max_dbar = params
        .dbar_schedule
        .iter()
        .copied()
        .max()
        .unwrap_or(1)
        .max(1);
    let table = sieve_primes(2 * max_dbar * c.n0() + 2)?;

    let mut sizes = vec![0usize; c.k() as usize + 1];
    for &col in c.colours() {
        sizes[col as usize] += 1;
    }
    let colour = (1..=c.k())
        .max_by_key(|&col| (sizes[col as usize], std::cmp::Reverse(col)))
        .expect("k >= 1");
    let set = super::induced_shifted_set(c, colour)?;
    let mut allowed = shifted_prime_colours(c, &set);
    allowed.push(colour);
    allowed.sort_unstable();
    allowed.dedup();
    let n0 = c.n0();
    let ln = (n0 as f64).ln();
    let mut trace = BootstrapTrace {
        n0,
        k: c.k(),
        guaranteed_alpha: 1.0 / (2.0 * c.k() as f64 * ln),
        log3_n0: (ln > 1.0 && ln.ln() > 0.0).then(|| ln.ln().ln()),
        steps: Vec::new(),
        terminal: BootstrapTerminal::Stalled {
            message: String::new(),
        },
    };
    let mut state = BootstrapState {
        set,
        progression: Progression::interval(n0 as usize),
        dbar: params.dbar_at(0),
        colour,
        allowed,
    };
    for i in 0.. {
        match bootstrap_step(c, &state, i, params, &table) {
            Ok(BootstrapStep::Witness(witness, record)) => {
                trace.steps.push(record);
                trace.terminal = BootstrapTerminal::Witness { witness };
                break;
            }
            Ok(BootstrapStep::Next(next, record)) => {
                if next.colours_remaining() >= state.colours_remaining() {
                    trace.steps.push(record);
                    trace.terminal = BootstrapTerminal::Violation {
                        message: format!("step {i}: colour count did not decrease"),
                    };
                    break;
                }
                trace.steps.push(record);
                state = next;
            }
            Err(LabError::Invariant(message)) => {
                trace.terminal = BootstrapTerminal::Violation { message };
                break;
            }
            Err(e) => {
                trace.terminal = BootstrapTerminal::Stalled {
                    message: e.to_string(),
                };
                break;
            }
        }
    }
    Ok(trace)
}
