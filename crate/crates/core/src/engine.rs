//! The (1+1) loop: propose, evaluate, accept when not worse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mutation::{GeometryOptions, MutationDelta, Mutator, OperatorSpec};
use crate::raster::Raster;
use crate::rng::RngStream;
use crate::state::{build_state, TransitionState};

pub const DEFAULT_MILESTONES: [f64; 4] = [0.125, 0.375, 0.625, 0.875];
pub const DEFAULT_MAX_GENERATIONS: u64 = 10_000_000;
/// Upper bound on the number of sampled trajectory points.
pub const TRAJECTORY_POINTS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub operator: OperatorSpec,
    pub geometry: GeometryOptions,
    pub seed: u64,
    pub milestones: Vec<f64>,
    pub max_generations: u64,
    pub frame_every: Option<u64>,
    pub emit_initial_final: bool,
}

impl RunConfig {
    pub fn new(operator: OperatorSpec, seed: u64) -> Self {
        Self {
            operator,
            geometry: GeometryOptions::default(),
            seed,
            milestones: DEFAULT_MILESTONES.to_vec(),
            max_generations: DEFAULT_MAX_GENERATIONS,
            frame_every: None,
            emit_initial_final: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        if self.max_generations == 0 {
            return Err(Error::InvalidParameter("max_generations must be >= 1".into()));
        }
        if self.frame_every == Some(0) {
            return Err(Error::InvalidParameter("frame_every must be >= 1".into()));
        }
        for m in &self.milestones {
            if !(*m > 0.0 && *m < 1.0) {
                return Err(Error::InvalidParameter(format!("milestone {m} outside (0, 1)")));
            }
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("milestones must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Stride between recorded trajectory points.
    pub fn trajectory_stride(&self) -> u64 {
        self.max_generations.div_ceil(TRAJECTORY_POINTS).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    Complete,
    MaxGenerations,
    EmptyMutableSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneEvent {
    /// The threshold that was crossed.
    pub fraction: f64,
    pub generation: u64,
    pub frame: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub generations_run: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub final_fraction: f64,
    pub milestone_events: Vec<MilestoneEvent>,
    /// `(generation, fitness)` samples, always including the first and last generation.
    pub fitness_trajectory: Vec<(u64, usize)>,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameTag {
    Initial,
    Milestone,
    Stride,
    Final,
}

#[derive(Debug, Clone, Copy)]
pub struct FrameEvent<'a> {
    pub raster: &'a Raster,
    pub generation: u64,
    /// Fraction of mutable pixels in the target state.
    pub fraction: f64,
    pub tag: FrameTag,
}

/// Receives rendered frames from a run.
pub trait FrameSink {
    /// Returns a name for the stored frame, if it was stored anywhere.
    fn emit(&mut self, frame: FrameEvent<'_>) -> Result<Option<String>>;

    /// Sinks that drop every frame return `false` so the engine can skip rendering.
    fn wants_frames(&self) -> bool {
        true
    }
}

/// Discards all frames.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl FrameSink for NullSink {
    fn emit(&mut self, _frame: FrameEvent<'_>) -> Result<Option<String>> {
        Ok(None)
    }

    fn wants_frames(&self) -> bool {
        false
    }
}

impl<S: FrameSink + ?Sized> FrameSink for &mut S {
    fn emit(&mut self, frame: FrameEvent<'_>) -> Result<Option<String>> {
        (**self).emit(frame)
    }

    fn wants_frames(&self) -> bool {
        (**self).wants_frames()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub delta: MutationDelta,
}

/// One generation. The delta is applied only if it does not lower fitness.
pub fn step(state: &mut TransitionState, mutator: &Mutator, generation: u64, rng: &mut RngStream) -> StepOutcome {
    let delta = mutator.propose(state, generation, rng);
    let accepted = delta.fitness_gain() >= 0;
    if accepted {
        state.apply(&delta);
    }
    StepOutcome { accepted, delta }
}

/// Runs the transition from `start` toward `target` until complete or the
/// generation cap is hit.
pub fn run(start: &Raster, target: &Raster, config: &RunConfig, mut sink: impl FrameSink) -> Result<RunReport> {
    config.validate()?;
    let mut state = match build_state(start, target) {
        Ok(state) => state,
        Err(Error::EmptyMutableSet) => return empty_run(target, config, &mut sink),
        Err(e) => return Err(e),
    };

    let mutator = Mutator::new(config.operator, config.geometry);
    let mut rng = RngStream::new(config.seed);
    let stride = config.trajectory_stride();
    let mut emitter = Emitter {
        sink: &mut sink,
        start,
        target,
    };

    if config.emit_initial_final {
        emitter.emit(&state, 0, FrameTag::Initial)?;
    }

    let mut generation = 0u64;
    let (mut accepted, mut rejected) = (0u64, 0u64);
    let mut next_milestone = 0usize;
    let mut milestone_events = Vec::with_capacity(config.milestones.len());
    let mut trajectory = vec![(0, state.fitness())];

    while !state.is_complete() && generation < config.max_generations {
        let outcome = step(&mut state, &mutator, generation, &mut rng);
        generation += 1;
        if outcome.accepted {
            accepted += 1;
            let fraction = fraction_of(&state);
            while next_milestone < config.milestones.len() && fraction >= config.milestones[next_milestone] {
                let frame = emitter.emit(&state, generation, FrameTag::Milestone)?;
                milestone_events.push(MilestoneEvent {
                    fraction: config.milestones[next_milestone],
                    generation,
                    frame,
                });
                next_milestone += 1;
            }
        } else {
            rejected += 1;
        }
        if generation.is_multiple_of(stride) {
            trajectory.push((generation, state.fitness()));
        }
        if config.frame_every.is_some_and(|every| generation.is_multiple_of(every)) {
            emitter.emit(&state, generation, FrameTag::Stride)?;
        }
    }

    if trajectory.last().map(|(g, _)| *g) != Some(generation) {
        trajectory.push((generation, state.fitness()));
    }
    if config.emit_initial_final {
        emitter.emit(&state, generation, FrameTag::Final)?;
    }

    Ok(RunReport {
        generations_run: generation,
        accepted,
        rejected,
        final_fraction: fraction_of(&state),
        milestone_events,
        fitness_trajectory: trajectory,
        termination: if state.is_complete() {
            Termination::Complete
        } else {
            Termination::MaxGenerations
        },
    })
}

fn fraction_of(state: &TransitionState) -> f64 {
    state.count_t() as f64 / state.mutable_total() as f64
}

fn empty_run(target: &Raster, config: &RunConfig, sink: &mut impl FrameSink) -> Result<RunReport> {
    if config.emit_initial_final && sink.wants_frames() {
        sink.emit(FrameEvent {
            raster: target,
            generation: 0,
            fraction: 1.0,
            tag: FrameTag::Final,
        })?;
    }
    Ok(RunReport {
        generations_run: 0,
        accepted: 0,
        rejected: 0,
        final_fraction: 1.0,
        milestone_events: Vec::new(),
        fitness_trajectory: vec![(0, 0)],
        termination: Termination::EmptyMutableSet,
    })
}

struct Emitter<'a, S> {
    sink: &'a mut S,
    start: &'a Raster,
    target: &'a Raster,
}

impl<S: FrameSink> Emitter<'_, S> {
    fn emit(&mut self, state: &TransitionState, generation: u64, tag: FrameTag) -> Result<Option<String>> {
        if !self.sink.wants_frames() {
            return Ok(None);
        }
        let raster = state.render(self.start, self.target)?;
        self.sink.emit(FrameEvent {
            raster: &raster,
            generation,
            fraction: fraction_of(state),
            tag,
        })
    }
}
