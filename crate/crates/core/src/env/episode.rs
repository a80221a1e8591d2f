use super::{
    inject_positional_encoding, positional_encoding_field, process_actions_detailed, recenter, reward, EnvConfig, EnvError,
    GlobalObservation, RewardParams,
};
use crate::solver::{FlowState, ProbeGrid, Solver, SolverConfig, SolverError, WallProfile};

/// What one agent sees after an environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView {
    pub agent: usize,
    pub observation: GlobalObservation,
    pub reward: f64,
    pub done: bool,
}

/// Result of one merged action.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// One view per agent; empty when the solver blew up.
    pub views: Vec<AgentView>,
    pub done: bool,
    /// Set when the simulation diverged during this step.
    pub blow_up: Option<SolverError>,
    pub nu_global: f64,
    pub nu_local: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Mean of the applied offsets after clamping.
    pub offset_mean: f64,
}

/// Pseudo-environments of all agents around one shared simulation.
#[derive(Debug, Clone)]
pub struct MarlEnv {
    cfg: EnvConfig,
    solver: Solver,
    probes: ProbeGrid,
    pe_field: Option<Vec<f64>>,
    reward: RewardParams,
    start: FlowState,
    state: FlowState,
    steps: usize,
    active: bool,
}

impl MarlEnv {
    /// Environment restarting every episode from `start`; `nu_base` is the
    /// default reward offset.
    pub fn new(solver_cfg: &SolverConfig, cfg: &EnvConfig, start: FlowState, nu_base: f64) -> Result<Self, EnvError> {
        cfg.validate()?;
        let solver = Solver::new(solver_cfg)?;
        start.check_grid(solver_cfg)?;
        if cfg.n_segments > solver_cfg.nx {
            return Err(EnvError::Config(format!(
                "{} segments do not fit on {} grid columns",
                cfg.n_segments, solver_cfg.nx
            )));
        }
        solver.steps_for(cfg.action_duration)?;
        let probes = ProbeGrid::new(solver_cfg, cfg.probe_columns)?;
        let pe_field = cfg
            .pe_enabled
            .then(|| positional_encoding_field(cfg, probes.x_stations(), solver_cfg.domain_width));
        Ok(Self {
            cfg: cfg.clone(),
            solver,
            probes,
            pe_field,
            reward: cfg.reward_params(nu_base),
            state: start.clone(),
            start,
            steps: 0,
            active: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn probes(&self) -> &ProbeGrid {
        &self.probes
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn reward_params(&self) -> RewardParams {
        self.reward
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn pe_field(&self) -> Option<&[f64]> {
        self.pe_field.as_deref()
    }

    /// Encoding-free probe image of the current state.
    pub fn global_observation(&self) -> Result<GlobalObservation, EnvError> {
        Ok(self.probes.sample(&self.state)?)
    }

    /// Per-agent inputs for `obs`: encoding first (when enabled), then recentering.
    pub fn agent_observations(&self, obs: &GlobalObservation) -> Result<Vec<GlobalObservation>, EnvError> {
        let encoded = match &self.pe_field {
            Some(field) => inject_positional_encoding(obs, field)?,
            None => obs.clone(),
        };
        (0..self.cfg.n_segments).map(|i| recenter(&encoded, i, self.cfg.n_segments)).collect()
    }

    /// Restart from the stored snapshot and return the initial views.
    pub fn reset(&mut self) -> Result<Vec<AgentView>, EnvError> {
        self.state = self.start.clone();
        self.steps = 0;
        self.active = true;
        let obs = self.global_observation()?;
        Ok(self
            .agent_observations(&obs)?
            .into_iter()
            .enumerate()
            .map(|(agent, observation)| AgentView { agent, observation, reward: 0.0, done: false })
            .collect())
    }

    /// Apply the merged raw actions for one action window.
    pub fn step(&mut self, raw_actions: &[f64]) -> Result<StepOutcome, EnvError> {
        if !self.active {
            return Err(EnvError::Inactive("call reset before stepping".into()));
        }
        let pipeline = process_actions_detailed(raw_actions, &self.cfg)?;
        let profile = WallProfile::new(pipeline.offsets.clone());
        let offset_mean = super::post_clamp_mean(&pipeline.offsets);
        match self.solver.advance(&self.state, &profile, self.cfg.action_duration) {
            Err(e @ SolverError::BlowUp { .. }) => {
                self.active = false;
                Ok(StepOutcome {
                    views: Vec::new(),
                    done: true,
                    blow_up: Some(e),
                    nu_global: f64::NAN,
                    nu_local: Vec::new(),
                    offsets: pipeline.offsets,
                    offset_mean,
                })
            }
            Err(e) => Err(e.into()),
            Ok(next) => {
                self.state = next;
                self.steps += 1;
                let done = self.steps >= self.cfg.actions_per_episode;
                if done {
                    self.active = false;
                }
                let nu_global = self.solver.nusselt_global(&self.state);
                let nu_local = self.solver.nusselt_segments(&self.state, self.cfg.n_segments)?;
                let obs = self.global_observation()?;
                let views = self
                    .agent_observations(&obs)?
                    .into_iter()
                    .enumerate()
                    .map(|(agent, observation)| AgentView {
                        agent,
                        observation,
                        reward: reward(nu_global, nu_local[agent], &self.reward),
                        done,
                    })
                    .collect();
                Ok(StepOutcome {
                    views,
                    done,
                    blow_up: None,
                    nu_global,
                    nu_local,
                    offsets: pipeline.offsets,
                    offset_mean,
                })
            }
        }
    }
}
