//! Browser demo for `mixbridge`.
//!
//! [`Session`] holds a Gaussian source sample, a swiss-roll target and the
//! fitted potential. [`Demo`] exposes it to JavaScript; all arrays cross the
//! boundary flattened row-major as `Float64Array`.

use mixbridge::datasets::{standard_gaussian, swiss_roll};
use mixbridge::rng::{seeded, stream};
use mixbridge::{
    drift, sample_bridge_trajectories, Error, MeanInit, MixturePotential, Result, SampleSet,
    SolverConfig, TrajectoryBatch,
};
use wasm_bindgen::prelude::*;

/// Latest drift time the field view accepts.
pub const MAX_FIELD_TIME: f64 = 0.99;

pub struct Session {
    source: SampleSet,
    target: SampleSet,
    potential: Option<MixturePotential>,
    losses: Vec<f64>,
}

impl Session {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            source: standard_gaussian(n, 2, &mut stream(seed, 0))?,
            target: swiss_roll(n, &mut stream(seed, 1))?,
            potential: None,
            losses: Vec::new(),
        })
    }

    pub fn source(&self) -> &SampleSet {
        &self.source
    }

    pub fn target(&self) -> &SampleSet {
        &self.target
    }

    pub fn potential(&self) -> Option<&MixturePotential> {
        self.potential.as_ref()
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Fits a fresh potential and returns the mean loss of the last
    /// `min(100, iters)` steps.
    pub fn train(&mut self, config: &SolverConfig) -> Result<f64> {
        let outcome = mixbridge::train(config, &self.source, &self.target)?;
        self.losses = outcome.trace.iter().map(|r| r.loss).collect();
        self.potential = Some(outcome.potential);
        let tail = &self.losses[self.losses.len().saturating_sub(100)..];
        Ok(tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// Replaces the potential with a checkpoint written by the CLI.
    pub fn load_checkpoint(&mut self, json: &str) -> Result<()> {
        let pot = MixturePotential::from_json(json)?;
        if pot.dim() != 2 {
            return Err(Error::InvalidParameter(format!(
                "the demo is 2D, checkpoint has dim {}",
                pot.dim()
            )));
        }
        self.potential = Some(pot);
        self.losses.clear();
        Ok(())
    }

    fn fitted(&self) -> Result<&MixturePotential> {
        self.potential.as_ref().ok_or_else(|| {
            Error::InvalidParameter("no potential yet: train or load a checkpoint first".into())
        })
    }

    /// `n_paths` bridge paths from one start point on the grid
    /// `0, 1/steps, ..., 1`.
    pub fn trajectories(
        &self,
        start: [f64; 2],
        n_paths: usize,
        steps: usize,
        seed: u64,
    ) -> Result<TrajectoryBatch> {
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        let pot = self.fitted()?;
        let starts: Vec<f64> = start.iter().copied().cycle().take(2 * n_paths).collect();
        let x0 = SampleSet::new(n_paths, 2, starts)?;
        let times: Vec<f64> = (1..steps).map(|i| i as f64 / steps as f64).collect();
        sample_bridge_trajectories(pot, &x0, &times, &mut seeded(seed))
    }

    /// Drift on a `grid x grid` lattice over `[-extent, extent]^2` at time
    /// `t`, as rows `[x, y, gx, gy]`.
    pub fn drift_field(&self, t: f64, grid: usize, extent: f64) -> Result<Vec<f64>> {
        if !(0.0..=MAX_FIELD_TIME).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "t must lie in [0, {MAX_FIELD_TIME}], got {t}"
            )));
        }
        if grid < 2 || !(extent > 0.0) {
            return Err(Error::InvalidParameter(
                "need grid >= 2 and a positive extent".into(),
            ));
        }
        let pot = self.fitted()?;
        let step = 2.0 * extent / (grid - 1) as f64;
        let mut out = Vec::with_capacity(4 * grid * grid);
        for i in 0..grid {
            for j in 0..grid {
                let x = [-extent + j as f64 * step, -extent + i as f64 * step];
                let g = drift(pot, &x, t)?;
                out.extend_from_slice(&[x[0], x[1], g[0], g[1]]);
            }
        }
        Ok(out)
    }
}

/// Solver settings used by the page. Larger `k` and more steps sharpen the
/// roll but slow the browser down.
pub fn demo_config(epsilon: f64, k: usize, lr: f64, iters: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        epsilon,
        n_components: k,
        learning_rate: lr,
        n_iters: iters,
        seed,
        init_means: MeanInit::Spread,
        eval_every: iters.max(1),
        ..SolverConfig::default()
    }
}

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, seed: u64) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            session: Session::new(n, seed).map_err(js_err)?,
        })
    }

    pub fn source(&self) -> Vec<f64> {
        self.session.source().as_slice().to_vec()
    }

    pub fn target(&self) -> Vec<f64> {
        self.session.target().as_slice().to_vec()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.session.losses().to_vec()
    }

    pub fn trained(&self) -> bool {
        self.session.potential().is_some()
    }

    pub fn train(
        &mut self,
        epsilon: f64,
        k: usize,
        lr: f64,
        iters: usize,
        seed: u64,
    ) -> std::result::Result<f64, JsError> {
        self.session
            .train(&demo_config(epsilon, k, lr, iters, seed))
            .map_err(js_err)
    }

    pub fn load_checkpoint(&mut self, json: &str) -> std::result::Result<(), JsError> {
        self.session.load_checkpoint(json).map_err(js_err)
    }

    pub fn checkpoint(&self) -> std::result::Result<String, JsError> {
        self.session
            .fitted()
            .and_then(|p| p.to_json())
            .map_err(js_err)
    }

    /// Flattened `n_paths x (steps + 1) x 2` states.
    pub fn trajectories(
        &self,
        x: f64,
        y: f64,
        n_paths: usize,
        steps: usize,
        seed: u64,
    ) -> std::result::Result<Vec<f64>, JsError> {
        self.session
            .trajectories([x, y], n_paths, steps, seed)
            .map(|b| b.states)
            .map_err(js_err)
    }

    pub fn drift_field(
        &self,
        t: f64,
        grid: usize,
        extent: f64,
    ) -> std::result::Result<Vec<f64>, JsError> {
        self.session.drift_field(t, grid, extent).map_err(js_err)
    }
}
