//! The large-scale equation alone, forced by a stochastic surrogate for the
//! small-scale feedback.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::l96::resolved_tendency;
use crate::narmax::{narmax_step_grid, NarmaxHistory, NarmaxModel};
use crate::series::{RowMatrix, SampleSeries};
use crate::varx::{check_stability, LagBuffer, VarxModel};
use crate::DIVERGENCE_BOUND;

/// Recorded in trajectory metadata so runs can be reproduced elsewhere.
pub const GENERATOR: &str =
    "ChaCha20Rng::seed_from_u64, StandardNormal; K draws per step in grid order";

/// A surrogate for the feedback term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Parameterization {
    Varx(VarxModel),
    Narmax(NarmaxModel),
    /// Feedback dropped entirely (`b = 0`).
    Unresolved,
}

impl Parameterization {
    pub fn label(&self) -> String {
        match self {
            Parameterization::Varx(m) => m.spec.label(),
            Parameterization::Narmax(m) => m.variant.label().to_string(),
            Parameterization::Unresolved => "unresolved".to_string(),
        }
    }

    /// Number of past surrogate rows needed before the first step.
    pub fn history_len(&self) -> usize {
        match self {
            Parameterization::Varx(m) => m.spec.history_len(),
            Parameterization::Narmax(_) => 1,
            Parameterization::Unresolved => 0,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Parameterization::Unresolved)
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn id(&self) -> String {
        let text = serde_json::to_string(self).expect("parameterization serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// `Some(false)` for a VARX model whose companion matrix has an eigenvalue
    /// on or outside the unit circle; `None` when the notion does not apply.
    pub fn stable(&self) -> Result<Option<bool>> {
        match self {
            Parameterization::Varx(m) if m.spec.use_endogenous => {
                Ok(Some(check_stability(m)?.stable))
            }
            _ => Ok(None),
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        match self {
            Parameterization::Varx(m) => {
                m.validate()?;
                if m.spec.k != k {
                    return Err(Error::Config(format!(
                        "model has K = {}, configuration has K = {k}",
                        m.spec.k
                    )));
                }
                Ok(())
            }
            Parameterization::Narmax(m) => m.validate(),
            Parameterization::Unresolved => Ok(()),
        }
    }
}

/// Reduced-model trajectory with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub x: RowMatrix,
    pub b: RowMatrix,
    pub seed: u64,
    pub model_id: String,
    pub model_label: String,
    pub generator: String,
    pub dt: f64,
    pub config_id: [u8; 32],
    pub warnings: Vec<String>,
}

impl ReducedTrajectory {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn to_series(&self) -> Result<SampleSeries> {
        SampleSeries::new(self.x.clone(), self.b.clone(), self.dt, self.config_id)
    }
}

/// Scratch buffers for the two-stage update with the feedback held fixed.
#[derive(Debug, Clone)]
pub struct ReducedIntegrator {
    forcing: f64,
    dt: f64,
    tendency: Vec<f64>,
    mid: Vec<f64>,
}

impl ReducedIntegrator {
    pub fn new(config: &ModelConfig) -> Self {
        ReducedIntegrator {
            forcing: config.forcing,
            dt: config.dt_reduced,
            tendency: vec![0.0; config.k],
            mid: vec![0.0; config.k],
        }
    }

    /// `x' = x + dt/2 (R(x) + b)`, then `x <- x + dt (R(x') + b)`.
    pub fn step(&mut self, x: &mut [f64], b: &[f64], step_index: u64) -> Result<()> {
        let half = 0.5 * self.dt;
        resolved_tendency(x, self.forcing, &mut self.tendency);
        for i in 0..x.len() {
            self.mid[i] = x[i] + half * (self.tendency[i] + b[i]);
        }
        resolved_tendency(&self.mid, self.forcing, &mut self.tendency);
        for i in 0..x.len() {
            x[i] += self.dt * (self.tendency[i] + b[i]);
        }
        if let Some((i, v)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= DIVERGENCE_BOUND))
        {
            return Err(Error::Divergence {
                step: step_index,
                time: (step_index + 1) as f64 * self.dt,
                detail: format!("x[{i}] = {v}"),
            });
        }
        Ok(())
    }
}

/// One reduced step with `dt_reduced`.
pub fn rk2_step_reduced(x: &[f64], b: &[f64], config: &ModelConfig) -> Result<Vec<f64>> {
    if x.len() != config.k || b.len() != config.k {
        return Err(Error::Config(format!(
            "expected {} values, got x: {} and b: {}",
            config.k,
            x.len(),
            b.len()
        )));
    }
    if x.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::State("reduced step needs finite inputs".into()));
    }
    let mut next = x.to_vec();
    ReducedIntegrator::new(config).step(&mut next, b, 0)?;
    Ok(next)
}

/// The initial block of a reduced run: `history_len + 1` consecutive rows.
/// The `b` rows before the last seed the surrogate memory; the last `x` row
/// is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: RowMatrix,
    pub b: RowMatrix,
}

impl WarmStart {
    /// Last `history_len + 1` rows of a reference series.
    pub fn from_reference(series: &SampleSeries, param: &Parameterization) -> Result<Self> {
        let need = param.history_len() + 1;
        if series.len() < need {
            return Err(Error::State(format!(
                "warm start for {} needs {need} reference rows, got {}",
                param.label(),
                series.len()
            )));
        }
        let tail = series.tail(need);
        Ok(WarmStart {
            x: tail.x,
            b: tail.b,
        })
    }

    /// All-zero history of the right length.
    pub fn zeros(k: usize, param: &Parameterization) -> Self {
        let rows = param.history_len() + 1;
        WarmStart {
            x: RowMatrix::zeros(rows, k),
            b: RowMatrix::zeros(rows, k),
        }
    }

    fn rows(&self) -> usize {
        self.x.rows()
    }
}

enum Memory {
    Lags(LagBuffer),
    Narmax(NarmaxHistory),
    None,
}

/// Integrates the reduced model for `n_steps`, recording `(x, b)` before
/// each step. Row `n` holds the state and the surrogate output that drives
/// the step from `n` to `n + 1`.
pub fn simulate_reduced(
    config: &ModelConfig,
    param: &Parameterization,
    init: &WarmStart,
    seed: u64,
    n_steps: usize,
) -> Result<ReducedTrajectory> {
    config.validate()?;
    param.validate(config.k)?;
    let k = config.k;
    let need = param.history_len() + 1;
    if init.rows() != need || init.x.cols() != k || init.b.cols() != k {
        return Err(Error::State(format!(
            "warm start must be {need} x {k}, got {} x {}",
            init.rows(),
            init.x.cols()
        )));
    }
    let mut warnings = Vec::new();
    if param.stable()? == Some(false) {
        warnings.push(format!(
            "{} is unstable: companion spectral radius is at least 1",
            param.label()
        ));
    }
    let history = (0..need - 1).map(|r| init.b.row(r));
    let mut memory = match param {
        Parameterization::Varx(m) => {
            Memory::Lags(LagBuffer::seeded(m.spec.history_len(), k, history)?)
        }
        Parameterization::Narmax(_) => Memory::Narmax(NarmaxHistory {
            z_prev: init.b.row(0).to_vec(),
            x_prev: init.x.row(0).to_vec(),
            xi_prev: vec![0.0; k],
        }),
        Parameterization::Unresolved => Memory::None,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut integrator = ReducedIntegrator::new(config);
    let mut x = init.x.row(need - 1).to_vec();
    let mut b = vec![0.0; k];
    let mut xi = vec![0.0; k];
    let mut xs = RowMatrix::with_capacity(n_steps, k);
    let mut bs = RowMatrix::with_capacity(n_steps, k);
    for n in 0..n_steps {
        if param.is_stochastic() {
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
        }
        match (param, &mut memory) {
            (Parameterization::Varx(m), Memory::Lags(lags)) => {
                m.step_into(lags, &x, &xi, &mut b)?;
                lags.push(&b);
            }
            (Parameterization::Narmax(m), Memory::Narmax(h)) => {
                narmax_step_grid(m, h, &x, config.forcing, &xi, &mut b)?;
            }
            _ => {}
        }
        xs.push_row(&x);
        bs.push_row(&b);
        integrator.step(&mut x, &b, n as u64)?;
    }
    Ok(ReducedTrajectory {
        x: xs,
        b: bs,
        seed,
        model_id: param.id(),
        model_label: param.label(),
        generator: GENERATOR.to_string(),
        dt: config.dt_reduced,
        config_id: config.hash(),
        warnings,
    })
}
