//! Offline data collection from simulated plants under random excitation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::rows;
use crate::matops::{Mat, Tolerances, Vector};
use crate::plant::{step_agent, step_exo, validate_scenario, Role, Scenario};

/// Input/state/output samples of one agent over a horizon of `T` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRecord {
    /// 1-based agent label.
    pub agent_index: usize,
    pub role: Role,
    pub horizon: usize,
    #[serde(rename = "Y0p", with = "rows")]
    pub y0p: Mat,
    #[serde(rename = "Up", with = "rows")]
    pub up: Mat,
    #[serde(rename = "Xp", with = "rows")]
    pub xp: Mat,
    #[serde(rename = "Xf", with = "rows")]
    pub xf: Mat,
    #[serde(rename = "Yp", with = "rows")]
    pub yp: Mat,
}

impl DataRecord {
    pub fn n(&self) -> usize {
        self.xp.nrows()
    }

    pub fn m(&self) -> usize {
        self.up.nrows()
    }

    pub fn p(&self) -> usize {
        self.yp.nrows()
    }

    /// Checks that every block has `horizon` columns and consistent rows.
    pub fn check_shape(&self) -> Result<()> {
        let t = self.horizon;
        let blocks = [
            ("Y0p", &self.y0p),
            ("Up", &self.up),
            ("Xp", &self.xp),
            ("Xf", &self.xf),
            ("Yp", &self.yp),
        ];
        for (name, b) in blocks {
            if b.ncols() != t {
                return Err(Error::Dimension(format!(
                    "agent {}: {name} has {} columns, horizon is {t}",
                    self.agent_index,
                    b.ncols()
                )));
            }
        }
        if self.xf.nrows() != self.xp.nrows() {
            return Err(Error::Dimension(format!(
                "agent {}: Xf has {} rows, Xp has {}",
                self.agent_index,
                self.xf.nrows(),
                self.xp.nrows()
            )));
        }
        if self.y0p.nrows() != self.yp.nrows() {
            return Err(Error::Dimension(format!(
                "agent {}: Y0p has {} rows, Yp has {}",
                self.agent_index,
                self.y0p.nrows(),
                self.yp.nrows()
            )));
        }
        Ok(())
    }

    /// First `t` columns of every block.
    pub fn truncated(&self, t: usize) -> DataRecord {
        let t = t.min(self.horizon);
        DataRecord {
            horizon: t,
            y0p: self.y0p.columns(0, t).into_owned(),
            up: self.up.columns(0, t).into_owned(),
            xp: self.xp.columns(0, t).into_owned(),
            xf: self.xf.columns(0, t).into_owned(),
            yp: self.yp.columns(0, t).into_owned(),
            ..self.clone()
        }
    }
}

/// Collection settings. Scales are standard deviations of zero-mean
/// Gaussian samples; `exo_scale` drives the exosystem initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationConfig {
    pub seed: u64,
    pub horizon: usize,
    pub input_scale: f64,
    pub state_scale: f64,
    pub exo_scale: f64,
}

impl ExcitationConfig {
    pub fn new(seed: u64, horizon: usize) -> Self {
        Self {
            seed,
            horizon,
            input_scale: 1.0,
            state_scale: 1.0,
            exo_scale: 1.0,
        }
    }

    /// Uses [`default_horizon`] for `s`.
    pub fn for_scenario(seed: u64, s: &Scenario) -> Self {
        Self::new(seed, default_horizon(s))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        for (name, v) in [
            ("input_scale", self.input_scale),
            ("state_scale", self.state_scale),
            ("exo_scale", self.exo_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// `max_i(n_i + m_i + p) + 2`.
pub fn default_horizon(s: &Scenario) -> usize {
    let p = s.exo.p();
    s.agents.iter().map(|a| a.n() + a.m() + p).max().unwrap_or(0) + 2
}

/// Records of a collection run, as stored in data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSet {
    pub seed: u64,
    pub horizon: usize,
    pub records: Vec<DataRecord>,
}

impl DataSet {
    /// Shape checks plus agreement of roles and dimensions with `s`.
    pub fn check_against(&self, s: &Scenario) -> Result<()> {
        if self.records.len() != s.n_agents() {
            return Err(Error::Dimension(format!(
                "data has {} records, scenario has {} agents",
                self.records.len(),
                s.n_agents()
            )));
        }
        for (i, (r, a)) in self.records.iter().zip(&s.agents).enumerate() {
            r.check_shape()?;
            if r.agent_index != i + 1 || r.role != a.role() {
                return Err(Error::Dimension(format!(
                    "record {} is agent {} ({}), scenario agent {} is a {}",
                    i + 1,
                    r.agent_index,
                    r.role,
                    i + 1,
                    a.role()
                )));
            }
            if r.horizon != self.horizon {
                return Err(Error::Dimension(format!(
                    "agent {}: horizon {} differs from data set horizon {}",
                    i + 1,
                    r.horizon,
                    self.horizon
                )));
            }
            check_dims(s, i, r)?;
        }
        Ok(())
    }
}

fn check_dims(s: &Scenario, agent: usize, r: &DataRecord) -> Result<()> {
    let a = &s.agents[agent];
    if r.n() != a.n() || r.m() != a.m() || r.p() != s.exo.p() || r.y0p.nrows() != s.exo.p() {
        return Err(Error::Dimension(format!(
            "agent {}: record is (n, m, p) = ({}, {}, {}), model is ({}, {}, {})",
            r.agent_index,
            r.n(),
            r.m(),
            r.p(),
            a.n(),
            a.m(),
            s.exo.p()
        )));
    }
    Ok(())
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vector {
    Vector::from_fn(len, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    })
}

/// Simulates every agent over `cfg.horizon` steps.
///
/// The exosystem is rolled out once on ChaCha stream 0 and shared by all
/// agents; agent `i` (0-based) draws its initial state and inputs from
/// stream `i + 1`.
pub fn collect(s: &Scenario, cfg: &ExcitationConfig, tol: &Tolerances) -> Result<DataSet> {
    cfg.validate()?;
    let violations = validate_scenario(s, tol);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidInput(msgs.join("; ")));
    }
    let t_len = cfg.horizon;
    let p = s.exo.p();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let mut x0 = gaussian(&mut rng, s.exo.n0(), cfg.exo_scale);
    let mut y0p = Mat::zeros(p, t_len);
    for t in 0..t_len {
        let (next, y0) = step_exo(&s.exo, &x0)?;
        y0p.set_column(t, &y0);
        x0 = next;
    }

    let mut records = Vec::with_capacity(s.n_agents());
    for (i, a) in s.agents.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);
        let mut x = gaussian(&mut rng, a.n(), cfg.state_scale);
        let mut rec = DataRecord {
            agent_index: i + 1,
            role: a.role(),
            horizon: t_len,
            y0p: y0p.clone(),
            up: Mat::zeros(a.m(), t_len),
            xp: Mat::zeros(a.n(), t_len),
            xf: Mat::zeros(a.n(), t_len),
            yp: Mat::zeros(p, t_len),
        };
        for t in 0..t_len {
            let u = gaussian(&mut rng, a.m(), cfg.input_scale);
            let y0 = y0p.column(t).into_owned();
            let (next, y) = step_agent(a, &x, &u, &y0)?;
            rec.xp.set_column(t, &x);
            rec.up.set_column(t, &u);
            rec.xf.set_column(t, &next);
            rec.yp.set_column(t, &y);
            x = next;
        }
        records.push(rec);
    }
    Ok(DataSet {
        seed: cfg.seed,
        horizon: t_len,
        records,
    })
}

/// Largest entry of `[Xf; Yp] - [[A, B, E], [C, D, F]] [Xp; Up; Y0p]` for the
/// agent at 0-based position `agent` (without the E, F, Y0p terms for
/// followers).
pub fn consistency_residual(s: &Scenario, agent: usize, r: &DataRecord) -> Result<f64> {
    let a = s
        .agents
        .get(agent)
        .ok_or_else(|| Error::Dimension(format!("no agent at position {agent}")))?;
    r.check_shape()?;
    check_dims(s, agent, r)?;
    let mut worst = 0.0f64;
    for t in 0..r.horizon {
        let (next, y) = step_agent(
            a,
            &r.xp.column(t).into_owned(),
            &r.up.column(t).into_owned(),
            &r.y0p.column(t).into_owned(),
        )?;
        worst = worst
            .max((next - r.xf.column(t)).amax())
            .max((y - r.yp.column(t)).amax());
    }
    Ok(worst)
}

/// True iff the scenario's model of agent `agent` reproduces the record
/// within `residual_abs`.
pub fn verify_consistency(s: &Scenario, agent: usize, r: &DataRecord, tol: &Tolerances) -> Result<bool> {
    Ok(consistency_residual(s, agent, r)? <= tol.residual_abs)
}
