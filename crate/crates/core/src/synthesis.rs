//! Controller design: feedback gains, regulator solutions and observer gains,
//! either from collected data or from known models.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datagen::DataRecord;
use crate::error::{Condition, Error, Result};
use crate::formats::{rows, rows_opt};
use crate::informativity::{
    build_leader_stab_data, build_follower_stab_data, data_regulator_residual,
    right_inverse_from_theta, solve_data_regulator, StabData, ThetaParam,
};
use crate::matops::{
    complex_embedding, max_abs, pbh_stabilizable, solve_linear_ls, spectral_radius,
    stabilizing_feedback, unvectorize, Complex64, Mat, Tolerances,
};
use crate::netgraph::{build_partition, check_lemma1, follower_coupling, FollowerCoupling};
use crate::plant::{validate_scenario, AgentModel, ExoSystem, Role, Scenario};

/// Regulator solution `(Pi, Gamma)`, with `M` in data mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatorSolution {
    #[serde(rename = "M", with = "rows_opt", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Mat>,
    #[serde(rename = "Pi", with = "rows")]
    pub pi: Mat,
    #[serde(rename = "Gamma", with = "rows")]
    pub gamma: Mat,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Data,
    Model,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Data => "data",
            Mode::Model => "model",
        })
    }
}

fn stab_conditions(role: Role) -> (Condition, Condition) {
    match role {
        Role::Leader => (Condition::Ia, Condition::Ib),
        Role::Follower => (Condition::IIa, Condition::IIb),
    }
}

fn design_k(sd: &StabData, r: &DataRecord, tol: &Tolerances) -> Result<(Mat, f64)> {
    let (rank_cond, stab_cond) = stab_conditions(r.role);
    if !sd.rank_ok() {
        return Err(Error::NotInformative {
            agent: r.agent_index,
            condition: rank_cond,
            detail: format!("rank {} instead of {}", sd.rank_psi, sd.n + sd.rank_y0),
        });
    }
    if !pbh_stabilizable(&sd.g, &sd.f, tol)? {
        return Err(Error::NotInformative {
            agent: r.agent_index,
            condition: stab_cond,
            detail: "(G, F) is not stabilizable".into(),
        });
    }
    let theta = stabilizing_feedback(&sd.g, &sd.f, tol)?;
    let x = right_inverse_from_theta(sd, &ThetaParam::from_gain(sd, &theta)?)?;
    let radius = spectral_radius(&(&r.xf * &x))?;
    if radius > 1.0 - tol.schur_margin {
        return Err(Error::NotStabilizable(format!(
            "Xf X# has spectral radius {radius:.6}"
        )));
    }
    let y0_leak = max_abs(&(&r.y0p * &x));
    let y0_scale = max_abs(&r.y0p).max(1.0) * max_abs(&x).max(1.0);
    if r.role == Role::Leader && y0_leak > tol.residual_abs * y0_scale {
        return Err(Error::NotStabilizable(format!(
            "Y0p X# = {y0_leak:.3e} is not zero"
        )));
    }
    Ok((&r.up * &x, radius))
}

/// `K = Up X#` with `X#` the right inverse picked by the Riccati design on
/// `(G, F)`. Returns `K` and the spectral radius of `Xf X#`.
pub fn design_k_leader(r: &DataRecord, tol: &Tolerances) -> Result<(Mat, f64)> {
    if r.role != Role::Leader {
        return Err(Error::InvalidInput(format!("agent {} is not a leader", r.agent_index)));
    }
    design_k(&build_leader_stab_data(r, tol), r, tol)
}

pub fn design_k_follower(r: &DataRecord, tol: &Tolerances) -> Result<(Mat, f64)> {
    if r.role != Role::Follower {
        return Err(Error::InvalidInput(format!("agent {} is not a follower", r.agent_index)));
    }
    design_k(&build_follower_stab_data(r, tol), r, tol)
}

fn solve_regulator_dd(r: &DataRecord, exo: &ExoSystem, tol: &Tolerances, cond: Condition) -> Result<RegulatorSolution> {
    let (m, residual) = solve_data_regulator(r, exo, tol)?;
    if residual > tol.residual_abs {
        return Err(Error::Infeasible {
            agent: r.agent_index,
            condition: cond,
            residual,
        });
    }
    Ok(RegulatorSolution {
        pi: &r.xp * &m,
        gamma: &r.up * &m,
        m: Some(m),
        residual,
    })
}

pub fn solve_regulator_leader_dd(r: &DataRecord, exo: &ExoSystem, tol: &Tolerances) -> Result<RegulatorSolution> {
    if r.role != Role::Leader {
        return Err(Error::InvalidInput(format!("agent {} is not a leader", r.agent_index)));
    }
    solve_regulator_dd(r, exo, tol, Condition::Ic)
}

pub fn solve_regulator_follower_dd(r: &DataRecord, exo: &ExoSystem, tol: &Tolerances) -> Result<RegulatorSolution> {
    if r.role != Role::Follower {
        return Err(Error::InvalidInput(format!("agent {} is not a follower", r.agent_index)));
    }
    solve_regulator_dd(r, exo, tol, Condition::IIc)
}

/// Residuals `(state, output)` of `A Pi + B Gamma + E R = Pi S` and
/// `C Pi + D Gamma + F R = R` (without `E`, `F` for followers).
pub fn model_regulator_residuals(a: &AgentModel, exo: &ExoSystem, pi: &Mat, gamma: &Mat) -> (f64, f64) {
    let mut state = &a.a * pi + &a.b * gamma - pi * &exo.s;
    let mut output = &a.c * pi + &a.d * gamma - &exo.r;
    if let Some(inj) = &a.injection {
        state += &inj.e * &exo.r;
        output += &inj.f * &exo.r;
    }
    (max_abs(&state), max_abs(&output))
}

/// Minimal-norm `(Pi, Gamma)` from the model regulator equations. The agent
/// label in a returned error is 0; callers relabel with [`Error::at_agent`].
pub fn solve_regulator_model(a: &AgentModel, exo: &ExoSystem, tol: &Tolerances) -> Result<RegulatorSolution> {
    let (n, m, p, n0) = (a.n(), a.m(), exo.p(), exo.n0());
    let id0 = Mat::identity(n0, n0);
    let idn = Mat::identity(n, n);
    let mut coeff = Mat::zeros(n * n0 + p * n0, n * n0 + m * n0);
    coeff
        .view_mut((0, 0), (n * n0, n * n0))
        .copy_from(&(id0.kronecker(&a.a) - exo.s.transpose().kronecker(&idn)));
    coeff
        .view_mut((0, n * n0), (n * n0, m * n0))
        .copy_from(&id0.kronecker(&a.b));
    coeff
        .view_mut((n * n0, 0), (p * n0, n * n0))
        .copy_from(&id0.kronecker(&a.c));
    coeff
        .view_mut((n * n0, n * n0), (p * n0, m * n0))
        .copy_from(&id0.kronecker(&a.d));
    let (state_rhs, out_rhs) = match &a.injection {
        Some(inj) => (-(&inj.e * &exo.r), &exo.r - &inj.f * &exo.r),
        None => (Mat::zeros(n, n0), exo.r.clone()),
    };
    let mut rhs = Mat::zeros(n * n0 + p * n0, 1);
    rhs.rows_mut(0, n * n0)
        .copy_from(&crate::matops::vectorize(&state_rhs));
    rhs.rows_mut(n * n0, p * n0)
        .copy_from(&crate::matops::vectorize(&out_rhs));
    let (sol, _) = solve_linear_ls(&coeff, &rhs, tol)?;
    let sol = sol.column(0).into_owned();
    let pi = unvectorize(&sol.rows(0, n * n0).into_owned(), n, n0);
    let gamma = unvectorize(&sol.rows(n * n0, m * n0).into_owned(), m, n0);
    let (rs, ro) = model_regulator_residuals(a, exo, &pi, &gamma);
    let residual = rs.max(ro);
    if residual > tol.residual_abs {
        return Err(Error::Infeasible {
            agent: 0,
            condition: match a.role() {
                Role::Leader => Condition::ModelLeaderRegulator,
                Role::Follower => Condition::ModelFollowerRegulator,
            },
            residual,
        });
    }
    Ok(RegulatorSolution {
        m: None,
        pi,
        gamma,
        residual,
    })
}

/// `L = K'` with `K` the Riccati gain for `(S', R')`, so `S + L R` is Schur.
pub fn design_observer_l(exo: &ExoSystem, tol: &Tolerances) -> Result<(Mat, f64)> {
    let k = stabilizing_feedback(&exo.s.transpose(), &exo.r.transpose(), tol)?;
    let l = k.transpose();
    let radius = spectral_radius(&(&exo.s + &l * &exo.r))?;
    Ok((l, radius))
}

/// Spectral radius of `S - lambda H R` for complex `lambda`.
pub fn coupled_radius(exo: &ExoSystem, h: &Mat, lambda: Complex64) -> f64 {
    let hr = h * &exo.r;
    let re = &exo.s - &hr * lambda.re;
    if lambda.im == 0.0 {
        return spectral_radius(&re).unwrap_or(f64::INFINITY);
    }
    let im = -(&hr * lambda.im);
    spectral_radius(&complex_embedding(&re, &im)).unwrap_or(f64::INFINITY)
}

/// Radii of `S - lambda_k H R` over the coupling spectrum.
pub fn coupled_radii(exo: &ExoSystem, h: &Mat, lambdas: &[Complex64]) -> Vec<f64> {
    lambdas.iter().map(|&l| coupled_radius(exo, h, l)).collect()
}

fn worst(radii: &[f64]) -> f64 {
    radii.iter().fold(0.0_f64, |a, &r| if r.is_nan() { f64::INFINITY } else { a.max(r) })
}

const H_STARTS: usize = 32;
const H_SEED: u64 = 0x5eed_0b5e;

/// Downhill simplex minimization from `x0` with initial step `step`.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[d] - vals[0];
        let diam = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() < 1e-12 && diam < 1e-10 {
            break;
        }
        let mut centroid = vec![0.0; d];
        for x in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let worst_pt = simplex[d].clone();
        let reflected = combine(&centroid, &worst_pt, -1.0);
        let fr = f(&reflected);
        if fr < vals[0] {
            let expanded = combine(&centroid, &worst_pt, -2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[d] = expanded;
                vals[d] = fe;
            } else {
                simplex[d] = reflected;
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            simplex[d] = reflected;
            vals[d] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[d] {
            let c = combine(&centroid, &reflected, 0.5);
            let v = f(&c);
            (c, v)
        } else {
            let c = combine(&centroid, &worst_pt, 0.5);
            let v = f(&c);
            (c, v)
        };
        if fc < vals[d].min(fr) {
            simplex[d] = contracted;
            vals[d] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=d {
            simplex[i] = combine(&best, &simplex[i], 0.5);
            vals[i] = f(&simplex[i]);
        }
    }
    let (i, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty simplex");
    (simplex[i].clone(), vals[i])
}

fn search_h(
    exo: &ExoSystem,
    lambdas: &[Complex64],
    dim: usize,
    to_h: &dyn Fn(&[f64]) -> Mat,
    rng: &mut ChaCha8Rng,
    target: f64,
) -> Option<(Mat, f64)> {
    let scale = exo.s.norm().max(1e-3) / exo.r.norm().max(1e-3);
    let objective = |x: &[f64]| worst(&coupled_radii(exo, &to_h(x), lambdas));
    for _ in 0..H_STARTS {
        let x0: Vec<f64> = (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let (x, fx) = nelder_mead(&objective, &x0, 0.5 * scale, 400 * (dim + 1));
        if fx < target {
            return Some((to_h(&x), fx));
        }
    }
    None
}

/// `H` with every `S - lambda_k H R` Schur, found by multi-start simplex
/// search on the worst radius, then a rank-one `H = q v'` search if that
/// fails. The returned `H` has been verified on every eigenvalue.
pub fn design_observer_h(exo: &ExoSystem, coupling: &FollowerCoupling, tol: &Tolerances) -> Result<(Mat, f64)> {
    if !check_lemma1(coupling, tol) {
        return Err(Error::DesignFailed(
            "coupling spectrum has an eigenvalue at 0 or outside the disk |z - 1| < 1".into(),
        ));
    }
    let lambdas = &coupling.spectrum.eigenvalues;
    let (n0, p) = (exo.n0(), exo.p());
    let target = 1.0 - tol.schur_margin;
    let mut rng = ChaCha8Rng::seed_from_u64(H_SEED);

    let full = |x: &[f64]| Mat::from_column_slice(n0, p, x);
    let found = search_h(exo, lambdas, n0 * p, &full, &mut rng, target).or_else(|| {
        let v = crate::matops::Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let rank_one = move |x: &[f64]| Mat::from_column_slice(n0, 1, x) * v.transpose();
        search_h(exo, lambdas, n0, &rank_one, &mut rng, target)
    });
    let (h, _) = found.ok_or_else(|| {
        Error::DesignFailed(format!(
            "no H with all coupled radii below {target} after {} starts",
            2 * H_STARTS
        ))
    })?;
    let radius = worst(&coupled_radii(exo, &h, lambdas));
    if radius >= target {
        return Err(Error::DesignFailed(format!("verification gave radius {radius}")));
    }
    Ok((h, radius))
}

/// Designed controller of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentController {
    /// 1-based agent label.
    pub agent_index: usize,
    pub role: Role,
    #[serde(rename = "K", with = "rows")]
    pub k: Mat,
    pub regulator: RegulatorSolution,
    /// `rho(Xf X#)` in data mode, `rho(A + B K)` in model mode.
    pub design_radius: f64,
    /// `rho(A + B K)` for the scenario's model.
    pub true_radius: f64,
    /// Largest model regulator equation violation at `(Pi, Gamma)`.
    pub model_residual: f64,
}

/// Everything the closed loop needs, with certified margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSet {
    pub mode: Mode,
    pub agents: Vec<AgentController>,
    #[serde(rename = "L", with = "rows")]
    pub l: Mat,
    #[serde(rename = "H", with = "rows")]
    pub h: Mat,
    /// `rho(S + L R)`.
    pub observer_l_radius: f64,
    /// `rho(S - lambda_k H R)` per coupling eigenvalue.
    pub observer_h_radii: Vec<f64>,
    pub tolerances: Tolerances,
}

impl ControllerSet {
    pub fn observer_h_radius(&self) -> f64 {
        worst(&self.observer_h_radii)
    }

    /// Largest of all certified radii.
    pub fn worst_margin(&self) -> f64 {
        self.agents
            .iter()
            .flat_map(|a| [a.design_radius, a.true_radius])
            .fold(self.observer_l_radius.max(self.observer_h_radius()), f64::max)
    }

    /// Dimension agreement with a scenario.
    pub fn check_against(&self, s: &Scenario) -> Result<()> {
        let (n0, p) = (s.exo.n0(), s.exo.p());
        if self.agents.len() != s.n_agents() {
            return Err(Error::Dimension(format!(
                "controllers cover {} agents, scenario has {}",
                self.agents.len(),
                s.n_agents()
            )));
        }
        if self.l.shape() != (n0, p) || self.h.shape() != (n0, p) {
            return Err(Error::Dimension(format!("L and H must be {n0}x{p}")));
        }
        for (c, a) in self.agents.iter().zip(&s.agents) {
            let ok = c.role == a.role()
                && c.k.shape() == (a.m(), a.n())
                && c.regulator.pi.shape() == (a.n(), n0)
                && c.regulator.gamma.shape() == (a.m(), n0);
            if !ok {
                return Err(Error::Dimension(format!(
                    "controller for agent {} does not match its model",
                    c.agent_index
                )));
            }
        }
        Ok(())
    }
}

fn design_agent_data(a: &AgentModel, r: &DataRecord, exo: &ExoSystem, tol: &Tolerances) -> Result<AgentController> {
    let label = r.agent_index;
    let (_, stab_cond) = stab_conditions(r.role);
    let wrap = |e: Error| match e {
        Error::NotStabilizable(detail) => Error::Synthesis {
            agent: label,
            condition: stab_cond,
            detail,
        },
        other => other,
    };
    let (k, design_radius) = match r.role {
        Role::Leader => design_k_leader(r, tol),
        Role::Follower => design_k_follower(r, tol),
    }
    .map_err(wrap)?;
    let regulator = match r.role {
        Role::Leader => solve_regulator_leader_dd(r, exo, tol)?,
        Role::Follower => solve_regulator_follower_dd(r, exo, tol)?,
    };
    debug_assert!(data_regulator_residual(r, exo, regulator.m.as_ref().expect("data mode")) <= tol.residual_abs);
    // post-hoc checks against the generating model
    let true_radius = spectral_radius(&(&a.a + &a.b * &k))?;
    if true_radius > 1.0 - tol.schur_margin {
        return Err(Error::Synthesis {
            agent: label,
            condition: stab_cond,
            detail: format!("data-driven gain leaves A + B K with radius {true_radius:.6}"),
        });
    }
    let (rs, ro) = model_regulator_residuals(a, exo, &regulator.pi, &regulator.gamma);
    Ok(AgentController {
        agent_index: label,
        role: r.role,
        k,
        regulator,
        design_radius,
        true_radius,
        model_residual: rs.max(ro),
    })
}

fn design_agent_model(a: &AgentModel, label: usize, exo: &ExoSystem, tol: &Tolerances) -> Result<AgentController> {
    let k = stabilizing_feedback(&a.a, &a.b, tol).map_err(|e| Error::Synthesis {
        agent: label,
        condition: Condition::ModelStabilizable,
        detail: e.to_string(),
    })?;
    let regulator = solve_regulator_model(a, exo, tol).map_err(|e| e.at_agent(label))?;
    let radius = spectral_radius(&(&a.a + &a.b * &k))?;
    Ok(AgentController {
        agent_index: label,
        role: a.role(),
        k,
        model_residual: regulator.residual,
        regulator,
        design_radius: radius,
        true_radius: radius,
    })
}

/// Designs the full controller set. In data mode the agent models are used
/// only to verify the data-driven designs.
pub fn synthesize(s: &Scenario, records: Option<&[DataRecord]>, mode: Mode, tol: &Tolerances) -> Result<ControllerSet> {
    tol.validate()?;
    let violations = validate_scenario(s, tol);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidInput(msgs.join("; ")));
    }
    let mut agents = Vec::with_capacity(s.n_agents());
    match mode {
        Mode::Data => {
            let records = records.ok_or_else(|| Error::InvalidInput("data mode needs records".into()))?;
            if records.len() != s.n_agents() {
                return Err(Error::Dimension(format!(
                    "{} records for {} agents",
                    records.len(),
                    s.n_agents()
                )));
            }
            for (a, r) in s.agents.iter().zip(records) {
                if r.role != a.role() || r.n() != a.n() || r.m() != a.m() {
                    return Err(Error::Dimension(format!(
                        "record for agent {} does not match its model",
                        r.agent_index
                    )));
                }
                agents.push(design_agent_data(a, r, &s.exo, tol)?);
            }
        }
        Mode::Model => {
            for (i, a) in s.agents.iter().enumerate() {
                agents.push(design_agent_model(a, i + 1, &s.exo, tol)?);
            }
        }
    }

    let (l, observer_l_radius) = design_observer_l(&s.exo, tol).map_err(|e| Error::Observer {
        condition: Condition::ObserverL,
        detail: e.to_string(),
    })?;
    let (h, observer_h_radii) = if s.graph.n_followers() == 0 {
        (Mat::zeros(s.exo.n0(), s.exo.p()), Vec::new())
    } else {
        let coupling = follower_coupling(&build_partition(&s.graph))?;
        let (h, _) = design_observer_h(&s.exo, &coupling, tol).map_err(|e| Error::Observer {
            condition: Condition::ObserverH,
            detail: e.to_string(),
        })?;
        let radii = coupled_radii(&s.exo, &h, &coupling.spectrum.eigenvalues);
        (h, radii)
    };
    Ok(ControllerSet {
        mode,
        agents,
        l,
        h,
        observer_l_radius,
        observer_h_radii,
        tolerances: *tol,
    })
}
