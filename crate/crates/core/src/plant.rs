//! Exosystem and agent state-space models.
//!
//! Leaders see the exosystem output directly (`E`, `F` terms); followers
//! do not, and carry no such matrices at all.

use std::fmt;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::matops::{rank, spectrum, Mat, Tolerances, Vector};
use crate::netgraph::{unreachable_agents, NetworkGraph};

/// Pairwise eigenvalue separation below which two eigenvalues of `S` count
/// as repeated.
pub const SIMPLE_EIGENVALUE_SEPARATION: f64 = 1e-6;
/// Allowed deviation of `|lambda|` from 1 for eigenvalues of `S`.
pub const UNIT_MODULUS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ExoSystem {
    pub s: Mat,
    pub r: Mat,
}

impl ExoSystem {
    pub fn new(s: Mat, r: Mat) -> Result<Self> {
        if s.nrows() != s.ncols() || s.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "exosystem S must be square and nonempty, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        if r.ncols() != s.nrows() || r.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "exosystem R is {}x{}, expected p x {}",
                r.nrows(),
                r.ncols(),
                s.nrows()
            )));
        }
        Ok(Self { s, r })
    }

    pub fn n0(&self) -> usize {
        self.s.nrows()
    }

    pub fn p(&self) -> usize {
        self.r.nrows()
    }

    /// `[R; RS; ...; RS^(n0-1)]`
    pub fn observability_matrix(&self) -> Mat {
        let n0 = self.n0();
        let p = self.p();
        let mut out = Mat::zeros(p * n0, n0);
        let mut block = self.r.clone();
        for k in 0..n0 {
            out.view_mut((k * p, 0), (p, n0)).copy_from(&block);
            block = &block * &self.s;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Leader,
    Follower,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
        })
    }
}

/// Direct exosystem-output injection of a leader: `E y0` into the state,
/// `F y0` into the output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoInjection {
    pub e: Mat,
    pub f: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    /// Present exactly for leaders.
    pub injection: Option<ExoInjection>,
}

impl AgentModel {
    pub fn follower(a: Mat, b: Mat, c: Mat, d: Mat) -> Self {
        Self {
            a,
            b,
            c,
            d,
            injection: None,
        }
    }

    pub fn leader(a: Mat, b: Mat, c: Mat, d: Mat, e: Mat, f: Mat) -> Self {
        Self {
            a,
            b,
            c,
            d,
            injection: Some(ExoInjection { e, f }),
        }
    }

    pub fn role(&self) -> Role {
        if self.injection.is_some() {
            Role::Leader
        } else {
            Role::Follower
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Dimension problems against an exosystem output of size `p`.
    pub fn dimension_issues(&self, p: usize) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.a.nrows();
        let m = self.b.ncols();
        let mut expect = |name: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                out.push(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                ));
            }
        };
        expect("A", self.a.shape(), (n, n));
        expect("B", self.b.shape(), (n, m));
        expect("C", self.c.shape(), (p, n));
        expect("D", self.d.shape(), (p, m));
        if let Some(inj) = &self.injection {
            expect("E", inj.e.shape(), (n, p));
            expect("F", inj.f.shape(), (p, p));
        }
        if n == 0 {
            out.push("state dimension must be at least 1".into());
        }
        if m == 0 {
            out.push("input dimension must be at least 1".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub exo: ExoSystem,
    pub agents: Vec<AgentModel>,
    pub graph: NetworkGraph,
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_leaders(&self) -> usize {
        self.graph.n_leaders()
    }
}

/// A failed assumption or structural check.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Assumption 1: an eigenvalue of `S` is off the unit circle.
    OffUnitCircle { eigenvalue: Complex<f64> },
    /// Assumption 1: two eigenvalues of `S` coincide.
    RepeatedEigenvalue { eigenvalue: Complex<f64> },
    /// Assumption 2: `(R, S)` is not observable.
    Unobservable { rank: usize, n0: usize },
    /// Assumption 3: some agents cannot be reached from the exosystem node.
    NoRootedSpanningTree { unreachable: Vec<usize> },
    /// Dimension or role inconsistency; `agent` is 1-based when present.
    Structural { agent: Option<usize>, detail: String },
}

impl Violation {
    pub fn assumption(&self) -> &'static str {
        match self {
            Violation::OffUnitCircle { .. } | Violation::RepeatedEigenvalue { .. } => {
                "Assumption 1"
            }
            Violation::Unobservable { .. } => "Assumption 2",
            Violation::NoRootedSpanningTree { .. } => "Assumption 3",
            Violation::Structural { .. } => "structure",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OffUnitCircle { eigenvalue } => write!(
                f,
                "Assumption 1: eigenvalue {:.6}{:+.6}i of S has modulus {:.6}, not 1",
                eigenvalue.re,
                eigenvalue.im,
                eigenvalue.norm()
            ),
            Violation::RepeatedEigenvalue { eigenvalue } => write!(
                f,
                "Assumption 1: eigenvalue {:.6}{:+.6}i of S is repeated",
                eigenvalue.re, eigenvalue.im
            ),
            Violation::Unobservable { rank, n0 } => write!(
                f,
                "Assumption 2: (R, S) unobservable, observability rank {rank} < {n0}"
            ),
            Violation::NoRootedSpanningTree { unreachable } => {
                let labels: Vec<String> = unreachable.iter().map(|i| (i + 1).to_string()).collect();
                write!(
                    f,
                    "Assumption 3: agents {} are unreachable from the exosystem node",
                    labels.join(", ")
                )
            }
            Violation::Structural { agent: Some(i), detail } => {
                write!(f, "structure: agent {i}: {detail}")
            }
            Violation::Structural { agent: None, detail } => write!(f, "structure: {detail}"),
        }
    }
}

pub fn validate_exosystem(e: &ExoSystem, tol: &Tolerances) -> Vec<Violation> {
    let mut out = Vec::new();
    let spec = match spectrum(&e.s) {
        Ok(s) => s,
        Err(err) => {
            out.push(Violation::Structural {
                agent: None,
                detail: format!("exosystem S: {err}"),
            });
            return out;
        }
    };
    for z in &spec.eigenvalues {
        if (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
            out.push(Violation::OffUnitCircle { eigenvalue: *z });
        }
    }
    // after sorting, equal eigenvalues may still be separated by their
    // conjugates, so compare all pairs
    let ev = &spec.eigenvalues;
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            if (ev[i] - ev[j]).norm() <= SIMPLE_EIGENVALUE_SEPARATION {
                out.push(Violation::RepeatedEigenvalue { eigenvalue: ev[i] });
            }
        }
    }
    let obs_rank = rank(&e.observability_matrix(), tol);
    if obs_rank < e.n0() {
        out.push(Violation::Unobservable {
            rank: obs_rank,
            n0: e.n0(),
        });
    }
    out
}

/// Structural checks, then Assumptions 1-3.
pub fn validate_scenario(s: &Scenario, tol: &Tolerances) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = s.exo.p();
    if s.agents.len() != s.graph.n_agents() {
        out.push(Violation::Structural {
            agent: None,
            detail: format!(
                "{} agent models but graph has {} nodes",
                s.agents.len(),
                s.graph.n_agents()
            ),
        });
    }
    for (i, agent) in s.agents.iter().enumerate() {
        for detail in agent.dimension_issues(p) {
            out.push(Violation::Structural {
                agent: Some(i + 1),
                detail,
            });
        }
        let expected = if i < s.graph.n_leaders() {
            Role::Leader
        } else {
            Role::Follower
        };
        if agent.role() != expected {
            out.push(Violation::Structural {
                agent: Some(i + 1),
                detail: format!(
                    "is a {} but leaders must occupy the first {} slots",
                    agent.role(),
                    s.graph.n_leaders()
                ),
            });
        }
        let all_finite = [&agent.a, &agent.b, &agent.c, &agent.d]
            .into_iter()
            .chain(agent.injection.iter().flat_map(|inj| [&inj.e, &inj.f]))
            .all(|m| m.iter().all(|v| v.is_finite()));
        if !all_finite {
            out.push(Violation::Structural {
                agent: Some(i + 1),
                detail: "matrix entries must be finite".into(),
            });
        }
    }
    out.extend(validate_exosystem(&s.exo, tol));
    let unreachable = unreachable_agents(&s.graph);
    if !unreachable.is_empty() {
        out.push(Violation::NoRootedSpanningTree { unreachable });
    }
    out
}

fn check_len(what: &str, v: &Vector, want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::Dimension(format!(
            "{what} has length {}, expected {want}",
            v.len()
        )));
    }
    Ok(())
}

/// One exosystem step: returns `(S x0, R x0)`.
pub fn step_exo(e: &ExoSystem, x0: &Vector) -> Result<(Vector, Vector)> {
    check_len("exosystem state", x0, e.n0())?;
    Ok((&e.s * x0, &e.r * x0))
}

/// One agent step: returns `(next state, output)`. `y0` is ignored for
/// followers.
pub fn step_agent(a: &AgentModel, x: &Vector, u: &Vector, y0: &Vector) -> Result<(Vector, Vector)> {
    check_len("agent state", x, a.n())?;
    check_len("agent input", u, a.m())?;
    let mut next = &a.a * x + &a.b * u;
    let mut y = &a.c * x + &a.d * u;
    if let Some(inj) = &a.injection {
        check_len("exosystem output", y0, inj.e.ncols())?;
        next += &inj.e * y0;
        y += &inj.f * y0;
    }
    Ok((next, y))
}
