//! Agent communication graph, its Laplacian blocks, and the follower
//! coupling matrix `(I + D_f)^-1 L_ff` that drives the distributed observer.
//!
//! Node 0 is the exosystem. Agents are numbered `1..=N` in documentation and
//! `0..N` in code; leaders occupy the first `n_leaders` slots. Every leader
//! receives a unit-weight edge from node 0.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matops::{spectrum, Mat, Spectrum, Tolerances};

/// Weighted digraph among the agents. `adjacency[(i, j)] > 0` iff agent `j`
/// sends to agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    n_leaders: usize,
    adjacency: Mat,
}

impl NetworkGraph {
    pub fn new(n_leaders: usize, adjacency: Mat) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: adjacency.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidInput("graph has no agents".into()));
        }
        if n_leaders == 0 || n_leaders > n {
            return Err(Error::InvalidInput(format!(
                "leader count {n_leaders} must lie in 1..={n}"
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "adjacency[{i}][{j}] = {w} is not a nonnegative weight"
                    )));
                }
            }
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "adjacency diagonal entry {i} must be zero"
                )));
            }
        }
        Ok(Self {
            n_leaders,
            adjacency,
        })
    }

    /// Builds an unweighted graph from `(from, to)` pairs with 1-based agent
    /// labels, matching how the examples draw their edges.
    pub fn from_edges(n_agents: usize, n_leaders: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Mat::zeros(n_agents, n_agents);
        for &(from, to) in edges {
            if from == 0 || to == 0 || from > n_agents || to > n_agents {
                return Err(Error::InvalidInput(format!(
                    "edge {from}->{to} outside agents 1..={n_agents}"
                )));
            }
            adj[(to - 1, from - 1)] = 1.0;
        }
        Self::new(n_leaders, adj)
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn n_leaders(&self) -> usize {
        self.n_leaders
    }

    pub fn n_followers(&self) -> usize {
        self.n_agents() - self.n_leaders
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    pub fn is_leader(&self, agent: usize) -> bool {
        agent < self.n_leaders
    }

    /// In-degree over agent-to-agent edges only.
    pub fn in_degree(&self, agent: usize) -> f64 {
        self.adjacency.row(agent).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPartition {
    pub n_leaders: usize,
    pub in_degrees: Vec<f64>,
    pub ll: Mat,
    pub lf: Mat,
    pub fl: Mat,
    pub ff: Mat,
}

impl LaplacianPartition {
    pub fn n_followers(&self) -> usize {
        self.ff.nrows()
    }

    pub fn follower_degrees(&self) -> &[f64] {
        &self.in_degrees[self.n_leaders..]
    }

    /// Laplacian of the extended graph with the exosystem as node 0.
    ///
    /// Leader rows carry the extra unit in-edge from node 0 on their
    /// diagonal, so every row sums to zero.
    pub fn extended(&self) -> Mat {
        let nl = self.n_leaders;
        let nf = self.n_followers();
        let n = nl + nf;
        let mut out = Mat::zeros(n + 1, n + 1);
        for i in 0..nl {
            out[(1 + i, 0)] = -1.0;
        }
        out.view_mut((1, 1), (nl, nl)).copy_from(&self.ll);
        out.view_mut((1, 1 + nl), (nl, nf)).copy_from(&self.lf);
        out.view_mut((1 + nl, 1), (nf, nl)).copy_from(&self.fl);
        out.view_mut((1 + nl, 1 + nl), (nf, nf)).copy_from(&self.ff);
        for i in 0..nl {
            out[(1 + i, 1 + i)] += 1.0;
        }
        out
    }
}

/// `L = diag(d) - A` split at the leader/follower boundary.
pub fn build_partition(g: &NetworkGraph) -> LaplacianPartition {
    let n = g.n_agents();
    let nl = g.n_leaders();
    let nf = n - nl;
    let in_degrees: Vec<f64> = (0..n).map(|i| g.in_degree(i)).collect();
    let mut lap = -g.adjacency().clone();
    for (i, d) in in_degrees.iter().enumerate() {
        lap[(i, i)] += d;
    }
    LaplacianPartition {
        n_leaders: nl,
        in_degrees,
        ll: lap.view((0, 0), (nl, nl)).into_owned(),
        lf: lap.view((0, nl), (nl, nf)).into_owned(),
        fl: lap.view((nl, 0), (nf, nl)).into_owned(),
        ff: lap.view((nl, nl), (nf, nf)).into_owned(),
    }
}

/// Breadth-first reachability from node 0 in the extended graph.
pub fn has_rooted_spanning_tree(g: &NetworkGraph) -> bool {
    unreachable_agents(g).is_empty()
}

/// Agents (0-based) not reachable from the exosystem node.
pub fn unreachable_agents(g: &NetworkGraph) -> Vec<usize> {
    let n = g.n_agents();
    let adj = g.adjacency();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..g.n_leaders()).collect();
    for &l in &queue {
        seen[l] = true;
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && adj[(i, j)] > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerCoupling {
    pub matrix: Mat,
    pub spectrum: Spectrum,
}

/// `(I + D_f)^-1 L_ff` and its eigenvalues.
pub fn follower_coupling(p: &LaplacianPartition) -> Result<FollowerCoupling> {
    let nf = p.n_followers();
    if nf == 0 {
        return Err(Error::InvalidInput(
            "follower coupling needs at least one follower".into(),
        ));
    }
    let mut matrix = p.ff.clone();
    for (i, d) in p.follower_degrees().iter().enumerate() {
        let scale = 1.0 / (1.0 + d);
        matrix.row_mut(i).scale_mut(scale);
    }
    let spectrum = spectrum(&matrix)?;
    Ok(FollowerCoupling { matrix, spectrum })
}

/// Eigenvalue location checks for the coupling spectrum: every eigenvalue
/// is nonzero (modulus above `rank_rel`) and lies in the open unit disk
/// centred at 1, up to `schur_margin` of slack on the boundary.
pub fn check_lemma1(c: &FollowerCoupling, tol: &Tolerances) -> bool {
    c.spectrum.eigenvalues.iter().all(|z| {
        let shifted = nalgebra::Complex::new(z.re - 1.0, z.im);
        z.norm() > tol.rank_rel && shifted.norm() < 1.0 + tol.schur_margin
    })
}
