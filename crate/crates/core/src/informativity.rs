//! Data informativity: rank, stabilizability and regulator-solvability tests
//! on collected records, and the right-inverse parametrization they share
//! with controller synthesis.

use serde::{Deserialize, Serialize};

use crate::datagen::DataRecord;
use crate::error::{Condition, Error, Result};
use crate::matops::{
    kernel_projector, max_abs, pbh_stabilizable, pinv, rank, singular_values, solve_linear_ls, unvectorize,
    vectorize, Mat, Tolerances,
};
use crate::plant::{ExoSystem, Role};

/// Quantities derived from `Psi` (`[Xp; Y0p]` for leaders, `Xp` for
/// followers) that drive the stabilization tests.
#[derive(Debug, Clone, PartialEq)]
pub struct StabData {
    pub role: Role,
    pub n: usize,
    pub psi: Mat,
    pub psi_pinv: Mat,
    /// `Xf Psi^+ [I; 0]`, n x n.
    pub g: Mat,
    /// `Xf (I - Psi^+ Psi)`, n x T.
    pub f: Mat,
    /// `I - Psi^+ Psi`, T x T.
    pub kernel: Mat,
    pub rank_psi: usize,
    /// Rank of `Y0p`; zero for followers.
    pub rank_y0: usize,
}

impl StabData {
    pub fn horizon(&self) -> usize {
        self.psi.ncols()
    }

    /// `rank(Psi) = n + rank(Y0p)`.
    pub fn rank_ok(&self) -> bool {
        self.rank_psi == self.n + self.rank_y0
    }

    /// `Psi^+ [I; 0]`: the first `n` columns of `Psi^+`.
    pub fn base_right_inverse(&self) -> Mat {
        self.psi_pinv.columns(0, self.n).into_owned()
    }
}

fn stab_data(role: Role, psi: Mat, xf: &Mat, n: usize, rank_y0: usize, tol: &Tolerances) -> StabData {
    let psi_pinv = pinv(&psi, tol);
    let kernel = kernel_projector(&psi, tol);
    let g = xf * psi_pinv.columns(0, n);
    let f = xf * &kernel;
    StabData {
        kernel,
        role,
        n,
        rank_psi: rank(&psi, tol),
        psi,
        psi_pinv,
        g,
        f,
        rank_y0,
    }
}

pub fn build_leader_stab_data(r: &DataRecord, tol: &Tolerances) -> StabData {
    let (n, p, t) = (r.n(), r.y0p.nrows(), r.horizon);
    let mut psi = Mat::zeros(n + p, t);
    psi.rows_mut(0, n).copy_from(&r.xp);
    psi.rows_mut(n, p).copy_from(&r.y0p);
    stab_data(Role::Leader, psi, &r.xf, n, rank(&r.y0p, tol), tol)
}

pub fn build_follower_stab_data(r: &DataRecord, tol: &Tolerances) -> StabData {
    stab_data(Role::Follower, r.xp.clone(), &r.xf, r.n(), 0, tol)
}

/// Leader or follower construction according to the record's role.
pub fn build_stab_data(r: &DataRecord, tol: &Tolerances) -> StabData {
    match r.role {
        Role::Leader => build_leader_stab_data(r, tol),
        Role::Follower => build_follower_stab_data(r, tol),
    }
}

fn stabilizable(sd: &StabData, tol: &Tolerances) -> bool {
    pbh_stabilizable(&sd.g, &sd.f, tol).unwrap_or(false)
}

pub fn leader_informative(r: &DataRecord, tol: &Tolerances) -> bool {
    let sd = build_leader_stab_data(r, tol);
    sd.rank_ok() && stabilizable(&sd, tol)
}

pub fn follower_informative(r: &DataRecord, tol: &Tolerances) -> bool {
    let sd = build_follower_stab_data(r, tol);
    sd.rank_ok() && stabilizable(&sd, tol)
}

/// Free parameter `Q` (T x (n + k)) of the right-inverse family.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParam {
    pub q: Mat,
}

impl ThetaParam {
    pub fn zeros(sd: &StabData) -> Self {
        Self {
            q: Mat::zeros(sd.horizon(), sd.psi.nrows()),
        }
    }

    /// Embeds a T x n gain `Theta` as `Q = [Theta, 0]`.
    pub fn from_gain(sd: &StabData, theta: &Mat) -> Result<Self> {
        if theta.shape() != (sd.horizon(), sd.n) {
            return Err(Error::Dimension(format!(
                "theta is {}x{}, expected {}x{}",
                theta.nrows(),
                theta.ncols(),
                sd.horizon(),
                sd.n
            )));
        }
        let mut q = Mat::zeros(sd.horizon(), sd.psi.nrows());
        q.columns_mut(0, sd.n).copy_from(theta);
        Ok(Self { q })
    }
}

/// `(Psi^+ + (I - Psi^+ Psi) Q) [I; 0]`.
///
/// Satisfies `Xp X = I` and `Y0p X = 0` whenever the rank condition holds;
/// otherwise returns [`Error::RankPrecondition`].
pub fn right_inverse_from_theta(sd: &StabData, theta: &ThetaParam) -> Result<Mat> {
    if theta.q.shape() != (sd.horizon(), sd.psi.nrows()) {
        return Err(Error::Dimension(format!(
            "Q is {}x{}, expected {}x{}",
            theta.q.nrows(),
            theta.q.ncols(),
            sd.horizon(),
            sd.psi.nrows()
        )));
    }
    if !sd.rank_ok() {
        return Err(Error::RankPrecondition(format!(
            "rank(Psi) = {}, need {} + {}",
            sd.rank_psi, sd.n, sd.rank_y0
        )));
    }
    let full = &sd.psi_pinv + &sd.kernel * &theta.q;
    Ok(full.columns(0, sd.n).into_owned())
}

/// Minimal-norm `M` for `Xf M = Xp M S`, `Yp M = R` and, for leaders,
/// `Y0p M = R`. Returns `(M, residual)` with the residual the largest
/// violation over all equations.
pub fn solve_data_regulator(r: &DataRecord, exo: &ExoSystem, tol: &Tolerances) -> Result<(Mat, f64)> {
    r.check_shape()?;
    let (n, p, t, n0) = (r.n(), r.p(), r.horizon, exo.n0());
    if p != exo.p() {
        return Err(Error::Dimension(format!(
            "record has {p} outputs, exosystem has {}",
            exo.p()
        )));
    }
    let id0 = Mat::identity(n0, n0);
    let with_y0 = r.role == Role::Leader;
    let rows = n * n0 + p * n0 * if with_y0 { 2 } else { 1 };
    let mut coeff = Mat::zeros(rows, t * n0);
    let mut rhs = Mat::zeros(rows, 1);
    let dyn_block = id0.kronecker(&r.xf) - exo.s.transpose().kronecker(&r.xp);
    coeff.rows_mut(0, n * n0).copy_from(&dyn_block);
    let vec_r = vectorize(&exo.r);
    coeff.rows_mut(n * n0, p * n0).copy_from(&id0.kronecker(&r.yp));
    rhs.rows_mut(n * n0, p * n0).copy_from(&vec_r);
    if with_y0 {
        let off = n * n0 + p * n0;
        coeff.rows_mut(off, p * n0).copy_from(&id0.kronecker(&r.y0p));
        rhs.rows_mut(off, p * n0).copy_from(&vec_r);
    }
    let (vm, _) = solve_linear_ls(&coeff, &rhs, tol)?;
    let m = unvectorize(&vm.column(0).into_owned(), t, n0);
    let residual = data_regulator_residual(r, exo, &m);
    Ok((m, residual))
}

/// Largest violation of the data regulator equations at `m`.
pub fn data_regulator_residual(r: &DataRecord, exo: &ExoSystem, m: &Mat) -> f64 {
    let dynamics = max_abs(&(&r.xf * m - &r.xp * m * &exo.s));
    let output = max_abs(&(&r.yp * m - &exo.r));
    let exo_out = if r.role == Role::Leader {
        max_abs(&(&r.y0p * m - &exo.r))
    } else {
        0.0
    };
    dynamics.max(output).max(exo_out)
}

/// Verdicts on one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativityReport {
    /// 1-based agent label.
    pub agent_index: usize,
    pub role: Role,
    pub rank_ok: bool,
    pub stab_ok: bool,
    pub regulator_ok: bool,
    pub residual: f64,
    pub details: Vec<String>,
}

impl InformativityReport {
    pub fn informative(&self) -> bool {
        self.rank_ok && self.stab_ok && self.regulator_ok
    }

    /// First failing condition in the order rank, stabilizability, regulator.
    pub fn failed_condition(&self) -> Option<Condition> {
        let leader = self.role == Role::Leader;
        if !self.rank_ok {
            Some(if leader { Condition::Ia } else { Condition::IIa })
        } else if !self.stab_ok {
            Some(if leader { Condition::Ib } else { Condition::IIb })
        } else if !self.regulator_ok {
            Some(if leader { Condition::Ic } else { Condition::IIc })
        } else {
            None
        }
    }
}

fn fmt_sv(sv: &[f64]) -> String {
    let parts: Vec<String> = sv.iter().map(|s| format!("{s:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Runs all three tests on a record and collects diagnostics, including the
/// singular values of `Psi` so near-boundary rank decisions are visible.
pub fn assess(r: &DataRecord, exo: &ExoSystem, tol: &Tolerances) -> Result<InformativityReport> {
    r.check_shape()?;
    let sd = build_stab_data(r, tol);
    let mut details = Vec::new();
    let sv = singular_values(&sd.psi);
    details.push(format!(
        "rank(Psi) = {} (need {} + {}), singular values {}",
        sd.rank_psi,
        sd.n,
        sd.rank_y0,
        fmt_sv(&sv)
    ));
    let rank_ok = sd.rank_ok();
    let stab_ok = rank_ok && stabilizable(&sd, tol);
    if rank_ok && !stab_ok {
        details.push("the pair (G, F) fails the PBH test".into());
    }
    let (_, residual) = solve_data_regulator(r, exo, tol)?;
    let regulator_ok = residual <= tol.residual_abs;
    details.push(format!(
        "regulator residual {residual:.3e} (threshold {:.1e})",
        tol.residual_abs
    ));
    Ok(InformativityReport {
        agent_index: r.agent_index,
        role: r.role,
        rank_ok,
        stab_ok,
        regulator_ok,
        residual,
        details,
    })
}
