//! Dense linear-algebra kernel shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Rank decisions are always made
//! on singular values relative to the largest one, and "Schur" always means
//! spectral radius at most `1 - schur_margin`.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Complex64 = Complex<f64>;

/// Numerical thresholds used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singular-value cutoff for rank and pseudoinverse.
    pub rank_rel: f64,
    /// Required gap below 1 for a spectral radius to count as Schur.
    pub schur_margin: f64,
    /// Absolute bound on linear-solve residuals.
    pub residual_abs: f64,
    /// Riccati fixed-point tolerance, relative to `max(1, |P|)`.
    pub riccati_tol: f64,
    pub riccati_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: 1e-10,
            schur_margin: 1e-6,
            residual_abs: 1e-8,
            riccati_tol: 1e-12,
            riccati_max_iter: 100_000,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rank_rel", self.rank_rel),
            ("schur_margin", self.schur_margin),
            ("residual_abs", self.residual_abs),
            ("riccati_tol", self.riccati_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "tolerance {name} must be positive, got {v}"
                )));
            }
        }
        if self.riccati_max_iter == 0 {
            return Err(Error::InvalidInput(
                "riccati_max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Eigenvalues of a square matrix with their spectral radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted by modulus (descending), then angle (ascending).
    pub eigenvalues: Vec<Complex64>,
    pub spectral_radius: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Largest absolute entry. Used as the `inf`-norm for residuals.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Column-stacking `vec(m)`.
pub fn vectorize(m: &Mat) -> Vector {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Vector, rows: usize, cols: usize) -> Mat {
    debug_assert_eq!(v.len(), rows * cols);
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

fn ensure_square(m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Singular values in descending order. Empty for a matrix with a zero dimension.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn count_above(sv: &[f64], rank_rel: f64) -> usize {
    match sv.first() {
        Some(&smax) if smax > 0.0 => {
            let cut = rank_rel * smax;
            sv.iter().filter(|&&s| s > cut).count()
        }
        _ => 0,
    }
}

/// Numerical rank: singular values above `rank_rel * sigma_max`.
pub fn rank(m: &Mat, tol: &Tolerances) -> usize {
    count_above(&singular_values(m), tol.rank_rel)
}

/// Thin SVD `(U, sigma, V')` computed on the tall orientation of `m`.
/// The factors nalgebra returns for wide inputs can fail to reconstruct the
/// matrix when singular values are repeated, so wide inputs are transposed.
fn thin_svd(m: &Mat) -> (Mat, Vector, Mat) {
    if m.nrows() >= m.ncols() {
        let svd = m.clone().svd(true, true);
        (
            svd.u.expect("svd computed with u"),
            svd.singular_values,
            svd.v_t.expect("svd computed with v_t"),
        )
    } else {
        let svd = m.transpose().svd(true, true);
        (
            svd.v_t.expect("svd computed with v_t").transpose(),
            svd.singular_values,
            svd.u.expect("svd computed with u").transpose(),
        )
    }
}

/// Moore-Penrose pseudoinverse through the SVD.
pub fn pinv(m: &Mat, tol: &Tolerances) -> Mat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Mat::zeros(c, r);
    }
    let (u, sv, v_t) = thin_svd(m);
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    if smax == 0.0 {
        return Mat::zeros(c, r);
    }
    let cut = tol.rank_rel * smax;
    let mut out = Mat::zeros(c, r);
    for (i, &s) in sv.iter().enumerate() {
        if s > cut {
            // out += v_i * u_i^T / s
            let vi = v_t.row(i).transpose();
            let ui = u.column(i);
            out.ger(1.0 / s, &vi, &ui, 1.0);
        }
    }
    out
}

fn order_eigenvalues(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| match b.norm().total_cmp(&a.norm()) {
        Ordering::Equal => a.arg().total_cmp(&b.arg()),
        o => o,
    });
}

/// Eigenvalues through the real Schur form.
pub fn spectrum(m: &Mat) -> Result<Spectrum> {
    ensure_square(m)?;
    if m.nrows() == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            spectral_radius: 0.0,
        });
    }
    if !all_finite(m) {
        return Err(Error::InvalidInput("spectrum of a non-finite matrix".into()));
    }
    let mut ev: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    order_eigenvalues(&mut ev);
    let spectral_radius = ev.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    Ok(Spectrum {
        eigenvalues: ev,
        spectral_radius,
    })
}

pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(spectrum(m)?.spectral_radius)
}

pub fn is_schur(m: &Mat, tol: &Tolerances) -> Result<bool> {
    Ok(spectral_radius(m)? <= 1.0 - tol.schur_margin)
}

/// PBH test: `rank [a - lambda I | b] = n` at every eigenvalue of `a` with
/// modulus at least `1 - schur_margin`.
pub fn pbh_stabilizable(a: &Mat, b: &Mat, tol: &Tolerances) -> Result<bool> {
    ensure_square(a)?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "pbh: a is {n}x{n} but b has {} rows",
            b.nrows()
        )));
    }
    let spec = spectrum(a)?;
    for lambda in spec
        .eigenvalues
        .iter()
        .filter(|z| z.norm() >= 1.0 - tol.schur_margin)
    {
        if pbh_rank(a, b, *lambda, tol) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Numerical rank of the complex matrix `[a - lambda I | b]`.
pub fn pbh_rank(a: &Mat, b: &Mat, lambda: Complex64, tol: &Tolerances) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut pencil = DMatrix::<Complex64>::zeros(n, n + m);
    for i in 0..n {
        for j in 0..n {
            pencil[(i, j)] = Complex::new(a[(i, j)], 0.0);
        }
        pencil[(i, i)] -= lambda;
        for j in 0..m {
            pencil[(i, n + j)] = Complex::new(b[(i, j)], 0.0);
        }
    }
    if n == 0 {
        return 0;
    }
    let sv: Vec<f64> = pencil.singular_values().iter().copied().collect();
    // cutoff relative to the data scale, so a pencil that is zero up to
    // rounding is not mistaken for a full-rank one
    let scale = sv
        .iter()
        .fold(max_abs(a).max(max_abs(b)).max(lambda.norm()), |acc, &s| acc.max(s));
    let cut = tol.rank_rel * scale;
    sv.iter().filter(|&&s| s > cut).count()
}

/// Orthogonal projector `I - V_r V_r'` onto the kernel of `m`, where `V_r`
/// spans the numerical row space. Exactly zero when `m` has full column rank.
pub fn kernel_projector(m: &Mat, tol: &Tolerances) -> Mat {
    let c = m.ncols();
    if m.nrows() == 0 || c == 0 {
        return Mat::identity(c, c);
    }
    let (_, sv, v_t) = thin_svd(m);
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let keep: Vec<usize> = (0..sv.len())
        .filter(|&i| smax > 0.0 && sv[i] > tol.rank_rel * smax)
        .collect();
    if keep.len() == c {
        return Mat::zeros(c, c);
    }
    let mut proj = Mat::identity(c, c);
    for &i in &keep {
        let v = v_t.row(i).transpose();
        proj.ger(-1.0, &v, &v, 1.0);
    }
    proj
}

/// Stabilizing state feedback from the discrete algebraic Riccati equation
/// with identity weights, solved by fixed-point iteration from `P = I`.
///
/// Returns `K` such that `a + b K` is Schur.
pub fn stabilizing_feedback(a: &Mat, b: &Mat, tol: &Tolerances) -> Result<Mat> {
    ensure_square(a)?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "riccati: a is {n}x{n} but b has {} rows",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let id_n = Mat::identity(n, n);
    let id_m = Mat::identity(m, m);
    let a_t = a.transpose();
    let b_t = b.transpose();

    let gain_of = |p: &Mat| -> Result<Mat> {
        let bt_p = &b_t * p;
        let s = &id_m + &bt_p * b;
        let rhs = &bt_p * a;
        let chol = s.cholesky().ok_or_else(|| {
            Error::NotStabilizable("I + B'PB lost positive definiteness".into())
        })?;
        Ok(chol.solve(&rhs))
    };

    let mut p = id_n.clone();
    let mut converged = false;
    for _ in 0..tol.riccati_max_iter {
        let g = gain_of(&p)?;
        // A'PA - A'PB (I + B'PB)^-1 B'PA + I, with A'PB = (B'PA)'
        let pb_a = &b_t * &p * a;
        let mut next = &a_t * &p * a - pb_a.transpose() * &g + &id_n;
        next = (&next + next.transpose()) * 0.5;
        if !all_finite(&next) || max_abs(&next) > 1e150 {
            return Err(Error::NotStabilizable(
                "Riccati iteration diverged".into(),
            ));
        }
        let delta = max_abs(&(&next - &p));
        let scale = max_abs(&next).max(1.0);
        p = next;
        if delta <= tol.riccati_tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotStabilizable(format!(
            "Riccati iteration did not converge in {} steps",
            tol.riccati_max_iter
        )));
    }
    let k = -gain_of(&p)?;
    // a gain this large only cancels rounding noise in b
    if max_abs(&k) * max_abs(b) > max_abs(a).max(1.0) / tol.rank_rel {
        return Err(Error::NotStabilizable(format!(
            "gain magnitude {:.3e} exceeds the numerical resolution of the data",
            max_abs(&k)
        )));
    }
    let closed = a + b * &k;
    let rho = spectral_radius(&closed)?;
    if rho > 1.0 - tol.schur_margin {
        return Err(Error::NotStabilizable(format!(
            "closed loop spectral radius {rho:.6} is not Schur"
        )));
    }
    Ok(k)
}

/// Minimal-norm least-squares solve through the pseudoinverse.
/// Residual is `max_abs(coeff * solution - rhs)`.
pub fn solve_linear_ls(coeff: &Mat, rhs: &Mat, tol: &Tolerances) -> Result<(Mat, f64)> {
    if coeff.nrows() != rhs.nrows() {
        return Err(Error::Dimension(format!(
            "least squares: coefficient has {} rows, rhs has {}",
            coeff.nrows(),
            rhs.nrows()
        )));
    }
    let p = pinv(coeff, tol);
    let mut solution = &p * rhs;
    let mut residual = max_abs(&(coeff * &solution - rhs));
    // refinement steps stay in the row space, so the minimal-norm solution
    // is kept while rounding in the factorization is corrected
    for _ in 0..3 {
        let candidate = &solution + &p * (rhs - coeff * &solution);
        let r = max_abs(&(coeff * &candidate - rhs));
        if r >= residual {
            break;
        }
        solution = candidate;
        residual = r;
    }
    Ok((solution, residual))
}

/// Real `2n x 2n` embedding `[[Re, -Im], [Im, Re]]` of `re + i*im`.
/// Its spectrum is the union of the spectrum of the complex matrix and its
/// conjugate, so both share a spectral radius.
pub fn complex_embedding(re: &Mat, im: &Mat) -> Mat {
    let n = re.nrows();
    let mut out = Mat::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(re);
    out.view_mut((n, n), (n, n)).copy_from(re);
    out.view_mut((0, n), (n, n)).copy_from(&(-im));
    out.view_mut((n, 0), (n, n)).copy_from(im);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn close(a: &Mat, b: &Mat, eps: f64) -> bool {
        a.shape() == b.shape() && max_abs(&(a - b)) <= eps
    }

    #[test]
    fn pinv_examples() {
        let i3 = Mat::identity(3, 3);
        assert!(close(&pinv(&i3, &tol()), &i3, 1e-14));
        assert!(close(&pinv(&m(1, 2, &[1.0, 1.0]), &tol()), &m(2, 1, &[0.5, 0.5]), 1e-14));
        assert!(close(
            &pinv(&m(2, 2, &[2.0, 0.0, 0.0, 0.0]), &tol()),
            &m(2, 2, &[0.5, 0.0, 0.0, 0.0]),
            1e-14
        ));
        assert_eq!(pinv(&Mat::zeros(3, 0), &tol()).shape(), (0, 3));
    }

    #[test]
    fn spectrum_examples() {
        let rot = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let s = spectrum(&rot).unwrap();
        assert!((s.spectral_radius - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[0] - Complex::new(0.0, -1.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - Complex::new(0.0, 1.0)).norm() < 1e-14);

        let exo = m(2, 2, &[0.1987, 0.9801, -0.9801, 0.1987]);
        let s = spectrum(&exo).unwrap();
        assert!((s.spectral_radius - 1.0).abs() < 1e-3);
        assert!((s.eigenvalues[0] - Complex::new(0.1987, -0.9801)).norm() < 1e-12);

        let coupling = m(3, 3, &[0.5, 0.0, 0.0, 0.0, 0.75, -0.25, -0.5, 0.0, 0.5]);
        let s = spectrum(&coupling).unwrap();
        let want = [0.75, 0.5, 0.5];
        for (z, w) in s.eigenvalues.iter().zip(want) {
            assert!((z - Complex::new(w, 0.0)).norm() < 1e-10, "{z} vs {w}");
        }

        assert!(matches!(
            spectrum(&Mat::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn schur_examples() {
        assert!(is_schur(&Mat::zeros(2, 2), &tol()).unwrap());
        assert!(!is_schur(&Mat::identity(2, 2), &tol()).unwrap());
        let (s, c) = (0.2_f64.sin(), 0.2_f64.cos());
        let exo = m(2, 2, &[s, c, -c, s]);
        let l = m(2, 1, &[-0.5719, -0.4692]);
        let r = m(1, 2, &[-1.0, 1.0]);
        let closed = &exo + &l * &r;
        // trace 0.5001, det ~ 1e-4: roots near 0.4998 and 0.0002
        let spec = spectrum(&closed).unwrap();
        assert!((spec.spectral_radius - 0.4998).abs() < 1e-3);
        assert!(is_schur(&closed, &tol()).unwrap());
    }

    #[test]
    fn pbh_examples() {
        assert!(pbh_stabilizable(&m(1, 1, &[2.0]), &m(1, 1, &[1.0]), &tol()).unwrap());
        assert!(!pbh_stabilizable(&m(1, 1, &[2.0]), &m(1, 1, &[0.0]), &tol()).unwrap());
        assert!(pbh_stabilizable(&m(1, 1, &[0.5]), &m(1, 1, &[0.0]), &tol()).unwrap());
        assert!(pbh_stabilizable(&m(1, 1, &[2.0]), &m(2, 1, &[1.0, 1.0]), &tol()).is_err());
    }

    #[test]
    fn riccati_examples() {
        let k = stabilizing_feedback(&m(1, 1, &[0.0]), &m(1, 1, &[1.0]), &tol()).unwrap();
        assert!(max_abs(&k) < 1e-15);

        // Scalar fixed point of p = 4p - 4p^2/(1+p) + 1, i.e. p^2 - 4p - 1 = 0.
        let p = 2.0 + 5.0_f64.sqrt();
        let k_expected = -2.0 * p / (1.0 + p);
        let k = stabilizing_feedback(&m(1, 1, &[2.0]), &m(1, 1, &[1.0]), &tol()).unwrap();
        assert!((k[(0, 0)] - k_expected).abs() < 1e-9);
        assert!((2.0 + k[(0, 0)]).abs() < 1.0);

        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let k = stabilizing_feedback(&a, &b, &tol()).unwrap();
        assert!(spectral_radius(&(&a + &b * &k)).unwrap() < 1.0);

        assert!(matches!(
            stabilizing_feedback(&m(1, 1, &[2.0]), &m(1, 1, &[0.0]), &tol()),
            Err(Error::NotStabilizable(_))
        ));
        // empty input block: fine iff a is already Schur
        assert_eq!(
            stabilizing_feedback(&m(1, 1, &[0.5]), &Mat::zeros(1, 0), &tol())
                .unwrap()
                .shape(),
            (0, 1)
        );
    }

    #[test]
    fn least_squares_examples() {
        let (x, r) = solve_linear_ls(&Mat::identity(2, 2), &m(2, 1, &[3.0, 4.0]), &tol()).unwrap();
        assert!(close(&x, &m(2, 1, &[3.0, 4.0]), 1e-14) && r < 1e-14);
        let (x, r) = solve_linear_ls(&m(2, 1, &[1.0, 1.0]), &m(2, 1, &[1.0, 0.0]), &tol()).unwrap();
        assert!(close(&x, &m(1, 1, &[0.5]), 1e-14) && (r - 0.5).abs() < 1e-14);
        let (x, r) = solve_linear_ls(&m(1, 2, &[1.0, 1.0]), &m(1, 1, &[2.0]), &tol()).unwrap();
        assert!(close(&x, &m(2, 1, &[1.0, 1.0]), 1e-14) && r < 1e-14);
        assert!(solve_linear_ls(&m(1, 2, &[1.0, 1.0]), &m(2, 1, &[2.0, 1.0]), &tol()).is_err());
    }

    #[test]
    fn tolerances_validate() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances {
            schur_margin: 0.0,
            ..Tolerances::default()
        };
        assert!(bad.validate().is_err());
    }

    fn gaussian_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        use rand_distr::{Distribution, StandardNormal};
        Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    /// Random pair, optionally with one uncontrollable mode at `hidden`,
    /// hidden behind a random similarity transform.
    fn random_pair(rng: &mut ChaCha8Rng, n: usize, mcols: usize, hidden: Option<f64>) -> (Mat, Mat) {
        let mut a = gaussian_mat(rng, n, n);
        let mut b = gaussian_mat(rng, n, mcols);
        if let Some(lambda) = hidden {
            for j in 0..n - 1 {
                a[(n - 1, j)] = 0.0;
            }
            a[(n - 1, n - 1)] = lambda;
            for j in 0..mcols {
                b[(n - 1, j)] = 0.0;
            }
        }
        let t = gaussian_mat(rng, n, n) + Mat::identity(n, n) * 3.0;
        let t_inv = t.clone().try_inverse().unwrap();
        (&t * a * &t_inv, &t * b)
    }

    #[test]
    fn riccati_agrees_with_pbh_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut negatives = 0;
        for trial in 0..120 {
            let n = rng.random_range(2..=6);
            let mcols = rng.random_range(1..=2);
            let hidden = match trial % 3 {
                0 => None,
                1 => Some(if rng.random_bool(0.5) { 1.3 } else { -1.6 }),
                _ => Some(0.4),
            };
            let (a, b) = random_pair(&mut rng, n, mcols, hidden);
            let pbh = pbh_stabilizable(&a, &b, &tol()).unwrap();
            let dare = stabilizing_feedback(&a, &b, &tol());
            if let Ok(k) = &dare {
                assert!(is_schur(&(&a + &b * k), &tol()).unwrap());
            }
            assert_eq!(pbh, dare.is_ok(), "trial {trial}: n={n} hidden={hidden:?}");
            if !pbh {
                negatives += 1;
            }
        }
        assert!(negatives >= 30);
    }

    #[test]
    fn triangular_spectrum_is_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let mut t = gaussian_mat(&mut rng, n, n);
            for i in 0..n {
                for j in 0..i {
                    t[(i, j)] = 0.0;
                }
            }
            let mut diag: Vec<Complex64> = (0..n).map(|i| Complex::new(t[(i, i)], 0.0)).collect();
            order_eigenvalues(&mut diag);
            let spec = spectrum(&t).unwrap();
            for (z, w) in spec.eigenvalues.iter().zip(&diag) {
                assert!((z - w).norm() < 1e-10);
            }
        }
    }

    fn mat_strategy() -> impl Strategy<Value = Mat> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0f64..10.0, r * c)
                .prop_map(move |v| Mat::from_row_slice(r, c, &v))
        })
    }

    #[test]
    fn pinv_wide_with_repeated_singular_values() {
        // I (x) X - S' (x) Y with a rotation S has paired singular values
        let (c, s) = (0.2f64.cos(), 0.2f64.sin());
        let rot = Mat::from_row_slice(2, 2, &[s, c, -c, s]);
        let id = Mat::identity(2, 2);
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let growth = Mat::from_fn(1, 6, |_, j| 5.0f64.powi(j as i32));
            let x = gaussian_mat(&mut rng, 2, 6).component_mul(&Mat::from_fn(2, 6, |_, j| growth[(0, j)]));
            let y = gaussian_mat(&mut rng, 2, 6).component_mul(&Mat::from_fn(2, 6, |_, j| growth[(0, j)]));
            let a = id.kronecker(&x) - rot.transpose().kronecker(&y);
            let p = pinv(&a, &tol());
            assert!(max_abs(&(&a * &p * &a - &a)) <= 1e-12 * a.norm(), "seed {seed}");
            let rhs = &a * gaussian_mat(&mut rng, 12, 1);
            let (_, res) = solve_linear_ls(&a, &rhs, &tol()).unwrap();
            assert!(res <= 1e-12 * a.norm() * rhs.norm().max(1.0), "seed {seed}: {res}");
        }
    }

    proptest! {
        #[test]
        fn pinv_moore_penrose_identities(a in mat_strategy()) {
            let p = pinv(&a, &tol());
            let scale = a.norm().max(1.0);
            let pscale = p.norm().max(1.0);
            prop_assert!(max_abs(&(&a * &p * &a - &a)) <= 1e-8 * scale);
            prop_assert!(max_abs(&(&p * &a * &p - &p)) <= 1e-8 * pscale);
            let ap = &a * &p;
            let pa = &p * &a;
            prop_assert!(max_abs(&(&ap - ap.transpose())) <= 1e-8);
            prop_assert!(max_abs(&(&pa - pa.transpose())) <= 1e-8);
        }

        #[test]
        fn ls_exact_in_column_space(a in mat_strategy(), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = gaussian_mat(&mut rng, a.ncols(), 2);
            let rhs = &a * &x;
            let (_, residual) = solve_linear_ls(&a, &rhs, &tol()).unwrap();
            prop_assert!(residual <= tol().residual_abs);
        }

        #[test]
        fn vectorize_roundtrip(a in mat_strategy()) {
            let v = vectorize(&a);
            prop_assert_eq!(unvectorize(&v, a.nrows(), a.ncols()), a);
        }
    }
}
