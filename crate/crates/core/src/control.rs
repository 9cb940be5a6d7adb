//! Control-theoretic constants of a loop and the information-constrained
//! LQR lower bound.
//!
//! A loop's plant is `x' = A x + B u + v` with Gaussian process noise `v`.
//! Given the closed-loop information `d` (bits per cycle) the LQR cost is
//! bounded below by
//!
//! ```text
//! l(d) = n N(v) |det M|^(1/n) / (2^((2/n)(d - log2|det A|)) - 1) + tr(Σ_v S)
//! ```
//!
//! and is unbounded when `d <= log2|det A|`. `S` and `M` solve the coupled
//! discrete Riccati equations handled by [`solve_riccati`].

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default defect tolerance for the Riccati fixed point.
pub const RICCATI_TOL: f64 = 1e-10;
/// Default iteration cap for the Riccati fixed point.
pub const RICCATI_MAX_ITER: usize = 10_000;

const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("matrix {name} is {rows}x{cols}, expected {n}x{n}")]
    Dimension {
        name: &'static str,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("matrix {0} must be symmetric positive semidefinite")]
    NotPsd(&'static str),
    #[error("log2|det A| is not finite (A is singular)")]
    SingularDynamics,
    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    RiccatiNotConverged { iterations: usize, residual: f64 },
    #[error("R + B'SB is singular at Riccati iterate {iteration}")]
    SingularInnerMatrix { iteration: usize },
    #[error("target cost {target} is not above the noise floor tr(Σ_v S) = {floor}")]
    InfeasibleTarget { target: f64, floor: f64 },
    #[error("invalid control summary: {0}")]
    InvalidSummary(String),
}

/// An LQR cost that is either finite or unbounded (unstabilizable loop).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl Cost {
    pub fn is_finite(self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    /// The cost as a float, `f64::INFINITY` for [`Cost::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            Cost::Finite(v) => v,
            Cost::Infinite => f64::INFINITY,
        }
    }

    pub fn from_value(v: f64) -> Self {
        if v.is_finite() {
            Cost::Finite(v)
        } else {
            Cost::Infinite
        }
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => a.partial_cmp(b),
            (Cost::Finite(_), Cost::Infinite) => Some(Ordering::Less),
            (Cost::Infinite, Cost::Finite(_)) => Some(Ordering::Greater),
            (Cost::Infinite, Cost::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        match (self, rhs) {
            (Cost::Finite(a), Cost::Finite(b)) => Cost::Finite(a + b),
            _ => Cost::Infinite,
        }
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::Finite(0.0), Add::add)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(v) => write!(f, "{v}"),
            Cost::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cost::Finite(v) => serializer.serialize_f64(*v),
            Cost::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Cost::from_value(v)),
            Raw::Text(s) if s == "inf" => Ok(Cost::Infinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("invalid cost {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    Gaussian,
}

/// Full plant description of one loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma_v: DMatrix<f64>,
    pub noise_model: NoiseModel,
}

impl ControlMatrices {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let n = self.a.nrows();
        for (name, m) in [
            ("A", &self.a),
            ("B", &self.b),
            ("Q", &self.q),
            ("R", &self.r),
            ("Sigma_v", &self.sigma_v),
        ] {
            if m.nrows() != n || m.ncols() != n || n == 0 {
                return Err(ControlError::Dimension {
                    name,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    n,
                });
            }
        }
        for (name, m) in [("Q", &self.q), ("R", &self.r), ("Sigma_v", &self.sigma_v)] {
            if !is_symmetric_psd(m) {
                return Err(ControlError::NotPsd(name));
            }
        }
        Ok(())
    }
}

/// Plant with `A = 2^(e/n) I`, `B = I`, `Q = I`, `R = 0`, `Σ_v = σ² I`.
///
/// Its Riccati solution is `S = M = I`, so the summary is
/// `(n, e, σ², 1, n σ²)`.
pub fn diagonal_plant(n: usize, log2_det_a: f64, noise_variance: f64) -> ControlMatrices {
    let scale = (log2_det_a / n as f64).exp2();
    ControlMatrices {
        a: DMatrix::identity(n, n) * scale,
        b: DMatrix::identity(n, n),
        q: DMatrix::identity(n, n),
        r: DMatrix::zeros(n, n),
        sigma_v: DMatrix::identity(n, n) * noise_variance,
        noise_model: NoiseModel::Gaussian,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub s: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// `M = S B (R + B'SB)^-1 B'S`, or `None` when the inner matrix is singular.
fn gain_term(s: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sb = s * b;
    let inner = r + b.transpose() * &sb;
    let inv = inner.lu().try_inverse()?;
    let m = &sb * inv * sb.transpose();
    Some(symmetrize(m))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Max-norm of the defects of both Riccati equations at `(s, m)`.
pub fn riccati_defect(matrices: &ControlMatrices, s: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let a = &matrices.a;
    let first = &matrices.q + a.transpose() * (s - m) * a - s;
    let second = match gain_term(s, &matrices.b, &matrices.r) {
        Some(g) => max_abs(&(g - m)),
        None => f64::INFINITY,
    };
    max_abs(&first).max(second)
}

/// Fixed-point iteration `S <- Q + A'(S - M(S))A` from `S = Q`.
pub fn solve_riccati(matrices: &ControlMatrices, tol: f64, max_iter: usize) -> Result<RiccatiSolution, ControlError> {
    matrices.validate()?;
    let a = &matrices.a;
    let mut s = matrices.q.clone();
    let mut residual = f64::INFINITY;
    for iteration in 0..=max_iter {
        let m = gain_term(&s, &matrices.b, &matrices.r).ok_or(ControlError::SingularInnerMatrix { iteration })?;
        let next = symmetrize(&matrices.q + a.transpose() * (&s - &m) * a);
        residual = max_abs(&(&next - &s));
        if residual <= tol {
            let residual = riccati_defect(matrices, &s, &m);
            return Ok(RiccatiSolution {
                s,
                m,
                residual,
                iterations: iteration,
            });
        }
        if !residual.is_finite() {
            break;
        }
        s = next;
    }
    Err(ControlError::RiccatiNotConverged {
        iterations: max_iter,
        residual,
    })
}

fn is_symmetric_psd(m: &DMatrix<f64>) -> bool {
    let scale = max_abs(m).max(1.0);
    if max_abs(&(m - m.transpose())) > SYMMETRY_TOL * scale {
        return false;
    }
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().all(|&l| l >= -SYMMETRY_TOL * scale)
}

/// Entropy power of zero-mean Gaussian noise with covariance `sigma`.
///
/// Substituting the Gaussian differential entropy into
/// `N(x) = e^((2/n) h(x)) / (2πe)` gives `det(Σ)^(1/n)`.
pub fn entropy_power(sigma: &DMatrix<f64>) -> Result<f64, ControlError> {
    if !sigma.is_square() || sigma.nrows() == 0 || !is_symmetric_psd(sigma) {
        return Err(ControlError::NotPsd("Sigma_v"));
    }
    let n = sigma.nrows() as f64;
    let eig = SymmetricEigen::new(sigma.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Ok(0.0);
    }
    let mean_log: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum::<f64>() / n;
    Ok(mean_log.exp())
}

/// `log2|det m|` via LU, `-inf` for singular matrices.
pub fn log2_abs_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    u.diagonal().iter().map(|d| d.abs().log2()).sum()
}

/// Scalar constants of a loop that enter the LQR lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub n: usize,
    /// Intrinsic entropy `log2|det A|` in bits.
    pub log2_det_a: f64,
    /// Entropy power `N(v)` of the process noise.
    pub entropy_power: f64,
    /// `|det M|^(1/n)`.
    pub det_m_nth_root: f64,
    /// `tr(Σ_v S)`, the cost floor reached with unlimited information.
    pub trace_sigma_s: f64,
}

impl ControlSummary {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |msg: &str| Err(ControlError::InvalidSummary(msg.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if !self.log2_det_a.is_finite() {
            return bad("log2_det_A must be finite");
        }
        if !(self.entropy_power >= 0.0 && self.entropy_power.is_finite()) {
            return bad("entropy_power must be finite and nonnegative");
        }
        if !(self.det_m_nth_root >= 0.0 && self.det_m_nth_root.is_finite()) {
            return bad("det_M_nth_root must be finite and nonnegative");
        }
        if !(self.trace_sigma_s >= 0.0 && self.trace_sigma_s.is_finite()) {
            return bad("trace_sigma_S must be finite and nonnegative");
        }
        Ok(())
    }

    /// Numerator `n N(v) |det M|^(1/n)` of the bound.
    pub fn scale(&self) -> f64 {
        self.n as f64 * self.entropy_power * self.det_m_nth_root
    }

    fn rate(&self) -> f64 {
        2.0 / self.n as f64 * std::f64::consts::LN_2
    }

    pub fn lqr_lower_bound(&self, d_sc3: f64) -> Cost {
        lqr_lower_bound(self, d_sc3)
    }

    /// First derivative of the bound in `d`, valid for `d > log2|det A|`.
    pub fn bound_slope(&self, d: f64) -> f64 {
        let k = self.rate();
        let e = (k * (d - self.log2_det_a)).exp_m1();
        -self.scale() * k * (e + 1.0) / (e * e)
    }

    /// Second derivative of the bound in `d`, valid for `d > log2|det A|`.
    pub fn bound_curvature(&self, d: f64) -> f64 {
        let k = self.rate();
        let e = (k * (d - self.log2_det_a)).exp_m1();
        self.scale() * k * k * (e + 1.0) * (e + 2.0) / (e * e * e)
    }

    pub fn info_for_cost(&self, target_cost: f64) -> Result<f64, ControlError> {
        info_for_cost(self, target_cost)
    }

    /// Control-related parameter of the adequate-CPU closed form:
    /// `log2 N(v) + log2|det M|^(1/n) + (2/n) log2|det A|`.
    pub fn control_parameter(&self) -> f64 {
        (self.entropy_power * self.det_m_nth_root).log2() + 2.0 / self.n as f64 * self.log2_det_a
    }
}

/// Packs the bound constants of a plant.
pub fn summarize(matrices: &ControlMatrices, tol: f64, max_iter: usize) -> Result<ControlSummary, ControlError> {
    let riccati = solve_riccati(matrices, tol, max_iter)?;
    let n = matrices.dim();
    let log2_det_a = log2_abs_det(&matrices.a);
    if !log2_det_a.is_finite() {
        return Err(ControlError::SingularDynamics);
    }
    let log2_det_m = log2_abs_det(&riccati.m);
    let det_m_nth_root = if log2_det_m.is_finite() {
        (log2_det_m / n as f64).exp2()
    } else {
        0.0
    };
    let trace_sigma_s = (&matrices.sigma_v * &riccati.s).trace();
    Ok(ControlSummary {
        n,
        log2_det_a,
        entropy_power: entropy_power(&matrices.sigma_v)?,
        det_m_nth_root,
        trace_sigma_s,
    })
}

/// LQR lower bound at closed-loop information `d_sc3` bits per cycle.
pub fn lqr_lower_bound(summary: &ControlSummary, d_sc3: f64) -> Cost {
    if !(d_sc3 > summary.log2_det_a) {
        return Cost::Infinite;
    }
    if d_sc3.is_infinite() {
        return Cost::Finite(summary.trace_sigma_s);
    }
    let denom = (summary.rate() * (d_sc3 - summary.log2_det_a)).exp_m1();
    Cost::Finite(summary.scale() / denom + summary.trace_sigma_s)
}

/// Smallest closed-loop information whose bound does not exceed `target_cost`.
pub fn info_for_cost(summary: &ControlSummary, target_cost: f64) -> Result<f64, ControlError> {
    let excess = target_cost - summary.trace_sigma_s;
    if !(excess > 0.0) {
        return Err(ControlError::InfeasibleTarget {
            target: target_cost,
            floor: summary.trace_sigma_s,
        });
    }
    let n = summary.n as f64;
    Ok(n / 2.0 * (summary.scale() / excess).ln_1p() / std::f64::consts::LN_2 + summary.log2_det_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn riccati_identity_input_gives_q() {
        for a in [0.5, 2.0, 7.0] {
            let m = ControlMatrices {
                a: DMatrix::identity(3, 3) * a,
                b: DMatrix::identity(3, 3),
                q: DMatrix::identity(3, 3),
                r: DMatrix::zeros(3, 3),
                sigma_v: DMatrix::identity(3, 3),
                noise_model: NoiseModel::Gaussian,
            };
            let sol = solve_riccati(&m, RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
            assert_eq!(sol.s, DMatrix::identity(3, 3));
            assert_eq!(sol.m, DMatrix::identity(3, 3));
            assert!(sol.residual <= RICCATI_TOL);
        }
    }

    #[test]
    fn riccati_zero_dynamics() {
        let m = ControlMatrices {
            a: DMatrix::zeros(2, 2),
            b: DMatrix::identity(2, 2),
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(2, 2),
            sigma_v: DMatrix::identity(2, 2),
            noise_model: NoiseModel::Gaussian,
        };
        let sol = solve_riccati(&m, RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        assert_relative_eq!(sol.s, DMatrix::identity(2, 2), epsilon = 1e-14);
        assert_relative_eq!(sol.m, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-14);
        assert!(sol.residual < RICCATI_TOL);
    }

    #[test]
    fn riccati_scalar_unstable() {
        let m = ControlMatrices {
            a: scalar(2.0),
            b: scalar(1.0),
            q: scalar(1.0),
            r: scalar(0.0),
            sigma_v: scalar(1.0),
            noise_model: NoiseModel::Gaussian,
        };
        let sol = solve_riccati(&m, RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        assert_eq!(sol.s[(0, 0)], 1.0);
        assert_eq!(sol.m[(0, 0)], 1.0);
    }

    #[test]
    fn riccati_general_scalar_matches_quadratic_root() {
        // Scalar DARE with r > 0: s = q + a² s r / (r + b² s).
        let (a, b, q, r) = (1.5_f64, 0.7_f64, 2.0_f64, 0.3_f64);
        let m = ControlMatrices {
            a: scalar(a),
            b: scalar(b),
            q: scalar(q),
            r: scalar(r),
            sigma_v: scalar(1.0),
            noise_model: NoiseModel::Gaussian,
        };
        let sol = solve_riccati(&m, RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        // b² s² + (r - q b² - a² r) s - q r = 0
        let qa = b * b;
        let qb = r - q * b * b - a * a * r;
        let qc = -q * r;
        let root = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
        assert_relative_eq!(sol.s[(0, 0)], root, max_relative = 1e-9);
        assert!(sol.residual <= RICCATI_TOL);
    }

    #[test]
    fn riccati_reports_singular_inner_matrix() {
        let m = ControlMatrices {
            a: scalar(2.0),
            b: scalar(0.0),
            q: scalar(1.0),
            r: scalar(0.0),
            sigma_v: scalar(1.0),
            noise_model: NoiseModel::Gaussian,
        };
        assert_eq!(
            solve_riccati(&m, RICCATI_TOL, 10),
            Err(ControlError::SingularInnerMatrix { iteration: 0 })
        );
    }

    #[test]
    fn riccati_reports_non_convergence() {
        // Uncontrollable unstable mode: S grows without bound.
        let m = ControlMatrices {
            a: scalar(2.0),
            b: scalar(1e-300),
            q: scalar(1.0),
            r: scalar(1.0),
            sigma_v: scalar(1.0),
            noise_model: NoiseModel::Gaussian,
        };
        assert!(matches!(
            solve_riccati(&m, RICCATI_TOL, 50),
            Err(ControlError::RiccatiNotConverged { iterations: 50, .. })
        ));
    }

    #[test]
    fn entropy_power_cases() {
        assert_relative_eq!(
            entropy_power(&(DMatrix::identity(4, 4) * 0.3)).unwrap(),
            0.3,
            max_relative = 1e-14
        );
        assert_relative_eq!(entropy_power(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        assert_relative_eq!(entropy_power(&d).unwrap(), 2.0, max_relative = 1e-14);
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -4.0]));
        assert!(entropy_power(&bad).is_err());
    }

    #[test]
    fn summary_of_diagonal_plant() {
        let (n, e, s2) = (5, 7.5, 0.2);
        let sum = summarize(&diagonal_plant(n, e, s2), RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        assert_eq!(sum.n, n);
        assert_relative_eq!(sum.log2_det_a, e, max_relative = 1e-12);
        assert_relative_eq!(sum.entropy_power, s2, max_relative = 1e-12);
        assert_relative_eq!(sum.det_m_nth_root, 1.0, max_relative = 1e-12);
        assert_relative_eq!(sum.trace_sigma_s, n as f64 * s2, max_relative = 1e-12);

        let scalar = summarize(&diagonal_plant(1, 1.0, 1.0), RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        assert_eq!(
            (
                scalar.n,
                scalar.log2_det_a,
                scalar.entropy_power,
                scalar.det_m_nth_root,
                scalar.trace_sigma_s
            ),
            (1, 1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn unit_determinant_has_zero_entropy() {
        let mut m = diagonal_plant(2, 0.0, 1.0);
        m.a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let sum = summarize(&m, RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        assert!(sum.log2_det_a.abs() < 1e-15);
    }

    #[test]
    fn singular_dynamics_rejected() {
        let mut m = diagonal_plant(2, 0.0, 1.0);
        m.a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            summarize(&m, RICCATI_TOL, RICCATI_MAX_ITER),
            Err(ControlError::SingularDynamics)
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut m = diagonal_plant(2, 1.0, 1.0);
        m.b = DMatrix::identity(3, 3);
        assert!(matches!(m.validate(), Err(ControlError::Dimension { name: "B", .. })));
    }

    fn unit() -> ControlSummary {
        ControlSummary {
            n: 1,
            log2_det_a: 0.0,
            entropy_power: 1.0,
            det_m_nth_root: 1.0,
            trace_sigma_s: 0.0,
        }
    }

    #[test]
    fn bound_examples() {
        let s = unit();
        assert_eq!(lqr_lower_bound(&s, 0.0), Cost::Infinite);
        assert_eq!(lqr_lower_bound(&s, -1.0), Cost::Infinite);
        assert_relative_eq!(lqr_lower_bound(&s, 1.0).value(), 1.0 / 3.0, max_relative = 1e-15);
        let with_floor = ControlSummary {
            trace_sigma_s: 2.5,
            ..s
        };
        assert_eq!(lqr_lower_bound(&with_floor, f64::INFINITY), Cost::Finite(2.5));
        assert_relative_eq!(lqr_lower_bound(&with_floor, 200.0).value(), 2.5, max_relative = 1e-12);
    }

    #[test]
    fn inverse_examples() {
        let s = unit();
        assert_relative_eq!(info_for_cost(&s, 1.0 / 3.0).unwrap(), 1.0, max_relative = 1e-14);
        let with_floor = ControlSummary {
            trace_sigma_s: 2.5,
            ..s
        };
        assert!(matches!(
            info_for_cost(&with_floor, 2.5),
            Err(ControlError::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn slope_and_curvature_match_finite_differences() {
        let s = ControlSummary {
            n: 10,
            log2_det_a: 3.0,
            entropy_power: 0.4,
            det_m_nth_root: 1.3,
            trace_sigma_s: 0.7,
        };
        for d in [3.5, 5.0, 12.0, 40.0] {
            let h = 1e-4;
            let f = |x: f64| lqr_lower_bound(&s, x).value();
            let fd1 = (f(d + h) - f(d - h)) / (2.0 * h);
            let fd2 = (f(d + h) - 2.0 * f(d) + f(d - h)) / (h * h);
            assert_relative_eq!(s.bound_slope(d), fd1, max_relative = 1e-6);
            assert_relative_eq!(s.bound_curvature(d), fd2, max_relative = 1e-4);
        }
    }

    #[test]
    fn cost_ordering_and_sum() {
        assert!(Cost::Finite(1e300) < Cost::Infinite);
        assert_eq!(Cost::Infinite.partial_cmp(&Cost::Infinite), Some(Ordering::Equal));
        let total: Cost = [Cost::Finite(1.0), Cost::Finite(2.0)].into_iter().sum();
        assert_eq!(total, Cost::Finite(3.0));
        let total: Cost = [Cost::Finite(1.0), Cost::Infinite].into_iter().sum();
        assert_eq!(total, Cost::Infinite);
    }
}
