//! Backward Riccati recursion and its stationary fixed point.
//!
//! Both control channels run the same scalar-size-independent recursion: the
//! augmented (leader, mean-field) problem of side `2 d_x` and the deviation
//! problem of side `d_x`. Nothing here depends on the number of followers.

use nalgebra::DMatrix;

use crate::linalg::{max_abs, spd_solve, symmetrize};
use crate::model::{build_augmented, CostModel, Horizon, SystemModel};
use crate::{Error, Result};

/// Relative step tolerance for the stationary fixed-point iteration.
pub const ARE_TOLERANCE: f64 = 1e-11;
/// Iteration cap for the stationary fixed-point iteration.
pub const ARE_MAX_ITERATIONS: usize = 100_000;
/// Extra polishing steps taken after the tolerance first fires, so the
/// certified residual lands well below the stop threshold.
const ARE_POLISH_STEPS: usize = 64;
/// Iterate magnitude treated as divergence (unstabilizable problems grow
/// without bound instead of failing cleanly).
const ARE_DIVERGENCE_CAP: f64 = 1e100;

/// One step of the backward recursion:
/// `M = A' M+ A - A' M+ B (B' M+ B + R)^{-1} B' M+ A + Q`.
///
/// The inner matrix `B' M+ B + R` is inverted through a symmetric
/// positive-definite solve; the result is symmetrized before returning.
pub fn backward_step(
    m_next: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let bt_m = b.transpose() * m_next;
    let inner = symmetrize(&(&bt_m * b + r));
    let bt_m_a = &bt_m * a;
    let x = spd_solve(&inner, &bt_m_a)?;
    let at_m = a.transpose() * m_next;
    let m = &at_m * a - bt_m_a.transpose() * x + q;
    Ok(symmetrize(&m))
}

/// The feedback gain induced by a Riccati matrix:
/// `L = -(B' M B + R)^{-1} B' M A`.
pub fn gain_from(
    m: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let bt_m = b.transpose() * m;
    let inner = symmetrize(&(&bt_m * b + r));
    let x = spd_solve(&inner, &(&bt_m * a))?;
    Ok(-x)
}

/// Convergence record for a stationary solve.
#[derive(Clone, Copy, Debug)]
pub struct AreDiagnostics {
    pub iterations: usize,
    /// Max-abs fixed-point defect `|step(M) - M|` at the returned solution.
    pub residual: f64,
}

/// Solve the discounted algebraic Riccati equation for `(a, b, q, r)` with
/// discount `beta` by value iteration from zero. The discount is folded into
/// the coefficients: the fixed point of the recursion for
/// `(sqrt(beta) a, sqrt(beta) b, q, r)` is the discounted solution.
pub fn solve_are(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    beta: f64,
) -> Result<(DMatrix<f64>, AreDiagnostics)> {
    let s = beta.sqrt();
    let a_s = a * s;
    let b_s = b * s;
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    let mut iterations = 0usize;
    let mut hit = false;
    let mut polish = 0usize;
    loop {
        let m_next = backward_step(&m, &a_s, &b_s, q, r)?;
        iterations += 1;
        let diff = max_abs(&(&m_next - &m));
        let scale = max_abs(&m_next).max(1.0);
        m = m_next;
        if !diff.is_finite() || scale > ARE_DIVERGENCE_CAP {
            return Err(Error::NotConverged { iterations, residual: diff });
        }
        if diff <= ARE_TOLERANCE * scale {
            hit = true;
        }
        if hit {
            polish += 1;
            // A few extra contraction steps push the defect far below the
            // stop threshold; bail out early once it reaches rounding scale.
            if polish >= ARE_POLISH_STEPS || diff <= 1e-13 * scale {
                break;
            }
        }
        if iterations >= ARE_MAX_ITERATIONS {
            return Err(Error::NotConverged { iterations, residual: diff });
        }
    }
    let residual = max_abs(&(backward_step(&m, &a_s, &b_s, q, r)? - &m));
    Ok((m, AreDiagnostics { iterations, residual }))
}

/// Riccati matrices for both control channels.
#[derive(Clone, Debug)]
pub enum RiccatiSolution {
    /// `m_dev[t-1]` / `m_bar[t-1]` hold the stage-`t` matrices for
    /// `t in 1..=T+1`; the last entry is the zero terminal condition.
    Finite {
        m_dev: Vec<DMatrix<f64>>,
        m_bar: Vec<DMatrix<f64>>,
    },
    Stationary {
        m_dev: DMatrix<f64>,
        m_bar: DMatrix<f64>,
        dev_diagnostics: AreDiagnostics,
        bar_diagnostics: AreDiagnostics,
    },
}

impl RiccatiSolution {
    pub fn m_dev_at(&self, t: usize) -> &DMatrix<f64> {
        match self {
            RiccatiSolution::Finite { m_dev, .. } => &m_dev[t - 1],
            RiccatiSolution::Stationary { m_dev, .. } => m_dev,
        }
    }

    pub fn m_bar_at(&self, t: usize) -> &DMatrix<f64> {
        match self {
            RiccatiSolution::Finite { m_bar, .. } => &m_bar[t - 1],
            RiccatiSolution::Stationary { m_bar, .. } => m_bar,
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            RiccatiSolution::Finite { m_dev, .. } => Some(m_dev.len() - 1),
            RiccatiSolution::Stationary { .. } => None,
        }
    }
}

/// Run the backward recursion over a finite horizon with zero terminal
/// weight, for both channels.
pub fn solve_finite(model: &SystemModel, cost: &CostModel) -> Result<RiccatiSolution> {
    let t_final = match cost.horizon {
        Horizon::Finite { t } => t,
        Horizon::Infinite { .. } => {
            return Err(Error::DimensionMismatch {
                name: "horizon",
                expected: "finite horizon".into(),
                got: "infinite".into(),
            });
        }
    };
    let d_x = model.dims.d_x;
    let mut m_dev = vec![DMatrix::zeros(d_x, d_x); t_final + 1];
    let mut m_bar = vec![DMatrix::zeros(2 * d_x, 2 * d_x); t_final + 1];
    for t in (1..=t_final).rev() {
        let aug = build_augmented(model, cost, t);
        let dev =
            backward_step(&m_dev[t], model.a.at(t), model.b.at(t), &aug.q_dev, &aug.r_dev)?;
        let bar = backward_step(&m_bar[t], &aug.a_bar, &aug.b_bar, &aug.q_bar, &aug.r_bar)?;
        debug_assert_psd(&dev);
        debug_assert_psd(&bar);
        m_dev[t - 1] = dev;
        m_bar[t - 1] = bar;
    }
    Ok(RiccatiSolution::Finite { m_dev, m_bar })
}

/// Solve both stationary equations for a discounted infinite-horizon cost.
pub fn solve_stationary(model: &SystemModel, cost: &CostModel) -> Result<RiccatiSolution> {
    let beta = match cost.horizon {
        Horizon::Infinite { beta } => beta,
        Horizon::Finite { .. } => {
            return Err(Error::DimensionMismatch {
                name: "horizon",
                expected: "infinite horizon".into(),
                got: "finite".into(),
            });
        }
    };
    let aug = build_augmented(model, cost, 1);
    let (m_dev, dev_diagnostics) =
        solve_are(model.a.at(1), model.b.at(1), &aug.q_dev, &aug.r_dev, beta)?;
    let (m_bar, bar_diagnostics) =
        solve_are(&aug.a_bar, &aug.b_bar, &aug.q_bar, &aug.r_bar, beta)?;
    log::debug!(
        "stationary solve: deviation {} iters (residual {:.3e}), augmented {} iters (residual {:.3e})",
        dev_diagnostics.iterations,
        dev_diagnostics.residual,
        bar_diagnostics.iterations,
        bar_diagnostics.residual
    );
    Ok(RiccatiSolution::Stationary { m_dev, m_bar, dev_diagnostics, bar_diagnostics })
}

/// Dispatch on the cost horizon.
pub fn solve(model: &SystemModel, cost: &CostModel) -> Result<RiccatiSolution> {
    match cost.horizon {
        Horizon::Finite { .. } => solve_finite(model, cost),
        Horizon::Infinite { .. } => solve_stationary(model, cost),
    }
}

fn debug_assert_psd(m: &DMatrix<f64>) {
    debug_assert!(
        {
            let min = crate::linalg::sym_eigenvalues(m)[0];
            min >= -1e-8 * max_abs(m).max(1.0)
        },
        "Riccati iterate lost positive semidefiniteness"
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dist, InitialState, MatSeq, NoiseModel};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_team(t: Option<usize>) -> (SystemModel, CostModel) {
        let seq = |v: f64| MatSeq::constant(m1(v));
        let model = SystemModel::new(
            100,
            t,
            seq(1.0),
            seq(0.3),
            seq(0.05),
            seq(1.0),
            seq(0.2),
            seq(0.01),
            seq(0.01),
            NoiseModel::zero(0),
            InitialState::Constant(DVector::from_element(1, 30.0)),
            Dist::Zero,
        )
        .unwrap();
        let horizon = match t {
            Some(t) => Horizon::Finite { t },
            None => Horizon::Infinite { beta: 1.0 },
        };
        let cost = CostModel::new(
            1,
            1,
            seq(1.0),
            seq(100.0),
            seq(0.1),
            seq(50.0),
            seq(50.0),
            seq(1.0),
            horizon,
        )
        .unwrap();
        (model, cost)
    }

    #[test]
    fn terminal_step_returns_the_state_weight_exactly() {
        let zero = DMatrix::zeros(1, 1);
        let m = backward_step(&zero, &m1(1.0), &m1(0.2), &m1(51.1), &m1(50.0)).unwrap();
        assert_eq!(m, m1(51.1));
    }

    #[test]
    fn second_to_last_step_matches_hand_computation() {
        // step(51.1) = 2*51.1 - (0.2*51.1)^2 / (0.04*51.1 + 50) = 100.193075...
        let m = backward_step(&m1(51.1), &m1(1.0), &m1(0.2), &m1(51.1), &m1(50.0)).unwrap();
        let hand = 51.1 + 51.1 - (0.2f64 * 51.1).powi(2) / (0.04 * 51.1 + 50.0);
        assert_relative_eq!(m[(0, 0)], hand, epsilon = 1e-12);
        assert_relative_eq!(m[(0, 0)], 100.1930750903082, epsilon = 1e-9);
    }

    #[test]
    fn finite_solution_has_terminal_zero_and_monotone_deviation_channel() {
        let (model, cost) = scalar_team(Some(80));
        let sol = solve_finite(&model, &cost).unwrap();
        let RiccatiSolution::Finite { m_dev, m_bar } = &sol else { panic!() };
        assert_eq!(m_dev.len(), 81);
        assert_eq!(m_bar.len(), 81);
        assert_eq!(m_dev[80], DMatrix::zeros(1, 1));
        assert_eq!(m_dev[79], m1(51.1));
        // Backward iterates of the zero-terminal recursion grow toward the
        // stationary solution as the remaining horizon lengthens.
        for t in (1..=80).rev() {
            assert!(m_dev[t - 1][(0, 0)] >= m_dev[t][(0, 0)] - 1e-12);
        }
    }

    #[test]
    fn stationary_deviation_solution_matches_the_quadratic_root() {
        let (model, cost) = scalar_team(None);
        let sol = solve_stationary(&model, &cost).unwrap();
        let RiccatiSolution::Stationary { m_dev, dev_diagnostics, .. } = &sol else { panic!() };
        // Positive root of m^2 - 51.1 m - 63875 = 0.
        let exact = (51.1 + (51.1f64 * 51.1 + 4.0 * 63875.0).sqrt()) / 2.0;
        assert_relative_eq!(m_dev[(0, 0)], exact, epsilon = 1e-7);
        assert_relative_eq!(m_dev[(0, 0)], 279.57325, epsilon = 1e-4);
        assert!(dev_diagnostics.residual < 1e-9, "residual {}", dev_diagnostics.residual);
    }

    #[test]
    fn discount_folds_into_the_coefficients() {
        for beta in [0.5, 0.9] {
            let a = DMatrix::from_row_slice(2, 2, &[1.05, 0.1, 0.0, 0.9]);
            let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
            let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
            let r = m1(1.0);
            let (m_disc, _) = solve_are(&a, &b, &q, &r, beta).unwrap();
            let s = beta.sqrt();
            let (m_scaled, _) = solve_are(&(&a * s), &(&b * s), &q, &r, 1.0).unwrap();
            let diff = max_abs(&(&m_disc - &m_scaled));
            assert!(diff < 1e-9, "beta {beta}: diff {diff}");
        }
    }

    #[test]
    fn unstabilizable_problem_reports_non_convergence() {
        // Unstable and unactuated: iterates grow geometrically.
        let err = solve_are(&m1(2.0), &m1(0.0), &m1(1.0), &m1(1.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }), "{err}");
    }

    #[test]
    fn zero_control_weight_with_no_actuation_is_singular() {
        let err = backward_step(&m1(1.0), &m1(1.0), &m1(0.0), &m1(1.0), &m1(0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularInnerMatrix { .. }), "{err}");
    }

    #[test]
    fn gain_matches_closed_form_for_the_stationary_deviation_problem() {
        let (model, cost) = scalar_team(None);
        let sol = solve_stationary(&model, &cost).unwrap();
        let l = gain_from(sol.m_dev_at(1), &m1(1.0), &m1(0.2), &m1(50.0)).unwrap();
        // -(0.2 * M) / (0.04 * M + 50) at M = 279.57325.
        assert_relative_eq!(l[(0, 0)], -0.91389, epsilon = 1e-4);
    }
}
