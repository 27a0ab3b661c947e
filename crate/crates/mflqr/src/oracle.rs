//! Brute-force centralized check of the structured solution.
//!
//! The full team is one big LQR problem on the stacked state
//! `(x0, x1, ..., xn)`. Solving it directly costs a Riccati recursion on
//! matrices of side `(n+1) d_x` — exactly what the structured solution
//! avoids — which makes it a trustworthy oracle for small teams: the
//! structured gains, rearranged into stacked form, must reproduce the
//! centralized optimal gain to rounding accuracy.

use nalgebra::{DMatrix, DVector};

use crate::gains::{stationary_gain_from, GainSchedule};
use crate::model::{is_leaderless, CostModel, Horizon, SystemModel};
use crate::riccati::{backward_step, gain_from, solve_are};
use crate::{Error, Result};

/// Hard cap on the stacked state dimension `(n+1) d_x`.
pub const MAX_CENTRALIZED_DIM: usize = 200;

/// The stacked LQR problem.
#[derive(Clone, Debug)]
pub struct CentralizedProblem {
    pub a_c: DMatrix<f64>,
    pub b_c: DMatrix<f64>,
    pub q_c: DMatrix<f64>,
    pub r_c: DMatrix<f64>,
    pub n: usize,
    pub d_x: usize,
    pub d_u: usize,
}

/// Stacked feedback gains, one per stage or stationary.
#[derive(Clone, Debug)]
pub enum CentralizedGains {
    Finite(Vec<DMatrix<f64>>),
    Stationary(DMatrix<f64>),
}

impl CentralizedGains {
    pub fn at(&self, t: usize) -> &DMatrix<f64> {
        match self {
            CentralizedGains::Finite(v) => &v[t - 1],
            CentralizedGains::Stationary(k) => k,
        }
    }
}

/// Assemble the stacked problem for a team of `n` followers.
///
/// Stacked state `(x0, x1, ..., xn)`, stacked control `(u0, u1, ..., un)`.
/// The mean-field couplings turn into `1/n` blocks: the leader row carries
/// `D0/n` toward every follower, follower rows carry `D/n` toward every
/// follower (plus `A` on their own block) and `E` toward the leader. The
/// cost blocks come from expanding the team cost in the stacked coordinates,
/// including the `-H/n^2` cross terms of the pairwise spread penalty.
pub fn build_centralized(
    model: &SystemModel,
    cost: &CostModel,
    n: usize,
) -> Result<CentralizedProblem> {
    if !model.is_time_invariant() || !cost.is_time_invariant() {
        return Err(Error::TimeVarying);
    }
    if is_leaderless(model, cost) {
        return Err(Error::LeaderlessMode(
            "centralized oracle needs the leader control channel",
        ));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch {
            name: "n",
            expected: "at least one follower".into(),
            got: "0".into(),
        });
    }
    let d_x = model.dims.d_x;
    let d_u = model.dims.d_u;
    let dim = (n + 1) * d_x;
    if dim > MAX_CENTRALIZED_DIM {
        return Err(Error::TooLarge { dim, limit: MAX_CENTRALIZED_DIM });
    }
    let nf = n as f64;

    let a0 = model.a0.at(1);
    let b0 = model.b0.at(1);
    let d0_over_n = model.d0.at(1) / nf;
    let a = model.a.at(1);
    let b = model.b.at(1);
    let d_over_n = model.d.at(1) / nf;
    let e = model.e.at(1);

    let mut a_c = DMatrix::zeros(dim, dim);
    a_c.view_mut((0, 0), (d_x, d_x)).copy_from(a0);
    for j in 1..=n {
        a_c.view_mut((0, j * d_x), (d_x, d_x)).copy_from(&d0_over_n);
    }
    for i in 1..=n {
        a_c.view_mut((i * d_x, 0), (d_x, d_x)).copy_from(e);
        for j in 1..=n {
            let mut block = d_over_n.clone();
            if i == j {
                block += a;
            }
            a_c.view_mut((i * d_x, j * d_x), (d_x, d_x)).copy_from(&block);
        }
    }

    let mut b_c = DMatrix::zeros(dim, (n + 1) * d_u);
    b_c.view_mut((0, 0), (d_x, d_u)).copy_from(b0);
    for i in 1..=n {
        b_c.view_mut((i * d_x, i * d_u), (d_x, d_u)).copy_from(b);
    }

    let q0 = cost.q0.at(1);
    let p = cost.p.at(1);
    let h = cost.h.at(1);
    let q_dev = cost.q_dev(1);
    let p_over_n = p / nf;
    let h_over_n2 = h / (nf * nf);
    let mut q_c = DMatrix::zeros(dim, dim);
    q_c.view_mut((0, 0), (d_x, d_x)).copy_from(&(q0 + p));
    for i in 1..=n {
        q_c.view_mut((0, i * d_x), (d_x, d_x)).copy_from(&(-&p_over_n));
        q_c.view_mut((i * d_x, 0), (d_x, d_x)).copy_from(&(-&p_over_n));
        for j in 1..=n {
            let block = if i == j {
                &q_dev / nf - &h_over_n2
            } else {
                -h_over_n2.clone()
            };
            q_c.view_mut((i * d_x, j * d_x), (d_x, d_x)).copy_from(&block);
        }
    }

    let r0 = cost.r0.at(1);
    let r_over_n = cost.r.at(1) / nf;
    let mut r_c = DMatrix::zeros((n + 1) * d_u, (n + 1) * d_u);
    r_c.view_mut((0, 0), (d_u, d_u)).copy_from(r0);
    for i in 1..=n {
        r_c.view_mut((i * d_u, i * d_u), (d_u, d_u)).copy_from(&r_over_n);
    }

    Ok(CentralizedProblem { a_c, b_c, q_c, r_c, n, d_x, d_u })
}

/// Solve the stacked LQR problem directly.
pub fn solve_centralized(cp: &CentralizedProblem, horizon: Horizon) -> Result<CentralizedGains> {
    match horizon {
        Horizon::Finite { t } => {
            let mut m = DMatrix::zeros(cp.a_c.nrows(), cp.a_c.ncols());
            let mut gains = vec![DMatrix::zeros(0, 0); t];
            for stage in (1..=t).rev() {
                gains[stage - 1] = gain_from(&m, &cp.a_c, &cp.b_c, &cp.r_c)?;
                m = backward_step(&m, &cp.a_c, &cp.b_c, &cp.q_c, &cp.r_c)?;
            }
            Ok(CentralizedGains::Finite(gains))
        }
        Horizon::Infinite { beta } => {
            let (m, _) = solve_are(&cp.a_c, &cp.b_c, &cp.q_c, &cp.r_c, beta)?;
            let k = stationary_gain_from(&m, &cp.a_c, &cp.b_c, &cp.r_c, beta)?;
            Ok(CentralizedGains::Stationary(k))
        }
    }
}

/// Rearrange the structured strategy into a stacked gain: what the
/// mean-field feedback laws look like as one big state-feedback matrix.
pub fn assemble_meanfield_as_centralized(
    gains: &GainSchedule,
    n: usize,
) -> Result<CentralizedGains> {
    let assemble = |step: &crate::gains::GainStep| -> Result<DMatrix<f64>> {
        let row = step
            .leader
            .as_ref()
            .ok_or(Error::LeaderlessMode("stacked form needs the leader row"))?;
        let d_u = step.l_dev.nrows();
        let d_x = step.l_dev.ncols();
        let nf = n as f64;
        let l12_over_n = &row.l12 / nf;
        let mix_over_n = (&step.l22 - &step.l_dev) / nf;
        let mut k = DMatrix::zeros((n + 1) * d_u, (n + 1) * d_x);
        k.view_mut((0, 0), (d_u, d_x)).copy_from(&row.l11);
        for j in 1..=n {
            k.view_mut((0, j * d_x), (d_u, d_x)).copy_from(&l12_over_n);
        }
        for i in 1..=n {
            k.view_mut((i * d_u, 0), (d_u, d_x)).copy_from(&step.l21);
            for j in 1..=n {
                let block = if i == j {
                    &mix_over_n + &step.l_dev
                } else {
                    mix_over_n.clone()
                };
                k.view_mut((i * d_u, j * d_x), (d_u, d_x)).copy_from(&block);
            }
        }
        Ok(k)
    };
    match gains {
        GainSchedule::Finite(steps) => {
            let ks: Result<Vec<_>> = steps.iter().map(assemble).collect();
            Ok(CentralizedGains::Finite(ks?))
        }
        GainSchedule::Stationary(step) => Ok(CentralizedGains::Stationary(assemble(step)?)),
    }
}

/// Largest entry difference between two stacked gain schedules.
pub fn compare(a: &CentralizedGains, b: &CentralizedGains) -> Result<f64> {
    let pairs: Vec<(&DMatrix<f64>, &DMatrix<f64>)> = match (a, b) {
        (CentralizedGains::Finite(x), CentralizedGains::Finite(y)) if x.len() == y.len() => {
            x.iter().zip(y.iter()).collect()
        }
        (CentralizedGains::Stationary(x), CentralizedGains::Stationary(y)) => vec![(x, y)],
        _ => {
            return Err(Error::DimensionMismatch {
                name: "gain schedules",
                expected: "matching horizon kinds and lengths".into(),
                got: "mismatched".into(),
            });
        }
    };
    let mut worst = 0.0f64;
    for (x, y) in pairs {
        if x.shape() != y.shape() {
            return Err(Error::DimensionMismatch {
                name: "gain matrices",
                expected: format!("{}x{}", x.nrows(), x.ncols()),
                got: format!("{}x{}", y.nrows(), y.ncols()),
            });
        }
        worst = worst.max(crate::linalg::max_abs(&(x - y)));
    }
    Ok(worst)
}

/// Exact expected discounted cost of a linear strategy on the stacked
/// problem, by propagating second moments: with `F_t = A_c + B_c K_t`,
/// `S_{t+1} = F_t S_t F_t' + W` and each stage contributes
/// `beta^{t-1} trace((Q_c + K_t' R_c K_t) S_t)`. Exact for any zero-mean
/// noise with covariance `W`, not just gaussian.
pub fn expected_cost(
    cp: &CentralizedProblem,
    gains: &CentralizedGains,
    init_mean: &DVector<f64>,
    init_cov: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
    steps: usize,
    beta: f64,
) -> Result<f64> {
    let dim = cp.a_c.nrows();
    if init_mean.len() != dim || init_cov.shape() != (dim, dim) || noise_cov.shape() != (dim, dim)
    {
        return Err(Error::DimensionMismatch {
            name: "moments",
            expected: format!("stacked dimension {dim}"),
            got: format!(
                "mean {}, cov {}x{}, noise {}x{}",
                init_mean.len(),
                init_cov.nrows(),
                init_cov.ncols(),
                noise_cov.nrows(),
                noise_cov.ncols()
            ),
        });
    }
    if let CentralizedGains::Finite(v) = gains {
        if v.len() != steps {
            return Err(Error::DimensionMismatch {
                name: "steps",
                expected: format!("{} stages", v.len()),
                got: format!("{steps}"),
            });
        }
    }
    let mut s = init_cov + init_mean * init_mean.transpose();
    let mut total = 0.0;
    let mut weight = 1.0;
    for t in 1..=steps {
        let k = gains.at(t);
        let stage_weight = &cp.q_c + k.transpose() * &cp.r_c * k;
        total += weight * (&stage_weight * &s).trace();
        if t < steps {
            let f = &cp.a_c + &cp.b_c * k;
            s = &f * s * f.transpose() + noise_cov;
            weight *= beta;
        }
    }
    Ok(total)
}

/// Stacked first/second moments of the initial state and the per-transition
/// noise covariance, block-diagonal over (leader, follower 1, ..).
pub fn stacked_moments(
    model: &SystemModel,
    n: usize,
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d_x = model.dims.d_x;
    let dim = (n + 1) * d_x;
    let mut mean = DVector::zeros(dim);
    mean.rows_mut(0, d_x).copy_from(&model.x0_init.mean(d_x));
    let f_mean = model.follower_init.mean(d_x);
    for i in 1..=n {
        mean.rows_mut(i * d_x, d_x).copy_from(&f_mean);
    }

    let mut init_cov = DMatrix::zeros(dim, dim);
    init_cov
        .view_mut((0, 0), (d_x, d_x))
        .copy_from(&model.x0_init.cov_matrix(d_x));
    let f_cov = model.follower_init.cov_matrix(d_x);
    for i in 1..=n {
        init_cov
            .view_mut((i * d_x, i * d_x), (d_x, d_x))
            .copy_from(&f_cov);
    }

    let mut noise_cov = DMatrix::zeros(dim, dim);
    noise_cov
        .view_mut((0, 0), (d_x, d_x))
        .copy_from(&model.noise.leader.cov_matrix(d_x));
    let w_cov = model.noise.follower.cov_matrix(d_x);
    for i in 1..=n {
        noise_cov
            .view_mut((i * d_x, i * d_x), (d_x, d_x))
            .copy_from(&w_cov);
    }
    (mean, init_cov, noise_cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::compute_gains;
    use crate::model::{build_augmented, Dist, InitialState, MatSeq, NoiseModel};
    use crate::riccati;
    use crate::sim::{evaluate_cost_direct, simulate};
    use approx::assert_relative_eq;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn team(n: usize, t: usize) -> (SystemModel, CostModel) {
        let seq = |v: f64| MatSeq::constant(m1(v));
        let model = SystemModel::new(
            n,
            Some(t),
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
        let cost = CostModel::new(
            1,
            1,
            seq(1.0),
            seq(100.0),
            seq(0.1),
            seq(50.0),
            seq(50.0),
            seq(1.0),
            Horizon::Finite { t },
        )
        .unwrap();
        (model, cost)
    }

    #[test]
    fn single_follower_stacking_degenerates_to_the_augmented_system() {
        let (model, cost) = team(1, 10);
        let cp = build_centralized(&model, &cost, 1).unwrap();
        let aug = build_augmented(&model, &cost, 1);
        // With one follower the mean field IS the follower, so the stacked
        // problem and the augmented problem are the same 2x2 system; the
        // spread-penalty correction H/n - H/n^2 vanishes identically.
        assert_relative_eq!(
            crate::linalg::max_abs(&(&cp.a_c - &aug.a_bar)), 0.0, epsilon = 1e-14
        );
        assert_relative_eq!(
            crate::linalg::max_abs(&(&cp.b_c - &aug.b_bar)), 0.0, epsilon = 1e-14
        );
        assert_relative_eq!(
            crate::linalg::max_abs(&(&cp.q_c - &aug.q_bar)), 0.0, epsilon = 1e-12
        );
        assert_relative_eq!(
            crate::linalg::max_abs(&(&cp.r_c - &aug.r_bar)), 0.0, epsilon = 1e-14
        );
    }

    #[test]
    fn stacked_blocks_follow_the_assembly_rules() {
        let (model, cost) = team(3, 5);
        let cp = build_centralized(&model, &cost, 3).unwrap();
        let n = 3.0;
        // Leader row: A0 on its own block, D0/n toward each follower.
        assert_eq!(cp.a_c[(0, 0)], 1.0);
        assert_eq!(cp.a_c[(0, 1)], 0.05 / n);
        assert_eq!(cp.a_c[(0, 3)], 0.05 / n);
        // Follower rows: E toward the leader, A + D/n on the diagonal, D/n
        // elsewhere.
        assert_eq!(cp.a_c[(2, 0)], 0.01);
        assert_eq!(cp.a_c[(2, 2)], 1.0 + 0.01 / n);
        assert_eq!(cp.a_c[(2, 1)], 0.01 / n);
        // Cost blocks.
        assert_eq!(cp.q_c[(0, 0)], 51.0); // Q0 + P
        assert_eq!(cp.q_c[(0, 2)], -50.0 / n);
        assert_relative_eq!(cp.q_c[(1, 1)], 51.1 / n - 1.0 / (n * n), epsilon = 1e-15);
        assert_relative_eq!(cp.q_c[(1, 2)], -1.0 / (n * n), epsilon = 1e-15);
        assert_eq!(cp.r_c[(0, 0)], 100.0);
        assert_eq!(cp.r_c[(2, 2)], 50.0 / n);
        // Controls are block-diagonal.
        assert_eq!(cp.b_c[(0, 0)], 0.3);
        assert_eq!(cp.b_c[(1, 1)], 0.2);
        assert_eq!(cp.b_c[(1, 2)], 0.0);
    }

    /// Team cost of a one-stage profile, priced both ways: through the
    /// stacked quadratic forms and through the literal per-agent evaluator.
    fn price_both_ways(
        cp: &CentralizedProblem,
        cost: &CostModel,
        states: &[f64],
        controls: &[f64],
    ) -> (f64, f64) {
        let n = cp.n;
        let z = DVector::from_row_slice(states);
        let v = DVector::from_row_slice(controls);
        let quad = (&cp.q_c * &z).dot(&z) + (&cp.r_c * &v).dot(&v);

        let trace = crate::sim::SimulationTrace {
            n,
            d_x: 1,
            d_u: 1,
            steps: 1,
            leader_states: vec![DVector::from_element(1, states[0])],
            leader_actions: vec![DVector::from_element(1, controls[0])],
            follower_states: vec![DMatrix::from_row_slice(1, n, &states[1..])],
            follower_actions: vec![DMatrix::from_row_slice(1, n, &controls[1..])],
            meanfield: vec![DVector::from_element(
                1,
                states[1..].iter().sum::<f64>() / n as f64,
            )],
            leader_noise: vec![],
            follower_noise: vec![],
            stage_costs: vec![0.0],
        };
        (quad, evaluate_cost_direct(&trace, cost))
    }

    #[test]
    fn stacked_cost_matrix_prices_the_literal_team_cost() {
        let (model, cost) = team(3, 5);
        let cp = build_centralized(&model, &cost, 3).unwrap();
        // An irregular deterministic profile first, then a hundred random
        // ones: the quadratic forms must price every profile, not just the
        // ones a closed-loop run happens to visit.
        let (quad, direct) =
            price_both_ways(&cp, &cost, &[2.0, -1.0, 0.5, 3.0], &[0.3, -0.7, 0.2, 1.1]);
        assert_relative_eq!(quad, direct, max_relative = 1e-13);

        let mut rng = crate::rng::NoiseStream::new(7, 0, 0);
        for _ in 0..100 {
            let draw = |rng: &mut crate::rng::NoiseStream| {
                [0.0; 4].map(|_| 10.0 * (rng.uniform() - 0.5))
            };
            let states = draw(&mut rng);
            let controls = draw(&mut rng);
            let (quad, direct) = price_both_ways(&cp, &cost, &states, &controls);
            assert_relative_eq!(quad, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn stacked_gain_reproduces_the_per_agent_feedback_laws() {
        use crate::gains::{follower_action, leader_action, GainStep, LeaderRow};
        // The stacking identity is pure bookkeeping, so it must hold for ANY
        // gain blocks, optimal or not. Draw them at random (2-dim state and
        // control, two followers) and compare K*z against the per-agent maps.
        let mut rng = crate::rng::NoiseStream::new(13, 0, 0);
        let mut rand_m = |r: usize, c: usize| {
            DMatrix::from_fn(r, c, |_, _| 4.0 * (rng.uniform() - 0.5))
        };
        let step = GainStep {
            l_dev: rand_m(2, 2),
            leader: Some(LeaderRow { l11: rand_m(2, 2), l12: rand_m(2, 2) }),
            l21: rand_m(2, 2),
            l22: rand_m(2, 2),
        };
        let sched = GainSchedule::Stationary(step);
        let n = 2;
        let k = match assemble_meanfield_as_centralized(&sched, n).unwrap() {
            CentralizedGains::Stationary(k) => k,
            CentralizedGains::Finite(_) => unreachable!(),
        };
        for _ in 0..20 {
            let z = DVector::from_fn((n + 1) * 2, |_, _| 6.0 * (rng.uniform() - 0.5));
            let x0 = z.rows(0, 2).into_owned();
            let x1 = z.rows(2, 2).into_owned();
            let x2 = z.rows(4, 2).into_owned();
            let xbar = (&x1 + &x2) / 2.0;
            let stacked = &k * &z;
            let u0 = leader_action(&sched, 1, &x0, &xbar).unwrap();
            let u1 = follower_action(&sched, 1, &x1, &x0, &xbar);
            let u2 = follower_action(&sched, 1, &x2, &x0, &xbar);
            let mut direct = DVector::zeros((n + 1) * 2);
            direct.rows_mut(0, 2).copy_from(&u0);
            direct.rows_mut(2, 2).copy_from(&u1);
            direct.rows_mut(4, 2).copy_from(&u2);
            let diff = (&stacked - &direct).amax();
            assert!(diff < 1e-12, "stacked action differs by {diff}");
        }
    }

    #[test]
    fn structured_gains_match_the_centralized_solution() {
        let (model, cost) = team(2, 5);
        let sol = riccati::solve(&model, &cost).unwrap();
        let gains = compute_gains(&sol, &model, &cost).unwrap();
        let cp = build_centralized(&model, &cost, 2).unwrap();
        let brute = solve_centralized(&cp, Horizon::Finite { t: 5 }).unwrap();
        let stacked = assemble_meanfield_as_centralized(&gains, 2).unwrap();
        let diff = compare(&brute, &stacked).unwrap();
        assert!(diff < 1e-10, "gain difference {diff}");
    }

    #[test]
    fn expected_cost_equals_realized_cost_for_a_deterministic_team() {
        let (model, cost) = team(3, 7);
        let sol = riccati::solve(&model, &cost).unwrap();
        let gains = compute_gains(&sol, &model, &cost).unwrap();
        let trace = simulate(&model, &cost, &gains, 7, 0).unwrap();
        let realized = evaluate_cost_direct(&trace, &cost);

        let cp = build_centralized(&model, &cost, 3).unwrap();
        let stacked = assemble_meanfield_as_centralized(&gains, 3).unwrap();
        let (mean, init_cov, noise_cov) = stacked_moments(&model, 3);
        let expected =
            expected_cost(&cp, &stacked, &mean, &init_cov, &noise_cov, 7, 1.0).unwrap();
        assert_relative_eq!(expected, realized, max_relative = 1e-10);
    }

    #[test]
    fn monte_carlo_average_confirms_the_expected_cost() {
        let seq = |v: f64| MatSeq::constant(m1(v));
        let model = SystemModel::new(
            2,
            Some(4),
            seq(1.0),
            seq(0.3),
            seq(0.05),
            seq(1.0),
            seq(0.2),
            seq(0.01),
            seq(0.01),
            NoiseModel::new(
                Dist::gaussian("w0", m1(0.1)).unwrap(),
                Dist::uniform(
                    "wi",
                    DVector::from_element(1, -0.6),
                    DVector::from_element(1, 0.6),
                )
                .unwrap(),
                0,
            )
            .unwrap(),
            InitialState::Constant(DVector::from_element(1, 5.0)),
            Dist::uniform(
                "init",
                DVector::from_element(1, 0.0),
                DVector::from_element(1, 4.0),
            )
            .unwrap(),
        )
        .unwrap();
        let cost = CostModel::new(
            1,
            1,
            seq(1.0),
            seq(100.0),
            seq(0.1),
            seq(50.0),
            seq(50.0),
            seq(1.0),
            Horizon::Finite { t: 4 },
        )
        .unwrap();
        let sol = riccati::solve(&model, &cost).unwrap();
        let gains = compute_gains(&sol, &model, &cost).unwrap();

        let cp = build_centralized(&model, &cost, 2).unwrap();
        let stacked = assemble_meanfield_as_centralized(&gains, 2).unwrap();
        let (mean, init_cov, noise_cov) = stacked_moments(&model, 2);
        let expected =
            expected_cost(&cp, &stacked, &mean, &init_cov, &noise_cov, 4, 1.0).unwrap();

        let runs = 20_000usize;
        let mut samples = Vec::with_capacity(runs);
        for k in 0..runs {
            let trace = simulate(&model, &cost, &gains, 4, 1000 + k as u64).unwrap();
            samples.push(evaluate_cost_direct(&trace, &cost));
        }
        let mc_mean = samples.iter().sum::<f64>() / runs as f64;
        let var = samples
            .iter()
            .map(|c| (c - mc_mean) * (c - mc_mean))
            .sum::<f64>()
            / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        assert!(
            (mc_mean - expected).abs() < 3.0 * se,
            "expected {expected}, monte-carlo {mc_mean} +- {se}"
        );
    }

    #[test]
    fn oversized_teams_are_refused() {
        let (model, cost) = team(2, 5);
        let err = build_centralized(&model, &cost, 500).unwrap_err();
        assert!(matches!(err, Error::TooLarge { dim: 501, .. }), "{err}");
    }
}
