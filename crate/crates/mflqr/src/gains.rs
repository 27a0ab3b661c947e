//! Feedback-law assembly on top of the Riccati solutions, plus the
//! consensus-style reparametrization of the same strategy.
//!
//! The leader plays `u0 = L11 x0 + L12 xbar`. Follower `i` plays
//! `ui = Ldev xi + L21 x0 + (L22 - Ldev) xbar`, where `[L11 L12; L21 L22]`
//! is the augmented-channel gain and `Ldev` the deviation-channel gain.
//! Every follower applies the same coefficients; only its own state differs.

use nalgebra::{DMatrix, DVector};

use crate::linalg::rcond;
use crate::model::{build_augmented, CostModel, Horizon, SystemModel};
use crate::riccati::{gain_from, RiccatiSolution};
use crate::{Error, Result};

/// Reciprocal-condition floor below which a gain block is treated as
/// non-invertible by the consensus reparametrization.
pub const CONSENSUS_RCOND_MIN: f64 = 1e-12;

/// Leader row of the augmented gain.
#[derive(Clone, Debug)]
pub struct LeaderRow {
    pub l11: DMatrix<f64>,
    pub l12: DMatrix<f64>,
}

/// All gain blocks for one stage.
#[derive(Clone, Debug)]
pub struct GainStep {
    /// Deviation-channel gain applied to the follower's own state.
    pub l_dev: DMatrix<f64>,
    /// `None` for leaderless models, which have no leader control channel.
    pub leader: Option<LeaderRow>,
    pub l21: DMatrix<f64>,
    pub l22: DMatrix<f64>,
}

/// The complete strategy: one [`GainStep`] per stage, or a single stationary
/// step.
#[derive(Clone, Debug)]
pub enum GainSchedule {
    Finite(Vec<GainStep>),
    Stationary(GainStep),
}

impl GainSchedule {
    pub fn at(&self, t: usize) -> &GainStep {
        match self {
            GainSchedule::Finite(steps) => &steps[t - 1],
            GainSchedule::Stationary(step) => step,
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            GainSchedule::Finite(steps) => Some(steps.len()),
            GainSchedule::Stationary(_) => None,
        }
    }

    pub fn is_leaderless(&self) -> bool {
        self.at(1).leader.is_none()
    }
}

/// Stationary gain under discounting:
/// `L = -(B' M B + R/beta)^{-1} B' M A` with the undiscounted coefficients.
/// Algebraically this equals the gain of the `sqrt(beta)`-scaled system, but
/// it is computed through a different route, which the tests exploit.
pub fn stationary_gain_from(
    m: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    beta: f64,
) -> Result<DMatrix<f64>> {
    let r_over_beta = r / beta;
    gain_from(m, a, b, &r_over_beta)
}

fn split_bar_gain(l_bar: DMatrix<f64>, d_x: usize, d_u: usize, leaderless: bool) -> GainStep {
    if leaderless {
        // Single row block: the mean-field control channel.
        let l21 = l_bar.view((0, 0), (d_u, d_x)).into_owned();
        let l22 = l_bar.view((0, d_x), (d_u, d_x)).into_owned();
        GainStep { l_dev: DMatrix::zeros(d_u, d_x), leader: None, l21, l22 }
    } else {
        let l11 = l_bar.view((0, 0), (d_u, d_x)).into_owned();
        let l12 = l_bar.view((0, d_x), (d_u, d_x)).into_owned();
        let l21 = l_bar.view((d_u, 0), (d_u, d_x)).into_owned();
        let l22 = l_bar.view((d_u, d_x), (d_u, d_x)).into_owned();
        GainStep {
            l_dev: DMatrix::zeros(d_u, d_x),
            leader: Some(LeaderRow { l11, l12 }),
            l21,
            l22,
        }
    }
}

/// Assemble the full gain schedule from the Riccati solution.
pub fn compute_gains(
    riccati: &RiccatiSolution,
    model: &SystemModel,
    cost: &CostModel,
) -> Result<GainSchedule> {
    let d_x = model.dims.d_x;
    let d_u = model.dims.d_u;
    match (riccati, cost.horizon) {
        (RiccatiSolution::Finite { m_dev, m_bar }, Horizon::Finite { t }) => {
            let mut steps = Vec::with_capacity(t);
            for stage in 1..=t {
                let aug = build_augmented(model, cost, stage);
                // Gains at stage t come from the stage-(t+1) Riccati matrix.
                let l_dev = gain_from(
                    &m_dev[stage],
                    model.a.at(stage),
                    model.b.at(stage),
                    &aug.r_dev,
                )?;
                let l_bar = gain_from(&m_bar[stage], &aug.a_bar, &aug.b_bar, &aug.r_bar)?;
                let mut step = split_bar_gain(l_bar, d_x, d_u, aug.leaderless);
                step.l_dev = l_dev;
                steps.push(step);
            }
            Ok(GainSchedule::Finite(steps))
        }
        (RiccatiSolution::Stationary { m_dev, m_bar, .. }, Horizon::Infinite { beta }) => {
            let aug = build_augmented(model, cost, 1);
            let l_dev =
                stationary_gain_from(m_dev, model.a.at(1), model.b.at(1), &aug.r_dev, beta)?;
            let l_bar = stationary_gain_from(m_bar, &aug.a_bar, &aug.b_bar, &aug.r_bar, beta)?;
            let mut step = split_bar_gain(l_bar, d_x, d_u, aug.leaderless);
            step.l_dev = l_dev;
            Ok(GainSchedule::Stationary(step))
        }
        _ => Err(Error::DimensionMismatch {
            name: "gains",
            expected: "matching Riccati solution and cost horizon".into(),
            got: "finite/stationary mix".into(),
        }),
    }
}

/// Leader control at stage `t`.
pub fn leader_action(
    gains: &GainSchedule,
    t: usize,
    x0: &DVector<f64>,
    xbar: &DVector<f64>,
) -> Result<DVector<f64>> {
    let step = gains.at(t);
    let row = step
        .leader
        .as_ref()
        .ok_or(Error::LeaderlessMode("leader has no control channel"))?;
    Ok(&row.l11 * x0 + &row.l12 * xbar)
}

/// Follower control at stage `t`; identical coefficients for every follower.
pub fn follower_action(
    gains: &GainSchedule,
    t: usize,
    xi: &DVector<f64>,
    x0: &DVector<f64>,
    xbar: &DVector<f64>,
) -> DVector<f64> {
    let step = gains.at(t);
    &step.l_dev * xi + &step.l21 * x0 + (&step.l22 - &step.l_dev) * xbar
}

/// Coefficients of the pairwise-difference (consensus) form of the strategy:
///
/// - leader:   `u0 = alpha * sum_j (x0 - beta * xj)`
/// - follower: `ui = gamma * sum_j (xi - mu * xj) + lambda * sum_j (x0 - xj)`
///
/// where both sums run over all followers `j = 1..=n`.
#[derive(Clone, Debug)]
pub struct ConsensusStep {
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub mu: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
}

impl ConsensusStep {
    /// Evaluate the leader's consensus form literally, as a sum of pairwise
    /// terms (no mean-field shortcut).
    pub fn leader_action(&self, x0: &DVector<f64>, followers: &[DVector<f64>]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.alpha.nrows());
        for xj in followers {
            acc += &self.alpha * (x0 - &self.beta * xj);
        }
        acc
    }

    /// Evaluate follower `i`'s consensus form literally.
    pub fn follower_action(
        &self,
        i: usize,
        x0: &DVector<f64>,
        followers: &[DVector<f64>],
    ) -> DVector<f64> {
        let xi = &followers[i];
        let mut acc = DVector::zeros(self.gamma.nrows());
        for xj in followers {
            acc += &self.gamma * (xi - &self.mu * xj);
            acc += &self.lambda * (x0 - xj);
        }
        acc
    }
}

/// Consensus coefficients for the whole schedule.
#[derive(Clone, Debug)]
pub enum ConsensusForm {
    Finite(Vec<ConsensusStep>),
    Stationary(ConsensusStep),
}

impl ConsensusForm {
    pub fn at(&self, t: usize) -> &ConsensusStep {
        match self {
            ConsensusForm::Finite(steps) => &steps[t - 1],
            ConsensusForm::Stationary(step) => step,
        }
    }
}

/// Reparametrize the gain schedule into consensus form for a team of `n`
/// followers. Requires square gains (`d_u == d_x`) with `L11` and `Ldev`
/// invertible; fails with [`Error::SingularGain`] otherwise.
///
/// Finite schedules are converted for stages `1..=T-1` only: the terminal
/// stage's gains vanish identically (zero terminal weight), so its strategy
/// is zero and has no pairwise-difference representation to compute.
pub fn consensus_coefficients(gains: &GainSchedule, n: usize) -> Result<ConsensusForm> {
    let convert = |step: &GainStep, t: Option<usize>| -> Result<ConsensusStep> {
        let at = |what: &str| match t {
            Some(t) => format!("{what} at stage {t}"),
            None => what.to_string(),
        };
        let row = step
            .leader
            .as_ref()
            .ok_or(Error::LeaderlessMode("consensus form includes a leader term"))?;
        if step.l_dev.nrows() != step.l_dev.ncols() {
            return Err(Error::SingularGain {
                reason: format!(
                    "{} is {}x{}, only square gains can be inverted",
                    at("gain"),
                    step.l_dev.nrows(),
                    step.l_dev.ncols()
                ),
            });
        }
        for (name, m) in [("leader self-gain", &row.l11), ("deviation gain", &step.l_dev)] {
            let rc = rcond(m);
            if rc < CONSENSUS_RCOND_MIN {
                return Err(Error::SingularGain {
                    reason: format!("{} has reciprocal condition {rc:.3e}", at(name)),
                });
            }
        }
        let nf = n as f64;
        let alpha = &row.l11 / nf;
        let beta = -row
            .l11
            .clone()
            .lu()
            .solve(&row.l12)
            .ok_or(Error::SingularGain { reason: at("leader self-gain is singular") })?;
        let gamma = &step.l_dev / nf;
        let rhs = &step.l22 + &step.l21 - &step.l_dev;
        let mu = -step
            .l_dev
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularGain { reason: at("deviation gain is singular") })?;
        let lambda = &step.l21 / nf;
        Ok(ConsensusStep { alpha, beta, gamma, mu, lambda })
    };

    match gains {
        GainSchedule::Finite(steps) => {
            let active = steps.len().saturating_sub(1);
            let converted: Result<Vec<_>> = steps[..active]
                .iter()
                .enumerate()
                .map(|(k, s)| convert(s, Some(k + 1)))
                .collect();
            Ok(ConsensusForm::Finite(converted?))
        }
        GainSchedule::Stationary(step) => {
            Ok(ConsensusForm::Stationary(convert(step, None)?))
        }
    }
}
