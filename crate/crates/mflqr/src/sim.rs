//! Seeded closed-loop simulation and the two cost accountings.
//!
//! The direct evaluator prices the trace through the literal team cost,
//! pairwise spread term and all. The decomposed evaluator prices the same
//! trace through the (leader, mean-field) block cost plus per-follower
//! deviation terms. The two agree identically on every trace — not just in
//! expectation — which the tests lean on heavily.
//!
//! Noise is drawn from counter-based streams keyed `(seed, agent, t)`, so a
//! follower's realized noise does not depend on the population size or on
//! the order agents are visited.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::gains::{follower_action, leader_action, GainSchedule};
use crate::model::{build_augmented, CostModel, Horizon, SystemModel};
use crate::rng::NoiseStream;
use crate::{Error, Result};

/// State magnitude treated as divergence.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// A realized closed-loop trajectory. Follower quantities are stored one
/// column per follower. `stage_costs` holds undiscounted per-stage values;
/// discounting is applied by the evaluators.
#[derive(Clone, Debug)]
pub struct SimulationTrace {
    pub n: usize,
    pub d_x: usize,
    pub d_u: usize,
    /// Number of simulated stages `T`; states and actions cover `t = 1..=T`,
    /// noise draws cover the `T - 1` transitions.
    pub steps: usize,
    pub leader_states: Vec<DVector<f64>>,
    /// Zero vectors when the model is leaderless.
    pub leader_actions: Vec<DVector<f64>>,
    pub follower_states: Vec<DMatrix<f64>>,
    pub follower_actions: Vec<DMatrix<f64>>,
    /// Follower average, recomputed from the stored states at every stage.
    pub meanfield: Vec<DVector<f64>>,
    pub leader_noise: Vec<DVector<f64>>,
    pub follower_noise: Vec<DMatrix<f64>>,
    pub stage_costs: Vec<f64>,
}

impl SimulationTrace {
    /// Average over followers of the max-abs deviation from the leader state.
    pub fn mean_abs_deviation(&self, t: usize) -> f64 {
        let x0 = &self.leader_states[t - 1];
        let xs = &self.follower_states[t - 1];
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += (xs.column(i) - x0).amax();
        }
        acc / self.n as f64
    }

    /// Largest follower deviation from the leader state.
    pub fn max_abs_deviation(&self, t: usize) -> f64 {
        let x0 = &self.leader_states[t - 1];
        let xs = &self.follower_states[t - 1];
        (0..self.n)
            .map(|i| (xs.column(i) - x0).amax())
            .fold(0.0, f64::max)
    }
}

fn column_mean(m: &DMatrix<f64>) -> DVector<f64> {
    let mut acc = DVector::zeros(m.nrows());
    for c in m.column_iter() {
        acc += c;
    }
    acc / m.ncols() as f64
}

/// Undiscounted team stage cost: leader terms plus the follower average of
/// individual terms plus the pairwise spread penalty, evaluated literally.
fn stage_cost(
    cost: &CostModel,
    stage: usize,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    xs: &DMatrix<f64>,
    us: &DMatrix<f64>,
) -> f64 {
    let n = xs.ncols();
    let q0 = cost.q0.at(stage);
    let r0 = cost.r0.at(stage);
    let q = cost.q.at(stage);
    let p = cost.p.at(stage);
    let r = cost.r.at(stage);
    let h = cost.h.at(stage);

    let quad = |w: &DMatrix<f64>, v: &DVector<f64>| (w * v).dot(v);

    let mut c = quad(q0, x0) + quad(r0, u0);
    let mut avg = 0.0;
    for i in 0..n {
        let xi = xs.column(i).into_owned();
        let ui = us.column(i).into_owned();
        let diff = &xi - x0;
        avg += quad(q, &xi) + quad(p, &diff) + quad(r, &ui);
    }
    c += avg / n as f64;

    let mut spread = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = (xs.column(i) - xs.column(j)).into_owned();
            spread += quad(h, &d);
        }
    }
    c + spread / (2.0 * (n * n) as f64)
}

/// Roll the closed loop forward for `steps` stages under the given strategy.
///
/// Finite gain schedules must match `steps` exactly; stationary schedules
/// roll for any length. The trace records states, actions, noise draws, the
/// recomputed mean field, and undiscounted stage costs.
pub fn simulate(
    model: &SystemModel,
    cost: &CostModel,
    gains: &GainSchedule,
    steps: usize,
    seed: u64,
) -> Result<SimulationTrace> {
    if steps == 0 {
        return Err(Error::DimensionMismatch {
            name: "steps",
            expected: "at least one stage".into(),
            got: "0".into(),
        });
    }
    if let Some(t) = gains.horizon() {
        if t != steps {
            return Err(Error::DimensionMismatch {
                name: "steps",
                expected: format!("rollout matching the {t}-stage gain schedule"),
                got: format!("{steps}"),
            });
        }
    }
    if let Horizon::Finite { t } = cost.horizon {
        if t != steps {
            return Err(Error::DimensionMismatch {
                name: "steps",
                expected: format!("rollout matching the {t}-stage cost"),
                got: format!("{steps}"),
            });
        }
    }

    let d_x = model.dims.d_x;
    let d_u = model.dims.d_u;
    let n = model.dims.n;
    let leaderless = gains.is_leaderless();

    let mut x0 = model
        .x0_init
        .sample(&mut NoiseStream::new(seed, 0, 0), d_x);
    let mut xs = DMatrix::zeros(d_x, n);
    for i in 1..=n {
        let xi = model
            .follower_init
            .sample(&mut NoiseStream::new(seed, i as u64, 0), d_x);
        xs.set_column(i - 1, &xi);
    }

    let mut trace = SimulationTrace {
        n,
        d_x,
        d_u,
        steps,
        leader_states: Vec::with_capacity(steps),
        leader_actions: Vec::with_capacity(steps),
        follower_states: Vec::with_capacity(steps),
        follower_actions: Vec::with_capacity(steps),
        meanfield: Vec::with_capacity(steps),
        leader_noise: Vec::with_capacity(steps.saturating_sub(1)),
        follower_noise: Vec::with_capacity(steps.saturating_sub(1)),
        stage_costs: Vec::with_capacity(steps),
    };

    for t in 1..=steps {
        let xbar = column_mean(&xs);
        let u0 = if leaderless {
            DVector::zeros(d_u)
        } else {
            leader_action(gains, t, &x0, &xbar)?
        };
        let mut us = DMatrix::zeros(d_u, n);
        for i in 0..n {
            let xi = xs.column(i).into_owned();
            us.set_column(i, &follower_action(gains, t, &xi, &x0, &xbar));
        }
        let weight_stage = match cost.horizon {
            Horizon::Finite { .. } => t,
            Horizon::Infinite { .. } => 1,
        };
        trace
            .stage_costs
            .push(stage_cost(cost, weight_stage, &x0, &u0, &xs, &us));
        trace.leader_states.push(x0.clone());
        trace.leader_actions.push(u0.clone());
        trace.follower_states.push(xs.clone());
        trace.follower_actions.push(us.clone());
        trace.meanfield.push(xbar.clone());

        if t == steps {
            break;
        }

        let stage = match model.dims.t_horizon {
            Some(_) => t,
            None => 1,
        };
        let w0 = model
            .noise
            .leader
            .sample(&mut NoiseStream::new(seed, 0, t as u64), d_x);
        let mut ws = DMatrix::zeros(d_x, n);
        for i in 1..=n {
            let wi = model
                .noise
                .follower
                .sample(&mut NoiseStream::new(seed, i as u64, t as u64), d_x);
            ws.set_column(i - 1, &wi);
        }

        let x0_next =
            model.a0.at(stage) * &x0 + model.b0.at(stage) * &u0 + model.d0.at(stage) * &xbar + &w0;
        let mut xs_next = DMatrix::zeros(d_x, n);
        let ex0 = model.e.at(stage) * &x0;
        let dxbar = model.d.at(stage) * &xbar;
        for i in 0..n {
            let xi = xs.column(i).into_owned();
            let ui = us.column(i).into_owned();
            let next = model.a.at(stage) * xi
                + model.b.at(stage) * ui
                + &dxbar
                + &ex0
                + ws.column(i).into_owned();
            xs_next.set_column(i, &next);
        }

        trace.leader_noise.push(w0);
        trace.follower_noise.push(ws);

        if x0_next.amax() > DIVERGENCE_CAP || xs_next.amax() > DIVERGENCE_CAP {
            return Err(Error::Diverged { t: t + 1 });
        }
        x0 = x0_next;
        xs = xs_next;
    }

    Ok(trace)
}

fn discount_weights(cost: &CostModel, steps: usize) -> impl Iterator<Item = f64> + '_ {
    let beta = cost.horizon.beta();
    (0..steps).map(move |k| beta.powi(k as i32))
}

/// Price a trace through the literal team cost.
pub fn evaluate_cost_direct(trace: &SimulationTrace, cost: &CostModel) -> f64 {
    let mut total = 0.0;
    for (t, w) in discount_weights(cost, trace.steps).enumerate() {
        let stage = match cost.horizon {
            Horizon::Finite { .. } => t + 1,
            Horizon::Infinite { .. } => 1,
        };
        let c = stage_cost(
            cost,
            stage,
            &trace.leader_states[t],
            &trace.leader_actions[t],
            &trace.follower_states[t],
            &trace.follower_actions[t],
        );
        total += w * c;
    }
    total
}

/// Price a trace through the decomposition: the (leader, mean-field) block
/// cost plus the follower average of deviation costs. Agrees with
/// [`evaluate_cost_direct`] on every trace.
///
/// `leaderless` (read from the augmented blocks) drops the leader control
/// channel from the block cost.
pub fn evaluate_cost_decomposed(
    trace: &SimulationTrace,
    cost: &CostModel,
    aug_leaderless: bool,
) -> f64 {
    let n = trace.n;
    let quad = |w: &DMatrix<f64>, v: &DVector<f64>| (w * v).dot(v);
    let mut total = 0.0;
    for (t, w) in discount_weights(cost, trace.steps).enumerate() {
        let stage = match cost.horizon {
            Horizon::Finite { .. } => t + 1,
            Horizon::Infinite { .. } => 1,
        };
        let q0 = cost.q0.at(stage);
        let r0 = cost.r0.at(stage);
        let q = cost.q.at(stage);
        let p = cost.p.at(stage);
        let r = cost.r.at(stage);
        let q_dev = cost.q_dev(stage);

        let x0 = &trace.leader_states[t];
        let u0 = &trace.leader_actions[t];
        let xbar = &trace.meanfield[t];
        let ubar = column_mean(&trace.follower_actions[t]);

        // Block cost of (x0, xbar): x0'Q0x0 + xbar'Q xbar + (xbar-x0)'P(xbar-x0),
        // which is the quadratic form of the assembled 2x2 block weight.
        let diff = xbar - x0;
        let mut c = quad(q0, x0) + quad(q, xbar) + quad(p, &diff) + quad(r, &ubar);
        if !aug_leaderless {
            c += quad(r0, u0);
        }

        // Follower-average deviation cost.
        let mut dev = 0.0;
        for i in 0..n {
            let xd = (trace.follower_states[t].column(i) - xbar).into_owned();
            let ud = (trace.follower_actions[t].column(i) - &ubar).into_owned();
            dev += quad(&q_dev, &xd) + quad(r, &ud);
        }
        c += dev / n as f64;
        total += w * c;
    }
    total
}

/// Max-abs defect of the deviation dynamics over the whole trace: each
/// follower's deviation from the mean field must propagate autonomously,
/// `xdev' = A xdev + B udev + wdev`, with all coupling terms cancelled.
pub fn deviation_residual(trace: &SimulationTrace, model: &SystemModel) -> f64 {
    let mut worst = 0.0f64;
    for t in 1..trace.steps {
        let stage = match model.dims.t_horizon {
            Some(_) => t,
            None => 1,
        };
        let a = model.a.at(stage);
        let b = model.b.at(stage);
        let xbar = &trace.meanfield[t - 1];
        let xbar_next = &trace.meanfield[t];
        let ubar = column_mean(&trace.follower_actions[t - 1]);
        let wbar = column_mean(&trace.follower_noise[t - 1]);
        for i in 0..trace.n {
            let xd = (trace.follower_states[t - 1].column(i) - xbar).into_owned();
            let ud = (trace.follower_actions[t - 1].column(i) - &ubar).into_owned();
            let wd = (trace.follower_noise[t - 1].column(i) - &wbar).into_owned();
            let xd_next = (trace.follower_states[t].column(i) - xbar_next).into_owned();
            let predicted = a * xd + b * ud + wd;
            worst = worst.max((xd_next - predicted).amax());
        }
    }
    worst
}

fn write_float(out: &mut String, v: f64) {
    use std::fmt::Write as _;
    // Shortest round-trip formatting keeps files byte-stable across runs.
    // Fold -0.0 into 0 so sign-of-zero noise from negated gains never leaks.
    let v = if v == 0.0 { 0.0 } else { v };
    write!(out, "{v}").expect("string write");
}

/// Render the per-stage summary CSV:
/// `t,x0_*,u0_*,xbar_*,mean_abs_dev,stage_cost`.
pub fn trace_to_csv(trace: &SimulationTrace) -> String {
    let mut out = String::new();
    out.push('t');
    for k in 1..=trace.d_x {
        out.push_str(&format!(",x0_{k}"));
    }
    for k in 1..=trace.d_u {
        out.push_str(&format!(",u0_{k}"));
    }
    for k in 1..=trace.d_x {
        out.push_str(&format!(",xbar_{k}"));
    }
    out.push_str(",mean_abs_dev,stage_cost\n");
    for t in 1..=trace.steps {
        out.push_str(&t.to_string());
        for v in trace.leader_states[t - 1].iter() {
            out.push(',');
            write_float(&mut out, *v);
        }
        for v in trace.leader_actions[t - 1].iter() {
            out.push(',');
            write_float(&mut out, *v);
        }
        for v in trace.meanfield[t - 1].iter() {
            out.push(',');
            write_float(&mut out, *v);
        }
        out.push(',');
        write_float(&mut out, trace.mean_abs_deviation(t));
        out.push(',');
        write_float(&mut out, trace.stage_costs[t - 1]);
        out.push('\n');
    }
    out
}

/// Render the per-follower CSV (one row per stage and follower):
/// `t,follower,x_*,u_*`.
pub fn followers_to_csv(trace: &SimulationTrace) -> String {
    let mut out = String::new();
    out.push_str("t,follower");
    for k in 1..=trace.d_x {
        out.push_str(&format!(",x_{k}"));
    }
    for k in 1..=trace.d_u {
        out.push_str(&format!(",u_{k}"));
    }
    out.push('\n');
    for t in 1..=trace.steps {
        for i in 0..trace.n {
            out.push_str(&t.to_string());
            out.push(',');
            out.push_str(&(i + 1).to_string());
            for v in trace.follower_states[t - 1].column(i).iter() {
                out.push(',');
                write_float(&mut out, *v);
            }
            for v in trace.follower_actions[t - 1].column(i).iter() {
                out.push(',');
                write_float(&mut out, *v);
            }
            out.push('\n');
        }
    }
    out
}

/// Render the full trace as JSON: every state, action, noise draw, and
/// per-stage diagnostic, follower quantities as `[stage][follower][component]`.
pub fn trace_to_json(trace: &SimulationTrace) -> serde_json::Value {
    let vecs = |vs: &[DVector<f64>]| -> Vec<Vec<f64>> {
        vs.iter().map(|v| v.iter().copied().collect()).collect()
    };
    let cols = |ms: &[DMatrix<f64>]| -> Vec<Vec<Vec<f64>>> {
        ms.iter()
            .map(|m| {
                (0..m.ncols())
                    .map(|j| m.column(j).iter().copied().collect())
                    .collect()
            })
            .collect()
    };
    serde_json::json!({
        "n": trace.n,
        "d_x": trace.d_x,
        "d_u": trace.d_u,
        "steps": trace.steps,
        "leader_states": vecs(&trace.leader_states),
        "leader_actions": vecs(&trace.leader_actions),
        "meanfield": vecs(&trace.meanfield),
        "follower_states": cols(&trace.follower_states),
        "follower_actions": cols(&trace.follower_actions),
        "leader_noise": vecs(&trace.leader_noise),
        "follower_noise": cols(&trace.follower_noise),
        "stage_costs": trace.stage_costs,
        "mean_abs_dev": (1..=trace.steps)
            .map(|t| trace.mean_abs_deviation(t))
            .collect::<Vec<_>>(),
    })
}

/// Write a string to a file, creating parent directories as needed.
pub fn write_text(path: &std::path::Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Convenience wrapper reading the leaderless flag from the model and cost.
pub fn evaluate_cost_decomposed_for(
    trace: &SimulationTrace,
    model: &SystemModel,
    cost: &CostModel,
) -> f64 {
    let aug = build_augmented(model, cost, 1);
    evaluate_cost_decomposed(trace, cost, aug.leaderless)
}
