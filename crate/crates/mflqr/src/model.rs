//! Problem data: dynamics, cost weights, noise, and the augmented
//! (leader, mean-field) system the solvers operate on.
//!
//! Shape and symmetry are enforced at construction, so a `SystemModel` /
//! `CostModel` pair that exists is structurally sound. Semantic assumptions
//! (definiteness of the weights, stabilizability and detectability for the
//! stationary problem) are checked by [`validate`], which reports each check
//! individually instead of failing on the first.

use nalgebra::{Complex, DMatrix, DVector};

use crate::linalg::{self, complexify, max_abs, rank_complex, symmetrize};
use crate::rng::NoiseStream;
use crate::{Error, Result};

/// Problem sizes. `t_horizon` is `None` for the stationary (discounted
/// infinite-horizon) problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub d_x: usize,
    pub d_u: usize,
    pub n: usize,
    pub t_horizon: Option<usize>,
}

/// A matrix-valued coefficient, either constant or one matrix per stage.
/// Time indices are 1-based throughout: `at(t)` is valid for `t in 1..=T`.
#[derive(Clone, Debug)]
pub enum MatSeq {
    Constant(DMatrix<f64>),
    Varying(Vec<DMatrix<f64>>),
}

impl MatSeq {
    pub fn constant(m: DMatrix<f64>) -> Self {
        MatSeq::Constant(m)
    }

    pub fn at(&self, t: usize) -> &DMatrix<f64> {
        match self {
            MatSeq::Constant(m) => m,
            MatSeq::Varying(v) => &v[t - 1],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatSeq::Constant(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            MatSeq::Constant(m) => max_abs(m) == 0.0,
            MatSeq::Varying(v) => v.iter().all(|m| max_abs(m) == 0.0),
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            MatSeq::Constant(m) => m.shape(),
            MatSeq::Varying(v) => v[0].shape(),
        }
    }

    /// Every stage matrix has shape `(rows, cols)`; varying sequences have
    /// exactly `horizon` entries.
    fn check(
        &self,
        name: &'static str,
        rows: usize,
        cols: usize,
        horizon: Option<usize>,
    ) -> Result<()> {
        let mismatch = |got: String| Error::DimensionMismatch {
            name,
            expected: format!("{rows}x{cols}"),
            got,
        };
        match self {
            MatSeq::Constant(m) => {
                if m.shape() != (rows, cols) {
                    return Err(mismatch(format!("{}x{}", m.nrows(), m.ncols())));
                }
            }
            MatSeq::Varying(v) => {
                match horizon {
                    Some(t) if v.len() == t => {}
                    Some(t) => {
                        return Err(Error::DimensionMismatch {
                            name,
                            expected: format!("{t} stage matrices"),
                            got: format!("{}", v.len()),
                        });
                    }
                    None => {
                        return Err(Error::DimensionMismatch {
                            name,
                            expected: "constant matrix for the stationary problem".into(),
                            got: "time-varying sequence".into(),
                        });
                    }
                }
                for (k, m) in v.iter().enumerate() {
                    if m.shape() != (rows, cols) {
                        return Err(mismatch(format!(
                            "{}x{} at stage {}",
                            m.nrows(),
                            m.ncols(),
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A zero-mean-or-not distribution over vectors.
#[derive(Clone, Debug)]
pub enum Dist {
    Zero,
    Gaussian {
        cov: DMatrix<f64>,
        /// Symmetric PSD square root of `cov`, fixed at construction so that
        /// sampling is deterministic given the stream.
        sqrt_cov: DMatrix<f64>,
    },
    Uniform {
        low: DVector<f64>,
        high: DVector<f64>,
    },
}

impl Dist {
    pub fn gaussian(name: &'static str, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::DimensionMismatch {
                name,
                expected: "square covariance".into(),
                got: format!("{}x{}", cov.nrows(), cov.ncols()),
            });
        }
        check_symmetric(name, &cov)?;
        let sqrt_cov = matrix_sqrt_psd(name, &cov)?;
        Ok(Dist::Gaussian { cov, sqrt_cov })
    }

    pub fn uniform(name: &'static str, low: DVector<f64>, high: DVector<f64>) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::DimensionMismatch {
                name,
                expected: format!("low and high of equal length"),
                got: format!("{} vs {}", low.len(), high.len()),
            });
        }
        if low.iter().zip(high.iter()).any(|(l, h)| l > h) {
            return Err(Error::Config {
                pointer: name.to_string(),
                message: "uniform bounds require low <= high in every coordinate".into(),
            });
        }
        Ok(Dist::Uniform { low, high })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Dist::Zero => None,
            Dist::Gaussian { cov, .. } => Some(cov.nrows()),
            Dist::Uniform { low, .. } => Some(low.len()),
        }
    }

    pub fn is_zero_mean(&self) -> bool {
        match self {
            Dist::Zero | Dist::Gaussian { .. } => true,
            Dist::Uniform { low, high } => {
                low.iter().zip(high.iter()).all(|(l, h)| *l == -*h)
            }
        }
    }

    pub fn mean(&self, d: usize) -> DVector<f64> {
        match self {
            Dist::Zero | Dist::Gaussian { .. } => DVector::zeros(d),
            Dist::Uniform { low, high } => (low + high) * 0.5,
        }
    }

    pub fn cov_matrix(&self, d: usize) -> DMatrix<f64> {
        match self {
            Dist::Zero => DMatrix::zeros(d, d),
            Dist::Gaussian { cov, .. } => cov.clone(),
            Dist::Uniform { low, high } => {
                DMatrix::from_diagonal(&DVector::from_fn(d, |k, _| {
                    let w = high[k] - low[k];
                    w * w / 12.0
                }))
            }
        }
    }

    pub fn sample(&self, stream: &mut NoiseStream, d: usize) -> DVector<f64> {
        match self {
            Dist::Zero => DVector::zeros(d),
            Dist::Gaussian { sqrt_cov, .. } => stream.gaussian_with_sqrt_cov(sqrt_cov),
            Dist::Uniform { low, high } => stream.uniform_vector(low, high),
        }
    }
}

/// Process-noise specification for the team. Both distributions must be
/// zero-mean; the leader and every follower draw from their own streams.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub leader: Dist,
    pub follower: Dist,
    /// Default stream seed used by callers that do not override it.
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(leader: Dist, follower: Dist, seed: u64) -> Result<Self> {
        for (name, dist) in [("leader noise", &leader), ("follower noise", &follower)] {
            if !dist.is_zero_mean() {
                return Err(Error::Config {
                    pointer: name.to_string(),
                    message: "noise must be zero-mean (uniform noise needs high = -low)".into(),
                });
            }
        }
        Ok(NoiseModel { leader, follower, seed })
    }

    pub fn zero(seed: u64) -> Self {
        NoiseModel { leader: Dist::Zero, follower: Dist::Zero, seed }
    }
}

/// Leader initial condition: a fixed vector or a seeded draw.
#[derive(Clone, Debug)]
pub enum InitialState {
    Constant(DVector<f64>),
    Random(Dist),
}

impl InitialState {
    pub fn sample(&self, stream: &mut NoiseStream, d: usize) -> DVector<f64> {
        match self {
            InitialState::Constant(v) => v.clone(),
            InitialState::Random(dist) => dist.sample(stream, d),
        }
    }

    pub fn mean(&self, d: usize) -> DVector<f64> {
        match self {
            InitialState::Constant(v) => v.clone(),
            InitialState::Random(dist) => dist.mean(d),
        }
    }

    pub fn cov_matrix(&self, d: usize) -> DMatrix<f64> {
        match self {
            InitialState::Constant(_) => DMatrix::zeros(d, d),
            InitialState::Random(dist) => dist.cov_matrix(d),
        }
    }
}

/// Team dynamics. The leader follows
/// `x0' = A0 x0 + B0 u0 + D0 xbar + w0`; follower `i` follows
/// `xi' = A xi + B ui + D xbar + E x0 + wi`, where `xbar` is the follower
/// population average.
#[derive(Clone, Debug)]
pub struct SystemModel {
    pub dims: Dims,
    pub a0: MatSeq,
    pub b0: MatSeq,
    pub d0: MatSeq,
    pub a: MatSeq,
    pub b: MatSeq,
    pub d: MatSeq,
    pub e: MatSeq,
    pub noise: NoiseModel,
    pub x0_init: InitialState,
    pub follower_init: Dist,
}

impl SystemModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        t_horizon: Option<usize>,
        a0: MatSeq,
        b0: MatSeq,
        d0: MatSeq,
        a: MatSeq,
        b: MatSeq,
        d: MatSeq,
        e: MatSeq,
        noise: NoiseModel,
        x0_init: InitialState,
        follower_init: Dist,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch {
                name: "n",
                expected: "at least one follower".into(),
                got: "0".into(),
            });
        }
        if t_horizon == Some(0) {
            return Err(Error::DimensionMismatch {
                name: "T",
                expected: "positive horizon".into(),
                got: "0".into(),
            });
        }
        let d_x = a.shape().0;
        let d_u = b.shape().1;
        if d_x == 0 || d_u == 0 {
            return Err(Error::DimensionMismatch {
                name: "A/B",
                expected: "nonzero state and control dimensions".into(),
                got: format!("d_x={d_x}, d_u={d_u}"),
            });
        }
        a0.check("A0", d_x, d_x, t_horizon)?;
        b0.check("B0", d_x, d_u, t_horizon)?;
        d0.check("D0", d_x, d_x, t_horizon)?;
        a.check("A", d_x, d_x, t_horizon)?;
        b.check("B", d_x, d_u, t_horizon)?;
        d.check("D", d_x, d_x, t_horizon)?;
        e.check("E", d_x, d_x, t_horizon)?;
        for (name, dist) in [
            ("leader noise", &noise.leader),
            ("follower noise", &noise.follower),
            ("follower_init", &follower_init),
        ] {
            if let Some(dim) = dist.dim() {
                if dim != d_x {
                    return Err(Error::DimensionMismatch {
                        name: "distribution",
                        expected: format!("{name} of dimension {d_x}"),
                        got: format!("{dim}"),
                    });
                }
            }
        }
        if let InitialState::Constant(v) = &x0_init {
            if v.len() != d_x {
                return Err(Error::DimensionMismatch {
                    name: "x0_init",
                    expected: format!("length {d_x}"),
                    got: format!("{}", v.len()),
                });
            }
        } else if let InitialState::Random(dist) = &x0_init {
            if let Some(dim) = dist.dim() {
                if dim != d_x {
                    return Err(Error::DimensionMismatch {
                        name: "x0_init",
                        expected: format!("dimension {d_x}"),
                        got: format!("{dim}"),
                    });
                }
            }
        }
        Ok(SystemModel {
            dims: Dims { d_x, d_u, n, t_horizon },
            a0,
            b0,
            d0,
            a,
            b,
            d,
            e,
            noise,
            x0_init,
            follower_init,
        })
    }

    pub fn is_time_invariant(&self) -> bool {
        [&self.a0, &self.b0, &self.d0, &self.a, &self.b, &self.d, &self.e]
            .iter()
            .all(|m| m.is_constant())
    }
}

/// Horizon of the cost: a finite stage count, or discounted infinite horizon
/// with factor `beta` in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Finite { t: usize },
    Infinite { beta: f64 },
}

impl Horizon {
    pub fn beta(&self) -> f64 {
        match self {
            Horizon::Finite { .. } => 1.0,
            Horizon::Infinite { beta } => *beta,
        }
    }
}

/// Stage-cost weights. The per-stage cost is
/// `x0' Q0 x0 + u0' R0 u0` for the leader plus the follower average of
/// `xi' Q xi + (xi - x0)' P (xi - x0) + ui' R ui` plus the pairwise spread
/// penalty `(1/2 n^2) sum_ij (xi - xj)' H (xi - xj)`.
#[derive(Clone, Debug)]
pub struct CostModel {
    pub q0: MatSeq,
    pub r0: MatSeq,
    pub q: MatSeq,
    pub p: MatSeq,
    pub r: MatSeq,
    pub h: MatSeq,
    pub horizon: Horizon,
}

impl CostModel {
    pub fn new(
        d_x: usize,
        d_u: usize,
        q0: MatSeq,
        r0: MatSeq,
        q: MatSeq,
        p: MatSeq,
        r: MatSeq,
        h: MatSeq,
        horizon: Horizon,
    ) -> Result<Self> {
        if let Horizon::Infinite { beta } = horizon {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::Config {
                    pointer: "/horizon/beta".into(),
                    message: format!("discount factor must be in (0, 1], got {beta}"),
                });
            }
        }
        let t = match horizon {
            Horizon::Finite { t } => Some(t),
            Horizon::Infinite { .. } => None,
        };
        q0.check("Q0", d_x, d_x, t)?;
        r0.check("R0", d_u, d_u, t)?;
        q.check("Q", d_x, d_x, t)?;
        p.check("P", d_x, d_x, t)?;
        r.check("R", d_u, d_u, t)?;
        h.check("H", d_x, d_x, t)?;
        let horizon_len = t.unwrap_or(1);
        for (name, seq) in [
            ("Q0", &q0),
            ("R0", &r0),
            ("Q", &q),
            ("P", &p),
            ("R", &r),
            ("H", &h),
        ] {
            for stage in 1..=horizon_len {
                check_symmetric(name, seq.at(stage))?;
            }
        }
        Ok(CostModel { q0, r0, q, p, r, h, horizon })
    }

    pub fn is_time_invariant(&self) -> bool {
        [&self.q0, &self.r0, &self.q, &self.p, &self.r, &self.h]
            .iter()
            .all(|m| m.is_constant())
    }

    /// Deviation-channel state weight `Q + P + H` at stage `t`.
    pub fn q_dev(&self, t: usize) -> DMatrix<f64> {
        self.q.at(t) + self.p.at(t) + self.h.at(t)
    }
}

/// The team is leaderless when the leader has no control channel, no cost,
/// and does not react to the mean field: `B0`, `R0`, `D0`, `Q0` all zero.
/// The leader state then plays the role of an exogenous reference.
pub fn is_leaderless(model: &SystemModel, cost: &CostModel) -> bool {
    model.b0.is_zero() && model.d0.is_zero() && cost.r0.is_zero() && cost.q0.is_zero()
}

/// Stage-`t` coefficients of the two decoupled problems: the augmented
/// (leader, mean-field) system and the deviation-from-mean-field system.
#[derive(Clone, Debug)]
pub struct AugmentedSystem {
    /// `[[A0, D0], [E, A + D]]`, square of side `2 d_x`.
    pub a_bar: DMatrix<f64>,
    /// Block-diagonal of `B0` and `B`; the leader block column is removed in
    /// leaderless mode, where only the mean-field channel is actuated.
    pub b_bar: DMatrix<f64>,
    /// `[[Q0 + P, -P], [-P, Q + P]]`.
    pub q_bar: DMatrix<f64>,
    /// Block-diagonal of `R0` and `R` (just `R` in leaderless mode).
    pub r_bar: DMatrix<f64>,
    /// Deviation state weight `Q + P + H`.
    pub q_dev: DMatrix<f64>,
    /// Deviation control weight `R`.
    pub r_dev: DMatrix<f64>,
    pub leaderless: bool,
}

/// Assemble the stage-`t` augmented and deviation coefficients.
pub fn build_augmented(model: &SystemModel, cost: &CostModel, t: usize) -> AugmentedSystem {
    let d_x = model.dims.d_x;
    let d_u = model.dims.d_u;
    let leaderless = is_leaderless(model, cost);

    let a0 = model.a0.at(t);
    let d0 = model.d0.at(t);
    let e = model.e.at(t);
    let ad = model.a.at(t) + model.d.at(t);

    let mut a_bar = DMatrix::zeros(2 * d_x, 2 * d_x);
    a_bar.view_mut((0, 0), (d_x, d_x)).copy_from(a0);
    a_bar.view_mut((0, d_x), (d_x, d_x)).copy_from(d0);
    a_bar.view_mut((d_x, 0), (d_x, d_x)).copy_from(e);
    a_bar.view_mut((d_x, d_x), (d_x, d_x)).copy_from(&ad);

    let b = model.b.at(t);
    let b_bar = if leaderless {
        let mut m = DMatrix::zeros(2 * d_x, d_u);
        m.view_mut((d_x, 0), (d_x, d_u)).copy_from(b);
        m
    } else {
        let b0 = model.b0.at(t);
        let mut m = DMatrix::zeros(2 * d_x, 2 * d_u);
        m.view_mut((0, 0), (d_x, d_u)).copy_from(b0);
        m.view_mut((d_x, d_u), (d_x, d_u)).copy_from(b);
        m
    };

    let q0 = cost.q0.at(t);
    let p = cost.p.at(t);
    let q = cost.q.at(t);
    let mut q_bar = DMatrix::zeros(2 * d_x, 2 * d_x);
    q_bar.view_mut((0, 0), (d_x, d_x)).copy_from(&(q0 + p));
    q_bar.view_mut((0, d_x), (d_x, d_x)).copy_from(&(-p));
    q_bar.view_mut((d_x, 0), (d_x, d_x)).copy_from(&(-p));
    q_bar.view_mut((d_x, d_x), (d_x, d_x)).copy_from(&(q + p));

    let r = cost.r.at(t);
    let r_bar = if leaderless {
        r.clone()
    } else {
        let r0 = cost.r0.at(t);
        let mut m = DMatrix::zeros(2 * d_u, 2 * d_u);
        m.view_mut((0, 0), (d_u, d_u)).copy_from(r0);
        m.view_mut((d_u, d_u), (d_u, d_u)).copy_from(r);
        m
    };

    AugmentedSystem {
        a_bar,
        b_bar,
        q_bar,
        r_bar,
        q_dev: cost.q_dev(t),
        r_dev: r.clone(),
        leaderless,
    }
}

/// Symmetric PSD square root via spectral decomposition. Eigenvalues in
/// `[-1e-10 * scale, 0)` are treated as rounding and clipped to zero; anything
/// more negative is a genuine violation and errors.
pub fn matrix_sqrt_psd(name: &'static str, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = max_abs(s).max(1.0);
    let eig = symmetrize(s).symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-10 * scale {
            return Err(Error::NotPsd { name, eigenvalue: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    Ok(symmetrize(&root))
}

fn check_symmetric(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    let tol = 1e-12 * max_abs(m).max(1.0);
    let asym = max_abs(&(m - m.transpose()));
    if asym > tol {
        return Err(Error::DimensionMismatch {
            name,
            expected: "symmetric matrix".into(),
            got: format!("asymmetry {asym:.3e}"),
        });
    }
    Ok(())
}

/// PBH stabilizability test: for every eigenvalue of `a` on or outside the
/// unit circle, `[lambda I - a, b]` must have full row rank. Returns the
/// first offending eigenvalue as witness.
pub fn check_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (bool, Option<Complex<f64>>) {
    let d = a.nrows();
    let eigs = a.clone().complex_eigenvalues();
    for lambda in eigs.iter() {
        if lambda.norm() < 1.0 - 1e-9 {
            continue;
        }
        let mut pbh = DMatrix::zeros(d, d + b.ncols());
        let mut lhs = complexify(a);
        lhs.neg_mut();
        for i in 0..d {
            lhs[(i, i)] += lambda;
        }
        pbh.view_mut((0, 0), (d, d)).copy_from(&lhs);
        pbh.view_mut((0, d), (d, b.ncols())).copy_from(&complexify(b));
        if rank_complex(&pbh) < d {
            return (false, Some(*lambda));
        }
    }
    (true, None)
}

/// PBH detectability test for the pair `(a, c)`: dual to stabilizability of
/// `(a', c')`.
pub fn check_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> (bool, Option<Complex<f64>>) {
    check_stabilizable(&a.transpose(), &c.transpose())
}

/// One assumption check in a [`ValidationReport`].
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Offending eigenvalue (or similar) when the check fails.
    pub witness: Option<String>,
}

/// Result of [`validate`]: one entry per assumption, plus notes on decisions
/// a reader should know about (leaderless reductions, weight roots).
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub leaderless: bool,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_names(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, witness: Option<String>) {
        self.checks.push(Check { name: name.into(), passed, witness });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            match &c.witness {
                Some(w) => writeln!(f, "[{tag}] {} (witness {w})", c.name)?,
                None => writeln!(f, "[{tag}] {}", c.name)?,
            }
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// Check the standing assumptions of the control problem against a concrete
/// model/cost pair. Definiteness of the weights is checked at every stage;
/// the stabilizability and detectability tests needed by the stationary
/// problem run only for an infinite horizon, on the discounted pairs
/// `(sqrt(beta) A, sqrt(beta) B)` and with the PSD square roots of the stage
/// weights as observation maps.
pub fn validate(model: &SystemModel, cost: &CostModel) -> Result<ValidationReport> {
    match (model.dims.t_horizon, cost.horizon) {
        (Some(t_model), Horizon::Finite { t }) if t_model == t => {}
        (None, Horizon::Infinite { .. }) => {}
        (m, h) => {
            return Err(Error::DimensionMismatch {
                name: "horizon",
                expected: format!("model horizon {m:?} matching cost horizon"),
                got: format!("{h:?}"),
            });
        }
    }

    let mut report = ValidationReport {
        leaderless: is_leaderless(model, cost),
        ..Default::default()
    };
    let stages = match cost.horizon {
        Horizon::Finite { t } => t,
        Horizon::Infinite { .. } => 1,
    };

    // Definiteness of the primitive weights, worst stage as witness.
    let psd_checks: [(&str, &MatSeq); 4] = [
        ("Q0 positive semidefinite", &cost.q0),
        ("Q positive semidefinite", &cost.q),
        ("P positive semidefinite", &cost.p),
        ("H positive semidefinite", &cost.h),
    ];
    for (name, seq) in psd_checks {
        report_psd(&mut report, name, stages, |t| seq.at(t).clone());
    }
    report_pd(&mut report, "R positive definite", stages, |t| cost.r.at(t).clone());
    if report.leaderless {
        report.notes.push(
            "leaderless model: R0 definiteness waived; leader control channel removed".into(),
        );
    } else {
        report_pd(&mut report, "R0 positive definite", stages, |t| cost.r0.at(t).clone());
    }

    // Derived stage weights used by the two Riccati problems.
    report_psd(&mut report, "Q + P + H positive semidefinite", stages, |t| cost.q_dev(t));
    report_psd(&mut report, "augmented state weight positive semidefinite", stages, |t| {
        build_augmented(model, cost, t).q_bar
    });

    if let Horizon::Infinite { beta } = cost.horizon {
        let sqrt_beta = beta.sqrt();
        let aug = build_augmented(model, cost, 1);
        let a_dev = model.a.at(1) * sqrt_beta;
        let b_dev = model.b.at(1).clone();
        let a_bar = &aug.a_bar * sqrt_beta;

        let (ok, witness) = check_stabilizable(&a_bar, &aug.b_bar);
        report.push("augmented pair stabilizable", ok, witness.map(fmt_complex));
        let (ok, witness) = check_stabilizable(&a_dev, &b_dev);
        report.push("deviation pair stabilizable", ok, witness.map(fmt_complex));

        match matrix_sqrt_psd("augmented state weight", &aug.q_bar) {
            Ok(c_bar) => {
                let (ok, witness) = check_detectable(&a_bar, &c_bar);
                report.push("augmented pair detectable", ok, witness.map(fmt_complex));
            }
            Err(Error::NotPsd { eigenvalue, .. }) => {
                report.push(
                    "augmented pair detectable",
                    false,
                    Some(format!("state weight not PSD ({eigenvalue:.3e})")),
                );
            }
            Err(e) => return Err(e),
        }
        match matrix_sqrt_psd("Q + P + H", &cost.q_dev(1)) {
            Ok(c_dev) => {
                let (ok, witness) = check_detectable(&a_dev, &c_dev);
                report.push("deviation pair detectable", ok, witness.map(fmt_complex));
            }
            Err(Error::NotPsd { eigenvalue, .. }) => {
                report.push(
                    "deviation pair detectable",
                    false,
                    Some(format!("state weight not PSD ({eigenvalue:.3e})")),
                );
            }
            Err(e) => return Err(e),
        }
        report.notes.push(format!(
            "stationary checks use the discounted pair (sqrt(beta) A, B) with beta = {beta}; \
             detectability is tested through the PSD square root of the stage weight"
        ));
    }

    Ok(report)
}

fn fmt_complex(z: Complex<f64>) -> String {
    if z.im == 0.0 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

fn report_psd(
    report: &mut ValidationReport,
    name: &str,
    stages: usize,
    weight: impl Fn(usize) -> DMatrix<f64>,
) {
    for t in 1..=stages {
        let w = weight(t);
        let eigs = linalg::sym_eigenvalues(&symmetrize(&w));
        let min = eigs[0];
        if min < -1e-10 * max_abs(&w).max(1.0) {
            report.push(
                name,
                false,
                Some(format!("eigenvalue {min:.6e} at stage {t}")),
            );
            return;
        }
    }
    report.push(name, true, None);
}

fn report_pd(
    report: &mut ValidationReport,
    name: &str,
    stages: usize,
    weight: impl Fn(usize) -> DMatrix<f64>,
) {
    for t in 1..=stages {
        let w = weight(t);
        let eigs = linalg::sym_eigenvalues(&symmetrize(&w));
        let min = eigs[0];
        if min <= 1e-12 * max_abs(&w).max(1.0) {
            report.push(
                name,
                false,
                Some(format!("eigenvalue {min:.6e} at stage {t}")),
            );
            return;
        }
    }
    report.push(name, true, None);
}
