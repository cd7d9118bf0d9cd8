//! Convex quadratic programming by operator splitting.
//!
//! Solves programs of the form
//!
//! ```text
//! minimize    sum_i quad_i x_i^2 + lin_i x_i + constant
//! subject to  E x = b,  G x <= h,  lo <= x <= hi
//! ```
//!
//! using an ADMM iteration on the stacked constraint system with diagonal
//! equilibration, followed by an active-set polish that solves the KKT
//! equations of the guessed optimal face. [`QpSession`] keeps the scaling
//! and the factorized ADMM linear system alive so a chain of programs that
//! differ only in right-hand sides (rolling dispatch windows) can be solved
//! with warm starts at a fraction of the cold cost.

use nalgebra::{Cholesky, DMatrix, DVector};
use std::fmt;
use thiserror::Error;

/// Constraint identity used in infeasibility reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRef {
    Equality(usize),
    Inequality(usize),
    LowerBound(usize),
    UpperBound(usize),
}

impl fmt::Display for ConstraintRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintRef::Equality(i) => write!(f, "equality row {i}"),
            ConstraintRef::Inequality(i) => write!(f, "inequality row {i}"),
            ConstraintRef::LowerBound(i) => write!(f, "lower bound of variable {i}"),
            ConstraintRef::UpperBound(i) => write!(f, "upper bound of variable {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Optimal,
    Infeasible {
        constraint: ConstraintRef,
        violation: f64,
    },
    MaxIterations,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub objective_value: f64,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal)
    }
}

/// A convex QP with diagonal quadratic term.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    /// Per-variable quadratic coefficients, all >= 0.
    pub quadratic: DVector<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    /// Rows constrain `row . x <= rhs`.
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("objective is not convex: quadratic coefficient {value} of variable {index} is negative")]
    NonConvex { index: usize, value: f64 },
    #[error("variable {index} has empty bound interval [{lo}, {hi}]")]
    EmptyBounds { index: usize, lo: f64, hi: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
}

impl ConvexProgram {
    pub fn n(&self) -> usize {
        self.quadratic.len()
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let mut total = self.constant;
        for i in 0..self.n() {
            total += self.quadratic[i] * x[i] * x[i] + self.linear[i] * x[i];
        }
        total
    }

    /// Largest constraint violation of `x` across equalities, inequalities,
    /// and bounds; 0 when `x` is feasible.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        if self.eq_matrix.nrows() > 0 {
            let r = &self.eq_matrix * x - &self.eq_rhs;
            worst = worst.max(r.amax());
        }
        if self.ineq_matrix.nrows() > 0 {
            let r = &self.ineq_matrix * x - &self.ineq_rhs;
            worst = r.iter().fold(worst, |acc, &v| acc.max(v));
        }
        for i in 0..self.n() {
            worst = worst.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.n();
        let dims = [
            ("linear", self.linear.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
        ];
        for (what, len) in dims {
            if len != n {
                return Err(SolverError::DimensionMismatch(format!(
                    "{what} has {len} entries, expected {n}"
                )));
            }
        }
        if self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "equality matrix has {} rows but rhs has {}",
                self.eq_matrix.nrows(),
                self.eq_rhs.len()
            )));
        }
        if self.ineq_matrix.nrows() != self.ineq_rhs.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "inequality matrix has {} rows but rhs has {}",
                self.ineq_matrix.nrows(),
                self.ineq_rhs.len()
            )));
        }
        for (what, m) in [("equality", &self.eq_matrix), ("inequality", &self.ineq_matrix)] {
            if m.nrows() > 0 && m.ncols() != n {
                return Err(SolverError::DimensionMismatch(format!(
                    "{what} matrix has {} columns, expected {n}",
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite(format!("{what} matrix")));
            }
        }
        for i in 0..n {
            let q = self.quadratic[i];
            if !q.is_finite() || !self.linear[i].is_finite() {
                return Err(SolverError::NonFinite("objective".into()));
            }
            if q < 0.0 {
                return Err(SolverError::NonConvex { index: i, value: q });
            }
            if self.lower[i] > self.upper[i] {
                return Err(SolverError::EmptyBounds {
                    index: i,
                    lo: self.lower[i],
                    hi: self.upper[i],
                });
            }
        }
        if self.eq_rhs.iter().any(|v| !v.is_finite())
            || self.ineq_rhs.iter().any(|v| !v.is_finite())
        {
            return Err(SolverError::NonFinite("constraint right-hand side".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Absolute primal feasibility tolerance (constraint units).
    pub tol_feas: f64,
    /// Absolute dual/stationarity tolerance.
    pub tol_opt: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-6,
            tol_opt: 1e-6,
            max_iter: 50_000,
        }
    }
}

const SIGMA: f64 = 1e-6;
const ALPHA: f64 = 1.6;
const RHO_INIT: f64 = 0.1;
const RHO_EQ_BOOST: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const SCALING_ITERS: usize = 10;
const CHECK_INTERVAL: usize = 25;
const RHO_ADAPT_INTERVAL: usize = 100;
const STALL_WINDOW: usize = 100;
const STALL_IMPROVEMENT: f64 = 1e-4;
const POLISH_DELTA: f64 = 1e-9;
const POLISH_REFINE_STEPS: usize = 3;

/// Solves one program from a cold start.
pub fn solve(program: &ConvexProgram, options: &SolverOptions) -> Result<Solution, SolverError> {
    let mut session = QpSession::new(program.clone(), *options)?;
    Ok(session.solve())
}

/// Reusable solver state for a family of programs sharing their matrices.
///
/// Construction performs validation, equilibration and factorization once;
/// [`QpSession::update_rhs`] swaps the right-hand sides and bounds for the
/// next program in the chain while keeping the previous iterates as a warm
/// start.
pub struct QpSession {
    n: usize,
    m_eq: usize,
    m_ineq: usize,
    options: SolverOptions,
    program: ConvexProgram,
    // Scaled data: p_diag = c * d^2 * (2 quad), a = E A D over stacked rows.
    p_diag: DVector<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d_scale: DVector<f64>,
    e_scale: DVector<f64>,
    cost_scale: f64,
    rho: DVector<f64>,
    rho_bar: f64,
    kkt: Cholesky<f64, nalgebra::Dyn>,
    // Warm-start iterates in scaled space.
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    warm: bool,
}

impl QpSession {
    pub fn new(program: ConvexProgram, options: SolverOptions) -> Result<Self, SolverError> {
        program.validate()?;
        let n = program.n();
        let m_eq = program.eq_matrix.nrows();
        let m_ineq = program.ineq_matrix.nrows();
        let m = m_eq + m_ineq + n;

        let mut a = DMatrix::zeros(m, n);
        if m_eq > 0 {
            a.rows_mut(0, m_eq).copy_from(&program.eq_matrix);
        }
        if m_ineq > 0 {
            a.rows_mut(m_eq, m_ineq).copy_from(&program.ineq_matrix);
        }
        for i in 0..n {
            a[(m_eq + m_ineq + i, i)] = 1.0;
        }

        let mut p_diag = DVector::from_iterator(n, program.quadratic.iter().map(|q| 2.0 * q));
        let mut q = program.linear.clone();
        let mut d_scale = DVector::from_element(n, 1.0);
        let mut e_scale = DVector::from_element(m, 1.0);
        let mut cost_scale = 1.0;

        // Modified Ruiz equilibration on [P A'; A 0] plus cost normalization.
        for _ in 0..SCALING_ITERS {
            let mut col_norm = DVector::from_element(n, 0.0f64);
            let mut row_norm = DVector::from_element(m, 0.0f64);
            for j in 0..n {
                col_norm[j] = p_diag[j].abs();
            }
            for i in 0..m {
                for j in 0..n {
                    let v = a[(i, j)].abs();
                    if v > row_norm[i] {
                        row_norm[i] = v;
                    }
                    if v > col_norm[j] {
                        col_norm[j] = v;
                    }
                }
            }
            let delta = |norm: f64| {
                if norm > 1e-12 {
                    1.0 / norm.sqrt()
                } else {
                    1.0
                }
            };
            for j in 0..n {
                let dj = delta(col_norm[j]);
                d_scale[j] *= dj;
                p_diag[j] *= dj * dj;
                q[j] *= dj;
                for i in 0..m {
                    a[(i, j)] *= dj;
                }
            }
            for i in 0..m {
                let ei = delta(row_norm[i]);
                e_scale[i] *= ei;
                for j in 0..n {
                    a[(i, j)] *= ei;
                }
            }
            let p_mean = if n > 0 { p_diag.amax() } else { 0.0 };
            let q_norm = q.amax();
            let denom = p_mean.max(q_norm);
            if denom > 1e-12 {
                let gamma = 1.0 / denom;
                cost_scale *= gamma;
                p_diag *= gamma;
                q *= gamma;
            }
        }

        let rho_bar = RHO_INIT;
        let rho = Self::rho_vector(rho_bar, m_eq, m);
        let kkt = Self::factorize(&p_diag, &a, &rho)
            .ok_or_else(|| SolverError::NonFinite("ADMM normal equations".into()))?;

        let mut session = QpSession {
            n,
            m_eq,
            m_ineq,
            options,
            program,
            p_diag,
            q,
            a,
            l: DVector::zeros(m),
            u: DVector::zeros(m),
            d_scale,
            e_scale,
            cost_scale,
            rho,
            rho_bar,
            kkt,
            x: DVector::zeros(n),
            y: DVector::zeros(m),
            z: DVector::zeros(m),
            warm: false,
        };
        session.refresh_bounds();
        Ok(session)
    }

    fn rho_vector(rho_bar: f64, m_eq: usize, m: usize) -> DVector<f64> {
        DVector::from_iterator(
            m,
            (0..m).map(|i| if i < m_eq { rho_bar * RHO_EQ_BOOST } else { rho_bar }),
        )
    }

    fn factorize(
        p_diag: &DVector<f64>,
        a: &DMatrix<f64>,
        rho: &DVector<f64>,
    ) -> Option<Cholesky<f64, nalgebra::Dyn>> {
        let n = p_diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = p_diag[i] + SIGMA;
        }
        for r in 0..a.nrows() {
            let w = rho[r];
            for i in 0..n {
                let ai = a[(r, i)];
                if ai == 0.0 {
                    continue;
                }
                let wai = w * ai;
                for j in i..n {
                    m[(i, j)] += wai * a[(r, j)];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        Cholesky::new(m)
    }

    /// Rebuilds the scaled stacked bound vectors from the program's rhs.
    fn refresh_bounds(&mut self) {
        let m = self.m_eq + self.m_ineq + self.n;
        if self.l.len() != m {
            self.l = DVector::zeros(m);
            self.u = DVector::zeros(m);
        }
        for i in 0..self.m_eq {
            let v = self.e_scale[i] * self.program.eq_rhs[i];
            self.l[i] = v;
            self.u[i] = v;
        }
        for i in 0..self.m_ineq {
            let r = self.m_eq + i;
            self.l[r] = f64::NEG_INFINITY;
            self.u[r] = self.e_scale[r] * self.program.ineq_rhs[i];
        }
        for i in 0..self.n {
            let r = self.m_eq + self.m_ineq + i;
            self.l[r] = self.e_scale[r] * self.program.lower[i];
            self.u[r] = self.e_scale[r] * self.program.upper[i];
        }
    }

    /// Swaps in new right-hand sides and bounds; matrices stay fixed.
    pub fn update_rhs(
        &mut self,
        eq_rhs: &DVector<f64>,
        ineq_rhs: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
    ) -> Result<(), SolverError> {
        if eq_rhs.len() != self.m_eq || ineq_rhs.len() != self.m_ineq {
            return Err(SolverError::DimensionMismatch(format!(
                "rhs update has {}/{} rows, session expects {}/{}",
                eq_rhs.len(),
                ineq_rhs.len(),
                self.m_eq,
                self.m_ineq
            )));
        }
        if lower.len() != self.n || upper.len() != self.n {
            return Err(SolverError::DimensionMismatch(format!(
                "bound update has {}/{} entries, session expects {}",
                lower.len(),
                upper.len(),
                self.n
            )));
        }
        self.program.eq_rhs = eq_rhs.clone();
        self.program.ineq_rhs = ineq_rhs.clone();
        self.program.lower = lower.clone();
        self.program.upper = upper.clone();
        self.refresh_bounds();
        Ok(())
    }

    /// Seeds the next solve from an unscaled primal guess.
    pub fn warm_start(&mut self, x: &DVector<f64>) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            self.x[i] = x[i] / self.d_scale[i];
        }
        self.warm = true;
    }

    pub fn program(&self) -> &ConvexProgram {
        &self.program
    }

    fn unscale_x(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| self.d_scale[i] * x[i]))
    }

    /// Unscaled KKT residuals at scaled iterates (x, y, ax = A x).
    fn residuals(&self, x: &DVector<f64>, y: &DVector<f64>, ax: &DVector<f64>) -> KktResiduals {
        let m = ax.len();
        let mut primal = 0.0f64;
        for i in 0..m {
            let v = ax[i].clamp(self.l[i], self.u[i]);
            let r = (ax[i] - v).abs() / self.e_scale[i];
            if r > primal {
                primal = r;
            }
        }
        let mut dual_vec = DVector::zeros(self.n);
        for i in 0..self.n {
            dual_vec[i] = self.p_diag[i] * x[i] + self.q[i];
        }
        dual_vec.gemv_tr(1.0, &self.a, y, 1.0);
        let mut dual = 0.0f64;
        for i in 0..self.n {
            let r = (dual_vec[i] / self.d_scale[i]).abs() / self.cost_scale;
            if r > dual {
                dual = r;
            }
        }
        let mut comp = 0.0f64;
        for i in 0..m {
            let yi = self.e_scale[i] * y[i] / self.cost_scale;
            if yi == 0.0 {
                continue;
            }
            let axi = ax[i] / self.e_scale[i];
            let lo = self.l[i] / self.e_scale[i];
            let hi = self.u[i] / self.e_scale[i];
            let dist = if yi < 0.0 {
                (axi - lo).abs()
            } else {
                (axi - hi).abs()
            };
            let c = yi.abs() * dist.min(1e18);
            if c.is_finite() && c > comp {
                comp = c;
            }
        }
        KktResiduals {
            primal,
            dual,
            complementarity: comp,
        }
    }

    /// Worst violated constraint at an unscaled point, for infeasibility reports.
    fn worst_violation(&self, x: &DVector<f64>) -> (ConstraintRef, f64) {
        let mut worst = (ConstraintRef::Equality(0), 0.0f64);
        let p = &self.program;
        for r in 0..self.m_eq {
            let v = (p.eq_matrix.row(r).transpose().dot(x) - p.eq_rhs[r]).abs();
            if v > worst.1 {
                worst = (ConstraintRef::Equality(r), v);
            }
        }
        for r in 0..self.m_ineq {
            let v = p.ineq_matrix.row(r).transpose().dot(x) - p.ineq_rhs[r];
            if v > worst.1 {
                worst = (ConstraintRef::Inequality(r), v);
            }
        }
        for i in 0..self.n {
            let lo = p.lower[i] - x[i];
            if lo > worst.1 {
                worst = (ConstraintRef::LowerBound(i), lo);
            }
            let hi = x[i] - p.upper[i];
            if hi > worst.1 {
                worst = (ConstraintRef::UpperBound(i), hi);
            }
        }
        worst
    }

    /// Runs the ADMM iteration until optimality, infeasibility or the
    /// iteration cap, whichever comes first.
    pub fn solve(&mut self) -> Solution {
        let n = self.n;
        let m = self.m_eq + self.m_ineq + n;

        let mut x = if self.warm {
            self.x.clone()
        } else {
            DVector::zeros(n)
        };
        let mut y = if self.warm { self.y.clone() } else { DVector::zeros(m) };
        let mut ax = &self.a * &x;
        let mut z = DVector::from_iterator(
            m,
            (0..m).map(|i| ax[i].clamp(self.l[i], self.u[i])),
        );

        let mut best_primal = f64::INFINITY;
        let mut best_x = x.clone();
        let mut stall = 0usize;
        let mut last_polish_iter = 0usize;
        let mut rhs = DVector::zeros(n);
        let mut xt = DVector::zeros(n);
        let mut zt;

        let tol_feas = self.options.tol_feas;
        let tol_opt = self.options.tol_opt;
        let infeas_level = 1e3 * tol_feas;

        let mut iterations = 0;
        let status = loop {
            iterations += 1;
            if iterations > self.options.max_iter {
                break None;
            }

            // x-step: (P + sigma I + A' diag(rho) A) xt = sigma x - q + A'(rho z - y)
            let mut w = DVector::zeros(m);
            for i in 0..m {
                w[i] = self.rho[i] * z[i] - y[i];
            }
            for i in 0..n {
                rhs[i] = SIGMA * x[i] - self.q[i];
            }
            rhs.gemv_tr(1.0, &self.a, &w, 1.0);
            xt.copy_from(&rhs);
            self.kkt.solve_mut(&mut xt);
            zt = &self.a * &xt;

            // Relaxed updates.
            for i in 0..n {
                x[i] = ALPHA * xt[i] + (1.0 - ALPHA) * x[i];
            }
            for i in 0..m {
                let za = ALPHA * zt[i] + (1.0 - ALPHA) * z[i];
                ax[i] = ALPHA * zt[i] + (1.0 - ALPHA) * ax[i];
                let v = za + y[i] / self.rho[i];
                let proj = v.clamp(self.l[i], self.u[i]);
                y[i] += self.rho[i] * (za - proj);
                z[i] = proj;
            }

            // Primal residual is cheap; track it every iteration for the
            // stall-based infeasibility rule.
            let mut primal = 0.0f64;
            for i in 0..m {
                let r = (ax[i] - z[i]).abs() / self.e_scale[i];
                if r > primal {
                    primal = r;
                }
            }
            if primal < best_primal * (1.0 - STALL_IMPROVEMENT) {
                best_primal = primal;
                best_x.copy_from(&x);
                stall = 0;
            } else if best_primal > infeas_level {
                stall += 1;
                if stall >= STALL_WINDOW {
                    break Some(false);
                }
            } else {
                stall = 0;
            }

            if iterations % CHECK_INTERVAL == 0 {
                let res = self.residuals(&x, &y, &ax);
                if res.primal <= tol_feas && res.dual <= tol_opt {
                    break Some(true);
                }
                let coarse = res.primal <= 1e-4 && res.dual <= 1e-2;
                if coarse && iterations >= last_polish_iter + CHECK_INTERVAL {
                    last_polish_iter = iterations;
                    if let Some(sol) = self.try_polish(&y, &z, iterations) {
                        self.x = x;
                        self.y = y;
                        self.z = z;
                        self.warm = true;
                        return sol;
                    }
                }
                if iterations % RHO_ADAPT_INTERVAL == 0 {
                    self.maybe_rescale_rho(&x, &y, &ax, &z);
                }
            }
        };

        self.x = x.clone();
        self.y = y.clone();
        self.z = z;
        self.warm = true;

        match status {
            Some(true) => {
                let res = self.residuals(&x, &y, &ax);
                let xu = self.unscale_x(&x);
                let objective = self.program.objective(&xu);
                Solution {
                    status: SolveStatus::Optimal,
                    x: xu,
                    objective_value: objective,
                    kkt_residuals: res,
                    iterations,
                }
            }
            Some(false) => {
                // A stall near the feasible set is often slow convergence
                // rather than true infeasibility; accept the point only if
                // polish proves it optimal.
                if let Some(sol) = self.try_polish(&self.y.clone(), &self.z.clone(), iterations) {
                    return sol;
                }
                let xu = self.unscale_x(&best_x);
                let (constraint, violation) = self.worst_violation(&xu);
                let objective = self.program.objective(&xu);
                Solution {
                    status: SolveStatus::Infeasible {
                        constraint,
                        violation,
                    },
                    x: xu,
                    objective_value: objective,
                    kkt_residuals: KktResiduals {
                        primal: best_primal,
                        ..Default::default()
                    },
                    iterations,
                }
            }
            None => {
                // One last polish attempt from wherever the iteration ended.
                if let Some(sol) = self.try_polish(&self.y.clone(), &self.z.clone(), iterations) {
                    return sol;
                }
                let res = self.residuals(&x, &y, &ax);
                let xu = self.unscale_x(&x);
                let objective = self.program.objective(&xu);
                Solution {
                    status: SolveStatus::MaxIterations,
                    x: xu,
                    objective_value: objective,
                    kkt_residuals: res,
                    iterations: self.options.max_iter,
                }
            }
        }
    }

    /// Adaptive rho per the usual residual-balancing rule; refactorizes the
    /// ADMM system only when the change is substantial.
    fn maybe_rescale_rho(
        &mut self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        ax: &DVector<f64>,
        z: &DVector<f64>,
    ) {
        let m = ax.len();
        let mut r_prim = 0.0f64;
        let mut prim_scale = 1e-12f64;
        for i in 0..m {
            r_prim = r_prim.max((ax[i] - z[i]).abs());
            prim_scale = prim_scale.max(ax[i].abs()).max(z[i].abs());
        }
        let mut px = DVector::zeros(self.n);
        for i in 0..self.n {
            px[i] = self.p_diag[i] * x[i];
        }
        let mut aty = DVector::zeros(self.n);
        aty.gemv_tr(1.0, &self.a, y, 0.0);
        let mut r_dual = 0.0f64;
        let mut dual_scale = 1e-12f64;
        for i in 0..self.n {
            r_dual = r_dual.max((px[i] + self.q[i] + aty[i]).abs());
            dual_scale = dual_scale
                .max(px[i].abs())
                .max(aty[i].abs())
                .max(self.q[i].abs());
        }
        let ratio = ((r_prim / prim_scale) / (r_dual / dual_scale).max(1e-12)).sqrt();
        if !ratio.is_finite() {
            return;
        }
        let new_rho = (self.rho_bar * ratio).clamp(RHO_MIN, RHO_MAX);
        if new_rho / self.rho_bar > 5.0 || self.rho_bar / new_rho > 5.0 {
            self.rho_bar = new_rho;
            let rho = Self::rho_vector(new_rho, self.m_eq, m);
            if let Some(kkt) = Self::factorize(&self.p_diag, &self.a, &rho) {
                self.rho = rho;
                self.kkt = kkt;
            }
        }
    }

    /// Attempts to finish the solve exactly: guess the active constraint set
    /// from the current iterates, solve the equality-constrained KKT system
    /// with light regularization and iterative refinement, and accept the
    /// point only if it passes the full optimality checks.
    fn try_polish(&self, y: &DVector<f64>, z: &DVector<f64>, iterations: usize) -> Option<Solution> {
        let n = self.n;
        let m = z.len();
        let act_tol = 1e-7;
        let y_tol = 1e-9;

        #[derive(Clone, Copy, PartialEq)]
        enum Side {
            Lower,
            Upper,
            Fixed,
        }
        let mut active: Vec<(usize, Side)> = Vec::new();
        for i in 0..m {
            if self.l[i] == self.u[i] {
                active.push((i, Side::Fixed));
            } else if y[i] < -y_tol || (self.l[i].is_finite() && z[i] - self.l[i] <= act_tol) {
                active.push((i, Side::Lower));
            } else if y[i] > y_tol || (self.u[i].is_finite() && self.u[i] - z[i] <= act_tol) {
                active.push((i, Side::Upper));
            }
        }
        let k = active.len();
        let dim = n + k;

        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            kkt[(i, i)] = self.p_diag[i] + POLISH_DELTA;
            rhs[i] = -self.q[i];
        }
        for (r, &(row, side)) in active.iter().enumerate() {
            for jcol in 0..n {
                let v = self.a[(row, jcol)];
                kkt[(n + r, jcol)] = v;
                kkt[(jcol, n + r)] = v;
            }
            kkt[(n + r, n + r)] = -POLISH_DELTA;
            rhs[n + r] = match side {
                Side::Lower => self.l[row],
                Side::Upper | Side::Fixed => self.u[row],
            };
        }

        let lu = kkt.clone().lu();
        let mut sol = lu.solve(&rhs)?;
        // Iterative refinement against the unregularized system.
        for _ in 0..POLISH_REFINE_STEPS {
            let mut resid = rhs.clone();
            for i in 0..n {
                resid[i] -= self.p_diag[i] * sol[i];
                for (r, &(row, _)) in active.iter().enumerate() {
                    resid[i] -= self.a[(row, i)] * sol[n + r];
                }
            }
            for (r, &(row, _)) in active.iter().enumerate() {
                let mut ai_x = 0.0;
                for jcol in 0..n {
                    ai_x += self.a[(row, jcol)] * sol[jcol];
                }
                resid[n + r] -= ai_x;
            }
            let delta = lu.solve(&resid)?;
            sol += delta;
        }

        let x_pol = DVector::from_iterator(n, (0..n).map(|i| sol[i]));
        let mut y_pol = DVector::zeros(m);
        for (r, &(row, side)) in active.iter().enumerate() {
            let nu = sol[n + r];
            // Multiplier signs must match the active side, otherwise the
            // guessed face is wrong and the point may be suboptimal.
            let sign_ok = match side {
                Side::Fixed => true,
                Side::Lower => nu <= y_tol,
                Side::Upper => nu >= -y_tol,
            };
            if !sign_ok {
                return None;
            }
            y_pol[row] = nu;
        }

        let ax = &self.a * &x_pol;
        let res = self.residuals(&x_pol, &y_pol, &ax);
        let comp_tol = (10.0 * self.options.tol_opt).max(1e-4);
        if res.primal <= self.options.tol_feas
            && res.dual <= self.options.tol_opt
            && res.complementarity <= comp_tol
        {
            let xu = self.unscale_x(&x_pol);
            let objective = self.program.objective(&xu);
            Some(Solution {
                status: SolveStatus::Optimal,
                x: xu,
                objective_value: objective,
                kkt_residuals: res,
                iterations,
            })
        } else {
            None
        }
    }
}
