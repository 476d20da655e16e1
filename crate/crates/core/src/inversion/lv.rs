//! Loris-Verhoeven primal-dual iteration for
//! `min_x 1/2 ||A x - y||^2 + lambda ||L x||_1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::prior::PriorOperator;
use crate::error::{Error, Result};
use crate::par;

pub const RHO: f64 = 1.9;
pub const TAU_FACTOR: f64 = 0.99;
pub const NORM_TOL: f64 = 1e-6;
pub const NORM_MAX_ITERS: usize = 100_000;
/// Upper bound on stored objective values per column.
pub const MAX_TRACE_LEN: usize = 1000;
/// Columns solved together; fixed so results do not depend on thread count.
const BATCH: usize = 8;

/// Largest singular value by power iteration on `M^T M`, started from the
/// normalised all-ones vector. Stops when the Rayleigh quotient changes by
/// less than `tol` relative.
pub fn operator_norm(m: &DMatrix<f64>, tol: f64, max_iters: usize) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    let n = m.ncols();
    let mut v = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
    let mut prev = 0.0;
    for _ in 0..max_iters {
        let mv = m * &v;
        let nu = mv.norm_squared();
        let w = m.tr_mul(&mv);
        let wn = w.norm();
        if !wn.is_finite() {
            return Err(Error::NonFinite("power iteration".into()));
        }
        if wn == 0.0 {
            return Ok(nu.sqrt());
        }
        v = w / wn;
        if (nu - prev).abs() <= tol * nu {
            return Ok(nu.sqrt());
        }
        prev = nu;
    }
    Err(Error::PowerIterationNonConvergence { tol, iters: max_iters })
}

/// Prox of the conjugate of `lambda ||.||_1`: clipping to `[-lambda, lambda]`.
pub fn prox_conj_l1(u: &[f64], lambda: f64) -> Vec<f64> {
    u.iter().map(|&v| clip(v, lambda)).collect()
}

/// `y = a x + b y`, elementwise.
fn axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>, b: f64) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi = a * xi + b * *yi;
    }
}

#[inline]
fn clip(v: f64, lambda: f64) -> f64 {
    v.max(-lambda).min(lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// `(iteration, objective)` pairs, strided so at most
    /// [`MAX_TRACE_LEN`] + 2 entries are kept; always includes 0 and the last.
    pub objective_trace: Vec<(usize, f64)>,
    /// Relative size of the last primal-dual update.
    pub final_residual: f64,
    pub tau: f64,
    pub eta: f64,
    pub rho: f64,
}

/// Step sizes and cached products for one transfer matrix and prior.
#[derive(Debug, Clone)]
pub struct LvSolver {
    a: DMatrix<f64>,
    gram: DMatrix<f64>,
    prior: PriorOperator,
    tau: f64,
    eta: f64,
    rho: f64,
}

impl LvSolver {
    pub fn new(a: &DMatrix<f64>, prior: PriorOperator) -> Result<Self> {
        if prior.dim() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "prior has dimension {}, matrix has {} columns",
                prior.dim(),
                a.ncols()
            )));
        }
        let a_norm = operator_norm(a, NORM_TOL, NORM_MAX_ITERS)?;
        if a_norm == 0.0 {
            return Err(Error::invalid("zero transfer matrix"));
        }
        let prior_norm = match prior.matrix() {
            None => 1.0,
            Some(m) => operator_norm(m, NORM_TOL, NORM_MAX_ITERS)?,
        };
        let tau = TAU_FACTOR / (a_norm * a_norm);
        let eta = 1.0 / (tau * prior_norm * prior_norm);
        Ok(LvSolver {
            gram: a.tr_mul(a),
            a: a.clone(),
            prior,
            tau,
            eta,
            rho: RHO,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn prior(&self) -> &PriorOperator {
        &self.prior
    }

    /// `x = A^T y`, `u = L x`.
    pub fn start(&self, y: &DMatrix<f64>) -> Result<LvState> {
        if y.nrows() != self.a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, data has {}",
                self.a.nrows(),
                y.nrows()
            )));
        }
        let aty = self.a.tr_mul(y);
        let x = aty.clone();
        let u = self.prior.apply(&x);
        let (k, j, b) = (x.nrows(), u.nrows(), x.ncols());
        Ok(LvState {
            x,
            u: u.clone(),
            u_half: u,
            x_half: DMatrix::zeros(k, b),
            aty,
            grad: DMatrix::zeros(k, b),
            buf_k: DMatrix::zeros(k, b),
            buf_j: DMatrix::zeros(j, b),
            iterations: 0,
        })
    }

    /// Objective `1/2 ||A x - y||^2 + lambda ||L x||_1` for each column.
    pub fn objective(&self, x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Vec<f64> {
        let r = &self.a * x - y;
        let lx = self.prior.apply(x);
        (0..x.ncols())
            .map(|m| 0.5 * r.column(m).norm_squared() + lambda * lx.column(m).lp_norm(1))
            .collect()
    }

    /// Run `iters` iterations on every column of `y`.
    pub fn solve(&self, y: &DMatrix<f64>, lambda: f64, iters: usize) -> Result<(DMatrix<f64>, Vec<SolverDiagnostics>)> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if iters == 0 {
            return Err(Error::invalid("need at least one iteration"));
        }
        if y.nrows() != self.a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, data has {}",
                self.a.nrows(),
                y.nrows()
            )));
        }
        let ranges = par::chunk_ranges(y.ncols(), BATCH);
        let parts = par::map(&ranges, |r| {
            let yb = y.columns(r.start, r.len()).into_owned();
            self.solve_batch(&yb, lambda, iters)
        });
        let mut x = DMatrix::zeros(self.a.ncols(), y.ncols());
        let mut diags = Vec::with_capacity(y.ncols());
        for (r, part) in ranges.iter().zip(parts) {
            let (xb, d) = part?;
            x.columns_mut(r.start, r.len()).copy_from(&xb);
            diags.extend(d);
        }
        Ok((x, diags))
    }

    fn solve_batch(&self, y: &DMatrix<f64>, lambda: f64, iters: usize) -> Result<(DMatrix<f64>, Vec<SolverDiagnostics>)> {
        // Entries at multiples of the stride below `iters`, plus the last one.
        let stride = iters.div_ceil(MAX_TRACE_LEN - 1).max(1);
        let mut state = self.start(y)?;
        let mut traces: Vec<Vec<(usize, f64)>> = vec![Vec::new(); y.ncols()];
        let record = |state: &LvState, traces: &mut Vec<Vec<(usize, f64)>>| -> Result<()> {
            for (m, v) in self.objective(&state.x, y, lambda).into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("objective at iteration {}", state.iterations)));
                }
                traces[m].push((state.iterations, v));
            }
            Ok(())
        };
        record(&state, &mut traces)?;
        for q in 1..iters {
            state.step(self, lambda);
            if q % stride == 0 {
                record(&state, &mut traces)?;
            }
        }
        let (x_prev, u_prev) = (state.x.clone(), state.u.clone());
        state.step(self, lambda);
        record(&state, &mut traces)?;

        let diags = traces
            .into_iter()
            .enumerate()
            .map(|(m, objective_trace)| {
                let dx = (state.x.column(m) - x_prev.column(m)).norm_squared();
                let du = (state.u.column(m) - u_prev.column(m)).norm_squared();
                let size = state.x.column(m).norm_squared() + state.u.column(m).norm_squared();
                let final_residual = if size > 0.0 { ((dx + du) / size).sqrt() } else { (dx + du).sqrt() };
                SolverDiagnostics {
                    iterations: iters,
                    objective_trace,
                    final_residual,
                    tau: self.tau,
                    eta: self.eta,
                    rho: self.rho,
                }
            })
            .collect();
        Ok((state.x, diags))
    }

    fn l_into(&self, x: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        match self.prior.matrix() {
            None => out.copy_from(x),
            Some(l) => out.gemm(1.0, l, x, 0.0),
        }
    }

    fn lt_into(&self, u: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        match self.prior.matrix() {
            None => out.copy_from(u),
            Some(l) => out.gemm_tr(1.0, l, u, 0.0),
        }
    }
}

/// Iterates of a batch of columns. Exposes the half-step dual so callers can
/// check feasibility.
#[derive(Debug, Clone)]
pub struct LvState {
    x: DMatrix<f64>,
    u: DMatrix<f64>,
    u_half: DMatrix<f64>,
    x_half: DMatrix<f64>,
    aty: DMatrix<f64>,
    grad: DMatrix<f64>,
    buf_k: DMatrix<f64>,
    buf_j: DMatrix<f64>,
    iterations: usize,
}

impl LvState {
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn u_half(&self) -> &DMatrix<f64> {
        &self.u_half
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// One pass of the five update lines.
    pub fn step(&mut self, s: &LvSolver, lambda: f64) {
        // e = A^T (A x - y)
        self.grad.gemm(1.0, &s.gram, &self.x, 0.0);
        self.grad -= &self.aty;

        // x_half = x - tau (e + L^T u)
        s.lt_into(&self.u, &mut self.buf_k);
        self.buf_k += &self.grad;
        self.x_half.copy_from(&self.x);
        axpy(&mut self.x_half, -s.tau, &self.buf_k, 1.0);

        // u_half = prox(u + eta L x_half)
        s.l_into(&self.x_half, &mut self.buf_j);
        self.u_half.copy_from(&self.u);
        axpy(&mut self.u_half, s.eta, &self.buf_j, 1.0);
        self.u_half.apply(|v| *v = clip(*v, lambda));

        // x = x - rho tau (e + L^T u_half)
        s.lt_into(&self.u_half, &mut self.buf_k);
        self.buf_k += &self.grad;
        axpy(&mut self.x, -s.rho * s.tau, &self.buf_k, 1.0);

        // u = u + rho (u_half - u)
        axpy(&mut self.u, s.rho, &self.u_half, 1.0 - s.rho);
        self.iterations += 1;
    }
}
