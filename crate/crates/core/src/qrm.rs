//! Quasi-reversibility extrapolation of option prices.
//!
//! Running the Black-Scholes equation forward in calendar time is the
//! backward heat equation and has no stable solution. Instead the option
//! price surface `u(s, t)` on the rectangle `[s_bid, s_ask] × [0, 2h]` (`t`
//! measured forward from today, `h` one trading day) is taken as the
//! minimizer of
//!
//! ```text
//! J(u) = ‖u_t + (σ²/2) s² u_ss‖² + β ‖u − F‖²
//! ```
//!
//! over the interior nodes, with the boundary nodes pinned to the data
//! surface `F`. `F` is today's option mid on the `t = 0` row; the low-s edge
//! carries the option bid and the high-s edge the option ask, both extended
//! linearly in time from yesterday and today, and later rows interpolate
//! linearly in `s` between the two edges. Stock prices are scaled by
//! today's stock mid before assembly.
//!
//! The stacked least-squares problem has normal matrix `AᵀA + βI`, which is
//! symmetric positive definite for any `β > 0`. It is solved matrix-free by
//! Jacobi-preconditioned conjugate gradients. The forecast `EST` is the
//! surface value at the centre stock node and the time node nearest `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{QuoteRecord, TRADING_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QrmConfig {
    pub n_s: usize,
    pub n_tau: usize,
    pub beta: f64,
    /// Forecast horizon in years; the grid spans twice this.
    pub horizon: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for QrmConfig {
    fn default() -> Self {
        Self {
            n_s: 21,
            n_tau: 11,
            beta: 0.01,
            horizon: TRADING_DAY,
            cg_tol: 1e-10,
            cg_max_iter: 5000,
        }
    }
}

impl QrmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, message: &str| {
            Err(Error::Config {
                field,
                message: message.to_string(),
            })
        };
        if self.n_s < 3 || self.n_s % 2 == 0 {
            return bad("n_s", "must be odd and at least 3");
        }
        if self.n_tau < 3 || self.n_tau % 2 == 0 {
            return bad("n_tau", "must be odd and at least 3");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta", "must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", "must be positive");
        }
        if !(self.cg_tol > 0.0) {
            return bad("cg_tol", "must be positive");
        }
        if self.cg_max_iter == 0 {
            return bad("cg_max_iter", "must be positive");
        }
        Ok(())
    }
}

/// Solution surface on the `(s, τ)` rectangle. `u` is stored s-major:
/// `u[i * n_tau + j]` is the value at `s_values[i]`, `tau_values[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrmGrid {
    pub s_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    pub u: Vec<f64>,
}

impl QrmGrid {
    pub fn n_s(&self) -> usize {
        self.s_values.len()
    }

    pub fn n_tau(&self) -> usize {
        self.tau_values.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.n_tau() + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub surface: QrmGrid,
    pub est: f64,
    /// Value of the PDE-misfit term `‖u_t + (σ²/2)s²u_ss‖²` at the solution.
    pub residual: f64,
    pub iterations: usize,
}

/// JSON summary of a [`Minimizer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerSummary {
    pub est: f64,
    pub residual: f64,
    pub iterations: usize,
    pub n_s: usize,
    pub n_tau: usize,
}

impl Minimizer {
    pub fn summary(&self) -> MinimizerSummary {
        MinimizerSummary {
            est: self.est,
            residual: self.residual,
            iterations: self.iterations,
            n_s: self.surface.n_s(),
            n_tau: self.surface.n_tau(),
        }
    }
}

/// Sparse row-compressed matrix, just enough for `A v` and `Aᵀ v`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    pub cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, a)| a * v[c]).sum())
            .collect()
    }

    pub fn mul_transpose(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &wi) in self.rows.iter().zip(w) {
            for &(c, a) in row {
                out[c] += a * wi;
            }
        }
        out
    }
}

/// The assembled regularized least-squares problem for one day.
#[derive(Debug, Clone)]
pub struct QrmSystem {
    pub n_s: usize,
    pub n_tau: usize,
    /// Scaled stock grid `s / s_mid`.
    pub x: Vec<f64>,
    pub tau: Vec<f64>,
    /// Today's stock mid, the scale of `x`.
    pub scale: f64,
    /// Data surface `F`, s-major like [`QrmGrid::u`].
    pub data: Vec<f64>,
    /// PDE operator restricted to the interior unknowns.
    pub a: SparseRows,
    /// Boundary contributions moved to the right-hand side: `A u = b` is the
    /// discrete PDE.
    pub b: Vec<f64>,
    pub beta: f64,
}

impl QrmSystem {
    pub fn n_unknowns(&self) -> usize {
        self.a.cols
    }

    /// Surface index of unknown `k`.
    fn node_of(&self, k: usize) -> (usize, usize) {
        let per = self.n_tau - 1;
        (k / per + 1, k % per + 1)
    }

    fn unknown_of(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || i + 1 == self.n_s || j == 0 {
            None
        } else {
            Some((i - 1) * (self.n_tau - 1) + (j - 1))
        }
    }

    /// `F` restricted to the unknowns.
    pub fn data_interior(&self) -> Vec<f64> {
        (0..self.n_unknowns())
            .map(|k| {
                let (i, j) = self.node_of(k);
                self.data[i * self.n_tau + j]
            })
            .collect()
    }

    /// `(AᵀA + βI) v`.
    pub fn normal_apply(&self, v: &[f64]) -> Vec<f64> {
        let av = self.a.mul(v);
        let mut out = self.a.mul_transpose(&av);
        for (o, &vi) in out.iter_mut().zip(v) {
            *o += self.beta * vi;
        }
        out
    }

    /// `Aᵀb + βF`.
    pub fn normal_rhs(&self) -> Vec<f64> {
        let mut rhs = self.a.mul_transpose(&self.b);
        for (r, f) in rhs.iter_mut().zip(self.data_interior()) {
            *r += self.beta * f;
        }
        rhs
    }

    pub fn normal_diagonal(&self) -> Vec<f64> {
        let mut diag = vec![self.beta; self.n_unknowns()];
        for row in &self.a.rows {
            for &(c, a) in row {
                diag[c] += a * a;
            }
        }
        diag
    }

    /// Dense copy of the normal matrix, for inspection and small checks.
    pub fn normal_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_unknowns();
        (0..n)
            .map(|c| {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                self.normal_apply(&e)
            })
            .collect()
    }

    /// `vᵀ(AᵀA + βI)v / vᵀv`.
    pub fn rayleigh_quotient(&self, v: &[f64]) -> f64 {
        let nv = self.normal_apply(v);
        let num: f64 = v.iter().zip(&nv).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        num / den
    }

    /// `‖A u − b‖²` for interior values `u`.
    pub fn pde_misfit(&self, u: &[f64]) -> f64 {
        self.a
            .mul(u)
            .iter()
            .zip(&self.b)
            .map(|(au, b)| (au - b).powi(2))
            .sum()
    }

    /// Full surface with boundary values from `F` and interior values `u`.
    pub fn surface(&self, u: &[f64]) -> QrmGrid {
        let mut full = self.data.clone();
        for (k, &v) in u.iter().enumerate() {
            let (i, j) = self.node_of(k);
            full[i * self.n_tau + j] = v;
        }
        QrmGrid {
            s_values: self.x.iter().map(|x| x * self.scale).collect(),
            tau_values: self.tau.clone(),
            u: full,
        }
    }
}

/// Assembles the functional from the last two records of a contract.
pub fn assemble_system(records: &[QuoteRecord], config: &QrmConfig) -> Result<QrmSystem> {
    config.validate()?;
    if records.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: records.len(),
        });
    }
    let prev = &records[records.len() - 2];
    let today = &records[records.len() - 1];
    if today.stock_ask <= today.stock_bid {
        return Err(Error::CollapsedGrid(today.stock_bid));
    }

    let (n_s, n_tau) = (config.n_s, config.n_tau);
    let scale = today.stock_mid();
    let (lo, hi) = (today.stock_bid / scale, today.stock_ask / scale);
    let dx = (hi - lo) / (n_s - 1) as f64;
    let dtau = 2.0 * config.horizon / (n_tau - 1) as f64;
    let x: Vec<f64> = (0..n_s).map(|i| lo + i as f64 * dx).collect();
    let tau: Vec<f64> = (0..n_tau).map(|j| j as f64 * dtau).collect();

    let mid = today.option_mid();
    let bid_slope = (today.option_bid - prev.option_bid) / TRADING_DAY;
    let ask_slope = (today.option_ask - prev.option_ask) / TRADING_DAY;
    let mut data = vec![0.0; n_s * n_tau];
    for i in 0..n_s {
        let w = i as f64 / (n_s - 1) as f64;
        for (j, &t) in tau.iter().enumerate() {
            data[i * n_tau + j] = if j == 0 {
                mid
            } else if i == 0 {
                today.option_bid + bid_slope * t
            } else if i == n_s - 1 {
                today.option_ask + ask_slope * t
            } else {
                (1.0 - w) * (today.option_bid + bid_slope * t) + w * (today.option_ask + ask_slope * t)
            };
        }
    }

    let n_unknowns = (n_s - 2) * (n_tau - 1);
    let mut system = QrmSystem {
        n_s,
        n_tau,
        x,
        tau,
        scale,
        data,
        a: SparseRows {
            cols: n_unknowns,
            rows: Vec::with_capacity(n_unknowns),
        },
        b: Vec::with_capacity(n_unknowns),
        beta: config.beta,
    };

    let half_var = 0.5 * today.implied_vol * today.implied_vol;
    for i in 1..n_s - 1 {
        let diff = half_var * system.x[i] * system.x[i] / (dx * dx);
        for j in 0..n_tau - 1 {
            let stencil = [
                (i, j + 1, 1.0 / dtau),
                (i, j, -1.0 / dtau - 2.0 * diff),
                (i - 1, j, diff),
                (i + 1, j, diff),
            ];
            let mut row = Vec::with_capacity(4);
            let mut rhs = 0.0;
            for (si, tj, coef) in stencil {
                if coef == 0.0 {
                    continue;
                }
                match system.unknown_of(si, tj) {
                    Some(k) => row.push((k, coef)),
                    None => rhs -= coef * system.data[si * n_tau + tj],
                }
            }
            row.sort_by_key(|&(k, _)| k);
            system.a.rows.push(row);
            system.b.push(rhs);
        }
    }
    Ok(system)
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖r‖ / ‖rhs‖`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    diag: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; rhs.len()],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / rhs_norm;
    let mut iterations = 0;
    while rel > tol {
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: rel,
            });
        }
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        rel = dot(&r, &r).sqrt() / rhs_norm;
        if !rel.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                residual: rel,
            });
        }
        for k in 0..z.len() {
            z[k] = r[k] / diag[k];
        }
        let rz_next = dot(&r, &z);
        let gamma = rz_next / rz;
        rz = rz_next;
        for k in 0..p.len() {
            p[k] = z[k] + gamma * p[k];
        }
    }
    Ok(CgSolution {
        x,
        iterations,
        relative_residual: rel,
    })
}

/// Solves the regularized problem for the last two records and reads off
/// the one-day-ahead estimate.
pub fn solve_qrm(records: &[QuoteRecord], config: &QrmConfig) -> Result<Minimizer> {
    let system = assemble_system(records, config)?;
    let rhs = system.normal_rhs();
    let diag = system.normal_diagonal();
    let start = system.data_interior();
    let sol = conjugate_gradient(
        |v| system.normal_apply(v),
        &rhs,
        &diag,
        start,
        config.cg_tol,
        config.cg_max_iter,
    )?;
    let residual = system.pde_misfit(&sol.x);
    let surface = system.surface(&sol.x);
    let centre = (system.n_s - 1) / 2;
    let dtau = system.tau[1];
    let j_h = ((config.horizon / dtau).round() as usize).min(system.n_tau - 1);
    Ok(Minimizer {
        est: surface.at(centre, j_h),
        surface,
        residual,
        iterations: sol.iterations,
    })
}

/// Per-day result of [`estimate_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayEstimate {
    pub est: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Runs [`solve_qrm`] on every consecutive pair of days. Element `k` is the
/// forecast formed on day `k` for day `k + 1`; element 0 is `None`.
pub fn estimate_series(records: &[QuoteRecord], config: &QrmConfig) -> Result<Vec<Option<DayEstimate>>> {
    if records.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: records.len(),
        });
    }
    let mut out = Vec::with_capacity(records.len());
    out.push(None);
    for k in 1..records.len() {
        let m = solve_qrm(&records[k - 1..=k], config).map_err(|e| Error::Day {
            day: k,
            source: Box::new(e),
        })?;
        out.push(Some(DayEstimate {
            est: m.est,
            residual: m.residual,
            iterations: m.iterations,
        }));
    }
    Ok(out)
}
