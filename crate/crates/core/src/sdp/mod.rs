//! Small dense interior-point solver for complex Hermitian SDPs.
//!
//! Problem form (maximize):
//!
//! ```text
//! max   sum_b tr(C_b X_b) + c^T s
//! s.t.  sum_b tr(A_ib X_b) + a_i^T s  = r_i     (equalities)
//!       sum_b tr(G_ib X_b) + g_i^T s >= r_i     (inequalities)
//!       X_b Hermitian PSD,  lower <= s <= upper
//! ```
//!
//! The problem is embedded into a real symmetric SDP (see [`embed`]) and
//! handed to the primal-dual core in [`ipm`]. Solves are deterministic and
//! single-threaded.

pub mod embed;
pub mod ipm;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;

pub use embed::{embed_complex, embed_matrix, unembed_matrix, EmbeddedSdp};
pub use ipm::{RealSdp, RealSolution, RealTerm, SymCoeff};

/// Hermitian coefficient matrix of one block.
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianCoeff {
    /// Upper-triangle entries `(row, col, value)` with `row <= col`; the
    /// lower triangle follows by conjugate symmetry. Diagonal values must be
    /// real.
    Sparse(Vec<(usize, usize, Complex64)>),
    Dense(DMatrix<Complex64>),
}

impl HermitianCoeff {
    /// `e_i e_i^T`.
    pub fn diag_entry(i: usize) -> Self {
        HermitianCoeff::Sparse(vec![(i, i, Complex64::new(1.0, 0.0))])
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<Complex64> {
        match self {
            HermitianCoeff::Dense(a) => a.clone(),
            HermitianCoeff::Sparse(entries) => {
                let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
                for &(r, c, v) in entries {
                    out[(r, c)] += v;
                    if r != c {
                        out[(c, r)] += v.conj();
                    }
                }
                out
            }
        }
    }

    /// `tr(A X)`, real for Hermitian `A` and `X`.
    pub fn trace_with(&self, x: &DMatrix<Complex64>) -> f64 {
        match self {
            HermitianCoeff::Sparse(entries) => entries
                .iter()
                .map(|&(r, c, v)| {
                    if r == c {
                        (v * x[(r, r)]).re
                    } else {
                        2.0 * (v * x[(c, r)]).re
                    }
                })
                .sum(),
            HermitianCoeff::Dense(a) => a.iter().zip(x.transpose().iter()).map(|(p, q)| (p * q).re).sum(),
        }
    }
}

/// Real-linear functional over blocks and scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearTerm {
    pub blocks: Vec<(usize, HermitianCoeff)>,
    pub scalars: Vec<(usize, f64)>,
}

impl LinearTerm {
    pub fn block(b: usize, coeff: HermitianCoeff) -> Self {
        Self {
            blocks: vec![(b, coeff)],
            scalars: vec![],
        }
    }

    pub fn with_block(mut self, b: usize, coeff: HermitianCoeff) -> Self {
        self.blocks.push((b, coeff));
        self
    }

    pub fn with_scalar(mut self, j: usize, coeff: f64) -> Self {
        self.scalars.push((j, coeff));
        self
    }

    pub fn evaluate(&self, blocks: &[DMatrix<Complex64>], scalars: &[f64]) -> f64 {
        self.blocks.iter().map(|(b, c)| c.trace_with(&blocks[*b])).sum::<f64>()
            + self.scalars.iter().map(|&(j, v)| v * scalars[j]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub term: LinearTerm,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(term: LinearTerm, rhs: f64) -> Self {
        Self { term, rhs }
    }
}

/// Hermitian SDP with box-bounded real scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSdp {
    pub block_dims: Vec<usize>,
    pub scalar_bounds: Vec<(f64, f64)>,
    /// Maximized.
    pub objective: LinearTerm,
    pub equalities: Vec<LinearConstraint>,
    /// `term >= rhs`.
    pub inequalities: Vec<LinearConstraint>,
}

impl HermitianSdp {
    pub fn new(block_dims: Vec<usize>, scalar_bounds: Vec<(f64, f64)>) -> Self {
        Self {
            block_dims,
            scalar_bounds,
            objective: LinearTerm::default(),
            equalities: vec![],
            inequalities: vec![],
        }
    }

    pub fn with_objective(mut self, objective: LinearTerm) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_equality(mut self, c: LinearConstraint) -> Self {
        self.equalities.push(c);
        self
    }

    pub fn with_inequality(mut self, c: LinearConstraint) -> Self {
        self.inequalities.push(c);
        self
    }

    /// Plain-text dump for cross-checking with external tools.
    ///
    /// ```text
    /// blocks <n_1> <n_2> ...
    /// scalar <j> <lower> <upper>
    /// objective | eq <rhs> | ineq <rhs>     (section headers, ineq means >=)
    ///   b <block> <row> <col> <re> <im>      (upper triangle only)
    ///   s <index> <coeff>
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let dims: Vec<String> = self.block_dims.iter().map(|n| n.to_string()).collect();
        writeln!(out, "blocks {}", dims.join(" ")).unwrap();
        for (j, (lo, hi)) in self.scalar_bounds.iter().enumerate() {
            writeln!(out, "scalar {j} {lo:e} {hi:e}").unwrap();
        }
        let write_term = |out: &mut String, term: &LinearTerm| {
            for (b, coeff) in &term.blocks {
                let n = self.block_dims[*b];
                let dense = coeff.to_dense(n);
                for c in 0..n {
                    for r in 0..=c {
                        let v = dense[(r, c)];
                        if v.re != 0.0 || v.im != 0.0 {
                            writeln!(out, "  b {b} {r} {c} {:e} {:e}", v.re, v.im).unwrap();
                        }
                    }
                }
            }
            for (j, v) in &term.scalars {
                writeln!(out, "  s {j} {v:e}").unwrap();
            }
        };
        writeln!(out, "objective").unwrap();
        write_term(&mut out, &self.objective);
        for con in &self.equalities {
            writeln!(out, "eq {:e}", con.rhs).unwrap();
            write_term(&mut out, &con.term);
        }
        for con in &self.inequalities {
            writeln!(out, "ineq {:e}", con.rhs).unwrap();
            write_term(&mut out, &con.term);
        }
        out
    }
}

/// Solver tolerances and iteration caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdpSettings {
    /// Relative duality gap `|p - d| / (1 + |p| + |d|)`.
    pub gap_tol: f64,
    /// Per-constraint primal residual `|r_i| / (1 + |b_i|)` and relative dual
    /// residual.
    pub feas_tol: f64,
    /// Allowed negative eigenvalue in returned blocks.
    pub eig_tol: f64,
    pub max_iters: usize,
    /// Consecutive iterations without merit progress before giving up.
    pub stall_iters: usize,
    /// Relative size of `C - R_d` against `||A|| ||y||` below which the dual
    /// iterate is accepted as an infeasibility ray.
    pub infeasibility_ratio: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            feas_tol: 1e-8,
            eig_tol: 1e-8,
            max_iters: 200,
            stall_iters: 20,
            infeasibility_ratio: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub block_values: Vec<DMatrix<Complex64>>,
    pub scalar_values: Vec<f64>,
    /// Primal objective.
    pub objective_value: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    /// Equality multipliers followed by inequality multipliers (the latter
    /// nonnegative at optimality).
    pub multipliers: Vec<f64>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Solves `problem` to the tolerances in `settings`.
pub fn solve(problem: &HermitianSdp, settings: &SdpSettings) -> Result<SdpSolution> {
    let embedded = embed_complex(problem)?;
    let real = ipm::solve_real(&embedded.real, settings);
    let scalar_values = embedded.scalar_values(&real.x_lp);
    let n_user = embedded.num_equalities + embedded.num_inequalities;
    Ok(SdpSolution {
        block_values: real.x.iter().map(unembed_matrix).collect(),
        scalar_values,
        objective_value: real.primal_objective + embedded.objective_offset,
        dual_objective: real.dual_objective + embedded.objective_offset,
        duality_gap: real.duality_gap,
        primal_residual: real.primal_residual,
        dual_residual: real.dual_residual,
        status: real.status,
        iterations: real.iterations,
        multipliers: real.y.iter().take(n_user).copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_diag(n: usize) -> HermitianSdp {
        let mut p = HermitianSdp::new(vec![n], vec![]);
        for i in 0..n {
            p = p.with_equality(LinearConstraint::new(LinearTerm::block(0, HermitianCoeff::diag_entry(i)), 1.0));
        }
        p
    }

    #[test]
    fn two_by_two_off_diagonal() {
        let cm = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let p = unit_diag(2).with_objective(LinearTerm::block(0, HermitianCoeff::Dense(cm)));
        let s = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-6);
        let x = &s.block_values[0];
        for v in x.iter() {
            assert!((v - c(1.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn trace_fixed_by_diagonal() {
        for n in [1, 3, 6] {
            let id = DMatrix::<Complex64>::identity(n, n);
            let p = unit_diag(n).with_objective(LinearTerm::block(0, HermitianCoeff::Dense(id)));
            let s = solve(&p, &SdpSettings::default()).unwrap();
            assert_eq!(s.status, SdpStatus::Optimal);
            assert!((s.objective_value - n as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn complex_phase_alignment() {
        // tr(A X) = 2 Re(w X_01) with unit diagonal -> 2|w| at X_01 = conj(w)/|w|
        let w = c(0.6, -0.8);
        let coeff = HermitianCoeff::Sparse(vec![(0, 1, w.conj())]);
        let p = unit_diag(2).with_objective(LinearTerm::block(0, coeff));
        let s = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-6);
        assert!((s.block_values[0][(0, 1)] - w.conj()).norm() < 1e-4);
    }

    #[test]
    fn scalars_and_inequalities() {
        // max s0 - X_00 s.t. X_00 + s0 = 1.5, X_00 >= 0.25, 0 <= s0 <= 1
        let p = HermitianSdp::new(vec![1], vec![(0.0, 1.0)])
            .with_objective(
                LinearTerm::block(0, HermitianCoeff::Sparse(vec![(0, 0, c(-1.0, 0.0))])).with_scalar(0, 1.0),
            )
            .with_equality(LinearConstraint::new(
                LinearTerm::block(0, HermitianCoeff::diag_entry(0)).with_scalar(0, 1.0),
                1.5,
            ))
            .with_inequality(LinearConstraint::new(LinearTerm::block(0, HermitianCoeff::diag_entry(0)), 0.25));
        let s = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 0.5).abs() < 1e-6, "{}", s.objective_value);
        assert!((s.scalar_values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fixed_scalar_is_substituted() {
        let p = HermitianSdp::new(vec![1], vec![(0.7, 0.7)])
            .with_objective(LinearTerm::default().with_scalar(0, 2.0))
            .with_equality(LinearConstraint::new(
                LinearTerm::block(0, HermitianCoeff::diag_entry(0)).with_scalar(0, 1.0),
                1.0,
            ));
        let s = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 1.4).abs() < 1e-7);
        assert!((s.block_values[0][(0, 0)].re - 0.3).abs() < 1e-6);
    }

    #[test]
    fn infeasible_energy_like_constraint() {
        // unit diagonal 2x2 and tr(J X) >= 5 where max tr(J X) = 4
        let j = DMatrix::from_element(2, 2, c(1.0, 0.0));
        let p = unit_diag(2)
            .with_objective(LinearTerm::block(0, HermitianCoeff::Dense(DMatrix::identity(2, 2))))
            .with_inequality(LinearConstraint::new(LinearTerm::block(0, HermitianCoeff::Dense(j)), 5.0));
        let s = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
    }

    #[test]
    fn dump_lists_blocks_and_rows() {
        let p = unit_diag(2).with_inequality(LinearConstraint::new(
            LinearTerm::block(0, HermitianCoeff::Sparse(vec![(0, 1, c(0.5, -0.25))])),
            0.1,
        ));
        let text = p.to_text();
        assert!(text.starts_with("blocks 2\n"));
        assert_eq!(text.matches("\neq ").count(), 2);
        assert!(text.contains("ineq 1e-1\n  b 0 0 1 5e-1 -2.5e-1\n"));
    }

    #[test]
    fn trace_with_matches_dense() {
        let coeff = HermitianCoeff::Sparse(vec![(0, 0, c(2.0, 0.0)), (0, 1, c(0.3, 0.4))]);
        let x = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(3.0, 0.0)]);
        let dense = HermitianCoeff::Dense(coeff.to_dense(2));
        assert!((coeff.trace_with(&x) - dense.trace_with(&x)).abs() < 1e-15);
        // tr(A X) = 2 x00 + 2 Re(a01 x10)
        let want = 2.0 + 2.0 * (c(0.3, 0.4) * c(0.2, -0.1)).re;
        assert!((coeff.trace_with(&x) - want).abs() < 1e-15);
    }
}
