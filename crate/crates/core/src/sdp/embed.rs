//! Complex Hermitian -> real symmetric embedding.
//!
//! A Hermitian block `X` of size `n` becomes the real `2n` block
//!
//! ```text
//! [ Re X  -Im X ]
//! [ Im X   Re X ]
//! ```
//!
//! For Hermitian `A`, the embedded inner product equals `2 tr(A X)`. Every
//! embedded coefficient matrix is therefore scaled by 1/2, so objective and
//! constraint values of the real problem equal those of the Hermitian one.
//!
//! Bounded scalars `l <= s <= u` become `s = l + p` with nonnegative `p` and
//! `q` tied by `p + q = u - l`; inequalities get a nonnegative surplus. All
//! of these live in the LP block of the real problem.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ipm::{RealSdp, RealTerm, SymCoeff};
use super::{HermitianCoeff, HermitianSdp, LinearTerm};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// How an original scalar maps onto the LP block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarSlot {
    /// `lower == upper`; substituted out.
    Fixed(f64),
    /// `value = lower + x_lp[index]`.
    Shifted { lower: f64, index: usize },
}

/// Real problem plus what is needed to map a real solution back.
#[derive(Debug, Clone)]
pub struct EmbeddedSdp {
    pub real: RealSdp,
    /// Original block sizes (complex dimension).
    pub block_dims: Vec<usize>,
    pub scalars: Vec<ScalarSlot>,
    /// Original objective = real objective + offset.
    pub objective_offset: f64,
    /// Number of leading real constraints coming from equalities.
    pub num_equalities: usize,
    pub num_inequalities: usize,
}

pub(crate) fn embed_coeff(coeff: &HermitianCoeff, n: usize) -> SymCoeff {
    match coeff {
        HermitianCoeff::Sparse(entries) => {
            let mut out = Vec::with_capacity(entries.len() * 4);
            for &(r, c, v) in entries {
                if r == c {
                    out.push((r, r, 0.5 * v.re));
                    out.push((n + r, n + r, 0.5 * v.re));
                    continue;
                }
                let (re, im) = (0.5 * v.re, 0.5 * v.im);
                out.extend_from_slice(&[
                    (r, c, re),
                    (c, r, re),
                    (n + r, n + c, re),
                    (n + c, n + r, re),
                ]);
                if im != 0.0 {
                    out.extend_from_slice(&[
                        (r, n + c, -im),
                        (n + c, r, -im),
                        (c, n + r, im),
                        (n + r, c, im),
                    ]);
                }
            }
            SymCoeff::Sparse(out)
        }
        HermitianCoeff::Dense(a) => SymCoeff::Dense(embed_matrix(a) * 0.5),
    }
}

/// `[[Re A, -Im A], [Im A, Re A]]`, unscaled.
pub fn embed_matrix(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..n {
        for r in 0..n {
            let v = a[(r, c)];
            out[(r, c)] = v.re;
            out[(n + r, n + c)] = v.re;
            out[(r, n + c)] = -v.im;
            out[(n + r, c)] = v.im;
        }
    }
    out
}

/// Inverse of [`embed_matrix`], averaging the two copies so the result is
/// exactly Hermitian even if the real block lost its structure to round-off.
pub fn unembed_matrix(x: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = x.nrows() / 2;
    let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for c in 0..n {
        for r in 0..n {
            let re = 0.5 * (x[(r, c)] + x[(n + r, n + c)]);
            let im = 0.5 * (x[(n + r, c)] - x[(r, n + c)]);
            out[(r, c)] = Complex64::new(re, im);
        }
    }
    let adj = out.adjoint();
    (out + adj).map(|v| v * 0.5)
}

fn check_coeff(coeff: &HermitianCoeff, n: usize) -> Result<()> {
    match coeff {
        HermitianCoeff::Sparse(entries) => {
            for &(r, c, v) in entries {
                if r > c || c >= n {
                    return Err(Error::InvalidProblem(format!(
                        "sparse entry ({r}, {c}) must satisfy row <= col < {n}"
                    )));
                }
                if r == c && v.im.abs() > HERMITIAN_TOL {
                    return Err(Error::InvalidProblem("diagonal entry with imaginary part".into()));
                }
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::InvalidProblem("non-finite coefficient".into()));
                }
            }
        }
        HermitianCoeff::Dense(a) => {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Dimension { expected: n, got: a.nrows() });
            }
            let dev = (a - a.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
            if dev > HERMITIAN_TOL || a.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::InvalidProblem(format!(
                    "coefficient matrix is not Hermitian (deviation {dev:e})"
                )));
            }
        }
    }
    Ok(())
}

fn check_term(problem: &HermitianSdp, term: &LinearTerm) -> Result<()> {
    for (b, coeff) in &term.blocks {
        let n = *problem
            .block_dims
            .get(*b)
            .ok_or_else(|| Error::InvalidProblem(format!("block index {b} out of range")))?;
        check_coeff(coeff, n)?;
    }
    for &(j, v) in &term.scalars {
        if j >= problem.scalar_bounds.len() || !v.is_finite() {
            return Err(Error::InvalidProblem(format!("bad scalar coefficient for index {j}")));
        }
    }
    Ok(())
}

/// Validates the Hermitian problem and maps it onto the real core.
pub fn embed_complex(problem: &HermitianSdp) -> Result<EmbeddedSdp> {
    check_term(problem, &problem.objective)?;
    for con in problem.equalities.iter().chain(&problem.inequalities) {
        check_term(problem, &con.term)?;
        if !con.rhs.is_finite() {
            return Err(Error::InvalidProblem("non-finite right-hand side".into()));
        }
    }

    let mut lp_dim = 0usize;
    let mut scalars = Vec::with_capacity(problem.scalar_bounds.len());
    let mut upper_rows = Vec::new();
    for &(lo, hi) in &problem.scalar_bounds {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidProblem(format!("invalid scalar bounds [{lo}, {hi}]")));
        }
        if lo == hi {
            scalars.push(ScalarSlot::Fixed(lo));
        } else {
            scalars.push(ScalarSlot::Shifted { lower: lo, index: lp_dim });
            upper_rows.push((
                RealTerm {
                    blocks: vec![],
                    lp: vec![(lp_dim, 1.0), (lp_dim + 1, 1.0)],
                },
                hi - lo,
            ));
            lp_dim += 2;
        }
    }

    // returns the real term and the constant contributed by the scalars
    let lower = |term: &LinearTerm| -> (RealTerm, f64) {
        let blocks = term
            .blocks
            .iter()
            .map(|(b, c)| (*b, embed_coeff(c, problem.block_dims[*b])))
            .collect();
        let mut lp = Vec::new();
        let mut constant = 0.0;
        for &(j, v) in &term.scalars {
            match scalars[j] {
                ScalarSlot::Fixed(val) => constant += v * val,
                ScalarSlot::Shifted { lower, index } => {
                    constant += v * lower;
                    lp.push((index, v));
                }
            }
        }
        (RealTerm { blocks, lp }, constant)
    };

    let mut constraints = Vec::new();
    for con in &problem.equalities {
        let (term, k) = lower(&con.term);
        constraints.push((term, con.rhs - k));
    }
    for con in &problem.inequalities {
        let (mut term, k) = lower(&con.term);
        term.lp.push((lp_dim, -1.0));
        lp_dim += 1;
        constraints.push((term, con.rhs - k));
    }
    constraints.extend(upper_rows);

    let (objective, objective_offset) = lower(&problem.objective);
    Ok(EmbeddedSdp {
        real: RealSdp {
            block_dims: problem.block_dims.iter().map(|n| 2 * n).collect(),
            lp_dim,
            objective,
            constraints,
        },
        block_dims: problem.block_dims.clone(),
        scalars,
        objective_offset,
        num_equalities: problem.equalities.len(),
        num_inequalities: problem.inequalities.len(),
    })
}

impl EmbeddedSdp {
    pub fn scalar_values(&self, x_lp: &nalgebra::DVector<f64>) -> Vec<f64> {
        self.scalars
            .iter()
            .map(|s| match *s {
                ScalarSlot::Fixed(v) => v,
                ScalarSlot::Shifted { lower, index } => lower + x_lp[index],
            })
            .collect()
    }
}
