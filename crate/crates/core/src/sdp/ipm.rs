//! Real symmetric primal-dual interior-point core.
//!
//! Standard form (maximization):
//!
//! ```text
//! max  <C, X>            s.t.  <A_i, X> = b_i,   X in K
//! min  b^T y             s.t.  sum_i y_i A_i - C = Z,  Z in K
//! ```
//!
//! where `K` is a product of PSD cones and one nonnegative orthant (the
//! "LP block"). Internally the primal is negated into minimization form and
//! solved with an infeasible-start Mehrotra predictor-corrector using the
//! HKM search direction. Constraint data may be sparse, which keeps the
//! Schur complement cheap for the diagonal-pinning constraints that dominate
//! the lifted surface problems.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{SdpSettings, SdpStatus};

/// Symmetric coefficient matrix of one block.
#[derive(Debug, Clone, PartialEq)]
pub enum SymCoeff {
    /// Nonzero entries `(row, col, value)`; both triangles listed.
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

impl SymCoeff {
    fn add_scaled_to(&self, out: &mut DMatrix<f64>, s: f64) {
        match self {
            SymCoeff::Sparse(e) => {
                for &(r, c, v) in e {
                    out[(r, c)] += s * v;
                }
            }
            SymCoeff::Dense(a) => out.zip_apply(a, |o, v| *o += s * v),
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        self.add_scaled_to(&mut m, 1.0);
        m
    }

    fn frobenius(&self) -> f64 {
        match self {
            SymCoeff::Sparse(e) => e.iter().map(|&(_, _, v)| v * v).sum::<f64>().sqrt(),
            SymCoeff::Dense(a) => a.norm(),
        }
    }
}

/// Linear functional over all blocks plus the LP block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RealTerm {
    pub blocks: Vec<(usize, SymCoeff)>,
    pub lp: Vec<(usize, f64)>,
}

/// Real symmetric SDP in equality standard form (maximize).
#[derive(Debug, Clone, PartialEq)]
pub struct RealSdp {
    pub block_dims: Vec<usize>,
    pub lp_dim: usize,
    pub objective: RealTerm,
    pub constraints: Vec<(RealTerm, f64)>,
}

#[derive(Debug, Clone)]
pub struct RealSolution {
    pub x: Vec<DMatrix<f64>>,
    pub x_lp: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub z_lp: DVector<f64>,
    /// `<C, X>` in the maximization sense.
    pub primal_objective: f64,
    /// `b^T y` in the maximization sense.
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

struct Prepared {
    dims: Vec<usize>,
    lp_dim: usize,
    /// Minimization cost (negated objective).
    c: Vec<DMatrix<f64>>,
    c_lp: DVector<f64>,
    b: DVector<f64>,
    /// Per block: constraints touching it, split by storage.
    sparse_rows: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    dense_rows: Vec<Vec<(usize, DMatrix<f64>)>>,
    /// Per constraint: LP coefficients.
    lp_rows: Vec<Vec<(usize, f64)>>,
}

impl Prepared {
    fn new(p: &RealSdp) -> Self {
        let nb = p.block_dims.len();
        let mut c: Vec<DMatrix<f64>> = p.block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (b, coeff) in &p.objective.blocks {
            coeff.add_scaled_to(&mut c[*b], -1.0);
        }
        let mut c_lp = DVector::zeros(p.lp_dim);
        for &(l, v) in &p.objective.lp {
            c_lp[l] -= v;
        }
        let mut sparse_rows = vec![Vec::new(); nb];
        let mut dense_rows = vec![Vec::new(); nb];
        let mut lp_rows = Vec::with_capacity(p.constraints.len());
        for (i, (term, _)) in p.constraints.iter().enumerate() {
            for (b, coeff) in &term.blocks {
                let n = p.block_dims[*b];
                match coeff {
                    // dense storage is cheaper once a sparse matrix is no longer small
                    SymCoeff::Sparse(e) if e.len() <= 2 * n => sparse_rows[*b].push((i, e.clone())),
                    other => dense_rows[*b].push((i, other.to_dense(n))),
                }
            }
            lp_rows.push(term.lp.clone());
        }
        let b = DVector::from_iterator(p.constraints.len(), p.constraints.iter().map(|(_, r)| *r));
        Self {
            dims: p.block_dims.clone(),
            lp_dim: p.lp_dim,
            c,
            c_lp,
            b,
            sparse_rows,
            dense_rows,
            lp_rows,
        }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    /// `A(X)`.
    fn apply(&self, x: &[DMatrix<f64>], x_lp: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (blk, xb) in x.iter().enumerate() {
            for (i, e) in &self.sparse_rows[blk] {
                out[*i] += e.iter().map(|&(r, c, v)| v * xb[(c, r)]).sum::<f64>();
            }
            for (i, a) in &self.dense_rows[blk] {
                out[*i] += a.dot(xb);
            }
        }
        for (i, row) in self.lp_rows.iter().enumerate() {
            out[i] += row.iter().map(|&(l, v)| v * x_lp[l]).sum::<f64>();
        }
        out
    }

    /// `A^T(y)`.
    fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut blocks: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (blk, out) in blocks.iter_mut().enumerate() {
            for (i, e) in &self.sparse_rows[blk] {
                for &(r, c, v) in e {
                    out[(r, c)] += y[*i] * v;
                }
            }
            for (i, a) in &self.dense_rows[blk] {
                out.zip_apply(a, |o, v| *o += y[*i] * v);
            }
        }
        let mut lp = DVector::zeros(self.lp_dim);
        for (i, row) in self.lp_rows.iter().enumerate() {
            for &(l, v) in row {
                lp[l] += y[i] * v;
            }
        }
        (blocks, lp)
    }

    /// Schur complement `M_ij = <A_i, X A_j Z^-1>` plus the LP contribution.
    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>], x_lp: &DVector<f64>, z_lp: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m();
        let mut mat = DMatrix::zeros(m, m);
        for blk in 0..self.dims.len() {
            let (xb, zi) = (&x[blk], &zinv[blk]);
            let sparse = &self.sparse_rows[blk];
            let dense = &self.dense_rows[blk];
            for (j, aj) in dense {
                let g = xb * aj * zi;
                for (i, ai) in sparse {
                    let v = ai.iter().map(|&(r, c, w)| w * g[(c, r)]).sum::<f64>();
                    mat[(*i, *j)] += v;
                    mat[(*j, *i)] += v;
                }
                for (i, ai) in dense {
                    mat[(*i, *j)] += ai.dot(&g);
                }
            }
            for (p, (i, ai)) in sparse.iter().enumerate() {
                for (j, aj) in &sparse[p..] {
                    let mut v = 0.0;
                    for &(a, b, wa) in ai {
                        for &(c, d, wc) in aj {
                            v += wa * wc * xb[(b, c)] * zi[(d, a)];
                        }
                    }
                    mat[(*i, *j)] += v;
                    if i != j {
                        mat[(*j, *i)] += v;
                    }
                }
            }
        }
        if self.lp_dim > 0 {
            let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.lp_dim];
            for (i, row) in self.lp_rows.iter().enumerate() {
                for &(l, v) in row {
                    by_var[l].push((i, v));
                }
            }
            for (l, list) in by_var.iter().enumerate() {
                let d = x_lp[l] / z_lp[l];
                for &(i, vi) in list {
                    for &(j, vj) in list {
                        mat[(i, j)] += d * vi * vj;
                    }
                }
            }
        }
        // the two accumulation orders differ by round-off
        sym(mat)
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn inner_all(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Largest `alpha` with `L L^T + alpha * D` PSD, given the Cholesky factor.
fn max_step_psd(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    if d.nrows() == 0 {
        return f64::INFINITY;
    }
    let t = l.solve_lower_triangular(d).expect("cholesky factor is nonsingular");
    let s = l
        .solve_lower_triangular(&t.transpose())
        .expect("cholesky factor is nonsingular");
    let lmin = sym(s).symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn solve_spd(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::new(mat.clone()) {
        return Some(ch.solve(rhs));
    }
    // rank-deficient Schur complement: retry with a small diagonal shift
    let scale = mat.diagonal().amax().max(1.0);
    let shifted = mat + DMatrix::identity(mat.nrows(), mat.ncols()) * (1e-13 * scale);
    Cholesky::new(shifted)
        .map(|ch| ch.solve(rhs))
        .or_else(|| mat.clone().lu().solve(rhs))
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    x_lp: DVector<f64>,
    z_lp: DVector<f64>,
    y: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dx_lp: DVector<f64>,
    dz_lp: DVector<f64>,
    dy: DVector<f64>,
}

pub fn solve_real(problem: &RealSdp, settings: &SdpSettings) -> RealSolution {
    let p = Prepared::new(problem);
    let m = p.m();
    let nb = p.dims.len();
    let total_dim = (p.dims.iter().sum::<usize>() + p.lp_dim).max(1) as f64;

    // scaled-identity starting point
    let mut a_norm_max = 0.0f64;
    let mut ratio_max = 0.0f64;
    for (term, rhs) in &problem.constraints {
        let nrm = term
            .blocks
            .iter()
            .map(|(_, c)| c.frobenius().powi(2))
            .chain(term.lp.iter().map(|(_, v)| v * v))
            .sum::<f64>()
            .sqrt();
        a_norm_max = a_norm_max.max(nrm);
        ratio_max = ratio_max.max((1.0 + rhs.abs()) / (1.0 + nrm));
    }
    let c_norm = (p.c.iter().map(|c| c.norm_squared()).sum::<f64>() + p.c_lp.norm_squared()).sqrt();
    let init = |n: usize| {
        let sn = (n.max(1) as f64).sqrt();
        let xi = 10f64.max(sn).max(sn * ratio_max);
        let eta = 10f64.max(sn).max(a_norm_max).max(c_norm);
        (xi, eta)
    };
    let mut it = Iterate {
        x: p.dims.iter().map(|&n| DMatrix::identity(n, n) * init(n).0).collect(),
        z: p.dims.iter().map(|&n| DMatrix::identity(n, n) * init(n).1).collect(),
        x_lp: DVector::from_element(p.lp_dim, init(1).0),
        z_lp: DVector::from_element(p.lp_dim, init(1).1),
        y: DVector::zeros(m),
    };

    let b_norm = p.b.amax();
    let mut best_merit = f64::INFINITY;
    let mut stalled = 0usize;
    let mut status = SdpStatus::MaxIters;
    let mut iterations = 0usize;
    let mut report = (0.0, 0.0, f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for iter in 0..=settings.max_iters {
        iterations = iter;
        // residuals and objectives at the current point
        let ax = p.apply(&it.x, &it.x_lp);
        let rp = &p.b - &ax;
        let (aty, aty_lp) = p.adjoint(&it.y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &p.c[k] - &it.z[k] - &aty[k]).collect();
        let rd_lp = &p.c_lp - &it.z_lp - &aty_lp;
        let pobj = inner_all(&p.c, &it.x) + p.c_lp.dot(&it.x_lp);
        let dobj = p.b.dot(&it.y);
        let compl = inner_all(&it.x, &it.z) + it.x_lp.dot(&it.z_lp);
        let mu = compl / total_dim;
        let denom = 1.0 + pobj.abs() + dobj.abs();
        let rel_gap = (pobj - dobj).abs().max(compl.abs()) / denom;
        let pinf = rp
            .iter()
            .zip(p.b.iter())
            .map(|(r, b)| r.abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max);
        let rd_norm = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rd_lp.norm_squared()).sqrt();
        let dinf = rd_norm / (1.0 + c_norm);
        report = (pobj, dobj, rel_gap, pinf, dinf);

        if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
            status = SdpStatus::NumericalFailure;
            break;
        }
        if rel_gap <= settings.gap_tol && pinf <= settings.feas_tol && dinf <= settings.feas_tol {
            status = SdpStatus::Optimal;
            break;
        }
        // dual ray: y / b^T y certifies primal infeasibility once C - Rd is negligible
        let c_minus_rd = (0..nb)
            .map(|k| (&aty[k] + &it.z[k]).norm_squared())
            .sum::<f64>()
            + (&aty_lp + &it.z_lp).norm_squared();
        if dobj > 0.0
            && pinf > settings.feas_tol
            && c_minus_rd.sqrt() <= settings.infeasibility_ratio * a_norm_max * it.y.norm()
        {
            status = SdpStatus::Infeasible;
            break;
        }
        let merit = rel_gap.max(pinf).max(dinf);
        if merit < best_merit * 0.999 {
            best_merit = merit;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= settings.stall_iters {
                status = if pinf > settings.feas_tol.max(1e-6 * (1.0 + b_norm)) {
                    SdpStatus::Infeasible
                } else {
                    SdpStatus::MaxIters
                };
                break;
            }
        }
        if iter == settings.max_iters {
            break;
        }

        // factorizations
        let mut chol_x = Vec::with_capacity(nb);
        let mut chol_z = Vec::with_capacity(nb);
        let mut zinv = Vec::with_capacity(nb);
        let mut failed = false;
        for k in 0..nb {
            match (
                Cholesky::<f64, Dyn>::new(it.x[k].clone()),
                Cholesky::<f64, Dyn>::new(it.z[k].clone()),
            ) {
                (Some(cx), Some(cz)) => {
                    zinv.push(sym(cz.inverse()));
                    chol_x.push(cx.l());
                    chol_z.push(cz.l());
                }
                _ => {
                    failed = true;
                    break;
                }
            }
        }
        if failed || it.x_lp.iter().chain(it.z_lp.iter()).any(|&v| !(v > 0.0)) {
            status = SdpStatus::NumericalFailure;
            break;
        }
        let schur = p.schur(&it.x, &zinv, &it.x_lp, &it.z_lp);
        let x_rd_zinv: Vec<DMatrix<f64>> = (0..nb).map(|k| &it.x[k] * &rd[k] * &zinv[k]).collect();
        let x_rd_zinv_lp = it.x_lp.component_mul(&rd_lp).component_div(&it.z_lp);
        let base_rhs = &rp + p.apply(&x_rd_zinv, &x_rd_zinv_lp);

        let solve_dir = |rc: &[DMatrix<f64>], rc_lp: &DVector<f64>| -> Option<Direction> {
            let rhs = &base_rhs - p.apply(rc, rc_lp);
            let dy = solve_spd(&schur, &rhs)?;
            let (at_dy, at_dy_lp) = p.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..nb).map(|k| &rd[k] - &at_dy[k]).collect();
            let dz_lp = &rd_lp - &at_dy_lp;
            let dx: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| &rc[k] - sym(&it.x[k] * &dz[k] * &zinv[k]))
                .collect();
            let dx_lp = rc_lp - it.x_lp.component_mul(&dz_lp).component_div(&it.z_lp);
            Some(Direction {
                dx,
                dz,
                dx_lp,
                dz_lp,
                dy,
            })
        };
        let steps = |d: &Direction| {
            let mut ap = max_step_lp(&it.x_lp, &d.dx_lp);
            let mut ad = max_step_lp(&it.z_lp, &d.dz_lp);
            for k in 0..nb {
                ap = ap.min(max_step_psd(&chol_x[k], &d.dx[k]));
                ad = ad.min(max_step_psd(&chol_z[k], &d.dz[k]));
            }
            (ap, ad)
        };

        // predictor
        let rc_aff: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
        let rc_aff_lp = -&it.x_lp;
        let Some(aff) = solve_dir(&rc_aff, &rc_aff_lp) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (ap_max, ad_max) = steps(&aff);
        let (ap, ad) = (ap_max.min(1.0), ad_max.min(1.0));
        let mu_aff = {
            let xs: Vec<DMatrix<f64>> = (0..nb).map(|k| &it.x[k] + &aff.dx[k] * ap).collect();
            let zs: Vec<DMatrix<f64>> = (0..nb).map(|k| &it.z[k] + &aff.dz[k] * ad).collect();
            let xl = &it.x_lp + &aff.dx_lp * ap;
            let zl = &it.z_lp + &aff.dz_lp * ad;
            (inner_all(&xs, &zs) + xl.dot(&zl)) / total_dim
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector
        let rc: Vec<DMatrix<f64>> = (0..nb)
            .map(|k| &zinv[k] * (sigma * mu) - &it.x[k] - sym(&aff.dx[k] * &aff.dz[k] * &zinv[k]))
            .collect();
        let rc_lp = DVector::from_iterator(
            p.lp_dim,
            (0..p.lp_dim).map(|l| {
                (sigma * mu - aff.dx_lp[l] * aff.dz_lp[l]) / it.z_lp[l] - it.x_lp[l]
            }),
        );
        let Some(dir) = solve_dir(&rc, &rc_lp) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (ap_max, ad_max) = steps(&dir);
        let tau = 0.9 + 0.09 * ap_max.min(ad_max).min(1.0);
        let ap = (tau * ap_max).min(1.0);
        let ad = (tau * ad_max).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) {
            status = SdpStatus::NumericalFailure;
            break;
        }
        for k in 0..nb {
            it.x[k] = sym(&it.x[k] + &dir.dx[k] * ap);
            it.z[k] = sym(&it.z[k] + &dir.dz[k] * ad);
        }
        it.x_lp += &dir.dx_lp * ap;
        it.z_lp += &dir.dz_lp * ad;
        it.y += &dir.dy * ad;
    }

    let (pobj, dobj, rel_gap, pinf, dinf) = report;
    RealSolution {
        x: it.x,
        x_lp: it.x_lp,
        y: -it.y,
        z: it.z,
        z_lp: it.z_lp,
        primal_objective: -pobj,
        dual_objective: -dobj,
        duality_gap: rel_gap,
        primal_residual: pinf,
        dual_residual: dinf,
        status,
        iterations,
    }
}
