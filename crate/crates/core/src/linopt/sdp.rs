//! Small dense semidefinite programs with nonnegative scalar variables.
//!
//! Primal:  min <C, X> + c'x  s.t.  <A_i, X> + a_i'x = b_i,  X psd,  x >= 0.
//! Dual:    max b'y           s.t.  C - sum y_i A_i = S psd,  c - sum y_i a_i = z >= 0.
//!
//! Solved by an infeasible-start primal-dual interior-point method using the
//! HKM search direction with a Mehrotra predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// One equality constraint `<mat, X> + sum coef * x[idx] = rhs`.
#[derive(Clone, Debug)]
pub struct SdpRow {
    pub mat: Option<DMatrix<f64>>,
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub c_mat: DMatrix<f64>,
    pub c_lp: DVector<f64>,
    pub rows: Vec<SdpRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Progress stalled before full accuracy; the iterate is the best seen.
    Inaccurate,
    PrimalInfeasible,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: DMatrix<f64>,
    pub lp: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DMatrix<f64>,
    pub z: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_fraction: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 120,
            step_fraction: 0.98,
        }
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest step `a` in (0, 1] keeping `X + a dX` positive definite, where
/// `chol` factors `X`.
fn psd_step(chol: &Cholesky<f64, nalgebra::Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let t = match l.solve_lower_triangular(dx) {
        Some(t) => t,
        None => return 0.0,
    };
    let m = match l.solve_lower_triangular(&t.transpose()) {
        Some(m) => m,
        None => return 0.0,
    };
    let lambda = SymmetricEigen::new(sym(&m)).eigenvalues.min();
    if lambda >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lambda
    }
}

fn lp_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

impl SdpProblem {
    pub fn dim(&self) -> usize {
        self.c_mat.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>, lp: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| {
                r.mat.as_ref().map_or(0.0, |a| inner(a, x))
                    + r.lp.iter().map(|&(k, c)| c * lp[k]).sum::<f64>()
            }),
        )
    }

    fn adjoint_mat(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            if let Some(a) = &r.mat {
                out += a * yi;
            }
        }
        out
    }

    fn adjoint_lp(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.c_lp.len());
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            for &(k, c) in &r.lp {
                out[k] += c * yi;
            }
        }
        out
    }

    fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.rhs))
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.c_mat.ncols() != n || n == 0 {
            return Err(Error::InvalidInput(
                "objective matrix must be square and nonempty".into(),
            ));
        }
        for r in &self.rows {
            if let Some(a) = &r.mat {
                if a.nrows() != n || a.ncols() != n {
                    return Err(Error::InvalidInput(
                        "constraint matrix has the wrong size".into(),
                    ));
                }
            }
            if r.lp.iter().any(|&(k, _)| k >= self.c_lp.len()) {
                return Err(Error::InvalidInput(
                    "constraint references a missing scalar".into(),
                ));
            }
        }
        Ok(())
    }
}

struct Direction {
    dx: DMatrix<f64>,
    dlp: DVector<f64>,
    dy: DVector<f64>,
    ds: DMatrix<f64>,
    dz: DVector<f64>,
}

/// Solves the program; see the module docs for the form.
pub fn solve(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    problem.validate()?;
    let n = problem.dim();
    let nl = problem.c_lp.len();
    let m = problem.rows.len();
    let b = problem.rhs();
    let scale = 1.0 + b.amax().max(problem.c_mat.amax()).max(problem.c_lp.amax());

    let mut x = DMatrix::identity(n, n) * scale.sqrt();
    let mut lp = DVector::from_element(nl, scale.sqrt());
    let mut y = DVector::zeros(m);
    let mut s = DMatrix::identity(n, n) * scale.sqrt();
    let mut z = DVector::from_element(nl, scale.sqrt());
    let mut status = SdpStatus::Inaccurate;
    let norm_b = 1.0 + b.norm();
    let norm_c = 1.0 + problem.c_mat.norm() + problem.c_lp.norm();
    let mut best: Option<(f64, SdpSolution)> = None;
    let mut iterations = 0;

    let snapshot = |x: &DMatrix<f64>,
                    lp: &DVector<f64>,
                    y: &DVector<f64>,
                    s: &DMatrix<f64>,
                    z: &DVector<f64>,
                    iterations: usize,
                    status: SdpStatus| SdpSolution {
        x: x.clone(),
        lp: lp.clone(),
        y: y.clone(),
        s: s.clone(),
        z: z.clone(),
        primal_objective: inner(&problem.c_mat, x) + problem.c_lp.dot(lp),
        dual_objective: b.dot(y),
        iterations,
        status,
    };

    for it in 0..settings.max_iterations {
        iterations = it;
        let rp = &b - problem.apply(&x, &lp);
        let rd_mat = &problem.c_mat - problem.adjoint_mat(&y) - &s;
        let rd_lp = &problem.c_lp - problem.adjoint_lp(&y) - &z;
        let pobj = inner(&problem.c_mat, &x) + problem.c_lp.dot(&lp);
        let dobj = b.dot(&y);
        let pinf = rp.norm() / norm_b;
        let dinf = (rd_mat.norm() + rd_lp.norm()) / norm_c;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let merit = pinf.max(dinf).max(gap);
        if best.as_ref().is_none_or(|(bm, _)| merit < *bm) {
            best = Some((
                merit,
                snapshot(&x, &lp, &y, &s, &z, it, SdpStatus::Inaccurate),
            ));
        }
        if pinf < settings.tolerance && dinf < settings.tolerance && gap < settings.tolerance {
            status = SdpStatus::Optimal;
            break;
        }
        // Farkas-type certificate: a dual ray with positive objective.
        if dobj > 0.0 && pinf > settings.tolerance.sqrt() {
            let res = rd_mat.norm() + rd_lp.norm();
            if dobj > 1e8 * scale && res / dobj < 1e-7 {
                status = SdpStatus::PrimalInfeasible;
                break;
            }
        }

        let mu = (inner(&x, &s) + lp.dot(&z)) / (n + nl) as f64;
        let s_chol = match Cholesky::new(sym(&s)) {
            Some(c) => c,
            None => break,
        };
        let s_inv = s_chol.inverse();
        let x_chol = match Cholesky::new(sym(&x)) {
            Some(c) => c,
            None => break,
        };

        // Schur complement.
        let ratio = lp.component_div(&z);
        let xas: Vec<Option<DMatrix<f64>>> = problem
            .rows
            .iter()
            .map(|r| r.mat.as_ref().map(|a| &x * a * &s_inv))
            .collect();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let mut v = 0.0;
                if let (Some(ai), Some(xaj)) = (&problem.rows[i].mat, &xas[j]) {
                    v += inner(ai, xaj);
                }
                for &(ki, ci) in &problem.rows[i].lp {
                    for &(kj, cj) in &problem.rows[j].lp {
                        if ki == kj {
                            v += ci * cj * ratio[ki];
                        }
                    }
                }
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let schur = sym(&schur);
        let chol = Cholesky::new(schur.clone());
        let lu = if chol.is_none() {
            Some(schur.clone().lu())
        } else {
            None
        };
        let solve_schur = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
            match (&chol, &lu) {
                (Some(c), _) => Some(c.solve(rhs)),
                (None, Some(l)) => l.solve(rhs),
                _ => None,
            }
        };

        let direction = |k_mat: &DMatrix<f64>, k_lp: &DVector<f64>| -> Option<Direction> {
            // dX = K - sym(X dS S^-1), dS = Rd - A'dy; dx = k - (x/z) dz, dz = rd - a'dy.
            let xrs = &x * &rd_mat * &s_inv;
            let base_mat = k_mat - &xrs;
            let base_lp = k_lp - ratio.component_mul(&rd_lp);
            let rhs = &rp - problem.apply(&base_mat, &base_lp);
            let dy = solve_schur(&rhs)?;
            let ds = &rd_mat - problem.adjoint_mat(&dy);
            let dz = &rd_lp - problem.adjoint_lp(&dy);
            let dx = k_mat - sym(&(&x * &ds * &s_inv));
            let dlp = k_lp - ratio.component_mul(&dz);
            Some(Direction {
                dx,
                dlp,
                dy,
                ds,
                dz,
            })
        };

        // Predictor.
        let k_aff = -&x;
        let kl_aff = -&lp;
        let aff = match direction(&k_aff, &kl_aff) {
            Some(d) => d,
            None => break,
        };
        let ap = psd_step(&x_chol, &aff.dx)
            .min(lp_step(&lp, &aff.dlp))
            .min(1.0);
        let ad = psd_step(&s_chol, &aff.ds)
            .min(lp_step(&z, &aff.dz))
            .min(1.0);
        let mu_aff = (inner(&(&x + &aff.dx * ap), &(&s + &aff.ds * ad))
            + (&lp + &aff.dlp * ap).dot(&(&z + &aff.dz * ad)))
            / (n + nl) as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let k_mat = &s_inv * (sigma * mu) - &x - sym(&(&aff.dx * &aff.ds * &s_inv));
        let k_lp = DVector::from_iterator(
            nl,
            (0..nl).map(|k| (sigma * mu - aff.dlp[k] * aff.dz[k]) / z[k] - lp[k]),
        );
        let d = match direction(&k_mat, &k_lp) {
            Some(d) => d,
            None => break,
        };
        let ap =
            (settings.step_fraction * psd_step(&x_chol, &d.dx).min(lp_step(&lp, &d.dlp))).min(1.0);
        let ad =
            (settings.step_fraction * psd_step(&s_chol, &d.ds).min(lp_step(&z, &d.dz))).min(1.0);
        if !(ap > 1e-14 || ad > 1e-14) {
            break;
        }
        x = sym(&(&x + &d.dx * ap));
        lp += &d.dlp * ap;
        y += &d.dy * ad;
        s = sym(&(&s + &d.ds * ad));
        z += &d.dz * ad;
        iterations = it + 1;
    }

    match status {
        SdpStatus::Optimal | SdpStatus::PrimalInfeasible => {
            Ok(snapshot(&x, &lp, &y, &s, &z, iterations, status))
        }
        SdpStatus::Inaccurate => {
            let (_, mut sol) = best.ok_or_else(|| Error::Internal("no interior iterate".into()))?;
            sol.status = SdpStatus::Inaccurate;
            sol.iterations = iterations;
            Ok(sol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 0.5;
        m[(j, i)] += 0.5;
        m
    }

    #[test]
    fn max_cut_style_problem() {
        // min <C, X> with unit diagonal; C = [[0, 1], [1, 0]] gives X01 = -1.
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = SdpProblem {
            c_mat: c,
            c_lp: DVector::zeros(0),
            rows: vec![
                SdpRow {
                    mat: Some(e(2, 0, 0)),
                    lp: vec![],
                    rhs: 1.0,
                },
                SdpRow {
                    mat: Some(e(2, 1, 1)),
                    lp: vec![],
                    rhs: 1.0,
                },
            ],
        };
        let sol = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective + 2.0).abs() < 1e-7);
        assert!((sol.x[(0, 1)] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixed_lp_part() {
        // min t s.t. t >= X11, X11 >= 2 (via surplus), X00 = 1.
        let p = SdpProblem {
            c_mat: DMatrix::zeros(2, 2),
            c_lp: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            rows: vec![
                SdpRow {
                    mat: Some(e(2, 0, 0)),
                    lp: vec![],
                    rhs: 1.0,
                },
                SdpRow {
                    mat: Some(e(2, 1, 1)),
                    lp: vec![(1, -1.0)],
                    rhs: 2.0,
                },
                SdpRow {
                    mat: Some(e(2, 1, 1) * -1.0),
                    lp: vec![(0, 1.0), (2, -1.0)],
                    rhs: 0.0,
                },
            ],
        };
        let sol = solve(&p, &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(
            (sol.primal_objective - 2.0).abs() < 1e-7,
            "{}",
            sol.primal_objective
        );
        assert!((sol.dual_objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // X00 = 1 and X00 = 2 cannot both hold.
        let p = SdpProblem {
            c_mat: DMatrix::identity(1, 1),
            c_lp: DVector::zeros(0),
            rows: vec![
                SdpRow {
                    mat: Some(e(1, 0, 0)),
                    lp: vec![],
                    rhs: 1.0,
                },
                SdpRow {
                    mat: Some(e(1, 0, 0) * 2.0),
                    lp: vec![],
                    rhs: 3.0,
                },
            ],
        };
        let sol = solve(&p, &SdpSettings::default()).unwrap();
        assert_ne!(sol.status, SdpStatus::Optimal);
    }
}
