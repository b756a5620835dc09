//! Min-max relay power for a weighted SNR target, with the rank-one
//! requirement handled by a trace-minus-largest-eigenvalue penalty.
//!
//! The semidefinite variable is the reduced outer product `x x'` with
//! `x = [1, w_v]`, rescaled as `X = K Xs K` with `K = diag(1, k_1, ...)`
//! where `k_b` is the gain that alone would drive relay `b` to `P_max`.
//! Powers are expressed as fractions of `P_max`. The penalty acts on `Xs`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::sdp::{self, SdpProblem, SdpRow, SdpSettings, SdpStatus};
use super::subproblem::SubproblemData;
use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct PenaltySettings {
    /// Initial penalty; doubled before the first solve.
    pub mu_start: f64,
    pub mu_cap: f64,
    /// Largest accepted `lambda_2 / lambda_1`.
    pub rank_tolerance: f64,
    /// Largest accepted deviation of the pinned coordinate from one.
    pub lead_tolerance: f64,
    /// Relative objective change ending the linearization loop.
    pub inner_tolerance: f64,
    pub inner_max: usize,
    /// Cost of violating an SNR constraint (in units of `P_max`).
    pub elastic_weight: f64,
    /// Elastic slack above which the target counts as unreachable.
    pub elastic_tolerance: f64,
    pub sdp: SdpSettings,
}

impl Default for PenaltySettings {
    fn default() -> Self {
        Self {
            mu_start: 0.25,
            mu_cap: 0.25 * 1024.0,
            rank_tolerance: 1e-4,
            lead_tolerance: 1e-3,
            inner_tolerance: 1e-6,
            inner_max: 50,
            elastic_weight: 1e4,
            elastic_tolerance: 1e-7,
            sdp: SdpSettings::default(),
        }
    }
}

/// The weighted-SNR target of one evaluation.
#[derive(Clone, Debug)]
pub struct Target<'a> {
    pub eta: f64,
    pub zeta: &'a [f64],
    pub p_max: f64,
}

/// Variable scaling for one layer.
#[derive(Clone, Debug)]
pub struct Scaling {
    pub k: DVector<f64>,
}

impl Scaling {
    pub fn new(data: &SubproblemData, p_max: f64) -> Self {
        let n = data.dim();
        let mut k = DVector::from_element(n, 1.0);
        for b in 1..n {
            let a = data.power[data.first_relay + b - 1][(b, b)];
            k[b] = (p_max / (data.sigma2 * a)).sqrt();
        }
        Self { k }
    }

    fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for r in 0..out.nrows() {
            for c in 0..out.ncols() {
                out[(r, c)] *= self.k[r] * self.k[c];
            }
        }
        out
    }

    /// Scaled coordinates of the reduced vector `[1, gains]`.
    pub fn scaled_point(&self, gains: &[f64]) -> DVector<f64> {
        let mut x = DVector::from_element(self.k.len(), 1.0);
        for (b, &g) in gains.iter().enumerate() {
            x[1 + b] = g / self.k[1 + b];
        }
        x
    }

    pub fn unscale(&self, xs: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply(xs)
    }
}

/// Result of one linearized penalty solve.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    /// Solution in scaled coordinates.
    pub x_scaled: DMatrix<f64>,
    /// Solution in reduced (unscaled) coordinates.
    pub x: DMatrix<f64>,
    /// Linearized objective (fraction of `P_max`).
    pub objective: f64,
    pub status: SdpStatus,
}

fn power_rows(data: &SubproblemData, scaling: &Scaling, p_max: f64) -> Vec<(DMatrix<f64>, f64)> {
    let f = data.sigma2 / p_max;
    data.power
        .iter()
        .zip(&data.power_rest)
        .map(|(a, &rest)| (scaling.apply(a) * f, rest * f))
        .collect()
}

/// Largest relay power over `P_max` for a scaled matrix variable.
fn scaled_max_power(rows: &[(DMatrix<f64>, f64)], xs: &DMatrix<f64>) -> f64 {
    rows.iter()
        .map(|(a, c)| a.dot(xs) + c)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Penalized objective `max power + mu (Tr X - lambda_max X)` in scaled units.
pub fn penalized_objective(
    data: &SubproblemData,
    scaling: &Scaling,
    p_max: f64,
    mu: f64,
    xs: &DMatrix<f64>,
) -> f64 {
    let rows = power_rows(data, scaling, p_max);
    let eig = SymmetricEigen::new(xs.clone());
    scaled_max_power(&rows, xs) + mu * (xs.trace() - eig.eigenvalues.max())
}

/// One convex solve: linearizes `lambda_max` at the unit vector `w_max`
/// (scaled coordinates) and minimizes the penalized max power subject to
/// the weighted SNR targets, `X psd` and a unit pinned coordinate.
pub fn solve_inner(
    data: &SubproblemData,
    target: &Target<'_>,
    scaling: &Scaling,
    mu: f64,
    w_max: &DVector<f64>,
    settings: &PenaltySettings,
) -> Result<InnerSolution> {
    let n = data.dim();
    let receivers = data.receivers();
    check_len("weights", receivers, target.zeta.len())?;
    check_len("linearization vector", n, w_max.len())?;
    let rows_pow = power_rows(data, scaling, target.p_max);
    let constrain_snr = target.eta > 0.0;
    let snr_rows = if constrain_snr { receivers } else { 0 };
    // Scalars: t, then (surplus, elastic) per SNR row, then a slack per relay.
    let nl = 1 + 2 * snr_rows + rows_pow.len();
    let mut c_lp = DVector::zeros(nl);
    c_lp[0] = 1.0;
    for m in 0..snr_rows {
        c_lp[2 + 2 * m] = settings.elastic_weight;
    }
    let c_mat = (DMatrix::identity(n, n) - w_max * w_max.transpose()) * mu;
    let mut rows = Vec::with_capacity(1 + snr_rows + rows_pow.len());
    let mut pin = DMatrix::zeros(n, n);
    pin[(0, 0)] = 1.0;
    rows.push(SdpRow {
        mat: Some(pin),
        lp: vec![],
        rhs: 1.0,
    });
    for m in 0..snr_rows {
        let rhs = target.eta * (1.0 + data.noise_rest[m]);
        let form = scaling.apply(&data.weighted_snr_form(m, target.eta, target.zeta[m])) / rhs;
        rows.push(SdpRow {
            mat: Some(form),
            lp: vec![(1 + 2 * m, -1.0), (2 + 2 * m, 1.0)],
            rhs: 1.0,
        });
    }
    for (j, (a, c)) in rows_pow.iter().enumerate() {
        rows.push(SdpRow {
            mat: Some(a.clone()),
            lp: vec![(0, -1.0), (1 + 2 * snr_rows + j, 1.0)],
            rhs: -c,
        });
    }
    let problem = SdpProblem { c_mat, c_lp, rows };
    let sol = sdp::solve(&problem, &settings.sdp)?;
    if sol.status == SdpStatus::PrimalInfeasible {
        return Err(Error::Infeasible(
            "weighted SNR target is unreachable".into(),
        ));
    }
    let elastic = (0..snr_rows).map(|m| sol.lp[2 + 2 * m]).fold(0.0, f64::max);
    if elastic > settings.elastic_tolerance {
        return Err(Error::Infeasible(format!(
            "weighted SNR target is unreachable (shortfall {elastic:.3e})"
        )));
    }
    let objective = sol.lp[0] + mu * (sol.x.trace() - w_max.dot(&(&sol.x * w_max)));
    Ok(InnerSolution {
        x: scaling.unscale(&sol.x),
        x_scaled: sol.x,
        objective,
        status: sol.status,
    })
}

/// Outcome of evaluating the min-max power for one target.
#[derive(Clone, Debug)]
pub struct PvResult {
    /// Largest relay power of the extracted rank-one gains.
    pub power: f64,
    pub gains: Vec<f64>,
    /// Weighted SNRs of the extracted gains.
    pub snr: Vec<f64>,
    pub rank_ratio: f64,
    /// Final matrix variable, reduced (unscaled) coordinates.
    pub x: DMatrix<f64>,
    /// Penalized objective after every solve, one list per penalty value.
    pub history: Vec<(f64, Vec<f64>)>,
    /// The rank-one test failed at the largest penalty.
    pub degraded: bool,
    pub solves: usize,
}

fn leading_pair(xs: &DMatrix<f64>) -> (f64, f64, DVector<f64>) {
    let eig = SymmetricEigen::new(xs.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[idx[0]];
    let l2 = idx.get(1).map_or(0.0, |&i| eig.eigenvalues[i]);
    (l1, l2, eig.eigenvectors.column(idx[0]).into_owned())
}

/// Minimizes the largest relay power over the gains of one layer subject to
/// `zeta_m SNR_m >= eta`, starting from `start` (the last known gains).
pub fn evaluate_pv(
    data: &SubproblemData,
    target: &Target<'_>,
    start: &[f64],
    settings: &PenaltySettings,
) -> Result<PvResult> {
    check_len("layer gains", data.layer_size(), start.len())?;
    let scaling = Scaling::new(data, target.p_max);
    let x0 = scaling.scaled_point(start);
    let mut xs = &x0 * x0.transpose();
    let mut mu = settings.mu_start;
    let mut history = Vec::new();
    let mut solves = 0;
    let mut degraded = false;
    loop {
        mu *= 2.0;
        let mut round = Vec::new();
        if solves > 0 {
            round.push(penalized_objective(data, &scaling, target.p_max, mu, &xs));
        }
        let mut previous: Option<f64> = None;
        for _ in 0..settings.inner_max {
            let (_, _, u) = leading_pair(&xs);
            let sol = solve_inner(data, target, &scaling, mu, &u, settings)?;
            solves += 1;
            xs = sol.x_scaled;
            let value = penalized_objective(data, &scaling, target.p_max, mu, &xs);
            round.push(value);
            if let Some(p) = previous {
                if (p - value).abs() <= settings.inner_tolerance * p.abs().max(1e-12) {
                    break;
                }
            }
            previous = Some(value);
        }
        history.push((mu, round));
        let (l1, l2, u) = leading_pair(&xs);
        let lead = l1.max(0.0).sqrt() * u[0].abs();
        let rank_one = l1 > 0.0
            && l2.max(0.0) <= settings.rank_tolerance * l1
            && (lead - 1.0).abs() <= settings.lead_tolerance;
        if rank_one {
            break;
        }
        if mu >= settings.mu_cap {
            degraded = true;
            break;
        }
    }
    let (l1, l2, u) = leading_pair(&xs);
    let vec_scaled = u * l1.max(0.0).sqrt();
    if vec_scaled[0].abs() < 1e-12 {
        return Err(Error::Internal(
            "rank-one factor lost its pinned coordinate".into(),
        ));
    }
    let gains: Vec<f64> = (1..data.dim())
        .map(|b| scaling.k[b] * vec_scaled[b] / vec_scaled[0])
        .collect();
    let power = data.powers_for(&gains)?.into_iter().fold(0.0, f64::max);
    let snr = data
        .snrs_for(&gains)?
        .into_iter()
        .zip(target.zeta)
        .map(|(s, z)| s * z)
        .collect();
    Ok(PvResult {
        power,
        gains,
        snr,
        rank_ratio: if l1 > 0.0 {
            l2.max(0.0) / l1
        } else {
            f64::INFINITY
        },
        x: scaling.unscale(&xs),
        history,
        degraded,
        solves,
    })
}
