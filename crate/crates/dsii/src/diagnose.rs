//! Post-processing: norm extraction, singularity tracing from the decay of
//! Fourier coefficients, blow-up-rate fitting, dynamical-rescaling analysis
//! and long-time decay slopes.

use crate::error::DiagnoseError;
use crate::model::DsParams;
use crate::optimize::{nelder_mead, SimplexOptions};
use crate::spectral::{mean_flow_phi, Field, Grid2D, Repr, Symbol, C64};

/// One row of the time series recorded during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    /// sup norm of psi
    pub linf: f64,
    /// L2 norm of psi
    pub l2: f64,
    /// L2 norm of d_x psi
    pub l2_dx: f64,
    /// L2 norm of d_y psi
    pub l2_dy: f64,
    pub energy: f64,
    /// E(t)/E(0) - 1; NaN while undefined
    pub delta_e: f64,
    /// max |psi_hat| over the outer 10% of x-wavenumbers
    pub tail_x: f64,
    /// max |psi_hat| over the outer 10% of y-wavenumbers
    pub tail_y: f64,
}

/// Time series of norms with strictly increasing `t`.
#[derive(Debug, Clone, Default)]
pub struct NormSeries {
    records: Vec<NormRecord>,
    /// false when E(0) = 0 and the energy drift is undefined
    delta_e_defined: bool,
}

impl NormSeries {
    pub fn new() -> Self {
        Self {
            records: Vec::new(),
            delta_e_defined: true,
        }
    }

    /// Append a record; fills in `delta_e` relative to the first record.
    pub fn push(&mut self, mut record: NormRecord) -> Result<(), DiagnoseError> {
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(DiagnoseError::InvalidInput(format!(
                    "series t must be strictly increasing ({} after {})",
                    record.t, last.t
                )));
            }
        }
        if self.records.is_empty() && record.energy == 0.0 {
            self.delta_e_defined = false;
        }
        record.delta_e = if self.delta_e_defined {
            record.energy / self.records.first().map_or(record.energy, |r| r.energy) - 1.0
        } else {
            f64::NAN
        };
        self.records.push(record);
        Ok(())
    }

    /// Append a record whose `delta_e` is already set (file round trips).
    pub fn push_raw(&mut self, record: NormRecord) -> Result<(), DiagnoseError> {
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(DiagnoseError::InvalidInput(format!(
                    "series t must be strictly increasing ({} after {})",
                    record.t, last.t
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[NormRecord] {
        &self.records
    }
    pub fn len(&self) -> usize {
        self.records.len()
    }
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
    pub fn delta_e_defined(&self) -> bool {
        self.delta_e_defined
    }

    /// Pointwise accuracy indicator `E(t)/E(0) - 1`.
    pub fn delta_e(&self) -> Result<Vec<f64>, DiagnoseError> {
        if !self.delta_e_defined {
            return Err(DiagnoseError::InvalidInput(
                "delta_E undefined: E(0) = 0".into(),
            ));
        }
        Ok(self.records.iter().map(|r| r.delta_e).collect())
    }
}

/// Cached symbols for repeated norm extraction on one grid.
///
/// Derivative norms, the L2 norm and the gradient part of the energy are
/// evaluated through Parseval's identity in spectral space; only the sup norm
/// and the potential terms need physical-space values.
pub struct NormComputer {
    grid: Grid2D,
    params: DsParams,
    /// xi_1^2 - xi_2^2 per mode (gradient part of the energy)
    hyper: Vec<f64>,
    xi1_sq: Vec<f64>,
    xi2_sq: Vec<f64>,
    tail_mask_x: Vec<bool>,
    tail_mask_y: Vec<bool>,
}

impl NormComputer {
    pub fn new(grid: Grid2D, params: DsParams) -> Self {
        let n = grid.len();
        let mut hyper = Vec::with_capacity(n);
        let mut xi1_sq = Vec::with_capacity(n);
        let mut xi2_sq = Vec::with_capacity(n);
        let mut tail_mask_x = Vec::with_capacity(n);
        let mut tail_mask_y = Vec::with_capacity(n);
        let cut_x = (grid.n_x() / 2) as f64 * 0.9 * std::f64::consts::PI / grid.halfwidth_x();
        let cut_y = (grid.n_y() / 2) as f64 * 0.9 * std::f64::consts::PI / grid.halfwidth_y();
        for k_y in 0..grid.n_y() {
            let xi2 = grid.xi2(k_y);
            for k_x in 0..grid.n_x() {
                let xi1 = grid.xi1(k_x);
                hyper.push(xi1 * xi1 - xi2 * xi2);
                xi1_sq.push(xi1 * xi1);
                xi2_sq.push(xi2 * xi2);
                tail_mask_x.push(xi1.abs() >= cut_x);
                tail_mask_y.push(xi2.abs() >= cut_y);
            }
        }
        Self {
            grid,
            params,
            hyper,
            xi1_sq,
            xi2_sq,
            tail_mask_x,
            tail_mask_y,
        }
    }

    /// Full norm record for a spectral state at time `t`.
    pub fn record(&self, t: f64, psi_hat: &Field) -> Result<NormRecord, DiagnoseError> {
        if psi_hat.repr() != Repr::Spectral || psi_hat.grid() != self.grid {
            return Err(DiagnoseError::InvalidInput(
                "norms need a spectral field on the computer's grid".into(),
            ));
        }
        let g = self.grid;
        let area = 4.0 * g.halfwidth_x() * g.halfwidth_y();

        let mut l2_sq = 0.0;
        let mut dx_sq = 0.0;
        let mut dy_sq = 0.0;
        let mut grad = 0.0;
        let mut tail_x: f64 = 0.0;
        let mut tail_y: f64 = 0.0;
        for (i, v) in psi_hat.values().iter().enumerate() {
            let p = v.norm_sqr();
            l2_sq += p;
            dx_sq += self.xi1_sq[i] * p;
            dy_sq += self.xi2_sq[i] * p;
            grad += self.hyper[i] * p;
            if self.tail_mask_x[i] {
                tail_x = tail_x.max(p);
            }
            if self.tail_mask_y[i] {
                tail_y = tail_y.max(p);
            }
        }

        let psi = psi_hat.to_physical()?;
        let mut dens = psi.clone();
        for v in dens.values_mut() {
            *v = C64::new(v.norm_sqr(), 0.0);
        }
        let phi = mean_flow_phi(&dens)?;
        let pot: f64 = dens
            .values()
            .iter()
            .zip(phi.values())
            .map(|(d, p)| (d.re + self.params.beta * p.re) * d.re)
            .sum();
        let eps2 = self.params.epsilon * self.params.epsilon;
        let energy = eps2 * grad * area - self.params.rho * pot * g.cell();

        Ok(NormRecord {
            t,
            linf: psi.norm_linf(),
            l2: (l2_sq * area).sqrt(),
            l2_dx: (dx_sq * area).sqrt(),
            l2_dy: (dy_sq * area).sqrt(),
            energy,
            delta_e: f64::NAN,
            tail_x: tail_x.sqrt(),
            tail_y: tail_y.sqrt(),
        })
    }
}

/// One-shot norm record (builds the cached symbols each call).
pub fn norms(psi_hat: &Field, params: DsParams, t: f64) -> Result<NormRecord, DiagnoseError> {
    NormComputer::new(psi_hat.grid(), params).record(t, psi_hat)
}

/// Axis selector for singularity tracing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            other => Err(format!("axis must be x or y, got '{other}'")),
        }
    }
}

/// Fit of `ln |psi_hat(k)| ~ c0 - (mu + 1) ln k - delta k` along one axis.
///
/// `delta` estimates the distance of the nearest complex singularity to the
/// real axis; it becomes indistinguishable from 0 below the grid's minimal
/// resolved distance `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityFit {
    pub delta: f64,
    pub mu: f64,
    pub c0: f64,
    /// physical wavenumber range used for the fit
    pub k_window: (f64, f64),
    pub modes_used: usize,
    /// root-mean-square residual of the log fit
    pub residual: f64,
}

const SINGULARITY_MIN_MODES: usize = 8;

/// Trace the nearest complex singularity from the coefficient decay along the
/// positive half-axis (other index held at 0).
///
/// The fit window keeps modes with index above 10 and amplitude within
/// `[100 * floor, 1e-2 * max]`, where `floor` is the spectral floor of the
/// trace (its smallest positive amplitude, at least `eps * max`). Amplitudes
/// within two decades of the floor sit on the round-off or domain-truncation
/// plateau, where the asymptotic decay law is meaningless.
pub fn fit_singularity(psi_hat: &Field, axis: Axis) -> Result<SingularityFit, DiagnoseError> {
    if psi_hat.repr() != Repr::Spectral {
        return Err(DiagnoseError::InvalidInput(
            "singularity fit needs a spectral field".into(),
        ));
    }
    let g = psi_hat.grid();
    let (n_half, wavenumber): (usize, Box<dyn Fn(usize) -> f64>) = match axis {
        Axis::X => (g.n_x() / 2, Box::new(move |k| g.xi1(k))),
        Axis::Y => (g.n_y() / 2, Box::new(move |k| g.xi2(k))),
    };
    let amp = |k: usize| -> f64 {
        match axis {
            Axis::X => psi_hat.values()[g.index(k, 0)].norm(),
            Axis::Y => psi_hat.values()[g.index(0, k)].norm(),
        }
    };
    let max_amp = (1..n_half).map(amp).fold(0.0_f64, f64::max);
    if max_amp == 0.0 {
        return Err(DiagnoseError::InvalidInput(
            "zero field has no coefficient decay".into(),
        ));
    }
    let min_positive = (1..n_half)
        .map(amp)
        .filter(|a| *a > 0.0)
        .fold(f64::INFINITY, f64::min);
    // The floor sits two decades above the round-off/truncation plateau so
    // the plateau cannot contaminate the fit, but is capped a decade below
    // the window top: when the physical tail rises toward the cap (a nearly
    // flat spectrum close to a singularity or to the resolution limit) the
    // window must shrink to the top decade instead of vanishing, so the fit
    // keeps reporting the (then tiny) decay rate and the proximity stop can
    // still fire.
    let cap = 1e-2 * max_amp;
    let floor = (100.0 * min_positive.max(f64::EPSILON * max_amp)).min(0.1 * cap);

    let mut ks = Vec::new();
    let mut ys = Vec::new();
    for k in 11..n_half {
        let a = amp(k);
        if a >= floor && a <= cap {
            ks.push(wavenumber(k));
            ys.push(a.ln());
        }
    }
    if ks.len() < SINGULARITY_MIN_MODES {
        return Err(DiagnoseError::WindowTooSmall {
            got: ks.len(),
            need: SINGULARITY_MIN_MODES,
        });
    }

    // linear least squares in (c0, mu+1, delta): y = c0 - (mu+1) ln k - delta k
    let mut ata = [[0.0_f64; 3]; 3];
    let mut atb = [0.0_f64; 3];
    for (k, y) in ks.iter().zip(&ys) {
        let row = [1.0, -k.ln(), -k];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let sol = solve3(ata, atb).ok_or_else(|| {
        DiagnoseError::InvalidInput("degenerate singularity-fit system".into())
    })?;
    let (c0, mu_plus_1, delta) = (sol[0], sol[1], sol[2]);

    let mut ss = 0.0;
    for (k, y) in ks.iter().zip(&ys) {
        let r = y - (c0 - mu_plus_1 * k.ln() - delta * k);
        ss += r * r;
    }
    Ok(SingularityFit {
        delta: delta.max(0.0),
        mu: mu_plus_1 - 1.0,
        c0,
        k_window: (ks[0], *ks.last().unwrap()),
        modes_used: ks.len(),
        residual: (ss / ks.len() as f64).sqrt(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Which norm the blow-up fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitQuantity {
    /// `ln(|psi_x|_2^2)`, normalized to 1 at the first series record.
    LnL2DxSq,
    /// `ln |psi|_inf`.
    LnLinf,
}

impl std::str::FromStr for FitQuantity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l2dx2" | "l2-dx-squared" => Ok(FitQuantity::LnL2DxSq),
            "linf" => Ok(FitQuantity::LnLinf),
            other => Err(format!("unknown fit quantity '{other}' (l2dx2|linf)")),
        }
    }
}

/// Blow-up model fitted to the diverging quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupModel {
    /// `kappa1 ln(t* - t) + kappa2`
    Plain,
    /// `kappa1 (ln(t* - t) - ln ln |ln(t* - t)|) + kappa2`
    LogLog,
}

impl std::str::FromStr for BlowupModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plain" => Ok(BlowupModel::Plain),
            "loglog" | "log-log" => Ok(BlowupModel::LogLog),
            other => Err(format!("unknown blow-up model '{other}' (plain|loglog)")),
        }
    }
}

impl std::fmt::Display for BlowupModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlowupModel::Plain => write!(f, "plain"),
            BlowupModel::LogLog => write!(f, "loglog"),
        }
    }
}

fn blowup_basis(model: BlowupModel, t_star: f64, t: f64) -> f64 {
    let l = (t_star - t).ln();
    match model {
        BlowupModel::Plain => l,
        BlowupModel::LogLog => l - l.abs().ln().ln(),
    }
}

/// Fitted blow-up parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupFit {
    pub t_star: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub model: BlowupModel,
    /// number of trailing records fitted
    pub window: usize,
    /// fitting error: root-sum-of-squares of the log residuals
    pub delta2: f64,
    pub converged: bool,
}

/// Fit `(t*, kappa1, kappa2)` to raw `(t, y)` samples by least squares over
/// the simplex optimizer; `t*` is kept above the last sample through the
/// parameterization `t* = t_last + exp(s)`.
pub fn fit_blowup_values(
    ts: &[f64],
    ys: &[f64],
    model: BlowupModel,
) -> Result<BlowupFit, DiagnoseError> {
    if ts.len() != ys.len() || ts.len() < 3 {
        return Err(DiagnoseError::WindowTooSmall {
            got: ts.len(),
            need: 3,
        });
    }
    let t_last = *ts.last().unwrap();
    let dt = t_last - ts[ts.len() - 2];
    if !(dt > 0.0) {
        return Err(DiagnoseError::InvalidInput("t not increasing".into()));
    }

    let objective = |p: &[f64]| -> f64 {
        let t_star = t_last + p[0].exp();
        let (k1, k2) = (p[1], p[2]);
        let mut ss = 0.0;
        for (t, y) in ts.iter().zip(ys) {
            let r = y - (k1 * blowup_basis(model, t_star, *t) + k2);
            ss += r * r;
        }
        ss
    };

    // initial point: t* = t_last + 2 dt, kappa1 = -1, kappa2 from the
    // one-parameter closed-form least squares at that (t*, kappa1)
    let s0 = (2.0 * dt).ln();
    let k1_0 = -1.0;
    let k2_0 = {
        let t_star = t_last + 2.0 * dt;
        let mut acc = 0.0;
        for (t, y) in ts.iter().zip(ys) {
            acc += y - k1_0 * blowup_basis(model, t_star, *t);
        }
        acc / ts.len() as f64
    };
    let opts = SimplexOptions {
        tol_x: 1e-12,
        tol_f: 1e-14,
        max_evaluations: 40_000,
        ..Default::default()
    };
    let result = nelder_mead(objective, &[s0, k1_0, k2_0], opts)
        .map_err(|e| DiagnoseError::InvalidInput(e.to_string()))?;

    Ok(BlowupFit {
        t_star: t_last + result.x_min[0].exp(),
        kappa1: result.x_min[1],
        kappa2: result.x_min[2],
        model,
        window: ts.len(),
        delta2: result.f_min.max(0.0).sqrt(),
        converged: result.converged,
    })
}

/// Fit the blow-up model to the last `window` records of a series.
pub fn fit_blowup(
    series: &NormSeries,
    quantity: FitQuantity,
    model: BlowupModel,
    window: usize,
) -> Result<BlowupFit, DiagnoseError> {
    if window > series.len() {
        return Err(DiagnoseError::InvalidInput(format!(
            "window {window} exceeds series length {}",
            series.len()
        )));
    }
    if window < 3 {
        return Err(DiagnoseError::WindowTooSmall { got: window, need: 3 });
    }
    let records = &series.records()[series.len() - window..];
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = match quantity {
        FitQuantity::LnL2DxSq => {
            let norm0 = series.records()[0].l2_dx;
            if !(norm0 > 0.0) {
                return Err(DiagnoseError::InvalidInput(
                    "cannot normalize: |psi_x|_2 vanishes at t = 0".into(),
                ));
            }
            records
                .iter()
                .map(|r| ((r.l2_dx / norm0).powi(2)).ln())
                .collect()
        }
        FitQuantity::LnLinf => records.iter().map(|r| r.linf.ln()).collect(),
    };
    fit_blowup_values(&ts, &ys, model)
}

/// Plain vs log-log fitting errors over the same trailing window.
pub fn compare_loglog(
    series: &NormSeries,
    quantity: FitQuantity,
    window: usize,
) -> Result<(BlowupFit, BlowupFit), DiagnoseError> {
    let plain = fit_blowup(series, quantity, BlowupModel::Plain, window)?;
    let loglog = fit_blowup(series, quantity, BlowupModel::LogLog, window)?;
    Ok((plain, loglog))
}

/// Scale factor, rescaled time and `a = d ln L / d tau` along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleRecord {
    pub t: f64,
    pub l: f64,
    pub tau: f64,
    /// finite-difference route: d ln L / d tau
    pub a_fd: f64,
}

/// Rescaled snapshot with the integral-formula value of `a(tau)`.
#[derive(Debug, Clone)]
pub struct RescaleSnapshot {
    pub t: f64,
    pub l: f64,
    pub tau: f64,
    /// integral route for `a(tau)` evaluated on the rescaled field
    pub a_integral: f64,
    /// `Psi(X, Y) = L psi(L X, L Y)` on the grid with halfwidths `h/L`
    pub psi_rescaled: Field,
}

#[derive(Debug, Clone, Default)]
pub struct RescaleSeries {
    pub records: Vec<RescaleRecord>,
    pub snapshots: Vec<RescaleSnapshot>,
}

/// Dynamical-rescaling post-processing.
///
/// `L(t) = |psi_x(0)|_2 / |psi_x(t)|_2` (so `L(0) = 1` and `|Psi_X|_2` stays
/// constant), `tau = int_0^t dt'/L^2` by the trapezoid rule, and `a` both by
/// finite differences of `ln L` in `tau` and by the integral formula on the
/// rescaled field (with the mean flow recomputed from `|Psi|^2`).
pub fn rescale_series(
    snapshots: &[(f64, Field)],
    series: &NormSeries,
    params: DsParams,
) -> Result<RescaleSeries, DiagnoseError> {
    if series.is_empty() {
        return Err(DiagnoseError::InvalidInput("empty series".into()));
    }
    let dx0 = series.records()[0].l2_dx;
    if !(dx0 > 0.0) {
        return Err(DiagnoseError::InvalidInput(
            "|psi_x|_2 vanishes on the first record".into(),
        ));
    }

    let n = series.len();
    let mut ls = Vec::with_capacity(n);
    for r in series.records() {
        if !(r.l2_dx > 0.0) {
            return Err(DiagnoseError::InvalidInput(format!(
                "|psi_x|_2 vanishes at t = {}",
                r.t
            )));
        }
        ls.push(dx0 / r.l2_dx);
    }
    let mut taus = vec![0.0; n];
    for i in 1..n {
        let dt = series.records()[i].t - series.records()[i - 1].t;
        taus[i] = taus[i - 1] + 0.5 * dt * (1.0 / (ls[i] * ls[i]) + 1.0 / (ls[i - 1] * ls[i - 1]));
    }

    let a_fd_at = |i: usize| -> f64 {
        let (lo, hi) = match i {
            0 => (0, 1),
            i if i == n - 1 => (n - 2, n - 1),
            i => (i - 1, i + 1),
        };
        if taus[hi] == taus[lo] {
            0.0
        } else {
            (ls[hi].ln() - ls[lo].ln()) / (taus[hi] - taus[lo])
        }
    };

    let mut records = Vec::with_capacity(n);
    for (i, r) in series.records().iter().enumerate() {
        records.push(RescaleRecord {
            t: r.t,
            l: ls[i],
            tau: taus[i],
            a_fd: a_fd_at(i),
        });
    }

    let mut out_snaps = Vec::with_capacity(snapshots.len());
    for (t, field) in snapshots {
        // nearest series record supplies L and tau
        let i = series
            .records()
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        let l = ls[i];
        let phys = match field.repr() {
            Repr::Physical => field.clone(),
            Repr::Spectral => field.to_physical()?,
        };
        let g = phys.grid();
        // Psi(X,Y) = L psi(L X, L Y): the nodes X_j = x_j / L carry the
        // original samples, so the rescaled field lives on the stretched grid
        // with halfwidths h/L and values L psi.
        let grid_resc = Grid2D::new(
            g.n_x(),
            g.n_y(),
            g.halfwidth_x() / l,
            g.halfwidth_y() / l,
        )?;
        let values = phys.values().iter().map(|v| v * l).collect();
        let psi_rescaled = Field::new(grid_resc, Repr::Physical, values)?;
        let a_integral = rescale_a_integral(&psi_rescaled, params)?;
        out_snaps.push(RescaleSnapshot {
            t: *t,
            l,
            tau: taus[i],
            a_integral,
            psi_rescaled,
        });
    }

    Ok(RescaleSeries {
        records,
        snapshots: out_snaps,
    })
}

/// Integral formula
/// `a = 2/(eps |Psi_X|_2^2) int (beta Phi + |Psi|^2) Im(Psi conj(Psi_XX)) dX dY`
/// (the orientation of the imaginary part is fixed so the result matches
/// `d ln L / d tau` from finite differences on resolved runs).
pub fn rescale_a_integral(psi: &Field, params: DsParams) -> Result<f64, DiagnoseError> {
    let g = psi.grid();
    let (phys, hat) = match psi.repr() {
        Repr::Physical => (psi.clone(), psi.to_spectral()?),
        Repr::Spectral => (psi.to_physical()?, psi.clone()),
    };
    let dxx: Symbol = g.symbol(|xi1, _| C64::new(-xi1 * xi1, 0.0));
    let psi_xx = hat.apply_symbol(&dxx)?.to_physical()?;
    let mut dens = phys.clone();
    for v in dens.values_mut() {
        *v = C64::new(v.norm_sqr(), 0.0);
    }
    let phi = mean_flow_phi(&dens)?;
    let mut integral = 0.0;
    for i in 0..g.len() {
        let w = params.beta * phi.values()[i].re + dens.values()[i].re;
        integral += w * (phys.values()[i] * psi_xx.values()[i].conj()).im;
    }
    integral *= g.cell();
    let dx_sq: f64 = {
        let area = 4.0 * g.halfwidth_x() * g.halfwidth_y();
        hat.values()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let xi1 = g.xi1(i % g.n_x());
                xi1 * xi1 * v.norm_sqr()
            })
            .sum::<f64>()
            * area
    };
    if !(dx_sq > 0.0) {
        return Err(DiagnoseError::InvalidInput(
            "|Psi_X|_2 vanishes in the rescaled field".into(),
        ));
    }
    Ok(2.0 / (params.epsilon * dx_sq) * integral)
}

/// Least-squares slope of `ln |psi|_inf` against `ln t` over `[t_min, t_max]`.
pub fn decay_slope(series: &NormSeries, t_min: f64, t_max: f64) -> Result<f64, DiagnoseError> {
    if !(t_min < t_max) {
        return Err(DiagnoseError::InvalidInput("t_min must be < t_max".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in series.records() {
        if r.t >= t_min && r.t <= t_max {
            if !(r.t > 0.0 && r.linf > 0.0) {
                return Err(DiagnoseError::InvalidInput(
                    "decay slope needs positive t and norms".into(),
                ));
            }
            xs.push(r.t.ln());
            ys.push(r.linf.ln());
        }
    }
    if xs.len() < 2 {
        return Err(DiagnoseError::WindowTooSmall { got: xs.len(), need: 2 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(DiagnoseError::InvalidInput("degenerate t window".into()));
    }
    Ok(num / den)
}

/// Least-squares slope of `ln L` against `ln(t* - t)` over the trailing
/// records with `t* - t` inside `[span_lo, span_hi]`.
pub fn rescale_loglog_slope(
    rescale: &RescaleSeries,
    t_star: f64,
    span_lo: f64,
    span_hi: f64,
) -> Result<f64, DiagnoseError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &rescale.records {
        let span = t_star - r.t;
        if span >= span_lo && span <= span_hi && span > 0.0 && r.l > 0.0 {
            xs.push(span.ln());
            ys.push(r.l.ln());
        }
    }
    if xs.len() < 2 {
        return Err(DiagnoseError::WindowTooSmall { got: xs.len(), need: 2 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    Ok(num / den)
}
