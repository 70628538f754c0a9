//! Time stepping of the Fourier-space system `psi_hat' = L psi_hat + N(psi)`
//! and the monitored run loop with stop criteria.
//!
//! Two fixed-step schemes are provided: a fourth-order integrating-factor
//! Runge-Kutta method (the diagonal linear part is propagated exactly) and a
//! composite Runge-Kutta method that treats the nonlinearity with classical
//! explicit RK4 and the high-wavenumber linear modes with an A-stable
//! third-order diagonally implicit scheme on the same stage abscissae.

use crate::diagnose::{fit_singularity, Axis, NormComputer, NormSeries};
use crate::error::IntegrateError;
use crate::model::{DsOperator, DsParams, State};
use crate::spectral::{DealiasRule, Field, Grid2D, Repr, C64};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Ifrk4,
    CrkDriscoll,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ifrk4" => Ok(Scheme::Ifrk4),
            "crk-driscoll" | "crk" => Ok(Scheme::CrkDriscoll),
            other => Err(format!("unknown scheme '{other}' (ifrk4|crk-driscoll)")),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Ifrk4 => write!(f, "ifrk4"),
            Scheme::CrkDriscoll => write!(f, "crk-driscoll"),
        }
    }
}

/// Partition of modes into explicitly and stiffly treated sets for the
/// composite scheme.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CrkCutoff {
    /// Modes with `|L| dt > 1` are treated stiffly.
    #[default]
    Auto,
    /// Modes with `|L| >= fraction * max|L|` are treated stiffly;
    /// 0 treats every mode stiffly.
    Fraction(f64),
}

/// Stepper parameters shared by both schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub dealias: DealiasRule,
    pub crk_cutoff: CrkCutoff,
}

impl StepperConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            dealias: DealiasRule::None,
            crk_cutoff: CrkCutoff::Auto,
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(IntegrateError::InvalidConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if let CrkCutoff::Fraction(f) = self.crk_cutoff {
            if !(0.0..=1.0).contains(&f) {
                return Err(IntegrateError::InvalidConfig(format!(
                    "crk cutoff fraction must lie in [0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// SDIRK coefficient: root of `g^2 - g + 1/6 = 0` chosen so that the
/// composite stability function satisfies `|R(iy)| <= 1` on the whole
/// imaginary axis (checked numerically in the tests).
const CRK_GAMMA: f64 = 0.788_675_134_594_812_9; // (3 + sqrt(3)) / 6

/// Precomputed per-`dt` data for repeated steps.
pub struct Stepper {
    op: DsOperator,
    scheme: Scheme,
    dt: f64,
    /// ifrk4: exp(L dt / 2) and exp(L dt)
    exp_half: Vec<C64>,
    exp_full: Vec<C64>,
    /// crk: linear symbol split into explicit (slow) and implicit (fast) parts
    lin_slow: Vec<C64>,
    lin_fast: Vec<C64>,
    /// crk: 1 / (1 - dt * gamma * L_fast)
    stage_inv: Vec<C64>,
}

impl Stepper {
    pub fn new(
        grid: Grid2D,
        params: DsParams,
        config: StepperConfig,
    ) -> Result<Self, IntegrateError> {
        config.validate()?;
        Self::with_signed_dt(grid, params, config, config.dt)
    }

    /// Internal constructor that also admits negative `dt` (reversibility
    /// tests step backwards).
    pub(crate) fn with_signed_dt(
        grid: Grid2D,
        params: DsParams,
        config: StepperConfig,
        dt: f64,
    ) -> Result<Self, IntegrateError> {
        let op = DsOperator::new(grid, params, config.dealias);
        let lin = op.linear().values().to_vec();
        let exp_half: Vec<C64> = lin.iter().map(|l| (l * 0.5 * dt).exp()).collect();
        let exp_full: Vec<C64> = lin.iter().map(|l| (l * dt).exp()).collect();

        let max_mag = lin.iter().map(|l| l.norm()).fold(0.0_f64, f64::max);
        let threshold = match config.crk_cutoff {
            CrkCutoff::Auto => 1.0 / dt.abs(),
            CrkCutoff::Fraction(f) => f * max_mag,
        };
        let mut lin_slow = Vec::with_capacity(lin.len());
        let mut lin_fast = Vec::with_capacity(lin.len());
        let mut stage_inv = Vec::with_capacity(lin.len());
        for l in &lin {
            // Fraction(0) must capture every mode, including |L| = 0
            let fast = l.norm() >= threshold || threshold == 0.0;
            let (s, f) = if fast {
                (C64::new(0.0, 0.0), *l)
            } else {
                (*l, C64::new(0.0, 0.0))
            };
            lin_slow.push(s);
            lin_fast.push(f);
            stage_inv.push((C64::new(1.0, 0.0) - f * (dt * CRK_GAMMA)).inv());
        }

        Ok(Self {
            op,
            scheme: config.scheme,
            dt,
            exp_half,
            exp_full,
            lin_slow,
            lin_fast,
            stage_inv,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn operator(&self) -> &DsOperator {
        &self.op
    }

    /// Advance one step.
    pub fn step(&self, state: &State) -> Result<State, IntegrateError> {
        let nl = |f: &Field| self.op.nonlinear_rhs(f);
        let psi = match self.scheme {
            Scheme::Ifrk4 => self.ifrk4(&state.psi, nl)?,
            Scheme::CrkDriscoll => self.crk(&state.psi, nl)?,
        };
        Ok(State {
            t: state.t + self.dt,
            psi,
            params: state.params,
        })
    }

    fn field(&self, values: Vec<C64>) -> Field {
        Field::new(self.op.grid(), Repr::Spectral, values)
            .expect("internal stepper buffers share one grid")
    }

    /// Integrating-factor RK4: classical RK4 on `v = exp(-L t) psi_hat`,
    /// exact for the linear part.
    fn ifrk4(
        &self,
        u: &Field,
        nl: impl Fn(&Field) -> Result<Field, crate::SpectralError>,
    ) -> Result<Field, IntegrateError> {
        let h = self.dt;
        let uv = u.values();
        let k1 = nl(u)?;

        let mut s2 = Vec::with_capacity(uv.len());
        for i in 0..uv.len() {
            s2.push(self.exp_half[i] * (uv[i] + k1.values()[i] * (h / 2.0)));
        }
        let k2 = nl(&self.field(s2))?;

        let mut s3 = Vec::with_capacity(uv.len());
        for i in 0..uv.len() {
            s3.push(self.exp_half[i] * uv[i] + k2.values()[i] * (h / 2.0));
        }
        let k3 = nl(&self.field(s3))?;

        let mut s4 = Vec::with_capacity(uv.len());
        for i in 0..uv.len() {
            s4.push(self.exp_full[i] * uv[i] + self.exp_half[i] * k3.values()[i] * h);
        }
        let k4 = nl(&self.field(s4))?;

        let mut out = Vec::with_capacity(uv.len());
        for i in 0..uv.len() {
            let acc = self.exp_full[i] * (uv[i] + k1.values()[i] * (h / 6.0))
                + self.exp_half[i] * (k2.values()[i] + k3.values()[i]) * (h / 3.0)
                + k4.values()[i] * (h / 6.0);
            out.push(acc);
        }
        Ok(self.field(out))
    }

    /// Composite step: explicit classical RK4 on the nonlinearity plus the
    /// slow linear modes, an L-stable-free SDIRK3 on the fast linear modes.
    /// Shared abscissae c = (0, 1/2, 1/2, 1) and weights
    /// b = (1/6, 1/3, 1/3, 1/6); the implicit tableau (gamma = CRK_GAMMA)
    /// is
    /// ```text
    ///   0      |
    ///   1/2    | 1/2-g   g
    ///   1/2    | 1/2-g   0      g
    ///   1      | 5g-1    1-3g   1-3g   g
    /// ```
    /// which is third order for any g and keeps `|R(iy)| <= 1` for this g.
    fn crk(
        &self,
        u: &Field,
        nl: impl Fn(&Field) -> Result<Field, crate::SpectralError>,
    ) -> Result<Field, IntegrateError> {
        let h = self.dt;
        let g = CRK_GAMMA;
        let n = u.values().len();
        let uv = u.values();

        // explicit slope: nonlinearity plus slow linear part
        let slow = |f: &Field| -> Result<Vec<C64>, crate::SpectralError> {
            let mut k = nl(f)?.into_values();
            for (i, v) in k.iter_mut().enumerate() {
                *v += self.lin_slow[i] * f.values()[i];
            }
            Ok(k)
        };
        let fast = |v: &[C64]| -> Vec<C64> {
            v.iter()
                .enumerate()
                .map(|(i, x)| self.lin_fast[i] * x)
                .collect()
        };

        let k1 = slow(u)?;
        let l1 = fast(uv);

        let mut rhs = Vec::with_capacity(n);
        for i in 0..n {
            rhs.push(
                (uv[i] + k1[i] * (h / 2.0) + l1[i] * (h * (0.5 - g))) * self.stage_inv[i],
            );
        }
        let u2 = self.field(rhs);
        let k2 = slow(&u2)?;
        let l2 = fast(u2.values());

        let mut rhs = Vec::with_capacity(n);
        for i in 0..n {
            rhs.push(
                (uv[i] + k2[i] * (h / 2.0) + l1[i] * (h * (0.5 - g))) * self.stage_inv[i],
            );
        }
        let u3 = self.field(rhs);
        let k3 = slow(&u3)?;
        let l3 = fast(u3.values());

        let mut rhs = Vec::with_capacity(n);
        for i in 0..n {
            rhs.push(
                (uv[i]
                    + k3[i] * h
                    + (l1[i] * (5.0 * g - 1.0) + (l2[i] + l3[i]) * (1.0 - 3.0 * g)) * h)
                    * self.stage_inv[i],
            );
        }
        let u4 = self.field(rhs);
        let k4 = slow(&u4)?;
        let l4 = fast(u4.values());

        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(
                uv[i]
                    + (k1[i] + l1[i] + k4[i] + l4[i]) * (h / 6.0)
                    + (k2[i] + l2[i] + k3[i] + l3[i]) * (h / 3.0),
            );
        }
        Ok(self.field(out))
    }

    /// Pure-linear step (nonlinearity forced to zero); exactness and
    /// stability checks.
    #[doc(hidden)]
    pub fn step_linear_only(&self, state: &State) -> Result<State, IntegrateError> {
        let zero = |f: &Field| Ok(Field::zeros(f.grid(), Repr::Spectral));
        let psi = match self.scheme {
            Scheme::Ifrk4 => self.ifrk4(&state.psi, zero)?,
            Scheme::CrkDriscoll => self.crk(&state.psi, zero)?,
        };
        Ok(State {
            t: state.t + self.dt,
            psi,
            params: state.params,
        })
    }
}

/// One integrating-factor RK4 step (no dealiasing).
pub fn ifrk4_step(state: &State, dt: f64) -> Result<State, IntegrateError> {
    let stepper = Stepper::new(
        state.psi.grid(),
        state.params,
        StepperConfig::new(Scheme::Ifrk4, dt),
    )?;
    stepper.step(state)
}

/// One composite step with the given mode partition (no dealiasing).
pub fn crk_driscoll_step(
    state: &State,
    dt: f64,
    cutoff: CrkCutoff,
) -> Result<State, IntegrateError> {
    let stepper = Stepper::new(
        state.psi.grid(),
        state.params,
        StepperConfig {
            crk_cutoff: cutoff,
            ..StepperConfig::new(Scheme::CrkDriscoll, dt)
        },
    )?;
    stepper.step(state)
}

/// Monitor thresholds for the run loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Monitors {
    /// stop when |delta_E| exceeds this
    pub delta_e_limit: Option<f64>,
    /// stop when a spectral-tail maximum exceeds this
    pub tail_limit: Option<f64>,
    /// singularity-proximity stop; `None` enables it exactly for rho = -1
    pub singularity_stop: Option<bool>,
}

/// Run parameters: initial state, horizon, and monitoring.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub state: State,
    pub t_end: f64,
    pub n_steps: usize,
    /// emit a snapshot every this many steps (plus the initial and final
    /// states); 0 disables snapshots
    pub snapshot_every: usize,
    pub monitors: Monitors,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        if self.t_end < self.state.t {
            return Err(IntegrateError::InvalidConfig(format!(
                "t_end = {} precedes t_start = {}",
                self.t_end, self.state.t
            )));
        }
        if self.n_steps == 0 {
            return Err(IntegrateError::InvalidConfig("n_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Why and when a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    Completed,
    DeltaEExceeded,
    /// fitted singularity distance fell below the resolved minimum `m`
    SingularityProximity,
    NonFinite,
    TailGrowth,
}

impl std::fmt::Display for StopKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopKind::Completed => "completed",
            StopKind::DeltaEExceeded => "delta_E_exceeded",
            StopKind::SingularityProximity => "singularity_proximity",
            StopKind::NonFinite => "non_finite",
            StopKind::TailGrowth => "tail_growth",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct StopReason {
    pub kind: StopKind,
    pub t_stop: f64,
    pub detail: String,
}

/// Everything a run produces besides the emitted snapshots.
pub struct RunOutcome {
    pub series: NormSeries,
    pub stop: StopReason,
    pub final_state: State,
    pub warnings: Vec<String>,
}

/// Step from `state.t` to `t_end`, recording norms every step.
///
/// Snapshots (the current state) are passed to `sink` at the configured
/// cadence and for the final state; on a `non_finite` stop the last finite
/// state is preserved and emitted. The singularity fit runs every
/// `ceil(n_steps/400)` steps when the stop is enabled and halts the run once
/// the fitted distance falls below the grid's minimal resolved distance.
pub fn run(
    config: RunConfig,
    stepper_config: StepperConfig,
    mut sink: impl FnMut(&State) -> std::io::Result<()>,
) -> Result<RunOutcome, IntegrateError> {
    config.validate()?;
    stepper_config.validate()?;
    let grid = config.state.psi.grid();
    let params = config.state.params;
    let t0 = config.state.t;
    let span = config.t_end - t0;
    let n = config.n_steps;

    let mut warnings = Vec::new();
    let mut series = NormSeries::new();
    let computer = NormComputer::new(grid, params);

    if !config.state.psi.is_finite() {
        return Err(IntegrateError::NonFinite { t: t0 });
    }
    series.push(computer.record(t0, &config.state.psi)?)?;
    if config.snapshot_every > 0 {
        sink(&config.state)?;
    }

    // degenerate horizon: report the initial norms and finish
    if span == 0.0 {
        return Ok(RunOutcome {
            series,
            stop: StopReason {
                kind: StopKind::Completed,
                t_stop: t0,
                detail: "degenerate horizon (t_end = t_start)".into(),
            },
            final_state: config.state,
            warnings,
        });
    }

    let dt = span / n as f64;
    if (stepper_config.dt - dt).abs() > 1e-9 * dt {
        return Err(IntegrateError::InvalidConfig(format!(
            "stepper dt = {} inconsistent with (t_end - t_start)/n_steps = {dt}",
            stepper_config.dt
        )));
    }
    let stepper = Stepper::with_signed_dt(grid, params, stepper_config, dt)?;

    if !series.delta_e_defined() {
        warnings.push("E(0) = 0: delta_E monitor disabled".into());
    }
    let singularity_on = config
        .monitors
        .singularity_stop
        .unwrap_or(params.rho == -1.0);
    let fit_cadence = n.div_ceil(400);
    let m = grid.m_x();

    let mut state = config.state;
    let mut stop = StopReason {
        kind: StopKind::Completed,
        t_stop: config.t_end,
        detail: String::new(),
    };

    for i in 1..=n {
        let next = stepper.step(&state)?;
        if !next.psi.is_finite() {
            stop = StopReason {
                kind: StopKind::NonFinite,
                t_stop: state.t,
                detail: format!("non-finite state after the step to t = {}", next.t),
            };
            break;
        }
        let mut next = next;
        next.t = t0 + i as f64 * dt; // avoid accumulating rounding in t
        series.push(computer.record(next.t, &next.psi)?)?;
        let record = *series.records().last().unwrap(); // delta_e filled by push
        state = next;

        if config.snapshot_every > 0 && i % config.snapshot_every == 0 && i != n {
            sink(&state)?;
        }

        if let Some(limit) = config.monitors.delta_e_limit {
            if series.delta_e_defined() && record.delta_e.abs() > limit {
                stop = StopReason {
                    kind: StopKind::DeltaEExceeded,
                    t_stop: state.t,
                    detail: format!("|delta_E| = {:.3e} > {limit:.3e}", record.delta_e.abs()),
                };
                break;
            }
        }
        if let Some(limit) = config.monitors.tail_limit {
            if record.tail_x > limit || record.tail_y > limit {
                stop = StopReason {
                    kind: StopKind::TailGrowth,
                    t_stop: state.t,
                    detail: format!(
                        "spectral tail ({:.3e}, {:.3e}) > {limit:.3e}",
                        record.tail_x, record.tail_y
                    ),
                };
                break;
            }
        }
        if singularity_on && i % fit_cadence == 0 {
            match fit_singularity(&state.psi, Axis::X) {
                Ok(fit) if fit.delta < m => {
                    stop = StopReason {
                        kind: StopKind::SingularityProximity,
                        t_stop: state.t,
                        detail: format!(
                            "fitted delta = {:.3e} below resolved minimum m = {m:.3e}",
                            fit.delta
                        ),
                    };
                    break;
                }
                Ok(_) => {}
                Err(e) => {
                    // an unusable window (e.g. an entire spectrum still at
                    // the smooth floor) is not a stop condition
                    if warnings.is_empty() {
                        warnings.push(format!("singularity fit skipped: {e}"));
                    }
                }
            }
        }
    }

    if config.snapshot_every > 0 {
        sink(&state)?;
    }
    Ok(RunOutcome {
        series,
        stop,
        final_state: state,
        warnings,
    })
}

/// Convenience wrapper collecting snapshots in memory.
pub fn run_collect(
    config: RunConfig,
    stepper_config: StepperConfig,
) -> Result<(RunOutcome, Vec<(f64, Field)>), IntegrateError> {
    let mut snaps = Vec::new();
    let outcome = run(config, stepper_config, |s| {
        snaps.push((s.t, s.psi.clone()));
        Ok(())
    })?;
    Ok((outcome, snaps))
}
