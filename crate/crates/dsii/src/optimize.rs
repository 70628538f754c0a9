//! Derivative-free downhill simplex (Nelder-Mead) minimizer.
//!
//! Coefficients and the initial-simplex rule are fixed to the widely used
//! defaults of common numerical environments (reflection 1, expansion 2,
//! contraction 0.5, shrink 0.5; initial vertices perturb each coordinate by
//! 5%, or 2.5e-4 absolute when the coordinate is 0) so fit results are
//! comparable across tools.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("objective is not finite at the initial simplex")]
    NonFiniteStart,
    #[error("invalid option: {0}")]
    InvalidOptions(String),
}

/// Simplex coefficients and termination settings.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Maximum coordinate spread of the simplex below which to stop.
    pub tol_x: f64,
    /// Function-value spread below which to stop (joint with `tol_x`).
    pub tol_f: f64,
    pub max_evaluations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            tol_x: 1e-10,
            tol_f: 1e-10,
            max_evaluations: 20_000,
        }
    }
}

impl SimplexOptions {
    fn validate(&self) -> Result<(), OptimizeError> {
        if !(self.reflection > 0.0) {
            return Err(OptimizeError::InvalidOptions("reflection must be > 0".into()));
        }
        if !(self.expansion > 1.0) {
            return Err(OptimizeError::InvalidOptions("expansion must be > 1".into()));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(OptimizeError::InvalidOptions(
                "contraction must be in (0,1)".into(),
            ));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(OptimizeError::InvalidOptions("shrink must be in (0,1)".into()));
        }
        if !(self.tol_x > 0.0 && self.tol_f > 0.0) {
            return Err(OptimizeError::InvalidOptions("tolerances must be > 0".into()));
        }
        Ok(())
    }
}

/// Minimization outcome; `converged = false` means the evaluation budget ran
/// out and `x_min` is the best point seen.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x_min: Vec<f64>,
    pub f_min: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimize `objective` starting from `x0`.
pub fn nelder_mead(
    mut objective: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    options: SimplexOptions,
) -> Result<SimplexResult, OptimizeError> {
    options.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(OptimizeError::InvalidOptions("empty starting point".into()));
    }

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        objective(x)
    };

    // initial simplex: x0 plus per-coordinate perturbations
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        if v[i] == 0.0 {
            v[i] = 2.5e-4;
        } else {
            v[i] *= 1.05;
        }
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
    if fvals.iter().any(|f| !f.is_finite()) {
        return Err(OptimizeError::NonFiniteStart);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        // convergence: both spreads small
        let f_spread = (fvals[worst] - fvals[best]).abs();
        let mut x_spread: f64 = 0.0;
        for &i in &order[1..] {
            for d in 0..n {
                x_spread = x_spread.max((simplex[i][d] - simplex[best][d]).abs());
            }
        }
        if f_spread <= options.tol_f && x_spread <= options.tol_x {
            return Ok(SimplexResult {
                x_min: simplex[best].clone(),
                f_min: fvals[best],
                evaluations: evals,
                converged: true,
            });
        }
        if evals >= options.max_evaluations {
            return Ok(SimplexResult {
                x_min: simplex[best].clone(),
                f_min: fvals[best],
                evaluations: evals,
                converged: false,
            });
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for d in 0..n {
                centroid[d] += simplex[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        };

        // reflect
        let xr = lerp(&centroid, &simplex[worst], -options.reflection);
        let fr = eval(&xr, &mut evals);
        if fr < fvals[best] {
            // expand
            let xe = lerp(&centroid, &simplex[worst], -options.reflection * options.expansion);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[worst] = xe;
                fvals[worst] = fe;
            } else {
                simplex[worst] = xr;
                fvals[worst] = fr;
            }
        } else if fr < fvals[second_worst] {
            simplex[worst] = xr;
            fvals[worst] = fr;
        } else {
            // contract (outside if the reflected point improved on the worst)
            let (xc, fc) = if fr < fvals[worst] {
                let xc = lerp(&centroid, &xr, options.contraction);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &simplex[worst], options.contraction);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fvals[worst].min(fr) {
                simplex[worst] = xc;
                fvals[worst] = fc;
            } else {
                // shrink toward the best vertex
                for &i in &order[1..] {
                    simplex[i] = lerp(&simplex[best].clone(), &simplex[i], options.shrink);
                    fvals[i] = eval(&simplex[i], &mut evals);
                }
            }
        }
    }
}
