//! The DS II family in Fourier form: right-hand side, conserved quantities,
//! exact solutions and the Sung smallness check.
//!
//! The evolution solved here is
//! `i eps psi_t + eps^2 psi_xx - eps^2 psi_yy
//!    + 2 rho [Delta^{-1}((1-2 beta) d_xx + d_yy) |psi|^2] psi = 0`,
//! written for the Fourier coefficients as
//! `d_t psi_hat = L psi_hat + N(psi)` with diagonal
//! `L = -i eps (xi_1^2 - xi_2^2)` and
//! `N(psi) = (2 i rho / eps) F[(theta * |psi|^2) psi]`
//! where `theta` is the zero-order multiplier of [`theta_symbol`].
//!
//! Convention: `rho = -1` is the focusing case.

use num_complex::Complex64;

use crate::error::{ModelError, SpectralError};
use crate::spectral::{
    dealias, mean_flow_phi, theta_symbol, DealiasRule, Field, Grid2D, Repr, Symbol, C64,
};

/// Parameters selecting a member of the DS II family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsParams {
    /// Dispersion parameter, > 0 (semiclassical for small values).
    pub epsilon: f64,
    /// Mean-flow coupling; `beta = 0` is the hyperbolic NLS, `beta = 1` the
    /// integrable system.
    pub beta: f64,
    /// -1 focusing, +1 defocusing.
    pub rho: f64,
}

impl DsParams {
    pub fn new(epsilon: f64, beta: f64, rho: f64) -> Result<Self, ModelError> {
        if !(epsilon > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if rho != 1.0 && rho != -1.0 {
            return Err(ModelError::InvalidParameter(format!(
                "rho must be -1 or +1, got {rho}"
            )));
        }
        if !beta.is_finite() {
            return Err(ModelError::InvalidParameter("beta must be finite".into()));
        }
        Ok(Self { epsilon, beta, rho })
    }

    pub fn focusing(&self) -> bool {
        self.rho == -1.0
    }
}

/// Time-stamped solver state; `psi` is kept spectral between steps.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub psi: Field,
    pub params: DsParams,
}

impl State {
    pub fn new(t: f64, psi: Field, params: DsParams) -> Result<Self, ModelError> {
        let psi = match psi.repr() {
            Repr::Spectral => psi,
            Repr::Physical => psi.to_spectral()?,
        };
        Ok(Self { t, psi, params })
    }
}

/// Diagonal linear symbol `L = -i eps (xi_1^2 - xi_2^2)`.
pub fn linear_symbol(grid: Grid2D, epsilon: f64) -> Symbol {
    grid.symbol(|xi1, xi2| C64::new(0.0, -epsilon * (xi1 * xi1 - xi2 * xi2)))
}

/// Precomputed symbols for repeated right-hand-side evaluations on one grid.
#[derive(Debug, Clone)]
pub struct DsOperator {
    grid: Grid2D,
    params: DsParams,
    theta: Symbol,
    linear: Symbol,
    dealias_rule: DealiasRule,
}

impl DsOperator {
    pub fn new(grid: Grid2D, params: DsParams, dealias_rule: DealiasRule) -> Self {
        Self {
            grid,
            params,
            theta: theta_symbol(grid, params.beta),
            linear: linear_symbol(grid, params.epsilon),
            dealias_rule,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }
    pub fn params(&self) -> DsParams {
        self.params
    }
    pub fn linear(&self) -> &Symbol {
        &self.linear
    }

    /// Pseudospectral nonlinearity `N(psi) = (2 i rho / eps) F[(theta * |psi|^2) psi]`.
    ///
    /// `psi_hat` must be spectral.  The product is formed in physical space;
    /// the optional dealiasing rule is applied to its transform.
    pub fn nonlinear_rhs(&self, psi_hat: &Field) -> Result<Field, SpectralError> {
        if psi_hat.grid() != self.grid {
            return Err(SpectralError::GridMismatch);
        }
        let psi = psi_hat.to_physical()?;
        let mut dens = psi.clone();
        for v in dens.values_mut() {
            *v = C64::new(v.norm_sqr(), 0.0);
        }
        let filtered = dens.to_spectral()?.apply_symbol(&self.theta)?.to_physical()?;
        let mut prod = psi;
        for (p, g) in prod.values_mut().iter_mut().zip(filtered.values()) {
            *p *= g.re;
        }
        let mut out = prod.to_spectral()?;
        dealias(&mut out, self.dealias_rule)?;
        let scale = C64::new(0.0, 2.0 * self.params.rho / self.params.epsilon);
        for v in out.values_mut() {
            *v *= scale;
        }
        Ok(out)
    }
}

/// One-shot nonlinearity evaluation (builds the symbols each call).
pub fn nonlinear_rhs(
    psi_hat: &Field,
    params: DsParams,
    rule: DealiasRule,
) -> Result<Field, SpectralError> {
    DsOperator::new(psi_hat.grid(), params, rule).nonlinear_rhs(psi_hat)
}

/// Conserved energy
/// `E = int [eps^2 |psi_x|^2 - eps^2 |psi_y|^2 - rho (|psi|^2 + beta Phi) |psi|^2]`.
pub fn energy(psi: &Field, params: DsParams) -> Result<f64, ModelError> {
    if !psi.is_finite() {
        return Err(ModelError::InvalidParameter(
            "energy of a non-finite field".into(),
        ));
    }
    let grid = psi.grid();
    let (phys, hat);
    match psi.repr() {
        Repr::Physical => {
            phys = psi.clone();
            hat = psi.to_spectral()?;
        }
        Repr::Spectral => {
            hat = psi.clone();
            phys = psi.to_physical()?;
        }
    }
    let dx = hat
        .apply_symbol(&grid.symbol(|xi1, _| C64::new(0.0, xi1)))?
        .to_physical()?;
    let dy = hat
        .apply_symbol(&grid.symbol(|_, xi2| C64::new(0.0, xi2)))?
        .to_physical()?;
    let eps2 = params.epsilon * params.epsilon;
    let grad: f64 = dx
        .values()
        .iter()
        .zip(dy.values())
        .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
        .sum();

    let mut dens = phys.clone();
    for v in dens.values_mut() {
        *v = C64::new(v.norm_sqr(), 0.0);
    }
    let phi = mean_flow_phi(&dens)?;
    let pot: f64 = dens
        .values()
        .iter()
        .zip(phi.values())
        .map(|(d, p)| (d.re + params.beta * p.re) * d.re)
        .sum();

    Ok((eps2 * grad - params.rho * pot) * grid.cell())
}

/// Conserved mass, the grid-quadrature squared L2 norm.
pub fn mass(psi: &Field) -> f64 {
    match psi.repr() {
        Repr::Physical => psi.norm_l2().powi(2),
        // Parseval with our normalization
        Repr::Spectral => {
            let g = psi.grid();
            let area = 4.0 * g.halfwidth_x() * g.halfwidth_y();
            psi.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * area
        }
    }
}

/// Smallness threshold `(pi^3/2)((sqrt 5 - 1)/2)^2` of the global-existence
/// condition for the integrable focusing case.
pub fn sung_threshold() -> f64 {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    std::f64::consts::PI.powi(3) / 2.0 * phi * phi
}

/// The Gaussian form of the smallness condition after rescaling to dispersion
/// parameter `eps`: `1/eps^2 <= ((sqrt 5 - 1)/2)^2 / 8` (~ 0.0477).
pub fn sung_gaussian_epsilon_bound() -> f64 {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    phi * phi / 8.0
}

/// Result of the smallness check on initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SungCheck {
    /// Discrete approximation of `|F[psi0]|_1 |F[psi0]|_inf` under the
    /// continuous convention `f_hat(xi) = int f exp(-i xi.x) dx`.
    pub product: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

/// Evaluate the smallness condition `|F[psi0]|_1 |F[psi0]|_inf < (pi^3/2)((sqrt 5-1)/2)^2`.
pub fn sung_check(psi0: &Field) -> Result<SungCheck, ModelError> {
    if psi0.repr() != Repr::Physical {
        return Err(SpectralError::WrongRepresentation {
            expected: Repr::Physical,
            got: psi0.repr(),
        }
        .into());
    }
    let g = psi0.grid();
    let hat = psi0.to_spectral()?;
    // f_hat(xi_k) ~ area * c_k; the L1 quadrature weight is dxi1*dxi2.
    let area = 4.0 * g.halfwidth_x() * g.halfwidth_y();
    let dxi = std::f64::consts::PI.powi(2) / (g.halfwidth_x() * g.halfwidth_y());
    let linf = area * hat.norm_linf();
    let l1 = area * dxi * hat.values().iter().map(|v| v.norm()).sum::<f64>();
    let product = l1 * linf;
    let threshold = sung_threshold();
    Ok(SungCheck {
        product,
        threshold,
        satisfied: product < threshold,
    })
}

/// Gaussian initial data `amplitude * exp(-x^2 - eta y^2)`.
pub fn gaussian_ic(grid: Grid2D, eta: f64, amplitude: f64) -> Result<Field, ModelError> {
    if !(eta > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "eta must be positive, got {eta}"
        )));
    }
    Ok(grid.sample(|x, y| C64::new(amplitude * (-x * x - eta * y * y).exp(), 0.0)))
}

/// Lump solitary wave of the integrable focusing system at time `t`:
///
/// `psi = 2 c exp(-2i(v1 x - v2 y + 2(v1^2 - v2^2) t))
///        / (|x + 4 v1 t + i(y + 4 v2 t) + z0|^2 + |c|^2)`.
///
/// Velocity is `(-4 v1, -4 v2)`; the peak amplitude is `2/|c|`.
pub fn lump(
    grid: Grid2D,
    c: C64,
    z0: C64,
    v1: f64,
    v2: f64,
    t: f64,
) -> Result<Field, ModelError> {
    if c == C64::new(0.0, 0.0) {
        return Err(ModelError::InvalidParameter("lump requires c != 0".into()));
    }
    let c2 = c.norm_sqr();
    Ok(grid.sample(|x, y| {
        let phase = -2.0 * (v1 * x - v2 * y + 2.0 * (v1 * v1 - v2 * v2) * t);
        let z = Complex64::new(x + 4.0 * v1 * t, y + 4.0 * v2 * t) + z0;
        2.0 * c * C64::new(0.0, phase).exp() / (z.norm_sqr() + c2)
    }))
}

/// Pseudo-conformal blow-up solution (focusing integrable case):
///
/// `psi = exp(i b (x^2 - y^2) / (4(a + b t))) v(X, Y) / (a + b t)` with
/// `v = 2/(1 + X^2 + Y^2)`, `X = x/(a + b t)`, `Y = y/(a + b t)`; requires
/// `a b < 0`, blow-up at `T = -a/b`.
pub fn ozawa(grid: Grid2D, a: f64, b: f64, t: f64) -> Result<Field, ModelError> {
    if !(a * b < 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "ozawa requires a*b < 0, got a={a}, b={b}"
        )));
    }
    let s = a + b * t;
    if s == 0.0 {
        return Err(ModelError::InvalidParameter(
            "ozawa evaluated at the blow-up time t = -a/b".into(),
        ));
    }
    Ok(grid.sample(|x, y| {
        let (xx, yy) = (x / s, y / s);
        let v = 2.0 / (1.0 + xx * xx + yy * yy);
        C64::new(0.0, b * (x * x - y * y) / (4.0 * s)).exp() * (v / s)
    }))
}

/// Line soliton `sqrt(2/alpha) sech x` of the 1D reduction, `alpha = 2 rho (1 - 2 beta)`.
/// The reference time evolution multiplies by `exp(i t)`.
pub fn line_soliton(grid: Grid2D, alpha: f64) -> Result<Field, ModelError> {
    if !(alpha > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "line soliton requires alpha > 0, got {alpha}"
        )));
    }
    let amp = (2.0 / alpha).sqrt();
    Ok(grid.sample(|x, _| C64::new(amp / x.cosh(), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(beta: f64, rho: f64) -> DsParams {
        DsParams::new(0.1, beta, rho).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(DsParams::new(0.0, 1.0, -1.0).is_err());
        assert!(DsParams::new(0.1, 1.0, 0.5).is_err());
        assert!(DsParams::new(0.1, f64::NAN, 1.0).is_err());
        assert!(DsParams::new(0.1, 1.0, -1.0).unwrap().focusing());
    }

    #[test]
    fn linear_symbol_examples() {
        let g = Grid2D::square(16, PI).unwrap(); // integer wavenumbers
        let l = linear_symbol(g, 0.1);
        let at = |kx: usize, ky: usize| l.values()[g.index(kx, ky)];
        assert_eq!(at(1, 1), C64::new(0.0, 0.0));
        assert!((at(1, 0) - C64::new(0.0, -0.1)).norm() < 1e-15);
        // even in xi
        assert_eq!(at(15, 13), at(1, 3));
    }

    #[test]
    fn nonlinear_rhs_constant_field() {
        let g = Grid2D::square(16, PI).unwrap();
        let a = C64::new(0.7, 0.4);
        let psi = g.sample(|_, _| a).to_spectral().unwrap();
        let p = params(1.0, -1.0);
        let n = nonlinear_rhs(&psi, p, DealiasRule::None).unwrap();
        // N = (2 i rho / eps) |A|^2 psi
        let expected = C64::new(0.0, 2.0 * p.rho / p.epsilon) * a.norm_sqr() * a;
        assert!((n.values()[0] - expected).norm() < 1e-12);
        for v in &n.values()[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn theta_is_identity_on_pure_y_density() {
        // |psi|^2 = 1 + small cos y: theta = 1 on xi_1 = 0 modes regardless of beta
        let g = Grid2D::square(32, PI).unwrap();
        let psi = g
            .sample(|_, y| C64::new((1.0 + 0.1 * y.cos()).sqrt(), 0.0))
            .to_spectral()
            .unwrap();
        let p_beta = DsParams::new(0.1, 3.7, -1.0).unwrap();
        let p_zero = DsParams::new(0.1, 0.0, -1.0).unwrap();
        let n_beta = nonlinear_rhs(&psi, p_beta, DealiasRule::None).unwrap();
        let n0 = nonlinear_rhs(&psi, p_zero, DealiasRule::None).unwrap();
        for (a, b) in n_beta.values().iter().zip(n0.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    /// Independent oracle: the two-term form of the DS II nonlinearity,
    /// `(2 i rho / eps)(beta Phi + |psi|^2) psi` with `Phi` from the elliptic solve.
    fn two_term_rhs(psi_hat: &Field, p: DsParams) -> Field {
        let psi = psi_hat.to_physical().unwrap();
        let mut dens = psi.clone();
        for v in dens.values_mut() {
            *v = C64::new(v.norm_sqr(), 0.0);
        }
        let phi = mean_flow_phi(&dens).unwrap();
        let mut prod = psi;
        let vals = prod.values_mut();
        for (i, v) in vals.iter_mut().enumerate() {
            let g = p.beta * phi.values()[i].re + dens.values()[i].re;
            *v *= C64::new(0.0, 2.0 * p.rho / p.epsilon) * g;
        }
        prod.to_spectral().unwrap()
    }

    #[test]
    fn rhs_matches_two_term_form_on_gaussian() {
        let g = Grid2D::square(128, 2.0 * PI).unwrap();
        let psi = gaussian_ic(g, 1.0, 1.0).unwrap().to_spectral().unwrap();
        for beta in [0.0, 0.9, 1.0, 2.0] {
            let p = DsParams::new(0.1, beta, -1.0).unwrap();
            let a = nonlinear_rhs(&psi, p, DealiasRule::None).unwrap();
            let b = two_term_rhs(&psi, p);
            let scale = a.norm_linf();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).norm() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn energy_gaussian_beta0() {
        // gradient terms cancel by symmetry; E = -rho * pi/4
        let g = Grid2D::square(256, 2.0 * PI).unwrap();
        let psi = gaussian_ic(g, 1.0, 1.0).unwrap();
        for rho in [-1.0, 1.0] {
            let p = DsParams::new(0.1, 0.0, rho).unwrap();
            let e = energy(&psi, p).unwrap();
            assert!(
                (e - (-rho * PI / 4.0)).abs() < 1e-12,
                "E = {e}, expected {}",
                -rho * PI / 4.0
            );
        }
    }

    #[test]
    fn energy_refinement_oracle_beta1() {
        // Direct-quadrature oracle at doubled resolution for beta=1, rho=-1.
        let p = DsParams::new(0.1, 1.0, -1.0).unwrap();
        let coarse = Grid2D::square(128, 2.0 * PI).unwrap();
        let fine = Grid2D::square(256, 2.0 * PI).unwrap();
        let e_coarse = energy(&gaussian_ic(coarse, 1.0, 1.0).unwrap(), p).unwrap();

        // oracle: dense evaluation of each term at doubled resolution
        let psi = gaussian_ic(fine, 1.0, 1.0).unwrap();
        let hat = psi.to_spectral().unwrap();
        let dx = hat
            .apply_symbol(&fine.symbol(|xi1, _| C64::new(0.0, xi1)))
            .unwrap()
            .to_physical()
            .unwrap();
        let dy = hat
            .apply_symbol(&fine.symbol(|_, xi2| C64::new(0.0, xi2)))
            .unwrap()
            .to_physical()
            .unwrap();
        let mut dens = psi.clone();
        for v in dens.values_mut() {
            *v = C64::new(v.norm_sqr(), 0.0);
        }
        let phi = mean_flow_phi(&dens).unwrap();
        let mut e_fine = 0.0;
        for i in 0..fine.len() {
            let d = dens.values()[i].re;
            e_fine += p.epsilon.powi(2) * (dx.values()[i].norm_sqr() - dy.values()[i].norm_sqr())
                - p.rho * (d + p.beta * phi.values()[i].re) * d;
        }
        e_fine *= fine.cell();

        assert!(
            (e_coarse - e_fine).abs() < 1e-8 * e_fine.abs(),
            "coarse {e_coarse} vs fine {e_fine}"
        );
    }

    #[test]
    fn gauge_invariance_of_energy_and_mass() {
        let g = Grid2D::square(64, 2.0 * PI).unwrap();
        let p = params(0.9, -1.0);
        let psi = gaussian_ic(g, 1.0, 1.0).unwrap();
        let mut rotated = psi.clone();
        let phase = C64::new(0.0, 1.2345).exp();
        for v in rotated.values_mut() {
            *v *= phase;
        }
        assert!((energy(&psi, p).unwrap() - energy(&rotated, p).unwrap()).abs() < 1e-12);
        assert!((mass(&psi) - mass(&rotated)).abs() < 1e-12);
    }

    #[test]
    fn mass_examples() {
        let g = Grid2D::square(256, 2.0 * PI).unwrap();
        let psi = gaussian_ic(g, 1.0, 1.0).unwrap();
        assert!((mass(&psi) - PI / 2.0).abs() < 1e-12);
        // Parseval route agrees
        assert!((mass(&psi.to_spectral().unwrap()) - PI / 2.0).abs() < 1e-12);

        // scaling: mass(c psi) = |c|^2 mass(psi)
        let c = C64::new(0.3, -1.7);
        let mut scaled = psi.clone();
        for v in scaled.values_mut() {
            *v *= c;
        }
        assert!((mass(&scaled) - c.norm_sqr() * mass(&psi)).abs() < 1e-12);

        // Ozawa profile: continuum mass 4 pi, algebraic decay needs a large domain
        let big = Grid2D::square(1024, 50.0 * PI).unwrap();
        let v = big.sample(|x, y| C64::new(2.0 / (1.0 + x * x + y * y), 0.0));
        let m = mass(&v);
        assert!(
            (m - 4.0 * PI).abs() < 0.04 * 4.0 * PI,
            "mass {m} vs {}",
            4.0 * PI
        );
    }

    #[test]
    fn sung_check_gaussian() {
        let g = Grid2D::square(512, 2.0 * PI).unwrap();
        let psi = gaussian_ic(g, 1.0, 1.0).unwrap();
        let chk = sung_check(&psi).unwrap();
        let exact = 4.0 * PI.powi(3);
        assert!(
            (chk.product - exact).abs() < 0.01 * exact,
            "product {} vs {exact}",
            chk.product
        );
        assert!((chk.threshold - 5.9218).abs() < 1e-3);
        assert!(!chk.satisfied);

        // homogeneity: scaling by c -> product scales by |c|^2
        let c = 0.01;
        let mut small = psi.clone();
        for v in small.values_mut() {
            *v *= c;
        }
        let chk2 = sung_check(&small).unwrap();
        assert!((chk2.product - c * c * chk.product).abs() < 1e-9 * chk.product);
        assert!(chk2.satisfied);
    }

    #[test]
    fn sung_epsilon_bound() {
        let b = sung_gaussian_epsilon_bound();
        assert!((b - 0.0477).abs() < 5e-5, "bound {b}");
    }

    #[test]
    fn gaussian_ic_examples() {
        let g = Grid2D::square(128, 2.0 * PI).unwrap();
        let f = gaussian_ic(g, 1.0, 1.0).unwrap();
        // value 1 at the grid point nearest the origin (origin is a node)
        assert!((f.values()[g.index(64, 64)].re - 1.0).abs() < 1e-15);
        // x <-> y symmetry on a square grid
        for j in 0..g.n_x() {
            for i in 0..j {
                let a = f.values()[g.index(i, j)];
                let b = f.values()[g.index(j, i)];
                assert_eq!(a, b);
            }
        }
        assert!(gaussian_ic(g, 0.0, 1.0).is_err());
    }

    #[test]
    fn lump_examples() {
        let g = Grid2D::square(256, 10.0 * PI).unwrap();
        let one = C64::new(1.0, 0.0);
        let f = lump(g, one, C64::new(0.0, 0.0), 0.0, 0.0, 0.0).unwrap();
        // peak 2 at the origin, |psi| = 2/(1+r^2)
        assert!((f.values()[g.index(128, 128)].norm() - 2.0).abs() < 1e-14);
        let x = g.x(200);
        let y = g.y(150);
        let expect = 2.0 / (1.0 + x * x + y * y);
        assert!((f.values()[g.index(200, 150)].norm() - expect).abs() < 1e-14);

        // translation: peak at (-4 v1 t - Re z0, -4 v2 t - Im z0)
        let (v1, v2, t) = (0.25, -0.5, 1.0);
        let z0 = C64::new(2.0, -1.0);
        let f = lump(g, one, z0, v1, v2, t).unwrap();
        let (mut best, mut best_xy) = (0.0, (0.0, 0.0));
        for j_y in 0..g.n_y() {
            for j_x in 0..g.n_x() {
                let v = f.values()[g.index(j_x, j_y)].norm();
                if v > best {
                    best = v;
                    best_xy = (g.x(j_x), g.y(j_y));
                }
            }
        }
        assert!((best_xy.0 - (-4.0 * v1 * t - z0.re)).abs() <= g.dx() + 1e-12);
        assert!((best_xy.1 - (-4.0 * v2 * t - z0.im)).abs() <= g.dy() + 1e-12);

        // far field: |psi| * r^2 bounded (decay exponent 1 in r^2)
        let f = lump(g, one, C64::new(0.0, 0.0), 0.0, 0.0, 0.0).unwrap();
        let r2 = (10.0 * PI * 0.9_f64).powi(2);
        let corner = f.values()[g.index(13, 128)].norm(); // x ~ -0.9 * 10 pi, y = 0
        assert!((corner * (g.x(13).powi(2)) - 2.0).abs() < 0.05);
        let _ = r2;

        assert!(lump(g, C64::new(0.0, 0.0), one, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ozawa_examples() {
        let g = Grid2D::square(512, 10.0 * PI).unwrap();
        let f = ozawa(g, 1.0, -1.0, 0.0).unwrap();
        // at t=0: psi = exp(-i(x^2-y^2)/4) * 2/(1+r^2)
        let j = g.index(400, 100);
        let (x, y) = (g.x(400), g.y(100));
        let expect = C64::new(0.0, -(x * x - y * y) / 4.0).exp() * 2.0 / (1.0 + x * x + y * y);
        assert!((f.values()[j] - expect).norm() < 1e-13);
        assert!((f.norm_linf() - 2.0).abs() < 1e-12);

        // peak modulus 2/|a + b t|
        let f = ozawa(g, 1.0, -1.0, 0.75).unwrap();
        assert!((f.norm_linf() - 8.0).abs() < 0.05);

        // mass approximately 4 pi (2% domain truncation at halfwidth 10 pi)
        let f = ozawa(g, 1.0, -1.0, 0.0).unwrap();
        assert!((mass(&f) - 4.0 * PI).abs() < 0.02 * 4.0 * PI);

        assert!(ozawa(g, 1.0, 1.0, 0.0).is_err());
        assert!(ozawa(g, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn line_soliton_examples() {
        let g = Grid2D::square(64, 2.0 * PI).unwrap();
        // alpha = 2 for beta = 1, rho = -1: amplitude 1 at x = 0
        let f = line_soliton(g, 2.0).unwrap();
        assert!((f.values()[g.index(32, 0)].re - 1.0).abs() < 1e-15);
        // constant along y
        for j_y in 1..g.n_y() {
            for j_x in 0..g.n_x() {
                assert_eq!(f.values()[g.index(j_x, j_y)], f.values()[g.index(j_x, 0)]);
            }
        }
        // amplitude decreasing in alpha
        let f2 = line_soliton(g, 200.0).unwrap();
        assert!(f2.norm_linf() < 0.15);
        assert!(line_soliton(g, -2.0).is_err());
        assert!(line_soliton(g, 0.0).is_err());
    }

    #[test]
    fn beta1_conjugate_exchange_symmetry_of_rhs() {
        // If psi(x,y) = conj(psi(y,x)) the evolution preserves that relation.
        // The zero-mode convention theta(0) = 1 adds a global phase rotation
        // at rate 2 rho mean(|psi|^2) / eps (a gauge term; its generator is the
        // conserved mass), so the relation holds for the gauge-reduced RHS
        // with that rotation removed.
        let g = Grid2D::square(64, 2.0 * PI).unwrap();
        let p = DsParams::new(0.5, 1.0, -1.0).unwrap();
        // symmetric-by-construction data: f(x,y) + conj(f(y,x))
        let raw = |x: f64, y: f64| {
            C64::new((-x * x - y * y).exp(), 0.2 * (x - 0.3 * y).sin() * (-x * x - y * y).exp())
        };
        let psi = g.sample(|x, y| raw(x, y) + raw(y, x).conj());
        let hat = psi.to_spectral().unwrap();
        let op = DsOperator::new(g, p, DealiasRule::None);
        let rhs = hat
            .apply_symbol(op.linear())
            .unwrap()
            .values()
            .iter()
            .zip(op.nonlinear_rhs(&hat).unwrap().values().iter())
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>();
        let rhs_field = Field::new(g, Repr::Spectral, rhs).unwrap().to_physical().unwrap();
        let area = 4.0 * g.halfwidth_x() * g.halfwidth_y();
        let gauge_rate = C64::new(0.0, 2.0 * p.rho / p.epsilon) * (mass(&psi) / area);
        let mut max_dev: f64 = 0.0;
        for j_y in 0..g.n_y() {
            for j_x in 0..g.n_x() {
                let a = rhs_field.values()[g.index(j_x, j_y)]
                    - gauge_rate * psi.values()[g.index(j_x, j_y)];
                let b = (rhs_field.values()[g.index(j_y, j_x)]
                    - gauge_rate * psi.values()[g.index(j_y, j_x)])
                .conj();
                max_dev = max_dev.max((a - b).norm());
            }
        }
        assert!(
            max_dev < 1e-12 * rhs_field.norm_linf(),
            "symmetry deviation {max_dev}"
        );
    }

    /// Relative residual of `psi_t = L psi + N(psi)` against a central
    /// finite-difference time derivative, measured over the interior half of
    /// the (square) domain: the exact solutions are not periodic, so spectral
    /// derivatives carry boundary artifacts that would mask the answer.
    fn exact_solution_residual(
        at: impl Fn(f64) -> Field,
        p: DsParams,
        conjugate: bool,
    ) -> f64 {
        let dt = 1e-5;
        let prep = |mut f: Field| {
            if conjugate {
                for v in f.values_mut() {
                    *v = v.conj();
                }
            }
            f
        };
        let (plus, minus, base) = (prep(at(dt)), prep(at(-dt)), prep(at(0.0)));
        let g = base.grid();
        let op = DsOperator::new(g, p, DealiasRule::None);
        let hat = base.to_spectral().unwrap();
        let lin = hat.apply_symbol(op.linear()).unwrap();
        let nl = op.nonlinear_rhs(&hat).unwrap();
        let rhs = Field::new(
            g,
            Repr::Spectral,
            lin.values()
                .iter()
                .zip(nl.values())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap()
        .to_physical()
        .unwrap();
        let mut dev = 0.0_f64;
        let mut mag = 0.0_f64;
        let n = g.n_x();
        for k_y in n / 4..3 * n / 4 {
            for k_x in n / 4..3 * n / 4 {
                let i = g.index(k_x, k_y);
                let fd = (plus.values()[i] - minus.values()[i]) / (2.0 * dt);
                dev = dev.max((rhs.values()[i] - fd).norm());
                mag = mag.max(fd.norm());
            }
        }
        dev / mag
    }

    /// Sign calibration: the lump and Ozawa formulas as implemented satisfy
    /// the evolution equation at eps = 1, beta = 1, rho = -1 (small residual,
    /// limited by domain truncation), while their complex conjugates fail at
    /// O(1). This pins down the orientation conventions once and for all.
    #[test]
    fn lump_and_ozawa_satisfy_the_equation() {
        let g = Grid2D::square(512, 10.0 * PI).unwrap();
        let p = DsParams::new(1.0, 1.0, -1.0).unwrap();

        let c = C64::new(1.0, 0.0);
        let z0 = C64::new(0.0, 0.0);
        let lump_at = |t: f64| lump(g, c, z0, 0.2, 0.1, t).unwrap();
        let r = exact_solution_residual(lump_at, p, false);
        let r_conj = exact_solution_residual(lump_at, p, true);
        assert!(r < 0.05, "lump residual {r}");
        assert!(r_conj > 1.0, "conjugate lump residual {r_conj}");

        let ozawa_at = |t: f64| ozawa(g, 1.0, -1.0, t).unwrap();
        let r = exact_solution_residual(ozawa_at, p, false);
        let r_conj = exact_solution_residual(ozawa_at, p, true);
        assert!(r < 0.05, "ozawa residual {r}");
        assert!(r_conj > 1.0, "conjugate ozawa residual {r_conj}");
    }
}
