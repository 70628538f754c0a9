//! Periodic grids, discrete Fourier transforms and the nonlocal operators
//! entering the DS II nonlinearity.
//!
//! Spectral coefficients are defined so that
//! `psi(x_j, y_j) = sum_k c_k exp(i xi_k . (x_j, y_j))` with wavenumbers
//! `xi_1 in {-n/2, ..., n/2-1} * pi/halfwidth` (analogously `xi_2`).  The
//! inverse transform carries the `1/(n_x*n_y)` factor, so the zero mode of a
//! spectral field equals the grid mean of the physical values.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::SpectralError;

pub type C64 = Complex64;

/// Periodic rectangular grid on `[-halfwidth_x, halfwidth_x) x [-halfwidth_y, halfwidth_y)`.
///
/// Mode counts must be even and at least 4.  Physical values are stored
/// row-major with x fastest: `index = j_y * n_x + j_x`.  Spectral values use
/// the same layout with FFT mode ordering per axis (`0, 1, ..., n/2-1, -n/2,
/// ..., -1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n_x: usize,
    n_y: usize,
    halfwidth_x: f64,
    halfwidth_y: f64,
}

impl Grid2D {
    pub fn new(
        n_x: usize,
        n_y: usize,
        halfwidth_x: f64,
        halfwidth_y: f64,
    ) -> Result<Self, SpectralError> {
        if n_x < 4 || n_y < 4 || !n_x.is_multiple_of(2) || !n_y.is_multiple_of(2) {
            return Err(SpectralError::InvalidGrid(format!(
                "mode counts must be even and >= 4, got {n_x} x {n_y}"
            )));
        }
        if !(halfwidth_x > 0.0) || !(halfwidth_y > 0.0) {
            return Err(SpectralError::InvalidGrid(format!(
                "halfwidths must be positive, got {halfwidth_x}, {halfwidth_y}"
            )));
        }
        Ok(Self {
            n_x,
            n_y,
            halfwidth_x,
            halfwidth_y,
        })
    }

    /// Square grid on `[-halfwidth, halfwidth)^2`.
    pub fn square(n: usize, halfwidth: f64) -> Result<Self, SpectralError> {
        Self::new(n, n, halfwidth, halfwidth)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn n_y(&self) -> usize {
        self.n_y
    }
    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn halfwidth_x(&self) -> f64 {
        self.halfwidth_x
    }
    pub fn halfwidth_y(&self) -> f64 {
        self.halfwidth_y
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.halfwidth_x / self.n_x as f64
    }
    pub fn dy(&self) -> f64 {
        2.0 * self.halfwidth_y / self.n_y as f64
    }
    /// Quadrature weight of one grid cell.
    pub fn cell(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.halfwidth_x + j as f64 * self.dx()
    }
    pub fn y(&self, j: usize) -> f64 {
        -self.halfwidth_y + j as f64 * self.dy()
    }

    /// Signed mode index for FFT position `k` on an axis with `n` modes.
    fn signed(k: usize, n: usize) -> i64 {
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Wavenumber `xi_1` at FFT position `k`.
    pub fn xi1(&self, k: usize) -> f64 {
        Self::signed(k, self.n_x) as f64 * PI / self.halfwidth_x
    }
    /// Wavenumber `xi_2` at FFT position `k`.
    pub fn xi2(&self, k: usize) -> f64 {
        Self::signed(k, self.n_y) as f64 * PI / self.halfwidth_y
    }

    /// Minimal resolved distance along x: `m = 2 pi D / N` with `D = halfwidth/pi`,
    /// i.e. the grid spacing.  Singularities closer than `m` to the real axis
    /// cannot be distinguished from 0.
    pub fn m_x(&self) -> f64 {
        self.dx()
    }
    /// Minimal resolved distance along y.
    pub fn m_y(&self) -> f64 {
        self.dy()
    }

    pub fn index(&self, j_x: usize, j_y: usize) -> usize {
        j_y * self.n_x + j_x
    }

    /// Sample a function of the node coordinates into a physical field.
    pub fn sample(&self, mut f: impl FnMut(f64, f64) -> C64) -> Field {
        let mut values = Vec::with_capacity(self.len());
        for j_y in 0..self.n_y {
            let y = self.y(j_y);
            for j_x in 0..self.n_x {
                values.push(f(self.x(j_x), y));
            }
        }
        Field {
            grid: *self,
            repr: Repr::Physical,
            values,
        }
    }

    /// Build a spectral-space multiplier from a function of `(xi_1, xi_2)`.
    pub fn symbol(&self, mut f: impl FnMut(f64, f64) -> C64) -> Symbol {
        let mut values = Vec::with_capacity(self.len());
        for k_y in 0..self.n_y {
            let xi2 = self.xi2(k_y);
            for k_x in 0..self.n_x {
                values.push(f(self.xi1(k_x), xi2));
            }
        }
        Symbol {
            grid: *self,
            values,
        }
    }
}

/// Which space the stored values of a [`Field`] live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repr {
    Physical,
    Spectral,
}

impl std::fmt::Display for Repr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Repr::Physical => write!(f, "physical"),
            Repr::Spectral => write!(f, "spectral"),
        }
    }
}

/// Complex 2D state on a [`Grid2D`], tagged with its representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    repr: Repr,
    values: Vec<C64>,
}

impl Field {
    pub fn new(grid: Grid2D, repr: Repr, values: Vec<C64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::InvalidGrid(format!(
                "value count {} does not match grid {}x{}",
                values.len(),
                grid.n_x(),
                grid.n_y()
            )));
        }
        Ok(Self { grid, repr, values })
    }

    pub fn zeros(grid: Grid2D, repr: Repr) -> Self {
        Self {
            grid,
            repr,
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }
    pub fn repr(&self) -> Repr {
        self.repr
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Forward transform; the zero mode of the result is the grid mean.
    pub fn to_spectral(&self) -> Result<Field, SpectralError> {
        if self.repr != Repr::Physical {
            return Err(SpectralError::WrongRepresentation {
                expected: Repr::Physical,
                got: self.repr,
            });
        }
        let mut values = self.values.clone();
        fft2(&mut values, self.grid.n_x, self.grid.n_y, Direction::Forward);
        let scale = 1.0 / self.grid.len() as f64;
        apply_centering_phase(&mut values, self.grid.n_x, self.grid.n_y, scale);
        Ok(Field {
            grid: self.grid,
            repr: Repr::Spectral,
            values,
        })
    }

    /// Inverse transform; exact inverse of [`Field::to_spectral`] up to round-off.
    pub fn to_physical(&self) -> Result<Field, SpectralError> {
        if self.repr != Repr::Spectral {
            return Err(SpectralError::WrongRepresentation {
                expected: Repr::Spectral,
                got: self.repr,
            });
        }
        let mut values = self.values.clone();
        apply_centering_phase(&mut values, self.grid.n_x, self.grid.n_y, 1.0);
        fft2(&mut values, self.grid.n_x, self.grid.n_y, Direction::Inverse);
        Ok(Field {
            grid: self.grid,
            repr: Repr::Physical,
            values,
        })
    }

    /// Pointwise product with a spectral multiplier.
    pub fn apply_symbol(&self, symbol: &Symbol) -> Result<Field, SpectralError> {
        if self.repr != Repr::Spectral {
            return Err(SpectralError::WrongRepresentation {
                expected: Repr::Spectral,
                got: self.repr,
            });
        }
        if symbol.grid != self.grid {
            return Err(SpectralError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&symbol.values)
            .map(|(v, s)| v * s)
            .collect();
        Ok(Field {
            grid: self.grid,
            repr: Repr::Spectral,
            values,
        })
    }

    /// Sup norm of the values (either representation).
    pub fn norm_linf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Grid-quadrature L2 norm of a physical field.
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell()).sqrt()
    }
}

/// Diagonal Fourier multiplier over the wavenumber pairs of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    grid: Grid2D,
    values: Vec<C64>,
}

impl Symbol {
    pub fn grid(&self) -> Grid2D {
        self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
}

/// Zero-order multiplier `theta(xi) = ((1-2 beta) xi_1^2 + xi_2^2)/|xi|^2`,
/// i.e. `1 - 2 beta xi_1^2/|xi|^2`, acting on the transform of `|psi|^2`.
///
/// The zero mode is set to 1: the identity part of the split
/// `theta = 1 - 2 beta R_1^2` contributes 1 there while the Riesz part is
/// mean-free.  A constant-amplitude plane wave then reproduces the NLS phase
/// rotation exactly.
pub fn theta_symbol(grid: Grid2D, beta: f64) -> Symbol {
    grid.symbol(|xi1, xi2| {
        let q = xi1 * xi1 + xi2 * xi2;
        if q == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(1.0 - 2.0 * beta * xi1 * xi1 / q, 0.0)
        }
    })
}

/// Relative tolerance on the imaginary part of the density fed to
/// [`mean_flow_phi`].
const DENSITY_IMAG_TOL: f64 = 1e-8;

/// Mean flow `Phi` solving `Phi_xx + Phi_yy + 2 (|psi|^2)_xx = 0` spectrally:
/// `Phi_hat = -2 xi_1^2/|xi|^2 * g_hat`, zero mode set to 0 (mean-free).
pub fn mean_flow_phi(density: &Field) -> Result<Field, SpectralError> {
    if density.repr() != Repr::Physical {
        return Err(SpectralError::WrongRepresentation {
            expected: Repr::Physical,
            got: density.repr(),
        });
    }
    let scale = density.norm_linf();
    let max_imag = density
        .values()
        .iter()
        .map(|v| v.im.abs())
        .fold(0.0, f64::max);
    if max_imag > DENSITY_IMAG_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(SpectralError::ComplexDensity { max_imag });
    }
    let grid = density.grid();
    let hat = density.to_spectral()?;
    let symbol = grid.symbol(|xi1, xi2| {
        let q = xi1 * xi1 + xi2 * xi2;
        if q == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(-2.0 * xi1 * xi1 / q, 0.0)
        }
    });
    hat.apply_symbol(&symbol)?.to_physical()
}

/// Spectral truncation rule applied to nonlinear products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DealiasRule {
    /// No truncation (the reference setup resolves to machine precision).
    #[default]
    None,
    /// Zero all modes with signed index magnitude above `n/3` per axis.
    TwoThirds,
}

impl std::fmt::Display for DealiasRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DealiasRule::None => write!(f, "none"),
            DealiasRule::TwoThirds => write!(f, "two-thirds"),
        }
    }
}

impl std::str::FromStr for DealiasRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(DealiasRule::None),
            "two-thirds" | "two_thirds" => Ok(DealiasRule::TwoThirds),
            other => Err(format!("unknown dealias rule '{other}'")),
        }
    }
}

/// Apply a dealiasing rule in place to a spectral field.
pub fn dealias(field: &mut Field, rule: DealiasRule) -> Result<(), SpectralError> {
    if field.repr() != Repr::Spectral {
        return Err(SpectralError::WrongRepresentation {
            expected: Repr::Spectral,
            got: field.repr(),
        });
    }
    if rule == DealiasRule::None {
        return Ok(());
    }
    let grid = field.grid();
    let (cut_x, cut_y) = (grid.n_x() as i64 / 3, grid.n_y() as i64 / 3);
    let values = field.values_mut();
    for k_y in 0..grid.n_y() {
        let s_y = Grid2D::signed(k_y, grid.n_y()).abs();
        for k_x in 0..grid.n_x() {
            let s_x = Grid2D::signed(k_x, grid.n_x()).abs();
            if s_x > cut_x || s_y > cut_y {
                values[k_y * grid.n_x() + k_x] = C64::new(0.0, 0.0);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: Direction) -> Arc<dyn rustfft::Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    })
}

/// Unnormalized 2D FFT, rows then columns, in place.
fn fft2(values: &mut [C64], n_x: usize, n_y: usize, dir: Direction) {
    debug_assert_eq!(values.len(), n_x * n_y);
    let fft_x = plan(n_x, dir);
    let mut scratch = vec![C64::new(0.0, 0.0); fft_x.get_inplace_scratch_len()];
    for row in values.chunks_exact_mut(n_x) {
        fft_x.process_with_scratch(row, &mut scratch);
    }
    // Columns via transpose so the 1D transforms stay contiguous.
    let mut t = vec![C64::new(0.0, 0.0); values.len()];
    transpose(values, &mut t, n_x, n_y);
    let fft_y = plan(n_y, dir);
    scratch.resize(fft_y.get_inplace_scratch_len(), C64::new(0.0, 0.0));
    for col in t.chunks_exact_mut(n_y) {
        fft_y.process_with_scratch(col, &mut scratch);
    }
    transpose(&t, values, n_y, n_x);
}

/// Blocked out-of-place transpose of an `rows x cols` matrix (`cols` fastest).
fn transpose(src: &[C64], dst: &mut [C64], cols: usize, rows: usize) {
    const B: usize = 32;
    for ib in (0..rows).step_by(B) {
        for jb in (0..cols).step_by(B) {
            for i in ib..(ib + B).min(rows) {
                for j in jb..(jb + B).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// Multiply by `scale * (-1)^(k_x + k_y)`: accounts for the node origin at
/// `-halfwidth` so coefficients are true Fourier coefficients in `x`.
fn apply_centering_phase(values: &mut [C64], n_x: usize, n_y: usize, scale: f64) {
    for k_y in 0..n_y {
        let row = &mut values[k_y * n_x..(k_y + 1) * n_x];
        let row_sign = if k_y % 2 == 0 { 1.0 } else { -1.0 };
        for (k_x, v) in row.iter_mut().enumerate() {
            let s = if k_x % 2 == 0 { row_sign } else { -row_sign };
            *v *= s * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(grid: Grid2D) -> Field {
        grid.sample(|x, y| C64::new((-x * x - y * y).exp(), 0.0))
    }

    #[test]
    fn grid_examples() {
        let g = Grid2D::new(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        assert!((g.dx() - PI / 4.0).abs() < 1e-15);
        // wavenumbers are {-8,...,7} * 1/2
        assert!((g.xi1(1) - 0.5).abs() < 1e-15);
        assert!((g.xi1(8) - (-4.0)).abs() < 1e-15);
        assert!((g.xi1(15) - (-0.5)).abs() < 1e-15);
        assert_eq!(g.xi1(0), 0.0);

        let g = Grid2D::square(4096, 2.0 * PI).unwrap();
        assert!((g.m_x() - 2.0 * PI * 2.0 / 4096.0).abs() < 1e-15);
        assert!((g.m_x() - 3.068e-3).abs() < 1e-5);

        let g = Grid2D::new(1024, 4, 10.0 * PI, PI).unwrap();
        assert!((g.x(0) + 10.0 * PI).abs() < 1e-12);
        assert!((g.x(1023) - (10.0 * PI - 20.0 * PI / 1024.0)).abs() < 1e-12);

        // spacing * n == 2 * halfwidth exactly for power-of-two n
        assert_eq!(g.dx() * 1024.0, 20.0 * PI);
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(Grid2D::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(6, 2, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 1.0, -2.0).is_err());
    }

    #[test]
    fn constant_field_dc_mode() {
        let g = Grid2D::square(16, 2.0 * PI).unwrap();
        let a = C64::new(1.3, -0.4);
        let f = g.sample(|_, _| a).to_spectral().unwrap();
        assert!((f.values()[0] - a).norm() < 1e-14);
        for (k, v) in f.values().iter().enumerate().skip(1) {
            assert!(v.norm() < 1e-14, "mode {k} not zero: {v}");
        }
    }

    #[test]
    fn plane_wave_single_coefficient() {
        let g = Grid2D::square(32, 2.0 * PI).unwrap();
        let f = g
            .sample(|x, _| C64::new(0.0, x).exp())
            .to_spectral()
            .unwrap();
        // xi_1 = 1 sits at FFT index 2 (xi spacing is 1/2 on halfwidth 2 pi)
        let hit = g.index(2, 0);
        assert!((f.values()[hit] - C64::new(1.0, 0.0)).norm() < 1e-13);
        for (k, v) in f.values().iter().enumerate() {
            if k != hit {
                assert!(v.norm() < 1e-13, "mode {k} not zero: {v}");
            }
        }
    }

    #[test]
    fn gaussian_coefficients_reach_machine_precision() {
        // Production-size check: tail modes of exp(-x^2-y^2) at n=2^12.
        let g = Grid2D::square(4096, 2.0 * PI).unwrap();
        let f = gaussian(g).to_spectral().unwrap();
        let n = g.n_x();
        let mut tail_max: f64 = 0.0;
        // |xi| near the Nyquist range: outer 10% of indices on either axis.
        let lo = n / 2 - n / 20;
        let hi = n / 2 + n / 20;
        for k_y in 0..n {
            let in_y = (lo..hi).contains(&k_y);
            for k_x in 0..n {
                if in_y || (lo..hi).contains(&k_x) {
                    tail_max = tail_max.max(f.values()[g.index(k_x, k_y)].norm());
                }
            }
        }
        assert!(tail_max < 1e-13, "tail max {tail_max}");
    }

    #[test]
    fn symbol_application() {
        let g = Grid2D::square(32, 2.0 * PI).unwrap();
        let f = g
            .sample(|x, _| C64::new(x.sin(), 0.0))
            .to_spectral()
            .unwrap();

        let one = g.symbol(|_, _| C64::new(1.0, 0.0));
        let same = f.apply_symbol(&one).unwrap();
        assert_eq!(same, f);

        // i xi_1 turns sin x into cos x
        let ddx = g.symbol(|xi1, _| C64::new(0.0, xi1));
        let cosx = f.apply_symbol(&ddx).unwrap().to_physical().unwrap();
        for j in 0..g.n_x() {
            assert!((cosx.values()[g.index(j, 0)].re - g.x(j).cos()).abs() < 1e-12);
        }

        // applying (-xi_1^2 + xi_2^2) twice equals its square applied once
        let s = g.symbol(|xi1, xi2| C64::new(-xi1 * xi1 + xi2 * xi2, 0.0));
        let s2 = g.symbol(|xi1, xi2| {
            let v = -xi1 * xi1 + xi2 * xi2;
            C64::new(v * v, 0.0)
        });
        let twice = f.apply_symbol(&s).unwrap().apply_symbol(&s).unwrap();
        let once = f.apply_symbol(&s2).unwrap();
        for (a, b) in twice.values().iter().zip(once.values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn apply_symbol_rejects_grid_mismatch() {
        let g = Grid2D::square(16, 1.0).unwrap();
        let h = Grid2D::square(32, 1.0).unwrap();
        let f = Field::zeros(g, Repr::Spectral);
        let s = h.symbol(|_, _| C64::new(1.0, 0.0));
        assert!(matches!(
            f.apply_symbol(&s),
            Err(SpectralError::GridMismatch)
        ));
    }

    #[test]
    fn theta_values() {
        let g = Grid2D::square(16, PI).unwrap(); // integer wavenumbers
        let th = theta_symbol(g, 1.0);
        let at = |kx: usize, ky: usize| th.values()[g.index(kx, ky)].re;
        assert!((at(1, 0) - (-1.0)).abs() < 1e-15);
        assert!((at(0, 1) - 1.0).abs() < 1e-15);
        assert!((at(0, 0) - 1.0).abs() < 1e-15);
        let th_half = theta_symbol(g, 0.5);
        assert!((th_half.values()[g.index(1, 1)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_beta1_odd_under_axis_exchange() {
        let g = Grid2D::square(16, PI).unwrap();
        let th = theta_symbol(g, 1.0);
        for ky in 0..16 {
            for kx in 0..16 {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let a = th.values()[g.index(kx, ky)].re;
                let b = th.values()[g.index(ky, kx)].re;
                assert!((a + b).abs() < 1e-14, "theta not odd at ({kx},{ky})");
            }
        }
    }

    #[test]
    fn mean_flow_examples() {
        let g = Grid2D::square(64, PI).unwrap();
        // g = cos x -> Phi = -2 cos x
        let phi = mean_flow_phi(&g.sample(|x, _| C64::new(x.cos(), 0.0))).unwrap();
        for j in 0..g.n_x() {
            assert!((phi.values()[g.index(j, 0)].re - (-2.0 * g.x(j).cos())).abs() < 1e-12);
        }
        // g = cos y -> Phi = 0
        let phi = mean_flow_phi(&g.sample(|_, y| C64::new(y.cos(), 0.0))).unwrap();
        assert!(phi.norm_linf() < 1e-13);
    }

    #[test]
    fn mean_flow_defining_residual_and_mean() {
        let g = Grid2D::square(64, 2.0 * PI).unwrap();
        let dens = g.sample(|x, y| C64::new((-x * x - y * y).exp() * (1.0 + 0.3 * x.sin()), 0.0));
        let phi = mean_flow_phi(&dens).unwrap();

        // real to 1e-12 * |g|_inf and mean-free to round-off
        let max_im = phi.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(max_im < 1e-12 * dens.norm_linf());
        let mean: C64 = phi.values().iter().sum::<C64>() / g.len() as f64;
        assert!(mean.norm() < 1e-13);

        // residual of Phi_xx + Phi_yy + 2 g_xx on the grid
        let lap = g.symbol(|xi1, xi2| C64::new(-(xi1 * xi1 + xi2 * xi2), 0.0));
        let dxx = g.symbol(|xi1, _| C64::new(-xi1 * xi1, 0.0));
        let r1 = phi.to_spectral().unwrap().apply_symbol(&lap).unwrap();
        let r2 = dens.to_spectral().unwrap().apply_symbol(&dxx).unwrap();
        let mut max_res: f64 = 0.0;
        for (a, b) in r1.values().iter().zip(r2.values()) {
            max_res = max_res.max((a + 2.0 * b).norm());
        }
        assert!(max_res < 1e-10, "residual {max_res}");
    }

    #[test]
    fn mean_flow_rejects_complex_density() {
        let g = Grid2D::square(16, PI).unwrap();
        let bad = g.sample(|x, _| C64::new(1.0, 0.5 * x.cos()));
        assert!(matches!(
            mean_flow_phi(&bad),
            Err(SpectralError::ComplexDensity { .. })
        ));
    }

    #[test]
    fn dealias_rules() {
        let g = Grid2D::square(16, PI).unwrap();
        let mut f = gaussian(g).to_spectral().unwrap();
        let orig = f.clone();
        dealias(&mut f, DealiasRule::None).unwrap();
        assert_eq!(f, orig);

        dealias(&mut f, DealiasRule::TwoThirds).unwrap();
        // modes with |index| > 5 zeroed per axis for n = 16
        for k_y in 0..16 {
            for k_x in 0..16 {
                let sx = if k_x < 8 { k_x as i64 } else { k_x as i64 - 16 };
                let sy = if k_y < 8 { k_y as i64 } else { k_y as i64 - 16 };
                let v = f.values()[g.index(k_x, k_y)];
                if sx.abs() > 5 || sy.abs() > 5 {
                    assert_eq!(v, C64::new(0.0, 0.0));
                }
            }
        }
        // projection: applying twice = applying once
        let once = f.clone();
        dealias(&mut f, DealiasRule::TwoThirds).unwrap();
        assert_eq!(f, once);
    }

    #[test]
    fn wrong_representation_errors() {
        let g = Grid2D::square(8, 1.0).unwrap();
        let phys = Field::zeros(g, Repr::Physical);
        let spec = Field::zeros(g, Repr::Spectral);
        assert!(phys.to_physical().is_err());
        assert!(spec.to_spectral().is_err());
        assert!(phys.apply_symbol(&g.symbol(|_, _| C64::new(1.0, 0.0))).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn round_trip_identity(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid2D::square(64, 2.0 * PI).unwrap();
            let values: Vec<C64> = (0..g.len())
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = Field::new(g, Repr::Physical, values).unwrap();
            let back = f.to_spectral().unwrap().to_physical().unwrap();
            let linf = f.norm_linf();
            let mut err: f64 = 0.0;
            for (a, b) in f.values().iter().zip(back.values()) {
                err = err.max((a - b).norm());
            }
            prop_assert!(err < 10.0 * f64::EPSILON * linf);
        }

        #[test]
        fn parseval(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid2D::new(32, 64, PI, 2.0 * PI).unwrap();
            let values: Vec<C64> = (0..g.len())
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = Field::new(g, Repr::Physical, values).unwrap();
            let phys = f.norm_l2().powi(2);
            let hat = f.to_spectral().unwrap();
            let area = 2.0 * g.halfwidth_x() * 2.0 * g.halfwidth_y();
            let spec: f64 = hat.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * area;
            prop_assert!((phys - spec).abs() < 1e-12 * phys.abs());
        }
    }
}
