//! Free-space Riesz potential convolution on a grid.
//!
//! The kernel `A|x|^{α-N}` is sampled on every pairwise difference of grid
//! nodes, zero-padded to `2n` points per axis and transformed once. A
//! convolution is then one pruned forward FFT, a pointwise product and one
//! pruned inverse FFT.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use sha2::{Digest, Sha256};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fft::{self, Pruning};
use crate::grid::{Field, GridSpec, MAX_DIM};

/// Default ceiling on the padded transform buffer, in bytes.
pub const DEFAULT_MEMORY_CAP: usize = 2 << 30;

const PAD: usize = 2;

/// Normalization `Γ((N-α)/2) / (Γ(α/2) 2^α π^{N/2})` of the Riesz kernel.
pub fn riesz_constant(alpha: f64, dim: usize) -> Result<f64> {
    let n = dim as f64;
    if !(alpha > 0.0 && alpha < n) {
        return Err(Error::InvalidParameter(format!(
            "Riesz constraint 0 < alpha < N violated: alpha = {alpha}, N = {dim}"
        )));
    }
    Ok(gamma((n - alpha) / 2.0)
        / (gamma(alpha / 2.0) * 2f64.powf(alpha) * std::f64::consts::PI.powf(n / 2.0)))
}

/// Volume of the unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let n = dim as f64;
    std::f64::consts::PI.powf(n / 2.0) / gamma(n / 2.0 + 1.0)
}

/// Sampled kernel shared by the FFT and direct paths.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    dim: usize,
    alpha: f64,
    riesz_a: f64,
    spacing: f64,
    truncation: f64,
    origin: f64,
}

impl Kernel {
    fn new(grid: &GridSpec, alpha: f64) -> Result<Self> {
        let riesz_a = riesz_constant(alpha, grid.dim())?;
        let dim = grid.dim();
        let n = dim as f64;
        let cell = grid.cell_volume();
        let omega = unit_ball_volume(dim);
        let r_c = (cell / omega).powf(1.0 / n);
        Ok(Self {
            dim,
            alpha,
            riesz_a,
            spacing: grid.spacing(),
            truncation: grid.length() * n.sqrt(),
            origin: riesz_a * n * omega * r_c.powf(alpha) / (alpha * cell),
        })
    }

    /// Kernel value at the integer offset `steps` (in units of h).
    fn at(&self, steps: &[i64]) -> f64 {
        let m2: i64 = steps.iter().map(|s| s * s).sum();
        if m2 == 0 {
            return self.origin;
        }
        let r = self.spacing * (m2 as f64).sqrt();
        if r > self.truncation {
            0.0
        } else {
            self.riesz_a * r.powf(self.alpha - self.dim as f64)
        }
    }
}

/// Precomputed multiplier of the truncated Riesz kernel for one grid and α.
#[derive(Debug, Clone)]
pub struct RieszPlan {
    grid: GridSpec,
    kernel: Kernel,
    multiplier: Vec<f64>,
}

impl RieszPlan {
    pub fn new(grid: GridSpec, alpha: f64) -> Result<Self> {
        Self::with_memory_cap(grid, alpha, DEFAULT_MEMORY_CAP)
    }

    pub fn with_memory_cap(grid: GridSpec, alpha: f64, memory_cap: usize) -> Result<Self> {
        let kernel = Kernel::new(&grid, alpha)?;
        let dim = grid.dim();
        let n = grid.points();
        let len = PAD * n;
        let total = len
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::TooLarge(format!("padded transform for {grid} overflows")))?;
        let bytes = total.saturating_mul(std::mem::size_of::<Complex64>());
        if bytes > memory_cap {
            return Err(Error::TooLarge(format!(
                "padded transform for {grid} needs {bytes} bytes, cap is {memory_cap}"
            )));
        }

        let mut data: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut steps = [0i64; MAX_DIM];
                let mut rest = flat;
                for slot in steps[..dim].iter_mut().rev() {
                    let j = rest % len;
                    rest /= len;
                    // Offset n is never a pairwise difference of box nodes.
                    if j == n {
                        return Complex64::new(0.0, 0.0);
                    }
                    *slot = fft::signed_frequency(j, len);
                }
                Complex64::new(kernel.at(&steps[..dim]), 0.0)
            })
            .collect();
        fft::transform(&mut data, len, dim, false, Pruning::None);

        let scale = grid.cell_volume() / total as f64;
        let multiplier = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mirror = negated_index(flat, len, dim);
                0.5 * (data[flat].re + data[mirror].re) * scale
            })
            .collect();
        Ok(Self {
            grid,
            kernel,
            multiplier,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha
    }

    pub fn riesz_a(&self) -> f64 {
        self.kernel.riesz_a
    }

    pub fn pad_factor(&self) -> usize {
        PAD
    }

    pub fn truncation_radius(&self) -> f64 {
        self.kernel.truncation
    }

    /// Kernel value assigned to the cell containing the origin.
    pub fn origin_value(&self) -> f64 {
        self.kernel.origin
    }

    /// Multiplier on the padded Fourier grid, row-major with `2n` points per axis.
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// Hex SHA-256 of the multiplier bytes.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.multiplier {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// `h^N Σ_j K(x_i - x_j) g_j` via the padded FFT.
    pub fn convolve(&self, g: &Field) -> Result<Field> {
        self.grid.check_same(g.grid())?;
        let dim = self.grid.dim();
        let n = self.grid.points();
        let len = PAD * n;
        let total = len.pow(dim as u32);
        let src = g.values();

        let mut data: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|flat| match inner_index(flat, len, n, dim) {
                Some(i) => Complex64::new(src[i], 0.0),
                None => Complex64::new(0.0, 0.0),
            })
            .collect();
        fft::transform(
            &mut data,
            len,
            dim,
            false,
            Pruning::ZeroPaddedInput { live: n },
        );
        data.par_iter_mut()
            .zip(self.multiplier.par_iter())
            .for_each(|(z, m)| *z *= *m);
        fft::transform(
            &mut data,
            len,
            dim,
            true,
            Pruning::CroppedOutput { live: n },
        );

        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| data[outer_index(i, len, n, dim)].re)
            .collect();
        Field::from_values(self.grid, values)
    }
}

/// Direct `O(n^{2N})` evaluation of the same discrete convolution.
pub fn riesz_convolve_direct(grid: &GridSpec, alpha: f64, g: &Field) -> Result<Field> {
    grid.check_same(g.grid())?;
    if grid.len() > 4096 {
        return Err(Error::TooLarge(format!(
            "direct convolution is limited to 4096 nodes, {grid} has {}",
            grid.len()
        )));
    }
    let kernel = Kernel::new(grid, alpha)?;
    let dim = grid.dim();
    let cell = grid.cell_volume();
    let src = g.values();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut xi = [0usize; MAX_DIM];
            grid.multi_index(i, &mut xi);
            let mut acc = 0.0;
            let mut xj = [0usize; MAX_DIM];
            let mut steps = [0i64; MAX_DIM];
            for (j, &gj) in src.iter().enumerate() {
                grid.multi_index(j, &mut xj);
                for k in 0..dim {
                    steps[k] = xi[k] as i64 - xj[k] as i64;
                }
                acc += kernel.at(&steps[..dim]) * gj;
            }
            cell * acc
        })
        .collect();
    Field::from_values(*grid, values)
}

fn negated_index(flat: usize, len: usize, dim: usize) -> usize {
    let mut rest = flat;
    let mut out = 0;
    let mut stride = 1;
    for _ in 0..dim {
        let j = rest % len;
        rest /= len;
        out += ((len - j) % len) * stride;
        stride *= len;
    }
    out
}

/// Grid index of a padded index, if it lies in the live block.
fn inner_index(flat: usize, len: usize, n: usize, dim: usize) -> Option<usize> {
    let mut rest = flat;
    let mut out = 0;
    let mut stride = 1;
    for _ in 0..dim {
        let j = rest % len;
        if j >= n {
            return None;
        }
        rest /= len;
        out += j * stride;
        stride *= n;
    }
    Some(out)
}

fn outer_index(flat: usize, len: usize, n: usize, dim: usize) -> usize {
    let mut rest = flat;
    let mut out = 0;
    let mut stride = 1;
    for _ in 0..dim {
        out += (rest % n) * stride;
        rest /= n;
        stride *= len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: GridSpec, rng: &mut ChaCha8Rng) -> Field {
        let values = (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Field::from_values(grid, values).unwrap()
    }

    fn max_rel(a: &Field, b: &Field) -> f64 {
        let scale = b.max_abs().max(f64::MIN_POSITIVE);
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
            / scale
    }

    #[test]
    fn constants() {
        assert!((riesz_constant(2.0, 3).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((riesz_constant(1.0, 3).unwrap() - 1.0 / (2.0 * PI * PI)).abs() < 1e-16);
        assert!(riesz_constant(3.0, 3).is_err());
        assert!(riesz_constant(0.0, 3).is_err());
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn origin_cell_value() {
        let g = GridSpec::new(3, 16.0, 64).unwrap();
        let plan = RieszPlan::new(g, 2.0).unwrap();
        let omega = 4.0 * PI / 3.0;
        let h3 = 0.25f64.powi(3);
        let r_c = (h3 / omega).cbrt();
        let expected = 3.0 * omega * r_c * r_c / (2.0 * h3) / (4.0 * PI);
        assert!((plan.origin_value() - expected).abs() / expected < 1e-14);
        assert_eq!(plan.multiplier().len(), 128usize.pow(3));
        assert!(plan.multiplier().iter().all(|m| m.is_finite()));
    }

    #[test]
    fn multiplier_is_symmetric() {
        let g = GridSpec::new(3, 4.0, 8).unwrap();
        let plan = RieszPlan::new(g, 1.3).unwrap();
        let m = plan.multiplier();
        for i in 0..m.len() {
            assert_eq!(m[i], m[negated_index(i, 16, 3)]);
        }
    }

    #[test]
    fn fft_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (dim, n, alpha) in [(3, 8, 2.0), (2, 16, 0.7), (3, 8, 1.0), (4, 8, 3.1)] {
            let g = GridSpec::new(dim, 5.0, n).unwrap();
            let plan = RieszPlan::new(g, alpha).unwrap();
            let u = random_field(g, &mut rng);
            let fast = plan.convolve(&u).unwrap();
            let slow = riesz_convolve_direct(&g, alpha, &u).unwrap();
            assert!(max_rel(&fast, &slow) < 1e-12, "dim {dim} alpha {alpha}");
        }
    }

    #[test]
    fn delta_input_reproduces_kernel() {
        let g = GridSpec::new(3, 4.0, 8).unwrap();
        let mut u = Field::zeros(g);
        u.values_mut()[0] = 1.0 / g.cell_volume();
        let out = riesz_convolve_direct(&g, 2.0, &u).unwrap();
        assert!((out.values()[0] - RieszPlan::new(g, 2.0).unwrap().origin_value()).abs() < 1e-12);
        let r = g.spacing();
        assert!((out.values()[1] - 1.0 / (4.0 * PI * r)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GridSpec::new(3, 6.0, 8).unwrap();
        let plan = RieszPlan::new(g, 1.5).unwrap();
        let u = random_field(g, &mut rng);
        let w = random_field(g, &mut rng);
        let lhs = plan.convolve(&u).unwrap().dot(&w);
        let rhs = u.dot(&plan.convolve(&w).unwrap());
        assert!((lhs - rhs).abs() / lhs.abs() < 1e-12);
        assert!(plan.convolve(&Field::zeros(g)).unwrap().max_abs() == 0.0);
        let a = riesz_convolve_direct(&g, 1.5, &u.scaled(2.0)).unwrap();
        let b = riesz_convolve_direct(&g, 1.5, &u).unwrap().scaled(2.0);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_oversized_problems() {
        let g = GridSpec::new(3, 4.0, 32).unwrap();
        assert!(RieszPlan::with_memory_cap(g, 2.0, 1 << 20).is_err());
        assert!(riesz_convolve_direct(&g, 2.0, &Field::zeros(g)).is_err());
        let other = GridSpec::new(3, 5.0, 8).unwrap();
        let plan = RieszPlan::new(GridSpec::new(3, 4.0, 8).unwrap(), 2.0).unwrap();
        assert!(plan.convolve(&Field::zeros(other)).is_err());
    }
}
