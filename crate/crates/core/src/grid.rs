//! Periodic box discretization: grids, sampled fields, quadrature, spectral
//! derivatives and dilation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, Pruning};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 6;

/// Chunk length for deterministic parallel reductions.
const SUM_CHUNK: usize = 4096;

/// Sum a slice in fixed-size chunks so the result does not depend on the
/// number of worker threads.
pub(crate) fn det_sum(values: &[f64]) -> f64 {
    if values.len() <= SUM_CHUNK {
        return values.iter().sum();
    }
    let partial: Vec<f64> = values
        .par_chunks(SUM_CHUNK)
        .map(|c| c.iter().sum())
        .collect();
    partial.iter().sum()
}

/// Like [`det_sum`] over `f(i)` for `i in 0..len`.
pub(crate) fn det_sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(SUM_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * SUM_CHUNK).min(len);
            (c * SUM_CHUNK..end).map(&f).sum()
        })
        .collect();
    partial.iter().sum()
}

/// Uniform cubic grid on `[-L/2, L/2)^N` with nodes at cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    length: f64,
    points: usize,
    spacing: f64,
}

impl GridSpec {
    pub fn new(dim: usize, length: f64, points: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be at least 2, got {dim}"
            )));
        }
        if dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} exceeds the supported maximum {MAX_DIM}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        if points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even so no node sits at the origin, got {points}"
            )));
        }
        if points < 8 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be at least 8, got {points}"
            )));
        }
        Ok(Self {
            dim,
            length,
            points,
            spacing: length / points as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes, `n^N`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of node `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + (i as f64 + 0.5) * self.spacing
    }

    /// Axis indices of a flat (row-major) node index.
    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        let mut rest = flat;
        for slot in out[..self.dim].iter_mut().rev() {
            *slot = rest % self.points;
            rest /= self.points;
        }
    }

    /// Coordinates of a flat node index.
    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for slot in out[..self.dim].iter_mut().rev() {
            *slot = self.coordinate(rest % self.points);
            rest /= self.points;
        }
    }

    /// Angular wavenumber `2πk/L` for Fourier index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * fft::signed_frequency(i, self.points) as f64 / self.length
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid(N={}, L={}, n={})",
            self.dim, self.length, self.points
        )
    }
}

/// Real scalar function sampled on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, {grid} needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f` at every node.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let dim = grid.dim();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; MAX_DIM];
                grid.node(i, &mut x);
                f(&x[..dim])
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F>(&self, f: F) -> Field
    where
        F: Fn(f64) -> f64 + Sync,
    {
        Field {
            grid: self.grid,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Field) -> Field {
        Field {
            grid: self.grid,
            values: self
                .values
                .par_iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// Grid inner product `h^N Σ u_i v_i`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume()
            * det_sum_by(self.values.len(), |i| self.values[i] * other.values[i])
    }

    /// `‖u‖₂²` by the rectangle rule.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `h^N Σ u_i`.
pub fn quadrature(u: &Field) -> f64 {
    u.grid.cell_volume() * det_sum(&u.values)
}

fn forward_spectrum(u: &Field) -> Vec<Complex64> {
    let g = u.grid;
    let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform(&mut data, g.points(), g.dim(), false, Pruning::None);
    data
}

fn squared_wavenumbers(g: &GridSpec) -> Vec<f64> {
    (0..g.points()).map(|i| g.wavenumber(i).powi(2)).collect()
}

fn total_sq_wavenumber(g: &GridSpec, axis_k2: &[f64], flat: usize) -> f64 {
    let mut rest = flat;
    let mut k2 = 0.0;
    for _ in 0..g.dim() {
        k2 += axis_k2[rest % g.points()];
        rest /= g.points();
    }
    k2
}

/// Apply a Fourier multiplier that depends only on `|κ|²`, `κ = 2πk/L`.
pub(crate) fn apply_isotropic_multiplier<F>(u: &Field, multiplier: F) -> Field
where
    F: Fn(f64) -> f64 + Sync,
{
    let g = u.grid;
    let axis_k2 = squared_wavenumbers(&g);
    let mut data = forward_spectrum(u);
    data.par_iter_mut().enumerate().for_each(|(i, z)| {
        *z *= multiplier(total_sq_wavenumber(&g, &axis_k2, i));
    });
    fft::transform(&mut data, g.points(), g.dim(), true, Pruning::None);
    let scale = 1.0 / g.len() as f64;
    Field {
        grid: g,
        values: data.iter().map(|z| z.re * scale).collect(),
    }
}

/// `‖∇u‖₂²` computed spectrally with Parseval normalization.
pub fn gradient_sq_norm(u: &Field) -> f64 {
    let g = u.grid;
    let axis_k2 = squared_wavenumbers(&g);
    let spectrum = forward_spectrum(u);
    let sum = det_sum_by(spectrum.len(), |i| {
        total_sq_wavenumber(&g, &axis_k2, i) * spectrum[i].norm_sqr()
    });
    g.cell_volume() * sum / g.len() as f64
}

/// Spectral Laplacian, multiplier `-|2πk/L|²`.
pub fn laplacian(u: &Field) -> Field {
    apply_isotropic_multiplier(u, |k2| -k2)
}

/// `u(·/t)` by multilinear interpolation, zero outside the sampled nodes.
pub fn dilate(u: &Field, t: f64) -> Result<Field> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dilation factor must be positive and finite, got {t}"
        )));
    }
    if t == 1.0 {
        return Ok(u.clone());
    }
    let g = u.grid;
    let dim = g.dim();
    let n = g.points() as isize;
    let h = g.spacing();
    let half = 0.5 * g.length();
    let src = &u.values;
    let values = (0..g.len())
        .into_par_iter()
        .map(|flat| {
            let mut x = [0.0; MAX_DIM];
            g.node(flat, &mut x);
            let mut base = [0isize; MAX_DIM];
            let mut frac = [0.0; MAX_DIM];
            for k in 0..dim {
                let xi = (x[k] / t + half) / h - 0.5;
                if !(xi > -1.0 && xi < n as f64) {
                    return 0.0;
                }
                let fl = xi.floor();
                base[k] = fl as isize;
                frac[k] = xi - fl;
            }
            let mut acc = 0.0;
            'corner: for corner in 0..(1usize << dim) {
                let mut weight = 1.0;
                let mut index = 0usize;
                for k in 0..dim {
                    let up = (corner >> (dim - 1 - k)) & 1 == 1;
                    let i = base[k] + up as isize;
                    if i < 0 || i >= n {
                        continue 'corner;
                    }
                    weight *= if up { frac[k] } else { 1.0 - frac[k] };
                    index = index * n as usize + i as usize;
                }
                acc += weight * src[index];
            }
            acc
        })
        .collect();
    Ok(Field { grid: g, values })
}

/// `u(·/t)` by band-limited (periodic sinc) interpolation, zero outside the box.
///
/// The interpolant is separable, so it is applied one axis at a time.
pub fn dilate_band_limited(u: &Field, t: f64) -> Result<Field> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dilation factor must be positive and finite, got {t}"
        )));
    }
    if t == 1.0 {
        return Ok(u.clone());
    }
    let g = u.grid;
    let n = g.points();
    let h = g.spacing();
    let half = 0.5 * g.length();
    let nf = n as f64;
    let mut weights = vec![0.0; n * n];
    for j in 0..n {
        let y = g.coordinate(j) / t;
        if y.abs() > half {
            continue;
        }
        for i in 0..n {
            let delta = (y - g.coordinate(i)) / h;
            weights[j * n + i] = if (delta - delta.round()).abs() < 1e-13 {
                if delta.round() == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let a = std::f64::consts::PI * delta;
                a.sin() / (nf * (a / nf).tan())
            };
        }
    }
    let mut values = u.values.clone();
    for axis in 0..g.dim() {
        let stride = n.pow((g.dim() - 1 - axis) as u32);
        let src = values;
        values = (0..g.len())
            .into_par_iter()
            .map(|flat| {
                let j = (flat / stride) % n;
                let base = flat - j * stride;
                let row = &weights[j * n..(j + 1) * n];
                row.iter()
                    .enumerate()
                    .map(|(i, w)| w * src[base + i * stride])
                    .sum()
            })
            .collect();
    }
    Ok(Field { grid: g, values })
}

/// Fraction of `∫u²` carried by nodes with some `|x_k| ≥ 0.45 L`.
pub fn tail_mass_fraction(u: &Field) -> f64 {
    let g = u.grid;
    let cutoff = 0.45 * g.length();
    let dim = g.dim();
    let total = det_sum_by(g.len(), |i| u.values[i] * u.values[i]);
    if total == 0.0 {
        return 0.0;
    }
    let outer = det_sum_by(g.len(), |i| {
        let mut x = [0.0; MAX_DIM];
        g.node(i, &mut x);
        if x[..dim].iter().any(|c| c.abs() >= cutoff) {
            u.values[i] * u.values[i]
        } else {
            0.0
        }
    });
    outer / total
}

/// JSON sidecar describing a raw field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSidecar {
    pub dim: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
    pub offset: String,
    pub order: String,
}

/// Path of the sidecar written next to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Raw little-endian bytes of the field values.
pub fn field_bytes(u: &Field) -> Vec<u8> {
    u.values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Write `path` (raw little-endian f64) and `path.json` (sidecar).
pub fn write_field_dump(u: &Field, path: &Path) -> Result<()> {
    fs::write(path, field_bytes(u)).map_err(|e| Error::io(path, e))?;
    let sidecar = FieldSidecar {
        dim: u.grid.dim(),
        length: u.grid.length(),
        n: u.grid.points(),
        offset: "half-cell".into(),
        order: "row-major".into(),
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))
}

/// Read a dump written by [`write_field_dump`].
pub fn read_field_dump(path: &Path) -> Result<Field> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: FieldSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", side.display())))?;
    if sidecar.offset != "half-cell" || sidecar.order != "row-major" {
        return Err(Error::Config(format!(
            "{}: unsupported layout offset={:?} order={:?}",
            side.display(),
            sidecar.offset,
            sidecar.order
        )));
    }
    let grid = GridSpec::new(sidecar.dim, sidecar.length, sidecar.n)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Config(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            8 * grid.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Field::from_values(grid, values)
}
