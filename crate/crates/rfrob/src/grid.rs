//! Periodic-grid scalar and vector fields with discrete Fourier transforms.
//!
//! Fields live on a torus box `[0, box_side)^dim` sampled at `n` points per
//! axis (`n` a power of two, `dim` in 1..=3), stored row-major with the last
//! axis contiguous. Spectra use the convention
//! `f(x) = sum_k fhat_k exp(2 pi i k.x / box_side)` so coefficient magnitudes
//! are mode amplitudes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Discretization of the working box: `dim` axes, `n` points per axis,
/// torus period `box_side`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    box_side: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, box_side: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim {dim} not in 1..=3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n {n} must be a power of two >= 4")));
        }
        if !(box_side > 0.0) || !box_side.is_finite() {
            return Err(Error::InvalidGrid(format!("box_side {box_side} must be positive")));
        }
        Ok(GridSpec { dim, n, box_side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_side(&self) -> f64 {
        self.box_side
    }

    pub fn cell(&self) -> f64 {
        self.box_side / self.n as f64
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major flat index of a multi-index (unused trailing axes ignored).
    pub fn flat(&self, iv: [usize; 3]) -> usize {
        let mut idx = 0;
        for a in 0..self.dim {
            idx = idx * self.n + iv[a];
        }
        idx
    }

    /// Multi-index of a flat index.
    pub fn multi(&self, mut flat: usize) -> [usize; 3] {
        let mut iv = [0usize; 3];
        for a in (0..self.dim).rev() {
            iv[a] = flat % self.n;
            flat /= self.n;
        }
        iv
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let iv = self.multi(flat);
        let h = self.cell();
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = iv[a] as f64 * h;
        }
        p
    }

    /// Signed integer wavenumber along each axis for a flat spectral index.
    pub fn wavenumber(&self, flat: usize) -> [i64; 3] {
        let iv = self.multi(flat);
        let mut k = [0i64; 3];
        let half = (self.n / 2) as i64;
        for a in 0..self.dim {
            let i = iv[a] as i64;
            k[a] = if i <= half { i } else { i - self.n as i64 };
        }
        k
    }

    /// Euclidean magnitude of the physical frequency `|k| / box_side`.
    pub fn freq_mag(&self, flat: usize) -> f64 {
        let k = self.wavenumber(flat);
        let mut s = 0.0;
        for a in 0..self.dim {
            s += (k[a] * k[a]) as f64;
        }
        s.sqrt() / self.box_side
    }
}

// Cached FFT plans keyed by (length, inverse).
fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().unwrap();
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

fn fft_axes(grid: &GridSpec, data: &mut [Complex<f64>], inverse: bool) {
    let n = grid.n;
    let fft = plan(n, inverse);
    let total = grid.len();
    let mut scratch = vec![Complex::new(0.0, 0.0); n];
    // Transform along each axis; axis `a` has stride n^(dim-1-a).
    for a in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - a) as u32);
        let lines = total / n;
        for line in 0..lines {
            // Decompose line index into (outer, inner) around the axis.
            let inner = line % stride;
            let outer = line / stride;
            let base = outer * stride * n + inner;
            if stride == 1 {
                fft.process(&mut data[base..base + n]);
            } else {
                for i in 0..n {
                    scratch[i] = data[base + i * stride];
                }
                fft.process(&mut scratch);
                for i in 0..n {
                    data[base + i * stride] = scratch[i];
                }
            }
        }
    }
}

/// Real scalar samples on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "value length {} != grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite value in field".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..grid.dim])
            })
            .collect();
        ScalarField { grid, values }
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

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Forward DFT; coefficients are mode amplitudes.
    pub fn spectrum(&self) -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> =
            self.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft_axes(&self.grid, &mut data, false);
        let scale = 1.0 / self.grid.len() as f64;
        for c in &mut data {
            *c *= scale;
        }
        data
    }

    /// Inverse DFT of mode amplitudes; imaginary residue is discarded.
    pub fn from_spectrum(grid: GridSpec, mut spec: Vec<Complex<f64>>) -> Self {
        fft_axes(&grid, &mut spec, true);
        let values = spec.iter().map(|c| c.re).collect();
        ScalarField { grid, values }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(ScalarField { grid: self.grid, values })
    }

    pub fn axpy(&self, alpha: f64, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(ScalarField { grid: self.grid, values })
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields on different grids".into()));
        }
        Ok(())
    }

    /// Partial derivative along `axis` by spectral differentiation.
    pub fn derivative(&self, axis: usize) -> Result<ScalarField> {
        if axis >= self.grid.dim {
            return Err(Error::Range(format!("axis {axis} >= dim {}", self.grid.dim)));
        }
        let mut spec = self.spectrum();
        let two_pi = std::f64::consts::TAU / self.grid.box_side;
        let n = self.grid.n as i64;
        for (i, c) in spec.iter_mut().enumerate() {
            let k = self.grid.wavenumber(i)[axis];
            // The Nyquist mode has no well-defined sign; drop it from the
            // derivative to keep the output real.
            let k = if 2 * k.abs() == n { 0 } else { k };
            *c *= Complex::new(0.0, two_pi * k as f64);
        }
        Ok(ScalarField::from_spectrum(self.grid, spec))
    }

    /// Fraction of spectral l2 mass at frequencies above `freq`.
    pub fn spectral_mass_above(&self, freq: f64) -> f64 {
        let spec = self.spectrum();
        let mut hi = 0.0;
        let mut total = 0.0;
        for (i, c) in spec.iter().enumerate() {
            let m = c.norm_sqr();
            total += m;
            if self.grid.freq_mag(i) > freq {
                hi += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            hi / total
        }
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Serialize as `dim,n,box_side` header plus one row-major value per line.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "dim,n,box_side")?;
        writeln!(w, "{},{},{:.17e}", self.grid.dim, self.grid.n, self.grid.box_side)?;
        writeln!(w, "value")?;
        for v in &self.values {
            writeln!(w, "{:.17e}", v)?;
        }
        Ok(())
    }

    pub fn read_csv(r: &mut impl std::io::Read) -> Result<ScalarField> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != "dim,n,box_side" {
            return Err(Error::InvalidGrid("bad csv header".into()));
        }
        let meta = lines.next().ok_or_else(|| Error::InvalidGrid("missing meta row".into()))?;
        let parts: Vec<&str> = meta.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidGrid("bad meta row".into()));
        }
        let dim: usize = parts[0].trim().parse().map_err(|_| Error::InvalidGrid("bad dim".into()))?;
        let n: usize = parts[1].trim().parse().map_err(|_| Error::InvalidGrid("bad n".into()))?;
        let box_side: f64 =
            parts[2].trim().parse().map_err(|_| Error::InvalidGrid("bad box_side".into()))?;
        let grid = GridSpec::new(dim, n, box_side)?;
        let col = lines.next().unwrap_or_default();
        if col.trim() != "value" {
            return Err(Error::InvalidGrid("missing value column header".into()));
        }
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(line.parse().map_err(|_| Error::InvalidGrid("bad value".into()))?);
        }
        ScalarField::new(grid, values)
    }

    /// Binary layout: magic `RFRB`, u32 dim, u32 n, f64 box_side, then
    /// row-major f64 values, all little-endian.
    pub fn write_binary(&self, w: &mut impl std::io::Write) -> Result<()> {
        w.write_all(b"RFRB")?;
        w.write_all(&(self.grid.dim as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.box_side.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl std::io::Read) -> Result<ScalarField> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"RFRB" {
            return Err(Error::InvalidGrid("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let box_side = f64::from_le_bytes(b8);
        let grid = GridSpec::new(dim, n, box_side)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        ScalarField::new(grid, values)
    }
}

/// Vector field as one [`ScalarField`] per component, all on the same grid.
#[derive(Debug, Clone)]
pub struct VecField {
    comps: Vec<ScalarField>,
}

impl VecField {
    pub fn new(comps: Vec<ScalarField>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::InvalidGrid("vector field needs at least one component".into()));
        }
        for c in &comps[1..] {
            comps[0].check_same_grid(c)?;
        }
        Ok(VecField { comps })
    }

    pub fn from_fn(grid: GridSpec, ncomp: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut comps = vec![Vec::with_capacity(grid.len()); ncomp];
        let mut out = vec![0.0; ncomp];
        for i in 0..grid.len() {
            let p = grid.point(i);
            out.iter_mut().for_each(|v| *v = 0.0);
            f(&p[..grid.dim], &mut out);
            for (c, v) in comps.iter_mut().zip(&out) {
                c.push(*v);
            }
        }
        VecField {
            comps: comps
                .into_iter()
                .map(|values| ScalarField { grid, values })
                .collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.comps[0].grid()
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    /// Grid sup of the pointwise Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        let len = self.grid().len();
        let mut m: f64 = 0.0;
        for i in 0..len {
            let mut s = 0.0;
            for c in &self.comps {
                let v = c.values()[i];
                s += v * v;
            }
            m = m.max(s.sqrt());
        }
        m
    }

    pub fn axpy(&self, alpha: f64, other: &VecField) -> Result<VecField> {
        if self.ncomp() != other.ncomp() {
            return Err(Error::GridMismatch("component count mismatch".into()));
        }
        let comps: Result<Vec<_>> = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.axpy(alpha, b))
            .collect();
        Ok(VecField { comps: comps? })
    }

    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        let g = self.grid();
        writeln!(w, "dim,n,box_side,ncomp")?;
        writeln!(w, "{},{},{:.17e},{}", g.dim(), g.points_per_axis(), g.box_side(), self.ncomp())?;
        let header: Vec<String> = (0..self.ncomp()).map(|i| format!("c{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..g.len() {
            let row: Vec<String> =
                self.comps.iter().map(|c| format!("{:.17e}", c.values()[i])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Random real field band-limited to `|k| <= kmax`, unit-normalized in sup.
pub fn random_band_limited(
    grid: GridSpec,
    kmax: usize,
    rng: &mut impl rand::Rng,
) -> ScalarField {
    use rand::distributions::Distribution;
    let normal = rand::distributions::Uniform::new(-1.0, 1.0);
    let len = grid.len();
    let mut spec = vec![Complex::new(0.0, 0.0); len];
    for i in 0..len {
        let k = grid.wavenumber(i);
        let mag2: i64 = (0..grid.dim()).map(|a| k[a] * k[a]).sum();
        if mag2 == 0 || mag2 > (kmax * kmax) as i64 {
            continue;
        }
        if spec[i].norm_sqr() != 0.0 {
            continue; // already set as a conjugate partner
        }
        let c = Complex::new(normal.sample(rng), normal.sample(rng));
        // Conjugate-symmetric partner index: negate each axis index mod n.
        let iv = grid.multi(i);
        let mut jv = [0usize; 3];
        let n = grid.points_per_axis();
        for a in 0..grid.dim() {
            jv[a] = (n - iv[a]) % n;
        }
        let j = grid.flat(jv);
        if j == i {
            spec[i] = Complex::new(c.re, 0.0);
        } else {
            spec[i] = c;
            spec[j] = c.conj();
        }
    }
    let f = ScalarField::from_spectrum(grid, spec);
    let m = f.sup_norm();
    if m > 0.0 {
        f.scale(1.0 / m)
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn roundtrip_fft_1d() {
        let grid = GridSpec::new(1, 64, 1.0).unwrap();
        let f = ScalarField::from_fn(grid, |p| (std::f64::consts::TAU * 3.0 * p[0]).sin());
        let g = ScalarField::from_spectrum(grid, f.spectrum());
        assert!(f.max_abs_diff(&g).unwrap() < 1e-12);
    }

    #[test]
    fn roundtrip_fft_2d() {
        let grid = GridSpec::new(2, 32, 2.0).unwrap();
        let f = ScalarField::from_fn(grid, |p| {
            (std::f64::consts::TAU * p[0]).sin() + (std::f64::consts::TAU * 2.0 * p[1]).cos()
        });
        let g = ScalarField::from_spectrum(grid, f.spectrum());
        assert!(f.max_abs_diff(&g).unwrap() < 1e-12);
    }

    #[test]
    fn spectral_derivative_matches_analytic() {
        let grid = GridSpec::new(1, 128, 1.0).unwrap();
        let f = ScalarField::from_fn(grid, |p| (std::f64::consts::TAU * 5.0 * p[0]).sin());
        let df = f.derivative(0).unwrap();
        let exact = ScalarField::from_fn(grid, |p| {
            std::f64::consts::TAU * 5.0 * (std::f64::consts::TAU * 5.0 * p[0]).cos()
        });
        assert!(df.max_abs_diff(&exact).unwrap() < 1e-9);
    }

    #[test]
    fn single_mode_spectrum_amplitude() {
        let grid = GridSpec::new(1, 64, 1.0).unwrap();
        let f = ScalarField::from_fn(grid, |p| (std::f64::consts::TAU * 4.0 * p[0]).sin());
        let spec = f.spectrum();
        // sin(2 pi 4 x) = (e^{i..} - e^{-i..}) / 2i: amplitude 1/2 at |k| = 4.
        let mut found = 0;
        for (i, c) in spec.iter().enumerate() {
            if c.norm() > 1e-12 {
                assert_eq!(grid.wavenumber(i)[0].abs(), 4);
                assert!((c.norm() - 0.5).abs() < 1e-12);
                found += 1;
            }
        }
        assert_eq!(found, 2);
    }

    #[test]
    fn random_band_limited_respects_band() {
        let grid = GridSpec::new(2, 64, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let f = random_band_limited(grid, 8, &mut rng);
        assert!(f.spectral_mass_above(8.0) < 1e-24);
        assert!((f.sup_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_binary_roundtrip() {
        let grid = GridSpec::new(1, 16, 1.0).unwrap();
        let f = ScalarField::from_fn(grid, |p| p[0] * p[0] - 0.3);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = ScalarField::read_csv(&mut buf.as_slice()).unwrap();
        assert!(f.max_abs_diff(&g).unwrap() < 1e-15);
        let mut bin = Vec::new();
        f.write_binary(&mut bin).unwrap();
        let h = ScalarField::read_binary(&mut bin.as_slice()).unwrap();
        assert_eq!(f.values(), h.values());
    }
}
