//! Dyadic frequency decomposition: annulus bump characters, block operators
//! `P_j`, partial sums `S_nu`, and block-based Holder-Zygmund norm estimates.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VecField};

/// Smooth bump `exp(1 - 1/(1-s^2))` on (-1, 1), normalized so chi(0) = 1.
fn chi(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Radial frequency character: a fixed smooth bump supported on the open
/// annulus `1/2 < rho < 2`, normalized so that its dyadic shifts partition
/// unity: `sum_j profile(2^-j rho) = 1` for every `rho > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LPChar;

impl LPChar {
    pub fn standard() -> Self {
        LPChar
    }

    /// Normalized bump value at frequency magnitude `rho`.
    pub fn profile(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let s = rho.log2();
        let num = chi(s);
        if num == 0.0 {
            return 0.0;
        }
        // Dyadic shifts with |s - m| < 1; at most two are nonzero. Summing in
        // ascending m keeps the denominator bit-identical across shifts of s.
        let lo = (s - 1.0).floor() as i64;
        let hi = (s + 1.0).ceil() as i64;
        let mut den = 0.0;
        for m in lo..=hi {
            den += chi(s - m as f64);
        }
        num / den
    }

    /// Frequency multiplier of block `j` at magnitude `rho`. Block 0 is the
    /// complementary low-pass `1 - sum_{j>=1} profile(2^-j rho)`.
    pub fn multiplier(&self, j: usize, rho: f64) -> f64 {
        if j == 0 {
            if rho <= 0.0 {
                return 1.0;
            }
            let mut s = 0.0;
            // Nonzero shifts need 1/2 < 2^-j rho < 2, i.e. j in (log2(rho)-1, log2(rho)+1).
            let l = rho.log2();
            let lo = ((l - 1.0).floor() as i64).max(1);
            let hi = (l + 1.0).ceil() as i64;
            for jj in lo..=hi {
                s += self.profile(rho / (1u64 << jj.max(0)) as f64);
            }
            1.0 - s
        } else {
            self.profile(rho / (1u64 << j) as f64)
        }
    }

    /// Largest fully resolved block index on `grid`.
    pub fn j_max(&self, grid: &GridSpec) -> usize {
        let n = grid.points_per_axis();
        ((n / 2) as f64).log2().floor() as usize - 1
    }

    /// Combined multiplier of the partial sum `S_nu` at magnitude `rho`.
    pub fn partial_multiplier(&self, nu: usize, rho: f64) -> f64 {
        let mut s = 0.0;
        for j in 0..=nu {
            s += self.multiplier(j, rho);
        }
        s
    }
}

fn apply_multiplier(
    f: &ScalarField,
    mult: impl Fn(f64) -> f64,
) -> ScalarField {
    let spec = f.spectrum();
    apply_multiplier_spec(f.grid(), &spec, mult)
}

/// Multiply a precomputed spectrum by a radial multiplier and invert.
pub fn apply_multiplier_spec(
    grid: &GridSpec,
    spec: &[Complex<f64>],
    mult: impl Fn(f64) -> f64,
) -> ScalarField {
    let out: Vec<Complex<f64>> = spec
        .iter()
        .enumerate()
        .map(|(i, c)| c * mult(grid.freq_mag(i)))
        .collect();
    ScalarField::from_spectrum(*grid, out)
}

fn check_block(char_: &LPChar, grid: &GridSpec, j: usize) -> Result<()> {
    let jm = char_.j_max(grid);
    if j > jm {
        return Err(Error::BlockOutOfRange { index: j, max: jm });
    }
    Ok(())
}

/// Frequency block `P_j f`.
pub fn lp_block(f: &ScalarField, j: usize, char_: &LPChar) -> Result<ScalarField> {
    check_block(char_, f.grid(), j)?;
    Ok(apply_multiplier(f, |rho| char_.multiplier(j, rho)))
}

/// Low-pass partial sum `S_nu f = sum_{j<=nu} P_j f`.
pub fn lp_partial_sum(f: &ScalarField, nu: usize, char_: &LPChar) -> Result<ScalarField> {
    check_block(char_, f.grid(), nu)?;
    Ok(apply_multiplier(f, |rho| char_.partial_multiplier(nu, rho)))
}

/// All blocks `P_0 f ... P_jmax f` computed from a single forward transform.
pub fn lp_all_blocks(f: &ScalarField, char_: &LPChar) -> Vec<ScalarField> {
    let jm = char_.j_max(f.grid());
    let spec = f.spectrum();
    (0..=jm)
        .map(|j| apply_multiplier_spec(f.grid(), &spec, |rho| char_.multiplier(j, rho)))
        .collect()
}

/// Dyadic-block norm data: `per_block[j] = 2^{j(m+alpha)} sup |P_j f|`.
#[derive(Debug, Clone)]
pub struct HZNorm {
    pub m: i32,
    pub alpha: f64,
    pub value: f64,
    pub per_block: Vec<f64>,
}

/// Block-weighted norm estimate of smoothness class `(m, alpha)` with
/// `m in {-1, 0, 1}` and `0 < alpha < 1`. The grid max of each block is a
/// lower bound for the true sup.
pub fn hz_norm(f: &ScalarField, m: i32, alpha: f64, char_: &LPChar) -> Result<HZNorm> {
    if !(-1..=1).contains(&m) {
        return Err(Error::Range(format!("m = {m} not in -1..=1")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Range(format!("alpha = {alpha} not in (0,1)")));
    }
    let blocks = lp_all_blocks(f, char_);
    let per_block: Vec<f64> = blocks
        .iter()
        .enumerate()
        .map(|(j, b)| 2f64.powf(j as f64 * (m as f64 + alpha)) * b.sup_norm())
        .collect();
    let value = per_block.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(HZNorm { m, alpha, value, per_block })
}

/// Smooth radial plateau: 1 inside `inner_radius`, 0 outside `outer_radius`,
/// glued by the standard `exp(-1/t)` smoothstep. Distances are measured on
/// the torus.
pub fn apply_cutoff(
    f: &ScalarField,
    center: &[f64],
    inner_radius: f64,
    outer_radius: f64,
) -> Result<ScalarField> {
    let grid = *f.grid();
    let l = grid.box_side();
    if !(0.0 < inner_radius && inner_radius < outer_radius && outer_radius < l / 2.0) {
        return Err(Error::CutoffRadii { inner: inner_radius, outer: outer_radius, box_side: l });
    }
    let bump = cutoff_field(grid, center, inner_radius, outer_radius)?;
    f.mul(&bump)
}

/// The cutoff bump itself as a field.
pub fn cutoff_field(
    grid: GridSpec,
    center: &[f64],
    inner_radius: f64,
    outer_radius: f64,
) -> Result<ScalarField> {
    let l = grid.box_side();
    if !(0.0 < inner_radius && inner_radius < outer_radius && outer_radius < l / 2.0) {
        return Err(Error::CutoffRadii { inner: inner_radius, outer: outer_radius, box_side: l });
    }
    if center.len() < grid.dim() {
        return Err(Error::Range("cutoff center has too few coordinates".into()));
    }
    let c: Vec<f64> = center[..grid.dim()].to_vec();
    Ok(ScalarField::from_fn(grid, |p| {
        cutoff_value(p, &c, inner_radius, outer_radius, l)
    }))
}

pub(crate) fn cutoff_value(p: &[f64], center: &[f64], inner: f64, outer: f64, period: f64) -> f64 {
    let mut r2 = 0.0;
    for (x, c) in p.iter().zip(center) {
        let mut d = (x - c).abs() % period;
        if d > period / 2.0 {
            d = period - d;
        }
        r2 += d * d;
    }
    smoothstep((outer - r2.sqrt()) / (outer - inner))
}

pub(crate) fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g = |u: f64| (-1.0 / u).exp();
        g(t) / (g(t) + g(1.0 - t))
    }
}

/// Direct dyadic-scale oscillation estimate `sup_scales scale^-alpha osc(scale)`
/// measured by whole-cell grid shifts. Test oracle for the block norm.
pub fn holder_quotient_estimate(f: &ScalarField, alpha: f64) -> f64 {
    let grid = *f.grid();
    let n = grid.points_per_axis();
    let mut best: f64 = 0.0;
    let mut shift_cells = 1usize;
    while shift_cells <= n / 4 {
        let scale = shift_cells as f64 * grid.cell();
        let mut osc: f64 = 0.0;
        for axis in 0..grid.dim() {
            for i in 0..grid.len() {
                let mut iv = grid.multi(i);
                iv[axis] = (iv[axis] + shift_cells) % n;
                let j = grid.flat(iv);
                osc = osc.max((f.values()[i] - f.values()[j]).abs());
            }
        }
        best = best.max(scale.powf(-alpha) * osc);
        shift_cells *= 2;
    }
    best
}

/// Gradient of every component by spectral differentiation:
/// `out[c][a] = d comp_c / d x_a`.
pub fn vec_gradient(v: &VecField) -> Result<Vec<Vec<ScalarField>>> {
    let dim = v.grid().dim();
    v.comps()
        .iter()
        .map(|c| (0..dim).map(|a| c.derivative(a)).collect())
        .collect()
}
