//! Lie brackets by spectral differentiation, low-pass smoothing sequences of
//! cutoff fields with growth/decay reports, commuting canonical bases, span
//! defects of brackets against a basis, and the flow-commutator defect.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::flow::{integrate_one, pt, AnalyticVF, BoxRegion, Pt, TrigPoly1d};
use crate::grid::{GridSpec, ScalarField, VecField};
use crate::spectral::{cutoff_value, vec_gradient, LPChar};
use crate::stats::{linear_fit, LineFit};

/// Lie bracket `X . grad Y - Y . grad X` with spectral derivatives.
/// Inputs must share a grid and be resolved (band-limited or smoothed).
pub fn lie_bracket(x: &VecField, y: &VecField) -> Result<VecField> {
    if x.grid() != y.grid() || x.ncomp() != y.ncomp() {
        return Err(Error::GridMismatch("bracket needs matching grids and components".into()));
    }
    let dim = x.grid().dim();
    if x.ncomp() != dim {
        return Err(Error::GridMismatch(format!(
            "bracket needs dim-{dim} fields, got {} components",
            x.ncomp()
        )));
    }
    let gx = vec_gradient(x)?;
    let gy = vec_gradient(y)?;
    let len = x.grid().len();
    let mut comps = Vec::with_capacity(dim);
    for l in 0..dim {
        let mut values = vec![0.0; len];
        for i in 0..dim {
            let xi = x.comp(i).values();
            let yi = y.comp(i).values();
            let dyl = gy[l][i].values();
            let dxl = gx[l][i].values();
            for (p, v) in values.iter_mut().enumerate() {
                *v += xi[p] * dyl[p] - yi[p] * dxl[p];
            }
        }
        comps.push(ScalarField::new(*x.grid(), values)?);
    }
    VecField::new(comps)
}

/// Radial cutoff specification on the torus grid.
#[derive(Debug, Clone, Copy)]
pub struct CutoffSpec {
    pub center: Pt,
    pub inner: f64,
    pub outer: f64,
}

impl CutoffSpec {
    pub fn value(&self, p: &[f64], period: f64) -> f64 {
        cutoff_value(p, &self.center[..p.len()], self.inner, self.outer, period)
    }
}

fn sup_on_box(v: &VecField, region: &BoxRegion) -> f64 {
    let grid = v.grid();
    let mut sup: f64 = 0.0;
    for i in 0..grid.len() {
        let p = grid.point(i);
        if !region.contains(&p) {
            continue;
        }
        let mut s = 0.0;
        for c in v.comps() {
            s += c.values()[i] * c.values()[i];
        }
        sup = sup.max(s.sqrt());
    }
    sup
}

fn grad_sup_on_box(v: &VecField, region: &BoxRegion) -> Result<f64> {
    let grads = vec_gradient(v)?;
    let grid = v.grid();
    let mut sup: f64 = 0.0;
    for i in 0..grid.len() {
        let p = grid.point(i);
        if !region.contains(&p) {
            continue;
        }
        let mut s = 0.0;
        for row in &grads {
            for g in row {
                s += g.values()[i] * g.values()[i];
            }
        }
        sup = sup.max(s.sqrt());
    }
    Ok(sup)
}

/// Low-pass smoothings `X_nu = S_nu(chi X)` of a cutoff field, with value and
/// first-derivative sup norms on an inner box where the cutoff is flat.
#[derive(Debug, Clone)]
pub struct SmoothingSequence {
    pub label: String,
    pub nus: Vec<usize>,
    pub fields: Vec<VecField>,
    /// Grid sup over the whole torus.
    pub c0_global: Vec<f64>,
    /// Sup over the inner box.
    pub c0_inner: Vec<f64>,
    /// Value + gradient sup over the inner box.
    pub c1_inner: Vec<f64>,
    /// Sup of the raw cutoff field (for the uniform-boundedness check).
    pub chi_field_sup: f64,
    pub c1_fit: LineFit,
    pub inner: BoxRegion,
}

/// Build the smoothing sequence of `field` on `grid`: sample `chi * field`,
/// apply the dyadic low-pass at each requested `nu`, and record norms. The
/// cutoff must be flat (identically 1) on `inner`.
pub fn build_smoothing_sequence(
    field: &AnalyticVF,
    grid: GridSpec,
    cutoff: &CutoffSpec,
    inner: BoxRegion,
    nus: &[usize],
    char_: &LPChar,
) -> Result<SmoothingSequence> {
    let jm = char_.j_max(&grid);
    if nus.is_empty() || nus.iter().any(|&n| n > jm) {
        return Err(Error::BlockOutOfRange { index: nus.iter().copied().max().unwrap_or(0), max: jm });
    }
    // Inner box must sit strictly inside the cutoff plateau.
    {
        let mut worst: f64 = 1.0;
        for i in 0..grid.len() {
            let p = grid.point(i);
            if inner.contains(&p) {
                worst = worst.min(cutoff.value(&p[..grid.dim()], grid.box_side()));
            }
        }
        if worst < 1.0 {
            return Err(Error::Precondition(format!(
                "cutoff not flat on the inner box (min {worst})"
            )));
        }
    }
    let dim = field.dim;
    let chi_field = VecField::from_fn(grid, dim, |p, out| {
        field.eval(p, out);
        let chi = cutoff.value(p, grid.box_side());
        for v in out.iter_mut() {
            *v *= chi;
        }
    });
    let chi_field_sup = chi_field.sup_norm();
    let spectra: Vec<_> = chi_field.comps().iter().map(|c| c.spectrum()).collect();

    let mut fields = Vec::with_capacity(nus.len());
    let mut c0_global = Vec::new();
    let mut c0_inner = Vec::new();
    let mut c1_inner = Vec::new();
    for &nu in nus {
        let comps: Vec<ScalarField> = spectra
            .iter()
            .map(|s| {
                crate::spectral::apply_multiplier_spec(&grid, s, |rho| {
                    char_.partial_multiplier(nu, rho)
                })
            })
            .collect();
        let v = VecField::new(comps)?;
        c0_global.push(v.sup_norm());
        c0_inner.push(sup_on_box(&v, &inner));
        c1_inner.push(sup_on_box(&v, &inner) + grad_sup_on_box(&v, &inner)?);
        fields.push(v);
    }
    let xs: Vec<f64> = nus.iter().map(|&n| n as f64).collect();
    let c1_fit = linear_fit(&xs, &c1_inner);
    Ok(SmoothingSequence {
        label: field.label.clone(),
        nus: nus.to_vec(),
        fields,
        c0_global,
        c0_inner,
        c1_inner,
        chi_field_sup,
        c1_fit,
        inner,
    })
}

/// Per-scale bracket sup norms of a smoothed pair together with the
/// exponential-weighted involutivity quantity.
#[derive(Debug, Clone)]
pub struct BracketReport {
    pub pair: String,
    pub nus: Vec<usize>,
    pub bracket_sup: Vec<f64>,
    pub c1_x: Vec<f64>,
    pub c1_y: Vec<f64>,
    pub slope: f64,
    pub floor_excluded: usize,
    pub t0: f64,
    /// bracket_sup * exp(t0 (c1_x + c1_y)) per nu.
    pub weighted: Vec<f64>,
    pub weighted_decreasing: bool,
}

fn slope_above_floor(nus: &[usize], sups: &[f64]) -> (f64, usize) {
    let pts: Vec<(f64, f64)> = nus
        .iter()
        .zip(sups)
        .filter(|(_, &s)| s > 1e-13)
        .map(|(&n, &s)| (n as f64, s.log2()))
        .collect();
    let excluded = nus.len() - pts.len();
    if pts.len() < 2 {
        return (0.0, excluded);
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    (linear_fit(&xs, &ys).slope, excluded)
}

/// Assemble a bracket report from per-scale norms; public for lean
/// pipelines that compute the norms without storing full grids.
pub fn bracket_report_from_norms(
    pair: String,
    nus: &[usize],
    bracket_sup: Vec<f64>,
    c1_x: Vec<f64>,
    c1_y: Vec<f64>,
    t0: f64,
    commuting_tol: f64,
) -> Result<BracketReport> {
    // Declared-commuting sanity gate at the finest scale.
    let finest = *bracket_sup.last().unwrap();
    let scale = c1_x.last().unwrap() * c1_y.last().unwrap();
    if finest > commuting_tol * scale.max(1e-300) {
        return Err(Error::Precondition(format!(
            "pair {pair} does not look commuting: finest bracket sup {finest:.3e} > {commuting_tol} x {scale:.3e}"
        )));
    }
    let (slope, floor_excluded) = slope_above_floor(nus, &bracket_sup);
    let weighted: Vec<f64> = bracket_sup
        .iter()
        .zip(c1_x.iter().zip(&c1_y))
        .map(|(&b, (&cx, &cy))| b * (t0 * (cx + cy)).exp())
        .collect();
    let weighted_decreasing = weighted.windows(2).all(|w| w[1] <= w[0]);
    Ok(BracketReport {
        pair,
        nus: nus.to_vec(),
        bracket_sup,
        c1_x,
        c1_y,
        slope,
        floor_excluded,
        t0,
        weighted,
        weighted_decreasing,
    })
}

/// Bracket decay of two grid smoothing sequences over their common window.
/// The underlying pair must be declared commuting; a loose finest-scale
/// check guards against misuse.
pub fn bracket_decay_report(
    seq_x: &SmoothingSequence,
    seq_y: &SmoothingSequence,
    gamma: f64,
    t0: f64,
) -> Result<BracketReport> {
    if seq_x.nus != seq_y.nus {
        return Err(Error::Precondition("sequences on different nu windows".into()));
    }
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::Range(format!("gamma = {gamma} not in (0, 1)")));
    }
    let mut bracket_sup = Vec::with_capacity(seq_x.nus.len());
    for (fx, fy) in seq_x.fields.iter().zip(&seq_y.fields) {
        let br = lie_bracket(fx, fy)?;
        bracket_sup.push(sup_on_box(&br, &seq_x.inner));
    }
    bracket_report_from_norms(
        format!("{}|{}", seq_x.label, seq_y.label),
        &seq_x.nus,
        bracket_sup,
        seq_x.c1_inner.clone(),
        seq_y.c1_inner.clone(),
        t0,
        0.05,
    )
}

/// Smoothed profile: low-pass the 1-d samples at scale `nu` and return the
/// exact trigonometric polynomial.
pub fn smoothed_profile_poly(samples: &ScalarField, nu: usize, char_: &LPChar) -> Result<TrigPoly1d> {
    let grid = *samples.grid();
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid("profile samples must be one-dimensional".into()));
    }
    let jm = char_.j_max(&grid);
    if nu > jm {
        return Err(Error::BlockOutOfRange { index: nu, max: jm });
    }
    let spec = samples.spectrum();
    let filtered: Vec<_> = spec
        .iter()
        .enumerate()
        .map(|(i, c)| c * char_.partial_multiplier(nu, grid.freq_mag(i)))
        .collect();
    let kmax = ((1u64 << (nu + 1)) as f64 * grid.box_side()).ceil() as usize;
    Ok(TrigPoly1d::from_spectrum(grid.box_side(), &filtered, kmax))
}

/// Bracket report for a pair of profile-based commuting basis fields
/// `X_j = e_j + p_j(y) e_last`: the bracket is the profile cross term
/// `(p1 p2' - p2 p1') e_last`, evaluated densely from the exact polynomials.
/// Used for ambient dimensions where full-grid smoothing is unaffordable.
pub fn canonical_profile_pair_report(
    polys_x: &[(usize, TrigPoly1d)],
    polys_y: &[(usize, TrigPoly1d)],
    t0: f64,
) -> Result<BracketReport> {
    if polys_x.len() != polys_y.len() || polys_x.is_empty() {
        return Err(Error::Precondition("profile windows differ".into()));
    }
    let nus: Vec<usize> = polys_x.iter().map(|(n, _)| *n).collect();
    let mut bracket_sup = Vec::new();
    let mut c1_x = Vec::new();
    let mut c1_y = Vec::new();
    for ((nx, px), (ny, py)) in polys_x.iter().zip(polys_y) {
        if nx != ny {
            return Err(Error::Precondition("profile windows differ".into()));
        }
        let n = 16 * (px.kmax().max(py.kmax()) + 1);
        let mut sup: f64 = 0.0;
        for i in 0..n {
            let y = i as f64 / n as f64;
            let w = px.value(y) * py.derivative(y) - py.value(y) * px.derivative(y);
            sup = sup.max(w.abs());
        }
        bracket_sup.push(sup);
        c1_x.push((1.0 + px.sup_value().powi(2)).sqrt() + px.sup_derivative());
        c1_y.push((1.0 + py.sup_value().powi(2)).sqrt() + py.sup_derivative());
    }
    bracket_report_from_norms("canonical-profile".into(), &nus, bracket_sup, c1_x, c1_y, t0, 0.05)
}

/// Commuting local basis in triangular form `X_j = e_j + sum_k b_j^k e_{r+k}`
/// obtained from `r` source fields by inverting their leading r x r
/// coefficient block pointwise.
#[derive(Debug, Clone)]
pub struct CanonicalBasis {
    pub r: usize,
    pub n: usize,
    /// b[j][k]: coefficient of the (r+k)-th direction in the j-th field.
    pub b: Vec<Vec<ScalarField>>,
    /// Assembled fields (multilinear interpolation of the b grids).
    pub fields: Vec<AnalyticVF>,
    pub base: Pt,
    pub working_box: BoxRegion,
    pub cond_at_base: f64,
    /// min |det A| over the working box divided by |det A(base)|.
    pub min_det_ratio: f64,
}

/// Construct the triangular commuting basis from source fields. The leading
/// r x r block of the sources must be invertible at the base point
/// (condition number < 1e6); the working box is halved (up to 6 times)
/// until `min |det A| >= 0.1 |det A(base)|` on the box.
pub fn canonical_basis(sources: &[VecField], base: &[f64]) -> Result<CanonicalBasis> {
    if sources.is_empty() {
        return Err(Error::Precondition("need at least one source field".into()));
    }
    let grid = *sources[0].grid();
    let n = grid.dim();
    let r = sources.len();
    if r > n {
        return Err(Error::Precondition(format!("rank {r} exceeds ambient dimension {n}")));
    }
    for s in sources {
        if s.grid() != &grid || s.ncomp() != n {
            return Err(Error::GridMismatch("sources must share grid and have n components".into()));
        }
    }
    let base_pt = pt(base);
    // Nearest grid node to the base point.
    let h = grid.cell();
    let npts = grid.points_per_axis();
    let mut iv = [0usize; 3];
    for a in 0..n {
        let i = (base_pt[a] / h).round() as i64;
        iv[a] = i.rem_euclid(npts as i64) as usize;
    }
    let base_flat = grid.flat(iv);

    let a_at = |flat: usize| -> DMatrix<f64> {
        DMatrix::from_fn(r, r, |j, l| sources[j].comp(l).values()[flat])
    };
    let a0 = a_at(base_flat);
    let svd0 = a0.clone().svd(false, false);
    let smax = svd0.singular_values.max();
    let smin = svd0.singular_values.min();
    if smin <= 0.0 || smax / smin >= 1e6 {
        return Err(Error::NotTransverse(format!(
            "leading block condition number {} at base; apply a linear change of variables",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let cond_at_base = smax / smin;
    let det0 = a0.determinant().abs();

    // Shrink the working box until the determinant stays comparable.
    let full = {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        let side = grid.box_side();
        for a in 0..n {
            lo[a] = base_pt[a] - side / 2.0;
            hi[a] = base_pt[a] + side / 2.0;
        }
        BoxRegion { dim: n, lo, hi }
    };
    let mut working_box = full;
    let mut min_ratio = 0.0;
    let mut ok = false;
    for _ in 0..=6 {
        let mut min_det = f64::MAX;
        let mut any = false;
        for i in 0..grid.len() {
            let mut p = grid.point(i);
            // Compare positions modulo the torus period against the box.
            let side = grid.box_side();
            for a in 0..n {
                while p[a] > working_box.hi[a] {
                    p[a] -= side;
                }
                while p[a] < working_box.lo[a] {
                    p[a] += side;
                }
            }
            if working_box.contains(&p) {
                any = true;
                min_det = min_det.min(a_at(i).determinant().abs());
            }
        }
        if any && min_det >= 0.1 * det0 {
            min_ratio = min_det / det0;
            ok = true;
            break;
        }
        working_box = working_box.shrink(0.5);
    }
    if !ok {
        return Err(Error::NotTransverse(
            "leading block degenerates near the base point even after shrinking".into(),
        ));
    }

    // b = A^{-1} c at every grid point.
    let len = grid.len();
    let mut b_values = vec![vec![vec![0.0f64; len]; n - r]; r];
    for i in 0..len {
        let a = a_at(i);
        let lu = a.lu();
        for k in 0..(n - r) {
            let c = DMatrix::from_fn(r, 1, |j, _| sources[j].comp(r + k).values()[i]);
            match lu.solve(&c) {
                Some(sol) => {
                    for j in 0..r {
                        b_values[j][k][i] = sol[(j, 0)];
                    }
                }
                None => {
                    return Err(Error::NotTransverse(format!(
                        "leading block singular at grid point {i}"
                    )))
                }
            }
        }
    }
    let b: Vec<Vec<ScalarField>> = b_values
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|vals| ScalarField::new(grid, vals))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    // The triangular coefficients must vanish at the base cell.
    let mut bsup: f64 = 0.0;
    for row in &b {
        for f in row {
            bsup = bsup.max(f.sup_norm());
        }
    }
    for row in &b {
        for f in row {
            if f.values()[base_flat].abs() > 1e-8 * (1.0 + bsup) {
                return Err(Error::Precondition(format!(
                    "coefficients do not vanish at the base point: {}",
                    f.values()[base_flat]
                )));
            }
        }
    }

    // Assemble interpolating fields X_j = e_j + sum_k b_j^k e_{r+k}.
    let mut fields = Vec::with_capacity(r);
    for j in 0..r {
        let mut comps = Vec::with_capacity(n);
        for l in 0..n {
            if l < r {
                let v = if l == j { 1.0 } else { 0.0 };
                comps.push(ScalarField::from_fn(grid, |_| v));
            } else {
                comps.push(b[j][l - r].clone());
            }
        }
        let vf = VecField::new(comps)?;
        fields.push(
            AnalyticVF::grid_interp(vf, &format!("canonical:{j}")).with_domain(working_box),
        );
    }

    Ok(CanonicalBasis {
        r,
        n,
        b,
        fields,
        base: base_pt,
        working_box,
        cond_at_base,
        min_det_ratio: min_ratio,
    })
}

/// Pointwise least-squares residual of a bracket field against the span of
/// basis fields, with rank diagnostics.
#[derive(Debug, Clone)]
pub struct SpanDefect {
    pub residual: ScalarField,
    pub min_singular_value: f64,
    pub deficient_fraction: f64,
}

/// At each grid point, project `bracket` onto span(basis) by truncated-SVD
/// least squares (relative cutoff 1e-10) and return the residual norms.
pub fn span_defect(bracket: &VecField, basis: &[VecField]) -> Result<SpanDefect> {
    if basis.is_empty() {
        return Err(Error::Precondition("empty basis".into()));
    }
    let grid = *bracket.grid();
    let n = grid.dim();
    let r = basis.len();
    for b in basis {
        if b.grid() != &grid || b.ncomp() != n {
            return Err(Error::GridMismatch("basis fields must match the bracket grid".into()));
        }
    }
    let len = grid.len();
    let mut residual = vec![0.0f64; len];
    let mut min_sigma = f64::MAX;
    let mut deficient = 0usize;
    for i in 0..len {
        let bmat = DMatrix::from_fn(n, r, |row, col| basis[col].comp(row).values()[i]);
        let rhs = DMatrix::from_fn(n, 1, |row, _| bracket.comp(row).values()[i]);
        let svd = bmat.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        min_sigma = min_sigma.min(smin);
        if smin <= 1e-10 * smax.max(1e-300) {
            deficient += 1;
        }
        let sol = svd.solve(&rhs, 1e-10 * smax.max(1e-300)).map_err(|e| {
            Error::Precondition(format!("svd solve failed at point {i}: {e}"))
        })?;
        let mut res = 0.0;
        for row in 0..n {
            let mut v = rhs[(row, 0)];
            for col in 0..r {
                v -= bmat[(row, col)] * sol[(col, 0)];
            }
            res += v * v;
        }
        residual[i] = res.sqrt();
    }
    let fraction = deficient as f64 / len as f64;
    if fraction > 0.001 {
        return Err(Error::RankDeficient { fraction: 100.0 * fraction });
    }
    Ok(SpanDefect {
        residual: ScalarField::new(grid, residual)?,
        min_singular_value: min_sigma,
        deficient_fraction: fraction,
    })
}

/// Known growth data for the commutator bound of a smoothed pair.
#[derive(Debug, Clone, Copy)]
pub struct CommutatorBoundData {
    pub c1_x: f64,
    pub c1_y: f64,
    pub bracket_sup: f64,
}

#[derive(Debug, Clone)]
pub struct CommutatorDefectReport {
    pub measured: f64,
    /// |t s| e^{|t| c1_x + |s| c1_y} bracket_sup, when growth data is known.
    pub bound: Option<f64>,
    pub richardson: f64,
    pub pass: Option<bool>,
}

/// Defect `sup_p |F_X^t F_Y^s F_X^{-t}(p) - F_Y^s(p)|` over the seeds,
/// measured at step `h` and `h/2`.
pub fn flow_commutator_defect(
    x: &AnalyticVF,
    y: &AnalyticVF,
    t: f64,
    s: f64,
    seeds: &[Pt],
    step: f64,
    bound_data: Option<CommutatorBoundData>,
) -> Result<CommutatorDefectReport> {
    let dim = x.dim;
    let compose = |h: f64| -> Result<(f64, Vec<Pt>)> {
        let mut defect: f64 = 0.0;
        let mut ends = Vec::with_capacity(seeds.len());
        for (i, p) in seeds.iter().enumerate() {
            let a1 = integrate_one(x, p, -t, h, i)?;
            let a2 = integrate_one(y, &a1, s, h, i)?;
            let a3 = integrate_one(x, &a2, t, h, i)?;
            let b = integrate_one(y, p, s, h, i)?;
            let mut d = 0.0;
            for c in 0..dim {
                d += (a3[c] - b[c]) * (a3[c] - b[c]);
            }
            defect = defect.max(d.sqrt());
            ends.push(a3);
        }
        Ok((defect, ends))
    };
    let (_, ends_h) = compose(step)?;
    let (defect, ends_h2) = compose(step / 2.0)?;
    let mut richardson: f64 = 0.0;
    for (a, b) in ends_h.iter().zip(&ends_h2) {
        let mut d = 0.0;
        for c in 0..dim {
            d += (a[c] - b[c]) * (a[c] - b[c]);
        }
        richardson = richardson.max(d.sqrt());
    }
    let bound = bound_data
        .map(|bd| (t * s).abs() * (t.abs() * bd.c1_x + s.abs() * bd.c1_y).exp() * bd.bracket_sup);
    let pass = bound.map(|b| defect <= 1.05 * b);
    Ok(CommutatorDefectReport { measured: defect, bound, richardson, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::random_band_limited;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid2(n: usize) -> GridSpec {
        GridSpec::new(2, n, 1.0).unwrap()
    }

    #[test]
    fn bracket_antisymmetry_and_self() {
        let grid = grid2(64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fx = random_band_limited(grid, 8, &mut rng);
        let fy = random_band_limited(grid, 8, &mut rng);
        let gx = random_band_limited(grid, 8, &mut rng);
        let gy = random_band_limited(grid, 8, &mut rng);
        let x = VecField::new(vec![fx.clone(), fy.clone()]).unwrap();
        let y = VecField::new(vec![gx, gy]).unwrap();
        let xy = lie_bracket(&x, &y).unwrap();
        let yx = lie_bracket(&y, &x).unwrap();
        let sum = xy.axpy(1.0, &yx).unwrap();
        assert!(sum.sup_norm() < 1e-10);
        let xx = lie_bracket(&x, &x).unwrap();
        assert!(xx.sup_norm() < 1e-12);
    }

    #[test]
    fn bracket_hand_example() {
        // X = e1 constant, Y = (0, x): [X, Y] = (0, 1).
        let grid = grid2(32);
        let x = VecField::from_fn(grid, 2, |_, out| {
            out[0] = 1.0;
            out[1] = 0.0;
        });
        let y = VecField::from_fn(grid, 2, |p, out| {
            out[0] = 0.0;
            // Use a resolved periodic version of x1 with unit derivative at 0.25:
            // sin(2 pi x)/2 pi has derivative cos(2 pi x).
            out[1] = (std::f64::consts::TAU * p[0]).sin() / std::f64::consts::TAU;
        });
        let br = lie_bracket(&x, &y).unwrap();
        // At x = 0: derivative is exactly 1.
        let at0 = br.comp(1).values()[0];
        assert!((at0 - 1.0).abs() < 1e-10);
        assert!(br.comp(0).sup_norm() < 1e-12);
    }

    #[test]
    fn bracket_of_shears_vanishes() {
        // Profile shears (f(y), 0), (g(y), 0): coefficients independent of x.
        let grid = grid2(128);
        let x = VecField::from_fn(grid, 2, |p, out| {
            out[0] = (std::f64::consts::TAU * p[1]).sin();
            out[1] = 0.0;
        });
        let y = VecField::from_fn(grid, 2, |p, out| {
            out[0] = (std::f64::consts::TAU * 2.0 * p[1]).cos();
            out[1] = 0.0;
        });
        let br = lie_bracket(&x, &y).unwrap();
        assert!(br.sup_norm() < 1e-9);
    }

    #[test]
    fn jacobi_identity_on_smooth_triple() {
        let grid = grid2(128);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mk = |rng: &mut ChaCha8Rng| {
            VecField::new(vec![
                random_band_limited(grid, 8, rng),
                random_band_limited(grid, 8, rng),
            ])
            .unwrap()
        };
        let x = mk(&mut rng);
        let y = mk(&mut rng);
        let z = mk(&mut rng);
        let a = lie_bracket(&x, &lie_bracket(&y, &z).unwrap()).unwrap();
        let b = lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap();
        let c = lie_bracket(&z, &lie_bracket(&x, &y).unwrap()).unwrap();
        let sum = a.axpy(1.0, &b).unwrap().axpy(1.0, &c).unwrap();
        assert!(sum.sup_norm() < 1e-8, "jacobi residual {}", sum.sup_norm());
    }

    #[test]
    fn canonical_basis_identity_on_canonical_input() {
        // Source already triangular: returned basis identical.
        let grid = GridSpec::new(2, 64, 1.0).unwrap();
        let src = VecField::from_fn(grid, 2, |p, out| {
            out[0] = 1.0;
            out[1] = (std::f64::consts::TAU * p[1]).sin() * 0.1;
        });
        let cb = canonical_basis(&[src.clone()], &[0.0, 0.0]).unwrap();
        assert_eq!(cb.r, 1);
        assert!(cb.b[0][0].max_abs_diff(src.comp(1)).unwrap() < 1e-12);
        assert!(cb.cond_at_base < 10.0);
    }

    #[test]
    fn canonical_basis_rescales_scalar_source() {
        // (2, 2 y log|y|) reduces to (1, y log|y|).
        let grid = GridSpec::new(2, 256, 1.0).unwrap();
        let tooth = |y: f64| {
            let s = y - 0.5;
            if s == 0.0 {
                0.0
            } else {
                s * (1.0 / s.abs()).ln() * crate::spectral::smoothstep((0.4 - s.abs()) / 0.05)
            }
        };
        let src = VecField::from_fn(grid, 2, |p, out| {
            out[0] = 2.0;
            out[1] = 2.0 * tooth(p[1]);
        });
        let cb = canonical_basis(&[src], &[0.5, 0.5]).unwrap();
        let want = ScalarField::from_fn(grid, |p| tooth(p[1]));
        assert!(cb.b[0][0].max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn canonical_basis_proportional_pair_commutes() {
        // Y1 = e1 + c(y) e3, Y2 = e2 + 2 c(y) e3 in R^3: already triangular,
        // and the assembled bracket vanishes identically on the grid.
        let grid = GridSpec::new(3, 32, 1.0).unwrap();
        let c = |y: f64| 0.2 * (std::f64::consts::TAU * y).sin();
        let y1 = VecField::from_fn(grid, 3, |p, out| {
            out[0] = 1.0;
            out[1] = 0.0;
            out[2] = c(p[2]);
        });
        let y2 = VecField::from_fn(grid, 3, |p, out| {
            out[0] = 0.0;
            out[1] = 1.0;
            out[2] = 2.0 * c(p[2]);
        });
        let cb = canonical_basis(&[y1.clone(), y2.clone()], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(cb.r, 2);
        // Returned fields equal the sources.
        assert!(cb.b[0][0].max_abs_diff(y1.comp(2)).unwrap() < 1e-12);
        assert!(cb.b[1][0].max_abs_diff(y2.comp(2)).unwrap() < 1e-12);
        let br = lie_bracket(&y1, &y2).unwrap();
        assert!(br.sup_norm() < 1e-12, "bracket sup {}", br.sup_norm());
    }

    #[test]
    fn bracket_report_rejects_noncommuting_pairs() {
        // X = e1 + c(y) e3 against Y = e2 + c(y)^2-style coefficients does
        // not commute; the finest-scale gate trips.
        let grid = GridSpec::new(2, 512, 1.0).unwrap();
        let char_ = LPChar::standard();
        let fa = AnalyticVF::custom(2, "x1", |p, out| {
            out[0] = 1.0;
            out[1] = 0.3 * (std::f64::consts::TAU * p[1]).sin();
        });
        let fb = AnalyticVF::custom(2, "x2", |_, out| {
            out[0] = 0.0;
            out[1] = 1.0;
        });
        let cutoff = CutoffSpec { center: pt(&[0.5, 0.5]), inner: 0.24, outer: 0.46 };
        let inner = BoxRegion::new(2, &[0.4, 0.4], &[0.6, 0.6]);
        let nus: Vec<usize> = (3..=6).collect();
        let sa = build_smoothing_sequence(&fa, grid, &cutoff, inner, &nus, &char_).unwrap();
        let sb = build_smoothing_sequence(&fb, grid, &cutoff, inner, &nus, &char_).unwrap();
        assert!(matches!(
            bracket_decay_report(&sa, &sb, 0.5, 0.05),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn canonical_basis_shrinks_box_when_determinant_degenerates() {
        // Leading coefficient dips toward zero away from the base point, so
        // the working box must contract.
        let grid = GridSpec::new(2, 128, 1.0).unwrap();
        let src = VecField::from_fn(grid, 2, |p, out| {
            let d = (p[0] - 0.5).abs().min(1.0 - (p[0] - 0.5).abs());
            out[0] = 0.05f64.max(1.0 - 4.0 * d);
            out[1] = 0.1 * (std::f64::consts::TAU * (p[1] - 0.5)).sin();
        });
        let cb = canonical_basis(&[src], &[0.5, 0.5]).unwrap();
        let full_width = 1.0;
        let got_width = cb.working_box.hi[0] - cb.working_box.lo[0];
        assert!(got_width < full_width, "box not shrunk: {got_width}");
        assert!(cb.min_det_ratio >= 0.1);
    }

    #[test]
    fn canonical_basis_rejects_singular_leading_block() {
        let grid = GridSpec::new(2, 32, 1.0).unwrap();
        let src = VecField::from_fn(grid, 2, |_, out| {
            out[0] = 0.0;
            out[1] = 1.0;
        });
        assert!(matches!(
            canonical_basis(&[src], &[0.0, 0.0]),
            Err(Error::NotTransverse(_))
        ));
    }

    #[test]
    fn span_defect_cases() {
        let grid = grid2(32);
        let e1 = VecField::from_fn(grid, 2, |_, out| {
            out[0] = 1.0;
            out[1] = 0.0;
        });
        let e2 = VecField::from_fn(grid, 2, |_, out| {
            out[0] = 0.0;
            out[1] = 1.0;
        });
        // Bracket equal to a basis field: zero residual.
        let d = span_defect(&e1, &[e1.clone()]).unwrap();
        assert!(d.residual.sup_norm() < 1e-12);
        // Orthogonal direction: residual equals the bracket norm.
        let d = span_defect(&e2, &[e1.clone()]).unwrap();
        assert!((d.residual.sup_norm() - 1.0).abs() < 1e-12);
        assert!((d.min_singular_value - 1.0).abs() < 1e-12);
        // Rank-deficient basis is rejected.
        let zero = VecField::from_fn(grid, 2, |_, out| {
            out[0] = 0.0;
            out[1] = 0.0;
        });
        assert!(matches!(
            span_defect(&e1, &[zero]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn smoothing_sequence_of_band_limited_field_saturates() {
        // Once nu resolves the band, S_nu(chi X) equals chi X exactly.
        let grid = GridSpec::new(1, 512, 1.0).unwrap();
        let char_ = LPChar::standard();
        let field = AnalyticVF::custom(1, "mode", |p, out| {
            out[0] = (std::f64::consts::TAU * 4.0 * p[0]).sin();
        });
        let cutoff = CutoffSpec { center: pt(&[0.5]), inner: 0.2, outer: 0.4 };
        let inner = BoxRegion::new(1, &[0.4], &[0.6]);
        let seq = build_smoothing_sequence(&field, grid, &cutoff, inner, &[2, 4, 6], &char_)
            .unwrap();
        // chi * sin(2 pi 4 x) is not band-limited (the cutoff spreads the
        // spectrum), but its mass beyond block nu decays fast; at nu = 6 the
        // smoothed field agrees with chi X to high accuracy on the grid.
        let chi_x = VecField::from_fn(grid, 1, |p, out| {
            out[0] = (std::f64::consts::TAU * 4.0 * p[0]).sin()
                * crate::spectral::cutoff_value(p, &[0.5], 0.2, 0.4, 1.0);
        });
        let diff = seq.fields[2].axpy(-1.0, &chi_x).unwrap().sup_norm();
        assert!(diff < 1e-6, "saturation diff {diff}");
        // Band limit: spectral mass of X_nu above 2^{nu+1} vanishes.
        for (i, &nu) in seq.nus.iter().enumerate() {
            let mass = seq.fields[i].comp(0).spectral_mass_above(2f64.powi(nu as i32 + 1));
            assert!(mass < 1e-24, "nu={nu} mass {mass}");
        }
        // c0 uniformly bounded by the raw cutoff field.
        for &c0 in &seq.c0_global {
            assert!(c0 <= 1.1 * seq.chi_field_sup);
        }
    }

    #[test]
    fn smoothing_sequence_c1_growth_for_log_tooth() {
        // Rough profile: value + derivative sup on the inner box grows about
        // linearly in nu, and the smoothed fields converge to chi X there.
        let grid = GridSpec::new(1, 8192, 1.0).unwrap();
        let char_ = LPChar::standard();
        let field = AnalyticVF::custom(1, "tooth", |p, out| {
            let s = p[0] - 0.5;
            out[0] = if s == 0.0 { 0.0 } else { -s * s.abs().ln() };
        });
        let cutoff = CutoffSpec { center: pt(&[0.5]), inner: 0.25, outer: 0.45 };
        let inner = BoxRegion::new(1, &[0.3], &[0.7]);
        let nus: Vec<usize> = (3..=10).collect();
        let seq =
            build_smoothing_sequence(&field, grid, &cutoff, inner, &nus, &char_).unwrap();
        assert!(seq.c1_fit.slope > 0.0, "slope {}", seq.c1_fit.slope);
        for &c0 in &seq.c0_global {
            assert!(c0 <= 1.1 * seq.chi_field_sup);
        }
        // Convergence on the inner box, monotone within a small tolerance.
        let chi_x = VecField::from_fn(grid, 1, |p, out| {
            let s = p[0] - 0.5;
            out[0] = if s == 0.0 { 0.0 } else { -s * s.abs().ln() };
            out[0] *= crate::spectral::cutoff_value(p, &[0.5], 0.25, 0.45, 1.0);
        });
        let mut last = f64::MAX;
        for f in &seq.fields {
            let diff = f.axpy(-1.0, &chi_x).unwrap();
            let mut sup: f64 = 0.0;
            for i in 0..grid.len() {
                if seq.inner.contains(&grid.point(i)) {
                    sup = sup.max(diff.comp(0).values()[i].abs());
                }
            }
            assert!(sup <= last * 1.01, "not shrinking: {sup} after {last}");
            last = sup;
        }
        assert!(last < 5e-3, "final approximation error {last}");
    }

    #[test]
    fn grid_bracket_decay_of_shear_pair() {
        // Two-dimensional smoothing of a commuting shear pair: brackets on
        // the inner box stem from the cutoff smear and die fast.
        let grid = GridSpec::new(2, 512, 1.0).unwrap();
        let char_ = LPChar::standard();
        let (t1, t2) = crate::catalog::two_bumps();
        let fa = AnalyticVF::shear_fn("a", move |y| t1.value(y) + t2.value(y));
        let fb = AnalyticVF::shear_fn("b", move |y| 2.0 * t1.value(y) + t2.value(y));
        let cutoff = CutoffSpec { center: pt(&[0.5, 0.5]), inner: 0.24, outer: 0.46 };
        let inner = BoxRegion::new(2, &[0.36, 0.36], &[0.64, 0.64]);
        let nus: Vec<usize> = (3..=6).collect();
        let sa = build_smoothing_sequence(&fa, grid, &cutoff, inner, &nus, &char_).unwrap();
        let sb = build_smoothing_sequence(&fb, grid, &cutoff, inner, &nus, &char_).unwrap();
        let report = bracket_decay_report(&sa, &sb, 0.5, 0.05).unwrap();
        assert!(report.slope <= -0.35, "slope {}", report.slope);
        assert!(report.bracket_sup.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn multiscale_profile_pair_report() {
        let char_ = LPChar::standard();
        let grid = GridSpec::new(1, 1 << 14, 1.0).unwrap();
        let (b1, b2) = crate::catalog::canon3_multiscale_profiles(grid).unwrap();
        let nus: Vec<usize> = (5..=9).collect();
        let polys1: Vec<(usize, TrigPoly1d)> = nus
            .iter()
            .map(|&nu| (nu, smoothed_profile_poly(&b1, nu, &char_).unwrap()))
            .collect();
        let polys2: Vec<(usize, TrigPoly1d)> = nus
            .iter()
            .map(|&nu| (nu, smoothed_profile_poly(&b2, nu, &char_).unwrap()))
            .collect();
        let report = canonical_profile_pair_report(&polys1, &polys2, 0.05).unwrap();
        assert!(report.slope <= -0.35, "slope {}", report.slope);
        assert!(report.weighted_decreasing, "weighted {:?}", report.weighted);
        // c1 norms grow.
        assert!(report.c1_x.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(report.floor_excluded == 0);
    }

    #[test]
    fn smoothed_defect_respects_bound() {
        let char_ = LPChar::standard();
        let (x1, x2, bd) = crate::catalog::canon3_multiscale_smoothed(5, &char_).unwrap();
        let seeds: Vec<Pt> = (0..8).map(|i| pt(&[0.0, 0.0, 0.35 + 0.3 * i as f64 / 7.0])).collect();
        let rep = flow_commutator_defect(&x1, &x2, 0.1, 0.1, &seeds, 1e-4, Some(bd)).unwrap();
        assert_eq!(rep.pass, Some(true));
        assert!(rep.measured <= 1.05 * rep.bound.unwrap());
    }

    #[test]
    fn commuting_shear_flows_have_zero_defect() {
        // Exact shears: x-translation by t f(y); y never changes, so the
        // integrator is exact and the defect vanishes.
        let f = AnalyticVF::shear_fn("shear:f", |y| 0.3 * (std::f64::consts::TAU * y).sin());
        let g = AnalyticVF::shear_fn("shear:g", |y| 0.2 * (std::f64::consts::TAU * y).cos());
        let seeds: Vec<Pt> = (0..8).map(|i| pt(&[0.0, 0.1 + 0.1 * i as f64 / 10.0])).collect();
        let rep = flow_commutator_defect(&f, &g, 0.3, 0.2, &seeds, 1e-3, None).unwrap();
        assert!(rep.measured <= 10.0 * rep.richardson.max(1e-12), "defect {}", rep.measured);
    }

    #[test]
    fn self_commutator_defect_vanishes() {
        let f = AnalyticVF::sharp2d();
        let seeds = [pt(&[0.0, 0.2]), pt(&[0.0, -0.3])];
        let rep = flow_commutator_defect(&f, &f.clone(), 0.1, 0.1, &seeds, 1e-4, None).unwrap();
        assert!(rep.measured <= 10.0 * rep.richardson.max(1e-10));
    }
}
