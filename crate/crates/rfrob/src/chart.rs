//! Charts built by composing flows of a commuting basis: forward grids,
//! reverse-flow inversion, Holder-exponent regression from dyadic-scale
//! oscillations, leaf extraction, and the exponent-loss experiment for the
//! planar field (1, y log|y|).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::flow::{integrate_one, pt, AnalyticVF, Pt};
use crate::stats::linear_fit;

/// Grid layout of a chart: tangential axes `u` (one per basis field) and
/// transverse axes `v`, each with node positions.
#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub u_axes: Vec<Vec<f64>>,
    pub v_axes: Vec<Vec<f64>>,
    pub step: f64,
}

impl ChartSpec {
    /// Uniform axes: `u in [0, u_extent]` per tangential axis and
    /// `v in [-v_extent, v_extent]` per transverse axis.
    pub fn uniform(
        r: usize,
        n_minus_r: usize,
        u_extent: f64,
        v_extent: f64,
        u_nodes: usize,
        v_nodes: usize,
        step: f64,
    ) -> Self {
        let u_axes = (0..r)
            .map(|_| (0..u_nodes).map(|i| u_extent * i as f64 / (u_nodes - 1) as f64).collect())
            .collect();
        let v_axes = (0..n_minus_r)
            .map(|_| {
                (0..v_nodes)
                    .map(|i| -v_extent + 2.0 * v_extent * i as f64 / (v_nodes - 1) as f64)
                    .collect()
            })
            .collect();
        ChartSpec { u_axes, v_axes, step }
    }
}

/// Forward chart data: the map sampled on the (u, v) grid plus residuals of
/// the tangential-derivative identity.
#[derive(Debug, Clone)]
pub struct Chart {
    pub basis: Vec<AnalyticVF>,
    pub base: Pt,
    pub dim: usize,
    pub r: usize,
    pub spec: ChartSpec,
    /// Row-major over (u_axes..., v_axes...), last axis fastest.
    pub forward: Vec<Pt>,
    pub richardson: f64,
    /// Max over probe nodes of |dPhi/du_j - X_j o Phi|.
    pub deriv_residual: f64,
    /// Tolerance of that check (finite-difference truncation plus
    /// integrator error at the probe offset).
    pub deriv_tol: f64,
}

fn grid_sizes(spec: &ChartSpec) -> Vec<usize> {
    spec.u_axes.iter().chain(spec.v_axes.iter()).map(|a| a.len()).collect()
}

fn flat_index(sizes: &[usize], idx: &[usize]) -> usize {
    let mut f = 0;
    for (s, i) in sizes.iter().zip(idx) {
        f = f * s + i;
    }
    f
}

impl Chart {
    pub fn node_count(&self) -> usize {
        grid_sizes(&self.spec).iter().product()
    }

    /// Forward value at a multi-index (u indices then v indices).
    pub fn at(&self, idx: &[usize]) -> Pt {
        self.forward[flat_index(&grid_sizes(&self.spec), idx)]
    }

    /// Evaluate the chart map at arbitrary (u, v) by integrating the flow
    /// composition from the transverse seed.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> Result<Pt> {
        let mut z = self.base;
        for (k, &vk) in v.iter().enumerate() {
            z[self.r + k] += vk;
        }
        // Innermost flow is the last basis field.
        for j in (0..self.r).rev() {
            z = integrate_one(&self.basis[j], &z, u[j], step_for(self.spec.step, u[j]), j)?;
        }
        Ok(z)
    }
}

fn step_for(base_step: f64, t: f64) -> f64 {
    // Keep at least a few steps on short legs.
    base_step.min(t.abs().max(1e-9) / 4.0)
}

/// Verify the triangular structure of a basis: field `j` must have `l`-th
/// component `delta_jl` for `l < r`.
fn check_canonical(basis: &[AnalyticVF], probes: &[Pt]) -> Result<()> {
    let r = basis.len();
    for (j, f) in basis.iter().enumerate() {
        for p in probes {
            let v = f.eval_pt(p);
            for l in 0..r {
                let want = if l == j { 1.0 } else { 0.0 };
                if (v[l] - want).abs() > 1e-9 {
                    return Err(Error::Precondition(format!(
                        "basis field {j} is not in triangular form at {:?}",
                        &p[..f.dim]
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Build the chart by marching the flow composition across the (u, v) grid.
/// The basis must be commuting and in triangular form; each u axis must
/// contain 0 (the transverse seed).
pub fn build_chart(basis: &[AnalyticVF], base: &[f64], spec: ChartSpec) -> Result<Chart> {
    let r = basis.len();
    if r == 0 || r > 2 {
        return Err(Error::Precondition("chart supports 1 or 2 tangential axes".into()));
    }
    let dim = basis[0].dim;
    if spec.u_axes.len() != r || spec.v_axes.len() != dim - r {
        return Err(Error::Precondition("axis counts do not match the basis".into()));
    }
    for ax in spec.u_axes.iter().chain(spec.v_axes.iter()) {
        if ax.len() < 2 {
            return Err(Error::Precondition("each axis needs at least 2 nodes".into()));
        }
    }
    let base = pt(base);
    check_canonical(basis, &[base])?;

    let sizes = grid_sizes(&spec);
    let total: usize = sizes.iter().product();

    // March along each u axis from the node closest to 0.
    let fill = |h: f64| -> Result<Vec<Pt>> {
        let mut data = vec![[f64::NAN; 3]; total];
        let v_sizes = &sizes[r..];
        let v_total: usize = v_sizes.iter().product();
        for vflat in 0..v_total {
            // Transverse seed.
            let mut vidx = vec![0usize; v_sizes.len()];
            let mut rem = vflat;
            for (a, s) in v_sizes.iter().enumerate().rev() {
                vidx[a] = rem % s;
                rem /= s;
            }
            let mut seed = base;
            for (k, &iv) in vidx.iter().enumerate() {
                seed[r + k] += spec.v_axes[k][iv];
            }
            match r {
                1 => {
                    let axis = &spec.u_axes[0];
                    let line = march_line(&basis[0], &seed, axis, h)?;
                    for (i, p) in line.into_iter().enumerate() {
                        let mut idx = vec![i];
                        idx.extend_from_slice(&vidx);
                        data[flat_index(&sizes, &idx)] = p;
                    }
                }
                2 => {
                    let inner_axis = &spec.u_axes[1];
                    let outer_axis = &spec.u_axes[0];
                    let inner_line = march_line(&basis[1], &seed, inner_axis, h)?;
                    for (i2, q) in inner_line.into_iter().enumerate() {
                        let outer_line = march_line(&basis[0], &q, outer_axis, h)?;
                        for (i1, p) in outer_line.into_iter().enumerate() {
                            let mut idx = vec![i1, i2];
                            idx.extend_from_slice(&vidx);
                            data[flat_index(&sizes, &idx)] = p;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(data)
    };
    let suggest = |e: Error| match e {
        Error::LeftFlowDomain { point, .. } => Error::Precondition(format!(
            "flow left the working box at {point:?} while filling the chart; shrink the tangential extent"
        )),
        other => other,
    };
    let coarse = fill(spec.step).map_err(suggest)?;
    let fine = fill(spec.step / 2.0).map_err(suggest)?;
    let mut richardson: f64 = 0.0;
    for (a, b) in coarse.iter().zip(&fine) {
        let mut d = 0.0;
        for c in 0..dim {
            d += (a[c] - b[c]) * (a[c] - b[c]);
        }
        richardson = richardson.max(d.sqrt());
    }

    let mut chart = Chart {
        basis: basis.to_vec(),
        base,
        dim,
        r,
        spec,
        forward: fine,
        richardson,
        deriv_residual: 0.0,
        deriv_tol: 0.0,
    };
    let (resid, tol) = tangential_derivative_check(&chart)?;
    chart.deriv_residual = resid;
    chart.deriv_tol = tol;
    Ok(chart)
}

/// Flow a line of nodes along one axis starting from the node closest to 0.
fn march_line(field: &AnalyticVF, seed: &Pt, axis: &[f64], h: f64) -> Result<Vec<Pt>> {
    let i0 = axis
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .unwrap()
        .0;
    let mut out = vec![[f64::NAN; 3]; axis.len()];
    out[i0] = integrate_one(field, seed, axis[i0], step_for(h, axis[i0]), 0)?;
    for i in (i0 + 1)..axis.len() {
        let dt = axis[i] - axis[i - 1];
        out[i] = integrate_one(field, &out[i - 1], dt, step_for(h, dt), 0)?;
    }
    for i in (0..i0).rev() {
        let dt = axis[i] - axis[i + 1];
        out[i] = integrate_one(field, &out[i + 1], dt, step_for(h, dt), 0)?;
    }
    Ok(out)
}

/// Central-difference check of `dPhi/du_j = X_j o Phi` on a subsample of
/// nodes, with dedicated short probes.
fn tangential_derivative_check(chart: &Chart) -> Result<(f64, f64)> {
    let delta = 2e-3;
    let sizes = grid_sizes(&chart.spec);
    let mut resid: f64 = 0.0;
    // Subsample up to ~4 nodes per axis.
    let mut idx = vec![0usize; sizes.len()];
    let samples_per_axis: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&s| {
            let k = 4.min(s);
            (0..k).map(|i| i * (s - 1) / (k - 1).max(1)).collect()
        })
        .collect();
    let mut stack = vec![(0usize, Vec::<usize>::new())];
    let mut nodes = Vec::new();
    while let Some((axis, partial)) = stack.pop() {
        if axis == sizes.len() {
            nodes.push(partial);
            continue;
        }
        for &i in &samples_per_axis[axis] {
            let mut p = partial.clone();
            p.push(i);
            stack.push((axis + 1, p));
        }
    }
    // Truncation of the central difference is estimated from the probes
    // themselves (coarse minus fine offset), so rough basis fields with
    // large flow curvature get an honest tolerance.
    let mut fd_trunc: f64 = 0.0;
    for node in nodes {
        idx.copy_from_slice(&node);
        let u: Vec<f64> = (0..chart.r).map(|j| chart.spec.u_axes[j][idx[j]]).collect();
        let v: Vec<f64> =
            (0..chart.dim - chart.r).map(|k| chart.spec.v_axes[k][idx[chart.r + k]]).collect();
        let phi = chart.at(&idx);
        for j in 0..chart.r {
            let fd_at = |off: f64| -> Result<Pt> {
                let mut up = u.clone();
                up[j] += off;
                let mut um = u.clone();
                um[j] -= off;
                let (pp, pm) = (chart.eval(&up, &v)?, chart.eval(&um, &v)?);
                let mut out = [0.0; 3];
                for c in 0..chart.dim {
                    out[c] = (pp[c] - pm[c]) / (2.0 * off);
                }
                Ok(out)
            };
            let coarse = fd_at(delta)?;
            let fine = fd_at(delta / 2.0)?;
            let xj = chart.basis[j].eval_pt(&phi);
            let mut r2 = 0.0;
            let mut t2 = 0.0;
            for c in 0..chart.dim {
                r2 += (fine[c] - xj[c]) * (fine[c] - xj[c]);
                t2 += (coarse[c] - fine[c]) * (coarse[c] - fine[c]);
            }
            resid = resid.max(r2.sqrt());
            fd_trunc = fd_trunc.max(t2.sqrt());
        }
    }
    let tol = fd_trunc + delta * delta + 8.0 * chart.richardson.max(1e-12) / delta;
    Ok((resid, tol))
}

/// Inverse data for one query point.
#[derive(Debug, Clone)]
pub struct ChartInverse {
    pub query: Pt,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub roundtrip_error: f64,
}

/// Invert the chart at query points: `mu` is read off the leading
/// coordinates (triangular form); `lambda` comes from composing the reverse
/// flows. Round trips are re-integrated and reported.
pub fn invert_chart(chart: &Chart, queries: &[Pt]) -> Result<Vec<ChartInverse>> {
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let mu: Vec<f64> = (0..chart.r).map(|j| q[j] - chart.base[j]).collect();
        let mut z = *q;
        for (j, &m) in mu.iter().enumerate() {
            z = integrate_one(&chart.basis[j], &z, -m, step_for(chart.spec.step, m), j)
                .map_err(|e| match e {
                    Error::LeftFlowDomain { point, .. } => Error::OutsideChartImage(format!(
                        "reverse flow escaped at {point:?}"
                    )),
                    other => other,
                })?;
        }
        let lambda: Vec<f64> =
            (chart.r..chart.dim).map(|c| z[c] - chart.base[c]).collect();
        let rebuilt = chart.eval(&mu, &lambda)?;
        let mut err = 0.0;
        for c in 0..chart.dim {
            err += (rebuilt[c] - q[c]) * (rebuilt[c] - q[c]);
        }
        out.push(ChartInverse { query: *q, mu, lambda, roundtrip_error: err.sqrt() });
    }
    Ok(out)
}

/// Exponent estimate from a log-log fit of max oscillation against scale.
#[derive(Debug, Clone)]
pub struct HolderEstimate {
    /// Fitted slope clipped into (0, 1.2].
    pub exponent: f64,
    pub raw_slope: f64,
    pub constant: f64,
    pub r2: f64,
    pub scales: Vec<f64>,
    pub oscillations: Vec<f64>,
}

/// Fit `log osc = exponent * log scale + const` over the rows with
/// measurable oscillation; scales are weighted equally.
pub fn holder_fit(scales: &[f64], oscillations: &[f64]) -> Result<HolderEstimate> {
    let rows: Vec<(f64, f64)> = scales
        .iter()
        .zip(oscillations)
        .filter(|(_, &o)| o > 1e-14)
        .map(|(&s, &o)| (s.ln(), o.ln()))
        .collect();
    if rows.len() < 2 {
        return Err(Error::Degenerate(
            "oscillations vanish at every scale; exponent undefined".into(),
        ));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = linear_fit(&xs, &ys);
    if !fit.slope.is_finite() {
        return Err(Error::Degenerate("non-finite exponent fit".into()));
    }
    Ok(HolderEstimate {
        exponent: fit.slope.min(1.2),
        raw_slope: fit.slope,
        constant: fit.intercept.exp(),
        r2: fit.r2,
        scales: scales.to_vec(),
        oscillations: oscillations.to_vec(),
    })
}

/// Measure the exponent of a map by probing anchor points along directions
/// at each dyadic scale: `osc(s) = max |f(a + s d) - f(a)|`. Probe pairs
/// whose evaluation fails (outside the image) are skipped.
pub fn measure_holder<F>(
    map: F,
    anchors: &[Pt],
    directions: &[Pt],
    scales: &[f64],
) -> Result<HolderEstimate>
where
    F: Fn(&Pt) -> Result<Vec<f64>>,
{
    if scales.len() < 4 {
        return Err(Error::Range("need at least 4 scales".into()));
    }
    // Anchor values are reused across scales.
    let anchor_vals: Vec<Option<Vec<f64>>> = anchors.iter().map(|a| map(a).ok()).collect();
    let mut oscs = Vec::with_capacity(scales.len());
    for &s in scales {
        let mut osc: f64 = 0.0;
        let mut any = false;
        for (a, fa) in anchors.iter().zip(&anchor_vals) {
            let Some(fa) = fa else { continue };
            for d in directions {
                let mut b = *a;
                for c in 0..3 {
                    b[c] += s * d[c];
                }
                let fb = match map(&b) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let dv: f64 = fa
                    .iter()
                    .zip(&fb)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                osc = osc.max(dv);
                any = true;
            }
        }
        if !any {
            return Err(Error::OutsideChartImage(format!(
                "no probe pair evaluable at scale {s}"
            )));
        }
        oscs.push(osc);
    }
    holder_fit(scales, &oscs)
}

/// One row of the exponent-loss table.
#[derive(Debug, Clone)]
pub struct SharpnessRow {
    pub extent: f64,
    pub forward_exponent: f64,
    pub inverse_exponent: f64,
    pub expected: f64,
}

/// Build charts of the planar field `(1, y log|y|)` over shrinking
/// tangential extents and measure forward and inverse exponents. The
/// smaller of the two tracks `exp(-extent)` and climbs to 1 only as the
/// extent shrinks.
pub fn sharpness_experiment(extents: &[f64], step: f64) -> Result<Vec<SharpnessRow>> {
    let mut rows = Vec::with_capacity(extents.len());
    for &extent in extents {
        let field = AnalyticVF::sharp2d();
        let spec = ChartSpec::uniform(1, 1, extent, 0.3, 33, 33, step);
        let chart = build_chart(&[field], &[0.0, 0.0], spec)?;

        // Forward: oscillations of (u, v) -> Phi over the parameter box.
        let fwd_anchors: Vec<Pt> = {
            let mut a = Vec::new();
            for i in 0..9 {
                let u = extent * i as f64 / 8.0 * 0.9;
                for j in 0..9 {
                    let v = -0.25 + 0.5 * j as f64 / 8.0;
                    a.push(pt(&[u, v]));
                }
            }
            a
        };
        let dirs = [pt(&[1.0, 0.0]), pt(&[0.0, 1.0])];
        let scales: Vec<f64> = (3..=10).map(|k| 0.25 * 2f64.powi(-k)).collect();
        let chart_ref = &chart;
        let forward = measure_holder(
            |p: &Pt| chart_ref.eval(&[p[0]], &[p[1]]).map(|z| z[..2].to_vec()),
            &fwd_anchors,
            &dirs,
            &scales,
        )?;

        // Inverse: oscillations of q -> lambda(q) over the image.
        let mut inv_anchors = Vec::new();
        for i in 0..9 {
            let x = extent * i as f64 / 8.0;
            let ymax = 0.27f64.powf(x.exp());
            for j in 0..9 {
                let y = -0.9 * ymax + 1.8 * ymax * j as f64 / 8.0;
                inv_anchors.push(pt(&[x, y]));
            }
        }
        let y_dir = [pt(&[0.0, 1.0])];
        let ymin = 0.27f64.powf(extent.exp());
        let inv_scales: Vec<f64> = (3..=10).map(|k| 0.05 * ymin * 2f64.powi(-k)).collect();
        let inverse = measure_holder(
            |q: &Pt| {
                let inv = invert_chart(chart_ref, &[*q])?;
                Ok(inv[0].lambda.clone())
            },
            &inv_anchors,
            &y_dir,
            &inv_scales,
        )?;
        rows.push(SharpnessRow {
            extent,
            forward_exponent: forward.exponent,
            inverse_exponent: inverse.exponent,
            expected: (-extent).exp(),
        });
    }
    Ok(rows)
}

/// A leaf (fixed transverse coordinate) with its tangent span defect.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub v: Vec<f64>,
    pub points: Vec<Pt>,
    /// Max over probes of the least-squares residual of the leaf tangent
    /// against span of the basis at the point.
    pub tangent_defect: f64,
}

/// Extract the leaf through transverse coordinate `v` and check that its
/// tangents lie in the span of the basis fields.
pub fn extract_leaf(chart: &Chart, v: &[f64]) -> Result<Leaf> {
    if v.len() != chart.dim - chart.r {
        return Err(Error::Range("transverse coordinate has wrong dimension".into()));
    }
    for (k, ax) in chart.spec.v_axes.iter().enumerate() {
        let (lo, hi) = (ax[0], ax[ax.len() - 1]);
        if v[k] < lo || v[k] > hi {
            return Err(Error::Range(format!("v[{k}] = {} outside [{lo}, {hi}]", v[k])));
        }
    }
    // Points along the u grid at this v.
    let mut points = Vec::new();
    let u_sizes: Vec<usize> = chart.spec.u_axes.iter().map(|a| a.len()).collect();
    let u_total: usize = u_sizes.iter().product();
    for uflat in 0..u_total {
        let mut uidx = vec![0usize; u_sizes.len()];
        let mut rem = uflat;
        for (a, s) in u_sizes.iter().enumerate().rev() {
            uidx[a] = rem % s;
            rem /= s;
        }
        let u: Vec<f64> = uidx.iter().enumerate().map(|(j, &i)| chart.spec.u_axes[j][i]).collect();
        points.push(chart.eval(&u, v)?);
    }
    // Tangent probes at a few interior points.
    let delta = 5e-4;
    let mut defect: f64 = 0.0;
    let probe_count = points.len().min(9);
    for pi in 0..probe_count {
        let p = points[pi * (points.len() - 1) / probe_count.max(1)];
        for j in 0..chart.r {
            let fp = integrate_one(&chart.basis[j], &p, delta, delta * 1e-2, 0)?;
            let fm = integrate_one(&chart.basis[j], &p, -delta, delta * 1e-2, 0)?;
            let mut tangent = [0.0; 3];
            for c in 0..chart.dim {
                tangent[c] = (fp[c] - fm[c]) / (2.0 * delta);
            }
            // Residual against span of the basis vectors at p.
            let bmat = DMatrix::from_fn(chart.dim, chart.r, |row, col| {
                chart.basis[col].eval_pt(&p)[row]
            });
            let rhs = DMatrix::from_fn(chart.dim, 1, |row, _| tangent[row]);
            let svd = bmat.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let sol = svd
                .solve(&rhs, 1e-10 * smax.max(1e-300))
                .map_err(|e| Error::Precondition(format!("svd solve failed: {e}")))?;
            let recon = &bmat * &sol;
            let mut res = 0.0;
            for c in 0..chart.dim {
                res += (tangent[c] - recon[(c, 0)]) * (tangent[c] - recon[(c, 0)]);
            }
            defect = defect.max(res.sqrt());
        }
    }
    Ok(Leaf { v: v.to_vec(), points, tangent_defect: defect })
}
