//! Characteristics solver for first-order systems `L_j f = 0` with rough
//! coefficients: the solution is constant along the commuting flows, so it
//! is the boundary datum transported through the chart.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::chart::{build_chart, invert_chart, measure_holder, Chart, ChartSpec, HolderEstimate};
use crate::error::{Error, Result};
use crate::flow::{integrate_one, pt, AnalyticVF, Pt};
use crate::grid::{GridSpec, VecField};
use crate::involutivity::canonical_basis;
use crate::modulus::{is_osgood_heuristic, Modulus};

/// Initial surface catalog. The coordinate plane fixes the leading `r`
/// coordinates at the base point and is parameterized by the transverse
/// offsets.
#[derive(Debug, Clone, Copy)]
pub enum Surface {
    CoordinatePlane,
}

/// First-order problem: operators (as vector fields), surface through the
/// base point, boundary datum on the surface parameter, and its claimed
/// smoothness exponent.
#[derive(Clone)]
pub struct PDEProblem {
    pub operators: Vec<AnalyticVF>,
    pub base: Pt,
    pub surface: Surface,
    /// h as a function of the transverse parameter v.
    pub boundary: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub beta: f64,
}

impl std::fmt::Debug for PDEProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PDEProblem")
            .field("operators", &self.operators.len())
            .field("base", &self.base)
            .field("beta", &self.beta)
            .finish()
    }
}

/// Solution with its chart, per-node values, and diagnostics.
#[derive(Debug, Clone)]
pub struct PDESolution {
    pub chart: Chart,
    pub boundary_residual: f64,
    pub transversality_min_sv: f64,
    pub beta: f64,
    /// Max over ops of the continuity constant used in the regularity
    /// contract.
    pub basis_norm: f64,
    boundary: BoundaryFn,
}

#[derive(Clone)]
struct BoundaryFn(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl std::fmt::Debug for BoundaryFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<boundary fn>")
    }
}

impl PDESolution {
    /// Evaluate the solution at a point of the chart image by reverse flows.
    pub fn eval(&self, q: &Pt) -> Result<f64> {
        let inv = invert_chart(&self.chart, &[*q])?;
        Ok((self.boundary.0)(&inv[0].lambda))
    }

    pub fn values_on_grid(&self) -> Vec<(Pt, f64)> {
        let mut rows = Vec::new();
        let u_sizes: Vec<usize> = self.chart.spec.u_axes.iter().map(|a| a.len()).collect();
        let v_sizes: Vec<usize> = self.chart.spec.v_axes.iter().map(|a| a.len()).collect();
        let total: usize =
            u_sizes.iter().product::<usize>() * v_sizes.iter().product::<usize>();
        let sizes: Vec<usize> = u_sizes.iter().chain(v_sizes.iter()).copied().collect();
        for flat in 0..total {
            let mut idx = vec![0usize; sizes.len()];
            let mut rem = flat;
            for (a, s) in sizes.iter().enumerate().rev() {
                idx[a] = rem % s;
                rem /= s;
            }
            let v: Vec<f64> = (0..v_sizes.len())
                .map(|k| self.chart.spec.v_axes[k][idx[u_sizes.len() + k]])
                .collect();
            rows.push((self.chart.forward[flat], (self.boundary.0)(&v)));
        }
        rows
    }
}

/// Check that the operators are in triangular commuting form; otherwise
/// sample them on a grid and reduce via the pointwise leading-block
/// inversion. Operators that fail reduction are rejected.
fn canonicalize(operators: &[AnalyticVF], base: &Pt) -> Result<Vec<AnalyticVF>> {
    let r = operators.len();
    let dim = operators[0].dim;
    let mut canonical = true;
    for (j, op) in operators.iter().enumerate() {
        let v = op.eval_pt(base);
        for l in 0..r {
            let want = if l == j { 1.0 } else { 0.0 };
            if (v[l] - want).abs() > 1e-9 {
                canonical = false;
            }
        }
    }
    if canonical {
        return Ok(operators.to_vec());
    }
    // Sample and reduce. The sampling grid is centered so the base point is
    // a node of the torus.
    let grid = GridSpec::new(dim, if dim <= 2 { 256 } else { 64 }, 1.0)?;
    let fields: Vec<VecField> = operators
        .iter()
        .map(|op| {
            VecField::from_fn(grid, dim, |p, out| {
                let mut q = [0.0; 3];
                for a in 0..dim {
                    q[a] = base[a] + p[a] - 0.5;
                }
                op.eval(&q[..dim], out)
            })
        })
        .collect();
    let cb = canonical_basis(&fields, &[0.5, 0.5, 0.5][..dim])?;
    // Shift the reduced fields back to the original coordinates.
    let shifted: Vec<AnalyticVF> = cb
        .fields
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let inner = f.clone();
            let b = *base;
            AnalyticVF::custom(dim, &format!("reduced:{j}"), move |x, out| {
                let mut q = [0.0; 3];
                for a in 0..dim {
                    q[a] = x[a] - b[a] + 0.5;
                }
                inner.eval(&q[..dim], out);
            })
            .with_domain(operators[j].domain)
        })
        .collect();
    Ok(shifted)
}

/// Solve `L_j f = 0`, `f = h` on the surface, over tangential extent
/// `extent`. The chart is seeded on the surface parameterization.
pub fn solve_characteristics(
    problem: &PDEProblem,
    extent: f64,
    step: f64,
) -> Result<PDESolution> {
    let r = problem.operators.len();
    let dim = problem.operators[0].dim;
    if r >= dim + 1 {
        return Err(Error::Precondition("need rank < ambient dimension".into()));
    }
    let basis = canonicalize(&problem.operators, &problem.base)?;

    // Transversality along the surface: [L_1 .. L_r | tangent of S] must be
    // nonsingular at sampled surface points.
    let v_extent = 0.3;
    let mut min_sv = f64::MAX;
    for i in 0..17 {
        let mut q = problem.base;
        if dim > r {
            // Sample along the first transverse axis.
            q[r] += -v_extent + 2.0 * v_extent * i as f64 / 16.0;
        }
        let m = DMatrix::from_fn(dim, dim, |row, col| {
            if col < r {
                basis[col].eval_pt(&q)[row]
            } else if row == col {
                1.0
            } else {
                0.0
            }
        });
        let svd = m.svd(false, false);
        min_sv = min_sv.min(svd.singular_values.min());
    }
    if min_sv < 1e-6 {
        return Err(Error::NotTransverse(format!(
            "surface tangent and operator span degenerate (min singular value {min_sv:.3e})"
        )));
    }

    let spec = ChartSpec::uniform(r, dim - r, extent, v_extent, 33, 33, step);
    let chart = build_chart(&basis, &problem.base[..dim], spec)?;

    // Boundary residual: evaluate on the surface nodes through the reverse
    // flows (u = 0, so this checks the inversion path end to end).
    let mut boundary_residual: f64 = 0.0;
    let solution = PDESolution {
        chart,
        boundary_residual: 0.0,
        transversality_min_sv: min_sv,
        beta: problem.beta,
        basis_norm: basis_constant(&basis),
        boundary: BoundaryFn(problem.boundary.clone()),
    };
    for (k, ax) in solution.chart.spec.v_axes.iter().enumerate() {
        for &v in ax {
            let mut q = problem.base;
            q[r + k] += v;
            let mut vv = vec![0.0; dim - r];
            vv[k] = v;
            let want = (problem.boundary)(&vv);
            let got = solution.eval(&q)?;
            boundary_residual = boundary_residual.max((got - want).abs());
        }
    }
    Ok(PDESolution { boundary_residual, ..solution })
}

fn basis_constant(basis: &[AnalyticVF]) -> f64 {
    let mut c: f64 = 0.0;
    for f in basis {
        let cj = match &f.claimed {
            Some(claim) if claim.constant.is_some() => {
                if is_osgood_heuristic(&claim.modulus).is_osgood {
                    claim.constant.unwrap()
                } else {
                    1.0
                }
            }
            _ => {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(99);
                f.sampled_seminorm(&Modulus::log_lipschitz(), 4_000, &mut rng)
            }
        };
        c = c.max(cj);
    }
    c
}

/// Sup over probes and operators of `|f(F_{L_j}^t(q)) - f(q)|`: the solution
/// must be constant along each operator flow.
pub fn residual_along_flows(
    solution: &PDESolution,
    t_probe: f64,
    probes: &[Pt],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for q in probes {
        let fq = solution.eval(q)?;
        for (j, op) in solution.chart.basis.iter().enumerate() {
            let q2 = integrate_one(op, q, t_probe, solution.chart.spec.step, j)?;
            let fq2 = solution.eval(&q2)?;
            worst = worst.max((fq2 - fq).abs());
        }
    }
    Ok(worst)
}

/// Regularity report: measured exponent of the solution near the surface
/// against the contract `beta * exp(-extent * basis_norm) - 0.05`.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub estimate: HolderEstimate,
    pub threshold: f64,
    pub pass: bool,
}

/// Measure the solution exponent by dyadic-scale probes along the first
/// transverse direction across the chart image.
pub fn solution_regularity(solution: &PDESolution) -> Result<RegularityReport> {
    let chart = &solution.chart;
    let r = chart.r;
    let dim = chart.dim;
    let u_hi = chart.spec.u_axes[0][chart.spec.u_axes[0].len() - 1];
    let v_ax = &chart.spec.v_axes[0];
    let v_hi = v_ax[v_ax.len() - 1];

    let mut anchors = Vec::new();
    for i in 0..9 {
        let u = u_hi * i as f64 / 8.0;
        // Transverse reach of the image shrinks with u for contracting
        // charts; probe inside 60 percent of the seed range.
        for j in 0..9 {
            let v = -0.6 * v_hi + 1.2 * v_hi * j as f64 / 8.0;
            let mut uu = vec![0.0; r];
            uu[0] = u;
            let mut vv = vec![0.0; dim - r];
            vv[0] = v;
            anchors.push(chart.eval(&uu, &vv)?);
        }
    }
    let mut dir = [0.0; 3];
    dir[r] = 1.0;
    // Scales relative to the narrowest image width.
    let mut width: f64 = f64::MAX;
    let mut uu = vec![0.0; r];
    uu[0] = u_hi;
    let mut vv = vec![0.0; dim - r];
    vv[0] = 0.6 * v_hi;
    let edge = chart.eval(&uu, &vv)?;
    vv[0] = 0.0;
    let mid = chart.eval(&uu, &vv)?;
    width = width.min((edge[r] - mid[r]).abs().max(1e-6));
    let scales: Vec<f64> = (3..=10).map(|k| 0.25 * width * 2f64.powi(-k)).collect();
    let estimate = measure_holder(
        |q: &Pt| solution.eval(q).map(|v| vec![v]),
        &anchors,
        &[pt(&dir[..dim])],
        &scales,
    )?;
    let threshold = solution.beta * (-u_hi * solution.basis_norm).exp() - 0.05;
    let pass = estimate.exponent >= threshold;
    Ok(RegularityReport { estimate, threshold, pass })
}
