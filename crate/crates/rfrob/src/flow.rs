//! ODE flows of rough vector fields: a fixed-step explicit integrator with
//! step-halving verification, separation certificates against flow-modulus
//! bounds, continuous dependence on the field, and pushforward sup bounds.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::FieldExpr;
use crate::grid::VecField;
use crate::modulus::{self, Modulus};

/// Points carry up to three coordinates; unused trailing entries stay zero.
pub type Pt = [f64; 3];

pub fn pt(coords: &[f64]) -> Pt {
    let mut p = [0.0; 3];
    p[..coords.len()].copy_from_slice(coords);
    p
}

pub(crate) fn dist(a: &Pt, b: &Pt, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// Axis-aligned working box; flows are declared escaped once they leave it.
#[derive(Debug, Clone, Copy)]
pub struct BoxRegion {
    pub dim: usize,
    pub lo: Pt,
    pub hi: Pt,
}

impl BoxRegion {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64]) -> Self {
        BoxRegion { dim, lo: pt(lo), hi: pt(hi) }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..dim {
            lo[i] = -half_width;
            hi[i] = half_width;
        }
        BoxRegion { dim, lo, hi }
    }

    pub fn contains(&self, p: &Pt) -> bool {
        (0..self.dim).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Pt {
        let mut p = [0.0; 3];
        for i in 0..self.dim {
            p[i] = rng.gen_range(self.lo[i]..=self.hi[i]);
        }
        p
    }

    pub fn shrink(&self, factor: f64) -> BoxRegion {
        let mut out = *self;
        for i in 0..self.dim {
            let c = 0.5 * (self.lo[i] + self.hi[i]);
            let h = 0.5 * (self.hi[i] - self.lo[i]) * factor;
            out.lo[i] = c - h;
            out.hi[i] = c + h;
        }
        out
    }
}

/// Real trigonometric polynomial of one periodic variable, used as the exact
/// representation of low-pass-filtered rough profiles.
#[derive(Debug, Clone)]
pub struct TrigPoly1d {
    period: f64,
    /// a[0] is the mean; a[k], b[k] the cos/sin amplitudes of mode k.
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigPoly1d {
    pub fn from_spectrum(
        period: f64,
        coeffs: &[rustfft::num_complex::Complex<f64>],
        kmax: usize,
    ) -> Self {
        let n = coeffs.len();
        let kmax = kmax.min(n / 2 - 1);
        let mut a = vec![0.0; kmax + 1];
        let mut b = vec![0.0; kmax + 1];
        a[0] = coeffs[0].re;
        for k in 1..=kmax {
            a[k] = 2.0 * coeffs[k].re;
            b[k] = -2.0 * coeffs[k].im;
        }
        TrigPoly1d { period, a, b }
    }

    pub fn kmax(&self) -> usize {
        self.a.len() - 1
    }

    pub fn value(&self, y: f64) -> f64 {
        let th = std::f64::consts::TAU * y / self.period;
        let (s1, c1) = th.sin_cos();
        let mut ck = 1.0;
        let mut sk = 0.0;
        let mut acc = self.a[0];
        for k in 1..self.a.len() {
            let c = ck * c1 - sk * s1;
            let s = sk * c1 + ck * s1;
            ck = c;
            sk = s;
            acc += self.a[k] * c + self.b[k] * s;
        }
        acc
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let th = std::f64::consts::TAU * y / self.period;
        let (s1, c1) = th.sin_cos();
        let mut ck = 1.0;
        let mut sk = 0.0;
        let mut acc = 0.0;
        let w = std::f64::consts::TAU / self.period;
        for k in 1..self.a.len() {
            let c = ck * c1 - sk * s1;
            let s = sk * c1 + ck * s1;
            ck = c;
            sk = s;
            acc += k as f64 * w * (-self.a[k] * s + self.b[k] * c);
        }
        acc
    }

    /// Dense-grid sup of |value|.
    pub fn sup_value(&self) -> f64 {
        let n = 16 * (self.kmax() + 1);
        (0..n)
            .map(|i| self.value(self.period * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Dense-grid sup of |derivative|.
    pub fn sup_derivative(&self) -> f64 {
        let n = 16 * (self.kmax() + 1);
        (0..n)
            .map(|i| self.derivative(self.period * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Periodic multilinear interpolation of a sampled vector field.
#[derive(Debug, Clone)]
pub struct GridInterpVF {
    field: VecField,
}

impl GridInterpVF {
    pub fn new(field: VecField) -> Self {
        GridInterpVF { field }
    }

    pub fn field(&self) -> &VecField {
        &self.field
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let grid = self.field.grid();
        let n = grid.points_per_axis();
        let h = grid.cell();
        let dim = grid.dim();
        let mut i0 = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..dim {
            let mut u = (x[a] / h) % n as f64;
            if u < 0.0 {
                u += n as f64;
            }
            let fl = u.floor();
            i0[a] = (fl as usize) % n;
            frac[a] = u - fl;
        }
        for v in out.iter_mut() {
            *v = 0.0;
        }
        let corners = 1usize << dim;
        for corner in 0..corners {
            let mut w = 1.0;
            let mut iv = [0usize; 3];
            for a in 0..dim {
                if corner >> a & 1 == 1 {
                    iv[a] = (i0[a] + 1) % n;
                    w *= frac[a];
                } else {
                    iv[a] = i0[a];
                    w *= 1.0 - frac[a];
                }
            }
            let flat = grid.flat(iv);
            for (c, v) in self.field.comps().iter().zip(out.iter_mut()) {
                *v += w * c.values()[flat];
            }
        }
    }
}

#[derive(Clone)]
pub enum VfKind {
    /// Constant velocity.
    Constant(Pt),
    /// x -> A x for a dim x dim matrix.
    Linear([[f64; 3]; 3]),
    /// One-dimensional x -> -x log|x| (0 at 0).
    NegXLogX,
    /// Two-dimensional (1, y log|y|).
    Sharp2d,
    /// Two-dimensional shear (f(y), 0) from a closure profile.
    ShearFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Optional unit basis direction plus `poly(x[dep_axis])` along
    /// `vel_axis`; covers smoothed shears and canonical-basis fields.
    Profile {
        unit_axis: Option<usize>,
        vel_axis: usize,
        dep_axis: usize,
        poly: TrigPoly1d,
    },
    /// Multilinear interpolation of a sampled field.
    Grid(Arc<GridInterpVF>),
    /// Arbitrary closure.
    Custom(Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>),
}

impl std::fmt::Debug for VfKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            VfKind::Constant(_) => "Constant",
            VfKind::Linear(_) => "Linear",
            VfKind::NegXLogX => "NegXLogX",
            VfKind::Sharp2d => "Sharp2d",
            VfKind::ShearFn(_) => "ShearFn",
            VfKind::Profile { .. } => "Profile",
            VfKind::Grid(_) => "Grid",
            VfKind::Custom(_) => "Custom",
        };
        write!(f, "{name}")
    }
}

/// Claimed continuity data: `|X(u) - X(v)| <= constant * eta(|u - v|)`.
#[derive(Debug, Clone)]
pub struct ClaimedRegularity {
    pub modulus: Modulus,
    pub constant: Option<f64>,
}

/// A vector field with pointwise evaluation, an optional claimed continuity
/// modulus, optional sup-norm data, and a working box standing in for the
/// flow domain.
#[derive(Debug, Clone)]
pub struct AnalyticVF {
    pub dim: usize,
    pub kind: VfKind,
    pub label: String,
    pub claimed: Option<ClaimedRegularity>,
    pub c0_bound: Option<f64>,
    pub c1_bound: Option<f64>,
    pub domain: BoxRegion,
}

impl AnalyticVF {
    pub fn constant(c: &[f64]) -> Self {
        let dim = c.len();
        AnalyticVF {
            dim,
            kind: VfKind::Constant(pt(c)),
            label: format!("const:{c:?}"),
            claimed: Some(ClaimedRegularity {
                modulus: Modulus::lipschitz(1.0),
                constant: Some(1.0),
            }),
            c0_bound: Some(c.iter().map(|v| v * v).sum::<f64>().sqrt()),
            c1_bound: Some(0.0),
            domain: BoxRegion::cube(dim, 1.0),
        }
    }

    pub fn linear(dim: usize, a: [[f64; 3]; 3]) -> Self {
        // Frobenius norm bounds the spectral norm; good enough as a claimed
        // Lipschitz constant.
        let mut fro = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                fro += a[r][c] * a[r][c];
            }
        }
        let fro = fro.sqrt();
        AnalyticVF {
            dim,
            kind: VfKind::Linear(a),
            label: "linear".into(),
            claimed: Some(ClaimedRegularity {
                modulus: Modulus::lipschitz(1.0),
                constant: Some(fro),
            }),
            c0_bound: None,
            c1_bound: Some(fro),
            domain: BoxRegion::cube(dim, 1.0),
        }
    }

    pub fn neg_x_log_x() -> Self {
        AnalyticVF {
            dim: 1,
            kind: VfKind::NegXLogX,
            label: "negxlogx".into(),
            claimed: Some(ClaimedRegularity {
                modulus: Modulus::log_lipschitz(),
                constant: Some(2.0),
            }),
            c0_bound: Some(1.0 / std::f64::consts::E),
            c1_bound: None,
            domain: BoxRegion::cube(1, 0.99),
        }
    }

    pub fn sharp2d() -> Self {
        AnalyticVF {
            dim: 2,
            kind: VfKind::Sharp2d,
            label: "sharp2d".into(),
            claimed: Some(ClaimedRegularity {
                modulus: Modulus::log_lipschitz(),
                constant: Some(2.0),
            }),
            c0_bound: Some((1.0 + 1.0 / (std::f64::consts::E * std::f64::consts::E)).sqrt()),
            c1_bound: None,
            domain: BoxRegion::new(2, &[-4.0, -0.99], &[4.0, 0.99]),
        }
    }

    pub fn shear_fn(label: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        AnalyticVF {
            dim: 2,
            kind: VfKind::ShearFn(Arc::new(f)),
            label: label.to_string(),
            claimed: None,
            c0_bound: None,
            c1_bound: None,
            domain: BoxRegion::new(2, &[-8.0, 0.0], &[8.0, 1.0]),
        }
    }

    pub fn profile(
        dim: usize,
        unit_axis: Option<usize>,
        vel_axis: usize,
        dep_axis: usize,
        poly: TrigPoly1d,
        label: &str,
    ) -> Self {
        let c1 = poly.sup_derivative()
            + (poly.sup_value().powi(2) + if unit_axis.is_some() { 1.0 } else { 0.0 }).sqrt();
        let c0 = (poly.sup_value().powi(2) + if unit_axis.is_some() { 1.0 } else { 0.0 }).sqrt();
        let lo = [-8.0; 3];
        let hi = [8.0; 3];
        AnalyticVF {
            dim,
            kind: VfKind::Profile { unit_axis, vel_axis, dep_axis, poly },
            label: label.to_string(),
            claimed: None,
            c0_bound: Some(c0),
            c1_bound: Some(c1),
            domain: BoxRegion::new(dim, &lo[..dim], &hi[..dim]),
        }
    }

    pub fn grid_interp(field: VecField, label: &str) -> Self {
        let dim = field.grid().dim();
        let side = field.grid().box_side();
        let lo = [0.0; 3];
        let hi = [side; 3];
        AnalyticVF {
            dim,
            kind: VfKind::Grid(Arc::new(GridInterpVF::new(field))),
            label: label.to_string(),
            claimed: None,
            c0_bound: None,
            c1_bound: None,
            domain: BoxRegion::new(dim, &lo[..dim], &hi[..dim]),
        }
    }

    pub fn custom(
        dim: usize,
        label: &str,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        AnalyticVF {
            dim,
            kind: VfKind::Custom(Arc::new(f)),
            label: label.to_string(),
            claimed: None,
            c0_bound: None,
            c1_bound: None,
            domain: BoxRegion::cube(dim, 1.0),
        }
    }

    pub fn from_expr(expr: &FieldExpr) -> Self {
        let dim = expr.ncomp();
        let e = expr.clone();
        AnalyticVF {
            dim,
            kind: VfKind::Custom(Arc::new(move |x, out| e.eval(x, out))),
            label: format!("expr:{}", expr.source()),
            claimed: None,
            c0_bound: None,
            c1_bound: None,
            domain: BoxRegion::cube(dim, 1.0),
        }
    }

    pub fn with_domain(mut self, domain: BoxRegion) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_claim(mut self, modulus: Modulus, constant: Option<f64>) -> Self {
        self.claimed = Some(ClaimedRegularity { modulus, constant });
        self
    }

    pub fn with_c1_bound(mut self, c1: f64) -> Self {
        self.c1_bound = Some(c1);
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            VfKind::Constant(c) => out[..self.dim].copy_from_slice(&c[..self.dim]),
            VfKind::Linear(a) => {
                for r in 0..self.dim {
                    let mut s = 0.0;
                    for c in 0..self.dim {
                        s += a[r][c] * x[c];
                    }
                    out[r] = s;
                }
            }
            VfKind::NegXLogX => {
                out[0] = if x[0] == 0.0 { 0.0 } else { -x[0] * x[0].abs().ln() };
            }
            VfKind::Sharp2d => {
                out[0] = 1.0;
                out[1] = if x[1] == 0.0 { 0.0 } else { x[1] * x[1].abs().ln() };
            }
            VfKind::ShearFn(f) => {
                out[0] = f(x[1]);
                out[1] = 0.0;
            }
            VfKind::Profile { unit_axis, vel_axis, dep_axis, poly } => {
                for v in out[..self.dim].iter_mut() {
                    *v = 0.0;
                }
                if let Some(u) = unit_axis {
                    out[*u] = 1.0;
                }
                out[*vel_axis] += poly.value(x[*dep_axis]);
            }
            VfKind::Grid(g) => g.eval(x, out),
            VfKind::Custom(f) => f(x, out),
        }
    }

    pub fn eval_pt(&self, x: &Pt) -> Pt {
        let mut out = [0.0; 3];
        let mut buf = [0.0; 3];
        buf[..self.dim].copy_from_slice(&x[..self.dim]);
        self.eval(&buf[..self.dim], &mut out[..self.dim]);
        out
    }

    /// Sampled sup of the modulus quotient `|X(u)-X(v)| / eta(|u-v|)` over
    /// random pairs in the working box. Under-estimates the true sup.
    pub fn sampled_seminorm(&self, eta: &Modulus, pairs: usize, rng: &mut impl Rng) -> f64 {
        let mut sup: f64 = 0.0;
        for _ in 0..pairs {
            let u = self.domain.sample(rng);
            let v = self.domain.sample(rng);
            let d = dist(&u, &v, self.dim);
            if d < 1e-13 {
                continue;
            }
            let xu = self.eval_pt(&u);
            let xv = self.eval_pt(&v);
            sup = sup.max(dist(&xu, &xv, self.dim) / eta.eval(d));
        }
        sup
    }

    /// Sampled sup norm over random points in the working box.
    pub fn sampled_c0(&self, points: usize, rng: &mut impl Rng) -> f64 {
        let zero = [0.0; 3];
        let mut sup: f64 = 0.0;
        for _ in 0..points {
            let u = self.domain.sample(rng);
            let xu = self.eval_pt(&u);
            sup = sup.max(dist(&xu, &zero, self.dim));
        }
        sup
    }

    /// Spot check of the claimed modulus on random pairs: the quotient must
    /// not exceed the claimed constant by more than the safety factor.
    pub fn check_claimed(&self, pairs: usize, rng: &mut impl Rng) -> Result<()> {
        let claim = self
            .claimed
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("{}: no claimed modulus", self.label)))?;
        let c = claim
            .constant
            .ok_or_else(|| Error::Precondition(format!("{}: no claimed constant", self.label)))?;
        let measured = self.sampled_seminorm(&claim.modulus, pairs, rng);
        if measured > 1.05 * c {
            return Err(Error::Contract(format!(
                "{}: sampled quotient {measured} exceeds 1.05 x claimed {c}",
                self.label
            )));
        }
        Ok(())
    }
}

/// Single trajectory with the classic 4-stage explicit one-step method and a
/// fixed step; errors out if the trajectory leaves the field's working box.
pub fn integrate_one(
    field: &AnalyticVF,
    x0: &Pt,
    t: f64,
    h: f64,
    seed_index: usize,
) -> Result<Pt> {
    let dim = field.dim;
    let domain = &field.domain;
    if !domain.contains(x0) {
        return Err(Error::LeftFlowDomain {
            seed: seed_index,
            point: x0[..dim].to_vec(),
            t: 0.0,
        });
    }
    if t == 0.0 {
        return Ok(*x0);
    }
    let n = (t.abs() / h).ceil().max(1.0) as usize;
    let dt = t / n as f64;
    let mut x = *x0;
    let mut k1 = [0.0; 3];
    let mut k2 = [0.0; 3];
    let mut k3 = [0.0; 3];
    let mut k4 = [0.0; 3];
    let mut tmp = [0.0; 3];
    for step in 0..n {
        field.eval(&x[..dim], &mut k1[..dim]);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        field.eval(&tmp[..dim], &mut k2[..dim]);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        field.eval(&tmp[..dim], &mut k3[..dim]);
        for i in 0..dim {
            tmp[i] = x[i] + dt * k3[i];
        }
        field.eval(&tmp[..dim], &mut k4[..dim]);
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !domain.contains(&x) {
            return Err(Error::LeftFlowDomain {
                seed: seed_index,
                point: x[..dim].to_vec(),
                t: dt * (step + 1) as f64,
            });
        }
    }
    Ok(x)
}

/// Certificate row for one pair: initial separation, measured endpoint
/// distance, and the flow-modulus bound.
#[derive(Debug, Clone)]
pub struct CertRow {
    pub u: Pt,
    pub v: Pt,
    pub separation: f64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Output of flow integration: endpoints, a step-halving error estimate,
/// and (when produced by the certifier) per-pair separation rows.
#[derive(Debug, Clone)]
pub struct FlowCertificate {
    pub label: String,
    pub t: f64,
    pub step: f64,
    pub seeds: Vec<Pt>,
    pub endpoints: Vec<Pt>,
    pub richardson_error: f64,
    pub modulus_rows: Vec<CertRow>,
    pub safety_factor: f64,
}

/// Default step for a requested integration time.
pub fn default_step(t: f64) -> f64 {
    1e-4 * t.abs().max(1e-12)
}

/// Integrate all seeds at step `h`, re-run at `h/2`, report the `h/2`
/// endpoints with the endpoint discrepancy as the error estimate.
pub fn integrate_flow(
    field: &AnalyticVF,
    t: f64,
    seeds: &[Pt],
    step: Option<f64>,
) -> Result<FlowCertificate> {
    let h = step.unwrap_or_else(|| default_step(t));
    let mut endpoints = Vec::with_capacity(seeds.len());
    let mut richardson: f64 = 0.0;
    for (i, s) in seeds.iter().enumerate() {
        let coarse = integrate_one(field, s, t, h, i)?;
        let fine = integrate_one(field, s, t, h / 2.0, i)?;
        richardson = richardson.max(dist(&coarse, &fine, field.dim));
        endpoints.push(fine);
    }
    Ok(FlowCertificate {
        label: field.label.clone(),
        t,
        step: h,
        seeds: seeds.to_vec(),
        endpoints,
        richardson_error: richardson,
        modulus_rows: Vec::new(),
        safety_factor: 1.05,
    })
}

/// For each pair (u, v): measured endpoint distance against the bound
/// `etaF(c |t|, |u - v|)` where `c` is the claimed (or sampled) modulus
/// constant. Contract: measured <= 1.05 x bound.
pub fn certify_flow_regularity(
    field: &AnalyticVF,
    t: f64,
    pairs: &[(Pt, Pt)],
    step: Option<f64>,
    rng: &mut impl Rng,
) -> Result<FlowCertificate> {
    let claim = field
        .claimed
        .as_ref()
        .ok_or_else(|| Error::Precondition(format!("{}: no claimed modulus", field.label)))?
        .clone();
    let osgood = modulus::is_osgood_heuristic(&claim.modulus);
    if !osgood.is_osgood {
        return Err(Error::Precondition(format!(
            "{}: claimed modulus {} fails the Osgood heuristic",
            field.label,
            claim.modulus.label()
        )));
    }
    let c = match claim.constant {
        Some(c) => c,
        None => field.sampled_seminorm(&claim.modulus, 10_000, rng),
    };
    let mut seeds = Vec::with_capacity(pairs.len() * 2);
    for (u, v) in pairs {
        seeds.push(*u);
        seeds.push(*v);
    }
    let mut cert = integrate_flow(field, t, &seeds, step)?;
    let mut rows = Vec::with_capacity(pairs.len());
    for (i, (u, v)) in pairs.iter().enumerate() {
        let separation = dist(u, v, field.dim);
        let measured = dist(&cert.endpoints[2 * i], &cert.endpoints[2 * i + 1], field.dim);
        let bound = modulus::flow_modulus(&claim.modulus, c * t.abs(), separation.max(1e-300))?;
        rows.push(CertRow {
            u: *u,
            v: *v,
            separation,
            measured,
            bound,
            pass: measured <= 1.05 * bound,
        });
    }
    cert.modulus_rows = rows;
    Ok(cert)
}

/// Measured and bounded drift between the flows of two nearby fields.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub measured: f64,
    pub bound: f64,
    /// Sampled continuity-norm distance of X - Y.
    pub delta: f64,
    /// Common rescaling constant (max of the two sampled norms).
    pub scale: f64,
    pub pass: bool,
}

/// Bound `sup_p |F_X^t(p) - F_Y^t(p)|` by the flow modulus of `id + eta` at
/// the measured norm distance of the fields. Both fields are normalized by
/// `scale = max(norm X, norm Y)` and the time rescaled accordingly.
pub fn flow_distance_under_perturbation(
    x: &AnalyticVF,
    y: &AnalyticVF,
    t: f64,
    seeds: &[Pt],
    step: Option<f64>,
    rng: &mut impl Rng,
) -> Result<PerturbationReport> {
    let claim = x
        .claimed
        .as_ref()
        .ok_or_else(|| Error::Precondition("perturbation bound needs a claimed modulus".into()))?;
    let eta = claim.modulus.clone();
    let pairs = 8_000;
    let norm_x = x.sampled_c0(2_000, rng) + x.sampled_seminorm(&eta, pairs, rng);
    let norm_y = y.sampled_c0(2_000, rng) + y.sampled_seminorm(&eta, pairs, rng);
    let scale = norm_x.max(norm_y).max(1e-12);
    // Norm distance of the difference field on a sample of points and pairs.
    let diff = {
        let xc = x.clone();
        let yc = y.clone();
        let dim = x.dim;
        AnalyticVF::custom(dim, "diff", move |p, out| {
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            xc.eval(p, &mut a[..dim]);
            yc.eval(p, &mut b[..dim]);
            for i in 0..dim {
                out[i] = a[i] - b[i];
            }
        })
        .with_domain(x.domain)
    };
    let delta = diff.sampled_c0(2_000, rng) + diff.sampled_seminorm(&eta, pairs, rng);
    let fx = integrate_flow(x, t, seeds, step)?;
    let fy = integrate_flow(y, t, seeds, step)?;
    let measured = fx
        .endpoints
        .iter()
        .zip(&fy.endpoints)
        .map(|(a, b)| dist(a, b, x.dim))
        .fold(0.0, f64::max);
    let idplus = Modulus::identity_plus(eta);
    let bound = modulus::flow_modulus(&idplus, scale * t.abs(), (delta / scale).max(1e-15))?;
    Ok(PerturbationReport { measured, bound, delta, scale, pass: measured <= 1.05 * bound })
}

/// Measured pushforward sup against the exponential bound.
#[derive(Debug, Clone)]
pub struct PushforwardReport {
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Pushforward of `w` along the time-`t` flow of `v`, evaluated as
/// `(grad F_v^t . w) o F_v^{-t}` with the flow Jacobian by central
/// differences, sampled at `points`. Bound: `e^{|t| c1(v)} c0(w)`.
pub fn pushforward_c0_bound(
    v: &AnalyticVF,
    w: &AnalyticVF,
    t: f64,
    points: &[Pt],
    step: Option<f64>,
    rng: &mut impl Rng,
) -> Result<PushforwardReport> {
    let c1 = v
        .c1_bound
        .ok_or_else(|| Error::Precondition(format!("{}: pushforward needs a C1 bound", v.label)))?;
    let c0 = match w.c0_bound {
        Some(c) => c,
        None => w.sampled_c0(4_000, rng),
    };
    let dim = v.dim;
    let eps = 1e-5;
    let h = step.unwrap_or_else(|| default_step(t.abs().max(1e-6)));
    let mut measured: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        let y = integrate_one(v, p, -t, h, i)?;
        let wy = w.eval_pt(&y);
        let mut out = [0.0; 3];
        for a in 0..dim {
            let mut yp = y;
            yp[a] += eps;
            let mut ym = y;
            ym[a] -= eps;
            let fp = integrate_one(v, &yp, t, h, i)?;
            let fm = integrate_one(v, &ym, t, h, i)?;
            for r in 0..dim {
                out[r] += (fp[r] - fm[r]) / (2.0 * eps) * wy[a];
            }
        }
        measured = measured.max(dist(&out, &[0.0; 3], dim));
    }
    let bound = (t.abs() * c1).exp() * c0;
    Ok(PushforwardReport { measured, bound, pass: measured <= 1.05 * bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Matrix exponential by scaling and squaring of the Taylor series;
    /// independent oracle for linear flows.
    pub(crate) fn mat_exp(dim: usize, a: [[f64; 3]; 3], t: f64) -> [[f64; 3]; 3] {
        let mut norm: f64 = 0.0;
        for r in 0..dim {
            let mut row = 0.0;
            for c in 0..dim {
                row += (a[r][c] * t).abs();
            }
            norm = norm.max(row);
        }
        let squarings = norm.max(1e-12).log2().ceil().max(0.0) as u32 + 4;
        let scale = t / 2f64.powi(squarings as i32);
        let mut term = [[0.0; 3]; 3];
        let mut result = [[0.0; 3]; 3];
        for i in 0..dim {
            term[i][i] = 1.0;
            result[i][i] = 1.0;
        }
        for k in 1..24 {
            let mut next = [[0.0; 3]; 3];
            for r in 0..dim {
                for c in 0..dim {
                    let mut s = 0.0;
                    for m in 0..dim {
                        s += term[r][m] * a[m][c] * scale;
                    }
                    next[r][c] = s / k as f64;
                }
            }
            term = next;
            for r in 0..dim {
                for c in 0..dim {
                    result[r][c] += term[r][c];
                }
            }
        }
        for _ in 0..squarings {
            let mut sq = [[0.0; 3]; 3];
            for r in 0..dim {
                for c in 0..dim {
                    let mut s = 0.0;
                    for m in 0..dim {
                        s += result[r][m] * result[m][c];
                    }
                    sq[r][c] = s;
                }
            }
            result = sq;
        }
        result
    }

    #[test]
    fn constant_field_translates() {
        let f = AnalyticVF::constant(&[0.3, -0.2]).with_domain(BoxRegion::cube(2, 2.0));
        let cert = integrate_flow(&f, 1.5, &[pt(&[0.1, 0.2])], None).unwrap();
        let e = cert.endpoints[0];
        assert!((e[0] - 0.55).abs() < 1e-11 && (e[1] + 0.1).abs() < 1e-11);
        assert!(cert.richardson_error < 1e-11);
    }

    #[test]
    fn neg_x_log_x_closed_form() {
        let f = AnalyticVF::neg_x_log_x();
        for &x0 in &[1e-4, 1e-3, 1e-2, 1e-1] {
            for &t in &[0.2, 0.7] {
                let cert = integrate_flow(&f, t, &[pt(&[x0])], None).unwrap();
                let want = x0.powf((-t).exp());
                let got = cert.endpoints[0][0];
                assert!(
                    (got - want).abs() / want < 1e-6,
                    "x0={x0} t={t}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn linear_field_matches_matrix_exponential() {
        let a = [[0.2, -0.5, 0.0], [0.4, 0.1, 0.0], [0.0; 3]];
        let f = AnalyticVF::linear(2, a).with_domain(BoxRegion::cube(2, 4.0));
        let x0 = pt(&[0.3, -0.4]);
        let t = 0.8;
        let cert = integrate_flow(&f, t, &[x0], None).unwrap();
        let e = mat_exp(2, a, t);
        let want = [
            e[0][0] * x0[0] + e[0][1] * x0[1],
            e[1][0] * x0[0] + e[1][1] * x0[1],
        ];
        let got = cert.endpoints[0];
        let err = ((got[0] - want[0]).powi(2) + (got[1] - want[1]).powi(2)).sqrt();
        assert!(err < 10.0 * cert.richardson_error.max(1e-12), "err {err}");
    }

    #[test]
    fn group_law_and_reversibility() {
        let f = AnalyticVF::neg_x_log_x();
        let s = pt(&[0.05]);
        let a = integrate_one(&f, &s, 0.3, 1e-5, 0).unwrap();
        let b = integrate_one(&f, &a, 0.4, 1e-5, 0).unwrap();
        let c = integrate_one(&f, &s, 0.7, 1e-5, 0).unwrap();
        assert!((b[0] - c[0]).abs() < 1e-9);
        let back = integrate_flow(&f, -0.7, &[c], Some(1e-5)).unwrap().endpoints[0];
        assert!((back[0] - s[0]).abs() < 1e-9);
    }

    #[test]
    fn flow_domain_escape_is_reported() {
        let f = AnalyticVF::constant(&[1.0]).with_domain(BoxRegion::cube(1, 0.5));
        let err = integrate_flow(&f, 1.0, &[pt(&[0.4])], None);
        assert!(matches!(err, Err(Error::LeftFlowDomain { seed: 0, .. })));
    }

    #[test]
    fn step_halving_converges() {
        let f = AnalyticVF::neg_x_log_x();
        let s = pt(&[0.01]);
        let exact = 0.01f64.powf((-0.5f64).exp());
        let mut last = f64::MAX;
        for h in [1e-2, 1e-3, 1e-4] {
            let got = integrate_one(&f, &s, 0.5, h, 0).unwrap()[0];
            let err = (got - exact).abs();
            assert!(err < last, "h={h}: {err} !< {last}");
            last = err;
        }
    }

    #[test]
    fn certificate_rows_hold_for_neg_x_log_x() {
        let f = AnalyticVF::neg_x_log_x();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(Pt, Pt)> = (4..14)
            .map(|k| {
                let d = 2f64.powi(-k);
                (pt(&[0.0]), pt(&[d]))
            })
            .collect();
        let cert = certify_flow_regularity(&f, 0.7, &pairs, Some(1e-4), &mut rng).unwrap();
        for row in &cert.modulus_rows {
            assert!(
                row.pass,
                "sep {}: measured {} bound {}",
                row.separation, row.measured, row.bound
            );
        }
        // Measured distances follow separation^{e^{-t}} through zero.
        let q = (-0.7f64).exp();
        for row in &cert.modulus_rows {
            let want = row.separation.powf(q);
            assert!((row.measured - want).abs() / want < 1e-4);
        }
    }

    #[test]
    fn certificate_at_time_zero_is_tight() {
        let fld = AnalyticVF::neg_x_log_x();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = [(pt(&[-0.1]), pt(&[0.2])), (pt(&[0.0]), pt(&[0.05]))];
        let cert = certify_flow_regularity(&fld, 0.0, &pairs, None, &mut rng).unwrap();
        for row in &cert.modulus_rows {
            assert_eq!(row.measured, row.separation);
            assert_eq!(row.bound, row.separation);
            assert!(row.pass);
        }
    }

    #[test]
    fn certify_requires_osgood_claim() {
        let f = AnalyticVF::neg_x_log_x().with_claim(Modulus::holder(0.5, 1.0), Some(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            certify_flow_regularity(&f, 0.1, &[(pt(&[0.0]), pt(&[0.1]))], None, &mut rng),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn claimed_modulus_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        AnalyticVF::neg_x_log_x().check_claimed(1_000, &mut rng).unwrap();
        AnalyticVF::sharp2d().check_claimed(1_000, &mut rng).unwrap();
        // Deliberately false claim is caught.
        let bad = AnalyticVF::neg_x_log_x().with_claim(Modulus::log_lipschitz(), Some(0.05));
        assert!(bad.check_claimed(1_000, &mut rng).is_err());
    }

    #[test]
    fn perturbation_of_constant_fields() {
        let x = AnalyticVF::constant(&[0.5])
            .with_domain(BoxRegion::cube(1, 2.0))
            .with_claim(Modulus::log_lipschitz(), Some(1.0));
        let y = AnalyticVF::constant(&[0.3]).with_domain(BoxRegion::cube(1, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seeds = [pt(&[0.0]), pt(&[0.5]), pt(&[-0.5])];
        let rep = flow_distance_under_perturbation(&x, &y, 0.4, &seeds, None, &mut rng).unwrap();
        assert!((rep.measured - 0.4 * 0.2).abs() < 1e-9);
        assert!(rep.pass, "measured {} bound {}", rep.measured, rep.bound);
        // Identical fields: zero distance.
        let rep0 =
            flow_distance_under_perturbation(&x, &x.clone(), 0.4, &seeds, None, &mut rng).unwrap();
        assert_eq!(rep0.measured, 0.0);
        assert!(rep0.pass);
    }

    #[test]
    fn perturbation_by_smoothing_shrinks_with_scale() {
        // Y = low-pass of X at scale nu: flow distance within the bound,
        // and the bound shrinks as nu grows.
        let char_ = crate::spectral::LPChar::standard();
        let tooth = crate::catalog::LogTooth { center: 0.5, r_in: 0.15, r_out: 0.3 };
        let domain = BoxRegion::new(1, &[0.05], &[0.95]);
        let x = AnalyticVF::custom(1, "tooth", move |p, out| {
            out[0] = tooth.value(p[0]);
        })
        .with_domain(domain)
        .with_claim(Modulus::log_lipschitz(), None);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let seeds: Vec<Pt> = (0..12).map(|i| pt(&[0.3 + 0.4 * i as f64 / 11.0])).collect();
        let mut last_bound = f64::MAX;
        for nu in [4usize, 6, 8] {
            let y = crate::catalog::smoothed_tooth_1d(&tooth, nu, &char_, "smoothed")
                .unwrap()
                .with_domain(domain);
            let rep =
                flow_distance_under_perturbation(&x, &y, 0.3, &seeds, Some(1e-4), &mut rng)
                    .unwrap();
            assert!(rep.pass, "nu={nu}: measured {} bound {}", rep.measured, rep.bound);
            assert!(rep.bound < last_bound, "bound not shrinking at nu={nu}");
            last_bound = rep.bound;
        }
    }

    #[test]
    fn pushforward_of_shear_along_smoothed_flow() {
        let char_ = crate::spectral::LPChar::standard();
        let grid = crate::grid::GridSpec::new(1, 4096, 1.0).unwrap();
        let tooth = crate::catalog::LogTooth { center: 0.5, r_in: 0.15, r_out: 0.3 };
        let samples = crate::grid::ScalarField::from_fn(grid, |p| tooth.value(p[0]));
        let poly = crate::involutivity::smoothed_profile_poly(&samples, 6, &char_).unwrap();
        // V = smoothed shear, W = rough shear; both planar.
        let v = AnalyticVF::profile(2, None, 0, 1, poly, "smoothed-shear")
            .with_domain(BoxRegion::new(2, &[-4.0, -4.0], &[4.0, 4.0]));
        let t2 = tooth;
        let w = AnalyticVF::custom(2, "shear", move |p, out| {
            out[0] = t2.value(p[1]);
            out[1] = 0.0;
        })
        .with_domain(BoxRegion::new(2, &[-4.0, -4.0], &[4.0, 4.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Pt> = (0..12)
            .map(|i| pt(&[0.1 * (i as f64 - 6.0), 0.3 + 0.4 * i as f64 / 11.0]))
            .collect();
        let rep = pushforward_c0_bound(&v, &w, 0.4, &pts, Some(1e-4), &mut rng).unwrap();
        assert!(rep.pass, "measured {} bound {}", rep.measured, rep.bound);
    }

    #[test]
    fn pushforward_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = [[0.3, -0.2, 0.0], [0.1, 0.4, 0.0], [0.0; 3]];
        let v = AnalyticVF::linear(2, a).with_domain(BoxRegion::cube(2, 6.0));
        let w = AnalyticVF::constant(&[0.7, -0.1]).with_domain(BoxRegion::cube(2, 6.0));
        let pts: Vec<Pt> = (0..16).map(|_| BoxRegion::cube(2, 0.5).sample(&mut rng)).collect();
        // t = 0: pushforward equals w.
        let rep0 = pushforward_c0_bound(&v, &w, 0.0, &pts, None, &mut rng).unwrap();
        let c0 = w.c0_bound.unwrap();
        assert!((rep0.measured - c0).abs() < 1e-6);
        assert!((rep0.bound - c0).abs() < 1e-12);
        // Linear flow pushforward of a constant: e^{At} c.
        let t = 0.6;
        let rep = pushforward_c0_bound(&v, &w, t, &pts, Some(1e-4), &mut rng).unwrap();
        let e = mat_exp(2, a, t);
        let want = {
            let c = [0.7, -0.1];
            let r = [e[0][0] * c[0] + e[0][1] * c[1], e[1][0] * c[0] + e[1][1] * c[1]];
            (r[0] * r[0] + r[1] * r[1]).sqrt()
        };
        assert!((rep.measured - want).abs() < 1e-4, "{} vs {want}", rep.measured);
        assert!(rep.pass);
    }

    #[test]
    fn trig_poly_eval_matches_modes() {
        let grid = crate::grid::GridSpec::new(1, 256, 1.0).unwrap();
        let f = crate::grid::ScalarField::from_fn(grid, |p| {
            1.5 + (std::f64::consts::TAU * 3.0 * p[0]).sin()
                - 2.0 * (std::f64::consts::TAU * 7.0 * p[0]).cos()
        });
        let poly = TrigPoly1d::from_spectrum(1.0, &f.spectrum(), 16);
        for i in 0..33 {
            let y = i as f64 / 33.0 + 0.001;
            let want = 1.5 + (std::f64::consts::TAU * 3.0 * y).sin()
                - 2.0 * (std::f64::consts::TAU * 7.0 * y).cos();
            assert!((poly.value(y) - want).abs() < 1e-10);
            let dwant = std::f64::consts::TAU * 3.0 * (std::f64::consts::TAU * 3.0 * y).cos()
                + 2.0 * std::f64::consts::TAU * 7.0 * (std::f64::consts::TAU * 7.0 * y).sin();
            assert!((poly.derivative(y) - dwant).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_interp_reproduces_linear_data() {
        let grid = crate::grid::GridSpec::new(2, 32, 1.0).unwrap();
        let f = VecField::from_fn(grid, 2, |p, out| {
            out[0] = (std::f64::consts::TAU * p[1]).sin();
            out[1] = (std::f64::consts::TAU * p[0]).cos();
        });
        let interp = GridInterpVF::new(f);
        let mut out = [0.0; 2];
        interp.eval(&[0.25, 0.5], &mut out);
        assert!((out[0] - 0.0).abs() < 1e-2);
        assert!((out[1] - 0.0).abs() < 1e-2);
        // Exactly on a node it matches exactly.
        interp.eval(&[0.0, 0.25], &mut out);
        assert!((out[0] - 1.0).abs() < 1e-12);
    }
}
