//! Moduli of continuity: a small catalog of concave nondecreasing moduli,
//! a numerical Osgood-condition heuristic, the flow modulus solver for
//! `int_r^R ds/eta(s) = t`, and empirical modulus extraction from samples.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::quad;

const E_INV: f64 = 0.36787944117144233; // 1/e
const E_M2: f64 = 0.1353352832366127; // 1/e^2

#[derive(Debug, Clone)]
enum Kind {
    /// L * r
    Lipschitz(f64),
    /// C * r^alpha
    Holder { alpha: f64, c: f64 },
    /// r log(1/r) for r <= 1/e, constant 1/e beyond.
    LogLipschitz,
    /// r log^2(1/r) for r <= 1/e^2, constant 4/e^2 beyond. The cap sits at
    /// the maximum of r log^2(1/r) so the modulus stays nondecreasing.
    RLog2,
    /// r + eta(r)
    IdentityPlus(Arc<Modulus>),
    /// c * eta(r)
    Scaled(f64, Arc<Modulus>),
    /// Piecewise-linear table (rho ascending), linear interpolation,
    /// constant extension beyond the last knot, linear from (0,0) below the
    /// first.
    Tabulated { rho: Arc<Vec<f64>>, eta: Arc<Vec<f64>> },
}

/// A modulus of continuity: concave, nondecreasing, positive for r > 0,
/// vanishing at 0+.
#[derive(Debug, Clone)]
pub struct Modulus {
    kind: Kind,
    label: String,
}

impl Modulus {
    pub fn lipschitz(l: f64) -> Self {
        Modulus { kind: Kind::Lipschitz(l), label: format!("lip:{l}") }
    }

    pub fn holder(alpha: f64, c: f64) -> Self {
        Modulus { kind: Kind::Holder { alpha, c }, label: format!("hold:{alpha}:{c}") }
    }

    pub fn log_lipschitz() -> Self {
        Modulus { kind: Kind::LogLipschitz, label: "loglip".into() }
    }

    pub fn r_log2() -> Self {
        Modulus { kind: Kind::RLog2, label: "rlog2".into() }
    }

    pub fn identity_plus(m: Modulus) -> Self {
        let label = format!("idplus:{}", m.label);
        Modulus { kind: Kind::IdentityPlus(Arc::new(m)), label }
    }

    pub fn scaled(c: f64, m: Modulus) -> Self {
        let label = format!("scaled:{c}:{}", m.label);
        Modulus { kind: Kind::Scaled(c, Arc::new(m)), label }
    }

    /// Tabulated modulus from (rho, eta) knots. The input is replaced by its
    /// upper concave envelope so the modulus invariants hold by construction.
    pub fn tabulated(points: &[(f64, f64)], label: &str) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Degenerate("tabulated modulus needs >= 2 points".into()));
        }
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if pts[0].0 < 0.0 || pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite() || p.1 < 0.0) {
            return Err(Error::InvalidModulus("tabulated knots must be finite, rho, eta >= 0".into()));
        }
        if pts[0].0 > 0.0 {
            pts.insert(0, (0.0, 0.0));
        }
        let hull = concave_majorant(&pts);
        let (rho, eta): (Vec<f64>, Vec<f64>) = hull.into_iter().unzip();
        Ok(Modulus {
            kind: Kind::Tabulated { rho: Arc::new(rho), eta: Arc::new(eta) },
            label: label.to_string(),
        })
    }

    /// Dominating Osgood modulus `zeta(r) = 2 sup_{t<=r} eta(t) sqrt(int_t^1 ds/eta(s))`,
    /// tabulated on a log grid and envelope-corrected. Any modulus dominating
    /// `eta` with the Osgood property works here; this is one concrete choice.
    pub fn dominating_osgood(m: &Modulus) -> Result<Self> {
        let mut knots = Vec::new();
        let mut sup: f64 = 0.0;
        // March t upward on a log grid, maintaining the running sup.
        let lo = 1e-14f64.ln();
        let hi = 1.0f64.ln();
        let steps = 257;
        for i in 0..=steps {
            let t = (lo + (hi - lo) * i as f64 / steps as f64).exp();
            let tail = if t < 1.0 { m.integrate_inverse(t, 1.0) } else { 0.0 };
            sup = sup.max(2.0 * m.eval(t) * tail.max(0.0).sqrt());
            knots.push((t, sup));
        }
        // Constant beyond r = 1.
        knots.push((2.0, sup));
        Modulus::tabulated(&knots, &format!("dominating:{}", m.label))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// eta(r) for r > 0.
    pub fn eval(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Lipschitz(l) => l * r,
            Kind::Holder { alpha, c } => c * r.powf(*alpha),
            Kind::LogLipschitz => {
                if r <= 0.0 {
                    0.0
                } else if r <= E_INV {
                    r * (1.0 / r).ln()
                } else {
                    E_INV
                }
            }
            Kind::RLog2 => {
                if r <= 0.0 {
                    0.0
                } else if r <= E_M2 {
                    let l = (1.0 / r).ln();
                    r * l * l
                } else {
                    4.0 * E_M2
                }
            }
            Kind::IdentityPlus(m) => r + m.eval(r),
            Kind::Scaled(c, m) => c * m.eval(r),
            Kind::Tabulated { rho, eta } => {
                if r <= 0.0 {
                    return 0.0;
                }
                match rho.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
                    Ok(i) => eta[i],
                    Err(0) => eta[0],
                    Err(i) if i == rho.len() => eta[eta.len() - 1],
                    Err(i) => {
                        let t = (r - rho[i - 1]) / (rho[i] - rho[i - 1]);
                        eta[i - 1] + t * (eta[i] - eta[i - 1])
                    }
                }
            }
        }
    }

    /// Interior kink locations, used as quadrature panel breakpoints.
    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            Kind::LogLipschitz => vec![E_INV],
            Kind::RLog2 => vec![E_M2],
            Kind::IdentityPlus(m) => m.breakpoints(),
            Kind::Scaled(_, m) => m.breakpoints(),
            Kind::Tabulated { rho, .. } => rho.iter().copied().filter(|&r| r > 0.0).collect(),
            _ => Vec::new(),
        }
    }

    /// `int_a^b ds / eta(s)` for `0 < a <= b`, by adaptive quadrature on
    /// log-spaced panels (the substitution s = e^u makes the integrand
    /// smooth away from modulus kinks, which become panel boundaries).
    pub fn integrate_inverse(&self, a: f64, b: f64) -> f64 {
        assert!(a > 0.0 && b >= a, "integrate_inverse needs 0 < a <= b");
        if a == b {
            return 0.0;
        }
        let ua = a.ln();
        let ub = b.ln();
        let mut panels = vec![ua];
        for bp in self.breakpoints() {
            let u = bp.ln();
            if u > ua && u < ub {
                panels.push(u);
            }
        }
        // Split long log ranges into unit panels.
        let mut refined = Vec::new();
        panels.push(ub);
        panels.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for w in panels.windows(2) {
            let n = ((w[1] - w[0]).ceil() as usize).max(1);
            for i in 0..n {
                refined.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
            }
        }
        refined.push(ub);
        quad::adaptive(|u| { let s = u.exp(); s / self.eval(s) }, &refined, 1e-11)
    }

    /// Check the modulus invariants on a log-spaced sample: positive,
    /// nondecreasing, concave (midpoint test), vanishing at 0+.
    pub fn invariant_report(&self) -> ModulusInvariants {
        let mut rs = Vec::with_capacity(64);
        for i in 0..64 {
            rs.push(10f64.powf(-12.0 + 12.0 * i as f64 / 63.0));
        }
        let vals: Vec<f64> = rs.iter().map(|&r| self.eval(r)).collect();
        let positive = vals.iter().all(|&v| v > 0.0);
        let nondecreasing = vals.windows(2).all(|w| w[1] >= w[0] - 1e-14 * w[0].abs().max(1e-300));
        let mut concave = true;
        for i in 1..rs.len() - 1 {
            // Chord test on the (non-uniform) sample.
            let t = (rs[i] - rs[i - 1]) / (rs[i + 1] - rs[i - 1]);
            let chord = vals[i - 1] * (1.0 - t) + vals[i + 1] * t;
            if vals[i] < chord - 1e-10 * vals[i].abs().max(1e-300) {
                concave = false;
            }
        }
        // Vanishing toward 0 is judged by decade decrease at the smallest
        // tested scales (absolute thresholds would reject slow power laws).
        let vanishes_at_zero = self.eval(1e-12) <= 0.75 * self.eval(1e-6) + 1e-300;
        ModulusInvariants { positive, nondecreasing, concave, vanishes_at_zero }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModulusInvariants {
    pub positive: bool,
    pub nondecreasing: bool,
    pub concave: bool,
    pub vanishes_at_zero: bool,
}

impl ModulusInvariants {
    pub fn all_hold(&self) -> bool {
        self.positive && self.nondecreasing && self.concave && self.vanishes_at_zero
    }
}

/// Upper concave envelope of points sorted by rho (monotone-chain hull,
/// keeping the upper boundary). Output slopes are nonincreasing.
fn concave_majorant(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        if let Some(last) = hull.last() {
            if p.0 == last.0 {
                if p.1 > last.1 {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Remove b if it lies below chord a-p (keeps the envelope above all points).
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Growth table and verdict of the numerical Osgood test.
///
/// Heuristic: write `I(eps) = int_eps^1 dr/eta(r)` and look at its decade
/// increments `D_k = I(10^-(k+1)) - I(10^-k)`. Divergence of `sum_k D_k` is
/// judged from a power-law fit `D_k ~ k^-p` over the sampled window: the sum
/// diverges (no plateau) when `p <= 1`, up to fit tolerance. Geometric
/// decay (convergent integrals of strict Holder type) shows up as a `p`
/// that grows across the window; a stable `p` above 1.2 (e.g. quadratic
/// tails) means convergence. Near-Lipschitz convergent moduli can fool the
/// test at these scales; such verdicts are flagged low-confidence.
#[derive(Debug, Clone)]
pub struct OsgoodReport {
    pub is_osgood: bool,
    pub low_confidence: bool,
    /// Rows (eps, int_eps^1 dr/eta).
    pub table: Vec<(f64, f64)>,
    /// Fitted decay powers of the increments over the early / late half of
    /// the window.
    pub p_early: f64,
    pub p_late: f64,
}

pub fn is_osgood_heuristic(m: &Modulus) -> OsgoodReport {
    let mut table = Vec::new();
    for k in 3..=12 {
        let eps = 10f64.powi(-k);
        table.push((eps, m.integrate_inverse(eps, 1.0)));
    }
    let increments: Vec<(f64, f64)> = table
        .windows(2)
        .enumerate()
        .map(|(i, w)| ((i + 3) as f64, w[1].1 - w[0].1))
        .collect();
    let total = table.last().unwrap().1;
    // A vanishing increment is a plateau: the integral has converged.
    if increments.iter().any(|&(_, d)| d <= 1e-12 * total.abs().max(1.0)) {
        return OsgoodReport {
            is_osgood: false,
            low_confidence: false,
            table,
            p_early: f64::INFINITY,
            p_late: f64::INFINITY,
        };
    }
    let fit_p = |rows: &[(f64, f64)]| -> f64 {
        let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
        -crate::stats::linear_fit(&xs, &ys).slope
    };
    let half = increments.len() / 2 + 1;
    let p_early = fit_p(&increments[..half]);
    let p_late = fit_p(&increments[increments.len() - half..]);
    let is_osgood = p_late <= 1.2 && (p_late - p_early) <= 0.5;
    let low_confidence = (0.8..=1.6).contains(&p_late) || (p_late - p_early) >= 0.25;
    OsgoodReport { is_osgood, low_confidence, table, p_early, p_late }
}

const R_CAP: f64 = 1e12;

/// Flow modulus: the unique `R >= r` with `int_r^R ds/eta(s) = t`, solved by
/// bracketing plus Newton refinement on the adaptively quadratured integral.
/// Relative accuracy about 1e-8; `t = 0` returns `r` exactly.
pub fn flow_modulus(m: &Modulus, t: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Range(format!("flow modulus needs r > 0, got {r}")));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Range(format!("flow modulus needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(r);
    }
    // Bracket: double R until the integral reaches t.
    let mut hi = r * 2.0;
    let mut acc = m.integrate_inverse(r, hi);
    let mut lo = r;
    let mut acc_lo = 0.0;
    while acc < t {
        if hi > R_CAP {
            return Err(Error::FlowModulusDiverged { t, r });
        }
        lo = hi;
        acc_lo = acc;
        hi *= 2.0;
        acc += m.integrate_inverse(lo, hi);
    }
    // Newton with bisection guard on g(R) = int_r^R - t; g'(R) = 1/eta(R).
    let mut x = 0.5 * (lo + hi);
    let mut g_low = acc_lo - t;
    for _ in 0..80 {
        let g = g_low + m.integrate_inverse(lo, x);
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
            g_low = g;
        }
        let step = -g * m.eval(x);
        let mut next = x + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-9 * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Relative residual of the scaling identity: the flow modulus of `c*eta`
/// at time `t` must equal the flow modulus of `eta` at time `c*t`.
pub fn flow_modulus_scaling_check(m: &Modulus, c: f64, t: f64, r: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Range("scaling constant must be positive".into()));
    }
    let scaled = Modulus::scaled(c, m.clone());
    let lhs = flow_modulus(&scaled, t, r)?;
    let rhs = flow_modulus(m, c * t, r)?;
    Ok((lhs - rhs).abs() / rhs)
}

/// Relative residual of the composition identity
/// `etaF(t, etaF(s, r)) = etaF(t + s, r)`.
pub fn flow_modulus_semigroup_check(m: &Modulus, t: f64, s: f64, r: f64) -> Result<f64> {
    let inner = flow_modulus(m, s, r)?;
    let lhs = flow_modulus(m, t, inner)?;
    let rhs = flow_modulus(m, t + s, r)?;
    Ok((lhs - rhs).abs() / rhs)
}

/// Cache of flow-modulus values keyed by (t, r) bit patterns.
#[derive(Debug)]
pub struct FlowModulusTable {
    base: Modulus,
    cache: Mutex<HashMap<(u64, u64), f64>>,
}

impl FlowModulusTable {
    pub fn new(base: Modulus) -> Self {
        FlowModulusTable { base, cache: Mutex::new(HashMap::new()) }
    }

    pub fn base(&self) -> &Modulus {
        &self.base
    }

    pub fn eval(&self, t: f64, r: f64) -> Result<f64> {
        let key = (t.to_bits(), r.to_bits());
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = flow_modulus(&self.base, t, r)?;
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }
}

/// Concave majorant of measured oscillations: for each requested scale,
/// `osc(rho) = sup {|f(x) - f(y)| : |x - y| <= rho}` over the samples, then
/// the upper concave envelope through (0, 0), extended by linear
/// interpolation between knots and constant beyond the last.
pub fn empirical_modulus(
    samples: &[(Vec<f64>, Vec<f64>)],
    scales: &[f64],
) -> Result<Modulus> {
    if samples.len() < 2 {
        return Err(Error::Degenerate("empirical modulus needs >= 2 samples".into()));
    }
    if scales.is_empty() || scales.windows(2).any(|w| w[1] <= w[0]) || scales[0] <= 0.0 {
        return Err(Error::Range("scales must be positive ascending".into()));
    }
    let mut osc = vec![0.0f64; scales.len()];
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let (pi, vi) = &samples[i];
            let (pj, vj) = &samples[j];
            let d2: f64 = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum();
            let d = d2.sqrt();
            let dv2: f64 = vi.iter().zip(vj).map(|(a, b)| (a - b) * (a - b)).sum();
            let dv = dv2.sqrt();
            // Contributes to every scale >= d.
            for (s, o) in scales.iter().zip(osc.iter_mut()) {
                if d <= *s && dv > *o {
                    *o = dv;
                }
            }
        }
    }
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(scales.iter().copied().zip(osc.iter().copied()));
    let hull = concave_majorant(&pts);
    let (rho, eta): (Vec<f64>, Vec<f64>) = hull.into_iter().unzip();
    Ok(Modulus {
        kind: Kind::Tabulated { rho: Arc::new(rho), eta: Arc::new(eta) },
        label: "empirical".into(),
    })
}
