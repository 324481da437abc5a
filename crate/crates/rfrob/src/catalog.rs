//! Named catalog of moduli, rough profiles, vector fields, and
//! declared-commuting pairs used by the experiments and the CLI.
//!
//! Catalog ids:
//! - moduli: `loglip`, `lip:<L>`, `hold:<alpha>:<C>`, `rlog2`,
//!   `idplus:<id>`, `scaled:<c>:<id>`, `dominating:<id>`, `csv:<path>`;
//! - fields: `negxlogx`, `sharp2d`, `const:<c1,...>`, `linear:<a11,a12;...>`,
//!   `shear:a`, `shear:b`, `expr:<text>`;
//! - vanished pairs: `shear2bump` (piecewise-proportional two-bump shear
//!   data) and `rot` (rotational frame against a rotated derivative).

use std::fs;

use crate::error::{Error, Result};
use crate::expr::parse_field_expr;
use crate::flow::{AnalyticVF, BoxRegion};
use crate::grid::{GridSpec, ScalarField};
use crate::involutivity::{smoothed_profile_poly, CommutatorBoundData};
use crate::modulus::Modulus;
use crate::spectral::LPChar;

/// `exp(-1/t)`-glued window: 1 on
/// `|s| <= r_in`, 0 outside `|s| >= r_out`.
pub fn window(s: f64, r_in: f64, r_out: f64) -> f64 {
    crate::spectral::smoothstep((r_out - s.abs()) / (r_out - r_in))
}

fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let g = |u: f64| (-1.0 / u).exp();
    let dg = |u: f64| (-1.0 / u).exp() / (u * u);
    let a = g(t);
    let b = g(1.0 - t);
    (dg(t) * b + a * dg(1.0 - t)) / ((a + b) * (a + b))
}

/// d/ds window(s).
pub fn window_deriv(s: f64, r_in: f64, r_out: f64) -> f64 {
    let sign = if s >= 0.0 { 1.0 } else { -1.0 };
    -sign / (r_out - r_in) * smoothstep_deriv((r_out - s.abs()) / (r_out - r_in))
}

/// Localized log tooth `s log(1/|s|) window(s)` around a center, the basic
/// rough-but-Osgood profile of the catalog. Value 0 at the center.
#[derive(Debug, Clone, Copy)]
pub struct LogTooth {
    pub center: f64,
    pub r_in: f64,
    pub r_out: f64,
}

impl LogTooth {
    pub fn new(center: f64, radius: f64) -> Self {
        LogTooth { center, r_in: radius / 2.0, r_out: radius }
    }

    pub fn value(&self, y: f64) -> f64 {
        let s = y - self.center;
        if s == 0.0 {
            return 0.0;
        }
        s * (1.0 / s.abs()).ln() * window(s, self.r_in, self.r_out)
    }

    /// Analytic derivative; by convention 0 exactly at the center (the
    /// derivative diverges there and the point has measure zero).
    pub fn derivative(&self, y: f64) -> f64 {
        let s = y - self.center;
        if s == 0.0 {
            return 0.0;
        }
        let l = (1.0 / s.abs()).ln();
        (l - 1.0) * window(s, self.r_in, self.r_out)
            + s * l * window_deriv(s, self.r_in, self.r_out)
    }
}

/// Snap a center onto a half-cell of the grid so samples never hit the
/// singular point.
pub fn snap_half_cell(grid: &GridSpec, c: f64) -> f64 {
    let h = grid.cell();
    ((c / h).round() + 0.5) * h
}

/// Parse a modulus catalog id.
pub fn parse_modulus(id: &str) -> Result<Modulus> {
    let parts: Vec<&str> = id.splitn(2, ':').collect();
    match parts[0] {
        "loglip" => Ok(Modulus::log_lipschitz()),
        "rlog2" => Ok(Modulus::r_log2()),
        "lip" => {
            let l: f64 = parts
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::UnknownCatalogId(id.into()))?;
            Ok(Modulus::lipschitz(l))
        }
        "hold" => {
            let rest = parts.get(1).ok_or_else(|| Error::UnknownCatalogId(id.into()))?;
            let nums: Vec<&str> = rest.split(':').collect();
            if nums.len() != 2 {
                return Err(Error::UnknownCatalogId(id.into()));
            }
            let alpha: f64 = nums[0].parse().map_err(|_| Error::UnknownCatalogId(id.into()))?;
            let c: f64 = nums[1].parse().map_err(|_| Error::UnknownCatalogId(id.into()))?;
            Ok(Modulus::holder(alpha, c))
        }
        "idplus" => {
            let inner = parse_modulus(parts.get(1).ok_or_else(|| Error::UnknownCatalogId(id.into()))?)?;
            Ok(Modulus::identity_plus(inner))
        }
        "scaled" => {
            let rest = parts.get(1).ok_or_else(|| Error::UnknownCatalogId(id.into()))?;
            let (c_str, inner_id) =
                rest.split_once(':').ok_or_else(|| Error::UnknownCatalogId(id.into()))?;
            let c: f64 = c_str.parse().map_err(|_| Error::UnknownCatalogId(id.into()))?;
            Ok(Modulus::scaled(c, parse_modulus(inner_id)?))
        }
        "dominating" => {
            let inner = parse_modulus(parts.get(1).ok_or_else(|| Error::UnknownCatalogId(id.into()))?)?;
            Modulus::dominating_osgood(&inner)
        }
        "csv" => {
            let path = parts.get(1).ok_or_else(|| Error::UnknownCatalogId(id.into()))?;
            let text = fs::read_to_string(path)?;
            let mut pts = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with("rho") {
                    continue;
                }
                let (a, b) = line
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("bad modulus csv line `{line}`")))?;
                pts.push((
                    a.trim().parse().map_err(|_| Error::Config("bad rho".into()))?,
                    b.trim().parse().map_err(|_| Error::Config("bad eta".into()))?,
                ));
            }
            Modulus::tabulated(&pts, id)
        }
        _ => Err(Error::UnknownCatalogId(id.into())),
    }
}

/// The two disjoint teeth behind the piecewise-proportional constructions.
pub fn two_bumps() -> (LogTooth, LogTooth) {
    (LogTooth::new(0.34, 0.12), LogTooth::new(0.66, 0.12))
}

fn shear_profile_a(y: f64) -> f64 {
    let (a1, a2) = two_bumps();
    a1.value(y) + a2.value(y)
}

fn shear_profile_b(y: f64) -> f64 {
    let (a1, a2) = two_bumps();
    2.0 * a1.value(y) + a2.value(y)
}

/// Parse a field catalog id.
pub fn parse_field(id: &str) -> Result<AnalyticVF> {
    if let Some(rest) = id.strip_prefix("expr:") {
        let e = parse_field_expr(rest)?;
        return Ok(AnalyticVF::from_expr(&e));
    }
    if let Some(rest) = id.strip_prefix("const:") {
        let c: Vec<f64> = rest
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::UnknownCatalogId(id.into())))
            .collect::<Result<_>>()?;
        return Ok(AnalyticVF::constant(&c));
    }
    if let Some(rest) = id.strip_prefix("linear:") {
        let rows: Vec<&str> = rest.split(';').collect();
        let dim = rows.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::UnknownCatalogId(id.into()));
        }
        let mut a = [[0.0; 3]; 3];
        for (r, row) in rows.iter().enumerate() {
            let cols: Vec<&str> = row.split(',').collect();
            if cols.len() != dim {
                return Err(Error::UnknownCatalogId(id.into()));
            }
            for (c, v) in cols.iter().enumerate() {
                a[r][c] = v.trim().parse().map_err(|_| Error::UnknownCatalogId(id.into()))?;
            }
        }
        return Ok(AnalyticVF::linear(dim, a));
    }
    match id {
        "negxlogx" => Ok(AnalyticVF::neg_x_log_x()),
        "sharp2d" => Ok(AnalyticVF::sharp2d()),
        "shear:a" => Ok(AnalyticVF::shear_fn("shear:a", shear_profile_a)
            .with_claim(Modulus::log_lipschitz(), Some(3.0))),
        "shear:b" => Ok(AnalyticVF::shear_fn("shear:b", shear_profile_b)
            .with_claim(Modulus::log_lipschitz(), Some(5.0))),
        _ => Err(Error::UnknownCatalogId(id.into())),
    }
}

/// One-dimensional grid samples of a tooth profile.
pub fn tooth_field(grid: GridSpec, tooth: &LogTooth) -> ScalarField {
    ScalarField::from_fn(grid, |p| tooth.value(p[0]))
}

/// Annihilating pair ids for the partial-product decay experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VanishedPairId {
    /// Shear-derived Wronskian data of two piecewise-proportional two-bump
    /// profiles: `f = (a, -b)`, `g = (b', a')` with `a b' - b a' = 0`
    /// pointwise. The smoothed cross term is driven by filter tails, so the
    /// decay is much faster than the generic rate.
    ShearTwoBump,
    /// Rotational pair: `f = (cos th, sin th)` against
    /// `g = mu (-sin th, cos th)` with `mu` a spectral derivative rough
    /// datum colocated with `th`. Exhibits the generic decay rate.
    Rotational,
    /// The literal proportional pair `f = (a, -2a)`, `g = (2a', a')`. Its
    /// partial products cancel bit-exactly (scalar multiples commute with
    /// the low-pass), so every sup norm is roundoff; kept as a degenerate
    /// sanity case.
    Proportional,
}

impl VanishedPairId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shear2bump" => Ok(Self::ShearTwoBump),
            "rot" => Ok(Self::Rotational),
            "prop" => Ok(Self::Proportional),
            _ => Err(Error::UnknownCatalogId(s.into())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::ShearTwoBump => "shear2bump",
            Self::Rotational => "rot",
            Self::Proportional => "prop",
        }
    }
}

/// Build an annihilating pair on a one-dimensional grid. The pointwise dot
/// product of the returned fields vanishes to roundoff by construction.
pub fn vanished_pair(
    id: VanishedPairId,
    grid: GridSpec,
) -> Result<(Vec<ScalarField>, Vec<ScalarField>)> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid("vanished pairs are one-dimensional".into()));
    }
    match id {
        VanishedPairId::ShearTwoBump => {
            let (mut t1, mut t2) = two_bumps();
            t1.center = snap_half_cell(&grid, t1.center);
            t2.center = snap_half_cell(&grid, t2.center);
            let a1 = ScalarField::from_fn(grid, |p| t1.value(p[0]));
            let a2 = ScalarField::from_fn(grid, |p| t2.value(p[0]));
            let d1 = ScalarField::from_fn(grid, |p| t1.derivative(p[0]));
            let d2 = ScalarField::from_fn(grid, |p| t2.derivative(p[0]));
            let a = a1.axpy(1.0, &a2)?; // A1 + A2
            let b = a2.axpy(2.0, &a1)?; // 2 A1 + A2
            let da = d1.axpy(1.0, &d2)?;
            let db = d2.axpy(2.0, &d1)?;
            Ok((vec![a, b.scale(-1.0)], vec![db, da]))
        }
        VanishedPairId::Rotational => {
            let mut th = LogTooth::new(0.5, 0.3);
            th.center = snap_half_cell(&grid, th.center);
            let m = ScalarField::from_fn(grid, |p| th.value(p[0]));
            let mu = m.derivative(0)?;
            let cos_th = ScalarField::from_fn(grid, |p| th.value(p[0]).cos());
            let sin_th = ScalarField::from_fn(grid, |p| th.value(p[0]).sin());
            let g1 = sin_th.scale(-1.0).mul(&mu)?;
            let g2 = cos_th.mul(&mu)?;
            Ok((vec![cos_th, sin_th], vec![g1, g2]))
        }
        VanishedPairId::Proportional => {
            let mut t1 = LogTooth::new(0.5, 0.3);
            t1.center = snap_half_cell(&grid, t1.center);
            let a = ScalarField::from_fn(grid, |p| t1.value(p[0]));
            let da = ScalarField::from_fn(grid, |p| t1.derivative(p[0]));
            Ok((vec![a.clone(), a.scale(-2.0)], vec![da.scale(2.0), da]))
        }
    }
}

/// Rough canonical pair in three dimensions:
/// `X_1 = e_1 + c(y) e_3`, `X_2 = e_2 + 2 c(y) e_3` with a log tooth `c`.
/// Proportional coefficients, so the pair commutes identically.
pub fn canon3_pair() -> (AnalyticVF, AnalyticVF) {
    let tooth = LogTooth::new(0.5, 0.3);
    let domain = BoxRegion::new(3, &[-4.0, -4.0, 0.02], &[4.0, 4.0, 0.98]);
    let t1 = tooth;
    let x1 = AnalyticVF::custom(3, "canon3:1", move |p, out| {
        out[0] = 1.0;
        out[1] = 0.0;
        out[2] = t1.value(p[2]);
    })
    .with_domain(domain)
    .with_claim(Modulus::log_lipschitz(), Some(3.0));
    let t2 = tooth;
    let x2 = AnalyticVF::custom(3, "canon3:2", move |p, out| {
        out[0] = 0.0;
        out[1] = 1.0;
        out[2] = 2.0 * t2.value(p[2]);
    })
    .with_domain(domain)
    .with_claim(Modulus::log_lipschitz(), Some(5.0));
    (x1, x2)
}

/// Packed dyadic log teeth with alternating proportionality weights. On
/// each tooth the second profile is an exact scalar multiple of the first,
/// so the pair of profiles has vanishing cross-Wronskian pointwise, while
/// no single constant works globally. Low-pass filtering then produces a
/// genuinely slowly decaying bracket: at scale `nu` the teeth of width
/// about `2^-nu` blur into their differently weighted neighbors.
pub fn multiscale_teeth() -> Vec<(LogTooth, f64)> {
    let mut teeth = Vec::new();
    let mut cursor = 0.33;
    for m in 5..=10 {
        let w = 2f64.powi(-m);
        for weight in [1.0, 2.0] {
            let center = cursor + w;
            teeth.push((LogTooth { center, r_in: 0.4 * w, r_out: w }, weight));
            cursor += 2.25 * w;
        }
    }
    teeth
}

/// Profile samples for the multiscale canonical pair (commuting as
/// distributions, non-proportional globally).
pub fn canon3_multiscale_profiles(grid: GridSpec) -> Result<(ScalarField, ScalarField)> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid("profiles are one-dimensional".into()));
    }
    let teeth: Vec<(LogTooth, f64)> = multiscale_teeth()
        .into_iter()
        .map(|(mut t, l)| {
            t.center = snap_half_cell(&grid, t.center);
            (t, l)
        })
        .collect();
    let b1 = ScalarField::from_fn(grid, |p| {
        teeth.iter().map(|(t, _)| t.value(p[0])).sum::<f64>()
    });
    let b2 = ScalarField::from_fn(grid, |p| {
        teeth.iter().map(|(t, l)| l * t.value(p[0])).sum::<f64>()
    });
    Ok((b1, b2))
}

/// Smoothed multiscale canonical pair at low-pass scale `nu`, as exact
/// trigonometric-polynomial fields with growth data for the commutator
/// bound.
pub fn canon3_multiscale_smoothed(
    nu: usize,
    char_: &LPChar,
) -> Result<(AnalyticVF, AnalyticVF, CommutatorBoundData)> {
    let grid = GridSpec::new(1, 1 << 14, 1.0)?;
    let (b1, b2) = canon3_multiscale_profiles(grid)?;
    let p1 = smoothed_profile_poly(&b1, nu, char_)?;
    let p2 = smoothed_profile_poly(&b2, nu, char_)?;
    // Dense Wronskian sup for the bracket bound.
    let n = 16 * (p1.kmax().max(p2.kmax()) + 1);
    let mut wsup: f64 = 0.0;
    for i in 0..n {
        let y = i as f64 / n as f64;
        let w = p1.value(y) * p2.derivative(y) - p2.value(y) * p1.derivative(y);
        wsup = wsup.max(w.abs());
    }
    let c1_x = (1.0 + p1.sup_value().powi(2)).sqrt() + p1.sup_derivative();
    let c1_y = (1.0 + p2.sup_value().powi(2)).sqrt() + p2.sup_derivative();
    let domain = BoxRegion::new(3, &[-4.0, -4.0, -4.0], &[4.0, 4.0, 4.0]);
    let x1 = AnalyticVF::profile(3, Some(0), 2, 2, p1, &format!("canon3ms:1:nu{nu}"))
        .with_domain(domain);
    let x2 = AnalyticVF::profile(3, Some(1), 2, 2, p2, &format!("canon3ms:2:nu{nu}"))
        .with_domain(domain);
    Ok((x1, x2, CommutatorBoundData { c1_x, c1_y, bracket_sup: wsup }))
}

/// Smoothed shear `( (S_nu p)(y), 0 )` as an exact trigonometric field.
pub fn smoothed_shear(
    profile: &ScalarField,
    nu: usize,
    char_: &LPChar,
    label: &str,
) -> Result<AnalyticVF> {
    let poly = smoothed_profile_poly(profile, nu, char_)?;
    Ok(AnalyticVF::profile(2, None, 0, 1, poly, label)
        .with_domain(BoxRegion::new(2, &[-8.0, -8.0], &[8.0, 8.0])))
}

/// Smoothed one-dimensional tooth `(S_nu(chi c))(x)` as a field, the
/// low-pass approximation of `negxlogx`-type profiles.
pub fn smoothed_tooth_1d(
    tooth: &LogTooth,
    nu: usize,
    char_: &LPChar,
    label: &str,
) -> Result<AnalyticVF> {
    let grid = GridSpec::new(1, 1 << 13, 1.0)?;
    let samples = ScalarField::from_fn(grid, |p| tooth.value(p[0]));
    let poly = smoothed_profile_poly(&samples, nu, char_)?;
    Ok(AnalyticVF::profile(1, None, 0, 0, poly, label)
        .with_domain(BoxRegion::new(1, &[-8.0], &[8.0])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulus::is_osgood_heuristic;

    #[test]
    fn modulus_ids_parse() {
        for id in [
            "loglip",
            "lip:2.0",
            "hold:0.5:1.0",
            "rlog2",
            "idplus:loglip",
            "scaled:2:loglip",
            "dominating:loglip",
        ] {
            let m = parse_modulus(id).unwrap();
            assert!(m.eval(0.01) > 0.0, "{id}");
        }
        assert!(parse_modulus("nope").is_err());
        assert!(parse_modulus("lip:x").is_err());
        // Parsed log-Lipschitz is Osgood per the heuristic.
        assert!(is_osgood_heuristic(&parse_modulus("loglip").unwrap()).is_osgood);
    }

    #[test]
    fn field_ids_parse() {
        assert_eq!(parse_field("negxlogx").unwrap().dim, 1);
        assert_eq!(parse_field("sharp2d").unwrap().dim, 2);
        assert_eq!(parse_field("const:1,2,3").unwrap().dim, 3);
        assert_eq!(parse_field("linear:0,1;-1,0").unwrap().dim, 2);
        assert_eq!(parse_field("expr:(1, y*log(abs(y)))").unwrap().dim, 2);
        assert_eq!(parse_field("shear:a").unwrap().dim, 2);
        assert!(parse_field("wat").is_err());
    }

    #[test]
    fn tooth_derivative_matches_finite_difference() {
        let t = LogTooth::new(0.5, 0.2);
        for &y in &[0.45, 0.48, 0.52, 0.56, 0.58] {
            let h = 1e-7;
            let fd = (t.value(y + h) - t.value(y - h)) / (2.0 * h);
            let an = t.derivative(y);
            assert!((fd - an).abs() < 1e-5, "y={y}: fd {fd} vs {an}");
        }
        // Zero outside the window.
        assert_eq!(t.value(0.75), 0.0);
        assert_eq!(t.derivative(0.75), 0.0);
    }

    #[test]
    fn vanished_pairs_annihilate_pointwise() {
        let grid = GridSpec::new(1, 4096, 1.0).unwrap();
        for id in [
            VanishedPairId::ShearTwoBump,
            VanishedPairId::Rotational,
            VanishedPairId::Proportional,
        ] {
            let (f, g) = vanished_pair(id, grid).unwrap();
            let mut dot = ScalarField::zeros(grid);
            let mut fsup: f64 = 0.0;
            let mut gsup: f64 = 0.0;
            for (a, b) in f.iter().zip(&g) {
                dot = dot.axpy(1.0, &a.mul(b).unwrap()).unwrap();
                fsup = fsup.max(a.sup_norm());
                gsup = gsup.max(b.sup_norm());
            }
            let tol = 1e-10 * fsup * gsup;
            assert!(
                dot.sup_norm() <= tol,
                "{id:?}: dot sup {} > {tol}",
                dot.sup_norm()
            );
        }
    }

    #[test]
    fn multiscale_profiles_annihilate_pointwise() {
        let grid = GridSpec::new(1, 1 << 14, 1.0).unwrap();
        let (b1, b2) = canon3_multiscale_profiles(grid).unwrap();
        // Pointwise cross-Wronskian with analytic derivatives: on every
        // tooth the weight is an exact power of two, so the cancellation is
        // exact in floating point.
        let teeth: Vec<(LogTooth, f64)> = multiscale_teeth()
            .into_iter()
            .map(|(mut t, l)| {
                t.center = snap_half_cell(&grid, t.center);
                (t, l)
            })
            .collect();
        let d1 = ScalarField::from_fn(grid, |p| {
            teeth.iter().map(|(t, _)| t.derivative(p[0])).sum::<f64>()
        });
        let d2 = ScalarField::from_fn(grid, |p| {
            teeth.iter().map(|(t, l)| l * t.derivative(p[0])).sum::<f64>()
        });
        let w = b1.mul(&d2).unwrap().axpy(-1.0, &b2.mul(&d1).unwrap()).unwrap();
        assert_eq!(w.sup_norm(), 0.0);
    }

    #[test]
    fn canon3_pair_evaluates() {
        let (x1, x2) = canon3_pair();
        let p = [0.3, -0.2, 0.55];
        let v1 = x1.eval_pt(&crate::flow::pt(&p));
        let v2 = x2.eval_pt(&crate::flow::pt(&p));
        assert_eq!(v1[0], 1.0);
        assert_eq!(v2[1], 1.0);
        assert!((v2[2] - 2.0 * v1[2]).abs() < 1e-15);
    }
}
