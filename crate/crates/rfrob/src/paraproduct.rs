//! Frequency-split products: the three-way block decomposition of `P_l(fg)`,
//! products of positive- with negative-order data, and the decay experiment
//! for partial products of pairs whose dot product vanishes.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::spectral::{hz_norm, lp_all_blocks, lp_block, lp_partial_sum, HZNorm, LPChar};

/// Relative spectral mass allowed above n/4 before a product is declared
/// unresolved.
const ALIAS_TOL: f64 = 1e-10;

fn check_resolved(f: &ScalarField, name: &str) -> Result<()> {
    let n = f.grid().points_per_axis() as f64;
    let mass = f.spectral_mass_above(n / 4.0 / f.grid().box_side());
    if mass > ALIAS_TOL {
        return Err(Error::AliasingRisk(format!(
            "{name} has relative spectral mass {mass:.3e} above n/4"
        )));
    }
    Ok(())
}

/// The three frequency interactions of `P_l(fg)`: low-high (each block of f
/// against the much lower part of g), high-low, and the near-diagonal block
/// pairs. Index windows: `j, k in [l-2, l+2]` against `S_{j-7}`, `S_{k-7}`
/// (with `S_m = 0` for `m < 0`), and diagonal `|j-k| <= 6`, `j, k >= l-8`.
#[derive(Debug, Clone)]
pub struct ParaTriple {
    pub low_high: ScalarField,
    pub high_low: ScalarField,
    pub diagonal: ScalarField,
    pub block_index: usize,
}

impl ParaTriple {
    /// Sum of the three interaction fields.
    pub fn total(&self) -> ScalarField {
        self.low_high
            .axpy(1.0, &self.high_low)
            .unwrap()
            .axpy(1.0, &self.diagonal)
            .unwrap()
    }
}

/// Precomputed block data for one input of the decomposition.
struct BlockData {
    blocks: Vec<ScalarField>,
    partial: Vec<ScalarField>,
}

impl BlockData {
    fn build(f: &ScalarField, char_: &LPChar) -> BlockData {
        let blocks = lp_all_blocks(f, char_);
        // partial[m] = S_m f, cumulative sums of the blocks.
        let mut partial: Vec<ScalarField> = Vec::with_capacity(blocks.len());
        for b in &blocks {
            let next = match partial.last() {
                Some(prev) => prev.axpy(1.0, b).unwrap(),
                None => b.clone(),
            };
            partial.push(next);
        }
        BlockData { blocks, partial }
    }

    fn block(&self, j: i64) -> Option<&ScalarField> {
        if j < 0 || j as usize >= self.blocks.len() {
            None
        } else {
            Some(&self.blocks[j as usize])
        }
    }

    /// S_m with the convention S_m = 0 for m < 0; saturates at the top
    /// resolved index (all higher blocks vanish for resolved inputs).
    fn partial(&self, m: i64) -> Option<&ScalarField> {
        if m < 0 {
            None
        } else {
            let m = (m as usize).min(self.partial.len() - 1);
            Some(&self.partial[m])
        }
    }
}

/// Decompose `P_l(fg)` into its three frequency interactions. The inputs
/// must be band-limited below n/4 so every product is alias-free.
pub fn para_decompose(
    f: &ScalarField,
    g: &ScalarField,
    l: usize,
    char_: &LPChar,
) -> Result<ParaTriple> {
    f.check_same_grid(g)?;
    let grid = *f.grid();
    let jm = char_.j_max(&grid);
    if l > jm {
        return Err(Error::BlockOutOfRange { index: l, max: jm });
    }
    check_resolved(f, "f")?;
    check_resolved(g, "g")?;

    let fd = BlockData::build(f, char_);
    let gd = BlockData::build(g, char_);
    let li = l as i64;

    let mut low_high = ScalarField::zeros(grid);
    for j in (li - 2)..=(li + 2) {
        if let (Some(pj), Some(sm)) = (fd.block(j), gd.partial(j - 7)) {
            low_high = low_high.axpy(1.0, &pj.mul(sm)?)?;
        }
    }
    let mut high_low = ScalarField::zeros(grid);
    for k in (li - 2)..=(li + 2) {
        if let (Some(pk), Some(sm)) = (gd.block(k), fd.partial(k - 7)) {
            high_low = high_low.axpy(1.0, &sm.mul(pk)?)?;
        }
    }
    let mut diagonal = ScalarField::zeros(grid);
    for j in (li - 8).max(0)..=(jm as i64) {
        for k in (li - 8).max(0)..=(jm as i64) {
            if (j - k).abs() <= 6 {
                if let (Some(pj), Some(pk)) = (fd.block(j), gd.block(k)) {
                    diagonal = diagonal.axpy(1.0, &pj.mul(pk)?)?;
                }
            }
        }
    }
    Ok(ParaTriple {
        low_high: lp_block(&low_high, l, char_)?,
        high_low: lp_block(&high_low, l, char_)?,
        diagonal: lp_block(&diagonal, l, char_)?,
        block_index: l,
    })
}

/// Product of a positive-order factor with a negative-order one, together
/// with the block norm of the result and the Cauchy history of the partial
/// products.
#[derive(Debug, Clone)]
pub struct NegOrderProduct {
    pub product: ScalarField,
    pub norm: HZNorm,
    /// Rows (nu, block-norm distance between consecutive partial products at
    /// a slightly weaker exponent).
    pub cauchy: Vec<(usize, f64)>,
}

/// Resolved product of `f` (order-0 role, exponent `alpha`) with `g`
/// (order minus-one role, exponent `beta`), defined as `(S_J f)(S_J g)` at
/// the top alias-free `J`. Requires `alpha + beta > 1`.
pub fn product_neg_order(
    f: &ScalarField,
    g: &ScalarField,
    alpha: f64,
    beta: f64,
    char_: &LPChar,
) -> Result<NegOrderProduct> {
    if alpha + beta <= 1.0 {
        return Err(Error::Contract(format!(
            "product undefined for alpha + beta = {} <= 1",
            alpha + beta
        )));
    }
    f.check_same_grid(g)?;
    let jm = char_.j_max(f.grid());
    let top = jm - 1; // keep the product of two partial sums alias-free
    let delta = 0.75 * beta;
    let mut prev: Option<ScalarField> = None;
    let mut cauchy = Vec::new();
    for nu in (top.saturating_sub(4))..=top {
        let prod = lp_partial_sum(f, nu, char_)?.mul(&lp_partial_sum(g, nu, char_)?)?;
        if let Some(p) = prev {
            let diff = prod.axpy(-1.0, &p)?;
            cauchy.push((nu, hz_norm(&diff, -1, delta, char_)?.value));
        }
        prev = Some(prod);
    }
    let product = prev.unwrap();
    let norm = hz_norm(&product, -1, beta, char_)?;
    Ok(NegOrderProduct { product, norm, cauchy })
}

/// Per-scale sup norms of the partial products of an annihilating pair, with
/// the fitted log2 decay slope.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub alpha: f64,
    pub nus: Vec<usize>,
    pub sup_norms: Vec<f64>,
    pub fitted_slope: f64,
    /// Number of rows excluded from the fit as roundoff floor.
    pub floor_excluded: usize,
}

/// Ordinary least squares slope of `log2(sup)` against `nu`, excluding rows
/// below the noise floor.
fn fit_slope(nus: &[usize], sups: &[f64]) -> (f64, usize) {
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
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    ((n * sxy - sx * sy) / (n * sxx - sx * sx), excluded)
}

/// Measure `sup | sum_i (S_nu f_i)(S_nu g_i) |` over the requested window.
///
/// Precondition: the pointwise dot product of the resolved inputs vanishes
/// on the grid (checked against `1e-10` times the product of sup norms).
pub fn vanished_product_decay(
    f_vec: &[ScalarField],
    g_vec: &[ScalarField],
    alpha: f64,
    nus: &[usize],
    char_: &LPChar,
) -> Result<DecayReport> {
    if f_vec.len() != g_vec.len() || f_vec.is_empty() {
        return Err(Error::Precondition("component counts differ or empty".into()));
    }
    if !(0.5 < alpha && alpha < 1.0) {
        return Err(Error::Range(format!("alpha = {alpha} not in (1/2, 1)")));
    }
    let grid = *f_vec[0].grid();
    let jm = char_.j_max(&grid);
    if nus.is_empty() || nus.iter().any(|&n| n > jm) {
        return Err(Error::BlockOutOfRange {
            index: nus.iter().copied().max().unwrap_or(0),
            max: jm,
        });
    }
    // Vanishing check on the raw grid data.
    let mut dot = ScalarField::zeros(grid);
    let mut fsup: f64 = 0.0;
    let mut gsup: f64 = 0.0;
    for (f, g) in f_vec.iter().zip(g_vec) {
        f.check_same_grid(&dot)?;
        g.check_same_grid(&dot)?;
        dot = dot.axpy(1.0, &f.mul(g)?)?;
        fsup = fsup.max(f.sup_norm());
        gsup = gsup.max(g.sup_norm());
    }
    let tol = 1e-10 * fsup * gsup;
    if dot.sup_norm() > tol {
        return Err(Error::Precondition(format!(
            "dot product does not vanish: sup {} > tol {tol}",
            dot.sup_norm()
        )));
    }

    let mut sup_norms = Vec::with_capacity(nus.len());
    for &nu in nus {
        let mut acc = ScalarField::zeros(grid);
        for (f, g) in f_vec.iter().zip(g_vec) {
            let sf = lp_partial_sum(f, nu, char_)?;
            let sg = lp_partial_sum(g, nu, char_)?;
            acc = acc.axpy(1.0, &sf.mul(&sg)?)?;
        }
        sup_norms.push(acc.sup_norm());
    }
    let (fitted_slope, floor_excluded) = fit_slope(nus, &sup_norms);
    Ok(DecayReport { alpha, nus: nus.to_vec(), sup_norms, fitted_slope, floor_excluded })
}

/// Partial product `sum_i (S_nu f_i)(S_nu g_i)` as a field (diagnostics).
pub fn partial_dot_product(
    f_vec: &[ScalarField],
    g_vec: &[ScalarField],
    nu: usize,
    char_: &LPChar,
) -> Result<ScalarField> {
    let grid = *f_vec[0].grid();
    let mut acc = ScalarField::zeros(grid);
    for (f, g) in f_vec.iter().zip(g_vec) {
        let sf = lp_partial_sum(f, nu, char_)?;
        let sg = lp_partial_sum(g, nu, char_)?;
        acc = acc.axpy(1.0, &sf.mul(&sg)?)?;
    }
    Ok(acc)
}
