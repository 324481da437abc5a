//! Partial products of annihilating pairs: the low-pass truncations of a
//! pair with vanishing dot product do not annihilate exactly, but their sup
//! norms decay as the truncation scale grows.

use rfrob::catalog::{vanished_pair, VanishedPairId};
use rfrob::grid::GridSpec;
use rfrob::paraproduct::vanished_product_decay;
use rfrob::spectral::LPChar;

fn main() -> rfrob::Result<()> {
    let grid = GridSpec::new(1, 1 << 14, 1.0)?;
    let char_ = LPChar::standard();
    let nus: Vec<usize> = (4..=9).collect();

    for id in [
        VanishedPairId::ShearTwoBump,
        VanishedPairId::Rotational,
        VanishedPairId::Proportional,
    ] {
        let (f, g) = vanished_pair(id, grid)?;
        let report = vanished_product_decay(&f, &g, 0.75, &nus, &char_)?;
        println!("pair {:<12} fitted slope {:+.3}", id.id(), report.fitted_slope);
        for (nu, s) in report.nus.iter().zip(&report.sup_norms) {
            println!("  nu = {nu}: sup = {s:.6e}");
        }
        if report.floor_excluded > 0 {
            println!("  ({} scales at the roundoff floor)", report.floor_excluded);
        }
    }
    Ok(())
}
