//! Dyadic frequency blocks on a periodic grid: decompose a field, verify the
//! partition of unity, and estimate a block-weighted smoothness norm.

use rfrob::catalog::LogTooth;
use rfrob::grid::{GridSpec, ScalarField};
use rfrob::spectral::{hz_norm, lp_all_blocks, LPChar};

fn main() -> rfrob::Result<()> {
    let grid = GridSpec::new(1, 4096, 1.0)?;
    let char_ = LPChar::standard();

    // A rough profile: compactly supported tooth with a log-type kink.
    let tooth = LogTooth::new(0.5, 0.3);
    let f = ScalarField::from_fn(grid, |p| tooth.value(p[0]));

    let blocks = lp_all_blocks(&f, &char_);
    println!("block  sup|P_j f|");
    for (j, b) in blocks.iter().enumerate() {
        println!("{j:>5}  {:.6e}", b.sup_norm());
    }

    let mut sum = ScalarField::zeros(grid);
    for b in &blocks {
        sum = sum.axpy(1.0, b)?;
    }
    println!("reconstruction residual: {:.3e}", f.max_abs_diff(&sum)?);

    for alpha in [0.5, 0.75, 0.9] {
        let n = hz_norm(&f, 0, alpha, &char_)?;
        println!("order-(0,{alpha}) block norm: {:.6}", n.value);
    }
    Ok(())
}
