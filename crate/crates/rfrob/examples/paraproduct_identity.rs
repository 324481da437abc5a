//! Split a product into its three frequency interactions and check the
//! block identity against direct pointwise multiplication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfrob::grid::{random_band_limited, GridSpec};
use rfrob::paraproduct::para_decompose;
use rfrob::spectral::{lp_block, LPChar};

fn main() -> rfrob::Result<()> {
    let grid = GridSpec::new(1, 4096, 1.0)?;
    let char_ = LPChar::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_band_limited(grid, 1024, &mut rng);
    let g = random_band_limited(grid, 1024, &mut rng);
    let fg = f.mul(&g)?;

    println!("  l   low-high    high-low    diagonal    residual");
    for l in 0..=char_.j_max(&grid) {
        let triple = para_decompose(&f, &g, l, &char_)?;
        let direct = lp_block(&fg, l, &char_)?;
        let resid = triple.total().max_abs_diff(&direct)?;
        println!(
            "{l:>3}   {:.3e}   {:.3e}   {:.3e}   {:.3e}",
            triple.low_high.sup_norm(),
            triple.high_low.sup_norm(),
            triple.diagonal.sup_norm(),
            resid
        );
    }
    Ok(())
}
