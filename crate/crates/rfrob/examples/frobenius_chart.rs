//! Build a chart by composing flows of a commuting basis, invert it by
//! reverse flows, and extract a leaf.

use rfrob::catalog::canon3_pair;
use rfrob::chart::{build_chart, extract_leaf, invert_chart, ChartSpec};
use rfrob::flow::{pt, AnalyticVF};

fn main() -> rfrob::Result<()> {
    // Planar chart of (1, y log|y|): the map is (u, v) -> (u, sgn v |v|^(e^u)).
    let spec = ChartSpec::uniform(1, 1, 0.7, 0.3, 17, 17, 7e-5);
    let chart = build_chart(&[AnalyticVF::sharp2d()], &[0.0, 0.0], spec)?;
    println!(
        "planar chart: step-halving error {:.2e}, tangential-derivative residual {:.2e} (tol {:.2e})",
        chart.richardson, chart.deriv_residual, chart.deriv_tol
    );
    let inv = invert_chart(&chart, &[pt(&[0.5, 0.1]), pt(&[0.7, -0.05])])?;
    for row in &inv {
        println!(
            "inverse of ({:+.3}, {:+.3}): u = {:+.4}, v = {:+.6e}, roundtrip {:.2e}",
            row.query[0], row.query[1], row.mu[0], row.lambda[0], row.roundtrip_error
        );
    }
    let leaf = extract_leaf(&chart, &[0.2])?;
    println!("leaf through v = 0.2: {} samples, tangent defect {:.2e}", leaf.points.len(), leaf.tangent_defect);

    // Rank-2 chart of the canonical pair in three dimensions.
    let (x1, x2) = canon3_pair();
    let spec = ChartSpec::uniform(2, 1, 0.2, 0.08, 9, 9, 1e-4);
    let chart = build_chart(&[x1, x2], &[0.0, 0.0, 0.5], spec)?;
    println!(
        "canonical 3-d chart: derivative residual {:.2e} (tol {:.2e})",
        chart.deriv_residual, chart.deriv_tol
    );
    Ok(())
}
