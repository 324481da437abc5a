//! Exponent loss of the planar chart: the inverse map of the chart of
//! (1, y log|y|) holds only a Holder exponent exp(-extent) < 1, recovering
//! 1 as the tangential extent shrinks.

use rfrob::chart::sharpness_experiment;

fn main() -> rfrob::Result<()> {
    let rows = sharpness_experiment(&[0.05, 0.1, 0.2, 0.4, 0.7], 5e-5)?;
    println!("extent   forward exp   inverse exp   exp(-extent)");
    for r in &rows {
        println!(
            "{:>6}   {:>11.4}   {:>11.4}   {:>12.4}",
            r.extent, r.forward_exponent, r.inverse_exponent, r.expected
        );
    }
    Ok(())
}
