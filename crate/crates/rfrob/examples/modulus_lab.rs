//! Continuity-modulus calculus: divergence heuristics for the lower
//! integral, the flow-modulus solver against closed forms, and the scaling
//! and composition identities.

use rfrob::modulus::{
    flow_modulus, flow_modulus_scaling_check, flow_modulus_semigroup_check, is_osgood_heuristic,
    Modulus,
};

fn main() -> rfrob::Result<()> {
    println!("modulus          divergent?  confidence");
    for m in [
        Modulus::lipschitz(1.0),
        Modulus::log_lipschitz(),
        Modulus::holder(0.5, 1.0),
        Modulus::r_log2(),
        Modulus::identity_plus(Modulus::log_lipschitz()),
    ] {
        let rep = is_osgood_heuristic(&m);
        println!(
            "{:<16} {:<11} {}",
            m.label(),
            rep.is_osgood,
            if rep.low_confidence { "low" } else { "high" }
        );
    }

    // Propagated separation: solve int_r^R ds/eta(s) = t and compare with
    // the closed form R = r^(exp(-t)) of the log-type modulus.
    let log = Modulus::log_lipschitz();
    println!("\n   t       r          solver R        closed form");
    for &(t, r) in &[(0.2, 1e-4), (0.7, 1e-4), (0.7, 1e-2), (1.0, 1e-6)] {
        let got = flow_modulus(&log, t, r)?;
        let want = r.powf((-t).exp());
        println!("{t:>5}  {r:.1e}   {got:.10e}  {want:.10e}");
    }

    let sc = flow_modulus_scaling_check(&log, 2.0, 0.3, 0.01)?;
    let sg = flow_modulus_semigroup_check(&log, 0.2, 0.2, 0.01)?;
    println!("\nscaling residual:   {sc:.3e}");
    println!("composition residual: {sg:.3e}");
    Ok(())
}
