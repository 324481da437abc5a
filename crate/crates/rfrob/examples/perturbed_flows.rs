//! Continuous dependence of flows on the field: replace a rough field by
//! its low-pass filtrations and bound the flow drift by the flow modulus of
//! id + eta at the measured field distance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfrob::catalog::{smoothed_tooth_1d, LogTooth};
use rfrob::flow::{flow_distance_under_perturbation, pt, AnalyticVF, BoxRegion, Pt};
use rfrob::modulus::Modulus;
use rfrob::spectral::LPChar;

fn main() -> rfrob::Result<()> {
    let char_ = LPChar::standard();
    let tooth = LogTooth { center: 0.5, r_in: 0.15, r_out: 0.3 };
    let domain = BoxRegion::new(1, &[0.05], &[0.95]);
    let rough = AnalyticVF::custom(1, "tooth", move |p, out| {
        out[0] = tooth.value(p[0]);
    })
    .with_domain(domain)
    .with_claim(Modulus::log_lipschitz(), None);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seeds: Vec<Pt> = (0..16).map(|i| pt(&[0.25 + 0.5 * i as f64 / 15.0])).collect();
    println!(" nu   field distance   flow drift     drift bound   ok");
    for nu in [3usize, 5, 7, 9] {
        let smoothed = smoothed_tooth_1d(&tooth, nu, &char_, "smoothed")?.with_domain(domain);
        let rep = flow_distance_under_perturbation(&rough, &smoothed, 0.3, &seeds, Some(1e-4), &mut rng)?;
        println!(
            "{nu:>3}   {:.6e}    {:.4e}    {:.4e}   {}",
            rep.delta, rep.measured, rep.bound, rep.pass
        );
    }
    Ok(())
}
