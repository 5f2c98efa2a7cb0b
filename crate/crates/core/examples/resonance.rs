//! At `p = 3` the threshold carries a resonance, not an eigenvalue: the real
//! eigenvalue nearest to `z = 1` is a delocalized box state that approaches the
//! threshold as the domain grows. Compare with `p = 3.6`.

use edgebif::spectrum::{gap_eigenvalue, GapOutcome};

fn main() -> edgebif::Result<()> {
    for p in [3.0, 3.6] {
        println!("p = {p}");
        for l in [40.0, 80.0, 160.0] {
            let n = (2.0 * l / 0.2) as usize + 1;
            match gap_eigenvalue(p, l, n)? {
                GapOutcome::Eigenvalue(e) => println!(
                    "  L = {l:>5}: eigenvalue z = {:.10}, |1 - z| = {:.3e}, localization {:.4}",
                    e.row.z,
                    1.0 - e.row.z,
                    e.localization
                ),
                GapOutcome::Resonance { candidate_z, localization } => println!(
                    "  L = {l:>5}: resonance, candidate z = {candidate_z:.10}, |1 - z| = {:.3e}, localization {localization:.4}",
                    (1.0 - candidate_z).abs()
                ),
            }
        }
    }
    Ok(())
}
