//! Gap eigenvalues of the discretized linearized operator on both sides of
//! `p = 3`, and the fit of `1 - z` against `|eps|`.

use edgebif::spectrum::{fit_bifurcation, scan_bifurcation, ScanOptions, ScanStatus};

fn main() -> edgebif::Result<()> {
    let eps = [0.8, -0.8, 0.6, -0.6, 0.4, -0.4];
    let ps: Vec<f64> = eps.iter().map(|e| 3.0 + e).collect();
    let entries = scan_bifurcation(&ps, ScanOptions::default())?;
    println!("{:>5} {:>7} {:>6} {:>14} {:>10} {:>8}", "p", "L", "N", "z", "alpha", "ratio");
    for e in &entries {
        match &e.status {
            ScanStatus::Eigenvalue { row, .. } => println!(
                "{:>5.2} {:>7.1} {:>6} {:>14.10} {:>10.6} {:>8.4}",
                row.p, e.half_length, e.n_points, row.z, row.alpha, row.ratio
            ),
            other => println!("{:>5.2} {other:?}", e.p),
        }
    }
    let rows: Vec<_> = entries.iter().filter_map(|e| e.row().copied()).collect();
    let fit = fit_bifurcation(&rows)?;
    println!(
        "exponent {:.3}, alpha_2 (exponent 4) {:.4}, alpha_2 (free fit) {:.4}",
        fit.exponent, fit.alpha2, fit.alpha2_free
    );
    Ok(())
}
