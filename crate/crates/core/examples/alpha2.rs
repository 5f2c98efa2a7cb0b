//! Run the Lyapunov-Schmidt expansion and print `alpha_2` with the six inner
//! products that define it, the matrix `A`, and the Galerkin diagnostics.
//!
//! ```text
//! cargo run --release --example alpha2 -- [n_modes]
//! ```

use edgebif::expansion::{compute_expansion, GalerkinOptions};
use edgebif::grid::{make_grid, Rule};

fn main() -> edgebif::Result<()> {
    let n_modes = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(GalerkinOptions::default().n_modes);
    let grid = make_grid(40.0, 2001, Rule::Trapezoid)?;
    let (result, diag) = compute_expansion(&grid, GalerkinOptions::with_modes(n_modes))?;

    println!("numerator terms   {:?}", result.numerator_terms);
    println!("denominator terms {:?}", result.denominator_terms);
    let num: f64 = result.numerator_terms.iter().sum();
    let den: f64 = result.denominator_terms.iter().sum();
    println!("alpha_2 = {num:.8} / {den:.8} = {:.8}", result.alpha2);
    println!("A = {:?}", result.a);
    println!("first-order identity residual {:.3e}", result.identity_residual);
    println!(
        "basis {} of {} raw modes, Gram condition {:.2e}, Galerkin condition {:.2e}",
        diag.basis_size, diag.raw_basis_size, diag.gram_condition, diag.galerkin_condition
    );
    println!(
        "relative Galerkin residuals: w_1 {:.2e}, w_2 {:.2e}",
        diag.w1_relative_residual, diag.w2_relative_residual
    );
    Ok(())
}
