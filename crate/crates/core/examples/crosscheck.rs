//! The combined inner product `<w_0, K_02 w_0> + (1/4) <w_0, K_00 K_{-12} w_0>`
//! two ways: reduced to single integrals via `h = -Q^2`, and by applying the
//! assembled operators.

use edgebif::expansion::{h_profile, second_component_profile, ExpansionContext, GalerkinOptions};
use edgebif::grid::{make_grid, Rule};
use edgebif::soliton::q3_sq;

fn main() -> edgebif::Result<()> {
    let grid = make_grid(40.0, 2001, Rule::Trapezoid)?;
    let ctx = ExpansionContext::new(&grid, GalerkinOptions::default())?;
    let check = ctx.single_integral_crosscheck()?;
    println!("c_2              = {:.10}", check.c2);
    println!("single integrals = {:.10}", check.single_integral);
    println!("operators        = {:.10}", check.double_integral);
    println!("relative gap     = {:.2e}", check.relative_disagreement());

    let h = h_profile(&grid);
    let second = second_component_profile(&grid);
    let i0 = grid.nearest_index(0.0);
    println!("h(0) = {:.10}", h[i0]);
    let worst = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| (h[i] + q3_sq(x)).abs().max((second[i] + q3_sq(x)).abs()))
        .fold(0.0_f64, f64::max);
    println!("max |profile + Q^2| = {worst:.2e}");
    Ok(())
}
