//! Check the structural identities of the expansion operators on the default
//! grid: `K_{-10} = -4P`, `(K_00 + 1) w_0 = 2v`, and self-adjointness of `K_00`.

use edgebif::expansion::{build_w0, ExpansionOperators};
use edgebif::grid::{build_v, inner, make_grid, Rule};
use edgebif::report::{projection_identity_defect, self_adjointness_defect};

fn main() -> edgebif::Result<()> {
    let grid = make_grid(40.0, 2001, Rule::Trapezoid)?;
    let ops = ExpansionOperators::assemble(&grid)?;
    let v = build_v(&grid);
    let w0 = build_w0(&grid);

    println!("|v|^2            = {:.12}", inner(&v, &v)?);
    println!("|w_0|^2          = {:.12}", inner(&w0, &w0)?);
    println!("<v, w_0>         = {:.3e}", inner(&v, &w0)?);

    let defect = ops.k00_plus_one(&w0)?.sub(&v.scaled(2.0))?.norm();
    println!("|(K00+1)w0 - 2v| = {defect:.3e}");
    println!("K_-10 + 4P       = {:.3e} (20 random functions)", projection_identity_defect(&grid, 20, 7)?);
    println!("K_00 - K_00^*    = {:.3e} (20 random pairs)", self_adjointness_defect(&grid, 20, 7)?);
    Ok(())
}
