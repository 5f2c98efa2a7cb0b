//! Residual of the truncated expansion `w_0 + eps w_1 + eps^2 w_2` in the full
//! equation `(K_{alpha,eps} + 1) w = 0`, split along `v` and its complement.

use edgebif::expansion::{compute_expansion, residual, ExpansionOrder, GalerkinOptions};
use edgebif::fit::fit_power_law;
use edgebif::grid::{make_grid, Rule};

fn main() -> edgebif::Result<()> {
    let grid = make_grid(40.0, 2001, Rule::Trapezoid)?;
    let (result, _) = compute_expansion(&grid, GalerkinOptions::default())?;
    let eps = [0.4, 0.3, 0.2, 0.14, 0.1];
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "eps", "order 0", "total", "along v", "complement");
    let mut total = Vec::new();
    let mut comp = Vec::new();
    for &e in &eps {
        let r0 = residual(e, &result, ExpansionOrder::Zeroth)?;
        let r = residual(e, &result, ExpansionOrder::Second)?;
        println!(
            "{e:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            r0.total, r.total, r.along_v, r.complement
        );
        total.push(r.total);
        comp.push(r.complement);
    }
    println!("slope (total)      {:.3}", fit_power_law(&eps, &total)?.slope);
    println!("slope (complement) {:.3}", fit_power_law(&eps, &comp)?.slope);
    Ok(())
}
