//! Print the soliton power `Q_p^{p-1}`, its expansion coefficients and the
//! truncation error of `Q_3^2 + eps q_1 + eps^2 q_2` for a few powers.

use edgebif::soliton::{eval_potential, eval_q_series, eval_soliton_power, eval_weight_half};

fn main() -> edgebif::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>12}", "x", "Q_3^2", "q_1", "q_2");
    for k in 0..=8 {
        let x = 0.5 * k as f64;
        let (lead, first, second) = eval_q_series(x);
        println!("{x:>6.2} {lead:>12.6} {first:>12.6} {second:>12.6}");
    }

    println!("\ntruncation error at x = 0.7");
    let x = 0.7;
    let (lead, first, second) = eval_q_series(x);
    for eps in [0.2, 0.1, 0.05] {
        let exact = eval_soliton_power(3.0 + eps, x)?;
        let err = exact - lead - eps * first - eps * eps * second;
        println!("  eps = {eps:<5} error = {err:.3e}  error / eps^3 = {:.4}", err / eps.powi(3));
    }

    let w = eval_weight_half(0.0);
    println!("\n|V_0|^(1/2)(0) squared = {:?}", (w * w).0);
    println!("V^(3)(0)               = {:?}", eval_potential(3.0, 0.0)?.0);
    Ok(())
}
