//! Harmonic noise approaches an Ornstein-Uhlenbeck process as Γ and Ω²
//! grow with their ratio fixed.

use sddekit::ou::{ou_convergence_check, write_ou_table, OuCheck};

fn main() -> sddekit::Result<()> {
    let check = OuCheck::new(1.0, 1.0, vec![10.0, 100.0, 1000.0], 50);
    let rows = ou_convergence_check(&check)?;
    write_ou_table(&rows, &mut std::io::stdout().lock(), &[format!("dt={}", check.dt)])?;
    for r in &rows {
        println!("# gamma {}: median rescaled sup distance {:.4}, unscaled ms {:.3e}", r.gamma, r.median_sup_dist, r.ms_sup_dist_raw);
    }
    Ok(())
}
