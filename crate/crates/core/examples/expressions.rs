//! Model expressions: parse, print, evaluate and differentiate.

use sddekit::expr::parse_expr;
use sddekit::model::Model;

fn main() -> sddekit::Result<()> {
    let e = parse_expr("0.1*x1*(1 - x1 - 0.1*x2) + sin(x2)^2", 2)?;
    let x = [0.8, 1.2];
    println!("f      = {e}");
    println!("f(x)   = {}", e.eval(&x)?);
    for v in 0..2 {
        println!("df/dx{} = {}  -> {}", v + 1, e.diff(v), e.diff(v).eval(&x)?);
    }

    match parse_expr("x1 * (2 + ", 1) {
        Err(err) => println!("\nparse error: {err}"),
        Ok(_) => unreachable!(),
    }

    let model = Model::from_strings(1, 1, &["-tanh(x1)"], &[vec!["0.5*exp(-x1^2)"]])?;
    let (mut g, mut dg) = ([0.0], [0.0]);
    model.diffusion(&[0.3], &mut g)?;
    model.diffusion_jacobian(&[0.3], &mut dg)?;
    println!("\ng(0.3) = {}, dg/dx(0.3) = {}", g[0], dg[0]);
    Ok(())
}
