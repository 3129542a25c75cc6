//! Scalar proximal maps and the simplex projection.
//!
//! `cargo run --example prox_toolbox`

use fima::prox::{project_simplex, prox_l0, prox_l1, prox_lp_half};
use ndarray::array;

fn main() -> fima::Result<()> {
    let v = array![-2.0, -0.6, -0.1, 0.0, 0.3, 0.8, 1.5];
    let theta = 0.25;
    println!("v             {v:?}");
    println!("prox l1       {:?}", prox_l1(&v, theta)?);
    println!("prox l0       {:?}", prox_l0(&v, theta)?);
    println!("prox l1/2     {:?}", prox_lp_half(&v, theta)?);

    let b = array![0.9, 0.4, -0.3, 0.1];
    let p = project_simplex(&b)?;
    println!("simplex proj  {p:?} (sum {:.15})", p.sum());
    Ok(())
}
