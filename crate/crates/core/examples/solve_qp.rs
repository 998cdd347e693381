//! Solve a small convex QP, inspect its KKT residuals, then warm start a
//! perturbed copy.
//!
//! cargo run --example solve_qp

use kinaug::qp::{kkt_residuals, solve, CscMatrix, QpProblem, QpSettings};
use nalgebra::{dmatrix, dvector};

fn main() -> anyhow::Result<()> {
    // minimize 1/2 x'Px + c'x  s.t.  x0 + x1 + x2 = 1,  x >= 0,  x0 <= 0.3
    let p = dmatrix![4.0, 1.0, 0.0; 1.0, 2.0, 0.0; 0.0, 0.0, 1.0];
    let mut prob = QpProblem {
        p: CscMatrix::from_dense(&p),
        c: dvector![-1.0, -1.0, 0.5],
        a: CscMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)]),
        b: dvector![1.0],
        g: CscMatrix::from_triplets(4, 3, &[(0, 0, -1.0), (1, 1, -1.0), (2, 2, -1.0), (3, 0, 1.0)]),
        h: dvector![0.0, 0.0, 0.0, 0.3],
    };
    let set = QpSettings::default();
    let sol = solve(&prob, &set)?;
    println!("status {:?} after {} iterations", sol.status, sol.iterations);
    println!("x = {:.6?}", sol.x.as_slice());
    println!("inequality multipliers = {:.4?}", sol.z.as_slice());
    println!("KKT residuals {:?}", kkt_residuals(&prob, &sol.x, &sol.y, &sol.z));

    prob.c[0] -= 0.01;
    let warm = QpSettings {
        warm_start: Some(sol.warm_start()),
        ..set.clone()
    };
    let cold = solve(&prob, &set)?;
    let hot = solve(&prob, &warm)?;
    println!(
        "perturbed: cold {} iterations, warm {} iterations, |dx| = {:.2e}",
        cold.iterations,
        hot.iterations,
        (&cold.x - &hot.x).amax()
    );
    prob.dump("target/example_qp.mtx")?;
    Ok(())
}
