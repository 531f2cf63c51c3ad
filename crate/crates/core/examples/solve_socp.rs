//! The conic solver on a small hand-written program:
//! minimize ½‖z - (2, 1)‖² subject to ‖z‖ ≤ 1 and z₁ ≥ 0.2.

use mspc::mathcore::{Matrix, Vector};
use mspc::solver::{check_kkt, solve, ConicProgram, RowTag, SolverOptions};

fn main() -> mspc::error::Result<()> {
    let mut prog = ConicProgram::new(Matrix::identity(2, 2), Vector::from_vec(vec![-2.0, -1.0]), 2.5)?;
    prog.push_soc(Matrix::identity(2, 2), Vector::zeros(2), Vector::zeros(2), 1.0, RowTag::Other);
    prog.push_linear(Vector::from_vec(vec![0.0, -1.0]), -0.2, RowTag::Other);

    let sol = solve(&prog, &SolverOptions::default())?;
    let kkt = check_kkt(&prog, &sol)?;
    println!("status     {}", sol.status);
    println!("z*         ({:.8}, {:.8})", sol.primal[0], sol.primal[1]);
    println!("objective  {:.10}", sol.objective);
    println!("KKT        {:.2e} after {} iterations", kkt.max(), sol.iterations);
    println!("{}", serde_json::to_string(&prog)?);
    Ok(())
}
