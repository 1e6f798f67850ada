//! The two line solvers on their own, with operation counts.

use polar_multigrid::linalg::{CyclicTridiagFactor, TridiagFactor, FLOPS};

fn main() -> polar_multigrid::Result<()> {
    let n = 1024;
    let diag: Vec<f64> = (0..n).map(|i| 4.0 + (i % 3) as f64).collect();
    let off = vec![-1.0; n - 1];
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();

    // open line, as along a spoke
    let s0 = FLOPS.snapshot();
    let f = TridiagFactor::new(diag.clone(), off.clone())?;
    let s1 = FLOPS.snapshot();
    let mut x = b.clone();
    f.solve(&mut x);
    let s2 = FLOPS.snapshot();
    println!(
        "tridiagonal: factor {} flops ({:.2}/n), solve {} flops ({:.2}/n)",
        s1.since(&s0).tridiag_factor,
        s1.since(&s0).tridiag_factor as f64 / n as f64,
        s2.since(&s1).tridiag_solve,
        s2.since(&s1).tridiag_solve as f64 / n as f64
    );

    // closed line, as around a circle
    let c = CyclicTridiagFactor::new(diag.clone(), off.clone(), -1.0)?;
    let s3 = FLOPS.snapshot();
    let mut y = b.clone();
    c.solve(&mut y);
    let solve = FLOPS.snapshot().since(&s3).cyclic_solve;
    println!(
        "cyclic: solve {solve} flops ({:.3}/n)",
        solve as f64 / n as f64
    );

    let mut worst = 0.0f64;
    for i in 0..n {
        let mut r = diag[i] * y[i] - b[i];
        r += if i > 0 {
            off[i - 1] * y[i - 1]
        } else {
            -y[n - 1]
        };
        r += if i + 1 < n { off[i] * y[i + 1] } else { -y[0] };
        worst = worst.max(r.abs());
    }
    println!("cyclic residual {worst:.2e}");
    Ok(())
}
