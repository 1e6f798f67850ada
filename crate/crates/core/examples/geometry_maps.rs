//! Boundary shapes and metric coefficients of the built-in mappings.

use std::f64::consts::PI;

use polar_multigrid::geometry::Geometry;

fn main() -> polar_multigrid::Result<()> {
    let maps = [
        Geometry::CirclePolar,
        Geometry::default_shafranov(),
        Geometry::default_czarny(),
    ];
    for g in &maps {
        println!("{}", g.name());
        for k in 0..8 {
            let t = k as f64 * PI / 4.0;
            let (x, y) = g.map(1.0, t);
            let c = g.transform_coefficients(1.0, 0.5, t)?;
            println!(
                "  theta={:4.2}  F(1,theta)=({x:+.3}, {y:+.3})  at r=0.5: arr={:.3} art={:+.3} att={:.3} |det|={:.3}",
                t, c.arr, c.art, c.att, c.det_abs
            );
        }
    }
    Ok(())
}
