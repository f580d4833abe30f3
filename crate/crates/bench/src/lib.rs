//! Inputs shared by the benchmarks.

/// `n` equispaced labels on `[-1, 1]` with unit total mass and a smooth
/// velocity profile.
pub fn line_cloud(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = 2.0 / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * h).collect();
    let w = vec![1.0 / n as f64; n];
    let v = x.iter().map(|a| -(std::f64::consts::PI * a).sin()).collect();
    (x, w, v)
}

/// A `side x side` grid on `[-1, 1]^2`, flattened row by row.
pub fn square_cloud(side: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (line, _, _) = line_cloud(side);
    let mut x1 = Vec::with_capacity(side * side);
    let mut x2 = Vec::with_capacity(side * side);
    for &b in &line {
        for &a in &line {
            x1.push(a);
            x2.push(b);
        }
    }
    let w = vec![1.0 / (side * side) as f64; side * side];
    let v = x1.iter().zip(&x2).map(|(a, b)| (a * b).sin()).collect();
    (x1, x2, w, v)
}
