use awflow::linalg::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 30;
    let nb = 24;
    let hw = 4;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..nb {
        for j in 0..nb {
            let d = (i as isize - j as isize).unsigned_abs();
            if d <= hw {
                let v: f64 = rng.gen_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 };
                entries.push((i, j, v));
            }
        }
    }
    for r in nb..n {
        for j in 0..n {
            let v: f64 = rng.gen_range(-1.0..1.0) + if r == j { 4.0 } else { 0.0 };
            entries.push((r, j, v));
            if j < nb {
                entries.push((j, r, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let mut dense = DenseMatrix::zeros(n, n);
    for &(i, j, v) in &entries {
        *dense.at_mut(i, j) += v;
    }
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x1 = BorderedBandLu::factor(n, nb, hw, hw, &entries).unwrap().solve(&b);
    let x2 = DenseLu::factor(&dense).unwrap().solve(&b);
    let r1 = dense.matvec(&x1);
    let r2 = dense.matvec(&x2);
    let res1 = r1.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0f64, f64::max);
    let res2 = r2.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0f64, f64::max);
    println!("bordered residual: {res1:e}, dense residual: {res2:e}");
    let diff = x1.iter().zip(&x2).map(|(a, c)| (a - c).abs()).fold(0.0f64, f64::max);
    println!("solution diff: {diff:e}");
}
