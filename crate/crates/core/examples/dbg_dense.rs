use awflow::linalg::*;

fn main() {
    // A = [[2,1],[1,3]], b = [5, 10] -> x = [1, 3]
    let mut a = DenseMatrix::zeros(2, 2);
    *a.at_mut(0, 0) = 2.0;
    *a.at_mut(0, 1) = 1.0;
    *a.at_mut(1, 0) = 1.0;
    *a.at_mut(1, 1) = 3.0;
    let x = DenseLu::factor(&a).unwrap().solve(&[5.0, 10.0]);
    println!("x = {x:?} (expect [1, 3])");

    // 4x4 with pivoting required
    let vals = [
        [0.0, 2.0, 1.0, -1.0],
        [3.0, 0.5, -2.0, 1.0],
        [1.0, -1.0, 0.0, 2.0],
        [2.0, 1.0, 1.0, 0.0],
    ];
    let mut a = DenseMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            *a.at_mut(i, j) = vals[i][j];
        }
    }
    let xs = [1.0, -2.0, 0.5, 3.0];
    let b = a.matvec(&xs);
    let x = DenseLu::factor(&a).unwrap().solve(&b);
    println!("x = {x:?} (expect {xs:?})");
}
