use awflow::anisotropy::AnisotropyModel;
use awflow::assembly::*;
use awflow::geometry::*;

fn main() {
    let x = SimplicialSurface::closed_curve(&[[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]]).unwrap();
    let iso = AnisotropyModel::isotropic();
    let z = NodalField::from_vec(vec![0.0, 1.0, 0.0, 3.0, 0.0, 0.0], 2).unwrap();
    let got = m_gamma(&iso, &z, &x).unwrap();
    let e0 = 0.5 * (1.0 + 9.0) * 1.0;
    let l1 = ((0.5f64 - 1.0).powi(2) + 1.0).sqrt();
    let l2 = (0.5f64.powi(2) + 1.0).sqrt();
    let expect = e0 + 0.5 * 9.0 * l1 + 0.5 * 1.0 * l2;
    println!("got {got}, expect {expect}");
    for e in 0..3 {
        let nm = element_normal_map(1, &x.element_coords(e));
        println!("element {e}: nodes {:?}, r = {:?}", x.element(e), &nm.r[..2]);
    }
    // brute force check on 64-gon
    let model = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
    let poly = regular_polygon(1.0, 64).unwrap();
    let mut zdata = Vec::with_capacity(128);
    for i in 0..64 {
        let p = poly.vertex(i);
        let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
        zdata.push(p[0] / n);
        zdata.push(p[1] / n);
    }
    let zf = NodalField::from_vec(zdata, 2).unwrap();
    let got = m_gamma(&model, &zf, &poly).unwrap();
    let mut brute = 0.0;
    for e in 0..64 {
        let el = poly.element(e);
        let a = poly.vertex(el[0]);
        let b = poly.vertex(el[1]);
        let r = [a[1] - b[1], b[0] - a[0]];
        let g = (36.0 * r[0] * r[0] + r[1] * r[1]).sqrt();
        let mut ds = 0.0;
        for &v in el {
            let zi = zf.vertex(v);
            ds += zi[0] * zi[0] / 36.0 + zi[1] * zi[1];
        }
        brute += 0.5 * ds * g;
    }
    println!("64-gon: got {got}, brute {brute}, ratio {}", got / brute);
}
