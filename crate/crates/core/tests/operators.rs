use flowsurrogate::field::Grid3;
use flowsurrogate::nsops::{divergence, gradient, laplacian, ScalarField, VectorField};
use proptest::prelude::*;

fn f(x: f64, y: f64, z: f64) -> f64 {
    x.sin() * (2.0 * y).cos() + (z + 0.3).cos()
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn order(err16: f64, err32: f64) -> f64 {
    (err16 / err32).log2()
}

fn gradient_error(n: usize) -> f64 {
    let g = Grid3::cube(n).unwrap();
    let d = gradient(&ScalarField::from_fn(g, f));
    let exact = [
        g.sample(|x, y, _| x.cos() * (2.0 * y).cos()),
        g.sample(|x, y, _| -2.0 * x.sin() * (2.0 * y).sin()),
        g.sample(|_, _, z| -(z + 0.3).sin()),
    ];
    (0..3).map(|c| max_err(&d.comps[c], &exact[c])).fold(0.0, f64::max)
}

fn divergence_error(n: usize) -> f64 {
    let g = Grid3::cube(n).unwrap();
    let v = VectorField::new(
        g,
        [
            g.sample(|x, y, _| (2.0 * x).sin() * y.cos()),
            g.sample(|_, y, z| y.sin() * z.sin()),
            g.sample(|x, _, z| x.cos() * (3.0 * z).cos()),
        ],
    )
    .unwrap();
    let exact = g.sample(|x, y, z| {
        2.0 * (2.0 * x).cos() * y.cos() + y.cos() * z.sin() - 3.0 * x.cos() * (3.0 * z).sin()
    });
    max_err(&divergence(&v).data, &exact)
}

fn laplacian_error(n: usize) -> f64 {
    let g = Grid3::cube(n).unwrap();
    let l = laplacian(&ScalarField::from_fn(g, f));
    let exact = g.sample(|x, y, z| -5.0 * x.sin() * (2.0 * y).cos() - (z + 0.3).cos());
    max_err(&l.data, &exact)
}

#[test]
fn gradient_is_second_order() {
    let p = order(gradient_error(16), gradient_error(32));
    assert!((p - 2.0).abs() <= 0.2, "order {p}");
}

#[test]
fn divergence_is_second_order() {
    let p = order(divergence_error(16), divergence_error(32));
    assert!((p - 2.0).abs() <= 0.2, "order {p}");
}

#[test]
fn laplacian_is_second_order() {
    let p = order(laplacian_error(16), laplacian_error(32));
    assert!((p - 2.0).abs() <= 0.2, "order {p}");
}

/// Roll a field by `s` nodes along x.
fn roll_x(g: &Grid3, data: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for (idx, v) in data.iter().enumerate() {
        let (i, j, k) = g.coords(idx);
        out[g.index((i + s) % g.nx, j, k)] = *v;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn operators_commute_with_periodic_shift(seed in any::<u64>(), s in 1usize..6) {
        let g = Grid3::new(6, 5, 4, 1.0, 2.0, 3.0).unwrap();
        let mut rng = flowsurrogate::rng::SplitMix64::new(seed);
        let data: Vec<f64> = (0..g.len()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let f0 = ScalarField::new(g, data.clone()).unwrap();
        let f1 = ScalarField::new(g, roll_x(&g, &data, s)).unwrap();

        let l0 = laplacian(&f0);
        let l1 = laplacian(&f1);
        prop_assert!(max_err(&roll_x(&g, &l0.data, s), &l1.data) <= 1e-12);

        let g0 = gradient(&f0);
        let g1 = gradient(&f1);
        for c in 0..3 {
            prop_assert!(max_err(&roll_x(&g, &g0.comps[c], s), &g1.comps[c]) <= 1e-12);
        }
        let d0 = divergence(&g0);
        let d1 = divergence(&g1);
        prop_assert!(max_err(&roll_x(&g, &d0.data, s), &d1.data) <= 1e-12);
    }
}
