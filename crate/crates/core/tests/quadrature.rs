use polytrinity_core::uqpcm::{
    gauss_hermite, propagate, quantify_material, smolyak_grid, tensor_grid, CollocationGrid,
    ErrorModel, RandomInput,
};
use proptest::prelude::*;

/// E[X^k] for X ~ N(0, 1): (k-1)!! for even k, 0 for odd k.
fn normal_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(f64::from).product()
}

fn grid_moment(grid: &CollocationGrid, powers: &[u32]) -> f64 {
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            w * x
                .iter()
                .zip(powers)
                .map(|(xi, &p)| xi.powi(p as i32))
                .product::<f64>()
        })
        .sum()
}

/// Error relative to `scale`, the quadrature of |x|^k. Odd moments vanish
/// exactly, so their error is measured against the size of the cancelling
/// terms.
fn moment_error(got: f64, want: f64, scale: f64) -> f64 {
    let scale = scale.max(want.abs());
    if scale == 0.0 {
        got.abs()
    } else {
        (got - want).abs() / scale
    }
}

#[test]
fn hermite_rules_are_exact_to_degree_2n_minus_1() {
    for n in 1..=20 {
        let (x, w) = gauss_hermite(n).unwrap();
        for k in 0..2 * n as u32 {
            let got: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(k as i32))
                .sum();
            let scale: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.abs().powi(k as i32))
                .sum();
            let err = moment_error(got, normal_moment(k), scale);
            assert!(err <= 1e-10, "n={n} k={k}: {got} vs {}", normal_moment(k));
        }
        // and generally not beyond
        if n <= 10 {
            let k = 2 * n as i32;
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
            assert!(
                moment_error(got, normal_moment(k as u32), got) > 1e-6,
                "n={n}"
            );
        }
    }
}

#[test]
fn hermite_weights_are_positive_and_normalized() {
    for n in 1..=50 {
        let (x, w) = gauss_hermite(n).unwrap();
        assert!(w.iter().all(|&v| v > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "n={n}");
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
    assert!(gauss_hermite(0).is_err());
}

#[test]
fn log_normal_mean_with_nine_nodes() {
    let grid = tensor_grid(&[9]).unwrap();
    for (m, s) in [(0.0, 0.1), (1.5, 0.25), (-2.0, 0.5), (4.0, 0.8)] {
        let r = propagate(
            |x: &[f64]| Ok::<_, String>(vec![x[0]]),
            &[RandomInput::log_normal("v", m, s)],
            &grid,
        )
        .unwrap();
        let want = f64::exp(m + s * s / 2.0);
        assert!(
            ((r.outputs[0].mean - want) / want).abs() <= 1e-6,
            "({m}, {s})"
        );
    }
}

#[test]
fn smolyak_seven_dims_level_two() {
    let g = smolyak_grid(7, 2).unwrap();
    assert_eq!(g.len(), 127);
    assert!((g.weight_sum() - 1.0).abs() <= 1e-12);
    // every monomial of total degree <= 3
    let mut count = 0;
    let mut powers = [0u32; 7];
    loop {
        if powers.iter().sum::<u32>() <= 3 {
            let want: f64 = powers.iter().map(|&p| normal_moment(p)).product();
            let got = grid_moment(&g, &powers);
            assert!((got - want).abs() <= 1e-10, "{powers:?}: {got} vs {want}");
            count += 1;
        }
        let Some(i) = (0..7).find(|&i| powers[i] < 3) else {
            break;
        };
        powers[i] += 1;
        powers[..i].iter_mut().for_each(|p| *p = 0);
    }
    assert_eq!(count, 120);
}

#[test]
fn grid_weights_sum_to_one() {
    for d in 1..=7 {
        for l in 0..=3 {
            let g = smolyak_grid(d, l).unwrap();
            assert!((g.weight_sum() - 1.0).abs() <= 1e-12, "smolyak d={d} l={l}");
        }
    }
    for pts in [vec![1], vec![3, 5], vec![2, 3, 4], vec![3; 7]] {
        let g = tensor_grid(&pts).unwrap();
        assert!((g.weight_sum() - 1.0).abs() <= 1e-12, "tensor {pts:?}");
    }
}

#[test]
fn zero_spread_collapses_to_the_point_label() {
    let pe = polytrinity_core::rompyro::MaterialInput {
        rho: 940.0,
        kappa: 0.4,
        c_p: 2150.0,
        h_c: 43.6e6,
        mu: 0.0,
        d_t: 80.0,
        t_p: 750.0,
    };
    let sim = polytrinity_core::rompyro::SimConfig::default();
    let label = polytrinity_core::rompyro::simulate_cone(&pe, &sim).unwrap();
    let errors = ErrorModel::default().with_uniform_std(0.0);
    let uq = quantify_material(&pe, &errors, &smolyak_grid(7, 2).unwrap(), &sim).unwrap();
    for (s, want) in [(uq.t_ig, label.t_ig), (uq.phrr, label.phrr)] {
        let tol = 1e-9 * want.abs();
        assert!(
            (s.mean - want).abs() <= tol && s.std <= tol,
            "{s:?} vs {want}"
        );
        assert!(s.lo <= want + tol && s.hi >= want - tol && s.hi - s.lo <= 4.0 * tol);
    }
}

proptest! {
    #[test]
    fn smolyak_integrates_affine_functions(d in 1usize..6, l in 0usize..3, c in proptest::collection::vec(-3.0f64..3.0, 6)) {
        let g = smolyak_grid(d, l).unwrap();
        let got: f64 = g.nodes.iter().zip(&g.weights)
            .map(|(x, w)| w * (c[5] + x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()))
            .sum();
        prop_assert!((got - c[5]).abs() <= 1e-10);
    }

    #[test]
    fn normal_inputs_recover_mean_and_std(m in -100.0f64..100.0, s in 0.0f64..10.0) {
        let grid = tensor_grid(&[3]).unwrap();
        let r = propagate(|x: &[f64]| Ok::<_, String>(vec![x[0]]), &[RandomInput::normal("v", m, s)], &grid).unwrap();
        let o = r.outputs[0];
        prop_assert!((o.mean - m).abs() <= 1e-9 * m.abs().max(1.0));
        prop_assert!((o.std - s).abs() <= 1e-9 * s.max(1.0));
        prop_assert!((o.hi - o.lo - 4.0 * o.std).abs() <= 1e-9 * o.std.max(1.0));
    }
}
