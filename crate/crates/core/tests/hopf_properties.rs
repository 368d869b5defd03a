use charweb::expr::{Role, UnivariateSpec};
use charweb::generator::{generic_image, ConservationPairs};
use charweb::hopf::{
    bilinear, inscribed_rectangle, pushforward, regrid, sample_characteristics, solve_hopf, Grid,
    ImageFrame, InitialData, NodeStatus, QuadratureOrder,
};
use charweb::system::QuasilinearSystem;
use proptest::prelude::*;
use proptest::sample::select;

fn spec(text: &str, role: Role) -> UnivariateSpec {
    UnivariateSpec::parse(text, "u", role).unwrap()
}

fn quadratic_family() -> (QuasilinearSystem, ConservationPairs) {
    generic_image(
        &vec![spec("u^2/2", Role::F); 4],
        &vec![spec("1", Role::G); 4],
    )
    .unwrap()
}

fn waves(amplitude: f64) -> InitialData {
    let profiles: Vec<String> = [1.5, 3.0, 4.5, 6.5]
        .iter()
        .map(|k| format!("{k} + {amplitude}*sin(x)"))
        .collect();
    let refs: Vec<&str> = profiles.iter().map(String::as_str).collect();
    InitialData::parse(&refs, [-20.0, 30.0]).unwrap()
}

fn source(n: usize) -> Grid {
    Grid::new([0.0, 0.5], [0.0, std::f64::consts::TAU], n, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nodes_solve_the_implicit_equation(
        f in select(vec!["u", "u^2/2", "sin(u)", "exp(u/2)"]),
        a in -1.0..1.0f64, b in -1.0..1.0f64, k in 0.5..3.0f64,
        t1 in 0.1..2.0f64,
    ) {
        let f = spec(f, Role::F);
        let profile = format!("{a} + {b}*sin({k}*x)");
        let phi = spec(&profile.replace('x', "u"), Role::F);
        let data = InitialData::parse(&[&profile], [-40.0, 40.0]).unwrap();
        let sol = solve_hopf(std::slice::from_ref(&f), &data, Grid::new([0.0, t1], [-2.0, 2.0], 21, 41).unwrap()).unwrap();
        for m in 0..sol.grid.nt {
            for l in 0..sol.grid.nx {
                if !sol.valid(m, l) {
                    continue;
                }
                let r = sol.at(m, l)[0];
                let s = sol.grid.x(l) + f.expr().evaluate(&[r]).unwrap() * sol.grid.t(m);
                let back = phi.expr().evaluate(&[s]).unwrap();
                prop_assert!((r - back).abs() <= 1e-12 * (1.0 + r.abs()), "{r} vs {back}");
            }
        }
    }

    #[test]
    fn breaking_masks_every_later_row(b in 0.5..3.0f64, k in 0.5..3.0f64, t1 in 0.5..3.0f64) {
        let profile = format!("{b}*sin({k}*x)");
        let data = InitialData::parse(&[&profile], [-40.0, 40.0]).unwrap();
        let sol = solve_hopf(&[spec("u", Role::F)], &data, Grid::new([0.0, t1], [-2.0, 2.0], 31, 21).unwrap()).unwrap();
        for l in 0..sol.grid.nx {
            let first = (0..sol.grid.nt).find(|&m| sol.status[sol.grid.index(m, l)] == NodeStatus::Breaking);
            if let Some(first) = first {
                for m in first..sol.grid.nt {
                    prop_assert_eq!(sol.status[sol.grid.index(m, l)], NodeStatus::Breaking);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// The two quadrature orders disagree by `O(h²)`.
    #[test]
    fn pushforward_path_dependence_is_second_order(amplitude in 0.02..0.2f64) {
        let (_, pairs) = quadratic_family();
        let base = vec![spec("u", Role::F); 4];
        let data = waves(amplitude);
        let gap = |n: usize| {
            let sol = solve_hopf(&base, &data, source(n)).unwrap();
            let a = pushforward(&sol, &pairs, QuadratureOrder::RowFirst, 1e-2).unwrap();
            let b = pushforward(&sol, &pairs, QuadratureOrder::ColumnFirst, 1e-2).unwrap();
            a.max_difference(&b)
        };
        let order = (gap(17) / gap(33)).log2();
        prop_assert!((1.7..=2.3).contains(&order), "{order}");
    }

    /// Along every image-frame characteristic `dx̃ + λ̃ dt̃ = 0` holds to
    /// `O(h²)` per unit arc length.
    #[test]
    fn image_characteristics_follow_their_speed(amplitude in 0.02..0.2f64, nodes in select(vec![17usize, 33])) {
        let (image, pairs) = quadratic_family();
        let base = vec![spec("u", Role::F); 4];
        let frame = ImageFrame::new(&base, &waves(amplitude), &pairs, source(2)).unwrap();
        let (tr, xr) = inscribed_rectangle(&frame, 0.02).unwrap();
        let sol = regrid(&frame, Grid::new(tr, xr, nodes, nodes).unwrap()).unwrap();
        let h = sol.grid.dt();
        for (i, speed) in image.lambdas().iter().enumerate() {
            let lam = |p: [f64; 2]| speed.evaluate(&bilinear(&sol, p[1], p[0]).unwrap()).unwrap();
            for c in sample_characteristics(&sol, speed, None, i + 1, 6, h).unwrap() {
                prop_assert!(c.points.len() > 2);
                for w in c.points.windows(2) {
                    let (dx, dt) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
                    let defect = (dx + 0.5 * (lam(w[0]) + lam(w[1])) * dt).abs();
                    prop_assert!(defect <= 0.1 * h * h * dx.hypot(dt), "family {}: {defect:e}", i + 1);
                }
            }
        }
    }
}
