use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use rand::Rng;
use sddekit::analysis::{DriftAccumulator, GridSpec};
use sddekit::limit::{coeff_general, coeff_ou, noise_induced_drift, DriftCoefficients};
use sddekit::matrix_forms::{assemble, drift_via_lyapunov, gamma_inverse_closed, solve_lyapunov};
use sddekit::model::Model;
use sddekit::noise::{stationary_covariance, theoretical_autocovariance, ExactTransition, GammaOmega, HarmonicParams};
use sddekit::rng::stream;
use sddekit::sdde::DelayConfig;
use sddekit::trajectory::Trajectory;
use sddekit::wiener::WienerPath;

fn coupled2d() -> Model {
    Model::from_strings(
        2,
        2,
        &["-x1 + 0.3*x2", "sin(x1) - x2"],
        &[vec!["0.4*x1*x2", "0.2*cos(x2)"], vec!["0.3*sin(x1)", "0.5*x2*x2"]],
    )
    .unwrap()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coeff_ou_decreasing_in_half_open_range(r in 0.0f64..1e4, dr in 1e-6f64..10.0) {
        let (a, b) = (coeff_ou(r), coeff_ou(r + dr));
        prop_assert!(a > 0.0 && a <= 0.5);
        prop_assert!(b < a);
    }

    #[test]
    fn coeff_general_is_stratonovich_at_zero_ratio(g in 0.01f64..100.0, o in 0.01f64..100.0) {
        prop_assert!((coeff_general(g, o, 0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coeff_general_approaches_ou(q in 0.5f64..100.0, i in 0usize..5) {
        // The gap at Γ = 10³ q is about 1/(8000 q²), so small q needs larger Γ.
        let r = [0.0, 0.5, 1.0, 2.0, 10.0][i];
        let gamma = 1e3 * q;
        prop_assert!((coeff_general(gamma, gamma / q, r) - coeff_ou(r)).abs() <= 1e-3);
    }

    #[test]
    fn stationary_covariance_is_lyapunov_solution(g in 0.05f64..20.0, o in 0.05f64..20.0, tau in 0.05f64..5.0) {
        let p = HarmonicParams::new(g, o, tau).unwrap();
        let cov = stationary_covariance(&p);
        let m = p.generator();
        let b = p.noise_loading();
        let res = m * cov + cov * m.transpose() + Matrix2::new(0.0, 0.0, 0.0, b * b);
        prop_assert!(res.amax() <= 1e-12 * (b * b).max(cov.amax()));
        prop_assert_eq!(theoretical_autocovariance(&p, 0.0), 1.0 / (2.0 * tau));
    }

    #[test]
    fn exact_transition_keeps_stationary_law(g in 0.05f64..20.0, o in 0.05f64..20.0, tau in 0.05f64..5.0, dt in 1e-4f64..5.0) {
        let p = HarmonicParams::new(g, o, tau).unwrap();
        let t = ExactTransition::new(&p, dt);
        let cov = stationary_covariance(&p);
        let f = t.propagator();
        let back = f * cov * f.transpose() + t.increment_covariance();
        prop_assert!((back - cov).amax() <= 1e-9 * cov.amax(), "{back} vs {cov}");
    }

    #[test]
    fn lyapunov_residual_small(d in 1usize..=8, seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        // Diagonally dominant with positive diagonal: spectrum in the right half-plane.
        let mut a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
        for i in 0..d {
            a[(i, i)] = d as f64 + rng.random_range(0.5..2.0);
        }
        let l = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let c = &l * l.transpose();
        let j = solve_lyapunov(&a, &c).unwrap();
        let res = &a * &j + &j * a.transpose() - &c;
        prop_assert!(max_abs(&res) <= 1e-10 * max_abs(&c).max(1.0));
    }

    #[test]
    fn inverse_and_oracle_at_random_states(
        y1 in 0.2f64..2.0, y2 in 0.2f64..2.0,
        g in 0.5f64..10.0, o in 0.5f64..10.0,
        c1 in 0.1f64..3.0, c2 in 0.1f64..3.0, k1 in 0.2f64..3.0, k2 in 0.2f64..3.0,
    ) {
        let model = coupled2d();
        let go = GammaOmega::new(g, o).unwrap();
        let dc = DelayConfig::new(vec![c1, c2], vec![k1, k2], 1.0).unwrap();
        let y = [y1, y2];
        let sys = assemble(&model, &dc, go, &y).unwrap();
        let inv = gamma_inverse_closed(&model, &dc, go, &y).unwrap();
        prop_assert!(max_abs(&(&sys.gamma * inv - DMatrix::<f64>::identity(6, 6))) <= 1e-10);

        let a = drift_via_lyapunov(&model, &dc, go, &y).unwrap();
        let b = noise_induced_drift(&model, &DriftCoefficients::general(go, &dc), &y).unwrap();
        let scale = b.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-6);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-6 * scale, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn accumulation_is_order_independent(seed in any::<u64>(), split in 1usize..7) {
        let grid = GridSpec::uniform(1, -2.0, 2.0, 8).unwrap();
        let paths: Vec<Trajectory> = (0..8u64)
            .map(|i| {
                let w = WienerPath::generate(200, 1, 0.01, &mut stream(seed, i));
                let xs = w.cumulative(0);
                Trajectory::from_states(0.01, 1, xs).unwrap()
            })
            .collect();
        let fold = |order: &[usize]| {
            let mut acc = DriftAccumulator::new(grid.clone());
            for &i in order {
                acc.add_trajectory(&paths[i], 1).unwrap();
            }
            acc
        };
        let whole = fold(&(0..8).collect::<Vec<_>>());
        let mut parts = fold(&(split..8).collect::<Vec<_>>());
        parts.merge(&fold(&(0..split).collect::<Vec<_>>())).unwrap();
        let (a, b) = (whole.finish(1), parts.finish(1));
        for cell in a.populated_cells() {
            prop_assert_eq!(a.count(cell), b.count(cell));
            prop_assert!((a.drift(cell).unwrap()[0] - b.drift(cell).unwrap()[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn coarsening_sums_increments(seed in any::<u64>(), factor in 1usize..6, blocks in 1usize..20) {
        let w = WienerPath::generate(factor * blocks, 2, 0.01, &mut stream(seed, 0));
        let c = w.coarsen(factor);
        prop_assert_eq!(c.steps(), blocks);
        for j in 0..2 {
            let fine = w.cumulative(j);
            let coarse = c.cumulative(j);
            for b in 0..=blocks {
                prop_assert!((fine[b * factor] - coarse[b]).abs() <= 1e-12);
            }
        }
    }
}
