use approx::assert_abs_diff_eq;
use entrosteer::corpus::{gaussian_mixture_corpus, mixture_density, random_mixture};
use entrosteer::entropy::{conditional_differential_nats, conditional_shannon_nats};
use entrosteer::{
    bin_density, differential_entropy, discrete_entropy, jensen_gaps, window_conditional, Axis,
    BinningSpec, GridDensity, LogBase,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mixture(seed: u64, dims: usize, step: f64) -> GridDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = random_mixture(&mut rng, dims);
    mixture_density(&comps, vec![Axis::symmetric(10.0, step).unwrap(); dims]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integration_is_linear(seed in 0u64..1000, a in 0.0f64..3.0, b in 0.0f64..3.0, lo in -4.0f64..0.0, hi in 0.0f64..4.0) {
        let f = mixture(seed, 1, 0.125);
        let g = mixture(seed + 1, 1, 0.125);
        let combo = GridDensity::from_array(f.axes().to_vec(), f.values() * a + g.values() * b).unwrap();
        let region = [(lo, hi)];
        let lhs = combo.integrate(Some(&region)).unwrap();
        let rhs = a * f.integrate(Some(&region)).unwrap() + b * g.integrate(Some(&region)).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn marginals_keep_mass(seed in 0u64..1000) {
        let rho = mixture(seed, 2, 0.25);
        for keep in [0, 1] {
            let m = rho.marginalize(keep).unwrap();
            prop_assert!((m.total_mass() - rho.total_mass()).abs() < 1e-9);
        }
    }

    #[test]
    fn window_conditionals_rebuild_the_density(seed in 0u64..1000, w in prop::sample::select(vec![0.5, 1.0, 2.5])) {
        let rho = mixture(seed, 1, 0.125);
        let spec = BinningSpec::tiling(&rho, &[w]).unwrap();
        let hist = bin_density(&rho, &spec).unwrap();
        let step = rho.axes()[0].step;
        let mut rebuilt = vec![0.0; rho.axes()[0].count];
        for (l, &p) in hist.probs().iter().enumerate() {
            let Ok(c) = window_conditional(&rho, &[l], &spec) else { continue };
            let offset = ((c.axes()[0].origin - rho.axes()[0].origin) / step).round() as usize;
            for (j, v) in c.values().iter().enumerate() {
                // Edge nodes are shared by neighbouring windows; keep one copy.
                if j + 1 < c.values().len() || l + 1 == hist.probs().len() {
                    rebuilt[offset + j] = p * v;
                }
            }
        }
        for (r, v) in rebuilt.iter().zip(rho.values()) {
            prop_assert!((r - v).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn binning_commutes_with_marginalization(seed in 0u64..1000) {
        let rho = mixture(seed, 2, 0.25);
        let spec = BinningSpec::tiling(&rho, &[1.0, 2.0]).unwrap();
        let joint = bin_density(&rho, &spec).unwrap();
        for keep in [0usize, 1] {
            let a = joint.marginalize_axes(&[keep]).unwrap();
            let b = bin_density(&rho.marginalize(keep).unwrap(), &spec.select(&[keep])).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coarse_graining_nested_windows(seed in 0u64..1000) {
        let rho = mixture(seed, 1, 0.125);
        let fine = bin_density(&rho, &BinningSpec::tiling(&rho, &[0.5]).unwrap()).unwrap();
        let coarse = bin_density(&rho, &BinningSpec::tiling(&rho, &[1.0]).unwrap()).unwrap();
        for (i, c) in coarse.probs().iter().enumerate() {
            let merged = fine.probs()[[2 * i]] + fine.probs()[[2 * i + 1]];
            prop_assert!((merged - c).abs() < 1e-14);
        }
        prop_assert!(
            discrete_entropy(&coarse, LogBase::E).value <= discrete_entropy(&fine, LogBase::E).value + 1e-12
        );
    }

    #[test]
    fn bases_differ_by_a_constant_factor(seed in 0u64..1000) {
        let rho = mixture(seed, 1, 0.125);
        let nats = differential_entropy(&rho, LogBase::E).value;
        prop_assert!((differential_entropy(&rho, LogBase::Two).value * 2f64.ln() - nats).abs() < 1e-12);
        prop_assert!((differential_entropy(&rho, LogBase::Ten).value * 10f64.ln() - nats).abs() < 1e-12);
    }

    #[test]
    fn chain_rule(seed in 0u64..1000) {
        let rho = mixture(seed, 2, 0.25);
        let hxy = differential_entropy(&rho, LogBase::E).value;
        let hx = differential_entropy(&rho.marginalize(0).unwrap(), LogBase::E).value;
        let hy_x = conditional_differential_nats(&rho, &[1], &[0]).unwrap();
        prop_assert!((hxy - hx - hy_x).abs() < 1e-12);

        let hist = bin_density(&rho, &BinningSpec::tiling(&rho, &[1.0]).unwrap()).unwrap();
        let big_xy = discrete_entropy(&hist, LogBase::E).value;
        let big_x = discrete_entropy(&hist.marginalize_axes(&[0]).unwrap(), LogBase::E).value;
        let big_y_x = conditional_shannon_nats(&hist, &[1], &[0]).unwrap();
        prop_assert!((big_xy - big_x - big_y_x).abs() < 1e-12);
    }

    #[test]
    fn in_window_entropy_is_bounded_by_log_width(seed in 0u64..1000, w in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let rho = mixture(seed, 2, 0.25);
        let spec = BinningSpec::tiling(&rho, &[w]).unwrap();
        let hist = bin_density(&rho, &spec).unwrap();
        for ((l, m), &p) in hist.probs().clone().into_dimensionality::<ndarray::Ix2>().unwrap().indexed_iter() {
            if p < 1e-6 {
                continue;
            }
            let c = window_conditional(&rho, &[l, m], &spec).unwrap();
            let h_y = differential_entropy(&c.marginalize(1).unwrap(), LogBase::E).value;
            prop_assert!(h_y <= w.ln() + 1e-10, "window ({l},{m}): {h_y} > ln {w}");
        }
    }

    #[test]
    fn jensen_steps_hold(seed in 0u64..1000, w in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let rho = mixture(seed, 2, 0.25);
        let spec = BinningSpec::tiling(&rho, &[w]).unwrap();
        for (l, g) in jensen_gaps(&rho, &spec, LogBase::E).unwrap() {
            prop_assert!(g >= -1e-10, "window {l}: {g}");
        }
    }
}

#[test]
fn corpus_members_validate() {
    for case in gaussian_mixture_corpus(3, 5, 5, 2) {
        let case = case.unwrap();
        let d = case.density.validate();
        assert!(d.is_normalized(), "case {}: {d:?}", case.id);
        for w in case.widths {
            BinningSpec::tiling(&case.density, &[w]).unwrap();
        }
    }
}

#[test]
fn mixture_of_one_component_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let comps = loop {
        let c = random_mixture(&mut rng, 2);
        if c.len() == 1 {
            break c;
        }
    };
    let rho = mixture_density(&comps, vec![Axis::symmetric(14.0, 0.0625).unwrap(); 2]).unwrap();
    assert_abs_diff_eq!(
        differential_entropy(&rho, LogBase::E).value,
        comps[0].gaussian.entropy_nats(),
        epsilon = 1e-8
    );
}
