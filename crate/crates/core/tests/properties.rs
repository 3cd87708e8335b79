use geold::rates::{fit_power_law, sample_rates, Critical, Side};
use geold::{
    ell, ell_map, landscape, temporal_map, EllMode, GridSpec, HamiltonianModel, IntegratorConfig,
    QuadratureConfig,
};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn sweeps_do_not_depend_on_thread_count() {
    let cfg = QuadratureConfig::default();
    let pend = HamiltonianModel::pendulum();
    let spec = GridSpec { q_lo: -3.0, q_hi: 3.0, p_lo: -2.5, p_hi: 2.5, nq: 31, np: 27 };
    let run = |threads| {
        in_pool(threads, || {
            let exact = ell_map(&pend, &spec, None, &cfg, EllMode::Exact).unwrap();
            let table = ell_map(&pend, &spec, None, &cfg, EllMode::Table).unwrap();
            let temporal = temporal_map(&pend, &spec, 5.0, &IntegratorConfig::default()).unwrap();
            let land = landscape(&pend, -2.0, 1.0, 61, None, true, &cfg).unwrap();
            (bits(&exact.values), bits(&table.values), bits(&temporal.values), bits(&land.lengths), land.derivs)
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn nodes_on_one_level_set_share_a_value() {
    let duff = HamiltonianModel::duffing();
    // symmetric about both axes, so mirrored nodes have identical energies
    let spec = GridSpec { q_lo: -1.5, q_hi: 1.5, p_lo: -1.0, p_hi: 1.0, nq: 21, np: 17 };
    let g = ell_map(&duff, &spec, None, &QuadratureConfig::default(), EllMode::Exact).unwrap();
    for j in 0..spec.np {
        for i in 0..spec.nq {
            let (q, p) = spec.node(spec.index(i, j));
            let (qm, pm) = spec.node(spec.index(spec.nq - 1 - i, spec.np - 1 - j));
            if duff.energy(q, p) == duff.energy(qm, pm) {
                assert_eq!(g.get(i, j), g.get(spec.nq - 1 - i, spec.np - 1 - j));
            }
        }
    }
}

#[test]
fn duffing_separatrix_exponent_tends_to_minus_half() {
    // On [1e-6, 1e-2] an O(1) regular part of dℓ/dE biases the fit; closer
    // to the separatrix the inverse square root dominates.
    let duff = HamiltonianModel::duffing();
    let cfg = QuadratureConfig::default();
    for side in [Side::Below, Side::Above] {
        let ladder = sample_rates(&duff, Critical::Separatrix, side, 1e-6, 1e-8, 25, None, &cfg).unwrap();
        assert_eq!(ladder.failed, 0);
        let fit = fit_power_law(&ladder.samples).unwrap();
        assert!((fit.exponent + 0.5).abs() < 0.005, "{side:?}: {}", fit.exponent);
        assert!(fit.r_squared > 0.9999);
    }
}

#[test]
fn exact_map_matches_pointwise_ell() {
    let pend = HamiltonianModel::pendulum();
    let cfg = QuadratureConfig::default();
    let spec = GridSpec { q_lo: -3.0, q_hi: 3.0, p_lo: -2.5, p_hi: 2.5, nq: 13, np: 11 };
    let g = ell_map(&pend, &spec, None, &cfg, EllMode::Exact).unwrap();
    for j in 0..spec.np {
        for i in 0..spec.nq {
            let (q, p) = spec.node(spec.index(i, j));
            let want = ell(&pend, pend.energy(q, p), None, &cfg).unwrap();
            let got = g.get(i, j).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "({q}, {p})");
        }
    }
}
