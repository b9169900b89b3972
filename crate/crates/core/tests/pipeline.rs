mod common;

use common::*;
use lpdim::covering::Rho;
use lpdim::graphcoh::{self, Graph};
use lpdim::graphings::{self, Graphing};
use lpdim::homdim::{estimate_dim, EstimateOptions, GeneratingSpec, Grid, Sampler};
use lpdim::relation::Model;
use lpdim::sofic::{exact_model, quality_report, SoficApprox};
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_grid() -> Grid {
    Grid {
        letter_sets: vec![vec!["g0".into()]],
        m: vec![1],
        delta: vec![0.1],
        epsilon: vec![0.05, 0.2],
        p: 2.0,
    }
}

#[test]
fn bundled_models_have_exact_sofic_models() {
    for (name, m) in bundled_models() {
        let sigma = exact_model(&m, 8).unwrap();
        let q = quality_report(&sigma, &m, 2).unwrap();
        assert!(q.mult_defect < 1e-12 && q.adj_defect < 1e-12, "{name}: {q:?}");
        let back = SoficApprox::from_json(&sigma.to_json().unwrap()).unwrap();
        assert_eq!(back.images(), sigma.images());
    }
}

#[test]
fn stored_sofic_file_matches_exact_model() {
    let m = Model::load(data_dir().join("periodic4.json")).unwrap();
    let stored = SoficApprox::load(data_dir().join("periodic4_sofic_d40.json")).unwrap();
    assert_eq!(stored.images(), exact_model(&m, 5).unwrap().images());
}

#[test]
fn c1_is_graphing_independent_on_bundled_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, m) in bundled_models() {
        let target = graphings::c1_of_relation(m.rel());
        let mut gs = vec![Graphing::from_model(&m), Graphing::from_generators(&m), Graphing::chain_treeing(m.rel())];
        gs.extend((0..4).map(|k| random_graphing(m.rel(), k, &mut rng)));
        for g in &gs {
            let c1 = graphings::c1_exact_finite(g);
            assert!(c1.generates);
            assert_eq!(c1.exact, target, "{name}");
            assert!(c1.exact <= graphings::cost(g).unwrap().exact, "{name}");
        }
    }
}

#[test]
fn compression_inequality_is_exact_on_split_model() {
    let m = Model::load(data_dir().join("split.json")).unwrap();
    let a = m.named_projections()["A"].clone();
    let (ma, _) = m.compress(&a).unwrap();
    let mass = m.rel().space().exact_mass(a.iter().copied());
    let lhs = mass * (graphings::c1_of_relation(ma.rel()) - BigRational::one());
    let rhs = graphings::c1_of_relation(m.rel()) - BigRational::one();
    assert!(lhs >= rhs, "{lhs} < {rhs}");
}

#[test]
fn named_projection_estimate_brackets_its_trace() {
    let m = Model::load(data_dir().join("split.json")).unwrap();
    let a = m.named_projections()["A"].clone();
    let spec = GeneratingSpec::l2_projected(m.clone(), &a).unwrap();
    let exact = spec.exact_dimension();
    let sigmas = vec![exact_model(&m, 16).unwrap()];
    let opts = EstimateOptions { samples: 80, seed: 2, sampler: Sampler::default(), rho: Rho::default() };
    let est = estimate_dim(&spec, &sigmas, &small_grid(), &opts).unwrap();
    let x: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
    assert!(est.brackets(x, 1e-12), "{x} vs [{}, {}]", est.lower, est.upper);
}

#[test]
fn edge_quotient_of_treeing_is_full_edge_space() {
    let m = Model::load(data_dir().join("treeing.json")).unwrap();
    let g = Graphing::from_model(&m);
    let spec = GeneratingSpec::edge_quotient(m.clone(), &g).unwrap();
    let cost = graphings::cost(&g).unwrap();
    assert_eq!(spec.exact_dimension(), cost.exact);
    for o in 0..m.rel().blocks().len() {
        assert!(graphcoh::fundamental_loops(&graphings::fiber_graph(&g, o).unwrap()).is_empty());
    }
}

#[test]
fn perturbed_sofic_model_degrades_quality() {
    let m = Model::load(data_dir().join("mixed.json")).unwrap();
    let sigma = exact_model(&m, 8).unwrap();
    let noisy = lpdim::sofic::perturb(&sigma, 0.2, 4).unwrap();
    let q0 = quality_report(&sigma, &m, 2).unwrap();
    let q1 = quality_report(&noisy, &m, 2).unwrap();
    assert!(q1.word_defect > q0.word_defect);
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (3usize..40, 1usize..3, 0usize..30, any::<u64>())
        .prop_map(|(n, parts, extra, seed)| random_graph(n, parts, extra, &mut ChaCha8Rng::seed_from_u64(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coboundary_and_boundary_are_adjoint(g in graph_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..g.num_edges()).map(|_| rng.random::<f64>() - 0.5).collect();
        let h: Vec<f64> = (0..g.num_vertices()).map(|_| rng.random::<f64>() - 0.5).collect();
        let lhs = graphcoh::vertex_pairing(&graphcoh::boundary(&g, &f).unwrap(), &h);
        let rhs = graphcoh::edge_pairing(&f, &graphcoh::delta(&g, &h).unwrap());
        prop_assert!((lhs + rhs).abs() < 1e-12);
    }

    #[test]
    fn hodge_parts_recompose(g in graph_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..g.num_edges()).map(|_| rng.random::<f64>() - 0.5).collect();
        let (cycle, cut) = graphcoh::hodge_project(&g, &f).unwrap();
        for i in 0..f.len() {
            prop_assert!((cycle[i] + cut[i] - f[i]).abs() < 1e-12);
        }
        prop_assert!(max_abs(&graphcoh::boundary(&g, &cycle).unwrap()) < 1e-10);
        prop_assert!(graphcoh::is_cocycle(&g, &cut, 1e-10).unwrap());
    }

    #[test]
    fn transfer_identity_on_random_pairs(n in 3usize..12, e1 in 0usize..8, e2 in 0usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = connected_graph(n, e1, &mut rng);
        let g2 = connected_graph(n, e2, &mut rng);
        let check = graphings::transfer_spanning(&g, &g2).unwrap();
        prop_assert!(check.holds && check.closed);
        prop_assert_eq!(check.rank, check.cycle_dim);
    }

    #[test]
    fn random_graphings_respect_c1_le_cost(extra in 0usize..5, seed in any::<u64>()) {
        let m = lpdim::relation::builders::periodic(3, 5);
        let g = random_graphing(m.rel(), extra, &mut ChaCha8Rng::seed_from_u64(seed));
        let c1 = graphings::c1_exact_finite(&g);
        prop_assert_eq!(&c1.exact, &graphings::c1_of_relation(m.rel()));
        prop_assert!(c1.exact <= graphings::cost(&g).unwrap().exact);
    }
}
