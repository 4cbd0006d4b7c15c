use proptest::prelude::*;

use vcem::circuit::{build_graph_circuit, sample_coherent_errors, sample_coherent_errors_by_key, transpile, ParamCircuit};
use vcem::clifford::CliffordTableau;
use vcem::cost::{chi_scaled_cost, cost, noisy_cost, GradientMethod, NoisyCost, Objective, PureCost};
use vcem::dense;
use vcem::fit::fit_linear;
use vcem::graph::Graph;
use vcem::noise::{sample_pauli_channel, Channel, NoiseLayout};
use vcem::pauli::{graph_stabilizers, Pauli, PauliString, StabilizerSet};

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    prop::collection::vec(prop::sample::select(Pauli::ALL.to_vec()), n).prop_map(|ps| PauliString::from_paulis(&ps))
}

fn setup(spec: &str, mag: f64, seed: u64) -> (ParamCircuit, StabilizerSet) {
    let g = Graph::from_spec(spec).unwrap();
    let c = transpile(&build_graph_circuit(&g).unwrap()).unwrap();
    let eps = sample_coherent_errors(&c, mag, seed).unwrap();
    (c.with_epsilons(eps).unwrap(), graph_stabilizers(&g).unwrap())
}

fn graph_spec() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["line:2", "line:3", "line:4", "grid:2x2"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_matches_dense(p in pauli_string(3), q in pauli_string(3)) {
        let pq = p.multiply(&q).unwrap();
        let diff = dense::max_abs_diff(&pq.to_dense(), &(p.to_dense() * q.to_dense()));
        prop_assert!(diff < 1e-12);
        let qp = q.multiply(&p).unwrap();
        prop_assert_eq!(p.commutes(&q).unwrap(), pq == qp);
        prop_assert_eq!(pq.unsigned(), qp.unsigned());
    }

    #[test]
    fn multiplication_associates(p in pauli_string(4), q in pauli_string(4), r in pauli_string(4)) {
        let left = p.multiply(&q).unwrap().multiply(&r).unwrap();
        let right = p.multiply(&q.multiply(&r).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn label_round_trip(p in pauli_string(5)) {
        let back: PauliString = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn cost_bounded_below(spec in graph_spec(), seed in 0u64..1000, scale in 0.0f64..3.2) {
        let (c, stabs) = setup(spec, 0.05, seed);
        let theta = sample_coherent_errors(&c, scale, seed + 1).unwrap();
        let r = cost(&c, &theta, &stabs).unwrap();
        let n = c.num_qubits() as f64;
        prop_assert!(r.total >= -n - 1e-12);
        prop_assert!(r.per_stabilizer.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn ideal_parameters_reach_minimum(spec in graph_spec(), seed in 0u64..1000) {
        let (c, stabs) = setup(spec, 0.1, seed);
        let r = cost(&c, &c.ideal_theta(), &stabs).unwrap();
        prop_assert!((r.total + c.num_qubits() as f64).abs() < 1e-12);
    }

    #[test]
    fn end_channel_rescales_terms(spec in graph_spec(), seed in 0u64..1000, mag in 0.0f64..0.03) {
        let (c, stabs) = setup(spec, 0.05, seed);
        let n = c.num_qubits();
        let ch = sample_pauli_channel(n, &[0, 1], mag, seed).unwrap();
        let mut moments = vec![Vec::new(); c.num_moments()];
        moments.last_mut().unwrap().push(Channel::Pauli(ch.clone()));
        let layout = NoiseLayout::new(n, moments).unwrap();
        let theta = sample_coherent_errors(&c, 0.3, seed + 7).unwrap();
        let sim = noisy_cost(&c, &theta, &layout, &stabs).unwrap();
        let chi = chi_scaled_cost(&c, &theta, &Channel::Pauli(ch), &stabs).unwrap();
        prop_assert!((sim.total - chi.total).abs() < 1e-12);
    }

    #[test]
    fn adjoint_matches_parameter_shift(spec in graph_spec(), seed in 0u64..1000) {
        let (c, stabs) = setup(spec, 0.05, seed);
        let theta = sample_coherent_errors(&c, 0.4, seed + 3).unwrap();
        let a = PureCost::with_method(c.clone(), stabs.clone(), GradientMethod::Adjoint).unwrap();
        let p = PureCost::new(c.clone(), stabs.clone()).unwrap();
        let (va, ga) = a.value_and_gradient(&theta).unwrap();
        let (vp, gp) = p.value_and_gradient(&theta).unwrap();
        prop_assert!((va - vp).abs() < 1e-12);
        for (x, y) in ga.iter().zip(&gp) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let layout = NoiseLayout::from_spec("pauli:m=2,mag=0.02", &c, seed).unwrap();
        let na = NoisyCost::new(c.clone(), layout.clone(), stabs.clone(), GradientMethod::Adjoint).unwrap();
        let np = NoisyCost::new(c, layout, stabs, GradientMethod::ParameterShift).unwrap();
        let (ga, gp) = (na.value_and_gradient(&theta).unwrap().1, np.value_and_gradient(&theta).unwrap().1);
        for (x, y) in ga.iter().zip(&gp) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn clifford_moments_preserve_commutation(p in pauli_string(4), q in pauli_string(4)) {
        let g = Graph::line(4).unwrap();
        let c = transpile(&build_graph_circuit(&g).unwrap()).unwrap();
        for t in CliffordTableau::moments_of(&c) {
            let (tp, tq) = (t.apply(&p).unwrap(), t.apply(&q).unwrap());
            prop_assert_eq!(tp.commutes(&tq).unwrap(), p.commutes(&q).unwrap());
            prop_assert_eq!(tp.weight() == 0, p.weight() == 0);
        }
    }

    #[test]
    fn keyed_sampling_is_nested(seed in 0u64..10_000, n in 3usize..7) {
        let small = transpile(&build_graph_circuit(&Graph::line(n).unwrap()).unwrap()).unwrap();
        let big = transpile(&build_graph_circuit(&Graph::line(n + 1).unwrap()).unwrap()).unwrap();
        let a = sample_coherent_errors_by_key(&small, 0.01, seed).unwrap();
        let b = sample_coherent_errors_by_key(&big, 0.01, seed).unwrap();
        for (k, e) in small.param_keys().iter().zip(&a) {
            let j = big.param_keys().iter().position(|x| x == k).unwrap();
            prop_assert_eq!(b[j], *e);
        }
        let la = NoiseLayout::from_spec("pauli:m=1,mag=0.01", &small, seed).unwrap();
        let lb = NoiseLayout::from_spec("pauli:m=1,mag=0.01", &small, seed).unwrap();
        prop_assert_eq!(la.to_document(), lb.to_document());
    }

    #[test]
    fn fit_recovers_lines(a in -10.0f64..10.0, b in -10.0f64..10.0, k in 4usize..20) {
        let xs: Vec<f64> = (0..k).map(|i| i as f64 * 0.5 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let f = fit_linear(&xs, &ys).unwrap();
        prop_assert!((f.slope - a).abs() < 1e-9 && (f.intercept - b).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&f.r_squared));
    }
}
