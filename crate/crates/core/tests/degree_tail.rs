use ledger_flow::network::{threshold_network, Direction};
use ledger_flow::stats::{pareto_index, FitMethod};
use ledger_flow::synth::{gen_ledger, SynthConfig};

// Preferential attachment with a constant entry rate gives degree tails of index ~1.
#[test]
fn preferential_attachment_degree_tail_has_unit_index() {
    for seed in 1..=3 {
        let config = SynthConfig { seed, n_accounts: 10_000, ..SynthConfig::default() };
        let records = gen_ledger(&config).unwrap();
        let net = threshold_network(&records, 1);
        assert!((9_000..=12_000).contains(&net.node_count()), "{} nodes", net.node_count());
        for direction in [Direction::In, Direction::Out] {
            let degrees: Vec<f64> = net.degrees(direction).values().map(|&d| d as f64).collect();
            let fit = pareto_index(&degrees, 5.0, FitMethod::Hill).unwrap();
            assert!(
                (0.8..=1.2).contains(&fit.alpha),
                "seed {seed} {direction:?}: alpha {} over {} tail nodes",
                fit.alpha,
                fit.n_tail
            );
        }
    }
}
