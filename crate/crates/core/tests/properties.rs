use pareto_coalescent::cli::{CommandName, ExperimentConfig, ModelParams};
use pareto_coalescent::forward::{ForwardConfig, ForwardModel};
use pareto_coalescent::limit::{lambda_rate, xi_transition_matrix, Params, RateTable};
use pareto_coalescent::RngStream;
use proptest::prelude::*;

fn command() -> impl Strategy<Value = CommandName> {
    prop_oneof![
        Just(CommandName::Rates),
        Just(CommandName::XiMatrix),
        Just(CommandName::FiniteMc),
        Just(CommandName::ScalingFit),
        Just(CommandName::Simulate),
        Just(CommandName::Forward),
        Just(CommandName::Gclt),
    ]
}

fn finite() -> impl Strategy<Value = Option<f64>> {
    proptest::option::of(-1e6f64..1e6)
}

prop_compose! {
    fn config()(
        command in command(),
        alpha in finite(),
        beta in finite(),
        theta in finite(),
        n in proptest::option::of(any::<u64>()),
        n_grid in proptest::collection::vec(any::<u64>(), 0..6),
        i_max in proptest::option::of(0usize..100),
        n0 in proptest::option::of(0usize..100_000),
        generations in proptest::option::of(0usize..100_000),
        replicas in proptest::option::of(0usize..10_000_000),
        seed in any::<u64>(),
        output_path in proptest::option::of("[a-z/_.]{1,20}"),
        trajectory in any::<bool>(),
    ) -> ExperimentConfig {
        ExperimentConfig {
            command,
            params: ModelParams { alpha, beta, theta },
            n,
            n_grid,
            i_max,
            n0,
            generations,
            replicas,
            seed,
            output_path,
            trajectory,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trip(cfg in config()) {
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn scale_shifts_log_global(c in 1e-3f64..1e3, seed in any::<u64>(), alpha in 0.3f64..4.0) {
        let init = vec![1.0, 0.25, 3.0, 2.0];
        let scaled: Vec<f64> = init.iter().map(|x| c * x).collect();
        let a = ForwardConfig::new(4, alpha, 8).unwrap().with_initial(init).unwrap();
        let b = ForwardConfig::new(4, alpha, 8).unwrap().with_initial(scaled).unwrap();
        let ta = ForwardModel::new(&a).unwrap().run(&mut RngStream::new(seed, 0));
        let tb = ForwardModel::new(&b).unwrap().run(&mut RngStream::new(seed, 0));
        for (x, y) in ta.iter().zip(&tb) {
            prop_assert!((y.log_global - x.log_global - c.ln()).abs() < 1e-9);
            prop_assert_eq!(x.log_increments.len(), x.k);
        }
    }

    #[test]
    fn xi_rows_are_distributions(alpha in 0.01f64..0.99, gap in 0.01f64..3.0, i_max in 2usize..16) {
        let p = Params::new(alpha, alpha - gap).unwrap();
        let m = xi_transition_matrix(&p, i_max).unwrap();
        for i in 2..=i_max {
            prop_assert!((m.total(i).unwrap() - 1.0).abs() < 1e-10);
            prop_assert!(m.row(i).unwrap().iter().all(|&v| v >= 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn lambda_rates_are_finite(alpha in 1.0f64..1.99, gap in 0.01f64..3.0, i in 2usize..40) {
        let p = Params::new(alpha, alpha - gap).unwrap();
        prop_assert!((lambda_rate(&p, 2, 1).unwrap() - 1.0).abs() < 1e-12);
        let table = RateTable::lambda(&p, i).unwrap();
        for j in 1..i {
            let v = table.get(i, j).unwrap();
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }
}
