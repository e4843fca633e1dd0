use uncq::data::gen_sinusoid;
use uncq::net::{Activation, TrainConfig};
use uncq::sqr::{crossing_rate, train_sqr, QuantileEnsemble};

#[test]
fn joint_model_crosses_less_than_separate_networks() {
    let taus: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    for seed in 0..3 {
        let data = gen_sinusoid(2_000, seed).split((0.8, 0.1, 0.1), seed).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            weight_decay: 0.0,
            epochs: 40,
            batch_size: 64,
            seed,
            hidden: vec![32, 32],
            activation: Activation::Relu,
        };
        let test = data.raw_columns(&data.indices(uncq::data::Partition::Test));
        let joint = crossing_rate(&train_sqr(&data, &cfg).unwrap(), &test, &taus).unwrap();
        let separate = crossing_rate(&QuantileEnsemble::train(&data, &taus, &cfg).unwrap(), &test, &taus).unwrap();
        assert!(joint < separate, "seed {seed}: joint {joint} vs separate {separate}");
    }
}
