mod common;

use marslab::data::synth_dataset;
use marslab::nn::{
    conv3x3, dense, evaluate, softmax, train, Architecture, BatchNorm, Conv2d, Layer, Mode, Model,
    Tensor, TrainConfig,
};
use marslab::rng::rng_from;
use proptest::prelude::*;
use rand::Rng as _;

fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut rng = rng_from(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn perturbed_bn(channels: usize, seed: u64) -> BatchNorm {
    let mut rng = rng_from(seed);
    let mut bn = BatchNorm::new(channels);
    for k in 0..channels {
        bn.gamma[k] = rng.random_range(0.5..1.5);
        bn.beta[k] = rng.random_range(-0.5..0.5);
        bn.running_mean[k] = rng.random_range(-0.2..0.2);
        bn.running_var[k] = rng.random_range(0.5..2.0);
    }
    bn
}

fn check(model: &Model, x: &Tensor, y: &[usize], mode: Mode) {
    let (_, g, _) = model.backward_ce(x, y, mode).unwrap();
    let n = common::numeric_ce_grad(model, x, y, mode, 1e-4);
    let err = common::max_rel_err(&g.0, &n, 1e-4);
    assert!(err <= 1e-3, "relative error {err:e}");
}

#[test]
fn dense_relu_gradients() {
    let mut rng = rng_from(1);
    let m = Model::new(
        vec![1, 1, 5],
        3,
        vec![Layer::Flatten, dense(&mut rng, 5, 4), Layer::Relu, dense(&mut rng, 4, 3)],
    )
    .unwrap();
    check(&m, &random_tensor(vec![4, 1, 1, 5], 2), &[0, 2, 1, 2], Mode::Eval);
}

#[test]
fn conv_gradients_across_stride_and_padding() {
    for (stride, padding) in [(1, 0), (1, 1), (2, 1), (2, 0)] {
        let mut rng = rng_from(3);
        let filters = (0..3 * 2 * 9).map(|_| rng.random_range(-0.5..0.5)).collect();
        let bias = (0..3).map(|_| rng.random_range(-0.1..0.1)).collect();
        let conv = Conv2d::new(2, 3, 3, 3, stride, padding, filters, bias).unwrap();
        let out = Layer::Conv2d(conv.clone()).output_shape(&[2, 5, 5]).unwrap();
        let flat: usize = out.iter().product();
        let m = Model::new(
            vec![2, 5, 5],
            2,
            vec![Layer::Conv2d(conv), Layer::Flatten, dense(&mut rng, flat, 2)],
        )
        .unwrap();
        check(&m, &random_tensor(vec![3, 2, 5, 5], 4), &[1, 0, 1], Mode::Eval);
    }
}

#[test]
fn batchnorm_gradients_in_both_modes() {
    let mut rng = rng_from(5);
    let m = Model::new(
        vec![1, 4, 4],
        3,
        vec![
            conv3x3(&mut rng, 1, 2),
            Layer::BatchNorm(perturbed_bn(2, 6)),
            Layer::Relu,
            Layer::AvgPool { window: 2 },
            Layer::Flatten,
            dense(&mut rng, 8, 3),
        ],
    )
    .unwrap();
    let x = random_tensor(vec![4, 1, 4, 4], 7);
    check(&m, &x, &[0, 1, 2, 1], Mode::Eval);
    check(&m, &x, &[0, 1, 2, 1], Mode::Train);
}

#[test]
fn cnn_small_gradients_on_a_tiny_input() {
    let m = Architecture::CnnSmall.build([1, 4, 4], 3, &mut rng_from(8)).unwrap();
    check(&m, &random_tensor(vec![3, 1, 4, 4], 9), &[2, 0, 1], Mode::Train);
}

#[test]
fn mlp_small_learns_the_synthetic_task() {
    let data = synth_dataset(0, 10, 200, 16, 16).unwrap();
    let test = synth_dataset(1, 10, 50, 16, 16).unwrap();
    let mut rng = rng_from(0);
    let mut model = Architecture::MlpSmall.build(data.sample_shape(), 10, &mut rng).unwrap();
    let cfg = TrainConfig { epochs: 5, lr: 0.05, batch_size: 16 };
    train(&mut model, &data, &cfg, &mut rng, |_, _| {}).unwrap();
    let acc = evaluate(&model, &test).unwrap();
    assert!(acc > 0.95, "accuracy {acc}");
}

/// `x ↦ W2·relu(W1·x + b1) + b2` written out by hand.
fn two_layer_oracle(m: &Model, x: &[f64]) -> Vec<f64> {
    let [Layer::Flatten, Layer::Dense(a), Layer::Relu, Layer::Dense(b)] = m.layers() else {
        panic!("unexpected layout")
    };
    let hidden: Vec<f64> = (0..a.out_dim)
        .map(|k| (a.bias[k] + (0..a.in_dim).map(|j| a.weights[k * a.in_dim + j] * x[j]).sum::<f64>()).max(0.0))
        .collect();
    (0..b.out_dim)
        .map(|k| b.bias[k] + (0..b.in_dim).map(|j| b.weights[k * b.in_dim + j] * hidden[j]).sum::<f64>())
        .collect()
}

fn two_layer(seed: u64) -> Model {
    let mut rng = rng_from(seed);
    let layers = vec![Layer::Flatten, dense(&mut rng, 6, 5), Layer::Relu, dense(&mut rng, 5, 3)];
    Model::new(vec![1, 2, 3], 3, layers).unwrap()
}

#[test]
fn forward_matches_straight_line_arithmetic() {
    for seed in 0..10 {
        let m = two_layer(seed);
        let x = random_tensor(vec![4, 1, 2, 3], seed + 100);
        let pass = m.forward(&x, Mode::Eval).unwrap();
        for i in 0..4 {
            let want = two_layer_oracle(&m, &x.data()[i * 6..(i + 1) * 6]);
            let got = &pass.logits().data()[i * 3..(i + 1) * 3];
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-9, "seed {seed}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn predictions_match_hand_computed_argmax() {
    let m = two_layer(42);
    let x = random_tensor(vec![5, 1, 2, 3], 43);
    let want: Vec<usize> = (0..5)
        .map(|i| {
            let logits = two_layer_oracle(&m, &x.data()[i * 6..(i + 1) * 6]);
            (0..3).fold(0, |best, k| if logits[k] > logits[best] { k } else { best })
        })
        .collect();
    assert_eq!(m.predict(&x).unwrap(), want);
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-700.0f64..700.0, 1..20)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn relu_and_avgpool_are_one_lipschitz(seed in any::<u64>(), window in 1usize..4) {
        let side = window * 3;
        let a = random_tensor(vec![1, 2, side, side], seed);
        let b = random_tensor(vec![1, 2, side, side], seed ^ 0x9e37);
        for layer in [Layer::Relu, Layer::AvgPool { window }] {
            let (fa, _) = layer.forward(&a, Mode::Eval).unwrap();
            let (fb, _) = layer.forward(&b, Mode::Eval).unwrap();
            prop_assert!(l2(fa.data(), fb.data()) <= l2(a.data(), b.data()) + 1e-12);
        }
    }

    #[test]
    fn forward_stays_finite(seed in any::<u64>()) {
        let m = Architecture::CnnSmall.build([1, 8, 8], 4, &mut rng_from(seed)).unwrap();
        let x = random_tensor(vec![2, 1, 8, 8], seed);
        for mode in [Mode::Eval, Mode::Train] {
            prop_assert!(m.forward(&x, mode).unwrap().logits().is_finite());
        }
        let (loss, g, _) = m.backward_ce(&x, &[0, 3], Mode::Train).unwrap();
        prop_assert!(loss.is_finite() && g.0.iter().all(|v| v.is_finite()));
    }
}
