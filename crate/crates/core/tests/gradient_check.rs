use prefine_core::align::{prefine_loss, Origin, PreferenceTriple};
use prefine_core::nn::GaussianPolicy;
use prefine_core::rng::prng;
use rand::Rng;

const H: f64 = 1e-5;

fn instance(seed: u64) -> (Vec<PreferenceTriple<f64>>, GaussianPolicy<f64>, GaussianPolicy<f64>, f64, f64) {
    let mut rng = prng(seed);
    let s = rng.random_range(1..=3);
    let a = rng.random_range(1..=2);
    let hidden = [rng.random_range(2..=8), rng.random_range(2..=6)];
    let theta = GaussianPolicy::new(s, a, &hidden, rng.random_range(-1.0..0.0), &mut rng);
    let reference = GaussianPolicy::new(s, a, &hidden, rng.random_range(-1.0..0.0), &mut rng);
    let n = rng.random_range(2..=8);
    let triples = (0..n)
        .map(|i| PreferenceTriple {
            state: (0..s).map(|_| rng.random_range(-1.5..1.5)).collect(),
            action_plus: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action_minus: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
            origin: if i == 0 || (i > 1 && rng.random_bool(0.5)) {
                Origin::FromPreferred
            } else {
                Origin::FromNonPreferred
            },
            from_dataset: false,
        })
        .collect();
    let beta = [0.05, 0.2, 0.6, 0.95][rng.random_range(0..4)];
    let lambda = [0.0, 0.1, 1.0, 1.6, 2.0][rng.random_range(0..5)];
    (triples, theta, reference, beta, lambda)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..25 {
        let (triples, theta, reference, beta, lambda) = instance(seed);
        assert!(theta.num_params() <= 200, "{} params", theta.num_params());
        let analytic = prefine_loss(&triples, &theta, &reference, beta, lambda)
            .unwrap()
            .gradients()
            .unwrap()
            .flat();
        let base = theta.flat_params();
        assert_eq!(analytic.len(), base.len());
        let mut probe = theta.clone();
        for (k, g) in analytic.iter().enumerate() {
            let mut eval = |delta: f64| {
                let mut p = base.clone();
                p[k] += delta;
                probe.set_flat_params(&p).unwrap();
                prefine_loss(&triples, &probe, &reference, beta, lambda).unwrap().value()
            };
            let fd = (eval(H) - eval(-H)) / (2.0 * H);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(rel < 1e-4, "seed {seed} param {k}: analytic {g} vs fd {fd}");
        }
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn reference_parameters_receive_no_gradient() {
    let (triples, theta, reference, beta, lambda) = instance(99);
    let before = reference.checksum();
    let graph = prefine_loss(&triples, &theta, &reference, beta, lambda).unwrap();
    // Only the fine-tuned policy's tensors are registered as parameters.
    assert_eq!(graph.tape.num_params(), theta.tensors().len());
    let grads = graph.gradients().unwrap();
    for (g, p) in grads.slots.iter().zip(theta.tensors()) {
        assert_eq!(g.shape(), p.shape());
    }
    assert_eq!(reference.checksum(), before);
}
