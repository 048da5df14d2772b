use exo_core::Class;
use exo_intent::gradcheck;
use exo_intent::{Arch, DropoutMask, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-3;
const TOL: f64 = 1e-4;

fn run(arch: Arch, n: usize, seed: u64) -> gradcheck::GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::init(arch, &mut rng).unwrap();
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..arch.input_len).map(|_| rng.random::<f64>()).collect())
        .collect();
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let labels: Vec<Class> = (0..n).map(|i| Class::from_index(i % 3).unwrap()).collect();
    let mask = DropoutMask::sample(n, arch.hidden, 0.3, &mut rng);
    gradcheck::check(&params, &refs, &labels, &mask, EPS).unwrap()
}

#[test]
fn reduced_model_gradients_match_finite_differences() {
    let arch = Arch {
        input_len: 8,
        filters: [2, 2],
        kernel: 3,
        pool: 2,
        hidden: 4,
        classes: 3,
    };
    let r = run(arch, 4, 7);
    assert!(r.max_error < TOL, "{r:?}");
    assert_eq!(r.checked, ModelParams::init(arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().param_count());
}

#[test]
fn pool_four_gradients_match_finite_differences() {
    let arch = Arch {
        input_len: 32,
        filters: [2, 3],
        kernel: 3,
        pool: 4,
        hidden: 4,
        classes: 3,
    };
    let r = run(arch, 3, 8);
    assert!(r.max_error < TOL, "{r:?}");
}
