use leakage_core::gradcheck::{random_joint_case, random_mlp_case};

const TOLERANCE: f64 = 1e-5;

#[test]
fn random_networks_match_finite_differences() {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let case = random_mlp_case(seed).unwrap();
        let r = case.check().unwrap();
        assert!(r.passes(TOLERANCE), "seed {seed} {:?}: {r:?}", case.loss);
        worst = worst.max(r.max_rel_error);
    }
    eprintln!("worst relative error {worst:.2e}");
}

#[test]
fn joint_losses_match_finite_differences() {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let case = random_joint_case(seed).unwrap();
        let r = case.check().unwrap();
        assert!(r.passes(TOLERANCE), "seed {seed} {}: {r:?}", case.model.config.label());
        worst = worst.max(r.max_rel_error);
    }
    eprintln!("worst relative error {worst:.2e}");
}
