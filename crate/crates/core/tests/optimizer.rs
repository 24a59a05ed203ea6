use bodyorient_core::optim::{Adam, AdamConfig};

/// Three bias-corrected Adam steps on `f(x) = x0^2 + 3 x1^2` from `(1, -2)` with lr 0.1.
/// Reference values were computed with an independent scalar implementation.
#[test]
fn matches_reference_trace() {
    let expected = [
        [0.9000000005, -1.9000000000833333],
        [0.8004122286917928, -1.8001664857787731],
        [0.7015862729460303, -1.7006233915360325],
    ];
    let mut x = [1.0, -2.0];
    let mut adam = Adam::new(
        2,
        AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        },
    );
    for want in expected {
        let g = [2.0 * x[0], 6.0 * x[1]];
        adam.step(&mut x, &g);
        assert!(
            (x[0] - want[0]).abs() < 1e-12 && (x[1] - want[1]).abs() < 1e-12,
            "{x:?} vs {want:?}"
        );
    }
    assert_eq!(adam.steps(), 3);
}
