use dsec_core::selftest::{fisher_oracle_suite, gradient_suite, kmeans_oracle_suite, ward_oracle_suite};

#[test]
fn gradients_match_finite_differences() {
    let r = gradient_suite(7, 20);
    assert!(r.passed, "{r}");
}

#[test]
fn ward_matches_greedy_oracle() {
    let r = ward_oracle_suite(7, 100);
    assert!(r.passed, "{r}");
}

#[test]
fn kmeans_matches_exhaustive_search() {
    let r = kmeans_oracle_suite(7, 100, 0.05);
    assert!(r.passed, "{r}");
}

#[test]
fn fisher_matches_enumeration() {
    let r = fisher_oracle_suite(7, 1000);
    assert!(r.passed, "{r}");
}
