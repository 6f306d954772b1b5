use fbmcf::verify::{self, CriterionResult};

fn check(r: CriterionResult) {
    println!("{r}");
    assert!(r.passed(), "{r}");
}

#[test]
fn c01_stationary_half_plane() {
    check(verify::criterion_1());
}

#[test]
fn c02_shrinking_sphere_convergence() {
    check(verify::criterion_2());
}

#[test]
fn c03_area_law() {
    check(verify::criterion_3());
}

#[test]
fn c04_density_ground_truth() {
    check(verify::criterion_4());
}

#[test]
fn c05_kernel_consistency() {
    check(verify::criterion_5());
}

#[test]
fn c06_monotonicity() {
    check(verify::criterion_6());
}

#[test]
fn c07_gauss_bonnet() {
    check(verify::criterion_7());
}

#[test]
fn c08_self_shrinker_residual() {
    check(verify::criterion_8());
}

#[test]
fn c09_modified_area_ratio() {
    check(verify::criterion_9());
}

#[test]
fn c10_reflection_principle() {
    check(verify::criterion_10());
}

#[test]
fn c11_rescaling_self_similarity() {
    check(verify::criterion_11());
}

#[test]
fn c12_singular_set_scan() {
    check(verify::criterion_12());
}
