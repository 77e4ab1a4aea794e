use std::sync::OnceLock;

use mbmlab_core::wavelet::{verify_kernel_pairing, KernelBank, KernelTable, SynthesisConfig};

fn bank() -> &'static KernelBank {
    static B: OnceLock<KernelBank> = OnceLock::new();
    B.get_or_init(|| KernelBank::build(SynthesisConfig::default()).unwrap())
}

fn psi() -> &'static KernelTable {
    &bank().synthesis[0]
}

#[test]
fn pairing_examples() {
    let d = &bank().dual;
    assert!((verify_kernel_pairing(psi(), d, 0.4, (0, 0), (0, 0)).unwrap() - 1.0).abs() < 1e-4);
    assert!(verify_kernel_pairing(psi(), d, 0.4, (0, 0), (0, 3)).unwrap().abs() < 1e-4);
    assert!(verify_kernel_pairing(psi(), d, 0.7, (1, 0), (0, 0)).unwrap().abs() < 1e-4);
}

#[test]
fn biorthogonality_matrix() {
    let d = &bank().dual;
    let idx: Vec<(i32, i64)> = (-2..=2).flat_map(|j| (-4..=4).map(move |k| (j, k))).collect();
    let mut worst: f64 = 0.0;
    for &a in &idx {
        for &b in &idx {
            let v = verify_kernel_pairing(psi(), d, 0.55, a, b).unwrap();
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((v - want).abs());
        }
    }
    assert!(worst < 1e-3, "largest deviation {worst}");
}

#[test]
fn dual_first_moment_vanishes() {
    let d = &bank().dual;
    for it in 0..d.theta.count {
        assert!(d.first_moment(it).abs() < 1e-8, "node {it}: {}", d.first_moment(it));
    }
}

#[test]
fn tables_are_localised() {
    for t in bank().synthesis.iter().chain(std::iter::once(&bank().dual)) {
        assert!(t.values.iter().all(|v| v.is_finite()));
        assert!(t.tail_constant.is_finite() && t.tail_constant > 0.0);
        assert!(t.periodization_bound <= 1e-8, "{:?}/{}: {}", t.which, t.dtheta_order, t.periodization_bound);
    }
}
