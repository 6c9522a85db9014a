mod common;

use mpmqir_core::metrics::psnr_from_mse;

#[test]
fn ssim_matches_reference_implementation() {
    let cases = common::ssim_golden_cases();
    assert_eq!(cases.len(), 5);
    for (name, ours, expected) in cases {
        assert!((ours - expected).abs() < 1e-6, "{name}: {ours} vs {expected}");
    }
}

#[test]
fn psnr_at_one_thousandth() {
    assert_eq!(psnr_from_mse(0.001), 30.0);
}
