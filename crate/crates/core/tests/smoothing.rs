use meshseg_core::mesh::shapes;
use meshseg_core::smoothing::{laplacian_smooth, taubin_smooth, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU};

fn relative_volume_change(before: f64, after: f64) -> f64 {
    (after - before).abs() / before
}

#[test]
fn taubin_preserves_icosphere_volume() {
    for level in [2, 3] {
        let m = shapes::icosphere(level);
        let seq = taubin_smooth(&m, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
        let change = relative_volume_change(m.signed_volume(), seq.levels[4].signed_volume());
        assert!(change <= 0.02, "level {level}: {change}");
    }
}

#[test]
fn plain_laplacian_shrinks_icosphere() {
    let m = shapes::icosphere(2);
    let levels = laplacian_smooth(&m, DEFAULT_ITERATIONS, DEFAULT_LAMBDA).unwrap();
    let after = levels[4].signed_volume();
    assert!(after < m.signed_volume());
    assert!(relative_volume_change(m.signed_volume(), after) > 0.05);
    let taubin = taubin_smooth(&m, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
    assert!(relative_volume_change(m.signed_volume(), taubin.levels[4].signed_volume()) < 0.2 * relative_volume_change(m.signed_volume(), after));
}
