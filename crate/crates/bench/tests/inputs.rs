use rdspread_bench::{disc_mask, front_field};

#[test]
fn inputs_have_the_advertised_shape() {
    let f = front_field(64);
    assert_eq!((f.grid.nx, f.grid.ny), (64, 64));
    assert!(f.values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(f.values[0] > 0.5 && *f.values.last().unwrap() < 0.5);
    let m = disc_mask(64);
    let area = m.count() as f64;
    let expected = std::f64::consts::PI * 16.0 * 16.0;
    assert!((area - expected).abs() / expected < 0.05, "{area}");
}
