use dcram::circuit::{PulseSpec, StepControl};
use dcram::device::MemcapacitorParams;
use dcram::memops::{
    calibrate_sense_resistance, read_refresh, restore_bit, retention_sweep, sense_peak, write_bit, write_response, Bit,
    LogicThresholds, MemoryContext, MemopsError,
};
use proptest::prelude::*;

fn quick() -> MemoryContext {
    MemoryContext {
        step: StepControl::fast(2.0),
        ..MemoryContext::default()
    }
}

#[test]
fn read_recovers_bits_and_refresh_is_stable() {
    let ctx = MemoryContext::default();
    for stored in [-3.4, -0.5, 0.5, 3.4] {
        let r = read_refresh(&ctx, stored).unwrap();
        assert_eq!(r.bit, stored > 0.0, "stored {stored}");
        assert_eq!(r.pre_refresh.value, Bit::One, "stored {stored}: {:?}", r.pre_refresh);
        let again = read_refresh(&ctx, r.refreshed.ivd).unwrap();
        assert_eq!(again.bit, r.bit);
    }
}

#[test]
fn reading_zero_costs_more_than_one() {
    let ctx = MemoryContext::default();
    let e0 = read_refresh(&ctx, -0.5).unwrap().energy_fj;
    let e1 = read_refresh(&ctx, 0.5).unwrap().energy_fj;
    assert!(e0 > e1, "{e0} vs {e1}");
}

#[test]
fn sense_resistance_default_is_calibrated() {
    let ctx = quick();
    let r = calibrate_sense_resistance(&ctx).unwrap();
    assert!((r - ctx.vsa.sense_resistance_ohm).abs() / r < 0.01, "{r}");
    // Stored 0 pushes more current through the sense resistor than stored 1.
    assert!(sense_peak(&ctx, -1.0).unwrap() > ctx.vsa.threshold_v);
    assert!(sense_peak(&ctx, 1.0).unwrap() < ctx.vsa.threshold_v);
}

#[test]
fn writes_land_on_requested_bit() {
    let ctx = quick();
    for from in [-3.8, -1.0, 0.0, 1.0, 3.8] {
        for bit in [false, true] {
            let w = write_bit(&ctx, from, bit).unwrap();
            assert_eq!(w.bit.value, Bit::from_bool(bit), "{from} {bit}: {:?}", w.bit);
            assert!(w.energy_fj >= 0.0);
        }
    }
}

#[test]
fn restoring_write_is_nearly_state_independent() {
    let ctx = quick();
    let band = dcram::logic::LogicContext::default().level_band_v;
    let mut levels = Vec::new();
    for from in [-4.2, -3.4, -0.5, 0.0, 0.5, 3.4, 4.2] {
        for bit in [false, true] {
            let w = restore_bit(&ctx, from, bit).unwrap();
            assert_eq!(w.bit.value, Bit::from_bool(bit));
            levels.push(w.bit.ivd.abs());
        }
    }
    let lo = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = levels.iter().copied().fold(0.0, f64::max);
    assert!(hi - lo < 0.02, "{lo} {hi}");
    assert!(band.0 <= lo && hi <= band.1, "{lo} {hi} outside {band:?}");
    // A plain write onto the same bit keeps adding charge.
    assert!(write_bit(&ctx, 3.4, true).unwrap().bit.ivd > 3.6);
}

#[test]
fn undefined_reads_are_rejected() {
    let ctx = quick();
    assert!(matches!(read_refresh(&ctx, 0.1), Err(MemopsError::Unreadable(_))));
}

#[test]
fn wrong_pulse_sign_is_rejected() {
    let ctx = quick();
    let pulse = PulseSpec::new(-1.0, 1.0);
    assert!(matches!(
        dcram::memops::write_bit_with(&ctx, 0.0, true, &pulse),
        Err(MemopsError::PulseSign { .. })
    ));
}

#[test]
fn write_response_is_monotone() {
    let ctx = quick();
    let grid: Vec<f64> = (0..=6).map(|i| 0.25 * i as f64).collect();
    let pts = write_response(&ctx, &ctx.write_pulse, &grid).unwrap();
    assert_eq!(pts[0].ivd_after_pulse, 0.0);
    for w in pts.windows(2) {
        assert!(w[1].ivd_after_1s >= w[0].ivd_after_1s, "{:?}", w);
        assert!(w[1].ivd_after_1s <= w[1].ivd_after_pulse + 1e-12);
    }
}

#[test]
fn retention_table_shapes_and_zero_start() {
    let base = MemcapacitorParams::paper_cell();
    let t = retention_sweep(&base, &[3.9, 25.0], &[6.0, 10.0], 0.0, 1e6, 15).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.rows.iter().all(|r| r.ivd.iter().all(|&v| v == 0.0)));
    let csv = t.to_csv().unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t_s,ivd_k3.9_d6nm,ivd_k3.9_d10nm,ivd_k25_d6nm,ivd_k25_d10nm");
    assert_eq!(csv.lines().count(), 16);
    assert!(!csv.contains('\r'));
    assert!(matches!(retention_sweep(&base, &[], &[6.0], 1.0, 1.0, 3), Err(MemopsError::EmptyGrid(_))));
}

#[test]
fn thicker_low_permittivity_layer_retains_longer() {
    let base = MemcapacitorParams::paper_cell();
    let t = retention_sweep(&base, &[3.9], &[6.0, 8.0, 10.0], 4.0, 1e6, 29).unwrap();
    let last: Vec<f64> = t.rows.iter().map(|r| *r.ivd.last().unwrap()).collect();
    assert!(last[0] < last[1] && last[1] < last[2], "{last:?}");
}

proptest! {
    #[test]
    fn classification_respects_threshold(u in -5.0f64..5.0, th in 0.05f64..1.0) {
        let c = LogicThresholds { ivd_threshold_v: th }.classify(u);
        let expect = if u >= th { Bit::One } else if u <= -th { Bit::Zero } else { Bit::Undefined };
        prop_assert_eq!(c.value, expect);
        prop_assert_eq!(c.ivd, u);
    }

    #[test]
    fn charge_threshold_scales_with_c2(th in 0.05f64..1.0) {
        let p = MemcapacitorParams::paper_cell();
        let q = LogicThresholds { ivd_threshold_v: th }.charge_threshold(&p);
        prop_assert!((q - th * p.c2()).abs() <= 1e-12 * q.abs());
    }
}
