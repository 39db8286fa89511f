use dcram::circuit::{
    build_coupled, build_single_cell, transient_solve, CouplingConfig, CouplingParams, Netlist, PulseSpec, ResistorKind,
    StepControl, TransmissionLineParams, Waveforms,
};
use dcram::device::MemcapacitorParams;
use proptest::prelude::*;

fn fixed_step(dt_ps: f64) -> StepControl {
    StepControl {
        dt_ps,
        halving_check: false,
        record_stride: 1,
        ..StepControl::default()
    }
}

fn single(ivd0: f64, amplitude: f64, line: TransmissionLineParams, ctl: StepControl) -> Waveforms {
    let net = build_single_cell(&MemcapacitorParams::paper_cell(), &line, &PulseSpec::new(amplitude, 1.0), ivd0).unwrap();
    transient_solve(&net, net.t_stop_ns, ctl).unwrap()
}

/// Observed order from three runs at h, h/2, h/4.
fn observed_order(a: f64, b: f64, c: f64) -> f64 {
    ((a - b).abs() / (b - c).abs()).log2()
}

#[test]
fn trapezoidal_is_second_order() {
    let ivd: Vec<f64> = [2.0, 1.0, 0.5, 0.25]
        .iter()
        .map(|&dt| single(0.0, 1.0, TransmissionLineParams::default(), fixed_step(dt)).final_ivd()[0])
        .collect();
    for w in ivd.windows(3) {
        let p = observed_order(w[0], w[1], w[2]);
        assert!(p >= 1.95, "observed order {p} from {w:?}");
    }
}

#[test]
fn kcl_holds_at_every_step() {
    let w = single(-1.5, 1.2, TransmissionLineParams::default(), StepControl::default());
    assert!(w.max_kcl_residual_a < 1e-12, "{}", w.max_kcl_residual_a);
    assert!(w.accepted_steps > 1000);
}

/// Response of an RC low-pass (tau) to a unit ramp starting at t0.
fn rc_ramp(t: f64, t0: f64, tau: f64) -> f64 {
    if t <= t0 {
        0.0
    } else {
        let x = t - t0;
        x - tau * (1.0 - (-x / tau).exp())
    }
}

#[test]
fn rc_network_matches_closed_form() {
    let pulse = PulseSpec::new(0.8, 1.5);
    let (r, c) = (2_000.0, 0.4e-12);
    let tau_ns = r * c * 1e9;
    let mut net = Netlist::new();
    let s = net.add_node("s");
    net.add_source(s, vec![pulse]);
    let a = net.add_node("a");
    let probe = net.add_resistor(s, a, r, ResistorKind::Line);
    net.add_capacitor(a, 0, c);
    net.probe = Some(probe);
    let w = transient_solve(&net, 5.0, fixed_step(1.0)).unwrap();

    let [b0, b1, b2, b3] = pulse.breakpoints();
    let slope = pulse.amplitude_v / pulse.rise_ns();
    let exact = |t: f64| slope * (rc_ramp(t, b0, tau_ns) - rc_ramp(t, b1, tau_ns) - rc_ramp(t, b2, tau_ns) + rc_ramp(t, b3, tau_ns));
    let va = w.node("a").unwrap();
    let scale = w.time_ns.iter().map(|&t| exact(t).abs()).fold(0.0, f64::max);
    let err = w
        .time_ns
        .iter()
        .zip(va)
        .map(|(&t, v)| (v - exact(t)).abs())
        .fold(0.0, f64::max);
    assert!(err / scale < 1e-6, "relative error {}", err / scale);
}

#[test]
fn segment_doubling_changes_peak_little() {
    let base = TransmissionLineParams::default();
    let fine = TransmissionLineParams {
        n_segments: 2 * base.n_segments,
        ..base
    };
    let a = single(0.0, 1.0, base, StepControl::default()).peak_abs_current_ua();
    let b = single(0.0, 1.0, fine, StepControl::default()).peak_abs_current_ua();
    assert!((a - b).abs() / b < 0.02, "{a} vs {b}");
}

#[test]
fn zero_drive_on_empty_cell_stays_zero() {
    let w = single(0.0, 0.0, TransmissionLineParams::default(), StepControl::fast(2.0));
    assert!(w.end_current_ua.iter().all(|&i| i == 0.0));
    assert!(w.cell_ivd[0].iter().all(|&u| u == 0.0));
    assert_eq!(w.final_total_energy_fj(), 0.0);
}

#[test]
fn mirrored_state_and_drive_mirror_the_response() {
    let a = single(1.3, 1.0, TransmissionLineParams::default(), StepControl::fast(1.0));
    let b = single(-1.3, -1.0, TransmissionLineParams::default(), StepControl::fast(1.0));
    for (x, y) in a.end_current_ua.iter().zip(&b.end_current_ua) {
        assert!((x + y).abs() <= 1e-9 * x.abs().max(1e-6), "{x} {y}");
    }
    assert!((a.final_ivd()[0] + b.final_ivd()[0]).abs() < 1e-12);
    assert!((a.final_total_energy_fj() - b.final_total_energy_fj()).abs() < 1e-9 * a.final_total_energy_fj());
}

#[test]
fn energy_traces_never_decrease() {
    let w = single(-3.0, 1.0, TransmissionLineParams::default(), StepControl::default());
    for trace in [&w.cell_energy_fj, &w.periphery_energy_fj, &w.total_energy_fj] {
        assert!(trace.windows(2).all(|p| p[1] >= p[0] - 1e-12));
    }
    assert!(w.time_ns.windows(2).all(|p| p[1] > p[0]));
}

#[test]
fn flipping_every_cell_mirrors_node_voltages() {
    let cell = MemcapacitorParams::paper_cell();
    let coupling = CouplingParams::default();
    let drives = (PulseSpec::new(0.9, 1.0), PulseSpec::new(-0.6, 1.0));
    let neg = (drives.0.with_amplitude(-0.9), drives.1.with_amplitude(0.6));
    let ivd = [(cell, 3.3), (cell, -3.3)];
    let a = build_coupled(&ivd, &CouplingConfig::TwoCell { index: 2 }, drives, &coupling).unwrap();
    let b = build_coupled(&ivd, &CouplingConfig::TwoCell { index: 3 }, neg, &coupling).unwrap();
    let ctl = StepControl::fast(2.0);
    let wa = transient_solve(&a, a.t_stop_ns, ctl).unwrap();
    let wb = transient_solve(&b, b.t_stop_ns, ctl).unwrap();
    for (x, y) in wa.final_ivd().iter().zip(wb.final_ivd()) {
        assert!((x - y).abs() < 1e-9, "{x} {y}");
    }
    for (na, nb) in wa.node_voltages.iter().zip(&wb.node_voltages) {
        for (x, y) in na.iter().zip(nb) {
            assert!((x + y).abs() < 1e-9, "{x} {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rc_response_is_linear_in_amplitude(k in -3.0f64..3.0) {
        prop_assume!(k.abs() > 1e-3);
        let run = |amp: f64| {
            // Slew scaled with the amplitude keeps the edge duration fixed.
            let pulse = PulseSpec { slew_v_per_ns: 10.0 * amp.abs(), ..PulseSpec::new(amp, 1.0) };
            let mut net = Netlist::new();
            let s = net.add_node("s");
            net.add_source(s, vec![pulse]);
            let a = net.add_node("a");
            net.add_resistor(s, a, 1_000.0, ResistorKind::Line);
            net.add_capacitor(a, 0, 1e-12);
            transient_solve(&net, 2.5, StepControl::fast(2.0)).unwrap().node("a").unwrap().to_vec()
        };
        let unit = run(1.0);
        let scaled = run(k);
        prop_assert_eq!(unit.len(), scaled.len());
        for (u, s) in unit.iter().zip(&scaled) {
            prop_assert!((k * u - s).abs() <= 1e-9 * k.abs());
        }
    }

    #[test]
    fn pulse_value_bounded_by_amplitude(amp in -2.0f64..2.0, t in -1.0f64..5.0) {
        let p = PulseSpec::new(amp, 1.0);
        prop_assert!(p.value(t).abs() <= amp.abs() + 1e-15);
        prop_assert!(p.value(t) * amp >= 0.0);
    }

    #[test]
    fn storage_between_pulses_only_decays(ivd0 in -3.5f64..3.5) {
        let net = build_single_cell(&MemcapacitorParams::paper_cell(), &TransmissionLineParams::default(), &PulseSpec::new(0.0, 1.0), ivd0).unwrap();
        let w = transient_solve(&net, net.t_stop_ns, StepControl::fast(2.0)).unwrap();
        let u = &w.cell_ivd[0];
        prop_assert!(u.windows(2).all(|p| p[1].abs() <= p[0].abs() + 1e-12));
    }
}
