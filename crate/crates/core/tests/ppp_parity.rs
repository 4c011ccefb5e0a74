//! Pauli-path propagation against the statevector Trotter executor.

use fhsim_core::model::{neel_state, HubbardParams, Spin};
use fhsim_core::ppp::{occupation_trace, PppScheme, TruncationPolicy};
use fhsim_core::statevector::trotter_occupation_series;

#[test]
fn untruncated_ppp_matches_statevector_trotter() {
    // With truncation off the Heisenberg propagation is exact, so it must
    // reproduce the circuit simulation step for step.
    for (l, u, mu, dt, n) in [
        (3usize, 2.0, 0.0, 0.2, 6usize),
        (4, 4.0, 0.5, 0.15, 5),
        (4, -2.0, 0.0, 0.2, 4),
    ] {
        let params = HubbardParams::new(l, 1.0, u, mu).unwrap();
        let state = neel_state(l, Some(l / 2)).unwrap();
        let series = trotter_occupation_series(&params, &state, dt, n).unwrap();
        for site in 0..l {
            for spin in [Spin::Up, Spin::Down] {
                let q = fhsim_core::model::mode_index(site, spin, l).unwrap();
                let run = occupation_trace(
                    site,
                    spin,
                    &params,
                    dt,
                    n,
                    &TruncationPolicy::disabled(),
                    &state,
                    PppScheme::PairInterleavedCircuit,
                )
                .unwrap();
                for (k, value) in run.values.iter().enumerate() {
                    let reference = series[k][q];
                    assert!(
                        (value - reference).abs() < 1e-8,
                        "L={l} U={u} step {k} mode {q}: ppp {value} vs sv {reference}"
                    );
                }
            }
        }
    }
}

#[test]
fn interleaved_direct_scheme_matches_exact_at_small_dt() {
    // The direct interleaved Trotterization approximates the same dynamics;
    // at small dt it must track the exact oracle.
    let l = 3;
    let params = HubbardParams::new(l, 1.0, 2.0, 0.0).unwrap();
    let state = neel_state(l, Some(1)).unwrap();
    let dt = 0.02;
    let n = 20;
    let run = occupation_trace(
        1,
        Spin::Up,
        &params,
        dt,
        n,
        &TruncationPolicy::disabled(),
        &state,
        PppScheme::InterleavedDirect,
    )
    .unwrap();
    let mut ev = fhsim_core::statevector::ExactEvolver::new_full(&params, &state).unwrap();
    let q = fhsim_core::model::mode_index(1, Spin::Up, l).unwrap();
    for k in 1..=n {
        ev.advance(dt).unwrap();
        let exact = ev.occupations()[q];
        assert!(
            (run.values[k] - exact).abs() < 2e-2,
            "step {k}: {} vs {exact}",
            run.values[k]
        );
    }
}

#[test]
fn larger_weight_cap_cannot_increase_max_error() {
    // Fig. S8 trend: on L=5 the max-aggregated deviation from the
    // untruncated run is non-increasing in mw.
    let l = 5;
    let params = HubbardParams::new(l, 1.0, 4.0, 0.0).unwrap();
    let state = neel_state(l, Some(2)).unwrap();
    let dt = 0.2;
    let n = 10;
    let reference = occupation_trace(
        2,
        Spin::Up,
        &params,
        dt,
        n,
        &TruncationPolicy::disabled(),
        &state,
        PppScheme::PairInterleavedCircuit,
    )
    .unwrap();
    let mut max_errors = Vec::new();
    for mw in [4u32, 6, 10] {
        let run = occupation_trace(
            2,
            Spin::Up,
            &params,
            dt,
            n,
            &TruncationPolicy::with_mw(mw, 1e-5),
            &state,
            PppScheme::PairInterleavedCircuit,
        )
        .unwrap();
        for c in &run.census {
            assert!(c.totals_consistent());
        }
        let max_err = run
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        max_errors.push(max_err);
    }
    assert!(
        max_errors[0] >= max_errors[1] - 1e-12 && max_errors[1] >= max_errors[2] - 1e-12,
        "max errors not non-increasing: {max_errors:?}"
    );
    // With the XY cap lifted as well, the widest weight cap is exact on
    // this 10-qubit system.
    let exact_policy = TruncationPolicy {
        mw: 10,
        delta_min: 0.0,
        mw_xy: Some(10),
    };
    let run = occupation_trace(
        2,
        Spin::Up,
        &params,
        dt,
        n,
        &exact_policy,
        &state,
        PppScheme::PairInterleavedCircuit,
    )
    .unwrap();
    let max_err = run
        .values
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(max_err < 1e-10, "uncapped run deviates: {max_err}");
}
