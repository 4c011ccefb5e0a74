//! End-to-end mitigation checks on synthetic-noise pipelines at small L.

use fhsim_core::circuit::{apply_virtual_permutation, build_echo_circuit, build_trotter_circuit};
use fhsim_core::mitigation::{
    build_confusion, decay_recovery, echo_factors, postselect, rem_occupation,
};
use fhsim_core::model::{neel_state, HubbardParams, Spin};
use fhsim_core::statevector::{
    occupations_from_shots, occupations_from_state, run, sample, sample_noisy_run, NoiseModel,
    ShotTable, StateVector,
};

fn calibration_tables(width: usize, noise: &NoiseModel, shots: u64) -> (ShotTable, ShotTable) {
    let zeros = StateVector::from_basis_index(width, 0).unwrap();
    let ones = StateVector::from_basis_index(width, (1 << width) - 1).unwrap();
    let t0 = sample(&zeros, shots, noise, 101).unwrap();
    let t1 = sample(&ones, shots, noise, 202).unwrap();
    (t0, t1)
}

#[test]
fn confusion_recovery_within_binomial_error() {
    let width = 6;
    let noise = NoiseModel {
        p_dep2q: 0.0,
        p10: 0.02,
        p01: 0.013,
        seed: 5,
    };
    let shots = 16384;
    let (t0, t1) = calibration_tables(width, &noise, shots);
    let confusion = build_confusion(&t0, &t1).unwrap();
    for m in &confusion.matrices {
        let sigma10 = (0.02f64 * 0.98 / shots as f64).sqrt();
        let sigma01 = (0.013f64 * 0.987 / shots as f64).sqrt();
        assert!((m[1][0] - 0.02).abs() < 3.0 * sigma10, "p10 {}", m[1][0]);
        assert!((m[0][1] - 0.013).abs() < 3.0 * sigma01, "p01 {}", m[0][1]);
    }
}

#[test]
fn rem_strictly_reduces_occupation_rmse_under_readout_noise() {
    let l = 4;
    let params = HubbardParams::new(l, 1.0, 3.0, 0.0).unwrap();
    let state = neel_state(l, Some(1)).unwrap();
    let circuit = build_trotter_circuit(&params, 0.2, 6).unwrap();
    let ideal = run(&circuit, &state).unwrap();
    let truth: Vec<f64> = occupations_from_state(&ideal, Some(&circuit.mode_perm))
        .iter()
        .map(|e| e.value)
        .collect();

    let noise = NoiseModel {
        p_dep2q: 0.0,
        p10: 0.03,
        p01: 0.02,
        seed: 9,
    };
    let shots = sample(&ideal, 40_000, &noise, 0).unwrap();
    let (t0, t1) = calibration_tables(2 * l, &noise, 32_768);
    let confusion = build_confusion(&t0, &t1).unwrap();

    let raw: Vec<f64> = occupations_from_shots(&shots, Some(&circuit.mode_perm))
        .iter()
        .map(|e| e.value)
        .collect();
    // REM works per physical qubit; relabel afterwards like the raw path.
    let mut mitigated = vec![0.0; 2 * l];
    for q in 0..2 * l {
        let est = rem_occupation(&shots, q, &confusion).unwrap();
        mitigated[circuit.mode_perm.canonical_index(q)] = est.estimate.value;
    }
    let rmse_raw = fhsim_core::analysis::rmse(&raw, &truth).unwrap();
    let rmse_rem = fhsim_core::analysis::rmse(&mitigated, &truth).unwrap();
    assert!(
        rmse_rem < rmse_raw,
        "REM did not help: raw {rmse_raw}, rem {rmse_rem}"
    );
}

#[test]
fn noiseless_postselection_discards_nothing() {
    let l = 4;
    let params = HubbardParams::new(l, 1.0, 2.0, 0.0).unwrap();
    let state = neel_state(l, None).unwrap();
    for n in [1usize, 3, 6] {
        let circuit = build_trotter_circuit(&params, 0.2, n).unwrap();
        let sv = run(&circuit, &state).unwrap();
        let shots = sample(&sv, 4000, &NoiseModel::noiseless(17), n as u64).unwrap();
        let canonical = apply_virtual_permutation(&shots, &circuit.mode_perm).unwrap();
        let r = postselect(
            &canonical,
            state.n_spin(Spin::Up),
            state.n_spin(Spin::Down),
            &fhsim_core::circuit::ModePermutation::identity(l),
        )
        .unwrap();
        assert_eq!(r.discard_rate, 0.0, "n={n}");
    }
}

#[test]
fn noisy_discard_rate_grows_with_depth() {
    let l = 4;
    let params = HubbardParams::new(l, 1.0, 2.0, 0.0).unwrap();
    let state = neel_state(l, None).unwrap();
    let noise = NoiseModel {
        p_dep2q: 0.02,
        p10: 0.0,
        p01: 0.0,
        seed: 23,
    };
    let mut rates = Vec::new();
    for n in [1usize, 6, 14] {
        let circuit = build_trotter_circuit(&params, 0.2, n).unwrap();
        let shots = sample_noisy_run(&circuit, &state, &noise, 6000, 48).unwrap();
        let r = postselect(
            &shots,
            state.n_spin(Spin::Up),
            state.n_spin(Spin::Down),
            &circuit.mode_perm,
        )
        .unwrap();
        rates.push(r.discard_rate);
    }
    assert!(
        rates[0] < rates[1] && rates[1] < rates[2],
        "discard rates not growing: {rates:?}"
    );
}

#[test]
fn decay_recovery_improves_noisy_occupations() {
    let l = 4;
    let u = 2.0;
    let params = HubbardParams::new(l, 1.0, u, 0.0).unwrap();
    let state = neel_state(l, Some(2)).unwrap();
    let dt = 0.2;
    let n_steps = 8usize;
    let shots_per_step = 20_000u64;
    let noise = NoiseModel {
        p_dep2q: 0.02,
        p10: 0.0,
        p01: 0.0,
        seed: 31,
    };

    // Ideal echo expectation of n_q equals its t=0 value (identity circuit).
    let width = 2 * l;
    let ideal_occ: Vec<f64> = state.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    // Hardware-like echo runs at even steps give per-mode damping factors
    // of <Z_q>, which is the Pauli the occupation estimator uses.
    let mut echo_z: Vec<Vec<(usize, f64)>> = vec![Vec::new(); width];
    for n in (0..=n_steps).step_by(2) {
        let echo = build_echo_circuit(&params, dt, n).unwrap();
        let shots = sample_noisy_run(&echo, &state, &noise, shots_per_step, 40).unwrap();
        let occ = occupations_from_shots(&shots, Some(&echo.mode_perm));
        for q in 0..width {
            echo_z[q].push((n, 1.0 - 2.0 * occ[q].value));
        }
    }

    // Raw evolution data per step.
    let mut raw_z: Vec<Vec<f64>> = vec![Vec::new(); width];
    let mut truth_z: Vec<Vec<f64>> = vec![Vec::new(); width];
    for n in 0..=n_steps {
        let (raw_occ, truth_occ) = if n == 0 {
            (ideal_occ.clone(), ideal_occ.clone())
        } else {
            let circuit = build_trotter_circuit(&params, dt, n).unwrap();
            let shots = sample_noisy_run(&circuit, &state, &noise, shots_per_step, 40).unwrap();
            let raw = occupations_from_shots(&shots, Some(&circuit.mode_perm));
            let ideal_run = run(&circuit, &state).unwrap();
            let truth = occupations_from_state(&ideal_run, Some(&circuit.mode_perm));
            (
                raw.iter().map(|e| e.value).collect::<Vec<f64>>(),
                truth.iter().map(|e| e.value).collect::<Vec<f64>>(),
            )
        };
        for q in 0..width {
            raw_z[q].push(1.0 - 2.0 * raw_occ[q]);
            truth_z[q].push(1.0 - 2.0 * truth_occ[q]);
        }
    }

    // Mitigate each mode's <Z> series and compare time-averaged RMSE.
    let mut rmse_raw = 0.0;
    let mut rmse_mit = 0.0;
    let mut used = 0;
    for q in 0..width {
        let ideal_z = 1.0 - 2.0 * ideal_occ[q];
        if ideal_z.abs() < 1e-9 {
            continue; // vanishing ideal echo: decay recovery skips these
        }
        let ideal_series = vec![ideal_z; n_steps + 1];
        let factors = echo_factors(&echo_z[q], &ideal_series, n_steps).unwrap();
        let mitigated = decay_recovery(&raw_z[q], &factors, 0.5).unwrap();
        for n in 1..=n_steps {
            rmse_raw += (raw_z[q][n] - truth_z[q][n]).powi(2);
            rmse_mit += (mitigated[n] - truth_z[q][n]).powi(2);
            used += 1;
        }
    }
    let rmse_raw = (rmse_raw / used as f64).sqrt();
    let rmse_mit = (rmse_mit / used as f64).sqrt();
    assert!(
        rmse_mit < rmse_raw * 0.85,
        "decay recovery gained too little: raw {rmse_raw}, mitigated {rmse_mit}"
    );
}
