//! Wavefront analysis driven by the exact-evolution oracle on a central
//! vacancy quench.

use fhsim_core::analysis::{charge_tracer, extract_velocity, spin_tracer, TracerField};
use fhsim_core::model::{mode_index, neel_state, HubbardParams, Spin};
use fhsim_core::statevector::ExactEvolver;

/// Run the quench and collect both tracer fields from diagonal observables.
fn quench_fields(l: usize, u: f64, t_max: f64, dt: f64) -> (TracerField, TracerField) {
    let params = HubbardParams::new(l, 1.0, u, 0.0).unwrap();
    let i_star = l / 2;
    let state = neel_state(l, Some(i_star)).unwrap();
    let mut ev = ExactEvolver::new_auto(&params, &state).unwrap();
    let n_steps = (t_max / dt).round() as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut density = Vec::with_capacity(n_steps + 1);
    let mut sz = Vec::with_capacity(n_steps + 1);
    let mut szsz = Vec::with_capacity(n_steps + 1);
    let star_up = mode_index(i_star, Spin::Up, l).unwrap();
    let star_dn = mode_index(i_star, Spin::Down, l).unwrap();
    for k in 0..=n_steps {
        if k > 0 {
            ev.advance(dt).unwrap();
        }
        times.push(k as f64 * dt);
        let occ = ev.occupations();
        let mut dens_row = Vec::with_capacity(l);
        let mut sz_row = Vec::with_capacity(l);
        let mut szsz_row = Vec::with_capacity(l);
        for site in 0..l {
            let up = mode_index(site, Spin::Up, l).unwrap();
            let dn = mode_index(site, Spin::Down, l).unwrap();
            dens_row.push(occ[up] + occ[dn]);
            sz_row.push(0.5 * (occ[up] - occ[dn]));
            // S^z_i S^z_i* expands into four joint occupations.
            let ss = 0.25
                * (ev.joint_occupation(up, star_up) - ev.joint_occupation(up, star_dn)
                    - ev.joint_occupation(dn, star_up)
                    + ev.joint_occupation(dn, star_dn));
            szsz_row.push(ss);
        }
        density.push(dens_row);
        sz.push(sz_row);
        szsz.push(szsz_row);
    }
    let charge = charge_tracer(&density, &times, i_star).unwrap();
    let spin = spin_tracer(&sz, &szsz, &times, i_star).unwrap();
    (charge, spin)
}

#[test]
fn charge_tracer_sums_to_zero_by_particle_conservation() {
    let (charge, _) = quench_fields(9, 4.0, 1.5, 0.25);
    for t in 0..charge.n_times() {
        let total: f64 = (0..charge.n_sites()).map(|s| charge.values[s][t]).sum();
        assert!(total.abs() < 1e-9, "t index {t}: total {total}");
    }
}

#[test]
fn spin_correlator_support_spreads_outward() {
    let (_, spin) = quench_fields(9, 8.0, 2.0, 0.25);
    let i_star = 4usize;
    // The site carrying the largest |C^s| (away from the vacancy itself)
    // moves outward monotonically at early times, i.e. before the first
    // oscillation revival (t <= 1.3 at U = 8).
    let mut last = 0.0f64;
    for t in 1..spin.n_times() {
        if spin.times[t] > 1.3 {
            break;
        }
        let dist_of_max = (0..spin.n_sites())
            .filter(|&s| s != i_star)
            .max_by(|&a, &b| {
                spin.values[a][t]
                    .abs()
                    .partial_cmp(&spin.values[b][t].abs())
                    .unwrap()
            })
            .map(|s| (s as f64 - i_star as f64).abs())
            .unwrap();
        assert!(
            dist_of_max >= last - 1e-9,
            "peak moved inward at t index {t}: {dist_of_max} < {last}"
        );
        last = dist_of_max;
    }
    assert!(last >= 2.0, "peak never left the vacancy region");
    // The vacancy-site value is a variance: 4 Var(S^z) >= 0.
    for t in 0..spin.n_times() {
        assert!(spin.values[i_star][t] > -1e-10);
    }
}

#[test]
fn free_charge_front_is_ballistic_at_roughly_two() {
    // U = 0: the charge front travels at the maximal group velocity 2 t_h.
    // Nine sites leave a short ballistic window, so this is a coarse sanity
    // band; the acceptance suite runs the tight +-20% check at L = 11.
    let (charge, _) = quench_fields(9, 0.0, 2.4, 0.1);
    let fit = extract_velocity(&charge, 1.0, 0.3, true, 7).unwrap();
    assert!(
        fit.velocity > 1.2 && fit.velocity < 3.2,
        "charge velocity {} implausible for v = 2 ballistic spreading",
        fit.velocity
    );
}
