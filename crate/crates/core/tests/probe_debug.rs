//! Scratch diagnostics (run with --nocapture); not part of the suite.

use fhsim_core::analysis::{detect_wavefront, theil_sen};
use fhsim_core::model::{mode_index, neel_state, HubbardParams, Spin};
use fhsim_core::statevector::ExactEvolver;

#[test]
#[ignore]
fn probe_charge_front_distances() {
    let l = 11;
    let i_star = l / 2;
    let params = HubbardParams::new(l, 1.0, 0.0, 0.0).unwrap();
    let state = neel_state(l, Some(i_star)).unwrap();
    let mut ev = ExactEvolver::new_auto(&params, &state).unwrap();
    let dt = 0.15;
    let n = 30;
    let mut density = Vec::new();
    let mut times = Vec::new();
    for k in 0..=n {
        if k > 0 {
            ev.advance(dt).unwrap();
        }
        times.push(k as f64 * dt);
        let occ = ev.occupations();
        density.push(
            (0..l)
                .map(|s| {
                    occ[mode_index(s, Spin::Up, l).unwrap()]
                        + occ[mode_index(s, Spin::Down, l).unwrap()]
                })
                .collect::<Vec<f64>>(),
        );
    }
    let field = fhsim_core::analysis::charge_tracer(&density, &times, i_star).unwrap();
    let trace = detect_wavefront(&field, 1.0, 0.3).unwrap();
    for k in 0..=n {
        println!(
            "t={:.2} dist={:?} ratio={:?}",
            times[k],
            trace.distance[k],
            trace.distance[k].map(|d| d / times[k].max(1e-9))
        );
    }
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    for k in 3..=n {
        if let Some(d) = trace.distance[k] {
            if d <= (i_star as f64 - 1.0) {
                ts.push(times[k]);
                xs.push(d);
            }
        }
    }
    let fit = theil_sen(&ts, &xs, true, 500, 1).unwrap();
    let fit_free = theil_sen(&ts, &xs, false, 500, 1).unwrap();
    println!("zero-intercept v = {} ; free v = {}", fit.velocity, fit_free.velocity);
}

#[test]
#[ignore]
fn probe_spin_argmax() {
    let l = 9;
    let i_star = 4;
    let params = HubbardParams::new(l, 1.0, 8.0, 0.0).unwrap();
    let state = neel_state(l, Some(i_star)).unwrap();
    let mut ev = ExactEvolver::new_auto(&params, &state).unwrap();
    let star_up = mode_index(i_star, Spin::Up, l).unwrap();
    let star_dn = mode_index(i_star, Spin::Down, l).unwrap();
    for k in 0..=16 {
        if k > 0 { ev.advance(0.25).unwrap(); }
        let occ = ev.occupations();
        let mut vals = Vec::new();
        for site in 0..l {
            let up = mode_index(site, Spin::Up, l).unwrap();
            let dn = mode_index(site, Spin::Down, l).unwrap();
            let sz_i = 0.5 * (occ[up] - occ[dn]);
            let sz_star = 0.5 * (occ[star_up] - occ[star_dn]);
            let ss = 0.25 * (ev.joint_occupation(up, star_up) - ev.joint_occupation(up, star_dn)
                - ev.joint_occupation(dn, star_up) + ev.joint_occupation(dn, star_dn));
            vals.push(4.0 * (ss - sz_i * sz_star));
        }
        let strs: Vec<String> = vals.iter().map(|v| format!("{v:+.3}")).collect();
        println!("t={:.2}  {}", k as f64 * 0.25, strs.join(" "));
    }
}

#[test]
#[ignore]
fn probe_dt_ratio_u6() {
    use fhsim_core::statevector::trotter_error_scan;
    let l = 10;
    let params = HubbardParams::new(l, 1.0, 6.0, 0.0).unwrap();
    let state = neel_state(l, Some(l / 2)).unwrap();
    let mut aggregates = Vec::new();
    for dt in [0.15f64, 0.20] {
        let scan = trotter_error_scan(&params, &[dt], 30, &state).unwrap();
        let rows = &scan[0].1;
        let mean: f64 = rows[1..].iter().map(|r| r.1).sum::<f64>() / 30.0;
        let maxv = rows[1..].iter().map(|r| r.1).fold(0.0f64, f64::max);
        println!("dt={dt}: mean RMSE {mean:.5}, max {maxv:.5}, final {:.5}", rows[30].1);
        aggregates.push(mean);
    }
    println!("mean ratio = {:.3}", aggregates[1] / aggregates[0]);
}

#[test]
#[ignore]
fn probe_dt_ratio_all_u() {
    use fhsim_core::statevector::trotter_error_scan;
    let l = 10;
    for (u, dt_sel) in [(2.0f64, 0.2f64), (6.0, 0.15), (15.0, 0.10)] {
        let params = HubbardParams::new(l, 1.0, u, 0.0).unwrap();
        let state = neel_state(l, Some(l / 2)).unwrap();
        let mut aggs = Vec::new();
        for dt in [dt_sel, dt_sel + 0.05] {
            let scan = trotter_error_scan(&params, &[dt], 30, &state).unwrap();
            let rows = &scan[0].1;
            let mean: f64 = rows[1..].iter().map(|r| r.1).sum::<f64>() / 30.0;
            aggs.push(mean);
        }
        println!(
            "U={u}: mean RMSE {:.5} (dt={dt_sel}) vs {:.5} (dt={}), ratio {:.2}",
            aggs[0], aggs[1], dt_sel + 0.05, aggs[1] / aggs[0]
        );
    }
}

#[test]
#[ignore]
fn probe_spin_distances_u4_u8() {
    use fhsim_core::analysis::detect_wavefront;
    for (u, dt) in [(4.0f64, 0.2f64), (8.0, 0.15)] {
        let l = 11;
        let i_star = 5;
        let params = HubbardParams::new(l, 1.0, u, 0.0).unwrap();
        let state = neel_state(l, Some(i_star)).unwrap();
        let mut ev = ExactEvolver::new_auto(&params, &state).unwrap();
        let n = (4.5f64 / dt).round() as usize;
        let star_up = mode_index(i_star, Spin::Up, l).unwrap();
        let star_dn = mode_index(i_star, Spin::Down, l).unwrap();
        let mut times = Vec::new();
        let mut sz = Vec::new();
        let mut szsz = Vec::new();
        for k in 0..=n {
            if k > 0 { ev.advance(dt).unwrap(); }
            times.push(k as f64 * dt);
            let occ = ev.occupations();
            let mut s_row = Vec::new();
            let mut ss_row = Vec::new();
            for site in 0..l {
                let up = mode_index(site, Spin::Up, l).unwrap();
                let dn = mode_index(site, Spin::Down, l).unwrap();
                s_row.push(0.5 * (occ[up] - occ[dn]));
                ss_row.push(0.25 * (ev.joint_occupation(up, star_up) - ev.joint_occupation(up, star_dn)
                    - ev.joint_occupation(dn, star_up) + ev.joint_occupation(dn, star_dn)));
            }
            sz.push(s_row);
            szsz.push(ss_row);
        }
        let field = fhsim_core::analysis::spin_tracer(&sz, &szsz, &times, i_star).unwrap();
        let trace = detect_wavefront(&field, 1.0, 0.3).unwrap();
        println!("--- U={u} dt={dt}");
        for k in 0..=n {
            println!("t={:.2} d={:?}", times[k], trace.distance[k].map(|d| (d*100.0).round()/100.0));
        }
    }
}

#[test]
#[ignore]
fn probe_l6_untruncated_ppp() {
    use fhsim_core::ppp::{occupation_trace, PppScheme, TruncationPolicy};
    use fhsim_core::statevector::trotter_occupation_series;
    let l = 6;
    let params = HubbardParams::new(l, 1.0, 2.0, 0.0).unwrap();
    let state = neel_state(l, Some(l / 2)).unwrap();
    let t0 = std::time::Instant::now();
    let series = trotter_occupation_series(&params, &state, 0.2, 30).unwrap();
    println!("statevector series: {:?}", t0.elapsed());
    let t0 = std::time::Instant::now();
    let run = occupation_trace(
        l / 2, Spin::Up, &params, 0.2, 30,
        &TruncationPolicy::disabled(), &state,
        PppScheme::PairInterleavedCircuit,
    ).unwrap();
    println!("ppp untruncated: {:?}", t0.elapsed());
    let q = mode_index(l / 2, Spin::Up, l).unwrap();
    let max_err = run.values.iter().enumerate()
        .map(|(k, v)| (v - series[k][q]).abs())
        .fold(0.0f64, f64::max);
    println!("max |ppp - sv| = {max_err:.2e}");
    println!("final census retained = {}", run.census.last().unwrap().retained);
}
