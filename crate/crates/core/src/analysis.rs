//! Tracer correlators, wavefront detection, Theil-Sen velocity extraction,
//! and the occupation RMSE metric.
//!
//! The charge tracer is the per-site density change
//! `C^c_i(t) = <n_i(t)> - <n_i(0)>`; the spin tracer is the connected
//! correlator `C^s_i(t) = 4(<S^z_i S^z_i*> - <S^z_i><S^z_i*>)` against the
//! vacancy site. Wavefront detection smooths `|C_i(t)|` with a truncated
//! Gaussian, walks outward from the vacancy past the directional peak on
//! each side, and linearly interpolates the fractional site where the
//! signal drops below `p` times the instantaneous maximum.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which excitation species a tracer field follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TracerKind {
    Charge,
    Spin,
}

/// Site-by-time matrix of a tracer correlator.
#[derive(Debug, Clone)]
pub struct TracerField {
    pub kind: TracerKind,
    /// `values[site][time_index]`.
    pub values: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub vacancy: usize,
}

impl TracerField {
    pub fn n_sites(&self) -> usize {
        self.values.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    fn column(&self, t: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[t]).collect()
    }

    /// CSV matrix dump: header `site,t0,t1,...`, one row per site.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("site");
        for t in &self.times {
            out.push_str(&format!(",{t:.6}"));
        }
        out.push('\n');
        for (site, row) in self.values.iter().enumerate() {
            out.push_str(&site.to_string());
            for v in row {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Gnuplot-compatible grid: `time site value` triplets with a blank
    /// line between time blocks (`splot ... nonuniform`-ready).
    pub fn to_gnuplot_grid(&self) -> String {
        let mut out = String::new();
        for (t_idx, t) in self.times.iter().enumerate() {
            for (site, row) in self.values.iter().enumerate() {
                out.push_str(&format!("{t:.6} {site} {:.12e}\n", row[t_idx]));
            }
            out.push('\n');
        }
        out
    }
}

/// Charge tracer from a per-time, per-site density history
/// (`density[time][site]` = `n_up + n_down`).
pub fn charge_tracer(density: &[Vec<f64>], times: &[f64], vacancy: usize) -> Result<TracerField> {
    if density.len() != times.len() || density.is_empty() {
        return Err(Error::ShapeMismatch(
            "density history does not match times".to_string(),
        ));
    }
    let l = density[0].len();
    if density.iter().any(|row| row.len() != l) || vacancy >= l {
        return Err(Error::ShapeMismatch("ragged density history".to_string()));
    }
    let values = (0..l)
        .map(|site| {
            density
                .iter()
                .map(|row| row[site] - density[0][site])
                .collect()
        })
        .collect();
    Ok(TracerField {
        kind: TracerKind::Charge,
        values,
        times: times.to_vec(),
        vacancy,
    })
}

/// Spin tracer from `<S^z_i>` and `<S^z_i S^z_i*>` histories
/// (`sz[time][site]`, `szsz_star[time][site]`).
pub fn spin_tracer(
    sz: &[Vec<f64>],
    szsz_star: &[Vec<f64>],
    times: &[f64],
    vacancy: usize,
) -> Result<TracerField> {
    if sz.len() != times.len() || szsz_star.len() != times.len() || sz.is_empty() {
        return Err(Error::ShapeMismatch(
            "spin histories do not match times".to_string(),
        ));
    }
    let l = sz[0].len();
    if vacancy >= l {
        return Err(Error::ShapeMismatch("vacancy out of range".to_string()));
    }
    let values = (0..l)
        .map(|site| {
            (0..times.len())
                .map(|t| 4.0 * (szsz_star[t][site] - sz[t][site] * sz[t][vacancy]))
                .collect()
        })
        .collect();
    Ok(TracerField {
        kind: TracerKind::Spin,
        values,
        times: times.to_vec(),
        vacancy,
    })
}

/// Gaussian smoothing with a kernel truncated at 4 sigma, renormalized,
/// with mirror boundaries. `sigma = 0` returns the input unchanged.
pub fn gaussian_smooth(values: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || values.len() < 2 {
        return values.to_vec();
    }
    let half = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k as f64) * (k as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                let mut idx = i + (j as isize - half);
                // Mirror reflection without repeating the edge sample.
                while idx < 0 || idx >= n {
                    if idx < 0 {
                        idx = -idx;
                    }
                    if idx >= n {
                        idx = 2 * (n - 1) - idx;
                    }
                }
                acc += w * values[idx as usize];
            }
            acc / norm
        })
        .collect()
}

/// Detected wavefront positions per time step.
#[derive(Debug, Clone)]
pub struct WavefrontTrace {
    pub times: Vec<f64>,
    /// Fractional site of the left crossing, if found.
    pub left: Vec<Option<f64>>,
    pub right: Vec<Option<f64>>,
    /// Mean distance from the vacancy over the valid sides.
    pub distance: Vec<Option<f64>>,
}

/// Wavefront extraction: per time step, smooth `|C_i(t)|`, walk outward
/// from the vacancy past the directional peak on each side, and find the
/// fractional crossing below `p` times the instantaneous peak.
///
/// The peak reference is directional and excludes the vacancy column
/// itself: the static signal sitting on the vacancy site (the growing
/// on-site density or spin variance) would otherwise dominate the
/// threshold on short chains and pin the contour to the centre.
pub fn detect_wavefront(field: &TracerField, sigma: f64, p: f64) -> Result<WavefrontTrace> {
    if field.n_times() == 0 || field.n_sites() == 0 {
        return Err(Error::invalid("empty tracer field"));
    }
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(Error::invalid("threshold fraction must be in (0, 1)"));
    }
    let i_star = field.vacancy;
    let l = field.n_sites();
    let mut left = Vec::with_capacity(field.n_times());
    let mut right = Vec::with_capacity(field.n_times());
    let mut distance = Vec::with_capacity(field.n_times());
    for t in 0..field.n_times() {
        let col: Vec<f64> = field.column(t).iter().map(|v| v.abs()).collect();
        let smooth = gaussian_smooth(&col, sigma);
        let max_all = smooth.iter().cloned().fold(0.0f64, f64::max);
        if max_all < 1e-12 {
            left.push(None);
            right.push(None);
            distance.push(None);
            continue;
        }
        let cross_left = side_crossing(&smooth, i_star, -1, p);
        let cross_right = side_crossing(&smooth, i_star, 1, p);
        let l_dist = cross_left.map(|x| i_star as f64 - x);
        let r_dist = cross_right.map(|x| x - i_star as f64);
        let d = match (l_dist, r_dist) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        };
        left.push(cross_left);
        right.push(cross_right);
        distance.push(d);
        debug_assert!(l < 1 << 20);
    }
    Ok(WavefrontTrace {
        times: field.times.clone(),
        left,
        right,
        distance,
    })
}

/// Walk outward from `i_star` in `dir`, pass the directional maximum
/// (excluding the vacancy site), then find the fractional position where
/// the signal first drops below `p` times that maximum.
fn side_crossing(smooth: &[f64], i_star: usize, dir: isize, p: f64) -> Option<f64> {
    let n = smooth.len() as isize;
    let mut peak = i_star as isize + dir;
    if peak < 0 || peak >= n {
        return None;
    }
    let mut peak_val = smooth[peak as usize];
    let mut i = peak + dir;
    while i >= 0 && i < n {
        if smooth[i as usize] > peak_val {
            peak_val = smooth[i as usize];
            peak = i;
        }
        i += dir;
    }
    if peak_val < 1e-12 {
        return None; // no signal on this side
    }
    let tau = p * peak_val;
    let mut i = peak;
    loop {
        let next = i + dir;
        if next < 0 || next >= n {
            return None; // front ran off the chain
        }
        let a = smooth[i as usize];
        let b = smooth[next as usize];
        if b < tau && a >= tau {
            let frac = if (a - b).abs() < 1e-300 {
                0.0
            } else {
                (a - tau) / (a - b)
            };
            return Some(i as f64 + dir as f64 * frac);
        }
        i = next;
    }
}

/// Theil-Sen fit with a bootstrap confidence interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VelocityFit {
    pub velocity: f64,
    /// One bootstrap standard deviation (2000 resamples).
    pub ci: f64,
    pub n_points: usize,
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn theil_sen_slope(times: &[f64], xs: &[f64], zero_intercept: bool) -> Option<f64> {
    if zero_intercept {
        let slopes: Vec<f64> = times
            .iter()
            .zip(xs)
            .filter(|(&t, _)| t > 0.0)
            .map(|(&t, &x)| x / t)
            .collect();
        if slopes.is_empty() {
            return None;
        }
        Some(median_of(slopes))
    } else {
        let mut slopes = Vec::new();
        for i in 0..times.len() {
            for j in i + 1..times.len() {
                if (times[j] - times[i]).abs() > 1e-12 {
                    slopes.push((xs[j] - xs[i]) / (times[j] - times[i]));
                }
            }
        }
        if slopes.is_empty() {
            return None;
        }
        Some(median_of(slopes))
    }
}

/// Median-of-slopes regression of positions against times.
///
/// `zero_intercept` switches to the median of `x_i / t_i` over `t_i > 0`
/// (used for the charge front, which starts at the vacancy).
pub fn theil_sen(
    times: &[f64],
    positions: &[f64],
    zero_intercept: bool,
    n_bootstrap: usize,
    seed: u64,
) -> Result<VelocityFit> {
    if times.len() != positions.len() {
        return Err(Error::ShapeMismatch(
            "times and positions differ in length".to_string(),
        ));
    }
    if times.len() < 2 {
        return Err(Error::invalid("Theil-Sen needs at least 2 points"));
    }
    let slope = theil_sen_slope(times, positions, zero_intercept)
        .ok_or_else(|| Error::invalid("no valid slope pairs"))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut resampled = Vec::with_capacity(n_bootstrap);
    let n = times.len();
    for _ in 0..n_bootstrap {
        let mut ts = Vec::with_capacity(n);
        let mut ps = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.random_range(0..n);
            ts.push(times[k]);
            ps.push(positions[k]);
        }
        if let Some(s) = theil_sen_slope(&ts, &ps, zero_intercept) {
            resampled.push(s);
        }
    }
    let ci = if resampled.len() > 1 {
        let mean = resampled.iter().sum::<f64>() / resampled.len() as f64;
        (resampled.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
            / (resampled.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok(VelocityFit {
        velocity: slope,
        ci,
        n_points: times.len(),
    })
}

/// Ballistic-window velocity extraction.
///
/// The fit starts after the initial transient: at least the first 10% of
/// times are dropped, and if the detected distance overshoots and falls
/// back by more than half a site within the first half of the run (the
/// localized initial disturbance racing ahead of the ballistic front), the
/// window starts at the subsequent minimum instead. The window ends when
/// the front leaves the chain: an invalid detection or a distance within
/// one site of the boundary; later times are reflection-contaminated.
pub fn extract_velocity(
    field: &TracerField,
    sigma: f64,
    p: f64,
    zero_intercept: bool,
    seed: u64,
) -> Result<VelocityFit> {
    let trace = detect_wavefront(field, sigma, p)?;
    let l = field.n_sites();
    let max_dist = (field.vacancy.min(l - 1 - field.vacancy) as f64 - 1.0).max(1.0);
    let mut start = field.n_times() / 10;
    // Transient overshoot: first local maximum followed by a decline of
    // more than 0.5 site, inside the first half of the run.
    let half = field.n_times() / 2;
    let d_at = |k: usize| trace.distance.get(k).copied().flatten();
    'scan: for m in 0..half {
        if let (Some(dm), Some(dn)) = (d_at(m), d_at(m + 1)) {
            if dn < dm {
                let mut q = m + 1;
                let mut dq = dn;
                while let Some(next) = d_at(q + 1) {
                    if next >= dq {
                        break;
                    }
                    q += 1;
                    dq = next;
                }
                if dm - dq > 0.5 {
                    start = start.max(q);
                }
                break 'scan;
            }
        }
    }
    let mut times = Vec::new();
    let mut dists = Vec::new();
    for (k, d) in trace.distance.iter().enumerate().skip(start) {
        match d {
            Some(d) => {
                if *d > max_dist {
                    break;
                }
                times.push(trace.times[k]);
                dists.push(*d);
            }
            None => break,
        }
    }
    theil_sen(&times, &dists, zero_intercept, 2000, seed)
}

/// Exact-oracle vacancy quench producing both tracer fields: a Neel state
/// with the central site emptied evolves under `exp(-i H t)`, recording the
/// site densities and the spin-spin correlations against the vacancy.
pub fn exact_quench_fields(
    l: usize,
    u: f64,
    dt: f64,
    n_steps: usize,
) -> Result<(TracerField, TracerField)> {
    use crate::model::{mode_index, neel_state, HubbardParams, Spin};
    let params = HubbardParams::new(l, 1.0, u, 0.0)?;
    let i_star = l / 2;
    let state = neel_state(l, Some(i_star))?;
    let mut ev = crate::statevector::ExactEvolver::new_auto(&params, &state)?;
    let pairs: Vec<(usize, usize)> = (0..l)
        .map(|site| {
            (
                mode_index(site, Spin::Up, l).unwrap(),
                mode_index(site, Spin::Down, l).unwrap(),
            )
        })
        .collect();
    let star = pairs[i_star];
    let mut times = Vec::new();
    let mut density = Vec::new();
    let mut sz = Vec::new();
    let mut szsz = Vec::new();
    for k in 0..=n_steps {
        if k > 0 {
            ev.advance(dt)?;
        }
        times.push(k as f64 * dt);
        let occ = ev.occupations();
        let mut d_row = Vec::with_capacity(l);
        let mut s_row = Vec::with_capacity(l);
        let mut ss_row = Vec::with_capacity(l);
        for &(up, dn) in &pairs {
            d_row.push(occ[up] + occ[dn]);
            s_row.push(0.5 * (occ[up] - occ[dn]));
            ss_row.push(
                0.25 * (ev.joint_occupation(up, star.0) - ev.joint_occupation(up, star.1)
                    - ev.joint_occupation(dn, star.0)
                    + ev.joint_occupation(dn, star.1)),
            );
        }
        density.push(d_row);
        sz.push(s_row);
        szsz.push(ss_row);
    }
    Ok((
        charge_tracer(&density, &times, i_star)?,
        spin_tracer(&sz, &szsz, &times, i_star)?,
    ))
}

/// Root-mean-square difference of two aligned series.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(
            "series differ in length".to_string(),
        ));
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}
