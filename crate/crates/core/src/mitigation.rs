//! Post-processing stack: readout error mitigation by marginalized
//! confusion-matrix inversion, decay recovery from echo circuits, and
//! particle-number symmetry post-selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::ModePermutation;
use crate::error::{Error, Result};
use crate::model::Spin;
use crate::statevector::{Estimate, ShotTable};

/// Per-qubit 2x2 column-stochastic assignment matrices.
///
/// Entry `[beta][alpha]` of qubit `i` is `p(measure beta | prepared alpha)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionSet {
    pub matrices: Vec<[[f64; 2]; 2]>,
}

impl ConfusionSet {
    pub fn identity(n_qubits: usize) -> Self {
        ConfusionSet {
            matrices: vec![[[1.0, 0.0], [0.0, 1.0]]; n_qubits],
        }
    }

    pub fn from_rates(rates: &[(f64, f64)]) -> Self {
        ConfusionSet {
            matrices: rates
                .iter()
                .map(|&(p10, p01)| [[1.0 - p10, p01], [p10, 1.0 - p01]])
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (q, m) in self.matrices.iter().enumerate() {
            for col in 0..2 {
                let s = m[0][col] + m[1][col];
                if (s - 1.0).abs() > 1e-9 || m[0][col] < -1e-12 || m[1][col] < -1e-12 {
                    return Err(Error::invalid(format!(
                        "confusion matrix on qubit {q} is not column-stochastic"
                    )));
                }
            }
            if self.determinant(q).abs() < 1e-12 {
                return Err(Error::SingularConfusion(q));
            }
        }
        Ok(())
    }

    fn determinant(&self, q: usize) -> f64 {
        let m = &self.matrices[q];
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    fn inverse(&self, q: usize) -> Result<[[f64; 2]; 2]> {
        let det = self.determinant(q);
        if det.abs() < 1e-12 {
            return Err(Error::SingularConfusion(q));
        }
        let m = &self.matrices[q];
        Ok([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ])
    }
}

/// Build per-qubit confusion matrices from the all-zeros and all-ones
/// preparation calibration tables.
pub fn build_confusion(calib_zeros: &ShotTable, calib_ones: &ShotTable) -> Result<ConfusionSet> {
    if calib_zeros.total == 0 || calib_ones.total == 0 {
        return Err(Error::invalid("calibration tables must contain shots"));
    }
    if calib_zeros.width != calib_ones.width {
        return Err(Error::ShapeMismatch(
            "calibration tables differ in width".to_string(),
        ));
    }
    let width = calib_zeros.width;
    let flip_rate = |table: &ShotTable, expect_one: bool| -> Vec<f64> {
        let mut flipped = vec![0u64; width];
        for (&bits, &count) in &table.counts {
            for (q, f) in flipped.iter_mut().enumerate() {
                let bit = bits >> q & 1 == 1;
                if bit != expect_one {
                    *f += count;
                }
            }
        }
        flipped
            .iter()
            .map(|&f| f as f64 / table.total as f64)
            .collect()
    };
    let p10 = flip_rate(calib_zeros, false);
    let p01 = flip_rate(calib_ones, true);
    let set = ConfusionSet::from_rates(&p10.into_iter().zip(p01).collect::<Vec<_>>());
    set.validate()?;
    Ok(set)
}

/// Readout-mitigated expectation value of a Z-string observable.
#[derive(Debug, Clone, Copy)]
pub struct RemEstimate {
    pub estimate: Estimate,
    /// Negative quasi-probability mass clipped after inversion.
    pub clipped_mass: f64,
    pub raw_value: f64,
}

const REM_SUPPORT_CAP: usize = 8;

/// Marginalize to `support`, invert the tensor-product confusion there, and
/// compute the corrected expectation of `Z` on `observable` (a subset of
/// `support`).
pub fn apply_rem(
    shots: &ShotTable,
    support: &[usize],
    confusion: &ConfusionSet,
    observable: &[usize],
) -> Result<RemEstimate> {
    if support.is_empty() || support.len() > REM_SUPPORT_CAP {
        return Err(Error::invalid(format!(
            "REM support must have 1..={REM_SUPPORT_CAP} qubits"
        )));
    }
    if shots.total == 0 {
        return Err(Error::invalid("empty shot table"));
    }
    if confusion.matrices.len() != shots.width {
        return Err(Error::ShapeMismatch(
            "confusion set width does not match shots".to_string(),
        ));
    }
    for q in observable {
        if !support.contains(q) {
            return Err(Error::invalid(
                "observable must be supported on the marginal subset",
            ));
        }
    }
    let k = support.len();
    // Marginal distribution over the support bits.
    let mut p = vec![0.0f64; 1 << k];
    for (&bits, &count) in &shots.counts {
        let mut idx = 0usize;
        for (pos, &q) in support.iter().enumerate() {
            if bits >> q & 1 == 1 {
                idx |= 1 << pos;
            }
        }
        p[idx] += count as f64;
    }
    let total = shots.total as f64;
    for v in &mut p {
        *v /= total;
    }
    let raw_value = z_string_expectation(&p, support, observable);
    // Apply the inverse confusion qubit by qubit.
    for (pos, &q) in support.iter().enumerate() {
        let inv = confusion.inverse(q)?;
        let bit = 1usize << pos;
        for idx in 0..p.len() {
            if idx & bit != 0 {
                continue;
            }
            let p0 = p[idx];
            let p1 = p[idx | bit];
            p[idx] = inv[0][0] * p0 + inv[0][1] * p1;
            p[idx | bit] = inv[1][0] * p0 + inv[1][1] * p1;
        }
    }
    // Clip small negative quasi-probabilities and renormalize.
    let mut clipped = 0.0;
    for v in &mut p {
        if *v < 0.0 {
            clipped += -*v;
            *v = 0.0;
        }
    }
    let norm: f64 = p.iter().sum();
    if norm <= 0.0 {
        return Err(Error::invalid("REM produced an empty distribution"));
    }
    for v in &mut p {
        *v /= norm;
    }
    let value = z_string_expectation(&p, support, observable);
    Ok(RemEstimate {
        estimate: Estimate::z_basis(value, shots.total),
        clipped_mass: clipped,
        raw_value,
    })
}

fn z_string_expectation(p: &[f64], support: &[usize], observable: &[usize]) -> f64 {
    let mut mask = 0usize;
    for (pos, &q) in support.iter().enumerate() {
        if observable.contains(&q) {
            mask |= 1 << pos;
        }
    }
    p.iter()
        .enumerate()
        .map(|(idx, &v)| {
            if (idx & mask).count_ones() % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .sum()
}

/// Readout-mitigated occupation of one mode: `n = (1 - <Z>)/2`.
pub fn rem_occupation(
    shots: &ShotTable,
    qubit: usize,
    confusion: &ConfusionSet,
) -> Result<RemEstimate> {
    let rem = apply_rem(shots, &[qubit], confusion, &[qubit])?;
    Ok(RemEstimate {
        estimate: Estimate {
            value: (1.0 - rem.estimate.value) / 2.0,
            std_err: rem.estimate.std_err / 2.0,
            n_shots: rem.estimate.n_shots,
        },
        clipped_mass: rem.clipped_mass,
        raw_value: (1.0 - rem.raw_value) / 2.0,
    })
}

/// Per-step damping factors extracted from echo circuits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EchoFactors {
    /// `d_n` for `n = 0..=n_steps`.
    pub d: Vec<f64>,
    /// Steps whose value was interpolated (odd steps).
    pub interpolated: Vec<bool>,
    /// Steps skipped because the ideal echo value vanished.
    pub skipped: Vec<bool>,
}

/// Build damping factors from even-step echo measurements.
///
/// `echo_hw_even` holds `(step, value)` pairs at even steps including 0;
/// odd steps interpolate the neighbouring even echo values; `echo_ideal`
/// supplies the noiseless echo expectation per step (constant over steps
/// for an exact-identity echo, but kept general).
pub fn echo_factors(
    echo_hw_even: &[(usize, f64)],
    echo_ideal: &[f64],
    n_steps: usize,
) -> Result<EchoFactors> {
    if echo_ideal.len() != n_steps + 1 {
        return Err(Error::ShapeMismatch(format!(
            "echo_ideal must cover steps 0..={n_steps}"
        )));
    }
    let mut hw: Vec<Option<f64>> = vec![None; n_steps + 1];
    for &(step, value) in echo_hw_even {
        if step % 2 != 0 {
            return Err(Error::invalid("hardware echo values must be at even steps"));
        }
        if step <= n_steps {
            hw[step] = Some(value);
        }
    }
    let mut d = vec![1.0; n_steps + 1];
    let mut interpolated = vec![false; n_steps + 1];
    let mut skipped = vec![false; n_steps + 1];
    for n in 0..=n_steps {
        let hw_n = match hw[n] {
            Some(v) => v,
            None => {
                // Interpolate between adjacent even-step echo values, using
                // one-sided values at the boundary.
                let prev = (0..n).rev().find_map(|k| hw[k]);
                let next = (n + 1..=n_steps).find_map(|k| hw[k]);
                interpolated[n] = true;
                match (prev, next) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    (Some(a), None) => a,
                    (None, Some(b)) => b,
                    (None, None) => {
                        return Err(Error::invalid("no hardware echo values supplied"))
                    }
                }
            }
        };
        if echo_ideal[n].abs() < 1e-12 {
            skipped[n] = true;
            d[n] = 1.0;
        } else {
            d[n] = hw_n / echo_ideal[n];
        }
    }
    Ok(EchoFactors {
        d,
        interpolated,
        skipped,
    })
}

/// Decay recovery: rescale raw expectations by `1 / (c d_n + (1 - c))`.
///
/// `c = 0` returns the raw values; `c = 1` divides by the full damping
/// factor. Steps flagged `skipped` in the factors are left unmitigated.
pub fn decay_recovery(raw: &[f64], factors: &EchoFactors, c: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::invalid(format!("confidence c = {c} outside [0, 1]")));
    }
    if raw.len() > factors.d.len() {
        return Err(Error::ShapeMismatch(
            "raw series longer than echo factors".to_string(),
        ));
    }
    Ok(raw
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            if factors.skipped[n] {
                v
            } else {
                v / (c * factors.d[n] + (1.0 - c))
            }
        })
        .collect())
}

/// Outcome of symmetry post-selection on a shot table.
#[derive(Debug, Clone)]
pub struct PostselectResult {
    pub filtered: ShotTable,
    pub discard_rate: f64,
    /// Histogram of the particle-number violation `k(s)`.
    pub k_histogram: BTreeMap<u32, u64>,
}

impl PostselectResult {
    /// Cumulative distribution of `k` as `(k, fraction of shots with <= k)`.
    pub fn k_cdf(&self) -> Vec<(u32, f64)> {
        let total: u64 = self.k_histogram.values().sum();
        let mut acc = 0u64;
        self.k_histogram
            .iter()
            .map(|(&k, &n)| {
                acc += n;
                (k, acc as f64 / total as f64)
            })
            .collect()
    }
}

/// Keep only shots in the `(N_up, N_down)` sector of the initial state.
///
/// `k(s) = |N_up(s) - N_up0| + |N_down(s) - N_down0|` is computed through
/// the mode labelling `perm` carried by the measured circuit.
pub fn postselect(
    shots: &ShotTable,
    n_up0: usize,
    n_down0: usize,
    perm: &ModePermutation,
) -> Result<PostselectResult> {
    if shots.width != perm.labels.len() {
        return Err(Error::ShapeMismatch(
            "shot width does not match permutation".to_string(),
        ));
    }
    let mut up_mask = 0u64;
    for (q, &(_, spin)) in perm.labels.iter().enumerate() {
        if spin == Spin::Up {
            up_mask |= 1 << q;
        }
    }
    let down_mask = !up_mask & ((1u64 << shots.width) - 1);
    let mut filtered = ShotTable::empty(shots.width);
    let mut k_histogram = BTreeMap::new();
    let mut discarded = 0u64;
    for (&bits, &count) in &shots.counts {
        let n_up = (bits & up_mask).count_ones() as i64;
        let n_down = (bits & down_mask).count_ones() as i64;
        let k = (n_up - n_up0 as i64).unsigned_abs() as u32
            + (n_down - n_down0 as i64).unsigned_abs() as u32;
        *k_histogram.entry(k).or_insert(0) += count;
        if k == 0 {
            filtered.add(bits, count);
        } else {
            discarded += count;
        }
    }
    Ok(PostselectResult {
        filtered,
        discard_rate: discarded as f64 / shots.total as f64,
        k_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::neel_state;

    fn table_of(width: usize, rows: &[(u64, u64)]) -> ShotTable {
        let mut t = ShotTable::empty(width);
        for &(bits, count) in rows {
            t.add(bits, count);
        }
        t
    }

    #[test]
    fn noiseless_calibration_gives_identity_confusion() {
        let zeros = table_of(3, &[(0b000, 500)]);
        let ones = table_of(3, &[(0b111, 500)]);
        let c = build_confusion(&zeros, &ones).unwrap();
        for m in &c.matrices {
            assert!((m[0][0] - 1.0).abs() < 1e-12);
            assert!((m[1][1] - 1.0).abs() < 1e-12);
            assert!(m[1][0].abs() < 1e-12 && m[0][1].abs() < 1e-12);
        }
    }

    #[test]
    fn rem_with_identity_confusion_is_identity() {
        let shots = table_of(2, &[(0b00, 60), (0b01, 40)]);
        let c = ConfusionSet::identity(2);
        let est = apply_rem(&shots, &[0], &c, &[0]).unwrap();
        // <Z0> = 0.6 - 0.4 = 0.2.
        assert!((est.estimate.value - 0.2).abs() < 1e-12);
        assert!(est.clipped_mass.abs() < 1e-12);
    }

    #[test]
    fn rem_inverts_a_symmetric_flip_channel() {
        // Symmetric flip p: raw <Z> = (1-2p) true <Z>. Build the exact
        // flipped distribution analytically and check recovery.
        let p = 0.07;
        let true_p1 = 0.3;
        let flipped_p1 = true_p1 * (1.0 - p) + (1.0 - true_p1) * p;
        let n = 1_000_000u64;
        let ones = (flipped_p1 * n as f64).round() as u64;
        let shots = table_of(1, &[(0, n - ones), (1, ones)]);
        let c = ConfusionSet::from_rates(&[(p, p)]);
        let est = apply_rem(&shots, &[0], &c, &[0]).unwrap();
        let true_z = 1.0 - 2.0 * true_p1;
        assert!(
            (est.estimate.value - true_z).abs() < 1e-5,
            "recovered {} vs {true_z}",
            est.estimate.value
        );
        let raw_z = est.raw_value;
        assert!((raw_z - (1.0 - 2.0 * p) * true_z).abs() < 1e-5);
    }

    #[test]
    fn rem_rejects_singular_and_oversized_inputs() {
        let shots = table_of(1, &[(0, 10)]);
        let singular = ConfusionSet::from_rates(&[(0.5, 0.5)]);
        assert!(matches!(
            apply_rem(&shots, &[0], &singular, &[0]),
            Err(Error::SingularConfusion(_))
        ));
        let wide = table_of(10, &[(0, 10)]);
        let c = ConfusionSet::identity(10);
        let support: Vec<usize> = (0..9).collect();
        assert!(apply_rem(&wide, &support, &c, &[0]).is_err());
    }

    #[test]
    fn paper_range_rates_stay_invertible() {
        let c = ConfusionSet::from_rates(&[(0.0006, 0.0006), (0.097, 0.097), (0.004, 0.004)]);
        c.validate().unwrap();
    }

    #[test]
    fn decay_recovery_formula() {
        // raw 0.4, d = 0.8, c = 0.5 -> 0.4 / 0.9.
        let factors = EchoFactors {
            d: vec![1.0, 0.8],
            interpolated: vec![false, false],
            skipped: vec![false, false],
        };
        let out = decay_recovery(&[0.0, 0.4], &factors, 0.5).unwrap();
        assert!((out[1] - 0.4 / 0.9).abs() < 1e-12);

        // c = 0 is the identity.
        let out = decay_recovery(&[0.0, 0.4], &factors, 0.0).unwrap();
        assert!((out[1] - 0.4).abs() < 1e-15);

        // d = 1 everywhere is the identity for every c.
        let unit = EchoFactors {
            d: vec![1.0; 4],
            interpolated: vec![false; 4],
            skipped: vec![false; 4],
        };
        for c in [0.0, 0.3, 1.0] {
            let out = decay_recovery(&[0.1, -0.2, 0.7, 0.0], &unit, c).unwrap();
            assert_eq!(out, vec![0.1, -0.2, 0.7, 0.0]);
        }

        assert!(decay_recovery(&[0.1], &unit, 1.5).is_err());
    }

    #[test]
    fn echo_factor_interpolation() {
        let hw = [(0usize, 1.0), (2usize, 0.8), (4usize, 0.6)];
        let ideal = vec![1.0; 5];
        let f = echo_factors(&hw, &ideal, 4).unwrap();
        assert!((f.d[1] - 0.9).abs() < 1e-12);
        assert!((f.d[3] - 0.7).abs() < 1e-12);
        assert!(f.interpolated[1] && !f.interpolated[2]);

        // Vanishing ideal echo: step skipped.
        let ideal = vec![1.0, 0.0, 1.0];
        let f = echo_factors(&[(0, 1.0), (2, 0.5)], &ideal, 2).unwrap();
        assert!(f.skipped[1]);
        let out = decay_recovery(&[1.0, 0.7, 0.5], &f, 1.0).unwrap();
        assert!((out[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn postselect_examples() {
        let l = 4;
        let neel = neel_state(l, None).unwrap();
        let perm = ModePermutation::identity(l);
        let neel_bits = neel.basis_index() as u64;
        // The initial bitstring itself has k = 0.
        let shots = table_of(2 * l, &[(neel_bits, 10)]);
        let r = postselect(&shots, 2, 2, &perm).unwrap();
        assert_eq!(r.discard_rate, 0.0);
        assert_eq!(r.filtered.total, 10);

        // One extra up particle: k = 1, discarded.
        let extra_up = neel_bits | (1 << 1); // mode (0, up)
        let shots = table_of(2 * l, &[(neel_bits, 6), (extra_up, 4)]);
        let r = postselect(&shots, 2, 2, &perm).unwrap();
        assert!((r.discard_rate - 0.4).abs() < 1e-12);
        assert_eq!(r.k_histogram.get(&1), Some(&4));
        assert_eq!(r.filtered.total, 6);
        let cdf = r.k_cdf();
        assert_eq!(cdf, vec![(0, 0.6), (1, 1.0)]);

        // Fewer distinct bitstrings after filtering.
        assert!(r.filtered.counts.len() <= shots.counts.len());
    }

    #[test]
    fn postselect_respects_mode_permutation() {
        // With swapped labels, the same bits count spins differently.
        let l = 2;
        let mut perm = ModePermutation::identity(l);
        perm.apply_fswap_layer();
        // Qubit 0 now carries (0, up).
        let shots = table_of(4, &[(0b0001, 5)]);
        let r = postselect(&shots, 1, 0, &perm).unwrap();
        assert_eq!(r.discard_rate, 0.0);
        let r = postselect(&shots, 0, 1, &perm).unwrap();
        assert!((r.discard_rate - 1.0).abs() < 1e-12);
    }
}
