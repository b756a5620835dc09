//! Gray-coded multi-user PAM, receiver chains and bit-error-rate counting.
//!
//! The bits of all `M` users are stacked into one `2^(MB)`-point PAM
//! symbol. Users and bits are zero-based here: user `m` bit `b` occupies
//! transmitted bit position `c = (M-1-m)*B + (B-1-b) + 1`, so user 0 holds
//! the most significant (coarsest) bits and the last user the finest ones.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{check_len, Error, Result};

/// Default smoothing constant of the folding function.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Multi-user PAM configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    /// Number of users `M`.
    pub users: usize,
    /// Bits per user per symbol `B`.
    pub bits: usize,
    /// Smoothing constant of `f(x) = 2 sqrt(x^2 + eps^2) - 1`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl ModulationSpec {
    pub fn new(users: usize, bits: usize) -> Result<Self> {
        let spec = Self {
            users,
            bits,
            epsilon: DEFAULT_EPSILON,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.bits == 0 {
            return Err(Error::Config("need at least one user and one bit".into()));
        }
        if self.users * self.bits > 16 {
            return Err(Error::Config(format!(
                "{} users x {} bits exceeds the 16-bit constellation limit",
                self.users, self.bits
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(
                "epsilon must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Total bits per symbol, `M * B`.
    pub fn total_bits(&self) -> usize {
        self.users * self.bits
    }

    /// Constellation size `2^(MB)`.
    pub fn levels(&self) -> usize {
        1 << self.total_bits()
    }

    /// Amplitude of symbol index `a`: `(2a - L + 1) / (L - 1)`.
    pub fn symbol_value(&self, a: usize) -> f64 {
        let l = self.levels() as f64;
        (2.0 * a as f64 - l + 1.0) / (l - 1.0)
    }

    pub fn constellation(&self) -> Vec<f64> {
        (0..self.levels()).map(|a| self.symbol_value(a)).collect()
    }

    /// Transmitted bit position (1-based) of user `m`, bit `b`.
    pub fn bit_position(&self, m: usize, b: usize) -> usize {
        (self.users - 1 - m) * self.bits + (self.bits - 1 - b) + 1
    }

    /// Bits carried by symbol `a`, ordered user by user.
    pub fn symbol_bits(&self, a: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total_bits());
        for m in 0..self.users {
            for b in 0..self.bits {
                out.push(bit_of_symbol(a, self.bit_position(m, b)));
            }
        }
        out
    }

    /// Symbol index carrying `bits` (ordered user by user).
    pub fn symbol_index(&self, bits: &[u8]) -> usize {
        let mut gray = 0usize;
        for m in 0..self.users {
            for b in 0..self.bits {
                if bits[m * self.bits + b] != 0 {
                    gray |= 1 << (self.bit_position(m, b) - 1);
                }
            }
        }
        let mut a = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            a ^= shift;
            shift >>= 1;
        }
        a
    }

    /// Output-processing prefactor `(L - 1) / L`.
    pub fn prefactor(&self) -> f64 {
        let l = self.levels() as f64;
        (l - 1.0) / l
    }

    /// Number of folds applied for user `m`, bit `b`.
    ///
    /// Bit 0 of a user is its most significant bit, so it is sliced after
    /// folding away the `m * B` coarser bits of the users before it.
    pub fn folds(&self, m: usize, b: usize, kind: ReceiverKind) -> usize {
        match kind {
            ReceiverKind::Standard => m * self.bits + b,
            ReceiverKind::LowComplexity => b,
        }
    }
}

/// Gray-code bit `c` (1-based) of symbol index `a`: `floor((a + 2^(c-1)) / 2^c) mod 2`.
pub fn bit_of_symbol(a: usize, c: usize) -> u8 {
    debug_assert!(c >= 1);
    (((a + (1 << (c - 1))) >> c) & 1) as u8
}

/// PAM amplitude for one row of user bits.
pub fn modulate(bits: &[u8], spec: &ModulationSpec) -> f64 {
    spec.symbol_value(spec.symbol_index(bits))
}

/// Mean symbol power over a uniform constellation, by enumeration.
pub fn symbol_power(spec: &ModulationSpec) -> f64 {
    let pts = spec.constellation();
    pts.iter().map(|s| s * s).sum::<f64>() / pts.len() as f64
}

/// Receiver flavour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    /// User `m` runs an `mB`-PAM receiver.
    Standard,
    /// Every user runs a `B`-PAM receiver.
    LowComplexity,
}

impl std::fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReceiverKind::Standard => write!(f, "standard"),
            ReceiverKind::LowComplexity => write!(f, "low_complexity"),
        }
    }
}

/// Receiver scaling `w * r + b`.
#[inline]
pub fn scale(r: f64, w: f64, b: f64) -> f64 {
    w * r + b
}

#[inline]
pub fn fold(x: f64, epsilon: f64) -> f64 {
    2.0 * (x * x + epsilon * epsilon).sqrt() - 1.0
}

#[inline]
pub fn fold_derivative(x: f64, epsilon: f64) -> f64 {
    let den = (x * x + epsilon * epsilon).sqrt();
    if den == 0.0 {
        0.0
    } else {
        2.0 * x / den
    }
}

/// `z`-fold composition of [`fold`]; zero folds is the identity.
pub fn f_chain(x: f64, z: usize, epsilon: f64) -> f64 {
    (0..z).fold(x, |acc, _| fold(acc, epsilon))
}

/// Soft value for user `m`, bit `b` from the scaled output `rbar`.
pub fn process_output(
    rbar: f64,
    m: usize,
    b: usize,
    spec: &ModulationSpec,
    kind: ReceiverKind,
) -> f64 {
    f_chain(
        -spec.prefactor() * rbar,
        spec.folds(m, b, kind),
        spec.epsilon,
    )
}

/// Hard decision: 1 when the soft value is negative, 0 otherwise (ties decide 0).
#[inline]
pub fn decide(q: f64) -> u8 {
    u8::from(q < 0.0)
}

/// Decisions of all bits of user `m` from its received value.
pub fn detect(
    r: f64,
    rx_scale: f64,
    rx_bias: f64,
    m: usize,
    spec: &ModulationSpec,
    kind: ReceiverKind,
) -> Vec<u8> {
    let rbar = scale(r, rx_scale, rx_bias);
    (0..spec.bits)
        .map(|b| decide(process_output(rbar, m, b, spec, kind)))
        .collect()
}

/// User bits over a batch, row-major: row `k` is `[u_{0,0}, .., u_{0,B-1}, u_{1,0}, ..]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitFrame {
    pub users: usize,
    pub bits: usize,
    data: Vec<u8>,
}

impl BitFrame {
    pub fn new(spec: &ModulationSpec, data: Vec<u8>) -> Result<Self> {
        let width = spec.total_bits();
        if !data.len().is_multiple_of(width) {
            return Err(Error::InvalidInput(
                "bit frame is not a whole number of rows".into(),
            ));
        }
        if data.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput(
                "bit frame entries must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            users: spec.users,
            bits: spec.bits,
            data,
        })
    }

    pub fn random<R: Rng + ?Sized>(spec: &ModulationSpec, len: usize, rng: &mut R) -> Self {
        let data = (0..len * spec.total_bits())
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        Self {
            users: spec.users,
            bits: spec.bits,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.users * self.bits
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, k: usize) -> &[u8] {
        &self.data[k * self.width()..(k + 1) * self.width()]
    }

    pub fn get(&self, k: usize, m: usize, b: usize) -> u8 {
        self.data[k * self.width() + m * self.bits + b]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Modulated symbol of every row.
    pub fn symbols(&self, spec: &ModulationSpec) -> Vec<f64> {
        (0..self.len())
            .map(|k| modulate(self.row(k), spec))
            .collect()
    }
}

/// An empirical error rate with a two-sided 95% Clopper-Pearson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateEstimate {
    pub fn new(errors: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = clopper_pearson(errors, trials, 0.95);
        Self {
            errors,
            trials,
            rate: if trials == 0 {
                f64::NAN
            } else {
                errors as f64 / trials as f64
            },
            ci_low,
            ci_high,
        }
    }
}

/// Exact binomial confidence interval at confidence level `level`.
pub fn clopper_pearson(errors: u64, trials: u64, level: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - level;
    let k = errors as f64;
    let n = trials as f64;
    let low = if errors == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .map(|b| b.inverse_cdf(alpha / 2.0))
            .unwrap_or(0.0)
    };
    let high = if errors >= trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .map(|b| b.inverse_cdf(1.0 - alpha / 2.0))
            .unwrap_or(1.0)
    };
    (low, high)
}

/// Per-bit error counters; merging is exact, so parallel reductions are
/// order independent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorCounts {
    pub users: usize,
    pub bits: usize,
    pub errors: Vec<u64>,
    pub trials: u64,
}

impl ErrorCounts {
    pub fn new(spec: &ModulationSpec) -> Self {
        Self {
            users: spec.users,
            bits: spec.bits,
            errors: vec![0; spec.total_bits()],
            trials: 0,
        }
    }

    /// Records one time step of decisions against the truth.
    pub fn record(&mut self, decided: &[u8], truth: &[u8]) {
        for (e, (d, t)) in self.errors.iter_mut().zip(decided.iter().zip(truth)) {
            *e += u64::from(d != t);
        }
        self.trials += 1;
    }

    pub fn merge(&mut self, other: &ErrorCounts) {
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
        self.trials += other.trials;
    }

    pub fn report(&self) -> Result<BerReport> {
        if self.trials == 0 {
            return Err(Error::InvalidInput(
                "BER needs at least one time step".into(),
            ));
        }
        let per_bit: Vec<RateEstimate> = self
            .errors
            .iter()
            .map(|&e| RateEstimate::new(e, self.trials))
            .collect();
        let worst_index = per_bit
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.errors.cmp(&b.1.errors).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        Ok(BerReport {
            users: self.users,
            bits: self.bits,
            worst: per_bit[worst_index],
            worst_index,
            per_bit,
        })
    }
}

/// Per-(user, bit) error rates and the worst one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub users: usize,
    pub bits: usize,
    /// Indexed `m * bits + b`.
    pub per_bit: Vec<RateEstimate>,
    pub worst: RateEstimate,
    pub worst_index: usize,
}

impl BerReport {
    pub fn rate(&self, m: usize, b: usize) -> f64 {
        self.per_bit[m * self.bits + b].rate
    }

    /// Worst bit rate of user `m`.
    pub fn user_rate(&self, m: usize) -> f64 {
        (0..self.bits).map(|b| self.rate(m, b)).fold(0.0, f64::max)
    }
}

/// Empirical BER of `decisions` against `truth`.
pub fn ber(decisions: &BitFrame, truth: &BitFrame) -> Result<BerReport> {
    check_len("bit frame width", truth.width(), decisions.width())?;
    check_len("bit frame length", truth.len(), decisions.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidInput(
            "BER needs at least one time step".into(),
        ));
    }
    let mut counts = ErrorCounts {
        users: truth.users,
        bits: truth.bits,
        errors: vec![0; truth.width()],
        trials: 0,
    };
    for k in 0..truth.len() {
        counts.record(decisions.row(k), truth.row(k));
    }
    counts.report()
}

/// Standard normal upper tail.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Error probability of user `m`, bit `b` when the scaled output is the
/// transmitted symbol plus Gaussian noise of standard deviation `noise_std`,
/// using the ideal midpoint slicer the standard receiver implements.
pub fn pam_bit_error_probability(spec: &ModulationSpec, m: usize, b: usize, noise_std: f64) -> f64 {
    let c = spec.bit_position(m, b);
    let levels = spec.levels();
    let pts = spec.constellation();
    // Decision regions: boundaries sit halfway between neighbours whose bit differs.
    let mut edges = vec![f64::NEG_INFINITY];
    let mut region_bits = vec![bit_of_symbol(0, c)];
    for a in 0..levels - 1 {
        if bit_of_symbol(a, c) != bit_of_symbol(a + 1, c) {
            edges.push(0.5 * (pts[a] + pts[a + 1]));
            region_bits.push(bit_of_symbol(a + 1, c));
        }
    }
    edges.push(f64::INFINITY);
    let mass = |lo: f64, hi: f64, centre: f64| -> f64 {
        if noise_std == 0.0 {
            return f64::from(u8::from(lo < centre && centre <= hi));
        }
        let upper = |x: f64| {
            if x == f64::INFINITY {
                0.0
            } else if x == f64::NEG_INFINITY {
                1.0
            } else {
                q_function((x - centre) / noise_std)
            }
        };
        (upper(lo) - upper(hi)).max(0.0)
    };
    let mut total = 0.0;
    for (a, &s) in pts.iter().enumerate() {
        let truth = bit_of_symbol(a, c);
        for (r, &bit) in region_bits.iter().enumerate() {
            if bit != truth {
                total += mass(edges[r], edges[r + 1], s);
            }
        }
    }
    total / levels as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Reflected gray code built by mirroring, independent of the XOR formula.
    fn reflected_gray(bits: usize) -> Vec<usize> {
        let mut codes = vec![0usize];
        for i in 0..bits {
            let mirrored: Vec<usize> = codes.iter().rev().map(|c| c | (1 << i)).collect();
            codes.extend(mirrored);
        }
        codes
    }

    #[test]
    fn table_one_constellation() {
        let spec = ModulationSpec::new(2, 1).unwrap();
        assert_abs_diff_eq!(modulate(&[0, 0], &spec), -1.0);
        assert_abs_diff_eq!(modulate(&[0, 1], &spec), -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(modulate(&[1, 1], &spec), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(modulate(&[1, 0], &spec), 1.0);
    }

    #[test]
    fn bpsk_constellation() {
        let spec = ModulationSpec::new(1, 1).unwrap();
        assert_eq!(modulate(&[0], &spec), -1.0);
        assert_eq!(modulate(&[1], &spec), 1.0);
    }

    #[test]
    fn bit_of_symbol_examples() {
        for c in 1..=6 {
            assert_eq!(bit_of_symbol(0, c), 0);
        }
        assert_eq!(bit_of_symbol(1, 1), 1);
        assert_eq!(bit_of_symbol(1, 2), 0);
    }

    #[test]
    fn bit_of_symbol_matches_reflected_gray_code() {
        for total in 1..=4 {
            let codes = reflected_gray(total);
            for (a, code) in codes.iter().enumerate() {
                for c in 1..=total {
                    assert_eq!(
                        bit_of_symbol(a, c) as usize,
                        (code >> (c - 1)) & 1,
                        "a={a} c={c}"
                    );
                }
            }
        }
    }

    #[test]
    fn four_users_bits_are_bijective_and_gray() {
        let spec = ModulationSpec::new(2, 2).unwrap();
        let mut seen = std::collections::HashSet::new();
        for a in 0..spec.levels() {
            let bits = spec.symbol_bits(a);
            assert_eq!(spec.symbol_index(&bits), a);
            assert!(seen.insert(bits.clone()));
            if a + 1 < spec.levels() {
                let next = spec.symbol_bits(a + 1);
                let diff = bits.iter().zip(&next).filter(|(x, y)| x != y).count();
                assert_eq!(diff, 1);
            }
        }
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn validation_limits() {
        assert!(ModulationSpec::new(0, 1).is_err());
        assert!(ModulationSpec::new(4, 5).is_err());
        assert!(ModulationSpec::new(4, 4).is_ok());
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale(1.0, 1.0, 0.0), 1.0);
        assert_abs_diff_eq!(scale(-2.0, 0.5, 0.25), -0.75);
        for x in [-3.0, 0.0, 7.5] {
            assert_eq!(scale(x, 0.0, 0.4), 0.4);
        }
    }

    #[test]
    fn f_chain_examples() {
        for x in [-2.0, 0.1, 5.0] {
            assert_eq!(f_chain(x, 0, 0.01), x);
        }
        assert_abs_diff_eq!(f_chain(0.0, 1, 0.01), -0.98, epsilon = 1e-15);
        assert_abs_diff_eq!(f_chain(0.75, 1, 0.01), 0.50013, epsilon = 1e-5);
    }

    #[test]
    fn process_output_examples() {
        let spec = ModulationSpec::new(2, 1).unwrap();
        let q = process_output(0.4, 0, 0, &spec, ReceiverKind::Standard);
        assert_abs_diff_eq!(q, -0.75 * 0.4, epsilon = 1e-15);
        let q = process_output(-1.0 / 3.0, 1, 0, &spec, ReceiverKind::Standard);
        assert_abs_diff_eq!(q, -0.49960, epsilon = 1e-5);
        assert_eq!(decide(q), 1);
        for m in 0..2 {
            let q = process_output(0.9, m, 0, &spec, ReceiverKind::LowComplexity);
            assert_abs_diff_eq!(q, -0.75 * 0.9, epsilon = 1e-15);
        }
    }

    #[test]
    fn decide_boundary() {
        assert_eq!(decide(-0.5), 1);
        assert_eq!(decide(0.5), 0);
        assert_eq!(decide(0.0), 0);
    }

    #[test]
    fn ber_counting() {
        let spec = ModulationSpec::new(2, 1).unwrap();
        let truth = BitFrame::new(&spec, vec![0; 1200]).unwrap();
        let report = ber(&truth, &truth).unwrap();
        assert!(report.per_bit.iter().all(|r| r.rate == 0.0));

        let mut data = vec![0u8; 1200];
        for k in [0, 10, 20] {
            data[k * 2] = 1;
        }
        let decided = BitFrame::new(&spec, data).unwrap();
        let report = ber(&decided, &truth).unwrap();
        assert_abs_diff_eq!(report.rate(0, 0), 0.005);
        assert_eq!(report.rate(1, 0), 0.0);
        assert_abs_diff_eq!(report.worst.rate, 0.005);
        assert!(report.worst.ci_low < 0.005 && report.worst.ci_high > 0.005);
    }

    #[test]
    fn ber_rejects_empty() {
        let spec = ModulationSpec::new(1, 1).unwrap();
        let empty = BitFrame::new(&spec, vec![]).unwrap();
        assert!(matches!(ber(&empty, &empty), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn clopper_pearson_known_values() {
        // 0 of 10: upper bound 1 - 0.025^(1/10).
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 1.0 - 0.025f64.powf(0.1), epsilon = 1e-9);
        // 5 of 10: symmetric interval (0.187086, 0.812914).
        let (lo, hi) = clopper_pearson(5, 10, 0.95);
        assert_abs_diff_eq!(lo, 0.187086, epsilon = 1e-5);
        assert_abs_diff_eq!(hi, 0.812914, epsilon = 1e-5);
    }

    fn round_trip_failures(users: usize, bits: usize, epsilon: f64) -> usize {
        let spec = ModulationSpec {
            users,
            bits,
            epsilon,
        };
        let mut failures = 0;
        for a in 0..spec.levels() {
            let s = spec.symbol_value(a);
            let expect = spec.symbol_bits(a);
            for m in 0..users {
                let got = detect(s, 1.0, 0.0, m, &spec, ReceiverKind::Standard);
                if got[..] != expect[m * bits..(m + 1) * bits] {
                    failures += 1;
                }
            }
        }
        failures
    }

    #[test]
    fn noiseless_round_trip_standard_receivers() {
        for users in 1..=8 {
            for bits in 1..=8 / users {
                assert_eq!(
                    round_trip_failures(users, bits, 0.0),
                    0,
                    "M={users} B={bits}"
                );
                if users * bits <= 7 {
                    assert_eq!(
                        round_trip_failures(users, bits, DEFAULT_EPSILON),
                        0,
                        "M={users} B={bits}"
                    );
                }
            }
        }
    }

    #[test]
    fn default_smoothing_is_too_coarse_for_256_points() {
        // Half the point spacing at M*B = 8 is 1/256 < epsilon, so the
        // innermost symbols are misread.
        assert!(round_trip_failures(2, 4, DEFAULT_EPSILON) > 0);
    }

    #[test]
    fn symbol_power_matches_closed_form() {
        for total in 1..=8 {
            let spec = ModulationSpec::new(total, 1).unwrap();
            let l = spec.levels() as f64;
            assert_abs_diff_eq!(
                symbol_power(&spec),
                (l + 1.0) / (3.0 * (l - 1.0)),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(
            symbol_power(&ModulationSpec::new(2, 1).unwrap()),
            5.0 / 9.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn analytic_error_probability_limits() {
        let spec = ModulationSpec::new(2, 1).unwrap();
        assert_eq!(pam_bit_error_probability(&spec, 0, 0, 0.0), 0.0);
        // User 0 slices at zero: only the inner points are close.
        let p = pam_bit_error_probability(&spec, 0, 0, 0.1);
        let expect = 0.5 * (q_function(10.0) + q_function(1.0 / 3.0 / 0.1));
        assert_abs_diff_eq!(p, expect, epsilon = 1e-15);
        // Huge noise: coin flip.
        let p = pam_bit_error_probability(&spec, 1, 0, 1e6);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-3);
    }

    proptest! {
        #[test]
        fn constellation_is_odd_symmetric(total in 1usize..=10, a_frac in 0.0f64..1.0) {
            let spec = ModulationSpec::new(total, 1).unwrap();
            let a = ((spec.levels() - 1) as f64 * a_frac) as usize;
            prop_assert!((spec.symbol_value(a) + spec.symbol_value(spec.levels() - 1 - a)).abs() < 1e-12);
        }

        #[test]
        fn fold_is_even_with_bounded_slope(x in -5.0f64..5.0) {
            prop_assert!((fold(x, 0.01) - fold(-x, 0.01)).abs() < 1e-12);
            prop_assert!(fold_derivative(x, 0.01).abs() <= 2.0);
        }

        #[test]
        fn slicer_agrees_with_ideal_away_from_boundaries(users in 1usize..=3, bits in 1usize..=2, x in -1.2f64..1.2) {
            let spec = ModulationSpec::new(users, bits).unwrap();
            let pts = spec.constellation();
            let nearest = (0..spec.levels())
                .min_by(|&a, &b| (pts[a] - x).abs().partial_cmp(&(pts[b] - x).abs()).unwrap())
                .unwrap();
            let step = pts[1] - pts[0];
            for m in 0..users {
                for b in 0..bits {
                    let c = spec.bit_position(m, b);
                    // Distance to the nearest boundary where this bit flips.
                    let mut dist = f64::INFINITY;
                    for a in 0..spec.levels() - 1 {
                        if bit_of_symbol(a, c) != bit_of_symbol(a + 1, c) {
                            dist = dist.min((x - (pts[a] + step / 2.0)).abs());
                        }
                    }
                    prop_assume!(dist > 2.0 * spec.epsilon);
                    let got = decide(process_output(x, m, b, &spec, ReceiverKind::Standard));
                    prop_assert_eq!(got, bit_of_symbol(nearest, c));
                }
            }
        }
    }
}
