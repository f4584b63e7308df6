//! Standard normal CDF/quantile and the truncated normal distribution.
//!
//! Masses are evaluated on whichever side of the mean keeps the CDF small so
//! that leaves far out in a tail still get accurate, finite log-densities.

use std::f64::consts::SQRT_2;

use rand::Rng;
use serde::{Deserialize, Serialize};
use libm::{erf, erfc};

use crate::serde_ext;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Inverse of the standard normal CDF (Wichura's AS241, about 1e-16 relative).
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&AS241_A, r) / poly(&AS241_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&AS241_C, r) / poly(&AS241_D, r)
    } else {
        let r = r - 5.0;
        poly(&AS241_E, r) / poly(&AS241_F, r)
    };
    if q < 0.0 { -z } else { z }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const AS241_A: [f64; 8] = [
    3.387_132_872_796_366_5,
    133.141_667_891_784_38,
    1_971.590_950_306_551_3,
    13_731.693_765_509_461,
    45_921.953_931_549_87,
    67_265.770_927_008_7,
    33_430.575_583_588_13,
    2_509.080_928_730_122_7,
];
const AS241_B: [f64; 8] = [
    1.0,
    42.313_330_701_600_91,
    687.187_007_492_057_9,
    5_394.196_021_424_751,
    21_213.794_301_586_597,
    39_307.895_800_092_71,
    28_729.085_735_721_943,
    5_226.495_278_852_545,
];
const AS241_C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_545_4,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    0.241_780_725_177_450_6,
    0.022_723_844_989_269_184,
    7.745_450_142_783_414e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    0.689_767_334_985_1,
    0.148_103_976_427_480_08,
    0.015_198_666_563_616_457,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const AS241_E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    0.296_560_571_828_504_9,
    0.026_532_189_526_576_124,
    0.001_242_660_947_388_078_4,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    0.599_832_206_555_888,
    0.136_929_880_922_735_8,
    0.014_875_361_290_850_615,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

/// `ln Phi(x)`, using the asymptotic tail expansion where `Phi` underflows.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > -20.0 {
        return (0.5 * erfc(-x / SQRT_2)).ln();
    }
    let x2 = x * x;
    let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + series.ln()
}

/// `ln P(a < Z < b)` for a standard normal `Z`.
pub fn log_std_normal_mass(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        return log_std_normal_mass(-b, -a);
    }
    if b > 0.0 {
        // Straddles zero: erf terms share a sign, no cancellation.
        return (0.5 * (erf(b / SQRT_2) - erf(a / SQRT_2))).ln();
    }
    if a >= -1.0 {
        return (0.5 * (erf(b / SQRT_2) - erf(a / SQRT_2))).ln();
    }
    let (la, lb) = (log_std_normal_cdf(a), log_std_normal_cdf(b));
    lb + (-(la - lb).exp_m1()).ln()
}

/// Normal distribution with mean `mu` and scale `sigma` restricted to
/// `[lo, hi]`; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncNormal {
    pub mu: f64,
    pub sigma: f64,
    #[serde(with = "serde_ext::lower_bound")]
    pub lo: f64,
    #[serde(with = "serde_ext::upper_bound")]
    pub hi: f64,
}

impl TruncNormal {
    pub fn new(mu: f64, sigma: f64, lo: f64, hi: f64) -> Self {
        debug_assert!(sigma > 0.0 && lo < hi, "invalid truncated normal {mu} {sigma} {lo} {hi}");
        TruncNormal { mu, sigma, lo, hi }
    }

    fn standardized(&self, lo: f64, hi: f64) -> (f64, f64) {
        ((lo - self.mu) / self.sigma, (hi - self.mu) / self.sigma)
    }

    /// `ln` of the untruncated normal mass on `[lo, hi]`.
    fn log_normalizer(&self) -> f64 {
        let (a, b) = self.standardized(self.lo, self.hi);
        log_std_normal_mass(a, b)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(self.lo <= x && x <= self.hi) {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - LN_SQRT_2PI - self.sigma.ln() - self.log_normalizer()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// `ln P(lo' <= X <= hi')` under this distribution.
    pub fn log_mass(&self, lo: f64, hi: f64) -> f64 {
        let (l, h) = (lo.max(self.lo), hi.min(self.hi));
        if l > h {
            return f64::NEG_INFINITY;
        }
        if l == h {
            return if l == self.lo && h == self.hi { 0.0 } else { f64::NEG_INFINITY };
        }
        let (a, b) = self.standardized(l, h);
        log_std_normal_mass(a, b) - self.log_normalizer()
    }

    /// The same normal truncated to the intersection with `[lo, hi]`.
    pub fn restricted(&self, lo: f64, hi: f64) -> Option<TruncNormal> {
        let (l, h) = (lo.max(self.lo), hi.min(self.hi));
        (l < h).then_some(TruncNormal {
            lo: l,
            hi: h,
            ..*self
        })
    }

    /// Inverse-CDF draw; consumes exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Quantile of the truncated distribution at `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = self.standardized(self.lo, self.hi);
        // Work in the lower tail, where Phi keeps full relative precision.
        let (a2, b2, flip) = if a > 0.0 { (-b, -a, true) } else { (a, b, false) };
        let (pa, pb) = (std_normal_cdf(a2), std_normal_cdf(b2));
        let z = if pb > pa {
            std_normal_quantile(pa + u * (pb - pa))
        } else {
            // Far tail where Phi underflows: exponential approximation at b2.
            let rate = -b2;
            let width = b2 - a2;
            let tail = if width.is_finite() { -(-width * rate).exp_m1() } else { 1.0 };
            b2 + (-u * tail).ln_1p() / rate
        };
        let z = if flip { -z } else { z };
        (self.mu + self.sigma * z).clamp(self.lo, self.hi)
    }

    /// Mean of the truncated distribution.
    pub fn mean(&self) -> f64 {
        let (a, b) = self.standardized(self.lo, self.hi);
        let log_z = log_std_normal_mass(a, b);
        let phi = |x: f64| if x.is_infinite() { 0.0 } else { (-0.5 * x * x - LN_SQRT_2PI - log_z).exp() };
        self.mu + self.sigma * (phi(a) - phi(b))
    }
}

/// `ln(sum(exp(x)))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;
    use crate::rng::stream_rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn cdf_and_quantile_agree() {
        for &x in &[-30.0, -8.0, -3.0, -0.5, 0.0, 0.7, 2.5] {
            let p = std_normal_cdf(x);
            assert!((std_normal_quantile(p) - x).abs() < 1e-12 * x.abs().max(1.0), "{x}");
        }
        assert!((std_normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
    }

    #[test]
    fn log_cdf_tail_matches_direct() {
        for &x in &[-19.0, -19.9] {
            let direct = std_normal_cdf(x).ln();
            let x2 = x * x;
            let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
            let asym = -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + series.ln();
            assert!((direct - asym).abs() < 1e-6, "{direct} {asym}");
        }
        assert!(log_std_normal_cdf(-60.0).is_finite());
    }

    #[test]
    fn pdf_integrates_to_one() {
        for tn in [
            TruncNormal::new(0.3, 0.2, 0.0, 1.0),
            TruncNormal::new(5.0, 1.0, -1.0, 0.5),
            TruncNormal::new(0.0, 1.0, 2.0, 3.0),
            TruncNormal::new(-1.0, 0.5, -1.5, 4.0),
        ] {
            let total = simpson(|x| tn.pdf(x), tn.lo, tn.hi, 20_000);
            assert!((total - 1.0).abs() < 1e-8, "{tn:?}: {total}");
        }
    }

    #[test]
    fn huge_sigma_tends_to_uniform() {
        let tn = TruncNormal::new(0.5, 1e6, 0.0, 1.0);
        assert!(tn.log_pdf(0.1).abs() < 1e-9);
        assert!(tn.log_pdf(0.9).abs() < 1e-9);
    }

    #[test]
    fn far_tail_leaf_has_finite_density() {
        let tn = TruncNormal::new(0.0, 1.0, 40.0, 41.0);
        let lp = tn.log_pdf(40.0);
        assert!(lp.is_finite());
        // Almost all mass sits at the lower bound: density there ~ |a| = 40.
        assert!((lp - 40f64.ln()).abs() < 0.01, "{lp}");
        let x = tn.quantile(0.5);
        assert!((40.0..=41.0).contains(&x));
    }

    #[test]
    fn samples_stay_in_bounds_and_match_mean() {
        let tn = TruncNormal::new(1.0, 2.0, -0.5, 2.0);
        let mut rng = stream_rng(9, 0, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = tn.sample(&mut rng);
            assert!((tn.lo..=tn.hi).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - tn.mean()).abs() < 0.01);
    }

    #[test]
    fn log_mass_of_sub_interval() {
        let tn = TruncNormal::new(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY);
        let m = tn.log_mass(-1.959_963_984_540_054, 1.959_963_984_540_054).exp();
        assert!((m - 0.95).abs() < 1e-12);
        assert_eq!(tn.log_mass(3.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn lse_handles_neg_inf() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - LN_2).abs() < 1e-15);
    }
}
