//! Stochastic-to-binary conversion.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstream::BitStream;
use crate::crossbar::{CostLedger, Event};
use crate::error::{Error, Result};

/// Bitline ADC. The full-scale input is a count of `N` ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub bits: u32,
    /// Standard deviation of Gaussian noise added to the accumulated count
    /// before quantization. Zero disables the hook.
    #[serde(default)]
    pub count_noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        AdcConfig {
            bits: 8,
            count_noise_sigma: 0.0,
            noise_seed: 0,
        }
    }
}

impl AdcConfig {
    pub fn with_bits(bits: u32) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(Error::OutOfRange {
                what: "ADC resolution",
                value: bits as u64,
                max: 16,
            });
        }
        Ok(AdcConfig {
            bits,
            ..Default::default()
        })
    }

    pub fn max_code(&self) -> u64 {
        (1 << self.bits) - 1
    }
}

/// Quantizes `count` ones out of `n`: `round(count * (2^b - 1) / n)` with
/// halves rounded up, clamped to the code range.
pub fn quantize(count: f64, n: usize, max_code: u64) -> u64 {
    let scaled = count * max_code as f64 / n as f64;
    ((scaled + 0.5).floor().max(0.0) as u64).min(max_code)
}

/// Drives the stream onto an LRS reference column and converts the bitline
/// current. Books one ADC conversion.
pub fn stob_adc(bs: &BitStream, adc: &AdcConfig, ledger: &mut CostLedger) -> u64 {
    ledger.record(Event::AdcConversion, 1);
    let count = bs.count_ones();
    if adc.count_noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(adc.noise_seed ^ count);
        // Box-Muller; one normal draw is enough here.
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        return quantize(count as f64 + adc.count_noise_sigma * z, bs.len(), adc.max_code());
    }
    // Exact integer path: floor((2 * count * max + n) / (2n)).
    let n = bs.len() as u64;
    ((2 * count * adc.max_code() + n) / (2 * n)).min(adc.max_code())
}

/// Exact popcount, the sequential-counter reference. No ledger events.
pub fn stob_exact(bs: &BitStream) -> u64 {
    bs.count_ones()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_half_up() {
        let adc = AdcConfig::default();
        let mut l = CostLedger::new();
        assert_eq!(stob_adc(&BitStream::zeros(256), &adc, &mut l), 0);
        for b in [1, 4, 8, 12] {
            let a = AdcConfig::with_bits(b).unwrap();
            assert_eq!(stob_adc(&BitStream::ones(100), &a, &mut l), (1 << b) - 1);
        }
        let half = BitStream::from_fn(256, |j| j < 128);
        assert_eq!(stob_adc(&half, &adc, &mut l), 128);
        assert_eq!(l.adc_conversions(), 6);
        assert!(AdcConfig::with_bits(0).is_err());
        assert!(AdcConfig::with_bits(17).is_err());
    }

    #[test]
    fn exact_count() {
        let bs = BitStream::parse("10101").unwrap();
        assert_eq!(stob_exact(&bs), 3);
        assert_eq!(stob_exact(&bs.not()), 2);
    }

    #[test]
    fn noise_hook_is_deterministic() {
        let adc = AdcConfig {
            bits: 8,
            count_noise_sigma: 3.0,
            noise_seed: 4,
        };
        let bs = BitStream::from_fn(256, |j| j % 3 == 0);
        let mut l = CostLedger::new();
        assert_eq!(stob_adc(&bs, &adc, &mut l), stob_adc(&bs, &adc, &mut l));
    }

    proptest! {
        #[test]
        fn quantization_bound(bits in proptest::collection::vec(any::<bool>(), 1..600), b in 1u32..=16) {
            let bs = BitStream::from_bools(&bits).unwrap();
            let adc = AdcConfig::with_bits(b).unwrap();
            let code = stob_adc(&bs, &adc, &mut CostLedger::new());
            let max = adc.max_code() as f64;
            let bound = 1.0 / max + 1.0 / (2.0 * bits.len() as f64);
            prop_assert!((code as f64 / max - bs.value()).abs() <= bound + 1e-12);
            let loop_count = bits.iter().filter(|&&x| x).count() as u64;
            prop_assert_eq!(stob_exact(&bs), loop_count);
            prop_assert_eq!(code, quantize(loop_count as f64, bits.len(), adc.max_code()));
        }

        #[test]
        fn monotone_and_exact_when_wide(n in 1usize..200, k in 0usize..200) {
            let k = k.min(n);
            let bits = (usize::BITS - n.leading_zeros()).max(1);
            let adc = AdcConfig::with_bits(bits).unwrap();
            let mut l = CostLedger::new();
            let lo = stob_adc(&BitStream::from_fn(n, |j| j < k), &adc, &mut l);
            let hi = stob_adc(&BitStream::from_fn(n, |j| j <= k), &adc, &mut l);
            prop_assert!(hi >= lo);
            if adc.max_code() as usize == n {
                prop_assert_eq!(lo, k as u64);
            }
        }
    }
}
