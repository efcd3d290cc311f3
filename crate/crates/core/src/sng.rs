//! Software comparator SNG: the fault-free reference every in-memory
//! generator is checked against.

use serde::{Deserialize, Serialize};

use crate::bitstream::BitStream;
use crate::error::{Error, Result};
use crate::source::{check_width, RandomBlock, RandomSource, SourceSpec};

/// Parameters for generating one stochastic bit-stream.
///
/// Streams built from configs with the same `seed` and the same `group`
/// consume bit-identical random words and are therefore maximally
/// correlated. A config without a group reads slot 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SngConfig {
    /// Bits per random word.
    pub m: u32,
    /// Stream length.
    pub n: usize,
    pub source: SourceSpec,
    pub seed: u64,
    #[serde(default)]
    pub group: Option<u64>,
}

impl SngConfig {
    pub fn new(m: u32, n: usize, source: SourceSpec, seed: u64) -> Self {
        SngConfig {
            m,
            n,
            source,
            seed,
            group: None,
        }
    }

    pub fn with_group(mut self, group: u64) -> Self {
        self.group = Some(group);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_width(self.m)?;
        if self.n == 0 {
            return Err(Error::invalid("stream length N must be positive"));
        }
        Ok(())
    }

    pub fn check_operand(&self, x: u64) -> Result<()> {
        check_operand(x, self.m)
    }

    pub fn build_source(&self) -> Result<RandomSource> {
        self.source.build(self.seed, self.group.unwrap_or(0))
    }

    /// The `N` random words this config feeds to its comparator.
    pub fn draw(&self) -> Result<RandomBlock> {
        self.validate()?;
        self.build_source()?.draw(self.m, self.n)
    }
}

pub(crate) fn check_operand(x: u64, m: u32) -> Result<()> {
    let max = (1u64 << m) - 1;
    if x > max {
        return Err(Error::OutOfRange {
            what: "operand X",
            value: x,
            max,
        });
    }
    Ok(())
}

/// Bit `j` is 1 iff `words[j] < x`.
pub fn compare_words(x: u64, words: &[u64]) -> Result<BitStream> {
    if words.is_empty() {
        return Err(Error::invalid("stream length N must be positive"));
    }
    Ok(BitStream::from_fn(words.len(), |j| words[j] < x))
}

/// Comparator SNG over software words: bit `j` = `RN_j < X`.
pub fn generate_sbs_reference(x: u64, cfg: &SngConfig) -> Result<BitStream> {
    cfg.validate()?;
    cfg.check_operand(x)?;
    compare_words(x, &cfg.draw()?.into_words())
}
