//! Stochastic arithmetic on bit-streams.
//!
//! Each op has a software gate-level backend and a CIM backend that issues
//! the matching scouting-logic sense on a crossbar. In the CIM backend the
//! operand streams are taken to be resident rows already (their generation
//! booked the writes), so only the sense itself is charged.

use serde::{Deserialize, Serialize};

use crate::bitstream::BitStream;
use crate::crossbar::{CostLedger, CrossbarArray, Event, FaultModel, SenseOp};
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Plain bitwise gates; no faults, no ledger events.
    Software,
    /// Crossbar senses with faults and cost events.
    #[default]
    Cim,
}

fn cim_sense(inputs: &[&BitStream], op: SenseOp, fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<BitStream> {
    let n = inputs[0].len();
    for s in &inputs[1..] {
        inputs[0].check_same_len(s)?;
    }
    let mut array = CrossbarArray::new(inputs.len(), n)?;
    let mut resident = CostLedger::new();
    for (r, s) in inputs.iter().enumerate() {
        array.write_row(r, s, &mut resident)?;
    }
    let rows: Vec<usize> = (0..inputs.len()).collect();
    array.sense(&rows, op, fault, ledger)
}

fn gate(
    inputs: &[&BitStream],
    op: SenseOp,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    match backend {
        Backend::Cim => cim_sense(inputs, op, fault, ledger),
        Backend::Software => match op {
            SenseOp::And2 => inputs[0].and(inputs[1]),
            SenseOp::Or2 => inputs[0].or(inputs[1]),
            SenseOp::Xor2 => inputs[0].xor(inputs[1]),
            SenseOp::Maj3 => BitStream::maj3(inputs[0], inputs[1], inputs[2]),
            SenseOp::Read1 => Ok(inputs[0].clone()),
            SenseOp::Not1 => Ok(inputs[0].not()),
        },
    }
}

/// `1 - p_a` (NOT1 sense).
pub fn sc_not(a: &BitStream, backend: Backend, fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<BitStream> {
    gate(&[a], SenseOp::Not1, backend, fault, ledger)
}

/// `p_a * p_b` for independent inputs (AND).
pub fn sc_mul(
    a: &BitStream,
    b: &BitStream,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    gate(&[a, b], SenseOp::And2, backend, fault, ledger)
}

/// Scaled addition by 3-input majority; with an independent select of value
/// 1/2 the expectation is `(p_a + p_b) / 2`.
pub fn sc_scaled_add(
    a: &BitStream,
    b: &BitStream,
    s: &BitStream,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    gate(&[a, b, s], SenseOp::Maj3, backend, fault, ledger)
}

/// 2-to-1 multiplexer: bit `j` is `a_j` where `s_j` is 1, else `b_j`.
pub fn sc_mux(a: &BitStream, b: &BitStream, s: &BitStream) -> Result<BitStream> {
    a.check_same_len(b)?;
    a.check_same_len(s)?;
    let words = a
        .words()
        .iter()
        .zip(b.words())
        .zip(s.words())
        .map(|((&x, &y), &z)| (x & z) | (y & !z))
        .collect();
    BitStream::from_words(words, a.len())
}

/// OR approximates `p_a + p_b - p_a * p_b`; close to the sum when both
/// inputs are at most 1/2. Larger inputs are accepted.
pub fn sc_approx_add(
    a: &BitStream,
    b: &BitStream,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    gate(&[a, b], SenseOp::Or2, backend, fault, ledger)
}

/// `|p_a - p_b|` for maximally correlated inputs (XOR).
pub fn sc_abs_sub(
    a: &BitStream,
    b: &BitStream,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    gate(&[a, b], SenseOp::Xor2, backend, fault, ledger)
}

/// `min(p_a, p_b)` for maximally correlated inputs (AND).
pub fn sc_min(
    a: &BitStream,
    b: &BitStream,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    gate(&[a, b], SenseOp::And2, backend, fault, ledger)
}

/// `max(p_a, p_b)` for maximally correlated inputs (OR).
pub fn sc_max(
    a: &BitStream,
    b: &BitStream,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    gate(&[a, b], SenseOp::Or2, backend, fault, ledger)
}

/// CORDIV: a D-latch samples the numerator whenever the divisor bit is 1 and
/// the output repeats the latch otherwise. Approximates `p_n / p_d` for
/// correlated inputs with `p_n <= p_d`; a larger numerator saturates toward 1.
///
/// The CIM backend runs one sequential cycle and one latch operation per bit,
/// applies sense faults to each output bit and writes the result row once.
pub fn sc_div_cordiv(
    numerator: &BitStream,
    divisor: &BitStream,
    backend: Backend,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    numerator.check_same_len(divisor)?;
    let n = numerator.len();
    let mut q = false;
    let mut out = BitStream::from_fn(n, |j| {
        if divisor.get(j) {
            q = numerator.get(j);
        }
        q
    });
    if backend == Backend::Cim {
        fault.apply(&mut out);
        ledger.record_n(Event::SequentialCycle, n as u64, n as u64);
        ledger.record_n(Event::LatchOp, n as u64, n as u64);
        ledger.record(Event::RowWrite, n as u64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sng::{generate_sbs_reference, SngConfig};
    use crate::source::SourceSpec;

    fn bs(s: &str) -> BitStream {
        BitStream::parse(s).unwrap()
    }

    fn both<F>(f: F) -> (BitStream, BitStream)
    where
        F: Fn(Backend, &mut FaultModel, &mut CostLedger) -> BitStream,
    {
        let sw = f(Backend::Software, &mut FaultModel::none(), &mut CostLedger::new());
        let cim = f(Backend::Cim, &mut FaultModel::none(), &mut CostLedger::new());
        (sw, cim)
    }

    #[test]
    fn worked_gate_examples() {
        let (a, b) = (bs("1010"), bs("1100"));
        let (sw, cim) = both(|k, f, l| sc_mul(&a, &b, k, f, l).unwrap());
        assert_eq!(sw, bs("1000"));
        assert_eq!(cim, sw);
        assert_eq!(sw.value(), 0.25);
        let s = bs("1001");
        let (sw, cim) = both(|k, f, l| sc_scaled_add(&bs("1100"), &bs("1010"), &s, k, f, l).unwrap());
        assert_eq!(sw, bs("1000"));
        assert_eq!(cim, sw);
    }

    #[test]
    fn identities() {
        let a = bs("1101001011");
        let ones = BitStream::ones(10);
        let zeros = BitStream::zeros(10);
        let mut f = FaultModel::none();
        let mut l = CostLedger::new();
        assert_eq!(sc_mul(&a, &ones, Backend::Cim, &mut f, &mut l).unwrap(), a);
        assert_eq!(sc_scaled_add(&a, &a, &zeros, Backend::Cim, &mut f, &mut l).unwrap(), a);
        assert_eq!(sc_approx_add(&a, &zeros, Backend::Cim, &mut f, &mut l).unwrap(), a);
        assert_eq!(sc_abs_sub(&a, &a, Backend::Cim, &mut f, &mut l).unwrap(), zeros);
        assert_eq!(sc_min(&a, &a, Backend::Cim, &mut f, &mut l).unwrap(), a);
        assert_eq!(sc_max(&a, &a, Backend::Cim, &mut f, &mut l).unwrap(), a);
        assert_eq!(sc_mux(&a, &zeros, &ones).unwrap(), a);
        assert_eq!(sc_mux(&ones, &a, &zeros).unwrap(), a);
        assert_eq!(l.sl_senses(), 6);
        assert!(sc_mul(&a, &bs("10"), Backend::Cim, &mut f, &mut l).is_err());
    }

    #[test]
    fn cordiv_hand_trace() {
        let d = bs("1101");
        let n = bs("1001");
        let (sw, cim) = both(|k, f, l| sc_div_cordiv(&n, &d, k, f, l).unwrap());
        assert_eq!(sw, bs("1001"));
        assert_eq!(cim, sw);
        let mut l = CostLedger::new();
        sc_div_cordiv(&n, &d, Backend::Cim, &mut FaultModel::none(), &mut l).unwrap();
        assert_eq!(l.sequential_cycles(), 4);
        assert_eq!(l.row_writes(), 1);
        assert_eq!(l.sl_senses(), 0);
    }

    #[test]
    fn cordiv_corners() {
        let n = bs("0110100111");
        let mut f = FaultModel::none();
        let mut l = CostLedger::new();
        assert_eq!(
            sc_div_cordiv(&n, &BitStream::ones(10), Backend::Cim, &mut f, &mut l).unwrap(),
            n
        );
        let z = BitStream::zeros(10);
        assert_eq!(sc_div_cordiv(&z, &n, Backend::Cim, &mut f, &mut l).unwrap(), z);
    }

    #[test]
    fn correlated_pairs_hit_exact_values() {
        let cfg = SngConfig::new(8, 4096, SourceSpec::Software, 2).with_group(0);
        let a = generate_sbs_reference(64, &cfg).unwrap();
        let b = generate_sbs_reference(192, &cfg).unwrap();
        let (k, mut f, mut l) = (Backend::Cim, FaultModel::none(), CostLedger::new());
        let d = sc_abs_sub(&a, &b, k, &mut f, &mut l).unwrap();
        assert_eq!(d, b.and(&a.not()).unwrap());
        assert_eq!(d.count_ones(), b.count_ones() - a.count_ones());
        assert_eq!(sc_min(&a, &b, k, &mut f, &mut l).unwrap(), a);
        assert_eq!(sc_max(&a, &b, k, &mut f, &mut l).unwrap(), b);
    }

    #[test]
    fn majority_matches_mux_in_expectation() {
        let n = 10_000;
        let cfg = |g| SngConfig::new(8, n, SourceSpec::Software, 31).with_group(g);
        let a = generate_sbs_reference(200, &cfg(0)).unwrap();
        let b = generate_sbs_reference(40, &cfg(1)).unwrap();
        let s = generate_sbs_reference(128, &cfg(2)).unwrap();
        let maj = sc_scaled_add(
            &a,
            &b,
            &s,
            Backend::Software,
            &mut FaultModel::none(),
            &mut CostLedger::new(),
        )
        .unwrap();
        let mux = sc_mux(&a, &b, &s).unwrap();
        let target = (a.value() + b.value()) / 2.0;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((maj.value() - target).abs() < 4.0 * sigma);
        assert!((mux.value() - target).abs() < 4.0 * sigma);
    }

    #[test]
    fn or_of_halves() {
        let n = 20_000;
        let a = generate_sbs_reference(128, &SngConfig::new(8, n, SourceSpec::Software, 1).with_group(0)).unwrap();
        let b = generate_sbs_reference(128, &SngConfig::new(8, n, SourceSpec::Software, 1).with_group(1)).unwrap();
        let o = sc_approx_add(
            &a,
            &b,
            Backend::Software,
            &mut FaultModel::none(),
            &mut CostLedger::new(),
        )
        .unwrap();
        assert!((o.value() - 0.75).abs() < 4.0 * (0.1875 / n as f64).sqrt());
    }

    // Gate semantics against a per-bit oracle for every input triple at N <= 8.
    #[test]
    fn exhaustive_short_streams() {
        for n in 1..=4usize {
            let total = 1u32 << n;
            for x in 0..total {
                for y in 0..total {
                    let a = BitStream::from_fn(n, |j| (x >> j) & 1 == 1);
                    let b = BitStream::from_fn(n, |j| (y >> j) & 1 == 1);
                    let (sw, cim) = both(|k, f, l| sc_abs_sub(&a, &b, k, f, l).unwrap());
                    assert_eq!(sw, cim);
                    assert_eq!(sw, BitStream::from_fn(n, |j| a.get(j) != b.get(j)));
                    let (sw, cim) = both(|k, f, l| sc_div_cordiv(&a, &b, k, f, l).unwrap());
                    assert_eq!(sw, cim);
                    let mut q = false;
                    for j in 0..n {
                        if b.get(j) {
                            q = a.get(j);
                        }
                        assert_eq!(sw.get(j), q);
                    }
                }
            }
        }
    }
}
