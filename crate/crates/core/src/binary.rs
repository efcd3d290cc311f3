//! Bit-serial binary arithmetic inside the crossbar, the fault-sensitivity
//! baseline for the stochastic pipeline.
//!
//! Numbers are bit-sliced: bit `i` of every lane lives in one row, one lane
//! per column. Every gate is a scouting-logic sense followed by a write of the
//! result into a fresh row, and every sense sees the same fault model as the
//! stochastic ops.

use crate::bitstream::BitStream;
use crate::crossbar::{CostLedger, CrossbarArray, FaultModel, Operand, SenseOp};
use crate::error::{Error, Result};

/// One bit position across all lanes: a stored row or a broadcast constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bit {
    Row(usize),
    Const(bool),
}

/// Bit-sliced unsigned number, LSB first.
pub type Word = Vec<Bit>;

/// Broadcast constant of `width` bits.
pub fn constant(value: u64, width: usize) -> Word {
    (0..width).map(|i| Bit::Const((value >> i) & 1 == 1)).collect()
}

/// Crossbar scratchpad running bit-sliced arithmetic over `lanes` columns.
#[derive(Debug)]
pub struct BinaryCim {
    array: CrossbarArray,
    free: Vec<usize>,
}

impl BinaryCim {
    pub fn new(lanes: usize) -> Result<Self> {
        Ok(BinaryCim {
            array: CrossbarArray::new(64, lanes)?,
            free: (0..64).rev().collect(),
        })
    }

    pub fn lanes(&self) -> usize {
        self.array.cols()
    }

    fn alloc(&mut self) -> usize {
        if let Some(r) = self.free.pop() {
            return r;
        }
        let r = self.array.rows();
        self.array.add_rows(64);
        self.free.extend((r + 1..r + 64).rev());
        r
    }

    /// Returns the rows of `word` to the free list.
    pub fn release(&mut self, word: &[Bit]) {
        for b in word {
            if let Bit::Row(r) = *b {
                self.free.push(r);
            }
        }
    }

    fn store(&mut self, bits: &BitStream, ledger: &mut CostLedger) -> Result<Bit> {
        let r = self.alloc();
        self.array.write_row(r, bits, ledger)?;
        Ok(Bit::Row(r))
    }

    /// Writes `values` (one per lane) as a `width`-bit word.
    pub fn load(&mut self, values: &[u64], width: usize, ledger: &mut CostLedger) -> Result<Word> {
        if values.len() != self.lanes() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.lanes(),
            });
        }
        (0..width)
            .map(|i| {
                let row = BitStream::from_fn(values.len(), |j| (values[j] >> i) & 1 == 1);
                self.store(&row, ledger)
            })
            .collect()
    }

    /// Senses each bit row (READ1) and reassembles per-lane integers.
    pub fn read(&self, word: &[Bit], fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<Vec<u64>> {
        let mut out = vec![0u64; self.lanes()];
        for (i, b) in word.iter().enumerate() {
            let row = match *b {
                Bit::Const(v) => {
                    if v {
                        out.iter_mut().for_each(|o| *o |= 1 << i);
                    }
                    continue;
                }
                Bit::Row(r) => self.array.sense(&[r], SenseOp::Read1, fault, ledger)?,
            };
            for (j, o) in out.iter_mut().enumerate() {
                *o |= (row.get(j) as u64) << i;
            }
        }
        Ok(out)
    }

    /// One gate: sense the inputs and write the result to a new row.
    /// All-constant inputs fold without touching the array.
    pub fn gate(
        &mut self,
        op: SenseOp,
        inputs: &[Bit],
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<Bit> {
        if inputs.iter().all(|b| matches!(b, Bit::Const(_))) {
            let x: Vec<u64> = inputs
                .iter()
                .map(|b| if *b == Bit::Const(true) { 1 } else { 0 })
                .collect();
            return Ok(Bit::Const(op.eval(&x) & 1 == 1));
        }
        let ops: Vec<Operand> = inputs
            .iter()
            .map(|b| match *b {
                Bit::Row(r) => Operand::Row(r),
                Bit::Const(v) => Operand::Const(v),
            })
            .collect();
        let out = self.array.sense_operands(&ops, op, None, fault, ledger)?;
        self.store(&out, ledger)
    }

    pub fn not(&mut self, a: &[Bit], fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<Word> {
        a.iter()
            .map(|&b| self.gate(SenseOp::Not1, &[b], fault, ledger))
            .collect()
    }

    /// Ripple-carry sum of two equal-width words plus `carry_in`. Per bit:
    /// two XOR2 senses for the sum and one MAJ3 for the carry.
    pub fn add(
        &mut self,
        a: &[Bit],
        b: &[Bit],
        carry_in: Bit,
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<(Word, Bit)> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let mut c = carry_in;
        let mut sum = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let t = self.gate(SenseOp::Xor2, &[x, y], fault, ledger)?;
            sum.push(self.gate(SenseOp::Xor2, &[t, c], fault, ledger)?);
            self.release(&[t]);
            let next = self.gate(SenseOp::Maj3, &[x, y, c], fault, ledger)?;
            if c != carry_in {
                self.release(&[c]);
            }
            c = next;
        }
        Ok((sum, c))
    }

    /// `a - b` modulo `2^width` via `a + !b + 1`; the flag is 1 when `a >= b`.
    pub fn sub(
        &mut self,
        a: &[Bit],
        b: &[Bit],
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<(Word, Bit)> {
        let nb = self.not(b, fault, ledger)?;
        let out = self.add(a, &nb, Bit::Const(true), fault, ledger)?;
        self.release(&nb);
        Ok(out)
    }

    /// Per-lane `if sel { a } else { b }`.
    pub fn select(
        &mut self,
        sel: Bit,
        a: &[Bit],
        b: &[Bit],
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<Word> {
        let nsel = self.gate(SenseOp::Not1, &[sel], fault, ledger)?;
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let t1 = self.gate(SenseOp::And2, &[sel, x], fault, ledger)?;
            let t2 = self.gate(SenseOp::And2, &[nsel, y], fault, ledger)?;
            out.push(self.gate(SenseOp::Or2, &[t1, t2], fault, ledger)?);
            self.release(&[t1, t2]);
        }
        self.release(&[nsel]);
        Ok(out)
    }

    /// Shift-and-add product, `a.len() + b.len()` bits wide.
    pub fn mul(&mut self, a: &[Bit], b: &[Bit], fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<Word> {
        let wa = a.len();
        let mut acc: Word = constant(0, wa + b.len());
        for (i, &bi) in b.iter().enumerate() {
            let pp: Word = a
                .iter()
                .map(|&aj| self.gate(SenseOp::And2, &[aj, bi], fault, ledger))
                .collect::<Result<_>>()?;
            let (sum, carry) = self.add(&acc[i..i + wa], &pp, Bit::Const(false), fault, ledger)?;
            self.release(&pp);
            self.release(&acc[i..i + wa + 1]);
            acc.splice(i..i + wa + 1, sum.into_iter().chain(std::iter::once(carry)));
        }
        Ok(acc)
    }

    /// Restoring division; returns `(quotient, remainder)` with the widths of
    /// `x` and `y`. Lanes with a zero divisor produce an all-ones quotient.
    pub fn div(
        &mut self,
        x: &[Bit],
        y: &[Bit],
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<(Word, Word)> {
        let wy = y.len();
        let mut y_ext = y.to_vec();
        y_ext.push(Bit::Const(false));
        let mut rem: Word = constant(0, wy + 1);
        let mut q: Word = vec![Bit::Const(false); x.len()];
        for i in (0..x.len()).rev() {
            let top = rem[wy];
            self.release(&[top]);
            let mut shifted = Vec::with_capacity(wy + 1);
            shifted.push(x[i]);
            shifted.extend_from_slice(&rem[..wy]);
            let (diff, fits) = self.sub(&shifted, &y_ext, fault, ledger)?;
            let next = self.select(fits, &diff, &shifted, fault, ledger)?;
            self.release(&diff);
            self.release(&shifted[1..]);
            q[i] = fits;
            rem = next;
        }
        rem.truncate(wy);
        Ok((q, rem))
    }
}

fn check_fits(v: u64, n: usize) -> Result<()> {
    if n == 0 || n > 16 {
        return Err(Error::OutOfRange {
            what: "operand width n",
            value: n as u64,
            max: 16,
        });
    }
    if v >> n != 0 {
        return Err(Error::OutOfRange {
            what: "operand",
            value: v,
            max: (1 << n) - 1,
        });
    }
    Ok(())
}

fn scalar<F>(x: u64, y: u64, n: usize, fault: &mut FaultModel, ledger: &mut CostLedger, f: F) -> Result<u64>
where
    F: FnOnce(&mut BinaryCim, &[Bit], &[Bit], &mut FaultModel, &mut CostLedger) -> Result<Word>,
{
    check_fits(x, n)?;
    check_fits(y, n)?;
    let mut cim = BinaryCim::new(1)?;
    let a = cim.load(&[x], n, ledger)?;
    let b = cim.load(&[y], n, ledger)?;
    let out = f(&mut cim, &a, &b, fault, ledger)?;
    Ok(cim.read(&out, fault, ledger)?[0])
}

/// `x + y` as an `n + 1`-bit result.
pub fn bin_add(x: u64, y: u64, n: usize, fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<u64> {
    scalar(x, y, n, fault, ledger, |c, a, b, f, l| {
        let (mut s, carry) = c.add(a, b, Bit::Const(false), f, l)?;
        s.push(carry);
        Ok(s)
    })
}

/// `x - y` modulo `2^n`.
pub fn bin_sub(x: u64, y: u64, n: usize, fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<u64> {
    scalar(x, y, n, fault, ledger, |c, a, b, f, l| Ok(c.sub(a, b, f, l)?.0))
}

/// `x * y` as a `2n`-bit result.
pub fn bin_mul(x: u64, y: u64, n: usize, fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<u64> {
    scalar(x, y, n, fault, ledger, |c, a, b, f, l| c.mul(a, b, f, l))
}

/// `x / y` (integer quotient).
pub fn bin_div(x: u64, y: u64, n: usize, fault: &mut FaultModel, ledger: &mut CostLedger) -> Result<u64> {
    if y == 0 {
        return Err(Error::DivideByZero);
    }
    scalar(x, y, n, fault, ledger, |c, a, b, f, l| Ok(c.div(a, b, f, l)?.0))
}
