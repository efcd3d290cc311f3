//! ReRAM crossbar with scouting-logic sensing, a two-latch bank per column,
//! sense-time fault injection and a hardware event ledger.
//!
//! Every row is stored as a packed [`BitStream`] with one bit per column, so
//! a sense is a handful of word-wide Boolean operations.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstream::BitStream;
use crate::error::{Error, Result};

pub const DEFAULT_ROWS: usize = 16;
pub const DEFAULT_COLS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellState {
    /// High resistance, logic 0.
    Hrs,
    /// Low resistance, logic 1.
    Lrs,
}

impl From<bool> for CellState {
    fn from(b: bool) -> Self {
        if b {
            CellState::Lrs
        } else {
            CellState::Hrs
        }
    }
}

impl From<CellState> for bool {
    fn from(c: CellState) -> bool {
        c == CellState::Lrs
    }
}

/// Reference-current threshold selected for a sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SenseOp {
    Read1,
    And2,
    Or2,
    Xor2,
    /// 1 iff at least two of three cells are LRS; uses the AND2 reference.
    Maj3,
    Not1,
}

impl SenseOp {
    pub fn arity(self) -> usize {
        match self {
            SenseOp::Read1 | SenseOp::Not1 => 1,
            SenseOp::And2 | SenseOp::Or2 | SenseOp::Xor2 => 2,
            SenseOp::Maj3 => 3,
        }
    }

    /// Column-parallel evaluation on 64 columns at once.
    #[inline]
    pub fn eval(self, x: &[u64]) -> u64 {
        match self {
            SenseOp::Read1 => x[0],
            SenseOp::Not1 => !x[0],
            SenseOp::And2 => x[0] & x[1],
            SenseOp::Or2 => x[0] | x[1],
            SenseOp::Xor2 => x[0] ^ x[1],
            SenseOp::Maj3 => (x[0] & x[1]) | (x[0] & x[2]) | (x[1] & x[2]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Latch {
    /// Data latch.
    L0,
    /// Modify/predicate latch.
    L1,
}

/// One input of a sense.
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    /// Cells of a row.
    Row(usize),
    /// A bitline driven to a fixed level in every column.
    Const(bool),
    /// Latch contents driven back onto the bitlines, optionally inverted.
    Latch(Latch, bool),
    /// The previous sense result, forwarded from the sense amplifiers.
    Forward(&'a BitStream),
}

/// Hardware event kinds tracked by [`CostLedger`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    SlSense,
    RowWrite,
    LatchOp,
    AdcConversion,
    SequentialCycle,
}

impl Event {
    pub const ALL: [Event; 5] = [
        Event::SlSense,
        Event::RowWrite,
        Event::LatchOp,
        Event::AdcConversion,
        Event::SequentialCycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Event::SlSense => "sl_sense",
            Event::RowWrite => "row_write",
            Event::LatchOp => "latch_op",
            Event::AdcConversion => "adc_conversion",
            Event::SequentialCycle => "sequential_cycle",
        }
    }

    pub fn from_name(name: &str) -> Result<Event> {
        Event::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::UnknownEvent(name.to_string()))
    }

    #[inline]
    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Counts of hardware events. Alongside each count the ledger keeps the
/// number of bitlines the events touched; latency is charged per event and
/// energy per bitline.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    counts: [u64; 5],
    bitlines: [u64; 5],
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&mut self, event: Event, bitlines: u64) {
        self.record_n(event, 1, bitlines);
    }

    #[inline]
    pub fn record_n(&mut self, event: Event, count: u64, bitlines: u64) {
        self.counts[event.index()] += count;
        self.bitlines[event.index()] += bitlines;
    }

    pub fn count(&self, event: Event) -> u64 {
        self.counts[event.index()]
    }

    pub fn bitlines(&self, event: Event) -> u64 {
        self.bitlines[event.index()]
    }

    pub fn sl_senses(&self) -> u64 {
        self.count(Event::SlSense)
    }

    pub fn row_writes(&self) -> u64 {
        self.count(Event::RowWrite)
    }

    pub fn latch_ops(&self) -> u64 {
        self.count(Event::LatchOp)
    }

    pub fn adc_conversions(&self) -> u64 {
        self.count(Event::AdcConversion)
    }

    pub fn sequential_cycles(&self) -> u64 {
        self.count(Event::SequentialCycle)
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for i in 0..5 {
            self.counts[i] += other.counts[i];
            self.bitlines[i] += other.bitlines[i];
        }
    }

    /// Per-event difference `self - earlier`; panics if `earlier` is not a
    /// prefix of this ledger's history.
    pub fn since(&self, earlier: &CostLedger) -> CostLedger {
        let mut out = CostLedger::default();
        for i in 0..5 {
            out.counts[i] = self.counts[i]
                .checked_sub(earlier.counts[i])
                .expect("ledger counters never decrease");
            out.bitlines[i] = self.bitlines[i] - earlier.bitlines[i];
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// `(event, count, bitlines)` in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (Event, u64, u64)> + '_ {
        Event::ALL.into_iter().map(|e| (e, self.count(e), self.bitlines(e)))
    }
}

/// Sense-time bit flips. `p01` flips a correct 0 to 1, `p10` a correct 1 to 0.
#[derive(Clone, Debug)]
pub struct FaultModel {
    p01: f64,
    p10: f64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl FaultModel {
    pub fn new(p_f: f64, seed: u64) -> Result<Self> {
        Self::asymmetric(p_f, p_f, seed)
    }

    pub fn asymmetric(p01: f64, p10: f64, seed: u64) -> Result<Self> {
        for p in [p01, p10] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("flip probability {p} outside [0, 1]")));
            }
        }
        Ok(FaultModel {
            p01,
            p10,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn none() -> Self {
        Self::new(0.0, 0).expect("zero is a valid probability")
    }

    pub fn is_fault_free(&self) -> bool {
        self.p01 == 0.0 && self.p10 == 0.0
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p10(&self) -> f64 {
        self.p10
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent Bernoulli(p) mask over `len` bits.
    fn mask(&mut self, p: f64, len: usize) -> BitStream {
        let mut m = BitStream::zeros(len);
        if p <= 0.0 {
            return m;
        }
        if p >= 1.0 {
            return m.not();
        }
        if p < 0.05 {
            let ln_q = (1.0 - p).ln();
            let mut j = 0usize;
            loop {
                let u: f64 = 1.0 - self.rng.random::<f64>();
                let gap = (u.ln() / ln_q).floor();
                if gap >= (len - j) as f64 {
                    break;
                }
                j += gap as usize;
                m.words_mut()[j / 64] |= 1 << (j % 64);
                j += 1;
                if j >= len {
                    break;
                }
            }
        } else {
            for j in 0..len {
                if self.rng.random_bool(p) {
                    m.words_mut()[j / 64] |= 1 << (j % 64);
                }
            }
        }
        m
    }

    /// Flips bits of a fault-free sense result in place.
    pub fn apply(&mut self, bits: &mut BitStream) {
        if self.is_fault_free() {
            return;
        }
        let len = bits.len();
        if self.p01 == self.p10 {
            let m = self.mask(self.p01, len);
            for (w, f) in bits.words_mut().iter_mut().zip(m.words()) {
                *w ^= f;
            }
        } else {
            let up = self.mask(self.p01, len);
            let down = self.mask(self.p10, len);
            for ((w, u), d) in bits.words_mut().iter_mut().zip(up.words()).zip(down.words()) {
                *w ^= (!*w & u) | (*w & d);
            }
        }
        bits.clear_tail();
    }
}

/// R x C array of ReRAM cells plus a per-column latch bank.
#[derive(Clone, Debug)]
pub struct CrossbarArray {
    cols: usize,
    cells: Vec<BitStream>,
    latches: [Option<BitStream>; 2],
}

impl CrossbarArray {
    /// All cells start in HRS; latches start empty.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Geometry(format!("{rows} x {cols} array")));
        }
        Ok(CrossbarArray {
            cols,
            cells: vec![BitStream::zeros(cols); rows],
            latches: [None, None],
        })
    }

    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Appends `extra` HRS rows (another mat stacked on the same bitlines).
    pub fn add_rows(&mut self, extra: usize) {
        let blank = BitStream::zeros(self.cols);
        self.cells.resize(self.cells.len() + extra, blank);
    }

    fn check_row(&self, r: usize) -> Result<()> {
        if r >= self.rows() {
            return Err(Error::OutOfRange {
                what: "row index",
                value: r as u64,
                max: self.rows() as u64 - 1,
            });
        }
        Ok(())
    }

    pub fn write_row(&mut self, r: usize, bits: &BitStream, ledger: &mut CostLedger) -> Result<()> {
        self.check_row(r)?;
        if bits.len() != self.cols {
            return Err(Error::LengthMismatch {
                left: bits.len(),
                right: self.cols,
            });
        }
        self.cells[r].clone_from(bits);
        ledger.record(Event::RowWrite, self.cols as u64);
        Ok(())
    }

    /// Stored row contents, without sensing (no cost, no faults).
    pub fn row(&self, r: usize) -> Result<&BitStream> {
        self.check_row(r)?;
        Ok(&self.cells[r])
    }

    pub fn cell(&self, r: usize, c: usize) -> Result<CellState> {
        let row = self.row(r)?;
        if c >= self.cols {
            return Err(Error::OutOfRange {
                what: "column index",
                value: c as u64,
                max: self.cols as u64 - 1,
            });
        }
        Ok(row.get(c).into())
    }

    pub fn load_latch(&mut self, latch: Latch, bits: BitStream, ledger: &mut CostLedger) -> Result<()> {
        if bits.len() != self.cols {
            return Err(Error::LengthMismatch {
                left: bits.len(),
                right: self.cols,
            });
        }
        self.latches[latch as usize] = Some(bits);
        ledger.record(Event::LatchOp, self.cols as u64);
        Ok(())
    }

    pub fn latch(&self, latch: Latch) -> Result<&BitStream> {
        self.latches[latch as usize]
            .as_ref()
            .ok_or(Error::LatchUninitialized(latch))
    }

    /// General sense: evaluates `op` over `inputs`, masks columns whose
    /// `predicate` latch bit is 0, then applies faults.
    ///
    /// Books one `sl_sense`, plus one `latch_op` for each latch or forwarded
    /// input and for the predicate.
    pub fn sense_operands(
        &self,
        inputs: &[Operand<'_>],
        op: SenseOp,
        predicate: Option<Latch>,
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<BitStream> {
        if inputs.len() != op.arity() {
            return Err(Error::Arity {
                op,
                expected: op.arity(),
                got: inputs.len(),
            });
        }
        enum Src<'b> {
            Bits(&'b BitStream, bool),
            Level(u64),
        }
        let mut srcs = Vec::with_capacity(3);
        let mut latch_reads = 0u64;
        for input in inputs {
            srcs.push(match *input {
                Operand::Row(r) => {
                    self.check_row(r)?;
                    Src::Bits(&self.cells[r], false)
                }
                Operand::Const(b) => Src::Level(if b { !0 } else { 0 }),
                Operand::Latch(l, inverted) => {
                    latch_reads += 1;
                    Src::Bits(self.latch(l)?, inverted)
                }
                Operand::Forward(bits) => {
                    if bits.len() != self.cols {
                        return Err(Error::LengthMismatch {
                            left: bits.len(),
                            right: self.cols,
                        });
                    }
                    latch_reads += 1;
                    Src::Bits(bits, false)
                }
            });
        }
        let pred = match predicate {
            Some(l) => {
                latch_reads += 1;
                Some(self.latch(l)?)
            }
            None => None,
        };
        let mut out = BitStream::zeros(self.cols);
        let mut x = [0u64; 3];
        for (wi, o) in out.words_mut().iter_mut().enumerate() {
            for (k, s) in srcs.iter().enumerate() {
                x[k] = match s {
                    Src::Bits(b, inv) => b.words()[wi] ^ if *inv { !0 } else { 0 },
                    Src::Level(v) => *v,
                };
            }
            let mut v = op.eval(&x[..srcs.len()]);
            if let Some(p) = pred {
                v &= p.words()[wi];
            }
            *o = v;
        }
        out.clear_tail();
        fault.apply(&mut out);
        ledger.record(Event::SlSense, self.cols as u64);
        if latch_reads > 0 {
            ledger.record_n(Event::LatchOp, latch_reads, latch_reads * self.cols as u64);
        }
        Ok(out)
    }

    /// Activates `rows` together and thresholds the bitline current for `op`.
    pub fn sense(
        &self,
        rows: &[usize],
        op: SenseOp,
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<BitStream> {
        let inputs: Vec<Operand> = rows.iter().map(|&r| Operand::Row(r)).collect();
        self.sense_operands(&inputs, op, None, fault, ledger)
    }

    /// Two-input sense between a row and the contents of latch L0.
    pub fn sense_with_latch(
        &self,
        row: usize,
        op: SenseOp,
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<BitStream> {
        if op.arity() != 2 {
            return Err(Error::Arity {
                op,
                expected: 2,
                got: op.arity(),
            });
        }
        self.sense_operands(
            &[Operand::Row(row), Operand::Latch(Latch::L0, false)],
            op,
            None,
            fault,
            ledger,
        )
    }

    /// Single-row sense gated by the L1 predicate: columns with predicate 0
    /// read 0.
    pub fn predicated_sense(
        &self,
        row: usize,
        op: SenseOp,
        fault: &mut FaultModel,
        ledger: &mut CostLedger,
    ) -> Result<BitStream> {
        match op.arity() {
            1 => self.sense_operands(&[Operand::Row(row)], op, Some(Latch::L1), fault, ledger),
            2 => self.sense_operands(
                &[Operand::Row(row), Operand::Latch(Latch::L0, false)],
                op,
                Some(Latch::L1),
                fault,
                ledger,
            ),
            n => Err(Error::Arity {
                op,
                expected: 2,
                got: n,
            }),
        }
    }
}
