//! In-memory stochastic number generation.
//!
//! The random words live in the crossbar as `M` bit rows. A bit-serial
//! greater-than network walks the rows from MSB to LSB, keeping a per-column
//! flag ("no difference seen yet") and a `gt` accumulator, so all `N`
//! comparisons run column-parallel.

use serde::{Deserialize, Serialize};

use crate::bitstream::BitStream;
use crate::crossbar::{CostLedger, CrossbarArray, FaultModel, Latch, Operand, SenseOp, DEFAULT_ROWS};
use crate::error::{Error, Result};
use crate::sng::{check_operand, SngConfig};
use crate::source::{RandomBlock, RandomSource};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SngVariant {
    /// Intermediate flag and accumulator rows are written back every bit.
    Naive,
    /// Flag and accumulator stay in the latches; no intermediate writes.
    #[default]
    Opt,
}

impl SngVariant {
    pub fn name(self) -> &'static str {
        match self {
            SngVariant::Naive => "naive",
            SngVariant::Opt => "opt",
        }
    }
}

/// Location of `M` random bit rows inside an array. Row `base + i` holds bit
/// `i` of every word, so the MSB sits on the highest row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomPlane {
    pub base: usize,
    pub m: u32,
    pub n: usize,
}

impl RandomPlane {
    pub fn row(&self, bit: u32) -> usize {
        self.base + bit as usize
    }

    /// First row after the plane.
    pub fn end(&self) -> usize {
        self.base + self.m as usize
    }

    /// Column `j` read top to bottom.
    pub fn word(&self, array: &CrossbarArray, j: usize) -> Result<u64> {
        let mut w = 0;
        for i in (0..self.m).rev() {
            w = (w << 1) | array.row(self.row(i))?.get(j) as u64;
        }
        Ok(w)
    }
}

/// Rows an array needs to run a generation of width `m`: the plane, two
/// scratch rows for the naive variant and the output row.
pub fn rows_needed(m: u32) -> usize {
    m as usize + 3
}

/// Writes a block of random words into rows `base..base + M`.
pub fn load_block(
    array: &mut CrossbarArray,
    base: usize,
    block: RandomBlock,
    ledger: &mut CostLedger,
) -> Result<RandomPlane> {
    let m = block.width();
    let n = block.len();
    if base + m as usize > array.rows() || n != array.cols() {
        return Err(Error::Geometry(format!(
            "a {m} x {n} random plane at row {base} does not fit a {} x {} array",
            array.rows(),
            array.cols()
        )));
    }
    for (i, row) in block.into_rows().iter().enumerate() {
        array.write_row(base + i, row, ledger)?;
    }
    Ok(RandomPlane { base, m, n })
}

/// Draws `N` words from `source` and stores them as a plane at row 0.
pub fn load_randoms(
    array: &mut CrossbarArray,
    source: &mut RandomSource,
    m: u32,
    n: usize,
    ledger: &mut CostLedger,
) -> Result<RandomPlane> {
    if array.rows() < m as usize || array.cols() != n {
        return Err(Error::Geometry(format!(
            "{m} x {n} plane needs at least {m} rows and exactly {n} columns, array is {} x {}",
            array.rows(),
            array.cols()
        )));
    }
    let block = source.draw(m, n)?;
    load_block(array, 0, block, ledger)
}

/// Column-parallel `X > RN_j`.
///
/// Each bit issues an XOR against the broadcast operand bit, then the flag
/// and accumulator updates. Naive: five senses and two row writes per bit,
/// using the two rows after the plane as scratch. Opt: four senses per bit
/// with the accumulator in L0, the flag in L1 and predicated sensing.
pub fn greater_than(
    array: &mut CrossbarArray,
    x: u64,
    plane: &RandomPlane,
    variant: SngVariant,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    check_operand(x, plane.m)?;
    if plane.n != array.cols() || plane.end() > array.rows() {
        return Err(Error::Geometry("plane does not match the array".into()));
    }
    match variant {
        SngVariant::Naive => greater_than_naive(array, x, plane, fault, ledger),
        SngVariant::Opt => greater_than_opt(array, x, plane, fault, ledger),
    }
}

fn greater_than_naive(
    array: &mut CrossbarArray,
    x: u64,
    plane: &RandomPlane,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    let f_row = plane.end();
    let g_row = plane.end() + 1;
    if g_row >= array.rows() {
        return Err(Error::Geometry(format!(
            "naive comparator needs {} rows, array has {}",
            g_row + 1,
            array.rows()
        )));
    }
    let mut gt = None;
    for i in (0..plane.m).rev() {
        let xi = (x >> i) & 1 == 1;
        let first = i + 1 == plane.m;
        let (f, g) = if first {
            (Operand::Const(true), Operand::Const(false))
        } else {
            (Operand::Row(f_row), Operand::Row(g_row))
        };
        let e = array.sense_operands(
            &[Operand::Row(plane.row(i)), Operand::Const(xi)],
            SenseOp::Xor2,
            None,
            fault,
            ledger,
        )?;
        array.load_latch(Latch::L1, e, ledger)?;
        let hit = array.sense_operands(
            &[Operand::Const(xi), Operand::Latch(Latch::L1, false)],
            SenseOp::And2,
            None,
            fault,
            ledger,
        )?;
        array.load_latch(Latch::L0, hit, ledger)?;
        let t = array.sense_operands(
            &[f, Operand::Latch(Latch::L0, false)],
            SenseOp::And2,
            None,
            fault,
            ledger,
        )?;
        array.load_latch(Latch::L0, t, ledger)?;
        let g_new = array.sense_operands(
            &[g, Operand::Latch(Latch::L0, false)],
            SenseOp::Or2,
            None,
            fault,
            ledger,
        )?;
        array.write_row(g_row, &g_new, ledger)?;
        let f_new = array.sense_operands(
            &[f, Operand::Latch(Latch::L1, true)],
            SenseOp::And2,
            None,
            fault,
            ledger,
        )?;
        array.write_row(f_row, &f_new, ledger)?;
        gt = Some(g_new);
    }
    Ok(gt.expect("plane has at least one row"))
}

fn greater_than_opt(
    array: &mut CrossbarArray,
    x: u64,
    plane: &RandomPlane,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    let n = array.cols();
    array.load_latch(Latch::L0, BitStream::zeros(n), ledger)?;
    array.load_latch(Latch::L1, BitStream::ones(n), ledger)?;
    for i in (0..plane.m).rev() {
        let xi = (x >> i) & 1 == 1;
        let e = array.sense_operands(
            &[Operand::Row(plane.row(i)), Operand::Const(xi)],
            SenseOp::Xor2,
            None,
            fault,
            ledger,
        )?;
        let t = array.sense_operands(
            &[Operand::Const(xi), Operand::Forward(&e)],
            SenseOp::And2,
            Some(Latch::L1),
            fault,
            ledger,
        )?;
        let gt = array.sense_operands(
            &[Operand::Latch(Latch::L0, false), Operand::Forward(&t)],
            SenseOp::Or2,
            None,
            fault,
            ledger,
        )?;
        array.load_latch(Latch::L0, gt, ledger)?;
        let flag = array.sense_operands(&[Operand::Forward(&e)], SenseOp::Not1, Some(Latch::L1), fault, ledger)?;
        array.load_latch(Latch::L1, flag, ledger)?;
    }
    Ok(array.latch(Latch::L0)?.clone())
}

/// Fresh array sized for one generation of `cfg`.
pub fn array_for(cfg: &SngConfig) -> Result<CrossbarArray> {
    CrossbarArray::new(DEFAULT_ROWS.max(rows_needed(cfg.m)), cfg.n)
}

/// Compares `x` against an already loaded plane and persists the result in
/// the row after the naive scratch rows.
pub fn generate_on_plane(
    array: &mut CrossbarArray,
    x: u64,
    plane: &RandomPlane,
    variant: SngVariant,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    let out = greater_than(array, x, plane, variant, fault, ledger)?;
    array.write_row(plane.end() + 2, &out, ledger)?;
    Ok(out)
}

/// Loads a plane from `cfg`, runs the comparator and writes the stream row.
pub fn generate(
    x: u64,
    cfg: &SngConfig,
    variant: SngVariant,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<BitStream> {
    cfg.validate()?;
    cfg.check_operand(x)?;
    let mut array = array_for(cfg)?;
    let plane = load_block(&mut array, 0, cfg.draw()?, ledger)?;
    generate_on_plane(&mut array, x, &plane, variant, fault, ledger)
}

/// Two streams. Correlated pairs share one plane; independent pairs read
/// `cfg`'s group and the next group up.
pub fn generate_pair(
    x: u64,
    y: u64,
    cfg: &SngConfig,
    correlated: bool,
    variant: SngVariant,
    fault: &mut FaultModel,
    ledger: &mut CostLedger,
) -> Result<(BitStream, BitStream)> {
    cfg.validate()?;
    cfg.check_operand(x)?;
    cfg.check_operand(y)?;
    if correlated {
        let mut array = array_for(cfg)?;
        let plane = load_block(&mut array, 0, cfg.draw()?, ledger)?;
        let a = generate_on_plane(&mut array, x, &plane, variant, fault, ledger)?;
        let b = generate_on_plane(&mut array, y, &plane, variant, fault, ledger)?;
        Ok((a, b))
    } else {
        let g = cfg.group.unwrap_or(0);
        let a = generate(x, &cfg.clone().with_group(g), variant, fault, ledger)?;
        let b = generate(y, &cfg.clone().with_group(g + 1), variant, fault, ledger)?;
        Ok((a, b))
    }
}
