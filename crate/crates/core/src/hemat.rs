//! Encrypted matrices in row (RP), column (CP), row-compact (RCP) and
//! column-compact (CCP) layouts.
//!
//! RP puts row `r` in ciphertext `r`; CP puts column `c` in ciphertext `c`.
//! RCP flattens row-major and CCP column-major, `s` values per ciphertext.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::{layer_eval, CompiledLayer, EvalOptions, PackedVector, WeightRow};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::model::Shape;
use crate::slot::{PlainVec, SlotBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Layout {
    Rp,
    Cp,
    Rcp,
    Ccp,
}

impl Layout {
    pub const ALL: [Layout; 4] = [Layout::Rp, Layout::Cp, Layout::Rcp, Layout::Ccp];

    /// `(ciphertext, slot)` of element `(r, c)` of an `m×n` matrix.
    pub fn position(self, r: usize, c: usize, m: usize, n: usize, s: usize) -> (usize, usize) {
        match self {
            Layout::Rp => (r, c),
            Layout::Cp => (c, r),
            Layout::Rcp => {
                let p = r * n + c;
                (p / s, p % s)
            }
            Layout::Ccp => {
                let p = c * m + r;
                (p / s, p % s)
            }
        }
    }

    pub fn ciphertext_count(self, m: usize, n: usize, s: usize) -> usize {
        match self {
            Layout::Rp => m,
            Layout::Cp => n,
            Layout::Rcp | Layout::Ccp => (m * n).div_ceil(s),
        }
    }

    /// The layout holding the same slots for the transposed matrix.
    pub fn transposed(self) -> Layout {
        match self {
            Layout::Rp => Layout::Cp,
            Layout::Cp => Layout::Rp,
            Layout::Rcp => Layout::Ccp,
            Layout::Ccp => Layout::Rcp,
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(t: u8) -> Result<Self> {
        Layout::ALL.get(t as usize).copied().ok_or_else(|| Error::format(format!("unknown layout tag {t}")))
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RP" => Ok(Layout::Rp),
            "CP" => Ok(Layout::Cp),
            "RCP" => Ok(Layout::Rcp),
            "CCP" => Ok(Layout::Ccp),
            _ => Err(Error::Layout(format!("unknown layout {s:?}"))),
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layout::Rp => "RP",
            Layout::Cp => "CP",
            Layout::Rcp => "RCP",
            Layout::Ccp => "CCP",
        })
    }
}

/// Row-major integer matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlainMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
    #[serde(default)]
    pub scale_bits: u32,
}

impl PlainMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!("{} entries for a {rows}×{cols} matrix", data.len())));
        }
        Ok(PlainMatrix { rows, cols, data, scale_bits: 0 })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        PlainMatrix { rows, cols, data: vec![0; rows * cols], scale_bits: 0 }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = 1;
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        PlainMatrix { rows: self.cols, cols: self.rows, data, scale_bits: self.scale_bits }
    }

    /// Exact product (no modulus); `None` on i64 overflow.
    pub fn checked_mul(&self, other: &PlainMatrix) -> Option<PlainMatrix> {
        if self.cols != other.rows {
            return None;
        }
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = 0i64;
                for j in 0..self.cols {
                    acc = acc.checked_add(self.get(r, j).checked_mul(other.get(j, c))?)?;
                }
                data.push(acc);
            }
        }
        Some(PlainMatrix { rows: self.rows, cols: other.cols, data, scale_bits: self.scale_bits + other.scale_bits })
    }

    /// Entries reduced to centered residues mod `t`.
    pub fn centered(&self, t: u64) -> PlainMatrix {
        let t = t as i128;
        let data = self
            .data
            .iter()
            .map(|&v| {
                let r = (v as i128).rem_euclid(t);
                (if r > t / 2 { r - t } else { r }) as i64
            })
            .collect();
        PlainMatrix { data, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct EncMatrix<C> {
    pub rows: usize,
    pub cols: usize,
    pub layout: Layout,
    pub slots_used: usize,
    pub cts: Vec<C>,
    pub scale_bits: u32,
}

fn check_shape(layout: Layout, m: usize, n: usize, s: usize, slot_count: usize) -> Result<()> {
    if s == 0 || s > slot_count {
        return Err(Error::InvalidParams(format!("slots_used {s} must be in 1..={slot_count}")));
    }
    if m == 0 || n == 0 {
        return Err(Error::dim(format!("empty {m}×{n} matrix")));
    }
    let per_ct = match layout {
        Layout::Rp => n,
        Layout::Cp => m,
        Layout::Rcp | Layout::Ccp => 1,
    };
    if per_ct > s {
        return Err(Error::Layout(format!("{layout} of a {m}×{n} matrix needs {per_ct} slots per ciphertext, s = {s}")));
    }
    Ok(())
}

/// Encrypts `m` in `layout` with `s` slots per ciphertext.
pub fn pack_matrix<B: SlotBackend>(backend: &B, m: &PlainMatrix, layout: Layout, s: usize) -> Result<EncMatrix<B::Ciphertext>> {
    check_shape(layout, m.rows, m.cols, s, backend.slot_count())?;
    let k = layout.ciphertext_count(m.rows, m.cols, s);
    let mut plains = vec![vec![0i64; backend.slot_count()]; k];
    for r in 0..m.rows {
        for c in 0..m.cols {
            let (ct, slot) = layout.position(r, c, m.rows, m.cols, s);
            plains[ct][slot] = m.get(r, c);
        }
    }
    let cts = plains.into_iter().map(|p| backend.encrypt(&PlainVec(p))).collect::<Result<Vec<_>>>()?;
    Ok(EncMatrix { rows: m.rows, cols: m.cols, layout, slots_used: s, cts, scale_bits: m.scale_bits })
}

pub fn unpack_matrix<B: SlotBackend>(backend: &B, e: &EncMatrix<B::Ciphertext>) -> Result<PlainMatrix> {
    let plains = e.cts.iter().map(|c| backend.decrypt(c)).collect::<Result<Vec<_>>>()?;
    let mut out = PlainMatrix::zeros(e.rows, e.cols);
    out.scale_bits = e.scale_bits;
    for r in 0..e.rows {
        for c in 0..e.cols {
            let (ct, slot) = e.layout.position(r, c, e.rows, e.cols, e.slots_used);
            out.data[r * e.cols + c] = plains[ct].as_slice()[slot];
        }
    }
    Ok(out)
}

/// Moves every element `(r, c)` with `r < rows`, `c < cols` of `src` to the
/// same coordinates of a `rows×cols` matrix in `layout`: one masked CMult
/// per group of elements sharing source ciphertext, destination ciphertext
/// and shift, then a rotation and accumulation. Consumes one level.
pub fn relayout<B: SlotBackend>(
    backend: &B,
    src: &EncMatrix<B::Ciphertext>,
    layout: Layout,
    s: usize,
    rows: usize,
    cols: usize,
) -> Result<EncMatrix<B::Ciphertext>> {
    let n = backend.slot_count();
    check_shape(layout, rows, cols, s, n)?;
    let mut groups: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    for r in 0..rows.min(src.rows) {
        for c in 0..cols.min(src.cols) {
            let (sc, ss) = src.layout.position(r, c, src.rows, src.cols, src.slots_used);
            let (dc, ds) = layout.position(r, c, rows, cols, s);
            let shift = (ss + n - ds) % n;
            groups.entry((sc, dc, shift)).or_default().push(ss);
        }
    }
    let k = layout.ciphertext_count(rows, cols, s);
    let moved: Vec<(usize, B::Ciphertext)> = groups
        .into_par_iter()
        .map(|((sc, dc, shift), slots)| -> Result<_> {
            let mut mask = vec![0i64; n];
            for slot in slots {
                mask[slot] = 1;
            }
            let masked = backend.cmult(&src.cts[sc], &PlainVec(mask))?;
            let placed = if shift == 0 { masked } else { backend.rotate(&masked, shift as i64)? };
            Ok((dc, placed))
        })
        .collect::<Result<_>>()?;
    let mut acc: Vec<Option<B::Ciphertext>> = vec![None; k];
    for (dc, ct) in moved {
        acc[dc] = Some(match acc[dc].take() {
            Some(prev) => backend.add(&prev, &ct)?,
            None => ct,
        });
    }
    let cts = acc
        .into_iter()
        .map(|c| c.map_or_else(|| backend.encrypt_zero(), Ok))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncMatrix { rows, cols, layout, slots_used: s, cts, scale_bits: src.scale_bits })
}

/// Same matrix in another layout; a no-op when the layout is unchanged.
pub fn convert_layout<B: SlotBackend>(
    backend: &B,
    e: &EncMatrix<B::Ciphertext>,
    target: Layout,
) -> Result<EncMatrix<B::Ciphertext>> {
    if target == e.layout {
        return Ok(e.clone());
    }
    relayout(backend, e, target, e.slots_used, e.rows, e.cols)
}

pub fn mat_add<B: SlotBackend>(
    backend: &B,
    a: &EncMatrix<B::Ciphertext>,
    b: &EncMatrix<B::Ciphertext>,
) -> Result<EncMatrix<B::Ciphertext>> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(Error::dim(format!("cannot add {}×{} and {}×{}", a.rows, a.cols, b.rows, b.cols)));
    }
    if a.layout != b.layout || a.slots_used != b.slots_used {
        return Err(Error::Layout(format!(
            "cannot add {} (s={}) and {} (s={})",
            a.layout, a.slots_used, b.layout, b.slots_used
        )));
    }
    let cts = a.cts.iter().zip(&b.cts).map(|(x, y)| backend.add(x, y)).collect::<Result<Vec<_>>>()?;
    Ok(EncMatrix { cts, ..a.clone_header() })
}

/// Transpose by relabeling: the slots of RCP(M) are CCP(Mᵀ), and RP(M) is
/// CP(Mᵀ). No homomorphic operations.
pub fn mat_transpose<C: Clone>(e: &EncMatrix<C>) -> EncMatrix<C> {
    EncMatrix {
        rows: e.cols,
        cols: e.rows,
        layout: e.layout.transposed(),
        slots_used: e.slots_used,
        cts: e.cts.clone(),
        scale_bits: e.scale_bits,
    }
}

impl<C> EncMatrix<C> {
    fn clone_header(&self) -> EncMatrix<C> {
        EncMatrix {
            rows: self.rows,
            cols: self.cols,
            layout: self.layout,
            slots_used: self.slots_used,
            cts: Vec::new(),
            scale_bits: self.scale_bits,
        }
    }
}

/// `C = A·B`. Square RCP×CCP inputs with `2d² ≤ slot_count` and `d² ≤ s`
/// take the diagonal algorithm directly (depth 1 Mult + 1 CMult, `d` Mults).
/// Other shapes are first moved into a zero-padded `D×D` frame; when even
/// that does not fit one ciphertext the row-by-column fallback is used.
pub fn mat_mul<B: SlotBackend>(
    backend: &B,
    a: &EncMatrix<B::Ciphertext>,
    b: &EncMatrix<B::Ciphertext>,
) -> Result<EncMatrix<B::Ciphertext>> {
    if a.cols != b.rows {
        return Err(Error::dim(format!("cannot multiply {}×{} by {}×{}", a.rows, a.cols, b.rows, b.cols)));
    }
    let n = backend.slot_count();
    let d = a.rows;
    if a.layout == Layout::Rcp
        && b.layout == Layout::Ccp
        && a.cols == d
        && b.cols == d
        && d * d <= a.slots_used
        && d * d <= b.slots_used
        && 2 * d * d <= n
    {
        return square_mat_mul(backend, a, b);
    }
    let big = a.rows.max(a.cols).max(b.cols);
    if 2 * big * big <= n {
        let pa = relayout(backend, a, Layout::Rcp, n, big, big)?;
        let pb = relayout(backend, b, Layout::Ccp, n, big, big)?;
        let pc = square_mat_mul(backend, &pa, &pb)?;
        return relayout(backend, &pc, Layout::Rcp, a.slots_used.max(1), a.rows, b.cols);
    }
    row_column_mat_mul(backend, a, b)
}

/// The diagonal algorithm for `d×d` RCP × CCP in one ciphertext each.
///
/// `B2 = B + B≫d²` lets a left rotation by `i·d` present column block
/// `(r+i) mod d` next to row `r` of A without wrap-around. For each `i`,
/// `partial_sum(A ⊙ B2≪id, d)` leaves `C[r][(r+i) mod d]` at slot `r·d`,
/// which is masked and rotated to slot `r·d + (r+i) mod d`.
fn square_mat_mul<B: SlotBackend>(
    backend: &B,
    a: &EncMatrix<B::Ciphertext>,
    b: &EncMatrix<B::Ciphertext>,
) -> Result<EncMatrix<B::Ciphertext>> {
    let d = a.rows;
    let n = backend.slot_count();
    let (ac, bc) = (&a.cts[0], &b.cts[0]);
    let mut b2 = backend.add(bc, &backend.rotate(bc, -((d * d) as i64))?)?;
    let mut c: Option<B::Ciphertext> = None;
    for i in 0..d {
        let p = backend.mult(ac, &b2)?;
        let sums = backend.partial_sum(&p, d)?;
        let placed: Vec<B::Ciphertext> = (0..d)
            .into_par_iter()
            .map(|r| -> Result<_> {
                let masked = backend.cmult(&sums, &PlainVec::one_hot(r * d, n))?;
                let col = (r + i) % d;
                if col == 0 {
                    Ok(masked)
                } else {
                    backend.rotate(&masked, -(col as i64))
                }
            })
            .collect::<Result<_>>()?;
        for t in placed {
            c = Some(match c {
                Some(prev) => backend.add(&prev, &t)?,
                None => t,
            });
        }
        if i + 1 < d {
            b2 = backend.rotate(&b2, d as i64)?;
        }
    }
    Ok(EncMatrix {
        rows: d,
        cols: d,
        layout: Layout::Rcp,
        slots_used: a.slots_used,
        cts: vec![c.expect("d ≥ 1")],
        scale_bits: a.scale_bits + b.scale_bits,
    })
}

/// Fallback for shapes whose padded square does not fit one ciphertext:
/// A by rows, B by columns, one Mult + AllSum per output entry.
fn row_column_mat_mul<B: SlotBackend>(
    backend: &B,
    a: &EncMatrix<B::Ciphertext>,
    b: &EncMatrix<B::Ciphertext>,
) -> Result<EncMatrix<B::Ciphertext>> {
    let n = backend.slot_count();
    let inner = a.cols;
    if inner > n {
        return Err(Error::dim(format!("inner dimension {inner} exceeds {n} slots")));
    }
    let ar = convert_layout(backend, a, Layout::Rp)?;
    let bc = convert_layout(backend, b, Layout::Cp)?;
    let (m, p, s) = (a.rows, b.cols, a.slots_used);
    let k = Layout::Rcp.ciphertext_count(m, p, s);
    let mask = PlainVec::one_hot(0, n);
    let entries: Vec<(usize, B::Ciphertext)> = (0..m * p)
        .into_par_iter()
        .map(|idx| -> Result<_> {
            let (r, c) = (idx / p, idx % p);
            let prod = backend.mult(&ar.cts[r], &bc.cts[c])?;
            let sum = backend.all_sum(&prod, inner)?;
            let masked = backend.cmult(&sum, &mask)?;
            let (ct, slot) = Layout::Rcp.position(r, c, m, p, s);
            Ok((ct, if slot == 0 { masked } else { backend.rotate(&masked, -(slot as i64))? }))
        })
        .collect::<Result<_>>()?;
    let mut acc: Vec<Option<B::Ciphertext>> = vec![None; k];
    for (ct, t) in entries {
        acc[ct] = Some(match acc[ct].take() {
            Some(prev) => backend.add(&prev, &t)?,
            None => t,
        });
    }
    let cts = acc.into_iter().map(|c| c.map_or_else(|| backend.encrypt_zero(), Ok)).collect::<Result<Vec<_>>>()?;
    Ok(EncMatrix { rows: m, cols: p, layout: Layout::Rcp, slots_used: s, cts, scale_bits: a.scale_bits + b.scale_bits })
}

/// `y = W·x` for a plaintext `W` and an encrypted vector `x` (`n×1` or
/// `1×n`, compact layout). Consumes two levels.
pub fn plain_mat_mul<B: SlotBackend>(
    backend: &B,
    w: &PlainMatrix,
    x: &EncMatrix<B::Ciphertext>,
) -> Result<EncMatrix<B::Ciphertext>> {
    let len = x.rows * x.cols;
    if x.rows != 1 && x.cols != 1 {
        return Err(Error::dim(format!("{}×{} is not a vector", x.rows, x.cols)));
    }
    if !matches!(x.layout, Layout::Rcp | Layout::Ccp) {
        return Err(Error::Layout(format!("vector must be compactly packed, found {}", x.layout)));
    }
    if w.cols != len {
        return Err(Error::dim(format!("{}×{} matrix times a length-{len} vector", w.rows, w.cols)));
    }
    let s = x.slots_used;
    let rows = (0..w.rows)
        .map(|r| {
            let entries = (0..w.cols).map(|c| (c as u32, w.get(r, c))).collect();
            WeightRow::new(entries, 0, r, s)
        })
        .collect();
    let layer = CompiledLayer {
        rows,
        in_len: len,
        out_shape: Shape::new(1, w.rows, 1),
        slots_used: s,
        scale_bits: w.scale_bits,
    };
    let pv = PackedVector { len, slots_used: s, cts: x.cts.clone(), shape: Shape::new(1, len, 1), scale_bits: x.scale_bits };
    let y = layer_eval(backend, &layer, &pv, EvalOptions::default())?;
    Ok(EncMatrix { rows: w.rows, cols: 1, layout: Layout::Rcp, slots_used: s, cts: y.cts, scale_bits: y.scale_bits })
}

const MATRIX_MAGIC: &[u8; 4] = b"PHEM";

/// Serialized encrypted matrix: header plus ciphertext blobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncMatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub layout: Layout,
    pub slots_used: usize,
    pub scale_bits: u32,
    pub params_hash: u64,
    pub ciphertexts: Vec<Vec<u8>>,
}

impl EncMatrixFile {
    pub fn from_matrix<B: SlotBackend>(backend: &B, e: &EncMatrix<B::Ciphertext>) -> Self {
        EncMatrixFile {
            rows: e.rows,
            cols: e.cols,
            layout: e.layout,
            slots_used: e.slots_used,
            scale_bits: e.scale_bits,
            params_hash: backend.params().hash(),
            ciphertexts: e.cts.iter().map(|c| backend.encode_ciphertext(c)).collect(),
        }
    }

    pub fn to_matrix<B: SlotBackend>(&self, backend: &B) -> Result<EncMatrix<B::Ciphertext>> {
        if self.params_hash != backend.params().hash() {
            return Err(Error::ParamMismatch);
        }
        check_shape(self.layout, self.rows, self.cols, self.slots_used, backend.slot_count())?;
        Ok(EncMatrix {
            rows: self.rows,
            cols: self.cols,
            layout: self.layout,
            slots_used: self.slots_used,
            cts: self.ciphertexts.iter().map(|b| backend.decode_ciphertext(b)).collect::<Result<_>>()?,
            scale_bits: self.scale_bits,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MATRIX_MAGIC, 1);
        w.u32(self.rows as u32)
            .u32(self.cols as u32)
            .u8(self.layout.tag())
            .u32(self.slots_used as u32)
            .u32(self.scale_bits)
            .u64(self.params_hash)
            .u32(self.ciphertexts.len() as u32);
        for c in &self.ciphertexts {
            w.blob(c);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, MATRIX_MAGIC)?;
        if version != 1 {
            return Err(Error::format(format!("unsupported matrix version {version}")));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let layout = Layout::from_tag(r.u8()?)?;
        let slots_used = r.u32()? as usize;
        let scale_bits = r.u32()?;
        let params_hash = r.u64()?;
        let count = r.u32()? as usize;
        if slots_used == 0 || count != layout.ciphertext_count(rows, cols, slots_used) {
            return Err(Error::format(format!("{count} ciphertexts do not match a {rows}×{cols} {layout} matrix")));
        }
        let ciphertexts = (0..count).map(|_| r.blob().map(<[u8]>::to_vec)).collect::<Result<_>>()?;
        r.finish()?;
        Ok(EncMatrixFile { rows, cols, layout, slots_used, scale_bits, params_hash, ciphertexts })
    }
}
