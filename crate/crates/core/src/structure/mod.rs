//! Block signatures, strictly upper block-triangular (SUT) predicates, the
//! constant elementary matrices `N^(Ec)` / `N^(Er)`, canonical
//! characteristics of a nilpotent matrix and the Jordan permutation.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chebmat::{grid, linalg, MatrixFunction, VERIFY_GRID};
use crate::error::{Error, Result};

/// Relative singular-value threshold for numerical ranks.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Which SUT class a matrix function is meant to belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Columns,
    Rows,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Columns => "columns",
            Variant::Rows => "rows",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "col" | "cols" | "column" | "columns" => Ok(Variant::Columns),
            "row" | "rows" => Ok(Variant::Rows),
            other => Err(Error::Signature(format!("unknown variant '{other}'"))),
        }
    }
}

/// Block sizes `l_1, ..., l_mu` of a strictly upper block-triangular matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SignatureJson", into = "SignatureJson")]
pub struct BlockSignature {
    ells: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SignatureJson {
    mu: usize,
    ells: Vec<usize>,
}

impl TryFrom<SignatureJson> for BlockSignature {
    type Error = Error;
    fn try_from(j: SignatureJson) -> Result<Self> {
        if j.mu != j.ells.len() {
            return Err(Error::Signature(format!(
                "mu = {} but {} block sizes given",
                j.mu,
                j.ells.len()
            )));
        }
        BlockSignature::new(j.ells)
    }
}

impl From<BlockSignature> for SignatureJson {
    fn from(s: BlockSignature) -> Self {
        SignatureJson {
            mu: s.mu(),
            ells: s.ells,
        }
    }
}

impl BlockSignature {
    /// At least two blocks, all of positive size.
    pub fn new(ells: Vec<usize>) -> Result<Self> {
        if ells.len() < 2 {
            return Err(Error::Signature(format!(
                "need mu >= 2 blocks, got {}",
                ells.len()
            )));
        }
        if ells.contains(&0) {
            return Err(Error::Signature("block sizes must be positive".into()));
        }
        Ok(Self { ells })
    }

    /// Like [`new`](Self::new), additionally enforcing the ordering the
    /// variant requires.
    pub fn for_variant(ells: Vec<usize>, variant: Variant) -> Result<Self> {
        let s = Self::new(ells)?;
        s.check_variant(variant)?;
        Ok(s)
    }

    pub fn mu(&self) -> usize {
        self.ells.len()
    }

    pub fn ells(&self) -> &[usize] {
        &self.ells
    }

    pub fn m(&self) -> usize {
        self.ells.iter().sum()
    }

    /// Index of the first row/column of every block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.ells.len());
        let mut acc = 0;
        for &l in &self.ells {
            off.push(acc);
            acc += l;
        }
        off
    }

    /// `l_1 >= ... >= l_mu`.
    pub fn is_column_ordered(&self) -> bool {
        self.ells.windows(2).all(|w| w[0] >= w[1])
    }

    /// `l_1 <= ... <= l_mu`.
    pub fn is_row_ordered(&self) -> bool {
        self.ells.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn check_variant(&self, variant: Variant) -> Result<()> {
        let ok = match variant {
            Variant::Plain => true,
            Variant::Columns => self.is_column_ordered(),
            Variant::Rows => self.is_row_ordered(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Signature(format!(
                "block sizes {:?} are not ordered for the {variant} variant",
                self.ells
            )))
        }
    }

    /// Signature with the block order reversed.
    pub fn reversed(&self) -> Self {
        let mut ells = self.ells.clone();
        ells.reverse();
        Self { ells }
    }

    /// Rank of the secondary block `(i, i+1)` (0-based `i`) required by the
    /// variant.
    fn secondary_rank(&self, i: usize, variant: Variant) -> usize {
        match variant {
            Variant::Rows => self.ells[i],
            _ => self.ells[i + 1],
        }
    }
}

impl fmt::Display for BlockSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.ells.iter().map(|l| l.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// Canonical characteristics of a pair in standard canonical form.
///
/// `r` is the rank of the leading matrix `diag(I_d, N)`, `thetas[i]` is
/// `rank N^{i+1} - rank N^{i+2}` for `i = 0..mu-2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CharacteristicsJson", into = "CharacteristicsJson")]
pub struct Characteristics {
    m: usize,
    r: usize,
    thetas: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CharacteristicsJson {
    m: usize,
    r: usize,
    mu: usize,
    thetas: Vec<usize>,
    d: usize,
}

impl TryFrom<CharacteristicsJson> for Characteristics {
    type Error = Error;
    fn try_from(j: CharacteristicsJson) -> Result<Self> {
        let c = Characteristics::new(j.m, j.r, j.thetas)?;
        if c.mu() != j.mu || c.d() != j.d {
            return Err(Error::Characteristics(format!(
                "stored mu = {}, d = {} disagree with derived mu = {}, d = {}",
                j.mu,
                j.d,
                c.mu(),
                c.d()
            )));
        }
        Ok(c)
    }
}

impl From<Characteristics> for CharacteristicsJson {
    fn from(c: Characteristics) -> Self {
        CharacteristicsJson {
            m: c.m,
            r: c.r,
            mu: c.mu(),
            d: c.d(),
            thetas: c.thetas,
        }
    }
}

impl Characteristics {
    pub fn new(m: usize, r: usize, thetas: Vec<usize>) -> Result<Self> {
        if r >= m {
            return Err(Error::Characteristics(format!(
                "need r < m, got r = {r}, m = {m}"
            )));
        }
        if thetas.contains(&0) {
            return Err(Error::Characteristics("thetas must be positive".into()));
        }
        if thetas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Characteristics(format!(
                "thetas {thetas:?} must be nonincreasing"
            )));
        }
        let sum: usize = thetas.iter().sum();
        if sum > r {
            return Err(Error::Characteristics(format!(
                "d = r - sum(thetas) = {r} - {sum} is negative"
            )));
        }
        Ok(Self { m, r, thetas })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Nilpotency index; 1 when `N = 0`.
    pub fn mu(&self) -> usize {
        self.thetas.len() + 1
    }

    pub fn thetas(&self) -> &[usize] {
        &self.thetas
    }

    /// Dimension of the dynamic part.
    pub fn d(&self) -> usize {
        self.r - self.thetas.iter().sum::<usize>()
    }
}

/// A square matrix function together with the block signature it is meant
/// to respect. Construction checks the variant's predicate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SutMatrixFunction {
    n: MatrixFunction,
    sig: BlockSignature,
    variant: Variant,
}

impl SutMatrixFunction {
    pub fn new(n: MatrixFunction, sig: BlockSignature, variant: Variant, tol: f64) -> Result<Self> {
        let ok = match variant {
            Variant::Plain => is_sut(&n, &sig, tol)?,
            Variant::Columns => is_sut_columns(&n, &sig, tol)?,
            Variant::Rows => is_sut_rows(&n, &sig, tol)?,
        };
        if !ok {
            return Err(Error::Predicate(format!(
                "matrix function is not in the {variant} SUT class for signature {sig}"
            )));
        }
        Ok(Self { n, sig, variant })
    }

    /// Skips the predicate; for values produced by code that guarantees it.
    pub(crate) fn new_unchecked(n: MatrixFunction, sig: BlockSignature, variant: Variant) -> Self {
        Self { n, sig, variant }
    }

    pub fn n(&self) -> &MatrixFunction {
        &self.n
    }

    pub fn sig(&self) -> &BlockSignature {
        &self.sig
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn into_parts(self) -> (MatrixFunction, BlockSignature, Variant) {
        (self.n, self.sig, self.variant)
    }
}

fn check_dims(n: &MatrixFunction, sig: &BlockSignature) -> Result<()> {
    if !n.is_square() || n.rows() != sig.m() {
        return Err(Error::dim(
            "sut predicate",
            format!(
                "matrix is {:?}, signature {sig} has m = {}",
                n.shape(),
                sig.m()
            ),
        ));
    }
    Ok(())
}

/// All blocks on and below the block diagonal vanish within `tol` on the
/// verification grid.
pub fn is_sut(n: &MatrixFunction, sig: &BlockSignature, tol: f64) -> Result<bool> {
    check_dims(n, sig)?;
    let values = n.values_on(&grid(n.interval(), VERIFY_GRID));
    Ok(values.iter().all(|v| lower_part_max(v, sig) <= tol))
}

/// Largest entry in the blocks `(i, j)` with `i >= j`.
pub(crate) fn lower_part_max(v: &DMatrix<f64>, sig: &BlockSignature) -> f64 {
    let off = sig.offsets();
    let ells = sig.ells();
    let mut worst = 0.0_f64;
    for i in 0..sig.mu() {
        let cols = off[i] + ells[i];
        let blk = v.view((off[i], 0), (ells[i], cols));
        worst = worst.max(blk.iter().fold(0.0, |a, x| a.max(x.abs())));
    }
    worst
}

pub fn is_sut_columns(n: &MatrixFunction, sig: &BlockSignature, tol: f64) -> Result<bool> {
    sig.check_variant(Variant::Columns)?;
    secondary_ranks_hold(n, sig, Variant::Columns, tol)
}

pub fn is_sut_rows(n: &MatrixFunction, sig: &BlockSignature, tol: f64) -> Result<bool> {
    sig.check_variant(Variant::Rows)?;
    secondary_ranks_hold(n, sig, Variant::Rows, tol)
}

fn secondary_ranks_hold(
    n: &MatrixFunction,
    sig: &BlockSignature,
    variant: Variant,
    tol: f64,
) -> Result<bool> {
    if !is_sut(n, sig, tol)? {
        return Ok(false);
    }
    Ok(min_secondary_singular(n, sig, variant, VERIFY_GRID)? > tol)
}

/// Smallest retained singular value of the secondary blocks over a grid:
/// the `l_{i+1}`-th (columns) or `l_i`-th (rows) singular value of block
/// `(i, i+1)`.
pub fn min_secondary_singular(
    n: &MatrixFunction,
    sig: &BlockSignature,
    variant: Variant,
    grid_size: usize,
) -> Result<f64> {
    check_dims(n, sig)?;
    let off = sig.offsets();
    let ells = sig.ells();
    let mut worst = f64::INFINITY;
    for v in n.values_on(&grid(n.interval(), grid_size)) {
        for i in 0..sig.mu() - 1 {
            let blk = v
                .view((off[i], off[i + 1]), (ells[i], ells[i + 1]))
                .into_owned();
            let s = linalg::singular_values(&blk);
            let k = sig.secondary_rank(i, variant);
            worst = worst.min(s.get(k - 1).copied().unwrap_or(0.0));
        }
    }
    Ok(worst)
}

/// `N^(Ec)`: secondary blocks `[I_{l_{i+1}}; 0]`, everything else zero.
pub fn elementary_col(sig: &BlockSignature) -> Result<DMatrix<f64>> {
    sig.check_variant(Variant::Columns)?;
    let off = sig.offsets();
    let ells = sig.ells();
    let mut n = DMatrix::zeros(sig.m(), sig.m());
    for i in 0..sig.mu() - 1 {
        for j in 0..ells[i + 1] {
            n[(off[i] + j, off[i + 1] + j)] = 1.0;
        }
    }
    Ok(n)
}

/// `N^(Er)`: secondary blocks `[0 I_{l_i}]`, everything else zero.
pub fn elementary_row(sig: &BlockSignature) -> Result<DMatrix<f64>> {
    sig.check_variant(Variant::Rows)?;
    let off = sig.offsets();
    let ells = sig.ells();
    let mut n = DMatrix::zeros(sig.m(), sig.m());
    for i in 0..sig.mu() - 1 {
        let shift = ells[i + 1] - ells[i];
        for j in 0..ells[i] {
            n[(off[i] + j, off[i + 1] + shift + j)] = 1.0;
        }
    }
    Ok(n)
}

/// Elementary matrix of the requested variant.
pub fn elementary(sig: &BlockSignature, variant: Variant) -> Result<DMatrix<f64>> {
    match variant {
        Variant::Columns => elementary_col(sig),
        Variant::Rows => elementary_row(sig),
        Variant::Plain => Err(Error::Signature(
            "elementary matrices exist only for the columns and rows variants".into(),
        )),
    }
}

/// Numerical rank with threshold `rel * max(sigma_max, floor)`.
pub fn numerical_rank(a: &DMatrix<f64>, rel: f64, floor: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = linalg::singular_values(a);
    let thr = rel * s.first().copied().unwrap_or(0.0).max(floor);
    s.iter().filter(|&&x| x > thr).count()
}

/// Ranks of `N, N^2, ...` up to and including the first zero power.
pub fn rank_profile(n: &DMatrix<f64>) -> Result<Vec<usize>> {
    if !n.is_square() {
        return Err(Error::dim("rank_profile", "matrix is not square"));
    }
    let dim = n.nrows();
    if dim == 0 {
        return Ok(vec![0]);
    }
    let scale = linalg::max_singular(n).max(1.0);
    let mut ranks = Vec::new();
    let mut p = n.clone();
    for k in 1..=dim + 1 {
        // powers of a nilpotent matrix can be much smaller than N itself;
        // compare against the scale of N^k
        let rk = numerical_rank(&p, RANK_REL_TOL, scale.powi(k as i32));
        ranks.push(rk);
        if rk == 0 {
            return Ok(ranks);
        }
        if k > dim {
            break;
        }
        p = &p * n;
    }
    Err(Error::NotNilpotent)
}

/// Characteristics of the pair `{diag(I_d, N), diag(Omega, I)}` from its
/// constant nilpotent block. `r_total` is the rank of the leading matrix and
/// must equal `d + rank N`.
pub fn characteristics_from_nilpotent(
    n: &DMatrix<f64>,
    r_total: usize,
    d: usize,
) -> Result<Characteristics> {
    let ranks = rank_profile(n)?;
    let rank_n = ranks[0];
    if r_total != d + rank_n {
        return Err(Error::Characteristics(format!(
            "r = {r_total} but d + rank N = {d} + {rank_n}"
        )));
    }
    // ranks = (rank N, rank N^2, ..., 0); theta_i = rank N^{i+1} - rank N^{i+2}
    let thetas: Vec<usize> = ranks.windows(2).map(|w| w[0] - w[1]).collect();
    let c = Characteristics::new(d + n.nrows(), r_total, thetas)?;
    debug_assert_eq!(c.mu(), ranks.len());
    Ok(c)
}

/// Block signature matching the characteristics. Column variant:
/// `l_1 = m - r`, `l_{i+1} = theta_{i-1}`; row variant is the reversal.
pub fn signature_from_characteristics(
    c: &Characteristics,
    m_nilpotent: usize,
    variant: Variant,
) -> Result<BlockSignature> {
    if c.m() - c.d() != m_nilpotent {
        return Err(Error::Characteristics(format!(
            "nilpotent dimension {m_nilpotent} differs from m - d = {}",
            c.m() - c.d()
        )));
    }
    let mut ells = Vec::with_capacity(c.mu());
    ells.push(c.m() - c.r());
    ells.extend_from_slice(c.thetas());
    if ells.iter().sum::<usize>() != m_nilpotent {
        return Err(Error::Characteristics(format!(
            "block sizes {ells:?} do not add up to {m_nilpotent}"
        )));
    }
    match variant {
        Variant::Columns => {}
        Variant::Rows => ells.reverse(),
        Variant::Plain => {
            return Err(Error::Signature(
                "signature_from_characteristics needs the columns or rows variant".into(),
            ))
        }
    }
    let sig = BlockSignature::new(ells)?;
    sig.check_variant(variant)?;
    Ok(sig)
}

/// Jordan block orders of the nilpotent part, mapped to their counts.
/// Orders with zero count are omitted.
pub fn jordan_blocks(c: &Characteristics) -> Result<BTreeMap<usize, usize>> {
    // with theta_{mu-1} = 0 appended, order k+1 appears theta_{k-1} - theta_k
    // times and order 1 appears m - r - theta_0 times
    let mut th: Vec<i64> = c.thetas().iter().map(|&t| t as i64).collect();
    th.push(0);
    let mut out = BTreeMap::new();
    let ones = c.m() as i64 - c.r() as i64 - th[0];
    let mut counts = vec![(1usize, ones)];
    for k in 1..th.len() {
        counts.push((k + 1, th[k - 1] - th[k]));
    }
    for (order, count) in counts {
        if count < 0 {
            return Err(Error::Characteristics(format!(
                "negative number {count} of Jordan blocks of order {order}"
            )));
        }
        if count > 0 {
            out.insert(order, count as usize);
        }
    }
    let total: usize = out.iter().map(|(o, c)| o * c).sum();
    if total != c.m() - c.d() {
        return Err(Error::Characteristics(format!(
            "Jordan blocks cover {total} rows, nilpotent part has {}",
            c.m() - c.d()
        )));
    }
    Ok(out)
}

/// Permutation `pi` such that `P N P^T` is a direct sum of nilpotent
/// Jordan blocks, where `P[s, pi[s]] = 1` and `N` is the elementary matrix
/// of the variant. Blocks come out by decreasing order; equal orders keep
/// the position order of their chains.
pub fn jordan_permutation(sig: &BlockSignature, variant: Variant) -> Result<Vec<usize>> {
    sig.check_variant(variant)?;
    let off = sig.offsets();
    let ells = sig.ells();
    let longest = *ells.iter().max().expect("signature has blocks");
    let mut pi = Vec::with_capacity(sig.m());
    for j in 0..longest {
        match variant {
            // chain j runs through row j of every block long enough
            Variant::Columns => {
                for i in 0..sig.mu() {
                    if ells[i] > j {
                        pi.push(off[i] + j);
                    }
                }
            }
            // chains are right-aligned: j counts from the end of each block
            Variant::Rows => {
                for i in 0..sig.mu() {
                    if ells[i] > j {
                        pi.push(off[i] + ells[i] - 1 - j);
                    }
                }
            }
            Variant::Plain => {
                return Err(Error::Signature(
                    "jordan_permutation needs the columns or rows variant".into(),
                ))
            }
        }
    }
    Ok(pi)
}

/// Matrix `P` with `P[s, pi[s]] = 1`.
pub fn permutation_matrix(pi: &[usize]) -> DMatrix<f64> {
    let n = pi.len();
    let mut p = DMatrix::zeros(n, n);
    for (s, &j) in pi.iter().enumerate() {
        p[(s, j)] = 1.0;
    }
    p
}

/// Nilpotent Jordan matrix with the given block orders along the diagonal.
pub fn jordan_matrix(orders: &[usize]) -> DMatrix<f64> {
    let m: usize = orders.iter().sum();
    let mut j = DMatrix::zeros(m, m);
    let mut o = 0;
    for &k in orders {
        for i in 0..k.saturating_sub(1) {
            j[(o + i, o + i + 1)] = 1.0;
        }
        o += k;
    }
    j
}

#[cfg(test)]
mod tests;
