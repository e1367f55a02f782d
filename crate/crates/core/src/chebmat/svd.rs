//! Smooth singular value decomposition of a constant-rank matrix function.
//!
//! Pointwise SVDs carry arbitrary signs, orderings, and bases inside
//! degenerate subspaces. A continuous branch is selected in two passes:
//!
//! 1. a skeleton pass walks an ascending Chebyshev grid and aligns every
//!    pointwise factorization with its predecessor (assignment of singular
//!    triplets by overlap, sign correction, Procrustes rotation inside
//!    clusters and null spaces);
//! 2. the skeleton is interpolated into a low-accuracy smooth reference,
//!    and the adaptive fit aligns each freshly computed pointwise SVD with
//!    that reference at the same `t`.
//!
//! The second pass makes the sampled factors a function of `t` alone, which
//! the Chebyshev fit needs.

use nalgebra::{DMatrix, DVector};

use super::linalg;

use super::{grid, interpolate, max_abs, try_fit, MatrixFunction};
use super::{CHECK_TOL, FIT_TOL, RANK_GAP_TOL, VERIFY_GRID};
use crate::error::{Error, Result};

/// Chop level of the skeleton reference. It filters the rounding noise of
/// pointwise factors near close singular values, yet stays accurate enough
/// that regrouped branches keep `U^T M V` diagonal to about 1e-10 * gap.
const REF_CHOP: f64 = 1e-10;

/// Factors `M(t) = U(t) S(t) V(t)^T` with orthogonal `U`, `V` and `S`
/// carrying the singular values on its diagonal (not necessarily sorted:
/// branches keep their identity through crossings).
#[derive(Clone, Debug)]
pub struct SvdTriple {
    pub u: MatrixFunction,
    pub s: MatrixFunction,
    pub v: MatrixFunction,
    /// Number of nonzero singular values.
    pub rank: usize,
}

#[derive(Clone, Debug)]
pub struct SvdOptions {
    pub tol: f64,
    /// Number of skeleton nodes.
    pub skeleton: usize,
    pub rank_gap_tol: f64,
    /// Relative spacing below which singular values are treated as equal.
    pub cluster_tol: f64,
    /// Branches whose relative spacing drops below this anywhere on the
    /// skeleton are aligned as one group over the whole interval.
    pub couple_tol: f64,
    pub check_tol: f64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            tol: FIT_TOL,
            skeleton: 129,
            rank_gap_tol: RANK_GAP_TOL,
            cluster_tol: 1e-10,
            couple_tol: 1e-2,
            check_tol: CHECK_TOL,
        }
    }
}

/// Smooth SVD with default options and fit tolerance `tol`.
pub fn smooth_svd(m: &MatrixFunction, tol: f64) -> Result<SvdTriple> {
    smooth_svd_with(
        m,
        &SvdOptions {
            tol,
            ..SvdOptions::default()
        },
    )
}

pub fn smooth_svd_with(m: &MatrixFunction, opts: &SvdOptions) -> Result<SvdTriple> {
    let (r, c) = m.shape();
    let interval = m.interval();
    if r == 0 || c == 0 {
        return Ok(SvdTriple {
            u: MatrixFunction::identity(r, interval),
            s: MatrixFunction::zeros(r, c, interval),
            v: MatrixFunction::identity(c, interval),
            rank: 0,
        });
    }

    // Skeleton pass.
    let nodes = grid(interval, opts.skeleton.max(3));
    let first = pointwise(&m.at(nodes[0]));
    let rank = numerical_rank(&first.sigma, opts.rank_gap_tol);
    let mut frames = Vec::with_capacity(nodes.len());
    let mut prev = canonical_first(first, rank);
    frames.push(prev.clone());
    for &t in &nodes[1..] {
        let f = pointwise(&m.at(t));
        check_rank(&f.sigma, rank, opts.rank_gap_tol, t)?;
        let aligned = align(f, rank, &prev.u, &prev.v, opts.cluster_tol)
            .map_err(|e| Error::Alignment(format!("skeleton node t = {t}: {e}")))?;
        frames.push(aligned.clone());
        prev = aligned;
    }

    // Smooth reference through the skeleton (points(n) run from +1 to -1).
    let ref_u: Vec<_> = frames.iter().rev().map(|f| f.u.clone()).collect();
    let ref_v: Vec<_> = frames.iter().rev().map(|f| f.v.clone()).collect();
    let ref_u = interpolate(interval, &ref_u, REF_CHOP)?;
    let ref_v = interpolate(interval, &ref_v, REF_CHOP)?;
    let groups = coupled_groups(&frames, rank, opts.couple_tol);

    let packed = try_fit(interval, opts.tol, |t| {
        let mt = m.at(t);
        let f = pointwise(&mt);
        check_rank(&f.sigma, rank, opts.rank_gap_tol, t)?;
        let (ru, rv) = (ref_u.at(t), ref_v.at(t));
        let mut a = align(f, rank, &ru, &rv, opts.cluster_tol)
            .map_err(|e| Error::Alignment(format!("t = {t}: {e}")))?;
        for g in &groups {
            regroup(&mut a, g, &mt, &ru, &rv)
                .map_err(|e| Error::Alignment(format!("t = {t}: {e}")))?;
        }
        let mut z = DMatrix::zeros(r + c, r + c);
        z.view_mut((0, 0), (r, r)).copy_from(&a.u);
        z.view_mut((r, r), (c, c)).copy_from(&a.v);
        for (i, s) in a.sigma.iter().enumerate() {
            z[(i, r + i)] = *s;
        }
        Ok(z)
    })?;
    let triple = SvdTriple {
        u: packed.block(0, 0, r, r),
        s: packed.block(0, r, r, c),
        v: packed.block(r, r, c, c),
        rank,
    };

    let res = triple.residuals(m, VERIFY_GRID);
    let scale = m.max_abs_on(&grid(interval, VERIFY_GRID)).max(1.0);
    if res.orthogonality_u > opts.check_tol
        || res.orthogonality_v > opts.check_tol
        || res.reconstruction > opts.check_tol * scale
    {
        return Err(Error::Alignment(format!("verification residuals {res:?}")));
    }
    Ok(triple)
}

/// Verification residuals of an [`SvdTriple`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SvdResiduals {
    pub orthogonality_u: f64,
    pub orthogonality_v: f64,
    pub reconstruction: f64,
}

impl SvdTriple {
    pub fn residuals(&self, m: &MatrixFunction, grid_size: usize) -> SvdResiduals {
        let (r, c) = m.shape();
        let mut out = SvdResiduals::default();
        for t in grid(m.interval(), grid_size) {
            let (u, s, v) = (self.u.at(t), self.s.at(t), self.v.at(t));
            let iu = DMatrix::<f64>::identity(r, r);
            let iv = DMatrix::<f64>::identity(c, c);
            out.orthogonality_u = out.orthogonality_u.max(max_abs(&(u.transpose() * &u - iu)));
            out.orthogonality_v = out.orthogonality_v.max(max_abs(&(v.transpose() * &v - iv)));
            out.reconstruction = out
                .reconstruction
                .max(max_abs(&(&u * s * v.transpose() - m.at(t))));
        }
        out
    }
}

#[derive(Clone, Debug)]
struct Frame {
    sigma: Vec<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

fn pointwise(m: &DMatrix<f64>) -> Frame {
    let s = linalg::svd(m);
    Frame {
        sigma: s.sigma,
        u: s.u,
        v: s.v,
    }
}

fn numerical_rank(sigma: &[f64], gap: f64) -> usize {
    let thr = gap * sigma.first().copied().unwrap_or(0.0).max(1.0);
    sigma.iter().filter(|&&s| s > thr).count()
}

fn check_rank(sigma: &[f64], rank: usize, gap: f64, t: f64) -> Result<()> {
    let got = numerical_rank(sigma, gap);
    if got != rank {
        return Err(Error::ConstantRank {
            t,
            detail: format!("rank {got}, expected {rank}"),
        });
    }
    Ok(())
}

/// Orthogonal polar factor of a square matrix; `None` when the matrix is
/// too close to singular for the factor to be well defined.
fn polar(a: &DMatrix<f64>, min_sigma: f64) -> Option<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Some(a.clone());
    }
    let s = linalg::svd(a);
    if s.sigma.last().copied().unwrap_or(0.0) < min_sigma {
        return None;
    }
    Some(s.u * s.v.transpose())
}

// Singular-triplet clusters among the first `rank` sorted values.
fn clusters(sigma: &[f64], rank: usize, tol: f64) -> Vec<Vec<usize>> {
    let scale = sigma.first().copied().unwrap_or(1.0).max(1.0);
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..rank {
        match out.last_mut() {
            Some(cl) if sigma[cl[cl.len() - 1]] - sigma[i] <= tol * scale => cl.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// First skeleton frame: align with the identity where that is well posed,
/// otherwise fix signs so the largest entry of each vector is positive.
fn canonical_first(f: Frame, rank: usize) -> Frame {
    let (r, c) = (f.u.nrows(), f.v.nrows());
    let mut out = f.clone();
    for cl in clusters(&f.sigma, rank, 1e-10) {
        let uc = f.u.select_columns(cl.iter());
        let vc = f.v.select_columns(cl.iter());
        let iu = DMatrix::<f64>::identity(r, r).select_columns(cl.iter());
        let iv = DMatrix::<f64>::identity(c, c).select_columns(cl.iter());
        let a = uc.transpose() * iu + vc.transpose() * iv;
        let q = match polar(&a, 1e-3) {
            Some(q) => q,
            None if cl.len() == 1 => {
                DMatrix::from_element(1, 1, largest_entry_sign(&uc.column(0).into_owned()))
            }
            None => DMatrix::identity(cl.len(), cl.len()),
        };
        let (uq, vq) = (uc * &q, vc * &q);
        for (k, &i) in cl.iter().enumerate() {
            out.u.set_column(i, &uq.column(k));
            out.v.set_column(i, &vq.column(k));
        }
    }
    out.u = canonical_null(&out.u, rank);
    out.v = canonical_null(&out.v, rank);
    out
}

fn canonical_null(basis: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let n = basis.nrows();
    let mut out = basis.clone();
    if rank >= n {
        return out;
    }
    let null = basis.columns(rank, n - rank).into_owned();
    let target = DMatrix::<f64>::identity(n, n)
        .columns(rank, n - rank)
        .into_owned();
    let q = match polar(&(null.transpose() * target), 1e-3) {
        Some(q) => q,
        None => {
            let mut q = DMatrix::identity(n - rank, n - rank);
            for k in 0..n - rank {
                q[(k, k)] = largest_entry_sign(&null.column(k).into_owned());
            }
            q
        }
    };
    out.columns_mut(rank, n - rank).copy_from(&(null * q));
    out
}

fn largest_entry_sign(v: &DVector<f64>) -> f64 {
    let mut best = 0.0_f64;
    for x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = *x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Branches that come close to each other somewhere on the skeleton. Near
/// such an approach the pointwise singular vectors are only determined to
/// about `eps / gap`; the sum of their subspaces is well determined.
fn coupled_groups(frames: &[Frame], rank: usize, tol: f64) -> Vec<Vec<usize>> {
    let scale = frames
        .iter()
        .flat_map(|f| f.sigma.iter().take(rank))
        .fold(1.0_f64, |a, &b| a.max(b));
    let mut parent: Vec<usize> = (0..rank).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..rank {
        for j in i + 1..rank {
            let close = frames
                .iter()
                .any(|f| (f.sigma[i] - f.sigma[j]).abs() <= tol * scale);
            if close {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..rank {
        let r = root(&mut parent, i);
        match groups.iter_mut().find(|g| g[0] == r) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups.retain(|g| g.len() > 1);
    groups
}

/// Replaces the branch vectors of a coupled group by the orthonormal basis
/// of their joint subspace closest to the reference. The group's singular
/// values become the diagonal of `U^T M V` in that basis; the dropped
/// off-diagonal part is caught by the final reconstruction check.
fn regroup(
    a: &mut Frame,
    g: &[usize],
    m: &DMatrix<f64>,
    ref_u: &DMatrix<f64>,
    ref_v: &DMatrix<f64>,
) -> std::result::Result<(), String> {
    let uc = a.u.select_columns(g.iter());
    let vc = a.v.select_columns(g.iter());
    let w = uc.transpose() * ref_u.select_columns(g.iter())
        + vc.transpose() * ref_v.select_columns(g.iter());
    let q = polar(&w, 1e-3).ok_or_else(|| "reference lost track of a coupled group".to_string())?;
    let (uq, vq) = (uc * &q, vc * &q);
    let c = uq.transpose() * m * &vq;
    for (k, &j) in g.iter().enumerate() {
        a.u.set_column(j, &uq.column(k));
        a.v.set_column(j, &vq.column(k));
        a.sigma[j] = c[(k, k)];
    }
    Ok(())
}

/// Aligns a sorted pointwise factorization with reference factors.
fn align(
    f: Frame,
    rank: usize,
    ref_u: &DMatrix<f64>,
    ref_v: &DMatrix<f64>,
    cluster_tol: f64,
) -> std::result::Result<Frame, String> {
    let (r, c) = (f.u.nrows(), f.v.nrows());
    let cls = clusters(&f.sigma, rank, cluster_tol);

    // Slot s belongs to cluster owner[s]; weight = captured reference energy.
    let mut owner = Vec::with_capacity(rank);
    for (ci, cl) in cls.iter().enumerate() {
        owner.extend(std::iter::repeat_n(ci, cl.len()));
    }
    let mut weight = DMatrix::zeros(cls.len(), rank);
    for (ci, cl) in cls.iter().enumerate() {
        let uc = f.u.select_columns(cl.iter());
        let vc = f.v.select_columns(cl.iter());
        for j in 0..rank {
            let pu = uc.transpose() * ref_u.column(j);
            let pv = vc.transpose() * ref_v.column(j);
            weight[(ci, j)] = pu.norm_squared() + pv.norm_squared();
        }
    }
    let mut cost = DMatrix::zeros(rank, rank);
    for s in 0..rank {
        for j in 0..rank {
            cost[(s, j)] = -weight[(owner[s], j)];
        }
    }
    let slot_to_ref = assign(&cost);

    let mut out = Frame {
        sigma: vec![0.0; rank],
        u: DMatrix::zeros(r, r),
        v: DMatrix::zeros(c, c),
    };
    let mut s = 0;
    for cl in &cls {
        let mut targets: Vec<usize> = (s..s + cl.len()).map(|k| slot_to_ref[k]).collect();
        targets.sort_unstable();
        s += cl.len();
        let uc = f.u.select_columns(cl.iter());
        let vc = f.v.select_columns(cl.iter());
        let ru = ref_u.select_columns(targets.iter());
        let rv = ref_v.select_columns(targets.iter());
        let a = uc.transpose() * ru + vc.transpose() * rv;
        let q = polar(&a, 1e-3).ok_or_else(|| {
            format!(
                "reference lost track of singular values {:?}",
                cl.iter().map(|&i| f.sigma[i]).collect::<Vec<_>>()
            )
        })?;
        let (uq, vq) = (uc * &q, vc * &q);
        for (k, &j) in targets.iter().enumerate() {
            out.u.set_column(j, &uq.column(k));
            out.v.set_column(j, &vq.column(k));
            out.sigma[j] = f.sigma[cl[k]];
        }
    }
    for (basis, reference, target) in [(&f.u, ref_u, &mut out.u), (&f.v, ref_v, &mut out.v)] {
        let n = basis.nrows();
        if rank < n {
            let null = basis.columns(rank, n - rank);
            let rn = reference.columns(rank, n - rank);
            let q = polar(&(null.transpose() * rn), 1e-3)
                .ok_or_else(|| "reference lost track of the null space".to_string())?;
            target.columns_mut(rank, n - rank).copy_from(&(null * q));
        }
    }
    Ok(out)
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials). Returns the column assigned to each row.
fn assign(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays, column 0 is a sentinel.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
