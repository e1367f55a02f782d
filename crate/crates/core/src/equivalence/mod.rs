//! Equivalence transformations `{E, F} -> {L E K, L F K + L E K'}` of
//! linear time-varying DAE pairs, with composition, inversion, grid
//! verification and the two constructions that normalize `F` to `I`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chebmat::{
    self, grid, linalg, min_singular_on_grid, norm_inf, try_fit, Interval, MatrixFunction,
    SINGULARITY_THRESHOLD, VERIFY_GRID,
};
use crate::error::{Error, Result};

/// Grid used for nonsingularity certificates.
pub const CERT_GRID: usize = 2 * VERIFY_GRID + 1;

/// The pair `{E, F}` of the DAE `E x' + F x = q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaePair {
    #[serde(rename = "E")]
    e: MatrixFunction,
    #[serde(rename = "F")]
    f: MatrixFunction,
}

impl DaePair {
    pub fn new(e: MatrixFunction, f: MatrixFunction) -> Result<Self> {
        if !e.is_square() || e.shape() != f.shape() {
            return Err(Error::dim(
                "DaePair",
                format!("E is {:?}, F is {:?}", e.shape(), f.shape()),
            ));
        }
        if e.interval() != f.interval() {
            return Err(Error::IntervalMismatch { op: "DaePair" });
        }
        Ok(Self { e, f })
    }

    pub fn e(&self) -> &MatrixFunction {
        &self.e
    }

    pub fn f(&self) -> &MatrixFunction {
        &self.f
    }

    pub fn m(&self) -> usize {
        self.e.rows()
    }

    pub fn interval(&self) -> Interval {
        self.e.interval()
    }
}

/// Smallest singular value found on the certificate grid and its node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub min_sigma: f64,
    pub t: f64,
}

impl Certificate {
    pub fn of(m: &MatrixFunction) -> Result<Self> {
        let (min_sigma, t) = if m.is_constant() {
            let c = &m.coeffs()[0];
            let s = linalg::min_singular(c);
            (s, m.interval().mid())
        } else {
            min_singular_on_grid(m, CERT_GRID.max(4 * m.degree() + 1))?
        };
        Ok(Self { min_sigma, t })
    }

    fn require(self) -> Result<Self> {
        if self.min_sigma <= SINGULARITY_THRESHOLD {
            return Err(Error::NearSingular {
                t: self.t,
                sigma: self.min_sigma,
            });
        }
        Ok(self)
    }
}

/// Pointwise nonsingular `L`, `K` with their certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformJson", try_from = "TransformJson")]
pub struct EquivalenceTransform {
    l: MatrixFunction,
    k: MatrixFunction,
    cert_l: Certificate,
    cert_k: Certificate,
}

#[derive(Serialize, Deserialize)]
struct TransformJson {
    #[serde(rename = "L")]
    l: MatrixFunction,
    #[serde(rename = "K")]
    k: MatrixFunction,
    certificates: CertificatesJson,
}

#[derive(Serialize, Deserialize)]
struct CertificatesJson {
    #[serde(rename = "L")]
    l: Certificate,
    #[serde(rename = "K")]
    k: Certificate,
}

impl From<EquivalenceTransform> for TransformJson {
    fn from(t: EquivalenceTransform) -> Self {
        TransformJson {
            l: t.l,
            k: t.k,
            certificates: CertificatesJson {
                l: t.cert_l,
                k: t.cert_k,
            },
        }
    }
}

impl TryFrom<TransformJson> for EquivalenceTransform {
    type Error = Error;
    // certificates are recomputed rather than trusted
    fn try_from(j: TransformJson) -> Result<Self> {
        EquivalenceTransform::new(j.l, j.k)
    }
}

impl EquivalenceTransform {
    pub fn new(l: MatrixFunction, k: MatrixFunction) -> Result<Self> {
        if !l.is_square() || l.shape() != k.shape() {
            return Err(Error::dim(
                "EquivalenceTransform",
                format!("L is {:?}, K is {:?}", l.shape(), k.shape()),
            ));
        }
        if l.interval() != k.interval() {
            return Err(Error::IntervalMismatch {
                op: "EquivalenceTransform",
            });
        }
        let cert_l = Certificate::of(&l)?.require()?;
        let cert_k = Certificate::of(&k)?.require()?;
        Ok(Self {
            l,
            k,
            cert_l,
            cert_k,
        })
    }

    pub fn identity(m: usize, interval: Interval) -> Self {
        let i = MatrixFunction::identity(m, interval);
        let cert = Certificate {
            min_sigma: 1.0,
            t: interval.mid(),
        };
        Self {
            l: i.clone(),
            k: i,
            cert_l: cert,
            cert_k: cert,
        }
    }

    /// Transform with constant factors.
    pub fn constant(l: DMatrix<f64>, k: DMatrix<f64>, interval: Interval) -> Result<Self> {
        Self::new(
            MatrixFunction::constant(l, interval),
            MatrixFunction::constant(k, interval),
        )
    }

    pub fn l(&self) -> &MatrixFunction {
        &self.l
    }

    pub fn k(&self) -> &MatrixFunction {
        &self.k
    }

    pub fn certificates(&self) -> (Certificate, Certificate) {
        (self.cert_l, self.cert_k)
    }

    pub fn m(&self) -> usize {
        self.k.rows()
    }

    pub fn interval(&self) -> Interval {
        self.k.interval()
    }

    /// `{L E K, L F K + L E K'}`.
    pub fn apply(&self, p: &DaePair) -> Result<DaePair> {
        if p.m() != self.m() {
            return Err(Error::dim(
                "apply",
                format!("transform is {}, pair is {}", self.m(), p.m()),
            ));
        }
        let le = self.l.mul(&p.e)?;
        let e = le.mul(&self.k)?;
        let f = MatrixFunction::mul_chain(&[&self.l, &p.f, &self.k])?
            .add(&le.mul(&self.k.derivative())?)?;
        DaePair::new(e, f)
    }

    /// `(L^{-1}, K^{-1})`, which maps `apply(self, p)` back to `p`.
    pub fn inverse(&self, tol: f64) -> Result<Self> {
        Self::new(
            chebmat::inverse(&self.l, tol)?,
            chebmat::inverse(&self.k, tol)?,
        )
    }

    /// Blocks `diag(I_d, L)`, `diag(I_d, K)`.
    pub fn lift(&self, d: usize) -> Result<Self> {
        if d == 0 {
            return Ok(self.clone());
        }
        let i = MatrixFunction::identity(d, self.interval());
        Ok(Self {
            l: MatrixFunction::block_diag(&[&i, &self.l], self.interval())?,
            k: MatrixFunction::block_diag(&[&i, &self.k], self.interval())?,
            cert_l: Certificate {
                min_sigma: self.cert_l.min_sigma.min(1.0),
                t: self.cert_l.t,
            },
            cert_k: Certificate {
                min_sigma: self.cert_k.min_sigma.min(1.0),
                t: self.cert_k.t,
            },
        })
    }
}

/// `t1` first, then `t2`: `K = K1 K2`, `L = L2 L1`.
pub fn compose(
    t1: &EquivalenceTransform,
    t2: &EquivalenceTransform,
) -> Result<EquivalenceTransform> {
    if t1.m() != t2.m() {
        return Err(Error::dim("compose", format!("{} vs {}", t1.m(), t2.m())));
    }
    if t1.interval() != t2.interval() {
        return Err(Error::IntervalMismatch { op: "compose" });
    }
    EquivalenceTransform::new(t2.l.mul(&t1.l)?, t1.k.mul(&t2.k)?)
}

/// Grid residuals of `p~ = apply(T, p)` in the induced infinity norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    #[serde(rename = "residual_E")]
    pub residual_e: f64,
    #[serde(rename = "residual_F")]
    pub residual_f: f64,
    pub worst_t: f64,
    pub pass: bool,
}

pub fn verify(
    t: &EquivalenceTransform,
    p: &DaePair,
    p_tilde: &DaePair,
    grid_size: usize,
    tol: f64,
) -> Result<VerifyReport> {
    if p.m() != t.m() || p_tilde.m() != t.m() {
        return Err(Error::dim("verify", "pair and transform sizes differ"));
    }
    let kd = t.k.derivative();
    let mut report = VerifyReport {
        residual_e: 0.0,
        residual_f: 0.0,
        worst_t: t.interval().a(),
        pass: true,
    };
    let mut worst = -1.0;
    for s in grid(t.interval(), grid_size) {
        let (l, k) = (t.l.at(s), t.k.at(s));
        let le = &l * p.e.at(s);
        let re = norm_inf(&(&le * &k - p_tilde.e.at(s)));
        let rf = norm_inf(&(&l * p.f.at(s) * &k + &le * kd.at(s) - p_tilde.f.at(s)));
        report.residual_e = report.residual_e.max(re);
        report.residual_f = report.residual_f.max(rf);
        if re.max(rf) > worst {
            worst = re.max(rf);
            report.worst_t = s;
        }
    }
    report.pass = report.residual_e <= tol && report.residual_f <= tol;
    Ok(report)
}

fn lu_inverse(m: DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    m.try_inverse().ok_or(Error::NearSingular { t, sigma: 0.0 })
}

fn require_nonsingular_on_grid<F>(interval: Interval, mut sample: F) -> Result<Certificate>
where
    F: FnMut(f64) -> DMatrix<f64>,
{
    let mut cert = Certificate {
        min_sigma: f64::INFINITY,
        t: interval.a(),
    };
    for s in grid(interval, CERT_GRID) {
        let m = sample(s);
        if m.nrows() == 0 {
            continue;
        }
        let sigma = linalg::min_singular(&m);
        if sigma < cert.min_sigma {
            cert = Certificate {
                min_sigma: sigma,
                t: s,
            };
        }
    }
    cert.require()
}

/// With `G = F K + E K'` and `L = G^{-1}`, the transform `(L, K)` maps
/// `{E, F}` to `{L E K, I}`. Returns the transform and `Ê = L E K`.
pub fn lemma_inner(
    p: &DaePair,
    k: &MatrixFunction,
    tol: f64,
) -> Result<(EquivalenceTransform, MatrixFunction)> {
    if k.shape() != (p.m(), p.m()) {
        return Err(Error::dim("lemma_inner", "K does not match the pair"));
    }
    let kd = k.derivative();
    let g = |s: f64| p.f.at(s) * k.at(s) + p.e.at(s) * kd.at(s);
    require_nonsingular_on_grid(p.interval(), g)?;
    let l = try_fit(p.interval(), tol, |s| lu_inverse(g(s), s))?;
    let e_hat = try_fit(p.interval(), tol, |s| {
        let rhs = p.e.at(s) * k.at(s);
        g(s).lu()
            .solve(&rhs)
            .ok_or(Error::NearSingular { t: s, sigma: 0.0 })
    })?;
    Ok((EquivalenceTransform::new(l, k.clone())?, e_hat))
}

/// Output of [`lemma_triangular`].
#[derive(Clone, Debug)]
pub struct TriangularStep {
    pub transform: EquivalenceTransform,
    /// `Ê = L E K`.
    pub e_hat: MatrixFunction,
    /// `H = I + K^{-1} E K'`.
    pub h: MatrixFunction,
    /// Whether `K^{-1} E K'` was strictly upper or strictly lower triangular
    /// on the certificate grid, which makes `H` unipotent.
    pub h_triangular: bool,
    pub h_certificate: Certificate,
}

/// With `H = I + K^{-1} E K'` and `L = (K + E K')^{-1} = H^{-1} K^{-1}`,
/// the transform `(L, K)` maps `{E, I}` to `{L E K, I}`.
pub fn lemma_triangular(
    e: &MatrixFunction,
    k: &MatrixFunction,
    tol: f64,
) -> Result<TriangularStep> {
    if !e.is_square() || e.shape() != k.shape() {
        return Err(Error::dim(
            "lemma_triangular",
            "E and K must be square of one size",
        ));
    }
    let interval = e.interval();
    let n = e.rows();
    let kd = k.derivative();
    let constant_k = k.is_constant();
    let h_at = |s: f64| -> Result<DMatrix<f64>> {
        let ekd = e.at(s) * kd.at(s);
        let x = k
            .at(s)
            .lu()
            .solve(&ekd)
            .ok_or(Error::NearSingular { t: s, sigma: 0.0 })?;
        Ok(DMatrix::identity(n, n) + x)
    };

    let mut triangular = true;
    let mut cert = Certificate {
        min_sigma: f64::INFINITY,
        t: interval.a(),
    };
    if !constant_k {
        for s in grid(interval, CERT_GRID) {
            let h = h_at(s)?;
            let x = &h - DMatrix::<f64>::identity(n, n);
            let scale = chebmat::max_abs(&x).max(1.0) * 1e-10;
            triangular &= strictly_upper(&x, scale) || strictly_upper(&x.transpose(), scale);
            let sigma = linalg::min_singular(&h);
            if sigma < cert.min_sigma {
                cert = Certificate {
                    min_sigma: sigma,
                    t: s,
                };
            }
        }
        cert = cert.require()?;
    } else {
        cert.min_sigma = 1.0;
    }

    let (l, h) = if constant_k {
        let kinv = chebmat::inverse(k, tol)?;
        (kinv, MatrixFunction::identity(n, interval))
    } else {
        let l = try_fit(interval, tol, |s| {
            lu_inverse(k.at(s) + e.at(s) * kd.at(s), s)
        })?;
        let h = try_fit(interval, tol, h_at)?;
        (l, h)
    };
    let e_hat = if constant_k {
        MatrixFunction::mul_chain(&[&l, e, k])?
    } else {
        try_fit(interval, tol, |s| {
            let rhs = e.at(s) * k.at(s);
            (k.at(s) + e.at(s) * kd.at(s))
                .lu()
                .solve(&rhs)
                .ok_or(Error::NearSingular { t: s, sigma: 0.0 })
        })?
    };
    Ok(TriangularStep {
        transform: EquivalenceTransform::new(l, k.clone())?,
        e_hat,
        h,
        h_triangular: triangular,
        h_certificate: cert,
    })
}

/// Entries on and below the diagonal are at most `tol`.
fn strictly_upper(x: &DMatrix<f64>, tol: f64) -> bool {
    (0..x.nrows()).all(|i| (0..=i.min(x.ncols().saturating_sub(1))).all(|j| x[(i, j)].abs() <= tol))
}
