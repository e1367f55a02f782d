//! Seeded generation of SUT instances, SCF pairs, scrambled equivalent pairs
//! with their ground-truth transforms, manufactured problems, and corpus
//! files on disk.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, index)`,
//! so instance `i` of a corpus does not depend on how many instances are
//! generated or in which order.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chebmat::{fit, Interval, MatrixFunction, DEGREE_CAP, FIT_TOL, VERIFY_GRID};
use crate::dae::{assemble, to_dae_pair, ScfPair};
use crate::equivalence::{verify, DaePair, EquivalenceTransform};
use crate::error::{Error, Result};
use crate::structure::{BlockSignature, Characteristics, SutMatrixFunction, Variant};

/// Amplitude of the polynomial wiggle on the diagonal of the `D` factors.
const WIGGLE: f64 = 0.1;
/// Amplitude of the Givens angles in the `Q` factors.
const ANGLE: f64 = 0.5;
const DEFAULT_SCRAMBLE: f64 = 0.3;

/// Parameters of one generated SUT instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub sig: BlockSignature,
    pub variant: Variant,
    pub interval: Interval,
    pub entry_degree: usize,
    pub seed: u64,
    /// Upper bound for the singular values of the secondary blocks; the
    /// lower bound is about `1 - WIGGLE`.
    pub conditioning: f64,
}

impl GenSpec {
    pub fn new(
        sig: BlockSignature,
        variant: Variant,
        entry_degree: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            sig,
            variant,
            interval: Interval::unit(),
            entry_degree,
            seed,
            conditioning: 4.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entry_degree > DEGREE_CAP {
            return Err(Error::Signature(format!(
                "entry degree {} exceeds the cap {DEGREE_CAP}",
                self.entry_degree
            )));
        }
        if !(self.conditioning >= 1.0) {
            return Err(Error::Signature(format!(
                "conditioning must be at least 1, got {}",
                self.conditioning
            )));
        }
        self.sig.check_variant(self.variant)
    }
}

/// Random stream for instance `index` of a run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Chebyshev coefficients of a random polynomial of degree `deg` with
/// `|p| <= 1` and `|p'| <= 1` on `[-1, 1]` (`|T_k'| <= k^2`).
fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s: f64 = c
        .iter()
        .enumerate()
        .map(|(k, x)| x.abs() * (k * k).max(1) as f64)
        .sum();
    if s > 0.0 {
        c.iter_mut().for_each(|x| *x /= s);
    }
    c
}

fn eval_poly(c: &[f64], x: f64) -> f64 {
    // Clenshaw on [-1, 1]
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + c[0]
}

/// A matrix of random polynomials, evaluated lazily.
struct PolyMatrix {
    rows: usize,
    cols: usize,
    polys: Vec<Vec<f64>>,
    scale: f64,
}

impl PolyMatrix {
    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, deg: usize, scale: f64) -> Self {
        Self {
            rows,
            cols,
            polys: (0..rows * cols).map(|_| random_poly(rng, deg)).collect(),
            scale,
        }
    }

    fn at(&self, x: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.scale * eval_poly(&self.polys[i * self.cols + j], x)
        })
    }
}

/// `G_1 ... G_n` with Givens rotations in random planes and polynomial angles.
struct Rotations {
    dim: usize,
    planes: Vec<(usize, usize)>,
    angles: Vec<Vec<f64>>,
    amplitude: f64,
}

impl Rotations {
    fn random(rng: &mut ChaCha8Rng, dim: usize, deg: usize, amplitude: f64) -> Self {
        let count = if dim < 2 { 0 } else { dim };
        let mut planes = Vec::with_capacity(count);
        let mut angles = Vec::with_capacity(count);
        for _ in 0..count {
            let i = rng.random_range(0..dim);
            let mut j = rng.random_range(0..dim - 1);
            if j >= i {
                j += 1;
            }
            planes.push((i, j));
            let mut a = random_poly(rng, deg);
            // a constant offset so that degree-0 rotations are not all trivial
            a[0] += rng.random_range(-1.0..1.0);
            angles.push(a);
        }
        Self {
            dim,
            planes,
            angles,
            amplitude,
        }
    }

    fn at(&self, x: f64) -> DMatrix<f64> {
        let mut q = DMatrix::identity(self.dim, self.dim);
        for (&(i, j), a) in self.planes.iter().zip(&self.angles) {
            let (s, c) = (self.amplitude * eval_poly(a, x)).sin_cos();
            // q <- q * G
            for r in 0..self.dim {
                let (qi, qj) = (q[(r, i)], q[(r, j)]);
                q[(r, i)] = c * qi + s * qj;
                q[(r, j)] = -s * qi + c * qj;
            }
        }
        q
    }
}

/// `Q(t) [D(t); 0]` (or its transpose form for rows) for one secondary block.
struct Secondary {
    q: Rotations,
    base: Vec<f64>,
    wiggle: Vec<Vec<f64>>,
}

impl Secondary {
    fn random(rng: &mut ChaCha8Rng, big: usize, small: usize, spec: &GenSpec) -> Self {
        let q = Rotations::random(rng, big, spec.entry_degree, ANGLE);
        let base = (0..small)
            .map(|_| {
                let v = if spec.conditioning > 1.0 {
                    rng.random_range(1.0..=spec.conditioning)
                } else {
                    1.0
                };
                if rng.random_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let wiggle = (0..small)
            .map(|_| random_poly(rng, spec.entry_degree))
            .collect();
        Self { q, base, wiggle }
    }

    // big x small, full column rank
    fn tall(&self, x: f64) -> DMatrix<f64> {
        let big = self.q.dim;
        let mut d = DMatrix::zeros(big, self.base.len());
        for (j, (b, w)) in self.base.iter().zip(&self.wiggle).enumerate() {
            d[(j, j)] = b + b.signum() * WIGGLE * eval_poly(w, x);
        }
        self.q.at(x) * d
    }
}

fn to_unit(interval: Interval, t: f64) -> f64 {
    ((t - interval.mid()) / interval.half_width()).clamp(-1.0, 1.0)
}

/// Random SUT matrix function of the given signature and variant, built so
/// that its secondary blocks have full rank with singular values in
/// `[1 - WIGGLE, conditioning + WIGGLE]`.
pub fn random_sut(spec: &GenSpec) -> Result<SutMatrixFunction> {
    random_sut_indexed(spec, 0)
}

/// Instance `index` of the stream seeded by `spec.seed`.
pub fn random_sut_indexed(spec: &GenSpec, index: u64) -> Result<SutMatrixFunction> {
    spec.validate()?;
    let mut rng = stream(spec.seed, index);
    let n = sut_function(&mut rng, spec)?;
    SutMatrixFunction::new(n, spec.sig.clone(), spec.variant, 1e-8)
}

fn sut_function(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Result<MatrixFunction> {
    let sig = &spec.sig;
    let ells = sig.ells();
    let off = sig.offsets();
    let mu = sig.mu();
    let secondary: Vec<Secondary> = (0..mu - 1)
        .map(|i| {
            let (big, small) = match spec.variant {
                Variant::Rows => (ells[i + 1], ells[i]),
                _ => (ells[i], ells[i + 1]),
            };
            Secondary::random(rng, big, small, spec)
        })
        .collect();
    let mut fill = Vec::new();
    for i in 0..mu {
        for j in i + 2..mu {
            fill.push((
                i,
                j,
                PolyMatrix::random(rng, ells[i], ells[j], spec.entry_degree, 1.0),
            ));
        }
    }
    let m = sig.m();
    let interval = spec.interval;
    let variant = spec.variant;
    fit(interval, FIT_TOL, |t| {
        let x = to_unit(interval, t);
        let mut n = DMatrix::zeros(m, m);
        for (i, s) in secondary.iter().enumerate() {
            let b = match variant {
                Variant::Rows => s.tall(x).transpose(),
                _ => s.tall(x),
            };
            n.view_mut((off[i], off[i + 1]), (ells[i], ells[i + 1]))
                .copy_from(&b);
        }
        for (i, j, p) in &fill {
            n.view_mut((off[*i], off[*j]), (ells[*i], ells[*j]))
                .copy_from(&p.at(x));
        }
        n
    })
}

/// Random `d x d` block for the dynamic part with entries bounded by 1.
pub fn random_omega(
    rng: &mut ChaCha8Rng,
    d: usize,
    deg: usize,
    interval: Interval,
) -> Result<MatrixFunction> {
    let p = PolyMatrix::random(rng, d, d, deg, 1.0);
    fit(interval, FIT_TOL, |t| p.at(to_unit(interval, t)))
}

/// SCF pair with a random `Omega` of size `d` and a random nilpotent part.
pub fn random_scf(spec: &GenSpec, d: usize, index: u64) -> Result<ScfPair> {
    spec.validate()?;
    let mut rng = stream(spec.seed, index);
    let n = sut_function(&mut rng, spec)?;
    let omega = random_omega(&mut rng, d, spec.entry_degree, spec.interval)?;
    assemble(omega, n)?.with_structure(spec.sig.clone(), spec.variant)
}

/// Characteristics of an SCF pair whose nilpotent part has signature `sig`
/// in the class `variant` and whose dynamic part has size `d`.
pub fn ground_truth(sig: &BlockSignature, variant: Variant, d: usize) -> Result<Characteristics> {
    let mut ells = sig.ells().to_vec();
    if variant == Variant::Rows {
        ells.reverse();
    }
    let m = d + sig.m();
    Characteristics::new(m, m - ells[0], ells[1..].to_vec())
}

/// `(I + S) R` with `S` small strictly lower triangular and `R` a product of
/// rotations, both polynomial in the angles.
fn random_factor(
    rng: &mut ChaCha8Rng,
    m: usize,
    deg: usize,
    magnitude: f64,
    interval: Interval,
) -> Result<MatrixFunction> {
    let s = PolyMatrix::random(rng, m, m, deg, magnitude / (m.max(1) as f64).sqrt());
    let r = Rotations::random(rng, m, deg, magnitude);
    fit(interval, FIT_TOL, |t| {
        let x = to_unit(interval, t);
        let mut u = s.at(x);
        for i in 0..m {
            for j in i..m {
                u[(i, j)] = if i == j { 1.0 } else { 0.0 };
            }
        }
        u * r.at(x)
    })
}

/// Scrambling transform for `m`: `K = (I + S_K) R_K`, `L = R_L^T (I + S_L)^T`.
/// `magnitude = 0` gives the identity.
pub fn random_transform(
    m: usize,
    seed: u64,
    degree: usize,
    magnitude: f64,
    interval: Interval,
) -> Result<EquivalenceTransform> {
    let mut rng = stream(seed, u64::MAX);
    let k = random_factor(&mut rng, m, degree, magnitude, interval)?;
    let l = random_factor(&mut rng, m, degree, magnitude, interval)?.transpose();
    EquivalenceTransform::new(l, k)
}

/// A pair and a general equivalent of it, with the transform between them
/// and the verification residual measured at generation time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scrambled {
    pub pair: DaePair,
    pub transform: EquivalenceTransform,
    pub residual: f64,
}

/// `p~ = apply(T_true, p)` for a random `T_true`.
pub fn scramble(p: &ScfPair, seed: u64, degree: usize) -> Result<Scrambled> {
    scramble_with(p, seed, degree, DEFAULT_SCRAMBLE)
}

pub fn scramble_with(p: &ScfPair, seed: u64, degree: usize, magnitude: f64) -> Result<Scrambled> {
    let t = random_transform(p.m(), seed, degree, magnitude, p.interval())?;
    let src = to_dae_pair(p)?;
    let pair = t.apply(&src)?;
    let report = verify(&t, &src, &pair, VERIFY_GRID, 1e-9)?;
    if !report.pass {
        return Err(Error::Residual {
            op: "scramble",
            residual: report.residual_e.max(report.residual_f),
            tol: 1e-9,
        });
    }
    Ok(Scrambled {
        pair,
        transform: t,
        residual: report.residual_e.max(report.residual_f),
    })
}

/// Scrambles an SCF pair without leaving the SCF class: `K` is block upper
/// triangular for the signature of `N` (plus a change of basis of the
/// dynamic part) and `L` restores `F = diag(Omega~, I)`. The result has a
/// different, time-varying `N` of the same signature and variant.
pub fn scramble_scf(
    p: &ScfPair,
    seed: u64,
    degree: usize,
) -> Result<(ScfPair, EquivalenceTransform)> {
    let sig = p
        .sig()
        .cloned()
        .ok_or_else(|| Error::Signature("pair carries no block signature".into()))?;
    let interval = p.interval();
    let mut rng = stream(seed, u64::MAX - 1);
    let d = p.d();
    let mag = DEFAULT_SCRAMBLE;
    let k1 = random_factor(&mut rng, d, degree, mag, interval)?;
    let ells = sig.ells();
    let off = sig.offsets();
    let mut diag = Vec::with_capacity(ells.len());
    for &l in ells {
        diag.push(random_factor(&mut rng, l, degree, mag, interval)?);
    }
    let mut upper = Vec::new();
    for i in 0..ells.len() {
        for j in i + 1..ells.len() {
            upper.push((
                i,
                j,
                PolyMatrix::random(&mut rng, ells[i], ells[j], degree, mag),
            ));
        }
    }
    let refs: Vec<&MatrixFunction> = diag.iter().collect();
    let kd = MatrixFunction::block_diag(&refs, interval)?;
    let kn = fit(interval, FIT_TOL, |t| {
        let x = to_unit(interval, t);
        let mut k = kd.at(t);
        for (i, j, u) in &upper {
            k.view_mut((off[*i], off[*j]), (ells[*i], ells[*j]))
                .copy_from(&u.at(x));
        }
        k
    })?;
    // K1^{-1} (x1' ...) keeps the dynamic part an ODE
    let t1 = crate::equivalence::EquivalenceTransform::new(
        crate::chebmat::inverse(&k1, FIT_TOL)?,
        k1.clone(),
    )?;
    let omega_pair = DaePair::new(MatrixFunction::identity(d, interval), p.omega().clone())?;
    let omega = t1.apply(&omega_pair)?.f().clone();
    let step = crate::equivalence::lemma_triangular(p.n(), &kn, FIT_TOL)?;
    let t = EquivalenceTransform::new(
        MatrixFunction::block_diag(&[t1.l(), step.transform.l()], interval)?,
        MatrixFunction::block_diag(&[&k1, &kn], interval)?,
    )?;
    let out = assemble(omega, step.e_hat)?.with_structure(sig, p.variant())?;
    Ok((out, t))
}

/// A problem with known solution: `p` in SCF, its scrambled equivalent and
/// the right-hand sides and solutions in both coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manufactured {
    pub scf: ScfPair,
    pub scrambled: Scrambled,
    /// Solution of the SCF problem.
    pub x_scf: MatrixFunction,
    pub q_scf: MatrixFunction,
    /// Solution of the scrambled problem, `x~ = K^{-1} x`.
    pub x: MatrixFunction,
    /// Right-hand side of the scrambled problem, `q~ = L q`.
    pub q: MatrixFunction,
}

/// Manufactured problem with a smooth solution of sines and exponentials.
pub fn manufactured(spec: &GenSpec, d: usize, index: u64) -> Result<Manufactured> {
    let scf = random_scf(spec, d, index)?;
    let interval = spec.interval;
    let m = scf.m();
    let mut rng = stream(spec.seed ^ 0x5eed, index);
    let params: Vec<(f64, f64, f64)> = (0..m)
        .map(|_| {
            (
                rng.random_range(0.5..2.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.5..0.5),
            )
        })
        .collect();
    let x_scf = fit(interval, FIT_TOL, |t| {
        let x = to_unit(interval, t);
        DMatrix::from_fn(m, 1, |i, _| {
            let (w, ph, g) = params[i];
            (w * x + ph).sin() + (g * x).exp()
        })
    })?;
    let pair = to_dae_pair(&scf)?;
    let q_scf = pair
        .e()
        .mul(&x_scf.derivative())?
        .add(&pair.f().mul(&x_scf)?)?;
    let scrambled = scramble(
        &scf,
        spec.seed.wrapping_add(index),
        spec.entry_degree.max(1),
    )?;
    let x = crate::chebmat::solve(scrambled.transform.k(), &x_scf, FIT_TOL)?;
    let q = scrambled.transform.l().mul(&q_scf)?;
    Ok(Manufactured {
        scf,
        scrambled,
        x_scf,
        q_scf,
        x,
        q,
    })
}

/// One corpus file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub index: u64,
    pub spec: GenSpec,
    pub n: MatrixFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<MatrixFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scrambled: Option<Scrambled>,
}

impl Instance {
    pub fn generate(spec: &GenSpec, index: u64) -> Result<Self> {
        let n = random_sut_indexed(spec, index)?;
        Ok(Self {
            index,
            spec: spec.clone(),
            n: n.n().clone(),
            omega: None,
            scrambled: None,
        })
    }

    pub fn sut(&self) -> Result<SutMatrixFunction> {
        SutMatrixFunction::new(
            self.n.clone(),
            self.spec.sig.clone(),
            self.spec.variant,
            1e-8,
        )
    }

    pub fn file_name(&self) -> String {
        format!("instance_{:04}.json", self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub index: u64,
    pub seed: u64,
    pub sig: BlockSignature,
    pub variant: Variant,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub instances: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        detail: e.to_string(),
    })
}

/// Reads a JSON file, reporting parse failures with file, line and column.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    parse(path, &text)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

/// Writes one JSON file per instance plus `manifest.json` into `dir`.
pub fn export_corpus(dir: &Path, instances: &[Instance]) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        format: 1,
        instances: Vec::with_capacity(instances.len()),
    };
    for inst in instances {
        let text = to_json_pretty(inst);
        let file = inst.file_name();
        fs::write(dir.join(&file), &text)?;
        manifest.instances.push(ManifestEntry {
            file,
            index: inst.index,
            seed: inst.spec.seed,
            sig: inst.spec.sig.clone(),
            variant: inst.spec.variant,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    fs::write(dir.join(MANIFEST), to_json_pretty(&manifest))?;
    Ok(manifest)
}

/// Reads a corpus written by [`export_corpus`], checking every checksum.
pub fn import_corpus(dir: &Path) -> Result<Vec<Instance>> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let mut out = Vec::with_capacity(manifest.instances.len());
    for entry in &manifest.instances {
        let path: PathBuf = dir.join(&entry.file);
        let text = fs::read_to_string(&path)?;
        let sum = sha256_hex(text.as_bytes());
        if sum != entry.sha256 {
            return Err(Error::Integrity(format!(
                "{}: checksum {sum} differs from manifest {}",
                entry.file, entry.sha256
            )));
        }
        let inst: Instance = parse(&path, &text)?;
        inst.spec.validate()?;
        out.push(inst);
    }
    Ok(out)
}
