//! Command-line front end. The `sscf` binary only forwards to [`main_with`];
//! every command is also callable as a function returning a [`Report`].

mod report;
pub mod spy;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use report::{exit_code, Report, REPORT_SCHEMA};

use crate::canon_col::{
    finish, iterate_col_with, step0_normalize_with, PipelineOptions, PipelineTrace,
};
use crate::canon_row::{iterate_row_with, step0_normalize_row_with};
use crate::chebmat::{grid, Interval, MatrixFunction, CHECK_TOL, VERIFY_GRID};
use crate::dae::{solve_problem, Problem};
use crate::equivalence::{compose, verify, DaePair, EquivalenceTransform};
use crate::error::{Error, Result};
use crate::genbench::{
    export_corpus, import_corpus, random_scf, scramble, GenSpec, Instance, MANIFEST,
};
use crate::structure::{
    characteristics_from_nilpotent, elementary, jordan_blocks, jordan_matrix, jordan_permutation,
    permutation_matrix, rank_profile, signature_from_characteristics, BlockSignature,
    Characteristics, SutMatrixFunction, Variant,
};

/// Tolerance of the SUT predicates applied to command input.
const PREDICATE_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "sscf",
    version,
    about = "Reduce block-structured DAEs in standard canonical form to strong standard canonical form"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Check tolerance for residuals and coincidence tests.
    #[arg(long, global = true, default_value_t = CHECK_TOL)]
    pub tol: f64,
    /// Number of Chebyshev nodes used by verification.
    #[arg(long, global = true, default_value_t = VERIFY_GRID)]
    pub grid: usize,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the JSON report to this file (`-` for standard output).
    #[arg(long = "json", global = true, value_name = "OUT")]
    pub json: Option<PathBuf>,
}

impl Default for GlobalArgs {
    fn default() -> Self {
        Self {
            tol: CHECK_TOL,
            grid: VERIFY_GRID,
            seed: None,
            json: None,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded corpus of SUT instances.
    Generate(GenerateArgs),
    /// Reduce a SUT instance (or every instance of a corpus) to its
    /// elementary matrix.
    Canonicalize(CanonicalizeArgs),
    /// Canonical characteristics of a nilpotent matrix.
    Characteristics(CharacteristicsArgs),
    /// Jordan structure, and the permutation for elementary input.
    Jordan(InputArgs),
    /// Solve a problem file.
    Solve(SolveArgs),
    /// Check that a transform maps one pair to another.
    Verify(VerifyArgs),
    /// Nonzero patterns of the powers of a matrix.
    Spy(SpyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// GenSpec JSON file; replaces the signature flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub mu: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ells: Option<Vec<usize>>,
    /// `m=..,r=..,thetas=a,b,..`
    #[arg(long)]
    pub from_characteristics: Option<String>,
    #[arg(long, default_value = "columns")]
    pub variant: Variant,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, default_value_t = 4.0)]
    pub conditioning: f64,
    /// Size of the dynamic part; taken from the characteristics when given.
    #[arg(long, default_value_t = 0)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// Also store a scrambled equivalent pair with its transform.
    #[arg(long)]
    pub scramble: bool,
    #[arg(long, default_value = "corpus")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CanonicalizeArgs {
    /// Instance file or corpus directory.
    pub input: PathBuf,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Write the equivalence transform here.
    #[arg(long)]
    pub transform_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CharacteristicsArgs {
    pub input: PathBuf,
    /// Size of the dynamic part of the pair the matrix belongs to.
    #[arg(long, default_value_t = 0)]
    pub d: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    pub problem: PathBuf,
    /// Write the solution as a matrix function here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub pair: PathBuf,
    pub transform: PathBuf,
    pub transformed: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpyFormat {
    Ascii,
    Svg,
}

#[derive(Debug, Clone, Args)]
pub struct SpyArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub powers: usize,
    #[arg(long, value_enum, default_value_t = SpyFormat::Ascii)]
    pub format: SpyFormat,
    /// Write the image here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of a command: the report plus an optional text artifact (spy
/// output) meant for standard output.
pub struct Outcome {
    pub report: Report,
    pub artifact: Option<String>,
}

/// Parses `args` (program name first), runs the command and prints.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let out = run(&cli.command, &cli.global);
    let report = &out.report;
    let json_to_stdout = cli.global.json.as_deref() == Some(Path::new("-"));
    if let Some(path) = &cli.global.json {
        if json_to_stdout {
            println!("{}", report.to_json_string());
        } else if let Err(e) = fs::write(path, report.to_json_string()) {
            eprintln!("cannot write report to {}: {e}", path.display());
            return 2;
        }
    }
    match out.artifact {
        Some(text) => {
            print!("{text}");
            if !json_to_stdout {
                eprint!("{}", report.render_human());
            }
        }
        None if !json_to_stdout => print!("{}", report.render_human()),
        None => {}
    }
    report.exit_code
}

/// Runs one command. Errors end up in the report, never as a panic.
pub fn run(command: &Command, global: &GlobalArgs) -> Outcome {
    let start = Instant::now();
    let (name, args) = echo(command, global);
    let mut base = Report::new(name, args);
    let mut artifact = None;
    let res = match command {
        Command::Generate(a) => cmd_generate(a, global, &mut base),
        Command::Canonicalize(a) => cmd_canonicalize(a, global, &mut base),
        Command::Characteristics(a) => cmd_characteristics(&a.input, a.d, global, &mut base),
        Command::Jordan(a) => cmd_jordan(&a.input, global, &mut base),
        Command::Solve(a) => cmd_solve(a, global, &mut base),
        Command::Verify(a) => cmd_verify(a, global, &mut base),
        Command::Spy(a) => cmd_spy(a, global, &mut base).map(|text| artifact = text),
    };
    let mut report = match res {
        Ok(()) => base,
        Err(e) => base.with_error(&e),
    };
    report.time("total", start.elapsed().as_secs_f64() * 1e3);
    Outcome { report, artifact }
}

fn echo(command: &Command, g: &GlobalArgs) -> (&'static str, Value) {
    let mut args = json!({ "tol": g.tol, "grid": g.grid, "seed": g.seed });
    let extra = match command {
        Command::Generate(a) => (
            "generate",
            json!({
                "spec": a.spec, "mu": a.mu, "ells": a.ells,
                "from_characteristics": a.from_characteristics, "variant": a.variant,
                "degree": a.degree, "conditioning": a.conditioning, "d": a.d,
                "count": a.count, "scramble": a.scramble, "out": a.out,
            }),
        ),
        Command::Canonicalize(a) => (
            "canonicalize",
            json!({ "input": a.input, "variant": a.variant, "transform_out": a.transform_out }),
        ),
        Command::Characteristics(a) => ("characteristics", json!({ "input": a.input, "d": a.d })),
        Command::Jordan(a) => ("jordan", json!({ "input": a.input })),
        Command::Solve(a) => ("solve", json!({ "problem": a.problem, "out": a.out })),
        Command::Verify(a) => (
            "verify",
            json!({ "pair": a.pair, "transform": a.transform, "transformed": a.transformed }),
        ),
        Command::Spy(a) => (
            "spy",
            json!({
                "input": a.input, "powers": a.powers,
                "format": match a.format { SpyFormat::Ascii => "ascii", SpyFormat::Svg => "svg" },
                "out": a.out,
            }),
        ),
    };
    if let (Value::Object(m), Value::Object(e)) = (&mut args, extra.1) {
        m.extend(e);
    }
    (extra.0, args)
}

fn check_global(g: &GlobalArgs) -> Result<()> {
    if !(g.tol > 0.0) || g.grid < 2 {
        return Err(Error::dim(
            "flags",
            format!(
                "need --tol > 0 and --grid >= 2, got {} and {}",
                g.tol, g.grid
            ),
        ));
    }
    Ok(())
}

fn options(g: &GlobalArgs) -> PipelineOptions {
    let mut o = PipelineOptions::with_tol(g.tol);
    o.grid = g.grid;
    o
}

fn digest(paths: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(fs::read(p)?);
    }
    Ok(hex::encode(h.finalize()))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Matrix input in any of the accepted shapes.
#[derive(Clone, Debug)]
pub struct MatrixInput {
    pub n: MatrixFunction,
    pub sig: Option<BlockSignature>,
    pub variant: Option<Variant>,
    pub d: usize,
}

/// Reads a matrix: a JSON array of rows, `{"matrix": rows}`, a matrix
/// function, a SUT instance `{n, sig, variant}`, a corpus instance, or a
/// problem file (its nilpotent part).
pub fn load_matrix(path: &Path) -> Result<MatrixInput> {
    let v: Value = crate::genbench::read_json(path)?;
    let plain = |n: MatrixFunction| MatrixInput {
        n,
        sig: None,
        variant: None,
        d: 0,
    };
    let rows = |v: Value| -> Result<MatrixFunction> {
        let rows: Vec<Vec<f64>> = parse_json(path, v)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Parse {
                location: path.display().to_string(),
                detail: "rows of different length".into(),
            });
        }
        let m = DMatrix::from_fn(r, c, |i, j| rows[i][j]);
        Ok(MatrixFunction::constant(m, Interval::unit()))
    };
    match &v {
        Value::Array(_) => Ok(plain(rows(v)?)),
        Value::Object(o) if o.contains_key("matrix") => Ok(plain(rows(o["matrix"].clone())?)),
        Value::Object(o) if o.contains_key("coeffs") => Ok(plain(parse_json(path, v)?)),
        Value::Object(o) if o.contains_key("n_part") => {
            let p: Problem = parse_json(path, v)?;
            Ok(MatrixInput {
                n: p.n_part,
                sig: p.signature,
                variant: p.variant,
                d: p.d,
            })
        }
        Value::Object(o) if o.contains_key("spec") && o.contains_key("n") => {
            let inst: Instance = parse_json(path, v)?;
            Ok(MatrixInput {
                d: inst.omega.as_ref().map_or(0, |w| w.rows()),
                n: inst.n,
                sig: Some(inst.spec.sig),
                variant: Some(inst.spec.variant),
            })
        }
        Value::Object(o) if o.contains_key("n") => {
            #[derive(Deserialize)]
            struct Sut {
                n: MatrixFunction,
                sig: Option<BlockSignature>,
                variant: Option<Variant>,
            }
            let s: Sut = parse_json(path, v)?;
            Ok(MatrixInput {
                n: s.n,
                sig: s.sig,
                variant: s.variant,
                d: 0,
            })
        }
        _ => Err(Error::Parse {
            location: path.display().to_string(),
            detail: "expected a matrix, matrix function, instance or problem".into(),
        }),
    }
}

/// `m=26,r=18,thetas=7,5,4,2`
pub fn parse_characteristics(s: &str) -> Result<Characteristics> {
    let bad = |detail: String| Error::Parse {
        location: "--from-characteristics".into(),
        detail,
    };
    let (mut m, mut r, mut thetas) = (None, None, Vec::new());
    let mut current: Option<&str> = None;
    for part in s.split(',').map(str::trim) {
        let (key, val) = match part.split_once('=') {
            Some((k, v)) => (Some(k.trim()), v.trim()),
            None => (None, part),
        };
        if let Some(k) = key {
            current = Some(k);
        }
        let num: usize = val
            .parse()
            .map_err(|_| bad(format!("not an integer: {val:?}")))?;
        match current {
            Some("m") if key.is_some() => m = Some(num),
            Some("r") if key.is_some() => r = Some(num),
            Some("thetas") | Some("theta") => thetas.push(num),
            _ => return Err(bad(format!("unexpected item {part:?}"))),
        }
    }
    let m = m.ok_or_else(|| bad("missing m".into()))?;
    let r = r.ok_or_else(|| bad("missing r".into()))?;
    Characteristics::new(m, r, thetas)
}

fn generation_spec(a: &GenerateArgs, g: &GlobalArgs) -> Result<(GenSpec, usize)> {
    let seed = g.seed.unwrap_or(0);
    if let Some(path) = &a.spec {
        let mut spec: GenSpec = crate::genbench::read_json(path)?;
        if let Some(s) = g.seed {
            spec.seed = s;
        }
        spec.validate()?;
        return Ok((spec, a.d));
    }
    let (sig, d) = match (&a.from_characteristics, &a.ells) {
        (Some(_), Some(_)) => {
            return Err(Error::Signature(
                "give either --ells or --from-characteristics".into(),
            ))
        }
        (Some(c), None) => {
            let c = parse_characteristics(c)?;
            if c.mu() < 2 {
                return Err(Error::Signature("characteristics describe index 1".into()));
            }
            let sig = signature_from_characteristics(&c, c.m() - c.d(), a.variant)?;
            (sig, c.d())
        }
        (None, Some(ells)) => (BlockSignature::new(ells.clone())?, a.d),
        (None, None) => {
            return Err(Error::Signature(
                "need --ells, --from-characteristics or --spec".into(),
            ))
        }
    };
    if let Some(mu) = a.mu {
        if mu != sig.mu() {
            return Err(Error::Signature(format!(
                "--mu {mu} but the signature has {} blocks",
                sig.mu()
            )));
        }
    }
    let mut spec = GenSpec::new(sig, a.variant, a.degree, seed)?;
    spec.conditioning = a.conditioning;
    spec.validate()?;
    Ok((spec, d))
}

pub fn cmd_generate(a: &GenerateArgs, g: &GlobalArgs, rep: &mut Report) -> Result<()> {
    check_global(g)?;
    if let Some(p) = &a.spec {
        rep.input_digest = Some(digest(&[p])?);
    }
    let (spec, d) = generation_spec(a, g)?;
    let start = Instant::now();
    let mut instances = Vec::with_capacity(a.count as usize);
    for i in 0..a.count {
        let pair = random_scf(&spec, d, i)?;
        let mut inst = Instance {
            index: i,
            spec: spec.clone(),
            n: pair.n().clone(),
            omega: (d > 0).then(|| pair.omega().clone()),
            scrambled: None,
        };
        if a.scramble {
            inst.scrambled = Some(scramble(
                &pair,
                spec.seed.wrapping_add(i),
                spec.entry_degree.max(1),
            )?);
        }
        instances.push(inst);
    }
    rep.time("generate", start.elapsed().as_secs_f64() * 1e3);
    let manifest = export_corpus(&a.out, &instances)?;
    let characteristics = crate::genbench::ground_truth(&spec.sig, spec.variant, d)?;
    rep.set("out", &a.out);
    rep.set("signature", &spec.sig);
    rep.set("variant", spec.variant);
    rep.set("seed", spec.seed);
    rep.set("d", d);
    rep.set("characteristics", &characteristics);
    rep.set("manifest", &manifest);
    Ok(())
}

fn sut_of(input: &MatrixInput, variant: Option<Variant>) -> Result<SutMatrixFunction> {
    let sig = input
        .sig
        .clone()
        .ok_or_else(|| Error::Signature("input carries no block signature".into()))?;
    let variant = variant
        .or(input.variant)
        .ok_or_else(|| Error::Signature("no variant given; use --variant col|row".into()))?;
    SutMatrixFunction::new(input.n.clone(), sig, variant, PREDICATE_TOL)
}

/// Largest deviation from the identity on the grid.
fn distance_to_identity(m: &MatrixFunction, grid_size: usize) -> f64 {
    let n = m.rows();
    let id = DMatrix::<f64>::identity(n, n);
    grid(m.interval(), grid_size)
        .into_iter()
        .map(|t| (m.at(t) - &id).amax())
        .fold(0.0, f64::max)
}

/// Outcome of one canonicalization.
pub struct Canonicalized {
    pub transform: EquivalenceTransform,
    pub target: DMatrix<f64>,
    pub trace: PipelineTrace,
    pub effective_changes: usize,
    pub residual_e: f64,
    pub residual_f: f64,
    pub worst_t: f64,
}

/// Step 0, the iteration and the final verification of either pipeline.
pub fn canonicalize(n: &SutMatrixFunction, opts: &PipelineOptions) -> Result<Canonicalized> {
    let (t0, trace) = match n.variant() {
        Variant::Columns => {
            let (n0, t0) = step0_normalize_with(n, opts)?;
            (t0, iterate_col_with(&n0, opts)?)
        }
        Variant::Rows => {
            let (n0, t0) = step0_normalize_row_with(n, opts)?;
            (t0, iterate_row_with(&n0, opts)?)
        }
        Variant::Plain => return Err(Error::Signature("canonicalization needs col or row".into())),
    };
    let total = compose(&t0, &trace.total)?;
    let target = elementary(n.sig(), n.variant())?;
    finish(n, &target, &total, opts)?;
    let interval = n.n().interval();
    let id = MatrixFunction::identity(target.nrows(), interval);
    let report = verify(
        &total,
        &DaePair::new(n.n().clone(), id.clone())?,
        &DaePair::new(MatrixFunction::constant(target.clone(), interval), id)?,
        opts.grid,
        opts.check_tol,
    )?;
    let changed = |m: &MatrixFunction| distance_to_identity(m, opts.grid) > opts.check_tol;
    let effective_changes = usize::from(changed(t0.k()) || changed(t0.l()))
        + trace
            .steps
            .iter()
            .filter(|s| s.k_factor.as_ref().is_some_and(changed))
            .count();
    Ok(Canonicalized {
        transform: total,
        target,
        trace,
        effective_changes,
        residual_e: report.residual_e,
        residual_f: report.residual_f,
        worst_t: report.worst_t,
    })
}

fn rows_json(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect::<Vec<f64>>())
        .collect::<Vec<_>>())
}

pub fn cmd_canonicalize(a: &CanonicalizeArgs, g: &GlobalArgs, rep: &mut Report) -> Result<()> {
    check_global(g)?;
    let opts = options(g);
    if a.input.is_dir() {
        rep.input_digest = Some(digest(&[&a.input.join(MANIFEST)])?);
        return canonicalize_corpus(&a.input, a.variant, &opts, rep);
    }
    rep.input_digest = Some(digest(&[&a.input])?);
    let input = load_matrix(&a.input)?;
    let sut = sut_of(&input, a.variant)?;
    let start = Instant::now();
    let c = canonicalize(&sut, &opts)?;
    rep.time("canonicalize", start.elapsed().as_secs_f64() * 1e3);
    if let Some(path) = &a.transform_out {
        fs::write(path, crate::genbench::to_json_pretty(&c.transform))?;
    }
    let identity = c.effective_changes == 0;
    rep.set("signature", sut.sig());
    rep.set("variant", sut.variant());
    rep.set(
        "summary",
        if identity {
            "identity, 0 effective changes".to_string()
        } else {
            format!("{} effective changes", c.effective_changes)
        },
    );
    rep.set("identity", identity);
    rep.set("effective_changes", c.effective_changes);
    rep.set("final", rows_json(&c.target));
    rep.set(
        "residuals",
        json!({ "E": c.residual_e, "F": c.residual_f, "worst_t": c.worst_t }),
    );
    rep.set(
        "fixed_sequence",
        json!({ match sut.variant() { Variant::Rows => "lambda", _ => "kappa" }: c.trace.fixed_sequence() }),
    );
    rep.set("trace", c.trace.to_json());
    rep.set(
        "transform_degrees",
        json!({ "L": c.transform.l().degree(), "K": c.transform.k().degree() }),
    );
    Ok(())
}

fn canonicalize_corpus(
    dir: &Path,
    variant: Option<Variant>,
    opts: &PipelineOptions,
    rep: &mut Report,
) -> Result<()> {
    let instances = import_corpus(dir)?;
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(instances.len().max(1));
    let start = Instant::now();
    let mut results: Vec<(u64, Value, i32)> = std::thread::scope(|s| {
        let chunks: Vec<_> = (0..workers)
            .map(|w| {
                let instances = &instances;
                s.spawn(move || {
                    instances
                        .iter()
                        .skip(w)
                        .step_by(workers)
                        .map(|inst| {
                            let t = Instant::now();
                            let res = inst.sut().and_then(|n| {
                                let n = match variant {
                                    Some(v) if v != n.variant() => SutMatrixFunction::new(
                                        n.n().clone(),
                                        n.sig().clone(),
                                        v,
                                        PREDICATE_TOL,
                                    )?,
                                    _ => n,
                                };
                                canonicalize(&n, opts)
                            });
                            let ms = t.elapsed().as_secs_f64() * 1e3;
                            match res {
                                Ok(c) => (
                                    inst.index,
                                    json!({
                                        "index": inst.index, "file": inst.file_name(), "pass": true,
                                        "effective_changes": c.effective_changes,
                                        "residual_E": c.residual_e, "residual_F": c.residual_f, "ms": ms,
                                    }),
                                    0,
                                ),
                                Err(e) => (
                                    inst.index,
                                    json!({
                                        "index": inst.index, "file": inst.file_name(), "pass": false,
                                        "error": e.to_string(), "ms": ms,
                                    }),
                                    exit_code(e.kind()),
                                ),
                            }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        chunks
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    results.sort_by_key(|r| r.0);
    rep.time("canonicalize", start.elapsed().as_secs_f64() * 1e3);
    let passed = results.iter().filter(|r| r.2 == 0).count();
    let code = results.iter().map(|r| r.2).max().unwrap_or(0);
    rep.set("count", results.len());
    rep.set("passed", passed);
    rep.set(
        "instances",
        results.into_iter().map(|r| r.1).collect::<Vec<_>>(),
    );
    if code != 0 {
        rep.fail(code);
    }
    Ok(())
}

/// The constant nilpotent matrix behind the input, canonicalizing first
/// when the input is time-varying.
fn constant_nilpotent(
    input: &MatrixInput,
    g: &GlobalArgs,
    rep: &mut Report,
) -> Result<(DMatrix<f64>, Option<(BlockSignature, Variant)>)> {
    if !input.n.is_square() {
        return Err(Error::dim("input", "matrix is not square"));
    }
    if input.n.is_constant() {
        let structure = input.sig.clone().zip(input.variant);
        return Ok((input.n.coeffs()[0].clone(), structure));
    }
    let sut = sut_of(input, None).map_err(|e| match e {
        Error::Signature(_) => Error::Signature(
            "time-varying input needs a block signature and variant to be canonicalized first"
                .into(),
        ),
        other => other,
    })?;
    let start = Instant::now();
    let c = canonicalize(&sut, &options(g))?;
    rep.time("canonicalize", start.elapsed().as_secs_f64() * 1e3);
    rep.set(
        "canonicalized",
        json!({ "residual_E": c.residual_e, "residual_F": c.residual_f }),
    );
    Ok((c.target, Some((sut.sig().clone(), sut.variant()))))
}

fn characteristics_of(n: &DMatrix<f64>, d: usize) -> Result<(Characteristics, Vec<usize>)> {
    let ranks = rank_profile(n)?;
    let c = characteristics_from_nilpotent(n, d + ranks[0], d)?;
    Ok((c, ranks))
}

pub fn cmd_characteristics(path: &Path, d: usize, g: &GlobalArgs, rep: &mut Report) -> Result<()> {
    check_global(g)?;
    rep.input_digest = Some(digest(&[path])?);
    let input = load_matrix(path)?;
    let d = if input.d > 0 { input.d } else { d };
    let (n, _) = constant_nilpotent(&input, g, rep)?;
    let (c, ranks) = characteristics_of(&n, d)?;
    rep.set("characteristics", &c);
    rep.set("index", c.mu());
    rep.set("rank_powers", &ranks);
    let blocks: Vec<Value> = jordan_blocks(&c)?
        .into_iter()
        .map(|(order, count)| json!({ "order": order, "count": count }))
        .collect();
    rep.set("jordan_blocks", blocks);
    Ok(())
}

pub fn cmd_jordan(path: &Path, g: &GlobalArgs, rep: &mut Report) -> Result<()> {
    check_global(g)?;
    rep.input_digest = Some(digest(&[path])?);
    let input = load_matrix(path)?;
    let (n, structure) = constant_nilpotent(&input, g, rep)?;
    let (c, _) = characteristics_of(&n, 0)?;
    let mut orders: Vec<usize> = Vec::new();
    for (order, count) in jordan_blocks(&c)?.into_iter().rev() {
        orders.extend(std::iter::repeat_n(order, count));
    }
    let j = jordan_matrix(&orders);
    rep.set("orders", &orders);
    rep.set("jordan", rows_json(&j));
    if let Some((sig, variant)) = structure {
        let e = elementary(&sig, variant)?;
        if e == n {
            let pi = jordan_permutation(&sig, variant)?;
            let p = permutation_matrix(&pi);
            let conj = &p * &n * p.transpose();
            rep.set("permutation", &pi);
            rep.set("conjugation_exact", conj == j);
            if conj != j {
                rep.fail(3);
            }
        }
    }
    Ok(())
}

pub fn cmd_solve(a: &SolveArgs, g: &GlobalArgs, rep: &mut Report) -> Result<()> {
    check_global(g)?;
    rep.input_digest = Some(digest(&[&a.problem])?);
    let problem: Problem = crate::genbench::read_json(&a.problem)?;
    let (res, sr) = solve_problem(&problem, g.tol)?;
    if let Some(out) = &a.out {
        fs::write(out, crate::genbench::to_json_pretty(&res.x))?;
    }
    rep.set("residual", sr.residual);
    rep.set("bound", 100.0 * g.tol);
    rep.set("free_dimension", sr.free_dimension);
    rep.set("canonicalized", sr.canonicalized);
    rep.set("m", res.x.rows());
    rep.set(
        "x_at_a",
        res.x
            .at(problem.interval.a())
            .iter()
            .copied()
            .collect::<Vec<f64>>(),
    );
    rep.set(
        "x_at_b",
        res.x
            .at(problem.interval.b())
            .iter()
            .copied()
            .collect::<Vec<f64>>(),
    );
    rep.time("canonicalize", sr.timings_ms.canonicalize);
    rep.time("solve", sr.timings_ms.solve);
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, g: &GlobalArgs, rep: &mut Report) -> Result<()> {
    check_global(g)?;
    rep.input_digest = Some(digest(&[&a.pair, &a.transform, &a.transformed])?);
    let p: DaePair = crate::genbench::read_json(&a.pair)?;
    let t: EquivalenceTransform = crate::genbench::read_json(&a.transform)?;
    let q: DaePair = crate::genbench::read_json(&a.transformed)?;
    let r = verify(&t, &p, &q, g.grid, g.tol)?;
    rep.set("residual_E", r.residual_e);
    rep.set("residual_F", r.residual_f);
    rep.set("worst_t", r.worst_t);
    if !r.pass {
        rep.fail(3);
    }
    Ok(())
}

pub fn cmd_spy(a: &SpyArgs, g: &GlobalArgs, rep: &mut Report) -> Result<Option<String>> {
    check_global(g)?;
    rep.input_digest = Some(digest(&[&a.input])?);
    let input = load_matrix(&a.input)?;
    let panels = spy::panels(&input.n, a.powers, g.tol, g.grid)?;
    let text = match a.format {
        SpyFormat::Ascii => spy::ascii(&panels),
        SpyFormat::Svg => spy::svg(&panels),
    };
    rep.set("size", input.n.rows());
    rep.set(
        "panels",
        panels
            .iter()
            .map(|p| json!({ "power": p.power, "nonzeros": p.nonzeros() }))
            .collect::<Vec<_>>(),
    );
    match &a.out {
        Some(path) => {
            fs::write(path, &text)?;
            rep.set("written", path);
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}
