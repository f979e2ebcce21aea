//! Standard orthogonal and symplectic R-matrices, the certification
//! gauntlet and certified evaluations of the generator matrix M.
//!
//! The textbook formula for the standard R-matrix comes in several
//! transcriptions (triangle side, sign of rho, scaling of rho, which side
//! the permutation sits on). None is trusted: the candidates are tried in a
//! fixed order and the first that survives the whole gauntlet is used.

use std::fmt;

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{int, QContext, Scalar, Series};
use crate::projectors::{self, Classification, ProjectorFamily, Rho};
use crate::report::{CheckLog, Status};
use crate::rmatrix::{self, Pair, RBundle};
use crate::tensor::TensorOp;

/// One transcription of the standard R-matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RVariant {
    /// lambda terms on i > j (true) or i < j.
    pub lower: bool,
    /// q^{rho_i - rho_j} (true) or q^{rho_j - rho_i}.
    pub rho_plus: bool,
    /// rho as in the Bourbaki normalization (true) or doubled.
    pub rho_unit: bool,
    /// braid form P R (true) or R P.
    pub p_left: bool,
}

impl fmt::Display for RVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}-{}",
            if self.lower { "lower" } else { "upper" },
            if self.rho_plus { "rho+" } else { "rho-" },
            if self.rho_unit { "rho1" } else { "rho2" },
            if self.p_left { "PR" } else { "RP" }
        )
    }
}

/// All candidates in search order.
pub fn variants() -> Vec<RVariant> {
    let mut out = Vec::new();
    for rho_unit in [true, false] {
        for p_left in [true, false] {
            for lower in [true, false] {
                for rho_plus in [true, false] {
                    out.push(RVariant { lower, rho_plus, rho_unit, p_left });
                }
            }
        }
    }
    out
}

/// k of the series: N for O(N), N/2 for Sp(N).
pub fn rank_of(series: Series, n: usize) -> Result<usize> {
    match series {
        Series::O if n >= 2 => Ok(n),
        Series::Sp if n >= 2 && n.is_multiple_of(2) => Ok(n / 2),
        _ => Err(Error::Config(format!("no standard {series} R-matrix on N = {n}"))),
    }
}

pub fn context(series: Series, n: usize, s: Scalar) -> Result<QContext> {
    QContext::new(series, rank_of(series, n)?, s)
}

/// 2 rho_i (an integer) for 0-based i.
fn two_rho(series: Series, n: usize, i: usize) -> i64 {
    let m = (n / 2) as i64;
    let odd = n % 2 == 1;
    if odd && i as i64 == m {
        return 0;
    }
    let (j, sign) = if (i as i64) < m { (i as i64, 1) } else { ((n - 1 - i) as i64, -1) };
    let v = match series {
        Series::O if odd => 2 * (m - j) - 1,
        Series::O => 2 * (m - 1 - j),
        Series::Sp => 2 * (m - j),
    };
    sign * v
}

fn eps(series: Series, n: usize, i: usize) -> i64 {
    match series {
        Series::O => 1,
        Series::Sp if i < n / 2 => 1,
        Series::Sp => -1,
    }
}

/// Flat (non-braid) candidate R; entry at row (a, b), column (c, d).
pub fn flat_r(series: Series, ctx: &QContext, v: RVariant) -> Result<TensorOp> {
    let n = ctx.n;
    let q = &ctx.q;
    let qi = ctx.qinv();
    let lam = ctx.lambda();
    let prime = |i: usize| n - 1 - i;
    let mut entries: Vec<(usize, usize, Scalar)> = Vec::new();
    let idx = |a: usize, b: usize| a * n + b;
    for a in 0..n {
        for b in 0..n {
            let d = if a == b {
                if a == prime(a) { Scalar::one() } else { q.clone() }
            } else if b == prime(a) {
                qi.clone()
            } else {
                Scalar::one()
            };
            entries.push((idx(a, b), idx(a, b), d));
        }
    }
    let scale = if v.rho_unit { 1 } else { 2 };
    for i in 0..n {
        for j in 0..n {
            let ordered = if v.lower { i > j } else { i < j };
            if !ordered {
                continue;
            }
            entries.push((idx(i, j), idx(j, i), lam.clone()));
            let mut e = scale * (two_rho(series, n, i) - two_rho(series, n, j));
            if !v.rho_plus {
                e = -e;
            }
            let sign = eps(series, n, i) * eps(series, n, j);
            let val = -(&lam * ctx.spow(e)) * int(sign);
            entries.push((idx(i, prime(i)), idx(j, prime(j)), val));
        }
    }
    TensorOp::from_entries(n, 2, 1, entries)
}

/// Braid-form candidate.
pub fn braid_r(series: Series, ctx: &QContext, v: RVariant) -> Result<TensorOp> {
    let flat = flat_r(series, ctx, v)?;
    let p = TensorOp::permutation(ctx.n);
    Ok(if v.p_left { p.matmul(&flat) } else { flat.matmul(&p) })
}

fn quick_screen(r: &TensorOp, ctx: &QContext) -> bool {
    let (Ok(r1), Ok(r2)) = (r.embed(1, 3), r.embed(2, 3)) else { return false };
    if !(&r1.matmul(&r2).matmul(&r1) - &r2.matmul(&r1).matmul(&r2)).is_zero() {
        return false;
    }
    let cubic = r
        .scale(&-Scalar::one())
        .add_identity(&ctx.q)
        .matmul(&r.add_identity(&ctx.qinv()))
        .matmul(&r.scale(&-Scalar::one()).add_identity(&ctx.mu));
    cubic.is_zero()
}

/// Random operator-entried matrices fed to the phi/xi/theta checks per twist.
pub const MAP_SAMPLES_PER_PAIR: usize = 3;

/// Bounds of the gauntlet's projector checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GauntletLimits {
    /// Highest antisymmetrizer level built.
    pub max_a: usize,
    /// Highest symmetrizer level built.
    pub max_s: usize,
    /// Highest number of strands for contractors.
    pub max_c: usize,
    /// Seed for the random test matrices.
    pub seed: u64,
}

impl GauntletLimits {
    pub fn for_context(ctx: &QContext) -> Self {
        Self { max_a: ctx.k + 1, max_s: levels_within(ctx.n, 256).min(ctx.k + 1).max(2), max_c: 4, seed: 0 }
    }
}

/// Largest i with N^i <= dim_cap.
pub fn levels_within(n: usize, dim_cap: usize) -> usize {
    let mut i = 0;
    let mut d = 1;
    while d * n <= dim_cap {
        d *= n;
        i += 1;
    }
    i
}

/// A gauntlet-certified standard R with everything derived from it.
#[derive(Debug, Clone)]
pub struct Certified {
    pub series: Series,
    pub variant: RVariant,
    pub bundle: RBundle,
    pub family: ProjectorFamily,
    pub classification: Classification,
    /// F = P and F = R.
    pub pair_p: Pair,
    pub pair_r: Pair,
}

/// Builds the standard R for (series, N) at ctx and certifies it.
pub fn standard_r(series: Series, n: usize, ctx: &QContext, log: &mut CheckLog) -> Result<Certified> {
    standard_r_with(series, n, ctx, GauntletLimits::for_context(ctx), log)
}

pub fn standard_r_with(
    series: Series,
    n: usize,
    ctx: &QContext,
    limits: GauntletLimits,
    log: &mut CheckLog,
) -> Result<Certified> {
    if rank_of(series, n)? != ctx.k || ctx.n != n || ctx.series != series {
        return Err(Error::Config(format!("context does not match {series}({n})")));
    }
    let mut last_err = None;
    for v in variants() {
        let r = braid_r(series, ctx, v)?;
        if !quick_screen(&r, ctx) {
            continue;
        }
        let mut sub = CheckLog::new(log.scope());
        match gauntlet(series, v, &r, ctx, limits, &mut sub) {
            Ok(c) => {
                log.extend(sub);
                log.info("R-variant", v.to_string());
                return Ok(c);
            }
            Err(e) => last_err = Some((v, e)),
        }
    }
    match last_err {
        Some((v, e)) => {
            log.push("gauntlet", Status::Fail, format!("last candidate {v}: {e}"));
            Err(e)
        }
        None => {
            log.push("gauntlet", Status::Fail, "no candidate passes YBE and the cubic relation");
            Err(Error::fails("YBE", "no standard R candidate satisfies YBE and charR"))
        }
    }
}

/// The full invariant suite on one candidate. Fails on the first violated
/// identity after running the whole section it belongs to.
pub fn gauntlet(
    series: Series,
    variant: RVariant,
    r: &TensorOp,
    ctx: &QContext,
    limits: GauntletLimits,
    log: &mut CheckLog,
) -> Result<Certified> {
    let start = log.len();
    let fail = |log: &CheckLog| log.failure_since(start);
    let bundle = rmatrix::bmw_certify(r, ctx, log)?;
    let rho = Rho::new(&bundle);
    projectors::word_identities(&rho, log)?;
    projectors::rank_one_identities(&bundle, log)?;
    rmatrix::psi_k_checks(&bundle, log)?;
    if let Some(e) = fail(log) {
        return Err(e);
    }
    let family = ProjectorFamily::build(&rho, limits.max_a, limits.max_s, limits.max_c, log)?;
    projectors::projector_suite(&rho, &family, log)?;
    let classification = projectors::classify(&rho, &family, limits.max_a)?;
    let expect_tag = match series {
        Series::Sp => rmatrix::TypeTag::Sp,
        Series::O => rmatrix::TypeTag::O,
    };
    log.truth("classify", classification.tag == expect_tag && classification.k == ctx.k, || {
        format!("classified as {:?}({}), expected {:?}({})", classification.tag, classification.k, expect_tag, ctx.k)
    });
    if let Some(top) = family.a.get(ctx.k + 1) {
        log.zero("a-top", top);
    }
    projectors::tau_checks(&rho, 3, log)?;
    if let Some(e) = fail(log) {
        return Err(e);
    }

    let n = ctx.n;
    let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);
    let p = TensorOp::permutation(n);
    let pair_p = rmatrix::twist(&bundle, &p, "P", log)?;
    let pair_r = rmatrix::twist(&bundle, r, "R", log)?;
    for pair in [&pair_p, &pair_r] {
        rmatrix::g_checks(pair, log)?;
        rmatrix::pair_lemmas(pair, log, &mut rng)?;
        for _ in 0..MAP_SAMPLES_PER_PAIR {
            let m = TensorOp::random(n, 1, 2, &mut rng)?;
            rmatrix::map_checks(pair, &m, log)?;
        }
        let rho_f = Rho::new(&pair.rf);
        let top = limits.max_a.min(ctx.k);
        let fam_f = ProjectorFamily::build(&rho_f, top, 2, limits.max_c, log)?;
        projectors::twist_projector_suite(pair, &rho, &family, &rho_f, &fam_f, top, log)?;
    }
    if let Some(e) = fail(log) {
        return Err(e);
    }
    let mut bundle = bundle;
    bundle.type_tag = classification.tag;
    Ok(Certified { series, variant, bundle, family, classification, pair_p, pair_r })
}

// ---- evaluations -----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalKind {
    /// diag(x) with x_i x_{i'} = c (F = P).
    Torus,
    /// Slices of the flat R (F = P).
    LPlus,
    /// Slices of the braid R squared (F = R).
    ReSlice,
    /// LPlus times a torus factor (F = P).
    Composite,
    /// c I, valid for every F.
    Scalar,
}

impl std::str::FromStr for EvalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "torus" => Ok(EvalKind::Torus),
            "lplus" | "l+" => Ok(EvalKind::LPlus),
            "re" | "reslice" => Ok(EvalKind::ReSlice),
            "composite" => Ok(EvalKind::Composite),
            "scalar" => Ok(EvalKind::Scalar),
            other => Err(Error::Config(format!("unknown evaluation kind {other:?}"))),
        }
    }
}

/// Which twist an evaluation is certified for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Twist {
    P,
    R,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSpec {
    pub kind: EvalKind,
    pub x: Vec<Scalar>,
    pub c: Scalar,
    /// Slicing convention 0..8 chosen by the search (sliced kinds only).
    pub convention: Option<usize>,
}

/// An evaluation of M: an arity-1 operator with aux = dim W.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub spec: EvalSpec,
    pub twist: Twist,
    pub m: TensorOp,
}

const PRIMES: [i64; 8] = [2, 3, 5, 11, 13, 17, 19, 23];

/// Default torus point: x_i small primes, c = 49 (centre 7 when N is odd).
pub fn default_torus(n: usize) -> (Vec<Scalar>, Scalar) {
    let c = int(49);
    let mut x = vec![Scalar::zero(); n];
    for i in 0..n / 2 {
        x[i] = int(PRIMES[i % PRIMES.len()]);
        x[n - 1 - i] = &c / &x[i];
    }
    if n % 2 == 1 {
        x[n / 2] = int(7);
    }
    (x, c)
}

pub fn torus_eval(n: usize, x: &[Scalar], c: &Scalar) -> Result<TensorOp> {
    if x.len() != n {
        return Err(Error::ConstraintViolation(format!("{} torus entries for N = {n}", x.len())));
    }
    for i in 0..n {
        if &(&x[i] * &x[n - 1 - i]) != c {
            return Err(Error::ConstraintViolation(format!("x_{} x_{} != c", i + 1, n - i)));
        }
    }
    Ok(TensorOp::diagonal(x))
}

/// Arity-2 aux-free X read as an arity-1 matrix with entries in End(V):
/// M[(i;r)][(j;s)] = X[(i,r)][(j,s)] after the index transposition `conv`
/// (bit 0: swap i<->j, bit 1: swap r<->s, bit 2: swap the two factors).
pub fn slice(x: &TensorOp, conv: usize) -> Result<TensorOp> {
    let n = x.n();
    let entries = x.entries().into_iter().map(|(row, col, v)| {
        let (ri, _) = x.decode(row);
        let (ci, _) = x.decode(col);
        let (mut i, mut r, mut j, mut s) = (ri[0], ri[1], ci[0], ci[1]);
        if conv & 4 != 0 {
            std::mem::swap(&mut i, &mut r);
            std::mem::swap(&mut j, &mut s);
        }
        if conv & 1 != 0 {
            std::mem::swap(&mut i, &mut j);
        }
        if conv & 2 != 0 {
            std::mem::swap(&mut r, &mut s);
        }
        (i * n + r, j * n + s, v)
    });
    TensorOp::from_entries(n, 1, n, entries.collect::<Vec<_>>())
}

/// The relation residual R_1 M_1bar M_2bar - M_1bar M_2bar R_1.
pub fn relation_residual(m: &TensorOp, b: &RBundle, f: &TensorOp) -> Result<TensorOp> {
    let w = m.aux();
    let m1 = m.embed_spaces(&[1], 2)?;
    let f_w = f.lift_aux(w)?;
    let f_inv = f.invert()?.lift_aux(w)?;
    let m2 = f_w.matmul(&m1).matmul(&f_inv);
    let r = b.r.lift_aux(w)?;
    let mm = m1.matmul(&m2);
    Ok(&r.matmul(&mm) - &mm.matmul(&r))
}

/// Certifies M for the pair {R, F}: the defining relation and the
/// three-copy relations.
pub fn certify_eval(m: &TensorOp, b: &RBundle, f: &TensorOp, log: &mut CheckLog) -> Result<bool> {
    let start = log.len();
    if m.arity() != 1 || m.n() != b.n() {
        return Err(Error::Shape("evaluation must be an N x N matrix over W".into()));
    }
    log.zero("qma", &relation_residual(m, b, f)?);
    let w = m.aux();
    let f_inv = f.invert()?;
    let (f1, f2) = (f.embed(1, 3)?.lift_aux(w)?, f.embed(2, 3)?.lift_aux(w)?);
    let (fi1, fi2) = (f_inv.embed(1, 3)?.lift_aux(w)?, f_inv.embed(2, 3)?.lift_aux(w)?);
    let (r1, r2) = (b.r.embed(1, 3)?.lift_aux(w)?, b.r.embed(2, 3)?.lift_aux(w)?);
    let c1 = m.embed_spaces(&[1], 3)?;
    let c2 = f1.matmul(&c1).matmul(&fi1);
    let c3 = f2.matmul(&c2).matmul(&fi2);
    log.eq("fm-k", &f2.matmul(&c1), &c1.matmul(&f2));
    log.eq("fm-k", &f1.matmul(&c3), &c3.matmul(&f1));
    log.eq("rm-k", &r2.matmul(&c1), &c1.matmul(&r2));
    log.eq("rm-k", &r1.matmul(&c3), &c3.matmul(&r1));
    let m12 = c1.matmul(&c2);
    let m23 = c2.matmul(&c3);
    log.eq("rmm-k", &r1.matmul(&m12), &m12.matmul(&r1));
    log.eq("rmm-k", &r2.matmul(&m23), &m23.matmul(&r2));
    Ok(log.failure_since(start).is_none())
}

fn twist_op(b: &RBundle, t: Twist) -> TensorOp {
    match t {
        Twist::P => TensorOp::permutation(b.n()),
        Twist::R => b.r.clone(),
    }
}

/// Tries the eight slicings of `x` in order; the first certified one wins.
fn sliced(b: &RBundle, x: &TensorOp, t: Twist, kind: EvalKind, log: &mut CheckLog) -> Result<Evaluation> {
    let f = twist_op(b, t);
    for conv in 0..8 {
        let m = slice(x, conv)?;
        if relation_residual(&m, b, &f)?.is_zero() {
            let mut sub = CheckLog::new(log.scope());
            let ok = certify_eval(&m, b, &f, &mut sub)?;
            log.extend(sub);
            if ok {
                log.info("slice-convention", format!("{kind:?}: {conv}"));
                let spec = EvalSpec { kind, x: Vec::new(), c: Scalar::one(), convention: Some(conv) };
                return Ok(Evaluation { spec, twist: t, m });
            }
        }
    }
    Err(Error::NoConventionPasses(format!("{kind:?}: none of the 8 slicings is certified")))
}

/// M from the flat R (entries in End(V)), F = P.
pub fn l_plus_eval(b: &RBundle, log: &mut CheckLog) -> Result<Evaluation> {
    let flat = TensorOp::permutation(b.n()).matmul(&b.r);
    sliced(b, &flat, Twist::P, EvalKind::LPlus, log)
}

/// M from R^2 (braid form), F = R.
pub fn re_eval(b: &RBundle, log: &mut CheckLog) -> Result<Evaluation> {
    sliced(b, &b.r.matmul(&b.r), Twist::R, EvalKind::ReSlice, log)
}

pub fn scalar_eval(n: usize, c: &Scalar, t: Twist) -> Result<Evaluation> {
    let m = TensorOp::identity(n, 1, 1)?.scale(c);
    let spec = EvalSpec { kind: EvalKind::Scalar, x: Vec::new(), c: c.clone(), convention: None };
    Ok(Evaluation { spec, twist: t, m })
}

/// Sliced evaluation times a certified torus factor.
pub fn composite(base: &Evaluation, x: &[Scalar], c: &Scalar) -> Result<Evaluation> {
    let n = base.m.n();
    let t = torus_eval(n, x, c)?.lift_aux(base.m.aux())?;
    let mut spec = base.spec.clone();
    spec.kind = EvalKind::Composite;
    spec.x = x.to_vec();
    spec.c = c.clone();
    Ok(Evaluation { spec, twist: base.twist, m: base.m.matmul(&t) })
}

fn torus_params(n: usize, spec: &EvalSpec) -> (Vec<Scalar>, Scalar) {
    if spec.x.is_empty() {
        default_torus(n)
    } else {
        (spec.x.clone(), spec.c.clone())
    }
}

/// Builds and certifies the evaluation described by `spec`. Sliced RE
/// evaluations that fail fall back to c I (logged).
pub fn evaluate(b: &RBundle, spec: &EvalSpec, log: &mut CheckLog) -> Result<Evaluation> {
    let n = b.n();
    let ev = match spec.kind {
        EvalKind::Torus => {
            let (x, c) = torus_params(n, spec);
            let m = torus_eval(n, &x, &c)?;
            let spec = EvalSpec { x, c, ..spec.clone() };
            Evaluation { spec, twist: Twist::P, m }
        }
        EvalKind::LPlus => l_plus_eval(b, log)?,
        EvalKind::Composite => {
            let (x, c) = torus_params(n, spec);
            composite(&l_plus_eval(b, log)?, &x, &c)?
        }
        EvalKind::Scalar => scalar_eval(n, &spec.c, Twist::R)?,
        EvalKind::ReSlice => match re_eval(b, log) {
            Ok(e) => e,
            Err(Error::NoConventionPasses(_)) => {
                log.info("re-fallback", "no slicing of R^2 is certified; using c I");
                scalar_eval(n, &spec.c, Twist::R)?
            }
            Err(e) => return Err(e),
        },
    };
    let f = twist_op(b, ev.twist);
    if !certify_eval(&ev.m, b, &f, log)? {
        return Err(log.first_failure().unwrap_or(Error::fails("qma", "evaluation not certified")));
    }
    Ok(ev)
}
