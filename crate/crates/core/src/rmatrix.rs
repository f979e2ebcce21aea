//! R-matrix calculus: skew inverses, C/D matrices, BMW data, compatible
//! pairs and twists, the G matrix and the phi / xi / theta maps.
//!
//! Operators follow the row = lower index convention, so R-traces are
//! `Tr_R X = Tr(D X)` and X_{21} is X with its first factor on space 2.

use num_traits::One;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{fmt_scalar, QContext, Scalar};
use crate::report::CheckLog;
use crate::tensor::TensorOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeTag {
    GenericBMW,
    Sp,
    O,
}

/// A BMW-certified braid-form R-matrix with its derived operators.
#[derive(Debug, Clone)]
pub struct RBundle {
    pub r: TensorOp,
    pub r_inv: TensorOp,
    pub psi: TensorOp,
    pub c: TensorOp,
    pub d: TensorOp,
    pub c_inv: TensorOp,
    pub d_inv: TensorOp,
    pub k: TensorOp,
    pub e: TensorOp,
    pub e_inv: TensorOp,
    pub ctx: QContext,
    pub type_tag: TypeTag,
}

impl RBundle {
    /// Dimension N of V.
    pub fn n(&self) -> usize {
        self.r.n()
    }

    /// Header plus the tensor text form of R.
    pub fn to_text(&self) -> String {
        format!(
            "# series {}\n# N {}\n# k {}\n# s {}\n# mu {}\n{}",
            self.ctx.series,
            self.n(),
            self.ctx.k,
            fmt_scalar(&self.ctx.s),
            fmt_scalar(&self.ctx.mu),
            self.r.to_text()
        )
    }
}

fn id(n: usize, arity: usize) -> TensorOp {
    TensorOp::identity(n, arity, 1).expect("small identity")
}

fn check_arity2(x: &TensorOp) -> Result<()> {
    if x.arity() != 2 || x.aux() != 1 {
        return Err(Error::Shape(format!("expected an aux-free arity-2 operator, got arity {}", x.arity())));
    }
    Ok(())
}

/// Solves Tr_(2)(X_12 Psi_23) = P_13 for Psi and asserts the mirror half
/// Tr_(2)(Psi_12 X_23) = P_13.
pub fn skew_inverse(x: &TensorOp) -> Result<TensorOp> {
    check_arity2(x)?;
    let n = x.n();
    // A[(i1,j1)][(i2,k)] = X[(i1,i2)][(j1,k)];  Y[(i2,k)][(i3,j3)] = Psi[(k,i3)][(i2,j3)]
    let a_entries = x.entries().into_iter().map(|(r, c, v)| {
        let (ri, _) = x.decode(r);
        let (ci, _) = x.decode(c);
        (ri[0] * n + ci[0], ri[1] * n + ci[1], v)
    });
    let a = TensorOp::from_entries(n, 2, 1, a_entries)?;
    let y = a.solve(&TensorOp::permutation(n)).map_err(|e| match e {
        Error::Singular => Error::NotSkewInvertible,
        other => other,
    })?;
    let psi_entries = y.entries().into_iter().map(|(r, c, v)| {
        let (i2, k) = (r / n, r % n);
        let (i3, j3) = (c / n, c % n);
        (k * n + i3, i2 * n + j3, v)
    });
    let psi = TensorOp::from_entries(n, 2, 1, psi_entries)?;
    let p = TensorOp::permutation(n);
    let first = x.embed(1, 3)?.matmul(&psi.embed(2, 3)?).partial_trace(&[2])?;
    let second = psi.embed(1, 3)?.matmul(&x.embed(2, 3)?).partial_trace(&[2])?;
    for (half, lhs) in [("s-inv", first), ("s-inv", second)] {
        if let Some(w) = (&lhs - &p).witness() {
            return Err(Error::fails(half, w));
        }
    }
    Ok(psi)
}

/// C = Tr_(1) Psi, D = Tr_(2) Psi.
pub fn c_and_d(psi: &TensorOp) -> Result<(TensorOp, TensorOp)> {
    Ok((psi.partial_trace(&[1])?, psi.partial_trace(&[2])?))
}

/// R1 F2 F1 = F2 F1 R2 and R2 F1 F2 = F1 F2 R1.
pub fn certify_compatible(r: &TensorOp, f: &TensorOp) -> bool {
    compatibility_residuals(r, f).map(|(a, b)| a.is_zero() && b.is_zero()).unwrap_or(false)
}

fn compatibility_residuals(r: &TensorOp, f: &TensorOp) -> Result<(TensorOp, TensorOp)> {
    check_arity2(r)?;
    check_arity2(f)?;
    let (r1, r2) = (r.embed(1, 3)?, r.embed(2, 3)?);
    let (f1, f2) = (f.embed(1, 3)?, f.embed(2, 3)?);
    let a = &r1.matmul(&f2).matmul(&f1) - &f2.matmul(&f1).matmul(&r2);
    let b = &r2.matmul(&f1).matmul(&f2) - &f1.matmul(&f2).matmul(&r1);
    Ok((a, b))
}

/// Third eigenvalue of a BMW R-matrix by deflation against q and -1/q:
/// Y = (qI - R)(q^-1 I + R) satisfies Y R = mu Y.
pub fn extract_mu(r: &TensorOp, q: &Scalar) -> Result<Scalar> {
    check_arity2(r)?;
    let y = r.scale(&-Scalar::one()).add_identity(q).matmul(&r.add_identity(&q.recip()));
    let (row, col, v) = y.first_nonzero().ok_or_else(|| Error::fails("charR", "(qI-R)(1/q I+R) = 0"))?;
    let mu = y.matmul(r).get(row, col) / v;
    let resid = &y.matmul(r) - &y.scale(&mu);
    match resid.witness() {
        None => Ok(mu),
        Some(w) => Err(Error::fails("charR", w)),
    }
}

/// K = mu^-1 (q - q^-1)^-1 (qI - R)(q^-1 I + R).
pub fn k_operator(r: &TensorOp, ctx: &QContext) -> TensorOp {
    let f = (&ctx.mu * ctx.lambda()).recip();
    r.scale(&-Scalar::one()).add_identity(&ctx.q).matmul(&r.add_identity(&ctx.qinv())).scale(&f)
}

/// Runs every bundle invariant, logging each check; returns the bundle or
/// the first violated identity.
pub fn bmw_certify(r: &TensorOp, ctx: &QContext, log: &mut CheckLog) -> Result<RBundle> {
    let start = log.len();
    check_arity2(r)?;
    let n = r.n();
    if n != ctx.n {
        return Err(Error::Shape(format!("R acts on N = {n}, context expects N = {}", ctx.n)));
    }
    let bail = |log: &CheckLog| log.failure_since(start).map(Err::<RBundle, Error>);

    let (r1, r2) = (r.embed(1, 3)?, r.embed(2, 3)?);
    log.eq("YBE", &r1.matmul(&r2).matmul(&r1), &r2.matmul(&r1).matmul(&r2));

    let r_inv = match r.invert() {
        Ok(x) => x,
        Err(e) => {
            log.push("R-invertible", crate::report::Status::Fail, e.to_string());
            return Err(Error::fails("R-invertible", "R is singular"));
        }
    };
    let psi = match log.outcome("s-inv", skew_inverse(r)) {
        Some(p) => p,
        None => return bail(log).unwrap(),
    };
    let (c, d) = c_and_d(&psi)?;
    let i1 = id(n, 1);
    log.eq("traceCD-X", &c.embed_spaces(&[1], 2)?.matmul(r).partial_trace(&[1])?, &i1);
    log.eq("traceCD-X", &d.embed_spaces(&[2], 2)?.matmul(r).partial_trace(&[2])?, &i1);

    let mu = &ctx.mu;
    let cubic = r
        .scale(&-Scalar::one())
        .add_identity(&ctx.q)
        .matmul(&r.add_identity(&ctx.qinv()))
        .matmul(&r.scale(&-Scalar::one()).add_identity(mu));
    log.zero("charR", &cubic);
    if let Some(e) = log.failure_since(start) {
        return Err(e);
    }
    match extract_mu(r, &ctx.q) {
        Ok(m) => {
            log.scalar_eq("charR-mu", &m, mu);
        }
        Err(e) => log.push("charR-mu", crate::report::Status::Fail, e.to_string()),
    }

    let k = k_operator(r, ctx);
    let rank = k.rank();
    log.truth("rank-K", rank == 1, || format!("rank K = {rank}"));
    let (k1, k2) = (k.embed(1, 3)?, k.embed(2, 3)?);
    let ri1 = r_inv.embed(1, 3)?;
    let ri2 = r_inv.embed(2, 3)?;
    let k2k1 = k2.matmul(&k1);
    log.eq("bmwR", &k2k1, &r1.matmul(&r2).matmul(&k1));
    log.eq("bmwR", &k2k1, &ri1.matmul(&ri2).matmul(&k1));
    log.eq("bmwR", &k1.matmul(&k2).matmul(&k1), &k1);

    let mu_inv = mu.recip();
    log.eq("traceK", &k.partial_trace(&[2])?, &d.scale(&mu_inv));
    log.eq("traceK", &k.partial_trace(&[1])?, &c.scale(&mu_inv));
    log.eq("traceDK", &k.weighted_trace(Some(&d), &[2])?, &i1.scale(mu));
    log.scalar_eq("traceD", &d.trace(), &ctx.trace_identity());
    let mu2 = mu * mu;
    log.eq("C*D", &c.matmul(&d), &i1.scale(&mu2));
    let dd = d.embed_spaces(&[1], 2)?.matmul(&d.embed_spaces(&[2], 2)?);
    log.eq("KDD", &k.matmul(&dd), &k.scale(&mu2));
    log.eq("KDD", &dd.matmul(&k), &k.scale(&mu2));
    log.eq("RDD", &r.matmul(&dd), &dd.matmul(r));

    let (c_inv, d_inv) = match (c.invert(), d.invert()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => {
            log.push("strict-skew", crate::report::Status::Fail, "C or D singular");
            return Err(Error::NotStrictSkewInvertible("C or D singular".into()));
        }
    };
    log.push("strict-skew", crate::report::Status::Pass, "");
    if let Some(psi_inv) = log.outcome("s-inv", skew_inverse(&r_inv)) {
        let (ci, di) = c_and_d(&psi_inv)?;
        log.eq("CDinv", &ci, &d_inv);
        log.eq("CDinv", &di, &c_inv);
    }

    let p = TensorOp::permutation(n);
    let kp = k.matmul(&p);
    let e = kp.partial_trace(&[1])?;
    let e_inv = kp.partial_trace(&[2])?;
    log.eq("defcaxy", &e.matmul(&e_inv), &i1);

    if let Some(err) = log.failure_since(start) {
        return Err(err);
    }
    let type_tag = default_tag(ctx);
    Ok(RBundle { r: r.clone(), r_inv, psi, c, d, c_inv, d_inv, k, e, e_inv, ctx: ctx.clone(), type_tag })
}

/// Tag implied by mu alone; `projectors::classify` confirms it.
fn default_tag(ctx: &QContext) -> TypeTag {
    let k = ctx.k as i64;
    if ctx.mu == -ctx.qpow(-1 - 2 * k) && ctx.series == crate::exact::Series::Sp {
        TypeTag::Sp
    } else if ctx.mu == ctx.qpow(1 - k) && ctx.series == crate::exact::Series::O {
        TypeTag::O
    } else {
        TypeTag::GenericBMW
    }
}

/// A compatible pair {R, F} with F strict skew invertible, the twisted
/// bundle R_f = F^-1 R F and the G matrix.
#[derive(Debug, Clone)]
pub struct Pair {
    pub label: String,
    pub r: RBundle,
    pub f: TensorOp,
    pub f_inv: TensorOp,
    pub psi_f: TensorOp,
    pub c_f: TensorOp,
    pub d_f: TensorOp,
    pub c_finv: TensorOp,
    pub d_finv: TensorOp,
    pub rf: RBundle,
    pub g: TensorOp,
    pub g_inv: TensorOp,
}

/// Builds the twisted bundle and checks every twist identity along the way.
pub fn twist(b: &RBundle, f: &TensorOp, label: &str, log: &mut CheckLog) -> Result<Pair> {
    let start = log.len();
    let (ra, rb) = compatibility_residuals(&b.r, f)?;
    if let Some(w) = ra.witness().or_else(|| rb.witness()) {
        log.push("sovm", crate::report::Status::Fail, w.clone());
        return Err(Error::IncompatiblePair(w));
    }
    log.push("sovm", crate::report::Status::Pass, "");
    let f_inv = f.invert()?;
    log.truth("sovm-inverse", certify_compatible(&b.r, &f_inv), || "{R, F^-1} not compatible".into());

    let psi_f = skew_inverse(f).map_err(|_| Error::NotStrictSkewInvertible("F is not skew invertible".into()))?;
    let (c_f, d_f) = c_and_d(&psi_f)?;
    let psi_finv =
        skew_inverse(&f_inv).map_err(|_| Error::NotStrictSkewInvertible("F^-1 is not skew invertible".into()))?;
    let (c_finv, d_finv) = c_and_d(&psi_finv)?;
    let (c_f_i, d_f_i) = match (c_f.invert(), d_f.invert()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Err(Error::NotStrictSkewInvertible("C_F or D_F singular".into())),
    };
    log.eq("CDinv", &c_finv, &d_f_i);
    log.eq("CDinv", &d_finv, &c_f_i);

    // (i) R_f by conjugation and by the four-space trace formula
    let r_f = f_inv.matmul(&b.r).matmul(f);
    let fin = TensorOp::product(&[
        f_inv.embed_spaces(&[3, 2], 4)?,
        c_finv.embed_spaces(&[3], 4)?,
        b.r.embed(3, 4)?,
        d_f.embed_spaces(&[4], 4)?,
        f.embed_spaces(&[1, 4], 4)?,
    ])
    .expect("nonempty")
    .partial_trace(&[3, 4])?;
    log.eq("R_f-fin", &fin, &r_f);

    // (ii) three routes to Psi_{R_f}
    let inner = TensorOp::product(&[
        f_inv.embed_spaces(&[2, 3], 4)?,
        b.psi.embed(3, 4)?,
        f.embed_spaces(&[4, 1], 4)?,
    ])
    .expect("nonempty")
    .partial_trace(&[3, 4])?;
    let psi_route1 = c_finv.embed_spaces(&[2], 2)?.matmul(&inner).matmul(&d_f.embed_spaces(&[1], 2)?);
    let f21 = f.embed_spaces(&[2, 1], 2)?;
    let f21_inv = f_inv.embed_spaces(&[2, 1], 2)?;
    let psi_route2 = TensorOp::product(&[
        c_finv.embed_spaces(&[2], 2)?,
        f21.clone(),
        d_finv.embed_spaces(&[2], 2)?,
        b.psi.clone(),
        c_f.embed_spaces(&[1], 2)?,
        f21_inv,
        d_f.embed_spaces(&[1], 2)?,
    ])
    .expect("nonempty");
    log.eq("Psi_R_f", &psi_route1, &psi_route2);

    let mut sub = CheckLog::new(log.scope());
    let rf = match bmw_certify(&r_f, &b.ctx, &mut sub) {
        Ok(x) => {
            log.push("R_f-bmw", crate::report::Status::Pass, "");
            x
        }
        Err(e) => {
            log.push("R_f-bmw", crate::report::Status::Fail, e.to_string());
            return Err(e);
        }
    };
    log.eq("Psi_R_f-another", &psi_route2, &rf.psi);

    // (iii) C/D of the twisted operator
    log.eq("CDtwist", &rf.c, &c_finv.matmul(&b.d).matmul(&c_f));
    log.eq("CDtwist", &rf.d, &d_finv.matmul(&b.c).matmul(&d_f));

    // (iv) double twist
    let rff = f_inv.matmul(&r_f).matmul(f);
    let dfdf = d_f.embed_spaces(&[1], 2)?.matmul(&d_f.embed_spaces(&[2], 2)?);
    log.eq("XffD", &dfdf.matmul(&rff), &b.r.matmul(&dfdf));

    let (g, g_inv) = g_matrix(b, f, &f_inv)?;
    let pair = Pair {
        label: label.to_string(),
        r: b.clone(),
        f: f.clone(),
        f_inv,
        psi_f,
        c_f,
        d_f,
        c_finv,
        d_finv,
        rf,
        g,
        g_inv,
    };
    if let Some(e) = log.failure_since(start) {
        return Err(e);
    }
    Ok(pair)
}

/// G = Tr_(23)(K_2 F_1^-1 F_2^-1), G^-1 = Tr_(23)(F_2 F_1 K_2).
pub fn g_matrix(b: &RBundle, f: &TensorOp, f_inv: &TensorOp) -> Result<(TensorOp, TensorOp)> {
    let k2 = b.k.embed(2, 3)?;
    let g = TensorOp::product(&[k2.clone(), f_inv.embed(1, 3)?, f_inv.embed(2, 3)?])
        .expect("nonempty")
        .partial_trace(&[2, 3])?;
    let g_inv =
        TensorOp::product(&[f.embed(2, 3)?, f.embed(1, 3)?, k2]).expect("nonempty").partial_trace(&[2, 3])?;
    Ok((g, g_inv))
}

impl Pair {
    pub fn n(&self) -> usize {
        self.r.n()
    }

    pub fn mu(&self) -> &Scalar {
        &self.r.ctx.mu
    }

    fn lifted(x: &TensorOp, w: usize) -> Result<TensorOp> {
        x.lift_aux(w)
    }

    /// Tr over space 2 with weight `d` of  L · M_1 · Rt, all lifted to aux w.
    fn sandwich(&self, m: &TensorOp, left: &TensorOp, right: &TensorOp, d: &TensorOp) -> Result<TensorOp> {
        let w = m.aux();
        let m1 = m.embed_spaces(&[1], 2)?;
        let lhs = Self::lifted(left, w)?.matmul(&m1);
        lhs.trace_product(&Self::lifted(right, w)?, Some(d), &[2])
    }

    /// phi(M)_1 = Tr_{R(2)}(F M_1 F^-1 R).
    pub fn phi(&self, m: &TensorOp) -> Result<TensorOp> {
        self.sandwich(m, &self.f, &self.f_inv.matmul(&self.r.r), &self.r.d)
    }

    /// xi(M)_1 = Tr_{R(2)}(F M_1 F^-1 K).
    pub fn xi(&self, m: &TensorOp) -> Result<TensorOp> {
        self.sandwich(m, &self.f, &self.f_inv.matmul(&self.r.k), &self.r.d)
    }

    /// phi^-1(M)_1 = mu^-2 Tr_{R_f(2)}(F^-1 M_1 R^-1 F).
    pub fn phi_inv(&self, m: &TensorOp) -> Result<TensorOp> {
        let mu2 = (self.mu() * self.mu()).recip();
        Ok(self.sandwich(m, &self.f_inv, &self.r.r_inv.matmul(&self.f), &self.rf.d)?.scale(&mu2))
    }

    /// xi^-1(M)_1 = mu^-2 Tr_{R_f(2)}(F^-1 M_1 K F).
    pub fn xi_inv(&self, m: &TensorOp) -> Result<TensorOp> {
        let mu2 = (self.mu() * self.mu()).recip();
        Ok(self.sandwich(m, &self.f_inv, &self.r.k.matmul(&self.f), &self.rf.d)?.scale(&mu2))
    }

    /// theta(M)_1 = mu^-2 Tr_{R(2)}(K_1 M_2bar), M_2bar = F M_1 F^-1.
    pub fn theta(&self, m: &TensorOp) -> Result<TensorOp> {
        let mu2 = (self.mu() * self.mu()).recip();
        Ok(self.sandwich(m, &self.r.k.matmul(&self.f), &self.f_inv, &self.r.d)?.scale(&mu2))
    }

    /// theta^-1(M)_1 = Tr_{R_f(2)}(F^-1 K M_1 F).
    pub fn theta_inv(&self, m: &TensorOp) -> Result<TensorOp> {
        self.sandwich(m, &self.f_inv.matmul(&self.r.k), &self.f, &self.rf.d)
    }

    /// Tr_R over the single space of an arity-1 W-valued matrix.
    pub fn rtrace(&self, m: &TensorOp) -> Result<TensorOp> {
        m.weighted_trace(Some(&self.r.d), &[1])
    }

    pub fn rtrace_f(&self, m: &TensorOp) -> Result<TensorOp> {
        m.weighted_trace(Some(&self.rf.d), &[1])
    }
}

/// Checks of the G matrix identities.
pub fn g_checks(p: &Pair, log: &mut CheckLog) -> Result<()> {
    let n = p.n();
    let i1 = id(n, 1);
    log.eq("G-inv", &p.g.matmul(&p.g_inv), &i1);
    let (g1, g2) = (p.g.embed_spaces(&[1], 2)?, p.g.embed_spaces(&[2], 2)?);
    let gg = g1.matmul(&g2);
    log.eq("RF-G", &p.r.r.matmul(&gg), &gg.matmul(&p.r.r));
    log.eq("RF-G", &p.f.matmul(&g1), &g2.matmul(&p.f));
    log.eq("RF-G", &p.f_inv.matmul(&g1), &g2.matmul(&p.f_inv));
    log.zero("comm-G", &p.r.d.commutator(&p.g));
    log.zero("comm-G", &p.c_f.commutator(&p.g));
    log.zero("comm-G", &p.d_f.commutator(&p.g));
    let anoth = p.c_f.matmul(&p.f_inv.matmul(&p.r.k).partial_trace(&[2])?);
    log.eq("anothG", &anoth, &p.g);
    log.eq("PsiFG", &g1.matmul(&p.psi_f), &p.psi_f.matmul(&g2));
    Ok(())
}

/// Skew-inverse lemmas for the pair: invariance of C/D traces, Psi_F
/// relations, C/D commutation corollaries and the closed form of Psi_K.
pub fn pair_lemmas(p: &Pair, log: &mut CheckLog, rng: &mut impl Rng) -> Result<()> {
    let n = p.n();
    let b = &p.r;
    let m = TensorOp::random(n, 1, 1, rng)?;
    let (m1, m2) = (m.embed_spaces(&[1], 2)?, m.embed_spaces(&[2], 2)?);
    let i1 = id(n, 1);
    for (fe, fme) in [(&p.f, &p.f_inv), (&p.f_inv, &p.f)] {
        let lhs = b.c.embed_spaces(&[1], 2)?.matmul(fe).matmul(&m2).matmul(fme).partial_trace(&[1])?;
        log.eq("inv-trC", &lhs, &i1.scale(&b.c.matmul(&m).trace()));
        let lhs = b.d.embed_spaces(&[2], 2)?.matmul(fme).matmul(&m1).matmul(fe).partial_trace(&[2])?;
        log.eq("inv-trD", &lhs, &i1.scale(&b.d.matmul(&m).trace()));
    }

    let f21_inv = p.f_inv.embed_spaces(&[2, 1], 2)?;
    for (cx, dx) in [(&b.c, &b.d), (&p.rf.c, &p.rf.d)] {
        let (cx1, cx2) = (cx.embed_spaces(&[1], 2)?, cx.embed_spaces(&[2], 2)?);
        let (dx1, dx2) = (dx.embed_spaces(&[1], 2)?, dx.embed_spaces(&[2], 2)?);
        log.eq("psi-C", &cx1.matmul(&p.psi_f), &f21_inv.matmul(&cx2));
        log.eq("psi-C", &p.psi_f.matmul(&cx1), &cx2.matmul(&f21_inv));
        log.eq("psi-D", &p.psi_f.matmul(&dx2), &dx1.matmul(&f21_inv));
        log.eq("psi-D", &dx2.matmul(&p.psi_f), &f21_inv.matmul(&dx1));
    }

    // X, Y range over R, R_f and P, each only when {X, F} is compatible.
    let ident = id(n, 1);
    let perm = TensorOp::permutation(n);
    let cds: Vec<(&TensorOp, &TensorOp)> = [(&b.r, &b.c, &b.d), (&p.rf.r, &p.rf.c, &p.rf.d), (&perm, &ident, &ident)]
        .into_iter()
        .filter(|(x, _, _)| certify_compatible(x, &p.f))
        .map(|(_, c, d)| (c, d))
        .collect();
    let on = |x: &TensorOp, s: usize| x.embed_spaces(&[s], 2);
    for &(cx, dx) in &cds {
        for &(cy, dy) in &cds {
            let f = &p.f;
            log.eq("FCC", &f.matmul(&on(cx, 1)?).matmul(&on(cy, 2)?), &on(cy, 1)?.matmul(&on(cx, 2)?).matmul(f));
            log.eq("FCC", &f.matmul(&on(dx, 1)?).matmul(&on(dy, 2)?), &on(dy, 1)?.matmul(&on(dx, 2)?).matmul(f));
            let cxdy = cx.matmul(dy);
            let dycx = dy.matmul(cx);
            log.eq("FCD", &f.matmul(&on(&cxdy, 2)?), &on(&cxdy, 1)?.matmul(f));
            log.eq("FCD", &f.matmul(&on(&dycx, 1)?), &on(&dycx, 2)?.matmul(f));
        }
        let lhs = on(cx, 1)?.matmul(&p.f_inv).partial_trace(&[1])?;
        log.eq("CxDf", &lhs, &cx.matmul(&p.d_f));
        log.eq("CxDf", &lhs, &p.d_f.matmul(cx));
        let lhs = on(dx, 2)?.matmul(&p.f_inv).partial_trace(&[2])?;
        log.eq("DxCf", &lhs, &p.c_f.matmul(dx));
        log.eq("DxCf", &lhs, &dx.matmul(&p.c_f));
    }
    Ok(())
}

/// Psi_K = E_1 K E_1^-1 = mu^-2 C_2 K_21 C_2, checked against the solve.
pub fn psi_k_checks(b: &RBundle, log: &mut CheckLog) -> Result<()> {
    let psi_k = match log.outcome("s-inv", skew_inverse(&b.k)) {
        Some(x) => x,
        None => return Ok(()),
    };
    let e1 = b.e.embed_spaces(&[1], 2)?;
    let e1i = b.e_inv.embed_spaces(&[1], 2)?;
    log.eq("Psi_K", &e1.matmul(&b.k).matmul(&e1i), &psi_k);
    let c2 = b.c.embed_spaces(&[2], 2)?;
    let k21 = b.k.embed_spaces(&[2, 1], 2)?;
    let mu2 = (&b.ctx.mu * &b.ctx.mu).recip();
    log.eq("Psi_K", &c2.matmul(&k21).matmul(&c2).scale(&mu2), &psi_k);
    Ok(())
}

/// Round trips and trace relations of phi / xi / theta on one W-valued M.
pub fn map_checks(p: &Pair, m: &TensorOp, log: &mut CheckLog) -> Result<()> {
    let phi = p.phi(m)?;
    let xi = p.xi(m)?;
    log.eq("phi-inv", &p.phi_inv(&phi)?, m);
    log.eq("phi-inv", &p.phi(&p.phi_inv(m)?)?, m);
    log.eq("xi-inv", &p.xi_inv(&xi)?, m);
    log.eq("xi-inv", &p.xi(&p.xi_inv(m)?)?, m);
    let th = p.theta(m)?;
    log.eq("Pi-inv", &p.theta_inv(&th)?, m);
    log.eq("Pi-inv", &p.theta(&p.theta_inv(m)?)?, m);
    let tr = p.rtrace(m)?;
    log.eq("phi-xi-traces", &p.rtrace_f(&phi)?, &tr);
    log.eq("phi-xi-traces", &p.rtrace_f(&xi)?, &tr.scale(p.mu()));
    let w = m.aux();
    let g = p.g.lift_aux(w)?;
    let g_inv = p.g_inv.lift_aux(w)?;
    let conj = g_inv.matmul(m).matmul(&g);
    log.eq("composition", &p.xi(&th)?, &conj);
    log.eq("composition", &p.theta(&xi)?, &conj);
    // Tr_{R(2)}(K M_1 K) = I Tr_R M
    let m1 = m.embed_spaces(&[1], 2)?;
    let k = p.r.k.lift_aux(w)?;
    let kmk = k.matmul(&m1).trace_product(&k, Some(&p.r.d), &[2])?;
    log.eq("traceKMK", &kmk, &tr.embed_spaces(&[], 1)?);
    Ok(())
}
