//! BMW words and their images under rho_R, baxterized elements and the
//! idempotent families: antisymmetrizers a^(i), symmetrizers s^(i) and
//! contractors c^(2i); Z and tau operators; q-dimensions; classification.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{delta_i, pow, qdim_orthogonal, QContext, Scalar, Series};
use crate::report::CheckLog;
use crate::rmatrix::{Pair, RBundle, TypeTag};
use crate::tensor::TensorOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    Sigma(usize),
    SigmaInv(usize),
    Kappa(usize),
}

impl Letter {
    fn index(self) -> usize {
        match self {
            Letter::Sigma(i) | Letter::SigmaInv(i) | Letter::Kappa(i) => i,
        }
    }

    fn shifted(self, by: usize) -> Self {
        match self {
            Letter::Sigma(i) => Letter::Sigma(i + by),
            Letter::SigmaInv(i) => Letter::SigmaInv(i + by),
            Letter::Kappa(i) => Letter::Kappa(i + by),
        }
    }
}

/// A word in sigma_i, sigma_i^-1, kappa_i on `n` strands.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BmwWord {
    pub n: usize,
    pub letters: Vec<Letter>,
}

impl BmwWord {
    pub fn new(n: usize, letters: Vec<Letter>) -> Result<Self> {
        for l in &letters {
            let i = l.index();
            if i == 0 || i >= n {
                return Err(Error::Index(format!("strand index {i} invalid on {n} strands")));
            }
        }
        Ok(Self { n, letters })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, letters: Vec::new() }
    }

    /// Parses e.g. "s1 s2' k1" (a trailing ' marks an inverse).
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for tok in text.split_whitespace() {
            let bad = || Error::Parse(format!("bad letter {tok:?}"));
            let (head, inv) = match tok.strip_suffix('\'') {
                Some(h) => (h, true),
                None => (tok, false),
            };
            let (kind, num) = head.split_at(1);
            let i: usize = num.parse().map_err(|_| bad())?;
            letters.push(match (kind, inv) {
                ("s", false) => Letter::Sigma(i),
                ("s", true) => Letter::SigmaInv(i),
                ("k", false) => Letter::Kappa(i),
                _ => return Err(bad()),
            });
        }
        Self::new(n, letters)
    }

    /// alpha -> alpha^{up i}: strand indices shifted, n grows by `by`.
    pub fn shift(&self, by: usize) -> Self {
        Self { n: self.n + by, letters: self.letters.iter().map(|l| l.shifted(by)).collect() }
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut letters = self.letters.clone();
        letters.extend(other.letters.iter().copied());
        Self { n: self.n.max(other.n), letters }
    }

    pub fn widen(&self, n: usize) -> Self {
        Self { n: self.n.max(n), letters: self.letters.clone() }
    }
}

impl fmt::Display for BmwWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|l| match l {
                Letter::Sigma(i) => format!("s{i}"),
                Letter::SigmaInv(i) => format!("s{i}'"),
                Letter::Kappa(i) => format!("k{i}"),
            })
            .collect();
        if parts.is_empty() {
            write!(f, "1[{}]", self.n)
        } else {
            write!(f, "{}", parts.join(" "))
        }
    }
}

/// rho_R generators R_i, R_i^-1, K_i embedded on n strands.
#[derive(Debug)]
pub struct Strands {
    pub n: usize,
    r: Vec<TensorOp>,
    ri: Vec<TensorOp>,
    k: Vec<TensorOp>,
    id: TensorOp,
    ctx: QContext,
}

impl Strands {
    pub fn new(b: &RBundle, n: usize) -> Result<Self> {
        let mut r = Vec::new();
        let mut ri = Vec::new();
        let mut k = Vec::new();
        for i in 1..n {
            r.push(b.r.embed(i, n)?);
            ri.push(b.r_inv.embed(i, n)?);
            k.push(b.k.embed(i, n)?);
        }
        Ok(Self { n, r, ri, k, id: TensorOp::identity(b.n(), n, 1)?, ctx: b.ctx.clone() })
    }

    fn check(&self, i: usize) -> Result<()> {
        if i == 0 || i >= self.n {
            return Err(Error::Index(format!("strand index {i} invalid on {} strands", self.n)));
        }
        Ok(())
    }

    pub fn sigma(&self, i: usize) -> &TensorOp {
        &self.r[i - 1]
    }
    pub fn sigma_inv(&self, i: usize) -> &TensorOp {
        &self.ri[i - 1]
    }
    pub fn kappa(&self, i: usize) -> &TensorOp {
        &self.k[i - 1]
    }
    pub fn identity(&self) -> &TensorOp {
        &self.id
    }

    pub fn letter(&self, l: Letter) -> Result<&TensorOp> {
        self.check(l.index())?;
        Ok(match l {
            Letter::Sigma(i) => self.sigma(i),
            Letter::SigmaInv(i) => self.sigma_inv(i),
            Letter::Kappa(i) => self.kappa(i),
        })
    }

    pub fn rho(&self, w: &BmwWord) -> Result<TensorOp> {
        if w.n > self.n {
            return Err(Error::Index(format!("word on {} strands, context has {}", w.n, self.n)));
        }
        let mut out = self.id.clone();
        for &l in &w.letters {
            out = out.matmul(self.letter(l)?);
        }
        Ok(out)
    }

    /// rho of sigma_i^eps(x) = 1 + (x-1)/(q-q^-1) sigma_i + (x-1)/(alpha x+1) kappa_i,
    /// alpha = -eps q^-eps mu^-1.
    pub fn baxterized(&self, i: usize, x: &Scalar, eps: i32) -> Result<TensorOp> {
        self.check(i)?;
        let ctx = &self.ctx;
        let alpha = if eps > 0 { -(ctx.qinv() / &ctx.mu) } else { &ctx.q / &ctx.mu };
        let den = &alpha * x + Scalar::one();
        if den.is_zero() {
            return Err(Error::Pole(format!("baxterized element at x = -1/alpha (i = {i})")));
        }
        let xm1 = x - Scalar::one();
        let a = &xm1 / ctx.lambda();
        let b = &xm1 / den;
        Ok(&(&self.id + &self.sigma(i).scale(&a)) + &self.kappa(i).scale(&b))
    }

    /// Places an operator on `m` strands onto strands off+1..off+m.
    pub fn place(&self, op: &TensorOp, off: usize) -> Result<TensorOp> {
        let m = op.arity();
        if off + m > self.n {
            return Err(Error::Index(format!("cannot place arity {m} at offset {off} in {}", self.n)));
        }
        if m == self.n {
            return Ok(op.clone());
        }
        let pos: Vec<usize> = (off + 1..=off + m).collect();
        op.embed_spaces(&pos, self.n)
    }
}

/// Lazily built generator sets for one bundle.
#[derive(Debug)]
pub struct Rho {
    pub bundle: RBundle,
    cache: RefCell<BTreeMap<usize, Rc<Strands>>>,
}

impl Rho {
    pub fn new(bundle: &RBundle) -> Self {
        Self { bundle: bundle.clone(), cache: RefCell::new(BTreeMap::new()) }
    }

    pub fn at(&self, n: usize) -> Result<Rc<Strands>> {
        if let Some(s) = self.cache.borrow().get(&n) {
            return Ok(s.clone());
        }
        let s = Rc::new(Strands::new(&self.bundle, n)?);
        self.cache.borrow_mut().insert(n, s.clone());
        Ok(s)
    }

    pub fn rho(&self, w: &BmwWord) -> Result<TensorOp> {
        self.at(w.n)?.rho(w)
    }
}

/// Full R-trace over all spaces.
pub fn full_rtrace(x: &TensorOp, d: &TensorOp) -> Result<Scalar> {
    let spaces: Vec<usize> = (1..=x.arity()).collect();
    Ok(x.weighted_trace(Some(d), &spaces)?.as_scalar())
}

/// Cached rho_R images of a^(i), s^(i) (i <= max) and c^(2i) (2i <= max_c).
#[derive(Debug, Clone)]
pub struct ProjectorFamily {
    pub ctx: QContext,
    /// a[i] = rho(a^(i)) on i strands; a[0] is unused.
    pub a: Vec<TensorOp>,
    pub s: Vec<TensorOp>,
    /// c[i] = rho(c^(2i)) on 2i strands; c[0] is unused.
    pub c: Vec<TensorOp>,
    pub delta: Vec<Scalar>,
    pub big_delta: Vec<Scalar>,
}

fn placeholder() -> TensorOp {
    TensorOp::scalar(Scalar::one())
}

impl ProjectorFamily {
    /// Builds the families by the first recursive form; the second form,
    /// the product form of the contractors and the closed forms at level 2
    /// are logged as cross-checks.
    pub fn build(rho: &Rho, max_a: usize, max_s: usize, max_c: usize, log: &mut CheckLog) -> Result<Self> {
        let b = &rho.bundle;
        let ctx = b.ctx.clone();
        let n = b.n();
        let mut a = vec![placeholder(), TensorOp::identity(n, 1, 1)?];
        let mut s = a.clone();
        for i in 1..max_a.max(max_s) {
            let st = rho.at(i + 1)?;
            let iq1 = ctx.qnum(i as i64 + 1);
            if iq1.is_zero() {
                return Err(Error::Pole(format!("({})_q = 0", i + 1)));
            }
            if i < max_a {
                let xa = ctx.qpow(-2 * i as i64);
                let ca = ctx.qpow(i as i64) / &iq1;
                let lo = st.place(&a[i], 0)?;
                let up = st.place(&a[i], 1)?;
                let next = lo.matmul(&st.baxterized(i, &xa, -1)?).matmul(&lo).scale(&ca);
                let alt = up.matmul(&st.baxterized(1, &xa, -1)?).matmul(&up).scale(&ca);
                log.eq("a^k", &next, &alt);
                a.push(next);
            }
            if i < max_s {
                let xs = ctx.qpow(2 * i as i64);
                let cs = ctx.qpow(-(i as i64)) / &iq1;
                let lo = st.place(&s[i], 0)?;
                let up = st.place(&s[i], 1)?;
                let next = lo.matmul(&st.baxterized(i, &xs, 1)?).matmul(&lo).scale(&cs);
                let alt = up.matmul(&st.baxterized(1, &xs, 1)?).matmul(&up).scale(&cs);
                log.eq("s^k", &next, &alt);
                s.push(next);
            }
        }
        if max_a >= 2 && max_s >= 2 {
            let st = rho.at(2)?;
            let (q, mu) = (&ctx.q, &ctx.mu);
            let sig = st.sigma(1);
            let q2 = ctx.qnum(2);
            let a2 = sig.scale(&-Scalar::one()).add_identity(q).matmul(&sig.scale(&-Scalar::one()).add_identity(mu));
            let a2 = a2.scale(&(&q2 * (mu + ctx.qinv())).recip());
            log.eq("a^2", &a[2], &a2);
            let s2 = sig.add_identity(&ctx.qinv()).matmul(&sig.scale(&-Scalar::one()).add_identity(mu));
            let s2 = s2.scale(&(&q2 * (mu - q)).recip());
            log.eq("s^2", &s[2], &s2);
            let as2 = st.baxterized(1, &ctx.qpow(-2), -1)?;
            log.eq("as-2", &as2, &a[2].scale(&(ctx.qinv() * &q2)));
        }

        let mut c = vec![placeholder()];
        if max_c >= 2 {
            let eta_inv = ctx.eta.recip();
            c.push(b.k.scale(&eta_inv));
            let mut i = 1;
            while 2 * i + 2 <= max_c {
                let st = rho.at(2 * i + 2)?;
                let up = st.place(&c[i], 1)?;
                let next = up.matmul(st.kappa(1)).matmul(st.kappa(2 * i + 1)).matmul(&up);
                c.push(next);
                i += 1;
            }
            for j in 1..c.len() {
                let prod = efoi(b, j)?;
                log.eq("efoi", &prod, &c[j]);
            }
        }

        let mut delta = vec![Scalar::one()];
        let mut big_delta = vec![Scalar::one()];
        for i in 1..=max_a {
            let di = delta_i(i as i64, &ctx)?;
            big_delta.push(&big_delta[i - 1] * &di);
            delta.push(di);
        }
        Ok(Self { ctx, a, s, c, delta, big_delta })
    }

    pub fn max_a(&self) -> usize {
        self.a.len() - 1
    }

    pub fn max_s(&self) -> usize {
        self.s.len() - 1
    }

    pub fn max_c(&self) -> usize {
        self.c.len() - 1
    }
}

/// Product form c^(2j) = prod_s eta^-1 E_s^{s-j} K_{s,2j+1-s} E_s^{j-s}.
pub fn efoi(b: &RBundle, j: usize) -> Result<TensorOp> {
    let n2 = 2 * j;
    let eta_inv = b.ctx.eta.recip();
    let mut out = TensorOp::identity(b.n(), n2, 1)?;
    for s in 1..=j {
        let e_neg = b.e_inv.pow(j - s).embed_spaces(&[s], n2)?;
        let e_pos = b.e.pow(j - s).embed_spaces(&[s], n2)?;
        let k = b.k.embed_spaces(&[s, n2 + 1 - s], n2)?;
        out = out.matmul(&e_neg.matmul(&k).matmul(&e_pos).scale(&eta_inv));
    }
    Ok(out)
}

/// Z^(i) for i = 1..=max, with both decompositions compared.
pub fn z_operators(pair: &Pair, max: usize, log: &mut CheckLog) -> Result<Vec<TensorOp>> {
    let n = pair.n();
    let mut z = vec![placeholder(), TensorOp::identity(n, 1, 1)?];
    for i in 1..max {
        let m = i + 1;
        let zi = z[i].embed_spaces(&(1..=i).collect::<Vec<_>>(), m)?;
        let mut left = TensorOp::identity(n, m, 1)?;
        let mut right = TensorOp::identity(n, m, 1)?;
        for j in 1..=i {
            left = left.matmul(&pair.f.embed(j, m)?);
            right = right.matmul(&pair.f.embed(i + 1 - j, m)?);
        }
        let a = left.matmul(&zi);
        let b = zi.matmul(&right);
        log.eq("Z-i", &a, &b);
        z.push(a);
    }
    Ok(z)
}

/// tau^(n) = tau^(n-1) sigma_{n-1} ... sigma_1 on n strands.
pub fn tau_operator(st: &Strands) -> Result<TensorOp> {
    let n = st.n;
    let mut tau = st.identity().clone();
    for j in 1..n {
        for i in (1..=j).rev() {
            tau = tau.matmul(st.sigma(i));
        }
    }
    Ok(tau)
}

/// Classification result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub tag: TypeTag,
    pub k: usize,
}

/// Smallest k with a^(k) != 0 and a^(k)^{up 1} sigma^-_1(q^-2k) a^(k)^{up 1} = 0.
pub fn classify(rho: &Rho, fam: &ProjectorFamily, kmax: usize) -> Result<Classification> {
    let ctx = &fam.ctx;
    for k in 1..=kmax.min(fam.max_a()) {
        if fam.a[k].is_zero() {
            return Err(Error::fails("spec4", format!("a^({k}) vanishes before the test product does")));
        }
        let st = rho.at(k + 1)?;
        let up = st.place(&fam.a[k], 1)?;
        let prod = up.matmul(&st.baxterized(1, &ctx.qpow(-2 * k as i64), -1)?).matmul(&up);
        if prod.is_zero() {
            let kk = k as i64;
            let tag = if ctx.mu == -ctx.qpow(-1 - 2 * kk) {
                TypeTag::Sp
            } else if ctx.mu == ctx.qpow(1 - kk) && fam.a[k].rank() == 1 {
                TypeTag::O
            } else {
                TypeTag::GenericBMW
            };
            return Ok(Classification { tag, k });
        }
    }
    Err(Error::InconclusiveWithinCap(kmax))
}

/// Number of strands that the "k" of a classification refers to for the
/// antisymmetrizer tests (k for both Sp(2k) and O(k)).
pub fn expected_k(ctx: &QContext) -> usize {
    ctx.k
}

/// Relations on three or four strands that every BMW representation obeys.
pub fn word_identities(rho: &Rho, log: &mut CheckLog) -> Result<()> {
    let st = rho.at(3)?;
    let ctx = &rho.bundle.ctx;
    let mu = &ctx.mu;
    let (s1, s2) = (st.sigma(1), st.sigma(2));
    let (s1i, s2i) = (st.sigma_inv(1), st.sigma_inv(2));
    let (k1, k2) = (st.kappa(1), st.kappa(2));
    log.eq("braid", &s1.matmul(s2).matmul(s1), &s2.matmul(s1).matmul(s2));
    log.eq("bmw2", &s1.matmul(k1), &k1.scale(mu));
    log.eq("bmw2", &k1.matmul(s1), &k1.scale(mu));
    log.eq("bmw2", &k1.matmul(s2).matmul(k1), &k1.scale(&mu.recip()));
    log.eq("bmw2", &k1.matmul(s2i).matmul(k1), &k1.scale(mu));
    log.eq("bmw3", &k1.matmul(s2), &k1.matmul(k2).matmul(s1i));
    log.eq("bmw3", &k1.matmul(s2i), &k1.matmul(k2).matmul(s1));
    log.eq("bmw3", &s1.matmul(k2), &s2i.matmul(k1).matmul(k2));
    log.eq("bmw3", &s1i.matmul(k2), &s2.matmul(k1).matmul(k2));
    log.eq("bmw5", &k1.matmul(k2).matmul(k1), k1);
    log.eq("bmw5", &k2.matmul(k1).matmul(k2), k2);
    log.eq("bmw5", &k1.matmul(k1), &k1.scale(&ctx.eta));
    let lam = ctx.lambda();
    let m1 = s1.add_identity(&-lam.clone());
    let m2 = s2.add_identity(&-lam);
    log.eq("bmw7", &m1.matmul(k2).matmul(&m1), &m2.matmul(k1).matmul(&m2));
    let two = crate::exact::int(2);
    let five = crate::exact::int(5);
    let ten = crate::exact::int(10);
    for eps in [1, -1] {
        let lhs = st.baxterized(1, &two, eps)?.matmul(&st.baxterized(2, &ten, eps)?).matmul(&st.baxterized(1, &five, eps)?);
        let rhs = st.baxterized(2, &five, eps)?.matmul(&st.baxterized(1, &ten, eps)?).matmul(&st.baxterized(2, &two, eps)?);
        log.eq("bYBE", &lhs, &rhs);
    }
    log.eq("baxterized-1", &st.baxterized(1, &Scalar::one(), 1)?, st.identity());

    let st4 = rho.at(4)?;
    let (k1, k2, k3) = (st4.kappa(1), st4.kappa(2), st4.kappa(3));
    log.eq("secoide", &k1.matmul(k2).matmul(k3).matmul(st4.sigma(1)), &st4.sigma(3).matmul(k1).matmul(k2).matmul(k3));
    log.eq("secoide", &k3.matmul(k2).matmul(k1).matmul(st4.sigma(3)), &st4.sigma(1).matmul(k3).matmul(k2).matmul(k1));
    Ok(())
}

/// Prop 2.2 style relations, trace formulas and q-dimensions for one family.
pub fn projector_suite(rho: &Rho, fam: &ProjectorFamily, log: &mut CheckLog) -> Result<()> {
    let b = &rho.bundle;
    let ctx = &fam.ctx;
    let (q, mu) = (&ctx.q, &ctx.mu);
    let qinv = ctx.qinv();
    let d = &b.d;

    for i in 2..=fam.max_a().max(fam.max_s()) {
        let st = rho.at(i)?;
        for (fam_x, other, sign) in [(&fam.a, &fam.s, -qinv.clone()), (&fam.s, &fam.a, q.clone())] {
            let Some(x) = fam_x.get(i) else { continue };
            log.eq("idemp", &x.matmul(x), x);
            for j in 1..i {
                log.eq("idemp-1", &x.matmul(st.sigma(j)), &x.scale(&sign));
                log.eq("idemp-1", &st.sigma(j).matmul(x), &x.scale(&sign));
            }
            for m in 2..i {
                for off in 0..=(i - m) {
                    log.eq("idemp-2", &x.matmul(&st.place(&fam_x[m], off)?), x);
                }
            }
            for m in 2..=i.min(other.len() - 1) {
                log.zero("idemp-3", &x.matmul(&st.place(&other[m], 0)?));
            }
        }
    }
    if fam.max_a() >= 2 {
        let st = rho.at(2)?;
        let eta_inv = ctx.eta.recip();
        let kk = st.kappa(1).scale(&eta_inv);
        log.eq("resolution", &(&fam.a[2] + &fam.s[2]), &(st.identity() - &kk));
        let spec = &(&fam.a[2].scale(&-qinv.clone()) + &fam.s[2].scale(q)) + &kk.scale(mu);
        log.eq("specdec", &spec, st.sigma(1));
    }

    for i in 1..=fam.max_c() {
        let n2 = 2 * i;
        let st = rho.at(n2)?;
        let c = &fam.c[i];
        log.eq("idemp-c", &c.matmul(c), c);
        let rank = c.rank();
        log.truth("rank-c", rank == 1, || format!("rank c^({n2}) = {rank}"));
        for j in 1..i {
            let inner = st.place(&fam.c[j], i - j)?;
            log.eq("idemp-c1", &c.matmul(&inner), c);
        }
        for j in 1..n2 {
            log.eq("idemp-c2", &c.matmul(st.sigma(j)), &c.matmul(st.sigma(n2 - j)));
        }
        log.eq("idemp-c3", &c.matmul(st.sigma(i)), &c.scale(mu));
        for m in (i + 1)..=n2.min(fam.max_a()) {
            log.zero("idemp-c4", &c.matmul(&st.place(&fam.a[m], 0)?));
        }
        for m in (i + 1)..=n2.min(fam.max_s()) {
            log.zero("idemp-c4", &c.matmul(&st.place(&fam.s[m], 0)?));
        }
        // trace formulas
        let factor = mu / &ctx.eta;
        let tr = c.weighted_trace(Some(d), &[n2])?;
        let expect = if i == 1 {
            TensorOp::identity(b.n(), 1, 1)?.scale(&factor)
        } else {
            let lower = &fam.c[i - 1];
            let pos: Vec<usize> = (2..n2).collect();
            lower.embed_spaces(&pos, n2 - 1)?.scale(&factor)
        };
        log.eq("trace-c2i", &tr, &expect);
        let spaces: Vec<usize> = (i + 1..=n2).collect();
        let tr = c.weighted_trace(Some(d), &spaces)?;
        log.eq("traces-c2i", &tr, &TensorOp::identity(b.n(), i, 1)?.scale(&pow(&factor, i as i64)));
        let dd = all_spaces(d, n2)?;
        log.eq("spec-c1", &dd.matmul(c), &c.scale(&pow(mu, n2 as i64)));
    }

    for i in 1..=fam.max_a() {
        let a = &fam.a[i];
        if i >= 2 {
            let tr = a.weighted_trace(Some(d), &[i])?;
            let lower = fam.a[i - 1].clone();
            log.eq("spec1", &tr, &lower.scale(&fam.delta[i]));
        }
        let full = full_rtrace(a, d)?;
        log.scalar_eq("Delta-i", &full, &fam.big_delta[i]);
        if ctx.series == Series::O && i <= ctx.k && *mu == ctx.qpow(1 - ctx.k as i64) {
            log.scalar_eq(&format!("qdim-O(k)[i={i}]"), &full, &qdim_orthogonal(i, ctx));
        }
    }
    if ctx.series == Series::O && fam.max_a() >= ctx.k {
        let k = ctx.k;
        let dd = all_spaces(d, k)?;
        let expo = k as i64 * (1 - k as i64);
        log.eq("spec-a1", &dd.matmul(&fam.a[k]), &fam.a[k].scale(&ctx.qpow(expo)));
    }
    Ok(())
}

/// D on every one of n spaces.
pub fn all_spaces(d: &TensorOp, n: usize) -> Result<TensorOp> {
    let mut out = TensorOp::identity(d.n(), n, 1)?;
    for s in 1..=n {
        out = out.matmul(&d.embed_spaces(&[s], n)?);
    }
    Ok(out)
}

/// Kernel identities that follow from rank K = 1.
pub fn rank_one_identities(b: &RBundle, log: &mut CheckLog) -> Result<()> {
    let n = b.n();
    let p = TensorOp::permutation(n);
    let e1 = b.e.embed_spaces(&[1], 2)?;
    let e2 = b.e.embed_spaces(&[2], 2)?;
    let ee = e1.matmul(&e2);
    log.eq("kcax", &b.k.matmul(&ee), &b.k);
    log.eq("kcax", &ee.matmul(&b.k), &b.k);
    let k12 = b.k.embed(1, 3)?;
    let k23 = b.k.embed(2, 3)?;
    let rhs = TensorOp::product(&[b.e.embed_spaces(&[3], 3)?, k12.clone(), p.embed(1, 3)?, p.embed_pair(1, 3, 3)?])
        .expect("nonempty");
    log.eq("k12k23", &k12.matmul(&k23), &rhs);
    let k23 = b.k.embed(2, 4)?;
    let k14 = b.k.embed_pair(1, 4, 4)?;
    let lhs = TensorOp::product(&[k23.clone(), k14.clone(), p.embed(1, 4)?, p.embed(3, 4)?]).expect("nonempty");
    log.eq("kkpp", &lhs, &k23.matmul(&k14));
    Ok(())
}

/// Twisted counterparts: Z intertwiners, spec-c2 / spec-a2 and tau.
pub fn twist_projector_suite(
    pair: &Pair,
    rho: &Rho,
    fam: &ProjectorFamily,
    rho_f: &Rho,
    fam_f: &ProjectorFamily,
    zmax: usize,
    log: &mut CheckLog,
) -> Result<()> {
    let ctx = &fam.ctx;
    let mu = &ctx.mu;
    let z = z_operators(pair, zmax, log)?;
    for k in 2..=zmax {
        let st = rho.at(k)?;
        let stf = rho_f.at(k)?;
        for i in 1..k {
            log.eq("Z-R", &st.sigma(i).matmul(&z[k]), &z[k].matmul(stf.sigma(k - i)));
        }
        if k <= fam.max_a() && k <= fam_f.max_a() {
            log.eq("Z-ac", &fam.a[k].matmul(&z[k]), &z[k].matmul(&fam_f.a[k]));
        }
        if k % 2 == 0 && k / 2 <= fam.max_c() && k / 2 <= fam_f.max_c() {
            log.eq("Z-ac", &fam.c[k / 2].matmul(&z[k]), &z[k].matmul(&fam_f.c[k / 2]));
        }
    }
    let df = &pair.rf.d;
    for i in 1..=fam_f.max_c() {
        let dd = all_spaces(df, 2 * i)?;
        let c = &fam_f.c[i];
        log.eq("spec-c2", &dd.matmul(c), &c.scale(&pow(mu, 2 * i as i64)));
    }
    if ctx.series == Series::O && fam_f.max_a() >= ctx.k {
        let k = ctx.k;
        let dd = all_spaces(df, k)?;
        let expo = k as i64 * (1 - k as i64);
        log.eq("spec-a2", &dd.matmul(&fam_f.a[k]), &fam_f.a[k].scale(&ctx.qpow(expo)));
    }
    Ok(())
}

/// tau^(n) sigma_i tau^(n)^-1 = sigma_{n-i}.
pub fn tau_checks(rho: &Rho, n: usize, log: &mut CheckLog) -> Result<()> {
    let st = rho.at(n)?;
    let tau = tau_operator(&st)?;
    let tau_inv = tau.invert()?;
    for i in 1..n {
        log.eq("innalis", &tau.matmul(st.sigma(i)).matmul(&tau_inv), st.sigma(n - i));
    }
    Ok(())
}

/// Delta^(i) for i <= max by the product of delta_j.
pub fn qdim(i: usize, fam: &ProjectorFamily) -> Result<Scalar> {
    fam.big_delta.get(i).cloned().ok_or_else(|| Error::Index(format!("Delta^({i}) beyond stored range")))
}
