//! Orthosymplectic spectral variables: symmetric functions, the images of
//! the characteristic generators under the pi homomorphisms, and the
//! factorized Cayley-Hamilton and power-sum formulas, checked pointwise
//! against Newton-recursion oracles.
//!
//! Variables nu_1..nu_M (M even) obey nu_j nu_{M+1-j} = nu_0^2; the free
//! generators are nu_0 and the first half.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{fmt_scalar, frac, int, pow, Scalar};
use crate::report::{CheckLog, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpectralType {
    Sp,
    OPlus,
    OMinus,
    OOdd,
}

impl SpectralType {
    pub const ALL: [SpectralType; 4] = [SpectralType::Sp, SpectralType::OPlus, SpectralType::OMinus, SpectralType::OOdd];

    /// The k of the matching bundle: Sp(2k) -> k, O(k) -> k.
    pub fn k(self, rank: usize) -> usize {
        match self {
            SpectralType::Sp => rank,
            SpectralType::OPlus | SpectralType::OMinus => 2 * rank,
            SpectralType::OOdd => 2 * rank - 1,
        }
    }

    /// Number of variables nu_1..nu_M.
    pub fn count(self, rank: usize) -> usize {
        match self {
            SpectralType::Sp | SpectralType::OPlus => 2 * rank,
            SpectralType::OMinus | SpectralType::OOdd => 2 * rank - 2,
        }
    }

    pub fn mu(self, rank: usize, q: &Scalar) -> Scalar {
        let k = self.k(rank) as i64;
        match self {
            SpectralType::Sp => -pow(q, -1 - 2 * k),
            _ => pow(q, 1 - k),
        }
    }

    pub fn label(self, rank: usize) -> String {
        match self {
            SpectralType::Sp => format!("Sp({})", 2 * rank),
            SpectralType::OPlus => format!("O+({})", 2 * rank),
            SpectralType::OMinus => format!("O-({})", 2 * rank),
            SpectralType::OOdd => format!("O({})", 2 * rank - 1),
        }
    }

    fn min_rank(self) -> usize {
        match self {
            SpectralType::Sp | SpectralType::OPlus => 1,
            SpectralType::OMinus | SpectralType::OOdd => 2,
        }
    }
}

impl fmt::Display for SpectralType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectralType::Sp => "sp",
            SpectralType::OPlus => "o+",
            SpectralType::OMinus => "o-",
            SpectralType::OOdd => "oodd",
        })
    }
}

impl FromStr for SpectralType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" => Ok(SpectralType::Sp),
            "o+" | "oplus" => Ok(SpectralType::OPlus),
            "o-" | "ominus" => Ok(SpectralType::OMinus),
            "oodd" | "o-odd" | "odd" => Ok(SpectralType::OOdd),
            other => Err(Error::Config(format!("unknown spectral type {other:?}"))),
        }
    }
}

// ---- symmetric functions ---------------------------------------------------

/// e_i(vars); e_0 = 1, zero for i > #vars.
pub fn elementary(i: usize, vars: &[Scalar]) -> Scalar {
    elementary_all(i, vars).pop().unwrap_or_else(Scalar::zero)
}

/// e_0..e_max.
pub fn elementary_all(max: usize, vars: &[Scalar]) -> Vec<Scalar> {
    let mut e = vec![Scalar::zero(); max + 1];
    e[0] = Scalar::one();
    for v in vars {
        for i in (1..=max).rev() {
            let t = &e[i - 1] * v;
            e[i] += t;
        }
    }
    e
}

/// h_n(vars); h_0 = 1.
pub fn complete(n: usize, vars: &[Scalar]) -> Scalar {
    complete_all(n, vars).pop().unwrap_or_else(Scalar::zero)
}

pub fn complete_all(max: usize, vars: &[Scalar]) -> Vec<Scalar> {
    let mut h = vec![Scalar::zero(); max + 1];
    h[0] = Scalar::one();
    for v in vars {
        for i in 1..=max {
            let t = &h[i - 1] * v;
            h[i] += t;
        }
    }
    h
}

/// Coefficients (highest degree first) of prod (x - r).
pub fn poly_from_roots(roots: &[Scalar]) -> Vec<Scalar> {
    let mut c = vec![Scalar::one()];
    for r in roots {
        let mut next = vec![Scalar::zero(); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}

pub fn poly_mul(a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn sign(e: i64) -> Scalar {
    if e.rem_euclid(2) == 0 {
        Scalar::one()
    } else {
        -Scalar::one()
    }
}

fn qnum(q: &Scalar, n: i64) -> Scalar {
    (pow(q, n) - pow(q, -n)) / (q - q.recip())
}

// ---- points ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralPoint {
    pub ty: SpectralType,
    pub rank: usize,
    pub nu0: Scalar,
    /// nu_1..nu_M.
    pub nu: Vec<Scalar>,
}

impl SpectralPoint {
    /// Completes the free half by nu_{M+1-j} = nu_0^2 / nu_j.
    pub fn from_free(ty: SpectralType, rank: usize, nu0: Scalar, free: &[Scalar]) -> Result<Self> {
        let m = ty.count(rank);
        if free.len() != m / 2 {
            return Err(Error::ConstraintViolation(format!("{} needs {} free variables", ty.label(rank), m / 2)));
        }
        if nu0.is_zero() || free.iter().any(Zero::is_zero) {
            return Err(Error::ConstraintViolation("spectral variables must be nonzero".into()));
        }
        let n2 = &nu0 * &nu0;
        let mut nu = free.to_vec();
        for j in (0..m / 2).rev() {
            nu.push(&n2 / &free[j]);
        }
        Ok(Self { ty, rank, nu0, nu })
    }

    /// Validates a full assignment.
    pub fn from_full(ty: SpectralType, rank: usize, nu0: Scalar, nu: Vec<Scalar>) -> Result<Self> {
        if nu.len() != ty.count(rank) {
            return Err(Error::ConstraintViolation(format!("{} needs {} variables", ty.label(rank), ty.count(rank))));
        }
        let pt = Self { ty, rank, nu0, nu };
        if let Some((j, r)) = pt.constraint_residuals().iter().enumerate().find(|(_, r)| !r.is_zero()) {
            return Err(Error::ConstraintViolation(format!("nu_{} nu_{} - nu_0^2 = {}", j + 1, pt.nu.len() - j, fmt_scalar(r))));
        }
        Ok(pt)
    }

    /// nu_j nu_{M+1-j} - nu_0^2 for j = 1..M/2.
    pub fn constraint_residuals(&self) -> Vec<Scalar> {
        let m = self.nu.len();
        let n2 = &self.nu0 * &self.nu0;
        (0..m / 2).map(|j| &self.nu[j] * &self.nu[m - 1 - j] - &n2).collect()
    }

    /// Arguments of the elementary functions giving pi(a_i).
    pub fn a_vars(&self) -> Vec<Scalar> {
        let mut v = match self.ty {
            SpectralType::Sp | SpectralType::OMinus => vec![self.nu0.clone(), -self.nu0.clone()],
            SpectralType::OPlus => vec![],
            SpectralType::OOdd => vec![self.nu0.clone()],
        };
        v.extend(self.nu.iter().cloned());
        v
    }

    /// nu_0, -nu_0 and all nu_i pairwise distinct and nonzero.
    pub fn is_generic(&self) -> bool {
        let mut all = vec![self.nu0.clone(), -self.nu0.clone()];
        all.extend(self.nu.iter().cloned());
        if all.iter().any(Zero::is_zero) {
            return false;
        }
        all.sort();
        all.windows(2).all(|w| w[0] != w[1])
    }

    pub fn describe(&self) -> Vec<String> {
        std::iter::once(&self.nu0).chain(self.nu.iter()).map(fmt_scalar).collect()
    }
}

fn small_rational(rng: &mut impl Rng) -> Scalar {
    let p: i64 = rng.random_range(1..=9) * if rng.random_bool(0.5) { 1 } else { -1 };
    let d: i64 = rng.random_range(1..=5);
    frac(p, d)
}

/// `count` points from one seeded stream; rejection keeps them generic.
pub fn sample_points(ty: SpectralType, rank: usize, seed: u64, count: usize) -> Result<Vec<SpectralPoint>> {
    if rank < ty.min_rank() {
        return Err(Error::Config(format!("rank {rank} too small for {ty}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = ty.count(rank);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut tries = 0;
        let pt = loop {
            tries += 1;
            if tries > 1000 {
                return Err(Error::DegeneratePoint(format!("no generic {} point after 1000 draws", ty.label(rank))));
            }
            let nu0 = small_rational(&mut rng);
            let free: Vec<Scalar> = (0..m / 2).map(|_| small_rational(&mut rng)).collect();
            let pt = SpectralPoint::from_free(ty, rank, nu0, &free)?;
            if pt.is_generic() {
                break pt;
            }
        };
        out.push(pt);
    }
    Ok(out)
}

pub fn sample_point(ty: SpectralType, rank: usize, seed: u64) -> Result<SpectralPoint> {
    Ok(sample_points(ty, rank, seed, 1)?.remove(0))
}

// ---- images ------------------------------------------------------------------

/// pi-images of g, g^{1/2}, a_i, s_i (i <= nmax).
#[derive(Debug, Clone)]
pub struct Images {
    pub g: Scalar,
    pub g_half: Option<Scalar>,
    pub a: Vec<Scalar>,
    pub s: Vec<Scalar>,
}

pub fn pi_map(pt: &SpectralPoint, nmax: usize) -> Images {
    let g = &pt.nu0 * &pt.nu0;
    let a = elementary_all(nmax, &pt.a_vars());
    let h = complete_all(nmax, &pt.nu);
    let s = match pt.ty {
        SpectralType::Sp | SpectralType::OMinus => h,
        SpectralType::OPlus => (0..=nmax).map(|n| if n >= 2 { &h[n] - &g * &h[n - 2] } else { h[n].clone() }).collect(),
        SpectralType::OOdd => (0..=nmax).map(|n| if n >= 1 { &h[n] + &pt.nu0 * &h[n - 1] } else { h[n].clone() }).collect(),
    };
    let g_half = (pt.ty == SpectralType::OOdd).then(|| pt.nu0.clone());
    Images { g, g_half, a, s }
}

fn ratio(num: Scalar, den: Scalar) -> Result<Scalar> {
    if den.is_zero() {
        return Err(Error::DegeneratePoint("coincident spectral variables".into()));
    }
    Ok(num / den)
}

/// The weights d_i of the power-sum parameterization.
pub fn d_weights(pt: &SpectralPoint, q: &Scalar) -> Result<Vec<Scalar>> {
    let m = pt.nu.len();
    let q2 = pow(q, -2);
    let q4 = pow(q, -4);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let partner = m - 1 - i;
        let vi = &pt.nu[i];
        let mut d = match pt.ty {
            SpectralType::Sp | SpectralType::OMinus => ratio(vi - &q4 * &pt.nu[partner], vi - &pt.nu[partner])?,
            SpectralType::OPlus => Scalar::one(),
            SpectralType::OOdd => ratio(vi - &q2 * &pt.nu0, vi - &pt.nu0)?,
        };
        for (j, vj) in pt.nu.iter().enumerate() {
            if j != i && j != partner {
                d *= ratio(vi - &q2 * vj, vi - vj)?;
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// p_n images for n = 0..=nmax from the d_i parameterization.
pub fn power_sum_images(pt: &SpectralPoint, q: &Scalar, nmax: usize) -> Result<Vec<Scalar>> {
    let d = d_weights(pt, q)?;
    let l = pt.rank as i64;
    Ok((0..=nmax)
        .map(|n| {
            let ni = n as i64;
            let mut p = pow(q, ni - 1) * d.iter().zip(&pt.nu).map(|(di, v)| di * pow(v, ni)).sum::<Scalar>();
            match pt.ty {
                SpectralType::OMinus => p += (Scalar::one() + sign(ni)) * pow(q, 1 - 2 * l) * pow(&pt.nu0, ni),
                SpectralType::OOdd => p += pow(q, 2 - 2 * l) * pow(&pt.nu0, ni),
                _ => {}
            }
            p
        })
        .collect())
}

/// q^{n-1} sum_i dhat_i v_i^n with dhat_i = prod_{j != i} (v_i - q^-2 v_j)/(v_i - v_j).
pub fn gs_power_sums(vars: &[Scalar], q: &Scalar, nmax: usize) -> Result<Vec<Scalar>> {
    let q2 = pow(q, -2);
    let mut dh = Vec::with_capacity(vars.len());
    for (i, vi) in vars.iter().enumerate() {
        let mut d = Scalar::one();
        for (j, vj) in vars.iter().enumerate() {
            if j != i {
                d *= ratio(vi - &q2 * vj, vi - vj)?;
            }
        }
        dh.push(d);
    }
    Ok((0..=nmax)
        .map(|n| pow(q, n as i64 - 1) * dh.iter().zip(vars).map(|(d, v)| d * pow(v, n as i64)).sum::<Scalar>())
        .collect())
}

/// Oracle: p_1..p_nmax solved term by term from the Newton relation for the
/// a-sequence; p_0 = Tr_R I.
pub fn newton_power_sums(a: &[Scalar], g: &Scalar, q: &Scalar, mu: &Scalar, nmax: usize) -> Vec<Scalar> {
    let lam = q - q.recip();
    let mut p = vec![(q - mu) * (q.recip() + mu) / &lam];
    for n in 1..=nmax {
        let ni = n as i64;
        let mut v = sign(ni - 1) * qnum(q, ni) * &a[n];
        for i in 1..=n / 2 {
            let ii = i as i64;
            let c = mu * pow(q, ni - 2 * ii) - pow(q, 1 - ni + 2 * ii);
            v += sign(ni) * c * &a[n - 2 * i] * pow(g, ii);
        }
        for i in 1..n {
            v -= sign(i as i64) * pow(q, i as i64) * &a[i] * &p[n - i];
        }
        p.push(v / &a[0]);
    }
    p
}

// ---- checks -------------------------------------------------------------------

/// epsilon_i images of the Cayley-Hamilton coefficients, per type.
fn epsilons(pt: &SpectralPoint, im: &Images) -> Vec<Scalar> {
    let g = &im.g;
    let a = &im.a;
    let fold_even = |i: usize| (0..=i / 2).map(|j| &a[i - 2 * j] * pow(g, j as i64)).sum::<Scalar>();
    match pt.ty {
        SpectralType::Sp => {
            let k = pt.rank;
            let mut e: Vec<Scalar> = (0..=k).map(fold_even).collect();
            for i in 1..=k {
                e.push(&e[k - i] * pow(g, i as i64));
            }
            e
        }
        SpectralType::OPlus => a[..=2 * pt.rank].to_vec(),
        SpectralType::OMinus => {
            let l = pt.rank;
            let mut e: Vec<Scalar> = (0..l).map(fold_even).collect();
            for i in 1..l {
                e.push(&e[l - 1 - i] * pow(g, i as i64));
            }
            e
        }
        SpectralType::OOdd => {
            let l = pt.rank;
            let h = im.g_half.clone().unwrap_or_default();
            let mut e: Vec<Scalar> =
                (0..l).map(|i| (0..=i).map(|j| &a[i - j] * pow(&-h.clone(), j as i64)).sum::<Scalar>()).collect();
            for i in 1..l {
                e.push(&e[l - 1 - i] * pow(g, i as i64));
            }
            e
        }
    }
}

/// All pointwise identities at one point; results go to `log`.
pub fn point_checks(pt: &SpectralPoint, q: &Scalar, log: &mut CheckLog) -> Result<()> {
    let ty = pt.ty;
    let k = ty.k(pt.rank);
    let m = pt.nu.len();
    let nmax = 2 * k + 2;
    let mu = ty.mu(pt.rank, q);
    let n0 = &pt.nu0;
    let g = n0 * n0;
    let zero = Scalar::zero();

    for r in pt.constraint_residuals() {
        log.scalar_eq("specSp", &r, &zero);
    }
    let im = pi_map(pt, nmax);
    let e_nu = elementary_all(nmax, &pt.nu);
    let h_nu = complete_all(nmax, &pt.nu);
    // classical sanity: sum (-1)^i e_i h_{n-i} = delta_{n,0}
    for n in 0..=nmax {
        let v: Scalar = (0..=n).map(|i| sign(i as i64) * &e_nu[i] * &h_nu[n - i]).sum();
        let want = if n == 0 { Scalar::one() } else { zero.clone() };
        log.scalar_eq(&format!("e-h[n={n}]"), &v, &want);
    }
    // shift identities for the extended argument lists
    for i in 0..=nmax {
        let rhs = match ty {
            SpectralType::Sp | SpectralType::OMinus => {
                &e_nu[i] - if i >= 2 { &g * &e_nu[i - 2] } else { zero.clone() }
            }
            SpectralType::OOdd => &e_nu[i] + if i >= 1 { n0 * &e_nu[i - 1] } else { zero.clone() },
            SpectralType::OPlus => e_nu[i].clone(),
        };
        log.scalar_eq(&format!("e-shift[i={i}]"), &im.a[i], &rhs);
    }
    // recip-nu
    let half = m / 2;
    for i in 1..=half {
        log.scalar_eq(&format!("recip-nu[i={i}]"), &e_nu[half + i], &(pow(&g, i as i64) * &e_nu[half - i]));
    }
    // epsilon images and factorized forms
    let eps = epsilons(pt, &im);
    for (i, e) in eps.iter().enumerate() {
        log.scalar_eq(&format!("rep-char[i={i}]"), e, &e_nu[i]);
    }
    let qnu: Vec<Scalar> = pt.nu.iter().map(|v| q * v).collect();
    let ch_poly: Vec<Scalar> = eps.iter().enumerate().map(|(i, e)| sign(i as i64) * pow(q, i as i64) * e).collect();
    let (extra, id) = match ty {
        SpectralType::Sp => (vec![Scalar::one()], "CHSp-factor"),
        SpectralType::OPlus => (vec![Scalar::one()], "CHO+factor"),
        // M^{2 bar} - g I  <->  (lambda - nu_0)(lambda + nu_0)
        SpectralType::OMinus => (vec![Scalar::one(), zero.clone(), -g.clone()], "CHO-factor"),
        SpectralType::OOdd => (vec![Scalar::one(), -n0.clone()], "CHOodd-factor"),
    };
    let lhs = poly_mul(&extra, &ch_poly);
    let mut roots = qnu.clone();
    match ty {
        SpectralType::OMinus => roots.extend([n0.clone(), -n0.clone()]),
        SpectralType::OOdd => roots.push(n0.clone()),
        _ => {}
    }
    let rhs = poly_from_roots(&roots);
    log.truth(id, lhs == rhs, || format!("coefficients {:?} vs {:?}", lhs.iter().map(fmt_scalar).collect::<Vec<_>>(), rhs.iter().map(fmt_scalar).collect::<Vec<_>>()));

    // reciprocal relations
    if ty != SpectralType::Sp {
        for i in 0..=k {
            let l = pow(&g, (k - i) as i64) * &im.a[i];
            log.scalar_eq(&format!("reciprocal[i={i}]"), &l, &(&im.a[k] * &im.a[k - i]));
        }
    }
    let l = pt.rank;
    match ty {
        SpectralType::OPlus | SpectralType::OMinus => {
            let sg = if ty == SpectralType::OPlus { Scalar::one() } else { -Scalar::one() };
            for i in 0..=l {
                log.scalar_eq(&format!("reciprocal2[i={i}]"), &im.a[l + i], &(&sg * pow(&g, i as i64) * &im.a[l - i]));
            }
            log.scalar_eq("component", &im.a[k], &(&sg * pow(&g, l as i64)));
        }
        SpectralType::OOdd => {
            let h = n0;
            log.scalar_eq("g-root", h, &(pow(&g, 1 - l as i64) * &im.a[k]));
            for i in 0..l {
                log.scalar_eq(&format!("reciprocal3[i={i}]"), &im.a[l + i], &(pow(&g, i as i64) * h * &im.a[l - 1 - i]));
            }
        }
        SpectralType::Sp => {}
    }

    // power sums: d_i parameterization vs the Newton oracle
    let p = power_sum_images(pt, q, nmax)?;
    let oracle = newton_power_sums(&im.a, &g, q, &mu, nmax);
    for n in 0..=nmax {
        let id = if n == 0 { "init-2".to_string() } else { format!("para-p[n={n}]") };
        log.scalar_eq(&id, &p[n], &oracle[n]);
    }
    // Newton-s and Wronski images
    for n in 1..=nmax {
        let ni = n as i64;
        let mut r = -qnum(q, ni) * &im.s[n];
        for i in 0..n {
            r += pow(q, -(i as i64)) * &im.s[i] * &p[n - i];
        }
        for i in 1..=n / 2 {
            let ii = i as i64;
            r -= (&mu * pow(q, 2 * ii - ni) + pow(q, ni - 2 * ii - 1)) * &im.s[n - 2 * i] * pow(&g, ii);
        }
        log.scalar_eq(&format!("Newton-s[n={n}]"), &r, &zero);
    }
    for n in 0..=nmax {
        let mut w: Scalar = (0..=n).map(|i| sign(i as i64) * &im.a[i] * &im.s[n - i]).sum();
        if n == 0 {
            w -= Scalar::one();
        }
        if n == 2 {
            w += &g;
        }
        log.scalar_eq(&format!("Wronski[n={n}]"), &w, &zero);
    }
    // modified sequences
    let lam = q - q.recip();
    let modify = |x: &[Scalar]| -> Vec<Scalar> {
        let mut out: Vec<Scalar> = x.iter().take(2).cloned().collect();
        for i in 2..x.len() {
            let t = &x[i] + &out[i - 2] * &g;
            out.push(t);
        }
        out
    };
    let a1 = modify(&im.a);
    let s1 = modify(&im.s);
    let mut pp = vec![(Scalar::one() - &mu * &mu * pow(q, -2)) / &lam, p[1].clone()];
    let mut ppp = vec![(Scalar::one() - &mu * &mu * pow(q, 2)) / &lam, p[1].clone()];
    for i in 2..=nmax {
        let t = (pow(q, 2) * &pp[i - 2] - &p[i - 2]) * &g;
        pp.push(&p[i] + t);
        let t = (pow(q, -2) * &ppp[i - 2] - &p[i - 2]) * &g;
        ppp.push(&p[i] + t);
    }
    for n in 1..=nmax {
        let ni = n as i64;
        let mut r1 = -(sign(ni - 1) * qnum(q, ni) * &im.a[n]);
        let mut r2 = -qnum(q, ni) * &im.s[n];
        for i in 0..n {
            r1 += sign(i as i64) * pow(q, i as i64) * &im.a[i] * &pp[n - i];
            r2 += pow(q, -(i as i64)) * &im.s[i] * &ppp[n - i];
        }
        log.scalar_eq(&format!("mod-N[a,n={n}]"), &r1, &zero);
        log.scalar_eq(&format!("mod-N[s,n={n}]"), &r2, &zero);
    }
    let hv = complete_all(nmax, &pt.a_vars());
    for n in 0..=nmax {
        let delta = if n == 0 { Scalar::one() } else { zero.clone() };
        let w1: Scalar = (0..=n).map(|i| sign(i as i64) * &a1[i] * &im.s[n - i]).sum();
        let w2: Scalar = (0..=n).map(|i| sign(i as i64) * &im.a[i] * &s1[n - i]).sum();
        log.scalar_eq(&format!("mod-W[n={n}]"), &w1, &delta);
        log.scalar_eq(&format!("mod-W[n={n}]"), &w2, &delta);
        log.scalar_eq(&format!("mod-s[n={n}]"), &s1[n], &hv[n]);
    }
    // the auxiliary power-sum formula on both modified sequences
    let gs_a = gs_power_sums(&pt.a_vars(), q, nmax)?;
    for n in 1..=nmax {
        log.scalar_eq(&format!("formula-GS[a,n={n}]"), &pp[n], &gs_a[n]);
    }
    if matches!(ty, SpectralType::Sp | SpectralType::OMinus) {
        let gs_s = gs_power_sums(&pt.nu, q, nmax)?;
        for n in 1..=nmax {
            log.scalar_eq(&format!("formula-GS[s,n={n}]"), &ppp[n], &gs_s[n]);
        }
        if ty == SpectralType::Sp {
            log.scalar_eq("init-1", &ppp[0], &gs_s[0]);
            log.scalar_eq("init-1", &ppp[0], &(pow(q, -2 * k as i64) * qnum(q, 2 * k as i64)));
            let d = d_weights(pt, q)?;
            let dh = gs_hat(&pt.nu, q)?;
            let s3: Scalar = pt.nu.iter().zip(d.iter().zip(&dh)).map(|(v, (x, y))| v * (x - y)).sum();
            log.scalar_eq("init-3", &s3, &zero);
        }
    }
    Ok(())
}

fn gs_hat(vars: &[Scalar], q: &Scalar) -> Result<Vec<Scalar>> {
    let q2 = pow(q, -2);
    vars.iter()
        .enumerate()
        .map(|(i, vi)| {
            vars.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .try_fold(Scalar::one(), |acc, (_, vj)| Ok(acc * ratio(vi - &q2 * vj, vi - vj)?))
        })
        .collect()
}

/// Per-point outcome for the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointTranscript {
    pub index: usize,
    pub seed: u64,
    pub nu: Vec<String>,
    pub passed: bool,
    pub failed: Vec<String>,
}

/// Samples `count` points and folds the per-point checks into one record
/// per identity (pass iff it held at every point).
pub fn run_samples(
    ty: SpectralType,
    rank: usize,
    q: &Scalar,
    count: usize,
    seed: u64,
    log: &mut CheckLog,
) -> Result<Vec<PointTranscript>> {
    let points = sample_points(ty, rank, seed, count)?;
    let mut order: Vec<String> = Vec::new();
    let mut agg: BTreeMap<String, (usize, Option<String>)> = BTreeMap::new();
    let mut transcripts = Vec::with_capacity(points.len());
    for (index, pt) in points.iter().enumerate() {
        let mut local = CheckLog::new(log.scope());
        if let Err(e) = point_checks(pt, q, &mut local) {
            local.push("point", Status::Fail, e.to_string());
        }
        let mut failed = Vec::new();
        for r in local.records() {
            let e = agg.entry(r.id.clone()).or_insert_with(|| {
                order.push(r.id.clone());
                (0, None)
            });
            if r.status == Status::Fail {
                e.0 += 1;
                e.1.get_or_insert_with(|| format!("point {index} {:?}: {}", pt.describe(), r.witness));
                failed.push(r.id.clone());
            }
        }
        transcripts.push(PointTranscript { index, seed, nu: pt.describe(), passed: failed.is_empty(), failed });
    }
    for id in order {
        let (fails, wit) = agg.remove(&id).unwrap_or_default();
        log.truth(&id, fails == 0, || format!("{fails}/{count} points fail; first {}", wit.unwrap_or_default()));
    }
    Ok(transcripts)
}

/// Smallest point count accepted for a spectral run.
pub const MIN_SAMPLES: usize = 100;

/// Quick positivity guard used by the CLI: q must not be 0 or +-1.
pub fn check_q(q: &Scalar) -> Result<()> {
    if q.is_zero() || q.abs() == int(1) {
        return Err(Error::Config(format!("q = {} is excluded", fmt_scalar(q))));
    }
    Ok(())
}
