//! Exact operators on V^{⊗n} ⊗ U.
//!
//! `V` has dimension `N`; `U` is an auxiliary coefficient space of dimension
//! `aux` (1 for scalar-valued operators). An N x N matrix with entries in
//! End(U) is an arity-1 operator with `aux = dim U`, and an End(U)-element is an
//! arity-0 operator. Flat index of (i_1..i_n; u) is
//! `(i_1 N^(n-1) + ... + i_n) * aux + u`, so space 1 is most significant and
//! the auxiliary slot least significant.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{fmt_scalar, parse_scalar, Scalar};

static SPARSE_ABOVE: AtomicUsize = AtomicUsize::new(4);
static ENTRY_CAP: AtomicU64 = AtomicU64::new(0);
const DEFAULT_ENTRY_CAP: u64 = 1 << 34;

/// Operators with more tensor slots than this (the aux slot counts as one
/// when nontrivial) are stored sparsely.
pub fn sparse_threshold() -> usize {
    SPARSE_ABOVE.load(Ordering::Relaxed)
}

pub fn set_sparse_threshold(arity: usize) {
    SPARSE_ABOVE.store(arity, Ordering::Relaxed);
}

/// Maximum number of (logical) matrix entries, dim^2. Read from
/// `QMX_ENTRY_CAP` on first use unless set explicitly.
pub fn entry_cap() -> u64 {
    let v = ENTRY_CAP.load(Ordering::Relaxed);
    if v != 0 {
        return v;
    }
    let cap = std::env::var("QMX_ENTRY_CAP")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(DEFAULT_ENTRY_CAP);
    ENTRY_CAP.store(cap, Ordering::Relaxed);
    cap
}

pub fn set_entry_cap(cap: u64) {
    ENTRY_CAP.store(cap.max(1), Ordering::Relaxed);
}

fn check_cap(n: usize, arity: usize, aux: usize) -> Result<usize> {
    check_cap_against(n, arity, aux, entry_cap())
}

fn check_cap_against(n: usize, arity: usize, aux: usize, cap: u64) -> Result<usize> {
    let dim = (n as u128).pow(arity as u32) * aux as u128;
    if dim * dim > cap as u128 {
        return Err(Error::ArityCapExceeded(format!(
            "N = {n}, arity = {arity}, aux = {aux} needs {} entries (cap {})",
            dim * dim,
            cap
        )));
    }
    Ok(dim as usize)
}

type Row = Vec<(u32, Scalar)>;

#[derive(Clone, Debug)]
enum Storage {
    Dense(Vec<Scalar>),
    Sparse(Vec<Row>),
}

#[derive(Clone, Debug)]
pub struct TensorOp {
    n: usize,
    arity: usize,
    aux: usize,
    dim: usize,
    data: Storage,
}

fn wants_dense(arity: usize, aux: usize) -> bool {
    arity + usize::from(aux > 1) <= sparse_threshold()
}

impl TensorOp {
    // ---- construction -------------------------------------------------

    /// Builds from sorted sparse rows, picking storage by policy.
    fn from_rows_unchecked(n: usize, arity: usize, aux: usize, dim: usize, rows: Vec<Row>) -> Self {
        debug_assert_eq!(rows.len(), dim);
        let data = if wants_dense(arity, aux) {
            let mut d = vec![Scalar::zero(); dim * dim];
            for (r, row) in rows.into_iter().enumerate() {
                for (c, v) in row {
                    d[r * dim + c as usize] = v;
                }
            }
            Storage::Dense(d)
        } else {
            Storage::Sparse(rows)
        };
        Self { n, arity, aux, dim, data }
    }

    pub fn zeros(n: usize, arity: usize, aux: usize) -> Result<Self> {
        let dim = check_cap(n, arity, aux)?;
        Ok(Self::from_rows_unchecked(n, arity, aux, dim, vec![Vec::new(); dim]))
    }

    pub fn identity(n: usize, arity: usize, aux: usize) -> Result<Self> {
        let dim = check_cap(n, arity, aux)?;
        let rows = (0..dim).map(|i| vec![(i as u32, Scalar::one())]).collect();
        Ok(Self::from_rows_unchecked(n, arity, aux, dim, rows))
    }

    /// Arity-0 scalar operator.
    pub fn scalar(v: Scalar) -> Self {
        let rows = vec![if v.is_zero() { vec![] } else { vec![(0, v)] }];
        Self::from_rows_unchecked(1, 0, 1, 1, rows)
    }

    /// From (row, col, value) triples; duplicates are summed.
    pub fn from_entries(
        n: usize,
        arity: usize,
        aux: usize,
        entries: impl IntoIterator<Item = (usize, usize, Scalar)>,
    ) -> Result<Self> {
        let dim = check_cap(n, arity, aux)?;
        let mut rows: Vec<Vec<(u32, Scalar)>> = vec![Vec::new(); dim];
        for (r, c, v) in entries {
            if r >= dim || c >= dim {
                return Err(Error::Index(format!("entry ({r},{c}) outside dim {dim}")));
            }
            rows[r].push((c as u32, v));
        }
        let rows = rows.into_iter().map(normalize_row).collect();
        Ok(Self::from_rows_unchecked(n, arity, aux, dim, rows))
    }

    /// Elementwise generator over the full matrix (small operators only).
    pub fn from_fn(n: usize, arity: usize, aux: usize, f: impl Fn(usize, usize) -> Scalar) -> Result<Self> {
        let dim = check_cap(n, arity, aux)?;
        let rows = (0..dim)
            .map(|r| (0..dim).filter_map(|c| nz(c, f(r, c))).collect())
            .collect();
        Ok(Self::from_rows_unchecked(n, arity, aux, dim, rows))
    }

    /// The flip P on V ⊗ V.
    pub fn permutation(n: usize) -> Self {
        let entries = (0..n).flat_map(|i| (0..n).map(move |j| (i * n + j, j * n + i, Scalar::one())));
        Self::from_entries(n, 2, 1, entries).expect("P fits any cap")
    }

    /// Diagonal arity-1 operator.
    pub fn diagonal(diag: &[Scalar]) -> Self {
        let n = diag.len();
        Self::from_entries(n, 1, 1, diag.iter().enumerate().map(|(i, v)| (i, i, v.clone()))).expect("small")
    }

    // ---- shape --------------------------------------------------------

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn arity(&self) -> usize {
        self.arity
    }
    pub fn aux(&self) -> usize {
        self.aux
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn is_sparse(&self) -> bool {
        matches!(self.data, Storage::Sparse(_))
    }
    fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.arity == other.arity && self.aux == other.aux
    }
    fn assert_shape(&self, other: &Self, what: &str) {
        assert!(
            self.same_shape(other),
            "{what}: shape (N={}, arity={}, aux={}) vs (N={}, arity={}, aux={})",
            self.n,
            self.arity,
            self.aux,
            other.n,
            other.arity,
            other.aux
        );
    }

    pub fn to_dense(&self) -> Self {
        let rows = self.rows_owned();
        let mut d = vec![Scalar::zero(); self.dim * self.dim];
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                d[r * self.dim + c as usize] = v;
            }
        }
        Self { data: Storage::Dense(d), ..self.clone_shape() }
    }

    pub fn to_sparse(&self) -> Self {
        Self { data: Storage::Sparse(self.rows_owned()), ..self.clone_shape() }
    }

    fn clone_shape(&self) -> Self {
        Self { n: self.n, arity: self.arity, aux: self.aux, dim: self.dim, data: Storage::Sparse(Vec::new()) }
    }

    // ---- access -------------------------------------------------------

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        match &self.data {
            Storage::Dense(d) => d[r * self.dim + c].clone(),
            Storage::Sparse(rows) => rows[r]
                .binary_search_by_key(&(c as u32), |(k, _)| *k)
                .map(|p| rows[r][p].1.clone())
                .unwrap_or_else(|_| Scalar::zero()),
        }
    }

    /// Visits the nonzero entries of one row in column order.
    pub fn for_row(&self, r: usize, mut f: impl FnMut(usize, &Scalar)) {
        match &self.data {
            Storage::Dense(d) => {
                for (c, v) in d[r * self.dim..(r + 1) * self.dim].iter().enumerate() {
                    if !v.is_zero() {
                        f(c, v)
                    }
                }
            }
            Storage::Sparse(rows) => {
                for (c, v) in &rows[r] {
                    f(*c as usize, v)
                }
            }
        }
    }

    fn row_owned(&self, r: usize) -> Row {
        let mut out = Vec::new();
        self.for_row(r, |c, v| out.push((c as u32, v.clone())));
        out
    }

    fn rows_owned(&self) -> Vec<Row> {
        (0..self.dim).map(|r| self.row_owned(r)).collect()
    }

    /// All nonzero entries in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, Scalar)> {
        let mut out = Vec::new();
        for r in 0..self.dim {
            self.for_row(r, |c, v| out.push((r, c, v.clone())));
        }
        out
    }

    pub fn nnz(&self) -> usize {
        let mut k = 0;
        for r in 0..self.dim {
            self.for_row(r, |_, _| k += 1);
        }
        k
    }

    pub fn is_zero(&self) -> bool {
        self.first_nonzero().is_none()
    }

    pub fn first_nonzero(&self) -> Option<(usize, usize, Scalar)> {
        for r in 0..self.dim {
            let mut hit = None;
            self.for_row(r, |c, v| {
                if hit.is_none() {
                    hit = Some((c, v.clone()))
                }
            });
            if let Some((c, v)) = hit {
                return Some((r, c, v));
            }
        }
        None
    }

    /// Decodes a flat index into (V multi-index, aux index).
    pub fn decode(&self, idx: usize) -> (Vec<usize>, usize) {
        decode(self.n, self.arity, self.aux, idx)
    }

    pub fn encode(&self, multi: &[usize], u: usize) -> usize {
        encode(self.n, multi, self.aux, u)
    }

    /// Human-readable description of one entry, used as a failure witness.
    pub fn describe_entry(&self, r: usize, c: usize, v: &Scalar) -> String {
        format!("[{}, {}] = {}", self.fmt_index(r), self.fmt_index(c), fmt_scalar(v))
    }

    fn fmt_index(&self, idx: usize) -> String {
        let (m, u) = self.decode(idx);
        let mut s = m.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".");
        if self.arity == 0 {
            s.push('-');
        }
        if self.aux > 1 {
            s.push_str(&format!(";{u}"));
        }
        s
    }

    /// Witness string for the first nonzero entry, or None when zero.
    pub fn witness(&self) -> Option<String> {
        self.first_nonzero().map(|(r, c, v)| self.describe_entry(r, c, &v))
    }

    /// Value of an arity-0, aux-1 operator.
    pub fn as_scalar(&self) -> Scalar {
        assert!(self.arity == 0 && self.aux == 1, "not a scalar operator");
        self.get(0, 0)
    }

    // ---- algebra ------------------------------------------------------

    fn zip_rows(&self, other: &Self, f: impl Fn(&Scalar, &Scalar) -> Scalar) -> Self {
        self.assert_shape(other, "elementwise op");
        let zero = Scalar::zero();
        let rows = (0..self.dim)
            .map(|r| {
                let a = self.row_owned(r);
                let b = other.row_owned(r);
                let (mut i, mut j) = (0, 0);
                let mut out = Vec::with_capacity(a.len().max(b.len()));
                while i < a.len() || j < b.len() {
                    let ca = a.get(i).map(|x| x.0).unwrap_or(u32::MAX);
                    let cb = b.get(j).map(|x| x.0).unwrap_or(u32::MAX);
                    let (c, v) = if ca == cb {
                        i += 1;
                        j += 1;
                        (ca, f(&a[i - 1].1, &b[j - 1].1))
                    } else if ca < cb {
                        i += 1;
                        (ca, f(&a[i - 1].1, &zero))
                    } else {
                        j += 1;
                        (cb, f(&zero, &b[j - 1].1))
                    };
                    if !v.is_zero() {
                        out.push((c, v));
                    }
                }
                out
            })
            .collect();
        Self::from_rows_unchecked(self.n, self.arity, self.aux, self.dim, rows)
    }

    pub fn scale(&self, k: &Scalar) -> Self {
        if k.is_zero() {
            return Self::from_rows_unchecked(self.n, self.arity, self.aux, self.dim, vec![Vec::new(); self.dim]);
        }
        let rows = (0..self.dim)
            .map(|r| {
                let mut row = self.row_owned(r);
                for (_, v) in row.iter_mut() {
                    *v = &*v * k;
                }
                row
            })
            .collect();
        Self::from_rows_unchecked(self.n, self.arity, self.aux, self.dim, rows)
    }

    /// self + k * I
    pub fn add_identity(&self, k: &Scalar) -> Self {
        let id = Self::identity(self.n, self.arity, self.aux).expect("same shape");
        self + &id.scale(k)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        self.assert_shape(other, "matmul");
        let dim = self.dim;
        let b_rows: Vec<Row> = match &other.data {
            Storage::Sparse(rows) => rows.clone(),
            Storage::Dense(_) => other.rows_owned(),
        };
        let mut acc: Vec<Scalar> = vec![Scalar::zero(); dim];
        let mut touched: Vec<bool> = vec![false; dim];
        let mut list: Vec<u32> = Vec::new();
        let mut rows = Vec::with_capacity(dim);
        for r in 0..dim {
            self.for_row(r, |k, a| {
                for (c, b) in &b_rows[k] {
                    let ci = *c as usize;
                    acc[ci] += a * b;
                    if !touched[ci] {
                        touched[ci] = true;
                        list.push(*c);
                    }
                }
            });
            list.sort_unstable();
            let mut row = Vec::with_capacity(list.len());
            for &c in &list {
                let ci = c as usize;
                touched[ci] = false;
                let v = std::mem::take(&mut acc[ci]);
                if !v.is_zero() {
                    row.push((c, v));
                }
            }
            list.clear();
            rows.push(row);
        }
        Self::from_rows_unchecked(self.n, self.arity, self.aux, dim, rows)
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Row> = vec![Vec::new(); self.dim];
        for r in 0..self.dim {
            self.for_row(r, |c, v| rows[c].push((r as u32, v.clone())));
        }
        Self::from_rows_unchecked(self.n, self.arity, self.aux, self.dim, rows)
    }

    /// Product of a list of operators, left to right.
    pub fn product<'a>(ops: impl IntoIterator<Item = &'a TensorOp>) -> Option<TensorOp> {
        let mut it = ops.into_iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, x| acc.matmul(x)))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn pow(&self, e: usize) -> Self {
        let mut out = Self::identity(self.n, self.arity, self.aux).expect("same shape");
        for _ in 0..e {
            out = out.matmul(self);
        }
        out
    }

    // ---- tensor structure ----------------------------------------------

    /// Places `self` (arity a) on the 1-based spaces `positions` of V^{⊗n},
    /// identity on the remaining spaces; the aux slot is carried along.
    /// `positions` may be in any order: X on (3, 1) means the first tensor
    /// factor of X acts on space 3.
    pub fn embed_spaces(&self, positions: &[usize], n: usize) -> Result<Self> {
        if positions.len() != self.arity {
            return Err(Error::Index(format!("{} positions for arity {}", positions.len(), self.arity)));
        }
        let mut seen = vec![false; n + 1];
        for &p in positions {
            if p == 0 || p > n || seen[p] {
                return Err(Error::Index(format!("bad position {p} in {positions:?} for n = {n}")));
            }
            seen[p] = true;
        }
        let dim = check_cap(self.n, n, self.aux)?;
        let free: Vec<usize> = (1..=n).filter(|p| !seen[*p]).collect();
        let nfree = free.len();
        let free_count = self.n.pow(nfree as u32);
        let mut entries = Vec::with_capacity(self.nnz() * free_count);
        let mut multi_r = vec![0usize; n];
        let mut multi_c = vec![0usize; n];
        for r in 0..self.dim {
            let (ri, u) = self.decode(r);
            self.for_row(r, |c, v| {
                let (ci, w) = self.decode(c);
                for (slot, &p) in positions.iter().enumerate() {
                    multi_r[p - 1] = ri[slot];
                    multi_c[p - 1] = ci[slot];
                }
                for f in 0..free_count {
                    let mut t = f;
                    for &p in free.iter().rev() {
                        multi_r[p - 1] = t % self.n;
                        multi_c[p - 1] = t % self.n;
                        t /= self.n;
                    }
                    entries.push((
                        encode(self.n, &multi_r, self.aux, u),
                        encode(self.n, &multi_c, self.aux, w),
                        v.clone(),
                    ));
                }
            });
        }
        let mut rows: Vec<Row> = vec![Vec::new(); dim];
        for (r, c, v) in entries {
            rows[r].push((c as u32, v));
        }
        for row in rows.iter_mut() {
            row.sort_unstable_by_key(|x| x.0);
        }
        Ok(Self::from_rows_unchecked(self.n, n, self.aux, dim, rows))
    }

    /// X_m = I^{⊗(m-1)} ⊗ X ⊗ I^{⊗(n-m-1)} for arity-2 X.
    pub fn embed(&self, m: usize, n: usize) -> Result<Self> {
        if self.arity != 2 || m == 0 || m + 1 > n {
            return Err(Error::Index(format!("embed: m = {m}, n = {n}, arity {}", self.arity)));
        }
        self.embed_spaces(&[m, m + 1], n)
    }

    /// X on spaces (m, r), m < r, identity elsewhere.
    pub fn embed_pair(&self, m: usize, r: usize, n: usize) -> Result<Self> {
        if self.arity != 2 || m == 0 || m >= r || r > n {
            return Err(Error::Index(format!("embed_pair: ({m}, {r}) in n = {n}")));
        }
        self.embed_spaces(&[m, r], n)
    }

    /// X ⊗ I_w for an aux-free operator.
    pub fn lift_aux(&self, w: usize) -> Result<Self> {
        if self.aux == w {
            return Ok(self.clone());
        }
        if self.aux != 1 {
            return Err(Error::Shape(format!("cannot lift aux {} to {w}", self.aux)));
        }
        let dim = check_cap(self.n, self.arity, w)?;
        let mut rows: Vec<Row> = vec![Vec::new(); dim];
        for r in 0..self.dim {
            let row = self.row_owned(r);
            for u in 0..w {
                rows[r * w + u] = row.iter().map(|(c, v)| (*c * w as u32 + u as u32, v.clone())).collect();
            }
        }
        Ok(Self::from_rows_unchecked(self.n, self.arity, w, dim, rows))
    }

    /// Partial trace over the 1-based `spaces`, weighted by `weight` (arity 1,
    /// aux 1) on each traced space: Tr_S(∏_{s∈S} D_s X). With `weight = None`
    /// this is the plain partial trace.
    pub fn weighted_trace(&self, weight: Option<&TensorOp>, spaces: &[usize]) -> Result<Self> {
        let mut traced = vec![false; self.arity + 1];
        for &s in spaces {
            if s == 0 || s > self.arity || traced[s] {
                return Err(Error::Index(format!("trace over {spaces:?} of arity {}", self.arity)));
            }
            traced[s] = true;
        }
        if let Some(d) = weight {
            if d.arity != 1 || d.aux != 1 || d.n != self.n {
                return Err(Error::Shape("trace weight must be an aux-free N x N matrix".into()));
            }
        }
        let keep: Vec<usize> = (1..=self.arity).filter(|p| !traced[*p]).collect();
        let out_arity = keep.len();
        let dim = check_cap(self.n, out_arity, self.aux)?;
        let wmat: Option<Vec<Scalar>> = weight.map(|d| {
            let mut m = vec![Scalar::zero(); self.n * self.n];
            for (r, c, v) in d.entries() {
                m[r * self.n + c] = v;
            }
            m
        });
        let mut acc: Vec<std::collections::BTreeMap<u32, Scalar>> = vec![Default::default(); dim];
        let mut rk = vec![0usize; out_arity];
        let mut ck = vec![0usize; out_arity];
        for r in 0..self.dim {
            let (ri, u) = self.decode(r);
            self.for_row(r, |c, v| {
                let (ci, w) = self.decode(c);
                // weight ∏ D[j_s][k_s] with k the row and j the column index
                let mut coeff: Option<Scalar> = None;
                for &s in spaces {
                    let (k, j) = (ri[s - 1], ci[s - 1]);
                    match &wmat {
                        None => {
                            if k != j {
                                return;
                            }
                        }
                        Some(m) => {
                            let dv = &m[j * self.n + k];
                            if dv.is_zero() {
                                return;
                            }
                            coeff = Some(match coeff.take() {
                                None => dv.clone(),
                                Some(x) => x * dv,
                            });
                        }
                    }
                }
                for (slot, &p) in keep.iter().enumerate() {
                    rk[slot] = ri[p - 1];
                    ck[slot] = ci[p - 1];
                }
                let (or, oc) = (encode(self.n, &rk, self.aux, u), encode(self.n, &ck, self.aux, w));
                let val = match coeff {
                    None => v.clone(),
                    Some(x) => x * v,
                };
                *acc[or].entry(oc as u32).or_insert_with(Scalar::zero) += val;
            });
        }
        let rows = acc
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        Ok(Self::from_rows_unchecked(self.n, out_arity, self.aux, dim, rows))
    }

    pub fn partial_trace(&self, spaces: &[usize]) -> Result<Self> {
        self.weighted_trace(None, spaces)
    }

    /// Full trace of an aux-free operator.
    pub fn trace(&self) -> Scalar {
        let mut t = Scalar::zero();
        for r in 0..self.dim {
            t += self.get(r, r);
        }
        t
    }

    /// Tr_S(∏_{s∈S} D_s · self · y) without forming the full product. `y` may
    /// be aux-free, in which case it acts as y ⊗ I on the auxiliary slot.
    pub fn trace_product(&self, y: &TensorOp, weight: Option<&TensorOp>, spaces: &[usize]) -> Result<Self> {
        let w = self.aux;
        let lift = y.aux == 1 && w > 1;
        if y.n != self.n || y.arity != self.arity || !(y.aux == w || lift) {
            return Err(Error::Shape("trace_product operands differ in shape".into()));
        }
        let (n, arity) = (self.n, self.arity);
        let mut seen = vec![false; arity + 1];
        for &s in spaces {
            if s == 0 || s > arity || seen[s] {
                return Err(Error::Index(format!("trace over {spaces:?} of arity {arity}")));
            }
            seen[s] = true;
        }
        // Tr_s(D_s Z) = Tr_s(Z D_s): fold the weight into y.
        let y = match weight {
            Some(d) => {
                let mut yw = y.clone();
                for &s in spaces {
                    yw = yw.matmul(&d.embed_spaces(&[s], arity)?.lift_aux(y.aux)?);
                }
                yw
            }
            None => y.clone(),
        };
        let keep: Vec<usize> = (1..=arity).filter(|p| !seen[*p]).collect();
        let out_dim = check_cap(n, keep.len(), w)?;
        let code = |multi: &[usize], sel: &[usize]| sel.iter().fold(0usize, |acc, &p| acc * n + multi[p - 1]);
        let yrows: Vec<Vec<(usize, usize, usize, Scalar)>> = (0..y.dim)
            .map(|m| {
                let mut v = Vec::new();
                y.for_row(m, |c, b| {
                    let (ci, cu) = y.decode(c);
                    v.push((code(&ci, spaces), code(&ci, &keep), cu, b.clone()));
                });
                v.sort_by_key(|e| e.0);
                v
            })
            .collect();
        let mut acc: Vec<std::collections::BTreeMap<u32, Scalar>> = vec![Default::default(); out_dim];
        for r in 0..self.dim {
            let (ri, u) = self.decode(r);
            let t = code(&ri, spaces);
            let orow = code(&ri, &keep) * w + u;
            self.for_row(r, |m, a| {
                let (ym, mu) = if lift { (m / w, Some(m % w)) } else { (m, None) };
                let row = &yrows[ym];
                let start = row.partition_point(|e| e.0 < t);
                for (tc, kc, cu, b) in &row[start..] {
                    if *tc != t {
                        break;
                    }
                    let ocol = kc * w + mu.unwrap_or(*cu);
                    *acc[orow].entry(ocol as u32).or_insert_with(Scalar::zero) += a * b;
                }
            });
        }
        let rows = acc
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        Ok(Self::from_rows_unchecked(n, keep.len(), w, out_dim, rows))
    }

    /// Random operator with small rational entries, about half of them zero.
    pub fn random(n: usize, arity: usize, aux: usize, rng: &mut impl rand::Rng) -> Result<Self> {
        let dim = check_cap(n, arity, aux)?;
        let mut entries = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                if rng.random_bool(0.5) {
                    let p: i64 = rng.random_range(-3..=3);
                    let q: i64 = rng.random_range(1..=3);
                    entries.push((r, c, Scalar::new(p.into(), q.into())));
                }
            }
        }
        Self::from_entries(n, arity, aux, entries)
    }

    // ---- exact linear algebra ------------------------------------------

    pub fn rank(&self) -> usize {
        rank_of_rows(self.rows_owned())
    }

    pub fn invert(&self) -> Result<Self> {
        let id = Self::identity(self.n, self.arity, self.aux)?;
        self.solve(&id)
    }

    /// X with self * X = rhs.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        self.assert_shape(rhs, "solve");
        let cols = solve_dense(&self.rows_owned(), &rhs.rows_owned(), self.dim, self.dim)?;
        Ok(Self::from_rows_unchecked(self.n, self.arity, self.aux, self.dim, cols))
    }

    // ---- serialization ---------------------------------------------------

    /// Portable text form: header lines then "rowmulti,colmulti=p/q".
    pub fn to_text(&self) -> String {
        let mut s = format!("N {}\narity {}\naux {}\n", self.n, self.arity, self.aux);
        for (r, c, v) in self.entries() {
            s.push_str(&format!("{},{}={}\n", self.fmt_index(r), self.fmt_index(c), fmt_scalar(&v)));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut arity = None;
        let mut aux = 1usize;
        let mut body = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let bad = || Error::Parse(format!("bad line {line:?}"));
            if let Some(v) = line.strip_prefix("N ") {
                n = Some(v.trim().parse::<usize>().map_err(|_| bad())?);
            } else if let Some(v) = line.strip_prefix("arity ") {
                arity = Some(v.trim().parse::<usize>().map_err(|_| bad())?);
            } else if let Some(v) = line.strip_prefix("aux ") {
                aux = v.trim().parse::<usize>().map_err(|_| bad())?;
            } else if line.contains('=') {
                body.push(line.to_string());
            }
        }
        let (n, arity) = match (n, arity) {
            (Some(n), Some(a)) => (n, a),
            _ => return Err(Error::Parse("missing N/arity header".into())),
        };
        let parse_idx = |t: &str| -> Result<usize> {
            let (m, u) = match t.split_once(';') {
                Some((m, u)) => (m, u.parse::<usize>().map_err(|_| Error::Parse(t.into()))?),
                None => (t, 0),
            };
            let m = m.trim_end_matches('-');
            let multi: Vec<usize> = if m.is_empty() {
                vec![]
            } else {
                m.split('.').map(|x| x.parse::<usize>().map_err(|_| Error::Parse(t.into()))).collect::<Result<_>>()?
            };
            if multi.len() != arity || multi.iter().any(|&i| i >= n) || u >= aux {
                return Err(Error::Parse(format!("index {t:?} does not fit N={n} arity={arity}")));
            }
            Ok(encode(n, &multi, aux, u))
        };
        let mut entries = Vec::new();
        for line in body {
            let (lhs, val) = line.split_once('=').ok_or_else(|| Error::Parse(line.clone()))?;
            let (r, c) = lhs.split_once(',').ok_or_else(|| Error::Parse(line.clone()))?;
            entries.push((parse_idx(r)?, parse_idx(c)?, parse_scalar(val)?));
        }
        Self::from_entries(n, arity, aux, entries)
    }
}

fn nz(c: usize, v: Scalar) -> Option<(u32, Scalar)> {
    if v.is_zero() {
        None
    } else {
        Some((c as u32, v))
    }
}

fn normalize_row(mut row: Row) -> Row {
    row.sort_by_key(|x| x.0);
    let mut out: Row = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some((lc, lv)) if *lc == c => *lv += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|(_, v)| !v.is_zero());
    out
}

pub fn encode(n: usize, multi: &[usize], aux: usize, u: usize) -> usize {
    let mut idx = 0;
    for &i in multi {
        idx = idx * n + i;
    }
    idx * aux + u
}

pub fn decode(n: usize, arity: usize, aux: usize, idx: usize) -> (Vec<usize>, usize) {
    let u = idx % aux;
    let mut rest = idx / aux;
    let mut multi = vec![0; arity];
    for slot in (0..arity).rev() {
        multi[slot] = rest % n;
        rest /= n;
    }
    (multi, u)
}

/// Rank by fraction-based row reduction on sparse rows.
fn rank_of_rows(rows: Vec<Row>) -> usize {
    use std::collections::BTreeMap;
    // pivot column -> reduced row with leading entry 1 at that column
    let mut pivots: BTreeMap<u32, Row> = BTreeMap::new();
    for row in rows {
        let mut cur = row;
        loop {
            let Some(&(lead, _)) = cur.first() else { break };
            match pivots.get(&lead) {
                Some(p) => {
                    let f = cur[0].1.clone();
                    cur = axpy_rows(&cur, p, &-f);
                }
                None => {
                    let inv = cur[0].1.recip();
                    for (_, v) in cur.iter_mut() {
                        *v = &*v * &inv;
                    }
                    pivots.insert(lead, cur);
                    break;
                }
            }
        }
    }
    pivots.len()
}

/// a + f * b on sorted sparse rows.
fn axpy_rows(a: &Row, b: &Row, f: &Scalar) -> Row {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        let ca = a.get(i).map(|x| x.0).unwrap_or(u32::MAX);
        let cb = b.get(j).map(|x| x.0).unwrap_or(u32::MAX);
        if ca == cb {
            let v = &a[i].1 + f * &b[j].1;
            if !v.is_zero() {
                out.push((ca, v));
            }
            i += 1;
            j += 1;
        } else if ca < cb {
            out.push(a[i].clone());
            i += 1;
        } else {
            out.push((cb, f * &b[j].1));
            j += 1;
        }
    }
    out
}

/// Gauss-Jordan solve A X = B with A (n x n) and B (n x m) given as sparse
/// rows; returns the rows of X.
pub(crate) fn solve_dense(a: &[Row], b: &[Row], n: usize, m: usize) -> Result<Vec<Row>> {
    let width = n + m;
    let mut mat: Vec<Row> = a
        .iter()
        .zip(b.iter())
        .map(|(ra, rb)| {
            let mut r = ra.clone();
            r.extend(rb.iter().map(|(c, v)| (*c + n as u32, v.clone())));
            r
        })
        .collect();
    let _ = width;
    for col in 0..n as u32 {
        let piv = (col as usize..n)
            .filter(|&r| mat[r].first().map(|x| x.0) == Some(col))
            .min_by_key(|&r| mat[r].len())
            .ok_or(Error::Singular)?;
        mat.swap(col as usize, piv);
        let inv = mat[col as usize][0].1.recip();
        for (_, v) in mat[col as usize].iter_mut() {
            *v = &*v * &inv;
        }
        let prow = mat[col as usize].clone();
        for r in 0..n {
            if r == col as usize {
                continue;
            }
            let f = match mat[r].binary_search_by_key(&col, |x| x.0) {
                Ok(p) => mat[r][p].1.clone(),
                Err(_) => continue,
            };
            mat[r] = axpy_rows(&mat[r], &prow, &-f);
        }
    }
    Ok(mat
        .into_iter()
        .map(|r| r.into_iter().filter(|(c, _)| *c >= n as u32).map(|(c, v)| (c - n as u32, v)).collect())
        .collect())
}

impl PartialEq for TensorOp {
    fn eq(&self, other: &Self) -> bool {
        if !self.same_shape(other) {
            return false;
        }
        (0..self.dim).all(|r| self.row_owned(r) == other.row_owned(r))
    }
}
impl Eq for TensorOp {}

impl Add for &TensorOp {
    type Output = TensorOp;
    fn add(self, o: &TensorOp) -> TensorOp {
        self.zip_rows(o, |a, b| a + b)
    }
}
impl Sub for &TensorOp {
    type Output = TensorOp;
    fn sub(self, o: &TensorOp) -> TensorOp {
        self.zip_rows(o, |a, b| a - b)
    }
}
impl Mul for &TensorOp {
    type Output = TensorOp;
    fn mul(self, o: &TensorOp) -> TensorOp {
        self.matmul(o)
    }
}
impl Neg for &TensorOp {
    type Output = TensorOp;
    fn neg(self) -> TensorOp {
        self.scale(&-Scalar::one())
    }
}

impl fmt::Display for TensorOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, int};

    fn sample(n: usize, arity: usize, seed: i64) -> TensorOp {
        TensorOp::from_fn(n, arity, 1, |r, c| {
            let v = (r as i64 * 7 + c as i64 * 3 + seed) % 5 - 2;
            frac(v, 1 + (r as i64 + seed) % 3)
        })
        .unwrap()
    }

    #[test]
    fn permutation_squares_to_identity() {
        let p = TensorOp::permutation(3);
        assert_eq!(p.matmul(&p), TensorOp::identity(3, 2, 1).unwrap());
        assert_eq!(p.invert().unwrap(), p);
    }

    #[test]
    fn embed_identity_cases() {
        let p = TensorOp::permutation(2);
        assert_eq!(p.embed(1, 2).unwrap(), p);
        let id = TensorOp::identity(2, 2, 1).unwrap();
        assert_eq!(id.embed(2, 4).unwrap(), TensorOp::identity(2, 4, 1).unwrap());
        let x = sample(2, 2, 1);
        assert_eq!(x.embed_pair(1, 2, 4).unwrap(), x.embed(1, 4).unwrap());
    }

    #[test]
    fn embed_entrywise() {
        let x = sample(2, 2, 4);
        let e = x.embed(2, 3).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                let (ri, _) = e.decode(r);
                let (ci, _) = e.decode(c);
                let expect = if ri[0] == ci[0] { x.get(ri[1] * 2 + ri[2], ci[1] * 2 + ci[2]) } else { int(0) };
                assert_eq!(e.get(r, c), expect);
            }
        }
    }

    #[test]
    fn permutation_trace_identities() {
        let p = TensorOp::permutation(3);
        assert_eq!(p.partial_trace(&[1]).unwrap(), TensorOp::identity(3, 1, 1).unwrap());
        let p12 = p.embed(1, 3).unwrap();
        let p23 = p.embed(2, 3).unwrap();
        let p13 = p.embed_pair(1, 3, 3).unwrap();
        // Tr_(2) P12 P23 = P13 restricted to spaces (1,3)
        let lhs = p12.matmul(&p23).partial_trace(&[2]).unwrap();
        assert_eq!(lhs, p);
        assert_eq!(p13.partial_trace(&[2]).unwrap(), p.scale(&int(3)));
        let id = TensorOp::identity(3, 2, 1).unwrap();
        assert_eq!(id.partial_trace(&[1, 2]).unwrap().as_scalar(), int(9));
    }

    #[test]
    fn dense_sparse_agree() {
        let a = sample(2, 3, 2);
        let b = sample(2, 3, 5);
        let ab = a.to_dense().matmul(&b.to_dense());
        assert_eq!(ab, a.to_sparse().matmul(&b.to_sparse()));
        assert_eq!(ab, a.to_sparse().matmul(&b.to_dense()));
        assert_eq!(a.partial_trace(&[2]).unwrap(), a.to_sparse().partial_trace(&[2]).unwrap());
    }

    #[test]
    fn inverse_and_rank() {
        let a = sample(2, 2, 3).add_identity(&int(5));
        let ai = a.invert().unwrap();
        assert_eq!(a.matmul(&ai), TensorOp::identity(2, 2, 1).unwrap());
        let z = TensorOp::zeros(2, 2, 1).unwrap();
        assert_eq!(z.rank(), 0);
        assert!(z.invert().is_err());
        assert_eq!(TensorOp::identity(3, 2, 1).unwrap().rank(), 9);
    }

    #[test]
    fn text_round_trip() {
        let a = sample(3, 2, 1);
        assert_eq!(TensorOp::from_text(&a.to_text()).unwrap(), a);
        let w = TensorOp::from_fn(2, 1, 3, |r, c| int((r * 3 + c) as i64 % 4)).unwrap();
        assert_eq!(TensorOp::from_text(&w.to_text()).unwrap(), w);
        let s = TensorOp::scalar(frac(-3, 7));
        assert_eq!(TensorOp::from_text(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn trace_product_matches_full_product() {
        let a = sample(2, 3, 1);
        let b = sample(2, 3, 6);
        let d = TensorOp::diagonal(&[frac(2, 3), int(5)]);
        for spaces in [vec![2], vec![1, 3], vec![1, 2, 3]] {
            let full = a.matmul(&b).weighted_trace(Some(&d), &spaces).unwrap();
            assert_eq!(a.trace_product(&b, Some(&d), &spaces).unwrap(), full);
        }
        let x = TensorOp::from_fn(2, 2, 3, |r, c| int(((r * 5 + c * 3) % 7) as i64 - 3)).unwrap();
        let full = x.matmul(&b.partial_trace(&[3]).unwrap().lift_aux(3).unwrap());
        let y = b.partial_trace(&[3]).unwrap();
        assert_eq!(x.trace_product(&y, None, &[1]).unwrap(), full.partial_trace(&[1]).unwrap());
    }

    #[test]
    fn entry_cap_guard() {
        assert!(matches!(check_cap_against(4, 6, 1, 1 << 20), Err(Error::ArityCapExceeded(_))));
        assert_eq!(check_cap_against(4, 5, 1, 1 << 20).unwrap(), 1024);
    }
}
