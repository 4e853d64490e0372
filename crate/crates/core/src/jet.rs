//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] carries every Taylor coefficient of a function up to a fixed
//! total order, so one evaluation yields all partial derivatives exactly (no
//! truncation error). Layouts may cap the degree in a leading block of
//! variables; the geometry code uses that to keep at most one base-point
//! derivative while taking up to four fibre derivatives.
//!
//! Each jet also records the sub-range of coefficients that are still exact.
//! Differentiating lowers it, and arithmetic keeps the intersection.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::scalar::Real;

pub const MAX_ORDER: u8 = 4;

#[derive(Debug)]
pub struct JetLayout {
    nvars: usize,
    order: u8,
    capped: usize,
    cap: u8,
    monomials: Vec<Vec<u8>>,
    degree: Vec<u8>,
    cap_degree: Vec<u8>,
    index: HashMap<Vec<u8>, usize>,
    mul_table: Vec<(u32, u32, u32)>,
}

type LayoutKey = (usize, u8, usize, u8);

impl JetLayout {
    /// Layout over `nvars` variables with total degree at most `order`; the
    /// first `capped` variables jointly have degree at most `cap`.
    pub fn shared(nvars: usize, order: u8, capped: usize, cap: u8) -> Arc<JetLayout> {
        assert!(order <= MAX_ORDER, "jet order above {MAX_ORDER}");
        assert!(capped <= nvars);
        let cap = cap.min(order);
        static CACHE: OnceLock<Mutex<HashMap<LayoutKey, Arc<JetLayout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (nvars, order, capped, cap);
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry(key)
            .or_insert_with(|| Arc::new(Self::build(nvars, order, capped, cap)))
            .clone()
    }

    /// Layout with no capped block.
    pub fn full(nvars: usize, order: u8) -> Arc<JetLayout> {
        Self::shared(nvars, order, 0, order)
    }

    fn build(nvars: usize, order: u8, capped: usize, cap: u8) -> Self {
        let mut monomials = Vec::new();
        let mut current = vec![0u8; nvars];
        enumerate(&mut current, 0, order, &mut monomials);
        monomials.retain(|m| m[..capped].iter().sum::<u8>() <= cap);
        monomials.sort_by_key(|m| {
            let d: u8 = m.iter().sum();
            (d, std::cmp::Reverse(m.clone()))
        });
        let degree: Vec<u8> = monomials.iter().map(|m| m.iter().sum()).collect();
        let cap_degree: Vec<u8> = monomials.iter().map(|m| m[..capped].iter().sum()).collect();
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut mul_table = Vec::new();
        let mut sum = vec![0u8; nvars];
        for (a, ma) in monomials.iter().enumerate() {
            for (b, mb) in monomials.iter().enumerate() {
                for v in 0..nvars {
                    sum[v] = ma[v] + mb[v];
                }
                if let Some(&t) = index.get(&sum) {
                    mul_table.push((a as u32, b as u32, t as u32));
                }
            }
        }
        Self {
            nvars,
            order,
            capped,
            cap,
            monomials,
            degree,
            cap_degree,
            index,
            mul_table,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    fn index_of(&self, m: &[u8]) -> Option<usize> {
        self.index.get(m).copied()
    }
}

fn enumerate(current: &mut Vec<u8>, var: usize, remaining: u8, out: &mut Vec<Vec<u8>>) {
    if var == current.len() {
        out.push(current.clone());
        return;
    }
    for e in 0..=remaining {
        current[var] = e;
        enumerate(current, var + 1, remaining - e, out);
    }
    current[var] = 0;
}

#[derive(Debug, Clone)]
pub struct Jet<T> {
    layout: Arc<JetLayout>,
    order: u8,
    cap: u8,
    coeffs: Vec<T>,
}

impl<T: Real> Jet<T> {
    pub fn constant(layout: &Arc<JetLayout>, value: T) -> Self {
        let mut coeffs = vec![T::zero(); layout.len()];
        coeffs[0] = value;
        Self {
            layout: layout.clone(),
            order: layout.order,
            cap: layout.cap,
            coeffs,
        }
    }

    /// The coordinate function `var` expanded around `value`.
    pub fn variable(layout: &Arc<JetLayout>, var: usize, value: T) -> Self {
        assert!(var < layout.nvars, "variable index out of range");
        let mut jet = Self::constant(layout, value);
        if layout.order >= 1 && (var >= layout.capped || layout.cap >= 1) {
            let mut m = vec![0u8; layout.nvars];
            m[var] = 1;
            let idx = layout.index_of(&m).expect("linear monomial present");
            jet.coeffs[idx] = T::one();
        }
        jet
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// Highest total order whose coefficients are still exact.
    pub fn valid_order(&self) -> u8 {
        self.order
    }

    pub fn valid_cap(&self) -> u8 {
        self.cap
    }

    #[inline]
    fn is_valid(&self, idx: usize) -> bool {
        self.layout.degree[idx] <= self.order && self.layout.cap_degree[idx] <= self.cap
    }

    fn with_validity(&self, order: u8, cap: u8, coeffs: Vec<T>) -> Self {
        Self {
            layout: self.layout.clone(),
            order,
            cap,
            coeffs,
        }
    }

    fn joint_validity(&self, other: &Self) -> (u8, u8) {
        debug_assert!(
            Arc::ptr_eq(&self.layout, &other.layout),
            "mixed jet layouts"
        );
        (self.order.min(other.order), self.cap.min(other.cap))
    }

    fn masked(mut self) -> Self {
        for i in 0..self.coeffs.len() {
            if !self.is_valid(i) {
                self.coeffs[i] = T::zero();
            }
        }
        self
    }

    /// Partial derivative `∂^|m| / ∂v^m` at the expansion point, where `m` is
    /// the exponent vector. Panics if `m` lies outside the exact range.
    pub fn partial(&self, exponents: &[u8]) -> T {
        let idx = self
            .layout
            .index_of(exponents)
            .unwrap_or_else(|| panic!("monomial {exponents:?} not in jet layout"));
        assert!(
            self.is_valid(idx),
            "partial {exponents:?} beyond exact range (order {}, cap {})",
            self.order,
            self.cap
        );
        let fact = exponents
            .iter()
            .fold(T::one(), |acc, &e| acc * factorial::<T>(e));
        self.coeffs[idx] * fact
    }

    /// Partial derivative with respect to a list of variable indices.
    pub fn partial_wrt(&self, vars: &[usize]) -> T {
        let mut m = vec![0u8; self.layout.nvars];
        for &v in vars {
            m[v] += 1;
        }
        self.partial(&m)
    }

    /// Exact derivative with respect to one variable, as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Self {
        let layout = &self.layout;
        let capped_var = var < layout.capped;
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        assert!(
            !capped_var || self.cap >= 1,
            "capped variable already exhausted"
        );
        let order = self.order - 1;
        let cap = if capped_var {
            self.cap - 1
        } else {
            self.cap.min(order)
        };
        let mut coeffs = vec![T::zero(); layout.len()];
        let mut shifted = vec![0u8; layout.nvars];
        for (idx, m) in layout.monomials.iter().enumerate() {
            if layout.degree[idx] > order || layout.cap_degree[idx] > cap {
                continue;
            }
            shifted.copy_from_slice(m);
            shifted[var] += 1;
            if let Some(src) = layout.index_of(&shifted) {
                coeffs[idx] = self.coeffs[src] * T::from_u8(shifted[var]).unwrap();
            }
        }
        self.with_validity(order, cap, coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (o, c) = self.joint_validity(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a + b)
            .collect();
        self.with_validity(o, c, coeffs).masked()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (o, c) = self.joint_validity(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a - b)
            .collect();
        self.with_validity(o, c, coeffs).masked()
    }

    pub fn neg(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|&a| -a).collect();
        self.with_validity(self.order, self.cap, coeffs)
    }

    pub fn scale(&self, s: T) -> Self {
        let coeffs = self.coeffs.iter().map(|&a| a * s).collect();
        self.with_validity(self.order, self.cap, coeffs)
    }

    pub fn add_scalar(&self, s: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (o, c) = self.joint_validity(other);
        let layout = &self.layout;
        let mut coeffs = vec![T::zero(); layout.len()];
        for &(a, b, t) in &layout.mul_table {
            let t = t as usize;
            if layout.degree[t] <= o && layout.cap_degree[t] <= c {
                coeffs[t] += self.coeffs[a as usize] * other.coeffs[b as usize];
            }
        }
        self.with_validity(o, c, coeffs)
    }

    /// `f(self)` given the Taylor coefficients `f^(k)(u0)/k!` of `f` at the
    /// current value `u0`.
    fn compose(&self, taylor: &[T]) -> Self {
        let mut delta = self.clone();
        delta.coeffs[0] = T::zero();
        let mut out = Self::constant(&self.layout, taylor[0]).with_validity_of(self);
        let mut power = delta.clone();
        for (k, &ck) in taylor.iter().enumerate().skip(1) {
            if k > self.order as usize {
                break;
            }
            if k > 1 {
                power = power.mul(&delta);
            }
            if ck != T::zero() {
                for (o, &p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += ck * p;
                }
            }
        }
        out
    }

    fn with_validity_of(mut self, other: &Self) -> Self {
        self.order = other.order;
        self.cap = other.cap;
        self
    }

    fn taylor_len(&self) -> usize {
        self.order as usize + 1
    }

    pub fn recip(&self) -> Self {
        let u0 = self.value();
        let inv = u0.recip();
        let mut c = Vec::with_capacity(self.taylor_len());
        let mut p = inv;
        for _ in 0..self.taylor_len() {
            c.push(p);
            p = -p * inv;
        }
        self.compose(&c)
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.recip())
    }

    pub fn sqrt(&self) -> Self {
        self.real_power(T::lit(0.5))
    }

    /// `self^p` for a real exponent, expanded by the binomial series. The
    /// value must be positive.
    pub fn real_power(&self, p: T) -> Self {
        let u0 = self.value();
        let mut c = Vec::with_capacity(self.taylor_len());
        let mut binom = T::one();
        for k in 0..self.taylor_len() {
            let kt = T::from_usize_lossy(k);
            if k > 0 {
                binom = binom * (p - kt + T::one()) / kt;
            }
            c.push(binom * u0.powf(p - kt));
        }
        self.compose(&c)
    }

    pub fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut result = Self::constant(&self.layout, T::one()).with_validity_of(self);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let c: Vec<T> = (0..self.taylor_len())
            .map(|k| e / factorial::<T>(k as u8))
            .collect();
        self.compose(&c)
    }

    pub fn ln(&self) -> Self {
        let u0 = self.value();
        let mut c = vec![u0.ln()];
        for k in 1..self.taylor_len() {
            let kt = T::from_usize_lossy(k);
            let sign = if k % 2 == 1 { T::one() } else { -T::one() };
            c.push(sign / (kt * u0.powi(k as i32)));
        }
        self.compose(&c)
    }

    pub fn sin(&self) -> Self {
        let (s, co) = self.value().sin_cos();
        let cycle = [s, co, -s, -co];
        let c: Vec<T> = (0..self.taylor_len())
            .map(|k| cycle[k % 4] / factorial::<T>(k as u8))
            .collect();
        self.compose(&c)
    }

    pub fn cos(&self) -> Self {
        let (s, co) = self.value().sin_cos();
        let cycle = [co, -s, -co, s];
        let c: Vec<T> = (0..self.taylor_len())
            .map(|k| cycle[k % 4] / factorial::<T>(k as u8))
            .collect();
        self.compose(&c)
    }
}

fn factorial<T: Real>(k: u8) -> T {
    (1..=k).fold(T::one(), |acc, i| acc * T::from_u8(i).unwrap())
}
