//! Double-double arithmetic (~31 significant digits) for the Gram matrices
//! of generalized exponential families.
//!
//! Clustered exponents make those Grams ill-conditioned far beyond what an
//! f64 solve can invert to the required biorthogonality residual; carrying
//! the assembly, factorization and control evaluation in double-double
//! keeps the residual at the 1e-8 acceptance level up to condition numbers
//! around 1e20.

use crate::C64;

/// Unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// ln 2 to double-double precision.
    const LN2: Dd = Dd { hi: 0.6931471805599453, lo: 2.3190468138462996e-17 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn mul(self, o: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, o.hi);
        let p2 = p2 + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, o: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, o);
        let p2 = p2 + self.lo * o;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = (r.hi + r.lo) / o.hi;
        let r2 = r.sub(o.mul_f64(q2));
        let q3 = (r2.hi + r2.lo) / o.hi;
        let (s, e) = quick_two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Dd { hi, lo }
    }

    #[inline]
    pub fn recip(self) -> Dd {
        Dd::ONE.div(self)
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    /// exp(x) by argument reduction (powers of two and ln 2) plus a Taylor
    /// tail, accurate to ~1e-31 relative.
    pub fn exp(self) -> Dd {
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        // x = m ln2 + r, |r| <= ln2/2
        let m = (self.hi / Dd::LN2.hi).round();
        let r = self.sub(Dd::LN2.mul_f64(m));
        // further halve r nine times for a fast-converging series
        const K: usize = 9;
        let scale = (1u64 << K) as f64;
        let rs = Dd { hi: r.hi / scale, lo: r.lo / scale };
        // Taylor of e^{rs} - 1
        let mut term = rs;
        let mut sum = rs;
        for i in 2..24 {
            term = term.mul(rs).mul_f64(1.0 / i as f64);
            sum = sum.add(term);
            if term.hi.abs() < 1e-35 * sum.hi.abs().max(1e-35) {
                break;
            }
        }
        // undo the halvings on e^{rs} - 1: f <- 2f + f²
        let mut f = sum;
        for _ in 0..K {
            f = f.mul_f64(2.0).add(f.mul(f));
        }
        let e = f.add(Dd::ONE);
        // multiply by 2^m exactly
        let p = 2.0f64.powi(m as i32);
        Dd { hi: e.hi * p, lo: e.lo * p }
    }
}

/// Complex number with double-double components.
#[derive(Debug, Clone, Copy)]
pub struct Ddc {
    pub re: Dd,
    pub im: Dd,
}

impl Ddc {
    pub const ZERO: Ddc = Ddc { re: Dd::ZERO, im: Dd::ZERO };

    pub fn from_c64(z: C64) -> Ddc {
        Ddc { re: Dd::from_f64(z.re), im: Dd::from_f64(z.im) }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(self, o: Ddc) -> Ddc {
        Ddc { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn mul(self, o: Ddc) -> Ddc {
        Ddc {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn mul_dd(self, o: Dd) -> Ddc {
        Ddc { re: self.re.mul(o), im: self.im.mul(o) }
    }
}

/// Dense double-double matrix, row-major.
#[derive(Debug, Clone)]
pub struct DdMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Dd>,
}

impl DdMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Dd::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Dd::ONE;
        }
        m
    }

    /// Solve self · X = B by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &DdMatrix) -> Option<DdMatrix> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(b.rows, self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.clone();
        for col in 0..n {
            let mut pivot = col;
            let mut best = a[(col, col)].hi.abs();
            for r in col + 1..n {
                let v = a[(r, col)].hi.abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            if pivot != col {
                for c in 0..n {
                    a.data.swap(pivot * n + c, col * n + c);
                }
                for c in 0..x.cols {
                    x.data.swap(pivot * x.cols + c, col * x.cols + c);
                }
            }
            let inv = a[(col, col)].recip();
            for r in col + 1..n {
                let factor = a[(r, col)].mul(inv);
                if factor.hi == 0.0 && factor.lo == 0.0 {
                    continue;
                }
                for c in col..n {
                    let v = a[(r, c)].sub(factor.mul(a[(col, c)]));
                    a[(r, c)] = v;
                }
                for c in 0..x.cols {
                    let v = x[(r, c)].sub(factor.mul(x[(col, c)]));
                    x[(r, c)] = v;
                }
            }
        }
        // back substitution
        for col in (0..n).rev() {
            let inv = a[(col, col)].recip();
            for c in 0..x.cols {
                let mut acc = x[(col, c)];
                for k in col + 1..n {
                    acc = acc.sub(a[(col, k)].mul(x[(k, c)]));
                }
                x[(col, c)] = acc.mul(inv);
            }
        }
        Some(x)
    }

    /// max |(self · X - I)_{ij}|, evaluated in double-double.
    pub fn identity_residual(&self, x: &DdMatrix) -> f64 {
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = if i == j { Dd::ONE.neg() } else { Dd::ZERO };
                for k in 0..n {
                    acc = acc.add(self[(i, k)].mul(x[(k, j)]));
                }
                worst = worst.max(acc.to_f64().abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for DdMatrix {
    type Output = Dd;
    fn index(&self, (r, c): (usize, usize)) -> &Dd {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DdMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Dd {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_keeps_extra_digits() {
        // (1 + 2^-60) - 1 survives in dd, vanishes in f64
        let tiny = 2.0f64.powi(-60);
        let x = Dd::ONE.add(Dd::from_f64(tiny));
        let diff = x.sub(Dd::ONE);
        assert_eq!(diff.to_f64(), tiny);
        // (1 + 2^-53)(1 - 2^-53) = 1 - 2^-106: the correction is far below
        // f64 resolution but must appear in the low word
        let eps = 2.0f64.powi(-53);
        let prod = Dd::ONE.add(Dd::from_f64(eps)).mul(Dd::ONE.sub(Dd::from_f64(eps)));
        let defect = Dd::ONE.sub(prod);
        assert!((defect.to_f64() - 2.0f64.powi(-106)).abs() < 1e-34, "{defect:?}");
    }

    #[test]
    fn division_and_reciprocal() {
        let a = Dd::from_f64(3.0);
        let third = a.recip();
        let one = third.mul(a);
        assert!((one.to_f64() - 1.0).abs() < 1e-30);
        assert!(one.sub(Dd::ONE).to_f64().abs() < 1e-30);
    }

    #[test]
    fn exp_matches_f64_and_identities() {
        for &x in &[0.0, 1.0, -1.0, 0.1, -20.5, 3.25, -0.0003] {
            let e = Dd::from_f64(x).exp();
            let rel = (e.to_f64() - x.exp()) / x.exp();
            assert!(rel.abs() < 1e-14, "x = {x}: {rel:e}");
        }
        // e^a e^{-a} = 1 to dd accuracy
        let a = Dd::from_f64(7.3);
        let p = a.exp().mul(a.neg().exp());
        assert!(p.sub(Dd::ONE).to_f64().abs() < 5e-27, "{:?}", p.sub(Dd::ONE));
    }

    #[test]
    fn solves_hilbert_to_tiny_residual() {
        let n = 10;
        let mut g = DdMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = Dd::from_f64(1.0).div(Dd::from_f64((i + j + 1) as f64));
            }
        }
        let x = g.solve(&DdMatrix::identity(n)).unwrap();
        let res = g.identity_residual(&x);
        // cond(H_10) ~ 1e13; dd keeps the residual far below f64's floor
        assert!(res < 1e-15, "residual {res:e}");
    }
}
