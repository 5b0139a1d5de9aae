//! Fixed-precision binary floating point (10 × 64-bit limbs, ≈ 192 decimal
//! digits) for the spectral-inequality diagnostics.
//!
//! The smallest eigenvalue of a restriction Gram matrix decays like
//! e^{-C√λ_J}; on a strict subwindow it passes below 1e-16 around J ≈ 10-20
//! and reaches ~1e-100 by J = 40, so no double-precision path can measure
//! it. The operations here (arithmetic, sqrt, exp, ln, powers) are exactly
//! what the high-precision Bessel series, window quadrature and Jacobi
//! eigensolver need.

/// Number of 64-bit fraction limbs.
const LIMBS: usize = 10;

/// Sign * fraction * 2^exp with fraction in [1/2, 1), stored big-endian
/// with the top bit of `frac[0]` set for nonzero values.
#[derive(Debug, Clone, Copy)]
pub struct Big {
    sign: i8,
    exp: i64,
    frac: [u64; LIMBS],
}

impl Big {
    pub const ZERO: Big = Big { sign: 0, exp: 0, frac: [0; LIMBS] };

    pub fn from_f64(x: f64) -> Big {
        if x == 0.0 {
            return Big::ZERO;
        }
        assert!(x.is_finite(), "cannot convert {x}");
        let sign = if x < 0.0 { -1 } else { 1 };
        let (m, e) = frexp(x.abs());
        // m in [1/2, 1), so m·2^64 in [2^63, 2^64) carries the whole 53-bit
        // mantissa exactly (no rounding: m·2^64 = mant·2^11)
        let scaled = m * 2f64.powi(64);
        let top = scaled as u64;
        let mut frac = [0u64; LIMBS];
        frac[0] = top;
        debug_assert_eq!(scaled - top as f64, 0.0);
        Big { sign, exp: e, frac }
    }

    pub fn from_u64(v: u64) -> Big {
        if v == 0 {
            return Big::ZERO;
        }
        let lz = v.leading_zeros() as i64;
        let mut frac = [0u64; LIMBS];
        frac[0] = v << lz;
        Big { sign: 1, exp: 64 - lz, frac }
    }

    pub fn from_i64(v: i64) -> Big {
        if v < 0 {
            Big::from_u64(v.unsigned_abs()).neg()
        } else {
            Big::from_u64(v as u64)
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        let m = self.frac[0] as f64 * 2f64.powi(-64) + self.frac[1] as f64 * 2f64.powi(-128);
        self.sign as f64 * m * exp2_i64(self.exp)
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Binary exponent (value magnitude is in [2^(e-1), 2^e)).
    pub fn exp_bits(&self) -> i64 {
        self.exp
    }

    pub fn neg(mut self) -> Big {
        self.sign = -self.sign;
        self
    }

    pub fn abs(mut self) -> Big {
        if self.sign != 0 {
            self.sign = 1;
        }
        self
    }

    /// Compare magnitudes.
    fn cmp_mag(&self, o: &Big) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        if self.sign == 0 {
            return if o.sign == 0 { Ordering::Equal } else { Ordering::Less };
        }
        if o.sign == 0 {
            return Ordering::Greater;
        }
        self.exp.cmp(&o.exp).then_with(|| self.frac.cmp(&o.frac))
    }

    pub fn gt_mag(&self, o: &Big) -> bool {
        self.cmp_mag(o) == std::cmp::Ordering::Greater
    }

    /// Shift the fraction right by `bits`, returning the new fraction.
    fn shifted_right(frac: &[u64; LIMBS], bits: i64) -> [u64; LIMBS] {
        let mut out = [0u64; LIMBS];
        if bits >= (LIMBS as i64) * 64 {
            return out;
        }
        let limb_shift = (bits / 64) as usize;
        let bit_shift = (bits % 64) as u32;
        for i in 0..LIMBS - limb_shift {
            let src = frac[i];
            let dst = i + limb_shift;
            out[dst] |= if bit_shift == 0 { src } else { src >> bit_shift };
            if bit_shift > 0 && dst + 1 < LIMBS {
                out[dst + 1] |= src << (64 - bit_shift);
            }
        }
        out
    }

    fn normalize(sign: i8, mut exp: i64, mut frac: [u64; LIMBS], carry: u64) -> Big {
        if carry > 0 {
            // shift right one bit, insert the carry bit on top
            let mut prev = carry & 1;
            for f in frac.iter_mut() {
                let low = *f & 1;
                *f = (*f >> 1) | (prev << 63);
                prev = low;
            }
            exp += 1;
            return Big { sign, exp, frac };
        }
        // find the leading one
        let mut lead = None;
        for (i, &f) in frac.iter().enumerate() {
            if f != 0 {
                lead = Some((i, f.leading_zeros() as i64));
                break;
            }
        }
        let Some((limb, lz)) = lead else {
            return Big::ZERO;
        };
        let shift = limb as i64 * 64 + lz;
        if shift > 0 {
            // shift left
            let limb_shift = (shift / 64) as usize;
            let bit_shift = (shift % 64) as u32;
            let mut out = [0u64; LIMBS];
            for i in limb_shift..LIMBS {
                let src = frac[i];
                let dst = i - limb_shift;
                out[dst] |= if bit_shift == 0 { src } else { src << bit_shift };
                if bit_shift > 0 && dst > 0 {
                    out[dst - 1] |= src >> (64 - bit_shift);
                }
            }
            frac = out;
            exp -= shift;
        }
        if exp < -(1 << 40) {
            return Big::ZERO; // flush deep underflow
        }
        Big { sign, exp, frac }
    }

    pub fn add(self, o: Big) -> Big {
        if self.sign == 0 {
            return o;
        }
        if o.sign == 0 {
            return self;
        }
        // order by magnitude: a is the larger
        let (a, b) = if self.cmp_mag(&o) == std::cmp::Ordering::Less { (o, self) } else { (self, o) };
        let d = a.exp - b.exp;
        let bf = Big::shifted_right(&b.frac, d);
        if a.sign == b.sign {
            let mut frac = [0u64; LIMBS];
            let mut carry = 0u64;
            for i in (0..LIMBS).rev() {
                let (s1, c1) = a.frac[i].overflowing_add(bf[i]);
                let (s2, c2) = s1.overflowing_add(carry);
                frac[i] = s2;
                carry = (c1 as u64) + (c2 as u64);
            }
            Big::normalize(a.sign, a.exp, frac, carry)
        } else {
            // subtract the smaller magnitude from the larger
            let mut frac = [0u64; LIMBS];
            let mut borrow = 0u64;
            for i in (0..LIMBS).rev() {
                let (s1, c1) = a.frac[i].overflowing_sub(bf[i]);
                let (s2, c2) = s1.overflowing_sub(borrow);
                frac[i] = s2;
                borrow = (c1 as u64) + (c2 as u64);
            }
            debug_assert_eq!(borrow, 0);
            Big::normalize(a.sign, a.exp, frac, 0)
        }
    }

    pub fn sub(self, o: Big) -> Big {
        self.add(o.neg())
    }

    pub fn mul(self, o: Big) -> Big {
        if self.sign == 0 || o.sign == 0 {
            return Big::ZERO;
        }
        // column accumulation over the top 2*LIMBS limbs; drop tails that
        // cannot reach the kept window
        let mut buf = [0u64; LIMBS + 2];
        let mut carry_bucket = [0u128; LIMBS + 2];
        for i in 0..LIMBS {
            for j in 0..LIMBS {
                if i + j >= LIMBS + 1 {
                    continue;
                }
                let p = self.frac[i] as u128 * o.frac[j] as u128;
                let hi = (p >> 64) as u64;
                let lo = p as u64;
                let pos_hi = i + j;
                let pos_lo = i + j + 1;
                carry_bucket[pos_hi] += hi as u128;
                if pos_lo < LIMBS + 2 {
                    carry_bucket[pos_lo] += lo as u128;
                }
            }
        }
        // resolve buckets from the lowest position upward
        let mut carry: u128 = 0;
        for k in (0..LIMBS + 2).rev() {
            let tot = carry_bucket[k] + carry;
            buf[k] = tot as u64;
            carry = tot >> 64;
        }
        debug_assert_eq!(carry, 0, "fraction product below 1 cannot carry out");
        let mut frac = [0u64; LIMBS];
        frac.copy_from_slice(&buf[..LIMBS]);
        Big::normalize(self.sign * o.sign, self.exp + o.exp, frac, 0)
    }

    pub fn mul_i64(self, v: i64) -> Big {
        self.mul(Big::from_i64(v))
    }

    /// Reciprocal by Newton iteration from an f64 seed.
    pub fn recip(self) -> Big {
        assert!(self.sign != 0, "division by zero");
        // work on the fraction alone to keep the seed in range
        let mant = Big { sign: 1, exp: 0, frac: self.frac };
        let mut r = Big::from_f64(1.0 / mant.to_f64());
        let two = Big::from_u64(2);
        for _ in 0..5 {
            // r <- r (2 - m r)
            let mr = mant.mul(r);
            r = r.mul(two.sub(mr));
        }
        Big { sign: self.sign, exp: r.exp - self.exp, frac: r.frac }
    }

    pub fn div(self, o: Big) -> Big {
        self.mul(o.recip())
    }

    /// Square root by Newton iteration on 1/√x from an f64 seed.
    pub fn sqrt(self) -> Big {
        if self.sign == 0 {
            return Big::ZERO;
        }
        assert!(self.sign > 0, "sqrt of negative value");
        // scale to [1/4, 1) with an even exponent
        let e2 = self.exp.div_euclid(2);
        let mant = Big { sign: 1, exp: self.exp - 2 * e2, frac: self.frac };
        let mut y = Big::from_f64(1.0 / mant.to_f64().sqrt());
        let half = Big::from_f64(0.5);
        let three = Big::from_u64(3);
        for _ in 0..5 {
            // y <- y (3 - m y²) / 2
            let my2 = mant.mul(y).mul(y);
            y = y.mul(three.sub(my2)).mul(half);
        }
        let root = mant.mul(y);
        Big { sign: 1, exp: root.exp + e2, frac: root.frac }
    }

    /// Multiply by 2^k exactly.
    pub fn ldexp(mut self, k: i64) -> Big {
        if self.sign != 0 {
            self.exp += k;
        }
        self
    }

    /// exp(x), |x| up to a few thousand.
    pub fn exp(self) -> Big {
        if self.sign == 0 {
            return Big::from_u64(1);
        }
        let xf = self.to_f64();
        assert!(xf.abs() < 1.0e6, "exp argument out of range: {xf}");
        let ln2 = ln2();
        let m = (xf / std::f64::consts::LN_2).round() as i64;
        let r = self.sub(ln2.mul_i64(m));
        // r in ~[-ln2/2, ln2/2]; halve 16 times for a short series
        const K: i64 = 16;
        let rs = r.ldexp(-K);
        // e^{rs} - 1 by Taylor
        let mut term = rs;
        let mut sum = rs;
        let mut n = 2i64;
        loop {
            term = term.mul(rs).mul(Big::from_i64(n).recip());
            if term.sign == 0 || term.exp < sum.exp - 64 * (LIMBS as i64) - 8 {
                break;
            }
            sum = sum.add(term);
            n += 1;
            if n > 80 {
                break;
            }
        }
        // un-halve: f <- 2f + f²
        let mut f = sum;
        for _ in 0..K {
            f = f.ldexp(1).add(f.mul(f));
        }
        f.add(Big::from_u64(1)).ldexp(m)
    }

    /// Natural logarithm, x > 0.
    pub fn ln(self) -> Big {
        assert!(self.sign > 0, "ln needs a positive argument");
        // x = f · 2^k with f in [√2/2, √2)
        let mut k = self.exp;
        let mut f = Big { sign: 1, exp: 0, frac: self.frac }; // in [1/2, 1)
        if f.to_f64() < std::f64::consts::FRAC_1_SQRT_2 {
            f = f.ldexp(1);
            k -= 1;
        }
        // ln f = 2 atanh(u), u = (f-1)/(f+1)
        let one = Big::from_u64(1);
        let u = f.sub(one).div(f.add(one));
        let u2 = u.mul(u);
        let mut term = u;
        let mut sum = u;
        let mut n = 3i64;
        loop {
            term = term.mul(u2);
            let contrib = term.mul(Big::from_i64(n).recip());
            if contrib.sign == 0 || contrib.exp < sum.exp - 64 * (LIMBS as i64) - 8 {
                break;
            }
            sum = sum.add(contrib);
            n += 2;
            if n > 2500 {
                break;
            }
        }
        sum.ldexp(1).add(ln2().mul_i64(k))
    }

    /// x^p for positive x and real p.
    pub fn powf(self, p: f64) -> Big {
        if p == 0.0 {
            return Big::from_u64(1);
        }
        if self.sign == 0 {
            return Big::ZERO;
        }
        self.ln().mul(Big::from_f64(p)).exp()
    }
}

fn frexp(x: f64) -> (f64, i64) {
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    if exp_bits == 0 {
        // subnormal: scale up first
        let scaled = x * 2f64.powi(64);
        let (m, e) = frexp(scaled);
        return (m, e - 64);
    }
    let e = exp_bits - 1022;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, e)
}

fn exp2_i64(e: i64) -> f64 {
    if e < -1070 {
        0.0
    } else if e > 1023 {
        f64::INFINITY
    } else {
        2f64.powi(e as i32)
    }
}

/// ln 2 computed as 2 atanh(1/3), cached.
fn ln2() -> Big {
    use std::sync::OnceLock;
    static CACHE: OnceLock<Big> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let third = Big::from_u64(3).recip();
        let t2 = third.mul(third);
        let mut term = third;
        let mut sum = third;
        let mut n = 3i64;
        loop {
            term = term.mul(t2);
            let contrib = term.mul(Big::from_i64(n).recip());
            if contrib.sign == 0 || contrib.exp < sum.exp - 64 * (LIMBS as i64) - 8 {
                break;
            }
            sum = sum.add(contrib);
            n += 2;
        }
        sum.ldexp(1)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn roundtrip_and_arithmetic() {
        for &x in &[1.0, -3.5, 0.001953125, 123456789.0, 1e-300, 2.2e300] {
            assert!(close(Big::from_f64(x).to_f64(), x, 1e-15), "{x}");
        }
        let a = Big::from_f64(3.0);
        let b = Big::from_f64(7.0);
        assert!(close(a.add(b).to_f64(), 10.0, 1e-15));
        assert!(close(a.sub(b).to_f64(), -4.0, 1e-15));
        assert!(close(a.mul(b).to_f64(), 21.0, 1e-15));
        assert!(close(b.div(a).to_f64(), 7.0 / 3.0, 1e-15));
    }

    #[test]
    fn extreme_exponent_products_survive() {
        // 1e-200 * 1e-200 = 1e-400: far beyond f64, fine here
        let tiny = Big::from_f64(1e-200);
        let sq = tiny.mul(tiny);
        let back = sq.div(tiny);
        assert!(close(back.to_f64(), 1e-200, 1e-14));
        assert!(sq.to_f64() == 0.0, "1e-400 underflows f64");
        assert!(!sq.is_zero());
    }

    #[test]
    fn cancellation_keeps_digits() {
        // (1 + 2^-400) - 1 = 2^-400
        let eps = Big::from_u64(1).ldexp(-400);
        let x = Big::from_u64(1).add(eps);
        let back = x.sub(Big::from_u64(1));
        assert_eq!(back.exp, -399); // frac in [1/2,1): 2^-400 = 0.5·2^-399
        let ratio = back.div(eps).to_f64();
        assert!(close(ratio, 1.0, 1e-30));
    }

    #[test]
    fn recip_sqrt_accuracy() {
        let x = Big::from_f64(std::f64::consts::PI);
        let r = x.recip().mul(x);
        assert!(close(r.to_f64(), 1.0, 1e-15));
        let defect = r.sub(Big::from_u64(1)).to_f64().abs();
        assert!(defect < 1e-150, "recip defect {defect:e}");
        let s = x.sqrt();
        let defect = s.mul(s).sub(x).div(x).to_f64().abs();
        assert!(defect < 1e-150, "sqrt defect {defect:e}");
    }

    #[test]
    fn exp_ln_roundtrip() {
        for &x in &[0.5, -1.25, 3.0, -20.0, 100.0] {
            let e = Big::from_f64(x).exp();
            assert!(close(e.to_f64(), x.exp(), 1e-13), "exp({x})");
            let back = e.ln().to_f64();
            assert!(close(back, x, 1e-13), "ln(exp({x})) = {back}");
        }
        // deep range: exp(-200) * exp(200) = 1
        let a = Big::from_f64(-200.0).exp();
        let b = Big::from_f64(200.0).exp();
        let defect = a.mul(b).sub(Big::from_u64(1)).to_f64().abs();
        assert!(defect < 1e-140, "defect {defect:e}");
    }

    #[test]
    fn powf_matches_f64() {
        let y = Big::from_f64(0.37).powf(0.75);
        assert!(close(y.to_f64(), 0.37f64.powf(0.75), 1e-13));
    }
}
