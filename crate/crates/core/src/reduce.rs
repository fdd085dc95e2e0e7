//! Order- and partition-invariant floating-point reductions.
//!
//! Sums and inner products here accumulate every f64 summand exactly into a
//! wide fixed-point accumulator and round once at the end. Because the
//! accumulator state is an exact integer sum, it does not depend on the order
//! in which summands arrive or on how the input was split across workers, so
//! the rounded result is bitwise identical for any permutation of the input
//! and any worker count. The solver relies on this for reproducible runs; it
//! also makes solutions commute bitwise with azimuth rotations of the input.
//!
//! The accumulator covers the full finite f64 range (including subnormals):
//! bit `i` of the fixed-point value carries weight `2^(i - 1075)`, and limbs
//! are signed base-2^32 digits stored in `i64` so that additions stay
//! carry-free for over half a billion summands.

use crate::exec::Parallelism;
#[cfg(feature = "parallel")]
use crate::exec::CHUNK;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const LIMBS: usize = 67;
const FRAC_MASK: u64 = (1 << 52) - 1;
const IMPLICIT_BIT: u64 = 1 << 52;
// Renormalize before limb magnitudes can reach 2^61.
const MAX_PENDING: u64 = 1 << 29;

/// Exact accumulator for f64 sums.
#[derive(Clone)]
pub struct ReproAcc {
    limbs: [i64; LIMBS],
    pending: u64,
    non_finite: bool,
}

impl Default for ReproAcc {
    fn default() -> Self {
        Self::new()
    }
}

impl ReproAcc {
    pub fn new() -> Self {
        Self {
            limbs: [0; LIMBS],
            pending: 0,
            non_finite: false,
        }
    }

    /// True if any accumulated value was infinite or NaN; [`Self::round`]
    /// then returns NaN.
    pub fn is_non_finite(&self) -> bool {
        self.non_finite
    }

    /// Adds one value exactly.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7FF) as usize;
        let frac = bits & FRAC_MASK;
        if exp == 0x7FF {
            self.non_finite = true;
            return;
        }
        let (mant, pos) = if exp == 0 {
            if frac == 0 {
                return;
            }
            (frac, 1)
        } else {
            (frac | IMPLICIT_BIT, exp)
        };
        let limb = pos >> 5;
        let shift = pos & 31;
        let wide = (mant as u128) << shift;
        let p0 = (wide as u64 & 0xFFFF_FFFF) as i64;
        let p1 = ((wide >> 32) as u64 & 0xFFFF_FFFF) as i64;
        let p2 = ((wide >> 64) as u64 & 0xFFFF_FFFF) as i64;
        if bits >> 63 == 0 {
            self.limbs[limb] += p0;
            self.limbs[limb + 1] += p1;
            self.limbs[limb + 2] += p2;
        } else {
            self.limbs[limb] -= p0;
            self.limbs[limb + 1] -= p1;
            self.limbs[limb + 2] -= p2;
        }
        self.pending += 1;
        if self.pending >= MAX_PENDING {
            self.normalize();
        }
    }

    /// Folds another accumulator in. Exact, commutative, and associative,
    /// so parallel reduction trees of any shape agree.
    pub fn merge(&mut self, other: &Self) {
        self.non_finite |= other.non_finite;
        for k in 0..LIMBS {
            self.limbs[k] += other.limbs[k];
        }
        self.pending = self.pending.saturating_add(other.pending.max(1));
        if self.pending >= MAX_PENDING {
            self.normalize();
        }
    }

    /// Carry propagation; keeps the represented value, shrinks limb
    /// magnitudes. Only needed after billions of additions.
    fn normalize(&mut self) {
        let mut carry: i64 = 0;
        for k in 0..LIMBS - 1 {
            let t = self.limbs[k] + carry;
            let low = t & 0xFFFF_FFFF;
            self.limbs[k] = low;
            carry = (t - low) >> 32;
        }
        self.limbs[LIMBS - 1] += carry;
        self.pending = 1;
    }

    /// Rounds the exact value to the nearest f64 (ties to even).
    ///
    /// The result depends only on the exact accumulated value, never on the
    /// internal limb distribution.
    pub fn round(&self) -> f64 {
        if self.non_finite {
            return f64::NAN;
        }
        // Canonical two's-complement base-2^32 digits of the total.
        let mut canon = [0u32; LIMBS];
        let mut carry: i64 = 0;
        for k in 0..LIMBS {
            let t = self.limbs[k] + carry;
            let low = t & 0xFFFF_FFFF;
            canon[k] = low as u32;
            carry = (t - low) >> 32;
        }
        debug_assert!(carry == 0 || carry == -1, "accumulator magnitude overflow");
        let negative = carry == -1;
        if negative {
            let mut c: u64 = 1;
            for limb in canon.iter_mut() {
                let v = (!*limb) as u64 + c;
                *limb = v as u32;
                c = v >> 32;
            }
            debug_assert_eq!(c, 0);
        }
        let top = match canon.iter().rposition(|&v| v != 0) {
            None => return 0.0,
            Some(t) => t,
        };
        let sign_bit: u64 = if negative { 1 << 63 } else { 0 };
        let msb = top as i64 * 32 + (31 - canon[top].leading_zeros()) as i64;
        if msb <= 52 {
            // Below the normal range: bits 1..=52 are exactly the subnormal
            // fraction (bit 0 is never set, inputs are multiples of 2^-1074).
            debug_assert_eq!(bit_at(&canon, 0), 0);
            let frac = bits_in(&canon, 1, 52);
            return f64::from_bits(sign_bit | frac);
        }
        let mut mant = bits_in(&canon, msb - 52, msb);
        let round_bit = bit_at(&canon, msb - 53);
        let sticky = any_bits_below(&canon, msb - 53);
        if round_bit == 1 && (sticky || mant & 1 == 1) {
            mant += 1;
        }
        let mut biased = (msb - 52) as u64;
        if mant == 1 << 53 {
            mant >>= 1;
            biased += 1;
        }
        if biased >= 0x7FF {
            return if negative { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        f64::from_bits(sign_bit | (biased << 52) | (mant & FRAC_MASK))
    }
}

#[inline]
fn bit_at(canon: &[u32; LIMBS], idx: i64) -> u64 {
    if idx < 0 {
        return 0;
    }
    let limb = (idx / 32) as usize;
    if limb >= LIMBS {
        return 0;
    }
    ((canon[limb] >> (idx % 32)) & 1) as u64
}

/// Bits `lo..=hi` of the magnitude as an integer (`hi - lo < 64`).
fn bits_in(canon: &[u32; LIMBS], lo: i64, hi: i64) -> u64 {
    let mut out = 0u64;
    for i in lo..=hi {
        out |= bit_at(canon, i) << (i - lo);
    }
    out
}

fn any_bits_below(canon: &[u32; LIMBS], idx: i64) -> bool {
    if idx <= 0 {
        return false;
    }
    let full = ((idx / 32) as usize).min(LIMBS);
    if canon[..full].iter().any(|&v| v != 0) {
        return true;
    }
    let rem = (idx % 32) as u32;
    rem > 0 && full < LIMBS && canon[full] & ((1u32 << rem) - 1) != 0
}

fn sum_chunk(xs: &[f64]) -> ReproAcc {
    let mut acc = ReproAcc::new();
    for &x in xs {
        acc.add(x);
    }
    acc
}

fn dot_chunk(a: &[f64], b: &[f64]) -> ReproAcc {
    let mut acc = ReproAcc::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc
}

/// Reproducible sum: exact accumulation, one final rounding. Bitwise
/// identical for any input permutation and any worker count. NaN if the
/// input contains non-finite values or the exact sum overflows.
pub fn repro_sum(exec: &Parallelism, xs: &[f64]) -> f64 {
    sum_acc(exec, xs).round()
}

pub(crate) fn sum_acc(exec: &Parallelism, xs: &[f64]) -> ReproAcc {
    match exec {
        Parallelism::Sequential => sum_chunk(xs),
        #[cfg(feature = "parallel")]
        Parallelism::Pool(pool) => pool.install(|| {
            xs.par_chunks(CHUNK)
                .map(sum_chunk)
                .reduce(ReproAcc::new, |mut a, b| {
                    a.merge(&b);
                    a
                })
        }),
    }
}

/// Reproducible inner product: the elementwise products (rounded once each,
/// as written) are summed exactly. Same invariance guarantees as
/// [`repro_sum`].
pub fn repro_dot(exec: &Parallelism, a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot product length mismatch");
    let acc = match exec {
        Parallelism::Sequential => dot_chunk(a, b),
        #[cfg(feature = "parallel")]
        Parallelism::Pool(pool) => pool.install(|| {
            a.par_chunks(CHUNK)
                .zip(b.par_chunks(CHUNK))
                .map(|(ca, cb)| dot_chunk(ca, cb))
                .reduce(ReproAcc::new, |mut x, y| {
                    x.merge(&y);
                    x
                })
        }),
    };
    acc.round()
}

/// Plain (non-reproducible) inner product; summation order depends on the
/// scheduler when parallel.
pub fn fast_dot(exec: &Parallelism, a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot product length mismatch");
    match exec {
        Parallelism::Sequential => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        #[cfg(feature = "parallel")]
        Parallelism::Pool(pool) => pool.install(|| {
            a.par_chunks(CHUNK)
                .zip(b.par_chunks(CHUNK))
                .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>())
                .sum()
        }),
    }
}
