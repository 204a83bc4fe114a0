//! Finite-field arithmetic.
//!
//! Every scheme in this crate is generic over [`Field`]. Two families are
//! provided: binary extension fields GF(2^w) backed by log/antilog tables,
//! and prime fields GF(p) for `p < 2^16`. The default is GF(2^16) with the
//! reduction polynomial `x^16 + x^12 + x^3 + x + 1`.

use std::fmt;
use std::hash::Hash;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unknown field `{0}` (expected gf2_16, gf2_8, prime65521, prime251 or prime7)")]
    UnknownField(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    BinaryExtension,
    Prime,
}

/// Runtime description of a supported field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FieldSpec {
    #[default]
    Gf2_16,
    Gf2_8,
    Prime65521,
    Prime251,
    Prime7,
}

impl FieldSpec {
    pub const ALL: [FieldSpec; 5] = [
        FieldSpec::Gf2_16,
        FieldSpec::Gf2_8,
        FieldSpec::Prime65521,
        FieldSpec::Prime251,
        FieldSpec::Prime7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldSpec::Gf2_16 => "gf2_16",
            FieldSpec::Gf2_8 => "gf2_8",
            FieldSpec::Prime65521 => "prime65521",
            FieldSpec::Prime251 => "prime251",
            FieldSpec::Prime7 => "prime7",
        }
    }

    pub fn kind(self) -> FieldKind {
        match self {
            FieldSpec::Gf2_16 | FieldSpec::Gf2_8 => FieldKind::BinaryExtension,
            _ => FieldKind::Prime,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            FieldSpec::Gf2_16 => 1 << 16,
            FieldSpec::Gf2_8 => 1 << 8,
            FieldSpec::Prime65521 => 65521,
            FieldSpec::Prime251 => 251,
            FieldSpec::Prime7 => 7,
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldSpec {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldSpec::ALL
            .into_iter()
            .find(|spec| spec.name() == s)
            .ok_or_else(|| FieldError::UnknownField(s.to_string()))
    }
}

impl TryFrom<String> for FieldSpec {
    type Error = FieldError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<FieldSpec> for String {
    fn from(spec: FieldSpec) -> Self {
        spec.name().to_string()
    }
}

/// A finite field element.
///
/// Implementations must be exact: all operations are bit-for-bit
/// deterministic functions of their operands.
pub trait Field:
    Copy
    + Eq
    + Hash
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const SPEC: FieldSpec;
    const ORDER: u32;
    const ZERO: Self;
    const ONE: Self;

    /// Builds an element from its canonical integer representative,
    /// reducing modulo the field order.
    fn from_u32(value: u32) -> Self;

    /// Canonical integer representative in `[0, q)`.
    fn value(self) -> u32;

    fn inv(self) -> Option<Self>;

    #[inline]
    fn is_zero(self) -> bool {
        self == Self::ZERO
    }

    fn checked_div(self, rhs: Self) -> Result<Self, FieldError> {
        rhs.inv()
            .map(|r| self * r)
            .ok_or(FieldError::DivisionByZero)
    }

    /// `self^k`, with `0^0 = 1`.
    fn pow(self, mut k: u64) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        acc
    }

    /// Uniform draw over all `q` elements.
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_u32(rng.random_range(0..Self::ORDER))
    }

    /// Uniform draw over the `q - 1` nonzero elements.
    fn random_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_u32(rng.random_range(1..Self::ORDER))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Applies one binary field operation; division by zero is an error.
pub fn arith<F: Field>(a: F, b: F, op: ArithOp) -> Result<F, FieldError> {
    match op {
        ArithOp::Add => Ok(a + b),
        ArithOp::Sub => Ok(a - b),
        ArithOp::Mul => Ok(a * b),
        ArithOp::Div => a.checked_div(b),
    }
}

pub fn sample_uniform<F: Field, R: Rng + ?Sized>(rng: &mut R) -> F {
    F::random(rng)
}

struct LogTables {
    exp: Vec<u16>,
    log: Vec<u32>,
}

impl LogTables {
    /// Builds tables for GF(2^width) under `poly`, using `x` as generator.
    /// Panics if `x` does not generate the multiplicative group.
    fn binary(width: u32, poly: u32) -> Self {
        let order = 1usize << width;
        let group = order - 1;
        let mut exp = vec![0u16; 2 * group];
        let mut log = vec![0u32; order];
        let mut x: u32 = 1;
        for (i, slot) in exp.iter_mut().take(group).enumerate() {
            *slot = x as u16;
            assert!(
                i == 0 || x != 1,
                "reduction polynomial {poly:#x} is not primitive"
            );
            log[x as usize] = i as u32;
            x <<= 1;
            if x & (1 << width) != 0 {
                x ^= poly;
            }
        }
        assert_eq!(x, 1, "reduction polynomial {poly:#x} is not primitive");
        for i in group..2 * group {
            exp[i] = exp[i - group];
        }
        LogTables { exp, log }
    }
}

macro_rules! binary_field {
    ($(#[$meta:meta])* $name:ident, $spec:expr, $width:expr, $poly:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
        pub struct $name(u16);

        impl $name {
            pub const REDUCTION_POLY: u32 = $poly;

            fn tables() -> &'static LogTables {
                static TABLES: OnceLock<LogTables> = OnceLock::new();
                TABLES.get_or_init(|| LogTables::binary($width, $poly))
            }
        }

        impl Field for $name {
            const SPEC: FieldSpec = $spec;
            const ORDER: u32 = 1 << $width;
            const ZERO: Self = $name(0);
            const ONE: Self = $name(1);

            #[inline]
            fn from_u32(value: u32) -> Self {
                $name((value % Self::ORDER) as u16)
            }

            #[inline]
            fn value(self) -> u32 {
                self.0 as u32
            }

            fn inv(self) -> Option<Self> {
                if self.0 == 0 {
                    return None;
                }
                let t = Self::tables();
                let group = Self::ORDER - 1;
                let l = t.log[self.0 as usize];
                Some($name(t.exp[((group - l) % group) as usize]))
            }

            fn pow(self, k: u64) -> Self {
                if k == 0 {
                    return Self::ONE;
                }
                if self.0 == 0 {
                    return Self::ZERO;
                }
                let t = Self::tables();
                let group = (Self::ORDER - 1) as u64;
                let e = (t.log[self.0 as usize] as u64 * (k % group)) % group;
                $name(t.exp[e as usize])
            }
        }

        impl Add for $name {
            type Output = Self;
            #[inline]
            #[allow(clippy::suspicious_arithmetic_impl)]
            fn add(self, rhs: Self) -> Self {
                $name(self.0 ^ rhs.0)
            }
        }

        impl Sub for $name {
            type Output = Self;
            #[inline]
            #[allow(clippy::suspicious_arithmetic_impl)]
            fn sub(self, rhs: Self) -> Self {
                $name(self.0 ^ rhs.0)
            }
        }

        impl Neg for $name {
            type Output = Self;
            #[inline]
            fn neg(self) -> Self {
                self
            }
        }

        impl Mul for $name {
            type Output = Self;
            #[inline]
            fn mul(self, rhs: Self) -> Self {
                if self.0 == 0 || rhs.0 == 0 {
                    return $name(0);
                }
                let t = Self::tables();
                let idx = t.log[self.0 as usize] + t.log[rhs.0 as usize];
                $name(t.exp[idx as usize])
            }
        }

        impl AddAssign for $name {
            #[inline]
            fn add_assign(&mut self, rhs: Self) {
                *self = *self + rhs;
            }
        }

        impl SubAssign for $name {
            #[inline]
            fn sub_assign(&mut self, rhs: Self) {
                *self = *self - rhs;
            }
        }

        impl MulAssign for $name {
            #[inline]
            fn mul_assign(&mut self, rhs: Self) {
                *self = *self * rhs;
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

binary_field!(
    /// GF(2^16) modulo `x^16 + x^12 + x^3 + x + 1`.
    Gf65536,
    FieldSpec::Gf2_16,
    16,
    0x1100B
);

binary_field!(
    /// GF(2^8) modulo `x^8 + x^4 + x^3 + x^2 + 1`.
    Gf256,
    FieldSpec::Gf2_8,
    8,
    0x11D
);

/// Prime field GF(P) for a prime `P < 2^16`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Fp<const P: u32>(u32);

pub type Fp65521 = Fp<65521>;
pub type Fp251 = Fp<251>;
pub type Fp7 = Fp<7>;

/// Maps a prime modulus to its [`FieldSpec`]; only the supported primes
/// implement [`Field`].
pub trait PrimeModulus {
    const SPEC: FieldSpec;
}

impl PrimeModulus for Fp<65521> {
    const SPEC: FieldSpec = FieldSpec::Prime65521;
}

impl PrimeModulus for Fp<251> {
    const SPEC: FieldSpec = FieldSpec::Prime251;
}

impl PrimeModulus for Fp<7> {
    const SPEC: FieldSpec = FieldSpec::Prime7;
}

impl<const P: u32> Field for Fp<P>
where
    Fp<P>: PrimeModulus,
{
    const SPEC: FieldSpec = <Fp<P> as PrimeModulus>::SPEC;
    const ORDER: u32 = P;
    const ZERO: Self = Fp(0);
    const ONE: Self = Fp(1);

    #[inline]
    fn from_u32(value: u32) -> Self {
        Fp(value % P)
    }

    #[inline]
    fn value(self) -> u32 {
        self.0
    }

    fn inv(self) -> Option<Self> {
        if self.0 == 0 {
            None
        } else {
            // Fermat: a^(p-2) = a^-1
            Some(self.pow(P as u64 - 2))
        }
    }
}

impl<const P: u32> Add for Fp<P> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let s = self.0 + rhs.0;
        Fp(if s >= P { s - P } else { s })
    }
}

impl<const P: u32> Sub for Fp<P> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Fp(if self.0 >= rhs.0 {
            self.0 - rhs.0
        } else {
            self.0 + P - rhs.0
        })
    }
}

impl<const P: u32> Neg for Fp<P> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Fp(if self.0 == 0 { 0 } else { P - self.0 })
    }
}

impl<const P: u32> Mul for Fp<P> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Fp(((self.0 as u64 * rhs.0 as u64) % P as u64) as u32)
    }
}

impl<const P: u32> AddAssign for Fp<P> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const P: u32> SubAssign for Fp<P> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const P: u32> MulAssign for Fp<P> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const P: u32> fmt::Debug for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const P: u32> fmt::Display for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f7(v: u32) -> Fp7 {
        Fp7::from_u32(v)
    }

    #[test]
    fn gf7_hand_examples() {
        assert_eq!(arith(f7(3), f7(5), ArithOp::Add).unwrap(), f7(1));
        assert_eq!(arith(f7(3), f7(5), ArithOp::Mul).unwrap(), f7(1));
        assert_eq!(f7(3).pow(2), f7(2));
        for x in 1..7 {
            assert_eq!(f7(x).pow(6), Fp7::ONE);
        }
    }

    #[test]
    fn pow_zero_zero_is_one() {
        assert_eq!(Fp7::ZERO.pow(0), Fp7::ONE);
        assert_eq!(Gf65536::ZERO.pow(0), Gf65536::ONE);
        assert_eq!(Gf65536::ZERO.pow(5), Gf65536::ZERO);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(
            arith(f7(3), Fp7::ZERO, ArithOp::Div),
            Err(FieldError::DivisionByZero)
        );
        assert_eq!(
            Gf65536::from_u32(9).checked_div(Gf65536::ZERO),
            Err(FieldError::DivisionByZero)
        );
    }

    #[test]
    fn characteristic_two_self_sum_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = Gf65536::random(&mut rng);
            assert_eq!(arith(a, a, ArithOp::Add).unwrap(), Gf65536::ZERO);
        }
    }

    #[test]
    fn gf65536_pow3_matches_repeated_mul() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = Gf65536::random(&mut rng);
            assert_eq!(a.pow(3), (a * a) * a);
        }
    }

    #[test]
    fn reduction_polynomials_are_primitive() {
        // The table builder asserts that x has full multiplicative order,
        // which implies irreducibility of the modulus.
        let g = Gf65536::from_u32(2);
        assert_eq!(g.pow(65535), Gf65536::ONE);
        for d in [3u64, 5, 17, 257] {
            assert_ne!(g.pow(65535 / d), Gf65536::ONE);
        }
        let g = Gf256::from_u32(2);
        for d in [3u64, 5, 17] {
            assert_ne!(g.pow(255 / d), Gf256::ONE);
        }
    }

    #[test]
    fn gf7_exhaustive_commutativity() {
        for a in 0..7 {
            for b in 0..7 {
                assert_eq!(f7(a) + f7(b), f7(b) + f7(a));
                assert_eq!(f7(a) * f7(b), f7(b) * f7(a));
                assert_eq!(f7(a) - f7(b) + f7(b), f7(a));
            }
        }
    }

    fn egcd_inverse(a: i64, p: i64) -> i64 {
        let (mut r0, mut r1) = (p, a);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        assert_eq!(r0, 1);
        t0.rem_euclid(p)
    }

    #[test]
    fn prime_inverse_tables_match_extended_euclid() {
        for a in 1..251u32 {
            let inv = Fp251::from_u32(a).inv().unwrap();
            assert_eq!(inv.value() as i64, egcd_inverse(a as i64, 251));
        }
        for a in 1..7u32 {
            assert_eq!(
                f7(a).inv().unwrap().value() as i64,
                egcd_inverse(a as i64, 7)
            );
        }
    }

    /// Carry-less polynomial arithmetic over GF(2), used as an oracle.
    fn clmul_mod(mut a: u32, mut b: u32, poly: u32, width: u32) -> u32 {
        let mut acc = 0u32;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & (1 << width) != 0 {
                a ^= poly;
            }
        }
        acc
    }

    fn poly_egcd_inverse(a: u32, poly: u32) -> u32 {
        fn deg(x: u32) -> i32 {
            31 - x.leading_zeros() as i32
        }
        let (mut r0, mut r1) = (poly, a);
        let (mut t0, mut t1) = (0u32, 1u32);
        while r1 != 0 {
            let mut q = 0u32;
            let mut r = r0;
            while r != 0 && deg(r) >= deg(r1) {
                let s = deg(r) - deg(r1);
                q ^= 1 << s;
                r ^= r1 << s;
            }
            let mut qt = 0u32;
            let mut bit = 0;
            while (q >> bit) != 0 {
                if (q >> bit) & 1 == 1 {
                    qt ^= t1 << bit;
                }
                bit += 1;
            }
            (r0, r1) = (r1, r);
            (t0, t1) = (t1, t0 ^ qt);
        }
        assert_eq!(r0, 1);
        t0
    }

    #[test]
    fn gf256_inverse_table_matches_polynomial_euclid() {
        for a in 1..256u32 {
            let inv = Gf256::from_u32(a).inv().unwrap();
            assert_eq!(inv.value(), poly_egcd_inverse(a, Gf256::REDUCTION_POLY));
        }
    }

    #[test]
    fn gf65536_table_mul_matches_carryless_mul() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a = Gf65536::random(&mut rng);
            let b = Gf65536::random(&mut rng);
            let expect = clmul_mod(a.value(), b.value(), Gf65536::REDUCTION_POLY, 16);
            assert_eq!((a * b).value(), expect);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..16)
                .map(|_| sample_uniform::<Gf65536, _>(&mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn gf251_sampling_passes_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000usize;
        let mut counts = vec![0u64; 251];
        for _ in 0..draws {
            counts[sample_uniform::<Fp251, _>(&mut rng).value() as usize] += 1;
        }
        let expected = draws as f64 / 251.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // Upper 0.001 critical value of chi-square with 250 degrees of freedom.
        assert!(chi2 < 329.0, "chi2 = {chi2}");
    }

    #[test]
    fn field_spec_names_round_trip() {
        for spec in FieldSpec::ALL {
            assert_eq!(spec.name().parse::<FieldSpec>().unwrap(), spec);
        }
        assert!("gf3".parse::<FieldSpec>().is_err());
        assert_eq!(Gf65536::SPEC.order(), Gf65536::ORDER);
        assert_eq!(<Fp65521 as Field>::SPEC.order(), 65521);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gf65536_field_axioms(a in 0u32..65536, b in 0u32..65536, c in 0u32..65536) {
                let (a, b, c) = (Gf65536::from_u32(a), Gf65536::from_u32(b), Gf65536::from_u32(c));
                prop_assert_eq!(a * b, b * a);
                prop_assert_eq!(a + b, b + a);
                prop_assert_eq!(a * (b + c), a * b + a * c);
                if !a.is_zero() {
                    prop_assert_eq!(a.checked_div(a).unwrap(), Gf65536::ONE);
                    prop_assert_eq!(a.checked_div(a).unwrap() * a, a);
                }
            }

            #[test]
            fn pow_adds_exponents(a in 0u32..65536, i in 0u64..=1000, j in 0u64..=1000) {
                let a = Gf65536::from_u32(a);
                prop_assert_eq!(a.pow(i + j), a.pow(i) * a.pow(j));
                let p = Fp65521::from_u32(a.value());
                prop_assert_eq!(p.pow(i + j), p.pow(i) * p.pow(j));
            }

            #[test]
            fn prime_field_inverse(a in 1u32..65521) {
                let a = Fp65521::from_u32(a);
                prop_assert_eq!(a * a.inv().unwrap(), Fp65521::ONE);
                prop_assert_eq!(-a + a, Fp65521::ZERO);
            }
        }
    }
}
