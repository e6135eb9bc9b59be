//! Exact rational scalar with an i128 fast path.
//!
//! Coefficient arithmetic dominates the symbolic layer, and almost all
//! values fit comfortably in machine words. `Q` keeps a reduced
//! numerator/denominator pair in i128 and transparently promotes to
//! `BigRational` when any checked operation overflows, so results are
//! always exact.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One as _, Signed as _, ToPrimitive, Zero as _};
use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, Debug)]
enum Repr {
    /// reduced, d > 0
    Small { n: i128, d: i128 },
    Big(BigRational),
}

/// Exact rational number.
#[derive(Clone, Debug)]
pub struct Q(Repr);

/// `n/d` as an exact rational.
pub fn q(n: i64, d: i64) -> Q {
    assert!(d != 0, "zero denominator");
    Q::small(n as i128, d as i128)
}

/// Integer constant.
pub fn qi(n: i64) -> Q {
    Q(Repr::Small { n: n as i128, d: 1 })
}

impl Q {
    fn small(n: i128, d: i128) -> Q {
        debug_assert!(d != 0);
        if n == i128::MIN || d == i128::MIN {
            return Q::big(BigRational::new(BigInt::from(n), BigInt::from(d)));
        }
        let (mut n, mut d) = if d < 0 { (-n, -d) } else { (n, d) };
        if n == 0 {
            d = 1;
        } else {
            let g = n.gcd(&d);
            n /= g;
            d /= g;
        }
        Q(Repr::Small { n, d })
    }

    fn big(r: BigRational) -> Q {
        // demote when it fits so later arithmetic stays on the fast path
        if let (Some(n), Some(d)) = (r.numer().to_i128(), r.denom().to_i128()) {
            return Q(Repr::Small { n, d });
        }
        Q(Repr::Big(r))
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small { n, d } => BigRational::new(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(r) => r.clone(),
        }
    }

    pub fn zero() -> Q {
        qi(0)
    }

    pub fn one() -> Q {
        qi(1)
    }

    pub fn from_integer(n: i64) -> Q {
        qi(n)
    }

    /// Exact rational equal to a finite float.
    pub fn from_float(x: f64) -> Option<Q> {
        BigRational::from_float(x).map(Q::big)
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small { n, .. } => *n == 0,
            Repr::Big(r) => r.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match &self.0 {
            Repr::Small { n, d } => *n == 1 && *d == 1,
            Repr::Big(r) => r.is_one(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small { n, .. } => *n < 0,
            Repr::Big(r) => r.is_negative(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small { n, .. } => *n > 0,
            Repr::Big(r) => r.is_positive(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small { d, .. } => *d == 1,
            Repr::Big(r) => r.is_integer(),
        }
    }

    pub fn to_f64(&self) -> Option<f64> {
        match &self.0 {
            Repr::Small { n, d } => Some(*n as f64 / *d as f64),
            Repr::Big(r) => r.to_f64(),
        }
    }

    pub fn abs(&self) -> Q {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn pow(&self, exp: i32) -> Q {
        if exp == 0 {
            return Q::one();
        }
        let base = if exp < 0 {
            Q::one() / self.clone()
        } else {
            self.clone()
        };
        let mut acc = Q::one();
        for _ in 0..exp.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }

    fn add_impl(&self, other: &Q) -> Q {
        if let (Repr::Small { n: a, d: b }, Repr::Small { n: c, d: e }) = (&self.0, &other.0) {
            // a/b + c/e with the denominator gcd pulled out first
            let g = b.gcd(e);
            let (b1, e1) = (b / g, e / g);
            let num = a
                .checked_mul(e1)
                .and_then(|x| c.checked_mul(b1).and_then(|y| x.checked_add(y)));
            let den = b1.checked_mul(*e).filter(|d| *d != 0);
            if let (Some(n), Some(d)) = (num, den) {
                return Q::small(n, d);
            }
        }
        Q::big(self.to_big() + other.to_big())
    }

    fn mul_impl(&self, other: &Q) -> Q {
        if let (Repr::Small { n: a, d: b }, Repr::Small { n: c, d: e }) = (&self.0, &other.0) {
            // cross-reduce before multiplying to delay overflow
            let g1 = a.gcd(e);
            let g2 = c.gcd(b);
            let (a, e) = (a / g1, e / g1);
            let (c, b) = (c / g2, b / g2);
            if let (Some(n), Some(d)) = (a.checked_mul(c), b.checked_mul(e)) {
                return Q::small(n, d);
            }
        }
        Q::big(self.to_big() * other.to_big())
    }

    fn div_impl(&self, other: &Q) -> Q {
        assert!(!other.is_zero(), "division by zero rational");
        let inv = match &other.0 {
            Repr::Small { n, d } => Q::small(*d, *n),
            Repr::Big(r) => Q::big(r.recip()),
        };
        self.mul_impl(&inv)
    }

    fn neg_impl(&self) -> Q {
        match &self.0 {
            Repr::Small { n, d } if *n != i128::MIN => Q(Repr::Small { n: -n, d: *d }),
            _ => Q::big(-self.to_big()),
        }
    }
}

impl PartialEq for Q {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small { n: a, d: b }, Repr::Small { n: c, d: e }) => a == c && b == e,
            _ => self.to_big() == other.to_big(),
        }
    }
}

impl Eq for Q {}

impl PartialOrd for Q {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Q {
    fn cmp(&self, other: &Self) -> Ordering {
        if let (Repr::Small { n: a, d: b }, Repr::Small { n: c, d: e }) = (&self.0, &other.0) {
            if let (Some(l), Some(r)) = (a.checked_mul(*e), c.checked_mul(*b)) {
                return l.cmp(&r);
            }
        }
        self.to_big().cmp(&other.to_big())
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small { n, d } => {
                if *d == 1 {
                    write!(f, "{}", n)
                } else {
                    write!(f, "{}/{}", n, d)
                }
            }
            Repr::Big(r) => write!(f, "{}", r),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $impl_fn:ident) => {
        impl std::ops::$trait<Q> for Q {
            type Output = Q;
            fn $method(self, rhs: Q) -> Q {
                Q::$impl_fn(&self, &rhs)
            }
        }
        impl std::ops::$trait<&Q> for Q {
            type Output = Q;
            fn $method(self, rhs: &Q) -> Q {
                Q::$impl_fn(&self, rhs)
            }
        }
        impl std::ops::$trait<Q> for &Q {
            type Output = Q;
            fn $method(self, rhs: Q) -> Q {
                Q::$impl_fn(self, &rhs)
            }
        }
        impl std::ops::$trait<&Q> for &Q {
            type Output = Q;
            fn $method(self, rhs: &Q) -> Q {
                Q::$impl_fn(self, rhs)
            }
        }
    };
}

binop!(Add, add, add_impl);
binop!(Mul, mul, mul_impl);
binop!(Div, div, div_impl);

impl std::ops::Sub<Q> for Q {
    type Output = Q;
    fn sub(self, rhs: Q) -> Q {
        self.add_impl(&rhs.neg_impl())
    }
}
impl std::ops::Sub<&Q> for Q {
    type Output = Q;
    fn sub(self, rhs: &Q) -> Q {
        self.add_impl(&rhs.neg_impl())
    }
}
impl std::ops::Sub<Q> for &Q {
    type Output = Q;
    fn sub(self, rhs: Q) -> Q {
        self.add_impl(&rhs.neg_impl())
    }
}
impl std::ops::Sub<&Q> for &Q {
    type Output = Q;
    fn sub(self, rhs: &Q) -> Q {
        self.add_impl(&rhs.neg_impl())
    }
}

impl std::ops::Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        self.neg_impl()
    }
}
impl std::ops::Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        self.neg_impl()
    }
}

impl std::ops::AddAssign<Q> for Q {
    fn add_assign(&mut self, rhs: Q) {
        *self = self.add_impl(&rhs);
    }
}
impl std::ops::AddAssign<&Q> for Q {
    fn add_assign(&mut self, rhs: &Q) {
        *self = self.add_impl(rhs);
    }
}
impl std::ops::SubAssign<Q> for Q {
    fn sub_assign(&mut self, rhs: Q) {
        *self = self.add_impl(&rhs.neg_impl());
    }
}
impl std::ops::SubAssign<&Q> for Q {
    fn sub_assign(&mut self, rhs: &Q) {
        *self = self.add_impl(&rhs.neg_impl());
    }
}
impl std::ops::MulAssign<Q> for Q {
    fn mul_assign(&mut self, rhs: Q) {
        *self = self.mul_impl(&rhs);
    }
}
impl std::ops::MulAssign<&Q> for Q {
    fn mul_assign(&mut self, rhs: &Q) {
        *self = self.mul_impl(rhs);
    }
}
