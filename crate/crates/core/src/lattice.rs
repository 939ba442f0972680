//! Gaussian integers, lattice isometries and the half-scale IFS map class.
//!
//! Every map handled by this crate is either a lattice isometry
//! `h(z) = u·z + w` or an IFS contraction `f(z) = (u·z + v)/2`, where `u` is a
//! fourth root of unity and `w`, `v` are Gaussian integers. Both forms are
//! closed under the compositions the neighbor-graph construction needs, so
//! everything below is exact integer arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[inline]
fn checked(v: Option<i64>) -> i64 {
    v.expect("Gaussian integer arithmetic overflowed i64")
}

/// A Gaussian integer `re + im·i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussInt {
    pub re: i64,
    pub im: i64,
}

impl GaussInt {
    pub const ZERO: GaussInt = GaussInt { re: 0, im: 0 };
    pub const ONE: GaussInt = GaussInt { re: 1, im: 0 };
    pub const I: GaussInt = GaussInt { re: 0, im: 1 };

    pub const fn new(re: i64, im: i64) -> Self {
        GaussInt { re, im }
    }

    /// Squared absolute value `re² + im²`.
    pub fn norm(self) -> i64 {
        checked(
            self.re
                .checked_mul(self.re)
                .and_then(|a| self.im.checked_mul(self.im).and_then(|b| a.checked_add(b))),
        )
    }

    pub fn conj(self) -> Self {
        GaussInt::new(self.re, checked(self.im.checked_neg()))
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn scale(self, k: i64) -> Self {
        GaussInt::new(
            checked(self.re.checked_mul(k)),
            checked(self.im.checked_mul(k)),
        )
    }

    pub fn to_f64(self) -> (f64, f64) {
        (self.re as f64, self.im as f64)
    }
}

impl Add for GaussInt {
    type Output = GaussInt;
    fn add(self, rhs: GaussInt) -> GaussInt {
        GaussInt::new(
            checked(self.re.checked_add(rhs.re)),
            checked(self.im.checked_add(rhs.im)),
        )
    }
}

impl Sub for GaussInt {
    type Output = GaussInt;
    fn sub(self, rhs: GaussInt) -> GaussInt {
        GaussInt::new(
            checked(self.re.checked_sub(rhs.re)),
            checked(self.im.checked_sub(rhs.im)),
        )
    }
}

impl Neg for GaussInt {
    type Output = GaussInt;
    fn neg(self) -> GaussInt {
        GaussInt::new(checked(self.re.checked_neg()), checked(self.im.checked_neg()))
    }
}

impl Mul for GaussInt {
    type Output = GaussInt;
    fn mul(self, rhs: GaussInt) -> GaussInt {
        let rr = self.re.checked_mul(rhs.re);
        let ii = self.im.checked_mul(rhs.im);
        let ri = self.re.checked_mul(rhs.im);
        let ir = self.im.checked_mul(rhs.re);
        let re = rr.zip(ii).and_then(|(a, b)| a.checked_sub(b));
        let im = ri.zip(ir).and_then(|(a, b)| a.checked_add(b));
        GaussInt::new(checked(re), checked(im))
    }
}

impl fmt::Display for GaussInt {
    /// Writes `3`, `-2-i`, `4i`, `1+2i` and so on.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re, self.im) {
            (re, 0) => write!(f, "{re}"),
            (0, im) => write_imag(f, im, false),
            (re, im) => {
                write!(f, "{re}")?;
                write_imag(f, im, true)
            }
        }
    }
}

fn write_imag(f: &mut fmt::Formatter<'_>, im: i64, with_plus: bool) -> fmt::Result {
    let sign = if im < 0 {
        "-"
    } else if with_plus {
        "+"
    } else {
        ""
    };
    match im.unsigned_abs() {
        1 => write!(f, "{sign}i"),
        a => write!(f, "{sign}{a}i"),
    }
}

/// A fourth root of unity `i^q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Unit(u8);

impl Unit {
    pub const ONE: Unit = Unit(0);
    pub const I: Unit = Unit(1);
    pub const NEG_ONE: Unit = Unit(2);
    pub const NEG_I: Unit = Unit(3);

    pub const ALL: [Unit; 4] = [Unit(0), Unit(1), Unit(2), Unit(3)];

    /// Builds `i^q`, reducing `q` mod 4.
    pub const fn from_power(q: u8) -> Self {
        Unit(q % 4)
    }

    pub const fn power(self) -> u8 {
        self.0
    }

    pub const fn inverse(self) -> Self {
        Unit((4 - self.0) % 4)
    }

    /// Complex conjugate; coincides with the inverse for roots of unity.
    pub const fn conj(self) -> Self {
        self.inverse()
    }

    /// `true` for `±1`, the rotations by 0 or 180 degrees.
    pub const fn is_real(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn as_gauss(self) -> GaussInt {
        self.rotate(GaussInt::ONE)
    }

    /// Multiplies a Gaussian integer by this unit.
    pub fn rotate(self, z: GaussInt) -> GaussInt {
        match self.0 {
            0 => z,
            1 => GaussInt::new(-z.im, z.re),
            2 => -z,
            _ => GaussInt::new(z.im, -z.re),
        }
    }

    pub fn to_f64(self) -> (f64, f64) {
        match self.0 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    }
}

impl Mul for Unit {
    type Output = Unit;
    fn mul(self, rhs: Unit) -> Unit {
        Unit((self.0 + rhs.0) % 4)
    }
}

/// A lattice isometry `h(z) = u·z + w`.
///
/// Ordered by `(q, w.re, w.im)`, which is the canonical vertex order used for
/// exports and neighborhood states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Isometry {
    pub u: Unit,
    pub w: GaussInt,
}

impl Isometry {
    pub const IDENTITY: Isometry = Isometry {
        u: Unit::ONE,
        w: GaussInt::ZERO,
    };

    pub const fn new(u: Unit, w: GaussInt) -> Self {
        Isometry { u, w }
    }

    pub const fn translation(w: GaussInt) -> Self {
        Isometry { u: Unit::ONE, w }
    }

    pub fn is_identity(&self) -> bool {
        self.u == Unit::ONE && self.w.is_zero()
    }

    pub fn apply(&self, z: GaussInt) -> GaussInt {
        self.u.rotate(z) + self.w
    }

    /// `self ∘ other`, i.e. `z ↦ self(other(z))`.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry {
            u: self.u * other.u,
            w: self.u.rotate(other.w) + self.w,
        }
    }

    pub fn inverse(&self) -> Isometry {
        let inv = self.u.inverse();
        Isometry {
            u: inv,
            w: -inv.rotate(self.w),
        }
    }

    fn sort_key(&self) -> (u8, i64, i64) {
        (self.u.power(), self.w.re, self.w.im)
    }
}

impl Ord for Isometry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Isometry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Serialize, Deserialize)]
struct IsometryRepr {
    q: u8,
    re: i64,
    im: i64,
}

impl Serialize for Isometry {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        IsometryRepr {
            q: self.u.power(),
            re: self.w.re,
            im: self.w.im,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Isometry {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = IsometryRepr::deserialize(deserializer)?;
        if r.q > 3 {
            return Err(serde::de::Error::custom(format!(
                "rotation index {} is not in 0..=3",
                r.q
            )));
        }
        Ok(Isometry::new(Unit::from_power(r.q), GaussInt::new(r.re, r.im)))
    }
}

impl fmt::Display for Isometry {
    /// Formats as a function of `z`, e.g. `z-2-i`, `-iz-1+i`, `-z+1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rot = match self.u.power() {
            0 => "z",
            1 => "iz",
            2 => "-z",
            _ => "-iz",
        };
        f.write_str(rot)?;
        let w = self.w;
        if w.is_zero() {
            return Ok(());
        }
        if w.re != 0 {
            write!(f, "{}{}", if w.re > 0 { "+" } else { "" }, w.re)?;
            if w.im != 0 {
                write_imag(f, w.im, true)?;
            }
            Ok(())
        } else {
            write_imag(f, w.im, true)
        }
    }
}

/// An exact Gaussian rational `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussFraction {
    pub num: GaussInt,
    pub den: GaussInt,
}

impl GaussFraction {
    /// Real and imaginary parts as reduced rationals.
    pub fn to_ratios(&self) -> (Ratio<i128>, Ratio<i128>) {
        // num/den = num·conj(den)/|den|²
        let n = self.num * self.den.conj();
        let d = self.den.norm() as i128;
        (Ratio::new(n.re as i128, d), Ratio::new(n.im as i128, d))
    }

    pub fn to_f64(&self) -> (f64, f64) {
        let (re, im) = self.to_ratios();
        (ratio_to_f64(re), ratio_to_f64(im))
    }
}

pub(crate) fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// One contraction `f(z) = (u·z + v)/2` of the IFS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IfsMap {
    pub u: Unit,
    pub v: GaussInt,
}

impl IfsMap {
    pub const fn new(u: Unit, v: GaussInt) -> Self {
        IfsMap { u, v }
    }

    /// Converts `½·s(z + c)` into the affine form, `v = s·c`.
    pub fn from_rotation_then_shift(s: Unit, c: GaussInt) -> Self {
        IfsMap { u: s, v: s.rotate(c) }
    }

    /// Converts `½·(s(z) + c)` into the affine form, `v = c`.
    pub fn from_shift_after_rotation(s: Unit, c: GaussInt) -> Self {
        IfsMap { u: s, v: c }
    }

    /// Fixed point `v/(2 − u)`.
    pub fn fixed_point(&self) -> GaussFraction {
        GaussFraction {
            num: self.v,
            den: GaussInt::new(2, 0) - self.u.as_gauss(),
        }
    }

    pub fn apply_f64(&self, z: (f64, f64)) -> (f64, f64) {
        let (ur, ui) = self.u.to_f64();
        let re = ur * z.0 - ui * z.1 + self.v.re as f64;
        let im = ur * z.1 + ui * z.0 + self.v.im as f64;
        (re * 0.5, im * 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseIfsError {
    #[error("empty IFS description")]
    Empty,
    #[error("map {index} has {found} fields, expected 3 (q,a,b): `{token}`")]
    FieldCount {
        index: usize,
        found: usize,
        token: String,
    },
    #[error("rotation index `{token}` in map {index} is not in 0..=3")]
    RotationOutOfRange { index: usize, token: String },
    #[error("`{token}` in map {index} is not an integer")]
    NotAnInteger { index: usize, token: String },
    #[error("an IFS needs at least 2 maps, found {0}")]
    TooFewMaps(usize),
}

/// An IFS of `m ≥ 2` half-scale lattice maps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ifs {
    maps: Vec<IfsMap>,
}

impl Ifs {
    pub fn new(maps: Vec<IfsMap>) -> Result<Self, ParseIfsError> {
        if maps.len() < 2 {
            return Err(ParseIfsError::TooFewMaps(maps.len()));
        }
        Ok(Ifs { maps })
    }

    /// Builds from `(q, a, b)` triples; panics on fewer than two maps.
    pub fn from_triples(triples: &[(u8, i64, i64)]) -> Self {
        let maps = triples
            .iter()
            .map(|&(q, a, b)| IfsMap::new(Unit::from_power(q), GaussInt::new(a, b)))
            .collect();
        Ifs::new(maps).expect("an IFS needs at least two maps")
    }

    pub fn maps(&self) -> &[IfsMap] {
        &self.maps
    }

    pub fn map(&self, k: usize) -> &IfsMap {
        &self.maps[k]
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn triples(&self) -> Vec<[i64; 3]> {
        self.maps
            .iter()
            .map(|m| [m.u.power() as i64, m.v.re, m.v.im])
            .collect()
    }

    /// `R² = max_k |v_k|²`; the attractor lies in the closed disk of radius `R` about 0.
    pub fn bounding_radius_sq(&self) -> i64 {
        self.maps.iter().map(|m| m.v.norm()).max().unwrap_or(0)
    }

    pub fn bounding_radius(&self) -> f64 {
        (self.bounding_radius_sq() as f64).sqrt()
    }

    /// `f_j⁻¹ ∘ h ∘ f_k`, the neighbor map one level down along label `(j, k)`.
    pub fn neighbor_transition(&self, h: &Isometry, j: usize, k: usize) -> Isometry {
        let fj = &self.maps[j];
        let fk = &self.maps[k];
        let inv = fj.u.inverse();
        let inner = h.u.rotate(fk.v) + h.w.scale(2) - fj.v;
        Isometry {
            u: inv * h.u * fk.u,
            w: inv.rotate(inner),
        }
    }

    /// The initial neighbor maps `f_j⁻¹ f_k` for all `j ≠ k`, in `(j, k)` order.
    pub fn initial_neighbors(&self) -> Vec<(usize, usize, Isometry)> {
        let m = self.len();
        let mut out = Vec::with_capacity(m * (m - 1));
        for j in 0..m {
            for k in 0..m {
                if j != k {
                    out.push((j, k, self.neighbor_transition(&Isometry::IDENTITY, j, k)));
                }
            }
        }
        out
    }

    /// Reorders the maps: map `i` of the result is map `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Ifs {
        assert_eq!(perm.len(), self.len(), "permutation length mismatch");
        Ifs {
            maps: perm.iter().map(|&p| self.maps[p]).collect(),
        }
    }

    /// The conjugate system `{g f_k g⁻¹}` for a lattice isometry `g`.
    pub fn conjugated(&self, g: &Isometry) -> Ifs {
        // g f g⁻¹(z) = (u z + ε v + (2 − u) w)/2 for g(z) = ε z + w
        let two = GaussInt::new(2, 0);
        Ifs {
            maps: self
                .maps
                .iter()
                .map(|m| IfsMap {
                    u: m.u,
                    v: g.u.rotate(m.v) + (two - m.u.as_gauss()) * g.w,
                })
                .collect(),
        }
    }

    /// Conjugation by the reflection `z ↦ z̄`.
    pub fn reflected(&self) -> Ifs {
        Ifs {
            maps: self
                .maps
                .iter()
                .map(|m| IfsMap {
                    u: m.u.conj(),
                    v: m.v.conj(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Ifs {
    /// Canonical text form `q,a,b;q,a,b;...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.maps.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{},{},{}", m.u.power(), m.v.re, m.v.im)?;
        }
        Ok(())
    }
}

impl FromStr for Ifs {
    type Err = ParseIfsError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(ParseIfsError::Empty);
        }
        let mut maps = Vec::new();
        for (index, token) in compact.split(';').enumerate() {
            let fields: Vec<&str> = token.split(',').collect();
            if fields.len() != 3 {
                return Err(ParseIfsError::FieldCount {
                    index,
                    found: fields.len(),
                    token: token.to_string(),
                });
            }
            let q: i64 = fields[0].parse().map_err(|_| ParseIfsError::NotAnInteger {
                index,
                token: fields[0].to_string(),
            })?;
            if !(0..=3).contains(&q) {
                return Err(ParseIfsError::RotationOutOfRange {
                    index,
                    token: fields[0].to_string(),
                });
            }
            let parse = |s: &str| -> Result<i64, ParseIfsError> {
                s.parse().map_err(|_| ParseIfsError::NotAnInteger {
                    index,
                    token: s.to_string(),
                })
            };
            let a = parse(fields[1])?;
            let b = parse(fields[2])?;
            maps.push(IfsMap::new(Unit::from_power(q as u8), GaussInt::new(a, b)));
        }
        Ifs::new(maps)
    }
}

impl Serialize for Ifs {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.triples().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Ifs {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let triples = Vec::<[i64; 3]>::deserialize(deserializer)?;
        let mut maps = Vec::with_capacity(triples.len());
        for [q, a, b] in triples {
            if !(0..=3).contains(&q) {
                return Err(serde::de::Error::custom(format!(
                    "rotation index {q} is not in 0..=3"
                )));
            }
            maps.push(IfsMap::new(Unit::from_power(q as u8), GaussInt::new(a, b)));
        }
        Ifs::new(maps).map_err(serde::de::Error::custom)
    }
}

/// Named systems used throughout the tests and the CLI.
pub mod fixtures {
    pub const GASKET: &str = "0,-1,-1;0,1,-1;0,-1,1";
    pub const CROSSINGS: &str = "3,0,0;2,-1,0;2,1,1";
    pub const PATCHES: &str = "1,-6,-10;0,2,5;3,2,6";
    pub const BUBBLES: &str = "1,-2,-2;2,2,3;1,0,2";
    pub const FIREWORKS: &str = "1,0,0;3,6,0;3,0,1";
    pub const THICKET: &str = "1,-2,-1;1,0,-3;2,-1,1";
    pub const FOREST: &str = "1,0,-5;0,0,0;1,-1,-4";
    /// Bubbles with `v_0 = -2i` and `v_2 = 2+2i`: 84 proper neighbors,
    /// none finite, 22 maximal degree, 7521 neighborhoods.
    pub const BUBBLES_VARIANT: &str = "1,0,-2;2,2,3;1,2,2";
    /// Two translations whose attractor is the segment `[-4, 4]`.
    pub const INTERVAL: &str = "0,-4,0;0,4,0";

    pub const NAMED: [(&str, &str); 8] = [
        ("gasket", GASKET),
        ("crossings", CROSSINGS),
        ("patches", PATCHES),
        ("bubbles", BUBBLES),
        ("fireworks", FIREWORKS),
        ("thicket", THICKET),
        ("forest", FOREST),
        ("bubbles-variant", BUBBLES_VARIANT),
    ];

    pub fn lookup(name: &str) -> Option<&'static str> {
        NAMED
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, s)| *s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(q: u8, re: i64, im: i64) -> Isometry {
        Isometry::new(Unit::from_power(q), GaussInt::new(re, im))
    }

    fn crossings() -> Ifs {
        fixtures::CROSSINGS.parse().unwrap()
    }

    #[test]
    fn compose_examples() {
        let t = iso(0, -2, -1);
        assert_eq!(t.compose(&Isometry::IDENTITY), t);
        let r = iso(3, 0, -1);
        let r_inv = iso(1, -1, 0);
        assert!(r.compose(&r_inv).is_identity());
        assert_eq!(t.compose(&t), iso(0, -4, -2));
    }

    #[test]
    fn invert_examples() {
        assert_eq!(iso(0, -2, -1).inverse(), iso(0, 2, 1));
        assert_eq!(Isometry::IDENTITY.inverse(), Isometry::IDENTITY);
        let u = iso(3, -1, 1);
        assert_eq!(u.inverse(), iso(1, 1, 1));
        assert!(u.compose(&u.inverse()).is_identity());
    }

    #[test]
    fn crossings_transitions() {
        let sys = crossings();
        let t = sys.neighbor_transition(&Isometry::IDENTITY, 1, 2);
        assert_eq!(t, iso(0, -2, -1));
        assert_eq!(sys.neighbor_transition(&t, 1, 2), iso(0, 2, 1));
        let r = iso(3, 0, -1);
        assert_eq!(sys.neighbor_transition(&r, 0, 1), iso(2, 1, 0));
    }

    #[test]
    fn initial_neighbor_examples() {
        let init = crossings().initial_neighbors();
        assert_eq!(init.len(), 6);
        assert_eq!(init[0], (0, 1, iso(3, 0, -1)));

        let two: Ifs = fixtures::INTERVAL.parse().unwrap();
        assert_eq!(two.initial_neighbors()[0], (0, 1, iso(0, 8, 0)));

        let gasket: Ifs = fixtures::GASKET.parse().unwrap();
        assert_eq!(gasket.initial_neighbors()[0], (0, 1, iso(0, 2, 0)));
    }

    #[test]
    fn parse_fixtures() {
        let c = crossings();
        assert_eq!(c.map(0), &IfsMap::new(Unit::NEG_I, GaussInt::ZERO));
        assert_eq!(c.map(1), &IfsMap::new(Unit::NEG_ONE, GaussInt::new(-1, 0)));
        assert_eq!(c.map(2), &IfsMap::new(Unit::NEG_ONE, GaussInt::new(1, 1)));
        // f_2(z) = -(z - 1 - i)/2 in rotate-then-shift form
        assert_eq!(
            *c.map(2),
            IfsMap::from_rotation_then_shift(Unit::NEG_ONE, GaussInt::new(-1, -1))
        );
        let g: Ifs = fixtures::GASKET.parse().unwrap();
        assert_eq!(
            *g.map(2),
            IfsMap::from_shift_after_rotation(Unit::ONE, GaussInt::new(-1, 1))
        );
        assert_eq!(c.to_string(), fixtures::CROSSINGS);
        let spaced: Ifs = " 3, 0,0 ; 2,-1, 0;2,1,1 ".parse().unwrap();
        assert_eq!(spaced, c);
    }

    #[test]
    fn parse_errors_name_the_token() {
        let err = "3,0;2,1,1".parse::<Ifs>().unwrap_err();
        assert!(matches!(err, ParseIfsError::FieldCount { index: 0, found: 2, .. }));
        let err = "4,0,0;0,1,1".parse::<Ifs>().unwrap_err();
        assert_eq!(
            err,
            ParseIfsError::RotationOutOfRange {
                index: 0,
                token: "4".into()
            }
        );
        let err = "0,0,0;0,1.5,1".parse::<Ifs>().unwrap_err();
        assert!(err.to_string().contains("1.5"));
        assert_eq!("".parse::<Ifs>().unwrap_err(), ParseIfsError::Empty);
        assert_eq!(
            "0,1,1".parse::<Ifs>().unwrap_err(),
            ParseIfsError::TooFewMaps(1)
        );
    }

    #[test]
    fn json_form() {
        let c = crossings();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, "[[3,0,0],[2,-1,0],[2,1,1]]");
        let back: Ifs = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<Ifs>("[[5,0,0],[0,0,0]]").is_err());
    }

    #[test]
    fn fixed_point_is_exact() {
        // f(z) = (-z + 1 + i)/2 fixes (1 + i)/3
        let f = crossings().maps()[2];
        let (re, im) = f.fixed_point().to_ratios();
        assert_eq!(re, Ratio::new(1, 3));
        assert_eq!(im, Ratio::new(1, 3));
    }

    #[test]
    fn isometry_display() {
        assert_eq!(iso(0, -2, -1).to_string(), "z-2-i");
        assert_eq!(iso(3, -1, 1).to_string(), "-iz-1+i");
        assert_eq!(iso(1, -1, 0).to_string(), "iz-1");
        assert_eq!(iso(2, 1, 0).to_string(), "-z+1");
        assert_eq!(iso(3, 0, -1).to_string(), "-iz-i");
        assert_eq!(iso(0, 0, 3).to_string(), "z+3i");
        assert_eq!(Isometry::IDENTITY.to_string(), "z");
        assert_eq!(GaussInt::new(-2, -1).to_string(), "-2-i");
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_asserts() {
        let big = GaussInt::new(i64::MAX / 2 + 1, 0);
        let _ = big + big;
    }

    #[test]
    fn norm_at_documented_range() {
        let z = GaussInt::new(1 << 30, -(1 << 30));
        assert_eq!(z.norm(), 1i64 << 61);
    }

    #[test]
    fn units() {
        for u in Unit::ALL {
            assert_eq!(u * u.inverse(), Unit::ONE);
            assert_eq!(u * u * u * u, Unit::ONE);
        }
        assert_eq!(Unit::I.rotate(GaussInt::new(2, 1)), GaussInt::new(-1, 2));
    }
}
