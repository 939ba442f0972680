//! Orbit-minimal serialization of a system.
//!
//! Two systems are equivalent when one is obtained from the other by
//! relabeling the maps and conjugating by a similarity that keeps the class
//! (a rotation by a power of `i`, the reflection `z ↦ z̄`, or a translation
//! `z ↦ z + γ` with every `(2 − u_k)γ` a Gaussian integer). The key picks one
//! representative per orbit exactly: rotations and reflections are
//! enumerated, and the translation is fixed by moving the mean of the natural
//! measure into `[-1/2, 1/2)²`.

use std::fmt;

use gasketlab_core::analysis::measure_moments;
use gasketlab_core::lattice::{GaussInt, Ifs, IfsMap, Isometry, Unit};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The representative system the key serializes.
    pub fn system(&self) -> Ifs {
        self.0.parse().expect("canonical keys hold valid systems")
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Fractional translations `δ ∈ [0,1)²` with `(2 − u_k)δ` integral for all `k`,
/// returned as numerators over the common denominator.
fn fractional_shifts(ifs: &Ifs) -> (i64, Vec<GaussInt>) {
    let two = GaussInt::new(2, 0);
    let factors: Vec<GaussInt> = ifs.maps().iter().map(|m| two - m.u.as_gauss()).collect();
    let den = factors
        .iter()
        .fold(1, |acc, f| acc / gcd(acc, f.norm()) * f.norm());
    let mut shifts = Vec::new();
    for p in 0..den {
        for q in 0..den {
            let d = GaussInt::new(p, q);
            if factors.iter().all(|&f| {
                let x = f * d;
                x.re % den == 0 && x.im % den == 0
            }) {
                shifts.push(d);
            }
        }
    }
    (den, shifts)
}

fn floor_half_up(x: Ratio<i128>) -> i64 {
    (x + Ratio::new(1, 2)).floor().to_integer() as i64
}

/// Translation-normalized, order-normalized triples of one dihedral image.
fn normalized_candidates(ifs: &Ifs, out: &mut Vec<Vec<[i64; 3]>>) {
    let moments = measure_moments(ifs);
    let (den, shifts) = fractional_shifts(ifs);
    let two = GaussInt::new(2, 0);
    for d in shifts {
        let mr = moments.mean_re + Ratio::new(d.re as i128, den as i128);
        let mi = moments.mean_im + Ratio::new(d.im as i128, den as i128);
        // total shift s = d/den − γ, with γ the nearest lattice point to the shifted mean
        let gamma = GaussInt::new(floor_half_up(mr), floor_half_up(mi));
        let num = d - gamma.scale(den);
        let mut triples: Vec<[i64; 3]> = ifs
            .maps()
            .iter()
            .map(|m| {
                let t = (two - m.u.as_gauss()) * num;
                let v = m.v + GaussInt::new(t.re / den, t.im / den);
                [m.u.power() as i64, v.re, v.im]
            })
            .collect();
        triples.sort_unstable();
        out.push(triples);
    }
}

pub fn canonical_key(ifs: &Ifs) -> CanonicalKey {
    let mut candidates = Vec::new();
    for reflect in [false, true] {
        let base = if reflect { ifs.reflected() } else { ifs.clone() };
        for eps in Unit::ALL {
            let rotated = base.conjugated(&Isometry::new(eps, GaussInt::ZERO));
            normalized_candidates(&rotated, &mut candidates);
        }
    }
    let best = candidates.into_iter().min().expect("at least one candidate");
    let maps = best
        .iter()
        .map(|&[q, a, b]| IfsMap::new(Unit::from_power(q as u8), GaussInt::new(a, b)))
        .collect();
    CanonicalKey(Ifs::new(maps).expect("same map count").to_string())
}
