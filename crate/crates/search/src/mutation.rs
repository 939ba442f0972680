//! Elementary moves of the random walk: one rotation or one translation
//! coordinate changes per step.

use gasketlab_core::lattice::{GaussInt, Ifs, IfsMap, Unit};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SearchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coord {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mutation {
    /// Sets `q_k`.
    Rotate { k: usize, q: u8 },
    /// Adds `delta` (±1) to one coordinate of `v_k`.
    Shift { k: usize, coord: Coord, delta: i8 },
}

/// Index of a mutable field: rotations come first, then `(re, im)` per map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Rotation(usize),
    Translation(usize, Coord),
}

pub fn mutable_fields(m: usize, cfg: &SearchConfig) -> Vec<Field> {
    let first = usize::from(cfg.fix_first_rotation);
    (first..m)
        .map(Field::Rotation)
        .chain((0..m).flat_map(|k| [Field::Translation(k, Coord::Re), Field::Translation(k, Coord::Im)]))
        .collect()
}

impl Mutation {
    pub fn field(&self) -> Field {
        match *self {
            Mutation::Rotate { k, .. } => Field::Rotation(k),
            Mutation::Shift { k, coord, .. } => Field::Translation(k, coord),
        }
    }
}

pub fn apply_mutation(ifs: &Ifs, m: Mutation) -> Ifs {
    let mut maps = ifs.maps().to_vec();
    match m {
        Mutation::Rotate { k, q } => maps[k].u = Unit::from_power(q),
        Mutation::Shift { k, coord, delta } => {
            let d = delta as i64;
            let v = maps[k].v;
            maps[k].v = match coord {
                Coord::Re => GaussInt::new(v.re + d, v.im),
                Coord::Im => GaussInt::new(v.re, v.im + d),
            };
        }
    }
    Ifs::new(maps).expect("mutation keeps the map count")
}

/// Draws one elementary change with every mutable field equally likely.
///
/// A shift that would leave `[-range, range]` goes the other way.
pub fn random_mutation<R: Rng + ?Sized>(ifs: &Ifs, cfg: &SearchConfig, rng: &mut R) -> Mutation {
    let fields = mutable_fields(ifs.len(), cfg);
    match fields[rng.random_range(0..fields.len())] {
        Field::Rotation(k) => {
            let cur = ifs.map(k).u.power();
            let q = (cur + rng.random_range(1..4u8)) % 4;
            Mutation::Rotate { k, q }
        }
        Field::Translation(k, coord) => {
            let v = ifs.map(k).v;
            let x = match coord {
                Coord::Re => v.re,
                Coord::Im => v.im,
            };
            let r = cfg.translation_range;
            let mut delta: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
            let moved = x + i64::from(delta);
            if moved > r || moved < -r {
                delta = -delta;
            }
            Mutation::Shift { k, coord, delta }
        }
    }
}

pub fn mutate<R: Rng + ?Sized>(ifs: &Ifs, cfg: &SearchConfig, rng: &mut R) -> Ifs {
    apply_mutation(ifs, random_mutation(ifs, cfg, rng))
}

/// A uniformly random three-map system in range.
pub fn random_point<R: Rng + ?Sized>(cfg: &SearchConfig, rng: &mut R) -> Ifs {
    let r = cfg.translation_range;
    let maps = (0..3)
        .map(|k| {
            let q = if k == 0 && cfg.fix_first_rotation {
                1
            } else {
                rng.random_range(0..4u8)
            };
            IfsMap::new(
                Unit::from_power(q),
                GaussInt::new(rng.random_range(-r..=r), rng.random_range(-r..=r)),
            )
        })
        .collect();
    Ifs::new(maps).expect("three maps")
}

/// Forces `q_0 = 1` when the configuration pins the first rotation.
pub fn pin_first_rotation(ifs: &Ifs, cfg: &SearchConfig) -> Ifs {
    if !cfg.fix_first_rotation || ifs.map(0).u == Unit::I {
        return ifs.clone();
    }
    apply_mutation(ifs, Mutation::Rotate { k: 0, q: 1 })
}
