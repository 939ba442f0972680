use gasketlab_core::lattice::Ifs;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "lowercase")]
pub enum GateDecision {
    Pass { estimate: u64 },
    Skip { estimate: u64, limit: u64 },
}

impl GateDecision {
    pub fn passed(&self) -> bool {
        matches!(self, GateDecision::Pass { .. })
    }

    pub fn estimate(&self) -> u64 {
        match *self {
            GateDecision::Pass { estimate } | GateDecision::Skip { estimate, .. } => estimate,
        }
    }
}

/// Gaussian integers with `|w|² ≤ bound`.
pub fn lattice_points_in_disk(bound: i64) -> u64 {
    if bound < 0 {
        return 0;
    }
    let r = (bound as f64).sqrt() as i64 + 1;
    let mut count = 0u64;
    for x in -r..=r {
        let rest = bound - x * x;
        if rest < 0 {
            continue;
        }
        let mut y = (rest as f64).sqrt() as i64;
        while y * y > rest {
            y -= 1;
        }
        while (y + 1) * (y + 1) <= rest {
            y += 1;
        }
        count += 2 * y as u64 + 1;
    }
    count
}

/// Upper estimate of neighbor candidates: four rotations times the
/// translations allowed by the `(2R)²` bound.
pub fn candidate_estimate(ifs: &Ifs) -> u64 {
    4 * lattice_points_in_disk(4 * ifs.bounding_radius_sq())
}

pub fn complexity_gate(ifs: &Ifs, max_candidates: usize) -> GateDecision {
    let estimate = candidate_estimate(ifs);
    if estimate > max_candidates as u64 {
        GateDecision::Skip {
            estimate,
            limit: max_candidates as u64,
        }
    } else {
        GateDecision::Pass { estimate }
    }
}
