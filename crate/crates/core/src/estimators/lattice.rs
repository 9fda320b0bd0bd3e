//! Exact excursion law of the ±1 walk.
//!
//! While alive the area grows by the new height (at least one) on every
//! step, so states `(h, A)` can be swept in increasing `A` without a time
//! loop. Heights at area `A` never exceed `√(2A)`.

use serde::{Deserialize, Serialize};

use super::TailEstimate;
use crate::error::{check, Error, Result};
use crate::excursion::CompensatedSum;

/// Mass below this is dropped and booked as neglected.
pub const PRUNE: f64 = 1e-18;
const MAX_NEGLECT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeCaps {
    pub area_cap: u64,
    pub height_cap: u64,
}

impl LatticeCaps {
    /// Smallest caps that resolve `{A_τ > x}` without height truncation.
    pub fn auto(x: f64) -> Self {
        let area_cap = x.max(0.0).floor() as u64 + 1;
        Self {
            area_cap,
            height_cap: area_cap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeDp {
    pub p: f64,
    pub caps: LatticeCaps,
    /// `P(A_τ = k)` for `k = 0..=area_cap`.
    pub area_pmf: Vec<f64>,
    /// `P(A_τ > area_cap)`.
    pub beyond_cap: f64,
    pub e_tau: f64,
    /// `P(τ > k)` for `k = 0, 1, ...` until it drops below the pruning floor.
    pub tau_survival: Vec<f64>,
    /// Mass dropped by pruning or by the height cap.
    pub neglected_mass: f64,
}

impl LatticeDp {
    /// `P(A_τ > x)` for any `x < area_cap + 1`.
    pub fn area_tail(&self, x: f64) -> Result<f64> {
        check(x >= 0.0, "x", x, "must be nonnegative")?;
        let k = x.floor() as u64;
        if k > self.caps.area_cap {
            return Err(Error::CapOverflow(format!("x = {x} exceeds area cap {}", self.caps.area_cap)));
        }
        let mut s = CompensatedSum::default();
        s.add(self.beyond_cap);
        for &m in &self.area_pmf[k as usize + 1..] {
            s.add(m);
        }
        Ok(s.value())
    }

    pub fn estimate(&self, x: f64) -> Result<TailEstimate> {
        self.area_tail(x).map(TailEstimate::exact)
    }
}

/// Probability that the walk started at 1 reaches `h` before 0.
fn reach_probability(p: f64, h: u64) -> f64 {
    let r = (1.0 - p) / p;
    (r - 1.0) / (r.powf(h as f64) - 1.0)
}

/// Exact law of `A_τ` up to `caps.area_cap`, plus `E τ` and the survival
/// function of `τ`, for the walk with `P(X = +1) = p`.
pub fn dp_exact_lattice(p: f64, x: f64, caps: LatticeCaps) -> Result<LatticeDp> {
    check(p > 0.0 && p < 0.5, "p", p, "must lie in (0, 1/2)")?;
    check(x >= 0.0 && x.is_finite(), "x", x, "must be nonnegative")?;
    check(caps.height_cap >= 1, "height_cap", caps.height_cap as f64, "must be at least 1")?;
    if x.floor() > caps.area_cap as f64 {
        return Err(Error::CapOverflow(format!("x = {x} exceeds area cap {}", caps.area_cap)));
    }
    // A live state satisfies h <= A, so a height cap at or above the area cap
    // never binds.
    if caps.height_cap < caps.area_cap && reach_probability(p, caps.height_cap + 1) > MAX_NEGLECT {
        return Err(Error::CapOverflow(format!(
            "height cap {} leaves mass above {MAX_NEGLECT}",
            caps.height_cap
        )));
    }
    let q = 1.0 - p;
    let cap = caps.area_cap as usize;
    let h_cap = caps.height_cap as usize;
    let width = |a: usize| ((2.0 * a as f64).sqrt() as usize + 2).min(h_cap + 1);
    // live[a][h]: probability of being alive at height h with area a.
    let mut live: Vec<Vec<f64>> = (0..=cap).map(|a| vec![0.0; width(a)]).collect();
    let mut pmf = vec![0.0; cap + 1];
    let mut beyond = CompensatedSum::default();
    let mut neglected = CompensatedSum::default();
    pmf[0] = q;
    if cap >= 1 {
        live[1][1] = p;
    } else {
        beyond.add(p);
    }
    for a in 1..=cap {
        let row = std::mem::take(&mut live[a]);
        for (h, &m) in row.iter().enumerate().skip(1) {
            if m == 0.0 {
                continue;
            }
            if m < PRUNE {
                neglected.add(m);
                continue;
            }
            let up = h + 1;
            if up > h_cap {
                neglected.add(m * p);
            } else if a + up > cap {
                beyond.add(m * p);
            } else {
                live[a + up][up] += m * p;
            }
            let down = h - 1;
            if down == 0 {
                pmf[a] += m * q;
            } else if a + down > cap {
                beyond.add(m * q);
            } else {
                live[a + down][down] += m * q;
            }
        }
    }
    let (tau_survival, tau_neglected) = tau_law(p);
    neglected.add(tau_neglected);
    let e_tau = {
        let mut s = CompensatedSum::default();
        for &v in &tau_survival {
            s.add(v);
        }
        s.value()
    };
    Ok(LatticeDp {
        p,
        caps,
        area_pmf: pmf,
        beyond_cap: beyond.value(),
        e_tau,
        tau_survival,
        neglected_mass: neglected.value(),
    })
}

/// `P(τ > k)` by a height-only forward sweep.
fn tau_law(p: f64) -> (Vec<f64>, f64) {
    let q = 1.0 - p;
    let mut survival = vec![1.0];
    let mut dist = vec![0.0, p];
    let mut neglected = 0.0;
    loop {
        let alive: f64 = dist.iter().sum();
        if alive < PRUNE {
            neglected += alive;
            break;
        }
        survival.push(alive);
        let mut next = vec![0.0; dist.len() + 1];
        for (h, &m) in dist.iter().enumerate().skip(1) {
            if m < PRUNE {
                neglected += m;
                continue;
            }
            next[h + 1] += m * p;
            if h > 1 {
                next[h - 1] += m * q;
            }
        }
        while next.len() > 2 && *next.last().unwrap() == 0.0 {
            next.pop();
        }
        dist = next;
    }
    (survival, neglected)
}
