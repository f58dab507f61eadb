//! Power assignment: fixed length-monotone families and the iterative
//! adjustable scheme with its admissible scale window and ceiling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{pow_kappa, Link, PhysicalParams, PowerAssignment};

/// Scale factor of the adjustable scheme used by the schedulers.
pub const DEFAULT_M: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("P_min below decodability floor: {p_min} < {floor}")]
    BelowFloor { p_min: f64, floor: f64 },
    #[error("power ceiling undefined: m * sigma * phi = {0} >= 1")]
    CeilingUndefined(f64),
    #[error("scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("unknown fixed power kind `{0}` (expected uniform, linear or mean)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FixedPowerKind {
    Uniform,
    Linear,
    Mean,
}

impl FixedPowerKind {
    /// Exponent applied to the link length: 0, kappa or kappa / 2.
    fn exponent(self, kappa: f64) -> f64 {
        match self {
            FixedPowerKind::Uniform => 0.0,
            FixedPowerKind::Linear => kappa,
            FixedPowerKind::Mean => kappa / 2.0,
        }
    }

    /// Scale at which every link of length up to `r_max` receives `h` times
    /// its decodability floor, i.e. `c_i <= h sigma / (h - 1)` holds with room.
    pub fn scale_for_margin(self, params: &PhysicalParams, r_max: f64, h: f64) -> f64 {
        // p(d) = scale * d^e must reach h * sigma * xi * d^kappa / eta for all d <= r_max
        let gap = params.kappa - self.exponent(params.kappa);
        h * params.sigma * params.xi * pow_kappa(r_max, gap) / params.eta
    }
}

impl fmt::Display for FixedPowerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FixedPowerKind::Uniform => "uniform",
            FixedPowerKind::Linear => "linear",
            FixedPowerKind::Mean => "mean",
        })
    }
}

impl FromStr for FixedPowerKind {
    type Err = PowerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "linear" => Ok(Self::Linear),
            "mean" => Ok(Self::Mean),
            other => Err(PowerError::UnknownKind(other.to_string())),
        }
    }
}

/// Fixed assignment `p(l) = scale * d^e` with e = 0, kappa, kappa/2.
/// Rejects assignments whose weakest power is below the decodability floor
/// of the shortest link.
pub fn assign_fixed(
    links: &[Link],
    kind: FixedPowerKind,
    scale: f64,
    params: &PhysicalParams,
) -> Result<PowerAssignment, PowerError> {
    if !(scale > 0.0) {
        return Err(PowerError::InvalidScale(scale));
    }
    let e = kind.exponent(params.kappa);
    let powers: BTreeMap<_, _> = links
        .iter()
        .map(|l| {
            (
                l.id,
                if e == 0.0 {
                    scale
                } else {
                    scale * pow_kappa(l.length, e)
                },
            )
        })
        .collect();
    let assignment = PowerAssignment::from_powers(powers);
    if let Some(r) = links.iter().map(|l| l.length).min_by(f64::total_cmp) {
        let floor = params.decodability_floor(r);
        if assignment.p_min() < floor {
            return Err(PowerError::BelowFloor {
                p_min: assignment.p_min(),
                floor,
            });
        }
    }
    Ok(assignment)
}

/// Whether powers are non-decreasing in length and `p / d^kappa` is
/// non-increasing in length, over every ordered pair.
pub fn check_monotone_sublinear(links: &[Link], powers: &PowerAssignment, kappa: f64) -> bool {
    const REL: f64 = 1e-12;
    let Some(entries) = links
        .iter()
        .map(|l| powers.get(l.id).map(|p| (l.length, p)))
        .collect::<Option<Vec<_>>>()
    else {
        return false;
    };
    for &(di, pi) in &entries {
        for &(dj, pj) in &entries {
            if di >= dj {
                if pi < pj * (1.0 - REL) {
                    return false;
                }
                if pi / pow_kappa(di, kappa) > pj / pow_kappa(dj, kappa) * (1.0 + REL) {
                    return false;
                }
            }
        }
    }
    true
}

/// Admissible interval for the scale factor `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MWindow {
    pub lo: f64,
    pub hi: f64,
}

impl MWindow {
    pub fn contains(&self, m: f64) -> bool {
        self.lo <= m && m <= self.hi
    }
}

/// Interval of `m` for which the iterative assignment is feasible on a
/// phi-separation set meeting the sender-spacing condition. `None` when the
/// discriminant is negative.
pub fn m_window(phi: f64, sigma: f64, alpha: f64, kappa: f64) -> Option<MWindow> {
    let b = pow_kappa(crate::model::beta(alpha), kappa) * phi * sigma * (sigma + 1.0);
    let disc = 4.0 * b;
    // phi = phi* gives disc = 1 up to rounding; it must collapse, not vanish
    if disc > 1.0 + 1e-12 {
        return None;
    }
    // sqrt would turn a 1e-16 rounding residue into a 1e-8 spread
    let root = if (1.0 - disc).abs() <= 1e-12 {
        0.0
    } else {
        (1.0 - disc).sqrt()
    };
    Some(MWindow {
        lo: (1.0 - root) / (2.0 * b),
        hi: (1.0 + root) / (2.0 * b),
    })
}

/// Iterative power assignment over `ordered` links:
/// `p_1 = m sigma xi d_1^k / eta` and
/// `p_i = m sigma d_i^k (sum_{j<i} p_j / d(s_j, t_i)^k + xi / eta)`.
///
/// Feasibility of the result is only guaranteed on separated sets with `m`
/// inside [`m_window`], and assumes far-field links (`eta d^-kappa <= 1`).
pub fn iterative_power_assign(
    ordered: &[Link],
    m: f64,
    params: &PhysicalParams,
) -> PowerAssignment {
    let kappa = params.kappa;
    let noise = params.xi / params.eta;
    let mut powers: Vec<f64> = Vec::with_capacity(ordered.len());
    for (i, link) in ordered.iter().enumerate() {
        let mut acc = 0.0;
        for (prev, &p) in ordered[..i].iter().zip(&powers) {
            acc += p / pow_kappa(prev.tx.distance(&link.rx), kappa);
        }
        powers.push(m * params.sigma * pow_kappa(link.length, kappa) * (acc + noise));
    }
    PowerAssignment::from_powers(ordered.iter().map(|l| l.id).zip(powers).collect())
}

/// Ceiling on any power the iterative scheme emits on a phi-separation set
/// with reference length `r_max`: `m sigma xi R^k / ((1 - m sigma phi) eta)`.
pub fn power_ceiling(
    m: f64,
    sigma: f64,
    xi: f64,
    eta: f64,
    r_max: f64,
    kappa: f64,
    phi: f64,
) -> Result<f64, PowerError> {
    let load = m * sigma * phi;
    if load >= 1.0 {
        return Err(PowerError::CeilingUndefined(load));
    }
    Ok(m * sigma * xi * pow_kappa(r_max, kappa) / ((1.0 - load) * eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, Node, Point};
    use crate::separation::phi_star;

    fn link(id: usize, s: (f64, f64), t: (f64, f64)) -> Link {
        Link::new(
            id,
            &Node {
                id: 2 * id,
                position: Point::new(s.0, s.1),
            },
            &Node {
                id: 2 * id + 1,
                position: Point::new(t.0, t.1),
            },
        )
    }

    fn lengths(ls: &[f64]) -> Vec<Link> {
        ls.iter()
            .enumerate()
            .map(|(i, &d)| link(i, (100.0 * i as f64, 0.0), (100.0 * i as f64 + d, 0.0)))
            .collect()
    }

    #[test]
    fn fixed_assignments() {
        let p = PhysicalParams::default();
        let twenty = lengths(&[1.0; 20]);
        let u = assign_fixed(&twenty, FixedPowerKind::Uniform, 1.0, &p).unwrap();
        assert_eq!(u.rho(), 1.0);

        let ls = lengths(&[1.0, 2.0]);
        let lin = assign_fixed(&ls, FixedPowerKind::Linear, 1.0, &p).unwrap();
        assert_eq!(
            (lin.get(0), lin.get(1), lin.rho()),
            (Some(1.0), Some(8.0), 8.0)
        );

        let ls = lengths(&[1.0, 4.0]);
        let mean = assign_fixed(&ls, FixedPowerKind::Mean, 1.0, &p).unwrap();
        assert!((mean.get(1).unwrap() - 8.0).abs() < 1e-12);
        assert!((mean.rho() - 8.0).abs() < 1e-12);

        // floor for d = 1 is sigma * xi / eta = 0.1
        assert!(matches!(
            assign_fixed(&lengths(&[1.0]), FixedPowerKind::Uniform, 0.05, &p),
            Err(PowerError::BelowFloor { .. })
        ));
    }

    #[test]
    fn monotone_sublinear() {
        let p = PhysicalParams::default();
        let ls = lengths(&[1.0, 1.7, 2.5, 4.0]);
        for kind in [
            FixedPowerKind::Uniform,
            FixedPowerKind::Linear,
            FixedPowerKind::Mean,
        ] {
            let a = assign_fixed(&ls, kind, 1.0, &p).unwrap();
            assert!(check_monotone_sublinear(&ls, &a, 3.0), "{kind}");
        }
        let inverse =
            PowerAssignment::from_powers(ls.iter().map(|l| (l.id, 10.0 / l.length)).collect());
        assert!(!check_monotone_sublinear(&ls, &inverse, 3.0));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "Linear".parse::<FixedPowerKind>().unwrap(),
            FixedPowerKind::Linear
        );
        assert!("cubic".parse::<FixedPowerKind>().is_err());
    }

    #[test]
    fn m_window_examples() {
        let (s, a, k) = (10.0, 2.0, 3.0);
        let ps = phi_star(s, a, k);
        let w = m_window(ps, s, a, k).unwrap();
        assert!((w.lo - 2.0).abs() < 1e-9 && (w.hi - 2.0).abs() < 1e-9);

        let w = m_window(ps / 4.0, s, a, k).unwrap();
        let b = 27.0 * (ps / 4.0) * s * (s + 1.0);
        let root = 0.75f64.sqrt();
        assert!((w.lo - (1.0 - root) / (2.0 * b)).abs() < 1e-9);
        assert!((w.hi - (1.0 + root) / (2.0 * b)).abs() < 1e-9);
        assert!(w.lo > 1.0 && w.contains(2.0));

        assert!(m_window(2.0 * ps, s, a, k).is_none());
    }

    #[test]
    fn iterative_examples() {
        let p = PhysicalParams {
            sigma: 10.0,
            xi: 0.01,
            eta: 1.0,
            ..PhysicalParams::default()
        };
        let l1 = link(0, (0.0, 0.0), (1.0, 0.0));
        let single = iterative_power_assign(&[l1], 2.0, &p);
        assert!((single.get(0).unwrap() - 0.2).abs() < 1e-15);

        let l2 = link(1, (30.0, 0.0), (32.0, 0.0));
        let two = iterative_power_assign(&[l1, l2], 2.0, &p);
        let p1 = 0.2;
        let cross = l1.tx.distance(&l2.rx);
        let p2 = 2.0 * 10.0 * 8.0 * (p1 / cross.powi(3) + 0.01);
        assert!((two.get(1).unwrap() - p2).abs() < 1e-12);
        assert!(check_feasible(&[l1, l2], &two, &p).unwrap());
    }

    #[test]
    fn ceiling_values() {
        let c = power_ceiling(2.0, 10.0, 0.01, 1.0, 5.0, 3.0, 1.0 / 11880.0).unwrap();
        assert!((c - 25.0 / (1.0 - 20.0 / 11880.0)).abs() < 1e-12);
        assert!((c - 25.04).abs() < 0.01);
        assert_eq!(
            power_ceiling(2.0, 10.0, 0.01, 1.0, 5.0, 3.0, 0.0).unwrap(),
            25.0
        );
        assert!(power_ceiling(2.0, 10.0, 0.01, 1.0, 5.0, 3.0, 0.05).is_err());
    }
}
