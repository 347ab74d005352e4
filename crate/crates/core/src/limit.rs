//! The unperturbed spectrum `(eta + 2 pi j)^2 + pi^2 k^2 / H^2`, its
//! branch crossings (nodes) and the eigenvalue-count box constants.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{ceil, fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::PI;

/// One limit eigenvalue with its Fourier index `j` and transversal index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEigen {
    pub j: i32,
    pub k: u32,
    pub eta: f64,
    pub value: f64,
}

pub fn branch_value(h: f64, eta: f64, j: i32, k: u32) -> f64 {
    let a = eta + 2.0 * PI * j as f64;
    a * a + PI * PI * (k * k) as f64 / (h * h)
}

fn branch_slope(eta: f64, j: i32) -> f64 {
    2.0 * (eta + 2.0 * PI * j as f64)
}

fn check_height(h: f64) -> Result<(), Error> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("strip height {h} must be positive")));
    }
    Ok(())
}

/// The `count` smallest limit eigenvalues at `eta`, ascending, with labels.
/// Ties are ordered by `k`, then `j`.
pub fn limit_eigenvalues(h: f64, eta: f64, count: usize) -> Result<Vec<LimitEigen>, Error> {
    check_height(h)?;
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    if !(fabs(eta) <= PI * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!("eta = {eta} outside [-pi, pi]")));
    }
    let mut big_j: i32 = 2;
    loop {
        // Every branch outside the window lies above this bound.
        let r = 2.0 * PI * (big_j - 1) as f64 - PI;
        let bound = r * r;
        let k_max = ceil(h * sqrt(bound) / PI) as u32 + 1;
        let mut all = Vec::new();
        for k in 0..=k_max {
            for j in -big_j..=big_j {
                all.push(LimitEigen { j, k, eta, value: branch_value(h, eta, j, k) });
            }
        }
        all.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.k.cmp(&b.k)).then(a.j.cmp(&b.j)));
        if all.len() >= count && all[count - 1].value < bound {
            all.truncate(count);
            return Ok(all);
        }
        big_j += 1;
    }
}

/// Heights at which branch crossings degenerate.
pub fn exceptional_heights() -> [f64; 5] {
    [0.5, 1.0 / sqrt(3.0), 1.0 / sqrt(8.0), 1.0 / sqrt(5.0), 1.0]
}

pub const EXCEPTIONAL_TOL: f64 = 1e-6;

pub fn is_exceptional(h: f64) -> bool {
    exceptional_heights().iter().any(|&e| fabs(h - e) < EXCEPTIONAL_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    OpensGap,
    Shaded,
    SymmetryProtected,
    SameSlopeNoGap,
    ExceptionalH,
    /// Outside the catalogue of classified nodes.
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub eta_star: f64,
    pub lambda_star: f64,
    /// The two crossing branches as `(j, k)`.
    pub branches: [(i32, u32); 2],
    pub status: NodeStatus,
    /// Which classification rule fired.
    pub rule: String,
}

/// Nodes found for a given height, plus warnings (exceptional heights,
/// triple crossings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub nodes: Vec<Node>,
    pub warnings: Vec<String>,
}

fn near(a: f64, b: f64) -> bool {
    fabs(a - b) <= 1e-12 * (1.0 + fabs(a).max(fabs(b)))
}

/// All crossings of distinct limit branches with `Lambda <= lambda_max`
/// and `eta in [-pi, pi]`, sorted by `(lambda, eta)`.
pub fn find_nodes(h: f64, lambda_max: f64) -> Result<NodeSet, Error> {
    check_height(h)?;
    let mut warnings = Vec::new();
    let exceptional = is_exceptional(h);
    if exceptional {
        warnings.push(format!("H = {h} is exceptional; node classification is not attempted"));
    }
    let k_max = (h * sqrt(lambda_max.max(0.0)) / PI) as u32;
    let j_max = (sqrt(lambda_max.max(0.0)) / (2.0 * PI) + 1.0) as i32;
    let mut branches = Vec::new();
    for k in 0..=k_max {
        for j in -j_max..=j_max {
            // Smallest value of the branch over [-pi, pi].
            let m = (fabs(2.0 * PI * j as f64) - PI).max(0.0);
            if m * m + PI * PI * (k * k) as f64 / (h * h) <= lambda_max {
                branches.push((j, k));
            }
        }
    }
    let mut nodes = Vec::new();
    for (i, &(j1, k1)) in branches.iter().enumerate() {
        for &(j2, k2) in &branches[i + 1..] {
            if j1 == j2 {
                continue;
            }
            let (a, b) = (2.0 * PI * j1 as f64, 2.0 * PI * j2 as f64);
            let c = PI * PI / (h * h);
            let (c1, c2) = (c * (k1 * k1) as f64, c * (k2 * k2) as f64);
            let mut eta = (c2 - c1 - a * a + b * b) / (2.0 * (a - b));
            if fabs(eta) > PI * (1.0 + 1e-12) {
                continue;
            }
            if fabs(fabs(eta) - PI) <= 1e-12 * PI {
                eta = if eta > 0.0 { PI } else { -PI };
            }
            let lambda = branch_value(h, eta, j1, k1);
            if lambda > lambda_max {
                continue;
            }
            nodes.push(Node {
                eta_star: eta,
                lambda_star: lambda,
                branches: [(j1, k1), (j2, k2)],
                status: NodeStatus::Unclassified,
                rule: String::new(),
            });
        }
    }
    for idx in 0..nodes.len() {
        let (eta, lambda) = (nodes[idx].eta_star, nodes[idx].lambda_star);
        let through = branches.iter().filter(|&&(j, k)| near(branch_value(h, eta, j, k), lambda)).count();
        let (status, rule) = classify(h, &nodes[idx], exceptional, through);
        if through > 2 && !exceptional {
            warnings.push(format!("{through} branches meet at ({eta}, {lambda})"));
        }
        nodes[idx].status = status;
        nodes[idx].rule = rule.into();
    }
    nodes.sort_by(|a, b| {
        a.lambda_star.total_cmp(&b.lambda_star).then(a.eta_star.total_cmp(&b.eta_star)).then(a.branches.cmp(&b.branches))
    });
    warnings.dedup();
    Ok(NodeSet { nodes, warnings })
}

fn classify(h: f64, node: &Node, exceptional: bool, through: usize) -> (NodeStatus, &'static str) {
    let [(j1, k1), (j2, k2)] = node.branches;
    let (eta, lambda) = (node.eta_star, node.lambda_star);
    if exceptional {
        return (NodeStatus::ExceptionalH, "height in the exceptional set");
    }
    if through > 2 {
        return (NodeStatus::ExceptionalH, "more than two branches cross");
    }
    if k1 == 0 && k2 == 0 {
        if near(fabs(eta), PI) && near(lambda, PI * PI) {
            return if h < 1.0 {
                (NodeStatus::OpensGap, "square node, H < 1")
            } else {
                (NodeStatus::Shaded, "square node, H > 1: covered by (0,1)")
            };
        }
        if near(eta + 1.0, 1.0) && near(lambda, 4.0 * PI * PI) {
            return if h < 0.5 {
                (NodeStatus::OpensGap, "circle node, H < 1/2")
            } else {
                (NodeStatus::Shaded, "circle node, H > 1/2: covered by a k = 1 branch")
            };
        }
    }
    let (s1, s2) = (branch_slope(eta, j1), branch_slope(eta, j2));
    if s1 * s2 > 0.0 {
        return (NodeStatus::SameSlopeNoGap, "both branches ascending or both descending");
    }
    if (k1 + k2) % 2 == 1 {
        return (NodeStatus::SymmetryProtected, "branches of opposite mirror parity do not interact");
    }
    (NodeStatus::Unclassified, "not covered by the node catalogue")
}

/// Constants bounding the boxes that count perturbed eigenvalues near the
/// first two nodes. Entries are `None` where the height is out of range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxConstants {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub k4: Option<f64>,
}

pub fn count_box_constants(h: f64, delta1: f64, delta3: f64) -> Result<BoxConstants, Error> {
    check_height(h)?;
    for (name, d) in [("delta1", delta1), ("delta3", delta3)] {
        if !(d > 0.0 && d < PI) {
            return Err(Error::InvalidInput(format!("{name} = {d} outside (0, pi)")));
        }
    }
    let pi2 = PI * PI;
    let h2 = h * h;
    let (k1, k2) = if h < 1.0 {
        (
            Some((2.0 * PI * delta1).min(pi2 * (1.0 - h2) / (2.0 * h2))),
            Some((2.0 * pi2).min(2.0 * pi2 * (1.0 - h2) / (3.0 * h2))),
        )
    } else {
        (None, None)
    };
    let (k3, k4) = if h < 0.5 {
        (
            Some((4.0 * PI * delta3).min(pi2 * (1.0 - 4.0 * h2) / h2)),
            Some((4.0 * pi2).min(pi2 * (1.0 - 4.0 * h2) / (2.0 * h2))),
        )
    } else {
        (None, None)
    };
    Ok(BoxConstants { k1, k2, k3, k4 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn brute(h: f64, eta: f64, count: usize) -> Vec<f64> {
        let mut v = Vec::new();
        for j in -10..=10 {
            for k in 0..=10u32 {
                v.push(branch_value(h, eta, j, k));
            }
        }
        v.sort_by(f64::total_cmp);
        v.truncate(count);
        v
    }

    #[test]
    fn reference_values() {
        let p2 = PI * PI;
        let v = limit_eigenvalues(0.4, 0.0, 5).unwrap();
        let want = [0.0, 4.0 * p2, 4.0 * p2, 6.25 * p2, 10.25 * p2];
        for (e, w) in v.iter().zip(want) {
            assert!(fabs(e.value - w) <= 1e-12 * w.max(1.0));
        }
        assert_eq!((v[0].j, v[0].k), (0, 0));
        assert_eq!(v[3].k, 1);
        let v = limit_eigenvalues(0.4, PI, 2).unwrap();
        assert_eq!(v.iter().map(|e| (e.j, e.k)).collect::<Vec<_>>(), vec![(-1, 0), (0, 0)]);
        assert!(v.iter().all(|e| near(e.value, p2)));
        let v = limit_eigenvalues(0.73, -1.1, 1).unwrap();
        assert_eq!(v[0].value, 1.1 * 1.1);
    }

    #[test]
    fn nodes_at_reference_height() {
        let set = find_nodes(0.4, 5.0 * PI * PI).unwrap();
        let find = |eta: f64, lam: f64| {
            set.nodes.iter().find(|n| near(n.eta_star, eta) && near(n.lambda_star, lam)).cloned()
        };
        let circle = find(0.0, 4.0 * PI * PI).unwrap();
        assert_eq!(circle.status, NodeStatus::OpensGap);
        assert_eq!(circle.branches, [(-1, 0), (1, 0)]);
        for s in [-1.0, 1.0] {
            let sq = find(s * PI, PI * PI).unwrap();
            assert_eq!(sq.status, NodeStatus::OpensGap);
        }
        assert!(set.nodes.iter().all(|n| n.lambda_star >= PI * PI * (1.0 - 1e-12)));
        let shaded = find_nodes(0.7, 5.0 * PI * PI).unwrap();
        let c = shaded.nodes.iter().find(|n| near(n.eta_star, 0.0) && near(n.lambda_star, 4.0 * PI * PI)).unwrap();
        assert_eq!(c.status, NodeStatus::Shaded);
    }

    #[test]
    fn node_values_on_both_branches() {
        for h in [0.3, 0.4, 0.45, 0.7, 1.3] {
            for n in find_nodes(h, 40.0 * PI * PI).unwrap().nodes {
                for (j, k) in n.branches {
                    let v = branch_value(h, n.eta_star, j, k);
                    assert!(fabs(v - n.lambda_star) <= 1e-12 * n.lambda_star);
                }
            }
        }
    }

    #[test]
    fn diamond_and_same_slope_nodes() {
        let pair = |set: &NodeSet, a: (i32, u32), b: (i32, u32)| {
            set.nodes.iter().find(|n| n.branches.contains(&a) && n.branches.contains(&b)).unwrap().clone()
        };
        // H < 1/2: (1,0) meets (0,1) at eta > 0 where both ascend.
        let low = find_nodes(0.4, 12.0 * PI * PI).unwrap();
        assert_eq!(pair(&low, (0, 1), (1, 0)).status, NodeStatus::SameSlopeNoGap);
        // H > 1/2: the same pair crosses at eta < 0 with opposite slopes.
        let high = find_nodes(0.6, 12.0 * PI * PI).unwrap();
        let d = pair(&high, (0, 1), (1, 0));
        assert!(d.eta_star < 0.0);
        assert_eq!(d.status, NodeStatus::SymmetryProtected);
    }

    #[test]
    fn exceptional_height_flags_everything() {
        let set = find_nodes(0.5 + 1e-8, 5.0 * PI * PI).unwrap();
        assert!(!set.warnings.is_empty());
        assert!(set.nodes.iter().all(|n| n.status == NodeStatus::ExceptionalH));
    }

    #[test]
    fn box_constants() {
        let c = count_box_constants(0.4, 0.5, 0.5).unwrap();
        assert!(fabs(c.k1.unwrap() - PI) < 1e-15);
        assert!(fabs(c.k2.unwrap() - 2.0 * PI * PI) < 1e-15);
        assert!(fabs(c.k3.unwrap() - 2.0 * PI) < 1e-15);
        assert!(fabs(c.k4.unwrap() - 1.125 * PI * PI) < 1e-13);
        let partial = count_box_constants(0.7, 0.5, 0.5).unwrap();
        assert!(partial.k1.is_some() && partial.k3.is_none() && partial.k4.is_none());
        assert!(count_box_constants(0.4, 0.0, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(h in 0.2f64..1.5, eta in -PI..PI, count in 1usize..=20) {
            let v = limit_eigenvalues(h, eta, count).unwrap();
            let b = brute(h, eta, count);
            for (e, w) in v.iter().zip(&b) {
                prop_assert!(fabs(e.value - w) <= 1e-12 * w.max(1.0));
            }
        }

        #[test]
        fn even_in_eta_and_prefix_stable(h in 0.2f64..1.5, eta in -PI..PI, count in 1usize..=15) {
            let a = limit_eigenvalues(h, eta, count).unwrap();
            let b = limit_eigenvalues(h, -eta, count).unwrap();
            let c = limit_eigenvalues(h, eta, count + 1).unwrap();
            for i in 0..count {
                prop_assert!(fabs(a[i].value - b[i].value) <= 1e-12 * a[i].value.max(1.0));
                prop_assert_eq!(a[i].value, c[i].value);
            }
        }
    }
}
