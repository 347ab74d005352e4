//! First-order corrections `Lambda_eps = Lambda0 + eps Lambda' + O(eps^2)`
//! built from the hole constants: simple branches, the two node splittings
//! in the fast Floquet variable `psi = (eta - eta*) / eps`, and the gap
//! predictions.

use alloc::string::String;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::cell_constants::CellConstants;
use crate::error::Error;
use crate::PI;

/// Correction of a simple point of the limit branch `(j, k)` at `eta`.
/// Never positive.
pub fn correction_simple(cc: &CellConstants, j: i32, k: u32, eta: f64) -> f64 {
    let h = cc.height;
    let q = eta + 2.0 * PI * j as f64;
    let kk = (k * k) as f64;
    -2.0 * (PI * PI * kk / (h * h) * (cc.m_xi / (2.0 * h)) + q * q * (cc.m1 - cc.area_term()))
}

/// The two nodes whose splitting opens gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    /// `(0, 4 pi^2)`, branches `e^{+-2 pi i x1}`.
    Circ,
    /// `(+-pi, pi^2)`, branches `e^{+-pi i x1}`.
    Square,
}

impl NodeId {
    pub fn eta(self) -> f64 {
        match self {
            NodeId::Circ => 0.0,
            NodeId::Square => PI,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NodeId::Circ => 4.0 * PI * PI,
            NodeId::Square => PI * PI,
        }
    }

    /// Frequency `n` of the two branches `e^{+-n pi i x1}`.
    fn n(self) -> f64 {
        match self {
            NodeId::Circ => 2.0,
            NodeId::Square => 1.0,
        }
    }

    /// Upper end of the height range covered by the splitting theorem.
    pub fn height_limit(self) -> f64 {
        match self {
            NodeId::Circ => 0.5,
            NodeId::Square => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCorrection {
    pub node_id: NodeId,
    pub psi: f64,
    pub lambda_prime_minus: f64,
    pub lambda_prime_plus: f64,
    /// Unit vectors `(a+, a-)`.
    pub eigvec_minus: [f64; 2],
    pub eigvec_plus: [f64; 2],
    pub warning: Option<String>,
}

/// The symmetric 2x2 system for the amplitudes `(a+, a-)`. With `n = 2`
/// (circ) and `n = 1` (square):
/// diagonal `n^2 pi^2 |omega|/H - 2 n^2 pi^2 m1 +- 2 n pi psi`,
/// off-diagonal `n^2 pi^2 |omega|/H + 2 n^2 pi^2 m1`.
pub fn node_matrix(cc: &CellConstants, node: NodeId, psi: f64) -> [[f64; 2]; 2] {
    let n = node.n();
    let a = n * n * PI * PI * cc.area_omega / cc.height;
    let b = 2.0 * n * n * PI * PI * cc.m1;
    let c = 2.0 * n * PI * psi;
    [[a - b + c, a + b], [a + b, a - b - c]]
}

fn unit_eigvec(m: &[[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    // Rows of (M - lambda I) annihilate v; use the better-conditioned row.
    let r0 = [m[0][0] - lambda, m[0][1]];
    let r1 = [m[1][0], m[1][1] - lambda];
    let row = if r0[0] * r0[0] + r0[1] * r0[1] >= r1[0] * r1[0] + r1[1] * r1[1] { r0 } else { r1 };
    let mut v = [row[1], -row[0]];
    let norm = sqrt(v[0] * v[0] + v[1] * v[1]);
    if norm == 0.0 {
        return [1.0, 0.0];
    }
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    [v[0] / norm, v[1] / norm]
}

pub fn correction_node(cc: &CellConstants, node: NodeId, psi: f64) -> NodeCorrection {
    let n = node.n();
    let s = cc.area_term();
    let centre = n * n * PI * PI * (s - cc.m1);
    let radical = n * PI * sqrt(n * n * PI * PI * (cc.m1 + s) * (cc.m1 + s) + psi * psi);
    let (minus, plus) = (2.0 * (centre - radical), 2.0 * (centre + radical));
    let m = node_matrix(cc, node, psi);
    let warning = (!(cc.height < node.height_limit())).then(|| {
        alloc::format!("H = {} is outside (0, {}) where the splitting is justified", cc.height, node.height_limit())
    });
    NodeCorrection {
        node_id: node,
        psi,
        lambda_prime_minus: minus,
        lambda_prime_plus: plus,
        eigvec_minus: unit_eigvec(&m, minus),
        eigvec_plus: unit_eigvec(&m, plus),
        warning,
    }
}

/// `constant + slope * eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub constant: f64,
    pub slope: f64,
}

impl Affine {
    pub fn at(&self, eps: f64) -> f64 {
        self.constant + self.slope * eps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPrediction {
    pub p: u32,
    /// Upper bound for the top of band `p`.
    pub lower_edge_bound: Affine,
    /// Lower bound for the bottom of band `p + 1`.
    pub upper_edge_bound: Affine,
    pub width_slope: f64,
    /// The affine bounds evaluated at the requested `eps`.
    pub lower_edge: f64,
    pub upper_edge: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedGap {
    pub p: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPredictions {
    pub epsilon: f64,
    pub gaps: Vec<GapPrediction>,
    pub omitted: Vec<OmittedGap>,
}

/// Gap `p = 1` opens from the square node when `H < 1`, gap `p = 2` from
/// the circ node when `H < 1/2`. Edges are first order in `eps`.
pub fn predicted_gaps(cc: &CellConstants, epsilon: f64) -> Result<GapPredictions, Error> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput(alloc::format!("epsilon = {epsilon} is outside (0, 1]")));
    }
    let mut gaps = Vec::new();
    let mut omitted = Vec::new();
    for (p, node) in [(1, NodeId::Square), (2, NodeId::Circ)] {
        if !(cc.height < node.height_limit()) {
            let limit = if node == NodeId::Circ { "1/2" } else { "1" };
            omitted.push(OmittedGap { p, reason: alloc::format!("H >= {limit}") });
            continue;
        }
        let at_zero = correction_node(cc, node, 0.0);
        let lower = Affine { constant: node.value(), slope: at_zero.lambda_prime_minus };
        let upper = Affine { constant: node.value(), slope: at_zero.lambda_prime_plus };
        let width_slope = upper.slope - lower.slope;
        gaps.push(GapPrediction {
            p,
            lower_edge_bound: lower,
            upper_edge_bound: upper,
            width_slope,
            lower_edge: lower.at(epsilon),
            upper_edge: upper.at(epsilon),
            width: width_slope * epsilon,
        });
    }
    Ok(GapPredictions { epsilon, gaps, omitted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::fabs;
    use proptest::prelude::*;

    fn cc(m1: f64, area: f64, h: f64) -> CellConstants {
        CellConstants::from_values(m1, 0.0, 0.015, area, h)
    }

    fn close(a: f64, b: f64) -> bool {
        fabs(a - b) <= 1e-12 * (1.0 + fabs(a) + fabs(b))
    }

    #[test]
    fn simple_corrections() {
        let c = cc(0.0578, 0.0201, 0.4);
        assert_eq!(correction_simple(&c, 0, 0, 0.0), 0.0);
        let eta = 0.7;
        let q = eta - 2.0 * PI;
        assert!(close(correction_simple(&c, -1, 0, eta), -2.0 * q * q * (c.m1 - c.area_term())));
        assert!(close(correction_simple(&c, 0, 1, 0.0), -PI * PI * c.m_xi / (0.4 * 0.4 * 0.4)));
    }

    #[test]
    fn node_corrections_at_zero_psi() {
        let c = cc(0.0578, 0.0201, 0.4);
        let circ = correction_node(&c, NodeId::Circ, 0.0);
        assert!(close(circ.lambda_prime_plus, 8.0 * PI * PI * c.area_omega / c.height));
        assert!(close(circ.lambda_prime_minus, -16.0 * PI * PI * c.m1));
        let sq = correction_node(&c, NodeId::Square, 0.0);
        assert!(close(sq.lambda_prime_plus, 2.0 * PI * PI * c.area_omega / c.height));
        assert!(close(sq.lambda_prime_minus, -4.0 * PI * PI * c.m1));
        assert!(circ.warning.is_none() && sq.warning.is_none());
        assert!(correction_node(&cc(0.1, 0.1, 0.6), NodeId::Circ, 0.0).warning.is_some());
    }

    #[test]
    fn gap_predictions() {
        let a = 0.0125;
        let c = cc(a, 2.0 * 0.4 * a, 0.4);
        let g = predicted_gaps(&c, 0.1).unwrap();
        assert!(close(g.gaps[0].width_slope, 8.0 * PI * PI * a));
        assert!(close(g.gaps[1].width_slope, 4.0 * g.gaps[0].width_slope));
        let c = cc(0.05, 2.0 * 0.4 * 0.0125, 0.4);
        let g = predicted_gaps(&c, 0.1).unwrap();
        assert!(fabs(g.gaps[0].width - 0.1 * 4.0 * PI * PI * 0.0625) < 1e-12);
        assert!(fabs(g.gaps[0].width_slope - 2.4674) < 1e-4);
        let g = predicted_gaps(&c, 1e-12).unwrap();
        assert!(fabs(g.gaps[0].lower_edge - PI * PI) < 1e-9 && fabs(g.gaps[1].upper_edge - 4.0 * PI * PI) < 1e-9);
        let g = predicted_gaps(&cc(0.05, 0.01, 0.7), 0.1).unwrap();
        assert_eq!(g.gaps.len(), 1);
        assert_eq!(g.omitted[0].reason, "H >= 1/2");
        assert!(predicted_gaps(&c, 0.0).is_err() && predicted_gaps(&c, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn node_invariants(
            m1_excess in 0.0f64..0.2, area in 1e-4f64..0.2, h in 0.1f64..0.95,
            psi in 0.0f64..20.0, circ in any::<bool>(),
        ) {
            let s = area / (2.0 * h);
            let c = cc(s + m1_excess, area, h);
            let node = if circ { NodeId::Circ } else { NodeId::Square };
            let n = if circ { 2.0 } else { 1.0 };
            let x = correction_node(&c, node, psi);
            let y = correction_node(&c, node, -psi);
            prop_assert!(x.lambda_prime_plus > x.lambda_prime_minus);
            prop_assert!(x.lambda_prime_minus <= -4.0 * n * n * PI * PI * c.m1 * (1.0 - 1e-12));
            prop_assert!(x.lambda_prime_plus >= 2.0 * n * n * PI * PI * area / h * (1.0 - 1e-12));
            prop_assert!(close(x.lambda_prime_plus, y.lambda_prime_plus));
            prop_assert!(close(x.lambda_prime_minus, y.lambda_prime_minus));
            let gap = x.lambda_prime_plus - x.lambda_prime_minus;
            let expected = 4.0 * n * PI * sqrt(n * n * PI * PI * (c.m1 + s) * (c.m1 + s) + psi * psi);
            prop_assert!(close(gap, expected));
            // Strict monotonicity in |psi|.
            let z = correction_node(&c, node, psi + 0.5);
            prop_assert!(z.lambda_prime_plus > x.lambda_prime_plus);
            prop_assert!(z.lambda_prime_minus < x.lambda_prime_minus);
            // Eigenvectors: components swap under psi -> -psi (up to sign).
            for (v, w) in [(x.eigvec_minus, y.eigvec_minus), (x.eigvec_plus, y.eigvec_plus)] {
                prop_assert!(fabs(fabs(v[0] * w[1] + v[1] * w[0]) - 1.0) < 1e-9);
            }
            let m = node_matrix(&c, node, psi);
            for (v, l) in [(x.eigvec_minus, x.lambda_prime_minus), (x.eigvec_plus, x.lambda_prime_plus)] {
                let r0 = m[0][0] * v[0] + m[0][1] * v[1] - l * v[0];
                let r1 = m[1][0] * v[0] + m[1][1] * v[1] - l * v[1];
                prop_assert!(fabs(r0) + fabs(r1) < 1e-9 * (1.0 + fabs(l)));
                prop_assert!(fabs(v[0] * v[0] + v[1] * v[1] - 1.0) < 1e-12);
            }
        }

        #[test]
        fn simple_correction_is_nonpositive(
            m1_excess in 0.0f64..0.2, area in 1e-4f64..0.2, h in 0.1f64..2.0,
            j in -3i32..3, k in 0u32..4, eta in -PI..PI,
        ) {
            let mut c = cc(area / (2.0 * h) + m1_excess, area, h);
            c.m_xi = area;
            prop_assert!(correction_simple(&c, j, k, eta) <= 0.0);
        }
    }
}
