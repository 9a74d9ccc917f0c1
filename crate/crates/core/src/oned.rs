//! The three-parameter family of one-dimensional discontinuous maps that
//! approximates first returns near a subsumed homoclinic connection, together
//! with its analytic apparatus: branch indexing, the absorbing interval,
//! branch counts, fixed points and their stability triangles, scale
//! invariance, and the invertibility quantity of the two-branch regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters (eta, nu, sigma) of the reduced map, with optional provenance
/// from the 2D reduction that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub eta: f64,
    pub nu: f64,
    /// Unstable multiplier of the saddle, > 1 strictly.
    pub sigma: f64,
    /// Number of right-half-plane steps per return, when known.
    pub m: Option<u32>,
    /// Stable multiplier of the saddle, when known.
    pub lambda: Option<f64>,
}

impl ReducedParams {
    pub fn new(eta: f64, nu: f64, sigma: f64) -> Self {
        assert!(sigma > 1.0, "sigma must exceed 1");
        Self { eta, nu, sigma, m: None, lambda: None }
    }

    pub fn with_provenance(eta: f64, nu: f64, sigma: f64, m: u32, lambda: f64) -> Self {
        assert!(sigma > 1.0, "sigma must exceed 1");
        Self { eta, nu, sigma, m: Some(m), lambda: Some(lambda) }
    }

    /// max(|eta|, |nu|), the distance scale from the codimension-two point.
    pub fn epsilon(&self) -> f64 {
        self.eta.abs().max(self.nu.abs())
    }

    /// Slope of branch k.
    pub fn slope(&self, k: i64) -> f64 {
        (self.eta - self.nu) / (self.sigma - 1.0) * power(self.sigma, k)
    }

    /// Intercept shared by every branch.
    pub fn intercept(&self) -> f64 {
        (-self.eta + self.sigma * self.nu) / (self.sigma - 1.0)
    }

    /// Parameters (eta/sigma, nu/sigma, sigma). Dynamics are unchanged except
    /// that orbits are scaled by 1/sigma and branch indices shift by one.
    pub fn rescaled(&self) -> Self {
        Self { eta: self.eta / self.sigma, nu: self.nu / self.sigma, ..*self }
    }
}

/// Integer power by repeated multiplication or division. This is the
/// authoritative way branch boundaries sigma^(-k) are produced, so interval
/// tests in different routines agree bit for bit.
pub fn power(base: f64, exp: i64) -> f64 {
    let mut v = 1.0;
    if exp >= 0 {
        for _ in 0..exp {
            v *= base;
        }
    } else {
        for _ in 0..-exp {
            v /= base;
        }
    }
    v
}

/// Relative snapping tolerance for branch boundaries.
const BOUNDARY_SNAP: f64 = 1e-12;

#[inline]
fn near_boundary(z: f64, w: f64) -> bool {
    (z - w).abs() <= BOUNDARY_SNAP * w.abs()
}

/// Index k of the interval I_k = [sigma^-k, sigma^-(k-1)) containing z.
///
/// A candidate comes from the logarithm formula ceil(-ln z / ln sigma) and is
/// then corrected by direct comparison against boundary powers; the
/// comparison, not the logarithm, decides. A z within 1e-12 relative of a
/// boundary sigma^-j is taken to be that boundary, which belongs to I_j.
pub fn branch_index(z: f64, sigma: f64) -> Result<i64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("branch index requires z > 0, got {z}")));
    }
    debug_assert!(sigma > 1.0);
    let mut k = (-z.ln() / sigma.ln()).ceil() as i64;
    loop {
        let lo = power(sigma, -k);
        let hi = power(sigma, -(k - 1));
        if near_boundary(z, lo) {
            return Ok(k);
        }
        if near_boundary(z, hi) {
            return Ok(k - 1);
        }
        if z < lo {
            k += 1;
        } else if z >= hi {
            k -= 1;
        } else {
            return Ok(k);
        }
    }
}

/// Index of the interval containing points immediately below z: equals
/// `branch_index(z)` unless z sits on a boundary, in which case it is one
/// deeper.
pub fn branch_index_left_limit(z: f64, sigma: f64) -> Result<i64> {
    let k = branch_index(z, sigma)?;
    if near_boundary(z, power(sigma, -k)) {
        Ok(k + 1)
    } else {
        Ok(k)
    }
}

/// Evaluate the reduced map at z > 0.
pub fn eval_h(rp: &ReducedParams, z: f64) -> Result<f64> {
    let k = branch_index(z, rp.sigma)?;
    Ok(rp.slope(k) * z + rp.intercept())
}

/// An interval with independently open or closed endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, z: f64) -> bool {
        (if self.lo_closed { z >= self.lo } else { z > self.lo })
            && (if self.hi_closed { z <= self.hi } else { z < self.hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }
}

/// The common range of all branches: (eta, nu] for eta < nu, the single
/// point for eta = nu, and [nu, eta) for eta > nu. Every invariant set lies
/// inside it.
pub fn absorbing_interval(rp: &ReducedParams) -> Interval {
    if rp.eta < rp.nu {
        Interval { lo: rp.eta, hi: rp.nu, lo_closed: false, hi_closed: true }
    } else if rp.eta == rp.nu {
        Interval { lo: rp.eta, hi: rp.eta, lo_closed: true, hi_closed: true }
    } else {
        Interval { lo: rp.nu, hi: rp.eta, lo_closed: true, hi_closed: false }
    }
}

/// Number of branch intervals I_k meeting the absorbing interval.
pub fn branch_count(rp: &ReducedParams) -> Result<u32> {
    if !(rp.eta > 0.0) || !(rp.nu > 0.0) {
        return Err(Error::Domain(format!(
            "branch count requires eta, nu > 0, got ({}, {})",
            rp.eta, rp.nu
        )));
    }
    let s = rp.sigma;
    let n = if rp.eta == rp.nu {
        1
    } else if rp.eta < rp.nu {
        // J = (eta, nu]: deepest branch holds points just above eta.
        branch_index(rp.eta, s)? - branch_index(rp.nu, s)? + 1
    } else {
        // J = [nu, eta): shallowest branch holds points just below eta.
        branch_index(rp.nu, s)? - branch_index_left_limit(rp.eta, s)? + 1
    };
    debug_assert!(n >= 1);
    Ok(n as u32)
}

/// Fixed point of branch k and its status as a fixed point of the full map.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointInfo {
    pub z: f64,
    pub slope: f64,
    /// z lies in the interior of I_k, so it is a genuine fixed point.
    pub admissible: bool,
    /// Admissible with |slope| < 1.
    pub stable: bool,
}

/// Solve z = h_k(z). Fails when the branch slope is 1 (within 1e-14).
pub fn fixed_point(rp: &ReducedParams, k: i64) -> Result<FixedPointInfo> {
    let slope = rp.slope(k);
    if (slope - 1.0).abs() <= 1e-14 {
        return Err(Error::NoFixedPoint);
    }
    let z = (-rp.eta + rp.sigma * rp.nu)
        / (rp.sigma - 1.0 - (rp.eta - rp.nu) * power(rp.sigma, k));
    let lo = power(rp.sigma, -k);
    let hi = power(rp.sigma, -(k - 1));
    let admissible = z > lo && z < hi;
    let stable = admissible && slope.abs() < 1.0;
    Ok(FixedPointInfo { z, slope, admissible, stable })
}

/// Open triangle of (eta, nu) values for which branch k has an
/// asymptotically stable fixed point.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub sigma: f64,
    pub k: i64,
    /// sigma^-(k-1), the right edge.
    pub eta_max: f64,
    /// sigma^-k, the bottom edge.
    pub nu_min: f64,
}

impl Triangle {
    /// Vertices: bottom-right, top, left.
    pub fn vertices(&self) -> [(f64, f64); 3] {
        [
            (self.eta_max, self.nu_min),
            (self.eta_max, (2.0 * self.sigma - 1.0) * self.nu_min),
            ((2.0 - self.sigma) * self.nu_min, self.nu_min),
        ]
    }

    /// Strict membership: eta < sigma^-(k-1), sigma^-k < nu, and
    /// nu < eta + sigma^-(k-1) - sigma^-k.
    pub fn contains(&self, eta: f64, nu: f64) -> bool {
        eta < self.eta_max && nu > self.nu_min && nu < eta + self.eta_max - self.nu_min
    }
}

pub fn triangle_pk(sigma: f64, k: i64) -> Triangle {
    Triangle { sigma, k, eta_max: power(sigma, -(k - 1)), nu_min: power(sigma, -k) }
}

/// Two stability triangles meet exactly when their indices are adjacent.
pub fn triangles_intersect(_sigma: f64, k1: i64, k2: i64) -> bool {
    debug_assert_ne!(k1, k2);
    (k1 - k2).abs() == 1
}

/// (eta - nu)(eta - sigma nu)/(sigma - 1). For a two-branch map with
/// increasing branches, a negative value means the restriction to the
/// absorbing interval is one-to-one (a non-overlapping circle map) and a
/// positive value means it is overlapping.
pub fn delta_invertibility(rp: &ReducedParams) -> f64 {
    (rp.eta - rp.nu) * (rp.eta - rp.sigma * rp.nu) / (rp.sigma - 1.0)
}

/// Precomputed branch table for iterating the map in hot loops.
///
/// Boundaries and slopes come from the same `power` helper as
/// [`branch_index`] and [`eval_h`], so values agree with the scalar path
/// except within the boundary snapping width.
#[derive(Debug, Clone)]
pub struct HMap {
    rp: ReducedParams,
    intercept: f64,
    k_lo: i64,
    /// left_end[i] = sigma^-(k_lo + i), strictly decreasing.
    left_end: Vec<f64>,
    /// slopes[i] = slope of branch k_lo + i.
    slopes: Vec<f64>,
    /// Right endpoint of I_(k_lo), for range checks.
    top: f64,
}

impl HMap {
    pub fn new(rp: &ReducedParams) -> Result<Self> {
        let hi = rp.eta.max(rp.nu);
        if !(hi > 0.0) {
            return Err(Error::Domain(
                "reduced map has no positive dynamics: max(eta, nu) <= 0".into(),
            ));
        }
        let lo = rp.eta.min(rp.nu);
        let k_lo = branch_index(hi, rp.sigma)? - 2;
        let k_hi = if lo > 0.0 {
            branch_index(lo, rp.sigma)? + 2
        } else {
            k_lo + 64
        };
        let n = (k_hi - k_lo + 1).max(1) as usize;
        let left_end = (0..n).map(|i| power(rp.sigma, -(k_lo + i as i64))).collect();
        let slopes = (0..n).map(|i| rp.slope(k_lo + i as i64)).collect();
        let top = power(rp.sigma, -(k_lo - 1));
        Ok(Self { rp: *rp, intercept: rp.intercept(), k_lo, left_end, slopes, top })
    }

    pub fn params(&self) -> &ReducedParams {
        &self.rp
    }

    /// Branch index of z > 0.
    #[inline]
    pub fn branch(&self, z: f64) -> i64 {
        debug_assert!(z > 0.0);
        if z < self.top {
            for (i, lo) in self.left_end.iter().enumerate() {
                if z >= *lo {
                    return self.k_lo + i as i64;
                }
            }
        }
        // Outside the table; take the slow path.
        branch_index(z, self.rp.sigma).expect("z > 0")
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let k = self.branch(z);
        let i = (k - self.k_lo) as usize;
        let slope = if i < self.slopes.len() { self.slopes[i] } else { self.rp.slope(k) };
        slope * z + self.intercept
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn branch_index_basics() {
        assert_eq!(branch_index(1.0, 1.5).unwrap(), 0);
        assert_eq!(branch_index(1.0, 2.7).unwrap(), 0);
        assert_eq!(branch_index(power(1.5, -5), 1.5).unwrap(), 5);
        // -ln(0.0875)/ln(1.5) is about 6.008, and the direct interval test
        // confirms I_7.
        assert_eq!(branch_index(0.0875, 1.5).unwrap(), 7);
        assert!(power(1.5, -7) <= 0.0875 && 0.0875 < power(1.5, -6));
        assert!(branch_index(0.0, 1.5).is_err());
        assert!(branch_index(-1.0, 1.5).is_err());
    }

    #[test]
    fn branch_index_snaps_near_boundaries() {
        let sigma = 1.5;
        for j in [-3_i64, 0, 4, 11] {
            let w = power(sigma, -j);
            assert_eq!(branch_index(w, sigma).unwrap(), j);
            assert_eq!(branch_index(w * (1.0 + 1e-13), sigma).unwrap(), j);
            assert_eq!(branch_index(w * (1.0 - 1e-13), sigma).unwrap(), j);
            // Outside the snap width the half-open convention rules.
            assert_eq!(branch_index(w * (1.0 + 1e-9), sigma).unwrap(), j);
            assert_eq!(branch_index(w * (1.0 - 1e-9), sigma).unwrap(), j + 1);
        }
    }

    #[test]
    fn eval_h_hits_branch_endpoints() {
        let rp = ReducedParams::new(0.023125, 0.0875, 1.5);
        for k in [0_i64, 3, 7, 12] {
            let left = power(rp.sigma, -k);
            let v = eval_h(&rp, left).unwrap();
            assert!((v - rp.nu).abs() <= 1e-12 * rp.nu.abs());
            let right = power(rp.sigma, -(k - 1)) * (1.0 - 1e-9);
            let v = eval_h(&rp, right).unwrap();
            assert!((v - rp.eta).abs() <= 1e-7);
        }
    }

    #[test]
    fn eval_h_constant_when_endpoints_coincide() {
        let rp = ReducedParams::new(0.01, 0.01, 1.5);
        for z in [0.003, 0.01, 0.4, 2.0] {
            assert!((eval_h(&rp, z).unwrap() - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn absorbing_interval_cases() {
        let j = absorbing_interval(&ReducedParams::new(0.023125, 0.0875, 1.5));
        assert_eq!(j, Interval { lo: 0.023125, hi: 0.0875, lo_closed: false, hi_closed: true });
        let j = absorbing_interval(&ReducedParams::new(0.01, 0.01, 1.5));
        assert!(j.contains(0.01) && j.lo == j.hi);
        let j = absorbing_interval(&ReducedParams::new(0.0875, 0.023125, 1.5));
        assert_eq!(j, Interval { lo: 0.023125, hi: 0.0875, lo_closed: true, hi_closed: false });
    }

    /// Direct enumeration of the branch intervals meeting J, using the same
    /// boundary powers, endpoint conventions, and boundary snapping width.
    fn branch_count_brute(rp: &ReducedParams) -> u32 {
        use std::cmp::Ordering;
        // Comparison that treats values within the snap width as equal.
        let cmp = |z: f64, w: f64| -> Ordering {
            if near_boundary(z, w) {
                Ordering::Equal
            } else {
                z.partial_cmp(&w).unwrap()
            }
        };
        let j = absorbing_interval(rp);
        let mut count = 0;
        for k in -200..400_i64 {
            let lo = power(rp.sigma, -k);
            let hi = power(rp.sigma, -(k - 1));
            // I_k = [lo, hi) intersects J iff lo is below J's upper end and
            // hi is above J's lower end, with strictness from the open ends.
            let upper_ok = match cmp(lo, j.hi) {
                Ordering::Less => true,
                Ordering::Equal => j.hi_closed,
                Ordering::Greater => false,
            };
            let lower_ok = cmp(hi, j.lo) == Ordering::Greater;
            if upper_ok && lower_ok {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn branch_count_examples() {
        let rp = ReducedParams::new(0.023125, 0.0875, 1.5);
        assert_eq!(branch_count(&rp).unwrap(), 4);
        assert_eq!(branch_count_brute(&rp), 4);

        assert_eq!(branch_count(&ReducedParams::new(0.05, 0.05, 1.5)).unwrap(), 1);

        // Exact boundary with eta > nu exercises the floor-term case.
        let eta = power(1.5, -8);
        let rp = ReducedParams::new(eta, 0.9 * eta, 1.5);
        assert_eq!(branch_count(&rp).unwrap(), branch_count_brute(&rp));
        assert_eq!(branch_count(&rp).unwrap(), 1);

        assert!(branch_count(&ReducedParams::new(-0.1, 0.1, 1.5)).is_err());
    }

    #[test]
    fn branch_count_matches_brute_force_with_near_integer_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..10_000 {
            let sigma = rng.gen_range(1.05..3.0);
            let (eta, nu) = if trial % 4 == 0 {
                // Perturb a boundary so the log is within ~1e-9 of an
                // integer while staying outside the snap width.
                let j = rng.gen_range(-3..25_i64);
                let w = power(sigma, -j);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let bump = 1.0 + sign * rng.gen_range(1e-10..1e-9);
                (w * bump, rng.gen_range(1e-4..1.0_f64))
            } else {
                (rng.gen_range(1e-4..1.0_f64), rng.gen_range(1e-4..1.0_f64))
            };
            let rp = ReducedParams::new(eta, nu, sigma);
            assert_eq!(
                branch_count(&rp).unwrap(),
                branch_count_brute(&rp),
                "sigma={sigma} eta={eta:e} nu={nu:e}"
            );
        }
    }

    #[test]
    fn fixed_point_examples() {
        // Degenerate endpoints: every branch fixes the common value.
        let rp = ReducedParams::new(0.04, 0.04, 1.5);
        for k in [-2_i64, 0, 5, 9] {
            let fp = fixed_point(&rp, k).unwrap();
            assert!((fp.z - 0.04).abs() < 1e-15);
            assert_eq!(fp.slope, 0.0);
        }

        // Centroid of a stability triangle gives a stable fixed point.
        let tri = triangle_pk(1.5, 6);
        let vs = tri.vertices();
        let eta = (vs[0].0 + vs[1].0 + vs[2].0) / 3.0;
        let nu = (vs[0].1 + vs[1].1 + vs[2].1) / 3.0;
        let fp = fixed_point(&ReducedParams::new(eta, nu, 1.5), 6).unwrap();
        assert!(fp.admissible && fp.stable);

        // On the diagonal edge the multiplier is -1.
        let eta = 0.8 * power(1.5, -6);
        let nu = eta + power(1.5, -5) - power(1.5, -6);
        let fp = fixed_point(&ReducedParams::new(eta, nu, 1.5), 6).unwrap();
        assert!((fp.slope + 1.0).abs() < 1e-12);
        // Just beyond the edge the fixed point is unstable.
        let nu = eta + (power(1.5, -5) - power(1.5, -6)) * (1.0 + 1e-9);
        let fp = fixed_point(&ReducedParams::new(eta, nu, 1.5), 6).unwrap();
        assert!(!fp.stable);

        // Slope exactly 1 has no solution.
        let rp = ReducedParams::new(0.6, 0.1, 1.5);
        assert!(matches!(fixed_point(&rp, 0), Err(Error::NoFixedPoint)));
    }

    #[test]
    fn triangle_vertices_and_membership() {
        let tri = triangle_pk(1.5, 0);
        let vs = tri.vertices();
        assert_eq!(vs[0], (1.5, 1.0));
        assert_eq!(vs[1], (1.5, 2.0));
        assert_eq!(vs[2], (0.5, 1.0));

        // For sigma > 2 the left vertex protrudes past eta = 0.
        let tri = triangle_pk(2.5, 3);
        assert!(tri.vertices()[2].0 < 0.0);

        // The top corner of the next triangle lies inside this one.
        for sigma in [1.3, 1.5, 13.0 / 6.0, 2.5] {
            for k in [-1_i64, 0, 4] {
                let inner = triangle_pk(sigma, k + 1);
                let top = inner.vertices()[1];
                assert!(triangle_pk(sigma, k).contains(top.0, top.1));
            }
        }
    }

    #[test]
    fn adjacent_triangles_intersect_others_do_not() {
        assert!(triangles_intersect(1.5, 4, 5));
        assert!(triangles_intersect(1.5, 5, 4));
        assert!(!triangles_intersect(1.5, 4, 6));
        assert!(!triangles_intersect(2.5, -1, 3));
    }

    #[test]
    fn rescale_identity_and_consequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let rp = ReducedParams::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1.05..4.0),
            );
            let rs = rp.rescaled();
            let z = rng.gen_range(1e-6..10.0_f64);
            let lhs = eval_h(&rs, z / rp.sigma).unwrap();
            let rhs = eval_h(&rp, z).unwrap() / rp.sigma;
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()),
                "lhs={lhs} rhs={rhs}"
            );
        }

        // Fixed points shift one branch deeper and scale by 1/sigma.
        let rp = ReducedParams::new(0.04, 0.05, 1.5);
        let rs = rp.rescaled();
        for k in [5_i64, 8, 11] {
            let a = fixed_point(&rp, k).unwrap();
            let b = fixed_point(&rs, k + 1).unwrap();
            assert!((b.z - a.z / rp.sigma).abs() < 1e-15);
            assert!((b.slope - a.slope).abs() < 1e-12);
        }

        // Branch counts are invariant.
        for _ in 0..100 {
            let rp = ReducedParams::new(
                rng.gen_range(1e-3..0.5),
                rng.gen_range(1e-3..0.5),
                rng.gen_range(1.1..3.0),
            );
            assert_eq!(
                branch_count(&rp).unwrap(),
                branch_count(&rp.rescaled()).unwrap()
            );
        }
    }

    #[test]
    fn rescaled_orbits_are_scaled_orbits() {
        // Expanding branches amplify rounding (slopes reach ~7 here), so a
        // chaotic orbit pair only shadows for a short horizon; a converging
        // orbit tracks indefinitely.
        let rp = ReducedParams::new(0.0875, 0.023125, 1.5);
        let rs = rp.rescaled();
        let mut z = 0.05;
        let mut w = z / rp.sigma;
        for _ in 0..8 {
            z = eval_h(&rp, z).unwrap();
            w = eval_h(&rs, w).unwrap();
            assert!((w - z / rp.sigma).abs() <= 1e-8 * (1.0 + z.abs()));
        }

        let tri = triangle_pk(1.5, 4);
        let vs = tri.vertices();
        let rp = ReducedParams::new(
            (vs[0].0 + vs[1].0 + vs[2].0) / 3.0,
            (vs[0].1 + vs[1].1 + vs[2].1) / 3.0,
            1.5,
        );
        let rs = rp.rescaled();
        let mut z = 0.9 * rp.eta;
        let mut w = z / rp.sigma;
        for _ in 0..2000 {
            z = eval_h(&rp, z).unwrap();
            w = eval_h(&rs, w).unwrap();
            assert!((w - z / rp.sigma).abs() <= 1e-11 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn delta_invertibility_signs() {
        for ratio in [0.7, 0.75, 0.9, 0.99] {
            let eta = 0.05;
            let rp = ReducedParams::new(eta, ratio * eta, 1.5);
            assert!(delta_invertibility(&rp) < 0.0, "ratio {ratio}");
        }
        let rp = ReducedParams::new(1.5 * 0.02, 0.02, 1.5);
        assert!(delta_invertibility(&rp).abs() < 1e-18);
        let rp = ReducedParams::new(0.02, 0.02, 1.5);
        assert_eq!(delta_invertibility(&rp), 0.0);
        // Overlapping side.
        let rp = ReducedParams::new(0.05, 0.05 / 2.5, 1.5);
        assert!(delta_invertibility(&rp) > 0.0);
    }

    #[test]
    fn slopes_share_sign_across_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..500 {
            let eta = rng.gen_range(-0.5..0.5);
            let nu = rng.gen_range(-0.5..0.5);
            let rp = ReducedParams::new(eta, nu, rng.gen_range(1.05..3.0));
            for k in -5..15_i64 {
                let s = rp.slope(k);
                if eta > nu {
                    assert!(s > 0.0);
                } else if eta < nu {
                    assert!(s < 0.0);
                } else {
                    assert_eq!(s, 0.0);
                }
            }
        }
    }

    #[test]
    fn hmap_agrees_with_scalar_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let rp = ReducedParams::new(
                rng.gen_range(1e-3..0.3),
                rng.gen_range(1e-3..0.3),
                rng.gen_range(1.1..2.8),
            );
            let hm = HMap::new(&rp).unwrap();
            for _ in 0..2000 {
                let z = rng.gen_range(1e-4..1.0_f64);
                assert_eq!(hm.branch(z), branch_index(z, rp.sigma).unwrap());
                assert_eq!(hm.eval(z), eval_h(&rp, z).unwrap());
            }
        }
    }

    proptest! {
        /// Values stay inside the closed hull of the endpoints, and orbits
        /// enter the absorbing interval in one step and never leave.
        #[test]
        fn range_confinement(
            eta in 1e-4..0.9_f64,
            nu in 1e-4..0.9_f64,
            sigma in 1.05..3.0_f64,
            z0 in 1e-6..10.0_f64,
        ) {
            let rp = ReducedParams::new(eta, nu, sigma);
            let j = absorbing_interval(&rp);
            let pad = 1e-12 * rp.epsilon();
            let mut z = z0;
            for step in 0..200 {
                z = eval_h(&rp, z).unwrap();
                prop_assert!(z >= j.lo - pad && z <= j.hi + pad,
                    "step {step}: z={z} outside [{}, {}]", j.lo, j.hi);
            }
        }

        #[test]
        fn branch_index_respects_half_open_convention(
            z in 1e-8..1e3_f64,
            sigma in 1.05..4.0_f64,
        ) {
            let k = branch_index(z, sigma).unwrap();
            let lo = power(sigma, -k);
            let hi = power(sigma, -(k - 1));
            // Allow the snap width at the boundaries.
            prop_assert!(z >= lo * (1.0 - 1e-11) && z < hi * (1.0 + 1e-11));
        }
    }
}
