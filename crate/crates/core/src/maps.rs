//! The two-dimensional border-collision normal form: affine pieces, saddle
//! eigenstructure, region predicates, and coordinates aligned with the
//! saddle's invariant directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter point (tau_l, delta_l, tau_r, delta_r) of the normal form.
///
/// The border-collision parameter is scaled to 1, so these four numbers
/// determine the map completely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFormParams {
    pub tau_l: f64,
    pub delta_l: f64,
    pub tau_r: f64,
    pub delta_r: f64,
}

/// Names the four coordinates of [`NormalFormParams`]; used by grid axes and
/// the codimension-two locator to select free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamCoord {
    TauL,
    DeltaL,
    TauR,
    DeltaR,
}

impl ParamCoord {
    pub fn name(&self) -> &'static str {
        match self {
            ParamCoord::TauL => "tauL",
            ParamCoord::DeltaL => "deltaL",
            ParamCoord::TauR => "tauR",
            ParamCoord::DeltaR => "deltaR",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tauL" | "tau_l" => Ok(ParamCoord::TauL),
            "deltaL" | "delta_l" => Ok(ParamCoord::DeltaL),
            "tauR" | "tau_r" => Ok(ParamCoord::TauR),
            "deltaR" | "delta_r" => Ok(ParamCoord::DeltaR),
            other => Err(Error::Config(format!("unknown parameter `{other}`"))),
        }
    }
}

impl NormalFormParams {
    pub fn new(tau_l: f64, delta_l: f64, tau_r: f64, delta_r: f64) -> Self {
        Self { tau_l, delta_l, tau_r, delta_r }
    }

    /// True iff the parameter point lies in the set where the left piece has
    /// a genuine saddle fixed point: tau_l > delta_l + 1, 0 <= delta_l < 1,
    /// delta_r > 0.
    pub fn in_xi(&self) -> bool {
        self.tau_l > self.delta_l + 1.0
            && self.delta_l >= 0.0
            && self.delta_l < 1.0
            && self.delta_r > 0.0
    }

    pub fn left_piece(&self) -> AffinePiece {
        AffinePiece::new(self.tau_l, self.delta_l)
    }

    pub fn right_piece(&self) -> AffinePiece {
        AffinePiece::new(self.tau_r, self.delta_r)
    }

    pub fn get(&self, coord: ParamCoord) -> f64 {
        match coord {
            ParamCoord::TauL => self.tau_l,
            ParamCoord::DeltaL => self.delta_l,
            ParamCoord::TauR => self.tau_r,
            ParamCoord::DeltaR => self.delta_r,
        }
    }

    pub fn with(&self, coord: ParamCoord, value: f64) -> Self {
        let mut out = *self;
        match coord {
            ParamCoord::TauL => out.tau_l = value,
            ParamCoord::DeltaL => out.delta_l = value,
            ParamCoord::TauR => out.tau_r = value,
            ParamCoord::DeltaR => out.delta_r = value,
        }
        out
    }
}

/// A point of the plane, written P = (P1, P2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Max norm, used for divergence thresholds.
    pub fn max_norm(&self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn dist_max(&self, other: PlanarPoint) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn dist_euclid(&self, other: PlanarPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One affine piece x |-> M x + b of the normal form.
///
/// Both pieces share the translation (1, 0) and the companion-matrix shape
/// [[tau, 1], [-delta, 0]], so the determinant equals delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePiece {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
    pub b1: f64,
    pub b2: f64,
}

impl AffinePiece {
    fn new(tau: f64, delta: f64) -> Self {
        Self { m11: tau, m12: 1.0, m21: -delta, m22: 0.0, b1: 1.0, b2: 0.0 }
    }

    #[inline]
    pub fn apply(&self, p: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(
            self.m11 * p.x + self.m12 * p.y + self.b1,
            self.m21 * p.x + self.m22 * p.y + self.b2,
        )
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }
}

/// Evaluate the normal form. On the switching line both pieces agree; by
/// convention the left piece is the one evaluated there.
#[inline]
pub fn apply(params: &NormalFormParams, p: PlanarPoint) -> PlanarPoint {
    if p.x <= 0.0 {
        PlanarPoint::new(params.tau_l * p.x + p.y + 1.0, -params.delta_l * p.x)
    } else {
        PlanarPoint::new(params.tau_r * p.x + p.y + 1.0, -params.delta_r * p.x)
    }
}

/// Half-plane membership by the sign of the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    OmegaL,
    OmegaR,
    Sigma,
}

pub fn region(p: PlanarPoint) -> Region {
    if p.x < 0.0 {
        Region::OmegaL
    } else if p.x > 0.0 {
        Region::OmegaR
    } else {
        Region::Sigma
    }
}

/// Third quadrant: x <= 0 and y < 0 (strict).
#[inline]
pub fn in_q3(p: PlanarPoint) -> bool {
    p.x <= 0.0 && p.y < 0.0
}

/// Saddle fixed point of the left piece together with its multipliers and
/// the intersections of its invariant subspaces with the switching line.
///
/// Invariants: lambda + sigma = tau_l, lambda * sigma = delta_l, the saddle
/// satisfies f_L(y) = y, and s, u lie on x = 0.
#[derive(Debug, Clone, Copy)]
pub struct SaddleData {
    /// The fixed point.
    pub y: PlanarPoint,
    /// Stable multiplier, in [0, 1).
    pub lambda: f64,
    /// Unstable multiplier, > 1.
    pub sigma: f64,
    /// Intersection of the stable subspace with the switching line.
    pub s: PlanarPoint,
    /// Intersection of the unstable subspace with the switching line.
    pub u: PlanarPoint,
}

impl SaddleData {
    /// Coordinates (a, b) of `p` in the frame P = Y + a(S-Y) + b(U-Y).
    ///
    /// The switching line is a + b = 1 in these coordinates, with a(S) = 1
    /// and b(U) = 1.
    pub fn ab_coords(&self, p: PlanarPoint) -> (f64, f64) {
        let e1x = self.s.x - self.y.x;
        let e1y = self.s.y - self.y.y;
        let e2x = self.u.x - self.y.x;
        let e2y = self.u.y - self.y.y;
        let det = e1x * e2y - e2x * e1y;
        let dx = p.x - self.y.x;
        let dy = p.y - self.y.y;
        ((dx * e2y - e2x * dy) / det, (e1x * dy - dx * e1y) / det)
    }

    /// b-coordinate alone (distance from the stable subspace in units of U).
    pub fn b_coord(&self, p: PlanarPoint) -> f64 {
        self.ab_coords(p).1
    }

    /// Inverse of [`ab_coords`](Self::ab_coords).
    pub fn point_from_ab(&self, a: f64, b: f64) -> PlanarPoint {
        PlanarPoint::new(
            self.y.x + a * (self.s.x - self.y.x) + b * (self.u.x - self.y.x),
            self.y.y + a * (self.s.y - self.y.y) + b * (self.u.y - self.y.y),
        )
    }
}

/// Compute the saddle data of the left piece.
///
/// The multipliers are the roots of t^2 - tau_l t + delta_l = 0, computed by
/// the stable form of the quadratic formula: the larger root from the
/// formula, the smaller as delta_l divided by it (lambda = 0 exactly when
/// delta_l = 0).
pub fn saddle_data(params: &NormalFormParams) -> Result<SaddleData> {
    if !params.in_xi() {
        return Err(Error::Domain(format!(
            "({}, {}, {}, {}) is not in the saddle parameter set",
            params.tau_l, params.delta_l, params.tau_r, params.delta_r
        )));
    }
    let tl = params.tau_l;
    let dl = params.delta_l;
    let disc = tl * tl - 4.0 * dl;
    // In the saddle set tl > dl + 1 >= 1 forces disc > 0.
    let sigma = 0.5 * (tl + disc.sqrt());
    let lambda = if dl == 0.0 { 0.0 } else { dl / sigma };
    let denom = tl - dl - 1.0;
    let y = PlanarPoint::new(-1.0 / denom, dl / denom);
    let s = PlanarPoint::new(0.0, -sigma / (sigma - 1.0));
    let u = PlanarPoint::new(0.0, lambda / (1.0 - lambda));
    Ok(SaddleData { y, lambda, sigma, s, u })
}

/// Forward orbit of the normal form.
#[derive(Debug, Clone)]
pub struct Orbit {
    /// p0 followed by its iterates; truncated at the first escaping point.
    pub points: Vec<PlanarPoint>,
    /// Index into `points` of the first iterate whose max norm exceeded the
    /// escape radius, if any.
    pub escaped: Option<usize>,
}

/// Iterate the map `n` times from `p0`, stopping early if the orbit leaves
/// the ball of radius `escape_radius` in max norm.
pub fn iterate_orbit(
    params: &NormalFormParams,
    p0: PlanarPoint,
    n: usize,
    escape_radius: f64,
) -> Orbit {
    debug_assert!(n >= 1 && escape_radius > 0.0);
    let mut points = Vec::with_capacity(n + 1);
    points.push(p0);
    let mut p = p0;
    for i in 1..=n {
        p = apply(params, p);
        points.push(p);
        if !(p.max_norm() <= escape_radius) {
            return Orbit { points, escaped: Some(i) };
        }
    }
    Orbit { points, escaped: None }
}

/// Default divergence threshold for orbit classification.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1e6;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    fn fig6_params() -> NormalFormParams {
        NormalFormParams::new(2.0, 0.75, -0.45, 1.4)
    }

    #[test]
    fn fixed_point_of_left_piece_is_fixed() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.5, 1.5);
        let p = apply(&xi, PlanarPoint::new(-4.0, 3.0));
        assert!((p.x + 4.0).abs() < 1e-14);
        assert!((p.y - 3.0).abs() < 1e-14);
    }

    #[test]
    fn switching_line_maps_to_its_image() {
        for (xi, y) in [
            (fig6_params(), -2.3),
            (NormalFormParams::new(1.3, 0.0, 0.7, 2.0), 0.4),
            (NormalFormParams::new(-0.7, 0.15, -2.5, 2.0), 5.0),
        ] {
            let p = apply(&xi, PlanarPoint::new(0.0, y));
            assert_eq!(p.x, y + 1.0);
            assert_eq!(p.y, 0.0);
        }
    }

    #[test]
    fn image_of_u_on_fig6_params() {
        let sd = saddle_data(&fig6_params()).unwrap();
        let p = apply(&fig6_params(), sd.u);
        assert!((p.x - 2.0).abs() < 1e-12);
        assert!(p.y.abs() < 1e-12);
    }

    #[test]
    fn saddle_multipliers_and_axis_points() {
        let sd = saddle_data(&fig6_params()).unwrap();
        assert!((sd.lambda - 0.5).abs() < 1e-14);
        assert!((sd.sigma - 1.5).abs() < 1e-14);
        assert!((sd.s.y + 3.0).abs() < 1e-12);
        assert!((sd.u.y - 1.0).abs() < 1e-12);
        assert_eq!(sd.s.x, 0.0);
        assert_eq!(sd.u.x, 0.0);

        let sd = saddle_data(&NormalFormParams::new(1.3, 0.0, 0.7, 2.0)).unwrap();
        assert_eq!(sd.lambda, 0.0);
        assert!((sd.sigma - 1.3).abs() < 1e-14);
    }

    #[test]
    fn saddle_rejects_points_outside_xi() {
        assert!(saddle_data(&NormalFormParams::new(1.5, 0.6, 0.5, 1.0)).is_err());
        assert!(saddle_data(&NormalFormParams::new(2.0, 0.75, 0.5, -1.0)).is_err());
        assert!(saddle_data(&NormalFormParams::new(2.0, 1.2, 0.5, 1.0)).is_err());
    }

    #[test]
    fn ab_coords_normalization() {
        let sd = saddle_data(&fig6_params()).unwrap();
        let (a, b) = sd.ab_coords(sd.y);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        let (a, b) = sd.ab_coords(sd.s);
        assert!((a - 1.0).abs() < 1e-12 && b.abs() < 1e-12);
        let (a, b) = sd.ab_coords(sd.u);
        assert!(a.abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        // The origin lies on the switching line, so a + b = 1.
        let (a, b) = sd.ab_coords(PlanarPoint::new(0.0, 0.0));
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    /// The paper's closed forms for a(P) and b(P) in terms of lambda, sigma;
    /// the frame solve must reproduce them.
    fn ab_closed_form(sd: &SaddleData, p: PlanarPoint) -> (f64, f64) {
        let (l, s) = (sd.lambda, sd.sigma);
        let a = (s - 1.0) / (s - l) * (l - (1.0 - l) * (l * p.x + p.y));
        let b = (1.0 - l) / (s - l) * (s + (s - 1.0) * (s * p.x + p.y));
        (a, b)
    }

    #[test]
    fn ab_coords_match_closed_form_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let xi = NormalFormParams::new(
                rng.gen_range(1.2..4.0_f64).max(rng.gen_range(0.0..1.0) + 1.0 + 1e-3),
                rng.gen_range(0.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.01..3.0),
            );
            if !xi.in_xi() {
                continue;
            }
            let sd = saddle_data(&xi).unwrap();
            let p = PlanarPoint::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let (a, b) = sd.ab_coords(p);
            let (ac, bc) = ab_closed_form(&sd, p);
            assert!((a - ac).abs() < 1e-9 * (1.0 + a.abs()), "a={a} closed={ac}");
            assert!((b - bc).abs() < 1e-9 * (1.0 + b.abs()), "b={b} closed={bc}");
            let q = sd.point_from_ab(a, b);
            assert!(q.dist_max(p) < 1e-10);
        }
    }

    #[test]
    fn region_and_q3_predicates() {
        assert_eq!(region(PlanarPoint::new(-1.0, -1.0)), Region::OmegaL);
        assert!(in_q3(PlanarPoint::new(-1.0, -1.0)));
        assert_eq!(region(PlanarPoint::new(0.0, -1.0)), Region::Sigma);
        assert!(in_q3(PlanarPoint::new(0.0, -1.0)));
        assert_eq!(region(PlanarPoint::new(-1.0, 0.0)), Region::OmegaL);
        assert!(!in_q3(PlanarPoint::new(-1.0, 0.0)));
        assert_eq!(region(PlanarPoint::new(0.5, -1.0)), Region::OmegaR);
    }

    #[test]
    fn orbit_constant_at_fixed_point() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.5, 1.5);
        let orbit = iterate_orbit(&xi, PlanarPoint::new(-4.0, 3.0), 50, 1e6);
        assert!(orbit.escaped.is_none());
        for p in &orbit.points {
            assert!(p.dist_max(PlanarPoint::new(-4.0, 3.0)) < 1e-9);
        }
    }

    #[test]
    fn orbit_contracts_along_stable_subspace() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.5, 1.5);
        let sd = saddle_data(&xi).unwrap();
        // Points on the stable line through Y towards S stay on it and
        // approach Y by a factor lambda per left step.
        let p0 = sd.point_from_ab(0.4, 0.0);
        assert!(in_q3(p0) || p0.x <= 0.0);
        let orbit = iterate_orbit(&xi, p0, 30, 1e6);
        assert!(orbit.escaped.is_none());
        let mut d_prev = orbit.points[0].dist_euclid(sd.y);
        for p in &orbit.points[1..] {
            let d = p.dist_euclid(sd.y);
            assert!((d - sd.lambda * d_prev).abs() < 1e-9 * (1.0 + d_prev));
            d_prev = d;
        }
    }

    #[test]
    fn orbit_diverges_with_negative_nu() {
        // At (2, 0.75, -0.6, 1.4) the reduced nu is negative: orbits near U
        // fall below the stable subspace and escape.
        let xi = NormalFormParams::new(2.0, 0.75, -0.6, 1.4);
        let sd = saddle_data(&xi).unwrap();
        let p0 = PlanarPoint::new(sd.u.x - 1e-3, sd.u.y - 1e-3);
        let orbit = iterate_orbit(&xi, p0, 100_000, 1e6);
        assert!(orbit.escaped.is_some());
    }

    #[test]
    fn pieces_agree_on_switching_line_and_have_expected_determinants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let xi = NormalFormParams::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-2.0..2.0),
            );
            let y = rng.gen_range(-5.0..5.0);
            let p = PlanarPoint::new(0.0, y);
            let pl = xi.left_piece().apply(p);
            let pr = xi.right_piece().apply(p);
            assert_eq!(pl, pr);
            assert_eq!(xi.left_piece().det(), xi.delta_l);
            assert_eq!(xi.right_piece().det(), xi.delta_r);
        }
    }

    #[test]
    fn eigen_reconstruction_over_random_saddle_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut n = 0;
        while n < 1000 {
            let dl = rng.gen_range(0.0..1.0);
            let tl = dl + 1.0 + rng.gen_range(1e-6..3.0_f64);
            let xi = NormalFormParams::new(tl, dl, 0.0, 1.0);
            let sd = saddle_data(&xi).unwrap();
            assert!((sd.lambda + sd.sigma - tl).abs() <= 1e-12 * tl.abs());
            assert!((sd.lambda * sd.sigma - dl).abs() <= 1e-12 * (1.0 + dl.abs()));
            assert!(sd.lambda >= 0.0 && sd.lambda < 1.0 && sd.sigma > 1.0);
            n += 1;
        }
    }

    #[test]
    fn left_iterates_scale_ab_coordinates_by_the_multipliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let dl = rng.gen_range(0.0..1.0);
            let tl = dl + 1.0 + rng.gen_range(0.05..2.0);
            let xi = NormalFormParams::new(tl, dl, 0.3, 1.0);
            let sd = saddle_data(&xi).unwrap();
            let p = PlanarPoint::new(rng.gen_range(-3.0..0.0), rng.gen_range(-3.0..3.0));
            let (a0, b0) = sd.ab_coords(p);
            let left = xi.left_piece();
            let mut q = p;
            for k in 1..=12 {
                q = left.apply(q);
                let (a, b) = sd.ab_coords(q);
                let lam_k = sd.lambda.powi(k);
                let sig_k = sd.sigma.powi(k);
                // Relative to the orbit scale: the point grows like sigma^k.
                let scale = 1.0 + q.max_norm() + (sig_k * b0).abs();
                assert!((a - lam_k * a0).abs() <= 1e-9 * scale);
                assert!((b - sig_k * b0).abs() <= 1e-9 * scale);
            }
        }
    }
}
