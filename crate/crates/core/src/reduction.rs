//! Computation of the reduced parameters (eta, nu, sigma) from a 2D
//! parameter point: the generic iteration-based definition, closed forms for
//! the fixed-point saddle examples, the period-three saddle frame, and a
//! Newton locator for codimension-two points where eta = nu = 0.

use crate::error::{Error, Result};
use crate::maps::{saddle_data, AffinePiece, NormalFormParams, ParamCoord, PlanarPoint, SaddleData};
use crate::oned::ReducedParams;

/// Which saddle the homoclinic connection is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionSpec {
    /// Fixed point of the left piece; m >= 2 right-half-plane steps per
    /// return.
    FixedPointSaddle { m: u32 },
    /// Saddle period-three solution (RLR-cycle).
    PeriodThreeSaddle,
}

/// Size of the reduced parameters and the error-order exponent.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonRecord {
    pub eta: f64,
    pub nu: f64,
    /// max(|eta|, |nu|).
    pub epsilon: f64,
    /// Solves lambda * sigma^c = 1; infinite when lambda = 0.
    pub c: f64,
}

fn epsilon_record(eta: f64, nu: f64, lambda: f64, sigma: f64) -> EpsilonRecord {
    let c = if lambda > 0.0 { -lambda.ln() / sigma.ln() } else { f64::INFINITY };
    EpsilonRecord { eta, nu, epsilon: eta.abs().max(nu.abs()), c }
}

/// Admissibility tolerance for half-plane checks on constructed points.
const HALF_PLANE_TOL: f64 = 1e-9;

/// Reduced parameters by direct iteration: eta and nu are b-coordinates of
/// the (m+1)-th and m-th right-piece images of the unstable axis point.
///
/// For the fixed-point saddle the intermediate iterates 1..m-1 must stay in
/// the open right half-plane; a violation is a `Validity` error.
pub fn reduced_params_generic(
    params: &NormalFormParams,
    spec: ReductionSpec,
) -> Result<(ReducedParams, EpsilonRecord)> {
    match spec {
        ReductionSpec::FixedPointSaddle { m } => {
            if m < 2 {
                return Err(Error::Precondition("fixed-point reduction needs m >= 2".into()));
            }
            let sd = saddle_data(params)?;
            let right = params.right_piece();
            let mut p = sd.u;
            let mut nu = f64::NAN;
            let mut eta = f64::NAN;
            for k in 1..=(m + 1) {
                p = right.apply(p);
                if k <= m - 1 && !(p.x > 0.0) {
                    return Err(Error::Validity(format!(
                        "iterate {k} of U left the right half-plane (x = {})",
                        p.x
                    )));
                }
                if k == m {
                    nu = sd.b_coord(p);
                } else if k == m + 1 {
                    eta = sd.b_coord(p);
                }
            }
            let rec = epsilon_record(eta, nu, sd.lambda, sd.sigma);
            Ok((ReducedParams::with_provenance(eta, nu, sd.sigma, m, sd.lambda), rec))
        }
        ReductionSpec::PeriodThreeSaddle => {
            let frame = period3_saddle_frame(params)?;
            let rec = epsilon_record(frame.eta, frame.nu, frame.lambda, frame.sigma);
            let mut rp = ReducedParams::new(frame.eta, frame.nu, frame.sigma);
            rp.lambda = Some(frame.lambda);
            Ok((rp, rec))
        }
    }
}

/// Closed form for eta and nu when m = 2, in terms of the saddle multipliers
/// and the right-piece parameters.
pub fn closed_form_m2(params: &NormalFormParams) -> Result<(f64, f64)> {
    let sd = saddle_data(params)?;
    let (l, s) = (sd.lambda, sd.sigma);
    let (tr, dr) = (params.tau_r, params.delta_r);
    let eta = (dr * (tr - l + 1.0)
        + ((tr + dr) * l - tr * (tr + dr + 1.0)) * s
        + (tr * tr + tr - dr + 1.0 - (1.0 + tr) * l) * s * s)
        / (s - l);
    let nu = (dr - (dr + tr) * s + (tr - l + 1.0) * s * s) / (s - l);
    Ok((eta, nu))
}

/// Closed form for eta and nu when m = 3 and delta_l = 0, where sigma = tau_l.
pub fn closed_form_m3_delta_l_zero(params: &NormalFormParams) -> Result<(f64, f64)> {
    if params.delta_l != 0.0 {
        return Err(Error::Domain(format!(
            "closed form requires delta_l = 0, got {}",
            params.delta_l
        )));
    }
    if !(params.tau_l > 1.0) {
        return Err(Error::Domain(format!("requires tau_l > 1, got {}", params.tau_l)));
    }
    let s = params.tau_l;
    let (tr, dr) = (params.tau_r, params.delta_r);
    let eta = dr * (tr * tr + tr - dr + 1.0) / s
        - tr * tr * tr
        - tr * tr * (dr + 1.0)
        + tr * (dr - 1.0)
        + dr * dr
        + (tr * tr * tr + tr * tr + tr - 2.0 * dr * tr - dr + 1.0) * s;
    let nu = dr * (tr + 1.0) / s - tr * (tr + dr + 1.0) + (tr * tr + tr - dr + 1.0) * s;
    Ok((eta, nu))
}

/// Saddle frame of the period-three (RLR) cycle.
#[derive(Debug, Clone, Copy)]
pub struct Period3Frame {
    /// Right-most cycle point: the fixed point of f_R after f_L after f_R.
    pub y: PlanarPoint,
    /// Stable-subspace intersection with the switching line.
    pub s: PlanarPoint,
    /// Unstable-subspace intersection with the switching line.
    pub u: PlanarPoint,
    /// Image of u under one full cycle (f_R, then f_L, then f_R).
    pub u_prime: PlanarPoint,
    /// Unstable multiplier of the cycle, > 1.
    pub sigma: f64,
    /// Stable multiplier of the cycle.
    pub lambda: f64,
    pub eta: f64,
    pub nu: f64,
    /// b-coordinate of the image of the point of the unstable subspace that
    /// maps onto the switching line; the attractor is destroyed where this
    /// vanishes.
    pub nu_prime: f64,
}

struct Affine2 {
    m: [[f64; 2]; 2],
    b: [f64; 2],
}

impl Affine2 {
    fn identity() -> Self {
        Affine2 { m: [[1.0, 0.0], [0.0, 1.0]], b: [0.0, 0.0] }
    }

    /// Composition applying `piece` after self.
    fn then(&self, piece: &AffinePiece) -> Self {
        let m = [
            [
                piece.m11 * self.m[0][0] + piece.m12 * self.m[1][0],
                piece.m11 * self.m[0][1] + piece.m12 * self.m[1][1],
            ],
            [
                piece.m21 * self.m[0][0] + piece.m22 * self.m[1][0],
                piece.m21 * self.m[0][1] + piece.m22 * self.m[1][1],
            ],
        ];
        let b = [
            piece.m11 * self.b[0] + piece.m12 * self.b[1] + piece.b1,
            piece.m21 * self.b[0] + piece.m22 * self.b[1] + piece.b2,
        ];
        Affine2 { m, b }
    }

    fn fixed_point(&self) -> Result<PlanarPoint> {
        // Solve (I - M) x = b.
        let a11 = 1.0 - self.m[0][0];
        let a12 = -self.m[0][1];
        let a21 = -self.m[1][0];
        let a22 = 1.0 - self.m[1][1];
        let det = a11 * a22 - a12 * a21;
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateCycle);
        }
        Ok(PlanarPoint::new(
            (self.b[0] * a22 - a12 * self.b[1]) / det,
            (a11 * self.b[1] - a21 * self.b[0]) / det,
        ))
    }
}

fn check_half_plane(p: PlanarPoint, left: bool, what: &str) -> Result<()> {
    let ok = if left { p.x <= HALF_PLANE_TOL } else { p.x >= -HALF_PLANE_TOL };
    if ok {
        Ok(())
    } else {
        Err(Error::Validity(format!(
            "{what} lies in the wrong half-plane (x = {})",
            p.x
        )))
    }
}

/// Build the period-three saddle frame: cycle point, multipliers, axis
/// intersections, fundamental-domain endpoints, and the reduced parameters.
pub fn period3_saddle_frame(params: &NormalFormParams) -> Result<Period3Frame> {
    let fl = params.left_piece();
    let fr = params.right_piece();

    // One cycle period starting with the right piece: f_R, f_L, f_R.
    let cycle = Affine2::identity().then(&fr).then(&fl).then(&fr);
    let y = cycle.fixed_point()?;

    // The cycle must follow the word R, L, R.
    let p1 = fr.apply(y);
    let p2 = fl.apply(p1);
    check_half_plane(y, false, "cycle point")?;
    check_half_plane(p1, true, "first cycle iterate")?;
    check_half_plane(p2, false, "second cycle iterate")?;

    // Multipliers of the composed Jacobian.
    let tr = cycle.m[0][0] + cycle.m[1][1];
    let det = cycle.m[0][0] * cycle.m[1][1] - cycle.m[0][1] * cycle.m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 {
        return Err(Error::Validity("period-three cycle has complex multipliers".into()));
    }
    let root = disc.sqrt();
    let big = 0.5 * (tr + if tr >= 0.0 { root } else { -root });
    let small = det / big;
    let (sigma, lambda) = if big.abs() >= small.abs() { (big, small) } else { (small, big) };
    if !(sigma > 1.0 && lambda.abs() < 1.0) {
        return Err(Error::Validity(format!(
            "period-three cycle is not a saddle (multipliers {sigma}, {lambda})"
        )));
    }

    // Eigenvector for eigenvalue t of [[m11, m12], [m21, m22]]: use the row
    // with the larger off-diagonal entry for stability.
    let eigvec = |t: f64| -> (f64, f64) {
        if cycle.m[0][1].abs() >= cycle.m[1][0].abs() {
            (cycle.m[0][1], t - cycle.m[0][0])
        } else {
            (t - cycle.m[1][1], cycle.m[1][0])
        }
    };
    let axis_point = |t: f64, what: &str| -> Result<PlanarPoint> {
        let (vx, vy) = eigvec(t);
        if vx.abs() < 1e-14 * (vy.abs() + 1.0) {
            return Err(Error::Validity(format!(
                "{what} subspace is parallel to the switching line"
            )));
        }
        let step = -y.x / vx;
        Ok(PlanarPoint::new(0.0, y.y + step * vy))
    };
    let s = axis_point(lambda, "stable")?;
    let u = axis_point(sigma, "unstable")?;

    let frame = SaddleData { y, lambda, sigma, s, u };

    // Fundamental domain endpoint: one full cycle applied to u. The middle
    // point passes within order epsilon of the switching line (it sits on it
    // exactly at the codimension-two point), so the composition is formal
    // and carries no half-plane conditions.
    let u_prime = fr.apply(fl.apply(fr.apply(u)));

    // eta and nu: both fundamental-domain endpoints mapped by f_L then f_R.
    let map_lr = |p: PlanarPoint, what: &str| -> Result<PlanarPoint> {
        check_half_plane(p, true, what)?;
        let q = fl.apply(p);
        check_half_plane(q, false, &format!("left image of {what}"))?;
        Ok(fr.apply(q))
    };
    let nu = frame.b_coord(map_lr(u, "fundamental domain start")?);
    let eta = frame.b_coord(map_lr(u_prime, "fundamental domain end")?);

    // The point of the unstable subspace whose right image lands on the
    // switching line, mapped once more by the left piece.
    let dx = u.x - y.x;
    let dy = u.y - y.y;
    let denom = params.tau_r * dx + dy;
    if denom.abs() < 1e-14 {
        return Err(Error::Validity("unstable subspace maps parallel to the switching line".into()));
    }
    let t = -(params.tau_r * y.x + y.y + 1.0) / denom;
    let v = PlanarPoint::new(y.x + t * dx, y.y + t * dy);
    let fv = fr.apply(v);
    let nu_prime = frame.b_coord(fl.apply(fv));

    Ok(Period3Frame { y, s, u, u_prime, sigma, lambda, eta, nu, nu_prime })
}

/// Options for the damped-Newton codimension-two search.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-12 }
    }
}

fn residual_at(
    base: &NormalFormParams,
    free: [ParamCoord; 2],
    x: [f64; 2],
    m: u32,
    target: [f64; 2],
) -> Result<[f64; 2]> {
    let params = base.with(free[0], x[0]).with(free[1], x[1]);
    let (rp, _) = reduced_params_generic(&params, ReductionSpec::FixedPointSaddle { m })?;
    Ok([rp.eta - target[0], rp.nu - target[1]])
}

/// Newton search for parameters where (eta, nu) equals `target` in the two
/// `free` coordinates, all others fixed at `base`. The Jacobian is formed by
/// central finite differences with step 1e-7 (1 + |coordinate|), and steps
/// are halved while the residual fails to decrease.
pub fn locate_reduced_target(
    base: &NormalFormParams,
    free: [ParamCoord; 2],
    m: u32,
    guess: [f64; 2],
    target: [f64; 2],
    opts: NewtonOptions,
) -> Result<NormalFormParams> {
    let mut x = guess;
    let mut r = residual_at(base, free, x, m, target)?;
    let norm = |r: &[f64; 2]| r[0].abs().max(r[1].abs());
    for _ in 0..opts.max_iters {
        if norm(&r) < opts.tol {
            return Ok(base.with(free[0], x[0]).with(free[1], x[1]));
        }
        // Central-difference Jacobian, column per free coordinate.
        let mut jac = [[0.0_f64; 2]; 2];
        for col in 0..2 {
            let h = 1e-7 * (1.0 + x[col].abs());
            let mut xp = x;
            xp[col] += h;
            let mut xm = x;
            xm[col] -= h;
            let rp = residual_at(base, free, xp, m, target)?;
            let rm = residual_at(base, free, xm, m, target)?;
            jac[0][col] = (rp[0] - rm[0]) / (2.0 * h);
            jac[1][col] = (rp[1] - rm[1]) / (2.0 * h);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::NoConvergence(opts.max_iters));
        }
        let dx = [
            (r[0] * jac[1][1] - jac[0][1] * r[1]) / det,
            (jac[0][0] * r[1] - r[0] * jac[1][0]) / det,
        ];
        // Damping: halve until the residual decreases.
        let mut step = 1.0;
        let mut advanced = false;
        for _ in 0..25 {
            let cand = [x[0] - step * dx[0], x[1] - step * dx[1]];
            match residual_at(base, free, cand, m, target) {
                Ok(rc) if norm(&rc) < norm(&r) => {
                    x = cand;
                    r = rc;
                    advanced = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !advanced {
            return Err(Error::NoConvergence(opts.max_iters));
        }
    }
    if norm(&r) < opts.tol {
        Ok(base.with(free[0], x[0]).with(free[1], x[1]))
    } else {
        Err(Error::NoConvergence(opts.max_iters))
    }
}

/// Locate a codimension-two point (eta, nu) = (0, 0) in two free coordinates.
pub fn locate_codim2(
    base: &NormalFormParams,
    free: [ParamCoord; 2],
    m: u32,
    guess: [f64; 2],
    opts: NewtonOptions,
) -> Result<NormalFormParams> {
    locate_reduced_target(base, free, m, guess, [0.0, 0.0], opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_m2_reference_values() {
        let cases = [
            ((-0.5, 1.5), (0.0, 0.0)),
            ((-0.45, 1.4), (0.023125, 0.0875)),
            ((-0.501, 1.485), (0.01236825, 0.00675)),
            ((-0.485, 1.455), (0.01738125, 0.03375)),
        ];
        for ((tau_r, delta_r), (eta_ref, nu_ref)) in cases {
            let xi = NormalFormParams::new(2.0, 0.75, tau_r, delta_r);
            let (eta, nu) = closed_form_m2(&xi).unwrap();
            assert!((eta - eta_ref).abs() < 1e-12, "eta {eta} vs {eta_ref}");
            assert!((nu - nu_ref).abs() < 1e-12, "nu {nu} vs {nu_ref}");
        }
    }

    #[test]
    fn generic_m2_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut checked = 0;
        while checked < 1000 {
            let xi = NormalFormParams::new(
                2.0,
                0.75,
                -0.5 + rng.gen_range(-0.15..0.15),
                1.5 + rng.gen_range(-0.3..0.3),
            );
            let Ok((rp, rec)) =
                reduced_params_generic(&xi, ReductionSpec::FixedPointSaddle { m: 2 })
            else {
                continue;
            };
            let (eta, nu) = closed_form_m2(&xi).unwrap();
            assert!((rp.eta - eta).abs() <= 1e-12 * (1.0 + eta.abs()));
            assert!((rp.nu - nu).abs() <= 1e-12 * (1.0 + nu.abs()));
            assert_eq!(rec.epsilon, rp.eta.abs().max(rp.nu.abs()));
            checked += 1;
        }
    }

    #[test]
    fn generic_reduction_reports_provenance_and_epsilon() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.45, 1.4);
        let (rp, rec) = reduced_params_generic(&xi, ReductionSpec::FixedPointSaddle { m: 2 }).unwrap();
        assert_eq!(rp.m, Some(2));
        assert!((rp.sigma - 1.5).abs() < 1e-14);
        assert!((rp.lambda.unwrap() - 0.5).abs() < 1e-14);
        // lambda * sigma^c = 1.
        let c = rec.c;
        assert!((0.5 * 1.5_f64.powf(c) - 1.0).abs() < 1e-12);

        let xi = NormalFormParams::new(1.3, 0.0, 0.7, 2.0);
        let (_, rec) = reduced_params_generic(&xi, ReductionSpec::FixedPointSaddle { m: 3 }).unwrap();
        assert!(rec.c.is_infinite());
    }

    #[test]
    fn closed_form_m3_reference_values() {
        let s5 = 5.0_f64.sqrt();
        let xi = NormalFormParams::new(1.0 + 1.0 / s5, 0.0, (s5 - 1.0) / 2.0, 2.0);
        let (eta, nu) = closed_form_m3_delta_l_zero(&xi).unwrap();
        assert!(eta.abs() < 1e-12, "eta {eta}");
        assert!(nu.abs() < 1e-12, "nu {nu}");

        let xi = NormalFormParams::new(1.3, 0.0, 0.7, 2.0);
        let (eta, nu) = closed_form_m3_delta_l_zero(&xi).unwrap();
        let (rp, _) = reduced_params_generic(&xi, ReductionSpec::FixedPointSaddle { m: 3 }).unwrap();
        assert!((rp.eta - eta).abs() <= 1e-12 * (1.0 + eta.abs()));
        assert!((rp.nu - nu).abs() <= 1e-12 * (1.0 + nu.abs()));

        assert!(closed_form_m3_delta_l_zero(&NormalFormParams::new(1.3, 0.1, 0.7, 2.0)).is_err());
    }

    #[test]
    fn generic_m3_agreement_over_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut checked = 0;
        while checked < 1000 {
            let xi = NormalFormParams::new(
                1.4472 + rng.gen_range(-0.12..0.12),
                0.0,
                0.618 + rng.gen_range(-0.12..0.12),
                2.0,
            );
            let Ok((rp, _)) = reduced_params_generic(&xi, ReductionSpec::FixedPointSaddle { m: 3 })
            else {
                continue;
            };
            let (eta, nu) = closed_form_m3_delta_l_zero(&xi).unwrap();
            assert!((rp.eta - eta).abs() <= 1e-11 * (1.0 + eta.abs()));
            assert!((rp.nu - nu).abs() <= 1e-11 * (1.0 + nu.abs()));
            checked += 1;
        }
    }

    #[test]
    fn m3_nu_changes_sign_across_the_codim2_tau_r() {
        let s5 = 5.0_f64.sqrt();
        let (tau_l, tau_r) = (1.0 + 1.0 / s5, (s5 - 1.0) / 2.0);
        let d = 1e-3;
        let above = closed_form_m3_delta_l_zero(&NormalFormParams::new(tau_l, 0.0, tau_r + d, 2.0))
            .unwrap()
            .1;
        let below = closed_form_m3_delta_l_zero(&NormalFormParams::new(tau_l, 0.0, tau_r - d, 2.0))
            .unwrap()
            .1;
        assert!(above * below < 0.0, "nu does not change sign: {above} vs {below}");
    }

    #[test]
    fn period_three_frame_at_codim2() {
        let xi = NormalFormParams::new(-23.0 / 33.0, 13.0 / 66.0, -2.5, 2.0);
        let f = period3_saddle_frame(&xi).unwrap();
        assert!((f.sigma - 13.0 / 6.0).abs() < 1e-12, "sigma {}", f.sigma);
        assert!((f.lambda - 4.0 / 11.0).abs() < 1e-12, "lambda {}", f.lambda);
        assert!(f.eta.abs() < 1e-9, "eta {}", f.eta);
        assert!(f.nu.abs() < 1e-9, "nu {}", f.nu);
    }

    #[test]
    fn period_three_frame_nearby() {
        let xi = NormalFormParams::new(-0.7, 0.15, -2.5, 2.0);
        let f = period3_saddle_frame(&xi).unwrap();
        assert!(f.sigma > 1.0);
        assert!(f.nu_prime.is_finite());
        assert!(f.u_prime.x.is_finite());
        let (rp, _) = reduced_params_generic(&xi, ReductionSpec::PeriodThreeSaddle).unwrap();
        assert_eq!(rp.eta, f.eta);
        assert_eq!(rp.nu, f.nu);
    }

    #[test]
    fn period_three_frame_rejects_non_saddle() {
        // At the first example's parameters the RLR composition is not the
        // right saddle structure.
        let xi = NormalFormParams::new(2.0, 0.75, -0.5, 1.5);
        assert!(period3_saddle_frame(&xi).is_err());
    }

    #[test]
    fn locate_codim2_m2_example() {
        let base = NormalFormParams::new(2.0, 0.75, f64::NAN, f64::NAN);
        let found = locate_codim2(
            &base,
            [ParamCoord::DeltaR, ParamCoord::TauR],
            2,
            [1.4, -0.45],
            NewtonOptions::default(),
        )
        .unwrap();
        assert!((found.delta_r - 1.5).abs() < 1e-9);
        assert!((found.tau_r + 0.5).abs() < 1e-9);
        let (rp, _) = reduced_params_generic(&found, ReductionSpec::FixedPointSaddle { m: 2 }).unwrap();
        assert!(rp.eta.abs() < 1e-9 && rp.nu.abs() < 1e-9);
    }

    #[test]
    fn locate_codim2_m3_example() {
        let base = NormalFormParams::new(f64::NAN, 0.0, f64::NAN, 2.0);
        let found = locate_codim2(
            &base,
            [ParamCoord::TauL, ParamCoord::TauR],
            3,
            [1.45, 0.6],
            NewtonOptions::default(),
        )
        .unwrap();
        let s5 = 5.0_f64.sqrt();
        assert!((found.tau_l - (1.0 + 1.0 / s5)).abs() < 1e-9);
        assert!((found.tau_r - (s5 - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn locate_codim2_fails_from_hopeless_guess() {
        let base = NormalFormParams::new(2.0, 0.75, f64::NAN, f64::NAN);
        let out = locate_codim2(
            &base,
            [ParamCoord::DeltaR, ParamCoord::TauR],
            2,
            [-5.0, 5.0],
            NewtonOptions { max_iters: 20, tol: 1e-12 },
        );
        assert!(out.is_err());
    }
}
