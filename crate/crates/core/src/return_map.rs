//! First return of orbits to the third quadrant, its (left-steps,
//! right-steps) decomposition, strip sampling, and the empirical check that
//! the one-dimensional map approximates the return dynamics at the rates the
//! reduction predicts.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{
    in_q3, saddle_data, AffinePiece, NormalFormParams, PlanarPoint, SaddleData,
    DEFAULT_ESCAPE_RADIUS,
};
use crate::oned::{eval_h, power, ReducedParams};
use crate::reduction::{reduced_params_generic, ReductionSpec};
use crate::rng::rng_for_index;

/// One completed return to the third quadrant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnRecord {
    pub start: PlanarPoint,
    pub end: PlanarPoint,
    /// Left-piece steps before the orbit leaves the left half-plane.
    pub ell: u32,
    /// Right-piece steps until the orbit lands back in the third quadrant.
    pub r: u32,
    /// b-coordinate of the start.
    pub z: f64,
    /// b-coordinate of the end.
    pub z_prime: f64,
}

/// Why a first return was not produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotReturned {
    /// The orbit escaped past the divergence radius.
    Diverged,
    /// The step budget ran out before a return.
    Budget,
}

/// Reusable first-return evaluator: caches the affine pieces and the saddle
/// frame used for b-coordinates.
#[derive(Debug, Clone)]
pub struct ReturnMap {
    left: AffinePiece,
    right: AffinePiece,
    saddle: SaddleData,
    escape_radius: f64,
}

impl ReturnMap {
    pub fn new(params: &NormalFormParams) -> Result<Self> {
        if !(params.delta_l >= 0.0 && params.delta_r > 0.0) {
            return Err(Error::Precondition(
                "first return needs delta_l >= 0 and delta_r > 0".into(),
            ));
        }
        Ok(Self {
            left: params.left_piece(),
            right: params.right_piece(),
            saddle: saddle_data(params)?,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
        })
    }

    pub fn saddle(&self) -> &SaddleData {
        &self.saddle
    }

    /// First return of a third-quadrant point, decomposed into `ell` left
    /// steps followed by `r` right steps.
    pub fn first_return(
        &self,
        p: PlanarPoint,
        max_steps: usize,
    ) -> std::result::Result<ReturnRecord, NotReturned> {
        debug_assert!(in_q3(p), "first_return needs a third-quadrant start");
        let mut q = p;
        let mut ell = 0u32;
        let mut steps = 0usize;
        // Left phase: apply the left piece while the point stays in the
        // closed left half-plane; the first iterate with x >= 0 ends it.
        loop {
            q = self.left.apply(q);
            ell += 1;
            steps += 1;
            if q.x >= 0.0 {
                break;
            }
            if !(q.max_norm() <= self.escape_radius) {
                return Err(NotReturned::Diverged);
            }
            if steps >= max_steps {
                return Err(NotReturned::Budget);
            }
        }
        // Right phase: iterate until the orbit lands in the third quadrant.
        let mut r = 0u32;
        loop {
            q = self.right.apply(q);
            r += 1;
            steps += 1;
            if in_q3(q) {
                let z = self.saddle.b_coord(p);
                let z_prime = self.saddle.b_coord(q);
                return Ok(ReturnRecord { start: p, end: q, ell, r, z, z_prime });
            }
            if !(q.max_norm() <= self.escape_radius) {
                return Err(NotReturned::Diverged);
            }
            if steps >= max_steps {
                return Err(NotReturned::Budget);
            }
        }
    }
}

/// Convenience wrapper constructing the saddle frame per call.
pub fn first_return(
    params: &NormalFormParams,
    p: PlanarPoint,
    max_steps: usize,
) -> Result<std::result::Result<ReturnRecord, NotReturned>> {
    Ok(ReturnMap::new(params)?.first_return(p, max_steps))
}

/// Monte-Carlo summary of the strip 0 < b < 2 epsilon and its subset where
/// one application of the reduced map describes the return.
#[derive(Debug, Clone, Copy)]
pub struct Psi0Stats {
    pub epsilon: f64,
    /// Fraction of strip samples that fall outside the well-approximated
    /// subset.
    pub fraction_outside: f64,
    /// Largest |z' - h(z)| over samples inside it.
    pub sup_error: f64,
    /// Error-order exponent from lambda sigma^c = 1.
    pub c: f64,
}

/// Default step budget for a single first return.
pub const DEFAULT_MAX_RETURN_STEPS: usize = 1_000_000;

/// Sample the strip uniformly by area and classify each point by its return.
///
/// Sampling is rejection from a bounding box in (a, b)-coordinates against
/// third-quadrant membership; the per-sample generator is derived from
/// (seed, sample index) so worker count does not affect the result.
pub fn sample_psi(
    params: &NormalFormParams,
    rp: &ReducedParams,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Psi0Stats> {
    let epsilon = rp.epsilon();
    if !(epsilon > 0.0) {
        return Err(Error::Domain("strip sampling needs epsilon > 0".into()));
    }
    let m = rp
        .m
        .ok_or_else(|| Error::Precondition("reduced parameters carry no m".into()))?;
    let lambda = rp.lambda.unwrap_or(f64::NAN);
    let c = if lambda > 0.0 { -lambda.ln() / rp.sigma.ln() } else { f64::INFINITY };
    let map = ReturnMap::new(params)?;
    let sd = *map.saddle();
    let b_max = 2.0 * epsilon;

    // a-range of the strip: a <= 1 - b from x <= 0, a > a_floor(b) from
    // y < 0; a_floor is affine in b so the box spans its extremes.
    let a_floor = |b: f64| -> f64 {
        (sd.y.y + b * (sd.u.y - sd.y.y)) / (sd.y.y - sd.s.y)
    };
    let a_lo = a_floor(0.0).min(a_floor(b_max));
    let a_hi = 1.0;

    let results: Vec<(bool, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for_index(rng_seed, i as u64);
            // Rejection sampling of one strip point.
            let p = loop {
                let a = rng.gen_range(a_lo..a_hi);
                let b = rng.gen::<f64>() * b_max;
                if b <= 0.0 {
                    continue;
                }
                let p = sd.point_from_ab(a, b);
                if in_q3(p) {
                    break p;
                }
            };
            let z = sd.b_coord(p);
            match map.first_return(p, DEFAULT_MAX_RETURN_STEPS) {
                Ok(rec) => {
                    let scaled = power(rp.sigma, rec.ell as i64) * z;
                    let inside = rec.r == m && (1.0..rp.sigma).contains(&scaled);
                    if inside {
                        let err = (rec.z_prime - eval_h(rp, z).expect("z > 0")).abs();
                        (true, err)
                    } else {
                        (false, 0.0)
                    }
                }
                Err(_) => (false, 0.0),
            }
        })
        .collect();

    let n_inside = results.iter().filter(|(inside, _)| *inside).count();
    let sup_error = results
        .iter()
        .filter(|(inside, _)| *inside)
        .map(|(_, e)| *e)
        .fold(0.0_f64, f64::max);
    Ok(Psi0Stats {
        epsilon,
        fraction_outside: 1.0 - n_inside as f64 / n_samples as f64,
        sup_error,
        c,
    })
}

/// Strip statistics along a parameter ray plus fitted scaling exponents.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    /// Per-ray-point statistics, in input order.
    pub points: Vec<Psi0Stats>,
    /// Least-squares slope of log sup-error against log epsilon; absent when
    /// the errors are at machine scale (the exact, lambda = 0 case).
    pub error_slope: Option<f64>,
    /// Least-squares slope of log fraction-outside against log epsilon.
    pub fraction_slope: f64,
    /// Exponent predicted by the multipliers at the innermost ray point.
    pub c_expected: f64,
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Sample the strip at each ray point and fit the decay exponents of the
/// approximation error and of the badly-approximated area fraction.
pub fn verify_theorem1_scaling(
    ray: &[NormalFormParams],
    m: u32,
    n_samples: usize,
    rng_seed: u64,
) -> Result<ScalingFit> {
    if ray.len() < 5 {
        return Err(Error::Precondition("scaling fit needs at least 5 ray points".into()));
    }
    let mut points = Vec::with_capacity(ray.len());
    let mut c_expected = f64::INFINITY;
    for (i, params) in ray.iter().enumerate() {
        let (rp, rec) = reduced_params_generic(params, ReductionSpec::FixedPointSaddle { m })?;
        c_expected = rec.c;
        points.push(sample_psi(params, &rp, n_samples, rng_seed.wrapping_add(i as u64))?);
    }
    let err_pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.sup_error > 1e-13)
        .map(|p| (p.epsilon.ln(), p.sup_error.ln()))
        .collect();
    let error_slope = if err_pts.len() >= 3 { Some(fit_slope(&err_pts)) } else { None };
    let frac_pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.fraction_outside > 0.0)
        .map(|p| (p.epsilon.ln(), p.fraction_outside.ln()))
        .collect();
    let fraction_slope = if frac_pts.len() >= 3 { fit_slope(&frac_pts) } else { f64::NAN };
    Ok(ScalingFit { points, error_slope, fraction_slope, c_expected })
}

/// Geometric ray of parameter points approaching `target` from direction
/// `dir`: target + dir * t0 * factor^i for i = 0..n.
pub fn geometric_ray(
    target: &NormalFormParams,
    dir: (crate::maps::ParamCoord, f64),
    dir2: (crate::maps::ParamCoord, f64),
    t0: f64,
    factor: f64,
    n: usize,
) -> Vec<NormalFormParams> {
    (0..n)
        .map(|i| {
            let t = t0 * factor.powi(i as i32);
            target
                .with(dir.0, target.get(dir.0) + dir.1 * t)
                .with(dir2.0, target.get(dir2.0) + dir2.1 * t)
        })
        .collect()
}
