//! Attractor classification for both families: divergence and periodicity
//! detection, greatest-common-divisor band counting for the continuous 2D
//! map, box-counting band counting for the discontinuous 1D map, rotation
//! numbers in the invertible two-branch regime, and a detector for the
//! endpoint-preimage condition behind merging bifurcations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cycles::{detect_period_2d, word_of_points, Itinerary};
use crate::error::{Error, Result};
use crate::maps::{apply, NormalFormParams, PlanarPoint, DEFAULT_ESCAPE_RADIUS};
use crate::oned::{
    absorbing_interval, branch_count, branch_index, delta_invertibility, fixed_point, power,
    HMap, ReducedParams,
};

/// Long-term behaviour of an orbit, the cell value of every bifurcation-set
/// grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractorClass {
    Periodic { period: u32, itinerary: Option<Itinerary> },
    Chaotic { bands: u32 },
    Divergent,
    Undetermined,
}

impl AttractorClass {
    pub fn tag(&self) -> &'static str {
        match self {
            AttractorClass::Periodic { .. } => "periodic",
            AttractorClass::Chaotic { .. } => "chaotic",
            AttractorClass::Divergent => "divergent",
            AttractorClass::Undetermined => "undetermined",
        }
    }

    pub fn period(&self) -> Option<u32> {
        match self {
            AttractorClass::Periodic { period, .. } => Some(*period),
            _ => None,
        }
    }

    pub fn bands(&self) -> Option<u32> {
        match self {
            AttractorClass::Chaotic { bands } => Some(*bands),
            _ => None,
        }
    }
}

/// Settings for the greatest-common-divisor band counter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GcdConfig {
    /// Match radius around each reference point.
    pub epsilon: f64,
    /// Number of reference points taken from the orbit tail.
    pub n_refs: usize,
    /// Orbit length used by classification when it generates the orbit.
    pub orbit_len: usize,
    /// Points of the given orbit to skip as transient.
    pub burn_in: usize,
}

impl Default for GcdConfig {
    fn default() -> Self {
        Self { epsilon: 1e-4, n_refs: 2000, orbit_len: 200_000, burn_in: 10_000 }
    }
}

pub(crate) struct GcdDetail {
    pub bands: u32,
    pub n_diffs: usize,
}

pub(crate) fn eckstein_gcd_detail(orbit: &[PlanarPoint], cfg: &GcdConfig) -> GcdDetail {
    let start = cfg.burn_in.min(orbit.len());
    let n_refs = cfg.n_refs.min(orbit.len() - start);
    if n_refs == 0 {
        return GcdDetail { bands: 1, n_diffs: 0 };
    }
    // Hash references into epsilon-sized buckets; a query point only has to
    // look at its 3x3 bucket neighbourhood.
    let cell = |v: f64| -> i64 { (v / cfg.epsilon).floor() as i64 };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for idx in start..start + n_refs {
        let p = orbit[idx];
        buckets.entry((cell(p.x), cell(p.y))).or_default().push(idx);
    }
    let mut g: u64 = 0;
    let mut n_diffs = 0usize;
    for (k, p) in orbit.iter().enumerate().skip(start + 1) {
        let (cx, cy) = (cell(p.x), cell(p.y));
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(refs) = buckets.get(&(cx + dx, cy + dy)) else { continue };
                for &ij in refs {
                    if ij < k && p.dist_euclid(orbit[ij]) < cfg.epsilon {
                        g = gcd(g, (k - ij) as u64);
                        n_diffs += 1;
                    }
                }
            }
        }
    }
    GcdDetail { bands: if g == 0 { 1 } else { g as u32 }, n_diffs }
}

fn gcd(a: u64, b: u64) -> u64 {
    if a == 0 {
        b
    } else {
        gcd(b % a, a)
    }
}

/// Band count of a (presumed ergodic) attractor of the continuous map: the
/// greatest common divisor of index differences between orbit points and the
/// reference points they revisit. Returns 1 when no revisit is observed.
pub fn eckstein_gcd(orbit: &[PlanarPoint], cfg: &GcdConfig) -> u32 {
    eckstein_gcd_detail(orbit, cfg).bands
}

/// Budgets for 2D orbit classification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Budgets2d {
    pub burn_in: usize,
    pub max_period: usize,
    pub recurrence_tol: f64,
    pub escape_radius: f64,
    pub gcd: GcdConfig,
}

impl Default for Budgets2d {
    fn default() -> Self {
        Self {
            burn_in: 10_000,
            max_period: 200,
            recurrence_tol: 1e-9,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            gcd: GcdConfig::default(),
        }
    }
}

/// Classify the orbit of the 2D map from `p0`.
pub fn classify_2d(
    params: &NormalFormParams,
    p0: PlanarPoint,
    budgets: &Budgets2d,
) -> AttractorClass {
    let mut p = p0;
    for _ in 0..budgets.burn_in {
        p = apply(params, p);
        if !(p.max_norm() <= budgets.escape_radius) {
            return AttractorClass::Divergent;
        }
    }
    if let Some((q, pts)) = detect_period_2d(params, p, budgets.max_period, budgets.recurrence_tol)
    {
        let itinerary = word_of_points(&pts).canonical();
        return AttractorClass::Periodic { period: q as u32, itinerary: Some(itinerary) };
    }
    // Chaotic or long-transient: collect an orbit and count components.
    let len = budgets.gcd.burn_in + budgets.gcd.orbit_len;
    let mut orbit = Vec::with_capacity(len);
    orbit.push(p);
    for _ in 1..len {
        p = apply(params, p);
        if !(p.max_norm() <= budgets.escape_radius) {
            return AttractorClass::Divergent;
        }
        orbit.push(p);
    }
    let detail = eckstein_gcd_detail(&orbit, &budgets.gcd);
    if detail.n_diffs == 0 {
        // The orbit never revisited a reference: too sparse to call.
        AttractorClass::Undetermined
    } else {
        AttractorClass::Chaotic { bands: detail.bands }
    }
}

/// Count maximal runs of marked boxes over a fixed range.
fn runs_of_marked(marked: &[bool]) -> u32 {
    let mut runs = 0;
    let mut inside = false;
    for &m in marked {
        if m && !inside {
            runs += 1;
        }
        inside = m;
    }
    runs
}

/// Band count of the 1D attractor: partition the range of the map into
/// `n_boxes` equal boxes, mark those visited by the orbit tail, and count
/// connected clusters of marked boxes.
pub fn boxcount_bands_1d(
    rp: &ReducedParams,
    n_boxes: usize,
    orbit_len: usize,
    burn_in: usize,
) -> u32 {
    debug_assert!(rp.eta > 0.0 && rp.nu > 0.0);
    if rp.eta == rp.nu {
        return 1;
    }
    let j = absorbing_interval(rp);
    let (lo, width) = (j.lo, j.len() / n_boxes as f64);
    let Ok(hm) = HMap::new(rp) else { return 1 };
    let mut z = rp.eta.max(rp.nu);
    for _ in 0..burn_in {
        z = hm.eval(z);
        if !(z > 0.0) {
            return 1;
        }
    }
    let mut marked = vec![false; n_boxes];
    for _ in 0..orbit_len {
        z = hm.eval(z);
        if !(z > 0.0) {
            break;
        }
        let idx = ((z - lo) / width).floor();
        let idx = (idx.max(0.0) as usize).min(n_boxes - 1);
        marked[idx] = true;
    }
    runs_of_marked(&marked).max(1)
}

/// Budgets for 1D orbit classification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Budgets1d {
    pub burn_in: usize,
    pub max_period: usize,
    pub n_boxes: usize,
    pub boxcount_len: usize,
    pub rho_iters: usize,
}

impl Default for Budgets1d {
    fn default() -> Self {
        Self {
            burn_in: 10_000,
            max_period: 200,
            n_boxes: 1000,
            boxcount_len: 1_000_000,
            rho_iters: 100_000,
        }
    }
}

/// Classification plus the rotation number when one was computed.
#[derive(Debug, Clone)]
pub struct Classified1d {
    pub class: AttractorClass,
    pub rho: Option<f64>,
}

fn detect_period_1d(
    hm: &HMap,
    start: f64,
    max_period: usize,
    tol: f64,
) -> Option<(usize, Vec<f64>)> {
    let total = 2 * max_period;
    let mut vals = Vec::with_capacity(total + 1);
    vals.push(start);
    let mut z = start;
    for _ in 0..total {
        z = hm.eval(z);
        if !(z > 0.0) {
            return None;
        }
        vals.push(z);
    }
    'candidates: for q in 1..=max_period {
        if (vals[q] - vals[0]).abs() < tol {
            for i in 0..=(total - q) {
                if (vals[i + q] - vals[i]).abs() >= tol {
                    continue 'candidates;
                }
            }
            return Some((q, vals[..q].to_vec()));
        }
    }
    None
}

/// Classify the 1D map's attractor, reporting the rotation number where the
/// invertible-circle-map route was taken.
pub fn classify_1d_full(rp: &ReducedParams, budgets: &Budgets1d) -> Classified1d {
    if rp.eta == rp.nu {
        return Classified1d {
            class: AttractorClass::Periodic { period: 1, itinerary: None },
            rho: None,
        };
    }
    let hi = rp.eta.max(rp.nu);
    if !(hi > 0.0) {
        // The whole range is nonpositive: every orbit leaves the domain.
        return Classified1d { class: AttractorClass::Divergent, rho: None };
    }

    // Analytic pass: a stable admissible fixed point is the attractor
    // (inside a stability triangle those are the only attractors).
    let k_start = branch_index(hi, rp.sigma).expect("hi > 0") - 2;
    for k in k_start..k_start + 300 {
        let Ok(fp) = fixed_point(rp, k) else { continue };
        if fp.stable {
            return Classified1d {
                class: AttractorClass::Periodic { period: 1, itinerary: None },
                rho: None,
            };
        }
        if fp.slope.abs() >= 1.0 && k > k_start + 2 {
            // Slopes only grow with k; no stable fixed point remains.
            break;
        }
    }

    let Ok(hm) = HMap::new(rp) else {
        return Classified1d { class: AttractorClass::Undetermined, rho: None };
    };
    let tol = 1e-9 * rp.epsilon();
    let mut z = hi;
    for _ in 0..budgets.burn_in {
        z = hm.eval(z);
        if !(z > 0.0) {
            return Classified1d { class: AttractorClass::Divergent, rho: None };
        }
    }
    let mut start = z;
    for attempt in 0..2 {
        if let Some((q, vals)) = detect_period_1d(&hm, start, budgets.max_period, tol) {
            // Reject an accidental landing on an unstable orbit.
            let mult: f64 = vals.iter().map(|v| rp.slope(hm.branch(*v))).product();
            if mult.abs() <= 1.0 + 1e-9 {
                return Classified1d {
                    class: AttractorClass::Periodic { period: q as u32, itinerary: None },
                    rho: None,
                };
            }
            if attempt == 0 {
                start *= 1.0 + 1e-6;
                continue;
            }
        }
        break;
    }

    // Invertible two-branch regime: periodic or quasiperiodic, never chaotic.
    if rp.eta > 0.0 && rp.nu > 0.0 {
        let two_branch = matches!(branch_count(rp), Ok(2));
        if two_branch && rp.eta > rp.nu && delta_invertibility(rp) < 0.0 {
            return match rotation_number_with(rp, &hm, budgets) {
                Ok(rn) => {
                    let class = match rn.rational {
                        Some((_, q)) => {
                            AttractorClass::Periodic { period: q, itinerary: None }
                        }
                        None => AttractorClass::Undetermined,
                    };
                    Classified1d { class, rho: Some(rn.rho) }
                }
                Err(_) => Classified1d { class: AttractorClass::Undetermined, rho: None },
            };
        }
    }

    // Chaotic: count bands. With a nonpositive endpoint the absorbing
    // interval leaves the domain, so the box range comes from the orbit.
    let class = if rp.eta > 0.0 && rp.nu > 0.0 {
        AttractorClass::Chaotic {
            bands: boxcount_bands_1d(rp, budgets.n_boxes, budgets.boxcount_len, budgets.burn_in),
        }
    } else {
        let mut vals = Vec::with_capacity(budgets.boxcount_len);
        let mut w = z;
        let mut escaped = false;
        for _ in 0..budgets.boxcount_len {
            w = hm.eval(w);
            if !(w > 0.0) {
                escaped = true;
                break;
            }
            vals.push(w);
        }
        if escaped {
            AttractorClass::Divergent
        } else {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi_v = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let width = ((hi_v - lo) / budgets.n_boxes as f64).max(f64::MIN_POSITIVE);
            let mut marked = vec![false; budgets.n_boxes];
            for v in vals {
                let idx = ((v - lo) / width).floor();
                marked[(idx.max(0.0) as usize).min(budgets.n_boxes - 1)] = true;
            }
            AttractorClass::Chaotic { bands: runs_of_marked(&marked).max(1) }
        }
    };
    Classified1d { class, rho: None }
}

/// Classification alone.
pub fn classify_1d(rp: &ReducedParams, budgets: &Budgets1d) -> AttractorClass {
    classify_1d_full(rp, budgets).class
}

/// Rotation number of the invertible two-branch regime.
#[derive(Debug, Clone, Copy)]
pub struct RotationNumber {
    /// Asymptotic fraction of iterates in the shallower branch interval.
    pub rho: f64,
    /// (u, q) when the orbit is exactly periodic with period q and u points
    /// in that interval; absent for unresolved or irrational cases.
    pub rational: Option<(u32, u32)>,
}

/// Rotation number with default budgets.
pub fn rotation_number(rp: &ReducedParams) -> Result<RotationNumber> {
    let hm = HMap::new(rp)?;
    rotation_number_with(rp, &hm, &Budgets1d::default())
}

fn rotation_number_with(
    rp: &ReducedParams,
    hm: &HMap,
    budgets: &Budgets1d,
) -> Result<RotationNumber> {
    let n = branch_count(rp)?;
    if n != 2 {
        return Err(Error::Precondition(format!("rotation number needs 2 branches, got {n}")));
    }
    if !(rp.eta > rp.nu) {
        return Err(Error::Precondition("rotation number needs increasing branches".into()));
    }
    if delta_invertibility(rp) >= 0.0 {
        return Err(Error::Precondition("rotation number needs a non-overlapping map".into()));
    }
    // The discontinuity inside the absorbing interval separates I_(k+1) from
    // I_k; visits to the shallower I_k are counted.
    let k = branch_index(rp.nu, rp.sigma)? - 1;
    let boundary = power(rp.sigma, -k);
    debug_assert!(rp.nu < boundary && boundary <= rp.eta * (1.0 + 1e-9));

    let tol = 1e-9 * rp.epsilon();
    let mut z = rp.eta;
    for _ in 0..budgets.burn_in {
        z = hm.eval(z);
    }
    if let Some((q, vals)) = detect_period_1d(hm, z, budgets.max_period, tol) {
        let u = vals.iter().filter(|v| **v >= boundary).count();
        let g = gcd(u as u64, q as u64).max(1);
        let (u, q) = ((u as u64 / g) as u32, (q as u64 / g) as u32);
        return Ok(RotationNumber { rho: u as f64 / q as f64, rational: Some((u, q)) });
    }
    // Frequency estimate over two halves; disagreement marks the value
    // unresolved (irrational or too slow to settle).
    let half = budgets.rho_iters / 2;
    let mut counts = [0usize; 2];
    for h in 0..2 {
        for _ in 0..half {
            z = hm.eval(z);
            if z >= boundary {
                counts[h] += 1;
            }
        }
    }
    let r1 = counts[0] as f64 / half as f64;
    let r2 = counts[1] as f64 / half as f64;
    let rho = 0.5 * (r1 + r2);
    Ok(RotationNumber { rho, rational: None })
}

/// Which endpoint of the range is iterated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Eta,
    Nu,
}

/// A near-coincidence of an endpoint's forward orbit with an unstable fixed
/// point: the signature of a merging bifurcation.
#[derive(Debug, Clone, Copy)]
pub struct MergingHit {
    /// Preimage rank: iterations applied to the endpoint value.
    pub j: u32,
    pub endpoint: Endpoint,
    /// Branch of the fixed point that was hit.
    pub target_k: i64,
    /// Signed distance h^j(endpoint) - z_k* at the hit.
    pub residual: f64,
}

/// Unstable admissible fixed points over the branches meeting the absorbing
/// interval.
fn unstable_fixed_points(rp: &ReducedParams) -> Vec<(i64, f64)> {
    let hi = rp.eta.max(rp.nu);
    let lo = rp.eta.min(rp.nu);
    if !(hi > 0.0) || !(lo > 0.0) {
        return Vec::new();
    }
    let k_min = branch_index(hi, rp.sigma).unwrap() - 1;
    let k_max = branch_index(lo, rp.sigma).unwrap() + 1;
    let mut out = Vec::new();
    for k in k_min..=k_max {
        if let Ok(fp) = fixed_point(rp, k) {
            if fp.admissible && fp.slope.abs() > 1.0 {
                out.push((k, fp.z));
            }
        }
    }
    out
}

/// Signed residual h^j(endpoint) - z_k* for one endpoint, rank, and target
/// branch. Used to bracket merging bifurcations along parameter paths.
pub fn merging_residual(rp: &ReducedParams, endpoint: Endpoint, j: u32, k: i64) -> Result<f64> {
    let fp = fixed_point(rp, k)?;
    let hm = HMap::new(rp)?;
    let mut z = match endpoint {
        Endpoint::Eta => rp.eta,
        Endpoint::Nu => rp.nu,
    };
    for _ in 0..j {
        if !(z > 0.0) {
            return Err(Error::Domain("endpoint orbit left the domain".into()));
        }
        z = hm.eval(z);
    }
    Ok(z - fp.z)
}

/// Iterate both endpoint values up to `j_max` steps and report passes within
/// `tol` of any unstable fixed point.
pub fn merging_condition_scan(rp: &ReducedParams, j_max: u32, tol: f64) -> Vec<MergingHit> {
    let targets = unstable_fixed_points(rp);
    if targets.is_empty() {
        return Vec::new();
    }
    let Ok(hm) = HMap::new(rp) else { return Vec::new() };
    let mut hits = Vec::new();
    for endpoint in [Endpoint::Eta, Endpoint::Nu] {
        let mut z = match endpoint {
            Endpoint::Eta => rp.eta,
            Endpoint::Nu => rp.nu,
        };
        for j in 1..=j_max {
            if !(z > 0.0) {
                break;
            }
            z = hm.eval(z);
            for &(k, zk) in &targets {
                let residual = z - zk;
                if residual.abs() < tol {
                    hits.push(MergingHit { j, endpoint, target_k: k, residual });
                }
            }
        }
    }
    hits
}
