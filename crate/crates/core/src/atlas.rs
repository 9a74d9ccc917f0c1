//! Parameter-plane sweeps for both families, one-parameter slice diagrams,
//! class-boundary extraction, and the CSV/PGM/JSON output formats.
//!
//! Every cell is classified independently with a generator derived from
//! (seed, cell index), so a scan is deterministic for a given config and
//! seed no matter how many workers run it.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    classify_1d_full, classify_2d, AttractorClass, Budgets1d, Budgets2d, GcdConfig,
};
use crate::cycles::{
    candidate_itineraries_with_cells, grow_region, Itinerary, ParamAxis, ParamGrid, RegionMask,
};
use crate::error::{Error, Result};
use crate::maps::{NormalFormParams, ParamCoord, PlanarPoint, DEFAULT_ESCAPE_RADIUS};
use crate::oned::{branch_count, delta_invertibility, ReducedParams};
use crate::reduction::{reduced_params_generic, ReductionSpec};
use crate::rng::rng_for_index;

/// Parameters a scan axis may range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanParam {
    TauL,
    DeltaL,
    TauR,
    DeltaR,
    Eta,
    Nu,
}

impl ScanParam {
    pub fn name(&self) -> &'static str {
        match self {
            ScanParam::TauL => "tauL",
            ScanParam::DeltaL => "deltaL",
            ScanParam::TauR => "tauR",
            ScanParam::DeltaR => "deltaR",
            ScanParam::Eta => "eta",
            ScanParam::Nu => "nu",
        }
    }

    fn coord(&self) -> Option<ParamCoord> {
        match self {
            ScanParam::TauL => Some(ParamCoord::TauL),
            ScanParam::DeltaL => Some(ParamCoord::DeltaL),
            ScanParam::TauR => Some(ParamCoord::TauR),
            ScanParam::DeltaR => Some(ParamCoord::DeltaR),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanAxis {
    pub param: ScanParam,
    pub min: f64,
    pub max: f64,
    pub n_cells: usize,
}

impl ScanAxis {
    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * (self.max - self.min) / self.n_cells as f64
    }

    pub fn cell_width(&self) -> f64 {
        (self.max - self.min) / self.n_cells as f64
    }
}

/// Which family is scanned, with its fixed parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum FamilySpec {
    /// The planar map; `m` names the reduction used for auxiliary columns.
    TwoD { base: NormalFormParams, m: u32 },
    /// The reduced map at fixed sigma.
    OneD { sigma: f64 },
}

/// Classifier budgets, scaled for grid work. The standalone operations keep
/// their own larger defaults; a scan visits tens of thousands of cells.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanBudgets {
    pub burn_in: usize,
    pub max_period: usize,
    pub recurrence_tol: f64,
    pub escape_radius: f64,
    pub gcd_epsilon: f64,
    pub gcd_n_refs: usize,
    pub gcd_orbit_len: usize,
    pub n_boxes: usize,
    pub boxcount_len: usize,
    pub rho_iters: usize,
    /// Also estimate the rotation number for every invertible two-branch
    /// cell (slower; off by default).
    pub compute_rho: bool,
    /// Coarse grid resolution per axis for candidate itineraries.
    pub coarse: usize,
    /// Iteration budget per coarse cell.
    pub orbit_budget: usize,
}

impl Default for ScanBudgets {
    fn default() -> Self {
        Self {
            burn_in: 10_000,
            max_period: 200,
            recurrence_tol: 1e-9,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            gcd_epsilon: 1e-4,
            gcd_n_refs: 2000,
            gcd_orbit_len: 200_000,
            n_boxes: 1000,
            boxcount_len: 200_000,
            rho_iters: 100_000,
            compute_rho: false,
            coarse: 32,
            orbit_budget: 30_000,
        }
    }
}

impl ScanBudgets {
    fn budgets_1d(&self) -> Budgets1d {
        Budgets1d {
            burn_in: self.burn_in,
            max_period: self.max_period,
            n_boxes: self.n_boxes,
            boxcount_len: self.boxcount_len,
            rho_iters: self.rho_iters,
        }
    }

    fn budgets_2d(&self) -> Budgets2d {
        Budgets2d {
            burn_in: self.burn_in,
            max_period: self.max_period,
            recurrence_tol: self.recurrence_tol,
            escape_radius: self.escape_radius,
            gcd: GcdConfig {
                epsilon: self.gcd_epsilon,
                n_refs: self.gcd_n_refs,
                orbit_len: self.gcd_orbit_len,
                burn_in: self.burn_in,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub family: FamilySpec,
    pub axis1: ScanAxis,
    pub axis2: ScanAxis,
    pub budgets: ScanBudgets,
    pub seed: u64,
    /// 0 uses the global thread pool.
    pub n_workers: usize,
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        for axis in [&self.axis1, &self.axis2] {
            if axis.n_cells < 2 {
                return Err(Error::Config("axes need at least 2 cells".into()));
            }
            if !(axis.min < axis.max) {
                return Err(Error::Config(format!(
                    "axis {} has empty range [{}, {}]",
                    axis.param.name(),
                    axis.min,
                    axis.max
                )));
            }
        }
        if self.axis1.param == self.axis2.param {
            return Err(Error::Config("axes must name distinct parameters".into()));
        }
        match self.family {
            FamilySpec::OneD { sigma } => {
                if !(sigma > 1.0) {
                    return Err(Error::Config("sigma must exceed 1".into()));
                }
                for axis in [&self.axis1, &self.axis2] {
                    if !matches!(axis.param, ScanParam::Eta | ScanParam::Nu) {
                        return Err(Error::Config(format!(
                            "axis {} does not exist for the reduced family",
                            axis.param.name()
                        )));
                    }
                }
            }
            FamilySpec::TwoD { base, m } => {
                if m < 2 {
                    return Err(Error::Config("the reduction order m must be at least 2".into()));
                }
                let mut coords = Vec::new();
                for axis in [&self.axis1, &self.axis2] {
                    match axis.param.coord() {
                        Some(c) => coords.push(c),
                        None => {
                            return Err(Error::Config(format!(
                                "axis {} does not exist for the planar family",
                                axis.param.name()
                            )))
                        }
                    }
                }
                for coord in
                    [ParamCoord::TauL, ParamCoord::DeltaL, ParamCoord::TauR, ParamCoord::DeltaR]
                {
                    if !coords.contains(&coord) && !base.get(coord).is_finite() {
                        return Err(Error::Config(format!(
                            "fixed parameter {} is not finite",
                            coord.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Auxiliary scalars recorded per cell where they are defined.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CellAux {
    pub eta: Option<f64>,
    pub nu: Option<f64>,
    pub n_branches: Option<u32>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub axis1: f64,
    pub axis2: f64,
    pub class: AttractorClass,
    pub aux: CellAux,
}

/// A chain of points along one class transition, in axis coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPolyline {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub config: ScanConfig,
    /// Row-major with axis1 fastest: index = j * n1 + i.
    pub cells: Vec<CellResult>,
    pub boundaries: Vec<BoundaryPolyline>,
    pub runtime_seconds: f64,
}

impl ScanResult {
    pub fn dims(&self) -> (usize, usize) {
        (self.config.axis1.n_cells, self.config.axis2.n_cells)
    }

    pub fn cell(&self, i: usize, j: usize) -> &CellResult {
        &self.cells[j * self.config.axis1.n_cells + i]
    }
}

fn run_in_pool<T: Send>(n_workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if n_workers == 0 {
        Ok(f())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n_workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Classify every cell of the configured grid.
pub fn scan(config: &ScanConfig) -> Result<ScanResult> {
    config.validate()?;
    let t0 = Instant::now();
    let cells = run_in_pool(config.n_workers, || match config.family {
        FamilySpec::OneD { sigma } => scan_1d(config, sigma),
        FamilySpec::TwoD { base, m } => scan_2d(config, base, m),
    })?;
    let mut result = ScanResult {
        config: config.clone(),
        cells,
        boundaries: Vec::new(),
        runtime_seconds: 0.0,
    };
    result.boundaries = extract_boundaries(&result);
    result.runtime_seconds = t0.elapsed().as_secs_f64();
    Ok(result)
}

fn scan_1d(config: &ScanConfig, sigma: f64) -> Vec<CellResult> {
    let (n1, n2) = (config.axis1.n_cells, config.axis2.n_cells);
    let budgets = config.budgets.budgets_1d();
    (0..n1 * n2)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % n1, idx / n1);
            let v1 = config.axis1.center(i);
            let v2 = config.axis2.center(j);
            let (eta, nu) = match (config.axis1.param, config.axis2.param) {
                (ScanParam::Eta, ScanParam::Nu) => (v1, v2),
                _ => (v2, v1),
            };
            let rp = ReducedParams::new(eta, nu, sigma);
            let full = classify_1d_full(&rp, &budgets);
            let mut rho = full.rho;
            if config.budgets.compute_rho && rho.is_none() {
                if let Ok(rn) = crate::classify::rotation_number(&rp) {
                    rho = Some(rn.rho);
                }
            }
            let aux = CellAux {
                eta: Some(eta),
                nu: Some(nu),
                n_branches: branch_count(&rp).ok(),
                delta: Some(delta_invertibility(&rp)),
                rho,
            };
            CellResult { axis1: v1, axis2: v2, class: full.class, aux }
        })
        .collect()
}

fn scan_2d(config: &ScanConfig, base: NormalFormParams, m: u32) -> Vec<CellResult> {
    let (n1, n2) = (config.axis1.n_cells, config.axis2.n_cells);
    let c1 = config.axis1.param.coord().expect("validated");
    let c2 = config.axis2.param.coord().expect("validated");
    let grid = ParamGrid {
        base,
        axis1: ParamAxis {
            coord: c1,
            min: config.axis1.min,
            max: config.axis1.max,
            n_cells: n1,
        },
        axis2: ParamAxis {
            coord: c2,
            min: config.axis2.min,
            max: config.axis2.max,
            n_cells: n2,
        },
    };

    // Candidate words from a coarse Monte-Carlo pass, then one grown region
    // per word over the fine grid.
    let coarse = config.budgets.coarse;
    let candidates = candidate_itineraries_with_cells(
        &grid,
        (coarse, coarse),
        config.budgets.orbit_budget,
        config.seed,
    );
    let coarse_grid = ParamGrid {
        base,
        axis1: ParamAxis { n_cells: coarse, ..grid.axis1 },
        axis2: ParamAxis { n_cells: coarse, ..grid.axis2 },
    };
    let masks: Vec<(Itinerary, RegionMask)> = candidates
        .into_iter()
        .map(|(word, coarse_cells)| {
            let seeds: Vec<(usize, usize)> = coarse_cells
                .iter()
                .map(|&(ci, cj)| {
                    (
                        grid.axis1.cell_of(coarse_grid.axis1.center(ci)),
                        grid.axis2.cell_of(coarse_grid.axis2.center(cj)),
                    )
                })
                .collect();
            let mask = grow_region(&grid, &word, &seeds);
            (word, mask)
        })
        .collect();

    let budgets = config.budgets.budgets_2d();
    (0..n1 * n2)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % n1, idx / n1);
            let params = grid.params_at(i, j);
            // Smallest period wins where stable cycles coexist; ties break
            // on the canonical word so the choice is deterministic.
            let mut best: Option<&Itinerary> = None;
            for (word, mask) in &masks {
                if mask.get(i, j) && best.map_or(true, |b| (word.len(), word) < (b.len(), b)) {
                    best = Some(word);
                }
            }
            let class = match best {
                Some(word) => AttractorClass::Periodic {
                    period: word.len() as u32,
                    itinerary: Some(word.clone()),
                },
                None => {
                    let mut rng = rng_for_index(config.seed, idx as u64);
                    let p0 = PlanarPoint::new(
                        rng.gen_range(-0.5..-0.05),
                        rng.gen_range(-0.5..-0.05),
                    );
                    classify_2d(&params, p0, &budgets)
                }
            };
            let aux = match reduced_params_generic(&params, ReductionSpec::FixedPointSaddle { m })
            {
                Ok((rp, _)) => CellAux {
                    eta: Some(rp.eta),
                    nu: Some(rp.nu),
                    n_branches: branch_count(&rp).ok(),
                    delta: Some(delta_invertibility(&rp)),
                    rho: None,
                },
                Err(_) => CellAux::default(),
            };
            CellResult {
                axis1: grid.axis1.center(i),
                axis2: grid.axis2.center(j),
                class,
                aux,
            }
        })
        .collect()
}

/// Classify a grid of initial conditions at one fixed parameter point.
pub fn basin_scan(
    params: &NormalFormParams,
    x_axis: (f64, f64, usize),
    y_axis: (f64, f64, usize),
    budgets: &Budgets2d,
    n_workers: usize,
) -> Result<Vec<CellResult>> {
    let (x0, x1, nx) = x_axis;
    let (y0, y1, ny) = y_axis;
    if nx < 2 || ny < 2 || !(x0 < x1) || !(y0 < y1) {
        return Err(Error::Config("basin axes need at least 2 cells and nonempty ranges".into()));
    }
    let params = *params;
    let budgets = *budgets;
    run_in_pool(n_workers, move || {
        (0..nx * ny)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % nx, idx / nx);
                let x = x0 + (i as f64 + 0.5) * (x1 - x0) / nx as f64;
                let y = y0 + (j as f64 + 0.5) * (y1 - y0) / ny as f64;
                let class = classify_2d(&params, PlanarPoint::new(x, y), &budgets);
                CellResult { axis1: x, axis2: y, class, aux: CellAux::default() }
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Slice diagrams

/// One-parameter path through parameter space.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum SliceLine {
    /// Reduced family along a fixed ratio nu/eta, parametrized by eta.
    Ratio { nu_over_eta: f64, eta_min: f64, eta_max: f64 },
    /// Straight segment between two points in the named axes.
    Segment { axes: (ScanParam, ScanParam), from: (f64, f64), to: (f64, f64) },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceConfig {
    pub family: FamilySpec,
    pub line: SliceLine,
    pub n_points: usize,
    pub budgets: ScanBudgets,
    pub seed: u64,
    /// Attractor support samples kept per point.
    pub max_support: usize,
    pub n_workers: usize,
}

/// Attractor support samples at one slice point.
#[derive(Debug, Clone, Serialize)]
pub enum SliceSupport {
    OneD(Vec<f64>),
    TwoD(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Serialize)]
pub struct SlicePoint {
    /// Path parameter in [0, 1].
    pub t: f64,
    pub axis_values: (f64, f64),
    pub class: AttractorClass,
    pub aux: CellAux,
    pub support: SliceSupport,
}

#[derive(Debug, Clone)]
pub struct SliceResult {
    pub config: SliceConfig,
    pub points: Vec<SlicePoint>,
}

/// One-parameter bifurcation diagram dataset along the configured line.
pub fn slice_diagram(config: &SliceConfig) -> Result<SliceResult> {
    if config.n_points < 2 {
        return Err(Error::Config("slice needs at least 2 points".into()));
    }
    let points = run_in_pool(config.n_workers, || match config.family {
        FamilySpec::OneD { sigma } => slice_1d(config, sigma),
        FamilySpec::TwoD { base, m } => slice_2d(config, base, m),
    })??;
    Ok(SliceResult { config: config.clone(), points })
}

fn slice_axes_1d(config: &SliceConfig, t: f64) -> Result<(f64, f64)> {
    match config.line {
        SliceLine::Ratio { nu_over_eta, eta_min, eta_max } => {
            let eta = eta_min + t * (eta_max - eta_min);
            Ok((eta, nu_over_eta * eta))
        }
        SliceLine::Segment { axes, from, to } => {
            let v = (from.0 + t * (to.0 - from.0), from.1 + t * (to.1 - from.1));
            match axes {
                (ScanParam::Eta, ScanParam::Nu) => Ok(v),
                (ScanParam::Nu, ScanParam::Eta) => Ok((v.1, v.0)),
                _ => Err(Error::Config("reduced-family slice axes must be eta and nu".into())),
            }
        }
    }
}

fn slice_1d(config: &SliceConfig, sigma: f64) -> Result<Vec<SlicePoint>> {
    let budgets = config.budgets.budgets_1d();
    (0..config.n_points)
        .into_par_iter()
        .map(|idx| {
            let t = idx as f64 / (config.n_points - 1) as f64;
            let (eta, nu) = slice_axes_1d(config, t)?;
            let rp = ReducedParams::new(eta, nu, sigma);
            let full = classify_1d_full(&rp, &budgets);
            let support = SliceSupport::OneD(support_1d(&rp, &budgets, config.max_support));
            let aux = CellAux {
                eta: Some(eta),
                nu: Some(nu),
                n_branches: branch_count(&rp).ok(),
                delta: Some(delta_invertibility(&rp)),
                rho: full.rho,
            };
            Ok(SlicePoint { t, axis_values: (eta, nu), class: full.class, aux, support })
        })
        .collect()
}

fn support_1d(rp: &ReducedParams, budgets: &Budgets1d, max_support: usize) -> Vec<f64> {
    let Ok(hm) = crate::oned::HMap::new(rp) else { return Vec::new() };
    let mut z = rp.eta.max(rp.nu);
    if !(z > 0.0) {
        return Vec::new();
    }
    for _ in 0..budgets.burn_in {
        z = hm.eval(z);
        if !(z > 0.0) {
            return Vec::new();
        }
    }
    let mut out = Vec::with_capacity(max_support);
    for _ in 0..max_support {
        z = hm.eval(z);
        if !(z > 0.0) {
            break;
        }
        out.push(z);
    }
    out
}

fn slice_2d(config: &SliceConfig, base: NormalFormParams, m: u32) -> Result<Vec<SlicePoint>> {
    let SliceLine::Segment { axes, from, to } = config.line else {
        return Err(Error::Config("planar slices need a segment line".into()));
    };
    let (Some(ca), Some(cb)) = (axes.0.coord(), axes.1.coord()) else {
        return Err(Error::Config("planar slice axes must be normal-form parameters".into()));
    };
    let budgets = config.budgets.budgets_2d();
    (0..config.n_points)
        .into_par_iter()
        .map(|idx| {
            let t = idx as f64 / (config.n_points - 1) as f64;
            let va = from.0 + t * (to.0 - from.0);
            let vb = from.1 + t * (to.1 - from.1);
            let params = base.with(ca, va).with(cb, vb);
            let mut rng = rng_for_index(config.seed, idx as u64);
            let p0 = PlanarPoint::new(rng.gen_range(-0.5..-0.05), rng.gen_range(-0.5..-0.05));
            let class = classify_2d(&params, p0, &budgets);
            let support = SliceSupport::TwoD(support_2d(&params, p0, &budgets, config.max_support));
            let aux = match reduced_params_generic(&params, ReductionSpec::FixedPointSaddle { m })
            {
                Ok((rp, _)) => CellAux {
                    eta: Some(rp.eta),
                    nu: Some(rp.nu),
                    n_branches: branch_count(&rp).ok(),
                    delta: Some(delta_invertibility(&rp)),
                    rho: None,
                },
                Err(_) => CellAux::default(),
            };
            Ok(SlicePoint { t, axis_values: (va, vb), class, aux, support })
        })
        .collect()
}

fn support_2d(
    params: &NormalFormParams,
    p0: PlanarPoint,
    budgets: &Budgets2d,
    max_support: usize,
) -> Vec<(f64, f64)> {
    let mut p = p0;
    for _ in 0..budgets.burn_in {
        p = crate::maps::apply(params, p);
        if !(p.max_norm() <= budgets.escape_radius) {
            return Vec::new();
        }
    }
    let mut out = Vec::with_capacity(max_support);
    for _ in 0..max_support {
        p = crate::maps::apply(params, p);
        if !(p.max_norm() <= budgets.escape_radius) {
            break;
        }
        out.push((p.x, p.y));
    }
    out
}

// ---------------------------------------------------------------------------
// Boundary extraction

/// Marching squares over a binary node field. Vertices sit at cell-edge
/// midpoints; the two ambiguous cases use a fixed resolution.
fn marching_squares(
    n1: usize,
    n2: usize,
    xs: &[f64],
    ys: &[f64],
    inside: impl Fn(usize, usize) -> bool,
) -> Vec<Vec<(f64, f64)>> {
    type Pt = (f64, f64);
    let mut segments: Vec<(Pt, Pt)> = Vec::new();
    for j in 0..n2.saturating_sub(1) {
        for i in 0..n1.saturating_sub(1) {
            let bl = inside(i, j) as usize;
            let br = inside(i + 1, j) as usize;
            let tr = inside(i + 1, j + 1) as usize;
            let tl = inside(i, j + 1) as usize;
            let case = bl | (br << 1) | (tr << 2) | (tl << 3);
            if case == 0 || case == 15 {
                continue;
            }
            let xm = 0.5 * (xs[i] + xs[i + 1]);
            let ym = 0.5 * (ys[j] + ys[j + 1]);
            // Edge midpoints: bottom, right, top, left.
            let edge = [
                (xm, ys[j]),
                (xs[i + 1], ym),
                (xm, ys[j + 1]),
                (xs[i], ym),
            ];
            let pairs: &[(usize, usize)] = match case {
                1 => &[(3, 0)],
                2 => &[(0, 1)],
                3 => &[(3, 1)],
                4 => &[(1, 2)],
                5 => &[(3, 0), (1, 2)],
                6 => &[(0, 2)],
                7 => &[(3, 2)],
                8 => &[(2, 3)],
                9 => &[(0, 2)],
                10 => &[(0, 1), (2, 3)],
                11 => &[(1, 2)],
                12 => &[(1, 3)],
                13 => &[(0, 1)],
                14 => &[(3, 0)],
                _ => unreachable!(),
            };
            for (a, b) in pairs {
                segments.push((edge[*a], edge[*b]));
            }
        }
    }
    chain_segments(segments)
}

fn chain_segments(segments: Vec<((f64, f64), (f64, f64))>) -> Vec<Vec<(f64, f64)>> {
    use std::collections::HashMap;
    let key = |p: (f64, f64)| (p.0.to_bits(), p.1.to_bits());
    let mut adjacency: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (idx, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(key(*a)).or_default().push(idx);
        adjacency.entry(key(*b)).or_default().push(idx);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = vec![a, b];
        // Extend forwards then backwards.
        for dir in 0..2 {
            loop {
                let tip = *if dir == 0 { chain.last().unwrap() } else { chain.first().unwrap() };
                let Some(candidates) = adjacency.get(&key(tip)) else { break };
                let Some(&next) = candidates.iter().find(|idx| !used[**idx]) else { break };
                used[next] = true;
                let (a, b) = segments[next];
                let far = if key(a) == key(tip) { b } else { a };
                if dir == 0 {
                    chain.push(far);
                } else {
                    chain.insert(0, far);
                }
            }
        }
        polylines.push(chain);
    }
    polylines
}

/// Polylines along every class transition of a completed grid: the
/// periodic-region boundary, the divergence boundary, and one level set per
/// observed band count.
pub fn extract_boundaries(result: &ScanResult) -> Vec<BoundaryPolyline> {
    let (n1, n2) = result.dims();
    let xs: Vec<f64> = (0..n1).map(|i| result.config.axis1.center(i)).collect();
    let ys: Vec<f64> = (0..n2).map(|j| result.config.axis2.center(j)).collect();
    let mut out = Vec::new();
    let mut emit = |label: String, inside: &dyn Fn(usize, usize) -> bool| {
        for points in marching_squares(n1, n2, &xs, &ys, inside) {
            out.push(BoundaryPolyline { label: label.clone(), points });
        }
    };
    emit("periodic".into(), &|i, j| {
        matches!(result.cell(i, j).class, AttractorClass::Periodic { .. })
    });
    emit("divergent".into(), &|i, j| result.cell(i, j).class == AttractorClass::Divergent);
    let mut band_counts: Vec<u32> =
        result.cells.iter().filter_map(|c| c.class.bands()).collect();
    band_counts.sort_unstable();
    band_counts.dedup();
    for c in band_counts.into_iter().filter(|c| *c >= 2) {
        emit(format!("bands_ge_{c}"), &|i, j| {
            matches!(result.cell(i, j).class.bands(), Some(b) if b >= c)
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Output formats

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_u32(v: Option<u32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV rows for a cell grid: one row per cell, axis2-major, header included.
pub fn write_cells_csv<W: Write>(w: &mut W, cells: &[CellResult]) -> std::io::Result<()> {
    writeln!(w, "axis1,axis2,class,period,bands,eta,nu,N,delta,rho")?;
    for cell in cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(cell.axis1),
            fmt_f64(cell.axis2),
            cell.class.tag(),
            fmt_opt_u32(cell.class.period()),
            fmt_opt_u32(cell.class.bands()),
            fmt_opt(cell.aux.eta),
            fmt_opt(cell.aux.nu),
            fmt_opt_u32(cell.aux.n_branches),
            fmt_opt(cell.aux.delta),
            fmt_opt(cell.aux.rho),
        )?;
    }
    Ok(())
}

/// Gray level per class: divergent cells are white, periodic cells bright
/// (banded by period mod 8), chaotic cells dark (banded by band count mod
/// 8), undetermined cells black.
pub fn class_gray(class: &AttractorClass) -> u8 {
    match class {
        AttractorClass::Divergent => 255,
        AttractorClass::Undetermined => 0,
        AttractorClass::Periodic { period, .. } => 144 + 14 * (period % 8) as u8,
        AttractorClass::Chaotic { bands } => 24 + 12 * (bands % 8) as u8,
    }
}

/// Binary PGM (P5, max value 255), row-major with axis2 increasing upward.
pub fn write_cells_pgm<W: Write>(
    w: &mut W,
    n1: usize,
    n2: usize,
    cells: &[CellResult],
) -> std::io::Result<()> {
    write!(w, "P5\n{n1} {n2}\n255\n")?;
    let mut row = Vec::with_capacity(n1);
    for j in (0..n2).rev() {
        row.clear();
        for i in 0..n1 {
            row.push(class_gray(&cells[j * n1 + i].class));
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn write_boundaries_csv<W: Write>(
    w: &mut W,
    boundaries: &[BoundaryPolyline],
) -> std::io::Result<()> {
    writeln!(w, "polyline,transition,axis1,axis2")?;
    for (id, poly) in boundaries.iter().enumerate() {
        for (x, y) in &poly.points {
            writeln!(w, "{},{},{},{}", id, poly.label, fmt_f64(*x), fmt_f64(*y))?;
        }
    }
    Ok(())
}

/// Run metadata as JSON with a stable (sorted) key order.
pub fn scan_metadata(result: &ScanResult) -> serde_json::Value {
    serde_json::json!({
        "config": result.config,
        "seed": result.config.seed,
        "resolution": [result.config.axis1.n_cells, result.config.axis2.n_cells],
        "runtime_seconds": result.runtime_seconds,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

/// Write grid.csv, grid.pgm, boundaries.csv, and meta.json into `dir`.
pub fn write_scan_outputs(dir: &Path, result: &ScanResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (n1, n2) = result.dims();
    let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("grid.csv"))?);
    write_cells_csv(&mut csv, &result.cells)?;
    let mut pgm = std::io::BufWriter::new(std::fs::File::create(dir.join("grid.pgm"))?);
    write_cells_pgm(&mut pgm, n1, n2, &result.cells)?;
    let mut bnd = std::io::BufWriter::new(std::fs::File::create(dir.join("boundaries.csv"))?);
    write_boundaries_csv(&mut bnd, &result.boundaries)?;
    let meta = scan_metadata(result);
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Slice output: one classes.csv row per point plus a long-format
/// support.csv with one row per attractor sample.
pub fn write_slice_outputs(dir: &Path, result: &SliceResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut classes = std::io::BufWriter::new(std::fs::File::create(dir.join("classes.csv"))?);
    writeln!(classes, "t,axis1,axis2,class,period,bands,eta,nu,N,delta,rho")?;
    for p in &result.points {
        writeln!(
            classes,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(p.t),
            fmt_f64(p.axis_values.0),
            fmt_f64(p.axis_values.1),
            p.class.tag(),
            fmt_opt_u32(p.class.period()),
            fmt_opt_u32(p.class.bands()),
            fmt_opt(p.aux.eta),
            fmt_opt(p.aux.nu),
            fmt_opt_u32(p.aux.n_branches),
            fmt_opt(p.aux.delta),
            fmt_opt(p.aux.rho),
        )?;
    }
    let mut support = std::io::BufWriter::new(std::fs::File::create(dir.join("support.csv"))?);
    writeln!(support, "t,axis1,axis2,value1,value2")?;
    for p in &result.points {
        match &p.support {
            SliceSupport::OneD(zs) => {
                for z in zs {
                    writeln!(
                        support,
                        "{},{},{},{},",
                        fmt_f64(p.t),
                        fmt_f64(p.axis_values.0),
                        fmt_f64(p.axis_values.1),
                        fmt_f64(*z)
                    )?;
                }
            }
            SliceSupport::TwoD(pts) => {
                for (x, y) in pts {
                    writeln!(
                        support,
                        "{},{},{},{},{}",
                        fmt_f64(p.t),
                        fmt_f64(p.axis_values.0),
                        fmt_f64(p.axis_values.1),
                        fmt_f64(*x),
                        fmt_f64(*y)
                    )?;
                }
            }
        }
    }
    let meta = serde_json::json!({
        "config": result.config,
        "seed": result.config.seed,
        "resolution": [result.config.n_points],
        "runtime_seconds": serde_json::Value::Null,
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
