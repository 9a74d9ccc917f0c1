//! Periodic solutions from symbolic itineraries. The composition of the
//! affine pieces along a word is affine, so an S-cycle and its multipliers
//! come from one 2x2 linear solve; regions of existence and stability are
//! grown over parameter grids from seed cells.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{apply, NormalFormParams, ParamCoord, PlanarPoint, DEFAULT_ESCAPE_RADIUS};
use crate::rng::rng_for_index;

/// Cycle symbols: which piece of the map is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    L,
    R,
}

/// A finite word over {L, R}. Cyclic rotations name the same cycle; the
/// canonical form is the lexicographically minimal rotation with L < R.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Itinerary {
    word: Vec<Symbol>,
}

impl Itinerary {
    pub fn from_symbols(word: Vec<Symbol>) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Precondition("itinerary must be nonempty".into()));
        }
        Ok(Self { word })
    }

    /// Accepts plain words ("LLRR") and run-length shorthand ("L8R2",
    /// "L^8R^2").
    pub fn parse(s: &str) -> Result<Self> {
        let mut word = Vec::new();
        let chars: Vec<char> = s.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let sym = match chars[i] {
                'L' | 'l' => Symbol::L,
                'R' | 'r' => Symbol::R,
                c => {
                    return Err(Error::Config(format!("unexpected character `{c}` in itinerary")));
                }
            };
            i += 1;
            if i < chars.len() && chars[i] == '^' {
                i += 1;
            }
            let mut count = 0usize;
            let mut saw_digit = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                count = count * 10 + chars[i].to_digit(10).unwrap() as usize;
                saw_digit = true;
                i += 1;
            }
            let count = if saw_digit { count } else { 1 };
            if count == 0 {
                return Err(Error::Config("zero repeat count in itinerary".into()));
            }
            word.extend(std::iter::repeat(sym).take(count));
        }
        Self::from_symbols(word)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn count(&self, sym: Symbol) -> usize {
        self.word.iter().filter(|s| **s == sym).count()
    }

    pub fn rotated(&self, by: usize) -> Self {
        let n = self.word.len();
        let word = (0..n).map(|i| self.word[(i + by) % n]).collect();
        Self { word }
    }

    /// Lexicographically minimal rotation.
    pub fn canonical(&self) -> Self {
        let mut best = self.clone();
        for by in 1..self.word.len() {
            let cand = self.rotated(by);
            if cand.word < best.word {
                best = cand;
            }
        }
        best
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.word {
            write!(f, "{}", if *s == Symbol::L { 'L' } else { 'R' })?;
        }
        Ok(())
    }
}

/// Admissibility tolerance at the switching line: a point within this of
/// x = 0 matches either symbol.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

/// A solved cycle.
#[derive(Debug, Clone)]
pub struct CycleSolution {
    /// One point per word position; `points[i]` is mapped by `word[i]`.
    pub points: Vec<PlanarPoint>,
    /// Eigenvalues of the composed Jacobian.
    pub multipliers: [Complex64; 2],
    /// Every point lies in the half-plane its symbol names, up to the
    /// switching-line tolerance.
    pub admissible: bool,
    /// Admissible with both multipliers strictly inside the unit circle.
    pub stable: bool,
}

/// Solve the cycle fixed-point system for a word, applying the pieces in
/// word order (first symbol acts first).
pub fn solve_cycle(params: &NormalFormParams, itin: &Itinerary) -> Result<CycleSolution> {
    let left = params.left_piece();
    let right = params.right_piece();
    // Compose x -> M x + c along the word.
    let mut m = [[1.0_f64, 0.0], [0.0, 1.0]];
    let mut c = [0.0_f64, 0.0];
    for sym in itin.symbols() {
        let p = if *sym == Symbol::L { &left } else { &right };
        let m_new = [
            [p.m11 * m[0][0] + p.m12 * m[1][0], p.m11 * m[0][1] + p.m12 * m[1][1]],
            [p.m21 * m[0][0] + p.m22 * m[1][0], p.m21 * m[0][1] + p.m22 * m[1][1]],
        ];
        c = [
            p.m11 * c[0] + p.m12 * c[1] + p.b1,
            p.m21 * c[0] + p.m22 * c[1] + p.b2,
        ];
        m = m_new;
    }
    let trace = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = trace * trace - 4.0 * det;
    let multipliers = if disc >= 0.0 {
        let root = disc.sqrt();
        [
            Complex64::new(0.5 * (trace + root), 0.0),
            Complex64::new(0.5 * (trace - root), 0.0),
        ]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(0.5 * trace, im), Complex64::new(0.5 * trace, -im)]
    };
    // Eigenvalue 1 leaves the fixed-point system singular.
    if multipliers.iter().any(|mu| (mu - 1.0).norm() < 1e-12) {
        return Err(Error::DegenerateCycle);
    }
    let a11 = 1.0 - m[0][0];
    let a12 = -m[0][1];
    let a21 = -m[1][0];
    let a22 = 1.0 - m[1][1];
    let den = a11 * a22 - a12 * a21;
    let first = PlanarPoint::new(
        (c[0] * a22 - a12 * c[1]) / den,
        (a11 * c[1] - a21 * c[0]) / den,
    );
    let mut points = Vec::with_capacity(itin.len());
    points.push(first);
    let mut p = first;
    for sym in &itin.symbols()[..itin.len() - 1] {
        p = if *sym == Symbol::L { left.apply(p) } else { right.apply(p) };
        points.push(p);
    }
    let admissible = points.iter().zip(itin.symbols()).all(|(p, sym)| match sym {
        Symbol::L => p.x <= ADMISSIBILITY_TOL,
        Symbol::R => p.x >= -ADMISSIBILITY_TOL,
    });
    let stable = admissible && multipliers.iter().all(|mu| mu.norm() < 1.0);
    Ok(CycleSolution { points, multipliers, admissible, stable })
}

/// A rectangular grid over two of the four normal-form parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamAxis {
    pub coord: ParamCoord,
    pub min: f64,
    pub max: f64,
    pub n_cells: usize,
}

impl ParamAxis {
    /// Center coordinate of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * (self.max - self.min) / self.n_cells as f64
    }

    /// Cell index containing `v`, clamped to the range.
    pub fn cell_of(&self, v: f64) -> usize {
        let step = (self.max - self.min) / self.n_cells as f64;
        let i = ((v - self.min) / step).floor();
        (i.max(0.0) as usize).min(self.n_cells - 1)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamGrid {
    pub base: NormalFormParams,
    pub axis1: ParamAxis,
    pub axis2: ParamAxis,
}

impl ParamGrid {
    pub fn params_at(&self, i: usize, j: usize) -> NormalFormParams {
        self.base
            .with(self.axis1.coord, self.axis1.center(i))
            .with(self.axis2.coord, self.axis2.center(j))
    }
}

/// Boolean mask over a parameter grid, row-major with axis1 fastest.
#[derive(Debug, Clone)]
pub struct RegionMask {
    pub n1: usize,
    pub n2: usize,
    pub cells: Vec<bool>,
}

impl RegionMask {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.n1 + i]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }
}

/// Flood-fill the set of grid cells where the word has a stable admissible
/// cycle, starting from seed cells and expanding over 8-neighbourhoods.
/// Cells unreachable from every seed stay unmarked even if they would test
/// positive; this mirrors how the regions are grown in practice.
pub fn grow_region(grid: &ParamGrid, itin: &Itinerary, seeds: &[(usize, usize)]) -> RegionMask {
    let (n1, n2) = (grid.axis1.n_cells, grid.axis2.n_cells);
    let mut positive = vec![false; n1 * n2];
    let mut visited = vec![false; n1 * n2];
    let test = |i: usize, j: usize| -> bool {
        matches!(solve_cycle(&grid.params_at(i, j), itin), Ok(sol) if sol.stable)
    };
    let mut frontier: Vec<(usize, usize)> = Vec::new();
    for &(i, j) in seeds {
        if i < n1 && j < n2 && !visited[j * n1 + i] {
            visited[j * n1 + i] = true;
            frontier.push((i, j));
        }
    }
    while !frontier.is_empty() {
        // Cells are independent; test the frontier as one parallel batch.
        let results: Vec<((usize, usize), bool)> = frontier
            .par_iter()
            .map(|&(i, j)| ((i, j), test(i, j)))
            .collect();
        let mut next = Vec::new();
        for ((i, j), ok) in results {
            if !ok {
                continue;
            }
            positive[j * n1 + i] = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= n1 as i64 || nj >= n2 as i64 {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if !visited[nj * n1 + ni] {
                        visited[nj * n1 + ni] = true;
                        next.push((ni, nj));
                    }
                }
            }
        }
        frontier = next;
    }
    RegionMask { n1, n2, cells: positive }
}

/// Detect the minimal period of an orbit that has already converged: the
/// smallest q whose shift leaves the whole recorded stretch fixed to within
/// `tol` in max norm. Records 2 * max_period steps so even the longest
/// admissible period is confirmed over a full second pass.
pub(crate) fn detect_period_2d(
    params: &NormalFormParams,
    start: PlanarPoint,
    max_period: usize,
    tol: f64,
) -> Option<(usize, Vec<PlanarPoint>)> {
    let total = 2 * max_period;
    let mut pts = Vec::with_capacity(total + 1);
    pts.push(start);
    let mut p = start;
    for _ in 0..total {
        p = apply(params, p);
        pts.push(p);
    }
    'candidates: for q in 1..=max_period {
        if pts[q].dist_max(pts[0]) < tol {
            for i in 0..=(total - q) {
                if pts[i + q].dist_max(pts[i]) >= tol {
                    continue 'candidates;
                }
            }
            return Some((q, pts[..q].to_vec()));
        }
    }
    None
}

/// Word of a periodic orbit: symbol per point under the convention that the
/// closed left half-plane maps by the left piece.
pub(crate) fn word_of_points(points: &[PlanarPoint]) -> Itinerary {
    let word = points
        .iter()
        .map(|p| if p.x <= 0.0 { Symbol::L } else { Symbol::R })
        .collect();
    Itinerary { word }
}

/// Candidate itineraries from coarse Monte-Carlo simulation, with the coarse
/// cells where each word was observed.
pub fn candidate_itineraries_with_cells(
    grid: &ParamGrid,
    coarse_resolution: (usize, usize),
    orbit_budget: usize,
    rng_seed: u64,
) -> BTreeMap<Itinerary, Vec<(usize, usize)>> {
    let (c1, c2) = coarse_resolution;
    let coarse = ParamGrid {
        base: grid.base,
        axis1: ParamAxis { n_cells: c1, ..grid.axis1 },
        axis2: ParamAxis { n_cells: c2, ..grid.axis2 },
    };
    let found: Vec<((usize, usize), Vec<Itinerary>)> = (0..c1 * c2)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % c1, idx / c1);
            let params = coarse.params_at(i, j);
            let mut rng = rng_for_index(rng_seed, idx as u64);
            let mut words = Vec::new();
            let tries = 3;
            let budget = orbit_budget / tries;
            for _ in 0..tries {
                let mut p = PlanarPoint::new(rng.gen_range(-2.0..-0.01), rng.gen_range(-2.0..-0.01));
                let burn = budget.saturating_sub(512).max(16);
                let mut escaped = false;
                for _ in 0..burn {
                    p = apply(&params, p);
                    if !(p.max_norm() <= DEFAULT_ESCAPE_RADIUS) {
                        escaped = true;
                        break;
                    }
                }
                if escaped {
                    continue;
                }
                if let Some((q, pts)) = detect_period_2d(&params, p, 256.min(budget), 1e-9) {
                    let _ = q;
                    words.push(word_of_points(&pts).canonical());
                }
            }
            ((i, j), words)
        })
        .collect();
    let mut out: BTreeMap<Itinerary, Vec<(usize, usize)>> = BTreeMap::new();
    for ((i, j), words) in found {
        for w in words {
            out.entry(w).or_default().push((i, j));
        }
    }
    out
}

/// The set of candidate itineraries alone.
pub fn candidate_itineraries(
    grid: &ParamGrid,
    coarse_resolution: (usize, usize),
    orbit_budget: usize,
    rng_seed: u64,
) -> BTreeSet<Itinerary> {
    candidate_itineraries_with_cells(grid, coarse_resolution, orbit_budget, rng_seed)
        .into_keys()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_and_canonical_forms() {
        let a = Itinerary::parse("LLLLLLLLRR").unwrap();
        let b = Itinerary::parse("L8R2").unwrap();
        let c = Itinerary::parse("L^8R^2").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.to_string(), "LLLLLLLLRR");
        let rotated = Itinerary::parse("RRL8").unwrap();
        assert_eq!(rotated.canonical(), a);
        assert!(Itinerary::parse("").is_err());
        assert!(Itinerary::parse("LXR").is_err());
    }

    #[test]
    fn single_l_cycle_is_the_saddle() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.5, 1.5);
        let sol = solve_cycle(&xi, &Itinerary::parse("L").unwrap()).unwrap();
        assert!(sol.points[0].dist_max(PlanarPoint::new(-4.0, 3.0)) < 1e-12);
        let mut mods: Vec<f64> = sol.multipliers.iter().map(|m| m.norm()).collect();
        mods.sort_by(f64::total_cmp);
        assert!((mods[0] - 0.5).abs() < 1e-12);
        assert!((mods[1] - 1.5).abs() < 1e-12);
        assert!(sol.admissible);
        assert!(!sol.stable);
    }

    #[test]
    fn single_r_cycle_has_complex_multipliers() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.5, 1.5);
        let sol = solve_cycle(&xi, &Itinerary::parse("R").unwrap()).unwrap();
        assert!((sol.points[0].x - 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.points[0].y + 0.5).abs() < 1e-12);
        for mu in &sol.multipliers {
            assert!(mu.im != 0.0);
            assert!((mu.norm() - 1.5_f64.sqrt()).abs() < 1e-12);
        }
        assert!(sol.admissible);
        assert!(!sol.stable);
    }

    #[test]
    fn stable_cycle_from_the_phase_portrait_examples() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.494, 1.443);
        let sol = solve_cycle(&xi, &Itinerary::parse("L8R2").unwrap()).unwrap();
        assert!(sol.admissible && sol.stable, "multipliers {:?}", sol.multipliers);
    }

    #[test]
    fn degenerate_when_a_multiplier_is_one() {
        // For the single-L word the composed matrix is Df_L, which has
        // eigenvalue 1 exactly when tau_l = 1 + delta_l.
        let xi = NormalFormParams::new(1.5, 0.5, -0.5, 1.5);
        assert!(matches!(
            solve_cycle(&xi, &Itinerary::parse("L").unwrap()),
            Err(Error::DegenerateCycle)
        ));
    }

    #[test]
    fn rotations_solve_to_the_same_cycle() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.494, 1.443);
        let base = Itinerary::parse("L8R2").unwrap();
        let reference = solve_cycle(&xi, &base).unwrap();
        for by in 1..base.len() {
            let sol = solve_cycle(&xi, &base.rotated(by)).unwrap();
            for mu in 0..2 {
                assert!((sol.multipliers[mu] - reference.multipliers[mu]).norm() < 1e-10);
            }
            for p in &sol.points {
                let closest = reference
                    .points
                    .iter()
                    .map(|q| q.dist_max(*p))
                    .fold(f64::INFINITY, f64::min);
                assert!(closest < 1e-10);
            }
        }
    }

    #[test]
    fn multiplier_product_matches_determinant_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..300 {
            let xi = NormalFormParams::new(
                rng.gen_range(0.5..2.5),
                rng.gen_range(0.05..0.95),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.1..2.0),
            );
            let len = rng.gen_range(1..10);
            let word: Vec<Symbol> = (0..len)
                .map(|_| if rng.gen::<bool>() { Symbol::L } else { Symbol::R })
                .collect();
            let itin = Itinerary::from_symbols(word).unwrap();
            let Ok(sol) = solve_cycle(&xi, &itin) else { continue };
            let prod: f64 = sol.multipliers.iter().map(|m| m.norm()).product();
            let expect = xi.delta_l.powi(itin.count(Symbol::L) as i32)
                * xi.delta_r.powi(itin.count(Symbol::R) as i32);
            assert!(
                (prod - expect.abs()).abs() <= 1e-9 * (1.0 + expect.abs()),
                "prod {prod} expect {expect}"
            );
        }
    }

    #[test]
    fn stable_cycles_attract_perturbed_starts() {
        for (tau_r, delta_r, word) in [
            (-0.484, 1.433, "L8R2"),
            (-0.494, 1.443, "L8R2L9R2"),
        ] {
            let xi = NormalFormParams::new(2.0, 0.75, tau_r, delta_r);
            let sol = solve_cycle(&xi, &Itinerary::parse(word).unwrap()).unwrap();
            assert!(sol.stable);
            let mut p = PlanarPoint::new(sol.points[0].x + 1e-4, sol.points[0].y - 1e-4);
            for _ in 0..1000 {
                p = apply(&xi, p);
            }
            let closest = sol.points.iter().map(|q| q.dist_max(p)).fold(f64::INFINITY, f64::min);
            assert!(closest < 1e-6, "orbit stayed {closest} away");
        }
    }

    #[test]
    fn grow_region_finds_coexisting_cycles() {
        let grid = ParamGrid {
            base: NormalFormParams::new(2.0, 0.75, f64::NAN, f64::NAN),
            axis1: ParamAxis { coord: ParamCoord::DeltaR, min: 1.40, max: 1.47, n_cells: 36 },
            axis2: ParamAxis { coord: ParamCoord::TauR, min: -0.52, max: -0.46, n_cells: 36 },
        };
        let target = (grid.axis1.cell_of(1.433), grid.axis2.cell_of(-0.484));
        for word in ["L7R2", "L8R2", "L9R2"] {
            let itin = Itinerary::parse(word).unwrap();
            let mask = grow_region(&grid, &itin, &[target]);
            assert!(mask.get(target.0, target.1), "{word} missing at the seed");
            assert!(mask.count() > 8, "{word} region suspiciously small");
        }
    }

    #[test]
    fn candidates_contain_the_main_words() {
        let grid = ParamGrid {
            base: NormalFormParams::new(2.0, 0.75, f64::NAN, f64::NAN),
            axis1: ParamAxis { coord: ParamCoord::DeltaR, min: 1.35, max: 1.49, n_cells: 100 },
            axis2: ParamAxis { coord: ParamCoord::TauR, min: -0.52, max: -0.42, n_cells: 100 },
        };
        let words = candidate_itineraries(&grid, (24, 24), 30_000, 7);
        let mut hits = 0;
        for k in 5..10 {
            let w = Itinerary::parse(&format!("L{k}R2")).unwrap().canonical();
            if words.contains(&w) {
                hits += 1;
            }
        }
        assert!(hits >= 3, "only {hits} incrementing words found: {words:?}");
    }

    #[test]
    fn candidates_for_the_degenerate_left_piece_use_r3() {
        let grid = ParamGrid {
            base: NormalFormParams::new(f64::NAN, 0.0, f64::NAN, 2.0),
            axis1: ParamAxis { coord: ParamCoord::TauL, min: 1.36, max: 1.44, n_cells: 60 },
            axis2: ParamAxis { coord: ParamCoord::TauR, min: 0.62, max: 0.70, n_cells: 60 },
        };
        let words = candidate_itineraries(&grid, (16, 16), 30_000, 11);
        let found = words.iter().any(|w| {
            w.count(Symbol::R) == 3 && w.count(Symbol::L) >= 2
        });
        assert!(found, "no LkR3 word among {words:?}");
    }

    #[test]
    fn period_detection_recovers_a_known_cycle() {
        let xi = NormalFormParams::new(2.0, 0.75, -0.485, 1.455);
        let sol = solve_cycle(&xi, &Itinerary::parse("L8R2").unwrap()).unwrap();
        assert!(sol.stable);
        let mut p = PlanarPoint::new(sol.points[0].x + 1e-6, sol.points[0].y);
        for _ in 0..5000 {
            p = apply(&xi, p);
        }
        let (q, pts) = detect_period_2d(&xi, p, 200, 1e-9).unwrap();
        assert_eq!(q, 10);
        assert_eq!(word_of_points(&pts).canonical(), Itinerary::parse("L8R2").unwrap());
    }
}
