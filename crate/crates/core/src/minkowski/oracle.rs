//! Brute-force containment check by scanning spatial columns.
//!
//! For a spatial position `x` the overlap `J+(a) ∩ J+(b)` meets the time
//! column above `x` in the ray `t >= T(x)`, `T(x) = max_k (t_k + |x - x_k|)`.
//! The slack against `j` only grows along that ray, so the column's worst
//! point is `(T(x), x)`. The oracle scans columns on a compactified polar
//! grid around the box centre, `ρ = R σ / (1 - σ)` with `σ ∈ [0, 1]`, so the
//! sphere at spatial infinity (`σ = 1`, evaluated as a limit) is part of the
//! scan. The best grid cells are then refined by pattern search.
//!
//! Nothing here uses the ridge parameterisation or the light-cone join.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::cone::{push_into_overlap, ConeContainmentVerdict};
use super::{check_dimensions, spatial_distance, Event, GeometryError};

/// Axis-aligned space-time box; each entry is `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub t: [f64; 2],
    pub x: Vec<[f64; 2]>,
}

impl SearchBox {
    /// Smallest box holding `events`, widened by `margin` on every side and
    /// stretched upward in time by the spatial diameter so cone overlaps of
    /// the events fit inside.
    pub fn covering(events: &[&Event], margin: f64) -> Result<SearchBox, GeometryError> {
        let d = check_dimensions(events)?;
        let mut t = [f64::INFINITY, f64::NEG_INFINITY];
        let mut x = vec![[f64::INFINITY, f64::NEG_INFINITY]; d];
        for e in events {
            t[0] = t[0].min(e.t());
            t[1] = t[1].max(e.t());
            for (bound, c) in x.iter_mut().zip(e.x()) {
                bound[0] = bound[0].min(*c);
                bound[1] = bound[1].max(*c);
            }
        }
        let diameter = x
            .iter()
            .map(|[lo, hi]| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt();
        let margin = margin.abs();
        Ok(SearchBox {
            t: [t[0] - margin, t[1] + diameter + margin],
            x: x.into_iter()
                .map(|[lo, hi]| [lo - margin, hi + margin])
                .collect(),
        })
    }

    fn validate(&self, apexes: &[&Event]) -> Result<(), GeometryError> {
        let d = apexes[0].dimension();
        if self.x.len() != d {
            return Err(GeometryError::DimensionMismatch {
                left: d,
                right: self.x.len(),
            });
        }
        let axes = std::iter::once(&self.t).chain(&self.x);
        for (axis, [lo, hi]) in axes.enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GeometryError::EmptyBox(axis));
            }
        }
        for (k, e) in apexes.iter().enumerate() {
            let inside = (self.t[0]..=self.t[1]).contains(&e.t())
                && self
                    .x
                    .iter()
                    .zip(e.x())
                    .all(|([lo, hi], c)| (*lo..=*hi).contains(c));
            if !inside {
                return Err(GeometryError::BoxMissesApex(k));
            }
        }
        Ok(())
    }
}

/// Grid-scan counterpart of [`super::binary_condition`].
pub fn binary_condition_oracle(
    a: &Event,
    b: &Event,
    j: &Event,
    search_box: &SearchBox,
    step: f64,
) -> Result<ConeContainmentVerdict, GeometryError> {
    check_dimensions(&[a, b, j])?;
    if !(step.is_finite() && step > 0.0) {
        return Err(GeometryError::NonPositiveStep(step));
    }
    search_box.validate(&[a, b, j])?;
    let scan = ColumnScan::new(a, b, j, search_box);
    let grid = scan.grid_shape(step);

    let mut cells: Vec<Cell> = Vec::new();
    grid.for_each(|params| {
        cells.push(Cell {
            value: scan.value(&params),
            params,
        })
    });
    cells.sort_by(|p, q| p.value.total_cmp(&q.value));

    let mut best = cells[0].clone();
    let steps = grid.spacings();
    for cell in cells.iter().take(8) {
        let refined = scan.refine(cell.clone(), &steps, false);
        if refined.value < best.value {
            best = refined;
        }
    }
    for cell in cells.iter().filter(|c| c.params[0] >= 1.0).take(8) {
        let refined = scan.refine(cell.clone(), &steps, true);
        if refined.value < best.value {
            best = refined;
        }
    }
    Ok(ConeContainmentVerdict::from_margin(best.value, || {
        scan.witness(&best)
    }))
}

#[derive(Debug, Clone)]
struct Cell {
    params: Vec<f64>,
    value: f64,
}

struct GridShape {
    dim: usize,
    sigma: usize,
    angles: Vec<usize>,
}

impl GridShape {
    fn for_each(&self, mut f: impl FnMut(Vec<f64>)) {
        let sigmas = (0..=self.sigma).map(|i| i as f64 / self.sigma as f64);
        for s in sigmas {
            match self.dim {
                1 => {
                    f(vec![s, 1.0]);
                    f(vec![s, -1.0]);
                }
                2 => {
                    for k in 0..self.angles[0] {
                        f(vec![s, TAU * k as f64 / self.angles[0] as f64]);
                    }
                }
                _ => {
                    for i in 0..=self.angles[0] {
                        let polar = PI * i as f64 / self.angles[0] as f64;
                        for k in 0..self.angles[1] {
                            f(vec![s, polar, TAU * k as f64 / self.angles[1] as f64]);
                        }
                    }
                }
            }
        }
    }

    fn spacings(&self) -> Vec<f64> {
        let mut out = vec![1.0 / self.sigma as f64];
        match self.dim {
            1 => out.push(0.0),
            2 => out.push(TAU / self.angles[0] as f64),
            _ => {
                out.push(PI / self.angles[0] as f64);
                out.push(TAU / self.angles[1] as f64);
            }
        }
        out
    }
}

struct ColumnScan<'e> {
    dim: usize,
    a: &'e Event,
    b: &'e Event,
    j: &'e Event,
    centre: Vec<f64>,
    radius: f64,
}

impl<'e> ColumnScan<'e> {
    fn new(a: &'e Event, b: &'e Event, j: &'e Event, search_box: &SearchBox) -> Self {
        let centre: Vec<f64> = search_box
            .x
            .iter()
            .map(|[lo, hi]| 0.5 * (lo + hi))
            .collect();
        let radius = search_box
            .x
            .iter()
            .map(|[lo, hi]| 0.25 * (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt();
        ColumnScan {
            dim: a.dimension(),
            a,
            b,
            j,
            centre,
            radius,
        }
    }

    fn grid_shape(&self, step: f64) -> GridShape {
        let per_radius = (self.radius / step).ceil();
        let clamp = |v: f64, lo: usize, hi: usize| (v as usize).clamp(lo, hi);
        match self.dim {
            1 => GridShape {
                dim: 1,
                sigma: clamp(4.0 * per_radius, 16, 4096),
                angles: vec![],
            },
            2 => GridShape {
                dim: 2,
                sigma: clamp(per_radius, 8, 512),
                angles: vec![clamp(TAU * per_radius, 32, 4096)],
            },
            _ => GridShape {
                dim: 3,
                sigma: clamp(per_radius, 8, 48),
                angles: vec![
                    clamp(PI * per_radius, 16, 96),
                    clamp(TAU * per_radius, 32, 192),
                ],
            },
        }
    }

    fn direction(&self, params: &[f64]) -> Vec<f64> {
        match self.dim {
            1 => vec![params[1].signum()],
            2 => {
                let (s, c) = params[1].sin_cos();
                vec![c, s]
            }
            _ => {
                let (sp, cp) = params[1].sin_cos();
                let (sa, ca) = params[2].sin_cos();
                vec![sp * ca, sp * sa, cp]
            }
        }
    }

    /// Slack at the bottom of the column selected by `params`.
    fn value(&self, params: &[f64]) -> f64 {
        let sigma = params[0];
        let n = self.direction(params);
        let phi = |e: &Event| e.t() - n.iter().zip(e.x()).map(|(ni, xi)| ni * xi).sum::<f64>();
        if sigma >= 1.0 {
            return phi(self.a).max(phi(self.b)) - phi(self.j);
        }
        let rho = self.radius * sigma / (1.0 - sigma);
        if rho <= 4.0 * self.radius {
            let x: Vec<f64> = self
                .centre
                .iter()
                .zip(&n)
                .map(|(c, ni)| c + rho * ni)
                .collect();
            let floor = [self.a, self.b]
                .iter()
                .map(|e| e.t() + spatial_distance(&x, e.x()))
                .fold(f64::NEG_INFINITY, f64::max);
            return floor - self.j.t() - spatial_distance(&x, self.j.x());
        }
        // |x - x_k| - |x - x_j| evaluated without cancellation at large ρ.
        let lambda = 1.0 / rho;
        let offset = |e: &Event| -> Vec<f64> {
            self.centre
                .iter()
                .zip(e.x())
                .map(|(c, xi)| c - xi)
                .collect()
        };
        let scaled_norm = |o: &[f64]| -> f64 {
            o.iter()
                .zip(&n)
                .map(|(oi, ni)| (lambda * oi + ni) * (lambda * oi + ni))
                .sum::<f64>()
                .sqrt()
        };
        let cj = offset(self.j);
        let cj2: f64 = cj.iter().map(|v| v * v).sum();
        let reach = |e: &Event| -> f64 {
            let ck = offset(e);
            let ck2: f64 = ck.iter().map(|v| v * v).sum();
            let cross: f64 = n
                .iter()
                .zip(self.j.x().iter().zip(e.x()))
                .map(|(ni, (xj, xk))| ni * (xj - xk))
                .sum();
            let diff = (lambda * (ck2 - cj2) + 2.0 * cross) / (scaled_norm(&ck) + scaled_norm(&cj));
            e.t() - self.j.t() + diff
        };
        reach(self.a).max(reach(self.b))
    }

    fn point(&self, params: &[f64]) -> Option<Event> {
        let sigma = params[0];
        if sigma >= 1.0 {
            return None;
        }
        let n = self.direction(params);
        let rho = self.radius * sigma / (1.0 - sigma);
        let x: Vec<f64> = self
            .centre
            .iter()
            .zip(&n)
            .map(|(c, ni)| c + rho * ni)
            .collect();
        let t = [self.a, self.b]
            .iter()
            .map(|e| e.t() + spatial_distance(&x, e.x()))
            .fold(f64::NEG_INFINITY, f64::max);
        Some(Event::from_parts_unchecked(t, x))
    }

    fn normalise(&self, params: &mut [f64]) {
        params[0] = params[0].clamp(0.0, 1.0);
        match self.dim {
            1 => {}
            2 => params[1] = params[1].rem_euclid(TAU),
            _ => {
                params[1] = params[1].clamp(0.0, PI);
                params[2] = params[2].rem_euclid(TAU);
            }
        }
    }

    /// Pattern search over the cell parameters. With `on_boundary` the
    /// radial parameter stays pinned at infinity.
    fn refine(&self, start: Cell, spacings: &[f64], on_boundary: bool) -> Cell {
        let free: Vec<usize> = (0..spacings.len())
            .filter(|&k| spacings[k] > 0.0 && !(on_boundary && k == 0))
            .collect();
        if free.is_empty() {
            return start;
        }
        let moves = neighbour_offsets(free.len());
        let mut steps: Vec<f64> = free.iter().map(|&k| spacings[k]).collect();
        let mut best = start;
        for _ in 0..4000 {
            if steps.iter().all(|h| *h < 1e-14) {
                break;
            }
            let mut moved = false;
            for offset in &moves {
                let mut params = best.params.clone();
                for ((&k, o), h) in free.iter().zip(offset).zip(&steps) {
                    params[k] += o * h;
                }
                self.normalise(&mut params);
                let value = self.value(&params);
                if value < best.value {
                    best = Cell { params, value };
                    moved = true;
                }
            }
            if !moved {
                steps.iter_mut().for_each(|h| *h *= 0.5);
            }
        }
        best
    }

    fn witness(&self, best: &Cell) -> Event {
        let mut params = best.params.clone();
        if params[0] > 1.0 - 1e-6 || self.value(&params) >= 0.5 * best.value {
            for k in 1..64 {
                params[0] = 1.0 - 0.5f64.powi(k);
                if self.value(&params) < 0.5 * best.value {
                    break;
                }
            }
        }
        let value = self.value(&params);
        match self.point(&params) {
            Some(p) if value < 0.0 => push_into_overlap(&p, value),
            _ => self.a.clone(),
        }
    }
}

fn neighbour_offsets(k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v| {
                [-1.0, 0.0, 1.0].into_iter().map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                })
            })
            .collect();
    }
    out.retain(|v| v.iter().any(|o| *o != 0.0));
    out
}
