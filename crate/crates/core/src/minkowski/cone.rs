//! Containment of a two-cone overlap inside a third future cone.
//!
//! The slack `f_j(p) = (t_p - t_j) - |x_p - x_j|` never decreases along a
//! future-causal ray, and every point of `J+(a) ∩ J+(b)` sits on such a ray
//! from a minimal point of the overlap. In 1+1 dimensions the minimal point
//! is the light-cone join of `a` and `b`; with more spatial dimensions it is
//! the ridge of events lightlike to both apexes. Minimising the slack over
//! that set decides containment.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{check_dimensions, future_slack, Event, GeometryError, SLACK_TOLERANCE};

/// Number of ridge directions sampled before local refinement.
pub const RIDGE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeContainmentVerdict {
    pub holds: bool,
    /// An event inside both measurement cones and strictly outside the
    /// jammer's cone; present iff `holds` is false.
    pub witness: Option<Event>,
    /// Infimum of the slack over the overlap. Values in `[-ε, 0)` still count
    /// as holding.
    pub margin: f64,
}

impl ConeContainmentVerdict {
    pub(crate) fn from_margin(margin: f64, witness: impl FnOnce() -> Event) -> Self {
        let holds = margin >= -SLACK_TOLERANCE;
        ConeContainmentVerdict {
            holds,
            witness: if holds { None } else { Some(witness()) },
            margin,
        }
    }
}

/// Nudges a point of the overlap with negative slack `slack` forward in time
/// so it sits strictly inside both measurement cones while staying strictly
/// outside the jammer's cone.
pub(crate) fn push_into_overlap(p: &Event, slack: f64) -> Event {
    debug_assert!(slack < 0.0);
    let delta = (-0.5 * slack).min(1e-3 * (1.0 + p.t().abs()));
    p.delayed(delta)
}

/// Earliest event `w` with `J+(a) ∩ J+(b) = J+(w)` in 1+1 dimensions.
pub fn cone_join_1p1(a: &Event, b: &Event) -> Result<Event, GeometryError> {
    let (ua, va) = a.light_cone_coordinates()?;
    let (ub, vb) = b.light_cone_coordinates()?;
    let u = ua.max(ub);
    let v = va.max(vb);
    Ok(Event::from_parts_unchecked(
        0.5 * (u + v),
        vec![0.5 * (u - v)],
    ))
}

/// Decides whether `J+(a) ∩ J+(b) ⊆ J+(j)` (closed cones).
pub fn binary_condition(
    a: &Event,
    b: &Event,
    j: &Event,
) -> Result<ConeContainmentVerdict, GeometryError> {
    let d = check_dimensions(&[a, b, j])?;
    if d == 1 {
        let w = cone_join_1p1(a, b)?;
        let margin = future_slack(j, &w);
        return Ok(ConeContainmentVerdict::from_margin(margin, || {
            push_into_overlap(&w, margin)
        }));
    }
    match Ridge::new(a, b, j) {
        None => {
            // One apex lies in the other's closed future cone, so the overlap
            // is the later apex's cone.
            let apex = later_apex(a, b);
            let margin = future_slack(j, apex);
            Ok(ConeContainmentVerdict::from_margin(margin, || {
                push_into_overlap(apex, margin)
            }))
        }
        Some(ridge) => {
            let best = ridge.minimise(RIDGE_SAMPLES);
            Ok(ConeContainmentVerdict::from_margin(best.value, || {
                ridge.witness(&best)
            }))
        }
    }
}

/// Cheap upper bound on the containment margin from a coarse ridge scan.
/// A value below `-ε` proves the condition fails.
pub(crate) fn ridge_slack_probe(
    a: &Event,
    b: &Event,
    j: &Event,
    samples: usize,
) -> Result<f64, GeometryError> {
    let d = check_dimensions(&[a, b, j])?;
    if d == 1 {
        return Ok(future_slack(j, &cone_join_1p1(a, b)?));
    }
    Ok(match Ridge::new(a, b, j) {
        None => future_slack(j, later_apex(a, b)),
        Some(ridge) => ridge.coarse_min(samples),
    })
}

fn later_apex<'e>(a: &'e Event, b: &'e Event) -> &'e Event {
    if a.t() >= b.t() {
        a
    } else {
        b
    }
}

type Vec3 = [f64; 3];

fn pad(x: &[f64]) -> Vec3 {
    let mut out = [0.0; 3];
    out[..x.len()].copy_from_slice(x);
    out
}

fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[derive(Debug, Clone, Copy)]
struct RidgePoint {
    psi: f64,
    phi: f64,
    value: f64,
}

/// The ridge `{p : p - a and p - b both future null}` of two spacelike
/// separated apexes, parameterised by the spatial direction `m` of `p - a`.
///
/// For direction `m` the ridge point is `a + r (1, m)` with
/// `r = N / (2 D)`, `N = |Δx|² - Δt²`, `D = Δt - m·Δx` (Δ = a - b). Only
/// directions with `D > 0` reach the ridge; `ψ`, the angle between `m` and
/// `Δx`, must exceed `β = acos(Δt / |Δx|)`. At `ψ = β` the ridge runs off
/// to infinity and the slack tends to a finite limit, which is included.
struct Ridge {
    dim: usize,
    a_t: f64,
    a_x: Vec3,
    axis: Vec3,
    perp: [Vec3; 2],
    ab_dt: f64,
    ab_dist: f64,
    ab_interval: f64,
    beta: f64,
    // a relative to j
    tau: f64,
    delta: Vec3,
    s_aj: f64,
}

impl Ridge {
    /// `None` when the apexes are not spacelike separated.
    fn new(a: &Event, b: &Event, j: &Event) -> Option<Ridge> {
        let dim = a.dimension();
        let a_x = pad(a.x());
        let b_x = pad(b.x());
        let dx: Vec3 = [a_x[0] - b_x[0], a_x[1] - b_x[1], a_x[2] - b_x[2]];
        let ab_dt = a.t() - b.t();
        let ab_dist = norm3(&dx);
        let ab_interval = ab_dist * ab_dist - ab_dt * ab_dt;
        if ab_interval <= 0.0 || ab_dist == 0.0 {
            return None;
        }
        let axis = [dx[0] / ab_dist, dx[1] / ab_dist, dx[2] / ab_dist];
        let perp = if dim == 2 {
            [[-axis[1], axis[0], 0.0], [0.0; 3]]
        } else {
            // Any helper axis not parallel to `axis`.
            let helper = if axis[0].abs() < 0.6 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let e1 = cross(&axis, &helper);
            let n1 = norm3(&e1);
            let e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
            let e2 = cross(&axis, &e1);
            [e1, e2]
        };
        let beta = (ab_dt / ab_dist).clamp(-1.0, 1.0).acos();
        let j_x = pad(j.x());
        let delta = [a_x[0] - j_x[0], a_x[1] - j_x[1], a_x[2] - j_x[2]];
        let tau = a.t() - j.t();
        Some(Ridge {
            dim,
            a_t: a.t(),
            a_x,
            axis,
            perp,
            ab_dt,
            ab_dist,
            ab_interval,
            beta,
            tau,
            delta,
            s_aj: tau * tau - dot3(&delta, &delta),
        })
    }

    fn psi_range(&self) -> (f64, f64) {
        if self.dim == 2 {
            (self.beta, TAU - self.beta)
        } else {
            (self.beta, PI)
        }
    }

    fn direction(&self, psi: f64, phi: f64) -> Vec3 {
        let (s, c) = psi.sin_cos();
        let (sp, cp) = if self.dim == 2 {
            (0.0, 1.0)
        } else {
            phi.sin_cos()
        };
        let mut m = [0.0; 3];
        for (k, mk) in m.iter_mut().enumerate() {
            *mk = c * self.axis[k] + s * (cp * self.perp[0][k] + sp * self.perp[1][k]);
        }
        m
    }

    /// Inverse ridge distance `1 / r`; zero at the asymptotic edge.
    fn inverse_reach(&self, psi: f64) -> f64 {
        let d = self.ab_dt - self.ab_dist * psi.cos();
        (2.0 * d / self.ab_interval).max(0.0)
    }

    fn slack(&self, psi: f64, phi: f64) -> f64 {
        let m = self.direction(psi, phi);
        let q = self.inverse_reach(psi);
        // (A - B) = (A^2 - B^2) / (A + B), scaled by q = 1/r so the r -> inf
        // limit is finite.
        let dq: Vec3 = [
            self.delta[0] * q + m[0],
            self.delta[1] * q + m[1],
            self.delta[2] * q + m[2],
        ];
        let den = self.tau * q + 1.0 + norm3(&dq);
        if den > 0.25 {
            (self.s_aj * q + 2.0 * (self.tau - dot3(&m, &self.delta))) / den
        } else {
            let r = 1.0 / q;
            let along: Vec3 = [
                self.delta[0] + r * m[0],
                self.delta[1] + r * m[1],
                self.delta[2] + r * m[2],
            ];
            (self.tau + r) - norm3(&along)
        }
    }

    fn point(&self, psi: f64, phi: f64) -> Option<Event> {
        let q = self.inverse_reach(psi);
        if q <= 0.0 {
            return None;
        }
        let r = 1.0 / q;
        let m = self.direction(psi, phi);
        let x = (0..self.dim).map(|k| self.a_x[k] + r * m[k]).collect();
        Some(Event::from_parts_unchecked(self.a_t + r, x))
    }

    fn clamp_psi(&self, psi: f64) -> f64 {
        let (lo, hi) = self.psi_range();
        psi.clamp(lo, hi)
    }

    fn coarse_min(&self, samples: usize) -> f64 {
        self.grid(samples.max(4))
            .into_iter()
            .map(|p| p.value)
            .fold(f64::INFINITY, f64::min)
    }

    fn grid(&self, samples: usize) -> Vec<RidgePoint> {
        let (lo, hi) = self.psi_range();
        if self.dim == 2 {
            (0..=samples)
                .map(|k| {
                    let psi = lo + (hi - lo) * k as f64 / samples as f64;
                    RidgePoint {
                        psi,
                        phi: 0.0,
                        value: self.slack(psi, 0.0),
                    }
                })
                .collect()
        } else {
            let side = (samples as f64).sqrt().ceil() as usize;
            let mut out = Vec::with_capacity((side + 1) * side);
            for i in 0..=side {
                let psi = lo + (hi - lo) * i as f64 / side as f64;
                for k in 0..side {
                    let phi = TAU * k as f64 / side as f64;
                    out.push(RidgePoint {
                        psi,
                        phi,
                        value: self.slack(psi, phi),
                    });
                }
            }
            out
        }
    }

    fn minimise(&self, samples: usize) -> RidgePoint {
        let grid = self.grid(samples);
        let (lo, hi) = self.psi_range();
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&i, &k| grid[i].value.total_cmp(&grid[k].value));
        let mut best = grid[order[0]];
        if self.dim == 2 {
            let h = (hi - lo) / samples as f64;
            for &i in order.iter().take(3) {
                let c = grid[i];
                let refined = self.golden(c.psi - h, c.psi + h);
                if refined.value < best.value {
                    best = refined;
                }
            }
        } else {
            let side = (samples as f64).sqrt().ceil();
            let steps = ((hi - lo) / side, TAU / side);
            for &i in order.iter().take(3) {
                let refined = self.pattern_search(grid[i], steps);
                if refined.value < best.value {
                    best = refined;
                }
            }
        }
        best
    }

    fn golden(&self, lo: f64, hi: f64) -> RidgePoint {
        let (mut lo, mut hi) = (self.clamp_psi(lo), self.clamp_psi(hi));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let mut f1 = self.slack(x1, 0.0);
        let mut f2 = self.slack(x2, 0.0);
        for _ in 0..80 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = self.slack(x1, 0.0);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = self.slack(x2, 0.0);
            }
        }
        // Ends of the bracket may sit on the asymptotic edge.
        [
            (x1, f1),
            (x2, f2),
            (lo, self.slack(lo, 0.0)),
            (hi, self.slack(hi, 0.0)),
        ]
        .into_iter()
        .map(|(psi, value)| RidgePoint {
            psi,
            phi: 0.0,
            value,
        })
        .min_by(|p, q| p.value.total_cmp(&q.value))
        .expect("non-empty")
    }

    fn pattern_search(&self, start: RidgePoint, steps: (f64, f64)) -> RidgePoint {
        let mut best = start;
        let (mut hp, mut hf) = steps;
        let dirs: [(f64, f64); 8] = [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (-1.0, -1.0),
        ];
        for _ in 0..2000 {
            if hp < 1e-14 && hf < 1e-14 {
                break;
            }
            let mut moved = false;
            for (dp, df) in dirs {
                let psi = self.clamp_psi(best.psi + dp * hp);
                let phi = (best.phi + df * hf).rem_euclid(TAU);
                let value = self.slack(psi, phi);
                if value < best.value {
                    best = RidgePoint { psi, phi, value };
                    moved = true;
                }
            }
            if !moved {
                hp *= 0.5;
                hf *= 0.5;
            }
        }
        best
    }

    /// A finite event of the overlap strictly outside `J+(j)`, for a ridge
    /// minimum with negative slack.
    fn witness(&self, best: &RidgePoint) -> Event {
        // Ridge points with r beyond this are too far out to verify in f64.
        const MAX_REACH: f64 = 1e6;
        let target = best.value;
        let usable = |psi: f64| {
            self.inverse_reach(psi) * MAX_REACH > 1.0 && self.slack(psi, best.phi) < 0.5 * target
        };
        let mut psi = best.psi;
        if !usable(psi) {
            // The minimum sits at (or near) the asymptotic edge: back off to
            // the nearest ridge point that is both finite and clearly negative.
            let (lo, hi) = self.psi_range();
            let mut h = (hi - lo) / 64.0;
            'search: for _ in 0..200 {
                for sign in [1.0, -1.0] {
                    let candidate = self.clamp_psi(best.psi + sign * h);
                    if usable(candidate) {
                        psi = candidate;
                        break 'search;
                    }
                }
                h *= 0.5;
            }
        }
        let value = self.slack(psi, best.phi);
        match self.point(psi, best.phi) {
            Some(p) if value < 0.0 => push_into_overlap(&p, value),
            // Not reachable for a negative limit; keep a sensible event.
            _ => Event::from_parts_unchecked(self.a_t, self.a_x[..self.dim].to_vec()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_witness(a: &Event, b: &Event, j: &Event, v: &ConeContainmentVerdict) {
        let w = v.witness.as_ref().expect("witness");
        assert!(future_slack(a, w) > 0.0, "witness outside J+(a): {w:?}");
        assert!(future_slack(b, w) > 0.0, "witness outside J+(b): {w:?}");
        assert!(future_slack(j, w) < 0.0, "witness inside J+(j): {w:?}");
    }

    #[test]
    fn join_examples() {
        let a = Event::line(0.0, -1.0);
        assert_eq!(cone_join_1p1(&a, &a).unwrap(), a);
        assert_eq!(
            cone_join_1p1(&a, &Event::line(0.0, 1.0)).unwrap(),
            Event::line(1.0, 0.0)
        );
        assert_eq!(
            cone_join_1p1(&a, &Event::line(0.0, 10.0)).unwrap(),
            Event::line(5.5, 4.5)
        );
        assert!(cone_join_1p1(&Event::plane(0.0, 0.0, 0.0), &a).is_err());
    }

    #[test]
    fn fig1_configurations_in_one_dimension() {
        let a = Event::line(0.0, -1.0);
        let b = Event::line(0.0, 1.0);

        let allowed = binary_condition(&a, &b, &Event::line(-1.0, 0.0)).unwrap();
        assert!(allowed.holds);
        assert_eq!(allowed.margin, 2.0);
        assert!(allowed.witness.is_none());

        let far = Event::line(0.0, 10.0);
        let forbidden = binary_condition(&a, &b, &far).unwrap();
        assert!(!forbidden.holds);
        assert_eq!(forbidden.margin, -9.0);
        assert_witness(&a, &b, &far, &forbidden);

        let j = Event::line(0.5, -1.0);
        let bob = Event::line(0.0, 10.0);
        let selective = binary_condition(&a, &bob, &j).unwrap();
        assert!(!selective.holds);
        assert_eq!(selective.margin, -0.5);
        assert_witness(&a, &bob, &j, &selective);
    }

    #[test]
    fn degenerate_apexes() {
        // a inside J+(b): the overlap is J+(a).
        let a = Event::plane(3.0, 0.0, 0.0);
        let b = Event::plane(0.0, 1.0, 0.0);
        let j = Event::plane(1.0, 0.0, 0.0);
        let v = binary_condition(&a, &b, &j).unwrap();
        assert!(v.holds);
        assert_eq!(v.margin, 2.0);

        let late_j = Event::plane(4.0, 0.0, 0.0);
        let v = binary_condition(&a, &b, &late_j).unwrap();
        assert!(!v.holds);
        assert_witness(&a, &b, &late_j, &v);

        let same = binary_condition(&a, &a, &a).unwrap();
        assert!(same.holds);
        assert_eq!(same.margin, 0.0);
    }

    #[test]
    fn symmetric_plane_configuration_is_asymptotic() {
        // The ridge is the hyperbola (sqrt(1 + s^2), 0, s); slack against
        // j = (-1, 0, 0) is sqrt(1 + s^2) - |s| + 1, infimum 1 at infinity.
        let a = Event::plane(0.0, -1.0, 0.0);
        let b = Event::plane(0.0, 1.0, 0.0);
        let v = binary_condition(&a, &b, &Event::plane(-1.0, 0.0, 0.0)).unwrap();
        assert!(v.holds);
        assert!((v.margin - 1.0).abs() < 1e-12, "{}", v.margin);

        // With j = (0.5, 0, 0) the slack is +0.5 at the ridge apex but tends
        // to -0.5 far along the ridge.
        let late = Event::plane(0.5, 0.0, 0.0);
        let v = binary_condition(&a, &b, &late).unwrap();
        assert!(!v.holds);
        assert!((v.margin + 0.5).abs() < 1e-12, "{}", v.margin);
        assert_witness(&a, &b, &late, &v);
    }

    #[test]
    fn three_dimensional_symmetric_configuration() {
        let a = Event::space(0.0, -1.0, 0.0, 0.0);
        let b = Event::space(0.0, 1.0, 0.0, 0.0);
        let v = binary_condition(&a, &b, &Event::space(-1.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(v.holds);
        assert!((v.margin - 1.0).abs() < 1e-9, "{}", v.margin);
        let off = Event::space(-1.0, 0.0, 0.0, 1.5);
        let v = binary_condition(&a, &b, &off).unwrap();
        // Along the ridge direction towards +z the slack tends to -1 + 1 - 1.5.
        assert!(!v.holds);
        assert!((v.margin + 0.5).abs() < 1e-9, "{}", v.margin);
        assert_witness(&a, &b, &off, &v);
    }

    #[test]
    fn probe_bounds_margin_from_above() {
        let a = Event::plane(0.3, -1.2, 0.4);
        let b = Event::plane(-0.2, 1.1, -0.7);
        let j = Event::plane(-0.9, 0.5, 0.2);
        let exact = binary_condition(&a, &b, &j).unwrap().margin;
        let probe = ridge_slack_probe(&a, &b, &j, 32).unwrap();
        assert!(probe >= exact - 1e-12);
    }
}
