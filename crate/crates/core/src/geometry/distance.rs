//! Geodesic distances and balls.
//!
//! Flat charts use the closed-form distance (minimum over periodic images).
//! Warped charts use Dijkstra on a lattice graph whose edges are all offsets
//! `(di, dj)` with `gcd = 1` and `max(|di|, |dj|) <= R`; edge lengths are
//! metric lengths of the chart segments.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::manifold::{DiscreteManifold, Model, Vertex};

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Lattice offsets `(di, dj)` used for the shortest-path graph.
pub fn stencil_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for di in -r..=r {
        for dj in -r..=r {
            if (di, dj) != (0, 0) && gcd(di.unsigned_abs() as usize, dj.unsigned_abs() as usize) == 1 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Worst relative overshoot of the lattice path length over the Euclidean
/// distance, for an isotropic grid and the given stencil radius.
pub fn stencil_overshoot(radius: usize) -> f64 {
    let mut angles: Vec<f64> = stencil_offsets(radius)
        .into_iter()
        .filter(|&(a, b)| a >= 0 && b >= 0)
        .map(|(a, b)| (b as f64).atan2(a as f64))
        .collect();
    angles.sort_by(f64::total_cmp);
    let gap = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    1.0 / (0.5 * gap).cos() - 1.0
}

/// Per-ring edge lengths of the warped-chart graph (independent of θ).
#[derive(Debug, Clone)]
pub(crate) struct EdgeTable {
    offsets: Vec<(i64, i64)>,
    /// `len[ring * offsets.len() + k]`, NaN where the target ring is off-chart.
    len: Vec<f64>,
    pole_len: f64,
}

impl EdgeTable {
    pub(crate) fn build(m: &DiscreteManifold) -> Self {
        let Model::Warped { f, .. } = &m.model else {
            unreachable!("edge table is only built for warped charts")
        };
        let offsets = stencil_offsets(m.spec.distance_stencil);
        let [nr, _] = m.grid;
        let [hr, ht] = m.spacing;
        let mut len = Vec::with_capacity(nr * offsets.len());
        for i in 0..nr {
            let r0 = m.coords[i][0];
            for &(di, dj) in &offsets {
                let target = i as i64 + di;
                if target < 0 || target >= nr as i64 {
                    len.push(f64::NAN);
                    continue;
                }
                let dr = di as f64 * hr;
                let dth = dj as f64 * ht;
                // Simpson over the straight chart segment
                let speed = |s: f64| {
                    let fr = f.eval(r0 + s * dr);
                    (dr * dr + fr * fr * dth * dth).sqrt()
                };
                let panels = 8;
                let h = 1.0 / panels as f64;
                let mut acc = speed(0.0) + speed(1.0);
                for k in 1..panels {
                    acc += if k % 2 == 1 { 4.0 } else { 2.0 } * speed(k as f64 * h);
                }
                len.push(acc * h / 3.0);
            }
        }
        EdgeTable {
            offsets,
            len,
            pole_len: m.coords[0][0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    v: Vertex,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Geodesic ball `B(x, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vertex,
    pub radius: f64,
    /// Sorted vertex indices with `d(center, v) <= radius`.
    pub members: Vec<Vertex>,
    pub volume: f64,
}

impl Ball {
    pub fn contains(&self, v: Vertex) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl DiscreteManifold {
    /// Distances from `src` to every vertex. Entries beyond `cutoff` may be
    /// reported as `INFINITY`.
    pub fn distances_from(&self, src: Vertex, cutoff: Option<f64>) -> Vec<f64> {
        let s = self.length_scale;
        match &self.model {
            Model::Flat { lengths, periodic } => {
                let p = self.coords[src];
                self.coords
                    .iter()
                    .map(|c| {
                        let mut d2 = 0.0;
                        for a in 0..2 {
                            let mut d = (c[a] - p[a]).abs();
                            if periodic[a] {
                                d = d.min(lengths[a] - d);
                            }
                            d2 += d * d;
                        }
                        d2.sqrt() * s
                    })
                    .collect()
            }
            Model::Warped { .. } => {
                let raw = self.dijkstra(src, cutoff.map(|c| c / s), None);
                raw.into_iter().map(|d| d * s).collect()
            }
        }
    }

    pub fn geodesic_distance(&self, x: Vertex, y: Vertex) -> Result<f64> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        if x == y {
            return Ok(0.0);
        }
        Ok(match &self.model {
            Model::Flat { .. } => self.distances_from(x, None)[y],
            Model::Warped { .. } => self.dijkstra(x, None, Some(y))[y] * self.length_scale,
        })
    }

    fn dijkstra(&self, src: Vertex, cutoff: Option<f64>, target: Option<Vertex>) -> Vec<f64> {
        let table = self.edges.as_ref().expect("warped chart has an edge table");
        let [nr, nt] = self.grid;
        let k = table.offsets.len();
        let limit = cutoff.unwrap_or(f64::INFINITY);
        let mut dist = vec![f64::INFINITY; self.num_vertices()];
        let mut done = vec![false; self.num_vertices()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Entry { dist: 0.0, v: src });

        while let Some(Entry { dist: d, v }) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            if Some(v) == target {
                break;
            }
            let mut relax = |u: Vertex, w: f64, heap: &mut BinaryHeap<Entry>| {
                let nd = d + w;
                if nd < dist[u] && nd <= limit {
                    dist[u] = nd;
                    heap.push(Entry { dist: nd, v: u });
                }
            };
            if Some(v) == self.pole {
                for j in 0..nt {
                    relax(j * nr, table.pole_len, &mut heap);
                }
                continue;
            }
            let (i, j) = (v % nr, v / nr);
            if i == 0 {
                if let Some(p) = self.pole {
                    relax(p, table.pole_len, &mut heap);
                }
            }
            for (kk, &(di, dj)) in table.offsets.iter().enumerate() {
                let w = table.len[i * k + kk];
                if w.is_nan() {
                    continue;
                }
                let ti = (i as i64 + di) as usize;
                let tj = (j as i64 + dj).rem_euclid(nt as i64) as usize;
                relax(tj * nr + ti, w, &mut heap);
            }
        }
        dist
    }

    /// Geodesic ball; radii beyond the diameter return every vertex.
    pub fn ball(&self, center: Vertex, radius: f64) -> Result<Ball> {
        self.check_vertex(center)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidSpec(format!("ball radius must be positive, got {radius}")));
        }
        let d = self.distances_from(center, Some(radius));
        Ok(self.ball_from_distances(center, radius, &d))
    }

    pub fn ball_from_distances(&self, center: Vertex, radius: f64, d: &[f64]) -> Ball {
        let members: Vec<Vertex> = (0..self.num_vertices()).filter(|&v| d[v] <= radius).collect();
        let volume = members.iter().map(|&v| self.weights[v]).sum();
        Ball {
            center,
            radius,
            members,
            volume,
        }
    }

    /// Worst relative overshoot of graph distances over true distances.
    pub fn distance_overshoot(&self) -> f64 {
        match self.model {
            Model::Flat { .. } => 0.0,
            Model::Warped { .. } => stencil_overshoot(self.spec.distance_stencil),
        }
    }

    /// Power mean `(⨍_B |f|^p)^{1/p}` with respect to vertex volumes.
    pub fn p_mean(&self, ball: &Ball, field: &[f64], p: f64) -> Result<f64> {
        if ball.is_empty() || ball.volume <= 0.0 {
            return Err(Error::EmptyBall);
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidSpec(format!("p-mean needs p >= 1, got {p}")));
        }
        let max = ball
            .members
            .iter()
            .map(|&v| field[v].abs())
            .fold(0.0, f64::max);
        if max == 0.0 {
            return Ok(0.0);
        }
        // normalize by the max to keep |f|^p in range
        let acc: f64 = ball
            .members
            .iter()
            .map(|&v| self.weights[v] * (field[v].abs() / max).powf(p))
            .sum();
        Ok(max * (acc / ball.volume).powf(1.0 / p))
    }

    /// Whether `B(center, radius)` stays clear of a non-periodic chart edge.
    pub fn ball_inside_chart(&self, ball: &Ball) -> bool {
        let [n1, _] = self.grid;
        match &self.model {
            Model::Flat { periodic, .. } => {
                let [n1, n2] = self.grid;
                ball.members.iter().all(|&v| {
                    let (i, j) = (v % n1, v / n1);
                    (periodic[0] || (i > 0 && i + 1 < n1)) && (periodic[1] || (j > 0 && j + 1 < n2))
                })
            }
            Model::Warped { cap, .. } => ball.members.iter().all(|&v| {
                if Some(v) == self.pole {
                    return true;
                }
                let i = v % n1;
                (i > 0 || *cap) && i + 1 < n1
            }),
        }
    }
}

/// Angle helper for warped charts.
pub fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldSpec;
    use approx::assert_relative_eq;

    fn unit_torus(n: usize) -> DiscreteManifold {
        DiscreteManifold::build(&ManifoldSpec::flat_torus(1.0, 1.0, n, n)).unwrap()
    }

    #[test]
    fn torus_distances() {
        let m = unit_torus(64);
        let o = m.nearest_vertex([0.0, 0.0]);
        let a = m.nearest_vertex([0.5, 0.0]);
        let b = m.nearest_vertex([0.75, 0.0]);
        assert_relative_eq!(m.geodesic_distance(o, a).unwrap(), 0.5);
        assert_relative_eq!(m.geodesic_distance(o, b).unwrap(), 0.25);
        assert_eq!(m.geodesic_distance(o, o).unwrap(), 0.0);
        assert!(m.geodesic_distance(o, 99999).is_err());
    }

    #[test]
    fn graph_distance_on_flat_polar_chart() {
        // f = r on an annulus: straight lines in the plane
        let m = DiscreteManifold::build(&ManifoldSpec::warped("r", 0.5, 1.5, 64, 256)).unwrap();
        let x = m.nearest_vertex([1.0, 0.0]);
        let y = m.nearest_vertex([1.0, 0.6]);
        let [r1, t1] = m.coords(x);
        let [r2, t2] = m.coords(y);
        let exact = (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * (t2 - t1).cos()).sqrt();
        let d = m.geodesic_distance(x, y).unwrap();
        assert!(d >= exact * (1.0 - 1e-9));
        assert!(d <= exact * (1.0 + stencil_overshoot(3) + 0.01), "{d} vs {exact}");
    }

    #[test]
    fn eight_neighbour_overshoot_is_about_eight_percent() {
        let o = stencil_overshoot(1);
        assert_relative_eq!(o, 1.0 / (PI / 8.0).cos() - 1.0, max_relative = 1e-12);
        assert!(o < 0.083);
        assert!(stencil_overshoot(3) < 0.014);
    }

    #[test]
    fn saturated_ball_is_everything() {
        let m = unit_torus(16);
        let b = m.ball(0, 10.0).unwrap();
        assert_eq!(b.len(), 256);
        assert_relative_eq!(b.volume, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn collapsed_torus_ball_is_a_strip() {
        let m = DiscreteManifold::build(&ManifoldSpec::flat_torus(0.05, 1.0, 8, 160)).unwrap();
        let b = m.ball(0, 0.25).unwrap();
        assert_relative_eq!(b.volume, 2.0 * 0.25 * 0.05, max_relative = 0.05);
    }

    #[test]
    fn pole_distances_are_radial() {
        let m = DiscreteManifold::build(&ManifoldSpec::warped_disk("sinh(r)", 2.0, 40, 32)).unwrap();
        let p = m.pole().unwrap();
        let d = m.distances_from(p, None);
        for v in 0..m.num_vertices() {
            assert_relative_eq!(d[v], m.coords(v)[0], max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn p_mean_examples() {
        let m = unit_torus(32);
        let b = m.ball(0, 0.3).unwrap();
        let c = vec![3.5; m.num_vertices()];
        for p in [1.0, 2.0, 7.5] {
            assert_relative_eq!(m.p_mean(&b, &c, p).unwrap(), 3.5, max_relative = 1e-14);
        }
        // indicator of exactly half the members (equal weights)
        let mut ind = vec![0.0; m.num_vertices()];
        let half = b.len() / 2;
        let mut members = b.members.clone();
        members.truncate(2 * half);
        let b2 = Ball {
            volume: members.iter().map(|&v| m.weight(v)).sum(),
            members: members.clone(),
            ..b.clone()
        };
        members.iter().take(half).for_each(|&v| ind[v] = 1.0);
        assert_relative_eq!(m.p_mean(&b2, &ind, 1.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(m.p_mean(&b2, &ind, 2.0).unwrap(), 0.5f64.sqrt(), max_relative = 1e-14);

        let empty = Ball {
            center: 0,
            radius: 0.1,
            members: vec![],
            volume: 0.0,
        };
        assert!(matches!(m.p_mean(&empty, &c, 1.0), Err(Error::EmptyBall)));
    }
}
