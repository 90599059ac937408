use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::sparse::SymmetricCsr;

use super::spec::{ManifoldKind, ManifoldSpec};

/// Vertex index into a [`DiscreteManifold`].
pub type Vertex = usize;

#[derive(Debug, Clone)]
pub(crate) enum Model {
    Flat {
        lengths: [f64; 2],
        periodic: [bool; 2],
    },
    Warped {
        f: Expr,
        f2: Expr,
        cap: bool,
    },
}

/// Centered (or one-sided at a chart edge) difference along one axis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisDiff {
    pub minus: Vertex,
    pub plus: Vertex,
    pub span: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum GradStencil {
    Axes([AxisDiff; 2]),
    /// Least-squares fit over the first ring around the pole.
    Pole { ring: Vec<Vertex>, radius: f64 },
}

/// Structured-grid discretization of a model surface.
///
/// The Laplace-Beltrami operator is `Δ = W⁻¹ L` where `W` holds the vertex
/// volumes and `L` is the symmetric finite-volume stiffness matrix with
/// non-negative off-diagonal entries and zero row sums.
#[derive(Debug, Clone)]
pub struct DiscreteManifold {
    pub(crate) spec: ManifoldSpec,
    pub(crate) model: Model,
    pub(crate) grid: [usize; 2],
    pub(crate) spacing: [f64; 2],
    pub(crate) coords: Vec<[f64; 2]>,
    pub(crate) weights: Vec<f64>,
    pub(crate) inv_metric: Vec<[f64; 2]>,
    pub(crate) stiffness: SymmetricCsr,
    pub(crate) grad: Vec<GradStencil>,
    pub(crate) pole: Option<Vertex>,
    /// Factor `s` such that the metric is `s² g` for the built `g`.
    pub(crate) length_scale: f64,
    pub(crate) edges: Option<super::distance::EdgeTable>,
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1) * 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

impl DiscreteManifold {
    pub fn build(spec: &ManifoldSpec) -> Result<Self> {
        spec.validate()?;
        match &spec.kind {
            ManifoldKind::FlatTorus {
                side_lengths_length,
                periodic,
            } => Ok(Self::build_flat(spec, *side_lengths_length, *periodic)),
            ManifoldKind::WarpedProduct {
                warp,
                r_min_length,
                r_max_length,
                cap,
            } => Self::build_warped(spec, warp, *r_min_length, *r_max_length, *cap),
        }
    }

    fn build_flat(spec: &ManifoldSpec, lengths: [f64; 2], periodic: [bool; 2]) -> Self {
        let [n1, n2] = spec.resolution;
        let h = [lengths[0] / n1 as f64, lengths[1] / n2 as f64];
        let idx = |i: usize, j: usize| j * n1 + i;
        let pos = |a: usize, k: usize| {
            if periodic[a] {
                k as f64 * h[a]
            } else {
                (k as f64 + 0.5) * h[a]
            }
        };
        let n = n1 * n2;
        let mut coords = Vec::with_capacity(n);
        for j in 0..n2 {
            for i in 0..n1 {
                coords.push([pos(0, i), pos(1, j)]);
            }
        }
        let weights = vec![h[0] * h[1]; n];
        let inv_metric = vec![[1.0, 1.0]; n];
        let trans = [h[1] / h[0], h[0] / h[1]];

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(5); n];
        let mut connect = |a: usize, b: usize, t: f64| {
            rows[a].push((b, t));
            rows[b].push((a, t));
            rows[a].push((a, -t));
            rows[b].push((b, -t));
        };
        for j in 0..n2 {
            for i in 0..n1 {
                if i + 1 < n1 {
                    connect(idx(i, j), idx(i + 1, j), trans[0]);
                } else if periodic[0] {
                    connect(idx(i, j), idx(0, j), trans[0]);
                }
                if j + 1 < n2 {
                    connect(idx(i, j), idx(i, j + 1), trans[1]);
                } else if periodic[1] {
                    connect(idx(i, j), idx(i, 0), trans[1]);
                }
            }
        }
        let stiffness = SymmetricCsr::from_rows(rows);

        let axis_diff = |v_i: usize, v_j: usize, a: usize| -> AxisDiff {
            let (k, nk) = if a == 0 { (v_i, n1) } else { (v_j, n2) };
            let at = |kk: usize| if a == 0 { idx(kk, v_j) } else { idx(v_i, kk) };
            let here = at(k);
            if periodic[a] {
                AxisDiff {
                    minus: at((k + nk - 1) % nk),
                    plus: at((k + 1) % nk),
                    span: 2.0 * h[a],
                }
            } else if k == 0 {
                AxisDiff {
                    minus: here,
                    plus: at(1),
                    span: h[a],
                }
            } else if k + 1 == nk {
                AxisDiff {
                    minus: at(k - 1),
                    plus: here,
                    span: h[a],
                }
            } else {
                AxisDiff {
                    minus: at(k - 1),
                    plus: at(k + 1),
                    span: 2.0 * h[a],
                }
            }
        };
        let mut grad = Vec::with_capacity(n);
        for j in 0..n2 {
            for i in 0..n1 {
                grad.push(GradStencil::Axes([axis_diff(i, j, 0), axis_diff(i, j, 1)]));
            }
        }

        DiscreteManifold {
            spec: spec.clone(),
            model: Model::Flat { lengths, periodic },
            grid: [n1, n2],
            spacing: h,
            coords,
            weights,
            inv_metric,
            stiffness,
            grad,
            pole: None,
            length_scale: 1.0,
            edges: None,
        }
    }

    fn build_warped(
        spec: &ManifoldSpec,
        warp: &str,
        r_min: f64,
        r_max: f64,
        cap: bool,
    ) -> Result<Self> {
        let f = Expr::parse(warp)?;
        let f2 = f.derivative().derivative();
        let [nr, nt] = spec.resolution;
        let ht = 2.0 * PI / nt as f64;
        // Capped charts put ring k at (k+1)h with a half cell around the pole.
        let hr = if cap {
            r_max / (nr as f64 + 0.5)
        } else {
            (r_max - r_min) / nr as f64
        };
        let ring_r = |k: usize| {
            if cap {
                (k as f64 + 1.0) * hr
            } else {
                r_min + (k as f64 + 0.5) * hr
            }
        };
        let positive = |r: f64| -> Result<f64> {
            let v = f.eval(r);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonPositiveWarp { r, value: v })
            }
        };

        let idx = |i: usize, j: usize| j * nr + i;
        let n = nr * nt + usize::from(cap);
        let pole = cap.then_some(nr * nt);

        let mut f_ring = Vec::with_capacity(nr);
        for k in 0..nr {
            f_ring.push(positive(ring_r(k))?);
        }
        let mut f_face = Vec::with_capacity(nr);
        for k in 0..nr.saturating_sub(1) {
            f_face.push(positive(ring_r(k) + 0.5 * hr)?);
        }

        let mut coords = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut inv_metric = Vec::with_capacity(n);
        for j in 0..nt {
            for i in 0..nr {
                coords.push([ring_r(i), j as f64 * ht]);
                weights.push(f_ring[i] * hr * ht);
                inv_metric.push([1.0, 1.0 / (f_ring[i] * f_ring[i])]);
            }
        }
        let mut pole_face = 0.0;
        if cap {
            for k in 1..=8 {
                positive(0.5 * hr * k as f64 / 8.0)?;
            }
            pole_face = positive(0.5 * hr)?;
            coords.push([0.0, 0.0]);
            weights.push(2.0 * PI * simpson(|r| f.eval(r), 0.0, 0.5 * hr, 8));
            inv_metric.push([1.0, 1.0]);
        }

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(5); n];
        let mut connect = |a: usize, b: usize, t: f64| {
            rows[a].push((b, t));
            rows[b].push((a, t));
            rows[a].push((a, -t));
            rows[b].push((b, -t));
        };
        for j in 0..nt {
            for i in 0..nr {
                if i + 1 < nr {
                    connect(idx(i, j), idx(i + 1, j), f_face[i] * ht / hr);
                }
                connect(idx(i, j), idx(i, (j + 1) % nt), hr / (f_ring[i] * ht));
            }
            if let Some(p) = pole {
                connect(p, idx(0, j), pole_face * ht / hr);
            }
        }
        let stiffness = SymmetricCsr::from_rows(rows);

        let mut grad = Vec::with_capacity(n);
        for j in 0..nt {
            for i in 0..nr {
                let radial = if i == 0 && cap {
                    AxisDiff {
                        minus: pole.unwrap(),
                        plus: idx(1, j),
                        span: 2.0 * hr,
                    }
                } else if i == 0 {
                    AxisDiff {
                        minus: idx(0, j),
                        plus: idx(1, j),
                        span: hr,
                    }
                } else if i + 1 == nr {
                    AxisDiff {
                        minus: idx(i - 1, j),
                        plus: idx(i, j),
                        span: hr,
                    }
                } else {
                    AxisDiff {
                        minus: idx(i - 1, j),
                        plus: idx(i + 1, j),
                        span: 2.0 * hr,
                    }
                };
                let angular = AxisDiff {
                    minus: idx(i, (j + nt - 1) % nt),
                    plus: idx(i, (j + 1) % nt),
                    span: 2.0 * ht,
                };
                grad.push(GradStencil::Axes([radial, angular]));
            }
        }
        if cap {
            grad.push(GradStencil::Pole {
                ring: (0..nt).map(|j| idx(0, j)).collect(),
                radius: hr,
            });
        }

        let mut m = DiscreteManifold {
            spec: spec.clone(),
            model: Model::Warped { f, f2, cap },
            grid: [nr, nt],
            spacing: [hr, ht],
            coords,
            weights,
            inv_metric,
            stiffness,
            grad,
            pole,
            length_scale: 1.0,
            edges: None,
        };
        m.edges = Some(super::distance::EdgeTable::build(&m));
        Ok(m)
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn num_vertices(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, v: Vertex) -> f64 {
        self.weights[v]
    }

    pub fn total_volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Chart coordinates of a vertex: `(x, y)` or `(r, θ)`.
    pub fn coords(&self, v: Vertex) -> [f64; 2] {
        self.coords[v]
    }

    pub fn grid(&self) -> [usize; 2] {
        self.grid
    }

    /// Chart spacing per axis.
    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// Representative metric edge length of the grid, in length units.
    pub fn mesh_size(&self) -> f64 {
        self.spacing[0] * self.length_scale
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn pole(&self) -> Option<Vertex> {
        self.pole
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.model, Model::Flat { .. })
    }

    pub fn stiffness(&self) -> &SymmetricCsr {
        &self.stiffness
    }

    pub fn check_vertex(&self, v: Vertex) -> Result<()> {
        if v < self.num_vertices() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(v))
        }
    }

    /// Vertex whose chart coordinates are closest to `p` (chart metric,
    /// wrapping periodic axes).
    pub fn nearest_vertex(&self, p: [f64; 2]) -> Vertex {
        let period = match &self.model {
            Model::Flat { lengths, periodic } => [
                periodic[0].then_some(lengths[0]),
                periodic[1].then_some(lengths[1]),
            ],
            Model::Warped { .. } => [None, Some(2.0 * PI)],
        };
        let gap = |a: f64, b: f64, per: Option<f64>| {
            per.map_or((a - b).abs(), |l| {
                let d = (a - b).rem_euclid(l);
                d.min(l - d)
            })
        };
        let mut best = (f64::INFINITY, 0);
        for (v, c) in self.coords.iter().enumerate() {
            let (dx, dy) = (gap(c[0], p[0], period[0]), gap(c[1], p[1], period[1]));
            let d = match self.model {
                Model::Warped { .. } => {
                    // compare in the polar embedding so the pole is reachable
                    let (x0, y0) = (c[0] * c[1].cos(), c[0] * c[1].sin());
                    let (x1, y1) = (p[0] * p[1].cos(), p[0] * p[1].sin());
                    (x0 - x1).hypot(y0 - y1)
                }
                Model::Flat { .. } => dx.hypot(dy),
            };
            if d < best.0 {
                best = (d, v);
            }
        }
        best.1
    }

    /// Returns a copy with metric `s² g`: volumes scale by `sⁿ`, lengths by
    /// `s`, the Laplacian by `s⁻²`.
    pub fn rescaled(&self, s: f64) -> DiscreteManifold {
        let mut m = self.clone();
        let s2 = s * s;
        m.weights.iter_mut().for_each(|w| *w *= s2);
        m.inv_metric.iter_mut().for_each(|g| {
            g[0] /= s2;
            g[1] /= s2;
        });
        m.length_scale *= s;
        m
    }

    /// `(Δf)(v) = W⁻¹ L f`.
    pub fn apply_laplacian(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        self.stiffness.mul_vec(field, &mut out);
        out.iter_mut()
            .zip(&self.weights)
            .for_each(|(o, w)| *o /= w);
        out
    }

    pub fn laplacian_at(&self, field: &[f64], v: Vertex) -> f64 {
        self.stiffness.row(v).map(|(j, t)| t * field[j]).sum::<f64>() / self.weights[v]
    }

    /// `|∇f|²` at a vertex from centered metric-aware differences.
    pub fn grad_sq_at(&self, field: &[f64], v: Vertex) -> f64 {
        match &self.grad[v] {
            GradStencil::Axes(axes) => axes
                .iter()
                .zip(self.inv_metric[v])
                .map(|(d, g)| {
                    let df = (field[d.plus] - field[d.minus]) / d.span;
                    g * df * df
                })
                .sum(),
            GradStencil::Pole { ring, radius } => {
                let nt = ring.len() as f64;
                let (mut gx, mut gy) = (0.0, 0.0);
                for &u in ring {
                    let th = self.coords[u][1];
                    let du = field[u] - field[v];
                    gx += du * th.cos();
                    gy += du * th.sin();
                }
                let scale = 2.0 / (nt * radius);
                (gx * scale).powi(2) * self.inv_metric[v][0]
                    + (gy * scale).powi(2) * self.inv_metric[v][1]
            }
        }
    }

    pub fn grad_sq(&self, field: &[f64]) -> Vec<f64> {
        (0..self.num_vertices())
            .map(|v| self.grad_sq_at(field, v))
            .collect()
    }

    /// `⟨f, g⟩ = Σ w f g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Analytic total area of the chart, for discretization checks.
    pub fn analytic_volume(&self) -> f64 {
        let s2 = self.length_scale * self.length_scale;
        match (&self.model, &self.spec.kind) {
            (Model::Flat { lengths, .. }, _) => lengths[0] * lengths[1] * s2,
            (
                Model::Warped { f, .. },
                ManifoldKind::WarpedProduct {
                    r_min_length,
                    r_max_length,
                    ..
                },
            ) => 2.0 * PI * simpson(|r| f.eval(r), *r_min_length, *r_max_length, 2000) * s2,
            _ => unreachable!(),
        }
    }

    pub(crate) fn warp(&self) -> Option<(&Expr, &Expr)> {
        match &self.model {
            Model::Warped { f, f2, .. } => Some((f, f2)),
            Model::Flat { .. } => None,
        }
    }

    /// Vertices with a stiffness neighbour outside `members`.
    pub fn frontier(&self, members: &[Vertex]) -> Vec<Vertex> {
        let mut inside = vec![false; self.num_vertices()];
        members.iter().for_each(|&v| inside[v] = true);
        members
            .iter()
            .copied()
            .filter(|&v| self.stiffness.row(v).any(|(j, _)| !inside[j]))
            .collect()
    }
}
