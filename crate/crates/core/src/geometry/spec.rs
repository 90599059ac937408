use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

fn both_periodic() -> [bool; 2] {
    [true, true]
}

fn two() -> usize {
    2
}

fn default_stencil() -> usize {
    3
}

/// Analytic model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    /// Flat metric `dx² + dy²` on `[0, L₁) × [0, L₂)`. Axes flagged
    /// non-periodic are truncated with a closed (no-flux) boundary.
    FlatTorus {
        side_lengths_length: [f64; 2],
        #[serde(default = "both_periodic")]
        periodic: [bool; 2],
    },
    /// `dr² + f(r)² dθ²` on `[r_min, r_max] × [0, 2π)`. With `cap` the chart
    /// starts at the pole `r = 0`, which is closed by a single vertex.
    WarpedProduct {
        warp: String,
        r_min_length: f64,
        r_max_length: f64,
        #[serde(default)]
        cap: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    #[serde(flatten)]
    pub kind: ManifoldKind,
    /// Grid counts per chart axis: `(x, y)` or `(r, θ)`.
    pub resolution: [usize; 2],
    #[serde(default = "two")]
    pub dimension: usize,
    /// Largest lattice offset used by the shortest-path distance on
    /// warped charts. 1 gives the 8-neighbour graph.
    #[serde(default = "default_stencil")]
    pub distance_stencil: usize,
}

impl ManifoldSpec {
    pub fn flat_torus(l1: f64, l2: f64, n1: usize, n2: usize) -> Self {
        ManifoldSpec {
            kind: ManifoldKind::FlatTorus {
                side_lengths_length: [l1, l2],
                periodic: [true, true],
            },
            resolution: [n1, n2],
            dimension: 2,
            distance_stencil: default_stencil(),
        }
    }

    /// Flat rectangle with closed boundaries on both axes.
    pub fn flat_rect(l1: f64, l2: f64, n1: usize, n2: usize) -> Self {
        let mut s = Self::flat_torus(l1, l2, n1, n2);
        if let ManifoldKind::FlatTorus { periodic, .. } = &mut s.kind {
            *periodic = [false, false];
        }
        s
    }

    pub fn warped(warp: &str, r_min: f64, r_max: f64, n_r: usize, n_theta: usize) -> Self {
        ManifoldSpec {
            kind: ManifoldKind::WarpedProduct {
                warp: warp.to_string(),
                r_min_length: r_min,
                r_max_length: r_max,
                cap: false,
            },
            resolution: [n_r, n_theta],
            dimension: 2,
            distance_stencil: default_stencil(),
        }
    }

    /// Warped product on a disk `[0, r_max]` closed at the pole.
    pub fn warped_disk(warp: &str, r_max: f64, n_r: usize, n_theta: usize) -> Self {
        let mut s = Self::warped(warp, 0.0, r_max, n_r, n_theta);
        if let ManifoldKind::WarpedProduct { cap, .. } = &mut s.kind {
            *cap = true;
        }
        s
    }

    pub fn with_resolution(&self, n1: usize, n2: usize) -> Self {
        let mut s = self.clone();
        s.resolution = [n1, n2];
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.resolution.iter().any(|&n| n < 8) {
            return bad(format!("grid counts must be >= 8, got {:?}", self.resolution));
        }
        if self.dimension != 2 {
            return bad(format!(
                "only 2-dimensional charts are discretized, got n = {}",
                self.dimension
            ));
        }
        if self.distance_stencil == 0 {
            return bad("distance_stencil must be >= 1".into());
        }
        match &self.kind {
            ManifoldKind::FlatTorus {
                side_lengths_length: l,
                ..
            } => {
                if !(l[0] > 0.0 && l[1] > 0.0) || !l.iter().all(|x| x.is_finite()) {
                    return bad(format!("side lengths must be positive, got {l:?}"));
                }
            }
            ManifoldKind::WarpedProduct {
                warp,
                r_min_length,
                r_max_length,
                cap,
            } => {
                Expr::parse(warp)?;
                if !(r_max_length > r_min_length) || *r_min_length < 0.0 {
                    return bad(format!(
                        "need 0 <= r_min < r_max, got [{r_min_length}, {r_max_length}]"
                    ));
                }
                if *cap && *r_min_length != 0.0 {
                    return bad("a capped chart must start at r_min = 0".into());
                }
                if !*cap && *r_min_length == 0.0 {
                    return bad("r_min = 0 requires the pole cap".into());
                }
            }
        }
        Ok(())
    }
}
