//! Probability simplex intersected with up to two linear moment caps.
//!
//! Both the Euclidean projection and the linear minimization oracle exploit
//! the small number of caps: a projection is the solution of an
//! equality-constrained problem for one of at most four active cap sets,
//! and every vertex of the polytope has at most `1 + caps` nonzero entries.

use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed when testing membership.
pub const SET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    /// Simplex with mean and electrical power caps.
    Optical,
    /// Simplex with an electrical power cap.
    Rf,
    /// Plain simplex.
    Simplex,
}

/// `coeffs · p ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearCap {
    pub coeffs: Vec<f64>,
    pub bound: f64,
}

impl LinearCap {
    fn value(&self, p: &[f64]) -> f64 {
        dot(&self.coeffs, p)
    }

    fn holds(&self, p: &[f64], tol: f64) -> bool {
        self.value(p) <= self.bound + tol * self.bound.abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleSet {
    kind: SetKind,
    dim: usize,
    caps: Vec<LinearCap>,
}

impl FeasibleSet {
    /// Set for nonnegative amplitudes `points` under mean and power caps.
    pub fn optical(points: &[f64], mean_cap: f64, elec_cap: f64) -> Result<Self> {
        let caps = vec![
            LinearCap {
                coeffs: points.to_vec(),
                bound: mean_cap,
            },
            LinearCap {
                coeffs: points.iter().map(|x| x * x).collect(),
                bound: elec_cap,
            },
        ];
        Self::build(SetKind::Optical, points.len(), caps)
    }

    /// Set for complex `points` under a power cap.
    pub fn rf(points: &[num_complex::Complex64], elec_cap: f64) -> Result<Self> {
        let caps = vec![LinearCap {
            coeffs: points.iter().map(|x| x.norm_sqr()).collect(),
            bound: elec_cap,
        }];
        Self::build(SetKind::Rf, points.len(), caps)
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        Self::build(SetKind::Simplex, dim, Vec::new())
    }

    /// Simplex with arbitrary caps (at most two).
    pub fn with_caps(dim: usize, caps: Vec<LinearCap>) -> Result<Self> {
        Self::build(SetKind::Simplex, dim, caps)
    }

    fn build(kind: SetKind, dim: usize, caps: Vec<LinearCap>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InfeasibleSet("zero-dimensional simplex".into()));
        }
        if caps.len() > 2 {
            return Err(Error::Domain("at most two caps are supported".into()));
        }
        for cap in &caps {
            if cap.coeffs.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: cap.coeffs.len(),
                });
            }
            if cap.coeffs.iter().any(|c| !c.is_finite()) || !cap.bound.is_finite() {
                return Err(Error::Domain("cap coefficients must be finite".into()));
            }
        }
        let set = FeasibleSet { kind, dim, caps };
        if set.lp_vertex(&vec![0.0; dim]).is_err() {
            return Err(Error::InfeasibleSet(
                "caps lie below the smallest attainable moments".into(),
            ));
        }
        Ok(set)
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn caps(&self) -> &[LinearCap] {
        &self.caps
    }

    /// Membership test with relative slack `tol`.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim
            && p.iter().all(|v| *v >= -tol)
            && (p.iter().sum::<f64>() - 1.0).abs() <= tol
            && self.caps.iter().all(|c| c.holds(p, tol))
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("cannot project a non-finite vector".into()));
        }
        if self.contains(x, 1e-14) {
            return Ok(x.to_vec());
        }

        let n_caps = self.caps.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut fallback: Option<(f64, Vec<f64>)> = None;
        for mask in 0..(1usize << n_caps) {
            let active: Vec<&LinearCap> = (0..n_caps)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| &self.caps[j])
                .collect();
            let Some((p, theta)) = project_affine(x, &active) else {
                continue;
            };
            if !self.contains(&p, 1e-10) {
                continue;
            }
            let dist = dist_sqr(&p, x);
            let kkt = theta[1..].iter().all(|t| *t >= -1e-10);
            let slot = if kkt { &mut best } else { &mut fallback };
            if slot.as_ref().is_none_or(|(d, _)| dist < *d) {
                *slot = Some((dist, p));
            }
        }
        best.or(fallback)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::InfeasibleSet("projection found no feasible point".into()))
    }

    /// Vertex minimizing `c · p`; ties go to the vertex found first in
    /// (support size, lexicographic index) order.
    pub fn lp_vertex(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: c.len(),
            });
        }
        let n = self.dim;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut offer = |p: Vec<f64>| {
            let v = dot(c, &p);
            if best.as_ref().is_none_or(|(b, _)| v < *b - 1e-12 * b.abs().max(1.0)) {
                best = Some((v, p));
            }
        };

        for i in 0..n {
            let mut p = vec![0.0; n];
            p[i] = 1.0;
            if self.caps.iter().all(|cap| cap.holds(&p, 1e-12)) {
                offer(p);
            }
        }
        // one active cap, two nonzero entries
        for i in 0..n {
            for j in (i + 1)..n {
                for (t, cap) in self.caps.iter().enumerate() {
                    let (ai, aj) = (cap.coeffs[i], cap.coeffs[j]);
                    let den = ai - aj;
                    if den.abs() <= 1e-14 * ai.abs().max(aj.abs()).max(1e-300) {
                        continue;
                    }
                    let pi = (cap.bound - aj) / den;
                    if !(pi > 0.0 && pi < 1.0) {
                        continue;
                    }
                    let mut p = vec![0.0; n];
                    p[i] = pi;
                    p[j] = 1.0 - pi;
                    let others_ok = self.caps.iter().enumerate().all(|(s, o)| s == t || o.holds(&p, 1e-12));
                    if others_ok {
                        offer(p);
                    }
                }
            }
        }
        // both caps active, three nonzero entries
        if self.caps.len() == 2 {
            let (a, b) = (&self.caps[0], &self.caps[1]);
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        let m = [
                            [1.0, 1.0, 1.0],
                            [a.coeffs[i], a.coeffs[j], a.coeffs[k]],
                            [b.coeffs[i], b.coeffs[j], b.coeffs[k]],
                        ];
                        let Some(sol) = solve3(m, [1.0, a.bound, b.bound]) else {
                            continue;
                        };
                        if sol.iter().any(|v| !(*v > 0.0)) {
                            continue;
                        }
                        let mut p = vec![0.0; n];
                        p[i] = sol[0];
                        p[j] = sol[1];
                        p[k] = sol[2];
                        offer(p);
                    }
                }
            }
        }
        best.map(|(_, p)| p)
            .ok_or_else(|| Error::InfeasibleSet("polytope has no vertex".into()))
    }
}

/// Projection onto `{p ≥ 0, Σp = 1, a·p = b for each active cap}`.
///
/// Maximizes the concave dual `q(θ) = ½‖x‖² − θ·r − ½‖max(0, x − Rθ)‖²`
/// with a damped semismooth Newton method. Returns the primal point and
/// the multipliers (first entry belongs to the sum constraint).
fn project_affine(x: &[f64], active: &[&LinearCap]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let k = 1 + active.len();
    let coeff = |j: usize, i: usize| if j == 0 { 1.0 } else { active[j - 1].coeffs[i] };
    let rhs: Vec<f64> = std::iter::once(1.0).chain(active.iter().map(|c| c.bound)).collect();

    let primal = |theta: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let shift: f64 = (0..k).map(|j| theta[j] * coeff(j, i)).sum();
                (x[i] - shift).max(0.0)
            })
            .collect()
    };
    let residual = |p: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|j| (0..n).map(|i| coeff(j, i) * p[i]).sum::<f64>() - rhs[j])
            .collect()
    };
    let dual = |theta: &[f64], p: &[f64]| -> f64 { -dot(theta, &rhs) - 0.5 * p.iter().map(|v| v * v).sum::<f64>() };
    let scale: f64 = 1.0 + rhs.iter().map(|r| r.abs()).fold(0.0, f64::max);

    let mut theta = vec![0.0; k];
    theta[0] = simplex_threshold(x);
    let mut p = primal(&theta);
    let mut f = residual(&p);
    for _ in 0..200 {
        if f.iter().all(|v| v.abs() <= 1e-14 * scale) {
            return Some((p, theta));
        }
        let mut h = vec![vec![0.0; k]; k];
        for i in (0..n).filter(|&i| p[i] > 0.0) {
            for (a, row) in h.iter_mut().enumerate() {
                for (b, cell) in row.iter_mut().enumerate() {
                    *cell += coeff(a, i) * coeff(b, i);
                }
            }
        }
        let trace: f64 = (0..k).map(|a| h[a][a]).sum();
        let ridge = 1e-12 * trace.max(1e-300);
        for (a, row) in h.iter_mut().enumerate() {
            row[a] += ridge;
        }
        let d = solve_small(h, f.clone())?;
        let slope = dot(&f, &d);
        if !(slope > 0.0) {
            return None;
        }
        let q0 = dual(&theta, &p);
        let f0 = norm(&f);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let pt = primal(&trial);
            // near the solution the dual gain drops below rounding, so a
            // shrinking residual is accepted as well
            if dual(&trial, &pt) >= q0 + 1e-4 * t * slope || norm(&residual(&pt)) <= (1.0 - 1e-4 * t) * f0 {
                theta = trial;
                p = pt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        f = residual(&p);
    }
    f.iter().all(|v| v.abs() <= 1e-10 * scale).then_some((p, theta))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Threshold `t` with `Σ max(0, x_i − t) = 1`.
fn simplex_threshold(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut t = sorted[0] - 1.0;
    for (i, v) in sorted.iter().enumerate() {
        cumsum += v;
        let cand = (cumsum - 1.0) / (i + 1) as f64;
        if *v > cand {
            t = cand;
        } else {
            break;
        }
    }
    t
}

/// Euclidean projection onto the plain probability simplex.
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let t = simplex_threshold(x);
    x.iter().map(|v| (v - t).max(0.0)).collect()
}

#[allow(clippy::needless_range_loop)]
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let size: f64 = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if d.abs() <= 1e-12 * size.powi(3).max(1e-300) {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][c] = r[row];
        }
        *slot = det(&mc) / d;
    }
    Some(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sqr(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Projection onto `set`.
pub fn project_feasible(p: &[f64], set: &FeasibleSet) -> Result<Vec<f64>> {
    set.project(p)
}
