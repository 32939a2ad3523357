//! From a 2.5D wireframe to camera-space 3D.
//!
//! The camera is calibrated from the three orthogonal vanishing points, each
//! edge is assigned to the vanishing point it points at, and the junction
//! depths are refined by the convex program
//!
//! ```text
//! minimize   Σ_i Σ_{(u,v) ∈ A_i} ‖(z_u ū − z_v v̄) × d_i‖ + λ_R Σ_v (z_v − α z̃_v)²
//! subject to z_v ≥ 1,   λ z_u + (1 − λ) z_v ≤ z_w  for each T-junction w on (u, v)
//! ```
//!
//! where `ū = K⁻¹[u_x, u_y, 1]ᵀ` and `d_i` is the unit calibrated direction of
//! vanishing point `i`. The solver is ADMM on the splitting `y_e = B_e x`,
//! `s = G x ≤ h`, followed by an active-set polish and a KKT check.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{calibrated_ray, CameraModel, VanishingPoints};
use crate::error::{Error, Result};
use crate::geom;
use crate::vectorize::find_attachments;
use crate::wireframe::Wireframe;

/// Camera from three mutually orthogonal vanishing points.
///
/// With `ω ∝ K⁻ᵀK⁻¹ = [[1, 0, a], [0, 1, b], [a, b, c]]` the three
/// orthogonality constraints `v_iᵀ ω v_j = 0` are linear in `(a, b, c)`; the
/// principal point is `(−a, −b)` and `f² = c − a² − b²`. A point at infinity
/// is stored as the zero vector and has lost its direction; if one is, the principal point is taken as the
/// image center and the focal length comes from the two finite ones.
pub fn calibrate_from_vps(vps: &VanishingPoints, image_size: (u32, u32)) -> Result<CameraModel> {
    let h: Vec<Vector3<f64>> = (0..3).map(|i| vps.homogeneous_unit(i)).collect();
    if h.iter().any(|v| v.norm_squared() == 0.0) {
        return calibrate_centered(vps, image_size);
    }
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut m = nalgebra::Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (row, &(i, j)) in pairs.iter().enumerate() {
        let (p, q) = (h[i], h[j]);
        m[(row, 0)] = p.x * q.z + p.z * q.x;
        m[(row, 1)] = p.y * q.z + p.z * q.y;
        m[(row, 2)] = p.z * q.z;
        rhs[row] = -(p.x * q.x + p.y * q.y);
    }
    let sv = m.singular_values();
    if !(sv.min() > 1e-12 * sv.max()) {
        return Err(Error::DegenerateVps("vanishing points are collinear".into()));
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateVps("singular calibration system".into()))?;
    let (a, b, c) = (sol.x, sol.y, sol.z);
    let f2 = c - a * a - b * b;
    if f2 <= 0.0 || !f2.is_finite() {
        return Err(Error::NegativeFocalSquared(f2));
    }
    Ok(CameraModel::new(f2.sqrt(), [-a, -b], image_size))
}

fn calibrate_centered(vps: &VanishingPoints, image_size: (u32, u32)) -> Result<CameraModel> {
    let finite: Vec<[f64; 2]> = (0..3).filter_map(|i| vps.pixel(i)).collect();
    if finite.len() < 2 {
        return Err(Error::DegenerateVps(
            "fewer than two finite vanishing points".into(),
        ));
    }
    let pp = [image_size.0 as f64 / 2.0, image_size.1 as f64 / 2.0];
    let f2 = -geom::dot(geom::sub(finite[0], pp), geom::sub(finite[1], pp));
    if f2 <= 0.0 || !f2.is_finite() {
        return Err(Error::NegativeFocalSquared(f2));
    }
    Ok(CameraModel::new(f2.sqrt(), pp, image_size))
}

/// Unit calibrated directions of the three vanishing points. A point at
/// infinity has lost its direction in the normalized encoding and is
/// recovered as orthogonal to the other two.
pub fn vp_directions(vps: &VanishingPoints, cam: &CameraModel) -> Result<[Vector3<f64>; 3]> {
    let d: Vec<Option<Vector3<f64>>> = (0..3).map(|i| vps.calibrated_direction(i, cam)).collect();
    let missing: Vec<usize> = (0..3).filter(|&i| d[i].is_none()).collect();
    match missing.as_slice() {
        [] => Ok([d[0].unwrap(), d[1].unwrap(), d[2].unwrap()]),
        [m] => {
            let others: Vec<Vector3<f64>> = d.iter().flatten().copied().collect();
            let mut out = [Vector3::zeros(); 3];
            let mut k = 0;
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = if i == *m {
                    others[0].cross(&others[1]).normalize()
                } else {
                    k += 1;
                    others[k - 1]
                };
            }
            Ok(out)
        }
        _ => Err(Error::DegenerateVps(
            "fewer than two finite vanishing points".into(),
        )),
    }
}

/// Edge-to-vanishing-point assignment.
///
/// Each edge `(u, w)` goes to the finite vanishing point `V_i` with the
/// smallest parallelogram area `|(u − V_i) × (u − w)|`, ties to the lower
/// index. It is left unassigned when the angle between `u − V_i` and `u − w`
/// exceeds `max_angle_deg`.
pub fn assign_lines(wf: &Wireframe, vps: &VanishingPoints, max_angle_deg: f64) -> Vec<Option<usize>> {
    let sin_max = max_angle_deg.to_radians().sin();
    let pix: Vec<Option<[f64; 2]>> = (0..3).map(|i| vps.pixel(i)).collect();
    wf.edges
        .iter()
        .map(|&[a, b]| {
            let u = wf.vertices[a].xy;
            let w = wf.vertices[b].xy;
            let uw = geom::sub(u, w);
            let mut best: Option<(f64, usize, f64)> = None;
            for (i, v) in pix.iter().enumerate() {
                let Some(v) = v else { continue };
                let uv = geom::sub(u, *v);
                let area = geom::cross(uv, uw).abs();
                if best.is_none_or(|(ba, _, _)| area < ba) {
                    best = Some((area, i, geom::norm(uv)));
                }
            }
            let (area, i, nuv) = best?;
            (area <= sin_max * nuv * geom::norm(uw)).then_some(i)
        })
        .collect()
}

/// `λ·z_u + (1 − λ)·z_v ≤ z_w` for T-junction `w` on the edge `line = [u, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TConstraint {
    pub vertex: usize,
    pub line: [usize; 2],
    pub lambda: f64,
}

/// Tolerance (px) on `w = λu + (1 − λ)v` for a T-constraint.
pub const T_GEOMETRY_TOL_PX: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LiftProblem {
    /// Image-space wireframe; every vertex carries its initial depth `z̃`.
    pub wireframe: Wireframe,
    pub camera: CameraModel,
    /// Unit calibrated direction per vanishing point.
    pub directions: [Vector3<f64>; 3],
    pub assignment: Vec<Option<usize>>,
    pub t_constraints: Vec<TConstraint>,
    pub lambda_r: f64,
}

impl LiftProblem {
    /// Checks the problem invariants.
    pub fn check(&self) -> Result<()> {
        let wf = &self.wireframe;
        let n = wf.vertices.len();
        if self.assignment.len() != wf.edges.len() {
            return Err(Error::InvalidParams(
                "assignment length differs from edge count".into(),
            ));
        }
        if self.assignment.iter().flatten().any(|&i| i > 2) {
            return Err(Error::InvalidParams("vanishing point index > 2".into()));
        }
        if !(self.lambda_r > 0.0 && self.lambda_r.is_finite()) {
            return Err(Error::InvalidParams("lambda_r must be positive".into()));
        }
        for (i, v) in wf.vertices.iter().enumerate() {
            match v.depth {
                None => return Err(Error::MissingDepth(i)),
                Some(z) if !(z > 0.0 && z.is_finite()) => return Err(Error::NonPositiveDepth(i)),
                _ => {}
            }
        }
        for t in &self.t_constraints {
            let [u, v] = t.line;
            if t.vertex >= n || u >= n || v >= n {
                return Err(Error::InvalidParams("T-constraint index out of range".into()));
            }
            if !(t.lambda > 0.0 && t.lambda < 1.0) {
                return Err(Error::InvalidParams("T-constraint lambda outside (0, 1)".into()));
            }
            let p = geom::lerp(wf.vertices[v].xy, wf.vertices[u].xy, t.lambda);
            if geom::dist(p, wf.vertices[t.vertex].xy) > T_GEOMETRY_TOL_PX {
                return Err(Error::InvalidParams(format!(
                    "T-junction {} is not on its line",
                    t.vertex
                )));
            }
        }
        Ok(())
    }

    fn initial_depths(&self) -> Vec<f64> {
        self.wireframe.vertices.iter().map(|v| v.depth.unwrap()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub max_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub rho: f64,
    /// Number of independently initialized runs compared for certification.
    pub restarts: usize,
    /// Allowed objective spread across restarts, relative to `max(|f|, 1)`.
    pub restart_tol: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            rho: 1.0,
            restarts: 3,
            restart_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftSolution {
    pub depths: Vec<f64>,
    pub alpha: f64,
    pub objective: f64,
    /// ADMM iterations of the best run.
    pub iterations: usize,
    /// Stopping criteria met and the KKT conditions verified at the polished point.
    pub converged: bool,
    pub restart_objectives: Vec<f64>,
}

/// Sparse row of a linear map: `Σ coef · x[idx]`.
type Row = Vec<(usize, f64)>;

/// The program in the variables `x = (z_0 … z_{n−1}, α)`.
struct Program {
    n: usize,
    zt: Vec<f64>,
    lambda_r: f64,
    /// Per assigned edge: `B_e x = a z_u + b z_v`.
    terms: Vec<(usize, usize, Vector3<f64>, Vector3<f64>)>,
    /// `G x ≤ h`.
    g: Vec<Row>,
    h: Vec<f64>,
}

impl Program {
    fn new(p: &LiftProblem) -> Self {
        let wf = &p.wireframe;
        let n = wf.vertices.len();
        let rays: Vec<Vector3<f64>> = wf
            .vertices
            .iter()
            .map(|v| calibrated_ray(&p.camera, v.xy))
            .collect();
        let terms = wf
            .edges
            .iter()
            .zip(&p.assignment)
            .filter_map(|(&[u, v], a)| {
                let d = p.directions[(*a)?];
                Some((u, v, rays[u].cross(&d), -rays[v].cross(&d)))
            })
            .collect();
        let mut g: Vec<Row> = (0..n).map(|v| vec![(v, -1.0)]).collect();
        let mut h = vec![-1.0; n];
        for t in &p.t_constraints {
            let [u, v] = t.line;
            g.push(vec![(u, t.lambda), (v, 1.0 - t.lambda), (t.vertex, -1.0)]);
            h.push(0.0);
        }
        Self {
            n,
            zt: p.initial_depths(),
            lambda_r: p.lambda_r,
            terms,
            g,
            h,
        }
    }

    fn dim(&self) -> usize {
        self.n + 1
    }

    fn residual(&self, e: usize, x: &[f64]) -> Vector3<f64> {
        let (u, v, a, b) = &self.terms[e];
        a * x[*u] + b * x[*v]
    }

    fn term1(&self, x: &[f64]) -> f64 {
        (0..self.terms.len()).map(|e| self.residual(e, x).norm()).sum()
    }

    fn regularizer(&self, x: &[f64]) -> f64 {
        let alpha = x[self.n];
        self.lambda_r
            * (0..self.n)
                .map(|v| (x[v] - alpha * self.zt[v]).powi(2))
                .sum::<f64>()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.term1(x) + self.regularizer(x)
    }

    fn g_row(&self, k: usize, x: &[f64]) -> f64 {
        self.g[k].iter().map(|&(i, c)| c * x[i]).sum()
    }

    /// Largest constraint violation.
    fn violation(&self, x: &[f64]) -> f64 {
        (0..self.g.len())
            .map(|k| self.g_row(k, x) - self.h[k])
            .fold(0.0, f64::max)
    }

    /// Hessian of the regularizer, `2 λ_R DᵀD` with `D = [I | −z̃]`.
    fn reg_hessian(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        let s = 2.0 * self.lambda_r;
        for v in 0..n {
            m[(v, v)] += s;
            m[(v, n)] -= s * self.zt[v];
            m[(n, v)] -= s * self.zt[v];
            m[(n, n)] += s * self.zt[v] * self.zt[v];
        }
        m
    }

    fn reg_gradient(&self, x: &[f64]) -> DVector<f64> {
        let n = self.n;
        let alpha = x[n];
        let mut g = DVector::zeros(n + 1);
        for v in 0..n {
            let r = x[v] - alpha * self.zt[v];
            g[v] += 2.0 * self.lambda_r * r;
            g[n] -= 2.0 * self.lambda_r * r * self.zt[v];
        }
        g
    }

    /// `BᵀB + GᵀG`.
    fn gram(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (u, v, a, b) in &self.terms {
            m[(*u, *u)] += a.dot(a);
            m[(*v, *v)] += b.dot(b);
            m[(*u, *v)] += a.dot(b);
            m[(*v, *u)] += a.dot(b);
        }
        for row in &self.g {
            for &(i, ci) in row {
                for &(j, cj) in row {
                    m[(i, j)] += ci * cj;
                }
            }
        }
        m
    }

    /// Raises depths until every constraint holds: `z ≥ 1`, then each
    /// T-junction is pushed behind its line until nothing moves.
    fn make_feasible(&self, x: &mut [f64], ts: &[TConstraint]) {
        for z in x.iter_mut().take(self.n) {
            *z = z.max(1.0);
        }
        for _ in 0..=ts.len() {
            let mut moved = false;
            for t in ts {
                let [u, v] = t.line;
                let need = t.lambda * x[u] + (1.0 - t.lambda) * x[v];
                if x[t.vertex] < need {
                    x[t.vertex] = need;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }
}

struct AdmmRun {
    x: Vec<f64>,
    /// Which terms the prox put exactly at zero.
    zero_terms: Vec<bool>,
    /// Constraints held at their bound by the projection.
    active: Vec<bool>,
    iterations: usize,
    converged: bool,
}

fn admm(prog: &Program, x0: &[f64], params: &SolverParams) -> Result<AdmmRun> {
    let dim = prog.dim();
    let ne = prog.terms.len();
    let m = prog.g.len();
    let hreg = prog.reg_hessian();
    let gram = prog.gram();
    let mut rho = params.rho;
    let factor = |rho: f64| {
        (&hreg + &gram * rho)
            .cholesky()
            .ok_or_else(|| Error::NonConvergence("ADMM system is not positive definite".into()))
    };
    let mut chol = factor(rho)?;

    let mut x = x0.to_vec();
    let mut y: Vec<Vector3<f64>> = (0..ne).map(|e| prog.residual(e, &x)).collect();
    let mut u = vec![Vector3::zeros(); ne];
    let mut s: Vec<f64> = (0..m).map(|k| prog.g_row(k, &x).min(prog.h[k])).collect();
    let mut w = vec![0.0; m];
    let mut converged = false;
    let mut it = 0;

    while it < params.max_iter {
        it += 1;
        // x-update
        let mut rhs = DVector::<f64>::zeros(dim);
        for (e, (iu, iv, a, b)) in prog.terms.iter().enumerate() {
            let t = y[e] - u[e];
            rhs[*iu] += a.dot(&t);
            rhs[*iv] += b.dot(&t);
        }
        for (k, row) in prog.g.iter().enumerate() {
            let t = s[k] - w[k];
            for &(i, c) in row {
                rhs[i] += c * t;
            }
        }
        rhs *= rho;
        let xs = chol.solve(&rhs);
        x.copy_from_slice(xs.as_slice());

        // y-, s- and dual updates
        let mut r2 = 0.0;
        let mut ax2 = 0.0;
        let mut yz2 = 0.0;
        let mut dual = DVector::<f64>::zeros(dim);
        for e in 0..ne {
            let bx = prog.residual(e, &x);
            let v = bx + u[e];
            let nv = v.norm();
            let ynew = if nv * rho <= 1.0 {
                Vector3::zeros()
            } else {
                v * (1.0 - 1.0 / (rho * nv))
            };
            let dy = ynew - y[e];
            let (iu, iv, a, b) = &prog.terms[e];
            dual[*iu] += a.dot(&dy);
            dual[*iv] += b.dot(&dy);
            y[e] = ynew;
            u[e] += bx - ynew;
            r2 += (bx - ynew).norm_squared();
            ax2 += bx.norm_squared();
            yz2 += ynew.norm_squared();
        }
        for k in 0..m {
            let gx = prog.g_row(k, &x);
            let snew = (gx + w[k]).min(prog.h[k]);
            let ds = snew - s[k];
            for &(i, c) in &prog.g[k] {
                dual[i] += c * ds;
            }
            s[k] = snew;
            w[k] += gx - snew;
            r2 += (gx - snew).powi(2);
            ax2 += gx * gx;
            yz2 += snew * snew;
        }
        let r = r2.sqrt();
        let d = rho * dual.norm();
        let p = (3 * ne + m) as f64;
        let eps_pri = params.abs_tol * p.sqrt() + params.rel_tol * ax2.sqrt().max(yz2.sqrt());
        let dual_scale = {
            let mut aty = DVector::<f64>::zeros(dim);
            for (e, (iu, iv, a, b)) in prog.terms.iter().enumerate() {
                aty[*iu] += a.dot(&u[e]);
                aty[*iv] += b.dot(&u[e]);
            }
            for (k, row) in prog.g.iter().enumerate() {
                for &(i, c) in row {
                    aty[i] += c * w[k];
                }
            }
            rho * aty.norm()
        };
        let eps_dual = params.abs_tol * (dim as f64).sqrt() + params.rel_tol * dual_scale;
        if r <= eps_pri && d <= eps_dual {
            converged = true;
            break;
        }
        if it % 50 == 0 {
            let scale = if r > 10.0 * d {
                2.0
            } else if d > 10.0 * r {
                0.5
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                for ue in &mut u {
                    *ue /= scale;
                }
                for wk in &mut w {
                    *wk /= scale;
                }
                chol = factor(rho)?;
            }
        }
    }

    let zero_terms = y.iter().map(|v| *v == Vector3::zeros()).collect();
    let active = (0..m).map(|k| s[k] >= prog.h[k]).collect();
    Ok(AdmmRun {
        x,
        zero_terms,
        active,
        iterations: it,
        converged,
    })
}

/// Orthonormal basis of the null space of `c` (columns), by SVD.
fn null_space(c: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if c.nrows() == 0 {
        return DMatrix::identity(dim, dim);
    }
    // pad to square so the SVD returns a full right basis
    let rows = c.nrows().max(dim);
    let mut a = DMatrix::zeros(rows, dim);
    a.rows_mut(0, c.nrows()).copy_from(c);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let tol = smax.max(1.0) * 1e-10 * dim as f64;
    let keep: Vec<usize> = (0..dim).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut n = DMatrix::zeros(dim, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        n.set_column(j, &vt.row(i).transpose());
    }
    n
}

/// Re-solves with the zero terms and active constraints fixed as equalities,
/// using Newton's method on the remaining smooth problem.
fn polish(prog: &Program, run: &AdmmRun) -> Option<Vec<f64>> {
    let dim = prog.dim();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (e, (u, v, a, b)) in prog.terms.iter().enumerate() {
        if !run.zero_terms[e] {
            continue;
        }
        for c in 0..3 {
            let mut r = DVector::<f64>::zeros(dim);
            r[*u] = a[c];
            r[*v] = b[c];
            rows.push(r);
            rhs.push(0.0);
        }
    }
    for (k, row) in prog.g.iter().enumerate() {
        if run.active[k] {
            let mut r = DVector::<f64>::zeros(dim);
            for &(i, c) in row {
                r[i] += c;
            }
            rows.push(r);
            rhs.push(prog.h[k]);
        }
    }
    let c = if rows.is_empty() {
        DMatrix::zeros(0, dim)
    } else {
        DMatrix::from_rows(&rows.iter().map(|r| r.transpose()).collect::<Vec<_>>())
    };
    let x_admm = DVector::from_column_slice(&run.x);
    // nearest point to the ADMM iterate on the affine set
    let x_p = if rows.is_empty() {
        x_admm.clone()
    } else {
        let d = DVector::from_vec(rhs) - &c * &x_admm;
        let svd = c.clone().svd(true, true);
        let dx = svd.solve(&d, 1e-12).ok()?;
        &x_admm + dx
    };
    let nb = null_space(&c, dim);
    let k = nb.ncols();
    let smooth: Vec<usize> = (0..prog.terms.len()).filter(|&e| !run.zero_terms[e]).collect();
    let f = |x: &DVector<f64>| -> f64 {
        let xs = x.as_slice();
        smooth.iter().map(|&e| prog.residual(e, xs).norm()).sum::<f64>() + prog.regularizer(xs)
    };

    let mut x = x_p;
    if k > 0 {
        let hreg = prog.reg_hessian();
        for _ in 0..100 {
            let xs = x.as_slice().to_vec();
            let mut grad = prog.reg_gradient(&xs);
            let mut hess = hreg.clone();
            for &e in &smooth {
                let (u, v, a, b) = &prog.terms[e];
                let r = prog.residual(e, &xs);
                let nr = r.norm();
                if nr < 1e-300 {
                    continue;
                }
                let q = r / nr;
                grad[*u] += a.dot(&q);
                grad[*v] += b.dot(&q);
                // (I − q qᵀ) / ‖r‖ pulled back through B_e
                let cols = [(*u, a), (*v, b)];
                for &(i, ai) in &cols {
                    for &(j, aj) in &cols {
                        hess[(i, j)] += (ai.dot(aj) - ai.dot(&q) * aj.dot(&q)) / nr;
                    }
                }
            }
            let gr = nb.transpose() * &grad;
            let hr = nb.transpose() * &hess * &nb;
            let step = match hr.clone().cholesky() {
                Some(ch) => ch.solve(&gr),
                None => {
                    let svd = hr.svd(true, true);
                    svd.solve(&gr, 1e-14).ok()?
                }
            };
            let decrement = gr.dot(&step);
            if !(decrement.is_finite()) || decrement <= 1e-24 {
                break;
            }
            let dx = &nb * step;
            let f0 = f(&x);
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-12 {
                let cand = &x - &dx * t;
                if f(&cand) <= f0 - 0.25 * t * decrement {
                    x = cand;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
    }
    let out = x.as_slice().to_vec();
    (prog.violation(&out) <= 1e-12 * (1.0 + out.iter().fold(0.0f64, |m, v| m.max(v.abs())))).then_some(out)
}

/// KKT check at `x`: stationarity with multipliers `‖μ_e‖ ≤ 1` on the zero
/// terms and `ν_k ≥ 0` on the tight constraints.
fn kkt_holds(prog: &Program, x: &[f64], tol: f64) -> bool {
    let dim = prog.dim();
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut grad = prog.reg_gradient(x);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut kinds: Vec<(bool, usize)> = Vec::new();
    for (e, (u, v, a, b)) in prog.terms.iter().enumerate() {
        let r = prog.residual(e, x);
        let nr = r.norm();
        if nr > 1e-9 * scale {
            let q = r / nr;
            grad[*u] += a.dot(&q);
            grad[*v] += b.dot(&q);
        } else {
            for c in 0..3 {
                let mut col = DVector::<f64>::zeros(dim);
                col[*u] = a[c];
                col[*v] = b[c];
                cols.push(col);
                kinds.push((true, e));
            }
        }
    }
    for (k, row) in prog.g.iter().enumerate() {
        if prog.g_row(k, x) >= prog.h[k] - 1e-9 * scale {
            let mut col = DVector::<f64>::zeros(dim);
            for &(i, c) in row {
                col[i] += c;
            }
            cols.push(col);
            kinds.push((false, k));
        }
    }
    if cols.is_empty() {
        return grad.norm() <= tol;
    }
    let a = DMatrix::from_columns(&cols);
    // least-squares multipliers for −grad = A m
    let svd = a.clone().svd(true, true);
    let Ok(mult) = svd.solve(&(-&grad), 1e-12) else {
        return false;
    };
    let resid = (&a * &mult + &grad).norm();
    if resid > tol {
        return false;
    }
    let mut i = 0;
    while i < kinds.len() {
        let (is_term, _) = kinds[i];
        if is_term {
            let m = Vector3::new(mult[i], mult[i + 1], mult[i + 2]);
            // only the component in the range of B_e is determined
            if m.norm() > 1.0 + 1e-6 {
                return false;
            }
            i += 3;
        } else {
            if mult[i] < -1e-6 {
                return false;
            }
            i += 1;
        }
    }
    true
}

/// Solves the depth program; see the module docs.
pub fn refine_depths(problem: &LiftProblem, params: &SolverParams) -> Result<LiftSolution> {
    problem.check()?;
    let prog = Program::new(problem);
    let n = prog.n;
    let zt = &prog.zt;
    let zmin = zt.iter().copied().fold(f64::INFINITY, f64::min);

    // start from z̃ scaled to the z ≥ 1 boundary
    let c0 = 1.0 / zmin;
    let mut base: Vec<f64> = zt.iter().map(|z| z * c0).collect();
    base.push(c0);
    prog.make_feasible(&mut base, &problem.t_constraints);

    if n == 0 {
        return Ok(LiftSolution {
            depths: Vec::new(),
            alpha: 1.0,
            objective: 0.0,
            iterations: 0,
            converged: true,
            restart_objectives: Vec::new(),
        });
    }

    // no line terms: any feasible z ∝ z̃ is optimal; keep α = 1 when possible
    if prog.terms.is_empty() {
        let c = c0.max(1.0);
        let mut x: Vec<f64> = zt.iter().map(|z| z * c).collect();
        x.push(c);
        if prog.violation(&x) <= 0.0 {
            return Ok(LiftSolution {
                depths: x[..n].to_vec(),
                alpha: c,
                objective: 0.0,
                iterations: 0,
                converged: true,
                restart_objectives: vec![0.0],
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let runs = params.restarts.max(1);
    let mut results: Vec<(f64, Vec<f64>, usize, bool)> = Vec::with_capacity(runs);
    for r in 0..runs {
        let x0: Vec<f64> = if r == 0 {
            base.clone()
        } else {
            let mut x: Vec<f64> = base.iter().map(|v| v * rng.random_range(0.5..2.0)).collect();
            prog.make_feasible(&mut x, &problem.t_constraints);
            x
        };
        let run = admm(&prog, &x0, params)?;
        let mut x = run.x.clone();
        prog.make_feasible(&mut x, &problem.t_constraints);
        let mut best = (prog.objective(&x), x);
        if let Some(p) = polish(&prog, &run) {
            let fp = prog.objective(&p);
            if fp <= best.0 {
                best = (fp, p);
            }
        }
        let kkt = kkt_holds(&prog, &best.1, 1e-6 * (1.0 + best.0));
        results.push((best.0, best.1, run.iterations, run.converged || kkt));
    }

    let objectives: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (bi, best) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("at least one run");
    let worst = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = worst - best.0;
    if spread > params.restart_tol * best.0.abs().max(1.0) {
        return Err(Error::NonConvergence(format!(
            "restart objectives differ by {spread:.3e} (best {:.6e})",
            best.0
        )));
    }
    let _ = bi;
    Ok(LiftSolution {
        depths: best.1[..n].to_vec(),
        alpha: best.1[n],
        objective: best.0,
        iterations: best.2,
        converged: best.3,
        restart_objectives: objectives,
    })
}

/// Term 1 of the objective (the line-alignment residual) for given depths.
pub fn alignment_residual(problem: &LiftProblem, depths: &[f64]) -> f64 {
    let prog = Program::new(problem);
    let mut x = depths.to_vec();
    x.push(1.0);
    prog.term1(&x)
}

/// Full objective at `(z, α)`.
pub fn objective(problem: &LiftProblem, depths: &[f64], alpha: f64) -> f64 {
    let prog = Program::new(problem);
    let mut x = depths.to_vec();
    x.push(alpha);
    prog.objective(&x)
}

/// Largest constraint violation at `z` (0 when feasible).
pub fn constraint_violation(problem: &LiftProblem, depths: &[f64]) -> f64 {
    let prog = Program::new(problem);
    let mut x = depths.to_vec();
    x.push(1.0);
    prog.violation(&x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftParams {
    pub lambda_r: f64,
    /// Assignment rejection angle.
    pub max_assign_angle_deg: f64,
    /// Distance (px) within which a T-junction counts as lying on a line.
    pub t_snap_px: f64,
    pub solver: SolverParams,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self {
            lambda_r: 1.0,
            max_assign_angle_deg: 10.0,
            t_snap_px: 1.0,
            solver: SolverParams::default(),
        }
    }
}

/// T-constraints from geometry: each T-junction on the interior of a
/// non-incident edge within `tol` px, snapped onto it.
pub fn t_constraints(wf: &mut Wireframe, tol: f64) -> Vec<TConstraint> {
    let atts = find_attachments(wf, tol);
    atts.iter()
        .map(|a| {
            let [u, v] = a.line;
            wf.vertices[a.vertex].xy = geom::lerp(wf.vertices[v].xy, wf.vertices[u].xy, a.lambda);
            TConstraint {
                vertex: a.vertex,
                line: a.line,
                lambda: a.lambda,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lifted {
    /// Input wireframe with refined depths; camera and VPs attached.
    pub wireframe: Wireframe,
    pub problem: LiftProblem,
    pub solution: LiftSolution,
}

impl Lifted {
    /// Camera-space vertex positions.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        self.wireframe
            .points3d()
            .expect("lifted wireframes carry camera and depths")
    }
}

/// Calibrates (unless `camera` is given), assigns lines, refines depths and
/// returns the wireframe with its refined depths.
pub fn lift(
    wf: &Wireframe,
    vps: &VanishingPoints,
    camera: Option<CameraModel>,
    params: &LiftParams,
) -> Result<Lifted> {
    for (i, v) in wf.vertices.iter().enumerate() {
        match v.depth {
            None => return Err(Error::MissingDepth(i)),
            Some(z) if !(z > 0.0 && z.is_finite()) => return Err(Error::NonPositiveDepth(i)),
            _ => {}
        }
    }
    let camera = match camera {
        Some(c) => c,
        None => calibrate_from_vps(vps, wf.image_size)?,
    };
    let directions = vp_directions(vps, &camera)?;
    let mut work = wf.clone();
    let ts = t_constraints(&mut work, params.t_snap_px);
    let assignment = assign_lines(&work, vps, params.max_assign_angle_deg);
    let problem = LiftProblem {
        wireframe: work,
        camera,
        directions,
        assignment,
        t_constraints: ts,
        lambda_r: params.lambda_r,
    };
    let solution = refine_depths(&problem, &params.solver)?;
    let mut out = problem.wireframe.clone();
    for (v, z) in out.vertices.iter_mut().zip(&solution.depths) {
        v.depth = Some(*z);
    }
    out.camera = Some(camera);
    out.vps = Some(*vps);
    Ok(Lifted {
        wireframe: out,
        problem,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{vp_from_pose, Pose};
    use crate::loss::silog;
    use crate::synth::{generate, project_gt, SceneParams};
    use crate::wireframe::{JunctionType, Vertex};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, UnitQuaternion};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand_distr::{Distribution, LogNormal, StandardNormal};

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
            .to_rotation_matrix()
            .into_inner()
    }

    #[test]
    fn calibration_recovers_random_cameras() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let f = rng.random_range(300.0..1000.0);
            let pp = [
                256.0 + rng.random_range(-50.0..50.0),
                256.0 + rng.random_range(-50.0..50.0),
            ];
            let cam = CameraModel::new(f, pp, (512, 512));
            let pose = Pose::new(random_rotation(&mut rng), Vector3::zeros());
            let vps = vp_from_pose(&pose, &cam);
            let est = calibrate_from_vps(&vps, (512, 512)).unwrap();
            assert_relative_eq!(est.focal, f, max_relative = 1e-6);
            assert_relative_eq!(est.principal_point[0], pp[0], max_relative = 1e-6);
            assert_relative_eq!(est.principal_point[1], pp[1], max_relative = 1e-6);
        }
    }

    #[test]
    fn principal_point_is_orthocenter() {
        // isosceles triangle: the altitude from (0, −300) is x = 0 and the one
        // from (−200, 200) meets it at y = 120; f² = −(a − o)·(b − o) = 200² − 80²
        let px = |x: f64, y: f64| Vector3::new(x, y, 1.0);
        let vps = VanishingPoints::from_homogeneous([px(-200.0, 200.0), px(200.0, 200.0), px(0.0, -300.0)]);
        let cam = calibrate_from_vps(&vps, (512, 512)).unwrap();
        assert_relative_eq!(cam.principal_point[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(cam.principal_point[1], 120.0, epsilon = 1e-9);
        assert_relative_eq!(cam.focal, 33600.0f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn calibration_failures() {
        let px = |x: f64, y: f64| Vector3::new(x, y, 1.0);
        // collinear
        let vps = VanishingPoints::from_homogeneous([px(0.0, 0.0), px(100.0, 0.0), px(300.0, 0.0)]);
        assert!(matches!(
            calibrate_from_vps(&vps, (512, 512)),
            Err(Error::DegenerateVps(_))
        ));
        // obtuse triangle: orthocenter outside, f² < 0
        let vps = VanishingPoints::from_homogeneous([px(0.0, 0.0), px(400.0, 0.0), px(200.0, 10.0)]);
        assert!(matches!(
            calibrate_from_vps(&vps, (512, 512)),
            Err(Error::NegativeFocalSquared(_))
        ));
        // two at infinity
        let inf = Vector3::new(1.0, 0.0, 0.0);
        let vps = VanishingPoints::from_homogeneous([inf, Vector3::new(0.0, 1.0, 0.0), px(3.0, 4.0)]);
        assert!(matches!(
            calibrate_from_vps(&vps, (512, 512)),
            Err(Error::DegenerateVps(_))
        ));
    }

    #[test]
    fn one_vp_at_infinity_uses_image_center() {
        let cam = CameraModel::centered(500.0, (512, 512));
        let pose = Pose::look_at(Vector3::new(-10.0, -10.0, 0.0), Vector3::zeros(), Vector3::z());
        let vps = vp_from_pose(&pose, &cam);
        assert!(vps.pixel(2).is_none());
        let est = calibrate_from_vps(&vps, (512, 512)).unwrap();
        assert_relative_eq!(est.focal, 500.0, epsilon = 1e-9);
        let d = vp_directions(&vps, &est).unwrap();
        // vertical direction recovered up to sign
        assert_relative_eq!(
            d[2].cross(&(pose.r() * Vector3::z())).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    fn wf_with(points: &[[f64; 2]], edges: &[[usize; 2]]) -> Wireframe {
        let mut wf = Wireframe::new((512, 512));
        for p in points {
            wf.add_vertex(Vertex::new(*p, JunctionType::C, Some(1.0)));
        }
        for e in edges {
            wf.add_edge(e[0], e[1]);
        }
        wf
    }

    #[test]
    fn assignment_examples() {
        let px = |x: f64, y: f64| Vector3::new(x, y, 1.0);
        let vps =
            VanishingPoints::from_homogeneous([px(-1000.0, 250.0), px(1000.0, 250.0), px(250.0, 5000.0)]);
        let wf = wf_with(
            &[
                [100.0, 100.0],
                [200.0, 100.0 - 150.0 * 100.0 / 1100.0],
                [100.0, 300.0],
                [300.0, 100.0 + 150.0 * 200.0 / 900.0],
            ],
            &[[0, 1], [0, 2], [0, 3]],
        );
        let a = assign_lines(&wf, &vps, 10.0);
        // exactly toward the left VP, nearly toward the vertical one, exactly
        // toward the right one
        assert_eq!(a, vec![Some(0), Some(2), Some(1)]);
        // the left VP line through (100, 100) rises 7.77° to the right; this
        // edge rises 22.77°
        let rise = (150.0f64 / 1100.0).atan() + 15f64.to_radians();
        let tilted = wf_with(&[[100.0, 100.0], [300.0, 100.0 - 200.0 * rise.tan()]], &[[0, 1]]);
        assert_eq!(assign_lines(&tilted, &vps, 10.0)[0], None);
        assert_eq!(assign_lines(&tilted, &vps, 20.0)[0], Some(0));
        // an infinite VP never wins; the right VP is 9.5° off
        let vps2 = VanishingPoints::from_homogeneous([
            Vector3::new(1.0, 0.0, 0.0),
            px(1000.0, 250.0),
            px(250.0, 5000.0),
        ]);
        let h = wf_with(&[[100.0, 100.0], [300.0, 100.0]], &[[0, 1]]);
        assert_eq!(assign_lines(&h, &vps2, 10.0)[0], Some(1));
        assert_eq!(assign_lines(&h, &vps2, 9.0)[0], None);
    }

    fn gt_problem(seed: u64, grid: (usize, usize)) -> (LiftProblem, Vec<f64>) {
        let scene = generate(seed, grid, &SceneParams::default()).unwrap();
        let gt = project_gt(&scene).unwrap();
        let directions = vp_directions(&gt.vps, &gt.camera).unwrap();
        let mut wf = gt.wireframe.clone();
        let ts = t_constraints(&mut wf, 1e-3);
        let truth = gt.wireframe.vertices.iter().map(|v| v.depth.unwrap()).collect();
        let problem = LiftProblem {
            wireframe: wf,
            camera: gt.camera,
            directions,
            assignment: gt.edge_axes.iter().map(|&a| Some(a)).collect(),
            t_constraints: ts,
            lambda_r: 1.0,
        };
        (problem, truth)
    }

    #[test]
    fn exact_inputs_are_reproduced() {
        for seed in 0..6 {
            let (p, truth) = gt_problem(seed, (2, 2));
            let sol = refine_depths(&p, &SolverParams::default()).unwrap();
            assert!(silog(&sol.depths, &truth) < 1e-8);
            assert!(alignment_residual(&p, &sol.depths) < 1e-9);
            assert!(sol.converged);
        }
    }

    #[test]
    fn noisy_depths_are_pulled_to_the_vp_directions() {
        let ln = LogNormal::new(0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut better = 0;
        for seed in 0..10 {
            let (mut p, truth) = gt_problem(seed, (1, 2));
            for v in &mut p.wireframe.vertices {
                v.depth = Some(v.depth.unwrap() * ln.sample(&mut rng));
            }
            let init: Vec<f64> = p.wireframe.vertices.iter().map(|v| v.depth.unwrap()).collect();
            let sol = refine_depths(&p, &SolverParams::default()).unwrap();
            assert!(constraint_violation(&p, &sol.depths) <= 1e-9);
            if silog(&sol.depths, &truth) <= silog(&init, &truth) {
                better += 1;
            }
        }
        assert!(better >= 9, "{better}/10");
    }

    #[test]
    fn without_assigned_edges_depths_follow_the_initial_guess() {
        let (mut p, _) = gt_problem(0, (1, 1));
        p.assignment.iter_mut().for_each(|a| *a = None);
        for (i, v) in p.wireframe.vertices.iter_mut().enumerate() {
            v.depth = Some(0.5 + 0.1 * i as f64);
        }
        p.t_constraints.clear();
        let sol = refine_depths(&p, &SolverParams::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_relative_eq!(sol.depths[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.depths[3] / sol.depths[0], 0.8 / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn violated_t_junction_is_pushed_behind() {
        // one T on the middle of a horizontal line, initially in front of it
        let mut wf = wf_with(
            &[[100.0, 200.0], [300.0, 200.0], [200.0, 200.0], [200.0, 300.0]],
            &[[0, 1], [2, 3]],
        );
        wf.vertices[2].jtype = JunctionType::T;
        for (v, z) in wf.vertices.iter_mut().zip([4.0, 4.0, 2.0, 2.0]) {
            v.depth = Some(z);
        }
        let cam = CameraModel::centered(500.0, (512, 512));
        let p = LiftProblem {
            t_constraints: t_constraints(&mut wf, 1.0),
            assignment: vec![None, None],
            wireframe: wf,
            camera: cam,
            directions: [Vector3::x(), Vector3::y(), Vector3::z()],
            lambda_r: 1.0,
        };
        assert_eq!(p.t_constraints.len(), 1);
        assert_relative_eq!(p.t_constraints[0].lambda, 0.5);
        let sol = refine_depths(&p, &SolverParams::default()).unwrap();
        assert!(constraint_violation(&p, &sol.depths) <= 1e-9);
        assert!(sol.depths[2] >= sol.depths[0] - 1e-9);
        assert!(sol.converged);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let (mut p, _) = gt_problem(1, (1, 1));
        p.lambda_r = 0.0;
        assert!(matches!(
            refine_depths(&p, &SolverParams::default()),
            Err(Error::InvalidParams(_))
        ));
        let (mut p, _) = gt_problem(1, (1, 1));
        p.wireframe.vertices[0].depth = None;
        assert!(matches!(
            refine_depths(&p, &SolverParams::default()),
            Err(Error::MissingDepth(0))
        ));
        let (mut p, _) = gt_problem(1, (1, 1));
        p.wireframe.vertices[1].depth = Some(-1.0);
        assert!(matches!(
            refine_depths(&p, &SolverParams::default()),
            Err(Error::NonPositiveDepth(1))
        ));
    }

    #[test]
    fn solution_is_a_local_hence_global_minimum() {
        let ln = LogNormal::new(0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut p, _) = gt_problem(4, (2, 2));
        for v in &mut p.wireframe.vertices {
            v.depth = Some(v.depth.unwrap() * ln.sample(&mut rng));
        }
        let sol = refine_depths(&p, &SolverParams::default()).unwrap();
        let f0 = objective(&p, &sol.depths, sol.alpha);
        assert_relative_eq!(f0, sol.objective, max_relative = 1e-12);
        let n = sol.depths.len();
        let mut tried = 0;
        while tried < 200 {
            let h = 1e-4;
            let z: Vec<f64> = sol
                .depths
                .iter()
                .map(|z| z + h * rng.random_range(-1.0..1.0))
                .collect();
            if constraint_violation(&p, &z) > 0.0 {
                continue;
            }
            tried += 1;
            let a = sol.alpha + h * rng.random_range(-1.0..1.0);
            assert!(objective(&p, &z, a) >= f0 - 1e-10 * n as f64);
        }
    }

    #[test]
    fn scaling_the_initial_depths_only_rescales_alpha() {
        let ln = LogNormal::new(0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut p, _) = gt_problem(2, (1, 2));
        for v in &mut p.wireframe.vertices {
            v.depth = Some(v.depth.unwrap() * ln.sample(&mut rng));
        }
        let a = refine_depths(&p, &SolverParams::default()).unwrap();
        let c = 3.7;
        for v in &mut p.wireframe.vertices {
            v.depth = Some(v.depth.unwrap() * c);
        }
        let b = refine_depths(&p, &SolverParams::default()).unwrap();
        assert_relative_eq!(b.alpha, a.alpha / c, max_relative = 1e-6);
        for (za, zb) in a.depths.iter().zip(&b.depths) {
            assert_relative_eq!(za, zb, max_relative = 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn objective_is_convex(seed in 0u64..20, t in 0.0f64..1.0, s in 0u64..1000) {
            let (p, truth) = gt_problem(seed, (1, 2));
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut draw = || -> (Vec<f64>, f64) {
                (truth.iter().map(|z| z * rng.random_range(0.5..2.0)).collect(), rng.random_range(0.5..2.0))
            };
            let (x, ax) = draw();
            let (y, ay) = draw();
            let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let fm = objective(&p, &m, t * ax + (1.0 - t) * ay);
            let fx = objective(&p, &x, ax);
            let fy = objective(&p, &y, ay);
            prop_assert!(fm <= t * fx + (1.0 - t) * fy + 1e-9 * (1.0 + fx + fy));
        }
    }
}
