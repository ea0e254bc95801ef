//! Small dense strictly convex QPs over polytopes `{y : G y ≤ h}`.
//!
//! Every QP is reduced to a Euclidean projection: with `H = L Lᵀ` and
//! `z = Lᵀ y`, minimizing `½ yᵀH y + gᵀy` over `G y ≤ h` is the projection of
//! `−L⁻¹g` onto `{z : G L⁻ᵀ z ≤ h}`. Two active-set methods solve the
//! projection exactly (up to rounding):
//!
//! * a dual method (Goldfarb–Idnani) that starts from the unconstrained
//!   minimizer and needs no feasible point; it also certifies infeasibility;
//! * a primal method that starts from a feasible point and a guess of the
//!   active set, which makes repeated projections onto the same polytope
//!   cheap when the active set barely moves between calls.
//!
//! Single-coefficient rows are recognised as bounds; the primal method fixes
//! the variable instead of carrying the row in its reduced system.

use serde::{Deserialize, Serialize};

use crate::model::SubsystemParams;
use crate::{Error, Result};

/// Default KKT tolerance for local problems.
pub const QP_TOL: f64 = 1e-8;

/// Default iteration cap for local problems.
pub const QP_MAX_ITER: usize = 20_000;

/// How the variables of a polytope are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariableLayout {
    Generic,
    /// `(u⁺(k), u⁻(k), …)` over a horizon of this many steps.
    StackedControls { horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Bound { var: usize },
    General,
    Empty,
}

/// Half-space representation `{y : G y ≤ h}`; bounds are ordinary rows.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    g: Vec<f64>,
    h: Vec<f64>,
    layout: VariableLayout,
    kinds: Vec<RowKind>,
    nonzeros: Vec<Vec<usize>>,
}

impl Polytope {
    /// `g` is row-major with `h.len()` rows of `dim` entries.
    pub fn new(dim: usize, g: Vec<f64>, h: Vec<f64>, layout: VariableLayout) -> Result<Self> {
        if g.len() != dim * h.len() {
            return Err(Error::dim("polytope matrix", dim * h.len(), g.len()));
        }
        if g.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("polytope has non-finite entries".into()));
        }
        let mut kinds = Vec::with_capacity(h.len());
        let mut nonzeros = Vec::with_capacity(h.len());
        for row in g.chunks_exact(dim.max(1)).take(h.len()) {
            let nz: Vec<usize> = (0..dim).filter(|&k| row[k] != 0.0).collect();
            kinds.push(match nz.len() {
                0 => RowKind::Empty,
                1 => RowKind::Bound { var: nz[0] },
                _ => RowKind::General,
            });
            nonzeros.push(nz);
        }
        if dim == 0 {
            kinds = vec![RowKind::Empty; h.len()];
            nonzeros = vec![Vec::new(); h.len()];
        }
        Ok(Self {
            dim,
            g,
            h,
            layout,
            kinds,
            nonzeros,
        })
    }

    /// Builds from `(row, rhs)` pairs.
    pub fn from_rows(dim: usize, rows: &[(Vec<f64>, f64)], layout: VariableLayout) -> Result<Self> {
        let mut g = Vec::with_capacity(dim * rows.len());
        let mut h = Vec::with_capacity(rows.len());
        for (row, rhs) in rows {
            if row.len() != dim {
                return Err(Error::dim("polytope row", dim, row.len()));
            }
            g.extend_from_slice(row);
            h.push(*rhs);
        }
        Self::new(dim, g, h, layout)
    }

    /// The box `lo ≤ y ≤ hi` as `2·dim` rows.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("box bounds", lo.len(), hi.len()));
        }
        let dim = lo.len();
        let mut rows = Vec::with_capacity(2 * dim);
        for k in 0..dim {
            let mut up = vec![0.0; dim];
            up[k] = 1.0;
            rows.push((up, hi[k]));
            let mut down = vec![0.0; dim];
            down[k] = -1.0;
            rows.push((down, -lo[k]));
        }
        Self::from_rows(dim, &rows, VariableLayout::Generic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.h.len()
    }

    pub fn layout(&self) -> VariableLayout {
        self.layout
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.g[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rhs(&self, j: usize) -> f64 {
        self.h[j]
    }

    /// `G_j · y` using the row's sparsity.
    pub fn row_dot(&self, j: usize, y: &[f64]) -> f64 {
        let row = self.row(j);
        self.nonzeros[j].iter().map(|&k| row[k] * y[k]).sum()
    }

    /// Largest constraint excess `max_j (G_j y − h_j)⁺`.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        (0..self.rows())
            .map(|j| self.row_dot(j, y) - self.h[j])
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.dim && self.max_violation(y) <= tol
    }
}

/// The feasible control set of one household with states eliminated.
///
/// Rows per step `n`: `−u⁺ ≤ 0`, `u⁺ ≤ ū`, `u⁻ ≤ 0`, `−u⁻ ≤ −u̲` and
/// `u⁻/u̲ + u⁺/ū ≤ 1` (a zero bound drops its term). Then for every
/// constrained state `x(k+j)` the pair `x ≤ C`, `−x ≤ 0`, written in the
/// controls through `x(k+j) = αʲ x̂ + T Σ_{l<j} α^{j−1−l} (β u⁺(l) + u⁻(l))`.
/// States `j = 1 … N−1` are always constrained and `j = N` only when
/// `constrain_terminal` is set, giving `5N + 2(N−1)` or `7N` rows.
pub fn build_polytope_u(
    params: &SubsystemParams,
    x0: f64,
    horizon: usize,
    dt: f64,
    constrain_terminal: bool,
) -> Polytope {
    let dim = 2 * horizon;
    let last = if constrain_terminal { horizon } else { horizon.saturating_sub(1) };
    let rows = 5 * horizon + 2 * last;
    let mut g = vec![0.0; rows * dim];
    let mut h = vec![0.0; rows];
    let set = |j: usize, k: usize, v: f64, g: &mut Vec<f64>| g[j * dim + k] = v;

    for n in 0..horizon {
        let (up, down) = (2 * n, 2 * n + 1);
        let base = 5 * n;
        set(base, up, -1.0, &mut g);
        set(base + 1, up, 1.0, &mut g);
        h[base + 1] = params.u_max;
        set(base + 2, down, 1.0, &mut g);
        set(base + 3, down, -1.0, &mut g);
        h[base + 3] = -params.u_min;
        if params.u_max != 0.0 {
            set(base + 4, up, 1.0 / params.u_max, &mut g);
        }
        if params.u_min != 0.0 {
            set(base + 4, down, 1.0 / params.u_min, &mut g);
        }
        h[base + 4] = 1.0;
    }

    for j in 1..=last {
        let upper = 5 * horizon + 2 * (j - 1);
        let lower = upper + 1;
        let free = params.alpha.powi(j as i32) * x0;
        for l in 0..j {
            let decay = dt * params.alpha.powi((j - 1 - l) as i32);
            set(upper, 2 * l, decay * params.beta, &mut g);
            set(upper, 2 * l + 1, decay, &mut g);
            set(lower, 2 * l, -decay * params.beta, &mut g);
            set(lower, 2 * l + 1, -decay, &mut g);
        }
        h[upper] = params.capacity - free;
        h[lower] = free;
    }
    Polytope::new(dim, g, h, VariableLayout::StackedControls { horizon })
        .expect("finite household parameters")
}

/// `min ½ yᵀH y + gᵀy  s.t.  y ∈ constraints`, with `H` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct DenseQp {
    /// Row-major `n × n`.
    pub hessian: Vec<f64>,
    pub linear: Vec<f64>,
    pub constraints: Polytope,
}

impl DenseQp {
    pub fn objective(&self, y: &[f64]) -> f64 {
        let n = self.linear.len();
        let mut val = 0.0;
        for r in 0..n {
            let hy: f64 = (0..n).map(|c| self.hessian[r * n + c] * y[c]).sum();
            val += 0.5 * y[r] * hy + self.linear[r] * y[r];
        }
        val
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Solved,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub y: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
    /// Rows in the final working set.
    pub active: Vec<usize>,
    /// One multiplier per row; zero off the working set.
    pub multipliers: Vec<f64>,
}

impl QpSolution {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            y: self.y.clone(),
            active: self.active.clone(),
        }
    }
}

/// A feasible point and a guess of the active rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub y: Vec<f64>,
    pub active: Vec<usize>,
}

/// Solves a dense strictly convex QP.
///
/// A warm start that is feasible to `1e-9` is continued with the primal
/// active-set method; otherwise the dual method starts from scratch.
pub fn solve_qp(
    qp: &DenseQp,
    warm_start: Option<&WarmStart>,
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution> {
    let n = qp.linear.len();
    let poly = &qp.constraints;
    if poly.dim() != n {
        return Err(Error::dim("qp constraints", n, poly.dim()));
    }
    if qp.hessian.len() != n * n {
        return Err(Error::dim("qp hessian", n * n, qp.hessian.len()));
    }
    for r in 0..n {
        for c in 0..r {
            let (a, b) = (qp.hessian[r * n + c], qp.hessian[c * n + r]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::Qp("hessian is not symmetric".into()));
            }
        }
    }
    let mut chol = qp.hessian.clone();
    if !cholesky_in_place(&mut chol, n) {
        return Err(Error::Qp("hessian is not positive definite".into()));
    }

    // z = Lᵀ y; point = −L⁻¹ g; rows G L⁻ᵀ.
    let mut point = qp.linear.clone();
    forward_solve(&chol, n, &mut point);
    point.iter_mut().for_each(|v| *v = -*v);
    let mut tg = Vec::with_capacity(poly.g.len());
    let mut row = vec![0.0; n];
    for j in 0..poly.rows() {
        row.copy_from_slice(poly.row(j));
        forward_solve(&chol, n, &mut row);
        tg.extend_from_slice(&row);
    }
    let transformed = Polytope::new(n, tg, poly.h.clone(), poly.layout)?;

    let warm = warm_start.and_then(|w| {
        if w.y.len() != n {
            return None;
        }
        let mut z = vec![0.0; n];
        for r in 0..n {
            z[r] = (r..n).map(|c| chol[c * n + r] * w.y[c]).sum();
        }
        (transformed.max_violation(&z) <= 1e-9).then_some((z, w.active.clone()))
    });

    let mut ws = Workspace::new(n, poly.rows());
    let (mut z, status, iterations, active, mults) = match warm {
        Some((mut z, mut active)) => {
            let (status, it) = primal_active_set(&transformed, &point, &mut z, &mut active, &mut ws, max_iter);
            (z, status, it, active, ws.multipliers(poly.rows()))
        }
        None => dual_active_set(&transformed, &point, max_iter),
    };

    // y = L⁻ᵀ z
    backward_solve_transpose(&chol, n, &mut z);
    let kkt = kkt_residual(qp, &z, &mults);
    let status = match status {
        QpStatus::Solved if kkt > tol => QpStatus::MaxIter,
        s => s,
    };
    Ok(QpSolution {
        y: z,
        kkt_residual: kkt,
        iterations,
        status,
        active,
        multipliers: mults,
    })
}

/// Euclidean projection of `point` onto a nonempty polytope.
pub fn project_polytope(point: &[f64], polytope: &Polytope, tol: f64) -> Result<QpSolution> {
    let n = point.len();
    let mut hessian = vec![0.0; n * n];
    for k in 0..n {
        hessian[k * n + k] = 1.0;
    }
    let qp = DenseQp {
        hessian,
        linear: point.iter().map(|v| -v).collect(),
        constraints: polytope.clone(),
    };
    solve_qp(&qp, None, tol, QP_MAX_ITER)
}

/// Largest violation of the KKT conditions of `qp` at `(y, μ)`:
/// stationarity, primal feasibility, dual feasibility and complementarity.
pub fn kkt_residual(qp: &DenseQp, y: &[f64], multipliers: &[f64]) -> f64 {
    let n = y.len();
    let poly = &qp.constraints;
    let mut grad: Vec<f64> = (0..n)
        .map(|r| (0..n).map(|c| qp.hessian[r * n + c] * y[c]).sum::<f64>() + qp.linear[r])
        .collect();
    let mut worst = 0.0f64;
    for (j, &mu) in multipliers.iter().enumerate() {
        let slack = poly.row_dot(j, y) - poly.rhs(j);
        worst = worst.max(slack).max(-mu).max((mu * slack).abs());
        if mu != 0.0 {
            for (gk, rk) in grad.iter_mut().zip(poly.row(j)) {
                *gk += mu * rk;
            }
        }
    }
    grad.iter().fold(worst, |w, g| w.max(g.abs()))
}

/// Repeated projections onto one polytope, each warm-started from the last.
#[derive(Debug, Clone)]
pub struct Projector {
    polytope: Polytope,
    y: Vec<f64>,
    active: Vec<usize>,
    ws: Workspace,
    max_iter: usize,
    ready: bool,
}

/// Outcome of one [`Projector::project_into`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionStats {
    pub status: QpStatus,
    pub iterations: usize,
}

impl Projector {
    /// Starts from the origin with every row active there when the origin is
    /// feasible; otherwise the first call runs the dual method.
    pub fn new(polytope: Polytope, max_iter: usize) -> Self {
        let n = polytope.dim();
        let y = vec![0.0; n];
        let ready = polytope.max_violation(&y) <= 0.0;
        let active = if ready {
            (0..polytope.rows())
                .filter(|&j| polytope.kinds[j] != RowKind::Empty && polytope.rhs(j) == 0.0)
                .collect()
        } else {
            Vec::new()
        };
        let ws = Workspace::new(n, polytope.rows());
        Self {
            polytope,
            y,
            active,
            ws,
            max_iter,
            ready,
        }
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    /// Derivative of the last projection along `dir`: `dir` projected onto
    /// the subspace that keeps the final working set active. Where the
    /// projection map is differentiable this is `P'(p)·dir`.
    pub fn tangent_into(&mut self, dir: &[f64], out: &mut [f64]) {
        self.ws.load_working_set(&self.polytope, &self.active);
        self.ws.r.copy_from_slice(dir);
        while let Err(bad) = reduced_step(&self.polytope, &mut self.ws) {
            let j = self.ws.general.remove(bad);
            self.ws.in_working[j] = false;
        }
        out.copy_from_slice(&self.ws.d);
    }

    /// Projects `point` and writes the result into `out`.
    pub fn project_into(&mut self, point: &[f64], out: &mut [f64]) -> ProjectionStats {
        let (status, iterations) = if self.ready {
            primal_active_set(
                &self.polytope,
                point,
                &mut self.y,
                &mut self.active,
                &mut self.ws,
                self.max_iter,
            )
        } else {
            let (y, status, it, active, _) = dual_active_set(&self.polytope, point, self.max_iter);
            if status == QpStatus::Solved {
                self.y = y;
                self.active = active;
                self.ready = true;
            }
            (status, it)
        };
        out.copy_from_slice(&self.y);
        ProjectionStats { status, iterations }
    }
}

#[derive(Debug, Clone)]
struct Workspace {
    fixed_by: Vec<usize>,
    in_working: Vec<bool>,
    general: Vec<usize>,
    r: Vec<f64>,
    d: Vec<f64>,
    gram: Vec<f64>,
    nu: Vec<f64>,
    final_mults: Vec<(usize, f64)>,
}

const FREE: usize = usize::MAX;

impl Workspace {
    fn new(dim: usize, rows: usize) -> Self {
        Self {
            fixed_by: vec![FREE; dim],
            in_working: vec![false; rows],
            general: Vec::new(),
            r: vec![0.0; dim],
            d: vec![0.0; dim],
            gram: Vec::new(),
            nu: Vec::new(),
            final_mults: Vec::new(),
        }
    }

    fn load_working_set(&mut self, poly: &Polytope, working: &[usize]) {
        self.fixed_by.fill(FREE);
        self.in_working.fill(false);
        self.general.clear();
        for &j in working {
            match poly.kinds[j] {
                RowKind::Bound { var } if self.fixed_by[var] == FREE => {
                    self.fixed_by[var] = j;
                    self.in_working[j] = true;
                }
                RowKind::General if !self.in_working[j] => {
                    self.general.push(j);
                    self.in_working[j] = true;
                }
                _ => {}
            }
        }
    }

    fn multipliers(&self, rows: usize) -> Vec<f64> {
        let mut m = vec![0.0; rows];
        for &(j, mu) in &self.final_mults {
            m[j] = mu;
        }
        m
    }
}

/// Primal active-set projection of `p` starting from the feasible `y` with
/// working-set guess `working`. Both are updated in place.
fn primal_active_set(
    poly: &Polytope,
    p: &[f64],
    y: &mut [f64],
    working: &mut Vec<usize>,
    ws: &mut Workspace,
    max_iter: usize,
) -> (QpStatus, usize) {
    let n = poly.dim();
    let m = poly.rows();
    let scale = 1.0 + p.iter().chain(y.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    let active_tol = 1e-9 * scale;

    ws.fixed_by.fill(FREE);
    ws.in_working.fill(false);
    ws.general.clear();
    for &j in working.iter() {
        if j >= m || ws.in_working[j] {
            continue;
        }
        let slack = poly.h[j] - poly.row_dot(j, y);
        if slack.abs() > active_tol {
            continue;
        }
        match poly.kinds[j] {
            RowKind::Bound { var } if ws.fixed_by[var] == FREE => {
                ws.fixed_by[var] = j;
                ws.in_working[j] = true;
                y[var] = poly.h[j] / poly.row(j)[var];
            }
            RowKind::General => {
                ws.general.push(j);
                ws.in_working[j] = true;
            }
            _ => {}
        }
    }

    let mut status = QpStatus::MaxIter;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for k in 0..n {
            ws.r[k] = p[k] - y[k];
        }

        if let Err(bad) = reduced_step(poly, ws) {
            // Dependent on the rest of the working set: drop it.
            let j = ws.general.remove(bad);
            ws.in_working[j] = false;
            continue;
        }
        let nu = std::mem::take(&mut ws.nu);
        let mut dmax = 0.0f64;
        for k in 0..n {
            dmax = dmax.max(ws.d[k].abs());
        }

        if dmax <= 1e-13 * scale {
            // Stationary on the working set: check multiplier signs.
            ws.final_mults.clear();
            let mut worst: Option<(usize, f64)> = None;
            let consider = |j: usize, mu: f64, worst: &mut Option<(usize, f64)>| {
                if worst.map_or(true, |(_, w)| mu < w) {
                    *worst = Some((j, mu));
                }
            };
            for (a, &j) in ws.general.iter().enumerate() {
                ws.final_mults.push((j, nu[a]));
                consider(j, nu[a], &mut worst);
            }
            // Stationarity on a fixed variable k: (y_k − p_k) + Σ ν_a G_ak + μ c = 0.
            for k in 0..n {
                let j = ws.fixed_by[k];
                if j == FREE {
                    continue;
                }
                let mut grad = -ws.r[k];
                for (a, &jg) in ws.general.iter().enumerate() {
                    grad += nu[a] * poly.row(jg)[k];
                }
                let mu = -grad / poly.row(j)[k];
                ws.final_mults.push((j, mu));
                consider(j, mu, &mut worst);
            }
            ws.nu = nu;
            match worst {
                Some((j, mu)) if mu < -1e-12 * scale => {
                    ws.in_working[j] = false;
                    match poly.kinds[j] {
                        RowKind::Bound { var } => ws.fixed_by[var] = FREE,
                        _ => ws.general.retain(|&g| g != j),
                    }
                }
                _ => {
                    status = QpStatus::Solved;
                    break;
                }
            }
            continue;
        }
        ws.nu = nu;

        // Ratio test against rows outside the working set.
        let mut step = 1.0;
        let mut blocking = None;
        for j in 0..m {
            if ws.in_working[j] {
                continue;
            }
            let row = poly.row(j);
            let (gd, gy) = match poly.kinds[j] {
                RowKind::Empty => continue,
                RowKind::Bound { var } => (row[var] * ws.d[var], row[var] * y[var]),
                RowKind::General => poly.nonzeros[j]
                    .iter()
                    .fold((0.0, 0.0), |(a, b), &k| (a + row[k] * ws.d[k], b + row[k] * y[k])),
            };
            if gd <= 1e-14 * scale {
                continue;
            }
            let t = ((poly.h[j] - gy) / gd).max(0.0);
            if t < step {
                step = t;
                blocking = Some(j);
            }
        }
        for k in 0..n {
            y[k] += step * ws.d[k];
        }
        if let Some(j) = blocking {
            ws.in_working[j] = true;
            match poly.kinds[j] {
                RowKind::Bound { var } => {
                    ws.fixed_by[var] = j;
                    y[var] = poly.h[j] / poly.row(j)[var];
                }
                _ => ws.general.push(j),
            }
        }
    }

    working.clear();
    working.extend(ws.general.iter().copied());
    working.extend(ws.fixed_by.iter().copied().filter(|&j| j != FREE));
    (status, iterations)
}

/// Projects `ws.r` onto the directions that keep every working row active:
/// fixed variables do not move and `d = r − Gᵀν` over the free variables with
/// `G d = 0` for the general rows. Writes `ws.d` and `ws.nu`; on a dependent
/// working set returns the position in `ws.general` of the offending row.
fn reduced_step(poly: &Polytope, ws: &mut Workspace) -> std::result::Result<(), usize> {
    let n = poly.dim();
    let q = ws.general.len();
    ws.gram.clear();
    ws.gram.resize(q * q, 0.0);
    ws.nu.clear();
    ws.nu.resize(q, 0.0);
    for a in 0..q {
        let ja = ws.general[a];
        let ra = poly.row(ja);
        for b in 0..=a {
            let rb = poly.row(ws.general[b]);
            let v: f64 = poly.nonzeros[ja]
                .iter()
                .filter(|&&k| ws.fixed_by[k] == FREE)
                .map(|&k| ra[k] * rb[k])
                .sum();
            ws.gram[a * q + b] = v;
            ws.gram[b * q + a] = v;
        }
        ws.nu[a] = poly.nonzeros[ja]
            .iter()
            .filter(|&&k| ws.fixed_by[k] == FREE)
            .map(|&k| ra[k] * ws.r[k])
            .sum();
    }
    if let Some(bad) = cholesky_pivot_failure(&mut ws.gram, q) {
        return Err(bad);
    }
    forward_solve(&ws.gram, q, &mut ws.nu);
    backward_solve_transpose(&ws.gram, q, &mut ws.nu);
    for k in 0..n {
        ws.d[k] = if ws.fixed_by[k] == FREE { ws.r[k] } else { 0.0 };
    }
    for (a, &j) in ws.general.iter().enumerate() {
        let row = poly.row(j);
        for &k in &poly.nonzeros[j] {
            if ws.fixed_by[k] == FREE {
                ws.d[k] -= ws.nu[a] * row[k];
            }
        }
    }
    Ok(())
}

/// Goldfarb–Idnani dual active-set projection of `p` onto `poly`.
///
/// Returns `(y, status, iterations, active rows, multipliers per row)`.
fn dual_active_set(
    poly: &Polytope,
    p: &[f64],
    max_iter: usize,
) -> (Vec<f64>, QpStatus, usize, Vec<usize>, Vec<f64>) {
    let m = poly.rows();
    let mut x = p.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut in_active = vec![false; m];
    let scale = 1.0 + p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let feas_tol = 1e-12 * scale;

    // Rows `0 ≤ h` with no coefficients decide feasibility on their own.
    if (0..m).any(|j| poly.kinds[j] == RowKind::Empty && poly.h[j] < -feas_tol) {
        return (x, QpStatus::Infeasible, 0, active, vec![0.0; m]);
    }

    let mut iterations = 0;
    let status = 'outer: loop {
        // Most violated row.
        let mut pick = None;
        let mut worst = feas_tol;
        for j in 0..m {
            if in_active[j] || poly.kinds[j] == RowKind::Empty {
                continue;
            }
            let s = poly.row_dot(j, &x) - poly.h[j];
            if s > worst {
                worst = s;
                pick = Some(j);
            }
        }
        let Some(j) = pick else {
            break QpStatus::Solved;
        };
        let nj = poly.row(j).to_vec();
        let nj_sq: f64 = nj.iter().map(|v| v * v).sum();
        let mut uj = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                break 'outer QpStatus::MaxIter;
            }
            let q = active.len();
            let mut gram = vec![0.0; q * q];
            let mut r = vec![0.0; q];
            for a in 0..q {
                let ra = poly.row(active[a]);
                for b in 0..=a {
                    let v: f64 = ra.iter().zip(poly.row(active[b])).map(|(p, q)| p * q).sum();
                    gram[a * q + b] = v;
                    gram[b * q + a] = v;
                }
                r[a] = ra.iter().zip(&nj).map(|(p, q)| p * q).sum();
            }
            if !cholesky_in_place(&mut gram, q) {
                // Numerically dependent working set; give up on accuracy.
                break 'outer QpStatus::MaxIter;
            }
            forward_solve(&gram, q, &mut r);
            backward_solve_transpose(&gram, q, &mut r);
            let mut z = nj.clone();
            for (a, &ja) in active.iter().enumerate() {
                for (zk, rk) in z.iter_mut().zip(poly.row(ja)) {
                    *zk -= r[a] * rk;
                }
            }
            let zz: f64 = z.iter().zip(&nj).map(|(a, b)| a * b).sum();

            // Largest dual step keeping active multipliers nonnegative.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for a in 0..q {
                if r[a] > 1e-14 {
                    let t = u[a] / r[a];
                    if t < t1 {
                        t1 = t;
                        drop = Some(a);
                    }
                }
            }
            let s = poly.row_dot(j, &x) - poly.h[j];
            if zz <= 1e-12 * nj_sq {
                let Some(a) = drop else {
                    break 'outer QpStatus::Infeasible;
                };
                for (ua, ra) in u.iter_mut().zip(&r) {
                    *ua -= t1 * ra;
                }
                uj += t1;
                in_active[active[a]] = false;
                active.remove(a);
                u.remove(a);
                continue;
            }
            let t2 = s.max(0.0) / zz;
            let t = t1.min(t2);
            for (xk, zk) in x.iter_mut().zip(&z) {
                *xk -= t * zk;
            }
            for (ua, ra) in u.iter_mut().zip(&r) {
                *ua -= t * ra;
            }
            uj += t;
            if t2 <= t1 {
                active.push(j);
                u.push(uj);
                in_active[j] = true;
                break;
            }
            let a = drop.expect("finite t1 has a blocking row");
            in_active[active[a]] = false;
            active.remove(a);
            u.remove(a);
        }
    };

    let mut mults = vec![0.0; m];
    for (&j, &mu) in active.iter().zip(&u) {
        mults[j] = mu.max(0.0);
    }
    (x, status, iterations, active, mults)
}

/// In-place lower Cholesky factor of a row-major `n × n` SPD matrix.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    cholesky_pivot_failure(a, n).is_none()
}

/// Cholesky that reports the first row whose pivot collapses.
fn cholesky_pivot_failure(a: &mut [f64], n: usize) -> Option<usize> {
    for j in 0..n {
        let diag0 = a[j * n + j];
        let mut s = diag0;
        for k in 0..j {
            s -= a[j * n + k] * a[j * n + k];
        }
        if !(s > 1e-12 * diag0.abs().max(1e-300)) {
            return Some(j);
        }
        let ljj = s.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            a[i * n + j] = 0.0;
        }
    }
    None
}

/// Solves `L x = b` in place.
fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
fn backward_solve_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}
