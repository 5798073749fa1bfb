//! Crank-Nicolson reference solver on a uniform grid.
//!
//! Internally everything runs in reduced units where the equation reads
//! `i ds psi = -d2 psi - kappa xi psi`, i.e. `hbar = 1`, `m = 1/2` and a force
//! `kappa`. For a falling particle `kappa = 1`; `kappa = 0` is free spreading.

use serde::{Deserialize, Serialize};

use super::analytic::{AnalyticPacket, ParticleSpec};
use crate::error::{Error, Result};
use crate::quantum::C64;
use crate::tf::TimeGrid;

pub const MIN_GRID_POINTS: usize = 256;
/// Allowed drift of `sum |psi|^2 dx` from one.
pub const NORM_TOL: f64 = 1e-8;
/// Edge density, relative to the initial peak, that counts as a boundary leak.
pub const LEAK_THRESHOLD: f64 = 1e-12;
/// Half-width of an automatic domain in units of the largest packet width.
const AUTO_MARGIN: f64 = 12.0;

/// Uniform spatial grid with Dirichlet ends and a maximal time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub dt: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, dt: f64) -> Result<Self> {
        let g = Self { x_min, x_max, n_x, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::Validation(format!("need x_max > x_min, got [{}, {}]", self.x_min, self.x_max)));
        }
        if self.n_x < MIN_GRID_POINTS {
            return Err(Error::Validation(format!("n_x >= {MIN_GRID_POINTS} required, got {}", self.n_x)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    /// Largest step allowed for `spec`, `m dx^2 / hbar`.
    pub fn max_dt(&self, spec: &ParticleSpec) -> f64 {
        spec.mass * self.dx().powi(2) / spec.hbar
    }

    pub fn check_cfl(&self, spec: &ParticleSpec) -> Result<()> {
        let limit = self.max_dt(spec);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Validation(format!("dt = {:e} exceeds m dx^2 / hbar = {limit:e}", self.dt)));
        }
        Ok(())
    }

    /// Domain covering the packet up to `t_final` with the largest admissible step.
    pub fn auto(spec: &ParticleSpec, t_final: f64, n_x: usize) -> Result<Self> {
        spec.validate()?;
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::Domain(format!("t_final must be nonnegative, got {t_final}")));
        }
        let p = AnalyticPacket { spec: *spec };
        let half = AUTO_MARGIN * p.width(t_final);
        let mut g = Self { x_min: -half, x_max: p.center(t_final) + half, n_x, dt: 1.0 };
        g.validate()?;
        g.dt = g.max_dt(spec);
        Ok(g)
    }

    /// Shifts the grid by at most `dx / 2` so that `x_d` falls midway between two nodes.
    pub fn aligned(&self, x_d: f64) -> Result<Self> {
        let dx = self.dx();
        let k = ((x_d - self.x_min) / dx - 0.5).round();
        if !(k >= 0.0 && k <= (self.n_x - 2) as f64) {
            return Err(Error::Domain(format!("detector {x_d} outside grid [{}, {}]", self.x_min, self.x_max)));
        }
        let x_min = x_d - (k + 0.5) * dx;
        Ok(Self { x_min, x_max: x_min + (self.n_x - 1) as f64 * dx, ..*self })
    }

    /// Index `k` with `x_k < x_d < x_(k+1)`.
    pub fn bond_below(&self, x_d: f64) -> Result<usize> {
        let s = (x_d - self.x_min) / self.dx();
        let k = s.floor();
        let near_node = (s - s.round()).abs() < 1e-9;
        if !(k >= 0.0 && k < (self.n_x - 1) as f64) || near_node {
            return Err(Error::Domain(format!("detector {x_d} must lie strictly between two grid nodes")));
        }
        Ok(k as usize)
    }
}

/// Amplitudes on a [`Grid1D`] at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub psi: Vec<C64>,
    pub time: f64,
}

impl GridState {
    pub fn norm(&self, dx: f64) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `(hbar / (m dx)) Im(conj(psi_i) psi_(i+1))` on every bond.
    pub fn bond_currents(&self, spec: &ParticleSpec, dx: f64) -> Vec<f64> {
        let c = spec.hbar / (spec.mass * dx);
        self.psi.windows(2).map(|w| c * (w[0].conj() * w[1]).im).collect()
    }

    pub fn mean_position(&self, grid: &Grid1D) -> f64 {
        let dx = grid.dx();
        self.psi.iter().enumerate().map(|(i, z)| grid.x(i) * z.norm_sqr()).sum::<f64>() * dx / self.norm(dx)
    }
}

/// Sampled real Gaussian at rest, `psi ∝ exp(-x^2 / (4 sigma^2))`, normalized on the grid.
pub fn gaussian_state(spec: &ParticleSpec, grid: &Grid1D) -> Result<GridState> {
    spec.validate()?;
    grid.validate()?;
    let s = spec.sigma;
    let mut psi: Vec<C64> = grid.positions().iter().map(|x| C64::new((-x * x / (4.0 * s * s)).exp(), 0.0)).collect();
    let last = psi.len() - 1;
    psi[0] = C64::new(0.0, 0.0);
    psi[last] = C64::new(0.0, 0.0);
    let mut st = GridState { psi, time: 0.0 };
    let n = st.norm(grid.dx());
    if !(n > 0.0) {
        return Err(Error::Domain("initial packet does not overlap the grid".into()));
    }
    let k = 1.0 / n.sqrt();
    st.psi.iter_mut().for_each(|z| *z *= k);
    Ok(st)
}

/// Crank-Nicolson stepper with a prefactored tridiagonal system.
#[derive(Debug, Clone)]
pub struct ReducedSolver {
    kappa: f64,
    xi: Vec<f64>,
    dx: f64,
    dt: f64,
    // Thomas factorization of (1 + i dt/2 H) on the interior nodes
    off: C64,
    c_prime: Vec<C64>,
    inv_denom: Vec<C64>,
    diag: Vec<C64>,
}

impl ReducedSolver {
    pub fn new(kappa: f64, xi_min: f64, xi_max: f64, n: usize, dt: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::Validation(format!("kappa must be finite, got {kappa}")));
        }
        let grid = Grid1D::new(xi_min, xi_max, n, dt)?;
        let dx = grid.dx();
        let xi = grid.positions();
        let half = C64::new(0.0, 0.5 * dt);
        let off = half * (-1.0 / (dx * dx));
        let diag: Vec<C64> = xi[1..n - 1].iter().map(|&x| 2.0 / (dx * dx) - kappa * x).map(|h| C64::new(1.0, 0.0) + half * h).collect();
        let m = diag.len();
        let mut c_prime = vec![C64::new(0.0, 0.0); m];
        let mut inv_denom = vec![C64::new(0.0, 0.0); m];
        inv_denom[0] = 1.0 / diag[0];
        c_prime[0] = off * inv_denom[0];
        for i in 1..m {
            inv_denom[i] = 1.0 / (diag[i] - off * c_prime[i - 1]);
            c_prime[i] = off * inv_denom[i];
        }
        Ok(Self { kappa, xi, dx, dt, off, c_prime, inv_denom, diag })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn positions(&self) -> &[f64] {
        &self.xi
    }

    /// Discrete Hamiltonian applied to `psi`; the end values are taken as zero.
    pub fn apply_h(&self, psi: &[C64]) -> Vec<C64> {
        let n = psi.len();
        let k = 1.0 / (self.dx * self.dx);
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 1..n - 1 {
            out[i] = (2.0 * psi[i] - psi[i - 1] - psi[i + 1]) * k - psi[i] * (self.kappa * self.xi[i]);
        }
        out
    }

    /// One time step in place.
    pub fn step(&self, psi: &mut [C64], work: &mut Vec<C64>) {
        let n = psi.len();
        let m = n - 2;
        work.resize(m, C64::new(0.0, 0.0));
        // right-hand side (1 - i dt/2 H) psi; note 2 - diag = 1 - i dt/2 H_ii
        let two = C64::new(2.0, 0.0);
        for (i, (w, d)) in work.iter_mut().zip(&self.diag).enumerate() {
            *w = (two - d) * psi[i + 1] - self.off * (psi[i] + psi[i + 2]);
        }
        work[0] *= self.inv_denom[0];
        for i in 1..m {
            work[i] = (work[i] - self.off * work[i - 1]) * self.inv_denom[i];
        }
        for i in (0..m - 1).rev() {
            let next = work[i + 1];
            work[i] -= self.c_prime[i] * next;
        }
        psi[1..n - 1].copy_from_slice(work);
        psi[0] = C64::new(0.0, 0.0);
        psi[n - 1] = C64::new(0.0, 0.0);
    }

    /// `sum_(i <= k) |psi_i|^2 dx`.
    pub fn half_space_probability(&self, psi: &[C64], k: usize) -> f64 {
        psi[..=k].iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx
    }

    /// `d/dt` of [`Self::half_space_probability`] from the commutator with the discrete Hamiltonian.
    pub fn half_space_rate(&self, psi: &[C64], k: usize) -> f64 {
        let h = self.apply_h(psi);
        2.0 * psi[..=k].iter().zip(&h[..=k]).map(|(a, b)| (a.conj() * b).im).sum::<f64>() * self.dx
    }

    /// `2 Im(conj(psi_k) psi_(k+1)) / dx`.
    pub fn bond_current(&self, psi: &[C64], k: usize) -> f64 {
        2.0 * (psi[k].conj() * psi[k + 1]).im / self.dx
    }
}

fn edge_density(psi: &[C64]) -> f64 {
    let n = psi.len();
    psi[1].norm_sqr().max(psi[n - 2].norm_sqr())
}

struct Reduced {
    solver: ReducedSolver,
    length: f64,
    time: f64,
    peak: f64,
}

impl Reduced {
    /// Solver for step `dt` (in the spec's units) plus the rescaled amplitudes of `psi0`.
    fn new(spec: &ParticleSpec, grid: &Grid1D, psi0: &GridState, dt: f64) -> Result<(Self, Vec<C64>)> {
        let (l, tau) = (spec.length_unit(), spec.time_unit());
        let solver = ReducedSolver::new(1.0, grid.x_min / l, grid.x_max / l, grid.n_x, dt / tau)?;
        let psi: Vec<C64> = psi0.psi.iter().map(|z| z * l.sqrt()).collect();
        let peak = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let r = Self { solver, length: l, time: tau, peak };
        r.check_leak(&psi, psi0.time)?;
        Ok((r, psi))
    }

    fn with_step(&self, dt: f64) -> Result<Self> {
        let xi = self.solver.positions();
        let solver = ReducedSolver::new(1.0, xi[0], xi[xi.len() - 1], xi.len(), dt / self.time)?;
        Ok(Self { solver, ..*self })
    }

    fn check_leak(&self, psi: &[C64], t: f64) -> Result<()> {
        let e = edge_density(psi);
        if e > LEAK_THRESHOLD * self.peak {
            return Err(Error::DomainTooSmall { edge_density: e / self.length, time: t });
        }
        Ok(())
    }

    fn advance(&self, psi: &mut [C64], work: &mut Vec<C64>, steps: usize, t_start: f64) -> Result<()> {
        for s in 1..=steps {
            self.solver.step(psi, work);
            self.check_leak(psi, t_start + s as f64 * self.solver.dt * self.time)?;
        }
        Ok(())
    }
}

fn check_inputs(spec: &ParticleSpec, grid: &Grid1D, psi0: &GridState) -> Result<()> {
    spec.validate()?;
    grid.validate()?;
    grid.check_cfl(spec)?;
    if psi0.psi.len() != grid.n_x {
        return Err(Error::DimensionMismatch { expected: grid.n_x, found: psi0.psi.len() });
    }
    let n = psi0.norm(grid.dx());
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::Validation(format!("initial state norm {n} differs from 1 by more than {NORM_TOL:e}")));
    }
    Ok(())
}

fn split(span: f64, max_dt: f64) -> usize {
    ((span / max_dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Propagates `psi0` to `t_final` under `-hbar^2/(2m) d2 - m g x`.
pub fn grid_evolve(spec: &ParticleSpec, grid: &Grid1D, psi0: &GridState, t_final: f64) -> Result<GridState> {
    check_inputs(spec, grid, psi0)?;
    let span = t_final - psi0.time;
    if !(span.is_finite() && span >= 0.0) {
        return Err(Error::Domain(format!("t_final {t_final} precedes the state time {}", psi0.time)));
    }
    if span == 0.0 {
        return Ok(psi0.clone());
    }
    let steps = split(span, grid.dt);
    let (red, mut psi) = Reduced::new(spec, grid, psi0, span / steps as f64)?;
    let mut work = Vec::new();
    red.advance(&mut psi, &mut work, steps, psi0.time)?;
    let scale = 1.0 / red.length.sqrt();
    let out = GridState { psi: psi.iter().map(|z| z * scale).collect(), time: t_final };
    let n = out.norm(grid.dx());
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::Numerical(format!("norm drifted to {n}")));
    }
    Ok(out)
}

/// Probability of `(-inf, x_d]` and its rate of change sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorTrace {
    pub detector_x: f64,
    pub times: TimeGrid,
    pub probability: Vec<f64>,
    /// `d/dt` of `probability` from the commutator with the discrete Hamiltonian.
    pub rate: Vec<f64>,
    /// Bond current across the detector.
    pub current: Vec<f64>,
}

/// Runs the solver across `times`, recording the half-space population at `x_d`.
///
/// `x_d` must lie strictly between two nodes of `grid`; see [`Grid1D::aligned`].
pub fn track_detector(
    spec: &ParticleSpec,
    grid: &Grid1D,
    psi0: &GridState,
    x_d: f64,
    times: &TimeGrid,
) -> Result<DetectorTrace> {
    check_inputs(spec, grid, psi0)?;
    let k = grid.bond_below(x_d)?;
    let lead = times.t0() - psi0.time;
    if !(lead >= 0.0) {
        return Err(Error::Domain(format!("time grid starts at {} before the state time {}", times.t0(), psi0.time)));
    }
    let sub = split(times.dt(), grid.dt);
    let (red, mut psi) = Reduced::new(spec, grid, psi0, times.dt() / sub as f64)?;
    let mut work = Vec::new();
    if lead > 0.0 {
        let first = split(lead, grid.dt);
        red.with_step(lead / first as f64)?.advance(&mut psi, &mut work, first, psi0.time)?;
    }

    let n = times.len();
    let (mut probability, mut rate, mut current) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        if i > 0 {
            red.advance(&mut psi, &mut work, sub, times.time(i - 1))?;
        }
        probability.push(red.solver.half_space_probability(&psi, k));
        rate.push(red.solver.half_space_rate(&psi, k) / red.time);
        current.push(red.solver.bond_current(&psi, k) / red.time);
    }
    Ok(DetectorTrace { detector_x: x_d, times: *times, probability, rate, current })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced_gaussian(solver: &ReducedSolver, sigma: f64) -> Vec<C64> {
        let mut psi: Vec<C64> = solver.positions().iter().map(|x| C64::new((-x * x / (4.0 * sigma * sigma)).exp(), 0.0)).collect();
        let n = psi.len();
        psi[0] = C64::new(0.0, 0.0);
        psi[n - 1] = C64::new(0.0, 0.0);
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * solver.dx();
        psi.iter_mut().for_each(|z| *z /= norm.sqrt());
        psi
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 100, 1e-3).is_err());
        assert!(Grid1D::new(1.0, 0.0, 512, 1e-3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 512, 0.0).is_err());
        let spec = ParticleSpec::nondimensional(1.0).unwrap();
        let g = Grid1D::new(-10.0, 10.0, 512, 1.0).unwrap();
        assert!(g.check_cfl(&spec).is_err());
    }

    #[test]
    fn alignment_puts_detector_on_a_bond_midpoint() {
        let spec = ParticleSpec::nondimensional(1.0).unwrap();
        let g = Grid1D::auto(&spec, 2.0, 1024).unwrap().aligned(3.3).unwrap();
        let k = g.bond_below(3.3).unwrap();
        assert!((0.5 * (g.x(k) + g.x(k + 1)) - 3.3).abs() < 1e-12);
        assert!(g.bond_below(g.x(10)).is_err());
    }

    #[test]
    fn norm_is_conserved_over_many_steps() {
        let solver = ReducedSolver::new(1.0, -20.0, 40.0, 1024, 1e-3).unwrap();
        let mut psi = reduced_gaussian(&solver, 1.0);
        let mut work = Vec::new();
        for _ in 0..10_000 {
            solver.step(&mut psi, &mut work);
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * solver.dx();
        assert!((norm - 1.0).abs() < 1e-8, "{norm}");
    }

    #[test]
    fn free_spreading_matches_width_law() {
        let sigma = 1.0;
        let n = 4096;
        let (lo, hi) = (-30.0, 30.0);
        let dx = (hi - lo) / (n - 1) as f64;
        let solver = ReducedSolver::new(0.0, lo, hi, n, 0.5 * dx * dx).unwrap();
        let mut psi = reduced_gaussian(&solver, sigma);
        let mut work = Vec::new();
        let steps = (1.5 / solver.dt()).round() as usize;
        for _ in 0..steps {
            solver.step(&mut psi, &mut work);
        }
        let t = steps as f64 * solver.dt();
        let var: f64 = solver.positions().iter().zip(&psi).map(|(x, z)| x * x * z.norm_sqr()).sum::<f64>() * solver.dx();
        // hbar / (2m) = 1 in reduced units
        let expected = sigma * (1.0 + (t / (sigma * sigma)).powi(2)).sqrt();
        assert!((var.sqrt() / expected - 1.0).abs() < 1e-4, "{} vs {expected}", var.sqrt());
    }

    #[test]
    fn commutator_rate_equals_bond_current() {
        let solver = ReducedSolver::new(1.0, -15.0, 25.0, 512, 1e-3).unwrap();
        let mut psi = reduced_gaussian(&solver, 1.0);
        let mut work = Vec::new();
        for _ in 0..500 {
            solver.step(&mut psi, &mut work);
        }
        for k in [200, 220, 260] {
            let r = solver.half_space_rate(&psi, k);
            let j = solver.bond_current(&psi, k);
            assert!((r + j).abs() < 1e-8 * j.abs(), "{r} vs {j}");
        }
    }

    #[test]
    fn leak_is_detected() {
        let spec = ParticleSpec::nondimensional(1.0).unwrap();
        let grid = Grid1D::auto(&spec, 0.5, 512).unwrap();
        let psi0 = gaussian_state(&spec, &grid).unwrap();
        assert!(matches!(grid_evolve(&spec, &grid, &psi0, 6.0), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn evolve_rejects_bad_inputs() {
        let spec = ParticleSpec::nondimensional(1.0).unwrap();
        let grid = Grid1D::auto(&spec, 1.0, 512).unwrap();
        let mut psi0 = gaussian_state(&spec, &grid).unwrap();
        assert!(grid_evolve(&spec, &grid, &psi0, -1.0).is_err());
        let peak = (-grid.x_min / grid.dx()) as usize;
        psi0.psi[peak] *= 2.0;
        assert!(matches!(grid_evolve(&spec, &grid, &psi0, 1.0), Err(Error::Validation(_))));
    }
}
