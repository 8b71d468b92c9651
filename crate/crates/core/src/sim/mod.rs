//! Finite-difference simulation of the closed loop.
//!
//! The plant is written in the lifted variable `w = z − ψ(x)u(t − r)`, which
//! has homogeneous Neumann conditions and obeys
//! `w_t = w_xx + g(t, x, w + ψu(t − r)) − ψ v(t − r)` with `u̇ = −μu + v`.
//! It is integrated by FTCS on a uniform grid with mirrored ghost nodes.
//!
//! Without delay a modal observer of modes 0..=N drives `v = −K₀ col{u, ŵ^{N₀}}`.
//! With delay r, M sub-predictors each estimate the state r/M ahead of the
//! next one; predictor i is driven by `v(t − (i−1)r/M)` and evaluates the
//! nonlinearity at the shifted time `t + (M+1−i)r/M`.

pub mod delay;
pub mod nonlinearity;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{eigenvalue, input_coefficient, trapezoid, BasisTable, MU};
use crate::synthesis::GainSet;
pub use delay::DelayBuffer;
pub use nonlinearity::{max_at_zero_state, Catalog, Nonlinearity};

/// Magnitude at which a run is declared unstable and aborted.
pub const BLOW_UP: f64 = 1e12;

/// Initial condition z(0, ·); the input history is zero.
pub type InitialCondition = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SimConfig {
    /// Number of grid intervals.
    pub nx: usize,
    /// Upper bound on dt / dx².
    pub cfl: f64,
    pub t_final: f64,
    pub r: f64,
    /// Number of sub-predictors (ignored when r = 0).
    pub m: usize,
    pub n0: usize,
    pub n: usize,
    /// Measurement point; snapped to the nearest node.
    pub x_star: f64,
    pub gains: GainSet,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    pub initial: InitialCondition,
    /// Time between recorded samples.
    pub sample_interval: f64,
    /// Also keep full w and z profiles at every recorded sample.
    pub keep_profiles: bool,
}

impl std::fmt::Debug for SimConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimConfig")
            .field("nx", &self.nx)
            .field("t_final", &self.t_final)
            .field("r", &self.r)
            .field("m", &self.m)
            .field("n0", &self.n0)
            .field("n", &self.n)
            .field("x_star", &self.x_star)
            .field("gains", &self.gains)
            .field("nonlinearity", &self.nonlinearity.name())
            .finish()
    }
}

/// Default initial condition 8.5 x (1 − x).
pub fn default_initial() -> InitialCondition {
    Arc::new(|x| 8.5 * x * (1.0 - x))
}

impl SimConfig {
    /// Delayed loop with the default grid, horizon and initial condition.
    pub fn delayed(gains: GainSet, n0: usize, n: usize, r: f64, m: usize, g: Arc<dyn Nonlinearity>) -> Self {
        Self {
            nx: 200,
            cfl: 0.4,
            t_final: 20.0,
            r,
            m,
            n0,
            n,
            x_star: 0.0,
            gains,
            nonlinearity: g,
            initial: default_initial(),
            sample_interval: 0.01,
            keep_profiles: false,
        }
    }

    /// Non-delayed loop (r = 0).
    pub fn nodelay(gains: GainSet, n0: usize, n: usize, g: Arc<dyn Nonlinearity>) -> Self {
        Self { r: 0.0, m: 0, ..Self::delayed(gains, n0, n, 0.0, 1, g) }
    }

    pub fn is_delayed(&self) -> bool {
        self.r > 0.0
    }

    /// Checks dimensions and derives the step size and delay lags.
    pub fn discretize(&self) -> Result<Discretization> {
        if self.nx < 4 {
            return Err(Error::Config(format!("Nx = {} must be at least 4", self.nx)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Config(format!("dt/dx² bound {} must lie in (0, 1/2]", self.cfl)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("T = {} must be positive", self.t_final)));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::Config(format!("r = {} must be nonnegative", self.r)));
        }
        if !(0.0..=1.0).contains(&self.x_star) {
            return Err(Error::Config(format!("x* = {} outside [0, 1]", self.x_star)));
        }
        if self.n < self.n0 {
            return Err(Error::Config(format!("N = {} must be at least N0 = {}", self.n, self.n0)));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::Config("sample interval must be positive".into()));
        }
        let delayed = self.is_delayed();
        if delayed && self.m < 1 {
            return Err(Error::Config("M must be at least 1 when r > 0".into()));
        }
        let l_len = if delayed { self.n0 + 2 } else { self.n0 + 1 };
        if self.gains.l0.len() != l_len || self.gains.l0.ncols() != 1 {
            return Err(Error::Config(format!("L0 must have {l_len} entries, found {}", self.gains.l0.len())));
        }
        if self.gains.k0.len() != self.n0 + 2 || self.gains.k0.nrows() != 1 {
            return Err(Error::Config(format!("K0 must have {} entries, found {}", self.n0 + 2, self.gains.k0.len())));
        }
        let dx = 1.0 / self.nx as f64;
        let dt_max = self.cfl * dx * dx;
        let (dt, lag) = if delayed {
            let h = self.r / self.m as f64;
            let lag = (h / dt_max).ceil().max(1.0) as usize;
            (h / lag as f64, lag)
        } else {
            (dt_max, 0)
        };
        let steps = (self.t_final / dt).round() as usize;
        let stride = ((self.sample_interval / dt).round() as usize).max(1);
        let j_star = (self.x_star * self.nx as f64).round() as usize;
        Ok(Discretization { dx, dt, lag, steps, stride, j_star, x_star: j_star as f64 * dx })
    }
}

/// Step size and integer lags derived from a [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub dx: f64,
    pub dt: f64,
    /// Steps per sub-interval r/M (0 without delay).
    pub lag: usize,
    pub steps: usize,
    /// Steps between recorded samples.
    pub stride: usize,
    pub j_star: usize,
    /// Snapped measurement point.
    pub x_star: f64,
}

/// Recorded diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// u(t − r), the input entering the boundary.
    pub u_delayed: Vec<f64>,
    pub y: Vec<f64>,
    /// ‖w(·, t)‖_{H¹}.
    pub h1_w: Vec<f64>,
    /// ‖ŵ(·, t)‖_{H¹} of the reconstructed observer field.
    pub h1_what: Vec<f64>,
    /// Max-norm telescoping mismatch of the predictor chain (0 without delay).
    pub telescope_residual: Vec<f64>,
    /// w and z profiles at every sample (kept only on request).
    pub w_profiles: Vec<Vec<f64>>,
    pub z_profiles: Vec<Vec<f64>>,
    /// Time at which the run was aborted for unbounded growth.
    pub blow_up: Option<f64>,
    /// Largest |g(t, x, 0)| when it is not identically zero.
    pub zero_state_violation: Option<f64>,
    pub discretization: Option<Discretization>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Exponential decay rate of ‖w‖_{H¹} fitted over the second half of the run.
    pub fn decay_rate(&self) -> Option<f64> {
        let t_end = *self.t.last()?;
        let pts: Vec<(f64, f64)> = self
            .t
            .iter()
            .zip(&self.h1_w)
            .filter(|(t, h)| **t >= 0.5 * t_end && **h > 0.0)
            .map(|(t, h)| (*t, h.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    }

    /// Writes `t,u_delayed,y,h1_w,h1_what,telescope_residual` with 9 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "u_delayed", "y", "h1_w", "h1_what", "telescope_residual"])?;
        for k in 0..self.len() {
            let row = [self.t[k], self.u_delayed[k], self.y[k], self.h1_w[k], self.h1_what[k], self.telescope_residual[k]];
            w.write_record(row.iter().map(|v| sig9(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Formats with 9 significant digits, independent of locale.
pub fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    if (-4..9).contains(&e) {
        format!("{:.*}", (8 - e) as usize, v)
    } else {
        format!("{v:.8e}")
    }
}

/// Writes one `x,w,z` CSV per recorded profile into `dir`.
pub fn save_snapshots(traj: &Trajectory, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, (w, z)) in traj.w_profiles.iter().zip(&traj.z_profiles).enumerate() {
        let mut out = csv::Writer::from_path(dir.join(format!("snapshot_{k:05}.csv")))?;
        out.write_record(["x", "w", "z"])?;
        let nx = w.len() - 1;
        for j in 0..=nx {
            out.write_record([sig9(j as f64 / nx as f64), sig9(w[j]), sig9(z[j])])?;
        }
        out.flush()?;
    }
    Ok(())
}

/// H¹ norm of grid samples: trapezoid rule for ∫f² + ∫f'², with central
/// differences inside and second-order one-sided differences at the ends.
pub fn h1_norm(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 3 {
        return values.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let dx = 1.0 / (n - 1) as f64;
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * dx);
    }
    let dsq: Vec<f64> = d.iter().map(|v| v * v).collect();
    (trapezoid(&sq) + trapezoid(&dsq)).sqrt()
}

/// FTCS state of the lifted plant.
#[derive(Debug, Clone)]
pub struct Plant {
    pub w: Vec<f64>,
    psi: Vec<f64>,
    x: Vec<f64>,
    scratch: Vec<f64>,
}

impl Plant {
    pub fn new(nx: usize, w0: impl Fn(f64) -> f64) -> Self {
        let x: Vec<f64> = (0..=nx).map(|j| j as f64 / nx as f64).collect();
        Self {
            w: x.iter().map(|&x| w0(x)).collect(),
            psi: x.iter().map(|&x| crate::spectral::psi(x)).collect(),
            x,
            scratch: vec![0.0; nx + 1],
        }
    }

    pub fn nx(&self) -> usize {
        self.w.len() - 1
    }

    /// z = w + ψ u(t − r) on the grid.
    pub fn z(&self, u_delayed: f64) -> Vec<f64> {
        self.w.iter().zip(&self.psi).map(|(w, p)| w + p * u_delayed).collect()
    }

    /// y = z(x_j, t).
    pub fn measurement(&self, j: usize, u_delayed: f64) -> f64 {
        self.w[j] + self.psi[j] * u_delayed
    }

    /// One explicit step of `w_t = w_xx + g(t, x, w + ψu_d) − ψ v_d` with
    /// w_x = 0 at both ends.
    pub fn step_pde(&mut self, t: f64, dt: f64, u_delayed: f64, v_delayed: f64, g: &dyn Nonlinearity) {
        let n = self.w.len();
        let dx = 1.0 / (n - 1) as f64;
        let c = dt / (dx * dx);
        let w = &self.w;
        for j in 0..n {
            let left = if j == 0 { w[1] } else { w[j - 1] };
            let right = if j == n - 1 { w[n - 2] } else { w[j + 1] };
            let z = w[j] + self.psi[j] * u_delayed;
            let src = g.eval(t, self.x[j], z) - self.psi[j] * v_delayed;
            self.scratch[j] = w[j] + c * (left - 2.0 * w[j] + right) + dt * src;
        }
        std::mem::swap(&mut self.w, &mut self.scratch);
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().fold(0.0, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY })
    }
}

/// v = −K₀ x.
pub fn control(k0: &[f64], state: &[f64]) -> f64 {
    -k0.iter().zip(state).map(|(k, s)| k * s).sum::<f64>()
}

/// Shared modal data for observers and predictors.
struct Modal {
    table: BasisTable,
    lam: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    field: Vec<f64>,
    gvals: Vec<f64>,
}

impl Modal {
    fn new(n: usize, nx: usize) -> Self {
        Self {
            table: BasisTable::new(n, nx),
            lam: (0..=n).map(eigenvalue).collect(),
            b: (0..=n).map(input_coefficient).collect(),
            x: (0..=nx).map(|j| j as f64 / nx as f64).collect(),
            field: vec![0.0; nx + 1],
            gvals: vec![0.0; nx + 1],
        }
    }

    /// Fills `field` with u ψ + Σ a_n φ_n.
    fn synthesize(&mut self, u: f64, modes: &[f64]) {
        for j in 0..self.field.len() {
            let mut v = u * self.table.psi[j];
            for (n, a) in modes.iter().enumerate() {
                v += a * self.table.rows[n][j];
            }
            self.field[j] = v;
        }
    }

    /// ⟨g(t, ·, field), φ_n⟩ for all modes.
    fn project_g(&mut self, t: f64, g: &dyn Nonlinearity, out: &mut [f64]) {
        for j in 0..self.field.len() {
            self.gvals[j] = g.eval(t, self.x[j], self.field[j]);
        }
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.table.project(&self.gvals, n);
        }
    }

    fn h1_of_modes(&mut self, modes: &[f64]) -> f64 {
        self.synthesize(0.0, modes);
        h1_norm(&self.field)
    }
}

/// Modal observer of ŵ_0..ŵ_N for the non-delayed loop.
#[derive(Debug, Clone)]
pub struct ModalObserver {
    pub modes: Vec<f64>,
}

impl ModalObserver {
    fn step(&mut self, m: &mut Modal, t: f64, dt: f64, u: f64, v: f64, y: f64, l0: &[f64], c: &[f64], psi_star: f64, g: &dyn Nonlinearity) {
        let innov = psi_star * u + self.modes.iter().zip(c).map(|(a, c)| a * c).sum::<f64>() - y;
        m.synthesize(u, &self.modes);
        let mut gh = vec![0.0; self.modes.len()];
        m.project_g(t, g, &mut gh);
        for n in 0..self.modes.len() {
            let l = l0.get(n).copied().unwrap_or(0.0);
            self.modes[n] += dt * (-m.lam[n] * self.modes[n] + m.b[n] * v + gh[n] - l * innov);
        }
    }
}

/// Chain of M predictors; block i holds col{û, ŵ_0, ..., ŵ_N}.
#[derive(Debug, Clone)]
pub struct PredictorChain {
    pub blocks: Vec<Vec<f64>>,
    history: Vec<DelayBuffer<Vec<f64>>>,
    lag: usize,
}

impl PredictorChain {
    pub fn new(m: usize, n: usize, lag: usize) -> Self {
        let zero = vec![0.0; n + 2];
        Self {
            blocks: vec![zero.clone(); m],
            history: (0..m).map(|_| DelayBuffer::new(m * lag, zero.clone())).collect(),
            lag,
        }
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    /// Block i (0-based) `steps` steps ago; the current value once recorded.
    pub fn lagged(&self, i: usize, steps: usize) -> &[f64] {
        self.history[i].lagged(steps)
    }

    fn record(&mut self) {
        for (h, b) in self.history.iter_mut().zip(&self.blocks) {
            h.push(b.clone());
        }
    }

    /// Σ telescoping differences against the plant state col{u(t − r), w_0..w_{N₀}}.
    pub fn telescope_residual(&self, plant_n0: &[f64]) -> f64 {
        let (m, d) = (self.m(), self.lag);
        let k = plant_n0.len();
        let mut total: Vec<f64> = self.lagged(0, m * d)[..k].to_vec();
        for i in 0..m {
            // e_i for 1-based i+1: next block (or the plant) minus block i, both shifted
            let lag_i = (m - i) * d;
            let here = &self.lagged(i, lag_i)[..k];
            let next: &[f64] = if i + 1 < m { &self.lagged(i + 1, lag_i - d)[..k] } else { plant_n0 };
            for c in 0..k {
                total[c] += next[c] - here[c];
            }
        }
        total.iter().zip(plant_n0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Runs the closed loop; a blow-up ends the run early with `blow_up` set.
pub fn run_closed_loop(cfg: &SimConfig) -> Result<Trajectory> {
    let disc = cfg.discretize()?;
    let g = cfg.nonlinearity.as_ref();
    let mut traj = Trajectory { discretization: Some(disc), ..Default::default() };
    let worst = max_at_zero_state(g);
    if worst > 0.0 {
        log::warn!("nonlinearity '{}' has g(t, x, 0) ≠ 0 (max {worst:.3e}); the origin is not an equilibrium", g.name());
        traj.zero_state_violation = Some(worst);
    }
    let (n0, n) = (cfg.n0, cfg.n);
    let l0: Vec<f64> = cfg.gains.l0.iter().copied().collect();
    let k0: Vec<f64> = cfg.gains.k0.iter().copied().collect();
    let psi_star = crate::spectral::psi(disc.x_star);
    let c: Vec<f64> = (0..=n).map(|k| crate::spectral::phi(k, disc.x_star)).collect();
    let dt = disc.dt;

    let mut plant = Plant::new(cfg.nx, |x| (cfg.initial)(x));
    let mut modal = Modal::new(n, cfg.nx);
    let mut u = 0.0;
    let delayed = cfg.is_delayed();
    let total_lag = cfg.m * disc.lag;
    let mut u_hist = DelayBuffer::new(total_lag, 0.0);
    let mut v_hist = DelayBuffer::new(total_lag, 0.0);
    let mut observer = ModalObserver { modes: vec![0.0; n + 1] };
    let mut chain = PredictorChain::new(if delayed { cfg.m } else { 0 }, n, disc.lag);
    let mut ghat = vec![0.0; n + 1];
    let mut next_blocks = chain.blocks.clone();

    for k in 0..=disc.steps {
        let t = k as f64 * dt;
        u_hist.push(u);
        chain.record();
        let ud = *u_hist.lagged(total_lag);
        let y = plant.measurement(disc.j_star, ud);
        let v = if delayed {
            control(&k0, &chain.blocks[0][..n0 + 2])
        } else {
            let mut s = vec![u];
            s.extend_from_slice(&observer.modes[..=n0]);
            control(&k0, &s)
        };
        v_hist.push(v);
        let vd = *v_hist.lagged(total_lag);

        if k % disc.stride == 0 {
            let h1_what;
            let mut residual = 0.0;
            if delayed {
                let old = chain.lagged(0, total_lag).to_vec();
                h1_what = modal.h1_of_modes(&old[1..]);
                let mut plant_n0 = vec![ud];
                plant_n0.extend((0..=n0).map(|q| modal.table.project(&plant.w, q)));
                residual = chain.telescope_residual(&plant_n0);
            } else {
                h1_what = modal.h1_of_modes(&observer.modes);
            }
            traj.t.push(t);
            traj.u_delayed.push(ud);
            traj.y.push(y);
            traj.h1_w.push(h1_norm(&plant.w));
            traj.h1_what.push(h1_what);
            traj.telescope_residual.push(residual);
            if cfg.keep_profiles {
                traj.w_profiles.push(plant.w.clone());
                traj.z_profiles.push(plant.z(ud));
            }
        }
        if k == disc.steps {
            break;
        }

        if delayed {
            let m = cfg.m;
            for i in 0..m {
                let vi = *v_hist.lagged(i * disc.lag);
                let cur = &chain.blocks[i];
                let own_past = chain.lagged(i, disc.lag);
                let c_own = psi_star * own_past[0] + own_past[1..].iter().zip(&c).map(|(a, c)| a * c).sum::<f64>();
                let target = if i + 1 < m {
                    let nb = &chain.blocks[i + 1];
                    psi_star * nb[0] + nb[1..].iter().zip(&c).map(|(a, c)| a * c).sum::<f64>()
                } else {
                    y
                };
                let innov = c_own - target;
                modal.synthesize(cur[0], &cur[1..]);
                let shift = (m - i) as f64 * cfg.r / m as f64;
                modal.project_g(t + shift, g, &mut ghat);
                let nb = &mut next_blocks[i];
                nb[0] = cur[0] + dt * (-MU * cur[0] + vi - l0[0] * innov);
                for q in 0..=n {
                    let l = if q <= n0 { l0[q + 1] } else { 0.0 };
                    nb[q + 1] = cur[q + 1] + dt * (-modal.lam[q] * cur[q + 1] + modal.b[q] * vi + ghat[q] - l * innov);
                }
            }
            std::mem::swap(&mut chain.blocks, &mut next_blocks);
        } else {
            observer.step(&mut modal, t, dt, u, v, y, &l0, &c, psi_star, g);
        }
        u += dt * (-MU * u + v);
        plant.step_pde(t, dt, ud, vd, g);

        let worst_state = plant.max_abs().max(u.abs()).max(
            chain.blocks.iter().chain(std::iter::once(&observer.modes)).flatten().fold(0.0, |a: f64, b| if b.is_finite() { a.max(b.abs()) } else { f64::INFINITY }),
        );
        if worst_state > BLOW_UP {
            traj.blow_up = Some(t + dt);
            log::warn!("state exceeded {BLOW_UP:e} at t = {:.4}; aborting", t + dt);
            break;
        }
    }
    Ok(traj)
}
