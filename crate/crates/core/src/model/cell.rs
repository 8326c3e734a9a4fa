//! Implicit finite-volume P2D cell with lumped thermal balance.
//!
//! Unknowns of the Newton system, ordered cell by cell along x so the
//! Jacobian is banded: electrolyte concentration, electrolyte potential and,
//! in electrode cells, solid potential and interfacial current density
//! `i_loc = F j` (A/m^2). Particle diffusion is linear in the surface flux, so
//! each particle is condensed to an affine map `c_surf = base - gain * i_loc`
//! that is exact for the implicit radial scheme.

use serde::{Deserialize, Serialize};

use super::band::{solve_tridiagonal, BandMatrix};
use super::kinetics::{electrolyte_conductivity, electrolyte_conductivity_slope};
use super::mesh::{Mesh, MeshSpec, Region};
use super::ocp::{OcpCurve, OcpSet};
use crate::degradation::{
    crack_growth_step, lam_step, plating_step, sei_growth_step, surface_stress, volume_average,
    DegradationState, SeiSurface,
};
use crate::error::{Error, Result};
use crate::params::{Electrode, ParameterSet};

const NONE: usize = usize::MAX;
const BANDWIDTH: usize = 7;
/// A discharge step that fails this close above the lower cutoff ends the run as a cutoff, V.
const CUTOFF_MARGIN: f64 = 0.15;

/// Solver and operating-window options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol_newton: f64,
    pub max_newton_iter: usize,
    pub dt_floor: f64,
    /// Largest internal step, s.
    pub dt_max: f64,
    /// Lower / upper cell-voltage cutoffs, V.
    pub v_min: f64,
    pub v_max: f64,
    /// Consecutive fast steps before the internal step is doubled.
    pub grow_after: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_newton: 1e-8,
            max_newton_iter: 25,
            dt_floor: 1e-4,
            dt_max: 10.0,
            v_min: 2.5,
            v_max: 4.2,
            grow_after: 3,
        }
    }
}

/// Discretized internal state of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    /// Solid concentration, `[cell][shell]` flattened, negative electrode.
    pub c_s_neg: Vec<f64>,
    /// Solid concentration, `[cell][shell]` flattened, positive electrode.
    pub c_s_pos: Vec<f64>,
    /// Surface concentration at every x node (zero in the separator).
    pub c_surf: Vec<f64>,
    pub c_e: Vec<f64>,
    pub phi_s: Vec<f64>,
    pub phi_e: Vec<f64>,
    /// Interfacial current density F j, A/m^2 (zero in the separator).
    pub i_loc: Vec<f64>,
    pub temperature: f64,
    pub time: f64,
    /// Terminal voltage of the last converged step.
    pub v_cell: f64,
    /// Applied current of the last converged step, A.
    pub current: f64,
    pub degradation: DegradationState,
}

impl CellState {
    pub fn c_s(&self, electrode: Electrode) -> &[f64] {
        match electrode {
            Electrode::Pos => &self.c_s_pos,
            Electrode::Neg => &self.c_s_neg,
        }
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
}

/// Per-electrode coefficients frozen over one step.
struct ParticleStep {
    /// Surface concentration with zero flux, per x cell of the electrode.
    base: Vec<f64>,
    /// End-of-step shell concentrations with zero flux.
    zero_flux: Vec<f64>,
    /// Response of the shells to unit particle flux.
    unit: Vec<f64>,
    /// d c_surf / d i_loc (positive).
    gain: f64,
    /// Shell response per unit i_loc, i.e. `unit * 3 roughness / (R F)`.
    unit_scale: f64,
}

struct StepContext {
    dt: f64,
    i_dens: f64,
    temperature: f64,
    i_scale: f64,
    neg: ParticleStep,
    pos: ParticleStep,
    a_eff: Vec<f64>,
    sigma_face: [f64; 2],
    film: f64,
    d_face: Vec<f64>,
    c_e_old: Vec<f64>,
}

/// A cell model bound to one parameter set and mesh.
#[derive(Debug, Clone)]
pub struct Cell {
    pub params: ParameterSet,
    pub mesh: Mesh,
    pub ocp: OcpSet,
    pub options: SolverOptions,
    /// Optional dOCV/dT table versus state of charge for reversible heat.
    pub entropic: Option<OcpCurve>,
    pub state: CellState,
    ice: Vec<usize>,
    ipe: Vec<usize>,
    ips: Vec<usize>,
    iil: Vec<usize>,
    n_unknowns: usize,
    eps_am0: [f64; 2],
    /// Seed for the next internal step size.
    dt_hint: f64,
    fast_streak: usize,
}

fn idx(e: Electrode) -> usize {
    match e {
        Electrode::Neg => 0,
        Electrode::Pos => 1,
    }
}

impl Cell {
    /// Cell at rest at the given state of charge.
    pub fn new(params: ParameterSet, mesh_spec: MeshSpec, options: SolverOptions, soc: f64) -> Result<Self> {
        Self::with_ocp(params, mesh_spec, options, OcpSet::default(), soc)
    }

    pub fn with_ocp(
        params: ParameterSet,
        mesh_spec: MeshSpec,
        options: SolverOptions,
        ocp: OcpSet,
        soc: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::input(format!("initial SoC {soc} outside [0, 1]")));
        }
        let mesh = Mesh::new(mesh_spec, &params)?;
        let n_x = mesh.n_x();
        let (mut ice, mut ipe, mut ips, mut iil) =
            (vec![NONE; n_x], vec![NONE; n_x], vec![NONE; n_x], vec![NONE; n_x]);
        let mut next = 0;
        for k in 0..n_x {
            ice[k] = next;
            ipe[k] = next + 1;
            next += 2;
            if mesh.region[k] != Region::Sep {
                ips[k] = next;
                iil[k] = next + 1;
                next += 2;
            }
        }
        let eps_am0 = [params.eps_am(Electrode::Neg), params.eps_am(Electrode::Pos)];
        let state = CellState {
            c_s_neg: Vec::new(),
            c_s_pos: Vec::new(),
            c_surf: vec![0.0; n_x],
            c_e: vec![params.c_e_init; n_x],
            phi_s: vec![0.0; n_x],
            phi_e: vec![0.0; n_x],
            i_loc: vec![0.0; n_x],
            temperature: params.t_amb,
            time: 0.0,
            v_cell: 0.0,
            current: 0.0,
            degradation: DegradationState::fresh(&params),
        };
        let mut cell = Self {
            params,
            mesh,
            ocp,
            options,
            entropic: None,
            state,
            ice,
            ipe,
            ips,
            iil,
            n_unknowns: next,
            eps_am0,
            dt_hint: f64::INFINITY,
            fast_streak: 0,
        };
        cell.set_equilibrium(soc)?;
        Ok(cell)
    }

    /// Reset concentrations and potentials to rest at `soc`, keeping degradation
    /// and temperature. Lithium already lost to side reactions stays lost.
    pub fn set_equilibrium(&mut self, soc: f64) -> Result<()> {
        let p = &self.params;
        let n_r = self.mesh.n_r();
        let deg = &self.state.degradation;
        let missing = deg.side_reaction_loss() + deg.li_trapped_lam;
        let host = p.a_cell * p.l_n * p.c_n_max;
        let theta_n = (self.eps_am0[0] * p.stoichiometry_at_soc(Electrode::Neg, soc) * host - missing)
            / (deg.eps_am_n * host);
        let theta_p = p.stoichiometry_at_soc(Electrode::Pos, soc);
        if !(0.0..1.0).contains(&theta_n) || !(0.0..1.0).contains(&theta_p) {
            return Err(Error::input(format!(
                "SoC {soc} gives stoichiometries ({theta_n}, {theta_p}) outside (0, 1)"
            )));
        }
        let un = self.ocp.ocp(Electrode::Neg, theta_n)?;
        let up = self.ocp.ocp(Electrode::Pos, theta_p)?;
        let s = &mut self.state;
        s.c_s_neg = vec![theta_n * p.c_n_max; self.mesh.spec.n_neg * n_r];
        s.c_s_pos = vec![theta_p * p.c_p_max; self.mesh.spec.n_pos * n_r];
        s.c_e = vec![p.c_e_init; self.mesh.n_x()];
        for k in 0..self.mesh.n_x() {
            s.phi_e[k] = 0.0;
            s.i_loc[k] = 0.0;
            match self.mesh.region[k] {
                Region::Neg => {
                    s.phi_s[k] = un;
                    s.c_surf[k] = theta_n * p.c_n_max;
                }
                Region::Pos => {
                    s.phi_s[k] = up;
                    s.c_surf[k] = theta_p * p.c_p_max;
                }
                Region::Sep => {
                    s.phi_s[k] = 0.0;
                    s.c_surf[k] = 0.0;
                }
            }
        }
        s.v_cell = up - un;
        s.current = 0.0;
        Ok(())
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    /// Electrode cells of the mesh.
    fn cells(&self, e: Electrode) -> std::ops::Range<usize> {
        match e {
            Electrode::Neg => self.mesh.neg_range(),
            Electrode::Pos => self.mesh.pos_range(),
        }
    }

    fn roughness(&self, e: Electrode) -> f64 {
        let p = &self.params;
        p.surface_area(e) * p.radius(e) / (3.0 * self.eps_am0[idx(e)])
    }

    /// Lithium in the solid and electrolyte phases, mol.
    pub fn lithium_inventory(&self) -> (f64, f64) {
        let p = &self.params;
        let n_r = self.mesh.n_r();
        let w = &self.mesh.shell_fraction;
        let mut solid = 0.0;
        for e in [Electrode::Neg, Electrode::Pos] {
            let eps = self.state.degradation.eps_am(e);
            for (local, k) in self.cells(e).enumerate() {
                let shells = &self.state.c_s(e)[local * n_r..(local + 1) * n_r];
                solid += p.a_cell * self.mesh.dx[k] * eps * volume_average(shells, w);
            }
        }
        let electrolyte: f64 = (0..self.mesh.n_x())
            .map(|k| p.a_cell * self.mesh.dx[k] * self.porosity(k) * self.state.c_e[k])
            .sum();
        (solid, electrolyte)
    }

    fn porosity(&self, k: usize) -> f64 {
        match self.mesh.region[k] {
            Region::Neg => self.params.eps_n,
            Region::Sep => self.params.eps_sep,
            Region::Pos => self.params.eps_p,
        }
    }

    /// Mean stoichiometry of an electrode.
    pub fn mean_stoichiometry(&self, e: Electrode) -> f64 {
        let n_r = self.mesh.n_r();
        let w = &self.mesh.shell_fraction;
        let mut num = 0.0;
        let mut len = 0.0;
        for (local, k) in self.cells(e).enumerate() {
            let shells = &self.state.c_s(e)[local * n_r..(local + 1) * n_r];
            num += self.mesh.dx[k] * volume_average(shells, w);
            len += self.mesh.dx[k];
        }
        num / len / self.params.c_max(e)
    }

    /// Open-circuit voltage from mean stoichiometries.
    pub fn open_circuit_voltage(&self) -> Result<f64> {
        Ok(self.ocp.ocp(Electrode::Pos, self.mean_stoichiometry(Electrode::Pos))?
            - self.ocp.ocp(Electrode::Neg, self.mean_stoichiometry(Electrode::Neg))?)
    }

    fn particle_step(&self, e: Electrode, dt: f64) -> ParticleStep {
        let p = &self.params;
        let n_r = self.mesh.n_r();
        let rho = &self.mesh.rho_faces;
        let w = &self.mesh.shell_fraction;
        let radius = p.radius(e);
        let diff = p.solid_diffusivity(e);
        let drho = 1.0 / n_r as f64;
        let k = 3.0 * diff / (radius * radius * drho);
        let mut lower = vec![0.0; n_r];
        let mut diag = vec![0.0; n_r];
        let mut upper = vec![0.0; n_r];
        for i in 0..n_r {
            diag[i] = w[i] / dt;
            if i > 0 {
                let c = k * rho[i] * rho[i];
                diag[i] += c;
                lower[i] = -c;
            }
            if i + 1 < n_r {
                let c = k * rho[i + 1] * rho[i + 1];
                diag[i] += c;
                upper[i] = -c;
            }
        }
        let mut unit = vec![0.0; n_r];
        unit[n_r - 1] = 1.0;
        solve_tridiagonal(&lower, &diag, &upper, &mut unit);
        let cells = self.cells(e).len();
        let old = self.state.c_s(e);
        let mut zero_flux = vec![0.0; cells * n_r];
        let mut base = vec![0.0; cells];
        for c in 0..cells {
            let out = &mut zero_flux[c * n_r..(c + 1) * n_r];
            for i in 0..n_r {
                out[i] = w[i] * old[c * n_r + i] / dt;
            }
            solve_tridiagonal(&lower, &diag, &upper, out);
            base[c] = out[n_r - 1];
        }
        let rough = self.roughness(e);
        // c = zero_flux - (3/R) j_p unit, c_surf = c_last - j_p R drho / (2D).
        let unit_scale = 3.0 * rough / (radius * p.faraday);
        let gain = unit_scale * unit[n_r - 1] + rough * radius * drho / (2.0 * diff * p.faraday);
        ParticleStep {
            base,
            zero_flux,
            unit,
            gain,
            unit_scale,
        }
    }

    fn context(&self, current: f64, dt: f64) -> StepContext {
        let p = &self.params;
        let n_x = self.mesh.n_x();
        let deg = &self.state.degradation;
        let i_dens = current / p.a_cell;
        let i_1c = p.q_rated / p.a_cell;
        let mut a_eff = vec![0.0; n_x];
        for k in 0..n_x {
            a_eff[k] = match self.mesh.region[k] {
                Region::Neg => p.a_n * deg.eps_am_n / self.eps_am0[0],
                Region::Pos => p.a_p * deg.eps_am_p / self.eps_am0[1],
                Region::Sep => 0.0,
            };
        }
        let sigma_face = [
            p.sigma_n * deg.eps_am_n / self.mesh.dx[0],
            p.sigma_p * deg.eps_am_p / self.mesh.dx[n_x - 1],
        ];
        let d_eff: Vec<f64> = (0..n_x)
            .map(|k| p.d_e * self.porosity(k).powf(p.bruggeman))
            .collect();
        let d_face = (0..n_x.saturating_sub(1))
            .map(|k| {
                1.0 / (self.mesh.dx[k] / (2.0 * d_eff[k]) + self.mesh.dx[k + 1] / (2.0 * d_eff[k + 1]))
            })
            .collect();
        StepContext {
            dt,
            i_dens,
            temperature: self.state.temperature,
            i_scale: i_dens.abs().max(i_1c),
            neg: self.particle_step(Electrode::Neg, dt),
            pos: self.particle_step(Electrode::Pos, dt),
            a_eff,
            sigma_face,
            film: deg.film_resistance(p),
            d_face,
            c_e_old: self.state.c_e.clone(),
        }
    }

    fn electrode_of(&self, k: usize) -> Option<(Electrode, usize)> {
        match self.mesh.region[k] {
            Region::Neg => Some((Electrode::Neg, k)),
            Region::Pos => Some((Electrode::Pos, k - self.mesh.pos_range().start)),
            Region::Sep => None,
        }
    }

    /// Scaled residual and (optionally) Jacobian. Fails when kinetics are
    /// undefined at `x` (stoichiometry or electrolyte out of range).
    fn assemble(
        &self,
        ctx: &StepContext,
        x: &[f64],
        res: &mut [f64],
        mut jac: Option<&mut BandMatrix>,
    ) -> std::result::Result<(), ()> {
        let p = &self.params;
        let m = &self.mesh;
        let n_x = m.n_x();
        let t = ctx.temperature;
        let f = p.faraday;
        let rt_f = p.gas_constant * t / f;
        let beta = 2.0 * rt_f * (1.0 - p.t_plus);
        let c0 = p.c_e_init;
        let brug = p.bruggeman;
        if let Some(j) = jac.as_deref_mut() {
            j.clear();
        }
        let put = |jac: &mut Option<&mut BandMatrix>, r: usize, c: usize, v: f64| {
            if let Some(j) = jac.as_deref_mut() {
                j.add(r, c, v);
            }
        };

        // Electrolyte conductivities.
        let mut kappa = vec![0.0; n_x];
        let mut dkappa = vec![0.0; n_x];
        for k in 0..n_x {
            let c = x[self.ice[k]];
            if !(c > 0.0) || !c.is_finite() {
                return Err(());
            }
            let scale = self.porosity(k).powf(brug);
            kappa[k] = electrolyte_conductivity(c) * scale;
            dkappa[k] = electrolyte_conductivity_slope(c) * scale;
            if kappa[k] <= 0.0 {
                return Err(());
            }
        }

        for r in res.iter_mut() {
            *r = 0.0;
        }

        // Face fluxes between k and k+1.
        for k in 0..n_x.saturating_sub(1) {
            let (l, rgt) = (k, k + 1);
            let (cl, cr) = (x[self.ice[l]], x[self.ice[rgt]]);
            // Electrolyte diffusion flux F = D_f (c_r - c_l), enters c_e rows.
            let df = ctx.d_face[k];
            let flux = df * (cr - cl);
            let sl = ctx.dt / (m.dx[l] * c0);
            let sr = ctx.dt / (m.dx[rgt] * c0);
            // row l: -(F_r) ; row r: +(F_l)
            res[self.ice[l]] -= sl * flux;
            res[self.ice[rgt]] += sr * flux;
            put(&mut jac, self.ice[l], self.ice[rgt], -sl * df);
            put(&mut jac, self.ice[l], self.ice[l], sl * df);
            put(&mut jac, self.ice[rgt], self.ice[rgt], sr * df);
            put(&mut jac, self.ice[rgt], self.ice[l], -sr * df);

            // Ionic current i_e = -kf [(pe_r - pe_l) - beta (ln c_r - ln c_l)].
            let hl = m.dx[l] / (2.0 * kappa[l]);
            let hr = m.dx[rgt] / (2.0 * kappa[rgt]);
            let kf = 1.0 / (hl + hr);
            let drive = (x[self.ipe[rgt]] - x[self.ipe[l]]) - beta * (cr.ln() - cl.ln());
            let ie = -kf * drive;
            let dkf_dcl = kf * kf * m.dx[l] / (2.0 * kappa[l] * kappa[l]) * dkappa[l];
            let dkf_dcr = kf * kf * m.dx[rgt] / (2.0 * kappa[rgt] * kappa[rgt]) * dkappa[rgt];
            let die = [
                (self.ipe[rgt], -kf),
                (self.ipe[l], kf),
                (self.ice[rgt], kf * beta / cr - dkf_dcr * drive),
                (self.ice[l], -kf * beta / cl - dkf_dcl * drive),
            ];
            let s = 1.0 / ctx.i_scale;
            // row l gets +ie (i_e,right), row r gets -ie (i_e,left); row 0 is the gauge.
            if l != 0 {
                res[self.ipe[l]] += s * ie;
                for (c, v) in die {
                    put(&mut jac, self.ipe[l], c, s * v);
                }
            }
            res[self.ipe[rgt]] -= s * ie;
            for (c, v) in die {
                put(&mut jac, self.ipe[rgt], c, -s * v);
            }

            // Solid current between two cells of the same electrode.
            if m.region[l] == m.region[rgt] && m.region[l] != Region::Sep {
                let sig = if m.region[l] == Region::Neg { ctx.sigma_face[0] } else { ctx.sigma_face[1] };
                let is = -sig * (x[self.ips[rgt]] - x[self.ips[l]]);
                res[self.ips[l]] += s * is;
                res[self.ips[rgt]] -= s * is;
                put(&mut jac, self.ips[l], self.ips[rgt], -s * sig);
                put(&mut jac, self.ips[l], self.ips[l], s * sig);
                put(&mut jac, self.ips[rgt], self.ips[rgt], s * sig);
                put(&mut jac, self.ips[rgt], self.ips[l], -s * sig);
            }
        }

        // Collector boundary currents: i_s = i at x = 0 (left face of first
        // negative cell) and at x = L (right face of last positive cell).
        {
            let s = 1.0 / ctx.i_scale;
            res[self.ips[0]] -= s * ctx.i_dens;
            res[self.ips[n_x - 1]] += s * ctx.i_dens;
        }

        // Gauge: phi_e(0) = 0.
        res[self.ipe[0]] = x[self.ipe[0]];
        put(&mut jac, self.ipe[0], self.ipe[0], 1.0);

        // Cell-local terms.
        for k in 0..n_x {
            let ce = x[self.ice[k]];
            let eps = self.porosity(k);
            let sc = ctx.dt / (m.dx[k] * c0);
            res[self.ice[k]] += sc * eps * m.dx[k] * (ce - ctx.c_e_old[k]) / ctx.dt;
            put(&mut jac, self.ice[k], self.ice[k], sc * eps * m.dx[k] / ctx.dt);

            let Some((e, local)) = self.electrode_of(k) else { continue };
            let il = x[self.iil[k]];
            let a = ctx.a_eff[k];
            let s = 1.0 / ctx.i_scale;
            // Electrolyte source.
            let src = sc * (1.0 - p.t_plus) * a * m.dx[k] / f;
            res[self.ice[k]] -= src * il;
            put(&mut jac, self.ice[k], self.iil[k], -src);
            if k != 0 {
                res[self.ipe[k]] -= s * a * m.dx[k] * il;
                put(&mut jac, self.ipe[k], self.iil[k], -s * a * m.dx[k]);
            }
            res[self.ips[k]] += s * a * m.dx[k] * il;
            put(&mut jac, self.ips[k], self.iil[k], s * a * m.dx[k]);

            // Kinetics in inverted (asinh) form with symmetric transfer.
            let part = match e {
                Electrode::Neg => &ctx.neg,
                Electrode::Pos => &ctx.pos,
            };
            let c_max = p.c_max(e);
            let c_surf = part.base[local] - part.gain * il;
            let theta = c_surf / c_max;
            if !(theta > 0.0 && theta < 1.0) {
                return Err(());
            }
            let i0_ref = match e {
                Electrode::Neg => p.i0_n_ref,
                Electrode::Pos => p.i0_p_ref,
            };
            let i0 = i0_ref * (ce / p.c_e_ref).sqrt() * (theta * (1.0 - theta)).sqrt();
            let (u, du) = self.ocp.curve(e).eval_with_slope(theta);
            let film = if e == Electrode::Neg { ctx.film } else { 0.0 };
            let y = il / (2.0 * i0);
            let root = (1.0 + y * y).sqrt();
            let eta_kin = 2.0 * rt_f * y.asinh();
            let row = self.iil[k];
            res[row] = x[self.ips[k]] - x[self.ipe[k]] - u - film * il - eta_kin;
            if jac.is_some() {
                let dtheta_dil = -part.gain / c_max;
                let di0_dtheta = i0 * (0.5 / theta - 0.5 / (1.0 - theta));
                let di0_dil = di0_dtheta * dtheta_dil;
                let dy_dil = 1.0 / (2.0 * i0) - il / (2.0 * i0 * i0) * di0_dil;
                let dy_dce = -il / (2.0 * i0 * i0) * (0.5 * i0 / ce);
                let dkin = 2.0 * rt_f / root;
                put(&mut jac, row, self.ips[k], 1.0);
                put(&mut jac, row, self.ipe[k], -1.0);
                put(&mut jac, row, self.iil[k], -du * dtheta_dil - film - dkin * dy_dil);
                put(&mut jac, row, self.ice[k], -dkin * dy_dce);
            }
        }
        if res.iter().any(|v| !v.is_finite()) {
            return Err(());
        }
        Ok(())
    }

    fn initial_guess(&self, ctx: &StepContext, current: f64) -> Vec<f64> {
        let p = &self.params;
        let s = &self.state;
        let mut x = vec![0.0; self.n_unknowns];
        let same_direction = s.current != 0.0 && current.signum() == s.current.signum();
        let ratio = if same_direction { current / s.current } else { 0.0 };
        for k in 0..self.mesh.n_x() {
            x[self.ice[k]] = s.c_e[k];
            x[self.ipe[k]] = s.phi_e[k];
            if let Some((e, _)) = self.electrode_of(k) {
                x[self.ips[k]] = s.phi_s[k];
                x[self.iil[k]] = if same_direction {
                    s.i_loc[k] * ratio
                } else {
                    let sign = if e == Electrode::Neg { 1.0 } else { -1.0 };
                    sign * ctx.i_dens / (ctx.a_eff[k] * p.thickness(e))
                };
            }
        }
        x
    }

    fn newton(&self, ctx: &StepContext, x: &mut [f64]) -> Result<StepInfo> {
        let n = self.n_unknowns;
        let mut res = vec![0.0; n];
        let mut trial_res = vec![0.0; n];
        let mut jac = BandMatrix::zeros(n, BANDWIDTH, BANDWIDTH);
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if self.assemble(ctx, x, &mut res, Some(&mut jac)).is_err() {
            return Err(Error::StepFailure { residual: f64::INFINITY });
        }
        let mut current = norm(&res);
        let mut trial = vec![0.0; n];
        for iter in 0..self.options.max_newton_iter {
            if current < self.options.tol_newton {
                return Ok(StepInfo {
                    iterations: iter,
                    residual: current,
                });
            }
            let mut delta: Vec<f64> = res.iter().map(|v| -v).collect();
            if jac.solve_in_place(&mut delta).is_none() {
                return Err(Error::StepFailure { residual: current });
            }
            let mut lambda = 1.0;
            loop {
                for i in 0..n {
                    trial[i] = x[i] + lambda * delta[i];
                }
                if self.assemble(ctx, &trial, &mut trial_res, None).is_ok() {
                    let candidate = norm(&trial_res);
                    if candidate < current || candidate < self.options.tol_newton {
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1.0 / 1024.0 {
                    return Err(Error::StepFailure { residual: current });
                }
            }
            x.copy_from_slice(&trial);
            if self.assemble(ctx, x, &mut res, Some(&mut jac)).is_err() {
                return Err(Error::StepFailure { residual: current });
            }
            current = norm(&res);
        }
        if current < self.options.tol_newton {
            return Ok(StepInfo {
                iterations: self.options.max_newton_iter,
                residual: current,
            });
        }
        Err(Error::StepFailure { residual: current })
    }

    /// Advance the cell by one implicit step under constant current (A,
    /// discharge positive). On failure the state is left untouched.
    pub fn step(&mut self, current: f64, dt: f64) -> Result<StepInfo> {
        if !(dt > 0.0) {
            return Err(Error::input(format!("time step {dt} must be positive")));
        }
        let ctx = self.context(current, dt);
        let mut x = self.initial_guess(&ctx, current);
        let info = self.newton(&ctx, &mut x)?;
        self.commit(&ctx, &x, current)?;
        Ok(info)
    }

    fn commit(&mut self, ctx: &StepContext, x: &[f64], current: f64) -> Result<()> {
        let p = self.params.clone();
        let n_x = self.mesh.n_x();
        let n_r = self.mesh.n_r();
        let mut new_neg = ctx.neg.zero_flux.clone();
        let mut new_pos = ctx.pos.zero_flux.clone();
        let mut c_surf = vec![0.0; n_x];
        for k in 0..n_x {
            let Some((e, local)) = self.electrode_of(k) else { continue };
            let il = x[self.iil[k]];
            let (part, shells) = match e {
                Electrode::Neg => (&ctx.neg, &mut new_neg),
                Electrode::Pos => (&ctx.pos, &mut new_pos),
            };
            for i in 0..n_r {
                shells[local * n_r + i] -= part.unit_scale * part.unit[i] * il;
            }
            c_surf[k] = part.base[local] - part.gain * il;
            let c_max = p.c_max(e);
            if shells[local * n_r..(local + 1) * n_r]
                .iter()
                .any(|&c| !(c >= 0.0 && c <= c_max))
            {
                return Err(Error::StepFailure { residual: f64::NAN });
            }
        }
        let v_cell = x[self.ips[n_x - 1]]
            - ctx.i_dens / (2.0 * ctx.sigma_face[1])
            - (x[self.ips[0]] + ctx.i_dens / (2.0 * ctx.sigma_face[0]));

        let s = &mut self.state;
        s.c_s_neg = new_neg;
        s.c_s_pos = new_pos;
        s.c_surf = c_surf;
        for k in 0..n_x {
            s.c_e[k] = x[self.ice[k]];
            s.phi_e[k] = x[self.ipe[k]];
            if self.ips[k] != NONE {
                s.phi_s[k] = x[self.ips[k]];
                s.i_loc[k] = x[self.iil[k]];
            }
        }
        s.v_cell = v_cell;
        s.current = current;
        s.time += ctx.dt;

        // Lumped thermal balance, implicit in T with the converged heat source.
        let ocv = self.open_circuit_voltage()?;
        let mut q_gen = current * (ocv - v_cell);
        if let Some(table) = &self.entropic {
            let soc = ((self.mean_stoichiometry(Electrode::Neg) - p.theta_n_min)
                / (p.theta_n_max - p.theta_n_min))
                .clamp(0.0, 1.0);
            q_gen -= current * self.state.temperature * table.eval(soc);
        }
        let mc = p.m_c_th;
        let s = &mut self.state;
        s.temperature = (s.temperature + ctx.dt / mc * (q_gen + p.h_a * p.t_amb))
            / (1.0 + ctx.dt * p.h_a / mc);

        if p.degradation.toggles.any() {
            self.advance_degradation(ctx.dt);
        }
        Ok(())
    }

    /// Negative-electrode surface stresses per x cell.
    pub fn surface_stresses(&self, e: Electrode) -> Vec<f64> {
        let n_r = self.mesh.n_r();
        let w = &self.mesh.shell_fraction;
        self.cells(e)
            .enumerate()
            .map(|(local, k)| {
                let shells = &self.state.c_s(e)[local * n_r..(local + 1) * n_r];
                surface_stress(volume_average(shells, w), self.state.c_surf[k], &self.params, e)
            })
            .collect()
    }

    fn advance_degradation(&mut self, dt: f64) {
        let p = &self.params;
        let d = &p.degradation;
        let tg = d.toggles;
        let t = self.state.temperature;
        let rt = p.gas_constant * t;
        let film = self.state.degradation.film_resistance(p);
        let neg = self.mesh.neg_range();
        let l_n = p.l_n;

        // Effective SEI overpotential preserving the length-weighted mean rate,
        // and length-weighted plating.
        let mut mean_factor = 0.0;
        let mut plated = 0.0;
        for k in neg.clone() {
            let surface = self.state.phi_s[k] - self.state.phi_e[k] - self.state.i_loc[k] * film;
            let weight = self.mesh.dx[k] / l_n;
            mean_factor += weight * (-d.alpha_sei * p.faraday * (surface - d.u_sei) / rt).exp();
            if tg.plating {
                plated += weight * plating_step(p, surface, t, dt);
            }
        }
        let eta_sei = -rt / (d.alpha_sei * p.faraday) * mean_factor.ln();

        let deg = &mut self.state.degradation;
        let mut consumed = 0.0;
        if tg.sei_nominal {
            let (dl, dli) = sei_growth_step(deg, p, t, eta_sei, SeiSurface::Nominal, dt);
            deg.l_sei_nom += dl;
            deg.li_lost_sei_nom += dli;
            consumed += dli;
        }
        if tg.sei_crack {
            let (dl, dli) = sei_growth_step(deg, p, t, eta_sei, SeiSurface::Crack, dt);
            deg.l_sei_crack += dl;
            deg.li_lost_sei_crack += dli;
            consumed += dli;
        }
        if tg.plating && plated > 0.0 {
            deg.q_plated += plated;
            let dli = plated * p.a_cell * l_n;
            deg.li_lost_plating += dli;
            consumed += dli;
        }

        let stress_n = self.surface_stresses(Electrode::Neg);
        let peak = stress_n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let band = 0.01 * d.sigma_crit;
        let deg = &mut self.state.degradation;
        if tg.cracking {
            if let Some(hc) = deg.stress_counter.push(peak, band) {
                deg.n_half_cycles += 1;
                let (dl, da) = crack_growth_step(deg, hc.amplitude, p);
                deg.l_crack += dl;
                if da > 0.0 {
                    // Fresh crack faces carry no SEI.
                    let total = deg.a_crack + da;
                    deg.l_sei_crack = deg.l_sei_crack * deg.a_crack / total;
                    deg.a_crack = total;
                }
            }
        }

        let n_r = self.mesh.n_r();
        let w = self.mesh.shell_fraction.clone();
        if tg.lam {
            let delta = lam_step(deg.eps_am_n, peak, p, dt);
            if delta < 0.0 {
                let held: f64 = neg
                    .clone()
                    .enumerate()
                    .map(|(local, k)| {
                        self.mesh.dx[k]
                            * volume_average(&self.state.c_s_neg[local * n_r..(local + 1) * n_r], &w)
                    })
                    .sum();
                let deg = &mut self.state.degradation;
                deg.li_trapped_lam += -delta * p.a_cell * held;
                deg.eps_am_n += delta;
            }
            if d.lam_positive {
                let stress_p = self.surface_stresses(Electrode::Pos);
                let peak_p = stress_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let deg = &mut self.state.degradation;
                let delta = lam_step(deg.eps_am_p, peak_p, p, dt);
                if delta < 0.0 {
                    let held: f64 = self
                        .mesh
                        .pos_range()
                        .enumerate()
                        .map(|(local, k)| {
                            self.mesh.dx[k]
                                * volume_average(&self.state.c_s_pos[local * n_r..(local + 1) * n_r], &w)
                        })
                        .sum();
                    let deg = &mut self.state.degradation;
                    deg.li_trapped_lam += -delta * p.a_cell * held;
                    deg.eps_am_p += delta;
                }
            }
        }

        // Lithium consumed by side reactions leaves the negative solid uniformly.
        if consumed > 0.0 {
            let volume = p.a_cell * l_n * self.state.degradation.eps_am_n;
            let shift = consumed / volume;
            for c in self.state.c_s_neg.iter_mut() {
                *c = (*c - shift).max(0.0);
            }
            for k in neg {
                self.state.c_surf[k] = (self.state.c_surf[k] - shift).max(0.0);
            }
        }
    }

    /// Advance over `duration` at constant current with adaptive sub-stepping.
    /// Returns `Ok(false)` if a voltage cutoff ended the interval early.
    pub fn advance(&mut self, current: f64, duration: f64, energy_wh: &mut f64) -> Result<bool> {
        let mut remaining = duration;
        let mut dt = self.dt_hint.min(self.options.dt_max).min(duration);
        while remaining > 1e-12 * duration.max(1.0) {
            dt = dt.min(remaining);
            // Avoid leaving a sliver at the end of the interval.
            if remaining - dt < 1e-3 * dt {
                dt = remaining;
            }
            match self.step(current, dt) {
                Ok(info) => {
                    remaining -= dt;
                    *energy_wh += self.params.n_series as f64 * self.state.v_cell * current * dt / 3600.0;
                    if info.iterations <= 3 {
                        self.fast_streak += 1;
                        if self.fast_streak >= self.options.grow_after {
                            dt = (2.0 * dt).min(self.options.dt_max);
                            self.fast_streak = 0;
                        }
                    } else {
                        self.fast_streak = 0;
                    }
                    self.dt_hint = dt;
                    if self.cutoff_reached(current) {
                        return Ok(false);
                    }
                }
                Err(Error::StepFailure { residual }) => {
                    self.fast_streak = 0;
                    dt *= 0.5;
                    if dt < self.options.dt_floor {
                        // Newton cannot follow the end-of-discharge cliff right at the cutoff.
                        if current > 0.0 && self.state.v_cell < self.options.v_min + CUTOFF_MARGIN {
                            return Ok(false);
                        }
                        return Err(Error::Simulation {
                            time: self.state.time,
                            reason: format!("step size below floor, residual {residual:.3e}"),
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(true)
    }

    pub fn cutoff_reached(&self, current: f64) -> bool {
        (current > 0.0 && self.state.v_cell < self.options.v_min)
            || (current < 0.0 && self.state.v_cell > self.options.v_max)
    }

    /// Allow the next interval to start from a full-size step again.
    pub fn reset_step_hint(&mut self) {
        self.dt_hint = f64::INFINITY;
        self.fast_streak = 0;
    }

    /// Hold the terminal voltage at `v_target` for up to `duration` or until the
    /// charge current tapers below `i_stop` (A, magnitude). Returns the final current.
    pub fn hold_voltage(
        &mut self,
        v_target: f64,
        i_stop: f64,
        duration: f64,
        dt: f64,
        energy_wh: &mut f64,
    ) -> Result<f64> {
        let mut elapsed = 0.0;
        let mut current = self.state.current;
        while elapsed < duration {
            let h = dt.min(duration - elapsed);
            // Secant iteration on the applied current.
            let snapshot = self.state.clone();
            let solve = |cell: &mut Cell, i: f64| -> Result<f64> {
                cell.state = snapshot.clone();
                cell.step(i, h)?;
                Ok(cell.state.v_cell - v_target)
            };
            let mut i0 = current;
            let mut f0 = solve(self, i0)?;
            let mut i1 = if f0 > 0.0 { i0 + 0.05 * self.params.q_rated } else { i0 - 0.05 * self.params.q_rated };
            let mut f1 = solve(self, i1)?;
            for _ in 0..20 {
                if f1.abs() < 1e-5 {
                    break;
                }
                let denom = f1 - f0;
                if denom == 0.0 {
                    break;
                }
                let next = i1 - f1 * (i1 - i0) / denom;
                i0 = i1;
                f0 = f1;
                i1 = next;
                f1 = solve(self, i1)?;
            }
            current = i1;
            elapsed += h;
            *energy_wh += self.params.n_series as f64 * self.state.v_cell * current * h / 3600.0;
            if current.abs() < i_stop {
                break;
            }
        }
        Ok(current)
    }
}
