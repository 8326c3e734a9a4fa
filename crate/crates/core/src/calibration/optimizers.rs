//! Population metaheuristics sharing one archive in the unit hypercube.
//!
//! Archive slot `i` holds the best point seen by "individual" `i`; every
//! optimizer proposes one candidate per slot and a candidate replaces its slot
//! when it is better. That makes the archive DE's population and PSO's
//! personal bests at the same time.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerId {
    DifferentialEvolution,
    ParticleSwarm,
    Cmaes,
}

impl OptimizerId {
    pub const PORTFOLIO: [OptimizerId; 3] = [
        OptimizerId::DifferentialEvolution,
        OptimizerId::ParticleSwarm,
        OptimizerId::Cmaes,
    ];
}

#[derive(Debug, Clone)]
pub struct Archive {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Archive {
    pub fn best(&self) -> usize {
        let mut b = 0;
        for i in 1..self.values.len() {
            if self.values[i] < self.values[b] {
                b = i;
            }
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

fn clip(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// DE/rand-to-best/1 with binomial crossover.
#[derive(Debug, Clone)]
pub struct DifferentialEvolution {
    pub f: f64,
    pub cr: f64,
}

impl Default for DifferentialEvolution {
    fn default() -> Self {
        Self { f: 0.6, cr: 0.9 }
    }
}

impl DifferentialEvolution {
    pub fn propose(&mut self, archive: &Archive, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = archive.points.len();
        let d = archive.dim();
        let best = &archive.points[archive.best()];
        (0..count)
            .map(|i| {
                let xi = &archive.points[i];
                let (mut r1, mut r2) = (i, i);
                while r1 == i {
                    r1 = rng.random_range(0..n);
                }
                while r2 == i || r2 == r1 {
                    r2 = rng.random_range(0..n);
                }
                let forced = rng.random_range(0..d);
                let mut trial = xi.clone();
                for k in 0..d {
                    if k == forced || rng.random::<f64>() < self.cr {
                        trial[k] = xi[k]
                            + self.f * (best[k] - xi[k])
                            + self.f * (archive.points[r1][k] - archive.points[r2][k]);
                    }
                }
                clip(&mut trial);
                trial
            })
            .collect()
    }
}

/// Constriction-factor particle swarm; personal bests live in the archive.
#[derive(Debug, Clone)]
pub struct ParticleSwarm {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

impl Default for ParticleSwarm {
    fn default() -> Self {
        Self {
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            positions: Vec::new(),
            velocities: Vec::new(),
        }
    }
}

impl ParticleSwarm {
    pub fn propose(&mut self, archive: &Archive, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let d = archive.dim();
        if self.positions.len() != archive.points.len() {
            self.positions = archive.points.clone();
            self.velocities = vec![vec![0.0; d]; archive.points.len()];
        }
        let g = archive.points[archive.best()].clone();
        (0..count)
            .map(|i| {
                for k in 0..d {
                    let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                    let v = self.inertia * self.velocities[i][k]
                        + self.cognitive * r1 * (archive.points[i][k] - self.positions[i][k])
                        + self.social * r2 * (g[k] - self.positions[i][k]);
                    self.velocities[i][k] = v.clamp(-0.5, 0.5);
                    self.positions[i][k] = (self.positions[i][k] + self.velocities[i][k]).clamp(0.0, 1.0);
                }
                self.positions[i].clone()
            })
            .collect()
    }
}

/// (mu/mu_w, lambda) covariance matrix adaptation.
#[derive(Debug, Clone)]
pub struct Cmaes {
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_c: DVector<f64>,
    path_s: DVector<f64>,
    last: Vec<DVector<f64>>,
    initialized: bool,
}

impl Default for Cmaes {
    fn default() -> Self {
        Self {
            mean: DVector::zeros(0),
            sigma: 0.0,
            cov: DMatrix::zeros(0, 0),
            path_c: DVector::zeros(0),
            path_s: DVector::zeros(0),
            last: Vec::new(),
            initialized: false,
        }
    }
}

impl Cmaes {
    /// Restart the search distribution around the archive.
    fn reset(&mut self, archive: &Archive) {
        let d = archive.dim();
        let n = archive.points.len() as f64;
        self.mean = DVector::from_vec(archive.points[archive.best()].clone());
        let mut spread = 0.0;
        for k in 0..d {
            let m = archive.points.iter().map(|p| p[k]).sum::<f64>() / n;
            spread += archive.points.iter().map(|p| (p[k] - m).powi(2)).sum::<f64>() / n;
        }
        self.sigma = (spread / d as f64).sqrt().clamp(1e-3, 0.3);
        self.cov = DMatrix::identity(d, d);
        self.path_c = DVector::zeros(d);
        self.path_s = DVector::zeros(d);
        self.initialized = true;
    }

    pub fn activate(&mut self, archive: &Archive) {
        if !self.initialized || self.mean.len() != archive.dim() {
            self.reset(archive);
        } else {
            self.mean = DVector::from_vec(archive.points[archive.best()].clone());
        }
    }

    fn factor(&self) -> (DMatrix<f64>, DVector<f64>) {
        let eig = SymmetricEigen::new(self.cov.clone());
        let d = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        (eig.eigenvectors, d)
    }

    pub fn propose(&mut self, archive: &Archive, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        if !self.initialized {
            self.reset(archive);
        }
        let dim = archive.dim();
        let (b, d) = self.factor();
        self.last.clear();
        (0..count)
            .map(|_| {
                let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
                let y = &b * d.component_mul(&z);
                self.last.push(y.clone());
                let x = &self.mean + self.sigma * y;
                x.iter().map(|v| v.clamp(0.0, 1.0)).collect()
            })
            .collect()
    }

    /// Update from the fitness of the last proposals (in proposal order).
    pub fn update(&mut self, values: &[f64]) {
        let lambda = values.len();
        if lambda < 2 {
            return;
        }
        let dim = self.mean.len() as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mu_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (dim + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim);
        let c_1 = 2.0 / ((dim + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0).powi(2) + mu_eff));
        let chi_n = dim.sqrt() * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim * dim));

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut y_w = DVector::zeros(self.mean.len());
        for (k, &i) in order.iter().take(mu).enumerate() {
            y_w += w[k] * &self.last[i];
        }
        self.mean += self.sigma * &y_w;
        self.mean.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));

        let (b, d) = self.factor();
        let inv_sqrt = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        self.path_s = (1.0 - c_sigma) * &self.path_s + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (&inv_sqrt * &y_w);
        let h_sigma = if self.path_s.norm() / (1.0 - (1.0 - c_sigma).powi(2)).sqrt() < (1.4 + 2.0 / (dim + 1.0)) * chi_n {
            1.0
        } else {
            0.0
        };
        self.path_c = (1.0 - c_c) * &self.path_c + h_sigma * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &y_w;
        let mut rank_mu = DMatrix::zeros(self.mean.len(), self.mean.len());
        for (k, &i) in order.iter().take(mu).enumerate() {
            rank_mu += w[k] * &self.last[i] * self.last[i].transpose();
        }
        self.cov = (1.0 - c_1 - c_mu) * &self.cov
            + c_1 * (&self.path_c * self.path_c.transpose() + (1.0 - h_sigma) * c_c * (2.0 - c_c) * &self.cov)
            + c_mu * rank_mu;
        self.sigma *= ((c_sigma / d_sigma) * (self.path_s.norm() / chi_n - 1.0)).exp();
        self.sigma = self.sigma.clamp(1e-12, 1.0);
    }
}

/// Relative improvement of the best-so-far value over the last `window`
/// generations of `bests` (oldest first); `None` until enough history exists.
pub fn window_improvement(bests: &[f64], window: usize) -> Option<f64> {
    if bests.len() <= window {
        return None;
    }
    let old = bests[bests.len() - 1 - window];
    let new = bests[bests.len() - 1];
    Some(if old > 0.0 { (old - new) / old } else { 0.0 })
}

/// Choose the optimizer for the next generation.
///
/// `bests` holds the best-so-far value after each generation since the
/// incumbent was activated. The incumbent keeps running until it has had
/// `window` generations and improved the best-so-far by less than `delta`
/// relative over them; then the next optimizer in round-robin order takes over.
pub fn switch_strategy(incumbent: usize, n_optimizers: usize, bests: &[f64], window: usize, delta: f64) -> usize {
    match window_improvement(bests, window) {
        Some(gain) if gain < delta => (incumbent + 1) % n_optimizers,
        _ => incumbent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn strong_improvement_retains() {
        let bests = [1.0, 0.99, 0.97, 0.95, 0.93, 0.9];
        assert_eq!(switch_strategy(0, 3, &bests, 5, 1e-3), 0);
    }

    #[test]
    fn small_improvement_switches() {
        let bests = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0 - 9e-4];
        assert_eq!(switch_strategy(1, 3, &bests, 5, 1e-3), 2);
    }

    #[test]
    fn stagnation_alternates_between_two() {
        let mut active = 0;
        let mut seen = Vec::new();
        let mut since = vec![1.0];
        for _ in 0..30 {
            since.push(1.0);
            let next = switch_strategy(active, 2, &since, 5, 1e-3);
            if next != active {
                seen.push(next);
                active = next;
                since = vec![1.0];
            }
        }
        assert_eq!(seen, vec![1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn too_little_history_retains() {
        assert_eq!(switch_strategy(2, 3, &[1.0, 1.0], 5, 1e-3), 2);
    }

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
    }

    fn run(id: OptimizerId) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pop = 16;
        let points: Vec<Vec<f64>> = (0..pop).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
        let values = points.iter().map(|p| sphere(p)).collect();
        let mut archive = Archive { points, values };
        let mut de = DifferentialEvolution::default();
        let mut pso = ParticleSwarm::default();
        let mut cma = Cmaes::default();
        for _ in 0..60 {
            let cands = match id {
                OptimizerId::DifferentialEvolution => de.propose(&archive, pop, &mut rng),
                OptimizerId::ParticleSwarm => pso.propose(&archive, pop, &mut rng),
                OptimizerId::Cmaes => cma.propose(&archive, pop, &mut rng),
            };
            let vals: Vec<f64> = cands.iter().map(|c| sphere(c)).collect();
            if id == OptimizerId::Cmaes {
                cma.update(&vals);
            }
            for (i, (c, v)) in cands.into_iter().zip(vals).enumerate() {
                if v < archive.values[i] {
                    archive.points[i] = c;
                    archive.values[i] = v;
                }
            }
        }
        archive.values[archive.best()]
    }

    #[test]
    fn each_optimizer_minimizes_a_sphere() {
        for id in OptimizerId::PORTFOLIO {
            let best = run(id);
            assert!(best < 1e-4, "{id:?} reached {best}");
        }
    }
}
