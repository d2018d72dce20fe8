//! Pre-chirp alphabet design: the reduced max-min distance objective, a
//! brute-force evaluation of the unreduced distance, and particle swarm
//! search.

use std::f64::consts::TAU;

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::GeometrySet;
use crate::channel::{analytic_path, PathGeometry};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::mapping::{all_patterns, PreChirpAlphabet, PreChirpPatternGroup};

/// Placements and the Hamming-distance-2 pattern pairs the objective runs over.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    pub cfg: Config,
    pub p_paths: usize,
    /// One geometry per placement `r`.
    pub placements: Vec<Vec<PathGeometry>>,
    pub patterns: Vec<PreChirpPatternGroup>,
    /// Unordered pattern-id pairs `(j, k)`, `j < k`, differing in exactly two
    /// subcarriers.
    pub pairs: Vec<(usize, usize)>,
    /// How many (placement, path) combinations land on each column offset.
    loc_weight: Vec<f64>,
}

impl ObjectiveContext {
    pub fn new(cfg: &Config, p_paths: usize) -> Result<Self> {
        let placements = GeometrySet::placements(cfg, p_paths).geometries;
        let patterns = all_patterns(cfg)?;
        let mut pairs = Vec::new();
        for j in 0..patterns.len() {
            for k in j + 1..patterns.len() {
                if patterns[j].hamming_distance(&patterns[k]) == 2 {
                    pairs.push((j, k));
                }
            }
        }
        let mut loc_weight = vec![0.0; cfg.n()];
        for geo in &placements {
            for g in geo {
                loc_weight[cfg.loc(g.delay, g.doppler)?] += 1.0;
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            p_paths,
            placements,
            patterns,
            pairs,
            loc_weight,
        })
    }

    /// `R`, the number of placements.
    pub fn placement_count(&self) -> usize {
        self.placements.len()
    }

    fn check_pair(&self, (j, k): (usize, usize)) -> Result<()> {
        let count = self.patterns.len();
        if j >= count || k >= count {
            return Err(Error::InvalidConfig(format!("pattern id out of range: ({j}, {k}) with {count} patterns")));
        }
        let distance = self.patterns[j].hamming_distance(&self.patterns[k]);
        if distance != 2 && distance != 0 {
            return Err(Error::NotHammingTwo { j, k, distance });
        }
        Ok(())
    }
}

/// `θ'_n - θ_n` for column offset `loc`, where
/// `θ_n = 2π(c2_m m² - c2_n n²)` and `m = (loc + n) mod N`.
fn phase_gap(dc2: &[f64], loc: usize, n_idx: usize) -> f64 {
    let n = dc2.len();
    let m = (loc + n_idx) % n;
    let (mm, nn) = ((m * m) as f64, (n_idx * n_idx) as f64);
    TAU * (dc2[m] * mm - dc2[n_idx] * nn)
}

fn delta_c2(alphabet: &PreChirpAlphabet, a: &PreChirpPatternGroup, b: &PreChirpPatternGroup) -> Vec<f64> {
    a.c2_values(alphabet)
        .iter()
        .zip(b.c2_values(alphabet))
        .map(|(x, y)| y - x)
        .collect()
}

/// `O_{k,j} = Σ_r Σ_p Σ_n (1 - cos(θ'_n - θ_n))`.
pub fn reduced_objective(alphabet: &PreChirpAlphabet, ctx: &ObjectiveContext, pair: (usize, usize)) -> Result<f64> {
    ctx.check_pair(pair)?;
    Ok(reduced_unchecked(alphabet, ctx, pair))
}

fn reduced_unchecked(alphabet: &PreChirpAlphabet, ctx: &ObjectiveContext, (j, k): (usize, usize)) -> f64 {
    let dc2 = delta_c2(alphabet, &ctx.patterns[j], &ctx.patterns[k]);
    let n = dc2.len();
    let mut total = 0.0;
    for (loc, &w) in ctx.loc_weight.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let s: f64 = (0..n).map(|i| 1.0 - phase_gap(&dc2, loc, i).cos()).sum();
        total += w * s;
    }
    total
}

/// `ε = min_{(j,k)} O_{k,j}`; `None` when there are no Hamming-2 pairs.
pub fn min_pair_objective(alphabet: &PreChirpAlphabet, ctx: &ObjectiveContext) -> Option<f64> {
    ctx.pairs
        .iter()
        .map(|&p| reduced_unchecked(alphabet, ctx, p))
        .min_by(|a, b| a.partial_cmp(b).expect("finite objective"))
}

/// Gain-free path matrices for every placement of a pattern,
/// `[r][p] -> (loc, ξ per row)`.
fn sparse_paths(ctx: &ObjectiveContext, alphabet: &PreChirpAlphabet, pattern: usize) -> Result<Vec<Vec<(usize, Vec<Complex<f64>>)>>> {
    let c2 = ctx.patterns[pattern].c2_values(alphabet);
    ctx.placements
        .iter()
        .map(|geo| {
            geo.iter()
                .map(|g| {
                    let sp = analytic_path::<f64>(*g, &ctx.cfg, &c2)?;
                    Ok((sp.loc, sp.values.iter().copied().collect()))
                })
                .collect()
        })
        .collect()
}

fn symbol_vectors(cfg: &Config, cap_bits: usize) -> Result<Vec<Vec<Complex<f64>>>> {
    let bits = cfg.n() * cfg.bits_per_symbol();
    if bits > cap_bits {
        return Err(Error::EnumerationCap { bits, cap_bits });
    }
    let points = cfg.constellation().points;
    let k = cfg.bits_per_symbol();
    Ok((0..1usize << bits)
        .map(|v| {
            (0..cfg.n())
                .map(|m| points[(v >> ((cfg.n() - 1 - m) * k)) & ((1 << k) - 1)])
                .collect()
        })
        .collect())
}

/// `Σ_r ‖Φ_k^r(x') - Φ_j^r(x)‖_F²`, written out path by path and row by row.
fn distance(
    pj: &[Vec<(usize, Vec<Complex<f64>>)>],
    pk: &[Vec<(usize, Vec<Complex<f64>>)>],
    x: &[Complex<f64>],
    xp: &[Complex<f64>],
) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for (rj, rk) in pj.iter().zip(pk) {
        for ((loc, xi), (_, xip)) in rj.iter().zip(rk) {
            for row in 0..n {
                let m = (row + loc) % n;
                total += (xip[row] * xp[m] - xi[row] * x[m]).norm_sqr();
            }
        }
    }
    total
}

/// Unreduced objective: the distance summed over every ordered pair of
/// symbol vectors `(x', x)`, `x'` sent on pattern `k` and `x` on pattern `j`.
/// Requires `2^(2 N log2 M)` terms; `cap_bits` bounds `N log2 M`.
pub fn brute_objective(alphabet: &PreChirpAlphabet, ctx: &ObjectiveContext, pair: (usize, usize), cap_bits: usize) -> Result<f64> {
    ctx.check_pair(pair)?;
    let xs = symbol_vectors(&ctx.cfg, cap_bits)?;
    let pj = sparse_paths(ctx, alphabet, pair.0)?;
    let pk = sparse_paths(ctx, alphabet, pair.1)?;
    let mut total = 0.0;
    for xp in &xs {
        for x in &xs {
            total += distance(&pj, &pk, x, xp);
        }
    }
    Ok(total)
}

/// Distance summed over the matched terms `x' = x` only.
pub fn brute_objective_diagonal(
    alphabet: &PreChirpAlphabet,
    ctx: &ObjectiveContext,
    pair: (usize, usize),
    cap_bits: usize,
) -> Result<f64> {
    ctx.check_pair(pair)?;
    let xs = symbol_vectors(&ctx.cfg, cap_bits)?;
    let pj = sparse_paths(ctx, alphabet, pair.0)?;
    let pk = sparse_paths(ctx, alphabet, pair.1)?;
    Ok(xs.iter().map(|x| distance(&pj, &pk, x, x)).sum())
}

/// Swarm parameters. Defaults: `v_max = 0.05`, `ϖ = 0.5`, `N_p = 200`,
/// `I_max = 300`, `ϱ_global = ϱ_local = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoParams {
    pub particles: usize,
    pub inertia: f64,
    pub global_coeff: f64,
    pub local_coeff: f64,
    pub v_max: f64,
    pub max_iter: usize,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            particles: 200,
            inertia: 0.5,
            global_coeff: 2.0,
            local_coeff: 2.0,
            v_max: 0.05,
            max_iter: 300,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.particles >= 1
            && self.inertia > 0.0
            && self.global_coeff > 0.0
            && self.local_coeff > 0.0
            && self.v_max > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("swarm parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub local_best: Vec<f64>,
    pub local_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub alphabet: PreChirpAlphabet,
    pub fitness: f64,
    pub heuristic_fitness: f64,
    /// `(iteration, global best fitness)` after every sweep, starting with
    /// the initial population at iteration 0.
    pub log: Vec<(usize, f64)>,
    /// No Hamming-2 pairs exist (e.g. `λ = 1`); the heuristic is returned.
    pub degenerate: bool,
}

/// Sorted copy of a position.
pub fn canonicalize(position: &[f64]) -> Vec<f64> {
    let mut v = position.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite position"));
    v
}

/// Brick-wall fitness: `ε` of the sorted position when every value lies in
/// `(0, 1)` and the values are distinct, `-1` otherwise.
pub fn fitness(position: &[f64], ctx: &ObjectiveContext) -> f64 {
    let v = canonicalize(position);
    let feasible = v.iter().all(|&c| c > 0.0 && c < 1.0) && v.windows(2).all(|w| w[0] < w[1]);
    if !feasible {
        return -1.0;
    }
    min_pair_objective(&PreChirpAlphabet::unchecked(v), ctx).unwrap_or(0.0)
}

/// Swarm state between sweeps.
#[derive(Debug, Clone)]
pub struct Swarm<'a> {
    ctx: &'a ObjectiveContext,
    params: PsoParams,
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_fitness: f64,
}

impl<'a> Swarm<'a> {
    /// Particle 1 at the evenly spaced heuristic, the rest uniform in `(0, 1)`,
    /// zero velocities.
    pub fn new<R: Rng + ?Sized>(ctx: &'a ObjectiveContext, params: &PsoParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let lambda = ctx.cfg.lambda();
        let heuristic = PreChirpAlphabet::uniform(lambda);
        let particles: Vec<Particle> = (0..params.particles)
            .map(|i| {
                let position = if i == 0 {
                    heuristic.values().to_vec()
                } else {
                    (0..lambda).map(|_| rng.random::<f64>()).collect()
                };
                let f = fitness(&position, ctx);
                Particle {
                    velocity: vec![0.0; lambda],
                    local_best: position.clone(),
                    local_fitness: f,
                    position,
                }
            })
            .collect();
        // first particle wins ties
        let mut best = 0;
        for (i, p) in particles.iter().enumerate() {
            if p.local_fitness > particles[best].local_fitness {
                best = i;
            }
        }
        Ok(Self {
            ctx,
            params: *params,
            global_best: particles[best].position.clone(),
            global_fitness: particles[best].local_fitness,
            particles,
        })
    }

    /// One pass over all particles. Local and global bests are updated as
    /// soon as a particle improves on them.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let prm = self.params;
        for p in self.particles.iter_mut() {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            for i in 0..p.position.len() {
                let v = prm.inertia * p.velocity[i]
                    + r1 * prm.local_coeff * (p.local_best[i] - p.position[i])
                    + r2 * prm.global_coeff * (self.global_best[i] - p.position[i]);
                p.velocity[i] = v.clamp(-prm.v_max, prm.v_max);
                p.position[i] += p.velocity[i];
            }
            let f = fitness(&p.position, self.ctx);
            if f > p.local_fitness {
                p.local_best.clone_from(&p.position);
                p.local_fitness = f;
            }
            if f > self.global_fitness {
                self.global_best.clone_from(&p.position);
                self.global_fitness = f;
            }
        }
    }
}

/// Particle swarm search for the alphabet maximizing `ε`. The sweep counter
/// runs from 0 through `I_max` inclusive.
pub fn pso_optimize<R: Rng + ?Sized>(ctx: &ObjectiveContext, params: &PsoParams, rng: &mut R) -> Result<PsoResult> {
    params.validate()?;
    let heuristic = PreChirpAlphabet::uniform(ctx.cfg.lambda());
    let heuristic_fitness = fitness(heuristic.values(), ctx);
    if ctx.pairs.is_empty() {
        return Ok(PsoResult {
            alphabet: heuristic,
            fitness: heuristic_fitness,
            heuristic_fitness,
            log: vec![(0, heuristic_fitness)],
            degenerate: true,
        });
    }
    let mut swarm = Swarm::new(ctx, params, rng)?;
    let mut log = vec![(0, swarm.global_fitness)];
    let mut iter = 0;
    while iter <= params.max_iter {
        swarm.sweep(rng);
        iter += 1;
        log.push((iter, swarm.global_fitness));
    }
    Ok(PsoResult {
        alphabet: PreChirpAlphabet::new(canonicalize(&swarm.global_best))?,
        fitness: swarm.global_fitness,
        heuristic_fitness,
        log,
        degenerate: false,
    })
}
