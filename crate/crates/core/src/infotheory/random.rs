//! Random finite universes for the bound checks.

use crate::error::Result;
use crate::rng::Rng;

use super::joint::{DiscreteJoint, RepMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    /// Dirichlet(1) over the whole `|X|·|S|·|Z|` table, random maps.
    Dirichlet,
    /// Bijective pairing `x = (s, z)` with independent latents, mixed with
    /// Dirichlet noise at weight at most 0.05. Keeps ε small so the bounds are
    /// exercised close to tightness.
    NearAssumption,
}

impl InstanceKind {
    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Dirichlet => "dirichlet",
            InstanceKind::NearAssumption => "near_assumption",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TheoryInstance {
    pub kind: InstanceKind,
    pub joint: DiscreteJoint,
    pub reps: RepMap,
}

const MAX_NOISE_WEIGHT: f64 = 0.05;

/// Draws one instance with `|S|, |Z| <= max_latent` and `|X| <= max_x`.
pub fn random_instance(rng: &mut Rng, kind: InstanceKind, max_latent: usize, max_x: usize) -> Result<TheoryInstance> {
    let ns = 1 + rng.below(max_latent);
    let nz = 1 + rng.below(max_latent);
    match kind {
        InstanceKind::Dirichlet => {
            let nx = 1 + rng.below(max_x);
            let weights = dirichlet_ones(rng, nx * ns * nz);
            let joint = DiscreteJoint::new(nx, ns, nz, weights)?;
            let reps = random_maps(rng, nx)?;
            Ok(TheoryInstance { kind, joint, reps })
        }
        InstanceKind::NearAssumption => {
            // pairing needs |X| = |S|·|Z|; shrink the latents until it fits
            let (mut ns, mut nz) = (ns, nz);
            while ns * nz > max_x {
                if ns >= nz {
                    ns -= 1;
                } else {
                    nz -= 1;
                }
            }
            let nx = ns * nz;
            let w = MAX_NOISE_WEIGHT * rng.uniform();
            let ps = dirichlet_ones(rng, ns);
            let pz = dirichlet_ones(rng, nz);
            let noise = dirichlet_ones(rng, nx * ns * nz);
            let mut p = Vec::with_capacity(nx * ns * nz);
            for x in 0..nx {
                for s in 0..ns {
                    for z in 0..nz {
                        let structured = if x == s * nz + z { ps[s] * pz[z] } else { 0.0 };
                        p.push((1.0 - w) * structured + w * noise[(x * ns + s) * nz + z]);
                    }
                }
            }
            renormalize(&mut p);
            let joint = DiscreteJoint::new(nx, ns, nz, p)?;
            let reps = match rng.below(3) {
                // a reads s, b reads z: the intended factorization
                0 => RepMap::new((0..nx).map(|x| x / nz).collect(), (0..nx).map(|x| x % nz).collect())?,
                // a coarsened, b intended
                1 => {
                    let merge = 1 + rng.below(ns);
                    RepMap::new(
                        (0..nx).map(|x| (x / nz) % merge).collect(),
                        (0..nx).map(|x| x % nz).collect(),
                    )?
                }
                _ => random_maps(rng, nx)?,
            };
            Ok(TheoryInstance { kind, joint, reps })
        }
    }
}

fn random_maps(rng: &mut Rng, nx: usize) -> Result<RepMap> {
    let na = 1 + rng.below(nx);
    let nb = 1 + rng.below(nx);
    let a = (0..nx).map(|_| rng.below(na)).collect();
    let b = (0..nx).map(|_| rng.below(nb)).collect();
    RepMap::new(a, b)
}

/// Symmetric Dirichlet(1): normalized unit exponentials.
fn dirichlet_ones(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.exponential()).collect();
    renormalize(&mut v);
    v
}

fn renormalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
}
