use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Shannon entropy in bits of a probability vector, with `0 log 0 = 0`.
pub fn entropy_bits(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(entropy_unchecked(p))
}

pub fn binary_entropy(q: f64) -> f64 {
    entropy_unchecked(&[q, 1.0 - q])
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if let Some(v) = p.iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(Error::Contract(format!("probability {v} is negative or not finite")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Contract(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Exact table `p[x][s][z]`, stored flat with `z` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint {
    nx: usize,
    ns: usize,
    nz: usize,
    p: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(nx: usize, ns: usize, nz: usize, p: Vec<f64>) -> Result<Self> {
        if nx == 0 || ns == 0 || nz == 0 {
            return Err(Error::Contract("alphabet sizes must be positive".into()));
        }
        if p.len() != nx * ns * nz {
            return Err(Error::Contract(format!(
                "table has {} entries, expected {nx}·{ns}·{nz}",
                p.len()
            )));
        }
        check_distribution(&p)?;
        Ok(Self { nx, ns, nz, p })
    }

    /// Builds a table from a function, then normalizes it. Fails if the
    /// weights are negative or all zero.
    pub fn from_weights(nx: usize, ns: usize, nz: usize, w: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut p = Vec::with_capacity(nx * ns * nz);
        for x in 0..nx {
            for s in 0..ns {
                for z in 0..nz {
                    p.push(w(x, s, z));
                }
            }
        }
        let total: f64 = p.iter().sum();
        if total.is_nan() || total <= 0.0 || p.iter().any(|v| *v < 0.0) {
            return Err(Error::Contract(
                "weights must be nonnegative with a positive sum".into(),
            ));
        }
        for v in &mut p {
            *v /= total;
        }
        Self::new(nx, ns, nz, p)
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.nx, self.ns, self.nz)
    }

    #[inline]
    pub fn prob(&self, x: usize, s: usize, z: usize) -> f64 {
        self.p[(x * self.ns + s) * self.nz + z]
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }
}

/// Deterministic representations `a = a(x)`, `b = b(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepMap {
    a: Vec<usize>,
    b: Vec<usize>,
    na: usize,
    nb: usize,
}

impl RepMap {
    pub fn new(a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::Contract(format!(
                "representation maps must cover the same nonempty alphabet ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        let na = a.iter().max().map_or(1, |m| m + 1);
        let nb = b.iter().max().map_or(1, |m| m + 1);
        Ok(Self { a, b, na, nb })
    }

    pub fn a(&self) -> &[usize] {
        &self.a
    }

    pub fn b(&self) -> &[usize] {
        &self.b
    }

    pub fn x_alphabet(&self) -> usize {
        self.a.len()
    }
}

/// A random variable of the joint universe `(x, s, z, a(x), b(x))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rv {
    X,
    S,
    Z,
    A,
    B,
}

/// Joint plus representation maps: everything needed to evaluate any
/// entropy or (conditional) mutual information among `x, s, z, a, b`.
#[derive(Clone, Debug)]
pub struct Universe<'a> {
    joint: &'a DiscreteJoint,
    reps: &'a RepMap,
}

impl<'a> Universe<'a> {
    pub fn new(joint: &'a DiscreteJoint, reps: &'a RepMap) -> Result<Self> {
        if reps.x_alphabet() != joint.nx {
            return Err(Error::Contract(format!(
                "maps defined on {} symbols but |X| = {}",
                reps.x_alphabet(),
                joint.nx
            )));
        }
        Ok(Self { joint, reps })
    }

    fn card(&self, v: Rv) -> usize {
        match v {
            Rv::X => self.joint.nx,
            Rv::S => self.joint.ns,
            Rv::Z => self.joint.nz,
            Rv::A => self.reps.na,
            Rv::B => self.reps.nb,
        }
    }

    #[inline]
    fn value(&self, v: Rv, x: usize, s: usize, z: usize) -> usize {
        match v {
            Rv::X => x,
            Rv::S => s,
            Rv::Z => z,
            Rv::A => self.reps.a[x],
            Rv::B => self.reps.b[x],
        }
    }

    /// Joint entropy `H(vars)` in bits; the empty set has entropy 0.
    pub fn h(&self, vars: &[Rv]) -> f64 {
        let size: usize = vars.iter().map(|&v| self.card(v)).product();
        let mut marginal = vec![0.0; size];
        let (nx, ns, nz) = self.joint.sizes();
        for x in 0..nx {
            for s in 0..ns {
                for z in 0..nz {
                    let p = self.joint.prob(x, s, z);
                    if p == 0.0 {
                        continue;
                    }
                    let mut key = 0;
                    for &v in vars {
                        key = key * self.card(v) + self.value(v, x, s, z);
                    }
                    marginal[key] += p;
                }
            }
        }
        entropy_unchecked(&marginal)
    }

    /// `H(u | w)`.
    pub fn h_cond(&self, u: &[Rv], w: &[Rv]) -> f64 {
        self.h(&concat(u, w)) - self.h(w)
    }

    /// `I(u; v)`.
    pub fn mi(&self, u: &[Rv], v: &[Rv]) -> f64 {
        self.h(u) + self.h(v) - self.h(&concat(u, v))
    }

    /// `I(u; v | w)`.
    pub fn cmi(&self, u: &[Rv], v: &[Rv], w: &[Rv]) -> f64 {
        self.h(&concat(u, w)) + self.h(&concat(v, w)) - self.h(&concat(&concat(u, v), w)) - self.h(w)
    }
}

fn concat(a: &[Rv], b: &[Rv]) -> Vec<Rv> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use Rv::*;

    #[test]
    fn uniform_four_is_two_bits() {
        assert_eq!(entropy_bits(&[0.25; 4]).unwrap(), 2.0);
        assert!(entropy_bits(&[0.5, 0.6]).is_err());
        assert!(entropy_bits(&[1.5, -0.5]).is_err());
        assert_eq!(entropy_bits(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn independent_latents_share_nothing() {
        let j = DiscreteJoint::from_weights(1, 2, 3, |_, s, z| (1 + s) as f64 * (1 + z) as f64).unwrap();
        let r = RepMap::new(vec![0], vec![0]).unwrap();
        let u = Universe::new(&j, &r).unwrap();
        assert!(u.mi(&[S], &[Z]).abs() < 1e-15);
    }

    #[test]
    fn binary_symmetric_channel() {
        // s uniform, z = s flipped with probability 0.1; enumerate the 2×2 joint.
        let flip = 0.1;
        let j = DiscreteJoint::from_weights(1, 2, 2, |_, s, z| 0.5 * if s == z { 1.0 - flip } else { flip }).unwrap();
        let r = RepMap::new(vec![0], vec![0]).unwrap();
        let u = Universe::new(&j, &r).unwrap();
        let expect = 1.0 - binary_entropy(0.1);
        assert!((u.mi(&[S], &[Z]) - expect).abs() < 1e-12);
        assert!((expect - 0.531_004_406_410_718_5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(DiscreteJoint::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(DiscreteJoint::new(1, 1, 2, vec![0.5]).is_err());
        let j = DiscreteJoint::new(2, 1, 1, vec![0.5, 0.5]).unwrap();
        let r = RepMap::new(vec![0, 0, 0], vec![0, 0, 0]).unwrap();
        assert!(Universe::new(&j, &r).is_err());
        assert!(RepMap::new(vec![0], vec![0, 1]).is_err());
    }
}
