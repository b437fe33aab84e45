//! Finite-n random conductance matrices on the complete graph and the derived
//! Markov kernel / symmetrized operator.
//!
//! Two generators are provided. The divisible generator gives every unordered
//! pair an independent ID(Π/(n−1)) draw so that each row sum is exactly
//! ID(Π)-distributed at every n. The stable-domain generator uses Pareto(α)
//! entries scaled by n^(−1/α), the classical heavy-tailed mean-field model.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::levy::{LevyMeasureSpec, LevySampler};

/// Symmetric positive-off-diagonal conductance matrix with zero diagonal.
#[derive(Clone, Debug)]
pub struct ConductanceMatrix {
    n: usize,
    c: Vec<f64>, // row-major n*n
    rho: Vec<f64>,
}

impl ConductanceMatrix {
    /// Builds from raw row-major entries, validating symmetry, zero diagonal
    /// and positive row sums.
    pub fn from_entries(n: usize, c: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("need n >= 2, got {n}")));
        }
        if c.len() != n * n {
            return Err(Error::Domain(format!(
                "entry buffer has length {}, expected {}",
                c.len(),
                n * n
            )));
        }
        for i in 0..n {
            if c[i * n + i] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if c[i * n + j] != c[j * n + i] {
                    return Err(Error::Domain(format!("asymmetry at ({i},{j})")));
                }
                if c[i * n + j] < 0.0 {
                    return Err(Error::Domain(format!("negative conductance at ({i},{j})")));
                }
            }
        }
        let rho: Vec<f64> = (0..n).map(|i| c[i * n..(i + 1) * n].iter().sum()).collect();
        if let Some(i) = rho.iter().position(|&r| !(r > 0.0)) {
            return Err(Error::Degenerate(format!("row {i} has nonpositive sum")));
        }
        Ok(ConductanceMatrix { n, c, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.n + j]
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn entries(&self) -> &[f64] {
        &self.c
    }

    /// Dense CSV dump: header line `n`, then one row of 17-significant-digit
    /// conductances per vertex.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| format!("{:.16e}", self.get(i, j)))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Domain("empty conductance dump".into()))??
            .trim()
            .parse()
            .map_err(|e| Error::Domain(format!("bad header: {e}")))?;
        let mut c = Vec::with_capacity(n * n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Domain("truncated conductance dump".into()))??;
            for field in line.trim().split(',') {
                c.push(
                    field
                        .parse()
                        .map_err(|e| Error::Domain(format!("bad entry: {e}")))?,
                );
            }
        }
        ConductanceMatrix::from_entries(n, c)
    }
}

/// Row-stochastic kernel K(i,j) = C(i,j)/ρ(i).
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    n: usize,
    k: Vec<f64>,
    rho: Vec<f64>,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn entries(&self) -> &[f64] {
        &self.k
    }

    /// Test hook: build a kernel from raw parts without the construction
    /// invariants. Used by negative controls in the validation tests.
    #[doc(hidden)]
    pub fn from_raw_parts(n: usize, k: Vec<f64>, rho: Vec<f64>) -> Self {
        KernelMatrix { n, k, rho }
    }

    /// max_ij |ρ_i K_ij − ρ_j K_ji|, the detailed-balance residual.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                let fwd = self.rho[i] * self.get(i, j);
                let bwd = self.rho[j] * self.get(j, i);
                worst = worst.max((fwd - bwd).abs());
            }
        }
        worst
    }
}

/// Symmetric operator S(i,j) = C(i,j)/√(ρ_i ρ_j), similar to K.
#[derive(Clone, Debug)]
pub struct SymmetrizedMatrix {
    n: usize,
    s: Vec<f64>,
}

impl SymmetrizedMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.s
    }
}

/// ID(Π)-row-sum generator: each unordered pair gets an independent
/// ID(Π/(n−1)) draw via a shared sampler.
pub fn generate_divisible<R: Rng + ?Sized>(
    n: usize,
    spec: &LevyMeasureSpec,
    cutoff: f64,
    rng: &mut R,
) -> Result<ConductanceMatrix> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    let sampler = LevySampler::new(*spec, cutoff)?;
    generate_divisible_with(n, &sampler, rng)
}

/// Same as [`generate_divisible`] but reusing a prebuilt sampler (the tail
/// table build is the expensive part for the non-closed-form variants).
pub fn generate_divisible_with<R: Rng + ?Sized>(
    n: usize,
    sampler: &LevySampler,
    rng: &mut R,
) -> Result<ConductanceMatrix> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    let scale = 1.0 / (n - 1) as f64;
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = sampler.sample_id(scale, rng)?;
            c[i * n + j] = v;
            c[j * n + i] = v;
        }
    }
    ConductanceMatrix::from_entries(n, c)
}

/// Stable-domain generator: c(i,j) = n^(−1/α) · Pareto(α) i.i.d. over
/// unordered pairs.
pub fn generate_stable_domain<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<ConductanceMatrix> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let scale = (n as f64).powf(-1.0 / alpha);
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let mut u: f64 = rng.gen();
            while u == 0.0 {
                u = rng.gen();
            }
            let v = scale * u.powf(-1.0 / alpha); // Pareto tail x^(-alpha), x >= 1
            c[i * n + j] = v;
            c[j * n + i] = v;
        }
    }
    ConductanceMatrix::from_entries(n, c)
}

/// Markov kernel K(i,j) = C(i,j)/ρ(i).
pub fn kernel(c: &ConductanceMatrix) -> Result<KernelMatrix> {
    let n = c.n();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        let r = c.rho()[i];
        if !(r > 0.0) {
            return Err(Error::Degenerate(format!("row {i} has nonpositive sum")));
        }
        for j in 0..n {
            k[i * n + j] = c.get(i, j) / r;
        }
    }
    Ok(KernelMatrix {
        n,
        k,
        rho: c.rho().to_vec(),
    })
}

/// Symmetrization S = D^(1/2) K D^(−1/2), sharing the spectrum of K.
pub fn symmetrize(c: &ConductanceMatrix) -> Result<SymmetrizedMatrix> {
    let n = c.n();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        let ri = c.rho()[i];
        if !(ri > 0.0) {
            return Err(Error::Degenerate(format!("row {i} has nonpositive sum")));
        }
        for j in 0..=i {
            let v = c.get(i, j) / (ri * c.rho()[j]).sqrt();
            s[i * n + j] = v;
            s[j * n + i] = v;
        }
    }
    Ok(SymmetrizedMatrix { n, s })
}
