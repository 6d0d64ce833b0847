//! Exact information quantities over three finite alphabets `(G, E, Γ)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::MiError;
use crate::par::Exec;

/// Subset of the three variables, as a bit mask (`G = 1`, `E = 2`, `Γ = 4`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarSet(u8);

impl VarSet {
    pub const G: VarSet = VarSet(1);
    pub const E: VarSet = VarSet(2);
    pub const GAMMA: VarSet = VarSet(4);
    pub const NONE: VarSet = VarSet(0);

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }
}

/// Joint probability table `p[g][e][γ]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution3 {
    dims: [usize; 3],
    p: Vec<f64>,
}

impl JointDistribution3 {
    pub fn new(dims: [usize; 3], p: Vec<f64>) -> Result<Self, MiError> {
        if dims.contains(&0) {
            return Err(MiError::Distribution(format!("empty alphabet in {dims:?}")));
        }
        if p.len() != dims.iter().product::<usize>() {
            return Err(MiError::Distribution(format!(
                "{} entries for alphabets {dims:?}",
                p.len()
            )));
        }
        if p.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(MiError::Distribution("negative or NaN entry".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MiError::Distribution(format!("entries sum to {total}")));
        }
        Ok(Self { dims, p })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn get(&self, g: usize, e: usize, c: usize) -> f64 {
        self.p[(g * self.dims[1] + e) * self.dims[2] + c]
    }

    /// Marginal over `keep`, indexed by the full triple with dropped
    /// coordinates set to zero.
    fn marginal(&self, keep: VarSet) -> Vec<f64> {
        let mut out = vec![0.0; self.p.len()];
        for (idx, x) in self.cells() {
            out[self.flat(project(idx, keep))] += x;
        }
        out
    }

    fn flat(&self, [g, e, c]: [usize; 3]) -> usize {
        (g * self.dims[1] + e) * self.dims[2] + c
    }

    fn unflat(&self, k: usize) -> [usize; 3] {
        let [_, de, dc] = self.dims;
        [k / (de * dc), (k / dc) % de, k % dc]
    }

    fn cells(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        self.p.iter().enumerate().map(|(k, &x)| (self.unflat(k), x))
    }
}

fn project(idx: [usize; 3], keep: VarSet) -> [usize; 3] {
    let mut out = [0; 3];
    for axis in 0..3 {
        if keep.contains(axis) {
            out[axis] = idx[axis];
        }
    }
    out
}

/// `I(A; B | C) = Σ p(a,b,c) log(p(a,b,c) p(c) / (p(a,c) p(b,c)))`, with
/// `0 log 0 = 0`. `C` may be empty; the sets must be disjoint.
pub fn exact_cond_mi(p: &JointDistribution3, a: VarSet, b: VarSet, c: VarSet) -> f64 {
    let abc = a.union(b).union(c);
    let (m_abc, m_ac, m_bc, m_c) = (
        p.marginal(abc),
        p.marginal(a.union(c)),
        p.marginal(b.union(c)),
        p.marginal(c),
    );
    let mut total = 0.0;
    for (k, &pabc) in m_abc.iter().enumerate() {
        if pabc <= 0.0 {
            continue;
        }
        let idx = p.unflat(k);
        let pac = m_ac[p.flat(project(idx, a.union(c)))];
        let pbc = m_bc[p.flat(project(idx, b.union(c)))];
        let pc = m_c[p.flat(project(idx, c))];
        total += pabc * (pabc * pc / (pac * pbc)).ln();
    }
    total
}

pub fn exact_mi(p: &JointDistribution3, a: VarSet, b: VarSet) -> f64 {
    exact_cond_mi(p, a, b, VarSet::NONE)
}

/// `I(G; E; Γ) = I(G; E) − I(G; E | Γ)`.
pub fn interaction_info(p: &JointDistribution3) -> f64 {
    exact_mi(p, VarSet::G, VarSet::E) - exact_cond_mi(p, VarSet::G, VarSet::E, VarSet::GAMMA)
}

/// Normalized exponentials of standard normal draws.
fn simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k)
        .map(|_| rng.sample::<f64, _>(StandardNormal).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn renormalized(dims: [usize; 3], mut p: Vec<f64>) -> JointDistribution3 {
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    JointDistribution3::new(dims, p).expect("sampled simplex is a distribution")
}

/// `p(g) p(e|g) p(γ|e)`.
pub fn random_markov_chain<R: Rng + ?Sized>(rng: &mut R, sizes: [usize; 3]) -> JointDistribution3 {
    let [dg, de, dc] = sizes;
    let pg = simplex(dg, rng);
    let pe: Vec<Vec<f64>> = (0..dg).map(|_| simplex(de, rng)).collect();
    let pc: Vec<Vec<f64>> = (0..de).map(|_| simplex(dc, rng)).collect();
    let mut p = Vec::with_capacity(dg * de * dc);
    for g in 0..dg {
        for e in 0..de {
            for &q in &pc[e] {
                p.push(pg[g] * pe[g][e] * q);
            }
        }
    }
    renormalized(sizes, p)
}

/// Unstructured full-support joint.
pub fn random_joint<R: Rng + ?Sized>(rng: &mut R, sizes: [usize; 3]) -> JointDistribution3 {
    renormalized(sizes, simplex(sizes.iter().product(), rng))
}

/// Alphabet sizes per trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeSpec {
    Fixed([usize; 3]),
    /// Each alphabet size drawn uniformly from `lo..=hi` per trial.
    Range(usize, usize),
}

impl FromStr for SizeSpec {
    type Err = MiError;

    fn from_str(s: &str) -> Result<Self, MiError> {
        let bad = || MiError::Sizes(s.to_string());
        let positive = |t: &str| t.trim().parse::<usize>().ok().filter(|&v| v >= 1);
        if let Some((lo, hi)) = s.split_once('-') {
            let (lo, hi) = (positive(lo).ok_or_else(bad)?, positive(hi).ok_or_else(bad)?);
            return if lo <= hi {
                Ok(SizeSpec::Range(lo, hi))
            } else {
                Err(bad())
            };
        }
        let parts: Vec<usize> = s
            .split('x')
            .map(positive)
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        match parts[..] {
            [a, b, c] => Ok(SizeSpec::Fixed([a, b, c])),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SizeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeSpec::Fixed([a, b, c]) => write!(f, "{a}x{b}x{c}"),
            SizeSpec::Range(lo, hi) => write!(f, "{lo}-{hi}"),
        }
    }
}

impl SizeSpec {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [usize; 3] {
        match *self {
            SizeSpec::Fixed(d) => d,
            SizeSpec::Range(lo, hi) => [0; 3].map(|_| rng.random_range(lo..=hi)),
        }
    }
}

/// One line of the verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    /// Trials in which the check applied.
    pub trials: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

pub const VERIFY_HEADER: &str = "check,trials,max_violation,pass";

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, check: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.check == check)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{VERIFY_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.6e},{}",
                r.check, r.trials, r.max_violation, r.pass
            )?;
        }
        Ok(())
    }
}

const CHECKS: [(&str, f64); 6] = [
    ("theorem1", 1e-9),
    ("theorem2_alpha", 1e-10),
    ("lemma1_markov", 1e-12),
    ("lemma1_general", 1e-12),
    ("lemma2", 1e-12),
    ("chain_independence", 1e-10),
];

/// Violations of each check for one trial; `None` when the check does not apply.
fn trial_violations(trial: u64, seed: u64, sizes: SizeSpec) -> [Option<f64>; 6] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let dims = sizes.draw(&mut rng);
    let chain = random_markov_chain(&mut rng, dims);
    let general = random_joint(&mut rng, dims);
    let (g, e, c) = (VarSet::G, VarSet::E, VarSet::GAMMA);

    let i_ge = exact_mi(&chain, e, g);
    let i_ec = exact_mi(&chain, e, c);
    let i_gc = exact_mi(&chain, g, c);
    let i_e_gc = exact_mi(&chain, e, g.union(c));
    let inter = interaction_info(&chain);
    let denom = i_ge + i_ec;
    let alpha = (denom > 1e-9).then(|| {
        let a = inter / denom;
        (-a).max(a - 0.5).max(0.0)
    });
    let lemma1 = |p: &JointDistribution3| {
        let joint = exact_mi(p, e, g.union(c));
        (0.5 * (exact_mi(p, e, g) + exact_mi(p, e, c)) - joint).max(0.0)
    };
    [
        Some((inter - i_gc).abs()),
        alpha,
        Some(lemma1(&chain)),
        Some(lemma1(&general)),
        Some((i_e_gc - denom).max(0.0)),
        Some(exact_cond_mi(&chain, g, c, e).abs()),
    ]
}

/// Checks the Markov-chain identities and the two lemmas over `trials`
/// random joints. Trial `t` uses stream `t` of a generator seeded with `seed`,
/// so the report does not depend on `exec`.
pub fn verify_theorems(trials: usize, sizes: SizeSpec, seed: u64, exec: Exec) -> VerifyReport {
    if trials == 0 {
        return VerifyReport { rows: Vec::new() };
    }
    let per_trial = exec.map_range(trials, |t| trial_violations(t as u64, seed, sizes));
    let rows = CHECKS
        .iter()
        .enumerate()
        .map(|(k, &(check, tolerance))| {
            let applied: Vec<f64> = per_trial.iter().filter_map(|v| v[k]).collect();
            let max_violation = applied.iter().copied().fold(0.0, f64::max);
            CheckRow {
                check,
                trials: applied.len(),
                max_violation,
                tolerance,
                pass: max_violation < tolerance,
            }
        })
        .collect();
    VerifyReport { rows }
}
