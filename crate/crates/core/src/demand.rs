//! Spatial demand: Matérn cluster ground truth, Gaussian KDE and scenario
//! sampling.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::Error;
use crate::graph::{nearest_gnb_association, CoverageMatrix, SubstrateNetwork};
use crate::slice::SliceSpec;

/// Rejection-sampling attempts before a density is declared degenerate.
pub const MAX_REJECTIONS: usize = 1_000_000;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// An independent generator for the stream addressed by `parts` under
/// `seed`, so that e.g. sample `h` is the same whatever `H` is.
pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix(seed);
    for &p in parts {
        s = splitmix(s ^ splitmix(p.wrapping_add(0x5851_f42d_4c95_7f2d)));
    }
    ChaCha8Rng::seed_from_u64(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaternParams {
    /// Parent points per square meter.
    pub parent_intensity: f64,
    /// Mean offspring per parent.
    pub offspring: f64,
    pub radius: f64,
    pub region: [f64; 2],
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as u64
}

fn in_region(p: [f64; 2], region: [f64; 2]) -> bool {
    (0.0..=region[0]).contains(&p[0]) && (0.0..=region[1]).contains(&p[1])
}

/// Offspring of a Matérn cluster process. Offspring landing outside the
/// region are dropped.
pub fn matern_cluster_sample<R: Rng>(params: &MaternParams, rng: &mut R) -> Vec<[f64; 2]> {
    let [w, h] = params.region;
    let parents = poisson(params.parent_intensity * w * h, rng);
    let mut out = Vec::new();
    for _ in 0..parents {
        let c = [rng.gen::<f64>() * w, rng.gen::<f64>() * h];
        for _ in 0..poisson(params.offspring, rng) {
            let r = params.radius * rng.gen::<f64>().sqrt();
            let a = 2.0 * PI * rng.gen::<f64>();
            let p = [c[0] + r * a.cos(), c[1] + r * a.sin()];
            if in_region(p, params.region) {
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Scott's rule: sample covariance times n^(-1/3).
    Scott,
    /// Isotropic kernel with this standard deviation.
    Scalar(f64),
    /// Kernel covariance matrix.
    Matrix([[f64; 2]; 2]),
}

/// Gaussian kernel density over the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub points: Vec<[f64; 2]>,
    pub cov: [[f64; 2]; 2],
    chol: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    norm: f64,
}

impl Kde {
    pub fn density(&self, x: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for p in &self.points {
            let d = [x[0] - p[0], x[1] - p[1]];
            let q = d[0] * (self.inv[0][0] * d[0] + self.inv[0][1] * d[1])
                + d[1] * (self.inv[1][0] * d[0] + self.inv[1][1] * d[1]);
            s += (-0.5 * q).exp();
        }
        s * self.norm / self.points.len() as f64
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let c = self.points[rng.gen_range(0..self.points.len())];
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        [
            c[0] + self.chol[0][0] * a,
            c[1] + self.chol[1][0] * a + self.chol[1][1] * b,
        ]
    }
}

pub fn fit_kde(points: &[[f64; 2]], bandwidth: Bandwidth) -> Result<Kde, Error> {
    if points.len() < 2 {
        return Err(Error::Demand(
            "KDE needs at least 2 points; fall back to a uniform density".into(),
        ));
    }
    let cov = match bandwidth {
        Bandwidth::Scalar(h) => [[h * h, 0.0], [0.0, h * h]],
        Bandwidth::Matrix(m) => m,
        Bandwidth::Scott => {
            let n = points.len() as f64;
            let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
            let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
            let mut c = [[0.0; 2]; 2];
            for p in points {
                let d = [p[0] - mx, p[1] - my];
                for i in 0..2 {
                    for j in 0..2 {
                        c[i][j] += d[i] * d[j] / (n - 1.0);
                    }
                }
            }
            let f = n.powf(-1.0 / 3.0);
            [[c[0][0] * f, c[0][1] * f], [c[1][0] * f, c[1][1] * f]]
        }
    };
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let symmetric = (cov[0][1] - cov[1][0]).abs() <= 1e-12 * cov[0][0].abs().max(cov[1][1].abs());
    if !(cov[0][0] > 0.0 && det > 0.0 && det.is_finite() && symmetric) {
        return Err(Error::Demand(
            "KDE bandwidth is not positive definite; fall back to a uniform density".into(),
        ));
    }
    let l00 = cov[0][0].sqrt();
    let l10 = cov[1][0] / l00;
    let l11 = (cov[1][1] - l10 * l10).sqrt();
    Ok(Kde {
        points: points.to_vec(),
        cov,
        chol: [[l00, 0.0], [l10, l11]],
        inv: [
            [cov[1][1] / det, -cov[0][1] / det],
            [-cov[1][0] / det, cov[0][0] / det],
        ],
        norm: 1.0 / (2.0 * PI * det.sqrt()),
    })
}

/// A slice's spatial demand density for one macro-slot.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandDensity {
    Kde(Kde),
    Uniform,
}

impl DemandDensity {
    /// Fits a KDE, or a uniform density when there are too few points.
    pub fn fit(points: &[[f64; 2]], bandwidth: Bandwidth) -> DemandDensity {
        fit_kde(points, bandwidth).map_or(DemandDensity::Uniform, DemandDensity::Kde)
    }

    /// One point in `region`, rejection-sampled. `shift` translates the
    /// density before clipping.
    pub fn sample<R: Rng>(
        &self,
        region: [f64; 2],
        shift: [f64; 2],
        rng: &mut R,
    ) -> Result<[f64; 2], Error> {
        match self {
            DemandDensity::Uniform => {
                Ok([rng.gen::<f64>() * region[0], rng.gen::<f64>() * region[1]])
            }
            DemandDensity::Kde(k) => {
                for _ in 0..MAX_REJECTIONS {
                    let p = k.draw(rng);
                    let p = [p[0] + shift[0], p[1] + shift[1]];
                    if in_region(p, region) {
                        return Ok(p);
                    }
                }
                Err(Error::Demand(format!(
                    "no sample inside the region after {MAX_REJECTIONS} attempts"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountLaw {
    Poisson(f64),
    Fixed(usize),
}

impl CountLaw {
    pub fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        match *self {
            CountLaw::Poisson(m) => poisson(m, rng) as usize,
            CountLaw::Fixed(n) => n,
        }
    }

    /// Smallest count whose cumulative probability reaches `q`.
    pub fn quantile(&self, q: f64) -> usize {
        match *self {
            CountLaw::Fixed(n) => n,
            CountLaw::Poisson(m) if m <= 0.0 => 0,
            CountLaw::Poisson(m) => {
                // Log-space pmf recursion keeps large means finite.
                let mut log_p = -m;
                let mut cdf = log_p.exp();
                let mut n = 0usize;
                while cdf < q && n < 100_000_000 {
                    n += 1;
                    log_p += m.ln() - (n as f64).ln();
                    cdf += log_p.exp();
                    if log_p < -800.0 && n as f64 > m {
                        break;
                    }
                }
                n
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sample,
    Observation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceDemand {
    pub positions: Vec<[f64; 2]>,
    /// Users per gNB slot, times `scale`.
    pub per_gnb: Vec<f64>,
    /// User count times `scale`.
    pub users: f64,
    /// Scale for CPU, storage, RAM and bandwidth.
    pub chi: [f64; 4],
    /// Load multiplier applied to the drawn users (1 unless overloaded).
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandScenario {
    pub role: Role,
    /// Sample index h or micro-slot index t.
    pub index: usize,
    pub slices: Vec<SliceDemand>,
    pub coverage: CoverageMatrix,
}

impl DemandScenario {
    /// Builds a scenario from user positions and checks its invariants.
    pub fn from_positions(
        role: Role,
        index: usize,
        positions: Vec<Vec<[f64; 2]>>,
        slices: &[SliceSpec],
        net: &SubstrateNetwork,
    ) -> DemandScenario {
        let coverage = nearest_gnb_association(&positions, net);
        let slices = positions
            .into_iter()
            .enumerate()
            .map(|(k, pos)| {
                let users = pos.len() as f64;
                SliceDemand {
                    per_gnb: coverage.counts(k).into_iter().map(|c| c as f64).collect(),
                    users,
                    chi: slices[k].scaling.map(|a| a * users),
                    positions: pos,
                    scale: 1.0,
                }
            })
            .collect();
        let s = DemandScenario {
            role,
            index,
            slices,
            coverage,
        };
        debug_assert!(s.check().is_ok());
        s
    }

    /// Copy with every user count and scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DemandScenario {
        let mut s = self.clone();
        for d in &mut s.slices {
            d.scale *= factor;
            d.users *= factor;
            d.chi = d.chi.map(|c| c * factor);
            for c in &mut d.per_gnb {
                *c *= factor;
            }
        }
        s
    }

    /// Whether slice `k` has users at gNB slot `j`.
    pub fn covered(&self, k: usize, j: usize) -> bool {
        self.slices[k].per_gnb[j] > 0.0
    }

    pub fn check(&self) -> Result<(), Error> {
        for (k, d) in self.slices.iter().enumerate() {
            let n = d.positions.len();
            if self.coverage.users(k) != n
                || (d.users - n as f64 * d.scale).abs() > 1e-9 * d.users.max(1.0)
            {
                return Err(Error::Internal(format!(
                    "slice {k}: user count does not match positions"
                )));
            }
            let total: f64 = d.per_gnb.iter().sum();
            if (total - d.users).abs() > 1e-9 * d.users.max(1.0) {
                return Err(Error::Internal(format!(
                    "slice {k}: coverage does not sum to the user count"
                )));
            }
            if d.chi.iter().any(|c| c.is_nan() || *c < 0.0) {
                return Err(Error::Internal(format!("slice {k}: negative scale")));
            }
        }
        Ok(())
    }

    /// `x,y,slice` rows for external plotting.
    pub fn export_points(&self) -> String {
        let mut s = String::from("x,y,slice\n");
        for (k, d) in self.slices.iter().enumerate() {
            for p in &d.positions {
                s.push_str(&format!("{},{},{k}\n", p[0], p[1]));
            }
        }
        s
    }
}

/// Draws user counts, then positions from each slice's density, and
/// associates users with gNBs.
#[allow(clippy::too_many_arguments)]
pub fn sample_scenario<R: Rng>(
    densities: &[DemandDensity],
    slices: &[SliceSpec],
    net: &SubstrateNetwork,
    counts: &[CountLaw],
    shift: [f64; 2],
    role: Role,
    index: usize,
    rng: &mut R,
) -> Result<DemandScenario, Error> {
    if densities.len() != slices.len() || counts.len() != slices.len() {
        return Err(Error::Demand(
            "one density and count law per slice required".into(),
        ));
    }
    let mut positions = Vec::with_capacity(slices.len());
    for (density, law) in densities.iter().zip(counts) {
        let n = law.draw(rng);
        let pts = (0..n)
            .map(|_| density.sample(net.region, shift, rng))
            .collect::<Result<Vec<_>, _>>()?;
        positions.push(pts);
    }
    Ok(DemandScenario::from_positions(
        role, index, positions, slices, net,
    ))
}
