//! The discrete latent configuration and its base measure.
//!
//! Individuals occupy coordinates in a D-dimensional latent space. Under the
//! Dirichlet-process prior many individuals share one coordinate, so the
//! configuration is a [`ClusterTable`]: `k` distinct sites plus an assignment
//! of each individual to a site. The base measure `H0` factors in spherical
//! coordinates: a power-sine distribution over directions (uniform on the
//! hypersphere) and a folded generalized-Laplace radius with unit mean whose
//! shape `kappa` trades tail weight against kurtosis.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A point in the latent space (Cartesian).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCoordinate(Vec<f64>);

impl LatentCoordinate {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("latent coordinate needs at least one component".into()));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("latent coordinate has non-finite component".into()));
        }
        Ok(Self(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance_to(&self, other: &LatentCoordinate) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(self.distance_raw(other))
    }

    #[inline]
    pub(crate) fn distance_raw(&self, other: &LatentCoordinate) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Euclidean distance between two latent coordinates.
pub fn latent_distance(a: &LatentCoordinate, b: &LatentCoordinate) -> Result<f64> {
    a.distance_to(b)
}

/// Polar representation: radius plus `D-1` angles. The first angle lives on
/// `[0, 2pi]`, the rest on `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCoordinate {
    rho: f64,
    angles: Vec<f64>,
}

impl SphericalCoordinate {
    pub fn new(rho: f64, angles: Vec<f64>) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be finite and >= 0, got {rho}")));
        }
        if angles.is_empty() {
            return Err(Error::InvalidParameter("need at least one angle (D >= 2)".into()));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        if !(0.0..=two_pi).contains(&angles[0]) {
            return Err(Error::InvalidParameter(format!("first angle {} outside [0, 2pi]", angles[0])));
        }
        for (idx, &a) in angles.iter().enumerate().skip(1) {
            if !(0.0..=std::f64::consts::PI).contains(&a) {
                return Err(Error::InvalidParameter(format!("angle {idx} = {a} outside [0, pi]")));
            }
        }
        Ok(Self { rho, angles })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn dim(&self) -> usize {
        self.angles.len() + 1
    }

    /// Convert to Cartesian coordinates. The output norm equals `rho`.
    ///
    /// The angle with the highest sine power pairs with the first Cartesian
    /// axis and the uniform angle enters innermost; this is the pairing under
    /// which the power-sine densities integrate to the uniform surface
    /// measure on the hypersphere.
    pub fn to_cartesian(&self) -> LatentCoordinate {
        let d = self.dim();
        let mut out = vec![0.0; d];
        let mut sin_prod = 1.0;
        for m in 0..d - 1 {
            let phi = self.angles[d - 2 - m];
            out[m] = self.rho * sin_prod * phi.cos();
            sin_prod *= phi.sin();
        }
        out[d - 1] = self.rho * sin_prod;
        LatentCoordinate(out)
    }
}

/// See [`SphericalCoordinate::to_cartesian`].
pub fn spherical_to_cartesian(coord: &SphericalCoordinate) -> LatentCoordinate {
    coord.to_cartesian()
}

/// Draw the `D-1` angles of a uniformly distributed direction: the first
/// angle is uniform on `(0, 2pi)`, angle `j` (1-based) has density
/// proportional to `sin^(j-1)` on `(0, pi)`.
pub fn sample_angles<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need D >= 2, got {d}")));
    }
    let mut angles = Vec::with_capacity(d - 1);
    angles.push(rng.random_range(0.0..2.0 * std::f64::consts::PI));
    for power in 1..d - 1 {
        // Rejection sampling from uniform(0, pi) with acceptance sin^power.
        loop {
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let accept: f64 = rng.random();
            if accept <= theta.sin().powi(power as i32) {
                angles.push(theta);
                break;
            }
        }
    }
    Ok(angles)
}

fn validate_kappa(kappa: f64) -> Result<()> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// `Gamma(2/kappa) / Gamma(1/kappa)`, the scale constant that pins the radius
/// mean at one.
fn radius_scale_constant(kappa: f64) -> f64 {
    (ln_gamma(2.0 / kappa) - ln_gamma(1.0 / kappa)).exp()
}

/// Density of the unit-mean radius prior:
/// `f(rho | kappa) = kappa c^2 / Gamma(2/kappa)^... ` — concretely
/// `[kappa G(2/k) / G(1/k)^2] exp(-(rho G(2/k)/G(1/k))^kappa)`.
///
/// `kappa = 1` is an exponential with mean one, `kappa = 2` a half-normal
/// with mean one; large `kappa` approaches uniform on `(0, 2)`.
pub fn radius_density(rho: f64, kappa: f64) -> Result<f64> {
    Ok(radius_log_density(rho, kappa)?.exp())
}

pub fn radius_log_density(rho: f64, kappa: f64) -> Result<f64> {
    validate_kappa(kappa)?;
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be >= 0, got {rho}")));
    }
    let c = radius_scale_constant(kappa);
    Ok(kappa.ln() + ln_gamma(2.0 / kappa) - 2.0 * ln_gamma(1.0 / kappa) - (rho * c).powf(kappa))
}

/// Draw a radius from the unit-mean prior by drawing
/// `w ~ gamma(1/kappa, rate (G(2/k)/G(1/k))^kappa)` and returning `w^(1/kappa)`.
pub fn sample_radius<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> Result<f64> {
    validate_kappa(kappa)?;
    let rate = radius_scale_constant(kappa).powf(kappa);
    let gamma = Gamma::new(1.0 / kappa, 1.0 / rate)
        .map_err(|e| Error::Numerical(format!("radius gamma: {e}")))?;
    let w: f64 = gamma.sample(rng);
    Ok(w.powf(1.0 / kappa))
}

/// Draw a coordinate from the base measure `H0(kappa)`: uniform direction,
/// unit-mean radius.
pub fn sample_h0<R: Rng + ?Sized>(kappa: f64, d: usize, rng: &mut R) -> Result<LatentCoordinate> {
    let angles = sample_angles(d, rng)?;
    let rho = sample_radius(kappa, rng)?;
    Ok(SphericalCoordinate::new(rho, angles)?.to_cartesian())
}

/// Asymptotic expected number of distinct sites under a Dirichlet process:
/// `alpha * ln((alpha + n) / alpha)`.
pub fn expected_mass_points(alpha: f64, n: u32) -> f64 {
    alpha * ((alpha + n as f64) / alpha).ln()
}

/// Simulate the Polya-urn seating of `n` individuals and return the number of
/// occupied sites: each arrival joins an existing site with probability
/// proportional to its occupancy, or opens a new one proportional to `alpha`.
pub fn crp_simulate<R: Rng + ?Sized>(alpha: f64, n: u32, rng: &mut R) -> Result<usize> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one individual".into()));
    }
    let mut occupancy: Vec<u32> = vec![1];
    for t in 1..n {
        let u: f64 = rng.random::<f64>() * (t as f64 + alpha);
        if u >= t as f64 {
            occupancy.push(1);
        } else {
            let mut acc = 0.0;
            let mut chosen = occupancy.len() - 1;
            for (idx, &c) in occupancy.iter().enumerate() {
                acc += c as f64;
                if u < acc {
                    chosen = idx;
                    break;
                }
            }
            occupancy[chosen] += 1;
        }
    }
    Ok(occupancy.len())
}

/// Concentration parameter of the Dirichlet process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConcentration(f64);

impl DpConcentration {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Shape parameter of the radius prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusShape(f64);

impl RadiusShape {
    pub fn new(kappa: f64) -> Result<Self> {
        validate_kappa(kappa)?;
        Ok(Self(kappa))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// One occupied site: a distinct latent coordinate with its occupancy count.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    /// Stable identifier; site *indices* are reshuffled when sites die.
    pub id: u64,
    pub coord: LatentCoordinate,
    pub occupancy: u32,
}

const UNASSIGNED: u32 = u32::MAX;

/// The latent configuration: `k` distinct sites and the assignment of each
/// individual to one of them. Occupancies always sum to the number of
/// assigned individuals; sites are garbage-collected as soon as they empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTable {
    sites: Vec<Site>,
    assignment: Vec<u32>,
    next_id: u64,
}

/// What `ClusterTable::remove` took out: the individual's coordinate and
/// whether it was the sole occupant of its site.
#[derive(Debug, Clone)]
pub struct RemovedIndividual {
    pub coord: LatentCoordinate,
    pub was_singleton: bool,
}

impl ClusterTable {
    /// Start every individual at its own independent draw from `H0(kappa)`.
    pub fn singleton_init<R: Rng + ?Sized>(
        n: u32,
        d: usize,
        kappa: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one individual".into()));
        }
        let mut sites = Vec::with_capacity(n as usize);
        for id in 0..n as u64 {
            sites.push(Site { id, coord: sample_h0(kappa, d, rng)?, occupancy: 1 });
        }
        Ok(Self {
            sites,
            assignment: (0..n).collect(),
            next_id: n as u64,
        })
    }

    /// Build a configuration from explicit site coordinates and a mapping of
    /// each individual to a site index. Every site must be occupied and all
    /// coordinates distinct.
    pub fn from_assignment(
        site_coords: Vec<LatentCoordinate>,
        assignment: Vec<u32>,
    ) -> Result<Self> {
        if site_coords.is_empty() || assignment.is_empty() {
            return Err(Error::Data("empty cluster configuration".into()));
        }
        let d = site_coords[0].dim();
        for c in &site_coords {
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: c.dim() });
            }
        }
        for (a, ca) in site_coords.iter().enumerate() {
            for cb in site_coords.iter().skip(a + 1) {
                if ca == cb {
                    return Err(Error::Data(format!("duplicate site coordinate at index {a}")));
                }
            }
        }
        let mut occupancy = vec![0u32; site_coords.len()];
        for &s in &assignment {
            let slot = occupancy
                .get_mut(s as usize)
                .ok_or_else(|| Error::Data(format!("assignment to nonexistent site {s}")))?;
            *slot += 1;
        }
        if occupancy.iter().any(|&c| c == 0) {
            return Err(Error::Data("configuration has an unoccupied site".into()));
        }
        let next_id = site_coords.len() as u64;
        let sites = site_coords
            .into_iter()
            .zip(occupancy)
            .enumerate()
            .map(|(id, (coord, occupancy))| Site { id: id as u64, coord, occupancy })
            .collect();
        Ok(Self { sites, assignment, next_id })
    }

    pub fn n(&self) -> u32 {
        self.assignment.len() as u32
    }

    /// Number of distinct sites `k`.
    pub fn k(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, idx: usize) -> &Site {
        &self.sites[idx]
    }

    pub fn site_of(&self, individual: u32) -> Result<usize> {
        let s = *self
            .assignment
            .get(individual as usize)
            .ok_or_else(|| Error::Data(format!("unknown individual {individual}")))?;
        if s == UNASSIGNED {
            return Err(Error::Data(format!("individual {individual} is detached")));
        }
        Ok(s as usize)
    }

    pub fn coord_of(&self, individual: u32) -> Result<&LatentCoordinate> {
        Ok(&self.sites[self.site_of(individual)?].coord)
    }

    /// Radii of the distinct sites, in site order.
    pub fn radii(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.coord.norm()).collect()
    }

    /// Detach an individual from its site; singleton sites are deleted
    /// immediately (site indices are not stable across this call).
    pub fn remove(&mut self, individual: u32) -> Result<RemovedIndividual> {
        let s = self.site_of(individual)?;
        self.assignment[individual as usize] = UNASSIGNED;
        let was_singleton = self.sites[s].occupancy == 1;
        let coord = self.sites[s].coord.clone();
        if was_singleton {
            self.sites.swap_remove(s);
            // The former last site now lives at index s.
            let moved = self.sites.len() as u32;
            if (s as u32) < moved {
                for a in &mut self.assignment {
                    if *a == moved {
                        *a = s as u32;
                    }
                }
            }
        } else {
            self.sites[s].occupancy -= 1;
        }
        Ok(RemovedIndividual { coord, was_singleton })
    }

    /// Attach a detached individual to an existing site.
    pub fn assign_existing(&mut self, individual: u32, site_idx: usize) -> Result<()> {
        if self.assignment[individual as usize] != UNASSIGNED {
            return Err(Error::Data(format!("individual {individual} is already assigned")));
        }
        let site = self
            .sites
            .get_mut(site_idx)
            .ok_or_else(|| Error::Data(format!("assignment to nonexistent site {site_idx}")))?;
        site.occupancy += 1;
        self.assignment[individual as usize] = site_idx as u32;
        Ok(())
    }

    /// Attach a detached individual to a fresh site at `coord`; returns the
    /// new site's index.
    pub fn assign_new(&mut self, individual: u32, coord: LatentCoordinate) -> Result<usize> {
        if self.assignment[individual as usize] != UNASSIGNED {
            return Err(Error::Data(format!("individual {individual} is already assigned")));
        }
        let idx = self.sites.len();
        self.sites.push(Site { id: self.next_id, coord, occupancy: 1 });
        self.next_id += 1;
        self.assignment[individual as usize] = idx as u32;
        Ok(idx)
    }

    /// Occupancy bookkeeping check; true when every individual is assigned
    /// and the per-site counts add up.
    pub fn is_consistent(&self) -> bool {
        if self.assignment.iter().any(|&a| a == UNASSIGNED) {
            return false;
        }
        let mut counts = vec![0u32; self.sites.len()];
        for &a in &self.assignment {
            match counts.get_mut(a as usize) {
                Some(c) => *c += 1,
                None => return false,
            }
        }
        counts
            .iter()
            .zip(&self.sites)
            .all(|(&c, s)| c == s.occupancy && c > 0)
    }
}
