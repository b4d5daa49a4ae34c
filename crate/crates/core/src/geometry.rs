//! Poisson deployment, nearest-head (Voronoi) cluster formation and mean-distance formulas.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetime::TrafficProfile;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "CH")]
    Head,
    #[serde(rename = "CM")]
    Member,
    #[serde(rename = "DIRECT")]
    Direct,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Head => "CH",
            Role::Member => "CM",
            Role::Direct => "DIRECT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub id: usize,
    pub position: Point,
    /// Remaining energy (J); zero once dead.
    pub energy: f64,
    pub role: Role,
    pub cluster_id: Option<usize>,
    pub traffic: TrafficProfile,
}

impl DeviceState {
    pub fn is_alive(&self) -> bool {
        self.energy > 0.0
    }
}

/// One cluster: a head and the members that joined it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub ch_id: usize,
    /// Non-head members. Heads together with all member sets partition the
    /// clustered devices.
    pub member_ids: Vec<usize>,
    /// Mean position of the head and its members.
    pub centroid: Point,
}

impl ClusterAssignment {
    /// Head followed by members.
    pub fn all_ids(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.ch_id).chain(self.member_ids.iter().copied())
    }

    pub fn size(&self) -> usize {
        self.member_ids.len() + 1
    }
}

/// Uniform point in the annulus `r_inner <= |p| <= r_outer` by inverse CDF on the radius.
pub fn sample_in_annulus<R: Rng + ?Sized>(rng: &mut R, r_inner: f64, r_outer: f64) -> Point {
    let u: f64 = rng.random();
    let r = (r_inner * r_inner + u * (r_outer * r_outer - r_inner * r_inner)).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Point::new(r * phi.cos(), r * phi.sin())
}

pub fn sample_in_disc<R: Rng + ?Sized>(rng: &mut R, center: Point, radius: f64) -> Point {
    let p = sample_in_annulus(rng, 0.0, radius);
    Point::new(center.x + p.x, center.y + p.y)
}

/// Poisson deployment of intensity `sigma` on an annulus, with zero energy
/// and default traffic. See [`deploy_ppp_with`].
pub fn deploy_ppp(sigma: f64, r_inner: f64, r_outer: f64, seed: u64) -> Result<Vec<DeviceState>> {
    deploy_ppp_with(sigma, r_inner, r_outer, seed, 0.0, TrafficProfile::default())
}

pub fn deploy_ppp_with(
    sigma: f64,
    r_inner: f64,
    r_outer: f64,
    seed: u64,
    energy: f64,
    traffic: TrafficProfile,
) -> Result<Vec<DeviceState>> {
    if !(r_inner >= 0.0 && r_inner < r_outer && r_outer.is_finite()) {
        return Err(Error::domain(format!("invalid annulus radii [{r_inner}, {r_outer}]")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("density must be finite and non-negative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = sigma * PI * (r_outer * r_outer - r_inner * r_inner);
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::domain(e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    Ok((0..count)
        .map(|id| DeviceState {
            id,
            position: sample_in_annulus(&mut rng, r_inner, r_outer),
            energy,
            role: Role::Direct,
            cluster_id: None,
            traffic,
        })
        .collect())
}

/// Bucket grid over a fixed set of sites for nearest-site queries.
/// Ties between equidistant sites resolve to the lower site index.
#[derive(Debug, Clone)]
pub struct NearestIndex {
    sites: Vec<Point>,
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl NearestIndex {
    pub fn new(sites: Vec<Point>) -> Self {
        if sites.is_empty() {
            return NearestIndex {
                sites,
                origin: Point::ORIGIN,
                cell: 1.0,
                nx: 0,
                ny: 0,
                buckets: Vec::new(),
            };
        }
        let (mut lo, mut hi) = (sites[0], sites[0]);
        for p in &sites {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let w = (hi.x - lo.x).max(1e-9);
        let h = (hi.y - lo.y).max(1e-9);
        // about two sites per bucket
        let cell = ((w * h * 2.0) / sites.len() as f64).sqrt().max(1e-9);
        let nx = ((w / cell).floor() as usize + 1).min(4096);
        let ny = ((h / cell).floor() as usize + 1).min(4096);
        let cell = (w / nx as f64).max(h / ny as f64).max(cell);
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut idx = NearestIndex {
            sites: Vec::new(),
            origin: lo,
            cell,
            nx,
            ny,
            buckets: Vec::new(),
        };
        for (i, p) in sites.iter().enumerate() {
            let (cx, cy) = idx.bucket_of(p);
            buckets[cy * nx + cx].push(i);
        }
        idx.sites = sites;
        idx.buckets = buckets;
        idx
    }

    fn bucket_of(&self, p: &Point) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let cy = ((p.y - self.origin.y) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (cx, cy)
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Index of the nearest site and its distance.
    pub fn nearest(&self, q: &Point) -> Option<(usize, f64)> {
        if self.sites.is_empty() {
            return None;
        }
        let (qx, qy) = self.bucket_of(q);
        let mut best: Option<(usize, f64)> = None;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // every site in ring `ring` or beyond is at least this far away
            if let Some((_, d2)) = best {
                let reach = self.ring_clearance(q, qx, qy, ring);
                if reach * reach > d2 {
                    break;
                }
            }
            self.scan_ring(q, qx as isize, qy as isize, ring as isize, &mut best);
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    /// Lower bound on the distance from `q` to any bucket at Chebyshev ring `ring`.
    fn ring_clearance(&self, q: &Point, qx: usize, qy: usize, ring: usize) -> f64 {
        if ring == 0 {
            return 0.0;
        }
        let k = (ring - 1) as f64;
        let left = q.x - (self.origin.x + (qx as f64 - k) * self.cell);
        let right = self.origin.x + (qx as f64 + k + 1.0) * self.cell - q.x;
        let down = q.y - (self.origin.y + (qy as f64 - k) * self.cell);
        let up = self.origin.y + (qy as f64 + k + 1.0) * self.cell - q.y;
        left.min(right).min(down).min(up).max(0.0)
    }

    fn scan_ring(&self, q: &Point, qx: isize, qy: isize, ring: isize, best: &mut Option<(usize, f64)>) {
        let mut visit = |cx: isize, cy: isize| {
            if cx < 0 || cy < 0 || cx >= self.nx as isize || cy >= self.ny as isize {
                return;
            }
            for &i in &self.buckets[cy as usize * self.nx + cx as usize] {
                let d2 = self.sites[i].dist2(q);
                match *best {
                    Some((bi, bd)) if d2 > bd || (d2 == bd && i > bi) => {}
                    _ => *best = Some((i, d2)),
                }
            }
        };
        if ring == 0 {
            visit(qx, qy);
            return;
        }
        for dx in -ring..=ring {
            visit(qx + dx, qy - ring);
            visit(qx + dx, qy + ring);
        }
        for dy in (-ring + 1)..ring {
            visit(qx - ring, qy + dy);
            visit(qx + ring, qy + dy);
        }
    }
}

/// Each device independently becomes a head with probability `p`; every
/// other device joins its nearest head. With no heads drawn, every device
/// is left in direct mode. Roles and cluster ids are written back.
pub fn form_voronoi_clusters(devices: &mut [DeviceState], p: f64, seed: u64) -> Result<Vec<ClusterAssignment>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("head probability must lie in (0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads: Vec<usize> = (0..devices.len()).filter(|_| rng.random::<f64>() < p).collect();
    Ok(assign_to_heads(devices, &heads))
}

/// Nearest-head assignment for an explicit head set (indices into `devices`).
/// Equidistant heads resolve to the lower device id.
pub fn assign_to_heads(devices: &mut [DeviceState], heads: &[usize]) -> Vec<ClusterAssignment> {
    let mut heads = heads.to_vec();
    heads.sort_by_key(|&h| devices[h].id);
    heads.dedup();
    if heads.is_empty() {
        for d in devices.iter_mut() {
            d.role = Role::Direct;
            d.cluster_id = None;
        }
        return Vec::new();
    }
    let index = NearestIndex::new(heads.iter().map(|&h| devices[h].position).collect());
    let mut clusters: Vec<ClusterAssignment> = heads
        .iter()
        .map(|&h| ClusterAssignment {
            ch_id: devices[h].id,
            member_ids: Vec::new(),
            centroid: devices[h].position,
        })
        .collect();
    let mut is_head = vec![None; devices.len()];
    for (c, &h) in heads.iter().enumerate() {
        is_head[h] = Some(c);
    }
    for (i, d) in devices.iter_mut().enumerate() {
        let c = match is_head[i] {
            Some(c) => {
                d.role = Role::Head;
                c
            }
            None => {
                let (c, _) = index.nearest(&d.position).expect("non-empty head set");
                d.role = Role::Member;
                clusters[c].member_ids.push(d.id);
                let cl = &mut clusters[c];
                cl.centroid.x += d.position.x;
                cl.centroid.y += d.position.y;
                c
            }
        };
        d.cluster_id = Some(c);
    }
    for cl in &mut clusters {
        let n = cl.size() as f64;
        cl.centroid.x /= n;
        cl.centroid.y /= n;
    }
    clusters
}

/// Mean member-to-head distance `sqrt(z / 4σ)` for mean cluster size `z`.
pub fn mean_member_distance(z: f64, sigma: f64) -> Result<f64> {
    if !(z >= 1.0) || !(sigma > 0.0) {
        return Err(Error::domain(format!("need z >= 1 and sigma > 0, got z = {z}, sigma = {sigma}")));
    }
    Ok((z / (4.0 * sigma)).sqrt())
}

/// Mean member-to-head distance for head probability `p`: `1 / (2 sqrt(σ p))`.
pub fn mean_member_distance_for_p(p: f64, sigma: f64) -> f64 {
    0.5 / (sigma * p).sqrt()
}

/// Radius of the disc approximating a cluster, `1.5 sqrt(z / 4σ)`.
pub fn cluster_radius_estimate(z: f64, sigma: f64) -> Result<f64> {
    Ok(1.5 * mean_member_distance(z, sigma)?)
}

/// Approximate mean distance from uniform points in a disc of radius `big_r`
/// to a point at distance `r` from its centre.
pub fn avg_distance_to_offcenter_ch(r: f64, big_r: f64) -> Result<f64> {
    if !(big_r > 0.0) || !(r >= 0.0 && r <= big_r) {
        return Err(Error::domain(format!("need 0 <= r <= R and R > 0, got r = {r}, R = {big_r}")));
    }
    Ok(offcenter_distance_unchecked(r, big_r))
}

pub(crate) fn offcenter_distance_unchecked(r: f64, big_r: f64) -> f64 {
    2.0 * big_r / 3.0 + r * r / (2.0 * big_r) - r.powi(4) / (32.0 * big_r.powi(3))
}

/// Mean distance between two uniform points in a disc of radius `r`.
pub fn mean_pairwise_distance_disc(r: f64) -> f64 {
    128.0 * r / (45.0 * PI)
}

/// Writes `id,x,y,role,cluster_id` rows.
pub fn write_deployment_csv<W: Write>(devices: &[DeviceState], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::domain(format!("csv write failed: {e}"));
    w.write_record(["id", "x", "y", "role", "cluster_id"]).map_err(io)?;
    for d in devices {
        let cid = d.cluster_id.map(|c| c.to_string()).unwrap_or_default();
        w.write_record([
            d.id.to_string(),
            d.position.x.to_string(),
            d.position.y.to_string(),
            d.role.as_str().to_string(),
            cid,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::domain(format!("csv flush failed: {e}")))?;
    Ok(())
}
