//! Binning of stereo point clouds onto a DSM grid and per-cell fusion.
//!
//! For each cell and stereo pair `q`, the nearest points within radius `r`
//! give an elevation `z_q`, a probability `P̄_q` and a horizontal variance
//! `σ²_hq`. Pairs are then fused: elevations by the consensus set with the
//! largest expected membership `Σ P̄_q`, horizontal variances by a
//! probability-weighted mean.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, LayerKind, Raster};
use crate::error::{Error, Result};

/// A stereo point with its forward/reverse consistency probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub p: f64,
}

impl WeightedPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {self:?}")));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidInput(format!("point probability {} outside (0, 1]", self.p)));
        }
        Ok(())
    }
}

/// Points from one stereo pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoCloud {
    pub pair_id: String,
    pub points: Vec<WeightedPoint>,
}

impl StereoCloud {
    pub fn new(pair_id: impl Into<String>, points: Vec<WeightedPoint>) -> Result<Self> {
        let pair_id = pair_id.into();
        if points.is_empty() {
            return Err(Error::InvalidInput(format!("cloud {pair_id} is empty")));
        }
        for p in &points {
            p.validate()?;
        }
        Ok(StereoCloud { pair_id, points })
    }
}

/// A point selected for a cell, with its planimetric distance to the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Elevation, probability and distance of one binned point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSample {
    pub z: f64,
    pub p: f64,
    pub d: f64,
}

/// Bucketed lookup of cloud points by planimetric position.
#[derive(Debug, Clone)]
pub struct CloudIndex<'a> {
    points: &'a [WeightedPoint],
    bucket: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> CloudIndex<'a> {
    pub fn new(points: &'a [WeightedPoint], bucket: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p.x, p.y, bucket)).or_default().push(k);
        }
        CloudIndex { points, bucket, buckets }
    }

    fn key(x: f64, y: f64, bucket: f64) -> (i64, i64) {
        ((x / bucket).floor() as i64, (y / bucket).floor() as i64)
    }

    /// The `k_max` nearest points with distance `≤ r`, nearest first; equal
    /// distances are ordered by point index.
    pub fn neighbors(&self, cx: f64, cy: f64, r: f64, k_max: usize, out: &mut Vec<Neighbor>) {
        out.clear();
        let (i0, j0) = Self::key(cx - r, cy - r, self.bucket);
        let (i1, j1) = Self::key(cx + r, cy + r, self.bucket);
        for bj in j0..=j1 {
            for bi in i0..=i1 {
                let Some(list) = self.buckets.get(&(bi, bj)) else { continue };
                for &k in list {
                    let d = planar_distance(&self.points[k], cx, cy);
                    if d <= r {
                        out.push(Neighbor { index: k, distance: d });
                    }
                }
            }
        }
        out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
        out.truncate(k_max);
    }
}

fn planar_distance(p: &WeightedPoint, cx: f64, cy: f64) -> f64 {
    let dx = p.x - cx;
    let dy = p.y - cy;
    (dx * dx + dy * dy).sqrt()
}

fn check_binning(r: f64, k_max: usize) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("binning radius must be positive, got {r}")));
    }
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be at least 1".into()));
    }
    Ok(())
}

/// Neighbor sets for every cell, row-major.
pub fn bin_points(cloud: &StereoCloud, grid: &GridSpec, r: f64, k_max: usize) -> Result<Vec<Vec<Neighbor>>> {
    check_binning(r, k_max)?;
    grid.validate()?;
    let index = CloudIndex::new(&cloud.points, r);
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid.coords(k);
            let [cx, cy] = grid.cell_center(i, j);
            let mut out = Vec::new();
            index.neighbors(cx, cy, r, k_max, &mut out);
            out
        })
        .collect())
}

/// Inverse-distance weighted elevation and probability of one bin:
/// `w = P / max(d, ε_d)`. Returns `None` for an empty set.
pub fn bin_elevation(samples: &[BinSample], eps_d: f64) -> Option<(f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let z0 = samples[0].z;
    let (mut sw, mut swz, mut swp) = (0.0, 0.0, 0.0);
    for s in samples {
        let w = s.p / s.d.max(eps_d);
        sw += w;
        swz += w * (s.z - z0);
        swp += w * s.p;
    }
    (sw > 0.0).then(|| (z0 + swz / sw, swp / sw))
}

/// `σ²_hq = Σ P d² / Σ P`.
pub fn horizontal_variance(samples: &[BinSample]) -> Option<f64> {
    let sp: f64 = samples.iter().map(|s| s.p).sum();
    (sp > 0.0).then(|| samples.iter().map(|s| s.p * s.d * s.d).sum::<f64>() / sp)
}

/// `σ̄²_h = Σ P̄_q σ²_hq / Σ P̄_q` over `(σ²_hq, P̄_q)` pairs.
pub fn fuse_horizontal(pairs: &[(f64, f64)]) -> Option<f64> {
    let sp: f64 = pairs.iter().map(|&(_, p)| p).sum();
    (sp > 0.0).then(|| pairs.iter().map(|&(v, p)| p * v).sum::<f64>() / sp)
}

/// Outcome of consensus fusion for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Consensus {
    /// Probability-weighted mean elevation of the members.
    pub z: f64,
    /// Probability-weighted standard deviation of the members.
    pub sigma_z: f64,
    /// Expected number of members `Σ P_q`.
    pub expected_members: f64,
    /// Indices into the input list, ascending.
    pub members: Vec<usize>,
}

/// Sorts `(z, P)` values by `z`, then `P`, then input position.
pub fn canonical_order(values: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .0
            .total_cmp(&values[b].0)
            .then(values[a].1.total_cmp(&values[b].1))
            .then(a.cmp(&b))
    });
    order
}

/// Weighted mean and standard deviation, summed in the given order. Values
/// are taken relative to the first one, so identical inputs give exactly
/// zero spread.
pub fn weighted_mean_std(values: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64, f64) {
    let z0 = values.clone().next().map_or(0.0, |(z, _)| z);
    let (sp, spd) = values.clone().fold((0.0, 0.0), |(sp, spd), (z, p)| (sp + p, spd + p * (z - z0)));
    let mean = z0 + spd / sp;
    let var = values.fold(0.0, |acc, (z, p)| acc + p * (z - mean) * (z - mean)) / sp;
    (mean, var.sqrt(), sp)
}

/// Consensus set fusion. Every value is tried as a seed; a set holds values
/// with `|z − z_seed| < tol`. The set with the largest `Σ P` wins, ties going
/// to the smaller `σ_z` and then to the earlier seed in canonical order.
/// All sums run in canonical order, so the result does not depend on the
/// order of `values`.
pub fn consensus_fuse(values: &[(f64, f64)], tol: f64) -> Option<Consensus> {
    if values.is_empty() || !(tol > 0.0) {
        return None;
    }
    let order = canonical_order(values);
    let zs: Vec<f64> = order.iter().map(|&k| values[k].0).collect();
    let mut best: Option<(usize, usize, f64, f64, f64)> = None;
    let (mut lo, mut hi) = (0usize, 0usize);
    for s in 0..order.len() {
        let seed = zs[s];
        while (zs[lo] - seed).abs() >= tol && lo < s {
            lo += 1;
        }
        hi = hi.max(s);
        while hi < order.len() && (zs[hi] - seed).abs() < tol {
            hi += 1;
        }
        let members = order[lo..hi].iter().map(|&k| values[k]);
        let (mean, sd, sp) = weighted_mean_std(members);
        let better = match best {
            None => true,
            Some((_, _, bsp, _, bsd)) => sp > bsp || (sp == bsp && sd < bsd),
        };
        if better {
            best = Some((lo, hi, sp, mean, sd));
        }
    }
    let (lo, hi, sp, mean, sd) = best?;
    if !(sp > 0.0) {
        return None;
    }
    let mut members: Vec<usize> = order[lo..hi].to_vec();
    members.sort_unstable();
    Some(Consensus {
        z: mean,
        sigma_z: sd,
        expected_members: sp,
        members,
    })
}

/// Tunables for [`fuse_dsm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Binning radius (m).
    pub radius: f64,
    pub k_max: usize,
    /// Consensus tolerance (m).
    pub tol: f64,
    /// Cells with fewer contributing pairs are flagged low-confidence.
    pub min_pairs: usize,
    /// Also compute the unweighted median of the per-pair elevations.
    pub median: bool,
}

impl FusionParams {
    pub const DEFAULT_K_MAX: usize = 16;
    pub const DEFAULT_TOL: f64 = 0.5;
    pub const DEFAULT_MIN_PAIRS: usize = 3;

    /// Radius of one cell, 16 neighbors, 0.5 m tolerance.
    pub fn for_spacing(spacing: f64) -> Self {
        FusionParams {
            radius: spacing,
            k_max: Self::DEFAULT_K_MAX,
            tol: Self::DEFAULT_TOL,
            min_pairs: Self::DEFAULT_MIN_PAIRS,
            median: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_binning(self.radius, self.k_max)?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidInput(format!("consensus tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Fused elevation grid with per-cell uncertainty. Missing cells hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct DsmGrid {
    pub spec: GridSpec,
    pub z: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub sigma_h: Vec<f64>,
    /// Mean `P̄_q` over the consensus members.
    pub pbar: Vec<f64>,
    /// Number of pairs with at least one point in the cell.
    pub pair_count: Vec<u32>,
    pub low_confidence: Vec<bool>,
    pub z_median: Option<Vec<f64>>,
}

impl DsmGrid {
    /// A grid with every cell missing.
    pub fn empty(spec: GridSpec) -> Self {
        let n = spec.len();
        DsmGrid {
            spec,
            z: vec![f64::NAN; n],
            sigma_z: vec![f64::NAN; n],
            sigma_h: vec![f64::NAN; n],
            pbar: vec![f64::NAN; n],
            pair_count: vec![0; n],
            low_confidence: vec![true; n],
            z_median: None,
        }
    }

    pub fn is_valid(&self, k: usize) -> bool {
        !self.z[k].is_nan()
    }

    pub fn layer(&self, kind: LayerKind) -> Option<Raster> {
        let data = match kind {
            LayerKind::Z => self.z.clone(),
            LayerKind::SigmaZ => self.sigma_z.clone(),
            LayerKind::SigmaH => self.sigma_h.clone(),
            LayerKind::Pbar => self.pbar.clone(),
            LayerKind::Count => self.pair_count.iter().map(|&c| c as f64).collect(),
            LayerKind::ZMedian => self.z_median.clone()?,
            _ => return None,
        };
        Some(Raster { spec: self.spec, data })
    }
}

#[derive(Debug, Clone, Copy)]
struct CellOut {
    z: f64,
    sigma_z: f64,
    sigma_h: f64,
    pbar: f64,
    count: u32,
    median: f64,
}

impl CellOut {
    const MISSING: CellOut = CellOut {
        z: f64::NAN,
        sigma_z: f64::NAN,
        sigma_h: f64::NAN,
        pbar: f64::NAN,
        count: 0,
        median: f64::NAN,
    };
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fuses stereo clouds onto `spec`. Cells are independent and evaluated in
/// parallel; the result does not depend on the thread count.
pub fn fuse_dsm(clouds: &[StereoCloud], spec: &GridSpec, params: &FusionParams) -> Result<DsmGrid> {
    if clouds.is_empty() {
        return Err(Error::InvalidInput("fusion needs at least one cloud".into()));
    }
    spec.validate()?;
    params.validate()?;
    let eps_d = spec.spacing / 100.0;
    let indexes: Vec<CloudIndex> = clouds.iter().map(|c| CloudIndex::new(&c.points, params.radius)).collect();

    let cells: Vec<CellOut> = (0..spec.len())
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(neighbors, samples): &mut (Vec<Neighbor>, Vec<BinSample>), k| {
                let (i, j) = spec.coords(k);
                let [cx, cy] = spec.cell_center(i, j);
                let mut elevations = Vec::with_capacity(clouds.len());
                let mut horizontal = Vec::with_capacity(clouds.len());
                for (cloud, index) in clouds.iter().zip(&indexes) {
                    index.neighbors(cx, cy, params.radius, params.k_max, neighbors);
                    samples.clear();
                    samples.extend(neighbors.iter().map(|n| {
                        let p = &cloud.points[n.index];
                        BinSample {
                            z: p.z,
                            p: p.p,
                            d: n.distance,
                        }
                    }));
                    let (Some((z, pbar)), Some(var)) = (bin_elevation(samples, eps_d), horizontal_variance(samples)) else {
                        continue;
                    };
                    elevations.push((z, pbar));
                    horizontal.push((var, pbar));
                }
                let Some(c) = consensus_fuse(&elevations, params.tol) else {
                    return CellOut::MISSING;
                };
                let sigma_h = fuse_horizontal(&horizontal).map_or(f64::NAN, f64::sqrt);
                let median = if params.median {
                    let mut zs: Vec<f64> = elevations.iter().map(|e| e.0).collect();
                    median(&mut zs)
                } else {
                    f64::NAN
                };
                CellOut {
                    z: c.z,
                    sigma_z: c.sigma_z,
                    sigma_h,
                    pbar: c.expected_members / c.members.len() as f64,
                    count: elevations.len() as u32,
                    median,
                }
            },
        )
        .collect();

    let mut dsm = DsmGrid::empty(*spec);
    for (k, c) in cells.iter().enumerate() {
        dsm.z[k] = c.z;
        dsm.sigma_z[k] = c.sigma_z;
        dsm.sigma_h[k] = c.sigma_h;
        dsm.pbar[k] = c.pbar;
        dsm.pair_count[k] = c.count;
        dsm.low_confidence[k] = (c.count as usize) < params.min_pairs;
    }
    if params.median {
        dsm.z_median = Some(cells.iter().map(|c| c.median).collect());
    }
    Ok(dsm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(z: f64, p: f64, d: f64) -> BinSample {
        BinSample { z, p, d }
    }

    #[test]
    fn bin_elevation_hand_cases() {
        assert_eq!(bin_elevation(&[s(5.0, 0.3, 0.2), s(5.0, 0.9, 0.7)], 0.01).unwrap().0, 5.0);
        assert_eq!(bin_elevation(&[s(3.0, 0.5, 0.0)], 0.01).unwrap(), (3.0, 0.5));
        let (z, p) = bin_elevation(&[s(0.0, 1.0, 1.0), s(10.0, 0.5, 2.0)], 0.01).unwrap();
        assert!((z - 2.0).abs() < 1e-15);
        assert!((p - 0.9).abs() < 1e-15);
        assert!(bin_elevation(&[], 0.01).is_none());
    }

    #[test]
    fn horizontal_variance_hand_cases() {
        assert_eq!(horizontal_variance(&[s(1.0, 0.4, 0.0), s(2.0, 0.9, 0.0)]), Some(0.0));
        assert!((horizontal_variance(&[s(1.0, 0.37, 0.4)]).unwrap() - 0.16).abs() < 1e-15);
        assert_eq!(fuse_horizontal(&[(1.0, 1.0), (3.0, 1.0)]), Some(2.0));
        assert_eq!(fuse_horizontal(&[(1.0, 0.0)]), None);
    }

    #[test]
    fn consensus_hand_cases() {
        let c = consensus_fuse(&[(4.0, 0.5), (4.0, 0.5), (4.0, 0.5)], 0.5).unwrap();
        assert_eq!((c.z, c.sigma_z, c.members.len()), (4.0, 0.0, 3));
        let v = [(0.0, 1.0), (10.0, 1.0), (10.1, 1.0), (10.2, 1.0), (50.0, 1.0)];
        let c = consensus_fuse(&v, 0.5).unwrap();
        assert_eq!(c.members, vec![1, 2, 3]);
        assert!((c.z - 10.1).abs() < 1e-12);
        let c = consensus_fuse(&[(7.0, 0.2)], 0.5).unwrap();
        assert_eq!((c.z, c.sigma_z), (7.0, 0.0));
    }

    #[test]
    fn consensus_boundary_is_strict() {
        // 0 and 1 are exactly tol apart: never in the same set.
        let c = consensus_fuse(&[(0.0, 1.0), (1.0, 1.0)], 1.0).unwrap();
        assert_eq!(c.members.len(), 1);
        assert_eq!(c.members, vec![0]);
    }

    #[test]
    fn consensus_prefers_probability_mass() {
        // Two low-probability values agree; one confident value stands alone.
        let c = consensus_fuse(&[(0.0, 0.3), (0.1, 0.3), (5.0, 0.9)], 0.5).unwrap();
        assert_eq!(c.members, vec![2]);
    }

    #[test]
    fn binning_selects_nearest_within_radius() {
        let spec = GridSpec::new([0.0, 0.0], 1.0, 2, 1).unwrap();
        let pts = vec![
            WeightedPoint { x: 0.5, y: 0.5, z: 1.0, p: 1.0 },
            WeightedPoint { x: 0.5, y: 1.5 + 1e-9, z: 2.0, p: 1.0 },
            WeightedPoint { x: 1.6, y: 0.5, z: 3.0, p: 1.0 },
        ];
        let cloud = StereoCloud::new("a", pts).unwrap();
        let sets = bin_points(&cloud, &spec, 1.0, 4).unwrap();
        assert_eq!(sets[0][0], Neighbor { index: 0, distance: 0.0 });
        assert!(sets[0].iter().all(|n| n.index != 1));
        assert_eq!(sets[1].iter().map(|n| n.index).collect::<Vec<_>>(), vec![2, 0]);
        let one = bin_points(&cloud, &spec, 1.0, 1).unwrap();
        assert_eq!(one[1].len(), 1);
    }

    #[test]
    fn invalid_inputs() {
        assert!(StereoCloud::new("a", vec![]).is_err());
        assert!(StereoCloud::new("a", vec![WeightedPoint { x: 0.0, y: 0.0, z: 0.0, p: 0.0 }]).is_err());
        let cloud = StereoCloud::new("a", vec![WeightedPoint { x: 0.0, y: 0.0, z: 0.0, p: 1.0 }]).unwrap();
        let spec = GridSpec::new([0.0, 0.0], 1.0, 2, 2).unwrap();
        assert!(bin_points(&cloud, &spec, 0.0, 4).is_err());
        assert!(bin_points(&cloud, &spec, 1.0, 0).is_err());
        assert!(fuse_dsm(&[], &spec, &FusionParams::for_spacing(1.0)).is_err());
    }

    #[test]
    fn empty_cells_are_missing() {
        let spec = GridSpec::new([0.0, 0.0], 1.0, 3, 1).unwrap();
        let cloud = StereoCloud::new("a", vec![WeightedPoint { x: 0.5, y: 0.5, z: 2.0, p: 0.8 }]).unwrap();
        let dsm = fuse_dsm(&[cloud], &spec, &FusionParams::for_spacing(1.0)).unwrap();
        assert_eq!(dsm.z[0], 2.0);
        assert!(dsm.low_confidence[0]);
        assert!(!dsm.is_valid(2));
        assert_eq!(dsm.pair_count[2], 0);
    }
}
