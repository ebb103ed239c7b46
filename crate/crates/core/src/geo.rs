//! Geographic primitives: points, the 0.01° grid, infrastructure nodes and a
//! grid-bucketed nearest-node index.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{max_min_normalize, Ecdf};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Grid resolution in degrees.
pub const CELL_DEG: f64 = 0.01;

/// Meters spanned by one grid step of latitude.
pub const CELL_HEIGHT_M: f64 = EARTH_RADIUS_M * CELL_DEG * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidCoordinate("latitude out of range".into()));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinate("longitude out of range".into()));
        }
        Ok(Self { lat, lon })
    }

    /// Offsets the point by `north_m`/`east_m` meters (flat-earth approximation,
    /// accurate at the sub-kilometer scale it is used for).
    pub fn offset_m(self, north_m: f64, east_m: f64) -> Self {
        let dlat = north_m / EARTH_RADIUS_M * 180.0 / std::f64::consts::PI;
        let dlon = east_m / (EARTH_RADIUS_M * self.lat.to_radians().cos()) * 180.0
            / std::f64::consts::PI;
        Self { lat: self.lat + dlat, lon: self.lon + dlon }
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub row: i32,
    pub col: i32,
}

fn grid_index(deg: f64) -> i32 {
    // Decimal multiples of 0.01 are not exact in binary; snap them so a
    // boundary point always lands on the cell whose lower edge it is.
    let q = deg / CELL_DEG;
    let r = q.round();
    if (q - r).abs() < 1e-9 {
        r as i32
    } else {
        q.floor() as i32
    }
}

impl CellId {
    pub fn of(p: GeoPoint) -> Self {
        Self { row: grid_index(p.lat), col: grid_index(p.lon) }
    }

    pub fn center(self) -> GeoPoint {
        GeoPoint {
            lat: (self.row as f64 + 0.5) * CELL_DEG,
            lon: (self.col as f64 + 0.5) * CELL_DEG,
        }
    }

    /// Chebyshev distance in grid steps.
    pub fn ring_distance(self, other: CellId) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.row, self.col)
    }
}

pub fn cell_of(p: GeoPoint) -> CellId {
    CellId::of(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoiLabel {
    Business,
    Hospital,
    Resident,
    Campus,
    Scenery,
    Shopping,
    Hotel,
    Unlabeled,
}

impl PoiLabel {
    /// The seven functional categories, in matrix order.
    pub const LABELED: [PoiLabel; 7] = [
        PoiLabel::Business,
        PoiLabel::Hospital,
        PoiLabel::Resident,
        PoiLabel::Campus,
        PoiLabel::Scenery,
        PoiLabel::Shopping,
        PoiLabel::Hotel,
    ];

    /// Row/column of this label in a 7×7 migration matrix.
    pub fn index(self) -> Option<usize> {
        PoiLabel::LABELED.iter().position(|&l| l == self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PoiLabel::Business => "business",
            PoiLabel::Hospital => "hospital",
            PoiLabel::Resident => "resident",
            PoiLabel::Campus => "campus",
            PoiLabel::Scenery => "scenery",
            PoiLabel::Shopping => "shopping",
            PoiLabel::Hotel => "hotel",
            PoiLabel::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for PoiLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PoiLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let label = match s.trim().to_ascii_lowercase().as_str() {
            "business" => PoiLabel::Business,
            "hospital" => PoiLabel::Hospital,
            "resident" => PoiLabel::Resident,
            "campus" => PoiLabel::Campus,
            "scenery" => PoiLabel::Scenery,
            "shopping" => PoiLabel::Shopping,
            "hotel" => PoiLabel::Hotel,
            "unlabeled" | "" => PoiLabel::Unlabeled,
            other => return Err(Error::InvalidConfig(format!("unknown poi label `{other}`"))),
        };
        Ok(label)
    }
}

/// Picks the label carried by the most PoIs in a cell; ties go to the label
/// listed first in [`PoiLabel::LABELED`]. Unlabeled entries never win over a
/// real label.
pub fn dominant_label(labels: impl IntoIterator<Item = PoiLabel>) -> PoiLabel {
    let mut counts = [0usize; 7];
    for l in labels {
        if let Some(i) = l.index() {
            counts[i] += 1;
        }
    }
    let mut best = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| PoiLabel::LABELED[i]).unwrap_or(PoiLabel::Unlabeled)
}

/// Per-cell PoI annotation: the dominant label plus the number of distinct
/// labels present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CellPoiMap {
    cells: BTreeMap<CellId, (PoiLabel, usize)>,
}

impl CellPoiMap {
    pub fn from_labels(entries: impl IntoIterator<Item = (CellId, PoiLabel)>) -> Self {
        let mut grouped: BTreeMap<CellId, Vec<PoiLabel>> = BTreeMap::new();
        for (cell, label) in entries {
            grouped.entry(cell).or_default().push(label);
        }
        let cells = grouped
            .into_iter()
            .map(|(cell, labels)| {
                let mut distinct: Vec<PoiLabel> =
                    labels.iter().copied().filter(|l| l.index().is_some()).collect();
                distinct.sort();
                distinct.dedup();
                (cell, (dominant_label(labels), distinct.len()))
            })
            .collect();
        Self { cells }
    }

    pub fn from_nodes(nodes: &[InfrastructureNode]) -> Self {
        Self::from_labels(nodes.iter().map(|n| (n.cell(), n.poi)))
    }

    pub fn label(&self, cell: CellId) -> PoiLabel {
        self.cells.get(&cell).map(|&(l, _)| l).unwrap_or(PoiLabel::Unlabeled)
    }

    pub fn label_count(&self, cell: CellId) -> usize {
        self.cells.get(&cell).map(|&(_, n)| n).unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, PoiLabel, usize)> + '_ {
        self.cells.iter().map(|(&c, &(l, n))| (c, l, n))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "ap")]
    WifiAp,
    #[serde(rename = "bs")]
    CellularBs,
}

impl NodeKind {
    pub fn default_radius_m(self) -> f64 {
        match self {
            NodeKind::WifiAp => 100.0,
            NodeKind::CellularBs => 500.0,
        }
    }

    pub fn default_concurrency(self) -> u32 {
        match self {
            NodeKind::WifiAp => 20,
            NodeKind::CellularBs => 100,
        }
    }

    pub fn default_bandwidth(self) -> u32 {
        self.default_concurrency()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::WifiAp => "ap",
            NodeKind::CellularBs => "bs",
        }
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ap" | "wifi" => Ok(NodeKind::WifiAp),
            "bs" | "cellular" => Ok(NodeKind::CellularBs),
            other => Err(Error::InvalidConfig(format!("unknown node kind `{other}`"))),
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfrastructureNode {
    pub id: String,
    pub kind: NodeKind,
    pub position: GeoPoint,
    pub radius_m: f64,
    pub capacity: usize,
    pub concurrency: u32,
    pub bandwidth: u32,
    pub poi: PoiLabel,
}

impl InfrastructureNode {
    /// A node with the per-kind defaults and a capacity of 20 items.
    pub fn new(id: impl Into<String>, kind: NodeKind, position: GeoPoint) -> Self {
        Self {
            id: id.into(),
            kind,
            position,
            radius_m: kind.default_radius_m(),
            capacity: 20,
            concurrency: kind.default_concurrency(),
            bandwidth: kind.default_bandwidth(),
            poi: PoiLabel::Unlabeled,
        }
    }

    pub fn with_poi(mut self, poi: PoiLabel) -> Self {
        self.poi = poi;
        self
    }

    pub fn cell(&self) -> CellId {
        CellId::of(self.position)
    }
}

const INFRA_HEADER: [&str; 5] = ["id", "kind", "lat", "lon", "poi"];

/// Reads an infrastructure CSV (`id,kind,lat,lon,poi`). Any malformed row is
/// a hard error: a silently dropped node would skew every coverage metric.
pub fn read_infrastructure<R: Read>(input: R) -> Result<Vec<InfrastructureNode>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(INFRA_HEADER.iter().copied()) {
        return Err(Error::MissingHeader { expected: "id,kind,lat,lon,poi" });
    }
    let mut nodes = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let row = row?;
        let bad = |reason: String| Error::Parse { line, reason };
        if row.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", row.len())));
        }
        let id = row[0].trim().to_string();
        if id.is_empty() {
            return Err(bad("empty node id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(bad(format!("duplicate node id `{id}`")));
        }
        let kind: NodeKind = row[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let lat: f64 = row[2].trim().parse().map_err(|_| bad("unparseable latitude".into()))?;
        let lon: f64 = row[3].trim().parse().map_err(|_| bad("unparseable longitude".into()))?;
        let position = GeoPoint::new(lat, lon).map_err(|e| bad(e.to_string()))?;
        let poi: PoiLabel = row[4].parse().map_err(|e: Error| bad(e.to_string()))?;
        nodes.push(InfrastructureNode::new(id, kind, position).with_poi(poi));
    }
    Ok(nodes)
}

pub fn write_infrastructure<W: Write>(out: W, nodes: &[InfrastructureNode]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INFRA_HEADER)?;
    for n in nodes {
        w.write_record([
            n.id.as_str(),
            n.kind.as_str(),
            &n.position.lat.to_string(),
            &n.position.lon.to_string(),
            n.poi.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Uniform-grid spatial index over infrastructure nodes, bucketed by
/// [`CellId`] and searched ring by ring outward from the query cell.
#[derive(Debug, Clone)]
pub struct NodeIndex {
    nodes: Vec<InfrastructureNode>,
    /// Buckets for Wi-Fi APs, cellular BSes and all nodes.
    buckets: [HashMap<CellId, Vec<u32>>; 3],
    min_cell: CellId,
    max_cell: CellId,
    max_abs_lat: f64,
}

fn bucket_slot(kind: Option<NodeKind>) -> usize {
    match kind {
        Some(NodeKind::WifiAp) => 0,
        Some(NodeKind::CellularBs) => 1,
        None => 2,
    }
}

impl NodeIndex {
    pub fn new(nodes: Vec<InfrastructureNode>) -> Self {
        let mut buckets: [HashMap<CellId, Vec<u32>>; 3] = Default::default();
        let mut min_cell = CellId { row: i32::MAX, col: i32::MAX };
        let mut max_cell = CellId { row: i32::MIN, col: i32::MIN };
        let mut max_abs_lat: f64 = 0.0;
        for (i, n) in nodes.iter().enumerate() {
            let c = n.cell();
            buckets[bucket_slot(Some(n.kind))].entry(c).or_default().push(i as u32);
            buckets[2].entry(c).or_default().push(i as u32);
            min_cell.row = min_cell.row.min(c.row);
            min_cell.col = min_cell.col.min(c.col);
            max_cell.row = max_cell.row.max(c.row);
            max_cell.col = max_cell.col.max(c.col);
            max_abs_lat = max_abs_lat.max(n.position.lat.abs());
        }
        Self { nodes, buckets, min_cell, max_cell, max_abs_lat }
    }

    pub fn nodes(&self) -> &[InfrastructureNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &InfrastructureNode {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Nearest node (optionally of one kind) by haversine distance; ties go
    /// to the lexicographically smallest id. Returns the node's position in
    /// [`NodeIndex::nodes`] and the distance in meters.
    pub fn nearest(&self, p: GeoPoint, kind: Option<NodeKind>) -> Option<(usize, f64)> {
        self.search(p, kind, f64::INFINITY)
    }

    /// Nearest node of `kind` provided it lies within `radius_m`.
    pub fn nearest_within(&self, p: GeoPoint, kind: NodeKind, radius_m: f64) -> Option<(usize, f64)> {
        self.search(p, Some(kind), radius_m).filter(|&(_, d)| d <= radius_m)
    }

    /// Ring search that stops once no unvisited cell can hold a node closer
    /// than the best so far, or closer than `limit`.
    fn search(&self, p: GeoPoint, kind: Option<NodeKind>, limit: f64) -> Option<(usize, f64)> {
        let buckets = &self.buckets[bucket_slot(kind)];
        if buckets.is_empty() {
            return None;
        }
        let q = CellId::of(p);
        let max_ring = [
            (q.row - self.min_cell.row).abs(),
            (q.row - self.max_cell.row).abs(),
            (q.col - self.min_cell.col).abs(),
            (q.col - self.max_cell.col).abs(),
        ]
        .into_iter()
        .max()
        .unwrap();
        // Longitude gaps shrink toward the poles; bound them at the highest
        // latitude any node or the query reaches.
        let cos_top = self.max_abs_lat.max(p.lat.abs()).min(90.0).to_radians().cos();

        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=max_ring {
            if ring > 0 {
                let bound = ring_lower_bound(p, q, ring, cos_top);
                if bound > limit || best.is_some_and(|(_, bd)| bd < bound) {
                    break;
                }
            }
            for cell in ring_cells(q, ring) {
                let Some(bucket) = buckets.get(&cell) else { continue };
                for &i in bucket {
                    let n = &self.nodes[i as usize];
                    let d = haversine(p, n.position);
                    let better = match best {
                        None => true,
                        Some((bi, bd)) => d < bd || (d == bd && n.id < self.nodes[bi].id),
                    };
                    if better {
                        best = Some((i as usize, d));
                    }
                }
            }
        }
        best
    }
}

/// Lower bound in meters on the distance from `p` (inside cell `q`) to any
/// point outside the block of cells within ring `ring - 1` of `q`.
fn ring_lower_bound(p: GeoPoint, q: CellId, ring: i32, cos_top: f64) -> f64 {
    // Slack for the boundary snapping in `grid_index`.
    const SLACK_DEG: f64 = 1e-8;
    let inner = (ring - 1) as f64;
    let south = p.lat - (q.row as f64 - inner) * CELL_DEG;
    let north = (q.row as f64 + inner + 1.0) * CELL_DEG - p.lat;
    let west = p.lon - (q.col as f64 - inner) * CELL_DEG;
    let east = (q.col as f64 + inner + 1.0) * CELL_DEG - p.lon;
    let lat_gap = (south.min(north) - SLACK_DEG).max(0.0).to_radians();
    let lon_gap = (west.min(east) - SLACK_DEG).max(0.0).to_radians();
    // Great-circle distance is at least R |dlat|, and at least
    // 2R asin(cos(lat_max) sin(dlon / 2)) by the haversine formula.
    let by_lat = EARTH_RADIUS_M * lat_gap;
    let by_lon = 2.0 * EARTH_RADIUS_M * (cos_top * (lon_gap / 2.0).min(std::f64::consts::FRAC_PI_2).sin()).min(1.0).asin();
    by_lat.min(by_lon) * (1.0 - 1e-9)
}

fn ring_cells(center: CellId, ring: i32) -> impl Iterator<Item = CellId> {
    let side = 2 * ring + 1;
    let count = if ring == 0 { 1 } else { 4 * (side - 1) };
    (0..count).map(move |k| {
        if ring == 0 {
            return center;
        }
        let edge = side - 1;
        let (dr, dc) = match k / edge {
            0 => (-ring, -ring + k % edge),
            1 => (-ring + k % edge, ring),
            2 => (ring, ring - k % edge),
            _ => (ring - k % edge, -ring),
        };
        CellId { row: center.row + dr, col: center.col + dc }
    })
}

/// Convenience wrapper matching the free-function form: nearest node of the
/// requested kind with its distance.
pub fn nearest_node<'a>(
    p: GeoPoint,
    index: &'a NodeIndex,
    kind: Option<NodeKind>,
) -> Option<(&'a InfrastructureNode, f64)> {
    index.nearest(p, kind).map(|(i, d)| (index.node(i), d))
}

/// Distances from each point to its nearest node of `kind`.
pub fn nearest_distances(points: &[GeoPoint], index: &NodeIndex, kind: NodeKind) -> Result<Vec<f64>> {
    if index.count_kind(kind) == 0 {
        return Err(Error::EmptyNodeSet(kind.as_str()));
    }
    Ok(points
        .iter()
        .map(|&p| index.nearest(p, Some(kind)).map(|(_, d)| d).unwrap())
        .collect())
}

/// Empirical CDF of request-to-nearest-node distances.
pub fn coverage_cdf(points: &[GeoPoint], index: &NodeIndex, kind: NodeKind) -> Result<Ecdf> {
    if points.is_empty() {
        return Err(Error::NoSamples);
    }
    Ecdf::new(nearest_distances(points, index, kind)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceGap {
    /// nearest-BS distance minus nearest-AP distance, one per request.
    pub gaps: Vec<f64>,
    pub fraction_positive: f64,
}

pub fn distance_gap(points: &[GeoPoint], ap_index: &NodeIndex, bs_index: &NodeIndex) -> Result<DistanceGap> {
    if points.is_empty() {
        return Err(Error::NoSamples);
    }
    let ap = nearest_distances(points, ap_index, NodeKind::WifiAp)?;
    let bs = nearest_distances(points, bs_index, NodeKind::CellularBs)?;
    let gaps: Vec<f64> = bs.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let fraction_positive = gaps.iter().filter(|&&g| g > 0.0).count() as f64 / gaps.len() as f64;
    Ok(DistanceGap { gaps, fraction_positive })
}

/// Cosine similarity of the max-min normalized request and node intensity
/// vectors over a common cell universe.
pub fn intensity_similarity(request_counts: &[f64], node_counts: &[f64]) -> Result<f64> {
    if request_counts.len() != node_counts.len() {
        return Err(Error::LengthMismatch { left: request_counts.len(), right: node_counts.len() });
    }
    let a = max_min_normalize(request_counts);
    let b = max_min_normalize(node_counts);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Counts points per grid cell.
pub fn cell_counts(points: impl IntoIterator<Item = GeoPoint>) -> BTreeMap<CellId, usize> {
    let mut counts = BTreeMap::new();
    for p in points {
        *counts.entry(CellId::of(p)).or_insert(0) += 1;
    }
    counts
}

/// Aligns request and node counts on the union of cells carrying either, as
/// input for [`intensity_similarity`].
pub fn aligned_intensity(
    request_points: impl IntoIterator<Item = GeoPoint>,
    nodes: &[InfrastructureNode],
    kind: Option<NodeKind>,
) -> (Vec<CellId>, Vec<f64>, Vec<f64>) {
    let req = cell_counts(request_points);
    let node = cell_counts(
        nodes.iter().filter(|n| kind.is_none_or(|k| n.kind == k)).map(|n| n.position),
    );
    let mut cells: Vec<CellId> = req.keys().chain(node.keys()).copied().collect();
    cells.sort();
    cells.dedup();
    let r = cells.iter().map(|c| *req.get(c).unwrap_or(&0) as f64).collect();
    let n = cells.iter().map(|c| *node.get(c).unwrap_or(&0) as f64).collect();
    (cells, r, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn cell_of_examples() {
        assert_eq!(cell_of(pt(39.9950, 116.3050)), CellId { row: 3999, col: 11630 });
        assert_eq!(cell_of(pt(0.0, 0.0)), CellId { row: 0, col: 0 });
        assert_eq!(cell_of(pt(39.9999, 116.3001)), cell_of(pt(39.9950, 116.3099)));
        assert_eq!(cell_of(pt(116.30 - 80.0, 116.30)).col, 11630);
        assert_eq!(cell_of(pt(-0.005, -0.005)), CellId { row: -1, col: -1 });
    }

    #[test]
    fn invalid_coordinates_rejected() {
        assert!(GeoPoint::new(200.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -181.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn haversine_examples() {
        let a = pt(39.99, 116.30);
        assert_eq!(haversine(a, a), 0.0);
        // R·Δφ for one hundredth of a degree.
        let expected = EARTH_RADIUS_M * 0.01f64.to_radians();
        assert!((haversine(pt(0.0, 0.0), pt(0.0, 0.01)) - expected).abs() < 1e-6);
        assert!((haversine(a, pt(40.00, 116.30)) - expected).abs() < 1e-6);
        assert!((expected - 1111.95).abs() < 0.01);
    }

    #[test]
    fn nearest_tie_break_by_id() {
        let q = pt(0.0, 0.0);
        let nodes = vec![
            InfrastructureNode::new("b", NodeKind::WifiAp, pt(0.0, 0.001)),
            InfrastructureNode::new("a", NodeKind::WifiAp, pt(0.0, -0.001)),
        ];
        let idx = NodeIndex::new(nodes);
        let (n, _) = nearest_node(q, &idx, None).unwrap();
        assert_eq!(n.id, "a");
    }

    #[test]
    fn nearest_respects_kind_and_empty() {
        let idx = NodeIndex::new(vec![]);
        assert!(idx.nearest(pt(1.0, 1.0), None).is_none());
        let idx = NodeIndex::new(vec![
            InfrastructureNode::new("ap", NodeKind::WifiAp, pt(1.0, 1.0)),
            InfrastructureNode::new("bs", NodeKind::CellularBs, pt(1.5, 1.5)),
        ]);
        let (n, d) = nearest_node(pt(1.0, 1.0), &idx, Some(NodeKind::CellularBs)).unwrap();
        assert_eq!(n.id, "bs");
        assert!(d > 70_000.0);
        assert!(idx.nearest_within(pt(1.0, 1.0), NodeKind::CellularBs, 500.0).is_none());
    }

    #[test]
    fn coverage_and_gap_basics() {
        let ap = NodeIndex::new(vec![InfrastructureNode::new("a", NodeKind::WifiAp, pt(10.0, 10.0))]);
        let cdf = coverage_cdf(&[pt(10.0, 10.0)], &ap, NodeKind::WifiAp).unwrap();
        assert_eq!(cdf.eval(0.0), 1.0);
        assert!(matches!(coverage_cdf(&[], &ap, NodeKind::WifiAp), Err(Error::NoSamples)));
        let bs = NodeIndex::new(vec![InfrastructureNode::new("b", NodeKind::CellularBs, pt(10.0, 10.0))]);
        let gap = distance_gap(&[pt(10.001, 10.0)], &ap, &bs).unwrap();
        assert_eq!(gap.gaps, vec![0.0]);
        assert_eq!(gap.fraction_positive, 0.0);
        assert!(distance_gap(&[pt(10.0, 10.0)], &ap, &NodeIndex::new(vec![])).is_err());
    }

    #[test]
    fn similarity_examples() {
        assert!((intensity_similarity(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(intensity_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(intensity_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::UndefinedSimilarity)));
        assert!(intensity_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dominant_label_ties_use_enumeration_order() {
        use PoiLabel::*;
        assert_eq!(dominant_label([Hotel, Business]), Business);
        assert_eq!(dominant_label([Hotel, Hotel, Business]), Hotel);
        assert_eq!(dominant_label([Unlabeled, Unlabeled]), Unlabeled);
        let map = CellPoiMap::from_labels([
            (CellId { row: 0, col: 0 }, Hotel),
            (CellId { row: 0, col: 0 }, Campus),
            (CellId { row: 0, col: 0 }, Campus),
        ]);
        assert_eq!(map.label(CellId { row: 0, col: 0 }), Campus);
        assert_eq!(map.label_count(CellId { row: 0, col: 0 }), 2);
        assert_eq!(map.label(CellId { row: 5, col: 5 }), Unlabeled);
    }

    #[test]
    fn infrastructure_csv_round_trip_and_errors() {
        let csv = "id,kind,lat,lon,poi\nap1,ap,39.9,116.3,resident\nbs1,bs,39.91,116.31,unlabeled\n";
        let nodes = read_infrastructure(csv.as_bytes()).unwrap();
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[0].radius_m, 100.0);
        assert_eq!(nodes[1].concurrency, 100);
        let mut buf = Vec::new();
        write_infrastructure(&mut buf, &nodes).unwrap();
        assert_eq!(read_infrastructure(buf.as_slice()).unwrap(), nodes);

        assert!(matches!(read_infrastructure("a,b\n".as_bytes()), Err(Error::MissingHeader { .. })));
        let bad = "id,kind,lat,lon,poi\nx,ap,95,0,resident\n";
        assert!(matches!(read_infrastructure(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let dup = "id,kind,lat,lon,poi\nx,ap,1,0,resident\nx,bs,1,0,resident\n";
        assert!(read_infrastructure(dup.as_bytes()).is_err());
    }

    #[test]
    fn ring_cells_cover_square_boundary() {
        let c = CellId { row: 0, col: 0 };
        for ring in 0..4 {
            let cells: Vec<CellId> = ring_cells(c, ring).collect();
            let mut uniq = cells.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), cells.len());
            assert!(cells.iter().all(|x| x.ring_distance(c) == ring));
            assert_eq!(cells.len(), if ring == 0 { 1 } else { 8 * ring as usize });
        }
    }
}
