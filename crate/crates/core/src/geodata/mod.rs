//! Measurement ingestion, planar projection and spatial indexing.

mod ingest;
pub mod kdtree;
mod outliers;
mod quadkey;
mod split;

pub use ingest::{load_tiles, read_tiles, ColumnMapping, LoadOptions, ScoreWeights};
pub use kdtree::{KdTree, Neighbor};
pub use outliers::{outlier_flags, remove_outliers, OutlierReport};
pub use quadkey::{quadkey_centroid, quadkey_for, quadkey_tile};
pub use split::{split_indices, train_test_split};

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG), kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// WGS-84 longitude/latitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !(lon.is_finite() && (-180.0..=180.0).contains(&lon)) {
            return Err(Error::arg(format!("longitude {lon} outside [-180, 180]")));
        }
        if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
            return Err(Error::arg(format!("latitude {lat} outside [-90, 90]")));
        }
        Ok(GeoPoint { lon, lat })
    }
}

/// Coordinates in the planar working frame. Kilometres east/north of the
/// projection origin, or raw degrees when the dataset uses
/// [`Frame::RawDegrees`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        kdtree::dist_sq(self.to_array(), other.to_array()).sqrt()
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Local equirectangular projection around `origin`.
pub fn project(p: GeoPoint, origin: GeoPoint) -> PlanarPoint {
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    PlanarPoint {
        x: k * (p.lon - origin.lon) * origin.lat.to_radians().cos(),
        y: k * (p.lat - origin.lat),
    }
}

/// Inverse of [`project`].
pub fn unproject(p: PlanarPoint, origin: GeoPoint) -> GeoPoint {
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    GeoPoint {
        lon: origin.lon + p.x / (k * origin.lat.to_radians().cos()),
        lat: origin.lat + p.y / k,
    }
}

/// How geographic coordinates map into the planar frame used for distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    /// Equirectangular kilometres around the dataset centroid.
    #[default]
    Equirectangular,
    /// `x = lon`, `y = lat`, distances in degrees.
    RawDegrees,
}

/// One georeferenced sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub location: GeoPoint,
    pub planar: PlanarPoint,
    pub score: f64,
    pub download_kbps: f64,
    pub upload_kbps: f64,
    pub tests: u32,
    pub devices: u32,
}

/// A measurement before it has been placed in a planar frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub location: GeoPoint,
    pub score: f64,
    pub download_kbps: f64,
    pub upload_kbps: f64,
    pub tests: u32,
    pub devices: u32,
}

/// Immutable set of measurements with a k-d tree over their planar
/// coordinates. Index identifiers are positional indices into `points`.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<Measurement>,
    origin: GeoPoint,
    frame: Frame,
    index: KdTree,
}

impl Dataset {
    /// Projects records around their lon/lat centroid.
    pub fn from_records(records: Vec<MeasurementRecord>, frame: Frame) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = records.len() as f64;
        let origin = GeoPoint {
            lon: records.iter().map(|r| r.location.lon).sum::<f64>() / n,
            lat: records.iter().map(|r| r.location.lat).sum::<f64>() / n,
        };
        let points = records
            .into_iter()
            .map(|r| Measurement {
                planar: frame_project(frame, r.location, origin),
                location: r.location,
                score: r.score,
                download_kbps: r.download_kbps,
                upload_kbps: r.upload_kbps,
                tests: r.tests,
                devices: r.devices,
            })
            .collect();
        Ok(Self::from_parts(points, origin, frame))
    }

    /// Assembles a dataset whose planar coordinates are already set.
    pub fn from_parts(points: Vec<Measurement>, origin: GeoPoint, frame: Frame) -> Self {
        let index = KdTree::build(points.iter().map(|m| m.planar.to_array()).collect());
        Dataset {
            points,
            origin,
            frame,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Measurement] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &Measurement {
        &self.points[i]
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn index(&self) -> &KdTree {
        &self.index
    }

    pub fn planar(&self) -> Vec<PlanarPoint> {
        self.points.iter().map(|m| m.planar).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|m| m.score).collect()
    }

    /// Places a geographic point in this dataset's planar frame.
    pub fn project(&self, p: GeoPoint) -> PlanarPoint {
        frame_project(self.frame, p, self.origin)
    }

    pub fn unproject(&self, p: PlanarPoint) -> GeoPoint {
        match self.frame {
            Frame::Equirectangular => unproject(p, self.origin),
            Frame::RawDegrees => GeoPoint { lon: p.x, lat: p.y },
        }
    }

    /// Exact k nearest neighbours, ascending by distance then index.
    pub fn knn(&self, q: PlanarPoint, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::arg("k must be at least 1"));
        }
        if k > self.len() {
            return Err(Error::arg(format!(
                "k = {k} exceeds dataset size {}",
                self.len()
            )));
        }
        Ok(self.index.knn(q.to_array(), k))
    }

    /// New dataset holding the given rows in the given order. The projection
    /// origin is kept so planar coordinates stay comparable.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        Dataset::from_parts(points, self.origin, self.frame)
    }

    /// (lon_min, lat_min, lon_max, lat_max)
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), m| {
                (
                    a.min(m.location.lon),
                    b.min(m.location.lat),
                    c.max(m.location.lon),
                    d.max(m.location.lat),
                )
            },
        )
    }
}

fn frame_project(frame: Frame, p: GeoPoint, origin: GeoPoint) -> PlanarPoint {
    match frame {
        Frame::Equirectangular => project(p, origin),
        Frame::RawDegrees => PlanarPoint { x: p.lon, y: p.lat },
    }
}

/// Equirectangular distance in kilometres; accurate for short separations.
pub fn local_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let p = project(b, a);
    p.x.hypot(p.y)
}
