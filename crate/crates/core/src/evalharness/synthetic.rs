use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use std::io::Write;

use crate::error::{Error, Result};
use crate::geodata::{quadkey_for, unproject, Dataset, Frame, GeoPoint, Measurement, PlanarPoint};
use crate::seeding;

/// Half-width of the square sampling domain, kilometres.
pub const DOMAIN_HALF_WIDTH: f64 = 50.0;

/// Geographic anchor of the synthetic domain.
pub const SYNTHETIC_ORIGIN: GeoPoint = GeoPoint { lon: -83.5, lat: 32.7 };

const BUMPS: [(f64, f64, f64, f64); 3] = [
    // (x, y, height, spread)
    (-20.0, 15.0, 30.0, 15.0),
    (25.0, -10.0, 20.0, 12.0),
    (10.0, 30.0, -15.0, 10.0),
];

const CLUSTERS: [(f64, f64); 3] = [(-25.0, -20.0), (20.0, 25.0), (30.0, -30.0)];
const CLUSTER_SPREAD: f64 = 6.0;
const CLUSTERED_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Uniform locations, constant noise.
    Smooth,
    /// Uniform locations; noise std is `noise_base` for `x < 0` and
    /// `noise_base · noise_ratio` for `x ≥ 0`.
    Heteroscedastic,
    /// 90% of locations in three dense clusters, 10% uniform.
    Clustered,
}

impl FieldKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(FieldKind::Smooth),
            "heteroscedastic" => Ok(FieldKind::Heteroscedastic),
            "clustered" => Ok(FieldKind::Clustered),
            _ => Err(Error::arg(format!(
                "unknown field kind {s:?} (expected smooth|heteroscedastic|clustered)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub field: FieldKind,
    pub noise_base: f64,
    pub noise_ratio: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Heteroscedastic fixture with unit noise on the left half and 4× on
    /// the right.
    pub fn heteroscedastic(n: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            field: FieldKind::Heteroscedastic,
            noise_base: 1.0,
            noise_ratio: 4.0,
            seed,
        }
    }

    /// Noise standard deviation at `p`.
    pub fn noise_std(&self, p: PlanarPoint) -> f64 {
        match self.field {
            FieldKind::Heteroscedastic if p.x >= 0.0 => self.noise_base * self.noise_ratio,
            _ => self.noise_base,
        }
    }
}

/// Noise-free field: a constant plus three Gaussian bumps.
pub fn true_field(p: PlanarPoint) -> f64 {
    50.0 + BUMPS
        .iter()
        .map(|&(x, y, h, s)| {
            let d2 = (p.x - x).powi(2) + (p.y - y).powi(2);
            h * (-d2 / (2.0 * s * s)).exp()
        })
        .sum::<f64>()
}

/// Draws a synthetic dataset on `[−50, 50]²` km around [`SYNTHETIC_ORIGIN`].
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n < 50 {
        return Err(Error::arg(format!("synthetic datasets need n >= 50, got {}", spec.n)));
    }
    if !(spec.noise_base.is_finite() && spec.noise_base >= 0.0) {
        return Err(Error::arg(format!("noise_base must be >= 0, got {}", spec.noise_base)));
    }
    if !(spec.noise_ratio.is_finite() && spec.noise_ratio >= 1.0) {
        return Err(Error::arg(format!("noise_ratio must be >= 1, got {}", spec.noise_ratio)));
    }
    let mut rng = seeding::rng(seeding::derive(spec.seed, 0x5E));
    let spread = Normal::new(0.0, CLUSTER_SPREAD).expect("valid normal");
    let lim = DOMAIN_HALF_WIDTH;
    let points = (0..spec.n)
        .map(|_| {
            let planar = match spec.field {
                FieldKind::Clustered if rng.random::<f64>() < CLUSTERED_FRACTION => {
                    let (cx, cy) = CLUSTERS[rng.random_range(0..CLUSTERS.len())];
                    PlanarPoint::new(
                        (cx + spread.sample(&mut rng)).clamp(-lim, lim),
                        (cy + spread.sample(&mut rng)).clamp(-lim, lim),
                    )
                }
                _ => PlanarPoint::new(rng.random_range(-lim..lim), rng.random_range(-lim..lim)),
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            let score = true_field(planar) + spec.noise_std(planar) * z;
            Measurement {
                location: unproject(planar, SYNTHETIC_ORIGIN),
                planar,
                score,
                download_kbps: score.max(0.0),
                upload_kbps: score.max(0.0),
                tests: 1,
                devices: 1,
            }
        })
        .collect();
    Ok(Dataset::from_parts(points, SYNTHETIC_ORIGIN, Frame::Equirectangular))
}

/// One row of an Ookla-style performance tile table.
#[derive(Debug, Clone, PartialEq)]
pub struct TileRow {
    pub quadkey: String,
    pub avg_d_kbps: f64,
    pub avg_u_kbps: f64,
    pub avg_lat_ms: f64,
    pub tests: u32,
    pub devices: u32,
}

const TILE_LOG_SD: f64 = 0.5;

/// Tile table at the locations of [`generate`]. Download and upload speeds
/// are log-normal (log-sd 0.5) around `1000·μ` and `250·μ` kbps, so the
/// table has the right-skewed tails of real speed tests.
pub fn generate_tiles(spec: &SyntheticSpec, zoom: u32) -> Result<Vec<TileRow>> {
    let ds = generate(spec)?;
    let mut rng = seeding::rng(seeding::derive(spec.seed, 0x711E));
    let shift = -0.5 * TILE_LOG_SD * TILE_LOG_SD;
    ds.points()
        .iter()
        .map(|m| {
            let base = true_field(m.planar).max(1.0);
            let mut lognormal = |scale: f64, sd: f64| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * (sd * z + shift).exp()
            };
            let avg_d_kbps = lognormal(1000.0 * base, TILE_LOG_SD);
            let avg_u_kbps = lognormal(250.0 * base, TILE_LOG_SD);
            let avg_lat_ms = lognormal(35.0, 0.3);
            let tests = rng.random_range(1..=20);
            let devices = rng.random_range(1..=tests);
            Ok(TileRow {
                quadkey: quadkey_for(m.location, zoom)?,
                avg_d_kbps: avg_d_kbps.round(),
                avg_u_kbps: avg_u_kbps.round(),
                avg_lat_ms: avg_lat_ms.round(),
                tests,
                devices,
            })
        })
        .collect()
}

/// Writes tile rows with Ookla's column names.
pub fn write_tiles<W: Write>(rows: &[TileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quadkey", "avg_d_kbps", "avg_u_kbps", "avg_lat_ms", "tests", "devices"])?;
    for r in rows {
        w.write_record([
            r.quadkey.clone(),
            r.avg_d_kbps.to_string(),
            r.avg_u_kbps.to_string(),
            r.avg_lat_ms.to_string(),
            r.tests.to_string(),
            r.devices.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_dev(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::heteroscedastic(300, 5);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.points(), b.points());
        let c = generate(&SyntheticSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a.points(), c.points());
    }

    #[test]
    fn noise_free_is_exact() {
        let ds = generate(&SyntheticSpec {
            n: 200,
            field: FieldKind::Smooth,
            noise_base: 0.0,
            noise_ratio: 1.0,
            seed: 1,
        })
        .unwrap();
        assert!(ds.points().iter().all(|m| m.score == true_field(m.planar)));
    }

    #[test]
    fn heteroscedastic_noise_ratio() {
        let ds = generate(&SyntheticSpec::heteroscedastic(5000, 2)).unwrap();
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for m in ds.points() {
            let e = m.score - true_field(m.planar);
            if m.planar.x < 0.0 { left.push(e) } else { right.push(e) }
        }
        let ratio = std_dev(&right) / std_dev(&left);
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn clustered_concentration() {
        let ds = generate(&SyntheticSpec {
            n: 4000,
            field: FieldKind::Clustered,
            noise_base: 1.0,
            noise_ratio: 1.0,
            seed: 3,
        })
        .unwrap();
        let near = ds
            .points()
            .iter()
            .filter(|m| CLUSTERS.iter().any(|&(x, y)| (m.planar.x - x).hypot(m.planar.y - y) < 3.0 * CLUSTER_SPREAD))
            .count();
        assert!(near as f64 > 0.85 * 4000.0);
    }

    #[test]
    fn domain_and_validation() {
        let ds = generate(&SyntheticSpec::heteroscedastic(500, 0)).unwrap();
        assert!(ds.points().iter().all(|m| m.planar.x.abs() <= 50.0 && m.planar.y.abs() <= 50.0));
        assert!(generate(&SyntheticSpec::heteroscedastic(49, 0)).is_err());
        assert!(generate(&SyntheticSpec { noise_ratio: 0.5, ..SyntheticSpec::heteroscedastic(100, 0) }).is_err());
        assert_eq!(FieldKind::parse("clustered").unwrap(), FieldKind::Clustered);
    }

    #[test]
    fn tile_table_loads_and_filters_a_few_percent() {
        use crate::geodata::{read_tiles, remove_outliers, LoadOptions};
        let rows = generate_tiles(&SyntheticSpec::heteroscedastic(3000, 1), 16).unwrap();
        assert!(rows.iter().all(|r| r.quadkey.len() == 16 && r.devices <= r.tests));
        let mut buf = Vec::new();
        write_tiles(&rows, &mut buf).unwrap();
        let ds = read_tiles(buf.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(ds.len(), 3000);
        let removed = remove_outliers(&ds, 50, 3.0).unwrap().removed.len() as f64 / 3000.0;
        assert!((0.005..=0.10).contains(&removed), "removed fraction {removed}");
    }
}
