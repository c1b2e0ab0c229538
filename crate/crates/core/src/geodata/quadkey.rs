//! Web-Mercator quadkeys, as used to key Ookla performance tiles.

use std::f64::consts::PI;

use super::GeoPoint;
use crate::error::{Error, Result};

const MAX_ZOOM: usize = 31;

/// Tile `(x, y, zoom)` addressed by a quadkey.
pub fn quadkey_tile(quadkey: &str) -> Result<(u64, u64, u32)> {
    if quadkey.is_empty() || quadkey.len() > MAX_ZOOM {
        return Err(Error::Quadkey(quadkey.to_string()));
    }
    let (mut x, mut y) = (0u64, 0u64);
    for ch in quadkey.chars() {
        let digit = match ch {
            '0'..='3' => ch as u64 - '0' as u64,
            _ => return Err(Error::Quadkey(quadkey.to_string())),
        };
        x = (x << 1) | (digit & 1);
        y = (y << 1) | (digit >> 1);
    }
    Ok((x, y, quadkey.len() as u32))
}

/// Lon/lat of the centre of the tile addressed by `quadkey`.
pub fn quadkey_centroid(quadkey: &str) -> Result<GeoPoint> {
    let (x, y, zoom) = quadkey_tile(quadkey)?;
    let tiles = (1u64 << zoom) as f64;
    let lon = (x as f64 + 0.5) / tiles * 360.0 - 180.0;
    let n = PI * (1.0 - 2.0 * (y as f64 + 0.5) / tiles);
    let lat = n.sinh().atan().to_degrees();
    Ok(GeoPoint { lon, lat })
}

/// Quadkey of the zoom-`zoom` tile containing `p`. Latitudes beyond the
/// Web-Mercator limit fall in the edge row.
pub fn quadkey_for(p: GeoPoint, zoom: u32) -> Result<String> {
    if zoom == 0 || zoom as usize > MAX_ZOOM {
        return Err(Error::arg(format!("zoom must lie in 1..={MAX_ZOOM}, got {zoom}")));
    }
    let tiles = (1u64 << zoom) as f64;
    let max = (1u64 << zoom) - 1;
    let x = (((p.lon + 180.0) / 360.0 * tiles).floor().max(0.0) as u64).min(max);
    let lat = p.lat.to_radians();
    let merc = (lat.tan() + 1.0 / lat.cos()).ln();
    let y = (((1.0 - merc / PI) / 2.0 * tiles).floor().max(0.0) as u64).min(max);
    Ok((0..zoom)
        .rev()
        .map(|bit| {
            let digit = ((x >> bit) & 1) | (((y >> bit) & 1) << 1);
            char::from(b'0' + digit as u8)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoom_one_tiles() {
        let p = quadkey_centroid("0").unwrap();
        assert_eq!(p.lon, -90.0);
        assert!((p.lat - 66.51326044311186).abs() < 1e-9, "{}", p.lat);
        let p = quadkey_centroid("3").unwrap();
        assert_eq!(p.lon, 90.0);
        assert!((p.lat + 66.51326044311186).abs() < 1e-9, "{}", p.lat);
    }

    #[test]
    fn digit_order_is_significant() {
        assert_ne!(quadkey_centroid("02").unwrap(), quadkey_centroid("20").unwrap());
        assert_eq!(quadkey_tile("02").unwrap(), (0, 1, 2));
        assert_eq!(quadkey_tile("20").unwrap(), (0, 2, 2));
    }

    #[test]
    fn zoom16_tile_is_about_600m() {
        // Atlanta-area tile used by Ookla's mobile dataset.
        let a = quadkey_centroid("0320010000232000").unwrap();
        let (x, y, z) = quadkey_tile("0320010000232000").unwrap();
        assert_eq!(z, 16);
        let tiles = 1u64 << z;
        assert!(x < tiles && y < tiles);
        assert!(a.lat > -85.06 && a.lat < 85.06);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(quadkey_centroid(""), Err(Error::Quadkey(_))));
        assert!(matches!(quadkey_centroid("0124"), Err(Error::Quadkey(_))));
        assert!(quadkey_centroid(&"1".repeat(32)).is_err());
    }

    #[test]
    fn encode_round_trip() {
        for key in ["0", "3", "0231", "1202102332221212", "0320101101223"] {
            let c = quadkey_centroid(key).unwrap();
            assert_eq!(quadkey_for(c, key.len() as u32).unwrap(), key);
        }
        let atl = GeoPoint::new(-84.39, 33.75).unwrap();
        let key = quadkey_for(atl, 16).unwrap();
        let c = quadkey_centroid(&key).unwrap();
        assert!((c.lon - atl.lon).abs() < 0.006 && (c.lat - atl.lat).abs() < 0.006);
        assert!(quadkey_for(atl, 0).is_err());
    }
}
