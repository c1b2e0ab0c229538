//! CSV ingestion of Ookla-style tile tables.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{quadkey_centroid, Dataset, Frame, GeoPoint, MeasurementRecord};
use crate::error::{Error, Result};

/// Header names for each field. Defaults follow Ookla's open-data schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub lon: String,
    pub lat: String,
    pub quadkey: String,
    pub score: String,
    pub download: String,
    pub upload: String,
    pub tests: String,
    pub devices: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            lon: "lon".into(),
            lat: "lat".into(),
            quadkey: "quadkey".into(),
            score: "score".into(),
            download: "avg_d_kbps".into(),
            upload: "avg_u_kbps".into(),
            tests: "tests".into(),
            devices: "devices".into(),
        }
    }
}

/// Weights used to synthesise a score when the table has no score column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub download: f64,
    pub upload: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            download: 0.5,
            upload: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    pub columns: ColumnMapping,
    pub weights: ScoreWeights,
    pub frame: Frame,
}

/// Loads a comma-separated tile table from disk.
pub fn load_tiles(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    read_tiles(File::open(path)?, opts)
}

enum Location {
    LonLat(usize, usize),
    Quadkey(usize),
}

/// Reads a tile table from any reader. One measurement per data row.
pub fn read_tiles<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let cols = &opts.columns;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| Error::Schema {
            column: name.to_string(),
        })
    };

    let location = match (find(&cols.lon), find(&cols.lat), find(&cols.quadkey)) {
        (Some(lon), Some(lat), _) => Location::LonLat(lon, lat),
        (None, None, Some(qk)) => Location::Quadkey(qk),
        (Some(_), None, None) => return Err(Error::Schema { column: cols.lat.clone() }),
        (None, _, None) => return Err(Error::Schema { column: cols.lon.clone() }),
        (_, _, Some(qk)) => Location::Quadkey(qk),
    };
    let download = require(&cols.download)?;
    let upload = require(&cols.upload)?;
    let tests = require(&cols.tests)?;
    let devices = require(&cols.devices)?;
    let score = find(&cols.score);

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = |idx: usize, name: &str| -> Result<&str> {
            row.get(idx).ok_or_else(|| Error::Parse {
                line,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let number = |idx: usize, name: &str| -> Result<f64> {
            let raw = cell(idx, name)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    line,
                    column: name.to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let count = |idx: usize, name: &str| -> Result<u32> {
            let raw = cell(idx, name)?;
            match raw.parse::<u32>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(Error::Parse {
                    line,
                    column: name.to_string(),
                    value: raw.to_string(),
                }),
            }
        };

        let loc = match location {
            Location::LonLat(lon, lat) => {
                let (lon_v, lat_v) = (number(lon, &cols.lon)?, number(lat, &cols.lat)?);
                GeoPoint::new(lon_v, lat_v).map_err(|_| Error::Parse {
                    line,
                    column: format!("{},{}", cols.lon, cols.lat),
                    value: format!("{lon_v},{lat_v}"),
                })?
            }
            Location::Quadkey(qk) => {
                let raw = cell(qk, &cols.quadkey)?;
                quadkey_centroid(raw).map_err(|_| Error::Parse {
                    line,
                    column: cols.quadkey.clone(),
                    value: raw.to_string(),
                })?
            }
        };
        let nonneg = |idx: usize, name: &str| -> Result<f64> {
            let v = number(idx, name)?;
            if v < 0.0 {
                return Err(Error::Parse {
                    line,
                    column: name.to_string(),
                    value: v.to_string(),
                });
            }
            Ok(v)
        };
        let d = nonneg(download, &cols.download)?;
        let u = nonneg(upload, &cols.upload)?;
        let score = match score {
            Some(idx) => number(idx, &cols.score)?,
            None => opts.weights.download * d + opts.weights.upload * u,
        };
        records.push(MeasurementRecord {
            location: loc,
            score,
            download_kbps: d,
            upload_kbps: u,
            tests: count(tests, &cols.tests)?,
            devices: count(devices, &cols.devices)?,
        });
    }
    Dataset::from_records(records, opts.frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Dataset> {
        read_tiles(text.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn default_score_is_equal_weight_mean() {
        let ds = read("lon,lat,avg_d_kbps,avg_u_kbps,tests,devices\n-84.39,33.75,50000,10000,3,2\n").unwrap();
        let m = ds.get(0);
        assert_eq!(m.score, 30000.0);
        assert_eq!((m.tests, m.devices), (3, 2));
        assert_eq!(m.location, GeoPoint { lon: -84.39, lat: 33.75 });
    }

    #[test]
    fn explicit_score_wins() {
        let ds = read("lon,lat,score,avg_d_kbps,avg_u_kbps,tests,devices\n1,2,42,500,100,1,1\n").unwrap();
        let m = ds.get(0);
        assert_eq!(m.score, 42.0);
        assert_eq!((m.download_kbps, m.upload_kbps), (500.0, 100.0));
    }

    #[test]
    fn custom_weights() {
        let opts = LoadOptions {
            weights: ScoreWeights { download: 1.0, upload: 0.0 },
            ..Default::default()
        };
        let ds = read_tiles("lon,lat,avg_d_kbps,avg_u_kbps,tests,devices\n1,2,500,100,1,1\n".as_bytes(), &opts).unwrap();
        assert_eq!(ds.get(0).score, 500.0);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(read("lon,lat,avg_d_kbps,avg_u_kbps,tests,devices\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn missing_column_is_named() {
        let err = read("lon,lat,avg_d_kbps,tests,devices\n1,2,3,1,1\n").unwrap_err();
        assert!(matches!(&err, Error::Schema { column } if column == "avg_u_kbps"), "{err}");
        let err = read("lon,avg_d_kbps,avg_u_kbps,tests,devices\n1,3,3,1,1\n").unwrap_err();
        assert!(matches!(&err, Error::Schema { column } if column == "lat"), "{err}");
    }

    #[test]
    fn parse_error_reports_line() {
        let err = read("lon,lat,avg_d_kbps,avg_u_kbps,tests,devices\n1,2,3,4,1,1\n1,2,abc,4,1,1\n").unwrap_err();
        match err {
            Error::Parse { line, column, value } => {
                assert_eq!(line, 3);
                assert_eq!(column, "avg_d_kbps");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn quadkey_rows_use_tile_centres() {
        let ds = read("quadkey,avg_d_kbps,avg_u_kbps,tests,devices\n0,10,20,1,1\n3,10,20,1,1\n").unwrap();
        assert_eq!(ds.get(0).location.lon, -90.0);
        assert_eq!(ds.get(1).location.lon, 90.0);
        assert_eq!(ds.get(0).score, 15.0);
    }

    #[test]
    fn renamed_columns() {
        let opts = LoadOptions {
            columns: ColumnMapping {
                lon: "x".into(),
                lat: "y".into(),
                ..Default::default()
            },
            ..Default::default()
        };
        let ds = read_tiles("x,y,avg_d_kbps,avg_u_kbps,tests,devices\n5,6,1,1,1,1\n".as_bytes(), &opts).unwrap();
        assert_eq!(ds.get(0).location, GeoPoint { lon: 5.0, lat: 6.0 });
    }

    #[test]
    fn origin_is_centroid() {
        let ds = read("lon,lat,avg_d_kbps,avg_u_kbps,tests,devices\n0,0,1,1,1,1\n2,4,1,1,1,1\n").unwrap();
        assert_eq!(ds.origin(), GeoPoint { lon: 1.0, lat: 2.0 });
    }
}
