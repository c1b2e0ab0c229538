use std::fs;
use std::io::Write;
use std::path::Path;

use cellcp::geodata::{Dataset, GeoPoint};
use cellcp::kernel::{BandwidthScale, StbkrParams};

use crate::error::CliError;

pub const DATASET_HEADER: [&str; 7] = ["lon", "lat", "score", "avg_d_kbps", "avg_u_kbps", "tests", "devices"];

/// `key=value` lines: `k`, `c` and optionally `bandwidth`.
pub fn write_params(path: &Path, p: &StbkrParams) -> Result<(), CliError> {
    let text = format!("k={}\nc={}\nbandwidth={}\n", p.k, p.c, p.scale.name());
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_params(path: &Path) -> Result<StbkrParams, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (mut k, mut c, mut scale) = (None, None, BandwidthScale::default());
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || CliError::Usage(format!("{}:{}: expected key=value, got {line:?}", path.display(), no + 1));
        let (key, value) = line.split_once('=').ok_or_else(bad)?;
        let value = value.trim();
        match key.trim() {
            "k" => k = Some(value.parse::<usize>().map_err(|_| bad())?),
            "c" => c = Some(value.parse::<f64>().map_err(|_| bad())?),
            "bandwidth" => scale = BandwidthScale::parse(value)?,
            _ => {}
        }
    }
    let missing = |key: &str| CliError::Usage(format!("{}: missing `{key}=`", path.display()));
    Ok(StbkrParams::new(k.ok_or_else(|| missing("k"))?, c.ok_or_else(|| missing("c"))?)?.with_scale(scale))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

/// Writes measurements with full precision so the file reloads exactly.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let wrap = |e| CliError::csv(path, e);
    w.write_record(DATASET_HEADER).map_err(wrap)?;
    for m in ds.points() {
        w.write_record([
            m.location.lon.to_string(),
            m.location.lat.to_string(),
            m.score.to_string(),
            m.download_kbps.to_string(),
            m.upload_kbps.to_string(),
            m.tests.to_string(),
            m.devices.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_indices(path: &Path, indices: &[usize]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut text = String::from("index\n");
    for i in indices {
        text.push_str(&format!("{i}\n"));
    }
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Reads `lon,lat` query points.
pub fn read_queries(path: &Path) -> Result<Vec<GeoPoint>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{}: missing mandatory column `{name}`", path.display())))
    };
    let (lon, lat) = (col("lon")?, col("lat")?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CliError::csv(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, CliError> {
            let raw = row.get(i).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{}: line {line}: cannot parse {raw:?}", path.display())))
        };
        let p = GeoPoint::new(num(lon)?, num(lat)?)
            .map_err(|e| CliError::Usage(format!("{}: line {line}: {e}", path.display())))?;
        out.push(p);
    }
    Ok(out)
}

/// Coordinates with six decimals (about 0.1 m).
pub fn fmt_coord(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" { "0.000000".into() } else { s }
}
