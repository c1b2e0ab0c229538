use std::fs::File;
use std::path::Path;

use cellcp::conformal::{PointPredictor, QrfSettings, QuantileMode};
use cellcp::evalharness::{
    compare_methods, format_sig, format_table_csv, format_table_text, generate, generate_tiles, method_intervals,
    write_tiles, FieldKind, Method, MethodConfig, SyntheticSpec,
};
use cellcp::geodata::{
    load_tiles, local_distance_km, remove_outliers, train_test_split, ColumnMapping, Dataset, Frame, GeoPoint,
    LoadOptions, ScoreWeights,
};
use cellcp::kernel::{cross_validate, BandwidthScale, CvConfig, StbkrParams};
use cellcp::seeding;

use crate::args::{
    EvaluateArgs, GridArgs, IngestArgs, MethodArgs, PredictMapArgs, SynthArgs, TuneArgs, UncertaintyMapArgs,
};
use crate::error::CliError;
use crate::files::{csv_writer, fmt_coord, read_params, read_queries, write_dataset, write_indices, write_params};

/// Options shared by every subcommand.
pub struct Globals {
    pub seed: u64,
    pub frame: Frame,
}

fn load(path: &Path, g: &Globals) -> Result<Dataset, CliError> {
    let opts = LoadOptions {
        frame: g.frame,
        ..Default::default()
    };
    load_tiles(path, &opts).map_err(|e| prefix(path, e))
}

fn prefix(path: &Path, e: cellcp::Error) -> CliError {
    match CliError::from(e) {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn ingest(a: &IngestArgs, g: &Globals) -> Result<(), CliError> {
    let c = &a.columns;
    let opts = LoadOptions {
        columns: ColumnMapping {
            lon: c.col_lon.clone(),
            lat: c.col_lat.clone(),
            quadkey: c.col_quadkey.clone(),
            score: c.col_score.clone(),
            download: c.col_download.clone(),
            upload: c.col_upload.clone(),
            tests: c.col_tests.clone(),
            devices: c.col_devices.clone(),
        },
        weights: ScoreWeights {
            download: c.download_weight,
            upload: c.upload_weight,
        },
        frame: g.frame,
    };
    let ds = load_tiles(&a.input, &opts).map_err(|e| prefix(&a.input, e))?;
    let (kept, removed) = if a.no_outlier_filter {
        (ds, Vec::new())
    } else {
        let report = remove_outliers(&ds, a.neighbors, a.sigma)?;
        (report.kept, report.removed)
    };
    write_dataset(&a.output, &kept)?;
    if let Some(path) = &a.removed_out {
        write_indices(path, &removed)?;
    }
    println!("kept={} removed={}", kept.len(), removed.len());
    Ok(())
}

fn cv_config(grid: &GridArgs, seed: u64, cutoff: bool) -> Result<CvConfig, CliError> {
    Ok(CvConfig {
        k_grid: grid.k_grid.clone(),
        c_grid: grid.c_grid.clone(),
        folds: grid.folds,
        seed,
        scale: BandwidthScale::parse(&grid.bandwidth)?,
        cutoff,
    })
}

fn tune_params(train: &Dataset, grid: &GridArgs, seed: u64, cutoff: bool) -> Result<(StbkrParams, f64), CliError> {
    let out = cross_validate(train, &cv_config(grid, seed, cutoff)?)?;
    let err = out
        .cells
        .iter()
        .find(|cell| cell.k == out.best.k && cell.c == out.best.c)
        .map_or(f64::NAN, |cell| cell.error);
    Ok((out.best, err))
}

pub fn tune(a: &TuneArgs, g: &Globals) -> Result<(), CliError> {
    let ds = load(&a.data, g)?;
    let (params, rmse) = tune_params(&ds, &a.grid, g.seed, a.kernel_cutoff)?;
    write_params(&a.output, &params)?;
    println!(
        "k={} c={} bandwidth={} cv_rmse={}",
        params.k,
        params.c,
        params.scale.name(),
        format_sig(rmse)
    );
    Ok(())
}

fn method_config(a: &MethodArgs, params: StbkrParams, seed: u64) -> Result<MethodConfig, CliError> {
    Ok(MethodConfig {
        alpha: a.alpha,
        params: params.with_cutoff(params.cutoff || a.kernel_cutoff),
        holdout_frac: a.holdout_frac,
        bootstraps: a.bootstraps,
        batch: a.batch,
        neighborhood: a.neighborhood,
        quantile_mode: QuantileMode::parse(&a.quantile_mode)?,
        point_predictor: PointPredictor::parse(&a.point_predictor)?,
        qrf: QrfSettings {
            trees: a.qrf_trees,
            min_leaf: a.qrf_min_leaf,
            training_radius: a.qrf_training_radius,
        },
        seed,
    })
}

const INTERVAL_HEADER: [&str; 6] = ["lon", "lat", "center", "lower", "upper", "width"];

pub fn predict_map(a: &PredictMapArgs, g: &Globals) -> Result<(), CliError> {
    let ds = load(&a.data, g)?;
    let params = read_params(&a.params)?;
    let cfg = method_config(&a.method_args, params, g.seed)?;
    let method = Method::parse(&a.method)?;
    let geo = read_queries(&a.queries)?;
    let planar: Vec<_> = geo.iter().map(|&p| ds.project(p)).collect();
    let intervals = method_intervals(&ds, &planar, method, &cfg)?;

    let mut w = csv_writer(&a.output)?;
    let wrap = |e| CliError::csv(&a.output, e);
    w.write_record(INTERVAL_HEADER).map_err(wrap)?;
    for (p, iv) in geo.iter().zip(&intervals) {
        w.write_record([
            fmt_coord(p.lon),
            fmt_coord(p.lat),
            format_sig(iv.center),
            format_sig(iv.lower),
            format_sig(iv.upper),
            format_sig(iv.width()),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(&a.output, e))
}

/// Cell centres, row-major from the north-west corner.
pub fn grid_cells(bbox: (f64, f64, f64, f64), nx: usize, ny: usize) -> Vec<(f64, f64)> {
    let (lon_min, lat_min, lon_max, lat_max) = bbox;
    let (dx, dy) = ((lon_max - lon_min) / nx as f64, (lat_max - lat_min) / ny as f64);
    (0..ny)
        .flat_map(|j| {
            let lat = lat_max - (j as f64 + 0.5) * dy;
            (0..nx).map(move |i| (lon_min + (i as f64 + 0.5) * dx, lat))
        })
        .collect()
}

pub fn uncertainty_map(a: &UncertaintyMapArgs, g: &Globals) -> Result<(), CliError> {
    let (nx, ny) = match a.grid.as_slice() {
        [nx, ny] if *nx > 0 && *ny > 0 => (*nx, *ny),
        _ => return Err(CliError::Usage("--grid needs two positive integers NX NY".into())),
    };
    let ds = load(&a.data, g)?;
    let params = read_params(&a.params)?;
    let cfg = method_config(&a.method_args, params, g.seed)?;
    let method = Method::parse(&a.method)?;
    let bbox = match &a.bbox {
        Some(b) if b.len() == 4 => (b[0], b[1], b[2], b[3]),
        Some(_) => return Err(CliError::Usage("--bbox needs lon_min,lat_min,lon_max,lat_max".into())),
        None => ds.bbox(),
    };
    if !(bbox.0 < bbox.2 && bbox.1 < bbox.3) {
        return Err(CliError::Usage(format!(
            "bounding box must satisfy lon_min < lon_max and lat_min < lat_max, got {bbox:?}"
        )));
    }
    if a.max_extrapolation_km.is_nan() || a.max_extrapolation_km < 0.0 {
        return Err(CliError::Usage("--max-extrapolation-km must be non-negative".into()));
    }

    let cells = grid_cells(bbox, nx, ny);
    let mut covered = Vec::with_capacity(cells.len());
    let mut queries = Vec::new();
    for &(lon, lat) in &cells {
        let geo = GeoPoint::new(lon, lat)?;
        let q = ds.project(geo);
        let nearest = ds.knn(q, 1)?[0].index;
        let ok = local_distance_km(geo, ds.get(nearest).location) <= a.max_extrapolation_km;
        covered.push(ok);
        if ok {
            queries.push(q);
        }
    }
    let intervals = if queries.is_empty() {
        Vec::new()
    } else {
        method_intervals(&ds, &queries, method, &cfg)?
    };

    let mut w = csv_writer(&a.output)?;
    let wrap = |e| CliError::csv(&a.output, e);
    w.write_record(INTERVAL_HEADER.iter().chain(&["no_data"])).map_err(wrap)?;
    let mut next = intervals.iter();
    for (&(lon, lat), &ok) in cells.iter().zip(&covered) {
        let (lon, lat) = (fmt_coord(lon), fmt_coord(lat));
        let record = if ok {
            let iv = next.next().expect("one interval per covered cell");
            [
                lon,
                lat,
                format_sig(iv.center),
                format_sig(iv.lower),
                format_sig(iv.upper),
                format_sig(iv.width()),
                "0".into(),
            ]
        } else {
            [lon, lat, String::new(), String::new(), String::new(), String::new(), "1".into()]
        };
        w.write_record(record).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(&a.output, e))
}

pub fn evaluate(a: &EvaluateArgs, g: &Globals) -> Result<(), CliError> {
    if !(a.train_frac > 0.0 && a.train_frac < 1.0) {
        return Err(CliError::Usage(format!("--train-frac must lie in (0, 1), got {}", a.train_frac)));
    }
    let methods = Method::parse_list(&a.methods)?;
    let ds = load(&a.data, g)?;
    let (train, test) = train_test_split(&ds, a.train_frac, seeding::derive(g.seed, 0x7E57));
    if train.is_empty() || test.is_empty() {
        return Err(CliError::Usage(format!("{} points cannot be split {}/{}", ds.len(), a.train_frac, 1.0 - a.train_frac)));
    }
    let params = match &a.params {
        Some(path) => read_params(path)?,
        None => tune_params(&train, &a.grid, g.seed, a.method_args.kernel_cutoff)?.0,
    };
    let cfg = method_config(&a.method_args, params, g.seed)?;
    let reports = compare_methods(&train, &test, &methods, &cfg)?;

    println!(
        "n_train={} n_test={} k={} c={} bandwidth={} K={}",
        train.len(),
        test.len(),
        params.k,
        params.c,
        params.scale.name(),
        cfg.escp_config(train.len()).neighborhood
    );
    print!("{}", format_table_text(&reports, cfg.alpha));
    if let Some(path) = &a.output {
        std::fs::write(path, format_table_csv(&reports)).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn synth(a: &SynthArgs, g: &Globals) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        n: a.n,
        field: FieldKind::parse(&a.field)?,
        noise_base: a.noise_base,
        noise_ratio: a.noise_ratio,
        seed: g.seed,
    };
    match a.format.as_str() {
        "normalized" => write_dataset(&a.output, &generate(&spec)?),
        "ookla" => {
            let rows = generate_tiles(&spec, a.zoom)?;
            let f = File::create(&a.output).map_err(|e| CliError::io(&a.output, e))?;
            write_tiles(&rows, f).map_err(|e| prefix(&a.output, e))
        }
        other => Err(CliError::Usage(format!("unknown format {other:?} (expected normalized|ookla)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_row_major_from_north_west() {
        let cells = grid_cells((0.0, 0.0, 4.0, 2.0), 2, 2);
        assert_eq!(cells, vec![(1.0, 1.5), (3.0, 1.5), (1.0, 0.5), (3.0, 0.5)]);
    }
}
