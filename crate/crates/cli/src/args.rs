use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cellcp", version, about = "Calibrated uncertainty maps for point-sampled network measurements")]
pub struct Cli {
    /// Seed for every random choice (splits, bootstraps, forests).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads: a positive integer or `auto`.
    #[arg(long, global = true, default_value = "auto")]
    pub threads: String,

    /// Use raw lon/lat degrees as planar coordinates instead of kilometres.
    #[arg(long, global = true)]
    pub raw_degrees: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a tile table, drop local outliers and write a normalized dataset.
    Ingest(IngestArgs),
    /// Choose (k, c) by cross-validation and write a params file.
    Tune(TuneArgs),
    /// Prediction intervals at the points of a lon,lat CSV.
    PredictMap(PredictMapArgs),
    /// Prediction intervals on a regular lon/lat grid.
    UncertaintyMap(UncertaintyMapArgs),
    /// Train/test comparison of split CP, EnbPI and ESCP.
    Evaluate(EvaluateArgs),
    /// Write a synthetic dataset with known ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    #[arg(long, default_value = "lon")]
    pub col_lon: String,
    #[arg(long, default_value = "lat")]
    pub col_lat: String,
    #[arg(long, default_value = "quadkey")]
    pub col_quadkey: String,
    #[arg(long, default_value = "score")]
    pub col_score: String,
    #[arg(long, default_value = "avg_d_kbps")]
    pub col_download: String,
    #[arg(long, default_value = "avg_u_kbps")]
    pub col_upload: String,
    #[arg(long, default_value = "tests")]
    pub col_tests: String,
    #[arg(long, default_value = "devices")]
    pub col_devices: String,
    /// Download weight in the default score.
    #[arg(long, default_value_t = 0.5)]
    pub download_weight: f64,
    /// Upload weight in the default score.
    #[arg(long, default_value_t = 0.5)]
    pub upload_weight: f64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub no_outlier_filter: bool,
    /// Neighbours used for the local mean and standard deviation.
    #[arg(long, default_value_t = 50)]
    pub neighbors: usize,
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    /// Also write the row indices of removed points.
    #[arg(long)]
    pub removed_out: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    pub k_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,1")]
    pub c_grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Bandwidth form: `squared` (c·R_k²) or `linear` (c·R_k).
    #[arg(long, default_value = "squared")]
    pub bandwidth: String,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Params file to write.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub kernel_cutoff: bool,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    /// Bootstrap regressors.
    #[arg(long = "B", default_value_t = 50)]
    pub bootstraps: usize,
    /// ESCP neighbourhood size; defaults to min(500, ⌈n/10⌉).
    #[arg(long = "K")]
    pub neighborhood: Option<usize>,
    /// Points drawn per bootstrap batch.
    #[arg(long = "s", default_value_t = 100)]
    pub batch: usize,
    #[arg(long, default_value = "qrf")]
    pub quantile_mode: String,
    #[arg(long, default_value = "full_neighborhood")]
    pub point_predictor: String,
    /// Calibration share of the training set for split CP.
    #[arg(long, default_value_t = 0.5)]
    pub holdout_frac: f64,
    #[arg(long, default_value_t = 100)]
    pub qrf_trees: usize,
    #[arg(long, default_value_t = 5)]
    pub qrf_min_leaf: usize,
    /// Training points used to fit each forest; defaults to min(10·K, n).
    #[arg(long)]
    pub qrf_training_radius: Option<usize>,
    /// Skip kernel weights below 1e-12 of the largest.
    #[arg(long)]
    pub kernel_cutoff: bool,
}

#[derive(Debug, Args)]
pub struct PredictMapArgs {
    /// Normalized dataset (ingest output).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    /// CSV with `lon,lat` columns.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "escp")]
    pub method: String,
    #[command(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Args)]
pub struct UncertaintyMapArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Cells along longitude and latitude.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    pub grid: Vec<usize>,
    /// `lon_min,lat_min,lon_max,lat_max`; defaults to the data extent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bbox: Option<Vec<f64>>,
    /// Cells farther than this from every training point are marked no-data.
    #[arg(long, default_value_t = 30.0)]
    pub max_extrapolation_km: f64,
    #[arg(long, default_value = "escp")]
    pub method: String,
    #[command(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Params file; without it (k, c) are tuned on the training part.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value = "split,enbpi,escp")]
    pub methods: String,
    /// Also write the table as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// `smooth`, `heteroscedastic` or `clustered`.
    #[arg(long, default_value = "heteroscedastic")]
    pub field: String,
    #[arg(long, default_value_t = 1.0)]
    pub noise_base: f64,
    #[arg(long, default_value_t = 4.0)]
    pub noise_ratio: f64,
    /// `normalized` (lon,lat,score,...) or `ookla` (quadkey tiles, no score).
    #[arg(long, default_value = "normalized")]
    pub format: String,
    /// Quadkey zoom level for `--format ookla`.
    #[arg(long, default_value_t = 16)]
    pub zoom: u32,
    #[arg(long)]
    pub output: PathBuf,
}
