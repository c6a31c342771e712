//! Scene-level commands behind the CLI: detection over a band stack,
//! annual severity mapping, simulation grids and map assessment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;

use crate::accuracy::{accuracy_csv, assess, AccuracyRow, StrataBounds};
use crate::breakdetect::{detect, CriticalValueTable, CritvalSpec};
use crate::error::{Error, Result};
use crate::gapfill::{fill_values, mask_missing_fraction, FillMethod};
use crate::model::DetectorConfig;
use crate::raster::{read_map, write_map, IndexKind, IndexStack, Plane, StackManifest};
use crate::severity::{
    area_summary_csv, break_to_year, pixel_records, record_for_year, summarize_year, AreaSummary,
    ChangeClass, SeverityRecord, NODATA_CODE,
};
use crate::simkit::{metrics_csv, run_grid, SimGrid, SimMetrics, SimScenario};

pub const BREAKS_CSV: &str = "breaks.csv";
pub const BREAKS_CSV_HEADER: &str =
    "pixel_id,row,col,status,significant,n_breaks,breakpoints,years,missing_fraction";

/// Run `f` on a dedicated pool; `None` or 0 threads means all cores.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Parse a JSON argument given either inline (`{...}`) or as a file path.
pub fn load_json_arg<T: DeserializeOwned>(arg: &str, what: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| Error::config(format!("{what}: {e}")))
    } else {
        let path = Path::new(arg);
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Detection outcome of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelBreaks {
    pub pixel_id: usize,
    pub row: usize,
    pub col: usize,
    pub missing_fraction: f64,
    /// `None` when the pixel could not be processed.
    pub result: Option<PixelResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelResult {
    pub significant: bool,
    pub breakpoints: Vec<usize>,
    pub years: Vec<i32>,
}

/// Run the detector on every pixel of an NDVI stack, in row-major order.
pub fn detect_stack(stack: &IndexStack, cfg: &DetectorConfig, fill: FillMethod) -> Vec<PixelBreaks> {
    let (w, h) = (stack.width, stack.height);
    (0..h)
        .into_par_iter()
        .flat_map_iter(|row| (0..w).map(move |col| (row, col)))
        .map(|(row, col)| detect_pixel(stack, row, col, cfg, fill))
        .collect()
}

fn detect_pixel(
    stack: &IndexStack,
    row: usize,
    col: usize,
    cfg: &DetectorConfig,
    fill: FillMethod,
) -> PixelBreaks {
    let pixel_id = row * stack.width + col;
    let mut out = PixelBreaks {
        pixel_id,
        row,
        col,
        missing_fraction: f64::NAN,
        result: None,
    };
    let series = match stack.extract_series(row, col) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("pixel {pixel_id} ({row}, {col}): {e}");
            return out;
        }
    };
    out.missing_fraction = mask_missing_fraction(series.mask());
    let detected = detect(&series, cfg, fill).and_then(|r| {
        let years = r
            .breakpoints
            .iter()
            .map(|&tau| break_to_year(tau, series.start_year()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PixelResult {
            significant: r.significant,
            breakpoints: r.breakpoints,
            years,
        })
    });
    match detected {
        Ok(r) => out.result = Some(r),
        Err(e) => log::warn!("pixel {pixel_id} ({row}, {col}) marked nodata: {e}"),
    }
    out
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

pub fn breaks_csv(pixels: &[PixelBreaks], cfg: &DetectorConfig, fill: FillMethod) -> String {
    let mut out = format!("# {}\n", crate::TOOL_VERSION);
    let _ = writeln!(
        out,
        "# h={} alpha={} fill={fill} harmonics={} max_breaks={} max_iterations={}",
        cfg.bandwidth_h, cfg.significance_alpha, cfg.harmonic_order, cfg.max_breaks, cfg.max_iterations
    );
    out.push_str(BREAKS_CSV_HEADER);
    out.push('\n');
    for p in pixels {
        let _ = match &p.result {
            Some(r) => writeln!(
                out,
                "{},{},{},ok,{},{},{},{},{:.6}",
                p.pixel_id,
                p.row,
                p.col,
                r.significant,
                r.breakpoints.len(),
                join(&r.breakpoints),
                join(&r.years),
                p.missing_fraction
            ),
            None => writeln!(
                out,
                "{},{},{},nodata,,,,,{:.6}",
                p.pixel_id, p.row, p.col, p.missing_fraction
            ),
        };
    }
    out
}

pub fn read_breaks_csv(path: &Path) -> Result<Vec<PixelBreaks>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != BREAKS_CSV_HEADER {
                return Err(Error::format(path, format!("unexpected header `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let bad = |m: String| Error::format(path, format!("line {}: {m}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
        let list = |s: &str| -> Result<Vec<usize>> {
            s.split(';').filter(|x| !x.is_empty()).map(int).collect()
        };
        let result = match f[3] {
            "ok" => Some(PixelResult {
                significant: f[4] == "true",
                breakpoints: list(f[6])?,
                years: f[7]
                    .split(';')
                    .filter(|x| !x.is_empty())
                    .map(|s| s.parse::<i32>().map_err(|e| bad(format!("`{s}`: {e}"))))
                    .collect::<Result<_>>()?,
            }),
            "nodata" => None,
            other => return Err(bad(format!("unknown status `{other}`"))),
        };
        rows.push(PixelBreaks {
            pixel_id: int(f[0])?,
            row: int(f[1])?,
            col: int(f[2])?,
            missing_fraction: f[8].parse().map_err(|e| bad(format!("`{}`: {e}", f[8])))?,
            result,
        });
    }
    if !seen_header {
        return Err(Error::format(path, "missing header"));
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub config: DetectorConfig,
    pub fill: FillMethod,
    pub threads: Option<usize>,
}

/// Writes `breaks.csv`, `break_year.f32` (NaN nodata, 0 no break, else year
/// of the first break) and `missing_fraction.f32`.
pub fn cmd_detect(opts: &DetectOptions) -> Result<Vec<PixelBreaks>> {
    let manifest = StackManifest::load(&opts.manifest)?;
    opts.config.validate(manifest.series_len())?;
    CriticalValueTable::builtin().lookup(opts.config.bandwidth_h, opts.config.significance_alpha)?;
    let stack = IndexStack::build(&manifest, IndexKind::Ndvi)?;
    let pixels = with_threads(opts.threads, || detect_stack(&stack, &opts.config, opts.fill))?;

    ensure_dir(&opts.out_dir)?;
    write_text(
        &opts.out_dir.join(BREAKS_CSV),
        &breaks_csv(&pixels, &opts.config, opts.fill),
    )?;
    let (w, h) = (manifest.width, manifest.height);
    let years = pixels
        .iter()
        .map(|p| match &p.result {
            None => f32::NAN,
            Some(r) => r.years.first().map_or(0.0, |&y| y as f32),
        })
        .collect();
    write_map(
        &Plane::new(w, h, years)?,
        &opts.out_dir,
        "break_year",
        "year of the first detected break; 0 = no break, NaN = nodata",
    )?;
    let missing = pixels.iter().map(|p| p.missing_fraction as f32).collect();
    write_map(
        &Plane::new(w, h, missing)?,
        &opts.out_dir,
        "missing_fraction",
        "fraction of missing NDVI samples per pixel",
    )?;
    let nodata = pixels.iter().filter(|p| p.result.is_none()).count();
    log::info!("detect: {} pixels, {nodata} nodata", pixels.len());
    Ok(pixels)
}

#[derive(Debug, Clone)]
pub struct MapOptions {
    pub manifest: PathBuf,
    /// Holds `breaks.csv` from `detect`; maps are written here too.
    pub out_dir: PathBuf,
    pub fill: FillMethod,
    pub threads: Option<usize>,
}

/// Severity records of one pixel; `None` when its NBR series is unusable.
fn pixel_severity(stack: &IndexStack, p: &PixelBreaks, fill: FillMethod) -> Option<Vec<SeverityRecord>> {
    let r = p.result.as_ref()?;
    if r.breakpoints.is_empty() {
        return Some(Vec::new());
    }
    let records = stack.extract_series(p.row, p.col).and_then(|s| {
        let (nbr, _) = fill_values(s.values(), s.mask(), fill)?;
        pixel_records(p.pixel_id, &nbr, &r.breakpoints, s.start_year())
    });
    match records {
        Ok(recs) => Some(recs),
        Err(e) => {
            log::warn!("pixel {} NBR unusable, marked nodata: {e}", p.pixel_id);
            None
        }
    }
}

pub const RECORDS_CSV_HEADER: &str = "pixel_id,break_index,year,dnbr,class,burned,clamped";

/// Writes per-year `severity_<year>.u8` (class codes, 0 nodata),
/// `burned_<year>.u8` (1 burned) planes, `severity_records.csv` and
/// `area_summary.csv`.
pub fn cmd_map(opts: &MapOptions) -> Result<Vec<AreaSummary>> {
    let breaks_path = opts.out_dir.join(BREAKS_CSV);
    if !breaks_path.exists() {
        return Err(Error::config(format!(
            "{} not found; run `detect` with the same --out-dir first",
            breaks_path.display()
        )));
    }
    let manifest = StackManifest::load(&opts.manifest)?;
    let pixels = read_breaks_csv(&breaks_path)?;
    let (w, h) = (manifest.width, manifest.height);
    if pixels.len() != w * h || pixels.iter().enumerate().any(|(i, p)| p.pixel_id != i) {
        return Err(Error::config(format!(
            "{} does not cover the {w}x{h} scene of {}",
            breaks_path.display(),
            opts.manifest.display()
        )));
    }
    let stack = IndexStack::build(&manifest, IndexKind::Nbr)?;
    let per_pixel: Vec<Option<Vec<SeverityRecord>>> = with_threads(opts.threads, || {
        pixels.par_iter().map(|p| pixel_severity(&stack, p, opts.fill)).collect()
    })?;
    let records: Vec<SeverityRecord> = per_pixel.iter().flatten().flatten().cloned().collect();

    let mut records_csv = format!("# {}\n{RECORDS_CSV_HEADER}\n", crate::TOOL_VERSION);
    for r in &records {
        let _ = writeln!(
            records_csv,
            "{},{},{},{:.6},{},{},{}",
            r.pixel_id, r.break_index, r.year, r.dnbr, r.class.code(), r.burned, r.clamped
        );
    }
    write_text(&opts.out_dir.join("severity_records.csv"), &records_csv)?;

    let start = manifest.start_year();
    let mut summaries = Vec::new();
    for year in start..start + manifest.n_years() as i32 {
        let mut classes = Vec::with_capacity(w * h);
        let mut burned = Vec::with_capacity(w * h);
        for (id, recs) in per_pixel.iter().enumerate() {
            let Some(recs) = recs else {
                classes.push(NODATA_CODE);
                burned.push(0u8);
                continue;
            };
            match record_for_year(recs, id, year) {
                Some(r) => {
                    classes.push(r.class.code());
                    burned.push(u8::from(r.burned));
                }
                None => {
                    classes.push(ChangeClass::Unburned.code());
                    burned.push(0);
                }
            }
        }
        write_map(
            &Plane::new(w, h, classes)?,
            &opts.out_dir,
            &format!("severity_{year}"),
            "change class: 0 nodata, 1 high regrowth, 2 low regrowth, 3 unburned, \
             4 low, 5 moderate, 6 high severity",
        )?;
        write_map(
            &Plane::new(w, h, burned)?,
            &opts.out_dir,
            &format!("burned_{year}"),
            "1 = burned (dNBR >= 0.1) in this year",
        )?;
        summaries.push(summarize_year(&records, year, manifest.pixel_area_ha)?);
    }
    write_text(&opts.out_dir.join("area_summary.csv"), &area_summary_csv(&summaries))?;
    Ok(summaries)
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    /// Grid as a JSON file path or inline JSON.
    pub grid: String,
    pub out_dir: PathBuf,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Runs the grid and writes `metrics.csv`.
pub fn cmd_simulate(opts: &SimulateOptions) -> Result<Vec<(SimScenario, SimMetrics)>> {
    let mut grid: SimGrid = load_json_arg(&opts.grid, "--grid")?;
    if let Some(r) = opts.replicates {
        grid.replicates = r;
    }
    if let Some(s) = opts.seed {
        grid.seed = s;
    }
    grid.scenarios()?;
    let rows = with_threads(opts.threads, || run_grid(&grid))??;
    ensure_dir(&opts.out_dir)?;
    write_text(&opts.out_dir.join("metrics.csv"), &metrics_csv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct CritvalOptions {
    pub spec: CritvalSpec,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

pub const CRITVALS_FILE: &str = "mosum_critvals.txt";

/// Regenerates the critical-value table into `<out_dir>/mosum_critvals.txt`.
pub fn cmd_critvals(opts: &CritvalOptions) -> Result<CriticalValueTable> {
    let table = with_threads(opts.threads, || CriticalValueTable::generate(&opts.spec))??;
    ensure_dir(&opts.out_dir)?;
    write_text(&opts.out_dir.join(CRITVALS_FILE), &table.to_text())?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct AssessOptions {
    pub pred: PathBuf,
    pub reference: PathBuf,
    pub missing: PathBuf,
    /// Bounds as a JSON file path or inline JSON; defaults apply when absent.
    pub strata: Option<String>,
    pub out_dir: PathBuf,
}

/// Writes `accuracy.csv`. The region is every pixel with a finite missing
/// fraction; any non-zero code in the pred/ref planes counts as burned.
pub fn cmd_assess(opts: &AssessOptions) -> Result<Vec<AccuracyRow>> {
    let pred = read_map::<u8>(&opts.pred)?;
    let reference = read_map::<u8>(&opts.reference)?;
    let missing = read_map::<f32>(&opts.missing)?;
    if !pred.same_shape(&reference) || !pred.same_shape(&missing) {
        return Err(Error::domain(format!(
            "plane shapes differ: pred {}x{}, ref {}x{}, missing {}x{}",
            pred.width(),
            pred.height(),
            reference.width(),
            reference.height(),
            missing.width(),
            missing.height()
        )));
    }
    let bounds: StrataBounds = match &opts.strata {
        Some(s) => load_json_arg(s, "--strata")?,
        None => StrataBounds::default(),
    };
    let burned = |p: &Plane<u8>| -> Vec<bool> { p.data().iter().map(|&v| v != 0).collect() };
    let frac: Vec<f64> = missing.data().iter().map(|&v| f64::from(v)).collect();
    let region: Vec<bool> = frac.iter().map(|v| v.is_finite()).collect();
    let rows = assess(&burned(&pred), &burned(&reference), &region, &frac, &bounds)?;
    ensure_dir(&opts.out_dir)?;
    write_text(&opts.out_dir.join("accuracy.csv"), &accuracy_csv(&rows))?;
    Ok(rows)
}
