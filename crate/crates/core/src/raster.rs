//! Flat binary planes with JSON sidecars, band-stack manifests and
//! per-pixel series extraction.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SampledSeries, CADENCE};
use crate::severity::DEFAULT_PIXEL_AREA_HA;

const DENOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

/// Sample type storable in a plane file.
pub trait PlaneSample: Copy + Default + PartialEq + std::fmt::Debug {
    const DTYPE: Dtype;
    const EXT: &'static str;
    const SIZE: usize;
    fn put(self, out: &mut Vec<u8>);
    fn get(bytes: &[u8]) -> Self;
}

impl PlaneSample for f32 {
    const DTYPE: Dtype = Dtype::F32;
    const EXT: &'static str = "f32";
    const SIZE: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte chunk"))
    }
}

impl PlaneSample for u8 {
    const DTYPE: Dtype = Dtype::U8;
    const EXT: &'static str = "u8";
    const SIZE: usize = 1;
    fn put(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn get(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

/// Row-major raster of `width * height` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: PlaneSample> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::domain(format!(
                "plane of {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        (row < self.height && col < self.width).then(|| self.data[row * self.width + col])
    }

    pub fn same_shape<U>(&self, other: &Plane<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * T::SIZE);
        for &v in &self.data {
            v.put(&mut out);
        }
        out
    }
}

/// Contents of a plane's `.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneMeta {
    pub width: usize,
    pub height: usize,
    pub dtype: Dtype,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tool_version: String,
}

pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

/// Write `<dir>/<name>.<f32|u8>` and its sidecar; returns the data path.
pub fn write_map<T: PlaneSample>(
    plane: &Plane<T>,
    dir: &Path,
    name: &str,
    description: &str,
) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.{}", T::EXT));
    fs::write(&path, plane.to_bytes()).map_err(|e| Error::io(&path, e))?;
    let meta = PlaneMeta {
        width: plane.width,
        height: plane.height,
        dtype: T::DTYPE,
        description: description.to_owned(),
        tool_version: crate::TOOL_VERSION.to_owned(),
    };
    let side = sidecar_path(&path);
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(path)
}

pub fn read_meta(data_path: &Path) -> Result<PlaneMeta> {
    let side = sidecar_path(data_path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))
}

/// Read a plane written by [`write_map`], checking dtype and size against
/// the sidecar.
pub fn read_map<T: PlaneSample>(data_path: &Path) -> Result<Plane<T>> {
    let meta = read_meta(data_path)?;
    if meta.dtype != T::DTYPE {
        return Err(Error::format(
            data_path,
            format!("expected dtype {:?}, sidecar says {:?}", T::DTYPE, meta.dtype),
        ));
    }
    read_raw(data_path, meta.width, meta.height)
}

/// Read a headerless plane of known shape.
pub fn read_raw<T: PlaneSample>(path: &Path, width: usize, height: usize) -> Result<Plane<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = width * height * T::SIZE;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("{} bytes, expected {expected} for {width}x{height}", bytes.len()),
        ));
    }
    let data = bytes.chunks_exact(T::SIZE).map(T::get).collect();
    Plane::new(width, height, data)
}

/// One composite date: reflectance planes for the three bands used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateEntry {
    pub year: i32,
    /// 16-day step within the year, 1..=23.
    pub step: usize,
    pub red: PathBuf,
    pub nir: PathBuf,
    pub swir2: PathBuf,
}

/// JSON description of a band stack. Relative band paths resolve against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_pixel_area")]
    pub pixel_area_ha: f64,
    /// First year of the time grid; defaults to the first date's year.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_year: Option<i32>,
    /// Years on the time grid; defaults to span of the listed dates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_years: Option<usize>,
    pub dates: Vec<DateEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_pixel_area() -> f64 {
    DEFAULT_PIXEL_AREA_HA
}

impl StackManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: StackManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| match e {
            Error::Config(msg) | Error::Domain(msg) => Error::format(path, msg),
            other => other,
        })?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("manifest width and height must be positive"));
        }
        if !(self.pixel_area_ha > 0.0 && self.pixel_area_ha.is_finite()) {
            return Err(Error::config("pixel_area_ha must be positive"));
        }
        if self.dates.is_empty() {
            return Err(Error::config("manifest lists no dates"));
        }
        for d in &self.dates {
            if !(1..=CADENCE).contains(&d.step) {
                return Err(Error::config(format!(
                    "date {}/{}: step outside 1..={CADENCE}",
                    d.year, d.step
                )));
            }
        }
        for pair in self.dates.windows(2) {
            if (pair[0].year, pair[0].step) >= (pair[1].year, pair[1].step) {
                return Err(Error::config(format!(
                    "dates not strictly increasing at {}/{}",
                    pair[1].year, pair[1].step
                )));
            }
        }
        let start = self.start_year();
        let last = self.dates.last().expect("non-empty").year;
        if self.dates[0].year < start || last >= start + self.n_years() as i32 {
            return Err(Error::config(format!(
                "dates {}..{last} fall outside the grid {start}..{}",
                self.dates[0].year,
                start + self.n_years() as i32 - 1
            )));
        }
        Ok(())
    }

    pub fn start_year(&self) -> i32 {
        self.start_year.unwrap_or_else(|| self.dates.first().map_or(0, |d| d.year))
    }

    pub fn n_years(&self) -> usize {
        self.n_years.unwrap_or_else(|| {
            let last = self.dates.last().map_or(0, |d| d.year);
            (last - self.start_year() + 1).max(0) as usize
        })
    }

    /// Length of the full 16-day grid.
    pub fn series_len(&self) -> usize {
        self.n_years() * CADENCE
    }

    /// 0-based position of a date on the grid.
    pub fn grid_index(&self, year: i32, step: usize) -> usize {
        (year - self.start_year()) as usize * CADENCE + step - 1
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Ndvi,
    Nbr,
}

/// Normalized difference of two reflectance planes.
///
/// NDVI takes `(red, nir)` and NBR takes `(nir, swir2)`. A NaN input or a
/// near-zero denominator yields NaN.
pub fn compute_index(a: &Plane<f32>, b: &Plane<f32>, kind: IndexKind) -> Result<Plane<f32>> {
    if !a.same_shape(b) {
        return Err(Error::domain(format!(
            "band planes differ in shape: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let (x, y) = (f64::from(x), f64::from(y));
            let (num, den) = match kind {
                IndexKind::Ndvi => (y - x, y + x),
                IndexKind::Nbr => (x - y, x + y),
            };
            if x.is_nan() || y.is_nan() || den.abs() < DENOM_EPS {
                f32::NAN
            } else {
                (num / den) as f32
            }
        })
        .collect();
    Plane::new(a.width, a.height, data)
}

/// Index values on the full time grid, laid out `[date][row][col]`;
/// absent dates are all-NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexStack {
    pub width: usize,
    pub height: usize,
    pub start_year: i32,
    n_dates: usize,
    values: Vec<f32>,
}

impl IndexStack {
    pub fn empty(width: usize, height: usize, n_dates: usize, start_year: i32) -> Self {
        Self {
            width,
            height,
            start_year,
            n_dates,
            values: vec![f32::NAN; width * height * n_dates],
        }
    }

    pub fn build(manifest: &StackManifest, kind: IndexKind) -> Result<Self> {
        let (w, h) = (manifest.width, manifest.height);
        let mut stack = Self::empty(w, h, manifest.series_len(), manifest.start_year());
        for d in &manifest.dates {
            let load = |p: &Path| read_raw::<f32>(&manifest.resolve(p), w, h);
            let plane = match kind {
                IndexKind::Ndvi => compute_index(&load(&d.red)?, &load(&d.nir)?, kind)?,
                IndexKind::Nbr => compute_index(&load(&d.nir)?, &load(&d.swir2)?, kind)?,
            };
            stack.set_date(manifest.grid_index(d.year, d.step), &plane)?;
        }
        Ok(stack)
    }

    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    pub fn set_date(&mut self, date: usize, plane: &Plane<f32>) -> Result<()> {
        if plane.width != self.width || plane.height != self.height || date >= self.n_dates {
            return Err(Error::domain(format!("date {date} / plane shape do not fit the stack")));
        }
        let len = self.width * self.height;
        self.values[date * len..(date + 1) * len].copy_from_slice(&plane.data);
        Ok(())
    }

    pub fn value(&self, date: usize, row: usize, col: usize) -> f32 {
        self.values[(date * self.height + row) * self.width + col]
    }

    /// Series of one pixel; NaN samples are masked.
    pub fn extract_series(&self, row: usize, col: usize) -> Result<SampledSeries> {
        if row >= self.height || col >= self.width {
            return Err(Error::domain(format!(
                "pixel ({row}, {col}) outside {}x{}",
                self.width, self.height
            )));
        }
        let values: Vec<f64> = (0..self.n_dates)
            .map(|d| f64::from(self.value(d, row, col)))
            .collect();
        let mask = values.iter().map(|v| !v.is_nan()).collect();
        SampledSeries::new(values, mask, self.start_year)
    }
}
