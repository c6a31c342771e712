//! dNBR at detected breaks, severity classes and annual area summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::CADENCE;

/// Hectares covered by one 30 m pixel.
pub const DEFAULT_PIXEL_AREA_HA: f64 = 0.09;

/// Lower-closed class boundaries, ascending.
const BOUNDS: [f64; 5] = [-0.25, -0.1, 0.1, 0.27, 0.66];

/// Vegetation change type of one dNBR value. The discriminant is the code
/// written to class planes; 0 is reserved for nodata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ChangeClass {
    RegrowthHigh = 1,
    RegrowthLow = 2,
    Unburned = 3,
    LowSeverity = 4,
    ModerateSeverity = 5,
    HighSeverity = 6,
}

pub const NODATA_CODE: u8 = 0;

impl ChangeClass {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        use ChangeClass::*;
        [RegrowthHigh, RegrowthLow, Unburned, LowSeverity, ModerateSeverity, HighSeverity]
            .into_iter()
            .find(|c| c.code() == code)
    }

    pub fn is_burned(self) -> bool {
        matches!(
            self,
            ChangeClass::LowSeverity | ChangeClass::ModerateSeverity | ChangeClass::HighSeverity
        )
    }
}

/// Class of a dNBR value. Every interval is closed below and open above.
pub fn classify_dnbr(dnbr: f64) -> Result<ChangeClass> {
    if !dnbr.is_finite() {
        return Err(Error::domain(format!("dNBR must be finite, got {dnbr}")));
    }
    use ChangeClass::*;
    let classes = [RegrowthHigh, RegrowthLow, Unburned, LowSeverity, ModerateSeverity, HighSeverity];
    let idx = BOUNDS.iter().take_while(|&&b| dnbr >= b).count();
    Ok(classes[idx])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dnbr {
    pub value: f64,
    /// One of the two sample indices fell outside the series and was clamped.
    pub clamped: bool,
}

/// `NBR[τ - 23] - NBR[τ + 1]` on a complete series (`nbr[i]` is `t = i + 1`).
/// Indices before the start use `t = 1`, past the end `t = n`.
pub fn dnbr_at_break(nbr: &[f64], tau: usize) -> Result<Dnbr> {
    let n = nbr.len();
    if tau == 0 || tau > n {
        return Err(Error::domain(format!("break index {tau} outside 1..={n}")));
    }
    let pre = if tau > CADENCE { tau - CADENCE } else { 1 };
    let post = (tau + 1).min(n);
    let clamped = tau <= CADENCE || tau + 1 > n;
    Ok(Dnbr {
        value: nbr[pre - 1] - nbr[post - 1],
        clamped,
    })
}

/// Calendar year of 1-based index `tau`.
pub fn break_to_year(tau: usize, start_year: i32) -> Result<i32> {
    if tau == 0 {
        return Err(Error::domain("break index must be >= 1"));
    }
    Ok(start_year + ((tau - 1) / CADENCE) as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeverityRecord {
    pub pixel_id: usize,
    pub break_index: usize,
    pub year: i32,
    pub dnbr: f64,
    pub class: ChangeClass,
    pub burned: bool,
    pub clamped: bool,
}

impl SeverityRecord {
    pub fn new(pixel_id: usize, nbr: &[f64], tau: usize, start_year: i32) -> Result<Self> {
        let d = dnbr_at_break(nbr, tau)?;
        let class = classify_dnbr(d.value)?;
        Ok(Self {
            pixel_id,
            break_index: tau,
            year: break_to_year(tau, start_year)?,
            dnbr: d.value,
            class,
            burned: class.is_burned(),
            clamped: d.clamped,
        })
    }
}

/// One record per breakpoint of a pixel.
pub fn pixel_records(
    pixel_id: usize,
    nbr: &[f64],
    breakpoints: &[usize],
    start_year: i32,
) -> Result<Vec<SeverityRecord>> {
    breakpoints
        .iter()
        .map(|&tau| SeverityRecord::new(pixel_id, nbr, tau, start_year))
        .collect()
}

/// The record that represents `pixel_id`'s change in `year`: the largest
/// `|dnbr|` among that pixel's breaks dated to the year (earliest break on ties).
pub fn record_for_year(
    records: &[SeverityRecord],
    pixel_id: usize,
    year: i32,
) -> Option<&SeverityRecord> {
    records
        .iter()
        .filter(|r| r.pixel_id == pixel_id && r.year == year)
        .fold(None, |best: Option<&SeverityRecord>, r| match best {
            Some(b) if b.dnbr.abs() >= r.dnbr.abs() => Some(b),
            _ => Some(r),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaSummary {
    pub year: i32,
    pub total_burned_ha: f64,
    pub frac_low: f64,
    pub frac_moderate: f64,
    pub frac_high: f64,
    pub burned_pixels: u64,
    /// At least one break was dated to this year.
    pub detected: bool,
}

/// Burned area and severity mix for `year`. Each pixel contributes at most
/// once, through [`record_for_year`].
pub fn summarize_year(records: &[SeverityRecord], year: i32, pixel_area_ha: f64) -> Result<AreaSummary> {
    if !(pixel_area_ha > 0.0 && pixel_area_ha.is_finite()) {
        return Err(Error::domain(format!("pixel area must be positive, got {pixel_area_ha}")));
    }
    let mut per_pixel: BTreeMap<usize, &SeverityRecord> = BTreeMap::new();
    for r in records.iter().filter(|r| r.year == year) {
        per_pixel
            .entry(r.pixel_id)
            .and_modify(|b| {
                if r.dnbr.abs() > b.dnbr.abs() {
                    *b = r;
                }
            })
            .or_insert(r);
    }
    let mut counts = [0u64; 3];
    for r in per_pixel.values().filter(|r| r.burned) {
        match r.class {
            ChangeClass::LowSeverity => counts[0] += 1,
            ChangeClass::ModerateSeverity => counts[1] += 1,
            _ => counts[2] += 1,
        }
    }
    Ok(summary_from_counts(year, counts, !per_pixel.is_empty(), pixel_area_ha))
}

/// Build a summary from burned-pixel counts `[low, moderate, high]`.
pub fn summary_from_counts(year: i32, counts: [u64; 3], detected: bool, pixel_area_ha: f64) -> AreaSummary {
    let burned: u64 = counts.iter().sum();
    let frac = |c: u64| if burned == 0 { 0.0 } else { c as f64 / burned as f64 };
    AreaSummary {
        year,
        total_burned_ha: burned as f64 * pixel_area_ha,
        frac_low: frac(counts[0]),
        frac_moderate: frac(counts[1]),
        frac_high: frac(counts[2]),
        burned_pixels: burned,
        detected,
    }
}

pub const AREA_CSV_HEADER: &str = "year,total_burned_ha,frac_low,frac_moderate,frac_high,detected";

pub fn area_summary_csv(rows: &[AreaSummary]) -> String {
    let mut out = format!("# {}\n{AREA_CSV_HEADER}\n", crate::TOOL_VERSION);
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            r.year, r.total_burned_ha, r.frac_low, r.frac_moderate, r.frac_high, r.detected
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ChangeClass::*;

    fn next_down(x: f64) -> f64 {
        f64::from_bits(if x > 0.0 { x.to_bits() - 1 } else { x.to_bits() + 1 })
    }

    #[test]
    fn class_boundaries() {
        let cases = [
            (-0.25, RegrowthHigh, RegrowthLow),
            (-0.1, RegrowthLow, Unburned),
            (0.1, Unburned, LowSeverity),
            (0.27, LowSeverity, ModerateSeverity),
            (0.66, ModerateSeverity, HighSeverity),
        ];
        for (b, below, at) in cases {
            assert_eq!(classify_dnbr(next_down(b)).unwrap(), below, "below {b}");
            assert_eq!(classify_dnbr(b).unwrap(), at, "at {b}");
        }
        assert_eq!(classify_dnbr(0.3).unwrap(), ModerateSeverity);
        assert_eq!(classify_dnbr(-0.3).unwrap(), RegrowthHigh);
        assert_eq!(classify_dnbr(0.1).unwrap(), LowSeverity);
        assert_eq!(classify_dnbr(5.0).unwrap(), HighSeverity);
        assert!(classify_dnbr(f64::NAN).is_err());
        assert!(classify_dnbr(f64::INFINITY).is_err());
    }

    #[test]
    fn codes_round_trip() {
        for code in 1..=6 {
            assert_eq!(ChangeClass::from_code(code).unwrap().code(), code);
        }
        assert!(ChangeClass::from_code(NODATA_CODE).is_none());
        assert!(ChangeClass::from_code(7).is_none());
    }

    #[test]
    fn dnbr_direct_and_clamped() {
        let mut nbr = vec![0.3; 322];
        nbr[161 - 23 - 1] = 0.5;
        nbr[162 - 1] = 0.1;
        let d = dnbr_at_break(&nbr, 161).unwrap();
        assert!((d.value - 0.4).abs() < 1e-12);
        assert!(!d.clamped);

        let ramp: Vec<f64> = (1..=322).map(|t| t as f64 / 1000.0).collect();
        let d = dnbr_at_break(&ramp, 10).unwrap();
        assert!(d.clamped);
        assert_eq!(d.value, ramp[0] - ramp[10]);
        let d = dnbr_at_break(&ramp, 322).unwrap();
        assert!(d.clamped);
        assert_eq!(d.value, ramp[322 - 23 - 1] - ramp[321]);

        assert_eq!(dnbr_at_break(&vec![0.2; 50], 30).unwrap().value, 0.0);
        assert!(dnbr_at_break(&nbr, 0).is_err());
        assert!(dnbr_at_break(&nbr, 323).is_err());
    }

    #[test]
    fn dnbr_antisymmetric() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let tau = 50;
        let mut b = a.clone();
        b.swap(tau - 23 - 1, tau);
        let da = dnbr_at_break(&a, tau).unwrap().value;
        let db = dnbr_at_break(&b, tau).unwrap().value;
        assert_eq!(da, -db);
    }

    #[test]
    fn years() {
        assert_eq!(break_to_year(1, 2003).unwrap(), 2003);
        assert_eq!(break_to_year(23, 2003).unwrap(), 2003);
        assert_eq!(break_to_year(24, 2003).unwrap(), 2004);
        assert_eq!(break_to_year(161, 2003).unwrap(), 2009);
        assert!(break_to_year(0, 2003).is_err());
    }

    fn rec(pixel_id: usize, year: i32, dnbr: f64) -> SeverityRecord {
        let class = classify_dnbr(dnbr).unwrap();
        SeverityRecord {
            pixel_id,
            break_index: 1,
            year,
            dnbr,
            class,
            burned: class.is_burned(),
            clamped: false,
        }
    }

    #[test]
    fn area_arithmetic() {
        let s = summary_from_counts(2005, [39_436, 0, 0], true, DEFAULT_PIXEL_AREA_HA);
        assert_eq!(format!("{:.6}", s.total_burned_ha), "3549.240000");
        assert!((s.total_burned_ha - 3549.24).abs() < 1e-9);

        let recs = vec![rec(0, 2009, 0.2), rec(1, 2009, 0.15), rec(2, 2009, 0.4), rec(3, 2009, 0.8)];
        let s = summarize_year(&recs, 2009, 0.09).unwrap();
        assert!((s.total_burned_ha - 0.36).abs() < 1e-12);
        assert_eq!((s.frac_low, s.frac_moderate, s.frac_high), (0.5, 0.25, 0.25));

        let s = summarize_year(&recs, 2010, 0.09).unwrap();
        assert_eq!(s.total_burned_ha, 0.0);
        assert!(!s.detected);
        assert!(summarize_year(&recs, 2009, 0.0).is_err());
    }

    #[test]
    fn strongest_record_wins_within_a_year() {
        let recs = vec![rec(7, 2009, 0.15), rec(7, 2009, -0.5), rec(7, 2010, 0.7)];
        assert_eq!(record_for_year(&recs, 7, 2009).unwrap().dnbr, -0.5);
        let s = summarize_year(&recs, 2009, 0.09).unwrap();
        assert_eq!(s.burned_pixels, 0);
        assert!(s.detected);
        assert_eq!(summarize_year(&recs, 2010, 0.09).unwrap().frac_high, 1.0);
    }

    #[test]
    fn totals_are_additive() {
        let a = vec![rec(0, 2009, 0.2), rec(1, 2009, 0.9)];
        let b = vec![rec(2, 2009, 0.3), rec(3, 2009, 0.05)];
        let all: Vec<_> = a.iter().chain(&b).cloned().collect();
        let (sa, sb, s) = (
            summarize_year(&a, 2009, 0.09).unwrap(),
            summarize_year(&b, 2009, 0.09).unwrap(),
            summarize_year(&all, 2009, 0.09).unwrap(),
        );
        assert_eq!(sa.burned_pixels + sb.burned_pixels, s.burned_pixels);
        assert!((sa.total_burned_ha + sb.total_burned_ha - s.total_burned_ha).abs() < 1e-12);
        let sum = s.frac_low + s.frac_moderate + s.frac_high;
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let csv = area_summary_csv(&[summary_from_counts(2009, [10, 0, 0], true, 0.09)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# burnscan"));
        assert_eq!(lines[1], AREA_CSV_HEADER);
        assert_eq!(lines[2], "2009,0.900000,1.000000,0.000000,0.000000,true");
    }
}
