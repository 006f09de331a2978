//! Embedded characteristics of candidate rare-earth systems: quadrupole
//! splittings and population/coherence lifetimes for Eu³⁺ and Pr³⁺ in
//! Y₂SiO₅, plus partial records for Er³⁺:CaWO₄, ¹⁶⁷Er³⁺:Y₂SiO₅ and
//! Dy³⁺:SrY₂O₄. Values are stored exactly as printed in the source
//! literature (the `text` field) together with parsed SI accessors; a golden
//! CSV shipped under `data/` is regenerated from the embedded table by a
//! checksum test.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::protocols::{validate_timescales, ConstraintCheck, TimescaleBudget, TimescaleReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Exact,
    /// Printed as a "greater than" bound; feasibility treats it as an exact
    /// minimum.
    LowerBound,
    /// Printed as approximate.
    Approximate,
}

impl Bound {
    fn label(self) -> &'static str {
        match self {
            Bound::Exact => "exact",
            Bound::LowerBound => "lower-bound",
            Bound::Approximate => "approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Us,
    Ms,
    S,
    Hour,
    Day,
}

impl TimeUnit {
    fn seconds(self) -> f64 {
        match self {
            TimeUnit::Us => 1e-6,
            TimeUnit::Ms => 1e-3,
            TimeUnit::S => 1.0,
            TimeUnit::Hour => 3600.0,
            TimeUnit::Day => 86400.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            TimeUnit::Us => "us",
            TimeUnit::Ms => "ms",
            TimeUnit::S => "s",
            TimeUnit::Hour => "h",
            TimeUnit::Day => "day",
        }
    }
}

/// One quadrupole splitting as printed (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    pub text: String,
    pub mhz: f64,
    pub source: String,
}

/// One lifetime/coherence entry as printed, with its field condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDatum {
    pub text: String,
    pub value: f64,
    pub unit: TimeUnit,
    /// Magnetic field in mT; `None` when the source does not state one.
    pub b_mt: Option<f64>,
    pub bound: Bound,
    pub source: String,
}

impl TimeDatum {
    pub fn seconds(&self) -> f64 {
        self.value * self.unit.seconds()
    }

    pub fn b_tesla(&self) -> Option<f64> {
        self.b_mt.map(|b| b * 1e-3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRecord {
    pub ion: String,
    pub isotope: Option<u32>,
    /// Crystallographic site ("1"/"2") or "-" for narrative records.
    pub site: String,
    pub host: String,
    pub ground_level: String,
    pub excited_level: String,
    pub ground_splittings: Vec<Splitting>,
    pub excited_splittings: Vec<Splitting>,
    pub t1_opt: Option<TimeDatum>,
    pub t2_opt: Vec<TimeDatum>,
    pub t1_hf: Option<TimeDatum>,
    pub t2_hf: Vec<TimeDatum>,
    pub note: String,
}

impl MaterialRecord {
    pub fn key(&self) -> String {
        match self.isotope {
            Some(i) => format!("{}-{} site {} in {}", self.ion, i, self.site, self.host),
            None => format!("{} site {} in {}", self.ion, self.site, self.host),
        }
    }

    pub fn min_ground_splitting_mhz(&self) -> Option<f64> {
        self.ground_splittings
            .iter()
            .map(|s| s.mhz)
            .min_by(|a, b| a.total_cmp(b))
    }
}

fn sp(text: &str, source: &str) -> Splitting {
    Splitting { text: text.into(), mhz: text.parse().expect("splitting literal"), source: source.into() }
}

fn td(text: &str, unit: TimeUnit, b_mt: Option<f64>, bound: Bound, source: &str) -> TimeDatum {
    TimeDatum {
        text: text.into(),
        value: text.parse().expect("time literal"),
        unit,
        b_mt,
        bound,
        source: source.into(),
    }
}

fn build_records() -> Vec<MaterialRecord> {
    let konz = "2003-Konz-PRB";
    let yano = "1984-Yano-OptLett";
    let equall94 = "1994-Equall-PRL";
    let equall95 = "1995-Equall-PRB";
    let nilsson = "Nilsson2004";
    let zhong = "2015-Zhong-Nature";
    let ham = "Ham1997";
    let heinze = "2013-Heinze-PRL";
    let xiao = "Xiao2020";

    let eu = |isotope: u32,
              site: &str,
              g: [Splitting; 2],
              e: [Splitting; 2],
              t1o: TimeDatum,
              t2o: Vec<TimeDatum>,
              t2hf: Vec<TimeDatum>| MaterialRecord {
        ion: "Eu".into(),
        isotope: Some(isotope),
        site: site.into(),
        host: "Y2SiO5".into(),
        ground_level: "7F0".into(),
        excited_level: "5D0".into(),
        ground_splittings: g.into(),
        excited_splittings: e.into(),
        t1_opt: Some(t1o),
        t2_opt: t2o,
        t1_hf: Some(td("20", TimeUnit::Day, None, Bound::LowerBound, konz)),
        t2_hf: t2hf,
        note: String::new(),
    };

    let eu_s1_t2o = vec![
        td("1.5", TimeUnit::Ms, Some(0.0), Bound::Exact, equall94),
        td("2.6", TimeUnit::Ms, Some(10.0), Bound::Exact, equall94),
    ];
    let eu_s2_t2o = vec![
        td("1.1", TimeUnit::Ms, Some(0.0), Bound::Exact, equall94),
        td("1.9", TimeUnit::Ms, Some(10.0), Bound::Exact, equall94),
    ];

    let pr = |site: &str,
              g: [Splitting; 2],
              e: [Splitting; 2],
              t1o: TimeDatum,
              t2o: Vec<TimeDatum>,
              t2hf: Vec<TimeDatum>| MaterialRecord {
        ion: "Pr".into(),
        isotope: None,
        site: site.into(),
        host: "Y2SiO5".into(),
        ground_level: "3H4".into(),
        excited_level: "1D2".into(),
        ground_splittings: g.into(),
        excited_splittings: e.into(),
        t1_opt: Some(t1o),
        t2_opt: t2o,
        t1_hf: Some(td("100", TimeUnit::S, None, Bound::Approximate, nilsson)),
        t2_hf: t2hf,
        note: String::new(),
    };

    vec![
        eu(
            151,
            "1",
            [sp("34.533", konz), sp("46.175", konz)],
            [sp("75", yano), sp("102", yano)],
            td("1.9", TimeUnit::Ms, None, Bound::Exact, equall94),
            eu_s1_t2o.clone(),
            vec![td("6", TimeUnit::Hour, Some(1370.0), Bound::Exact, zhong)],
        ),
        eu(
            153,
            "1",
            [sp("90.0", yano), sp("119.2", yano)],
            [sp("191", yano), sp("260", yano)],
            td("1.9", TimeUnit::Ms, None, Bound::Exact, equall94),
            eu_s1_t2o,
            vec![],
        ),
        eu(
            151,
            "2",
            [sp("29.527", konz), sp("57.254", konz)],
            [sp("63", yano), sp("108", yano)],
            td("1.6", TimeUnit::Ms, None, Bound::Exact, equall94),
            eu_s2_t2o.clone(),
            vec![],
        ),
        eu(
            153,
            "2",
            [sp("76.4", yano), sp("148.1", yano)],
            [sp("160", yano), sp("274", yano)],
            td("1.6", TimeUnit::Ms, None, Bound::Exact, equall94),
            eu_s2_t2o,
            vec![],
        ),
        pr(
            "1",
            [sp("17.3", equall95), sp("10.19", equall95)],
            [sp("4.84", equall95), sp("4.59", equall95)],
            td("164", TimeUnit::Us, None, Bound::Exact, equall95),
            vec![td("152", TimeUnit::Us, Some(7.7), Bound::Exact, equall95)],
            vec![
                td("0.5", TimeUnit::Ms, Some(0.0), Bound::Exact, ham),
                td("42", TimeUnit::S, Some(80.0), Bound::Exact, heinze),
            ],
        ),
        pr(
            "2",
            [sp("4.93", equall95), sp("3.78", equall95)],
            [sp("2.29", equall95), sp("2.29", equall95)],
            td("222", TimeUnit::Us, None, Bound::Exact, equall95),
            vec![td("377", TimeUnit::Us, Some(7.7), Bound::Exact, equall95)],
            vec![td("2.6", TimeUnit::Ms, Some(0.0), Bound::Exact, xiao)],
        ),
        MaterialRecord {
            ion: "Er".into(),
            isotope: None,
            site: "-".into(),
            host: "CaWO4".into(),
            ground_level: "-".into(),
            excited_level: "-".into(),
            ground_splittings: vec![],
            excited_splittings: vec![],
            t1_opt: None,
            t2_opt: vec![],
            t1_hf: None,
            t2_hf: vec![td("23", TimeUnit::Ms, None, Bound::Exact, "2021-SciAdv-23ms")],
            note: "electron spin coherence below 50 mK; ~100% polarization with the \
                   doublet split by ~8 GHz"
                .into(),
        },
        MaterialRecord {
            ion: "Er".into(),
            isotope: Some(167),
            site: "-".into(),
            host: "Y2SiO5".into(),
            ground_level: "-".into(),
            excited_level: "-".into(),
            ground_splittings: vec![],
            excited_splittings: vec![],
            t1_opt: None,
            t2_opt: vec![td("1.35", TimeUnit::Ms, Some(3000.0), Bound::Exact, "Rancic2017")],
            t1_hf: None,
            t2_hf: vec![td("1.3", TimeUnit::S, Some(3000.0), Bound::Exact, "Rancic2017")],
            note: "hyperfine coherence in a strong field (B > 3 T); needs prior \
                   tailoring of the absorption spectrum"
                .into(),
        },
        MaterialRecord {
            ion: "Dy".into(),
            isotope: None,
            site: "-".into(),
            host: "SrY2O4".into(),
            ground_level: "-".into(),
            excited_level: "-".into(),
            ground_splittings: vec![],
            excited_splittings: vec![],
            t1_opt: None,
            t2_opt: vec![],
            t1_hf: Some(td("1400", TimeUnit::S, None, Bound::Approximate, "2024-Malkin-PhysRevB")),
            t2_hf: vec![],
            note: "ground-doublet electron spin magnetization lifetime at 2 K; \
                   coherence times not yet measured"
                .into(),
        },
    ]
}

pub fn records() -> &'static [MaterialRecord] {
    static TABLE: OnceLock<Vec<MaterialRecord>> = OnceLock::new();
    TABLE.get_or_init(build_records)
}

/// Exact-match lookup by ion, isotope and site.
pub fn lookup(ion: &str, isotope: Option<u32>, site: &str) -> Result<&'static MaterialRecord> {
    records()
        .iter()
        .find(|r| r.ion.eq_ignore_ascii_case(ion) && r.isotope == isotope && r.site == site)
        .ok_or_else(|| {
            Error::NotFound(format!(
                "no material record for ion {ion}, isotope {}, site {site}",
                isotope.map(|i| i.to_string()).unwrap_or_else(|| "-".into())
            ))
        })
}

/// Values chosen from a record at the requested field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenValues {
    pub t2_opt_s: Option<f64>,
    pub t2_spin_s: Option<f64>,
    pub t1_opt_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub material: String,
    pub b_choice_t: f64,
    pub chosen: ChosenValues,
    pub timescales: TimescaleReport,
    pub bandwidth: Option<ConstraintCheck>,
}

impl FeasibilityReport {
    pub fn all_pass(&self) -> bool {
        self.timescales.all_pass() && self.bandwidth.as_ref().map_or(true, |c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&ConstraintCheck> {
        self.timescales
            .first_failure()
            .or_else(|| self.bandwidth.as_ref().filter(|c| !c.pass))
    }
}

/// Pick the datum whose stated field is nearest to `b_choice` (ties toward
/// lower field; entries without a stated field match any request).
fn nearest_b(data: &[TimeDatum], b_choice_t: f64) -> Option<&TimeDatum> {
    data.iter().min_by(|a, b| {
        let da = a.b_tesla().map_or(0.0, |x| (x - b_choice_t).abs());
        let db = b.b_tesla().map_or(0.0, |x| (x - b_choice_t).abs());
        da.total_cmp(&db)
            .then_with(|| a.b_tesla().unwrap_or(0.0).total_cmp(&b.b_tesla().unwrap_or(0.0)))
    })
}

/// Fill the budget's material-derived entries from the record at the nearest
/// listed magnetic field, run the timescale checks (margin 10) and the
/// signal-bandwidth check against the smallest ground-doublet splitting.
pub fn feasibility(
    record: &MaterialRecord,
    budget: &TimescaleBudget,
    b_choice_t: f64,
) -> Result<FeasibilityReport> {
    let t2_opt = nearest_b(&record.t2_opt, b_choice_t);
    let t2_spin = nearest_b(&record.t2_hf, b_choice_t);
    if t2_opt.is_none() && t2_spin.is_none() {
        return Err(Error::InsufficientData(format!(
            "record {} lists no coherence data to check against",
            record.key()
        )));
    }
    let mut filled = *budget;
    filled.t2_opt = t2_opt.map(|d| d.seconds()).or(budget.t2_opt);
    filled.t2_spin = t2_spin.map(|d| d.seconds()).or(budget.t2_spin);
    filled.t1_opt = record.t1_opt.as_ref().map(|d| d.seconds()).or(budget.t1_opt);

    let timescales = validate_timescales(&filled, 10.0);
    let bandwidth = match (budget.dt_s, record.min_ground_splitting_mhz()) {
        (Some(dt_s), Some(split_mhz)) => {
            let bw_hz = 1.0 / dt_s;
            let limit_hz = split_mhz * 1e6;
            Some(ConstraintCheck {
                name: "signal bandwidth <= smallest ground splitting".into(),
                pass: bw_hz <= limit_hz,
                lhs: bw_hz,
                relation: "<=".into(),
                rhs: limit_hz,
            })
        }
        _ => None,
    };

    Ok(FeasibilityReport {
        material: record.key(),
        b_choice_t,
        chosen: ChosenValues {
            t2_opt_s: t2_opt.map(|d| d.seconds()),
            t2_spin_s: t2_spin.map(|d| d.seconds()),
            t1_opt_s: record.t1_opt.as_ref().map(|d| d.seconds()),
        },
        timescales,
        bandwidth,
    })
}

/// Long-format CSV of every embedded datum, values exactly as printed.
pub fn golden_csv() -> String {
    let mut out = String::from("ion,isotope,site,host,kind,value,unit,b_mt,bound,source\n");
    let fmt_b = |b: Option<f64>| b.map(|v| format!("{v}")).unwrap_or_default();
    for r in records() {
        let iso = r.isotope.map(|i| i.to_string()).unwrap_or_default();
        let mut row = |kind: &str, value: &str, unit: &str, b: String, bound: &str, src: &str| {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.ion, iso, r.site, r.host, kind, value, unit, b, bound, src
            ));
        };
        for s in &r.ground_splittings {
            row("ground_splitting", &s.text, "MHz", String::new(), "exact", &s.source);
        }
        for s in &r.excited_splittings {
            row("excited_splitting", &s.text, "MHz", String::new(), "exact", &s.source);
        }
        if let Some(d) = &r.t1_opt {
            row("t1_opt", &d.text, d.unit.label(), fmt_b(d.b_mt), d.bound.label(), &d.source);
        }
        for d in &r.t2_opt {
            row("t2_opt", &d.text, d.unit.label(), fmt_b(d.b_mt), d.bound.label(), &d.source);
        }
        if let Some(d) = &r.t1_hf {
            row("t1_hf", &d.text, d.unit.label(), fmt_b(d.b_mt), d.bound.label(), &d.source);
        }
        for d in &r.t2_hf {
            row("t2_hf", &d.text, d.unit.label(), fmt_b(d.b_mt), d.bound.label(), &d.source);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lookup_eu151_site1() {
        let r = lookup("Eu", Some(151), "1").unwrap();
        let g: Vec<f64> = r.ground_splittings.iter().map(|s| s.mhz).collect();
        assert_eq!(g, vec![34.533, 46.175]);
        let e: Vec<f64> = r.excited_splittings.iter().map(|s| s.mhz).collect();
        assert_eq!(e, vec![75.0, 102.0]);
        let t2o = &r.t2_opt[0];
        assert_eq!(t2o.b_mt, Some(0.0));
        assert_relative_eq!(t2o.seconds(), 1.5e-3, max_relative = 1e-12);
    }

    #[test]
    fn lookup_pr_site2() {
        let r = lookup("Pr", None, "2").unwrap();
        let g: Vec<f64> = r.ground_splittings.iter().map(|s| s.mhz).collect();
        assert_eq!(g, vec![4.93, 3.78]);
        let t2hf = &r.t2_hf[0];
        assert_eq!(t2hf.b_mt, Some(0.0));
        assert_relative_eq!(t2hf.seconds(), 2.6e-3, max_relative = 1e-12);
    }

    #[test]
    fn lookup_missing_site_is_not_found() {
        assert!(matches!(lookup("Eu", Some(151), "3"), Err(Error::NotFound(_))));
    }

    #[test]
    fn lower_bound_and_approximate_flags() {
        let eu = lookup("Eu", Some(151), "1").unwrap();
        assert_eq!(eu.t1_hf.as_ref().unwrap().bound, Bound::LowerBound);
        assert_relative_eq!(eu.t1_hf.as_ref().unwrap().seconds(), 20.0 * 86400.0);
        let pr = lookup("Pr", None, "1").unwrap();
        assert_eq!(pr.t1_hf.as_ref().unwrap().bound, Bound::Approximate);
    }

    #[test]
    fn narrative_records_have_explicit_gaps() {
        let er = lookup("Er", None, "-").unwrap();
        assert!(er.t1_opt.is_none() && er.t2_opt.is_empty());
        assert_relative_eq!(er.t2_hf[0].seconds(), 23e-3);
        let dy = lookup("Dy", None, "-").unwrap();
        assert!(dy.t2_hf.is_empty());
        assert_relative_eq!(dy.t1_hf.as_ref().unwrap().seconds(), 1400.0);
        let er167 = lookup("Er", Some(167), "-").unwrap();
        assert_relative_eq!(er167.t2_hf[0].seconds(), 1.3);
        assert_relative_eq!(er167.t2_opt[0].seconds(), 1.35e-3);
    }

    #[test]
    fn feasibility_eu151_site1_passes() {
        let r = lookup("Eu", Some(151), "1").unwrap();
        let budget = TimescaleBudget {
            t2_star: Some(0.1e-6),
            dt_s: Some(10e-6),
            storage_t: Some(100e-6),
            t0: Some(1.0),
            ..Default::default()
        };
        let report = feasibility(r, &budget, 0.0).unwrap();
        assert!(report.all_pass(), "{:?}", report.first_failure());
        // nearest listed fields: T2,opt at B=0 (1.5 ms), T2,HF at 1.37 T (6 h)
        assert_relative_eq!(report.chosen.t2_opt_s.unwrap(), 1.5e-3);
        assert_relative_eq!(report.chosen.t2_spin_s.unwrap(), 6.0 * 3600.0);
    }

    #[test]
    fn feasibility_pr_site1_fails_on_spin_memory() {
        let r = lookup("Pr", None, "1").unwrap();
        let budget = TimescaleBudget {
            dt_s: Some(10e-6),
            storage_t: Some(20e-6),
            t0: Some(10e-3),
            ..Default::default()
        };
        let report = feasibility(r, &budget, 0.0).unwrap();
        assert!(!report.all_pass());
        assert_eq!(report.first_failure().unwrap().name, "t0 < T2,s");
        assert_relative_eq!(report.chosen.t2_spin_s.unwrap(), 0.5e-3);
    }

    #[test]
    fn feasibility_bandwidth_check_fails_for_short_pulse() {
        let r = lookup("Pr", None, "1").unwrap();
        let budget = TimescaleBudget { dt_s: Some(20e-9), ..Default::default() };
        let report = feasibility(r, &budget, 0.0).unwrap();
        let bw = report.bandwidth.as_ref().unwrap();
        assert!(!bw.pass);
        // 1/20 ns = 50 MHz against the smallest ground splitting 10.19 MHz
        assert_relative_eq!(bw.lhs, 50e6, max_relative = 1e-12);
        assert_relative_eq!(bw.rhs, 10.19e6, max_relative = 1e-12);
    }

    #[test]
    fn feasibility_without_data_is_insufficient() {
        let dy = lookup("Dy", None, "-").unwrap();
        let budget = TimescaleBudget { storage_t: Some(1e-3), ..Default::default() };
        assert!(matches!(feasibility(dy, &budget, 0.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn records_round_trip_through_serde() {
        for r in records() {
            let json = serde_json::to_string(r).unwrap();
            let back: MaterialRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(*r, back);
        }
    }

    #[test]
    fn golden_csv_matches_embedded_table() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/materials_table.csv");
        if std::env::var("UPDATE_GOLDEN").is_ok() {
            std::fs::write(path, golden_csv()).unwrap();
        }
        let expected = std::fs::read_to_string(path).expect("golden CSV shipped with the crate");
        assert_eq!(golden_csv(), expected);
    }

    #[test]
    fn every_table_value_appears_in_csv() {
        let csv = golden_csv();
        for needle in [
            "34.533", "46.175", "90.0", "119.2", "29.527", "57.254", "76.4", "148.1", "75", "102",
            "191", "260", "63", "108", "160", "274", "17.3", "10.19", "4.93", "3.78", "4.84",
            "4.59", "2.29", "1.9", "1.6", "164", "222", "1.5", "2.6", "1.1", "152", "377", "20",
            "100", "6", "0.5", "42", "23", "1400", "1.3", "1.35",
        ] {
            assert!(
                csv.lines().any(|l| l.split(',').any(|f| f == needle)),
                "value {needle} missing from the golden CSV"
            );
        }
    }
}
