//! Frequency tables, file formats, and the embedded datasets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::GenPoissonParams;
use crate::dist::{LerchParams, Truncation};
use crate::error::{LerchError, Result};
use crate::gof::GroupingSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub count: u64,
    pub observed: f64,
}

/// Observed frequencies by count class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    label: String,
    classes: Vec<ClassCount>,
    n_total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    effective_size: Option<f64>,
}

impl FrequencyTable {
    /// `n_total` is the sum of the observed column.
    pub fn new(label: impl Into<String>, classes: Vec<ClassCount>) -> Result<Self> {
        let n_total = classes.iter().map(|c| c.observed).sum();
        Self::with_total(label, classes, n_total)
    }

    pub fn with_total(label: impl Into<String>, classes: Vec<ClassCount>, n_total: f64) -> Result<Self> {
        if classes.is_empty() {
            return Err(LerchError::Validation("table has no classes".into()));
        }
        for c in &classes {
            if !(c.observed.is_finite() && c.observed >= 0.0) {
                return Err(LerchError::Validation(format!(
                    "observed frequency for class {} must be finite and >= 0, got {}",
                    c.count, c.observed
                )));
            }
        }
        for w in classes.windows(2) {
            if w[1].count == w[0].count {
                return Err(LerchError::Validation(format!("duplicate class {}", w[1].count)));
            }
            if w[1].count < w[0].count {
                return Err(LerchError::Validation(format!(
                    "classes must be strictly increasing, {} follows {}",
                    w[1].count, w[0].count
                )));
            }
        }
        if !(n_total.is_finite() && n_total > 0.0) {
            return Err(LerchError::Validation(format!("n_total must be > 0, got {n_total}")));
        }
        Ok(Self {
            label: label.into(),
            classes,
            n_total,
            effective_size: None,
        })
    }

    /// Sample size used for Pearson X² when it differs from `n_total`.
    pub fn with_effective_size(mut self, n: f64) -> Result<Self> {
        if !(n.is_finite() && n > 0.0) {
            return Err(LerchError::Validation(format!("effective size must be > 0, got {n}")));
        }
        self.effective_size = Some(n);
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn classes(&self) -> &[ClassCount] {
        &self.classes
    }

    pub fn n_total(&self) -> f64 {
        self.n_total
    }

    pub fn effective_size(&self) -> f64 {
        self.effective_size.unwrap_or(self.n_total)
    }

    pub fn observed(&self, count: u64) -> f64 {
        self.classes
            .iter()
            .find(|c| c.count == count)
            .map_or(0.0, |c| c.observed)
    }

    pub fn min_class(&self) -> u64 {
        self.classes[0].count
    }

    pub fn max_class(&self) -> u64 {
        self.classes[self.classes.len() - 1].count
    }

    /// Number of classes with a positive observed frequency.
    pub fn nonzero_classes(&self) -> usize {
        self.classes.iter().filter(|c| c.observed > 0.0).count()
    }

    /// Sample raw moment `Σ x^r O_x / N`.
    pub fn sample_moment(&self, r: u32) -> f64 {
        self.classes
            .iter()
            .map(|c| (c.count as f64).powi(r as i32) * c.observed)
            .sum::<f64>()
            / self.n_total
    }

    /// Tabulates integer draws.
    pub fn from_samples(label: impl Into<String>, xs: &[i64]) -> Result<Self> {
        let mut sorted: Vec<u64> = Vec::with_capacity(xs.len());
        for &x in xs {
            if x < 0 {
                return Err(LerchError::Validation(format!("negative count {x}")));
            }
            sorted.push(x as u64);
        }
        sorted.sort_unstable();
        let mut classes: Vec<ClassCount> = Vec::new();
        for x in sorted {
            match classes.last_mut() {
                Some(c) if c.count == x => c.observed += 1.0,
                _ => classes.push(ClassCount { count: x, observed: 1.0 }),
            }
        }
        Self::new(label, classes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

/// JSON file layout. Grouping and truncation are optional on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub label: String,
    pub classes: Vec<ClassCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<GroupingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_size: Option<f64>,
}

impl TableFile {
    pub fn into_table(self) -> Result<FrequencyTable> {
        let t = match self.n_total {
            Some(n) => FrequencyTable::with_total(self.label, self.classes, n)?,
            None => FrequencyTable::new(self.label, self.classes)?,
        };
        match self.effective_size {
            Some(n) => t.with_effective_size(n),
            None => Ok(t),
        }
    }
}

pub fn load_table(path: &Path, format: TableFormat) -> Result<FrequencyTable> {
    let text = fs::read_to_string(path).map_err(|e| LerchError::Io(format!("{}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("table")
        .to_string();
    match format {
        TableFormat::Csv => parse_csv(&label, &text),
        TableFormat::Json => parse_json(&text)?.into_table(),
    }
}

/// Reads a JSON table file keeping its grouping and truncation.
pub fn load_table_file(path: &Path) -> Result<TableFile> {
    let text = fs::read_to_string(path).map_err(|e| LerchError::Io(format!("{}: {e}", path.display())))?;
    match TableFormat::from_path(path) {
        TableFormat::Json => parse_json(&text),
        TableFormat::Csv => {
            let t = parse_csv("table", &text)?;
            Ok(TableFile {
                label: path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("table")
                    .to_string(),
                classes: t.classes,
                grouping: None,
                truncation: None,
                n_total: None,
                effective_size: None,
            })
        }
    }
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> LerchError {
    LerchError::Parse {
        line,
        column,
        message: message.into(),
    }
}

pub fn parse_csv(label: &str, text: &str) -> Result<FrequencyTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_error(1, 1, "empty file, expected header `count,observed`")),
        Some(r) => r.map_err(|e| csv_error(&e))?,
    };
    if header.len() != 2 || &header[0] != "count" || &header[1] != "observed" {
        return Err(parse_error(1, 1, "expected header `count,observed`"));
    }
    let mut classes = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(parse_error(line, 1, format!("expected 2 fields, found {}", rec.len())));
        }
        let count = rec[0]
            .parse::<u64>()
            .map_err(|e| parse_error(line, 1, format!("count `{}`: {e}", &rec[0])))?;
        let observed = rec[1]
            .parse::<f64>()
            .map_err(|e| parse_error(line, 2, format!("observed `{}`: {e}", &rec[1])))?;
        classes.push(ClassCount { count, observed });
    }
    if classes.is_empty() {
        return Err(parse_error(2, 1, "no data rows"));
    }
    FrequencyTable::new(label, classes)
}

fn csv_error(e: &csv::Error) -> LerchError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(line, 1, e.to_string())
}

pub fn parse_json(text: &str) -> Result<TableFile> {
    if text.trim().is_empty() {
        return Err(parse_error(1, 1, "empty file"));
    }
    serde_json::from_str(text).map_err(|e| parse_error(e.line(), e.column(), e.to_string()))
}

pub fn to_csv_string(t: &FrequencyTable) -> String {
    let mut out = String::from("count,observed\n");
    for c in &t.classes {
        out.push_str(&format!("{},{}\n", c.count, c.observed));
    }
    out
}

pub fn to_table_file(t: &FrequencyTable) -> TableFile {
    let n_sum: f64 = t.classes.iter().map(|c| c.observed).sum();
    TableFile {
        label: t.label.clone(),
        classes: t.classes.clone(),
        grouping: None,
        truncation: None,
        n_total: (n_sum != t.n_total).then_some(t.n_total),
        effective_size: t.effective_size,
    }
}

pub fn to_json_string(t: &FrequencyTable) -> String {
    serde_json::to_string_pretty(&to_table_file(t)).expect("table serializes")
}

/// Values printed alongside a published fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedFit {
    pub params: LerchParams,
    /// Expected column on the table's own scale.
    pub expected: Vec<f64>,
    pub x2: Option<f64>,
    pub p_value: Option<f64>,
    pub dof: Option<u32>,
    pub ssd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedBaseline {
    pub params: GenPoissonParams,
    /// `None` where the published column has no entry.
    pub expected: Vec<Option<f64>>,
    pub x2: Option<f64>,
    pub p_value: Option<f64>,
    pub dof: Option<u32>,
    pub ssd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub name: String,
    pub table: FrequencyTable,
    pub grouping: GroupingSpec,
    pub truncation: Truncation,
    pub citation: String,
    pub published: PublishedFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PublishedBaseline>,
}

impl Dataset {
    pub fn to_table_file(&self) -> TableFile {
        let mut f = to_table_file(&self.table);
        f.grouping = Some(self.grouping.clone());
        f.truncation = Some(self.truncation);
        f
    }
}

pub const BUILTIN_NAMES: [&str; 6] = [
    "sowbugs",
    "death_notices",
    "bean_weevil",
    "yunoko",
    "urchin_40s",
    "urchin_180s",
];

/// Accepts the canonical names and the short table aliases.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    Some(match name {
        "sowbugs" => "sowbugs",
        "death_notices" | "death" => "death_notices",
        "bean_weevil" | "beans" => "bean_weevil",
        "yunoko" => "yunoko",
        "urchin_40s" | "urchin40" => "urchin_40s",
        "urchin_180s" | "urchin180" => "urchin_180s",
        _ => return None,
    })
}

/// Pearson X² scale for the Yunoko relative abundances. The source does not
/// state a sample size; this is the value that reproduces the published
/// X² = 0.0259897 at the published parameters. X² at unit scale is
/// 0.030453871.
pub const YUNOKO_EFFECTIVE_SIZE: f64 = 0.853_412_03;

fn counts(obs: &[f64]) -> Vec<ClassCount> {
    classes_from(0, obs)
}

fn classes_from(first: u64, obs: &[f64]) -> Vec<ClassCount> {
    obs.iter()
        .enumerate()
        .map(|(i, &o)| ClassCount {
            count: first + i as u64,
            observed: o,
        })
        .collect()
}

fn params(z: f64, s: f64, v: f64) -> LerchParams {
    LerchParams { z, s, v }
}

pub fn builtin(name: &str) -> Result<Dataset> {
    let canon = canonical_name(name).ok_or_else(|| LerchError::UnknownDataset(name.to_string()))?;
    let ds = match canon {
        "sowbugs" => Dataset {
            name: canon.into(),
            table: FrequencyTable::new(
                "sowbugs",
                counts(&[
                    28.0, 28.0, 14.0, 11.0, 8.0, 11.0, 2.0, 3.0, 3.0, 3.0, 3.0, 2.0, 0.0, 1.0, 2.0, 1.0, 0.0, 2.0,
                ]),
            )?,
            grouping: GroupingSpec::with_merged(0, &[(6, 7), (8, 9), (10, 11), (12, 17)], true)?,
            truncation: Truncation::NONE,
            citation: "Cole (1946), sowbugs Trachelipus rathkei per board".into(),
            published: PublishedFit {
                params: params(0.913315, 2.37621, 9.63785),
                expected: vec![
                    29.2839, 21.153, 15.6055, 11.7173, 8.93021, 6.89379, 5.38124, 4.24166, 3.37228, 2.70168, 2.1791,
                    1.76882, 1.44369, 1.18433, 0.976077, 0.807877, 0.671287, 0.559812,
                ],
                x2: Some(7.69169),
                p_value: Some(0.261572),
                dof: Some(6),
                ssd: None,
            },
            baseline: Some(PublishedBaseline {
                params: GenPoissonParams::standard(1.5416, 0.5321),
                expected: [
                    26.1127, 23.6448, 18.095, 13.3871, 9.86865, 7.31252, 5.46003, 4.10969, 3.11713, 2.38107, 1.83053,
                    1.41548, 1.10029, 0.859339, 0.67404, 0.530761, 0.419425, 0.332522,
                ]
                .into_iter()
                .map(Some)
                .collect(),
                x2: Some(9.3089),
                p_value: Some(0.231232),
                dof: Some(7),
                ssd: None,
            }),
        },
        "death_notices" => Dataset {
            name: canon.into(),
            table: FrequencyTable::new(
                "death_notices",
                counts(&[162.0, 267.0, 271.0, 185.0, 111.0, 61.0, 27.0, 8.0, 3.0, 1.0]),
            )?,
            grouping: GroupingSpec::with_merged(0, &[(7, 9)], true)?,
            truncation: Truncation::NONE,
            citation: "Hasselblad (1969), death notices of women 80+ per day in the London Times".into(),
            published: PublishedFit {
                params: params(0.189628, -7.10717, 2.81275),
                expected: vec![
                    161.906, 266.73, 264.789, 192.091, 112.56, 56.4979, 25.217, 10.2649, 3.87964, 1.37948,
                ],
                x2: Some(1.23938),
                p_value: Some(0.871573),
                dof: Some(4),
                ssd: None,
            },
            baseline: Some(PublishedBaseline {
                params: GenPoissonParams::adjusted(2.038, 0.03639, 0.02015),
                expected: [
                    162.004, 264.773, 268.751, 194.406, 112.384, 55.2168, 23.9531, 9.4128, 3.41263, 1.15712,
                ]
                .into_iter()
                .map(Some)
                .collect(),
                x2: Some(1.9379),
                p_value: Some(0.7472),
                dof: Some(4),
                ssd: None,
            }),
        },
        "bean_weevil" => Dataset {
            name: canon.into(),
            table: FrequencyTable::new("bean_weevil", counts(&[5.0, 68.0, 88.0, 32.0]))?,
            grouping: GroupingSpec::singletons(0, 3, true),
            truncation: Truncation::NONE,
            citation: "Mitchell (1975), bean weevil Callosobruchus maculatus eggs per bean".into(),
            published: PublishedFit {
                params: params(0.00116201, -24.9577, 2.04499),
                expected: vec![2.79364, 67.0555, 93.2649, 26.8808],
                x2: None,
                p_value: None,
                dof: None,
                ssd: Some(0.00160233),
            },
            baseline: Some(PublishedBaseline {
                params: GenPoissonParams::standard(3.1027, -0.7612),
                expected: vec![Some(8.67105), Some(57.5966), Some(97.4296), Some(29.5181)],
                x2: None,
                p_value: None,
                dof: None,
                ssd: Some(0.00581991),
            }),
        },
        "yunoko" => Dataset {
            name: canon.into(),
            table: FrequencyTable::with_total(
                "yunoko",
                classes_from(1, &[0.46798, 0.428571, 0.0738916, 0.0152709, 0.00837438, 0.00591133]),
                1.0,
            )?
            .with_effective_size(YUNOKO_EFFECTIVE_SIZE)?,
            grouping: GroupingSpec::singletons(1, 6, true),
            truncation: Truncation::new(1, Some(6))?,
            citation: "Aoki (1995), relative standing crop of ranked biotic compartments, Lake Yunoko".into(),
            published: PublishedFit {
                params: params(0.219158, -0.214704, -0.998437),
                expected: vec![0.460902, 0.404575, 0.102876, 0.0245955, 0.00573359, 0.00131821],
                x2: Some(0.0259897),
                p_value: Some(0.987089),
                dof: Some(2),
                ssd: None,
            },
            baseline: None,
        },
        "urchin_40s" => Dataset {
            name: canon.into(),
            table: FrequencyTable::new("urchin_40s", counts(&[28.0, 44.0, 7.0, 1.0, 0.0]))?,
            grouping: GroupingSpec::singletons(0, 4, true),
            truncation: Truncation::NONE,
            citation: "Moore (1975), sea-urchin sperm per egg after 40 s".into(),
            published: PublishedFit {
                params: params(0.00773867, -8.26894, 1.11633),
                expected: vec![28.0876, 43.0737, 8.17627, 0.631919, 0.0295335],
                x2: None,
                p_value: None,
                dof: None,
                ssd: Some(0.000372774),
            },
            baseline: Some(PublishedBaseline {
                params: GenPoissonParams::standard(1.0077, -0.3216),
                expected: vec![Some(29.2046), Some(40.5931), Some(10.2044), Some(0.0236894), None],
                x2: None,
                p_value: None,
                dof: None,
                ssd: None,
            }),
        },
        "urchin_180s" => Dataset {
            name: canon.into(),
            table: FrequencyTable::new("urchin_180s", counts(&[2.0, 81.0, 15.0, 1.0, 1.0]))?,
            grouping: GroupingSpec::singletons(0, 4, true),
            truncation: Truncation::NONE,
            citation: "Moore (1975), sea-urchin sperm per egg after 180 s".into(),
            published: PublishedFit {
                params: params(0.0835808, -1.15174, 0.00468234),
                expected: vec![1.99482, 80.7898, 14.9625, 1.99311, 0.23192],
                x2: None,
                p_value: None,
                dof: None,
                ssd: Some(0.000162184),
            },
            baseline: Some(PublishedBaseline {
                params: GenPoissonParams::standard(2.4654, -1.0893),
                expected: vec![Some(8.49748), Some(62.2665), Some(26.5388), None, None],
                x2: None,
                p_value: None,
                dof: None,
                ssd: None,
            }),
        },
        _ => unreachable!(),
    };
    ds.grouping.covers(&ds.table)?;
    Ok(ds)
}
