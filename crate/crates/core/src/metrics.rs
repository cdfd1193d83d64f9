//! Evaluation quantities: improvement, physicochemical similarity, validity,
//! success, geometric mean and structural-alert rate.

use std::fmt::Write as _;
use std::path::Path;

use molxfer_chem::chemprops::sa::percentile;
use molxfer_chem::chemprops::{
    content_properties, AlertPattern, FragmentFreqTable, PropertyVector, ToxModel,
};
use molxfer_chem::smiles::parse_valid;
use molxfer_chem::MolGraph;
use serde::{Deserialize, Serialize};

use crate::error::MetricsError;

pub const PSS_FLOOR: f64 = 1e-6;
pub const N_CONTENT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Toxicity,
    Synthesizability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Decrease,
    Increase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolLabel {
    Source,
    Target,
    Neither,
}

impl PoolLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolLabel::Source => "source",
            PoolLabel::Target => "target",
            PoolLabel::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub direction: Direction,
    /// Style condition of a successful output: score strictly below this.
    pub success_threshold: f64,
    pub pss_threshold: f64,
}

impl TaskSpec {
    pub fn toxicity() -> Self {
        TaskSpec {
            kind: TaskKind::Toxicity,
            direction: Direction::Decrease,
            success_threshold: 0.1,
            pss_threshold: 0.7,
        }
    }

    pub fn synthesizability() -> Self {
        TaskSpec {
            kind: TaskKind::Synthesizability,
            direction: Direction::Decrease,
            success_threshold: 2.5,
            pss_threshold: 0.7,
        }
    }

    pub fn for_kind(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Toxicity => Self::toxicity(),
            TaskKind::Synthesizability => Self::synthesizability(),
        }
    }

    /// Pool membership of a style score.
    pub fn label(&self, score: f64) -> PoolLabel {
        match self.kind {
            TaskKind::Toxicity if score > 0.9 => PoolLabel::Source,
            TaskKind::Toxicity if score < 0.03 => PoolLabel::Target,
            TaskKind::Synthesizability if (5.0..=8.0).contains(&score) => PoolLabel::Source,
            TaskKind::Synthesizability if (0.0..=2.5).contains(&score) => PoolLabel::Target,
            _ => PoolLabel::Neither,
        }
    }

    pub fn style_ok(&self, score: f64) -> bool {
        score < self.success_threshold
    }
}

/// Style scorer matching a task: toxicity probability or SA score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StyleScorer {
    Toxicity(ToxModel),
    Synthesizability(FragmentFreqTable),
}

impl StyleScorer {
    pub fn kind(&self) -> TaskKind {
        match self {
            StyleScorer::Toxicity(_) => TaskKind::Toxicity,
            StyleScorer::Synthesizability(_) => TaskKind::Synthesizability,
        }
    }

    pub fn score(&self, graph: &MolGraph) -> Result<f64, MetricsError> {
        let s = match self {
            StyleScorer::Toxicity(m) => m.predict(graph),
            StyleScorer::Synthesizability(t) => t.score(graph)?,
        };
        if s.is_finite() {
            Ok(s)
        } else {
            Err(MetricsError::ScoringFailure(molxfer_chem::smiles::write(
                graph,
            )))
        }
    }

    pub fn score_smiles(&self, smiles: &str) -> Result<f64, MetricsError> {
        let g =
            parse_valid(smiles).ok_or_else(|| MetricsError::ScoringFailure(smiles.to_string()))?;
        self.score(&g)
    }
}

/// Improvement oriented so that movement toward the target style is positive.
pub fn improvement(prop_x: f64, prop_y: f64, task: &TaskSpec) -> f64 {
    match task.direction {
        Direction::Decrease => prop_x - prop_y,
        Direction::Increase => prop_y - prop_x,
    }
}

/// Per-property similarity scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PssScales {
    pub ranges: [f64; N_CONTENT],
}

impl PssScales {
    /// Interdecile range of each property over a corpus. A property whose
    /// interdecile range is zero falls back to its full range, then to 1.
    pub fn fit(props: &[PropertyVector]) -> Result<Self, MetricsError> {
        if props.is_empty() {
            return Err(MetricsError::EmptyTestSet);
        }
        let mut ranges = [1.0; N_CONTENT];
        for (p, range) in ranges.iter_mut().enumerate() {
            let mut xs: Vec<f64> = props.iter().map(|v| v.to_array()[p]).collect();
            xs.sort_by(f64::total_cmp);
            let idr = percentile(&xs, 0.9) - percentile(&xs, 0.1);
            let full = xs[xs.len() - 1] - xs[0];
            *range = if idr > 0.0 {
                idr
            } else if full > 0.0 {
                full
            } else {
                1.0
            };
        }
        Ok(PssScales { ranges })
    }

    /// Per-property similarities `max(0, 1 - |Δ| / R)`.
    pub fn similarities(&self, x: &PropertyVector, y: &PropertyVector) -> [f64; N_CONTENT] {
        let (a, b) = (x.to_array(), y.to_array());
        let mut s = [0.0; N_CONTENT];
        for p in 0..N_CONTENT {
            s[p] = (1.0 - (a[p] - b[p]).abs() / self.ranges[p]).max(0.0);
        }
        s
    }

    pub fn pss(&self, x: &PropertyVector, y: &PropertyVector) -> f64 {
        let s = self.similarities(x, y);
        (s.iter().sum::<f64>() / N_CONTENT as f64).max(PSS_FLOOR)
    }

    pub fn pss_graphs(&self, x: &MolGraph, y: &MolGraph) -> Result<f64, MetricsError> {
        Ok(self.pss(&content_properties(x)?, &content_properties(y)?))
    }
}

/// Percentage of strings that parse and validate.
pub fn validity_rate<S: AsRef<str>>(outputs: &[S]) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    let ok = outputs
        .iter()
        .filter(|s| parse_valid(s.as_ref()).is_some())
        .count();
    100.0 * ok as f64 / outputs.len() as f64
}

pub fn success(style_score_y: f64, pss: f64, task: &TaskSpec) -> bool {
    task.style_ok(style_score_y) && pss > task.pss_threshold
}

/// Cube root of the product of mean improvement, mean PSS and success rate.
pub fn gm(mean_imp: f64, mean_pss: f64, sr: f64) -> Result<f64, MetricsError> {
    for f in [mean_imp, mean_pss, sr] {
        if f < 0.0 || f.is_nan() {
            return Err(MetricsError::NegativeFactor(f));
        }
    }
    Ok((mean_imp * mean_pss * sr).cbrt())
}

/// Percentage of molecules matching at least one alert.
pub fn alert_rate(molecules: &[MolGraph], alerts: &[AlertPattern]) -> f64 {
    if molecules.is_empty() {
        return 0.0;
    }
    let hits = molecules
        .iter()
        .filter(|g| alerts.iter().any(|a| a.matches(g)))
        .count();
    100.0 * hits as f64 / molecules.len() as f64
}

/// One input/output pair. Fields that need a valid output are `None` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub input_smiles: String,
    pub output_smiles: String,
    pub prop_x: f64,
    pub prop_y: Option<f64>,
    pub imp: Option<f64>,
    pub pss: Option<f64>,
    pub valid: bool,
    pub success: bool,
}

impl PairRecord {
    /// Scores one pair; an output that fails to parse or score is recorded invalid.
    pub fn score(
        input: &str,
        output: &str,
        task: &TaskSpec,
        scorer: &StyleScorer,
        scales: &PssScales,
    ) -> Result<Self, MetricsError> {
        let gx =
            parse_valid(input).ok_or_else(|| MetricsError::ScoringFailure(input.to_string()))?;
        let prop_x = scorer.score(&gx)?;
        let px = content_properties(&gx)?;
        let scored = parse_valid(output).and_then(|gy| {
            let prop_y = scorer.score(&gy).ok()?;
            let py = content_properties(&gy).ok()?;
            Some((prop_y, scales.pss(&px, &py)))
        });
        Ok(match scored {
            Some((prop_y, pss)) => PairRecord {
                input_smiles: input.to_string(),
                output_smiles: output.to_string(),
                prop_x,
                prop_y: Some(prop_y),
                imp: Some(improvement(prop_x, prop_y, task)),
                pss: Some(pss),
                valid: true,
                success: success(prop_y, pss, task),
            },
            None => PairRecord {
                input_smiles: input.to_string(),
                output_smiles: output.to_string(),
                prop_x,
                prop_y: None,
                imp: None,
                pss: None,
                valid: false,
                success: false,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    /// Mean improvement over valid outputs.
    pub imp: f64,
    /// Mean PSS over valid outputs.
    pub pss: f64,
    /// Percentage of valid outputs.
    pub validity: f64,
    /// Fraction of successful pairs among all pairs.
    pub sr: f64,
    /// `None` when a factor is negative.
    pub gm: Option<f64>,
    /// Percentage of valid outputs carrying a structural alert.
    pub alert_rate: f64,
}

impl Summary {
    pub fn from_records(
        records: &[PairRecord],
        alerts: &[AlertPattern],
    ) -> Result<Self, MetricsError> {
        if records.is_empty() {
            return Err(MetricsError::EmptyTestSet);
        }
        let n = records.len();
        let valid: Vec<&PairRecord> = records.iter().filter(|r| r.valid).collect();
        let mean = |f: fn(&PairRecord) -> Option<f64>| {
            if valid.is_empty() {
                0.0
            } else {
                valid.iter().filter_map(|r| f(r)).sum::<f64>() / valid.len() as f64
            }
        };
        let imp = mean(|r| r.imp);
        let pss = mean(|r| r.pss);
        let sr = records.iter().filter(|r| r.success).count() as f64 / n as f64;
        let graphs: Vec<MolGraph> = valid
            .iter()
            .filter_map(|r| parse_valid(&r.output_smiles))
            .collect();
        Ok(Summary {
            n,
            imp,
            pss,
            validity: 100.0 * valid.len() as f64 / n as f64,
            sr,
            gm: gm(imp, pss, sr).ok(),
            alert_rate: alert_rate(&graphs, alerts),
        })
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let gm = self
            .gm
            .map_or_else(|| "nan".to_string(), |g| format!("{g:.6}"));
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "imp={:.6}", self.imp);
        let _ = writeln!(s, "pss={:.6}", self.pss);
        let _ = writeln!(s, "validity={:.6}", self.validity);
        let _ = writeln!(s, "sr={:.6}", self.sr);
        let _ = writeln!(s, "gm={gm}");
        let _ = writeln!(s, "alert_rate={:.6}", self.alert_rate);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskSpec,
    pub records: Vec<PairRecord>,
    pub summary: Summary,
}

impl MetricsReport {
    pub fn new(
        task: TaskSpec,
        records: Vec<PairRecord>,
        alerts: &[AlertPattern],
    ) -> Result<Self, MetricsError> {
        let summary = Summary::from_records(&records, alerts)?;
        Ok(MetricsReport {
            task,
            records,
            summary,
        })
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, records_to_csv(&self.records))
    }
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.6}"))
}

/// CSV text with the fixed column order; values use six decimals.
pub fn records_to_csv(records: &[PairRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "input_smiles",
        "output_smiles",
        "prop_x",
        "prop_y",
        "imp",
        "pss",
        "valid",
        "success",
    ])
    .expect("in-memory write");
    for r in records {
        w.write_record([
            r.input_smiles.clone(),
            r.output_smiles.clone(),
            format!("{:.6}", r.prop_x),
            cell(r.prop_y),
            cell(r.imp),
            cell(r.pss),
            r.valid.to_string(),
            r.success.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn records_from_csv(text: &str) -> Result<Vec<PairRecord>, MetricsError> {
    let bad = |m: String| MetricsError::ScoringFailure(m);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<Option<f64>, MetricsError> {
            let s = &row[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(s.to_string()))
            }
        };
        let flag = |i: usize| row[i].parse::<bool>().map_err(|_| bad(row[i].to_string()));
        out.push(PairRecord {
            input_smiles: row[0].to_string(),
            output_smiles: row[1].to_string(),
            prop_x: num(2)?.ok_or_else(|| bad("missing prop_x".into()))?,
            prop_y: num(3)?,
            imp: num(4)?,
            pss: num(5)?,
            valid: flag(6)?,
            success: flag(7)?,
        });
    }
    Ok(out)
}

/// Pairs each source with an output and scores every pair.
pub fn score_pairs<S: AsRef<str>>(
    pairs: &[(S, S)],
    task: &TaskSpec,
    scorer: &StyleScorer,
    scales: &PssScales,
) -> Result<Vec<PairRecord>, MetricsError> {
    pairs
        .iter()
        .map(|(x, y)| PairRecord::score(x.as_ref(), y.as_ref(), task, scorer, scales))
        .collect()
}
