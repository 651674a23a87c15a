//! Feature vectors relating a matrix and its execution to speedup.
//!
//! Matrix features come from [`matrix_stats`]. Cache counters are those of
//! the slowest thread of the multi-threaded run, taken from the simulator or
//! from an imported counter CSV. `FR_INS` counts the whole run.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{partition, Format, Operand, PartitionPlan, Placement};
use crate::matrix::{matrix_stats, CsrMatrix, DEFAULT_OMEGA, DEFAULT_SIGMA};
use crate::sim::{ScalingRun, SimResult, Topology};

/// Column names, in export order.
pub const FEATURE_NAMES: [&str; 16] = [
    "n_rows",
    "nnz_max",
    "nnz_avg",
    "nnz_var",
    "L1_DCA",
    "L1_DCM",
    "L2_DCA",
    "L2_DCM",
    "FR_INS",
    "TOT_INS",
    "TOT_CYC",
    "L1_DCMR",
    "L2_DCMR",
    "IPC",
    "L2_DCMR_change",
    "job_var",
];

pub const FEATURES_SCHEMA: &str = "spmvlab.features/v1";

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub n_rows: f64,
    pub nnz_max: f64,
    pub nnz_avg: f64,
    pub nnz_var: f64,
    pub L1_DCA: f64,
    pub L1_DCM: f64,
    pub L2_DCA: f64,
    pub L2_DCM: f64,
    pub FR_INS: f64,
    pub TOT_INS: Option<f64>,
    pub TOT_CYC: Option<f64>,
    pub L1_DCMR: f64,
    pub L2_DCMR: f64,
    pub IPC: Option<f64>,
    pub L2_DCMR_change: f64,
    pub job_var: f64,
}

impl FeatureVector {
    /// Value of a named feature; `None` if absent or unknown.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "n_rows" => self.n_rows,
            "nnz_max" => self.nnz_max,
            "nnz_avg" => self.nnz_avg,
            "nnz_var" => self.nnz_var,
            "L1_DCA" => self.L1_DCA,
            "L1_DCM" => self.L1_DCM,
            "L2_DCA" => self.L2_DCA,
            "L2_DCM" => self.L2_DCM,
            "FR_INS" => self.FR_INS,
            "TOT_INS" => return self.TOT_INS,
            "TOT_CYC" => return self.TOT_CYC,
            "L1_DCMR" => self.L1_DCMR,
            "L2_DCMR" => self.L2_DCMR,
            "IPC" => return self.IPC,
            "L2_DCMR_change" => self.L2_DCMR_change,
            "job_var" => self.job_var,
            _ => return None,
        })
    }

    pub fn values(&self) -> Vec<(&'static str, Option<f64>)> {
        FEATURE_NAMES.iter().map(|&n| (n, self.get(n))).collect()
    }

    fn from_values(values: &BTreeMap<&str, Option<f64>>) -> Result<Self> {
        let req = |name: &str| -> Result<f64> {
            values
                .get(name)
                .copied()
                .flatten()
                .ok_or_else(|| Error::MissingFeature(name.to_string()))
        };
        let opt = |name: &str| values.get(name).copied().flatten();
        Ok(FeatureVector {
            n_rows: req("n_rows")?,
            nnz_max: req("nnz_max")?,
            nnz_avg: req("nnz_avg")?,
            nnz_var: req("nnz_var")?,
            L1_DCA: req("L1_DCA")?,
            L1_DCM: req("L1_DCM")?,
            L2_DCA: req("L2_DCA")?,
            L2_DCM: req("L2_DCM")?,
            FR_INS: req("FR_INS")?,
            TOT_INS: opt("TOT_INS"),
            TOT_CYC: opt("TOT_CYC"),
            L1_DCMR: req("L1_DCMR")?,
            L2_DCMR: req("L2_DCMR")?,
            IPC: opt("IPC"),
            L2_DCMR_change: req("L2_DCMR_change")?,
            job_var: req("job_var")?,
        })
    }

    /// Whether the miss rates and IPC equal their definitions.
    pub fn derived_consistent(&self) -> bool {
        let ipc = match (self.TOT_INS, self.TOT_CYC) {
            (Some(i), Some(c)) if c > 0.0 => Some(i / c),
            _ => None,
        };
        self.L1_DCMR == self.L1_DCM / self.L1_DCA
            && self.L2_DCMR == self.L2_DCM / self.L2_DCA
            && self.IPC == ipc
    }
}

/// Anything that can answer "what is feature `name`?".
pub trait FeatureLookup {
    fn feature(&self, name: &str) -> Option<f64>;
}

impl FeatureLookup for FeatureVector {
    fn feature(&self, name: &str) -> Option<f64> {
        self.get(name)
    }
}

impl FeatureLookup for BTreeMap<String, f64> {
    fn feature(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl FeatureLookup for std::collections::HashMap<String, f64> {
    fn feature(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

/// Where a sample's speedup came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Measured,
    Modeled,
}

impl std::fmt::Display for LabelSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelSource::Measured => "measured",
            LabelSource::Modeled => "modeled",
        })
    }
}

impl std::str::FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "measured" => Ok(LabelSource::Measured),
            "modeled" => Ok(LabelSource::Modeled),
            other => Err(Error::InvalidParameter(format!(
                "unknown label source `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub matrix: String,
    pub features: FeatureVector,
    pub speedup: f64,
    pub source: LabelSource,
}

impl Sample {
    pub fn new(
        matrix: impl Into<String>,
        features: FeatureVector,
        speedup: f64,
        source: LabelSource,
    ) -> Result<Self> {
        if !(speedup.is_finite() && speedup > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "speedup label must be finite and positive, got {speedup}"
            )));
        }
        Ok(Sample {
            matrix: matrix.into(),
            features,
            speedup,
            source,
        })
    }
}

pub fn compute_job_var(plan: &PartitionPlan) -> Result<f64> {
    plan.max_share()
}

pub fn compute_l2_dcmr_change(sim1: &SimResult, sim_t: &SimResult) -> Result<f64> {
    if sim1.threads.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "baseline simulation has {} threads, expected 1",
            sim1.threads.len()
        )));
    }
    let before = sim1.threads[0]
        .l2_dcmr()
        .ok_or(Error::ZeroL2Accesses("1-thread"))?;
    let after = sim_t
        .slowest()
        .l2_dcmr()
        .ok_or(Error::ZeroL2Accesses("multi-thread"))?;
    Ok(after - before)
}

/// One thread's raw counters.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawCounters {
    pub L1_DCA: f64,
    pub L1_DCM: f64,
    pub L2_DCA: f64,
    pub L2_DCM: f64,
    pub FR_INS: f64,
    pub TOT_INS: Option<f64>,
    pub TOT_CYC: Option<f64>,
}

const RAW_EVENTS: [&str; 7] = [
    "L1_DCA", "L1_DCM", "L2_DCA", "L2_DCM", "FR_INS", "TOT_INS", "TOT_CYC",
];

#[derive(Debug, Deserialize)]
struct CounterRow {
    matrix: String,
    threads: usize,
    thread_id: usize,
    event: String,
    value: f64,
}

/// Hardware counters read from `matrix,threads,thread_id,event,value` CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CounterImport {
    // (matrix, threads) -> thread_id -> event -> value
    runs: BTreeMap<(String, usize), BTreeMap<usize, BTreeMap<String, f64>>>,
}

/// Counters of one imported run, reduced to what the features need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportedRun {
    pub slowest_thread: usize,
    pub slowest: RawCounters,
    /// `FR_INS` summed over all threads.
    pub total_fr_ins: f64,
}

impl CounterImport {
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>()
            != ["matrix", "threads", "thread_id", "event", "value"]
        {
            return Err(Error::CounterImport(
                "header must be `matrix,threads,thread_id,event,value`".into(),
            ));
        }
        let mut import = CounterImport::default();
        for (i, row) in rdr.deserialize::<CounterRow>().enumerate() {
            let row = row?;
            let line = i + 2;
            if !RAW_EVENTS.contains(&row.event.as_str()) {
                return Err(Error::CounterImport(format!(
                    "line {line}: unknown event `{}`",
                    row.event
                )));
            }
            if row.threads == 0 || row.thread_id >= row.threads {
                return Err(Error::CounterImport(format!(
                    "line {line}: thread_id {} out of range for {} threads",
                    row.thread_id, row.threads
                )));
            }
            if !(row.value.is_finite() && row.value >= 0.0) {
                return Err(Error::CounterImport(format!(
                    "line {line}: bad counter value {}",
                    row.value
                )));
            }
            let events = import
                .runs
                .entry((row.matrix, row.threads))
                .or_default()
                .entry(row.thread_id)
                .or_default();
            if events.insert(row.event.clone(), row.value).is_some() {
                return Err(Error::CounterImport(format!(
                    "line {line}: duplicate event `{}`",
                    row.event
                )));
            }
        }
        Ok(import)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn contains(&self, matrix: &str, threads: usize) -> bool {
        self.runs.contains_key(&(matrix.to_string(), threads))
    }

    /// The run's slowest thread: largest `TOT_CYC` when every thread has
    /// it, otherwise largest `L1_DCA`. Lowest id wins ties.
    pub fn run(&self, matrix: &str, threads: usize) -> Result<Option<ImportedRun>> {
        let Some(per_thread) = self.runs.get(&(matrix.to_string(), threads)) else {
            return Ok(None);
        };
        let mut counters = Vec::with_capacity(per_thread.len());
        for (&tid, events) in per_thread {
            let req = |e: &str| {
                events.get(e).copied().ok_or_else(|| {
                    Error::CounterImport(format!(
                        "{matrix} ({threads} threads) thread {tid}: missing {e}"
                    ))
                })
            };
            counters.push((
                tid,
                RawCounters {
                    L1_DCA: req("L1_DCA")?,
                    L1_DCM: req("L1_DCM")?,
                    L2_DCA: req("L2_DCA")?,
                    L2_DCM: req("L2_DCM")?,
                    FR_INS: req("FR_INS")?,
                    TOT_INS: events.get("TOT_INS").copied(),
                    TOT_CYC: events.get("TOT_CYC").copied(),
                },
            ));
        }
        let by_cycles = counters.iter().all(|(_, c)| c.TOT_CYC.is_some());
        let key = |c: &RawCounters| {
            if by_cycles {
                c.TOT_CYC.unwrap_or(0.0)
            } else {
                c.L1_DCA
            }
        };
        let mut best = 0;
        for (i, (_, c)) in counters.iter().enumerate() {
            if key(c) > key(&counters[best].1) {
                best = i;
            }
        }
        Ok(Some(ImportedRun {
            slowest_thread: counters[best].0,
            slowest: counters[best].1,
            total_fr_ins: counters.iter().map(|(_, c)| c.FR_INS).sum(),
        }))
    }
}

/// Which counters win when both the simulator and an import cover a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precedence {
    Simulated,
    Imported,
}

impl std::str::FromStr for Precedence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulated" => Ok(Precedence::Simulated),
            "imported" => Ok(Precedence::Imported),
            other => Err(Error::InvalidParameter(format!(
                "unknown precedence `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CounterSources<'a> {
    /// 1-thread and multi-thread simulation of the same matrix.
    pub simulated: Option<(&'a SimResult, &'a SimResult)>,
    pub imported: Option<&'a CounterImport>,
    pub precedence: Option<Precedence>,
}

fn rate(num: f64, den: f64, side: &'static str) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::ZeroL2Accesses(side))
    }
}

/// Assembles the feature vector for `matrix` executed under `plan`.
pub fn build_feature_vector(
    matrix: &str,
    m: &CsrMatrix,
    plan: &PartitionPlan,
    sources: &CounterSources<'_>,
) -> Result<FeatureVector> {
    let stats = matrix_stats(m)?;
    let job_var = compute_job_var(plan)?;
    let threads = plan.n_threads;

    let imported = match sources.imported {
        Some(import) => import.run(matrix, threads)?,
        None => None,
    };
    let use_import = match (
        sources.simulated.is_some(),
        imported.is_some(),
        sources.precedence,
    ) {
        (_, false, _) => false,
        (false, true, _) => true,
        (true, true, Some(p)) => p == Precedence::Imported,
        (true, true, None) => {
            return Err(Error::ConflictingCounterSources {
                matrix: matrix.to_string(),
                threads,
            })
        }
    };

    let (raw, fr_ins, change) = if let Some(run) = imported.filter(|_| use_import) {
        let before = match sources.imported.and_then(|i| i.run(matrix, 1).transpose()) {
            Some(single) => {
                let s = single?.slowest;
                rate(s.L2_DCM, s.L2_DCA, "1-thread")?
            }
            None => match sources.simulated {
                Some((sim1, _)) => sim1.threads[0]
                    .l2_dcmr()
                    .ok_or(Error::ZeroL2Accesses("1-thread"))?,
                None => {
                    return Err(Error::CounterImport(format!(
                        "{matrix}: no 1-thread counters to compute L2_DCMR_change"
                    )))
                }
            },
        };
        let after = rate(run.slowest.L2_DCM, run.slowest.L2_DCA, "multi-thread")?;
        (run.slowest, run.total_fr_ins, after - before)
    } else {
        let (sim1, sim_t) = sources.simulated.ok_or_else(|| {
            Error::CounterImport(format!("{matrix} ({threads} threads): no counter source"))
        })?;
        if sim_t.threads.len() != threads {
            return Err(Error::DimensionMismatch {
                expected: threads,
                actual: sim_t.threads.len(),
            });
        }
        let s = sim_t.slowest();
        let raw = RawCounters {
            L1_DCA: s.l1_dca as f64,
            L1_DCM: s.l1_dcm as f64,
            L2_DCA: s.l2_dca as f64,
            L2_DCM: s.l2_dcm as f64,
            FR_INS: 0.0,
            TOT_INS: None,
            TOT_CYC: None,
        };
        (
            raw,
            2.0 * stats.nnz as f64,
            compute_l2_dcmr_change(sim1, sim_t)?,
        )
    };

    if raw.L1_DCA <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{matrix}: zero L1 accesses"
        )));
    }
    let ipc = match (raw.TOT_INS, raw.TOT_CYC) {
        (Some(i), Some(c)) if c > 0.0 => Some(i / c),
        _ => None,
    };
    Ok(FeatureVector {
        n_rows: stats.n_rows as f64,
        nnz_max: stats.nnz_max as f64,
        nnz_avg: stats.nnz_avg,
        nnz_var: stats.nnz_var,
        L1_DCA: raw.L1_DCA,
        L1_DCM: raw.L1_DCM,
        L2_DCA: raw.L2_DCA,
        L2_DCM: raw.L2_DCM,
        FR_INS: fr_ins,
        TOT_INS: raw.TOT_INS,
        TOT_CYC: raw.TOT_CYC,
        L1_DCMR: raw.L1_DCM / raw.L1_DCA,
        L2_DCMR: rate(raw.L2_DCM, raw.L2_DCA, "multi-thread")?,
        IPC: ipc,
        L2_DCMR_change: change,
        job_var,
    })
}

/// Simulates `m` in `format` at 1 and `n_threads` threads and labels the
/// resulting features with the modeled speedup.
pub fn simulated_sample(
    matrix: &str,
    m: &CsrMatrix,
    format: Format,
    topo: &Topology,
    placement: &Placement,
    n_threads: usize,
) -> Result<Sample> {
    let csr5;
    let op = match format {
        Format::Csr => Operand::Csr(m),
        Format::Csr5 => {
            csr5 = m.to_csr5(DEFAULT_OMEGA, DEFAULT_SIGMA)?;
            Operand::Csr5(&csr5)
        }
    };
    let run = ScalingRun::new(op, topo, placement, n_threads)?;
    let sources = CounterSources {
        simulated: Some((&run.single, &run.parallel)),
        ..Default::default()
    };
    let fv = build_feature_vector(matrix, m, &run.plan, &sources)?;
    Sample::new(matrix, fv, run.modeled_speedup(), LabelSource::Modeled)
}

/// Job balance of `m` under the default scheme of `format`.
pub fn job_var_for(m: &CsrMatrix, format: Format, n_threads: usize) -> Result<f64> {
    let csr5;
    let op = match format {
        Format::Csr => Operand::Csr(m),
        Format::Csr5 => {
            csr5 = m.to_csr5(DEFAULT_OMEGA, DEFAULT_SIGMA)?;
            Operand::Csr5(&csr5)
        }
    };
    compute_job_var(&partition(op, op.default_scheme(), n_threads)?)
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Writes samples as CSV: a schema comment line, then
/// `matrix,speedup,source,<features...>`. Absent values are empty cells.
pub fn write_samples_csv(samples: &[Sample], w: impl Write) -> Result<()> {
    let mut w = w;
    writeln!(w, "#schema={FEATURES_SCHEMA}").map_err(|e| Error::io("<features>", e))?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["matrix", "speedup", "source"];
    header.extend(FEATURE_NAMES);
    out.write_record(&header)?;
    for s in samples {
        let mut rec = vec![
            s.matrix.clone(),
            format!("{:?}", s.speedup),
            s.source.to_string(),
        ];
        rec.extend(s.features.values().into_iter().map(|(_, v)| fmt_value(v)));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

pub fn read_samples_csv(r: impl Read) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingFeature(name.to_string()))
    };
    let (mi, si, ri) = (col("matrix")?, col("speedup")?, col("source")?);
    let cols: Vec<(&str, usize)> = FEATURE_NAMES
        .iter()
        .map(|&n| col(n).map(|i| (n, i)))
        .collect::<Result<_>>()?;
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 3;
        let num = |idx: usize| -> Result<Option<f64>> {
            let cell = rec.get(idx).unwrap_or("").trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse().map(Some).map_err(|_| Error::Parse {
                path: "<features>".into(),
                line,
                msg: format!("`{cell}` is not a number"),
            })
        };
        let mut values = BTreeMap::new();
        for &(name, idx) in &cols {
            values.insert(name, num(idx)?);
        }
        let speedup = num(si)?.ok_or_else(|| Error::MissingFeature("speedup".into()))?;
        samples.push(Sample::new(
            rec.get(mi).unwrap_or(""),
            FeatureVector::from_values(&values)?,
            speedup,
            rec.get(ri).unwrap_or("").parse()?,
        )?);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::example_matrix;

    fn example_sims(topo: &Topology) -> (PartitionPlan, SimResult, SimResult) {
        let m = example_matrix();
        let run = ScalingRun::new(Operand::Csr(&m), topo, &Placement::Compact, 4).unwrap();
        (run.plan, run.single, run.parallel)
    }

    #[test]
    fn job_var_examples() {
        let m = example_matrix();
        let plan = PartitionPlan::rows_static(&m, 4).unwrap();
        assert_eq!(compute_job_var(&plan).unwrap(), 0.375);
        let one = PartitionPlan::rows_static(&m, 1).unwrap();
        assert_eq!(compute_job_var(&one).unwrap(), 1.0);
        let empty = CsrMatrix::from_parts(2, 2, vec![0, 0, 0], vec![], vec![]).unwrap();
        let plan = PartitionPlan::rows_static(&empty, 2).unwrap();
        assert!(compute_job_var(&plan).is_err());
    }

    #[test]
    fn example_simulation_features() {
        let topo = Topology::ft2000plus();
        let (plan, s1, st) = example_sims(&topo);
        let m = example_matrix();
        let sources = CounterSources {
            simulated: Some((&s1, &st)),
            ..Default::default()
        };
        let fv = build_feature_vector("fig1", &m, &plan, &sources).unwrap();
        assert_eq!(fv.FR_INS, 16.0);
        assert_eq!(fv.nnz_avg, 2.0);
        assert_eq!(fv.job_var, 0.375);
        assert!(fv.TOT_INS.is_none() && fv.TOT_CYC.is_none() && fv.IPC.is_none());
        assert!(fv.derived_consistent());
        assert!((0.0..=1.0).contains(&fv.L1_DCMR) && (0.0..=1.0).contains(&fv.L2_DCMR));
    }

    #[test]
    fn identical_runs_have_zero_change() {
        let (_, s1, _) = example_sims(&Topology::ft2000plus());
        assert_eq!(compute_l2_dcmr_change(&s1, &s1).unwrap(), 0.0);
    }

    const IMPORT: &str = "matrix,threads,thread_id,event,value
fig1,4,0,L1_DCA,100
fig1,4,0,L1_DCM,10
fig1,4,0,L2_DCA,10
fig1,4,0,L2_DCM,5
fig1,4,0,FR_INS,4
fig1,4,0,TOT_INS,300
fig1,4,0,TOT_CYC,600
fig1,4,1,L1_DCA,80
fig1,4,1,L1_DCM,8
fig1,4,1,L2_DCA,8
fig1,4,1,L2_DCM,2
fig1,4,1,FR_INS,12
fig1,4,1,TOT_INS,200
fig1,4,1,TOT_CYC,800
fig1,1,0,L1_DCA,180
fig1,1,0,L1_DCM,18
fig1,1,0,L2_DCA,18
fig1,1,0,L2_DCM,4
fig1,1,0,FR_INS,16
";

    #[test]
    fn imported_counters_fill_ipc() {
        let import = CounterImport::from_reader(IMPORT.as_bytes()).unwrap();
        let m = example_matrix();
        let plan = PartitionPlan::rows_static(&m, 4).unwrap();
        let sources = CounterSources {
            imported: Some(&import),
            ..Default::default()
        };
        let fv = build_feature_vector("fig1", &m, &plan, &sources).unwrap();
        // thread 1 has the most cycles
        assert_eq!(fv.TOT_CYC, Some(800.0));
        assert_eq!(fv.IPC, Some(200.0 / 800.0));
        assert_eq!(fv.L2_DCMR, 0.25);
        assert_eq!(fv.FR_INS, 16.0);
        assert_eq!(fv.L2_DCMR_change, 0.25 - 4.0 / 18.0);
        assert!(fv.derived_consistent());
    }

    #[test]
    fn both_sources_need_precedence() {
        let import = CounterImport::from_reader(IMPORT.as_bytes()).unwrap();
        let (plan, s1, st) = example_sims(&Topology::ft2000plus());
        let m = example_matrix();
        let mut sources = CounterSources {
            simulated: Some((&s1, &st)),
            imported: Some(&import),
            precedence: None,
        };
        assert!(matches!(
            build_feature_vector("fig1", &m, &plan, &sources),
            Err(Error::ConflictingCounterSources { .. })
        ));
        sources.precedence = Some(Precedence::Simulated);
        let fv = build_feature_vector("fig1", &m, &plan, &sources).unwrap();
        assert!(fv.IPC.is_none());
        sources.precedence = Some(Precedence::Imported);
        let fv = build_feature_vector("fig1", &m, &plan, &sources).unwrap();
        assert!(fv.IPC.is_some());
        // no matching record: simulator counters apply without a flag
        let fv = build_feature_vector(
            "other",
            &m,
            &plan,
            &CounterSources {
                precedence: None,
                ..sources
            },
        );
        assert!(fv.unwrap().IPC.is_none());
    }

    #[test]
    fn bad_import_rejected() {
        assert!(CounterImport::from_reader("a,b\n1,2\n".as_bytes()).is_err());
        let bad_event = "matrix,threads,thread_id,event,value\nm,2,0,L3_DCA,1\n";
        assert!(CounterImport::from_reader(bad_event.as_bytes()).is_err());
        let bad_tid = "matrix,threads,thread_id,event,value\nm,2,2,L1_DCA,1\n";
        assert!(CounterImport::from_reader(bad_tid.as_bytes()).is_err());
    }

    #[test]
    fn samples_csv_round_trip() {
        let topo = Topology::desk();
        let m = example_matrix();
        let a = simulated_sample("fig1", &m, Format::Csr, &topo, &Placement::Compact, 4).unwrap();
        let b =
            simulated_sample("fig1-csr5", &m, Format::Csr5, &topo, &Placement::Compact, 2).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&[a.clone(), b.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#schema=spmvlab.features/v1\n"));
        let back = read_samples_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }
}
