//! Rules that turn a feature vector into optimization advice.
//!
//! - R1: nonzeros pile up on one thread, switch to CSR5 tiles.
//! - R2: the shared L2 degrades with threads on a row-dense matrix, spread
//!   threads across core-groups.
//! - R3: rows are irregular but balanced, reorder rows for locality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{Format, Operand, PartitionScheme, Placement};
use crate::features::{compute_job_var, FeatureLookup};
use crate::matrix::{CsrMatrix, DEFAULT_OMEGA, DEFAULT_SIGMA};
use crate::sim::{ScalingRun, Topology};
use crate::synth::{default_reorder_window, locality_reorder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "R1-csr5")]
    Csr5,
    #[serde(rename = "R2-private-l2")]
    PrivateL2,
    #[serde(rename = "R3-reorder")]
    Reorder,
}

impl RuleId {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleId::Csr5 => "R1-csr5",
            RuleId::PrivateL2 => "R2-private-l2",
            RuleId::Reorder => "R3-reorder",
        }
    }

    pub fn action(&self) -> &'static str {
        match self {
            RuleId::Csr5 => {
                "convert to CSR5 and partition by tiles to balance nonzeros across threads"
            }
            RuleId::PrivateL2 => {
                "use scatter placement so each thread gets a core-group's L2 to itself"
            }
            RuleId::Reorder => "apply locality-aware row reordering to improve reuse of x",
        }
    }
}

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RuleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R1" | "R1-csr5" => Ok(RuleId::Csr5),
            "R2" | "R2-private-l2" => Ok(RuleId::PrivateL2),
            "R3" | "R3-reorder" => Ok(RuleId::Reorder),
            other => Err(Error::InvalidParameter(format!("unknown rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "<")]
    Below,
}

impl Relation {
    pub fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtLeast => value >= threshold,
            Relation::Above => value > threshold,
            Relation::Below => value < threshold,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::AtLeast => ">=",
            Relation::Above => ">",
            Relation::Below => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub feature: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
}

impl Evidence {
    pub fn holds(&self) -> bool {
        self.relation.holds(self.value, self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub rule: RuleId,
    pub action: String,
    pub evidence: Vec<Evidence>,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub job_var: f64,
    pub l2_dcmr_change: f64,
    pub nnz_avg: f64,
    pub nnz_var: f64,
    /// Evidence within this relative distance of its threshold is weak.
    pub margin: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            job_var: 0.45,
            l2_dcmr_change: 0.02,
            nnz_avg: 8.0,
            nnz_var: 10.0,
            margin: 0.10,
        }
    }
}

struct Checker<'a, F: FeatureLookup + ?Sized> {
    fv: &'a F,
}

impl<F: FeatureLookup + ?Sized> Checker<'_, F> {
    fn check(&self, feature: &str, relation: Relation, threshold: f64) -> Result<Option<Evidence>> {
        let value = self
            .fv
            .feature(feature)
            .ok_or_else(|| Error::MissingFeature(feature.to_string()))?;
        Ok(relation.holds(value, threshold).then(|| Evidence {
            feature: feature.to_string(),
            value,
            threshold,
            relation,
        }))
    }
}

fn recommend(rule: RuleId, evidence: Vec<Evidence>, margin: f64) -> Recommendation {
    let weak = evidence
        .iter()
        .any(|e| (e.value - e.threshold).abs() <= margin * e.threshold.abs());
    Recommendation {
        rule,
        action: rule.action().to_string(),
        evidence,
        confidence: if weak {
            Confidence::Weak
        } else {
            Confidence::Strong
        },
    }
}

/// Fired rules in R1, R2, R3 order. Conditions short-circuit, so a feature
/// is only required once every earlier condition of its rule holds.
pub fn advise<F: FeatureLookup + ?Sized>(fv: &F, th: &Thresholds) -> Result<Vec<Recommendation>> {
    let c = Checker { fv };
    let mut out = Vec::new();

    let r1 = c.check("job_var", Relation::AtLeast, th.job_var)?;
    if let Some(e) = r1.clone() {
        out.push(recommend(RuleId::Csr5, vec![e], th.margin));
    }

    if let Some(change) = c.check("L2_DCMR_change", Relation::Above, th.l2_dcmr_change)? {
        if let Some(avg) = c.check("nnz_avg", Relation::AtLeast, th.nnz_avg)? {
            out.push(recommend(RuleId::PrivateL2, vec![change, avg], th.margin));
        }
    }

    if r1.is_none() {
        if let Some(var) = c.check("nnz_var", Relation::AtLeast, th.nnz_var)? {
            let balanced = c
                .check("job_var", Relation::Below, th.job_var)?
                .expect("R1 did not fire");
            out.push(recommend(RuleId::Reorder, vec![var, balanced], th.margin));
        }
    }
    Ok(out)
}

/// One simulated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigOutcome {
    pub format: Format,
    pub scheme: PartitionScheme,
    pub placement: Placement,
    pub reordered: bool,
    pub n_threads: usize,
    pub job_var: f64,
    pub l2_dca: u64,
    pub l2_dcm: u64,
    pub modeled_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rule: RuleId,
    pub before: ConfigOutcome,
    pub after: ConfigOutcome,
}

fn outcome(
    m: &CsrMatrix,
    format: Format,
    placement: Placement,
    reordered: bool,
    topo: &Topology,
) -> Result<ConfigOutcome> {
    let n_threads = topo.group_size;
    let csr5;
    let op = match format {
        Format::Csr => Operand::Csr(m),
        Format::Csr5 => {
            csr5 = m.to_csr5(DEFAULT_OMEGA, DEFAULT_SIGMA)?;
            Operand::Csr5(&csr5)
        }
    };
    let run = ScalingRun::new(op, topo, &placement, n_threads)?;
    Ok(ConfigOutcome {
        format,
        scheme: run.plan.scheme,
        placement,
        reordered,
        n_threads,
        job_var: compute_job_var(&run.plan)?,
        l2_dca: run.parallel.totals.l2_dca,
        l2_dcm: run.parallel.totals.l2_dcm,
        modeled_speedup: run.modeled_speedup(),
    })
}

/// Simulates the baseline (CSR, rows-static, compact, one thread per core of
/// a group) and the configuration `rule` recommends.
pub fn evaluate_recommendation(
    m: &CsrMatrix,
    rule: RuleId,
    topo: &Topology,
) -> Result<EvaluationReport> {
    let before = outcome(m, Format::Csr, Placement::Compact, false, topo)?;
    let after = match rule {
        RuleId::Csr5 => outcome(m, Format::Csr5, Placement::Compact, false, topo)?,
        RuleId::PrivateL2 => outcome(m, Format::Csr, Placement::Scatter, false, topo)?,
        RuleId::Reorder => {
            let (reordered, _) = locality_reorder(m, default_reorder_window(topo))?;
            outcome(&reordered, Format::Csr, Placement::Compact, true, topo)?
        }
    };
    Ok(EvaluationReport {
        rule,
        before,
        after,
    })
}

/// Plain-text table of recommendations.
pub fn render_table(recs: &[Recommendation]) -> String {
    if recs.is_empty() {
        return "  no action\n".to_string();
    }
    let mut out = String::new();
    for r in recs {
        let confidence = match r.confidence {
            Confidence::Strong => "strong",
            Confidence::Weak => "weak",
        };
        out.push_str(&format!(
            "  {:<14} {:<7} {}\n",
            r.rule.as_str(),
            confidence,
            r.action
        ));
        for e in &r.evidence {
            out.push_str(&format!(
                "  {:<14} {:<7} {} = {:.4} {} {}\n",
                "",
                "",
                e.feature,
                e.value,
                e.relation.symbol(),
                e.threshold
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn fv(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    fn rules(v: &BTreeMap<String, f64>) -> Vec<RuleId> {
        advise(v, &Thresholds::default())
            .unwrap()
            .into_iter()
            .map(|r| r.rule)
            .collect()
    }

    #[test]
    fn rules_co_fire_in_order() {
        let v = fv(&[
            ("job_var", 0.9),
            ("L2_DCMR_change", 0.1),
            ("nnz_avg", 20.0),
            ("nnz_var", 50.0),
        ]);
        assert_eq!(rules(&v), vec![RuleId::Csr5, RuleId::PrivateL2]);
        let v = fv(&[
            ("job_var", 0.3),
            ("L2_DCMR_change", 0.1),
            ("nnz_avg", 20.0),
            ("nnz_var", 50.0),
        ]);
        assert_eq!(rules(&v), vec![RuleId::PrivateL2, RuleId::Reorder]);
    }

    #[test]
    fn missing_feature_named() {
        let v = fv(&[("job_var", 0.3), ("L2_DCMR_change", 0.1)]);
        let err = advise(&v, &Thresholds::default()).unwrap_err();
        assert!(matches!(err, Error::MissingFeature(n) if n == "nnz_avg"));
    }

    #[test]
    fn evidence_holds_and_confidence() {
        let v = fv(&[("job_var", 0.46), ("L2_DCMR_change", 0.0)]);
        let recs = advise(&v, &Thresholds::default()).unwrap();
        assert_eq!(recs[0].confidence, Confidence::Weak);
        assert!(recs.iter().flat_map(|r| &r.evidence).all(Evidence::holds));
        let v = fv(&[("job_var", 0.99), ("L2_DCMR_change", 0.0)]);
        assert_eq!(
            advise(&v, &Thresholds::default()).unwrap()[0].confidence,
            Confidence::Strong
        );
    }

    #[test]
    fn rule_ids_serialize_with_names() {
        assert_eq!(
            serde_json::to_string(&RuleId::PrivateL2).unwrap(),
            "\"R2-private-l2\""
        );
        assert_eq!("R3".parse::<RuleId>().unwrap(), RuleId::Reorder);
    }
}
