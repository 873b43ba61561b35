//! Manual pruning: keep only tree nodes that clear both an accuracy and a
//! coverage threshold, and export them as conjunctive skip criteria.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cart::{DecisionTree, NodeRef, TreeNode};
use crate::error::{Error, Result};
use crate::features::{Feature, FeatureKind, FeatureVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Ge,
    Eq,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        }
    }
}

/// One threshold test on a raw feature value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: Feature,
    pub op: Comparator,
    pub value: f64,
}

impl Predicate {
    pub fn new(feature: Feature, op: Comparator, value: f64) -> Self {
        Predicate { feature, op, value }
    }

    pub fn holds(&self, features: &FeatureVector) -> bool {
        let x = features.get(self.feature);
        match self.op {
            Comparator::Lt => x < self.value,
            Comparator::Ge => x >= self.value,
            Comparator::Eq => x == self.value,
        }
    }

    fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        // Longest operators first.
        const OPS: [(&str, Comparator); 5] = [
            (">=", Comparator::Ge),
            ("≥", Comparator::Ge),
            ("==", Comparator::Eq),
            ("<", Comparator::Lt),
            ("=", Comparator::Eq),
        ];
        let (pos, sym, op) = OPS
            .iter()
            .filter_map(|&(sym, op)| text.find(sym).map(|p| (p, sym, op)))
            .min_by_key(|&(p, sym, _)| (p, usize::MAX - sym.len()))
            .ok_or_else(|| Error::Config(format!("predicate `{text}` has no comparator")))?;
        let feature: Feature = text[..pos].trim().parse()?;
        let value_text = text[pos + sym.len()..].trim();
        let value: f64 = value_text
            .parse()
            .map_err(|_| Error::Config(format!("invalid threshold `{value_text}` in `{text}`")))?;
        Ok(Predicate { feature, op, value })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.feature, self.op.symbol(), self.value)
    }
}

/// A conjunction of predicates that, when true for a CU at `cu_depth`,
/// keeps the CU whole without testing the split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipCriterion {
    pub cu_depth: u8,
    pub predicates: Vec<Predicate>,
    pub source_node: Option<NodeRef>,
    /// Training samples satisfying the conjunction.
    pub covered: u64,
    /// Of those, samples whose label is not-split.
    pub not_split: u64,
    /// Training samples of the whole depth dataset.
    pub root_total: u64,
    pub accuracy: f64,
    pub coverage: f64,
}

impl SkipCriterion {
    /// A criterion without training statistics (hand-written rules).
    pub fn from_predicates(cu_depth: u8, predicates: Vec<Predicate>) -> Self {
        SkipCriterion {
            cu_depth,
            predicates,
            source_node: None,
            covered: 0,
            not_split: 0,
            root_total: 0,
            accuracy: 0.0,
            coverage: 0.0,
        }
    }

    fn from_node(
        tree: &DecisionTree,
        at: NodeRef,
        node: &TreeNode,
        predicates: Vec<Predicate>,
    ) -> Self {
        SkipCriterion {
            cu_depth: tree.cu_depth,
            predicates,
            source_node: Some(at),
            covered: node.total(),
            not_split: node.counts[0],
            root_total: tree.root_total(),
            accuracy: node.accuracy,
            coverage: node.coverage,
        }
    }

    pub fn matches(&self, features: &FeatureVector) -> bool {
        self.predicates.iter().all(|p| p.holds(features))
    }

    pub fn conjunction(&self) -> String {
        let parts: Vec<String> = self.predicates.iter().map(Predicate::to_string).collect();
        parts.join(" & ")
    }
}

/// Minimum accuracy and coverage, both in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneThresholds {
    pub min_accuracy: f64,
    pub min_coverage: f64,
}

impl Default for PruneThresholds {
    fn default() -> Self {
        PruneThresholds {
            min_accuracy: 97.0,
            min_coverage: 17.0,
        }
    }
}

impl PruneThresholds {
    pub fn new(min_accuracy: f64, min_coverage: f64) -> Result<Self> {
        let t = PruneThresholds {
            min_accuracy,
            min_coverage,
        };
        let ok = |v: f64| v > 0.0 && v <= 100.0;
        if ok(min_accuracy) && ok(min_coverage) {
            Ok(t)
        } else {
            Err(Error::domain("thresholds must lie in (0, 100]"))
        }
    }

    /// Inclusive comparison on percentages of node statistics.
    pub fn admits(&self, accuracy: f64, coverage: f64) -> bool {
        accuracy * 100.0 >= self.min_accuracy && coverage * 100.0 >= self.min_coverage
    }
}

#[derive(Default)]
struct Bounds {
    lo: Option<f64>,
    hi: Option<f64>,
}

/// Root-to-node conditions of `at`, merged per feature (the tighter bound
/// wins) and kept in order of first appearance. Integer and boolean
/// features whose bounds admit exactly one value become equalities.
pub fn path_conjunction(tree: &DecisionTree, at: NodeRef) -> Result<Vec<Predicate>> {
    let mut order: Vec<Feature> = Vec::new();
    let mut bounds: Vec<Bounds> = Feature::ALL.iter().map(|_| Bounds::default()).collect();
    let mut node = &tree.root;
    for left in at.path() {
        let (Some(split), Some((l, r))) = (node.split, node.children()) else {
            return Err(Error::domain(format!(
                "node ({}, {}) is not in the tree",
                at.depth, at.position
            )));
        };
        let feature = Feature::from_id(split.feature).ok_or_else(|| {
            Error::Config(format!("split on unknown feature id {}", split.feature))
        })?;
        if !order.contains(&feature) {
            order.push(feature);
        }
        let b = &mut bounds[feature.id()];
        if left {
            b.hi = Some(b.hi.map_or(split.threshold, |h| h.min(split.threshold)));
            node = l;
        } else {
            b.lo = Some(b.lo.map_or(split.threshold, |v| v.max(split.threshold)));
            node = r;
        }
    }

    let mut out = Vec::new();
    for f in order {
        let b = &bounds[f.id()];
        let domain = match f.kind() {
            FeatureKind::Boolean => Some((0i64, 1i64)),
            FeatureKind::Integer { min, max } => Some((min, max)),
            FeatureKind::Continuous => None,
        };
        if let Some((min, max)) = domain {
            let admitted: Vec<i64> = (min..=max)
                .filter(|&k| {
                    b.lo.is_none_or(|lo| k as f64 >= lo) && b.hi.is_none_or(|hi| (k as f64) < hi)
                })
                .collect();
            if let [only] = admitted[..] {
                out.push(Predicate::new(f, Comparator::Eq, only as f64));
                continue;
            }
        }
        if let Some(lo) = b.lo {
            out.push(Predicate::new(f, Comparator::Ge, lo));
        }
        if let Some(hi) = b.hi {
            out.push(Predicate::new(f, Comparator::Lt, hi));
        }
    }
    Ok(out)
}

/// Every non-root node whose majority is not-split and which clears both
/// thresholds, as a skip criterion. An empty result means the thresholds
/// have to be lowered.
pub fn harvest_criteria(tree: &DecisionTree, thresholds: &PruneThresholds) -> Vec<SkipCriterion> {
    tree.nodes_bfs()
        .into_iter()
        .filter(|(at, n)| {
            *at != NodeRef::ROOT && !n.majority && thresholds.admits(n.accuracy, n.coverage)
        })
        .map(|(at, n)| {
            let preds = path_conjunction(tree, at).expect("node taken from the tree");
            SkipCriterion::from_node(tree, at, n, preds)
        })
        .collect()
}

/// One row of the threshold-setting plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub index: usize,
    pub node: NodeRef,
    pub coverage_pct: f64,
    pub accuracy_pct: f64,
    /// Majority class of the node (`true` = split).
    pub majority_split: bool,
    pub samples: u64,
}

/// Coverage and accuracy of every node in breadth-first order.
pub fn threshold_plot_data(tree: &DecisionTree) -> Vec<PlotRow> {
    tree.nodes_bfs()
        .into_iter()
        .enumerate()
        .map(|(index, (at, n))| PlotRow {
            index,
            node: at,
            coverage_pct: n.coverage * 100.0,
            accuracy_pct: n.accuracy * 100.0,
            majority_split: n.majority,
            samples: n.total(),
        })
        .collect()
}

pub fn plot_rows_csv(rows: &[PlotRow]) -> String {
    let mut s = String::from(
        "index,node_depth,node_position,coverage_pct,accuracy_pct,majority_split,samples\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.index,
            r.node.depth,
            r.node.position,
            r.coverage_pct,
            r.accuracy_pct,
            r.majority_split as u8,
            r.samples
        ));
    }
    s
}

/// Whitespace-separated columns for gnuplot, e.g.
/// `plot "f.dat" using 1:4 with linespoints, "" using 1:5 with linespoints`.
pub fn plot_rows_gnuplot(rows: &[PlotRow], title: &str) -> String {
    let mut s = format!("# {title}\n# index node_depth node_position coverage_pct accuracy_pct majority_split samples\n");
    for r in rows {
        s.push_str(&format!(
            "{} {} {} {:.6} {:.6} {} {}\n",
            r.index,
            r.node.depth,
            r.node.position,
            r.coverage_pct,
            r.accuracy_pct,
            r.majority_split as u8,
            r.samples
        ));
    }
    s
}

/// Picks one criterion per depth: highest coverage, then higher accuracy,
/// then fewer predicates.
pub fn select_per_depth(per_depth: &[Vec<SkipCriterion>]) -> [Option<SkipCriterion>; 3] {
    let mut out: [Option<SkipCriterion>; 3] = Default::default();
    for (d, slot) in out.iter_mut().enumerate() {
        let Some(list) = per_depth.get(d) else {
            continue;
        };
        let mut best: Option<&SkipCriterion> = None;
        for c in list {
            let better = match best {
                None => true,
                Some(b) => {
                    let cov = cmp_ratio(c.covered, c.root_total, b.covered, b.root_total);
                    let acc = cmp_ratio(c.not_split, c.covered, b.not_split, b.covered);
                    cov.then(acc)
                        .then(b.predicates.len().cmp(&c.predicates.len()))
                        .is_gt()
                }
            };
            if better {
                best = Some(c);
            }
        }
        *slot = best.cloned();
    }
    out
}

fn cmp_ratio(a_num: u64, a_den: u64, b_num: u64, b_den: u64) -> std::cmp::Ordering {
    (a_num as u128 * b_den as u128).cmp(&(b_num as u128 * a_den as u128))
}

/// The criteria file: `#` metadata lines then one criterion per line as
/// `depth | conjunction | accuracy | coverage | covered | not_split | total | node`.
/// Only the first two fields are required when reading.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriteriaFile {
    pub thresholds: Option<PruneThresholds>,
    pub trained_on: Vec<String>,
    pub criteria: Vec<SkipCriterion>,
}

const CRITERIA_MAGIC: &str = "# cusplit skip criteria";

impl CriteriaFile {
    pub fn render(&self) -> String {
        let mut s = format!("{CRITERIA_MAGIC}\n");
        if let Some(t) = self.thresholds {
            s.push_str(&format!(
                "# min_accuracy={} min_coverage={}\n",
                t.min_accuracy, t.min_coverage
            ));
        }
        s.push_str(&format!("# trained_on={}\n", self.trained_on.join(",")));
        s.push_str(
            "# depth | criterion | accuracy | coverage | covered | not_split | total | node\n",
        );
        for c in &self.criteria {
            let node = c.source_node.map_or_else(
                || "-".to_string(),
                |n| format!("{}:{}", n.depth, n.position),
            );
            s.push_str(&format!(
                "{} | {} | {} | {} | {} | {} | {} | {}\n",
                c.cu_depth,
                c.conjunction(),
                c.accuracy,
                c.coverage,
                c.covered,
                c.not_split,
                c.root_total,
                node
            ));
        }
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut file = CriteriaFile::default();
        let mut accuracy = None;
        let mut coverage = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    match tok.split_once('=') {
                        Some(("min_accuracy", v)) => accuracy = v.parse().ok(),
                        Some(("min_coverage", v)) => coverage = v.parse().ok(),
                        Some(("trained_on", v)) => {
                            file.trained_on = v
                                .split(',')
                                .filter(|s| !s.is_empty())
                                .map(String::from)
                                .collect()
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let c = parse_criterion_line(line)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            file.criteria.push(c);
        }
        if let (Some(a), Some(c)) = (accuracy, coverage) {
            file.thresholds =
                Some(PruneThresholds::new(a, c).map_err(|e| Error::parse(path, 2, e.to_string()))?);
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(path, &text)
    }
}

/// Parses a conjunction such as `Bits < 50, PM = 0 & RDC < 145`.
pub fn parse_conjunction(text: &str) -> Result<Vec<Predicate>> {
    let preds = text
        .split(['&', ','])
        .map(Predicate::parse)
        .collect::<Result<Vec<_>>>()?;
    if preds.is_empty() {
        return Err(Error::Config("empty conjunction".into()));
    }
    Ok(preds)
}

fn parse_criterion_line(line: &str) -> Result<SkipCriterion> {
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    if fields.len() < 2 {
        return Err(Error::Config("expected `depth | criterion ...`".into()));
    }
    let cu_depth: u8 = fields[0]
        .parse()
        .ok()
        .filter(|d| *d <= 2)
        .ok_or_else(|| Error::Config(format!("invalid CU depth `{}`", fields[0])))?;
    let mut c = SkipCriterion::from_predicates(cu_depth, parse_conjunction(fields[1])?);
    let num =
        |i: usize| -> Result<Option<&str>> { Ok(fields.get(i).copied().filter(|s| !s.is_empty())) };
    let bad = |what: &str, v: &str| Error::Config(format!("invalid {what} `{v}`"));
    if let Some(v) = num(2)? {
        c.accuracy = v.parse().map_err(|_| bad("accuracy", v))?;
    }
    if let Some(v) = num(3)? {
        c.coverage = v.parse().map_err(|_| bad("coverage", v))?;
    }
    if let Some(v) = num(4)? {
        c.covered = v.parse().map_err(|_| bad("covered", v))?;
    }
    if let Some(v) = num(5)? {
        c.not_split = v.parse().map_err(|_| bad("not_split", v))?;
    }
    if let Some(v) = num(6)? {
        c.root_total = v.parse().map_err(|_| bad("total", v))?;
    }
    if let Some(v) = num(7)? {
        if v != "-" {
            let (d, p) = v.split_once(':').ok_or_else(|| bad("node", v))?;
            c.source_node = Some(NodeRef {
                depth: d.parse().map_err(|_| bad("node", v))?,
                position: p.parse().map_err(|_| bad("node", v))?,
            });
        }
    }
    Ok(c)
}
