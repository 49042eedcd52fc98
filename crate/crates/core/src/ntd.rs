//! Normative target distributions: class partitions per item attribute,
//! target proportions, per-list quotas, and the analytic target values (NTV).

use serde::{Deserialize, Serialize};

use crate::corpus::{Item, PartyLabel};
use crate::error::{Error, Result};
use crate::metrics::{gini_from_mass, ild_from_counts, MetricValues};

/// Which item attribute a dimension partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    PartyBucket,
    SentimentBin,
    Category,
    ComplexityBin,
    StoryCluster,
}

impl DimensionKind {
    /// Stable key used by metric reports (`gini`/`ild` map keys).
    pub fn standard_key(&self) -> &'static str {
        match self {
            DimensionKind::PartyBucket => "party",
            DimensionKind::SentimentBin => "sentiment",
            DimensionKind::Category => "category",
            DimensionKind::ComplexityBin => "complexity",
            DimensionKind::StoryCluster => "story_cluster",
        }
    }
}

/// One class of a dimension: a label, a story-cluster id, or a real interval.
/// Intervals are half-open `[lo, hi)`; the final interval of a dimension is
/// closed so the attribute's full range stays classifiable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassDescriptor {
    Label(String),
    Cluster(u64),
    Interval([f64; 2]),
}

impl ClassDescriptor {
    pub fn display(&self) -> String {
        match self {
            ClassDescriptor::Label(s) => s.clone(),
            ClassDescriptor::Cluster(c) => c.to_string(),
            ClassDescriptor::Interval([lo, hi]) => format!("[{lo},{hi}]"),
        }
    }
}

/// An ordered class partition over one item attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: DimensionKind,
    pub classes: Vec<ClassDescriptor>,
}

impl Dimension {
    pub fn party_buckets() -> Dimension {
        Dimension {
            name: "party".to_string(),
            kind: DimensionKind::PartyBucket,
            classes: PartyLabel::ALL
                .iter()
                .map(|l| ClassDescriptor::Label(l.as_str().to_string()))
                .collect(),
        }
    }

    /// Bins from consecutive edges; `edges` must be strictly increasing.
    pub fn sentiment_bins(edges: &[f64]) -> Dimension {
        Dimension {
            name: "sentiment".to_string(),
            kind: DimensionKind::SentimentBin,
            classes: interval_classes(edges),
        }
    }

    pub fn complexity_bins(edges: &[f64]) -> Dimension {
        Dimension {
            name: "complexity".to_string(),
            kind: DimensionKind::ComplexityBin,
            classes: interval_classes(edges),
        }
    }

    pub fn categories(names: impl IntoIterator<Item = String>) -> Dimension {
        Dimension {
            name: "category".to_string(),
            kind: DimensionKind::Category,
            classes: names.into_iter().map(ClassDescriptor::Label).collect(),
        }
    }

    pub fn story_clusters(ids: impl IntoIterator<Item = u64>) -> Dimension {
        Dimension {
            name: "story_cluster".to_string(),
            kind: DimensionKind::StoryCluster,
            classes: ids.into_iter().map(ClassDescriptor::Cluster).collect(),
        }
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.display()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config(format!(
                "dimension `{}` has no classes",
                self.name
            )));
        }
        let intervals: Vec<[f64; 2]> = self
            .classes
            .iter()
            .filter_map(|c| match c {
                ClassDescriptor::Interval(iv) => Some(*iv),
                _ => None,
            })
            .collect();
        if !intervals.is_empty() {
            if intervals.len() != self.classes.len() {
                return Err(Error::Config(format!(
                    "dimension `{}` mixes interval and non-interval classes",
                    self.name
                )));
            }
            for w in intervals.windows(2) {
                if (w[0][1] - w[1][0]).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "dimension `{}` intervals are not contiguous",
                        self.name
                    )));
                }
            }
            if intervals.iter().any(|[lo, hi]| lo >= hi) {
                return Err(Error::Config(format!(
                    "dimension `{}` has an empty interval",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Class index of the item under this dimension. Errors when the item
    /// lacks the attribute or falls outside every class; callers filter such
    /// items out of the pool.
    pub fn assign_class(&self, item: &Item) -> Result<usize> {
        match self.kind {
            DimensionKind::PartyBucket => {
                let want = item.party_label.as_str();
                self.position_of_label(want).ok_or_else(|| Error::UnknownClass(
                    want.to_string(),
                    self.name.clone(),
                ))
            }
            DimensionKind::Category => {
                if item.category.is_empty() {
                    return Err(self.missing(item));
                }
                self.position_of_label(&item.category).ok_or_else(|| {
                    Error::UnknownClass(item.category.clone(), self.name.clone())
                })
            }
            DimensionKind::SentimentBin => {
                let s = item.sentiment.ok_or_else(|| self.missing(item))?;
                self.interval_class(s, item)
            }
            DimensionKind::ComplexityBin => {
                let c = item.complexity.ok_or_else(|| self.missing(item))?;
                self.interval_class(c, item)
            }
            DimensionKind::StoryCluster => {
                let cluster = item.story_cluster.ok_or_else(|| self.missing(item))?;
                self.classes
                    .iter()
                    .position(|c| matches!(c, ClassDescriptor::Cluster(id) if *id == cluster))
                    .ok_or_else(|| Error::UnknownClass(cluster.to_string(), self.name.clone()))
            }
        }
    }

    fn position_of_label(&self, label: &str) -> Option<usize> {
        self.classes
            .iter()
            .position(|c| matches!(c, ClassDescriptor::Label(l) if l == label))
    }

    fn interval_class(&self, value: f64, item: &Item) -> Result<usize> {
        let last = self.classes.len() - 1;
        for (idx, class) in self.classes.iter().enumerate() {
            if let ClassDescriptor::Interval([lo, hi]) = class {
                let inside = if idx == last {
                    value >= *lo && value <= *hi
                } else {
                    value >= *lo && value < *hi
                };
                if inside {
                    return Ok(idx);
                }
            }
        }
        Err(Error::MissingAttribute {
            item_id: item.item_id.clone(),
            attribute: format!("{} (value {value} out of range)", self.name),
        })
    }

    fn missing(&self, item: &Item) -> Error {
        Error::MissingAttribute {
            item_id: item.item_id.clone(),
            attribute: self.name.clone(),
        }
    }
}

fn interval_classes(edges: &[f64]) -> Vec<ClassDescriptor> {
    edges
        .windows(2)
        .map(|w| ClassDescriptor::Interval([w[0], w[1]]))
        .collect()
}

/// One NTD entry: a dimension plus its target proportions and weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtdDimension {
    #[serde(flatten)]
    pub dimension: Dimension,
    pub proportions: Vec<f64>,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

/// A normative target distribution over one or more dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ntd {
    pub dimensions: Vec<NtdDimension>,
}

impl Ntd {
    /// Default news targets: party 15/15/15/15/40 over the five buckets and
    /// sentiment 20/30/30/20 over four bins.
    pub fn default_news() -> Ntd {
        Ntd {
            dimensions: vec![
                NtdDimension {
                    dimension: Dimension::party_buckets(),
                    proportions: vec![0.15, 0.15, 0.15, 0.15, 0.40],
                    weight: 1.0,
                },
                NtdDimension {
                    dimension: Dimension::sentiment_bins(&[-1.0, -0.5, 0.0, 0.5, 1.0]),
                    proportions: vec![0.20, 0.30, 0.30, 0.20],
                    weight: 1.0,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.is_empty() {
            return Err(Error::Config("NTD has no dimensions".to_string()));
        }
        for nd in &self.dimensions {
            nd.dimension.validate()?;
            if nd.proportions.len() != nd.dimension.class_count() {
                return Err(Error::Config(format!(
                    "dimension `{}`: {} proportions for {} classes",
                    nd.dimension.name,
                    nd.proportions.len(),
                    nd.dimension.class_count()
                )));
            }
            if nd.proportions.iter().any(|p| *p < 0.0) {
                return Err(Error::Config(format!(
                    "dimension `{}` has a negative proportion",
                    nd.dimension.name
                )));
            }
            let sum: f64 = nd.proportions.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "dimension `{}` proportions sum to {sum}, expected 1",
                    nd.dimension.name
                )));
            }
            if nd.weight <= 0.0 {
                return Err(Error::Config(format!(
                    "dimension `{}` weight must be positive",
                    nd.dimension.name
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Ntd> {
        let ntd: Ntd = serde_json::from_str(json)?;
        ntd.validate()?;
        Ok(ntd)
    }

    pub fn quotas(&self, list_size: usize) -> QuotaPlan {
        QuotaPlan {
            list_size,
            per_dimension: self
                .dimensions
                .iter()
                .map(|nd| largest_remainder(list_size, &nd.proportions))
                .collect(),
        }
    }
}

/// Integer quotas per dimension class, each summing to the list size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaPlan {
    pub list_size: usize,
    pub per_dimension: Vec<Vec<usize>>,
}

/// Largest-remainder apportionment of `n` slots over `proportions`, ties
/// broken by the lower class index.
pub fn largest_remainder(n: usize, proportions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|p| n as f64 * p).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - quotas[a] as f64;
        let rb = exact[b] - quotas[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut left = n.saturating_sub(assigned);
    for idx in order {
        if left == 0 {
            break;
        }
        quotas[idx] += 1;
        left -= 1;
    }
    // Float-noise overshoot: trim from the smallest remainders.
    let mut over: usize = quotas.iter().sum::<usize>().saturating_sub(n);
    if over > 0 {
        let mut trim: Vec<usize> = (0..proportions.len()).collect();
        trim.sort_by(|&a, &b| {
            let ra = exact[a] - quotas[a] as f64;
            let rb = exact[b] - quotas[b] as f64;
            ra.partial_cmp(&rb).unwrap().then(b.cmp(&a))
        });
        for idx in trim {
            if over == 0 {
                break;
            }
            if quotas[idx] > 0 {
                quotas[idx] -= 1;
                over -= 1;
            }
        }
    }
    quotas
}

/// Configured targets for the divergence metrics and AUC in the NTV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NtvTargets {
    pub activation: f64,
    pub cat_calibration: f64,
    pub comp_calibration: f64,
    pub fragmentation: f64,
    pub alt_voices: f64,
    pub representation: f64,
    pub auc: f64,
}

impl Default for NtvTargets {
    fn default() -> Self {
        NtvTargets {
            activation: 1.0,
            cat_calibration: 0.0,
            comp_calibration: 0.0,
            fragmentation: 0.0,
            alt_voices: 0.0,
            representation: 1.0,
            auc: 1.0,
        }
    }
}

/// Analytic normative target values: the metric scores of a hypothetical list
/// whose class counts equal the quotas. Dimensions not covered by the NTD get
/// ideal bounds (Gini 0, ILD 1); divergences come from the configured targets.
pub fn ntv(ntd: &Ntd, list_size: usize, targets: &NtvTargets) -> MetricValues {
    let quotas = ntd.quotas(list_size);
    let mut values = MetricValues {
        activation: Some(targets.activation),
        cat_calibration: Some(targets.cat_calibration),
        comp_calibration: Some(targets.comp_calibration),
        fragmentation: Some(targets.fragmentation),
        alt_voices: Some(targets.alt_voices),
        representation: Some(targets.representation),
        auc: Some(targets.auc),
        ..MetricValues::default()
    };
    for key in ["category", "sentiment", "party"] {
        values.gini.insert(key.to_string(), 0.0);
        values.ild.insert(key.to_string(), 1.0);
    }
    for (nd, counts) in ntd.dimensions.iter().zip(&quotas.per_dimension) {
        let key = nd.dimension.kind.standard_key().to_string();
        let mass: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / list_size as f64)
            .collect();
        values.gini.insert(key.clone(), gini_from_mass(&mass));
        if let Some(ild) = ild_from_counts(counts) {
            values.ild.insert(key, ild);
        }
    }
    values
}
