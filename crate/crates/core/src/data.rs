//! Labelled datasets, empirical class marginals and priors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    /// Accepts `1` / `-1` (and `0` is rejected).
    pub fn from_f64(y: f64) -> Result<Self> {
        if y == 1.0 {
            Ok(Label::Pos)
        } else if y == -1.0 {
            Ok(Label::Neg)
        } else {
            Err(Error::invalid(format!("label must be -1 or 1, got {y}")))
        }
    }
}

impl From<Label> for i8 {
    fn from(y: Label) -> i8 {
        match y {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;
    fn try_from(y: i8) -> Result<Self> {
        Label::from_f64(y as f64)
    }
}

/// A finite labelled sample with optional weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<Label>,
    weights: Option<Vec<f64>>,
}

impl LabeledDataset {
    /// Validates shapes, finiteness, weights (non-negative, summing to 1
    /// within 1e−12) and the presence of both classes.
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<Label>, weights: Option<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if points.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::invalid("points must have dimension at least 1"));
        }
        if let Some(i) = points.iter().position(|p| p.len() != d) {
            return Err(Error::invalid(format!("point {i} has dimension {} (expected {d})", points[i].len())));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        if let Some(w) = &weights {
            if w.len() != points.len() {
                return Err(Error::invalid("weights length differs from points length"));
            }
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::invalid("weights must be finite and non-negative"));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
            }
        }
        if !labels.contains(&Label::Pos) {
            return Err(Error::EmptyClass("positive"));
        }
        if !labels.contains(&Label::Neg) {
            return Err(Error::EmptyClass("negative"));
        }
        Ok(Self {
            points,
            labels,
            weights,
        })
    }

    /// Like [`LabeledDataset::new`] but rescales the weights to sum to 1.
    pub fn with_raw_weights(points: Vec<Vec<f64>>, labels: Vec<Label>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid("weights must have a positive finite sum"));
        }
        Self::new(points, labels, Some(weights.iter().map(|w| w / total).collect()))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of example `i` (uniform when no weights are stored).
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.points.len() as f64,
        }
    }

    /// Same labels and weights, new points.
    pub fn with_points(&self, points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(points, self.labels.clone(), self.weights.clone())
    }

    /// Reads the CSV layout `x0,...,x{d-1},y[,w]`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let y_col = names
            .iter()
            .position(|h| *h == "y")
            .ok_or_else(|| Error::invalid("dataset CSV has no 'y' column"))?;
        let w_col = names.iter().position(|h| *h == "w");
        for (k, name) in names[..y_col].iter().enumerate() {
            if *name != format!("x{k}") {
                return Err(Error::invalid(format!("expected column x{k}, found '{name}'")));
            }
        }
        if y_col == 0 {
            return Err(Error::invalid("dataset CSV has no feature columns"));
        }
        let (mut points, mut labels, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .ok_or_else(|| Error::invalid("short CSV row"))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad number in column {k}: {e}")))
            };
            points.push((0..y_col).map(parse).collect::<Result<Vec<_>>>()?);
            labels.push(Label::from_f64(parse(y_col)?)?);
            if let Some(w) = w_col {
                weights.push(parse(w)?);
            }
        }
        if w_col.is_some() {
            Self::with_raw_weights(points, labels, weights)
        } else {
            Self::new(points, labels, None)
        }
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        if self.weights.is_some() {
            header.push("w".into());
        }
        writer.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.points[i].iter().map(|v| v.to_string()).collect();
            row.push(i8::from(self.labels[i]).to_string());
            if let Some(w) = &self.weights {
                row.push(w[i].to_string());
            }
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// A finitely supported probability measure with distinct support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginalDto")]
pub struct EmpiricalMarginal {
    support: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

#[derive(Deserialize)]
struct MarginalDto {
    support: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

impl TryFrom<MarginalDto> for EmpiricalMarginal {
    type Error = Error;
    fn try_from(dto: MarginalDto) -> Result<Self> {
        EmpiricalMarginal::new(dto.support, dto.mass)
    }
}

fn point_key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl EmpiricalMarginal {
    /// Merges duplicate points (summing their mass, first occurrence keeps its
    /// position) and normalises the total mass to 1.
    pub fn new(support: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("marginal has empty support"));
        }
        if support.len() != mass.len() {
            return Err(Error::invalid("support and mass lengths differ"));
        }
        let d = support[0].len();
        if d == 0 || support.iter().any(|x| x.len() != d) {
            return Err(Error::invalid("support points must share a positive dimension"));
        }
        if support.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite support coordinate"));
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid("mass must be finite and non-negative"));
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("marginal has zero total mass"));
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(support.len());
        let mut merged_support = Vec::with_capacity(support.len());
        let mut merged_mass: Vec<f64> = Vec::with_capacity(support.len());
        for (x, m) in support.into_iter().zip(mass) {
            match index.get(&point_key(&x)) {
                Some(&k) => merged_mass[k] += m,
                None => {
                    index.insert(point_key(&x), merged_support.len());
                    merged_support.push(x);
                    merged_mass.push(m);
                }
            }
        }
        let total: f64 = merged_mass.iter().sum();
        for m in &mut merged_mass {
            *m /= total;
        }
        Ok(Self {
            support: merged_support,
            mass: merged_mass,
        })
    }

    /// Uniform mass on the given points (duplicates merged).
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    /// A point mass.
    pub fn dirac(x: Vec<f64>) -> Self {
        Self::new(vec![x], vec![1.0]).expect("a finite point is a valid marginal")
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for (x, m) in self.support.iter().zip(&self.mass) {
            for (acc, v) in mean.iter_mut().zip(x) {
                *acc += m * v;
            }
        }
        mean
    }

    /// `∫ f dQ`.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.support.iter().zip(&self.mass).map(|(x, m)| m * f(x)).sum()
    }

    /// Push-forward through a map (points that collide are merged).
    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::new(self.support.iter().map(|x| f(x)).collect(), self.mass.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Loads a marginal from JSON (`{support, mass}`) or CSV (`x0,...,mass`),
    /// chosen by file extension.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?),
            Some("csv") => Self::from_csv(path),
            _ => Err(Error::invalid(format!(
                "cannot infer marginal format of {}",
                path.display()
            ))),
        }
    }

    fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let mass_col = headers
            .iter()
            .position(|h| h.trim() == "mass")
            .ok_or_else(|| Error::invalid("marginal CSV has no 'mass' column"))?;
        let (mut support, mut mass) = (Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            mass.push(values[mass_col]);
            support.push(
                values
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != mass_col)
                    .map(|(_, v)| *v)
                    .collect(),
            );
        }
        Self::new(support, mass)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }
}

/// The positive-class base rate π ∈ (0,1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Prior(f64);

impl Prior {
    pub fn new(pi: f64) -> Result<Self> {
        if pi > 0.0 && pi < 1.0 {
            Ok(Self(pi))
        } else {
            Err(Error::Domain {
                what: "prior",
                value: pi,
                domain: "(0,1)",
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Prior {
    type Error = Error;
    fn try_from(pi: f64) -> Result<Self> {
        Prior::new(pi)
    }
}

impl From<Prior> for f64 {
    fn from(p: Prior) -> f64 {
        p.0
    }
}

/// Class-conditional marginals `P` (label +1), `N` (label −1) and the prior.
pub fn split_marginals(ds: &LabeledDataset) -> Result<(EmpiricalMarginal, EmpiricalMarginal, Prior)> {
    let (mut pos, mut pos_w, mut neg, mut neg_w) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, (x, y)) in ds.points.iter().zip(&ds.labels).enumerate() {
        match y {
            Label::Pos => {
                pos.push(x.clone());
                pos_w.push(ds.weight(i));
            }
            Label::Neg => {
                neg.push(x.clone());
                neg_w.push(ds.weight(i));
            }
        }
    }
    let (wp, wn): (f64, f64) = (pos_w.iter().sum(), neg_w.iter().sum());
    if !(wp > 0.0) {
        return Err(Error::EmptyClass("positive"));
    }
    if !(wn > 0.0) {
        return Err(Error::EmptyClass("negative"));
    }
    let pi = Prior::new(wp / (wp + wn))?;
    Ok((EmpiricalMarginal::new(pos, pos_w)?, EmpiricalMarginal::new(neg, neg_w)?, pi))
}

/// The weighted dataset `π·P ⊕ (1−π)·N`; inverse of [`split_marginals`].
pub fn recombine(p: &EmpiricalMarginal, n: &EmpiricalMarginal, pi: Prior) -> Result<LabeledDataset> {
    let pi = pi.value();
    let mut points = Vec::with_capacity(p.len() + n.len());
    let mut labels = Vec::with_capacity(p.len() + n.len());
    let mut weights = Vec::with_capacity(p.len() + n.len());
    for (x, m) in p.support.iter().zip(&p.mass) {
        points.push(x.clone());
        labels.push(Label::Pos);
        weights.push(pi * m);
    }
    for (x, m) in n.support.iter().zip(&n.mass) {
        points.push(x.clone());
        labels.push(Label::Neg);
        weights.push((1.0 - pi) * m);
    }
    LabeledDataset::with_raw_weights(points, labels, weights)
}

/// Bins `[lo, hi]` into `bins` cells and puts mass ∝ `f(midpoint)` on each midpoint.
pub fn discretize_density(f: impl Fn(f64) -> f64, lo: f64, hi: f64, bins: usize) -> Result<EmpiricalMarginal> {
    if bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    if !(hi > lo) {
        return Err(Error::invalid("discretization needs hi > lo"));
    }
    let width = (hi - lo) / bins as f64;
    let mids: Vec<f64> = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
    let mass: Vec<f64> = mids.iter().map(|&x| f(x)).collect();
    if mass.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::invalid("density must be finite and non-negative"));
    }
    if mass.iter().all(|&m| m == 0.0) {
        return Err(Error::invalid("density vanishes on every bin"));
    }
    EmpiricalMarginal::new(mids.into_iter().map(|x| vec![x]).collect(), mass)
}

/// `π·E_P X + (1−π)·E_N X`.
pub fn unconditional_mean(p: &EmpiricalMarginal, n: &EmpiricalMarginal, pi: Prior) -> Result<Vec<f64>> {
    if p.dim() != n.dim() {
        return Err(Error::invalid("marginal dimensions differ"));
    }
    let pi = pi.value();
    Ok(p.mean()
        .iter()
        .zip(n.mean())
        .map(|(a, b)| pi * a + (1.0 - pi) * b)
        .collect())
}
