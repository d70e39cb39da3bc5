//! Softmax-regression probe over (propagated) node features.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelVector, SparseGraph};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 300,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::validation("l2 must be non-negative"));
        }
        Ok(())
    }
}

/// Train/validation/test node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Checks disjointness, a non-empty train set, and that every id is a
    /// labeled node below `n`.
    pub fn validate(&self, labels: &LabelVector, n: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::validation("train set is empty"));
        }
        let mut seen = HashSet::new();
        for (name, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in ids {
                if i >= n {
                    return Err(Error::validation(format!("{name} id {i} out of range (n = {n})")));
                }
                if labels.get(i).is_none() {
                    return Err(Error::validation(format!("{name} id {i} is unlabeled")));
                }
                if !seen.insert(i) {
                    return Err(Error::validation(format!("node {i} appears in more than one split")));
                }
            }
        }
        Ok(())
    }

    /// Seeded random split of the labeled nodes; the test set takes the rest.
    pub fn random(labels: &LabelVector, train_frac: f64, val_frac: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&train_frac)
            || !(0.0..=1.0).contains(&val_frac)
            || train_frac + val_frac > 1.0
        {
            return Err(Error::validation("split fractions must lie in [0, 1] and sum to at most 1"));
        }
        let mut ids: Vec<usize> = (0..labels.len()).filter(|&i| labels.get(i).is_some()).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (train_frac * ids.len() as f64).round() as usize;
        let n_val = ((val_frac * ids.len() as f64).round() as usize).min(ids.len() - n_train);
        let mut s = Self {
            train: ids[..n_train].to_vec(),
            val: ids[n_train..n_train + n_val].to_vec(),
            test: ids[n_train + n_val..].to_vec(),
        };
        s.train.sort_unstable();
        s.val.sort_unstable();
        s.test.sort_unstable();
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

/// Trained weight block (`features x classes`, row-major) and its log.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeModel<T> {
    pub features: usize,
    pub classes: usize,
    pub weights: Vec<T>,
    pub log: Vec<EpochLog>,
}

impl<T: Scalar> ProbeModel<T> {
    pub fn zeros(features: usize, classes: usize) -> Self {
        Self {
            features,
            classes,
            weights: vec![T::zero(); features * classes],
            log: Vec::new(),
        }
    }

    pub fn logits(&self, x: &[T]) -> Vec<T> {
        logits_row(&self.weights, self.classes, x)
    }

    /// Argmax class per row; ties go to the lower class id.
    pub fn predict(&self, x: &FeatureMatrix<T>) -> Result<Vec<usize>> {
        self.check_width(x)?;
        Ok((0..x.rows()).map(|i| argmax(&self.logits(x.row(i)))).collect())
    }

    /// Fraction of `nodes` whose predicted class matches the label.
    pub fn evaluate(&self, x: &FeatureMatrix<T>, labels: &LabelVector, nodes: &[usize]) -> Result<f64> {
        self.check_width(x)?;
        if nodes.is_empty() {
            return Err(Error::validation("cannot evaluate on an empty node set"));
        }
        let mut correct = 0usize;
        for &i in nodes {
            if i >= x.rows() {
                return Err(Error::validation(format!("node {i} out of range")));
            }
            if labels.get(i) == Some(argmax(&self.logits(x.row(i)))) {
                correct += 1;
            }
        }
        Ok(correct as f64 / nodes.len() as f64)
    }

    pub fn max_abs_weight(&self) -> T {
        self.weights.iter().fold(T::zero(), |m, w| m.max(w.abs()))
    }

    fn check_width(&self, x: &FeatureMatrix<T>) -> Result<()> {
        if x.cols() != self.features {
            return Err(Error::validation(format!(
                "feature width {} does not match model width {}",
                x.cols(),
                self.features
            )));
        }
        Ok(())
    }
}

fn logits_row<T: Scalar>(w: &[T], classes: usize, x: &[T]) -> Vec<T> {
    let mut z = vec![T::zero(); classes];
    for (a, &xa) in x.iter().enumerate() {
        if xa == T::zero() {
            continue;
        }
        for (zc, &wc) in z.iter_mut().zip(&w[a * classes..(a + 1) * classes]) {
            *zc += xa * wc;
        }
    }
    z
}

pub fn argmax<T: Scalar>(z: &[T]) -> usize {
    let mut best = 0;
    for (c, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = c;
        }
    }
    best
}

/// Numerically stable softmax of one logit row.
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy over `train` plus `(l2/2)|W|^2`, and its gradient.
pub fn loss_and_grad<T: Scalar>(
    weights: &[T],
    classes: usize,
    x: &FeatureMatrix<T>,
    labels: &LabelVector,
    train: &[usize],
    l2: f64,
) -> (f64, Vec<T>) {
    let (ce, mut g) = data_loss_and_grad(weights, classes, x, labels, train);
    let l2t = T::lit(l2);
    let mut reg = T::zero();
    for (gi, &wi) in g.iter_mut().zip(weights) {
        *gi += l2t * wi;
        reg += wi * wi;
    }
    (ce + 0.5 * l2 * reg.as_f64(), g)
}

fn data_loss_and_grad<T: Scalar>(
    weights: &[T],
    classes: usize,
    x: &FeatureMatrix<T>,
    labels: &LabelVector,
    train: &[usize],
) -> (f64, Vec<T>) {
    let mut grad = vec![T::zero(); weights.len()];
    let mut loss = 0.0;
    let inv_m = T::one() / T::from_count(train.len());
    for &i in train {
        let y = labels.get(i).expect("split validated");
        let row = x.row(i);
        let mut p = softmax(&logits_row(weights, classes, row));
        loss -= p[y].as_f64().max(f64::MIN_POSITIVE).ln();
        p[y] -= T::one();
        for (a, &xa) in row.iter().enumerate() {
            if xa == T::zero() {
                continue;
            }
            let s = xa * inv_m;
            for (gc, &pc) in grad[a * classes..(a + 1) * classes].iter_mut().zip(&p) {
                *gc += s * pc;
            }
        }
    }
    (loss / train.len() as f64, grad)
}

/// Full-batch gradient descent on the probe loss.
///
/// The L2 term is applied as a proximal step, `W <- (W - lr g) / (1 + lr l2)`,
/// which has the same fixed point as plain descent but stays stable for very
/// large `l2`.
pub fn train_probe<T: Scalar>(
    x: &FeatureMatrix<T>,
    labels: &LabelVector,
    split: &SplitSpec,
    cfg: &ProbeConfig,
) -> Result<ProbeModel<T>> {
    cfg.validate()?;
    if labels.len() != x.rows() {
        return Err(Error::validation(format!(
            "{} labels for {} feature rows",
            labels.len(),
            x.rows()
        )));
    }
    split.validate(labels, x.rows())?;
    let classes = labels.class_count();
    let f = x.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ProbeModel::<T>::zeros(f, classes);
    for w in &mut model.weights {
        *w = T::lit(rng.gen_range(-0.01..0.01));
    }
    let lr = T::lit(cfg.learning_rate);
    let shrink = T::one() / T::lit(1.0 + cfg.learning_rate * cfg.l2);
    for epoch in 0..cfg.epochs {
        let (ce, g) = data_loss_and_grad(&model.weights, classes, x, labels, &split.train);
        let reg: f64 = model.weights.iter().map(|w| w.as_f64() * w.as_f64()).sum();
        for (w, gi) in model.weights.iter_mut().zip(g) {
            *w = (*w - lr * gi) * shrink;
        }
        let val_accuracy = if split.val.is_empty() {
            None
        } else {
            Some(model.evaluate(x, labels, &split.val)?)
        };
        model.log.push(EpochLog {
            epoch,
            train_loss: ce + 0.5 * cfg.l2 * reg,
            val_accuracy,
        });
    }
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupAccuracy {
    pub size: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Accuracy split by degree: `Low-Deg` is degree `<= threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeGroupReport {
    pub threshold: usize,
    pub low: Option<GroupAccuracy>,
    pub high: Option<GroupAccuracy>,
}

impl DegreeGroupReport {
    /// `group,threshold,size,correct,accuracy`; absent groups are omitted.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("group,threshold,size,correct,accuracy\n");
        for (name, g) in [("low_deg", self.low), ("high_deg", self.high)] {
            if let Some(g) = g {
                let _ = writeln!(s, "{name},{},{},{},{}", self.threshold, g.size, g.correct, g.accuracy);
            }
        }
        s
    }
}

/// Groups nodes that have both a prediction and a label by their degree in
/// `g` (positive-weight neighbors, loops excluded).
pub fn degree_group_report<T: Scalar>(
    predictions: &[Option<usize>],
    labels: &LabelVector,
    g: &SparseGraph<T>,
    threshold: usize,
) -> Result<DegreeGroupReport> {
    if predictions.len() != g.node_count() || labels.len() != g.node_count() {
        return Err(Error::validation("predictions, labels and graph sizes differ"));
    }
    let mut acc = [(0usize, 0usize); 2];
    for (i, p) in predictions.iter().enumerate() {
        let (Some(p), Some(y)) = (*p, labels.get(i)) else {
            continue;
        };
        let group = usize::from(g.active_neighbors(i).count() > threshold);
        acc[group].0 += 1;
        acc[group].1 += usize::from(p == y);
    }
    let mk = |(size, correct): (usize, usize)| {
        (size > 0).then(|| GroupAccuracy {
            size,
            correct,
            accuracy: correct as f64 / size as f64,
        })
    };
    Ok(DegreeGroupReport {
        threshold,
        low: mk(acc[0]),
        high: mk(acc[1]),
    })
}
