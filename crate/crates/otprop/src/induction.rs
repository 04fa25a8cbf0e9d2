//! Out-of-sample prediction over a frozen transductive labeling.
//!
//! The model keeps every training point (originally labeled or labeled by
//! propagation) as an anchor. A new point is weighted against each anchor
//! with the same Gibbs kernel the transport solver exponentiates,
//! `w_i = exp(-|x_i - x|^2 / kernel_scale)`, and classified by weighted
//! majority vote; the binary variant returns the signed weighted average
//! instead.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::FeatureScaling;
use crate::error::{Error, Result};
use crate::propagation::argmax_lowest;
use crate::{real, Real};

/// Default kernel bandwidth for a model built from a transduction: the
/// regularization strength times the final cost normalizer, which is the
/// same scale the transport solver exponentiated. Degenerate all-zero costs
/// fall back to a unit bandwidth.
pub fn default_kernel_scale<R: Real>(epsilon: R, final_cost_max: R) -> R {
    let scale = epsilon * final_cost_max;
    if scale > R::zero() {
        scale
    } else {
        R::one()
    }
}

/// Frozen anchor set with its kernel bandwidth (in squared-distance units).
///
/// When the transduction standardized its inputs, the model carries that
/// transform and applies it to incoming points, so callers always pass
/// points in the original feature space.
#[derive(Debug, Clone)]
pub struct InductionModel<R> {
    anchors: Array2<R>,
    labels: Vec<usize>,
    kernel_scale: R,
    scaling: Option<FeatureScaling<R>>,
}

impl<R: Real> InductionModel<R> {
    pub fn new(anchors: Array2<R>, labels: Vec<usize>, kernel_scale: R) -> Result<Self> {
        if anchors.nrows() == 0 {
            return Err(Error::InvalidArgument("model needs at least one anchor".into()));
        }
        if anchors.nrows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} anchors but {} labels",
                anchors.nrows(),
                labels.len()
            )));
        }
        if !(kernel_scale > R::zero()) || !kernel_scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel scale must be positive, got {kernel_scale}"
            )));
        }
        Ok(Self {
            anchors,
            labels,
            kernel_scale,
            scaling: None,
        })
    }

    /// Attach the input transform whose space the anchors live in.
    pub fn with_scaling(mut self, scaling: FeatureScaling<R>) -> Result<Self> {
        if scaling.mean.len() != self.dim() || scaling.std.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "scaling has {} features, anchors have {}",
                scaling.mean.len(),
                self.dim()
            )));
        }
        self.scaling = Some(scaling);
        Ok(self)
    }

    pub fn scaling(&self) -> Option<&FeatureScaling<R>> {
        self.scaling.as_ref()
    }

    /// Assemble a model from a transduction: the labeled points with their
    /// given labels plus the unlabeled points with their propagated labels,
    /// in that order.
    pub fn from_transduction(
        labeled: ArrayView2<R>,
        given: &[usize],
        unlabeled: ArrayView2<R>,
        propagated: &[usize],
        kernel_scale: R,
    ) -> Result<Self> {
        if labeled.ncols() != unlabeled.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "labeled points have {} features, unlabeled have {}",
                labeled.ncols(),
                unlabeled.ncols()
            )));
        }
        if labeled.nrows() != given.len() || unlabeled.nrows() != propagated.len() {
            return Err(Error::ShapeMismatch(
                "point and label counts disagree".into(),
            ));
        }
        let dim = labeled.ncols();
        let mut flat =
            Vec::with_capacity((labeled.nrows() + unlabeled.nrows()) * dim);
        flat.extend(labeled.iter().copied());
        flat.extend(unlabeled.iter().copied());
        let anchors = Array2::from_shape_vec((given.len() + propagated.len(), dim), flat)
            .expect("row-major buffer matches shape");
        let mut labels = given.to_vec();
        labels.extend_from_slice(propagated);
        Self::new(anchors, labels, kernel_scale)
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.anchors.ncols()
    }

    pub fn kernel_scale(&self) -> R {
        self.kernel_scale
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Gibbs-kernel weight of every anchor against `point`. Weights are kept
    /// strictly positive by flooring underflowed kernels at the smallest
    /// representable value.
    pub fn weights(&self, point: ArrayView1<R>) -> Result<Array1<R>> {
        if point.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "point has {} features, anchors have {}",
                point.len(),
                self.dim()
            )));
        }
        let mut point: Vec<R> = point.to_vec();
        if let Some(scaling) = &self.scaling {
            scaling.apply(&mut point);
        }
        let floor = R::min_positive_value();
        let weights = self
            .anchors
            .rows()
            .into_iter()
            .map(|anchor| {
                let mut d2 = R::zero();
                for (a, x) in anchor.iter().zip(point.iter()) {
                    let diff = *a - *x;
                    d2 += diff * diff;
                }
                (-d2 / self.kernel_scale).exp().max(floor)
            })
            .collect::<Vec<_>>();
        Ok(Array1::from_vec(weights))
    }

    /// Weighted majority vote: the class maximizing the total weight of its
    /// anchors, ties to the lowest class index.
    pub fn induce_label(&self, point: ArrayView1<R>) -> Result<usize> {
        let weights = self.weights(point)?;
        let num_classes = self.labels.iter().max().copied().unwrap_or(0) + 1;
        let mut per_class = vec![R::zero(); num_classes];
        for (w, &y) in weights.iter().zip(&self.labels) {
            per_class[y] += *w;
        }
        Ok(argmax_lowest(per_class))
    }

    /// Binary variant: anchors of class 0 count as `+1` and class 1 as `-1`;
    /// returns the weighted average in `[-1, 1]` together with its sign
    /// class (a zero average resolves to the positive side, class 0).
    ///
    /// Rejects models whose labels are not drawn from `{0, 1}`.
    pub fn induce_value(&self, point: ArrayView1<R>) -> Result<(R, usize)> {
        if let Some(&bad) = self.labels.iter().find(|&&y| y > 1) {
            return Err(Error::NonBinaryLabels { found: bad });
        }
        let weights = self.weights(point)?;
        let mut numerator = R::zero();
        let mut denominator = R::zero();
        for (w, &y) in weights.iter().zip(&self.labels) {
            let signed = if y == 0 { R::one() } else { -R::one() };
            numerator += *w * signed;
            denominator += *w;
        }
        let value = numerator / denominator;
        let class = if value < R::zero() { 1 } else { 0 };
        Ok((value, class))
    }

    /// Write the model as a flat CSV table: a `kernel_scale` record, a
    /// header, then one row of feature values plus the dense class id per
    /// anchor. Floats use shortest round-trip formatting, so a reloaded
    /// model is bit-identical.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "kernel_scale,{}", self.kernel_scale)?;
        if let Some(scaling) = &self.scaling {
            let mean: Vec<String> = scaling.mean.iter().map(|v| format!("{v}")).collect();
            let std: Vec<String> = scaling.std.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "scaling_mean,{}", mean.join(","))?;
            writeln!(out, "scaling_std,{}", std.join(","))?;
        }
        let header: Vec<String> = (0..self.dim())
            .map(|f| format!("f{f}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (row, &label) in self.anchors.rows().into_iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            fields.push(label.to_string());
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Parse a model written by [`InductionModel::write_csv`].
    pub fn read_csv<Rd: Read>(input: Rd) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut records = reader.records();
        let scale_record = records
            .next()
            .ok_or_else(|| Error::Dataset("empty model file".into()))??;
        if scale_record.len() != 2 || &scale_record[0] != "kernel_scale" {
            return Err(Error::Dataset(
                "model file must start with a kernel_scale record".into(),
            ));
        }
        let kernel_scale: f64 = scale_record[1]
            .parse()
            .map_err(|e| Error::Dataset(format!("bad kernel_scale: {e}")))?;
        let mut next_record = records
            .next()
            .ok_or_else(|| Error::Dataset("model file has no header".into()))??;
        let parse_row = |record: &csv::StringRecord| -> Result<Vec<R>> {
            record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map(real::<R>)
                        .map_err(|e| Error::Dataset(format!("bad scaling value: {e}")))
                })
                .collect()
        };
        let mut scaling = None;
        if next_record.get(0) == Some("scaling_mean") {
            let mean = parse_row(&next_record)?;
            let std_record = records
                .next()
                .ok_or_else(|| Error::Dataset("scaling_mean without scaling_std".into()))??;
            if std_record.get(0) != Some("scaling_std") {
                return Err(Error::Dataset("scaling_mean without scaling_std".into()));
            }
            let std = parse_row(&std_record)?;
            if std.len() != mean.len() {
                return Err(Error::Dataset("scaling records disagree on length".into()));
            }
            scaling = Some(FeatureScaling { mean, std });
            next_record = records
                .next()
                .ok_or_else(|| Error::Dataset("model file has no header".into()))??;
        }
        let header = next_record;
        let dim = header.len().saturating_sub(1);
        if dim == 0 || &header[dim] != "label" {
            return Err(Error::Dataset(
                "model header must end with a `label` column".into(),
            ));
        }
        let mut flat = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in records.enumerate() {
            let record = record?;
            if record.len() != dim + 1 {
                return Err(Error::Dataset(format!(
                    "anchor row {} has {} fields, expected {}",
                    i + 1,
                    record.len(),
                    dim + 1
                )));
            }
            for f in 0..dim {
                let v: f64 = record[f].parse().map_err(|e| Error::BadCell {
                    row: i + 1,
                    column: format!("f{f}"),
                    message: format!("{e}"),
                })?;
                flat.push(real::<R>(v));
            }
            labels.push(record[dim].parse().map_err(|e| Error::BadCell {
                row: i + 1,
                column: "label".into(),
                message: format!("{e}"),
            })?);
        }
        let anchors = Array2::from_shape_vec((labels.len(), dim), flat)
            .map_err(|e| Error::Dataset(format!("bad anchor table: {e}")))?;
        let model = Self::new(anchors, labels, real(kernel_scale))?;
        match scaling {
            Some(s) => model.with_scaling(s),
            None => Ok(model),
        }
    }
}
