#include "shiftlab/logreg.hpp"

#include <algorithm>
#include <cmath>

#include "shiftlab/errors.hpp"

namespace shiftlab {

void validate(const LabeledDataset& data) {
  if (data.labels.size() != data.features.rows) {
    throw InvalidInputError("dataset: label count does not match rows");
  }
  for (int label : data.labels) {
    if (label != 1 && label != -1) {
      throw InvalidInputError("dataset: labels must be +1 or -1");
    }
  }
  if (!all_finite(data.features.entries)) {
    throw InvalidInputError("dataset: non-finite feature");
  }
  if (data.group && data.group->size() != data.features.rows) {
    throw InvalidInputError("dataset: group tag count does not match rows");
  }
  if (data.domain && data.domain->size() != data.features.rows) {
    throw InvalidInputError("dataset: domain tag count does not match rows");
  }
}

LabeledDataset subset(const LabeledDataset& data,
                      const std::vector<std::size_t>& indices) {
  LabeledDataset out;
  out.features = Matrix(indices.size(), data.dim());
  out.labels.reserve(indices.size());
  if (data.group) out.group.emplace();
  if (data.domain) out.domain.emplace();
  for (std::size_t row = 0; row < indices.size(); ++row) {
    const std::size_t src = indices[row];
    if (src >= data.size()) {
      throw InvalidInputError("subset: index out of range");
    }
    std::copy_n(data.features.row(src).data(), data.dim(),
                out.features.row(row).data());
    out.labels.push_back(data.labels[src]);
    if (data.group) out.group->push_back((*data.group)[src]);
    if (data.domain) out.domain->push_back((*data.domain)[src]);
  }
  return out;
}

LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.dim() != b.dim()) {
    throw InvalidInputError("concatenate: dimension mismatch");
  }
  if (a.group.has_value() != b.group.has_value() ||
      a.domain.has_value() != b.domain.has_value()) {
    throw InvalidInputError("concatenate: tag presence mismatch");
  }
  LabeledDataset out;
  out.features = Matrix(a.size() + b.size(), a.dim());
  std::copy(a.features.entries.begin(), a.features.entries.end(),
            out.features.entries.begin());
  std::copy(b.features.entries.begin(), b.features.entries.end(),
            out.features.entries.begin() + a.features.entries.size());
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  if (a.group) {
    out.group = *a.group;
    out.group->insert(out.group->end(), b.group->begin(), b.group->end());
  }
  if (a.domain) {
    out.domain = *a.domain;
    out.domain->insert(out.domain->end(), b.domain->begin(), b.domain->end());
  }
  return out;
}

namespace logreg {

// log(1 + exp(-m)) without overflow on either side.
double margin_loss(double m) {
  return std::log1p(std::exp(-std::abs(m))) + std::max(0.0, -m);
}

// 1 / (1 + exp(m)), stable for large |m|.
double margin_slope(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

namespace {

void check_shapes(const WeightVector& w, const LabeledDataset& data) {
  if (w.size() != data.dim()) {
    throw InvalidInputError("logreg: weight length does not match features");
  }
  if (data.labels.size() != data.size()) {
    throw InvalidInputError("logreg: label count does not match rows");
  }
}

// One pass over the data: loss and gradient share the margin computation.
double loss_and_gradient(const WeightVector& w, const LabeledDataset& data,
                         WeightVector& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.features.row(i);
    const double margin = data.labels[i] * dot(x, w);
    loss += margin_loss(margin);
    axpy(-data.labels[i] * margin_slope(margin), x, grad);
  }
  return loss;
}

}  // namespace

double logistic_loss(const WeightVector& w, const LabeledDataset& data) {
  check_shapes(w, data);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    loss += margin_loss(data.labels[i] * dot(data.features.row(i), w));
  }
  return loss;
}

WeightVector loss_gradient(const WeightVector& w, const LabeledDataset& data) {
  check_shapes(w, data);
  WeightVector grad(w.size(), 0.0);
  loss_and_gradient(w, data, grad);
  return grad;
}

Matrix loss_hessian(const WeightVector& w, const LabeledDataset& data) {
  check_shapes(w, data);
  const std::size_t d = w.size();
  Matrix hessian(d, d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.features.row(i);
    const double margin = data.labels[i] * dot(x, w);
    // sigma(m) * sigma(-m) = 1 / (2 + e^m + e^-m), computed without overflow
    const double s = margin_slope(margin);
    const double weight = s * (1.0 - s);
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = weight * x[a];
      for (std::size_t b = a; b < d; ++b) {
        hessian.at(a, b) += xa * x[b];
      }
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      hessian.at(a, b) = hessian.at(b, a);
    }
  }
  return hessian;
}

GDTrace gradient_descent(const WeightVector& w_init, const LabeledDataset& data,
                         const GDConfig& cfg, const StepObserver& observer) {
  check_shapes(w_init, data);
  if (cfg.grad_tol <= 0.0) {
    throw InvalidInputError("gradient_descent: grad_tol must be positive");
  }
  if (cfg.divergence_norm <= 0.0) {
    throw InvalidInputError("gradient_descent: divergence_norm must be positive");
  }

  double step = 0.0;
  if (cfg.step_size) {
    step = *cfg.step_size;
    if (!(step > 0.0)) {
      throw InvalidInputError("gradient_descent: step_size must be positive");
    }
  } else {
    const double op = operator_norm(data.features, 1e-8);
    // The power-iteration estimate approaches ||X||_op from below; a hair of
    // inflation keeps the step at or under the monotone-descent bound 1/K.
    step = op > 0.0 ? 4.0 / (op * op * (1.0 + 1e-6)) : 1.0;
  }

  GDTrace trace;
  trace.final_weights = w_init;
  trace.losses.reserve(std::min<std::size_t>(cfg.max_steps + 1, 1 << 20));
  trace.grad_norms.reserve(trace.losses.capacity());

  WeightVector grad(w_init.size(), 0.0);
  for (std::size_t t = 0; t < cfg.max_steps; ++t) {
    const double loss = loss_and_gradient(trace.final_weights, data, grad);
    const double grad_norm = norm(grad);
    trace.losses.push_back(loss);
    trace.grad_norms.push_back(grad_norm);

    if (grad_norm <= cfg.grad_tol) {
      trace.reason = GDTermination::converged;
      trace.steps = t;
      return trace;
    }
    // A vanishing loss with a live gradient means the infimum is 0 and is
    // not attained: the data is separable from here.
    if (loss < 1e-12) {
      trace.reason = GDTermination::diverged;
      trace.steps = t;
      return trace;
    }

    axpy(-step, grad, trace.final_weights);
    if (observer) observer(t + 1, trace.final_weights);

    if (norm(trace.final_weights) > cfg.divergence_norm) {
      trace.losses.push_back(logistic_loss(trace.final_weights, data));
      trace.grad_norms.push_back(
          norm(loss_gradient(trace.final_weights, data)));
      trace.reason = GDTermination::diverged;
      trace.steps = t + 1;
      return trace;
    }
  }

  trace.losses.push_back(logistic_loss(trace.final_weights, data));
  trace.grad_norms.push_back(norm(loss_gradient(trace.final_weights, data)));
  trace.steps = cfg.max_steps;
  trace.reason = trace.grad_norms.back() <= cfg.grad_tol
                     ? GDTermination::converged
                     : GDTermination::step_limit;
  return trace;
}

Subspace data_subspace(const LabeledDataset& data, double rank_tol) {
  std::vector<Vector> rows;
  rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = data.features.row(i);
    rows.emplace_back(r.begin(), r.end());
  }
  Subspace s = orthonormalize(rows, rank_tol);
  if (s.ambient_dim == 0) s.ambient_dim = data.dim();
  return s;
}

WeightVector reference_minimizer(const LabeledDataset& data,
                                 const GDConfig& cfg) {
  const WeightVector zero(data.dim(), 0.0);
  GDTrace trace = gradient_descent(zero, data, cfg);
  if (trace.reason == GDTermination::diverged) {
    throw NoMinimumError(
        "reference_minimizer: training diverged; the restricted objective has "
        "no finite minimizer");
  }
  return trace.final_weights;
}

Decomposition theorem_decompose(const WeightVector& w_init,
                                const LabeledDataset& data,
                                const GDConfig& cfg) {
  Decomposition out;
  const Subspace span = data_subspace(data);
  GDTrace trace = gradient_descent(w_init, data, cfg);
  if (trace.reason == GDTermination::diverged) {
    throw NoMinimumError("theorem_decompose: training diverged");
  }
  out.trained = trace.final_weights;
  out.in_span = project(out.trained, span);
  out.orthogonal = project_complement(out.trained, span);
  out.reference = reference_minimizer(data, cfg);
  out.init_orthogonal = project_complement(w_init, span);

  Vector in_delta = out.in_span;
  for (std::size_t i = 0; i < in_delta.size(); ++i) {
    in_delta[i] -= out.reference[i];
  }
  Vector orth_delta = out.orthogonal;
  for (std::size_t i = 0; i < orth_delta.size(); ++i) {
    orth_delta[i] -= out.init_orthogonal[i];
  }
  out.residual = norm(in_delta) + norm(orth_delta);
  return out;
}

double accuracy(const WeightVector& w, const LabeledDataset& data) {
  check_shapes(w, data);
  if (data.size() == 0) {
    throw InvalidInputError("accuracy: empty dataset");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] * dot(data.features.row(i), w) > 0.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<std::uint8_t> per_example_correct(const WeightVector& w,
                                              const LabeledDataset& data) {
  check_shapes(w, data);
  std::vector<std::uint8_t> out(data.size(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = data.labels[i] * dot(data.features.row(i), w) > 0.0 ? 1 : 0;
  }
  return out;
}

}  // namespace logreg
}  // namespace shiftlab
