#pragma once

// Request-density prediction: a federated ridge regression over per-file
// indicator features, normalized into popularity and scaled by the
// predicted pedestrian density of each cell.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mobcache/core.hpp"
#include "mobcache/fed_learning.hpp"

namespace mobcache {

// Feature layout: [bias, e_0, ..., e_{M-1}].
inline std::size_t request_feature_dim(std::size_t file_count) { return file_count + 1; }

inline std::vector<TrainingBatch::Entry> request_features(std::size_t file) {
  return {{0, 1.0}, {file + 1, 1.0}};
}

// One sample per (slot, file): the number of requests for the file that the
// SBS observed in that slot. `slot_counts` is slots x files.
inline TrainingBatch build_request_batch(const DensityTable& slot_counts) {
  TrainingBatch batch(request_feature_dim(slot_counts.cols()));
  for (std::size_t s = 0; s < slot_counts.rows(); ++s) {
    for (std::size_t f = 0; f < slot_counts.cols(); ++f) {
      const auto x = request_features(f);
      batch.add_sparse_row(x, slot_counts(s, f));
    }
  }
  return batch;
}

// Predicted requests per slot for every file, clamped at zero.
inline std::vector<double> predict_request_density(const LinearModel& model,
                                                   std::size_t file_count) {
  detail::require(model.dim() == request_feature_dim(file_count), "model/catalog mismatch");
  std::vector<double> lambda(file_count);
  for (std::size_t f = 0; f < file_count; ++f) {
    lambda[f] = std::max(0.0, model.weights[0] + model.weights[f + 1]);
  }
  return lambda;
}

struct DemandFit {
  std::vector<double> lambda;
  LinearModel model;
  bool degenerate{false};  // no observed demand; lambda is uniform
  std::vector<double> loss;
};

inline DemandFit fit_request_density(std::span<const TrainingBatch> batches,
                                     std::size_t file_count, FedConfig config,
                                     std::optional<LinearModel> warm_start = std::nullopt) {
  config.task = Task::kRequest;
  const std::size_t dim = request_feature_dim(file_count);
  bool any_demand = false;
  for (const auto& b : batches) {
    detail::require(b.dim() == dim, "batch does not use the request feature layout");
    for (std::size_t j = 0; j < b.size() && !any_demand; ++j) any_demand = b.target(j) > 0.0;
  }
  if (!any_demand) {
    DemandFit fit;
    fit.lambda.assign(file_count, 1.0);
    fit.model = warm_start ? *warm_start : LinearModel::zeros(Task::kRequest, dim);
    fit.degenerate = true;
    return fit;
  }
  auto report = train(batches, config, std::move(warm_start));
  DemandFit fit;
  fit.lambda = predict_request_density(report.model, file_count);
  fit.model = std::move(report.model);
  fit.loss = std::move(report.loss);
  return fit;
}

struct Popularity {
  std::vector<double> p;
  bool degenerate{false};  // all-zero input, p is uniform
};

inline Popularity popularity(std::span<const double> lambda) {
  detail::require(!lambda.empty(), "popularity needs at least one file");
  double total = 0.0;
  for (double l : lambda) {
    detail::require(std::isfinite(l) && l >= 0.0, "request densities must be non-negative");
    total += l;
  }
  Popularity out;
  if (total <= 0.0) {
    out.p.assign(lambda.size(), 1.0 / static_cast<double>(lambda.size()));
    out.degenerate = true;
    return out;
  }
  out.p.reserve(lambda.size());
  for (double l : lambda) out.p.push_back(l / total);
  return out;
}

// lambda*_f = psi* p_f for one cell.
inline std::vector<double> expected_request_density(double psi, std::span<const double> p) {
  detail::require(psi >= 0.0, "pedestrian density must be non-negative");
  std::vector<double> out;
  out.reserve(p.size());
  for (double pf : p) out.push_back(psi * pf);
  return out;
}

struct DensityBracket {
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(std::span<const double> lambda_star, double tol = 1e-9) const {
    for (std::size_t f = 0; f < lambda_star.size(); ++f) {
      if (lambda_star[f] < lower[f] - tol || lambda_star[f] > upper[f] + tol) return false;
    }
    return true;
  }
};

// Range of lambda* for a cell: from "no cluster admitted" to "every kept
// cluster admitted". `cluster_counts` holds the kappa* filtered clusters.
inline DensityBracket proposition1_bracket(std::span<const std::size_t> cluster_counts,
                                           std::size_t present, std::size_t leaving,
                                           std::span<const double> lambda) {
  const auto pop = popularity(lambda);
  const double base = static_cast<double>(present) - static_cast<double>(leaving);
  double clustered = 0.0;
  for (std::size_t c : cluster_counts) clustered += static_cast<double>(c);
  DensityBracket b;
  b.lower = expected_request_density(std::max(0.0, base), pop.p);
  b.upper = expected_request_density(std::max(0.0, base + clustered), pop.p);
  return b;
}

struct DensityEstimate {
  std::vector<double> psi;         // per cell
  std::vector<double> raw_lambda;  // per file
  std::vector<double> popularity;  // per file
  DensityTable expected;           // cells x files
  bool degenerate{false};
};

inline DensityEstimate make_density_estimate(std::vector<double> psi,
                                             std::vector<double> raw_lambda) {
  DensityEstimate est;
  const auto pop = popularity(raw_lambda);
  est.degenerate = pop.degenerate;
  est.popularity = pop.p;
  est.expected = DensityTable(psi.size(), raw_lambda.size());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const auto row = expected_request_density(psi[k], est.popularity);
    for (std::size_t f = 0; f < row.size(); ++f) est.expected(k, f) = row[f];
  }
  est.psi = std::move(psi);
  est.raw_lambda = std::move(raw_lambda);
  return est;
}

}  // namespace mobcache
