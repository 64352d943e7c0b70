#pragma once

// Federated training of linear models: per-participant gradient steps,
// count-weighted aggregation at the MBS, and the corrected global update.
//
// Two per-sample losses are supported:
//   pedestrian task: f = (x.w - y)^2
//   request task:    f = 1/2 (y - x.w)^2 + ridge * |w|^2
// and the global objective is F(w) = (1/Q) sum over all samples of f.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mobcache/core.hpp"

namespace mobcache {

enum class Task { kPedestrian = 1, kRequest = 2 };

enum class FlMode {
  kFedAvg,         // the weighted model mean becomes the new global model
  kPaperFaithful,  // global step beta - eta * (grad F - Theta)
};

struct LinearModel {
  Task task{Task::kRequest};
  std::vector<double> weights;

  static LinearModel zeros(Task task, std::size_t dim) {
    return {task, std::vector<double>(dim, 0.0)};
  }

  std::size_t dim() const { return weights.size(); }

  bool finite() const {
    for (double w : weights) {
      if (!std::isfinite(w)) return false;
    }
    return true;
  }
};

// Design matrix with targets, stored as compressed sparse rows so that
// indicator encodings over large catalogs stay cheap.
class TrainingBatch {
 public:
  using Entry = std::pair<std::size_t, double>;

  explicit TrainingBatch(std::size_t dim) : dim_(dim) {
    detail::require(dim >= 1, "feature dimension must be positive");
  }

  static TrainingBatch from_dense(const std::vector<std::vector<double>>& rows,
                                  const std::vector<double>& targets) {
    detail::require(!rows.empty(), "batch needs at least one row");
    detail::require(rows.size() == targets.size(), "row count must equal target count");
    TrainingBatch batch(rows.front().size());
    for (std::size_t j = 0; j < rows.size(); ++j) batch.add_dense_row(rows[j], targets[j]);
    return batch;
  }

  void add_dense_row(std::span<const double> x, double y) {
    detail::require(x.size() == dim_, "row dimension mismatch");
    for (std::size_t c = 0; c < x.size(); ++c) {
      if (x[c] != 0.0) {
        cols_.push_back(c);
        vals_.push_back(x[c]);
      }
    }
    finish_row(y);
  }

  void add_sparse_row(std::span<const Entry> x, double y) {
    for (const auto& [c, v] : x) {
      detail::require(c < dim_, "sparse column out of range");
      cols_.push_back(c);
      vals_.push_back(v);
    }
    finish_row(y);
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }
  double target(std::size_t j) const { return targets_[j]; }

  double dot(std::size_t j, std::span<const double> w) const {
    double s = 0.0;
    for (std::size_t e = row_ptr_[j]; e < row_ptr_[j + 1]; ++e) s += vals_[e] * w[cols_[e]];
    return s;
  }

  // out += scale * x_j
  void axpy(std::size_t j, double scale, std::span<double> out) const {
    for (std::size_t e = row_ptr_[j]; e < row_ptr_[j + 1]; ++e) out[cols_[e]] += scale * vals_[e];
  }

  std::vector<double> dense_row(std::size_t j) const {
    std::vector<double> x(dim_, 0.0);
    axpy(j, 1.0, x);
    return x;
  }

 private:
  void finish_row(double y) {
    detail::require(std::isfinite(y), "targets must be finite");
    targets_.push_back(y);
    row_ptr_.push_back(cols_.size());
  }

  std::size_t dim_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
  std::vector<double> targets_;
};

struct FedConfig {
  Task task{Task::kRequest};
  std::size_t local_steps{1};  // local gradient steps between aggregations
  std::size_t rounds{1};       // aggregations
  double learning_rate{0.003};
  double ridge{1.0};           // only used by the request task
  FlMode mode{FlMode::kFedAvg};

  void validate() const {
    detail::require(local_steps >= 1, "local_steps must be at least 1");
    detail::require(rounds >= 1, "rounds must be at least 1");
    detail::require(std::isfinite(learning_rate) && learning_rate > 0.0,
                    "learning rate must be positive");
    detail::require(std::isfinite(ridge) && ridge >= 0.0, "ridge weight must be non-negative");
  }
};

// ---------------------------------------------------------------------------
// Losses and gradients
// ---------------------------------------------------------------------------

namespace detail {

inline double squared_norm(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s;
}

inline void check_dims(const LinearModel& model, const TrainingBatch& batch) {
  require(model.dim() == batch.dim(),
          concat("model dimension ", model.dim(), " does not match batch dimension ", batch.dim()));
}

}  // namespace detail

// Loss of one sample.
inline double sample_loss(Task task, std::span<const double> w, std::span<const double> x, double y,
                          double ridge) {
  detail::require(w.size() == x.size(), "dimension mismatch");
  double pred = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) pred += w[c] * x[c];
  const double r = pred - y;
  if (task == Task::kPedestrian) return r * r;
  return 0.5 * r * r + ridge * detail::squared_norm(w);
}

// Gradient of sample_loss with respect to w.
inline std::vector<double> sample_gradient(Task task, std::span<const double> w,
                                           std::span<const double> x, double y, double ridge) {
  detail::require(w.size() == x.size(), "dimension mismatch");
  double pred = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) pred += w[c] * x[c];
  const double r = pred - y;
  std::vector<double> g(w.size());
  for (std::size_t c = 0; c < w.size(); ++c) {
    g[c] = task == Task::kPedestrian ? 2.0 * r * x[c] : r * x[c] + 2.0 * ridge * w[c];
  }
  return g;
}

// Participant loss: |Xw - y|^2 for the pedestrian task, and
// 1/2 |y - Xw|^2 + ridge |w|^2 for the request task.
inline double local_loss(const LinearModel& model, const TrainingBatch& batch, double ridge) {
  detail::check_dims(model, batch);
  double sse = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double r = batch.dot(j, model.weights) - batch.target(j);
    sse += r * r;
  }
  if (model.task == Task::kPedestrian) return sse;
  return 0.5 * sse + ridge * detail::squared_norm(model.weights);
}

// (1/Q_i) * sum_j grad f(w, x_j, y_j)
inline std::vector<double> mean_gradient(const LinearModel& model, const TrainingBatch& batch,
                                         double ridge) {
  detail::check_dims(model, batch);
  detail::require(!batch.empty(), "empty training batch");
  std::vector<double> g(model.dim(), 0.0);
  const double scale = model.task == Task::kPedestrian ? 2.0 : 1.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double r = batch.dot(j, model.weights) - batch.target(j);
    batch.axpy(j, scale * r, g);
  }
  const double inv_q = 1.0 / static_cast<double>(batch.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    g[c] *= inv_q;
    if (model.task == Task::kRequest) g[c] += 2.0 * ridge * model.weights[c];
  }
  return g;
}

// Mean per-sample loss over the union of all batches.
inline double global_loss(const LinearModel& model, std::span<const TrainingBatch> batches,
                          double ridge) {
  double total = 0.0;
  std::size_t q = 0;
  for (const auto& b : batches) {
    detail::check_dims(model, b);
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double r = b.dot(j, model.weights) - b.target(j);
      total += model.task == Task::kPedestrian ? r * r : 0.5 * r * r;
    }
    q += b.size();
  }
  detail::require(q > 0, "no training samples");
  total /= static_cast<double>(q);
  if (model.task == Task::kRequest) total += ridge * detail::squared_norm(model.weights);
  return total;
}

// Gradient of the global objective F.
inline std::vector<double> global_gradient(const LinearModel& model,
                                           std::span<const TrainingBatch> batches, double ridge) {
  detail::require(!batches.empty(), "no participants");
  std::vector<double> g(model.dim(), 0.0);
  double q = 0.0;
  for (const auto& b : batches) q += static_cast<double>(b.size());
  for (const auto& b : batches) {
    const auto gi = mean_gradient(model, b, ridge);
    const double w = static_cast<double>(b.size()) / q;
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += w * gi[c];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Federation steps
// ---------------------------------------------------------------------------

// One gradient step from the global model on a participant's data.
inline LinearModel local_update(const LinearModel& global, const TrainingBatch& batch,
                                double learning_rate, double ridge = 0.0) {
  detail::require(learning_rate > 0.0, "learning rate must be positive");
  const auto g = mean_gradient(global, batch, ridge);
  LinearModel out = global;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (!std::isfinite(g[c])) throw DivergenceError("non-finite gradient in local update");
    out.weights[c] -= learning_rate * g[c];
  }
  return out;
}

struct WeightedModel {
  LinearModel model;
  double count{0.0};  // Q_i
};

// Count-weighted mean of the participants' models.
inline LinearModel aggregate(std::span<const WeightedModel> models) {
  if (models.empty()) throw ContractError("cannot aggregate an empty participant list");
  const std::size_t dim = models.front().model.dim();
  double q = 0.0;
  for (const auto& m : models) {
    detail::require(m.model.dim() == dim, "participants disagree on model dimension");
    detail::require(m.count > 0.0, "participant sample counts must be positive");
    q += m.count;
  }
  LinearModel out = LinearModel::zeros(models.front().model.task, dim);
  for (const auto& m : models) {
    const double w = m.count / q;
    for (std::size_t c = 0; c < dim; ++c) out.weights[c] += w * m.model.weights[c];
  }
  return out;
}

// Theta = grad F(beta) - (1/Q) sum_i Q_i rho_i
inline std::vector<double> global_correction(const LinearModel& global,
                                             std::span<const WeightedModel> models,
                                             std::span<const TrainingBatch> batches,
                                             double ridge) {
  const auto grad = global_gradient(global, batches, ridge);
  const auto mean = aggregate(models);
  detail::require(mean.dim() == grad.size(), "dimension mismatch");
  std::vector<double> theta(grad.size());
  for (std::size_t c = 0; c < grad.size(); ++c) theta[c] = grad[c] - mean.weights[c];
  return theta;
}

// beta - eta * (grad F - Theta)
inline LinearModel global_update(const LinearModel& global, std::span<const double> theta,
                                 std::span<const double> grad, double learning_rate) {
  detail::require(theta.size() == global.dim() && grad.size() == global.dim(),
                  "dimension mismatch");
  LinearModel out = global;
  for (std::size_t c = 0; c < out.dim(); ++c) {
    out.weights[c] -= learning_rate * (grad[c] - theta[c]);
  }
  return out;
}

struct TrainReport {
  LinearModel model;
  std::vector<double> loss;  // global loss before training, then after each round
};

// Runs `rounds` aggregations. Each round every participant takes
// `local_steps` gradient steps starting from the current global model, then
// the MBS merges the local models according to `mode`. Starts from zeros
// unless a warm start is given.
inline TrainReport train(std::span<const TrainingBatch> participants, const FedConfig& config,
                         std::optional<LinearModel> init = std::nullopt) {
  config.validate();
  if (participants.empty()) throw ContractError("training needs at least one participant");
  const std::size_t dim = participants.front().dim();
  for (const auto& b : participants) {
    detail::require(b.dim() == dim, "participants disagree on feature dimension");
    detail::require(!b.empty(), "participant batch is empty");
  }
  LinearModel global = init ? std::move(*init) : LinearModel::zeros(config.task, dim);
  global.task = config.task;
  detail::require(global.dim() == dim, "initial model dimension mismatch");

  TrainReport report;
  const double initial = global_loss(global, participants, config.ridge);
  const double limit = 1e6 * std::max(initial, std::numeric_limits<double>::min());
  report.loss.push_back(initial);

  std::vector<WeightedModel> locals(participants.size());
  for (std::size_t round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < participants.size(); ++i) {
      LinearModel rho = global;
      for (std::size_t s = 0; s < config.local_steps; ++s) {
        rho = local_update(rho, participants[i], config.learning_rate, config.ridge);
      }
      locals[i] = {std::move(rho), static_cast<double>(participants[i].size())};
    }
    if (config.mode == FlMode::kFedAvg) {
      global = aggregate(locals);
    } else {
      const auto grad = global_gradient(global, participants, config.ridge);
      const auto theta = global_correction(global, locals, participants, config.ridge);
      global = global_update(global, theta, grad, config.learning_rate);
    }
    const double loss = global_loss(global, participants, config.ridge);
    report.loss.push_back(loss);
    if (!std::isfinite(loss) || !global.finite() || loss > limit) {
      throw DivergenceError(detail::concat("federated training diverged at round ", round + 1,
                                           ": loss ", loss, " vs initial ", initial));
    }
  }
  report.model = std::move(global);
  return report;
}

}  // namespace mobcache
