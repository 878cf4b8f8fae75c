#include "hyfem/matching.hpp"

#include <algorithm>
#include <string>

#include "hyfem/errors.hpp"

namespace hyfem::matching {

namespace {

void check_feature_set(std::span<const std::size_t> feature_set, const data::FeatureSchema& schema) {
  if (feature_set.empty()) throw StructuralError("feature set is empty");
  for (std::size_t k = 0; k < feature_set.size(); ++k) {
    if (feature_set[k] >= schema.num_blocks()) throw StructuralError("feature index outside schema");
    if (k > 0 && feature_set[k] <= feature_set[k - 1])
      throw StructuralError("feature set must be sorted and duplicate-free");
  }
}

void check_pattern(const MatchingPattern& pattern, Eigen::Index global_width, Eigen::Index local_width) {
  if (pattern.global_width != global_width) throw StructuralError("pattern global width does not match head");
  if (pattern.local_width() != local_width) throw StructuralError("pattern local width does not match head");
  if (!pattern.valid()) throw StructuralError("matching pattern is not a valid assignment");
}

}  // namespace

Matrix MatchingPattern::matrix() const {
  Matrix pi = Matrix::Zero(local_width(), global_width);
  for (Eigen::Index i = 0; i < local_width(); ++i) pi(i, assignment[static_cast<std::size_t>(i)]) = 1.0;
  return pi;
}

bool MatchingPattern::valid() const {
  std::vector<char> taken(static_cast<std::size_t>(std::max<Eigen::Index>(global_width, 0)), 0);
  for (auto j : assignment) {
    if (j < 0 || j >= global_width) return false;
    if (taken[static_cast<std::size_t>(j)]) return false;
    taken[static_cast<std::size_t>(j)] = 1;
  }
  return true;
}

MatchingPattern MatchingPattern::identity(std::size_t client_id, Eigen::Index local_width, Eigen::Index global_width) {
  if (local_width > global_width) throw CapacityError("identity pattern needs H_m <= H_0");
  MatchingPattern p{client_id, {}, global_width};
  p.assignment.resize(static_cast<std::size_t>(local_width));
  for (Eigen::Index i = 0; i < local_width; ++i) p.assignment[static_cast<std::size_t>(i)] = i;
  return p;
}

void validate_head(const Mlp& head) {
  head.validate();
  if (head.layers.size() != 2) throw StructuralError("inference head must have exactly one hidden layer");
  if (head.layers.back().activation != nn::Activation::Softmax)
    throw StructuralError("inference head must end in softmax");
}

GlobalHead make_global_head(Eigen::Index input_width, Eigen::Index hidden_width, Eigen::Index num_classes) {
  GlobalHead g;
  g.model.layers.push_back(
      nn::Layer{Matrix::Zero(hidden_width, input_width), Vector::Zero(hidden_width), nn::Activation::ReLU});
  g.model.layers.push_back(
      nn::Layer{Matrix::Zero(num_classes, hidden_width), Vector::Zero(num_classes), nn::Activation::Softmax});
  g.match_counts.assign(static_cast<std::size_t>(hidden_width), 0);
  return g;
}

Vector column_mask(std::span<const std::size_t> feature_set, const data::FeatureSchema& schema) {
  check_feature_set(feature_set, schema);
  const Eigen::Index E = schema.embed_width;
  Vector mask = Vector::Zero(schema.embedding_width());
  for (auto d : feature_set) mask.segment(static_cast<Eigen::Index>(d) * E, E).setOnes();
  return mask;
}

EmbeddedHead embed_local_head(const Mlp& head, std::span<const std::size_t> feature_set,
                              const data::FeatureSchema& schema) {
  validate_head(head);
  check_feature_set(feature_set, schema);
  const Eigen::Index E = schema.embed_width;
  const auto owned = static_cast<Eigen::Index>(feature_set.size());
  if (head.input_width() != owned * E)
    throw StructuralError("head input width " + std::to_string(head.input_width()) + " does not match |D_m|*E = " +
                          std::to_string(owned * E));
  EmbeddedHead out;
  out.model = head;
  const auto& local = head.layers.front().weights;
  Matrix embedded = Matrix::Zero(local.rows(), schema.embedding_width());
  for (Eigen::Index k = 0; k < owned; ++k)
    embedded.middleCols(static_cast<Eigen::Index>(feature_set[static_cast<std::size_t>(k)]) * E, E) =
        local.middleCols(k * E, E);
  out.model.layers.front().weights = std::move(embedded);
  out.column_mask = column_mask(feature_set, schema);
  return out;
}

Mlp project_head(const Mlp& embedded, std::span<const std::size_t> feature_set, const data::FeatureSchema& schema) {
  validate_head(embedded);
  check_feature_set(feature_set, schema);
  if (embedded.input_width() != schema.embedding_width())
    throw StructuralError("embedded head input width does not match D*E");
  const Eigen::Index E = schema.embed_width;
  const auto owned = static_cast<Eigen::Index>(feature_set.size());
  Mlp out = embedded;
  const auto& full = embedded.layers.front().weights;
  Matrix local(full.rows(), owned * E);
  for (Eigen::Index k = 0; k < owned; ++k)
    local.middleCols(k * E, E) = full.middleCols(static_cast<Eigen::Index>(feature_set[static_cast<std::size_t>(k)]) * E, E);
  out.layers.front().weights = std::move(local);
  return out;
}

Matrix neuron_rows(const Mlp& head) {
  validate_head(head);
  const auto& hidden = head.layers[0];
  const auto& output = head.layers[1];
  const Eigen::Index in = hidden.in_width();
  const Eigen::Index H = hidden.out_width();
  const Eigen::Index C = output.out_width();
  Matrix rows(H, in + 1 + C);
  rows.leftCols(in) = hidden.weights;
  rows.col(in) = hidden.bias;
  rows.rightCols(C) = output.weights.transpose();
  return rows;
}

Vector neuron_mask(const EmbeddedHead& head) {
  const Eigen::Index in = head.model.input_width();
  const Eigen::Index C = head.model.output_width();
  if (head.column_mask.size() != in) throw StructuralError("column mask does not match head input width");
  Vector mask = Vector::Ones(in + 1 + C);
  mask.head(in) = head.column_mask;
  return mask;
}

void set_neuron_rows(Mlp& head, const Matrix& rows) {
  validate_head(head);
  auto& hidden = head.layers[0];
  auto& output = head.layers[1];
  const Eigen::Index in = hidden.in_width();
  const Eigen::Index C = output.out_width();
  if (rows.rows() != hidden.out_width() || rows.cols() != in + 1 + C)
    throw StructuralError("neuron rows do not match head shape");
  hidden.weights = rows.leftCols(in);
  hidden.bias = rows.col(in);
  output.weights = rows.rightCols(C).transpose();
}

Matrix matching_cost(const Matrix& global_rows, const Matrix& local_rows, const Vector& mask) {
  if (global_rows.cols() != local_rows.cols() || mask.size() != global_rows.cols())
    throw StructuralError("matching_cost: neuron descriptor widths differ");
  if (local_rows.rows() > global_rows.rows())
    throw CapacityError("local head has more hidden neurons than the global head");
  const Eigen::Index n = global_rows.rows();
  Matrix cost = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < local_rows.rows(); ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cost(i, j) = ((global_rows.row(j) - local_rows.row(i)).array().square() * mask.transpose().array()).sum();
  return cost;
}

MatchResult match_neurons(const Matrix& global_rows, const Matrix& local_rows, const Vector& mask,
                          std::size_t client_id) {
  const Matrix cost = matching_cost(global_rows, local_rows, mask);
  const Assignment a = hungarian(cost);
  MatchResult out;
  out.pattern.client_id = client_id;
  out.pattern.global_width = global_rows.rows();
  out.pattern.assignment.assign(a.row_to_col.begin(), a.row_to_col.begin() + local_rows.rows());
  for (Eigen::Index i = 0; i < local_rows.rows(); ++i) out.cost += cost(i, a.row_to_col[static_cast<std::size_t>(i)]);
  return out;
}

MatchResult match_client(const GlobalHead& global, const EmbeddedHead& local, std::size_t client_id) {
  if (local.hidden_width() > global.hidden_width())
    throw CapacityError("client " + std::to_string(client_id) + " has " + std::to_string(local.hidden_width()) +
                        " hidden neurons but the global head only " + std::to_string(global.hidden_width()));
  if (local.model.input_width() != global.model.input_width() ||
      local.model.output_width() != global.model.output_width())
    throw StructuralError("embedded head does not match the global head layout");
  return match_neurons(neuron_rows(global.model), neuron_rows(local.model), neuron_mask(local), client_id);
}

Matrix average_matched(const Matrix& prev, std::span<const MatchingPattern> patterns,
                       std::span<const Matrix> local_rows, std::span<const Vector> masks, std::vector<int>* counts) {
  if (patterns.size() != local_rows.size() || patterns.size() != masks.size())
    throw StructuralError("average_matched: one pattern, row block and mask per client");
  Matrix sum = Matrix::Zero(prev.rows(), prev.cols());
  Matrix weight = Matrix::Zero(prev.rows(), prev.cols());
  if (counts) counts->assign(static_cast<std::size_t>(prev.rows()), 0);
  for (std::size_t k = 0; k < patterns.size(); ++k) {
    const auto& p = patterns[k];
    const auto& rows = local_rows[k];
    if (rows.cols() != prev.cols() || masks[k].size() != prev.cols())
      throw StructuralError("average_matched: descriptor width mismatch");
    check_pattern(p, prev.rows(), rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const auto j = p.assignment[static_cast<std::size_t>(i)];
      sum.row(j) += (rows.row(i).array() * masks[k].transpose().array()).matrix();
      weight.row(j) += masks[k].transpose();
      if (counts) ++(*counts)[static_cast<std::size_t>(j)];
    }
  }
  return (weight.array() > 0).select(sum.array() / weight.array().max(1.0), prev.array()).matrix();
}

GlobalHead update_global_head(std::span<const MatchingPattern> patterns, std::span<const EmbeddedHead> heads,
                              const GlobalHead& prev) {
  if (patterns.size() != heads.size()) throw StructuralError("update_global_head: one pattern per head");
  GlobalHead out = prev;
  if (patterns.empty()) return out;
  std::vector<Matrix> rows;
  std::vector<Vector> masks;
  rows.reserve(heads.size());
  masks.reserve(heads.size());
  Vector bias_sum = Vector::Zero(prev.model.output_width());
  for (const auto& h : heads) {
    if (h.model.input_width() != prev.model.input_width() || h.model.output_width() != prev.model.output_width())
      throw StructuralError("embedded head does not match the global head layout");
    rows.push_back(neuron_rows(h.model));
    masks.push_back(neuron_mask(h));
    bias_sum += h.model.layers[1].bias;
  }
  const Matrix merged = average_matched(neuron_rows(prev.model), patterns, rows, masks, &out.match_counts);
  set_neuron_rows(out.model, merged);
  out.model.layers[1].bias = bias_sum / static_cast<double>(heads.size());
  return out;
}

Mlp apply_pattern(const GlobalHead& global, const MatchingPattern& pattern) {
  check_pattern(pattern, global.hidden_width(), pattern.local_width());
  const Matrix rows = neuron_rows(global.model);
  Matrix picked(pattern.local_width(), rows.cols());
  for (Eigen::Index i = 0; i < pattern.local_width(); ++i)
    picked.row(i) = rows.row(pattern.assignment[static_cast<std::size_t>(i)]);
  Mlp out;
  const Eigen::Index in = global.model.input_width();
  const Eigen::Index C = global.model.output_width();
  out.layers.push_back(nn::Layer{Matrix::Zero(pattern.local_width(), in), Vector::Zero(pattern.local_width()),
                                 nn::Activation::ReLU});
  out.layers.push_back(nn::Layer{Matrix::Zero(C, pattern.local_width()), global.model.layers[1].bias,
                                 nn::Activation::Softmax});
  set_neuron_rows(out, picked);
  return out;
}

Mlp pull_head(const GlobalHead& global, const MatchingPattern& pattern, std::span<const std::size_t> feature_set,
              const data::FeatureSchema& schema) {
  return project_head(apply_pattern(global, pattern), feature_set, schema);
}

double head_distance(const GlobalHead& global, const MatchingPattern& pattern, const EmbeddedHead& head) {
  check_pattern(pattern, global.hidden_width(), head.hidden_width());
  const Matrix g = neuron_rows(global.model);
  const Matrix l = neuron_rows(head.model);
  const Vector mask = neuron_mask(head);
  double total = 0;
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    total += ((g.row(pattern.assignment[static_cast<std::size_t>(i)]) - l.row(i)).array().square() *
              mask.transpose().array())
                 .sum();
  total += (global.model.layers[1].bias - head.model.layers[1].bias).squaredNorm();
  return total;
}

double matching_objective(const GlobalHead& global, std::span<const MatchingPattern> patterns,
                          std::span<const EmbeddedHead> heads) {
  if (patterns.size() != heads.size()) throw StructuralError("matching_objective: one pattern per head");
  double total = 0;
  for (std::size_t k = 0; k < patterns.size(); ++k) total += head_distance(global, patterns[k], heads[k]);
  return total;
}

}  // namespace hyfem::matching
