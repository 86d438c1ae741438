// Copyright 2026 The medtab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "medtab/gbdt.hpp"

#include <algorithm>
#include <cmath>

#include "medtab/metrics.hpp"

namespace medtab {

MemoryMode parse_memory_mode(std::string_view s) {
  if (s == "in_memory" || s == "true") return MemoryMode::InMemory;
  if (s == "external" || s == "false") return MemoryMode::External;
  throw UserError("unknown memory mode '" + std::string(s) + "' (expected in_memory or external)");
}

std::string memory_mode_name(MemoryMode m) { return m == MemoryMode::InMemory ? "in_memory" : "external"; }

void GbdtParams::validate() const {
  if (max_depth < 1) throw UserError("max_depth must be >= 1");
  if (max_bins < 2 || max_bins > 256) throw UserError("max_bins must lie in [2, 256]");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw UserError("learning_rate must be positive");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw UserError("lambda must be >= 0");
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw UserError("gamma must be >= 0");
  if (!(min_child_hessian >= 0)) throw UserError("min_child_hessian must be >= 0");
  if (!(colsample > 0 && colsample <= 1)) throw UserError("colsample must lie in (0, 1]");
}

json GbdtParams::to_json() const {
  return {{"n_trees", n_trees},     {"max_depth", max_depth}, {"max_bins", max_bins},
          {"learning_rate", learning_rate}, {"lambda", lambda}, {"gamma", gamma},
          {"min_child_hessian", min_child_hessian}, {"colsample", colsample}, {"seed", seed}};
}

GbdtParams GbdtParams::from_json(const json& j) {
  GbdtParams p;
  p.n_trees = j.value("n_trees", p.n_trees);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.max_bins = j.value("max_bins", p.max_bins);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.lambda = j.value("lambda", p.lambda);
  p.gamma = j.value("gamma", p.gamma);
  p.min_child_hessian = j.value("min_child_hessian", p.min_child_hessian);
  p.colsample = j.value("colsample", p.colsample);
  p.seed = j.value("seed", p.seed);
  return p;
}

namespace {

float lookup(std::span<const std::uint32_t> cols, std::span<const float> vals, std::uint32_t col, bool& found) {
  const auto it = std::lower_bound(cols.begin(), cols.end(), col);
  found = it != cols.end() && *it == col;
  return found ? vals[static_cast<std::size_t>(it - cols.begin())] : 0.0f;
}

json node_json(const std::vector<TreeNode>& nodes, std::int32_t id) {
  const TreeNode& n = nodes.at(static_cast<std::size_t>(id));
  if (n.is_leaf()) return json::array({n.weight});
  json threshold = std::isinf(n.threshold) ? json(nullptr) : json(static_cast<double>(n.threshold));
  return json::array({n.column, n.bin, threshold, n.default_left, node_json(nodes, n.left), node_json(nodes, n.right)});
}

std::int32_t parse_node(const json& j, std::vector<TreeNode>& nodes, int depth) {
  if (depth > 64) throw DataError("model tree is too deep");
  if (!j.is_array() || (j.size() != 1 && j.size() != 6)) throw DataError("malformed tree node in model");
  const auto id = static_cast<std::int32_t>(nodes.size());
  nodes.emplace_back();
  if (j.size() == 1) {
    nodes[static_cast<std::size_t>(id)].weight = j[0].get<double>();
    return id;
  }
  TreeNode n;
  n.column = j[0].get<std::uint32_t>();
  n.bin = j[1].get<std::uint32_t>();
  n.threshold = j[2].is_null() ? std::numeric_limits<float>::infinity() : static_cast<float>(j[2].get<double>());
  n.default_left = j[3].get<bool>();
  n.left = parse_node(j[4], nodes, depth + 1);
  n.right = parse_node(j[5], nodes, depth + 1);
  nodes[static_cast<std::size_t>(id)] = n;
  return id;
}

// Iterates the filtered rows of every shard as binned matrices, either from
// memory or by rereading the source.
class ShardStream {
 public:
  ShardStream(const TaskSource& source, const RowFilter& filter, MemoryMode mode, const BinningTable& bins)
      : source_(source), filter_(filter), mode_(mode), bins_(bins) {}

  std::vector<std::uint8_t> load_labels() {
    std::vector<std::uint8_t> y;
    for (std::size_t s = 0; s < source_.shard_count(); ++s) {
      const auto shard = checked_shard(s);
      const auto rows = filtered_rows(*shard, filter_);
      offsets_.push_back(y.size());
      sizes_.push_back(rows.size());
      for (std::size_t r : rows) y.push_back(shard->y[r]);
      if (mode_ == MemoryMode::InMemory) prepared_.push_back(bin_rows(shard->x, rows, bins_));
    }
    ++passes_;
    return y;
  }

  template <class Fn>
  void for_each(Fn&& fn) {
    ++passes_;
    if (mode_ == MemoryMode::InMemory) {
      for (std::size_t s = 0; s < prepared_.size(); ++s) fn(prepared_[s], offsets_[s]);
      return;
    }
    for (std::size_t s = 0; s < source_.shard_count(); ++s) {
      const auto shard = checked_shard(s);
      const auto rows = filtered_rows(*shard, filter_);
      if (rows.size() != sizes_[s]) throw DataError("task shard " + shard_name(s) + " changed during training");
      const BinnedMatrix m = bin_rows(shard->x, rows, bins_);
      fn(m, offsets_[s]);
    }
  }

  std::size_t passes() const { return passes_; }

 private:
  std::shared_ptr<const TaskShard> checked_shard(std::size_t s) const {
    auto shard = source_.shard(s);
    if (shard->x.schema_hash != source_.schema_hash() || shard->x.n_cols != source_.n_cols())
      throw DataError("task shard " + shard_name(s) + " has schema " + shard->x.schema_hash + ", expected " +
                      source_.schema_hash());
    return shard;
  }

  const TaskSource& source_;
  const RowFilter& filter_;
  MemoryMode mode_;
  const BinningTable& bins_;
  std::vector<std::size_t> offsets_, sizes_;
  std::vector<BinnedMatrix> prepared_;
  std::size_t passes_ = 0;
};

// Keeps shards resident for in-memory training so the source is read once.
class ResidentSource : public TaskSource {
 public:
  explicit ResidentSource(const TaskSource& src) : n_cols_(src.n_cols()), hash_(src.schema_hash()) {
    for (std::size_t s = 0; s < src.shard_count(); ++s) shards_.push_back(src.shard(s));
  }
  std::size_t shard_count() const override { return shards_.size(); }
  std::shared_ptr<const TaskShard> shard(std::size_t i) const override { return shards_.at(i); }
  std::uint64_t n_cols() const override { return n_cols_; }
  const std::string& schema_hash() const override { return hash_; }

 private:
  std::vector<std::shared_ptr<const TaskShard>> shards_;
  std::uint64_t n_cols_;
  std::string hash_;
};

}  // namespace

double Tree::predict(std::span<const std::uint32_t> cols, std::span<const float> vals) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& n = nodes[id];
    bool found = false;
    const float v = lookup(cols, vals, n.column, found);
    const bool left = found ? v <= n.threshold : n.default_left;
    id = static_cast<std::size_t>(left ? n.left : n.right);
  }
  return nodes[id].weight;
}

json Tree::to_json() const { return nodes.empty() ? json::array({0.0}) : node_json(nodes, 0); }

Tree Tree::from_json(const json& j) {
  Tree t;
  parse_node(j, t.nodes, 0);
  return t;
}

double GbdtModel::predict_margin(std::span<const std::uint32_t> cols, std::span<const float> vals) const {
  double s = base_score;
  for (const Tree& t : trees) s += params.learning_rate * t.predict(cols, vals);
  return s;
}

std::vector<double> GbdtModel::predict_margin(const SparseShardMatrix& x) const {
  if (x.n_cols != n_cols) throw DataError("matrix has " + std::to_string(x.n_cols) + " columns, model expects " +
                                          std::to_string(n_cols));
  std::vector<double> out(x.n_rows());
  for (std::size_t r = 0; r < x.n_rows(); ++r) out[r] = predict_margin(x.row_indices(r), x.row_values(r));
  return out;
}

std::vector<double> GbdtModel::predict_proba(const SparseShardMatrix& x) const {
  auto out = predict_margin(x);
  for (double& v : out) v = sigmoid(v);
  return out;
}

json GbdtModel::to_json() const {
  json edges = json::array();
  for (std::size_t c = 0; c < bins.edges.size(); ++c) {
    if (bins.edges[c].empty()) continue;
    json e = json::array();
    for (float v : bins.edges[c]) e.push_back(static_cast<double>(v));
    edges.push_back(json::array({c, e}));
  }
  json tj = json::array();
  for (const Tree& t : trees) tj.push_back(t.to_json());
  return {{"format", "medtab-gbdt/1"},
          {"params", params.to_json()},
          {"seed", params.seed},
          {"base_score", base_score},
          {"n_cols", n_cols},
          {"schema_hash", schema_hash},
          {"feature_mask", feature_mask},
          {"max_bins", bins.max_bins},
          {"bin_edges", edges},
          {"trees", tj}};
}

std::string GbdtModel::serialize() const { return to_json().dump() + "\n"; }

GbdtModel GbdtModel::from_json(const json& j, const std::string& expected_schema_hash) {
  try {
    if (j.at("format") != "medtab-gbdt/1") throw DataError("unsupported model format");
    GbdtModel m;
    m.params = GbdtParams::from_json(j.at("params"));
    m.base_score = j.at("base_score").get<double>();
    m.n_cols = j.at("n_cols").get<std::uint64_t>();
    m.schema_hash = j.at("schema_hash").get<std::string>();
    if (!expected_schema_hash.empty() && m.schema_hash != expected_schema_hash)
      throw DataError("model was trained on schema " + m.schema_hash + " but the data has schema " +
                      expected_schema_hash);
    m.feature_mask = j.at("feature_mask").get<std::vector<std::uint32_t>>();
    m.bins.max_bins = j.at("max_bins").get<std::uint32_t>();
    m.bins.edges.assign(m.n_cols, {});
    for (const auto& e : j.at("bin_edges")) {
      const auto c = e.at(0).get<std::size_t>();
      if (c >= m.n_cols) throw DataError("bin edge column out of range");
      for (const auto& v : e.at(1)) m.bins.edges[c].push_back(static_cast<float>(v.get<double>()));
    }
    for (const auto& t : j.at("trees")) m.trees.push_back(Tree::from_json(t));
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

GbdtModel GbdtModel::load(const fs::path& path, const std::string& expected_schema_hash) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("cannot parse model " + path.string() + ": " + e.what());
  }
  return from_json(j, expected_schema_hash);
}

GbdtModel fit_gbdt(const TaskSource& source, const RowFilter& filter, const GbdtParams& params, MemoryMode mode,
                   const std::vector<bool>* mask, GbdtFitReport* report) {
  params.validate();
  std::unique_ptr<ResidentSource> resident;
  if (mode == MemoryMode::InMemory) resident = std::make_unique<ResidentSource>(source);
  const TaskSource& src = resident ? static_cast<const TaskSource&>(*resident) : source;

  GbdtModel model;
  model.params = params;
  model.schema_hash = src.schema_hash();
  model.n_cols = src.n_cols();
  model.bins = fit_bins(src, filter, params.max_bins, params.seed, mask);
  for (std::uint32_t c = 0; c < model.n_cols; ++c)
    if (!mask || (*mask)[c]) model.feature_mask.push_back(c);

  ShardStream stream(src, filter, mode, model.bins);
  const std::vector<std::uint8_t> y = stream.load_labels();
  const std::size_t n = y.size();
  const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
  if (n == 0) throw DataError("no training rows");
  if (positives == 0 || positives == n) throw DataError("training rows contain a single class");
  const double prevalence = static_cast<double>(positives) / static_cast<double>(n);
  model.base_score = std::log(prevalence / (1.0 - prevalence));

  std::vector<std::uint32_t> candidates;
  for (std::uint32_t c = 0; c < model.n_cols; ++c)
    if (model.bins.observed[c] > 0) candidates.push_back(c);

  const SplitParams sp{params.lambda, params.gamma, params.min_child_hessian};
  std::vector<double> score(n, model.base_score);
  std::vector<GradStat> gh(n);
  std::vector<std::int32_t> pos(n);
  std::vector<double> losses;

  for (std::uint32_t t = 0; t < params.n_trees; ++t) {
    std::vector<std::uint32_t> cols = candidates;
    if (params.colsample < 1.0 && !cols.empty()) {
      Rng rng(derive_seed(params.seed, t));
      const auto k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(params.colsample * static_cast<double>(cols.size()))));
      for (std::size_t i = 0; i < k && i + 1 < cols.size(); ++i)
        std::swap(cols[i], cols[i + rng.below(cols.size() - i)]);
      cols.resize(std::min(k, cols.size()));
      std::sort(cols.begin(), cols.end());
    }
    const HistLayout layout = HistLayout::make(cols, model.bins);

    GradStat root;
    for (std::size_t r = 0; r < n; ++r) {
      const GradHess d = logistic_grad_hess(score[r], y[r]);
      gh[r] = GradStat::from(d.g, d.h);
      root += gh[r];
    }
    std::fill(pos.begin(), pos.end(), 0);

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<GradStat> stat{root};
    std::vector<std::int32_t> parent{-1};
    std::vector<std::uint32_t> depth{0};
    std::vector<std::int32_t> level{0};
    std::vector<NodeHistogram> parent_hist;  // indexed by node id, empty when released
    bool route = false;

    while (true) {
      std::vector<std::int32_t> expand;
      std::vector<char> expandable(tree.nodes.size(), 0);
      for (std::int32_t id : level) {
        const GradStat& s = stat[static_cast<std::size_t>(id)];
        if (depth[static_cast<std::size_t>(id)] < params.max_depth && s.count >= 2 &&
            s.hess() >= 2 * params.min_child_hessian && !layout.columns.empty()) {
          expand.push_back(id);
          expandable[static_cast<std::size_t>(id)] = 1;
        }
      }
      // Build the smaller child of each expandable pair; derive its sibling.
      std::vector<char> build(tree.nodes.size(), 0);
      std::vector<std::pair<std::int32_t, std::int32_t>> derive;  // (derived, built)
      for (std::int32_t id : expand) {
        const auto u = static_cast<std::size_t>(id);
        const std::int32_t p = parent[u];
        if (p < 0) {
          build[u] = 1;
          continue;
        }
        const TreeNode& pn = tree.nodes[static_cast<std::size_t>(p)];
        const std::int32_t sib = pn.left == id ? pn.right : pn.left;
        if (!expandable[static_cast<std::size_t>(sib)]) {
          build[u] = 1;
          continue;
        }
        if (pn.left != id) continue;  // pair handled from the left child
        const bool left_small = stat[u].count <= stat[static_cast<std::size_t>(sib)].count;
        const std::int32_t small = left_small ? id : sib;
        const std::int32_t large = left_small ? sib : id;
        build[static_cast<std::size_t>(small)] = 1;
        derive.emplace_back(large, small);
      }
      std::vector<NodeHistogram> hist(tree.nodes.size());
      bool any_build = false;
      for (std::size_t u = 0; u < build.size(); ++u)
        if (build[u]) {
          hist[u] = NodeHistogram(layout.cells());
          any_build = true;
        }
      if (route || any_build) {
        stream.for_each([&](const BinnedMatrix& m, std::size_t offset) {
          for (std::size_t lr = 0; lr < m.n_rows(); ++lr) {
            const std::size_t r = offset + lr;
            auto id = static_cast<std::size_t>(pos[r]);
            if (route && !tree.nodes[id].is_leaf()) {
              const TreeNode& nd = tree.nodes[id];
              const int b = m.find(lr, nd.column);
              const bool left = b < 0 ? nd.default_left : static_cast<std::uint32_t>(b) <= nd.bin;
              pos[r] = left ? nd.left : nd.right;
              id = static_cast<std::size_t>(pos[r]);
            }
            if (build[id]) accumulate_row(hist[id], layout, m, lr, gh[r]);
          }
        });
      }
      route = false;
      for (std::size_t u = 0; u < build.size(); ++u)
        if (build[u]) finalize_missing(hist[u], layout);
      for (auto [large, small] : derive) {
        const auto p = static_cast<std::size_t>(parent[static_cast<std::size_t>(large)]);
        hist[static_cast<std::size_t>(large)] = subtract(parent_hist[p], hist[static_cast<std::size_t>(small)]);
      }
      for (std::int32_t id : expand)
        if (!(hist[static_cast<std::size_t>(id)].total == stat[static_cast<std::size_t>(id)]))
          throw InvariantError("histogram total disagrees with node statistics");

      std::vector<std::int32_t> next;
      parent_hist.assign(tree.nodes.size(), NodeHistogram());
      for (std::int32_t id : expand) {
        const auto u = static_cast<std::size_t>(id);
        const auto split = find_best_split(hist[u], layout, model.bins, sp);
        if (!split) continue;
        const auto l = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& nd = tree.nodes[u];
        nd.left = l;
        nd.right = l + 1;
        nd.column = split->column;
        nd.bin = split->bin;
        const auto& e = model.bins.edges[split->column];
        nd.threshold = split->bin < e.size() ? e[split->bin] : std::numeric_limits<float>::infinity();
        nd.default_left = split->default_left;
        stat.push_back(split->left);
        stat.push_back(split->right);
        parent.push_back(id);
        parent.push_back(id);
        depth.push_back(depth[u] + 1);
        depth.push_back(depth[u] + 1);
        next.push_back(l);
        next.push_back(l + 1);
        parent_hist[u] = std::move(hist[u]);
      }
      if (next.empty()) break;
      route = true;
      level = std::move(next);
    }

    for (std::size_t u = 0; u < tree.nodes.size(); ++u)
      if (tree.nodes[u].is_leaf()) tree.nodes[u].weight = leaf_weight(stat[u], params.lambda);
    for (std::size_t r = 0; r < n; ++r)
      score[r] += params.learning_rate * tree.nodes[static_cast<std::size_t>(pos[r])].weight;
    losses.push_back(logloss(score, y));
    log_debug("tree", {{"tree", t}, {"nodes", tree.nodes.size()}, {"train_logloss", losses.back()}});
    model.trees.push_back(std::move(tree));
  }

  if (report) {
    report->train_logloss = std::move(losses);
    report->n_rows = n;
    report->data_passes = stream.passes();
  }
  return model;
}

}  // namespace medtab
