#include "vild/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "vild/errors.hpp"
#include "vild/parallel.hpp"
#include "vild/training_kernels.hpp"

namespace vild {

RegionHead::RegionHead(std::size_t in, std::size_t out)
    : in_dim(in), out_dim(out), weight(in * out, 0.0), bias(out, 0.0), background(out, 0.0) {}

std::vector<double> RegionHead::embed(std::span<const double> feature) const {
  std::vector<double> out(out_dim);
  embed_into(feature, out);
  return out;
}

void RegionHead::embed_into(std::span<const double> feature, std::span<double> out) const {
  if (feature.size() != in_dim) {
    throw FormatError("region head: feature dim " + std::to_string(feature.size()) + ", expected " +
                      std::to_string(in_dim));
  }
  for (std::size_t i = 0; i < out_dim; ++i) {
    const double* row = weight.data() + i * in_dim;
    double s = bias[i];
    for (std::size_t j = 0; j < in_dim; ++j) s += row[j] * feature[j];
    out[i] = s;
  }
}

bool RegionHead::all_finite() const noexcept {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(weight) && finite(bias) && finite(background);
}

RegionHead init_head(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  if (in_dim == 0 || out_dim == 0) throw ConfigError("init_head: dimensions must be positive");
  RegionHead head(in_dim, out_dim);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (double& w : head.weight) w = uniform(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& v : head.background) {
      v = normal(rng);
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double norm = std::sqrt(norm2);
  for (double& v : head.background) v /= norm;
  return head;
}

HeadGradient::HeadGradient(const RegionHead& like)
    : weight(like.weight.size(), 0.0), bias(like.bias.size(), 0.0), background(like.background.size(), 0.0) {}

void HeadGradient::add_scaled(const HeadGradient& other, double scale) {
  for (std::size_t i = 0; i < weight.size(); ++i) weight[i] += scale * other.weight[i];
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += scale * other.bias[i];
  for (std::size_t i = 0; i < background.size(); ++i) background[i] += scale * other.background[i];
}

std::string_view to_string(DistillNorm norm) { return norm == DistillNorm::l1 ? "L1" : "L2"; }

DistillNorm parse_distill_norm(std::string_view text) {
  if (text == "L1" || text == "l1") return DistillNorm::l1;
  if (text == "L2" || text == "l2") return DistillNorm::l2;
  throw ConfigError("unknown distill norm '" + std::string(text) + "' (expected L1 or L2)");
}

namespace detail {

void check_head_against(const RegionHead& head, const TextClassifier& clf) {
  if (clf.dim() != head.out_dim) {
    throw FormatError("classifier dim " + std::to_string(clf.dim()) + " does not match head output dim " +
                      std::to_string(head.out_dim));
  }
}

void accumulate_text_proposal(const RegionHead& head, const TextClassifier& clf, const OnlineProposal& proposal,
                              double weight, LossResult& acc, Workspace& ws) {
  const std::size_t d = head.out_dim;
  const std::size_t k_count = clf.num_categories() + 1;
  ws.resize(d, k_count);
  head.embed_into(proposal.feature, ws.e);

  const std::size_t target = proposal.label == kBackgroundLabel ? 0 : clf.slot_of(proposal.label);

  const double ne2 = dot(ws.e, ws.e);
  const double ne = std::sqrt(ne2);
  if (!(ne > 0.0)) throw NumericalError("vild_text_loss: region embedding has zero norm");

  auto slot_vector = [&](std::size_t k) -> std::span<const double> {
    return k == 0 ? std::span<const double>(head.background) : clf.text_embeddings()[k - 1].values();
  };

  double max_s = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto u = slot_vector(k);
    ws.unorm[k] = l2_norm(u);
    if (!(ws.unorm[k] > 0.0)) throw NumericalError("vild_text_loss: zero-norm class embedding");
    ws.cos[k] = dot(ws.e, u) / (ne * ws.unorm[k]);
    max_s = std::max(max_s, ws.cos[k] / clf.tau());
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) sum += std::exp(ws.cos[k] / clf.tau() - max_s);
  const double lse = max_s + std::log(sum);
  acc.loss += weight * (lse - ws.cos[target] / clf.tau());

  // dL/dcos_k = (p_k - [k == y]) / tau
  double gc_dot_c = 0.0;
  std::fill(ws.grad_e.begin(), ws.grad_e.end(), 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double p = std::exp(ws.cos[k] / clf.tau() - lse);
    const double g = (p - (k == target ? 1.0 : 0.0)) / clf.tau();
    ws.gcos[k] = g;
    gc_dot_c += g * ws.cos[k];
    const auto u = slot_vector(k);
    const double scale = g / (ne * ws.unorm[k]);
    for (std::size_t i = 0; i < d; ++i) ws.grad_e[i] += scale * u[i];
  }
  for (std::size_t i = 0; i < d; ++i) ws.grad_e[i] -= gc_dot_c * ws.e[i] / ne2;

  const auto& bg = head.background;
  const double nbg = ws.unorm[0];
  const double bg_a = weight * ws.gcos[0] / (ne * nbg);
  const double bg_b = weight * ws.gcos[0] * ws.cos[0] / (nbg * nbg);
  for (std::size_t i = 0; i < d; ++i) acc.grad.background[i] += bg_a * ws.e[i] - bg_b * bg[i];

  accumulate_affine(head, proposal.feature, ws.grad_e, weight, acc.grad);
}

void accumulate_image_proposal(const RegionHead& head, const OfflineProposal& proposal, DistillNorm norm,
                               double weight, LossResult& acc, Workspace& ws) {
  const std::size_t d = head.out_dim;
  if (proposal.teacher.dim() != d) {
    throw FormatError("vild_image_loss: teacher dim " + std::to_string(proposal.teacher.dim()) +
                      " does not match head output dim " + std::to_string(d));
  }
  ws.resize(d, 1);
  head.embed_into(proposal.feature, ws.e);
  double loss = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = ws.e[i] - proposal.teacher[i];
    if (norm == DistillNorm::l1) {
      loss += std::abs(diff);
      ws.grad_e[i] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    } else {
      loss += diff * diff;
      ws.grad_e[i] = 2.0 * diff;
    }
  }
  acc.loss += weight * loss;
  accumulate_affine(head, proposal.feature, ws.grad_e, weight, acc.grad);
}

void accumulate_affine(const RegionHead& head, std::span<const double> feature, std::span<const double> grad_e,
                       double weight, HeadGradient& grad) {
  for (std::size_t i = 0; i < head.out_dim; ++i) {
    const double g = weight * grad_e[i];
    grad.bias[i] += g;
    double* row = grad.weight.data() + i * head.in_dim;
    for (std::size_t j = 0; j < head.in_dim; ++j) row[j] += g * feature[j];
  }
}

}  // namespace detail

LossResult vild_text_loss(const RegionHead& head, const TextClassifier& base_clf,
                          std::span<const OnlineProposal> online) {
  if (online.empty()) throw FormatError("vild_text_loss: empty proposal set");
  detail::check_head_against(head, base_clf);
  LossResult acc{0.0, HeadGradient(head)};
  detail::Workspace ws;
  const double weight = 1.0 / static_cast<double>(online.size());
  for (const auto& p : online) detail::accumulate_text_proposal(head, base_clf, p, weight, acc, ws);
  return acc;
}

LossResult vild_image_loss(const RegionHead& head, std::span<const OfflineProposal> offline, DistillNorm norm) {
  if (offline.empty()) throw FormatError("vild_image_loss: empty offline proposal set");
  LossResult acc{0.0, HeadGradient(head)};
  detail::Workspace ws;
  const double weight = 1.0 / static_cast<double>(offline.size());
  for (const auto& p : offline) detail::accumulate_image_proposal(head, p, norm, weight, acc, ws);
  return acc;
}

LossResult vild_loss(const RegionHead& head, const TextClassifier& base_clf, const TrainingSample& sample,
                     const TrainConfig& cfg) {
  if (sample.online.empty() && sample.offline.empty()) {
    throw FormatError("vild_loss: image " + std::to_string(sample.image_id) + " has no proposals");
  }
  if (cfg.distill_weight < 0.0 || cfg.text_weight < 0.0) throw ConfigError("vild_loss: weights must be non-negative");
  LossResult out{0.0, HeadGradient(head)};
  if (!sample.online.empty() && cfg.text_weight != 0.0) {
    auto text = vild_text_loss(head, base_clf, sample.online);
    if (cfg.text_weight == 1.0) {
      out = std::move(text);
    } else {
      out.loss = cfg.text_weight * text.loss;
      out.grad.add_scaled(text.grad, cfg.text_weight);
    }
  }
  if (!sample.offline.empty() && cfg.distill_weight != 0.0) {
    const auto image = vild_image_loss(head, sample.offline, cfg.distill_norm);
    out.loss += cfg.distill_weight * image.loss;
    out.grad.add_scaled(image.grad, cfg.distill_weight);
  }
  return out;
}

LossResult dataset_loss(const RegionHead& head, const TextClassifier& base_clf,
                        std::span<const TrainingSample> dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw FormatError("dataset_loss: empty dataset");
  const auto n = static_cast<std::ptrdiff_t>(dataset.size());
  std::vector<LossResult> per_sample(dataset.size());
  std::vector<std::string> errors(dataset.size());
  std::vector<int> codes(dataset.size(), 0);

#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    try {
      per_sample[s] = vild_loss(head, base_clf, dataset[s], cfg);
    } catch (const Error& e) {
      errors[s] = e.what();
      codes[s] = static_cast<int>(e.code());
    }
  }
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    if (codes[s] != 0) throw Error(static_cast<ExitCode>(codes[s]), errors[s]);
  }

  LossResult total{0.0, HeadGradient(head)};
  for (const auto& r : per_sample) {
    total.loss += r.loss;
    total.grad.add_scaled(r.grad, 1.0);
  }
  const double inv = 1.0 / static_cast<double>(dataset.size());
  total.loss *= inv;
  for (double& g : total.grad.weight) g *= inv;
  for (double& g : total.grad.bias) g *= inv;
  for (double& g : total.grad.background) g *= inv;
  return total;
}

double learning_rate_at(const TrainConfig& cfg, int iteration) {
  const double frac = cfg.iterations > 0 ? static_cast<double>(iteration) / cfg.iterations : 0.0;
  double lr = cfg.learning_rate;
  for (double boundary : {0.9, 0.95, 0.975}) {
    if (frac >= boundary) lr /= 10.0;
  }
  return lr;
}

TrainResult train(std::span<const TrainingSample> dataset, const TextClassifier& base_clf, const TrainConfig& cfg,
                  const LossObserver& observer) {
  if (dataset.empty()) throw FormatError("train: empty dataset");
  if (cfg.iterations < 0) throw ConfigError("train: iterations must be non-negative");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");

  std::size_t in_dim = 0;
  for (const auto& s : dataset) {
    for (const auto& p : s.online) in_dim = in_dim ? in_dim : p.feature.size();
    for (const auto& p : s.offline) in_dim = in_dim ? in_dim : p.feature.size();
    if (in_dim) break;
  }
  if (in_dim == 0) throw FormatError("train: dataset has no proposals");

  TrainResult result{init_head(in_dim, base_clf.dim(), cfg.seed), {}};
  const TrainConfig& loss_cfg = cfg;
  TextClassifier clf = base_clf.tau() == cfg.tau ? base_clf
                                                 : TextClassifier(base_clf.category_ids(), base_clf.text_embeddings(),
                                                                  {base_clf.background().begin(), base_clf.background().end()},
                                                                  cfg.tau);
  result.loss_log.reserve(static_cast<std::size_t>(cfg.iterations));
  auto& head = result.head;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto r = dataset_loss(head, clf, dataset, loss_cfg);
    if (!std::isfinite(r.loss)) {
      throw NumericalError("train: loss became non-finite at iteration " + std::to_string(it));
    }
    const double lr = learning_rate_at(cfg, it);
    result.loss_log.push_back(r.loss);
    if (observer) observer(it, r.loss, lr);
    for (std::size_t i = 0; i < head.weight.size(); ++i) head.weight[i] -= lr * r.grad.weight[i];
    for (std::size_t i = 0; i < head.bias.size(); ++i) head.bias[i] -= lr * r.grad.bias[i];
    for (std::size_t i = 0; i < head.background.size(); ++i) head.background[i] -= lr * r.grad.background[i];
    if (!head.all_finite()) {
      throw NumericalError("train: parameters became non-finite at iteration " + std::to_string(it) +
                           " (learning rate " + std::to_string(lr) + ")");
    }
  }
  return result;
}

EmbeddingTable head_to_table(const RegionHead& head) {
  EmbeddingTable t;
  t.dim = head.out_dim;
  for (std::size_t j = 0; j < head.in_dim; ++j) {
    std::vector<double> col(head.out_dim);
    for (std::size_t i = 0; i < head.out_dim; ++i) col[i] = head.weight[i * head.in_dim + j];
    t.records.push_back({"W.col." + std::to_string(j), std::move(col)});
  }
  t.records.push_back({"b", head.bias});
  t.records.push_back({kBackgroundKey, head.background});
  return t;
}

RegionHead head_from_table(const EmbeddingTable& table) {
  if (table.records.size() < 3) throw FormatError("head file: expected at least 3 records");
  const std::size_t in_dim = table.records.size() - 2;
  // Binary files carry positional ids; text files must name every record.
  const bool positional = table.records.front().id == "0";
  auto expect = [&](std::size_t index, const std::string& name) -> const std::vector<double>& {
    const auto& rec = table.records[index];
    if (!positional && rec.id != name) {
      throw FormatError("head file: record " + std::to_string(index) + " is '" + rec.id + "', expected '" + name + "'");
    }
    return rec.values;
  };
  RegionHead head(in_dim, table.dim);
  for (std::size_t j = 0; j < in_dim; ++j) {
    const auto& col = expect(j, "W.col." + std::to_string(j));
    for (std::size_t i = 0; i < table.dim; ++i) head.weight[i * in_dim + j] = col[i];
  }
  head.bias = expect(in_dim, "b");
  head.background = expect(in_dim + 1, kBackgroundKey);
  if (!head.all_finite()) throw NumericalError("head file: non-finite parameters");
  return head;
}

}  // namespace vild
