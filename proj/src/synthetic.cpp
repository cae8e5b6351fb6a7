#include "vild/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <string>

#include "vild/errors.hpp"

namespace vild {

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  std::vector<double> gaussian(std::size_t dim, double sigma) {
    std::vector<double> v(dim);
    for (double& x : v) x = sigma * normal();
    return v;
  }

  Embedding unit(std::size_t dim) {
    while (true) {
      auto v = gaussian(dim, 1.0);
      if (l2_norm(v) > 1e-12) return l2_normalize(v);
    }
  }

  // Unit vector perturbed by noise of expected norm `relative`, renormalized.
  Embedding perturbed(const Embedding& base, double relative) {
    const double per_coord = relative / std::sqrt(static_cast<double>(base.dim()));
    std::vector<double> v(base.dim());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + per_coord * normal();
    return l2_normalize(v);
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Values are quantized to 9 significant digits so that files written from a
// benchmark reload to exactly the same in-memory values.
double q(double v) {
  const auto text = format_real(v);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

std::vector<double> quantized(std::vector<double> v) {
  for (double& x : v) x = q(x);
  return v;
}

Embedding quantized(const Embedding& e) { return Embedding(quantized(std::vector<double>(e.values().begin(), e.values().end()))); }

struct Mixing {
  std::size_t in_dim;
  std::size_t out_dim;
  std::vector<double> a;  // in_dim x out_dim

  std::vector<double> feature(const Embedding& latent, double noise, Sampler& s) const {
    std::vector<double> f(in_dim);
    for (std::size_t r = 0; r < in_dim; ++r) {
      double v = 0.0;
      for (std::size_t c = 0; c < out_dim; ++c) v += a[r * out_dim + c] * latent[c];
      f[r] = v + noise * s.normal();
    }
    return quantized(std::move(f));
  }
};

Box random_box(Sampler& s, double image_size) {
  const double w = s.uniform(0.06, 0.3) * image_size;
  const double h = s.uniform(0.06, 0.3) * image_size;
  const double x = s.uniform(0.0, image_size - w);
  const double y = s.uniform(0.0, image_size - h);
  return Box{q(x), q(y), q(x + w), q(y + h)};
}

Box jittered(const Box& b, Sampler& s) {
  const double w = b.x2 - b.x1;
  const double h = b.y2 - b.y1;
  const double j = 0.02;
  return Box{q(b.x1 + s.uniform(-j, j) * w), q(b.y1 + s.uniform(-j, j) * h), q(b.x2 + s.uniform(-j, j) * w),
             q(b.y2 + s.uniform(-j, j) * h)};
}

}  // namespace

SyntheticBenchmark gen_synthetic_benchmark(const SyntheticConfig& cfg) {
  if (cfg.out_dim < 2) throw ConfigError("synthetic: out_dim must be at least 2");
  if (cfg.in_dim < 1) throw ConfigError("synthetic: in_dim must be positive");
  if (cfg.num_base < 1) throw ConfigError("synthetic: need at least one base category");
  if (cfg.num_novel < 0) throw ConfigError("synthetic: num_novel must be non-negative");
  if (cfg.train_images < 1 || cfg.eval_images < 0) throw ConfigError("synthetic: bad image counts");
  if (cfg.online_per_image < 1 || cfg.offline_per_image < 1 || cfg.objects_per_image < 1) {
    throw ConfigError("synthetic: per-image counts must be positive");
  }
  if (cfg.clutter_prototypes < 1) throw ConfigError("synthetic: need at least one clutter prototype");

  Sampler s(cfg.seed);
  SyntheticBenchmark out;
  const int num_categories = cfg.num_base + cfg.num_novel;

  std::vector<Category> cats;
  for (int c = 0; c < num_categories; ++c) {
    Category cat;
    cat.id = c;
    cat.name = "object" + std::to_string(c);
    if (c < cfg.num_base) {
      cat.split = Split::base;
      cat.frequency = c % 2 == 0 ? Frequency::frequent : Frequency::common;
    } else {
      cat.split = Split::novel;
      cat.frequency = Frequency::rare;
    }
    cats.push_back(std::move(cat));
  }
  out.vocab = Vocabulary(std::move(cats));

  for (int c = 0; c < num_categories; ++c) out.true_embeddings.push_back(s.unit(cfg.out_dim));
  std::vector<Embedding> clutter;
  for (int k = 0; k < cfg.clutter_prototypes; ++k) clutter.push_back(s.unit(cfg.out_dim));

  Mixing mixing{cfg.in_dim, cfg.out_dim, s.gaussian(cfg.in_dim * cfg.out_dim, 1.0)};

  out.text_embeddings.dim = cfg.out_dim;
  for (int c = 0; c < num_categories; ++c) {
    const auto t = s.perturbed(out.true_embeddings[c], cfg.text_noise);
    out.text_embeddings.records.push_back({std::to_string(c), quantized(std::vector<double>(t.values().begin(), t.values().end()))});
  }

  auto teacher_for = [&](const Embedding& latent) { return quantized(s.perturbed(latent, cfg.teacher_noise)); };

  for (int img = 0; img < cfg.train_images; ++img) {
    TrainingSample sample;
    sample.image_id = img;
    std::vector<int> objects;
    for (int o = 0; o < cfg.objects_per_image; ++o) objects.push_back(s.pick(num_categories));

    for (int n = 0; n < cfg.online_per_image; ++n) {
      if (n < static_cast<int>(objects.size())) {
        const int c = objects[n];
        const int label = c < cfg.num_base ? c : kBackgroundLabel;
        sample.online.push_back({mixing.feature(out.true_embeddings[c], cfg.feature_noise, s), label});
      } else {
        const auto& proto = clutter[s.pick(cfg.clutter_prototypes)];
        sample.online.push_back({mixing.feature(proto, cfg.feature_noise, s), kBackgroundLabel});
      }
    }
    for (int m = 0; m < cfg.offline_per_image; ++m) {
      const Embedding& latent = m < static_cast<int>(objects.size()) ? out.true_embeddings[objects[m]]
                                                                     : clutter[s.pick(cfg.clutter_prototypes)];
      sample.offline.push_back({mixing.feature(latent, cfg.feature_noise, s), teacher_for(latent)});
    }
    out.train.push_back(std::move(sample));
  }

  const int clutter_per_image = std::max(1, cfg.online_per_image - cfg.objects_per_image);
  for (int img = 0; img < cfg.eval_images; ++img) {
    ProposalImage pimg;
    pimg.image_id = cfg.train_images + img;
    std::vector<int> labels;
    std::vector<Box> placed;
    for (int o = 0; o < cfg.objects_per_image; ++o) {
      const int c = s.pick(num_categories);
      Box box = random_box(s, cfg.image_size);
      for (int attempt = 0; attempt < 20; ++attempt) {
        const bool clear = std::none_of(placed.begin(), placed.end(), [&](const Box& b) { return iou(b, box) > 0.1; });
        if (clear) break;
        box = random_box(s, cfg.image_size);
      }
      placed.push_back(box);
      out.eval_gt.push_back({pimg.image_id, c, box});
      pimg.proposals.push_back({jittered(box, s), q(s.uniform(0.7, 1.0)), mixing.feature(out.true_embeddings[c], cfg.feature_noise, s)});
      labels.push_back(c);
    }
    for (int k = 0; k < clutter_per_image; ++k) {
      const auto& proto = clutter[s.pick(cfg.clutter_prototypes)];
      pimg.proposals.push_back({random_box(s, cfg.image_size), q(s.uniform(0.05, 0.7)), mixing.feature(proto, cfg.feature_noise, s)});
      labels.push_back(kBackgroundLabel);
    }
    out.eval_proposals.push_back(std::move(pimg));
    out.eval_proposal_labels.push_back(std::move(labels));
  }
  return out;
}

}  // namespace vild
