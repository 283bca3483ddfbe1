#include "ntssl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "ntssl/autodiff.hpp"
#include "ntssl/error.hpp"
#include "ntssl/metrics.hpp"
#include "ntssl/optim.hpp"
#include "ntssl/rng.hpp"

namespace ntssl {

void ProbeConfig::validate() const {
  if (epochs < 1) throw UsageError("probe: epochs must be >= 1");
  if (hidden < 1 || batch_size < 1) throw UsageError("probe: hidden and batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("probe: dropout must be in [0,1)");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("probe: train_fraction must be in (0,1)");
  if (!(lr_size >= 0.0) || !(lr_histology >= 0.0)) throw UsageError("probe: learning rates must be >= 0");
}

double ProbeConfig::lr_for(const std::string& attribute) const {
  if (attribute == "size_class") return lr_size;
  if (attribute == "histology_class") return lr_histology;
  throw UsageError("probe: unknown attribute '" + attribute + "'");
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

bool both_classes(std::span<const std::size_t> rows, std::span<const int> labels) {
  bool seen[2] = {false, false};
  for (std::size_t r : rows) seen[labels[r] != 0] = true;
  return seen[0] && seen[1];
}

}  // namespace

IdentitySplit split_by_identity(std::span<const std::string> ids, std::span<const int> labels, double train_fraction,
                                std::uint64_t seed) {
  if (ids.size() != labels.size()) throw UsageError("split: size mismatch");
  const std::set<std::string> distinct(ids.begin(), ids.end());
  const std::vector<std::string> unique(distinct.begin(), distinct.end());
  constexpr std::size_t kAttempts = 10;
  for (std::size_t attempt = 0; attempt < kAttempts; ++attempt) {
    std::vector<std::string> order = unique;
    Rng rng(mix_seed(seed, 0x5b117, attempt));
    shuffle(order, rng);
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(order.size())));
    std::set<std::string> train_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    IdentitySplit split;
    split.attempt = attempt;
    for (std::size_t i = 0; i < ids.size(); ++i) (train_ids.count(ids[i]) ? split.train : split.test).push_back(i);
    if (both_classes(split.train, labels) && both_classes(split.test, labels)) return split;
  }
  throw UsageError("probe: single-class split after 10 attempts");
}

std::vector<double> identity_weights(std::span<const std::string> ids) {
  std::map<std::string, std::size_t> counts;
  for (const auto& id : ids) ++counts[id];
  std::vector<double> w(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) w[i] = 1.0 / static_cast<double>(counts[ids[i]]);
  return w;
}

double weighted_accuracy(std::span<const int> truth, std::span<const int> pred, std::span<const double> weights) {
  double hit = 0.0, total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    total += weights[i];
    if (truth[i] == pred[i]) hit += weights[i];
  }
  return total > 0.0 ? hit / total : 0.0;
}

double accuracy(std::span<const int> truth, std::span<const int> pred) {
  std::vector<double> ones(truth.size(), 1.0);
  return weighted_accuracy(truth, pred, ones);
}

double identity_weighted_macro_f1(std::span<const int> truth, std::span<const int> pred,
                                  std::span<const std::string> ids) {
  const std::vector<double> w = identity_weights(ids);
  double f1_sum = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == cls && truth[i] == cls) tp += w[i];
      if (pred[i] == cls && truth[i] != cls) fp += w[i];
      if (pred[i] != cls && truth[i] == cls) fn += w[i];
    }
    const double denom = 2.0 * tp + fp + fn;
    f1_sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
  }
  return f1_sum / 2.0;
}

std::vector<int> fit_predict_probe(const Tensor& features, std::span<const int> labels,
                                   std::span<const std::size_t> train, std::span<const std::size_t> test,
                                   const ProbeConfig& cfg, double lr) {
  cfg.validate();
  const std::size_t d = features.cols();
  // Standardize with train-split statistics.
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (std::size_t r : train)
    for (std::size_t c = 0; c < d; ++c) mu[c] += features(r, c);
  for (double& v : mu) v /= static_cast<double>(train.size());
  for (std::size_t r : train)
    for (std::size_t c = 0; c < d; ++c) sd[c] += (features(r, c) - mu[c]) * (features(r, c) - mu[c]);
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(train.size())) + 1e-12;
  auto gather = [&](std::span<const std::size_t> rows) {
    Tensor x = Tensor::matrix(rows.size(), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < d; ++c) x(i, c) = (features(rows[i], c) - mu[c]) / sd[c];
    return x;
  };

  Rng init(mix_seed(cfg.split_seed, 0x9e0b));
  ad::ParamStore params;
  auto uniform = [&](std::size_t fan_in, std::size_t fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w = Tensor::matrix(fan_in, fan_out);
    for (double& v : w.values()) v = init.uniform(-bound, bound);
    return w;
  };
  params.add("probe.W1", uniform(d, cfg.hidden));
  params.add("probe.b1", Tensor({cfg.hidden}, 0.0));
  params.add("probe.W2", uniform(cfg.hidden, 2));
  params.add("probe.b2", Tensor({2}, 0.0));

  auto forward = [&](ad::Tape& tape, const Tensor& x, Rng* drop) {
    ad::Var h = ad::linear(tape.constant(x), tape.parameter(params, "probe.W1"), tape.parameter(params, "probe.b1"));
    h = ad::gelu(h);
    if (drop != nullptr) h = ad::dropout(h, cfg.dropout, *drop);
    return ad::linear(h, tape.parameter(params, "probe.W2"), tape.parameter(params, "probe.b2"));
  };

  AdamW opt({.lr = lr, .weight_decay = cfg.weight_decay});
  std::vector<std::size_t> order(train.begin(), train.end());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.split_seed, 0xe90c, epoch));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      std::vector<int> y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) y[i] = labels[rows[i]];
      ad::Tape tape;
      ad::Var loss = ad::cross_entropy(forward(tape, gather(rows), &rng), y);
      tape.backward(loss);
      opt.step(params);
      params.zero_grad();
    }
  }

  ad::Tape tape;
  const Tensor logits = forward(tape, gather(test), nullptr).value();
  std::vector<int> pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) pred[i] = logits(i, 1) > logits(i, 0) ? 1 : 0;
  return pred;
}

ProbeResult probe_eval(const Tensor& embs, const TrackletDataset& dataset, const std::string& attribute,
                       const ProbeConfig& cfg) {
  cfg.validate();
  if (embs.rows() != dataset.size()) throw MismatchError("probe_eval: embedding count != dataset size");
  const double lr = cfg.lr_for(attribute);
  const std::vector<std::string> ids = identities_of(dataset);
  std::vector<int> labels(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& attrs = dataset.labels(i).attrs;
    auto it = attrs.find(attribute);
    if (it == attrs.end()) throw UsageError("probe_eval: attribute '" + attribute + "' missing on " + dataset.id(i));
    labels[i] = it->second;
  }
  const IdentitySplit split = split_by_identity(ids, labels, cfg.train_fraction, cfg.split_seed);
  const std::vector<int> pred = fit_predict_probe(embs, labels, split.train, split.test, cfg, lr);

  std::vector<int> truth;
  std::vector<std::string> test_ids;
  for (std::size_t r : split.test) {
    truth.push_back(labels[r]);
    test_ids.push_back(ids[r]);
  }
  ProbeResult res;
  res.attribute = attribute;
  res.train_tracklets = split.train.size();
  res.test_tracklets = split.test.size();
  res.split_attempt = split.attempt;
  if (attribute == "size_class") {
    res.metric = "f1_identity_weighted";
    res.value = identity_weighted_macro_f1(truth, pred, test_ids);
  } else {
    res.metric = "accuracy";
    res.value = accuracy(truth, pred);
  }
  return res;
}

ProbeResult probe_eval(const EmbeddingSet& embs, const TrackletDataset& dataset, const std::string& attribute,
                       const ProbeConfig& cfg) {
  return probe_eval(embs.tracklet_emb, dataset, attribute, cfg);
}

}  // namespace ntssl
