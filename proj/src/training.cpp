#include "pafrob/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pafrob/csv.hpp"
#include "pafrob/rng.hpp"

namespace pafrob::train {

namespace {

// Turns off weight gradients while an attack differentiates wrt the input;
// the attack only needs d loss / d x.
class FrozenParameters {
 public:
  explicit FrozenParameters(const nn::Network& net) : params_(net.learnable_parameters()) {
    for (Tensor& t : params_) t.set_requires_grad(false);
  }
  ~FrozenParameters() {
    for (Tensor& t : params_) t.set_requires_grad(true);
  }
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

 private:
  std::vector<Tensor> params_;
};

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(sample_seed(derive_seed(seed, "data"), static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

bool regularized(const nn::Network& net) {
  return net.family() == act::Family::PSSiLU && net.beta().requires_grad();
}

// Backprop the batch objective, then clip beta and step.
void update(nn::Network& net, Tensor loss, const TrainConfig& cfg, double lr) {
  if (regularized(net)) loss = loss + paf_regularizer(net, cfg.lambda_beta);
  net.zero_grad();
  loss.backward();
  if (regularized(net)) {
    Tensor beta = net.beta();
    if (beta.has_grad()) beta.mutable_grad()[0] = clip_beta_grad(beta.grad()[0], cfg.beta_grad_clip);
  }
  sgd_step(net, lr);
}

std::size_t correct(const Tensor& logits, std::span<const int> labels) {
  const std::vector<int> pred = argmax_rows(logits);
  std::size_t c = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) c += pred[i] == labels[i];
  return c;
}

enum class Inner { None, Ce, Kl };

EpochMetrics run_epoch(nn::Network& net, const data::Dataset& data, const TrainConfig& cfg,
                       int epoch, double lr, Inner inner) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("training needs a nonempty dataset");
  const std::vector<std::size_t> order = shuffled(data.size(), cfg.seed, epoch);
  attack::AttackSpec spec = cfg.attack;
  spec.seed = derive_seed(cfg.seed, "attack");
  spec.clip_lo = std::max(spec.clip_lo, data.lo);
  spec.clip_hi = std::min(spec.clip_hi, data.hi);
  const std::uint64_t offset = static_cast<std::uint64_t>(epoch) * data.size();
  const attack::Model model = attack::as_model(net);

  double loss_sum = 0.0;
  std::size_t hits = 0, batches = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
    const data::Dataset batch =
        data.subset(std::span<const std::size_t>(order).subspan(start, stop - start));

    Tensor loss, scored;
    if (inner == Inner::None) {
      scored = net.forward(batch.x);
      loss = softmax_cross_entropy(scored, batch.y);
    } else if (inner == Inner::Ce) {
      Tensor x_adv;
      {
        FrozenParameters frozen(net);
        x_adv = attack::pgd(model, batch.x, batch.y, spec, offset + start);
      }
      scored = net.forward(x_adv);
      loss = softmax_cross_entropy(scored, batch.y);
    } else {
      scored = net.forward(batch.x);
      loss = softmax_cross_entropy(scored, batch.y);
      if (cfg.trades_beta != 0.0) {
        Tensor x_adv;
        {
          FrozenParameters frozen(net);
          const Tensor clean = scored.detach();
          const attack::Objective kl = [&](const Tensor& xa) {
            return kl_divergence(clean, net.forward(xa));
          };
          x_adv = attack::pgd_ascent(kl, batch.x, spec, offset + start);
        }
        loss = loss + cfg.trades_beta * kl_divergence(scored, net.forward(x_adv));
      }
    }
    loss_sum += loss.item();
    hits += correct(scored, batch.y);
    ++batches;
    update(net, loss, cfg, lr);
  }
  return {loss_sum / static_cast<double>(batches),
          static_cast<double>(hits) / static_cast<double>(data.size())};
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Standard: return "standard";
    case Method::PgdAt: return "pgd_at";
    case Method::Trades: return "trades";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  const std::string key = lower(name);
  for (Method m : {Method::Standard, Method::PgdAt, Method::Trades})
    if (method_name(m) == key) return m;
  throw std::invalid_argument("unknown training method '" + std::string(name) +
                              "'; expected standard, pgd_at or trades");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (!(lr0 >= 0.0)) throw std::invalid_argument("train.lr0 must be >= 0");
  if (!(trades_beta >= 0.0)) throw std::invalid_argument("train.trades_beta must be >= 0");
  if (!(lambda_beta >= 0.0)) throw std::invalid_argument("train.lambda_beta must be >= 0");
  if (!(beta_grad_clip > 0.0)) throw std::invalid_argument("train.beta_grad_clip must be > 0");
  if (method != Method::Standard) {
    attack.validate();
    if (attack.family != attack::Family::PgdLinf && attack.family != attack::Family::PgdL2)
      throw std::invalid_argument("adversarial training needs a PGD inner attack");
  }
  eval_attack.validate();
}

void sgd_step(nn::Network& net, double lr) {
  std::vector<Tensor> params = net.learnable_parameters();
  for (const Tensor& t : params)
    if (!t.has_grad()) throw std::logic_error("sgd_step: learnable parameter without a gradient");
  for (Tensor& t : params) {
    auto v = t.mutable_values();
    const auto g = t.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  }
  double alpha = net.alpha().item(), beta = net.beta().item();
  act::clamp_to_domain(net.family(), alpha, beta);
  Tensor a = net.alpha(), b = net.beta();
  a.mutable_values()[0] = alpha;
  b.mutable_values()[0] = beta;
}

double cosine_lr(int t, int T, double lr0) {
  if (T < 1 || t < 0 || t > T)
    throw std::out_of_range("cosine_lr needs 0 <= t <= T, got t=" + std::to_string(t) +
                            " T=" + std::to_string(T));
  return lr0 * (1.0 + std::cos(std::numbers::pi * t / T)) / 2.0;
}

Tensor paf_regularizer(const nn::Network& net, double lambda_beta) {
  if (net.family() != act::Family::PSSiLU) return Tensor::scalar(0.0);
  return lambda_beta * abs(net.beta());
}

double clip_beta_grad(double g, double max_norm) {
  const double mag = std::abs(g);
  return mag > max_norm ? g * (max_norm / mag) : g;
}

EpochMetrics standard_epoch(nn::Network& net, const data::Dataset& data, const TrainConfig& cfg,
                            int epoch, double lr) {
  return run_epoch(net, data, cfg, epoch, lr, Inner::None);
}

EpochMetrics pgd_at_epoch(nn::Network& net, const data::Dataset& data, const TrainConfig& cfg,
                          int epoch, double lr) {
  if (cfg.method != Method::PgdAt) throw std::invalid_argument("pgd_at_epoch needs method pgd_at");
  return run_epoch(net, data, cfg, epoch, lr, Inner::Ce);
}

EpochMetrics trades_epoch(nn::Network& net, const data::Dataset& data, const TrainConfig& cfg,
                          int epoch, double lr) {
  if (cfg.method != Method::Trades) throw std::invalid_argument("trades_epoch needs method trades");
  return run_epoch(net, data, cfg, epoch, lr, Inner::Kl);
}

TrainResult train(nn::Network& net, const data::Dataset& train_data, const data::Dataset& test,
                  const TrainConfig& cfg) {
  cfg.validate();
  attack::AttackSpec eval = cfg.eval_attack;
  eval.seed = derive_seed(cfg.seed, "eval");
  const attack::Model model = attack::as_model(net);

  TrainResult result;
  double best_score = -1.0;
  for (int e = 0; e < cfg.epochs; ++e) {
    const double lr = cosine_lr(e, cfg.epochs, cfg.lr0);
    EpochMetrics m;
    switch (cfg.method) {
      case Method::Standard: m = standard_epoch(net, train_data, cfg, e, lr); break;
      case Method::PgdAt: m = pgd_at_epoch(net, train_data, cfg, e, lr); break;
      case Method::Trades: m = trades_epoch(net, train_data, cfg, e, lr); break;
    }
    HistoryRow row;
    row.epoch = e;
    row.lr = lr;
    row.loss = m.loss;
    row.clean_acc = nn::accuracy(net, test.x, test.y);
    {
      FrozenParameters frozen(net);
      row.pgd_acc = attack::robust_accuracy(model, test, eval);
    }
    row.alpha = net.alpha().item();
    row.beta = net.beta().item();
    result.history.push_back(row);

    const double score = cfg.method == Method::Standard ? row.clean_acc : row.pgd_acc;
    if (score > best_score) {
      best_score = score;
      result.best = net.clone();
      result.best_epoch = e;
    }
  }
  return result;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& history) {
  write_csv_row(os, {"epoch", "lr", "clean_acc", "pgd_acc", "loss", "alpha", "beta"});
  for (const HistoryRow& r : history)
    write_csv_row(os, {std::to_string(r.epoch), format_double(r.lr), format_double(r.clean_acc),
                       format_double(r.pgd_acc), format_double(r.loss), format_double(r.alpha),
                       format_double(r.beta)});
}

}  // namespace pafrob::train
