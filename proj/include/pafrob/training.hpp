#pragma once

// Standard, PGD adversarial, and TRADES training with plain SGD and a cosine
// schedule. Activation parameters are shared scalars trained with the same
// learning rate as the weights; PSSiLU additionally gets lambda*|beta| added
// to every batch loss, its beta gradient clipped, and its parameters clamped
// back into their domain after every step.

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "pafrob/attacks.hpp"
#include "pafrob/data.hpp"
#include "pafrob/nnet.hpp"

namespace pafrob::train {

enum class Method { Standard, PgdAt, Trades };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct TrainConfig {
  Method method = Method::Standard;
  int epochs = 10;
  std::size_t batch_size = 128;
  double lr0 = 0.1;
  attack::AttackSpec attack = attack::AttackSpec::pgd_linf_default();  // inner maximization
  attack::AttackSpec eval_attack = attack::AttackSpec::pgd_linf_default();
  double trades_beta = 0.6;
  double lambda_beta = 10.0;
  double beta_grad_clip = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

// theta <- theta - lr * grad for every learnable tensor, then the activation
// parameters are clamped to their domain. Throws std::logic_error when a
// learnable tensor has no gradient.
void sgd_step(nn::Network& net, double lr);

// lr0 (1 + cos(pi t / T)) / 2 for 0 <= t <= T.
double cosine_lr(int t, int T, double lr0);

// lambda |beta| for PSSiLU, a constant 0 otherwise.
Tensor paf_regularizer(const nn::Network& net, double lambda_beta);

// g min(1, max_norm / |g|).
double clip_beta_grad(double g, double max_norm = 0.01);

struct EpochMetrics {
  double loss = 0.0;      // mean training objective over batches
  double accuracy = 0.0;  // on the inputs the loss was computed at
};

// One pass over `data` in a seeded shuffled order. `epoch` selects the
// shuffle and attack streams.
EpochMetrics standard_epoch(nn::Network& net, const data::Dataset& data, const TrainConfig& cfg,
                            int epoch, double lr);
EpochMetrics pgd_at_epoch(nn::Network& net, const data::Dataset& data, const TrainConfig& cfg,
                          int epoch, double lr);
EpochMetrics trades_epoch(nn::Network& net, const data::Dataset& data, const TrainConfig& cfg,
                          int epoch, double lr);

struct HistoryRow {
  int epoch = 0;
  double lr = 0.0;
  double clean_acc = 0.0;
  double pgd_acc = 0.0;
  double loss = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  nn::Network best;  // snapshot at best_epoch
  int best_epoch = 0;
};

// Trains `net` in place. After every epoch, clean and PGD accuracy on `test`
// are recorded; the best snapshot maximizes PGD accuracy (clean accuracy for
// standard training), earliest epoch on ties.
TrainResult train(nn::Network& net, const data::Dataset& train_data, const data::Dataset& test,
                  const TrainConfig& cfg);

// Columns epoch,lr,clean_acc,pgd_acc,loss,alpha,beta.
void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& history);

}  // namespace pafrob::train
