#pragma once

#include <memory>
#include <vector>

#include "moma/data/dataset.hpp"
#include "moma/nn/layers.hpp"
#include "moma/nn/optim.hpp"

namespace moma::wm {

struct WorldModelConfig {
  int n_members = 7;
  int n_elites = 5;
  std::vector<int> hidden = {1024, 1024, 1024, 1024};
  double lr = 3e-5;
  int batch_size = 256;
  long long train_steps = 10000;  // gradient steps per member
  double grad_clip = 1.0;
  bool project_onehot = true;  // project sampled states of one-hot envs
  double leps_multiplier = 5.0;
  double leps_percentile = 0.95;
  int max_train_attempts = 3;  // re-init retries after divergence
};

/// One flattened training sample: encoded joint action, successor state,
/// reward and the absorbing label of the successor.
struct Transition {
  Vec s;
  Vec a;  // per-agent action slots, concatenated
  Vec s_next;
  double r = 0.0;
  double done = 0.0;
};

std::vector<Transition> flatten_transitions(const data::OfflineDataset& d, const envs::EnvSpec& spec);

/// One dynamics/reward/termination model: shared ReLU trunk over [s, a],
/// diagonal-Gaussian heads for next state and reward, sigmoid head for the
/// absorbing probability.
class EnsembleMember {
 public:
  EnsembleMember(int state_dim, int action_dim, const std::vector<int>& hidden);

  void init(Rng& rng);

  struct Pred {
    Vec mu_s, log_sigma_s;
    double mu_r = 0.0, log_sigma_r = 0.0;
    double p_d = 0.0;
  };
  Pred predict(const Vec& s, const Vec& a) const;

  /// One optimizer step on the mean (Gaussian NLL + BCE) loss of `batch`.
  /// Returns the loss; throws NumericError on divergence.
  double train_batch(std::span<const Transition* const> batch, nn::Adam& opt, double grad_clip);

  /// Mean squared error of the predicted means, averaged over the
  /// state dimensions plus the reward (the elite-selection score).
  double validation_mse(std::span<const Transition> val) const;

  nn::ParameterSet& params() { return *ps_; }
  const nn::ParameterSet& params() const { return *ps_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

 private:
  nn::NodeId loss_node(nn::Tape& t, const Transition& tr);
  nn::NodeId features(nn::Tape& t, nn::NodeId input) const;

  int state_dim_ = 0, action_dim_ = 0;
  // Behind a pointer so the sub-networks' references stay valid on move.
  std::unique_ptr<nn::ParameterSet> ps_;
  nn::Mlp trunk_;
  nn::GaussianHead state_head_, reward_head_;
  int done_w_ = -1, done_b_ = -1;
  mutable nn::Tape scratch_;
};

struct ModelPrediction {
  Vec next_state;        // sampled, clipped (and one-hot projected if enabled)
  double reward = 0.0;   // mean of elite reward means, clipped
  bool terminal = false; // strict majority of elites predicts absorbing
  double eps_r = 0.0;
  double eps_g = 0.0;
};

/// Trained ensemble: all members plus the elite subset used for prediction,
/// the dataset bounding boxes used for clipping, and the uncertainty cap.
class WorldModelEnsemble {
 public:
  WorldModelEnsemble(envs::EnvSpec spec, WorldModelConfig cfg,
                     std::vector<EnsembleMember> members, std::vector<int> elites,
                     data::DatasetStats stats);

  ModelPrediction step(const Vec& s, const envs::JointAction& actions, Rng& rng) const;
  ModelPrediction step_encoded(const Vec& s, const Vec& a_enc, Rng& rng) const;

  /// eps_g of the elite predictions at (s, a): used for the cap calibration
  /// and the distribution-shift diagnostics.
  double eps_g_at(const Vec& s, const Vec& a_enc) const;

  Vec encode_actions(const envs::JointAction& actions) const;

  void set_leps(double v) { l_eps_ = v; }
  double l_eps() const { return l_eps_; }
  const envs::EnvSpec& env_spec() const { return spec_; }
  const WorldModelConfig& config() const { return cfg_; }
  const data::DatasetStats& stats() const { return stats_; }
  const std::vector<EnsembleMember>& members() const { return members_; }
  std::vector<EnsembleMember>& members() { return members_; }
  const std::vector<int>& elites() const { return elites_; }
  const std::vector<double>& validation_scores() const { return val_scores_; }
  void set_validation_scores(std::vector<double> v) { val_scores_ = std::move(v); }
  bool one_hot_state() const { return one_hot_state_; }

 private:
  std::vector<EnsembleMember::Pred> elite_predictions(const Vec& s, const Vec& a_enc) const;

  envs::EnvSpec spec_;
  WorldModelConfig cfg_;
  std::vector<EnsembleMember> members_;
  std::vector<int> elites_;
  data::DatasetStats stats_;
  double l_eps_ = 0.0;
  bool one_hot_state_ = false;
  std::vector<double> val_scores_;
};

/// Trains n_members independently (fresh init and shuffling streams per
/// member; a member diverging re-inits up to max_train_attempts times), ranks
/// them by validation MSE, keeps the best n_elites as the prediction set, and
/// calibrates the uncertainty cap as
///   l_eps = leps_multiplier * percentile(eps_g over validation transitions).
/// `stats` must describe the full dataset (train plus validation).
WorldModelEnsemble train_ensemble(const data::OfflineDataset& train,
                                  const data::OfflineDataset& val,
                                  const envs::EnvSpec& spec,
                                  const data::DatasetStats& stats,
                                  const WorldModelConfig& cfg, Rng& rng);

}  // namespace moma::wm
