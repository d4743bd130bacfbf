#include "moma/wm/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "moma/wm/uncertainty.hpp"

namespace moma::wm {

std::vector<Transition> flatten_transitions(const data::OfflineDataset& d, const envs::EnvSpec& spec) {
  std::vector<Transition> out;
  for (const auto& traj : d.trajectories) {
    const int T = traj.length();
    for (int t = 0; t < T; ++t) {
      Transition tr;
      tr.s = traj.states[static_cast<std::size_t>(t)];
      for (int i = 0; i < spec.n_agents; ++i) {
        const Vec slot = envs::encode_action_slot(
            spec.action_spaces[static_cast<std::size_t>(i)],
            traj.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]);
        tr.a.insert(tr.a.end(), slot.begin(), slot.end());
      }
      tr.s_next = traj.states[static_cast<std::size_t>(t) + 1];
      tr.r = traj.rewards[static_cast<std::size_t>(t)];
      tr.done = traj.done && t == T - 1 ? 1.0 : 0.0;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

namespace {
int encoded_action_dim(const envs::EnvSpec& spec) {
  int d = 0;
  for (const auto& sp : spec.action_spaces) d += envs::action_slot_dim(sp);
  return d;
}
}  // namespace

EnsembleMember::EnsembleMember(int state_dim, int action_dim, const std::vector<int>& hidden)
    : state_dim_(state_dim), action_dim_(action_dim), ps_(std::make_unique<nn::ParameterSet>()) {
  if (hidden.empty()) throw std::invalid_argument("EnsembleMember: need at least one hidden layer");
  nn::MlpSpec trunk_spec;
  trunk_spec.input_dim = state_dim + action_dim;
  trunk_spec.output_dim = hidden.back();
  trunk_spec.hidden.assign(hidden.begin(), hidden.end() - 1);
  trunk_ = nn::Mlp(*ps_, "trunk", trunk_spec);
  state_head_ = nn::GaussianHead(*ps_, "state", hidden.back(), state_dim);
  reward_head_ = nn::GaussianHead(*ps_, "reward", hidden.back(), 1);
  done_w_ = ps_->add_matrix("done.w", 1, static_cast<std::size_t>(hidden.back()));
  done_b_ = ps_->add_vector("done.b", 1);
}

void EnsembleMember::init(Rng& rng) {
  trunk_.init(rng);
  state_head_.init(rng);
  reward_head_.init(rng);
  ps_->init_linear(done_w_, done_b_, rng);
}

nn::NodeId EnsembleMember::features(nn::Tape& t, nn::NodeId input) const {
  // The trunk's last affine layer is part of the hidden stack, so activate it.
  return t.relu(trunk_.forward(t, input));
}

EnsembleMember::Pred EnsembleMember::predict(const Vec& s, const Vec& a) const {
  if (static_cast<int>(s.size()) != state_dim_ || static_cast<int>(a.size()) != action_dim_) {
    throw std::invalid_argument("EnsembleMember::predict: dimension mismatch");
  }
  nn::Tape& t = scratch_;
  t.reset();
  const nn::NodeId input = t.concat({t.constant(std::span<const double>(s.data(), s.size())),
                                     t.constant(std::span<const double>(a.data(), a.size()))});
  const nn::NodeId f = features(t, input);
  const auto sh = state_head_.forward(t, f);
  const auto rh = reward_head_.forward(t, f);
  const nn::NodeId pd = t.sigmoid(t.affine(*ps_, done_w_, done_b_, f));

  Pred p;
  const auto mu_s = t.values(sh.mu);
  const auto ls_s = t.values(sh.log_sigma);
  p.mu_s.assign(mu_s.begin(), mu_s.end());
  p.log_sigma_s.assign(ls_s.begin(), ls_s.end());
  p.mu_r = t.values(rh.mu)[0];
  p.log_sigma_r = t.values(rh.log_sigma)[0];
  p.p_d = t.value(pd);
  return p;
}

nn::NodeId EnsembleMember::loss_node(nn::Tape& t, const Transition& tr) {
  const nn::NodeId input = t.concat({t.constant(std::span<const double>(tr.s.data(), tr.s.size())),
                                     t.constant(std::span<const double>(tr.a.data(), tr.a.size()))});
  const nn::NodeId f = features(t, input);
  const auto sh = state_head_.forward(t, f);
  const auto rh = reward_head_.forward(t, f);
  const nn::NodeId target_s = t.constant(std::span<const double>(tr.s_next.data(), tr.s_next.size()));
  const nn::NodeId target_r = t.constant({tr.r});
  const nn::NodeId pd = t.sigmoid(t.affine(*ps_, done_w_, done_b_, f));
  nn::NodeId loss = t.add(nn::gaussian_nll(t, sh.mu, sh.log_sigma, target_s),
                          nn::gaussian_nll(t, rh.mu, rh.log_sigma, target_r));
  return t.add(loss, nn::bernoulli_bce(t, pd, tr.done));
}

double EnsembleMember::train_batch(std::span<const Transition* const> batch, nn::Adam& opt,
                                   double grad_clip) {
  if (batch.empty()) throw std::invalid_argument("EnsembleMember::train_batch: empty batch");
  nn::Tape& t = scratch_;
  t.reset();
  std::vector<nn::NodeId> losses;
  losses.reserve(batch.size());
  for (const Transition* tr : batch) losses.push_back(loss_node(t, *tr));
  const nn::NodeId total = t.mean(t.concat(std::span<const nn::NodeId>(losses.data(), losses.size())));
  const double value = t.value(total);
  if (!std::isfinite(value)) throw NumericError("EnsembleMember: non-finite loss");
  ps_->zero_grad();
  t.backward(total);
  nn::clip_grad_norm(*ps_, grad_clip);
  opt.step();
  return value;
}

double EnsembleMember::validation_mse(std::span<const Transition> val) const {
  if (val.empty()) throw std::invalid_argument("EnsembleMember::validation_mse: empty set");
  double total = 0.0;
  for (const Transition& tr : val) {
    const Pred p = predict(tr.s, tr.a);
    double sq = 0.0;
    for (std::size_t i = 0; i < tr.s_next.size(); ++i) {
      const double d = p.mu_s[i] - tr.s_next[i];
      sq += d * d;
    }
    const double dr = p.mu_r - tr.r;
    sq += dr * dr;
    total += sq / static_cast<double>(tr.s_next.size() + 1);
  }
  return total / static_cast<double>(val.size());
}

WorldModelEnsemble::WorldModelEnsemble(envs::EnvSpec spec, WorldModelConfig cfg,
                                       std::vector<EnsembleMember> members,
                                       std::vector<int> elites, data::DatasetStats stats)
    : spec_(std::move(spec)),
      cfg_(std::move(cfg)),
      members_(std::move(members)),
      elites_(std::move(elites)),
      stats_(std::move(stats)) {
  if (elites_.empty() || elites_.size() > members_.size()) {
    throw std::invalid_argument("WorldModelEnsemble: bad elite set");
  }
  for (int e : elites_) {
    if (e < 0 || e >= static_cast<int>(members_.size())) {
      throw std::invalid_argument("WorldModelEnsemble: elite index out of range");
    }
  }
  // One-hot state spaces get projected predictions (when enabled): detect a
  // box whose corners are all {0,1}.
  one_hot_state_ = true;
  for (std::size_t i = 0; i < stats_.state_min.size(); ++i) {
    const bool lo01 = stats_.state_min[i] == 0.0 || stats_.state_min[i] == 1.0;
    const bool hi01 = stats_.state_max[i] == 0.0 || stats_.state_max[i] == 1.0;
    if (!lo01 || !hi01) {
      one_hot_state_ = false;
      break;
    }
  }
}

Vec WorldModelEnsemble::encode_actions(const envs::JointAction& actions) const {
  Vec enc;
  for (int i = 0; i < spec_.n_agents; ++i) {
    const Vec slot = envs::encode_action_slot(spec_.action_spaces[static_cast<std::size_t>(i)],
                                              actions.at(static_cast<std::size_t>(i)));
    enc.insert(enc.end(), slot.begin(), slot.end());
  }
  return enc;
}

std::vector<EnsembleMember::Pred> WorldModelEnsemble::elite_predictions(const Vec& s,
                                                                        const Vec& a_enc) const {
  std::vector<EnsembleMember::Pred> preds;
  preds.reserve(elites_.size());
  for (int e : elites_) preds.push_back(members_[static_cast<std::size_t>(e)].predict(s, a_enc));
  return preds;
}

ModelPrediction WorldModelEnsemble::step(const Vec& s, const envs::JointAction& actions,
                                         Rng& rng) const {
  return step_encoded(s, encode_actions(actions), rng);
}

ModelPrediction WorldModelEnsemble::step_encoded(const Vec& s, const Vec& a_enc, Rng& rng) const {
  const auto preds = elite_predictions(s, a_enc);
  const int n = static_cast<int>(preds.size());

  ModelPrediction out;
  // Next state: uniform elite choice, then a draw from its Gaussian.
  const int pick = rng.uniform_int(n);
  out.next_state = nn::sample_diag_gaussian(
      std::span<const double>(preds[static_cast<std::size_t>(pick)].mu_s.data(),
                              preds[static_cast<std::size_t>(pick)].mu_s.size()),
      std::span<const double>(preds[static_cast<std::size_t>(pick)].log_sigma_s.data(),
                              preds[static_cast<std::size_t>(pick)].log_sigma_s.size()),
      rng);

  Vec rewards(static_cast<std::size_t>(n));
  int terminal_votes = 0;
  std::vector<Vec> concat(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) {
    const auto& p = preds[static_cast<std::size_t>(m)];
    rewards[static_cast<std::size_t>(m)] = p.mu_r;
    if (p.p_d > 0.5) ++terminal_votes;
    Vec c = p.mu_s;
    c.push_back(p.mu_r);
    concat[static_cast<std::size_t>(m)] = std::move(c);
  }
  out.reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  out.terminal = 2 * terminal_votes > n;  // strict majority; ties stay alive
  out.eps_r = epistemic_reward_uncertainty(std::span<const double>(rewards.data(), rewards.size()));
  out.eps_g = epistemic_general_uncertainty(concat);

  // Feasibility priors: clip into the dataset bounding boxes, cap the
  // uncertainties, and snap one-hot states back onto the simplex corners.
  for (std::size_t i = 0; i < out.next_state.size(); ++i) {
    out.next_state[i] = std::clamp(out.next_state[i], stats_.state_min[i], stats_.state_max[i]);
  }
  out.reward = std::clamp(out.reward, stats_.reward_min, stats_.reward_max);
  if (l_eps_ > 0.0) {
    out.eps_r = std::min(out.eps_r, l_eps_);
    out.eps_g = std::min(out.eps_g, l_eps_);
  }
  if (cfg_.project_onehot && one_hot_state_) {
    const int hot = nn::argmax_index(
        std::span<const double>(out.next_state.data(), out.next_state.size()));
    std::fill(out.next_state.begin(), out.next_state.end(), 0.0);
    out.next_state[static_cast<std::size_t>(hot)] = 1.0;
  }
  return out;
}

double WorldModelEnsemble::eps_g_at(const Vec& s, const Vec& a_enc) const {
  const auto preds = elite_predictions(s, a_enc);
  std::vector<Vec> concat;
  concat.reserve(preds.size());
  for (const auto& p : preds) {
    Vec c = p.mu_s;
    c.push_back(p.mu_r);
    concat.push_back(std::move(c));
  }
  return epistemic_general_uncertainty(concat);
}

WorldModelEnsemble train_ensemble(const data::OfflineDataset& train,
                                  const data::OfflineDataset& val,
                                  const envs::EnvSpec& spec,
                                  const data::DatasetStats& stats,
                                  const WorldModelConfig& cfg, Rng& rng) {
  if (cfg.n_members < cfg.n_elites || cfg.n_elites < 2) {
    throw std::invalid_argument("train_ensemble: need n_members >= n_elites >= 2");
  }
  const std::vector<Transition> train_tr = flatten_transitions(train, spec);
  const std::vector<Transition> val_tr = flatten_transitions(val, spec);
  if (train_tr.empty() || val_tr.empty()) {
    throw std::invalid_argument("train_ensemble: empty train or validation transitions");
  }
  const int action_dim = encoded_action_dim(spec);

  std::vector<EnsembleMember> members;
  std::vector<double> val_scores;
  for (int m = 0; m < cfg.n_members; ++m) {
    Rng member_rng = rng.fork("wm-member-" + std::to_string(m));
    int attempt = 0;
    while (true) {
      ++attempt;
      try {
        EnsembleMember member(spec.state_dim, action_dim, cfg.hidden);
        // One stream per attempt drives both the init and the minibatch
        // shuffling, so a retry is a genuinely fresh run.
        Rng attempt_rng = member_rng.fork("attempt-" + std::to_string(attempt));
        member.init(attempt_rng);
        nn::Adam opt(member.params(), cfg.lr);
        std::vector<const Transition*> batch(
            static_cast<std::size_t>(std::min<long long>(cfg.batch_size,
                                                         static_cast<long long>(train_tr.size()))));
        for (long long step = 0; step < cfg.train_steps; ++step) {
          for (auto& slot : batch) {
            slot = &train_tr[static_cast<std::size_t>(
                attempt_rng.uniform_int64(static_cast<long long>(train_tr.size())))];
          }
          member.train_batch(std::span<const Transition* const>(batch.data(), batch.size()), opt,
                             cfg.grad_clip);
        }
        val_scores.push_back(member.validation_mse(std::span<const Transition>(val_tr.data(), val_tr.size())));
        members.push_back(std::move(member));
        break;
      } catch (const NumericError&) {
        if (attempt >= cfg.max_train_attempts) {
          throw NumericError("train_ensemble: member " + std::to_string(m) + " diverged " +
                             std::to_string(attempt) + " times");
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(cfg.n_members));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&val_scores](int a, int b) {
    return val_scores[static_cast<std::size_t>(a)] < val_scores[static_cast<std::size_t>(b)];
  });
  std::vector<int> elites(order.begin(), order.begin() + cfg.n_elites);

  WorldModelEnsemble ensemble(spec, cfg, std::move(members), std::move(elites), stats);
  ensemble.set_validation_scores(std::move(val_scores));

  Vec eps_samples;
  eps_samples.reserve(val_tr.size());
  for (const Transition& tr : val_tr) eps_samples.push_back(ensemble.eps_g_at(tr.s, tr.a));
  ensemble.set_leps(cfg.leps_multiplier * percentile_interpolated(eps_samples, cfg.leps_percentile));
  return ensemble;
}

}  // namespace moma::wm
