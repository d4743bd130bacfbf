#include "moma/baselines/maiql.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moma::baselines {

double expectile_loss(double diff, double e) {
  if (e <= 0.0 || e >= 1.0) throw std::invalid_argument("expectile_loss: e must be in (0, 1)");
  const double w = std::abs(e - (diff < 0.0 ? 1.0 : 0.0));
  return w * diff * diff;
}

nn::NodeId expectile_loss(nn::Tape& t, nn::NodeId diff, double e) {
  if (e <= 0.0 || e >= 1.0) throw std::invalid_argument("expectile_loss: e must be in (0, 1)");
  const nn::NodeId pos = t.relu(diff);
  const nn::NodeId neg = t.relu(t.neg(diff));
  return t.add(t.scale(t.mul(pos, pos), e), t.scale(t.mul(neg, neg), 1.0 - e));
}

void polyak_update(const nn::ParameterSet& online, nn::ParameterSet& target, double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("polyak_update: tau must be in [0, 1]");
  const auto src = online.values();
  auto dst = target.values();
  if (src.size() != dst.size())
    throw std::invalid_argument("polyak_update: parameter sets have different sizes");
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (1.0 - tau) * dst[i] + tau * src[i];
}

namespace {

void validate_config(const MaiqlConfig& cfg) {
  if (cfg.gamma <= 0.0 || cfg.gamma > 1.0)
    throw std::invalid_argument("MaiqlConfig: gamma must be in (0, 1]");
  if (cfg.expectile <= 0.0 || cfg.expectile >= 1.0)
    throw std::invalid_argument("MaiqlConfig: expectile must be in (0, 1)");
  if (cfg.beta < 0.0) throw std::invalid_argument("MaiqlConfig: beta must be >= 0");
  if (cfg.tau < 0.0 || cfg.tau > 1.0)
    throw std::invalid_argument("MaiqlConfig: tau must be in [0, 1]");
  if (cfg.lr <= 0.0) throw std::invalid_argument("MaiqlConfig: lr must be > 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("MaiqlConfig: batch_size must be >= 1");
  if (cfg.weight_clamp <= 0.0)
    throw std::invalid_argument("MaiqlConfig: weight_clamp must be > 0");
  if (cfg.grad_clip <= 0.0) throw std::invalid_argument("MaiqlConfig: grad_clip must be > 0");
}

}  // namespace

Maiql::QNet Maiql::make_qnet(int agent) const {
  const auto ui = static_cast<std::size_t>(agent);
  QNet q;
  q.ps = std::make_unique<nn::ParameterSet>();
  nn::AttentionMemorySpec mspec;
  mspec.obs_dim = spec_.obs_dims[ui];
  mspec.action_dim = envs::action_slot_dim(spec_.action_spaces[ui]);
  mspec.window = cfg_.arch.window;
  mspec.embed_dim = cfg_.arch.embed_dim;
  q.memory = nn::AttentionMemory(*q.ps, "memory", mspec);
  nn::MlpSpec hspec;
  hspec.input_dim = cfg_.arch.embed_dim + envs::action_slot_dim(spec_.action_spaces[ui]);
  hspec.output_dim = 1;
  hspec.hidden = cfg_.q_hidden;
  q.head = nn::Mlp(*q.ps, "q", hspec);
  return q;
}

Maiql::VNet Maiql::make_vnet(int agent) const {
  const auto ui = static_cast<std::size_t>(agent);
  VNet v;
  v.ps = std::make_unique<nn::ParameterSet>();
  nn::AttentionMemorySpec mspec;
  mspec.obs_dim = spec_.obs_dims[ui];
  mspec.action_dim = envs::action_slot_dim(spec_.action_spaces[ui]);
  mspec.window = cfg_.arch.window;
  mspec.embed_dim = cfg_.arch.embed_dim;
  v.memory = nn::AttentionMemory(*v.ps, "memory", mspec);
  nn::MlpSpec hspec;
  hspec.input_dim = cfg_.arch.embed_dim;
  hspec.output_dim = 1;
  hspec.hidden = cfg_.arch.value_hidden;
  v.head = nn::Mlp(*v.ps, "v", hspec);
  return v;
}

Maiql::Maiql(envs::EnvSpec spec, MaiqlConfig cfg) : spec_(std::move(spec)), cfg_(std::move(cfg)) {
  validate_config(cfg_);
  const int n_agents = spec_.n_agents;
  const int twins = n_twins();

  q_.resize(static_cast<std::size_t>(n_agents));
  q_target_.resize(static_cast<std::size_t>(n_agents));
  v_.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    for (int k = 0; k < twins; ++k) {
      q_[static_cast<std::size_t>(i)].push_back(make_qnet(i));
      q_target_[static_cast<std::size_t>(i)].push_back(make_qnet(i));
    }
    v_.push_back(make_vnet(i));
  }

  nn::MlpSpec mspec;
  mspec.input_dim = spec_.state_dim;
  mspec.output_dim = n_agents + 1;
  mspec.hidden = cfg_.arch.mixer_hidden;
  q_mixer_ps_ = std::make_unique<nn::ParameterSet>();
  q_mixer_target_ps_ = std::make_unique<nn::ParameterSet>();
  v_mixer_ps_ = std::make_unique<nn::ParameterSet>();
  q_mixer_ = nn::Mlp(*q_mixer_ps_, "mixer", mspec);
  q_mixer_target_ = nn::Mlp(*q_mixer_target_ps_, "mixer", mspec);
  v_mixer_ = nn::Mlp(*v_mixer_ps_, "mixer", mspec);

  policies_ = std::make_unique<mappo::ActorCritic>(spec_, cfg_.arch);

  for (auto& per_agent : q_)
    for (auto& q : per_agent) q_sets_.push_back(q.ps.get());
  q_sets_.push_back(q_mixer_ps_.get());
  for (auto& v : v_) v_sets_.push_back(v.ps.get());
  v_sets_.push_back(v_mixer_ps_.get());
  for (auto& named : policies_->named_sets()) {
    if (named.name.ends_with(".memory") || named.name.ends_with(".policy"))
      pi_sets_.push_back(named);
  }

  for (auto* ps : q_sets_) q_opts_.emplace_back(*ps, cfg_.lr);
  for (auto* ps : v_sets_) v_opts_.emplace_back(*ps, cfg_.lr);
  for (auto& named : pi_sets_) pi_opts_.emplace_back(*named.set, cfg_.lr);
}

void Maiql::init(Rng& rng) {
  for (std::size_t i = 0; i < q_.size(); ++i) {
    v_[i].memory.init(rng);
    v_[i].head.init(rng);
    for (auto& q : q_[i]) {
      q.memory.init(rng);
      q.head.init(rng);
    }
  }
  v_mixer_.init(rng);
  q_mixer_.init(rng);
  policies_->init(rng);
  // Targets start as exact copies of the online networks.
  for (std::size_t i = 0; i < q_.size(); ++i)
    for (std::size_t k = 0; k < q_[i].size(); ++k) polyak_update(*q_[i][k].ps, *q_target_[i][k].ps, 1.0);
  polyak_update(*q_mixer_ps_, *q_mixer_target_ps_, 1.0);
}

Maiql::MixNodes Maiql::mix_nodes(nn::Tape& t, const nn::Mlp& mixer, const Vec& state) const {
  const nn::NodeId m = mixer.forward(t, t.constant(state));
  MixNodes out;
  out.weights = t.abs(t.slice(m, 0, spec_.n_agents));
  out.bias = t.slice(m, spec_.n_agents, 1);
  return out;
}

nn::NodeId Maiql::q_value_node(nn::Tape& t, const QNet& q, const std::vector<Vec>& history,
                               int agent, const Vec& action) const {
  const auto ui = static_cast<std::size_t>(agent);
  const nn::NodeId embed = q.memory.encode(t, history);
  const Vec slot = envs::encode_action_slot(spec_.action_spaces[ui], action);
  return q.head.forward(t, t.concat({embed, t.constant(slot)}));
}

nn::NodeId Maiql::v_value_node(nn::Tape& t, const VNet& v, const std::vector<Vec>& history) const {
  return v.head.forward(t, v.memory.encode(t, history));
}

double Maiql::online_v(const Vec& state, const std::vector<std::vector<Vec>>& histories) const {
  scratch_.reset();
  const MixNodes mix = mix_nodes(scratch_, v_mixer_, state);
  nn::NodeId acc = mix.bias;
  for (int i = 0; i < spec_.n_agents; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    acc = scratch_.add(acc, scratch_.mul(scratch_.slice(mix.weights, i, 1),
                                         v_value_node(scratch_, v_[ui], histories[ui])));
  }
  return scratch_.value(acc);
}

double Maiql::target_q(const Vec& state, const std::vector<std::vector<Vec>>& histories,
                       const envs::JointAction& actions) const {
  scratch_.reset();
  const MixNodes mix = mix_nodes(scratch_, q_mixer_target_, state);
  nn::NodeId acc = mix.bias;
  for (int i = 0; i < spec_.n_agents; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    nn::NodeId head =
        q_value_node(scratch_, q_target_[ui][0], histories[ui], i, actions[ui]);
    for (std::size_t k = 1; k < q_target_[ui].size(); ++k)
      head = scratch_.min2(
          head, q_value_node(scratch_, q_target_[ui][k], histories[ui], i, actions[ui]));
    acc = scratch_.add(acc, scratch_.mul(scratch_.slice(mix.weights, i, 1), head));
  }
  return scratch_.value(acc);
}

std::vector<MaiqlBatchItem> Maiql::sample_batch(const data::OfflineDataset& dataset, int n,
                                                Rng& rng) const {
  std::vector<MaiqlBatchItem> batch;
  batch.reserve(static_cast<std::size_t>(n));
  const int window = cfg_.arch.window;
  for (int b = 0; b < n; ++b) {
    data::HistorySample s = data::sample_history(dataset, spec_, window, rng);
    const auto& traj = dataset.trajectories[static_cast<std::size_t>(s.traj)];
    MaiqlBatchItem item;
    item.state = std::move(s.state);
    item.histories = std::move(s.windows);
    item.next_histories = data::history_windows(spec_, traj, s.t + 1, window);
    item.next_state = traj.states[static_cast<std::size_t>(s.t) + 1];
    item.actions = traj.actions[static_cast<std::size_t>(s.t)];
    item.reward = traj.rewards[static_cast<std::size_t>(s.t)];
    item.mask = (traj.done && s.t == traj.length() - 1) ? 0.0 : 1.0;
    batch.push_back(std::move(item));
  }
  return batch;
}

nn::NodeId Maiql::q_loss_node(nn::Tape& t, std::span<const MaiqlBatchItem> batch) {
  if (batch.empty()) throw std::invalid_argument("q_loss_node: empty batch");
  // SARSA targets with the (frozen for this step) online value function.
  Vec targets(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    targets[b] = batch[b].reward +
                 cfg_.gamma * batch[b].mask * online_v(batch[b].next_state, batch[b].next_histories);

  std::vector<nn::NodeId> parts;
  parts.reserve(batch.size() * static_cast<std::size_t>(n_twins()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const MaiqlBatchItem& item = batch[b];
    const MixNodes mix = mix_nodes(t, q_mixer_, item.state);
    for (int k = 0; k < n_twins(); ++k) {
      nn::NodeId acc = mix.bias;
      for (int i = 0; i < spec_.n_agents; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        acc = t.add(acc, t.mul(t.slice(mix.weights, i, 1),
                               q_value_node(t, q_[ui][static_cast<std::size_t>(k)],
                                            item.histories[ui], i, item.actions[ui])));
      }
      const nn::NodeId d = t.add_scalar(acc, -targets[b]);
      parts.push_back(t.mul(d, d));
    }
  }
  // Mean over the batch of the *sum* over twins.
  return t.scale(t.sum(t.concat(parts)), 1.0 / static_cast<double>(batch.size()));
}

nn::NodeId Maiql::v_loss_node(nn::Tape& t, std::span<const MaiqlBatchItem> batch) {
  if (batch.empty()) throw std::invalid_argument("v_loss_node: empty batch");
  Vec qhat(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    qhat[b] = target_q(batch[b].state, batch[b].histories, batch[b].actions);

  std::vector<nn::NodeId> parts;
  parts.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const MaiqlBatchItem& item = batch[b];
    const MixNodes mix = mix_nodes(t, v_mixer_, item.state);
    nn::NodeId acc = mix.bias;
    for (int i = 0; i < spec_.n_agents; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      acc = t.add(acc, t.mul(t.slice(mix.weights, i, 1),
                             v_value_node(t, v_[ui], item.histories[ui])));
    }
    const nn::NodeId diff = t.add_scalar(t.neg(acc), qhat[b]);  // Qhat - V
    parts.push_back(expectile_loss(t, diff, cfg_.expectile));
  }
  return t.mean(t.concat(parts));
}

nn::NodeId Maiql::policy_loss_node(nn::Tape& t, std::span<const MaiqlBatchItem> batch,
                                   long long* clamped) {
  if (batch.empty()) throw std::invalid_argument("policy_loss_node: empty batch");
  const double log_clamp = std::log(cfg_.weight_clamp);

  std::vector<nn::NodeId> parts;
  parts.reserve(batch.size());
  for (const MaiqlBatchItem& item : batch) {
    // Detached AWR weight, assembled in log space from frozen networks.
    scratch_.reset();
    const MixNodes qmix = mix_nodes(scratch_, q_mixer_target_, item.state);
    const MixNodes vmix = mix_nodes(scratch_, v_mixer_, item.state);
    double log_w = scratch_.value(qmix.bias) - scratch_.value(vmix.bias);
    const auto qw = scratch_.values(qmix.weights);
    const auto vw = scratch_.values(vmix.weights);
    for (int i = 0; i < spec_.n_agents; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      nn::NodeId head =
          q_value_node(scratch_, q_target_[ui][0], item.histories[ui], i, item.actions[ui]);
      for (std::size_t k = 1; k < q_target_[ui].size(); ++k)
        head = scratch_.min2(head, q_value_node(scratch_, q_target_[ui][k], item.histories[ui],
                                                i, item.actions[ui]));
      const double qhat_i = scratch_.value(head);
      const double v_i = scratch_.value(v_value_node(scratch_, v_[ui], item.histories[ui]));
      log_w += cfg_.beta * (qw[ui] * qhat_i - vw[ui] * v_i);
    }
    double w = 0.0;
    if (log_w > log_clamp) {
      w = cfg_.weight_clamp;
      if (clamped != nullptr) ++(*clamped);
    } else {
      w = std::exp(log_w);
    }

    std::vector<nn::NodeId> logps;
    logps.reserve(static_cast<std::size_t>(spec_.n_agents));
    for (int i = 0; i < spec_.n_agents; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const nn::NodeId embed = policies_->encode(t, i, item.histories[ui]);
      const auto pol = policies_->policy_nodes(t, i, embed);
      logps.push_back(policies_->log_prob(t, i, pol, item.actions[ui]));
    }
    parts.push_back(t.scale(t.neg(t.sum(t.concat(logps))), w));
  }
  return t.mean(t.concat(parts));
}

MaiqlStepReport Maiql::train_step(const data::OfflineDataset& dataset, Rng& rng) {
  const std::vector<MaiqlBatchItem> batch = sample_batch(dataset, cfg_.batch_size, rng);
  MaiqlStepReport report;

  tape_.reset();
  const nn::NodeId ql = q_loss_node(tape_, batch);
  for (auto* ps : q_sets_) ps->zero_grad();
  tape_.backward(ql);
  for (auto* ps : q_sets_) nn::clip_grad_norm(*ps, cfg_.grad_clip);
  for (auto& opt : q_opts_) opt.step();
  report.q_loss = tape_.value(ql);

  tape_.reset();
  const nn::NodeId vl = v_loss_node(tape_, batch);
  for (auto* ps : v_sets_) ps->zero_grad();
  tape_.backward(vl);
  for (auto* ps : v_sets_) nn::clip_grad_norm(*ps, cfg_.grad_clip);
  for (auto& opt : v_opts_) opt.step();
  report.v_loss = tape_.value(vl);

  tape_.reset();
  const nn::NodeId pl = policy_loss_node(tape_, batch, &report.clamped_weights);
  for (auto& named : pi_sets_) named.set->zero_grad();
  tape_.backward(pl);
  for (auto& named : pi_sets_) nn::clip_grad_norm(*named.set, cfg_.grad_clip);
  for (auto& opt : pi_opts_) opt.step();
  report.policy_loss = tape_.value(pl);

  for (std::size_t i = 0; i < q_.size(); ++i)
    for (std::size_t k = 0; k < q_[i].size(); ++k)
      polyak_update(*q_[i][k].ps, *q_target_[i][k].ps, cfg_.tau);
  polyak_update(*q_mixer_ps_, *q_mixer_target_ps_, cfg_.tau);

  return report;
}

data::OfflineDataset centralize_dataset(const data::OfflineDataset& d,
                                        const envs::EnvSpec& base_spec) {
  data::OfflineDataset out;
  out.meta = d.meta;
  out.meta.n_agents = 1;
  out.meta.obs_mode = "central";
  out.meta.obs_dims = {base_spec.state_dim};

  const bool all_discrete = [&] {
    bool discrete = true;
    for (const auto& sp : base_spec.action_spaces) discrete = discrete && sp.discrete;
    return discrete;
  }();
  if (all_discrete) {
    out.meta.action_dims = {1};
  } else {
    for (const auto& sp : base_spec.action_spaces)
      if (sp.discrete)
        throw std::invalid_argument("centralize_dataset: mixed action spaces are not supported");
    out.meta.action_dims = {base_spec.total_action_dim()};
  }

  out.trajectories.reserve(d.trajectories.size());
  for (const auto& traj : d.trajectories) {
    data::Trajectory c;
    c.states = traj.states;
    c.rewards = traj.rewards;
    c.done = traj.done;
    c.policy_tag = traj.policy_tag;
    c.obs.reserve(traj.states.size());
    for (const auto& s : traj.states) c.obs.push_back({s});
    c.actions.reserve(traj.actions.size());
    for (const auto& joint : traj.actions) {
      if (all_discrete) {
        long long idx = 0;
        for (std::size_t i = 0; i < joint.size(); ++i)
          idx = idx * base_spec.action_spaces[i].n + static_cast<long long>(std::llround(joint[i].at(0)));
        c.actions.push_back({Vec{static_cast<double>(idx)}});
      } else {
        Vec flat;
        for (const auto& a : joint) flat.insert(flat.end(), a.begin(), a.end());
        c.actions.push_back({std::move(flat)});
      }
    }
    out.trajectories.push_back(std::move(c));
  }
  return out;
}

}  // namespace moma::baselines
