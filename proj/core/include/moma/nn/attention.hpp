#pragma once

#include <string>
#include <vector>

#include "moma/common.hpp"
#include "moma/nn/tape.hpp"

namespace moma::nn {

/// Sinusoidal positional encoding for a single position (we key positions by
/// age: newest history entry = 0, so a sliding window never re-encodes).
Vec positional_encoding(int age, int dim);

struct AttentionMemorySpec {
  int obs_dim = 0;
  int action_dim = 0;   // width of the action slot inside a history pair
  int window = 10;      // maximum history length accepted by encode()
  int embed_dim = 128;  // e_h
};

/// History encoder: (observation, previous-action) pairs -> fixed embedding.
///
/// Pipeline per entry l (oldest first): z_l = Enc(pair_l) + PE(age_l), then
/// single-head scaled dot-product self-attention across entries, a skip
/// connection with layer normalization, and finally soft attention
/// (scores u . tanh(K_s h_l)) pooling the sequence into one e_h vector.
/// An empty history returns a learned start-token embedding.
class AttentionMemory {
 public:
  AttentionMemory() = default;
  AttentionMemory(ParameterSet& ps, const std::string& prefix, const AttentionMemorySpec& spec);

  void init(Rng& rng);

  /// `pairs` are tape nodes of length pair_dim(), ordered oldest -> newest.
  NodeId encode(Tape& t, std::span<const NodeId> pairs) const;
  /// Convenience for inference paths: wraps plain vectors as constants.
  NodeId encode(Tape& t, const std::vector<Vec>& pairs) const;

  const AttentionMemorySpec& spec() const { return spec_; }
  int pair_dim() const { return spec_.obs_dim + spec_.action_dim; }
  int embed_dim() const { return spec_.embed_dim; }

 private:
  ParameterSet* ps_ = nullptr;
  AttentionMemorySpec spec_;
  int enc_w_ = -1, enc_b_ = -1;
  int q_w_ = -1, q_b_ = -1, k_w_ = -1, k_b_ = -1, v_w_ = -1, v_b_ = -1;
  int ln_gain_ = -1, ln_bias_ = -1;
  int soft_k_ = -1;   // biasless key map
  int soft_q_ = -1;   // learnable query vector u
  int start_ = -1;    // learned start token (empty history)
};

}  // namespace moma::nn
