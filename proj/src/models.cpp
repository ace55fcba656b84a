#include "pedcast/models.hpp"

#include <cmath>
#include <random>

namespace pedcast::models {

using ad::ParameterSet;
using ad::Tape;
using ad::TensorPtr;
using seqdata::BBox;
using seqdata::ObservationWindow;
using seqdata::SpeedVec;

std::string kind_name(ModelKind k) {
  return k == ModelKind::TF_ed ? "tf_ed" : "lstm_ed";
}

ModelKind kind_from_name(const std::string& name) {
  if (name == "tf_ed") return ModelKind::TF_ed;
  if (name == "lstm_ed") return ModelKind::LSTM_ed;
  throw ConfigError("unknown model kind: '" + name + "' (expected tf_ed or lstm_ed)");
}

void ModelConfig::validate() const {
  if (embed_dim == 0 || num_layers == 0 || observe_len == 0 || predict_len == 0)
    throw ConfigError("model config dimensions must be positive");
  if (embed_dim % 2 != 0)
    throw ConfigError("embed_dim must be even for positional encoding");
  if (kind == ModelKind::TF_ed) {
    if (num_heads == 0 || ff_dim == 0)
      throw ConfigError("TF-ed requires positive num_heads and ff_dim");
    if (embed_dim % num_heads != 0)
      throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                        " not divisible by num_heads " + std::to_string(num_heads));
  }
}

TensorPtr positional_encoding(std::size_t seq_len, std::size_t embed_dim) {
  if (embed_dim % 2 != 0)
    throw ConfigError("positional encoding requires even embed dimension");
  auto pe = ad::make_tensor({seq_len, embed_dim});
  for (std::size_t t = 0; t < seq_len; ++t)
    for (std::size_t d = 0; d < embed_dim; ++d) {
      const double expo = static_cast<double>(d % 2 == 0 ? d : d - 1) /
                          static_cast<double>(embed_dim);
      const double angle = static_cast<double>(t) / std::pow(10000.0, expo);
      pe->value[t * embed_dim + d] = d % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

TensorPtr causal_mask_bias(std::size_t len) {
  auto m = ad::make_tensor({len, len});
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = i + 1; j < len; ++j) m->value[i * len + j] = -1e9;
  return m;
}

TensorPtr attention(Tape& tape, const AttentionInputs& in) {
  const std::size_t d_k = in.d_k ? in.d_k : in.q->cols();
  if (in.mask_bias) {
    const std::size_t lq = in.mask_bias->rows(), lkv = in.mask_bias->cols();
    if (lq != in.q->rows() || lkv != in.k->rows())
      throw ShapeError("attention: mask " + in.mask_bias->shape_str() +
                       " does not match q/k rows");
    for (std::size_t i = 0; i < lq; ++i) {
      bool open = false;
      for (std::size_t j = 0; j < lkv && !open; ++j)
        open = in.mask_bias->value[i * lkv + j] > -1e8;
      if (!open)
        throw ContractError("attention: query row " + std::to_string(i) +
                            " is fully masked");
    }
  }
  auto logits = tape.scale(tape.matmul_nt(in.q, in.k),
                           1.0 / std::sqrt(static_cast<double>(d_k)));
  if (in.mask_bias) logits = tape.add(logits, in.mask_bias);
  return tape.matmul(tape.softmax_rows(logits), in.v);
}

namespace {

constexpr std::size_t kInputDim = 4;

enum class Init { Weight, Zero, One, Token };

// Single source of truth for each architecture's parameter layout. Both
// init_params and the checkpoint validation walk this.
template <typename Fn>
void for_each_param(const ModelConfig& cfg, Fn&& fn) {
  const std::size_t d = cfg.embed_dim;
  auto lstm_cell_params = [&](const std::string& prefix, std::size_t in_dim) {
    for (const char* g : {"i", "f", "o", "c"}) {
      fn(prefix + ".w_x" + g, std::vector<std::size_t>{in_dim, d}, Init::Weight);
      fn(prefix + ".w_h" + g, std::vector<std::size_t>{d, d}, Init::Weight);
      fn(prefix + ".b_" + g, std::vector<std::size_t>{d}, Init::Zero);
    }
  };
  auto mha_params = [&](const std::string& prefix) {
    for (const char* w : {"wq", "wk", "wv", "wo"})
      fn(prefix + "." + w, std::vector<std::size_t>{d, d}, Init::Weight);
    for (const char* b : {"bq", "bk", "bv", "bo"})
      fn(prefix + "." + b, std::vector<std::size_t>{d}, Init::Zero);
  };
  auto ln_params = [&](const std::string& prefix) {
    fn(prefix + ".g", std::vector<std::size_t>{d}, Init::One);
    fn(prefix + ".b", std::vector<std::size_t>{d}, Init::Zero);
  };
  auto ff_params = [&](const std::string& prefix) {
    fn(prefix + ".w1", std::vector<std::size_t>{d, cfg.ff_dim}, Init::Weight);
    fn(prefix + ".b1", std::vector<std::size_t>{cfg.ff_dim}, Init::Zero);
    fn(prefix + ".w2", std::vector<std::size_t>{cfg.ff_dim, d}, Init::Weight);
    fn(prefix + ".b2", std::vector<std::size_t>{d}, Init::Zero);
  };

  if (cfg.kind == ModelKind::TF_ed) {
    for (const char* e : {"speed", "pos", "tgt"}) {
      fn(std::string("tf.embed.") + e + ".w", std::vector<std::size_t>{kInputDim, d},
         Init::Weight);
      fn(std::string("tf.embed.") + e + ".b", std::vector<std::size_t>{d}, Init::Zero);
    }
    fn("tf.start_token", std::vector<std::size_t>{1, kInputDim}, Init::Token);
    for (const char* e : {"speed", "pos"})
      for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string p =
            std::string("tf.enc.") + e + ".l" + std::to_string(l);
        mha_params(p + ".attn");
        ln_params(p + ".ln1");
        ff_params(p + ".ff");
        ln_params(p + ".ln2");
      }
    for (const char* dec : {"speed", "action"})
      for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string p =
            std::string("tf.dec.") + dec + ".l" + std::to_string(l);
        mha_params(p + ".self");
        ln_params(p + ".ln1");
        mha_params(p + ".cross");
        ln_params(p + ".ln2");
        ff_params(p + ".ff");
        ln_params(p + ".ln3");
      }
    fn("tf.out.speed.w", std::vector<std::size_t>{d, kInputDim}, Init::Weight);
    fn("tf.out.speed.b", std::vector<std::size_t>{kInputDim}, Init::Zero);
    fn("tf.out.action.w", std::vector<std::size_t>{d, 1}, Init::Weight);
    fn("tf.out.action.b", std::vector<std::size_t>{1}, Init::Zero);
  } else {
    for (const char* e : {"speed", "pos"})
      for (std::size_t l = 0; l < cfg.num_layers; ++l)
        lstm_cell_params(std::string("lstm.enc.") + e + ".l" + std::to_string(l),
                         l == 0 ? kInputDim : d);
    for (std::size_t l = 0; l < cfg.num_layers; ++l)
      for (const char* s : {"h", "c"}) {
        const std::string p =
            "lstm.fuse.l" + std::to_string(l) + "." + s;
        fn(p + ".w", std::vector<std::size_t>{2 * d, d}, Init::Weight);
        fn(p + ".b", std::vector<std::size_t>{d}, Init::Zero);
      }
    for (const char* dec : {"speed", "action"})
      for (std::size_t l = 0; l < cfg.num_layers; ++l)
        lstm_cell_params(std::string("lstm.dec.") + dec + ".l" + std::to_string(l),
                         l == 0 ? kInputDim : d);
    fn("lstm.out.speed.w", std::vector<std::size_t>{d, kInputDim}, Init::Weight);
    fn("lstm.out.speed.b", std::vector<std::size_t>{kInputDim}, Init::Zero);
    fn("lstm.out.action.w", std::vector<std::size_t>{d, 1}, Init::Weight);
    fn("lstm.out.action.b", std::vector<std::size_t>{1}, Init::Zero);
  }
}

TensorPtr const_matrix(const std::vector<BBox>& rows) {
  std::vector<double> data;
  data.reserve(rows.size() * 4);
  for (const BBox& b : rows) {
    data.push_back(b.x);
    data.push_back(b.y);
    data.push_back(b.w);
    data.push_back(b.h);
  }
  return ad::make_tensor({rows.size(), 4}, std::move(data));
}

// Speed rows enter the models in kSpeedScale units.
TensorPtr const_matrix(const std::vector<SpeedVec>& rows) {
  std::vector<double> data;
  data.reserve(rows.size() * 4);
  for (const SpeedVec& s : rows) {
    data.push_back(s.dx * kSpeedScale);
    data.push_back(s.dy * kSpeedScale);
    data.push_back(s.dw * kSpeedScale);
    data.push_back(s.dh * kSpeedScale);
  }
  return ad::make_tensor({rows.size(), 4}, std::move(data));
}

TensorPtr linear(Tape& tape, const TensorPtr& x, const ParameterSet& params,
                 const std::string& prefix) {
  return tape.add_rowvec(tape.matmul(x, params.get(prefix + ".w")),
                         params.get(prefix + ".b"));
}

TensorPtr layer_norm(Tape& tape, const TensorPtr& x, const ParameterSet& params,
                     const std::string& prefix) {
  return tape.layer_norm(x, params.get(prefix + ".g"), params.get(prefix + ".b"));
}

TensorPtr multi_head_attention(Tape& tape, const ParameterSet& params,
                               const std::string& prefix, const TensorPtr& q_in,
                               const TensorPtr& kv_in, const TensorPtr& mask,
                               const ModelConfig& cfg) {
  auto q = tape.add_rowvec(tape.matmul(q_in, params.get(prefix + ".wq")),
                           params.get(prefix + ".bq"));
  auto k = tape.add_rowvec(tape.matmul(kv_in, params.get(prefix + ".wk")),
                           params.get(prefix + ".bk"));
  auto v = tape.add_rowvec(tape.matmul(kv_in, params.get(prefix + ".wv")),
                           params.get(prefix + ".bv"));
  const std::size_t dk = cfg.head_dim();
  std::vector<TensorPtr> heads;
  heads.reserve(cfg.num_heads);
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    AttentionInputs in;
    in.q = tape.slice_cols(q, h * dk, dk);
    in.k = tape.slice_cols(k, h * dk, dk);
    in.v = tape.slice_cols(v, h * dk, dk);
    in.mask_bias = mask;
    in.d_k = dk;
    heads.push_back(attention(tape, in));
  }
  auto concat = cfg.num_heads == 1 ? heads[0] : tape.concat_cols(heads);
  return tape.add_rowvec(tape.matmul(concat, params.get(prefix + ".wo")),
                         params.get(prefix + ".bo"));
}

TensorPtr feed_forward(Tape& tape, const TensorPtr& x, const ParameterSet& params,
                       const std::string& prefix) {
  return tape.add_rowvec(
      tape.matmul(tape.relu(tape.add_rowvec(
                      tape.matmul(x, params.get(prefix + ".w1")),
                      params.get(prefix + ".b1"))),
                  params.get(prefix + ".w2")),
      params.get(prefix + ".b2"));
}

TensorPtr encoder_stack(Tape& tape, const ParameterSet& params,
                        const std::string& prefix, TensorPtr x,
                        const ModelConfig& cfg) {
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    x = layer_norm(tape,
                   tape.add(x, multi_head_attention(tape, params, p + ".attn", x,
                                                    x, nullptr, cfg)),
                   params, p + ".ln1");
    x = layer_norm(tape, tape.add(x, feed_forward(tape, x, params, p + ".ff")),
                   params, p + ".ln2");
  }
  return x;
}

TensorPtr decoder_stack(Tape& tape, const ParameterSet& params,
                        const std::string& prefix, TensorPtr x,
                        const TensorPtr& memory, const TensorPtr& causal_mask,
                        const ModelConfig& cfg) {
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    x = layer_norm(tape,
                   tape.add(x, multi_head_attention(tape, params, p + ".self", x,
                                                    x, causal_mask, cfg)),
                   params, p + ".ln1");
    x = layer_norm(tape,
                   tape.add(x, multi_head_attention(tape, params, p + ".cross", x,
                                                    memory, nullptr, cfg)),
                   params, p + ".ln2");
    x = layer_norm(tape, tape.add(x, feed_forward(tape, x, params, p + ".ff")),
                   params, p + ".ln3");
  }
  return x;
}

struct LstmStack {
  std::vector<ad::LstmCellParams> layers;
};

LstmStack lstm_stack(const ParameterSet& params, const std::string& prefix,
                     std::size_t num_layers) {
  LstmStack s;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    ad::LstmCellParams cp;
    cp.w_xi = params.get(p + ".w_xi");
    cp.w_hi = params.get(p + ".w_hi");
    cp.b_i = params.get(p + ".b_i");
    cp.w_xf = params.get(p + ".w_xf");
    cp.w_hf = params.get(p + ".w_hf");
    cp.b_f = params.get(p + ".b_f");
    cp.w_xo = params.get(p + ".w_xo");
    cp.w_ho = params.get(p + ".w_ho");
    cp.b_o = params.get(p + ".b_o");
    cp.w_xc = params.get(p + ".w_xc");
    cp.w_hc = params.get(p + ".w_hc");
    cp.b_c = params.get(p + ".b_c");
    s.layers.push_back(cp);
  }
  return s;
}

// Runs one stacked-LSTM step; states are updated in place.
TensorPtr lstm_step(Tape& tape, const LstmStack& stack,
                    std::vector<ad::LstmState>& states, TensorPtr x) {
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    states[l] = tape.lstm_cell(x, states[l].h, states[l].c, stack.layers[l]);
    x = states[l].h;
  }
  return x;
}

std::vector<ad::LstmState> zero_states(std::size_t num_layers, std::size_t dim) {
  std::vector<ad::LstmState> s(num_layers);
  for (auto& st : s) {
    st.h = ad::make_tensor({1, dim});
    st.c = ad::make_tensor({1, dim});
  }
  return s;
}

ModelOutput lstm_forward_horizon(Tape& tape, const ObservationWindow& window,
                                 const ModelConfig& cfg, const ParameterSet& params,
                                 std::size_t horizon) {
  cfg.validate();
  const std::size_t d = cfg.embed_dim;
  auto speed_in = const_matrix(window.speeds);
  auto pos_in = const_matrix(window.positions);

  auto run_encoder = [&](const std::string& prefix, const TensorPtr& input) {
    LstmStack stack = lstm_stack(params, prefix, cfg.num_layers);
    auto states = zero_states(cfg.num_layers, d);
    for (std::size_t t = 0; t < input->rows(); ++t)
      lstm_step(tape, stack, states, tape.slice_rows(input, t, 1));
    return states;
  };
  auto enc_speed = run_encoder("lstm.enc.speed", speed_in);
  auto enc_pos = run_encoder("lstm.enc.pos", pos_in);

  // fuse the two encoders' final states per layer and seed both decoders
  std::vector<ad::LstmState> fused(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "lstm.fuse.l" + std::to_string(l);
    fused[l].h = linear(tape, tape.concat_cols({enc_speed[l].h, enc_pos[l].h}),
                        params, p + ".h");
    fused[l].c = linear(tape, tape.concat_cols({enc_speed[l].c, enc_pos[l].c}),
                        params, p + ".c");
  }

  LstmStack dec_speed = lstm_stack(params, "lstm.dec.speed", cfg.num_layers);
  LstmStack dec_action = lstm_stack(params, "lstm.dec.action", cfg.num_layers);
  auto speed_states = fused;
  auto action_states = fused;

  TensorPtr x = tape.slice_rows(speed_in, speed_in->rows() - 1, 1);
  std::vector<TensorPtr> speed_rows, logit_rows;
  for (std::size_t t = 0; t < horizon; ++t) {
    auto hs = lstm_step(tape, dec_speed, speed_states, x);
    auto ha = lstm_step(tape, dec_action, action_states, x);
    auto speed_t = linear(tape, hs, params, "lstm.out.speed");
    auto logit_t = linear(tape, ha, params, "lstm.out.action");
    speed_rows.push_back(speed_t);
    logit_rows.push_back(logit_t);
    x = speed_t;  // own prediction feeds the next step
  }
  ModelOutput out;
  out.speed_out = speed_rows.size() == 1 ? speed_rows[0] : tape.concat_rows(speed_rows);
  out.action_logits = tape.reshape(
      logit_rows.size() == 1 ? logit_rows[0] : tape.concat_rows(logit_rows),
      {horizon});
  return out;
}

}  // namespace

ParameterSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterSet params;
  std::mt19937_64 rng(seed);
  for_each_param(cfg, [&](const std::string& name,
                          const std::vector<std::size_t>& shape, Init init) {
    TensorPtr t = params.add(name, shape);
    switch (init) {
      case Init::Weight: {
        const double fan_in = static_cast<double>(shape[0]);
        const double fan_out = static_cast<double>(shape.size() > 1 ? shape[1] : 1);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t->value) v = dist(rng);
        break;
      }
      case Init::Token: {
        std::uniform_real_distribution<double> dist(-0.1, 0.1);
        for (double& v : t->value) v = dist(rng);
        break;
      }
      case Init::One:
        std::fill(t->value.begin(), t->value.end(), 1.0);
        break;
      case Init::Zero:
        break;
    }
  });
  return params;
}

void for_each_param_shape(
    const ModelConfig& cfg,
    const std::function<void(const std::string&, const std::vector<std::size_t>&)>& fn) {
  for_each_param(cfg, [&](const std::string& name,
                          const std::vector<std::size_t>& shape, Init) {
    fn(name, shape);
  });
}

TensorPtr make_shifted_targets(Tape& tape, const ObservationWindow& window,
                               const ParameterSet& params) {
  auto start = params.get("tf.start_token");
  const std::size_t t_len = window.predict_len();
  if (t_len == 1) return start;
  std::vector<SpeedVec> shifted(window.target_speeds.begin(),
                                window.target_speeds.end() - 1);
  return tape.concat_rows({start, const_matrix(shifted)});
}

ModelOutput tf_forward(Tape& tape, const ObservationWindow& window,
                       const TensorPtr& target_inputs, const ModelConfig& cfg,
                       const ParameterSet& params) {
  cfg.validate();
  if (cfg.kind != ModelKind::TF_ed)
    throw ContractError("tf_forward called with a non-TF config");
  const std::size_t obs = window.observe_len();
  const std::size_t t_len = target_inputs->rows();
  auto pe_obs = positional_encoding(obs, cfg.embed_dim);
  auto pe_tgt = positional_encoding(t_len, cfg.embed_dim);

  auto embed = [&](const TensorPtr& x, const std::string& which,
                   const TensorPtr& pe) {
    return tape.add(linear(tape, x, params, "tf.embed." + which), pe);
  };
  auto enc_speed = encoder_stack(
      tape, params, "tf.enc.speed",
      embed(const_matrix(window.speeds), "speed", pe_obs), cfg);
  auto enc_pos = encoder_stack(
      tape, params, "tf.enc.pos",
      embed(const_matrix(window.positions), "pos", pe_obs), cfg);
  // sequence-axis fusion of the two encoder outputs
  auto memory = tape.concat_rows({enc_speed, enc_pos});

  auto tgt_embedded = embed(target_inputs, "tgt", pe_tgt);
  auto mask = causal_mask_bias(t_len);
  auto dec_speed =
      decoder_stack(tape, params, "tf.dec.speed", tgt_embedded, memory, mask, cfg);
  auto dec_action =
      decoder_stack(tape, params, "tf.dec.action", tgt_embedded, memory, mask, cfg);

  ModelOutput out;
  out.speed_out = linear(tape, dec_speed, params, "tf.out.speed");
  out.action_logits =
      tape.reshape(linear(tape, dec_action, params, "tf.out.action"), {t_len});
  return out;
}

ModelOutput lstm_forward(Tape& tape, const ObservationWindow& window,
                         const ModelConfig& cfg, const ParameterSet& params) {
  if (cfg.kind != ModelKind::LSTM_ed)
    throw ContractError("lstm_forward called with a non-LSTM config");
  return lstm_forward_horizon(tape, window, cfg, params, cfg.predict_len);
}

ModelOutput forward(Tape& tape, const ObservationWindow& window,
                    const ModelConfig& cfg, const ParameterSet& params) {
  if (cfg.kind == ModelKind::TF_ed)
    return tf_forward(tape, window, make_shifted_targets(tape, window, params),
                      cfg, params);
  return lstm_forward(tape, window, cfg, params);
}

Forecast decode_autoregressive(const ModelConfig& cfg, const ParameterSet& params,
                               const ObservationWindow& window,
                               std::size_t horizon) {
  cfg.validate();
  if (horizon == 0) throw ContractError("decode_autoregressive: horizon must be >= 1");
  Tape tape;
  ModelOutput out;
  if (cfg.kind == ModelKind::LSTM_ed) {
    out = lstm_forward_horizon(tape, window, cfg, params, horizon);
  } else {
    const auto& start = params.get("tf.start_token")->value;
    std::vector<double> tgt(start.begin(), start.end());
    for (std::size_t step = 1; step <= horizon; ++step) {
      tape.clear();
      auto target_inputs = ad::make_tensor({step, 4}, tgt);
      out = tf_forward(tape, window, target_inputs, cfg, params);
      if (step < horizon) {
        const std::size_t last = (step - 1) * 4;
        for (std::size_t j = 0; j < 4; ++j)
          tgt.push_back(out.speed_out->value[last + j]);
      }
    }
  }
  Forecast fc;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double* row = out.speed_out->value.data() + t * 4;
    fc.speed_seq.push_back({row[0] / kSpeedScale, row[1] / kSpeedScale,
                            row[2] / kSpeedScale, row[3] / kSpeedScale});
    const double p = 1.0 / (1.0 + std::exp(-out.action_logits->value[t]));
    fc.action_probs.push_back(p);
    fc.action_labels.push_back(p >= 0.5 ? 1 : 0);
  }
  fc.position_seq = seqdata::reconstruct_positions(window.positions.back(), fc.speed_seq);
  return fc;
}

}  // namespace pedcast::models
