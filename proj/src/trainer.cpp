#include "pedcast/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pedcast/checkpoint.hpp"

namespace pedcast::trainer {

using ad::ParameterSet;
using ad::Tape;
using ad::TensorPtr;
using seqdata::ObservationWindow;

void TrainConfig::validate() const {
  if (batch_size < 1 || epochs < 1 || eval_every < 1)
    throw ConfigError("batch_size, epochs and eval_every must be >= 1");
  if (loss_weight_lambda < 0.0)
    throw ConfigError("loss_weight_lambda must be non-negative");
  if (!(learning_rate >= 0.0))
    throw ConfigError("learning_rate must be non-negative");
}

TensorPtr multitask_loss(Tape& tape, const TensorPtr& speed_out,
                         const TensorPtr& action_logits,
                         const ObservationWindow& window, double lambda) {
  std::vector<double> speed_target;
  speed_target.reserve(window.target_speeds.size() * 4);
  // models emit speeds in kSpeedScale units; compare in the same space
  for (const auto& s : window.target_speeds) {
    speed_target.push_back(s.dx * models::kSpeedScale);
    speed_target.push_back(s.dy * models::kSpeedScale);
    speed_target.push_back(s.dw * models::kSpeedScale);
    speed_target.push_back(s.dh * models::kSpeedScale);
  }
  std::vector<double> action_target(window.target_actions.begin(),
                                    window.target_actions.end());
  auto mse = tape.mse(speed_out, speed_target);
  auto bce = tape.bce_with_logits(action_logits, action_target);
  return tape.add(mse, tape.scale(bce, lambda));
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,val_ade,val_accuracy,wall_time_s\n";
  for (const auto& r : records)
    os << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.val_ade
       << "," << r.val_accuracy << "," << r.wall_time_s << "\n";
  return os.str();
}

void TrainLog::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write train log: " + path);
  out << to_csv();
}

metrics::EvalReport evaluate(const models::ModelConfig& cfg,
                             const ParameterSet& params,
                             const std::vector<ObservationWindow>& test_set,
                             const metrics::ImageSize& img) {
  if (test_set.empty()) throw ContractError("evaluate: empty test set");
  metrics::Aggregator agg(cfg.predict_len, img);
  for (const auto& w : test_set)
    agg.add(models::decode_autoregressive(cfg, params, w, cfg.predict_len), w);
  return agg.report();
}

namespace {

constexpr char kStateMagic[4] = {'P', 'C', 'K', 'T'};

double window_loss(Tape& tape, const models::ModelConfig& model_cfg,
                   const ParameterSet& params, const ObservationWindow& w,
                   double lambda, TensorPtr* loss_out) {
  auto out = models::forward(tape, w, model_cfg, params);
  auto loss = multitask_loss(tape, out.speed_out, out.action_logits, w, lambda);
  if (loss_out) *loss_out = loss;
  return loss->value[0];
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  return std::mt19937_64(seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
}

}  // namespace

void save_train_state(const std::string& path, const ad::AdamState& state,
                      std::size_t epochs_completed, double best_val_loss) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write train state: " + path);
  out.write(kStateMagic, 4);
  auto w64 = [&](std::uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); };
  auto wd = [&](double v) { out.write(reinterpret_cast<char*>(&v), 8); };
  w64(1);  // version
  w64(epochs_completed);
  w64(static_cast<std::uint64_t>(state.step_count));
  wd(state.learning_rate);
  wd(state.beta1);
  wd(state.beta2);
  wd(state.epsilon);
  wd(best_val_loss);
  w64(state.first_moment.size());
  // deterministic order: sorted by name
  std::vector<std::string> names;
  for (const auto& [name, _] : state.first_moment) names.push_back(name);
  std::sort(names.begin(), names.end());
  for (const auto& name : names) {
    const auto& m = state.first_moment.at(name);
    const auto& v = state.second_moment.at(name);
    w64(name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    w64(m.size());
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * 8));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * 8));
  }
  if (!out) throw CheckpointError("write error on train state: " + path);
}

bool load_train_state(const std::string& path, ad::AdamState& state,
                      std::size_t& epochs_completed, double& best_val_loss) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kStateMagic, 4) != 0)
    throw CheckpointError("bad magic in train state: " + path);
  auto r64 = [&]() {
    std::uint64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw CheckpointError("truncated train state: " + path);
    return v;
  };
  auto rd = [&]() {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw CheckpointError("truncated train state: " + path);
    return v;
  };
  if (r64() != 1) throw CheckpointError("unsupported train state version: " + path);
  epochs_completed = r64();
  state.step_count = static_cast<std::int64_t>(r64());
  state.learning_rate = rd();
  state.beta1 = rd();
  state.beta2 = rd();
  state.epsilon = rd();
  best_val_loss = rd();
  const std::uint64_t count = r64();
  state.first_moment.clear();
  state.second_moment.clear();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = r64();
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t len = r64();
    std::vector<double> m(len), v(len);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(len * 8));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(len * 8));
    if (!in) throw CheckpointError("truncated train state: " + path);
    state.first_moment.emplace(name, std::move(m));
    state.second_moment.emplace(name, std::move(v));
  }
  return true;
}

TrainResult train(const models::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<ObservationWindow>& train_set,
                  const std::vector<ObservationWindow>& val_set) {
  model_cfg.validate();
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");

  ParameterSet params = models::init_params(model_cfg, cfg.seed);
  ad::AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  std::size_t start_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();

  namespace fs = std::filesystem;
  std::string last_path, best_path;
  if (!cfg.checkpoint_dir.empty()) {
    fs::create_directories(cfg.checkpoint_dir);
    last_path = (fs::path(cfg.checkpoint_dir) / "last.pckp").string();
    best_path = (fs::path(cfg.checkpoint_dir) / "best.pckp").string();
    if (cfg.resume && fs::exists(last_path)) {
      models::load_checkpoint(last_path, model_cfg, params);
      if (!load_train_state(last_path + ".train", adam, start_epoch, best_val))
        throw CheckpointError("resume requested but no train state at " +
                              last_path + ".train");
    }
  }

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  auto write_checkpoint = [&](std::size_t epochs_done) {
    if (last_path.empty()) return;
    models::save_checkpoint(last_path, model_cfg, params);
    save_train_state(last_path + ".train", adam, epochs_done, best_val);
  };

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto rng = epoch_rng(cfg.seed, epoch);
    // shuffle from the identity permutation so an epoch's order depends
    // only on (seed, epoch), which keeps resumed runs bit-identical
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const double inv_b = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        Tape tape;
        TensorPtr loss;
        const double lv = window_loss(tape, model_cfg, params,
                                      train_set[order[i]],
                                      cfg.loss_weight_lambda, &loss);
        if (!std::isfinite(lv))
          throw NumericError("non-finite training loss at epoch " +
                             std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batch_index + 1));
        loss_sum += lv;
        tape.backward(loss, inv_b);
      }
      ad::adam_step(params, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(order.size());

    if (!val_set.empty()) {
      double vsum = 0.0;
      for (const auto& w : val_set) {
        Tape tape;
        vsum += window_loss(tape, model_cfg, params, w, cfg.loss_weight_lambda,
                            nullptr);
      }
      rec.val_loss = vsum / static_cast<double>(val_set.size());
      const bool eval_now =
          (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
      if (eval_now) {
        auto report = evaluate(model_cfg, params, val_set, metrics::ImageSize{});
        rec.val_ade = report.ade;
        rec.val_accuracy = report.accuracy;
      }
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        if (!best_path.empty())
          models::save_checkpoint(best_path, model_cfg, params);
      }
    }

    rec.wall_time_s = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();
    result.log.records.push_back(rec);
    ++result.epochs_run;

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs)
      write_checkpoint(epoch + 1);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace pedcast::trainer
