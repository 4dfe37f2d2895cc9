/*
 * Copyright (C) 2026 The bplab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Run configuration: every tunable of a training or inference run, read from
// and written to plain `key = value` text. Unknown keys are errors.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bplab {

struct RunConfig {
  // data
  int image_size = 256;
  bool augment = true;
  int max_images = 0;  // 0 keeps the whole training set
  // backbone
  int stem_channels = 16;
  int levels = 4;
  int max_channels = 64;
  int head_channels = 16;
  int output_stride = 2;
  // boundary transformer
  int embed_dim = 128;
  int heads = 4;
  int mlp_hidden = 256;
  int encoder_layers = 3;
  double max_offset = 16.0;
  int iterations = 3;
  bool decoder_uses_projection = false;
  int n_control_points = 20;
  // proposals
  double th_d = 0.3;
  double th_s = 0.85;
  int max_train_proposals = 24;  // per image
  // losses
  double lambda = 0.1;
  double alpha = 3.0;
  double beta = 0.5;
  double ohem_ratio = 3.0;
  int ohem_floor = 192;
  double dir_background_weight = 1.0;
  bool dir_background_as_segment = true;  // overrides dir_background_weight
  bool dir_normalize_weights = true;
  double smooth_l1_delta = 1.0;
  bool invert_schedule = false;
  bool use_energy = true;
  // optimization
  int epochs = 120;
  int batch_size = 8;
  double lr = 0.001;
  double lr_decay = 0.9;
  int lr_decay_every = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;
  int threads = 1;
  std::string init_from;  // warm-start weights, empty for none
  bool init_backbone_only = false;  // with init_from: keep the fresh transformer
  bool freeze_backbone = false;

  /// Learning rate in effect during `epoch` (0-based).
  [[nodiscard]] double lr_at(int epoch) const {
    double v = lr;
    for (int k = 0; k < epoch / lr_decay_every; ++k) v *= lr_decay;
    return v;
  }

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
    };
    need(image_size > 0 && image_size % (1 << levels) == 0, "image_size must be a positive multiple of 2^levels");
    need(output_stride == 1 || output_stride == 2 || output_stride == 4, "output_stride must be 1, 2 or 4");
    need(n_control_points >= 3, "n_control_points must be at least 3");
    need(iterations >= 1, "iterations must be at least 1");
    need(th_d > 0 && th_d < 1 && th_s > 0 && th_s <= 1, "thresholds out of range");
    need(epochs >= 0 && batch_size >= 1, "epochs and batch_size");
    need(lr > 0 && lr_decay > 0 && lr_decay_every > 0, "learning rate schedule");
    need(checkpoint_every >= 1 && threads >= 1 && max_train_proposals >= 1, "checkpoint_every, threads, max_train_proposals");
    need(embed_dim % heads == 0, "embed_dim must be divisible by heads");
  }
};

namespace detail {

using ConfigField = std::variant<int RunConfig::*, double RunConfig::*, bool RunConfig::*, std::uint64_t RunConfig::*,
                                 std::string RunConfig::*>;

struct ConfigKey {
  const char* name;
  ConfigField field;
  const char* origin;  // where the default comes from
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"image_size", &RunConfig::image_size, "desk-scale crop (published: 640)"},
      {"augment", &RunConfig::augment, "published: rotation, crop, flip"},
      {"max_images", &RunConfig::max_images, "chosen"},
      {"stem_channels", &RunConfig::stem_channels, "desk-scale backbone"},
      {"levels", &RunConfig::levels, "desk-scale backbone"},
      {"max_channels", &RunConfig::max_channels, "desk-scale backbone"},
      {"head_channels", &RunConfig::head_channels, "desk-scale backbone"},
      {"output_stride", &RunConfig::output_stride, "chosen (published: 1 or 4)"},
      {"embed_dim", &RunConfig::embed_dim, "published"},
      {"heads", &RunConfig::heads, "chosen"},
      {"mlp_hidden", &RunConfig::mlp_hidden, "chosen"},
      {"encoder_layers", &RunConfig::encoder_layers, "published"},
      {"max_offset", &RunConfig::max_offset, "published"},
      {"iterations", &RunConfig::iterations, "published"},
      {"decoder_uses_projection", &RunConfig::decoder_uses_projection, "chosen"},
      {"n_control_points", &RunConfig::n_control_points, "published"},
      {"th_d", &RunConfig::th_d, "published"},
      {"th_s", &RunConfig::th_s, "published"},
      {"max_train_proposals", &RunConfig::max_train_proposals, "chosen"},
      {"lambda", &RunConfig::lambda, "published"},
      {"alpha", &RunConfig::alpha, "published"},
      {"beta", &RunConfig::beta, "published"},
      {"ohem_ratio", &RunConfig::ohem_ratio, "published"},
      {"ohem_floor", &RunConfig::ohem_floor, "chosen"},
      {"dir_background_weight", &RunConfig::dir_background_weight, "chosen"},
      {"dir_background_as_segment", &RunConfig::dir_background_as_segment, "chosen"},
      {"dir_normalize_weights", &RunConfig::dir_normalize_weights, "chosen"},
      {"smooth_l1_delta", &RunConfig::smooth_l1_delta, "chosen"},
      {"invert_schedule", &RunConfig::invert_schedule, "chosen"},
      {"use_energy", &RunConfig::use_energy, "published"},
      {"epochs", &RunConfig::epochs, "desk-scale (published: 660)"},
      {"batch_size", &RunConfig::batch_size, "desk-scale (published: 12)"},
      {"lr", &RunConfig::lr, "published"},
      {"lr_decay", &RunConfig::lr_decay, "published"},
      {"lr_decay_every", &RunConfig::lr_decay_every, "published"},
      {"adam_beta1", &RunConfig::adam_beta1, "conventional"},
      {"adam_beta2", &RunConfig::adam_beta2, "conventional"},
      {"adam_eps", &RunConfig::adam_eps, "conventional"},
      {"seed", &RunConfig::seed, "chosen"},
      {"checkpoint_every", &RunConfig::checkpoint_every, "chosen"},
      {"threads", &RunConfig::threads, "chosen"},
      {"init_from", &RunConfig::init_from, "chosen"},
      {"init_backbone_only", &RunConfig::init_backbone_only, "chosen"},
      {"freeze_backbone", &RunConfig::freeze_backbone, "chosen"},
  };
  return keys;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("bad number '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad boolean '" + v + "'");
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Applies `key = value` lines on top of `base`. '#' starts a comment.
inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    bool known = false;
    for (const auto& k : detail::config_keys()) {
      if (key != k.name) continue;
      known = true;
      try {
        std::visit(
            [&]<class M>(M RunConfig::*member) {
              if constexpr (std::is_same_v<M, bool>)
                base.*member = detail::parse_bool(value);
              else if constexpr (std::is_same_v<M, std::string>)
                base.*member = value;
              else
                base.*member = detail::parse_number<M>(value);
            },
            k.field);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": " + key + ": " + e.what());
      }
      break;
    }
    if (!known) throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  base.validate();
  return base;
}

inline RunConfig parse_config_text(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  return parse_config(is, std::move(base));
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  return parse_config(is);
}

/// Every key with its effective value and the origin of its default.
inline std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& k : detail::config_keys()) {
    std::string value;
    std::visit(
        [&](auto member) {
          const auto& v = cfg.*member;
          using M = std::remove_cvref_t<decltype(v)>;
          if constexpr (std::is_same_v<M, bool>)
            value = v ? "true" : "false";
          else if constexpr (std::is_same_v<M, std::string>)
            value = v;
          else if constexpr (std::is_same_v<M, double>)
            value = detail::format_double(v);
          else
            value = std::to_string(v);
        },
        k.field);
    os << k.name << " = " << value << "  # " << k.origin << '\n';
  }
  return os.str();
}

}  // namespace bplab
