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

// Single-file checkpoint: a format tag, the run configuration as text, named
// tensors, and optional optimizer state.
//
//   "bplab-ckpt-v1\n"
//   u64 config_bytes, config text
//   u64 tensor_count, then per tensor:
//     u32 name_bytes, name, u8 dtype (0 f32, 1 f64, 2 i64), u32 ndim, i64 dims[ndim], raw data
//   u64 optimizer_bytes, optimizer state (a tensor list in the same format)
//
// Integers are stored little-endian as laid out in memory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace bplab::nn {

inline constexpr char kCheckpointTag[] = "bplab-ckpt-v1\n";

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

struct Checkpoint {
  std::string config;
  NamedTensors tensors;
  std::string optimizer;  // encoded optimizer state, empty when not stored
};

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return v;
}

inline std::string get_bytes(std::istream& is, std::uint64_t n) {
  if (n > (1ULL << 34)) throw std::runtime_error("checkpoint field too large");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return s;
}

inline std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    default: throw std::runtime_error("unsupported tensor dtype in checkpoint");
  }
}

inline torch::ScalarType dtype_of(std::uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    default: throw std::runtime_error("unknown tensor dtype code in checkpoint");
  }
}

}  // namespace detail

namespace detail {

inline void put_tensors(std::ostream& os, const NamedTensors& tensors) {
  put<std::uint64_t>(os, tensors.size());
  for (const auto& [name, tensor] : tensors) {
    const torch::Tensor t = tensor.detach().contiguous().cpu();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(os, dtype_code(t.scalar_type()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
    for (int64_t d : t.sizes()) put<std::int64_t>(os, d);
    os.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  }
}

inline NamedTensors get_tensors(std::istream& is) {
  NamedTensors out;
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_bytes(is, get<std::uint32_t>(is));
    const torch::ScalarType dt = dtype_of(get<std::uint8_t>(is));
    const auto ndim = get<std::uint32_t>(is);
    if (ndim > 8) throw std::runtime_error("checkpoint tensor rank too large");
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) {
      d = get<std::int64_t>(is);
      if (d < 0) throw std::runtime_error("negative tensor dimension in checkpoint");
    }
    torch::Tensor t = torch::empty(dims, torch::TensorOptions().dtype(dt));
    is.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    if (!is) throw std::runtime_error("checkpoint truncated in tensor " + name);
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCheckpointTag, sizeof(kCheckpointTag) - 1);
  detail::put<std::uint64_t>(os, ck.config.size());
  os.write(ck.config.data(), static_cast<std::streamsize>(ck.config.size()));
  detail::put_tensors(os, ck.tensors);
  detail::put<std::uint64_t>(os, ck.optimizer.size());
  os.write(ck.optimizer.data(), static_cast<std::streamsize>(ck.optimizer.size()));
  if (!os) throw std::runtime_error("failed to write checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  const std::string tag = detail::get_bytes(is, sizeof(kCheckpointTag) - 1);
  if (tag != kCheckpointTag) throw std::runtime_error("not a bplab-ckpt-v1 checkpoint");
  Checkpoint ck;
  ck.config = detail::get_bytes(is, detail::get<std::uint64_t>(is));
  ck.tensors = detail::get_tensors(is);
  ck.optimizer = detail::get_bytes(is, detail::get<std::uint64_t>(is));
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + tmp);
    write_checkpoint(os, ck);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

/// Parameters then buffers, in registration order.
inline NamedTensors module_state(const torch::nn::Module& m) {
  NamedTensors out;
  for (const auto& p : m.named_parameters()) out.emplace_back(p.key(), p.value());
  for (const auto& b : m.named_buffers()) out.emplace_back(b.key(), b.value());
  return out;
}

/// Copies stored values into `m`; every module tensor must be present with
/// a matching shape.
inline void load_module_state(torch::nn::Module& m, const NamedTensors& stored) {
  torch::NoGradGuard guard;
  auto find = [&](const std::string& key) -> const torch::Tensor& {
    for (const auto& [name, t] : stored)
      if (name == key) return t;
    throw std::runtime_error("checkpoint is missing tensor " + key);
  };
  for (auto& p : m.named_parameters()) {
    const torch::Tensor& src = find(p.key());
    if (src.sizes() != p.value().sizes()) throw std::runtime_error("shape mismatch for " + p.key());
    p.value().copy_(src);
  }
  for (auto& b : m.named_buffers()) {
    const torch::Tensor& src = find(b.key());
    if (src.sizes() != b.value().sizes()) throw std::runtime_error("shape mismatch for " + b.key());
    b.value().copy_(src);
  }
}

/// Adam moments as a tensor list in the same record format, so that equal
/// states give equal bytes. Parameters are keyed by group and position.
inline std::string serialize_optimizer(const torch::optim::Adam& opt) {
  NamedTensors state;
  const auto& groups = opt.param_groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& params = groups[g].params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto it = opt.state().find(params[i].unsafeGetTensorImpl());
      if (it == opt.state().end()) continue;
      const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
      const std::string key = "adam." + std::to_string(g) + "." + std::to_string(i) + ".";
      state.emplace_back(key + "step", torch::tensor({static_cast<int64_t>(s.step())}));
      state.emplace_back(key + "exp_avg", s.exp_avg());
      state.emplace_back(key + "exp_avg_sq", s.exp_avg_sq());
      if (s.max_exp_avg_sq().defined()) state.emplace_back(key + "max_exp_avg_sq", s.max_exp_avg_sq());
    }
  }
  std::ostringstream os(std::ios::binary);
  detail::put_tensors(os, state);
  return os.str();
}

inline void deserialize_optimizer(torch::optim::Adam& opt, const std::string& blob) {
  if (blob.empty()) return;
  std::istringstream is(blob, std::ios::binary);
  const NamedTensors stored = detail::get_tensors(is);
  auto find = [&](const std::string& key) -> const torch::Tensor* {
    for (const auto& [name, t] : stored)
      if (name == key) return &t;
    return nullptr;
  };
  auto& groups = opt.param_groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& params = groups[g].params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string key = "adam." + std::to_string(g) + "." + std::to_string(i) + ".";
      const torch::Tensor* step = find(key + "step");
      if (!step) continue;
      const torch::Tensor* m = find(key + "exp_avg");
      const torch::Tensor* v = find(key + "exp_avg_sq");
      if (!m || !v || m->sizes() != params[i].sizes() || v->sizes() != params[i].sizes())
        throw std::runtime_error("optimizer state does not match parameter " + key);
      auto s = std::make_unique<torch::optim::AdamParamState>();
      s->step(step->item<int64_t>());
      s->exp_avg(m->clone());
      s->exp_avg_sq(v->clone());
      if (const torch::Tensor* mx = find(key + "max_exp_avg_sq")) s->max_exp_avg_sq(mx->clone());
      opt.state()[params[i].unsafeGetTensorImpl()] = std::move(s);
    }
  }
}

}  // namespace bplab::nn
