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

#include <gtest/gtest.h>

#include <sstream>

#include "bplab/nn/backbone.hpp"
#include "bplab/nn/checkpoint.hpp"
#include "nn_helpers.hpp"

using namespace bplab::nn;

namespace {

BackboneConfig config(int stride, std::uint64_t seed = 3) {
  BackboneConfig c;
  c.output_stride = stride;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Backbone, StrideFourOn64) {
  Backbone net(config(4));
  torch::NoGradGuard g;
  const FeatureMaps f = net->forward(torch::randn({1, 3, 64, 64}));
  EXPECT_EQ(f.shared.sizes(), (std::vector<int64_t>{1, 32, 16, 16}));
  EXPECT_EQ(f.prior.sizes(), (std::vector<int64_t>{1, 4, 16, 16}));
  EXPECT_EQ(f.stride, 4);
}

TEST(Backbone, StrideOneOn640) {
  Backbone net(config(1));
  torch::NoGradGuard g;
  const FeatureMaps f = net->forward(torch::randn({1, 3, 640, 640}));
  EXPECT_EQ(f.shared.sizes(), (std::vector<int64_t>{1, 32, 640, 640}));
}

TEST(Backbone, OutputShapeIsCeilOfInputOverStride) {
  torch::NoGradGuard g;
  for (int s : {1, 2, 4}) {
    Backbone net(config(s));
    for (auto [h, w] : {std::pair{50, 37}, std::pair{16, 16}, std::pair{33, 65}}) {
      const FeatureMaps f = net->forward(torch::randn({2, 3, h, w}));
      EXPECT_EQ(f.shared.size(2), (h + s - 1) / s);
      EXPECT_EQ(f.shared.size(3), (w + s - 1) / s);
      EXPECT_EQ(f.prior.size(2), (h + s - 1) / s);
      EXPECT_EQ(f.prior.size(3), (w + s - 1) / s);
    }
  }
}

TEST(Backbone, ClassificationChannelIsAProbability) {
  Backbone net(config(2));
  torch::NoGradGuard g;
  const FeatureMaps f = net->forward(torch::randn({1, 3, 32, 32}) * 5);
  const torch::Tensor cls = f.prior.select(1, 0);
  EXPECT_GT(cls.min().item<double>(), 0.0);
  EXPECT_LT(cls.max().item<double>(), 1.0);
}

TEST(Backbone, SameSeedReplaysBitwise) {
  torch::NoGradGuard g;
  const torch::Tensor x = torch::randn({1, 3, 48, 48});
  Backbone a(config(2, 9)), b(config(2, 9));
  const FeatureMaps fa = a->forward(x), fb = b->forward(x);
  EXPECT_TRUE(torch::equal(fa.shared, fb.shared));
  EXPECT_TRUE(torch::equal(fa.prior, fb.prior));
  EXPECT_TRUE(torch::equal(fa.shared, a->forward(x).shared));
}

TEST(Backbone, SeedsControlInitialization) {
  Backbone a(config(2, 1)), b(config(2, 1)), c(config(2, 2));
  const auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    any_diff = any_diff || !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Backbone, ParameterCountMatchesFormula) {
  for (int s : {1, 2, 4})
    for (int levels : {3, 4, 5}) {
      BackboneConfig c = config(s);
      c.levels = levels;
      Backbone net(c);
      EXPECT_EQ(parameter_count(*net), analytic_parameter_count(c)) << "stride " << s << " levels " << levels;
    }
  // Hand count for the default configuration (levels 16/32/64/64, stride 2).
  const auto conv = [](int64_t k, int64_t i, int64_t o) { return k * k * i * o + o; };
  const int64_t expect = conv(3, 3, 16) + 2 * conv(3, 16, 16) + conv(3, 16, 32) + 2 * conv(3, 32, 32) +
                         conv(3, 32, 64) + 2 * conv(3, 64, 64) + conv(3, 64, 64) + 2 * conv(3, 64, 64) +
                         conv(1, 16, 32) + conv(1, 32, 32) + conv(1, 64, 32) + conv(1, 64, 32) + conv(3, 32, 32) +
                         conv(3, 32, 16) + conv(3, 16, 16) + conv(1, 16, 4);
  EXPECT_EQ(analytic_parameter_count(config(2)), expect);
}

TEST(Backbone, RejectsBadConfig) {
  BackboneConfig c;
  c.shared_channels = 16;
  EXPECT_THROW(Backbone{c}, std::invalid_argument);
  c = BackboneConfig{};
  c.output_stride = 3;
  EXPECT_THROW(Backbone{c}, std::invalid_argument);
}

TEST(Backbone, FiniteDifferenceGradients) {
  BackboneConfig c = config(2, 5);
  c.smooth_activation = true;
  Backbone net(c);
  net->to(torch::kFloat64);
  const torch::Tensor x = torch::randn({1, 3, 8, 8}, torch::kFloat64);
  const torch::Tensor ws = torch::randn({1, 32, 4, 4}, torch::kFloat64);
  const torch::Tensor wp = torch::randn({1, 4, 4, 4}, torch::kFloat64);
  auto f = [&] {
    const FeatureMaps m = net->forward(x);
    return (m.shared * ws).sum() + (m.prior * wp).sum();
  };
  const auto probes = bplab::testing::random_probes(net->parameters(), 10, 17);
  EXPECT_LT(bplab::testing::max_relative_grad_error(f, probes), 1e-3);
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
  Backbone a(config(2, 4)), b(config(2, 8));
  std::stringstream ss;
  write_checkpoint(ss, {"key = value\n", module_state(*a), ""});
  const Checkpoint ck = read_checkpoint(ss);
  EXPECT_EQ(ck.config, "key = value\n");
  load_module_state(*b, ck.tensors);
  torch::NoGradGuard g;
  const torch::Tensor x = torch::randn({1, 3, 32, 32});
  EXPECT_TRUE(torch::equal(a->forward(x).prior, b->forward(x).prior));
}

TEST(Checkpoint, RejectsForeignAndTruncatedFiles) {
  std::stringstream bad("not-a-checkpoint-at-all");
  EXPECT_THROW(read_checkpoint(bad), std::runtime_error);
  Backbone a(config(2));
  std::stringstream ss;
  write_checkpoint(ss, {"", module_state(*a), ""});
  std::string bytes = ss.str();
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_checkpoint(cut), std::runtime_error);
}

TEST(Checkpoint, MissingTensorIsAnError) {
  BackboneConfig small = config(2);
  small.levels = 3;
  Backbone a(small), b(config(2));
  EXPECT_THROW(load_module_state(*b, module_state(*a)), std::runtime_error);
}

TEST(Checkpoint, OptimizerStateResumesExactly) {
  auto make = [] { return Backbone(config(4, 6)); };
  const torch::Tensor x = torch::randn({2, 3, 16, 16});
  auto step = [&](Backbone& net, torch::optim::Adam& opt) {
    opt.zero_grad();
    const FeatureMaps m = net->forward(x);
    (m.prior.pow(2).mean() + m.shared.mean()).backward();
    opt.step();
  };
  Backbone ref = make();
  torch::optim::Adam ref_opt(ref->parameters(), 1e-2);
  step(ref, ref_opt);
  step(ref, ref_opt);
  step(ref, ref_opt);

  Backbone first = make();
  torch::optim::Adam first_opt(first->parameters(), 1e-2);
  step(first, first_opt);
  step(first, first_opt);
  std::stringstream ss;
  write_checkpoint(ss, {"", module_state(*first), serialize_optimizer(first_opt)});
  const Checkpoint ck = read_checkpoint(ss);

  Backbone resumed(config(4, 99));
  load_module_state(*resumed, ck.tensors);
  torch::optim::Adam resumed_opt(resumed->parameters(), 1e-2);
  deserialize_optimizer(resumed_opt, ck.optimizer);
  step(resumed, resumed_opt);
  const auto pr = ref->parameters(), pq = resumed->parameters();
  for (std::size_t i = 0; i < pr.size(); ++i) EXPECT_TRUE(torch::equal(pr[i], pq[i])) << i;
}
