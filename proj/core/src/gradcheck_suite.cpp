#include "ptmf/gradcheck_suite.hpp"

#include <algorithm>
#include <random>

#include "ptmf/encoders.hpp"
#include "ptmf/fusion.hpp"
#include "ptmf/model.hpp"
#include "ptmf/ptmfim.hpp"

namespace ptmf {

namespace {

constexpr double kSpread = 1.0;
// Through the whole stack many encoder gradients are ~1e-8, the same size as
// finite-difference rounding noise (~1e-11 at eps 1e-4) divided by the 1e-4
// tolerance. The end-to-end check therefore uses a larger denominator floor;
// each module is also checked alone with the caller's floor.
constexpr double kModelFloor = 1e-6;

// Losses below are random linear read-outs, so a sign error in one output
// element cannot cancel against another.
Tensor input(Shape shape, Rng& rng) { return Tensor::normal(std::move(shape), 0.0, 1.0, rng); }

// Default initialisations are deliberately small, which leaves attention
// nearly uniform and many gradients close to zero. Checking at a generic
// point with O(1) parameters keeps every derivative well above the
// finite-difference noise floor.
void spread(ParamStore& store, Rng& rng, double width) {
  for (auto& p : store.params()) {
    Tensor t = p.tensor;
    for (auto& v : t.mutable_data()) v = std::uniform_real_distribution<double>(-width, width)(rng);
  }
}

ModuleGradCheck check(std::string name, ParamStore& store, Rng& rng, const std::function<Tensor()>& loss,
                      const GradCheckOptions& options, double width = kSpread) {
  spread(store, rng, width);
  return {std::move(name), grad_check(loss, store.params(), options)};
}

}  // namespace

std::vector<ModuleGradCheck> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& options) {
  std::vector<ModuleGradCheck> out;
  Rng rng(seed);
  constexpr double kDropout = 0.1;
  const std::uint64_t mask_seed = seed ^ 0x9e3779b97f4a7c15ULL;

  {
    ParamStore store;
    nn::Lstm lstm(store, "lstm", 3, 4, rng);
    const Tensor x = input({5, 3}, rng);
    Rng w_rng(seed + 1);
    const Tensor w = Tensor::normal({5, 4}, 0.0, 1.0, w_rng);
    out.push_back(check("lstm", store, rng, [&] { return sum(mul(lstm.encode(x), w)); }, options));
  }
  {
    ParamStore store;
    nn::Asp asp(store, "asp", 4, 3, 1e-5, rng);
    const Tensor h = input({6, 4}, rng);
    const Tensor w = Tensor::normal({1, 8}, 0.0, 1.0, rng);
    out.push_back(check("asp", store, rng, [&] { return sum(mul(asp.pool(h), w)); }, options));
  }
  {
    ParamStore store;
    nn::CoAttention co(store, "coatt", 2, 3, 4, 3, 3, 4, kDropout, false, rng);
    const Tensor l = input({5, 2}, rng), m = input({5, 3}, rng), v = input({5, 4}, rng);
    const Tensor w = Tensor::normal({5, co.output_dim()}, 0.0, 1.0, rng);
    out.push_back(check("coattention", store, rng, [&] {
      Rng masks(mask_seed);
      return sum(mul(co.fuse(l, m, v, true, masks), w));
    }, options));
  }
  {
    ParamStore store;
    nn::TransformerFusion tf(store, "transformer", 6, 5, 8, 2, 2, 16, kDropout, rng);
    const Tensor ua = input({1, 6}, rng), uv = input({1, 5}, rng);
    const Tensor w = Tensor::normal({1, 16}, 0.0, 1.0, rng);
    out.push_back(check("transformer", store, rng, [&] {
      Rng masks(mask_seed);
      return sum(mul(tf.fuse(ua, uv, true, masks).f_star, w));
    }, options));
  }
  {
    ParamStore store;
    nn::Ptmfim pt(store, "ptmfim", 6, 5, 4, 3, 2, true, rng);
    const Tensor p = input({1, 6}, rng);
    nn::FusedRepresentation fused;
    fused.audio_token = input({1, 5}, rng);
    fused.visual_token = input({1, 5}, rng);
    const Tensor w = Tensor::normal({1, 4}, 0.0, 1.0, rng);
    out.push_back(check("ptmfim", store, rng, [&] { return sum(mul(pt.forward(p, fused).out, w)); }, options));
  }
  {
    ParamStore store;
    nn::ClassifierHead head(store, "head", 5, 4, 3, kDropout, rng);
    const Tensor x = input({1, 5}, rng);
    const int label[] = {1};
    out.push_back(check("classifier", store, rng, [&] {
      Rng masks(mask_seed);
      return cross_entropy(head.logits(x, true, masks), label);
    }, options));
  }
  {
    ModelConfig cfg;
    cfg.dims = {2, 3, 4, 3, 2, 2};
    cfg.personality_dim = 6;
    cfg.audio_hidden = 3;
    cfg.visual_hidden = 3;
    cfg.lld_proj = 2;
    cfg.mfcc_proj = 2;
    cfg.wav2vec_proj = 3;
    cfg.asp_dim = 3;
    cfg.d_model = 4;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.ffn_dim = 6;
    cfg.d_h = 4;
    cfg.n_p = 2;
    cfg.task = io::Task::kTernary;
    cfg.seed = seed;
    DepressionNet net(cfg);
    GradCheckOptions model_options = options;
    model_options.floor = std::max(options.floor, kModelFloor);
    SampleTensors s;
    s.lld = input({4, 2}, rng);
    s.mfcc = input({4, 3}, rng);
    s.wav2vec = input({4, 4}, rng);
    s.openface = input({3, 3}, rng);
    s.resnet = input({3, 2}, rng);
    s.densenet = input({3, 2}, rng);
    s.personality = input({1, 6}, rng);
    const int label[] = {2};
    out.push_back(check("model", net.params(), rng, [&] {
      Rng masks(mask_seed);
      return cross_entropy(net.logits(s, true, masks), label);
    }, model_options));
  }
  return out;
}

}  // namespace ptmf
