#pragma once

// Similarity-guided late fusion. A point's 2D feature is scaled by the product
// of its geometric and contextual similarities, both branches pass through
// per-channel sigmoid gates, and a four-layer head classifies the
// concatenation. Auxiliary heads supervise each branch on its own.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safnet/core.hpp"
#include "safnet/csm.hpp"
#include "safnet/gsm.hpp"
#include "safnet/nn.hpp"
#include "safnet/projection.hpp"
#include "safnet/spatial_index.hpp"

namespace safnet {

inline constexpr int kImageFeatureDim = 64;
inline constexpr int kPointFeatureDim = 128;
inline constexpr int kFusedDim = kImageFeatureDim + kPointFeatureDim;
inline constexpr int kHeadClasses = 20;
inline constexpr int kRawImageChannels = 6;  // r, g, b, depth, u/width, v/height
inline constexpr int kProvider3dInput = 3 + kContextDim;
inline constexpr int kImageNeighbors = 3;
inline constexpr double kDefaultUnprojectedRadius = 0.1;

using ImageVec = nn::VecN<kImageFeatureDim>;
using PointVec = nn::VecN<kPointFeatureDim>;
using FusedVec = nn::VecN<kFusedDim>;
using RawImageVec = nn::VecN<kRawImageChannels>;
using HeadLogits = nn::VecN<kHeadClasses>;

struct FusionParams {
  ImageVec gate2d = ImageVec::Zero();
  PointVec gate3d = PointVec::Zero();
  std::array<nn::Linear, 4> head;
  nn::Linear aux2d;
  nn::Linear aux3d;
  std::array<nn::Linear, 2> provider3d;
  nn::Matrix provider2d_weight;  // frozen
  ImageVec provider2d_bias = ImageVec::Zero();

  explicit FusionParams(int class_count = 1)
      : head{nn::Linear(kFusedDim, kFusedDim), nn::Linear(kFusedDim, kFusedDim), nn::Linear(kFusedDim, kFusedDim),
             nn::Linear(kHeadClasses, kFusedDim)},
        aux2d(class_count, kImageFeatureDim),
        aux3d(class_count, kPointFeatureDim),
        provider3d{nn::Linear(kPointFeatureDim, kProvider3dInput), nn::Linear(kPointFeatureDim, kPointFeatureDim)},
        provider2d_weight(nn::Matrix::Zero(kImageFeatureDim, kRawImageChannels)) {}

  // Fixed order: gate2d, gate3d, head0..3, aux2d, aux3d, provider3d0..1,
  // provider2d.weight (frozen), provider2d.bias.
  template <class F>
  void visit(F&& f) {
    f("fusion.gate2d", gate2d.data(), static_cast<std::size_t>(gate2d.size()), true);
    f("fusion.gate3d", gate3d.data(), static_cast<std::size_t>(gate3d.size()), true);
    for (int i = 0; i < 4; ++i) head[i].visit("fusion.head" + std::to_string(i), f);
    aux2d.visit("fusion.aux2d", f);
    aux3d.visit("fusion.aux3d", f);
    for (int i = 0; i < 2; ++i) provider3d[i].visit("fusion.provider3d" + std::to_string(i), f);
    f("fusion.provider2d.weight", provider2d_weight.data(), static_cast<std::size_t>(provider2d_weight.size()), false);
    f("fusion.provider2d.bias", provider2d_bias.data(), static_cast<std::size_t>(provider2d_bias.size()), true);
  }
};

// Every learnable quantity of the network plus its shape metadata.
struct Model {
  int class_count = 1;
  std::uint64_t seed = 0;
  GsmParams gsm;
  CsmParams csm;
  FusionParams fusion;

  Model() = default;
  explicit Model(int classes) : class_count(classes), fusion(classes) {
    if (classes < 1 || classes > kHeadClasses) throw ArgumentError("model: class_count must be in [1, 20]");
  }

  static Model initialized(int class_count, std::uint64_t seed) {
    Model m(class_count);
    m.seed = seed;
    m.csm = CsmParams::initialized(Rng::mix(seed, 1));
    Rng rng(Rng::mix(seed, 2));
    for (auto& l : m.fusion.head) l.init(rng);
    m.fusion.aux2d.init(rng);
    m.fusion.aux3d.init(rng);
    for (auto& l : m.fusion.provider3d) l.init(rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(kRawImageChannels));
    for (Eigen::Index i = 0; i < m.fusion.provider2d_weight.size(); ++i)
      m.fusion.provider2d_weight.data()[i] = rng.uniform(-bound, bound);
    return m;
  }

  // Same shapes, every value zero (gradient accumulator).
  static Model zeros_like(const Model& other) {
    Model m = other;
    m.visit([](const std::string&, double* d, std::size_t n, bool) { std::fill(d, d + n, 0.0); });
    return m;
  }

  template <class F>
  void visit(F&& f) {
    f("gsm.a1", &gsm.a1, 1, true);
    f("gsm.a2", &gsm.a2, 1, true);
    f("gsm.a3", &gsm.a3, 1, true);
    f("gsm.a4", &gsm.a4, 1, true);
    f("gsm.b1", &gsm.b1, 1, true);
    f("gsm.b2", &gsm.b2, 1, true);
    f("gsm.b3", &gsm.b3, 1, true);
    csm.visit(f);
    fusion.visit(f);
  }

  template <class F>
  void visit(F&& f) const {
    const_cast<Model*>(this)->visit([&](const std::string& name, double* d, std::size_t n, bool t) {
      f(name, static_cast<const double*>(d), n, t);
    });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const double*, std::size_t k, bool) { n += k; });
    return n;
  }
};

// ---------------------------------------------------------------------------
// Scalar building blocks

inline double combine_similarity(double s_geo, double s_con) { return s_geo * s_con; }

template <class V>
V apply_gamma(const V& f2d, double s) {
  return s * f2d;
}

inline nn::Vector channel_attention(const nn::Vector& f, const nn::Vector& gate_logits) {
  if (f.size() != gate_logits.size()) throw ArgumentError("channel_attention: dimension mismatch");
  nn::Vector out(f.size());
  for (Eigen::Index k = 0; k < f.size(); ++k) out[k] = f[k] * nn::sigmoid(gate_logits[k]);
  return out;
}

// Inverse-distance weighted mean (weights 1/(d + 1e-8), normalized) of the
// features of the nearest back-projected points; fewer than three when Q is
// smaller than that.
inline std::vector<double> aggregate_image_features(const Point3& point, const PointCloud& q_cloud,
                                                    const SpatialIndex& q_index,
                                                    std::size_t neighbors = kImageNeighbors) {
  if (q_index.empty() || q_cloud.empty()) throw ArgumentError("aggregate_image_features: empty Q");
  const auto hits = q_index.knn(point, neighbors);
  std::vector<double> out(q_cloud.feature_dim, 0.0);
  double total = 0.0;
  for (const auto& h : hits) total += 1.0 / (h.distance + 1e-8);
  for (const auto& h : hits) {
    const double w = (1.0 / (h.distance + 1e-8)) / total;
    const double* f = q_cloud.feature(h.index);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * f[c];
  }
  return out;
}

// Raw per-pixel channels consumed by the 2D feature provider.
inline std::vector<double> raw_image_channels(const RgbdFrame& frame) {
  const int w = frame.width(), h = frame.height();
  std::vector<double> out(static_cast<std::size_t>(w) * h * kRawImageChannels);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const std::size_t px = frame.pixel(u, v);
      double* o = out.data() + px * kRawImageChannels;
      o[0] = frame.color[3 * px];
      o[1] = frame.color[3 * px + 1];
      o[2] = frame.color[3 * px + 2];
      o[3] = frame.depth[px];
      o[4] = static_cast<double>(u) / w;
      o[5] = static_cast<double>(v) / h;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

enum class FusionMode { safnet, fixed };

inline const char* to_string(FusionMode m) { return m == FusionMode::safnet ? "safnet" : "fixed"; }
inline FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "safnet") return FusionMode::safnet;
  if (s == "fixed" || s == "fixed_fusion") return FusionMode::fixed;
  throw ArgumentError("unknown fusion mode '" + s + "' (expected safnet or fixed)");
}

struct ModelOptions {
  FusionMode mode = FusionMode::safnet;
  GsmTerms gsm_terms{};
  bool use_csm = true;
  bool channel_attention = true;
  bool clip_similarity = false;
  double dropout = 0.5;

  bool gsm_enabled() const { return mode == FusionMode::safnet && (gsm_terms.forward || gsm_terms.backward); }
  bool csm_similarity_enabled() const { return mode == FusionMode::safnet && use_csm; }
};

struct LossWeights {
  double l2d = 0.2;
  double l3d = 0.8;
  double l2d_unp = 0.8;
};

struct LossBreakdown {
  double l_fusion = 0.0;
  double l_2d = 0.0;
  double l_3d = 0.0;
  double l_2d_unp = 0.0;
  double total = 0.0;
  LossWeights lambdas{};
  std::size_t point_count = 0;
  std::size_t pixel_count = 0;
  std::size_t unprojected_count = 0;
};

inline LossBreakdown combine_losses(double l_fusion, double l_2d, double l_3d, double l_2d_unp, LossWeights lambdas = {}) {
  LossBreakdown b;
  b.l_fusion = l_fusion;
  b.l_2d = l_2d;
  b.l_3d = l_3d;
  b.l_2d_unp = l_2d_unp;
  b.lambdas = lambdas;
  b.total = l_fusion + lambdas.l2d * l_2d + lambdas.l3d * l_3d + lambdas.l2d_unp * l_2d_unp;
  return b;
}

// Mean cross-entropy of a logit table (row per sample) over the first
// `class_count` logits.
inline double mean_cross_entropy(const std::vector<std::vector<double>>& logits, const std::vector<int>& labels,
                                 int class_count) {
  if (logits.size() != labels.size()) throw ArgumentError("mean_cross_entropy: size mismatch");
  if (logits.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Eigen::Map<const Eigen::VectorXd> l(logits[i].data(), static_cast<Eigen::Index>(logits[i].size()));
    sum += nn::cross_entropy(l, class_count, labels[i], 1.0, static_cast<Eigen::VectorXd*>(nullptr));
  }
  return sum / static_cast<double>(logits.size());
}

// ---------------------------------------------------------------------------
// Per-point pass

// Geometry gathered for one point of P against the chunk's Q.
struct PointInputs {
  Point3 center;
  int label = -1;
  std::vector<Point3> p_neighbors;  // N_P, includes the center itself
  std::vector<Point3> q_context;    // N_Q, or the nearest Q point when N_Q is empty; empty without Q
  GsmNeighborhood gsm;
  RawImageVec image_raw = RawImageVec::Zero();  // aggregated raw channels of the nearest Q points
  bool has_unprojected = false;
  RawImageVec unprojected_raw = RawImageVec::Zero();
  int unprojected_label = -1;
};

struct PixelSample {
  RawImageVec raw = RawImageVec::Zero();
  int label = -1;
};

struct SimilarityValues {
  double s_geo = 1.0;
  double s_con = 1.0;
  double s_combined = 1.0;
};

struct PointForward {
  bool csm_on = false;
  bool csm_q_on = false;
  CsmCache csm_p;
  CsmCache csm_q;
  nn::VecN<kProvider3dInput> p3_in;
  PointVec p3_pre0, p3_act0, p3_pre1, f3d;
  GeoSimilarity geo;
  CosineResult cosine;
  SimilarityValues sim;
  double s_used = 1.0;  // after optional clipping
  bool s_clipped = false;
  ImageVec f2d;
  ImageVec gate2d_sig;
  PointVec gate3d_sig;
  FusedVec fused;
  std::array<FusedVec, 3> head_pre;
  std::array<FusedVec, 3> head_act;
  FusedVec dropout_scale;
  FusedVec head_in;
  HeadLogits logits;
  nn::SmallVec aux3d_logits;
  ImageVec f2d_unp;
  nn::SmallVec unp_logits;

  int predicted(int class_count) const {
    int best = 0;
    for (int c = 1; c < class_count; ++c)
      if (logits[c] > logits[best]) best = c;
    return best;
  }
};

inline void image_features(const FusionParams& f, const RawImageVec& raw, ImageVec& out) {
  out.noalias() = f.provider2d_weight * raw;
  out += f.provider2d_bias;
}

// 3D branch of the forward pass. It depends only on the point and its
// P-neighborhood, so evaluation may compute it once per scene point.
inline void forward_point_3d(const Model& model, const ModelOptions& opt, const PointInputs& in, PointForward& fw) {
  const auto& fp = model.fusion;
  fw.csm_on = opt.use_csm;

  // 3D branch
  fw.p3_in.setZero();
  fw.p3_in[0] = in.center.x;
  fw.p3_in[1] = in.center.y;
  fw.p3_in[2] = in.center.z;
  if (opt.use_csm) {
    csm_forward(in.center, in.p_neighbors, model.csm, fw.csm_p);
    fw.p3_in.tail<kContextDim>() = fw.csm_p.context();
  }
  fp.provider3d[0].forward(fw.p3_in, fw.p3_pre0);
  fw.p3_act0 = nn::relu(fw.p3_pre0);
  fp.provider3d[1].forward(fw.p3_act0, fw.p3_pre1);
  fw.f3d = nn::relu(fw.p3_pre1);
}

/**
 * Remainder of the forward pass given the 3D branch (fw.f3d and, with CSM,
 * fw.csm_p.embedding). `dropout_rng` is used only when `training`; pass
 * nullptr to run the head deterministically.
 */
inline void forward_point_fusion(const Model& model, const ModelOptions& opt, const PointInputs& in, bool training,
                                 Rng* dropout_rng, PointForward& fw) {
  const auto& fp = model.fusion;

  // similarity
  fw.sim = {};
  if (opt.gsm_enabled()) {
    fw.geo = geo_similarity(in.gsm, model.gsm, opt.gsm_terms);
    fw.sim.s_geo = fw.geo.geo;
  }
  fw.csm_q_on = opt.csm_similarity_enabled() && !in.q_context.empty();
  if (fw.csm_q_on) {
    csm_forward(in.center, in.q_context, model.csm, fw.csm_q);
    fw.cosine = cosine_similarity_with_grad(fw.csm_p.embedding, fw.csm_q.embedding);
    fw.sim.s_con = fw.cosine.value;
  } else if (opt.csm_similarity_enabled()) {
    fw.sim.s_con = 0.0;  // no image support at all
  }
  fw.sim.s_combined = combine_similarity(fw.sim.s_geo, fw.sim.s_con);
  fw.s_used = fw.sim.s_combined;
  fw.s_clipped = false;
  if (opt.mode == FusionMode::fixed) {
    fw.s_used = 1.0;
  } else if (opt.clip_similarity && (fw.s_used < 0.0 || fw.s_used > 1.0)) {
    fw.s_used = std::clamp(fw.s_used, 0.0, 1.0);
    fw.s_clipped = true;
  }

  // fusion
  image_features(fp, in.image_raw, fw.f2d);
  if (opt.channel_attention) {
    for (int k = 0; k < kImageFeatureDim; ++k) fw.gate2d_sig[k] = nn::sigmoid(fp.gate2d[k]);
    for (int k = 0; k < kPointFeatureDim; ++k) fw.gate3d_sig[k] = nn::sigmoid(fp.gate3d[k]);
  } else {
    fw.gate2d_sig.setOnes();
    fw.gate3d_sig.setOnes();
  }
  fw.fused.head<kImageFeatureDim>() = (fw.s_used * fw.f2d).cwiseProduct(fw.gate2d_sig);
  fw.fused.tail<kPointFeatureDim>() = fw.f3d.cwiseProduct(fw.gate3d_sig);

  const FusedVec* x = &fw.fused;
  for (int l = 0; l < 3; ++l) {
    fp.head[l].forward(*x, fw.head_pre[l]);
    fw.head_act[l] = nn::relu(fw.head_pre[l]);
    x = &fw.head_act[l];
  }
  if (training && dropout_rng && opt.dropout > 0.0) {
    const double keep = 1.0 - opt.dropout;
    for (int k = 0; k < kFusedDim; ++k) fw.dropout_scale[k] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
  } else {
    fw.dropout_scale.setOnes();
  }
  fw.head_in = fw.head_act[2].cwiseProduct(fw.dropout_scale);
  fp.head[3].forward(fw.head_in, fw.logits);

  fw.aux3d_logits.resize(model.class_count);
  fp.aux3d.forward(fw.f3d, fw.aux3d_logits);
  if (in.has_unprojected) {
    image_features(fp, in.unprojected_raw, fw.f2d_unp);
    fw.unp_logits.resize(model.class_count);
    fp.aux2d.forward(fw.f2d_unp, fw.unp_logits);
  }
}

inline void forward_point(const Model& model, const ModelOptions& opt, const PointInputs& in, bool training,
                          Rng* dropout_rng, PointForward& fw) {
  forward_point_3d(model, opt, in, fw);
  forward_point_fusion(model, opt, in, training, dropout_rng, fw);
}

// Upstream gradients on a point's three logit vectors.
struct PointLogitGrads {
  HeadLogits logits = HeadLogits::Zero();
  nn::SmallVec aux3d;
  nn::SmallVec unp;
};

inline void backward_point(const Model& model, const ModelOptions& opt, const PointInputs& in, const PointForward& fw,
                           const PointLogitGrads& g, Model& grad) {
  const auto& fp = model.fusion;
  auto& gf = grad.fusion;

  // head
  fp.head[3].accumulate(fw.head_in, g.logits, gf.head[3]);
  FusedVec gx;
  fp.head[3].input_grad(g.logits, gx);
  gx = gx.cwiseProduct(fw.dropout_scale);
  FusedVec gpre;
  for (int l = 2; l >= 0; --l) {
    gpre = nn::relu_grad(fw.head_pre[l], gx);
    fp.head[l].accumulate(l == 0 ? fw.fused : fw.head_act[l - 1], gpre, gf.head[l]);
    fp.head[l].input_grad(gpre, gx);
  }

  // channel gates
  const ImageVec g_a2 = gx.head<kImageFeatureDim>();
  const PointVec g_a3 = gx.tail<kPointFeatureDim>();
  const ImageVec weighted2d = fw.s_used * fw.f2d;
  if (opt.channel_attention) {
    for (int k = 0; k < kImageFeatureDim; ++k)
      gf.gate2d[k] += g_a2[k] * weighted2d[k] * fw.gate2d_sig[k] * (1.0 - fw.gate2d_sig[k]);
    for (int k = 0; k < kPointFeatureDim; ++k)
      gf.gate3d[k] += g_a3[k] * fw.f3d[k] * fw.gate3d_sig[k] * (1.0 - fw.gate3d_sig[k]);
  }
  const ImageVec g_weighted2d = g_a2.cwiseProduct(fw.gate2d_sig);
  PointVec g_f3d = g_a3.cwiseProduct(fw.gate3d_sig);

  // 2D branch: only the provider bias is trainable
  gf.provider2d_bias += fw.s_used * g_weighted2d;

  // similarity
  ContextVec g_emb_p = ContextVec::Zero();
  if (opt.mode == FusionMode::safnet && !fw.s_clipped) {
    const double g_s = g_weighted2d.dot(fw.f2d);
    if (opt.gsm_enabled()) {
      const auto gg = geo_similarity_grad(in.gsm, model.gsm, opt.gsm_terms);
      const double scale = g_s * fw.sim.s_con;
      grad.gsm.a1 += scale * gg[0];
      grad.gsm.a2 += scale * gg[1];
      grad.gsm.a3 += scale * gg[2];
      grad.gsm.a4 += scale * gg[3];
      grad.gsm.b1 += scale * gg[4];
      grad.gsm.b2 += scale * gg[5];
      grad.gsm.b3 += scale * gg[6];
    }
    if (fw.csm_q_on) {
      const double g_con = g_s * fw.sim.s_geo;
      g_emb_p = g_con * fw.cosine.grad_a;
      const ContextVec g_emb_q = g_con * fw.cosine.grad_b;
      csm_backward(fw.csm_q, model.csm, ContextVec::Zero(), g_emb_q, grad.csm);
    }
  }

  // auxiliary heads
  fp.aux3d.accumulate(fw.f3d, g.aux3d, gf.aux3d);
  {
    PointVec g_aux;
    fp.aux3d.input_grad(g.aux3d, g_aux);
    g_f3d += g_aux;
  }
  if (in.has_unprojected && g.unp.size() > 0) {
    fp.aux2d.accumulate(fw.f2d_unp, g.unp, gf.aux2d);
    ImageVec g_unp;
    fp.aux2d.input_grad(g.unp, g_unp);
    gf.provider2d_bias += g_unp;
  }

  // 3D branch
  PointVec g_pre1 = nn::relu_grad(fw.p3_pre1, g_f3d);
  fp.provider3d[1].accumulate(fw.p3_act0, g_pre1, gf.provider3d[1]);
  PointVec g_act0;
  fp.provider3d[1].input_grad(g_pre1, g_act0);
  PointVec g_pre0 = nn::relu_grad(fw.p3_pre0, g_act0);
  fp.provider3d[0].accumulate(fw.p3_in, g_pre0, gf.provider3d[0]);
  if (fw.csm_on) {
    nn::VecN<kProvider3dInput> g_in;
    fp.provider3d[0].input_grad(g_pre0, g_in);
    const ContextVec g_context = g_in.tail<kContextDim>();
    csm_backward(fw.csm_p, model.csm, g_context, g_emb_p, grad.csm);
  }
}

// 2D auxiliary term for one labeled back-projected pixel.
inline double pixel_loss(const Model& model, const PixelSample& px, double scale, Model* grad) {
  ImageVec f;
  image_features(model.fusion, px.raw, f);
  nn::SmallVec logits(model.class_count);
  model.fusion.aux2d.forward(f, logits);
  nn::SmallVec g;
  const double loss = nn::cross_entropy(logits, model.class_count, px.label, scale, grad ? &g : nullptr);
  if (grad) {
    model.fusion.aux2d.accumulate(f, g, grad->fusion.aux2d);
    ImageVec gf;
    model.fusion.aux2d.input_grad(g, gf);
    grad->fusion.provider2d_bias += gf;
  }
  return loss;
}

/**
 * Loss of a batch of points and labeled pixels. Each term is a mean over its
 * own contributors (points, labeled pixels, points with an unprojected match);
 * a term with no contributors is 0. When `grad` is given, the gradient of the
 * total is accumulated into it.
 */
inline LossBreakdown evaluate_batch(const Model& model, const ModelOptions& opt, const LossWeights& lambdas,
                                    std::span<const PointInputs> points, std::span<const PixelSample> pixels,
                                    bool training, std::uint64_t dropout_seed, Model* grad,
                                    std::vector<SimilarityValues>* similarities = nullptr) {
  LossBreakdown out;
  out.lambdas = lambdas;
  std::size_t labeled = 0, unp = 0;
  for (const auto& p : points) {
    if (p.label < 0) throw ArgumentError("evaluate_batch: unlabeled point");
    if (p.label >= model.class_count) throw ArgumentError("evaluate_batch: label out of range");
    ++labeled;
    if (p.has_unprojected) ++unp;
  }
  std::size_t pix = 0;
  for (const auto& p : pixels)
    if (p.label >= 0 && p.label < model.class_count) ++pix;
  out.point_count = labeled;
  out.unprojected_count = unp;
  out.pixel_count = pix;

  const double s_point = labeled ? 1.0 / labeled : 0.0;
  const double s_unp = unp ? 1.0 / unp : 0.0;
  const double s_pix = pix ? 1.0 / pix : 0.0;

  PointForward fw;
  PointLogitGrads g;
  double l_fusion = 0.0, l_3d = 0.0, l_unp = 0.0, l_2d = 0.0;
  if (similarities) similarities->clear();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    Rng drop(Rng::mix(dropout_seed, i));
    forward_point(model, opt, p, training, &drop, fw);
    if (similarities) similarities->push_back(fw.sim);
    HeadLogits* gl = grad ? &g.logits : nullptr;
    l_fusion += nn::cross_entropy(fw.logits, model.class_count, p.label, s_point, gl);
    l_3d += nn::cross_entropy(fw.aux3d_logits, model.class_count, p.label, lambdas.l3d * s_point,
                              grad ? &g.aux3d : nullptr);
    g.unp.resize(0);
    if (p.has_unprojected) {
      l_unp += nn::cross_entropy(fw.unp_logits, model.class_count, p.label, lambdas.l2d_unp * s_unp,
                                 grad ? &g.unp : nullptr);
    }
    if (grad) backward_point(model, opt, p, fw, g, *grad);
  }
  for (const auto& px : pixels) {
    if (px.label < 0 || px.label >= model.class_count) continue;
    l_2d += pixel_loss(model, px, lambdas.l2d * s_pix, grad);
  }
  auto total = combine_losses(l_fusion * s_point, l_2d * s_pix, l_3d * s_point, l_unp * s_unp, lambdas);
  total.point_count = out.point_count;
  total.pixel_count = out.pixel_count;
  total.unprojected_count = out.unprojected_count;
  return total;
}

}  // namespace safnet
