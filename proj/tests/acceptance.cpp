// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "safnet/safnet.hpp"
#include "support/oracles.hpp"

using namespace safnet;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kIndexDistanceTol = 1e-12;
constexpr double kIndexRuntimeLimit = 60.0;
constexpr double kProjectionPixelTol = 1e-9;  // times image width
constexpr double kProjectionDepthTol = 1e-9;  // relative
constexpr double kProjectionRuntimeLimit = 10.0;
constexpr double kGsmIdentityTol = 1e-12;
constexpr double kGsmSearchTol = 1e-12;
constexpr double kGsmGradRelTol = 1e-6;
constexpr double kGsmGradAbsFloor = 1e-10;
constexpr double kFdStep = 1e-5;
constexpr double kFdNarrowStep = 1e-7;
constexpr double kCosineTol = 1e-12;
constexpr double kCsmGradRelTol = 1e-3;
constexpr double kCsmGradAbsFloor = 1e-7;
constexpr double kUniformCeTol = 1e-9;
constexpr double kEndToEndMiou = 0.90;
constexpr double kEndToEndSeconds = 600.0;
constexpr double kAblationDropTol = 0.02;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double u01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<Point3> uniform_cloud(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng), u(rng)});
  return pts;
}

RigidPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  double q[4] = {g(rng), g(rng), g(rng), g(rng)};
  const double len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  const double w = q[0] / len, x = q[1] / len, y = q[2] / len, z = q[3] / len;
  RigidPose p;
  p.rotation = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
                2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
                2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
  p.translation = {3 * g(rng), 3 * g(rng), 3 * g(rng)};
  return p;
}

ExperimentConfig acceptance_config(const char* name) {
  return read_experiment_config(std::filesystem::path(SAFNET_CONFIG_DIR) / name);
}

// ---------------------------------------------------------------------------

Outcome spatial_index_exactness() {
  const auto start = Clock::now();
  std::size_t mismatches = 0, comparisons = 0;
  for (std::uint64_t inst = 0; inst < 100; ++inst) {
    std::mt19937_64 rng(inst);
    auto pts = uniform_cloud(rng, 10000, 0.0, 5.0);
    // Every fourth instance is grid-snapped to force exact distance ties.
    if (inst % 4 == 0)
      for (auto& p : pts) p = {std::round(p.x * 5) / 5, std::round(p.y * 5) / 5, std::round(p.z * 5) / 5};
    const SpatialIndex idx(pts);
    const auto queries = uniform_cloud(rng, 5, -0.5, 5.5);
    for (const auto& q : queries)
      for (std::size_t k : {1, 8, 64})
        for (double radius : {std::numeric_limits<double>::infinity(), 0.4}) {
          const auto got = std::isinf(radius) ? idx.knn(q, k) : idx.radius_knn(q, k, radius);
          const auto want = oracle::brute_knn(pts, q, k, radius);
          ++comparisons;
          bool same = got.size() == want.size();
          for (std::size_t i = 0; same && i < got.size(); ++i)
            same = got[i].index == want[i].index && std::abs(got[i].distance - want[i].distance) <= kIndexDistanceTol;
          mismatches += !same;
        }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < kIndexRuntimeLimit,
          std::to_string(comparisons) + " queries, " + std::to_string(mismatches) + " mismatches, " +
              fmt("%.1f s", secs)};
}

Outcome backprojection_round_trip() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_px = 0.0, worst_depth = 0.0;
  bool ok = true;
  for (int cam = 0; cam < 20; ++cam) {
    const int w = 64 + static_cast<int>(rng() % 1200), h = 48 + static_cast<int>(rng() % 900);
    const CameraIntrinsics k{40 + 800 * u(rng), 40 + 800 * u(rng), u(rng) * (w - 1), u(rng) * (h - 1), w, h};
    const auto pose = random_pose(rng);
    for (int i = 0; i < 5000; ++i) {
      const int pu = static_cast<int>(rng() % w), pv = static_cast<int>(rng() % h);
      const double z = 0.05 + 20 * u(rng);
      const auto proj = project_point(pose.apply(pixel_to_camera(k, pu, pv, z)), k, pose);
      if (!proj) {
        ok = false;
        continue;
      }
      const double px = std::max(std::abs(proj->u - pu), std::abs(proj->v - pv)) / w;
      worst_px = std::max(worst_px, px);
      worst_depth = std::max(worst_depth, std::abs(proj->z - z) / z);
    }
  }
  const double secs = seconds_since(start);
  ok = ok && worst_px < kProjectionPixelTol && worst_depth < kProjectionDepthTol && secs < kProjectionRuntimeLimit;
  return {ok, "1e5 pixels, max pixel error/width " + fmt("%.2e", worst_px) + ", max relative depth error " +
                  fmt("%.2e", worst_depth) + ", " + fmt("%.2f s", secs)};
}

Outcome gsm_correctness() {
  Outcome out;
  // (a) identical neighborhoods
  double worst_identity = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(s);
    const auto nb = uniform_cloud(rng, 1 + rng() % 64, 0.0, 0.3);
    const SpatialIndex qi(nb);
    GsmParams p;
    p.a1 = 0.01 + u01(rng);
    p.a2 = 0.01 + u01(rng);
    p.b1 = u01(rng) - 0.5;
    p.b2 = u01(rng) - 0.5;
    const auto back = backward_search(nb, nb, qi, nb[0]);
    const auto sim = geo_similarity({0, forward_search(nb, qi), back.mean_dB, static_cast<int>(nb.size()), back.mq}, p);
    worst_identity = std::max({worst_identity, std::abs(sim.p2q - (1 + p.b1)), std::abs(sim.q2p - (1 + p.b2))});
  }
  // (b) searches against the O(n m) oracle
  double worst_search = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    std::mt19937_64 rng(1000 + s);
    const auto np = uniform_cloud(rng, 1 + rng() % 200, -0.3, 0.3);
    const auto q = uniform_cloud(rng, 1 + rng() % 200, -0.5, 0.5);
    const SpatialIndex qi(q);
    worst_search = std::max(worst_search, std::abs(forward_search(np, qi) - oracle::brute_forward(np, q)));
    const std::size_t mq = rng() % (q.size() + 1);
    const std::vector<Point3> nq(q.begin(), q.begin() + static_cast<long>(mq));
    const auto b = backward_search(nq, np, qi, np[0]);
    const std::vector<Point3> start =
        nq.empty() ? std::vector<Point3>{q[oracle::brute_knn(q, np[0], 1)[0].index]} : nq;
    worst_search = std::max(worst_search, std::abs(b.mean_dB - oracle::brute_backward(start, np)));
  }
  // (c) Q offset along the surface normal
  std::size_t monotone_violations = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(2000 + s);
    std::normal_distribution<double> g;
    Point3 n{g(rng), g(rng), g(rng)};
    n = (1.0 / norm(n)) * n;
    const Point3 h = std::abs(n.x) < 0.9 ? Point3{1, 0, 0} : Point3{0, 1, 0};
    Point3 e1{n.y * h.z - n.z * h.y, n.z * h.x - n.x * h.z, n.x * h.y - n.y * h.x};
    e1 = (1.0 / norm(e1)) * e1;
    const Point3 e2{n.y * e1.z - n.z * e1.y, n.z * e1.x - n.x * e1.z, n.x * e1.y - n.y * e1.x};
    std::vector<Point3> patch;
    for (int i = 0; i < 500; ++i) patch.push_back((u01(rng) - 0.5) * e1 + (u01(rng) - 0.5) * e2);
    const std::vector<Point3> np(patch.begin(), patch.begin() + 64);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 10; ++k) {
      std::vector<Point3> q;
      for (const auto& x : patch) q.push_back(x + (0.05 * k) * n);
      const double sp = geo_similarity({0, forward_search(np, SpatialIndex(q)), 0, 64, 0}, GsmParams{}).p2q;
      monotone_violations += sp > prev;
      prev = sp;
    }
  }
  // (d) analytic parameter gradients
  std::size_t grad_failures = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(3000 + s);
    GsmNeighborhood n{0, 0.5 * u01(rng), 0.5 * u01(rng), 8, 8};
    std::array<double, GsmParams::kCount> v{0.05 + u01(rng), 0.05 + u01(rng), u01(rng) * 2 - 1, u01(rng) * 2 - 1,
                                            u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5};
    const auto g = geo_similarity_grad(n, GsmParams::from_array(v));
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double fd =
          oracle::central_difference([&] { return geo_similarity(n, GsmParams::from_array(v)).geo; }, v[k], kFdStep);
      grad_failures += !oracle::close_relative(g[k], fd, kGsmGradRelTol, kGsmGradAbsFloor);
    }
  }
  out.pass = worst_identity <= kGsmIdentityTol && worst_search <= kGsmSearchTol && monotone_violations == 0 &&
             grad_failures == 0;
  out.detail = "identity err " + fmt("%.1e", worst_identity) + ", search err " + fmt("%.1e", worst_search) +
               ", monotone violations " + std::to_string(monotone_violations) + ", gradient failures " +
               std::to_string(grad_failures) + "/700";
  return out;
}

Outcome csm_correctness() {
  std::size_t cosine_failures = 0;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  for (int t = 0; t < 1000; ++t) {
    ContextVec a, b;
    for (int k = 0; k < kContextDim; ++k) {
      a[k] = g(rng);
      b[k] = g(rng);
    }
    const double s = cosine_similarity(a, b);
    const double scale = std::exp(6 * u01(rng) - 3);
    cosine_failures += !(s >= -1.0 && s <= 1.0);
    cosine_failures += std::abs(s - cosine_similarity(b, a)) > kCosineTol;
    cosine_failures += std::abs(s - cosine_similarity(ContextVec(scale * a), b)) > kCosineTol;
  }

  std::size_t grad_failures = 0, checked = 0, kink_retries = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 r(seed);
    const Point3 cp{u01(r), u01(r), u01(r)}, cq = cp + Point3{0.02, -0.03, 0.01};
    std::vector<Point3> np, nq;
    for (int i = 0; i < 5; ++i) {
      np.push_back(cp + Point3{0.4 * u01(r) - 0.2, 0.4 * u01(r) - 0.2, 0.4 * u01(r) - 0.2});
      nq.push_back(cq + Point3{0.4 * u01(r) - 0.2, 0.4 * u01(r) - 0.2, 0.4 * u01(r) - 0.2});
    }
    ContextVec wp, wq;
    for (int k = 0; k < kContextDim; ++k) {
      wp[k] = 0.1 * g(r);
      wq[k] = 0.1 * g(r);
    }
    auto params = CsmParams::initialized(500 + seed);
    auto loss = [&] {
      CsmCache a, b;
      csm_forward(cp, np, params, a);
      csm_forward(cq, nq, params, b);
      return cosine_similarity(a.embedding, b.embedding) + wp.dot(a.context()) + wq.dot(b.context());
    };
    CsmCache a, b;
    csm_forward(cp, np, params, a);
    csm_forward(cq, nq, params, b);
    const auto cs = cosine_similarity_with_grad(a.embedding, b.embedding);
    CsmParams grad;
    grad.set_zero();
    csm_backward(a, params, wp, cs.grad_a, grad);
    csm_backward(b, params, wq, cs.grad_b, grad);
    std::vector<double> analytic;
    grad.visit([&](const std::string&, double* d, std::size_t n, bool) { analytic.insert(analytic.end(), d, d + n); });
    std::size_t k = 0;
    params.visit([&](const std::string&, double* d, std::size_t n, bool) {
      for (std::size_t i = 0; i < n; ++i, ++k) {
        const double fd = oracle::central_difference(loss, d[i], kFdStep);
        ++checked;
        if (oracle::close_relative(analytic[k], fd, kCsmGradRelTol, kCsmGradAbsFloor)) continue;
        // A relu kink inside the step spoils the wide difference; retry narrower.
        ++kink_retries;
        const double narrow = oracle::central_difference(loss, d[i], kFdNarrowStep);
        grad_failures += !oracle::close_relative(analytic[k], narrow, kCsmGradRelTol, kCsmGradAbsFloor);
      }
    });
  }
  return {cosine_failures == 0 && grad_failures == 0,
          "cosine failures " + std::to_string(cosine_failures) + "/3000, gradient failures " +
              std::to_string(grad_failures) + "/" + std::to_string(checked) + " (" + std::to_string(kink_retries) +
              " retried at the narrow step)"};
}

Outcome greedy_view_selection() {
  const double bound = 1.0 - std::exp(-1.0);
  std::size_t instances = 0, bound_failures = 0, modular_failures = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const int frames = 1 + static_cast<int>(seed % 10);
    const std::size_t points = 10 + rng() % 50;
    const bool modular = seed % 2 == 1;
    std::vector<CoverageMask> masks(frames);
    std::vector<std::vector<std::uint8_t>> sets(frames);
    for (int f = 0; f < frames; ++f) {
      masks[f].frame_id = f;
      masks[f].covered.assign(points, 0);
    }
    const double density = 0.05 + 0.6 * u01(rng);
    for (std::size_t i = 0; i < points; ++i) {
      if (modular) {
        const auto owner = rng() % (frames + 1);
        if (owner < static_cast<std::uint64_t>(frames)) masks[owner].covered[i] = 1;
      } else {
        for (int f = 0; f < frames; ++f) masks[f].covered[i] = u01(rng) < density;
      }
    }
    for (int f = 0; f < frames; ++f) sets[f] = masks[f].covered;
    for (int budget = 1; budget <= 4; ++budget) {
      ++instances;
      const auto picked = greedy_max_coverage(masks, budget);
      std::vector<std::uint8_t> cov(points, 0);
      for (int id : picked)
        for (std::size_t i = 0; i < points; ++i) cov[i] |= masks[id].covered[i];
      const auto got = static_cast<double>(std::count(cov.begin(), cov.end(), 1));
      const auto best = static_cast<double>(oracle::optimal_coverage(sets, budget));
      bound_failures += got < bound * best;
      if (modular) modular_failures += got != best;
    }
  }
  return {bound_failures == 0 && modular_failures == 0,
          std::to_string(instances) + " instances, bound failures " + std::to_string(bound_failures) +
              ", modular non-optimal " + std::to_string(modular_failures)};
}

Outcome chunk_pipeline() {
  SceneSpec spec;
  spec.points_per_scene = 8000;
  spec.degradation.mismatch_offset = 0.1;
  const auto scene = generate_scene(spec);
  PipelineConfig cfg;
  const auto chunks = make_chunks(scene.cloud, cfg.chunk_size, cfg.stride);
  std::vector<int> membership(scene.cloud.size(), 0);
  std::uint64_t memberships = 0;
  for (const auto& c : chunks)
    for (auto i : c.point_indices) ++membership[i], ++memberships;
  const auto uncovered = std::count(membership.begin(), membership.end(), 0);

  std::size_t tally_failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<int>> table(5, std::vector<int>(100, -1));
    VoteAccumulator acc(100, 20);
    for (auto& row : table) {
      VoteAccumulator part(100, 20);
      for (std::size_t i = 0; i < 100; ++i)
        if (&row == &table[0] || rng() % 2) {
          row[i] = static_cast<int>(rng() % 6);
          part.add(i, row[i]);
        }
      acc.merge(part);
    }
    const auto got = vote(acc);
    for (std::size_t i = 0; i < 100; ++i) {
      std::vector<int> count(20, 0);
      for (const auto& row : table)
        if (row[i] >= 0) ++count[row[i]];
      tally_failures += got[i] != static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
    }
  }

  const auto model = Model::initialized(scene.class_count, 0);
  cfg.threads = 2;
  const auto two = segment_scene(model, {}, scene, cfg);
  cfg.threads = 8;
  const auto eight = segment_scene(model, {}, scene, cfg);
  const bool identical = two.labels == eight.labels && two.mean_similarity == eight.mean_similarity;
  const bool ok = uncovered == 0 && tally_failures == 0 && identical && two.evaluations == memberships;
  return {ok, std::to_string(chunks.size()) + " chunks, uncovered points " + std::to_string(uncovered) +
                  ", tally failures " + std::to_string(tally_failures) + ", 2 vs 8 threads " +
                  (identical ? "bit-identical" : "DIFFERENT")};
}

Outcome loss_arithmetic() {
  double worst_ce = 0.0;
  for (int classes = 1; classes <= kHeadClasses; ++classes) {
    std::vector<std::vector<double>> logits(classes, std::vector<double>(kHeadClasses, 0.7));
    std::vector<int> labels(classes);
    for (int c = 0; c < classes; ++c) labels[c] = c;
    worst_ce = std::max(worst_ce, std::abs(mean_cross_entropy(logits, labels, classes) - std::log(double(classes))));
  }
  const LossWeights lw;
  bool identity = lw.l2d == 0.2 && lw.l3d == 0.8 && lw.l2d_unp == 0.8;
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = Model::initialized(4, seed);
    std::vector<PointInputs> pts(4);
    for (auto& p : pts) {
      p.center = {u01(rng), u01(rng), u01(rng)};
      p.p_neighbors = {p.center, p.center + Point3{0.05, 0.01, 0}};
      p.q_context = {p.center + Point3{0.02, 0, 0}};
      p.gsm = {0, 0.1 * u01(rng), 0.1 * u01(rng), 2, 1};
      p.label = static_cast<int>(rng() % 4);
      p.has_unprojected = true;
      p.unprojected_raw.setConstant(u01(rng));
      p.image_raw.setConstant(u01(rng));
    }
    std::vector<PixelSample> px(3);
    for (auto& p : px) {
      p.raw.setConstant(u01(rng));
      p.label = static_cast<int>(rng() % 4);
    }
    const auto b = evaluate_batch(m, {}, lw, pts, px, false, 0, nullptr);
    identity = identity && b.total == b.l_fusion + 0.2 * b.l_2d + 0.8 * b.l_3d + 0.8 * b.l_2d_unp;
  }
  const auto unit = combine_losses(1, 1, 1, 1);
  identity = identity && unit.total == 2.8;
  return {worst_ce <= kUniformCeTol && identity,
          "uniform CE err " + fmt("%.1e", worst_ce) + ", total identity " + (identity ? "exact" : "BROKEN")};
}

Outcome end_to_end() {
  const auto cfg = acceptance_config("acceptance_e2e.json");
  const auto start = Clock::now();
  const auto train_scenes = load_scenes(cfg, false);
  const auto val_scenes = load_scenes(cfg, true);
  const auto trained = train(train_scenes, cfg.train);
  const auto eval = evaluate_scenes(trained.model, cfg.train.model, val_scenes, cfg.train.pipeline);
  const double secs = seconds_since(start);
  std::size_t points = 0;
  for (const auto& s : val_scenes) points += s.cloud.size();
  const bool ok = eval.iou.miou >= kEndToEndMiou && secs <= kEndToEndSeconds && cfg.train.pipeline.view_budget == 5 &&
                  train_scenes.size() == 8 && val_scenes.size() == 2;
  return {ok, "val mIoU " + fmt("%.4f", eval.iou.miou) + " over " + std::to_string(points) + " points, " +
                  fmt("%.0f s", secs) + " total"};
}

Outcome robustness_trend() {
  const auto cfg = acceptance_config("acceptance_robustness.json");
  const auto train_scenes = load_scenes(cfg, false);
  const auto points = run_robustness(cfg, train_scenes, [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); });
  const auto& views = cfg.robustness.view_counts;
  auto mean = [&](int v, FusionMode m) {
    double sum = 0;
    int n = 0;
    for (const auto& p : points)
      if (p.views == v && p.mode == m) sum += p.miou, ++n;
    return sum / n;
  };
  const int few = *std::min_element(views.begin(), views.end());
  const int many = *std::max_element(views.begin(), views.end());
  const double s1 = mean(few, FusionMode::safnet), f1 = mean(few, FusionMode::fixed);
  const double s5 = mean(many, FusionMode::safnet), f5 = mean(many, FusionMode::fixed);
  const bool ok = few == 1 && many == cfg.robustness.base_views && cfg.robustness.seeds.size() == 5 &&
                  cfg.robustness.mismatch_offset == 0.1 && s1 >= f1 && (s1 - f1) >= (s5 - f5);
  return {ok, "1 view: safnet " + fmt("%.4f", s1) + " fixed " + fmt("%.4f", f1) + " gap " + fmt("%+.4f", s1 - f1) +
                  "; 5 views: safnet " + fmt("%.4f", s5) + " fixed " + fmt("%.4f", f5) + " gap " +
                  fmt("%+.4f", s5 - f5)};
}

Outcome ablation_plumbing() {
  const auto cfg = acceptance_config("acceptance_ablation.json");
  const auto train_scenes = load_scenes(cfg, false);
  const auto val_scenes = load_scenes(cfg, true);
  const auto rows = run_ablation(cfg, train_scenes, val_scenes, [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); });
  std::string detail;
  double worst = -1.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += (i ? ", " : "") + rows[i].name + " " + fmt("%.4f", rows[i].mean_miou);
    if (i > 0) worst = std::max(worst, rows[i - 1].mean_miou - rows[i].mean_miou);
  }
  const bool ok = rows.size() == 4 && rows[1].options.gsm_terms.forward && !rows[1].options.gsm_terms.backward &&
                  rows[2].options.gsm_terms.backward && !rows[2].options.use_csm && rows[3].options.use_csm &&
                  worst <= kAblationDropTol;
  return {ok, detail + "; largest drop " + fmt("%+.4f", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"spatial index exactness", spatial_index_exactness},
      {"back-projection round trip", backprojection_round_trip},
      {"GSM correctness", gsm_correctness},
      {"CSM correctness", csm_correctness},
      {"greedy view selection", greedy_view_selection},
      {"chunk pipeline", chunk_pipeline},
      {"loss arithmetic", loss_arithmetic},
      {"end-to-end synthetic segmentation", end_to_end},
      {"directional robustness trend", robustness_trend},
      {"ablation plumbing", ablation_plumbing},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = Clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    failures += !r.pass;
    std::printf("[%s] criterion %d %s: %s (%.1f s)\n", r.pass ? "PASS" : "FAIL", id, criteria[i].first,
                r.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
