#include "radkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "radkit/error.hpp"
#include "radkit/geometry.hpp"

namespace radkit {

std::string to_string(EvalMode m) { return m == EvalMode::d3 ? "3d" : "2d"; }

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "3d") return EvalMode::d3;
  if (s == "2d") return EvalMode::d2;
  throw Error(ErrorCode::invariant_violation, "eval mode must be 3d or 2d, got '" + s + "'");
}

double score_of(const Box3D& b) { return b.score.value_or(1.0); }
double score_of(const Box2D& b) { return b.score.value_or(1.0); }

namespace {

template <typename Box>
std::vector<std::size_t> score_order(std::span<const Box> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score_of(dets[a]) > score_of(dets[b]); });
  return order;
}

}  // namespace

template <typename Box>
MatchResult match(std::span<const Box> dets, std::span<const Box> gts,
                  const std::function<double(const Box&, const Box&)>& iou, double threshold) {
  MatchResult r;
  r.order = score_order(dets);
  r.tp.assign(dets.size(), 0);
  std::vector<std::uint8_t> taken(gts.size(), 0);
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    const Box& d = dets[r.order[k]];
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != d.class_id) continue;
      const double v = iou(d, gts[g]);
      if (v >= threshold && v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < gts.size()) {
      taken[best_g] = 1;
      r.tp[k] = 1;
      ++r.n_tp;
    } else {
      ++r.n_fp;
    }
  }
  r.n_fn = gts.size() - r.n_tp;
  return r;
}

template MatchResult match<Box3D>(std::span<const Box3D>, std::span<const Box3D>,
                                  const std::function<double(const Box3D&, const Box3D&)>&, double);
template MatchResult match<Box2D>(std::span<const Box2D>, std::span<const Box2D>,
                                  const std::function<double(const Box2D&, const Box2D&)>&, double);

std::optional<double> average_precision(std::span<const std::uint8_t> tp_sorted, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  const std::size_t n = tp_sorted.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += tp_sorted[i] ? 1 : 0;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // precision envelope, right to left
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

namespace {

struct Scored {
  double score;
  std::size_t frame;
  std::size_t index;
  std::uint8_t tp;
};

void sort_scored(std::vector<Scored>& v) {
  std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs)
    if (x) {
      s += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace

template <typename Box>
EvalReport evaluate_boxes(const std::vector<std::vector<Box>>& dets, const std::vector<std::vector<Box>>& gts,
                          const std::vector<std::string>& class_names, EvalMode mode,
                          std::span<const double> thresholds, double doppler_period) {
  if (dets.size() != gts.size()) throw Error(ErrorCode::shape_mismatch, "dets and gts cover different frame counts");
  const std::size_t n_classes = class_names.size();
  for (const auto& frame : dets)
    for (const auto& b : frame)
      if (b.class_id < -1 || b.class_id >= static_cast<int>(n_classes))
        throw Error(ErrorCode::invariant_violation, "detection class outside the class list");

  std::function<double(const Box&, const Box&)> iou;
  if constexpr (std::is_same_v<Box, Box3D>)
    iou = [doppler_period](const Box3D& a, const Box3D& b) { return iou3d(a, b, doppler_period); };
  else
    iou = [](const Box2D& a, const Box2D& b) { return iou2d(a, b); };

  EvalReport rep;
  rep.mode = mode;
  rep.class_names = class_names;
  rep.thresholds.assign(thresholds.begin(), thresholds.end());

  for (double thr : thresholds) {
    std::vector<std::vector<Scored>> per_class(n_classes);
    std::vector<MatchCounts> counts(n_classes);
    std::vector<Scored> pooled;
    std::size_t pooled_gt = 0;
    for (std::size_t f = 0; f < dets.size(); ++f) {
      for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<Box> d, g;
        std::vector<std::size_t> d_index;
        for (std::size_t i = 0; i < dets[f].size(); ++i)
          if (dets[f][i].class_id == static_cast<int>(c)) {
            d.push_back(dets[f][i]);
            d_index.push_back(i);
          }
        for (const auto& b : gts[f])
          if (b.class_id == static_cast<int>(c)) g.push_back(b);
        const auto m = match<Box>(d, g, iou, thr);
        counts[c].tp += m.n_tp;
        counts[c].fp += m.n_fp;
        counts[c].fn += m.n_fn;
        counts[c].n_gt += g.size();
        pooled_gt += g.size();
        for (std::size_t k = 0; k < m.order.size(); ++k) {
          const Scored s{score_of(d[m.order[k]]), f, d_index[m.order[k]], m.tp[k]};
          per_class[c].push_back(s);
          pooled.push_back(s);
        }
      }
    }
    std::vector<std::optional<double>> ap(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
      sort_scored(per_class[c]);
      std::vector<std::uint8_t> flags;
      flags.reserve(per_class[c].size());
      for (const auto& s : per_class[c]) flags.push_back(s.tp);
      ap[c] = average_precision(flags, counts[c].n_gt);
    }
    sort_scored(pooled);
    std::vector<std::uint8_t> flags;
    flags.reserve(pooled.size());
    for (const auto& s : pooled) flags.push_back(s.tp);
    rep.pooled_ap.push_back(average_precision(flags, pooled_gt));
    rep.map.push_back(mean_of(ap));
    rep.ap.push_back(std::move(ap));
    rep.counts.push_back(std::move(counts));
  }
  return rep;
}

template EvalReport evaluate_boxes<Box3D>(const std::vector<std::vector<Box3D>>&,
                                          const std::vector<std::vector<Box3D>>&, const std::vector<std::string>&,
                                          EvalMode, std::span<const double>, double);
template EvalReport evaluate_boxes<Box2D>(const std::vector<std::vector<Box2D>>&,
                                          const std::vector<std::vector<Box2D>>&, const std::vector<std::string>&,
                                          EvalMode, std::span<const double>, double);

EvalReport evaluate(const std::vector<AnnotationRecord>& dets, const std::vector<AnnotationRecord>& gts,
                    EvalMode mode, const std::vector<std::string>& class_names) {
  auto check = [&](const AnnotationRecord& r) {
    if (!r.class_names.empty() && r.class_names != class_names)
      throw Error(ErrorCode::class_list_mismatch, "frame " + r.frame_id + " uses a different class list");
  };
  std::unordered_map<std::string, const AnnotationRecord*> by_id;
  for (const auto& r : dets) {
    check(r);
    by_id[r.frame_id] = &r;
  }
  std::vector<const AnnotationRecord*> gt_sorted;
  for (const auto& r : gts) {
    check(r);
    gt_sorted.push_back(&r);
  }
  // frame order must not affect the report
  std::sort(gt_sorted.begin(), gt_sorted.end(),
            [](const AnnotationRecord* a, const AnnotationRecord* b) { return a->frame_id < b->frame_id; });

  auto pick = [&](auto member) {
    using Box = typename std::remove_reference_t<decltype(AnnotationRecord{}.*member)>::value_type;
    std::vector<std::vector<Box>> d, g;
    for (const auto* r : gt_sorted) {
      g.push_back(r->*member);
      auto it = by_id.find(r->frame_id);
      d.push_back(it == by_id.end() ? std::vector<Box>{} : it->second->*member);
    }
    return std::pair{std::move(d), std::move(g)};
  };
  if (mode == EvalMode::d3) {
    auto [d, g] = pick(&AnnotationRecord::boxes3d);
    return evaluate_boxes<Box3D>(d, g, class_names, mode);
  }
  auto [d, g] = pick(&AnnotationRecord::boxes2d);
  return evaluate_boxes<Box2D>(d, g, class_names, mode);
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j = json::object();
  j["mode"] = to_string(r.mode);
  j["class_names"] = r.class_names;
  j["thresholds"] = r.thresholds;
  json per = json::array();
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    json entry;
    entry["iou"] = r.thresholds[t];
    entry["map"] = opt(r.map[t]);
    entry["pooled_ap"] = opt(r.pooled_ap[t]);
    json classes = json::object();
    for (std::size_t c = 0; c < r.class_names.size(); ++c) {
      const auto& k = r.counts[t][c];
      classes[r.class_names[c]] = {{"ap", opt(r.ap[t][c])}, {"tp", k.tp}, {"fp", k.fp}, {"fn", k.fn}, {"n_gt", k.n_gt}};
    }
    entry["classes"] = std::move(classes);
    per.push_back(std::move(entry));
  }
  j["per_threshold"] = std::move(per);
}

SplitResult split_dataset(std::span<const FrameClasses> frames, double test_ratio, std::uint64_t seed) {
  if (!(test_ratio >= 0.0 && test_ratio <= 1.0))
    throw Error(ErrorCode::domain_violation, "test ratio must lie in [0, 1]");
  const std::size_t n = frames.size();
  std::mt19937_64 rng(seed);

  std::map<std::vector<int>, std::vector<std::size_t>> groups;
  int max_class = -1;
  for (std::size_t i = 0; i < n; ++i) {
    auto key = frames[i].classes;
    std::sort(key.begin(), key.end());
    for (int c : key) max_class = std::max(max_class, c);
    groups[std::move(key)].push_back(i);
  }
  const std::size_t n_classes = static_cast<std::size_t>(max_class + 1);

  struct Group {
    const std::vector<int>* key;
    std::vector<std::size_t> members;  // shuffled
    std::size_t n_test;
    double frac;
    std::vector<double> class_counts;
  };
  std::vector<Group> gs;
  std::vector<double> class_total(n_classes, 0.0), class_test(n_classes, 0.0);
  std::size_t test_count = 0;
  for (auto& [key, members] : groups) {
    Group g{&key, members, 0, 0.0, std::vector<double>(n_classes, 0.0)};
    std::shuffle(g.members.begin(), g.members.end(), rng);
    const double share = static_cast<double>(members.size()) * test_ratio;
    g.n_test = static_cast<std::size_t>(std::floor(share + 1e-9));
    g.frac = share - static_cast<double>(g.n_test);
    for (int c : key)
      if (c >= 0) g.class_counts[static_cast<std::size_t>(c)] += 1.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      class_total[c] += g.class_counts[c] * static_cast<double>(members.size());
      class_test[c] += g.class_counts[c] * static_cast<double>(g.n_test);
    }
    test_count += g.n_test;
    gs.push_back(std::move(g));
  }

  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_ratio));
  std::vector<std::size_t> candidates;
  for (std::size_t g = 0; g < gs.size(); ++g)
    if (gs[g].n_test < gs[g].members.size() && gs[g].frac > 1e-9) candidates.push_back(g);
  std::shuffle(candidates.begin(), candidates.end(), rng);

  auto deviation = [&](std::size_t c, double test) {
    if (class_total[c] == 0.0) return 0.0;
    const double d = test / class_total[c] - test_ratio;
    return d * d;
  };
  while (test_count < target && !candidates.empty()) {
    std::size_t best_k = 0;
    double best_gain = -std::numeric_limits<double>::infinity();
    double best_frac = -1.0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const Group& g = gs[candidates[k]];
      double gain = 0.0;
      for (std::size_t c = 0; c < n_classes; ++c)
        if (g.class_counts[c] > 0)
          gain += deviation(c, class_test[c]) - deviation(c, class_test[c] + g.class_counts[c]);
      if (gain > best_gain + 1e-15 || (std::abs(gain - best_gain) <= 1e-15 && g.frac > best_frac)) {
        best_gain = gain;
        best_frac = g.frac;
        best_k = k;
      }
    }
    Group& g = gs[candidates[best_k]];
    ++g.n_test;
    ++test_count;
    for (std::size_t c = 0; c < n_classes; ++c) class_test[c] += g.class_counts[c];
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best_k));
  }

  std::vector<std::uint8_t> is_test(n, 0);
  for (const auto& g : gs)
    for (std::size_t k = 0; k < g.n_test; ++k) is_test[g.members[k]] = 1;
  SplitResult out;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? out.test : out.train).push_back(frames[i].frame_id);
  return out;
}

std::vector<double> class_shares(std::span<const FrameClasses> frames, const std::vector<std::string>& subset,
                                 std::size_t n_classes) {
  std::unordered_map<std::string, std::uint8_t> in;
  for (const auto& id : subset) in[id] = 1;
  std::vector<double> total(n_classes, 0.0), sub(n_classes, 0.0);
  for (const auto& f : frames) {
    const bool hit = in.contains(f.frame_id);
    for (int c : f.classes) {
      if (c < 0 || static_cast<std::size_t>(c) >= n_classes) continue;
      total[static_cast<std::size_t>(c)] += 1.0;
      if (hit) sub[static_cast<std::size_t>(c)] += 1.0;
    }
  }
  std::vector<double> out(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) out[c] = total[c] > 0 ? sub[c] / total[c] : 0.0;
  return out;
}

}  // namespace radkit
