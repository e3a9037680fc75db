#include "mtmc/oracles.hpp"

#include "mtmc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

namespace mtmc::oracle {

namespace {

// Recursive enumeration over rows in ascending order; each row takes a free
// column or one of the allowed skips (rows − cols skips when rows > cols, so
// the matching always has cardinality min(rows, cols)).
void enumerate_assignments(const MatX& scores, Index row,
                           std::vector<char>& used, int skips_left,
                           double acc, double& best) {
  const Index n = scores.rows();
  const Index m = scores.cols();
  if (row == n) {
    best = std::max(best, acc);
    return;
  }
  if (skips_left > 0)
    enumerate_assignments(scores, row + 1, used, skips_left - 1, acc, best);
  for (Index c = 0; c < m; ++c) {
    if (used[static_cast<std::size_t>(c)]) continue;
    used[static_cast<std::size_t>(c)] = 1;
    enumerate_assignments(scores, row + 1, used, skips_left,
                          acc + scores(row, c), best);
    used[static_cast<std::size_t>(c)] = 0;
  }
}

}  // namespace

double brute_force_assignment_max(const MatX& scores) {
  const Index n = scores.rows();
  const Index m = scores.cols();
  if (n == 0 || m == 0) return 0.0;
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  double best = -std::numeric_limits<double>::infinity();
  const int skips = n > m ? static_cast<int>(n - m) : 0;
  enumerate_assignments(scores, 0, used, skips, 0.0, best);
  return best;
}

std::vector<std::optional<std::int64_t>> brute_force_gt_assign(
    std::span<const TargetObs> detections, std::span<const GtBox> gt_boxes) {
  const std::size_t n_det = detections.size();
  const std::size_t n_gt = gt_boxes.size();
  std::vector<std::optional<std::int64_t>> labels(n_det);
  if (n_det == 0 || n_gt == 0) return labels;

  MatX m(static_cast<Index>(n_gt), static_cast<Index>(n_det));
  for (std::size_t g = 0; g < n_gt; ++g)
    for (std::size_t d = 0; d < n_det; ++d)
      m(static_cast<Index>(g), static_cast<Index>(d)) =
          iou(gt_boxes[g].box, detections[d].box);

  for (std::size_t d = 0; d < n_det; ++d) {
    // Every GT whose gated arg-max lands on detection d; the best-IoU
    // claimant (earliest on ties) labels it.
    std::optional<std::size_t> winner;
    for (std::size_t g = 0; g < n_gt; ++g) {
      Index arg = -1;
      double best = kGtAssignIouThreshold;
      for (std::size_t dd = 0; dd < n_det; ++dd) {
        const double v = m(static_cast<Index>(g), static_cast<Index>(dd));
        if (v > best) {
          best = v;
          arg = static_cast<Index>(dd);
        }
      }
      if (arg != static_cast<Index>(d)) continue;
      if (!winner || m(static_cast<Index>(g), static_cast<Index>(d)) >
                         m(static_cast<Index>(*winner), static_cast<Index>(d)))
        winner = g;
    }
    if (winner) labels[d] = gt_boxes[*winner].trajectory_id;
  }
  return labels;
}

namespace {

struct FlatBox {
  std::int64_t id = 0;
  BoxPx box;
};

using FrameTable = std::map<FrameRef, std::vector<FlatBox>>;

FrameTable flatten(std::span<const Trajectory> trajs) {
  FrameTable table;
  for (const Trajectory& t : trajs)
    for (const TrackPoint& p : t.members)
      table[p.frame].push_back({t.id, p.box});
  return table;
}

// All maximal eligible pairings of one frame, tracked as (cardinality, total
// IoU); returns the unique optimum's pairs as (gt index, pred index).
std::vector<std::pair<std::size_t, std::size_t>> enumerate_frame_match(
    const std::vector<FlatBox>& gt, const std::vector<FlatBox>& pred,
    double thr) {
  std::vector<std::pair<std::size_t, std::size_t>> best_pairs;
  std::size_t best_card = 0;
  double best_iou = -1.0;
  int optima = 0;

  std::vector<char> used(pred.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> current;
  std::function<void(std::size_t, double)> rec = [&](std::size_t g,
                                                     double acc) {
    if (g == gt.size()) {
      if (current.size() > best_card ||
          (current.size() == best_card && acc > best_iou)) {
        best_card = current.size();
        best_iou = acc;
        best_pairs = current;
        optima = 1;
      } else if (current.size() == best_card && acc == best_iou) {
        ++optima;
      }
      return;
    }
    rec(g + 1, acc);  // gt[g] unmatched
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (used[p]) continue;
      const double v = iou(gt[g].box, pred[p].box);
      if (v < thr) continue;
      used[p] = 1;
      current.emplace_back(g, p);
      rec(g + 1, acc + v);
      current.pop_back();
      used[p] = 0;
    }
  };
  rec(0, 0.0);
  if (best_card > 0 && optima != 1)
    throw DataError("oracle: frame matching optimum is not unique");
  return best_pairs;
}

}  // namespace

EvalReport enumerate_cv_report(std::span<const Trajectory> gt,
                               std::span<const Trajectory> preds, int horizon,
                               const EvalConfig& config) {
  if (!config.valid()) throw ConfigError("oracle: invalid eval config");
  const FrameTable gt_frames = flatten(gt);
  const FrameTable pred_frames = flatten(preds);

  std::set<FrameRef> frames;
  for (const auto& [f, boxes] : gt_frames) frames.insert(f);
  for (const auto& [f, boxes] : pred_frames) frames.insert(f);

  EvalReport report;
  auto& c = report.counters;
  c.misses.assign(static_cast<std::size_t>(horizon), 0);
  c.false_pos.assign(static_cast<std::size_t>(horizon), 0);
  c.mismatches.assign(static_cast<std::size_t>(horizon), 0);
  c.gt_count.assign(static_cast<std::size_t>(horizon), 0);

  std::map<std::int64_t, std::int64_t> last_match;        // gt id → pred id
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> overlap;
  std::int64_t total_gt = 0;
  std::int64_t total_pred = 0;

  static const std::vector<FlatBox> kEmpty;
  for (const FrameRef& f : frames) {
    if (f.time < 1 || f.time > horizon)
      throw DataError("oracle: frame outside horizon");
    const auto gi = gt_frames.find(f);
    const auto pi = pred_frames.find(f);
    const auto& g = gi == gt_frames.end() ? kEmpty : gi->second;
    const auto& p = pi == pred_frames.end() ? kEmpty : pi->second;
    total_gt += static_cast<std::int64_t>(g.size());
    total_pred += static_cast<std::int64_t>(p.size());
    const auto t = static_cast<std::size_t>(f.time - 1);
    c.gt_count[t] += static_cast<std::int64_t>(g.size());

    const auto pairs = enumerate_frame_match(g, p, config.iou_threshold);
    c.misses[t] += static_cast<std::int64_t>(g.size() - pairs.size());
    c.false_pos[t] += static_cast<std::int64_t>(p.size() - pairs.size());
    for (const auto& [gidx, pidx] : pairs) {
      const std::int64_t gid = g[gidx].id;
      const std::int64_t pid = p[pidx].id;
      const auto it = last_match.find(gid);
      if (it != last_match.end() && it->second != pid) ++c.mismatches[t];
      last_match[gid] = pid;
      ++overlap[{gid, pid}];
    }
  }

  // CVMA over the enumerated counters.
  const std::int64_t g_total = c.total_gt();
  if (g_total > 0)
    report.scores.cvma =
        1.0 - static_cast<double>(c.total_misses() + c.total_false_pos() +
                                  2 * c.total_mismatches()) /
                  static_cast<double>(g_total);

  // Identity pairing by exhaustive injection enumeration.
  std::vector<std::int64_t> gt_ids, pred_ids;
  for (const Trajectory& t : gt) gt_ids.push_back(t.id);
  for (const Trajectory& t : preds) pred_ids.push_back(t.id);
  std::sort(gt_ids.begin(), gt_ids.end());
  std::sort(pred_ids.begin(), pred_ids.end());

  std::int64_t best_idtp = 0;
  std::vector<char> taken(pred_ids.size(), 0);
  std::function<void(std::size_t, std::int64_t)> pair_rec =
      [&](std::size_t gi, std::int64_t acc) {
        if (gi == gt_ids.size()) {
          best_idtp = std::max(best_idtp, acc);
          return;
        }
        pair_rec(gi + 1, acc);  // gt id unpaired
        for (std::size_t pi = 0; pi < pred_ids.size(); ++pi) {
          if (taken[pi]) continue;
          const auto it = overlap.find({gt_ids[gi], pred_ids[pi]});
          const std::int64_t w = it == overlap.end() ? 0 : it->second;
          taken[pi] = 1;
          pair_rec(gi + 1, acc + w);
          taken[pi] = 0;
        }
      };
  pair_rec(0, 0);

  report.scores.idtp = best_idtp;
  report.scores.idfp = total_pred - best_idtp;
  report.scores.idfn = total_gt - best_idtp;
  if (best_idtp + report.scores.idfp > 0)
    report.scores.cvidp = static_cast<double>(best_idtp) /
                          static_cast<double>(best_idtp + report.scores.idfp);
  if (best_idtp + report.scores.idfn > 0)
    report.scores.cvidr = static_cast<double>(best_idtp) /
                          static_cast<double>(best_idtp + report.scores.idfn);
  if (report.scores.cvidp && report.scores.cvidr &&
      *report.scores.cvidp + *report.scores.cvidr > 0)
    report.scores.cvidf1 = 2.0 * *report.scores.cvidp * *report.scores.cvidr /
                           (*report.scores.cvidp + *report.scores.cvidr);
  return report;
}

double gradient_max_rel_err(const TrainingBatch& batch,
                            const ModelParams& params, double step,
                            double floor) {
  ModelParams work = params;
  ModelParams grads;
  loss_gradients(batch, work, grads);
  auto wrefs = tensor_refs(work);
  auto grefs = tensor_refs(grads);

  double max_rel = 0.0;
  for (std::size_t t = 0; t < wrefs.size(); ++t) {
    double* w = wrefs[t].data;
    const double* g = grefs[t].data;
    const Index n = wrefs[t].size();
    for (Index i = 0; i < n; ++i) {
      const double saved = w[i];
      w[i] = saved + step;
      const double lp = loss_value(batch, work).total;
      w[i] = saved - step;
      const double lm = loss_value(batch, work).total;
      w[i] = saved;
      const double fd = (lp - lm) / (2.0 * step);
      const double denom = std::max({std::abs(fd), std::abs(g[i]), floor});
      max_rel = std::max(max_rel, std::abs(fd - g[i]) / denom);
    }
  }
  return max_rel;
}

TrainingBatch random_training_batch(Index n, Index d_raw,
                                    const SceneDims& dims,
                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TargetObs> obs;
  std::vector<std::optional<std::int64_t>> labels;
  for (Index i = 0; i < n; ++i) {
    TargetObs o;
    o.frame.camera = rng.uniform_int(1, dims.cameras);
    o.frame.time = rng.uniform_int(1, dims.horizon);
    const double w = rng.uniform(20.0, 0.2 * dims.width);
    const double h = rng.uniform(20.0, 0.2 * dims.height);
    const double x = rng.uniform(0.0, dims.width - w);
    const double y = rng.uniform(0.0, dims.height - h);
    o.box = {x, y, x + w, y + h};
    o.app = rng.gaussian_vec(d_raw);
    o.app.normalize();
    o.det_score = 1.0;
    obs.push_back(std::move(o));
    if (rng.uniform01() < 0.2)
      labels.emplace_back(std::nullopt);
    else
      labels.emplace_back(rng.uniform_int(1, 4));
  }
  return make_batch(obs, labels, dims);
}

}  // namespace mtmc::oracle
