#include "mtmc/metrics.hpp"

#include "mtmc/geometry.hpp"
#include "mtmc/hungarian.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace mtmc {

namespace {

std::int64_t sum(const std::vector<std::int64_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::int64_t{0});
}

// (camera, time) → boxes with ids, in trajectory-id order.
std::map<FrameRef, std::vector<IdBox>> by_frame(
    std::span<const Trajectory> trajs, int horizon) {
  std::map<FrameRef, std::vector<IdBox>> out;
  for (const Trajectory& t : trajs) {
    for (const TrackPoint& pt : t.members) {
      if (pt.frame.time < 1 || pt.frame.time > horizon)
        throw DataError("metrics: member time outside horizon");
      out[pt.frame].push_back({t.id, pt.box});
    }
  }
  return out;
}

std::int64_t member_count(std::span<const Trajectory> trajs) {
  std::int64_t n = 0;
  for (const Trajectory& t : trajs)
    n += static_cast<std::int64_t>(t.members.size());
  return n;
}

}  // namespace

std::int64_t FrameCounters::total_misses() const { return sum(misses); }
std::int64_t FrameCounters::total_false_pos() const { return sum(false_pos); }
std::int64_t FrameCounters::total_mismatches() const { return sum(mismatches); }
std::int64_t FrameCounters::total_gt() const { return sum(gt_count); }

FrameMatch match_frame(std::span<const IdBox> gt, std::span<const IdBox> pred,
                       const EvalConfig& config) {
  if (!config.valid()) throw ConfigError("match_frame: invalid config");
  FrameMatch fm;
  const auto n = static_cast<Index>(gt.size());
  const auto m = static_cast<Index>(pred.size());
  if (n == 0 || m == 0) {
    for (std::size_t i = 0; i < gt.size(); ++i) fm.unmatched_gt.push_back(i);
    for (std::size_t j = 0; j < pred.size(); ++j)
      fm.unmatched_pred.push_back(j);
    return fm;
  }
  // Cardinality dominates total IoU: every eligible pair scores BIG + IoU,
  // ineligible pairs score 0, and BIG exceeds any possible IoU sum.
  const double big = static_cast<double>(n + m + 1);
  MatX scores = MatX::Zero(n, m);
  MatX ious(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double v = iou(gt[static_cast<std::size_t>(i)].box,
                           pred[static_cast<std::size_t>(j)].box);
      ious(i, j) = v;
      if (v >= config.iou_threshold) scores(i, j) = big + v;
    }
  }
  const Assignment asg = solve_assignment_max(scores);
  std::vector<char> pred_used(pred.size(), 0);
  for (Index i = 0; i < n; ++i) {
    const Index j = asg.col_of[static_cast<std::size_t>(i)];
    if (j >= 0 && scores(i, j) >= big) {
      fm.pairs.emplace_back(static_cast<std::size_t>(i),
                            static_cast<std::size_t>(j), ious(i, j));
      pred_used[static_cast<std::size_t>(j)] = 1;
    } else {
      fm.unmatched_gt.push_back(static_cast<std::size_t>(i));
    }
  }
  for (std::size_t j = 0; j < pred.size(); ++j)
    if (!pred_used[j]) fm.unmatched_pred.push_back(j);
  return fm;
}

std::pair<std::optional<double>, FrameCounters> cvma(
    std::span<const Trajectory> gt, std::span<const Trajectory> preds,
    int horizon, const EvalConfig& config) {
  if (horizon < 1) throw DataError("cvma: horizon must be >= 1");
  FrameCounters c;
  c.misses.assign(static_cast<std::size_t>(horizon), 0);
  c.false_pos.assign(static_cast<std::size_t>(horizon), 0);
  c.mismatches.assign(static_cast<std::size_t>(horizon), 0);
  c.gt_count.assign(static_cast<std::size_t>(horizon), 0);

  const auto gt_frames = by_frame(gt, horizon);
  const auto pred_frames = by_frame(preds, horizon);
  std::set<FrameRef> all_frames;
  for (const auto& [f, _] : gt_frames) all_frames.insert(f);
  for (const auto& [f, _] : pred_frames) all_frames.insert(f);

  // FrameRef ordering is (time, camera), so this scan is time-major; each GT
  // identity's last counted predicted id carries across cameras.
  std::map<std::int64_t, std::int64_t> last_pred;
  const std::vector<IdBox> empty;
  for (const FrameRef& f : all_frames) {
    const auto git = gt_frames.find(f);
    const auto pit = pred_frames.find(f);
    const auto& g = git == gt_frames.end() ? empty : git->second;
    const auto& p = pit == pred_frames.end() ? empty : pit->second;
    const FrameMatch fm = match_frame(g, p, config);
    const auto t = static_cast<std::size_t>(f.time - 1);
    c.gt_count[t] += static_cast<std::int64_t>(g.size());
    c.misses[t] += static_cast<std::int64_t>(fm.unmatched_gt.size());
    c.false_pos[t] += static_cast<std::int64_t>(fm.unmatched_pred.size());
    for (const auto& [gi, pj, v] : fm.pairs) {
      const std::int64_t gid = g[gi].id;
      const std::int64_t pid = p[pj].id;
      const auto it = last_pred.find(gid);
      if (it != last_pred.end() && it->second != pid) ++c.mismatches[t];
      last_pred[gid] = pid;
    }
  }

  const std::int64_t denom = c.total_gt();
  std::optional<double> score;
  if (denom > 0) {
    const std::int64_t err =
        c.total_misses() + c.total_false_pos() + 2 * c.total_mismatches();
    score = 1.0 - static_cast<double>(err) / static_cast<double>(denom);
  }
  return {score, std::move(c)};
}

CvScores cvidf1(std::span<const Trajectory> gt,
                std::span<const Trajectory> preds, int horizon,
                const EvalConfig& config) {
  if (horizon < 1) throw DataError("cvidf1: horizon must be >= 1");
  const auto gt_frames = by_frame(gt, horizon);
  const auto pred_frames = by_frame(preds, horizon);

  std::vector<std::int64_t> gt_ids, pred_ids;
  for (const Trajectory& t : gt) gt_ids.push_back(t.id);
  for (const Trajectory& t : preds) pred_ids.push_back(t.id);
  std::sort(gt_ids.begin(), gt_ids.end());
  std::sort(pred_ids.begin(), pred_ids.end());
  gt_ids.erase(std::unique(gt_ids.begin(), gt_ids.end()), gt_ids.end());
  pred_ids.erase(std::unique(pred_ids.begin(), pred_ids.end()),
                 pred_ids.end());

  // Correspondence counts from the per-frame matching.
  MatX overlap = MatX::Zero(static_cast<Index>(gt_ids.size()),
                            static_cast<Index>(pred_ids.size()));
  const std::vector<IdBox> empty;
  for (const auto& [f, g] : gt_frames) {
    const auto pit = pred_frames.find(f);
    const auto& p = pit == pred_frames.end() ? empty : pit->second;
    const FrameMatch fm = match_frame(g, p, config);
    for (const auto& [gi, pj, v] : fm.pairs) {
      const auto gr = std::lower_bound(gt_ids.begin(), gt_ids.end(),
                                       g[gi].id) -
                      gt_ids.begin();
      const auto pc = std::lower_bound(pred_ids.begin(), pred_ids.end(),
                                       p[pj].id) -
                      pred_ids.begin();
      overlap(static_cast<Index>(gr), static_cast<Index>(pc)) += 1.0;
    }
  }

  CvScores s;
  double idtp = 0.0;
  if (overlap.rows() > 0 && overlap.cols() > 0)
    idtp = solve_assignment_max(overlap).total;
  const std::int64_t total_gt = member_count(gt);
  const std::int64_t total_pred = member_count(preds);
  s.idtp = static_cast<std::int64_t>(idtp);
  s.idfp = total_pred - s.idtp;
  s.idfn = total_gt - s.idtp;
  if (total_pred > 0)
    s.cvidp = static_cast<double>(s.idtp) / static_cast<double>(total_pred);
  if (total_gt > 0)
    s.cvidr = static_cast<double>(s.idtp) / static_cast<double>(total_gt);
  if (total_pred + total_gt > 0)
    s.cvidf1 = 2.0 * static_cast<double>(s.idtp) /
               static_cast<double>(total_pred + total_gt);
  return s;
}

EvalReport evaluate_all(std::span<const Trajectory> gt,
                        std::span<const Trajectory> preds, int horizon,
                        const EvalConfig& config) {
  EvalReport r;
  auto [score, counters] = cvma(gt, preds, horizon, config);
  r.scores = cvidf1(gt, preds, horizon, config);
  r.scores.cvma = score;
  r.counters = std::move(counters);
  return r;
}

}  // namespace mtmc
