#include "dieclust/review.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

namespace dieclust {

using nlohmann::json;

std::size_t ReviewState::num_items() const {
  std::size_t n = 0;
  for (const auto& [id, members] : clusters) n += members.size();
  return n;
}

std::vector<int> ReviewState::cluster_of() const {
  std::vector<int> out(num_items(), 0);
  for (const auto& [id, members] : clusters)
    for (int i : members) out[static_cast<std::size_t>(i)] = id;
  return out;
}

Partition ReviewState::partition() const { return Partition(cluster_of()); }

ReviewState initial_review_state(const Partition& base) {
  ReviewState s;
  for (std::size_t i = 0; i < base.size(); ++i) s.clusters[base[i] + 1].push_back(static_cast<int>(i));
  for (const auto& [id, members] : s.clusters) s.status[id] = ClusterStatus::unreviewed;
  s.next_id = base.num_clusters() + 1;
  s.max_clusters = base.num_clusters();
  return s;
}

namespace {

std::vector<int>& cluster_ref(ReviewState& s, int id) {
  auto it = s.clusters.find(id);
  if (it == s.clusters.end()) throw ReviewOpError("unknown cluster " + std::to_string(id));
  return it->second;
}

std::pair<int, int> ordered(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

void merge_into(ReviewState& s, int a, int b) {
  if (a == b) throw ReviewOpError("cannot merge a cluster with itself");
  auto& ma = cluster_ref(s, a);
  auto& mb = cluster_ref(s, b);
  ma.insert(ma.end(), mb.begin(), mb.end());
  std::sort(ma.begin(), ma.end());
  const bool validated = s.status[a] == ClusterStatus::validated && s.status[b] == ClusterStatus::validated;
  s.status[a] = validated ? ClusterStatus::validated : ClusterStatus::unreviewed;
  if (!s.representative.count(a) && s.representative.count(b)) s.representative[a] = s.representative[b];
  s.representative.erase(b);
  s.status.erase(b);
  s.clusters.erase(b);
  // "Different" decisions against b now hold for the union.
  std::set<std::pair<int, int>> next;
  for (auto [x, y] : s.compared) {
    if (x == b) x = a;
    if (y == b) y = a;
    if (x != y) next.insert(ordered(x, y));
  }
  s.compared = std::move(next);
  ++s.comparisons;
}

struct Applier {
  ReviewState& s;

  void operator()(const SplitOp& op) {
    auto& members = cluster_ref(s, op.cluster);
    if (op.groups.empty()) throw ReviewOpError("split needs at least one group");
    std::vector<int> seen;
    for (const auto& g : op.groups) {
      if (g.empty()) throw ReviewOpError("split group is empty");
      seen.insert(seen.end(), g.begin(), g.end());
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw ReviewOpError("split groups overlap");
    if (seen != members) throw ReviewOpError("split groups do not cover cluster " + std::to_string(op.cluster));

    const bool keep_rep = s.representative.count(op.cluster) > 0;
    const int rep = keep_rep ? s.representative[op.cluster] : -1;
    s.representative.erase(op.cluster);
    for (std::size_t g = 0; g < op.groups.size(); ++g) {
      const int id = g == 0 ? op.cluster : s.next_id++;
      auto sorted = op.groups[g];
      std::sort(sorted.begin(), sorted.end());
      if (keep_rep && std::binary_search(sorted.begin(), sorted.end(), rep)) s.representative[id] = rep;
      s.clusters[id] = std::move(sorted);
      s.status[id] = ClusterStatus::unreviewed;
    }
    // Comparisons made against the old cluster no longer describe its parts.
    std::erase_if(s.compared, [&](const auto& p) { return p.first == op.cluster || p.second == op.cluster; });
    s.max_clusters = std::max(s.max_clusters, static_cast<int>(s.clusters.size()));
  }

  void operator()(const MergeOp& op) { merge_into(s, op.a, op.b); }

  void operator()(const ValidateOp& op) {
    cluster_ref(s, op.cluster);
    s.status[op.cluster] = ClusterStatus::validated;
  }

  void operator()(const RepresentativeOp& op) {
    const auto& m = cluster_ref(s, op.cluster);
    if (!std::binary_search(m.begin(), m.end(), op.item))
      throw ReviewOpError("item is not a member of cluster " + std::to_string(op.cluster));
    s.representative[op.cluster] = op.item;
  }

  void operator()(const CompareOp& op) {
    if (op.same) {
      merge_into(s, op.a, op.b);
      return;
    }
    cluster_ref(s, op.a);
    cluster_ref(s, op.b);
    if (op.a == op.b) throw ReviewOpError("cannot compare a cluster with itself");
    s.compared.insert(ordered(op.a, op.b));
    ++s.comparisons;
  }
};

}  // namespace

void apply_review_op(ReviewState& state, const ReviewOp& op) { std::visit(Applier{state}, op); }

ReviewState apply_review_ops(const Partition& base, const std::vector<ReviewOp>& ops) {
  ReviewState s = initial_review_state(base);
  for (const auto& op : ops) apply_review_op(s, op);
  return s;
}

// ---------------------------------------------------------------- JSON

namespace {

struct ToJson {
  const std::vector<std::string>& ids;
  json operator()(const SplitOp& op) const {
    json groups = json::array();
    for (const auto& g : op.groups) {
      json members = json::array();
      for (int i : g) members.push_back(ids.at(static_cast<std::size_t>(i)));
      groups.push_back(members);
    }
    return {{"type", "split"}, {"cluster", op.cluster}, {"groups", groups}};
  }
  json operator()(const MergeOp& op) const { return {{"type", "merge"}, {"clusters", {op.a, op.b}}}; }
  json operator()(const ValidateOp& op) const { return {{"type", "validate"}, {"cluster", op.cluster}}; }
  json operator()(const RepresentativeOp& op) const {
    return {{"type", "representative"}, {"cluster", op.cluster}, {"image", ids.at(static_cast<std::size_t>(op.item))}};
  }
  json operator()(const CompareOp& op) const {
    return {{"type", "compare"}, {"clusters", {op.a, op.b}}, {"same", op.same}};
  }
};

int item_of(const json& v, const std::map<std::string, int>& index) {
  const auto it = index.find(v.get<std::string>());
  if (it == index.end()) throw ReviewOpError("unknown image " + v.get<std::string>());
  return it->second;
}

std::pair<int, int> two_clusters(const json& j) {
  const json& c = j.at("clusters");
  if (!c.is_array() || c.size() != 2) throw ReviewOpError("'clusters' must list two ids");
  return {c[0].get<int>(), c[1].get<int>()};
}

}  // namespace

json review_op_to_json(const ReviewOp& op, const std::vector<std::string>& ids) {
  return std::visit(ToJson{ids}, op);
}

ReviewOp review_op_from_json(const json& j, const std::map<std::string, int>& index) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "split") {
      SplitOp op{j.at("cluster").get<int>(), {}};
      for (const auto& g : j.at("groups")) {
        std::vector<int> members;
        for (const auto& v : g) members.push_back(item_of(v, index));
        op.groups.push_back(std::move(members));
      }
      return op;
    }
    if (type == "merge") {
      const auto [a, b] = two_clusters(j);
      return MergeOp{a, b};
    }
    if (type == "validate") return ValidateOp{j.at("cluster").get<int>()};
    if (type == "representative") return RepresentativeOp{j.at("cluster").get<int>(), item_of(j.at("image"), index)};
    if (type == "compare") {
      const auto [a, b] = two_clusters(j);
      return CompareOp{a, b, j.at("same").get<bool>()};
    }
    throw ReviewOpError("unknown op type " + type);
  } catch (const json::exception& e) {
    throw ReviewOpError(std::string("malformed op: ") + e.what());
  }
}

// ---------------------------------------------------------------- session

VersionConflict::VersionConflict(std::uint64_t expected, std::uint64_t actual)
    : std::runtime_error("version conflict: expected " + std::to_string(expected) + ", session is at " +
                         std::to_string(actual)),
      actual_(actual) {}

ReviewSession::ReviewSession(Partition base, std::vector<std::string> ids, std::vector<int> grades,
                             std::optional<DistanceMatrix> distances)
    : base_(std::move(base)), ids_(std::move(ids)), grades_(std::move(grades)), distances_(std::move(distances)) {
  if (ids_.size() != base_.size()) throw std::invalid_argument("id table does not match the partition");
  if (!grades_.empty() && grades_.size() != ids_.size()) throw std::invalid_argument("grade table size mismatch");
  if (distances_ && distances_->size() != ids_.size()) throw std::invalid_argument("distance matrix size mismatch");
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!index_.emplace(ids_[i], static_cast<int>(i)).second) throw std::invalid_argument("duplicate image id " + ids_[i]);
  state_ = initial_review_state(base_);
}

std::uint64_t ReviewSession::submit(const std::vector<ReviewOp>& ops, std::uint64_t expected_version) {
  if (expected_version != version()) throw VersionConflict(expected_version, version());
  ReviewState next = state_;
  for (const auto& op : ops) apply_review_op(next, op);
  state_ = std::move(next);
  log_.insert(log_.end(), ops.begin(), ops.end());
  return version();
}

double ReviewSession::d(int i, int j) const { return distances_ ? (*distances_)(i, j) : 0.0; }

int ReviewSession::representative(int cluster) const {
  const auto it = state_.clusters.find(cluster);
  if (it == state_.clusters.end()) throw ReviewOpError("unknown cluster " + std::to_string(cluster));
  if (const auto r = state_.representative.find(cluster); r != state_.representative.end()) return r->second;
  const auto& m = it->second;
  if (!grades_.empty()) {
    // Grade 0 means unknown and ranks after every known grade.
    auto key = [&](int i) { const int g = grades_[static_cast<std::size_t>(i)]; return g > 0 ? g : std::numeric_limits<int>::max(); };
    int best = m.front();
    for (int i : m)
      if (key(i) < key(best)) best = i;
    if (key(best) != std::numeric_limits<int>::max()) return best;
  }
  int best = m.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (int i : m) {
    double sum = 0.0;
    for (int j : m) sum += d(i, j);
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

ClusterSummary ReviewSession::summary(int cluster) const {
  const auto it = state_.clusters.find(cluster);
  if (it == state_.clusters.end()) throw ReviewOpError("unknown cluster " + std::to_string(cluster));
  ClusterSummary s{cluster, it->second, representative(cluster), state_.status.at(cluster), 0.0};
  const auto& m = it->second;
  if (m.size() > 1) {
    double sum = 0.0;
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b) sum += d(m[a], m[b]);
    s.mean_within_distance = sum / (m.size() * (m.size() - 1) / 2.0);
  }
  return s;
}

std::vector<ClusterSummary> ReviewSession::summaries(const std::string& sort_by) const {
  std::vector<ClusterSummary> out;
  for (const auto& [id, members] : state_.clusters) out.push_back(summary(id));
  if (sort_by == "size") {
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.members.size() > b.members.size(); });
  } else if (sort_by == "cohesion") {
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.mean_within_distance < b.mean_within_distance;
    });
  } else if (sort_by != "id") {
    throw std::invalid_argument("sort must be size, cohesion or id");
  }
  return out;
}

std::optional<ComparisonSuggestion> ReviewSession::next_comparison(ComparisonOrder order) const {
  std::vector<std::pair<int, int>> reps;
  for (const auto& [id, members] : state_.clusters) reps.emplace_back(id, representative(id));
  auto grade = [&](int item) { return grades_.empty() ? 0 : grades_[static_cast<std::size_t>(item)]; };

  std::optional<ComparisonSuggestion> best;
  int best_grade = 0;
  for (std::size_t x = 0; x < reps.size(); ++x)
    for (std::size_t y = x + 1; y < reps.size(); ++y) {
      const auto [a, ra] = reps[x];
      const auto [b, rb] = reps[y];
      if (state_.compared.count(ordered(a, b))) continue;
      const ComparisonSuggestion c{a, b, ra, rb, d(ra, rb)};
      const int g = std::max(grade(ra), grade(rb));
      bool better = !best;
      if (best) {
        if (order == ComparisonOrder::badly_preserved_first && g != best_grade)
          better = g > best_grade;
        else
          better = c.distance < best->distance;
      }
      if (better) {
        best = c;
        best_grade = g;
      }
    }
  return best;
}

VerificationBound ReviewSession::bound() const {
  const auto k = static_cast<std::int64_t>(state_.clusters.size());
  const auto kt = static_cast<std::int64_t>(std::max<int>(state_.max_clusters, static_cast<int>(k)));
  return verification_bound(k, kt, static_cast<std::int64_t>(ids_.size()));
}

void ReviewSession::write_labels_csv(std::ostream& out) const {
  out << "image_id,cluster_id\n";
  const auto of = state_.cluster_of();
  for (std::size_t i = 0; i < ids_.size(); ++i) out << ids_[i] << ',' << of[i] << '\n';
}

}  // namespace dieclust
