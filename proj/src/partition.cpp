#include "dieclust/partition.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dieclust/grid.hpp"

namespace dieclust {

Partition::Partition(const std::vector<int>& labels) {
  std::unordered_map<int, int> remap;
  labels_.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
    labels_.push_back(it->second);
  }
  num_clusters_ = static_cast<int>(remap.size());
}

Partition Partition::singletons(std::size_t n) {
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<int>(i);
  return Partition(l);
}

Partition Partition::single_cluster(std::size_t n) { return Partition(std::vector<int>(n, 0)); }

std::vector<int> Partition::cluster_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(num_clusters_), 0);
  for (int l : labels_) ++sizes[l];
  return sizes;
}

std::vector<std::vector<int>> Partition::clusters() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_clusters_));
  for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(static_cast<int>(i));
  return out;
}

void write_partition_csv(std::ostream& out, const Partition& p,
                         const std::vector<std::string>& ids) {
  if (ids.size() != p.size()) throw std::invalid_argument("id table size mismatch");
  out << "image_id,cluster_id\n";
  for (std::size_t i = 0; i < p.size(); ++i) out << ids[i] << ',' << p[i] + 1 << '\n';
}

namespace {

std::vector<std::pair<std::string, std::string>> read_two_columns(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty csv");
  std::vector<std::pair<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("malformed csv line: " + line);
    auto second = line.substr(comma + 1);
    if (const auto c2 = second.find(','); c2 != std::string::npos) second.resize(c2);
    rows.emplace_back(line.substr(0, comma), second);
  }
  return rows;
}

}  // namespace

Partition read_partition_csv(std::istream& in, std::vector<std::string>& ids) {
  ids.clear();
  std::vector<int> labels;
  for (auto& [id, label] : read_two_columns(in)) {
    ids.push_back(id);
    labels.push_back(std::stoi(label));
  }
  return Partition(labels);
}

std::vector<int> read_label_csv(std::istream& in, std::vector<std::string>& ids) {
  ids.clear();
  std::unordered_map<std::string, int> remap;
  std::vector<int> labels;
  for (auto& [id, label] : read_two_columns(in)) {
    ids.push_back(id);
    auto [it, inserted] = remap.try_emplace(label, static_cast<int>(remap.size()));
    labels.push_back(it->second);
  }
  return labels;
}

}  // namespace dieclust
