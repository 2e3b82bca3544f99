#ifndef DIECLUST_PARTITION_HPP
#define DIECLUST_PARTITION_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dieclust {

/// A set partition of items 0..N-1. Labels are kept canonical: 0..K-1 in
/// order of first appearance, so equal partitions compare equal.
class Partition {
 public:
  Partition() = default;
  /// Any integer labels; they are canonicalized.
  explicit Partition(const std::vector<int>& labels);

  static Partition singletons(std::size_t n);
  static Partition single_cluster(std::size_t n);

  std::size_t size() const { return labels_.size(); }
  int num_clusters() const { return num_clusters_; }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  std::vector<int> cluster_sizes() const;
  std::vector<std::vector<int>> clusters() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> labels_;
  int num_clusters_ = 0;
};

/// CSV with header image_id,cluster_id; cluster ids are written 1-based.
void write_partition_csv(std::ostream& out, const Partition& p, const std::vector<std::string>& ids);
/// Reads image_id,cluster_id rows; returns ids in file order.
Partition read_partition_csv(std::istream& in, std::vector<std::string>& ids);

/// Reads image_id,label rows with arbitrary string labels, mapping labels to
/// ints in order of first appearance.
std::vector<int> read_label_csv(std::istream& in, std::vector<std::string>& ids);

}  // namespace dieclust

#endif
